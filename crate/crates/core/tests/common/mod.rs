//! Shared fixtures, generators, and independent oracles for the
//! integration and acceptance suites.
//!
//! Oracles here deliberately avoid the library's own parsing and detection
//! paths: the UDW oracle is a line scanner, the expression oracle is an
//! index scan, and the truthiness oracle re-implements the runner's rules
//! over explicit assignments.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wf_sentinel_core::finding::Weakness;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// The ten taxonomy snippets with their intended weakness class and a
/// marker substring identifying the offending line.
pub fn taxonomy_snippets() -> Vec<(Weakness, &'static str, String, &'static str)> {
    let load = |name: &str| {
        std::fs::read_to_string(format!(
            "{}/tests/fixtures/snippets/{name}.yml",
            env!("CARGO_MANIFEST_DIR")
        ))
        .unwrap_or_else(|e| panic!("snippet {name} missing: {e}"))
    };
    vec![
        (Weakness::Aiw, "aiw.yml", load("aiw"), "download-artifact"),
        (Weakness::Cfw, "cfw.yml", load("cfw"), "workflow_run.event"),
        (Weakness::Epw, "epw.yml", load("epw"), "contents: write"),
        (Weakness::Grcw, "grcw.yml", load("grcw"), "setup-node@v1"),
        (Weakness::Hgw, "hgw.yml", load("hgw"), "jobs:"),
        (Weakness::Iw, "iw.yml", load("iw"), "inputs.run_id"),
        (Weakness::Kvcw, "kvcw.yml", load("kvcw"), "download-artifact@v4"),
        (Weakness::Sew, "sew.yml", load("sew"), "inherit"),
        (Weakness::Tmw, "tmw.yml", load("tmw"), "pull_request_target"),
        (Weakness::Udw, "udw.yml", load("udw"), "crowdin-action@main"),
    ]
}

/// 1-based line numbers in `source` containing `marker`.
pub fn lines_containing(source: &str, marker: &str) -> Vec<usize> {
    source
        .lines()
        .enumerate()
        .filter(|(_, line)| line.contains(marker))
        .map(|(i, _)| i + 1)
        .collect()
}

// ---------------------------------------------------------------------------
// Workflow generators
// ---------------------------------------------------------------------------

const OFFICIAL_ACTIONS: &[&str] = &["actions/checkout", "actions/setup-node", "actions/cache"];
const THIRD_PARTY_ACTIONS: &[&str] = &[
    "octo-corp/builder",
    "acme/release-tool",
    "devtools/linter",
    "examples/deploy",
    "widget/publisher",
];
const FLOATING_REFS: &[&str] = &["v1", "v2", "v3.1.0", "main", "master", "dev-branch"];

fn fake_sha(rng: &mut ChaCha8Rng) -> String {
    let mut sha = String::with_capacity(40);
    for _ in 0..40 {
        let digit = rng.gen_range(0..16u32);
        sha.push(char::from_digit(digit, 16).expect("hex digit"));
    }
    sha
}

/// One workflow whose `uses:` refs mix official/third-party owners,
/// tags/branches/shas, plus optional commented refs and reusable calls.
/// Used for the profile-divergence corpus.
pub fn gen_mixed_workflow(rng: &mut ChaCha8Rng, index: usize) -> String {
    let trigger = ["push", "pull_request", "workflow_dispatch", "schedule"][rng.gen_range(0..4)];
    let mut out = String::new();
    out.push_str(&format!("name: generated-{index}\n"));
    if trigger == "schedule" {
        out.push_str("on:\n  schedule:\n    - cron: \"0 4 * * *\"\n");
    } else {
        out.push_str(&format!("on: {trigger}\n"));
    }
    out.push_str("jobs:\n");

    let jobs = rng.gen_range(1..=3);
    for j in 0..jobs {
        out.push_str(&format!("  job{j}:\n    runs-on: ubuntu-latest\n    steps:\n"));
        let steps = rng.gen_range(1..=5);
        for _ in 0..steps {
            match rng.gen_range(0..10) {
                0..=2 => {
                    let action = OFFICIAL_ACTIONS[rng.gen_range(0..OFFICIAL_ACTIONS.len())];
                    let r = FLOATING_REFS[rng.gen_range(0..FLOATING_REFS.len())];
                    out.push_str(&format!("      - uses: {action}@{r}\n"));
                }
                3..=5 => {
                    let action = THIRD_PARTY_ACTIONS[rng.gen_range(0..THIRD_PARTY_ACTIONS.len())];
                    let r = FLOATING_REFS[rng.gen_range(0..FLOATING_REFS.len())];
                    out.push_str(&format!("      - uses: {action}@{r}\n"));
                }
                6 => {
                    let action = THIRD_PARTY_ACTIONS[rng.gen_range(0..THIRD_PARTY_ACTIONS.len())];
                    let sha = fake_sha(rng);
                    out.push_str(&format!("      - uses: {action}@{sha}\n"));
                }
                7 => {
                    out.push_str("      # - uses: legacy/tool@v1\n      - run: echo commented\n");
                }
                _ => {
                    out.push_str("      - run: echo building\n");
                }
            }
        }
    }
    if rng.gen_bool(0.25) {
        out.push_str("  reuse:\n    uses: octo-corp/ci/.github/workflows/shared.yml@v1\n");
    }
    out
}

/// Comment-free workflow with only step `uses:` refs (no local, docker, or
/// reusable targets), for the brute-force UDW equivalence corpus.
pub fn gen_comment_free_workflow(rng: &mut ChaCha8Rng, index: usize) -> String {
    let mut out = String::new();
    out.push_str(&format!("name: plain-{index}\non: push\njobs:\n"));
    let jobs = rng.gen_range(1..=3);
    for j in 0..jobs {
        out.push_str(&format!("  job{j}:\n    runs-on: ubuntu-latest\n    steps:\n"));
        for _ in 0..rng.gen_range(1..=6) {
            match rng.gen_range(0..6) {
                0 | 1 => {
                    let action = THIRD_PARTY_ACTIONS[rng.gen_range(0..THIRD_PARTY_ACTIONS.len())];
                    let r = FLOATING_REFS[rng.gen_range(0..FLOATING_REFS.len())];
                    out.push_str(&format!("      - uses: {action}@{r}\n"));
                }
                2 => {
                    let action = OFFICIAL_ACTIONS[rng.gen_range(0..OFFICIAL_ACTIONS.len())];
                    let r = FLOATING_REFS[rng.gen_range(0..FLOATING_REFS.len())];
                    out.push_str(&format!("      - uses: {action}@{r}\n"));
                }
                3 => {
                    let action = THIRD_PARTY_ACTIONS[rng.gen_range(0..THIRD_PARTY_ACTIONS.len())];
                    let sha = fake_sha(rng);
                    out.push_str(&format!("      - uses: {action}@{sha}\n"));
                }
                _ => out.push_str("      - run: echo step\n"),
            }
        }
    }
    out
}

/// Brute-force UDW oracle: count uncommented `uses:` lines whose ref part
/// is not exactly 40 lowercase hex characters. Valid only on comment-free
/// corpora without reusable or local/docker targets.
pub fn brute_force_udw_count(source: &str) -> usize {
    let mut count = 0;
    for line in source.lines() {
        let trimmed = line.trim_start();
        if trimmed.starts_with('#') {
            continue;
        }
        let rest = match trimmed.strip_prefix("- uses:") {
            Some(rest) => rest,
            None => match trimmed.strip_prefix("uses:") {
                Some(rest) => rest,
                None => continue,
            },
        };
        let target = rest.trim().trim_matches(|c| c == '"' || c == '\'');
        let is_sha = target
            .rsplit_once('@')
            .map(|(_, r)| {
                r.len() == 40 && r.bytes().all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase())
            })
            .unwrap_or(false);
        if !is_sha {
            count += 1;
        }
    }
    count
}

// ---------------------------------------------------------------------------
// Expression extraction oracle
// ---------------------------------------------------------------------------

/// Generate a string with known expression positions. Returns the text and
/// the expected `(start, end)` byte offsets of each occurrence.
pub fn gen_expression_string(rng: &mut ChaCha8Rng) -> (String, Vec<(usize, usize)>) {
    let contexts = [
        "github.ref",
        "inputs.name",
        "github.event.pull_request.title",
        "secrets.TOKEN",
        "matrix.os",
    ];
    let fillers = ["echo ", "run --flag ", "build: ", " && ls ", "#notcomment ", "x=1; "];
    let mut text = String::new();
    let mut expected = Vec::new();
    for _ in 0..rng.gen_range(0..5) {
        text.push_str(fillers[rng.gen_range(0..fillers.len())]);
        let start = text.len();
        text.push_str("${{ ");
        text.push_str(contexts[rng.gen_range(0..contexts.len())]);
        text.push_str(" }}");
        expected.push((start, text.len()));
    }
    text.push_str(fillers[rng.gen_range(0..fillers.len())]);
    (text, expected)
}

/// Index-scan oracle: naive forward search for `${{` then `}}`.
pub fn index_scan_expressions(text: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut i = 0;
    while let Some(rel) = text[i..].find("${{") {
        let start = i + rel;
        match text[start + 3..].find("}}") {
            Some(close) => {
                let end = start + 3 + close + 2;
                out.push((start, end));
                i = end;
            }
            None => break,
        }
    }
    out
}

// ---------------------------------------------------------------------------
// GitHub truthiness oracle
// ---------------------------------------------------------------------------

/// What a generated condition's expressions may evaluate to.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OracleValue {
    True,
    False,
}

/// Hand evaluation of the runner's `if:` truthiness for a condition string,
/// given one assignment for every `${{ }}` expression (and for the whole
/// string when it is a bare expression):
///
/// 1. No `${{` anywhere: the whole string is evaluated as an expression;
///    its boolean value is the verdict.
/// 2. The string is exactly one `${{ ... }}`: the expression's value is the
///    verdict.
/// 3. Otherwise each expression expands to the string `true`/`false` inside
///    the template, and the verdict is whether the expanded string is
///    non-empty.
pub fn oracle_truthy(condition: &str, assignment: OracleValue) -> bool {
    let value_str = match assignment {
        OracleValue::True => "true",
        OracleValue::False => "false",
    };
    let occurrences = index_scan_expressions(condition);
    if occurrences.is_empty() {
        let trimmed = condition.trim();
        if trimmed.is_empty() || trimmed == "false" {
            return false;
        }
        if trimmed == "true" {
            return true;
        }
        return assignment == OracleValue::True;
    }
    if occurrences.len() == 1 && occurrences[0] == (0, condition.len()) {
        return assignment == OracleValue::True;
    }
    let mut expanded = String::new();
    let mut cursor = 0;
    for (start, end) in &occurrences {
        expanded.push_str(&condition[cursor..*start]);
        expanded.push_str(value_str);
        cursor = *end;
    }
    expanded.push_str(&condition[cursor..]);
    !expanded.is_empty()
}

/// Is the condition always truthy regardless of how its expressions
/// evaluate?
pub fn oracle_always_true(condition: &str) -> bool {
    oracle_truthy(condition, OracleValue::True) && oracle_truthy(condition, OracleValue::False)
}

/// Generate a workflow with one block-scalar job condition built from
/// boolean comparisons. Returns the workflow text.
pub fn gen_block_condition_workflow(rng: &mut ChaCha8Rng, index: usize) -> String {
    let style = if rng.gen_bool(0.5) { ">" } else { "|" };
    let lhs = ["github.event_name", "github.ref", "github.event.workflow_run.event"]
        [rng.gen_range(0..3)];
    let rhs = ["'push'", "'refs/heads/main'", "'pull_request'"][rng.gen_range(0..3)];
    let second = ["github.repository == 'o/r'", "github.run_number != 3"][rng.gen_range(0..2)];
    format!(
        "name: cond-{index}\non: push\njobs:\n  gated:\n    runs-on: ubuntu-latest\n    if: {style}\n      ${{{{ {lhs} == {rhs} &&\n          {second} }}}}\n    steps:\n      - run: echo gated\n"
    )
}

/// Generate a workflow with one plain-scalar single-expression condition.
pub fn gen_plain_condition_workflow(rng: &mut ChaCha8Rng, index: usize) -> String {
    let lhs = ["github.event_name", "github.ref"][rng.gen_range(0..2)];
    let rhs = ["'push'", "'refs/heads/main'"][rng.gen_range(0..2)];
    let wrapped = rng.gen_bool(0.5);
    let cond = if wrapped {
        format!("${{{{ {lhs} == {rhs} }}}}")
    } else {
        format!("{lhs} == {rhs}")
    };
    format!(
        "name: plain-{index}\non: push\njobs:\n  gated:\n    runs-on: ubuntu-latest\n    if: {cond}\n    steps:\n      - run: echo gated\n"
    )
}

/// Sized workflow generator for the performance corpus: `target_loc` lines
/// of jobs, steps, expressions, and conditions.
pub fn gen_sized_workflow(rng: &mut ChaCha8Rng, index: usize, target_loc: usize) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "name: perf-{index}\non:\n  push:\n    branches: [main]\n  pull_request: {{}}\npermissions:\n  contents: read\nenv:\n  BUILD_MODE: release\njobs:\n"
    ));
    let mut job = 0;
    while out.lines().count() < target_loc {
        out.push_str(&format!(
            "  job{job}:\n    runs-on: ubuntu-latest\n    steps:\n"
        ));
        for s in 0..24 {
            match rng.gen_range(0..6) {
                0 => {
                    let action = THIRD_PARTY_ACTIONS[rng.gen_range(0..THIRD_PARTY_ACTIONS.len())];
                    let r = FLOATING_REFS[rng.gen_range(0..FLOATING_REFS.len())];
                    out.push_str(&format!(
                        "      - uses: {action}@{r}\n        with:\n          arg: value-{s}\n"
                    ));
                }
                1 => {
                    out.push_str(
                        "      - run: |\n          make build\n          make test TARGET=${{ matrix.target }}\n",
                    );
                }
                2 => {
                    out.push_str(&format!(
                        "      - run: echo step {s} ${{{{ github.sha }}}}\n        if: github.event_name == 'push'\n"
                    ));
                }
                3 => {
                    out.push_str(&format!(
                        "      - run: ./scripts/deploy.sh\n        env:\n          DEPLOY_TARGET: staging-{s}\n"
                    ));
                }
                _ => {
                    out.push_str(&format!("      - run: echo plain step {s}\n"));
                }
            }
            if out.lines().count() >= target_loc {
                break;
            }
        }
        job += 1;
    }
    out
}

// ---------------------------------------------------------------------------
// SARIF structural validation
// ---------------------------------------------------------------------------

/// Structural schema walk over an emitted SARIF document. Returns the
/// number of results on success.
pub fn validate_sarif_structure(bytes: &[u8]) -> Result<usize, String> {
    let value: serde_json::Value =
        serde_json::from_slice(bytes).map_err(|e| format!("not JSON: {e}"))?;
    if value["version"] != "2.1.0" {
        return Err("version must be 2.1.0".to_string());
    }
    if !value["$schema"].is_string() {
        return Err("$schema missing".to_string());
    }
    let runs = value["runs"].as_array().ok_or("runs must be an array")?;
    if runs.len() != 1 {
        return Err("expected exactly one run".to_string());
    }
    let run = &runs[0];
    let driver = &run["tool"]["driver"];
    if !driver["name"].is_string() {
        return Err("tool.driver.name missing".to_string());
    }
    let rules = driver["rules"].as_array().ok_or("driver.rules must be an array")?;
    let mut rule_ids = Vec::new();
    for rule in rules {
        let id = rule["id"].as_str().ok_or("rule without id")?;
        if rule_ids.contains(&id) {
            return Err(format!("duplicate rule id {id}"));
        }
        if !rule["shortDescription"]["text"].is_string() {
            return Err(format!("rule {id} lacks shortDescription.text"));
        }
        rule_ids.push(id);
    }
    let artifacts = run["artifacts"].as_array().ok_or("artifacts must be an array")?;
    let artifact_uris: Vec<&str> = artifacts
        .iter()
        .map(|a| a["location"]["uri"].as_str().ok_or("artifact without uri"))
        .collect::<Result<_, _>>()?;

    let results = run["results"].as_array().ok_or("results must be an array")?;
    for result in results {
        let rule_id = result["ruleId"].as_str().ok_or("result without ruleId")?;
        let index = result["ruleIndex"].as_u64().ok_or("result without ruleIndex")? as usize;
        if index >= rules.len() {
            return Err(format!("ruleIndex {index} out of bounds"));
        }
        if rules[index]["id"].as_str() != Some(rule_id) {
            return Err(format!("ruleIndex {index} does not resolve to {rule_id}"));
        }
        let level = result["level"].as_str().ok_or("result without level")?;
        if !["none", "note", "warning", "error"].contains(&level) {
            return Err(format!("invalid level {level}"));
        }
        if !result["message"]["text"].is_string() {
            return Err("result without message.text".to_string());
        }
        let locations = result["locations"].as_array().ok_or("result without locations")?;
        if locations.is_empty() {
            return Err("result with empty locations".to_string());
        }
        for location in locations {
            let phys = &location["physicalLocation"];
            let uri = phys["artifactLocation"]["uri"]
                .as_str()
                .ok_or("location without uri")?;
            if !artifact_uris.contains(&uri) {
                return Err(format!("location uri {uri} not among artifacts"));
            }
            let start = phys["region"]["startLine"].as_u64().ok_or("missing startLine")?;
            let end = phys["region"]["endLine"].as_u64().ok_or("missing endLine")?;
            if start == 0 || end < start {
                return Err(format!("bad region lines {start}..{end}"));
            }
        }
    }
    Ok(results.len())
}
