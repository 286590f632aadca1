//! `wf-sentinel` command-line interface.
//!
//! Exit status contract: 0 when no finding reaches the failure severity,
//! 1 when one does, 2 for usage/configuration errors, 3 for internal
//! errors. Reports go to stdout; diagnostics go to stderr so JSON and
//! SARIF output stay pipe-safe.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use wf_sentinel_core::advisory::{AdvisorySource, FixtureAdvisorySource, OsvClient};
use wf_sentinel_core::catalog;
use wf_sentinel_core::config::{Config, ConfigError};
use wf_sentinel_core::corpus::{
    diff_profiles, discover_workflows, scan_corpus, timing_csv, timing_report,
};
use wf_sentinel_core::detect::{run_all, Services};
use wf_sentinel_core::finding::Severity;
use wf_sentinel_core::model::parse_workflow;
use wf_sentinel_core::pin::{apply_edits, plan_pin_fixes, ForgeClient, PinFixture, ResolutionSource};
use wf_sentinel_core::profile::Profile;
use wf_sentinel_core::report::{
    emit_json, emit_sarif, matrix_csv, matrix_table, render_text, FileFindings, ScanMeta,
};

const DEFAULT_FORGE_URL: &str = "https://api.github.com";
const DEFAULT_OSV_URL: &str = "https://api.osv.dev";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Sarif,
}

#[derive(Parser)]
#[command(
    name = "wf-sentinel",
    version,
    about = "Static security scanner for GitHub Actions workflow files",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Configuration file (default: ./wf-sentinel.yml when present).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Detection profile: conservative, balanced, or permissive.
    #[arg(long, global = true)]
    profile: Option<String>,

    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    /// Force offline operation (the default unless configured otherwise).
    #[arg(long, global = true, conflicts_with = "online")]
    offline: bool,

    /// Allow network lookups: live ref resolution and advisory queries.
    #[arg(long, global = true)]
    online: bool,

    /// Minimum severity that makes the exit status non-zero.
    #[arg(long, global = true, value_name = "SEVERITY")]
    fail_on: Option<String>,

    /// Worker threads for multi-file scans (default: logical CPU count).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    /// Colorize the text report.
    #[arg(long, global = true)]
    color: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Scan workflow files or directories and report findings.
    Scan {
        /// Files or directories to scan.
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Rewrite floating action refs to pinned commit SHAs.
    Fix {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        /// Print the planned changes without writing files.
        #[arg(long)]
        dry_run: bool,
    },
    /// Scan a corpus directory, producing the per-weakness matrix and
    /// per-workflow timing samples.
    Corpus {
        root: PathBuf,
        /// Timing repetitions per workflow.
        #[arg(long, default_value_t = 2, value_name = "N")]
        repeat: usize,
        /// Write the per-workflow timing CSV to this file.
        #[arg(long, value_name = "FILE")]
        timing_csv: Option<PathBuf>,
        /// Write the per-weakness matrix CSV to this file.
        #[arg(long, value_name = "FILE")]
        matrix_csv: Option<PathBuf>,
    },
    /// Compare two profiles over the same corpus.
    Diff {
        root: PathBuf,
        /// Comma-separated profile pair, e.g. `conservative,permissive`.
        #[arg(long, value_name = "A,B")]
        profiles: String,
    },
    /// Show the catalog entry for one rule.
    Explain { rule_id: String },
    /// List the full rule catalog.
    Rules,
}

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct UsageError(String);

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            if err.downcast_ref::<ConfigError>().is_some()
                || err.downcast_ref::<UsageError>().is_some()
            {
                eprintln!("error: {err:#}");
                ExitCode::from(2)
            } else {
                eprintln!("internal error: {err:#}");
                ExitCode::from(3)
            }
        }
    }
}

struct Session {
    config: Config,
    profile: Profile,
    fail_on: Severity,
    offline: bool,
    format: Format,
    color: bool,
    jobs: usize,
}

impl Session {
    fn advisory_source(&self) -> anyhow::Result<Box<dyn AdvisorySource>> {
        if !self.offline {
            let endpoint = std::env::var("WF_SENTINEL_OSV_URL")
                .unwrap_or_else(|_| DEFAULT_OSV_URL.to_string());
            return Ok(Box::new(OsvClient::new(endpoint)));
        }
        match &self.config.advisory_fixture {
            Some(path) => Ok(Box::new(
                FixtureAdvisorySource::from_file(path)
                    .with_context(|| format!("loading advisory fixture {}", path.display()))?,
            )),
            None => Ok(Box::new(FixtureAdvisorySource::bundled())),
        }
    }

    fn pin_fixture(&self) -> anyhow::Result<Option<PinFixture>> {
        match &self.config.pin_fixture {
            Some(path) => Ok(Some(PinFixture::from_file(path).with_context(|| {
                format!("loading pin fixture {}", path.display())
            })?)),
            None => Ok(None),
        }
    }

    fn resolution_source(&self) -> anyhow::Result<ResolutionSource> {
        if self.offline {
            Ok(ResolutionSource::OfflineFixture(
                self.pin_fixture()?.unwrap_or_default(),
            ))
        } else {
            let endpoint = std::env::var("WF_SENTINEL_FORGE_URL")
                .unwrap_or_else(|_| DEFAULT_FORGE_URL.to_string());
            let token = std::env::var("WF_SENTINEL_TOKEN")
                .or_else(|_| std::env::var("GITHUB_TOKEN"))
                .ok();
            Ok(ResolutionSource::LiveForge(ForgeClient::new(endpoint, token)))
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let mut config = Config::load(cli.config.as_deref())?;
    if let Some(name) = &cli.profile {
        config.profile = name.clone();
    }
    let profile = config.effective_profile()?;
    let fail_on = match &cli.fail_on {
        Some(text) => Severity::parse(text)
            .ok_or_else(|| UsageError(format!("invalid --fail-on severity `{text}`")))?,
        None => config.fail_severity,
    };
    let offline = if cli.online {
        false
    } else if cli.offline {
        true
    } else {
        config.offline
    };
    let jobs = cli
        .jobs
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
        .max(1);
    let session = Session {
        config,
        profile,
        fail_on,
        offline,
        format: cli.format,
        color: cli.color,
        jobs,
    };

    match cli.command {
        Command::Scan { paths } => cmd_scan(&session, &paths),
        Command::Fix { paths, dry_run } => cmd_fix(&session, &paths, dry_run),
        Command::Corpus {
            root,
            repeat,
            timing_csv: timing_out,
            matrix_csv: matrix_out,
        } => cmd_corpus(&session, &root, repeat, timing_out, matrix_out),
        Command::Diff { root, profiles } => cmd_diff(&session, &root, &profiles),
        Command::Explain { rule_id } => cmd_explain(&rule_id),
        Command::Rules => cmd_rules(session.format),
    }
}

fn collect_files(session: &Session, paths: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for path in paths {
        if path.is_dir() {
            files.extend(discover_workflows(path));
        } else if path.is_file() {
            files.push(path.clone());
        } else {
            return Err(UsageError(format!("path `{}` does not exist", path.display())).into());
        }
    }
    files.retain(|p| session.config.path_selected(&p.display().to_string()));
    files.sort();
    files.dedup();
    Ok(files)
}

struct FileOutcome {
    path: String,
    source: Option<String>,
    findings: Vec<wf_sentinel_core::finding::Finding>,
    notes: Vec<String>,
}

/// Findings per file, the sources for excerpt rendering, and stderr notes.
type ScannedFiles = (Vec<FileFindings>, BTreeMap<String, String>, Vec<String>);

fn scan_one(session: &Session, services: &Services<'_>, path: &Path) -> FileOutcome {
    let display = path.display().to_string();
    let mut notes = Vec::new();
    let bytes = match std::fs::read(path) {
        Ok(bytes) => bytes,
        Err(err) => {
            notes.push(format!("{display}: read failed: {err}"));
            return FileOutcome {
                path: display,
                source: None,
                findings: Vec::new(),
                notes,
            };
        }
    };
    match parse_workflow(&bytes, &display) {
        Ok(parsed) => {
            let outcome = run_all(&parsed.doc, &parsed.report, &session.profile, services);
            notes.extend(
                outcome
                    .diagnostics
                    .iter()
                    .map(|d| format!("{display}: [{}] {}", d.detector, d.message)),
            );
            let findings = outcome
                .findings
                .into_iter()
                .filter(|f| session.config.rule_selected(&f.rule_id))
                .collect();
            FileOutcome {
                path: display,
                source: Some(parsed.doc.source),
                findings,
                notes,
            }
        }
        Err(err) => {
            notes.push(format!("{err}"));
            FileOutcome {
                path: display,
                source: None,
                findings: Vec::new(),
                notes,
            }
        }
    }
}

fn scan_files(session: &Session, files: &[PathBuf]) -> anyhow::Result<ScannedFiles> {
    let advisories = session.advisory_source()?;
    let pin_fixture = session.pin_fixture()?;
    let services = Services {
        advisories: advisories.as_ref(),
        pin_fixture: pin_fixture.as_ref(),
        offline: session.offline,
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(session.jobs)
        .build()
        .context("building worker pool")?;
    let outcomes: Vec<FileOutcome> = pool.install(|| {
        use rayon::prelude::*;
        files
            .par_iter()
            .map(|path| scan_one(session, &services, path))
            .collect()
    });

    let mut per_file = Vec::new();
    let mut sources = BTreeMap::new();
    let mut notes = Vec::new();
    for outcome in outcomes {
        notes.extend(outcome.notes);
        if let Some(source) = outcome.source {
            sources.insert(outcome.path.clone(), source);
        }
        per_file.push(FileFindings {
            path: outcome.path,
            findings: outcome.findings,
        });
    }
    Ok((per_file, sources, notes))
}

fn exit_for_findings(session: &Session, per_file: &[FileFindings]) -> ExitCode {
    let failing = per_file
        .iter()
        .flat_map(|f| &f.findings)
        .any(|f| f.severity >= session.fail_on);
    if failing {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}

fn cmd_scan(session: &Session, paths: &[PathBuf]) -> anyhow::Result<ExitCode> {
    let files = collect_files(session, paths)?;
    let (per_file, sources, notes) = scan_files(session, &files)?;
    for note in &notes {
        eprintln!("{note}");
    }

    let meta = ScanMeta::new(
        &session.profile.name,
        per_file.iter().map(|f| f.path.clone()).collect(),
    );
    match session.format {
        Format::Text => print!("{}", render_text(&per_file, &sources, session.color)),
        Format::Json => {
            let bytes = emit_json(&per_file, &meta)?;
            std::io::Write::write_all(&mut std::io::stdout(), &bytes)?;
        }
        Format::Sarif => {
            let bytes = emit_sarif(&per_file, &meta)?;
            std::io::Write::write_all(&mut std::io::stdout(), &bytes)?;
        }
    }
    Ok(exit_for_findings(session, &per_file))
}

fn cmd_fix(session: &Session, paths: &[PathBuf], dry_run: bool) -> anyhow::Result<ExitCode> {
    let files = collect_files(session, paths)?;
    let resolution = session.resolution_source()?;
    let advisories = session.advisory_source()?;
    let pin_fixture = session.pin_fixture()?;
    let services = Services {
        advisories: advisories.as_ref(),
        pin_fixture: pin_fixture.as_ref(),
        offline: session.offline,
    };

    let mut total_edits = 0usize;
    for path in &files {
        let display = path.display().to_string();
        let bytes = std::fs::read(path).with_context(|| format!("reading {display}"))?;
        let parsed = match parse_workflow(&bytes, &display) {
            Ok(parsed) => parsed,
            Err(err) => {
                eprintln!("{err}");
                continue;
            }
        };
        let outcome = run_all(&parsed.doc, &parsed.report, &session.profile, &services);
        let plan = plan_pin_fixes(&parsed.doc, &outcome.findings, &resolution);
        for unresolved in &plan.unresolved {
            eprintln!(
                "{display}:{}: cannot pin `{}` ({})",
                unresolved.span.start_line, unresolved.action, unresolved.reason
            );
        }
        if plan.edits.is_empty() {
            continue;
        }
        let fixed = apply_edits(&bytes, &plan.edits)?;
        total_edits += plan.edits.len();
        if dry_run {
            println!("--- {display}");
            println!("+++ {display} (fixed)");
            let old_lines: Vec<&str> = parsed.doc.source.lines().collect();
            let new_text = String::from_utf8_lossy(&fixed).into_owned();
            for (i, new_line) in new_text.lines().enumerate() {
                match old_lines.get(i) {
                    Some(old) if *old == new_line => {}
                    Some(old) => {
                        println!("-{old}");
                        println!("+{new_line}");
                    }
                    None => println!("+{new_line}"),
                }
            }
        } else {
            std::fs::write(path, &fixed).with_context(|| format!("writing {display}"))?;
            println!("{display}: pinned {} reference(s)", plan.edits.len());
        }
    }
    if total_edits == 0 {
        println!("nothing to fix");
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_corpus(
    session: &Session,
    root: &Path,
    repeat: usize,
    timing_out: Option<PathBuf>,
    matrix_out: Option<PathBuf>,
) -> anyhow::Result<ExitCode> {
    if !root.is_dir() {
        return Err(
            UsageError(format!("corpus root `{}` is not a directory", root.display())).into(),
        );
    }
    let advisories = session.advisory_source()?;
    let pin_fixture = session.pin_fixture()?;
    let services = Services {
        advisories: advisories.as_ref(),
        pin_fixture: pin_fixture.as_ref(),
        offline: session.offline,
    };
    let report = scan_corpus(root, &session.profile, &services, repeat.max(1));
    for err in &report.errors {
        eprintln!("{}: {}", err.path, err.message);
    }
    for diag in &report.diagnostics {
        eprintln!("[{}] {}", diag.detector, diag.message);
    }

    let timing = timing_report(&report);
    if let Some(path) = timing_out {
        std::fs::write(&path, timing_csv(&timing))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = matrix_out {
        std::fs::write(&path, matrix_csv(&report.matrix))
            .with_context(|| format!("writing {}", path.display()))?;
    }

    match session.format {
        Format::Json => {
            std::io::Write::write_all(&mut std::io::stdout(), &report.to_json())?;
        }
        _ => {
            println!(
                "corpus: {} workflows, {} errors, profile {}, repetitions {}",
                report.entries.len(),
                report.errors.len(),
                report.profile,
                report.repetitions
            );
            println!(
                "scan time per workflow: min {:.4}s median {:.4}s max {:.4}s",
                timing.aggregate_min_secs, timing.aggregate_median_secs, timing.aggregate_max_secs
            );
            println!();
            print!("{}", matrix_table(&report.matrix));
        }
    }

    let per_file = report.per_workflow_findings();
    Ok(exit_for_findings(session, &per_file))
}

fn cmd_diff(session: &Session, root: &Path, profiles: &str) -> anyhow::Result<ExitCode> {
    if !root.is_dir() {
        return Err(
            UsageError(format!("corpus root `{}` is not a directory", root.display())).into(),
        );
    }
    let (name_a, name_b) = profiles
        .split_once(',')
        .ok_or_else(|| UsageError("--profiles expects two names, e.g. `conservative,permissive`".to_string()))?;
    let profile_for = |name: &str| -> anyhow::Result<Profile> {
        let mut config = session.config.clone();
        config.profile = name.trim().to_string();
        Ok(config.effective_profile()?)
    };
    let profile_a = profile_for(name_a)?;
    let profile_b = profile_for(name_b)?;

    let advisories = session.advisory_source()?;
    let pin_fixture = session.pin_fixture()?;
    let services = Services {
        advisories: advisories.as_ref(),
        pin_fixture: pin_fixture.as_ref(),
        offline: session.offline,
    };
    let report = diff_profiles(root, &profile_a, &profile_b, &services);

    match session.format {
        Format::Json => {
            let mut bytes = serde_json::to_vec_pretty(&report)?;
            bytes.push(b'\n');
            std::io::Write::write_all(&mut std::io::stdout(), &bytes)?;
        }
        _ => {
            println!(
                "profiles: {} (A) vs {} (B)",
                report.profile_a, report.profile_b
            );
            println!("{:<6} {:>8} {:>8} {:>8}", "class", "common", "only A", "only B");
            for (weakness, row) in &report.per_weakness {
                println!(
                    "{:<6} {:>8} {:>8} {:>8}",
                    weakness.acronym(),
                    row.common.len(),
                    row.only_a.len(),
                    row.only_b.len()
                );
            }
            println!(
                "totals: common {} / only A {} / only B {}",
                report.total_common(),
                report.total_only_a(),
                report.total_only_b()
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_explain(rule_id: &str) -> anyhow::Result<ExitCode> {
    let rule = catalog::rule(rule_id)
        .map_err(|e| UsageError(format!("{e}; run `wf-sentinel rules` for the catalog")))?;
    println!("{} — {}", rule.id, rule.summary);
    println!(
        "weakness: {} ({})",
        rule.weakness.acronym(),
        rule.weakness.full_name()
    );
    println!("cwe: {}", rule.cwe.join(", "));
    println!("default severity: {}", rule.default_severity);
    println!("profiles: {}", rule.enabled_in().join(", "));
    println!();
    println!("{}", rule.rationale);
    Ok(ExitCode::SUCCESS)
}

fn cmd_rules(format: Format) -> anyhow::Result<ExitCode> {
    match format {
        Format::Json | Format::Sarif => {
            let mut bytes = serde_json::to_vec_pretty(&catalog::export_catalog())?;
            bytes.push(b'\n');
            std::io::Write::write_all(&mut std::io::stdout(), &bytes)?;
        }
        Format::Text => {
            println!(
                "{:<28} {:<5} {:<20} {:<9} profiles",
                "rule", "class", "cwe", "severity"
            );
            for rule in catalog::all_rules() {
                println!(
                    "{:<28} {:<5} {:<20} {:<9} {}",
                    rule.id,
                    rule.weakness.acronym(),
                    rule.cwe.join(","),
                    rule.default_severity,
                    rule.enabled_in().join(",")
                );
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
