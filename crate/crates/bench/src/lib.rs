//! Benchmark support: deterministic workflow generation shared by the
//! criterion targets.

use std::fmt::Write as _;

/// Build a workflow of roughly `steps` steps mixing action references,
/// expressions, conditions, and run scripts. Deterministic by construction.
pub fn synthetic_workflow(steps: usize) -> String {
    let mut out = String::from(
        "name: bench\non:\n  push:\n    branches: [main]\n  pull_request: {}\npermissions:\n  contents: read\nenv:\n  MODE: release\njobs:\n  build:\n    runs-on: ubuntu-latest\n    steps:\n",
    );
    for i in 0..steps {
        match i % 5 {
            0 => {
                let _ = writeln!(out, "      - uses: octo-corp/builder@v{}", (i % 9) + 1);
            }
            1 => {
                let _ = writeln!(
                    out,
                    "      - run: echo building ${{{{ github.sha }}}} step {i}"
                );
            }
            2 => {
                let _ = writeln!(
                    out,
                    "      - uses: actions/cache@main\n        with:\n          path: target\n          key: cache-{i}"
                );
            }
            3 => {
                let _ = writeln!(
                    out,
                    "      - run: |\n          make test\n          echo \"OUT=${{{{ github.ref_name }}}}\" >> $GITHUB_ENV\n        if: github.event_name == 'push'"
                );
            }
            _ => {
                let _ = writeln!(out, "      - run: ./scripts/step-{i}.sh");
            }
        }
    }
    out
}
