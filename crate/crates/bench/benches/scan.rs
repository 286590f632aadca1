//! Criterion benchmarks for the scan pipeline: parsing, full detection
//! under each profile, expression handling, and the secret scanner.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use wf_sentinel_bench::synthetic_workflow;
use wf_sentinel_core::advisory::FixtureAdvisorySource;
use wf_sentinel_core::detect::{run_all, Services};
use wf_sentinel_core::expr::{evaluate_condition_text, extract_expressions, parse_expression};
use wf_sentinel_core::model::{parse_workflow, ConditionStyle};
use wf_sentinel_core::profile::Profile;
use wf_sentinel_core::secrets::SecretScanner;
use wf_sentinel_core::span::SourceSpan;

fn bench_parse(c: &mut Criterion) {
    let mut group = c.benchmark_group("parse_workflow");
    for steps in [10usize, 50, 200] {
        let source = synthetic_workflow(steps);
        group.throughput(Throughput::Bytes(source.len() as u64));
        group.bench_with_input(BenchmarkId::from_parameter(steps), &source, |b, source| {
            b.iter(|| parse_workflow(black_box(source.as_bytes()), "bench.yml").unwrap());
        });
    }
    group.finish();
}

fn bench_scan(c: &mut Criterion) {
    let advisories = FixtureAdvisorySource::bundled();
    let services = Services::offline(&advisories, None);
    let source = synthetic_workflow(100);
    let parsed = parse_workflow(source.as_bytes(), "bench.yml").unwrap();

    let mut group = c.benchmark_group("run_all");
    for profile in [
        Profile::conservative(),
        Profile::balanced(),
        Profile::permissive(),
    ] {
        group.bench_with_input(
            BenchmarkId::from_parameter(&profile.name),
            &profile,
            |b, profile| {
                b.iter(|| {
                    run_all(
                        black_box(&parsed.doc),
                        &parsed.report,
                        profile,
                        &services,
                    )
                });
            },
        );
    }
    group.finish();
}

fn bench_expressions(c: &mut Criterion) {
    let script = "echo ${{ github.event.pull_request.title }} && \
                  test ${{ inputs.version }} = ${{ github.ref_name }} || \
                  notify ${{ secrets.HOOK_URL }}";
    let span = SourceSpan::new(0, script.len(), 1, 1, 1, 1);
    c.bench_function("extract_expressions", |b| {
        b.iter(|| extract_expressions(black_box(script), span));
    });

    let body = "github.event_name == 'push' && !contains(github.ref, 'temp') || always()";
    c.bench_function("parse_expression", |b| {
        b.iter(|| parse_expression(black_box(body)).unwrap());
    });

    let folded = "${{ github.event.workflow_run.event == 'pull_request' &&\n    github.event.workflow_run.conclusion == 'success' }}\n";
    c.bench_function("evaluate_condition", |b| {
        b.iter(|| evaluate_condition_text(black_box(folded), ConditionStyle::FoldedBlock));
    });
}

fn bench_secrets(c: &mut Criterion) {
    let source = synthetic_workflow(150);
    let parsed = parse_workflow(source.as_bytes(), "bench.yml").unwrap();
    let scanner = SecretScanner::new(3.5, 16);
    c.bench_function("secret_scan", |b| {
        b.iter(|| scanner.detect_candidate_secrets(black_box(&parsed.doc)));
    });
}

criterion_group!(benches, bench_parse, bench_scan, bench_expressions, bench_secrets);
criterion_main!(benches);
