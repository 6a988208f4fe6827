use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use densetrack::appearrep::similarity_diffusion;
use densetrack::associate::track_sequence;
use densetrack::iomodel::{DiffusionParams, PipelineConfig};
use densetrack::localize::{extract_peaks, PeakParams};
use densetrack::metrics::evaluate;
use densetrack::par;
use densetrack::synth::{generate_scenario, Scenario, ScenarioConfig};

fn scenario() -> Scenario {
    generate_scenario(&ScenarioConfig {
        n_frames: 20,
        ..ScenarioConfig::standard()
    })
    .expect("standard scenario generates")
}

/// `1` pins a single worker; `0` uses the full pool.
fn thread_arms() -> [(&'static str, usize); 2] {
    [("sequential", 1), ("parallel", 0)]
}

fn stages(c: &mut Criterion) {
    let s = scenario();
    let features = s.bundle.features.as_ref().unwrap();
    let config = PipelineConfig::default();
    let tracks = track_sequence(&s.bundle, &config).unwrap();

    let mut g = c.benchmark_group("stages");
    g.sample_size(20);
    for (name, jobs) in thread_arms() {
        g.bench_with_input(
            BenchmarkId::new("extract_peaks", name),
            &jobs,
            |b, &jobs| {
                b.iter(|| {
                    par::with_jobs(jobs, || {
                        extract_peaks(black_box(&s.bundle.density[0]), &PeakParams::default())
                    })
                })
            },
        );
        g.bench_with_input(
            BenchmarkId::new("similarity_diffusion", name),
            &jobs,
            |b, &jobs| {
                b.iter(|| {
                    par::with_jobs(jobs, || {
                        similarity_diffusion(
                            black_box(&features[0]),
                            &features[1],
                            &DiffusionParams::default(),
                        )
                        .unwrap()
                    })
                })
            },
        );
        g.bench_with_input(BenchmarkId::new("evaluate", name), &jobs, |b, &jobs| {
            b.iter(|| par::with_jobs(jobs, || evaluate(black_box(&tracks), &s.ground_truth, 20)))
        });
    }
    g.finish();
}

fn end_to_end(c: &mut Criterion) {
    let s = scenario();
    let config = PipelineConfig::default();
    let mut g = c.benchmark_group("track_sequence");
    g.sample_size(10);
    for (name, jobs) in thread_arms() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &jobs, |b, &jobs| {
            b.iter(|| {
                par::with_jobs(jobs, || {
                    track_sequence(black_box(&s.bundle), &config).unwrap()
                })
            })
        });
    }
    g.finish();
}

criterion_group!(benches, stages, end_to_end);
criterion_main!(benches);
