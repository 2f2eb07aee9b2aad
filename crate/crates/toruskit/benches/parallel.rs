//! Data-parallel kernels, parallel versus sequential.
//!
//! The workloads are the embarrassingly parallel inner loops of the library:
//! rotation numbers over a grid of initial conditions (basin maps), batches
//! of periodic-orbit solves (tongue sweeps and the Greene ladders), and
//! conformality verification over random states. Each kernel runs through
//! the sequential path and, when the `parallel` feature is enabled (the
//! default), through the rayon path of the same helper, so one `cargo bench`
//! reports both sides.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::f64::consts::TAU;
use toruskit::dynamics::rotation_number;
use toruskit::fourier::DiophantineFrequency;
use toruskit::greene::find_orbit_dissipative;
use toruskit::models::{conformality_defect, CylinderState, MapModel, Potential};
use toruskit::par;
use toruskit::rng::SplitMix64;

fn basin_cells() -> (MapModel, Vec<CylinderState>) {
    let omega = DiophantineFrequency::golden().omega();
    let model =
        MapModel::dissipative_standard(0.9, 0.1 * omega, 0.3, Potential::SingleHarmonic);
    let n = 24;
    let cells = (0..n * n)
        .map(|i| {
            let row = i / n;
            let col = i % n;
            CylinderState::new(
                2.0 + 4.0 * (row as f64 + 0.5) / n as f64,
                TAU * (col as f64 + 0.5) / n as f64,
            )
        })
        .collect();
    (model, cells)
}

fn bench_basin_grid(c: &mut Criterion) {
    let (model, cells) = basin_cells();
    let mut group = c.benchmark_group("basin_grid_rotation_numbers");
    let m = model.clone();
    group.bench_function("sequential", |b| {
        b.iter_batched(
            || cells.clone(),
            |cells| {
                par::sequential_map(cells, |s| {
                    rotation_number(&m, s, 200, 400).map(|r| r.rotation_number).unwrap_or(f64::NAN)
                })
            },
            BatchSize::SmallInput,
        )
    });
    #[cfg(feature = "parallel")]
    {
        let m = model.clone();
        group.bench_function("parallel", |b| {
            b.iter_batched(
                || cells.clone(),
                |cells| {
                    par::parallel_map(cells, |s| {
                        rotation_number(&m, s, 200, 400)
                            .map(|r| r.rotation_number)
                            .unwrap_or(f64::NAN)
                    })
                },
                BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

fn bench_orbit_batch(c: &mut Criterion) {
    let model = MapModel::dissipative_standard(0.9, 0.0, 0.2, Potential::SingleHarmonic);
    let rot = TAU * 8.0 / 13.0;
    let sweep: Vec<f64> = (0..32).map(|i| TAU * i as f64 / 32.0).collect();
    let mut group = c.benchmark_group("tongue_sweep_orbit_solves");
    let m = model.clone();
    group.bench_function("sequential", |b| {
        b.iter_batched(
            || sweep.clone(),
            |xs| {
                par::sequential_map(xs, |x0| {
                    find_orbit_dissipative(&m, 8, 13, x0, rot, 0.1 * rot).map(|o| o.mu).ok()
                })
            },
            BatchSize::SmallInput,
        )
    });
    #[cfg(feature = "parallel")]
    {
        let m = model.clone();
        group.bench_function("parallel", |b| {
            b.iter_batched(
                || sweep.clone(),
                |xs| {
                    par::parallel_map(xs, |x0| {
                        find_orbit_dissipative(&m, 8, 13, x0, rot, 0.1 * rot).map(|o| o.mu).ok()
                    })
                },
                BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

fn bench_conformality_scan(c: &mut Criterion) {
    let model = MapModel::dissipative_standard(0.9, 0.2, 0.6, Potential::SingleHarmonic);
    let mut rng = SplitMix64::new(7);
    let states: Vec<Vec<f64>> = (0..2000)
        .map(|_| vec![rng.next_symmetric(3.0), rng.next_range(0.0, TAU)])
        .collect();
    let mut group = c.benchmark_group("conformality_defect_scan");
    let m = model.clone();
    group.bench_function("sequential", |b| {
        b.iter_batched(
            || states.clone(),
            |states| {
                par::sequential_map(states, |z| conformality_defect(&m, &z, 0.9))
                    .into_iter()
                    .fold(0.0_f64, f64::max)
            },
            BatchSize::SmallInput,
        )
    });
    #[cfg(feature = "parallel")]
    {
        let m = model.clone();
        group.bench_function("parallel", |b| {
            b.iter_batched(
                || states.clone(),
                |states| {
                    par::parallel_map(states, |z| conformality_defect(&m, &z, 0.9))
                        .into_iter()
                        .fold(0.0_f64, f64::max)
                },
                BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

criterion_group!(benches, bench_basin_grid, bench_orbit_batch, bench_conformality_scan);
criterion_main!(benches);
