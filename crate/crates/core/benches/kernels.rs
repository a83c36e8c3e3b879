use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dice_core::aqec::kl_scan;
use dice_core::qec_cycle::{branch_probabilities, run_trials, CycleConfig, MeasurementMode, RoundKernel};
use dice_core::statevector::{Gate, StateVector};
use dice_core::surface_code::{build_layout, prepare_logical_zero, Basis, PrepMode};
use dice_core::worst_case::{odd_range, sweep_grid};
use dice_core::Execution;

const POLICIES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn gate_kernels(c: &mut Criterion) {
    let mut g = c.benchmark_group("gate_19q");
    let gates: Vec<Gate> = (0..18).map(|q| Gate::CnotImperfect { control: q, target: q + 1, kappa: 0.05 }).collect();
    for (name, exec) in POLICIES {
        let state = StateVector::zero(19).unwrap().with_execution(exec);
        g.bench_function(name, |b| {
            b.iter(|| {
                let mut s = state.clone();
                s.apply_gates(black_box(&gates)).unwrap();
                s
            })
        });
    }
    g.finish();
}

fn round_kernels(c: &mut Criterion) {
    let layout = build_layout(3).unwrap();
    let (zero, _) = prepare_logical_zero(&layout, &PrepMode::Ideal).unwrap();
    let mut g = c.benchmark_group("round_branches");
    g.sample_size(10);
    for (name, kernel) in [("circuit", RoundKernel::Circuit), ("projected", RoundKernel::Projected)] {
        g.bench_function(name, |b| {
            b.iter(|| branch_probabilities(black_box(&zero), &layout, Basis::X, 0.05, kernel).unwrap())
        });
    }
    g.finish();
}

fn trajectories(c: &mut Criterion) {
    let config = CycleConfig::new(0.05, 3, MeasurementMode::Sample { seed: Some(7) });
    let mut g = c.benchmark_group("trajectories");
    g.sample_size(10);
    for (name, exec) in POLICIES {
        g.bench_with_input(BenchmarkId::new(name, 32), &exec, |b, &exec| {
            b.iter(|| run_trials(black_box(&config), 32, exec).unwrap())
        });
    }
    g.finish();
}

fn kl(c: &mut Criterion) {
    let mut g = c.benchmark_group("kl_scan");
    g.sample_size(10);
    for (name, exec) in POLICIES {
        g.bench_function(name, |b| b.iter(|| kl_scan(black_box(0.01), exec).unwrap()));
    }
    g.finish();
}

fn sweep(c: &mut Criterion) {
    let ds = odd_range(3, 101);
    let kappas = [0.01, 0.02, 0.05, 0.1, 0.4];
    let ms = [2, 3, 4, 8, 16];
    let mut g = c.benchmark_group("worst_case_sweep");
    for (name, exec) in POLICIES {
        g.bench_function(name, |b| b.iter(|| sweep_grid(black_box(&ds), &kappas, &ms, exec).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, gate_kernels, round_kernels, trajectories, kl, sweep);
criterion_main!(benches);
