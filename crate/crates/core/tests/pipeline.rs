//! End-to-end checks across modules.

use dice_core::aqec::{kl_scan, DressedCodewords};
use dice_core::pauli_algebra::{propagate_round, round_deviation, trivial_branch, PauliSum};
use dice_core::qec_cycle::{
    run_qec_cycles, run_round, run_trials, CycleConfig, MeasurementMode, RoundKernel, RoundMode,
};
use dice_core::surface_code::{build_layout, prepare_logical_zero, Basis, PrepMode};
use dice_core::worst_case::{self, odd_range, sweep_grid};
use dice_core::{Error, Execution};

#[test]
fn chain_matches_exact_postselected_rounds() {
    // Small κ: exact two-cycle chain probability tracks the closed form.
    let kappa = 0.001;
    let t = run_qec_cycles(&CycleConfig::new(kappa, 1, MeasurementMode::PostselectTrivial)).unwrap();
    let closed = worst_case::chain_probability(3, kappa, 1).unwrap();
    let rel = ((1.0 - t.probability) - (1.0 - closed)).abs() / (1.0 - closed);
    assert!(rel < 0.05, "exact 1-P {} closed {}", 1.0 - t.probability, 1.0 - closed);
}

#[test]
fn imperfect_prep_overlap_deficit_is_quadratic() {
    let layout = build_layout(3).unwrap();
    let (ideal, _) = prepare_logical_zero(&layout, &PrepMode::Ideal).unwrap();
    let deficit = |kappa: f64| {
        let (s, rec) =
            prepare_logical_zero(&layout, &PrepMode::Imperfect { kappa, mode: RoundMode::PostselectTrivial }).unwrap();
        // Each site pattern is equally likely from the product state.
        assert!((rec.unwrap().probability * 64.0 - 1.0).abs() < 0.05);
        1.0 - ideal.fidelity(&s).unwrap().powi(2)
    };
    let ratio = deficit(0.02) / deficit(0.01);
    assert!((3.3..4.7).contains(&ratio), "ratio {ratio}");
}

#[test]
fn dressed_codewords_stay_near_code_space() {
    let layout = build_layout(3).unwrap();
    let (ideal, _) = prepare_logical_zero(&layout, &PrepMode::Ideal).unwrap();
    let dressed = DressedCodewords::new(&layout, 0.01).unwrap();
    let f = ideal.fidelity(&dressed.zero).unwrap();
    assert!(f < 1.0 && f > 0.99);
    assert!(dressed.zero.inner(&dressed.one).unwrap().norm() < 1e-12);
}

#[test]
fn propagation_reduces_to_round_deviation_from_identity() {
    let layout = build_layout(5).unwrap();
    let id = PauliSum::identity(layout.n(), 0, 1);
    let out = propagate_round(&id, &layout, Basis::Z, 1).unwrap();
    assert_eq!(out, round_deviation(&layout, Basis::Z, 1, 1).unwrap());
    let next = propagate_round(&trivial_branch(&out), &layout, Basis::X, 1).unwrap();
    assert!(next.len() > out.len());
}

#[test]
fn sequential_and_parallel_agree() {
    let mut c = CycleConfig::new(0.05, 2, MeasurementMode::Sample { seed: Some(11) });
    c.record_fidelity = false;
    let a = run_trials(&c, 6, Execution::Sequential).unwrap();
    let b = run_trials(&c, 6, Execution::Parallel).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(serde_json::to_string(x).unwrap(), serde_json::to_string(y).unwrap());
    }
    let rows = odd_range(3, 21);
    let s = sweep_grid(&rows, &[0.1, 0.4], &[2, 3], Execution::Sequential).unwrap();
    let p = sweep_grid(&rows, &[0.1, 0.4], &[2, 3], Execution::Parallel).unwrap();
    assert_eq!(s, p);
    let ks = kl_scan(0.01, Execution::Sequential).unwrap();
    let kp = kl_scan(0.01, Execution::Parallel).unwrap();
    assert_eq!(ks.entries, kp.entries);
}

#[test]
fn circuit_kernel_drives_full_cycles() {
    let mut c = CycleConfig::new(0.05, 1, MeasurementMode::PostselectTrivial);
    c.kernel = RoundKernel::Circuit;
    let a = run_qec_cycles(&c).unwrap();
    c.kernel = RoundKernel::Projected;
    let b = run_qec_cycles(&c).unwrap();
    assert!((a.final_fidelity - b.final_fidelity).abs() < 1e-10);
    assert!((a.probability - b.probability).abs() < 1e-12);
}

#[test]
fn errors_surface_to_callers() {
    let layout = build_layout(3).unwrap();
    let (zero, _) = prepare_logical_zero(&layout, &PrepMode::Ideal).unwrap();
    let other = build_layout(5).unwrap();
    assert!(run_round(&zero, &other, Basis::Z, 0.1, RoundMode::PostselectTrivial, RoundKernel::Projected).is_err());
    assert!(matches!(build_layout(4), Err(Error::Usage(_))));
    let mut c = CycleConfig::new(0.1, 1, MeasurementMode::PostselectTrivial);
    c.d = 7;
    assert!(matches!(run_qec_cycles(&c), Err(Error::Capacity(_))));
}
