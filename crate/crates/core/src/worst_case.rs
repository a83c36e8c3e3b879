//! Worst-case fidelity analytics.
//!
//! With `x = π²κ²`, `c = (2d²-3d+1)/2`, `t = (4d²-7d+2)/8` and
//! `u = (5d²-9d+4)/4`, the probability that round `k` projects the ancillas
//! trivially, given that round `k-1` did, is
//!
//! ```text
//! P_k = (1 + k²c²x + t·x) / (1 + k²c²x + (1 + θ(k-2))·t·x + u·x)
//! ```
//!
//! with `θ(0) = 1`. Over `2m` rounds the chain probability is the product of
//! the `P_k`, the correct-state amplitude is
//! `|α| = sqrt((1 + m²(2c)²x) / (1 + m²(2c)²x + t·x))`, and the worst-case
//! fidelity is `F_min = P_chain · |α|` with infidelity `r = 1 - F_min`.

use serde::Serialize;

use crate::error::{usage, Error, Result};
use crate::exec::{self, Execution};
use crate::pauli_algebra::{rat, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WorstCaseParams {
    pub d: usize,
    pub kappa: f64,
    pub m: usize,
}

impl WorstCaseParams {
    pub fn validate(&self) -> Result<()> {
        check_d(self.d)?;
        check_kappa(self.kappa)?;
        if self.m == 0 {
            return Err(usage("m must be at least 1"));
        }
        Ok(())
    }
}

fn check_d(d: usize) -> Result<()> {
    if d < 3 || d.is_multiple_of(2) {
        return Err(usage(format!("code distance must be odd and at least 3, got {d}")));
    }
    Ok(())
}

fn check_kappa(kappa: f64) -> Result<()> {
    if !(kappa.is_finite() && kappa >= 0.0) {
        return Err(usage(format!("κ must be finite and nonnegative, got {kappa}")));
    }
    Ok(())
}

/// `θ(x)` with `θ(0) = 1`.
fn step(x: i64) -> i64 {
    i64::from(x >= 0)
}

/// The `π²κ²` coefficients of one round's trivial-branch numerator and of
/// the normalization denominator, both of the form `1 + coeff·π²κ²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundPolynomials {
    pub numerator: Rational,
    pub denominator: Rational,
}

pub fn round_polynomials(d: usize, k: usize) -> Result<RoundPolynomials> {
    check_d(d)?;
    if k == 0 {
        return Err(usage("round index k starts at 1"));
    }
    let (d, k) = (d as i64, k as i64);
    let c = rat(2 * d * d - 3 * d + 1, 2);
    let t = rat(4 * d * d - 7 * d + 2, 8);
    let u = rat(5 * d * d - 9 * d + 4, 4);
    let id = c * c * k * k;
    Ok(RoundPolynomials { numerator: id + t, denominator: id + t * (1 + step(k - 2)) + u })
}

fn round_probability(d: usize, kappa: f64, k: usize) -> f64 {
    let x = (std::f64::consts::PI * kappa).powi(2);
    let df = d as f64;
    let c = (2.0 * df * df - 3.0 * df + 1.0) / 2.0;
    let t = (4.0 * df * df - 7.0 * df + 2.0) / 8.0;
    let u = (5.0 * df * df - 9.0 * df + 4.0) / 4.0;
    let kf = k as f64;
    let id = kf * kf * c * c * x;
    let doubling = if k >= 2 { 2.0 } else { 1.0 };
    (1.0 + id + t * x) / (1.0 + id + doubling * t * x + u * x)
}

/// `P_{k|k-1}`.
pub fn p_k_given_km1(d: usize, kappa: f64, k: usize) -> Result<f64> {
    check_d(d)?;
    check_kappa(kappa)?;
    if k == 0 {
        return Err(usage("round index k starts at 1"));
    }
    Ok(round_probability(d, kappa, k))
}

/// `P_{1→2m}`.
pub fn chain_probability(d: usize, kappa: f64, m: usize) -> Result<f64> {
    WorstCaseParams { d, kappa, m }.validate()?;
    Ok((1..=2 * m).map(|k| round_probability(d, kappa, k)).product())
}

pub fn alpha_magnitude(d: usize, kappa: f64, m: usize) -> Result<f64> {
    WorstCaseParams { d, kappa, m }.validate()?;
    let x = (std::f64::consts::PI * kappa).powi(2);
    let df = d as f64;
    let w = 2.0 * df * df - 3.0 * df + 1.0;
    let t = (4.0 * df * df - 7.0 * df + 2.0) / 8.0;
    let a = 1.0 + (m * m) as f64 * w * w * x;
    Ok((a / (a + t * x)).sqrt())
}

pub fn f_min(d: usize, kappa: f64, m: usize) -> Result<f64> {
    Ok(chain_probability(d, kappa, m)? * alpha_magnitude(d, kappa, m)?)
}

pub fn infidelity(d: usize, kappa: f64, m: usize) -> Result<f64> {
    Ok(1.0 - f_min(d, kappa, m)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorstCaseResult {
    pub params: WorstCaseParams,
    pub per_round: Vec<f64>,
    pub p_chain: f64,
    pub alpha: f64,
    pub f_min: f64,
    pub r: f64,
}

pub fn evaluate(params: WorstCaseParams) -> Result<WorstCaseResult> {
    params.validate()?;
    let WorstCaseParams { d, kappa, m } = params;
    let per_round: Vec<f64> = (1..=2 * m).map(|k| round_probability(d, kappa, k)).collect();
    let p_chain = per_round.iter().product();
    let alpha = alpha_magnitude(d, kappa, m)?;
    let f = p_chain * alpha;
    Ok(WorstCaseResult { params, per_round, p_chain, alpha, f_min: f, r: 1.0 - f })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub d: usize,
    pub kappa: f64,
    pub m: usize,
    pub p_chain: f64,
    pub alpha: f64,
    pub f_min: f64,
    pub r: f64,
}

/// Odd distances in `[d_min, d_max]`.
pub fn odd_range(d_min: usize, d_max: usize) -> Vec<usize> {
    (d_min.max(3)..=d_max).filter(|d| d % 2 == 1).collect()
}

pub fn sweep_curve(d_list: &[usize], kappa: f64, m: usize) -> Result<Vec<SweepRow>> {
    sweep_grid(d_list, &[kappa], &[m], Execution::default())
}

/// Rows ordered by κ, then m, then d as given.
pub fn sweep_grid(d_list: &[usize], kappas: &[f64], ms: &[usize], exec: Execution) -> Result<Vec<SweepRow>> {
    if d_list.is_empty() || kappas.is_empty() || ms.is_empty() {
        return Err(usage("empty sweep"));
    }
    let mut points = Vec::with_capacity(d_list.len() * kappas.len() * ms.len());
    for &kappa in kappas {
        for &m in ms {
            for &d in d_list {
                let p = WorstCaseParams { d, kappa, m };
                p.validate()?;
                points.push(p);
            }
        }
    }
    exec::map_collect(exec, &points, |p| {
        evaluate(*p).map(|r| SweepRow {
            d: p.d,
            kappa: p.kappa,
            m: p.m,
            p_chain: r.p_chain,
            alpha: r.alpha,
            f_min: r.f_min,
            r: r.r,
        })
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub slope: f64,
    pub intercept_log10: f64,
    pub window: [usize; 2],
    pub points: usize,
}

/// Least squares on `(log10 d, log10 r)` over rows with `d_min ≤ d ≤ d_max`.
pub fn power_law_fit(rows: &[SweepRow], d_min: usize, d_max: usize) -> Result<PowerLawFit> {
    let pts: Vec<&SweepRow> = rows.iter().filter(|r| r.d >= d_min && r.d <= d_max).collect();
    if pts.len() < 3 {
        return Err(usage(format!("{} points in fit window [{d_min}, {d_max}], need 3", pts.len())));
    }
    if let Some(bad) = pts.iter().find(|r| r.r.is_nan() || r.r <= 0.0) {
        return Err(Error::Degenerate(format!("r = {} at d = {}; log-log fit undefined", bad.r, bad.d)));
    }
    let xs: Vec<f64> = pts.iter().map(|r| (r.d as f64).log10()).collect();
    let ys: Vec<f64> = pts.iter().map(|r| r.r.log10()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    Ok(PowerLawFit { slope, intercept_log10: my - slope * mx, window: [d_min, d_max], points: pts.len() })
}
