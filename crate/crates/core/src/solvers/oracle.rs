//! Brute-force reference solvers for small instances.
//!
//! These enumerate a finite design set and return the best member. They are
//! slow by construction and intended as ground truth in tests.

use std::f64::consts::{FRAC_PI_2, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{SolverError, SolverOutcome, ONE_BIT_ALPHABET};
use crate::metrics::{ci_margins, secrecy_rate};
use crate::model::{dot, norm_sqr, normalized, pseudo_inverse, ComplexMatrix, Solution, DEFAULT_RANK_TOL};
use crate::precoders::{assemble, one_bit_amplitude, PowerBudget};
use crate::scenarios::ScenarioDescriptor;

/// Largest number of candidate evaluations an oracle will attempt.
pub const ORACLE_LIMIT: f64 = 1e7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OracleKind {
    /// All `4^N_t` one-bit transmit vectors.
    OneBitEnumeration,
    /// All `grid^N_t` constant-envelope phase vectors.
    ConstantEnvelopeGrid,
    /// Two-user power minimization: each beamformer on a `grid`-point path
    /// from MRT to ZF, powers by bisection.
    PowerMinTwoUserGrid,
    /// Secrecy multicast with `N_t = 3`: every unit vector of the
    /// two-dimensional eavesdropper null space on a `grid × 2·grid` mesh.
    SecrecyNullspaceGrid,
}

fn too_large(count: f64) -> Result<(), SolverError> {
    if count > ORACLE_LIMIT {
        Err(SolverError::TooLarge(count))
    } else {
        Ok(())
    }
}

fn symbols_of(theta: &ScenarioDescriptor) -> Result<&[Complex64], SolverError> {
    theta
        .ch
        .symbols
        .as_deref()
        .ok_or_else(|| SolverError::InvalidInput("scenario carries no symbols".into()))
}

fn worst(h: &ComplexMatrix, s: &[Complex64], x: &[Complex64], m: u32) -> f64 {
    ci_margins(h, s, x, m).into_iter().fold(f64::INFINITY, f64::min)
}

/// Exhaustive search of the given kind on instance `theta`.
pub fn exhaustive_oracle(
    kind: OracleKind,
    theta: &ScenarioDescriptor,
    grid: u32,
) -> Result<SolverOutcome, SolverError> {
    let n = theta.n_t();
    let sigma = theta.sigma();
    match kind {
        OracleKind::OneBitEnumeration => {
            too_large(4f64.powi(n as i32))?;
            let s = symbols_of(theta)?;
            let budget = PowerBudget::new(theta.p_max())?;
            let amp = one_bit_amplitude(n, budget);
            let alphabet: Vec<Complex64> = ONE_BIT_ALPHABET.iter().map(|z| z * amp).collect();
            let mut idx = vec![0usize; n];
            let mut best = (f64::NEG_INFINITY, vec![]);
            loop {
                let x: Vec<Complex64> = idx.iter().map(|i| alphabet[*i]).collect();
                let v = worst(&theta.ch.h, s, &x, theta.symbol_order());
                if v > best.0 {
                    best = (v, x);
                }
                if !odometer(&mut idx, 4) {
                    break;
                }
            }
            let solution = Solution::quantized(ComplexMatrix::column_vector(&best.1), n, amp)?;
            Ok(SolverOutcome::new(solution, best.0 / sigma, vec![best.0 / sigma], true))
        }
        OracleKind::ConstantEnvelopeGrid => {
            too_large(f64::from(grid).powi(n as i32))?;
            let s = symbols_of(theta)?;
            let amp = (theta.p_max() / n as f64).sqrt();
            let g = grid.max(1) as usize;
            let step = TAU / g as f64;
            let mut idx = vec![0usize; n];
            let mut best = (f64::NEG_INFINITY, vec![]);
            loop {
                let x: Vec<Complex64> = idx
                    .iter()
                    .map(|i| Complex64::from_polar(amp, *i as f64 * step))
                    .collect();
                let v = worst(&theta.ch.h, s, &x, theta.symbol_order());
                if v > best.0 {
                    best = (v, idx.clone());
                }
                if !odometer(&mut idx, g) {
                    break;
                }
            }
            let phases = best.1.iter().map(|i| *i as f64 * step).collect();
            Ok(SolverOutcome::new(
                Solution::PhaseVector(phases),
                best.0 / sigma,
                vec![best.0 / sigma],
                true,
            ))
        }
        OracleKind::PowerMinTwoUserGrid => two_user_power_min(theta, grid),
        OracleKind::SecrecyNullspaceGrid => secrecy_grid(theta, grid),
    }
}

/// Advances a mixed-radix counter; `false` after the last state.
fn odometer(idx: &mut [usize], base: usize) -> bool {
    for d in idx.iter_mut() {
        *d += 1;
        if *d < base {
            return true;
        }
        *d = 0;
    }
    false
}

/// Minimum powers for two fixed unit directions by bisection on `p_2`.
fn two_user_powers(gains: [[f64; 2]; 2], gammas: [f64; 2], sigma2: f64) -> Option<[f64; 2]> {
    // p1(p2) from user 1's equality; residual of user 2's equality
    let p1_of = |p2: f64| gammas[0] * (p2 * gains[0][1] + sigma2) / gains[0][0];
    let residual = |p2: f64| p2 - gammas[1] * (p1_of(p2) * gains[1][0] + sigma2) / gains[1][1];
    // residual is affine with slope 1 − γ1 γ2 g01 g10 / (g00 g11); it must rise
    let slope = residual(1.0) - residual(0.0);
    if !(slope > 0.0) {
        return None;
    }
    let mut hi = 1.0;
    while residual(hi) < 0.0 {
        hi *= 2.0;
        if hi > 1e12 {
            return None;
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-14 * hi {
        let mid = 0.5 * (lo + hi);
        if residual(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some([p1_of(hi), hi])
}

fn two_user_power_min(theta: &ScenarioDescriptor, grid: u32) -> Result<SolverOutcome, SolverError> {
    let h = &theta.ch.h;
    if h.rows() != 2 {
        return Err(SolverError::InvalidInput("two-user oracle needs K = 2".into()));
    }
    let g = grid.max(2) as usize;
    too_large((g * g) as f64)?;
    let gammas = theta
        .sinr_targets()
        .ok_or_else(|| SolverError::InvalidInput("scenario has no SINR targets".into()))?;
    let sigma2 = theta.ch.sigma2;
    let zf = pseudo_inverse(h, DEFAULT_RANK_TOL)?;
    // directions on the MRT–ZF path for each user
    let paths: Vec<Vec<Vec<Complex64>>> = (0..2)
        .map(|k| {
            let mrt = normalized(&h.row(k).iter().map(|z| z.conj()).collect::<Vec<_>>()).expect("nonzero channel");
            let zfk = normalized(&zf.column(k)).expect("nonzero ZF column");
            (0..g)
                .map(|i| {
                    let lam = i as f64 / (g - 1) as f64;
                    let mix: Vec<Complex64> = mrt.iter().zip(&zfk).map(|(a, b)| a * lam + b * (1.0 - lam)).collect();
                    normalized(&mix).unwrap_or_else(|| mrt.clone())
                })
                .collect()
        })
        .collect();
    let mut best: Option<(f64, [usize; 2], [f64; 2])> = None;
    for i in 0..g {
        for j in 0..g {
            let dirs = [&paths[0][i], &paths[1][j]];
            let mut gains = [[0.0; 2]; 2];
            for (k, row) in gains.iter_mut().enumerate() {
                for (l, v) in row.iter_mut().enumerate() {
                    *v = dot(h.row(k), dirs[l]).norm_sqr();
                }
            }
            if let Some(p) = two_user_powers(gains, [gammas[0], gammas[1]], sigma2) {
                let total = p[0] + p[1];
                if best.is_none_or(|b| total < b.0) {
                    best = Some((total, [i, j], p));
                }
            }
        }
    }
    let (total, [i, j], p) = best.ok_or_else(|| SolverError::Infeasible("no grid point meets the targets".into()))?;
    let w = assemble(&[paths[0][i].clone(), paths[1][j].clone()], &p);
    Ok(SolverOutcome::new(
        Solution::BeamformerMatrix(w),
        total,
        vec![total],
        true,
    ))
}

fn secrecy_grid(theta: &ScenarioDescriptor, grid: u32) -> Result<SolverOutcome, SolverError> {
    let h = &theta.ch.h;
    let e = theta
        .ch
        .h_eve
        .as_ref()
        .ok_or_else(|| SolverError::InvalidInput("scenario has no eavesdropper".into()))?;
    if h.cols() != 3 {
        return Err(SolverError::InvalidInput("null-space grid oracle needs N_t = 3".into()));
    }
    let g = grid.max(2) as usize;
    too_large((2 * g * g) as f64)?;
    // orthonormal basis of the eavesdropper null space {w : e w = 0}
    let ed: Vec<Complex64> = normalized(&e.row(0).iter().map(|z| z.conj()).collect::<Vec<_>>())
        .ok_or_else(|| SolverError::InvalidInput("zero eavesdropper channel".into()))?;
    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    for unit in 0..3 {
        let mut v = vec![Complex64::new(0.0, 0.0); 3];
        v[unit] = Complex64::new(1.0, 0.0);
        for b in std::iter::once(&ed).chain(basis.iter()) {
            let c: Complex64 = b.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= bi * c;
            }
        }
        if norm_sqr(&v) > 1e-6 {
            basis.push(normalized(&v).expect("nonzero"));
        }
        if basis.len() == 2 {
            break;
        }
    }
    let p = theta.p_max().sqrt();
    let sigma2 = theta.ch.sigma2;
    let mut best = (f64::NEG_INFINITY, vec![]);
    for a in 0..=g {
        let alpha = FRAC_PI_2 * a as f64 / g as f64;
        for f in 0..2 * g {
            let phi = TAU * f as f64 / (2 * g) as f64;
            let c1 = Complex64::new(alpha.cos(), 0.0);
            let c2 = Complex64::from_polar(alpha.sin(), phi);
            let w: Vec<Complex64> = basis[0]
                .iter()
                .zip(&basis[1])
                .map(|(x, y)| (x * c1 + y * c2) * p)
                .collect();
            let snr: Vec<f64> = (0..h.rows()).map(|k| dot(h.row(k), &w).norm_sqr() / sigma2).collect();
            let eve = dot(e.row(0), &w).norm_sqr() / sigma2;
            let v = secrecy_rate(&snr, eve);
            if v > best.0 {
                best = (v, w);
            }
        }
    }
    Ok(SolverOutcome::new(
        Solution::BeamformerMatrix(ComplexMatrix::column_vector(&best.1)),
        best.0,
        vec![best.0],
        true,
    ))
}
