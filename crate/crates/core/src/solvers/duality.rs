//! SINR-constrained power minimization through uplink-downlink duality.

use num_complex::Complex64;

use super::{Hyperparams, SolverError, SolverOutcome};
use crate::model::{dot, hermitian_solve_vec, normalized, ComplexMatrix, Solution};
use crate::precoders::{assemble, downlink_powers};

/// Divergence guard: uplink powers above this multiple of `σ² K` mean the
/// targets cannot be met.
const DIVERGENCE_FACTOR: f64 = 1e3;

struct Uplink {
    dirs: Vec<Vec<Complex64>>,
    trace: Vec<f64>,
    converged: bool,
}

/// Fixed point `q_k = γ_k / ((1 + γ_k) h_k A⁻¹ h_kᴴ)` with
/// `A = C + Σ_j q_j h_jᴴ h_j`, started from `q = 0`. The iteration is
/// monotone increasing, so an unbounded run signals infeasibility.
fn uplink_fixed_point(
    h: &ComplexMatrix,
    gammas: &[f64],
    noise_cov: &ComplexMatrix,
    sigma2: f64,
    opts: &Hyperparams,
) -> Result<Uplink, SolverError> {
    let (k_users, _) = h.shape();
    let rows: Vec<Vec<Complex64>> = (0..k_users).map(|k| h.row(k).to_vec()).collect();
    let conj_rows: Vec<Vec<Complex64>> = rows.iter().map(|r| r.iter().map(|z| z.conj()).collect()).collect();
    let covariance = |q: &[f64]| {
        let mut a = noise_cov.clone();
        for (row, qk) in conj_rows.iter().zip(q) {
            for (i, hi) in row.iter().enumerate() {
                for (j, hj) in row.iter().enumerate() {
                    let v = a[(i, j)] + hi * hj.conj() * qk;
                    a.as_mut_slice()[i * row.len() + j] = v;
                }
            }
        }
        a
    };
    let limit = DIVERGENCE_FACTOR * sigma2 * k_users as f64;
    let mut q = vec![0.0; k_users];
    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let a = covariance(&q);
        let mut next = vec![0.0; k_users];
        for k in 0..k_users {
            let solved = hermitian_solve_vec(&a, &conj_rows[k])?;
            let gain = dot(&rows[k], &solved).re;
            if !(gain > 0.0) {
                return Err(SolverError::Infeasible(format!("user {k} has no usable channel")));
            }
            next[k] = gammas[k] / ((1.0 + gammas[k]) * gain);
        }
        let change = q
            .iter()
            .zip(&next)
            .map(|(old, new)| (new - old).abs() / new.max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        q = next;
        let total: f64 = q.iter().sum();
        trace.push(total);
        if !total.is_finite() || total > limit {
            return Err(SolverError::Infeasible(format!(
                "uplink power {total:.3e} exceeds divergence bound {limit:.3e}"
            )));
        }
        if change <= opts.tol {
            converged = true;
            break;
        }
    }
    let a = covariance(&q);
    let dirs = conj_rows
        .iter()
        .enumerate()
        .map(|(k, hk)| {
            let d = hermitian_solve_vec(&a, hk)?;
            normalized(&d).ok_or_else(|| SolverError::Infeasible(format!("user {k} direction vanished")))
        })
        .collect::<Result<Vec<_>, SolverError>>()?;
    Ok(Uplink { dirs, trace, converged })
}

fn scaled_targets(gammas: &[f64], opts: &Hyperparams) -> Vec<f64> {
    gammas.iter().map(|g| g * opts.target_scale).collect()
}

fn check_inputs(h: &ComplexMatrix, gammas: &[f64], sigma2: f64) -> Result<(), SolverError> {
    if gammas.len() != h.rows() {
        return Err(SolverError::InvalidInput(format!(
            "{} targets for {} users",
            gammas.len(),
            h.rows()
        )));
    }
    if gammas.iter().any(|g| !(*g > 0.0) || !g.is_finite()) || !(sigma2 > 0.0) {
        return Err(SolverError::InvalidInput("targets and noise must be positive".into()));
    }
    Ok(())
}

/// Minimum-power beamformers meeting every SINR target.
///
/// Directions come from the uplink fixed point; downlink powers then meet
/// each target with equality. The trace records the uplink sum power per
/// iteration, which converges to the downlink optimum.
pub fn sinr_power_min_duality(
    h: &ComplexMatrix,
    gammas: &[f64],
    sigma2: f64,
    opts: &Hyperparams,
) -> Result<SolverOutcome, SolverError> {
    check_inputs(h, gammas, sigma2)?;
    let gammas = scaled_targets(gammas, opts);
    let noise = ComplexMatrix::identity(h.cols()).scale(sigma2);
    let up = uplink_fixed_point(h, &gammas, &noise, sigma2, opts)?;
    let p = downlink_powers(h, &up.dirs, &gammas, sigma2)
        .ok_or_else(|| SolverError::Infeasible("no positive downlink power allocation".into()))?;
    let w = assemble(&up.dirs, &p);
    let objective = w.frobenius_norm_sqr();
    SolverOutcome::new(Solution::BeamformerMatrix(w), objective, up.trace, up.converged).finish()
}

/// `‖G_si W‖_F²`.
fn self_interference(g_si: &ComplexMatrix, w: &ComplexMatrix) -> f64 {
    g_si.matmul(w).frobenius_norm_sqr()
}

/// Power minimization with an extra self-interference cap
/// `‖G_si W‖_F² ≤ η`.
///
/// The cap enters as a multiplier `μ` on the uplink noise covariance
/// `σ²(I + μ G_siᴴ G_si)`; `μ` is bracketed geometrically then bisected
/// until the cap is active to within `1e-6` relative. The trace holds the
/// downlink power at each outer step.
pub fn fd_power_min(
    h: &ComplexMatrix,
    gammas: &[f64],
    g_si: &ComplexMatrix,
    eta: f64,
    sigma2: f64,
    opts: &Hyperparams,
) -> Result<SolverOutcome, SolverError> {
    check_inputs(h, gammas, sigma2)?;
    if g_si.cols() != h.cols() {
        return Err(SolverError::InvalidInput("G_si column count differs from N_t".into()));
    }
    let gammas = scaled_targets(gammas, opts);
    let gram = g_si.adjoint().matmul(g_si);
    let n = h.cols();
    let mut trace = Vec::new();
    let mut all_converged = true;
    let mut solve_at = |mu: f64, trace: &mut Vec<f64>| -> Result<ComplexMatrix, SolverError> {
        let cov = (&ComplexMatrix::identity(n) + &gram.scale(mu)).scale(sigma2);
        let up = uplink_fixed_point(h, &gammas, &cov, sigma2, opts)?;
        all_converged &= up.converged;
        let p = downlink_powers(h, &up.dirs, &gammas, sigma2)
            .ok_or_else(|| SolverError::Infeasible("no positive downlink power allocation".into()))?;
        let w = assemble(&up.dirs, &p);
        trace.push(w.frobenius_norm_sqr());
        Ok(w)
    };

    let w0 = solve_at(0.0, &mut trace)?;
    if self_interference(g_si, &w0) <= eta {
        let obj = w0.frobenius_norm_sqr();
        return SolverOutcome::new(Solution::BeamformerMatrix(w0), obj, trace, all_converged).finish();
    }

    // bracket: grow mu geometrically until the cap holds
    const MU_MAX: f64 = 1e6;
    let (mut lo, mut hi) = (0.0, 1e-6);
    let mut w_hi = loop {
        let w = solve_at(hi, &mut trace)?;
        if self_interference(g_si, &w) <= eta {
            break w;
        }
        if hi >= MU_MAX {
            return Err(SolverError::Infeasible(format!(
                "self-interference cap {eta:.3e} unreachable at multiplier {MU_MAX:.0e}"
            )));
        }
        lo = hi;
        hi = (hi * 10.0).min(MU_MAX);
    };
    for _ in 0..200 {
        if eta - self_interference(g_si, &w_hi) <= 1e-6 * eta {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let w = solve_at(mid, &mut trace)?;
        if self_interference(g_si, &w) <= eta {
            hi = mid;
            w_hi = w;
        } else {
            lo = mid;
        }
    }
    let obj = w_hi.frobenius_norm_sqr();
    SolverOutcome::new(Solution::BeamformerMatrix(w_hi), obj, trace, all_converged).finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::sinr;
    use crate::rng::{complex_gaussian_matrix, seeded};

    fn opts() -> Hyperparams {
        Hyperparams::default()
    }

    fn bf(s: &Solution) -> &ComplexMatrix {
        match s {
            Solution::BeamformerMatrix(w) => w,
            _ => unreachable!(),
        }
    }

    #[test]
    fn single_user_closed_form() {
        let mut rng = seeded(5);
        let h = complex_gaussian_matrix(1, 4, &mut rng);
        let (gamma, sigma2) = (3.0, 0.2);
        let out = sinr_power_min_duality(&h, &[gamma], sigma2, &opts()).unwrap();
        let expected = gamma * sigma2 / h.frobenius_norm_sqr();
        assert!((out.objective - expected).abs() < 1e-12 * expected.max(1.0));
    }

    #[test]
    fn orthogonal_users_decouple() {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        let h = ComplexMatrix::from_rows(&[vec![c(2.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(0.0, 1.0)]]).unwrap();
        let out = sinr_power_min_duality(&h, &[1.0, 2.0], 0.5, &opts()).unwrap();
        let expected = 1.0 * 0.5 / 4.0 + 2.0 * 0.5 / 1.0;
        assert!((out.objective - expected).abs() < 1e-9);
    }

    #[test]
    fn targets_met_with_equality() {
        let mut rng = seeded(8);
        let h = complex_gaussian_matrix(4, 8, &mut rng);
        let gammas = [1.0, 2.0, 0.5, 1.5];
        let out = sinr_power_min_duality(&h, &gammas, 0.1, &opts()).unwrap();
        let s = sinr(&h, bf(&out.solution), 0.1);
        for (a, b) in s.iter().zip(gammas) {
            assert!((a - b).abs() < 1e-8 * b, "{a} vs {b}");
        }
        assert!(out.converged && out.iterations == out.trace.len());
    }

    #[test]
    fn colinear_users_infeasible() {
        let c = |re: f64| Complex64::new(re, 0.0);
        let h = ComplexMatrix::from_rows(&[vec![c(1.0), c(1.0)], vec![c(2.0), c(2.0)]]).unwrap();
        let err = sinr_power_min_duality(&h, &[10.0, 10.0], 0.1, &opts()).unwrap_err();
        assert!(matches!(err, SolverError::Infeasible(_)), "{err:?}");
    }

    #[test]
    fn fd_inactive_cap_matches_plain() {
        let mut rng = seeded(12);
        let h = complex_gaussian_matrix(2, 4, &mut rng);
        let g = complex_gaussian_matrix(2, 4, &mut rng);
        let plain = sinr_power_min_duality(&h, &[1.0, 1.0], 0.1, &opts()).unwrap();
        let fd = fd_power_min(&h, &[1.0, 1.0], &g, 1e9, 0.1, &opts()).unwrap();
        assert!((plain.objective - fd.objective).abs() < 1e-12);
    }

    #[test]
    fn fd_binding_cap_is_active() {
        let mut rng = seeded(21);
        let h = complex_gaussian_matrix(2, 4, &mut rng);
        let g = complex_gaussian_matrix(2, 4, &mut rng);
        let plain = sinr_power_min_duality(&h, &[1.0, 1.0], 0.1, &opts()).unwrap();
        let si0 = self_interference(&g, bf(&plain.solution));
        let eta = 0.3 * si0;
        let fd = fd_power_min(&h, &[1.0, 1.0], &g, eta, 0.1, &opts()).unwrap();
        let si = self_interference(&g, bf(&fd.solution));
        assert!(si <= eta && si >= eta - 1e-6, "{si} vs {eta}");
        assert!(fd.objective >= plain.objective);
        let s = sinr(&h, bf(&fd.solution), 0.1);
        assert!(s.iter().all(|v| *v >= 1.0 - 1e-8));
    }
}
