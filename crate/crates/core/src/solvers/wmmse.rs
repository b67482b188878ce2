//! Weighted-MMSE sum-rate maximization under a total power budget.

use num_complex::Complex64;

use super::{Hyperparams, SolverError, SolverOutcome};
use crate::metrics::{sinr, sum_rate_of};
use crate::model::{dot, hermitian_solve, ComplexMatrix, Solution};
use crate::precoders::{mrt, rzf, slnr, zf, PowerBudget};

fn sum_rate(h: &ComplexMatrix, w: &ComplexMatrix, sigma2: f64) -> f64 {
    sum_rate_of(&sinr(h, w, sigma2))
}

/// Transmit update `(A + λI)⁻¹ B` for the MSE weights, with `λ ≥ 0` chosen
/// by bisection so the power budget holds (the feasible end is kept).
fn transmit_update(a: &ComplexMatrix, b: &ComplexMatrix, p_max: f64) -> Result<ComplexMatrix, SolverError> {
    let n = a.rows();
    let scale = (0..n).map(|i| a[(i, i)].re).sum::<f64>() / n as f64;
    let solve = |lambda: f64| -> Result<ComplexMatrix, SolverError> {
        let reg = a + &ComplexMatrix::identity(n).scale(lambda);
        Ok(hermitian_solve(&reg, b)?)
    };
    // A is rank deficient when K < N_t, so λ is floored at a tiny multiple
    // of its average eigenvalue; the minimum-norm solution is then recovered
    // to within that relative perturbation.
    let floor = 1e-12 * scale.max(f64::MIN_POSITIVE);
    let w = solve(floor)?;
    if w.frobenius_norm_sqr() <= p_max {
        return Ok(w);
    }
    let mut lo = floor;
    let mut hi = scale.max(floor);
    let mut w_hi = solve(hi)?;
    while w_hi.frobenius_norm_sqr() > p_max {
        lo = hi;
        hi *= 2.0;
        w_hi = solve(hi)?;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let w = solve(mid)?;
        if w.frobenius_norm_sqr() <= p_max {
            hi = mid;
            w_hi = w;
        } else {
            lo = mid;
        }
        if (hi - lo) <= 1e-14 * hi {
            break;
        }
    }
    Ok(w_hi)
}

/// One block-coordinate round: MMSE receivers, MSE weights, transmit update.
fn wmmse_round(h: &ComplexMatrix, w: &ComplexMatrix, sigma2: f64, p_max: f64) -> Result<ComplexMatrix, SolverError> {
    let (k_users, n) = h.shape();
    let cols = w.columns();
    let mut a = ComplexMatrix::zeros(n, n);
    let mut b = ComplexMatrix::zeros(n, k_users);
    for k in 0..k_users {
        let hk = h.row(k);
        let y: Vec<Complex64> = cols.iter().map(|c| dot(hk, c)).collect();
        let total = sigma2 + y.iter().map(|v| v.norm_sqr()).sum::<f64>();
        let u = y[k] / total;
        let mse = 1.0 - y[k].norm_sqr() / total;
        let weight = 1.0 / mse.max(1e-300);
        let coef = weight * u.norm_sqr();
        for i in 0..n {
            for j in 0..n {
                let v = a[(i, j)] + hk[i].conj() * hk[j] * coef;
                a.as_mut_slice()[i * n + j] = v;
            }
            let v = b[(i, k)] + hk[i].conj() * u * weight;
            b.as_mut_slice()[i * k_users + k] = v;
        }
    }
    transmit_update(&a, &b, p_max)
}

/// Sum-rate maximization by WMMSE block-coordinate descent.
///
/// Initialized from the best of ZF, RZF, SLNR and MRT at full power, and an
/// update is kept only if it does not lower the sum rate, so the result is
/// never worse than any of those baselines. The trace holds the sum rate
/// after each round.
pub fn wmmse_sumrate(
    h: &ComplexMatrix,
    sigma2: f64,
    budget: PowerBudget,
    opts: &Hyperparams,
) -> Result<SolverOutcome, SolverError> {
    if !(sigma2 > 0.0) {
        return Err(SolverError::InvalidInput("noise variance must be positive".into()));
    }
    let candidates = [
        zf(h, budget).ok(),
        rzf(h, budget, sigma2).ok(),
        slnr(h, budget, sigma2).ok(),
        mrt(h, budget).ok(),
    ];
    let mut w = candidates
        .into_iter()
        .flatten()
        .filter_map(|s| match s {
            Solution::BeamformerMatrix(w) => Some(w),
            _ => None,
        })
        .max_by(|a, b| sum_rate(h, a, sigma2).total_cmp(&sum_rate(h, b, sigma2)))
        .ok_or_else(|| SolverError::InvalidInput("no baseline initializer available".into()))?;
    let mut value = sum_rate(h, &w, sigma2);
    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let next = wmmse_round(h, &w, sigma2, budget.p_max())?;
        let v = sum_rate(h, &next, sigma2);
        let gain = v - value;
        if v >= value {
            w = next;
            value = v;
        }
        trace.push(value);
        if gain <= opts.tol {
            converged = true;
            break;
        }
    }
    SolverOutcome::new(Solution::BeamformerMatrix(w), value, trace, converged).finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{complex_gaussian_matrix, seeded};

    fn budget() -> PowerBudget {
        PowerBudget::new(1.0).unwrap()
    }

    fn opts() -> Hyperparams {
        Hyperparams {
            max_iter: 500,
            tol: 1e-8,
            ..Hyperparams::default()
        }
    }

    #[test]
    fn single_user_equals_mrt_capacity() {
        let mut rng = seeded(1);
        let h = complex_gaussian_matrix(1, 4, &mut rng);
        let out = wmmse_sumrate(&h, 0.5, budget(), &opts()).unwrap();
        let expected = (1.0 + h.frobenius_norm_sqr() / 0.5).log2();
        assert!((out.objective - expected).abs() < 1e-9);
    }

    #[test]
    fn beats_baselines_and_respects_budget() {
        for seed in 0..5 {
            let mut rng = seeded(seed);
            let h = complex_gaussian_matrix(4, 8, &mut rng);
            let sigma2 = 0.3;
            let out = wmmse_sumrate(&h, sigma2, budget(), &opts()).unwrap();
            let Solution::BeamformerMatrix(w) = &out.solution else {
                unreachable!()
            };
            assert!(w.frobenius_norm_sqr() <= 1.0 + 1e-9);
            for base in [zf(&h, budget()), rzf(&h, budget(), sigma2), slnr(&h, budget(), sigma2)] {
                let Solution::BeamformerMatrix(b) = base.unwrap() else {
                    unreachable!()
                };
                assert!(out.objective >= sum_rate(&h, &b, sigma2) - 1e-9);
            }
            assert!(out.trace.windows(2).all(|x| x[1] >= x[0] - 1e-12));
        }
    }

    #[test]
    fn one_iteration_is_not_converged() {
        let mut rng = seeded(3);
        let h = complex_gaussian_matrix(4, 8, &mut rng);
        let o = Hyperparams { max_iter: 1, ..opts() };
        match wmmse_sumrate(&h, 0.1, budget(), &o) {
            Err(SolverError::NotConverged { outcome }) => assert_eq!(outcome.trace.len(), 1),
            Ok(out) => assert_eq!(out.trace.len(), 1),
            Err(e) => panic!("{e}"),
        }
    }
}
