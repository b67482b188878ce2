//! Sum-rate maximization for cognitive (underlay) transmitters that must
//! keep interference at a primary receiver below a temperature threshold.

use num_complex::Complex64;

use super::{Hyperparams, SolverError, SolverOutcome};
use crate::metrics::{interference_power, sinr, sum_rate_of};
use crate::model::{dot, normalized, ComplexMatrix, Solution};
use crate::precoders::{mrt, rzf, slnr, zf, PowerBudget};

#[derive(Debug, Clone, PartialEq)]
pub struct CognitiveProblem<'a> {
    pub h: &'a ComplexMatrix,
    /// Channel row towards the primary receiver; `None` drops the
    /// interference constraint.
    pub g: Option<&'a ComplexMatrix>,
    pub i_th: f64,
    pub sigma2: f64,
    pub budget: PowerBudget,
}

/// Wirtinger gradient of the sum rate with respect to `W*` (in bps/Hz).
pub fn sum_rate_gradient(h: &ComplexMatrix, w: &ComplexMatrix, sigma2: f64) -> ComplexMatrix {
    let (k_users, n) = h.shape();
    let cols = w.columns();
    let mut grad = ComplexMatrix::zeros(n, cols.len());
    for k in 0..k_users {
        let hk = h.row(k);
        let y: Vec<Complex64> = cols.iter().map(|c| dot(hk, c)).collect();
        let total: f64 = sigma2 + y.iter().map(|v| v.norm_sqr()).sum::<f64>();
        let interf = total - y[k].norm_sqr();
        // R_k = log2(T_k) − log2(I_k); ∂T/∂w_j* = hᴴ y_j, ∂I/∂w_j* likewise for j≠k
        for (j, yj) in y.iter().enumerate() {
            let mut coef = *yj / (total * std::f64::consts::LN_2);
            if j != k {
                coef -= *yj / (interf * std::f64::consts::LN_2);
            }
            for (i, hn) in hk.iter().enumerate() {
                let v = grad[(i, j)] + hn.conj() * coef;
                grad.as_mut_slice()[i * cols.len() + j] = v;
            }
        }
    }
    grad
}

/// Orthogonal decomposition of each column along `ĝ = gᴴ/‖g‖`.
fn split_along(w: &ComplexMatrix, g_dir: &[Complex64]) -> (ComplexMatrix, ComplexMatrix) {
    let (n, k) = w.shape();
    let mut par = ComplexMatrix::zeros(n, k);
    for j in 0..k {
        let col = w.column(j);
        let c: Complex64 = g_dir.iter().zip(&col).map(|(a, b)| a.conj() * b).sum();
        let p: Vec<Complex64> = g_dir.iter().map(|e| e * c).collect();
        par.set_column(j, &p);
    }
    let perp = w - &par;
    (perp, par)
}

/// Maps `W` into the feasible set: scale to the power budget, then shrink
/// the component along `g` (binary search on the shrink factor) until the
/// worst-case interference `Σ_k (|g w_k| + ε‖w_k‖)²` is below `i_th`, then
/// scale down if shrinking alone is not enough.
pub fn project_cognitive(w: &ComplexMatrix, problem: &CognitiveProblem<'_>, epsilon: f64) -> ComplexMatrix {
    let p = w.frobenius_norm_sqr();
    let mut w = if p > problem.budget.p_max() {
        w.scale((problem.budget.p_max() / p).sqrt())
    } else {
        w.clone()
    };
    let Some(g) = problem.g else { return w };
    let g_row = g.row(0);
    let interference = |m: &ComplexMatrix| interference_power(g_row, m, epsilon);
    if interference(&w) <= problem.i_th {
        return w;
    }
    let Some(g_dir) = normalized(&g_row.iter().map(|z| z.conj()).collect::<Vec<_>>()) else {
        return w;
    };
    let (perp, par) = split_along(&w, &g_dir);
    let at = |beta: f64| &perp + &par.scale(1.0 - beta);
    let full = at(1.0);
    let f_full = interference(&full);
    if f_full > problem.i_th {
        // homogeneous of degree two in the scale
        let s = (problem.i_th / f_full).sqrt() * (1.0 - 1e-12);
        return full.scale(s);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    w = full;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let cand = at(mid);
        if interference(&cand) <= problem.i_th {
            hi = mid;
            w = cand;
        } else {
            lo = mid;
        }
    }
    w
}

fn sum_rate(h: &ComplexMatrix, w: &ComplexMatrix, sigma2: f64) -> f64 {
    sum_rate_of(&sinr(h, w, sigma2))
}

fn ascent(problem: &CognitiveProblem<'_>, epsilon: f64, opts: &Hyperparams) -> Result<SolverOutcome, SolverError> {
    let (h, sigma2, budget) = (problem.h, problem.sigma2, problem.budget);
    let candidates = [
        mrt(h, budget).ok(),
        zf(h, budget).ok(),
        rzf(h, budget, sigma2).ok(),
        slnr(h, budget, sigma2).ok(),
    ];
    let mut w = candidates
        .into_iter()
        .flatten()
        .filter_map(|s| match s {
            Solution::BeamformerMatrix(w) => Some(project_cognitive(&w, problem, epsilon)),
            _ => None,
        })
        .max_by(|a, b| sum_rate(h, a, sigma2).total_cmp(&sum_rate(h, b, sigma2)))
        .ok_or_else(|| SolverError::Infeasible("no baseline initializer available".into()))?;
    let mut value = sum_rate(h, &w, sigma2);
    let mut step = opts.step_init;
    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let grad = sum_rate_gradient(h, &w, sigma2);
        let scale = 1.0 / grad.frobenius_norm().max(f64::MIN_POSITIVE) * w.frobenius_norm().max(1e-12);
        let mut s = step;
        let mut accepted = None;
        for _ in 0..50 {
            let cand = project_cognitive(&(&w + &grad.scale(s * scale)), problem, epsilon);
            let v = sum_rate(h, &cand, sigma2);
            if v > value {
                accepted = Some((cand, v));
                break;
            }
            s *= 0.5;
        }
        let gain = match accepted {
            Some((cand, v)) => {
                let gain = v - value;
                w = cand;
                value = v;
                step = (s * 2.0).min(1e3);
                gain
            }
            None => 0.0,
        };
        trace.push(value);
        if gain <= opts.tol {
            converged = true;
            break;
        }
    }
    SolverOutcome::new(Solution::BeamformerMatrix(w), value, trace, converged).finish()
}

/// Projected gradient ascent on the sum rate under the nominal
/// interference cap `Σ_k |g w_k|² ≤ i_th` and the power budget.
///
/// Starts from the best projected linear baseline and accepts only
/// improving steps, so the trace is nondecreasing and every iterate is
/// feasible.
pub fn cr_sumrate_proj_ascent(
    problem: &CognitiveProblem<'_>,
    opts: &Hyperparams,
) -> Result<SolverOutcome, SolverError> {
    ascent(problem, 0.0, opts)
}

/// Robust variant: the cap must hold for every channel error of norm at
/// most `epsilon`, i.e. `Σ_k (|g w_k| + ε‖w_k‖)² ≤ i_th`.
pub fn cr_robust_sumrate(
    problem: &CognitiveProblem<'_>,
    epsilon: f64,
    opts: &Hyperparams,
) -> Result<SolverOutcome, SolverError> {
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(SolverError::InvalidInput(format!("epsilon {epsilon}")));
    }
    if problem.g.is_some() && epsilon * epsilon * problem.budget.p_max() > problem.i_th {
        return Err(SolverError::Infeasible(format!(
            "ε² P = {:.3e} exceeds the interference threshold {:.3e}",
            epsilon * epsilon * problem.budget.p_max(),
            problem.i_th
        )));
    }
    ascent(problem, epsilon, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{complex_gaussian_matrix, seeded};

    fn budget() -> PowerBudget {
        PowerBudget::new(1.0).unwrap()
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let mut rng = seeded(2);
        let h = complex_gaussian_matrix(3, 4, &mut rng);
        let w = complex_gaussian_matrix(4, 3, &mut rng).scale(0.3);
        let g = sum_rate_gradient(&h, &w, 0.2);
        let eps = 1e-6;
        for idx in [0usize, 5, 11] {
            let mut wp = w.clone();
            wp.as_mut_slice()[idx] += Complex64::new(eps, 0.0);
            let mut wi = w.clone();
            wi.as_mut_slice()[idx] += Complex64::new(0.0, eps);
            let d_re = (sum_rate(&h, &wp, 0.2) - sum_rate(&h, &w, 0.2)) / eps;
            let d_im = (sum_rate(&h, &wi, 0.2) - sum_rate(&h, &w, 0.2)) / eps;
            // df = 2 Re(gᴴ dw) for the conjugate gradient
            let gi = g.as_slice()[idx];
            assert!((d_re - 2.0 * gi.re).abs() < 1e-4, "{d_re} {}", gi.re);
            assert!((d_im - 2.0 * gi.im).abs() < 1e-4, "{d_im} {}", gi.im);
        }
    }

    #[test]
    fn projection_enforces_caps() {
        let mut rng = seeded(3);
        let h = complex_gaussian_matrix(2, 4, &mut rng);
        let g = complex_gaussian_matrix(1, 4, &mut rng);
        let p = CognitiveProblem {
            h: &h,
            g: Some(&g),
            i_th: 0.05,
            sigma2: 0.1,
            budget: budget(),
        };
        let w = complex_gaussian_matrix(4, 2, &mut rng).scale(3.0);
        for eps in [0.0, 0.1] {
            let pw = project_cognitive(&w, &p, eps);
            assert!(pw.frobenius_norm_sqr() <= 1.0 + 1e-12);
            assert!(interference_power(g.row(0), &pw, eps) <= 0.05 + 1e-15);
        }
    }

    #[test]
    fn single_user_without_primary_is_mrt() {
        let mut rng = seeded(4);
        let h = complex_gaussian_matrix(1, 4, &mut rng);
        let p = CognitiveProblem {
            h: &h,
            g: None,
            i_th: 0.1,
            sigma2: 0.3,
            budget: budget(),
        };
        let out = cr_sumrate_proj_ascent(&p, &Hyperparams::default()).unwrap();
        let expected = (1.0 + h.frobenius_norm_sqr() / 0.3).log2();
        assert!((out.objective - expected).abs() < 1e-4);
    }

    #[test]
    fn robust_feasible_and_not_better_than_nominal() {
        let mut rng = seeded(5);
        let h = complex_gaussian_matrix(4, 8, &mut rng);
        let g = complex_gaussian_matrix(1, 8, &mut rng);
        let p = CognitiveProblem {
            h: &h,
            g: Some(&g),
            i_th: 0.1,
            sigma2: 0.1,
            budget: budget(),
        };
        let nominal = cr_sumrate_proj_ascent(&p, &Hyperparams::default()).unwrap();
        let robust = cr_robust_sumrate(&p, 0.1, &Hyperparams::default()).unwrap();
        let Solution::BeamformerMatrix(w) = &robust.solution else {
            unreachable!()
        };
        assert!(interference_power(g.row(0), w, 0.1) <= 0.1 * (1.0 + 1e-8));
        assert!(robust.trace.windows(2).all(|x| x[1] >= x[0]));
        assert!(robust.objective <= nominal.objective + 1e-6);
    }

    #[test]
    fn robust_rejects_impossible_radius() {
        let mut rng = seeded(6);
        let h = complex_gaussian_matrix(2, 4, &mut rng);
        let g = complex_gaussian_matrix(1, 4, &mut rng);
        let p = CognitiveProblem {
            h: &h,
            g: Some(&g),
            i_th: 0.01,
            sigma2: 0.1,
            budget: budget(),
        };
        assert!(matches!(
            cr_robust_sumrate(&p, 1.0, &Hyperparams::default()),
            Err(SolverError::Infeasible(_))
        ));
    }
}
