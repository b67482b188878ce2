//! Robust constructive-interference power minimization for hybrid
//! analog/digital transmitters.
//!
//! All computations run in units where `δσ = 1`; the final power is scaled
//! back by `(δσ)²`, so it is exactly proportional to the noise variance.
//!
//! For a fixed analog matrix the digital problem is solved exactly. With an
//! orthonormal basis `Q` of the analog range, each user contributes two
//! half-plane constraints `c_i·z ≥ 1 + β‖z‖` on the real coordinates `z` of
//! `x = Q u`. The minimum-norm feasible `z` points along the minimum-norm
//! element `p` of the convex hull of the `c_i`, giving power
//! `1 / (‖p‖ − β)²` when `‖p‖ > β`.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::{phase_search, Hyperparams, SolverError, SolverOutcome};
use crate::metrics::{ci_margin_of, robust_margin_penalty, symbol_composite};
use crate::model::{dot, norm, norm_sqr, real_solve, ComplexMatrix, Solution};
use crate::precoders::align_baseband;
use crate::rng::{mix_seed, seeded, uniform_phase};

/// Random analog restarts tried when the phase-matched start is infeasible.
const RANDOM_RESTARTS: u64 = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct HybridProblem<'a> {
    pub h: &'a ComplexMatrix,
    pub symbols: &'a [Complex64],
    pub m: u32,
    pub epsilon: f64,
    /// Required robust normalized margin.
    pub delta: f64,
    pub sigma: f64,
    pub n_rf: usize,
    pub seed: u64,
}

impl HybridProblem<'_> {
    fn check(&self) -> Result<(), SolverError> {
        let (k, n) = self.h.shape();
        if self.symbols.len() != k {
            return Err(SolverError::InvalidInput(format!(
                "{} symbols for {k} users",
                self.symbols.len()
            )));
        }
        if self.n_rf == 0 || self.n_rf > n {
            return Err(SolverError::InvalidInput(format!(
                "N_rf = {} with N_t = {n}",
                self.n_rf
            )));
        }
        if !(self.delta > 0.0) || !(self.sigma > 0.0) || !(self.epsilon >= 0.0) || self.m < 2 {
            return Err(SolverError::InvalidInput(
                "need delta, sigma > 0, epsilon >= 0, M >= 2".into(),
            ));
        }
        Ok(())
    }

    fn beta(&self) -> f64 {
        robust_margin_penalty(self.epsilon, self.m)
    }

    fn unit(&self) -> f64 {
        self.delta * self.sigma
    }
}

fn rotated(h: &ComplexMatrix, symbols: &[Complex64]) -> ComplexMatrix {
    ComplexMatrix::from_fn(h.rows(), h.cols(), |k, n| {
        h[(k, n)] * Complex64::from_polar(1.0, -symbols[k].arg())
    })
}

pub(crate) fn real_dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimum-norm point of the convex hull of `pts` (Wolfe's algorithm).
pub(crate) fn min_norm_point(pts: &[Vec<f64>]) -> Vec<f64> {
    let scale = pts.iter().map(|p| real_dot(p, p)).fold(0.0, f64::max);
    let first = (0..pts.len())
        .min_by(|&a, &b| real_dot(&pts[a], &pts[a]).total_cmp(&real_dot(&pts[b], &pts[b])))
        .expect("nonempty point set");
    let mut set = vec![first];
    let mut lam = vec![1.0];
    let combine = |set: &[usize], lam: &[f64]| {
        let mut x = vec![0.0; pts[0].len()];
        for (&i, l) in set.iter().zip(lam) {
            for (xi, pi) in x.iter_mut().zip(&pts[i]) {
                *xi += l * pi;
            }
        }
        x
    };
    let mut x = pts[first].clone();
    for _ in 0..1000 {
        let xx = real_dot(&x, &x);
        let (j, val) = (0..pts.len())
            .map(|i| (i, real_dot(&x, &pts[i])))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty");
        if xx - val <= 1e-13 * scale || set.contains(&j) {
            break;
        }
        set.push(j);
        lam.push(0.0);
        for _ in 0..1000 {
            // affine minimizer over the current set: [G 1; 1ᵀ 0][α; μ] = [0; 1]
            let s = set.len();
            let mut a = vec![vec![0.0; s + 1]; s + 1];
            for r in 0..s {
                for c in 0..s {
                    a[r][c] = real_dot(&pts[set[r]], &pts[set[c]]);
                }
                a[r][s] = 1.0;
                a[s][r] = 1.0;
            }
            let mut rhs = vec![0.0; s + 1];
            rhs[s] = 1.0;
            let Some(sol) = real_solve(&a, &rhs) else {
                return x;
            };
            let alpha = &sol[..s];
            if alpha.iter().all(|v| *v > 1e-14) {
                lam = alpha.to_vec();
                break;
            }
            let mut theta = 1.0f64;
            for (l, al) in lam.iter().zip(alpha) {
                if *al <= 1e-14 && l - al > 0.0 {
                    theta = theta.min(l / (l - al));
                }
            }
            for (l, al) in lam.iter_mut().zip(alpha) {
                *l += theta * (al - *l);
            }
            let keep: Vec<bool> = lam.iter().map(|l| *l > 1e-14).collect();
            let mut i = 0;
            set.retain(|_| {
                i += 1;
                keep[i - 1]
            });
            lam.retain(|l| *l > 1e-14);
            let total: f64 = lam.iter().sum();
            lam.iter_mut().for_each(|l| *l /= total);
            if set.len() == 1 {
                lam = vec![1.0];
                break;
            }
        }
        x = combine(&set, &lam);
    }
    x
}

/// Thin QR by twice-iterated classical Gram–Schmidt; `None` if rank
/// deficient.
fn thin_qr(f: &ComplexMatrix) -> Option<(ComplexMatrix, ComplexMatrix)> {
    let (n, r) = f.shape();
    let mut q_cols: Vec<Vec<Complex64>> = Vec::with_capacity(r);
    let mut rm = ComplexMatrix::zeros(r, r);
    let fnorm = f.frobenius_norm();
    for j in 0..r {
        let mut v = f.column(j);
        for _ in 0..2 {
            for (i, q) in q_cols.iter().enumerate() {
                let c: Complex64 = q.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= qi * c;
                }
                let cur = rm[(i, j)];
                rm.as_mut_slice()[i * r + j] = cur + c;
            }
        }
        let nv = norm(&v);
        if nv <= 1e-10 * fnorm {
            return None;
        }
        rm.as_mut_slice()[j * r + j] = Complex64::new(nv, 0.0);
        q_cols.push(v.iter().map(|z| z / nv).collect());
    }
    let _ = n;
    Some((ComplexMatrix::from_columns(&q_cols), rm))
}

/// Solves `R v = u` for upper-triangular `R`.
fn back_substitute(r: &ComplexMatrix, u: &[Complex64]) -> Vec<Complex64> {
    let n = u.len();
    let mut v = vec![Complex64::new(0.0, 0.0); n];
    for i in (0..n).rev() {
        let mut acc = u[i];
        for j in i + 1..n {
            acc -= r[(i, j)] * v[j];
        }
        v[i] = acc / r[(i, i)];
    }
    v
}

struct DigitalStep {
    v: Vec<Complex64>,
    x: Vec<Complex64>,
    /// Power in `δσ = 1` units.
    power: f64,
}

/// Exact minimum-power baseband vector for analog matrix `f`.
fn digital_step(rot: &ComplexMatrix, f: &ComplexMatrix, m: u32, beta: f64) -> Option<DigitalStep> {
    let (q, r) = thin_qr(f)?;
    let n_rf = f.cols();
    let phi = PI / f64::from(m);
    let (sin, cos) = phi.sin_cos();
    let b = rot.matmul(&q);
    let mut pts = Vec::with_capacity(2 * rot.rows());
    for k in 0..rot.rows() {
        for sgn in [1.0, -1.0] {
            let coef = Complex64::new(sin, sgn * cos);
            let mut c = vec![0.0; 2 * n_rf];
            for i in 0..n_rf {
                let a = coef * b[(k, i)];
                c[i] = a.re;
                c[n_rf + i] = -a.im;
            }
            pts.push(c);
        }
    }
    let p = min_norm_point(&pts);
    let pn = real_dot(&p, &p).sqrt();
    let eff = pn - beta;
    if !(eff > 1e-12 * pn.max(1e-300)) {
        return None;
    }
    let radius = 1.0 / eff;
    let u: Vec<Complex64> = (0..n_rf)
        .map(|i| Complex64::new(p[i], p[n_rf + i]) * (radius / pn))
        .collect();
    let x = q.mul_vec(&u);
    let v = back_substitute(&r, &u);
    Some(DigitalStep {
        v,
        x,
        power: radius * radius,
    })
}

/// Robust efficiency `min_k margin_k(x) − β‖x‖` from rotated receive samples.
fn efficiency(y: &[Complex64], x_norm: f64, m: u32, beta: f64) -> f64 {
    y.iter().map(|v| ci_margin_of(*v, m)).fold(f64::INFINITY, f64::min) - beta * x_norm
}

/// One pass over all analog entries; each entry phase is chosen to minimize
/// `‖x‖² / efficiency(x)²` with the baseband held fixed, and kept only if
/// it strictly lowers that ratio.
fn analog_sweep(rot: &ComplexMatrix, f: &mut ComplexMatrix, v: &[Complex64], m: u32, beta: f64, grid: u32) {
    let (n, n_rf) = f.shape();
    let mut x = f.mul_vec(v);
    let mut y: Vec<Complex64> = (0..rot.rows()).map(|k| dot(rot.row(k), &x)).collect();
    let ratio = |y: &[Complex64], nx2: f64| {
        let e = efficiency(y, nx2.sqrt(), m, beta);
        if e > 0.0 {
            -nx2 / (e * e)
        } else {
            f64::NEG_INFINITY
        }
    };
    let mut nx2 = norm_sqr(&x);
    let mut current = ratio(&y, nx2);
    for row in 0..n {
        for col in 0..n_rf {
            let old = f[(row, col)];
            let eval = |t: f64| {
                let delta = v[col] * (Complex64::from_polar(1.0, t) - old);
                let xn = x[row] + delta;
                let trial: Vec<Complex64> = y.iter().enumerate().map(|(k, yk)| yk + rot[(k, row)] * delta).collect();
                ratio(&trial, nx2 - x[row].norm_sqr() + xn.norm_sqr())
            };
            let (t, val) = phase_search(eval, grid, 1e-10);
            if val > current {
                let new = Complex64::from_polar(1.0, t);
                let delta = v[col] * (new - old);
                f.as_mut_slice()[row * n_rf + col] = new;
                x[row] += delta;
                for (k, yk) in y.iter_mut().enumerate() {
                    *yk += rot[(k, row)] * delta;
                }
                nx2 = norm_sqr(&x);
                current = ratio(&y, nx2);
            }
        }
    }
}

/// Analog matrix whose column `r` phase-matches user `r mod K`.
pub fn phase_matched_analog(h: &ComplexMatrix, n_rf: usize) -> ComplexMatrix {
    let k = h.rows();
    ComplexMatrix::from_fn(h.cols(), n_rf, |n, r| Complex64::from_polar(1.0, -h[(r % k, n)].arg()))
}

/// Power needed to give transmit direction `x` a robust normalized margin
/// of exactly `delta`, and the rescaled vector; `None` when no scaling
/// helps (nonpositive robust efficiency).
pub fn robust_ci_power_of(
    h: &ComplexMatrix,
    symbols: &[Complex64],
    x: &[Complex64],
    m: u32,
    epsilon: f64,
    delta: f64,
    sigma: f64,
) -> Option<(f64, Vec<Complex64>)> {
    let rot = rotated(h, symbols);
    let y: Vec<Complex64> = (0..rot.rows()).map(|k| dot(rot.row(k), x)).collect();
    let e = efficiency(&y, norm(x), m, robust_margin_penalty(epsilon, m));
    if !(e > 0.0) {
        return None;
    }
    let c = delta * sigma / e;
    let scaled: Vec<Complex64> = x.iter().map(|z| z * c).collect();
    Some((norm_sqr(&scaled), scaled))
}

/// Minimum transmit power of an unconstrained (fully digital) transmitter
/// meeting the same robust margin; a lower bound for any hybrid design.
pub fn digital_ci_power_min(
    h: &ComplexMatrix,
    symbols: &[Complex64],
    m: u32,
    epsilon: f64,
    delta: f64,
    sigma: f64,
) -> Result<(f64, Vec<Complex64>), SolverError> {
    let rot = rotated(h, symbols);
    let step = digital_step(
        &rot,
        &ComplexMatrix::identity(h.cols()),
        m,
        robust_margin_penalty(epsilon, m),
    )
    .ok_or_else(|| SolverError::Infeasible("robust margin unattainable at any power".into()))?;
    let unit = delta * sigma;
    Ok((step.power * unit * unit, step.x.iter().map(|z| z * unit).collect()))
}

/// Alternating minimization of transmit power for a hybrid transmitter
/// under a robust CI margin.
///
/// Starts from a phase-matched analog matrix (random restarts if that is
/// infeasible), then alternates an analog phase sweep with the exact
/// digital step. Both steps never increase power, so the trace (power in W
/// after each round) is nonincreasing. Stops when the relative decrease
/// falls below `tol`.
pub fn hybrid_robust_ci_altmin(problem: &HybridProblem<'_>, opts: &Hyperparams) -> Result<SolverOutcome, SolverError> {
    problem.check()?;
    let rot = rotated(problem.h, problem.symbols);
    let beta = problem.beta();
    let n = problem.h.cols();

    let mut f = phase_matched_analog(problem.h, problem.n_rf);
    let mut step = digital_step(&rot, &f, problem.m, beta);
    let mut rng = seeded(mix_seed(problem.seed, 0x4b));
    let mut attempt = 0;
    while step.is_none() && attempt < RANDOM_RESTARTS {
        attempt += 1;
        f = ComplexMatrix::from_fn(n, problem.n_rf, |_, _| {
            Complex64::from_polar(1.0, uniform_phase(&mut rng))
        });
        step = digital_step(&rot, &f, problem.m, beta);
    }
    let mut step = step.ok_or_else(|| {
        SolverError::Infeasible(format!(
            "robust margin unattainable with {} RF chains (epsilon {})",
            problem.n_rf, problem.epsilon
        ))
    })?;

    let unit = problem.unit();
    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let before = step.power;
        let mut f_next = f.clone();
        analog_sweep(&rot, &mut f_next, &step.v, problem.m, beta, opts.grid_points);
        if let Some(next) = digital_step(&rot, &f_next, problem.m, beta) {
            if next.power <= step.power {
                f = f_next;
                step = next;
            }
        }
        trace.push(step.power * unit * unit);
        if before - step.power <= opts.tol * before {
            converged = true;
            break;
        }
    }

    let s_hat = symbol_composite(problem.symbols);
    let v_scaled: Vec<Complex64> = step.v.iter().map(|z| z * unit).collect();
    let f_bb = align_baseband(&v_scaled, &s_hat);
    let power = norm_sqr(&step.x) * unit * unit;
    let solution = Solution::hybrid(f, f_bb, n, problem.n_rf, problem.h.rows())?;
    SolverOutcome::new(solution, power, trace, converged).finish()
}
