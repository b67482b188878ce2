//! Constructive-interference (CI) margin maximization for constant-envelope
//! and 1-bit transmitters.
//!
//! Both solvers work on the unnormalized worst-user margin and divide by σ
//! only when reporting, so the reported objective scales exactly as `1/σ`
//! across noise levels for the same channel.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::hybrid::{min_norm_point, real_dot};
use super::{phase_search, Hyperparams, SolverError, SolverOutcome};
use crate::metrics::ci_margin_of;
use crate::model::{dot, ComplexMatrix, Solution};
use crate::precoders::{mrt_composite, one_bit_amplitude, one_bit_quantize, zf_composite, PowerBudget};
use crate::rng::{seeded, uniform_phase};

/// 1-bit alphabet ordered by phase in `[0, 2π)`, in units of the amplitude.
pub const ONE_BIT_ALPHABET: [Complex64; 4] = [
    Complex64::new(1.0, 1.0),
    Complex64::new(-1.0, 1.0),
    Complex64::new(-1.0, -1.0),
    Complex64::new(1.0, -1.0),
];

/// Random phase vectors tried by the constant-envelope solver besides the
/// composite starts.
const CE_RANDOM_RESTARTS: usize = 8;
const CE_RESTART_SEED: u64 = 0x00c1_5eed;

/// Which linear composite seeds the search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CompositeInit {
    Mrt,
    Zf,
    /// Run from both and keep the better result.
    #[default]
    Both,
}

/// One symbol-level instance.
#[derive(Debug, Clone, PartialEq)]
pub struct CiProblem<'a> {
    pub h: &'a ComplexMatrix,
    pub symbols: &'a [Complex64],
    pub m: u32,
    pub sigma: f64,
    pub budget: PowerBudget,
}

impl CiProblem<'_> {
    fn check(&self) -> Result<(), SolverError> {
        if self.symbols.len() != self.h.rows() {
            return Err(SolverError::InvalidInput(format!(
                "{} symbols for {} users",
                self.symbols.len(),
                self.h.rows()
            )));
        }
        if self.m < 2 || !(self.sigma > 0.0) {
            return Err(SolverError::InvalidInput("need M >= 2 and sigma > 0".into()));
        }
        Ok(())
    }

    /// Channel rows rotated by each user's conjugate symbol phase, so the
    /// margin of user k is `ci_margin_of(rot_k · x)`.
    fn rotated_rows(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.h.rows(), self.h.cols(), |k, n| {
            self.h[(k, n)] * Complex64::from_polar(1.0, -self.symbols[k].arg())
        })
    }
}

/// Worst-user unnormalized margin of transmit vector `x`.
pub fn ci_objective(rot: &ComplexMatrix, x: &[Complex64], m: u32) -> f64 {
    (0..rot.rows())
        .map(|k| ci_margin_of(dot(rot.row(k), x), m))
        .fold(f64::INFINITY, f64::min)
}

/// Worst margin when antenna `n` carries `value` instead of its current
/// entry; `y` holds the current rotated receive samples.
fn margin_with(rot: &ComplexMatrix, y: &[Complex64], n: usize, old: Complex64, value: Complex64, m: u32) -> f64 {
    y.iter()
        .enumerate()
        .map(|(k, yk)| ci_margin_of(yk + rot[(k, n)] * (value - old), m))
        .fold(f64::INFINITY, f64::min)
}

fn initial_composites(p: &CiProblem<'_>, init: CompositeInit) -> Vec<Vec<Complex64>> {
    let mrt = mrt_composite(p.h, p.symbols);
    let zf = zf_composite(p.h, p.symbols).ok();
    match (init, zf) {
        (CompositeInit::Mrt, _) | (_, None) => vec![mrt],
        (CompositeInit::Zf, Some(z)) => vec![z],
        (CompositeInit::Both, Some(z)) => vec![z, mrt],
    }
}

struct CdRun {
    theta: Vec<f64>,
    value: f64,
    trace: Vec<f64>,
    converged: bool,
}

/// The two linear pieces whose minimum is a user's margin, as
/// `(value, gradient in the phases)`, for every user.
fn margin_pieces(rot: &ComplexMatrix, x: &[Complex64], m: u32) -> Vec<(f64, Vec<f64>)> {
    let (s, c) = (std::f64::consts::PI / f64::from(m)).sin_cos();
    let mut out = Vec::with_capacity(2 * rot.rows());
    for k in 0..rot.rows() {
        let y = dot(rot.row(k), x);
        for sign in [1.0, -1.0] {
            let value = y.re * s - sign * y.im * c;
            let grad = (0..x.len())
                .map(|n| {
                    let rx = rot[(k, n)] * x[n];
                    -s * rx.im - sign * c * rx.re
                })
                .collect();
            out.push((value, grad));
        }
    }
    out
}

/// ε-steepest ascent of the worst margin from `theta`: the direction is the
/// minimum-norm point of the gradients of the nearly active pieces, which
/// moves every nearly tied user up at once. Only strict improvements are
/// taken. Returns the number of accepted steps.
fn kink_ascent(rot: &ComplexMatrix, theta: &mut [f64], amp: f64, m: u32, value: &mut f64, max_steps: u32) -> u32 {
    let signal = |t: &[f64]| -> Vec<Complex64> { t.iter().map(|t| Complex64::from_polar(amp, *t)).collect() };
    let scale = amp
        * rot
            .as_slice()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
    let mut eps = 1e-2 * scale;
    let mut step = 1.0;
    let mut accepted = 0;
    while accepted < max_steps && eps > 1e-12 * scale {
        let x = signal(theta);
        let pieces = margin_pieces(rot, &x, m);
        let low = pieces.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let active: Vec<Vec<f64>> = pieces.into_iter().filter(|p| p.0 <= low + eps).map(|p| p.1).collect();
        let d = min_norm_point(&active);
        let dn = real_dot(&d, &d).sqrt();
        if dn < 1e-12 * scale {
            eps *= 0.1;
            continue;
        }
        let mut t = step / dn;
        let mut moved = false;
        for _ in 0..40 {
            let trial: Vec<f64> = theta.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            let v = ci_objective(rot, &signal(&trial), m);
            if v > *value {
                theta.copy_from_slice(&trial);
                *value = v;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if moved {
            accepted += 1;
            step = (t * dn * 2.0).min(1.0);
        } else {
            eps *= 0.1;
        }
    }
    accepted
}

fn ce_descent(p: &CiProblem<'_>, rot: &ComplexMatrix, start: &[Complex64], opts: &Hyperparams) -> CdRun {
    let n = p.h.cols();
    let amp = (p.budget.p_max() / n as f64).sqrt();
    let mut theta: Vec<f64> = start
        .iter()
        .map(|z| if z.norm_sqr() == 0.0 { 0.0 } else { z.arg() })
        .collect();
    let mut x: Vec<Complex64> = theta.iter().map(|t| Complex64::from_polar(amp, *t)).collect();
    let mut y: Vec<Complex64> = (0..rot.rows()).map(|k| dot(rot.row(k), &x)).collect();
    let mut value = ci_objective(rot, &x, p.m);
    let mut trace = Vec::new();
    let mut converged = false;
    let phase_tol = 1e-10;
    for _ in 0..opts.max_iter {
        let before = value;
        for i in 0..n {
            let old = x[i];
            let (t, v) = phase_search(
                |t| margin_with(rot, &y, i, old, Complex64::from_polar(amp, t), p.m),
                opts.grid_points,
                phase_tol,
            );
            if v > value {
                let new = Complex64::from_polar(amp, t);
                for (k, yk) in y.iter_mut().enumerate() {
                    *yk += rot[(k, i)] * (new - old);
                }
                x[i] = new;
                theta[i] = t.rem_euclid(std::f64::consts::TAU);
                // recompute from scratch to avoid drift in the running sums
                value = ci_objective(rot, &x, p.m);
            }
        }
        if value - before < opts.tol * before.abs().max(1.0) {
            // single-antenna moves are exhausted; try a joint move at the kink
            let stalled = value;
            kink_ascent(rot, &mut theta, amp, p.m, &mut value, 50);
            for t in theta.iter_mut() {
                *t = t.rem_euclid(std::f64::consts::TAU);
            }
            x = theta.iter().map(|t| Complex64::from_polar(amp, *t)).collect();
            if value - stalled < opts.tol * stalled.abs().max(1.0) {
                trace.push(value / p.sigma);
                converged = true;
                break;
            }
        }
        y = (0..rot.rows()).map(|k| dot(rot.row(k), &x)).collect();
        trace.push(value / p.sigma);
    }
    CdRun {
        theta,
        value,
        trace,
        converged,
    }
}

/// Soft-min of the margins at temperature `1/beta`, with its gradient in the
/// antenna phases.
fn soft_min_and_grad(rot: &ComplexMatrix, theta: &[f64], amp: f64, m: u32, beta: f64) -> (f64, Vec<f64>) {
    let phi = std::f64::consts::PI / f64::from(m);
    let (s, c) = phi.sin_cos();
    let x: Vec<Complex64> = theta.iter().map(|t| Complex64::from_polar(amp, *t)).collect();
    let y: Vec<Complex64> = (0..rot.rows()).map(|k| dot(rot.row(k), &x)).collect();
    let margins: Vec<f64> = y.iter().map(|yk| ci_margin_of(*yk, m)).collect();
    let low = margins.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = margins.iter().map(|v| (-beta * (v - low)).exp()).collect();
    let z: f64 = w.iter().sum();
    let value = low - z.ln() / beta;
    let grad = (0..theta.len())
        .map(|n| {
            (0..rot.rows())
                .map(|k| {
                    let rx = rot[(k, n)] * x[n];
                    let sign = if y[k].im >= 0.0 { 1.0 } else { -1.0 };
                    w[k] / z * (-s * rx.im - sign * c * rx.re)
                })
                .sum()
        })
        .collect();
    (value, grad)
}

/// Joint phase ascent on the soft-min surrogate, sharpening the temperature
/// stage by stage. Joint moves can follow the ridges where several users
/// tie, which single-antenna updates cannot.
fn smoothed_start(rot: &ComplexMatrix, start: &[f64], amp: f64, m: u32, opts: &Hyperparams) -> Vec<f64> {
    // margins are of order amp·‖row‖, which sets the temperature scale
    let scale = amp
        * (0..rot.rows())
            .map(|k| rot.row(k).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
            .sum::<f64>()
        / rot.rows() as f64;
    let mut theta = start.to_vec();
    let mut step = 1.0 / scale;
    for stage in 0..16 {
        let beta = opts.penalty * f64::powi(2.0, stage) / scale;
        let (mut value, mut grad) = soft_min_and_grad(rot, &theta, amp, m, beta);
        for _ in 0..200 {
            let g2: f64 = grad.iter().map(|g| g * g).sum();
            if g2.sqrt() * step < 1e-12 {
                break;
            }
            let mut accepted = false;
            for _ in 0..40 {
                let trial: Vec<f64> = theta.iter().zip(&grad).map(|(t, g)| t + step * g).collect();
                let (v, g) = soft_min_and_grad(rot, &trial, amp, m, beta);
                if v >= value + 1e-4 * step * g2 {
                    theta = trial;
                    value = v;
                    grad = g;
                    step *= 2.0;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
    }
    theta
}

/// Constant-envelope CI margin maximization by per-antenna phase updates.
///
/// Each antenna phase is set by a uniform grid of `grid_points` phases
/// followed by golden-section refinement; an update is kept only if it
/// strictly improves the worst-user margin, so the trace is nondecreasing.
/// Sweeps stop once the improvement falls below `tol` (relative).
///
/// When single-antenna updates stall, a joint ε-steepest-ascent step moves
/// all nearly tied users at once. Besides the composite starts, the search
/// also runs from the composites and from a fixed set of random phase
/// vectors after joint ascent on a soft-min surrogate (initial sharpness
/// `penalty`), and keeps the best result.
pub fn ce_phase_coordinate_descent(
    problem: &CiProblem<'_>,
    init: CompositeInit,
    opts: &Hyperparams,
) -> Result<SolverOutcome, SolverError> {
    problem.check()?;
    let rot = problem.rotated_rows();
    let amp = (problem.budget.p_max() / problem.h.cols() as f64).sqrt();
    let n = problem.h.cols();
    let composites = initial_composites(problem, init);
    // fixed-seed restarts keep the solver deterministic and independent of σ
    let mut rng = seeded(CE_RESTART_SEED);
    let random: Vec<Vec<f64>> = (0..CE_RANDOM_RESTARTS)
        .map(|_| (0..n).map(|_| uniform_phase(&mut rng)).collect())
        .collect();
    let phases_of = |z: &[Complex64]| -> Vec<f64> {
        z.iter()
            .map(|v| if v.norm_sqr() == 0.0 { 0.0 } else { v.arg() })
            .collect()
    };
    let unit = |t: Vec<f64>| -> Vec<Complex64> { t.into_iter().map(|t| Complex64::from_polar(1.0, t)).collect() };
    let plain = composites.iter().map(|start| ce_descent(problem, &rot, start, opts));
    let smoothed = composites.iter().map(|z| phases_of(z)).chain(random).map(|t| {
        ce_descent(
            problem,
            &rot,
            &unit(smoothed_start(&rot, &t, amp, problem.m, opts)),
            opts,
        )
    });
    let best = plain
        .chain(smoothed)
        .max_by(|a, b| a.value.total_cmp(&b.value))
        .expect("at least one start");
    SolverOutcome::new(
        Solution::PhaseVector(best.theta),
        best.value / problem.sigma,
        best.trace,
        best.converged,
    )
    .finish()
}

/// 1-bit CI margin maximization by greedy per-antenna alphabet search.
///
/// Starts from the quantized composite and, per antenna, moves to the
/// alphabet point with the best worst-user margin (lowest index on ties)
/// only if that strictly improves the current value. Terminates when a
/// sweep changes nothing, which must happen because the alphabet is finite.
pub fn one_bit_greedy_cd(
    problem: &CiProblem<'_>,
    init: CompositeInit,
    opts: &Hyperparams,
) -> Result<SolverOutcome, SolverError> {
    let _ = opts;
    problem.check()?;
    let rot = problem.rotated_rows();
    let n = problem.h.cols();
    let amp = one_bit_amplitude(n, problem.budget);
    let alphabet: Vec<Complex64> = ONE_BIT_ALPHABET.iter().map(|z| z * amp).collect();

    let mut best: Option<(Vec<Complex64>, f64, Vec<f64>)> = None;
    for start in initial_composites(problem, init) {
        let Solution::QuantizedVector(q) = one_bit_quantize(&start, problem.budget) else {
            unreachable!("quantizer returns a quantized vector")
        };
        let mut x = q.column(0);
        let mut y: Vec<Complex64> = (0..rot.rows()).map(|k| dot(rot.row(k), &x)).collect();
        let mut value = ci_objective(&rot, &x, problem.m);
        let mut trace = Vec::new();
        loop {
            let mut changed = false;
            for i in 0..n {
                let old = x[i];
                let mut pick: Option<(Complex64, f64)> = None;
                for &a in &alphabet {
                    let v = margin_with(&rot, &y, i, old, a, problem.m);
                    if pick.is_none_or(|(_, pv)| v > pv) {
                        pick = Some((a, v));
                    }
                }
                let (a, v) = pick.expect("nonempty alphabet");
                if v > value && a != old {
                    for (k, yk) in y.iter_mut().enumerate() {
                        *yk += rot[(k, i)] * (a - old);
                    }
                    x[i] = a;
                    value = ci_objective(&rot, &x, problem.m);
                    changed = true;
                }
            }
            y = (0..rot.rows()).map(|k| dot(rot.row(k), &x)).collect();
            trace.push(value / problem.sigma);
            if !changed {
                break;
            }
        }
        if best.as_ref().is_none_or(|(_, bv, _)| value > *bv) {
            best = Some((x, value, trace));
        }
    }
    let (x, value, trace) = best.expect("at least one start");
    let solution = Solution::quantized(ComplexMatrix::column_vector(&x), n, amp)?;
    Ok(SolverOutcome::new(solution, value / problem.sigma, trace, true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::ci_margins;
    use crate::rng::{complex_gaussian_matrix, seeded};
    use crate::scenarios::psk_point;

    fn budget() -> PowerBudget {
        PowerBudget::new(1.0).unwrap()
    }

    fn instance(seed: u64, k: usize, n: usize) -> (ComplexMatrix, Vec<Complex64>) {
        let mut rng = seeded(seed);
        let h = complex_gaussian_matrix(k, n, &mut rng);
        let s = (0..k).map(|i| psk_point((i as u32 * 3 + seed as u32) % 4, 4)).collect();
        (h, s)
    }

    #[test]
    fn ce_single_user_reaches_coherent_bound() {
        let (h, s) = instance(3, 1, 6);
        let p = CiProblem {
            h: &h,
            symbols: &s,
            m: 4,
            sigma: 0.3,
            budget: budget(),
        };
        let out = ce_phase_coordinate_descent(&p, CompositeInit::Both, &Hyperparams::default()).unwrap();
        let amp = (1.0f64 / 6.0).sqrt();
        let bound = (std::f64::consts::PI / 4.0).sin() * amp * h.row(0).iter().map(|z| z.norm()).sum::<f64>() / 0.3;
        assert!(
            (out.objective - bound).abs() < 1e-9 * bound,
            "{} vs {bound}",
            out.objective
        );
    }

    #[test]
    fn ce_trace_nondecreasing_and_reported_margin_matches() {
        let (h, s) = instance(9, 4, 8);
        let p = CiProblem {
            h: &h,
            symbols: &s,
            m: 4,
            sigma: 0.5,
            budget: budget(),
        };
        let out = ce_phase_coordinate_descent(&p, CompositeInit::Zf, &Hyperparams::default()).unwrap();
        assert!(out.trace.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        let Solution::PhaseVector(t) = &out.solution else {
            unreachable!()
        };
        let x = Solution::ce_signal(t, 1.0);
        let worst = ci_margins(&h, &s, &x, 4).into_iter().fold(f64::INFINITY, f64::min);
        assert!((worst / 0.5 - out.objective).abs() < 1e-12);
    }

    #[test]
    fn ce_objective_scales_inverse_sigma() {
        let (h, s) = instance(4, 3, 6);
        let run = |sigma: f64| {
            let p = CiProblem {
                h: &h,
                symbols: &s,
                m: 4,
                sigma,
                budget: budget(),
            };
            ce_phase_coordinate_descent(&p, CompositeInit::Both, &Hyperparams::default())
                .unwrap()
                .objective
        };
        let (a, b) = (run(1.0), run(0.1));
        assert!((b - 10.0 * a).abs() < 1e-12 * b.abs());
    }

    #[test]
    fn one_bit_never_worse_than_quantized_start() {
        for seed in 0..20 {
            let (h, s) = instance(seed, 4, 8);
            let p = CiProblem {
                h: &h,
                symbols: &s,
                m: 4,
                sigma: 1.0,
                budget: budget(),
            };
            let out = one_bit_greedy_cd(&p, CompositeInit::Mrt, &Hyperparams::default()).unwrap();
            let Solution::QuantizedVector(q) = one_bit_quantize(&mrt_composite(&h, &s), budget()) else {
                unreachable!()
            };
            let start = ci_margins(&h, &s, &q.column(0), 4)
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            assert!(out.objective >= start - 1e-12);
            assert!(out.converged);
        }
    }

    #[test]
    fn one_bit_alphabet_ordered_by_phase() {
        let phases: Vec<f64> = ONE_BIT_ALPHABET
            .iter()
            .map(|z| z.arg().rem_euclid(std::f64::consts::TAU))
            .collect();
        assert!(phases.windows(2).all(|w| w[0] < w[1]));
    }
}
