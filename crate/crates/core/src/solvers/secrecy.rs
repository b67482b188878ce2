//! Max-min secrecy multicast with the beamformer confined to the null space
//! of the eavesdropper channel.

use num_complex::Complex64;

use super::{Hyperparams, SolverError, SolverOutcome};
use crate::metrics::secrecy_rate;
use crate::model::{dot, norm, normalized, scale_vec, ComplexMatrix, Solution};
use crate::precoders::PowerBudget;
use crate::rng::{complex_gaussian, mix_seed, seeded};

/// Random restarts on top of the deterministic ones.
const RANDOM_STARTS: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct SecrecyProblem<'a> {
    pub h: &'a ComplexMatrix,
    /// Eavesdropper channel row; `None` means no eavesdropper.
    pub h_eve: Option<&'a ComplexMatrix>,
    pub sigma2: f64,
    pub budget: PowerBudget,
    /// Seeds the random restarts.
    pub seed: u64,
}

/// Projects `v` onto the orthogonal complement of unit vector `e`.
fn project_out(v: &[Complex64], e: Option<&[Complex64]>) -> Vec<Complex64> {
    match e {
        None => v.to_vec(),
        Some(e) => {
            // P v = v − e (eᴴ v)
            let c: Complex64 = e.iter().zip(v).map(|(a, b)| a.conj() * b).sum();
            v.iter().zip(e).map(|(vi, ei)| vi - ei * c).collect()
        }
    }
}

struct Ctx<'a> {
    rows: Vec<&'a [Complex64]>,
    sigma2: f64,
    power: f64,
    eve_dir: Option<Vec<Complex64>>,
}

impl Ctx<'_> {
    fn worst_gain(&self, w: &[Complex64]) -> f64 {
        self.rows
            .iter()
            .map(|r| dot(r, w).norm_sqr())
            .fold(f64::INFINITY, f64::min)
    }

    fn worst_rate(&self, w: &[Complex64]) -> f64 {
        (1.0 + self.worst_gain(w) / self.sigma2).log2()
    }

    /// Feasible point: null-space projection at full power.
    fn feasible(&self, v: &[Complex64]) -> Option<Vec<Complex64>> {
        let p = project_out(v, self.eve_dir.as_deref());
        normalized(&p).map(|u| scale_vec(&u, self.power.sqrt()))
    }
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut tau = 0.0;
    for (i, ui) in u.iter().enumerate() {
        acc += ui;
        let t = (acc - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            tau = t;
        }
    }
    v.iter().map(|x| (x - tau).max(0.0)).collect()
}

/// Maximizes `min_k Re(a_k w) − c_k` over `‖w‖ ≤ r` via its dual
/// `min_{λ ∈ Δ} r ‖Σ λ_k a_kᴴ‖ − Σ λ_k c_k`, solved by projected gradient
/// with backtracking. Returns the primal point `r·d/‖d‖`, `d = Σ λ_k a_kᴴ`.
fn maxmin_affine_on_ball(a: &[Vec<Complex64>], c: &[f64], r: f64) -> Option<Vec<Complex64>> {
    let k = a.len();
    let n = a[0].len();
    let combine = |lam: &[f64]| {
        let mut d = vec![Complex64::new(0.0, 0.0); n];
        for (ak, l) in a.iter().zip(lam) {
            for (di, ai) in d.iter_mut().zip(ak) {
                *di += ai.conj() * l;
            }
        }
        d
    };
    let dual = |lam: &[f64]| r * norm(&combine(lam)) - lam.iter().zip(c).map(|(l, ci)| l * ci).sum::<f64>();
    let mut lam = vec![1.0 / k as f64; k];
    let mut value = dual(&lam);
    let mut step = 1.0;
    for _ in 0..2000 {
        let d = combine(&lam);
        let dn = norm(&d);
        if dn == 0.0 {
            break;
        }
        // ∂/∂λ_k of r‖d‖ is r Re(a_k d)/‖d‖ since d = Σ λ a_kᴴ
        let grad: Vec<f64> = a.iter().zip(c).map(|(ak, ci)| r * dot(ak, &d).re / dn - ci).collect();
        let mut moved = false;
        for _ in 0..60 {
            let trial = project_simplex(&lam.iter().zip(&grad).map(|(l, g)| l - step * g).collect::<Vec<_>>());
            let tv = dual(&trial);
            if tv < value {
                let shift: f64 = trial.iter().zip(&lam).map(|(x, y)| (x - y).abs()).sum();
                lam = trial;
                value = tv;
                moved = shift > 1e-15;
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    normalized(&combine(&lam)).map(|u| scale_vec(&u, r))
}

/// Successive convex approximation of `max_w min_k |h_k w|²` within the
/// null space at full power. Each round linearizes the gains at the current
/// point, `|h w|² ≥ 2 Re(conj(h w₀) h w) − |h w₀|²`, and solves the
/// resulting max-min over the ball exactly up to the dual solver's
/// accuracy; a round is kept only if the true worst gain improves.
fn sca(ctx: &Ctx<'_>, start: Vec<Complex64>, opts: &Hyperparams) -> (Vec<Complex64>, f64, Vec<f64>, bool) {
    let r = ctx.power.sqrt();
    let projected_rows: Vec<Vec<Complex64>> = ctx
        .rows
        .iter()
        .map(|row| {
            // h P restricted to the null space: (P hᴴ)ᴴ
            let hc: Vec<Complex64> = row.iter().map(|z| z.conj()).collect();
            project_out(&hc, ctx.eve_dir.as_deref())
                .iter()
                .map(|z| z.conj())
                .collect()
        })
        .collect();
    let mut w = start;
    let mut gain = ctx.worst_gain(&w);
    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let y: Vec<Complex64> = projected_rows.iter().map(|row| dot(row, &w)).collect();
        let a: Vec<Vec<Complex64>> = projected_rows
            .iter()
            .zip(&y)
            .map(|(row, yk)| row.iter().map(|h| yk.conj() * h * 2.0).collect())
            .collect();
        let c: Vec<f64> = y.iter().map(|v| v.norm_sqr()).collect();
        let before = ctx.worst_rate(&w);
        if let Some(cand) = maxmin_affine_on_ball(&a, &c, r).and_then(|v| ctx.feasible(&v)) {
            let g = ctx.worst_gain(&cand);
            if g > gain {
                w = cand;
                gain = g;
            }
        }
        let after = ctx.worst_rate(&w);
        trace.push(after);
        if after - before <= opts.tol {
            converged = true;
            break;
        }
    }
    let value = ctx.worst_rate(&w);
    (w, value, trace, converged)
}

/// Best common-rate multicast beamformer subject to zero leakage towards
/// the eavesdropper.
///
/// Runs successive convex approximation from several starts
/// (normalized-sum MRT, each user's projected channel, random combinations
/// of the projected channels) and keeps the best. The trace is the
/// worst-user rate after each round; the reported objective is the secrecy
/// rate, which coincides with it up to the residual leakage.
pub fn secrecy_nullspace_maxmin(
    problem: &SecrecyProblem<'_>,
    opts: &Hyperparams,
) -> Result<SolverOutcome, SolverError> {
    let (k_users, n) = problem.h.shape();
    if n < 2 {
        return Err(SolverError::InvalidInput(
            "null-space beamforming needs N_t >= 2".into(),
        ));
    }
    let eve_row = problem.h_eve.map(|e| e.row(0).to_vec());
    let eve_dir = match &eve_row {
        Some(e) => {
            if e.len() != n {
                return Err(SolverError::InvalidInput("h_eve length differs from N_t".into()));
            }
            normalized(&e.iter().map(|z| z.conj()).collect::<Vec<_>>())
        }
        None => None,
    };
    let ctx = Ctx {
        rows: (0..k_users).map(|k| problem.h.row(k)).collect(),
        sigma2: problem.sigma2,
        power: problem.budget.p_max(),
        eve_dir,
    };
    let projected: Vec<Vec<Complex64>> = (0..k_users)
        .map(|k| {
            let hk: Vec<Complex64> = problem.h.row(k).iter().map(|z| z.conj()).collect();
            project_out(&hk, ctx.eve_dir.as_deref())
        })
        .collect();
    if projected
        .iter()
        .zip(&ctx.rows)
        .all(|(p, r)| norm(p) <= 1e-12 * norm(r).max(f64::MIN_POSITIVE))
    {
        return Err(SolverError::DegenerateNullspace);
    }

    let mut starts = Vec::new();
    let mut sum = vec![Complex64::new(0.0, 0.0); n];
    for p in &projected {
        if let Some(u) = normalized(p) {
            for (s, v) in sum.iter_mut().zip(&u) {
                *s += v;
            }
            starts.push(u);
        }
    }
    starts.insert(0, sum);
    let mut rng = seeded(mix_seed(problem.seed, 0x5ec));
    for _ in 0..RANDOM_STARTS {
        let mut v = vec![Complex64::new(0.0, 0.0); n];
        for p in &projected {
            let c = complex_gaussian(&mut rng);
            for (vi, pi) in v.iter_mut().zip(p) {
                *vi += pi * c;
            }
        }
        starts.push(v);
    }

    let mut best: Option<(Vec<Complex64>, f64, Vec<f64>, bool)> = None;
    for s in starts {
        let Some(w0) = ctx.feasible(&s) else { continue };
        let run = sca(&ctx, w0, opts);
        if best.as_ref().is_none_or(|b| run.1 > b.1) {
            best = Some(run);
        }
    }
    let (w, _, trace, converged) = best.ok_or(SolverError::DegenerateNullspace)?;
    let snr: Vec<f64> = ctx.rows.iter().map(|r| dot(r, &w).norm_sqr() / ctx.sigma2).collect();
    let eve_snr = eve_row.as_ref().map_or(0.0, |e| dot(e, &w).norm_sqr() / ctx.sigma2);
    let objective = secrecy_rate(&snr, eve_snr);
    SolverOutcome::new(
        Solution::BeamformerMatrix(ComplexMatrix::column_vector(&w)),
        objective,
        trace,
        converged,
    )
    .finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::norm_sqr;
    use crate::rng::complex_gaussian_matrix;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn budget() -> PowerBudget {
        PowerBudget::new(1.0).unwrap()
    }

    fn column(s: &Solution) -> Vec<Complex64> {
        match s {
            Solution::BeamformerMatrix(w) => w.column(0),
            _ => unreachable!(),
        }
    }

    #[test]
    fn no_leakage_and_full_power() {
        let mut rng = seeded(4);
        let h = complex_gaussian_matrix(4, 8, &mut rng);
        let e = complex_gaussian_matrix(1, 8, &mut rng);
        let p = SecrecyProblem {
            h: &h,
            h_eve: Some(&e),
            sigma2: 0.1,
            budget: budget(),
            seed: 1,
        };
        let out = secrecy_nullspace_maxmin(&p, &Hyperparams::default()).unwrap();
        let w = column(&out.solution);
        assert!(dot(e.row(0), &w).norm_sqr() < 1e-20);
        assert!((norm_sqr(&w) - 1.0).abs() < 1e-12);
        assert!(out.trace.windows(2).all(|x| x[1] >= x[0]));
        assert!(out.converged);
    }

    #[test]
    fn single_user_matches_projected_mrt() {
        let mut rng = seeded(6);
        let h = complex_gaussian_matrix(1, 4, &mut rng);
        let e = complex_gaussian_matrix(1, 4, &mut rng);
        let p = SecrecyProblem {
            h: &h,
            h_eve: Some(&e),
            sigma2: 0.5,
            budget: budget(),
            seed: 1,
        };
        let out = secrecy_nullspace_maxmin(&p, &Hyperparams::default()).unwrap();
        let eh = normalized(&e.row(0).iter().map(|z| z.conj()).collect::<Vec<_>>()).unwrap();
        let ph = project_out(&h.row(0).iter().map(|z| z.conj()).collect::<Vec<_>>(), Some(&eh));
        let expected = (1.0 + norm_sqr(&ph) / 0.5).log2();
        assert!(
            (out.objective - expected).abs() < 1e-9,
            "{} vs {expected}",
            out.objective
        );
    }

    #[test]
    fn degenerate_when_users_align_with_eve() {
        let h = ComplexMatrix::from_rows(&[vec![c(1.0, 0.0), c(1.0, 0.0)], vec![c(2.0, 0.0), c(2.0, 0.0)]]).unwrap();
        let e = ComplexMatrix::row_vector(&[c(1.0, 0.0), c(1.0, 0.0)]);
        let p = SecrecyProblem {
            h: &h,
            h_eve: Some(&e),
            sigma2: 0.1,
            budget: budget(),
            seed: 0,
        };
        assert_eq!(
            secrecy_nullspace_maxmin(&p, &Hyperparams::default()),
            Err(SolverError::DegenerateNullspace)
        );
    }

    #[test]
    fn orthogonal_eve_changes_nothing() {
        let h = ComplexMatrix::from_rows(&[
            vec![c(1.0, 0.0), c(0.5, -0.2), c(0.0, 0.0)],
            vec![c(-0.3, 0.4), c(1.0, 1.0), c(0.0, 0.0)],
        ])
        .unwrap();
        let e = ComplexMatrix::row_vector(&[c(0.0, 0.0), c(0.0, 0.0), c(0.7, 0.1)]);
        let run = |eve: Option<&ComplexMatrix>| {
            let p = SecrecyProblem {
                h: &h,
                h_eve: eve,
                sigma2: 0.2,
                budget: budget(),
                seed: 3,
            };
            secrecy_nullspace_maxmin(&p, &Hyperparams::default()).unwrap().objective
        };
        assert!((run(Some(&e)) - run(None)).abs() < 1e-9);
    }
}
