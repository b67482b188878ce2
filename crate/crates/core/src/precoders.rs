//! Closed-form baseline precoders and hardware projections.
//!
//! Linear precoders spend the full budget. Symbol-level helpers build the
//! composite transmit signal `x = F s` from a linear precoder and the symbol
//! vector, which the constant-envelope and 1-bit projections then map onto
//! their hardware alphabets.

use num_complex::Complex64;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    hermitian_solve, norm, normalized, pseudo_inverse, real_solve, scale_vec, Architecture, ComplexMatrix, ModelError,
    Solution, DEFAULT_RANK_TOL,
};
use crate::rng::{complex_gaussian, complex_gaussian_matrix, seeded, uniform_phase};
use crate::scenarios::ScenarioDescriptor;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PrecoderError {
    #[error("user {0} has an all-zero channel")]
    ZeroChannel(usize),
    #[error("channel matrix is rank deficient")]
    RankDeficient,
    #[error("power budget must be positive and finite")]
    InvalidBudget,
    #[error(transparent)]
    Model(ModelError),
}

impl From<ModelError> for PrecoderError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::RankDeficient => PrecoderError::RankDeficient,
            other => PrecoderError::Model(other),
        }
    }
}

/// Total transmit power budget in W.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBudget {
    p_max: f64,
}

impl PowerBudget {
    pub fn new(p_max: f64) -> Result<Self, PrecoderError> {
        if p_max > 0.0 && p_max.is_finite() {
            Ok(Self { p_max })
        } else {
            Err(PrecoderError::InvalidBudget)
        }
    }

    pub fn p_max(self) -> f64 {
        self.p_max
    }
}

fn conj_row(h: &ComplexMatrix, k: usize) -> Vec<Complex64> {
    h.row(k).iter().map(|z| z.conj()).collect()
}

/// Columns rescaled to unit norm, then to `p_max / K` each.
fn equal_split(columns: Vec<Vec<Complex64>>, budget: PowerBudget) -> Result<ComplexMatrix, PrecoderError> {
    let per_user = (budget.p_max / columns.len() as f64).sqrt();
    let mut out = Vec::with_capacity(columns.len());
    for (k, c) in columns.into_iter().enumerate() {
        let unit = normalized(&c).ok_or(PrecoderError::ZeroChannel(k))?;
        out.push(scale_vec(&unit, per_user));
    }
    Ok(ComplexMatrix::from_columns(&out))
}

/// Whole matrix scaled to Frobenius power `p_max`.
fn common_scale(w: ComplexMatrix, budget: PowerBudget) -> ComplexMatrix {
    let p = w.frobenius_norm_sqr();
    w.scale((budget.p_max / p).sqrt())
}

/// Maximum-ratio transmission: `w_k ∝ h_kᴴ`, equal power per user.
pub fn mrt(h: &ComplexMatrix, budget: PowerBudget) -> Result<Solution, PrecoderError> {
    let cols = (0..h.rows()).map(|k| conj_row(h, k)).collect();
    Ok(Solution::BeamformerMatrix(equal_split(cols, budget)?))
}

/// Zero-forcing: `W ∝ H⁺` under a common scaling.
pub fn zf(h: &ComplexMatrix, budget: PowerBudget) -> Result<Solution, PrecoderError> {
    let w = pseudo_inverse(h, DEFAULT_RANK_TOL)?;
    Ok(Solution::BeamformerMatrix(common_scale(w, budget)))
}

/// Regularized zero-forcing `W ∝ Hᴴ (H Hᴴ + (K σ² / P) I)⁻¹`.
pub fn rzf(h: &ComplexMatrix, budget: PowerBudget, sigma2: f64) -> Result<Solution, PrecoderError> {
    let k = h.rows();
    let reg = k as f64 * sigma2 / budget.p_max;
    let gram = &h.matmul(&h.adjoint()) + &ComplexMatrix::identity(k).scale(reg);
    // (G⁻¹ H)ᴴ = Hᴴ G⁻¹ since G is Hermitian
    let w = hermitian_solve(&gram, h)?.adjoint();
    if w.frobenius_norm_sqr() == 0.0 {
        return Err(PrecoderError::ZeroChannel(0));
    }
    Ok(Solution::BeamformerMatrix(common_scale(w, budget)))
}

/// Signal-to-leakage-plus-noise beamforming, equal power per user.
///
/// For a rank-one signal term the dominant generalized eigenvector is
/// `(Σ_{j≠k} h_jᴴ h_j + (K σ² / P) I)⁻¹ h_kᴴ`.
pub fn slnr(h: &ComplexMatrix, budget: PowerBudget, sigma2: f64) -> Result<Solution, PrecoderError> {
    Ok(Solution::BeamformerMatrix(equal_split(
        slnr_directions(h, budget, sigma2)?,
        budget,
    )?))
}

pub(crate) fn slnr_directions(
    h: &ComplexMatrix,
    budget: PowerBudget,
    sigma2: f64,
) -> Result<Vec<Vec<Complex64>>, PrecoderError> {
    let (k_users, n) = h.shape();
    let reg = k_users as f64 * sigma2 / budget.p_max;
    let full = h.adjoint().matmul(h);
    let mut dirs = Vec::with_capacity(k_users);
    for k in 0..k_users {
        let hk = conj_row(h, k);
        if norm(&hk) == 0.0 {
            return Err(PrecoderError::ZeroChannel(k));
        }
        let own = ComplexMatrix::column_vector(&hk).matmul(&ComplexMatrix::row_vector(h.row(k)));
        let leak = &(&full - &own) + &ComplexMatrix::identity(n).scale(reg);
        let d = hermitian_solve(&leak, &ComplexMatrix::column_vector(&hk))?;
        dirs.push(d.column(0));
    }
    Ok(dirs)
}

/// Unit-norm MRT directions `h_kᴴ / ‖h_k‖`.
pub fn mrt_directions(h: &ComplexMatrix) -> Result<Vec<Vec<Complex64>>, PrecoderError> {
    (0..h.rows())
        .map(|k| normalized(&conj_row(h, k)).ok_or(PrecoderError::ZeroChannel(k)))
        .collect()
}

/// Unit-norm ZF directions (normalized columns of `H⁺`).
pub fn zf_directions(h: &ComplexMatrix) -> Result<Vec<Vec<Complex64>>, PrecoderError> {
    let p = pseudo_inverse(h, DEFAULT_RANK_TOL)?;
    p.columns()
        .into_iter()
        .enumerate()
        .map(|(k, c)| normalized(&c).ok_or(PrecoderError::ZeroChannel(k)))
        .collect()
}

/// Unit-norm RZF directions.
pub fn rzf_directions(
    h: &ComplexMatrix,
    budget: PowerBudget,
    sigma2: f64,
) -> Result<Vec<Vec<Complex64>>, PrecoderError> {
    match rzf(h, budget, sigma2)? {
        Solution::BeamformerMatrix(w) => w
            .columns()
            .into_iter()
            .enumerate()
            .map(|(k, c)| normalized(&c).ok_or(PrecoderError::ZeroChannel(k)))
            .collect(),
        _ => unreachable!(),
    }
}

/// Downlink powers meeting every SINR target with equality for fixed unit
/// directions: solves `p_k |h_k u_k|² / γ_k − Σ_{j≠k} p_j |h_k u_j|² = σ²`.
/// `None` when the system is singular or any power is nonpositive.
pub fn downlink_powers(h: &ComplexMatrix, dirs: &[Vec<Complex64>], gammas: &[f64], sigma2: f64) -> Option<Vec<f64>> {
    let k_users = dirs.len();
    let gains: Vec<Vec<f64>> = (0..k_users)
        .map(|k| dirs.iter().map(|u| crate::model::dot(h.row(k), u).norm_sqr()).collect())
        .collect();
    let a: Vec<Vec<f64>> = (0..k_users)
        .map(|k| {
            (0..k_users)
                .map(|j| if j == k { gains[k][k] / gammas[k] } else { -gains[k][j] })
                .collect()
        })
        .collect();
    let p = real_solve(&a, &vec![sigma2; k_users])?;
    if p.iter().all(|v| *v > 0.0 && v.is_finite()) {
        Some(p)
    } else {
        None
    }
}

/// Beamformers `w_k = √p_k u_k`.
pub fn assemble(dirs: &[Vec<Complex64>], powers: &[f64]) -> ComplexMatrix {
    let cols: Vec<Vec<Complex64>> = dirs.iter().zip(powers).map(|(u, p)| scale_vec(u, p.sqrt())).collect();
    ComplexMatrix::from_columns(&cols)
}

/// Minimum-power scaling of fixed directions to meet SINR targets; when no
/// positive solution exists the directions are spread over `cap` W instead
/// (the result then violates the targets and is reported infeasible).
pub fn power_min_scaling(
    h: &ComplexMatrix,
    dirs: &[Vec<Complex64>],
    gammas: &[f64],
    sigma2: f64,
    cap: f64,
) -> (ComplexMatrix, bool) {
    match downlink_powers(h, dirs, gammas, sigma2) {
        Some(p) if p.iter().sum::<f64>() <= cap => (assemble(dirs, &p), true),
        _ => {
            let each = vec![cap / dirs.len() as f64; dirs.len()];
            (assemble(dirs, &each), false)
        }
    }
}

/// Symbol-level composite `x = Hᴴ s`.
pub fn mrt_composite(h: &ComplexMatrix, symbols: &[Complex64]) -> Vec<Complex64> {
    h.adjoint().mul_vec(symbols)
}

/// Symbol-level composite `x = H⁺ s`.
pub fn zf_composite(h: &ComplexMatrix, symbols: &[Complex64]) -> Result<Vec<Complex64>, PrecoderError> {
    Ok(pseudo_inverse(h, DEFAULT_RANK_TOL)?.mul_vec(symbols))
}

/// Constant-envelope projection: keep only the phase of each entry.
pub fn ce_project(x: &[Complex64], _budget: PowerBudget) -> Solution {
    let theta = x
        .iter()
        .map(|z| if z.norm_sqr() == 0.0 { 0.0 } else { z.arg() })
        .collect();
    Solution::PhaseVector(theta)
}

/// Per-component amplitude of the 1-bit alphabet at budget `p_max`.
pub fn one_bit_amplitude(n_t: usize, budget: PowerBudget) -> f64 {
    (budget.p_max / (2.0 * n_t as f64)).sqrt()
}

/// 1-bit quantization with `sign(0) = +1`.
pub fn one_bit_quantize(x: &[Complex64], budget: PowerBudget) -> Solution {
    let a = one_bit_amplitude(x.len(), budget);
    let sgn = |v: f64| if v >= 0.0 { a } else { -a };
    let q: Vec<Complex64> = x.iter().map(|z| Complex64::new(sgn(z.re), sgn(z.im))).collect();
    Solution::QuantizedVector(ComplexMatrix::column_vector(&q))
}

/// Dimensions a random precoder must respect.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrecoderDims {
    pub n_t: usize,
    pub k: usize,
    pub streams: usize,
    pub n_rf: usize,
    pub architecture: Architecture,
}

impl PrecoderDims {
    pub fn of(theta: &ScenarioDescriptor) -> Self {
        Self {
            n_t: theta.n_t(),
            k: theta.k(),
            streams: theta.stream_count(),
            n_rf: theta.sys.n_rf.unwrap_or(theta.n_t()),
            architecture: theta.sys.architecture,
        }
    }
}

/// Random architecture-respecting solution at full budget.
pub fn random_precoder(dims: PrecoderDims, budget: PowerBudget, seed: u64) -> Solution {
    let mut rng = seeded(seed);
    match dims.architecture {
        Architecture::FullyDigital => {
            let w = complex_gaussian_matrix(dims.n_t, dims.streams, &mut rng);
            Solution::BeamformerMatrix(common_scale(w, budget))
        }
        Architecture::ConstantEnvelope => {
            Solution::PhaseVector((0..dims.n_t).map(|_| uniform_phase(&mut rng)).collect())
        }
        Architecture::OneBit => {
            let x: Vec<Complex64> = (0..dims.n_t)
                .map(|_| {
                    let re = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                    let im = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                    Complex64::new(re, im)
                })
                .collect();
            one_bit_quantize(&x, budget)
        }
        Architecture::Hybrid => {
            let f_rf = ComplexMatrix::from_fn(dims.n_t, dims.n_rf, |_, _| {
                Complex64::from_polar(1.0, uniform_phase(&mut rng))
            });
            let v: Vec<Complex64> = (0..dims.n_rf).map(|_| complex_gaussian(&mut rng)).collect();
            let f_bb = rank_one_baseband(&v, dims.k);
            let p = f_rf.matmul(&f_bb).frobenius_norm_sqr();
            Solution::HybridPair {
                f_rf,
                f_bb: f_bb.scale((budget.p_max / p).sqrt()),
            }
        }
    }
}

/// Rank-one baseband precoder `v ŝᴴ` with `ŝ` the uniform unit vector.
/// Since `‖ŝ‖ = 1`, `‖F_RF F_BB‖_F = ‖F_RF v‖`. Callers that know the symbol
/// vector should use [`align_baseband`] with its unit composite instead.
fn rank_one_baseband(v: &[Complex64], k: usize) -> ComplexMatrix {
    let s_hat = vec![Complex64::new(1.0 / (k as f64).sqrt(), 0.0); k];
    align_baseband(v, &s_hat)
}

/// `F_BB = v ŝᴴ` for unit-norm `ŝ`.
pub fn align_baseband(v: &[Complex64], s_hat: &[Complex64]) -> ComplexMatrix {
    ComplexMatrix::from_fn(v.len(), s_hat.len(), |r, c| v[r] * s_hat[c].conj())
}
