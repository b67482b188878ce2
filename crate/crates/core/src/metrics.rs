//! Performance metrics and constraint feasibility for a solution on a
//! scenario instance.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{dot, norm, ComplexMatrix, ConstraintKind, Solution};
use crate::scenarios::ScenarioDescriptor;

/// Default relative feasibility tolerance per constraint.
pub const DEFAULT_FEASIBILITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("solution architecture or shape does not match the scenario: {0}")]
    ArchitectureMismatch(String),
}

/// The headline metric of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MetricKind {
    Power,
    NormalizedMargin,
    SecrecyRate,
    SumRate,
}

impl MetricKind {
    pub fn higher_is_better(self) -> bool {
        !matches!(self, MetricKind::Power)
    }

    pub fn label(self) -> &'static str {
        match self {
            MetricKind::Power => "power_w",
            MetricKind::NormalizedMargin => "normalized_margin",
            MetricKind::SecrecyRate => "secrecy_rate",
            MetricKind::SumRate => "sum_rate",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        [Self::Power, Self::NormalizedMargin, Self::SecrecyRate, Self::SumRate]
            .into_iter()
            .find(|m| m.label() == label)
    }

    pub fn value(self, metrics: &MetricSet) -> Option<f64> {
        match self {
            MetricKind::Power => metrics.total_power,
            MetricKind::NormalizedMargin => metrics.normalized_margin,
            MetricKind::SecrecyRate => metrics.secrecy_rate,
            MetricKind::SumRate => metrics.sum_rate,
        }
    }

    /// True when `a` is strictly better than `b`.
    pub fn better(self, a: f64, b: f64) -> bool {
        if self.higher_is_better() {
            a > b
        } else {
            a < b
        }
    }
}

/// Metrics defined for the scenario; the rest stay `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub total_power: Option<f64>,
    pub per_user_sinr: Option<Vec<f64>>,
    pub sum_rate: Option<f64>,
    pub normalized_margin: Option<f64>,
    pub secrecy_rate: Option<f64>,
}

/// One constraint exceeding its tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint_index: usize,
    pub kind: ConstraintKind,
    /// `max(0, lhs − rhs)` in the constraint's native units.
    pub magnitude: f64,
}

/// Normalized-free CI margin of one user: distance of the rotated received
/// sample `ŷ` from the M-PSK decision boundaries.
pub fn ci_margin_of(y_rot: Complex64, m: u32) -> f64 {
    let phi = PI / f64::from(m);
    y_rot.re * phi.sin() - y_rot.im.abs() * phi.cos()
}

/// Per-user CI margins (not normalized) of transmit vector `x`.
pub fn ci_margins(h: &ComplexMatrix, symbols: &[Complex64], x: &[Complex64], m: u32) -> Vec<f64> {
    symbols
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let y = dot(h.row(k), x);
            ci_margin_of(y * Complex64::from_polar(1.0, -s.arg()), m)
        })
        .collect()
}

/// Worst-case margin loss per unit transmit norm under a CSI error of norm
/// `epsilon`.
pub fn robust_margin_penalty(epsilon: f64, m: u32) -> f64 {
    let phi = PI / f64::from(m);
    epsilon * (phi.sin() + phi.cos())
}

/// `SINR_k = |h_k w_k|² / (Σ_{j≠k} |h_k w_j|² + σ²)`.
pub fn sinr(h: &ComplexMatrix, w: &ComplexMatrix, sigma2: f64) -> Vec<f64> {
    let k_users = h.rows();
    (0..k_users)
        .map(|k| {
            let hk = h.row(k);
            let mut signal = 0.0;
            let mut interference = 0.0;
            for j in 0..w.cols() {
                let g = dot(hk, &w.column(j)).norm_sqr();
                if j == k {
                    signal = g;
                } else {
                    interference += g;
                }
            }
            signal / (interference + sigma2)
        })
        .collect()
}

/// Multicast SNR of a single shared beamformer.
pub fn multicast_snr(h: &ComplexMatrix, w: &[Complex64], sigma2: f64) -> Vec<f64> {
    (0..h.rows()).map(|k| dot(h.row(k), w).norm_sqr() / sigma2).collect()
}

pub fn sum_rate_of(sinrs: &[f64]) -> f64 {
    sinrs.iter().map(|s| (1.0 + s).log2()).sum()
}

/// Unit-norm composite of the intended symbols, `s / ‖s‖`.
pub fn symbol_composite(symbols: &[Complex64]) -> Vec<Complex64> {
    let n = norm(symbols);
    symbols.iter().map(|z| z / n).collect()
}

/// Transmit vector of a symbol-level solution.
pub fn transmit_vector(solution: &Solution, theta: &ScenarioDescriptor) -> Option<Vec<Complex64>> {
    match solution {
        Solution::PhaseVector(t) => Some(Solution::ce_signal(t, theta.p_max())),
        Solution::QuantizedVector(x) => Some(x.column(0)),
        Solution::HybridPair { f_rf, f_bb } => {
            let s = symbol_composite(theta.ch.symbols.as_deref()?);
            Some(f_rf.mul_vec(&f_bb.mul_vec(&s)))
        }
        Solution::BeamformerMatrix(_) => None,
    }
}

fn check_shape(solution: &Solution, theta: &ScenarioDescriptor) -> Result<(), MetricsError> {
    let mismatch = |m: String| Err(MetricsError::ArchitectureMismatch(m));
    if solution.architecture() != theta.sys.architecture {
        return mismatch(format!(
            "{:?} solution for {:?} system",
            solution.architecture(),
            theta.sys.architecture
        ));
    }
    let n_t = theta.n_t();
    match solution {
        Solution::BeamformerMatrix(w) if w.shape() != (n_t, theta.stream_count()) => {
            mismatch(format!("beamformer shape {:?}", w.shape()))
        }
        Solution::PhaseVector(t) if t.len() != n_t => mismatch(format!("{} phases", t.len())),
        Solution::QuantizedVector(x) if x.shape() != (n_t, 1) => mismatch(format!("quantized shape {:?}", x.shape())),
        Solution::HybridPair { f_rf, f_bb } => {
            let n_rf = theta.sys.n_rf.unwrap_or(0);
            if f_rf.shape() != (n_t, n_rf) || f_bb.shape() != (n_rf, theta.k()) {
                mismatch(format!("hybrid shapes {:?} {:?}", f_rf.shape(), f_bb.shape()))
            } else {
                Ok(())
            }
        }
        _ => Ok(()),
    }?;
    if theta.sys.architecture != crate::model::Architecture::FullyDigital && theta.ch.symbols.is_none() {
        return mismatch("symbol-level solution but the scenario carries no symbols".into());
    }
    Ok(())
}

/// Total radiated power of a solution.
pub fn total_power(solution: &Solution, theta: &ScenarioDescriptor) -> f64 {
    match solution {
        Solution::BeamformerMatrix(w) => w.frobenius_norm_sqr(),
        Solution::PhaseVector(_) => theta.p_max(),
        Solution::QuantizedVector(x) => x.frobenius_norm_sqr(),
        Solution::HybridPair { f_rf, f_bb } => f_rf.matmul(f_bb).frobenius_norm_sqr(),
    }
}

pub fn compute_metrics(solution: &Solution, theta: &ScenarioDescriptor) -> Result<MetricSet, MetricsError> {
    check_shape(solution, theta)?;
    let sigma2 = theta.ch.sigma2;
    let mut out = MetricSet {
        total_power: Some(total_power(solution, theta)),
        per_user_sinr: None,
        sum_rate: None,
        normalized_margin: None,
        secrecy_rate: None,
    };
    match solution {
        Solution::BeamformerMatrix(w) => {
            if theta.stream_count() == 1 && theta.k() > 1 {
                let snr = multicast_snr(&theta.ch.h, &w.column(0), sigma2);
                if let Some(h_eve) = &theta.ch.h_eve {
                    let eve_snr = dot(h_eve.row(0), &w.column(0)).norm_sqr() / sigma2;
                    out.secrecy_rate = Some(secrecy_rate(&snr, eve_snr));
                }
                out.per_user_sinr = Some(snr);
            } else {
                let s = sinr(&theta.ch.h, w, sigma2);
                out.sum_rate = Some(sum_rate_of(&s));
                out.per_user_sinr = Some(s);
            }
        }
        _ => {
            let x = transmit_vector(solution, theta).expect("symbol-level solution");
            let symbols = theta.ch.symbols.as_deref().expect("checked");
            let margins = ci_margins(&theta.ch.h, symbols, &x, theta.symbol_order());
            let worst = margins.iter().copied().fold(f64::INFINITY, f64::min);
            out.normalized_margin = Some(worst / theta.sigma());
        }
    }
    Ok(out)
}

/// `min_k [log2(1 + SNR_k) − log2(1 + SNR_eve)]⁺`.
pub fn secrecy_rate(user_snr: &[f64], eve_snr: f64) -> f64 {
    let eve = (1.0 + eve_snr).log2();
    user_snr
        .iter()
        .map(|s| ((1.0 + s).log2() - eve).max(0.0))
        .fold(f64::INFINITY, f64::min)
}

/// Evaluates every constraint of `theta`; returns those violated beyond
/// `tol` relative to their right-hand side.
pub fn feasibility_check(
    solution: &Solution,
    theta: &ScenarioDescriptor,
    tol: f64,
) -> Result<Vec<Violation>, MetricsError> {
    check_shape(solution, theta)?;
    let sigma2 = theta.ch.sigma2;
    let power = total_power(solution, theta);
    let beam_sinr = match solution {
        Solution::BeamformerMatrix(w) if theta.stream_count() == theta.k() => Some(sinr(&theta.ch.h, w, sigma2)),
        _ => None,
    };
    let x = transmit_vector(solution, theta);
    let mut out = Vec::new();
    for (index, c) in theta.con.iter().enumerate() {
        // (lhs - rhs, scale of rhs) for a constraint of the form lhs <= rhs
        let excess: Option<(f64, f64)> = match c.kind {
            ConstraintKind::TotalPower => Some((power - c.param("p_max"), c.param("p_max"))),
            ConstraintKind::PerUserSinr | ConstraintKind::PerUserRate => {
                let user = c.user().unwrap_or(0);
                let achieved = match (&beam_sinr, solution) {
                    (Some(s), _) => s.get(user).copied(),
                    (None, Solution::BeamformerMatrix(w)) => {
                        multicast_snr(&theta.ch.h, &w.column(0), sigma2).get(user).copied()
                    }
                    _ => None,
                }
                .unwrap_or(0.0);
                if c.kind == ConstraintKind::PerUserSinr {
                    let gamma = c.param("gamma");
                    Some((gamma - achieved, gamma))
                } else {
                    let rate = c.param("rate");
                    Some((rate - (1.0 + achieved).log2(), rate))
                }
            }
            ConstraintKind::InterferenceTemperature | ConstraintKind::RobustInterferenceTemperature => {
                let g = theta.ch.g.as_ref();
                let eps = c.get("epsilon").unwrap_or(0.0);
                let i_th = c.param("i_th");
                match (g, solution) {
                    (Some(g), Solution::BeamformerMatrix(w)) => {
                        Some((interference_power(g.row(0), w, eps) - i_th, i_th))
                    }
                    _ => None,
                }
            }
            ConstraintKind::SelfInterference => {
                let eta = c.param("eta");
                match (&theta.ch.g_si, solution) {
                    (Some(g_si), Solution::BeamformerMatrix(w)) => {
                        Some((g_si.matmul(w).frobenius_norm_sqr() - eta, eta))
                    }
                    _ => None,
                }
            }
            ConstraintKind::UnitModulus => {
                let a = c.param("amplitude");
                let deviation = match solution {
                    Solution::PhaseVector(t) => {
                        let sig = Solution::ce_signal(t, theta.p_max());
                        sig.iter().map(|z| (z.norm() - a).abs()).fold(0.0, f64::max)
                    }
                    Solution::HybridPair { f_rf, .. } => {
                        f_rf.as_slice().iter().map(|z| (z.norm() - a).abs()).fold(0.0, f64::max)
                    }
                    _ => 0.0,
                };
                Some((deviation, a))
            }
            ConstraintKind::OneBit => {
                let a = c.param("amplitude");
                let deviation = match solution {
                    Solution::QuantizedVector(q) => q
                        .as_slice()
                        .iter()
                        .map(|z| (z.re.abs() - a).abs().max((z.im.abs() - a).abs()))
                        .fold(0.0, f64::max),
                    _ => 0.0,
                };
                Some((deviation, a))
            }
            ConstraintKind::CiMargin => match (c.get("delta"), &x, theta.ch.symbols.as_deref()) {
                (Some(delta), Some(x), Some(s)) => {
                    let m = ci_margins(&theta.ch.h, s, x, theta.symbol_order());
                    let worst = m.into_iter().fold(f64::INFINITY, f64::min) / theta.sigma();
                    Some((delta - worst, delta))
                }
                _ => None,
            },
            ConstraintKind::RobustCiMargin => match (&x, theta.ch.symbols.as_deref()) {
                (Some(x), Some(s)) => {
                    let order = c.param("m") as u32;
                    let delta = c.param("delta");
                    let penalty = robust_margin_penalty(c.param("epsilon"), order) * norm(x);
                    let worst = ci_margins(&theta.ch.h, s, x, order)
                        .into_iter()
                        .fold(f64::INFINITY, f64::min);
                    Some((delta - (worst - penalty) / theta.sigma(), delta))
                }
                _ => None,
            },
            ConstraintKind::EavesdropperRate => match (&theta.ch.h_eve, solution) {
                (Some(h_eve), Solution::BeamformerMatrix(w)) => {
                    let leak: f64 = (0..w.cols()).map(|j| dot(h_eve.row(0), &w.column(j)).norm_sqr()).sum();
                    let cap = c.param("rate");
                    Some(((1.0 + leak / sigma2).log2() - cap, cap))
                }
                _ => None,
            },
        };
        if let Some((diff, scale)) = excess {
            let magnitude = if diff.is_nan() { f64::INFINITY } else { diff.max(0.0) };
            if magnitude > tol * scale.abs().max(f64::MIN_POSITIVE) {
                out.push(Violation {
                    constraint_index: index,
                    kind: c.kind,
                    magnitude,
                });
            }
        }
    }
    Ok(out)
}

/// `Σ_k (|g w_k| + ε‖w_k‖)²`; the nominal interference when `ε = 0`.
pub fn interference_power(g: &[Complex64], w: &ComplexMatrix, epsilon: f64) -> f64 {
    (0..w.cols())
        .map(|k| {
            let col = w.column(k);
            (dot(g, &col).norm() + epsilon * norm(&col)).powi(2)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::instantiate_scenario;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_user_sinr() {
        let (_, mut d) = instantiate_scenario(8, 0.0, 1).unwrap();
        d.sys.k = 1;
        d.sys.n_t = 2;
        d.ch.h = ComplexMatrix::row_vector(&[c(1.0, 0.0), c(0.0, 0.0)]);
        d.ch.sigma2 = 0.5;
        let p: f64 = 0.8;
        let w = ComplexMatrix::column_vector(&[c(p.sqrt(), 0.0), c(0.0, 0.0)]);
        let m = compute_metrics(&Solution::BeamformerMatrix(w), &d).unwrap();
        let s = m.per_user_sinr.unwrap()[0];
        assert!((s - p / 0.5).abs() < 1e-12);
        assert!((m.sum_rate.unwrap() - (1.0 + s).log2()).abs() < 1e-12);
    }

    #[test]
    fn margin_zero_on_qpsk_boundary() {
        let y = Complex64::from_polar(2.0, PI / 4.0);
        assert!(ci_margin_of(y, 4).abs() < 1e-15);
        assert!(ci_margin_of(c(1.0, 0.0), 4) > 0.0);
        assert!(ci_margin_of(c(-1.0, 0.0), 4) < 0.0);
    }

    #[test]
    fn normalized_margin_scales_with_sigma() {
        let (_, d) = instantiate_scenario(3, 0.0, 4).unwrap();
        let a = (d.p_max() / (2.0 * d.n_t() as f64)).sqrt();
        let x = ComplexMatrix::from_fn(d.n_t(), 1, |r, _| if r % 2 == 0 { c(a, a) } else { c(-a, a) });
        let sol = Solution::QuantizedVector(x);
        let m1 = compute_metrics(&sol, &d).unwrap().normalized_margin.unwrap();
        let mut d2 = d.clone();
        d2.ch.sigma2 = d.ch.sigma2 / 4.0;
        let m2 = compute_metrics(&sol, &d2).unwrap().normalized_margin.unwrap();
        assert_eq!(m2, 2.0 * m1);
    }

    #[test]
    fn architecture_mismatch() {
        let (_, d) = instantiate_scenario(3, 0.0, 4).unwrap();
        let sol = Solution::PhaseVector(vec![0.0; d.n_t()]);
        assert!(matches!(
            compute_metrics(&sol, &d),
            Err(MetricsError::ArchitectureMismatch(_))
        ));
        let (_, d8) = instantiate_scenario(8, 0.0, 4).unwrap();
        let wrong = Solution::BeamformerMatrix(ComplexMatrix::zeros(d8.n_t(), 2));
        assert!(feasibility_check(&wrong, &d8, 1e-6).is_err());
    }

    #[test]
    fn power_violation_magnitude() {
        let (_, d) = instantiate_scenario(8, 0.0, 4).unwrap();
        let col = |k: usize| {
            let mut v = vec![c(0.0, 0.0); d.n_t()];
            v[k] = c((1.0f64 / d.k() as f64).sqrt(), 0.0);
            v
        };
        let w = ComplexMatrix::from_columns(&(0..d.k()).map(col).collect::<Vec<_>>());
        assert!(feasibility_check(&Solution::BeamformerMatrix(w.clone()), &d, 1e-6)
            .unwrap()
            .is_empty());
        let v = feasibility_check(&Solution::BeamformerMatrix(w.scale(1.1)), &d, 1e-6).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ConstraintKind::TotalPower);
        assert!((v[0].magnitude - 0.21).abs() < 1e-12);
    }

    #[test]
    fn unit_modulus_violation_on_hybrid() {
        let (_, d) = instantiate_scenario(9, 0.0, 4).unwrap();
        let n_rf = d.sys.n_rf.unwrap();
        let mut f_rf = ComplexMatrix::from_fn(d.n_t(), n_rf, |_, _| c(1.0, 0.0));
        f_rf[(0, 0)] = c(1.01, 0.0);
        let sol = Solution::HybridPair {
            f_rf,
            f_bb: ComplexMatrix::zeros(n_rf, d.k()),
        };
        let v = feasibility_check(&sol, &d, 1e-6).unwrap();
        assert!(v
            .iter()
            .any(|v| v.kind == ConstraintKind::UnitModulus && (v.magnitude - 0.01).abs() < 1e-12));
    }

    #[test]
    fn secrecy_rate_clamps_at_zero() {
        assert_eq!(secrecy_rate(&[1.0, 3.0], 7.0), 0.0);
        assert!((secrecy_rate(&[3.0, 7.0], 1.0) - 1.0).abs() < 1e-15);
    }
}
