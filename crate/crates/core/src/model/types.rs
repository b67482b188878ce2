use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::matrix::ComplexMatrix;
use super::ModelError;

/// Optimization objective of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObjectiveKind {
    PowerMin,
    CiMarginMax,
    SecrecyMaxMin,
    SumRateMax,
}

impl ObjectiveKind {
    pub fn is_minimization(self) -> bool {
        matches!(self, ObjectiveKind::PowerMin)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConstraintKind {
    TotalPower,
    PerUserSinr,
    PerUserRate,
    InterferenceTemperature,
    RobustInterferenceTemperature,
    SelfInterference,
    UnitModulus,
    OneBit,
    CiMargin,
    RobustCiMargin,
    EavesdropperRate,
}

impl ConstraintKind {
    /// Parameter names that must be present for this kind.
    pub fn required_params(self) -> &'static [&'static str] {
        use ConstraintKind::*;
        match self {
            TotalPower => &["p_max"],
            PerUserSinr => &["user", "gamma"],
            PerUserRate => &["user", "rate"],
            InterferenceTemperature => &["i_th"],
            RobustInterferenceTemperature => &["i_th", "epsilon"],
            SelfInterference => &["eta"],
            UnitModulus => &["amplitude"],
            OneBit => &["amplitude"],
            CiMargin => &["m"],
            RobustCiMargin => &["m", "epsilon", "delta"],
            EavesdropperRate => &["rate"],
        }
    }
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// One constraint `c_ℓ(x) ≤ 0` with its named scalar parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constraint {
    pub kind: ConstraintKind,
    pub parameters: BTreeMap<String, f64>,
}

impl Constraint {
    pub fn new(kind: ConstraintKind, params: &[(&str, f64)]) -> Result<Self, ModelError> {
        let c = Self {
            kind,
            parameters: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for name in self.kind.required_params() {
            match self.parameters.get(*name) {
                None => {
                    return Err(ModelError::MissingParameter {
                        kind: self.kind,
                        name: name.to_string(),
                    })
                }
                Some(v) if !v.is_finite() => {
                    return Err(ModelError::InvalidParameter {
                        kind: self.kind,
                        name: name.to_string(),
                    })
                }
                Some(v) if *v < 0.0 => {
                    return Err(ModelError::InvalidParameter {
                        kind: self.kind,
                        name: name.to_string(),
                    })
                }
                _ => {}
            }
        }
        if self.parameters.values().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite);
        }
        Ok(())
    }

    /// Parameter value; panics if absent (callers validate first).
    pub fn param(&self, name: &str) -> f64 {
        self.parameters[name]
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.parameters.get(name).copied()
    }

    /// User index for per-user constraints.
    pub fn user(&self) -> Option<usize> {
        self.get("user").map(|u| u as usize)
    }

    /// SINR target implied by a rate or SINR constraint.
    pub fn sinr_target(&self) -> Option<f64> {
        match self.kind {
            ConstraintKind::PerUserSinr => self.get("gamma"),
            ConstraintKind::PerUserRate => self.get("rate").map(|r| 2f64.powf(r) - 1.0),
            _ => None,
        }
    }
}

/// A candidate design variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Solution {
    /// Linear beamformers, one column per user.
    BeamformerMatrix(ComplexMatrix),
    /// Constant-envelope transmit phases in radians.
    PhaseVector(Vec<f64>),
    /// 1-bit transmit vector with entries in `a·{±1 ± j}`.
    QuantizedVector(ComplexMatrix),
    HybridPair {
        f_rf: ComplexMatrix,
        f_bb: ComplexMatrix,
    },
}

/// Architecture tag of a solution or system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Architecture {
    FullyDigital,
    ConstantEnvelope,
    OneBit,
    Hybrid,
}

impl Solution {
    pub fn beamformers(w: ComplexMatrix, n_t: usize, k: usize) -> Result<Self, ModelError> {
        expect_shape(&w, (n_t, k))?;
        finite(&w)?;
        Ok(Solution::BeamformerMatrix(w))
    }

    pub fn phases(theta: Vec<f64>, n_t: usize) -> Result<Self, ModelError> {
        if theta.len() != n_t {
            return Err(ModelError::ShapeMismatch {
                expected: (n_t, 1),
                found: (theta.len(), 1),
            });
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(ModelError::NonFinite);
        }
        Ok(Solution::PhaseVector(theta))
    }

    /// Validates that every entry is exactly `amplitude·(±1 ± j)`.
    pub fn quantized(x: ComplexMatrix, n_t: usize, amplitude: f64) -> Result<Self, ModelError> {
        expect_shape(&x, (n_t, 1))?;
        for z in x.as_slice() {
            if z.re.abs() != amplitude || z.im.abs() != amplitude {
                return Err(ModelError::OffAlphabet);
            }
        }
        Ok(Solution::QuantizedVector(x))
    }

    pub fn hybrid(
        f_rf: ComplexMatrix,
        f_bb: ComplexMatrix,
        n_t: usize,
        n_rf: usize,
        k: usize,
    ) -> Result<Self, ModelError> {
        expect_shape(&f_rf, (n_t, n_rf))?;
        expect_shape(&f_bb, (n_rf, k))?;
        finite(&f_rf)?;
        finite(&f_bb)?;
        if f_rf.as_slice().iter().any(|z| (z.norm() - 1.0).abs() > 1e-12) {
            return Err(ModelError::NotUnitModulus);
        }
        Ok(Solution::HybridPair { f_rf, f_bb })
    }

    pub fn architecture(&self) -> Architecture {
        match self {
            Solution::BeamformerMatrix(_) => Architecture::FullyDigital,
            Solution::PhaseVector(_) => Architecture::ConstantEnvelope,
            Solution::QuantizedVector(_) => Architecture::OneBit,
            Solution::HybridPair { .. } => Architecture::Hybrid,
        }
    }

    /// Transmit signal for symbol-level solutions: constant-envelope phases
    /// are rendered at per-antenna amplitude `sqrt(p_max / N_t)`.
    pub fn ce_signal(theta: &[f64], p_max: f64) -> Vec<Complex64> {
        let a = (p_max / theta.len() as f64).sqrt();
        theta.iter().map(|t| Complex64::from_polar(a, *t)).collect()
    }
}

fn expect_shape(m: &ComplexMatrix, shape: (usize, usize)) -> Result<(), ModelError> {
    if m.shape() != shape {
        Err(ModelError::ShapeMismatch {
            expected: shape,
            found: m.shape(),
        })
    } else {
        Ok(())
    }
}

fn finite(m: &ComplexMatrix) -> Result<(), ModelError> {
    if m.is_finite() {
        Ok(())
    } else {
        Err(ModelError::NonFinite)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constraint_requires_parameters() {
        assert!(Constraint::new(ConstraintKind::TotalPower, &[("p_max", 1.0)]).is_ok());
        assert!(matches!(
            Constraint::new(ConstraintKind::TotalPower, &[]),
            Err(ModelError::MissingParameter { .. })
        ));
        assert!(matches!(
            Constraint::new(ConstraintKind::PerUserSinr, &[("user", 0.0), ("gamma", -1.0)]),
            Err(ModelError::InvalidParameter { .. })
        ));
        assert!(matches!(
            Constraint::new(ConstraintKind::SelfInterference, &[("eta", f64::NAN)]),
            Err(ModelError::InvalidParameter { .. })
        ));
    }

    #[test]
    fn rate_target_converts_to_sinr() {
        let c = Constraint::new(ConstraintKind::PerUserRate, &[("user", 2.0), ("rate", 1.0)]).unwrap();
        assert_eq!(c.sinr_target(), Some(1.0));
        assert_eq!(c.user(), Some(2));
    }

    #[test]
    fn solution_constructors_reject_bad_shapes() {
        assert!(Solution::beamformers(ComplexMatrix::zeros(4, 2), 4, 3).is_err());
        assert!(Solution::phases(vec![0.0; 3], 4).is_err());
        assert!(Solution::hybrid(ComplexMatrix::zeros(4, 2), ComplexMatrix::zeros(2, 2), 4, 2, 2).is_err());
        let ones = ComplexMatrix::from_fn(4, 2, |_, _| Complex64::new(1.0, 0.0));
        assert!(Solution::hybrid(ones.clone(), ComplexMatrix::zeros(2, 3), 4, 2, 2).is_err());
        assert!(Solution::hybrid(ones, ComplexMatrix::zeros(2, 2), 4, 2, 2).is_ok());
    }

    #[test]
    fn quantized_checks_alphabet() {
        let a = 0.5;
        let good = ComplexMatrix::column_vector(&[Complex64::new(a, -a), Complex64::new(-a, a)]);
        assert!(Solution::quantized(good, 2, a).is_ok());
        let bad = ComplexMatrix::column_vector(&[Complex64::new(a, 0.1), Complex64::new(-a, a)]);
        assert_eq!(Solution::quantized(bad, 2, a), Err(ModelError::OffAlphabet));
    }
}
