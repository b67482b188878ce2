//! Scenario catalog: turns a scenario id, SNR and seed into a task
//! description and a structured descriptor.
//!
//! Nine families are built in. A catalog can be extended or overridden from a
//! JSON file; each entry names the family whose structure it instantiates.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::MetricKind;
use crate::model::{Architecture, ComplexMatrix, Constraint, ConstraintKind, ModelError, ObjectiveKind};
use crate::rng::{complex_gaussian_matrix, mix_seed, seeded};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown scenario {0}")]
    UnknownScenario(u32),
    #[error("invalid descriptor: {0}")]
    InvalidDescriptor(String),
    #[error("catalog file: {0}")]
    Catalog(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Reference transmit power used to define SNR.
pub const REFERENCE_POWER: f64 = 1.0;

/// `σ² = P_ref · 10^(−snr/10)` with `P_ref = 1 W`.
pub fn noise_variance(snr_db: f64) -> f64 {
    REFERENCE_POWER * 10f64.powf(-snr_db / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelDims {
    pub rows: usize,
    pub cols: usize,
}

/// I.i.d. CN(0, 1) matrix, reproducible from `seed`.
pub fn generate_channel(dims: ChannelDims, seed: u64) -> ComplexMatrix {
    let mut rng = seeded(seed);
    complex_gaussian_matrix(dims.rows, dims.cols, &mut rng)
}

/// The nine structural families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    MuMimoPowerMin,
    ConstantEnvelopeCi,
    OneBitCi,
    SecrecyMulticast,
    FullDuplexPowerMin,
    CognitiveSumRate,
    CognitiveRobustSumRate,
    FullDuplexSumRate,
    HybridRobustCi,
}

impl Family {
    pub const ALL: [Family; 9] = [
        Family::MuMimoPowerMin,
        Family::ConstantEnvelopeCi,
        Family::OneBitCi,
        Family::SecrecyMulticast,
        Family::FullDuplexPowerMin,
        Family::CognitiveSumRate,
        Family::CognitiveRobustSumRate,
        Family::FullDuplexSumRate,
        Family::HybridRobustCi,
    ];

    pub fn objective(self) -> ObjectiveKind {
        use Family::*;
        match self {
            MuMimoPowerMin | FullDuplexPowerMin | HybridRobustCi => ObjectiveKind::PowerMin,
            ConstantEnvelopeCi | OneBitCi => ObjectiveKind::CiMarginMax,
            SecrecyMulticast => ObjectiveKind::SecrecyMaxMin,
            CognitiveSumRate | CognitiveRobustSumRate | FullDuplexSumRate => ObjectiveKind::SumRateMax,
        }
    }

    pub fn architecture(self) -> Architecture {
        match self {
            Family::ConstantEnvelopeCi => Architecture::ConstantEnvelope,
            Family::OneBitCi => Architecture::OneBit,
            Family::HybridRobustCi => Architecture::Hybrid,
            _ => Architecture::FullyDigital,
        }
    }

    pub fn metric(self) -> MetricKind {
        match self.objective() {
            ObjectiveKind::PowerMin => MetricKind::Power,
            ObjectiveKind::CiMarginMax => MetricKind::NormalizedMargin,
            ObjectiveKind::SecrecyMaxMin => MetricKind::SecrecyRate,
            ObjectiveKind::SumRateMax => MetricKind::SumRate,
        }
    }

    /// Which optional channel fields a descriptor of this family carries.
    pub fn presence(self) -> Presence {
        use Family::*;
        Presence {
            h_eve: self == SecrecyMulticast,
            g: matches!(self, CognitiveSumRate | CognitiveRobustSumRate),
            g_si: matches!(self, FullDuplexPowerMin | FullDuplexSumRate),
            epsilon: matches!(self, CognitiveRobustSumRate | HybridRobustCi),
            symbols: matches!(self, ConstantEnvelopeCi | OneBitCi | HybridRobustCi),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Presence {
    pub h_eve: bool,
    pub g: bool,
    pub g_si: bool,
    pub epsilon: bool,
    pub symbols: bool,
}

/// One catalog row: structure, labels and the numeric constants used to
/// instantiate it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogEntry {
    pub scenario_id: u32,
    pub family: Family,
    pub title: String,
    pub objective_phrase: String,
    pub description_template: String,
    pub n_t: usize,
    pub k: usize,
    pub n_rf: Option<usize>,
    pub m: Option<u32>,
    /// Transmit budget in W (power cap for power-minimization families).
    pub p_max: f64,
    /// Per-user rate target in bps/Hz (family 01).
    pub rate_target: f64,
    /// Per-user SINR target (family 05).
    pub sinr_target: f64,
    /// Interference temperature as a fraction of `p_max`.
    pub i_th_ratio: f64,
    /// Self-interference tolerance as a fraction of `p_max`.
    pub eta_ratio: f64,
    pub epsilon: f64,
    /// Required normalized robust CI margin (family 09).
    pub delta: f64,
    /// Eavesdropper rate cap in bps/Hz (family 04).
    pub eve_rate_cap: f64,
    /// Receive antennas of the self-interference channel.
    pub si_rows: usize,
}

impl CatalogEntry {
    pub fn default_for(scenario_id: u32, family: Family) -> Self {
        use Family::*;
        let (title, phrase) = match family {
            MuMimoPowerMin => ("MU-MIMO", "Minimize transmit power with rate constraints"),
            ConstantEnvelopeCi => (
                "Constant Envelope precoding",
                "Maximize CI margin with unit modulus constraints",
            ),
            OneBitCi => ("Hybrid 1-bit MISO", "Maximize CI margin with 1-bit DAC constraints"),
            SecrecyMulticast => (
                "Cognitive Radio multicast secrecy",
                "Maximize minimum secrecy rate with eavesdropper constraints",
            ),
            FullDuplexPowerMin => (
                "Full Duplex QAM",
                "Minimize transmit power with SINR and SIC constraints",
            ),
            CognitiveSumRate => (
                "Cognitive Radio Sum Rate Maximization",
                "Maximize sum rate with transmit power and interference limits",
            ),
            CognitiveRobustSumRate => (
                "Cognitive Radio Interference Robustness",
                "Maximize sum rate with interference temperature constraints",
            ),
            FullDuplexSumRate => ("Full Duplex QoS", "Maximize sum rate subject to total power constraint"),
            HybridRobustCi => (
                "Hybrid Precoding Robustness",
                "Minimize transmit power with CI constraints and imperfect CSI",
            ),
        };
        let template = match family {
            MuMimoPowerMin => "{phrase}: a {n_t}-antenna base station serves {k} single-antenna users. Each user needs at least {rate} bps/Hz. Find the downlink beamformers with the lowest total transmit power (cap {p_max} W). SNR {snr_db} dB.",
            ConstantEnvelopeCi => "{phrase}: a {n_t}-antenna transmitter with constant-envelope amplifiers sends {m}-PSK symbols to {k} users. Every antenna radiates amplitude sqrt({p_max}/{n_t}). Choose the antenna phases that maximize the worst-user constructive-interference margin. SNR {snr_db} dB.",
            OneBitCi => "{phrase}: a {n_t}-antenna MISO downlink driven by 1-bit DACs sends {m}-PSK symbols to {k} users under a {p_max} W budget. Choose the quantized transmit vector that maximizes the worst-user constructive-interference margin. SNR {snr_db} dB.",
            SecrecyMulticast => "{phrase}: a {n_t}-antenna secondary transmitter multicasts one stream to {k} users while one eavesdropper listens. The eavesdropper rate must stay below {eve_rate} bps/Hz and the budget is {p_max} W. Maximize the minimum secrecy rate. SNR {snr_db} dB.",
            FullDuplexPowerMin => "{phrase}: a full-duplex {n_t}-antenna base station serves {k} downlink users with SINR target {gamma} each, while self-interference leaking into its receiver must stay below {eta} W. Minimize transmit power. SNR {snr_db} dB.",
            CognitiveSumRate => "{phrase}: a {n_t}-antenna cognitive transmitter serves {k} secondary users with budget {p_max} W. Interference at the primary receiver must not exceed {i_th} W. Maximize the secondary sum rate. SNR {snr_db} dB.",
            CognitiveRobustSumRate => "{phrase}: a {n_t}-antenna cognitive transmitter serves {k} secondary users with budget {p_max} W. The primary-user channel is known up to an error of norm {epsilon}, and worst-case interference must not exceed {i_th} W. Maximize the secondary sum rate. SNR {snr_db} dB.",
            FullDuplexSumRate => "{phrase}: a full-duplex {n_t}-antenna base station serves {k} downlink users under a {p_max} W budget. Maximize the downlink sum rate. SNR {snr_db} dB.",
            HybridRobustCi => "{phrase}: a hybrid transmitter with {n_t} antennas and {n_rf} RF chains sends {m}-PSK symbols to {k} users. Channel estimates carry errors of norm up to {epsilon}. Every user must keep a worst-case normalized constructive-interference margin of at least {delta}. Minimize transmit power. SNR {snr_db} dB.",
        };
        Self {
            scenario_id,
            family,
            title: title.to_string(),
            objective_phrase: phrase.to_string(),
            description_template: template.to_string(),
            n_t: 8,
            k: 4,
            n_rf: (family == HybridRobustCi).then_some(4),
            m: matches!(
                family,
                ConstantEnvelopeCi | OneBitCi | FullDuplexPowerMin | HybridRobustCi
            )
            .then_some(4),
            p_max: if family == MuMimoPowerMin { 40.0 } else { 1.0 },
            rate_target: 1.0,
            sinr_target: 1.0,
            i_th_ratio: 0.1,
            eta_ratio: 0.01,
            epsilon: 0.1,
            delta: 1.0,
            eve_rate_cap: 0.1,
            si_rows: 2,
        }
    }

    pub fn metric(&self) -> MetricKind {
        self.family.metric()
    }

    fn check(&self) -> Result<(), ScenarioError> {
        let bad = |msg: &str| Err(ScenarioError::Catalog(format!("scenario {}: {msg}", self.scenario_id)));
        if self.n_t == 0 || self.k == 0 {
            return bad("N_t and K must be positive");
        }
        if self.family == Family::HybridRobustCi {
            match self.n_rf {
                Some(n) if n >= 1 && n <= self.n_t => {}
                _ => return bad("hybrid family needs 1 <= N_rf <= N_t"),
            }
        }
        if self.family.presence().symbols && !matches!(self.m, Some(2 | 4 | 8)) {
            return bad("symbol-level family needs M in {2, 4, 8}");
        }
        let scalars = [
            self.p_max,
            self.rate_target,
            self.sinr_target,
            self.i_th_ratio,
            self.eta_ratio,
            self.epsilon,
            self.delta,
            self.eve_rate_cap,
        ];
        if scalars.iter().any(|v| !v.is_finite() || *v < 0.0) || self.p_max <= 0.0 {
            return bad("numeric constants must be finite and nonnegative, p_max positive");
        }
        if self.family.presence().g_si && self.si_rows == 0 {
            return bad("self-interference channel needs at least one row");
        }
        Ok(())
    }
}

/// Partial catalog entry read from an override file; missing fields take the
/// family defaults.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryOverride {
    scenario_id: u32,
    family: Family,
    title: Option<String>,
    objective_phrase: Option<String>,
    description_template: Option<String>,
    n_t: Option<usize>,
    k: Option<usize>,
    n_rf: Option<usize>,
    m: Option<u32>,
    p_max: Option<f64>,
    rate_target: Option<f64>,
    sinr_target: Option<f64>,
    i_th_ratio: Option<f64>,
    eta_ratio: Option<f64>,
    epsilon: Option<f64>,
    delta: Option<f64>,
    eve_rate_cap: Option<f64>,
    si_rows: Option<usize>,
}

impl EntryOverride {
    fn into_entry(self) -> CatalogEntry {
        let mut e = CatalogEntry::default_for(self.scenario_id, self.family);
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { e.$f = v; } )* };
        }
        take!(
            title,
            objective_phrase,
            description_template,
            n_t,
            k,
            p_max,
            rate_target,
            sinr_target,
            i_th_ratio,
            eta_ratio,
            epsilon,
            delta,
            eve_rate_cap,
            si_rows
        );
        if self.n_rf.is_some() {
            e.n_rf = self.n_rf;
        }
        if self.m.is_some() {
            e.m = self.m;
        }
        e
    }
}

/// Immutable set of scenario entries keyed by id.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    entries: BTreeMap<u32, CatalogEntry>,
}

impl Default for Catalog {
    fn default() -> Self {
        let entries = Family::ALL
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let id = i as u32 + 1;
                (id, CatalogEntry::default_for(id, *f))
            })
            .collect();
        Self { entries }
    }
}

impl Catalog {
    /// Default catalog with entries from a JSON array merged on top.
    pub fn with_overrides_json(json: &str) -> Result<Self, ScenarioError> {
        let overrides: Vec<EntryOverride> =
            serde_json::from_str(json).map_err(|e| ScenarioError::Catalog(e.to_string()))?;
        let mut catalog = Self::default();
        for o in overrides {
            let entry = o.into_entry();
            entry.check()?;
            catalog.entries.insert(entry.scenario_id, entry);
        }
        Ok(catalog)
    }

    pub fn from_override_file(path: &Path) -> Result<Self, ScenarioError> {
        let text = fs::read_to_string(path).map_err(|e| ScenarioError::Catalog(format!("{}: {e}", path.display())))?;
        Self::with_overrides_json(&text)
    }

    pub fn entries(&self) -> impl Iterator<Item = &CatalogEntry> {
        self.entries.values()
    }

    pub fn ids(&self) -> Vec<u32> {
        self.entries.keys().copied().collect()
    }

    pub fn get(&self, scenario_id: u32) -> Result<&CatalogEntry, ScenarioError> {
        self.entries
            .get(&scenario_id)
            .ok_or(ScenarioError::UnknownScenario(scenario_id))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn instantiate(
        &self,
        scenario_id: u32,
        snr_db: f64,
        seed: u64,
    ) -> Result<(TaskDescription, ScenarioDescriptor), ScenarioError> {
        let entry = self.get(scenario_id)?;
        if !snr_db.is_finite() {
            return Err(ScenarioError::InvalidDescriptor("snr_db must be finite".into()));
        }
        let descriptor = build_descriptor(entry, snr_db, seed)?;
        let text = fill_template(entry, &descriptor, snr_db);
        Ok((TaskDescription { text }, descriptor))
    }
}

/// Natural-language requirement for one scenario instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskDescription {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    pub scenario_id: u32,
    #[serde(rename = "N_t")]
    pub n_t: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N_rf", default, skip_serializing_if = "Option::is_none")]
    pub n_rf: Option<usize>,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u32>,
    pub architecture: Architecture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelState {
    #[serde(rename = "H")]
    pub h: ComplexMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_eve: Option<ComplexMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<ComplexMatrix>,
    #[serde(rename = "G_si", default, skip_serializing_if = "Option::is_none")]
    pub g_si: Option<ComplexMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub sigma2: f64,
    /// Intended PSK symbol per user (symbol-level scenarios).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbols: Option<Vec<Complex64>>,
}

/// Structured instance `{sys, ch, obj, con}` of one precoding problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDescriptor {
    pub sys: SystemParams,
    pub ch: ChannelState,
    pub obj: ObjectiveKind,
    pub con: Vec<Constraint>,
}

impl ScenarioDescriptor {
    pub fn n_t(&self) -> usize {
        self.sys.n_t
    }

    pub fn k(&self) -> usize {
        self.sys.k
    }

    pub fn sigma(&self) -> f64 {
        self.ch.sigma2.sqrt()
    }

    pub fn symbol_order(&self) -> u32 {
        self.sys.m.unwrap_or(4)
    }

    /// Number of beamformer columns: one shared stream for multicast,
    /// otherwise one per user.
    pub fn stream_count(&self) -> usize {
        if self.obj == ObjectiveKind::SecrecyMaxMin {
            1
        } else {
            self.sys.k
        }
    }

    pub fn constraint(&self, kind: ConstraintKind) -> Option<&Constraint> {
        self.con.iter().find(|c| c.kind == kind)
    }

    pub fn has(&self, kind: ConstraintKind) -> bool {
        self.constraint(kind).is_some()
    }

    /// Transmit budget from the `TotalPower` constraint, else the implied
    /// budget of a unit-modulus or 1-bit alphabet, else the reference power.
    pub fn p_max(&self) -> f64 {
        if let Some(c) = self.constraint(ConstraintKind::TotalPower) {
            return c.param("p_max");
        }
        let n = self.sys.n_t as f64;
        match self.sys.architecture {
            Architecture::ConstantEnvelope => self
                .constraint(ConstraintKind::UnitModulus)
                .map_or(REFERENCE_POWER, |c| c.param("amplitude").powi(2) * n),
            Architecture::OneBit => self
                .constraint(ConstraintKind::OneBit)
                .map_or(REFERENCE_POWER, |c| 2.0 * c.param("amplitude").powi(2) * n),
            _ => REFERENCE_POWER,
        }
    }

    /// SINR targets per user from rate or SINR constraints.
    pub fn sinr_targets(&self) -> Option<Vec<f64>> {
        let mut targets = vec![None; self.sys.k];
        for c in &self.con {
            if let (Some(u), Some(t)) = (c.user(), c.sinr_target()) {
                if u < targets.len() {
                    targets[u] = Some(t);
                }
            }
        }
        targets.into_iter().collect()
    }

    /// Checks dimensions, the presence table and constraint parameters.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::InvalidDescriptor(m));
        let (n_t, k) = (self.sys.n_t, self.sys.k);
        if n_t == 0 || k == 0 {
            return bad("N_t and K must be positive".into());
        }
        if self.ch.h.shape() != (k, n_t) {
            return bad(format!("H is {:?}, expected ({k}, {n_t})", self.ch.h.shape()));
        }
        if !(self.ch.sigma2 > 0.0) || !self.ch.sigma2.is_finite() {
            return bad("sigma2 must be positive".into());
        }
        let row_ok = |m: &Option<ComplexMatrix>| m.as_ref().is_none_or(|m| m.shape() == (1, n_t));
        if !row_ok(&self.ch.h_eve) || !row_ok(&self.ch.g) {
            return bad("h_eve and g must be 1 x N_t".into());
        }
        if let Some(g_si) = &self.ch.g_si {
            if g_si.cols() != n_t || g_si.rows() == 0 {
                return bad("G_si must have N_t columns".into());
            }
        }
        if let Some(s) = &self.ch.symbols {
            if s.len() != k || s.iter().any(|z| (z.norm() - 1.0).abs() > 1e-12) {
                return bad("symbols must be K unit-modulus points".into());
            }
        }
        if let Some(eps) = self.ch.epsilon {
            if !(eps >= 0.0) || !eps.is_finite() {
                return bad("epsilon must be nonnegative".into());
            }
        }
        if self.sys.architecture == Architecture::Hybrid {
            match self.sys.n_rf {
                Some(n) if n >= 1 && n <= n_t => {}
                _ => return bad("hybrid system needs 1 <= N_rf <= N_t".into()),
            }
        }
        if self.con.is_empty() {
            return bad("constraint set is empty".into());
        }
        for c in &self.con {
            c.validate()?;
            if let Some(u) = c.user() {
                if u >= k {
                    return bad(format!("constraint references user {u} of {k}"));
                }
            }
        }
        Ok(())
    }

    /// Which optional fields are set.
    pub fn presence(&self) -> Presence {
        Presence {
            h_eve: self.ch.h_eve.is_some(),
            g: self.ch.g.is_some(),
            g_si: self.ch.g_si.is_some(),
            epsilon: self.ch.epsilon.is_some(),
            symbols: self.ch.symbols.is_some(),
        }
    }
}

/// Instantiates from the built-in catalog.
pub fn instantiate_scenario(
    scenario_id: u32,
    snr_db: f64,
    seed: u64,
) -> Result<(TaskDescription, ScenarioDescriptor), ScenarioError> {
    Catalog::default().instantiate(scenario_id, snr_db, seed)
}

/// Unit-modulus M-PSK constellation point `index`.
pub fn psk_point(index: u32, m: u32) -> Complex64 {
    let offset = if m == 4 { PI / 4.0 } else { 0.0 };
    Complex64::from_polar(1.0, 2.0 * PI * f64::from(index % m) / f64::from(m) + offset)
}

fn draw_symbols(k: usize, m: u32, seed: u64) -> Vec<Complex64> {
    use rand::Rng as _;
    let mut rng = seeded(seed);
    (0..k).map(|_| psk_point(rng.random_range(0..m), m)).collect()
}

// Stream labels for the independent random parts of one realization.
const STREAM_H: u64 = 1;
const STREAM_G: u64 = 2;
const STREAM_EVE: u64 = 3;
const STREAM_SI: u64 = 4;
const STREAM_SYMBOLS: u64 = 5;

fn build_descriptor(entry: &CatalogEntry, snr_db: f64, seed: u64) -> Result<ScenarioDescriptor, ScenarioError> {
    use ConstraintKind as C;
    use Family::*;
    entry.check()?;
    let (n_t, k) = (entry.n_t, entry.k);
    let family = entry.family;
    let presence = family.presence();
    let row = |stream| generate_channel(ChannelDims { rows: 1, cols: n_t }, mix_seed(seed, stream));
    let ch = ChannelState {
        h: generate_channel(ChannelDims { rows: k, cols: n_t }, mix_seed(seed, STREAM_H)),
        h_eve: presence.h_eve.then(|| row(STREAM_EVE)),
        g: presence.g.then(|| row(STREAM_G)),
        g_si: presence.g_si.then(|| {
            generate_channel(
                ChannelDims {
                    rows: entry.si_rows,
                    cols: n_t,
                },
                mix_seed(seed, STREAM_SI),
            )
        }),
        epsilon: presence.epsilon.then_some(entry.epsilon),
        sigma2: noise_variance(snr_db),
        symbols: presence
            .symbols
            .then(|| draw_symbols(k, entry.m.unwrap_or(4), mix_seed(seed, STREAM_SYMBOLS))),
    };
    let p = entry.p_max;
    let m = f64::from(entry.m.unwrap_or(4));
    let mut con = Vec::new();
    match family {
        MuMimoPowerMin => {
            for u in 0..k {
                con.push(Constraint::new(
                    C::PerUserRate,
                    &[("user", u as f64), ("rate", entry.rate_target)],
                )?);
            }
            con.push(Constraint::new(C::TotalPower, &[("p_max", p)])?);
        }
        ConstantEnvelopeCi => {
            con.push(Constraint::new(
                C::UnitModulus,
                &[("amplitude", (p / n_t as f64).sqrt())],
            )?);
            con.push(Constraint::new(C::CiMargin, &[("m", m)])?);
        }
        OneBitCi => {
            con.push(Constraint::new(
                C::OneBit,
                &[("amplitude", (p / (2.0 * n_t as f64)).sqrt())],
            )?);
            con.push(Constraint::new(C::CiMargin, &[("m", m)])?);
        }
        SecrecyMulticast => {
            con.push(Constraint::new(C::TotalPower, &[("p_max", p)])?);
            con.push(Constraint::new(C::EavesdropperRate, &[("rate", entry.eve_rate_cap)])?);
        }
        FullDuplexPowerMin => {
            for u in 0..k {
                con.push(Constraint::new(
                    C::PerUserSinr,
                    &[("user", u as f64), ("gamma", entry.sinr_target)],
                )?);
            }
            con.push(Constraint::new(C::SelfInterference, &[("eta", entry.eta_ratio * p)])?);
        }
        CognitiveSumRate => {
            con.push(Constraint::new(C::TotalPower, &[("p_max", p)])?);
            con.push(Constraint::new(
                C::InterferenceTemperature,
                &[("i_th", entry.i_th_ratio * p)],
            )?);
        }
        CognitiveRobustSumRate => {
            con.push(Constraint::new(C::TotalPower, &[("p_max", p)])?);
            con.push(Constraint::new(
                C::RobustInterferenceTemperature,
                &[("i_th", entry.i_th_ratio * p), ("epsilon", entry.epsilon)],
            )?);
        }
        FullDuplexSumRate => {
            con.push(Constraint::new(C::TotalPower, &[("p_max", p)])?);
        }
        HybridRobustCi => {
            con.push(Constraint::new(C::UnitModulus, &[("amplitude", 1.0)])?);
            con.push(Constraint::new(
                C::RobustCiMargin,
                &[("m", m), ("epsilon", entry.epsilon), ("delta", entry.delta)],
            )?);
        }
    }
    let descriptor = ScenarioDescriptor {
        sys: SystemParams {
            scenario_id: entry.scenario_id,
            n_t,
            k,
            n_rf: entry.n_rf.filter(|_| family == HybridRobustCi),
            m: entry.m,
            architecture: family.architecture(),
        },
        ch,
        obj: family.objective(),
        con,
    };
    descriptor.validate()?;
    Ok(descriptor)
}

fn fill_template(entry: &CatalogEntry, d: &ScenarioDescriptor, snr_db: f64) -> String {
    let fmt = |v: f64| format!("{}", (v * 1e6).round() / 1e6);
    let i_th = d
        .constraint(ConstraintKind::InterferenceTemperature)
        .or_else(|| d.constraint(ConstraintKind::RobustInterferenceTemperature))
        .map_or(0.0, |c| c.param("i_th"));
    let eta = d
        .constraint(ConstraintKind::SelfInterference)
        .map_or(0.0, |c| c.param("eta"));
    let pairs = [
        ("{phrase}", entry.objective_phrase.clone()),
        ("{n_t}", entry.n_t.to_string()),
        ("{k}", entry.k.to_string()),
        ("{n_rf}", entry.n_rf.unwrap_or(entry.n_t).to_string()),
        ("{m}", entry.m.unwrap_or(4).to_string()),
        ("{p_max}", fmt(entry.p_max)),
        ("{rate}", fmt(entry.rate_target)),
        ("{gamma}", fmt(entry.sinr_target)),
        ("{i_th}", fmt(i_th)),
        ("{eta}", fmt(eta)),
        ("{epsilon}", fmt(entry.epsilon)),
        ("{delta}", fmt(entry.delta)),
        ("{eve_rate}", fmt(entry.eve_rate_cap)),
        ("{snr_db}", fmt(snr_db)),
    ];
    let mut text = entry.description_template.clone();
    for (key, value) in pairs {
        text = text.replace(key, &value);
    }
    text
}
