//! Five-variable tumour / T-cell model.
//!
//! | Variable | Meaning | Units |
//! |----------|---------|-------|
//! | `C` | cancer | cells/nL |
//! | `A` | antigen presentation | peptides/nL |
//! | `I` | inflammation | ng/nL |
//! | `E` | effector (immunogenic) T cells | cells/nL |
//! | `S` | non-effector (tolerogenic) T cells | cells/nL |
//!
//! ```text
//! dC/dt = f(C) C - kappa C E
//! dA/dt = r_A C - delta_A A
//! dI/dt = r_I C E - delta_I I
//! dE/dt = -r_E (E - E*) + beta A I E S - gamma E S
//! dS/dt = -r_S (S - S*) - beta A I E S + gamma E S
//! f(C)  = min{ r_C (1 - C / C*), r_max }
//! ```
//!
//! `beta` stands in for CTLA-4 expression (effector recruitment) and `gamma`
//! for PD-1 expression (effector suppression). Time is in days throughout.

use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rate and scale constants of the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    /// Logistic growth rate of cancer, 1/day.
    pub r_c: f64,
    /// Maximum growth rate of cancer, 1/day.
    pub r_max: f64,
    /// Cancer steady-state concentration, cells/nL.
    pub c_star: f64,
    /// Kill rate of cancer by effector T cells, nL/(cells day).
    pub kappa: f64,
    /// Antigen source rate per unit cancer.
    pub r_a: f64,
    /// Antigen degradation rate, 1/day.
    pub delta_a: f64,
    /// Inflammation source rate per unit of `C E`.
    pub r_i: f64,
    /// Inflammation degradation rate, 1/day.
    pub delta_i: f64,
    /// Effector relaxation rate, 1/day.
    pub r_e: f64,
    /// Effector base steady state, cells/nL.
    pub e_star: f64,
    /// Non-effector relaxation rate, 1/day.
    pub r_s: f64,
    /// Non-effector base steady state, cells/nL.
    pub s_star: f64,
    /// Effector recruitment coefficient (CTLA-4 proxy).
    pub beta: f64,
    /// Effector suppression coefficient (PD-1 proxy).
    pub gamma: f64,
}

impl ModelParams {
    /// The baseline (delayed-response, two-month delay) parameter set.
    pub const BASELINE: ModelParams = ModelParams {
        r_c: 1.0,
        r_max: 0.09,
        c_star: 1000.0,
        kappa: 1.2,
        r_a: 0.5,
        delta_a: 0.8,
        r_i: 0.4,
        delta_i: 3.0,
        r_e: 1.0,
        e_star: 5.0,
        r_s: 1.0,
        s_star: 5.0,
        beta: 0.009,
        gamma: 37.414,
    };

    pub fn validate(&self) -> Result<()> {
        for id in ParamId::ALL {
            let v = self.get(id);
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter {
                    name: id.name(),
                    value: v,
                    reason: "must be finite and non-negative",
                });
            }
        }
        if self.c_star <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "c_star",
                value: self.c_star,
                reason: "must be positive",
            });
        }
        Ok(())
    }

    pub fn get(&self, id: ParamId) -> f64 {
        match id {
            ParamId::RC => self.r_c,
            ParamId::RMax => self.r_max,
            ParamId::CStar => self.c_star,
            ParamId::Kappa => self.kappa,
            ParamId::RA => self.r_a,
            ParamId::DeltaA => self.delta_a,
            ParamId::RI => self.r_i,
            ParamId::DeltaI => self.delta_i,
            ParamId::RE => self.r_e,
            ParamId::EStar => self.e_star,
            ParamId::RS => self.r_s,
            ParamId::SStar => self.s_star,
            ParamId::Beta => self.beta,
            ParamId::Gamma => self.gamma,
        }
    }

    pub fn set(&mut self, id: ParamId, value: f64) {
        let slot = match id {
            ParamId::RC => &mut self.r_c,
            ParamId::RMax => &mut self.r_max,
            ParamId::CStar => &mut self.c_star,
            ParamId::Kappa => &mut self.kappa,
            ParamId::RA => &mut self.r_a,
            ParamId::DeltaA => &mut self.delta_a,
            ParamId::RI => &mut self.r_i,
            ParamId::DeltaI => &mut self.delta_i,
            ParamId::RE => &mut self.r_e,
            ParamId::EStar => &mut self.e_star,
            ParamId::RS => &mut self.r_s,
            ParamId::SStar => &mut self.s_star,
            ParamId::Beta => &mut self.beta,
            ParamId::Gamma => &mut self.gamma,
        };
        *slot = value;
    }

    /// Copy with one field replaced.
    pub fn with(mut self, id: ParamId, value: f64) -> Self {
        self.set(id, value);
        self
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::BASELINE
    }
}

/// Returns the baseline parameter set.
pub fn baseline_params() -> ModelParams {
    ModelParams::BASELINE
}

/// Identifies a single field of [`ModelParams`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ParamId {
    RC,
    RMax,
    CStar,
    Kappa,
    RA,
    DeltaA,
    RI,
    DeltaI,
    RE,
    EStar,
    RS,
    SStar,
    Beta,
    Gamma,
}

impl ParamId {
    pub const ALL: [ParamId; 14] = [
        ParamId::RC,
        ParamId::RMax,
        ParamId::CStar,
        ParamId::Kappa,
        ParamId::RA,
        ParamId::DeltaA,
        ParamId::RI,
        ParamId::DeltaI,
        ParamId::RE,
        ParamId::EStar,
        ParamId::RS,
        ParamId::SStar,
        ParamId::Beta,
        ParamId::Gamma,
    ];

    /// Field name as used in config files and reports.
    pub fn name(self) -> &'static str {
        match self {
            ParamId::RC => "r_c",
            ParamId::RMax => "r_max",
            ParamId::CStar => "c_star",
            ParamId::Kappa => "kappa",
            ParamId::RA => "r_a",
            ParamId::DeltaA => "delta_a",
            ParamId::RI => "r_i",
            ParamId::DeltaI => "delta_i",
            ParamId::RE => "r_e",
            ParamId::EStar => "e_star",
            ParamId::RS => "r_s",
            ParamId::SStar => "s_star",
            ParamId::Beta => "beta",
            ParamId::Gamma => "gamma",
        }
    }
}

impl fmt::Display for ParamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ParamId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ParamId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::UnknownParameter(s.to_string()))
    }
}

impl TryFrom<String> for ParamId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ParamId> for String {
    fn from(id: ParamId) -> String {
        id.name().to_string()
    }
}

/// Instantaneous values of `(C, A, I, E, S)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateVector {
    pub c: f64,
    pub a: f64,
    pub i: f64,
    pub e: f64,
    pub s: f64,
}

/// Names of the state components, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Component {
    C,
    A,
    I,
    E,
    S,
}

impl Component {
    pub const ALL: [Component; 5] = [Component::C, Component::A, Component::I, Component::E, Component::S];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Component::C => "C",
            Component::A => "A",
            Component::I => "I",
            Component::E => "E",
            Component::S => "S",
        }
    }
}

impl FromStr for Component {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Component::ALL
            .into_iter()
            .find(|c| c.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown state component `{s}`")))
    }
}

impl StateVector {
    pub const fn new(c: f64, a: f64, i: f64, e: f64, s: f64) -> Self {
        Self { c, a, i, e, s }
    }

    pub fn from_array(v: [f64; 5]) -> Self {
        Self::new(v[0], v[1], v[2], v[3], v[4])
    }

    pub fn to_array(self) -> [f64; 5] {
        [self.c, self.a, self.i, self.e, self.s]
    }

    pub fn get(&self, comp: Component) -> f64 {
        self.to_array()[comp.index()]
    }

    pub fn validate(&self) -> Result<()> {
        for comp in Component::ALL {
            let v = self.get(comp);
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidState {
                    component: comp.label(),
                    value: v,
                });
            }
        }
        Ok(())
    }
}

/// Per-day rates of change of each state component.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateDerivative {
    pub dc: f64,
    pub da: f64,
    pub di: f64,
    pub de: f64,
    pub ds: f64,
}

impl StateDerivative {
    pub fn to_array(self) -> [f64; 5] {
        [self.dc, self.da, self.di, self.de, self.ds]
    }
}

impl Add for StateVector {
    type Output = StateVector;
    fn add(self, o: StateVector) -> StateVector {
        StateVector::new(self.c + o.c, self.a + o.a, self.i + o.i, self.e + o.e, self.s + o.s)
    }
}

impl Sub for StateVector {
    type Output = StateVector;
    fn sub(self, o: StateVector) -> StateVector {
        StateVector::new(self.c - o.c, self.a - o.a, self.i - o.i, self.e - o.e, self.s - o.s)
    }
}

impl Mul<f64> for StateVector {
    type Output = StateVector;
    fn mul(self, k: f64) -> StateVector {
        StateVector::new(self.c * k, self.a * k, self.i * k, self.e * k, self.s * k)
    }
}

/// Saturating cancer growth rate `min{r_C (1 - C/C*), r_max}`.
///
/// Negative above `C*`; not clamped.
pub fn growth_rate(c: f64, params: &ModelParams) -> f64 {
    (params.r_c * (1.0 - c / params.c_star)).min(params.r_max)
}

/// Right-hand side of the model.
pub fn rhs(state: &StateVector, params: &ModelParams) -> StateDerivative {
    let StateVector { c, a, i, e, s } = *state;
    let p = params;
    let activation = p.beta * a * i * e * s;
    let suppression = p.gamma * e * s;
    StateDerivative {
        dc: growth_rate(c, p) * c - p.kappa * c * e,
        da: p.r_a * c - p.delta_a * a,
        di: p.r_i * c * e - p.delta_i * i,
        de: -p.r_e * (e - p.e_star) + activation - suppression,
        ds: -p.r_s * (s - p.s_star) - activation + suppression,
    }
}

/// Array form of [`rhs`], used by the integrator.
pub(crate) fn rhs_array(y: &[f64; 5], params: &ModelParams) -> [f64; 5] {
    rhs(&StateVector::from_array(*y), params).to_array()
}

/// Default antigen / inflammation seed level at treatment start.
pub const DEFAULT_SIGNAL_SEED: f64 = 1.0;

/// Pre-treatment state: tumour at `C*`, effectors escaped (`E = 0`),
/// non-effectors at `S*`, and both signals at `signal_seed`.
pub fn initial_state(params: &ModelParams, signal_seed: f64) -> StateVector {
    StateVector::new(params.c_star, signal_seed, signal_seed, 0.0, params.s_star)
}
