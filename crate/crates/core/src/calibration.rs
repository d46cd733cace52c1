//! Fitting parameters to a target delay length.
//!
//! The delay is a discontinuous function of the parameters (it jumps to
//! "never" at the no-response boundary), so the search is a derivative-free
//! simplex. Non-responding points get a finite penalty of `horizon²`, large
//! enough that any responding point ranks ahead of them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::RunSettings;
use crate::model::{ModelParams, ParamId};
use crate::nelder_mead::{self, Options};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSpec {
    pub free_params: Vec<ParamId>,
    /// `(lo, hi)` per free parameter.
    pub bounds: Vec<(f64, f64)>,
    /// Starting value per free parameter.
    pub init: Vec<f64>,
    pub target_delay: f64,
    #[serde(default = "default_max_evals")]
    pub max_evals: usize,
    #[serde(default = "default_tol_days")]
    pub tol_days: f64,
}

fn default_max_evals() -> usize {
    500
}

fn default_tol_days() -> f64 {
    1.0
}

impl FitSpec {
    /// Free `(beta, gamma)` over the commonly used fitting ranges
    /// `beta ∈ [0.008, 0.009]`, `gamma ∈ [37.414, 37.5]`, started at `init`.
    pub fn beta_gamma(init: (f64, f64), target_delay: f64) -> Self {
        Self {
            free_params: vec![ParamId::Beta, ParamId::Gamma],
            bounds: vec![(0.008, 0.009), (37.414, 37.5)],
            init: vec![init.0, init.1],
            target_delay,
            max_evals: default_max_evals(),
            tol_days: default_tol_days(),
        }
    }

    pub fn validate(&self, horizon: f64) -> Result<()> {
        let n = self.free_params.len();
        if self.bounds.len() != n || self.init.len() != n {
            return Err(Error::FitSpec("free_params, bounds and init must have equal length".into()));
        }
        for ((id, &(lo, hi)), &x) in self.free_params.iter().zip(&self.bounds).zip(&self.init) {
            if !(lo < hi && lo >= 0.0 && hi.is_finite()) {
                return Err(Error::FitSpec(format!("bounds for {id} must satisfy 0 <= lo < hi")));
            }
            if !(lo..=hi).contains(&x) {
                return Err(Error::FitSpec(format!("init for {id} = {x} outside [{lo}, {hi}]")));
            }
        }
        if !(self.target_delay > 0.0 && self.target_delay < horizon) {
            return Err(Error::FitSpec(format!("target_delay must lie in (0, {horizon})")));
        }
        if !(self.tol_days > 0.0) {
            return Err(Error::FitSpec("tol_days must be positive".into()));
        }
        if self.max_evals == 0 {
            return Err(Error::FitSpec("max_evals must be positive".into()));
        }
        Ok(())
    }

    fn to_params(&self, base: &ModelParams, unit: &[f64]) -> ModelParams {
        let mut p = *base;
        for ((&id, &(lo, hi)), &u) in self.free_params.iter().zip(&self.bounds).zip(unit) {
            p.set(id, lo + u * (hi - lo));
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub fitted: ModelParams,
    /// Delay of `fitted`, re-measured by a fresh simulation.
    pub achieved_delay: Option<f64>,
    pub evals: usize,
    pub converged: bool,
    /// Best squared residual after each simplex iteration.
    pub history: Vec<f64>,
}

/// Adjusts `spec.free_params` so that the simulated delay approaches
/// `spec.target_delay`.
pub fn fit_delay(spec: &FitSpec, base: &ModelParams, settings: &RunSettings) -> Result<FitResult> {
    let horizon = settings.metrics.horizon;
    spec.validate(horizon)?;
    let delay_of = |p: &ModelParams| -> Option<f64> { settings.evaluate(p).ok().and_then(|r| r.delay_length) };

    if spec.free_params.is_empty() {
        let achieved = delay_of(base);
        return Ok(FitResult {
            fitted: *base,
            achieved_delay: achieved,
            evals: 1,
            converged: achieved.is_some_and(|d| (d - spec.target_delay).abs() <= spec.tol_days),
            history: Vec::new(),
        });
    }

    let penalty = horizon * horizon;
    let mut any_feasible = false;
    let objective = |u: &[f64]| -> f64 {
        match delay_of(&spec.to_params(base, u)) {
            Some(d) => {
                any_feasible = true;
                (d - spec.target_delay).powi(2)
            }
            None => penalty,
        }
    };
    let x0: Vec<f64> = spec.init.iter().zip(&spec.bounds).map(|(&x, &(lo, hi))| (x - lo) / (hi - lo)).collect();
    let opts = Options {
        // one evaluation is reserved for the final re-verification
        max_evals: spec.max_evals.saturating_sub(1).max(spec.free_params.len() + 1),
        initial_step: 0.05,
        target: spec.tol_days * spec.tol_days * 0.25,
        x_tol: 1e-12,
    };
    let out = nelder_mead::minimize(objective, &x0, &opts);
    if !any_feasible {
        return Err(Error::Infeasible);
    }

    let fitted = spec.to_params(base, &out.x);
    let achieved = delay_of(&fitted);
    Ok(FitResult {
        fitted,
        achieved_delay: achieved,
        evals: out.evals + 1,
        converged: achieved.is_some_and(|d| (d - spec.target_delay).abs() <= spec.tol_days),
        history: out.history,
    })
}

/// Delay targets (days) for the CTLA-4-only, PD-1-only and combination
/// settings: 5, 4 and 2 months of 30 days.
pub const PUBLISHED_DELAYS: [f64; 3] = [150.0, 120.0, 60.0];

/// `(beta, gamma)` for the CTLA-4-only, PD-1-only and combination settings.
pub const TREATMENT_SETTINGS: [(f64, f64); 3] = [(0.009, 37.4168), (0.0089988, 37.414), (0.009, 37.414)];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RcCandidate {
    pub r_c: f64,
    pub delays: [Option<f64>; 3],
    /// Sum of squared relative delay errors; infinite if any setting fails
    /// to respond.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RcResolution {
    pub targets: [f64; 3],
    pub candidates: Vec<RcCandidate>,
    pub best_r_c: f64,
}

/// Runs the three treatment settings under each candidate `r_C` and picks
/// the one whose delays best match `targets`.
pub fn resolve_rc(targets: [f64; 3], candidates: &[f64], base: &ModelParams, settings: &RunSettings) -> Result<RcResolution> {
    if candidates.is_empty() {
        return Err(Error::Config("no r_C candidates".into()));
    }
    let mut rows = Vec::with_capacity(candidates.len());
    for &r_c in candidates {
        let mut delays = [None; 3];
        for (slot, &(beta, gamma)) in delays.iter_mut().zip(&TREATMENT_SETTINGS) {
            let p = base.with(ParamId::RC, r_c).with(ParamId::Beta, beta).with(ParamId::Gamma, gamma);
            *slot = settings.evaluate(&p)?.delay_length;
        }
        let score = delays
            .iter()
            .zip(&targets)
            .map(|(d, t)| d.map_or(f64::INFINITY, |d| ((d - t) / t).powi(2)))
            .sum();
        rows.push(RcCandidate { r_c, delays, score });
    }
    let best_r_c = rows.iter().min_by(|a, b| a.score.total_cmp(&b.score)).map(|c| c.r_c).unwrap();
    Ok(RcResolution { targets, candidates: rows, best_r_c })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::baseline_params;

    #[test]
    fn spec_validation() {
        let s = FitSpec::beta_gamma((0.009, 37.414), 60.0);
        s.validate(3650.0).unwrap();
        let bad = FitSpec { init: vec![0.01, 37.414], ..s.clone() };
        assert!(bad.validate(3650.0).is_err());
        let bad = FitSpec { target_delay: 4000.0, ..s.clone() };
        assert!(bad.validate(3650.0).is_err());
        let bad = FitSpec { bounds: vec![(0.008, 0.009)], ..s };
        assert!(bad.validate(3650.0).is_err());
    }

    #[test]
    fn unit_mapping() {
        let s = FitSpec::beta_gamma((0.009, 37.414), 60.0);
        let p = s.to_params(&baseline_params(), &[0.5, 1.0]);
        assert!((p.beta - 0.0085).abs() < 1e-15);
        assert_eq!(p.gamma, 37.5);
    }
}
