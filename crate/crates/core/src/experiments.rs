//! Parameter-space studies: one-at-a-time sensitivities, class-boundary
//! bisection and 2-D response maps.
//!
//! Every point is an independent simulation, so rows and grid cells are
//! evaluated in parallel; results are always assembled in input order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::metrics::{ResponseClass, ResponseReport, RunSettings};
use crate::model::{ModelParams, ParamId};

/// Relative change of a metric against its unperturbed value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RelChange {
    Finite(f64),
    /// The perturbed run never responded within the horizon.
    Infinite,
    /// The metric is absent from the perturbed (or baseline) run.
    Undefined,
}

impl RelChange {
    pub fn value(self) -> Option<f64> {
        match self {
            RelChange::Finite(v) => Some(v),
            RelChange::Infinite => Some(f64::INFINITY),
            RelChange::Undefined => None,
        }
    }

    fn between(base: Option<f64>, perturbed: Option<f64>) -> Self {
        match (base, perturbed) {
            (Some(b), Some(p)) if b != 0.0 => RelChange::Finite((p - b) / b),
            _ => RelChange::Undefined,
        }
    }
}

impl Serialize for RelChange {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            RelChange::Finite(v) => s.serialize_f64(*v),
            RelChange::Infinite => s.serialize_str("+inf"),
            RelChange::Undefined => s.serialize_none(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityRow {
    pub param: ParamId,
    pub perturbation: f64,
    pub delta_delay: RelChange,
    pub delta_dormancy: RelChange,
    pub class: Option<ResponseClass>,
    pub error: Option<String>,
}

/// Scales each parameter in turn by `1 + frac` and reports the relative
/// change in delay and dormancy length.
///
/// The baseline must produce a delayed response. Integration failures are
/// recorded on their row.
pub fn oat_sensitivity(baseline: &ModelParams, frac: f64, settings: &RunSettings) -> Result<Vec<SensitivityRow>> {
    let base = settings.evaluate(baseline)?;
    if base.class != ResponseClass::Delayed {
        return Err(Error::Config(format!("sensitivity baseline must be Delayed, got {:?}", base.class)));
    }
    let rows = ParamId::ALL
        .par_iter()
        .map(|&id| {
            let params = baseline.with(id, baseline.get(id) * (1.0 + frac));
            match settings.evaluate(&params) {
                Ok(r) => sensitivity_row(id, frac, &base, &r),
                Err(e) => SensitivityRow {
                    param: id,
                    perturbation: frac,
                    delta_delay: RelChange::Undefined,
                    delta_dormancy: RelChange::Undefined,
                    class: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(rows)
}

fn sensitivity_row(id: ParamId, frac: f64, base: &ResponseReport, r: &ResponseReport) -> SensitivityRow {
    let (delta_delay, delta_dormancy) = if r.class == ResponseClass::NoResponse {
        (RelChange::Infinite, RelChange::Infinite)
    } else {
        (
            RelChange::between(base.delay_length, r.delay_length),
            RelChange::between(base.dormancy_length, r.dormancy_length),
        )
    };
    SensitivityRow { param: id, perturbation: frac, delta_delay, delta_dormancy, class: Some(r.class), error: None }
}

/// Bisects `[lo, hi]` for the point where `pred` flips, given that it
/// differs at the two ends. Returns the final bracket `(lo, hi)`.
pub fn bisect<F>(mut lo: f64, mut hi: f64, resolution: f64, mut pred: F) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<bool>,
{
    if !(resolution > 0.0) || !(lo < hi) {
        return Err(Error::Bracket(format!("need lo < hi and resolution > 0, got [{lo}, {hi}] / {resolution}")));
    }
    let p_hi = pred(hi)?;
    if pred(lo)? == p_hi {
        return Err(Error::Bracket("predicate does not change sign on the bracket".into()));
    }
    while hi - lo > resolution {
        let mid = 0.5 * (lo + hi);
        if pred(mid)? == p_hi {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((lo, hi))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdResult {
    pub param: ParamId,
    pub critical_value: f64,
    pub bracket_width: f64,
    /// Class just below and just above the critical value.
    pub side_classes: (ResponseClass, ResponseClass),
    pub evaluations: usize,
}

/// Locates the class boundary of `param` adjacent to the `hi` endpoint's
/// class, to within `resolution`.
pub fn find_threshold(
    base: &ModelParams,
    param: ParamId,
    lo: f64,
    hi: f64,
    resolution: f64,
    settings: &RunSettings,
) -> Result<ThresholdResult> {
    let class_at = |x: f64| settings.evaluate(&base.with(param, x)).map(|r| r.class);
    let c_lo = class_at(lo)?;
    let c_hi = class_at(hi)?;
    if c_lo == c_hi {
        return Err(Error::SameClass(c_lo));
    }
    let mut evaluations = 2;
    let mut lo_class = c_lo;
    let (mut a, mut b) = (lo, hi);
    while b - a > resolution {
        let mid = 0.5 * (a + b);
        let c = class_at(mid)?;
        evaluations += 1;
        if c == c_hi {
            b = mid;
        } else {
            a = mid;
            lo_class = c;
        }
    }
    Ok(ThresholdResult {
        param,
        critical_value: 0.5 * (a + b),
        bracket_width: b - a,
        side_classes: (lo_class, c_hi),
        evaluations,
    })
}

/// Both edges of the delayed-response band along one parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DelayedBand {
    pub param: ParamId,
    /// Boundary with the no-response region.
    pub no_response_edge: f64,
    /// Boundary with the quick-response region.
    pub quick_edge: f64,
    pub width: f64,
}

/// Finds both edges of the delayed band between a no-response endpoint and
/// a quick-response endpoint.
pub fn delayed_band(
    base: &ModelParams,
    param: ParamId,
    lo: f64,
    hi: f64,
    resolution: f64,
    settings: &RunSettings,
) -> Result<DelayedBand> {
    let class_at = |x: f64| settings.evaluate(&base.with(param, x)).map(|r| r.class);
    let (c_lo, c_hi) = (class_at(lo)?, class_at(hi)?);
    let ok = |a: ResponseClass, b: ResponseClass| a == ResponseClass::NoResponse && b.is_quick();
    if !(ok(c_lo, c_hi) || ok(c_hi, c_lo)) {
        return Err(Error::Bracket(format!(
            "delayed band needs NoResponse at one end and a quick response at the other, got {c_lo:?} / {c_hi:?}"
        )));
    }
    let (a, b) = bisect(lo, hi, resolution, |x| Ok(class_at(x)? == ResponseClass::NoResponse))?;
    let no_response_edge = 0.5 * (a + b);
    let (a, b) = bisect(lo, hi, resolution, |x| Ok(class_at(x)?.is_quick()))?;
    let quick_edge = 0.5 * (a + b);
    Ok(DelayedBand { param, no_response_edge, quick_edge, width: (quick_edge - no_response_edge).abs() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub param: ParamId,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl AxisSpec {
    pub fn new(param: ParamId, lo: f64, hi: f64, count: usize) -> Self {
        Self { param, lo, hi, count }
    }

    /// A single-point axis.
    pub fn fixed(param: ParamId, value: f64) -> Self {
        Self::new(param, value, value, 1)
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count <= 1 {
            return vec![self.lo];
        }
        let step = (self.hi - self.lo) / (self.count - 1) as f64;
        (0..self.count).map(|k| self.lo + k as f64 * step).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.count == 0 || !self.lo.is_finite() || !self.hi.is_finite() || (self.count > 1 && self.hi <= self.lo) {
            return Err(Error::Config(format!("invalid axis for {}", self.param)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CellError {
    pub row: usize,
    pub col: usize,
    pub message: String,
}

/// Response class over a 2-D grid. Rows follow `axis1`, columns `axis2`.
#[derive(Debug, Clone, Serialize)]
pub struct RegionMap {
    pub axis1: AxisSpec,
    pub axis2: AxisSpec,
    pub classes: Vec<Vec<Option<ResponseClass>>>,
    /// Width along `axis2` of the first delayed run in each row, with edges
    /// refined by bisection where a neighbouring cell exists.
    pub band_width: Vec<f64>,
    pub errors: Vec<CellError>,
}

impl RegionMap {
    pub fn rows(&self) -> usize {
        self.classes.len()
    }

    pub fn cols(&self) -> usize {
        self.classes.first().map_or(0, Vec::len)
    }
}

/// Classifies every grid point of `axis1 x axis2` and measures the delayed
/// band along `axis2` in each row.
pub fn region_map(base: &ModelParams, axis1: AxisSpec, axis2: AxisSpec, settings: &RunSettings) -> Result<RegionMap> {
    axis1.validate()?;
    axis2.validate()?;
    let (xs, ys) = (axis1.values(), axis2.values());
    let cells: Vec<(usize, usize)> = (0..xs.len()).flat_map(|r| (0..ys.len()).map(move |c| (r, c))).collect();
    let point = |r: usize, c: usize| base.with(axis1.param, xs[r]).with(axis2.param, ys[c]);
    let results: Vec<Result<ResponseClass>> = cells
        .par_iter()
        .map(|&(r, c)| settings.evaluate(&point(r, c)).map(|rep| rep.class))
        .collect();

    let mut classes = vec![vec![None; ys.len()]; xs.len()];
    let mut errors = Vec::new();
    for (&(r, c), res) in cells.iter().zip(results) {
        match res {
            Ok(class) => classes[r][c] = Some(class),
            Err(e) => errors.push(CellError { row: r, col: c, message: e.to_string() }),
        }
    }

    let resolution = if ys.len() > 1 { (ys[1] - ys[0]) * 1e-3 } else { 0.0 };
    let band_width = (0..xs.len())
        .into_par_iter()
        .map(|r| row_band_width(&classes[r], &ys, resolution, |y| {
            settings.evaluate(&base.with(axis1.param, xs[r]).with(axis2.param, y)).map(|rep| rep.class)
        }))
        .collect();

    Ok(RegionMap { axis1, axis2, classes, band_width, errors })
}

fn row_band_width<F>(row: &[Option<ResponseClass>], ys: &[f64], resolution: f64, class_at: F) -> f64
where
    F: Fn(f64) -> Result<ResponseClass>,
{
    let delayed = |c: &Option<ResponseClass>| *c == Some(ResponseClass::Delayed);
    let Some(first) = row.iter().position(delayed) else {
        return 0.0;
    };
    let last = first + row[first..].iter().take_while(|c| delayed(c)).count() - 1;
    let is_delayed = |y: f64| Ok(class_at(y)? == ResponseClass::Delayed);
    let edge = |a: f64, b: f64| -> f64 {
        match bisect(a.min(b), a.max(b), resolution, is_delayed) {
            Ok((lo, hi)) => 0.5 * (lo + hi),
            Err(_) => b,
        }
    };
    let lower = if first > 0 && row[first - 1].is_some() { edge(ys[first - 1], ys[first]) } else { ys[first] };
    let upper = if last + 1 < row.len() && row[last + 1].is_some() { edge(ys[last + 1], ys[last]) } else { ys[last] };
    upper - lower
}
