//! Krasnoselskij iteration `x_{n+1} = (1-λ)x_n + λT(x_n)` and its error bounds.
//!
//! When `T` is a `(k, a)`-enriched Kannan map and `λ = 1/(k+1)`, the
//! successive step norms shrink at least by `δ = a/(1-a)` and the distance
//! to the fixed point `p` obeys
//!
//! ```text
//! ‖x_n - p‖ <= δ^n / (1-δ) · ‖x_1 - x_0‖          (a priori)
//! ‖x_n - p‖ <= δ   / (1-δ) · ‖x_n - x_{n-1}‖      (a posteriori)
//! ```
//!
//! The same formulas hold with `δ` replaced by `h` for `(k, h)`-enriched
//! Bianchini maps and by `c` for Banach contractions. [`krasnoselskij`]
//! records both bounds at every step when a rate is supplied.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::mapping::MappingSpec;

/// Step norm above which a run is declared divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

/// Ratios are only recorded when the previous step norm is at least this.
pub const RATIO_FLOOR: f64 = 1e-15;

/// Averaging parameter choice.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Lambda {
    Auto,
    Fixed(f64),
}

impl Serialize for Lambda {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Lambda::Auto => s.serialize_str("auto"),
            Lambda::Fixed(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Lambda {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Lambda::Fixed(v)),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

impl std::str::FromStr for Lambda {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Lambda::Auto);
        }
        s.parse::<f64>()
            .map(Lambda::Fixed)
            .map_err(|_| format!("expected a number or \"auto\", got {s:?}"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopRule {
    AposterioriBound,
    StepNorm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub lambda: Lambda,
    pub tol: f64,
    pub max_iter: usize,
    /// `None` picks [`StopRule::AposterioriBound`] when a rate is known and
    /// [`StopRule::StepNorm`] otherwise.
    pub stop_rule: Option<StopRule>,
    /// Certified contraction rate of the averaged map, if known.
    pub rate: Option<f64>,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            lambda: Lambda::Fixed(1.0),
            tol: 1e-10,
            max_iter: 10_000,
            stop_rule: None,
            rate: None,
        }
    }
}

impl SolveConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        SolveConfig {
            lambda: Lambda::Fixed(lambda),
            ..Default::default()
        }
    }

    pub fn tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn rate(mut self, rate: f64) -> Self {
        self.rate = Some(rate);
        self
    }

    pub fn stop_rule(mut self, rule: StopRule) -> Self {
        self.stop_rule = Some(rule);
        self
    }

    pub fn effective_stop_rule(&self) -> StopRule {
        self.stop_rule.unwrap_or(if self.rate.is_some() {
            StopRule::AposterioriBound
        } else {
            StopRule::StepNorm
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::invalid(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        if let Lambda::Fixed(l) = self.lambda {
            if !(l > 0.0 && l <= 1.0) {
                return Err(Error::invalid(format!(
                    "lambda must lie in (0, 1], got {l}"
                )));
            }
        }
        if let Some(r) = self.rate {
            check_rate(r)?;
        }
        if self.effective_stop_rule() == StopRule::AposterioriBound && self.rate.is_none() {
            return Err(Error::invalid(
                "the a posteriori stopping rule needs a known rate",
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Converged,
    MaxIterReached,
    Diverged,
}

/// Everything recorded along one run.
///
/// `step_norms[i] = ‖x_{i+1} - x_i‖`; `ratios[i] = step_norms[i] / step_norms[i-1]`
/// (never present for `i = 0`). When the rate is known, `apriori[i]` and
/// `aposteriori[i]` bound `‖x_{i+1} - p‖`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub iterates: Vec<Vector>,
    pub step_norms: Vec<f64>,
    pub ratios: Vec<Option<f64>>,
    pub apriori: Option<Vec<f64>>,
    pub aposteriori: Option<Vec<f64>>,
    pub status: Status,
    pub lambda: f64,
    pub rate: Option<f64>,
    pub stop_rule: StopRule,
    /// Value of the stopping criterion at the last step.
    pub final_criterion: Option<f64>,
}

impl IterationTrace {
    pub fn iterations(&self) -> usize {
        self.step_norms.len()
    }

    pub fn last(&self) -> &Vector {
        self.iterates.last().expect("trace always holds x_0")
    }

    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }
}

/// `λ = 1/(k+1)`; exactly 1 for `k = 0`.
pub fn auto_lambda(k: f64) -> Result<f64> {
    if !(k >= 0.0) || !k.is_finite() {
        return Err(Error::invalid(format!(
            "enrichment constant k must be >= 0, got {k}"
        )));
    }
    Ok(1.0 / (k + 1.0))
}

/// `δ = a/(1-a)` for a Kannan constant `a ∈ [0, 1/2)`.
pub fn contraction_rate_kannan(a: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&a) {
        return Err(Error::invalid(format!(
            "Kannan constant must lie in [0, 1/2), got {a}"
        )));
    }
    Ok(a / (1.0 - a))
}

fn check_rate(rate: f64) -> Result<()> {
    if (0.0..1.0).contains(&rate) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "rate must lie in [0, 1), got {rate}"
        )))
    }
}

/// `rate^n / (1 - rate) · ‖x_1 - x_0‖`, bounding `‖x_n - p‖`.
pub fn apriori_bound(rate: f64, first_step: f64, n: usize) -> Result<f64> {
    check_rate(rate)?;
    if n == 0 {
        return Err(Error::invalid("a priori bound is defined for n >= 1"));
    }
    Ok(rate.powi(n as i32) / (1.0 - rate) * first_step)
}

/// `rate / (1 - rate) · ‖x_n - x_{n-1}‖`, bounding `‖x_n - p‖`.
pub fn aposteriori_bound(rate: f64, last_step: f64) -> Result<f64> {
    check_rate(rate)?;
    Ok(rate / (1.0 - rate) * last_step)
}

/// `rate^n · (1 - rate^m) / (1 - rate) · base_step`, bounding
/// `‖x_{n+m} - x_n‖` from `base_step = ‖x_1 - x_0‖`.
pub fn cauchy_window_bound(rate: f64, base_step: f64, n: usize, m: usize) -> Result<f64> {
    check_rate(rate)?;
    if m == 0 {
        return Err(Error::invalid("window length m must be at least 1"));
    }
    Ok(rate.powi(n as i32) * (1.0 - rate.powi(m as i32)) / (1.0 - rate) * base_step)
}

/// `rate^i / (1 - rate) · ‖x_n - x_{n-1}‖`, bounding `‖x_{n+i-1} - p‖` for
/// `n >= 1`, `i >= 1`. With `n = 1`, `i = n'` this is the a priori bound at
/// `n'`; with `i = 1` it is the a posteriori bound at `n`.
pub fn unified_bound(rate: f64, step: f64, i: usize) -> Result<f64> {
    check_rate(rate)?;
    if i == 0 {
        return Err(Error::invalid("look-ahead i must be at least 1"));
    }
    Ok(rate.powi(i as i32) / (1.0 - rate) * step)
}

/// Smallest `n >= 1` with `apriori_bound(rate, first_step, n) <= eps`.
pub fn required_iterations(rate: f64, first_step: f64, eps: f64) -> Result<usize> {
    check_rate(rate)?;
    if !(eps > 0.0) || !(first_step >= 0.0) {
        return Err(Error::invalid(
            "eps must be positive and first_step nonnegative",
        ));
    }
    if rate == 0.0 || first_step == 0.0 {
        return Ok(1);
    }
    let bound = |n: usize| rate.powi(n as i32) / (1.0 - rate) * first_step;
    let guess = ((eps * (1.0 - rate) / first_step).ln() / rate.ln()).ceil();
    let mut n = if guess.is_finite() && guess > 1.0 {
        guess as usize
    } else {
        1
    };
    // the logarithmic guess can be off by one either way after rounding
    while n > 1 && bound(n - 1) <= eps {
        n -= 1;
    }
    while bound(n) > eps {
        n += 1;
    }
    Ok(n)
}

/// Runs the averaged iteration from `x0`.
///
/// `cfg.lambda` must already be resolved; [`Lambda::Auto`] is rejected here
/// (see [`resolve_lambda`]). A non-finite iterate or a step norm above
/// [`DIVERGENCE_THRESHOLD`] ends the run with [`Status::Diverged`]; an
/// iterate leaving the map's domain is an error.
pub fn krasnoselskij(t: &MappingSpec, x0: &Vector, cfg: &SolveConfig) -> Result<IterationTrace> {
    cfg.validate()?;
    let lambda = match cfg.lambda {
        Lambda::Fixed(l) => l,
        Lambda::Auto => return Err(Error::AutoLambdaUnresolved),
    };
    t.domain().check(x0)?;
    let stop_rule = cfg.effective_stop_rule();
    let rate = cfg.rate;
    let bound_factor = rate.map(|r| r / (1.0 - r));

    let mut trace = IterationTrace {
        iterates: vec![x0.clone()],
        step_norms: Vec::new(),
        ratios: Vec::new(),
        apriori: rate.map(|_| Vec::new()),
        aposteriori: rate.map(|_| Vec::new()),
        status: Status::MaxIterReached,
        lambda,
        rate,
        stop_rule,
        final_criterion: None,
    };

    let mut x = x0.clone();
    for n in 0..cfg.max_iter {
        let tx = match t.apply(&x) {
            Ok(v) => v,
            Err(Error::NonFinite(_)) => {
                trace.status = Status::Diverged;
                break;
            }
            Err(e) => {
                return Err(Error::DomainEscape {
                    iteration: n,
                    point: x.as_slice().to_vec(),
                    source: Box::new(e),
                })
            }
        };
        let next = if lambda == 1.0 {
            tx
        } else {
            match x.lerp(&tx, lambda) {
                Ok(v) => v,
                Err(Error::NonFinite(_)) => {
                    trace.status = Status::Diverged;
                    break;
                }
                Err(e) => return Err(e),
            }
        };
        let step = next.sub(&x)?.norm();
        if !step.is_finite() || step > DIVERGENCE_THRESHOLD {
            trace.iterates.push(next);
            trace.step_norms.push(step);
            trace.ratios.push(None);
            trace.status = Status::Diverged;
            break;
        }

        let ratio = trace
            .step_norms
            .last()
            .and_then(|&prev| (prev >= RATIO_FLOOR).then(|| step / prev));
        trace.ratios.push(ratio);
        trace.step_norms.push(step);
        if let (Some(r), Some(f)) = (rate, bound_factor) {
            let first = trace.step_norms[0];
            trace
                .apriori
                .as_mut()
                .unwrap()
                .push(r.powi(n as i32 + 1) / (1.0 - r) * first);
            trace.aposteriori.as_mut().unwrap().push(f * step);
        }
        trace.iterates.push(next.clone());
        x = next;

        let criterion = match stop_rule {
            StopRule::StepNorm => step,
            StopRule::AposterioriBound => bound_factor.unwrap() * step,
        };
        trace.final_criterion = Some(criterion);
        if criterion <= cfg.tol {
            trace.status = Status::Converged;
            break;
        }
    }
    Ok(trace)
}

/// Turns [`Lambda::Auto`] into `1/(k+1)` using a certified enrichment
/// constant; refuses when no feasible certificate is available.
pub fn resolve_lambda(lambda: Lambda, certified_k: Option<f64>) -> Result<f64> {
    match lambda {
        Lambda::Fixed(l) => Ok(l),
        Lambda::Auto => auto_lambda(certified_k.ok_or(Error::AutoLambdaUnresolved)?),
    }
}
