//! Empirical certification of contraction-type conditions.
//!
//! Every check is a supremum over the distinct pairs of a finite
//! [`SampleSet`]; a certificate therefore only ever claims that the
//! inequality holds *on that sample*. The sample is stored in the
//! certificate together with the worst pair found.
//!
//! Pair residuals are evaluated in `f64`. Inequalities that hold with
//! equality (the reflection map attains its Kannan constant on every pair
//! straddling the fixed point) come out a few ulps positive, so each pair's
//! violation is reduced by [`ROUNDOFF_SLACK`] times the magnitude of the
//! operands that entered it.

use std::collections::HashSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::mapping::MappingSpec;
use crate::solve::{auto_lambda, contraction_rate_kannan};

/// Relative allowance for floating-point evaluation error in pair residuals.
pub const ROUNDOFF_SLACK: f64 = 16.0 * f64::EPSILON;

/// Numerators at or below this are treated as zero when the denominator vanishes.
pub const ZERO_NUMERATOR: f64 = 1e-14;

/// Two `a_min` values closer than this are considered tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Finite witness set standing in for "for all x, y".
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    points: Vec<Vector>,
    description: String,
    seed: u64,
}

impl SampleSet {
    pub fn new(points: Vec<Vector>, description: impl Into<String>, seed: u64) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidSample(format!(
                "need at least 2 points, got {}",
                points.len()
            )));
        }
        let dim = points[0].dim();
        let mut seen = HashSet::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            if p.dim() != dim {
                return Err(Error::InvalidSample(format!(
                    "point {i} has dimension {}, expected {dim}",
                    p.dim()
                )));
            }
            if !seen.insert(point_key(p)) {
                return Err(Error::InvalidSample(format!(
                    "duplicate point {p:?} at index {i}"
                )));
            }
        }
        Ok(SampleSet {
            points,
            description: description.into(),
            seed,
        })
    }

    /// Builds a sample from arbitrary points, dropping duplicates.
    pub fn deduplicated(
        points: Vec<Vector>,
        description: impl Into<String>,
        seed: u64,
    ) -> Result<Self> {
        let mut seen = HashSet::with_capacity(points.len());
        let unique = points
            .into_iter()
            .filter(|p| seen.insert(point_key(p)))
            .collect();
        Self::new(unique, description, seed)
    }

    /// Uniform grid on `[lo, hi]` with `count` points.
    pub fn grid_1d(lo: f64, hi: f64, count: usize) -> Result<Self> {
        let pts = grid_axis(lo, hi, count)
            .into_iter()
            .map(Vector::scalar)
            .collect::<Result<Vec<_>>>()?;
        Self::new(pts, format!("uniform grid {count} pts on [{lo}, {hi}]"), 0)
    }

    /// Tensor grid with `per_axis` points per axis on the box `[lower, upper]`,
    /// plus `random` seeded uniform points in the same box.
    pub fn grid_plus_random(
        lower: &[f64],
        upper: &[f64],
        per_axis: usize,
        random: usize,
        seed: u64,
    ) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::InvalidSample(
                "sample box bounds have mismatched dimensions".into(),
            ));
        }
        let mut points = if per_axis > 0 {
            tensor_grid(lower, upper, per_axis)?
        } else {
            Vec::new()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..random {
            let raw = lower
                .iter()
                .zip(upper)
                .map(|(l, u)| if l < u { rng.gen_range(*l..=*u) } else { *l })
                .collect();
            points.push(Vector::new(raw)?);
        }
        let description = format!(
            "grid {per_axis} pts/axis + {random} seeded uniform pts on box {lower:?}..{upper:?}"
        );
        Self::deduplicated(points, description, seed)
    }

    /// Adds extra points (e.g. an iteration orbit), skipping duplicates.
    pub fn extended(&self, extra: impl IntoIterator<Item = Vector>, note: &str) -> Result<Self> {
        let mut pts = self.points.clone();
        pts.extend(extra);
        Self::deduplicated(pts, format!("{} + {note}", self.description), self.seed)
    }

    pub fn points(&self) -> &[Vector] {
        &self.points
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn point_key(p: &Vector) -> Vec<u64> {
    // +0.0 normalises -0.0
    p.as_slice().iter().map(|v| (v + 0.0).to_bits()).collect()
}

fn grid_axis(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![lo],
        _ => (0..count)
            .map(|i| {
                if i == count - 1 {
                    hi
                } else {
                    lo + (hi - lo) * (i as f64) / ((count - 1) as f64)
                }
            })
            .collect(),
    }
}

fn tensor_grid(lower: &[f64], upper: &[f64], per_axis: usize) -> Result<Vec<Vector>> {
    let axes: Vec<Vec<f64>> = lower
        .iter()
        .zip(upper)
        .map(|(l, u)| {
            if l < u {
                grid_axis(*l, *u, per_axis)
            } else {
                vec![*l]
            }
        })
        .collect();
    let mut out: Vec<Vec<f64>> = vec![vec![]];
    for axis in &axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(*v);
                    p
                })
            })
            .collect();
    }
    out.into_iter().map(Vector::new).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ContractionClass {
    Banach,
    Kannan,
    Bianchini,
    EnrichedKannan,
    EnrichedBianchini,
    Monotone,
}

impl fmt::Display for ContractionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl ContractionClass {
    /// Upper end (exclusive) of the admissible rate range; `None` when the
    /// class has no rate.
    pub fn rate_limit(self) -> Option<f64> {
        match self {
            ContractionClass::Kannan | ContractionClass::EnrichedKannan => Some(0.5),
            ContractionClass::Banach
            | ContractionClass::Bianchini
            | ContractionClass::EnrichedBianchini => Some(1.0),
            ContractionClass::Monotone => None,
        }
    }

    fn kannan(k: f64) -> Self {
        if k == 0.0 {
            ContractionClass::Kannan
        } else {
            ContractionClass::EnrichedKannan
        }
    }

    fn bianchini(k: f64) -> Self {
        if k == 0.0 {
            ContractionClass::Bianchini
        } else {
            ContractionClass::EnrichedBianchini
        }
    }
}

/// Outcome of checking one inequality over a sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionCertificate {
    pub class_tag: ContractionClass,
    /// Enrichment constant; zero for the plain classes.
    pub k: f64,
    /// `c`, `a` or `h` depending on the class; zero for monotonicity.
    pub rate: f64,
    /// Worst `LHS - RHS` over the sample (after the roundoff allowance).
    pub max_violation: f64,
    pub witness_pair: Option<(Vector, Vector)>,
    /// False when `rate` lies outside the class range.
    pub feasible: bool,
    pub sample: SampleSet,
}

impl ContractionCertificate {
    /// The inequality holds on every sample pair and the constants are admissible.
    pub fn holds(&self) -> bool {
        self.feasible && self.max_violation <= 0.0
    }
}

/// Per-point data shared by every pair check.
struct PairTable {
    x: Vec<Vector>,
    tx: Vec<Vector>,
    /// `‖x - Tx‖`
    disp: Vec<f64>,
    /// `‖x‖ + ‖Tx‖`, the operand magnitude feeding the roundoff allowance.
    mag: Vec<f64>,
}

impl PairTable {
    fn build(t: &MappingSpec, sample: &SampleSet) -> Result<Self> {
        let n = sample.len();
        let mut tx = Vec::with_capacity(n);
        let mut disp = Vec::with_capacity(n);
        let mut mag = Vec::with_capacity(n);
        for x in sample.points() {
            let y = t.apply(x)?;
            disp.push(x.sub(&y)?.norm());
            mag.push(x.norm() + y.norm());
            tx.push(y);
        }
        Ok(PairTable {
            x: sample.points().to_vec(),
            tx,
            disp,
            mag,
        })
    }

    fn len(&self) -> usize {
        self.x.len()
    }

    /// `(‖k(x-y) + Tx - Ty‖, ‖x - y‖, ‖Tx - Ty‖)` for the pair `(i, j)`.
    fn enriched_lhs(&self, k: f64, i: usize, j: usize) -> (f64, f64) {
        let (xi, xj) = (self.x[i].as_slice(), self.x[j].as_slice());
        let (ti, tj) = (self.tx[i].as_slice(), self.tx[j].as_slice());
        let mut sq = 0.0;
        for d in 0..xi.len() {
            let v = k * (xi[d] - xj[d]) + (ti[d] - tj[d]);
            sq += v * v;
        }
        let scale = (1.0 + k) * (self.mag[i] + self.mag[j]);
        (sq.sqrt(), scale)
    }
}

/// Maximum of `f(i, j)` over `i < j`, ties broken towards the
/// lexicographically smallest index pair. Deterministic under any
/// parallel schedule.
fn max_over_pairs<F>(n: usize, f: F) -> Option<(f64, usize, usize)>
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    (0..n)
        .into_par_iter()
        .filter_map(|i| {
            let mut best: Option<(f64, usize, usize)> = None;
            for j in (i + 1)..n {
                let v = f(i, j);
                if best.is_none_or(|(b, _, _)| v > b) {
                    best = Some((v, i, j));
                }
            }
            best
        })
        .reduce_with(pick_max)
}

fn pick_max(a: (f64, usize, usize), b: (f64, usize, usize)) -> (f64, usize, usize) {
    if b.0 > a.0 || (b.0 == a.0 && (b.1, b.2) < (a.1, a.2)) {
        b
    } else {
        a
    }
}

fn check_k(k: f64) -> Result<()> {
    if k.is_finite() && k >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "enrichment constant k must be >= 0, got {k}"
        )))
    }
}

fn check_rate(name: &str, rate: f64, limit: f64) -> Result<()> {
    if rate >= 0.0 && rate < limit {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "{name} must lie in [0, {limit}), got {rate}"
        )))
    }
}

#[derive(Clone, Copy)]
enum Rhs {
    Sum,
    Max,
}

fn kannan_type_violation(
    table: &PairTable,
    k: f64,
    rate: f64,
    rhs: Rhs,
) -> Option<(f64, usize, usize)> {
    max_over_pairs(table.len(), |i, j| {
        let (lhs, scale) = table.enriched_lhs(k, i, j);
        let r = match rhs {
            Rhs::Sum => rate * (table.disp[i] + table.disp[j]),
            Rhs::Max => rate * table.disp[i].max(table.disp[j]),
        };
        lhs - r - ROUNDOFF_SLACK * scale
    })
}

fn certificate(
    class_tag: ContractionClass,
    k: f64,
    rate: f64,
    worst: Option<(f64, usize, usize)>,
    sample: &SampleSet,
) -> ContractionCertificate {
    let (max_violation, witness_pair) = match worst {
        Some((v, i, j)) => (
            v,
            Some((sample.points()[i].clone(), sample.points()[j].clone())),
        ),
        None => (f64::NEG_INFINITY, None),
    };
    let feasible = class_tag
        .rate_limit()
        .is_none_or(|lim| (0.0..lim).contains(&rate));
    ContractionCertificate {
        class_tag,
        k,
        rate,
        max_violation,
        witness_pair,
        feasible,
        sample: sample.clone(),
    }
}

/// Checks `‖Tx - Ty‖ <= c‖x - y‖` on every sample pair.
pub fn check_banach(t: &MappingSpec, c: f64, sample: &SampleSet) -> Result<ContractionCertificate> {
    check_rate("Banach constant c", c, 1.0)?;
    let table = PairTable::build(t, sample)?;
    let worst = max_over_pairs(table.len(), |i, j| {
        let (lhs, scale) = table.enriched_lhs(0.0, i, j);
        let d = norm_pair(&table.x[i], &table.x[j]);
        lhs - c * d - ROUNDOFF_SLACK * scale
    });
    Ok(certificate(ContractionClass::Banach, 0.0, c, worst, sample))
}

/// Checks `‖k(x-y) + Tx - Ty‖ <= a(‖x - Tx‖ + ‖y - Ty‖)` on every sample pair.
///
/// Whenever the Kannan inequality holds, the implied `(k, 2a)` Bianchini
/// inequality is evaluated on the same pairs and must hold too.
pub fn check_enriched_kannan(
    t: &MappingSpec,
    k: f64,
    a: f64,
    sample: &SampleSet,
) -> Result<ContractionCertificate> {
    check_k(k)?;
    check_rate("Kannan constant a", a, 0.5)?;
    let table = PairTable::build(t, sample)?;
    let worst = kannan_type_violation(&table, k, a, Rhs::Sum);
    let cert = certificate(ContractionClass::kannan(k), k, a, worst, sample);
    if cert.holds() {
        let implied = kannan_type_violation(&table, k, 2.0 * a, Rhs::Max);
        if let Some((v, _, _)) = implied {
            if v > 0.0 {
                return Err(Error::Inconsistent(format!(
                    "(k={k}, a={a}) Kannan holds but (k, 2a) Bianchini is violated by {v:e}"
                )));
            }
        }
    }
    Ok(cert)
}

/// Checks `‖k(x-y) + Tx - Ty‖ <= h·max{‖x - Tx‖, ‖y - Ty‖}` on every sample pair.
pub fn check_enriched_bianchini(
    t: &MappingSpec,
    k: f64,
    h: f64,
    sample: &SampleSet,
) -> Result<ContractionCertificate> {
    check_k(k)?;
    check_rate("Bianchini constant h", h, 1.0)?;
    let table = PairTable::build(t, sample)?;
    let worst = kannan_type_violation(&table, k, h, Rhs::Max);
    Ok(certificate(
        ContractionClass::bianchini(k),
        k,
        h,
        worst,
        sample,
    ))
}

/// Checks `<Gx - Gy, x - y> >= 0` on every sample pair. The stored
/// violation is `-<Gx - Gy, x - y>` at the worst pair.
pub fn check_monotone(g: &MappingSpec, sample: &SampleSet) -> Result<ContractionCertificate> {
    let table = PairTable::build(g, sample)?;
    let worst = max_over_pairs(table.len(), |i, j| {
        let (xi, xj) = (table.x[i].as_slice(), table.x[j].as_slice());
        let (gi, gj) = (table.tx[i].as_slice(), table.tx[j].as_slice());
        let mut inner = 0.0;
        for d in 0..xi.len() {
            inner += (gi[d] - gj[d]) * (xi[d] - xj[d]);
        }
        let scale = (table.mag[i] + table.mag[j]).powi(2);
        -inner - ROUNDOFF_SLACK * scale
    });
    Ok(certificate(
        ContractionClass::Monotone,
        0.0,
        0.0,
        worst,
        sample,
    ))
}

/// Smallest Banach constant on the sample, `sup ‖Tx - Ty‖ / ‖x - y‖`.
pub fn estimate_banach_constant(
    t: &MappingSpec,
    sample: &SampleSet,
) -> Result<ContractionCertificate> {
    let table = PairTable::build(t, sample)?;
    let (c, _, _) = max_over_pairs(table.len(), |i, j| {
        let (lhs, _) = table.enriched_lhs(0.0, i, j);
        lhs / norm_pair(&table.x[i], &table.x[j])
    })
    .ok_or(Error::DegenerateSample)?;
    let worst = max_over_pairs(table.len(), |i, j| {
        let (lhs, scale) = table.enriched_lhs(0.0, i, j);
        lhs - c * norm_pair(&table.x[i], &table.x[j]) - ROUNDOFF_SLACK * scale
    });
    Ok(certificate(ContractionClass::Banach, 0.0, c, worst, sample))
}

fn norm_pair(x: &Vector, y: &Vector) -> f64 {
    x.as_slice()
        .iter()
        .zip(y.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Minimal feasible rate for one `k`; `None` when a pair of fixed points
/// with distinct images under `k(x-y) + Tx - Ty` rules out every finite rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateAtK {
    pub k: f64,
    pub rate: Option<f64>,
}

/// Result of inverting a Kannan-type inequality over a grid of `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantEstimate {
    pub best: ContractionCertificate,
    pub per_k: Vec<RateAtK>,
}

impl ConstantEstimate {
    pub fn rate_at(&self, k: f64) -> Option<f64> {
        self.per_k.iter().find(|e| e.k == k).and_then(|e| e.rate)
    }
}

fn min_rate(table: &PairTable, k: f64, rhs: Rhs) -> Result<Option<f64>> {
    let n = table.len();
    // (sup ratio, saw positive denominator, infeasible)
    let per_row: Vec<(f64, bool, bool)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut sup = 0.0f64;
            let mut any = false;
            let mut infeasible = false;
            for j in (i + 1)..n {
                let (num, _) = table.enriched_lhs(k, i, j);
                let den = match rhs {
                    Rhs::Sum => table.disp[i] + table.disp[j],
                    Rhs::Max => table.disp[i].max(table.disp[j]),
                };
                if den > 0.0 {
                    any = true;
                    sup = sup.max(num / den);
                } else if num > ZERO_NUMERATOR {
                    infeasible = true;
                }
            }
            (sup, any, infeasible)
        })
        .collect();
    if !per_row.iter().any(|r| r.1) {
        return Err(Error::DegenerateSample);
    }
    if per_row.iter().any(|r| r.2) {
        return Ok(None);
    }
    Ok(Some(per_row.iter().fold(0.0f64, |m, r| m.max(r.0))))
}

fn estimate_constants(
    t: &MappingSpec,
    sample: &SampleSet,
    k_grid: &[f64],
    rhs: Rhs,
) -> Result<ConstantEstimate> {
    if k_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    for &k in k_grid {
        check_k(k)?;
    }
    let table = PairTable::build(t, sample)?;
    let mut per_k = Vec::with_capacity(k_grid.len());
    for &k in k_grid {
        per_k.push(RateAtK {
            k,
            rate: min_rate(&table, k, rhs)?,
        });
    }

    // smallest rate wins; within TIE_TOLERANCE the smallest k wins
    let mut order: Vec<&RateAtK> = per_k.iter().collect();
    order.sort_by(|a, b| a.k.total_cmp(&b.k));
    let min = order
        .iter()
        .filter_map(|e| e.rate)
        .fold(f64::INFINITY, f64::min);
    let chosen = order
        .iter()
        .find(|e| e.rate.is_some_and(|r| r <= min + TIE_TOLERANCE))
        .copied()
        .unwrap_or(order[0]);

    let class = match rhs {
        Rhs::Sum => ContractionClass::kannan(chosen.k),
        Rhs::Max => ContractionClass::bianchini(chosen.k),
    };
    let best = match chosen.rate {
        Some(rate) => {
            let worst = kannan_type_violation(&table, chosen.k, rate, rhs);
            certificate(class, chosen.k, rate, worst, sample)
        }
        None => {
            let mut c = certificate(class, chosen.k, f64::INFINITY, None, sample);
            c.max_violation = f64::INFINITY;
            c
        }
    };
    Ok(ConstantEstimate { best, per_k })
}

/// For each `k`, the least `a` with `‖k(x-y)+Tx-Ty‖ <= a(‖x-Tx‖+‖y-Ty‖)` on
/// the sample. The best certificate is infeasible when every `a_min >= 1/2`.
pub fn estimate_kannan_constants(
    t: &MappingSpec,
    sample: &SampleSet,
    k_grid: &[f64],
) -> Result<ConstantEstimate> {
    estimate_constants(t, sample, k_grid, Rhs::Sum)
}

/// Bianchini analogue of [`estimate_kannan_constants`]; infeasible when every `h_min >= 1`.
pub fn estimate_bianchini_constants(
    t: &MappingSpec,
    sample: &SampleSet,
    k_grid: &[f64],
) -> Result<ConstantEstimate> {
    estimate_constants(t, sample, k_grid, Rhs::Max)
}

/// A certified geometric rate for the averaged iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateCertificate {
    pub k: f64,
    /// `1 / (k + 1)`.
    pub lambda: f64,
    /// Factor by which successive step norms shrink: `a/(1-a)` for
    /// Kannan-type, `h` for Bianchini-type, `c` for Banach.
    pub rate: f64,
    pub certificate: ContractionCertificate,
}

/// Estimates Kannan, Bianchini and Banach constants on the sample and
/// returns whichever feasible class yields the smallest iteration rate.
/// `Ok(None)` when none is feasible.
pub fn certify_rate(
    t: &MappingSpec,
    sample: &SampleSet,
    k_grid: &[f64],
) -> Result<Option<RateCertificate>> {
    let mut candidates = Vec::new();
    let kannan = estimate_kannan_constants(t, sample, k_grid)?;
    if kannan.best.holds() {
        let rate = contraction_rate_kannan(kannan.best.rate)?;
        candidates.push((rate, kannan.best));
    }
    let bianchini = estimate_bianchini_constants(t, sample, k_grid)?;
    if bianchini.best.holds() {
        candidates.push((bianchini.best.rate, bianchini.best));
    }
    let banach = estimate_banach_constant(t, sample)?;
    if banach.holds() {
        candidates.push((banach.rate, banach));
    }
    let mut best: Option<(f64, ContractionCertificate)> = None;
    for (rate, cert) in candidates {
        if best.as_ref().is_none_or(|(r, _)| rate < *r) {
            best = Some((rate, cert));
        }
    }
    best.map(|(rate, certificate)| {
        Ok(RateCertificate {
            k: certificate.k,
            lambda: auto_lambda(certificate.k)?,
            rate,
            certificate,
        })
    })
    .transpose()
}
