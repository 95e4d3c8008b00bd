//! Split feasibility and variational inequality problems as fixed-point
//! problems for projection operators.
//!
//! * SFP: find `x ∈ C` with `Ax ∈ Q`. Solutions are the fixed points of the
//!   CQ operator `T = P_C(I - γAᵀ(I - P_Q)A)` for `γ ∈ (0, 2/ρ)`, `ρ` the
//!   spectral radius of `AᵀA`.
//! * VIP: find `x* ∈ C` with `<G(x*), z - x*> >= 0` for all `z ∈ C`.
//!   Solutions are the fixed points of `T = P_C(I - γG)` for any `γ > 0`.
//!
//! Both solvers run the Krasnoselskij engine on `T`, then report residuals
//! and attach an empirical certificate of the contraction hypothesis on an
//! orbit-plus-sample witness set. The certificate is informative; a failing
//! one does not stop the solve.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::certify::{self, ContractionCertificate, SampleSet};
use crate::convex::ConvexSetSpec;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, Matrix, Vector};
use crate::mapping::MappingSpec;
use crate::solve::{self, IterationTrace, Lambda, SolveConfig};

pub const SPECTRAL_TOL: f64 = 1e-12;
pub const SPECTRAL_MAX_ITER: usize = 10_000;

/// Step size choice; `Auto` resolves to `1/ρ` for the SFP.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gamma {
    Auto,
    Value(f64),
}

impl Serialize for Gamma {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Gamma::Auto => s.serialize_str("auto"),
            Gamma::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Gamma {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Gamma::Value(v)),
            Raw::Str(s) if s == "auto" => Ok(Gamma::Auto),
            Raw::Str(s) => Err(serde::de::Error::custom(format!(
                "expected a number or \"auto\", got {s:?}"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SfpInstance {
    #[serde(rename = "C")]
    pub c: ConvexSetSpec,
    #[serde(rename = "Q")]
    pub q: ConvexSetSpec,
    #[serde(rename = "A")]
    pub a: Matrix,
    pub gamma: Gamma,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VipInstance {
    #[serde(rename = "C")]
    pub c: ConvexSetSpec,
    #[serde(rename = "G")]
    pub g: MappingSpec,
    pub gamma: f64,
}

/// Problem instance as read from JSON: `{"type": "sfp" | "vip", ...}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Instance {
    Sfp(SfpInstance),
    Vip(VipInstance),
}

#[derive(Deserialize)]
#[serde(rename_all = "lowercase")]
enum InstanceRepr {
    Sfp(SfpInstance),
    Vip(VipInstance),
}

impl<'de> Deserialize<'de> for Instance {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(
            match crate::tagged::deserialize_tagged::<D, InstanceRepr>(d, "type")? {
                InstanceRepr::Sfp(s) => Instance::Sfp(s),
                InstanceRepr::Vip(v) => Instance::Vip(v),
            },
        )
    }
}

impl SfpInstance {
    pub fn validate(&self) -> Result<()> {
        self.c.validate()?;
        self.q.validate()?;
        if self.a.cols() != self.c.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.c.dim(),
                found: self.a.cols(),
            });
        }
        if self.a.rows() != self.q.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.q.dim(),
                found: self.a.rows(),
            });
        }
        if let Gamma::Value(g) = self.gamma {
            if !(g.is_finite() && g > 0.0) {
                return Err(Error::invalid(format!("gamma must be positive, got {g}")));
            }
        }
        Ok(())
    }

    /// `ρ(AᵀA)` and the resolved step size.
    pub fn resolve_gamma(&self) -> Result<(f64, f64)> {
        let rho = spectral_radius_ata(&self.a)?.value;
        let gamma = match self.gamma {
            Gamma::Auto => 1.0 / rho,
            Gamma::Value(g) => g,
        };
        if !(gamma > 0.0 && gamma * rho < 2.0) {
            return Err(Error::GammaOutOfRange { gamma, rho });
        }
        Ok((rho, gamma))
    }
}

impl VipInstance {
    pub fn validate(&self) -> Result<()> {
        self.c.validate()?;
        self.g.validate()?;
        let d = self.g.domain();
        if d.dim != self.c.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.c.dim(),
                found: d.dim,
            });
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::invalid(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// Result of the power iteration on `AᵀA`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralEstimate {
    pub value: f64,
    pub iterations: usize,
    /// False when the iteration cap was hit; `value` is then the best
    /// Rayleigh quotient seen.
    pub converged: bool,
}

/// Largest eigenvalue of `AᵀA` by power iteration.
///
/// Starts from the normalised all-ones vector and stops once the eigen-residual
/// `‖Bv - μv‖` drops below `1e-12·μ`. A start vector annihilated by `B` is
/// replaced by a fixed non-symmetric perturbation.
pub fn spectral_radius_ata(a: &Matrix) -> Result<SpectralEstimate> {
    if a.is_zero() {
        return Err(Error::invalid(
            "spectral radius requested for the zero matrix",
        ));
    }
    let b = a.gram();
    let n = b.cols();
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut bv = b.mul_slice(&v);
    if norm(&bv) == 0.0 {
        v = (0..n)
            .map(|i| 1.0 + (i as f64 + 1.0) / (n as f64 + 1.0).powi(2))
            .collect();
        let s = norm(&v);
        v.iter_mut().for_each(|x| *x /= s);
        bv = b.mul_slice(&v);
        if norm(&bv) == 0.0 {
            // fall back to the unit vectors; the matrix is nonzero so one of them works
            let j = (0..n)
                .find(|&j| (0..n).any(|i| b.get(i, j) != 0.0))
                .unwrap();
            v = vec![0.0; n];
            v[j] = 1.0;
            bv = b.mul_slice(&v);
        }
    }
    let mut mu = dot(&v, &bv) / dot(&v, &v);
    for it in 1..=SPECTRAL_MAX_ITER {
        let residual: f64 = bv
            .iter()
            .zip(&v)
            .map(|(x, y)| (x - mu * y).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual <= SPECTRAL_TOL * mu.abs() {
            return Ok(SpectralEstimate {
                value: mu,
                iterations: it - 1,
                converged: true,
            });
        }
        let s = norm(&bv);
        v = bv.iter().map(|x| x / s).collect();
        bv = b.mul_slice(&v);
        mu = dot(&v, &bv) / dot(&v, &v);
    }
    Ok(SpectralEstimate {
        value: mu,
        iterations: SPECTRAL_MAX_ITER,
        converged: false,
    })
}

/// The CQ operator `P_C(I - γAᵀ(I - P_Q)A)` with `γ` resolved and range-checked.
pub fn sfp_operator(inst: &SfpInstance) -> Result<MappingSpec> {
    inst.validate()?;
    let (_, gamma) = inst.resolve_gamma()?;
    Ok(MappingSpec::SfpOperator {
        c: inst.c.clone(),
        q: inst.q.clone(),
        a: inst.a.clone(),
        gamma,
    })
}

/// `P_C(I - γG)`.
pub fn vip_operator(inst: &VipInstance) -> Result<MappingSpec> {
    inst.validate()?;
    Ok(MappingSpec::VipOperator {
        c: inst.c.clone(),
        g: Box::new(inst.g.clone()),
        gamma: inst.gamma,
    })
}

/// Knobs shared by the SFP and VIP drivers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AppOptions {
    /// Residual threshold for declaring a fixed point a solution.
    pub feasibility_tol: f64,
    pub seed: u64,
    /// Seeded points of `C` added to the certification sample and used for
    /// the sampled VI residual.
    pub sample_points: usize,
    /// Half-width of the sampling box around the iterate for unbounded `C`.
    pub sample_extent: f64,
    pub k_grid: Vec<f64>,
}

impl Default for AppOptions {
    fn default() -> Self {
        AppOptions {
            feasibility_tol: 1e-8,
            seed: 0,
            sample_points: 100,
            sample_extent: 1.0,
            k_grid: vec![0.0, 0.25, 0.5, 1.0, 2.0, 4.0],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SfpOutcome {
    /// Converged to a point with both residuals within tolerance.
    Solved,
    /// Converged to a fixed point that is not a solution.
    Infeasible,
    NotConverged,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SfpReport {
    pub trace: IterationTrace,
    pub solution: Vector,
    pub rho: f64,
    pub gamma: f64,
    /// `dist(x*, C)`.
    pub dist_to_c: f64,
    /// `‖Ax* - P_Q(Ax*)‖`.
    pub image_residual: f64,
    pub outcome: SfpOutcome,
    pub certificate: Option<ContractionCertificate>,
    /// Why no certificate is attached, if none is.
    pub certificate_note: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VipOutcome {
    Solved,
    /// Converged, but the sampled VI residual is below `-feasibility_tol`.
    ResidualFailure,
    NotConverged,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VipReport {
    pub trace: IterationTrace,
    pub solution: Vector,
    /// `min_z <G(x*), z - x*>` over the sampled `z ∈ C`.
    pub vi_residual: f64,
    pub outcome: VipOutcome,
    pub monotone: Option<ContractionCertificate>,
    pub certificate: Option<ContractionCertificate>,
    pub certificate_note: Option<String>,
}

fn sample_in(
    set: &ConvexSetSpec,
    anchor: &Vector,
    opts: &AppOptions,
    salt: u64,
) -> Result<Vec<Vector>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(salt));
    set.sample_points(opts.sample_points, &mut rng, anchor, opts.sample_extent)
}

/// Witness set: points of `C` plus the orbit.
fn orbit_sample(c: &ConvexSetSpec, trace: &IterationTrace, opts: &AppOptions) -> Result<SampleSet> {
    let mut pts = sample_in(c, trace.last(), opts, 1)?;
    pts.extend(trace.iterates.iter().cloned());
    SampleSet::deduplicated(
        pts,
        format!(
            "{} seeded points of C + {}-point orbit",
            opts.sample_points,
            trace.iterates.len()
        ),
        opts.seed,
    )
}

/// Resolves `Lambda::Auto` from a certificate computed on seeded points of `C`.
fn resolve_auto(
    t: &MappingSpec,
    c: &ConvexSetSpec,
    x0: &Vector,
    cfg: &SolveConfig,
    opts: &AppOptions,
) -> Result<SolveConfig> {
    let mut cfg = cfg.clone();
    if cfg.lambda == Lambda::Auto {
        let pts = sample_in(c, x0, opts, 2)?;
        let sample = SampleSet::deduplicated(pts, "seeded points of C", opts.seed)?;
        let rc =
            certify::certify_rate(t, &sample, &opts.k_grid)?.ok_or(Error::AutoLambdaUnresolved)?;
        cfg.lambda = Lambda::Fixed(rc.lambda);
        if cfg.rate.is_none() {
            cfg.rate = Some(rc.rate);
        }
    }
    Ok(cfg)
}

/// Krasnoselskij iteration on the CQ operator.
///
/// `x0` is projected onto `C` first. After the run the enriched Kannan
/// constants of `T` are estimated on an orbit-plus-`C` sample and the best
/// certificate is attached.
pub fn solve_sfp(
    inst: &SfpInstance,
    cfg: &SolveConfig,
    x0: &Vector,
    opts: &AppOptions,
) -> Result<SfpReport> {
    inst.validate()?;
    let (rho, gamma) = inst.resolve_gamma()?;
    let t = MappingSpec::SfpOperator {
        c: inst.c.clone(),
        q: inst.q.clone(),
        a: inst.a.clone(),
        gamma,
    };
    let start = inst.c.project(x0)?;
    let cfg = resolve_auto(&t, &inst.c, &start, cfg, opts)?;
    let trace = solve::krasnoselskij(&t, &start, &cfg)?;

    let x = trace.last().clone();
    let dist_to_c = inst.c.distance(&x)?;
    let ax = inst.a.mul_vec(&x)?;
    let image_residual = inst.q.distance(&ax)?;
    let outcome = if !trace.converged() {
        SfpOutcome::NotConverged
    } else if dist_to_c <= opts.feasibility_tol && image_residual <= opts.feasibility_tol {
        SfpOutcome::Solved
    } else {
        SfpOutcome::Infeasible
    };

    let (certificate, certificate_note) = match orbit_sample(&inst.c, &trace, opts)
        .and_then(|s| certify::estimate_kannan_constants(&t, &s, &opts.k_grid))
    {
        Ok(est) => (Some(est.best), None),
        Err(e) => (None, Some(e.to_string())),
    };

    Ok(SfpReport {
        solution: x,
        trace,
        rho,
        gamma,
        dist_to_c,
        image_residual,
        outcome,
        certificate,
        certificate_note,
    })
}

/// `min <G(x), z - x>` over seeded points `z ∈ C` (and `z = x` itself).
pub fn vi_residual(inst: &VipInstance, x: &Vector, opts: &AppOptions) -> Result<f64> {
    let gx = inst.g.apply(x)?;
    let mut worst = 0.0f64;
    for z in sample_in(&inst.c, x, opts, 3)? {
        worst = worst.min(gx.dot(&z.sub(x)?)?);
    }
    Ok(worst)
}

/// Krasnoselskij iteration on `P_C(I - γG)`, followed by the sampled VI
/// residual check, a monotonicity check of `G` and an enriched Bianchini
/// certification attempt of `T`.
pub fn solve_vip(
    inst: &VipInstance,
    cfg: &SolveConfig,
    x0: &Vector,
    opts: &AppOptions,
) -> Result<VipReport> {
    let t = vip_operator(inst)?;
    let cfg = resolve_auto(&t, &inst.c, x0, cfg, opts)?;
    let trace = solve::krasnoselskij(&t, x0, &cfg)?;
    let x = trace.last().clone();
    let vi = vi_residual(inst, &x, opts)?;
    let outcome = if !trace.converged() {
        VipOutcome::NotConverged
    } else if vi >= -opts.feasibility_tol {
        VipOutcome::Solved
    } else {
        VipOutcome::ResidualFailure
    };

    let sample = orbit_sample(&inst.c, &trace, opts);
    let monotone = sample
        .as_ref()
        .ok()
        .map(|s| certify::check_monotone(&inst.g, s))
        .transpose()?;
    let (certificate, certificate_note) =
        match sample.and_then(|s| certify::estimate_bianchini_constants(&t, &s, &opts.k_grid)) {
            Ok(est) => (Some(est.best), None),
            Err(e) => (None, Some(e.to_string())),
        };

    Ok(VipReport {
        solution: x,
        trace,
        vi_residual: vi,
        outcome,
        monotone,
        certificate,
        certificate_note,
    })
}
