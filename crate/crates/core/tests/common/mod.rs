#![allow(dead_code)]

use enriched_fixpoint::apps::{self, Gamma, SfpInstance, VipInstance};
use enriched_fixpoint::certify::{self, ContractionCertificate, ContractionClass, SampleSet};
use enriched_fixpoint::convex::ConvexSetSpec;
use enriched_fixpoint::mapping::Piece;
use enriched_fixpoint::{MappingSpec, Matrix, Vector};

pub fn v(xs: &[f64]) -> Vector {
    Vector::new(xs.to_vec()).unwrap()
}

/// A mapping with a start point, a sampling box that holds its orbit, and
/// its fixed point worked out by hand.
pub struct Case {
    pub name: &'static str,
    pub map: MappingSpec,
    pub x0: Vector,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub fixed_point: Vector,
}

impl Case {
    pub fn dim(&self) -> usize {
        self.x0.dim()
    }

    /// Grid plus seeded random points on the sampling box.
    pub fn witness(&self, seed: u64) -> SampleSet {
        let per_axis = if self.dim() == 1 { 101 } else { 21 };
        SampleSet::grid_plus_random(&self.lower, &self.upper, per_axis, 100, seed).unwrap()
    }
}

pub fn unit_sfp() -> SfpInstance {
    SfpInstance {
        c: ConvexSetSpec::cube(2, 0.0, 1.0).unwrap(),
        q: ConvexSetSpec::cube(2, 2.0, 3.0).unwrap(),
        a: Matrix::identity(2).scaled(2.0),
        gamma: Gamma::Value(0.25),
    }
}

pub fn degenerate_sfp() -> SfpInstance {
    SfpInstance {
        c: ConvexSetSpec::cube(1, 0.0, 0.0).unwrap(),
        q: ConvexSetSpec::cube(1, 1.0, 1.0).unwrap(),
        a: Matrix::identity(1),
        gamma: Gamma::Value(0.5),
    }
}

pub fn vip_1d() -> VipInstance {
    VipInstance {
        c: ConvexSetSpec::cube(1, 0.0, 2.0).unwrap(),
        g: MappingSpec::affine(Matrix::identity(1), v(&[-1.0])).unwrap(),
        gamma: 0.5,
    }
}

pub fn vip_2d() -> VipInstance {
    VipInstance {
        c: ConvexSetSpec::cube(2, 0.0, 3.0).unwrap(),
        g: MappingSpec::affine(Matrix::identity(2).scaled(2.0), v(&[-2.0, -2.0])).unwrap(),
        gamma: 0.25,
    }
}

pub fn piecewise_quarter_fifth() -> MappingSpec {
    MappingSpec::piecewise(
        vec![0.0, 0.5, 1.0],
        vec![
            Piece {
                slope: 0.25,
                intercept: 0.0,
            },
            Piece {
                slope: 0.2,
                intercept: 0.0,
            },
        ],
    )
    .unwrap()
}

pub fn catalog() -> Vec<Case> {
    let unit = |name, map, x0: f64, p: f64| Case {
        name,
        map,
        x0: v(&[x0]),
        lower: vec![0.0],
        upper: vec![1.0],
        fixed_point: v(&[p]),
    };
    vec![
        unit("reflection", MappingSpec::Reflection1D, 0.0, 0.5),
        unit("scale 1/2", MappingSpec::scale(0.5).unwrap(), 1.0, 0.0),
        unit(
            "scale 1/3",
            MappingSpec::scale(1.0 / 3.0).unwrap(),
            1.0,
            0.0,
        ),
        unit("piecewise x/4 | x/5", piecewise_quarter_fifth(), 1.0, 0.0),
        Case {
            name: "scale -3",
            map: MappingSpec::scale(-3.0).unwrap(),
            x0: v(&[1.0]),
            lower: vec![-1.0],
            upper: vec![1.0],
            fixed_point: v(&[0.0]),
        },
        unit(
            "averaged reflection",
            MappingSpec::Reflection1D.averaged(2.0 / 3.0).unwrap(),
            0.0,
            0.5,
        ),
        unit(
            "averaged scale",
            MappingSpec::scale(0.5).unwrap().averaged(0.5).unwrap(),
            1.0,
            0.0,
        ),
        Case {
            name: "affine 2-d",
            map: MappingSpec::affine(
                Matrix::from_rows(vec![vec![0.5, 0.2], vec![-0.1, 0.4]]).unwrap(),
                v(&[0.1, 0.2]),
            )
            .unwrap(),
            x0: v(&[0.0, 0.0]),
            lower: vec![-1.0, -1.0],
            upper: vec![1.0, 1.0],
            // (I - M)^{-1} b
            fixed_point: v(&[0.3125, 0.28125]),
        },
        Case {
            name: "point reflection 2-d",
            map: MappingSpec::affine(Matrix::identity(2).scaled(-1.0), v(&[1.0, 1.0])).unwrap(),
            x0: v(&[0.0, 0.0]),
            lower: vec![0.0, 0.0],
            upper: vec![1.0, 1.0],
            fixed_point: v(&[0.5, 0.5]),
        },
        Case {
            name: "sfp operator",
            map: apps::sfp_operator(&unit_sfp()).unwrap(),
            x0: v(&[0.0, 0.0]),
            lower: vec![0.0, 0.0],
            upper: vec![1.0, 1.0],
            fixed_point: v(&[1.0, 1.0]),
        },
        Case {
            name: "vip operator 1-d",
            map: apps::vip_operator(&vip_1d()).unwrap(),
            x0: v(&[0.0]),
            lower: vec![0.0],
            upper: vec![2.0],
            fixed_point: v(&[1.0]),
        },
        Case {
            name: "vip operator 2-d",
            map: apps::vip_operator(&vip_2d()).unwrap(),
            x0: v(&[0.0, 0.0]),
            lower: vec![0.0, 0.0],
            upper: vec![3.0, 3.0],
            fixed_point: v(&[1.0, 1.0]),
        },
    ]
}

pub const K_GRID: [f64; 8] = [0.0, 0.25, 0.5, 0.75, 1.0, 2.0, 3.0, 4.0];

/// Re-runs the check behind `cert` on another sample.
pub fn recheck(
    t: &MappingSpec,
    cert: &ContractionCertificate,
    sample: &SampleSet,
) -> ContractionCertificate {
    match cert.class_tag {
        ContractionClass::Kannan | ContractionClass::EnrichedKannan => {
            certify::check_enriched_kannan(t, cert.k, cert.rate, sample).unwrap()
        }
        ContractionClass::Bianchini | ContractionClass::EnrichedBianchini => {
            certify::check_enriched_bianchini(t, cert.k, cert.rate, sample).unwrap()
        }
        ContractionClass::Banach => certify::check_banach(t, cert.rate, sample).unwrap(),
        ContractionClass::Monotone => certify::check_monotone(t, sample).unwrap(),
    }
}

pub struct CertifiedRun {
    pub certificate: certify::RateCertificate,
    /// The same constants re-checked on the witness sample plus the orbit.
    pub on_orbit: ContractionCertificate,
    pub trace: enriched_fixpoint::solve::IterationTrace,
}

/// Certifies `case.map` on its witness sample, then iterates with the
/// certified λ and rate down to `tol`.
pub fn certified_run(case: &Case, tol: f64) -> CertifiedRun {
    use enriched_fixpoint::solve::{krasnoselskij, SolveConfig};
    let witness = case.witness(0);
    let certificate = certify::certify_rate(&case.map, &witness, &K_GRID)
        .unwrap()
        .unwrap_or_else(|| panic!("{} has no certificate", case.name));
    let cfg = SolveConfig::with_lambda(certificate.lambda)
        .rate(certificate.rate)
        .tol(tol)
        .max_iter(100_000);
    let trace = krasnoselskij(&case.map, &case.x0, &cfg).unwrap();
    let sample = SampleSet::deduplicated(
        witness
            .points()
            .iter()
            .chain(&trace.iterates)
            .cloned()
            .collect(),
        "witness + orbit",
        0,
    )
    .unwrap();
    let on_orbit = recheck(&case.map, &certificate.certificate, &sample);
    CertifiedRun {
        certificate,
        on_orbit,
        trace,
    }
}
