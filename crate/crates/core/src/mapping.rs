//! The catalog of self-maps and the averaging transform.
//!
//! A [`MappingSpec`] is an immutable description of a map `T: X -> X` with
//! `X` a subset of R^n. Every variant is evaluated by [`MappingSpec::apply`];
//! [`MappingSpec::averaged`] wraps a map into `T_λ x = (1-λ)x + λTx`, which
//! has the same fixed points as `T`.

use serde::{Deserialize, Serialize};

use crate::convex::ConvexSetSpec;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

/// One affine piece `x ↦ slope·x + intercept` of a [`MappingSpec::PiecewiseTable`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub slope: f64,
    pub intercept: f64,
}

impl Piece {
    fn eval(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "variant")]
pub enum MappingSpec {
    /// `Tx = 1 - x` on `[0, 1]`.
    Reflection1D,
    /// `Tx = c·x` on R.
    Scale1D { c: f64 },
    /// `x ↦ Mx + b` on R^n.
    Affine {
        #[serde(rename = "M")]
        matrix: Matrix,
        b: Vector,
    },
    /// `x ↦ (1-λ)x + λ·inner(x)`.
    Averaged {
        inner: Box<MappingSpec>,
        lambda: f64,
    },
    /// `P_C(x - γ·Aᵀ(Ax - P_Q(Ax)))`.
    SfpOperator {
        #[serde(rename = "C")]
        c: ConvexSetSpec,
        #[serde(rename = "Q")]
        q: ConvexSetSpec,
        #[serde(rename = "A")]
        a: Matrix,
        gamma: f64,
    },
    /// `P_C(x - γ·G(x))`.
    VipOperator {
        #[serde(rename = "C")]
        c: ConvexSetSpec,
        #[serde(rename = "G")]
        g: Box<MappingSpec>,
        gamma: f64,
    },
    /// Right-continuous 1-D piecewise-affine map on `[breakpoints[0], breakpoints[last]]`.
    /// Piece `i` acts on `[breakpoints[i], breakpoints[i+1])`; the last piece
    /// also owns the right endpoint.
    PiecewiseTable {
        breakpoints: Vec<f64>,
        pieces: Vec<Piece>,
    },
}

#[derive(Deserialize)]
enum MappingRepr {
    Reflection1D {},
    Scale1D {
        c: f64,
    },
    Affine {
        #[serde(rename = "M")]
        matrix: Matrix,
        b: Vector,
    },
    Averaged {
        inner: Box<MappingSpec>,
        lambda: f64,
    },
    SfpOperator {
        #[serde(rename = "C")]
        c: ConvexSetSpec,
        #[serde(rename = "Q")]
        q: ConvexSetSpec,
        #[serde(rename = "A")]
        a: Matrix,
        gamma: f64,
    },
    VipOperator {
        #[serde(rename = "C")]
        c: ConvexSetSpec,
        #[serde(rename = "G")]
        g: Box<MappingSpec>,
        gamma: f64,
    },
    PiecewiseTable {
        breakpoints: Vec<f64>,
        pieces: Vec<Piece>,
    },
}

impl<'de> Deserialize<'de> for MappingSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(
            match crate::tagged::deserialize_tagged::<D, MappingRepr>(d, "variant")? {
                MappingRepr::Reflection1D {} => MappingSpec::Reflection1D,
                MappingRepr::Scale1D { c } => MappingSpec::Scale1D { c },
                MappingRepr::Affine { matrix, b } => MappingSpec::Affine { matrix, b },
                MappingRepr::Averaged { inner, lambda } => MappingSpec::Averaged { inner, lambda },
                MappingRepr::SfpOperator { c, q, a, gamma } => {
                    MappingSpec::SfpOperator { c, q, a, gamma }
                }
                MappingRepr::VipOperator { c, g, gamma } => {
                    MappingSpec::VipOperator { c, g, gamma }
                }
                MappingRepr::PiecewiseTable {
                    breakpoints,
                    pieces,
                } => MappingSpec::PiecewiseTable {
                    breakpoints,
                    pieces,
                },
            },
        )
    }
}

/// Where a mapping may be evaluated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Domain {
    pub dim: usize,
    /// Closed interval for 1-D domain-restricted maps, `None` for all of R^n.
    pub interval: Option<(f64, f64)>,
}

impl Domain {
    pub fn check(&self, x: &Vector) -> Result<()> {
        x.check_dim(self.dim)?;
        if let Some((lo, hi)) = self.interval {
            let v = x[0];
            if !(lo..=hi).contains(&v) {
                return Err(Error::OutsideDomain {
                    point: x.as_slice().to_vec(),
                    lower: lo,
                    upper: hi,
                });
            }
        }
        Ok(())
    }
}

impl MappingSpec {
    pub fn scale(c: f64) -> Result<Self> {
        let m = MappingSpec::Scale1D { c };
        m.validate()?;
        Ok(m)
    }

    pub fn affine(matrix: Matrix, b: Vector) -> Result<Self> {
        let m = MappingSpec::Affine { matrix, b };
        m.validate()?;
        Ok(m)
    }

    /// Constant map `x ↦ value` on R.
    pub fn constant(value: f64) -> Result<Self> {
        Self::affine(Matrix::diagonal(&[0.0]), Vector::scalar(value)?)
    }

    pub fn piecewise(breakpoints: Vec<f64>, pieces: Vec<Piece>) -> Result<Self> {
        let m = MappingSpec::PiecewiseTable {
            breakpoints,
            pieces,
        };
        m.validate()?;
        Ok(m)
    }

    /// The averaged map `x ↦ (1-λ)x + λT(x)`.
    pub fn averaged(&self, lambda: f64) -> Result<MappingSpec> {
        check_lambda(lambda)?;
        Ok(MappingSpec::Averaged {
            inner: Box::new(self.clone()),
            lambda,
        })
    }

    /// Checks the structural invariants of the variant, recursively.
    pub fn validate(&self) -> Result<()> {
        match self {
            MappingSpec::Reflection1D => Ok(()),
            MappingSpec::Scale1D { c } => {
                if c.is_finite() {
                    Ok(())
                } else {
                    Err(Error::NonFinite(format!("scale factor {c}")))
                }
            }
            MappingSpec::Affine { matrix, b } => {
                if !matrix.is_square() {
                    return Err(Error::invalid(format!(
                        "affine matrix must be square, got {}x{}",
                        matrix.rows(),
                        matrix.cols()
                    )));
                }
                b.check_dim(matrix.rows())
            }
            MappingSpec::Averaged { inner, lambda } => {
                check_lambda(*lambda)?;
                inner.validate()
            }
            MappingSpec::SfpOperator { c, q, a, gamma } => {
                c.validate()?;
                q.validate()?;
                if a.cols() != c.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: c.dim(),
                        found: a.cols(),
                    });
                }
                if a.rows() != q.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: q.dim(),
                        found: a.rows(),
                    });
                }
                check_gamma(*gamma)
            }
            MappingSpec::VipOperator { c, g, gamma } => {
                c.validate()?;
                g.validate()?;
                let gd = g.domain();
                if gd.interval.is_some() {
                    return Err(Error::invalid(
                        "VIP operator G must be defined on all of R^n",
                    ));
                }
                if gd.dim != c.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: c.dim(),
                        found: gd.dim,
                    });
                }
                check_gamma(*gamma)
            }
            MappingSpec::PiecewiseTable {
                breakpoints,
                pieces,
            } => validate_table(breakpoints, pieces),
        }
    }

    pub fn domain(&self) -> Domain {
        match self {
            MappingSpec::Reflection1D => Domain {
                dim: 1,
                interval: Some((0.0, 1.0)),
            },
            MappingSpec::Scale1D { .. } => Domain {
                dim: 1,
                interval: None,
            },
            MappingSpec::Affine { matrix, .. } => Domain {
                dim: matrix.cols(),
                interval: None,
            },
            MappingSpec::Averaged { inner, .. } => inner.domain(),
            MappingSpec::SfpOperator { c, .. } | MappingSpec::VipOperator { c, .. } => Domain {
                dim: c.dim(),
                interval: None,
            },
            MappingSpec::PiecewiseTable { breakpoints, .. } => Domain {
                dim: 1,
                interval: Some((breakpoints[0], *breakpoints.last().unwrap())),
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.domain().dim
    }

    /// Evaluates `T(x)`.
    pub fn apply(&self, x: &Vector) -> Result<Vector> {
        self.domain().check(x)?;
        match self {
            MappingSpec::Reflection1D => Vector::from_raw(vec![1.0 - x[0]]),
            MappingSpec::Scale1D { c } => Vector::from_raw(vec![c * x[0]]),
            MappingSpec::Affine { matrix, b } => matrix.mul_vec(x)?.add(b),
            MappingSpec::Averaged { inner, lambda } => {
                let tx = inner.apply(x)?;
                if *lambda == 1.0 {
                    Ok(tx)
                } else {
                    x.lerp(&tx, *lambda)
                }
            }
            MappingSpec::SfpOperator { c, q, a, gamma } => {
                let ax = a.mul_vec(x)?;
                let residual = ax.sub(&q.project(&ax)?)?;
                let grad = a.mul_transpose_vec(&residual)?;
                c.project(&x.axpy(-gamma, &grad)?)
            }
            MappingSpec::VipOperator { c, g, gamma } => {
                let gx = g.apply(x)?;
                c.project(&x.axpy(-gamma, &gx)?)
            }
            MappingSpec::PiecewiseTable {
                breakpoints,
                pieces,
            } => {
                let v = x[0];
                // partition_point gives the number of breakpoints <= v
                let idx = breakpoints
                    .partition_point(|b| *b <= v)
                    .saturating_sub(1)
                    .min(pieces.len() - 1);
                Vector::from_raw(vec![pieces[idx].eval(v)])
            }
        }
    }

    /// Residual `‖x - T(x)‖`.
    pub fn displacement(&self, x: &Vector) -> Result<f64> {
        Ok(x.sub(&self.apply(x)?)?.norm())
    }
}

/// Euclidean distance between two points.
pub fn norm_dist(x: &Vector, y: &Vector) -> Result<f64> {
    Ok(x.sub(y)?.norm())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "lambda must lie in (0, 1], got {lambda}"
        )))
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "gamma must be positive, got {gamma}"
        )))
    }
}

fn validate_table(breakpoints: &[f64], pieces: &[Piece]) -> Result<()> {
    if breakpoints.len() < 2 {
        return Err(Error::invalid(
            "piecewise table needs at least two breakpoints",
        ));
    }
    if pieces.len() + 1 != breakpoints.len() {
        return Err(Error::invalid(format!(
            "piecewise table has {} breakpoints but {} pieces",
            breakpoints.len(),
            pieces.len()
        )));
    }
    if breakpoints.iter().any(|b| !b.is_finite())
        || pieces
            .iter()
            .any(|p| !p.slope.is_finite() || !p.intercept.is_finite())
    {
        return Err(Error::NonFinite("piecewise table entry".into()));
    }
    if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("breakpoints must be strictly increasing"));
    }
    let (lo, hi) = (breakpoints[0], *breakpoints.last().unwrap());
    for (i, p) in pieces.iter().enumerate() {
        // affine image of a closed interval is spanned by its endpoints
        for end in [breakpoints[i], breakpoints[i + 1]] {
            let y = p.eval(end);
            if !(lo..=hi).contains(&y) {
                return Err(Error::invalid(format!(
                    "piece {i} maps {end} to {y}, outside the domain [{lo}, {hi}]"
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: f64) -> Vector {
        Vector::scalar(x).unwrap()
    }

    #[test]
    fn reflection_examples() {
        let t = MappingSpec::Reflection1D;
        assert!((t.apply(&s(0.2)).unwrap()[0] - 0.8).abs() < 1e-16);
        assert!(matches!(t.apply(&s(1.5)), Err(Error::OutsideDomain { .. })));
        assert!(matches!(
            t.apply(&Vector::zeros(2)),
            Err(Error::DimensionMismatch {
                expected: 1,
                found: 2
            })
        ));
    }

    #[test]
    fn affine_example() {
        let t = MappingSpec::affine(Matrix::diagonal(&[0.5]), s(0.25)).unwrap();
        assert_eq!(t.apply(&s(1.0)).unwrap()[0], 0.75);
    }

    #[test]
    fn averaged_examples() {
        let r = MappingSpec::Reflection1D;
        let avg = r.averaged(2.0 / 3.0).unwrap();
        assert!((avg.apply(&s(0.5)).unwrap()[0] - 0.5).abs() < 1e-16);
        assert!((avg.apply(&s(0.0)).unwrap()[0] - 2.0 / 3.0).abs() < 1e-15);

        let one = r.averaged(1.0).unwrap();
        for x in [0.0, 0.1, 0.77, 1.0] {
            assert_eq!(one.apply(&s(x)).unwrap(), r.apply(&s(x)).unwrap());
        }

        let half = MappingSpec::scale(0.5).unwrap().averaged(0.5).unwrap();
        assert_eq!(half.apply(&s(1.0)).unwrap()[0], 0.75);

        assert!(r.averaged(0.0).is_err());
        assert!(r.averaged(1.5).is_err());
    }

    #[test]
    fn norm_dist_examples() {
        let a = Vector::zeros(2);
        let b = Vector::new(vec![3.0, 4.0]).unwrap();
        assert_eq!(norm_dist(&a, &b).unwrap(), 5.0);
        assert_eq!(norm_dist(&b, &b).unwrap(), 0.0);
        assert_eq!(norm_dist(&s(1.0), &s(0.5)).unwrap(), 0.5);
        assert!(norm_dist(&a, &s(1.0)).is_err());
    }

    #[test]
    fn piecewise_is_right_continuous() {
        let t = MappingSpec::piecewise(
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
        .unwrap();
        assert_eq!(t.apply(&s(0.4)).unwrap()[0], 0.1);
        assert_eq!(t.apply(&s(0.5)).unwrap()[0], 0.1);
        assert_eq!(t.apply(&s(1.0)).unwrap()[0], 0.2);
        assert!(t.apply(&s(1.01)).is_err());
    }

    #[test]
    fn piecewise_validation() {
        let p = Piece {
            slope: 1.0,
            intercept: 0.0,
        };
        assert!(MappingSpec::piecewise(vec![0.0, 0.0], vec![p]).is_err());
        assert!(MappingSpec::piecewise(vec![0.0, 1.0], vec![p, p]).is_err());
        // image escapes the domain
        assert!(MappingSpec::piecewise(
            vec![0.0, 1.0],
            vec![Piece {
                slope: 2.0,
                intercept: 0.0
            }]
        )
        .is_err());
    }

    #[test]
    fn json_descriptions() {
        let t: MappingSpec =
            serde_json::from_str(r#"{"variant":"Affine","M":[[0.5]],"b":[0.25]}"#).unwrap();
        assert_eq!(t.apply(&s(1.0)).unwrap()[0], 0.75);
        let avg: MappingSpec = serde_json::from_str(
            r#"{"variant":"Averaged","inner":{"variant":"Reflection1D"},"lambda":0.5}"#,
        )
        .unwrap();
        assert_eq!(avg.apply(&s(0.0)).unwrap()[0], 0.5);
        let back: MappingSpec =
            serde_json::from_str(&serde_json::to_string(&avg).unwrap()).unwrap();
        assert_eq!(back, avg);
    }
}
