//! Closed convex sets with closed-form nearest-point projections.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Vector};

/// Projectable convex sets.
///
/// Halfspace is `{x : <normal, x> <= offset}`, hyperplane is
/// `{x : <normal, x> = offset}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "variant")]
pub enum ConvexSetSpec {
    Box { lower: Vector, upper: Vector },
    Ball { center: Vector, radius: f64 },
    Halfspace { normal: Vector, offset: f64 },
    Hyperplane { normal: Vector, offset: f64 },
}

#[derive(Deserialize)]
enum ConvexRepr {
    Box { lower: Vector, upper: Vector },
    Ball { center: Vector, radius: f64 },
    Halfspace { normal: Vector, offset: f64 },
    Hyperplane { normal: Vector, offset: f64 },
}

impl<'de> Deserialize<'de> for ConvexSetSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(
            match crate::tagged::deserialize_tagged::<D, ConvexRepr>(d, "variant")? {
                ConvexRepr::Box { lower, upper } => ConvexSetSpec::Box { lower, upper },
                ConvexRepr::Ball { center, radius } => ConvexSetSpec::Ball { center, radius },
                ConvexRepr::Halfspace { normal, offset } => {
                    ConvexSetSpec::Halfspace { normal, offset }
                }
                ConvexRepr::Hyperplane { normal, offset } => {
                    ConvexSetSpec::Hyperplane { normal, offset }
                }
            },
        )
    }
}

impl ConvexSetSpec {
    pub fn new_box(lower: Vector, upper: Vector) -> Result<Self> {
        let s = ConvexSetSpec::Box { lower, upper };
        s.validate()?;
        Ok(s)
    }

    /// The box `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new_box(Vector::filled(dim, lo)?, Vector::filled(dim, hi)?)
    }

    pub fn ball(center: Vector, radius: f64) -> Result<Self> {
        let s = ConvexSetSpec::Ball { center, radius };
        s.validate()?;
        Ok(s)
    }

    pub fn halfspace(normal: Vector, offset: f64) -> Result<Self> {
        let s = ConvexSetSpec::Halfspace { normal, offset };
        s.validate()?;
        Ok(s)
    }

    pub fn hyperplane(normal: Vector, offset: f64) -> Result<Self> {
        let s = ConvexSetSpec::Hyperplane { normal, offset };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ConvexSetSpec::Box { lower, upper } => {
                upper.check_dim(lower.dim())?;
                for (i, (l, u)) in lower.as_slice().iter().zip(upper.as_slice()).enumerate() {
                    if l > u {
                        return Err(Error::invalid(format!(
                            "box lower[{i}] = {l} exceeds upper[{i}] = {u}"
                        )));
                    }
                }
            }
            ConvexSetSpec::Ball { radius, .. } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::invalid(format!(
                        "ball radius must be positive, got {radius}"
                    )));
                }
            }
            ConvexSetSpec::Halfspace { normal, offset }
            | ConvexSetSpec::Hyperplane { normal, offset } => {
                if normal.norm() == 0.0 {
                    return Err(Error::invalid("normal vector must be nonzero"));
                }
                if !offset.is_finite() {
                    return Err(Error::NonFinite(format!("offset {offset}")));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexSetSpec::Box { lower, .. } => lower.dim(),
            ConvexSetSpec::Ball { center, .. } => center.dim(),
            ConvexSetSpec::Halfspace { normal, .. } | ConvexSetSpec::Hyperplane { normal, .. } => {
                normal.dim()
            }
        }
    }

    /// Nearest point of the set to `x` in the Euclidean norm.
    pub fn project(&self, x: &Vector) -> Result<Vector> {
        x.check_dim(self.dim())?;
        let xs = x.as_slice();
        let out = match self {
            ConvexSetSpec::Box { lower, upper } => xs
                .iter()
                .zip(lower.as_slice().iter().zip(upper.as_slice()))
                .map(|(v, (l, u))| v.max(*l).min(*u))
                .collect(),
            ConvexSetSpec::Ball { center, radius } => {
                let c = center.as_slice();
                let d: Vec<f64> = xs.iter().zip(c).map(|(a, b)| a - b).collect();
                let dist = dot(&d, &d).sqrt();
                if dist <= *radius {
                    xs.to_vec()
                } else {
                    let s = radius / dist;
                    c.iter().zip(&d).map(|(ci, di)| ci + s * di).collect()
                }
            }
            ConvexSetSpec::Halfspace { normal, offset } => {
                let a = normal.as_slice();
                let excess = dot(a, xs) - offset;
                if excess <= 0.0 {
                    xs.to_vec()
                } else {
                    let t = excess / dot(a, a);
                    xs.iter().zip(a).map(|(v, ai)| v - t * ai).collect()
                }
            }
            ConvexSetSpec::Hyperplane { normal, offset } => {
                let a = normal.as_slice();
                let t = (dot(a, xs) - offset) / dot(a, a);
                xs.iter().zip(a).map(|(v, ai)| v - t * ai).collect()
            }
        };
        Vector::from_raw(out)
    }

    /// Distance from `x` to the set.
    pub fn distance(&self, x: &Vector) -> Result<f64> {
        Ok(x.sub(&self.project(x)?)?.norm())
    }

    pub fn contains(&self, x: &Vector, tol: f64) -> Result<bool> {
        if !(tol >= 0.0) {
            return Err(Error::invalid(format!(
                "tolerance must be nonnegative, got {tol}"
            )));
        }
        Ok(self.distance(x)? <= tol)
    }

    /// Axis-aligned bounding box, `None` for unbounded sets.
    pub fn bounding_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            ConvexSetSpec::Box { lower, upper } => {
                Some((lower.as_slice().to_vec(), upper.as_slice().to_vec()))
            }
            ConvexSetSpec::Ball { center, radius } => Some((
                center.as_slice().iter().map(|c| c - radius).collect(),
                center.as_slice().iter().map(|c| c + radius).collect(),
            )),
            ConvexSetSpec::Halfspace { .. } | ConvexSetSpec::Hyperplane { .. } => None,
        }
    }

    /// Draws `count` points of the set.
    ///
    /// Bounded sets use rejection sampling inside their bounding box. For
    /// unbounded sets the box is `P(anchor) ± extent` per axis; halfspaces are
    /// still rejection sampled, hyperplane samples are projected onto the
    /// plane since a box sample hits it with probability zero.
    pub fn sample_points<R: Rng>(
        &self,
        count: usize,
        rng: &mut R,
        anchor: &Vector,
        extent: f64,
    ) -> Result<Vec<Vector>> {
        let (lo, hi) = match self.bounding_box() {
            Some(b) => b,
            None => {
                let c = self.project(anchor)?;
                (
                    c.as_slice().iter().map(|v| v - extent).collect(),
                    c.as_slice().iter().map(|v| v + extent).collect(),
                )
            }
        };
        let mut out = Vec::with_capacity(count);
        let max_attempts = 1000 * count.max(1);
        let mut attempts = 0;
        while out.len() < count {
            attempts += 1;
            if attempts > max_attempts {
                return Err(Error::InvalidSample(format!(
                    "rejection sampling accepted only {} of {count} points",
                    out.len()
                )));
            }
            let raw: Vec<f64> = lo
                .iter()
                .zip(&hi)
                .map(|(l, h)| if l < h { rng.gen_range(*l..=*h) } else { *l })
                .collect();
            let p = Vector::from_raw(raw)?;
            match self {
                ConvexSetSpec::Hyperplane { .. } => out.push(self.project(&p)?),
                _ => {
                    if self.contains(&p, 0.0)? {
                        out.push(p);
                    }
                }
            }
        }
        Ok(out)
    }
}
