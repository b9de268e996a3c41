use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Closed ball or axis-aligned box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Primitive {
    Ball { center: Vec<f64>, radius: f64 },
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

impl Primitive {
    pub fn dim(&self) -> usize {
        match self {
            Primitive::Ball { center, .. } => center.len(),
            Primitive::Box { lower, .. } => lower.len(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.distance(x) == 0.0
    }

    /// Nearest point of the primitive to `x`, written to `out`.
    pub fn project(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Primitive::Ball { center, radius } => {
                let r: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt();
                for k in 0..x.len() {
                    out[k] = if r <= *radius { x[k] } else { center[k] + (x[k] - center[k]) * radius / r };
                }
            }
            Primitive::Box { lower, upper } => {
                for k in 0..x.len() {
                    out[k] = x[k].clamp(lower[k], upper[k]);
                }
            }
        }
    }

    /// Euclidean distance from `x` to the primitive (0 inside).
    pub fn distance(&self, x: &[f64]) -> f64 {
        match self {
            Primitive::Ball { center, radius } => {
                let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                (r2.sqrt() - radius).max(0.0)
            }
            Primitive::Box { lower, upper } => {
                let mut s = 0.0;
                for k in 0..x.len() {
                    let e = if x[k] < lower[k] {
                        lower[k] - x[k]
                    } else if x[k] > upper[k] {
                        x[k] - upper[k]
                    } else {
                        0.0
                    };
                    s += e * e;
                }
                s.sqrt()
            }
        }
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Primitive::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            Primitive::Box { lower, upper } => (lower.clone(), upper.clone()),
        }
    }

    /// Largest norm of a point of the primitive.
    fn max_norm(&self) -> f64 {
        match self {
            Primitive::Ball { center, radius } => {
                center.iter().map(|c| c * c).sum::<f64>().sqrt() + radius
            }
            Primitive::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| l.abs().max(u.abs()).powi(2))
                .sum::<f64>()
                .sqrt(),
        }
    }
}

/// Finite union of balls and boxes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompactSet {
    components: Vec<Primitive>,
}

impl CompactSet {
    pub fn new(components: Vec<Primitive>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidSet("a set needs at least one primitive".into()))?;
        let d = first.dim();
        if d == 0 {
            return Err(Error::InvalidSet("dimension must be positive".into()));
        }
        for p in &components {
            if p.dim() != d {
                return Err(Error::InvalidSet("primitives have different dimensions".into()));
            }
            match p {
                Primitive::Ball { center, radius } => {
                    if !(*radius >= 0.0 && radius.is_finite()) || center.iter().any(|c| !c.is_finite()) {
                        return Err(Error::InvalidSet(format!("bad ball radius {radius}")));
                    }
                }
                Primitive::Box { lower, upper } => {
                    if upper.len() != d {
                        return Err(Error::InvalidSet("box corners have different dimensions".into()));
                    }
                    if lower.iter().zip(upper).any(|(l, u)| !(l <= u) || !l.is_finite() || !u.is_finite()) {
                        return Err(Error::InvalidSet("box lower corner exceeds upper corner".into()));
                    }
                }
            }
        }
        Ok(CompactSet { components })
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        Self::new(vec![Primitive::Ball { center, radius }])
    }

    pub fn cube(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        Self::new(vec![Primitive::Box { lower, upper }])
    }

    pub fn point(x: Vec<f64>) -> Result<Self> {
        Self::ball(x, 0.0)
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn components(&self) -> &[Primitive] {
        &self.components
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.components.iter().any(|p| p.contains(x))
    }

    pub fn distance(&self, x: &[f64]) -> f64 {
        self.components.iter().map(|p| p.distance(x)).fold(f64::INFINITY, f64::min)
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for p in &self.components {
            let (l, h) = p.bounds();
            for k in 0..d {
                lo[k] = lo[k].min(l[k]);
                hi[k] = hi[k].max(h[k]);
            }
        }
        (lo, hi)
    }

    pub fn max_norm(&self) -> f64 {
        self.components.iter().map(Primitive::max_norm).fold(0.0, f64::max)
    }

    /// Same set moved by `shift`.
    pub fn translated(&self, shift: &[f64]) -> Self {
        let mv = |v: &Vec<f64>| v.iter().zip(shift).map(|(a, b)| a + b).collect::<Vec<_>>();
        CompactSet {
            components: self
                .components
                .iter()
                .map(|p| match p {
                    Primitive::Ball { center, radius } => Primitive::Ball { center: mv(center), radius: *radius },
                    Primitive::Box { lower, upper } => Primitive::Box { lower: mv(lower), upper: mv(upper) },
                })
                .collect(),
        }
    }

    /// Same set scaled about the origin by `lambda > 0`.
    pub fn scaled(&self, lambda: f64) -> Self {
        let sc = |v: &Vec<f64>| v.iter().map(|a| a * lambda).collect::<Vec<_>>();
        CompactSet {
            components: self
                .components
                .iter()
                .map(|p| match p {
                    Primitive::Ball { center, radius } => {
                        Primitive::Ball { center: sc(center), radius: radius * lambda }
                    }
                    Primitive::Box { lower, upper } => Primitive::Box { lower: sc(lower), upper: sc(upper) },
                })
                .collect(),
        }
    }
}

fn parse_point(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidSet(format!("`{v}` is not a number")))
        })
        .collect()
}

impl FromStr for Primitive {
    type Err = Error;

    /// `ball:x1,..,xd:r` or `box:l1,..,ld:u1,..,ud`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        match parts.as_slice() {
            ["ball", c, r] => Ok(Primitive::Ball {
                center: parse_point(c)?,
                radius: r
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidSet(format!("bad radius `{r}`")))?,
            }),
            ["point", c] => Ok(Primitive::Ball { center: parse_point(c)?, radius: 0.0 }),
            ["box", l, u] => Ok(Primitive::Box { lower: parse_point(l)?, upper: parse_point(u)? }),
            _ => Err(Error::InvalidSet(format!(
                "cannot parse `{s}`; expected ball:c1,..,cd:r, point:c1,..,cd or box:l1,..,ld:u1,..,ud"
            ))),
        }
    }
}

impl FromStr for CompactSet {
    type Err = Error;

    /// Primitives joined by `+`.
    fn from_str(s: &str) -> Result<Self> {
        let prims = s.split('+').map(str::parse).collect::<Result<Vec<Primitive>>>()?;
        CompactSet::new(prims)
    }
}

fn fmt_point(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",")
}

impl fmt::Display for CompactSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .components
            .iter()
            .map(|p| match p {
                Primitive::Ball { center, radius } => format!("ball:{}:{}", fmt_point(center), radius),
                Primitive::Box { lower, upper } => format!("box:{}:{}", fmt_point(lower), fmt_point(upper)),
            })
            .collect();
        write!(f, "{}", parts.join("+"))
    }
}

/// Cell centers of a regular lattice over the bounding box that fall in the set.
///
/// Cells are cubes whose side is the longest bounding-box extent divided by
/// `points_per_axis`. A set of a single point yields that point with cell size 0.
pub fn discretize(set: &CompactSet, points_per_axis: usize) -> Result<(Vec<f64>, f64)> {
    if points_per_axis < 2 {
        return Err(Error::InvalidArgument("points_per_axis must be at least 2".into()));
    }
    let d = set.dim();
    let (lo, hi) = set.bounding_box();
    let extent = lo.iter().zip(&hi).map(|(l, h)| h - l).fold(0.0, f64::max);
    if extent == 0.0 {
        return Ok((lo, 0.0));
    }
    let h = extent / points_per_axis as f64;
    let counts: Vec<usize> = lo
        .iter()
        .zip(&hi)
        .map(|(l, u)| (((u - l) / h).round() as usize).max(1))
        .collect();
    // center the lattice in the bounding box along every axis
    let origin: Vec<f64> = (0..d)
        .map(|k| 0.5 * (lo[k] + hi[k]) - 0.5 * h * counts[k] as f64 + 0.5 * h)
        .collect();
    let tol = 1e-12 * extent;
    let mut idx = vec![0usize; d];
    let mut x = vec![0.0; d];
    let mut points = Vec::new();
    'outer: loop {
        for k in 0..d {
            x[k] = origin[k] + idx[k] as f64 * h;
        }
        if set.distance(&x) <= tol {
            points.extend_from_slice(&x);
        }
        let mut k = 0;
        loop {
            if k == d {
                break 'outer;
            }
            idx[k] += 1;
            if idx[k] < counts[k] {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
    if points.is_empty() {
        return Err(Error::EmptyDiscretization { points_per_axis });
    }
    Ok((points, h))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_box_grid() {
        let s = CompactSet::cube(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let (p, h) = discretize(&s, 4).unwrap();
        assert_eq!(p.len() / 2, 16);
        assert_eq!(h, 0.25);
        assert_eq!(&p[..2], &[0.125, 0.125]);
    }

    #[test]
    fn small_ball_has_center() {
        for d in 1..=4 {
            let s = CompactSet::ball(vec![0.0; d], 0.1).unwrap();
            let (p, _) = discretize(&s, 3).unwrap();
            assert!(p.chunks(d).any(|c| c.iter().all(|v| v.abs() < 1e-15)));
        }
    }

    #[test]
    fn disjoint_balls_add_up() {
        let s: CompactSet = "ball:0,0,0:0.3+ball:1,0.2,0:0.25".parse().unwrap();
        let (p, _) = discretize(&s, 20).unwrap();
        let a = CompactSet::ball(vec![0.0, 0.0, 0.0], 0.3).unwrap();
        let b = CompactSet::ball(vec![1.0, 0.2, 0.0], 0.25).unwrap();
        let na = p.chunks(3).filter(|c| a.contains(c)).count();
        let nb = p.chunks(3).filter(|c| b.contains(c)).count();
        assert!(na > 0 && nb > 0);
        assert_eq!(na + nb, p.len() / 3);
    }

    #[test]
    fn parse_and_print() {
        let s: CompactSet = "ball:0,0:0.5+box:1,1:2,3".parse().unwrap();
        assert_eq!(s.to_string(), "ball:0,0:0.5+box:1,1:2,3");
        assert!("ball:0,0".parse::<CompactSet>().is_err());
        assert!("ball:0,0:1+ball:0:1".parse::<CompactSet>().is_err());
        assert!("box:1:0".parse::<CompactSet>().is_err());
    }

    #[test]
    fn distances() {
        let s: CompactSet = "box:0,0:1,1".parse().unwrap();
        assert_eq!(s.distance(&[2.0, 0.5]), 1.0);
        assert_eq!(s.distance(&[0.5, 0.5]), 0.0);
        let b = CompactSet::ball(vec![0.0, 0.0], 1.0).unwrap();
        assert!((b.distance(&[3.0, 4.0]) - 4.0).abs() < 1e-15);
    }
}
