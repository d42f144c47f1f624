//! Geometry descriptors for the domains the convergence theorems cover:
//! the full space, intervals, balls, and (possibly rotated) half spaces
//! bounded by the graph of a smooth function gamma.

use crate::error::{Error, Result};
use crate::{dot, norm, sub, Point};

/// The shipped graph family gamma(x') = amplitude * exp(-|x'|^2).
///
/// The amplitude is kept small so that the small-C^1-norm hypothesis of the
/// curved half-space theorem is honored rather than explored.
#[derive(Debug, Clone, Copy)]
pub struct GraphFn {
    pub amplitude: f64,
}

impl GraphFn {
    pub fn new(amplitude: f64) -> Self {
        GraphFn { amplitude }
    }

    pub fn flat() -> Self {
        GraphFn { amplitude: 0.0 }
    }

    /// gamma(x') for x' in R^{dim-1} (only the first `dim_prime` entries are read).
    pub fn value(&self, xp: &[f64]) -> f64 {
        let q: f64 = xp.iter().map(|s| s * s).sum();
        self.amplitude * (-q).exp()
    }

    pub fn gradient(&self, xp: &[f64]) -> Vec<f64> {
        let v = self.value(xp);
        xp.iter().map(|s| -2.0 * s * v).collect()
    }

    /// Scalar-argument derivatives, used by the n = 2 half-space recipes.
    pub fn d1(&self, s: f64) -> f64 {
        -2.0 * s * self.amplitude * (-s * s).exp()
    }

    pub fn d2(&self, s: f64) -> f64 {
        self.amplitude * (4.0 * s * s - 2.0) * (-s * s).exp()
    }

    pub fn d3(&self, s: f64) -> f64 {
        self.amplitude * (12.0 * s - 8.0 * s * s * s) * (-s * s).exp()
    }

    /// Global bound on |grad gamma| (attained at |x'| = 1/sqrt(2)).
    pub fn lipschitz(&self) -> f64 {
        self.amplitude.abs() * (2.0f64 / std::f64::consts::E).sqrt()
    }

    /// Measured C^1_b norm, sup|gamma| + sup|grad gamma|.
    pub fn c1_norm(&self) -> f64 {
        self.amplitude.abs() + self.lipschitz()
    }
}

/// An n x n rotation stored row-major in a 3 x 3 frame.
pub type Rotation = [[f64; 3]; 3];

pub fn rotation_identity() -> Rotation {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

pub fn rotate(q: &Rotation, x: &Point) -> Point {
    let mut y = [0.0; 3];
    for (i, yi) in y.iter_mut().enumerate() {
        *yi = q[i][0] * x[0] + q[i][1] * x[1] + q[i][2] * x[2];
    }
    y
}

pub fn rotate_transpose(q: &Rotation, x: &Point) -> Point {
    let mut y = [0.0; 3];
    for (i, yi) in y.iter_mut().enumerate() {
        *yi = q[0][i] * x[0] + q[1][i] * x[1] + q[2][i] * x[2];
    }
    y
}

#[derive(Clone, Debug)]
pub enum Domain {
    FullSpace {
        dim: usize,
    },
    Interval {
        a: f64,
        b: f64,
    },
    Ball {
        dim: usize,
        center: Point,
        radius: f64,
    },
    /// {x : x_n > gamma(x')}, optionally rotated by Q (the domain is Q applied
    /// to the graph half space).
    HalfSpaceGraph {
        dim: usize,
        graph: GraphFn,
        rotation: Option<Rotation>,
    },
}

impl Domain {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        // partial_cmp keeps NaN endpoints rejected (a >= b would accept them)
        if a.partial_cmp(&b) != Some(std::cmp::Ordering::Less) {
            return Err(Error::Parameter(format!("interval requires a < b, got [{a}, {b}]")));
        }
        Ok(Domain::Interval { a, b })
    }

    pub fn ball(dim: usize, center: Point, radius: f64) -> Result<Self> {
        if radius <= 0.0 {
            return Err(Error::Parameter("ball radius must be positive".into()));
        }
        Ok(Domain::Ball { dim, center, radius })
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::FullSpace { dim } => *dim,
            Domain::Interval { .. } => 1,
            Domain::Ball { dim, .. } => *dim,
            Domain::HalfSpaceGraph { dim, .. } => *dim,
        }
    }

    pub fn has_boundary(&self) -> bool {
        !matches!(self, Domain::FullSpace { .. })
    }

    /// Map a point into graph-local coordinates (identity unless rotated).
    pub fn to_local(&self, x: &Point) -> Point {
        match self {
            Domain::HalfSpaceGraph { rotation: Some(q), .. } => rotate_transpose(q, x),
            _ => *x,
        }
    }

    pub fn from_local(&self, x: &Point) -> Point {
        match self {
            Domain::HalfSpaceGraph { rotation: Some(q), .. } => rotate(q, x),
            _ => *x,
        }
    }

    pub fn contains(&self, x: &Point) -> bool {
        self.boundary_distance(x) > 0.0
    }

    /// Signed distance-like quantity: positive strictly inside, negative
    /// outside. For the graph half space this is a lower bound on the
    /// Euclidean distance, (x_n - gamma(x')) / sqrt(1 + L^2).
    pub fn boundary_distance(&self, x: &Point) -> f64 {
        match self {
            Domain::FullSpace { .. } => f64::INFINITY,
            Domain::Interval { a, b } => (x[0] - a).min(b - x[0]),
            Domain::Ball { dim, center, radius } => radius - norm(&sub(x, center), *dim),
            Domain::HalfSpaceGraph { dim, graph, .. } => {
                let xl = self.to_local(x);
                let lift = xl[*dim - 1] - graph.value(&xl[..*dim - 1]);
                let l = graph.lipschitz();
                lift / (1.0 + l * l).sqrt()
            }
        }
    }

    /// Outward unit normal at a boundary point.
    pub fn outward_normal(&self, x: &Point) -> Result<Point> {
        match self {
            Domain::FullSpace { .. } => {
                Err(Error::Contract("full space has no boundary".into()))
            }
            Domain::Interval { a, b } => {
                if (x[0] - a).abs() <= (x[0] - b).abs() {
                    Ok([-1.0, 0.0, 0.0])
                } else {
                    Ok([1.0, 0.0, 0.0])
                }
            }
            Domain::Ball { dim, center, .. } => {
                let d = sub(x, center);
                let r = norm(&d, *dim);
                if r == 0.0 {
                    return Err(Error::Contract("ball center is not a boundary point".into()));
                }
                Ok(crate::scale(&d, 1.0 / r))
            }
            Domain::HalfSpaceGraph { dim, graph, .. } => {
                let xl = self.to_local(x);
                let g = graph.gradient(&xl[..*dim - 1]);
                let mut n = [0.0; 3];
                let mut sq = 1.0;
                for (i, gi) in g.iter().enumerate() {
                    n[i] = *gi;
                    sq += gi * gi;
                }
                n[*dim - 1] = -1.0;
                let n = crate::scale(&n, 1.0 / sq.sqrt());
                Ok(self.from_local(&n))
            }
        }
    }

    /// Deterministic boundary samples with outward normals: interval
    /// endpoints, equispaced sphere angles, a uniform grid on the truncated
    /// graph box of half-width 5.
    pub fn boundary_samples(&self, count: usize) -> Result<Vec<(Point, Point)>> {
        match self {
            Domain::FullSpace { .. } => {
                Err(Error::Contract("full space has no boundary".into()))
            }
            Domain::Interval { a, b } => Ok(vec![
                ([*a, 0.0, 0.0], [-1.0, 0.0, 0.0]),
                ([*b, 0.0, 0.0], [1.0, 0.0, 0.0]),
            ]),
            Domain::Ball { dim, center, radius } => {
                let mut out = Vec::new();
                match dim {
                    1 => {
                        out.push(([center[0] - radius, 0.0, 0.0], [-1.0, 0.0, 0.0]));
                        out.push(([center[0] + radius, 0.0, 0.0], [1.0, 0.0, 0.0]));
                    }
                    2 => {
                        let m = count.max(4);
                        for k in 0..m {
                            let th = 2.0 * std::f64::consts::PI * (k as f64) / (m as f64);
                            let n = [th.cos(), th.sin(), 0.0];
                            let p = crate::add(center, &crate::scale(&n, *radius));
                            out.push((p, n));
                        }
                    }
                    3 => {
                        // latitude-longitude grid, poles excluded
                        let m = ((count as f64).sqrt().ceil() as usize).max(4);
                        for i in 1..m {
                            let th = std::f64::consts::PI * (i as f64) / (m as f64);
                            for j in 0..m {
                                let ph = 2.0 * std::f64::consts::PI * (j as f64) / (m as f64);
                                let n = [th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()];
                                let p = crate::add(center, &crate::scale(&n, *radius));
                                out.push((p, n));
                            }
                        }
                    }
                    d => return Err(Error::Parameter(format!("unsupported dimension {d}"))),
                }
                Ok(out)
            }
            Domain::HalfSpaceGraph { dim, graph, .. } => {
                let half_width = 5.0;
                let mut out = Vec::new();
                match dim {
                    2 => {
                        let m = count.max(8);
                        for k in 0..m {
                            let s = -half_width + 2.0 * half_width * (k as f64) / ((m - 1) as f64);
                            let pl = [s, graph.value(&[s]), 0.0];
                            let p = self.from_local(&pl);
                            out.push((p, self.outward_normal(&p)?));
                        }
                    }
                    3 => {
                        let m = ((count as f64).sqrt().ceil() as usize).max(4);
                        for i in 0..m {
                            let s = -half_width + 2.0 * half_width * (i as f64) / ((m - 1) as f64);
                            for j in 0..m {
                                let t =
                                    -half_width + 2.0 * half_width * (j as f64) / ((m - 1) as f64);
                                let pl = [s, t, graph.value(&[s, t])];
                                let p = self.from_local(&pl);
                                out.push((p, self.outward_normal(&p)?));
                            }
                        }
                    }
                    d => return Err(Error::Parameter(format!("unsupported dimension {d}"))),
                }
                Ok(out)
            }
        }
    }

    /// Axis-aligned bounding box for bounded domains.
    pub fn bounding_box(&self) -> Option<(Point, Point)> {
        match self {
            Domain::Interval { a, b } => Some(([*a, 0.0, 0.0], [*b, 0.0, 0.0])),
            Domain::Ball { dim, center, radius } => {
                let mut lo = [0.0; 3];
                let mut hi = [0.0; 3];
                for i in 0..*dim {
                    lo[i] = center[i] - radius;
                    hi[i] = center[i] + radius;
                }
                Some((lo, hi))
            }
            _ => None,
        }
    }

    /// For a ray x + t*dir (|dir| = 1, x strictly inside), the parameter at
    /// which the ray leaves the domain, if it does so within `t_max`.
    pub fn ray_exit(&self, x: &Point, dir: &Point, t_max: f64) -> Option<f64> {
        match self {
            Domain::FullSpace { .. } => None,
            Domain::Interval { a, b } => {
                let d = dir[0];
                if d > 0.0 {
                    let t = (b - x[0]) / d;
                    (t < t_max).then_some(t)
                } else if d < 0.0 {
                    let t = (a - x[0]) / d;
                    (t < t_max).then_some(t)
                } else {
                    None
                }
            }
            Domain::Ball { dim, center, radius } => {
                // |x + t dir - c|^2 = R^2, take the positive root
                let w = sub(x, center);
                let b2 = dot(&w, dir, *dim);
                let c = dot(&w, &w, *dim) - radius * radius;
                let disc = b2 * b2 - c;
                if disc <= 0.0 {
                    return None;
                }
                let t = -b2 + disc.sqrt();
                (t > 0.0 && t < t_max).then_some(t)
            }
            Domain::HalfSpaceGraph { dim, graph, .. } => {
                // bisection on h(t) = (x + t dir)_n - gamma((x + t dir)')
                let xl = self.to_local(x);
                let dl = self.to_local(dir);
                let h = |t: f64| {
                    let p = crate::add(&xl, &crate::scale(&dl, t));
                    p[*dim - 1] - graph.value(&p[..*dim - 1])
                };
                if h(t_max) >= 0.0 {
                    // the graph Lipschitz constant is small: no re-entry missed
                    // at the scales we integrate over
                    return None;
                }
                let (mut lo, mut hi) = (0.0, t_max);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if h(mid) > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Some(0.5 * (lo + hi))
            }
        }
    }
}
