//! C^3 test functions with exact gradients, Hessians and third derivatives,
//! plus the Neumann compatibility check M grad(u) . n = 0 on the boundary.
//!
//! Every recipe is defined on all of R^n (its own global extension), so the
//! complement-decomposition route for domain operators can evaluate it
//! outside the domain without further work.

use std::sync::Arc;

use crate::domains::Domain;
use crate::error::{Error, Result};
use crate::moments::{mat_vec, Matrix};
use crate::{dot, Point};

pub type Hessian = [[f64; 3]; 3];
pub type Third = [[[f64; 3]; 3]; 3];

type ValueFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(&Point) -> Point + Send + Sync>;
type HessFn = Arc<dyn Fn(&Point) -> Hessian + Send + Sync>;
type ThirdFn = Arc<dyn Fn(&Point) -> Third + Send + Sync>;

/// A C^3 function with analytically supplied derivatives up to order three.
#[derive(Clone)]
pub struct TestFunction {
    pub name: String,
    pub dim: usize,
    /// u vanishes outside B_{support_radius}(0); infinity if not compactly
    /// supported.
    pub support_radius: f64,
    value: ValueFn,
    grad: GradFn,
    hess: HessFn,
    third: ThirdFn,
}

impl std::fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TestFunction")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("support_radius", &self.support_radius)
            .finish()
    }
}

impl TestFunction {
    #[inline]
    pub fn value(&self, x: &Point) -> f64 {
        (self.value)(x)
    }

    #[inline]
    pub fn gradient(&self, x: &Point) -> Point {
        (self.grad)(x)
    }

    #[inline]
    pub fn hessian(&self, x: &Point) -> Hessian {
        (self.hess)(x)
    }

    #[inline]
    pub fn third(&self, x: &Point) -> Third {
        (self.third)(x)
    }

    /// The regularized integrand u(x) - u(x - z) - grad u(x) . z, evaluated
    /// directly.
    #[inline]
    pub fn remainder(&self, x: &Point, z: &Point) -> f64 {
        let y = crate::sub(x, z);
        self.value(x) - self.value(&y) - dot(&self.gradient(x), z, self.dim)
    }

    /// Third-order Taylor form of the remainder,
    /// -1/2 z^T H(x) z + 1/6 D^3u(x)[z, z, z], used for offsets so small that
    /// the direct difference would cancel catastrophically.
    pub fn remainder_taylor(&self, x: &Point, z: &Point) -> f64 {
        let h = self.hessian(x);
        let t = self.third(x);
        let mut quad = 0.0;
        let mut cub = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                quad += z[i] * h[i][j] * z[j];
                for k in 0..self.dim {
                    cub += z[i] * z[j] * z[k] * t[i][j][k];
                }
            }
        }
        -0.5 * quad + cub / 6.0
    }

    /// Pointwise linear combination c1 u1 + c2 u2 (dimensions must agree).
    pub fn linear_combination(c1: f64, u1: &TestFunction, c2: f64, u2: &TestFunction) -> Result<TestFunction> {
        if u1.dim != u2.dim {
            return Err(Error::Parameter("dimension mismatch in combination".into()));
        }
        let (a1, a2) = (u1.clone(), u2.clone());
        let (b1, b2) = (u1.clone(), u2.clone());
        let (d1, d2) = (u1.clone(), u2.clone());
        let (e1, e2) = (u1.clone(), u2.clone());
        Ok(TestFunction {
            name: format!("{}*{} + {}*{}", c1, u1.name, c2, u2.name),
            dim: u1.dim,
            support_radius: u1.support_radius.max(u2.support_radius),
            value: Arc::new(move |x| c1 * a1.value(x) + c2 * a2.value(x)),
            grad: Arc::new(move |x| {
                let (g1, g2) = (b1.gradient(x), b2.gradient(x));
                [
                    c1 * g1[0] + c2 * g2[0],
                    c1 * g1[1] + c2 * g2[1],
                    c1 * g1[2] + c2 * g2[2],
                ]
            }),
            hess: Arc::new(move |x| {
                let (h1, h2) = (d1.hessian(x), d2.hessian(x));
                let mut h = [[0.0; 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        h[i][j] = c1 * h1[i][j] + c2 * h2[i][j];
                    }
                }
                h
            }),
            third: Arc::new(move |x| {
                let (t1, t2) = (e1.third(x), e2.third(x));
                let mut t = [[[0.0; 3]; 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        for k in 0..3 {
                            t[i][j][k] = c1 * t1[i][j][k] + c2 * t2[i][j][k];
                        }
                    }
                }
                t
            }),
        })
    }

    /// Pullback v(x) = u(B x) by a constant matrix, with exact chain-rule
    /// derivatives (used to transplant compatible functions between
    /// linearly-mapped domains).
    pub fn pullback_linear(&self, b: &Matrix) -> TestFunction {
        let dim = self.dim;
        let bb = *b;
        let (u_v, u_g, u_h, u_t) = (self.clone(), self.clone(), self.clone(), self.clone());
        let map = move |x: &Point| mat_vec(&bb, x, dim);
        TestFunction {
            name: format!("{}(Bx)", self.name),
            dim,
            support_radius: f64::INFINITY,
            value: Arc::new(move |x| u_v.value(&map(x))),
            grad: Arc::new(move |x| {
                let g = u_g.gradient(&map(x));
                let mut out = [0.0; 3];
                for i in 0..dim {
                    for p in 0..dim {
                        out[i] += bb[p][i] * g[p];
                    }
                }
                out
            }),
            hess: Arc::new(move |x| {
                let h = u_h.hessian(&map(x));
                let mut out = [[0.0; 3]; 3];
                for i in 0..dim {
                    for j in 0..dim {
                        for p in 0..dim {
                            for q in 0..dim {
                                out[i][j] += bb[p][i] * bb[q][j] * h[p][q];
                            }
                        }
                    }
                }
                out
            }),
            third: Arc::new(move |x| {
                let t = u_t.third(&map(x));
                let mut out = [[[0.0; 3]; 3]; 3];
                for i in 0..dim {
                    for j in 0..dim {
                        for k in 0..dim {
                            let mut s = 0.0;
                            for p in 0..dim {
                                for q in 0..dim {
                                    for r in 0..dim {
                                        s += bb[p][i] * bb[q][j] * bb[r][k] * t[p][q][r];
                                    }
                                }
                            }
                            out[i][j][k] = s;
                        }
                    }
                }
                out
            }),
        }
    }
}

// ---------------------------------------------------------------------------
// Scalar C^3 building blocks: [f, f', f'', f'''] profiles.
// ---------------------------------------------------------------------------

/// Seventh-order smoothstep 35t^4 - 84t^5 + 70t^6 - 20t^7: 0 at t<=0, 1 at
/// t>=1, with three vanishing derivatives at both ends (C^3 when clamped).
pub fn smoothstep7(t: f64) -> [f64; 4] {
    if t <= 0.0 {
        [0.0; 4]
    } else if t >= 1.0 {
        [1.0, 0.0, 0.0, 0.0]
    } else {
        let t2 = t * t;
        let t3 = t2 * t;
        let t4 = t3 * t;
        [
            35.0 * t4 - 84.0 * t4 * t + 70.0 * t4 * t2 - 20.0 * t4 * t3,
            140.0 * t3 - 420.0 * t4 + 420.0 * t4 * t - 140.0 * t4 * t2,
            420.0 * t2 - 1680.0 * t3 + 2100.0 * t4 - 840.0 * t4 * t,
            840.0 * t - 5040.0 * t2 + 8400.0 * t3 - 4200.0 * t4,
        ]
    }
}

/// C^3 ramp from 1 (at s <= s0) down to 0 (at s >= s1), with derivatives in s.
fn ramp_down(s: f64, s0: f64, s1: f64) -> [f64; 4] {
    let w = s1 - s0;
    let v = smoothstep7((s - s0) / w);
    [
        1.0 - v[0],
        -v[1] / w,
        -v[2] / (w * w),
        -v[3] / (w * w * w),
    ]
}

fn product3(f: [f64; 4], g: [f64; 4]) -> [f64; 4] {
    [
        f[0] * g[0],
        f[1] * g[0] + f[0] * g[1],
        f[2] * g[0] + 2.0 * f[1] * g[1] + f[0] * g[2],
        f[3] * g[0] + 3.0 * f[2] * g[1] + 3.0 * f[1] * g[2] + f[0] * g[3],
    ]
}

fn cos_profile(omega: f64, phase: f64, s: f64) -> [f64; 4] {
    let (sn, cs) = (omega * s + phase).sin_cos();
    [
        cs,
        -omega * sn,
        -omega * omega * cs,
        omega * omega * omega * sn,
    ]
}

/// Even C^3 cutoff in s: 1 for |s| <= r0, 0 for |s| >= r1.
fn even_cutoff(s: f64, r0: f64, r1: f64) -> [f64; 4] {
    let a = s.abs();
    if a <= r0 {
        return [1.0, 0.0, 0.0, 0.0];
    }
    let r = ramp_down(a, r0, r1);
    let sg = s.signum();
    // chain rule through |s| (smooth here since a > r0 > 0)
    [r[0], r[1] * sg, r[2], r[3] * sg]
}

/// Build a TestFunction from a 1D scalar profile.
fn from_scalar_1d(name: &str, support_radius: f64, f: Arc<dyn Fn(f64) -> [f64; 4] + Send + Sync>) -> TestFunction {
    let (f1, f2, f3, f4) = (f.clone(), f.clone(), f.clone(), f);
    TestFunction {
        name: name.into(),
        dim: 1,
        support_radius,
        value: Arc::new(move |x: &Point| f1(x[0])[0]),
        grad: Arc::new(move |x: &Point| [f2(x[0])[1], 0.0, 0.0]),
        hess: Arc::new(move |x: &Point| {
            let mut h = [[0.0; 3]; 3];
            h[0][0] = f3(x[0])[2];
            h
        }),
        third: Arc::new(move |x: &Point| {
            let mut t = [[[0.0; 3]; 3]; 3];
            t[0][0][0] = f4(x[0])[3];
            t
        }),
    }
}

/// Build a TestFunction from a radial profile f(q), q = |x|^2, given
/// [f, f', f'', f'''] in q. The chain rule gives
///   du/dx_i       = 2 f' x_i
///   d2u/dx_i dx_j = 4 f'' x_i x_j + 2 f' delta_ij
///   d3u           = 8 f''' x_i x_j x_k
///                   + 4 f'' (d_ij x_k + d_ik x_j + d_jk x_i).
fn from_radial_profile(
    name: &str,
    dim: usize,
    support_radius: f64,
    f: Arc<dyn Fn(f64) -> [f64; 4] + Send + Sync>,
) -> TestFunction {
    let (f1, f2, f3, f4) = (f.clone(), f.clone(), f.clone(), f);
    TestFunction {
        name: name.into(),
        dim,
        support_radius,
        value: Arc::new(move |x: &Point| f1(dot(x, x, dim))[0]),
        grad: Arc::new(move |x: &Point| {
            let p = f2(dot(x, x, dim));
            crate::scale(x, 2.0 * p[1])
        }),
        hess: Arc::new(move |x: &Point| {
            let p = f3(dot(x, x, dim));
            let mut h = [[0.0; 3]; 3];
            for i in 0..dim {
                for j in 0..dim {
                    h[i][j] = 4.0 * p[2] * x[i] * x[j];
                }
                h[i][i] += 2.0 * p[1];
            }
            h
        }),
        third: Arc::new(move |x: &Point| {
            let p = f4(dot(x, x, dim));
            let mut t = [[[0.0; 3]; 3]; 3];
            for i in 0..dim {
                for j in 0..dim {
                    for k in 0..dim {
                        let mut v = 8.0 * p[3] * x[i] * x[j] * x[k];
                        if i == j {
                            v += 4.0 * p[2] * x[k];
                        }
                        if i == k {
                            v += 4.0 * p[2] * x[j];
                        }
                        if j == k {
                            v += 4.0 * p[2] * x[i];
                        }
                        t[i][j][k] = v;
                    }
                }
            }
            t
        }),
    }
}

// ---------------------------------------------------------------------------
// Recipes
// ---------------------------------------------------------------------------

pub fn constant(dim: usize, c: f64) -> TestFunction {
    TestFunction {
        name: format!("constant({c})"),
        dim,
        support_radius: f64::INFINITY,
        value: Arc::new(move |_| c),
        grad: Arc::new(|_| [0.0; 3]),
        hess: Arc::new(|_| [[0.0; 3]; 3]),
        third: Arc::new(|_| [[[0.0; 3]; 3]; 3]),
    }
}

pub fn linear(dim: usize, b: Point, c: f64) -> TestFunction {
    TestFunction {
        name: "linear".into(),
        dim,
        support_radius: f64::INFINITY,
        value: Arc::new(move |x| dot(&b, x, dim) + c),
        grad: Arc::new(move |_| b),
        hess: Arc::new(|_| [[0.0; 3]; 3]),
        third: Arc::new(|_| [[[0.0; 3]; 3]; 3]),
    }
}

/// u(x) = 1/2 x^T H x + b . x + c.
pub fn quadratic(dim: usize, h: Hessian, b: Point, c: f64) -> TestFunction {
    let mut hs = h;
    for i in 0..3 {
        for j in 0..3 {
            hs[i][j] = 0.5 * (h[i][j] + h[j][i]);
        }
    }
    TestFunction {
        name: "quadratic".into(),
        dim,
        support_radius: f64::INFINITY,
        value: Arc::new(move |x| {
            0.5 * dot(&mat_vec(&hs, x, dim), x, dim) + dot(&b, x, dim) + c
        }),
        grad: Arc::new(move |x| {
            let hx = mat_vec(&hs, x, dim);
            crate::add(&hx, &b)
        }),
        hess: Arc::new(move |_| hs),
        third: Arc::new(|_| [[[0.0; 3]; 3]; 3]),
    }
}

/// Compactly supported polynomial bump u = (1 - |x|^2 / R^2)^4 on B_R.
pub fn poly_bump(dim: usize, radius: f64) -> TestFunction {
    let r2 = radius * radius;
    from_radial_profile(
        "poly_bump",
        dim,
        radius,
        Arc::new(move |q: f64| {
            let u = 1.0 - q / r2;
            if u <= 0.0 {
                return [0.0; 4];
            }
            [
                u.powi(4),
                -4.0 * u.powi(3) / r2,
                12.0 * u * u / (r2 * r2),
                -24.0 * u / (r2 * r2 * r2),
            ]
        }),
    )
}

/// Neumann-compatible cosine mode on an interval [a, b]:
/// u = cos(k pi (x - a) / (b - a)) near the interval, smoothly cut to zero a
/// half-length beyond each endpoint so that the global extension is C^3 with
/// compact support. u'(a) = u'(b) = 0 exactly.
pub fn cos_interval(a: f64, b: f64, k: usize) -> Result<TestFunction> {
    if b <= a {
        return Err(Error::Parameter("interval requires a < b".into()));
    }
    if k == 0 {
        return Err(Error::Parameter("mode number k must be positive".into()));
    }
    let len = b - a;
    let mid = 0.5 * (a + b);
    let omega = k as f64 * std::f64::consts::PI / len;
    let profile = Arc::new(move |x: f64| {
        let c = cos_profile(omega, -omega * a, x);
        let cut = even_cutoff(x - mid, len, 1.5 * len);
        product3(c, cut)
    });
    let support = mid.abs() + 1.5 * len;
    Ok(from_scalar_1d(&format!("cos_interval(k={k})"), support, profile))
}

/// Neumann-compatible radial function on the ball B_R(0):
/// u = (|x|^2 - R^2)^2 c(|x|^2) with a C^3 radial cutoff keeping the global
/// extension compactly supported. grad u is parallel to the outward normal
/// with factor (q - R^2), hence M grad u . n = 0 on the sphere for every M.
pub fn ball_radial(dim: usize, radius: f64) -> Result<TestFunction> {
    if radius <= 0.0 {
        return Err(Error::Parameter("ball radius must be positive".into()));
    }
    let r2 = radius * radius;
    let q0 = 2.25 * r2; // cutoff starts at |x| = 1.5 R
    let q1 = 6.25 * r2; // vanishes beyond |x| = 2.5 R
    let scale = 1.0 / (r2 * r2); // normalize so u(0) = 1
    let profile = Arc::new(move |q: f64| {
        let d = q - r2;
        let base = [
            scale * d * d,
            scale * 2.0 * d,
            scale * 2.0,
            0.0,
        ];
        product3(base, ramp_down(q, q0, q1))
    });
    Ok(from_radial_profile(
        "ball_radial",
        dim,
        2.5 * radius,
        profile,
    ))
}

/// Parameters of the half-space recipe: u(x) = w(x_1) phi(d), with
/// d = x_2 - gamma(x_1) the vertical distance to the boundary graph,
/// phi(t) = t^2 eta(|t|) vanishing to second order at the boundary (exact
/// Neumann compatibility) and cut off for |t| >= 2, and
/// w(s) = cos(omega s) cut off for |s| >= 4.
pub fn half_space_profile(graph: crate::domains::GraphFn, omega: f64) -> TestFunction {
    let phi = move |t: f64| -> [f64; 4] {
        let base = [t * t, 2.0 * t, 2.0, 0.0];
        product3(base, even_cutoff(t, 1.0, 2.0))
    };
    let w = move |s: f64| -> [f64; 4] {
        product3(cos_profile(omega, 0.0, s), even_cutoff(s, 2.0, 4.0))
    };
    let g = graph;
    let eval = move |x: &Point| -> ([f64; 4], [f64; 4], f64, f64, f64) {
        let s = x[0];
        let t = x[1] - g.value(&[s]);
        (w(s), phi(t), -g.d1(s), -g.d2(s), -g.d3(s))
    };
    let (e1, e2, e3, e4) = (eval, eval, eval, eval);
    TestFunction {
        name: "half_space_profile".into(),
        dim: 2,
        support_radius: f64::INFINITY,
        value: Arc::new(move |x: &Point| {
            let (w, p, _, _, _) = e1(x);
            w[0] * p[0]
        }),
        grad: Arc::new(move |x: &Point| {
            let (w, p, t1, _, _) = e2(x);
            [
                w[1] * p[0] + w[0] * p[1] * t1,
                w[0] * p[1],
                0.0,
            ]
        }),
        hess: Arc::new(move |x: &Point| {
            let (w, p, t1, t11, _) = e3(x);
            let mut h = [[0.0; 3]; 3];
            h[0][0] = w[2] * p[0]
                + 2.0 * w[1] * p[1] * t1
                + w[0] * p[2] * t1 * t1
                + w[0] * p[1] * t11;
            h[0][1] = w[1] * p[1] + w[0] * p[2] * t1;
            h[1][0] = h[0][1];
            h[1][1] = w[0] * p[2];
            h
        }),
        third: Arc::new(move |x: &Point| {
            let (w, p, t1, t11, t111) = e4(x);
            let mut t = [[[0.0; 3]; 3]; 3];
            let d111 = w[3] * p[0]
                + 3.0 * w[2] * p[1] * t1
                + 3.0 * w[1] * p[2] * t1 * t1
                + w[0] * p[3] * t1 * t1 * t1
                + 3.0 * w[1] * p[1] * t11
                + 3.0 * w[0] * p[2] * t1 * t11
                + w[0] * p[1] * t111;
            let d112 = w[2] * p[1]
                + 2.0 * w[1] * p[2] * t1
                + w[0] * p[3] * t1 * t1
                + w[0] * p[2] * t11;
            let d122 = w[1] * p[2] + w[0] * p[3] * t1;
            let d222 = w[0] * p[3];
            t[0][0][0] = d111;
            t[0][0][1] = d112;
            t[0][1][0] = d112;
            t[1][0][0] = d112;
            t[0][1][1] = d122;
            t[1][0][1] = d122;
            t[1][1][0] = d122;
            t[1][1][1] = d222;
            t
        }),
    }
}

// ---------------------------------------------------------------------------
// Compatibility check
// ---------------------------------------------------------------------------

/// Worst |M grad u . n| over boundary samples, which must vanish for the
/// nonlocal and local Neumann problems to share the test function.
pub fn neumann_compat_check(
    u: &TestFunction,
    domain: &Domain,
    m: &Matrix,
    samples: usize,
) -> Result<f64> {
    if !domain.has_boundary() {
        return Err(Error::Contract(
            "compatibility check is only defined for domains with boundary".into(),
        ));
    }
    let mut worst = 0.0f64;
    for (x, n) in domain.boundary_samples(samples)? {
        let flux = dot(&mat_vec(m, &u.gradient(&x), u.dim), &n, u.dim);
        worst = worst.max(flux.abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::GraphFn;
    use crate::norm;
    use crate::moments::IDENTITY;
    use approx::assert_relative_eq;

    /// Central finite differences of value/gradient/hessian to cross-check
    /// the analytic derivatives.
    fn check_derivatives(u: &TestFunction, x: &Point, tol: f64) {
        let h = 1e-5;
        let dim = u.dim;
        let g = u.gradient(x);
        let hess = u.hessian(x);
        let third = u.third(x);
        for i in 0..dim {
            let mut xp = *x;
            let mut xm = *x;
            xp[i] += h;
            xm[i] -= h;
            let fd = (u.value(&xp) - u.value(&xm)) / (2.0 * h);
            assert!(
                (fd - g[i]).abs() <= tol * (1.0 + g[i].abs()),
                "{}: grad[{i}] analytic {} vs fd {} at {:?}",
                u.name,
                g[i],
                fd,
                x
            );
            let (gp, gm) = (u.gradient(&xp), u.gradient(&xm));
            for j in 0..dim {
                let fd = (gp[j] - gm[j]) / (2.0 * h);
                assert!(
                    (fd - hess[i][j]).abs() <= tol * (1.0 + hess[i][j].abs()),
                    "{}: hess[{i}][{j}] analytic {} vs fd {}",
                    u.name,
                    hess[i][j],
                    fd
                );
            }
            let (hp, hm) = (u.hessian(&xp), u.hessian(&xm));
            for j in 0..dim {
                for k in 0..dim {
                    let fd = (hp[j][k] - hm[j][k]) / (2.0 * h);
                    assert!(
                        (fd - third[i][j][k]).abs() <= tol * (1.0 + third[i][j][k].abs()),
                        "{}: third[{i}][{j}][{k}] analytic {} vs fd {}",
                        u.name,
                        third[i][j][k],
                        fd
                    );
                }
            }
        }
    }

    #[test]
    fn smoothstep7_is_c3() {
        for (t, expect) in [(0.0, 0.0), (1.0, 1.0), (0.5, 0.5)] {
            assert_relative_eq!(smoothstep7(t)[0], expect, epsilon = 1e-12);
        }
        // derivative continuity at the ends
        for t in [1e-7, 1.0 - 1e-7] {
            let v = smoothstep7(t);
            for d in 1..4 {
                assert!(v[d].abs() < 1e-3, "derivative {d} at t={t}: {}", v[d]);
            }
        }
        // fd check of the derivative chain
        let h = 1e-6;
        for t in [0.2, 0.5, 0.8] {
            let v = smoothstep7(t);
            for d in 0..3 {
                let fd = (smoothstep7(t + h)[d] - smoothstep7(t - h)[d]) / (2.0 * h);
                assert_relative_eq!(fd, v[d + 1], max_relative = 1e-4, epsilon = 1e-4);
            }
        }
    }

    #[test]
    fn derivative_suite_all_recipes() {
        let pts1 = [
            [0.0, 0.0, 0.0],
            [0.3, 0.0, 0.0],
            [-0.9, 0.0, 0.0],
            [1.2, 0.0, 0.0],
        ];
        let pts2 = [
            [0.1, -0.2, 0.0],
            [0.7, 0.6, 0.0],
            [-1.3, 0.4, 0.0],
            [0.0, 1.9, 0.0],
        ];
        let q = quadratic(
            2,
            [[2.0, 0.7, 0.0], [0.7, -1.0, 0.0], [0.0, 0.0, 0.0]],
            [0.3, -0.5, 0.0],
            1.0,
        );
        for x in pts2 {
            check_derivatives(&q, &x, 1e-5);
        }
        let pb = poly_bump(2, 1.5);
        for x in pts2 {
            check_derivatives(&pb, &x, 1e-5);
        }
        let ci = cos_interval(-1.0, 1.0, 2).unwrap();
        for x in pts1 {
            check_derivatives(&ci, &x, 1e-5);
        }
        let br = ball_radial(2, 1.0).unwrap();
        for x in pts2 {
            check_derivatives(&br, &x, 1e-5);
        }
        let hs = half_space_profile(GraphFn::new(0.1), 1.1);
        for x in [
            [0.3, 0.5, 0.0],
            [-1.0, 0.8, 0.0],
            [0.5, -0.3, 0.0],
            [2.5, 1.2, 0.0],
            [0.0, 0.05, 0.0],
        ] {
            check_derivatives(&hs, &x, 1e-4);
        }
    }

    #[test]
    fn remainder_taylor_matches_direct() {
        let pb = poly_bump(2, 1.5);
        let x = [0.3, -0.2, 0.0];
        for h in [1e-2, 1e-3, 1e-4] {
            let z = [0.6 * h, -0.8 * h, 0.0];
            let direct = pb.remainder(&x, &z);
            let taylor = pb.remainder_taylor(&x, &z);
            // fourth-order mismatch
            assert!(
                (direct - taylor).abs() <= 10.0 * h * h * h * h + 1e-14,
                "h={h}: direct {direct:.6e} taylor {taylor:.6e}"
            );
        }
    }

    #[test]
    fn cos_interval_is_exact_inside() {
        let u = cos_interval(0.0, 1.0, 1).unwrap();
        for x in [0.0, 0.25, 0.5, 0.9, 1.0, 1.4, -0.4] {
            let expect = (std::f64::consts::PI * x).cos();
            assert_relative_eq!(u.value(&[x, 0.0, 0.0]), expect, epsilon = 1e-12);
        }
        // support ends 1.5 lengths past the midpoint
        assert_eq!(u.value(&[2.1, 0.0, 0.0]), 0.0);
        assert_eq!(u.value(&[-1.6, 0.0, 0.0]), 0.0);
        // Neumann compatibility at the endpoints
        let dom = Domain::interval(0.0, 1.0).unwrap();
        let worst = neumann_compat_check(&u, &dom, &IDENTITY, 2).unwrap();
        assert!(worst < 1e-14);
    }

    #[test]
    fn ball_radial_compatibility() {
        let dom = Domain::ball(2, [0.0; 3], 1.0).unwrap();
        let u = ball_radial(2, 1.0).unwrap();
        // compatible for the identity and for anisotropic M alike
        let worst = neumann_compat_check(&u, &dom, &IDENTITY, 64).unwrap();
        assert!(worst < 1e-14);
        let m = [[4.0, 1.0, 0.0], [1.0, 2.0, 0.0], [0.0, 0.0, 1.0]];
        let worst = neumann_compat_check(&u, &dom, &m, 64).unwrap();
        assert!(worst < 1e-14);
    }

    #[test]
    fn half_space_compatibility_even_when_curved() {
        let g = GraphFn::new(0.1);
        let dom = Domain::HalfSpaceGraph {
            dim: 2,
            graph: g,
            rotation: None,
        };
        let u = half_space_profile(g, 1.1);
        let worst = neumann_compat_check(&u, &dom, &IDENTITY, 256).unwrap();
        assert!(worst < 1e-14, "worst flux {worst:.3e}");
        // nonzero second normal derivative at the boundary keeps the
        // boundary-layer mechanism alive: d^2 u / d t^2 = 2 w(s)
        let x0 = [0.0, 0.1, 0.0]; // on the boundary (gamma(0) = 0.1)
        assert_relative_eq!(u.hessian(&x0)[1][1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn incompatible_function_detected() {
        // linear u has grad = b everywhere; flux b . n != 0 at an endpoint
        let u = linear(1, [1.0, 0.0, 0.0], 0.0);
        let dom = Domain::interval(0.0, 1.0).unwrap();
        let worst = neumann_compat_check(&u, &dom, &IDENTITY, 2).unwrap();
        assert_relative_eq!(worst, 1.0);
        // and full space has no boundary to check
        let fs = Domain::FullSpace { dim: 1 };
        assert!(neumann_compat_check(&u, &fs, &IDENTITY, 2).is_err());
    }

    #[test]
    fn linear_combination_and_pullback() {
        let u1 = poly_bump(2, 1.0);
        let u2 = quadratic(
            2,
            [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0]],
            [0.0; 3],
            0.0,
        );
        let comb = TestFunction::linear_combination(2.0, &u1, -3.0, &u2).unwrap();
        let x = [0.3, 0.4, 0.0];
        assert_relative_eq!(
            comb.value(&x),
            2.0 * u1.value(&x) - 3.0 * u2.value(&x),
            epsilon = 1e-14
        );
        check_derivatives(&comb, &x, 1e-5);

        let b = [[1.0, 0.5, 0.0], [-0.2, 0.8, 0.0], [0.0, 0.0, 1.0]];
        let v = u1.pullback_linear(&b);
        let bx = mat_vec(&b, &x, 2);
        assert_relative_eq!(v.value(&x), u1.value(&bx), epsilon = 1e-14);
        check_derivatives(&v, &x, 1e-5);
    }

    #[test]
    fn radial_profile_vanishes_with_derivatives_at_support() {
        let u = poly_bump(2, 1.0);
        let x = [1.0, 0.0, 0.0];
        assert_eq!(u.value(&x), 0.0);
        assert_eq!(norm(&u.gradient(&x), 2), 0.0);
        assert_eq!(u.hessian(&x)[0][0], 0.0);
        // third derivative also vanishes: (1-q)^4 has 4 vanishing orders in q
        assert_eq!(u.third(&x)[0][0][0], 0.0);
    }
}
