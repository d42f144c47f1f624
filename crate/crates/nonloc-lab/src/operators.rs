//! Pointwise evaluation of the nonlocal operators: the regularized full-space
//! form, the principal-value validation sequence, the two domain routes of
//! the complement decomposition, the local operator -div(M grad u), and the
//! energy identity check.

use serde::Serialize;

use crate::domains::Domain;
use crate::error::{Error, Result};
use crate::functions::TestFunction;
use crate::kernel::KernelFamily;
use crate::moments::{mat_vec, Matrix};
use crate::quadrature::{self, Estimate, QuadratureConfig, Region};
use crate::{dot, norm, sub, Point};

/// Evaluation route for domain operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// L_eps^Omega u(x) = L_eps^{R^n} u(x) - complement integral (the
    /// production route).
    ComplementDecomposition,
    /// Direct regularized integral over Omega plus the gradient term moved to
    /// the complement by full-space evenness (the cross-check route).
    Regularized,
}

/// Relative offset below which the direct difference
/// u(x) - u(x-z) - grad u(x).z cancels catastrophically and the analytic
/// Taylor form is used instead.
const TAYLOR_SWITCH: f64 = 1e-4;

fn kernel_cfg(fam: &KernelFamily, cfg: &QuadratureConfig) -> QuadratureConfig {
    cfg.with_alpha(fam.density.alpha).with_far(fam.reach(cfg))
}

/// J_eps(z) * (u(x) - u(x - z) - grad u(x) . z), with the analytic Taylor
/// switch near z = 0.
fn remainder_integrand(u: &TestFunction, fam: &KernelFamily, x: &Point, z: &Point) -> f64 {
    let jz = fam.kernel_unchecked(z);
    if jz == 0.0 {
        return 0.0;
    }
    let r = norm(z, u.dim);
    let rem = if r < TAYLOR_SWITCH * fam.epsilon {
        u.remainder_taylor(x, z)
    } else {
        u.remainder(x, z)
    };
    jz * rem
}

/// L_eps u(x) on the full space via the absolutely convergent regularized
/// integrand (no principal value needed).
pub fn apply_nonlocal_fullspace(
    u: &TestFunction,
    fam: &KernelFamily,
    x: &Point,
    cfg: &QuadratureConfig,
) -> Result<Estimate> {
    if u.dim != fam.density.dim {
        return Err(Error::Contract("dimension mismatch".into()));
    }
    let qcfg = kernel_cfg(fam, cfg);
    quadrature::integrate_singular(
        u.dim,
        |z: &Point| remainder_integrand(u, fam, x, z),
        &qcfg,
        Some(fam.epsilon),
    )
}

/// The local operator -div(M grad u)(x) = -sum_ij M_ij d_i d_j u(x).
pub fn apply_local(u: &TestFunction, m: &Matrix, x: &Point) -> f64 {
    let h = u.hessian(x);
    let mut s = 0.0;
    for i in 0..u.dim {
        for j in 0..u.dim {
            s += m[i][j] * h[i][j];
        }
    }
    -s
}

/// Truncated principal-value sequence and its Richardson limit.
#[derive(Debug, Clone, Serialize)]
pub struct PvSequence {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub limit: f64,
    /// Magnitude of the extrapolation correction.
    pub error: f64,
}

/// Compute v(r) = int_{r <= |z|} J_eps(z)(u(x) - u(x - z)) dz for each radius
/// in the (strictly decreasing) sequence, and extrapolate r -> 0 with the
/// known truncation order O(r^{2 - alpha}).
pub fn apply_nonlocal_pv(
    u: &TestFunction,
    fam: &KernelFamily,
    x: &Point,
    radii: &[f64],
    cfg: &QuadratureConfig,
) -> Result<PvSequence> {
    if radii.is_empty() {
        return Err(Error::Parameter("empty radius sequence".into()));
    }
    for w in radii.windows(2) {
        if w[1] >= w[0] {
            return Err(Error::Parameter("radii must be strictly decreasing".into()));
        }
    }
    if *radii.last().unwrap() <= 0.0 {
        return Err(Error::Parameter("radii must be positive".into()));
    }
    let qcfg = kernel_cfg(fam, cfg);
    let reach = fam.reach(cfg);
    let dim = u.dim;
    let diff = |z: &Point| {
        let jz = fam.kernel_unchecked(z);
        if jz == 0.0 {
            0.0
        } else {
            jz * (u.value(x) - u.value(&sub(x, z)))
        }
    };
    let mut values = Vec::with_capacity(radii.len());
    let mut acc = 0.0;
    let mut upper = reach;
    for &r in radii {
        let lo = r.min(upper);
        acc += quadrature::integrate_annulus(dim, diff, lo, upper, &qcfg)?.value;
        values.push(acc);
        upper = lo;
    }
    let k = values.len();
    let (limit, error) = if k >= 2 {
        let beta = 2.0 - fam.density.alpha;
        let (r1, r0) = (radii[k - 1].powf(beta), radii[k - 2].powf(beta));
        let corr = (values[k - 1] - values[k - 2]) * r1 / (r0 - r1);
        (values[k - 1] + corr, corr.abs())
    } else {
        (values[0], f64::NAN)
    };
    // representation check: increments must keep shrinking once the radii do
    let scale = values
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-300);
    let mut prev_inc: Option<f64> = None;
    for w in values.windows(2) {
        let inc = (w[1] - w[0]).abs();
        if let Some(p) = prev_inc {
            if inc > 2.0 * p && inc > 1e-10 * scale && inc > 100.0 * cfg.abs_tol {
                return Err(Error::Certification(format!(
                    "P.V. sequence is not Cauchy: increment grew from {p:.3e} to {inc:.3e}"
                )));
            }
        }
        prev_inc = Some(inc);
    }
    Ok(PvSequence {
        radii: radii.to_vec(),
        values,
        limit,
        error,
    })
}

/// L_eps^Omega u(x) for a strictly interior point, by either route.
pub fn apply_nonlocal_domain(
    u: &TestFunction,
    fam: &KernelFamily,
    domain: &Domain,
    x: &Point,
    route: Route,
    cfg: &QuadratureConfig,
) -> Result<Estimate> {
    if !domain.has_boundary() {
        return apply_nonlocal_fullspace(u, fam, x, cfg);
    }
    if domain.boundary_distance(x) <= 0.0 {
        return Err(Error::Contract(format!(
            "evaluation point {:?} is not strictly interior",
            &x[..u.dim]
        )));
    }
    let qcfg = kernel_cfg(fam, cfg);
    let reach = fam.reach(cfg);
    let dim = u.dim;
    let region = Region::ComplementInBall {
        domain,
        center: *x,
        radius: reach,
    };
    match route {
        Route::ComplementDecomposition => {
            let full = apply_nonlocal_fullspace(u, fam, x, cfg)?;
            let comp = quadrature::integrate_over_region(
                dim,
                |y: &Point| {
                    let z = sub(x, y);
                    let jz = fam.kernel_unchecked(&z);
                    if jz == 0.0 {
                        0.0
                    } else {
                        jz * (u.value(x) - u.value(y))
                    }
                },
                &region,
                &qcfg,
            )?;
            Ok(Estimate {
                value: full.value - comp.value,
                error: full.error + comp.error,
            })
        }
        Route::Regularized => {
            let g = u.gradient(x);
            let inside = quadrature::integrate_singular_in_domain(
                dim,
                |y: &Point| {
                    let z = sub(x, y);
                    remainder_integrand(u, fam, x, &z)
                },
                domain,
                x,
                reach,
                &qcfg,
            )?;
            // int_Omega J grad u . (x - y) dy
            //   = -int_{complement} J grad u . (x - y) dy  (evenness)
            let grad_term = quadrature::integrate_over_region(
                dim,
                |y: &Point| {
                    let z = sub(x, y);
                    let jz = fam.kernel_unchecked(&z);
                    if jz == 0.0 {
                        0.0
                    } else {
                        jz * dot(&g, &z, dim)
                    }
                },
                &region,
                &qcfg,
            )?;
            Ok(Estimate {
                value: inside.value - grad_term.value,
                error: inside.error + grad_term.error,
            })
        }
    }
}

/// Two-sided evaluation of the energy identity on an interval:
/// int_Omega (L_eps^Omega u) u = 1/2 int_Omega int_Omega J_eps |u(x)-u(y)|^2.
#[derive(Debug, Clone, Serialize)]
pub struct EnergyReport {
    pub lhs: f64,
    pub rhs: f64,
    pub relative_gap: f64,
}

pub fn energy_identity_check(
    u: &TestFunction,
    fam: &KernelFamily,
    domain: &Domain,
    panels: usize,
    cfg: &QuadratureConfig,
) -> Result<EnergyReport> {
    let Domain::Interval { a, b } = domain else {
        return Err(Error::Parameter(
            "energy identity check is implemented for intervals".into(),
        ));
    };
    let (a, b) = (*a, *b);
    let qcfg = kernel_cfg(fam, cfg);
    let reach = fam.reach(cfg);
    // fixed composite Gauss rule in x, with panel edges at the points where
    // the kernel reach touches the boundary (the integrands are smooth on
    // each panel)
    let mut edges: Vec<f64> = (0..=panels.max(8))
        .map(|k| a + (b - a) * k as f64 / panels.max(8) as f64)
        .collect();
    for e in [a + reach, b - reach] {
        if e > a && e < b {
            edges.push(e);
        }
    }
    edges.sort_by(|p, q| p.partial_cmp(q).unwrap());
    edges.dedup();
    let rule = quadrature::gauss_legendre(16);

    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for w in edges.windows(2) {
        let half = 0.5 * (w[1] - w[0]);
        let mid = 0.5 * (w[0] + w[1]);
        for (xi, wt) in rule.0.iter().zip(rule.1.iter()) {
            let x = [mid + half * xi, 0.0, 0.0];
            let lu = apply_nonlocal_domain(
                u,
                fam,
                domain,
                &x,
                Route::ComplementDecomposition,
                cfg,
            )?;
            lhs += half * wt * lu.value * u.value(&x);
            let inner = quadrature::integrate_singular_in_domain(
                1,
                |y: &Point| {
                    let z = sub(&x, y);
                    let jz = fam.kernel_unchecked(&z);
                    if jz == 0.0 {
                        0.0
                    } else {
                        let du = u.value(&x) - u.value(y);
                        jz * du * du
                    }
                },
                domain,
                &x,
                reach,
                &qcfg,
            )?;
            rhs += half * wt * 0.5 * inner.value;
        }
    }
    if rhs < 0.0 {
        return Err(Error::Certification(format!(
            "energy right-hand side is negative: {rhs:.6e}"
        )));
    }
    let scale = lhs.abs().max(rhs.abs()).max(1e-300);
    Ok(EnergyReport {
        lhs,
        rhs,
        relative_gap: (lhs - rhs).abs() / scale,
    })
}

/// Check that a momentum matrix and hessian contraction reproduces the
/// nonlocal value for a globally quadratic u (used by tests and the harness
/// sanity gate).
pub fn quadratic_reference(h: &Matrix, m: &Matrix, dim: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            s += m[i][j] * h[i][j];
        }
    }
    -s
}

/// Convenience: M-weighted flux grad u(x) . M n, used in diagnostics.
pub fn normal_flux(u: &TestFunction, m: &Matrix, x: &Point, n: &Point) -> f64 {
    dot(&mat_vec(m, &u.gradient(x), u.dim), n, u.dim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions;
    use crate::kernel;
    use crate::moments;
    use approx::assert_relative_eq;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    fn bump_family(dim: usize, eps: f64) -> KernelFamily {
        KernelFamily::new(kernel::bump_density_mass_2n(dim, 1.0).unwrap(), eps).unwrap()
    }

    #[test]
    fn constant_and_linear_annihilated() {
        let fam = bump_family(1, 0.3);
        let x = [0.2, 0.0, 0.0];
        let c = functions::constant(1, 5.0);
        let v = apply_nonlocal_fullspace(&c, &fam, &x, &cfg()).unwrap();
        assert!(v.value.abs() < 1e-10);
        let l = functions::linear(1, [2.0, 0.0, 0.0], -1.0);
        let v = apply_nonlocal_fullspace(&l, &fam, &x, &cfg()).unwrap();
        assert!(v.value.abs() < 1e-10);
        assert_eq!(apply_local(&l, &moments::IDENTITY, &x), 0.0);
    }

    #[test]
    fn quadratic_exactness_across_eps() {
        // nonlocal value on a global quadratic is -M : H for every eps
        let rho = kernel::bump_density_mass_2n(2, 1.0).unwrap();
        let mm = moments::momentum_matrix(&rho, &cfg()).unwrap();
        let h = [[1.5, 0.4, 0.0], [0.4, -0.7, 0.0], [0.0, 0.0, 0.0]];
        let u = functions::quadratic(2, h, [0.1, -0.2, 0.0], 0.3);
        let x = [0.4, -0.1, 0.0];
        let expect = quadratic_reference(&h, &mm.m_fixed(), 2);
        assert_relative_eq!(expect, apply_local(&u, &mm.m_fixed(), &x), epsilon = 1e-12);
        for eps in [1.0, 0.3, 0.05] {
            let fam = KernelFamily::new(rho.clone(), eps).unwrap();
            let v = apply_nonlocal_fullspace(&u, &fam, &x, &cfg()).unwrap();
            assert!(
                (v.value - expect).abs() <= 1e-6 * expect.abs().max(1.0),
                "eps {eps}: nonlocal {} vs local {}",
                v.value,
                expect
            );
        }
    }

    #[test]
    fn linearity() {
        let fam = bump_family(2, 0.2);
        let u1 = functions::poly_bump(2, 1.5);
        let u2 = functions::quadratic(
            2,
            [[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 0.0]],
            [0.0; 3],
            0.0,
        );
        let comb = TestFunction::linear_combination(2.5, &u1, -1.5, &u2).unwrap();
        for x in [[0.1, 0.2, 0.0], [-0.5, 0.3, 0.0]] {
            let v1 = apply_nonlocal_fullspace(&u1, &fam, &x, &cfg()).unwrap().value;
            let v2 = apply_nonlocal_fullspace(&u2, &fam, &x, &cfg()).unwrap().value;
            let vc = apply_nonlocal_fullspace(&comb, &fam, &x, &cfg()).unwrap().value;
            let expect = 2.5 * v1 - 1.5 * v2;
            assert!(
                (vc - expect).abs() <= 1e-9 * expect.abs().max(1.0),
                "combined {vc} vs {expect}"
            );
        }
    }

    #[test]
    fn pv_sequence_validates_representation() {
        let fam = bump_family(1, 0.4);
        let x = [0.1, 0.0, 0.0];
        // linear u: every truncated value vanishes by evenness
        let l = functions::linear(1, [3.0, 0.0, 0.0], 0.0);
        let radii: Vec<f64> = (1..12).map(|k| 0.4 * 0.5f64.powi(k)).collect();
        let pv = apply_nonlocal_pv(&l, &fam, &x, &radii, &cfg()).unwrap();
        for v in &pv.values {
            assert!(v.abs() < 1e-9, "truncated value {v:.3e}");
        }
        // quadratic u: limit matches the regularized full-space value
        let h = [[2.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]];
        let q = functions::quadratic(1, h, [0.0; 3], 0.0);
        let pv = apply_nonlocal_pv(&q, &fam, &x, &radii, &cfg()).unwrap();
        let reg = apply_nonlocal_fullspace(&q, &fam, &x, &cfg()).unwrap();
        assert_relative_eq!(pv.limit, reg.value, max_relative = 1e-6);
        // radius beyond the kernel reach: truncated value is exactly zero
        let pv = apply_nonlocal_pv(&q, &fam, &x, &[0.5], &cfg()).unwrap();
        assert_eq!(pv.values[0], 0.0);
    }

    #[test]
    fn domain_routes_agree_on_interval() {
        let dom = Domain::interval(0.0, 1.0).unwrap();
        let fam = bump_family(1, 0.2);
        let u = functions::cos_interval(0.0, 1.0, 1).unwrap();
        for x0 in [0.05, 0.3, 0.5, 0.93] {
            let x = [x0, 0.0, 0.0];
            let va = apply_nonlocal_domain(
                &u,
                &fam,
                &dom,
                &x,
                Route::ComplementDecomposition,
                &cfg(),
            )
            .unwrap()
            .value;
            let vb = apply_nonlocal_domain(&u, &fam, &dom, &x, Route::Regularized, &cfg())
                .unwrap()
                .value;
            assert!(
                (va - vb).abs() <= 1e-8 * va.abs().max(1.0),
                "x={x0}: complement {va:.12e} vs regularized {vb:.12e}"
            );
        }
    }

    #[test]
    fn domain_reduces_to_fullspace_deep_inside() {
        let dom = Domain::interval(0.0, 1.0).unwrap();
        let fam = bump_family(1, 0.1); // reach 0.1
        let u = functions::cos_interval(0.0, 1.0, 1).unwrap();
        let x = [0.5, 0.0, 0.0];
        let vd = apply_nonlocal_domain(&u, &fam, &dom, &x, Route::ComplementDecomposition, &cfg())
            .unwrap()
            .value;
        let vf = apply_nonlocal_fullspace(&u, &fam, &x, &cfg()).unwrap().value;
        assert_relative_eq!(vd, vf, max_relative = 1e-12);
        // constant is annihilated on the domain too
        let c = functions::constant(1, 2.0);
        let vc = apply_nonlocal_domain(&c, &fam, &dom, &x, Route::ComplementDecomposition, &cfg())
            .unwrap()
            .value;
        assert!(vc.abs() < 1e-10);
    }

    #[test]
    fn domain_rejects_exterior_points() {
        let dom = Domain::interval(0.0, 1.0).unwrap();
        let fam = bump_family(1, 0.2);
        let u = functions::cos_interval(0.0, 1.0, 1).unwrap();
        for x0 in [0.0, 1.0, -0.3, 2.0] {
            let r = apply_nonlocal_domain(
                &u,
                &fam,
                &dom,
                &[x0, 0.0, 0.0],
                Route::ComplementDecomposition,
                &cfg(),
            );
            assert!(r.is_err(), "x={x0} should be rejected");
        }
    }

    #[test]
    fn local_operator_values() {
        let u = functions::cos_interval(0.0, 1.0, 1).unwrap();
        let x = [0.0, 0.0, 0.0];
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        // -u''(0) = pi^2 for u = cos(pi x)
        assert_relative_eq!(apply_local(&u, &moments::IDENTITY, &x), pi2, epsilon = 1e-10);
        let m = [[3.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert_relative_eq!(apply_local(&u, &m, &x), 3.0 * pi2, epsilon = 1e-10);
    }

    #[test]
    fn energy_identity_on_interval() {
        let dom = Domain::interval(0.0, 1.0).unwrap();
        let fam = bump_family(1, 0.2);
        let u = functions::cos_interval(0.0, 1.0, 1).unwrap();
        let report = energy_identity_check(&u, &fam, &dom, 16, &cfg()).unwrap();
        assert!(report.rhs >= 0.0);
        assert!(
            report.relative_gap <= 1e-4,
            "lhs {:.10e} rhs {:.10e} gap {:.3e}",
            report.lhs,
            report.rhs,
            report.relative_gap
        );
        // constants carry no energy
        let c = functions::constant(1, 4.0);
        let report = energy_identity_check(&c, &fam, &dom, 8, &cfg()).unwrap();
        assert!(report.lhs.abs() < 1e-10 && report.rhs.abs() < 1e-12);
    }

    #[test]
    fn fractional_kernel_evaluations_finite() {
        // genuinely singular kernel (alpha = 1.5): evaluations stay finite
        // with small error estimates
        let rho = kernel::make_fractional_density(1, 0.75, 2.0, 1.0).unwrap();
        let fam = KernelFamily::new(rho, 0.3).unwrap();
        let u = functions::poly_bump(1, 1.0);
        let x = [0.2, 0.0, 0.0];
        let v = apply_nonlocal_fullspace(&u, &fam, &x, &cfg()).unwrap();
        assert!(v.value.is_finite());
        assert!(v.error <= 1e-6 * v.value.abs().max(1.0));
    }
}
