//! Density functions rho, their scaled families rho_eps and kernels
//! J_eps = rho_eps / |.|^2, together with the certification checks for the
//! standing assumptions: integrability of rho (1 + |x|), the near-origin
//! growth bounds with exponent alpha in (0, 2), and the Dirac-sequence tail
//! behavior of rho_eps.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::{self, QuadratureConfig};
use crate::{norm, scale, unit_sphere_measure, Point};

pub type EvalFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;
pub type GradFn = Arc<dyn Fn(&Point) -> Point + Send + Sync>;

/// An even, nonnegative density rho with its singularity metadata.
///
/// `alpha`, `big_n`, `c0`, `c1` describe the declared growth bounds
/// |rho(x)| <= c0 |x|^{2-alpha-n} (1+|x|)^{-N} and the analogous gradient
/// bound. Declared properties are cross-checked by the certification
/// operations, never inferred from samples.
#[derive(Clone)]
pub struct DensitySpec {
    pub dim: usize,
    pub alpha: f64,
    pub big_n: f64,
    pub c0: f64,
    pub c1: f64,
    /// rho vanishes outside B_{support_radius}(0); `f64::INFINITY` for
    /// non-compact support.
    pub support_radius: f64,
    pub is_radial: bool,
    eval: EvalFn,
    grad: GradFn,
}

impl std::fmt::Debug for DensitySpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DensitySpec")
            .field("dim", &self.dim)
            .field("alpha", &self.alpha)
            .field("big_n", &self.big_n)
            .field("c0", &self.c0)
            .field("c1", &self.c1)
            .field("support_radius", &self.support_radius)
            .field("is_radial", &self.is_radial)
            .finish()
    }
}

impl DensitySpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        dim: usize,
        alpha: f64,
        big_n: f64,
        c0: f64,
        c1: f64,
        support_radius: f64,
        is_radial: bool,
        eval: EvalFn,
        grad: GradFn,
    ) -> Result<Self> {
        if !(1..=crate::MAX_DIM).contains(&dim) {
            return Err(Error::Parameter(format!("unsupported dimension {dim}")));
        }
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::Parameter(format!(
                "singularity order alpha must lie in (0, 2), got {alpha}"
            )));
        }
        if big_n <= 3.0 - alpha {
            return Err(Error::Parameter(format!(
                "decay exponent N = {big_n} violates N > 3 - alpha = {}",
                3.0 - alpha
            )));
        }
        if c0 <= 0.0 || c1 <= 0.0 {
            return Err(Error::Parameter("growth constants must be positive".into()));
        }
        if support_radius <= 0.0 {
            return Err(Error::Parameter("support radius must be positive".into()));
        }
        Ok(DensitySpec {
            dim,
            alpha,
            big_n,
            c0,
            c1,
            support_radius,
            is_radial,
            eval,
            grad,
        })
    }

    #[inline]
    pub fn eval(&self, x: &Point) -> f64 {
        (self.eval)(x)
    }

    #[inline]
    pub fn grad(&self, x: &Point) -> Point {
        (self.grad)(x)
    }

    /// The kernel J(x) = rho(x) / |x|^2.
    pub fn kernel(&self, x: &Point) -> Result<f64> {
        let r2 = crate::dot(x, x, self.dim);
        if r2 == 0.0 {
            return Err(Error::Contract("kernel is singular at the origin".into()));
        }
        Ok(self.eval(x) / r2)
    }

    /// ||rho||_{L^1} by singular quadrature.
    pub fn mass(&self, cfg: &QuadratureConfig) -> Result<f64> {
        let cfg = self.resolve_cfg(cfg);
        Ok(quadrature::integrate_singular(self.dim, |x| self.eval(x), &cfg, None)?.value)
    }

    fn resolve_cfg(&self, cfg: &QuadratureConfig) -> QuadratureConfig {
        let mut c = cfg.with_alpha(self.alpha);
        if c.far_truncation.is_none() {
            c.far_truncation = Some(if self.support_radius.is_finite() {
                self.support_radius
            } else {
                50.0
            });
        }
        c
    }
}

/// The eps-indexed pair (rho_eps, J_eps) built from a density.
#[derive(Clone, Debug)]
pub struct KernelFamily {
    pub density: DensitySpec,
    pub epsilon: f64,
}

impl KernelFamily {
    pub fn new(density: DensitySpec, epsilon: f64) -> Result<Self> {
        if epsilon <= 0.0 {
            return Err(Error::Parameter("epsilon must be positive".into()));
        }
        Ok(KernelFamily { density, epsilon })
    }

    /// rho_eps(x) = eps^{-n} rho(x / eps).
    #[inline]
    pub fn eval_scaled_density(&self, x: &Point) -> f64 {
        let n = self.density.dim as i32;
        self.epsilon.powi(-n) * self.density.eval(&scale(x, 1.0 / self.epsilon))
    }

    /// J_eps(x) = rho_eps(x) / |x|^2 for x != 0.
    pub fn eval_scaled_kernel(&self, x: &Point) -> Result<f64> {
        let r2 = crate::dot(x, x, self.density.dim);
        if r2 == 0.0 {
            return Err(Error::Contract("kernel is singular at the origin".into()));
        }
        Ok(self.eval_scaled_density(x) / r2)
    }

    /// As `eval_scaled_kernel` but without the origin check; callers must
    /// guarantee x != 0 (quadrature nodes never sit at the origin).
    #[inline]
    pub fn kernel_unchecked(&self, x: &Point) -> f64 {
        let r2 = crate::dot(x, x, self.density.dim);
        self.eval_scaled_density(x) / r2
    }

    /// Support radius of rho_eps (infinite for non-compact densities).
    pub fn support_radius(&self) -> f64 {
        self.epsilon * self.density.support_radius
    }

    /// Effective truncation radius for integrals against rho_eps.
    pub fn reach(&self, cfg: &QuadratureConfig) -> f64 {
        if self.density.support_radius.is_finite() {
            self.support_radius()
        } else {
            cfg.far_truncation.unwrap_or(50.0 * self.epsilon)
        }
    }

    /// The scaled family as a density in its own right (metadata rescaled
    /// accordingly), used e.g. to check scale invariance of the momentum
    /// matrix.
    pub fn as_density(&self) -> DensitySpec {
        let fam = self.clone();
        let fam2 = self.clone();
        let n = self.density.dim as i32;
        let eps = self.epsilon;
        DensitySpec {
            dim: self.density.dim,
            alpha: self.density.alpha,
            big_n: self.density.big_n,
            c0: self.density.c0 * eps.powf(self.density.alpha - 2.0),
            c1: self.density.c1 * eps.powf(self.density.alpha - 2.0) / eps,
            support_radius: self.density.support_radius * eps,
            is_radial: self.density.is_radial,
            eval: Arc::new(move |x| fam.eval_scaled_density(x)),
            grad: Arc::new(move |x| {
                let g = fam2.density.grad(&scale(x, 1.0 / eps));
                scale(&g, eps.powi(-n - 1))
            }),
        }
    }
}

fn exp_bump(r2: f64) -> f64 {
    if r2 < 1.0 {
        (-1.0 / (1.0 - r2)).exp()
    } else {
        0.0
    }
}

/// d/d(r2) of exp_bump.
fn exp_bump_d(r2: f64) -> f64 {
    if r2 < 1.0 {
        let w = 1.0 - r2;
        -(-1.0 / w).exp() / (w * w)
    } else {
        0.0
    }
}

/// The shipped C-infinity reference bump kappa * exp(-1/(1-|x|^2)) on B_1.
///
/// `alpha` is the declared singularity order used for quadrature flattening
/// and the growth-bound certificates; any alpha in (0, 2) is admissible for a
/// bounded density with compact support.
pub fn bump_density(dim: usize, kappa: f64, alpha: f64) -> Result<DensitySpec> {
    if kappa <= 0.0 {
        return Err(Error::Parameter("kappa must be positive".into()));
    }
    let eval: EvalFn = Arc::new(move |x: &Point| {
        let mut r2 = 0.0;
        for xi in x.iter().take(dim) {
            r2 += xi * xi;
        }
        kappa * exp_bump(r2)
    });
    let grad: GradFn = Arc::new(move |x: &Point| {
        let mut r2 = 0.0;
        for xi in x.iter().take(dim) {
            r2 += xi * xi;
        }
        scale(x, 2.0 * kappa * exp_bump_d(r2))
    });
    let (c0, c1) = fit_growth_constants(dim, alpha, &eval, &grad, true, 0.0);
    DensitySpec::new(dim, alpha, 4.0, c0, c1, 1.0, true, eval, grad)
}

/// Mass of the unit-amplitude bump, by radial quadrature.
fn bump_unit_mass(dim: usize) -> f64 {
    let rule = quadrature::gauss_legendre(64);
    let mut total = 0.0;
    let panels = 8;
    for k in 0..panels {
        let (a, b) = (k as f64 / panels as f64, (k + 1) as f64 / panels as f64);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (xi, wt) in rule.0.iter().zip(rule.1.iter()) {
            let r: f64 = mid + half * xi;
            total += half * wt * exp_bump(r * r) * r.powi(dim as i32 - 1);
        }
    }
    unit_sphere_measure(dim) * total
}

/// The reference bump normalized so that ||rho||_{L^1} = 2n, which makes the
/// momentum matrix the identity.
pub fn bump_density_mass_2n(dim: usize, alpha: f64) -> Result<DensitySpec> {
    let kappa = 2.0 * dim as f64 / bump_unit_mass(dim);
    bump_density(dim, kappa, alpha)
}

/// Smooth monotone step: 0 for t <= 0, 1 for t >= 1, C-infinity in between.
fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let f = (-1.0 / t).exp();
        let g = (-1.0 / (1.0 - t)).exp();
        f / (f + g)
    }
}

fn smooth_step_d(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        let f = (-1.0 / t).exp();
        let g = (-1.0 / (1.0 - t)).exp();
        let fp = f / (t * t);
        let gp = -g / ((1.0 - t) * (1.0 - t));
        (fp * (f + g) - f * (fp + gp)) / ((f + g) * (f + g))
    }
}

/// Truncated fractional density rho(x) = |x|^{2-n-2s} chi(|x|) with a smooth
/// radial cutoff identical to 1 on B_{cutoff_radius} and vanishing outside
/// B_{cutoff_radius + transition_width}. The singularity order is alpha = 2s.
pub fn make_fractional_density(
    dim: usize,
    s: f64,
    cutoff_radius: f64,
    transition_width: f64,
) -> Result<DensitySpec> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Parameter(format!(
            "fractional order s must lie in (0, 1), got {s}"
        )));
    }
    if cutoff_radius <= 0.0 || transition_width <= 0.0 {
        return Err(Error::Parameter(
            "cutoff_radius and transition_width must be positive".into(),
        ));
    }
    let alpha = 2.0 * s;
    let exponent = 2.0 - dim as f64 - 2.0 * s;
    let (rc, w) = (cutoff_radius, transition_width);
    let chi = move |r: f64| smooth_step((rc + w - r) / w);
    let chi_d = move |r: f64| -smooth_step_d((rc + w - r) / w) / w;
    let eval: EvalFn = Arc::new(move |x: &Point| {
        let r = norm(x, dim);
        if r == 0.0 || r >= rc + w {
            return 0.0;
        }
        r.powf(exponent) * chi(r)
    });
    let grad: GradFn = Arc::new(move |x: &Point| {
        let r = norm(x, dim);
        if r == 0.0 || r >= rc + w {
            return [0.0; 3];
        }
        // d/dr [r^e chi(r)] = e r^{e-1} chi + r^e chi'
        let dr = exponent * r.powf(exponent - 1.0) * chi(r) + r.powf(exponent) * chi_d(r);
        scale(x, dr / r)
    });
    let (c0, c1) = fit_growth_constants(dim, alpha, &eval, &grad, true, 0.0);
    DensitySpec::new(
        dim,
        alpha,
        4.0 - alpha + 1.0,
        c0,
        c1,
        rc + w,
        true,
        eval,
        grad,
    )
}

/// Anisotropic construction rho(x) = rho0(Bx) |x|^2 / |Bx|^2 from a radial
/// base density and a symmetric positive-definite B with det B = 1, so that
/// the associated kernel is J(x) = rho0(Bx) / |Bx|^2 and, if
/// ||rho0||_{L^1} = 2n, the momentum matrix is B^{-2}.
pub fn make_anisotropic_density(base: &DensitySpec, b_matrix: &[[f64; 3]; 3]) -> Result<DensitySpec> {
    if !base.is_radial {
        return Err(Error::Parameter(
            "anisotropic construction requires a radial base density".into(),
        ));
    }
    let dim = base.dim;
    crate::moments::require_spd(b_matrix, dim)?;
    let det = crate::moments::det(b_matrix, dim);
    if (det - 1.0).abs() > 1e-10 {
        return Err(Error::Parameter(format!(
            "b_matrix must have determinant 1 (got {det:.12})"
        )));
    }
    let b = *b_matrix;
    let base_for_eval = base.clone();
    let base_for_grad = base.clone();
    let apply_b = move |x: &Point| -> Point {
        let mut y = [0.0; 3];
        for (i, yi) in y.iter_mut().enumerate().take(dim) {
            for (j, xj) in x.iter().enumerate().take(dim) {
                *yi += b[i][j] * xj;
            }
        }
        y
    };
    let apply_b2 = apply_b;
    let eval: EvalFn = Arc::new(move |x: &Point| {
        let bx = apply_b(x);
        let x2 = crate::dot(x, x, dim);
        let bx2 = crate::dot(&bx, &bx, dim);
        if bx2 == 0.0 {
            return 0.0;
        }
        base_for_eval.eval(&bx) * x2 / bx2
    });
    let grad: GradFn = Arc::new(move |x: &Point| {
        let bx = apply_b2(x);
        let x2 = crate::dot(x, x, dim);
        let bx2 = crate::dot(&bx, &bx, dim);
        if bx2 == 0.0 {
            return [0.0; 3];
        }
        let g0 = base_for_grad.eval(&bx);
        let dg0 = base_for_grad.grad(&bx);
        // grad of rho0(Bx): B^T dg0 (B symmetric)
        let bt_dg0 = apply_b2(&dg0);
        // grad of x2 / bx2: 2x / bx2 - x2 * 2 B^T(Bx) / bx2^2
        let bt_bx = apply_b2(&bx);
        let mut out = [0.0; 3];
        for i in 0..dim {
            out[i] = bt_dg0[i] * x2 / bx2
                + g0 * (2.0 * x[i] / bx2 - x2 * 2.0 * bt_bx[i] / (bx2 * bx2));
        }
        out
    });
    // support: |Bx| < R_base, so |x| < R_base / sigma_min(B)
    let sigma_min = crate::moments::min_eigenvalue(b_matrix, dim)?;
    let support = if base.support_radius.is_finite() {
        base.support_radius / sigma_min
    } else {
        f64::INFINITY
    };
    let (c0, c1) = fit_growth_constants(dim, base.alpha, &eval, &grad, support.is_finite(), base.big_n);
    DensitySpec::new(
        dim,
        base.alpha,
        base.big_n,
        c0,
        c1,
        support,
        false,
        eval,
        grad,
    )
}

/// Deterministic unit directions for shell sampling.
pub fn sample_directions(dim: usize, count: usize) -> Vec<Point> {
    match dim {
        1 => vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]],
        2 => (0..count)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * (k as f64 + 0.37) / count as f64;
                [th.cos(), th.sin(), 0.0]
            })
            .collect(),
        3 => {
            // Fibonacci sphere
            let phi = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
            (0..count)
                .map(|k| {
                    let y = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
                    let r = (1.0 - y * y).sqrt();
                    let th = phi * k as f64;
                    [r * th.cos(), y, r * th.sin()]
                })
                .collect()
        }
        d => panic!("unsupported dimension {d}"),
    }
}

/// Witness constants c0, c1 by shell-sampling maximization (log-spaced shells
/// in B_1, a fixed direction set per shell) with a 5% safety margin.
fn fit_growth_constants(
    dim: usize,
    alpha: f64,
    eval: &EvalFn,
    grad: &GradFn,
    compact: bool,
    big_n: f64,
) -> (f64, f64) {
    let dirs = sample_directions(dim, 64);
    let shells = 512;
    let (mut c0, mut c1) = (0.0f64, 0.0f64);
    for j in 0..shells {
        let r = 10f64.powf(-6.0 + 6.0 * j as f64 / (shells - 1) as f64);
        let decay = if compact { 1.0 } else { (1.0 + r).powf(-big_n) };
        let bound0 = r.powf(2.0 - alpha - dim as f64) * decay;
        let bound1 = r.powf(1.0 - alpha - dim as f64) * decay;
        for d in &dirs {
            let x = scale(d, r);
            c0 = c0.max(eval(&x).abs() / bound0);
            let g = grad(&x);
            c1 = c1.max(norm(&g, dim) / bound1);
        }
    }
    (1.05 * c0.max(1e-300), 1.05 * c1.max(1e-300))
}

/// Serializable outcome of a certification check.
#[derive(Debug, Clone, Serialize)]
pub struct Certification {
    pub check: String,
    pub pass: bool,
    pub value: f64,
    pub worst_ratio: f64,
    pub detail: String,
}

/// Numerically certify the integrability condition: the integral of
/// rho (1 + |x|) must be finite, with any tail beyond the truncation radius
/// bounded below tolerance.
pub fn check_integrability(density: &DensitySpec, cfg: &QuadratureConfig) -> Result<Certification> {
    let mut qcfg = cfg.with_alpha(density.alpha);
    let far = if density.support_radius.is_finite() {
        density.support_radius
    } else {
        cfg.far_truncation.unwrap_or(50.0)
    };
    qcfg.far_truncation = Some(far);
    let dim = density.dim;
    let est = match quadrature::integrate_singular(
        dim,
        |x| density.eval(x) * (1.0 + norm(x, dim)),
        &qcfg,
        None,
    ) {
        Ok(e) => e,
        Err(Error::NonConvergence { value, error, .. }) => {
            return Ok(Certification {
                check: "integrability".into(),
                pass: false,
                value,
                worst_ratio: error / value.abs().max(1e-300),
                detail: "near-origin quadrature did not converge; the density may be \
                         more singular than its declared alpha"
                    .into(),
            });
        }
        Err(e) => return Err(e),
    };
    // tail bound from the declared growth constants: for r >= max(far, 1),
    // rho (1+|x|) r^{n-1} <= c0 r^{2 - alpha - N}
    let tail = if density.support_radius.is_finite() {
        0.0
    } else {
        let r0 = far.max(1.0);
        let p = density.big_n + density.alpha - 3.0; // > 0 by construction
        unit_sphere_measure(dim) * density.c0 * r0.powf(-p) / p
    };
    let pass = est.value.is_finite() && tail <= 1e-8 * est.value.max(1.0);
    Ok(Certification {
        check: "integrability".into(),
        pass,
        value: est.value,
        worst_ratio: tail / est.value.max(1e-300),
        detail: format!(
            "integral of rho(1+|x|) = {:.12e} (quadrature error {:.2e}, tail bound {:.2e})",
            est.value, est.error, tail
        ),
    })
}

/// Sample the growth bounds |rho| <= c0 |x|^{2-alpha-n} (1+|x|)^{-N} and
/// |grad rho| <= c1 |x|^{1-alpha-n} (1+|x|)^{-N} on log-spaced shells in
/// B_1 \ {0}. Compact-support densities are checked against the simplified
/// bound without the decay factor.
pub fn check_growth_bounds(density: &DensitySpec, sample_count: usize) -> Result<Certification> {
    let shells = sample_count.max(8);
    let dirs = sample_directions(density.dim, 32);
    let compact = density.support_radius.is_finite();
    let mut worst = 0.0f64;
    let mut worst_at = 0.0;
    for j in 0..shells {
        let r = 10f64.powf(-6.0 + 6.0 * j as f64 / (shells - 1) as f64);
        let decay = if compact {
            1.0
        } else {
            (1.0 + r).powf(-density.big_n)
        };
        let bound0 = density.c0 * r.powf(2.0 - density.alpha - density.dim as f64) * decay;
        let bound1 = density.c1 * r.powf(1.0 - density.alpha - density.dim as f64) * decay;
        for d in &dirs {
            let x = scale(d, r);
            let r0 = density.eval(&x).abs() / bound0;
            let r1 = norm(&density.grad(&x), density.dim) / bound1;
            let m = r0.max(r1);
            if m > worst {
                worst = m;
                worst_at = r;
            }
        }
    }
    let pass = worst <= 1.0 + 1e-9;
    Ok(Certification {
        check: "growth_bounds".into(),
        pass,
        value: worst,
        worst_ratio: worst,
        detail: if pass {
            format!("worst bound ratio {worst:.6} (shell radius {worst_at:.3e})")
        } else {
            format!(
                "growth bound violated: ratio {worst:.6} at shell radius {worst_at:.3e}"
            )
        },
    })
}

/// Tail masses of the scaled family: the integral of rho_eps outside
/// B_delta(0) for each requested eps. By the scaling substitution this is the
/// integral of rho outside B_{delta/eps}(0).
pub fn check_dirac_property(
    density: &DensitySpec,
    delta: f64,
    epsilons: &[f64],
    cfg: &QuadratureConfig,
) -> Result<Vec<f64>> {
    if delta < 0.0 {
        return Err(Error::Parameter("delta must be nonnegative".into()));
    }
    for w in epsilons.windows(2) {
        if w[1] >= w[0] {
            return Err(Error::Parameter("epsilons must be strictly decreasing".into()));
        }
    }
    let far = if density.support_radius.is_finite() {
        density.support_radius
    } else {
        cfg.far_truncation.unwrap_or(50.0)
    };
    let qcfg = cfg.with_alpha(density.alpha).with_far(far);
    let mut out = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        if eps <= 0.0 {
            return Err(Error::Parameter("epsilons must be positive".into()));
        }
        let r0 = delta / eps;
        let tail = if r0 >= far {
            0.0
        } else if r0 == 0.0 {
            quadrature::integrate_singular(density.dim, |x| density.eval(x), &qcfg, None)?.value
        } else {
            quadrature::integrate_annulus(density.dim, |x| density.eval(x), r0, far, &qcfg)?.value
        };
        out.push(tail);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn scaled_density_identities() {
        let rho = bump_density(1, 1.0, 1.0).unwrap();
        let b = rho.eval(&[0.0; 3]);
        let fam1 = KernelFamily::new(rho.clone(), 1.0).unwrap();
        let fam_half = KernelFamily::new(rho.clone(), 0.5).unwrap();
        // eps = 1 is the identity scaling
        for x in [[0.2, 0.0, 0.0], [-0.7, 0.0, 0.0]] {
            assert_eq!(fam1.eval_scaled_density(&x), rho.eval(&x));
        }
        // eps = 0.5 at the origin doubles the 1D amplitude
        assert_relative_eq!(fam_half.eval_scaled_density(&[0.0; 3]), 2.0 * b);
    }

    #[test]
    fn scaled_mass_is_invariant() {
        let rho = bump_density(1, 1.0, 1.0).unwrap();
        let cfg = QuadratureConfig::default();
        let m0 = rho.mass(&cfg).unwrap();
        for eps in [1.0, 0.5, 0.1] {
            let fam = KernelFamily::new(rho.clone(), eps).unwrap();
            let m = fam.as_density().mass(&cfg).unwrap();
            assert_relative_eq!(m, m0, max_relative = 1e-8);
        }
    }

    #[test]
    fn kernel_quotient_and_support() {
        // radial density with rho = 1 at |x| = 2 gives J = 1/4 there
        let rho = DensitySpec::new(
            1,
            1.0,
            4.0,
            10.0,
            10.0,
            3.0,
            true,
            Arc::new(|_x: &Point| 1.0),
            Arc::new(|_x: &Point| [0.0; 3]),
        )
        .unwrap();
        let fam = KernelFamily::new(rho, 1.0).unwrap();
        assert_relative_eq!(fam.eval_scaled_kernel(&[2.0, 0.0, 0.0]).unwrap(), 0.25);
        assert!(fam.eval_scaled_kernel(&[0.0; 3]).is_err());

        let bump = bump_density(1, 1.0, 1.0).unwrap();
        let fam = KernelFamily::new(bump, 0.25).unwrap();
        // beyond eps * support radius the kernel vanishes
        assert_eq!(fam.eval_scaled_kernel(&[0.3, 0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn fractional_density_values() {
        let rho = make_fractional_density(1, 0.5, 2.0, 1.0).unwrap();
        // |x|^{2-1-1} = 1 inside the cutoff
        assert_relative_eq!(rho.eval(&[1.0, 0.0, 0.0]), 1.0);
        assert_relative_eq!(rho.eval(&[-1.0, 0.0, 0.0]), 1.0);
        assert_eq!(rho.eval(&[3.5, 0.0, 0.0]), 0.0);
        let rho = make_fractional_density(1, 0.75, 2.0, 1.0).unwrap();
        assert_relative_eq!(rho.alpha, 1.5);
        // kernel value from the spec'd pointwise identity
        let fam = KernelFamily::new(make_fractional_density(1, 0.5, 2.0, 1.0).unwrap(), 1.0)
            .unwrap();
        assert_relative_eq!(fam.eval_scaled_kernel(&[0.5, 0.0, 0.0]).unwrap(), 4.0);
        assert!(make_fractional_density(1, 1.5, 2.0, 1.0).is_err());
    }

    #[test]
    fn fractional_matches_pure_power_inside_cutoff() {
        let rho = make_fractional_density(2, 0.75, 2.0, 1.0).unwrap();
        for r in [1e-6f64, 1e-3, 0.5, 1.9] {
            let x = [r, 0.0, 0.0];
            let exact = r.powf(2.0 - 2.0 - 1.5);
            assert_relative_eq!(rho.eval(&x), exact, max_relative = 1e-12);
        }
    }

    #[test]
    fn anisotropic_identity_matrix_is_base() {
        let base = bump_density_mass_2n(2, 1.0).unwrap();
        let id = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let rho = make_anisotropic_density(&base, &id).unwrap();
        for x in [[0.3, 0.1, 0.0], [-0.5, 0.4, 0.0], [0.0, 0.9, 0.0]] {
            assert_relative_eq!(rho.eval(&x), base.eval(&x), max_relative = 1e-12);
        }
    }

    #[test]
    fn anisotropic_evenness_and_validation() {
        let base = bump_density_mass_2n(2, 1.0).unwrap();
        let b = [[2.0, 0.0, 0.0], [0.0, 0.5, 0.0], [0.0, 0.0, 1.0]];
        let rho = make_anisotropic_density(&base, &b).unwrap();
        let mut rng_state = 0x2545F4914F6CDD1Du64;
        for _ in 0..1000 {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1);
            let u = ((rng_state >> 33) as f64) / (1u64 << 31) as f64 - 1.0;
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1);
            let v = ((rng_state >> 33) as f64) / (1u64 << 31) as f64 - 1.0;
            let x = [u, v, 0.0];
            let mx = [-u, -v, 0.0];
            let a = rho.eval(&x);
            let b2 = rho.eval(&mx);
            assert!((a - b2).abs() <= 1e-12 * a.abs().max(1.0));
        }
        // det != 1 rejected
        let bad = [[2.0, 0.0, 0.0], [0.0, 0.6, 0.0], [0.0, 0.0, 1.0]];
        assert!(make_anisotropic_density(&base, &bad).is_err());
    }

    #[test]
    fn alpha_out_of_range_rejected() {
        assert!(bump_density(1, 1.0, 2.5).is_err());
        assert!(bump_density(1, 1.0, 2.0).is_err());
    }

    #[test]
    fn integrability_certificate() {
        // compact bump: integral of rho(1+|x|) <= 2 * mass
        let rho = bump_density(1, 1.0, 1.0).unwrap();
        let cfg = QuadratureConfig::default();
        let cert = check_integrability(&rho, &cfg).unwrap();
        assert!(cert.pass);
        let mass = rho.mass(&cfg).unwrap();
        assert!(cert.value <= 2.0 * mass + 1e-12);
        assert!(cert.value >= mass);

        // fractional s = 0.75 in 1D: compare against the adaptive-quadrature
        // oracle with the analytic near-origin antiderivative of r^{2-1-2s}
        let rho = make_fractional_density(1, 0.75, 2.0, 1.0).unwrap();
        let cert = check_integrability(&rho, &cfg).unwrap();
        assert!(cert.pass);
        // near-origin part on [0,\,0.1]: 2 * int r^{-0.5}(1+r) dr
        let a = 0.1f64;
        let near_exact = 2.0 * (2.0 * a.sqrt() + 2.0 / 3.0 * a.powf(1.5));
        let near = quadrature::integrate_annulus(
            1,
            |x: &Point| rho.eval(x) * (1.0 + norm(x, 1)),
            1e-14,
            a,
            &cfg.with_alpha(1.5),
        )
        .unwrap();
        assert_relative_eq!(near.value, near_exact, max_relative = 1e-5);
        assert!(cert.value > near_exact);
    }

    #[test]
    fn growth_bound_certificates() {
        let rho = make_fractional_density(1, 0.5, 2.0, 1.0).unwrap();
        assert!(check_growth_bounds(&rho, 128).unwrap().pass);

        let rho = bump_density(2, 3.0, 1.0).unwrap();
        assert!(check_growth_bounds(&rho, 128).unwrap().pass);

        // a density more singular than its declared alpha must fail:
        // rho = |x|^{1-alpha-n} with declared alpha
        let alpha = 0.8;
        let bad = DensitySpec::new(
            1,
            alpha,
            4.0,
            1.0,
            10.0,
            1.0,
            true,
            Arc::new(move |x: &Point| {
                let r = norm(x, 1);
                if r == 0.0 || r > 1.0 {
                    0.0
                } else {
                    r.powf(1.0 - alpha - 1.0)
                }
            }),
            Arc::new(|_x: &Point| [0.0; 3]),
        )
        .unwrap();
        let cert = check_growth_bounds(&bad, 128).unwrap();
        assert!(!cert.pass);
        // at shell radius 1e-3 the exponent mismatch is a factor 1e3
        assert!(cert.worst_ratio > 1e2);
    }

    #[test]
    fn dirac_tails() {
        let rho = bump_density(1, 1.0, 1.0).unwrap();
        let cfg = QuadratureConfig::default();
        // compact support: tails are exactly zero once eps < delta / R_supp
        let tails = check_dirac_property(&rho, 0.5, &[0.4, 0.2, 0.1], &cfg).unwrap();
        assert_eq!(tails, vec![0.0, 0.0, 0.0]);

        // delta = 0, eps = 1 recovers the full mass
        let tails = check_dirac_property(&rho, 0.0, &[1.0], &cfg).unwrap();
        assert_relative_eq!(tails[0], rho.mass(&cfg).unwrap(), max_relative = 1e-10);

        // fractional truncated density (support radius 3): strictly
        // decreasing tails while delta / eps stays below the support radius
        let rho = make_fractional_density(1, 0.5, 2.0, 1.0).unwrap();
        let tails = check_dirac_property(&rho, 0.2, &[0.4, 0.2, 0.1], &cfg).unwrap();
        assert!(tails[0] > tails[1] && tails[1] > tails[2]);
        assert!(tails[2] > 0.0);
        // oracle: direct quadrature of the scaled tail at eps = 0.2
        let fam = KernelFamily::new(rho.clone(), 0.2).unwrap();
        let direct = quadrature::integrate_annulus(
            1,
            |x: &Point| fam.eval_scaled_density(x),
            0.2,
            fam.support_radius(),
            &cfg.with_alpha(1.0),
        )
        .unwrap();
        assert_relative_eq!(tails[1], direct.value, max_relative = 1e-8);
    }

    #[test]
    fn bump_evenness_sampled() {
        let rho = bump_density(2, 1.0, 1.0).unwrap();
        for k in 0..1000 {
            let th = 0.006283 * k as f64;
            let r = 0.001 + 0.00095 * k as f64;
            let x = [r * th.cos(), r * th.sin(), 0.0];
            let mx = scale(&x, -1.0);
            assert_eq!(rho.eval(&x), rho.eval(&mx));
        }
    }
}
