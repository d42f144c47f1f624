//! The momentum matrix M = 1/2 * integral of J(z) z (x) z dz, its SPD square
//! root A, and the moment cancellation check that the kernel's tangential
//! first moments vanish in the frame of A.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::DensitySpec;
use crate::quadrature::{self, QuadratureConfig};
use crate::{dot, Point};

pub type Matrix = [[f64; 3]; 3];

pub const IDENTITY: Matrix = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

/// The momentum matrix of a kernel together with its SPD square root.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentumMatrix {
    pub dim: usize,
    /// M, as a dim x dim nested array.
    pub m: Vec<Vec<f64>>,
    /// A = sqrt(M), same layout.
    pub a: Vec<Vec<f64>>,
}

impl MomentumMatrix {
    pub fn from_fixed(dim: usize, m: &Matrix, a: &Matrix) -> Self {
        let trim = |x: &Matrix| -> Vec<Vec<f64>> {
            (0..dim).map(|i| x[i][..dim].to_vec()).collect()
        };
        MomentumMatrix {
            dim,
            m: trim(m),
            a: trim(a),
        }
    }

    pub fn m_fixed(&self) -> Matrix {
        to_fixed(&self.m, self.dim)
    }

    pub fn a_fixed(&self) -> Matrix {
        to_fixed(&self.a, self.dim)
    }
}

fn to_fixed(rows: &[Vec<f64>], dim: usize) -> Matrix {
    let mut out = [[0.0; 3]; 3];
    for i in 0..dim {
        for j in 0..dim {
            out[i][j] = rows[i][j];
        }
    }
    // keep the inactive block as the identity so that 3x3 linear algebra on
    // padded points is harmless
    for k in dim..3 {
        out[k][k] = 1.0;
    }
    out
}

pub fn mat_vec(m: &Matrix, x: &Point, dim: usize) -> Point {
    let mut y = [0.0; 3];
    for i in 0..dim {
        for j in 0..dim {
            y[i] += m[i][j] * x[j];
        }
    }
    y
}

pub fn mat_mul(a: &Matrix, b: &Matrix, dim: usize) -> Matrix {
    let mut c = [[0.0; 3]; 3];
    for i in 0..dim {
        for j in 0..dim {
            for k in 0..dim {
                c[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    c
}

pub fn det(m: &Matrix, dim: usize) -> f64 {
    match dim {
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        3 => {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        }
        _ => panic!("unsupported dimension {dim}"),
    }
}

fn to_nalgebra(m: &Matrix, dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(dim, dim, |i, j| m[i][j])
}

fn max_abs(m: &Matrix, dim: usize) -> f64 {
    let mut v = 0.0f64;
    for row in m.iter().take(dim) {
        for &x in row.iter().take(dim) {
            v = v.max(x.abs());
        }
    }
    v
}

/// Eigenvalues of a symmetric matrix, ascending.
fn sym_eigenvalues(m: &Matrix, dim: usize) -> Vec<f64> {
    let mut ev: Vec<f64> = to_nalgebra(m, dim)
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

pub fn min_eigenvalue(m: &Matrix, dim: usize) -> Result<f64> {
    require_symmetric(m, dim)?;
    Ok(sym_eigenvalues(m, dim)[0])
}

fn require_symmetric(m: &Matrix, dim: usize) -> Result<()> {
    let scale = max_abs(m, dim).max(1.0);
    for i in 0..dim {
        for j in (i + 1)..dim {
            if (m[i][j] - m[j][i]).abs() > 1e-12 * scale {
                return Err(Error::Parameter(format!(
                    "matrix is not symmetric: |m[{i}][{j}] - m[{j}][{i}]| = {:.3e}",
                    (m[i][j] - m[j][i]).abs()
                )));
            }
        }
    }
    Ok(())
}

pub fn require_spd(m: &Matrix, dim: usize) -> Result<()> {
    let lam = min_eigenvalue(m, dim)?;
    let tr: f64 = (0..dim).map(|i| m[i][i]).sum();
    if lam <= 1e-12 * tr.abs().max(1.0) {
        return Err(Error::Parameter(format!(
            "matrix is not positive definite (minimum eigenvalue {lam:.3e})"
        )));
    }
    Ok(())
}

/// Principal SPD square root via symmetric eigendecomposition. Fails (rather
/// than clamping) if the matrix is not symmetric positive definite.
pub fn sqrt_spd(m: &Matrix, dim: usize) -> Result<Matrix> {
    require_symmetric(m, dim)?;
    let eig = to_nalgebra(m, dim).symmetric_eigen();
    let tr: f64 = (0..dim).map(|i| m[i][i]).sum();
    for &lam in eig.eigenvalues.iter() {
        if lam <= 1e-12 * tr.abs().max(1.0) {
            return Err(Error::Parameter(format!(
                "cannot take SPD square root: eigenvalue {lam:.3e} is not positive"
            )));
        }
    }
    let sqrt_vals = eig.eigenvalues.map(|l| l.sqrt());
    let q = &eig.eigenvectors;
    let s = q * DMatrix::from_diagonal(&sqrt_vals) * q.transpose();
    let mut out = [[0.0; 3]; 3];
    for i in 0..dim {
        for j in 0..dim {
            // exact symmetrization against eigenvector roundoff
            out[i][j] = 0.5 * (s[(i, j)] + s[(j, i)]);
        }
    }
    for k in dim..3 {
        out[k][k] = 1.0;
    }
    Ok(out)
}

/// Compute M = 1/2 * integral of rho(z) z_i z_j / |z|^2 dz component-wise by
/// singular quadrature, then its square root A.
pub fn momentum_matrix(density: &DensitySpec, cfg: &QuadratureConfig) -> Result<MomentumMatrix> {
    let dim = density.dim;
    let far = if density.support_radius.is_finite() {
        density.support_radius
    } else {
        cfg.far_truncation.unwrap_or(50.0)
    };
    let qcfg = cfg.with_alpha(density.alpha).with_far(far);
    let mut m = [[0.0; 3]; 3];
    for i in 0..dim {
        for j in i..dim {
            let est = quadrature::integrate_singular(
                dim,
                |z: &Point| {
                    let r2 = dot(z, z, dim);
                    if r2 == 0.0 {
                        0.0
                    } else {
                        0.5 * density.eval(z) * z[i] * z[j] / r2
                    }
                },
                &qcfg,
                None,
            )?;
            m[i][j] = est.value;
            m[j][i] = est.value;
        }
    }
    for k in dim..3 {
        m[k][k] = 1.0;
    }
    require_spd(&m, dim).map_err(|e| {
        Error::Certification(format!("momentum matrix is not positive definite: {e}"))
    })?;
    let a = sqrt_spd(&m, dim)?;
    Ok(MomentumMatrix::from_fixed(dim, &m, &a))
}

/// `count` equispaced planar rotations (n = 2).
pub fn so2_rotations(count: usize) -> Vec<Matrix> {
    (0..count)
        .map(|k| {
            let th = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
            let (s, c) = th.sin_cos();
            [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
        })
        .collect()
}

/// `count` deterministic low-discrepancy rotations of R^3, from a
/// golden-ratio sequence on the unit quaternions.
pub fn so3_rotations(count: usize) -> Vec<Matrix> {
    let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
    (0..count)
        .map(|k| {
            let t = (k as f64 + 0.5) / count as f64;
            let u1 = t;
            let u2 = (k as f64 * phi).fract();
            let u3 = (k as f64 * phi * phi).fract();
            let a = (1.0 - u1).sqrt();
            let b = u1.sqrt();
            let (s2, c2) = (2.0 * std::f64::consts::PI * u2).sin_cos();
            let (s3, c3) = (2.0 * std::f64::consts::PI * u3).sin_cos();
            let (qw, qx, qy, qz) = (a * s2, a * c2, b * s3, b * c3);
            [
                [
                    1.0 - 2.0 * (qy * qy + qz * qz),
                    2.0 * (qx * qy - qz * qw),
                    2.0 * (qx * qz + qy * qw),
                ],
                [
                    2.0 * (qx * qy + qz * qw),
                    1.0 - 2.0 * (qx * qx + qz * qz),
                    2.0 * (qy * qz - qx * qw),
                ],
                [
                    2.0 * (qx * qz - qy * qw),
                    2.0 * (qy * qz + qx * qw),
                    1.0 - 2.0 * (qx * qx + qy * qy),
                ],
            ]
        })
        .collect()
}

/// Default rotation set for the cancellation check.
pub fn default_rotations(dim: usize) -> Vec<Matrix> {
    match dim {
        1 => vec![IDENTITY],
        2 => so2_rotations(16),
        3 => so3_rotations(24),
        d => panic!("unsupported dimension {d}"),
    }
}

pub fn default_zn_samples() -> Vec<f64> {
    vec![0.1, -0.1, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0]
}

/// Worst absolute tangential first moment
/// | integral over z' of J(A Q (z', z_n)) z'_k dz' | across rotations Q,
/// offsets z_n and tangential components k.
///
/// For n = 1 the tangential space is empty and the result is exactly 0.
pub fn moment_cancellation_check(
    density: &DensitySpec,
    a: &Matrix,
    rotations: &[Matrix],
    zn_samples: &[f64],
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let dim = density.dim;
    if dim == 1 {
        return Ok(0.0);
    }
    if rotations.is_empty() || zn_samples.is_empty() {
        return Err(Error::Parameter(
            "cancellation check needs at least one rotation and one offset".into(),
        ));
    }
    for &zn in zn_samples {
        if zn == 0.0 {
            return Err(Error::Parameter(
                "z_n = 0 places the singularity on the integration plane".into(),
            ));
        }
    }
    let sigma_min = min_eigenvalue(a, dim)?;
    if sigma_min <= 0.0 {
        return Err(Error::Parameter("A must be positive definite".into()));
    }
    let reach = if density.support_radius.is_finite() {
        density.support_radius / sigma_min
    } else {
        cfg.far_truncation.unwrap_or(50.0) / sigma_min
    };
    let qcfg = cfg.with_alpha(density.alpha);
    let kernel = |w: &Point| -> f64 {
        let r2 = dot(w, w, dim);
        if r2 == 0.0 {
            0.0
        } else {
            density.eval(w) / r2
        }
    };
    let mut worst = 0.0f64;
    for q in rotations {
        for &zn in zn_samples {
            // |z| <= reach is necessary for a nonzero integrand
            if zn.abs() >= reach && density.support_radius.is_finite() {
                continue;
            }
            let half_width = if density.support_radius.is_finite() {
                (reach * reach - zn * zn).max(0.0).sqrt() * 1.001 + 1e-12
            } else {
                reach
            };
            for k in 0..dim - 1 {
                let integrand = |zp: &[f64]| -> f64 {
                    let mut z = [0.0; 3];
                    z[..dim - 1].copy_from_slice(&zp[..dim - 1]);
                    z[dim - 1] = zn;
                    let qz = mat_vec(q, &z, dim);
                    let aqz = mat_vec(a, &qz, dim);
                    kernel(&aqz) * zp[k]
                };
                let val = match dim {
                    2 => {
                        // peak width ~ |z_n| near z' = 0: grade toward 0
                        let left = quadrature::integrate_1d_graded(
                            |t| integrand(&[t]),
                            -half_width,
                            0.0,
                            0.0,
                            &qcfg,
                        )?;
                        let right = quadrature::integrate_1d_graded(
                            |t| integrand(&[t]),
                            0.0,
                            half_width,
                            0.0,
                            &qcfg,
                        )?;
                        left.value + right.value
                    }
                    3 => {
                        quadrature::tensor_box_integral(
                            2,
                            |p: &Point| integrand(&[p[0], p[1]]),
                            &[-half_width, -half_width, 0.0],
                            &[half_width, half_width, 0.0],
                            &qcfg,
                        )?
                        .value
                    }
                    _ => unreachable!(),
                };
                worst = worst.max(val.abs());
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{kernel, norm};
    use approx::assert_relative_eq;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn sqrt_spd_roundtrip() {
        let m = [[2.0, 0.5, 0.1], [0.5, 3.0, -0.2], [0.1, -0.2, 1.5]];
        let a = sqrt_spd(&m, 3).unwrap();
        let aa = mat_mul(&a, &a, 3);
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(aa[i][j], m[i][j], epsilon = 1e-12);
            }
        }
        // symmetry of the root
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(a[i][j], a[j][i]);
            }
        }
    }

    #[test]
    fn sqrt_spd_rejects_bad_input() {
        let asym = [[1.0, 0.5, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(sqrt_spd(&asym, 2).is_err());
        let indef = [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(sqrt_spd(&indef, 2).is_err());
        let singular = [[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(sqrt_spd(&singular, 2).is_err());
    }

    #[test]
    fn scalar_momentum_matches_radial_oracle() {
        // n = 1: M = 1/2 * integral of rho(z) dz = mass / 2
        let rho = kernel::bump_density(1, 3.0, 1.0).unwrap();
        let mm = momentum_matrix(&rho, &cfg()).unwrap();
        let mass = rho.mass(&cfg()).unwrap();
        assert_relative_eq!(mm.m[0][0], 0.5 * mass, max_relative = 1e-8);
        assert_relative_eq!(mm.a[0][0], (0.5 * mass).sqrt(), max_relative = 1e-8);
    }

    #[test]
    fn normalized_bump_gives_identity() {
        for dim in [1usize, 2] {
            let rho = kernel::bump_density_mass_2n(dim, 1.0).unwrap();
            let mm = momentum_matrix(&rho, &cfg()).unwrap();
            for i in 0..dim {
                for j in 0..dim {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!(
                        (mm.m[i][j] - expect).abs() < 1e-6,
                        "dim {dim}: M[{i}][{j}] = {}",
                        mm.m[i][j]
                    );
                }
            }
        }
    }

    #[test]
    fn radial_momentum_is_isotropic() {
        // for a radial density in n = 2, M = (mass / 2n) I by symmetry
        let rho = kernel::bump_density(2, 5.0, 0.7).unwrap();
        let mm = momentum_matrix(&rho, &cfg()).unwrap();
        let mass = rho.mass(&cfg()).unwrap();
        let expect = mass / 4.0;
        assert_relative_eq!(mm.m[0][0], expect, max_relative = 1e-7);
        assert_relative_eq!(mm.m[1][1], expect, max_relative = 1e-7);
        assert!(mm.m[0][1].abs() < 1e-9 * expect.max(1.0));
    }

    #[test]
    fn anisotropic_momentum_is_b_inverse_squared() {
        let base = kernel::bump_density_mass_2n(2, 1.0).unwrap();
        let b = [[2.0, 0.0, 0.0], [0.0, 0.5, 0.0], [0.0, 0.0, 1.0]];
        let rho = kernel::make_anisotropic_density(&base, &b).unwrap();
        let mm = momentum_matrix(&rho, &cfg()).unwrap();
        // M = B^{-2} = diag(1/4, 4), A = B^{-1} = diag(1/2, 2)
        assert_relative_eq!(mm.m[0][0], 0.25, max_relative = 1e-6);
        assert_relative_eq!(mm.m[1][1], 4.0, max_relative = 1e-6);
        assert!(mm.m[0][1].abs() < 1e-7);
        assert_relative_eq!(mm.a[0][0], 0.5, max_relative = 1e-6);
        assert_relative_eq!(mm.a[1][1], 2.0, max_relative = 1e-6);
    }

    #[test]
    fn momentum_scale_invariance() {
        // M computed from rho_eps equals M computed from rho
        let rho = kernel::bump_density_mass_2n(1, 1.0).unwrap();
        let m0 = momentum_matrix(&rho, &cfg()).unwrap();
        for eps in [0.5, 0.1] {
            let fam = kernel::KernelFamily::new(rho.clone(), eps).unwrap();
            let m = momentum_matrix(&fam.as_density(), &cfg()).unwrap();
            assert_relative_eq!(m.m[0][0], m0.m[0][0], max_relative = 1e-7);
        }
    }

    #[test]
    fn cancellation_radial_small() {
        let rho = kernel::bump_density_mass_2n(2, 1.0).unwrap();
        let mm = momentum_matrix(&rho, &cfg()).unwrap();
        let worst = moment_cancellation_check(
            &rho,
            &mm.a_fixed(),
            &default_rotations(2),
            &default_zn_samples(),
            &cfg(),
        )
        .unwrap();
        assert!(worst < 1e-8, "worst tangential moment {worst:.3e}");
    }

    #[test]
    fn cancellation_rejects_zero_offset() {
        let rho = kernel::bump_density_mass_2n(2, 1.0).unwrap();
        let err = moment_cancellation_check(
            &rho,
            &IDENTITY,
            &default_rotations(2),
            &[0.0],
            &cfg(),
        );
        assert!(err.is_err());
    }

    #[test]
    fn cancellation_detects_odd_perturbation() {
        // rho(x) = bump(x) * (1 + 0.5 sin(theta)) is not even, so tangential
        // moments must not cancel
        use std::sync::Arc;
        let base = kernel::bump_density_mass_2n(2, 1.0).unwrap();
        let base2 = base.clone();
        let rho = DensitySpec::new(
            2,
            1.0,
            4.0,
            base.c0 * 1.5,
            base.c1 * 3.0,
            1.0,
            false,
            Arc::new(move |x: &Point| {
                let r = norm(x, 2);
                let s = if r == 0.0 { 0.0 } else { x[1] / r };
                base.eval(x) * (1.0 + 0.5 * s)
            }),
            Arc::new(move |x: &Point| {
                // crude finite-difference gradient; only sampled by checks
                let h = 1e-6;
                let mut g = [0.0; 3];
                for i in 0..2 {
                    let mut xp = *x;
                    let mut xm = *x;
                    xp[i] += h;
                    xm[i] -= h;
                    let r_p = norm(&xp, 2);
                    let r_m = norm(&xm, 2);
                    let sp = if r_p == 0.0 { 0.0 } else { xp[1] / r_p };
                    let sm = if r_m == 0.0 { 0.0 } else { xm[1] / r_m };
                    g[i] = (base2.eval(&xp) * (1.0 + 0.5 * sp)
                        - base2.eval(&xm) * (1.0 + 0.5 * sm))
                        / (2.0 * h);
                }
                g
            }),
        )
        .unwrap();
        let worst = moment_cancellation_check(
            &rho,
            &IDENTITY,
            &default_rotations(2),
            &default_zn_samples(),
            &cfg(),
        )
        .unwrap();
        assert!(worst > 1e-3, "expected detectable violation, got {worst:.3e}");
    }

    #[test]
    fn rotations_are_orthogonal() {
        for q in so3_rotations(24) {
            let qt = {
                let mut t = [[0.0; 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        t[i][j] = q[j][i];
                    }
                }
                t
            };
            let qq = mat_mul(&q, &qt, 3);
            for i in 0..3 {
                for j in 0..3 {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((qq[i][j] - expect).abs() < 1e-12);
                }
            }
            assert_relative_eq!(det(&q, 3), 1.0, epsilon = 1e-12);
        }
    }
}
