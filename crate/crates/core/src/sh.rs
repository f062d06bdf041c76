//! Real spherical-harmonics basis up to degree 4.
//!
//! Ordering is (Y00, Y1-1, Y10, Y11, Y2-2, ...), the usual graphics layout.
//! Constants are spelled as closed forms rather than decimal literals so the
//! orthonormality test is the only place precision is asserted.

use crate::error::{Error, Result};
use crate::math::Vec3;

/// Y00 = 1 / (2 sqrt(pi)).
pub const Y00: f64 = 0.28209479177387814;

/// Basis size for a given degree.
pub fn basis_len(degree: usize) -> usize {
    (degree + 1) * (degree + 1)
}

/// Evaluate the real SH basis at a unit direction.
///
/// Directions off unit norm by up to 1e-3 are normalized; anything further
/// is rejected. Degree must be at most 4.
pub fn sh_basis(direction: Vec3, degree: usize) -> Result<Vec<f64>> {
    if degree > 4 {
        return Err(Error::invalid("sh degree", "supported up to 4"));
    }
    let norm = direction.norm();
    if (norm - 1.0).abs() > 1e-3 {
        return Err(Error::invalid(
            "sh direction",
            format!("norm {norm} too far from 1"),
        ));
    }
    let d = direction / norm;
    let mut out = vec![0.0; basis_len(degree)];
    sh_basis_into(d, degree, &mut out);
    Ok(out)
}

/// Same as [`sh_basis`] but writing into a caller-provided slice and
/// assuming the direction is already unit length.
pub fn sh_basis_into(d: Vec3, degree: usize, out: &mut [f64]) {
    use std::f64::consts::PI;
    debug_assert_eq!(out.len(), basis_len(degree));
    let (x, y, z) = (d.x, d.y, d.z);

    out[0] = Y00;
    if degree == 0 {
        return;
    }

    let c1 = (3.0 / (4.0 * PI)).sqrt();
    out[1] = c1 * y;
    out[2] = c1 * z;
    out[3] = c1 * x;
    if degree == 1 {
        return;
    }

    let (x2, y2, z2) = (x * x, y * y, z * z);
    let c2a = 0.5 * (15.0 / PI).sqrt();
    let c2b = 0.25 * (5.0 / PI).sqrt();
    let c2c = 0.25 * (15.0 / PI).sqrt();
    out[4] = c2a * x * y;
    out[5] = c2a * y * z;
    out[6] = c2b * (3.0 * z2 - 1.0);
    out[7] = c2a * x * z;
    out[8] = c2c * (x2 - y2);
    if degree == 2 {
        return;
    }

    let c3a = 0.25 * (35.0 / (2.0 * PI)).sqrt();
    let c3b = 0.5 * (105.0 / PI).sqrt();
    let c3c = 0.25 * (21.0 / (2.0 * PI)).sqrt();
    let c3d = 0.25 * (7.0 / PI).sqrt();
    let c3e = 0.25 * (105.0 / PI).sqrt();
    out[9] = c3a * y * (3.0 * x2 - y2);
    out[10] = c3b * x * y * z;
    out[11] = c3c * y * (5.0 * z2 - 1.0);
    out[12] = c3d * z * (5.0 * z2 - 3.0);
    out[13] = c3c * x * (5.0 * z2 - 1.0);
    out[14] = c3e * z * (x2 - y2);
    out[15] = c3a * x * (x2 - 3.0 * y2);
    if degree == 3 {
        return;
    }

    let c4a = 0.75 * (35.0 / PI).sqrt();
    let c4b = 0.75 * (35.0 / (2.0 * PI)).sqrt();
    let c4c = 0.75 * (5.0 / PI).sqrt();
    let c4d = 0.75 * (5.0 / (2.0 * PI)).sqrt();
    let c4e = 3.0 / 16.0 * (1.0 / PI).sqrt();
    let c4f = 3.0 / 8.0 * (5.0 / PI).sqrt();
    let c4g = 3.0 / 16.0 * (35.0 / PI).sqrt();
    out[16] = c4a * x * y * (x2 - y2);
    out[17] = c4b * y * z * (3.0 * x2 - y2);
    out[18] = c4c * x * y * (7.0 * z2 - 1.0);
    out[19] = c4d * y * z * (7.0 * z2 - 3.0);
    out[20] = c4e * (35.0 * z2 * z2 - 30.0 * z2 + 3.0);
    out[21] = c4d * x * z * (7.0 * z2 - 3.0);
    out[22] = c4f * (x2 - y2) * (7.0 * z2 - 1.0);
    out[23] = c4b * x * z * (x2 - 3.0 * y2);
    out[24] = c4g * (x2 * (x2 - 3.0 * y2) - y2 * (3.0 * x2 - y2));
}

/// Evaluate an SH-encoded RGB color at a view direction, clamped to [0, 1].
pub fn eval_sh_color(coeffs: &[[f64; 3]], d: Vec3) -> [f64; 3] {
    let degree = match coeffs.len() {
        1 => 0,
        4 => 1,
        9 => 2,
        16 => 3,
        _ => 4,
    };
    let mut basis = [0.0; 25];
    sh_basis_into(d, degree, &mut basis[..coeffs.len()]);
    let mut rgb = [0.0; 3];
    for (b, c) in basis[..coeffs.len()].iter().zip(coeffs) {
        rgb[0] += b * c[0];
        rgb[1] += b * c[1];
        rgb[2] += b * c[2];
    }
    [
        rgb[0].clamp(0.0, 1.0),
        rgb[1].clamp(0.0, 1.0),
        rgb[2].clamp(0.0, 1.0),
    ]
}

/// Spherical Fibonacci lattice: `n` near-uniform unit directions.
///
/// Deterministic and low-discrepancy, which makes equal-weight quadrature
/// over the sphere accurate enough to serve as an integration oracle.
pub fn fibonacci_sphere(n: usize) -> impl Iterator<Item = Vec3> {
    let golden = (1.0 + 5.0_f64.sqrt()) / 2.0;
    (0..n).map(move |i| {
        let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
        let r = (1.0 - z * z).max(0.0).sqrt();
        let phi = std::f64::consts::TAU * (i as f64 / golden).fract();
        Vec3::new(r * phi.cos(), r * phi.sin(), z)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn degree0_is_constant() {
        for d in [
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.6, 0.0, 0.8),
        ] {
            let b = sh_basis(d, 0).unwrap();
            assert_eq!(b.len(), 1);
            assert_relative_eq!(b[0], 0.2820947917, epsilon = 1e-9);
        }
    }

    #[test]
    fn degree1_at_pole() {
        let b = sh_basis(Vec3::new(0.0, 0.0, 1.0), 1).unwrap();
        assert_relative_eq!(b[0], 0.28209479, epsilon = 1e-7);
        assert_relative_eq!(b[1], 0.0, epsilon = 1e-12);
        assert_relative_eq!(b[2], 0.48860251, epsilon = 1e-7);
        assert_relative_eq!(b[3], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn near_unit_direction_is_normalized_and_far_rejected() {
        let ok = sh_basis(Vec3::new(0.0, 0.0, 1.0005), 1).unwrap();
        assert_relative_eq!(ok[2], 0.48860251, epsilon = 1e-6);
        assert!(sh_basis(Vec3::new(0.0, 0.0, 1.5), 1).is_err());
    }

    /// Quadrature oracle: the basis must be orthonormal on the sphere.
    #[test]
    fn orthonormality_one_million_directions() {
        let degree = 4;
        let n_basis = basis_len(degree);
        let n_dirs = 1_000_000usize;
        let mut gram = vec![0.0; n_basis * n_basis];
        let mut basis = vec![0.0; n_basis];
        for d in fibonacci_sphere(n_dirs) {
            sh_basis_into(d, degree, &mut basis);
            for i in 0..n_basis {
                for j in i..n_basis {
                    gram[i * n_basis + j] += basis[i] * basis[j];
                }
            }
        }
        let w = 4.0 * std::f64::consts::PI / n_dirs as f64;
        for i in 0..n_basis {
            for j in i..n_basis {
                let v = gram[i * n_basis + j] * w;
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (v - expect).abs() < 5e-3,
                    "gram[{i},{j}] = {v}, expected {expect}"
                );
            }
        }
    }

    #[test]
    fn eval_sh_color_dc_only_is_view_independent() {
        let coeffs = vec![[0.5 / Y00, 0.25 / Y00, 0.75 / Y00]];
        for d in fibonacci_sphere(32) {
            let rgb = eval_sh_color(&coeffs, d);
            assert_relative_eq!(rgb[0], 0.5, epsilon = 1e-12);
            assert_relative_eq!(rgb[1], 0.25, epsilon = 1e-12);
            assert_relative_eq!(rgb[2], 0.75, epsilon = 1e-12);
        }
    }
}
