//! Constitutive models in Voigt notation.
//!
//! Voigt ordering: strain [e11, e22, e33, 2 e23, 2 e13, 2 e12] with the
//! engineering shear convention, stress [s11, s22, s33, s23, s13, s12].
//! The isotropic stress path exploits the zero structure of the 6x6
//! stiffness matrix; a full-tensor route is kept alongside it as the
//! reference path for the baseline kernels and the test oracles.

use crate::{Error, Result};

/// Flops of one isotropic Voigt stress evaluation.
pub const ISO_STRESS_FLOPS: u64 = 12;
/// Flops of one dense 6x6 stress evaluation (36 multiply-adds).
pub const DENSE_STRESS_FLOPS: u64 = 72;

/// Isotropic Lame pair or general symmetric 6x6 stiffness.
#[derive(Clone, Debug)]
pub enum VoigtMaterial {
    Isotropic { lambda: f64, mu: f64 },
    Anisotropic { c: [[f64; 6]; 6] },
}

impl VoigtMaterial {
    pub fn isotropic(lambda: f64, mu: f64) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(Error::invalid(format!("mu must be positive, got {mu}")));
        }
        if !(3.0 * lambda + 2.0 * mu > 0.0) {
            return Err(Error::invalid(format!(
                "3*lambda + 2*mu must be positive, got lambda={lambda}, mu={mu}"
            )));
        }
        Ok(VoigtMaterial::Isotropic { lambda, mu })
    }

    /// General stiffness; must be symmetric (to 1e-14, scaled) and
    /// positive definite.
    pub fn anisotropic(c: [[f64; 6]; 6]) -> Result<Self> {
        let scale = c
            .iter()
            .flatten()
            .fold(0.0f64, |m, &v| m.max(v.abs()))
            .max(1e-300);
        for i in 0..6 {
            for j in 0..i {
                if (c[i][j] - c[j][i]).abs() > 1e-14 * scale {
                    return Err(Error::invalid(format!(
                        "stiffness matrix not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        let m = nalgebra::DMatrix::from_fn(6, 6, |i, j| c[i][j]);
        if nalgebra::Cholesky::new(m).is_none() {
            return Err(Error::invalid("stiffness matrix not positive definite"));
        }
        Ok(VoigtMaterial::Anisotropic { c })
    }

    /// The 6x6 stiffness matrix of this material.
    pub fn stiffness_matrix(&self) -> [[f64; 6]; 6] {
        match self {
            VoigtMaterial::Isotropic { lambda, mu } => iso_stiffness_matrix(*lambda, *mu),
            VoigtMaterial::Anisotropic { c } => *c,
        }
    }

    /// Flops of one `voigt_stress` call for this material.
    pub fn stress_flops(&self) -> u64 {
        match self {
            VoigtMaterial::Isotropic { .. } => ISO_STRESS_FLOPS,
            VoigtMaterial::Anisotropic { .. } => DENSE_STRESS_FLOPS,
        }
    }

    /// Values stored per evaluation site (lambda/mu or the 6x6 matrix).
    pub fn stored_values(&self) -> usize {
        match self {
            VoigtMaterial::Isotropic { .. } => 2,
            VoigtMaterial::Anisotropic { .. } => 36,
        }
    }
}

/// The isotropic 6x6 stiffness in Voigt form.
pub fn iso_stiffness_matrix(lambda: f64, mu: f64) -> [[f64; 6]; 6] {
    let mut c = [[0.0; 6]; 6];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = lambda;
        }
        c[i][i] = lambda + 2.0 * mu;
        c[i + 3][i + 3] = mu;
    }
    c
}

/// Material attached to a space: one value, one per element, or one per
/// quadrature point.
#[derive(Clone, Debug)]
pub enum MaterialField {
    Constant(VoigtMaterial),
    PerElement(Vec<VoigtMaterial>),
    PerPoint {
        materials: Vec<VoigtMaterial>,
        points_per_element: usize,
    },
}

impl MaterialField {
    pub fn at(&self, element: usize, point: usize) -> &VoigtMaterial {
        match self {
            MaterialField::Constant(m) => m,
            MaterialField::PerElement(v) => &v[element],
            MaterialField::PerPoint {
                materials,
                points_per_element,
            } => &materials[element * points_per_element + point],
        }
    }

    /// Worst-case flops of one stress evaluation over all sites.
    pub fn max_stress_flops(&self) -> u64 {
        match self {
            MaterialField::Constant(m) => m.stress_flops(),
            MaterialField::PerElement(v) => v.iter().map(|m| m.stress_flops()).max().unwrap_or(0),
            MaterialField::PerPoint { materials, .. } => {
                materials.iter().map(|m| m.stress_flops()).max().unwrap_or(0)
            }
        }
    }

    /// Total stored values, for the streaming byte model.
    pub fn stored_values(&self) -> usize {
        match self {
            MaterialField::Constant(m) => m.stored_values(),
            MaterialField::PerElement(v) => v.iter().map(|m| m.stored_values()).sum(),
            MaterialField::PerPoint { materials, .. } => {
                materials.iter().map(|m| m.stored_values()).sum()
            }
        }
    }
}

/// Voigt strain from a displacement gradient (grad[i][j] = du_i/dx_j).
#[inline]
pub fn strain_from_grad(grad: &[[f64; 3]; 3]) -> [f64; 6] {
    [
        grad[0][0],
        grad[1][1],
        grad[2][2],
        grad[1][2] + grad[2][1],
        grad[0][2] + grad[2][0],
        grad[0][1] + grad[1][0],
    ]
}

/// Voigt stress sigma = C eps. The isotropic arm runs the reduced
/// operation count (12 flops) instead of the dense 6x6 product.
#[inline]
pub fn voigt_stress(strain: &[f64; 6], mat: &VoigtMaterial) -> [f64; 6] {
    match mat {
        VoigtMaterial::Isotropic { lambda, mu } => {
            let tr = strain[0] + strain[1] + strain[2];
            let lt = lambda * tr;
            let two_mu = 2.0 * mu;
            [
                lt + two_mu * strain[0],
                lt + two_mu * strain[1],
                lt + two_mu * strain[2],
                mu * strain[3],
                mu * strain[4],
                mu * strain[5],
            ]
        }
        VoigtMaterial::Anisotropic { c } => {
            let mut out = [0.0; 6];
            for i in 0..6 {
                let row = &c[i];
                let mut acc = 0.0;
                for j in 0..6 {
                    acc += row[j] * strain[j];
                }
                out[i] = acc;
            }
            out
        }
    }
}

/// Full-tensor Hooke stress sigma = lambda tr(eps) I + 2 mu eps, the
/// reference route for the Voigt path.
pub fn stress_full_tensor(grad: &[[f64; 3]; 3], lambda: f64, mu: f64) -> [[f64; 3]; 3] {
    let mut eps = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            eps[i][j] = 0.5 * (grad[i][j] + grad[j][i]);
        }
    }
    let div = eps[0][0] + eps[1][1] + eps[2][2];
    let mut sigma = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            sigma[i][j] = 2.0 * mu * eps[i][j];
        }
        sigma[i][i] += lambda * div;
    }
    sigma
}

/// Stress as a full 3x3 via the general elasticity tensor, used by the
/// baseline kernel for anisotropic materials: sigma_ij = C_ijkl eps_kl
/// with C_ijkl expanded from the Voigt matrix.
pub fn stress_full_anisotropic(grad: &[[f64; 3]; 3], c: &[[f64; 6]; 6]) -> [[f64; 3]; 3] {
    const V: [[usize; 3]; 3] = [[0, 5, 4], [5, 1, 3], [4, 3, 2]];
    let mut eps = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            eps[i][j] = 0.5 * (grad[i][j] + grad[j][i]);
        }
    }
    let mut sigma = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut acc = 0.0;
            for k in 0..3 {
                for l in 0..3 {
                    acc += c[V[i][j]][V[k][l]] * eps[k][l];
                }
            }
            sigma[i][j] = acc;
        }
    }
    sigma
}

/// Unpacks a Voigt 6-vector into the symmetric 3x3 it encodes (stress
/// convention: shears stored once).
#[inline]
pub fn voigt_to_matrix(v: &[f64; 6]) -> [[f64; 3]; 3] {
    [
        [v[0], v[5], v[4]],
        [v[5], v[1], v[3]],
        [v[4], v[3], v[2]],
    ]
}

/// Packs a symmetric 3x3 stress into Voigt order.
#[inline]
pub fn matrix_to_voigt(m: &[[f64; 3]; 3]) -> [f64; 6] {
    [m[0][0], m[1][1], m[2][2], m[1][2], m[0][2], m[0][1]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_grad(rng: &mut impl Rng) -> [[f64; 3]; 3] {
        let mut g = [[0.0; 3]; 3];
        for row in &mut g {
            for v in row.iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
        }
        g
    }

    #[test]
    fn strain_examples() {
        assert_eq!(strain_from_grad(&[[0.0; 3]; 3]), [0.0; 6]);
        let mut g = [[0.0; 3]; 3];
        g[0][1] = 1.0;
        assert_eq!(strain_from_grad(&g), [0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let id = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert_eq!(strain_from_grad(&id), [1.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn isotropic_stress_examples() {
        let m = VoigtMaterial::isotropic(1.0, 1.0).unwrap();
        let s = voigt_stress(&[1.0, 1.0, 1.0, 0.0, 0.0, 0.0], &m);
        assert_eq!(s, [5.0, 5.0, 5.0, 0.0, 0.0, 0.0]);

        let m2 = VoigtMaterial::isotropic(0.0, 2.0).unwrap();
        let s2 = voigt_stress(&[0.0, 0.0, 0.0, 1.0, 0.0, 0.0], &m2);
        assert_eq!(s2, [0.0, 0.0, 0.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn anisotropic_from_isotropic_matches() {
        let iso = VoigtMaterial::isotropic(2.0, 3.0).unwrap();
        let aniso = VoigtMaterial::anisotropic(iso_stiffness_matrix(2.0, 3.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let mut eps = [0.0; 6];
            for v in eps.iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
            let a = voigt_stress(&eps, &iso);
            let b = voigt_stress(&eps, &aniso);
            for k in 0..6 {
                assert!((a[k] - b[k]).abs() < 1e-15 * a[k].abs().max(1.0));
            }
        }
    }

    #[test]
    fn full_tensor_examples() {
        let id = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let s = stress_full_tensor(&id, 1.0, 1.0);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 5.0 } else { 0.0 };
                assert_eq!(s[i][j], expect);
            }
        }
        // antisymmetric gradient (pure rotation) produces zero stress
        let rot = [[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]];
        let s = stress_full_tensor(&rot, 3.0, 2.0);
        assert!(s.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn voigt_and_full_tensor_agree() {
        let (lambda, mu) = (1.3, 0.7);
        let iso = VoigtMaterial::isotropic(lambda, mu).unwrap();
        let aniso = VoigtMaterial::anisotropic(iso_stiffness_matrix(lambda, mu)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let g = random_grad(&mut rng);
            let full = stress_full_tensor(&g, lambda, mu);
            let eps = strain_from_grad(&g);
            for mat in [&iso, &aniso] {
                let v = voigt_stress(&eps, mat);
                let v_full = voigt_to_matrix(&v);
                for i in 0..3 {
                    for j in 0..3 {
                        let scale = full[i][j].abs().max(1.0);
                        assert!((v_full[i][j] - full[i][j]).abs() < 1e-14 * scale);
                    }
                }
            }
        }
    }

    #[test]
    fn anisotropic_full_route_matches_voigt() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let c = {
            // SPD by construction: B^T B + shift
            let mut b = [[0.0; 6]; 6];
            for row in &mut b {
                for v in row.iter_mut() {
                    *v = rng.gen_range(-0.5..0.5);
                }
            }
            let mut c = [[0.0; 6]; 6];
            for i in 0..6 {
                for j in 0..6 {
                    for k in 0..6 {
                        c[i][j] += b[k][i] * b[k][j];
                    }
                }
                c[i][i] += 1.0;
            }
            c
        };
        let mat = VoigtMaterial::anisotropic(c).unwrap();
        for _ in 0..50 {
            let g = random_grad(&mut rng);
            let full = stress_full_anisotropic(&g, &c);
            let v = voigt_stress(&strain_from_grad(&g), &mat);
            let unpacked = voigt_to_matrix(&v);
            for i in 0..3 {
                for j in 0..3 {
                    assert!((full[i][j] - unpacked[i][j]).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn energy_positivity() {
        let mats = [
            VoigtMaterial::isotropic(1.0, 1.0).unwrap(),
            VoigtMaterial::isotropic(-0.5, 1.0).unwrap(), // 3l+2m = 0.5 > 0
            VoigtMaterial::anisotropic(iso_stiffness_matrix(2.0, 0.3)).unwrap(),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for mat in &mats {
            for _ in 0..200 {
                let mut eps = [0.0; 6];
                for v in eps.iter_mut() {
                    *v = rng.gen_range(-1.0..1.0);
                }
                let s = voigt_stress(&eps, mat);
                let energy: f64 = eps.iter().zip(&s).map(|(a, b)| a * b).sum();
                assert!(energy > 0.0);
            }
        }
    }

    #[test]
    fn invalid_materials_rejected() {
        assert!(VoigtMaterial::isotropic(1.0, 0.0).is_err());
        assert!(VoigtMaterial::isotropic(-1.0, 1.0).is_err()); // 3l+2m < 0
        let mut c = iso_stiffness_matrix(1.0, 1.0);
        c[0][1] += 1.0; // breaks symmetry
        assert!(VoigtMaterial::anisotropic(c).is_err());
        let zero = [[0.0; 6]; 6];
        assert!(VoigtMaterial::anisotropic(zero).is_err());
    }

    #[test]
    fn isotropic_flop_count_under_half_of_dense() {
        assert!(2 * ISO_STRESS_FLOPS <= DENSE_STRESS_FLOPS);
        let iso = VoigtMaterial::isotropic(1.0, 1.0).unwrap();
        let dense = VoigtMaterial::anisotropic(iso_stiffness_matrix(1.0, 1.0)).unwrap();
        assert!(iso.stress_flops() * 2 <= dense.stress_flops());
    }
}
