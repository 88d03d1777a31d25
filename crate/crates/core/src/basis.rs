//! 1D quadrature rules and nodal basis tables on the reference interval
//! [0, 1]: the `B` (value) and `D` (derivative) factors that every
//! tensor-product kernel in this crate contracts against.
//!
//! The nodal basis is Lagrange on Gauss-Lobatto points, evaluated in
//! barycentric form, which stays well conditioned up to the orders used
//! here (p <= 8 and beyond).

use crate::{Error, Result};

/// 1D quadrature rule on [0, 1]: weights sum to 1.
#[derive(Clone, Debug)]
pub struct QuadRule1D {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadRule1D {
    /// Gauss-Legendre rule with `q` points, exact for degree <= 2q-1.
    pub fn gauss_legendre(q: usize) -> Result<Self> {
        if q == 0 {
            return Err(Error::invalid("quadrature rule needs at least one point"));
        }
        let mut points = vec![0.0; q];
        let mut weights = vec![0.0; q];
        // Newton iteration on P_q over [-1, 1], then map to [0, 1].
        for i in 0..q {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre_with_derivative(q, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre_with_derivative(q, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // descending cos inits: store ascending
            points[q - 1 - i] = 0.5 * (x + 1.0);
            weights[q - 1 - i] = 0.5 * w;
        }
        Ok(QuadRule1D { points, weights })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Value of P_n(x) and its derivative via the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    // P_n'(x) = n (x P_n - P_{n-1}) / (x^2 - 1)
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// The p+1 Gauss-Lobatto points on [0, 1], endpoints included.
pub fn gauss_lobatto_nodes(p: usize) -> Result<Vec<f64>> {
    if p == 0 {
        return Err(Error::invalid("basis order must be at least 1"));
    }
    let n = p + 1;
    let mut nodes = vec![0.0; n];
    nodes[0] = -1.0;
    nodes[p] = 1.0;
    // interior nodes: roots of P_p' over (-1, 1), Newton from Chebyshev-Lobatto inits
    for i in 1..p {
        let mut x = (std::f64::consts::PI * (p - i) as f64 / p as f64).cos();
        for _ in 0..100 {
            let (pp, dp) = legendre_with_derivative(p, x);
            // P_p''(x) from the Legendre ODE: (1-x^2) P'' = 2x P' - p(p+1) P
            let d2p = (2.0 * x * dp - (p * (p + 1)) as f64 * pp) / (1.0 - x * x);
            let dx = dp / d2p;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
    }
    // map to [0, 1] and symmetrize so that node[i] + node[p-i] == 1 exactly
    let mut out = vec![0.0; n];
    for i in 0..n {
        out[i] = 0.5 * (nodes[i] + 1.0);
    }
    for i in 0..n / 2 {
        let s = 0.5 * (out[i] + (1.0 - out[n - 1 - i]));
        out[i] = s;
        out[n - 1 - i] = 1.0 - s;
    }
    if n % 2 == 1 {
        out[n / 2] = 0.5;
    }
    out[0] = 0.0;
    out[n - 1] = 1.0;
    Ok(out)
}

/// Nodal basis tables at the points of a quadrature rule.
///
/// `b[j][i]` is the value of the i-th Lagrange cardinal function at the
/// j-th quadrature point; `d[j][i]` its first derivative. Rows of `b`
/// sum to 1 (partition of unity), rows of `d` sum to 0.
#[derive(Clone, Debug)]
pub struct Basis1D {
    pub order: usize,
    pub nodes: Vec<f64>,
    /// Barycentric weights of the nodes.
    bary: Vec<f64>,
    /// q x (p+1) value table, row-major.
    pub b: Vec<f64>,
    /// q x (p+1) derivative table, row-major.
    pub d: Vec<f64>,
    pub num_points: usize,
}

impl Basis1D {
    pub fn new(p: usize, rule: &QuadRule1D) -> Result<Self> {
        let nodes = gauss_lobatto_nodes(p)?;
        let bary = barycentric_weights(&nodes);
        let n = p + 1;
        let q = rule.len();
        let mut b = vec![0.0; q * n];
        let mut d = vec![0.0; q * n];
        for (j, &x) in rule.points.iter().enumerate() {
            let (vals, ders) = eval_lagrange(&nodes, &bary, x);
            b[j * n..(j + 1) * n].copy_from_slice(&vals);
            d[j * n..(j + 1) * n].copy_from_slice(&ders);
        }
        Ok(Basis1D {
            order: p,
            nodes,
            bary,
            b,
            d,
            num_points: q,
        })
    }

    pub fn ndof(&self) -> usize {
        self.order + 1
    }

    /// Values and derivatives of all cardinal functions at an arbitrary x.
    pub fn eval_at(&self, x: f64) -> (Vec<f64>, Vec<f64>) {
        eval_lagrange(&self.nodes, &self.bary, x)
    }

    /// Bytes occupied by the two tables (the PAop operator storage term).
    pub fn table_bytes(&self) -> usize {
        (self.b.len() + self.d.len()) * std::mem::size_of::<f64>()
    }
}

fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut w = vec![1.0; n];
    for i in 0..n {
        for j in 0..n {
            if j != i {
                w[i] /= nodes[i] - nodes[j];
            }
        }
    }
    w
}

/// Barycentric evaluation of all Lagrange cardinal values and derivatives.
fn eval_lagrange(nodes: &[f64], bary: &[f64], x: f64) -> (Vec<f64>, Vec<f64>) {
    let n = nodes.len();
    let mut vals = vec![0.0; n];
    let mut ders = vec![0.0; n];
    // coincident-node branch: values collapse to a Kronecker delta and the
    // derivatives to the classical differentiation-matrix row
    if let Some(k) = nodes.iter().position(|&xn| (x - xn).abs() < 1e-13) {
        vals[k] = 1.0;
        let mut sum = 0.0;
        for i in 0..n {
            if i != k {
                ders[i] = (bary[i] / bary[k]) / (nodes[k] - nodes[i]);
                sum += ders[i];
            }
        }
        ders[k] = -sum;
        return (vals, ders);
    }
    let mut s = 0.0; // sum of w_j / (x - x_j)
    let mut s2 = 0.0; // sum of w_j / (x - x_j)^2
    let mut terms = vec![0.0; n];
    for i in 0..n {
        let t = bary[i] / (x - nodes[i]);
        terms[i] = t;
        s += t;
        s2 += t / (x - nodes[i]);
    }
    for i in 0..n {
        let li = terms[i] / s;
        vals[i] = li;
        ders[i] = li * (s2 / s - 1.0 / (x - nodes[i]));
    }
    (vals, ders)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_closed_forms() {
        let r1 = QuadRule1D::gauss_legendre(1).unwrap();
        assert!((r1.points[0] - 0.5).abs() < 1e-15);
        assert!((r1.weights[0] - 1.0).abs() < 1e-15);

        let r2 = QuadRule1D::gauss_legendre(2).unwrap();
        let s = 3f64.sqrt() / 6.0;
        assert!((r2.points[0] - (0.5 - s)).abs() < 1e-15);
        assert!((r2.points[1] - (0.5 + s)).abs() < 1e-15);
        assert!((r2.weights[0] - 0.5).abs() < 1e-15);
        assert!((r2.weights[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gauss_legendre_weights_sum_to_one() {
        for q in 1..=12 {
            let rule = QuadRule1D::gauss_legendre(q).unwrap();
            let sum: f64 = rule.weights.iter().sum();
            assert!((sum - 1.0).abs() < 1e-14, "q={q} sum={sum}");
            for w in &rule.weights {
                assert!(*w > 0.0);
            }
            for pair in rule.points.windows(2) {
                assert!(pair[0] < pair[1]);
            }
        }
        assert!(QuadRule1D::gauss_legendre(0).is_err());
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        // rule with q points must integrate x^k exactly for k <= 2q-1
        for q in 1..=10 {
            let rule = QuadRule1D::gauss_legendre(q).unwrap();
            for k in 0..=(2 * q - 1) {
                let approx: f64 = rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(&x, &w)| w * x.powi(k as i32))
                    .sum();
                let exact = 1.0 / (k as f64 + 1.0);
                assert!(
                    (approx - exact).abs() < 1e-14,
                    "q={q} k={k}: {approx} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn lobatto_closed_forms() {
        assert_eq!(gauss_lobatto_nodes(1).unwrap(), vec![0.0, 1.0]);
        assert_eq!(gauss_lobatto_nodes(2).unwrap(), vec![0.0, 0.5, 1.0]);
        let n3 = gauss_lobatto_nodes(3).unwrap();
        let a = 0.5 * (1.0 - 1.0 / 5f64.sqrt());
        assert!((n3[1] - a).abs() < 1e-15);
        assert!((n3[2] - (1.0 - a)).abs() < 1e-15);
        assert!(gauss_lobatto_nodes(0).is_err());
    }

    #[test]
    fn linear_basis_tables() {
        let rule = QuadRule1D::gauss_legendre(1).unwrap();
        let basis = Basis1D::new(1, &rule).unwrap();
        assert!((basis.b[0] - 0.5).abs() < 1e-15);
        assert!((basis.b[1] - 0.5).abs() < 1e-15);
        assert!((basis.d[0] + 1.0).abs() < 1e-15);
        assert!((basis.d[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn partition_of_unity_and_zero_derivative_rows() {
        for p in 1..=8 {
            let rule = QuadRule1D::gauss_legendre(p + 1).unwrap();
            let basis = Basis1D::new(p, &rule).unwrap();
            let n = p + 1;
            for j in 0..rule.len() {
                let bs: f64 = basis.b[j * n..(j + 1) * n].iter().sum();
                let ds: f64 = basis.d[j * n..(j + 1) * n].iter().sum();
                assert!((bs - 1.0).abs() < 1e-13, "p={p} row {j}");
                assert!(ds.abs() < 1e-13, "p={p} row {j}");
            }
        }
    }

    #[test]
    fn lagrange_property_at_nodes() {
        let rule = QuadRule1D::gauss_legendre(5).unwrap();
        let basis = Basis1D::new(4, &rule).unwrap();
        for (i, &xi) in basis.nodes.clone().iter().enumerate() {
            let (vals, _) = basis.eval_at(xi);
            for (j, &v) in vals.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((v - expect).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn derivative_table_matches_finite_differences() {
        // independent oracle: centered differences of the evaluated cardinal
        // functions, h chosen so truncation and cancellation stay near 1e-9
        let p = 4;
        let rule = QuadRule1D::gauss_legendre(5).unwrap();
        let basis = Basis1D::new(p, &rule).unwrap();
        let h = 1e-7;
        let n = p + 1;
        for (j, &x) in rule.points.iter().enumerate() {
            let (vp, _) = basis.eval_at(x + h);
            let (vm, _) = basis.eval_at(x - h);
            for i in 0..n {
                let fd = (vp[i] - vm[i]) / (2.0 * h);
                assert!(
                    (fd - basis.d[j * n + i]).abs() < 1e-6,
                    "p={p} point {j} dof {i}: fd={fd} table={}",
                    basis.d[j * n + i]
                );
            }
        }
    }

    #[test]
    fn interpolation_plus_quadrature_reproduces_integrals() {
        // nodal samples of a random polynomial of degree <= p, interpolated
        // through B and integrated by the rule, give the exact integral
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for p in 1..=6 {
            let rule = QuadRule1D::gauss_legendre(p + 1).unwrap();
            let basis = Basis1D::new(p, &rule).unwrap();
            let coeffs: Vec<f64> = (0..=p).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let poly = |x: f64| -> f64 {
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, c)| c * x.powi(k as i32))
                    .sum()
            };
            let nodal: Vec<f64> = basis.nodes.iter().map(|&x| poly(x)).collect();
            let n = p + 1;
            let approx: f64 = (0..rule.len())
                .map(|j| {
                    let v: f64 = (0..n).map(|i| basis.b[j * n + i] * nodal[i]).sum();
                    rule.weights[j] * v
                })
                .sum();
            let exact: f64 = coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| c / (k as f64 + 1.0))
                .sum();
            assert!((approx - exact).abs() < 1e-12, "p={p}");
        }
    }

    #[test]
    fn derivative_exactness_on_monomials() {
        for p in 1..=8 {
            let rule = QuadRule1D::gauss_legendre(p + 1).unwrap();
            let basis = Basis1D::new(p, &rule).unwrap();
            let n = p + 1;
            for k in 0..=p {
                let nodal: Vec<f64> = basis.nodes.iter().map(|&x| x.powi(k as i32)).collect();
                for (j, &x) in rule.points.iter().enumerate() {
                    let d: f64 = (0..n).map(|i| basis.d[j * n + i] * nodal[i]).sum();
                    let exact = if k == 0 {
                        0.0
                    } else {
                        k as f64 * x.powi(k as i32 - 1)
                    };
                    assert!((d - exact).abs() < 1e-11, "p={p} k={k} pt {j}");
                }
            }
        }
    }
}
