//! Index lattice, singular values, ellipsoid coefficients and the two
//! orthonormal bases that diagonalise the Radon transform on the unit disk.
//!
//! Lattice points `ν = (j, l)` are ordered by total degree `j + l` first and
//! by `j` second, so every enumeration and every serialized table comes out in
//! the same order on every run.

use std::cmp::Ordering;
use std::f64::consts::{PI, SQRT_2};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Double index `ν = (j, l)` in the quadrant `Z+ × Z+`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Index {
    pub j: u32,
    pub l: u32,
}

impl Index {
    pub const fn new(j: u32, l: u32) -> Self {
        Self { j, l }
    }

    /// Total degree `j + l`.
    pub fn degree(&self) -> u32 {
        self.j + self.l
    }

    /// Angular frequency `|j - l|`.
    pub fn order(&self) -> u32 {
        self.j.abs_diff(self.l)
    }

    /// `(j+1)(l+1)`, the base of the ellipsoid coefficient.
    pub fn product(&self) -> u64 {
        (self.j as u64 + 1) * (self.l as u64 + 1)
    }

    /// All indices with `j + l <= max_degree`, in lattice order.
    pub fn up_to_degree(max_degree: u32) -> Vec<Index> {
        (0..=max_degree)
            .flat_map(|d| (0..=d).map(move |j| Index::new(j, d - j)))
            .collect()
    }
}

impl Ord for Index {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then(self.j.cmp(&other.j))
    }
}

impl PartialOrd for Index {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Index {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.j, self.l)
    }
}

/// Smoothness exponent, ellipsoid scale and unit system.
///
/// In normalized units the factors `L^{-1}` (ellipsoid) and `π^{-1}` (noise
/// scale) are dropped; physical units keep them.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub p: f64,
    pub l_scale: f64,
    pub normalized: bool,
}

impl ModelParams {
    pub fn new(p: f64, l_scale: f64, normalized: bool) -> Result<Self> {
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::Domain(format!("smoothness p must be > 0, got {p}")));
        }
        if !(l_scale > 0.0 && l_scale.is_finite()) {
            return Err(Error::Domain(format!("ellipsoid scale L must be > 0, got {l_scale}")));
        }
        Ok(Self { p, l_scale, normalized })
    }

    pub fn normalized(p: f64) -> Self {
        Self::new(p, 1.0, true).expect("p must be positive")
    }

    pub fn physical(p: f64, l_scale: f64) -> Self {
        Self::new(p, l_scale, false).expect("p and L must be positive")
    }

    /// Same `p` and `L`, other unit system.
    pub fn with_normalized(self, normalized: bool) -> Self {
        Self { normalized, ..self }
    }

    /// Scale factor `C` with `a = C · a_normalized` (`1/L` in physical units).
    pub fn coeff_scale(&self) -> f64 {
        if self.normalized {
            1.0
        } else {
            1.0 / self.l_scale
        }
    }

    /// Scale factor `D` with `σ = D · σ_normalized` (`1/π` in physical units).
    pub fn sigma_scale(&self) -> f64 {
        if self.normalized {
            1.0
        } else {
            1.0 / PI
        }
    }

    /// Smallest ellipsoid coefficient, attained at `(0,0)`.
    pub fn min_coeff(&self) -> f64 {
        self.coeff_scale()
    }
}

/// Singular value `b_ν = π (j+l+1)^{-1/2}` of the Radon transform.
pub fn singular_value(nu: Index) -> f64 {
    PI / f64::from(nu.degree() + 1).sqrt()
}

/// Noise scale `σ_ν`; equals `1/b_ν` in physical units.
pub fn sigma(nu: Index, params: &ModelParams) -> f64 {
    params.sigma_scale() * f64::from(nu.degree() + 1).sqrt()
}

/// `σ_ν²`, computed without a square root.
pub fn sigma_sq(nu: Index, params: &ModelParams) -> f64 {
    let d = params.sigma_scale();
    d * d * f64::from(nu.degree() + 1)
}

/// Ellipsoid coefficient `a_ν = L^{-1} ((j+1)(l+1))^p`.
pub fn ellipsoid_coeff(nu: Index, params: &ModelParams) -> f64 {
    params.coeff_scale() * (nu.product() as f64).powf(params.p)
}

/// Radial Zernike polynomial `Z_a^b(r) = r^b P_k^{(0,b)}(2r² - 1)`, `k = (a-b)/2`,
/// normalised so that `Z_a^a(r) = r^a` and `Z_a^b(1) = 1`.
pub fn zernike_radial(degree: u32, order: u32, r: f64) -> Result<f64> {
    if order > degree || (degree - order) % 2 == 1 {
        return Err(Error::Domain(format!(
            "Zernike radial polynomial needs order <= degree with even difference, got ({degree}, {order})"
        )));
    }
    Ok(zernike_unchecked(degree, order, r))
}

fn zernike_unchecked(degree: u32, order: u32, r: f64) -> f64 {
    let k = (degree - order) / 2;
    let jac = jacobi_zero_alpha(k, f64::from(order), 2.0 * r * r - 1.0);
    r.powi(order as i32) * jac
}

/// Jacobi polynomial `P_n^{(0,β)}(x)` by the three-term recurrence.
fn jacobi_zero_alpha(n: u32, beta: f64, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut cur = 1.0 + 0.5 * (beta + 2.0) * (x - 1.0);
    let b2 = beta * beta;
    for m in 2..=n {
        let m = f64::from(m);
        let s = 2.0 * m + beta;
        let c0 = 2.0 * m * (m + beta) * (s - 2.0);
        let c1 = (s - 1.0) * (s * (s - 2.0) * x - b2);
        let c2 = 2.0 * (m - 1.0) * (m + beta - 1.0) * s;
        let next = (c1 * cur - c2 * prev) / c0;
        prev = cur;
        cur = next;
    }
    cur
}

/// Chebyshev polynomial of the second kind `U_m(u)`.
pub fn chebyshev_u(m: u32, u: f64) -> f64 {
    let mut prev = 1.0;
    if m == 0 {
        return prev;
    }
    let mut cur = 2.0 * u;
    for _ in 1..m {
        let next = 2.0 * u * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

fn angular_factor(nu: Index, angle: f64) -> f64 {
    let k = f64::from(nu.order());
    match nu.j.cmp(&nu.l) {
        Ordering::Greater => SQRT_2 * (k * angle).cos(),
        Ordering::Equal => 1.0,
        Ordering::Less => SQRT_2 * (k * angle).sin(),
    }
}

/// Real orthonormal basis of `L²(H, μ)` on the unit disk, at polar `(r, θ)`.
pub fn phi_basis(nu: Index, r: f64, theta: f64) -> f64 {
    let deg = nu.degree();
    let radial = zernike_unchecked(deg, nu.order(), r);
    f64::from(deg + 1).sqrt() / PI.sqrt() * radial * angular_factor(nu, theta)
}

/// Real orthonormal basis of `L²(S, μ0)` on the line space, at `(u, φ)`.
pub fn psi_basis(nu: Index, u: f64, phi: f64) -> f64 {
    chebyshev_u(nu.degree(), u) / PI.sqrt() * angular_factor(nu, phi)
}

/// Calls `f(m, n)` for every pair `m, n >= 1` with `m·n <= max_product`.
pub(crate) fn for_each_product_pair(max_product: u64, mut f: impl FnMut(u64, u64)) {
    for m in 1..=max_product {
        for n in 1..=max_product / m {
            f(m, n);
        }
    }
}

/// Largest integer product `(j+1)(l+1)` that can satisfy `a_ν <= c`.
pub(crate) fn product_bound(c: f64, params: &ModelParams) -> u64 {
    if !(c > 0.0) {
        return 0;
    }
    let base = (c / params.coeff_scale()).powf(1.0 / params.p);
    if base >= 4.0e15 {
        panic!("coefficient bound {c} enumerates an unbounded lattice region");
    }
    // one extra unit absorbs rounding in powf; the exact test happens later
    base.floor() as u64 + 1
}

/// All `ν` with `a_ν <= c`, in lattice order.
pub fn indices_below(c: f64, params: &ModelParams) -> Vec<Index> {
    let mut out = Vec::new();
    for_each_product_pair(product_bound(c, params), |m, n| {
        let nu = Index::new((m - 1) as u32, (n - 1) as u32);
        if ellipsoid_coeff(nu, params) <= c {
            out.push(nu);
        }
    });
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lattice_order_is_degree_then_j() {
        let mut v = vec![Index::new(1, 0), Index::new(0, 2), Index::new(0, 1), Index::new(0, 0)];
        v.sort();
        assert_eq!(
            v,
            vec![Index::new(0, 0), Index::new(0, 1), Index::new(1, 0), Index::new(0, 2)]
        );
        assert_eq!(Index::up_to_degree(2).len(), 6);
    }

    #[test]
    fn singular_values() {
        assert_relative_eq!(singular_value(Index::new(0, 0)), PI);
        assert_relative_eq!(singular_value(Index::new(1, 0)), PI / 2f64.sqrt());
        assert_relative_eq!(singular_value(Index::new(2, 3)), PI / 6f64.sqrt());
    }

    #[test]
    fn sigma_in_both_units() {
        let phys = ModelParams::physical(1.0, 1.0);
        let norm = ModelParams::normalized(1.0);
        assert_relative_eq!(sigma(Index::new(0, 0), &phys), 1.0 / PI);
        assert_relative_eq!(sigma(Index::new(0, 0), &norm), 1.0);
        assert_relative_eq!(sigma(Index::new(3, 2), &norm), 6f64.sqrt());
        for nu in Index::up_to_degree(5) {
            assert_relative_eq!(sigma(nu, &phys) * singular_value(nu), 1.0, epsilon = 1e-15);
            assert_relative_eq!(sigma_sq(nu, &phys), sigma(nu, &phys).powi(2), epsilon = 1e-15);
        }
    }

    #[test]
    fn ellipsoid_coefficients() {
        for &(p, l) in &[(0.5, 1.0), (1.0, 2.0), (3.0, 0.25)] {
            assert_relative_eq!(ellipsoid_coeff(Index::new(0, 0), &ModelParams::physical(p, l)), 1.0 / l);
        }
        assert_relative_eq!(ellipsoid_coeff(Index::new(1, 2), &ModelParams::normalized(1.0)), 6.0);
        assert_relative_eq!(
            ellipsoid_coeff(Index::new(1, 1), &ModelParams::normalized(0.5)),
            2.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(ModelParams::new(0.0, 1.0, true).is_err());
        assert!(ModelParams::new(1.0, -1.0, false).is_err());
    }

    #[test]
    fn zernike_low_orders() {
        for &r in &[0.0, 0.3, 0.7, 1.0] {
            assert_eq!(zernike_radial(0, 0, r).unwrap(), 1.0);
            assert_relative_eq!(zernike_radial(2, 0, r).unwrap(), 2.0 * r * r - 1.0, epsilon = 1e-15);
            assert_relative_eq!(
                zernike_radial(3, 1, r).unwrap(),
                3.0 * r.powi(3) - 2.0 * r,
                epsilon = 1e-15
            );
            assert_relative_eq!(
                zernike_radial(4, 0, r).unwrap(),
                6.0 * r.powi(4) - 6.0 * r * r + 1.0,
                epsilon = 1e-14
            );
        }
        assert_relative_eq!(zernike_radial(1, 1, 0.7).unwrap(), 0.7);
        assert_relative_eq!(zernike_radial(2, 0, 0.5).unwrap(), -0.5);
        assert_relative_eq!(zernike_radial(5, 5, 0.9).unwrap(), 0.9f64.powi(5), epsilon = 1e-15);
        for a in 0..12 {
            for b in (a % 2..=a).step_by(2) {
                assert_relative_eq!(zernike_radial(a, b, 1.0).unwrap(), 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn zernike_domain_errors() {
        assert!(matches!(zernike_radial(2, 1, 0.5), Err(Error::Domain(_))));
        assert!(matches!(zernike_radial(1, 3, 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn chebyshev_examples() {
        assert_eq!(chebyshev_u(0, 0.42), 1.0);
        assert_relative_eq!(chebyshev_u(1, 0.3), 0.6);
        assert_relative_eq!(chebyshev_u(2, 0.5), 0.0, epsilon = 1e-15);
        assert_relative_eq!(chebyshev_u(3, 1.0), 4.0);
        assert_relative_eq!(chebyshev_u(3, -1.0), -4.0);
    }

    #[test]
    fn chebyshev_trigonometric_identity() {
        for m in 0..=20 {
            for i in 1..200 {
                let theta = PI * f64::from(i) / 200.0;
                let lhs = chebyshev_u(m, theta.cos()) * theta.sin();
                let rhs = (f64::from(m + 1) * theta).sin();
                assert!(
                    (lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0),
                    "m={m} θ={theta}: {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn basis_examples() {
        let c = 1.0 / PI.sqrt();
        assert_relative_eq!(phi_basis(Index::new(0, 0), 0.4, 1.3), c);
        assert_relative_eq!(phi_basis(Index::new(1, 0), 0.5, 0.0), c, epsilon = 1e-15);
        assert_relative_eq!(phi_basis(Index::new(0, 1), 0.5, 0.0), 0.0);
        assert_relative_eq!(psi_basis(Index::new(0, 0), 0.2, 4.0), c);
        assert_relative_eq!(psi_basis(Index::new(1, 1), 0.5, 0.3), 0.0, epsilon = 1e-15);
        assert_relative_eq!(psi_basis(Index::new(1, 0), 0.0, 0.0), 0.0);
    }

    #[test]
    fn indices_below_examples() {
        let params = ModelParams::normalized(1.0);
        assert_eq!(indices_below(1.0, &params), vec![Index::new(0, 0)]);
        assert_eq!(
            indices_below(2.0, &params),
            vec![Index::new(0, 0), Index::new(0, 1), Index::new(1, 0)]
        );
        assert_eq!(indices_below(10.0, &params).len(), 27);
        assert!(indices_below(0.5, &params).is_empty());
        // physical units: a = (mn)^p / L
        let phys = ModelParams::physical(1.0, 2.0);
        assert_eq!(indices_below(1.0, &phys).len(), 3);
    }

    #[test]
    fn indices_below_matches_brute_force_count() {
        for &p in &[0.5, 0.75, 1.0, 1.5, 2.0] {
            let params = ModelParams::normalized(p);
            for &c in &[1.0f64, 3.3, 10.0, 57.0, 400.0] {
                let limit = c.powf(1.0 / p).ceil() as u64 + 1;
                if limit > 3000 {
                    continue;
                }
                let mut count = 0;
                for m in 1..=limit {
                    for n in 1..=limit {
                        if ((m * n) as f64).powf(p) <= c {
                            count += 1;
                        }
                    }
                }
                let got = indices_below(c, &params);
                assert_eq!(got.len(), count, "p={p} c={c}");
                assert!(got.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }
}
