//! Quadrature Radon transform on the unit disk and inner products on the disk
//! `H` and on the line space `S = [0,1] × [0, 2π)`.
//!
//! This module is an oracle: it never uses the singular value decomposition
//! it is meant to check. Integrals over `u ∈ [0, 1]` are taken after the
//! substitution `u = sin t`, which turns the `√(1-u²)` endpoint behaviour of
//! `μ0` into a smooth integrand and keeps every node strictly below `u = 1`.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::lattice::{phi_basis, psi_basis, singular_value, Index};
use crate::quadrature::{gauss_legendre_on, periodic_rule};
use crate::rng;

/// Grid sizes for the three quadrature directions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuadratureSpec {
    pub n_radial: usize,
    pub n_angular: usize,
    pub n_line: usize,
}

impl QuadratureSpec {
    pub fn new(n_radial: usize, n_angular: usize, n_line: usize) -> Result<Self> {
        let spec = Self {
            n_radial,
            n_angular,
            n_line,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Same size `n` in every direction.
    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(n, n, n)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_radial < 8 || self.n_angular < 8 || self.n_line < 8 {
            return Err(Error::InvalidQuadrature {
                n_radial: self.n_radial,
                n_angular: self.n_angular,
                n_line: self.n_line,
            });
        }
        Ok(())
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            n_radial: 64,
            n_angular: 64,
            n_line: 64,
        }
    }
}

/// A real function on the closed unit disk, in polar coordinates `(r, θ)`.
pub trait DiskFunction {
    fn eval(&self, r: f64, theta: f64) -> f64;
}

impl<F: Fn(f64, f64) -> f64> DiskFunction for F {
    fn eval(&self, r: f64, theta: f64) -> f64 {
        self(r, theta)
    }
}

/// Basis element `φ_ν` as a [`DiskFunction`].
#[derive(Clone, Copy, Debug)]
pub struct PhiBasis(pub Index);

impl DiskFunction for PhiBasis {
    fn eval(&self, r: f64, theta: f64) -> f64 {
        phi_basis(self.0, r, theta)
    }
}

/// Prebuilt rules for one [`QuadratureSpec`].
struct Rules {
    /// `(u, w)` pairs for `∫_0^1 · du`, via `u = sin t`.
    u_lebesgue: Vec<(f64, f64)>,
    /// `(u, w)` pairs for `∫_0^1 · (2√(1-u²)/π) du`.
    u_mu0: Vec<(f64, f64)>,
    r_rule: Vec<(f64, f64)>,
    angular: Vec<(f64, f64)>,
    line: Vec<(f64, f64)>,
}

impl Rules {
    fn new(q: &QuadratureSpec) -> Result<Self> {
        q.validate()?;
        let t_rule = gauss_legendre_on(q.n_radial, 0.0, FRAC_PI_2);
        let u_lebesgue = t_rule.iter().map(|&(t, w)| (t.sin(), w * t.cos())).collect();
        let u_mu0 = t_rule
            .iter()
            .map(|&(t, w)| {
                let c = t.cos();
                (t.sin(), w * 2.0 * c * c / PI)
            })
            .collect();
        Ok(Self {
            u_lebesgue,
            u_mu0,
            r_rule: gauss_legendre_on(q.n_radial, 0.0, 1.0),
            angular: periodic_rule(q.n_angular),
            line: gauss_legendre_on(q.n_line, -1.0, 1.0),
        })
    }

    fn radon<F: DiskFunction + ?Sized>(&self, f: &F, u: f64, phi: f64) -> f64 {
        let half = (1.0 - u * u).sqrt();
        let (s, c) = phi.sin_cos();
        let mut acc = 0.0;
        for &(x, w) in &self.line {
            let t = half * x;
            let px = u * c - t * s;
            let py = u * s + t * c;
            let r = px.hypot(py).min(1.0);
            let mut theta = py.atan2(px);
            if theta < 0.0 {
                theta += 2.0 * PI;
            }
            acc += w * f.eval(r, theta);
        }
        // π/(2√(1-u²)) · ∫ f dt, and dt = √(1-u²) dx
        0.5 * PI * acc
    }
}

/// `ℛf(u, φ)`: `π` times the average of `f` along the chord at distance `u`
/// from the origin with normal direction `φ`.
pub fn radon_transform<F: DiskFunction + ?Sized>(f: &F, u: f64, phi: f64, q: &QuadratureSpec) -> Result<f64> {
    if !(0.0..1.0).contains(&u) {
        return Err(Error::Domain(format!("Radon transform needs 0 <= u < 1, got u = {u}")));
    }
    Ok(Rules::new(q)?.radon(f, u, phi))
}

/// `⟨g1, g2⟩` in `L²(S, μ0)` with `dμ0 = (2√(1-u²)/π) du dφ`.
pub fn inner_product_s(g1: impl Fn(f64, f64) -> f64, g2: impl Fn(f64, f64) -> f64, q: &QuadratureSpec) -> Result<f64> {
    let rules = Rules::new(q)?;
    Ok(integrate_2d(&rules.u_mu0, &rules.angular, |u, phi| {
        g1(u, phi) * g2(u, phi)
    }))
}

/// `⟨f1, f2⟩` in `L²(H, μ)`, polar weight `r dr dθ`.
pub fn inner_product_h<F1, F2>(f1: &F1, f2: &F2, q: &QuadratureSpec) -> Result<f64>
where
    F1: DiskFunction + ?Sized,
    F2: DiskFunction + ?Sized,
{
    let rules = Rules::new(q)?;
    Ok(integrate_2d(&rules.r_rule, &rules.angular, |r, th| {
        r * f1.eval(r, th) * f2.eval(r, th)
    }))
}

fn integrate_2d(a: &[(f64, f64)], b: &[(f64, f64)], f: impl Fn(f64, f64) -> f64) -> f64 {
    let mut acc = 0.0;
    for &(x, wx) in a {
        let mut row = 0.0;
        for &(y, wy) in b {
            row += wy * f(x, y);
        }
        acc += wx * row;
    }
    acc
}

/// Relative `L²(S, μ0)` norm of `ℛφ_ν − b_ν ψ_ν`, divided by `b_ν`.
pub fn svd_residual(nu: Index, q: &QuadratureSpec) -> Result<f64> {
    let rules = Rules::new(q)?;
    let b = singular_value(nu);
    let f = PhiBasis(nu);
    let sq = integrate_2d(&rules.u_mu0, &rules.angular, |u, phi| {
        let d = rules.radon(&f, u, phi) - b * psi_basis(nu, u, phi);
        d * d
    });
    Ok(sq.sqrt() / b)
}

/// Largest entry of `|G - I|` for the Gram matrix of `{φ_ν : j+l <= max_degree}` in `L²(H, μ)`.
pub fn gram_deviation_phi(max_degree: u32, q: &QuadratureSpec) -> Result<f64> {
    let rules = Rules::new(q)?;
    let mut nodes = Vec::new();
    for &(r, wr) in &rules.r_rule {
        for &(th, wt) in &rules.angular {
            nodes.push((r, th, wr * wt * r));
        }
    }
    Ok(gram_deviation(max_degree, &nodes, phi_basis))
}

/// Largest entry of `|G - I|` for `{ψ_ν : j+l <= max_degree}` in `L²(S, μ0)`.
pub fn gram_deviation_psi(max_degree: u32, q: &QuadratureSpec) -> Result<f64> {
    let rules = Rules::new(q)?;
    let mut nodes = Vec::new();
    for &(u, wu) in &rules.u_mu0 {
        for &(phi, wp) in &rules.angular {
            nodes.push((u, phi, wu * wp));
        }
    }
    Ok(gram_deviation(max_degree, &nodes, psi_basis))
}

fn gram_deviation(max_degree: u32, nodes: &[(f64, f64, f64)], basis: fn(Index, f64, f64) -> f64) -> f64 {
    let indices = Index::up_to_degree(max_degree);
    let values: Vec<Vec<f64>> = indices
        .iter()
        .map(|&nu| nodes.iter().map(|&(x, y, _)| basis(nu, x, y)).collect())
        .collect();
    let mut worst: f64 = 0.0;
    for a in 0..indices.len() {
        for b in a..indices.len() {
            let g: f64 = nodes
                .iter()
                .zip(values[a].iter().zip(&values[b]))
                .map(|(&(_, _, w), (va, vb))| w * va * vb)
                .sum();
            let target = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((g - target).abs());
        }
    }
    worst
}

/// One noisy functional observation from the white-noise Radon model:
/// `∬ g ℛf du dφ` plus a centred Gaussian with variance `ε² ∬ g² du dφ`.
pub fn observe_functional<F: DiskFunction + ?Sized>(
    f: &F,
    g: impl Fn(f64, f64) -> f64,
    eps: f64,
    seed: u64,
    q: &QuadratureSpec,
) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("noise level must be > 0, got {eps}")));
    }
    let rules = Rules::new(q)?;
    let signal = integrate_2d(&rules.u_lebesgue, &rules.angular, |u, phi| {
        g(u, phi) * rules.radon(f, u, phi)
    });
    let energy = integrate_2d(&rules.u_lebesgue, &rules.angular, |u, phi| g(u, phi).powi(2));
    Ok(signal + eps * energy.sqrt() * rng::standard_normal(seed, Index::new(0, 0)))
}

/// `∬ g du dφ` over `S` (no `μ0` weight).
pub fn integrate_s_lebesgue(g: impl Fn(f64, f64) -> f64, q: &QuadratureSpec) -> Result<f64> {
    let rules = Rules::new(q)?;
    Ok(integrate_2d(&rules.u_lebesgue, &rules.angular, g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn q(n: usize) -> QuadratureSpec {
        QuadratureSpec::uniform(n).unwrap()
    }

    #[test]
    fn quadrature_spec_validation() {
        assert!(QuadratureSpec::new(7, 8, 8).is_err());
        assert!(QuadratureSpec::new(8, 8, 8).is_ok());
    }

    #[test]
    fn radon_of_constant_and_zero() {
        let c = 1.0 / PI.sqrt();
        for &(u, phi) in &[(0.0, 0.0), (0.3, 1.0), (0.95, 5.0)] {
            let v = radon_transform(&|_: f64, _: f64| c, u, phi, &q(16)).unwrap();
            assert_relative_eq!(v, PI.sqrt(), epsilon = 1e-13);
            let z = radon_transform(&|_: f64, _: f64| 0.0, u, phi, &q(16)).unwrap();
            assert_eq!(z, 0.0);
        }
    }

    #[test]
    fn radon_rejects_degenerate_lines() {
        let f = |_: f64, _: f64| 1.0;
        assert!(matches!(radon_transform(&f, 1.0, 0.0, &q(8)), Err(Error::Domain(_))));
        assert!(radon_transform(&f, -0.1, 0.0, &q(8)).is_err());
    }

    #[test]
    fn radon_of_first_zernike_matches_svd() {
        let nu = Index::new(1, 0);
        let v = radon_transform(&PhiBasis(nu), 0.3, 0.0, &q(32)).unwrap();
        let expected = singular_value(nu) * psi_basis(nu, 0.3, 0.0);
        assert!((v - expected).abs() <= 1e-6, "{v} vs {expected}");
    }

    #[test]
    fn radon_is_linear() {
        let f = |r: f64, t: f64| (3.0 * r).sin() * t.cos() + r * r;
        let g = |r: f64, t: f64| (r * t).exp() - 0.5;
        let (alpha, beta) = (0.7, -2.3);
        let h = |r: f64, t: f64| alpha * f(r, t) + beta * g(r, t);
        for &(u, phi) in &[(0.1, 0.2), (0.5, 3.0), (0.8, 6.0)] {
            let lhs = radon_transform(&h, u, phi, &q(24)).unwrap();
            let rhs = alpha * radon_transform(&f, u, phi, &q(24)).unwrap()
                + beta * radon_transform(&g, u, phi, &q(24)).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn inner_products_examples() {
        let qq = q(32);
        let psi = |nu: Index| move |u: f64, p: f64| psi_basis(nu, u, p);
        assert_relative_eq!(
            inner_product_s(psi(Index::new(0, 0)), psi(Index::new(0, 0)), &qq).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert!(
            inner_product_s(psi(Index::new(1, 0)), psi(Index::new(0, 1)), &qq)
                .unwrap()
                .abs()
                < 1e-12
        );
        assert!(
            inner_product_s(psi(Index::new(1, 1)), psi(Index::new(0, 0)), &qq)
                .unwrap()
                .abs()
                < 1e-12
        );

        let phi = |nu: Index| PhiBasis(nu);
        assert_relative_eq!(
            inner_product_h(&phi(Index::new(0, 0)), &phi(Index::new(0, 0)), &qq).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert!(
            inner_product_h(&phi(Index::new(1, 0)), &phi(Index::new(0, 1)), &qq)
                .unwrap()
                .abs()
                < 1e-12
        );
        assert_relative_eq!(
            inner_product_h(&phi(Index::new(2, 0)), &phi(Index::new(2, 0)), &qq).unwrap(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn zernike_radial_norm() {
        let rule = gauss_legendre_on(32, 0.0, 1.0);
        for a in 0..=8u32 {
            for b in (a % 2..=a).step_by(2) {
                let s: f64 = rule
                    .iter()
                    .map(|&(r, w)| w * r * crate::lattice::zernike_radial(a, b, r).unwrap().powi(2))
                    .sum();
                assert_relative_eq!(s, 1.0 / (2.0 * (f64::from(a) + 1.0)), epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn gram_matrices_are_identity() {
        let qq = q(64);
        assert!(gram_deviation_phi(8, &qq).unwrap() <= 1e-6);
        assert!(gram_deviation_psi(8, &qq).unwrap() <= 1e-6);
    }

    #[test]
    fn svd_residual_examples() {
        assert!(svd_residual(Index::new(0, 0), &q(32)).unwrap() <= 1e-8);
        assert!(svd_residual(Index::new(1, 2), &q(64)).unwrap() <= 1e-6);
        assert!(svd_residual(Index::new(3, 3), &q(128)).unwrap() <= 1e-6);
    }

    #[test]
    fn svd_residual_does_not_grow_with_grid() {
        for nu in Index::up_to_degree(6) {
            let mut prev = f64::INFINITY;
            for n in [8, 16, 32, 64] {
                let r = svd_residual(nu, &q(n)).unwrap();
                // monotone down to the rounding floor
                assert!(r <= prev.max(1e-13), "{nu} n={n}: {r} after {prev}");
                prev = r;
            }
            assert!(prev <= 1e-12);
        }
    }

    #[test]
    fn observation_deterministic_part() {
        let nu = Index::new(1, 2);
        let f = PhiBasis(nu);
        let g = move |u: f64, p: f64| psi_basis(nu, u, p);
        let qq = q(32);
        let noiseless = observe_functional(&f, g, 1e-300, 3, &qq).unwrap();
        let expected = singular_value(nu) * integrate_s_lebesgue(|u, p| g(u, p).powi(2), &qq).unwrap();
        assert_relative_eq!(noiseless, expected, epsilon = 1e-10);
        assert_eq!(
            observe_functional(&f, g, 0.1, 42, &qq).unwrap(),
            observe_functional(&f, g, 0.1, 42, &qq).unwrap()
        );
    }

    #[test]
    fn observation_noise_variance() {
        let zero = |_: f64, _: f64| 0.0;
        let g = |u: f64, p: f64| 1.0 + u * p.cos();
        let qq = q(8);
        let eps = 0.3;
        let energy = integrate_s_lebesgue(|u, p| g(u, p).powi(2), &qq).unwrap();
        let n = 10_000;
        let xs: Vec<f64> = (0..n)
            .map(|s| observe_functional(&zero, g, eps, rng::trial_seed(7, 0, s), &qq).unwrap())
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let target = eps * eps * energy;
        let se = target * (2.0 / n as f64).sqrt();
        assert!((var - target).abs() < 5.0 * se, "{var} vs {target}");
        assert!(mean.abs() < 5.0 * (target / n as f64).sqrt());
    }
}
