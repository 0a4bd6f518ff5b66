//! Weighted chi-square tests, their Gaussian error predictions, and the
//! adaptive test that maximises over a grid of band-limited statistics.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::extreme::adaptive_rate;
use crate::lattice::{indices_below, sigma_sq, Index, ModelParams};
use crate::seqmodel::SequenceVector;

/// Standard normal distribution function `Φ`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Outcome of an indicator test.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestVerdict {
    /// All statistics that entered the decision (one for a plain chi-square test).
    pub statistics: Vec<f64>,
    /// Largest statistic, compared against the threshold.
    pub statistic: f64,
    pub threshold: f64,
    pub reject: bool,
}

impl TestVerdict {
    pub fn new(statistics: Vec<f64>, threshold: f64) -> Self {
        let statistic = statistics.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self {
            reject: statistic > threshold,
            statistics,
            statistic,
            threshold,
        }
    }
}

/// `t = Σ_ν w_ν ((y_ν/ε)² − 1)`.
pub fn chi2_statistic(y: &SequenceVector, weights: &SequenceVector, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    let inv = 1.0 / (eps * eps);
    let mut t = 0.0;
    for (nu, w) in weights.iter() {
        let v = y.lookup(nu).ok_or(Error::MissingObservation(nu))?;
        t += w * (v * v * inv - 1.0);
    }
    Ok(t)
}

/// Chi-square test with a fixed threshold.
pub fn chi2_test(y: &SequenceVector, weights: &SequenceVector, eps: f64, threshold: f64) -> Result<TestVerdict> {
    Ok(TestVerdict::new(vec![chi2_statistic(y, weights, eps)?], threshold))
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Domain(format!("noise level must be > 0, got {eps}")));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("level α must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// Upper `α`-quantile `H^{(α)}` of the standard normal: `Φ(H) = 1 − α`.
pub fn np_threshold(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    // Φ(H) = 1 − α  ⇔  Φ(−H) = α, which keeps precision for small α
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf(-mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Threshold `u/2` minimising the predicted total error.
pub fn total_error_threshold(u: f64) -> f64 {
    0.5 * u
}

/// Predicted type II error `Φ(H^{(α)} − u)`.
pub fn predicted_beta(alpha: f64, u: f64) -> Result<f64> {
    Ok(normal_cdf(np_threshold(alpha)? - u))
}

/// Predicted minimax total error `2Φ(−u/2)`.
pub fn predicted_gamma(u: f64) -> f64 {
    2.0 * normal_cdf(-0.5 * u)
}

/// `φ(p) = 4/(4p+3)`.
pub fn phi_of_p(p: f64) -> f64 {
    4.0 / (4.0 * p + 3.0)
}

/// Inverse of [`phi_of_p`].
pub fn p_of_phi(phi: f64) -> f64 {
    1.0 / phi - 0.75
}

/// One band `C_k` of the adaptive grid.
#[derive(Clone, Debug)]
pub struct AdaptiveBand {
    pub p: f64,
    /// `r_ε(p_k) = D · adaptive_rate(ε, p_k)`.
    pub rate: f64,
    /// `c_k = 2 / r_ε(p_k)`.
    pub cutoff: f64,
    /// `C_k = {ν : ((j+1)(l+1))^{p_k} <= c_k}`, lattice order.
    pub indices: Vec<Index>,
    /// `w_{ν,k} = σ_ν² / √(2 Σ_{C_k} σ⁴)`, aligned with `indices`.
    pub weights: Vec<f64>,
}

/// Grid of band-limited statistics for the adaptive test. Normalized units.
#[derive(Clone, Debug)]
pub struct AdaptiveGrid {
    pub eps: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub d_scale: f64,
    /// `K`; the grid holds `K + 1` bands.
    pub k: usize,
    /// `H_ε = 2 √(ln K)`.
    pub h_eps: f64,
    pub bands: Vec<AdaptiveBand>,
}

impl AdaptiveGrid {
    pub fn p_values(&self) -> Vec<f64> {
        self.bands.iter().map(|b| b.p).collect()
    }

    pub fn cutoffs(&self) -> Vec<f64> {
        self.bands.iter().map(|b| b.cutoff).collect()
    }

    /// `∪_k C_k`, lattice order.
    pub fn union_support(&self) -> Vec<Index> {
        let mut all: Vec<Index> = self.bands.iter().flat_map(|b| b.indices.iter().copied()).collect();
        all.sort_unstable();
        all.dedup();
        all
    }

    pub fn summary(&self) -> GridSummary {
        GridSummary {
            eps: self.eps,
            p_min: self.p_min,
            p_max: self.p_max,
            d_scale: self.d_scale,
            k: self.k,
            h_eps: self.h_eps,
            bands: self
                .bands
                .iter()
                .map(|b| BandSummary {
                    p: b.p,
                    rate: b.rate,
                    cutoff: b.cutoff,
                    size: b.indices.len(),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BandSummary {
    pub p: f64,
    pub rate: f64,
    pub cutoff: f64,
    pub size: usize,
}

/// Serializable record of an [`AdaptiveGrid`].
#[derive(Clone, Debug, Serialize)]
pub struct GridSummary {
    pub eps: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub d_scale: f64,
    pub k: usize,
    pub h_eps: f64,
    pub bands: Vec<BandSummary>,
}

/// Grid size `K = ceil(ln(1/ε) · ln ln(1/ε))`, at least 1.
pub fn adaptive_grid_size(eps: f64) -> usize {
    let l = (1.0 / eps).ln();
    ((l * l.ln()).ceil() as usize).max(1)
}

/// Builds the adaptive grid on `[p_min, p_max]`.
pub fn build_adaptive_grid(p_min: f64, p_max: f64, eps: f64, d_scale: f64) -> Result<AdaptiveGrid> {
    if !(p_min > 0.0 && p_min <= p_max && p_max.is_finite()) {
        return Err(Error::Domain(format!(
            "need 0 < p_min <= p_max, got [{p_min}, {p_max}]"
        )));
    }
    if !(d_scale > 0.0 && d_scale.is_finite()) {
        return Err(Error::Domain(format!("rate constant D must be > 0, got {d_scale}")));
    }
    if !(eps > 0.0 && eps < (-1.0f64).exp()) {
        return Err(Error::Domain(format!("adaptive grid needs 0 < ε < 1/e, got {eps}")));
    }
    let k = adaptive_grid_size(eps);
    let (a, b) = (phi_of_p(p_max), phi_of_p(p_min));
    let mut bands = Vec::with_capacity(k + 1);
    for i in 0..=k {
        let p = match i {
            0 => p_max,
            i if i == k => p_min,
            i => p_of_phi(a + i as f64 * (b - a) / k as f64),
        };
        let rate = d_scale * adaptive_rate(eps, p)?;
        let cutoff = 2.0 / rate;
        let params = ModelParams::normalized(p);
        let indices = indices_below(cutoff, &params);
        if indices.is_empty() {
            return Err(Error::GridDegenerate { band: i, cutoff });
        }
        let s2: Vec<f64> = indices.iter().map(|&nu| sigma_sq(nu, &params)).collect();
        let norm = (2.0 * s2.iter().map(|s| s * s).sum::<f64>()).sqrt();
        bands.push(AdaptiveBand {
            p,
            rate,
            cutoff,
            weights: s2.iter().map(|s| s / norm).collect(),
            indices,
        });
    }
    Ok(AdaptiveGrid {
        eps,
        p_min,
        p_max,
        d_scale,
        k,
        h_eps: 2.0 * (k as f64).ln().sqrt(),
        bands,
    })
}

/// `t_k = Σ_{C_k} w_{ν,k} ((y_ν/ε)² − 1)` for every band.
pub fn adaptive_statistics(y: &SequenceVector, grid: &AdaptiveGrid) -> Result<Vec<f64>> {
    let inv = 1.0 / (grid.eps * grid.eps);
    grid.bands
        .iter()
        .map(|band| {
            band.indices.iter().zip(&band.weights).try_fold(0.0, |t, (&nu, &w)| {
                let v = y.lookup(nu).ok_or(Error::MissingObservation(nu))?;
                Ok(t + w * (v * v * inv - 1.0))
            })
        })
        .collect()
}

/// Rejects iff `max_k t_k > H_ε`.
pub fn adaptive_test(y: &SequenceVector, grid: &AdaptiveGrid) -> Result<TestVerdict> {
    Ok(TestVerdict::new(adaptive_statistics(y, grid)?, grid.h_eps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn thresholds() {
        assert!(np_threshold(0.5).unwrap().abs() < 1e-12);
        assert_relative_eq!(np_threshold(0.05).unwrap(), 1.6448536269514722, epsilon = 1e-10);
        for &a in &[1e-6, 0.01, 0.2, 0.7, 0.999] {
            assert_relative_eq!(normal_cdf(np_threshold(a).unwrap()), 1.0 - a, epsilon = 1e-9);
        }
        assert!(np_threshold(0.0).is_err());
        assert!(np_threshold(1.0).is_err());
        assert_eq!(total_error_threshold(2.0), 1.0);
        assert_eq!(total_error_threshold(3.5), 1.75);
    }

    #[test]
    fn predictions() {
        assert_relative_eq!(predicted_beta(0.05, 0.0).unwrap(), 0.95, epsilon = 1e-10);
        assert!(predicted_beta(0.05, 50.0).unwrap() < 1e-100);
        assert_relative_eq!(predicted_beta(0.05, 1.6448536269514722).unwrap(), 0.5, epsilon = 1e-10);
        assert_eq!(predicted_gamma(0.0), 1.0);
        assert_relative_eq!(predicted_gamma(2.0), 0.31731050786291415, epsilon = 1e-12);
        assert_relative_eq!(predicted_gamma(2.0), 2.0 * normal_cdf(-total_error_threshold(2.0)));
        let mut prev = 1.0;
        for i in 1..100 {
            let g = predicted_gamma(i as f64 * 0.1);
            assert!(g < prev);
            prev = g;
        }
    }

    #[test]
    fn chi2_at_noise_level_is_zero() {
        let eps = 0.3;
        let nus = Index::up_to_degree(3);
        let y: SequenceVector = nus.iter().map(|&nu| (nu, eps)).collect();
        let w: SequenceVector = nus.iter().map(|&nu| (nu, 0.1 + f64::from(nu.j))).collect();
        assert!(chi2_statistic(&y, &w, eps).unwrap().abs() < 1e-14);
        let missing: SequenceVector = [(Index::new(9, 9), 1.0)].into_iter().collect();
        assert!(matches!(
            chi2_statistic(&y, &missing, eps),
            Err(Error::MissingObservation(_))
        ));
    }

    #[test]
    fn verdict_is_strict() {
        assert!(!TestVerdict::new(vec![1.0], 1.0).reject);
        assert!(TestVerdict::new(vec![0.2, 1.5], 1.0).reject);
    }

    #[test]
    fn grid_example() {
        let grid = build_adaptive_grid(0.5, 2.0, 1e-3, 1.0).unwrap();
        assert_eq!(grid.k, 14);
        assert_eq!(grid.bands.len(), 15);
        assert_eq!(grid.bands[0].p, 2.0);
        assert_eq!(grid.bands[14].p, 0.5);
        assert_relative_eq!(grid.h_eps, 2.0 * 14f64.ln().sqrt());
        let phis: Vec<f64> = grid.p_values().iter().map(|&p| phi_of_p(p)).collect();
        let step = phis[1] - phis[0];
        for w in phis.windows(2) {
            assert_relative_eq!(w[1] - w[0], step, epsilon = 1e-12);
        }
        for band in &grid.bands {
            let s: f64 = band.weights.iter().map(|w| w * w).sum();
            assert_relative_eq!(s, 0.5, epsilon = 1e-13);
            assert_relative_eq!(band.cutoff * band.rate, 2.0);
        }
        let json = serde_json::to_string(&grid.summary()).unwrap();
        assert!(json.contains("\"h_eps\""));
    }

    #[test]
    fn degenerate_interval_repeats_one_band() {
        let grid = build_adaptive_grid(1.0, 1.0, 1e-3, 1.0).unwrap();
        assert!(grid.bands.iter().all(|b| b.indices == grid.bands[0].indices));
    }

    #[test]
    fn huge_rate_constant_is_degenerate() {
        assert!(matches!(
            build_adaptive_grid(0.5, 2.0, 1e-3, 1e3),
            Err(Error::GridDegenerate { .. })
        ));
        assert!(build_adaptive_grid(0.5, 2.0, 0.5, 1.0).is_err());
    }
}
