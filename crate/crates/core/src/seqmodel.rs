//! Gaussian sequence model `y_ν = η_ν + ε ξ_ν`, alternative-set membership
//! and the least-favourable signals.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::extreme::{ExtremeSolution, APERY};
use crate::lattice::{ellipsoid_coeff, for_each_product_pair, sigma, sigma_sq, Index, ModelParams};
use crate::rng;

/// Finitely supported real sequence on the index lattice; absent entries are zero.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SequenceVector {
    entries: BTreeMap<Index, f64>,
}

impl SequenceVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, nu: Index, value: f64) -> Option<f64> {
        self.entries.insert(nu, value)
    }

    /// Value at `ν`, zero when absent.
    pub fn get(&self, nu: Index) -> f64 {
        self.entries.get(&nu).copied().unwrap_or(0.0)
    }

    /// Stored value at `ν`, if any.
    pub fn lookup(&self, nu: Index) -> Option<f64> {
        self.entries.get(&nu).copied()
    }

    pub fn contains(&self, nu: Index) -> bool {
        self.entries.contains_key(&nu)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in lattice order.
    pub fn iter(&self) -> impl Iterator<Item = (Index, f64)> + '_ {
        self.entries.iter().map(|(&nu, &v)| (nu, v))
    }

    pub fn indices(&self) -> impl Iterator<Item = Index> + '_ {
        self.entries.keys().copied()
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.values().copied()
    }

    pub fn map(&self, f: impl Fn(Index, f64) -> f64) -> Self {
        self.iter().map(|(nu, v)| (nu, f(nu, v))).collect()
    }
}

impl FromIterator<(Index, f64)> for SequenceVector {
    fn from_iter<I: IntoIterator<Item = (Index, f64)>>(iter: I) -> Self {
        Self {
            entries: iter.into_iter().collect(),
        }
    }
}

impl Serialize for SequenceVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter().map(|(nu, v)| (nu.j, nu.l, v)))
    }
}

impl<'de> Deserialize<'de> for SequenceVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let triples = Vec::<(u32, u32, f64)>::deserialize(deserializer)?;
        Ok(triples.into_iter().map(|(j, l, v)| (Index::new(j, l), v)).collect())
    }
}

/// One draw of `y = η + ε ξ` on `support`.
///
/// `ξ_ν` is keyed by `(seed, ν)`, so the draw at a given index does not depend
/// on which other indices are in the support.
pub fn sample_observation(eta: &SequenceVector, support: &[Index], eps: f64, seed: u64) -> Result<SequenceVector> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::Domain(format!("noise level must be >= 0, got {eps}")));
    }
    let declared: HashSet<Index> = support.iter().copied().collect();
    if let Some((nu, _)) = eta.iter().find(|&(nu, v)| v != 0.0 && !declared.contains(&nu)) {
        return Err(Error::SupportMismatch(nu));
    }
    Ok(support
        .iter()
        .map(|&nu| (nu, eta.get(nu) + eps * rng::standard_normal(seed, nu)))
        .collect())
}

/// Extreme sequence `η_ν = √η̃_ν²` on the water-filling support.
pub fn extreme_signal(sol: &ExtremeSolution) -> SequenceVector {
    sol.eta_sq.map(|_, e| e.sqrt())
}

/// Both constraint sums of the alternative set for one signal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Membership {
    /// `Σ a_ν² σ_ν² η_ν²`, must be `<= 1`.
    pub ellipsoid_sum: f64,
    /// `Σ σ_ν² η_ν²`, must be `>= r²`.
    pub ball_sum: f64,
    pub r_sq: f64,
    pub inside: bool,
}

/// Relative slack on both constraints, absorbing summation rounding.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// Whether `η` lies in the ellipsoid with the open ball of radius `r` removed.
pub fn membership_check(eta: &SequenceVector, params: &ModelParams, r: f64) -> Membership {
    let (mut ell, mut ball) = (0.0, 0.0);
    for (nu, v) in eta.iter() {
        let t = sigma_sq(nu, params) * v * v;
        let a = ellipsoid_coeff(nu, params);
        ball += t;
        ell += a * a * t;
    }
    let r_sq = r * r;
    Membership {
        ellipsoid_sum: ell,
        ball_sum: ball,
        r_sq,
        inside: ell <= 1.0 + MEMBERSHIP_TOL && ball >= r_sq * (1.0 - MEMBERSHIP_TOL),
    }
}

impl Membership {
    pub fn into_result(self) -> Result<Self> {
        if self.inside {
            Ok(self)
        } else {
            Err(Error::OutsideAlternative {
                ellipsoid_sum: self.ellipsoid_sum,
                ball_sum: self.ball_sum,
                r_sq: self.r_sq,
            })
        }
    }
}

/// Random-sign prior on one index band: `v_ν = z_k ξ_ν σ_ν` for `ν ∈ Δ_k`.
#[derive(Clone, Debug, Serialize)]
pub struct PriorSpec {
    /// Band number `k >= 1`.
    pub k: usize,
    pub p_k: f64,
    /// Radius `r(p_k)` the prior is built for.
    pub r_k: f64,
    pub delta_band: Vec<Index>,
    /// `z_k²`.
    pub z_sq: f64,
    pub seed: u64,
}

impl PriorSpec {
    /// `Σ_{Δ_k} σ_ν⁴`.
    pub fn sigma4_sum(&self, params: &ModelParams) -> f64 {
        self.delta_band.iter().map(|&nu| sigma_sq(nu, params).powi(2)).sum()
    }
}

/// Signal drawn from a band prior; signs come from `(seed, ν)`.
pub fn prior_signal(spec: &PriorSpec, params: &ModelParams) -> SequenceVector {
    let z = spec.z_sq.sqrt();
    spec.delta_band
        .iter()
        .map(|&nu| (nu, z * rng::sign(spec.seed, nu) * sigma(nu, params)))
        .collect()
}

/// Smoothness grid, radii, band thresholds and band priors for the lower bound.
///
/// Normalized units throughout. `φ(p) = 4/(4p+3)` runs over an arithmetic
/// progression with `K = ceil((b − a) ln(1/ε) / ln 2)` steps.
#[derive(Clone, Debug, Serialize)]
pub struct PriorGrid {
    pub eps: f64,
    pub d: f64,
    pub radius_scale: f64,
    pub k: usize,
    /// `p_0 > p_1 > … > p_K`.
    pub p_values: Vec<f64>,
    pub radii: Vec<f64>,
    /// `T_k = ceil((2 r_k)^{-1/p_k})`.
    pub thresholds: Vec<u64>,
    /// Priors for the nonempty bands among `k = 1..=K`.
    pub priors: Vec<PriorSpec>,
}

/// `a(p) = (2B/(2p+3)) (3/(4p+3))^{-(2p+3)/(2p)}`.
pub fn lower_bound_constant(p: f64) -> f64 {
    2.0 * APERY / (2.0 * p + 3.0) * (3.0 / (4.0 * p + 3.0)).powf(-(2.0 * p + 3.0) / (2.0 * p))
}

/// `radius_scale · (ε (d a(p) ln ln ε⁻¹)^{1/4})^{4p/(4p+3)}`.
pub fn lower_bound_radius(eps: f64, p: f64, d: f64, radius_scale: f64) -> f64 {
    let ll = (1.0 / eps).ln().ln();
    radius_scale * (eps * (d * lower_bound_constant(p) * ll).powf(0.25)).powf(4.0 * p / (4.0 * p + 3.0))
}

/// Builds the lower-bound grid on `[p_min, p_max]`.
pub fn build_prior_grid(p_min: f64, p_max: f64, eps: f64, d: f64, radius_scale: f64, seed: u64) -> Result<PriorGrid> {
    if !(p_min > 0.0 && p_min <= p_max && p_max.is_finite()) {
        return Err(Error::Domain(format!(
            "need 0 < p_min <= p_max, got [{p_min}, {p_max}]"
        )));
    }
    if !(eps > 0.0 && (1.0 / eps).ln() > 1.0) {
        return Err(Error::Domain(format!("lower-bound grid needs ε < 1/e, got {eps}")));
    }
    if !(d > 0.0 && radius_scale > 0.0) {
        return Err(Error::Domain("d and the radius scale must be > 0".into()));
    }
    let phi = |p: f64| 4.0 / (4.0 * p + 3.0);
    let (a, b) = (phi(p_max), phi(p_min));
    let k = (((b - a) * (1.0 / eps).ln() / std::f64::consts::LN_2).ceil() as usize).max(1);
    let p_values: Vec<f64> = (0..=k)
        .map(|i| match i {
            0 => p_max,
            i if i == k => p_min,
            i => 1.0 / (a + i as f64 * (b - a) / k as f64) - 0.75,
        })
        .collect();
    let radii: Vec<f64> = p_values
        .iter()
        .map(|&p| lower_bound_radius(eps, p, d, radius_scale))
        .collect();
    let thresholds: Vec<u64> = p_values
        .iter()
        .zip(&radii)
        .map(|(&p, &r)| {
            let t = (2.0 * r).powf(-1.0 / p).ceil();
            if t > 1e8 {
                Err(Error::Domain(format!("band threshold {t:.3e} too large to enumerate")))
            } else {
                Ok(t as u64)
            }
        })
        .collect::<Result<_>>()?;

    let mut priors = Vec::new();
    for band in 1..=k {
        let (lo, hi) = (thresholds[band - 1], thresholds[band]);
        let mut delta = Vec::new();
        for_each_product_pair(hi, |m, n| {
            if m * n > lo {
                delta.push(Index::new((m - 1) as u32, (n - 1) as u32));
            }
        });
        if delta.is_empty() {
            continue;
        }
        delta.sort_unstable();
        let mut spec = PriorSpec {
            k: band,
            p_k: p_values[band],
            r_k: radii[band],
            delta_band: delta,
            z_sq: 0.0,
            seed: rng::trial_seed(seed, 2, band as u64),
        };
        let s4 = spec.sigma4_sum(&ModelParams::normalized(spec.p_k));
        spec.z_sq = 2.0 * spec.r_k * spec.r_k / s4;
        priors.push(spec);
    }
    Ok(PriorGrid {
        eps,
        d,
        radius_scale,
        k,
        p_values,
        radii,
        thresholds,
        priors,
    })
}
