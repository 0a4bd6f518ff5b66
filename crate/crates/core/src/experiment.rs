//! Monte Carlo experiments and deterministic sweeps.
//!
//! Trials run in parallel; trial `t` of stream `s` draws its noise from
//! `trial_seed(master_seed, s, t)` and results are collected in trial order,
//! so every estimate is reproducible bit-for-bit regardless of scheduling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::{
    build_adaptive_grid, np_threshold, predicted_beta, predicted_gamma, total_error_threshold, AdaptiveGrid,
};
use crate::error::{Error, Result};
use crate::extreme::{
    adaptive_rate, eps_for_target_u, i_of_a, j_sums, leading_order, separation_rate, solve_extreme, ExtremeSolution,
};
use crate::lattice::{sigma_sq, singular_value, Index, ModelParams};
use crate::radon::{gram_deviation_phi, gram_deviation_psi, svd_residual, QuadratureSpec};
use crate::rng;
use crate::seqmodel::{build_prior_grid, extreme_signal, membership_check, PriorGrid, SequenceVector};
use crate::table::{Provenance, Table};

/// Smallest trial count accepted for an error-probability estimate.
pub const MIN_TRIALS: u64 = 100;

const STREAM_NULL: u64 = 0;
const STREAM_ALT: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    NullCalibration,
    SharpAsymptotics,
    RateSweep,
    AdaptivePower,
    LowerBound,
    AsymptoticsTable,
    SvdVerify,
}

/// Everything that determines an experiment's output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub params: ModelParams,
    pub eps: f64,
    pub r: f64,
    pub alpha: Option<f64>,
    pub n_trials: u64,
    pub master_seed: u64,
    pub mode: Mode,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidSpec(format!("eps must be > 0, got {}", self.eps)));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::InvalidSpec(format!("r must be > 0, got {}", self.r)));
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::InvalidSpec(format!("alpha must lie in (0, 1), got {a}")));
            }
        }
        if self.n_trials < MIN_TRIALS {
            return Err(Error::InvalidSpec(format!(
                "at least {MIN_TRIALS} trials are needed for an error estimate, got {}",
                self.n_trials
            )));
        }
        Ok(())
    }

    pub fn alpha_or_default(&self) -> f64 {
        self.alpha.unwrap_or(0.05)
    }

    pub fn provenance(&self) -> Result<Provenance> {
        Provenance::new(self, Some(self.master_seed))
    }
}

/// Empirical error probability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ErrorEstimate {
    pub rate: f64,
    pub std_err: f64,
    pub n_trials: u64,
}

impl ErrorEstimate {
    pub fn from_count(count: u64, n_trials: u64) -> Self {
        let rate = count as f64 / n_trials as f64;
        Self {
            rate,
            std_err: (rate * (1.0 - rate) / n_trials as f64).sqrt(),
            n_trials,
        }
    }
}

/// Fraction of `stats` strictly above `threshold`.
pub fn rejection_rate(stats: &[f64], threshold: f64) -> ErrorEstimate {
    let count = stats.iter().filter(|&&t| t > threshold).count() as u64;
    ErrorEstimate::from_count(count, stats.len() as u64)
}

/// Fraction of `stats` at or below `threshold`.
pub fn acceptance_rate(stats: &[f64], threshold: f64) -> ErrorEstimate {
    let count = stats.iter().filter(|&&t| t <= threshold).count() as u64;
    ErrorEstimate::from_count(count, stats.len() as u64)
}

/// A test procedure: a set of weighted bands and a threshold on the largest band statistic.
#[derive(Clone, Debug)]
pub enum TestProcedure {
    Chi2 { weights: SequenceVector, threshold: f64 },
    Adaptive(AdaptiveGrid),
}

impl TestProcedure {
    pub fn threshold(&self) -> f64 {
        match self {
            Self::Chi2 { threshold, .. } => *threshold,
            Self::Adaptive(grid) => grid.h_eps,
        }
    }

    pub fn design(&self) -> StatisticDesign {
        match self {
            Self::Chi2 { weights, .. } => StatisticDesign::single(weights),
            Self::Adaptive(grid) => StatisticDesign::adaptive(grid),
        }
    }
}

/// Band statistics compiled against one flat observation support.
#[derive(Clone, Debug)]
pub struct StatisticDesign {
    support: Vec<Index>,
    /// Per band: `(position in support, weight)`.
    bands: Vec<Vec<(usize, f64)>>,
}

impl StatisticDesign {
    pub fn single(weights: &SequenceVector) -> Self {
        let support: Vec<Index> = weights.indices().collect();
        let band = weights.values().enumerate().collect();
        Self {
            support,
            bands: vec![band],
        }
    }

    pub fn adaptive(grid: &AdaptiveGrid) -> Self {
        let support = grid.union_support();
        let bands = grid
            .bands
            .iter()
            .map(|b| {
                b.indices
                    .iter()
                    .zip(&b.weights)
                    .map(|(nu, &w)| (support.binary_search(nu).expect("band inside union"), w))
                    .collect()
            })
            .collect();
        Self { support, bands }
    }

    pub fn support(&self) -> &[Index] {
        &self.support
    }

    pub fn n_bands(&self) -> usize {
        self.bands.len()
    }

    /// Signal values aligned with the support; coordinates outside it never reach a statistic.
    fn aligned(&self, signal: &SequenceVector) -> Vec<f64> {
        self.support.iter().map(|&nu| signal.get(nu)).collect()
    }

    fn band_statistics(&self, z: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.bands
                .iter()
                .map(|band| band.iter().map(|&(i, w)| w * z[i]).sum::<f64>()),
        );
    }

    /// Band statistics for every trial, in trial order.
    pub fn simulate(
        &self,
        signal: &SequenceVector,
        eps: f64,
        master_seed: u64,
        stream: u64,
        n_trials: u64,
    ) -> Vec<Vec<f64>> {
        let eta = self.aligned(signal);
        let inv = 1.0 / eps;
        (0..n_trials)
            .into_par_iter()
            .map_init(
                || vec![0.0; self.support.len()],
                |z, t| {
                    let seed = rng::trial_seed(master_seed, stream, t);
                    for ((zi, &nu), &e) in z.iter_mut().zip(&self.support).zip(&eta) {
                        let y = e * inv + rng::standard_normal(seed, nu);
                        *zi = y * y - 1.0;
                    }
                    let mut out = Vec::with_capacity(self.bands.len());
                    self.band_statistics(z, &mut out);
                    out
                },
            )
            .collect()
    }

    /// Largest band statistic per trial.
    pub fn simulate_max(
        &self,
        signal: &SequenceVector,
        eps: f64,
        master_seed: u64,
        stream: u64,
        n_trials: u64,
    ) -> Vec<f64> {
        self.simulate(signal, eps, master_seed, stream, n_trials)
            .into_iter()
            .map(|s| s.into_iter().fold(f64::NEG_INFINITY, f64::max))
            .collect()
    }

    /// `E t_k = ε^{-2} Σ w_{ν,k} η_ν²` under signal `η`.
    pub fn expected_statistics(&self, signal: &SequenceVector, eps: f64) -> Vec<f64> {
        let eta = self.aligned(signal);
        let inv = 1.0 / (eps * eps);
        self.bands
            .iter()
            .map(|band| band.iter().map(|&(i, w)| w * eta[i] * eta[i] * inv).sum())
            .collect()
    }
}

/// Empirical type I error of `test` under the null.
pub fn estimate_alpha(test: &TestProcedure, spec: &ExperimentSpec) -> Result<ErrorEstimate> {
    spec.validate()?;
    let stats = test.design().simulate_max(
        &SequenceVector::new(),
        spec.eps,
        spec.master_seed,
        STREAM_NULL,
        spec.n_trials,
    );
    Ok(rejection_rate(&stats, test.threshold()))
}

/// Empirical type II error of `test` at one point of the alternative.
pub fn estimate_beta_at(test: &TestProcedure, signal: &SequenceVector, spec: &ExperimentSpec) -> Result<ErrorEstimate> {
    spec.validate()?;
    membership_check(signal, &spec.params, spec.r).into_result()?;
    let stats = test
        .design()
        .simulate_max(signal, spec.eps, spec.master_seed, STREAM_ALT, spec.n_trials);
    Ok(acceptance_rate(&stats, test.threshold()))
}

/// Noise level at which the extreme problem at radius `r` has value `target_u`.
pub fn tune_eps_for_u(r: f64, target_u: f64, params: &ModelParams) -> Result<f64> {
    // u_ε does not enter the water-filling solution, so any ε works for the solve
    let sol = solve_extreme(r, 1.0, params)?;
    eps_for_target_u(&sol, target_u)
}

/// Empirical versus predicted error probabilities at one `(r, ε)`.
#[derive(Clone, Debug, Serialize)]
pub struct SharpReport {
    pub r: f64,
    pub eps: f64,
    pub level: f64,
    pub u_eps: f64,
    pub w0: f64,
    pub support_size: usize,
    /// Type I error at `H^{(α)}`.
    pub alpha_np: ErrorEstimate,
    /// Type II error at `H^{(α)}`.
    pub beta_np: ErrorEstimate,
    pub beta_predicted: f64,
    pub alpha_total: ErrorEstimate,
    pub beta_total: ErrorEstimate,
    /// `α + β` at threshold `u/2`.
    pub gamma: f64,
    pub gamma_std_err: f64,
    pub gamma_predicted: f64,
    pub warnings: Vec<String>,
}

pub const SHARP_COLUMNS: [&str; 15] = [
    "r",
    "eps",
    "u_eps",
    "w0",
    "support_size",
    "level",
    "alpha_np",
    "alpha_np_se",
    "beta_np",
    "beta_np_se",
    "beta_pred",
    "gamma",
    "gamma_se",
    "gamma_pred",
    "n_trials",
];

impl SharpReport {
    pub fn row(&self) -> Vec<f64> {
        vec![
            self.r,
            self.eps,
            self.u_eps,
            self.w0,
            self.support_size as f64,
            self.level,
            self.alpha_np.rate,
            self.alpha_np.std_err,
            self.beta_np.rate,
            self.beta_np.std_err,
            self.beta_predicted,
            self.gamma,
            self.gamma_std_err,
            self.gamma_predicted,
            self.alpha_np.n_trials as f64,
        ]
    }
}

/// Null and extreme-signal trials at thresholds `H^{(α)}` and `u_ε/2`.
pub fn sharp_asymptotics_experiment(spec: &ExperimentSpec) -> Result<SharpReport> {
    spec.validate()?;
    let sol = solve_extreme(spec.r, spec.eps, &spec.params)?;
    sharp_from_solution(&sol, spec)
}

fn sharp_from_solution(sol: &ExtremeSolution, spec: &ExperimentSpec) -> Result<SharpReport> {
    let level = spec.alpha_or_default();
    let design = StatisticDesign::single(&sol.weights);
    let signal = extreme_signal(sol);
    membership_check(&signal, &spec.params, sol.r).into_result()?;

    let null = design.simulate_max(
        &SequenceVector::new(),
        sol.eps,
        spec.master_seed,
        STREAM_NULL,
        spec.n_trials,
    );
    let alt = design.simulate_max(&signal, sol.eps, spec.master_seed, STREAM_ALT, spec.n_trials);

    let h_np = np_threshold(level)?;
    let h_tot = total_error_threshold(sol.u_eps);
    let alpha_total = rejection_rate(&null, h_tot);
    let beta_total = acceptance_rate(&alt, h_tot);

    let mut warnings = Vec::new();
    if sol.w0 > 0.2 {
        warnings.push(format!(
            "largest weight w0 = {:.3} > 0.2: the Gaussian regime is not reached and the predictions may be off",
            sol.w0
        ));
    }
    Ok(SharpReport {
        r: sol.r,
        eps: sol.eps,
        level,
        u_eps: sol.u_eps,
        w0: sol.w0,
        support_size: sol.support.len(),
        alpha_np: rejection_rate(&null, h_np),
        beta_np: acceptance_rate(&alt, h_np),
        beta_predicted: predicted_beta(level, sol.u_eps)?,
        gamma: alpha_total.rate + beta_total.rate,
        gamma_std_err: alpha_total.std_err.hypot(beta_total.std_err),
        gamma_predicted: predicted_gamma(sol.u_eps),
        alpha_total,
        beta_total,
        warnings,
    })
}

pub fn sharp_table(report: &SharpReport, spec: &ExperimentSpec) -> Result<Table> {
    let mut prov = spec.provenance()?;
    for w in &report.warnings {
        prov = prov.with("warning", w);
    }
    let mut t = Table::new(prov, &SHARP_COLUMNS);
    t.push(report.row())?;
    Ok(t)
}

#[derive(Clone, Debug, Serialize)]
pub struct RateSweepRow {
    pub c: f64,
    pub r: f64,
    pub u_eps: f64,
    pub w0: f64,
    pub gamma: f64,
    pub gamma_std_err: f64,
    pub gamma_predicted: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RateSweep {
    pub r_star: f64,
    pub rows: Vec<RateSweepRow>,
    /// Least-squares slope of `ln u_ε` against `ln c`.
    pub slope: f64,
}

impl RateSweep {
    pub fn table(&self, spec: &ExperimentSpec) -> Result<Table> {
        let prov = spec
            .provenance()?
            .with_num("r_star", self.r_star)
            .with_num("loglog_slope", self.slope);
        let mut t = Table::new(prov, &["c", "r", "u_eps", "w0", "gamma", "gamma_se", "gamma_pred"]);
        for row in &self.rows {
            t.push(vec![
                row.c,
                row.r,
                row.u_eps,
                row.w0,
                row.gamma,
                row.gamma_std_err,
                row.gamma_predicted,
            ])?;
        }
        Ok(t)
    }
}

/// Total error at threshold `u/2` for `r = c · ε^{4p/(4p+3)}` across `c_values`.
pub fn rate_sweep(spec: &ExperimentSpec, c_values: &[f64]) -> Result<RateSweep> {
    spec.validate()?;
    if c_values.iter().any(|&c| !(c > 0.0)) {
        return Err(Error::InvalidSpec("every c value must be > 0".into()));
    }
    let r_star = separation_rate(spec.eps, spec.params.p)?;
    let mut rows = Vec::with_capacity(c_values.len());
    for (i, &c) in c_values.iter().enumerate() {
        let sol = solve_extreme(c * r_star, spec.eps, &spec.params)?;
        let design = StatisticDesign::single(&sol.weights);
        let stream = 10 + 2 * i as u64;
        let null = design.simulate_max(
            &SequenceVector::new(),
            spec.eps,
            spec.master_seed,
            stream,
            spec.n_trials,
        );
        let alt = design.simulate_max(
            &extreme_signal(&sol),
            spec.eps,
            spec.master_seed,
            stream + 1,
            spec.n_trials,
        );
        let h = total_error_threshold(sol.u_eps);
        let (a, b) = (rejection_rate(&null, h), acceptance_rate(&alt, h));
        rows.push(RateSweepRow {
            c,
            r: sol.r,
            u_eps: sol.u_eps,
            w0: sol.w0,
            gamma: a.rate + b.rate,
            gamma_std_err: a.std_err.hypot(b.std_err),
            gamma_predicted: predicted_gamma(sol.u_eps),
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.c.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.u_eps.ln()).collect();
    Ok(RateSweep {
        r_star,
        slope: ls_slope(&xs, &ys),
        rows,
    })
}

/// Least-squares slope; NaN for fewer than two distinct abscissae.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Expected band statistics of `grid` under the extreme signal for `(p_true, r)`.
pub fn adaptive_band_means(grid: &AdaptiveGrid, p_true: f64, r: f64) -> Result<Vec<f64>> {
    let sol = solve_extreme(r, grid.eps, &ModelParams::normalized(p_true))?;
    Ok(StatisticDesign::adaptive(grid).expected_statistics(&extreme_signal(&sol), grid.eps))
}

/// Result of scanning the rate constant `D`.
#[derive(Clone, Debug, Serialize)]
pub struct Calibration {
    pub d_scale: f64,
    /// `max_k E t_k` for each `p_true` at the chosen `D`.
    pub max_means: Vec<f64>,
    pub h_eps: f64,
}

/// Smallest `D` on the grid `d_min · 2^{i/8}` for which, at every `p_true`,
/// some band has expected statistic at least `2 H_ε` under the extreme
/// signal at `r = D · adaptive_rate(ε, p_true)`.
pub fn calibrate_d_scale(
    p_min: f64,
    p_max: f64,
    eps: f64,
    p_trues: &[f64],
    d_min: f64,
    d_max: f64,
) -> Result<Calibration> {
    let mut i = 0;
    loop {
        let d = d_min * 2f64.powf(i as f64 / 8.0);
        if d > d_max {
            return Err(Error::InvalidSpec(format!(
                "no rate constant in [{d_min}, {d_max}] lifts every matched band above 2 H_ε"
            )));
        }
        let grid = build_adaptive_grid(p_min, p_max, eps, d)?;
        let max_means = p_trues
            .iter()
            .map(|&pt| {
                let means = adaptive_band_means(&grid, pt, d * adaptive_rate(eps, pt)?)?;
                Ok(means.into_iter().fold(f64::NEG_INFINITY, f64::max))
            })
            .collect::<Result<Vec<f64>>>();
        if let Ok(max_means) = max_means {
            if max_means.iter().all(|&m| m >= 2.0 * grid.h_eps) {
                return Ok(Calibration {
                    d_scale: d,
                    max_means,
                    h_eps: grid.h_eps,
                });
            }
        }
        i += 1;
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AdaptiveReport {
    pub p_true: f64,
    pub d_scale: f64,
    pub k: usize,
    pub h_eps: f64,
    pub r: f64,
    pub u_eps: f64,
    pub alpha: ErrorEstimate,
    pub beta: ErrorEstimate,
    pub band_means: Vec<f64>,
    /// Band with the largest expected statistic.
    pub matched_band: usize,
}

impl AdaptiveReport {
    pub fn max_mean(&self) -> f64 {
        self.band_means[self.matched_band]
    }
}

pub const ADAPTIVE_COLUMNS: [&str; 12] = [
    "p_true",
    "d_scale",
    "k",
    "h_eps",
    "r",
    "u_eps",
    "alpha",
    "alpha_se",
    "beta",
    "beta_se",
    "matched_band",
    "max_mean",
];

impl AdaptiveReport {
    pub fn row(&self) -> Vec<f64> {
        vec![
            self.p_true,
            self.d_scale,
            self.k as f64,
            self.h_eps,
            self.r,
            self.u_eps,
            self.alpha.rate,
            self.alpha.std_err,
            self.beta.rate,
            self.beta.std_err,
            self.matched_band as f64,
            self.max_mean(),
        ]
    }
}

/// Adaptive test on `[p_min, p_max]`, with signal at the extreme sequence for
/// `(p_true, D · adaptive_rate(ε, p_true))`. Normalized units; `spec.r` is unused.
pub fn adaptive_power_experiment(
    spec: &ExperimentSpec,
    p_min: f64,
    p_max: f64,
    d_scale: f64,
    p_true: f64,
) -> Result<AdaptiveReport> {
    spec.validate()?;
    if !(p_min <= p_true && p_true <= p_max) {
        return Err(Error::InvalidSpec(format!(
            "p_true = {p_true} outside [{p_min}, {p_max}]"
        )));
    }
    let grid = build_adaptive_grid(p_min, p_max, spec.eps, d_scale)?;
    let params = ModelParams::normalized(p_true);
    let r = d_scale * adaptive_rate(spec.eps, p_true)?;
    let sol = solve_extreme(r, spec.eps, &params)?;
    let signal = extreme_signal(&sol);
    membership_check(&signal, &params, r).into_result()?;

    let design = StatisticDesign::adaptive(&grid);
    let null = design.simulate_max(
        &SequenceVector::new(),
        spec.eps,
        spec.master_seed,
        STREAM_NULL,
        spec.n_trials,
    );
    let alt = design.simulate_max(&signal, spec.eps, spec.master_seed, STREAM_ALT, spec.n_trials);
    let band_means = design.expected_statistics(&signal, spec.eps);
    let matched_band = band_means
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    Ok(AdaptiveReport {
        p_true,
        d_scale,
        k: grid.k,
        h_eps: grid.h_eps,
        r,
        u_eps: sol.u_eps,
        alpha: rejection_rate(&null, grid.h_eps),
        beta: acceptance_rate(&alt, grid.h_eps),
        band_means,
        matched_band,
    })
}

/// Closed-form bound on `E_0 (dP_π/dP_0 − 1)²` for the band priors.
#[derive(Clone, Debug, Serialize)]
pub struct LowerBoundReport {
    pub eps: f64,
    pub d: f64,
    pub radius_scale: f64,
    pub k: usize,
    /// `exp(2 Σ_{Δ_k} sinh²(z_k² σ² / 2ε²)) − 1` per nonempty band.
    pub band_terms: Vec<(usize, f64)>,
    /// `(1/K²) Σ_k` of the band terms; may be `+inf`.
    pub bound: f64,
    /// Largest `Σ_{Δ_k} v² σ² a²_{p_k}` over bands (must stay below 1).
    pub max_ellipsoid_sum: f64,
}

pub fn lower_bound_diagnostic(
    eps: f64,
    p_min: f64,
    p_max: f64,
    d: f64,
    radius_scale: f64,
    seed: u64,
) -> Result<LowerBoundReport> {
    let grid = build_prior_grid(p_min, p_max, eps, d, radius_scale, seed)?;
    Ok(lower_bound_from_grid(&grid))
}

pub fn lower_bound_from_grid(grid: &PriorGrid) -> LowerBoundReport {
    let eps_sq = grid.eps * grid.eps;
    let mut band_terms = Vec::with_capacity(grid.priors.len());
    let mut max_ell: f64 = 0.0;
    for spec in &grid.priors {
        let params = ModelParams::normalized(spec.p_k);
        let mut s = 0.0;
        let mut ell = 0.0;
        for &nu in &spec.delta_band {
            let s2 = sigma_sq(nu, &params);
            s += (spec.z_sq * s2 / (2.0 * eps_sq)).sinh().powi(2);
            let a = crate::lattice::ellipsoid_coeff(nu, &params);
            ell += spec.z_sq * s2 * s2 * a * a;
        }
        max_ell = max_ell.max(ell);
        band_terms.push((spec.k, (2.0 * s).exp_m1()));
    }
    let k2 = (grid.k * grid.k) as f64;
    LowerBoundReport {
        eps: grid.eps,
        d: grid.d,
        radius_scale: grid.radius_scale,
        k: grid.k,
        bound: band_terms.iter().map(|(_, v)| v).sum::<f64>() / k2,
        band_terms,
        max_ellipsoid_sum: max_ell,
    }
}

/// Exact `I, J0, J1, J2` beside their leading-order forms for each `(p, A)`.
///
/// The `J0` column is `J1 − J2` as printed.
pub fn asymptotics_table(
    p_list: &[f64],
    a_list: &[f64],
    normalized: bool,
    l_scale: f64,
    prov: Provenance,
) -> Result<Table> {
    let mut t = Table::new(
        prov,
        &[
            "p", "A", "I", "I_lead", "I_ratio", "J1", "J1_lead", "J1_ratio", "J2", "J2_lead", "J2_ratio", "J0",
            "J0_lead", "J0_ratio",
        ],
    );
    for &p in p_list {
        let params = ModelParams::new(p, l_scale, normalized)?;
        for &a in a_list {
            let i = i_of_a(a, &params)?;
            let s = j_sums(a, &params)?;
            let lead = leading_order(a, &params);
            let j0 = s.j1 - s.j2;
            t.push(vec![
                p,
                a,
                i,
                lead.i,
                i / lead.i,
                s.j1,
                lead.j1,
                s.j1 / lead.j1,
                s.j2,
                lead.j2,
                s.j2 / lead.j2,
                j0,
                lead.j0,
                j0 / lead.j0,
            ])?;
        }
    }
    Ok(t)
}

#[derive(Clone, Debug, Serialize)]
pub struct SvdReport {
    /// `(ν, b_ν, residual)` in lattice order.
    pub residuals: Vec<(Index, f64, f64)>,
    pub gram_phi: f64,
    pub gram_psi: f64,
}

impl SvdReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().map(|r| r.2).fold(0.0, f64::max)
    }

    pub fn table(&self, prov: Provenance) -> Result<Table> {
        let prov = prov
            .with_num("gram_phi_deviation", self.gram_phi)
            .with_num("gram_psi_deviation", self.gram_psi);
        let mut t = Table::new(prov, &["j", "l", "b_nu", "residual"]);
        for &(nu, b, res) in &self.residuals {
            t.push(vec![f64::from(nu.j), f64::from(nu.l), b, res])?;
        }
        Ok(t)
    }
}

/// SVD residuals for `j + l <= max_degree` and Gram deviations of both bases.
pub fn svd_verify(max_degree: u32, q: &QuadratureSpec) -> Result<SvdReport> {
    let residuals = Index::up_to_degree(max_degree)
        .into_par_iter()
        .map(|nu| Ok((nu, singular_value(nu), svd_residual(nu, q)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SvdReport {
        residuals,
        gram_phi: gram_deviation_phi(max_degree, q)?,
        gram_psi: gram_deviation_psi(max_degree, q)?,
    })
}

/// Null moments of a chi-square statistic.
#[derive(Clone, Debug, Serialize)]
pub struct NullReport {
    pub n_trials: u64,
    pub w_max: f64,
    pub mean: f64,
    pub mean_std_err: f64,
    pub variance: f64,
    /// `(H, empirical P(t > H), 1 − Φ(H))`.
    pub tail_rates: Vec<(f64, ErrorEstimate, f64)>,
    pub h: f64,
    /// Empirical `E exp(h t)`.
    pub exp_moment: f64,
    /// `exp(h²/2)`.
    pub exp_moment_limit: f64,
    /// `Π_ν e^{-h w}/√(1 − 2 h w)`, the exact value.
    pub exp_moment_exact: f64,
}

/// Null trials of the chi-square statistic with `weights`.
pub fn null_calibration(
    weights: &SequenceVector,
    eps: f64,
    n_trials: u64,
    master_seed: u64,
    h: f64,
) -> Result<NullReport> {
    if n_trials < MIN_TRIALS {
        return Err(Error::InvalidSpec(format!("need at least {MIN_TRIALS} trials")));
    }
    let w_max = weights.values().fold(0.0, f64::max);
    if !(2.0 * h * w_max < 1.0) {
        return Err(Error::Domain(format!(
            "exponential moment needs 2 h w_max < 1 (h = {h}, w_max = {w_max})"
        )));
    }
    let stats =
        StatisticDesign::single(weights).simulate_max(&SequenceVector::new(), eps, master_seed, STREAM_NULL, n_trials);
    let n = n_trials as f64;
    let mean = stats.iter().sum::<f64>() / n;
    let variance = stats.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let tail_rates = [1.0, np_threshold(0.05)?, 2.0]
        .iter()
        .map(|&hh| (hh, rejection_rate(&stats, hh), 1.0 - crate::detect::normal_cdf(hh)))
        .collect();
    let exp_moment = stats.iter().map(|t| (h * t).exp()).sum::<f64>() / n;
    let log_exact: f64 = weights.values().map(|w| -h * w - 0.5 * (1.0 - 2.0 * h * w).ln()).sum();
    Ok(NullReport {
        n_trials,
        w_max,
        mean,
        mean_std_err: (variance / n).sqrt(),
        variance,
        tail_rates,
        h,
        exp_moment,
        exp_moment_limit: (0.5 * h * h).exp(),
        exp_moment_exact: log_exact.exp(),
    })
}
