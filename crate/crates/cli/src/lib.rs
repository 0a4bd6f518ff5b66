//! Command-line surface: flag and config-file resolution, and one table per subcommand.

pub mod config;

use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use tomodetect_core::experiment::{
    adaptive_power_experiment, asymptotics_table, calibrate_d_scale, lower_bound_diagnostic, null_calibration,
    rate_sweep, sharp_asymptotics_experiment, sharp_table, svd_verify, tune_eps_for_u, ADAPTIVE_COLUMNS,
};
use tomodetect_core::extreme::{asymptotic_u, solve_extreme};
use tomodetect_core::lattice::{ellipsoid_coeff, sigma_sq};
use tomodetect_core::{ExperimentSpec, Format, Mode, ModelParams, Provenance, QuadratureSpec, Table};

use crate::config::ConfigFile;

#[derive(Debug, Parser)]
#[command(name = "tomodetect", version, about = "Minimax detection from noisy Radon data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Solve the extreme problem at (r, eps).
    Solve,
    /// Exact lattice sums beside their leading-order forms.
    Asymptotics,
    /// Monte Carlo error probabilities of the chi-square test.
    Simulate,
    /// Total error across radii r = c * eps^(4p/(4p+3)).
    RateSweep,
    /// Power of the adaptive test over a smoothness range.
    Adaptive,
    /// Second-moment bound for the lower-bound priors.
    LowerBound,
    /// Numerical check of the Radon singular value decomposition.
    SvdVerify,
}

/// Every flag is optional; unset flags fall back to the config file, then to defaults.
#[derive(Debug, Default, Args)]
pub struct Flags {
    /// Smoothness index p > 0.
    #[arg(long, global = true)]
    pub p: Option<f64>,
    /// Ellipsoid scale L > 0.
    #[arg(long = "L", global = true)]
    pub l_scale: Option<f64>,
    /// Noise level eps > 0.
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    /// Separation radius r > 0.
    #[arg(long, global = true)]
    pub r: Option<f64>,
    /// Test level alpha in (0, 1).
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Monte Carlo trials per error estimate.
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Use normalized units (D = C = 1).
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub normalized: Option<bool>,
    /// Output path (stdout if unset).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output format: csv or json.
    #[arg(long, global = true)]
    pub format: Option<String>,
    /// Flat key = value file with the same keys as the flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Tune eps so that u_eps equals this value (simulate, solve).
    #[arg(long, global = true)]
    pub target_u: Option<f64>,
    /// Rate constants c for rate-sweep.
    #[arg(long, global = true, value_delimiter = ',')]
    pub c_values: Option<Vec<f64>>,
    /// Smoothness values for asymptotics (defaults to --p).
    #[arg(long, global = true, value_delimiter = ',')]
    pub p_values: Option<Vec<f64>>,
    /// Multipliers A for asymptotics.
    #[arg(long, global = true, value_delimiter = ',')]
    pub a_values: Option<Vec<f64>>,
    /// Lower end of the smoothness range.
    #[arg(long, global = true)]
    pub p_min: Option<f64>,
    /// Upper end of the smoothness range.
    #[arg(long, global = true)]
    pub p_max: Option<f64>,
    /// True smoothness values for the adaptive experiment.
    #[arg(long, global = true, value_delimiter = ',')]
    pub p_true: Option<Vec<f64>>,
    /// Adaptive rate constant D (calibrated if unset).
    #[arg(long, global = true)]
    pub d_scale: Option<f64>,
    /// Lower-bound radius constant d.
    #[arg(long, global = true)]
    pub d: Option<f64>,
    /// Multipliers applied to the lower-bound radii.
    #[arg(long, global = true, value_delimiter = ',')]
    pub radius_scale: Option<Vec<f64>>,
    /// Largest degree j + l for svd-verify.
    #[arg(long, global = true)]
    pub max_degree: Option<u32>,
    /// Quadrature nodes per direction for svd-verify.
    #[arg(long, global = true)]
    pub n_quad: Option<usize>,
    /// Run null trials only (simulate).
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub null: Option<bool>,
    /// Exponential-moment parameter for null trials.
    #[arg(long, global = true)]
    pub h: Option<f64>,
    /// Emit the extreme sequence itself (solve).
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub sequence: Option<bool>,
}

/// Fully resolved settings; their JSON is hashed into the provenance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Settings {
    pub command: Command,
    pub p: f64,
    #[serde(rename = "L")]
    pub l_scale: f64,
    pub eps: f64,
    pub r: f64,
    pub alpha: f64,
    pub trials: u64,
    pub seed: u64,
    pub normalized: bool,
    pub target_u: Option<f64>,
    pub c_values: Vec<f64>,
    pub p_values: Vec<f64>,
    pub a_values: Vec<f64>,
    pub p_min: f64,
    pub p_max: f64,
    pub p_true: Vec<f64>,
    pub d_scale: Option<f64>,
    pub d: f64,
    pub radius_scale: Vec<f64>,
    pub max_degree: u32,
    pub n_quad: usize,
    pub null: bool,
    pub h: f64,
    pub sequence: bool,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub format: Format,
}

impl Settings {
    pub fn resolve(command: Command, flags: &Flags) -> Result<Self> {
        let file = match &flags.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        let format = match flags.format.clone().or(file.get("format").map(str::to_string)) {
            Some(f) => f.parse::<Format>()?,
            None => Format::Csv,
        };
        let p = pick(flags.p, file.value("p")?, 1.0);
        Ok(Self {
            command,
            p,
            l_scale: pick(flags.l_scale, file.value("L")?, 1.0),
            eps: pick(flags.eps, file.value("eps")?, 0.01),
            r: pick(flags.r, file.value("r")?, 0.05),
            alpha: pick(flags.alpha, file.value("alpha")?, 0.05),
            trials: pick(flags.trials, file.value("trials")?, 10_000),
            seed: pick(flags.seed, file.value("seed")?, 1),
            normalized: pick(flags.normalized, file.value("normalized")?, false),
            target_u: flags.target_u.or(file.value("target-u")?),
            c_values: pick(
                flags.c_values.clone(),
                file.list("c-values")?,
                vec![0.2, 0.5, 1.0, 2.0, 5.0],
            ),
            p_values: pick(flags.p_values.clone(), file.list("p-values")?, vec![p]),
            a_values: pick(
                flags.a_values.clone(),
                file.list("a-values")?,
                vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6],
            ),
            p_min: pick(flags.p_min, file.value("p-min")?, 0.5),
            p_max: pick(flags.p_max, file.value("p-max")?, 2.0),
            p_true: pick(flags.p_true.clone(), file.list("p-true")?, vec![0.6, 1.0, 1.8]),
            d_scale: flags.d_scale.or(file.value("d-scale")?),
            d: pick(flags.d, file.value("d")?, 1e-4),
            radius_scale: pick(flags.radius_scale.clone(), file.list("radius-scale")?, vec![1.0]),
            max_degree: pick(flags.max_degree, file.value("max-degree")?, 6),
            n_quad: pick(flags.n_quad, file.value("n-quad")?, 64),
            null: pick(flags.null, file.value("null")?, false),
            h: pick(flags.h, file.value("h")?, 1.0),
            sequence: pick(flags.sequence, file.value("sequence")?, false),
            out: flags.out.clone().or(file.get("out").map(PathBuf::from)),
            format,
        })
    }

    pub fn params(&self) -> Result<ModelParams> {
        Ok(ModelParams::new(self.p, self.l_scale, self.normalized)?)
    }

    fn provenance(&self) -> Result<Provenance> {
        let command = serde_json::to_value(self.command)?;
        Ok(Provenance::new(self, Some(self.seed))?.with("command", command.as_str().unwrap_or_default()))
    }

    fn spec(&self, eps: f64, mode: Mode) -> Result<ExperimentSpec> {
        Ok(ExperimentSpec {
            params: self.params()?,
            eps,
            r: self.r,
            alpha: Some(self.alpha),
            n_trials: self.trials,
            master_seed: self.seed,
            mode,
        })
    }

    /// `eps`, or the noise level giving `u_eps = target_u` at radius `r`.
    fn effective_eps(&self) -> Result<f64> {
        match self.target_u {
            Some(u) => Ok(tune_eps_for_u(self.r, u, &self.params()?)?),
            None => Ok(self.eps),
        }
    }
}

fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// Replaces the table's provenance header with the run's, keeping its extra records.
fn stamp(mut table: Table, settings: &Settings) -> Result<Table> {
    let mut prov = settings.provenance()?;
    prov.extra.append(&mut table.provenance.extra);
    table.provenance = prov;
    Ok(table)
}

pub fn run(settings: &Settings) -> Result<Table> {
    let table = match settings.command {
        Command::Solve => solve(settings)?,
        Command::Asymptotics => asymptotics_table(
            &settings.p_values,
            &settings.a_values,
            settings.normalized,
            settings.l_scale,
            Provenance::default(),
        )?,
        Command::Simulate if settings.null => simulate_null(settings)?,
        Command::Simulate => {
            let spec = settings.spec(settings.effective_eps()?, Mode::SharpAsymptotics)?;
            let report = sharp_asymptotics_experiment(&spec)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            sharp_table(&report, &spec)?
        }
        Command::RateSweep => {
            let spec = settings.spec(settings.eps, Mode::RateSweep)?;
            rate_sweep(&spec, &settings.c_values)?.table(&spec)?
        }
        Command::Adaptive => adaptive(settings)?,
        Command::LowerBound => lower_bound(settings)?,
        Command::SvdVerify => {
            let q = QuadratureSpec::uniform(settings.n_quad)?;
            svd_verify(settings.max_degree, &q)?.table(Provenance::default())?
        }
    };
    stamp(table, settings)
}

fn solve(settings: &Settings) -> Result<Table> {
    let params = settings.params()?;
    let eps = settings.effective_eps()?;
    let sol = solve_extreme(settings.r, eps, &params)?;
    if settings.sequence {
        let prov = Provenance::default()
            .with_num("multiplier", sol.multiplier)
            .with_num("z0_sq", sol.z0_sq)
            .with_num("u_eps", sol.u_eps);
        let mut t = Table::new(prov, &["j", "l", "sigma_sq", "a", "eta_sq", "weight"]);
        for (nu, e) in sol.eta_sq.iter() {
            t.push(vec![
                f64::from(nu.j),
                f64::from(nu.l),
                sigma_sq(nu, &params),
                ellipsoid_coeff(nu, &params),
                e,
                sol.weights.get(nu),
            ])?;
        }
        return Ok(t);
    }
    let mut t = Table::new(
        Provenance::default(),
        &[
            "p",
            "L",
            "normalized",
            "r",
            "eps",
            "multiplier",
            "z0_sq",
            "u_eps",
            "u_asym",
            "w0",
            "support_size",
            "j0",
            "j1",
            "j2",
            "ball_residual",
            "ellipsoid_residual",
        ],
    );
    t.push(vec![
        params.p,
        params.l_scale,
        if params.normalized { 1.0 } else { 0.0 },
        sol.r,
        sol.eps,
        sol.multiplier,
        sol.z0_sq,
        sol.u_eps,
        asymptotic_u(sol.r, sol.eps, &params),
        sol.w0,
        sol.support.len() as f64,
        sol.j0,
        sol.j1,
        sol.j2,
        sol.residuals.ball,
        sol.residuals.ellipsoid,
    ])?;
    Ok(t)
}

fn simulate_null(settings: &Settings) -> Result<Table> {
    let eps = settings.effective_eps()?;
    let sol = solve_extreme(settings.r, eps, &settings.params()?)?;
    let rep = null_calibration(&sol.weights, eps, settings.trials, settings.seed, settings.h)?;
    let prov = Provenance::default()
        .with_num("u_eps", sol.u_eps)
        .with_num("w_max", rep.w_max)
        .with_num("mean", rep.mean)
        .with_num("mean_se", rep.mean_std_err)
        .with_num("variance", rep.variance)
        .with_num("h", rep.h)
        .with_num("exp_moment", rep.exp_moment)
        .with_num("exp_moment_limit", rep.exp_moment_limit)
        .with_num("exp_moment_exact", rep.exp_moment_exact);
    let mut t = Table::new(prov, &["threshold", "rate", "rate_se", "gaussian_tail", "n_trials"]);
    for (h, e, pred) in &rep.tail_rates {
        t.push(vec![*h, e.rate, e.std_err, *pred, e.n_trials as f64])?;
    }
    Ok(t)
}

fn adaptive(settings: &Settings) -> Result<Table> {
    let eps = settings.eps;
    let mut prov = Provenance::default();
    let d_scale = match settings.d_scale {
        Some(d) => d,
        None => {
            let cal = calibrate_d_scale(settings.p_min, settings.p_max, eps, &settings.p_true, 1.0, 16.0)?;
            prov = prov.with_num("d_scale_calibrated", cal.d_scale);
            cal.d_scale
        }
    };
    let spec = settings.spec(eps, Mode::AdaptivePower)?;
    let mut t = Table::new(prov, &ADAPTIVE_COLUMNS);
    for &pt in &settings.p_true {
        let rep = adaptive_power_experiment(&spec, settings.p_min, settings.p_max, d_scale, pt)?;
        t.push(rep.row())?;
    }
    Ok(t)
}

fn lower_bound(settings: &Settings) -> Result<Table> {
    let mut t = Table::new(
        Provenance::default(),
        &["radius_scale", "k", "bands", "bound", "max_ellipsoid_sum"],
    );
    for &s in &settings.radius_scale {
        let rep = lower_bound_diagnostic(
            settings.eps,
            settings.p_min,
            settings.p_max,
            settings.d,
            s,
            settings.seed,
        )?;
        t.push(vec![
            s,
            rep.k as f64,
            rep.band_terms.len() as f64,
            rep.bound,
            rep.max_ellipsoid_sum,
        ])?;
    }
    Ok(t)
}

/// Writes `table` to `settings.out`, or to stdout.
pub fn emit(table: &Table, settings: &Settings) -> Result<()> {
    match &settings.out {
        Some(path) => {
            let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            let mut w = std::io::BufWriter::new(file);
            table.write(&mut w, settings.format)?;
            w.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            table.write(&mut w, settings.format)?;
        }
    }
    Ok(())
}

pub fn main_with(cli: Cli) -> Result<()> {
    let settings = Settings::resolve(cli.command, &cli.flags)?;
    if settings.trials == 0 {
        bail!("--trials must be positive");
    }
    let table = run(&settings)?;
    emit(&table, &settings)
}
