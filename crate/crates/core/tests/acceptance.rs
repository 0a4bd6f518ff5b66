//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Tolerances are fixed here. A criterion listed in `KNOWN_RED` still prints
//! FAIL but does not fail the process; any other failure does.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use tomodetect_core::detect::{normal_cdf, np_threshold, predicted_beta, predicted_gamma};
use tomodetect_core::experiment::{
    adaptive_power_experiment, calibrate_d_scale, lower_bound_diagnostic, null_calibration, rate_sweep,
    sharp_asymptotics_experiment, svd_verify, tune_eps_for_u, ExperimentSpec, Mode,
};
use tomodetect_core::extreme::{asymptotic_multiplier, i_of_a, j_sums, leading_order, solve_extreme};
use tomodetect_core::{ModelParams, QuadratureSpec};

const SEED: u64 = 20_240_611;

/// Criteria whose failure is analysed and accepted; they still print FAIL.
const KNOWN_RED: &[&str] = &["AC3"];

const SVD_TOL: f64 = 1e-6;
const RATIO_TOL: f64 = 0.05;
const RESIDUAL_TOL: f64 = 1e-10;
const MULTIPLIER_TOL: f64 = 0.10;
const WEIGHT_NORM_TOL: f64 = 1e-12;
const RESCALE_TOL: f64 = 1e-10;
const PROB_TOL: f64 = 0.05;
const GAMMA4_TOL: f64 = 0.03;
const SLOPE_TOL: f64 = 0.05;
const LOWER_BOUND_MAX: f64 = 0.1;
const VAR_TOL: f64 = 0.05;
const EXP_MOMENT_TOL: f64 = 0.10;

type Criterion = (&'static str, fn() -> Outcome, Duration);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn spec(params: ModelParams, eps: f64, r: f64, n_trials: u64, mode: Mode) -> ExperimentSpec {
    ExperimentSpec {
        params,
        eps,
        r,
        alpha: Some(0.05),
        n_trials,
        master_seed: SEED,
        mode,
    }
}

fn ac1() -> Outcome {
    let q = QuadratureSpec::uniform(64).expect("valid grid");
    let rep = svd_verify(6, &q).expect("svd verification");
    let worst = rep.max_residual();
    outcome(
        worst <= SVD_TOL && rep.gram_phi <= SVD_TOL && rep.gram_psi <= SVD_TOL,
        format!(
            "SVD identity, j+l<=6: max residual {worst:.2e}, Gram deviation phi {:.2e}, psi {:.2e} (tol {SVD_TOL:e})",
            rep.gram_phi, rep.gram_psi
        ),
    )
}

fn ac2() -> Outcome {
    let exact = i_of_a(0.01, &ModelParams::normalized(1.0)).expect("enumeration");
    let mut brute = 0u64;
    for m in 1..=200u64 {
        for n in 1..=200u64 {
            if (m * n) * (m * n) <= 100 {
                brute += (m + n - 1) * (m + n - 1);
            }
        }
    }
    outcome(
        exact == 957.0 && brute == 957,
        format!("I(0.01), p=1 normalized: enumeration {exact}, brute-force double loop {brute}, expected 957"),
    )
}

fn ac3() -> Outcome {
    let params = ModelParams::normalized(1.0);
    let grid = [1e-3, 1e-4, 1e-5, 1e-6];
    let mut ratios = [[0.0; 4]; 4];
    for (c, &a) in grid.iter().enumerate() {
        let lead = leading_order(a, &params);
        let s = j_sums(a, &params).expect("J sums");
        let i = i_of_a(a, &params).expect("I(A)");
        ratios[0][c] = i / lead.i;
        ratios[1][c] = s.j1 / lead.j1;
        ratios[2][c] = s.j2 / lead.j2;
        ratios[3][c] = s.j0 / lead.j0;
    }
    let names = ["I", "J1", "J2", "J0"];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, r) in names.iter().zip(&ratios) {
        let within = (r[3] - 1.0).abs() <= RATIO_TOL;
        let monotone = r.windows(2).all(|w| (w[1] - 1.0).abs() <= (w[0] - 1.0).abs());
        pass &= within && monotone;
        parts.push(format!(
            "{name} [{:.4} {:.4} {:.4} {:.4}]{}{}",
            r[0],
            r[1],
            r[2],
            r[3],
            if within { "" } else { " outside 5% at 1e-6" },
            if monotone { "" } else { " NOT monotone" }
        ));
    }
    outcome(
        pass,
        format!("exact/leading ratios over A=1e-3..1e-6: {}", parts.join("; ")),
    )
}

fn ac4() -> Outcome {
    let params = ModelParams::normalized(1.0);
    let r = 1e-3;
    let sol = solve_extreme(r, r.powf(7.0 / 4.0), &params).expect("solve");
    let a_ratio = sol.multiplier / asymptotic_multiplier(r, 1.0);
    let sw: f64 = sol.weights.values().map(|w| w * w).sum();

    // physical units with L = 2: ũ(r) = (C D)^{-2} u(C r), C = 1/L, D = 1/π
    let l_scale = 2.0;
    let (r_phys, eps) = (0.02, 1e-3);
    let phys = solve_extreme(r_phys, eps, &ModelParams::physical(1.0, l_scale)).expect("physical solve");
    let norm = solve_extreme(r_phys / l_scale, eps, &params).expect("normalized solve");
    let cd = 1.0 / (l_scale * std::f64::consts::PI);
    let rescaled = norm.u_eps / (cd * cd);
    let rescale_err = (phys.u_eps / rescaled - 1.0).abs();

    let pass = sol.residuals.max() <= RESIDUAL_TOL
        && (a_ratio - 1.0).abs() <= MULTIPLIER_TOL
        && (sw - 0.5).abs() <= WEIGHT_NORM_TOL
        && rescale_err <= RESCALE_TOL;
    outcome(
        pass,
        format!(
            "r=1e-3, p=1: residuals {:.1e}/{:.1e}, A/(3r^2/7) = {a_ratio:.5}, |sum w^2 - 1/2| = {:.1e}, \
             rescaling rel. error {rescale_err:.1e}",
            sol.residuals.ball,
            sol.residuals.ellipsoid,
            (sw - 0.5).abs()
        ),
    )
}

fn ac5() -> Outcome {
    let params = ModelParams::normalized(1.0);
    let r = 0.002;
    let mut pass = true;
    let mut parts = Vec::new();
    for &(u, gamma_tol) in &[(2.0, PROB_TOL), (4.0, GAMMA4_TOL)] {
        let eps = tune_eps_for_u(r, u, &params).expect("tune eps");
        let rep = sharp_asymptotics_experiment(&spec(params, eps, r, 10_000, Mode::SharpAsymptotics)).expect("run");
        let gamma_ok = (rep.gamma - predicted_gamma(u)).abs() <= gamma_tol;
        let mut ok = gamma_ok && rep.w0 <= 0.05 && (rep.u_eps - u).abs() <= 1e-9;
        let mut part = format!(
            "u={:.3} w0={:.4}: gamma {:.4} vs {:.4}",
            rep.u_eps,
            rep.w0,
            rep.gamma,
            predicted_gamma(u)
        );
        if u == 2.0 {
            let beta_pred = predicted_beta(0.05, u).expect("prediction");
            ok &= (rep.beta_np.rate - beta_pred).abs() <= PROB_TOL;
            part.push_str(&format!(", beta(0.05) {:.4} vs {:.4}", rep.beta_np.rate, beta_pred));
        }
        pass &= ok;
        parts.push(part);
    }
    outcome(pass, format!("sharp asymptotics, 1e4 trials: {}", parts.join("; ")))
}

fn ac6() -> Outcome {
    let params = ModelParams::normalized(1.0);
    let sweep = rate_sweep(
        &spec(params, 1e-3, 1.0, 10_000, Mode::RateSweep),
        &[0.2, 0.5, 1.0, 2.0, 5.0],
    )
    .expect("rate sweep");
    let first = &sweep.rows[0];
    let last = sweep.rows.last().expect("rows");
    let target = 3.5;
    let pass = first.gamma >= 0.8 && last.gamma <= 0.1 && (sweep.slope / target - 1.0).abs() <= SLOPE_TOL;
    let gammas: Vec<String> = sweep.rows.iter().map(|r| format!("{:.3}", r.gamma)).collect();
    outcome(
        pass,
        format!(
            "eps=1e-3, r*={:.5}: gamma over c=[0.2..5] = [{}], log-log slope {:.4} vs {target}",
            sweep.r_star,
            gammas.join(" "),
            sweep.slope
        ),
    )
}

fn ac7() -> Outcome {
    let eps = 1e-3;
    let p_trues = [0.6, 1.0, 1.8];
    let cal = calibrate_d_scale(0.5, 2.0, eps, &p_trues, 1.0, 8.0).expect("calibration");
    let base = spec(ModelParams::normalized(1.0), eps, 1.0, 10_000, Mode::AdaptivePower);
    let mut pass = true;
    let mut parts = Vec::new();
    let mut alpha_line = String::new();
    for &pt in &p_trues {
        let rep = adaptive_power_experiment(&base, 0.5, 2.0, cal.d_scale, pt).expect("adaptive run");
        let bound = 2.0 / rep.k as f64;
        pass &= rep.alpha.rate <= bound && rep.beta.rate <= 0.1;
        alpha_line = format!("alpha {:.4} (bound 2/K = {bound:.4}, K={})", rep.alpha.rate, rep.k);
        parts.push(format!(
            "p={pt}: beta {:.4}, max E t_k {:.2}",
            rep.beta.rate,
            rep.max_mean()
        ));
    }
    outcome(
        pass,
        format!(
            "adaptive test on [0.5, 2], eps=1e-3, D={:.3} (2H={:.3}): {alpha_line}; {}",
            cal.d_scale,
            2.0 * cal.h_eps,
            parts.join("; ")
        ),
    )
}

fn ac8() -> Outcome {
    let eps = 1e-3;
    let d = 1e-4;
    let scales = [1.0, 1.25, 1.5, 2.0, 3.0, 5.0, 10.0];
    let bounds: Vec<f64> = scales
        .iter()
        .map(|&s| {
            lower_bound_diagnostic(eps, 0.5, 2.0, d, s, SEED)
                .expect("diagnostic")
                .bound
        })
        .collect();
    let monotone = bounds.windows(2).all(|w| w[1] >= w[0]);
    let pass = bounds[0] <= LOWER_BOUND_MAX && monotone;
    let shown: Vec<String> = bounds.iter().map(|b| format!("{b:.3e}")).collect();
    outcome(
        pass,
        format!(
            "second-moment bound, eps=1e-3, d=1e-4, radius scale {scales:?}: [{}]{}",
            shown.join(" "),
            if monotone { "" } else { " NOT monotone" }
        ),
    )
}

fn ac9() -> Outcome {
    let params = ModelParams::normalized(1.0);
    let r = 0.002;
    let eps = tune_eps_for_u(r, 2.0, &params).expect("tune eps");
    let sol = solve_extreme(r, eps, &params).expect("solve");
    let h = 1.0;
    let rep = null_calibration(&sol.weights, eps, 100_000, SEED, h).expect("null run");
    let mean_ok = rep.mean.abs() <= 3.0 * rep.mean_std_err;
    let var_ok = (rep.variance - 1.0).abs() <= VAR_TOL;
    let exp_ok = h * rep.w_max <= 0.05 && (rep.exp_moment / rep.exp_moment_limit - 1.0).abs() <= EXP_MOMENT_TOL;
    let tails: Vec<String> = rep
        .tail_rates
        .iter()
        .map(|(hh, e, pred)| format!("P(t>{hh:.3}) {:.4}/{pred:.4}", e.rate))
        .collect();
    let tails_ok = rep.tail_rates.iter().all(|(_, e, pred)| (e.rate - pred).abs() <= 0.02);
    outcome(
        mean_ok && var_ok && exp_ok && tails_ok,
        format!(
            "null, 1e5 trials, w_max={:.4}: mean {:.4} (3 SE = {:.4}), variance {:.4}, E exp(h t) {:.4} vs exp(h^2/2) {:.4} \
             (exact {:.4}); {}",
            rep.w_max,
            rep.mean,
            3.0 * rep.mean_std_err,
            rep.variance,
            rep.exp_moment,
            rep.exp_moment_limit,
            rep.exp_moment_exact,
            tails.join(", ")
        ),
    )
}

fn main() -> ExitCode {
    // sanity of the Gaussian helpers the criteria rely on
    assert!((normal_cdf(np_threshold(0.05).expect("quantile")) - 0.95).abs() < 1e-12);

    let criteria: [Criterion; 9] = [
        ("AC1", ac1, Duration::from_secs(60)),
        ("AC2", ac2, Duration::from_secs(1)),
        ("AC3", ac3, Duration::from_secs(10)),
        ("AC4", ac4, Duration::from_secs(60)),
        ("AC5", ac5, Duration::from_secs(300)),
        ("AC6", ac6, Duration::from_secs(600)),
        ("AC7", ac7, Duration::from_secs(600)),
        ("AC8", ac8, Duration::from_secs(60)),
        ("AC9", ac9, Duration::from_secs(600)),
    ];
    let mut unexpected = 0;
    for (name, run, budget) in criteria {
        let start = Instant::now();
        let out = run();
        let elapsed = start.elapsed();
        let pass = out.pass && elapsed <= budget;
        let status = if pass { "PASS" } else { "FAIL" };
        let note = if !pass && KNOWN_RED.contains(&name) {
            " [known red]"
        } else {
            ""
        };
        println!(
            "{name} {status}{note} :: {} [{:.2} s, budget {} s]",
            out.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
        if !pass && !KNOWN_RED.contains(&name) {
            unexpected += 1;
        }
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{unexpected} criterion/criteria failed");
        ExitCode::FAILURE
    }
}
