//! Shared fixtures for the benchmarks.

use tomodetect_core::extreme::solve_extreme;
use tomodetect_core::{ExtremeSolution, ModelParams};

/// Extreme solution at `u_eps = 2` in normalized units for smoothness `p`,
/// with support size growing as `r` shrinks.
pub fn extreme_fixture(p: f64, r: f64) -> ExtremeSolution {
    let params = ModelParams::normalized(p);
    let sol = solve_extreme(r, 1.0, &params).expect("feasible radius");
    let eps = tomodetect_core::extreme::eps_for_target_u(&sol, 2.0).expect("positive u");
    sol.with_eps(eps)
}
