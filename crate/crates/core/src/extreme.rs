//! The extreme problem: minimise `Σ η_ν⁴` over the ellipsoid-minus-ball
//! alternative set, its water-filling solution, and the leading-order
//! closed forms of its value.
//!
//! The solution has the form `η̃_ν² = z0² σ_ν² (1 − A a_ν²)₊` where the
//! multiplier `A` solves `r² = A·J1(A)/J2(A)`. Because `a_ν` depends on `ν`
//! only through the product `P = (j+1)(l+1)`, the support for a given `A` is
//! always `{ν : P ≤ k}` for some `k`, and on each such piece `A·J1/J2` is a
//! Möbius function of `A`. The solver walks the pieces in order of
//! increasing `k` and solves the matching piece in closed form.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{ellipsoid_coeff, for_each_product_pair, product_bound, sigma_sq, Index, ModelParams};
use crate::seqmodel::SequenceVector;

/// Apéry's constant to double precision, used by the leading-order oracles.
pub const APERY: f64 = 1.202_056_903_159_594_3;

/// Largest lattice product the solver is willing to enumerate.
const MAX_PRODUCT: u64 = 400_000_000;

/// The three water-filling sums.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JSums {
    pub j0: f64,
    pub j1: f64,
    pub j2: f64,
}

/// Relative residuals of the two active constraints.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConstraintResiduals {
    /// `|Σ σ² η̃² / r² − 1|`
    pub ball: f64,
    /// `|Σ a² σ² η̃² − 1|`
    pub ellipsoid: f64,
}

impl ConstraintResiduals {
    pub fn max(&self) -> f64 {
        self.ball.max(self.ellipsoid)
    }
}

/// Solved extreme problem at one `(r, ε, params)`.
#[derive(Clone, Debug)]
pub struct ExtremeSolution {
    /// Lagrange truncation parameter `A`.
    pub multiplier: f64,
    pub z0_sq: f64,
    /// Value `u_ε` of the extreme problem.
    pub u_eps: f64,
    pub r: f64,
    pub eps: f64,
    pub params: ModelParams,
    /// Indices with `A a_ν² < 1`, in lattice order.
    pub support: Vec<Index>,
    pub eta_sq: SequenceVector,
    pub weights: SequenceVector,
    pub w0: f64,
    pub j0: f64,
    pub j1: f64,
    pub j2: f64,
    pub residuals: ConstraintResiduals,
}

struct SupportTerm {
    nu: Index,
    s2: f64,
    a2: f64,
    x: f64,
}

fn check_multiplier(a_mult: f64) -> Result<()> {
    if !(a_mult > 0.0 && a_mult.is_finite()) {
        return Err(Error::Domain(format!("multiplier A must be > 0, got {a_mult}")));
    }
    Ok(())
}

/// Product bound for `{ν : A a_ν² <= 1}` with a small margin.
fn support_product_bound(a_mult: f64, params: &ModelParams) -> Result<u64> {
    let c = (1.0 / a_mult).sqrt() * (1.0 + 1e-12);
    let base = (c / params.coeff_scale()).powf(1.0 / params.p);
    if base > MAX_PRODUCT as f64 {
        return Err(Error::Domain(format!(
            "support at A = {a_mult} reaches products ~{base:.3e}; too large to enumerate"
        )));
    }
    Ok(product_bound(c, params))
}

fn support_terms(a_mult: f64, params: &ModelParams) -> Result<Vec<SupportTerm>> {
    let mut out = Vec::new();
    for_each_product_pair(support_product_bound(a_mult, params)?, |m, n| {
        let nu = Index::new((m - 1) as u32, (n - 1) as u32);
        let a = ellipsoid_coeff(nu, params);
        let a2 = a * a;
        if a_mult * a2 < 1.0 {
            out.push(SupportTerm {
                nu,
                s2: sigma_sq(nu, params),
                a2,
                x: 1.0 - a_mult * a2,
            });
        }
    });
    out.sort_unstable_by_key(|t| t.nu);
    Ok(out)
}

fn sums_of(terms: &[SupportTerm], a_mult: f64) -> JSums {
    let (mut j0, mut j1, mut s2) = (0.0, 0.0, 0.0);
    for t in terms {
        let s4 = t.s2 * t.s2;
        j1 += s4 * t.x;
        s2 += t.a2 * s4 * t.x;
        // J1 − J2 = Σ σ⁴ (1 − A a²)², summed directly to avoid cancellation
        j0 += s4 * t.x * t.x;
    }
    let j2 = a_mult * s2;
    debug_assert!((j0 - (j1 - j2)).abs() <= 1e-9 * j1.max(f64::MIN_POSITIVE));
    JSums { j0, j1, j2 }
}

/// `J0, J1, J2` at multiplier `A`, summed over the strict support `A a_ν² < 1`.
pub fn j_sums(a_mult: f64, params: &ModelParams) -> Result<JSums> {
    check_multiplier(a_mult)?;
    let terms = support_terms(a_mult, params)?;
    if terms.is_empty() {
        return Err(Error::EmptySupport { multiplier: a_mult });
    }
    Ok(sums_of(&terms, a_mult))
}

/// `I(A) = Σ_{A a_ν² ≤ 1} σ_ν⁴`.
///
/// The boundary test allows four ulps so that lattice points sitting exactly
/// on `A a² = 1` are counted regardless of rounding in `A`.
pub fn i_of_a(a_mult: f64, params: &ModelParams) -> Result<f64> {
    check_multiplier(a_mult)?;
    let limit = 1.0 + 4.0 * f64::EPSILON;
    let mut total = 0.0;
    let mut count = 0usize;
    for_each_product_pair(support_product_bound(a_mult, params)?, |m, n| {
        let nu = Index::new((m - 1) as u32, (n - 1) as u32);
        let a = ellipsoid_coeff(nu, params);
        if a_mult * a * a <= limit {
            let s2 = sigma_sq(nu, params);
            total += s2 * s2;
            count += 1;
        }
    });
    if count == 0 {
        return Err(Error::EmptySupport { multiplier: a_mult });
    }
    Ok(total)
}

/// `A J1(A) / J2(A)`, the squared radius matched by multiplier `A`.
pub fn radius_sq_of_multiplier(a_mult: f64, params: &ModelParams) -> Result<f64> {
    let s = j_sums(a_mult, params)?;
    Ok(a_mult * s.j1 / s.j2)
}

/// Solves `r² = A J1(A)/J2(A)` for `A`.
fn find_multiplier(r_sq: f64, params: &ModelParams) -> Result<f64> {
    let p = params.p;
    let c2 = params.coeff_scale().powi(2);
    let d4 = params.sigma_scale().powi(4);
    let a2_of = |prod: u64| c2 * (prod as f64).powf(2.0 * p);

    // A < r² always (each support term has a² < 1/A), and A ≈ 3r²/(4p+3)
    let guess = 0.25 * asymptotic_multiplier(r_sq.sqrt(), p);
    let mut p_max = ((1.0 / (guess * c2)).sqrt().powf(1.0 / p).ceil() as u64).max(4);

    loop {
        if p_max > MAX_PRODUCT {
            return Err(Error::Domain(format!(
                "radius r = {} needs lattice products beyond {MAX_PRODUCT}; too small to solve",
                r_sq.sqrt()
            )));
        }
        // σ⁴ aggregated by product P = (j+1)(l+1)
        let mut q4 = vec![0.0f64; p_max as usize + 1];
        for_each_product_pair(p_max, |m, n| {
            let s = (m + n - 1) as f64;
            q4[(m * n) as usize] += d4 * s * s;
        });
        let (mut s0, mut s2, mut s4) = (0.0, 0.0, 0.0);
        let mut g_hi = f64::INFINITY;
        for k in 1..=p_max {
            let a2k = a2_of(k);
            let q = q4[k as usize];
            s0 += q;
            s2 += a2k * q;
            s4 += a2k * a2k * q;
            // piece k: support {P ≤ k}, A in [1/a²(k+1), 1/a²(k))
            let a_lo = 1.0 / a2_of(k + 1);
            let a_hi = 1.0 / a2k;
            let g_lo = (s0 - a_lo * s2) / (s2 - a_lo * s4);
            if r_sq >= g_lo {
                let a_mult = (s0 - r_sq * s2) / (s2 - r_sq * s4);
                if !(a_mult.is_finite() && a_mult > 0.0) || r_sq > g_hi {
                    return Err(Error::SolverFailure {
                        reason: format!("closed-form root on piece k = {k} is not usable ({a_mult})"),
                        lo: a_lo,
                        hi: a_hi,
                        g_lo,
                        g_hi,
                    });
                }
                return Ok(a_mult.clamp(a_lo, a_hi * (1.0 - f64::EPSILON)));
            }
            g_hi = g_lo;
        }
        p_max *= 4;
    }
}

/// `3 r² / (4p + 3)`, the leading-order multiplier.
pub fn asymptotic_multiplier(r: f64, p: f64) -> f64 {
    3.0 * r * r / (4.0 * p + 3.0)
}

/// Solves the extreme problem for radius `r` and noise level `ε`.
pub fn solve_extreme(r: f64, eps: f64, params: &ModelParams) -> Result<ExtremeSolution> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Domain(format!("radius must be > 0, got {r}")));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Domain(format!("noise level must be > 0, got {eps}")));
    }
    let max_radius = 1.0 / params.min_coeff();
    // at r = max_radius the alternative set is a single point and A has no interior solution
    if r >= max_radius {
        return Err(Error::InfeasibleRadius { r, max_radius });
    }
    let a_mult = find_multiplier(r * r, params)?;
    let sol = ExtremeSolution::assemble(a_mult, Some(r), eps, params)?;
    if !(sol.residuals.max() <= 1e-10) {
        return Err(Error::SolverFailure {
            reason: format!(
                "constraint residuals too large (ball {:e}, ellipsoid {:e})",
                sol.residuals.ball, sol.residuals.ellipsoid
            ),
            lo: a_mult,
            hi: a_mult,
            g_lo: sol.r * sol.r,
            g_hi: sol.r * sol.r,
        });
    }
    Ok(sol)
}

impl ExtremeSolution {
    /// Solution whose multiplier is `A`; the radius is `√(A J1/J2)`.
    pub fn from_multiplier(a_mult: f64, eps: f64, params: &ModelParams) -> Result<Self> {
        check_multiplier(a_mult)?;
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::Domain(format!("noise level must be > 0, got {eps}")));
        }
        Self::assemble(a_mult, None, eps, params)
    }

    fn assemble(a_mult: f64, r: Option<f64>, eps: f64, params: &ModelParams) -> Result<Self> {
        let terms = support_terms(a_mult, params)?;
        if terms.is_empty() {
            return Err(Error::EmptySupport { multiplier: a_mult });
        }
        let JSums { j0, j1, j2 } = sums_of(&terms, a_mult);
        let r_sq = match r {
            Some(r) => r * r,
            None => a_mult * j1 / j2,
        };
        let z0_sq = r_sq / j1;
        let norm = (2.0 * j0).sqrt();

        let mut eta_sq = SequenceVector::new();
        let mut weights = SequenceVector::new();
        let (mut ball, mut ell, mut w0) = (0.0, 0.0, 0.0f64);
        for t in &terms {
            let e = z0_sq * t.s2 * t.x;
            let w = t.s2 * t.x / norm;
            ball += t.s2 * e;
            ell += t.a2 * t.s2 * e;
            w0 = w0.max(w);
            eta_sq.insert(t.nu, e);
            weights.insert(t.nu, w);
        }
        Ok(Self {
            multiplier: a_mult,
            z0_sq,
            u_eps: u_from_sums(r_sq, eps, j0, j1),
            r: r_sq.sqrt(),
            eps,
            params: *params,
            support: terms.iter().map(|t| t.nu).collect(),
            eta_sq,
            weights,
            w0,
            j0,
            j1,
            j2,
            residuals: ConstraintResiduals {
                ball: (ball / r_sq - 1.0).abs(),
                ellipsoid: (ell - 1.0).abs(),
            },
        })
    }

    /// Same solution at another noise level (only `u_ε` depends on `ε`).
    pub fn with_eps(&self, eps: f64) -> Self {
        Self {
            eps,
            u_eps: u_from_sums(self.r * self.r, eps, self.j0, self.j1),
            ..self.clone()
        }
    }

    pub fn j_sums(&self) -> JSums {
        JSums {
            j0: self.j0,
            j1: self.j1,
            j2: self.j2,
        }
    }
}

fn u_from_sums(r_sq: f64, eps: f64, j0: f64, j1: f64) -> f64 {
    // u² = (r/ε)⁴ J0 / (2 J1²)
    r_sq / (eps * eps) * (0.5 * j0).sqrt() / j1
}

/// Noise level at which `sol` has value `u_ε = target_u`.
pub fn eps_for_target_u(sol: &ExtremeSolution, target_u: f64) -> Result<f64> {
    if !(target_u > 0.0 && target_u.is_finite()) {
        return Err(Error::Domain(format!("target u must be > 0, got {target_u}")));
    }
    Ok(sol.r * (sol.j0 / (2.0 * sol.j1 * sol.j1)).powf(0.25) / target_u.sqrt())
}

/// Largest weight, recomputed from the water-filling form.
pub fn w0_check(sol: &ExtremeSolution) -> f64 {
    let norm = (2.0 * sol.j0).sqrt();
    sol.support
        .iter()
        .map(|&nu| {
            let a = ellipsoid_coeff(nu, &sol.params);
            sigma_sq(nu, &sol.params) * (1.0 - sol.multiplier * a * a).max(0.0) / norm
        })
        .fold(0.0, f64::max)
}

/// Leading-order forms of `I`, `J0`, `J1`, `J2` at small `A`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LeadingOrder {
    pub i: f64,
    pub j0: f64,
    pub j1: f64,
    pub j2: f64,
}

/// Leading-order oracles in the unit system of `params`.
pub fn leading_order(a_mult: f64, params: &ModelParams) -> LeadingOrder {
    let p = params.p;
    let b = APERY;
    // physical sums are D⁴ times the normalized sums at C² A
    let d4 = params.sigma_scale().powi(4);
    let t = (params.coeff_scale().powi(2) * a_mult).powf(-3.0 / (2.0 * p));
    LeadingOrder {
        i: d4 * 2.0 * b / 3.0 * t,
        j1: d4 * 4.0 * b * p / (3.0 * (2.0 * p + 3.0)) * t,
        j2: d4 * 4.0 * b * p / ((4.0 * p + 3.0) * (2.0 * p + 3.0)) * t,
        j0: d4 * 16.0 * b * p * p / (3.0 * (2.0 * p + 3.0) * (4.0 * p + 3.0)) * t,
    }
}

/// Leading-order value of the extreme problem,
/// `u² ≈ π⁴ L^{-3/p} r^{4+3/p} ε^{-4} (2p+3)/(2B) (3/(4p+3))^{1+3/(2p)}`;
/// the factor `π⁴ L^{-3/p}` is dropped in normalized units.
pub fn asymptotic_u(r: f64, eps: f64, params: &ModelParams) -> f64 {
    let p = params.p;
    let mut u_sq = r.powf(4.0 + 3.0 / p) / eps.powi(4) * (2.0 * p + 3.0) / (2.0 * APERY)
        * (3.0 / (4.0 * p + 3.0)).powf(1.0 + 3.0 / (2.0 * p));
    if !params.normalized {
        u_sq *= std::f64::consts::PI.powi(4) * params.l_scale.powf(-3.0 / p);
    }
    u_sq.sqrt()
}

fn check_eps_unit(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("noise level must lie in (0, 1), got {eps}")));
    }
    Ok(())
}

/// Minimax separation rate `ε^{4p/(4p+3)}`.
pub fn separation_rate(eps: f64, p: f64) -> Result<f64> {
    check_eps_unit(eps)?;
    if !(p > 0.0) {
        return Err(Error::Domain(format!("smoothness p must be > 0, got {p}")));
    }
    Ok(eps.powf(4.0 * p / (4.0 * p + 3.0)))
}

/// Adaptive rate `(ε (ln ln ε⁻¹)^{1/4})^{4p/(4p+3)}`.
pub fn adaptive_rate(eps: f64, p: f64) -> Result<f64> {
    check_eps_unit(eps)?;
    let ll = (1.0 / eps).ln().ln();
    if !(ll > 0.0) {
        return Err(Error::Domain(format!(
            "adaptive rate needs ε < 1/e so that ln ln(1/ε) > 0, got ε = {eps}"
        )));
    }
    separation_rate(eps * ll.powf(0.25), p)
}

/// `Σ_{m=1}^{M} m^{-3}`, summed from the small terms up.
pub fn apery_partial_sum(m_max: u64) -> f64 {
    (1..=m_max).rev().map(|m| (m as f64).powi(-3)).sum()
}

/// Upper bound `1/(2M²)` on the tail `Σ_{m>M} m^{-3}`.
pub fn apery_tail_bound(m_max: u64) -> f64 {
    0.5 / (m_max as f64).powi(2)
}

/// `B = ζ(3) = Σ m^{-3}`: partial sum to `M = 10⁴` plus an Euler–Maclaurin tail.
pub fn apery_constant() -> f64 {
    let m = 10_000u64;
    let x = m as f64;
    // Σ_{k≥M} k^{-3} = 1/(2M²) + 1/(2M³) + 1/(4M⁴) − 1/(12M⁶) + …
    let tail = 0.5 / x.powi(2) + 0.5 / x.powi(3) + 0.25 / x.powi(4) - 1.0 / (12.0 * x.powi(6));
    apery_partial_sum(m - 1) + tail
}
