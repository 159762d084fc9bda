//! Response of the normal form to alternate pacing.
//!
//! Alternate pacing perturbs the bifurcation parameter subharmonically:
//! beat `n` uses `mu + (-1)^n delta`. Above the critical parameter
//! `mu_crit = rho |delta|` the paced attractor is a *unilateral* period-two
//! orbit (both points above the border); below it the attractor is a
//! *bilateral* orbit straddling the border. Both have closed forms built
//! from a handful of derived vectors:
//!
//! * `d = (I + A)^-1 c` — the per-unit-`delta` shift of the unilateral pair;
//! * `rho = |d^(1)| / X_fp^(1)` — slope of the validity boundary;
//! * `s_upper = (I - BA)^-1 (I - B) c`, `s_lower = (I - AB)^-1 (I - A) c` —
//!   the `mu`-independent shifts of the bilateral pair.
//!
//! A second bilateral family with the opposite beat parity exists once `mu`
//! is sufficiently negative; it is returned by [`bilateral_out_of_phase`]
//! and never by the default dispatch.
//!
//! The public API takes `delta` as a signed amplitude. Internally the
//! closed forms orient `delta` so that its sign matches the sign of
//! `d^(1)`; the `odd_is_upper` flag on [`PacedResponse`] reports which
//! physical beat parity carries the upper point, so callers never have to
//! track the sign convention themselves.

use crate::error::{Error, Result};
use crate::matrix::{self, norm2, Matrix};
use crate::normal_form::NormalFormMap;
use serde::Serialize;

/// Slack used when comparing `mu` against the regime boundary.
const REGIME_SLACK: f64 = 1e-12;

/// First components smaller than this count as "on the border" when a
/// simulated response is classified.
const BORDER_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseKind {
    Unilateral,
    BilateralInPhase,
    BilateralOutOfPhase,
}

/// A period-two response of the paced map.
#[derive(Debug, Clone, Serialize)]
pub struct PacedResponse {
    pub kind: ResponseKind,
    /// Point with the larger first component.
    pub y_upper: Vec<f64>,
    pub y_lower: Vec<f64>,
    /// True when the upper point occupies odd-numbered beats.
    pub odd_is_upper: bool,
    pub mu: f64,
    pub delta: f64,
}

/// Map-level quantities derived once per map; the critical points are per
/// unit pacing amplitude (multiply by `|delta|` for a concrete `delta`).
#[derive(Debug, Clone)]
pub struct PacingDerived {
    pub d: Vec<f64>,
    pub rho: f64,
    pub s_upper: Vec<f64>,
    pub s_lower: Vec<f64>,
    /// Upper point at `mu = mu_crit`, per unit amplitude.
    pub y_upper_crit: Vec<f64>,
    /// Lower point at `mu = mu_crit`, per unit amplitude; its first
    /// component vanishes there.
    pub y_lower_crit: Vec<f64>,
}

/// One paced beat: `evaluate(x, mu + (-1)^n delta)`.
pub fn paced_step(
    map: &NormalFormMap,
    x: &[f64],
    beat: u64,
    mu: f64,
    delta: f64,
) -> Result<Vec<f64>> {
    let signed = if beat.is_multiple_of(2) {
        delta
    } else {
        -delta
    };
    map.evaluate(x, mu + signed)
}

/// Computes the pacing-derived vectors, verifying the structural
/// conditions. A singular `I + A` is reported before the condition gate so
/// that the degenerate-resolvent case surfaces as [`Error::SingularMatrix`].
pub fn pacing_derived(map: &NormalFormMap) -> Result<PacingDerived> {
    let eye = Matrix::identity(map.dim());
    let d = eye.add(map.a())?.lu_solve(map.c())?;
    map.require_paced_structure()?;

    let x_fp = map.x_fp_per_mu()?;
    let rho = d[0].abs() / x_fp[0];

    let ba = map.b().mul(map.a())?;
    let ab = map.a().mul(map.b())?;
    let s_upper = eye
        .sub(&ba)?
        .lu_solve(&eye.sub(map.b())?.mul_vec(map.c())?)?;
    let s_lower = eye
        .sub(&ab)?
        .lu_solve(&eye.sub(map.a())?.mul_vec(map.c())?)?;

    let sign = if d[0] >= 0.0 { 1.0 } else { -1.0 };
    let fp_crit = matrix::scale_vec(&x_fp, rho);
    let shift = matrix::scale_vec(&d, sign);
    let y_upper_crit = matrix::add_vec(&fp_crit, &shift);
    let y_lower_crit = matrix::sub_vec(&fp_crit, &shift);

    Ok(PacingDerived {
        d,
        rho,
        s_upper,
        s_lower,
        y_upper_crit,
        y_lower_crit,
    })
}

/// Critical bifurcation parameter `mu_crit = rho |delta|` below which the
/// paced response turns bilateral.
pub fn mu_crit(map: &NormalFormMap, delta: f64) -> Result<f64> {
    if delta == 0.0 {
        return Err(Error::DegenerateDelta);
    }
    Ok(pacing_derived(map)?.rho * delta.abs())
}

/// Unilateral paced response, valid for `mu >= mu_crit(delta)`.
pub fn unilateral_solution(map: &NormalFormMap, mu: f64, delta: f64) -> Result<PacedResponse> {
    let derived = pacing_derived(map)?;
    let amp = delta.abs();
    let crit = derived.rho * amp;
    if mu < crit - REGIME_SLACK * (1.0 + crit.abs()) {
        return Err(Error::OutOfRegime(format!(
            "unilateral solution needs mu >= {crit}, got {mu}"
        )));
    }
    let x_fp = matrix::scale_vec(&map.x_fp_per_mu()?, mu);
    let sign = if derived.d[0] >= 0.0 { 1.0 } else { -1.0 };
    let shift = matrix::scale_vec(&derived.d, amp * sign);
    Ok(PacedResponse {
        kind: ResponseKind::Unilateral,
        y_upper: matrix::add_vec(&x_fp, &shift),
        y_lower: matrix::sub_vec(&x_fp, &shift),
        odd_is_upper: delta.signum() == derived.d[0].signum(),
        mu,
        delta,
    })
}

/// Bilateral response continuing the unilateral phase, valid for
/// `mu <= mu_crit(delta)`.
pub fn bilateral_in_phase(map: &NormalFormMap, mu: f64, delta: f64) -> Result<PacedResponse> {
    let derived = pacing_derived(map)?;
    let amp = delta.abs();
    let crit = derived.rho * amp;
    if mu > crit + REGIME_SLACK * (1.0 + crit.abs()) {
        return Err(Error::OutOfRegime(format!(
            "bilateral solution needs mu <= {crit}, got {mu}"
        )));
    }
    let (per_mu_upper, per_mu_lower) = map.period_two_per_mu()?;
    let sign = if derived.d[0] >= 0.0 { 1.0 } else { -1.0 };
    let oriented = amp * sign;
    Ok(PacedResponse {
        kind: ResponseKind::BilateralInPhase,
        y_upper: matrix::add_vec(
            &matrix::scale_vec(&per_mu_upper, mu),
            &matrix::scale_vec(&derived.s_upper, oriented),
        ),
        y_lower: matrix::sub_vec(
            &matrix::scale_vec(&per_mu_lower, mu),
            &matrix::scale_vec(&derived.s_lower, oriented),
        ),
        odd_is_upper: delta.signum() == derived.d[0].signum(),
        mu,
        delta,
    })
}

/// The opposite-parity bilateral response. It exists only when
/// `mu * X_upper^(1) >= delta_oriented * s_upper^(1)`, which forces `mu`
/// sufficiently negative; absence is a value, not an error. Its stability
/// is not claimed: the closed form is verified by substitution only.
pub fn bilateral_out_of_phase(
    map: &NormalFormMap,
    mu: f64,
    delta: f64,
) -> Result<Option<PacedResponse>> {
    let derived = pacing_derived(map)?;
    let (per_mu_upper, per_mu_lower) = map.period_two_per_mu()?;
    let sign = if derived.d[0] >= 0.0 { 1.0 } else { -1.0 };
    let oriented = delta.abs() * sign;
    let lhs = mu * per_mu_upper[0];
    let rhs = oriented * derived.s_upper[0];
    if lhs < rhs - REGIME_SLACK * (lhs.abs() + rhs.abs() + 1.0) {
        return Ok(None);
    }
    Ok(Some(PacedResponse {
        kind: ResponseKind::BilateralOutOfPhase,
        y_upper: matrix::sub_vec(
            &matrix::scale_vec(&per_mu_upper, mu),
            &matrix::scale_vec(&derived.s_upper, oriented),
        ),
        y_lower: matrix::add_vec(
            &matrix::scale_vec(&per_mu_lower, mu),
            &matrix::scale_vec(&derived.s_lower, oriented),
        ),
        odd_is_upper: delta.signum() != derived.d[0].signum(),
        mu,
        delta,
    }))
}

/// Default dispatch: unilateral at or above `mu_crit`, in-phase bilateral
/// below. The out-of-phase family is never returned here.
pub fn predicted_response(map: &NormalFormMap, mu: f64, delta: f64) -> Result<PacedResponse> {
    let crit = mu_crit(map, delta)?;
    if mu >= crit {
        unilateral_solution(map, mu, delta)
    } else {
        bilateral_in_phase(map, mu, delta)
    }
}

/// Two consecutive paced beats starting on an even beat, with the second
/// application pinned to the upper branch — the composition that governs
/// stability near the critical parameter, where the even-beat point sits
/// on the border. `delta` is used literally as the even-beat offset, so
/// callers following the sign convention should pass the oriented value.
pub fn composed_paced_step(
    map: &NormalFormMap,
    x: &[f64],
    mu: f64,
    delta: f64,
) -> Result<Vec<f64>> {
    let first = map.evaluate(x, mu + delta)?;
    let mut out = map.a().mul_vec(&first)?;
    for (o, &ci) in out.iter_mut().zip(map.c()) {
        *o += ci * (mu - delta);
    }
    Ok(out)
}

/// Knobs for the brute-force paced simulation.
#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    pub max_beats: u64,
    /// Beats discarded before convergence detection starts.
    pub transient: u64,
    /// Convergence threshold on `||x_{n+2} - x_n||`, required for ten
    /// consecutive even beats.
    pub tol: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            max_beats: 1_000_000,
            transient: 2000,
            tol: 1e-10,
        }
    }
}

/// A simulated response plus convergence statistics.
#[derive(Debug, Clone, Serialize)]
pub struct SimulatedResponse {
    pub response: PacedResponse,
    /// Beats consumed up to detection.
    pub beats: u64,
    /// Final `||x_{n+2} - x_n||`.
    pub residual: f64,
}

/// Iterates the paced map until a period-two orbit is detected, then
/// classifies it. A response with both points on one side of the border is
/// reported as unilateral; points within `1e-9` of the border take the
/// kind of the analytic dispatch.
pub fn simulate_paced(
    map: &NormalFormMap,
    mu: f64,
    delta: f64,
    x0: &[f64],
    opts: &SimOptions,
) -> Result<SimulatedResponse> {
    if x0.len() != map.dim() {
        return Err(Error::DimensionMismatch(format!(
            "initial state has length {}, expected {}",
            x0.len(),
            map.dim()
        )));
    }
    let (even_pt, odd_pt, beats, residual) =
        detect_period_two(|x, n| paced_step(map, x, n, mu, delta), x0.to_vec(), opts)?;
    let response = classify_simulated(map, mu, delta, even_pt, odd_pt)?;
    Ok(SimulatedResponse {
        response,
        beats,
        residual,
    })
}

/// Generic period-two detector shared by the normal-form and Sun-model
/// simulators. `step(x, n)` performs beat `n`. Returns the even-indexed
/// point, the odd-indexed point, beats consumed, and the final residual.
pub(crate) fn detect_period_two<F>(
    mut step: F,
    x0: Vec<f64>,
    opts: &SimOptions,
) -> Result<(Vec<f64>, Vec<f64>, u64, f64)>
where
    F: FnMut(&[f64], u64) -> Result<Vec<f64>>,
{
    const REQUIRED_STREAK: usize = 10;
    let escape = 1e12 * (1.0 + norm2(&x0));
    let mut x = x0;
    let mut n: u64 = 0;
    let mut last_even: Option<Vec<f64>> = None;
    let mut last_residual = f64::INFINITY;
    let mut streak = 0usize;

    while n < opts.max_beats {
        if n >= opts.transient && n.is_multiple_of(2) {
            if let Some(prev) = &last_even {
                let diff = norm2(&matrix::sub_vec(&x, prev));
                last_residual = diff;
                streak = if diff <= opts.tol { streak + 1 } else { 0 };
                if streak >= REQUIRED_STREAK {
                    let even_pt = x.clone();
                    let odd_pt = step(&x, n)?;
                    return Ok((even_pt, odd_pt, n, diff));
                }
            }
            last_even = Some(x.clone());
        }
        x = step(&x, n)?;
        n += 1;
        if x.iter().any(|v| !v.is_finite()) || norm2(&x) > escape {
            return Err(Error::NoConvergence(format!(
                "trajectory diverged after {n} beats"
            )));
        }
    }
    Err(Error::NoConvergence(format!(
        "no period-two convergence within {} beats (residual {:.3e}); \
         possible escape to another attractor",
        opts.max_beats, last_residual
    )))
}

fn classify_simulated(
    map: &NormalFormMap,
    mu: f64,
    delta: f64,
    even_pt: Vec<f64>,
    odd_pt: Vec<f64>,
) -> Result<PacedResponse> {
    let odd_is_upper = odd_pt[0] >= even_pt[0];
    let (y_upper, y_lower) = if odd_is_upper {
        (odd_pt, even_pt)
    } else {
        (even_pt, odd_pt)
    };
    let near_border = y_upper[0].abs() <= BORDER_TOL || y_lower[0].abs() <= BORDER_TOL;
    let kind = if near_border {
        match predicted_response(map, mu, delta) {
            Ok(pred) => pred.kind,
            Err(_) => ResponseKind::Unilateral,
        }
    } else if y_lower[0] > 0.0 || y_upper[0] < 0.0 {
        ResponseKind::Unilateral
    } else {
        match pacing_derived(map) {
            Ok(derived) => {
                let in_phase_parity = delta.signum() == derived.d[0].signum();
                if odd_is_upper == in_phase_parity {
                    ResponseKind::BilateralInPhase
                } else {
                    ResponseKind::BilateralOutOfPhase
                }
            }
            Err(_) => ResponseKind::BilateralInPhase,
        }
    };
    Ok(PacedResponse {
        kind,
        y_upper,
        y_lower,
        odd_is_upper,
        mu,
        delta,
    })
}
