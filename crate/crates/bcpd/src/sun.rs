//! The Sun et al. atrioventricular nodal conduction model, the built-in
//! case study for the whole pipeline.
//!
//! The model iterates the atrial-His interval `A` (ms) and a slow fatigue
//! drift `R` (ms), driven by the recovery interval `H` (ms):
//!
//! ```text
//! R_{n+1} = R_n exp(-(A_n + H)/tau_fat) + fatigue * exp(-H/tau_fat)
//! A_{n+1} = A_min + R_{n+1} + (201 - 0.7 A_n) exp(-H/tau_rec)    A_n <= 130
//!                             (500 - 3.0 A_n) exp(-H/tau_rec)    A_n >= 130
//! ```
//!
//! The two recovery branches agree at `A = 130` (both give 110 ms), so the
//! map is continuous with a derivative jump across that border. Sweeping
//! `H` downward, the stable fixed point's `A` grows until it collides with
//! the border, where conduction alternans sets in through a
//! border-collision period doubling. The border function used for the
//! reduction is `beta = 130 - A`, so larger `H` (fixed point below the
//! border in `A`) maps to the positive side and `mu = H - H_bif`.

use crate::error::{Error, Result};
use crate::gain::{self, GainCurve, GainSample, ScanAxis};
use crate::matrix::{self, norm2};
use crate::pacing::{self, SimOptions};
use crate::reduction::{self, PiecewiseSmoothMap, ReductionResult};
use serde::Serialize;

/// Model constants; defaults are the published parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SunParams {
    /// Shortest attainable atrial-His interval (ms).
    pub a_min: f64,
    /// Recovery time constant (ms).
    pub tau_rec: f64,
    /// Fatigue time constant (ms).
    pub tau_fat: f64,
    /// Per-beat fatigue increment (ms); the model's own "gamma",
    /// renamed to keep it distinct from the gain slope.
    pub fatigue_magnitude: f64,
    /// Border location in `A` (ms).
    pub border_a: f64,
    /// Recovery intercept/slope for `A <= border_a` (the upper piece of
    /// the border function `130 - A`).
    pub upper_intercept: f64,
    pub upper_slope: f64,
    /// Recovery intercept/slope for `A >= border_a`.
    pub lower_intercept: f64,
    pub lower_slope: f64,
}

impl Default for SunParams {
    fn default() -> Self {
        SunParams {
            a_min: 33.0,
            tau_rec: 70.0,
            tau_fat: 30_000.0,
            fatigue_magnitude: 0.3,
            border_a: 130.0,
            upper_intercept: 201.0,
            upper_slope: 0.7,
            lower_intercept: 500.0,
            lower_slope: 3.0,
        }
    }
}

impl SunParams {
    /// Positivity plus the continuity identity: both recovery branches must
    /// agree at the border.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("a_min", self.a_min),
            ("tau_rec", self.tau_rec),
            ("tau_fat", self.tau_fat),
            ("border_a", self.border_a),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !self.fatigue_magnitude.is_finite() || self.fatigue_magnitude < 0.0 {
            return Err(Error::InvalidParameter(
                "fatigue_magnitude must be nonnegative".into(),
            ));
        }
        let upper = self.upper_intercept - self.upper_slope * self.border_a;
        let lower = self.lower_intercept - self.lower_slope * self.border_a;
        let scale = self.upper_intercept.abs() + self.lower_intercept.abs() + 1.0;
        if (upper - lower).abs() > 1e-9 * scale {
            return Err(Error::ContinuityViolation((upper - lower).abs()));
        }
        Ok(())
    }
}

/// Beat-to-beat state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SunState {
    /// Atrial-His interval (ms).
    pub a: f64,
    /// Fatigue drift (ms).
    pub r: f64,
}

/// One beat of the model at recovery interval `h`. The drift updates
/// first because the new interval references it.
pub fn sun_step(state: SunState, h: f64, params: &SunParams) -> SunState {
    let r_next = state.r * (-(state.a + h) / params.tau_fat).exp()
        + params.fatigue_magnitude * (-h / params.tau_fat).exp();
    let recovery = if state.a <= params.border_a {
        params.upper_intercept - params.upper_slope * state.a
    } else {
        params.lower_intercept - params.lower_slope * state.a
    };
    let a_next = params.a_min + r_next + recovery * (-h / params.tau_rec).exp();
    SunState {
        a: a_next,
        r: r_next,
    }
}

fn step_piece(z: &[f64], h: f64, params: &SunParams, intercept: f64, slope: f64) -> Vec<f64> {
    let r_next = z[1] * (-(z[0] + h) / params.tau_fat).exp()
        + params.fatigue_magnitude * (-h / params.tau_fat).exp();
    let a_next = params.a_min + r_next + (intercept - slope * z[0]) * (-h / params.tau_rec).exp();
    vec![a_next, r_next]
}

/// The model wrapped for the reduction machinery: state `z = (A, R)`,
/// parameter `nu = H`, border `beta = border_a - A`.
pub fn piecewise_map(params: &SunParams) -> PiecewiseSmoothMap {
    let p_upper = *params;
    let p_lower = *params;
    let border_a = params.border_a;
    PiecewiseSmoothMap::new(
        2,
        move |z, h| step_piece(z, h, &p_upper, p_upper.upper_intercept, p_upper.upper_slope),
        move |z, h| step_piece(z, h, &p_lower, p_lower.lower_intercept, p_lower.lower_slope),
        move |z, _h| border_a - z[0],
    )
}

/// Default sweep bounds for the border collision of the published
/// parameter set.
pub const H_SWEEP: (f64, f64) = (40.0, 70.0);

/// Recovery interval at which the stable fixed point collides with the
/// border, swept over the default bounds.
pub fn find_h_bif(params: &SunParams) -> Result<f64> {
    find_h_bif_between(params, H_SWEEP.0, H_SWEEP.1)
}

/// Same sweep with explicit bounds (parameter variants move the collision
/// far from the default window).
pub fn find_h_bif_between(params: &SunParams, h_lo: f64, h_hi: f64) -> Result<f64> {
    params.validate()?;
    let map = piecewise_map(params);
    let (_z_bif, h_bif) = reduction::locate_border_fixed_point(&map, h_lo, h_hi)?;
    Ok(h_bif)
}

/// Locates the border collision and reduces the model to its 2x2 normal
/// form.
pub fn sun_reduce(params: &SunParams) -> Result<ReductionResult> {
    sun_reduce_between(params, H_SWEEP.0, H_SWEEP.1)
}

pub fn sun_reduce_between(params: &SunParams, h_lo: f64, h_hi: f64) -> Result<ReductionResult> {
    params.validate()?;
    let map = piecewise_map(params);
    let (z_bif, h_bif) = reduction::locate_border_fixed_point(&map, h_lo, h_hi)?;
    reduction::normal_form_reduce(&map, &z_bif, h_bif)
}

/// Unpaced fixed point of the upper piece at recovery interval `h`; the
/// recorded start state for paced simulations.
pub fn unpaced_fixed_point(params: &SunParams, h: f64) -> Result<SunState> {
    let map = piecewise_map(params);
    let f = move |z: &[f64], nu: f64| map.upper(z, nu);
    // Newton on f(z) - z = 0 with finite-difference Jacobians.
    let mut z = vec![params.border_a, 0.0];
    for _ in 0..200 {
        let fz = f(&z, h);
        let r = matrix::sub_vec(&fz, &z);
        if norm2(&r) <= 1e-12 * (1.0 + norm2(&z)) {
            return Ok(SunState { a: z[0], r: z[1] });
        }
        let mut jac = reduction::jacobian(&f, &z, h)?;
        for i in 0..2 {
            let v = jac.get(i, i) - 1.0;
            jac.set(i, i, v);
        }
        let step = jac.lu_solve(&r)?;
        z = matrix::sub_vec(&z, &step);
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NoConvergence("fixed-point solve diverged".into()));
        }
    }
    Err(Error::NoConvergence(
        "unpaced fixed point did not converge".into(),
    ))
}

/// Paced simulation of the full model: `H` perturbed by `(-1)^n delta`.
/// Returns `(A_upper, A_lower)` of the detected period-two orbit.
pub fn simulate_paced_orbit(
    params: &SunParams,
    h: f64,
    delta: f64,
    start: SunState,
    opts: &SimOptions,
) -> Result<(f64, f64)> {
    let step = |x: &[f64], n: u64| -> Result<Vec<f64>> {
        let signed = if n.is_multiple_of(2) { delta } else { -delta };
        let next = sun_step(SunState { a: x[0], r: x[1] }, h + signed, params);
        Ok(vec![next.a, next.r])
    };
    let (even_pt, odd_pt, _beats, _residual) =
        pacing::detect_period_two(step, vec![start.a, start.r], opts)?;
    Ok((even_pt[0].max(odd_pt[0]), even_pt[0].min(odd_pt[0])))
}

/// Measured and predicted gain at `(H, delta)`: the measured value comes
/// from pacing the full model, the prediction from the reduced normal form
/// at `mu = H - H_bif`. Both are in ms of `A` spread per ms of `delta`
/// (the reduction keeps the first normal-form coordinate in border units,
/// so the two conventions coincide).
pub fn sun_gain_experiment(params: &SunParams, h: f64, delta: f64) -> Result<(f64, f64)> {
    if delta == 0.0 {
        return Err(Error::DegenerateDelta);
    }
    let reduction = sun_reduce(params)?;
    let gamma_theory = gain::gain_theory_bc(&reduction.normal, h - reduction.nu_bif, delta)?;
    let gamma_sim = measured_gain(params, h, delta, &SimOptions::default())?;
    Ok((gamma_sim, gamma_theory))
}

fn measured_gain(params: &SunParams, h: f64, delta: f64, opts: &SimOptions) -> Result<f64> {
    let start = unpaced_fixed_point(params, h)?;
    let (a_upper, a_lower) = simulate_paced_orbit(params, h, delta, start, opts)?;
    Ok((a_upper - a_lower) / (2.0 * delta.abs()))
}

/// A gain sweep of the built-in model plus its scan metadata.
#[derive(Debug, Clone, Serialize)]
pub struct SunScan {
    pub curve: GainCurve,
    pub h_bif: f64,
}

/// Sweeps the gain of the full model. `ScanAxis::Mu` grids are in
/// `H - H_bif` (ms); `ScanAxis::Delta` grids are pacing amplitudes (ms)
/// with `fixed` the `H - H_bif` offset. Per-point failures become missing
/// samples.
pub fn sun_gain_scan(
    params: &SunParams,
    axis: ScanAxis,
    fixed: f64,
    grid: &[f64],
    opts: &SimOptions,
) -> Result<SunScan> {
    sun_gain_scan_between(params, axis, fixed, grid, opts, H_SWEEP)
}

/// [`sun_gain_scan`] with an explicit bracket for the border-collision
/// sweep.
pub fn sun_gain_scan_between(
    params: &SunParams,
    axis: ScanAxis,
    fixed: f64,
    grid: &[f64],
    opts: &SimOptions,
    sweep: (f64, f64),
) -> Result<SunScan> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty scan grid".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "scan grid must be strictly increasing".into(),
        ));
    }
    let reduction = sun_reduce_between(params, sweep.0, sweep.1)?;
    let gain_params = gain::gain_params(&reduction.normal)?;
    let h_bif = reduction.nu_bif;

    let mut samples = Vec::with_capacity(grid.len());
    for &p in grid {
        let (mu, delta) = match axis {
            ScanAxis::Mu => (p, fixed),
            ScanAxis::Delta => (fixed, p),
        };
        let gamma_theory = gain::gain_theory_from_params(&gain_params, mu, delta).ok();
        let gamma_sim = measured_gain(params, h_bif + mu, delta, opts).ok();
        samples.push(GainSample {
            param: p,
            gamma_theory,
            gamma_sim,
        });
    }
    Ok(SunScan {
        curve: GainCurve {
            axis,
            fixed_value: fixed,
            samples,
        },
        h_bif,
    })
}
