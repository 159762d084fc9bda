//! Prebifurcation gain and the gain-based bifurcation classifier.
//!
//! The gain is the first-component spread of the paced period-two response
//! divided by twice the pacing amplitude. For the border-collision normal
//! form it is piecewise linear in `mu / |delta|`:
//!
//! ```text
//! Gamma(mu, delta) = Gamma_const                                    mu >= rho |delta|
//!                  = Gamma_const + gamma (rho - mu / |delta|)       mu <= rho |delta|
//! ```
//!
//! with `Gamma_const = |d^(1)|` and `gamma = (X_lower^(1) - X_upper^(1)) / 2 > 0`.
//! The gain is therefore constant until the paced orbit touches the border
//! and grows linearly afterwards, staying bounded by
//! `Gamma_const + gamma rho`. A classical (smooth) period-doubling
//! bifurcation instead satisfies the cubic
//! `delta^2 Gamma^3 + mu Gamma - 1 = 0`, which diverges as `(mu, delta)`
//! approaches the origin and is strictly decreasing in `|delta|`. The
//! classifier exploits exactly this difference: sampled `(delta, Gamma)`
//! curves are fit against both shapes and labeled by residual, with a
//! monotonicity guard for the flat, uninformative regime.

use crate::error::{Error, Result};
use crate::matrix::norm2;
use crate::normal_form::NormalFormMap;
use crate::pacing::{self, SimOptions};
use rand::Rng;
use rand::SeedableRng;
use rand_pcg::Pcg64;
use serde::Serialize;

/// Gain parameters of a border-collision map.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GainParams {
    /// Gain in the unilateral (flat) regime: `|d^(1)|`.
    pub gamma_const: f64,
    /// Slope of the gain in `rho - mu/|delta|` once the response is
    /// bilateral: `(X_lower^(1) - X_upper^(1)) / 2`.
    pub gamma_slope: f64,
    /// Boundary slope `mu_crit / |delta|`.
    pub rho: f64,
}

pub fn gain_params(map: &NormalFormMap) -> Result<GainParams> {
    let derived = pacing::pacing_derived(map)?;
    let (per_mu_upper, per_mu_lower) = map.period_two_per_mu()?;
    Ok(GainParams {
        gamma_const: derived.d[0].abs(),
        gamma_slope: 0.5 * (per_mu_lower[0] - per_mu_upper[0]),
        rho: derived.rho,
    })
}

/// Gain of the border-collision normal form at `(mu, delta)`, `mu >= 0`.
pub fn gain_theory_bc(map: &NormalFormMap, mu: f64, delta: f64) -> Result<f64> {
    let params = gain_params(map)?;
    gain_theory_from_params(&params, mu, delta)
}

/// Same as [`gain_theory_bc`] but reusing precomputed parameters (useful in
/// scans).
pub fn gain_theory_from_params(params: &GainParams, mu: f64, delta: f64) -> Result<f64> {
    if delta == 0.0 {
        return Err(Error::DegenerateDelta);
    }
    if mu < 0.0 {
        return Err(Error::OutOfRegime(format!(
            "gain theory is stated for mu >= 0, got {mu}"
        )));
    }
    let amp = delta.abs();
    if mu >= params.rho * amp {
        Ok(params.gamma_const)
    } else {
        Ok(params.gamma_const + params.gamma_slope * (params.rho - mu / amp))
    }
}

/// Per-component gain, `component` zero-based; `component == 0` reproduces
/// [`gain_theory_bc`]. Off-border components may have either sign or
/// monotonicity, but every component is constant in the flat regime.
pub fn generalized_gain(map: &NormalFormMap, mu: f64, delta: f64, component: usize) -> Result<f64> {
    if component >= map.dim() {
        return Err(Error::IndexOutOfRange {
            index: component,
            dim: map.dim(),
        });
    }
    if delta == 0.0 {
        return Err(Error::DegenerateDelta);
    }
    if mu < 0.0 {
        return Err(Error::OutOfRegime(format!(
            "gain theory is stated for mu >= 0, got {mu}"
        )));
    }
    let derived = pacing::pacing_derived(map)?;
    let sign = if derived.d[0] >= 0.0 { 1.0 } else { -1.0 };
    let g_const = sign * derived.d[component];
    let amp = delta.abs();
    if mu >= derived.rho * amp {
        Ok(g_const)
    } else {
        let (per_mu_upper, per_mu_lower) = map.period_two_per_mu()?;
        let slope = 0.5 * (per_mu_lower[component] - per_mu_upper[component]);
        Ok(g_const + (derived.rho - mu / amp) * slope)
    }
}

/// Gain of a classical period-doubling bifurcation: the unique positive
/// root of `delta^2 Gamma^3 + mu Gamma - 1 = 0` (`mu >= 0`). Diverges at
/// the origin; `delta = 0` gives `1/mu` exactly.
pub fn gain_classical(mu: f64, delta: f64) -> Result<f64> {
    if mu == 0.0 && delta == 0.0 {
        return Err(Error::DegenerateInput);
    }
    if mu < 0.0 {
        return Err(Error::OutOfRegime(format!(
            "classical gain is stated for mu >= 0, got {mu}"
        )));
    }
    if delta == 0.0 {
        return Ok(1.0 / mu);
    }
    let d2 = delta * delta;
    let d23 = delta.abs().powf(-2.0 / 3.0);
    let upper = if mu > 0.0 { (1.0 / mu).max(d23) } else { d23 } + 1.0;
    Ok(positive_cubic_root(d2, mu, upper))
}

/// Bisection for the increasing `h(g) = p g^3 + q g - 1` on `[0, upper]`.
fn positive_cubic_root(p: f64, q: f64, upper: f64) -> f64 {
    let mut lo = 0.0;
    let mut hi = upper;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo) <= 1e-15 * mid.max(1.0) {
            break;
        }
        if p * mid * mid * mid + q * mid - 1.0 > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Sweep axis of a gain curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanAxis {
    Mu,
    Delta,
}

/// What a gain scan sweeps over.
pub enum GainTarget<'a> {
    Map(&'a NormalFormMap),
    Classical,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GainSample {
    pub param: f64,
    pub gamma_theory: Option<f64>,
    pub gamma_sim: Option<f64>,
}

/// A sampled gain curve along one axis with the other parameter fixed.
#[derive(Debug, Clone, Serialize)]
pub struct GainCurve {
    pub axis: ScanAxis,
    pub fixed_value: f64,
    pub samples: Vec<GainSample>,
}

impl GainCurve {
    /// CSV with header `param,gamma_theory,gamma_sim`; 17 significant
    /// digits, missing values as empty fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("param,gamma_theory,gamma_sim\n");
        for s in &self.samples {
            out.push_str(&format_float(s.param));
            out.push(',');
            if let Some(g) = s.gamma_theory {
                out.push_str(&format_float(g));
            }
            out.push(',');
            if let Some(g) = s.gamma_sim {
                out.push_str(&format_float(g));
            }
            out.push('\n');
        }
        out
    }
}

/// Round-trip-safe float formatting used by all CSV output.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Gain measured from a simulated or analytic paced response.
pub fn gain_of_response(resp: &pacing::PacedResponse) -> Result<f64> {
    if resp.delta == 0.0 {
        return Err(Error::DegenerateDelta);
    }
    Ok((resp.y_upper[0] - resp.y_lower[0]) / (2.0 * resp.delta.abs()))
}

/// Sweeps the gain along `axis`, holding the other parameter at `fixed`.
/// For a map target every grid point is also simulated; per-point failures
/// are recorded as missing values. `seed` controls the deterministic jitter
/// of the simulation start point.
pub fn gain_scan(
    target: &GainTarget,
    axis: ScanAxis,
    fixed: f64,
    grid: &[f64],
    sim_opts: &SimOptions,
    seed: u64,
) -> Result<GainCurve> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty scan grid".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "scan grid must be strictly increasing".into(),
        ));
    }
    let params = match target {
        GainTarget::Map(map) => Some(gain_params(map)?),
        GainTarget::Classical => None,
    };
    let mut rng = Pcg64::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(grid.len());
    for &p in grid {
        let (mu, delta) = match axis {
            ScanAxis::Mu => (p, fixed),
            ScanAxis::Delta => (fixed, p),
        };
        let (gamma_theory, gamma_sim) = match target {
            GainTarget::Classical => (gain_classical(mu, delta).ok(), None),
            GainTarget::Map(map) => {
                let theory = params
                    .as_ref()
                    .and_then(|gp| gain_theory_from_params(gp, mu, delta).ok());
                let sim = simulate_gain_point(map, mu, delta, sim_opts, &mut rng).ok();
                (theory, sim)
            }
        };
        samples.push(GainSample {
            param: p,
            gamma_theory,
            gamma_sim,
        });
    }
    Ok(GainCurve {
        axis,
        fixed_value: fixed,
        samples,
    })
}

fn simulate_gain_point(
    map: &NormalFormMap,
    mu: f64,
    delta: f64,
    opts: &SimOptions,
    rng: &mut Pcg64,
) -> Result<f64> {
    let predicted = pacing::predicted_response(map, mu, delta)?;
    // Start just off the predicted even-beat point; the orbit is locally
    // attracting wherever the structural conditions hold.
    let scale = 1e-3 * (1.0 + norm2(&predicted.y_lower));
    let x0: Vec<f64> = predicted
        .y_lower
        .iter()
        .map(|&v| v + scale * rng.random_range(-1.0..1.0))
        .collect();
    let sim = pacing::simulate_paced(map, mu, delta, &x0, opts)?;
    gain_of_response(&sim.response)
}

// ---------------------------------------------------------------------------
// classifier

/// Classifier outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    BorderCollision,
    Classical,
    Inconclusive,
}

/// Fit of the border-collision shape `Gamma(delta) = c0 + max(0, a - b/delta)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BcFit {
    pub c0: f64,
    pub a: f64,
    pub b: f64,
    pub residual: f64,
}

/// Fit of the classical shape `p delta^2 Gamma^3 + q Gamma - 1 = 0`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ClassicalFit {
    pub p: f64,
    pub q: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassifierVerdict {
    pub label: Verdict,
    pub bc_fit: BcFit,
    pub classical_fit: ClassicalFit,
    /// Spearman rank correlation between `delta` and `Gamma`; the
    /// inconclusive band is `[-0.3, 0.3]`.
    pub monotonicity: f64,
}

/// Residual-ratio band inside which the fits are considered tied.
const RESIDUAL_TIE_BAND: f64 = 0.20;
/// Null band for the Spearman statistic.
const MONOTONICITY_BAND: f64 = 0.30;
const MIN_SAMPLES: usize = 5;

/// Labels a sampled gain-vs-amplitude curve as border-collision or
/// classical. When the residuals are within 20% of each other the verdict
/// falls back to the monotonicity statistic: a border-collision gain never
/// decreases with amplitude while the classical gain strictly decreases;
/// data confined to the flat regime fits both shapes and stays
/// inconclusive. `mu_known = Some(0.0)` pins the border-collision kink to
/// the origin (no flat regime).
pub fn classify_bifurcation(
    samples: &[(f64, f64)],
    mu_known: Option<f64>,
) -> Result<ClassifierVerdict> {
    let mut distinct: Vec<f64> = samples.iter().map(|s| s.0).collect();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    if distinct.len() < MIN_SAMPLES {
        return Err(Error::InsufficientData {
            needed: MIN_SAMPLES,
            got: distinct.len(),
        });
    }
    if samples
        .iter()
        .any(|&(d, g)| !d.is_finite() || !g.is_finite() || d <= 0.0 || g <= 0.0)
    {
        return Err(Error::InvalidParameter(
            "classifier samples need delta > 0 and gamma > 0".into(),
        ));
    }

    let bc_fit = fit_bc(samples, mu_known);
    let classical_fit = fit_classical(samples);
    let monotonicity = spearman(samples);

    let denom = bc_fit.residual.max(classical_fit.residual).max(1e-300);
    let rel = (bc_fit.residual - classical_fit.residual).abs() / denom;
    let label = if rel < RESIDUAL_TIE_BAND {
        if monotonicity > MONOTONICITY_BAND {
            Verdict::BorderCollision
        } else if monotonicity < -MONOTONICITY_BAND {
            Verdict::Classical
        } else {
            Verdict::Inconclusive
        }
    } else if bc_fit.residual < classical_fit.residual {
        Verdict::BorderCollision
    } else {
        Verdict::Classical
    };

    Ok(ClassifierVerdict {
        label,
        bc_fit,
        classical_fit,
        monotonicity,
    })
}

fn bc_model(delta: f64, c0: f64, a: f64, b: f64) -> f64 {
    c0 + (a - b / delta).max(0.0)
}

fn rms<F: Fn(f64) -> f64>(samples: &[(f64, f64)], model: F) -> f64 {
    let sum: f64 = samples
        .iter()
        .map(|&(d, g)| {
            let e = g - model(d);
            e * e
        })
        .sum();
    (sum / samples.len() as f64).sqrt()
}

fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count <= 1 || !lo.is_finite() || lo <= 0.0 || hi <= lo {
        return vec![lo.max(1e-12)];
    }
    let (llo, lhi) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (llo + (lhi - llo) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

fn fit_bc(samples: &[(f64, f64)], mu_known: Option<f64>) -> BcFit {
    let gmax = samples.iter().map(|s| s.1).fold(f64::MIN, f64::max);
    let dmin = samples.iter().map(|s| s.0).fold(f64::MAX, f64::min);
    let dmax = samples.iter().map(|s| s.0).fold(f64::MIN, f64::max);

    let mut a_grid = vec![0.0];
    a_grid.extend(log_space(1e-3 * gmax, 10.0 * gmax, 24));
    let mut b_grid = vec![0.0];
    if mu_known == Some(0.0) {
        // Kink pinned to the origin: the curve rises from the smallest delta.
        b_grid.clear();
        b_grid.push(0.0);
        b_grid.extend(log_space(1e-6 * gmax * dmin, 1e-1 * gmax * dmin, 8));
    } else {
        b_grid.extend(log_space(1e-3 * gmax * dmin, 10.0 * gmax * dmax, 24));
    }

    // Given (a, b), the optimal nonnegative c0 is the clamped mean residual.
    let best_c0 = |a: f64, b: f64| -> f64 {
        let mean: f64 = samples
            .iter()
            .map(|&(d, g)| g - (a - b / d).max(0.0))
            .sum::<f64>()
            / samples.len() as f64;
        mean.max(0.0)
    };

    let mut best = (0.0, 0.0, 0.0, f64::INFINITY);
    for &a in &a_grid {
        for &b in &b_grid {
            let c0 = best_c0(a, b);
            let r = rms(samples, |d| bc_model(d, c0, a, b));
            if r < best.3 {
                best = (c0, a, b, r);
            }
        }
    }

    // Coordinate descent refinement with shrinking multiplicative steps.
    let refs = [gmax, gmax, gmax * dmax];
    let mut params = [best.0, best.1, best.2];
    let mut residual = best.3;
    let mut step = 0.5;
    while step > 1e-9 {
        let mut improved = false;
        for i in 0..3 {
            let base = params[i];
            for cand in [
                base * (1.0 + step),
                base * (1.0 - step),
                base + step * refs[i],
                base - step * refs[i],
            ] {
                let cand = cand.max(0.0);
                if mu_known == Some(0.0) && i == 2 && cand > 0.0 {
                    continue;
                }
                let mut trial = params;
                trial[i] = cand;
                let r = rms(samples, |d| bc_model(d, trial[0], trial[1], trial[2]));
                if r < residual {
                    params = trial;
                    residual = r;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.6;
        }
    }

    BcFit {
        c0: params[0],
        a: params[1],
        b: params[2],
        residual,
    }
}

fn classical_model(delta: f64, p: f64, q: f64) -> f64 {
    if p <= 0.0 && q <= 0.0 {
        return f64::INFINITY;
    }
    let pd2 = p * delta * delta;
    let mut upper: f64 = 1.0;
    if pd2 > 0.0 {
        upper = upper.max(pd2.powf(-1.0 / 3.0));
    }
    if q > 0.0 {
        upper = upper.max(1.0 / q);
    }
    positive_cubic_root(pd2, q, upper + 1.0)
}

fn fit_classical(samples: &[(f64, f64)]) -> ClassicalFit {
    let gmax = samples.iter().map(|s| s.1).fold(f64::MIN, f64::max);
    let gmin = samples.iter().map(|s| s.1).fold(f64::MAX, f64::min);
    let dmin = samples.iter().map(|s| s.0).fold(f64::MAX, f64::min);
    let dmax = samples.iter().map(|s| s.0).fold(f64::MIN, f64::max);

    let q_grid = log_space(1e-3 / gmax, 1e3 / gmin, 24);
    let p_grid = log_space(
        1e-4 / (dmax * dmax * gmax * gmax * gmax),
        1e4 / (dmin * dmin * gmin * gmin * gmin),
        24,
    );

    let mut best = (p_grid[0], q_grid[0], f64::INFINITY);
    for &p in &p_grid {
        for &q in &q_grid {
            let r = rms(samples, |d| classical_model(d, p, q));
            if r < best.2 {
                best = (p, q, r);
            }
        }
    }

    let refs = [best.0.max(1e-12), best.1.max(1e-12)];
    let mut params = [best.0, best.1];
    let mut residual = best.2;
    let mut step = 0.5;
    while step > 1e-9 {
        let mut improved = false;
        for i in 0..2 {
            let base = params[i];
            for cand in [
                base * (1.0 + step),
                base * (1.0 - step),
                base + step * refs[i],
                base - step * refs[i],
            ] {
                let cand = cand.max(0.0);
                let mut trial = params;
                trial[i] = cand;
                let r = rms(samples, |d| classical_model(d, trial[0], trial[1]));
                if r < residual {
                    params = trial;
                    residual = r;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.6;
        }
    }

    ClassicalFit {
        p: params[0],
        q: params[1],
        residual,
    }
}

/// Spearman rank correlation with midranks for ties.
fn spearman(samples: &[(f64, f64)]) -> f64 {
    let xs: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let rx = midranks(&xs);
    let ry = midranks(&ys);
    pearson(&rx, &ry)
}

fn midranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va <= 0.0 || vb <= 0.0 {
        return 0.0;
    }
    cov / (va * vb).sqrt()
}

/// Parses the classifier input CSV (`delta,gamma` header, one pair per row).
pub fn parse_delta_gamma_csv(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidParameter("empty classifier CSV".into()))?;
    if header.trim() != "delta,gamma" {
        return Err(Error::InvalidParameter(format!(
            "expected header 'delta,gamma', got '{}'",
            header.trim()
        )));
    }
    let mut out = Vec::new();
    for (idx, line) in lines.enumerate() {
        let mut fields = line.trim().split(',');
        let parse = |field: Option<&str>| -> Result<f64> {
            field
                .map(str::trim)
                .and_then(|f| f.parse::<f64>().ok())
                .ok_or_else(|| Error::InvalidParameter(format!("malformed CSV row {}", idx + 2)))
        };
        let delta = parse(fields.next())?;
        let gamma = parse(fields.next())?;
        if fields.next().is_some() {
            return Err(Error::InvalidParameter(format!(
                "malformed CSV row {}: too many fields",
                idx + 2
            )));
        }
        out.push((delta, gamma));
    }
    Ok(out)
}

/// Generates a synthetic labeled gain curve for classifier evaluation:
/// 8 amplitudes spanning both regimes with multiplicative noise.
pub fn synthetic_curve(border_collision: bool, rng: &mut Pcg64, noise: f64) -> Vec<(f64, f64)> {
    let deltas: Vec<f64> = (0..8).map(|i| 0.1 + 1.9 * i as f64 / 7.0).collect();
    let mut curve = Vec::with_capacity(8);
    if border_collision {
        let gamma_const = rng.random_range(0.3..1.5);
        let gamma_slope = rng.random_range(0.3..1.5);
        let rho = rng.random_range(0.2..0.8);
        // Kink inside the sampled span.
        let mu = rng.random_range(0.3..0.7) * rho * 1.0;
        let params = GainParams {
            gamma_const,
            gamma_slope,
            rho,
        };
        for &d in &deltas {
            let g = gain_theory_from_params(&params, mu, d).expect("valid synthetic point");
            let fuzz = 1.0 + noise * rng.random_range(-1.0..1.0);
            curve.push((d, g * fuzz));
        }
    } else {
        let mu = rng.random_range(0.1..0.6);
        for &d in &deltas {
            let g = gain_classical(mu, d).expect("valid synthetic point");
            let fuzz = 1.0 + noise * rng.random_range(-1.0..1.0);
            curve.push((d, g * fuzz));
        }
    }
    curve
}
