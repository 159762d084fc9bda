//! Numeric reduction of a continuous piecewise-smooth map to the
//! piecewise-linear normal form.
//!
//! A candidate map iterates `z -> f(z, nu)` with two smooth pieces
//! separated by the zero set of a border function `beta(z, nu)` (the upper
//! piece applies where `beta >= 0`; the pieces must agree on the border).
//! At a parameter value `nu_bif` where a fixed point sits exactly on the
//! border, the coordinate change
//!
//! ```text
//! x = R (z - z_bif) + (nu - nu_bif) b,      mu = nu - nu_bif
//! ```
//!
//! with `R` chosen so `R * grad(beta) = e1` and `b = (d beta / d nu) e1`,
//! turns the linearized map into the normal form `x -> A x + c mu` /
//! `B x + c mu` with
//!
//! ```text
//! A = R Df_upper R^-1,   B = R Df_lower R^-1,
//! c = (I - A) b + R (d f_upper / d nu)  =  (I - B) b + R (d f_lower / d nu).
//! ```
//!
//! The two expressions for `c` agree because the pieces agree on the
//! border; their disagreement is reported as `c_residual` and doubles as a
//! continuity diagnostic. All derivatives are central finite differences.
//!
//! The border function is rescaled internally to unit gradient at the
//! bifurcation point (the border itself is unchanged). This makes the
//! first row of `R` the unit border normal, so the first normal-form
//! coordinate measures physical displacement along the border normal and
//! gains computed downstream stay in the units of the border coordinate.
//! It is also what makes the two expressions for `c` agree when the border
//! moves with the parameter: without the rescaling they differ by
//! `R w (d beta/d nu)(|grad beta|^2 - 1)` for pieces separated by
//! `beta * w`.

use crate::error::{Error, Result};
use crate::matrix::{self, norm2, Matrix};
use crate::normal_form::NormalFormMap;

/// Relative step used by all central differences.
const FD_STEP: f64 = 1e-6;

/// Residual allowed between the two expressions for `c`, and for the
/// off-first columns of `B - A` before symmetrization.
const REDUCE_CONTINUITY_TOL: f64 = 1e-6;

/// Fixed-point solve tolerance (relative to `1 + |z|`).
const FP_TOL: f64 = 1e-12;

type PieceFn = Box<dyn Fn(&[f64], f64) -> Vec<f64> + Send + Sync>;
type BorderFn = Box<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

/// A two-piece continuous map with a smooth border function.
pub struct PiecewiseSmoothMap {
    dim: usize,
    upper: PieceFn,
    lower: PieceFn,
    border: BorderFn,
}

impl PiecewiseSmoothMap {
    pub fn new(
        dim: usize,
        upper: impl Fn(&[f64], f64) -> Vec<f64> + Send + Sync + 'static,
        lower: impl Fn(&[f64], f64) -> Vec<f64> + Send + Sync + 'static,
        border: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            upper: Box::new(upper),
            lower: Box::new(lower),
            border: Box::new(border),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn upper(&self, z: &[f64], nu: f64) -> Vec<f64> {
        (self.upper)(z, nu)
    }

    pub fn lower(&self, z: &[f64], nu: f64) -> Vec<f64> {
        (self.lower)(z, nu)
    }

    pub fn border(&self, z: &[f64], nu: f64) -> f64 {
        (self.border)(z, nu)
    }

    /// Full map: the upper piece where the border function is nonnegative.
    pub fn evaluate(&self, z: &[f64], nu: f64) -> Vec<f64> {
        if self.border(z, nu) >= 0.0 {
            self.upper(z, nu)
        } else {
            self.lower(z, nu)
        }
    }
}

/// Output of a successful reduction.
pub struct ReductionResult {
    pub normal: NormalFormMap,
    /// The coordinate rotation `R`; maps the unit border normal to `e1`.
    pub rotation: Matrix,
    /// Per-unit-`mu` offset `b = (d beta / d nu) e1`, in unit-gradient
    /// border units.
    pub parameter_shift: Vec<f64>,
    pub z_bif: Vec<f64>,
    pub nu_bif: f64,
    /// Disagreement between the two expressions for `c`.
    pub c_residual: f64,
}

impl ReductionResult {
    /// Maps original coordinates into normal-form coordinates:
    /// `(x, mu) = (R (z - z_bif) + mu b, nu - nu_bif)`.
    pub fn to_normal_coordinates(&self, z: &[f64], nu: f64) -> (Vec<f64>, f64) {
        let mu = nu - self.nu_bif;
        let shifted = matrix::sub_vec(z, &self.z_bif);
        let mut x = self.rotation.mul_vec(&shifted).expect("dimension fixed");
        for (xi, bi) in x.iter_mut().zip(&self.parameter_shift) {
            *xi += mu * bi;
        }
        (x, mu)
    }
}

/// Central-difference Jacobian of a smooth piece with respect to `z`,
/// step `1e-6 (1 + |z_i|)` per component.
pub fn jacobian(f: &dyn Fn(&[f64], f64) -> Vec<f64>, z: &[f64], nu: f64) -> Result<Matrix> {
    let m = z.len();
    let mut out = Matrix::zeros(m, m);
    for j in 0..m {
        let h = FD_STEP * (1.0 + z[j].abs());
        let mut zp = z.to_vec();
        zp[j] += h;
        let mut zm = z.to_vec();
        zm[j] -= h;
        let fp = checked_eval(f, &zp, nu, m)?;
        let fm = checked_eval(f, &zm, nu, m)?;
        for i in 0..m {
            out.set(i, j, (fp[i] - fm[i]) / (2.0 * h));
        }
    }
    Ok(out)
}

/// Central-difference derivative of a smooth piece with respect to the
/// parameter.
pub fn parameter_derivative(
    f: &dyn Fn(&[f64], f64) -> Vec<f64>,
    z: &[f64],
    nu: f64,
) -> Result<Vec<f64>> {
    let m = z.len();
    let h = FD_STEP * (1.0 + nu.abs());
    let fp = checked_eval(f, z, nu + h, m)?;
    let fm = checked_eval(f, z, nu - h, m)?;
    Ok(fp
        .iter()
        .zip(&fm)
        .map(|(p, q)| (p - q) / (2.0 * h))
        .collect())
}

fn checked_eval(
    f: &dyn Fn(&[f64], f64) -> Vec<f64>,
    z: &[f64],
    nu: f64,
    dim: usize,
) -> Result<Vec<f64>> {
    let v = f(z, nu);
    if v.len() != dim {
        return Err(Error::EvaluationFailure(format!(
            "piece returned {} components, expected {dim}",
            v.len()
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::EvaluationFailure(
            "piece returned non-finite values".into(),
        ));
    }
    Ok(v)
}

fn border_gradient(map: &PiecewiseSmoothMap, z: &[f64], nu: f64) -> Result<Vec<f64>> {
    let m = z.len();
    let mut grad = Vec::with_capacity(m);
    for j in 0..m {
        let h = FD_STEP * (1.0 + z[j].abs());
        let mut zp = z.to_vec();
        zp[j] += h;
        let mut zm = z.to_vec();
        zm[j] -= h;
        let g = (map.border(&zp, nu) - map.border(&zm, nu)) / (2.0 * h);
        if !g.is_finite() {
            return Err(Error::EvaluationFailure(
                "border function returned non-finite values".into(),
            ));
        }
        grad.push(g);
    }
    Ok(grad)
}

fn border_parameter_derivative(map: &PiecewiseSmoothMap, z: &[f64], nu: f64) -> Result<f64> {
    let h = FD_STEP * (1.0 + nu.abs());
    let d = (map.border(z, nu + h) - map.border(z, nu - h)) / (2.0 * h);
    if !d.is_finite() {
        return Err(Error::EvaluationFailure(
            "border function returned non-finite values".into(),
        ));
    }
    Ok(d)
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Side {
    Upper,
    Lower,
}

fn piece(map: &PiecewiseSmoothMap, side: Side) -> &(dyn Fn(&[f64], f64) -> Vec<f64> + Send + Sync) {
    match side {
        Side::Upper => &*map.upper,
        Side::Lower => &*map.lower,
    }
}

/// Fixed point of one smooth piece at parameter `nu`: damped Newton with
/// finite-difference Jacobians, falling back to direct iteration when
/// Newton stalls (the pieces of interest are contractive near the tracked
/// branch).
fn piece_fixed_point(
    map: &PiecewiseSmoothMap,
    side: Side,
    nu: f64,
    guess: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let m = map.dim();
    let f = piece(map, side);
    let mut z: Vec<f64> = guess.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; m]);

    let residual = |z: &[f64]| -> Result<Vec<f64>> {
        let fz = checked_eval(f, z, nu, m)?;
        Ok(matrix::sub_vec(&fz, z))
    };

    let mut r = residual(&z)?;
    for _ in 0..100 {
        let rn = norm2(&r);
        if rn <= FP_TOL * (1.0 + norm2(&z)) {
            return Ok(z);
        }
        let mut jac = jacobian(f, &z, nu)?;
        for i in 0..m {
            let v = jac.get(i, i) - 1.0;
            jac.set(i, i, v);
        }
        let step = match jac.lu_solve(&r) {
            Ok(s) => s,
            Err(_) => break,
        };
        // Damped update: shrink until the residual improves.
        let mut t = 1.0;
        let mut advanced = false;
        while t >= 1.0 / 1024.0 {
            let cand = matrix::sub_vec(&z, &matrix::scale_vec(&step, t));
            if let Ok(rc) = residual(&cand) {
                if norm2(&rc) < rn {
                    z = cand;
                    r = rc;
                    advanced = true;
                    break;
                }
            }
            t /= 2.0;
        }
        if !advanced {
            break;
        }
    }

    // Fallback: direct iteration for contractive pieces.
    for _ in 0..500 {
        let next = checked_eval(f, &z, nu, m)?;
        if norm2(&next) > 1e12 * (1.0 + norm2(&z)) {
            break;
        }
        z = next;
    }
    let r = residual(&z)?;
    if norm2(&r) <= 1e-9 * (1.0 + norm2(&z)) {
        Ok(z)
    } else {
        Err(Error::NoConvergence(format!(
            "fixed-point solve stalled at residual {:.3e}",
            norm2(&r)
        )))
    }
}

fn piece_is_stable(map: &PiecewiseSmoothMap, side: Side, z: &[f64], nu: f64) -> Result<bool> {
    let jac = jacobian(piece(map, side), z, nu)?;
    Ok(jac.eigenvalues()?.iter().all(|l| l.norm() < 1.0))
}

/// Picks the piece whose fixed point the sweep should track: the one with a
/// stable fixed point at `nu` (upper wins ties), falling back to whichever
/// piece admits a fixed point at all.
fn select_tracking_side(map: &PiecewiseSmoothMap, nu: f64) -> Result<(Side, Vec<f64>)> {
    let mut solvable: Option<(Side, Vec<f64>)> = None;
    for side in [Side::Upper, Side::Lower] {
        match piece_fixed_point(map, side, nu, None) {
            Ok(fp) => {
                if piece_is_stable(map, side, &fp, nu).unwrap_or(false) {
                    return Ok((side, fp));
                }
                if solvable.is_none() {
                    solvable = Some((side, fp));
                }
            }
            Err(_) => continue,
        }
    }
    solvable.ok_or_else(|| {
        Error::NoConvergence("neither piece admits a fixed point at the sweep endpoint".into())
    })
}

/// Locates the parameter value where the tracked fixed point crosses the
/// border, by bisection on the border value of the per-parameter fixed
/// point.
pub fn locate_border_fixed_point(
    map: &PiecewiseSmoothMap,
    nu_lo: f64,
    nu_hi: f64,
) -> Result<(Vec<f64>, f64)> {
    if !nu_lo.is_finite() || !nu_hi.is_finite() || nu_lo >= nu_hi {
        return Err(Error::InvalidParameter(format!(
            "need nu_lo < nu_hi, got [{nu_lo}, {nu_hi}]"
        )));
    }
    let (side, fp_lo) = select_tracking_side(map, nu_lo)?;

    let mut warm = fp_lo.clone();
    let eval = |nu: f64, warm: &mut Vec<f64>| -> Result<(f64, Vec<f64>)> {
        let fp = piece_fixed_point(map, side, nu, Some(warm))?;
        let g = map.border(&fp, nu);
        *warm = fp.clone();
        Ok((g, fp))
    };

    let (g_lo, fp_lo) = (map.border(&fp_lo, nu_lo), fp_lo);
    let (g_hi, fp_hi) = eval(nu_hi, &mut warm)?;
    if g_lo == 0.0 {
        return finish_location(map, fp_lo, nu_lo);
    }
    if g_hi == 0.0 {
        return finish_location(map, fp_hi, nu_hi);
    }
    if g_lo.signum() == g_hi.signum() {
        return Err(Error::NoBracket(format!(
            "border value has the same sign at both sweep endpoints \
             ({g_lo:.6e} at {nu_lo}, {g_hi:.6e} at {nu_hi})"
        )));
    }

    let mut lo = nu_lo;
    let mut hi = nu_hi;
    let mut sign_lo = g_lo.signum();
    let mut best = (fp_lo, nu_lo);
    warm = best.0.clone();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let (g_mid, fp_mid) = eval(mid, &mut warm)?;
        best = (fp_mid, mid);
        if g_mid == 0.0 || (hi - lo) <= 1e-12 * (1.0 + mid.abs()) {
            break;
        }
        if g_mid.signum() == sign_lo {
            lo = mid;
            sign_lo = g_mid.signum();
        } else {
            hi = mid;
        }
    }
    finish_location(map, best.0, best.1)
}

fn finish_location(
    map: &PiecewiseSmoothMap,
    z_bif: Vec<f64>,
    nu_bif: f64,
) -> Result<(Vec<f64>, f64)> {
    let beta = map.border(&z_bif, nu_bif);
    let image = map.evaluate(&z_bif, nu_bif);
    let fp_residual = norm2(&matrix::sub_vec(&image, &z_bif));
    if beta.abs() > 1e-9 || fp_residual > 1e-9 {
        return Err(Error::NoConvergence(format!(
            "border fixed point inaccurate: |beta| = {:.3e}, fixed-point residual = {:.3e}",
            beta.abs(),
            fp_residual
        )));
    }
    Ok((z_bif, nu_bif))
}

/// Performs the coordinate change at a located border fixed point.
pub fn normal_form_reduce(
    map: &PiecewiseSmoothMap,
    z_bif: &[f64],
    nu_bif: f64,
) -> Result<ReductionResult> {
    let m = map.dim();
    if z_bif.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "z_bif has length {}, expected {m}",
            z_bif.len()
        )));
    }

    let grad = border_gradient(map, z_bif, nu_bif)?;
    let grad_norm = norm2(&grad);
    if grad_norm <= 1e-8 {
        return Err(Error::DegenerateBorder);
    }

    // Work with the border rescaled to unit gradient; the first row of R is
    // then the unit normal and the remaining rows complete orthonormally.
    let unit_grad = matrix::scale_vec(&grad, 1.0 / grad_norm);
    let mut rows: Vec<Vec<f64>> = vec![unit_grad.clone()];
    let mut basis: Vec<Vec<f64>> = vec![unit_grad.clone()];
    for j in 0..m {
        if rows.len() == m {
            break;
        }
        let mut v = vec![0.0; m];
        v[j] = 1.0;
        for u in &basis {
            let proj = matrix::dot(&v, u);
            v = matrix::sub_vec(&v, &matrix::scale_vec(u, proj));
        }
        let vn = norm2(&v);
        if vn > 1e-8 {
            let unit = matrix::scale_vec(&v, 1.0 / vn);
            basis.push(unit.clone());
            rows.push(unit);
        }
    }
    if rows.len() != m {
        return Err(Error::DegenerateBorder);
    }
    let rotation = Matrix::from_rows(&rows)?;
    let rotation_inv = rotation.inverse()?;

    let dbeta_dnu = border_parameter_derivative(map, z_bif, nu_bif)? / grad_norm;
    let mut parameter_shift = vec![0.0; m];
    parameter_shift[0] = dbeta_dnu;

    let jac_upper = jacobian(&*map.upper, z_bif, nu_bif)?;
    let jac_lower = jacobian(&*map.lower, z_bif, nu_bif)?;
    let a = rotation.mul(&jac_upper)?.mul(&rotation_inv)?;
    let b_raw = rotation.mul(&jac_lower)?.mul(&rotation_inv)?;

    let dnu_upper = parameter_derivative(&*map.upper, z_bif, nu_bif)?;
    let dnu_lower = parameter_derivative(&*map.lower, z_bif, nu_bif)?;
    let c_from = |mat: &Matrix, dnu: &[f64]| -> Result<Vec<f64>> {
        let shift_term = matrix::sub_vec(&parameter_shift, &mat.mul_vec(&parameter_shift)?);
        Ok(matrix::add_vec(&shift_term, &rotation.mul_vec(dnu)?))
    };
    let c_upper = c_from(&a, &dnu_upper)?;
    let c_lower = c_from(&b_raw, &dnu_lower)?;
    let c_residual = norm2(&matrix::sub_vec(&c_upper, &c_lower));
    if c_residual > REDUCE_CONTINUITY_TOL {
        return Err(Error::ContinuityViolation(c_residual));
    }
    let c: Vec<f64> = c_upper
        .iter()
        .zip(&c_lower)
        .map(|(u, l)| 0.5 * (u + l))
        .collect();

    // Continuity forces columns 2..m of B - A to vanish; verify up to
    // finite-difference noise, then rebuild them exactly from A so the
    // normal form carries the structure without that noise.
    let scale = a.frobenius_norm() + b_raw.frobenius_norm();
    let mut b = b_raw.clone();
    for j in 1..m {
        let col_norm: f64 = (0..m)
            .map(|i| {
                let d = b_raw.get(i, j) - a.get(i, j);
                d * d
            })
            .sum::<f64>()
            .sqrt();
        if col_norm > REDUCE_CONTINUITY_TOL * scale.max(1.0) {
            return Err(Error::ContinuityViolation(col_norm));
        }
        for i in 0..m {
            b.set(i, j, a.get(i, j));
        }
    }

    let normal = NormalFormMap::new(a, b, c)?;
    Ok(ReductionResult {
        normal,
        rotation,
        parameter_shift,
        z_bif: z_bif.to_vec(),
        nu_bif,
        c_residual,
    })
}
