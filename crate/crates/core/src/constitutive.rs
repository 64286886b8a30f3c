//! Pointwise constitutive laws.
//!
//! The activated Euler fluid is described through its stress-to-rate map
//!
//! ```text
//! D = alpha_g(|S|) S,   alpha_g(s) = alpha + Eu / sqrt(s^2 + eps^2)
//! ```
//!
//! in non-dimensional form. Every other map in this module (the unregularized
//! dichotomy, the scalar inversion used for initial guesses and
//! post-processing, the Newton tangent) is derived from that relation. The
//! Bingham laws are provided as the dual model.

use crate::error::{Error, Result};
use crate::tensor::SymTensor2;

/// Non-dimensional groups of the flow problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstitutiveParams {
    /// Fluidity ratio.
    pub alpha: f64,
    /// Activation number (threshold on |D|).
    pub eu: f64,
    /// Regularization.
    pub eps: f64,
    /// Reynolds-like number multiplying the convective term.
    pub re: f64,
    /// Body-force number.
    pub ga: f64,
}

impl ConstitutiveParams {
    pub fn new(alpha: f64, eu: f64, eps: f64, re: f64, ga: f64) -> Self {
        Self {
            alpha,
            eu,
            eps,
            re,
            ga,
        }
    }

    /// Navier-Stokes fluid with unit fluidity and no body force.
    pub fn navier_stokes(re: f64) -> Self {
        Self::new(1.0, 0.0, 1e-3, re, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be positive");
        }
        if !(self.eu >= 0.0 && self.eu.is_finite()) {
            return bad("Eu must be non-negative");
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return bad("eps must be positive for the regularized model");
        }
        if !(self.re >= 0.0 && self.re.is_finite()) {
            return bad("Re must be non-negative");
        }
        if !(self.ga >= 0.0 && self.ga.is_finite()) {
            return bad("Ga must be non-negative");
        }
        Ok(())
    }
}

/// `alpha + Eu / sqrt(s^2 + eps^2)`.
#[inline]
pub fn generalized_fluidity(s_norm: f64, p: &ConstitutiveParams) -> f64 {
    p.alpha + p.eu / (s_norm * s_norm + p.eps * p.eps).sqrt()
}

/// Derivative of [`generalized_fluidity`] with respect to `s`.
#[inline]
pub fn generalized_fluidity_derivative(s_norm: f64, p: &ConstitutiveParams) -> f64 {
    let r2 = s_norm * s_norm + p.eps * p.eps;
    -p.eu * s_norm / (r2 * r2.sqrt())
}

/// Regularized activated Euler law `D = alpha_g(|S|) S`.
pub fn d_from_s_regularized(s: SymTensor2, p: &ConstitutiveParams) -> SymTensor2 {
    generalized_fluidity(s.norm(), p) * s
}

/// Unregularized activated Euler law `S = (1/alpha) [|D| - Eu]_+ D/|D|`,
/// the inverse of `D = alpha S + Eu S/|S|`.
pub fn s_from_d_unregularized(d: SymTensor2, p: &ConstitutiveParams) -> SymTensor2 {
    let dn = d.norm();
    if dn <= p.eu || dn == 0.0 {
        return SymTensor2::ZERO;
    }
    ((dn - p.eu) / (p.alpha * dn)) * d
}

const SCALAR_TOL: f64 = 1e-14;
const SCALAR_MAX_ITER: usize = 200;

/// Solves `s (alpha + eu / sqrt(s^2 + eps^2)) = d` for `s >= 0`.
///
/// The left side is strictly increasing and concave on `[0, inf)`, so the
/// root is bracketed by `[0, d / alpha]`; Newton steps that leave the bracket
/// fall back to bisection.
pub fn invert_fluidity_scalar(d: f64, alpha: f64, eu: f64, eps: f64) -> Result<f64> {
    if d <= 0.0 {
        return Ok(0.0);
    }
    if eu == 0.0 {
        return Ok(d / alpha);
    }
    let g = |s: f64| {
        let r = (s * s + eps * eps).sqrt();
        (
            s * (alpha + eu / r) - d,
            alpha + eu * eps * eps / (r * r * r),
        )
    };
    let (mut lo, mut hi) = (0.0_f64, d / alpha);
    // start from the unregularized answer when it is inside the bracket
    let mut s = if d > eu {
        (d - eu) / alpha
    } else {
        d * eps / eu
    };
    s = s.clamp(lo, hi);
    for _ in 0..SCALAR_MAX_ITER {
        let (f, df) = g(s);
        if f == 0.0 {
            return Ok(s);
        }
        if f > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let mut next = s - f / df;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let step = (next - s).abs();
        s = next;
        if step <= SCALAR_TOL * s || hi - lo <= SCALAR_TOL * hi {
            return Ok(s);
        }
    }
    Err(Error::ScalarSolve {
        iterations: SCALAR_MAX_ITER,
        target: d,
    })
}

/// Inverse of the regularized law: the `S` parallel to `D` with
/// `alpha_g(|S|) S = D`.
pub fn s_from_d_regularized(d: SymTensor2, p: &ConstitutiveParams) -> Result<SymTensor2> {
    let dn = d.norm();
    if dn == 0.0 {
        return Ok(SymTensor2::ZERO);
    }
    if p.eu == 0.0 {
        return Ok((1.0 / p.alpha) * d);
    }
    let s = invert_fluidity_scalar(dn, p.alpha, p.eu, p.eps)?;
    Ok((s / dn) * d)
}

/// Derivative of the regularized law, acting on the `(xx, xy)` components.
///
/// `m[c][d] = dD_c / dS_d`. Because the Frobenius pairing weights both
/// components by 2, the bilinear form `T : (dD/dS) U` is `2 T^T m U`, which is
/// symmetric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourthOrderTangent {
    pub m: [[f64; 2]; 2],
}

impl FourthOrderTangent {
    pub fn apply(&self, u: SymTensor2) -> SymTensor2 {
        SymTensor2::new(
            self.m[0][0] * u.xx + self.m[0][1] * u.xy,
            self.m[1][0] * u.xx + self.m[1][1] * u.xy,
        )
    }

    /// Eigenvalues (ascending) of the symmetric component matrix.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let [[a, b], [_, d]] = self.m;
        let mean = 0.5 * (a + d);
        let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        [mean - rad, mean + rad]
    }
}

/// `alpha_g(|S|) Id + alpha_g'(|S|) (S (x) S) / |S|`; at `S = 0` the limit
/// `alpha_g(0) Id`.
pub fn constitutive_tangent(s: SymTensor2, p: &ConstitutiveParams) -> FourthOrderTangent {
    let sn = s.norm();
    let ag = generalized_fluidity(sn, p);
    let mut m = [[ag, 0.0], [0.0, ag]];
    if sn > 0.0 {
        // alpha_g'(s)/s stays bounded as s -> 0 because eps > 0
        let r2 = sn * sn + p.eps * p.eps;
        let coef = -2.0 * p.eu / (r2 * r2.sqrt());
        let off = coef * s.xx * s.xy;
        m[0][0] += coef * s.xx * s.xx;
        m[1][1] += coef * s.xy * s.xy;
        m[0][1] += off;
        m[1][0] += off;
    }
    FourthOrderTangent { m }
}

/// Bercovier-Engelman regularized Bingham law
/// `S = 2 nu D + sigma D / sqrt(|D|^2 + eps^2)`.
pub fn bingham_s_from_d_regularized(d: SymTensor2, nu: f64, sigma: f64, eps: f64) -> SymTensor2 {
    let dn = d.norm();
    (2.0 * nu + sigma / (dn * dn + eps * eps).sqrt()) * d
}

/// Bingham rate as a single-valued function of stress:
/// `D = (1 / 2nu) [|S| - sigma]_+ S/|S|`.
pub fn bingham_d_from_s_unregularized(s: SymTensor2, nu: f64, sigma: f64) -> SymTensor2 {
    let sn = s.norm();
    if sn <= sigma || sn == 0.0 {
        return SymTensor2::ZERO;
    }
    ((sn - sigma) / (2.0 * nu * sn)) * s
}

/// Dimensional material data and characteristic scales.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionalParams {
    pub rho: f64,
    pub alpha: f64,
    pub tau: f64,
    pub eps: f64,
    pub force: f64,
    pub u_c: f64,
    pub l_c: f64,
}

/// Characteristic quantities fixed by the shear rate `U_c / L_c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacteristicScales {
    pub shear_rate: f64,
    pub stress: f64,
    pub fluidity: f64,
}

/// Non-dimensional groups from dimensional data. The characteristic stress
/// solves `alpha_g*(sigma_c) sigma_c = U_c / L_c`, and the characteristic
/// fluidity is `alpha_g*(sigma_c)`.
pub fn nondimensionalize(
    dim: &DimensionalParams,
) -> Result<(ConstitutiveParams, CharacteristicScales)> {
    let positive = [dim.alpha, dim.u_c, dim.l_c];
    if positive.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidParameter(
            "fluidity and characteristic scales must be positive".into(),
        ));
    }
    if dim.rho < 0.0 || dim.tau < 0.0 || dim.eps < 0.0 || dim.force < 0.0 {
        return Err(Error::InvalidParameter(
            "density, threshold, regularization and force must be non-negative".into(),
        ));
    }
    if dim.tau > 0.0 && dim.eps == 0.0 {
        return Err(Error::InvalidParameter(
            "a positive threshold needs a positive regularization".into(),
        ));
    }
    let shear_rate = dim.u_c / dim.l_c;
    let stress = invert_fluidity_scalar(shear_rate, dim.alpha, dim.tau, dim.eps)?;
    let fluidity = shear_rate / stress;
    let params = ConstitutiveParams {
        re: dim.rho * fluidity * dim.l_c * dim.u_c,
        alpha: dim.alpha / fluidity,
        eu: dim.tau * dim.l_c / dim.u_c,
        eps: dim.eps * fluidity * dim.l_c / dim.u_c,
        ga: fluidity * dim.rho * dim.force * dim.l_c * dim.l_c / dim.u_c,
    };
    Ok((
        params,
        CharacteristicScales {
            shear_rate,
            stress,
            fluidity,
        },
    ))
}

/// Inverse of [`nondimensionalize`] given density and characteristic scales.
pub fn redimensionalize(
    p: &ConstitutiveParams,
    rho: f64,
    u_c: f64,
    l_c: f64,
) -> Result<DimensionalParams> {
    if !(rho > 0.0 && u_c > 0.0 && l_c > 0.0) {
        return Err(Error::InvalidParameter(
            "density and scales must be positive to recover the fluidity scale".into(),
        ));
    }
    let fluidity = p.re / (rho * l_c * u_c);
    Ok(DimensionalParams {
        rho,
        alpha: p.alpha * fluidity,
        tau: p.eu * u_c / l_c,
        eps: p.eps * u_c / (fluidity * l_c),
        force: p.ga * u_c / (fluidity * rho * l_c * l_c),
        u_c,
        l_c,
    })
}
