//! Weak-threshold equations for l1 recovery with fixed support and signs.
//!
//! The fundamental characterization relates the sparsity ratio `beta_w = k/n`
//! to the critical measurement ratio `alpha_w = m/n`:
//!
//! ```text
//! (1 - beta_w) sqrt(2/pi) exp(-t^2) / alpha_w - sqrt(2) t = 0,
//! t = erfinv((1 - alpha_w) / (1 - beta_w))
//! ```
//!
//! The perturbed variants carry the small epsilon constants of the two
//! directions (recovery above the curve, failure below it). All roots are
//! found by a right-to-left bracket scan followed by bisection. The
//! endpoints `beta_w = 0` and `beta_w = 1` are excluded; the curve tends to
//! `alpha_w -> 0` and `alpha_w -> 1` there.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfn::erfinv;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const SQRT_2PI: f64 = 2.5066282746310002;
/// sqrt(2/pi)
const SQRT_2_OVER_PI: f64 = 0.7978845608028654;

/// Offset of the lowest scanned point above the lower end of the domain.
pub const BRACKET_OFFSET: f64 = 1e-9;
/// Resolution of the bracket scan.
pub const SCAN_STEP: f64 = 1e-3;
/// Target bracket width after bisection.
pub const ROOT_TOL: f64 = 1e-12;
/// Residual bound every returned root must meet.
pub const RESIDUAL_TOL: f64 = 1e-10;

/// A solved point `(beta_w, alpha_w)` on the weak-threshold curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPoint {
    pub beta_w: f64,
    pub alpha_w: f64,
    /// `|fundamental_lhs(beta_w, alpha_w)|`
    pub residual: f64,
    /// Sign changes seen during the bracket scan; 1 unless the root is not
    /// unique on `(beta_w, 1]`.
    pub sign_changes: usize,
}

/// Small nonnegative constants of the perturbed threshold conditions.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpsilonSet {
    pub eps1_c: f64,
    pub eps2_c: f64,
    pub eps1_m: f64,
    pub eps1_g: f64,
    pub eps3_g: f64,
    pub eps5_g: f64,
    pub eps1: f64,
    pub eps2: f64,
}

impl EpsilonSet {
    pub const ZERO: EpsilonSet = EpsilonSet {
        eps1_c: 0.0,
        eps2_c: 0.0,
        eps1_m: 0.0,
        eps1_g: 0.0,
        eps3_g: 0.0,
        eps5_g: 0.0,
        eps1: 0.0,
        eps2: 0.0,
    };

    /// Every constant set to `eps`.
    pub fn uniform(eps: f64) -> Self {
        EpsilonSet {
            eps1_c: eps,
            eps2_c: eps,
            eps1_m: eps,
            eps1_g: eps,
            eps3_g: eps,
            eps5_g: eps,
            eps1: eps,
            eps2: eps,
        }
    }

    fn values(&self) -> [(&'static str, f64); 8] {
        [
            ("eps1_c", self.eps1_c),
            ("eps2_c", self.eps2_c),
            ("eps1_m", self.eps1_m),
            ("eps1_g", self.eps1_g),
            ("eps3_g", self.eps3_g),
            ("eps5_g", self.eps5_g),
            ("eps1", self.eps1),
            ("eps2", self.eps2),
        ]
    }

    /// All constants must lie in `[0, 0.5)`.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in self.values() {
            if !(0.0..0.5).contains(&v) {
                return Err(Error::Domain(format!("{name} = {v} outside [0, 0.5)")));
            }
        }
        Ok(())
    }
}

fn check_beta(beta_w: f64) -> Result<()> {
    if beta_w > 0.0 && beta_w < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("beta_w = {beta_w} outside (0, 1)")))
    }
}

/// Left-hand side of the fundamental characterization at `theta`.
///
/// Defined for `0 <= beta_w < theta <= 1`.
pub fn fundamental_lhs(beta_w: f64, theta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&beta_w) || !(theta > beta_w && theta <= 1.0) {
        return Err(Error::Domain(format!(
            "need 0 <= beta_w < theta <= 1, got beta_w = {beta_w}, theta = {theta}"
        )));
    }
    let t = erfinv((1.0 - theta) / (1.0 - beta_w))?;
    Ok((1.0 - beta_w) * SQRT_2_OVER_PI * (-t * t).exp() / theta - SQRT_2 * t)
}

/// Perturbed theta equation.
///
/// `outer` multiplies the first term, `inner` scales the erfinv argument of
/// the second term: `(1 - eps1_c, 1 + eps1_c)` for the recovery direction and
/// `(1 + eps2_c, 1 - eps2_c)` for the failure direction.
fn perturbed_lhs(beta_w: f64, theta: f64, outer: f64, inner: f64) -> Result<f64> {
    let u = (1.0 - theta) / (1.0 - beta_w);
    let t = erfinv(u)?;
    let s = erfinv(inner * u)?;
    Ok(outer * (1.0 - beta_w) * SQRT_2_OVER_PI * (-t * t).exp() / theta - SQRT_2 * s)
}

struct Root {
    x: f64,
    residual: f64,
    sign_changes: usize,
}

/// Scans `[lo, hi]` from the right at `SCAN_STEP` and bisects the first
/// sign change. `f(hi)` is expected to be positive.
fn scan_bisect<F>(f: F, lo: f64, hi: f64) -> Result<Root>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut points = Vec::new();
    let mut j = 0usize;
    loop {
        let x = hi - j as f64 * SCAN_STEP;
        if x <= lo {
            break;
        }
        points.push(x);
        j += 1;
    }
    points.push(lo);

    let mut values = Vec::with_capacity(points.len());
    for &x in &points {
        values.push(f(x)?);
    }
    let mut bracket = None;
    let mut sign_changes = 0;
    for i in 1..values.len() {
        if (values[i - 1] > 0.0) != (values[i] > 0.0) {
            sign_changes += 1;
            if bracket.is_none() {
                bracket = Some(i);
            }
        }
    }
    let i = bracket.ok_or_else(|| Error::NoRoot(format!("no sign change on [{lo}, {hi}]")))?;

    // (a, fa) and (b, fb) straddle the root; the sign of fa matches values[i].
    let (mut a, mut b) = (points[i], points[i - 1]);
    let a_pos = values[i] > 0.0;
    let mut best = if values[i].abs() < values[i - 1].abs() {
        (a, values[i])
    } else {
        (b, values[i - 1])
    };
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = f(mid)?;
        if fm.abs() < best.1.abs() {
            best = (mid, fm);
        }
        if (fm > 0.0) == a_pos {
            a = mid;
        } else {
            b = mid;
        }
        if b - a <= ROOT_TOL && best.1.abs() <= RESIDUAL_TOL {
            break;
        }
    }
    Ok(Root {
        x: best.0,
        residual: best.1.abs(),
        sign_changes,
    })
}

/// Weak threshold `alpha_w(beta_w)` for `beta_w` in (0, 1).
pub fn weak_threshold(beta_w: f64) -> Result<ThresholdPoint> {
    check_beta(beta_w)?;
    let root = scan_bisect(|t| fundamental_lhs(beta_w, t), beta_w + BRACKET_OFFSET, 1.0)?;
    Ok(ThresholdPoint {
        beta_w,
        alpha_w: root.x,
        residual: root.residual,
        sign_changes: root.sign_changes,
    })
}

/// `theta_hat` of the recovery direction (perturbation `eps1_c`).
pub fn theta_hat_lower(beta_w: f64, eps: &EpsilonSet) -> Result<f64> {
    check_beta(beta_w)?;
    eps.validate()?;
    let e = eps.eps1_c;
    // (1 + e)(1 - theta)/(1 - beta_w) < 1
    let lo = beta_w.max(1.0 - (1.0 - beta_w) / (1.0 + e)) + BRACKET_OFFSET;
    scan_bisect(|t| perturbed_lhs(beta_w, t, 1.0 - e, 1.0 + e), lo, 1.0).map(|r| r.x)
}

/// `theta_hat` of the failure direction (perturbation `eps2_c`).
pub fn theta_hat_upper(beta_w: f64, eps: &EpsilonSet) -> Result<f64> {
    check_beta(beta_w)?;
    eps.validate()?;
    let e = eps.eps2_c;
    scan_bisect(
        |t| perturbed_lhs(beta_w, t, 1.0 + e, 1.0 - e),
        beta_w + BRACKET_OFFSET,
        1.0,
    )
    .map(|r| r.x)
}

/// Pieces shared by both alpha bounds at a given `theta_hat`.
struct BoundTerms {
    /// `sqrt(2 t^2) / exp(t^2)`
    tail: f64,
    /// `((1 - beta_w) sqrt(2/pi) exp(-t^2))^2`
    sq: f64,
}

fn bound_terms(beta_w: f64, theta: f64) -> Result<BoundTerms> {
    let t = erfinv((1.0 - theta) / (1.0 - beta_w))?;
    let e = (-t * t).exp();
    let q = (1.0 - beta_w) * SQRT_2_OVER_PI * e;
    Ok(BoundTerms {
        tail: (2.0 * t * t).sqrt() * e,
        sq: q * q,
    })
}

/// Right-hand side of the recovery condition `alpha > (...)`.
///
/// Evaluated at `theta_hat_lower`; with all constants zero it reduces to
/// `alpha_w`.
pub fn alpha_lower_bound(beta_w: f64, eps: &EpsilonSet) -> Result<f64> {
    let th = theta_hat_lower(beta_w, eps)?;
    let BoundTerms { tail, sq } = bound_terms(beta_w, th)?;
    let b = 1.0 - beta_w;
    Ok(b / SQRT_2PI * (SQRT_2PI + 2.0 * tail - SQRT_2PI * (1.0 - th) / b) + beta_w - sq / th)
}

/// Right-hand side of the failure condition `alpha < (...)`.
pub fn alpha_upper_bound(beta_w: f64, eps: &EpsilonSet) -> Result<f64> {
    let th = theta_hat_upper(beta_w, eps)?;
    let BoundTerms { tail, sq } = bound_terms(beta_w, th)?;
    let b = 1.0 - beta_w;
    let g3 = (1.0 + eps.eps3_g).powi(2);
    let inner = (1.0 - eps.eps1_g) * (th + 2.0 * b / SQRT_2PI * tail) - sq * g3 / th;
    Ok(inner / (1.0 + eps.eps1_m).powi(2))
}

/// The four perturbed quantities at once.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbedBounds {
    pub theta_hat_lower: f64,
    pub alpha_lower_bound: f64,
    pub theta_hat_upper: f64,
    pub alpha_upper_bound: f64,
}

pub fn perturbed_bounds(beta_w: f64, eps: &EpsilonSet) -> Result<PerturbedBounds> {
    Ok(PerturbedBounds {
        theta_hat_lower: theta_hat_lower(beta_w, eps)?,
        alpha_lower_bound: alpha_lower_bound(beta_w, eps)?,
        theta_hat_upper: theta_hat_upper(beta_w, eps)?,
        alpha_upper_bound: alpha_upper_bound(beta_w, eps)?,
    })
}

/// Constant in front of the exponential of the escape bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EscapeConstant {
    /// 3.5
    Original,
    /// 2.5
    Improved,
}

impl EscapeConstant {
    pub fn value(self) -> f64 {
        match self {
            EscapeConstant::Original => 3.5,
            EscapeConstant::Improved => 2.5,
        }
    }
}

/// `sqrt(m) - 1/(4 sqrt(m))`
pub fn escape_limit(m: usize) -> f64 {
    let s = (m as f64).sqrt();
    s - 1.0 / (4.0 * s)
}

/// Lower bound on `P(Y ∩ S = ∅)` for a random `(n-m)`-dimensional subspace,
/// clamped to `[0, 1]`.
///
/// Fails with [`Error::HypothesisNotMet`] when `width >= escape_limit(m)`,
/// where the bound says nothing.
pub fn escape_prob_lower_bound(width: f64, m: usize, constant: EscapeConstant) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidInput("m must be positive".into()));
    }
    if !(width >= 0.0) {
        return Err(Error::Domain(format!("width {width} must be nonnegative")));
    }
    let limit = escape_limit(m);
    if width >= limit {
        return Err(Error::HypothesisNotMet { width, limit });
    }
    let gap = limit - width;
    Ok((1.0 - constant.value() * (-gap * gap / 18.0).exp()).clamp(0.0, 1.0))
}

/// Which side of the mesh dichotomy a width places `m` on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshRegime {
    /// `width >= (1 + eps1) sqrt(m) + eps2 sqrt(n)`: the subspace hits S.
    Trapped,
    /// `width < sqrt(m) - 1/(4 sqrt(m))`: the subspace misses S.
    Escapes,
    /// Between the two conditions.
    Gap,
}

pub fn mesh_regime(width: f64, m: usize, n: usize, eps1: f64, eps2: f64) -> MeshRegime {
    let sm = (m as f64).sqrt();
    if width >= (1.0 + eps1) * sm + eps2 * (n as f64).sqrt() {
        MeshRegime::Trapped
    } else if m > 0 && width < escape_limit(m) {
        MeshRegime::Escapes
    } else {
        MeshRegime::Gap
    }
}

/// Pointwise [`weak_threshold`]; failures stay in place.
pub fn threshold_curve(betas: &[f64]) -> Vec<Result<ThresholdPoint>> {
    betas.iter().map(|&b| weak_threshold(b)).collect()
}
