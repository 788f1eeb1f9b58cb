//! Error function family and Gaussian pdf/cdf.
//!
//! `erf`/`erfc` use the fdlibm rational approximations (Sun Microsystems,
//! freely redistributable), which are accurate to about one ulp in `f64`.
//! `erfinv`/`erfcinv` start from a short polynomial guess in
//! `w = -ln(1 - y^2)` and polish it with Halley steps against `erf`/`erfc`.

use crate::error::{Error, Result};
use crate::scalar::Real;

const ERX: f64 = 8.45062911510467529297e-01;
const EFX: f64 = 1.28379167095512586316e-01;

// erf on [0, 0.84375]
const PP: [f64; 5] = [
    1.28379167095512558561e-01,
    -3.25042107247001499370e-01,
    -2.84817495755985104766e-02,
    -5.77027029648944159157e-03,
    -2.37630166566501626084e-05,
];
const QQ: [f64; 6] = [
    1.0,
    3.97917223959155352819e-01,
    6.50222499887672944485e-02,
    5.08130628187576562776e-03,
    1.32494738004321644526e-04,
    -3.96022827877536812320e-06,
];

// erf on [0.84375, 1.25]
const PA: [f64; 7] = [
    -2.36211856075265944077e-03,
    4.14856118683748331666e-01,
    -3.72207876035701323847e-01,
    3.18346619901161753674e-01,
    -1.10894694282396677476e-01,
    3.54783043256182359371e-02,
    -2.16637559486879084300e-03,
];
const QA: [f64; 7] = [
    1.0,
    1.06420880400844228286e-01,
    5.40397917702171048937e-01,
    7.18286544141962662868e-02,
    1.26171219808761642112e-01,
    1.36370839120290507362e-02,
    1.19844998467991074170e-02,
];

// erfc on [1.25, 1/0.35]
const RA: [f64; 8] = [
    -9.86494403484714822705e-03,
    -6.93858572707181764372e-01,
    -1.05586262253232909814e+01,
    -6.23753324503260060396e+01,
    -1.62396669462573470355e+02,
    -1.84605092906711035994e+02,
    -8.12874355063065934246e+01,
    -9.81432934416914548592e+00,
];
const SA: [f64; 9] = [
    1.0,
    1.96512716674392571292e+01,
    1.37657754143519042600e+02,
    4.34565877475229228821e+02,
    6.45387271733267880336e+02,
    4.29008140027567833386e+02,
    1.08635005541779435134e+02,
    6.57024977031928170135e+00,
    -6.04244152148580987438e-02,
];

// erfc on [1/0.35, 28]
const RB: [f64; 7] = [
    -9.86494292470009928597e-03,
    -7.99283237680523006574e-01,
    -1.77579549177547519889e+01,
    -1.60636384855821916062e+02,
    -6.37566443368389627722e+02,
    -1.02509513161107724954e+03,
    -4.83519191608651397019e+02,
];
const SB: [f64; 8] = [
    1.0,
    3.03380607434824582924e+01,
    3.25792512996573918826e+02,
    1.53672958608443695994e+03,
    3.19985821950859553908e+03,
    2.55305040643316442583e+03,
    4.74528541206955367215e+02,
    -2.24409524465858183362e+01,
];

#[inline]
fn horner<T: Real>(coeffs: &[f64], x: T) -> T {
    coeffs
        .iter()
        .rev()
        .fold(T::zero(), |acc, &c| acc * x + T::of(c))
}

/// `erfc(x) * x * exp(x^2)` style tail for `|x| >= 1.25`; returns erfc(|x|).
fn erfc_tail<T: Real>(ax: T) -> T {
    let s = T::one() / (ax * ax);
    let (r, q) = if ax < T::of(1.0 / 0.35) {
        (horner(&RA, s), horner(&SA, s))
    } else {
        (horner(&RB, s), horner(&SB, s))
    };
    // split ax so that z*z is exact and exp(-x^2) keeps full relative precision
    let scale = T::of(65536.0);
    let z = (ax * scale).trunc() / scale;
    (-z * z - T::of(0.5625)).exp() * ((z - ax) * (z + ax) + r / q).exp() / ax
}

/// Error function `2/sqrt(pi) * int_0^x exp(-t^2) dt`.
pub fn erf<T: Real>(x: T) -> T {
    if x.is_nan() {
        return x;
    }
    let ax = x.abs();
    let v = if ax < T::of(0.84375) {
        if ax < T::of(3.7252902984619140625e-9) {
            ax + T::of(EFX) * ax
        } else {
            let z = ax * ax;
            ax + ax * (horner(&PP, z) / horner(&QQ, z))
        }
    } else if ax < T::of(1.25) {
        let s = ax - T::one();
        T::of(ERX) + horner(&PA, s) / horner(&QA, s)
    } else if ax >= T::of(6.0) {
        T::one()
    } else {
        T::one() - erfc_tail(ax)
    };
    if x.is_sign_negative() {
        -v
    } else {
        v
    }
}

/// Complementary error function `1 - erf(x)`, accurate in the right tail.
pub fn erfc<T: Real>(x: T) -> T {
    if x.is_nan() {
        return x;
    }
    let ax = x.abs();
    let neg = x < T::zero();
    let two = T::of(2.0);
    if ax < T::of(0.84375) {
        let z = ax * ax;
        let y = horner(&PP, z) / horner(&QQ, z);
        let e = ax + ax * y;
        return if neg { T::one() + e } else { T::one() - e };
    }
    if ax < T::of(1.25) {
        let s = ax - T::one();
        let p = horner(&PA, s) / horner(&QA, s);
        return if neg {
            T::one() + T::of(ERX) + p
        } else {
            T::one() - T::of(ERX) - p
        };
    }
    if ax < T::of(28.0) {
        if neg && ax > T::of(6.0) {
            return two;
        }
        let r = erfc_tail(ax);
        return if neg { two - r } else { r };
    }
    if neg {
        two
    } else {
        T::zero()
    }
}

/// Polynomial guess for erfinv, parameterised by `w = -ln((1-y)(1+y))`.
fn erfinv_guess<T: Real>(w: T) -> T {
    if w < T::of(5.0) {
        let w = w - T::of(2.5);
        horner(
            &[
                1.50140941,
                0.246640727,
                -0.00417768164,
                -0.00125372503,
                0.00021858087,
                -4.39150654e-06,
                -3.5233877e-06,
                3.43273939e-07,
                2.81022636e-08,
            ],
            w,
        )
    } else if w < T::of(36.0) {
        let w = w.sqrt() - T::of(3.0);
        horner(
            &[
                2.83297682,
                1.00167406,
                0.00943887047,
                -0.0076224613,
                0.00573950773,
                -0.00367342844,
                0.00134934322,
                0.000100950558,
                -0.000200214257,
            ],
            w,
        )
    } else {
        // deep tail: erfc(x) ~ exp(-x^2) / (x sqrt(pi)) with erfc(x) ~ exp(-w) / 2
        let lq = w + T::LN_2();
        let x0 = lq.sqrt();
        (lq - (x0 * T::PI().sqrt()).ln()).sqrt()
    }
}

const POLISH_STEPS: usize = 3;

/// Solves `erf(x) = y` for `y >= 0`; `q = 1 - y` is passed separately so the
/// tail can be handled through `erfc` without cancellation.
fn erfinv_nonneg<T: Real>(y: T, q: T) -> T {
    let w = -(q * (T::of(2.0) - q)).ln();
    let mut x = if w.is_finite() {
        erfinv_guess(w) * y
    } else {
        T::zero()
    };
    if y == T::zero() {
        return T::zero();
    }
    let half_sqrt_pi = T::PI().sqrt() / T::of(2.0);
    for _ in 0..POLISH_STEPS {
        // residual of erf(x) - y, computed through erfc in the upper half
        let r = if y > T::of(0.5) {
            q - erfc(x)
        } else {
            erf(x) - y
        };
        let d = r * half_sqrt_pi * (x * x).exp();
        if !d.is_finite() {
            break;
        }
        x = x - d / (T::one() + x * d);
    }
    x
}

/// Inverse error function on the open interval (-1, 1).
///
/// Returns [`Error::Domain`] for `|y| >= 1` or NaN; callers handle the
/// boundary limits themselves. `erfinv(-y) == -erfinv(y)` bit for bit.
pub fn erfinv<T: Real>(y: T) -> Result<T> {
    if !(y.abs() < T::one()) {
        return Err(Error::Domain(format!(
            "erfinv argument {y} outside (-1, 1)"
        )));
    }
    let ay = y.abs();
    let x = erfinv_nonneg(ay, T::one() - ay);
    Ok(if y.is_sign_negative() { -x } else { x })
}

/// Inverse of `erfc` on (0, 2).
pub fn erfcinv<T: Real>(q: T) -> Result<T> {
    if !(q > T::zero() && q < T::of(2.0)) {
        return Err(Error::Domain(format!(
            "erfcinv argument {q} outside (0, 2)"
        )));
    }
    if q <= T::one() {
        Ok(erfinv_nonneg(T::one() - q, q))
    } else {
        let q2 = T::of(2.0) - q;
        Ok(-erfinv_nonneg(T::one() - q2, q2))
    }
}

/// Standard normal density.
pub fn norm_pdf<T: Real>(x: T) -> T {
    (-(x * x) / T::of(2.0)).exp() / (T::of(2.0) * T::PI()).sqrt()
}

/// Standard normal distribution function.
pub fn norm_cdf<T: Real>(x: T) -> T {
    erfc(-x / T::SQRT_2()) / T::of(2.0)
}
