//! The l1 descent cone and its Gaussian widths.
//!
//! With the support fixed to the first `k` coordinates,
//!
//! ```text
//! f(w) = sum_{i<k} w_i + sum_{i>=k} |w_i|,     S = { w : |w|_2 = 1, f(w) <= 0 }.
//! ```
//!
//! `f` is sublinear (positively homogeneous of degree 1), so `K = {f <= 0}`
//! is a closed convex cone. Two per-sample widths are computed exactly:
//!
//! * `xi(g) = min_{lambda >= 0} sqrt(D(lambda))` with
//!   `D(lambda) = sum_{i<k} (g_i - lambda)^2 + sum_{i>=k} max(|g_i| - lambda, 0)^2`,
//!   the sphere-maximized Lagrangian;
//! * `w(g) = |P_K(g)|_2`, the norm of the Euclidean projection onto `K`,
//!   which equals `max_{w in K, |w| <= 1} g^T w`.
//!
//! Both reduce to a walk over the sorted off-support magnitudes.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::scalar::{norm2, soft_threshold, Real};
use crate::seed;

/// The l1 descent functional on `R^n` with support `{0, .., k-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub n: usize,
    pub k: usize,
}

/// Homogeneity degree of every cone functional in this crate.
pub const DEGREE: u32 = 1;

/// Result of projecting onto `K = {f <= 0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection<T> {
    pub point: Vec<T>,
    /// Multiplier of the constraint `f(w) <= 0`; zero when `g` is feasible.
    pub multiplier: T,
}

/// A per-sample width with a flag for the zero-projection case, where the
/// supremum over `S` is nonpositive and is reported as zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportValue<T> {
    pub value: T,
    pub degenerate: bool,
}

impl ConeSpec {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("n must be at least 1".into()));
        }
        if k > n {
            return Err(Error::InvalidInput(format!("k = {k} exceeds n = {n}")));
        }
        Ok(ConeSpec { n, k })
    }

    pub fn degree(&self) -> u32 {
        DEGREE
    }

    pub fn f_eval<T: Real>(&self, w: &[T]) -> Result<T> {
        check_len(self.n, w.len())?;
        Ok(self.f_unchecked(w))
    }

    pub(crate) fn f_unchecked<T: Real>(&self, w: &[T]) -> T {
        let (sup, off) = w.split_at(self.k);
        sup.iter().copied().sum::<T>() + off.iter().map(|x| x.abs()).sum::<T>()
    }

    /// `w` is in `S` up to `tol`: unit norm and `f(w) <= tol`.
    pub fn membership<T: Real>(&self, w: &[T], tol: T) -> Result<bool> {
        if !(tol > T::zero()) {
            return Err(Error::InvalidInput(
                "membership tolerance must be positive".into(),
            ));
        }
        let f = self.f_eval(w)?;
        Ok((norm2(w) - T::one()).abs() <= tol && f <= tol)
    }

    /// Sum over the support and off-support magnitudes sorted descending.
    fn split<T: Real>(&self, g: &[T]) -> (T, Vec<T>) {
        let (sup, off) = g.split_at(self.k);
        let s = sup.iter().copied().sum::<T>();
        let mut mags: Vec<T> = off.iter().map(|x| x.abs()).collect();
        mags.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap());
        (s, mags)
    }

    /// `D(lambda)` evaluated directly.
    pub fn dual_objective<T: Real>(&self, g: &[T], lambda: T) -> Result<T> {
        check_len(self.n, g.len())?;
        let (sup, off) = g.split_at(self.k);
        let a: T = sup.iter().map(|&x| (x - lambda) * (x - lambda)).sum();
        let b: T = off
            .iter()
            .map(|&x| {
                let r = (x.abs() - lambda).max(T::zero());
                r * r
            })
            .sum();
        Ok(a + b)
    }

    /// Minimizer of `D` over `lambda >= 0`.
    ///
    /// On the interval where exactly the `c` largest off-support magnitudes
    /// exceed `lambda`, `D` is quadratic with stationary point
    /// `(s + a_1 + .. + a_c) / (k + c)`. Walking the intervals from the top,
    /// the first one whose stationary point is not below its left end holds
    /// the minimizer, since `D'` is nondecreasing.
    pub fn xi_minimizer<T: Real>(&self, g: &[T]) -> Result<T> {
        check_len(self.n, g.len())?;
        let (s, mags) = self.split(g);
        let k = self.k;
        let mut prefix = T::zero();
        for c in 0..=mags.len() {
            if c > 0 {
                prefix += mags[c - 1];
            }
            let lo = mags.get(c).copied().unwrap_or(T::zero());
            let hi = if c == 0 { T::infinity() } else { mags[c - 1] };
            if k + c == 0 {
                // D is identically zero on [a_1, inf)
                return Ok(lo);
            }
            let stat = (s + prefix) / T::of_usize(k + c);
            if stat >= lo {
                return Ok(stat.min(hi).max(T::zero()));
            }
        }
        Ok(T::zero())
    }

    /// Per-sample `xi(g)`.
    pub fn xi_sample<T: Real>(&self, g: &[T]) -> Result<T> {
        let lambda = self.xi_minimizer(g)?;
        Ok(self.dual_objective(g, lambda)?.max(T::zero()).sqrt())
    }

    /// `w(mu)` with `w_i = g_i - mu` on the support and `soft(g_i, mu)` off it.
    fn prox_point<T: Real>(&self, g: &[T], mu: T) -> Vec<T> {
        g.iter()
            .enumerate()
            .map(|(i, &x)| {
                if i < self.k {
                    x - mu
                } else {
                    soft_threshold(x, mu)
                }
            })
            .collect()
    }

    /// Euclidean projection of `g` onto `K = {f <= 0}`.
    ///
    /// The multiplier solves `h(mu) = f(w(mu)) = 0`, where
    /// `h(mu) = s - k mu + sum_j max(a_j - mu, 0)` is piecewise linear and
    /// nonincreasing; the root is located exactly between breakpoints.
    pub fn project<T: Real>(&self, g: &[T]) -> Result<Projection<T>> {
        check_len(self.n, g.len())?;
        if self.f_unchecked(g) <= T::zero() {
            return Ok(Projection {
                point: g.to_vec(),
                multiplier: T::zero(),
            });
        }
        let (s, mags) = self.split(g);
        let k = self.k;
        let mut mu = None;
        let mut prefix = T::zero();
        for c in 0..=mags.len() {
            if c > 0 {
                prefix += mags[c - 1];
            }
            let lo = mags.get(c).copied().unwrap_or(T::zero());
            if k + c == 0 {
                // h vanishes on [a_1, inf): every point there maps to 0
                mu = Some(lo);
                break;
            }
            let hi = if c == 0 { T::infinity() } else { mags[c - 1] };
            let root = (s + prefix) / T::of_usize(k + c);
            if root >= lo {
                mu = Some(root.min(hi));
                break;
            }
        }
        // h(0) = f(g) > 0 guarantees a root before the loop ends
        let mu = mu.unwrap_or(T::zero()).max(T::zero());
        Ok(Projection {
            point: self.prox_point(g, mu),
            multiplier: mu,
        })
    }

    /// Per-sample `w(g) = max_{w in S} g^T w`, clamped at zero.
    pub fn w_sample<T: Real>(&self, g: &[T]) -> Result<SupportValue<T>> {
        let p = self.project(g)?;
        let v = norm2(&p.point);
        Ok(SupportValue {
            value: v,
            degenerate: v == T::zero(),
        })
    }
}

/// Which width the Monte Carlo estimator averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WidthKind {
    /// `xi_D = E xi(g)`
    #[serde(rename = "xi")]
    XiD,
    /// `w_D = E w(g)`
    #[serde(rename = "w")]
    WD,
}

/// Monte Carlo summary of `xi_D` or `w_D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthEstimate {
    pub kind: WidthKind,
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    pub mean: f64,
    pub std_error: f64,
    pub sample_std: f64,
    pub num_samples: usize,
    /// `sample_std / mean`; infinite when the mean is zero (serialized as
    /// `null` in JSON).
    pub concentration_ratio: f64,
}

impl WidthEstimate {
    /// `mean^2 / n`, the width's prediction of the critical ratio `m/n`.
    pub fn critical_ratio(&self) -> f64 {
        self.mean * self.mean / self.n as f64
    }
}

/// Standard normal vector of length `n` from an already-derived seed.
pub fn gaussian_vector<T: Real>(n: usize, seed: u64) -> Vec<T> {
    let mut rng = seed::rng(seed);
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            T::of(z)
        })
        .collect()
}

/// Seed of Monte Carlo sample `index`.
pub fn sample_seed(seed: u64, index: usize) -> u64 {
    seed::derive(seed, index as u64)
}

/// Raw per-sample widths, in sample order.
pub fn width_samples<T: Real>(
    cone: &ConeSpec,
    kind: WidthKind,
    num_samples: usize,
    seed: u64,
) -> Vec<T> {
    (0..num_samples)
        .into_par_iter()
        .map(|i| {
            let g = gaussian_vector::<T>(cone.n, sample_seed(seed, i));
            // lengths match by construction
            match kind {
                WidthKind::XiD => cone.xi_sample(&g).unwrap(),
                WidthKind::WD => cone.w_sample(&g).unwrap().value,
            }
        })
        .collect()
}

/// Monte Carlo estimate of `xi_D` or `w_D` from `num_samples` Gaussian
/// vectors. Bit-identical for a fixed seed regardless of thread count.
pub fn estimate_width<T: Real>(
    cone: &ConeSpec,
    kind: WidthKind,
    num_samples: usize,
    seed: u64,
) -> Result<WidthEstimate> {
    if num_samples < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 samples, got {num_samples}"
        )));
    }
    let samples = width_samples::<T>(cone, kind, num_samples, seed);
    let ns = num_samples as f64;
    let mean = samples.iter().map(|v| v.to_f64_lossy()).sum::<f64>() / ns;
    let ss = samples
        .iter()
        .map(|v| {
            let d = v.to_f64_lossy() - mean;
            d * d
        })
        .sum::<f64>();
    let sample_std = (ss / (ns - 1.0)).sqrt();
    let concentration_ratio = if mean == 0.0 {
        f64::INFINITY
    } else {
        sample_std / mean
    };
    Ok(WidthEstimate {
        kind,
        n: cone.n,
        k: cone.k,
        seed,
        mean,
        std_error: sample_std / ns.sqrt(),
        sample_std,
        num_samples,
        concentration_ratio,
    })
}

/// `(mean, sample_std, sample_std / mean)` of the per-sample widths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub mean: f64,
    pub sample_std: f64,
    pub ratio: f64,
}

pub fn concentration_report<T: Real>(
    cone: &ConeSpec,
    kind: WidthKind,
    num_samples: usize,
    seed: u64,
) -> Result<ConcentrationReport> {
    let e = estimate_width::<T>(cone, kind, num_samples, seed)?;
    Ok(ConcentrationReport {
        mean: e.mean,
        sample_std: e.sample_std,
        ratio: e.concentration_ratio,
    })
}
