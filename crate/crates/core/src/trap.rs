//! Does the null space `Y = span(B)` meet the descent set `S`?
//!
//! The sign of `tau = min_{|z| <= 1} f(B z)` decides it: by degree-1
//! homogeneity the ball minimum is negative exactly when some unit vector of
//! `Y` has `f < 0`. Two solvers run in lockstep on every instance:
//!
//! * projected subgradient on `z` with iterate averaging, which produces
//!   upper bounds on `tau` and a witness;
//! * accelerated projected gradient on the box QP
//!   `min { |B^T s|^2 : s_i = 1 (i < k), |s_i| <= 1 (i >= k) }`,
//!   whose feasible points are subgradients of `f` at the origin and give
//!   lower bounds `tau >= -|B^T s|`. Its best responses `z = -B^T s / |B^T s|`
//!   feed further upper bounds.
//!
//! A verdict is issued only when one of the bounds clears the margin.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cone::ConeSpec;
use crate::error::{check_len, Result};
use crate::linalg::{null_space_basis, NullBasis};
use crate::phase::{sample_instance, wilson_interval, ProblemGeometry};
use crate::scalar::{norm2, Real};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrapOptions {
    /// `c` in the subgradient step `c / sqrt(t)`.
    pub step_scale: f64,
    pub iterations: usize,
    /// Margin is `margin_scale * sqrt(n)`.
    pub margin_scale: f64,
}

impl Default for TrapOptions {
    fn default() -> Self {
        TrapOptions {
            step_scale: 0.5,
            iterations: 20_000,
            margin_scale: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Trapped,
    Escaped,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapVerdict<T> {
    pub verdict: Verdict,
    /// Best (smallest) value of `f(B z)` found over the unit ball.
    pub tau_value: T,
    /// Certified lower bound on the ball minimum.
    pub lower_bound: T,
    /// Unit vector in `Y` with `f <= -margin`; present iff trapped.
    pub witness: Option<Vec<T>>,
    pub iterations: usize,
    pub margin: T,
}

/// Lower bounds are refreshed every this many iterations.
const CHECK_EVERY: usize = 10;

struct Work<T> {
    cone: ConeSpec,
    basis: NullBasis<T>,
    full: Vec<T>,
}

impl<T: Real> Work<T> {
    /// `f(B z)`, leaving `B z` in `self.full`.
    fn f_of(&mut self, z: &[T]) -> T {
        self.basis.basis.matvec_into(z, &mut self.full);
        self.cone.f_unchecked(&self.full)
    }
}

/// Subgradient of `f` at `w`: ones on the support, signs off it.
fn subgradient<T: Real>(k: usize, w: &[T], s: &mut [T]) {
    for (i, (si, &wi)) in s.iter_mut().zip(w).enumerate() {
        *si = if i < k || wi > T::zero() {
            T::one()
        } else if wi < T::zero() {
            -T::one()
        } else {
            T::zero()
        };
    }
}

fn clip_unit<T: Real>(x: T) -> T {
    x.max(-T::one()).min(T::one())
}

/// Three-way decision on whether `span(B)` meets `S`.
pub fn tau_ball<T: Real>(
    cone: &ConeSpec,
    basis: &NullBasis<T>,
    opts: &TrapOptions,
) -> Result<TrapVerdict<T>> {
    let n = cone.n;
    let k = cone.k;
    check_len(n, basis.ambient_dim())?;
    let d = basis.dim();
    let margin = T::of(opts.margin_scale) * T::of_usize(n).sqrt();
    let quarter = margin / T::of(4.0);
    let zero = T::zero();

    let mut work = Work {
        cone: *cone,
        basis: basis.clone(),
        full: vec![zero; n],
    };
    let b = &basis.basis;

    let mut best = zero;
    let mut best_z = vec![zero; d];
    let mut lower = -T::infinity();

    // primal state
    let mut z = vec![zero; d];
    let mut z_avg = vec![zero; d];
    let mut sub = vec![zero; n];
    let mut g = vec![zero; d];

    // dual state over the free block s[k..]; s[..k] stays at one
    let mut s = vec![zero; n];
    s[..k].iter_mut().for_each(|x| *x = T::one());
    let mut s_prev = s.clone();
    let mut y = s.clone();
    let mut r = vec![zero; d];
    let mut p = vec![zero; n];
    let mut momentum = T::one();

    let decided = |best: T, lower: T| best <= -margin || lower >= -quarter;
    let mut iterations = 0;

    if d == 0 {
        lower = zero;
    }

    while iterations < opts.iterations && !decided(best, lower) {
        iterations += 1;
        let t = T::of_usize(iterations);

        // primal subgradient step
        let fz = work.f_of(&z);
        if fz < best {
            best = fz;
            best_z.copy_from_slice(&z);
        }
        subgradient(k, &work.full, &mut sub);
        b.tr_matvec_into(&sub, &mut g);
        let gn = norm2(&g);
        // sub is a point of the dual box, so it certifies too
        lower = lower.max(-gn);
        if gn > zero {
            let step = T::of(opts.step_scale) / t.sqrt() / gn;
            for (zi, gi) in z.iter_mut().zip(&g) {
                *zi -= step * *gi;
            }
            let zn = norm2(&z);
            if zn > T::one() {
                z.iter_mut().for_each(|x| *x /= zn);
            }
        }
        let w = T::one() / t;
        for (a, zi) in z_avg.iter_mut().zip(&z) {
            *a += w * (*zi - *a);
        }

        // dual accelerated step at the extrapolated point y
        b.tr_matvec_into(&y, &mut r);
        let rn = norm2(&r);
        b.matvec_into(&r, &mut p);
        if rn > zero {
            // best response z = -r / |r| has B z = -p / |r|
            let mut fz = zero;
            for (i, &pi) in p.iter().enumerate() {
                let wi = -pi / rn;
                fz += if i < k { wi } else { wi.abs() };
            }
            if fz < best {
                best = fz;
                best_z
                    .iter_mut()
                    .zip(&r)
                    .for_each(|(bz, ri)| *bz = -*ri / rn);
            }
        }
        // gradient of |B^T s|^2 is 2 B B^T s with Lipschitz constant 2
        s_prev.copy_from_slice(&s);
        for i in k..n {
            s[i] = clip_unit(y[i] - p[i]);
        }
        let mut restart = zero;
        for i in k..n {
            restart += (y[i] - s[i]) * (s[i] - s_prev[i]);
        }
        if restart > zero {
            momentum = T::one();
        }
        let next = (T::one() + (T::one() + T::of(4.0) * momentum * momentum).sqrt()) / T::of(2.0);
        let beta = (momentum - T::one()) / next;
        momentum = next;
        for i in k..n {
            y[i] = s[i] + beta * (s[i] - s_prev[i]);
        }

        if iterations % CHECK_EVERY == 0 {
            b.tr_matvec_into(&s, &mut r);
            lower = lower.max(-norm2(&r));
            let fa = work.f_of(&z_avg);
            if fa < best {
                best = fa;
                best_z.copy_from_slice(&z_avg);
            }
        }
    }

    let verdict = if best <= -margin {
        Verdict::Trapped
    } else if lower >= -quarter {
        Verdict::Escaped
    } else {
        Verdict::Indeterminate
    };
    let witness = if verdict == Verdict::Trapped {
        let mut w = b.matvec(&best_z);
        let wn = norm2(&w);
        w.iter_mut().for_each(|x| *x /= wn);
        Some(w)
    } else {
        None
    };
    Ok(TrapVerdict {
        verdict,
        tau_value: best,
        lower_bound: lower,
        witness,
        iterations,
        margin,
    })
}

/// Verdict for one sampled instance of `geom`.
pub fn trap_trial(
    geom: &ProblemGeometry,
    trial_seed: u64,
    opts: &TrapOptions,
) -> Result<TrapVerdict<f64>> {
    let inst = sample_instance(geom, trial_seed)?;
    let basis = null_space_basis(&inst.a)?;
    tau_ball(&ConeSpec::new(geom.n, geom.k)?, &basis, opts)
}

/// Aggregate of independent trap trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapStats {
    pub geometry: ProblemGeometry,
    pub seed: u64,
    pub trials: usize,
    pub trapped: usize,
    pub escaped: usize,
    pub indeterminate: usize,
    /// Trials whose solver failed outright.
    pub failed: usize,
    /// Trapped fraction among determinate trials; `None` if there are none.
    pub rate: Option<f64>,
    pub wilson: (f64, f64),
}

/// Runs `trials` trials with seeds `derive(seed, t)`.
pub fn trap_probability(
    geom: &ProblemGeometry,
    trials: usize,
    seed: u64,
    opts: &TrapOptions,
) -> Result<TrapStats> {
    geom.validate()?;
    if trials == 0 {
        return Err(crate::error::Error::InvalidInput(
            "trials must be at least 1".into(),
        ));
    }
    let verdicts: Vec<Option<Verdict>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            trap_trial(geom, seed::derive(seed, t as u64), opts)
                .ok()
                .map(|v| v.verdict)
        })
        .collect();
    let count = |v: Verdict| verdicts.iter().filter(|x| **x == Some(v)).count();
    let trapped = count(Verdict::Trapped);
    let escaped = count(Verdict::Escaped);
    let indeterminate = count(Verdict::Indeterminate);
    let determinate = trapped + escaped;
    Ok(TrapStats {
        geometry: *geom,
        seed,
        trials,
        trapped,
        escaped,
        indeterminate,
        failed: trials - determinate - indeterminate,
        rate: (determinate > 0).then(|| trapped as f64 / determinate as f64),
        wilson: wilson_interval(trapped, determinate),
    })
}
