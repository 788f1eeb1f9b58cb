//! Basis pursuit, `min |x|_1 s.t. A x = y`, and planted recovery trials.
//!
//! The solver is ADMM on the split `x in {A x = y}`, `z` free with `|z|_1`
//! penalized:
//!
//! ```text
//! x+ = P(z - u)                       P = affine projection, cached Cholesky of A A^T
//! h  = a x+ + (1 - a) z               over-relaxation a
//! z+ = soft(h + u, 1 / rho)
//! u+ = u + h - z+
//! ```
//!
//! `z` is exactly sparse and `rho u` is a subgradient of `|.|_1` at `z`.
//! Once the support of `z` settles, the iterate is polished: the restricted
//! system is solved exactly and accepted only with a dual certificate
//! `|A^T nu|_inf <= 1`, `A_T^T nu = sign(x_T)`, which proves optimality.

use serde::{Deserialize, Serialize};

use crate::cone::ConeSpec;
use crate::error::{check_len, Error, Result};
use crate::linalg::{null_space_basis, Cholesky, HouseholderQr, Mat};
use crate::phase::{sample_instance, ProblemGeometry};
use crate::scalar::{dot, norm1, norm2, norm_inf, soft_threshold, Real};
use crate::trap::{tau_ball, TrapOptions, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdmmOptions {
    pub rho: f64,
    pub relaxation: f64,
    /// Residual tolerance, relative to the iterate scale.
    pub tol: f64,
    pub max_iterations: usize,
    /// Sup-norm recovery tolerance relative to `max(1, |x~|_inf)`.
    pub success_tol: f64,
}

impl Default for AdmmOptions {
    fn default() -> Self {
        AdmmOptions {
            rho: 1.0,
            relaxation: 1.8,
            tol: 1e-9,
            max_iterations: 50_000,
            success_tol: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisPursuit<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    pub primal_residual: T,
    pub dual_residual: T,
    /// False when the iteration cap was hit first.
    pub converged: bool,
    /// True when the result carries an optimality certificate.
    pub certified: bool,
}

/// Support checks happen every this many iterations.
const POLISH_EVERY: usize = 20;
/// Slack allowed in the dual certificate.
const CERT_TOL: f64 = 1e-9;

/// Projection onto `{x : A x = y}` via the Cholesky factor of `A A^T`.
struct AffineProjector<'a, T> {
    a: &'a Mat<T>,
    chol: Cholesky<T>,
    y: &'a [T],
    res: Vec<T>,
    back: Vec<T>,
}

impl<'a, T: Real> AffineProjector<'a, T> {
    fn new(a: &'a Mat<T>, y: &'a [T]) -> Result<Self> {
        let chol = Cholesky::factor(&a.aat()).map_err(|e| match e {
            Error::Factor { pivot } => Error::Rank {
                pivot,
                size: a.rows(),
            },
            other => other,
        })?;
        Ok(AffineProjector {
            a,
            chol,
            y,
            res: vec![T::zero(); a.rows()],
            back: vec![T::zero(); a.cols()],
        })
    }

    /// `v <- v - A^T (A A^T)^{-1} (A v - y)`
    fn project(&mut self, v: &mut [T]) {
        self.a.matvec_into(v, &mut self.res);
        for (r, yi) in self.res.iter_mut().zip(self.y) {
            *r -= *yi;
        }
        self.chol.solve_in_place(&mut self.res);
        self.a.tr_matvec_into(&self.res, &mut self.back);
        for (vi, bi) in v.iter_mut().zip(&self.back) {
            *vi -= *bi;
        }
    }

    /// Projection followed by two refinement sweeps.
    fn project_refined(&mut self, v: &mut [T]) {
        for _ in 0..3 {
            self.project(v);
        }
    }
}

/// Solves `R^T v = b` in place for the leading `p x p` block of `R`.
fn solve_rt<T: Real>(r: &Mat<T>, b: &mut [T]) {
    for i in 0..b.len() {
        let mut s = b[i];
        for j in 0..i {
            s -= r[(j, i)] * b[j];
        }
        b[i] = s / r[(i, i)];
    }
}

/// Solves `R v = b` in place.
fn solve_r<T: Real>(r: &Mat<T>, b: &mut [T]) {
    for i in (0..b.len()).rev() {
        let mut s = b[i];
        for j in i + 1..b.len() {
            s -= r[(i, j)] * b[j];
        }
        b[i] = s / r[(i, i)];
    }
}

struct Polished<T> {
    x: Vec<T>,
    residual: T,
    violation: T,
}

/// Exact solve on `support` with signs `signs`, returned only if certified
/// optimal. `nu0` seeds the dual point.
fn polish<T: Real>(
    a: &Mat<T>,
    y: &[T],
    support: &[usize],
    signs: &[T],
    nu0: &[T],
) -> Option<Polished<T>> {
    let (m, n) = (a.rows(), a.cols());
    let p = support.len();
    let mut x = vec![T::zero(); n];
    let mut nu = nu0.to_vec();
    if p > 0 {
        let at = Mat::from_fn(m, p, |i, j| a[(i, support[j])]);
        let qr = HouseholderQr::factor(&at).ok()?;
        let r = qr.r();
        let rmax = (0..p).fold(T::zero(), |s, j| s.max(r[(j, j)].abs()));
        if (0..p).any(|j| r[(j, j)].abs() <= T::of_usize(m) * T::epsilon() * rmax) {
            return None;
        }
        let mut qty = y.to_vec();
        qr.apply_qt(&mut qty);
        let mut xt = qty[..p].to_vec();
        solve_r(r, &mut xt);
        for (j, &i) in support.iter().enumerate() {
            if xt[j] * signs[j] <= T::zero() {
                return None;
            }
            x[i] = xt[j];
        }
        // nu <- nu0 - A_T (A_T^T A_T)^{-1} (A_T^T nu0 - signs)
        let mut c: Vec<T> = (0..p).map(|j| dot(at.col(j), &nu) - signs[j]).collect();
        solve_rt(r, &mut c);
        solve_r(r, &mut c);
        let corr = at.matvec(&c);
        for (v, d) in nu.iter_mut().zip(&corr) {
            *v -= *d;
        }
    }
    let ax = a.matvec(&x);
    let residual = norm2(&ax.iter().zip(y).map(|(u, v)| *u - *v).collect::<Vec<_>>());
    if residual > T::of(1e-10) * (T::one() + norm2(y)) {
        return None;
    }
    let atnu = a.tr_matvec(&nu);
    let violation = atnu
        .iter()
        .fold(T::zero(), |m, v| m.max(v.abs() - T::one()));
    if violation > T::of(CERT_TOL) {
        return None;
    }
    Some(Polished {
        x,
        residual,
        violation: violation.max(T::zero()),
    })
}

/// Solves `min |x|_1 s.t. A x = y` for a full-row-rank `A` with `m <= n`.
pub fn solve_basis_pursuit<T: Real>(
    a: &Mat<T>,
    y: &[T],
    opts: &AdmmOptions,
) -> Result<BasisPursuit<T>> {
    let (m, n) = (a.rows(), a.cols());
    check_len(m, y.len())?;
    if m > n {
        return Err(Error::InvalidInput(format!(
            "basis pursuit needs m <= n, got {m}x{n}"
        )));
    }
    if !(opts.rho > 0.0) || !(opts.relaxation > 0.0 && opts.relaxation < 2.0) {
        return Err(Error::InvalidInput(
            "rho must be positive and relaxation in (0, 2)".into(),
        ));
    }
    let mut proj = AffineProjector::new(a, y)?;
    let rho = T::of(opts.rho);
    let relax = T::of(opts.relaxation);
    let thresh = T::one() / rho;
    let tol = T::of(opts.tol);
    let zero = T::zero();

    let mut x = vec![zero; n];
    let mut z = vec![zero; n];
    let mut u = vec![zero; n];
    let mut z_old = vec![zero; n];
    let mut iterations = 0;
    let mut primal = T::infinity();
    let mut dual = T::infinity();
    let mut converged = false;
    let mut last_support: Vec<usize> = Vec::new();

    while iterations < opts.max_iterations {
        iterations += 1;
        for i in 0..n {
            x[i] = z[i] - u[i];
        }
        proj.project(&mut x);
        z_old.copy_from_slice(&z);
        for i in 0..n {
            let h = relax * x[i] + (T::one() - relax) * z_old[i];
            z[i] = soft_threshold(h + u[i], thresh);
            u[i] += h - z[i];
        }
        let (mut rp, mut rd) = (zero, zero);
        for i in 0..n {
            rp += (x[i] - z[i]) * (x[i] - z[i]);
            rd += (z[i] - z_old[i]) * (z[i] - z_old[i]);
        }
        primal = rp.sqrt();
        dual = rho * rd.sqrt();
        let scale_p = T::one().max(norm2(&x)).max(norm2(&z));
        let scale_d = T::one().max(rho * norm2(&u));
        if primal <= tol * scale_p && dual <= tol * scale_d {
            converged = true;
            break;
        }
        if iterations % POLISH_EVERY == 0 {
            let support: Vec<usize> = (0..n).filter(|&i| z[i] != zero).collect();
            if support.len() <= m && support == last_support {
                let signs: Vec<T> = support.iter().map(|&i| z[i].signum()).collect();
                let su: Vec<T> = u.iter().map(|&v| rho * v).collect();
                let mut nu0 = a.matvec(&su);
                proj.chol.solve_in_place(&mut nu0);
                if let Some(pol) = polish(a, y, &support, &signs, &nu0) {
                    return Ok(BasisPursuit {
                        x: pol.x,
                        iterations,
                        primal_residual: pol.residual,
                        dual_residual: pol.violation,
                        converged: true,
                        certified: true,
                    });
                }
            }
            last_support = support;
        }
    }

    // best feasible point among x and the projection of z
    proj.project_refined(&mut x);
    let mut pz = z;
    proj.project_refined(&mut pz);
    let x = if norm1(&pz) < norm1(&x) { pz } else { x };
    Ok(BasisPursuit {
        x,
        iterations,
        primal_residual: primal,
        dual_residual: dual,
        converged,
        certified: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryResult {
    pub x_hat: Vec<f64>,
    pub planted: Vec<f64>,
    pub success: bool,
    pub rel_err_inf: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub converged: bool,
    pub certified: bool,
    /// Solver failure message; such trials count as unsuccessful.
    pub error: Option<String>,
}

/// `|x - x~|_inf / max(1, |x~|_inf)`
pub fn relative_sup_error(x: &[f64], planted: &[f64]) -> f64 {
    let d = x
        .iter()
        .zip(planted)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    d / norm_inf(planted).max(1.0)
}

fn recover(a: &Mat<f64>, planted: &[f64], opts: &AdmmOptions) -> RecoveryResult {
    let y = a.matvec(planted);
    match solve_basis_pursuit(a, &y, opts) {
        Ok(bp) => {
            let rel = relative_sup_error(&bp.x, planted);
            RecoveryResult {
                success: rel <= opts.success_tol,
                rel_err_inf: rel,
                x_hat: bp.x,
                planted: planted.to_vec(),
                iterations: bp.iterations,
                primal_residual: bp.primal_residual,
                dual_residual: bp.dual_residual,
                converged: bp.converged,
                certified: bp.certified,
                error: None,
            }
        }
        Err(e) => RecoveryResult {
            x_hat: vec![],
            planted: planted.to_vec(),
            success: false,
            rel_err_inf: f64::INFINITY,
            iterations: 0,
            primal_residual: f64::NAN,
            dual_residual: f64::NAN,
            converged: false,
            certified: false,
            error: Some(e.to_string()),
        },
    }
}

/// Samples an instance from `trial_seed` and runs basis pursuit on it.
pub fn recovery_trial(
    geom: &ProblemGeometry,
    trial_seed: u64,
    opts: &AdmmOptions,
) -> Result<RecoveryResult> {
    let inst = sample_instance(geom, trial_seed)?;
    Ok(recover(&inst.a, &inst.planted, opts))
}

/// Trap verdict and recovery outcome on the same instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgreementRecord {
    pub verdict: Verdict,
    pub recovery_success: bool,
    /// `Some(true)` when trapped coincides with failure and escaped with
    /// success; `None` for indeterminate verdicts.
    pub agree: Option<bool>,
}

impl AgreementRecord {
    pub fn new(verdict: Verdict, recovery_success: bool) -> Self {
        let agree = match verdict {
            Verdict::Trapped => Some(!recovery_success),
            Verdict::Escaped => Some(recovery_success),
            Verdict::Indeterminate => None,
        };
        AgreementRecord {
            verdict,
            recovery_success,
            agree,
        }
    }
}

/// Runs the trap test and basis pursuit on one sampled instance.
///
/// Solver failures on either side degrade to an indeterminate verdict or a
/// failed recovery.
pub fn recovery_vs_trap(
    geom: &ProblemGeometry,
    trial_seed: u64,
    admm: &AdmmOptions,
    trap: &TrapOptions,
) -> Result<(AgreementRecord, RecoveryResult)> {
    let inst = sample_instance(geom, trial_seed)?;
    let rec = recover(&inst.a, &inst.planted, admm);
    let verdict = null_space_basis(&inst.a)
        .and_then(|b| tau_ball(&ConeSpec::new(geom.n, geom.k)?, &b, trap))
        .map(|v| v.verdict)
        .unwrap_or(Verdict::Indeterminate);
    Ok((AgreementRecord::new(verdict, rec.success), rec))
}
