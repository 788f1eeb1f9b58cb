#![allow(dead_code)]

/// Solves a small dense system by Gaussian elimination with partial
/// pivoting. `a` is row-major `n x n`. Returns `None` when singular.
pub fn gauss_solve(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    for c in 0..n {
        let p =
            (c..n).max_by(|&i, &j| a[i * n + c].abs().partial_cmp(&a[j * n + c].abs()).unwrap())?;
        if a[p * n + c].abs() < 1e-12 {
            return None;
        }
        if p != c {
            for j in 0..n {
                a.swap(p * n + j, c * n + j);
            }
            b.swap(p, c);
        }
        for r in c + 1..n {
            let f = a[r * n + c] / a[c * n + c];
            for j in c..n {
                a[r * n + j] -= f * a[c * n + j];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|j| a[r * n + j] * x[j]).sum();
        x[r] = (b[r] - s) / a[r * n + r];
    }
    Some(x)
}

fn combinations(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    rec(0, n, k, &mut Vec::new(), f);
}

/// Optimal value of `min |x|_1 s.t. A x = y` by enumerating the basic
/// feasible solutions of the split `x = u - v`, `[A, -A] (u, v) = y`,
/// `u, v >= 0`. `a` is `m x n` row-major with full row rank.
pub fn lp_vertex_oracle(a: &[f64], m: usize, n: usize, y: &[f64]) -> f64 {
    let col = |j: usize, i: usize| {
        if j < n {
            a[i * n + j]
        } else {
            -a[i * n + j - n]
        }
    };
    let mut best = f64::INFINITY;
    combinations(2 * n, m, &mut |basis| {
        let mut sys = vec![0.0; m * m];
        for i in 0..m {
            for (c, &j) in basis.iter().enumerate() {
                sys[i * m + c] = col(j, i);
            }
        }
        if let Some(sol) = gauss_solve(sys, y.to_vec(), m) {
            if sol.iter().all(|&v| v >= -1e-10) {
                best = best.min(sol.iter().map(|v| v.max(0.0)).sum());
            }
        }
    });
    best
}

pub fn norm1(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

pub fn d_direct(g: &[f64], k: usize, lambda: f64) -> f64 {
    let mut d = 0.0;
    for (i, &x) in g.iter().enumerate() {
        let r = if i < k {
            x - lambda
        } else {
            (x.abs() - lambda).max(0.0)
        };
        d += r * r;
    }
    d
}

/// Minimum of D over a uniform lambda grid of spacing 1e-5, refined by
/// golden-section search on the two cells around the best grid point
/// (D is convex, so the bracket holds the minimizer).
pub fn xi_grid(g: &[f64], k: usize) -> f64 {
    const H: f64 = 1e-5;
    let top = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let steps = (top / H).ceil() as usize + 1;
    let (mut best, mut arg) = (f64::INFINITY, 0);
    for i in 0..=steps {
        let d = d_direct(g, k, i as f64 * H);
        if d < best {
            best = d;
            arg = i;
        }
    }
    let (mut a, mut b) = ((arg as f64 - 1.0).max(0.0) * H, (arg as f64 + 1.0) * H);
    let r = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..80 {
        let c = b - r * (b - a);
        let d = a + r * (b - a);
        if d_direct(g, k, c) <= d_direct(g, k, d) {
            b = d;
        } else {
            a = c;
        }
    }
    best.min(d_direct(g, k, 0.5 * (a + b))).sqrt()
}

/// Projection onto {f <= 0} by enumerating sign patterns of the
/// off-support coordinates: each pattern fixes a face on which the cone is a
/// half-space inside a coordinate subspace.
pub fn project_brute(g: &[f64], k: usize) -> Vec<f64> {
    let n = g.len();
    let off = n - k;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for code in 0..3usize.pow(off as u32) {
        let mut a = vec![0.0; n];
        let mut c = code;
        for (i, ai) in a.iter_mut().enumerate() {
            if i < k {
                *ai = 1.0;
            } else {
                *ai = [0.0, 1.0, -1.0][c % 3];
                c /= 3;
            }
        }
        let gs: Vec<f64> = g
            .iter()
            .zip(&a)
            .enumerate()
            .map(|(i, (x, ai))| if i < k || *ai != 0.0 { *x } else { 0.0 })
            .collect();
        let aa: f64 = a.iter().map(|x| x * x).sum();
        let ag: f64 = a.iter().zip(&gs).map(|(x, y)| x * y).sum();
        let t = if aa > 0.0 { (ag / aa).max(0.0) } else { 0.0 };
        let w: Vec<f64> = gs.iter().zip(&a).map(|(x, ai)| x - t * ai).collect();
        let consistent = (k..n).all(|i| a[i] * w[i] >= -1e-14);
        let f: f64 = w[..k].iter().sum::<f64>() + w[k..].iter().map(|x| x.abs()).sum::<f64>();
        if !consistent || f > 1e-12 {
            continue;
        }
        let dist: f64 = w.iter().zip(g).map(|(x, y)| (x - y) * (x - y)).sum();
        if best.as_ref().map_or(true, |(d, _)| dist < *d) {
            best = Some((dist, w));
        }
    }
    best.unwrap().1
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
