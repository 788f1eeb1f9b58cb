//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::process::Command;
use std::time::Instant;

use common::{lp_vertex_oracle, norm, norm1, project_brute, xi_grid};
use l1mesh::cone::{estimate_width, gaussian_vector, sample_seed, ConeSpec, WidthKind};
use l1mesh::l1::{solve_basis_pursuit, AdmmOptions};
use l1mesh::linalg::sample_gaussian;
use l1mesh::phase::{fit_crossing, run_sweep, ProblemGeometry, SweepConfig, SweepMode};
use l1mesh::seed;
use l1mesh::specfn::{erf, erfinv};
use l1mesh::thresholds::{
    escape_limit, escape_prob_lower_bound, perturbed_bounds, weak_threshold, EpsilonSet,
    EscapeConstant,
};
use l1mesh::trap::{trap_probability, TrapOptions};
use rand::Rng;

type Outcome = (bool, String);

fn alpha_w(beta: f64) -> f64 {
    weak_threshold(beta).unwrap().alpha_w
}

fn threshold_width_identity() -> Outcome {
    let n = 4000;
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (i, &beta) in [0.05, 0.1, 0.2, 0.3].iter().enumerate() {
        let k = (beta * n as f64).round() as usize;
        let est = estimate_width::<f64>(
            &ConeSpec::new(n, k).unwrap(),
            WidthKind::XiD,
            200,
            100 + i as u64,
        )
        .unwrap();
        let gap = (alpha_w(beta) - est.critical_ratio()).abs();
        worst = worst.max(gap);
        parts.push(format!(
            "beta={beta}: alpha_w={:.4} xi^2/n={:.4}",
            alpha_w(beta),
            est.critical_ratio()
        ));
    }
    (
        worst <= 0.02,
        format!("max gap {worst:.4} <= 0.02 ({})", parts.join("; ")),
    )
}

fn empirical_phase_transition() -> Outcome {
    let start = Instant::now();
    let cfg = SweepConfig {
        n: 200,
        betas: vec![0.2],
        alphas: (0..41).map(|i| ((10 + 2 * i) as f64) / 100.0).collect(),
        trials: 100,
        mode: SweepMode::Recovery,
        seed: 2024,
        output: None,
        per_trial_log: false,
        overlay: false,
        admm: AdmmOptions::default(),
        trap: TrapOptions::default(),
    };
    let out = run_sweep(&cfg).unwrap();
    let secs = start.elapsed().as_secs_f64();
    match fit_crossing(&out.cells) {
        Ok(c) => {
            let gap = (c.alpha_50 - alpha_w(0.2)).abs();
            (
                gap <= 0.05 && secs <= 600.0,
                format!(
                    "alpha_50={:.4} ci=({:.4}, {:.4}) alpha_w={:.4} gap {gap:.4} <= 0.05, {secs:.1}s <= 600s",
                    c.alpha_50,
                    c.ci.0,
                    c.ci.1,
                    alpha_w(0.2)
                ),
            )
        }
        Err(e) => (false, format!("crossing fit failed: {e}")),
    }
}

fn duality_suite() -> Outcome {
    let cone = ConeSpec::new(500, 50).unwrap();
    let (mut weak_bad, mut strong_bad, mut checked) = (0, 0, 0);
    let mut worst = 0.0f64;
    for i in 0..10_000 {
        let g: Vec<f64> = gaussian_vector(500, sample_seed(31, i));
        let xi = cone.xi_sample(&g).unwrap();
        let w = cone.w_sample(&g).unwrap().value;
        if w > xi + 1e-8 {
            weak_bad += 1;
        }
        if w > 0.1 {
            checked += 1;
            let rel = (w - xi).abs() / w.max(1.0);
            worst = worst.max(rel);
            if rel > 1e-6 {
                strong_bad += 1;
            }
        }
    }
    (
        weak_bad == 0 && strong_bad == 0,
        format!("weak violations {weak_bad}, strong violations {strong_bad} of {checked}, worst relative gap {worst:.2e}"),
    )
}

/// Widths for the mesh criteria at n = 400, beta = 0.2.
fn mesh_width() -> (f64, f64) {
    let cone = ConeSpec::new(400, 80).unwrap();
    let est = estimate_width::<f64>(&cone, WidthKind::XiD, 200, 77).unwrap();
    (est.mean, est.sample_std)
}

fn trapped_direction(xi: f64) -> Outcome {
    let n = 400usize;
    let m = (1..n)
        .filter(|&m| xi >= 1.05 * (m as f64).sqrt() + 0.05 * (n as f64).sqrt())
        .max()
        .unwrap();
    let geom = ProblemGeometry::new(n, m, 80).unwrap();
    let st = trap_probability(&geom, 200, 4001, &TrapOptions::default()).unwrap();
    let rate = st.rate.unwrap_or(0.0);
    let indet = st.indeterminate as f64 / st.trials as f64;
    (
        rate >= 0.95 && indet < 0.10,
        format!(
            "xi_hat={xi:.3}, m={m}: trapped rate {rate:.3} >= 0.95 ({} trapped, {} escaped), indeterminate {:.1}% < 10%",
            st.trapped,
            st.escaped,
            100.0 * indet
        ),
    )
}

fn escape_direction(xi: f64, std: f64) -> Outcome {
    let n = 400usize;
    let m = (1..n).find(|&m| escape_limit(m) - xi >= 3.0 * std).unwrap();
    let geom = ProblemGeometry::new(n, m, 80).unwrap();
    let st = trap_probability(&geom, 200, 5001, &TrapOptions::default()).unwrap();
    let rate = st.trapped as f64 / st.trials as f64;
    let bound = escape_prob_lower_bound(xi, m, EscapeConstant::Improved).unwrap();
    let bound_orig = escape_prob_lower_bound(xi, m, EscapeConstant::Original).unwrap();
    (
        rate <= 0.02,
        format!(
            "xi_hat={xi:.3} std={std:.3}, m={m}: trapped rate {rate:.3} <= 0.02 ({} escaped, {} indeterminate); escape bound {bound:.4} (constant 3.5: {bound_orig:.4})",
            st.escaped, st.indeterminate
        ),
    )
}

fn correspondence() -> Outcome {
    let aw = alpha_w(0.2);
    let mut parts = Vec::new();
    let mut ok = true;
    for (side, alpha) in [("above", aw + 0.1), ("below", aw - 0.1)] {
        let cfg = SweepConfig {
            n: 300,
            betas: vec![0.2],
            alphas: vec![alpha],
            trials: 100,
            mode: SweepMode::Both,
            seed: 6006,
            output: None,
            per_trial_log: false,
            overlay: false,
            admm: AdmmOptions::default(),
            trap: TrapOptions::default(),
        };
        let out = run_sweep(&cfg).unwrap();
        let c = &out.cells[0];
        let actual = c.m as f64 / c.n as f64;
        let determinate = c.trapped + c.escaped;
        let rate = c.agreement as f64 / determinate.max(1) as f64;
        ok &= (actual - aw).abs() > 0.05 && determinate > 0 && rate >= 0.95;
        parts.push(format!(
            "{side} (m={}): agreement {}/{determinate} = {rate:.3}",
            c.m, c.agreement
        ));
    }
    (ok, format!("{} (need >= 0.95)", parts.join("; ")))
}

fn oracle_equivalence() -> Outcome {
    let mut xi_worst = 0.0f64;
    for s in 0..500u64 {
        let n = 1 + (seed::derive(71, s) % 50) as usize;
        let k = (seed::derive(72, s) % (n as u64 + 1)) as usize;
        let g: Vec<f64> = gaussian_vector(n, seed::derive(73, s));
        let xi = ConeSpec::new(n, k).unwrap().xi_sample(&g).unwrap();
        xi_worst = xi_worst.max((xi - xi_grid(&g, k)).abs());
    }
    let mut proj_worst = 0.0f64;
    for s in 0..300u64 {
        let n = 1 + (s as usize % 8);
        let k = (seed::derive(74, s) % (n as u64 + 1)) as usize;
        let g: Vec<f64> = gaussian_vector(n, seed::derive(75, s));
        let p = ConeSpec::new(n, k).unwrap().project(&g).unwrap().point;
        let q = project_brute(&g, k);
        let d: Vec<f64> = p.iter().zip(&q).map(|(a, b)| a - b).collect();
        proj_worst = proj_worst.max(norm(&d));
    }
    let mut lp_worst = 0.0f64;
    for s in 0..100u64 {
        let n = 3 + (s as usize % 6);
        let m = 1 + (seed::derive(76, s) % (n.min(6) as u64 - 1)) as usize;
        let m = m.min(5);
        let a = sample_gaussian::<f64>(m, n, seed::derive(77, s))
            .unwrap()
            .matrix;
        let rows: Vec<f64> = (0..m)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)])
            .collect();
        let mut rng = seed::rng(seed::derive(78, s));
        let y: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
        let bp = solve_basis_pursuit(&a, &y, &AdmmOptions::default()).unwrap();
        lp_worst = lp_worst.max((norm1(&bp.x) - lp_vertex_oracle(&rows, m, n, &y)).abs());
    }
    (
        xi_worst <= 1e-8 && proj_worst <= 1e-7 && lp_worst <= 1e-6,
        format!(
            "xi vs lambda grid {xi_worst:.1e} <= 1e-8; projection vs sign enumeration {proj_worst:.1e} <= 1e-7; basis pursuit vs vertex LP {lp_worst:.1e} <= 1e-6"
        ),
    )
}

fn special_functions() -> Outcome {
    let mut ys: Vec<f64> = (0..=200_000)
        .map(|i| -1.0 + 1e-9 + i as f64 * (2.0 - 2e-9) / 200_000.0)
        .collect();
    for j in 1..=90 {
        let t = 10f64.powf(-(j as f64) / 10.0);
        if t >= 1e-9 {
            ys.push(1.0 - t);
            ys.push(-1.0 + t);
        }
    }
    let rt = ys
        .iter()
        .map(|&y| (erf(erfinv(y).unwrap()) - y).abs())
        .fold(0.0f64, f64::max);

    let mut collapse = 0.0f64;
    let mut monotone = true;
    for &beta in &[0.05, 0.1, 0.2, 0.3, 0.5] {
        let aw = alpha_w(beta);
        let b = perturbed_bounds(beta, &EpsilonSet::ZERO).unwrap();
        for v in [
            b.theta_hat_lower,
            b.alpha_lower_bound,
            b.theta_hat_upper,
            b.alpha_upper_bound,
        ] {
            collapse = collapse.max((v - aw).abs());
        }
        let gaps: Vec<[f64; 4]> = (1..=7)
            .map(|j| {
                let b = perturbed_bounds(beta, &EpsilonSet::uniform(10f64.powi(-j))).unwrap();
                [
                    b.theta_hat_lower,
                    b.alpha_lower_bound,
                    b.theta_hat_upper,
                    b.alpha_upper_bound,
                ]
                .map(|v| (v - aw).abs())
            })
            .collect();
        for w in gaps.windows(2) {
            for q in 0..4 {
                monotone &= w[1][q] < w[0][q] || w[1][q] <= 1e-12;
            }
        }
    }
    (
        rt <= 1e-10 && collapse <= 1e-6 && monotone,
        format!("erfinv round trip {rt:.1e} <= 1e-10; collapse {collapse:.1e} <= 1e-6; monotone along eps = 10^-j: {monotone}"),
    )
}

fn cli(jobs: &str, args: &[&str]) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_l1mesh"))
        .arg("--jobs")
        .arg(jobs)
        .args(args)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.json");
    std::fs::write(
        &cfg,
        r#"{"n": 80, "betas": [0.1, 0.3], "alphas": [0.2, 0.35, 0.5, 0.65, 0.8], "trials": 6,
            "mode": "both", "seed": 11, "per_trial_log": true, "overlay": true}"#,
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap().to_string();
    let commands: Vec<Vec<&str>> = vec![
        vec!["threshold", "--beta", "0.2"],
        vec![
            "width",
            "--n",
            "500",
            "--k",
            "50",
            "--kind",
            "xi",
            "--samples",
            "64",
            "--seed",
            "3",
        ],
        vec![
            "width",
            "--n",
            "500",
            "--k",
            "50",
            "--kind",
            "w",
            "--samples",
            "64",
            "--seed",
            "3",
        ],
        vec![
            "trap", "--n", "120", "--m", "60", "--k", "12", "--trials", "24", "--seed", "8",
        ],
        vec![
            "recover", "--n", "120", "--m", "60", "--k", "12", "--trials", "24", "--seed", "8",
        ],
    ];
    let mut mismatches = Vec::new();
    for c in &commands {
        let base = cli("1", c);
        for jobs in ["2", "4", "7"] {
            if cli(jobs, c) != base {
                mismatches.push(format!("{} --jobs {jobs}", c[0]));
            }
        }
    }
    let outs: Vec<_> = ["1", "3", "6"]
        .iter()
        .map(|jobs| {
            let out = dir.path().join(format!("out{jobs}"));
            let stdout = cli(
                jobs,
                &["phase", "--config", &cfg, "--out", out.to_str().unwrap()],
            );
            (stdout, out)
        })
        .collect();
    for (stdout, out) in &outs[1..] {
        if *stdout != outs[0].0 {
            mismatches.push("phase stdout".into());
        }
        for f in [
            "phase.csv",
            "phase.json",
            "curve.csv",
            "trials.csv",
            "plot_phase.py",
        ] {
            if std::fs::read(out.join(f)).unwrap() != std::fs::read(outs[0].1.join(f)).unwrap() {
                mismatches.push(format!("phase {f}"));
            }
        }
    }
    (
        mismatches.is_empty(),
        format!(
            "{} commands x 4 job counts plus phase x 3 job counts; mismatches: {:?}",
            commands.len(),
            mismatches
        ),
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |id: usize, name: &str, f: &dyn Fn() -> Outcome| {
        let start = Instant::now();
        let (ok, detail) = f();
        println!(
            "criterion {id} [{}] {name}: {detail} ({:.1}s)",
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
        if !ok {
            failed += 1;
        }
    };
    report(1, "threshold/width identity", &threshold_width_identity);
    report(2, "empirical phase transition", &empirical_phase_transition);
    report(3, "strong/weak duality", &duality_suite);
    let (xi, std) = mesh_width();
    report(4, "trapped in a mesh", &|| trapped_direction(xi));
    report(5, "escape through a mesh", &|| escape_direction(xi, std));
    report(6, "recovery/trap correspondence", &correspondence);
    report(7, "oracle equivalence", &oracle_equivalence);
    report(
        8,
        "special functions and epsilon collapse",
        &special_functions,
    );
    report(9, "determinism across job counts", &determinism);
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all 9 acceptance criteria passed");
}
