//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails, including on its runtime budget.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use levyflow::config::ExperimentConfig;
use levyflow::kolmogorov::{
    fourier_resolvent, resolvent_mc, ResolventSetup, ScalarFn, DEFAULT_TAIL_TOL,
};
use levyflow::path_sampler::{big_jump_component_indexed, sample_path, sample_path_with};
use levyflow::pathwise_solver::solve_frozen;
use levyflow::runner;
use levyflow::stats::{ks_two_sample, log_log_slope, mean, std_error};
use levyflow::{
    DriftSpec, LevyModel, LevyPath, SamplerOptions, SolverConfig, StableMethod, TimeGrid,
    VerificationReport,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn run_config(text: &str) -> Result<VerificationReport, String> {
    let cfg = ExperimentConfig::from_toml(text).map_err(|e| e.to_string())?;
    runner::execute(&cfg, None)
        .map(|o| o.report)
        .map_err(|e| e.to_string())
}

fn notes(r: &VerificationReport) -> String {
    r.notes
        .iter()
        .filter(|n| n.as_str() != runner::SEED_HASH_NOTE)
        .cloned()
        .collect::<Vec<_>>()
        .join(" | ")
}

fn exponent_exactness() -> Outcome {
    let mut rng = StdRng::seed_from_u64(1);
    let mut worst_rel: f64 = 0.0;
    let mut worst_hom: f64 = 0.0;
    for _ in 0..100 {
        let alpha = 0.1 + 1.9 * rng.random::<f64>();
        let m_par = 0.05 + 3.0 * rng.random::<f64>();
        let d = 1 + (rng.random::<f64>() * 3.0) as usize;
        let h: Vec<f64> = (0..d).map(|_| 20.0 * (rng.random::<f64>() - 0.5)).collect();
        let model = LevyModel::relativistic_stable(d, alpha, m_par, 1.0).unwrap();
        let r2: f64 = h.iter().map(|v| v * v).sum();
        let closed = (r2 + m_par.powf(2.0 / alpha)).powf(alpha / 2.0) - m_par;
        let got = model.exponent(&h).unwrap();
        let err = ((got.re - closed).abs() / closed.abs().max(1.0)).max(got.im.abs());
        worst_rel = worst_rel.max(err);

        let stable = LevyModel::isotropic_stable(d, alpha, 1.0).unwrap();
        let lam = 0.1 + 10.0 * rng.random::<f64>();
        let scaled: Vec<f64> = h.iter().map(|v| v * lam).collect();
        let lhs = stable.exponent(&scaled).unwrap().re;
        let rhs = lam.powf(alpha) * stable.exponent(&h).unwrap().re;
        worst_hom = worst_hom.max((lhs - rhs).abs() / rhs.abs());
    }
    outcome(
        worst_rel <= 1e-12 && worst_hom <= 1e-6,
        format!("relativistic max err {worst_rel:.2e}, homogeneity max rel err {worst_hom:.2e}"),
    )
}

/// Symmetric stable variate with exponent `|h|^α` from an independent generator.
fn oracle_stable(alpha: f64, rng: &mut StdRng) -> f64 {
    let v = PI * (rng.random::<f64>() - 0.5);
    let w = -(1.0 - rng.random::<f64>()).ln();
    if alpha == 1.0 {
        return v.tan();
    }
    (alpha * v).sin() / v.cos().powf(1.0 / alpha)
        * (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha)
}

fn endpoints(model: &LevyModel, n: usize, seed: u64, opts: &SamplerOptions) -> Vec<f64> {
    let grid = Arc::new(TimeGrid::uniform(1.0, 1).unwrap());
    levyflow::verifier::par_map(n, |k| {
        sample_path_with(model, &grid, seed, k as u64, opts).unwrap().node(1)[0]
    })
}

fn marginal_law() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    let trunc = SamplerOptions {
        stable_method: StableMethod::Truncation,
        epsilon: 1e-3,
    };
    for (i, alpha) in [0.8, 1.0, 1.5].into_iter().enumerate() {
        let m = LevyModel::isotropic_stable(1, alpha, 1.0).unwrap();
        let exact = endpoints(&m, 10_000, 1000 + i as u64, &SamplerOptions::default());
        let mut rng = StdRng::seed_from_u64(2000 + i as u64);
        let oracle: Vec<f64> = (0..10_000).map(|_| oracle_stable(alpha, &mut rng)).collect();
        let vs_oracle = ks_two_sample(&exact, &oracle);
        let li = endpoints(&m, 10_000, 3000 + i as u64, &trunc);
        let vs_trunc = ks_two_sample(&exact, &li);
        pass &= vs_oracle.passes(0.01) && vs_trunc.passes(0.01);
        parts.push(format!(
            "α={alpha}: p(oracle)={:.3} p(truncation)={:.3}",
            vs_oracle.p_value, vs_trunc.p_value
        ));
    }
    outcome(pass, parts.join("; "))
}

fn big_jump_moment() -> Outcome {
    let m = LevyModel::isotropic_stable(1, 1.5, 1.0).unwrap();
    let theta = 0.5;
    let bound = m.moment_check(theta).unwrap().integral_estimate;
    let vals: Vec<f64> = levyflow::verifier::par_map(10_000, |k| {
        big_jump_component_indexed(&m, 1.0, 7, k as u64)
            .unwrap()
            .iter()
            .map(|j| j.size[0])
            .sum::<f64>()
            .abs()
            .powf(theta)
    });
    let (mu, se) = (mean(&vals), std_error(&vals));
    outcome(
        mu <= bound + 3.0 * se,
        format!("mean |C_1|^0.5 = {mu:.4} ± {se:.4}, integral {bound:.4}"),
    )
}

fn solver_oracles() -> Outcome {
    let stable = LevyModel::isotropic_stable(1, 1.5, 1.0).unwrap();
    let cfg = SolverConfig::default();

    // zero drift: Y stays at x
    let grid = Arc::new(TimeGrid::uniform(1.0, 1024).unwrap());
    let zero = DriftSpec::zero(1).unwrap();
    let mut zero_dev: f64 = 0.0;
    for seed in 0..5 {
        let p = sample_path(&stable, &grid, seed).unwrap();
        for c in [cfg, SolverConfig::euler()] {
            let y = solve_frozen(&zero, &p, 0.0, &[0.37], &c).unwrap();
            zero_dev = zero_dev.max(y.y_values().iter().map(|v| (v - 0.37).abs()).fold(0.0, f64::max));
        }
    }

    // linear drift on the zero path
    let fine = Arc::new(TimeGrid::uniform(1.0, 4096).unwrap());
    let flat = LevyPath::zero(fine.clone(), 1);
    let mut lin_dev: f64 = 0.0;
    for lam in [1.0, -0.5] {
        let b = DriftSpec::scalar_linear(lam).unwrap();
        let y = solve_frozen(&b, &flat, 0.0, &[1.0], &cfg).unwrap();
        for (i, t) in fine.times().iter().enumerate() {
            lin_dev = lin_dev.max((y.y(i)[0] - (lam * t).exp()).abs());
        }
    }

    // Picard against Euler under grid refinement
    let b = DriftSpec::sqrt_abs().unwrap();
    let sizes = [1024usize, 2048, 4096, 8192, 16384];
    let finest = Arc::new(TimeGrid::uniform(1.0, 16384).unwrap());
    let gaps: Vec<Vec<f64>> = levyflow::verifier::par_map(20, |seed| {
        let p = sample_path(&stable, &finest, seed as u64).unwrap();
        sizes
            .iter()
            .map(|&n| {
                let q = p.coarsen(16384 / n).unwrap();
                let a = solve_frozen(&b, &q, 0.0, &[1.0], &cfg).unwrap();
                let e = solve_frozen(&b, &q, 0.0, &[1.0], &SolverConfig::euler()).unwrap();
                a.y_values()
                    .iter()
                    .zip(e.y_values())
                    .map(|(u, v)| (u - v).abs())
                    .fold(0.0, f64::max)
            })
            .collect()
    });
    let mean_gap: Vec<f64> = (0..sizes.len())
        .map(|l| mean(&gaps.iter().map(|g| g[l]).collect::<Vec<_>>()))
        .collect();
    let dts: Vec<f64> = sizes.iter().map(|n| 1.0 / *n as f64).collect();
    let slope = log_log_slope(&dts, &mean_gap);
    let pass = zero_dev == 0.0
        && lin_dev <= 10.0 * cfg.tol
        && (0.8..=1.3).contains(&slope);
    outcome(
        pass,
        format!(
            "b=0 max dev {zero_dev:.1e}; linear max err {lin_dev:.2e} (10·tol = {:.0e}); Picard–Euler gap {:.2e}→{:.2e}, slope {slope:.3}",
            10.0 * cfg.tol,
            mean_gap[0],
            mean_gap[sizes.len() - 1]
        ),
    )
}

fn lp_lipschitz() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for beta in [0.5, 0.75] {
        let text = format!(
            "experiment = \"verify-lp\"\n\
             [model]\nfamily = \"isotropic_stable\"\nalpha = 1.5\n\
             [drift]\nkind = \"holder_power\"\nbeta = {beta}\n\
             [seeds]\nmaster = 11\n\
             [lp]\np = 2.0\nseparations = [1.0, 0.125, 0.015625]\ns_values = [0.0, 0.3, 0.7]\nn_paths = 2000\n"
        );
        match run_config(&text) {
            Ok(r) => {
                pass &= r.pass;
                parts.push(format!("β={beta}: pass={} ({})", r.pass, notes(&r)));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("β={beta}: error {e}"));
            }
        }
    }
    outcome(pass, parts.join("; "))
}

fn report_outcome(text: &str) -> Outcome {
    match run_config(text) {
        Ok(r) => outcome(
            r.pass,
            format!(
                "residual max {:.3e}; {}",
                r.residual_max.unwrap_or(f64::NAN),
                notes(&r)
            ),
        ),
        Err(e) => outcome(false, format!("error {e}")),
    }
}

const FLOW_BASE: &str = "experiment = \"verify-flow\"\n\
    [model]\nfamily = \"isotropic_stable\"\nalpha = 1.5\n\
    [drift]\nkind = \"holder_power\"\nbeta = 0.6\nclip = 1.0\n\
    [seeds]\nmaster = 13\n";

fn flow_identity() -> Outcome {
    report_outcome(&format!(
        "{FLOW_BASE}[flow]\nidentity = true\nconstancy = false\nn_triples = 100\nn_paths = 20\n"
    ))
}

fn uniqueness() -> Outcome {
    report_outcome(
        "experiment = \"verify-uniqueness\"\n\
         [model]\nfamily = \"isotropic_stable\"\nalpha = 1.5\n\
         [drift]\nkind = \"sqrt_abs\"\n\
         [seeds]\nmaster = 17\n\
         [uniqueness]\nx = [0.0]\nn_starts = 8\nn_paths = 200\ncontrol = true\n",
    )
}

fn constancy() -> Outcome {
    report_outcome(&format!(
        "{FLOW_BASE}[flow]\nidentity = false\nconstancy = true\nn_s_nodes = 64\nn_paths = 20\n"
    ))
}

fn gradient() -> Outcome {
    report_outcome(
        "experiment = \"kolmogorov-gradient\"\n\
         [gradient]\nalpha_list = [0.8, 1.5, 2.0]\n",
    )
}

fn resolvent() -> Outcome {
    let m = LevyModel::isotropic_stable(1, 1.5, 1.0).unwrap();
    let probes = vec![vec![0.0], vec![0.7], vec![1.5], vec![-2.0]];
    let setup = ResolventSetup::new(1.0, 10_000, 19);
    let free = resolvent_mc(&DriftSpec::zero(1).unwrap(), ScalarFn::Cos { k: 1.0 }, &m, &probes, &setup);
    let free = match free {
        Ok(e) => e,
        Err(e) => return outcome(false, format!("error {e}")),
    };
    let mut z_max: f64 = 0.0;
    let mut max_principle = true;
    for (i, x) in probes.iter().enumerate() {
        let exact = fourier_resolvent(&m, 1.0, 1.0, x, free.horizon).unwrap();
        z_max = z_max.max((free.u_values[i] - exact).abs() / free.u_se[i]);
        max_principle &= free.u_values[i].abs() <= 1.0 + DEFAULT_TAIL_TOL;
    }

    let text = "experiment = \"kolmogorov-lambda0\"\n\
         [model]\nfamily = \"isotropic_stable\"\nalpha = 1.5\n\
         [drift]\nkind = \"holder_power\"\nbeta = 0.6\nclip = 1.0\n\
         [seeds]\nmaster = 23\n\
         [lambda0]\nn_paths = 10000\n";
    let (l0_pass, l0_detail) = match run_config(text) {
        Ok(r) => {
            let du: Vec<String> = r
                .rows
                .iter()
                .filter_map(|row| row.stats.get("du_sup").map(|v| format!("{v:.3}")))
                .collect();
            (r.pass, format!("du_sup by λ [{}]; {}", du.join(", "), notes(&r)))
        }
        Err(e) => (false, format!("error {e}")),
    };

    // maximum principle with the drift switched on
    let b = DriftSpec::holder_power(1, 0.6, 1.0).unwrap();
    let mut s = ResolventSetup::new(2.0, 2000, 29);
    s.n_steps = 1024;
    let drifted = resolvent_mc(&b, ScalarFn::DriftComponent { index: 0 }, &m, &probes, &s).unwrap();
    max_principle &= drifted
        .u_values
        .iter()
        .all(|u| u.abs() <= b.sup_norm / 2.0 + s.tail_tol);

    outcome(
        z_max <= 3.0 && max_principle && l0_pass,
        format!(
            "Fourier max |z| {z_max:.2} (limit 3); maximum principle {}; {l0_detail}",
            if max_principle { "holds" } else { "violated" }
        ),
    )
}

const DETERMINISM_CONFIGS: [(&str, &str); 10] = [
    ("sample", "[model]\nfamily = \"isotropic_stable\"\nalpha = 1.3\ndim = 2\n[grid]\nn_steps = 128\n[sample]\nn_paths = 4\n[output]\nwrite_paths = true\n"),
    ("solve", "[model]\nfamily = \"isotropic_stable\"\nalpha = 1.5\n[drift]\nkind = \"sqrt_abs\"\n[grid]\nn_steps = 512\n[solve]\nx = [0.5]\nn_paths = 4\n"),
    ("verify-lp", "[model]\nfamily = \"isotropic_stable\"\nalpha = 1.5\n[drift]\nkind = \"holder_power\"\nbeta = 0.75\n[grid]\nn_steps = 256\n[lp]\nn_paths = 40\n"),
    ("verify-holder", "[model]\nfamily = \"isotropic_stable\"\nalpha = 1.5\n[drift]\nkind = \"holder_power\"\nbeta = 0.6\n[grid]\nn_steps = 256\n[holder]\nn_paths = 12\n"),
    ("verify-uniqueness", "[model]\nfamily = \"isotropic_stable\"\nalpha = 1.5\n[drift]\nkind = \"sqrt_abs\"\n[grid]\nn_steps = 512\n[uniqueness]\nn_paths = 12\n"),
    ("verify-flow", "[model]\nfamily = \"isotropic_stable\"\nalpha = 1.5\n[drift]\nkind = \"holder_power\"\nbeta = 0.6\nclip = 1.0\n[flow]\nn_triples = 10\nn_paths = 3\nn_s_nodes = 8\nlevels = [{ n_steps = 256, tol = 1e-8 }, { n_steps = 512, tol = 5e-9 }]\n"),
    ("verify-cadlag", "[model]\nfamily = \"isotropic_stable\"\nalpha = 1.5\n[drift]\nkind = \"holder_power\"\nbeta = 0.6\n[grid]\nn_steps = 1024\n[cadlag]\nn_x = 3\nk_max = 6\nn_paths = 10\n"),
    ("tanaka-grid", "[grid]\nn_steps = 512\n[tanaka]\nalpha_list = [0.5, 1.5]\nbeta_list = [0.25, 0.75]\nn_starts = 3\nn_paths = 4\n"),
    ("kolmogorov-gradient", "[gradient]\nalpha_list = [1.5]\nn_times = 3\n"),
    ("kolmogorov-lambda0", "[model]\nfamily = \"isotropic_stable\"\nalpha = 1.5\n[drift]\nkind = \"holder_power\"\nbeta = 0.6\nclip = 1.0\n[lambda0]\nlambda_grid = [2.0, 8.0]\nn_steps = 256\nn_paths = 60\n"),
];

fn files_under(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let mut pass = true;
    let mut checked = 0;
    let mut problems = Vec::new();
    for (tag, body) in DETERMINISM_CONFIGS {
        let cfg = root.path().join(format!("{tag}.toml"));
        fs::write(&cfg, format!("experiment = \"{tag}\"\n[seeds]\nmaster = 31\nshards = 2\n{body}")).unwrap();
        let mut outputs = Vec::new();
        for threads in ["1", "2", "4"] {
            let out = root.path().join(format!("{tag}-{threads}"));
            let st = Command::new(env!("CARGO_BIN_EXE_levyflow"))
                .args(["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
                .env("LEVYFLOW_THREADS", threads)
                .output()
                .unwrap();
            if st.status.code() == Some(1) || st.status.code().is_none() {
                pass = false;
                problems.push(format!(
                    "{tag}: run failed: {}",
                    String::from_utf8_lossy(&st.stderr).trim()
                ));
            }
            outputs.push(files_under(&out));
        }
        if outputs[0].is_empty() || outputs.iter().any(|o| o != &outputs[0]) {
            pass = false;
            problems.push(format!("{tag}: outputs differ across thread counts"));
        }
        checked += outputs[0].len();
    }
    outcome(
        pass,
        if problems.is_empty() {
            format!("10 experiments × threads {{1,2,4}}: {checked} files byte-identical")
        } else {
            problems.join("; ")
        },
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, u64, fn() -> Outcome); 11] = [
        ("exponent exactness", 1, exponent_exactness),
        ("marginal law", 30, marginal_law),
        ("big-jump moment bound", 10, big_jump_moment),
        ("solver oracles", 60, solver_oracles),
        ("Lp-Lipschitz ratio", 300, lp_lipschitz),
        ("flow identity", 120, flow_identity),
        ("path-by-path uniqueness", 180, uniqueness),
        ("constancy of the auxiliary function", 120, constancy),
        ("gradient estimate", 30, gradient),
        ("resolvent", 600, resolvent),
        ("determinism", 600, determinism),
    ];
    let mut failed = 0;
    for (i, (name, budget, f)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let o = f();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(budget);
        let ok = o.pass && in_time;
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {:>2} {name}: {} ({:.1} s of {budget} s) {}",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            o.detail
        );
    }
    println!("acceptance: {} of 11 criteria passed", 11 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
