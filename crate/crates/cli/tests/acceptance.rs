//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use mixing_ustat::conditions::{
    block_schedule, theorem2_check, BetaModel, BoundModel, ConditionConfig, HFunction, RateModel, VarianceModel,
    Verdict,
};
use mixing_ustat::depgraph::{audit_neighborhoods, covariance_gap, factorization_gap, GraphSpec, Observable};
use mixing_ustat::kernel::{
    default_lag_cutoff, hoeffding_projection, yoshihara_sigma2, BuiltinKernel, Kernel, KernelSpec, MonteCarloOptions,
};
use mixing_ustat::mc::{batch_means, run_experiment, simulate_statistics, ExperimentConfig};
use mixing_ustat::process::{Process, ProcessSpec};
use mixing_ustat::stat::{exact_moments, u_statistic, v_statistic};
use mixing_ustat::Mode;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load_experiment(name: &str) -> ExperimentConfig {
    let text = fs::read_to_string(configs_dir().join(name)).expect("config file");
    serde_json::from_str(&text).expect("experiment config")
}

fn chain(p: f64, q: f64) -> Process {
    Process::new(ProcessSpec::two_state(p, q)).unwrap()
}

fn kernel(spec: KernelSpec) -> BuiltinKernel {
    BuiltinKernel::new(spec).unwrap()
}

const PQ: [f64; 3] = [0.2, 0.3, 0.5];

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let (mut instances, mut violations, mut worst) = (0, 0, 0.0_f64);
    for mode in [Mode::U, Mode::V] {
        for r in 1..=3 {
            for m in 0..=2 {
                for n in 1..=12 {
                    if mode == Mode::U && n < r {
                        continue;
                    }
                    let row = audit_neighborhoods(&GraphSpec::new(n, r, m, mode).unwrap()).unwrap();
                    instances += 1;
                    worst = worst.max(row.ratio);
                    if row.max_count as f64 > row.bound {
                        violations += 1;
                    }
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        violations == 0 && secs < 60.0,
        format!("{instances} graphs, {violations} violations, max count/bound {worst:.3}, {secs:.1}s"),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let n = 8;
    let kernels = [kernel(KernelSpec::MatchIndicator), kernel(KernelSpec::KendallSign)];
    let (mut l1_checked, mut l1_bad) = (0usize, 0usize);
    let (mut l2_checked, mut l2_bad) = (0usize, 0usize);
    let mut worst = 0.0_f64;

    // Factorization: every disjoint, separated pair (V1, V2) with |V1| + |V2| ≤ 3.
    for m in 1..=3 {
        let spec = GraphSpec::new(n, 2, m, Mode::U).unwrap();
        let mut all = Vec::new();
        spec.for_each_vertex(|v| all.push(v.to_vec()));
        let mut firsts: Vec<Vec<Vec<usize>>> = all.iter().map(|a| vec![a.clone()]).collect();
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                firsts.push(vec![all[i].clone(), all[j].clone()]);
            }
        }
        for p in PQ {
            for q in PQ {
                let process = chain(p, q);
                for v1 in &firsts {
                    for b in &all {
                        if v1.contains(b) {
                            continue;
                        }
                        let v2 = vec![b.clone()];
                        for k in &kernels {
                            let out = factorization_gap(&process, k, v1, &v2, &spec).unwrap();
                            if !out.separated {
                                continue;
                            }
                            l1_checked += 1;
                            if out.bound > 0.0 {
                                worst = worst.max(out.gap / out.bound);
                            }
                            if out.gap > out.bound + 1e-15 {
                                l1_bad += 1;
                            }
                        }
                    }
                }
            }
        }
    }

    // Covariance: index sets I, I′ ⊂ {1..8} with |I| + |I′| ≤ 4, more than gap_m apart.
    let mut subsets: Vec<Vec<usize>> = Vec::new();
    for mask in 1u32..(1 << n) {
        if mask.count_ones() <= 3 {
            subsets.push((0..n).filter(|i| mask >> i & 1 == 1).map(|i| i + 1).collect());
        }
    }
    let sign = |x: &[f64]| if x.iter().sum::<f64>() * 2.0 > x.len() as f64 { 1.0 } else { -1.0 };
    let prod = |x: &[f64]| x.iter().product::<f64>();
    let first = |x: &[f64]| x[0] - 0.5;
    type Func<'a> = &'a dyn Fn(&[f64]) -> f64;
    let funcs: [(Func, f64); 3] = [(&sign, 1.0), (&prod, 1.0), (&first, 0.5)];
    for gap_m in 1..=3 {
        for p in PQ {
            for q in PQ {
                let process = chain(p, q);
                for i in &subsets {
                    for j in &subsets {
                        if i.len() + j.len() > 4 {
                            continue;
                        }
                        let apart = i.iter().all(|&a| j.iter().all(|&b| a.abs_diff(b) > gap_m));
                        if !apart {
                            continue;
                        }
                        for (fa, ba) in &funcs {
                            for (fb, bb) in &funcs {
                                let g1 = Observable { indices: i.clone(), bound: *ba, f: *fa };
                                let g2 = Observable { indices: j.clone(), bound: *bb, f: *fb };
                                let out = covariance_gap(&process, &g1, &g2, gap_m).unwrap();
                                l2_checked += 1;
                                if out.bound > 0.0 {
                                    worst = worst.max(out.gap / out.bound);
                                }
                                if out.gap > out.bound + 1e-15 {
                                    l2_bad += 1;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        l1_bad == 0 && l2_bad == 0 && l1_checked > 0 && l2_checked > 0 && secs < 300.0,
        format!(
            "factorization: {l1_checked} pairs, {l1_bad} violations; covariance: {l2_checked} pairs, {l2_bad} violations; \
             max gap/bound {worst:.3}, {secs:.1}s"
        ),
    )
}

/// `½ Σ_{A,B} |P(A∩B) − P(A)P(B)|` over cylinders `A = (x_1..x_h)` and
/// `B = (x_{h+t}..x_{2h+t−1})`, computed from the transition matrix alone.
fn cylinder_beta(p: f64, q: f64, t: usize, h: usize) -> f64 {
    let pm = [[1.0 - p, p], [q, 1.0 - q]];
    let pi = [q / (p + q), p / (p + q)];
    let mut pt = [[1.0, 0.0], [0.0, 1.0]];
    for _ in 0..t {
        let mut next = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                next[a][b] = (0..2).map(|c| pt[a][c] * pm[c][b]).sum();
            }
        }
        pt = next;
    }
    // Probability of a word given its first symbol.
    let word = |bits: usize| -> f64 { (1..h).map(|i| pm[(bits >> (i - 1)) & 1][(bits >> i) & 1]).product() };
    let mut total = 0.0;
    for a in 0..(1usize << h) {
        let pa = pi[a & 1] * word(a);
        let last = (a >> (h - 1)) & 1;
        for b in 0..(1usize << h) {
            let within = word(b);
            let pb = pi[b & 1] * within;
            let pab = pa * pt[last][b & 1] * within;
            total += (pab - pa * pb).abs();
        }
    }
    0.5 * total
}

fn criterion_3() -> Outcome {
    let (mut closed_err, mut brute_err) = (0.0_f64, 0.0_f64);
    let grid = [0.05, 0.2, 0.3, 0.5, 0.7, 0.95];
    for p in grid {
        for q in grid {
            let process = chain(p, q);
            let profile = process.beta_profile(40).unwrap();
            for b in &profile {
                let exact = 2.0 * p * q / (p + q).powi(2) * (1.0 - p - q).abs().powi(b.t as i32);
                closed_err = closed_err.max((b.value - exact).abs());
                if b.t <= 8 {
                    for h in 1..=3 {
                        brute_err = brute_err.max((b.value - cylinder_beta(p, q, b.t, h)).abs());
                    }
                }
            }
        }
    }
    outcome(
        closed_err <= 1e-12 && brute_err <= 1e-10,
        format!("max |β − closed form| {closed_err:.2e} (t ≤ 40), max |β − cylinder brute force| {brute_err:.2e}"),
    )
}

fn criterion_4() -> Outcome {
    const N: usize = 200_000;
    let instances: [(ProcessSpec, KernelSpec, usize); 6] = [
        (ProcessSpec::two_state(0.3, 0.3), KernelSpec::MatchIndicator, 4),
        (ProcessSpec::two_state(0.3, 0.3), KernelSpec::ClippedGini { clip: 1.0 }, 6),
        (ProcessSpec::two_state(0.2, 0.5), KernelSpec::MatchIndicator, 6),
        (ProcessSpec::two_state(0.2, 0.5), KernelSpec::ClippedGini { clip: 1.0 }, 5),
        (ProcessSpec::bernoulli(0.3), KernelSpec::MatchIndicator, 5),
        (ProcessSpec::bernoulli(0.3), KernelSpec::ClippedGini { clip: 1.0 }, 3),
    ];
    let mut worst = 0.0_f64;
    for (i, (ps, ks, n)) in instances.into_iter().enumerate() {
        let process = Process::new(ps).unwrap();
        let k = kernel(ks);
        let exact = exact_moments(&process, &k, Mode::U, n).unwrap();
        let values = simulate_statistics(&process, &k, Mode::U, n, 1000 + i as u64, 0, N).unwrap();
        let nf = N as f64;
        let mean = values.iter().sum::<f64>() / nf;
        let c2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf;
        let c4 = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / nf;
        let var = c2 * nf / (nf - 1.0);
        let se_mean = (c2 / nf).sqrt();
        let se_var = ((c4 - c2 * c2) / nf).sqrt();
        worst = worst.max((mean - exact.mean).abs() / se_mean);
        worst = worst.max((var - exact.variance).abs() / se_var);
    }
    outcome(worst <= 4.0, format!("6 instances, N = {N}: largest deviation {worst:.2} SE"))
}

fn criterion_5() -> Outcome {
    let kernels = [
        kernel(KernelSpec::ClippedGini { clip: 1.0 }),
        kernel(KernelSpec::MatchIndicator),
        kernel(KernelSpec::Product { bound: 1.0 }),
    ];
    let processes = [Process::new(ProcessSpec::IidUniform01 {}).unwrap(), chain(0.3, 0.3)];
    let mut worst = 0.0_f64;
    for i in 0..1000u64 {
        let process = &processes[i as usize % 2];
        let k = &kernels[(i as usize / 2) % 3];
        let n = 2 + (i as usize * 7) % 60;
        let path = process.sample_path(n, i).unwrap();
        let u = u_statistic(&path, k).unwrap();
        let v = v_statistic(&path, k).unwrap();
        let diag: f64 = path.iter().enumerate().map(|(j, &x)| k.eval(&[j + 1, j + 1], &[x, x])).sum();
        let rhs = 2.0 * u + diag;
        let rel = (v - rhs).abs() / v.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
    }
    outcome(worst <= 1e-12, format!("1000 paths, max relative error {worst:.2e}"))
}

fn fmt_series(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", ")
}

fn criterion_6() -> Outcome {
    let config = load_experiment("clt_iid_gini.json");
    let start = Instant::now();
    let result = run_experiment(&config).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let ks = result.ks_series();
    let last = result.per_n.last().unwrap();
    let m3 = last.moment(3).map(|m| m.value).unwrap_or(f64::NAN);
    let m4 = last.moment(4).map(|m| m.value).unwrap_or(f64::NAN);
    let decreasing = ks.windows(2).all(|w| w[1] < w[0]);
    let final_ks = *ks.last().unwrap();
    outcome(
        decreasing && final_ks <= 0.02 && (m4 - 3.0).abs() <= 0.15 && m3.abs() <= 0.1 && secs < 600.0,
        format!("KS [{}], m3 {m3:.3}, m4 {m4:.3}, {secs:.1}s", fmt_series(&ks)),
    )
}

fn criterion_7() -> Outcome {
    let config = load_experiment("clt_chain_match.json");
    let result = run_experiment(&config).unwrap();
    let ks = result.ks_series();
    let top = &ks[ks.len() / 2..];
    let decreasing = top.windows(2).all(|w| w[1] < w[0]);
    let final_ks = *ks.last().unwrap();
    let var_last = result.per_n.last().unwrap().var;
    outcome(
        decreasing && final_ks <= 0.03,
        format!("KS [{}], top half decreasing {decreasing}, Var U_n at n=256 {var_last:.4e}", fmt_series(&ks)),
    )
}

fn criterion_8() -> Outcome {
    let config = load_experiment("clt_degenerate.json");
    let result = run_experiment(&config).unwrap();
    let ks = result.ks_series();
    let final_ks = *ks.last().unwrap();
    let Some(s) = result.scaling else {
        return outcome(false, "no variance-scaling estimate");
    };
    outcome(
        s.kappa_hat <= 0.2 && s.flagged && final_ks >= 0.05,
        format!("κ̂ {:.3}, flagged {}, KS at n=256 {final_ks:.4}", s.kappa_hat, s.flagged),
    )
}

fn rate_model(kappa: f64) -> RateModel {
    RateModel {
        r: 2,
        bound: BoundModel::Constant { value: 1.0 },
        variance: VarianceModel::Parametric { c: 1.0, kappa },
        beta: BetaModel::Power { h: HFunction::Ln },
    }
}

fn criterion_9() -> Outcome {
    let b0 = 2.0 / 3.0;
    let config = ConditionConfig::new(rate_model(1.0), vec![1_000, 10_000, 100_000, 1_000_000], vec![b0], b0);
    let report = theorem2_check(&config).unwrap();
    let exponent = report.exponents.iter().find(|e| (e.b - b0).abs() < 1e-12).copied();
    let exponent_ok =
        exponent.is_some_and(|e| (e.analytic + 2.0 / 9.0).abs() < 1e-12 && (e.numeric + 2.0 / 9.0).abs() < 1e-9);
    let rejected = block_schedule(1000, 0.5, b0).is_err()
        && theorem2_check(&ConditionConfig::new(rate_model(b0), vec![1000, 10000], vec![b0], b0)).is_err();
    let t2: Vec<String> = report.points.iter().map(|p| format!("{:.3e}", p.t2)).collect();
    let m: Vec<String> = report.points.iter().map(|p| p.m_n.to_string()).collect();
    outcome(
        report.verdict == Verdict::Decreasing && exponent_ok && rejected,
        format!(
            "verdict {}, exponent {}, κ ≤ b0 rejected {rejected}; m_n [{}], T2 [{}]",
            report.verdict,
            exponent.map(|e| format!("analytic {:.6} numeric {:.6}", e.analytic, e.numeric)).unwrap_or_default(),
            m.join(", "),
            t2.join(", ")
        ),
    )
}

fn criterion_10() -> Outcome {
    let mc = MonteCarloOptions::default();
    let mut details = Vec::new();
    let mut ok = true;

    let uniform = Process::new(ProcessSpec::IidUniform01 {}).unwrap();
    let bern = Process::new(ProcessSpec::bernoulli(0.3)).unwrap();
    let product = kernel(KernelSpec::Product { bound: 1.0 });
    let gini = kernel(KernelSpec::ClippedGini { clip: 1.0 });
    let matcher = kernel(KernelSpec::MatchIndicator);
    // Var f_1(X_1): f_1(x) = x/2 gives 1/48; f_1(x) = x² − x + 1/2 gives 1/180;
    // Bernoulli(0.3) matching has f_1 ∈ {0.7, 0.3} with variance 0.21·0.16.
    let iid_cases: [(&Process, &BuiltinKernel, f64, &str); 3] = [
        (&uniform, &product, 1.0 / 48.0, "uniform product"),
        (&uniform, &gini, 1.0 / 180.0, "uniform gini"),
        (&bern, &matcher, 0.21 * 0.16, "bernoulli match"),
    ];
    for (process, k, want, name) in iid_cases {
        let proj = hoeffding_projection(process, k, mc).unwrap();
        let s = yoshihara_sigma2(process, k, &proj, default_lag_cutoff(process), mc).unwrap();
        let err = (s.sigma2 - want).abs();
        ok &= err <= 1e-12 + 4.0 * s.std_error;
        details.push(format!("{name} σ² {:.15} (|err| {err:.1e})", s.sigma2));
    }

    for (i, k) in [&matcher, &gini].into_iter().enumerate() {
        let process = chain(0.2, 0.5);
        let proj = hoeffding_projection(&process, k, mc).unwrap();
        let s = yoshihara_sigma2(&process, k, &proj, default_lag_cutoff(&process), mc).unwrap();
        let path = process.sample_path(1 << 21, 77 + i as u64).unwrap();
        let series: Vec<f64> = path.iter().map(|&x| proj.f1(k, x)).collect();
        let bm = batch_means(&series, 100).unwrap();
        let se = (bm.std_error.powi(2) + s.std_error.powi(2)).sqrt();
        let z = (s.sigma2 - bm.estimate).abs() / se;
        ok &= z <= 3.0;
        details.push(format!(
            "chain {} σ² {:.5} vs batch means {:.5} ({z:.2} SE)",
            ["match", "gini"][i],
            s.sigma2,
            bm.estimate
        ));
    }
    outcome(ok, details.join("; "))
}

fn run_cli(command: &str, config: &Path, out: &Path, jobs: usize) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_ustat"))
        .args([command, "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(["--jobs", &jobs.to_string()])
        .output()
        .expect("failed to launch ustat")
        .status
        .code()
        .unwrap_or(-1)
}

fn criterion_11() -> Outcome {
    let tmp = tempfile::TempDir::new().unwrap();
    let clt = tmp.path().join("clt.json");
    fs::write(
        &clt,
        r#"{
  "process": { "kind": "finite_markov", "states": [0.0, 1.0], "transition": [[0.8, 0.2], [0.5, 0.5]] },
  "kernel": { "name": "clipped_gini", "params": { "clip": 1.0 } },
  "n_grid": [32, 64],
  "replicates": 4000,
  "seed": 3
}"#,
    )
    .unwrap();
    let dir = configs_dir();
    let cases: Vec<(&str, PathBuf)> = vec![
        ("beta", dir.join("beta_chain.json")),
        ("simulate", dir.join("simulate_chain.json")),
        ("stat", dir.join("stat_gini.json")),
        ("graph-audit", dir.join("graph_audit.json")),
        ("conditions", dir.join("conditions_ln.json")),
        ("oracle", dir.join("oracle_chain.json")),
        ("verify-clt", clt),
    ];
    let mut problems = Vec::new();
    let mut files_compared = 0;
    for (command, config) in &cases {
        let runs: Vec<(PathBuf, i32)> = [1, 1, 8]
            .iter()
            .enumerate()
            .map(|(i, &jobs)| {
                let out = tmp.path().join(format!("{command}-{i}"));
                let code = run_cli(command, config, &out, jobs);
                (out, code)
            })
            .collect();
        if runs.iter().any(|(_, c)| *c != runs[0].1) {
            problems.push(format!("{command}: exit codes differ"));
        }
        let mut names: Vec<String> = fs::read_dir(&runs[0].0)
            .map(|d| d.filter_map(|e| e.ok()).map(|e| e.file_name().to_string_lossy().into_owned()).collect())
            .unwrap_or_default();
        names.retain(|n| n != "timings.json");
        names.sort();
        if names.is_empty() {
            problems.push(format!("{command}: no output"));
        }
        for name in &names {
            let reference = fs::read(runs[0].0.join(name)).unwrap();
            for (out, _) in &runs[1..] {
                if fs::read(out.join(name)).ok().as_ref() != Some(&reference) {
                    problems.push(format!("{command}/{name} differs"));
                }
            }
            files_compared += 1;
        }
    }
    outcome(
        problems.is_empty(),
        if problems.is_empty() {
            format!(
                "{} commands, {files_compared} output files identical over 2 serial runs and 1 run with 8 jobs",
                cases.len()
            )
        } else {
            problems.join("; ")
        },
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("neighbourhood bound audit", criterion_1),
        ("factorization and covariance inequality audit", criterion_2),
        ("β closed form and cylinder brute force", criterion_3),
        ("Monte Carlo vs exact oracle", criterion_4),
        ("V = 2U + diagonal", criterion_5),
        ("CLT, independent case", criterion_6),
        ("CLT, dependent case", criterion_7),
        ("degenerate negative control", criterion_8),
        ("condition evaluator", criterion_9),
        ("σ² consistency", criterion_10),
        ("determinism", criterion_11),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.passed {
            failed += 1;
        }
        println!("criterion {:>2} {}: {name}: {}", i + 1, if o.passed { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
