//! One pass/fail line per acceptance criterion, at the pinned tolerances.
//! Runs without the libtest harness so the lines always print.

use std::fs;
use std::io;
use std::time::{Duration, Instant};

use mmse_lab::degradedness::{is_degraded, Channel, DEFAULT_FEASIBILITY_TOL};
use mmse_lab::exact::mmse_exact;
use mmse_lab::lab::{
    find_scenario, geometric_grid, linear_grid, quantized_uniform_joint, run_scenario, usc_check, usc_hypothesis_holds,
    ConvergenceReport,
};
use mmse_lab::laws;
use mmse_lab::lmmse::{lmmse, lmmse_sequence_limit, SequenceVerdict};
use mmse_lab::mc::{mc_mmse_vs_exact, RegressionConfig};
use mmse_lab::prob::{moments_exact, MomentSummary};
use mmse_lab::random::random_markov_scenario;
use mmse_lab::selftest::{blackwell_ordering, lmmse_dominates_mmse};
use mmse_lab_cli::{cmd_run, Format, RunConfig};

const SEED: u64 = 2024;
const TOL: f64 = 0.02;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn run(name: &str, grid: &[u64]) -> Result<ConvergenceReport, String> {
    let s = find_scenario(name).map_err(|e| e.to_string())?;
    run_scenario(&s, grid, TOL, SEED).map_err(|e| e.to_string())
}

fn c1() -> Outcome {
    let r = run("example1", &linear_grid(1, 100))?;
    let worst = r.rows.iter().map(|row| (row.mmse - 1.0).abs()).fold(0.0, f64::max);
    let gap = r.diagnostics.second_moment_gap;
    check(
        worst <= 1e-12 && r.limit.mmse == 0.0 && (gap - 1.0).abs() <= 1e-12 && r.verdict,
        format!("max |mmse_n − 1| = {worst:e}, limit {}, second-moment gap {gap}", r.limit.mmse),
    )
}

fn c2() -> Outcome {
    let r = run("example2", &linear_grid(1, 16))?;
    let mc = r.rows.iter().map(|row| row.mmse).fold(0.0, f64::max);
    let disc = r.diagnostics.discretized.iter().filter(|d| d.n.is_some()).map(|d| d.fine.max(d.coarse)).fold(0.0, f64::max);
    let limit_disc = r.diagnostics.discretized.iter().find(|d| d.n.is_none()).map_or(f64::NAN, |d| d.fine);
    let target = 1.0 / 12.0;
    check(
        mc <= 1e-3 && disc <= 1e-3 && (r.limit.mmse - target).abs() <= 2e-3 && (limit_disc - target).abs() <= 2e-3,
        format!(
            "max mmse_n (n ≤ 16): MC {mc:.2e}, discretized {disc:.2e}; limit MC {:.5}, discretized {limit_disc:.5}",
            r.limit.mmse
        ),
    )
}

fn c3() -> Outcome {
    let r = run("example3", &linear_grid(1, 64))?;
    let all_zero = r.rows.iter().all(|row| row.mmse == 0.0);
    check(all_zero && r.limit.mmse == 0.5 && r.verdict, format!("all mmse_n = 0: {all_zero}, limit {}", r.limit.mmse))
}

fn c4() -> Outcome {
    let r = run("example4", &geometric_grid(1, 64))?;
    let mc_dec = r.rows.windows(2).all(|w| w[1].mmse <= w[0].mmse + 3.0 * (w[0].std_err + w[1].std_err));
    let fine: Vec<_> = r.diagnostics.discretized.iter().filter(|d| d.n.is_some()).collect();
    let disc_dec = fine.windows(2).all(|w| w[1].fine <= w[0].fine + w[0].bias() + w[1].bias());
    let last = r.rows.last().expect("nonempty");
    let last_disc = fine.last().expect("nonempty").fine;
    check(
        mc_dec && disc_dec && last.mmse <= TOL && last_disc <= TOL && r.limit.mmse <= TOL && r.verdict,
        format!(
            "decreasing: MC {mc_dec}, discretized {disc_dec}; n = 64: MC {:.2e}, discretized {last_disc:.2e}; limit {:.2e}",
            last.mmse, r.limit.mmse
        ),
    )
}

fn c5() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for name in ["cor1_additive", "cor1_additive_fine_x", "cor1_additive_fine_y"] {
        let r = run(name, &geometric_grid(1, 64))?;
        let last = r.rows.last().expect("nonempty").mmse;
        ok &= (last - 0.5).abs() <= TOL && r.verdict;
        parts.push(format!("{name} {last:.5}"));
    }
    check(ok, format!("mmse at n = 64: {}", parts.join(", ")))
}

fn c6() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for name in ["cor2_quantization", "cor2_quantization_fine_x", "cor2_quantization_fine_y"] {
        let r = run(name, &geometric_grid(1, 64))?;
        let last = r.rows.last().expect("nonempty").mmse;
        ok &= (last - 0.5).abs() <= TOL && r.verdict;
        parts.push(format!("{last:.5}"));
    }
    for lambda in [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0] {
        let gamma = lambda / 64.0;
        let joint = quantized_uniform_joint(gamma, lambda).map_err(|e| e.to_string())?;
        let m = mmse_exact(&joint).map_err(|e| e.to_string())?.mmse;
        let rel = (m - lambda * lambda / 12.0).abs() / (lambda * lambda / 12.0);
        ok &= rel <= 0.1;
        parts.push(format!("λ = {lambda}: rel. err {rel:.1e}"));
    }
    check(ok, format!("three paths at 2⁻⁶ and uniform check: {}", parts.join(", ")))
}

fn c7() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["example2", "example3", "example4"] {
        let s = find_scenario(name).map_err(|e| e.to_string())?;
        let r = run_scenario(&s, s.default_grid(), TOL, SEED).map_err(|e| e.to_string())?;
        let usc = usc_check(&r, s.expected(), TOL);
        ok &= usc;
        parts.push(format!("{name} {usc}"));
    }
    let mut random_pass = 0;
    for i in 0..50 {
        let s = random_markov_scenario(SEED, i).map_err(|e| e.to_string())?;
        let r = run_scenario(&s, s.default_grid(), TOL, SEED).map_err(|e| e.to_string())?;
        if usc_check(&r, s.expected(), TOL) && r.diagnostics.markov_verified == Some(true) {
            random_pass += 1;
        }
    }
    ok &= random_pass == 50;
    let s = find_scenario("example1").map_err(|e| e.to_string())?;
    let r = run_scenario(&s, s.default_grid(), TOL, SEED).map_err(|e| e.to_string())?;
    let hyp = usc_hypothesis_holds(&r, TOL);
    let usc1 = usc_check(&r, s.expected(), 0.5);
    ok &= !hyp && !usc1;
    check(
        ok,
        format!(
            "{}, random Markov {random_pass}/50; example1 hypothesis {hyp}, usc_check {usc1}",
            parts.join(", ")
        ),
    )
}

fn c8() -> Outcome {
    let r = blackwell_ordering(SEED, 500);
    check(r.passed() && r.cases == 500, format!("{} cases, {} violations", r.cases, r.failures))
}

fn c9() -> Outcome {
    let bsc = |p| Channel::bsc(p).map_err(|e| e.to_string());
    let fwd = is_degraded(&bsc(0.1)?, &bsc(0.2)?, DEFAULT_FEASIBILITY_TOL).map_err(|e| e.to_string())?;
    let rev = is_degraded(&bsc(0.2)?, &bsc(0.1)?, DEFAULT_FEASIBILITY_TOL).map_err(|e| e.to_string())?;
    let g = &fwd.garbling_matrix;
    let flip_err = (g[0][1] - 0.125).abs().max((g[1][0] - 0.125).abs());
    check(
        fwd.feasible && flip_err <= 1e-6 && !rev.feasible && rev.residual >= 1e-3,
        format!("forward flip error {flip_err:.1e}, reverse residual {:.4}", rev.residual),
    )
}

fn c10() -> Outcome {
    let seq: Vec<MomentSummary> = (1..=200u64).map(|n| moments_exact(&laws::spike_measurement(n))).collect();
    let worst = seq
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let nf = (i + 1) as f64;
            (lmmse(m).value - (1.0 - (1.0 - 1.0 / nf).powi(2) / (2.0 - 1.0 / nf))).abs()
        })
        .fold(0.0, f64::max);
    let limit = moments_exact(&laws::bsc_joint(0.0));
    let mix = lmmse_sequence_limit(&seq, &limit, 0.01, Some(0.5)).map_err(|e| e.to_string())?;
    let dom = lmmse_dominates_mmse(SEED, 200);
    let ex4: Vec<MomentSummary> = (1..=64u64)
        .map(|n| MomentSummary::scalar(0.0, 0.0, 1.0, 1.0 + 1.0 / (n * n) as f64, 1.0))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let ex4_limit = MomentSummary::scalar(0.0, 0.0, 1.0, 1.0, 1.0).map_err(|e| e.to_string())?;
    let conv = lmmse_sequence_limit(&ex4, &ex4_limit, 1e-3, None).map_err(|e| e.to_string())?;
    check(
        worst <= 1e-10
            && mix.verdict == SequenceVerdict::DivergesAsPredicted
            && dom.passed()
            && dom.cases == 200
            && conv.verdict == SequenceVerdict::Converges,
        format!(
            "mixture max error {worst:.1e}, verdict {:?} (limit {}); lmmse ≥ mmse violations {}/200; uniform-noise moments {:?}",
            mix.verdict, mix.limit_value, dom.failures, conv.verdict
        ),
    )
}

fn c11() -> Outcome {
    let mut zs = Vec::new();
    for joint in [laws::rademacher_sum(), laws::bsc_joint(0.1)] {
        for seed in [11u64, 22, 33] {
            let r = mc_mmse_vs_exact(&joint, &RegressionConfig::new(100_000, seed)).map_err(|e| e.to_string())?;
            zs.push(r.z_score);
        }
    }
    let over4 = zs.iter().filter(|z| z.abs() > 4.0).count();
    let over5 = zs.iter().filter(|z| z.abs() > 5.0).count();
    let shown: Vec<String> = zs.iter().map(|z| format!("{z:.2}")).collect();
    check(over4 <= 1 && over5 == 0, format!("z-scores [{}]", shown.join(", ")))
}

fn c12() -> Outcome {
    let mut ok = true;
    let mut files = 0;
    for format in [Format::Csv, Format::Json] {
        let dirs = [tempdir()?, tempdir()?];
        for d in &dirs {
            let config = RunConfig {
                scenario_names: vec!["all".into()],
                grid: None,
                seed: SEED,
                tol_abs: TOL,
                output_dir: d.path().to_path_buf(),
                format,
                jobs: None,
            };
            let code = cmd_run(&config, &mut io::sink(), &mut io::sink());
            ok &= code == 0;
        }
        let mut names: Vec<_> = fs::read_dir(dirs[0].path())
            .map_err(|e| e.to_string())?
            .map(|e| e.map(|e| e.file_name()).map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?;
        names.sort();
        for name in names {
            let a = fs::read(dirs[0].path().join(&name)).map_err(|e| e.to_string())?;
            let b = fs::read(dirs[1].path().join(&name)).map_err(|e| e.to_string())?;
            ok &= a == b;
            files += 1;
        }
    }
    check(ok && files > 0, format!("{files} report files compared across two runs"))
}

fn tempdir() -> Result<tempfile::TempDir, String> {
    tempfile::tempdir().map_err(|e| e.to_string())
}

type Criterion = (&'static str, Option<Duration>, fn() -> Outcome);

fn main() {
    let secs = |s| Some(Duration::from_secs(s));
    let criteria: [Criterion; 12] = [
        ("Example 1 reproduction", secs(1), c1),
        ("Example 2 reproduction", secs(10), c2),
        ("Example 3 reproduction", secs(1), c3),
        ("Example 4 continuity on both paths", secs(60), c4),
        ("additive-noise paths", secs(60), c5),
        ("quantization paths and uniform check", secs(30), c6),
        ("u.s.c. suite", secs(120), c7),
        ("Blackwell ordering suite", secs(10), c8),
        ("degradedness decisions", secs(1), c9),
        ("LMMSE suite", secs(5), c10),
        ("MC-vs-exact agreement", secs(30), c11),
        ("determinism", None, c12),
    ];
    let mut passed = 0;
    for (i, (name, budget, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let in_time = budget.is_none_or(|b| elapsed <= b);
        let budget_text = budget.map_or(String::new(), |b| format!(", limit {} s", b.as_secs()));
        let (ok, detail) = match outcome {
            Ok(d) => (in_time, d),
            Err(d) => (false, d),
        };
        if ok {
            passed += 1;
        }
        println!(
            "{} criterion {:>2} {name}: {detail} [{:.2} s{budget_text}]",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            elapsed.as_secs_f64()
        );
    }
    println!("{passed}/{} criteria passed", criteria.len());
    if passed != criteria.len() {
        std::process::exit(1);
    }
}
