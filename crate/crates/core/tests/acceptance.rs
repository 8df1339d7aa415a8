//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use modshift::experiment::{
    default_grid, generate_data, gradient_fd_error, random_valid_gamma, run_sweep, run_with_data, ExperimentConfig,
    RoundTrace, SweepResult,
};
use modshift::fedcore::{LocalDataset, ModelVector};
use modshift::fim::{
    build_fim, closed_form_eigenvalues, det_via_mdl, is_singular, numeric_eigenvalues, FimContext, SINGULAR_REL_TOL,
};
use modshift::rng::{NoiseStream, SeedTree};
use modshift::shift::{make_gamma, numerical_rank, shift_matrix, validate_gamma, SchemeKind, ShiftScheme};
use modshift::DeltaF64;
use nalgebra::{DMatrix, DVector};

type Outcome = Result<String, String>;

const DIMS: [usize; 4] = [2, 3, 10, 60];

fn main() -> ExitCode {
    let started = Instant::now();
    let mut failed = 0;
    let mut report = |id: usize, name: &str, f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let outcome = f();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  [{id:>2}] {name} ({secs:.1}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  [{id:>2}] {name} ({secs:.1}s): {detail}");
            }
        }
    };

    report(1, "fim singularity suite", &fim_singularity);
    report(2, "constraint-violation control", &constraint_violation);
    report(3, "rank law", &rank_law);
    report(4, "determinant lemma oracle", &determinant_lemma);
    report(5, "tamper test, shift schemes", &tamper_shift);
    report(6, "tamper failure of gaussian injection", &tamper_injection);

    let t = Instant::now();
    let sweep = run_sweep::<f64>(&ExperimentConfig::default(), &default_grid(), 5);
    println!("      comparison sweep, 8 mechanisms x 5 seeds ({:.1}s)", t.elapsed().as_secs_f64());
    report(7, "injection comparison ordering", &|| injection_ordering(&sweep));
    report(8, "scheme comparison ordering", &|| scheme_ordering(&sweep));
    report(9, "secret-channel ledger", &|| ledger(&sweep));
    report(10, "gradient and sanity oracles", &sanity);

    println!("total {:.1}s, {failed} failed", started.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn random_vec(stream: &mut NoiseStream, d: usize) -> Vec<f64> {
    (0..d).map(|_| stream.standard_normal()).collect()
}

/// Max on a random difference, Mean, Comp and 20 random valid custom vectors.
fn valid_gammas(d: usize, stream: &mut NoiseStream) -> Result<Vec<(String, Vec<f64>)>, String> {
    let delta = DeltaF64::new(random_vec(stream, d), 0, 0).map_err(err)?;
    let mut out = Vec::new();
    for kind in [SchemeKind::Max, SchemeKind::Mean, SchemeKind::Comp] {
        out.push((kind.name().to_string(), make_gamma(&ShiftScheme::new(kind), &delta).map_err(err)?));
    }
    for i in 0..20 {
        out.push((format!("custom#{i}"), random_valid_gamma::<f64>(d, stream).map_err(err)?));
    }
    Ok(out)
}

fn fim_singularity() -> Outcome {
    let mut stream = NoiseStream::from_seed(101);
    let mut worst_ratio = 0.0_f64;
    let mut worst_rel = 0.0_f64;
    let mut cases = 0;
    for d in DIMS {
        for (label, gamma) in valid_gammas(d, &mut stream)? {
            let h = 0.5 + 1.5 * stream.uniform();
            let sigma = 0.1 + 0.9 * stream.uniform();
            let ctx = FimContext::new(gamma, h, sigma).map_err(err)?;
            let fim = build_fim(&ctx);
            let numeric = numeric_eigenvalues(&fim);
            let radius = numeric.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
            let smallest = numeric.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
            worst_ratio = worst_ratio.max(smallest / radius);
            check(smallest < SINGULAR_REL_TOL * radius, || {
                format!("d={d} {label}: smallest |eig| {smallest:e} vs radius {radius:e}")
            })?;
            check(is_singular(&fim, SINGULAR_REL_TOL), || format!("d={d} {label}: not flagged singular"))?;
            let closed = closed_form_eigenvalues(&ctx).map_err(err)?;
            for (c, n) in closed.iter().zip(&numeric) {
                let rel = if *c == 0.0 { n.abs() / radius } else { (c - n).abs() / c.abs() };
                worst_rel = worst_rel.max(rel);
                check(rel <= 1e-9, || format!("d={d} {label}: closed {c} vs numeric {n}"))?;
            }
            cases += 1;
        }
    }
    Ok(format!(
        "{cases} cases, max smallest/radius {worst_ratio:.1e}, max spectrum rel error {worst_rel:.1e}"
    ))
}

fn constraint_violation() -> Outcome {
    let mut stream = NoiseStream::from_seed(202);
    let mut min_ratio = f64::INFINITY;
    for i in 0..20 {
        let d = DIMS[i % DIMS.len()];
        let target = if i % 2 == 0 {
            -0.9 + 0.4 * stream.uniform()
        } else {
            -1.5 + 0.4 * stream.uniform()
        };
        let mut gamma = random_vec(&mut stream, d);
        let shift = (target - gamma.iter().sum::<f64>()) / d as f64;
        gamma.iter_mut().for_each(|g| *g += shift);
        let sum: f64 = gamma.iter().sum();
        check((sum - target).abs() < 1e-12 && !validate_gamma(&gamma), || {
            format!("case {i}: sum {sum} off target {target}")
        })?;
        let fim = build_fim(&FimContext::new(gamma, 1.0, 1.0).map_err(err)?);
        let eig = numeric_eigenvalues(&fim);
        let radius = eig.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        min_ratio = min_ratio.min(eig.iter().fold(f64::INFINITY, |m, x| m.min(x.abs())) / radius);
        check(!is_singular(&fim, SINGULAR_REL_TOL), || format!("case {i}: sum {sum} judged singular"))?;
    }
    Ok(format!("20 cases regular, min smallest/radius {min_ratio:.2e}"))
}

fn rank_law() -> Outcome {
    let mut stream = NoiseStream::from_seed(101);
    let mut cases = 0;
    for d in DIMS {
        for (label, gamma) in valid_gammas(d, &mut stream)? {
            let rank = numerical_rank(&shift_matrix(&gamma));
            check(rank == d - 1, || format!("d={d} {label}: rank {rank}"))?;
            cases += 1;
        }
    }
    Ok(format!("{cases} matrices of rank d-1"))
}

fn determinant_lemma() -> Outcome {
    let mut stream = NoiseStream::from_seed(303);
    let mut worst = 0.0_f64;
    for i in 0..100 {
        let d = 1 + (stream.uniform() * 10.0) as usize;
        let m = 1 + (stream.uniform() * 3.0) as usize;
        let a = (0.2 + 2.0 * stream.uniform()) * if i % 3 == 0 { -1.0 } else { 1.0 };
        let u = DMatrix::from_vec(d, m, random_vec(&mut stream, d * m));
        let v = DMatrix::from_vec(d, m, random_vec(&mut stream, d * m));
        let dense = (DMatrix::identity(d, d) * a + &u * v.transpose()).determinant();
        let lemma = det_via_mdl(a, &u, &v).map_err(err)?;
        let rel = (dense - lemma).abs() / dense.abs().max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
        check(rel <= 1e-8, || format!("case {i} (d={d}, m={m}): dense {dense:e} vs lemma {lemma:e}"))?;
    }
    Ok(format!("100 instances, max rel error {worst:.1e}"))
}

fn noiseless(scheme: SchemeKind) -> ExperimentConfig {
    ExperimentConfig {
        channel_noise_var: 0.0,
        scheme,
        ..Default::default()
    }
}

fn tamper_shift() -> Outcome {
    let base = noiseless(SchemeKind::Max);
    let data = generate_data::<f64>(&base, &SeedTree::new(base.master_seed)).map_err(err)?;
    let mut notes = Vec::new();
    let sqrt_d = (base.d as f64).sqrt();
    for (scheme, factor) in [
        (SchemeKind::Max, 1.0 + sqrt_d),
        (SchemeKind::Mean, 2.0),
        (SchemeKind::Comp, 1.0 + sqrt_d),
    ] {
        let out = run_with_data(&noiseless(scheme), &data, |_| {}).map_err(err)?;
        let rate = out.summary.tamper_pass_rate.unwrap_or(0.0);
        check(rate == 1.0, || format!("{}: pass rate {rate}", scheme.name()))?;
        let mut homogeneous = 0;
        for t in &out.traces {
            if t.bob_update_norm > 0.0 && (t.tamper_bound / t.bob_update_norm - factor).abs() < 1e-9 * factor {
                homogeneous += 1;
            }
        }
        check(homogeneous == out.summary.homogeneous_gamma_rounds, || {
            format!("{}: bound factor {factor:.4} in {homogeneous} rounds, homogeneous {}", scheme.name(), out.summary.homogeneous_gamma_rounds)
        })?;
        if scheme != SchemeKind::Max {
            check(homogeneous == base.rounds, || format!("{}: factor {factor} only in {homogeneous} rounds", scheme.name()))?;
        }
        notes.push(format!(
            "{} 100% (factor {factor:.3} in {homogeneous}/{} rounds)",
            scheme.name(),
            base.rounds
        ));
    }
    let het = ExperimentConfig {
        random_agent_gammas: true,
        ..noiseless(SchemeKind::Custom)
    };
    let out = run_with_data(&het, &data, |_| {}).map_err(err)?;
    let rate = out.summary.tamper_pass_rate.unwrap_or(0.0);
    check(rate == 1.0, || format!("heterogeneous: pass rate {rate}"))?;
    notes.push("heterogeneous alpha form 100%".into());
    Ok(notes.join("; "))
}

fn final_quarter(traces: &[RoundTrace]) -> &[RoundTrace] {
    &traces[traces.len() - traces.len() / 4..]
}

fn tamper_injection() -> Outcome {
    let cfg = ExperimentConfig {
        baseline_kind: Some(modshift::baselines::InjectionKind::Gaussian),
        baseline_beta_sq: Some(1.0),
        ..noiseless(SchemeKind::None)
    };
    let data = generate_data::<f64>(&cfg, &SeedTree::new(cfg.master_seed)).map_err(err)?;
    let out = run_with_data(&cfg, &data, |_| {}).map_err(err)?;
    let tail = final_quarter(&out.traces);
    let bob_max = tail.iter().map(|t| t.bob_update_norm).fold(0.0, f64::max);
    let eve_min = tail.iter().map(|t| t.eve_update_norm).fold(f64::INFINITY, f64::min);
    check(bob_max < 1e-4, || format!("bob update norm reaches {bob_max:e} in the final quarter"))?;
    check(eve_min > 1e-3, || format!("eve update norm drops to {eve_min:e}"))?;
    Ok(format!("final quarter: bob <= {bob_max:.2e}, eve >= {eve_min:.3}"))
}

fn mean_of(sweep: &SweepResult, label: &str) -> Result<(f64, f64), String> {
    let e = sweep.entry(label).ok_or_else(|| format!("missing entry {label}"))?;
    Ok((e.mean_final_loss_eve, e.mean_final_shift_vs_bob))
}

fn bob_bitwise(sweep: &SweepResult) -> Result<(), String> {
    for (i, seed) in sweep.seeds.iter().enumerate() {
        let reference = sweep.entries[0].runs[i].final_loss_bob;
        for e in &sweep.entries {
            let v = e.runs[i].final_loss_bob;
            check(v.to_bits() == reference.to_bits(), || {
                format!("seed {seed}: bob final loss {v:e} for {} vs {reference:e}", e.label)
            })?;
        }
    }
    Ok(())
}

fn injection_ordering(sweep: &modshift::Result<SweepResult>) -> Outcome {
    let sweep = sweep.as_ref().map_err(err)?;
    check(sweep.seeds.len() >= 5, || "fewer than 5 seeds".into())?;
    let tiers: [&[&str]; 4] = [&["max"], &["gaussian_1", "laplace_1"], &["gaussian_0.1", "laplace_0.1"], &["none"]];
    for metric in 0..2 {
        let name = ["eve loss", "shift"][metric];
        let value = |l: &str| mean_of(sweep, l).map(|v| if metric == 0 { v.0 } else { v.1 });
        for pair in tiers.windows(2) {
            for hi in pair[0] {
                for lo in pair[1] {
                    let (a, b) = (value(hi)?, value(lo)?);
                    check(a > b, || format!("{name}: {hi} {a:e} not above {lo} {b:e}"))?;
                }
            }
        }
    }
    bob_bitwise(sweep)?;
    let m = |l| mean_of(sweep, l).map(|v| v.1);
    Ok(format!(
        "shift max {:.1} > g1 {:.2}, l1 {:.2} > g0.1 {:.2}, l0.1 {:.2} > none {:.3}; bob bitwise equal over {} seeds",
        m("max")?,
        m("gaussian_1")?,
        m("laplace_1")?,
        m("gaussian_0.1")?,
        m("laplace_0.1")?,
        m("none")?,
        sweep.seeds.len()
    ))
}

fn scheme_ordering(sweep: &modshift::Result<SweepResult>) -> Outcome {
    let sweep = sweep.as_ref().map_err(err)?;
    let (max, mean, comp, none) = (
        mean_of(sweep, "max")?,
        mean_of(sweep, "mean")?,
        mean_of(sweep, "comp")?,
        mean_of(sweep, "none")?,
    );
    check(max.0 >= mean.0 && max.0 >= comp.0, || format!("eve loss: max {} mean {} comp {}", max.0, mean.0, comp.0))?;
    check(max.1 >= mean.1 && max.1 >= comp.1, || format!("shift: max {} mean {} comp {}", max.1, mean.1, comp.1))?;
    for (l, v) in [("max", max), ("mean", mean), ("comp", comp)] {
        check(v.0 > none.0 && v.1 > none.1, || format!("{l} does not exceed none"))?;
    }

    let base = ExperimentConfig::default();
    let weights_sq: f64 = 1.0 / base.agents as f64;
    let floor = (base.d as f64 * base.eve_noise_var() * weights_sq).sqrt();
    let mut tails = Vec::new();
    for l in ["max", "mean", "comp"] {
        let e = sweep.entry(l).ok_or("missing entry")?;
        let traces = e.mean_traces();
        let tail = final_quarter(&traces);
        let mean_norm = tail.iter().map(|t| t.eve_update_norm).sum::<f64>() / tail.len() as f64;
        check(mean_norm <= 2.0 * floor, || format!("{l}: final-quarter eve update norm {mean_norm} vs floor {floor}"))?;
        tails.push(format!("{l} {mean_norm:.3}"));
    }
    Ok(format!(
        "shift max {:.1} >= mean {:.1}, comp {:.1} > none {:.3}; final-quarter eve update norms {} vs floor {floor:.3}",
        max.1,
        mean.1,
        comp.1,
        none.1,
        tails.join(", ")
    ))
}

fn ledger(sweep: &modshift::Result<SweepResult>) -> Outcome {
    let sweep = sweep.as_ref().map_err(err)?;
    let base = ExperimentConfig::default();
    let nk = (base.rounds * base.agents) as u64;
    let shift = sweep.entry("max").ok_or("missing max")?.runs[0].ledger_total;
    let inj = sweep.entry("gaussian_1").ok_or("missing gaussian_1")?.runs[0].ledger_total;
    let none = sweep.entry("none").ok_or("missing none")?.runs[0].ledger_total;
    check(shift == nk, || format!("shift total {shift}, expected {nk}"))?;
    check(inj == nk * base.d as u64, || format!("injection total {inj}"))?;
    check(none == 0, || format!("none total {none}"))?;
    check(inj / shift == 60 && inj % shift == 0, || "ratio not exactly 60".into())?;
    Ok(format!("shift {shift}, injection {inj}, ratio {}", inj / shift))
}

fn sanity() -> Outcome {
    let mut stream = NoiseStream::from_seed(404);
    let mut worst = 0.0_f64;
    for i in 0..100 {
        let d = 1 + (stream.uniform() * 12.0) as usize;
        let n = 1 + (stream.uniform() * 30.0) as usize;
        let features = random_vec(&mut stream, n * d);
        let labels = random_vec(&mut stream, n).iter().map(|y| 3.0 * y).collect();
        let data = LocalDataset::new(0, d, features, labels).map_err(err)?;
        let w = ModelVector::new(random_vec(&mut stream, d).iter().map(|x| 2.0 * x).collect()).map_err(err)?;
        let e = gradient_fd_error(&w, &data).map_err(err)?;
        worst = worst.max(e);
        check(e <= 1e-6, || format!("case {i}: relative error {e:e}"))?;
    }

    let cfg = ExperimentConfig {
        scheme: SchemeKind::None,
        channel_noise_var: 0.0,
        ..Default::default()
    };
    let data = generate_data::<f64>(&cfg, &SeedTree::new(cfg.master_seed)).map_err(err)?;
    let w_star = cfg.w_star().map_err(err)?;
    let (gram, rhs) = pooled_normal_equations(&data, cfg.d);
    let solution = gram
        .cholesky()
        .ok_or("pooled gram matrix not positive definite")?
        .solve(&rhs);
    let ls_err = solution
        .iter()
        .zip(&w_star)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    check(ls_err < 0.01, || format!("least squares error {ls_err}"))?;

    let out = run_with_data(&cfg, &data, |_| {}).map_err(err)?;
    check(out.final_eve == out.final_bob, || "noiseless none: eve differs from bob".into())?;
    check(out.traces.iter().all(|t| t.shift_vs_bob == 0.0), || "nonzero shift in some round".into())?;
    Ok(format!(
        "gradient max rel error {worst:.1e}; least squares max error {ls_err:.2e}; eve == bob over {} rounds",
        cfg.rounds
    ))
}

fn pooled_normal_equations(data: &[LocalDataset<f64>], d: usize) -> (DMatrix<f64>, DVector<f64>) {
    let mut gram = DMatrix::zeros(d, d);
    let mut rhs = DVector::zeros(d);
    for ds in data {
        for (x, y) in ds.rows() {
            let x = DVector::from_column_slice(x);
            gram += &x * x.transpose();
            rhs += x * y;
        }
    }
    (gram, rhs)
}
