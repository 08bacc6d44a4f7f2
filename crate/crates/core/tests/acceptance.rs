//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use parea_core::exec;
use parea_core::grid::{gradient, integrate, GridDomain, ScalarField, VectorField};
use parea_core::horizontal::{curl_matrix, structure_identity_residual, DEFAULT_TAU};
use parea_core::integrability::{
    closure_condition_residual, renormalize, tangential_condition_residual, DEFAULT_ETA,
};
use parea_core::reconstruction::{reconstruct, verify_normal, Integrator, DEFAULT_CLOSED_TOL};
use parea_core::scenarios::{
    builtin_scenario, builtin_scenario_with, perturbed_init, random_smooth_field,
    random_smooth_scalar, run, ExperimentConfig, Operation, SCENARIO_NAMES,
};
use parea_core::skew::{
    normal_pair_audit, projection_residual, random_unit, rank2_factorize,
    skew_rank, SkewMatrix, DEFAULT_RANK_TOL,
};
use parea_core::variational::{
    div_b, first_variation, functional, line_profile, minimize, uniqueness_audit, BCoefficients,
    MinimizeOptions,
};
use parea_core::{field_scale, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Verdict and a one-line account of the measured values.
type Verdict = Result<(bool, String)>;

fn ratios(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| w[0] / w[1]).collect()
}

fn second_order(errors: &[f64]) -> bool {
    ratios(errors).iter().all(|r| (3.4..=4.6).contains(r))
}

fn fmt_list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn square(lo: f64, hi: f64, n: usize) -> Arc<GridDomain> {
    Arc::new(GridDomain::cube(2, lo, hi, n).unwrap())
}

fn twin_pair() -> Verdict {
    let sc = builtin_scenario("twin_normals")?;
    let (u, v) = (sc.u.as_ref().unwrap(), sc.v.as_ref().unwrap());
    let r = uniqueness_audit(u, v, &sc.f, &sc.h, &sc.b, DEFAULT_TAU, DEFAULT_ETA)?;
    let ok = r.normal_max <= 1e-12
        && (r.gradient_gap - 1.0).abs() <= 1e-12
        && r.rank_nowhere()
        && r.nonintegrable_nowhere();
    Ok((
        ok,
        format!(
            "normal gap {:.2e}, gradient gap {:.15}, rank>=3 nowhere {}, nonintegrable nowhere {}",
            r.normal_max,
            r.gradient_gap,
            r.rank_nowhere(),
            r.nonintegrable_nowhere()
        ),
    ))
}

fn heisenberg_structure() -> Verdict {
    let sc = builtin_scenario("heisenberg(1)")?;
    let h = curl_matrix(&sc.f);
    let curl_ok = h.entry(0, 1).iter().all(|v| *v == 2.0) && h.get(1, 0, 0) == -2.0;
    let a = BCoefficients::from_pairs(2, &[((0, 1), 1.0)])?;
    let div_ok = div_b(&sc.f, &a)?.values().iter().all(|v| *v == 2.0);
    let sc2 = builtin_scenario("heisenberg(2)")?;
    let h2 = curl_matrix(&sc2.f);
    let rank4 = (0..sc2.domain.len())
        .filter(|&k| skew_rank(&h2.matrix_at(k), DEFAULT_RANK_TOL) == 4)
        .count();
    let ok = curl_ok && div_ok && rank4 == sc2.domain.len();
    Ok((
        ok,
        format!(
            "curl exact {curl_ok}, div_b exact {div_ok}, rank 4 at {rank4}/{} nodes",
            sc2.domain.len()
        ),
    ))
}

fn round_trip() -> Verdict {
    let mut pot = Vec::new();
    let mut nerr = Vec::new();
    let mut werr = Vec::new();
    let mut consts = Vec::new();
    for n in [33, 65, 129] {
        let sc = builtin_scenario_with("round_trip", Some(&[n]))?;
        let (nu, d) = (sc.nu.as_ref().unwrap(), sc.d.as_ref().unwrap());
        let truth = sc.u.as_ref().unwrap();
        let base = sc.domain.lowest_corner();
        let p = reconstruct(nu, d, &sc.f, base, DEFAULT_CLOSED_TOL, Integrator::Staircase)?;
        let err = p.field.sub(&truth.shifted(-truth.get(base)))?.max_abs();
        let chk = verify_normal(&p.field, nu, d, &sc.f, DEFAULT_TAU)?;
        let h = sc.domain.spacing()[0];
        pot.push(err);
        nerr.push(chk.normal_error);
        werr.push(chk.weight_error);
        consts.push(err / (h * h));
    }
    let ok = second_order(&pot) && second_order(&nerr) && second_order(&werr);
    Ok((
        ok,
        format!(
            "potential errors {} ratios {}, err/h^2 {}, normal error ratios {}, weight error ratios {}",
            fmt_list(&pot),
            fmt_list(&ratios(&pot)),
            fmt_list(&consts),
            fmt_list(&ratios(&nerr)),
            fmt_list(&ratios(&werr))
        ),
    ))
}

fn negative_controls() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["flat_normal", "constant_normal"] {
        for o in builtin_scenario(name)?.check() {
            ok &= o.passed;
            parts.push(format!("{name}/{} {:.2e}", o.label, o.measured));
        }
    }
    Ok((ok, parts.join(", ")))
}

fn normal_vec(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    (0..m).map(|_| rng.sample(StandardNormal)).collect()
}

fn frob_diff(a: &SkewMatrix, b: &SkewMatrix) -> f64 {
    a.upper()
        .iter()
        .zip(b.upper())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
        * std::f64::consts::SQRT_2
}

fn skew_suite() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut failures = Vec::new();
    let (mut worst_trace, mut worst_fact, mut worst_proj, mut worst_rho) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    for m in 2..=6 {
        for _ in 0..10_000 {
            // sum of k random wedges has rank 2k for k <= m/2
            let k = rng.random_range(0..=m / 2);
            let mut s = SkewMatrix::zeros(m);
            for _ in 0..k {
                let w = SkewMatrix::wedge(&normal_vec(&mut rng, m), &normal_vec(&mut rng, m))?;
                let sum: Vec<f64> = s.upper().iter().zip(w.upper()).map(|(a, b)| a + b).collect();
                s = SkewMatrix::from_upper(m, sum)?;
            }
            let rank = skew_rank(&s, DEFAULT_RANK_TOL);
            if rank % 2 != 0 || rank != 2 * k {
                failures.push(format!("m={m} k={k} rank {rank}"));
            }
            let full = SkewMatrix::from_upper(m, normal_vec(&mut rng, m * (m - 1) / 2))?;
            let tr = full.trace_of_square();
            let lam2: f64 = full.pair_magnitudes().iter().map(|l| l * l).sum();
            worst_trace = worst_trace.max((tr + 2.0 * lam2).abs() / tr.abs());
            if skew_rank(&full, DEFAULT_RANK_TOL) % 2 != 0 {
                failures.push(format!("m={m} odd rank"));
            }

            let s2 = SkewMatrix::wedge(&normal_vec(&mut rng, m), &normal_vec(&mut rng, m))?;
            let nrm = s2.frobenius_norm();
            let fac = rank2_factorize(&s2, DEFAULT_RANK_TOL)?;
            worst_fact = worst_fact.max(frob_diff(&fac.reconstruct()?, &s2) / nrm);
            worst_proj = worst_proj.max(projection_residual(&s2, &fac.nu)?.frobenius_norm() / nrm);
            let nu = random_unit(m, &mut rng);
            let audit = normal_pair_audit(&s2, &nu, DEFAULT_RANK_TOL)?;
            let l2 = fac.lambda * fac.lambda;
            worst_rho = worst_rho.max((audit.rho + l2).abs() / l2);
            if !audit.passes() {
                failures.push(format!("m={m} audit {audit:?}"));
            }
        }
    }
    let ok = failures.is_empty()
        && worst_trace <= 1e-9
        && worst_fact <= 1e-10
        && worst_proj <= 1e-10
        && worst_rho <= 1e-9;
    Ok((
        ok,
        format!(
            "5e4 matrices per family: rank failures {}, trace {:.1e}, factorization {:.1e}, projection {:.1e}, rho {:.1e}{}",
            failures.len(),
            worst_trace,
            worst_fact,
            worst_proj,
            worst_rho,
            failures.first().map(|f| format!(", first failure {f}")).unwrap_or_default()
        ),
    ))
}

/// Smooth `u` and `F = F_rand + (c, 0, ...)`, with `c` large enough that the
/// weight stays at least `1` on the finest grid.
fn structure_identity() -> Verdict {
    let levels = [65, 129, 257];
    let mut all_ok = true;
    let mut parts = Vec::new();
    for seed in [11_u64, 12, 13] {
        let fine = square(0.0, 1.0, *levels.last().unwrap());
        let u = random_smooth_scalar(fine.clone(), seed, 2)?;
        let fr = random_smooth_field(fine.clone(), seed + 100, 2)?;
        let g = gradient(&u).add(&fr)?.norm().max_abs();
        let c = g + 1.0;
        let mut errs = Vec::new();
        let mut min_w = f64::INFINITY;
        for &n in &levels {
            let dom = square(0.0, 1.0, n);
            let u = random_smooth_scalar(dom.clone(), seed, 2)?;
            let f = random_smooth_field(dom.clone(), seed + 100, 2)?
                .add(&VectorField::constant(dom.clone(), &[c, 0.0])?)?;
            let w = parea_core::horizontal::weight(&u, &f)?;
            min_w = min_w.min(w.values().iter().copied().fold(f64::INFINITY, f64::min));
            let (res, mask) = structure_identity_residual(&u, &f, DEFAULT_TAU)?;
            assert!(mask.is_empty());
            errs.push(res.max_abs());
        }
        let ok = second_order(&errs) && min_w >= 0.1;
        all_ok &= ok;
        parts.push(format!(
            "seed {seed}: min weight {min_w:.2}, errors {} ratios {}",
            fmt_list(&errs),
            fmt_list(&ratios(&errs))
        ));
    }
    Ok((all_ok, parts.join("; ")))
}

fn convexity_and_variation() -> Verdict {
    let eps: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let mut worst = f64::INFINITY;
    for i in 0..100_u64 {
        let (m, n) = if i % 2 == 0 { (2, 17) } else { (3, 9) };
        let dom = Arc::new(GridDomain::cube(m, -1.0, 1.0, n)?);
        let u = random_smooth_scalar(dom.clone(), 4 * i, 2)?;
        let v = random_smooth_scalar(dom.clone(), 4 * i + 1, 2)?;
        let noise = random_smooth_field(dom.clone(), 4 * i + 2, 2)?;
        // half the instances put u near its singular set
        let f = if i % 4 < 2 {
            noise
        } else {
            gradient(&u).scaled(-1.0).add(&noise.scaled(0.05))?
        };
        let h = random_smooth_scalar(dom, 4 * i + 3, 1)?;
        let p = line_profile(&u, &v, &f, &h, &eps)?;
        worst = worst.min(p.min_second_difference / p.scale);
    }

    let sc = builtin_scenario("twin_normals")?;
    let (u, v) = (sc.u.as_ref().unwrap(), sc.v.as_ref().unwrap());
    let grid: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    let prof = line_profile(u, v, &sc.f, &sc.h, &grid)?;
    let vals: Vec<f64> = prof.points.iter().map(|p| p.1).collect();
    let affine = vals
        .windows(3)
        .map(|w| (w[0] - 2.0 * w[1] + w[2]).abs())
        .fold(0.0, f64::max);

    let dom = square(-1.0, 1.0, 33);
    let u = random_smooth_scalar(dom.clone(), 77, 2)?;
    let phi = random_smooth_scalar(dom.clone(), 78, 2)?;
    let f = gradient(&u).scaled(-1.0);
    let h = ScalarField::zeros(dom);
    let var = first_variation(&u, &phi, &f, &h, DEFAULT_TAU)?;
    let expect = 2.0 * integrate(&gradient(&phi).norm());
    let jump = (var.right - var.left - expect).abs();
    let full = var.singular_nodes == u.domain().len();

    let ok = worst >= -1e-8 && affine <= 1e-10 && jump <= 1e-10 && full;
    Ok((
        ok,
        format!(
            "min scaled second difference {worst:.2e}, affine profile {affine:.1e}, variation jump error {jump:.1e} (full mask {full})"
        ),
    ))
}

fn minimizer_agreement() -> Verdict {
    let sc = builtin_scenario("heisenberg(1)")?;
    let boundary = sc.u.clone().unwrap();
    let opts = MinimizeOptions::default();
    let mut runs = Vec::new();
    let mut parts = Vec::new();
    let mut ok = true;
    for seed in [1_u64, 2] {
        let init = perturbed_init(&boundary, seed, 3, 0.5)?;
        let r = minimize(&sc.f, &sc.h, &boundary, &init, &opts)?;
        let (fi, fw) = (functional(&init, &sc.f, &sc.h)?, functional(&r.field, &sc.f, &sc.h)?);
        let res = r.final_residual();
        ok &= r.converged() && fw <= fi && res <= 1e-5;
        parts.push(format!("seed {seed}: F {fi:.6} -> {fw:.9}, residual {res:.1e}"));
        runs.push(r.field);
    }
    let gap = runs[0].sub(&runs[1])?.max_abs();
    let scale = field_scale(runs[0].values()).max(field_scale(runs[1].values()));
    let audit = uniqueness_audit(&runs[0], &runs[1], &sc.f, &sc.h, &sc.b, DEFAULT_TAU, DEFAULT_ETA)?;
    ok &= gap <= 5e-3 * scale && audit.orthogonality_residual <= 1e-4;
    parts.push(format!(
        "gap {gap:.2e} (limit {:.2e}), orthogonality residual {:.2e}",
        5e-3 * scale,
        audit.orthogonality_residual
    ));
    Ok((ok, parts.join("; ")))
}

fn equivalence_level(seed: u64, n: usize) -> Result<f64> {
    let dom = square(0.0, 1.0, n);
    let raw = random_smooth_field(dom.clone(), seed, 2)?
        .add(&VectorField::constant(dom.clone(), &[3.0, 0.0])?)?;
    let nu = renormalize(&raw)?;
    let d = random_smooth_scalar(dom.clone(), seed + 1000, 2)?.shifted(2.0);
    let f = random_smooth_field(dom, seed + 2000, 2)?;
    let a = closure_condition_residual(&nu, &d, &f)?;
    let b = tangential_condition_residual(&nu, &d, &f)?;
    let plus = a.add(&b)?.norm().max_abs();
    let minus = a.sub(&b)?.norm().max_abs();
    Ok(plus.min(minus))
}

fn closure_equivalence() -> Verdict {
    let mut worst_coarse: f64 = 0.0;
    let mut ratio_range = (f64::INFINITY, 0.0_f64);
    for seed in 0..20 {
        let coarse = equivalence_level(seed, 65)?;
        let fine = equivalence_level(seed, 129)?;
        worst_coarse = worst_coarse.max(coarse);
        let r = coarse / fine;
        ratio_range = (ratio_range.0.min(r), ratio_range.1.max(r));
    }
    let ok = worst_coarse <= 1e-2 && ratio_range.0 >= 3.4 && ratio_range.1 <= 4.6;
    Ok((
        ok,
        format!(
            "worst residual at 65^2 {worst_coarse:.2e}, refinement ratios in [{:.2}, {:.2}]",
            ratio_range.0, ratio_range.1
        ),
    ))
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

fn determinism() -> Verdict {
    let tmp = tempfile::tempdir().map_err(|e| parea_core::Error::InvalidArgument(e.to_string()))?;
    let mut configs = Vec::new();
    for name in SCENARIO_NAMES {
        let mut c = ExperimentConfig::new(Operation::Scenario);
        c.scenario = Some(name.to_string());
        c.seed = 9;
        configs.push(c);
    }
    let mut c = ExperimentConfig::new(Operation::Minimize);
    c.scenario = Some("heisenberg(1)".into());
    c.resolution = Some(vec![17]);
    c.seed = 9;
    configs.push(c);

    let mut mismatches = Vec::new();
    let mut files = 0;
    for (i, base) in configs.iter().enumerate() {
        let mut outputs = Vec::new();
        for (j, parallel) in [true, true, false].into_iter().enumerate() {
            exec::set_parallel(parallel);
            let mut c = base.clone();
            c.out = tmp.path().join(format!("{i}_{j}"));
            let r = run(&c);
            if r.status != 0 {
                mismatches.push(format!("run {i} exited {}", r.status));
            }
            outputs.push(csv_files(&c.out));
        }
        exec::set_parallel(true);
        files += outputs[0].len();
        if outputs[0].is_empty() || outputs.iter().any(|o| *o != outputs[0]) {
            mismatches.push(format!("{:?}", base.scenario));
        }
    }
    Ok((
        mismatches.is_empty(),
        format!(
            "{} configurations, {files} CSV files, byte-identical across repeats and sequential mode: {}",
            configs.len(),
            if mismatches.is_empty() { "yes".to_string() } else { mismatches.join(", ") }
        ),
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, Duration, fn() -> Verdict); 10] = [
        ("twin normals in the plane", Duration::from_secs(1), twin_pair),
        ("Heisenberg curl, div_b and rank", Duration::from_secs(1), heisenberg_structure),
        ("reconstruction round trip", Duration::from_secs(10), round_trip),
        ("negative controls", Duration::from_secs(2), negative_controls),
        ("skew algebra suite", Duration::from_secs(30), skew_suite),
        ("structure identity convergence", Duration::from_secs(10), structure_identity),
        ("convexity and first variation", Duration::from_secs(30), convexity_and_variation),
        ("minimizers agree", Duration::from_secs(120), minimizer_agreement),
        ("closure and tangential equivalence", Duration::from_secs(20), closure_equivalence),
        ("determinism", Duration::from_secs(60), determinism),
    ];
    let mut failed = 0;
    for (i, (name, limit, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = f();
        let elapsed = start.elapsed();
        let (ok, detail) = match result {
            Ok((ok, d)) => (ok && elapsed <= *limit, d),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!ok);
        println!(
            "{} {:>2} {name}: {detail} [{:.2} s, limit {} s]",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
