//! Executes one configured operation, writes its artifacts and condenses the
//! outcome into an exit status and a summary table.
//!
//! Exit status: 0 success, 2 failed assertion, 3 `U` not closed, 4 I/O or
//! configuration error, 5 solver did not converge.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::io::{self, format_value, FieldKind};
use crate::grid::{GridDomain, ScalarField, VectorField};
use crate::horizontal::{curl_matrix, horizontal_normal, singular_stats, weight};
use crate::integrability::{
    classify_integrability, closure_condition_residual, codazzi_2d_residual,
    structure_condition_residual, tangential_condition_residual, NodeClass,
};
use crate::reconstruction::{
    closedness_residual, integrate_potential_with, u_candidate_field, verify_normal,
    DEFAULT_CLOSED_TOL,
};
use crate::skew::{rank2_factorize, skew_rank, spectral_pairs, SkewMatrix, DEFAULT_RANK_TOL};
use crate::variational::{
    first_variation, functional, line_profile, minimize, uniqueness_audit, BCoefficients,
    MinimizeOptions,
};

use super::config::{ExperimentConfig, FieldSource, Operation};
use super::{builtin_scenario_with, heisenberg_field, perturbed_init, Scenario};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ASSERTION: i32 = 2;
pub const EXIT_NOT_CLOSED: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;
pub const EXIT_NOT_CONVERGED: i32 = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub status: i32,
    /// `(key, value)` rows of the summary table.
    pub rows: Vec<(String, String)>,
    pub artifacts: Vec<PathBuf>,
    pub error: Option<String>,
}

impl RunReport {
    /// Two aligned columns.
    pub fn summary(&self) -> String {
        let width = self.rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in &self.rows {
            let _ = writeln!(out, "{k:<width$}  {v}");
        }
        if let Some(e) = &self.error {
            let _ = writeln!(out, "error: {e}");
        }
        let _ = writeln!(out, "status: {}", self.status);
        out
    }
}

pub fn exit_status(e: &Error) -> i32 {
    match e {
        Error::NotClosed { .. } => EXIT_NOT_CLOSED,
        Error::StepUnderflow { .. } | Error::Diverged { .. } => EXIT_NOT_CONVERGED,
        _ => EXIT_CONFIG,
    }
}

/// Runs the configured operation. Never panics on bad input; every error
/// becomes a non-zero status.
pub fn run(cfg: &ExperimentConfig) -> RunReport {
    let mut ctx = Context {
        out: cfg.out.clone(),
        rows: Vec::new(),
        artifacts: Vec::new(),
        status: EXIT_OK,
    };
    ctx.row("operation", cfg.operation.as_str());
    let result = fs::create_dir_all(&cfg.out)
        .map_err(|e| Error::io(&cfg.out, e))
        .and_then(|_| dispatch(cfg, &mut ctx));
    let (status, error) = match result {
        Ok(()) => (ctx.status, None),
        Err(e) => (exit_status(&e), Some(e.to_string())),
    };
    RunReport {
        status,
        rows: ctx.rows,
        artifacts: ctx.artifacts,
        error,
    }
}

struct Context {
    out: PathBuf,
    rows: Vec<(String, String)>,
    artifacts: Vec<PathBuf>,
    status: i32,
}

impl Context {
    fn row(&mut self, key: &str, value: impl ToString) {
        self.rows.push((key.to_string(), value.to_string()));
    }

    fn num(&mut self, key: &str, value: f64) {
        self.row(key, format!("{value:.6e}"));
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.out.join(name);
        self.artifacts.push(p.clone());
        p
    }

    fn scalar(&mut self, name: &str, f: &ScalarField) -> Result<()> {
        let p = self.path(name);
        io::write_field(f, &p)
    }

    fn vector(&mut self, name: &str, v: &VectorField) -> Result<()> {
        let p = self.path(name);
        io::write_vector(v, &p)
    }

    fn blocks(&mut self, name: &str, domain: &GridDomain, kind: FieldKind, blocks: &[Vec<f64>]) -> Result<()> {
        let p = self.path(name);
        let refs: Vec<&[f64]> = blocks.iter().map(Vec::as_slice).collect();
        io::write_file(&p, domain, kind, &refs)
    }

    fn csv(&mut self, name: &str, domain: &GridDomain, columns: &[(&str, &[f64])]) -> Result<()> {
        let p = self.path(name);
        io::write_csv(&p, domain, columns)
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let p = self.path(name);
        fs::write(&p, body).map_err(|e| Error::io(&p, e))
    }

    /// Two-column plot data.
    fn dat(&mut self, name: &str, header: &str, points: &[(f64, f64)]) -> Result<()> {
        let mut body = format!("# {header}\n");
        for (x, y) in points {
            let _ = writeln!(body, "{} {}", format_value(*x), format_value(*y));
        }
        self.text(name, &body)
    }
}

/// Fields the operation works on, from a scenario and/or files.
struct Inputs {
    domain: Arc<GridDomain>,
    f: VectorField,
    h: ScalarField,
    u: Option<ScalarField>,
    v: Option<ScalarField>,
    nu: Option<VectorField>,
    d: Option<ScalarField>,
    b: BCoefficients,
    scenario: Option<Scenario>,
}

impl Inputs {
    fn u(&self) -> Result<&ScalarField> {
        self.u.as_ref().ok_or_else(|| missing("u"))
    }

    fn v(&self) -> Result<&ScalarField> {
        self.v.as_ref().ok_or_else(|| missing("v"))
    }

    /// Prescribed `(ν, D)`, or the normal and weight of `u`.
    fn normal_pair(&self, tau: f64) -> Result<(VectorField, ScalarField)> {
        match (&self.nu, &self.d) {
            (Some(nu), Some(d)) => Ok((nu.clone(), d.clone())),
            (None, None) => {
                let u = self.u.as_ref().ok_or_else(|| missing("nu and d (or u)"))?;
                let (nu, _) = horizontal_normal(u, &self.f, tau)?;
                Ok((nu, weight(u, &self.f)?))
            }
            _ => Err(Error::Config("nu and d must be given together".into())),
        }
    }
}

fn missing(what: &str) -> Error {
    Error::Config(format!("operation needs `{what}`"))
}

fn same_domain(domain: &GridDomain, other: &GridDomain, what: &str) -> Result<()> {
    if domain == other {
        Ok(())
    } else {
        Err(Error::Config(format!("`{what}` lives on a different grid")))
    }
}

fn load_scalar(path: &Option<PathBuf>) -> Result<Option<ScalarField>> {
    path.as_deref().map(io::read_field).transpose()
}

fn gather(cfg: &ExperimentConfig) -> Result<Inputs> {
    let scenario = cfg
        .scenario
        .as_deref()
        .map(|n| builtin_scenario_with(n, cfg.resolution.as_deref()))
        .transpose()?;
    let u = load_scalar(&cfg.u)?;
    let v = load_scalar(&cfg.v)?;
    let d = load_scalar(&cfg.d)?;
    let nu = cfg.nu.as_deref().map(io::read_vector).transpose()?;
    let f_file = match &cfg.f {
        Some(FieldSource::File(p)) => Some(io::read_vector(p)?),
        _ => None,
    };

    let domain = scenario
        .as_ref()
        .map(|s| s.domain.clone())
        .or_else(|| u.as_ref().map(|x| x.domain_arc().clone()))
        .or_else(|| v.as_ref().map(|x| x.domain_arc().clone()))
        .or_else(|| nu.as_ref().map(|x| x.domain_arc().clone()))
        .or_else(|| d.as_ref().map(|x| x.domain_arc().clone()))
        .or_else(|| f_file.as_ref().map(|x| x.domain_arc().clone()))
        .ok_or_else(|| Error::Config("no scenario and no input fields given".into()))?;
    for (name, dom) in [
        ("u", u.as_ref().map(|x| x.domain())),
        ("v", v.as_ref().map(|x| x.domain())),
        ("d", d.as_ref().map(|x| x.domain())),
        ("nu", nu.as_ref().map(|x| x.domain())),
        ("f", f_file.as_ref().map(|x| x.domain())),
    ] {
        if let Some(dom) = dom {
            same_domain(&domain, dom, name)?;
        }
    }

    let f = match (&cfg.f, f_file) {
        (_, Some(f)) => f,
        (Some(FieldSource::Zero), _) => VectorField::zeros(domain.clone()),
        (Some(FieldSource::Heisenberg), _) => heisenberg_field(domain.clone())?,
        _ => scenario
            .as_ref()
            .map(|s| s.f.clone())
            .ok_or_else(|| missing("f"))?,
    };
    let h = match &cfg.h {
        Some(FieldSource::File(p)) => {
            let h = io::read_field(p)?;
            same_domain(&domain, h.domain(), "h")?;
            h
        }
        Some(FieldSource::Zero) | None => scenario
            .as_ref()
            .filter(|_| cfg.h.is_none())
            .map(|s| s.h.clone())
            .unwrap_or_else(|| ScalarField::zeros(domain.clone())),
        Some(FieldSource::Heisenberg) => {
            return Err(Error::Config("h must be a file or `zero`".into()))
        }
    };
    let m = domain.dim();
    let b = match &scenario {
        Some(s) => s.b.clone(),
        None if m % 2 == 0 => BCoefficients::heisenberg(m / 2),
        None => BCoefficients::zeros(m),
    };
    let pick = |file: Option<ScalarField>, sc: Option<&ScalarField>| file.or_else(|| sc.cloned());
    Ok(Inputs {
        u: pick(u, scenario.as_ref().and_then(|s| s.u.as_ref())),
        v: pick(v, scenario.as_ref().and_then(|s| s.v.as_ref())),
        d: pick(d, scenario.as_ref().and_then(|s| s.d.as_ref())),
        nu: nu.or_else(|| scenario.as_ref().and_then(|s| s.nu.clone())),
        domain,
        f,
        h,
        b,
        scenario,
    })
}

fn dispatch(cfg: &ExperimentConfig, ctx: &mut Context) -> Result<()> {
    if cfg.operation == Operation::RankAnalysis && cfg.matrix.is_some() {
        return rank_of_matrix(cfg, ctx);
    }
    let inputs = gather(cfg)?;
    if let Some(s) = &inputs.scenario {
        ctx.row("scenario", &s.name);
    }
    ctx.row("grid", format!("{:?}", inputs.domain.counts()));
    match cfg.operation {
        Operation::Evaluate => evaluate(cfg, &inputs, ctx),
        Operation::Minimize => run_minimize(cfg, &inputs, ctx),
        Operation::CheckIntegrability => check_integrability(cfg, &inputs, ctx),
        Operation::Reconstruct => run_reconstruct(cfg, &inputs, ctx),
        Operation::RankAnalysis => rank_of_curl(&inputs, ctx),
        Operation::AuditUniqueness => audit(cfg, &inputs, ctx),
        Operation::Scenario => run_scenario(&inputs, ctx),
        Operation::VariationProfile => profile(cfg, &inputs, ctx),
    }
}

fn flag_column(flags: &[bool]) -> Vec<f64> {
    flags.iter().map(|f| if *f { 1.0 } else { 0.0 }).collect()
}

fn evaluate(cfg: &ExperimentConfig, inp: &Inputs, ctx: &mut Context) -> Result<()> {
    let u = inp.u()?;
    let d = weight(u, &inp.f)?;
    let (nu, mask) = horizontal_normal(u, &inp.f, cfg.tau)?;
    let stats = singular_stats(&mask);
    ctx.num("functional", functional(u, &inp.f, &inp.h)?);
    if let Some(v) = &inp.v {
        ctx.num("functional_v", functional(v, &inp.f, &inp.h)?);
    }
    ctx.row("singular_nodes", mask.count());
    ctx.num("singular_fraction", stats.fraction);
    ctx.row("singular_radius", stats.radius);
    ctx.scalar("weight.pfld", &d)?;
    ctx.vector("normal.pfld", &nu)?;
    let singular = flag_column(mask.flags());
    let names: Vec<String> = (1..=nu.dim()).map(|a| format!("nu{a}")).collect();
    let mut cols: Vec<(&str, &[f64])> = vec![("u", u.values()), ("weight", d.values()), ("singular", &singular)];
    for (a, name) in names.iter().enumerate() {
        cols.push((name, nu.component(a).values()));
    }
    ctx.csv("evaluate.csv", &inp.domain, &cols)
}

fn run_minimize(cfg: &ExperimentConfig, inp: &Inputs, ctx: &mut Context) -> Result<()> {
    let boundary = match load_scalar(&cfg.boundary)? {
        Some(b) => {
            same_domain(&inp.domain, b.domain(), "boundary")?;
            b
        }
        None => inp.u()?.clone(),
    };
    let init = match load_scalar(&cfg.init)? {
        Some(i) => {
            same_domain(&inp.domain, i.domain(), "init")?;
            i
        }
        None => perturbed_init(&boundary, cfg.seed, cfg.band, cfg.amplitude)?,
    };
    let mut opts = MinimizeOptions::default();
    if let Some(s) = &cfg.schedule {
        opts.schedule = s.clone();
    }
    if let Some(n) = cfg.max_iterations {
        opts.max_iterations = n;
    }
    if let Some(t) = cfg.tol {
        opts.tolerance = t;
    }
    ctx.row("seed", cfg.seed);
    ctx.num("functional_boundary_data", functional(&boundary, &inp.f, &inp.h)?);
    ctx.num("functional_init", functional(&init, &inp.f, &inp.h)?);
    ctx.scalar("init.pfld", &init)?;
    let result = minimize(&inp.f, &inp.h, &boundary, &init, &opts)?;
    let w = &result.field;
    ctx.num("functional_result", functional(w, &inp.f, &inp.h)?);
    for s in &result.stages {
        ctx.row(
            &format!("stage_{}", s.stage),
            format!(
                "eps {:.1e}  iterations {}  objective {:.12e}  residual {:.3e}{}",
                s.eps,
                s.iterations,
                s.objective,
                s.residual,
                if s.converged { "" } else { "  (cap reached)" }
            ),
        );
    }
    ctx.num("final_residual", result.final_residual());
    ctx.scalar("minimizer.pfld", w)?;
    ctx.csv("minimize.csv", &inp.domain, &[("init", init.values()), ("result", w.values())])?;
    ctx.text("convergence.log", &result.log_text())?;
    let points: Vec<(f64, f64)> = result
        .log
        .iter()
        .enumerate()
        .map(|(i, e)| (i as f64, e.objective))
        .collect();
    ctx.dat("convergence.dat", "step objective", &points)?;
    if !result.converged() {
        ctx.status = EXIT_NOT_CONVERGED;
    }
    Ok(())
}

fn check_integrability(cfg: &ExperimentConfig, inp: &Inputs, ctx: &mut Context) -> Result<()> {
    if let Some(u) = &inp.u {
        let map = classify_integrability(u, &inp.f, cfg.tau, cfg.eta)?;
        for class in [NodeClass::Singular, NodeClass::Integrable, NodeClass::Nonintegrable] {
            ctx.row(&format!("{}_nodes", class.as_str()), map.count(class));
        }
        ctx.num("tensor_cut", map.cut);
        let code: Vec<f64> = map
            .labels
            .iter()
            .map(|l| match l {
                NodeClass::Singular => 0.0,
                NodeClass::Integrable => 1.0,
                NodeClass::Nonintegrable => 2.0,
            })
            .collect();
        let mag = map.tensor.magnitudes();
        ctx.csv("integrability.csv", &inp.domain, &[("class", &code), ("tensor_norm", &mag)])?;
        if inp.domain.dim() >= 3 {
            ctx.blocks("frobenius.pfld", &inp.domain, FieldKind::Alt3, map.tensor.blocks())?;
        }
    }
    if inp.nu.is_some() || inp.u.is_none() {
        let (nu, d) = inp.normal_pair(cfg.tau)?;
        let structure = structure_condition_residual(&nu, &d, &inp.f)?;
        let closure = closure_condition_residual(&nu, &d, &inp.f)?.norm();
        let tangential = tangential_condition_residual(&nu, &d, &inp.f)?.norm();
        let s = structure.norms();
        ctx.num("structure_residual_max", s.max);
        ctx.num("structure_residual_l1", s.l1);
        ctx.num("closure_residual_max", closure.max_abs());
        ctx.num("tangential_residual_max", tangential.max_abs());
        let smag = structure.magnitudes();
        let mut cols: Vec<(&str, &[f64])> = vec![
            ("structure", &smag),
            ("closure", closure.values()),
            ("tangential", tangential.values()),
        ];
        let codazzi = if inp.domain.dim() == 2 {
            Some(codazzi_2d_residual(&nu, &d)?)
        } else {
            None
        };
        if let Some(c) = &codazzi {
            ctx.num("planar_residual_max", c.max_abs());
            cols.push(("planar", c.values()));
        }
        ctx.csv("residuals.csv", &inp.domain, &cols)?;
    }
    Ok(())
}

fn run_reconstruct(cfg: &ExperimentConfig, inp: &Inputs, ctx: &mut Context) -> Result<()> {
    let (nu, d) = inp.normal_pair(cfg.tau)?;
    let cand = u_candidate_field(&nu, &d, &inp.f)?;
    let closed = closedness_residual(&cand);
    ctx.num("closedness", closed.max_abs());
    ctx.blocks("closedness.pfld", &inp.domain, FieldKind::Skew, closed.blocks())?;
    let base = cfg.base.unwrap_or_else(|| inp.domain.lowest_corner());
    let tol = cfg.tol.unwrap_or(DEFAULT_CLOSED_TOL);
    let p = integrate_potential_with(&cand, base, tol, cfg.integrator)?;
    ctx.row("base", base);
    ctx.num("path_discrepancy", p.path_discrepancy);
    ctx.num("plaquette_circulation", p.plaquette_circulation);
    let chk = verify_normal(&p.field, &nu, &d, &inp.f, cfg.tau)?;
    ctx.num("normal_error", chk.normal_error);
    ctx.num("weight_error", chk.weight_error);
    ctx.scalar("potential.pfld", &p.field)?;
    match &inp.u {
        Some(u) => {
            let truth = u.shifted(-u.get(base));
            let err = p.field.sub(&truth)?;
            ctx.num("potential_error", err.max_abs() / truth.scale());
            ctx.csv(
                "reconstruct.csv",
                &inp.domain,
                &[("potential", p.field.values()), ("error", err.values())],
            )
        }
        None => ctx.csv("reconstruct.csv", &inp.domain, &[("potential", p.field.values())]),
    }
}

fn rank_histogram(ranks: &[usize], m: usize) -> Vec<(f64, f64)> {
    (0..=m)
        .step_by(2)
        .map(|r| (r as f64, ranks.iter().filter(|x| **x == r).count() as f64))
        .collect()
}

fn rank_of_curl(inp: &Inputs, ctx: &mut Context) -> Result<()> {
    let curl = curl_matrix(&inp.f);
    let m = inp.domain.dim();
    let n = inp.domain.len();
    let mut ranks = Vec::with_capacity(n);
    let mut lambdas = vec![vec![0.0; n]; m / 2];
    for k in 0..n {
        let s = curl.matrix_at(k);
        ranks.push(skew_rank(&s, DEFAULT_RANK_TOL));
        for (j, l) in s.pair_magnitudes().into_iter().enumerate().take(m / 2) {
            lambdas[j][k] = l;
        }
    }
    let hist = rank_histogram(&ranks, m);
    for (r, c) in &hist {
        ctx.row(&format!("rank_{r}_nodes"), c);
    }
    let rank_col: Vec<f64> = ranks.iter().map(|r| *r as f64).collect();
    let names: Vec<String> = (1..=m / 2).map(|j| format!("lambda{j}")).collect();
    let mut cols: Vec<(&str, &[f64])> = vec![("rank", &rank_col)];
    for (j, name) in names.iter().enumerate() {
        cols.push((name, &lambdas[j]));
    }
    ctx.blocks("curl.pfld", &inp.domain, FieldKind::Skew, curl.blocks())?;
    ctx.csv("rank.csv", &inp.domain, &cols)?;
    ctx.dat("rank_histogram.dat", "rank nodes", &hist)
}

/// `SKEW m=<m>` followed by `m` rows of `m` numbers.
pub fn parse_skew_matrix(text: &str) -> Result<SkewMatrix> {
    let bad = |msg: String| Error::Format(msg);
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    let head = lines.next().ok_or_else(|| bad("empty matrix file".into()))?;
    let m: usize = head
        .strip_prefix("SKEW")
        .and_then(|r| r.trim().strip_prefix("m="))
        .and_then(|r| r.trim().parse().ok())
        .ok_or_else(|| bad(format!("expected `SKEW m=<int>`, got `{head}`")))?;
    if !(2..=crate::grid::MAX_DIM).contains(&m) {
        return Err(Error::Dimension(m));
    }
    let rows = lines
        .map(|l| {
            l.split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| bad(format!("bad number `{t}`"))))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    if rows.len() != m || rows.iter().any(|r| r.len() != m) {
        return Err(bad(format!("expected {m} rows of {m} entries")));
    }
    let scale = rows.iter().flatten().fold(1.0_f64, |a, v| a.max(v.abs()));
    let mut s = SkewMatrix::zeros(m);
    for i in 0..m {
        for j in i..m {
            if (rows[i][j] + rows[j][i]).abs() > 1e-12 * scale || !rows[i][j].is_finite() {
                return Err(bad(format!("entries ({}, {}) are not antisymmetric", i + 1, j + 1)));
            }
            if i < j {
                s.set(i, j, rows[i][j]);
            }
        }
    }
    Ok(s)
}

fn rank_of_matrix(cfg: &ExperimentConfig, ctx: &mut Context) -> Result<()> {
    let path = cfg.matrix.as_deref().ok_or_else(|| missing("matrix"))?;
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let s = parse_skew_matrix(&text)?;
    let tol = cfg.tol.unwrap_or(DEFAULT_RANK_TOL);
    let rank = skew_rank(&s, tol);
    let lambdas = spectral_pairs(&s);
    ctx.row("dim", s.dim());
    ctx.row("rank", rank);
    ctx.num("frobenius_norm", s.frobenius_norm());
    ctx.num("trace_of_square", s.trace_of_square());
    let mut body = String::from("pair,lambda\n");
    for (j, l) in lambdas.iter().enumerate() {
        ctx.num(&format!("lambda{}", j + 1), *l);
        let _ = writeln!(body, "{},{}", j + 1, format_value(*l));
    }
    if rank == 2 {
        let fac = rank2_factorize(&s, tol)?;
        let back = fac.reconstruct()?;
        let diff: f64 = s
            .upper()
            .iter()
            .zip(back.upper())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        ctx.num("rank2_lambda", fac.lambda);
        ctx.num("rank2_residual", diff / s.frobenius_norm());
    }
    ctx.text("spectrum.csv", &body)
}

fn audit(cfg: &ExperimentConfig, inp: &Inputs, ctx: &mut Context) -> Result<()> {
    let (u, v) = (inp.u()?, inp.v()?);
    let r = uniqueness_audit(u, v, &inp.f, &inp.h, &inp.b, cfg.tau, cfg.eta)?;
    ctx.num("normal_max", r.normal_max);
    ctx.num("normal_l1", r.normal_l1);
    ctx.num("gradient_gap", r.gradient_gap);
    ctx.num("orthogonality_residual", r.orthogonality_residual);
    ctx.row("regular_nodes", r.regular_nodes());
    let count = |f: &[bool]| f.iter().filter(|x| **x).count();
    ctx.row("rank_at_least_three_nodes", count(&r.rank_flags));
    ctx.row("nonintegrable_nodes", count(&r.nonintegrable_flags));
    ctx.row("positive_div_nodes", count(&r.positive_div_flags));
    ctx.num("functional_u", r.functional_u);
    ctx.num("functional_v", r.functional_v);
    let (jm, rk, ni, pd) = (
        flag_column(&r.joint_mask),
        flag_column(&r.rank_flags),
        flag_column(&r.nonintegrable_flags),
        flag_column(&r.positive_div_flags),
    );
    ctx.csv(
        "audit.csv",
        &inp.domain,
        &[("singular", &jm), ("rank_ge_3", &rk), ("nonintegrable", &ni), ("positive_div", &pd)],
    )?;
    let sizes: Vec<(f64, f64)> = r.mask_sizes.iter().map(|(e, c)| (*e, *c as f64)).collect();
    ctx.dat("mask_sizes.dat", "eps singular_nodes", &sizes)
}

fn run_scenario(inp: &Inputs, ctx: &mut Context) -> Result<()> {
    let sc = inp
        .scenario
        .as_ref()
        .ok_or_else(|| missing("scenario"))?;
    let mut body = String::from("assertion,expected,measured,passed\n");
    let mut failed = 0;
    for o in sc.check() {
        ctx.row(
            &o.label,
            format!(
                "{}  measured {:.6e}  expected {}",
                if o.passed { "PASS" } else { "FAIL" },
                o.measured,
                o.expected
            ),
        );
        let _ = writeln!(
            body,
            "{},{},{},{}",
            o.label,
            o.expected.replace(',', ";"),
            format_value(o.measured),
            o.passed
        );
        failed += usize::from(!o.passed);
    }
    ctx.text("assertions.csv", &body)?;

    let mut named: Vec<(String, Vec<f64>)> = Vec::new();
    for (a, c) in inp.f.components().iter().enumerate() {
        named.push((format!("f{}", a + 1), c.values().to_vec()));
    }
    for (name, field) in [("u", &inp.u), ("v", &inp.v), ("d", &inp.d)] {
        if let Some(x) = field {
            named.push((name.to_string(), x.values().to_vec()));
        }
    }
    if let Some(nu) = &inp.nu {
        for (a, c) in nu.components().iter().enumerate() {
            named.push((format!("nu{}", a + 1), c.values().to_vec()));
        }
    }
    let cols: Vec<(&str, &[f64])> = named.iter().map(|(n, v)| (n.as_str(), v.as_slice())).collect();
    ctx.csv("fields.csv", &inp.domain, &cols)?;
    ctx.vector("f.pfld", &inp.f)?;
    for (name, field) in [("u.pfld", &inp.u), ("v.pfld", &inp.v), ("d.pfld", &inp.d)] {
        if let Some(x) = field {
            ctx.scalar(name, x)?;
        }
    }
    if let Some(nu) = &inp.nu {
        ctx.vector("nu.pfld", nu)?;
    }
    ctx.row("failed", failed);
    if failed > 0 {
        ctx.status = EXIT_ASSERTION;
    }
    Ok(())
}

fn profile(cfg: &ExperimentConfig, inp: &Inputs, ctx: &mut Context) -> Result<()> {
    let (u, v) = (inp.u()?, inp.v()?);
    let p = line_profile(u, v, &inp.f, &inp.h, &cfg.eps)?;
    ctx.row("samples", p.points.len());
    ctx.num("min_second_difference", p.min_second_difference);
    ctx.num("scale", p.scale);
    let phi = v.sub(u)?;
    let var = first_variation(u, &phi, &inp.f, &inp.h, cfg.tau)?;
    ctx.num("variation_right", var.right);
    ctx.num("variation_left", var.left);
    ctx.row("singular_nodes", var.singular_nodes);
    ctx.dat("profile.dat", "eps functional", &p.points)?;
    let mut body = String::from("eps,functional\n");
    for (e, f) in &p.points {
        let _ = writeln!(body, "{},{}", format_value(*e), format_value(*f));
    }
    ctx.text("profile.csv", &body)
}

/// Writes the summary next to the artifacts.
pub fn write_summary(report: &RunReport, dir: &Path) -> Result<()> {
    let p = dir.join("summary.txt");
    fs::write(&p, report.summary()).map_err(|e| Error::io(&p, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(op: Operation, dir: &Path) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(op);
        c.out = dir.to_path_buf();
        c
    }

    #[test]
    fn scenario_statuses() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = cfg(Operation::Scenario, dir.path());
        c.scenario = Some("twin_normals".into());
        c.resolution = Some(vec![17]);
        let r = run(&c);
        assert_eq!(r.status, EXIT_OK, "{}", r.summary());
        assert!(dir.path().join("fields.csv").exists());

        c.scenario = Some("nope".into());
        assert_eq!(run(&c).status, EXIT_CONFIG);
    }

    #[test]
    fn not_closed_status() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = cfg(Operation::Reconstruct, dir.path());
        c.scenario = Some("constant_normal".into());
        c.resolution = Some(vec![17]);
        let r = run(&c);
        assert_eq!(r.status, EXIT_NOT_CLOSED, "{}", r.summary());
        assert!(dir.path().join("closedness.pfld").exists());
    }

    #[test]
    fn iteration_cap_is_non_convergence() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = cfg(Operation::Minimize, dir.path());
        c.scenario = Some("heisenberg(1)".into());
        c.resolution = Some(vec![9]);
        c.max_iterations = Some(2);
        let r = run(&c);
        assert_eq!(r.status, EXIT_NOT_CONVERGED, "{}", r.summary());
        assert!(dir.path().join("convergence.log").exists());
    }

    #[test]
    fn skew_matrix_file() {
        let s = parse_skew_matrix("SKEW m=3\n0 1 2\n-1 0 3\n-2 -3 0\n").unwrap();
        assert_eq!(s.get(0, 2), 2.0);
        assert_eq!(s.get(2, 1), -3.0);
        assert!(parse_skew_matrix("SKEW m=2\n0 1\n1 0\n").is_err());
        assert!(parse_skew_matrix("MAT m=2\n0 1\n-1 0\n").is_err());
        assert!(parse_skew_matrix("SKEW m=2\n0 1\n").is_err());
    }

    #[test]
    fn missing_inputs_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(Operation::Evaluate, dir.path());
        assert_eq!(run(&c).status, EXIT_CONFIG);
        let mut c = cfg(Operation::AuditUniqueness, dir.path());
        c.scenario = Some("round_trip".into());
        c.resolution = Some(vec![9]);
        assert_eq!(run(&c).status, EXIT_CONFIG);
    }
}
