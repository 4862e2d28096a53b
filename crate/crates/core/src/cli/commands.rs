use std::fmt::Write as _;
use std::path::Path;

use log::info;
use serde::Serialize;

use super::config::{Preset, Problem, ProblemConfig};
use super::output::{check_table, fmt_f64, Check, SystemFile};
use super::{
    write_report, CmdResult, CommonArgs, Failure, Format, PlotArgs, VerifyArgs, EXIT_CHECK, EXIT_CONFIG, EXIT_OK,
};
use crate::classical::{
    self, default_angles, default_radii, heine_stieltjes_solve, heun_solve, ince_catalog, ince_check, lame_catalog,
    selfadjointness_residual, sextic_check, HeunSpec, IncePeriodicity,
};
use crate::forms::InnerProductFamily;
use crate::gs::{self, complement_residual, mutual_rank_one, GS_TOL};
use crate::mep::{self, expected_count, ray_angle, JointSystem};

const RESIDUAL_TOL: f64 = 1e-9;
const ORTHO_TOL: f64 = 1e-8;
const ODE_TOL: f64 = 1e-7;
const COMPLEMENT_TRIALS: usize = 50;

type Column<'a> = Box<dyn Fn(f64) -> f64 + 'a>;

fn config_error(message: String) -> Failure {
    Failure { code: EXIT_CONFIG, message }
}

/// Writes `name` into `dir`, echoes it and maps the checks to an exit code.
fn finish(dir: &Path, name: &str, text: &str, checks: &[Check]) -> CmdResult {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), text)?;
    print!("{text}");
    Ok(if checks.iter().all(|c| c.pass) { EXIT_OK } else { EXIT_CHECK })
}

fn header(problem: &Problem) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "k = {}, n = {}", problem.family.k(), problem.n);
    if let Some(p) = &problem.preset {
        let _ = writeln!(s, "preset {}", p.name());
    }
    for (j, (a, b)) in problem.family.intervals().iter().enumerate() {
        let _ = writeln!(s, "interval {}: ({a}, {b})", j + 1);
    }
    s
}

fn system_checks(fam: &InnerProductFamily, sys: &JointSystem) -> crate::Result<Vec<Check>> {
    Ok(vec![
        Check::equal("members", sys.len(), expected_count(sys.n, sys.k)),
        Check::below("max residual", sys.max_residual(), RESIDUAL_TOL),
        Check::below("deleted-form orthogonality", sys.max_orthogonality(), ORTHO_TOL),
        Check::below("eigenvalue formula angle", sys.max_formula_angle(fam)?, ORTHO_TOL),
    ])
}

pub(super) fn solve(c: &CommonArgs, cfg: &ProblemConfig, dir: &Path) -> CmdResult {
    let format = c.format(cfg)?;
    let problem = c.problem(cfg)?;
    info!("solving k = {} n = {}", problem.family.k(), problem.n);
    let sys = match mep::solve(&problem.family, problem.n, &problem.options) {
        Ok(s) => s,
        Err(e) => {
            let f = Failure::from(e);
            write_report(dir, "report.txt", &format!("{}error: {}\n", header(&problem), f.message));
            return Err(f);
        }
    };
    let file =
        SystemFile::from_system(&sys, &problem.family, problem.preset.as_ref().map(Preset::name), problem.options.seed);
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("system.json"), file.to_json())?;
    if format == Format::Csv {
        std::fs::write(dir.join("system.csv"), file.to_csv())?;
    }
    let checks = system_checks(&problem.family, &sys)?;
    let mut text = header(&problem);
    let _ = writeln!(text, "members {} of {}", sys.len(), expected_count(sys.n, sys.k));
    let _ = writeln!(text, "min eigenvalue-ray angle {}", fmt_f64(sys.min_angle));
    let _ = writeln!(text, "max orthogonality {}", fmt_f64(sys.max_orthogonality()));
    for (p, r) in sys.pairs.iter().zip(&file.pairs) {
        let _ = writeln!(text, "  {:?}  {}", r.signature, p.vector);
    }
    text.push_str(&check_table("checks", &checks));
    finish(dir, "report.txt", &text, &checks)
}

/// Operator checks for the preset behind `sys`.
fn preset_checks(preset: &Preset, fam: &InnerProductFamily, sys: &JointSystem) -> crate::Result<Vec<Check>> {
    let worst = |f: &dyn Fn(&crate::Polynomial) -> f64| sys.pairs.iter().map(|p| f(&p.vector)).fold(0.0, f64::max);
    Ok(match preset {
        Preset::Heun(spec) => {
            let op = spec.operator();
            vec![Check::below("operator eigen residual", worst(&|v| classical::eigen_residual(&op, v)), ODE_TOL)]
        }
        Preset::Lame { e, eps, n, .. } => {
            let op = HeunSpec::new(*e, eps.map(|x| x as f64 + 0.5), *n)?.operator();
            vec![Check::below("operator eigen residual", worst(&|v| classical::eigen_residual(&op, v)), ODE_TOL)]
        }
        Preset::Ince(spec) => {
            vec![Check::below("Whittaker-Hill residual", ince_check(spec, sys, &default_angles(24)), ODE_TOL)]
        }
        Preset::Sextic(spec) => {
            vec![Check::below("sextic residual", sextic_check(spec, sys, &default_radii(25)), ODE_TOL)]
        }
        Preset::HeineStieltjes(spec) => {
            let mut rem = 0.0f64;
            let mut ode = 0.0f64;
            let mut lead = 0.0f64;
            let want = spec.van_vleck_leading();
            for p in &sys.pairs {
                let (v, r) = classical::van_vleck(spec, &p.vector)?;
                rem = rem.max(r);
                ode = ode.max(classical::ode_residual(spec, &p.vector, &v, 30));
                lead = lead.max((v.coeff(fam.k() - 1) - want).abs() / want.abs().max(1.0));
            }
            vec![
                Check::below("van Vleck remainder", rem, 1e-8),
                Check::below("Heine-Stieltjes residual", ode, ODE_TOL),
                Check::below("van Vleck leading coefficient", lead, 1e-8),
            ]
        }
    })
}

pub(super) fn verify(v: &VerifyArgs, cfg: &ProblemConfig, dir: &Path) -> CmdResult {
    let c = &v.common;
    let problem = c.problem(cfg)?;
    let fam = &problem.family;
    let path = v.system.clone().unwrap_or_else(|| dir.join("system.json"));
    let file = SystemFile::load(&path)?;
    if file.k != fam.k() || file.n != problem.n {
        return Err(config_error(format!(
            "{} holds k = {}, n = {}; problem has k = {}, n = {}",
            path.display(),
            file.k,
            file.n,
            fam.k(),
            problem.n
        )));
    }
    let mono = mep::build(fam, problem.n)?;
    let pairs = file
        .pairs()?
        .into_iter()
        .map(|mut p| {
            p.residual = mono.residual(&p.vector.padded(problem.n + 1), &p.lambda);
            p
        })
        .collect();
    let sys = JointSystem {
        n: problem.n,
        k: fam.k(),
        pairs,
        min_angle: f64::INFINITY,
        orthogonality: Vec::new(),
        seed_failures: 0,
    }
    .with_orthogonality(fam)?;
    let formula = sys.pairs.iter().try_fold(0.0f64, |acc, p| {
        Ok::<_, crate::JopError>(acc.max(ray_angle(&p.lambda, &mep::eigenvalue_formula(fam, &p.vector)?)))
    })?;
    let mut checks = vec![
        Check::equal("members", sys.len(), expected_count(sys.n, sys.k)),
        Check::below("max residual", sys.max_residual(), RESIDUAL_TOL),
        Check::below("deleted-form orthogonality", sys.max_orthogonality(), ORTHO_TOL),
        Check::below(
            "rank-one complement",
            complement_residual(fam, &sys, COMPLEMENT_TRIALS, problem.options.seed)?,
            ORTHO_TOL,
        ),
        Check::below("mutual rank-one", mutual_rank_one(fam, &sys)?, ORTHO_TOL),
        Check::below("eigenvalue formula angle", formula, ORTHO_TOL),
    ];
    if let Some(p) = &problem.preset {
        checks.extend(preset_checks(p, fam, &sys)?);
    }
    let mut text = header(&problem);
    let _ = writeln!(text, "system {}", path.display());
    text.push_str(&check_table("checks", &checks));
    finish(dir, "verify.txt", &text, &checks)
}

#[derive(Serialize)]
struct LedgerFile {
    schema: u32,
    degrees: Vec<SystemFile>,
    /// `residuals[n][a][b]` as in the ledger.
    residuals: Vec<Vec<Vec<String>>>,
}

pub(super) fn gs(c: &CommonArgs, cfg: &ProblemConfig, dir: &Path) -> CmdResult {
    let problem = c.problem(cfg)?;
    let fam = &problem.family;
    let ledger = gs::gs_drive(fam, problem.n, &problem.options)?;
    let preset = problem.preset.as_ref().map(Preset::name);
    let file = LedgerFile {
        schema: super::output::SCHEMA,
        degrees: ledger.systems.iter().map(|s| SystemFile::from_system(s, fam, preset, problem.options.seed)).collect(),
        residuals: ledger
            .residuals
            .iter()
            .map(|m| m.row_iter().map(|r| r.iter().copied().map(fmt_f64).collect()).collect())
            .collect(),
    };
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("ledger.json"), serde_json::to_string_pretty(&file).expect("ledger serializes") + "\n")?;
    let mut checks = Vec::new();
    let mut text = header(&problem);
    for (n, (s, r)) in ledger.systems.iter().zip(&ledger.residuals).enumerate() {
        let worst = r.iter().fold(0.0f64, |a, &x| a.max(x));
        let _ = writeln!(text, "degree {n}: {} members, max rank-one residual {}", s.len(), fmt_f64(worst));
        checks.push(Check::equal(&format!("members at degree {n}"), s.len(), expected_count(n, fam.k())));
    }
    checks.push(Check::below("max rank-one residual", ledger.max_residual(), GS_TOL));
    text.push_str(&check_table("checks", &checks));
    finish(dir, "gs.txt", &text, &checks)
}

pub(super) fn classical(c: &CommonArgs, cfg: &ProblemConfig, dir: &Path) -> CmdResult {
    let problem = c.problem(cfg)?;
    let preset = problem.preset.clone().ok_or_else(|| config_error("classical needs a preset".into()))?;
    let fam = &problem.family;
    let mut text = header(&problem);
    let mut checks = Vec::new();
    let selfadjoint = |op: &nalgebra::DMatrix<f64>, checks: &mut Vec<Check>| -> crate::Result<()> {
        for j in 1..=fam.k() {
            checks.push(Check::below(
                &format!("selfadjointness j={j}"),
                selfadjointness_residual(fam, op, j)?,
                ORTHO_TOL,
            ));
        }
        Ok(())
    };
    match &preset {
        Preset::Heun(spec) => {
            let s = heun_solve(spec)?;
            for (p, ev) in s.system.pairs.iter().zip(&s.eigenvalues) {
                let _ = writeln!(text, "  eigenvalue {}  {}", fmt_f64(*ev), p.vector);
            }
            checks.extend(system_checks(fam, &s.system)?);
            checks.push(Check::below("operator vs pencil", s.pencil_difference, 1e-7));
            selfadjoint(&classical::heun_matrix(spec), &mut checks)?;
        }
        Preset::Lame { e, nu, .. } => {
            let cat = lame_catalog(*e, *nu)?;
            for entry in &cat.entries {
                let _ = writeln!(
                    text,
                    "  species {} eps {:?} lambda {}  {}",
                    entry.species,
                    entry.epsilon,
                    fmt_f64(entry.lambda),
                    entry.polynomial
                );
            }
            checks.push(Check::equal("Lame total", cat.total(), 2 * nu + 1));
            let worst = cat.entries.iter().map(|e| e.ode_residual).fold(0.0, f64::max);
            checks.push(Check::below("Lame residual", worst, ODE_TOL));
        }
        Preset::Ince(spec) => {
            let sys = spec.solve(&problem.options)?;
            checks.extend(system_checks(fam, &sys)?);
            checks.push(Check::below("Whittaker-Hill residual", ince_check(spec, &sys, &default_angles(24)), ODE_TOL));
            selfadjoint(&spec.operator().matrix(spec.n + 1, spec.n + 1), &mut checks)?;
            let nu = spec.nu();
            let cat = ince_catalog(spec.alpha, nu, &problem.options)?;
            let want = if nu % 2 == 0 { IncePeriodicity::Antiperiodic } else { IncePeriodicity::Periodic };
            let _ = writeln!(text, "nu = {nu}: {} Ince functions, expected class {want:?}", cat.len());
            checks.push(Check::equal("Ince functions", cat.len(), nu));
            checks.push(Check::equal("periodicity class", cat.iter().filter(|e| e.periodicity == want).count(), nu));
        }
        Preset::Sextic(spec) => {
            let sys = spec.solve(&problem.options)?;
            checks.extend(system_checks(fam, &sys)?);
            checks.push(Check::below("sextic residual", sextic_check(spec, &sys, &default_radii(25)), ODE_TOL));
            selfadjoint(&spec.operator().matrix(spec.n + 1, spec.n + 1), &mut checks)?;
        }
        Preset::HeineStieltjes(spec) => {
            let sol = heine_stieltjes_solve(spec, &problem.options)?;
            let want = spec.van_vleck_leading();
            let mut lead = 0.0f64;
            for (p, v) in sol.system.pairs.iter().zip(&sol.van_vleck) {
                let _ = writeln!(text, "  y = {}  V = {}", p.vector, v);
                lead = lead.max((v.coeff(spec.k() - 1) - want).abs() / want.abs().max(1.0));
            }
            checks.extend(system_checks(fam, &sol.system)?);
            checks.push(Check::below("Heine-Stieltjes residual", sol.ode_residual, ODE_TOL));
            checks.push(Check::below("van Vleck leading coefficient", lead, 1e-8));
            selfadjoint(&spec.operator().matrix(spec.n + 1, spec.n + spec.k()), &mut checks)?;
        }
    }
    text.push_str(&check_table("checks", &checks));
    finish(dir, "classical.txt", &text, &checks)
}

pub(super) fn appendix_b(c: &CommonArgs, cfg: &ProblemConfig, dir: &Path) -> CmdResult {
    let n = c.n.or(cfg.n).ok_or_else(|| config_error("appendix-b needs --n".into()))?;
    let k = c.k.or(cfg.k).ok_or_else(|| config_error("appendix-b needs --k".into()))?;
    if k < 2 {
        return Err(config_error(format!("appendix-b needs k >= 2, got {k}")));
    }
    let pairs = mep::appendix_b_all(n, k)?;
    let mut text = format!("closed-form problem n = {n}, k = {k}\n");
    if k == 2 {
        let _ = writeln!(text, "k = 2: the vectors are the discrete Fourier vectors of length {}", n + 1);
    }
    for p in &pairs {
        let cx = |z: &num_complex::Complex64| format!("{:+.6}{:+.6}i", z.re, z.im);
        let _ = writeln!(
            text,
            "  roots {:?}  lambda [{}]  v [{}]  residual {:.2e}{}",
            p.choice,
            p.lambda.iter().map(cx).collect::<Vec<_>>().join(", "),
            p.vector.iter().map(cx).collect::<Vec<_>>().join(", "),
            p.residual,
            if p.is_real { "  real" } else { "" }
        );
    }
    let worst = pairs.iter().map(|p| p.residual).fold(0.0, f64::max);
    let sep = mep::min_separation(&pairs);
    let checks = vec![
        Check::equal("pairs", pairs.len(), mep::binomial(n + k - 1, k - 1)),
        Check::below("max template residual", worst, 1e-12),
        Check { name: "min eigenvalue separation".into(), value: sep, limit: 1e-8, pass: sep > 1e-8 },
    ];
    text.push_str(&check_table("checks", &checks));
    finish(dir, "appendix_b.txt", &text, &checks)
}

/// Plot window for one interval.
fn window(lo: f64, hi: f64) -> (f64, f64) {
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => (lo, hi),
        (true, false) => (lo, lo + 3.0),
        (false, true) => (hi - 3.0, hi),
        (false, false) => (-3.0, 3.0),
    }
}

fn csv_rows(xs: &[f64], cols: &[Column<'_>], head: &str, names: &str) -> String {
    let mut out = String::new();
    let header: Vec<String> = (1..=cols.len()).map(|i| format!("{names}_{i}")).collect();
    let _ = writeln!(out, "{head},{}", header.join(","));
    for &x in xs {
        let vals: Vec<String> = cols.iter().map(|f| fmt_f64(f(x))).collect();
        let _ = writeln!(out, "{},{}", fmt_f64(x), vals.join(","));
    }
    out
}

pub(super) fn plotdata(p: &PlotArgs, cfg: &ProblemConfig, dir: &Path) -> CmdResult {
    let c = &p.common;
    let problem = c.problem(cfg)?;
    if p.points < 2 {
        return Err(config_error("--points must be at least 2".into()));
    }
    let sys = mep::solve(&problem.family, problem.n, &problem.options)?;
    let grid = |a: f64, b: f64| -> Vec<f64> {
        (0..p.points).map(|i| a + (b - a) * i as f64 / (p.points - 1) as f64).collect()
    };
    let xs: Vec<f64> = problem
        .family
        .intervals()
        .iter()
        .flat_map(|&(lo, hi)| {
            let (a, b) = window(lo, hi);
            grid(a, b)
        })
        .collect();
    let members: Vec<Column> = sys
        .pairs
        .iter()
        .map(|q| {
            let v = q.vector.clone();
            Box::new(move |x| v.evaluate(x)) as Column
        })
        .collect();
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("plot.csv"), csv_rows(&xs, &members, "x", "E"))?;
    let mut text = header(&problem);
    let _ = writeln!(text, "wrote plot.csv ({} rows, {} members)", xs.len(), sys.len());
    let psi: Option<(Vec<f64>, Vec<Column>, &str)> = match &problem.preset {
        Some(Preset::Ince(spec)) => Some((
            grid(0.0, std::f64::consts::PI),
            sys.pairs
                .iter()
                .map(|q| {
                    let (v, s) = (q.vector.clone(), spec.clone());
                    Box::new(move |t: f64| {
                        t.sin().powi(s.eps[0] as i32)
                            * t.cos().powi(s.eps[1] as i32)
                            * v.evaluate((2.0 * t).cos())
                            * (s.alpha * (2.0 * t).cos()).exp()
                    }) as Column
                })
                .collect(),
            "theta",
        )),
        Some(Preset::Sextic(spec)) => Some((
            grid(0.0, 3.0),
            sys.pairs
                .iter()
                .map(|q| {
                    let (v, ell) = (q.vector.clone(), spec.ell);
                    Box::new(move |r: f64| r.powf(ell + 1.0) * (-r.powi(4) / 4.0).exp() * v.evaluate(r * r)) as Column
                })
                .collect(),
            "r",
        )),
        _ => None,
    };
    if let Some((ts, cols, head)) = psi {
        std::fs::write(dir.join("psi.csv"), csv_rows(&ts, &cols, head, "psi"))?;
        let _ = writeln!(text, "wrote psi.csv ({} rows)", ts.len());
    }
    finish(dir, "plot.txt", &text, &[])
}
