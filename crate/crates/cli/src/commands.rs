use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use riemann_core::algebra::{is_special_orthogonal, kernel_basis, ComplexMatrix};
use riemann_core::dieshop::{build_design, emit_die_design, reproduce_figure, tangency_residual, DieConfig, EmitFormat};
use riemann_core::dispersion::{
    dispersion_roots_2d, inhom_condition_residual, inhom_dispersion_det, symbol, wave_particle_diagnostics,
    InhomFactorization, Mode, WaveVector,
};
use riemann_core::solutions::{
    random_damped_params, trace_condition_residual, CorruptedField, Family, Field, FnField, HolomorphicFn, Layout,
    PlasticityField, PlasticityParams, WaveParticleField,
};
use riemann_core::systems::{load_system, parse_expression, BuiltinParams, SystemSpec};
use riemann_core::verify::{
    compatibility_residual, liouville_residual, ode_residual_417, ode_samples, pde_residuals_with,
    plasticity_tolerances, Grid, ResidualReport,
};
use riemann_core::{Error, Result};

use crate::{
    Command, Common, DieArgs, DispersionArgs, Format, InhomArgs, ModeArg, Ode417Args, PlasticityArgs, SystemArgs,
    TraceArgs, VerifyTarget, WaveArgs,
};

/// Runs one subcommand; `Ok(pass)` selects exit code 0 or 1.
pub fn run(command: Command) -> Result<bool> {
    match command {
        Command::Dispersion(a) => dispersion(a),
        Command::Verify { target: VerifyTarget::Plasticity(a) } => verify_plasticity(a),
        Command::Verify { target: VerifyTarget::Waveparticle(a) } => verify_wave(a),
        Command::Verify { target: VerifyTarget::System(a) } => verify_system(a),
        Command::Ode417(a) => ode417(a),
        Command::Tracecheck(a) => tracecheck(a),
        Command::Die(a) => die(a),
        Command::InhomCheck(a) => inhom_check(a),
    }
}

fn tolerance(common: &Common, default: f64) -> Result<f64> {
    let tol = match common.tol {
        Some(t) => t,
        None => match std::env::var("RIEMANN_TOL") {
            Ok(text) => text.trim().parse().map_err(|_| Error::Input(format!("RIEMANN_TOL is not a number: `{text}`")))?,
            Err(_) => default,
        },
    };
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::Input(format!("tolerance must be positive, got {tol}")));
    }
    Ok(tol)
}

/// Inline JSON when the argument looks like JSON, otherwise a file path.
fn json_text(arg: &str) -> Result<String> {
    let trimmed = arg.trim_start();
    if trimmed.starts_with('{') || trimmed.starts_with('[') {
        return Ok(arg.to_string());
    }
    std::fs::read_to_string(arg).map_err(|e| Error::Input(format!("cannot read {arg}: {e}")))
}

fn write_output(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_file(path, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            let tail = if text.ends_with('\n') { "" } else { "\n" };
            match write!(stdout, "{text}{tail}").and_then(|()| stdout.flush()) {
                // A closed pipe (e.g. `| head`) is the reader's choice, not a failure.
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    Err(Error::Input(format!("cannot write to stdout: {e}")))
                }
                _ => Ok(()),
            }
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Input(format!("cannot write {}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

/// Writes the report JSON and echoes the summary table to stderr.
fn emit_report(common: &Common, report: &ResidualReport) -> Result<bool> {
    write_output(common.out.as_ref(), &to_json(report)?)?;
    eprintln!("{report}");
    Ok(report.pass)
}

fn complex_list(text: &str) -> Result<Vec<Complex64>> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_expression(s.trim())?.eval(&[]))
        .collect()
}

fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

fn plasticity_params(params: Option<&str>, family: Option<&str>, seed: u64) -> Result<PlasticityParams> {
    let family = family.map(Family::parse).transpose()?;
    let mut p = match params {
        Some(text) => PlasticityParams::from_json(&json_text(text)?)?,
        None if family.unwrap_or_default() == Family::General => random_damped_params(seed, "0")?,
        None => PlasticityParams::default(),
    };
    if let Some(f) = family {
        p.family = f;
    }
    Ok(p)
}

fn builtin_params(p: &PlasticityParams, a: f64) -> Result<BuiltinParams> {
    Ok(BuiltinParams { rho: p.rho, potential: parse_expression(&p.potential)?, a })
}

fn with_corruption(field: Arc<dyn Field>, corrupt: bool, component: usize) -> Arc<dyn Field> {
    if corrupt {
        Arc::new(CorruptedField { inner: field, component })
    } else {
        field
    }
}

fn dispersion(args: DispersionArgs) -> Result<bool> {
    let sys = load_system(&args.system, &BuiltinParams { a: args.a, ..BuiltinParams::default() })?;
    let state = match &args.state {
        Some(s) => complex_list(s)?,
        None => vec![Complex64::new(0.0, 0.0); sys.q],
    };
    if state.len() != sys.q {
        return Err(Error::Input(format!("state has {} entries, system has q = {}", state.len(), sys.q)));
    }
    let roots = dispersion_roots_2d(&sys, &state)?;
    let (mats, _) = sys.eval_at(&state, &[0.0; 3][..sys.p])?;
    let mut kernels = Vec::new();
    for z in &roots {
        let lambda = WaveVector::new(vec![Complex64::new(1.0, 0.0), *z])?;
        kernels.push(kernel_basis(&symbol(&mats, &lambda)?, 1e-8)?);
    }
    let text = match args.format {
        Format::Json => to_json(&json!({
            "system": sys.name,
            "state": state.iter().map(|z| pair(*z)).collect::<Vec<_>>(),
            "roots": roots.iter().map(|z| pair(*z)).collect::<Vec<_>>(),
            "kernels": kernels.iter().map(|k| k.iter().map(|v| v.iter().map(|z| pair(*z)).collect::<Vec<_>>()).collect::<Vec<_>>()).collect::<Vec<_>>(),
        }))?,
        Format::Text => {
            let mut s = format!("system {} (lambda = (1, zeta))\n", sys.name);
            for (z, k) in roots.iter().zip(&kernels) {
                s += &format!("zeta = {}\n", fmt_complex(*z));
                for v in k {
                    s += &format!("  kernel [{}]\n", v.iter().map(|z| fmt_complex(*z)).collect::<Vec<_>>().join(", "));
                }
            }
            if roots.is_empty() {
                s += "no roots\n";
            }
            s
        }
        other => return Err(Error::Input(format!("dispersion writes text or json, not {other:?}"))),
    };
    write_output(args.out.as_ref(), &text)?;
    Ok(true)
}

fn fmt_complex(z: Complex64) -> String {
    let clean = |v: f64| if v.abs() < 1e-14 { 0.0 } else { v };
    let (re, im) = (clean(z.re), clean(z.im));
    if im >= 0.0 {
        format!("{re} + {im}i")
    } else {
        format!("{re} - {}i", -im)
    }
}

fn verify_plasticity(args: PlasticityArgs) -> Result<bool> {
    let params = plasticity_params(args.params.as_deref(), args.family.as_deref(), args.seed)?;
    let grid: Grid = args.grid.parse()?;
    let report = if params.family == Family::General {
        let tol = tolerance(&args.common, 1e-5)?;
        let sys = load_system("builtin:plasticity-full", &builtin_params(&params, 1.0)?)?;
        let field = with_corruption(Arc::new(PlasticityField::new(&params, Layout::Full)?), args.common.corrupt, 2);
        let report = pde_residuals_with(&sys, &field, &grid, tol, &plasticity_tolerances(&sys, tol))?;
        let theta = PlasticityField::new(&params, Layout::Theta)?;
        report.merge(compatibility_residual(&theta, &grid, tol)?)
    } else {
        let tol = tolerance(&args.common, 1e-8)?;
        let sys = load_system("builtin:plasticity-reduced", &BuiltinParams::default())?;
        let field = with_corruption(Arc::new(PlasticityField::new(&params, Layout::Reduced)?), args.common.corrupt, 3);
        pde_residuals_with(&sys, &field, &grid, tol, &vec![tol; sys.m])?
    };
    emit_report(&args.common, &report)
}

fn wave_grid(spec: &str) -> Result<Grid> {
    if spec == "default" {
        Ok(Grid::wave_particle())
    } else {
        spec.parse()
    }
}

fn verify_wave(args: WaveArgs) -> Result<bool> {
    let tol = tolerance(&args.common, 1e-6)?;
    let grid = wave_grid(&args.grid)?;
    let sys = load_system("builtin:wave-particle", &BuiltinParams { a: args.a, ..BuiltinParams::default() })?;
    let field = WaveParticleField { psi: HolomorphicFn::parse(&args.psi)?, a: args.a, n: args.n };
    wave_particle_check(args.a, args.n)?;
    let field = with_corruption(Arc::new(field), args.common.corrupt, 0);
    let report = liouville_residual(&field, 0, args.a, &grid, tol)?;
    let report = report.merge(pde_residuals_with(&sys, &field, &grid, tol, &vec![tol; sys.m])?);
    emit_report(&args.common, &report)
}

/// Surfaces parameter errors before the grid run masks them as unresolved points.
fn wave_particle_check(a: f64, n: i64) -> Result<()> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::Input(format!("a must be positive, got {a}")));
    }
    if n % 2 == 0 {
        return Err(Error::Input(format!("n must be odd, got {n}")));
    }
    Ok(())
}

/// A field given as expressions in the system's coordinates.
fn expression_field(sys: &SystemSpec, text: &str) -> Result<Arc<dyn Field>> {
    let map: BTreeMap<String, String> = serde_json::from_str(&json_text(text)?)?;
    for key in map.keys() {
        if !sys.vars.contains(key) {
            return Err(Error::Input(format!("field `{key}` is not an unknown of {}", sys.name)));
        }
    }
    let slots: Vec<usize> = sys
        .coords
        .iter()
        .map(|c| match c.as_str() {
            "t" => Ok(0),
            "x" => Ok(1),
            "y" => Ok(2),
            other => Err(Error::Unsupported(format!("coordinate `{other}`; fields are sampled in t, x, y"))),
        })
        .collect::<Result<_>>()?;
    let names: Vec<&str> = sys.coords.iter().map(String::as_str).collect();
    let compiled = sys
        .vars
        .iter()
        .map(|v| {
            let text = map.get(v).ok_or_else(|| Error::Input(format!("no expression for `{v}`")))?;
            parse_expression(text)?.compile(&names)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Arc::new(FnField::new(compiled.len(), move |p: [f64; 3]| {
        let args: Vec<Complex64> = slots.iter().map(|&k| Complex64::new(p[k], 0.0)).collect();
        compiled
            .iter()
            .map(|c| {
                let z = c.eval(&args)?;
                if z.im.abs() > 1e-12 * z.re.abs().max(1.0) {
                    return Err(Error::Eval(format!("field value {z} is not real")));
                }
                Ok(z.re)
            })
            .collect()
    })))
}

fn verify_system(args: SystemArgs) -> Result<bool> {
    let tol = tolerance(&args.common, 1e-5)?;
    let name = args.system.strip_prefix("builtin:");
    let params = plasticity_params(args.params.as_deref(), None, args.seed)?;
    let sys = load_system(&args.system, &builtin_params(&params, args.a)?)?;
    let (field, grid): (Arc<dyn Field>, Grid) = match (&args.fields, name) {
        (Some(text), _) => (expression_field(&sys, text)?, args.grid.parse()?),
        (None, Some("wave-particle")) => {
            let psi = args.psi.as_deref().ok_or_else(|| Error::Input("wave-particle needs --psi or --fields".into()))?;
            let field = WaveParticleField { psi: HolomorphicFn::parse(psi)?, a: args.a, n: args.n };
            wave_particle_check(args.a, args.n)?;
            (Arc::new(field), wave_grid(&args.grid)?)
        }
        (None, Some(n)) => {
            let layout = Layout::for_system(n).ok_or_else(|| Error::Input(format!("no builtin solution for {n}")))?;
            if layout == Layout::Full && params.family != Family::General {
                return Err(Error::Input("plasticity-full needs general-family parameters".into()));
            }
            (Arc::new(PlasticityField::new(&params, layout)?), args.grid.parse()?)
        }
        (None, None) => return Err(Error::Input("a system file needs --fields".into())),
    };
    if field.components() != sys.q {
        return Err(Error::Shape(format!("field has {} components, system has q = {}", field.components(), sys.q)));
    }
    let field = with_corruption(field, args.common.corrupt, sys.q - 1);
    let tols = if name == Some("plasticity-full") { plasticity_tolerances(&sys, tol) } else { vec![tol; sys.m] };
    let report = pde_residuals_with(&sys, &field, &grid, tol, &tols)?;
    emit_report(&args.common, &report)
}

#[derive(Serialize)]
struct OdeReport {
    t: f64,
    samples: usize,
    perturbation: f64,
    residual: f64,
    tolerance: f64,
    pass: bool,
}

fn ode417(args: Ode417Args) -> Result<bool> {
    let tol = tolerance(&args.common, 1e-8)?;
    let params = plasticity_params(args.params.as_deref(), None, args.seed)?;
    let samples = ode_samples();
    let perturbation = if args.common.corrupt { 1e-3 } else { 0.0 };
    let residual = ode_residual_417(&params, args.t, &samples, perturbation)?;
    let report = OdeReport { t: args.t, samples: samples.len(), perturbation, residual, tolerance: tol, pass: residual <= tol };
    write_output(args.common.out.as_ref(), &to_json(&report)?)?;
    eprintln!("ode residual {residual:.3e}  tol {tol:.1e}  pass {}", report.pass);
    Ok(report.pass)
}

#[derive(Serialize)]
struct TracePoint {
    point: [f64; 3],
    max_abs: f64,
}

#[derive(Serialize)]
struct TraceReport {
    points: Vec<TracePoint>,
    max_abs: f64,
    tolerance: f64,
    pass: bool,
}

fn tracecheck(args: TraceArgs) -> Result<bool> {
    let tol = tolerance(&args.common, 1e-6)?;
    if args.points == 0 {
        return Err(Error::Input("need at least one point".into()));
    }
    let params = plasticity_params(args.params.as_deref(), Some("general"), args.seed)?;
    let sys = load_system("builtin:plasticity-subsystem", &BuiltinParams::default())?;
    let field = with_corruption(Arc::new(PlasticityField::new(&params, Layout::Subsystem)?), args.common.corrupt, 2);
    let (one, i) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0));
    let lambda = ComplexMatrix::from_rows(&[vec![one, i], vec![one, -i]])?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut points = Vec::with_capacity(args.points);
    for _ in 0..args.points {
        let p = [rng.random_range(0.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let tr = trace_condition_residual(&sys, &field, &lambda, p)?;
        points.push(TracePoint { point: p, max_abs: tr.iter().map(|z| z.norm()).fold(0.0, f64::max) });
    }
    let max_abs = points.iter().map(|p| p.max_abs).fold(0.0, f64::max);
    let report = TraceReport { points, max_abs, tolerance: tol, pass: max_abs <= tol };
    write_output(args.common.out.as_ref(), &to_json(&report)?)?;
    eprintln!("trace residual {max_abs:.3e}  tol {tol:.1e}  pass {}", report.pass);
    Ok(report.pass)
}

fn die(args: DieArgs) -> Result<bool> {
    let design = match (&args.figure, &args.params) {
        (Some(f), None) => reproduce_figure(f)?,
        (None, Some(p)) => {
            let config: DieConfig = serde_json::from_str(&json_text(p)?)?;
            build_design(&config)?
        }
        _ => return Err(Error::Input("die needs exactly one of --figure or --params".into())),
    };
    let tol = args.tol.unwrap_or(1e-6);
    let tangency: Vec<(String, f64)> =
        design.curves.iter().map(|c| (c.id.clone(), tangency_residual(&c.streamline.polyline, c.frame))).collect();
    let worst = tangency.iter().map(|(_, t)| *t).fold(0.0, f64::max);
    let text = match args.format {
        Format::Svg => emit_die_design(&design, EmitFormat::Svg)?,
        Format::Csv => emit_die_design(&design, EmitFormat::Csv)?,
        Format::Json => to_json(&json!({ "design": design, "tangency": tangency, "tolerance": tol }))?,
        Format::Text => return Err(Error::Input("die writes svg, csv or json".into())),
    };
    write_output(args.out.as_ref(), &text)?;
    let points: usize = design.curves.iter().map(|c| c.streamline.polyline.len()).sum();
    eprintln!("{} curves, {points} points, worst tangency {worst:.3e}", design.curves.len());
    Ok(worst <= tol)
}

fn inhom_check(args: InhomArgs) -> Result<bool> {
    let tol = tolerance(&args.common, 1e-8)?;
    let sys = load_system(&args.system, &BuiltinParams { a: args.a, ..BuiltinParams::default() })?;
    let state = complex_list(&args.state)?;
    if state.len() != sys.q {
        return Err(Error::Input(format!("state has {} entries, system has q = {}", state.len(), sys.q)));
    }
    let mode = match args.mode {
        ModeArg::SimpleWave => Mode::SimpleWave,
        ModeArg::SimpleMode => Mode::SimpleMode,
    };
    let Some(rotation) = &args.rotation else {
        if args.system != "builtin:wave-particle" {
            return Err(Error::Input("--rotation is required except for builtin:wave-particle".into()));
        }
        let diagnostics = wave_particle_diagnostics(&sys, &state, tol)?;
        let pass = diagnostics.iter().any(|d| d.satisfied);
        let report = json!({ "system": sys.name, "state": state.iter().map(|z| pair(*z)).collect::<Vec<_>>(),
            "candidate": "reference", "diagnostics": diagnostics, "tolerance": tol, "pass": pass });
        write_output(args.common.out.as_ref(), &to_json(&report)?)?;
        for d in &diagnostics {
            eprintln!(
                "{:?} eps {:+}: residual {:.3e}, scale {:.6}{:+.6}i, rotation in SO(2) {}",
                d.reading, d.eps, d.residual_max_abs, d.scale_factor[0], d.scale_factor[1], d.rotation_is_special_orthogonal
            );
        }
        return Ok(pass);
    };
    let x = match &args.point {
        Some(p) => complex_list(p)?.iter().map(|z| z.re).collect(),
        None => vec![0.0; sys.p],
    };
    if x.len() != sys.p {
        return Err(Error::Input(format!("point has {} entries, system has p = {}", x.len(), sys.p)));
    }
    let lambda = WaveVector::new(complex_list(&args.lambda)?)?;
    let omega = match &args.omega {
        Some(o) => parse_expression(o)?.eval(&[])?,
        None => Complex64::new(1.0, 0.0),
    };
    let rows: Vec<Vec<String>> = serde_json::from_str(&json_text(rotation)?)?;
    let rows = rows
        .iter()
        .map(|r| r.iter().map(|e| parse_expression(e)?.eval(&[])).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let l = ComplexMatrix::from_rows(&rows)?;
    let so = is_special_orthogonal(&l, 1e-10)?;
    let fac = InhomFactorization::constant(omega, l.clone());
    let residual = inhom_condition_residual(&sys, &x, &state, &fac, &lambda, mode)?;
    let (l_fold, l_bar_fold) = (l.scale(omega), l.conj().scale(omega.conj()));
    let det = inhom_dispersion_det(&sys, &state, &lambda, omega, &l_fold, &l_bar_fold, mode)?;
    let max_abs = residual.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let pass = so && max_abs <= tol;
    let report = json!({ "system": sys.name, "residual": residual.iter().map(|z| pair(*z)).collect::<Vec<_>>(),
        "max_abs": max_abs, "rotation_is_special_orthogonal": so, "det": pair(det), "tolerance": tol, "pass": pass });
    write_output(args.common.out.as_ref(), &to_json(&report)?)?;
    eprintln!("condition residual {max_abs:.3e}  SO(q) {so}  pass {pass}");
    Ok(pass)
}
