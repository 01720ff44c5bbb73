//! Extrusion-die geometry traced from plasticity velocity fields.
//!
//! Curves follow `(dx, dy)/ds ∥ (U − u, V − v)` for a frame velocity `(U, V)`.
//! The direction field is normalized, so `s` is arc length and the slope form
//! `dy/dx = (V − v)/(U − u)` is recovered wherever `U ≠ u`.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::solutions::{Coeff, Family, Plasticity, PlasticityParams};
use crate::{Error, Result};

/// Speeds below this are treated as stagnation.
pub const STAGNATION_SPEED: f64 = 1e-9;

pub type Velocity<'a> = dyn Fn(f64, f64) -> Result<[f64; 2]> + Sync + 'a;

/// One RK4 step `(p, k1, h) -> p'`, `None` on stagnation.
type Stepper<'a> = dyn Fn([f64; 2], [f64; 2], f64) -> Result<Option<[f64; 2]>> + 'a;

/// Points, material velocities and how the branch ended.
type Branch = (Vec<[f64; 2]>, Vec<[f64; 2]>, Termination);

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
    #[default]
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamlineSeed {
    pub start: [f64; 2],
    #[serde(default)]
    pub direction: Direction,
    pub ds: f64,
    pub s_max: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

impl Domain {
    fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x[0] && p[0] <= self.x[1] && p[1] >= self.y[0] && p[1] <= self.y[1]
    }

    pub fn diagonal(&self) -> f64 {
        (self.x[1] - self.x[0]).hypot(self.y[1] - self.y[0])
    }

    /// Point where the segment from inside `a` to outside `b` leaves the box.
    fn exit_point(&self, a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
        let mut s = 1.0f64;
        for k in 0..2 {
            let (lo, hi) = if k == 0 { (self.x[0], self.x[1]) } else { (self.y[0], self.y[1]) };
            let d = b[k] - a[k];
            if b[k] > hi && d != 0.0 {
                s = s.min((hi - a[k]) / d);
            }
            if b[k] < lo && d != 0.0 {
                s = s.min((lo - a[k]) / d);
            }
        }
        [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    MaxLength,
    DomainExit,
    Stagnation,
    Reversal,
}

/// Points with arc length and the material velocity `(u, v)` at each.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Polyline {
    pub s: Vec<f64>,
    pub points: Vec<[f64; 2]>,
    pub velocity: Vec<[f64; 2]>,
}

impl Polyline {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Streamline {
    pub polyline: Polyline,
    /// How each traced branch ended, backward branch first.
    pub terminations: Vec<Termination>,
}

fn relative(vel: &Velocity, frame: [f64; 2], p: [f64; 2]) -> Result<([f64; 2], [f64; 2])> {
    let v = vel(p[0], p[1])?;
    if !(v[0].is_finite() && v[1].is_finite()) {
        return Err(Error::Eval(format!("non-finite velocity at ({}, {})", p[0], p[1])));
    }
    Ok(([frame[0] - v[0], frame[1] - v[1]], v))
}

fn unit(w: [f64; 2], sign: f64) -> Option<[f64; 2]> {
    let n = w[0].hypot(w[1]);
    (n >= STAGNATION_SPEED).then(|| [sign * w[0] / n, sign * w[1] / n])
}

fn trace_branch(
    vel: &Velocity,
    frame: [f64; 2],
    seed: &StreamlineSeed,
    domain: &Domain,
    sign: f64,
) -> Result<Branch> {
    let ds = seed.ds;
    let mut p = seed.start;
    let (w, _) = relative(vel, frame, p)?;
    let mut dir = unit(w, sign).ok_or(Error::Stagnation { x: p[0], y: p[1] })?;
    let (mut points, mut velocities) = (Vec::new(), Vec::new());
    let mut s = 0.0;
    let g = |q: [f64; 2]| -> Result<Option<[f64; 2]>> { Ok(unit(relative(vel, frame, q)?.0, sign)) };
    let step = |p: [f64; 2], k1: [f64; 2], h: f64| -> Result<Option<[f64; 2]>> {
        let Some(k2) = g([p[0] + 0.5 * h * k1[0], p[1] + 0.5 * h * k1[1]])? else { return Ok(None) };
        let Some(k3) = g([p[0] + 0.5 * h * k2[0], p[1] + 0.5 * h * k2[1]])? else { return Ok(None) };
        let Some(k4) = g([p[0] + h * k3[0], p[1] + h * k3[1]])? else { return Ok(None) };
        Ok(Some([
            p[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            p[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ]))
    };
    loop {
        if s + ds > seed.s_max * (1.0 + 1e-12) {
            return Ok((points, velocities, Termination::MaxLength));
        }
        let Some(next) = step(p, dir, ds)? else {
            return Ok((points, velocities, Termination::Stagnation));
        };
        if !domain.contains(next) {
            if let Some(q) = land_on_boundary(&step, domain, p, dir, ds, next)? {
                velocities.push(vel(q[0], q[1])?);
                points.push(q);
            }
            return Ok((points, velocities, Termination::DomainExit));
        }
        let (w, v) = relative(vel, frame, next)?;
        let Some(new_dir) = unit(w, sign) else {
            return Ok((points, velocities, Termination::Stagnation));
        };
        if new_dir[0] * dir[0] + new_dir[1] * dir[1] < 0.0 {
            return Ok((points, velocities, Termination::Reversal));
        }
        s += ds;
        p = next;
        dir = new_dir;
        points.push(p);
        velocities.push(v);
    }
}

/// Shortened RK4 step ending on the box edge crossed by `p → next`, found by
/// secant iteration on the step length. The crossed coordinate is then pinned.
fn land_on_boundary(
    step: &Stepper,
    domain: &Domain,
    p: [f64; 2],
    dir: [f64; 2],
    ds: f64,
    next: [f64; 2],
) -> Result<Option<[f64; 2]>> {
    let chord = domain.exit_point(p, next);
    let (k, edge) = if chord[0] <= domain.x[0] || chord[0] >= domain.x[1] {
        (0, if next[0] > domain.x[1] { domain.x[1] } else { domain.x[0] })
    } else {
        (1, if next[1] > domain.y[1] { domain.y[1] } else { domain.y[0] })
    };
    let miss = |q: [f64; 2]| q[k] - edge;
    let (mut h0, mut f0) = (0.0, miss(p));
    let (mut h1, mut f1) = (ds, miss(next));
    let mut q = next;
    for _ in 0..50 {
        if f1 == f0 {
            break;
        }
        let h = (h1 - f1 * (h1 - h0) / (f1 - f0)).clamp(0.0, ds);
        let Some(r) = step(p, dir, h)? else { return Ok(None) };
        (h0, f0, h1, f1, q) = (h1, f1, h, miss(r), r);
        if f1.abs() <= 1e-15 * edge.abs().max(1.0) {
            break;
        }
    }
    if h1 <= 0.0 {
        return Ok(None);
    }
    q[k] = edge;
    Ok(domain.contains(q).then_some(q))
}

/// Traces the curve through `seed.start` tangent to `frame − (u, v)`.
pub fn trace_streamline(vel: &Velocity, frame: [f64; 2], seed: &StreamlineSeed, domain: &Domain) -> Result<Streamline> {
    if !(seed.ds > 0.0 && seed.ds.is_finite() && seed.s_max > 0.0) {
        return Err(Error::Input(format!("need ds > 0 and s_max > 0, got {} and {}", seed.ds, seed.s_max)));
    }
    if !domain.contains(seed.start) {
        return Err(Error::Input(format!("seed {:?} lies outside the domain", seed.start)));
    }
    let (w, v0) = relative(vel, frame, seed.start)?;
    if unit(w, 1.0).is_none() {
        return Err(Error::Stagnation { x: seed.start[0], y: seed.start[1] });
    }
    let mut line = Polyline::default();
    let mut terminations = Vec::new();
    if matches!(seed.direction, Direction::Backward | Direction::Both) {
        let (pts, vels, term) = trace_branch(vel, frame, seed, domain, -1.0)?;
        let n = pts.len();
        for (k, (p, v)) in pts.into_iter().zip(vels).enumerate().rev() {
            line.s.push(-(seed.ds * (k + 1) as f64).min(seed.ds * n as f64));
            line.points.push(p);
            line.velocity.push(v);
        }
        terminations.push(term);
    }
    line.s.push(0.0);
    line.points.push(seed.start);
    line.velocity.push(v0);
    if matches!(seed.direction, Direction::Forward | Direction::Both) {
        let (pts, vels, term) = trace_branch(vel, frame, seed, domain, 1.0)?;
        for (k, (p, v)) in pts.into_iter().zip(vels).enumerate() {
            line.s.push(seed.ds * (k + 1) as f64);
            line.points.push(p);
            line.velocity.push(v);
        }
        terminations.push(term);
    }
    fix_arc_length(&mut line);
    Ok(Streamline { polyline: line, terminations })
}

/// Recomputes `s` from chord lengths so clipped end segments are measured exactly.
fn fix_arc_length(line: &mut Polyline) {
    let zero = line.s.iter().position(|&s| s == 0.0).unwrap_or(0);
    let mut s = vec![0.0; line.points.len()];
    for k in zero + 1..line.points.len() {
        s[k] = s[k - 1] + dist(line.points[k], line.points[k - 1]);
    }
    for k in (0..zero).rev() {
        s[k] = s[k + 1] - dist(line.points[k], line.points[k + 1]);
    }
    line.s = s;
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Largest `|Δ × w| / (|Δ||w|)` over interior vertices, with `Δ` the
/// three-point tangent (second order on uneven spacing) and `w = frame − (u, v)`.
pub fn tangency_residual(line: &Polyline, frame: [f64; 2]) -> f64 {
    let mut worst = 0.0f64;
    for k in 1..line.len().saturating_sub(1) {
        let (a, m, b) = (line.points[k - 1], line.points[k], line.points[k + 1]);
        let (h1, h2) = (dist(a, m), dist(m, b));
        let d = [
            h1 * h1 * (b[0] - m[0]) + h2 * h2 * (m[0] - a[0]),
            h1 * h1 * (b[1] - m[1]) + h2 * h2 * (m[1] - a[1]),
        ];
        let v = line.velocity[k];
        let w = [frame[0] - v[0], frame[1] - v[1]];
        let denom = d[0].hypot(d[1]) * w[0].hypot(w[1]);
        if denom > 0.0 {
            worst = worst.max((d[0] * w[1] - d[1] * w[0]).abs() / denom);
        }
    }
    worst
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    Wall,
    Flow,
    Boundary,
}

impl CurveKind {
    fn class(self) -> &'static str {
        match self {
            CurveKind::Wall => "wall",
            CurveKind::Flow => "flow",
            CurveKind::Boundary => "boundary",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Curve {
    pub id: String,
    pub kind: CurveKind,
    /// Frame velocity the curve was traced in.
    pub frame: [f64; 2],
    pub streamline: Streamline,
}

/// A seed for one curve of a design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveSeed {
    pub id: String,
    pub kind: CurveKind,
    pub start: [f64; 2],
    #[serde(default)]
    pub direction: Direction,
}

fn default_t() -> f64 {
    0.0
}

/// JSON description of a die.
///
/// Walls and interior flow lines are material streamlines (frame velocity 0).
/// Boundary curves use the feed velocity when their id starts with `C1` and the
/// exit velocity otherwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DieConfig {
    #[serde(default = "custom")]
    pub figure: String,
    pub params: PlasticityParams,
    #[serde(default = "default_t")]
    pub t: f64,
    pub feed: [f64; 2],
    pub exit: [f64; 2],
    /// Interior flow-line seeds.
    #[serde(default)]
    pub seeds: Vec<[f64; 2]>,
    #[serde(default)]
    pub walls: Vec<[f64; 2]>,
    #[serde(default)]
    pub boundaries: Vec<CurveSeed>,
    /// Defaults to the seed bounding box padded by half its size (at least 1).
    #[serde(default)]
    pub domain: Option<Domain>,
    #[serde(default)]
    pub ds: Option<f64>,
    #[serde(default)]
    pub s_max: Option<f64>,
}

fn custom() -> String {
    "custom".into()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DieDesign {
    pub figure: String,
    pub family: Family,
    pub params: PlasticityParams,
    pub t: f64,
    pub feed: [f64; 2],
    pub exit: [f64; 2],
    pub domain: Domain,
    pub curves: Vec<Curve>,
}

impl DieDesign {
    pub fn curves_of(&self, kind: CurveKind) -> impl Iterator<Item = &Curve> {
        self.curves.iter().filter(move |c| c.kind == kind)
    }
}

pub fn build_design(config: &DieConfig) -> Result<DieDesign> {
    let model = Plasticity::new(&config.params)?;
    let t = config.t;
    let vel = |x: f64, y: f64| model.velocity(t, x, y);
    let domain = match config.domain {
        Some(d) => d,
        None => seed_box(config)?,
    };
    let ds = config.ds.unwrap_or(1e-3 * domain.diagonal());
    let s_max = config.s_max.unwrap_or(10.0 * domain.diagonal());
    let mut plan: Vec<CurveSeed> = Vec::new();
    for (k, w) in config.walls.iter().enumerate() {
        plan.push(CurveSeed { id: format!("wall{}", k + 1), kind: CurveKind::Wall, start: *w, direction: Direction::Both });
    }
    for b in &config.boundaries {
        plan.push(b.clone());
    }
    for (k, s) in config.seeds.iter().enumerate() {
        plan.push(CurveSeed { id: format!("flow{}", k + 1), kind: CurveKind::Flow, start: *s, direction: Direction::Both });
    }
    if plan.is_empty() {
        return Err(Error::Input("die design has no seeds".into()));
    }
    let curves: Vec<Result<Curve>> = plan
        .par_iter()
        .map(|c| {
            let frame = match c.kind {
                CurveKind::Boundary if c.id.starts_with("C1") => config.feed,
                CurveKind::Boundary => config.exit,
                _ => [0.0, 0.0],
            };
            let seed = StreamlineSeed { start: c.start, direction: c.direction, ds, s_max };
            let streamline = trace_streamline(&vel, frame, &seed, &domain)?;
            Ok(Curve { id: c.id.clone(), kind: c.kind, frame, streamline })
        })
        .collect();
    Ok(DieDesign {
        figure: config.figure.clone(),
        family: config.params.family,
        params: config.params.clone(),
        t,
        feed: config.feed,
        exit: config.exit,
        domain,
        curves: curves.into_iter().collect::<Result<_>>()?,
    })
}

fn seed_box(config: &DieConfig) -> Result<Domain> {
    let pts: Vec<[f64; 2]> =
        config.walls.iter().chain(&config.seeds).copied().chain(config.boundaries.iter().map(|b| b.start)).collect();
    if pts.is_empty() {
        return Err(Error::Input("die design has no seeds".into()));
    }
    let lo = |k: usize| pts.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
    let hi = |k: usize| pts.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max);
    let pad = |k: usize| (0.5 * (hi(k) - lo(k))).max(1.0);
    Ok(Domain { x: [lo(0) - pad(0), hi(0) + pad(0)], y: [lo(1) - pad(1), hi(1) + pad(1)] })
}

fn figure_params(family: Family, c1: [f64; 2], c2: [f64; 2], c3: [f64; 2]) -> PlasticityParams {
    PlasticityParams {
        family,
        c1: Coeff::constant(c1[0], c1[1]),
        c2: Coeff::constant(c2[0], c2[1]),
        c3: Coeff::constant(c3[0], c3[1]),
        ..PlasticityParams::default()
    }
}

fn boundary(id: &str, start: [f64; 2]) -> CurveSeed {
    CurveSeed { id: id.into(), kind: CurveKind::Boundary, start, direction: Direction::Both }
}

/// Default configuration of the two reference dies.
///
/// Seeds and extents are not part of the reference parameter sets; these are our choices.
pub fn figure_config(which: &str) -> Result<DieConfig> {
    match which {
        // u = 4x, v = −4y. Walls are the hyperbolas xy = ±1.4875 through the
        // inlet stagnation line x = U₀/4.
        "fig1" => {
            let xc = 5.95 / 4.0;
            let xe = 24.05 / 4.0;
            Ok(DieConfig {
                figure: "fig1".into(),
                params: figure_params(Family::CaseI, [1.0, 0.0], [0.0, 0.0], [0.0, 0.0]),
                t: 0.0,
                feed: [5.95, 0.0],
                exit: [24.05, 0.0],
                seeds: [0.0, 0.25, -0.25, 0.5, -0.5, 0.75, -0.75].iter().map(|&y| [xc, y]).collect(),
                walls: vec![[xc, 1.0], [xc, -1.0]],
                boundaries: vec![
                    boundary("C1a", [xc, 1.0]),
                    boundary("C1b", [xc, -1.0]),
                    boundary("C2a", [xe, 0.2]),
                    boundary("C2b", [xe, -0.2]),
                ],
                domain: Some(Domain { x: [1.0, 6.5], y: [-1.5, 1.5] }),
                ds: Some(1e-3),
                s_max: None,
            })
        }
        // c₁ = 0 leaves the uniform flow (u, v) = (Re c₃, Im c₃) = (−0.5, 0).
        // Seeds avoid the line y = 0.5 through the pole of h.
        "fig2" => Ok(DieConfig {
            figure: "fig2".into(),
            params: figure_params(Family::CaseII, [0.0, 0.0], [0.0, -0.5], [-0.5, 0.0]),
            t: 0.0,
            feed: [0.2, 0.2],
            exit: [0.2, -0.2],
            seeds: [0.0, 0.25, -0.25, -0.5, 0.75, -0.75].iter().map(|&y| [0.0, y]).collect(),
            walls: vec![[0.0, 1.0], [0.0, -1.0]],
            boundaries: vec![boundary("C1", [-1.0, 0.0]), boundary("C2", [1.0, 0.0])],
            domain: Some(Domain { x: [-2.0, 2.0], y: [-1.25, 1.25] }),
            ds: Some(1e-3),
            s_max: None,
        }),
        other => Err(Error::Input(format!("unknown figure `{other}`; expected fig1 or fig2"))),
    }
}

pub fn reproduce_figure(which: &str) -> Result<DieDesign> {
    build_design(&figure_config(which)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmitFormat {
    Svg,
    Csv,
}

pub fn emit_die_design(design: &DieDesign, format: EmitFormat) -> Result<String> {
    if design.curves.iter().all(|c| c.streamline.polyline.is_empty()) {
        return Err(Error::Input("design has no curves".into()));
    }
    Ok(match format {
        EmitFormat::Svg => emit_svg(design),
        EmitFormat::Csv => emit_csv(design),
    })
}

fn emit_csv(design: &DieDesign) -> String {
    let mut out = String::from("curve_id,s,x,y,u,v\n");
    for c in &design.curves {
        let line = &c.streamline.polyline;
        for k in 0..line.len() {
            let (p, v) = (line.points[k], line.velocity[k]);
            let _ = writeln!(out, "{},{},{},{},{},{}", c.id, line.s[k], p[0], p[1], v[0], v[1]);
        }
    }
    out
}

fn emit_svg(design: &DieDesign) -> String {
    let pts = design.curves.iter().flat_map(|c| c.streamline.polyline.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in pts {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    let (w, h) = ((x1 - x0).max(1e-9), (y1 - y0).max(1e-9));
    let (mx, my) = (0.05 * w, 0.05 * h);
    let stroke = 0.003 * w.max(h);
    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" viewBox="{} {} {} {}" width="800" height="{:.0}">"#,
        x0 - mx,
        -(y1 + my),
        w + 2.0 * mx,
        h + 2.0 * my,
        800.0 * (h + 2.0 * my) / (w + 2.0 * mx)
    );
    let _ = writeln!(out, "  <title>{}</title>", escape(&design.figure));
    let _ = writeln!(
        out,
        "  <style>path {{ fill: none; stroke-width: {stroke}; }} .wall {{ stroke: #000; stroke-width: {}; }} .flow {{ stroke: #1f5fbf; }} .boundary {{ stroke: #c0392b; stroke-dasharray: {} {}; }}</style>",
        3.0 * stroke,
        4.0 * stroke,
        2.0 * stroke
    );
    for c in &design.curves {
        let line = &c.streamline.polyline;
        if line.is_empty() {
            continue;
        }
        let mut d = String::new();
        for (k, p) in line.points.iter().enumerate() {
            let _ = write!(d, "{}{:.6},{:.6}", if k == 0 { "M" } else { " L" }, p[0], -p[1]);
        }
        let _ = writeln!(out, r#"  <path id="{}" class="{}" d="{}"/>"#, escape(&c.id), c.kind.class(), d);
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
