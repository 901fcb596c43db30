mod svg;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use rodlab::energy::{convexify, density_by_name, ConvexEnvelopeTable, ConvexifyOptions, EnergyDensity, ReducedDensity};
use rodlab::extrusion::{
    ciarlet_necas_1d_check, cosserat_normal, smooth_cosserat, tubular_thickness, CosseratField, CnVerdict,
};
use rodlab::gamma_lab::{gamma_experiment, StepSpec};
use rodlab::geometry::{degree_map, image_length, self_intersections, ViolationKind};
use rodlab::injectify::{build_good_arrival_grid, crossing_set, injectify, neighborhood_radii, pl_injectify};
use rodlab::injectify::{InjectifyMode, InjectifyOptions};
use rodlab::relaxation::{recovery_rod_sequence, Schedules};
use rodlab::witness::{find_injective_witness, DEFAULT_BUDGET};
use rodlab::{fixtures, PolylineCurve, RodError, Vec2};

#[derive(Parser, Serialize)]
#[command(name = "rodlab", version, about = "Planar rod toolkit")]
struct Cli {
    /// Format of the summary printed on stdout.
    #[arg(long, value_enum, global = true, default_value = "json")]
    format: Format,
    /// Seed for randomized components.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Serialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
enum Command {
    /// Exact self-intersection report.
    Check(CheckArgs),
    /// Injective piecewise-affine approximation.
    Injectify(InjectifyArgs),
    /// Laminate recovery rods for k = 1..K.
    Relax(RelaxArgs),
    /// Thin-strip extrusion with an injectivity certificate.
    Extrude(ExtrudeArgs),
    /// Ciarlet-Necas length comparison.
    CheckCn(CurveArg),
    /// Recovery sequence energies against the limit functional.
    Gamma(GammaArgs),
    /// SVG of a curve or a strip.
    Render(RenderArgs),
    /// Write a named fixture curve.
    Fixture(FixtureArgs),
}

#[derive(Args, Serialize)]
struct CurveArg {
    #[arg(long)]
    curve: PathBuf,
}

#[derive(Args, Serialize)]
struct CheckArgs {
    #[arg(long)]
    curve: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Degree map resolution for closed curves.
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long)]
    degree_csv: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ModeArg {
    Anchored,
    Chord,
}

#[derive(Args, Serialize)]
struct InjectifyArgs {
    #[arg(long)]
    curve: PathBuf,
    #[arg(long)]
    witness: Option<PathBuf>,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, value_enum, default_value = "anchored")]
    mode: ModeArg,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    cert: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct TableArgs {
    #[arg(long, default_value = "neohookean")]
    density: String,
    /// Target laminate accuracy of the convex-envelope table.
    #[arg(long, default_value_t = 1e-2)]
    table_gamma: f64,
    #[arg(long, default_value_t = 65)]
    table_n: usize,
}

#[derive(Args, Serialize)]
struct RelaxArgs {
    #[arg(long)]
    curve: PathBuf,
    #[command(flatten)]
    table: TableArgs,
    #[arg(long)]
    k: usize,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct ExtrudeArgs {
    #[arg(long)]
    curve: PathBuf,
    #[arg(long)]
    delta: f64,
    /// Corner sharpness for smoothing the normal field.
    #[arg(long)]
    i: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    cap: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct GammaArgs {
    #[arg(long)]
    curve: PathBuf,
    #[command(flatten)]
    table: TableArgs,
    /// JSON list of {"k":..,"i":..,"h":..}; i and h optional.
    #[arg(long)]
    schedule: PathBuf,
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct RenderArgs {
    #[arg(long, conflicts_with = "strip", required_unless_present = "strip")]
    curve: Option<PathBuf>,
    /// Strip JSON written by `extrude`.
    #[arg(long)]
    strip: Option<PathBuf>,
    /// Overlay a good arrival grid of this spacing.
    #[arg(long)]
    grid: Option<f64>,
    /// Mark the grid crossings with their balls.
    #[arg(long, requires = "grid")]
    crossings: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct FixtureArgs {
    /// Fixture name, or `random` for a seeded random injective polyline.
    #[arg(required_unless_present = "list")]
    name: Option<String>,
    #[arg(long)]
    list: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    segments: usize,
}

struct Ctx<'a> {
    manifest: Value,
    format: Format,
    cli: &'a Cli,
}

impl Ctx<'_> {
    fn stamp(&self, mut v: Value) -> Value {
        if let Value::Object(m) = &mut v {
            m.insert("manifest".into(), self.manifest.clone());
        }
        v
    }

    fn write_json(&self, path: &Path, v: Value) -> anyhow::Result<()> {
        let s = serde_json::to_string_pretty(&self.stamp(v))? + "\n";
        fs::write(path, s).with_context(|| format!("writing {}", path.display()))
    }

    /// CSV artifacts carry their manifest in a sidecar file.
    fn write_csv(&self, path: &Path, body: &str) -> anyhow::Result<()> {
        fs::write(path, body).with_context(|| format!("writing {}", path.display()))?;
        let side = PathBuf::from(format!("{}.manifest.json", path.display()));
        fs::write(&side, serde_json::to_string_pretty(&self.manifest)? + "\n")
            .with_context(|| format!("writing {}", side.display()))
    }

    fn write_svg(&self, path: &Path, mut scene: svg::Scene) -> anyhow::Result<()> {
        scene.metadata(serde_json::to_string(&self.manifest)?);
        fs::write(path, scene.render()).with_context(|| format!("writing {}", path.display()))
    }

    /// Summary on stdout: JSON object, or `key,value` rows.
    fn print(&self, rows: &[(&str, Value)]) {
        match self.format {
            Format::Json => {
                let m: serde_json::Map<String, Value> = rows.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
                println!("{}", serde_json::to_string_pretty(&Value::Object(m)).unwrap());
            }
            Format::Csv => {
                println!("key,value");
                for (k, v) in rows {
                    let s = match v {
                        Value::String(s) => s.clone(),
                        other => other.to_string(),
                    };
                    println!("{k},{s}");
                }
            }
        }
    }
}

fn read_curve(path: &Path) -> anyhow::Result<PolylineCurve> {
    let s = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(PolylineCurve::from_json(&s)?)
}

fn curve_value(c: &PolylineCurve) -> Value {
    serde_json::from_str(&c.to_json()).expect("curve json")
}

fn pt(p: Vec2) -> Value {
    json!([p.x, p.y])
}

fn check_inputs(inputs: &[&Path]) -> anyhow::Result<()> {
    for p in inputs {
        if !p.is_file() {
            return Err(RodError::Precondition(format!("input {} does not exist", p.display())).into());
        }
    }
    Ok(())
}

fn check_outputs(outputs: &[&Path]) -> anyhow::Result<()> {
    for p in outputs {
        if let Some(parent) = p.parent() {
            if !parent.as_os_str().is_empty() && !parent.is_dir() {
                return Err(RodError::Precondition(format!("output directory {} does not exist", parent.display())).into());
            }
        }
    }
    Ok(())
}

fn build_table(args: &TableArgs) -> anyhow::Result<(Arc<dyn EnergyDensity>, ConvexEnvelopeTable)> {
    let w = density_by_name(&args.density)?;
    let f = ReducedDensity::new(w.clone());
    let opts = ConvexifyOptions { n: args.table_n, gamma: args.table_gamma, ..ConvexifyOptions::default() };
    Ok((w, convexify(&f, &opts)?))
}

fn cmd_check(ctx: &Ctx, a: &CheckArgs) -> anyhow::Result<()> {
    check_inputs(&[&a.curve])?;
    let outs: Vec<&Path> = a.out.iter().chain(a.degree_csv.iter()).map(|p| p.as_path()).collect();
    check_outputs(&outs)?;
    let c = read_curve(&a.curve)?;
    let report = self_intersections(&c);
    let wr = find_injective_witness(&c, 1e-3, DEFAULT_BUDGET);
    let status = serde_json::to_value(wr.status)?;
    let mut rows: Vec<(&str, Value)> = vec![
        ("injective", json!(report.is_injective)),
        ("crossings", json!(report.count(ViolationKind::TransversalCrossing))),
        ("touches", json!(report.count(ViolationKind::VertexTouch))),
        ("overlaps", json!(report.count(ViolationKind::Overlap))),
        ("length", json!(c.length())),
        ("image_length", json!(image_length(&c))),
        ("witness", status.clone()),
    ];
    let mut doc = json!({
        "report": report.to_json_value(),
        "length": c.length(),
        "image_length": image_length(&c),
        "witness": status,
    });
    if let Some(res) = a.degree {
        let band = 1e-3 * (c.bbox().1 - c.bbox().0).max();
        let dm = degree_map(&c, res, band)?;
        let defined: Vec<i64> = dm.degrees.iter().flatten().cloned().collect();
        let in01 = defined.iter().filter(|d| **d == 0 || **d == 1).count();
        let frac = if defined.is_empty() { 0.0 } else { in01 as f64 / defined.len() as f64 };
        rows.push(("degree_values", json!(dm.defined_values())));
        rows.push(("degree_in_0_1", json!(frac)));
        doc["degree"] = json!({ "resolution": res, "band": band, "values": dm.defined_values(), "fraction_in_0_1": frac });
        if let Some(p) = &a.degree_csv {
            ctx.write_csv(p, &dm.to_csv())?;
        }
    }
    if let Some(p) = &a.out {
        ctx.write_json(p, doc)?;
    }
    ctx.print(&rows);
    Ok(())
}

fn cmd_injectify(ctx: &Ctx, a: &InjectifyArgs) -> anyhow::Result<()> {
    let mut ins = vec![a.curve.as_path()];
    ins.extend(a.witness.iter().map(|p| p.as_path()));
    check_inputs(&ins)?;
    let mut outs = vec![a.out.as_path()];
    outs.extend(a.cert.iter().map(|p| p.as_path()));
    check_outputs(&outs)?;
    let c = read_curve(&a.curve)?;
    let mode = match a.mode {
        ModeArg::Anchored => InjectifyMode::Anchored,
        ModeArg::Chord => InjectifyMode::Chord,
    };
    let opts = InjectifyOptions { mode, ..InjectifyOptions::default() };
    let (out, cert) = match &a.witness {
        Some(w) => pl_injectify(&c, &read_curve(w)?, a.delta, a.p, &opts)?,
        None => injectify(&c, a.delta, a.p, &opts)?,
    };
    ctx.write_json(&a.out, curve_value(&out))?;
    if let Some(p) = &a.cert {
        ctx.write_json(p, serde_json::to_value(&cert)?)?;
    }
    ctx.print(&[
        ("injective", json!(cert.injective)),
        ("segments", json!(out.num_segments())),
        ("c0_error", json!(cert.c0_error)),
        ("w1p_error", json!(cert.w1p_error)),
        ("energy_ratio", json!(cert.energy_ratio)),
    ]);
    Ok(())
}

fn cmd_relax(ctx: &Ctx, a: &RelaxArgs) -> anyhow::Result<()> {
    check_inputs(&[&a.curve])?;
    if a.k == 0 {
        return Err(RodError::Precondition("k must be positive".into()).into());
    }
    let y = read_curve(&a.curve)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let (_, table) = build_table(&a.table)?;
    let mut csv = String::from("k,n,beta,I,I_C,I_input,buffer,correction,table_gap,inv_n,inv_k,bound,holds\n");
    let mut last = None;
    for k in 1..=a.k {
        let r = recovery_rod_sequence(&y, &table, k, &Schedules::defaults())?;
        let t = &r.terms;
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            t.k, t.n, t.beta, t.energy, t.relaxed, t.unrelaxed, t.buffer, t.correction, t.table_gap, t.inv_n, t.inv_k,
            t.bound, t.holds
        ));
        let mut v = curve_value(&r.curve);
        v["terms"] = serde_json::to_value(t)?;
        v["constructions"] = serde_json::to_value(&r.constructions)?;
        ctx.write_json(&a.out.join(format!("rod_k{k}.json")), v)?;
        last = Some(r.terms);
    }
    ctx.write_csv(&a.out.join("energies.csv"), &csv)?;
    let t = last.unwrap();
    ctx.print(&[
        ("k", json!(t.k)),
        ("n", json!(t.n)),
        ("I", json!(t.energy)),
        ("I_C", json!(t.relaxed)),
        ("bound", json!(t.bound)),
        ("holds", json!(t.holds)),
    ]);
    Ok(())
}

fn pow2_at_least(x: f64) -> usize {
    let mut i = 1usize;
    while (i as f64) < x {
        i *= 2;
    }
    i
}

fn cmd_extrude(ctx: &Ctx, a: &ExtrudeArgs) -> anyhow::Result<()> {
    check_inputs(&[&a.curve])?;
    let mut outs = vec![a.out.as_path()];
    outs.extend(a.svg.iter().map(|p| p.as_path()));
    check_outputs(&outs)?;
    let y = read_curve(&a.curve)?;
    let normal = cosserat_normal(&y)?;
    let (field, eps_tilde): (CosseratField, Option<f64>) = if normal.is_continuous() {
        (normal, None)
    } else {
        let bp = y.breakpoints();
        let min_len = bp.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        let i = a.i.unwrap_or_else(|| pow2_at_least(4.0 / min_len));
        let s = smooth_cosserat(&y, &normal, i, a.delta)?;
        (s.field, Some(s.eps_tilde))
    };
    let m = tubular_thickness(&y, &field, a.delta, a.cap, ctx.cli.seed)?;
    let boundary = m.boundary();
    let doc = json!({
        "curve": curve_value(&y),
        "strip": serde_json::to_value(&m)?,
        "eps_tilde": eps_tilde,
        "boundary": boundary.iter().map(|p| pt(*p)).collect::<Vec<_>>(),
    });
    ctx.write_json(&a.out, doc)?;
    if let Some(p) = &a.svg {
        ctx.write_svg(p, strip_scene(y.vertices(), &boundary)?)?;
    }
    ctx.print(&[
        ("h", json!(m.h)),
        ("binding", json!(m.binding)),
        ("alpha", json!(m.alpha)),
        ("min_det", json!(m.certificate.min_det)),
        ("passes", json!(m.certificate.passes)),
    ]);
    Ok(())
}

fn strip_scene(rod: &[Vec2], boundary: &[Vec2]) -> anyhow::Result<svg::Scene> {
    let mut scene = svg::Scene::new(&[rod, boundary]).ok_or_else(|| anyhow!(RodError::Precondition("empty geometry".into())))?;
    scene.polygon(boundary, "#7aa6d8", "#1f4e89");
    scene.polyline(rod, "#000000", 1.0);
    Ok(scene)
}

fn cmd_check_cn(ctx: &Ctx, a: &CurveArg) -> anyhow::Result<()> {
    check_inputs(&[&a.curve])?;
    let r = ciarlet_necas_1d_check(&read_curve(&a.curve)?);
    let verdict = match r.verdict {
        CnVerdict::Satisfied => "satisfied",
        CnVerdict::Violated => "violated",
    };
    ctx.print(&[("lhs", json!(r.lhs)), ("rhs", json!(r.rhs)), ("verdict", json!(verdict))]);
    Ok(())
}

fn cmd_gamma(ctx: &Ctx, a: &GammaArgs) -> anyhow::Result<()> {
    check_inputs(&[&a.curve, &a.schedule])?;
    let mut outs = vec![a.report.as_path()];
    outs.extend(a.json.iter().map(|p| p.as_path()));
    check_outputs(&outs)?;
    let y = read_curve(&a.curve)?;
    let sched_text = fs::read_to_string(&a.schedule)?;
    let raw: Vec<Value> = serde_json::from_str(&sched_text).map_err(|e| RodError::Parse(e.to_string()))?;
    let mut schedule = Vec::with_capacity(raw.len());
    for r in &raw {
        let k = r["k"].as_u64().ok_or_else(|| RodError::Parse("schedule entry needs an integer k".into()))? as usize;
        schedule.push(StepSpec { k, i: r["i"].as_u64().map(|i| i as usize), h: r["h"].as_f64() });
    }
    let (w, table) = build_table(&a.table)?;
    let report = gamma_experiment(&y, &table, w, &schedule, None)?;
    ctx.write_csv(&a.report, &report.to_csv())?;
    if let Some(p) = &a.json {
        ctx.write_json(p, serde_json::to_value(&report)?)?;
    }
    let gaps: Vec<Value> = report.steps.iter().map(|s| json!(s.gap)).collect();
    ctx.print(&[("J", serde_json::to_value(report.j)?), ("steps", json!(report.steps.len())), ("gaps", json!(gaps))]);
    Ok(())
}

fn cmd_render(ctx: &Ctx, a: &RenderArgs) -> anyhow::Result<()> {
    let input = a.curve.as_ref().or(a.strip.as_ref()).unwrap();
    check_inputs(&[input])?;
    check_outputs(&[&a.out])?;
    let (rod, boundary) = if let Some(p) = &a.strip {
        let v: Value = serde_json::from_str(&fs::read_to_string(p)?).map_err(|e| RodError::Parse(e.to_string()))?;
        let c = PolylineCurve::from_json(&v["curve"].to_string())?;
        let b: Vec<[f64; 2]> = serde_json::from_value(v["boundary"].clone()).map_err(|e| RodError::Parse(e.to_string()))?;
        (c, Some(b.into_iter().map(|q| Vec2::new(q[0], q[1])).collect::<Vec<_>>()))
    } else {
        (read_curve(input)?, None)
    };
    let mut scene = match &boundary {
        Some(b) => strip_scene(rod.vertices(), b)?,
        None => svg::Scene::new(&[rod.vertices()]).ok_or_else(|| anyhow!(RodError::Precondition("empty geometry".into())))?,
    };
    let mut markers = 0;
    if let Some(delta) = a.grid {
        let grid = build_good_arrival_grid(&rod, delta)?;
        scene.grid(&grid);
        if a.crossings {
            let mut cs = crossing_set(&rod, &grid)?;
            let r = neighborhood_radii(&rod, &grid, &mut cs, 2.0).map(|r| r.epsilon).unwrap_or(delta / 20.0);
            for c in &cs {
                scene.circle(c.z, r, "#c0392b");
            }
            markers = cs.len();
        }
    }
    if boundary.is_none() {
        scene.polyline(rod.vertices(), "#000000", 1.0);
        let report = self_intersections(&rod);
        for v in &report.violations {
            scene.circle(v.witness_f64(), 0.01 * (rod.bbox().1 - rod.bbox().0).max(), "#e67e22");
        }
    }
    ctx.write_svg(&a.out, scene)?;
    ctx.print(&[("out", json!(a.out.display().to_string())), ("markers", json!(markers))]);
    Ok(())
}

fn cmd_fixture(ctx: &Ctx, a: &FixtureArgs) -> anyhow::Result<()> {
    if a.list {
        for n in fixtures::NAMES {
            println!("{n}");
        }
        println!("random");
        return Ok(());
    }
    let name = a.name.as_deref().unwrap();
    let c = if name == "random" {
        fixtures::random_injective(&mut fixtures::rng(ctx.cli.seed), a.segments)
    } else {
        fixtures::by_name(name).ok_or_else(|| RodError::Precondition(format!("unknown fixture {name}")))?
    };
    match &a.out {
        Some(p) => {
            check_outputs(&[p])?;
            ctx.write_json(p, curve_value(&c))?;
        }
        None => println!("{}", c.to_json()),
    }
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    if let Ok(t) = std::env::var("RODLAB_THREADS") {
        let n: usize = t.parse().map_err(|_| RodError::Precondition(format!("RODLAB_THREADS={t} is not a count")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let config = serde_json::to_value(&cli.command)?;
    let command = config["name"].as_str().unwrap_or_default().to_string();
    let manifest = json!({
        "tool": "rodlab",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config": config,
        "format": cli.format,
        "seed": cli.seed,
    });
    let ctx = Ctx { manifest, format: cli.format, cli };
    match &cli.command {
        Command::Check(a) => cmd_check(&ctx, a),
        Command::Injectify(a) => cmd_injectify(&ctx, a),
        Command::Relax(a) => cmd_relax(&ctx, a),
        Command::Extrude(a) => cmd_extrude(&ctx, a),
        Command::CheckCn(a) => cmd_check_cn(&ctx, a),
        Command::Gamma(a) => cmd_gamma(&ctx, a),
        Command::Render(a) => cmd_render(&ctx, a),
        Command::Fixture(a) => cmd_fixture(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<RodError>().map_or(1, |r| r.exit_class());
            ExitCode::from(code as u8)
        }
    }
}
