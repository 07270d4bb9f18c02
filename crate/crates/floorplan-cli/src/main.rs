use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use floorplan::bookshelf::{load_instance, project_pads_to_boundary, soften_all, write_pl};
use floorplan::field::{default_grid_size, FieldGrid};
use floorplan::global::{initial_floorplan, run_global, GradMode, SolverConfig, TraceRow};
use floorplan::legalize::legalize;
use floorplan::model::{outline_for, ModuleState};
use floorplan::svg::render_svg;
use floorplan::wirelength::hpwl;
use floorplan::Floorplan;

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum GradArg {
    Fast,
    Exact,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum PadsArg {
    /// Keep terminal coordinates from the .pl file.
    Asis,
    /// Move every terminal to the nearest point on the computed outline.
    Boundary,
}

/// Fixed-outline floorplanner for bookshelf benchmarks.
///
/// Reads .blocks/.nets/.pl, spreads the modules with a density-driven
/// global pass, legalizes with constraint graphs, and writes the placed
/// result plus a metrics report into the output directory.
#[derive(Parser, Debug)]
#[command(name = "floorplan", about, long_about = None)]
struct Args {
    /// Path to the .blocks file
    #[arg(long)]
    blocks: Option<PathBuf>,
    /// Path to the .nets file
    #[arg(long)]
    nets: Option<PathBuf>,
    /// Path to the .pl file with terminal positions
    #[arg(long)]
    pl: Option<PathBuf>,
    /// key=value config file; command-line flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    /// Whitespace fraction added on top of the total module area
    #[arg(long, allow_negative_numbers = true)]
    whitespace: Option<f64>,
    /// Outline aspect ratio height/width
    #[arg(long)]
    aspect: Option<f64>,
    /// Bins per grid axis (power of two); omit to derive from the module count
    #[arg(long)]
    grid: Option<usize>,
    /// Iteration cap for the global pass
    #[arg(long)]
    kmax: Option<usize>,
    /// Overlap-rate fraction that ends the global pass early
    #[arg(long)]
    omin: Option<f64>,
    /// Random seed for the initial placement jitter
    #[arg(long)]
    seed: Option<u64>,
    /// Density-gradient evaluation path
    #[arg(long, value_enum)]
    grad: Option<GradArg>,
    /// Terminal handling
    #[arg(long, value_enum)]
    pads: Option<PadsArg>,
    /// Treat every block as soft within the aspect-ratio bounds
    #[arg(long)]
    soften: bool,
    /// Lower aspect-ratio bound for soft blocks
    #[arg(long)]
    ar_lo: Option<f64>,
    /// Upper aspect-ratio bound for soft blocks
    #[arg(long)]
    ar_hi: Option<f64>,
    /// Legalization round limit
    #[arg(long)]
    rounds: Option<usize>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Render the final layout as layout.svg
    #[arg(long)]
    svg: bool,
    /// Dump the post-global density and potential grids as CSV
    #[arg(long)]
    dump_grids: bool,
}

#[derive(Debug, Clone)]
struct RunConfig {
    blocks: PathBuf,
    nets: PathBuf,
    pl: Option<PathBuf>,
    whitespace: f64,
    aspect: f64,
    grid: Option<usize>,
    kmax: usize,
    omin: f64,
    seed: u64,
    grad: GradArg,
    pads: PadsArg,
    soften: bool,
    ar_lo: f64,
    ar_hi: f64,
    rounds: usize,
    out: PathBuf,
    svg: bool,
    dump_grids: bool,
}

const CONFIG_KEYS: &[&str] = &[
    "blocks",
    "nets",
    "pl",
    "whitespace",
    "aspect",
    "grid",
    "kmax",
    "omin",
    "seed",
    "grad",
    "pads",
    "soften",
    "ar_lo",
    "ar_hi",
    "rounds",
    "out",
    "svg",
    "dump_grids",
];

fn parse_config_file(text: &str) -> Result<HashMap<String, String>, String> {
    let mut map = HashMap::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key=value", ln + 1))?;
        let key = key.trim();
        let value = value.trim();
        if !CONFIG_KEYS.contains(&key) {
            return Err(format!("config line {}: unknown key {key}", ln + 1));
        }
        if map.insert(key.to_string(), value.to_string()).is_some() {
            return Err(format!("config line {}: duplicate key {key}", ln + 1));
        }
    }
    Ok(map)
}

fn file_num<T: FromStr>(map: &HashMap<String, String>, key: &str) -> Result<Option<T>, String> {
    match map.get(key) {
        None => Ok(None),
        Some(v) => v
            .parse::<T>()
            .map(Some)
            .map_err(|_| format!("config key {key}: cannot parse {v:?}")),
    }
}

fn file_bool(map: &HashMap<String, String>, key: &str) -> Result<bool, String> {
    match map.get(key).map(String::as_str) {
        None => Ok(false),
        Some("true") | Some("1") => Ok(true),
        Some("false") | Some("0") => Ok(false),
        Some(v) => Err(format!("config key {key}: expected a boolean, got {v:?}")),
    }
}

fn resolve(args: &Args) -> Result<RunConfig, String> {
    let map = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
            parse_config_file(&text)?
        }
        None => HashMap::new(),
    };

    let path_of = |key: &str| map.get(key).map(PathBuf::from);
    let blocks = args
        .blocks
        .clone()
        .or_else(|| path_of("blocks"))
        .ok_or("missing --blocks")?;
    let nets = args
        .nets
        .clone()
        .or_else(|| path_of("nets"))
        .ok_or("missing --nets")?;
    let pl = args.pl.clone().or_else(|| path_of("pl"));

    let grad = match (args.grad, map.get("grad").map(String::as_str)) {
        (Some(g), _) => g,
        (None, Some("fast")) => GradArg::Fast,
        (None, Some("exact")) => GradArg::Exact,
        (None, Some(v)) => return Err(format!("config key grad: expected fast or exact, got {v:?}")),
        (None, None) => GradArg::Fast,
    };
    let pads = match (args.pads, map.get("pads").map(String::as_str)) {
        (Some(p), _) => p,
        (None, Some("asis")) => PadsArg::Asis,
        (None, Some("boundary")) => PadsArg::Boundary,
        (None, Some(v)) => {
            return Err(format!("config key pads: expected asis or boundary, got {v:?}"))
        }
        (None, None) => PadsArg::Asis,
    };

    let grid = match args.grid.or(file_num::<usize>(&map, "grid")?) {
        Some(0) | None => None,
        Some(k) => Some(k),
    };

    let cfg = RunConfig {
        blocks,
        nets,
        pl,
        whitespace: args.whitespace.or(file_num(&map, "whitespace")?).unwrap_or(0.15),
        aspect: args.aspect.or(file_num(&map, "aspect")?).unwrap_or(1.0),
        grid,
        kmax: args.kmax.or(file_num(&map, "kmax")?).unwrap_or(1200),
        omin: args.omin.or(file_num(&map, "omin")?).unwrap_or(0.01),
        seed: args.seed.or(file_num(&map, "seed")?).unwrap_or(1),
        grad,
        pads,
        soften: args.soften || file_bool(&map, "soften")?,
        ar_lo: args.ar_lo.or(file_num(&map, "ar_lo")?).unwrap_or(1.0 / 3.0),
        ar_hi: args.ar_hi.or(file_num(&map, "ar_hi")?).unwrap_or(3.0),
        rounds: args.rounds.or(file_num(&map, "rounds")?).unwrap_or(10),
        out: args.out.clone().or_else(|| path_of("out")).unwrap_or_else(|| PathBuf::from("out")),
        svg: args.svg || file_bool(&map, "svg")?,
        dump_grids: args.dump_grids || file_bool(&map, "dump_grids")?,
    };

    if cfg.whitespace < 0.0 {
        return Err("whitespace must be nonnegative".into());
    }
    if cfg.aspect <= 0.0 {
        return Err("aspect must be positive".into());
    }
    if cfg.omin < 0.0 {
        return Err("omin must be nonnegative".into());
    }
    if cfg.rounds == 0 {
        return Err("rounds must be at least 1".into());
    }
    if cfg.soften && !(cfg.ar_lo > 0.0 && cfg.ar_lo <= cfg.ar_hi) {
        return Err("aspect-ratio bounds must satisfy 0 < ar_lo <= ar_hi".into());
    }
    Ok(cfg)
}

/// Splits wall time over the three phases as percentages. Nonzero totals
/// produce three nonnegative values summing to 100; an all-zero run reports
/// zeros instead of dividing by nothing.
fn report_phase_times(secs: [f64; 3]) -> [f64; 3] {
    let total: f64 = secs.iter().sum();
    if total <= 0.0 {
        return [0.0; 3];
    }
    [
        100.0 * secs[0] / total,
        100.0 * secs[1] / total,
        100.0 * secs[2] / total,
    ]
}

fn format_trace(trace: &[TraceRow]) -> String {
    let mut out = String::from("k,hpwl,overlap_pct,lambda,step\n");
    for row in trace {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{:.6e},{:.6e}",
            row.k, row.hpwl, row.overlap_pct, row.lambda, row.step
        );
    }
    out
}

fn grid_csv(values: &[f64], k: usize) -> String {
    let mut out = String::new();
    for i in 0..k {
        let row: Vec<String> = (0..k).map(|j| format!("{:.9e}", values[i * k + j])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<(), String> {
    let path = dir.join(name);
    fs::write(&path, content).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn run(cfg: &RunConfig) -> Result<bool, String> {
    let read = |p: &Path| {
        fs::read_to_string(p).map_err(|e| format!("cannot read {}: {e}", p.display()))
    };
    let blocks_text = read(&cfg.blocks)?;
    let nets_text = read(&cfg.nets)?;
    let pl_text = match &cfg.pl {
        Some(p) => Some(read(p)?),
        None => None,
    };

    let mut inst = load_instance(&blocks_text, &nets_text, pl_text.as_deref())
        .map_err(|e| format!("parse error: {e}"))?;
    if cfg.soften {
        soften_all(&mut inst.specs, cfg.ar_lo, cfg.ar_hi);
    }

    let total_area: f64 = inst.specs.iter().map(|s| s.area).sum();
    let outline = outline_for(total_area, cfg.whitespace, cfg.aspect);
    if total_area > outline.w * outline.h * (1.0 + 1e-9) {
        return Err(format!(
            "infeasible: total module area {total_area} exceeds the {} x {} outline",
            outline.w, outline.h
        ));
    }
    if cfg.pads == PadsArg::Boundary {
        project_pads_to_boundary(&mut inst.netlist, &outline);
    }

    let states: Vec<ModuleState> = inst
        .specs
        .iter()
        .map(|s| ModuleState { x: 0.0, y: 0.0, w: s.w0 })
        .collect();
    let mut fp = Floorplan {
        outline,
        specs: inst.specs,
        states,
        netlist: inst.netlist,
    };
    let n = fp.len();
    let k_grid = cfg.grid.unwrap_or_else(|| default_grid_size(n));

    let solver = SolverConfig {
        k_max: cfg.kmax,
        o_min: cfg.omin,
        grid: cfg.grid,
        seed: cfg.seed,
        grad: match cfg.grad {
            GradArg::Fast => GradMode::Fast,
            GradArg::Exact => GradMode::Exact,
        },
        ..SolverConfig::default()
    };

    let t0 = Instant::now();
    initial_floorplan(&mut fp, cfg.seed).map_err(|e| format!("initial placement: {e}"))?;
    let t_initial = t0.elapsed().as_secs_f64();
    let hpwl_initial = hpwl(&fp);

    let t1 = Instant::now();
    let global = run_global(&mut fp, &solver).map_err(|e| format!("global pass: {e}"))?;
    let t_global = t1.elapsed().as_secs_f64();

    let grids = if cfg.dump_grids {
        Some(FieldGrid::build(&fp, k_grid).map_err(|e| format!("grid dump: {e}"))?)
    } else {
        None
    };

    let t2 = Instant::now();
    let (legal, rounds_used, hpwl_after, legalize_note) = match legalize(&mut fp, cfg.rounds) {
        Ok(report) => (report.legal, report.rounds, report.hpwl_after, None),
        Err(e) => (false, 0, hpwl(&fp), Some(e.to_string())),
    };
    let t_legalize = t2.elapsed().as_secs_f64();

    fs::create_dir_all(&cfg.out)
        .map_err(|e| format!("cannot create {}: {e}", cfg.out.display()))?;
    write_file(&cfg.out, "result.pl", &write_pl(&fp))?;
    write_file(&cfg.out, "trace.csv", &format_trace(&global.trace))?;
    if let Some(g) = &grids {
        write_file(&cfg.out, "density.csv", &grid_csv(&g.rho, g.k))?;
        write_file(&cfg.out, "potential.csv", &grid_csv(&g.psi, g.k))?;
    }
    if cfg.svg {
        write_file(&cfg.out, "layout.svg", &render_svg(&fp, n <= 50))?;
    }

    let pct = report_phase_times([t_initial, t_global, t_legalize]);
    let change_pct = if global.hpwl > 0.0 {
        100.0 * (hpwl_after - global.hpwl) / global.hpwl
    } else {
        0.0
    };
    let mut metrics = String::new();
    let _ = writeln!(metrics, "modules: {n}");
    let _ = writeln!(metrics, "nets: {}", fp.netlist.nets.len());
    let _ = writeln!(metrics, "pads: {}", fp.netlist.pads.len());
    let _ = writeln!(metrics, "outline_width: {:.6}", fp.outline.w);
    let _ = writeln!(metrics, "outline_height: {:.6}", fp.outline.h);
    let _ = writeln!(metrics, "grid: {k_grid}");
    let _ = writeln!(metrics, "seed: {}", cfg.seed);
    let _ = writeln!(metrics, "hpwl_initial: {hpwl_initial:.6}");
    let _ = writeln!(metrics, "hpwl_global: {:.6}", global.hpwl);
    let _ = writeln!(metrics, "overlap_rate_global_pct: {:.4}", global.overlap_pct);
    let _ = writeln!(metrics, "global_converged: {}", global.converged);
    let _ = writeln!(metrics, "global_iterations: {}", global.trace.len());
    let _ = writeln!(metrics, "hpwl_legal: {hpwl_after:.6}");
    let _ = writeln!(metrics, "hpwl_change_pct: {change_pct:+.4}");
    let _ = writeln!(metrics, "legal: {legal}");
    let _ = writeln!(metrics, "legalize_rounds: {rounds_used}");
    if let Some(note) = &legalize_note {
        let _ = writeln!(metrics, "legalize_error: {note}");
    }
    let _ = writeln!(metrics, "time_initial_s: {t_initial:.3}");
    let _ = writeln!(metrics, "time_global_s: {t_global:.3}");
    let _ = writeln!(metrics, "time_legalize_s: {t_legalize:.3}");
    let _ = writeln!(metrics, "phase_initial_pct: {:.3}", pct[0]);
    let _ = writeln!(metrics, "phase_global_pct: {:.3}", pct[1]);
    let _ = writeln!(metrics, "phase_legalize_pct: {:.3}", pct[2]);
    write_file(&cfg.out, "metrics.txt", &metrics)?;

    print!("{metrics}");
    Ok(legal)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cfg = match resolve(&args) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match run(&cfg) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: legalization failed; best-effort layout written");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
