use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use geocalc::ops::{discrete_exp_path, discrete_log, parallel_transport};
use geocalc::study::{
    build_model, run_consistency_audit, run_convergence_study, run_rod_morph, ModelName, ModelSpace, StudyConfig,
    DEFAULT_SEED,
};
use geocalc::zoo::RodEnergyKind;
use geocalc::geodesic::write_path_csv;
use geocalc::{coord, Coord, DiscretePath, Error};

const EXIT_CONSISTENCY: u8 = 1;
const EXIT_SOLVER: u8 = 2;
const EXIT_CONFIG: u8 = 3;

#[derive(Parser)]
#[command(name = "geocalc", version, about = "Discrete geodesic calculus experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Discrete geodesic between two points.
    Geodesic(Common),
    /// Discrete logarithm LOG^K of xb at xa.
    Log(Common),
    /// Discrete exponential EXP^K at xa of the increment --zeta.
    Exp {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_coord, allow_hyphen_values = true)]
        zeta: Point,
    },
    /// Parallel transport of w along the discrete geodesic from xa to xb.
    Transport(Common),
    /// Convergence study over K = 2^k.
    Converge(Common),
    /// Consistency audit at random points.
    Consistency {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        /// Rod node count (rod models only).
        #[arg(long)]
        nodes: Option<usize>,
    },
    /// Discrete geodesic between two rod curves stored as CSV.
    RodMorph {
        #[arg(long)]
        curve_a: PathBuf,
        #[arg(long)]
        curve_b: PathBuf,
        #[arg(long = "K", default_value_t = 8)]
        steps: usize,
        #[arg(long, default_value = "simplified", value_parser = parse_kind)]
        kind: RodEnergyKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        tol: Option<f64>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    model: Option<ModelName>,
    #[arg(long, value_parser = parse_coord, allow_hyphen_values = true)]
    xa: Option<Point>,
    #[arg(long, value_parser = parse_coord, allow_hyphen_values = true)]
    xb: Option<Point>,
    /// Vector at xa for `transport` and `converge`; the ladder starts from w / K.
    #[arg(long, value_parser = parse_coord, allow_hyphen_values = true)]
    w: Option<Point>,
    #[arg(long = "K")]
    steps: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON study configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    tol: Option<f64>,
}

/// Comma-separated coordinates, e.g. `-0.5,2`.
#[derive(Debug, Clone)]
struct Point(Vec<f64>);

fn parse_coord(s: &str) -> Result<Point, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}")))
        .collect::<Result<_, _>>()
        .map(Point)
}

fn parse_kind(s: &str) -> Result<RodEnergyKind, String> {
    match s {
        "simplified" => Ok(RodEnergyKind::Simplified),
        "full" => Ok(RodEnergyKind::Full),
        _ => Err(format!("unknown rod energy '{s}' (expected simplified or full)")),
    }
}

/// Merges the config file, the flags and the defaults.
fn resolve(c: &Common) -> anyhow::Result<StudyConfig> {
    let mut cfg = match &c.config {
        Some(p) => StudyConfig::load(p)
            .map_err(|e| Error::InvalidInput(format!("config {}: {e}", p.display())))?,
        None => StudyConfig::default(),
    };
    if let Some(m) = c.model {
        cfg.model = m;
    }
    if let Some(v) = &c.xa {
        cfg.xa = v.0.clone();
    }
    if let Some(v) = &c.xb {
        cfg.xb = v.0.clone();
    }
    match &c.w {
        Some(w) => cfg.w = w.0.clone(),
        // only `transport` and `converge` read w
        None if cfg.w.len() != cfg.xa.len() => cfg.w = vec![0.0; cfg.xa.len()],
        None => {}
    }
    if let Some(out) = &c.out {
        cfg.output_dir = out.clone();
    }
    if let Some(tol) = c.tol {
        cfg.solver.newton_tol = tol;
        cfg.op_config.inner.newton_tol = tol;
    }
    Ok(cfg)
}

fn steps(c: &Common) -> usize {
    c.steps.unwrap_or(16)
}

fn write_points(dir: &Path, name: &str, points: &[Coord]) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)?;
    let path = DiscretePath::new(points.to_vec())?;
    write_path_csv(&path, File::create(dir.join(name))?)?;
    Ok(())
}

fn print(v: serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(&v).expect("json values serialize"));
}

fn setup(c: &Common) -> anyhow::Result<(StudyConfig, ModelSpace)> {
    let cfg = resolve(c)?;
    let model = cfg.validate()?;
    Ok((cfg, model))
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Geodesic(c) => {
            let (cfg, model) = setup(&c)?;
            let g = model
                .space()
                .geodesic(&coord(&cfg.xa), &coord(&cfg.xb), steps(&c), &cfg.solver)?;
            if c.out.is_some() {
                write_points(&cfg.output_dir, "geodesic.csv", g.path.points())?;
            }
            print(json!({
                "model": cfg.model,
                "K": g.path.steps(),
                "energy": g.energy,
                "length": g.length,
                "residual": g.residual,
                "iterations": g.iterations,
                "converged": g.converged,
                "multipliers": g.multipliers,
            }));
            Ok(if g.converged { 0 } else { EXIT_SOLVER })
        }
        Command::Log(c) => {
            let (cfg, model) = setup(&c)?;
            let k = steps(&c);
            let v = discrete_log(&model.space(), &coord(&cfg.xa), &coord(&cfg.xb), k, &cfg.op_config)?;
            print(json!({
                "K": k,
                "log": v.as_slice(),
                "scaled": (&v * k as f64).as_slice(),
            }));
            Ok(0)
        }
        Command::Exp { common: c, zeta } => {
            let (cfg, model) = setup(&c)?;
            let k = steps(&c);
            let pts = discrete_exp_path(&model.space(), &coord(&cfg.xa), &coord(&zeta.0), k, &cfg.op_config)?;
            if c.out.is_some() {
                write_points(&cfg.output_dir, "exp.csv", &pts)?;
            }
            print(json!({ "K": k, "exp": pts.last().map(|p| p.as_slice()) }));
            Ok(0)
        }
        Command::Transport(c) => {
            let (cfg, model) = setup(&c)?;
            let k = steps(&c);
            let space = model.space();
            let (xa, xb) = (coord(&cfg.xa), coord(&cfg.xb));
            let g = space.geodesic(&xa, &xb, k, &cfg.solver)?.into_converged()?;
            let zeta0 = model.project(&(&xa + coord(&cfg.w) / k as f64))? - &xa;
            let (zeta, trace) = parallel_transport(&space, &g.path, &zeta0, &cfg.op_config)?;
            if c.out.is_some() {
                std::fs::create_dir_all(&cfg.output_dir)?;
                trace.write_csv(File::create(cfg.output_dir.join("transport.csv"))?)?;
            }
            print(json!({
                "K": k,
                "zeta": zeta.as_slice(),
                "scaled": (&zeta * k as f64).as_slice(),
            }));
            Ok(0)
        }
        Command::Converge(c) => {
            let cfg = resolve(&c)?;
            let rep = run_convergence_study(&cfg)?;
            rep.write_to_dir(&cfg.output_dir)?;
            println!("# {}", rep.reference);
            println!("{:>6} {:>12} {:>12} {:>12} {:>12}", "K", "err_geo", "err_log", "err_exp", "err_pt");
            for r in &rep.rows {
                println!(
                    "{:>6} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e}",
                    r.k, r.err_geo, r.err_log, r.err_exp, r.err_pt
                );
            }
            println!("orders: {}", serde_json::to_string(&rep.orders)?);
            Ok(0)
        }
        Command::Consistency { common: c, samples, nodes } => {
            let name = match (c.model, &c.config) {
                (Some(m), _) => m,
                (None, Some(_)) => resolve(&c)?.model,
                (None, None) => return Err(Error::InvalidInput("consistency needs --model".into()).into()),
            };
            let dim = nodes.map(|n| 2 * n).filter(|_| name.is_rod());
            let tol = match c.tol {
                Some(t) => t,
                None if build_model(name, dim)?.energy().derivatives_analytic() => 1e-8,
                None => 1e-4,
            };
            let rep = run_consistency_audit(name, dim, samples, tol, c.seed)?;
            if let Some(out) = &c.out {
                std::fs::create_dir_all(out)?;
                serde_json::to_writer_pretty(File::create(out.join("consistency.json"))?, &rep)?;
            }
            println!(
                "{}: {} of {} samples failed at tol {:e} (max residual {:e})",
                rep.model, rep.failures, rep.samples, rep.tol, rep.max_residual
            );
            Ok(if rep.passed() { 0 } else { EXIT_CONSISTENCY })
        }
        Command::RodMorph {
            curve_a,
            curve_b,
            steps,
            kind,
            out,
            tol,
        } => {
            let mut solver = geocalc::SolverConfig::default();
            if let Some(t) = tol {
                solver.newton_tol = t;
            }
            let m = run_rod_morph(&curve_a, &curve_b, steps, kind, &out, &solver)?;
            print(json!({
                "K": steps,
                "energy": m.result.energy,
                "residual": m.result.residual,
                "iterations": m.result.iterations,
                "segment_energies": m.segment_energies,
            }));
            Ok(0)
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_solver_failure() => EXIT_SOLVER,
        Some(Error::Io(_)) => 1,
        Some(_) => EXIT_CONFIG,
        None => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
