//! `focal`: scans, verification suites and figures from a scenario file.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use finsler_focal::cut::DistanceOracle;
use finsler_focal::focal::{detect_focal_times, focal_scan, focal_time, LocalForm};
use finsler_focal::jacobi::JacobiFrame;
use finsler_focal::plot::{points_from_csv, Figure};
use finsler_focal::report::{cut_csv, focal_csv, lambda_csv, Summary};
use finsler_focal::scenario::{scenario_hash, Scenario};
use finsler_focal::submanifold::NormalBundle;
use finsler_focal::verify::{grid_spacing, run_suite, Status, Suite};
use finsler_focal::{cut, Error};

/// Log level variable (`error`, `warn`, `info`, `debug`, `trace`).
const LOG_ENV: &str = "FOCAL_LOG";

/// Coordinate offset of the point pairs probed for `d(p, q) ≠ d(q, p)`.
const ASYMMETRY_STEP: f64 = 0.5;

#[derive(Parser)]
#[command(
    name = "focal",
    version,
    about = "Focal and cut loci of submanifolds in Finsler manifolds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario file (TOML or JSON).
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: available cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Override `scan.t_max`.
    #[arg(long)]
    tmax: Option<f64>,
    /// Override `tolerances.time`.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Focal times, multiplicities and types along every ray.
    FocalScan(Common),
    /// Cut times and their reasons along every ray.
    CutScan(Common),
    /// Run a verification suite.
    Verify {
        #[arg(value_parser = suite_names())]
        suite: String,
        #[command(flatten)]
        common: Common,
    },
    /// Draw N, the focal and cut loci and sample geodesics from the tables in `--out`.
    Plot(Common),
}

fn suite_names() -> clap::builder::PossibleValuesParser {
    clap::builder::PossibleValuesParser::new(Suite::ALL.map(|s| s.name()))
}

enum Failure {
    Schema(String),
    Numeric(String),
    Verify,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_schema() {
            Failure::Schema(e.to_string())
        } else {
            Failure::Numeric(e.to_string())
        }
    }
}

fn io(path: &Path, e: std::io::Error) -> Failure {
    Failure::Numeric(format!("{}: {e}", path.display()))
}

struct Context {
    scenario: Scenario,
    hash: String,
    out: PathBuf,
}

impl Context {
    fn load(c: &Common) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(&c.scenario)
            .map_err(|e| Failure::Schema(format!("{}: {e}", c.scenario.display())))?;
        let mut scenario = Scenario::parse(&text)?;
        if let Some(t) = c.tmax {
            scenario.scan.t_max = t;
        }
        if let Some(t) = c.tol {
            scenario.tolerances.time = t;
        }
        scenario.validate()?;
        if let Some(n) = c.threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global()
                .map_err(|e| Failure::Numeric(e.to_string()))?;
        }
        std::fs::create_dir_all(&c.out).map_err(|e| io(&c.out, e))?;
        Ok(Context {
            scenario,
            hash: scenario_hash(&text),
            out: c.out.clone(),
        })
    }

    fn write(&self, name: &str, body: &str, summary: &mut Summary) -> Result<(), Failure> {
        let p = self.out.join(name);
        std::fs::write(&p, body).map_err(|e| io(&p, e))?;
        summary.files.push(name.into());
        Ok(())
    }

    fn finish(&self, name: &str, summary: &Summary) -> Result<(), Failure> {
        let p = self.out.join(name);
        std::fs::write(&p, summary.to_json()).map_err(|e| io(&p, e))?;
        log::info!("wrote {}", p.display());
        Ok(())
    }
}

fn focal_scan_cmd(c: &Common) -> Result<(), Failure> {
    let ctx = Context::load(c)?;
    let sc = &ctx.scenario;
    let b = sc.bundle()?;
    let rays = sc.rays()?;
    log::info!("focal scan of {} rays up to t = {}", rays.len(), sc.scan.t_max);
    let scan = focal_scan(&b, &rays, &sc.focal_settings())?;
    let mut s = Summary::new("focal-scan", sc, &ctx.hash);
    let d = b.system().coord_dim();
    ctx.write("focal.csv", &focal_csv(&scan, b.chart_dim(), d)?, &mut s)?;
    ctx.write("lambdas.csv", &lambda_csv(&scan, b.chart_dim())?, &mut s)?;
    let records: Vec<_> = scan.rays.iter().flat_map(|r| &r.records).collect();
    let count = |f: LocalForm| records.iter().filter(|r| r.localform == f).count();
    s.set("rays", rays.len());
    s.set("max_j", sc.scan.max_j);
    s.set("focal_records", records.len());
    s.set("regular", records.iter().filter(|r| r.regular).count());
    s.set("t1", count(LocalForm::T1));
    s.set("t2", count(LocalForm::T2));
    s.set("t3", count(LocalForm::T3));
    for j in 0..sc.scan.max_j {
        let finite = scan.rays.iter().filter(|r| r.lambdas[j].is_finite()).count();
        s.set(&format!("lambda_{}_finite", j + 1), finite);
    }
    ctx.finish("focal_summary.json", &s)
}

fn cut_scan_cmd(c: &Common) -> Result<(), Failure> {
    let ctx = Context::load(c)?;
    let sc = &ctx.scenario;
    let b = sc.bundle()?;
    let rays = sc.rays()?;
    log::info!("cut scan of {} rays", rays.len());
    let oracle = DistanceOracle::new(&b, sc.cut_settings())?;
    let cuts = oracle.cut_scan(&rays)?;
    let mut s = Summary::new("cut-scan", sc, &ctx.hash);
    ctx.write(
        "cut.csv",
        &cut_csv(&cuts, b.chart_dim(), b.system().coord_dim())?,
        &mut s,
    )?;
    s.set("rays", rays.len());
    s.set("separating", cuts.iter().filter(|r| r.separating).count());
    s.set("focal", cuts.iter().filter(|r| r.focal).count());
    s.set("horizon", cuts.iter().filter(|r| r.horizon).count());
    let excess = cut::rho_le_lambda_report(&cuts);
    s.set(
        "max_rho_minus_lambda1",
        if excess.is_finite() { Some(excess) } else { None },
    );
    let eps = 2.0 * grid_spacing(&b, &rays);
    s.set("closure_eps", if eps.is_finite() { Some(eps) } else { None });
    s.set("closure_fraction", cut::closure_check(&b, &cuts, eps));
    if !b.system().metric().is_riemannian() {
        if let Some(w) = cut::asymmetry_witness(b.system(), &asymmetry_pairs(&b, &rays)?, sc.cut_settings())? {
            let gap = w.gap();
            s.set("asymmetry", &w);
            s.set("asymmetry_gap", gap);
        }
    }
    ctx.finish("cut_summary.json", &s)
}

type PointPair = (Vec<f64>, Vec<f64>);

/// A point of N paired with its shifts by `±ASYMMETRY_STEP` along each axis.
fn asymmetry_pairs(b: &NormalBundle, rays: &[Vec<f64>]) -> Result<Vec<PointPair>, Failure> {
    let Some(u) = rays.first() else {
        return Ok(Vec::new());
    };
    let p = b.unit_normal(u)?.base;
    let mut out = Vec::new();
    for i in 0..p.len() {
        for s in [ASYMMETRY_STEP, -ASYMMETRY_STEP] {
            let mut q = p.clone();
            q[i] += s;
            out.push((p.clone(), q));
        }
    }
    Ok(out)
}

fn verify_cmd(name: &str, c: &Common) -> Result<(), Failure> {
    let ctx = Context::load(c)?;
    let suite = Suite::parse(name)?;
    let rep = run_suite(&ctx.scenario, suite)?;
    let mut s = Summary::new(&format!("verify {name}"), &ctx.scenario, &ctx.hash);
    let stem = format!("verify_{}", name.replace('-', "_"));
    if !rep.rows.is_empty() {
        ctx.write(&format!("{stem}.csv"), &rep.rows_csv()?, &mut s)?;
    }
    s.status = match rep.status {
        Status::Pass => "pass",
        Status::Fail => "fail",
        Status::Report => "report",
    }
    .into();
    for ch in &rep.checks {
        let mark = if ch.pass { "ok  " } else { "FAIL" };
        println!(
            "{mark} {:<28} {:>14.6e}  (threshold {:e})",
            ch.name, ch.value, ch.threshold
        );
    }
    println!("{}: {}", name, s.status);
    s.set("checks", &rep.checks);
    ctx.finish(&format!("{stem}.json"), &s)?;
    if rep.passed() {
        Ok(())
    } else {
        Err(Failure::Verify)
    }
}

fn plot_cmd(c: &Common) -> Result<(), Failure> {
    let ctx = Context::load(c)?;
    let sc = &ctx.scenario;
    let b = sc.bundle()?;
    let t_max = sc.scan.t_max;
    let tol = sc.tolerances.time;
    let stop = |u: &[f64]| -> f64 {
        JacobiFrame::new(&b, u, t_max)
            .and_then(|f| detect_focal_times(&f, t_max, tol))
            .map(|z| focal_time(&z, 1))
            .unwrap_or(t_max)
    };
    let mut fig = Figure::from_bundle(&b, &sc.name, 24, t_max, stop)?;
    let read = |name: &str| -> Result<Vec<[f64; 2]>, Failure> {
        let p = ctx.out.join(name);
        match std::fs::read_to_string(&p) {
            Ok(t) => Ok(points_from_csv(&t)?),
            Err(_) => Ok(Vec::new()),
        }
    };
    fig.focal = read("focal.csv")?;
    fig.cut = read("cut.csv")?;
    let p = ctx.out.join("plot.svg");
    std::fs::write(&p, fig.to_svg()).map_err(|e| io(&p, e))?;
    log::info!("wrote {}", p.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::FocalScan(c) => focal_scan_cmd(c),
        Command::CutScan(c) => cut_scan_cmd(c),
        Command::Verify { suite, common } => verify_cmd(suite, common),
        Command::Plot(c) => plot_cmd(c),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verify) => ExitCode::from(1),
        Err(Failure::Schema(m)) => {
            eprintln!("error: invalid scenario: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numeric(m)) => {
            eprintln!("error: numerical failure: {m}");
            ExitCode::from(3)
        }
    }
}
