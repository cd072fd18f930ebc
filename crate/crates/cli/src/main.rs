//! `choquard`: groundstates, symmetric saddles, energy tables and extension
//! checks for the fractional Choquard equation.
//!
//! Exit codes: 0 success, 1 configuration error, 2 non-convergence or a
//! partially failed table/check.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use choquard_core::analysis::{self, LevelCache, NodalReport};
use choquard_core::extension::{self, IdentityCheck, TraceCheck, YGrid};
use choquard_core::io::{self, DecayConfig, FieldMeta, GroupConfig, RunConfig};
use choquard_core::params::{critical_exponent, extension_constant, riesz_constant};
use choquard_core::solver::DECAY_WINDOW;
use choquard_core::{CoxeterGroup, Grid, ModelParams, Solution, SolverConfig};

const EXIT_PARTIAL: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "choquard", version, about = "Fractional Choquard solver with Coxeter symmetry")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides output.dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for stochastic initial perturbations (overrides solver.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads. Reductions are serial, so runs are reproducible for
    /// any value; the number is echoed in reports.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Require bit-reproducible output (fixed seed, serial reductions).
    #[arg(long, global = true)]
    deterministic: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Positive groundstate (trivial group).
    Groundstate,
    /// Sign-changing solution in the G-symmetric class.
    Saddle {
        /// Named group, overriding the configuration.
        #[arg(long)]
        group: Option<String>,
    },
    /// Energy table c_G against c*_G.
    Table {
        /// Comma-separated group names, overriding table.groups.
        #[arg(long, value_delimiter = ',')]
        groups: Option<Vec<String>>,
    },
    /// Fit the decay exponent of a stored field.
    Decay {
        /// Stored field (stem, .bin or .json).
        #[arg(long)]
        field: Option<PathBuf>,
        #[arg(long)]
        r_min: Option<f64>,
        #[arg(long)]
        r_max: Option<f64>,
    },
    /// Extension energy identity and trace inequality.
    ExtensionCheck {
        /// Comma-separated orders s, overriding extension.s.
        #[arg(long, value_delimiter = ',')]
        s: Option<Vec<f64>>,
        /// Number of y nodes.
        #[arg(long)]
        j: Option<usize>,
    },
    /// Print A_alpha, k_s and the critical exponent.
    Info(InfoArgs),
}

#[derive(Args, Debug)]
struct InfoArgs {
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
}

#[derive(Serialize)]
struct RunInfo {
    threads: usize,
    deterministic: bool,
    version: &'static str,
}

#[derive(Serialize)]
struct SolveReport<'a> {
    command: &'a str,
    group: String,
    group_order: usize,
    energy: f64,
    nehari_energy: f64,
    residual: f64,
    iterations: usize,
    converged: bool,
    stalled: bool,
    nodal_count: usize,
    nodal: &'a NodalReport,
    sign_on_chamber: bool,
    decay_slope: Option<f64>,
    fibering_argmax: f64,
    elapsed_secs: f64,
    experimental: bool,
    field: Option<PathBuf>,
    run: RunInfo,
    config: &'a RunConfig,
}

struct Ctx {
    cfg: Option<RunConfig>,
    out: PathBuf,
    threads: usize,
    deterministic: bool,
}

impl Ctx {
    fn new(cli: &Cli) -> anyhow::Result<Self> {
        if cli.threads == 0 {
            bail!("--threads must be at least 1");
        }
        let mut cfg = match &cli.config {
            Some(p) => Some(RunConfig::load(p).with_context(|| format!("reading {}", p.display()))?),
            None => None,
        };
        if let Some(c) = cfg.as_mut() {
            if let Some(seed) = cli.seed {
                c.solver.seed = seed;
            }
            if let Some(out) = &cli.out {
                c.output.dir = out.clone();
            }
        }
        let out = cli
            .out
            .clone()
            .or_else(|| cfg.as_ref().map(|c| c.output.dir.clone()))
            .unwrap_or_else(|| PathBuf::from("out"));
        Ok(Self { cfg, out, threads: cli.threads, deterministic: cli.deterministic })
    }

    fn info(&self) -> RunInfo {
        RunInfo { threads: self.threads, deterministic: self.deterministic, version: env!("CARGO_PKG_VERSION") }
    }

    fn config(&self, what: &str) -> anyhow::Result<&RunConfig> {
        self.cfg.as_ref().with_context(|| format!("{what} needs --config"))
    }

    fn out_dir(&self) -> anyhow::Result<&Path> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        Ok(&self.out)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: &Cli) -> anyhow::Result<ExitCode> {
    let ctx = Ctx::new(cli)?;
    match &cli.command {
        Command::Groundstate => cmd_solve(&ctx, "groundstate", None),
        Command::Saddle { group } => cmd_solve(&ctx, "saddle", group.as_deref()),
        Command::Table { groups } => cmd_table(&ctx, groups.as_deref()),
        Command::Decay { field, r_min, r_max } => cmd_decay(&ctx, field.as_deref(), *r_min, *r_max),
        Command::ExtensionCheck { s, j } => cmd_extension(&ctx, s.as_deref(), *j),
        Command::Info(args) => cmd_info(&ctx, args),
    }
}

fn outcome(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_PARTIAL)
    }
}

fn cmd_solve(ctx: &Ctx, command: &str, group_override: Option<&str>) -> anyhow::Result<ExitCode> {
    let mut cfg = ctx.config(command)?.clone();
    if let Some(name) = group_override {
        cfg.group = GroupConfig::named(name);
    }
    let group = cfg.group.resolve()?;
    match (command, group.is_trivial()) {
        ("groundstate", false) => bail!("groundstate runs with the trivial group, got {}", group.name()),
        ("saddle", true) => bail!("saddle needs a nontrivial group"),
        _ => {}
    }
    let sc = cfg.solver_config_for(group)?;
    let solver = choquard_core::Solver::new(sc.clone())?;
    let init = if command == "groundstate" { solver.init_groundstate()? } else { solver.init_saddle(None)? };
    let sol = solver.solve(&init)?;
    let dir = ctx.out_dir()?;
    let stem = if command == "groundstate" {
        "groundstate".to_string()
    } else {
        format!("saddle_{}", sol.metadata.group)
    };
    let field = if cfg.output.wants("bin") {
        let meta = FieldMeta::new(&sc.grid, &sc.params, format!("{command} {}", sol.metadata.group));
        io::write_field(&dir.join(&stem), &sol.u, &meta)?;
        Some(dir.join(&stem))
    } else {
        None
    };
    let report = solve_report(ctx, command, &sol, &solver, &cfg, field)?;
    if cfg.output.wants("json") {
        io::write_json(&dir.join(format!("{stem}_report.json")), &report)?;
    }
    println!(
        "{command} {}: energy {:.10} residual {:.3e} iterations {} nodal {} converged {}",
        report.group, report.energy, report.residual, report.iterations, report.nodal_count, report.converged
    );
    Ok(outcome(sol.converged))
}

fn solve_report<'a>(
    ctx: &Ctx,
    command: &'a str,
    sol: &'a Solution,
    solver: &choquard_core::Solver,
    cfg: &'a RunConfig,
    field: Option<PathBuf>,
) -> anyhow::Result<SolveReport<'a>> {
    let nehari_energy = solver.functional().nehari_energy(&sol.u)?;
    let ray = solver.fibering_ray(&sol.u)?;
    Ok(SolveReport {
        command,
        group: sol.metadata.group.clone(),
        group_order: sol.metadata.group_order,
        energy: sol.energy,
        nehari_energy,
        residual: sol.residual,
        iterations: sol.iterations,
        converged: sol.converged,
        stalled: sol.metadata.stalled,
        nodal_count: sol.nodal_count,
        nodal: &sol.metadata.nodal,
        sign_on_chamber: sol.metadata.sign_on_chamber,
        decay_slope: sol.decay_slope,
        fibering_argmax: ray.argmax,
        elapsed_secs: sol.metadata.elapsed_secs,
        experimental: sol.metadata.experimental,
        field,
        run: ctx.info(),
        config: cfg,
    })
}

#[derive(Serialize)]
struct TableReport<'a> {
    table: &'a analysis::EnergyTable,
    run: RunInfo,
    config: &'a RunConfig,
}

fn cmd_table(ctx: &Ctx, groups: Option<&[String]>) -> anyhow::Result<ExitCode> {
    let mut cfg = ctx.config("table")?.clone();
    if let Some(g) = groups {
        cfg.table = Some(io::TableConfig { groups: g.to_vec() });
    }
    let names = cfg.table.as_ref().map(|t| t.groups.clone()).unwrap_or_default();
    if names.is_empty() {
        bail!("table needs a nonempty group list (table.groups or --groups)");
    }
    let configs = names
        .iter()
        .map(|n| cfg.solver_config_for(CoxeterGroup::named(n)?))
        .collect::<choquard_core::Result<Vec<SolverConfig>>>()?;
    let table = analysis::energy_table_with(&configs, &mut LevelCache::new())?;
    let dir = ctx.out_dir()?;
    fs::write(dir.join("energy_table.csv"), table.to_csv())?;
    if cfg.output.wants("json") {
        io::write_json(&dir.join("energy_table.json"), &TableReport { table: &table, run: ctx.info(), config: &cfg })?;
    }
    print!("{}", table.to_csv());
    for row in table.rows.iter().filter(|r| !r.verified) {
        eprintln!("{}: unverified ({})", row.group, row.status);
    }
    Ok(outcome(table.all_verified()))
}

#[derive(Serialize)]
struct DecayReport {
    field: PathBuf,
    r_min: f64,
    r_max: f64,
    slope: f64,
    /// `-(N + 2s)`.
    target: f64,
    run: RunInfo,
}

fn cmd_decay(ctx: &Ctx, field: Option<&Path>, r_min: Option<f64>, r_max: Option<f64>) -> anyhow::Result<ExitCode> {
    let from_cfg = ctx.cfg.as_ref().and_then(|c| c.decay.clone()).unwrap_or_default();
    let DecayConfig { field: cfg_field, r_min: cmin, r_max: cmax } = from_cfg;
    let path = field
        .map(Path::to_path_buf)
        .or(cfg_field)
        .context("decay needs --field or decay.field in the configuration")?;
    let (u, meta) = io::read_field(&path).with_context(|| format!("reading {}", path.display()))?;
    let (lo, hi) = (r_min.unwrap_or(cmin), r_max.unwrap_or(cmax));
    let slope = analysis::decay_exponent(&u, lo, hi)?;
    let report = DecayReport {
        field: path,
        r_min: lo,
        r_max: hi,
        slope,
        target: -(meta.n as f64 + 2.0 * meta.s),
        run: ctx.info(),
    };
    let dir = ctx.out_dir()?;
    io::write_json(&dir.join("decay_report.json"), &report)?;
    println!("decay slope {slope:.4} over [{lo}, {hi}]·L (target {:.4})", report.target);
    Ok(ExitCode::SUCCESS)
}

/// Relative tolerance on the identity ratio: `s = 1/2` has the closed form.
fn identity_tolerance(s: f64) -> f64 {
    if s == 0.5 {
        0.01
    } else {
        0.02
    }
}

#[derive(Serialize)]
struct ExtensionRow {
    identity: IdentityCheck,
    trace: TraceCheck,
    tolerance: f64,
    ok: bool,
}

fn cmd_extension(ctx: &Ctx, s_list: Option<&[f64]>, j: Option<usize>) -> anyhow::Result<ExitCode> {
    let ext_cfg = ctx.cfg.as_ref().and_then(|c| c.extension.clone());
    let orders = s_list
        .map(<[f64]>::to_vec)
        .or_else(|| ext_cfg.as_ref().map(|e| e.s.clone()))
        .context("extension-check needs --s or extension.s")?;
    if orders.is_empty() {
        bail!("extension-check needs at least one s");
    }
    if let Some(bad) = orders.iter().find(|s| !(**s > 0.0 && **s < 1.0)) {
        bail!("s = {bad} outside the admissible range (0, 1)");
    }
    let j = j.or(ext_cfg.as_ref().map(|e| e.j)).unwrap_or(256);
    let (u, grid) = match ext_cfg.as_ref().and_then(|e| e.field.clone()) {
        Some(path) => {
            let (u, _) = io::read_field(&path).with_context(|| format!("reading {}", path.display()))?;
            let g = u.grid;
            (u, g)
        }
        None => {
            let grid = match &ctx.cfg {
                Some(c) => c.grid()?,
                None => Grid::new(3, 16, 8.0)?,
            };
            let seed = ctx.cfg.as_ref().map_or(0, |c| c.solver.seed);
            (extension::sample_field(grid, seed), grid)
        }
    };
    let ygrid = YGrid::for_grid(&grid, j)?;
    let mut rows = Vec::new();
    let mut csv = String::from("s,J,lhs,rhs,ratio\n");
    for &s in &orders {
        let identity = extension::energy_identity_check(&u, s, &ygrid)?;
        let trace = extension::trace_inequality_check(&extension::harmonic_extend(&u, s, &ygrid)?, s)?;
        let tolerance = identity_tolerance(s);
        let ok = (identity.ratio - 1.0).abs() <= tolerance && trace.satisfied;
        csv.push_str(&format!("{},{},{},{},{}\n", s, j, identity.lhs, identity.rhs, identity.ratio));
        rows.push(ExtensionRow { identity, trace, tolerance, ok });
    }
    let dir = ctx.out_dir()?;
    fs::write(dir.join("extension_check.csv"), &csv)?;
    io::write_json(&dir.join("extension_check.json"), &rows)?;
    print!("{csv}");
    Ok(outcome(rows.iter().all(|r| r.ok)))
}

#[derive(Serialize)]
struct InfoReport {
    params: ModelParams,
    a_alpha: f64,
    k_s: f64,
    critical_exponent: f64,
    admissible: bool,
    decay_target: f64,
    decay_window: (f64, f64),
}

fn cmd_info(ctx: &Ctx, args: &InfoArgs) -> anyhow::Result<ExitCode> {
    let base = ctx.cfg.as_ref().map(|c| c.problem).unwrap_or(ModelParams::new(3, 0.5, 2.0, 2.0));
    let params = ModelParams {
        n: args.n.unwrap_or(base.n),
        s: args.s.unwrap_or(base.s),
        alpha: args.alpha.unwrap_or(base.alpha),
        p: args.p.unwrap_or(base.p),
        experimental: base.experimental,
    };
    let report = InfoReport {
        params,
        a_alpha: riesz_constant(params.n, params.alpha)?,
        k_s: extension_constant(params.s)?,
        critical_exponent: critical_exponent(&params)?,
        admissible: params.is_admissible(),
        decay_target: -(params.n as f64 + 2.0 * params.s),
        decay_window: DECAY_WINDOW,
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(ExitCode::SUCCESS)
}
