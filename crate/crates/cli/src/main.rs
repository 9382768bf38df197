use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use kinfrac_core::auxiliary::{SpatialProfile, TestFunction, TimeEnvelope};
use kinfrac_core::config::{Format, RunConfig};
use kinfrac_core::harness::{self, Verdict};
use kinfrac_core::io;
use kinfrac_core::kinetic_fv::{run_kinetic_det, Scheme};
use kinfrac_core::kinetic_mc::{advance, estimate_density, init_ensemble};
use kinfrac_core::nonlocal::{assemble, eta, solve_macro, symbol_constant, fourier_reference};
use kinfrac_core::{Error, Grid1d};

#[derive(Parser)]
#[command(name = "kinfrac", version, about = "Kinetic-to-fractional diffusion solvers and checks")]
struct Cli {
    /// Run configuration in `section.key = value` format.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Random seed (overrides `experiment.seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the derived constants of the model as JSON.
    ModelInfo,
    /// Particle simulation of the kinetic equation.
    KineticMc(McArgs),
    /// Deterministic finite-volume solve of the kinetic equation.
    KineticDet(DetArgs),
    /// L² gaps and pointwise bounds of the auxiliary corrector.
    ChiCheck(ChiArgs),
    /// Dump the kernel η(x_i, x_j) as a CSV matrix.
    Kernel(KernelArgs),
    /// Solve the nonlocal limit equation.
    MacroSolve(MacroArgs),
    /// Compare the kinetic operator limit with the nonlocal operator.
    LimitCheck(LimitArgs),
    /// ε-sweep of kinetic solves against the limit equation.
    Sweep,
    /// Coercivity, kernel, corrector and a-priori checks.
    Invariants(InvariantArgs),
}

#[derive(Args)]
struct McArgs {
    #[arg(long)]
    eps: Option<f64>,
    /// Number of particles.
    #[arg(long, short = 'n')]
    particles: Option<usize>,
    #[arg(long)]
    t_final: Option<f64>,
    /// Histogram bins.
    #[arg(long)]
    nx: Option<usize>,
    /// Linear (cloud-in-cell) deposition instead of a plain histogram.
    #[arg(long)]
    smooth: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Upwind,
    Muscl,
}

#[derive(Args)]
struct DetArgs {
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    t_final: Option<f64>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    nv: Option<usize>,
    /// Transport scheme: first-order upwind or second-order MUSCL.
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PhiArg {
    Gaussian,
    PlaneWave,
    Constant,
}

#[derive(Args)]
struct ChiArgs {
    /// Comma-separated ε values (default: `experiment.eps_list`).
    #[arg(long, value_delimiter = ',')]
    eps: Vec<f64>,
    #[arg(long, value_enum)]
    phi: Option<PhiArg>,
    /// Random samples of the constant-φ identity.
    #[arg(long, default_value_t = 1000)]
    samples: usize,
}

#[derive(Args)]
struct KernelArgs {
    #[arg(long)]
    nx: Option<usize>,
    /// Periodic image `m`: entries are `η(x_i, x_j + mL)`.
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    image: i64,
}

#[derive(Args)]
struct MacroArgs {
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    t_final: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// Periodic images summed on each side.
    #[arg(long)]
    images: Option<usize>,
}

#[derive(Args)]
struct LimitArgs {
    #[arg(long, value_delimiter = ',')]
    eps: Vec<f64>,
    /// Sample time.
    #[arg(long, default_value_t = 0.25)]
    t: f64,
    /// Comma-separated sample points (default: `experiment.sample_points`).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x: Vec<f64>,
}

#[derive(Args)]
struct InvariantArgs {
    /// Skip the kinetic runs behind the a-priori and corrector-term checks.
    #[arg(long)]
    fast: bool,
}

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
    quiet: bool,
}

impl Ctx {
    fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            // a closed pipe (e.g. `| head`) is not an error
            let _ = writeln!(std::io::stdout().lock(), "{}", line.as_ref());
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn manifest<T: Serialize>(&self, name: &str, kind: &str, result: &T) -> Result<()> {
        if self.cfg.wants(Format::Json) {
            io::write_manifest(&self.path(name), kind, &self.cfg, result)?;
        }
        Ok(())
    }

    fn verdicts(&self, verdicts: &[Verdict]) -> bool {
        for v in verdicts {
            self.say(v.line());
        }
        harness::all_passed(verdicts)
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Numeric(_) | Error::Cfl { .. } | Error::Serialize(_)) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.experiment.seed = s;
    }
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    let mut ctx = Ctx {
        cfg,
        out,
        quiet: cli.quiet,
    };
    io::create_dir(&ctx.out)?;
    match cli.command {
        Command::ModelInfo => model_info(&ctx),
        Command::KineticMc(a) => kinetic_mc(&mut ctx, a),
        Command::KineticDet(a) => kinetic_det(&mut ctx, a),
        Command::ChiCheck(a) => chi_check(&mut ctx, a),
        Command::Kernel(a) => kernel(&mut ctx, a),
        Command::MacroSolve(a) => macro_solve(&mut ctx, a),
        Command::LimitCheck(a) => limit_check(&mut ctx, a),
        Command::Sweep => sweep(&ctx),
        Command::Invariants(a) => invariants(&ctx, a),
    }
}

fn model_info(ctx: &Ctx) -> Result<bool> {
    let summary = harness::model_summary(&ctx.cfg.model()?)?;
    let text = io::to_json(&summary)?;
    ctx.say(&text);
    ctx.manifest("model_info.json", "model-info", &summary)?;
    Ok(true)
}

fn first_eps(ctx: &Ctx, eps: Option<f64>) -> Result<f64> {
    eps.or_else(|| ctx.cfg.experiment.eps_list.first().copied())
        .ok_or_else(|| Error::Config("no eps given and experiment.eps_list is empty".into()).into())
}

#[derive(Serialize)]
struct McManifest {
    eps: f64,
    particles: usize,
    t_final: f64,
    bins: usize,
    seed: u64,
    smooth: bool,
    collisions: u64,
    candidates: u64,
    mass: f64,
    wall_seconds: f64,
}

fn kinetic_mc(ctx: &mut Ctx, a: McArgs) -> Result<bool> {
    let eps = first_eps(ctx, a.eps.or(Some(ctx.cfg.experiment.mc_eps)))?;
    let e = &mut ctx.cfg.experiment;
    if let Some(n) = a.particles {
        e.particles = n;
    }
    if e.particles == 0 {
        e.particles = 100_000;
    }
    if let Some(t) = a.t_final {
        e.t_final = t;
    }
    let bins = a.nx.unwrap_or(ctx.cfg.discretization.mc_bins);
    ctx.cfg.discretization.mc_bins = bins;
    ctx.cfg.validate()?;
    let model = ctx.cfg.model()?;
    let e = &ctx.cfg.experiment;
    let start = Instant::now();
    let mut ens = init_ensemble(&model, &e.initial, e.particles, e.seed)?;
    advance(&model, &mut ens, e.t_final, eps)?;
    let rho = estimate_density(&ens, Grid1d::new(bins, model.domain_length()), a.smooth)?;
    let m = McManifest {
        eps,
        particles: e.particles,
        t_final: e.t_final,
        bins,
        seed: e.seed,
        smooth: a.smooth,
        collisions: ens.collisions,
        candidates: ens.candidates,
        mass: rho.mass(),
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    if ctx.cfg.wants(Format::Csv) {
        io::write_density_csv(&ctx.path("mc_density.csv"), &rho)?;
    }
    ctx.manifest("mc_manifest.json", "kinetic-mc", &m)?;
    ctx.say(format!(
        "kinetic-mc: eps={eps}, N={}, T={}, {} collisions, mass {:.15}, {:.2}s",
        m.particles, m.t_final, m.collisions, m.mass, m.wall_seconds
    ));
    Ok(true)
}

#[derive(Serialize)]
struct DetManifest<'a> {
    run: &'a kinfrac_core::kinetic_fv::DetRun,
    phase_files: Vec<String>,
    wall_seconds: f64,
}

fn kinetic_det(ctx: &mut Ctx, a: DetArgs) -> Result<bool> {
    let eps = first_eps(ctx, a.eps)?;
    let d = &mut ctx.cfg.discretization;
    if let Some(n) = a.nx {
        d.nx = n;
    }
    if let Some(n) = a.nv {
        d.nv = n;
    }
    if let Some(s) = a.scheme {
        d.scheme = match s {
            SchemeArg::Upwind => Scheme::Upwind,
            SchemeArg::Muscl => Scheme::Muscl,
        };
    }
    if let Some(t) = a.t_final {
        ctx.cfg.experiment.t_final = t;
    }
    ctx.cfg.validate()?;
    let model = ctx.cfg.model()?;
    let mut det = ctx.cfg.det_config();
    det.keep_fields = ctx.cfg.wants(Format::Binary);
    let start = Instant::now();
    let run = run_kinetic_det(&model, &det, &ctx.cfg.experiment.initial, eps)?;
    let wall = start.elapsed().as_secs_f64();
    let mut phase_files = Vec::new();
    for s in &run.snapshots {
        if let Some(field) = &s.field {
            let name = format!("phase_t{:.6}.bin", s.time);
            field.save(&ctx.path(&name))?;
            phase_files.push(name);
        }
    }
    if ctx.cfg.wants(Format::Csv) {
        io::write_density_csv(&ctx.path("det_density.csv"), run.final_density())?;
        let rows: Vec<Vec<f64>> = run
            .gnorm_series
            .iter()
            .map(|&(t, g)| vec![t, g, run.gnorm_bound])
            .collect();
        io::write_csv(&ctx.path("gnorm.csv"), &["t", "gnorm2", "bound"], &rows)?;
    }
    ctx.manifest(
        "det_manifest.json",
        "kinetic-det",
        &DetManifest {
            run: &run,
            phase_files,
            wall_seconds: wall,
        },
    )?;
    let ap = harness::check_apriori(&run)?;
    ctx.say(format!(
        "kinetic-det: eps={eps}, vmax={}, dt={:.3e}, {} steps, mass drift {:.1e}, {wall:.2}s",
        run.vmax,
        run.dt,
        run.steps,
        (run.final_mass - run.initial_mass).abs()
    ));
    for w in &run.warnings {
        ctx.say(format!("warning: {w}"));
    }
    Ok(ctx.verdicts(&[ap.verdict]))
}

fn eps_list(ctx: &Ctx, given: Vec<f64>) -> Vec<f64> {
    if given.is_empty() {
        ctx.cfg.experiment.eps_list.clone()
    } else {
        given
    }
}

fn chi_check(ctx: &mut Ctx, a: ChiArgs) -> Result<bool> {
    let eps = eps_list(ctx, a.eps);
    if let Some(p) = a.phi {
        ctx.cfg.experiment.phi = match p {
            PhiArg::Gaussian => kinfrac_core::config::PhiKind::Gaussian,
            PhiArg::PlaneWave => kinfrac_core::config::PhiKind::PlaneWave,
            PhiArg::Constant => kinfrac_core::config::PhiKind::Constant,
        };
    }
    let model = ctx.cfg.model()?;
    let phi = ctx.cfg.test_function(false)?;
    let r = harness::check_chi(&model, &phi, &eps, a.samples, ctx.cfg.experiment.seed)?;
    if ctx.cfg.wants(Format::Csv) {
        let rows: Vec<Vec<f64>> = r
            .rows
            .iter()
            .map(|r| vec![r.eps, r.gap, r.gap_dt, if r.sup_bound_ok { 1.0 } else { 0.0 }])
            .collect();
        io::write_csv(&ctx.path("chi_check.csv"), &["eps", "gap", "gap_dt", "sup_bound_ok"], &rows)?;
    }
    ctx.manifest("chi_check.json", "chi-check", &r)?;
    Ok(ctx.verdicts(&r.verdicts))
}

fn kernel(ctx: &mut Ctx, a: KernelArgs) -> Result<bool> {
    let model = ctx.cfg.model()?;
    let nx = a.nx.unwrap_or(ctx.cfg.discretization.nx);
    if nx == 0 {
        return Err(Error::Config("nx must be positive".into()).into());
    }
    let grid = Grid1d::new(nx, model.domain_length());
    let xs = grid.nodes();
    let shift = a.image as f64 * grid.length;
    let rows: Vec<Vec<f64>> = xs
        .iter()
        .map(|&x| {
            let mut r = vec![x];
            r.extend(xs.iter().map(|&y| eta(&model, x, y + shift)));
            r
        })
        .collect();
    let names: Vec<String> = std::iter::once("x".to_string())
        .chain((0..nx).map(|j| format!("y{j}")))
        .collect();
    let header: Vec<&str> = names.iter().map(String::as_str).collect();
    io::write_csv(&ctx.path("kernel.csv"), &header, &rows)?;
    let r = harness::check_kernel(&model, 1000, ctx.cfg.experiment.seed)?;
    ctx.manifest("kernel.json", "kernel", &r)?;
    ctx.say(format!("kernel: {nx}x{nx} matrix, image {} -> kernel.csv", a.image));
    Ok(ctx.verdicts(&r.verdicts))
}

#[derive(Serialize)]
struct MacroManifest {
    gamma: f64,
    kappa: f64,
    symbol_constant: Option<f64>,
    dt: f64,
    nx: usize,
    images: usize,
    t_final: f64,
    snapshot_times: Vec<f64>,
    mass: Vec<f64>,
    tail_bound: f64,
    fourier_rel_diff: Option<f64>,
    wall_seconds: f64,
}

fn macro_solve(ctx: &mut Ctx, a: MacroArgs) -> Result<bool> {
    let d = &mut ctx.cfg.discretization;
    if let Some(n) = a.nx {
        d.nx = n;
    }
    if let Some(dt) = a.dt {
        d.macro_dt = dt;
    }
    if let Some(k) = a.images {
        d.images = k;
    }
    if let Some(t) = a.t_final {
        ctx.cfg.experiment.t_final = t;
    }
    ctx.cfg.validate()?;
    let model = ctx.cfg.model()?;
    let (d, e) = (&ctx.cfg.discretization, &ctx.cfg.experiment);
    let start = Instant::now();
    let rho0 = harness::initial_density(&model, &e.initial, d.nx)?;
    let op = assemble(&model, rho0.grid, d.images)?;
    let states = solve_macro(&op, model.kappa(), &rho0, e.t_final, d.macro_dt, &e.snapshot_times)?;
    let last = states.last().expect("final state");
    let fourier = if model.params.nu0_delta == 0.0 {
        Some(fourier_reference(&model, &rho0, e.t_final)?)
    } else {
        None
    };
    let diff = match &fourier {
        Some(f) => Some(last.l2_distance(f)? / f.l2_norm()),
        None => None,
    };
    let m = MacroManifest {
        gamma: model.gamma,
        kappa: model.kappa(),
        symbol_constant: if model.params.nu0_delta == 0.0 {
            Some(symbol_constant(&model)?)
        } else {
            None
        },
        dt: d.macro_dt,
        nx: d.nx,
        images: d.images,
        t_final: e.t_final,
        snapshot_times: states.iter().map(|s| s.time).collect(),
        mass: states.iter().map(|s| s.mass()).collect(),
        tail_bound: op.tail_bound,
        fourier_rel_diff: diff,
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    if ctx.cfg.wants(Format::Csv) {
        for s in &states {
            io::write_density_csv(&ctx.path(&format!("macro_t{:.6}.csv", s.time)), s)?;
        }
        if let Some(f) = &fourier {
            io::write_fields_csv(&ctx.path("macro_vs_fourier.csv"), &["macro", "fourier"], &[last, f])?;
        }
    }
    ctx.manifest("macro_manifest.json", "macro-solve", &m)?;
    ctx.say(format!(
        "macro-solve: gamma={:.4}, nx={}, K={}, T={}, mass {:.12}{}",
        m.gamma,
        m.nx,
        m.images,
        m.t_final,
        last.mass(),
        diff.map(|d| format!(", relative L2 difference to Fourier {d:.3e}"))
            .unwrap_or_default()
    ));
    Ok(true)
}

fn limit_check(ctx: &mut Ctx, a: LimitArgs) -> Result<bool> {
    let eps = eps_list(ctx, a.eps);
    let xs = if a.x.is_empty() {
        ctx.cfg.experiment.sample_points.clone()
    } else {
        a.x
    };
    let model = ctx.cfg.model()?;
    let e = &ctx.cfg.experiment;
    // the limit is taken on the line, with support covering the sample time
    let phi = TestFunction::new(
        ctx.cfg.test_function(false)?.spatial,
        TimeEnvelope::Bump {
            t_end: e.phi_t_end.max(2.0 * a.t),
        },
        None,
    )?;
    if matches!(phi.spatial, SpatialProfile::Constant { .. }) {
        return Err(Error::Config("limit-check needs a non-constant test function".into()).into());
    }
    let r = harness::check_limit(&model, &phi, a.t, &xs, &eps, "limit-check")?;
    if ctx.cfg.wants(Format::Csv) {
        let mut rows = Vec::new();
        for p in &r.points {
            for (k, &e) in eps.iter().enumerate() {
                rows.push(vec![p.t, p.x, e, p.values[k], p.target, p.rel_errors[k]]);
            }
        }
        io::write_csv(
            &ctx.path("limit_check.csv"),
            &["t", "x", "eps", "value", "target", "rel_error"],
            &rows,
        )?;
    }
    ctx.manifest("limit_check.json", "limit-check", &r)?;
    Ok(ctx.verdicts(&r.verdicts))
}

fn write_sweep(dir: &Path, cfg: &RunConfig, r: &harness::SweepReport) -> Result<()> {
    if cfg.wants(Format::Json) {
        io::write_text(&dir.join("sweep.json"), &(io::to_json(r)? + "\n"))?;
    }
    let ok: Vec<&harness::SweepRow> = r.rows.iter().filter(|x| x.failure.is_none()).collect();
    let table: Vec<Vec<f64>> = ok
        .iter()
        .map(|x| {
            vec![
                x.eps,
                x.error_l2,
                x.rel_error,
                x.gnorm_max,
                x.gnorm_bound,
                x.gnorm_scaled,
                x.rho_ratio,
                x.mass_error,
            ]
        })
        .collect();
    let cols = [
        "eps",
        "error_l2",
        "rel_error",
        "gnorm_max",
        "gnorm_bound",
        "gnorm_scaled",
        "rho_ratio",
        "mass_error",
    ];
    if cfg.wants(Format::Csv) {
        io::write_csv(&dir.join("convergence.csv"), &cols, &table)?;
        for x in &ok {
            if let Some(rho) = &x.rho {
                io::write_density_csv(&dir.join(format!("rho_eps{}.csv", x.eps)), rho)?;
            }
        }
        if let Some(rho) = &r.macro_check.rho {
            io::write_density_csv(&dir.join("rho_limit.csv"), rho)?;
        }
    }
    if cfg.wants(Format::Gnuplot) && !table.is_empty() {
        let rows: Vec<Vec<f64>> = table.iter().map(|r| vec![r[0], r[1], r[3]]).collect();
        io::write_gnuplot(dir, "convergence", "kinetic vs limit", &["eps", "error_l2", "gnorm_max"], &rows)?;
    }
    Ok(())
}

fn sweep(ctx: &Ctx) -> Result<bool> {
    let r = harness::run_sweep(&ctx.cfg)?;
    write_sweep(&ctx.out, &ctx.cfg, &r)?;
    ctx.say(format!("{:>8} {:>12} {:>10} {:>12} {:>8}", "eps", "E(eps)", "rel", "|g|^2/eps^g", "wall[s]"));
    for x in &r.rows {
        match &x.failure {
            None => ctx.say(format!(
                "{:>8} {:>12.4e} {:>10.4} {:>12.4e} {:>8.2}",
                x.eps, x.error_l2, x.rel_error, x.gnorm_scaled, x.wall_seconds
            )),
            Some(f) => ctx.say(format!("{:>8} failed: {f}", x.eps)),
        }
    }
    if let Some(rate) = r.empirical_rate {
        ctx.say(format!("empirical rate of E(eps): {rate:.3} (reported only)"));
    }
    Ok(ctx.verdicts(&r.verdicts))
}

#[derive(Serialize)]
struct InvariantReport {
    coercivity: harness::CoercivityReport,
    kernel: harness::KernelReport,
    corrector_identity_max_error: f64,
    hazard_weight_max_error: f64,
    apriori: Vec<harness::AprioriCheck>,
    correctors: Option<harness::CorrectorReport>,
    verdicts: Vec<Verdict>,
}

fn invariants(ctx: &Ctx, a: InvariantArgs) -> Result<bool> {
    let cfg = &ctx.cfg;
    let model = cfg.model()?;
    let e = &cfg.experiment;
    let coercivity = harness::check_coercivity(&model, e.coercivity_samples, e.seed)?;
    let kernel = harness::check_kernel(&model, 1000, e.seed)?;
    let (id_err, hz_err) = harness::check_corrector_identity(&model, 1000, e.seed)?;
    let mut verdicts = coercivity.verdicts.clone();
    verdicts.extend(kernel.verdicts.iter().cloned());
    verdicts.push(Verdict::new(
        4,
        "corrector identity",
        id_err <= 1e-12 && hz_err <= 1e-12,
        format!("max |chi - phi|/|phi| = {id_err:.1e}, max |weight - 1| = {hz_err:.1e}"),
    ));
    let mut apriori = Vec::new();
    let mut correctors = None;
    if !a.fast {
        let det = cfg.det_config();
        for &eps in &e.eps_list {
            let run = run_kinetic_det(&model, &det, &e.initial, eps)?;
            let c = harness::check_apriori(&run)?;
            verdicts.push(c.verdict.clone());
            apriori.push(c);
        }
        if e.eps_list.len() >= 3 {
            let phi = cfg.test_function(true)?;
            let r = harness::check_correctors(&model, &det, &e.initial, &phi, &e.eps_list)?;
            verdicts.extend(r.verdicts.iter().cloned());
            correctors = Some(r);
        }
    }
    let report = InvariantReport {
        coercivity,
        kernel,
        corrector_identity_max_error: id_err,
        hazard_weight_max_error: hz_err,
        apriori,
        correctors,
        verdicts,
    };
    ctx.manifest("invariants.json", "invariants", &report)?;
    Ok(ctx.verdicts(&report.verdicts))
}
