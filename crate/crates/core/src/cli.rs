//! Command-line front end. Every subcommand reads a config, writes CSV plus
//! `summary.txt` and `manifest.toml` into the output directory, and prints the summary.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::{Config, StartKind, VariantName};
use crate::dynamics::{integrate_with, write_trajectory_csv, FlowState, Scheme, Variant};
use crate::error::{Error, Result};
use crate::experiments::{
    compare_manifolds, distance_to_critical, sample_slow_field, scaling_study, slow_subsystem_error, write_csv,
    write_manifest, GraphMethod,
};
use crate::lyapunov_perron::{solve_fixed_point, LpKind};
use crate::manifolds::{critical_manifold_solve, resonance_set, safe_epsilon_bound, GraphKind, ManifoldGraph};
use crate::spectral::{FourierField, SpectralSplit};
use crate::verify;

#[derive(Parser, Debug)]
#[command(name = "slowfast", version, about = "Slow manifolds of fast-slow evolution equations on the circle")]
pub struct Cli {
    /// TOML configuration; defaults describe the quadratic example.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (overrides `experiment.out_dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; output order does not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum KindArg {
    Critical,
    GalerkinExplicit,
    DirectExplicit,
    GalerkinLp,
    DirectLp,
}

impl From<KindArg> for GraphKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Critical => GraphKind::Critical,
            KindArg::GalerkinExplicit => GraphKind::GalerkinExplicit,
            KindArg::DirectExplicit => GraphKind::DirectExplicit,
            KindArg::GalerkinLp => GraphKind::GalerkinLp,
            KindArg::DirectLp => GraphKind::DirectLp,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MethodArg {
    Lp,
    Explicit,
}

impl From<MethodArg> for GraphMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Lp => GraphMethod::Lp,
            MethodArg::Explicit => GraphMethod::Explicit,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum VariantArg {
    Full,
    Galerkin,
    ReducedSlow,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SchemeArg {
    Etd2rk,
    Etdrk4,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Integrate the full, Galerkin or reduced slow system.
    Simulate {
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        k0: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long, value_enum)]
        variant: Option<VariantArg>,
        #[arg(long, value_enum)]
        scheme: Option<SchemeArg>,
    },
    /// Evaluate a manifold graph on seeded slow samples.
    Manifold {
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        k0: Option<usize>,
        #[arg(long, value_enum, default_value = "galerkin-lp")]
        kind: KindArg,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Enumerate the resonant values of epsilon for a cutoff.
    Resonance {
        #[arg(long)]
        k0: Option<usize>,
    },
    /// Direct versus Galerkin graph on the (epsilon, k0, sample) grid.
    Compare {
        #[arg(long, value_delimiter = ',')]
        epsilon: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        k0: Option<Vec<usize>>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
    },
    /// Log-log exponent fits along k0 and epsilon sweeps.
    Scaling {
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Distance of the slow manifold to the critical manifold.
    Distance {
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Full system against the reduced slow subsystem.
    SlowError,
    /// Run the acceptance checks.
    Verify {
        /// Only this check (1 to 9).
        #[arg(long)]
        check: Option<Vec<u32>>,
    },
}

/// Parses, runs, and returns the process exit code. Failures print
/// `error[<category>]: <message>` on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            if outcome.ok {
                0
            } else {
                eprintln!("error[acceptance_failed]: {}", outcome.failure.unwrap_or_default());
                1
            }
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            2
        }
    }
}

struct Outcome {
    summary: String,
    ok: bool,
    failure: Option<String>,
}

impl Outcome {
    fn ok(summary: String) -> Self {
        Outcome { summary, ok: true, failure: None }
    }
}

fn load_config(cli: &Cli) -> Result<Config> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.experiment.out_dir = o.to_string_lossy().into_owned();
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<Outcome> {
    let mut cfg = load_config(cli)?;
    apply_overrides(&mut cfg, &cli.command);
    cfg.validate()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        pool = pool.num_threads(j.max(1));
    }
    let pool = pool.build().map_err(|e| Error::Invalid(e.to_string()))?;
    pool.install(|| dispatch(&cfg, &cli.command))
}

fn apply_overrides(cfg: &mut Config, cmd: &Command) {
    match cmd {
        Command::Simulate { epsilon, k0, dt, t_end, variant, scheme } => {
            if let Some(e) = epsilon {
                cfg.system.epsilon = *e;
            }
            if let Some(k) = k0 {
                cfg.split.k0 = Some(*k);
                cfg.split.zeta = None;
            }
            if let Some(d) = dt {
                cfg.dynamics.dt = *d;
            }
            if let Some(t) = t_end {
                cfg.dynamics.t_end = *t;
            }
            if let Some(v) = variant {
                cfg.dynamics.variant = match v {
                    VariantArg::Full => VariantName::Full,
                    VariantArg::Galerkin => VariantName::Galerkin,
                    VariantArg::ReducedSlow => VariantName::ReducedSlow,
                };
            }
            if let Some(s) = scheme {
                cfg.dynamics.scheme = match s {
                    SchemeArg::Etd2rk => Scheme::Etd2rk,
                    SchemeArg::Etdrk4 => Scheme::Etdrk4,
                };
            }
        }
        Command::Manifold { epsilon, k0, samples, .. } => {
            if let Some(e) = epsilon {
                cfg.system.epsilon = *e;
            }
            if let Some(k) = k0 {
                cfg.split.k0 = Some(*k);
                cfg.split.zeta = None;
            }
            if let Some(s) = samples {
                cfg.experiment.samples = *s;
            }
        }
        Command::Resonance { k0 } => {
            if let Some(k) = k0 {
                cfg.split.k0 = Some(*k);
                cfg.split.zeta = None;
            }
        }
        Command::Compare { epsilon, k0, samples, method } => {
            if let Some(e) = epsilon {
                cfg.experiment.epsilons = e.clone();
            }
            if let Some(k) = k0 {
                cfg.experiment.k0s = k.clone();
            }
            if let Some(s) = samples {
                cfg.experiment.samples = *s;
            }
            if let Some(m) = method {
                cfg.experiment.graph_method = (*m).into();
            }
        }
        Command::Scaling { method, samples } => {
            if let Some(m) = method {
                cfg.experiment.scaling_method = (*m).into();
            }
            if let Some(s) = samples {
                cfg.experiment.samples = *s;
            }
        }
        Command::Distance { samples } => {
            if let Some(s) = samples {
                cfg.experiment.samples = *s;
            }
        }
        Command::SlowError | Command::Verify { .. } => {}
    }
}

fn out_dir(cfg: &Config) -> Result<PathBuf> {
    let dir = PathBuf::from(&cfg.experiment.out_dir);
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn create(dir: &Path, name: &str, files: &mut Vec<PathBuf>) -> Result<BufWriter<File>> {
    let p = dir.join(name);
    let f = File::create(&p)?;
    files.push(p);
    Ok(BufWriter::new(f))
}

fn finish(dir: &Path, cfg: &Config, command: &str, mut files: Vec<PathBuf>, summary: String) -> Result<String> {
    let p = dir.join("summary.txt");
    std::fs::write(&p, &summary)?;
    files.push(p);
    write_manifest(dir, cfg, command, &files)?;
    Ok(summary)
}

fn dispatch(cfg: &Config, cmd: &Command) -> Result<Outcome> {
    let dir = out_dir(cfg)?;
    let mut files = Vec::new();
    let mut s = String::new();
    let name = match cmd {
        Command::Simulate { .. } => {
            let traj = simulate(cfg)?;
            write_trajectory_csv(&traj, create(&dir, "trajectory.csv", &mut files)?)?;
            let last = traj.last().expect("at least the initial state");
            let _ = writeln!(s, "simulate: {} stored states, t_end = {}", traj.len(), last.t);
            let _ = writeln!(s, "final max |u_k| = {:.6e}, max |v_k| = {:.6e}", last.u.max_abs(), last.v.max_abs());
            "simulate"
        }
        Command::Manifold { kind, .. } => {
            manifold(cfg, (*kind).into(), &dir, &mut files, &mut s)?;
            "manifold"
        }
        Command::Resonance { .. } => {
            let k0 = cfg.spectral_split()?.k0;
            let set = resonance_set(k0, (0.0, 1.0));
            set.write_csv(create(&dir, "resonance.csv", &mut files)?)?;
            let _ = writeln!(s, "resonance: k0 = {k0}, {} distinct values", set.len());
            if let Some(m) = set.min() {
                let _ = writeln!(s, "minimum {:.17e}, safe bound {:.17e}", m.epsilon, safe_epsilon_bound(k0));
            }
            let _ = writeln!(s, "contains 1/2: {}", set.contains_half());
            "resonance"
        }
        Command::Compare { .. } => {
            let t = compare_manifolds(cfg)?;
            t.write_rows(create(&dir, "compare.csv", &mut files)?)?;
            t.write_skips(create(&dir, "compare_skips.csv", &mut files)?)?;
            let c = t.rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
            let _ = writeln!(s, "compare: {} rows, {} skipped", t.rows.len(), t.skips.len());
            let _ = writeln!(s, "estimated constant C (max ratio) = {c:.6e}");
            "compare"
        }
        Command::Scaling { .. } => {
            let r = scaling_study(cfg)?;
            r.write_points(create(&dir, "scaling_points.csv", &mut files)?)?;
            r.write_fits(create(&dir, "scaling_fits.csv", &mut files)?)?;
            write_csv(&r.skips, create(&dir, "scaling_skips.csv", &mut files)?)?;
            for f in &r.fits {
                let _ = writeln!(
                    s,
                    "{:?} n-m={}: slope {:.3} [{:.3}, {:.3}] expected {:.2}, bound slope {:.3}",
                    f.sweep, f.gap, f.fit.slope, f.fit.ci_low, f.fit.ci_high, f.expected, f.bound_slope
                );
            }
            let _ = writeln!(s, "LHS(2v)/LHS(v) = {:.6}", r.homogeneity_ratio);
            "scaling"
        }
        Command::Distance { .. } => {
            let t = distance_to_critical(cfg)?;
            t.write_rows(create(&dir, "distance.csv", &mut files)?)?;
            t.write_skips(create(&dir, "distance_skips.csv", &mut files)?)?;
            let c = t.rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
            let _ = writeln!(s, "distance: {} rows, {} skipped, max ratio {c:.6e}", t.rows.len(), t.skips.len());
            "distance"
        }
        Command::SlowError => {
            let r = slow_subsystem_error(cfg)?;
            write_csv(&r.rows, create(&dir, "slow_error.csv", &mut files)?)?;
            write_csv(&r.fits, create(&dir, "slow_error_fits.csv", &mut files)?)?;
            write_csv(&r.skips, create(&dir, "slow_error_skips.csv", &mut files)?)?;
            for f in &r.fits {
                let _ = writeln!(s, "eps={:e} k0={}: layer rate {:.4e} (|omega_f|/eps = {:.4e})", f.epsilon, f.k0, f.rate, f.reference);
            }
            let _ = writeln!(s, "slow-error: {} rows, {} skipped", r.rows.len(), r.skips.len());
            "slow-error"
        }
        Command::Verify { check } => {
            let results = match check {
                Some(ids) => ids.iter().map(|&i| verify::run_check(cfg, i)).collect::<Result<Vec<_>>>()?,
                None => verify::run_all(cfg),
            };
            write_csv(&results, create(&dir, "verify.csv", &mut files)?)?;
            for r in &results {
                let _ = writeln!(s, "{}", r.line());
            }
            let failed: Vec<String> = results.iter().filter(|r| !r.pass).map(|r| r.id.to_string()).collect();
            let summary = finish(&dir, cfg, "verify", files, s)?;
            return Ok(if failed.is_empty() {
                Outcome::ok(summary)
            } else {
                Outcome { summary, ok: false, failure: Some(format!("checks {} failed", failed.join(", "))) }
            });
        }
    };
    Ok(Outcome::ok(finish(&dir, cfg, name, files, s)?))
}

fn simulate(cfg: &Config) -> Result<Vec<FlowState>> {
    let sys = cfg.system();
    let split = cfg.spectral_split()?;
    let k0 = split.k0;
    let res = sys.resolution.max(2 * k0);
    let mut sys = sys;
    sys.resolution = res;
    let v0 = sample_slow_field(cfg.seed, k0, 0, cfg.experiment.n as f64, cfg.experiment.sample_norm);
    let mut u0 = match cfg.dynamics.start {
        StartKind::OnManifold => {
            let kind = if sys.is_quadratic_example() { GraphKind::DirectExplicit } else { GraphKind::DirectLp };
            let mut g = ManifoldGraph::new(kind, sys.clone(), split);
            g.lp = cfg.lp.clone();
            g.evaluate(&v0)?.0
        }
        StartKind::Critical => critical_manifold_solve(&sys, &v0.resized(res), 1e-13)?,
        StartKind::Zero => FourierField::zeros(res, true),
    };
    u0 = u0.resized(res).axpy(cfg.dynamics.u_offset, &FourierField::real_mode(0, res));
    let variant = match cfg.dynamics.variant {
        VariantName::Full => Variant::Full,
        VariantName::Galerkin => Variant::Galerkin { k0 },
        VariantName::ReducedSlow => Variant::ReducedSlow { k0 },
    };
    let start = FlowState { t: 0.0, u: u0, v: v0.resized(res) };
    integrate_with(&sys, &start, cfg.dynamics.dt, cfg.dynamics.t_end, variant, &cfg.dynamics.integrate_options())
}

fn manifold(cfg: &Config, kind: GraphKind, dir: &Path, files: &mut Vec<PathBuf>, s: &mut String) -> Result<()> {
    #[derive(serde::Serialize)]
    struct Row {
        sample: usize,
        component: &'static str,
        k: i64,
        re: f64,
        im: f64,
    }
    let split = cfg.spectral_split()?;
    let mut sys = cfg.system();
    sys.resolution = sys.resolution.max(cfg.lp.resolution(LpKind::Direct, split.k0));
    let mut g = ManifoldGraph::new(kind, sys.clone(), split);
    g.lp = cfg.lp.clone();
    let mut rows = Vec::new();
    for i in 0..cfg.experiment.samples {
        let v = sample_slow_field(cfg.seed, split.k0, i, cfg.experiment.n as f64, cfg.experiment.sample_norm);
        let (u, vf) = g.evaluate(&v)?;
        for (name, f) in [("u", &u), ("v_fast", &vf)] {
            rows.extend(f.iter().map(|(k, c)| Row { sample: i, component: name, k, re: c.re, im: c.im }));
        }
    }
    write_csv(&rows, create(dir, "manifold.csv", files)?)?;
    let _ = writeln!(s, "manifold: {kind:?} at eps = {}, k0 = {}, zeta = {:.6e}", sys.epsilon, split.k0, split.zeta);
    if let Some(lp_kind) = match kind {
        GraphKind::GalerkinLp => Some(LpKind::Galerkin),
        GraphKind::DirectLp => Some(LpKind::Direct),
        _ => None,
    } {
        lp_summary(cfg, lp_kind, &sys, &split, dir, files, s)?;
    }
    let _ = writeln!(s, "{} samples written", cfg.experiment.samples);
    Ok(())
}

fn lp_summary(
    cfg: &Config,
    kind: LpKind,
    sys: &crate::system::FastSlowSystem,
    split: &SpectralSplit,
    dir: &Path,
    files: &mut Vec<PathBuf>,
    s: &mut String,
) -> Result<()> {
    let v = sample_slow_field(cfg.seed, split.k0, 0, cfg.experiment.n as f64, cfg.experiment.sample_norm);
    let (traj, d) = solve_fixed_point(kind, &v, sys, split, &cfg.lp)?;
    traj.write_csv(create(dir, "history.csv", files)?)?;
    let _ = writeln!(
        s,
        "sample 0: {} iterations, observed ratio {:.3e}, contraction estimate {:.3e}, horizon {:.4e}, step {:.3e}",
        d.iterations, d.observed_ratio, d.contraction_constant, d.grid.horizon, d.grid.step
    );
    Ok(())
}
