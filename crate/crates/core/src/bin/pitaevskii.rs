use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pitaevskii::config::{read_config, Config};
use pitaevskii::diagnostics::{
    bounds_series, max_relative_energy_residual, q_t, Baseline, MassAudit, BOUND_TOL,
};
use pitaevskii::initial::{plane_wave_state, random_real_field, random_state, InitialCondition, RandomStateSpec};
use pitaevskii::integrator::Observer;
use pitaevskii::io::{write_snapshot, CsvObserver};
use pitaevskii::model::{quadratic_form_residual, source_form_residual};
use pitaevskii::oracle::{project_plane_wave, reduced_deviation, reduced_ode_oracle, OracleTrajectory};
use pitaevskii::stability::{stability_experiment, PerturbationSpec, StabilityReport};
use pitaevskii::validator::{inequality_validator, ValidatorReport, DEFAULT_CAP};
use pitaevskii::{
    norm, vector_norm, DiagnosticsRecord, Error, Grid, Integrator, NormSpec, Params, RealField, Result,
    SpectralPlan, State, StepConfig, Termination,
};

/// Largest mode number of the validator's random fields.
const VALIDATOR_MAX_MODE: i64 = 4;
/// Spread allowed between the two independent validator samples.
const VALIDATOR_SPREAD: f64 = 0.2;
/// Residual allowed by the operator identities.
const IDENTITY_TOL: f64 = 1e-10;
/// Deviation allowed between the PDE run and the reduced ODE.
const ORACLE_TOL: f64 = 1e-6;
/// Largest ratio between the sup D/D(0) of different amplitudes.
const LINEAR_RESPONSE_FACTOR: f64 = 2.0;

#[derive(Parser)]
#[command(name = "pitaevskii", version, about = "Superfluid / normal-fluid solver and verification harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the initial condition to the horizon, writing diagnostics and snapshots.
    Simulate {
        config: PathBuf,
        /// Output directory (overrides output.dir).
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// End time (overrides experiment.horizon).
        #[arg(long)]
        t_end: Option<f64>,
    },
    /// Perturbation sweep: difference norms and the Gronwall envelope.
    Stability {
        config: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Time-step halving study of the energy residual and the final state.
    Convergence {
        config: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Functional-inequality constants and operator identities on random data.
    Validate {
        config: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Reduced plane-wave ODE, optionally compared against the PDE.
    Oracle {
        config: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Also run the PDE and report the deviation.
        #[arg(long)]
        compare: bool,
    },
}

/// Whether every asserted check held.
struct Outcome {
    ok: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config, out, t_end } => simulate(&config, out, t_end),
        Command::Stability { config, out } => stability(&config, out),
        Command::Convergence { config, out } => convergence(&config, out),
        Command::Validate { config, out } => validate(&config, out),
        Command::Oracle { config, out, compare } => oracle(&config, out, compare),
    };
    match result {
        Ok(Outcome { ok: true }) => ExitCode::SUCCESS,
        Ok(Outcome { ok: false }) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_physics_event() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn load(path: &Path, out: Option<PathBuf>) -> Result<(Config, Arc<Grid>, PathBuf)> {
    let cfg = read_config(path)?;
    let grid = cfg.build_grid()?;
    cfg.params.validate()?;
    cfg.integrator.validate()?;
    let dir = out.unwrap_or_else(|| cfg.output.dir.clone());
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("config.txt"), cfg.to_text())?;
    Ok((cfg, grid, dir))
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

fn finish(dir: &Path, name: &str, text: &str) -> Result<()> {
    print!("{text}");
    fs::write(dir.join(name), text)?;
    Ok(())
}

/// Reports a physics event on stderr and returns whether the run completed.
fn report_termination(what: &str, term: &Termination) -> bool {
    match term.to_error() {
        None => true,
        Some(e) => {
            eprintln!("{what}: {e}");
            false
        }
    }
}

fn termination_text(term: &Termination) -> String {
    term.to_error().map_or_else(|| "completed".to_string(), |e| e.to_string())
}

struct SnapshotWriter {
    dir: PathBuf,
    every: usize,
    params: Params,
}

impl Observer for SnapshotWriter {
    fn observe(&mut self, step: usize, state: &State, _: &DiagnosticsRecord) -> Result<()> {
        if self.every > 0 && step % self.every == 0 {
            write_snapshot(state, &self.params, &self.dir.join(format!("snapshot_{step:06}.bin")))?;
        }
        Ok(())
    }
}

fn simulate(path: &Path, out: Option<PathBuf>, t_end: Option<f64>) -> Result<Outcome> {
    let (cfg, grid, dir) = load(path, out)?;
    let t_end = t_end.unwrap_or(cfg.experiment.horizon);
    let initial = cfg.initial_state(&grid)?;
    let integ = Integrator::new(&grid, &cfg.params, &cfg.integrator)?;

    let mut csv = CsvObserver::create(&dir.join("timeseries.csv"), cfg.output.csv_every)?;
    let mut snaps = SnapshotWriter { dir: dir.clone(), every: cfg.output.snapshot_every, params: cfg.params };
    let traj = integ.run(&initial, t_end, &mut [&mut csv, &mut snaps])?;
    csv.finish()?;
    write_snapshot(&traj.final_state, &cfg.params, &dir.join("final.bin"))?;

    let completed = report_termination("run stopped", &traj.termination);
    let audit = MassAudit::of(&traj.records);
    let bounds = bounds_series(&traj.records, &cfg.params);
    let last = traj.records.last().expect("the initial record is always present");
    let baseline = Baseline::from_initial(&traj.records[0]);

    let mut s = String::new();
    let _ = writeln!(s, "ic = {}", cfg.ic.family());
    let _ = writeln!(s, "grid = {:?}", cfg.grid.n);
    let _ = writeln!(s, "steps = {}", traj.steps());
    let _ = writeln!(s, "t = {:.6e}", last.t);
    let _ = writeln!(s, "termination: {}", termination_text(&traj.termination));
    let _ = writeln!(s, "max |r|/E0 = {:.6e}", max_relative_energy_residual(&traj.records));
    let _ = writeln!(
        s,
        "superfluid mass step increase = {:.3e} (tol {BOUND_TOL:e}) {}",
        audit.max_sf_increase,
        verdict(audit.max_sf_increase <= BOUND_TOL)
    );
    let _ = writeln!(
        s,
        "total mass drift = {:.3e} (tol {BOUND_TOL:e}) {}",
        audit.max_total_drift,
        verdict(audit.max_total_drift <= BOUND_TOL)
    );
    let mut bounds_ok = true;
    for name in bounds.first().map(|b| b.checks.iter().map(|c| c.name).collect::<Vec<_>>()).unwrap_or_default() {
        let worst = bounds
            .iter()
            .filter_map(|b| b.get(name))
            .min_by(|a, b| a.margin.total_cmp(&b.margin))
            .expect("every report has the same checks");
        let all = bounds.iter().filter_map(|b| b.get(name)).all(|c| c.passed);
        if worst.asserted {
            bounds_ok &= all;
        }
        let _ = writeln!(
            s,
            "{name}: worst value {:.6e}, limit {:.6e}, margin {:.3e} {}",
            worst.value,
            worst.limit,
            worst.margin,
            if worst.asserted { verdict(all) } else { "(observation)" }
        );
    }
    let plan = integ.plan();
    let q = q_t(plan, &integ.prepare(&initial)?, &cfg.params, baseline.x0, last.t)?;
    let _ = writeln!(s, "Q_T = {q:.6e}");
    finish(&dir, "summary.txt", &s)?;
    Ok(Outcome { ok: completed && audit.passed() && bounds_ok })
}

fn amplitude_tag(a: f64) -> String {
    format!("{a:e}")
}

fn stability(path: &Path, out: Option<PathBuf>) -> Result<Outcome> {
    let (cfg, grid, dir) = load(path, out)?;
    let exp = &cfg.experiment;
    let initial = cfg.initial_state(&grid)?;
    let mut amplitudes = vec![0.0];
    amplitudes.extend(exp.amplitudes.iter().copied().filter(|a| *a != 0.0));

    let mut reports: Vec<StabilityReport> = Vec::new();
    let mut s = String::new();
    let mut ok = true;
    for amp in amplitudes {
        let spec = PerturbationSpec { target: exp.target, mode: exp.mode.clone(), amplitude: amp };
        let rep = stability_experiment(&initial, &cfg.params, &cfg.integrator, &spec, exp.horizon)?;
        let name = format!("stability_{}_{}.csv", exp.target.name(), amplitude_tag(amp));
        rep.write_csv(BufWriter::new(File::create(dir.join(&name))?))?;
        ok &= report_termination(&format!("perturbed run (amplitude {amp:e})"), &rep.termination);
        let _ = writeln!(s, "[{name}]");
        s.push_str(&rep.summary());
        if amp == 0.0 {
            let identical = rep.deterministic && rep.max_d() == 0.0;
            let _ = writeln!(s, "zero perturbation, D identically 0: {}", verdict(identical));
            ok &= identical;
        } else {
            ok &= rep.envelope_holds() && rep.deterministic;
        }
        s.push('\n');
        reports.push(rep);
    }
    let ratios: Vec<f64> = reports.iter().skip(1).map(|r| r.sup_ratio).collect();
    if ratios.len() > 1 {
        let hi = ratios.iter().copied().fold(f64::MIN, f64::max);
        let lo = ratios.iter().copied().fold(f64::MAX, f64::min);
        let linear = lo > 0.0 && hi / lo <= LINEAR_RESPONSE_FACTOR;
        let _ = writeln!(s, "sup D/D(0) spread = {:.6e} (limit {LINEAR_RESPONSE_FACTOR}) {}", hi / lo, verdict(linear));
        ok &= linear;
    }
    finish(&dir, "summary.txt", &s)?;
    Ok(Outcome { ok })
}

fn state_distance(plan: &SpectralPlan, a: &State, b: &State) -> Result<f64> {
    let l2 = NormSpec::Lp(2.0);
    let dpsi = norm(plan, &a.psi.sub(&b.psi)?, l2)?;
    let du = vector_norm(plan, &a.u.sub(&b.u)?, l2)?;
    let drho = norm(plan, &a.rho.sub(&b.rho)?, l2)?;
    Ok(dpsi + du + drho)
}

fn order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

fn convergence(path: &Path, out: Option<PathBuf>) -> Result<Outcome> {
    let (cfg, grid, dir) = load(path, out)?;
    let initial = cfg.initial_state(&grid)?;
    let t_end = cfg.experiment.horizon;
    let mut ok = true;
    let mut rows: Vec<(f64, usize, f64, f64, State)> = Vec::new();
    for level in 0..=cfg.experiment.refinements {
        let dt = cfg.integrator.dt_init / 2f64.powi(level as i32);
        let step = StepConfig { dt_init: dt, adaptive: false, ..cfg.integrator };
        let integ = Integrator::new(&grid, &cfg.params, &step)?;
        let traj = integ.run(&initial, t_end, &mut [])?;
        ok &= report_termination(&format!("run at dt = {dt:e}"), &traj.termination);
        let resid = max_relative_energy_residual(&traj.records);
        let drift = MassAudit::of(&traj.records).max_total_drift;
        rows.push((dt, traj.steps(), resid, drift, traj.final_state));
    }
    let plan = SpectralPlan::new(&grid);
    let mut csv = String::from("dt,steps,energy_residual,energy_order,mass_drift,self_error,self_order\n");
    let mut s = String::new();
    let _ = writeln!(s, "{:>12} {:>7} {:>14} {:>8} {:>12} {:>14} {:>8}", "dt", "steps", "max|r|/E0", "order", "mass drift", "self error", "order");
    let mut errors = Vec::new();
    for w in rows.windows(2) {
        errors.push(state_distance(&plan, &w[0].4, &w[1].4)?);
    }
    for (i, (dt, steps, resid, drift, _)) in rows.iter().enumerate() {
        let e_order = if i > 0 { order(rows[i - 1].2, *resid) } else { f64::NAN };
        let err = errors.get(i).copied().unwrap_or(f64::NAN);
        let s_order = if i > 0 && i < errors.len() { order(errors[i - 1], err) } else { f64::NAN };
        let _ = writeln!(csv, "{dt:.16e},{steps},{resid:.16e},{e_order:.16e},{drift:.16e},{err:.16e},{s_order:.16e}");
        let _ = writeln!(s, "{dt:>12.4e} {steps:>7} {resid:>14.6e} {e_order:>8.3} {drift:>12.3e} {err:>14.6e} {s_order:>8.3}");
    }
    fs::write(dir.join("convergence.csv"), csv)?;
    finish(&dir, "summary.txt", &s)?;
    Ok(Outcome { ok })
}

fn validator_sample(plan: &SpectralPlan, count: usize, seed: u64) -> Result<ValidatorReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fields: Vec<RealField> =
        (0..count).map(|_| random_real_field(plan, &mut rng, 1.0, VALIDATOR_MAX_MODE, true)).collect();
    inequality_validator(plan, &fields, DEFAULT_CAP)
}

fn validate(path: &Path, out: Option<PathBuf>) -> Result<Outcome> {
    let (cfg, grid, dir) = load(path, out)?;
    let exp = &cfg.experiment;
    let plan = SpectralPlan::new(&grid);
    let first = validator_sample(&plan, exp.samples, exp.seed)?;
    let second = validator_sample(&plan, exp.samples, exp.seed.wrapping_add(1))?;

    let mut s = String::new();
    let mut ok = first.passed() && second.passed();
    if let Some(notice) = &first.notice {
        let _ = writeln!(s, "notice: {notice}");
    }
    for (a, b) in first.results.iter().zip(&second.results) {
        let (ra, rb) = (a.max_ratio.unwrap_or(0.0), b.max_ratio.unwrap_or(0.0));
        let spread = if ra.max(rb) > 0.0 { (ra - rb).abs() / ra.max(rb) } else { 0.0 };
        let stable = spread <= VALIDATOR_SPREAD;
        ok &= stable;
        let _ = writeln!(
            s,
            "{}: max ratio {ra:.6e} / {rb:.6e} (cap {}), spread {spread:.3e} {}",
            a.inequality.name(),
            first.cap,
            verdict(a.passed && b.passed && stable)
        );
    }

    let spec = match &cfg.ic {
        InitialCondition::Random { spec, .. } => *spec,
        _ => RandomStateSpec::default(),
    };
    let mut quad = 0.0f64;
    let mut source = 0.0f64;
    for i in 0..exp.samples {
        let st = random_state(&grid, &spec, &cfg.params, exp.seed.wrapping_add(1000 + i as u64))?;
        quad = quad.max(quadratic_form_residual(&plan, &st, &cfg.params)?);
        source = source.max(source_form_residual(&plan, &st, &cfg.params)?);
    }
    let _ = writeln!(s, "quadratic form residual = {quad:.3e} (tol {IDENTITY_TOL:e}) {}", verdict(quad <= IDENTITY_TOL));
    let _ = writeln!(s, "source form residual = {source:.3e} (tol {IDENTITY_TOL:e}) {}", verdict(source <= IDENTITY_TOL));
    ok &= quad <= IDENTITY_TOL && source <= IDENTITY_TOL;
    finish(&dir, "summary.txt", &s)?;
    Ok(Outcome { ok })
}

struct OracleCompare<'a> {
    grid: Arc<Grid>,
    modes: Vec<i64>,
    oracle: &'a OracleTrajectory,
    max_dev: f64,
    final_dev: f64,
}

impl Observer for OracleCompare<'_> {
    fn observe(&mut self, _: usize, state: &State, _: &DiagnosticsRecord) -> Result<()> {
        let pde = project_plane_wave(&self.grid, state, &self.modes);
        let dev = reduced_deviation(&pde, &self.oracle.at(state.t), &self.oracle.k);
        self.max_dev = self.max_dev.max(dev);
        self.final_dev = dev;
        Ok(())
    }
}

fn oracle(path: &Path, out: Option<PathBuf>, compare: bool) -> Result<Outcome> {
    let (cfg, grid, dir) = load(path, out)?;
    let InitialCondition::PlaneWave(wave) = &cfg.ic else {
        return Err(Error::Config(vec![format!("ic.family: oracle needs plane-wave, got {}", cfg.ic.family())]));
    };
    let k = wave.physical_k(&grid);
    let t_end = cfg.experiment.horizon;
    let traj = reduced_ode_oracle(&cfg.params, &k, wave.a, &wave.velocity, wave.rho, t_end, cfg.experiment.tol)?;

    let mut csv = String::from("t,abs_a,arg_a,rho");
    for i in 0..k.len() {
        let _ = write!(csv, ",u{i}");
    }
    csv.push_str(",mass\n");
    for n in traj.nodes() {
        let _ = write!(csv, "{:.16e},{:.16e},{:.16e},{:.16e}", n.t, n.a.norm(), n.a.arg(), n.rho);
        for u in &n.u {
            let _ = write!(csv, ",{u:.16e}");
        }
        let _ = writeln!(csv, ",{:.16e}", n.mass());
    }
    fs::write(dir.join("oracle.csv"), csv)?;

    let end = traj.last();
    let mut s = String::new();
    let _ = writeln!(s, "nodes = {}", traj.len());
    let _ = writeln!(s, "t = {:.6e}: |a| = {:.16e}, arg a = {:.16e}, rho = {:.16e}, U = {:?}", end.t, end.a.norm(), end.a.arg(), end.rho, end.u);
    let mut ok = true;
    if k.iter().all(|&x| x == 0.0) && wave.velocity.iter().all(|&x| x == 0.0) {
        let a2 = wave.a.norm_sqr();
        let exact = a2 / (1.0 + 2.0 * cfg.params.lambda * cfg.params.mu * a2 * end.t);
        let _ = writeln!(s, "closed form |a|^2 relative error = {:.3e}", (end.a.norm_sqr() - exact).abs() / exact);
    }
    if compare {
        let mut cmp = OracleCompare { grid: grid.clone(), modes: wave.k.clone(), oracle: &traj, max_dev: 0.0, final_dev: 0.0 };
        let integ = Integrator::new(&grid, &cfg.params, &cfg.integrator)?;
        let run = integ.run(&plane_wave_state(&grid, wave)?, t_end, &mut [&mut cmp])?;
        ok &= report_termination("pde run", &run.termination);
        let within = cmp.max_dev <= ORACLE_TOL;
        let _ = writeln!(s, "pde steps = {}", run.steps());
        let _ = writeln!(s, "deviation at T = {:.3e}", cmp.final_dev);
        let _ = writeln!(s, "max deviation = {:.3e} (tol {ORACLE_TOL:e}) {}", cmp.max_dev, verdict(within));
        ok &= within;
    }
    finish(&dir, "summary.txt", &s)?;
    Ok(Outcome { ok })
}
