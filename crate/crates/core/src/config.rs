//! Run configuration in a line-based `section.key = value` format.
//!
//! `#` starts a comment, blank lines are ignored and lists are comma
//! separated. Every key is optional. Sections:
//!
//! | section      | keys |
//! |--------------|------|
//! | `grid`       | `d`, `n`, `len` |
//! | `params`     | `lambda`, `mu`, `nu`, `m`, `M`, `epsilon`, `delta`, `gamma` |
//! | `integrator` | `dt`, `cfl`, `dt_min`, `dt_max`, `adaptive`, `nls_scheme`, `fluid_scheme`, `dealias` |
//! | `ic`         | `family` plus the keys of that family (see [`Config::to_text`]) |
//! | `output`     | `dir`, `snapshot_every`, `csv_every` |
//! | `experiment` | `horizon`, `target`, `mode`, `amplitudes`, `samples`, `seed`, `tol`, `refinements` |

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::initial::{InitialCondition, ModulatedSpec, PlaneWave, RandomStateSpec, SmoothSpec};
use crate::integrator::{FluidScheme, NlsScheme, StepConfig};
use crate::model::{Params, State};
use crate::oracle::MIN_TOL;
use crate::stability::PerturbTarget;

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub n: Vec<usize>,
    pub len: Vec<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { n: vec![64, 64], len: vec![2.0 * PI, 2.0 * PI] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Snapshot every this many steps; 0 writes only the final state.
    pub snapshot_every: usize,
    /// Time-series row every this many steps.
    pub csv_every: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out"), snapshot_every: 0, csv_every: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub horizon: f64,
    pub target: PerturbTarget,
    pub mode: Vec<i64>,
    /// Perturbation amplitudes of the stability sweep.
    pub amplitudes: Vec<f64>,
    /// Random sample count for `validate`.
    pub samples: usize,
    pub seed: u64,
    /// Oracle tolerance.
    pub tol: f64,
    /// Number of dt halvings in `convergence`.
    pub refinements: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            horizon: 0.5,
            target: PerturbTarget::Psi,
            mode: vec![1, 2, 1],
            amplitudes: vec![1e-4, 1e-6, 1e-8],
            samples: 200,
            seed: 1,
            tol: 1e-12,
            refinements: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub grid: GridConfig,
    pub params: Params,
    pub integrator: StepConfig,
    pub ic: InitialCondition,
    pub output: OutputConfig,
    pub experiment: ExperimentConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            grid: GridConfig::default(),
            params: Params::default(),
            integrator: StepConfig::default(),
            ic: InitialCondition::Smooth(SmoothSpec::default()),
            output: OutputConfig::default(),
            experiment: ExperimentConfig::default(),
        }
    }
}

impl Config {
    pub fn build_grid(&self) -> Result<Arc<Grid>> {
        Grid::new(&self.grid.n, &self.grid.len)
    }

    pub fn initial_state(&self, grid: &Arc<Grid>) -> Result<State> {
        self.ic.build(grid, &self.params)
    }

    /// Canonical text form; `parse_config(c.to_text())` returns `c`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let f = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        let ints = |v: &[i64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        let g = &self.grid;
        let _ = writeln!(s, "grid.d = {}", g.n.len());
        let _ = writeln!(s, "grid.n = {}", g.n.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", "));
        let _ = writeln!(s, "grid.len = {}", f(&g.len));
        let p = &self.params;
        for (k, v) in [
            ("lambda", p.lambda),
            ("mu", p.mu),
            ("nu", p.nu),
            ("m", p.m),
            ("M", p.big_m),
            ("epsilon", p.epsilon),
            ("delta", p.delta),
            ("gamma", p.gamma),
        ] {
            let _ = writeln!(s, "params.{k} = {v}");
        }
        let c = &self.integrator;
        let _ = writeln!(s, "integrator.dt = {}", c.dt_init);
        let _ = writeln!(s, "integrator.cfl = {}", c.cfl);
        let _ = writeln!(s, "integrator.dt_min = {}", c.dt_min);
        let _ = writeln!(s, "integrator.dt_max = {}", c.dt_max);
        let _ = writeln!(s, "integrator.adaptive = {}", c.adaptive);
        let _ = writeln!(s, "integrator.nls_scheme = {}", c.nls_scheme.name());
        let _ = writeln!(s, "integrator.fluid_scheme = {}", c.fluid_scheme.name());
        let _ = writeln!(s, "integrator.dealias = {}", c.dealias);
        let _ = writeln!(s, "ic.family = {}", self.ic.family());
        match &self.ic {
            InitialCondition::Smooth(sp) => {
                let _ = writeln!(s, "ic.psi_amp = {}", sp.psi_amp);
                let _ = writeln!(s, "ic.u_amp = {}", sp.u_amp);
                let _ = writeln!(s, "ic.rho_amp = {}", sp.rho_amp);
            }
            InitialCondition::PlaneWave(w) => {
                let _ = writeln!(s, "ic.k = {}", ints(&w.k));
                let _ = writeln!(s, "ic.a = {}", f(&[w.a.re, w.a.im]));
                let _ = writeln!(s, "ic.velocity = {}", f(&w.velocity));
                let _ = writeln!(s, "ic.rho = {}", w.rho);
            }
            InitialCondition::Modulated(m) => {
                let _ = writeln!(s, "ic.psi_amp = {}", m.psi_amp);
                let _ = writeln!(s, "ic.psi_mod = {}", m.psi_mod);
                let _ = writeln!(s, "ic.rho_mean = {}", m.rho_mean);
                let _ = writeln!(s, "ic.rho_mod = {}", m.rho_mod);
            }
            InitialCondition::Random { spec, seed } => {
                let _ = writeln!(s, "ic.psi_amp = {}", spec.psi_amp);
                let _ = writeln!(s, "ic.u_amp = {}", spec.u_amp);
                let _ = writeln!(s, "ic.rho_amp = {}", spec.rho_amp);
                let _ = writeln!(s, "ic.max_mode = {}", spec.max_mode);
                let _ = writeln!(s, "ic.seed = {seed}");
            }
        }
        let o = &self.output;
        let _ = writeln!(s, "output.dir = {}", o.dir.display());
        let _ = writeln!(s, "output.snapshot_every = {}", o.snapshot_every);
        let _ = writeln!(s, "output.csv_every = {}", o.csv_every);
        let e = &self.experiment;
        let _ = writeln!(s, "experiment.horizon = {}", e.horizon);
        let _ = writeln!(s, "experiment.target = {}", e.target.name());
        let _ = writeln!(s, "experiment.mode = {}", ints(&e.mode));
        let _ = writeln!(s, "experiment.amplitudes = {}", f(&e.amplitudes));
        let _ = writeln!(s, "experiment.samples = {}", e.samples);
        let _ = writeln!(s, "experiment.seed = {}", e.seed);
        let _ = writeln!(s, "experiment.tol = {}", e.tol);
        let _ = writeln!(s, "experiment.refinements = {}", e.refinements);
        s
    }
}

struct Entry {
    value: String,
    line: usize,
}

/// Typed access to the raw entries; records errors instead of failing fast.
struct Reader {
    entries: BTreeMap<String, Entry>,
    used: BTreeSet<String>,
    errors: Vec<String>,
}

impl Reader {
    fn line_of(&self, key: &str) -> Option<usize> {
        self.entries.get(key).map(|e| e.line)
    }

    fn error(&mut self, key: &str, msg: impl std::fmt::Display) {
        let text = match self.line_of(key) {
            Some(line) => format!("line {line}: {key}: {msg}"),
            None => format!("{key}: {msg}"),
        };
        self.errors.push(text);
    }

    fn raw(&mut self, key: &str) -> Option<(String, usize)> {
        self.used.insert(key.to_string());
        self.entries.get(key).map(|e| (e.value.clone(), e.line))
    }

    fn scalar<T: FromStr>(&mut self, key: &str, what: &str, default: T) -> T {
        match self.raw(key) {
            None => default,
            Some((v, _)) => match v.parse::<T>() {
                Ok(x) => x,
                Err(_) => {
                    self.error(key, format!("expected {what}, got `{v}`"));
                    default
                }
            },
        }
    }

    fn f64(&mut self, key: &str, default: f64) -> f64 {
        let v = self.scalar(key, "a number", default);
        if !v.is_finite() {
            self.error(key, "value must be finite");
            return default;
        }
        v
    }

    fn list<T: FromStr + Clone>(&mut self, key: &str, what: &str, default: &[T]) -> Vec<T> {
        match self.raw(key) {
            None => default.to_vec(),
            Some((v, _)) => {
                let parsed: std::result::Result<Vec<T>, _> =
                    v.split(',').map(|x| x.trim().parse::<T>()).collect();
                match parsed {
                    Ok(x) if !x.is_empty() => x,
                    _ => {
                        self.error(key, format!("expected a comma-separated list of {what}, got `{v}`"));
                        default.to_vec()
                    }
                }
            }
        }
    }

    fn f64_list(&mut self, key: &str, default: &[f64]) -> Vec<f64> {
        let v = self.list(key, "numbers", default);
        if v.iter().any(|x| !x.is_finite()) {
            self.error(key, "values must be finite");
            return default.to_vec();
        }
        v
    }

    fn word(&mut self, key: &str, default: &str) -> String {
        self.raw(key).map_or_else(|| default.to_string(), |(v, _)| v)
    }
}

fn lex(text: &str) -> (BTreeMap<String, Entry>, Vec<String>) {
    let mut entries = BTreeMap::new();
    let mut errors = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            errors.push(format!("line {line}: expected `section.key = value`, got `{content}`"));
            continue;
        };
        let key = key.trim();
        let value = value.trim();
        let valid_key = matches!(key.split_once('.'), Some((s, k)) if !s.is_empty() && !k.is_empty() && !k.contains('.'));
        if !valid_key {
            errors.push(format!("line {line}: key `{key}` must have the form `section.key`"));
            continue;
        }
        if value.is_empty() {
            errors.push(format!("line {line}: {key}: missing value"));
            continue;
        }
        if let Some(prev) = entries.get(key) {
            let prev: &Entry = prev;
            errors.push(format!("line {line}: {key}: duplicate key (first set on line {})", prev.line));
            continue;
        }
        entries.insert(key.to_string(), Entry { value: value.to_string(), line });
    }
    (entries, errors)
}

/// Parse and validate a configuration. All problems are collected into one
/// `Error::Config`, each prefixed with its line number where it has one.
pub fn parse_config(text: &str) -> Result<Config> {
    let (entries, errors) = lex(text);
    let mut r = Reader { entries, used: BTreeSet::new(), errors };
    let defaults = Config::default();

    // grid: the dimension comes from grid.d, else from the length of grid.n
    let d_given = r.line_of("grid.d").is_some();
    let d: usize = r.scalar("grid.d", "an integer", 0);
    let n: Vec<usize> = r.list("grid.n", "integers", &[]);
    let dim = if d_given {
        if (1..=3).contains(&d) {
            d
        } else {
            r.error("grid.d", format!("dimension must be 1, 2 or 3, got {d}"));
            2
        }
    } else if n.is_empty() {
        2
    } else {
        n.len()
    };
    let n = if n.is_empty() { vec![64; dim] } else { n };
    let len = r.f64_list("grid.len", &vec![2.0 * PI; dim]);
    if n.len() != dim {
        r.error("grid.n", format!("needs {dim} entries, got {}", n.len()));
    } else if len.len() != dim {
        r.error("grid.len", format!("needs {dim} entries, got {}", len.len()));
    } else if let Err(e) = Grid::new(&n, &len) {
        r.error("grid.n", e);
    }
    let grid = GridConfig { n, len };

    // params
    let dp = defaults.params;
    let params = Params {
        lambda: r.f64("params.lambda", dp.lambda),
        mu: r.f64("params.mu", dp.mu),
        nu: r.f64("params.nu", dp.nu),
        m: r.f64("params.m", dp.m),
        big_m: r.f64("params.M", dp.big_m),
        epsilon: r.f64("params.epsilon", dp.epsilon),
        delta: r.f64("params.delta", dp.delta),
        gamma: r.f64("params.gamma", dp.gamma),
    };
    for (key, msg) in params.violations() {
        r.error(&format!("params.{key}"), msg);
    }

    // integrator
    let di = defaults.integrator;
    let nls = r.word("integrator.nls_scheme", di.nls_scheme.name());
    let fluid = r.word("integrator.fluid_scheme", di.fluid_scheme.name());
    let integrator = StepConfig {
        dt_init: r.f64("integrator.dt", di.dt_init),
        cfl: r.f64("integrator.cfl", di.cfl),
        dt_min: r.f64("integrator.dt_min", di.dt_min),
        dt_max: r.f64("integrator.dt_max", di.dt_max),
        adaptive: r.scalar("integrator.adaptive", "true or false", di.adaptive),
        nls_scheme: NlsScheme::parse(&nls).unwrap_or_else(|| {
            r.error("integrator.nls_scheme", format!("unknown scheme `{nls}` (lawson-rk4, lawson-rk2)"));
            di.nls_scheme
        }),
        fluid_scheme: FluidScheme::parse(&fluid).unwrap_or_else(|| {
            r.error("integrator.fluid_scheme", format!("unknown scheme `{fluid}` (heun-cn, euler-imex)"));
            di.fluid_scheme
        }),
        dealias: r.scalar("integrator.dealias", "true or false", di.dealias),
    };
    if !(integrator.dt_min > 0.0 && integrator.dt_min <= integrator.dt_init) {
        r.error("integrator.dt_min", "must satisfy 0 < dt_min <= dt");
    }
    if integrator.dt_init > integrator.dt_max {
        r.error("integrator.dt_max", "must satisfy dt <= dt_max");
    }
    if !(integrator.cfl > 0.0 && integrator.cfl <= 1.0) {
        r.error("integrator.cfl", "cfl must lie in (0, 1]");
    }

    // initial condition
    let family = r.word("ic.family", "smooth");
    let ic = match family.as_str() {
        "smooth" => {
            let sd = SmoothSpec::default();
            InitialCondition::Smooth(SmoothSpec {
                psi_amp: r.f64("ic.psi_amp", sd.psi_amp),
                u_amp: r.f64("ic.u_amp", sd.u_amp),
                rho_amp: r.f64("ic.rho_amp", sd.rho_amp),
            })
        }
        "plane-wave" => {
            let k: Vec<i64> = r.list("ic.k", "integers", &vec![1; dim]);
            let a = r.f64_list("ic.a", &[0.5, 0.0]);
            let velocity = r.f64_list("ic.velocity", &vec![0.0; dim]);
            let rho = r.f64("ic.rho", params.rho_ref());
            if k.len() != dim {
                r.error("ic.k", format!("needs {dim} entries"));
            }
            if a.len() != 2 {
                r.error("ic.a", "needs two entries (real, imaginary)");
            }
            if velocity.len() != dim {
                r.error("ic.velocity", format!("needs {dim} entries"));
            }
            let a = Complex64::new(a[0], a.get(1).copied().unwrap_or(0.0));
            InitialCondition::PlaneWave(PlaneWave { k, a, velocity, rho })
        }
        "modulated" => {
            let md = ModulatedSpec::default();
            InitialCondition::Modulated(ModulatedSpec {
                psi_amp: r.f64("ic.psi_amp", md.psi_amp),
                psi_mod: r.f64("ic.psi_mod", md.psi_mod),
                rho_mean: r.f64("ic.rho_mean", md.rho_mean),
                rho_mod: r.f64("ic.rho_mod", md.rho_mod),
            })
        }
        "random" => {
            let rd = RandomStateSpec::default();
            let spec = RandomStateSpec {
                psi_amp: r.f64("ic.psi_amp", rd.psi_amp),
                u_amp: r.f64("ic.u_amp", rd.u_amp),
                rho_amp: r.f64("ic.rho_amp", rd.rho_amp),
                max_mode: r.scalar("ic.max_mode", "an integer", rd.max_mode),
            };
            if spec.max_mode < 1 {
                r.error("ic.max_mode", "must be at least 1");
            }
            InitialCondition::Random { spec, seed: r.scalar("ic.seed", "a non-negative integer", 0) }
        }
        other => {
            r.error("ic.family", format!("unknown family `{other}` (smooth, plane-wave, modulated, random)"));
            defaults.ic.clone()
        }
    };

    // output
    let output = OutputConfig {
        dir: PathBuf::from(r.word("output.dir", &defaults.output.dir.to_string_lossy())),
        snapshot_every: r.scalar("output.snapshot_every", "a non-negative integer", 0),
        csv_every: r.scalar("output.csv_every", "a positive integer", 1),
    };
    if output.csv_every == 0 {
        r.error("output.csv_every", "must be at least 1");
    }

    // experiment
    let de = defaults.experiment;
    let target = r.word("experiment.target", de.target.name());
    let experiment = ExperimentConfig {
        horizon: r.f64("experiment.horizon", de.horizon),
        target: PerturbTarget::parse(&target).unwrap_or_else(|| {
            r.error("experiment.target", format!("unknown target `{target}` (psi, u, rho, all)"));
            de.target
        }),
        mode: r.list("experiment.mode", "integers", &de.mode),
        amplitudes: r.f64_list("experiment.amplitudes", &de.amplitudes),
        samples: r.scalar("experiment.samples", "a positive integer", de.samples),
        seed: r.scalar("experiment.seed", "a non-negative integer", de.seed),
        tol: r.f64("experiment.tol", de.tol),
        refinements: r.scalar("experiment.refinements", "a non-negative integer", de.refinements),
    };
    if experiment.horizon < 0.0 {
        r.error("experiment.horizon", "must be non-negative");
    }
    if experiment.mode.len() < dim {
        r.error("experiment.mode", format!("needs at least {dim} entries"));
    }
    if experiment.amplitudes.iter().any(|&a| a < 0.0) {
        r.error("experiment.amplitudes", "must be non-negative");
    }
    if experiment.samples == 0 {
        r.error("experiment.samples", "must be at least 1");
    }
    if experiment.tol < MIN_TOL {
        r.error("experiment.tol", format!("must be at least {MIN_TOL:e}"));
    }

    let unknown: Vec<(usize, String)> = r
        .entries
        .iter()
        .filter(|(k, _)| !r.used.contains(*k))
        .map(|(k, e)| (e.line, k.clone()))
        .collect();
    for (line, key) in unknown {
        let hint = if key.starts_with("ic.") { format!(" for family `{family}`") } else { String::new() };
        r.errors.push(format!("line {line}: unknown key `{key}`{hint}"));
    }

    if !r.errors.is_empty() {
        r.errors.sort_by_key(|e| {
            e.strip_prefix("line ")
                .and_then(|rest| rest.split(':').next())
                .and_then(|n| n.parse::<usize>().ok())
                .unwrap_or(0)
        });
        return Err(Error::Config(r.errors));
    }
    Ok(Config { grid, params, integrator, ic, output, experiment })
}

pub fn read_config(path: &std::path::Path) -> Result<Config> {
    parse_config(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn messages(text: &str) -> Vec<String> {
        match parse_config(text) {
            Err(Error::Config(m)) => m,
            other => panic!("expected config errors, got {other:?}"),
        }
    }

    #[test]
    fn empty_text_gives_defaults() {
        let c = parse_config("# nothing here\n\n").unwrap();
        assert_eq!(c, Config::default());
        assert_eq!(c.grid.n, vec![64, 64]);
        assert_eq!(c.build_grid().unwrap().dim(), 2);
    }

    #[test]
    fn epsilon_above_m_is_rejected() {
        let m = messages("params.m = 1.0\nparams.epsilon = 2.0\n");
        assert_eq!(m.len(), 1);
        assert!(m[0].starts_with("line 2: params.epsilon"));
        assert!(m[0].contains("epsilon must lie in (0, m)"));
    }

    #[test]
    fn errors_name_lines_and_keys() {
        let m = messages("grid.d = 3\ngrid.n = 16, 16\nparams.mu = abc\nfoo.bar = 1\nnot a pair\nparams.mu = 2");
        assert!(m.iter().any(|e| e.starts_with("line 2: grid.n")));
        assert!(m.iter().any(|e| e.starts_with("line 3: params.mu: expected a number")));
        assert!(m.iter().any(|e| e.contains("line 4: unknown key `foo.bar`")));
        assert!(m.iter().any(|e| e.starts_with("line 5: expected `section.key = value`")));
        assert!(m.iter().any(|e| e.contains("duplicate key")));
    }

    #[test]
    fn family_keys_are_checked() {
        let m = messages("ic.family = smooth\nic.k = 1, 1\n");
        assert!(m[0].contains("unknown key `ic.k` for family `smooth`"));
        let c = parse_config("ic.family = plane-wave\nic.k = 1, -2\nic.a = 0.5, 0.25\nic.rho = 1.0\n").unwrap();
        match c.ic {
            InitialCondition::PlaneWave(w) => {
                assert_eq!(w.k, vec![1, -2]);
                assert_eq!(w.a, Complex64::new(0.5, 0.25));
                assert_eq!(w.velocity, vec![0.0, 0.0]);
            }
            other => panic!("{other:?}"),
        }
        let m = messages("ic.family = vortex\n");
        assert!(m[0].contains("unknown family"));
    }

    #[test]
    fn dimension_follows_grid_n() {
        let c = parse_config("grid.n = 8, 8, 8\n").unwrap();
        assert_eq!(c.grid.len.len(), 3);
        let m = messages("grid.n = 8, 8\ngrid.len = 1.0\n");
        assert!(m[0].starts_with("line 2: grid.len"));
        let m = messages("grid.n = 7, 8\n");
        assert!(m[0].starts_with("line 1: grid.n"));
    }

    #[test]
    fn comments_and_whitespace() {
        let c = parse_config("  params.nu=0.2   # viscosity\n#params.nu = 9\nintegrator.adaptive = true\n").unwrap();
        assert_eq!(c.params.nu, 0.2);
        assert!(c.integrator.adaptive);
    }

    fn families() -> impl Strategy<Value = InitialCondition> {
        prop_oneof![
            (0.1f64..2.0, 0.0f64..1.0, 0.0f64..0.2).prop_map(|(a, b, c)| InitialCondition::Smooth(SmoothSpec {
                psi_amp: a,
                u_amp: b,
                rho_amp: c
            })),
            (-3i64..3, -3i64..3, -1.0f64..1.0, -1.0f64..1.0, 0.8f64..1.2).prop_map(|(k0, k1, re, im, rho)| {
                InitialCondition::PlaneWave(PlaneWave {
                    k: vec![k0, k1],
                    a: Complex64::new(re, im),
                    velocity: vec![im, re],
                    rho,
                })
            }),
            (0.1f64..3.0, 0.0f64..1.0).prop_map(|(a, m)| InitialCondition::Modulated(ModulatedSpec {
                psi_amp: a,
                psi_mod: m,
                ..ModulatedSpec::default()
            })),
            (1i64..5, any::<u64>()).prop_map(|(mm, seed)| InitialCondition::Random {
                spec: RandomStateSpec { max_mode: mm, ..RandomStateSpec::default() },
                seed
            }),
        ]
    }

    proptest! {
        #[test]
        fn text_roundtrip(
            lambda in 1e-3f64..10.0,
            nu in 1e-4f64..1.0,
            m in 0.1f64..1.0,
            spread in 0.0f64..2.0,
            eps_frac in 0.01f64..0.99,
            delta in 0.01f64..0.49,
            dt in 1e-5f64..1e-2,
            adaptive in any::<bool>(),
            ic in families(),
            amps in proptest::collection::vec(0.0f64..1.0, 1..4),
            len in 0.5f64..10.0,
        ) {
            let c = Config {
                grid: GridConfig { n: vec![16, 32], len: vec![len, 2.0 * len] },
                params: Params {
                    lambda, nu, m, big_m: m + spread, epsilon: eps_frac * m, delta,
                    ..Params::default()
                },
                integrator: StepConfig { dt_init: dt, dt_min: dt / 10.0, dt_max: dt * 10.0, adaptive, ..StepConfig::default() },
                ic,
                output: OutputConfig { dir: PathBuf::from("runs/a b"), snapshot_every: 7, csv_every: 3 },
                experiment: ExperimentConfig { amplitudes: amps, ..ExperimentConfig::default() },
            };
            let back = parse_config(&c.to_text()).unwrap();
            prop_assert_eq!(&back, &c);
            prop_assert_eq!(back.to_text(), c.to_text());
        }
    }
}
