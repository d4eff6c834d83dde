//! Initial-condition families. All of them are smooth and band-limited
//! inside the 2/3-rule band.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid, RealField, RealVectorField, VectorField};
use crate::model::{Params, State};
use crate::spectral::{SpectralPlan, Spectrum};

/// `ψ = a e^{ik·x}`, uniform velocity and density. `k` holds integer mode
/// numbers; the physical wavevector is `2π k_i / len_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneWave {
    pub k: Vec<i64>,
    pub a: Complex64,
    pub velocity: Vec<f64>,
    pub rho: f64,
}

impl PlaneWave {
    pub fn physical_k(&self, grid: &Grid) -> Vec<f64> {
        self.k
            .iter()
            .zip(grid.len())
            .map(|(&m, &l)| 2.0 * PI * m as f64 / l)
            .collect()
    }
}

pub fn plane_wave_state(grid: &Arc<Grid>, w: &PlaneWave) -> Result<State> {
    let d = grid.dim();
    if w.k.len() != d || w.velocity.len() != d {
        return Err(Error::InvalidState(format!(
            "plane wave needs {d} wavevector and velocity components"
        )));
    }
    for (axis, (&m, &n)) in w.k.iter().zip(grid.n()).enumerate() {
        if (m.unsigned_abs() as f64) > n as f64 / 3.0 {
            return Err(Error::InvalidState(format!(
                "plane-wave mode {m} on axis {axis} is outside the resolved band"
            )));
        }
    }
    let k = w.physical_k(grid);
    let psi = ComplexField::from_fn(grid, |x| {
        let phase: f64 = (0..d).map(|a| k[a] * x[a]).sum();
        w.a * Complex64::new(0.0, phase).exp()
    });
    let comps = w.velocity.iter().map(|&v| RealField::constant(grid, v)).collect();
    let u = VectorField::from_components(comps)?;
    State::new(0.0, psi, u, RealField::constant(grid, w.rho))
}

/// Low-mode trigonometric data: a modulated condensate, a Taylor-Green type
/// vortex array and a gently varying density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothSpec {
    pub psi_amp: f64,
    pub u_amp: f64,
    /// Relative density modulation around the reference density.
    pub rho_amp: f64,
}

impl Default for SmoothSpec {
    fn default() -> Self {
        SmoothSpec { psi_amp: 1.0, u_amp: 0.3, rho_amp: 0.1 }
    }
}

pub fn smooth_state(grid: &Arc<Grid>, spec: &SmoothSpec, params: &Params) -> Result<State> {
    let d = grid.dim();
    let len = grid.len().to_vec();
    let theta = move |x: [f64; 3]| {
        let mut t = [0.0; 3];
        for a in 0..d {
            t[a] = 2.0 * PI * x[a] / len[a];
        }
        t
    };
    let psi = ComplexField::from_fn(grid, |x| {
        let t = theta(x);
        let second = if d > 1 { t[1] } else { 2.0 * t[0] };
        Complex64::new(1.0 + 0.3 * t[0].cos(), 0.2 * second.sin() + 0.1 * (t[0] + t[2]).cos())
            * spec.psi_amp
    });
    let u = VectorField::from_fn(grid, |x| {
        let t = theta(x);
        match d {
            1 => [spec.u_amp, 0.0, 0.0],
            2 => [
                spec.u_amp * t[0].sin() * t[1].cos(),
                -spec.u_amp * t[0].cos() * t[1].sin(),
                0.0,
            ],
            _ => [
                spec.u_amp * t[0].sin() * t[1].cos() * t[2].cos(),
                -spec.u_amp * t[0].cos() * t[1].sin() * t[2].cos(),
                0.0,
            ],
        }
    });
    let rho_ref = params.rho_ref();
    let rho = RealField::from_fn(grid, |x| {
        let t = theta(x);
        let phase = if d > 1 { t[0] + t[1] } else { t[0] };
        rho_ref * (1.0 + spec.rho_amp * phase.cos())
    });
    State::new(0.0, psi, u, rho)
}

/// Condensate and density both modulated along the first axis:
/// `ψ = A(1 + b cos θ)`, `ρ = ρ₀(1 + c cos θ)`, fluid at rest. With `b`
/// close to one the mass-exchange source is negative where the density is
/// smallest, which drives the density toward the floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulatedSpec {
    pub psi_amp: f64,
    pub psi_mod: f64,
    pub rho_mean: f64,
    pub rho_mod: f64,
}

impl Default for ModulatedSpec {
    fn default() -> Self {
        ModulatedSpec { psi_amp: 2.0, psi_mod: 0.9, rho_mean: 1.0, rho_mod: 0.2 }
    }
}

pub fn modulated_state(grid: &Arc<Grid>, spec: &ModulatedSpec) -> Result<State> {
    let l0 = grid.len()[0];
    let psi = ComplexField::from_fn(grid, |x| {
        Complex64::new(spec.psi_amp * (1.0 + spec.psi_mod * (2.0 * PI * x[0] / l0).cos()), 0.0)
    });
    let rho = RealField::from_fn(grid, |x| {
        spec.rho_mean * (1.0 + spec.rho_mod * (2.0 * PI * x[0] / l0).cos())
    });
    State::new(0.0, psi, VectorField::zeros(grid), rho)
}

/// Random band-limited data for property tests and the validator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomStateSpec {
    pub psi_amp: f64,
    pub u_amp: f64,
    /// Relative density fluctuation, kept inside `[m, M]`.
    pub rho_amp: f64,
    /// Largest integer mode number per axis.
    pub max_mode: i64,
}

impl Default for RandomStateSpec {
    fn default() -> Self {
        RandomStateSpec { psi_amp: 1.0, u_amp: 0.5, rho_amp: 0.1, max_mode: 3 }
    }
}

/// Random spectrum with Gaussian coefficients on modes `|m_i| <= max_mode`
/// (and inside the 2/3 band), weighted by `exp(-|m|²/max_mode²)`.
fn random_spectrum(plan: &SpectralPlan, rng: &mut ChaCha8Rng, max_mode: i64, mean_zero: bool) -> Spectrum {
    let grid = plan.grid();
    let count = grid.point_count();
    let scale = (max_mode * max_mode).max(1) as f64;
    let mut spec = vec![Complex64::default(); count];
    for (idx, coeff) in spec.iter_mut().enumerate() {
        let ijk = grid.unravel(idx);
        let mut m2 = 0i64;
        let mut inside = plan.is_resolved(idx);
        for a in 0..grid.dim() {
            let m = grid.mode_indices(a)[ijk[a]];
            inside &= m.abs() <= max_mode;
            m2 += m * m;
        }
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        if !inside || (mean_zero && m2 == 0) {
            continue;
        }
        *coeff = Complex64::new(re, im) * (-(m2 as f64) / scale).exp();
    }
    spec
}

/// Random smooth complex field with max modulus `amp`.
pub fn random_complex_field(
    plan: &SpectralPlan,
    rng: &mut ChaCha8Rng,
    amp: f64,
    max_mode: i64,
    mean_zero: bool,
) -> ComplexField {
    let f: ComplexField = plan.inverse(random_spectrum(plan, rng, max_mode, mean_zero));
    let peak = f.max_abs();
    if peak == 0.0 {
        f
    } else {
        f.map(|v| v * (amp / peak))
    }
}

/// Random smooth real field with max modulus `amp`.
pub fn random_real_field(
    plan: &SpectralPlan,
    rng: &mut ChaCha8Rng,
    amp: f64,
    max_mode: i64,
    mean_zero: bool,
) -> RealField {
    let f: RealField = plan.inverse(random_spectrum(plan, rng, max_mode, mean_zero));
    let peak = f.max_abs();
    if peak == 0.0 {
        f
    } else {
        f.scaled(amp / peak)
    }
}

pub fn random_state(
    grid: &Arc<Grid>,
    spec: &RandomStateSpec,
    params: &Params,
    seed: u64,
) -> Result<State> {
    let plan = SpectralPlan::new(grid);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let psi = random_complex_field(&plan, &mut rng, spec.psi_amp, spec.max_mode, false);
    let comps = (0..grid.dim())
        .map(|_| random_real_field(&plan, &mut rng, 1.0, spec.max_mode, false))
        .collect();
    let raw: RealVectorField = VectorField::from_components(comps)?;
    let (u, _) = plan.leray_project(&raw)?;
    let peak = u.max_abs();
    let u = if peak > 0.0 { u.scaled(spec.u_amp / peak) } else { u };
    let half_width = 0.5 * (params.big_m - params.m);
    let amp = (spec.rho_amp * params.rho_ref()).min(half_width);
    let fluct = random_real_field(&plan, &mut rng, amp, spec.max_mode, true);
    let rho = fluct.map(|v| params.rho_ref() + v);
    State::new(0.0, psi, u, rho)
}

/// A named initial-condition family with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    Smooth(SmoothSpec),
    PlaneWave(PlaneWave),
    Modulated(ModulatedSpec),
    Random { spec: RandomStateSpec, seed: u64 },
}

impl InitialCondition {
    pub fn family(&self) -> &'static str {
        match self {
            InitialCondition::Smooth(_) => "smooth",
            InitialCondition::PlaneWave(_) => "plane-wave",
            InitialCondition::Modulated(_) => "modulated",
            InitialCondition::Random { .. } => "random",
        }
    }

    pub fn build(&self, grid: &Arc<Grid>, params: &Params) -> Result<State> {
        match self {
            InitialCondition::Smooth(s) => smooth_state(grid, s, params),
            InitialCondition::PlaneWave(w) => plane_wave_state(grid, w),
            InitialCondition::Modulated(m) => modulated_state(grid, m),
            InitialCondition::Random { spec, seed } => random_state(grid, spec, params, *seed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_state_is_admissible_and_reproducible() {
        let g = Grid::new(&[16, 16], &[2.0 * PI, 2.0 * PI]).unwrap();
        let plan = SpectralPlan::new(&g);
        let p = Params::default();
        let a = random_state(&g, &RandomStateSpec::default(), &p, 3).unwrap();
        let b = random_state(&g, &RandomStateSpec::default(), &p, 3).unwrap();
        assert_eq!(a, b);
        a.check_invariants(&plan).unwrap();
        assert!(a.rho.min() >= p.m && a.rho.max() <= p.big_m);
        // band-limited: truncation leaves it unchanged
        let d = plan.dealias(&a.psi).unwrap();
        assert!(d.sub(&a.psi).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn smooth_state_fits_bounds() {
        let p = Params::default();
        for n in [vec![16], vec![16, 16], vec![8, 8, 8]] {
            let len = vec![2.0 * PI; n.len()];
            let g = Grid::new(&n, &len).unwrap();
            let s = smooth_state(&g, &SmoothSpec::default(), &p).unwrap();
            assert!(s.rho.min() >= p.m && s.rho.max() <= p.big_m);
            let plan = SpectralPlan::new(&g);
            s.check_invariants(&plan).unwrap();
        }
    }

    #[test]
    fn plane_wave_outside_band_rejected() {
        let g = Grid::new(&[8, 8], &[2.0 * PI, 2.0 * PI]).unwrap();
        let w = PlaneWave { k: vec![3, 0], a: Complex64::new(1.0, 0.0), velocity: vec![0.0, 0.0], rho: 1.0 };
        assert!(plane_wave_state(&g, &w).is_err());
    }
}
