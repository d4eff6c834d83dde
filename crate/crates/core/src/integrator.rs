//! Time stepping: Strang splitting of the Schrödinger flow around a combined
//! fluid + density step, with fixed or CFL-adaptive step sizes.
//!
//! One step of size `dt` is
//! 1. half a Schrödinger step with `u` frozen, linear part `((Λ+i)/2)Δ`
//!    integrated exactly and the rest by a Lawson Runge–Kutta scheme;
//! 2. a full Heun step for momentum and density with `ψ` frozen, viscosity
//!    `(ν/ρ̄)Δ` treated by Crank–Nicolson and the pressure eliminated by the
//!    density-weighted projection;
//! 3. the second Schrödinger half step with the new velocity.
//!
//! The density mean is then shifted so the fluid gains exactly the mass the
//! condensate lost over the step.

use std::sync::Arc;

use num_complex::Complex64;

use crate::diagnostics::{compute_record, DiagnosticsRecord};
use crate::error::{Error, FloorViolation, Result};
use crate::grid::{ComplexField, Grid, RealField, RealVectorField, VectorField};
use crate::model::{
    check_floor, continuity_source_with, density_transport, nls_nonlinear, nse_rhs_with, apply_b,
    Params, State,
};
use crate::norm::l2_sq;
use crate::spectral::{SpectralPlan, Spectrum};

/// Exponential integrator used for the Schrödinger sub-steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NlsScheme {
    #[default]
    LawsonRk4,
    LawsonRk2,
}

impl NlsScheme {
    pub fn name(self) -> &'static str {
        match self {
            NlsScheme::LawsonRk4 => "lawson-rk4",
            NlsScheme::LawsonRk2 => "lawson-rk2",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "lawson-rk4" => Some(NlsScheme::LawsonRk4),
            "lawson-rk2" => Some(NlsScheme::LawsonRk2),
            _ => None,
        }
    }
}

/// Momentum / density scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FluidScheme {
    /// Heun predictor-corrector, Crank–Nicolson viscosity.
    #[default]
    HeunCn,
    /// Forward Euler, backward Euler viscosity. First order; for comparison runs.
    EulerImex,
}

impl FluidScheme {
    pub fn name(self) -> &'static str {
        match self {
            FluidScheme::HeunCn => "heun-cn",
            FluidScheme::EulerImex => "euler-imex",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "heun-cn" => Some(FluidScheme::HeunCn),
            "euler-imex" => Some(FluidScheme::EulerImex),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    /// Step size in fixed mode; first trial step in adaptive mode.
    pub dt_init: f64,
    pub cfl: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub adaptive: bool,
    pub nls_scheme: NlsScheme,
    pub fluid_scheme: FluidScheme,
    /// 2/3-rule truncation of nonlinear terms.
    pub dealias: bool,
}

impl Default for StepConfig {
    fn default() -> Self {
        StepConfig {
            dt_init: 1e-3,
            cfl: 0.4,
            dt_min: 1e-8,
            dt_max: 1e-2,
            adaptive: false,
            nls_scheme: NlsScheme::default(),
            fluid_scheme: FluidScheme::default(),
            dealias: true,
        }
    }
}

impl StepConfig {
    pub fn fixed(dt: f64) -> Self {
        StepConfig { dt_init: dt, dt_min: dt.min(1e-8), dt_max: dt, ..StepConfig::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.dt_min > 0.0
            && self.dt_min <= self.dt_init
            && self.dt_init <= self.dt_max
            && self.dt_max.is_finite();
        if !ok {
            return Err(Error::InvalidParams(
                "time steps must satisfy 0 < dt_min <= dt_init <= dt_max".into(),
            ));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::InvalidParams("cfl must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// `clamp(cfl·dx / (‖u‖∞ + c₀), dt_min, dt_max)` with `c₀ = max(1, k_max/2)`.
pub fn adaptive_dt(state: &State, config: &StepConfig) -> Result<f64> {
    let grid = state.grid();
    let c0 = (0.5 * grid.k_max()).max(1.0);
    let speed = state.u.max_abs();
    if !speed.is_finite() {
        return Err(Error::BlowUp { last_valid_t: state.t });
    }
    let bound = config.cfl * grid.min_dx() / (speed + c0);
    if bound < config.dt_min {
        return Err(Error::CflViolation { dt: config.dt_min, required: bound });
    }
    Ok(bound.min(config.dt_max))
}

/// Relative residual target of the pressure solve.
const PRESSURE_TOL: f64 = 1e-12;
const PRESSURE_MAX_ITER: usize = 500;

/// Reusable stepper for one grid, parameter set and step configuration.
#[derive(Debug)]
pub struct Integrator {
    plan: SpectralPlan,
    params: Params,
    config: StepConfig,
}

impl Integrator {
    pub fn new(grid: &Arc<Grid>, params: &Params, config: &StepConfig) -> Result<Self> {
        params.validate()?;
        config.validate()?;
        Ok(Self::unchecked(grid, params, config))
    }

    /// Skips parameter validation so limiting cases (`Λ = 0`, `ν = 0`) can be stepped.
    pub(crate) fn unchecked(grid: &Arc<Grid>, params: &Params, config: &StepConfig) -> Self {
        let plan = SpectralPlan::new(grid);
        let plan = if config.dealias { plan } else { plan.without_truncation() };
        Integrator { plan, params: *params, config: *config }
    }

    pub fn plan(&self) -> &SpectralPlan {
        &self.plan
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn config(&self) -> &StepConfig {
        &self.config
    }

    /// Validate an initial state and bring it onto the discrete solution
    /// space: density within `[m, M]`, velocity projected, fields truncated.
    pub fn prepare(&self, initial: &State) -> Result<State> {
        if !initial.is_finite() {
            return Err(Error::InvalidState("initial state has non-finite values".into()));
        }
        let (lo, hi) = (initial.rho.min(), initial.rho.max());
        if lo < self.params.m || hi > self.params.big_m {
            return Err(Error::InvalidState(format!(
                "initial density range [{lo}, {hi}] leaves [m, M] = [{}, {}]",
                self.params.m, self.params.big_m
            )));
        }
        let plan = &self.plan;
        let (u, _) = plan.leray_project(&plan.dealias_vector(&initial.u)?)?;
        State::new(initial.t, plan.dealias(&initial.psi)?, u, plan.dealias(&initial.rho)?)
    }

    pub fn adaptive_dt(&self, state: &State) -> Result<f64> {
        adaptive_dt(state, &self.config)
    }

    /// Advance `state` by `dt > 0`.
    pub fn step(&self, state: &State, dt: f64) -> Result<State> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParams(format!("time step must be positive, got {dt}")));
        }
        self.step_signed(state, dt)
    }

    /// Same as `step` but accepts negative `dt` (only meaningful without dissipation).
    pub(crate) fn step_signed(&self, state: &State, dt: f64) -> Result<State> {
        let t = state.t;
        let out = self.step_inner(state, dt).map_err(|e| match e {
            Error::PressureSolve { residual, .. } if !residual.is_finite() => {
                Error::BlowUp { last_valid_t: t }
            }
            e => e,
        })?;
        if !out.is_finite() {
            return Err(Error::BlowUp { last_valid_t: t });
        }
        check_floor(&out, &self.params)?;
        Ok(out)
    }

    fn step_inner(&self, state: &State, dt: f64) -> Result<State> {
        let psi_half = self.nls_substep(&state.psi, &state.u, 0.5 * dt)?;
        let (u1, mut rho1) = self.fluid_step(&psi_half, state, dt)?;
        let psi1 = self.nls_substep(&psi_half, &u1, 0.5 * dt)?;

        let lost = l2_sq(&state.psi) - l2_sq(&psi1);
        let gained = rho1.integral() - state.rho.integral();
        let shift = (lost - gained) / state.grid().volume();
        for r in rho1.values_mut() {
            *r += shift;
        }
        let (u1, _) = self.plan.leray_project(&u1)?;
        State::new(state.t + dt, psi1, u1, rho1)
    }

    /// `exp(-((Λ+i)/2)|k|² h)` per mode.
    fn linear_propagator(&self, h: f64) -> Vec<Complex64> {
        let c = Complex64::new(self.params.lambda, 1.0) * (-0.5 * h);
        self.plan.k_squared().iter().map(|&k2| (c * k2).exp()).collect()
    }

    fn nonlinear_spectrum(&self, v: &Spectrum, u: &RealVectorField) -> Result<Spectrum> {
        let psi: ComplexField = self.plan.inverse(v.clone());
        self.plan.forward(&nls_nonlinear(&self.plan, &psi, u, &self.params)?)
    }

    /// Schrödinger flow over `tau` with the velocity held fixed.
    fn nls_substep(&self, psi: &ComplexField, u: &RealVectorField, tau: f64) -> Result<ComplexField> {
        let v = self.plan.forward(psi)?;
        let e = self.linear_propagator(tau);
        let mul = |a: &[Complex64], b: &[Complex64]| -> Spectrum {
            a.iter().zip(b).map(|(x, y)| x * y).collect()
        };
        let lin = |a: &[Complex64], c: f64, b: &[Complex64]| -> Spectrum {
            a.iter().zip(b).map(|(x, y)| x + y * c).collect()
        };
        let out = match self.config.nls_scheme {
            NlsScheme::LawsonRk4 => {
                let eh = self.linear_propagator(0.5 * tau);
                let k1 = self.nonlinear_spectrum(&v, u)?;
                let v2 = mul(&eh, &lin(&v, 0.5 * tau, &k1));
                let k2 = self.nonlinear_spectrum(&v2, u)?;
                let ehv = mul(&eh, &v);
                let v3 = lin(&ehv, 0.5 * tau, &k2);
                let k3 = self.nonlinear_spectrum(&v3, u)?;
                let ev = mul(&e, &v);
                let v4 = lin(&ev, tau, &mul(&eh, &k3));
                let k4 = self.nonlinear_spectrum(&v4, u)?;
                (0..v.len())
                    .map(|i| {
                        ev[i] + tau / 6.0 * (e[i] * k1[i] + 2.0 * eh[i] * (k2[i] + k3[i]) + k4[i])
                    })
                    .collect()
            }
            NlsScheme::LawsonRk2 => {
                let k1 = self.nonlinear_spectrum(&v, u)?;
                let v1 = mul(&e, &lin(&v, tau, &k1));
                let k2 = self.nonlinear_spectrum(&v1, u)?;
                let base = mul(&e, &lin(&v, 0.5 * tau, &k1));
                lin(&base, 0.5 * tau, &k2)
            }
        };
        Ok(self.plan.inverse(out))
    }

    /// Explicit rates `(R_u, ∂tρ)` with the Crank–Nicolson part of the
    /// viscosity removed from `R_u`.
    fn fluid_rates(
        &self,
        psi: &ComplexField,
        u: &RealVectorField,
        rho: &RealField,
        t: f64,
    ) -> Result<(RealVectorField, RealField)> {
        let stage = State::new(t, psi.clone(), u.clone(), rho.clone())?;
        check_floor(&stage, &self.params)?;
        let b = apply_b(&self.plan, psi, u, &self.params)?;
        let w = nse_rhs_with(&self.plan, &stage, &b, &self.params)?;
        if !w.is_finite() {
            return Err(Error::BlowUp { last_valid_t: t });
        }
        let pw = weighted_projection(&self.plan, &w, rho)?;
        let lap = self.plan.vector_laplacian(u)?;
        let mut ru = pw;
        ru.axpy(-self.params.nu / self.params.rho_ref(), &lap)?;
        let ru = self.plan.dealias_vector(&ru)?;
        let mut drho = density_transport(&self.plan, rho, u)?;
        drho.axpy(1.0, &continuity_source_with(&self.plan, psi, &b, &self.params)?)?;
        Ok((ru, drho))
    }

    fn implicit_viscous(&self, rhs: &RealVectorField, alpha: f64) -> Result<RealVectorField> {
        let comps = rhs
            .components()
            .iter()
            .map(|c| self.plan.helmholtz_solve(c, alpha))
            .collect::<Result<Vec<_>>>()?;
        VectorField::from_components(comps)
    }

    fn fluid_step(&self, psi: &ComplexField, state: &State, dt: f64) -> Result<(RealVectorField, RealField)> {
        let visc = self.params.nu / self.params.rho_ref();
        let (u0, rho0, t) = (&state.u, &state.rho, state.t);
        let (ru0, drho0) = self.fluid_rates(psi, u0, rho0, t)?;
        match self.config.fluid_scheme {
            FluidScheme::EulerImex => {
                let mut rhs = u0.clone();
                rhs.axpy(dt, &ru0)?;
                let u1 = self.implicit_viscous(&rhs, visc * dt)?;
                let mut rho1 = rho0.clone();
                rho1.axpy(dt, &drho0)?;
                Ok((u1, rho1))
            }
            FluidScheme::HeunCn => {
                let alpha = 0.5 * visc * dt;
                let mut base = u0.clone();
                base.axpy(alpha, &self.plan.vector_laplacian(u0)?)?;

                let mut rhs = base.clone();
                rhs.axpy(dt, &ru0)?;
                let u_star = self.implicit_viscous(&rhs, alpha)?;
                let mut rho_star = rho0.clone();
                rho_star.axpy(dt, &drho0)?;

                let (ru1, drho1) = self.fluid_rates(psi, &u_star, &rho_star, t + dt)?;
                let mut rhs = base;
                rhs.axpy(0.5 * dt, &ru0)?;
                rhs.axpy(0.5 * dt, &ru1)?;
                let u1 = self.implicit_viscous(&rhs, alpha)?;
                let mut rho1 = rho0.clone();
                rho1.axpy(0.5 * dt, &drho0)?;
                rho1.axpy(0.5 * dt, &drho1)?;
                Ok((u1, rho1))
            }
        }
    }
}

fn dot(a: &RealField, b: &RealField) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum()
}

/// Density-weighted projection `w - ρ⁻¹∇p` with `∇·(ρ⁻¹∇p) = ∇·w`, solved by
/// conjugate gradients preconditioned with a scaled inverse Laplacian.
/// The removed part is orthogonal to divergence-free fields in the
/// `ρ`-weighted inner product.
pub fn weighted_projection(
    plan: &SpectralPlan,
    w: &RealVectorField,
    rho: &RealField,
) -> Result<RealVectorField> {
    let inv_rho = rho.map(|r| 1.0 / r);
    let rho_h = 1.0 / inv_rho.mean();
    let apply = |p: &RealField| -> Result<RealField> {
        let flux = plan.gradient(p)?.times_scalar(&inv_rho)?;
        Ok(plan.divergence(&flux)?.scaled(-1.0))
    };
    let precondition = |r: &RealField| -> Result<RealField> {
        Ok(plan.inverse_neg_laplacian(r)?.scaled(rho_h))
    };

    let b = plan.remove_null_modes(&plan.divergence(w)?.scaled(-1.0))?;
    let b_norm = dot(&b, &b).sqrt();
    if !b_norm.is_finite() {
        return Err(Error::PressureSolve { iterations: 0, residual: b_norm });
    }
    if b_norm == 0.0 {
        return Ok(w.clone());
    }
    let target = PRESSURE_TOL * b_norm;

    let mut p = precondition(&b)?;
    let mut r = b.sub(&apply(&p)?)?;
    let mut z = precondition(&r)?;
    let mut d = z.clone();
    let mut rz = dot(&r, &z);
    let mut res = dot(&r, &r).sqrt();
    let mut iterations = 0;
    while res > target {
        if iterations == PRESSURE_MAX_ITER || !res.is_finite() {
            return Err(Error::PressureSolve { iterations, residual: res / b_norm });
        }
        let ad = apply(&d)?;
        let step = rz / dot(&d, &ad);
        p.axpy(step, &d)?;
        r.axpy(-step, &ad)?;
        z = precondition(&r)?;
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        d = z.add(&d.scaled(beta))?;
        res = dot(&r, &r).sqrt();
        iterations += 1;
    }
    let mut out = w.clone();
    out.axpy(-1.0, &plan.gradient(&p)?.times_scalar(&inv_rho)?)?;
    Ok(out)
}

/// Why a run stopped.
#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Completed,
    DensityFloor(FloorViolation),
    BlowUp { last_valid_t: f64 },
    CflViolation { dt: f64, required: f64 },
}

impl Termination {
    fn from_event(e: Error) -> std::result::Result<Self, Error> {
        match e {
            Error::DensityFloor(v) => Ok(Termination::DensityFloor(v)),
            Error::BlowUp { last_valid_t } => Ok(Termination::BlowUp { last_valid_t }),
            Error::CflViolation { dt, required } => Ok(Termination::CflViolation { dt, required }),
            e => Err(e),
        }
    }

    pub fn is_completed(&self) -> bool {
        matches!(self, Termination::Completed)
    }

    /// The physics event as an error, `None` for a completed run.
    pub fn to_error(&self) -> Option<Error> {
        match self {
            Termination::Completed => None,
            Termination::DensityFloor(v) => Some(Error::DensityFloor(v.clone())),
            Termination::BlowUp { last_valid_t } => Some(Error::BlowUp { last_valid_t: *last_valid_t }),
            Termination::CflViolation { dt, required } => {
                Some(Error::CflViolation { dt: *dt, required: *required })
            }
        }
    }
}

/// Called after each accepted step (and once for the initial state) with the
/// step index, the state and its diagnostics.
pub trait Observer {
    fn observe(&mut self, step: usize, state: &State, record: &DiagnosticsRecord) -> Result<()>;
}

/// Keeps every `every`-th state, the initial state included.
#[derive(Debug, Clone)]
pub struct SnapshotRecorder {
    every: usize,
    pub states: Vec<State>,
}

impl SnapshotRecorder {
    pub fn new(every: usize) -> Self {
        SnapshotRecorder { every: every.max(1), states: Vec::new() }
    }
}

impl Observer for SnapshotRecorder {
    fn observe(&mut self, step: usize, state: &State, _: &DiagnosticsRecord) -> Result<()> {
        if step % self.every == 0 {
            self.states.push(state.clone());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    /// One record per accepted step, starting with the initial state.
    pub records: Vec<DiagnosticsRecord>,
    pub final_state: State,
    pub termination: Termination,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn steps(&self) -> usize {
        self.records.len() - 1
    }
}

/// Integrate from `initial` to `t_end`. Physics events end the run early and
/// are reported in `Trajectory::termination`; any other error is returned.
pub fn run(
    initial: &State,
    params: &Params,
    config: &StepConfig,
    t_end: f64,
    observers: &mut [&mut dyn Observer],
) -> Result<Trajectory> {
    let integ = Integrator::new(initial.grid(), params, config)?;
    integ.run(initial, t_end, observers)
}

impl Integrator {
    pub fn run(
        &self,
        initial: &State,
        t_end: f64,
        observers: &mut [&mut dyn Observer],
    ) -> Result<Trajectory> {
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return Err(Error::InvalidParams(format!("horizon must be non-negative, got {t_end}")));
        }
        let mut state = self.prepare(initial)?;
        state.t = 0.0;
        let initial_state = state.clone();
        let mut records = vec![compute_record(&self.plan, &self.params, &state, None)?];
        let mut notify = |step: usize, s: &State, r: &DiagnosticsRecord| -> Result<()> {
            for o in observers.iter_mut() {
                o.observe(step, s, r)?;
            }
            Ok(())
        };

        let fixed_steps = if self.config.adaptive || t_end == 0.0 {
            None
        } else {
            Some(((t_end / self.config.dt_init) * (1.0 - 1e-12)).ceil().max(1.0) as usize)
        };
        let mut termination = Termination::Completed;
        let mut n = 0usize;
        loop {
            let (dt, t_next) = match fixed_steps {
                Some(total) if n < total => {
                    let dt = t_end / total as f64;
                    let t_next = if n + 1 == total { t_end } else { (n + 1) as f64 * dt };
                    (t_next - state.t, t_next)
                }
                Some(_) => break,
                None => {
                    let remaining = t_end - state.t;
                    if remaining <= 1e-12 * t_end.max(1.0) {
                        break;
                    }
                    match self.adaptive_dt(&state) {
                        Ok(dt) if dt >= remaining => (remaining, t_end),
                        Ok(dt) => (dt, state.t + dt),
                        Err(e) => {
                            termination = Termination::from_event(e)?;
                            break;
                        }
                    }
                }
            };
            let mut next = match self.step(&state, dt) {
                Ok(next) => next,
                Err(e) => {
                    termination = Termination::from_event(e)?;
                    break;
                }
            };
            next.t = t_next;
            let record = compute_record(&self.plan, &self.params, &next, Some(&state))?;
            if n == 0 {
                records[0] = compute_record(&self.plan, &self.params, &initial_state, Some(&next))?;
                notify(0, &initial_state, &records[0])?;
            }
            notify(n + 1, &next, &record)?;
            records.push(record);
            state = next;
            n += 1;
        }
        if n == 0 {
            notify(0, &initial_state, &records[0])?;
        }
        Ok(Trajectory { records, final_state: state, termination })
    }
}
