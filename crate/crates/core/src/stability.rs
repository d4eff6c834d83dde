//! Paired-trajectory experiments: a base run and a perturbed copy advanced in
//! lockstep, their difference norms, the driver bundle `H(t)` and a fitted
//! Gronwall envelope `D(t) ≤ D(0)·exp(Ĉ ∫₀ᵗ H)`.
//!
//! The base run plays the more regular solution: `∂tũ` and `∇ρ̃` are taken
//! from it, the rest of the bundle uses both.

use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Grid, RealField, RealVectorField, VectorField};
use crate::integrator::{Integrator, StepConfig, Termination};
use crate::model::{apply_b_state, Params, State};
use crate::norm::{l2_sq, norm, vector_l2_sq, vector_norm, NormSpec};
use crate::spectral::SpectralPlan;

/// Which fields a perturbation touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbTarget {
    Psi,
    Velocity,
    Density,
    All,
}

impl PerturbTarget {
    pub fn name(self) -> &'static str {
        match self {
            PerturbTarget::Psi => "psi",
            PerturbTarget::Velocity => "u",
            PerturbTarget::Density => "rho",
            PerturbTarget::All => "all",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "psi" => Some(PerturbTarget::Psi),
            "u" => Some(PerturbTarget::Velocity),
            "rho" => Some(PerturbTarget::Density),
            "all" => Some(PerturbTarget::All),
            _ => None,
        }
    }
}

/// Single-mode perturbation `δ_p · scale · cos(2π m·x/L)` of the chosen fields.
///
/// `ψ` is scaled by `max|ψ|`, `u` by `max(‖u‖∞, 1)` and then projected,
/// `ρ` multiplicatively and clipped into `[m, M]`. `amplitude = 0` leaves the
/// state untouched.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSpec {
    pub target: PerturbTarget,
    pub mode: Vec<i64>,
    pub amplitude: f64,
}

impl PerturbationSpec {
    pub fn new(target: PerturbTarget, amplitude: f64) -> Self {
        PerturbationSpec { target, mode: vec![1, 2, 1], amplitude }
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::Experiment(format!(
                "perturbation amplitude must be non-negative, got {}",
                self.amplitude
            )));
        }
        if self.mode.len() < grid.dim() {
            return Err(Error::Experiment("perturbation mode needs one entry per axis".into()));
        }
        Ok(())
    }

    pub fn apply(&self, plan: &SpectralPlan, state: &State, params: &Params) -> Result<State> {
        let grid = plan.grid().clone();
        self.validate(&grid)?;
        let mut out = state.clone();
        if self.amplitude == 0.0 {
            return Ok(out);
        }
        let len = grid.len().to_vec();
        let dim = grid.dim();
        let mode = self.mode.clone();
        let phase = move |x: [f64; 3]| -> f64 {
            (0..dim).map(|a| 2.0 * std::f64::consts::PI * mode[a] as f64 * x[a] / len[a]).sum()
        };
        let shape = RealField::from_fn(&grid, |x| phase(x).cos());
        let touches = |t: PerturbTarget| self.target == t || self.target == PerturbTarget::All;
        if touches(PerturbTarget::Psi) {
            let scale = self.amplitude * state.psi.max_abs().max(f64::MIN_POSITIVE);
            for (p, s) in out.psi.values_mut().iter_mut().zip(shape.values()) {
                *p += scale * s;
            }
        }
        if touches(PerturbTarget::Velocity) {
            let scale = self.amplitude * state.u.max_abs().max(1.0);
            let raw: RealVectorField =
                VectorField::from_fn(&grid, |x| [0, 1, 2].map(|a| (phase(x) + a as f64).cos()));
            let (v, _) = plan.leray_project(&raw)?;
            out.u.axpy(scale, &v)?;
        }
        if touches(PerturbTarget::Density) {
            for (r, s) in out.rho.values_mut().iter_mut().zip(shape.values()) {
                *r = (*r * (1.0 + self.amplitude * s)).clamp(params.m, params.big_m);
            }
        }
        Ok(out)
    }
}

/// Difference norms between two states at one time, plus the driver bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceRecord {
    pub t: f64,
    /// `‖φ‖²`, `φ = ψ - ψ̃`
    pub phi_l2_sq: f64,
    /// `‖∇φ‖²`
    pub grad_phi_sq: f64,
    /// `‖Φ‖²`, `Φ = u - ũ`
    pub big_phi_sq: f64,
    /// `‖σ‖²`, `σ = ρ - ρ̃`
    pub sigma_sq: f64,
    /// `‖∇φ‖² + ‖Φ‖² + ‖σ‖²`
    pub d: f64,
    pub bundle: Option<Bundle>,
}

impl DifferenceRecord {
    pub fn h(&self) -> f64 {
        self.bundle.as_ref().map_or(0.0, Bundle::total)
    }
}

fn same_time(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// Symmetric difference norms of two states on the same grid and time.
pub fn difference_norms(plan: &SpectralPlan, a: &State, b: &State) -> Result<DifferenceRecord> {
    if !same_time(a.t, b.t) {
        return Err(Error::Experiment(format!("states at different times {} and {}", a.t, b.t)));
    }
    let phi = a.psi.sub(&b.psi)?;
    let big_phi = a.u.sub(&b.u)?;
    let sigma = a.rho.sub(&b.rho)?;
    let grad_phi_sq = plan.gradient_l2_sq(&phi)?;
    let big_phi_sq = vector_l2_sq(&big_phi);
    let sigma_sq = l2_sq(&sigma);
    Ok(DifferenceRecord {
        t: a.t,
        phi_l2_sq: l2_sq(&phi),
        grad_phi_sq,
        big_phi_sq,
        sigma_sq,
        d: grad_phi_sq + big_phi_sq + sigma_sq,
        bundle: None,
    })
}

/// The twelve driver monomials; `total` is their sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bundle {
    pub terms: [f64; 12],
}

impl Bundle {
    pub const NAMES: [&'static str; 12] = [
        "u_H1^4",
        "ut_H1^4",
        "psi_H2^4",
        "psit_H2^4",
        "psi_H1^4(1+mu^2)",
        "u_H2^2",
        "ut_H2^2",
        "ut_H1^2*ut_H2^2",
        "Bpsi_L2*Bpsi_H1",
        "dt_ut_L3^2",
        "grad_rhot_L3^2",
        "ut_H1^2*Bpsit_L2^2",
    ];

    pub fn total(&self) -> f64 {
        self.terms.iter().sum()
    }
}

/// Driver bundle for the pair (`weak`, `moderate`); `dt_moderate_u` is the
/// time derivative of the moderate velocity.
pub fn gronwall_bundle(
    plan: &SpectralPlan,
    weak: &State,
    moderate: &State,
    dt_moderate_u: Option<&RealVectorField>,
    params: &Params,
) -> Result<Bundle> {
    let dtu = dt_moderate_u
        .ok_or_else(|| Error::MissingData("bundle needs the moderate solution's ∂tu".into()))?;
    let h = NormSpec::h;
    let u_h1 = vector_norm(plan, &weak.u, h(1.0))?;
    let ut_h1 = vector_norm(plan, &moderate.u, h(1.0))?;
    let u_h2 = vector_norm(plan, &weak.u, h(2.0))?;
    let ut_h2 = vector_norm(plan, &moderate.u, h(2.0))?;
    let psi_h2 = norm(plan, &weak.psi, h(2.0))?;
    let psit_h2 = norm(plan, &moderate.psi, h(2.0))?;
    let psi_h1 = norm(plan, &weak.psi, h(1.0))?;
    let b = apply_b_state(plan, weak, params)?;
    let bt = apply_b_state(plan, moderate, params)?;
    let b_l2 = l2_sq(&b).sqrt();
    let b_h1 = norm(plan, &b, h(1.0))?;
    let bt_l2 = l2_sq(&bt).sqrt();
    let dtu_l3 = vector_norm(plan, dtu, NormSpec::Lp(3.0))?;
    let grad_rho_l3 = vector_norm(plan, &plan.gradient(&moderate.rho)?, NormSpec::Lp(3.0))?;
    Ok(Bundle {
        terms: [
            u_h1.powi(4),
            ut_h1.powi(4),
            psi_h2.powi(4),
            psit_h2.powi(4),
            psi_h1.powi(4) * (1.0 + params.mu * params.mu),
            u_h2 * u_h2,
            ut_h2 * ut_h2,
            ut_h1 * ut_h1 * ut_h2 * ut_h2,
            b_l2 * b_h1,
            dtu_l3 * dtu_l3,
            grad_rho_l3 * grad_rho_l3,
            ut_h1 * ut_h1 * bt_l2 * bt_l2,
        ],
    })
}

/// Envelope verdict threshold.
pub const ENVELOPE_MARGIN_CAP: f64 = 10.0;

#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub perturbation: PerturbationSpec,
    pub dt: f64,
    pub t_end: f64,
    pub records: Vec<DifferenceRecord>,
    /// How the perturbed run ended; the base run always completes.
    pub termination: Termination,
    /// Growth constant fitted on `[0, T/2]`, clamped at zero.
    pub c_hat: f64,
    /// `max_{t > T/2} D(t) / (D(0)·exp(Ĉ ∫₀ᵗ H))`.
    pub envelope_margin: f64,
    /// `sup_t D(t) / D(0)`, zero when `D(0) = 0`.
    pub sup_ratio: f64,
    /// `∫₀ᵀ H`.
    pub h_integral: f64,
    /// False when `D(0) = 0` but a later `D` is nonzero.
    pub deterministic: bool,
}

impl StabilityReport {
    pub fn envelope_holds(&self) -> bool {
        self.envelope_margin <= ENVELOPE_MARGIN_CAP
    }

    pub fn max_d(&self) -> f64 {
        self.records.iter().fold(0.0, |m, r| m.max(r.d))
    }

    /// One row per step: the difference norms followed by the bundle terms.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "t,phi_L2_sq,grad_phi_sq,Phi_sq,sigma_sq,D,H")?;
        for name in Bundle::NAMES {
            write!(w, ",{name}")?;
        }
        writeln!(w)?;
        for r in &self.records {
            write!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.t, r.phi_l2_sq, r.grad_phi_sq, r.big_phi_sq, r.sigma_sq, r.d, r.h()
            )?;
            let terms = r.bundle.map_or([0.0; 12], |b| b.terms);
            for v in terms {
                write!(w, ",{v:.16e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn summary(&self) -> String {
        let verdict = |ok: bool| if ok { "pass" } else { "FAIL" };
        let term = match &self.termination {
            Termination::Completed => "completed".to_string(),
            other => other.to_error().map(|e| e.to_string()).unwrap_or_default(),
        };
        format!(
            "target = {}\namplitude = {:e}\ndt = {:e}\nT = {}\nsteps = {}\nperturbed run: {}\n\
             D(0) = {:.6e}\nsup D/D(0) = {:.6e}\nint H = {:.6e}\nC_hat = {:.6e}\n\
             envelope margin = {:.6e} ({})\ndeterminism: {}\n",
            self.perturbation.target.name(),
            self.perturbation.amplitude,
            self.dt,
            self.t_end,
            self.records.len().saturating_sub(1),
            term,
            self.records.first().map_or(0.0, |r| r.d),
            self.sup_ratio,
            self.h_integral,
            self.c_hat,
            self.envelope_margin,
            verdict(self.envelope_holds()),
            verdict(self.deterministic),
        )
    }
}

/// Fit `Ĉ` on the records with `t ≤ T/2` and evaluate the envelope on `t > T/2`.
/// Returns `(Ĉ, margin, ∫H)`.
pub fn fit_envelope(records: &[DifferenceRecord], t_end: f64) -> (f64, f64, f64) {
    let half = 0.5 * t_end;
    let mut cum_h = vec![0.0; records.len()];
    for i in 1..records.len() {
        let (a, b) = (&records[i - 1], &records[i]);
        cum_h[i] = cum_h[i - 1] + 0.5 * (b.t - a.t) * (a.h() + b.h());
    }
    let mut c_hat = 0.0f64;
    for i in 1..records.len() {
        let (a, b) = (&records[i - 1], &records[i]);
        if b.t > half * (1.0 + 1e-12) {
            break;
        }
        let dh = cum_h[i] - cum_h[i - 1];
        if a.d > 0.0 && b.d > 0.0 && dh > 0.0 {
            c_hat = c_hat.max((b.d.ln() - a.d.ln()) / dh);
        }
    }
    let d0 = records.first().map_or(0.0, |r| r.d);
    let mut margin = 0.0f64;
    if d0 > 0.0 {
        for (r, h) in records.iter().zip(&cum_h) {
            if r.t > half * (1.0 + 1e-12) {
                margin = margin.max(r.d / (d0 * (c_hat * h).exp()));
            }
        }
    }
    (c_hat, margin, cum_h.last().copied().unwrap_or(0.0))
}

/// Run the base and perturbed trajectories in lockstep to `t_end`.
pub fn stability_experiment(
    initial: &State,
    params: &Params,
    config: &StepConfig,
    perturbation: &PerturbationSpec,
    t_end: f64,
) -> Result<StabilityReport> {
    let grid: Arc<Grid> = initial.grid().clone();
    let integ = Integrator::new(&grid, params, config)?;
    perturbation.validate(&grid)?;
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::Experiment(format!("horizon must be positive, got {t_end}")));
    }
    let plan = integ.plan();
    let mut base = integ.prepare(initial)?;
    base.t = 0.0;
    let mut pert = if perturbation.amplitude == 0.0 {
        base.clone()
    } else {
        integ.prepare(&perturbation.apply(plan, &base, params)?)?
    };
    pert.t = 0.0;

    let total = if config.adaptive {
        None
    } else {
        Some(((t_end / config.dt_init) * (1.0 - 1e-12)).ceil().max(1.0) as usize)
    };
    let mut records = Vec::new();
    let mut prev_base: Option<State> = None;
    let mut termination = Termination::Completed;
    let mut n = 0usize;
    let mut dt_used = 0.0f64;
    loop {
        let remaining = t_end - base.t;
        if remaining <= 1e-12 * t_end.max(1.0) {
            break;
        }
        let dt = match total {
            Some(total) => t_end / total as f64,
            None => integ.adaptive_dt(&base).map_err(|e| {
                Error::Experiment(format!("base run failed: {e}"))
            })?,
        };
        let (dt, t_next) = if dt >= remaining || total.is_some_and(|t| n + 1 == t) {
            (remaining, t_end)
        } else {
            (dt, base.t + dt)
        };
        dt_used = dt_used.max(dt);
        let mut base_next = integ
            .step(&base, dt)
            .map_err(|e| Error::Experiment(format!("base run must reach the horizon: {e}")))?;
        base_next.t = t_next;
        let pert_next = match integ.step(&pert, dt) {
            Ok(mut s) => {
                s.t = t_next;
                Some(s)
            }
            Err(e) if e.is_physics_event() => {
                termination = match e {
                    Error::DensityFloor(v) => Termination::DensityFloor(v),
                    Error::BlowUp { last_valid_t } => Termination::BlowUp { last_valid_t },
                    Error::CflViolation { dt, required } => Termination::CflViolation { dt, required },
                    _ => unreachable!("physics events only"),
                };
                None
            }
            Err(e) => return Err(e),
        };
        let older = prev_base.as_ref().unwrap_or(&base);
        let dtu = base_next.u.sub(&older.u)?.scaled(1.0 / (base_next.t - older.t));
        let mut rec = difference_norms(plan, &pert, &base)?;
        rec.bundle = Some(gronwall_bundle(plan, &pert, &base, Some(&dtu), params)?);
        records.push(rec);
        prev_base = Some(std::mem::replace(&mut base, base_next));
        match pert_next {
            Some(s) => pert = s,
            None => break,
        }
        n += 1;
    }
    if termination.is_completed() {
        let dtu = match &prev_base {
            Some(p) => base.u.sub(&p.u)?.scaled(1.0 / (base.t - p.t)),
            None => VectorField::zeros(&grid),
        };
        let mut rec = difference_norms(plan, &pert, &base)?;
        rec.bundle = Some(gronwall_bundle(plan, &pert, &base, Some(&dtu), params)?);
        records.push(rec);
    }

    let d0 = records[0].d;
    let scale = vector_l2_sq(&base.u) + l2_sq(&base.rho) + plan.gradient_l2_sq(&base.psi)?;
    let deterministic = d0 > 0.0 || records.iter().all(|r| r.d <= 1e-20 * scale.max(1.0));
    let sup_ratio = if d0 > 0.0 {
        records.iter().fold(0.0f64, |m, r| m.max(r.d / d0))
    } else {
        0.0
    };
    let (c_hat, envelope_margin, h_integral) = fit_envelope(&records, t_end);
    Ok(StabilityReport {
        perturbation: perturbation.clone(),
        dt: dt_used,
        t_end,
        records,
        termination,
        c_hat,
        envelope_margin,
        sup_ratio,
        h_integral,
        deterministic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ComplexField;
    use crate::initial::{plane_wave_state, random_state, smooth_state, PlaneWave, RandomStateSpec, SmoothSpec};
    use num_complex::Complex64;
    use std::f64::consts::PI;

    fn grid() -> Arc<Grid> {
        Grid::new(&[16, 16], &[2.0 * PI, 2.0 * PI]).unwrap()
    }

    #[test]
    fn difference_norm_examples() {
        let g = grid();
        let plan = SpectralPlan::new(&g);
        let p = Params::default();
        let a = random_state(&g, &RandomStateSpec::default(), &p, 1).unwrap();
        let zero = difference_norms(&plan, &a, &a).unwrap();
        assert_eq!(zero.d, 0.0);
        assert_eq!(zero.phi_l2_sq, 0.0);

        let eta = 1e-3;
        let b = State { psi: a.psi.map(|v| v * (1.0 + eta)), ..a.clone() };
        let r = difference_norms(&plan, &a, &b).unwrap();
        let expect = eta * eta * plan.gradient_l2_sq(&a.psi).unwrap();
        assert!((r.grad_phi_sq - expect).abs() < 1e-10 * expect);
        assert_eq!(r.big_phi_sq, 0.0);
        assert_eq!(r.sigma_sq, 0.0);

        let c = random_state(&g, &RandomStateSpec::default(), &p, 2).unwrap();
        let ab = difference_norms(&plan, &a, &c).unwrap();
        let ba = difference_norms(&plan, &c, &a).unwrap();
        assert_eq!(ab, ba);
        let direct = l2_sq(&a.rho.sub(&c.rho).unwrap());
        assert!((ab.sigma_sq - direct).abs() <= 1e-12 * direct);

        let later = State { t: 1.0, ..c };
        assert!(difference_norms(&plan, &a, &later).is_err());
    }

    #[test]
    fn bundle_of_zero_states_vanishes() {
        let g = grid();
        let plan = SpectralPlan::new(&g);
        let p = Params::default();
        let z = State::new(0.0, ComplexField::zeros(&g), VectorField::zeros(&g), RealField::constant(&g, 1.0)).unwrap();
        let dtu = VectorField::zeros(&g);
        let b = gronwall_bundle(&plan, &z, &z, Some(&dtu), &p).unwrap();
        assert_eq!(b.total(), 0.0);
        assert!(matches!(gronwall_bundle(&plan, &z, &z, None, &p), Err(Error::MissingData(_))));
    }

    #[test]
    fn bundle_of_plane_waves_matches_hand_evaluation() {
        let g = grid();
        let plan = SpectralPlan::new(&g);
        let p = Params { mu: 0.7, ..Params::default() };
        let wa = PlaneWave { k: vec![1, 2], a: Complex64::new(0.4, 0.3), velocity: vec![0.2, -0.5], rho: 1.1 };
        let wb = PlaneWave { k: vec![1, 2], a: Complex64::new(0.5, -0.1), velocity: vec![-0.3, 0.1], rho: 0.9 };
        let a = plane_wave_state(&g, &wa).unwrap();
        let b = plane_wave_state(&g, &wb).unwrap();
        let dtu_c = [0.25, -0.75];
        let dtu = VectorField::from_fn(&g, |_| [dtu_c[0], dtu_c[1], 0.0]);
        let got = gronwall_bundle(&plan, &a, &b, Some(&dtu), &p).unwrap();

        let v = g.volume();
        let k = wa.physical_k(&g);
        let k2 = k[0] * k[0] + k[1] * k[1];
        let sq = |x: &[f64]| x.iter().map(|c| c * c).sum::<f64>();
        let beta = |w: &PlaneWave| {
            let rel: Vec<f64> = k.iter().zip(&w.velocity).map(|(k, u)| k - u).collect();
            0.5 * sq(&rel) + p.mu * w.a.norm_sqr()
        };
        let u_h1_sq = sq(&wa.velocity) * v;
        let ut_h1_sq = sq(&wb.velocity) * v;
        let psi_h = |w: &PlaneWave, s: f64| (1.0 + k2).powf(s) * w.a.norm_sqr() * v;
        let b_l2 = beta(&wa) * wa.a.norm() * v.sqrt();
        let bt_l2 = beta(&wb) * wb.a.norm() * v.sqrt();
        let expect = [
            u_h1_sq * u_h1_sq,
            ut_h1_sq * ut_h1_sq,
            psi_h(&wa, 2.0).powi(2),
            psi_h(&wb, 2.0).powi(2),
            psi_h(&wa, 1.0).powi(2) * (1.0 + p.mu * p.mu),
            u_h1_sq,
            ut_h1_sq,
            ut_h1_sq * ut_h1_sq,
            b_l2 * b_l2 * (1.0 + k2).sqrt(),
            (sq(&dtu_c).powf(1.5) * v).powf(2.0 / 3.0),
            0.0,
            ut_h1_sq * bt_l2 * bt_l2,
        ];
        for (i, (x, y)) in got.terms.iter().zip(expect).enumerate() {
            assert!((x - y).abs() <= 1e-10 * y.abs().max(1e-12), "{}: {x} vs {y}", Bundle::NAMES[i]);
        }
    }

    #[test]
    fn zero_perturbation_is_bitwise_identity() {
        let g = grid();
        let p = Params::default();
        let s0 = smooth_state(&g, &SmoothSpec::default(), &p).unwrap();
        let spec = PerturbationSpec::new(PerturbTarget::All, 0.0);
        let rep = stability_experiment(&s0, &p, &StepConfig::fixed(0.01), &spec, 0.05).unwrap();
        assert_eq!(rep.records.len(), 6);
        assert!(rep.records.iter().all(|r| r.d == 0.0));
        assert!(rep.deterministic);
        assert!(rep.records.iter().all(|r| r.h().is_finite() && r.h() > 0.0));
    }

    #[test]
    fn perturbations_respect_constraints() {
        let g = grid();
        let plan = SpectralPlan::new(&g);
        let p = Params::default();
        let s0 = smooth_state(&g, &SmoothSpec::default(), &p).unwrap();
        let spec = PerturbationSpec::new(PerturbTarget::All, 0.5);
        let s1 = spec.apply(&plan, &s0, &p).unwrap();
        assert!(plan.divergence(&s1.u).unwrap().max_abs() < 1e-10);
        assert!(s1.rho.min() >= p.m && s1.rho.max() <= p.big_m);
        assert!(difference_norms(&plan, &s0, &s1).unwrap().d > 0.0);
        let bad = PerturbationSpec::new(PerturbTarget::Psi, -1.0);
        assert!(bad.apply(&plan, &s0, &p).is_err());
    }

    #[test]
    fn envelope_fit_on_exponential_growth() {
        let recs: Vec<DifferenceRecord> = (0..=10)
            .map(|i| {
                let t = i as f64 * 0.1;
                DifferenceRecord {
                    t,
                    phi_l2_sq: 0.0,
                    grad_phi_sq: 0.0,
                    big_phi_sq: 0.0,
                    sigma_sq: 0.0,
                    d: (3.0 * 2.0 * t).exp(),
                    bundle: Some(Bundle { terms: [2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0] }),
                }
            })
            .collect();
        let (c, margin, h) = fit_envelope(&recs, 1.0);
        assert!((c - 3.0).abs() < 1e-12);
        assert!((margin - 1.0).abs() < 1e-12);
        assert!((h - 2.0).abs() < 1e-12);
    }
}
