//! Per-step scalar diagnostics and the bound / identity checks built on them.

use crate::error::Result;
use crate::grid::{RealField, Sample};
use crate::model::{apply_b_state, total_momentum, Params, State};
use crate::norm::{l2_sq, norm, vector_norm, NormSpec};
use crate::spectral::SpectralPlan;

/// Finite-difference time-derivative norms.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DtNorms {
    /// `‖∂tψ‖_{L²}`
    pub psi_l2: f64,
    /// `‖∂tu‖_{L²}`
    pub u_l2: f64,
    /// `‖∂tρ‖_{H^{-1}}`
    pub rho_hm1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    /// `½‖√ρ u‖² + ½‖∇ψ‖² + (μ/2)‖ψ‖⁴_{L⁴}`
    pub energy: f64,
    /// `ν‖∇u‖²`
    pub d_visc: f64,
    /// `2Λ‖Bψ‖²`
    pub d_relax: f64,
    /// `‖ψ‖²`
    pub m_sf: f64,
    /// `∫ρ`
    pub m_fluid: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    /// `1 + ‖Δψ‖² + ν‖∇u‖²`
    pub x: f64,
    /// `Λ‖∇(Bψ)‖² + ‖√ρ ∂tu‖² + (ν²/M')‖Δu‖²`
    pub y: f64,
    /// `‖ψ‖_{H^{5/2+δ}}`
    pub sob_psi: f64,
    /// `‖u‖_{H^{3/2+δ}}`
    pub sob_u: f64,
    /// `‖Bψ‖_{H^{3/2+δ}}`
    pub sob_bpsi: f64,
    pub dt_norms: DtNorms,
    /// `∫ρu + Im(ψ̄∇ψ)`, unused axes zero.
    pub momentum: [f64; 3],
}

impl DiagnosticsRecord {
    pub const COLUMNS: [&'static str; 19] = [
        "t", "E", "D_visc", "D_relax", "m_sf", "m_fluid", "rho_min", "rho_max", "X", "Y",
        "sob_psi", "sob_u", "sob_Bpsi", "dt_psi_L2", "dt_u_L2", "dt_rho_Hm1", "P_x", "P_y", "P_z",
    ];

    /// Values in `COLUMNS` order.
    pub fn values(&self) -> [f64; 19] {
        [
            self.t,
            self.energy,
            self.d_visc,
            self.d_relax,
            self.m_sf,
            self.m_fluid,
            self.rho_min,
            self.rho_max,
            self.x,
            self.y,
            self.sob_psi,
            self.sob_u,
            self.sob_bpsi,
            self.dt_norms.psi_l2,
            self.dt_norms.u_l2,
            self.dt_norms.rho_hm1,
            self.momentum[0],
            self.momentum[1],
            self.momentum[2],
        ]
    }

    pub fn from_values(v: &[f64; 19]) -> Self {
        DiagnosticsRecord {
            t: v[0],
            energy: v[1],
            d_visc: v[2],
            d_relax: v[3],
            m_sf: v[4],
            m_fluid: v[5],
            rho_min: v[6],
            rho_max: v[7],
            x: v[8],
            y: v[9],
            sob_psi: v[10],
            sob_u: v[11],
            sob_bpsi: v[12],
            dt_norms: DtNorms { psi_l2: v[13], u_l2: v[14], rho_hm1: v[15] },
            momentum: [v[16], v[17], v[18]],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite())
    }

    pub fn total_mass(&self) -> f64 {
        self.m_sf + self.m_fluid
    }
}

/// Total energy `½‖√ρ u‖² + ½‖∇ψ‖² + (μ/2)‖ψ‖⁴_{L⁴}`.
pub fn energy(plan: &SpectralPlan, state: &State, params: &Params) -> Result<f64> {
    let kinetic = 0.5 * weighted_velocity_sq(state);
    let gradient = 0.5 * plan.gradient_l2_sq(&state.psi)?;
    let quartic: f64 = state.psi.values().iter().map(|p| p.norm_sqr().powi(2)).sum::<f64>()
        * state.grid().cell_volume();
    Ok(kinetic + gradient + 0.5 * params.mu * quartic)
}

/// `‖√ρ u‖²`
fn weighted_velocity_sq(state: &State) -> f64 {
    let u2 = state.u.magnitude_sq();
    u2.values().iter().zip(state.rho.values()).map(|(a, r)| a * r).sum::<f64>()
        * state.grid().cell_volume()
}

fn laplacian_l2_sq<T: Sample>(plan: &SpectralPlan, f: &crate::grid::Field<T>) -> Result<f64> {
    plan.weighted_energy(f, |k2| k2 * k2)
}

/// Norms of `(a - b) / (t_a - t_b)`.
pub fn difference_quotient(plan: &SpectralPlan, a: &State, b: &State) -> Result<DtNorms> {
    let h = a.t - b.t;
    if h == 0.0 {
        return Ok(DtNorms::default());
    }
    let inv = 1.0 / h.abs();
    let dpsi = a.psi.sub(&b.psi)?;
    let du = a.u.sub(&b.u)?;
    let drho = a.rho.sub(&b.rho)?;
    Ok(DtNorms {
        psi_l2: l2_sq(&dpsi).sqrt() * inv,
        u_l2: crate::norm::vector_l2(&du) * inv,
        rho_hm1: norm(plan, &drho, NormSpec::h(-1.0))? * inv,
    })
}

/// Diagnostics of one state. `neighbor` is another time level of the same
/// trajectory used for the finite-difference time derivatives; without it
/// those entries (and the `∂tu` part of `Y`) are zero.
pub fn compute_record(
    plan: &SpectralPlan,
    params: &Params,
    state: &State,
    neighbor: Option<&State>,
) -> Result<DiagnosticsRecord> {
    let b = apply_b_state(plan, state, params)?;
    let grad_u_sq: f64 = state
        .u
        .components()
        .iter()
        .map(|c| plan.gradient_l2_sq(c))
        .sum::<Result<f64>>()?;
    let lap_u_sq: f64 = state
        .u
        .components()
        .iter()
        .map(|c| laplacian_l2_sq(plan, c))
        .sum::<Result<f64>>()?;
    let (dt_norms, rho_dtu_sq) = match neighbor {
        Some(nb) => {
            let norms = difference_quotient(plan, state, nb)?;
            let h = (state.t - nb.t).abs();
            let du = state.u.sub(&nb.u)?;
            let w: f64 = du
                .magnitude_sq()
                .values()
                .iter()
                .zip(state.rho.values())
                .map(|(a, r)| a * r)
                .sum::<f64>()
                * state.grid().cell_volume();
            (norms, if h > 0.0 { w / (h * h) } else { 0.0 })
        }
        None => (DtNorms::default(), 0.0),
    };
    let mut momentum = [0.0; 3];
    for (m, p) in momentum.iter_mut().zip(total_momentum(plan, state)?) {
        *m = p;
    }
    let s_hi = 2.5 + params.delta;
    let s_lo = 1.5 + params.delta;
    Ok(DiagnosticsRecord {
        t: state.t,
        energy: energy(plan, state, params)?,
        d_visc: params.nu * grad_u_sq,
        d_relax: 2.0 * params.lambda * l2_sq(&b),
        m_sf: l2_sq(&state.psi),
        m_fluid: state.rho.integral(),
        rho_min: state.rho.min(),
        rho_max: state.rho.max(),
        x: 1.0 + laplacian_l2_sq(plan, &state.psi)? + params.nu * grad_u_sq,
        y: params.lambda * plan.gradient_l2_sq(&b)?
            + rho_dtu_sq
            + params.nu * params.nu / params.m_prime() * lap_u_sq,
        sob_psi: norm(plan, &state.psi, NormSpec::h(s_hi))?,
        sob_u: vector_norm(plan, &state.u, NormSpec::h(s_lo))?,
        sob_bpsi: norm(plan, &b, NormSpec::h(s_lo))?,
        dt_norms,
        momentum,
    })
}

/// Energy-equality residual `r(t_n) = E(t_n) + ∫₀^{t_n} (D_visc + D_relax) - E₀`,
/// trapezoid rule in time.
pub fn energy_budget(records: &[DiagnosticsRecord]) -> Vec<f64> {
    let Some(first) = records.first() else {
        return Vec::new();
    };
    let e0 = first.energy;
    let mut out = Vec::with_capacity(records.len());
    out.push(0.0);
    let mut dissipated = 0.0;
    for w in records.windows(2) {
        let h = w[1].t - w[0].t;
        dissipated += 0.5 * h * (w[0].d_visc + w[0].d_relax + w[1].d_visc + w[1].d_relax);
        out.push(w[1].energy + dissipated - e0);
    }
    out
}

/// `max_t |r(t)| / E₀`.
pub fn max_relative_energy_residual(records: &[DiagnosticsRecord]) -> f64 {
    let Some(first) = records.first() else {
        return 0.0;
    };
    let r = energy_budget(records);
    let peak = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if first.energy == 0.0 {
        peak
    } else {
        peak / first.energy
    }
}

/// Largest per-step relative increase of the superfluid mass and largest
/// relative drift of the total mass from the first record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassAudit {
    pub max_sf_increase: f64,
    pub max_total_drift: f64,
}

impl MassAudit {
    pub fn of(records: &[DiagnosticsRecord]) -> Self {
        let mut max_sf_increase = 0.0f64;
        for w in records.windows(2) {
            let scale = if w[0].m_sf > 0.0 { w[0].m_sf } else { 1.0 };
            max_sf_increase = max_sf_increase.max((w[1].m_sf - w[0].m_sf) / scale);
        }
        let m0 = records.first().map_or(0.0, |r| r.total_mass());
        let max_total_drift = records
            .iter()
            .map(|r| (r.total_mass() - m0).abs() / m0)
            .fold(0.0f64, f64::max);
        MassAudit { max_sf_increase, max_total_drift }
    }

    pub fn passed(&self) -> bool {
        self.max_sf_increase <= BOUND_TOL && self.max_total_drift <= BOUND_TOL
    }
}

/// Centered finite-difference time derivatives over stored snapshots,
/// one-sided at the ends.
pub fn time_derivative_report(plan: &SpectralPlan, snapshots: &[State]) -> Result<Vec<DtNorms>> {
    let n = snapshots.len();
    if n < 2 {
        return Err(crate::error::Error::MissingData(
            "time derivatives need at least two snapshots".into(),
        ));
    }
    (0..n)
        .map(|i| {
            let (a, b) = match i {
                0 => (&snapshots[1], &snapshots[0]),
                i if i == n - 1 => (&snapshots[n - 1], &snapshots[n - 2]),
                i => (&snapshots[i + 1], &snapshots[i - 1]),
            };
            difference_quotient(plan, a, b)
        })
        .collect()
}

/// Reference quantities the bounds are measured against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Baseline {
    pub m_sf0: f64,
    pub x0: f64,
    /// `∫₀ᵗ Y` up to the record being checked.
    pub y_integral: f64,
}

impl Baseline {
    pub fn from_initial(record: &DiagnosticsRecord) -> Self {
        Baseline { m_sf0: record.m_sf, x0: record.x, y_integral: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    pub name: &'static str,
    pub value: f64,
    pub limit: f64,
    /// `limit - value` for upper bounds, `value - limit` for lower bounds.
    pub margin: f64,
    pub passed: bool,
    /// Asserted checks must hold on every run; the rest are reported only.
    pub asserted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport {
    pub t: f64,
    pub checks: Vec<BoundCheck>,
}

impl BoundsReport {
    pub fn all_asserted_pass(&self) -> bool {
        self.checks.iter().filter(|c| c.asserted).all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&BoundCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Relative slack on the asserted bounds.
pub const BOUND_TOL: f64 = 1e-8;

fn upper(name: &'static str, value: f64, limit: f64, tol: f64, asserted: bool) -> BoundCheck {
    BoundCheck {
        name,
        value,
        limit,
        margin: limit - value,
        passed: value <= limit * (1.0 + tol),
        asserted,
    }
}

pub fn bounds_report(record: &DiagnosticsRecord, baseline: &Baseline, params: &Params) -> BoundsReport {
    let floor = BoundCheck {
        name: "density_floor",
        value: record.rho_min,
        limit: params.epsilon,
        margin: record.rho_min - params.epsilon,
        passed: record.rho_min > params.epsilon,
        asserted: true,
    };
    BoundsReport {
        t: record.t,
        checks: vec![
            upper("superfluid_mass", record.m_sf, baseline.m_sf0, BOUND_TOL, true),
            floor,
            upper("density_ceiling", record.rho_max, params.m_prime(), BOUND_TOL, true),
            upper("higher_order_x", record.x, 2.0 * baseline.x0, 0.0, false),
            upper("higher_order_y_integral", baseline.y_integral, 31.0 * baseline.x0, 0.0, false),
        ],
    }
}

/// Bounds for every record of a run, accumulating `∫Y` by the trapezoid rule.
pub fn bounds_series(records: &[DiagnosticsRecord], params: &Params) -> Vec<BoundsReport> {
    let Some(first) = records.first() else {
        return Vec::new();
    };
    let mut base = Baseline::from_initial(first);
    let mut out = vec![bounds_report(first, &base, params)];
    for w in records.windows(2) {
        base.y_integral += 0.5 * (w[1].t - w[0].t) * (w[0].y + w[1].y);
        out.push(bounds_report(&w[1], &base, params));
    }
    out
}

/// Growth exponent `Q_T` of the highest-order estimate, for the horizon `t_end`.
/// Informational: `gamma` has no canonical value.
pub fn q_t(plan: &SpectralPlan, initial: &State, params: &Params, x0: f64, t_end: f64) -> Result<f64> {
    let s_hi = 2.5 + params.delta;
    let s_lo = 1.5 + params.delta;
    let e1 = vector_norm(plan, &initial.u, NormSpec::h(s_lo))?.powi(2)
        + norm(plan, &initial.psi, NormSpec::h(s_hi))?.powi(2);
    let mp = params.m_prime();
    let nu2 = params.nu * params.nu;
    Ok(params.lambda * mp / nu2 * x0
        + (params.lambda * mp / (nu2 * params.epsilon) + params.gamma) * x0 * x0 * t_end
        + params.lambda * e1 * e1 * t_end)
}

/// Minimum of a real field together with its node index.
pub fn field_min(f: &RealField) -> (usize, f64) {
    let i = f.argmin();
    (i, f.values()[i])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{ComplexField, Grid, VectorField};
    use crate::initial::{plane_wave_state, PlaneWave};
    use num_complex::Complex64;
    use std::f64::consts::PI;

    #[test]
    fn mass_audit_flags_growth_and_drift() {
        let rec = |m_sf: f64, m_fluid: f64| {
            let mut r = DiagnosticsRecord::from_values(&[0.0; 19]);
            r.m_sf = m_sf;
            r.m_fluid = m_fluid;
            r
        };
        let steady = [rec(2.0, 1.0), rec(1.5, 1.5), rec(1.0, 2.0)];
        let a = MassAudit::of(&steady);
        assert!(a.passed());
        assert_eq!(a.max_sf_increase, 0.0);
        assert_eq!(a.max_total_drift, 0.0);

        let a = MassAudit::of(&[rec(2.0, 1.0), rec(2.2, 1.0)]);
        assert!((a.max_sf_increase - 0.1).abs() < 1e-15);
        assert!((a.max_total_drift - 0.2 / 3.0).abs() < 1e-15);
        assert!(!a.passed());
    }

    #[test]
    fn energy_closed_forms() {
        let g = Grid::new(&[16, 16], &[2.0 * PI, 4.0]).unwrap();
        let plan = SpectralPlan::new(&g);
        let p = Params { mu: 0.8, ..Params::default() };
        let zero = State::new(0.0, ComplexField::zeros(&g), VectorField::zeros(&g), RealField::constant(&g, 1.0)).unwrap();
        assert_eq!(energy(&plan, &zero, &p).unwrap(), 0.0);

        let c = Complex64::new(0.3, -0.9);
        let rho = RealField::from_fn(&g, |x| 1.0 + 0.1 * x[0].sin());
        let st = State::new(0.0, ComplexField::constant(&g, c), VectorField::zeros(&g), rho).unwrap();
        let e = 0.5 * p.mu * c.norm_sqr().powi(2) * g.volume();
        assert!((energy(&plan, &st, &p).unwrap() - e).abs() < 1e-13 * e);

        let w = PlaneWave { k: vec![2, 1], a: Complex64::new(0.5, 0.2), velocity: vec![0.3, -0.4], rho: 1.3 };
        let st = plane_wave_state(&g, &w).unwrap();
        let k = w.physical_k(&g);
        let k2 = k[0] * k[0] + k[1] * k[1];
        let a2 = w.a.norm_sqr();
        let e = (0.5 * w.rho * 0.25 + 0.5 * a2 * k2 + 0.5 * p.mu * a2 * a2) * g.volume();
        assert!((energy(&plan, &st, &p).unwrap() - e).abs() < 1e-12 * e);
    }

    #[test]
    fn budget_of_stationary_records_is_zero() {
        let g = Grid::new(&[8, 8], &[1.0, 1.0]).unwrap();
        let plan = SpectralPlan::new(&g);
        let p = Params::default();
        let mut st = State::new(0.0, ComplexField::zeros(&g), VectorField::zeros(&g), RealField::constant(&g, 1.0)).unwrap();
        let mut recs = Vec::new();
        for i in 0..4 {
            st.t = i as f64 * 0.1;
            recs.push(compute_record(&plan, &p, &st, None).unwrap());
        }
        assert!(energy_budget(&recs).iter().all(|&r| r == 0.0));
        let snaps: Vec<State> = (0..3).map(|i| State { t: i as f64, ..st.clone() }).collect();
        let d = time_derivative_report(&plan, &snaps).unwrap();
        assert!(d.iter().all(|n| *n == DtNorms::default()));
    }

    #[test]
    fn initial_bounds_pass_and_floor_is_flagged() {
        let g = Grid::new(&[8, 8], &[1.0, 1.0]).unwrap();
        let plan = SpectralPlan::new(&g);
        let p = Params::default();
        let st = State::new(0.0, ComplexField::constant(&g, Complex64::new(1.0, 0.0)), VectorField::zeros(&g), RealField::constant(&g, 1.0)).unwrap();
        let rec = compute_record(&plan, &p, &st, None).unwrap();
        let rep = bounds_report(&rec, &Baseline::from_initial(&rec), &p);
        assert!(rep.checks.iter().all(|c| c.passed));

        let low = DiagnosticsRecord { rho_min: p.epsilon - 0.01, ..rec.clone() };
        let rep = bounds_report(&low, &Baseline::from_initial(&rec), &p);
        let floor = rep.get("density_floor").unwrap();
        assert!(!floor.passed);
        assert!((floor.margin + 0.01).abs() < 1e-12);
        assert!(!rep.all_asserted_pass());
    }

    #[test]
    fn column_roundtrip() {
        let v: [f64; 19] = std::array::from_fn(|i| i as f64 * 0.5 - 1.0);
        assert_eq!(DiagnosticsRecord::from_values(&v).values(), v);
    }
}
