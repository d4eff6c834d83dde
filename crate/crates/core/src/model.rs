//! Model constants, the trajectory state, and the right-hand sides of the
//! coupled Schrödinger / continuity / momentum system.
//!
//! Every nonlinear term is evaluated pointwise at the nodes and truncated by
//! the 2/3 rule before it is returned. Truncation is linear, so this is the
//! same as truncating each product separately.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, FloorViolation, Result};
use crate::grid::{ensure_same, ComplexField, Grid, RealField, RealVectorField, VectorField};
use crate::spectral::SpectralPlan;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Model constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    /// Relaxation / mutual-friction coefficient Λ.
    pub lambda: f64,
    /// Self-interaction strength μ.
    pub mu: f64,
    /// Normal-fluid viscosity ν.
    pub nu: f64,
    /// Lower bound of the initial density.
    pub m: f64,
    /// Upper bound of the initial density.
    pub big_m: f64,
    /// Smallest density a run may reach.
    pub epsilon: f64,
    /// Sobolev offset δ in `H^{5/2+δ}`, `H^{3/2+δ}`.
    pub delta: f64,
    /// Free constant in the highest-order growth exponent.
    pub gamma: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            lambda: 0.1,
            mu: 1.0,
            nu: 0.05,
            m: 0.8,
            big_m: 1.2,
            epsilon: 0.5,
            delta: 0.25,
            gamma: 1.0,
        }
    }
}

impl Params {
    pub fn validate(&self) -> Result<()> {
        match self.violations().into_iter().next() {
            Some((_, msg)) => Err(Error::InvalidParams(msg)),
            None => Ok(()),
        }
    }

    /// Every violated constraint as `(key, message)`.
    pub fn violations(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let named = [
            ("lambda", self.lambda),
            ("mu", self.mu),
            ("nu", self.nu),
            ("m", self.m),
            ("M", self.big_m),
            ("epsilon", self.epsilon),
            ("delta", self.delta),
            ("gamma", self.gamma),
        ];
        for (key, v) in named {
            if !v.is_finite() {
                out.push((key, format!("{key} must be finite")));
            }
        }
        if !out.is_empty() {
            return out;
        }
        if self.lambda <= 0.0 {
            out.push(("lambda", format!("lambda must be positive, got {}", self.lambda)));
        }
        if self.mu < 0.0 {
            out.push(("mu", format!("mu must be non-negative, got {}", self.mu)));
        }
        if self.nu <= 0.0 {
            out.push(("nu", format!("nu must be positive, got {}", self.nu)));
        }
        if !(self.m > 0.0 && self.m <= self.big_m) {
            out.push(("m", "density bounds must satisfy 0 < m <= M".into()));
        } else if !(self.epsilon > 0.0 && self.epsilon < self.m) {
            out.push(("epsilon", "epsilon must lie in (0, m)".into()));
        }
        if !(self.delta > 0.0 && self.delta < 0.5) {
            out.push(("delta", "delta must lie in (0, 1/2)".into()));
        }
        out
    }

    /// Upper density bound `M' = M + m - ε` valid up to the floor time.
    pub fn m_prime(&self) -> f64 {
        self.big_m + self.m - self.epsilon
    }

    /// Constant reference density used by the implicit viscous solve.
    pub fn rho_ref(&self) -> f64 {
        0.5 * (self.m + self.big_m)
    }
}

/// One trajectory point `(t, ψ, u, ρ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub psi: ComplexField,
    pub u: RealVectorField,
    pub rho: RealField,
}

impl State {
    pub fn new(t: f64, psi: ComplexField, u: RealVectorField, rho: RealField) -> Result<Self> {
        ensure_same(psi.grid(), u.grid())?;
        ensure_same(psi.grid(), rho.grid())?;
        if u.dim() != psi.grid().dim() {
            return Err(Error::InvalidState("velocity needs one component per axis".into()));
        }
        Ok(State { t, psi, u, rho })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.psi.grid()
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.psi.is_finite() && self.u.is_finite() && self.rho.is_finite()
    }

    /// Divergence-free (relative to `1 + ‖∇u‖∞`) and strictly positive density.
    pub fn check_invariants(&self, plan: &SpectralPlan) -> Result<()> {
        let div = plan.divergence(&self.u)?.max_abs();
        let mut grad_max: f64 = 0.0;
        for c in self.u.components() {
            grad_max = grad_max.max(plan.gradient(c)?.max_abs());
        }
        if div > 1e-10 * (1.0 + grad_max) {
            return Err(Error::InvalidState(format!("velocity divergence {div:.3e}")));
        }
        if !(self.rho.min() > 0.0) {
            return Err(Error::InvalidState("density must be strictly positive".into()));
        }
        if !self.is_finite() {
            return Err(Error::InvalidState("non-finite values".into()));
        }
        Ok(())
    }

    /// Smallest density, reported as a floor violation if it is below `epsilon`.
    pub fn floor_violation(&self, epsilon: f64) -> Option<FloorViolation> {
        let idx = self.rho.argmin();
        let value = self.rho.values()[idx];
        (value < epsilon).then(|| FloorViolation {
            t: self.t,
            index: idx,
            position: self.grid().position(idx),
            value,
            epsilon,
        })
    }
}

/// `u · ∇f` for a complex scalar.
fn advect_complex(plan: &SpectralPlan, u: &RealVectorField, f: &ComplexField) -> Result<ComplexField> {
    let grad = plan.gradient(f)?;
    let mut out = ComplexField::zeros(f.grid());
    for (ua, ga) in u.components().iter().zip(grad.components()) {
        for ((o, &uv), &gv) in out.values_mut().iter_mut().zip(ua.values()).zip(ga.values()) {
            *o += gv * uv;
        }
    }
    Ok(out)
}

/// Coupling operator `Bψ = -½Δψ + i u·∇ψ + ½|u|²ψ + μ|ψ|²ψ`.
pub fn apply_b(
    plan: &SpectralPlan,
    psi: &ComplexField,
    u: &RealVectorField,
    params: &Params,
) -> Result<ComplexField> {
    ensure_same(psi.grid(), u.grid())?;
    let lap = plan.laplacian(psi)?;
    let adv = advect_complex(plan, u, psi)?;
    let u2 = u.magnitude_sq();
    let mut out = ComplexField::zeros(psi.grid());
    let vals = out.values_mut();
    for i in 0..vals.len() {
        let p = psi.values()[i];
        vals[i] = -0.5 * lap.values()[i]
            + I * adv.values()[i]
            + p * (0.5 * u2.values()[i] + params.mu * p.norm_sqr());
    }
    plan.dealias(&out)
}

pub fn apply_b_state(plan: &SpectralPlan, state: &State, params: &Params) -> Result<ComplexField> {
    apply_b(plan, &state.psi, &state.u, params)
}

/// `∂tψ = -ΛBψ + (i/2)Δψ - iμ|ψ|²ψ`.
pub fn nls_rhs(plan: &SpectralPlan, state: &State, params: &Params) -> Result<ComplexField> {
    let b = apply_b_state(plan, state, params)?;
    let lap = plan.laplacian(&state.psi)?;
    let mut out = ComplexField::zeros(state.grid());
    let vals = out.values_mut();
    for i in 0..vals.len() {
        let p = state.psi.values()[i];
        vals[i] = -params.lambda * b.values()[i] + 0.5 * I * lap.values()[i]
            - I * params.mu * p.norm_sqr() * p;
    }
    plan.dealias(&out)
}

/// Part of the Schrödinger right-hand side not covered by the linear
/// operator `((Λ+i)/2)Δ`: `-Λ(i u·∇ψ + ½|u|²ψ) - (Λ+i)μ|ψ|²ψ`.
pub(crate) fn nls_nonlinear(
    plan: &SpectralPlan,
    psi: &ComplexField,
    u: &RealVectorField,
    params: &Params,
) -> Result<ComplexField> {
    let adv = advect_complex(plan, u, psi)?;
    let u2 = u.magnitude_sq();
    let lam = params.lambda;
    let cubic = Complex64::new(lam, 1.0) * params.mu;
    let mut out = ComplexField::zeros(psi.grid());
    let vals = out.values_mut();
    for i in 0..vals.len() {
        let p = psi.values()[i];
        vals[i] = -lam * (I * adv.values()[i] + 0.5 * u2.values()[i] * p) - cubic * p.norm_sqr() * p;
    }
    plan.dealias(&out)
}

/// Pointwise `Re(ψ̄ Bψ)` and `Im(ψ̄ Bψ)` products, untruncated.
fn psi_b_products(psi: &ComplexField, b: &ComplexField) -> Result<ComplexField> {
    psi.zip_map(b, |p, q| p.conj() * q)
}

/// Mass-exchange source `2Λ Re(ψ̄ Bψ)` of the continuity equation.
pub fn continuity_source(plan: &SpectralPlan, state: &State, params: &Params) -> Result<RealField> {
    let b = apply_b_state(plan, state, params)?;
    continuity_source_with(plan, &state.psi, &b, params)
}

pub(crate) fn continuity_source_with(
    plan: &SpectralPlan,
    psi: &ComplexField,
    b: &ComplexField,
    params: &Params,
) -> Result<RealField> {
    let prod = psi_b_products(psi, b)?;
    plan.dealias(&prod.map(|z| 2.0 * params.lambda * z.re))
}

/// `-2Λ Im(∇ψ̄ Bψ)` per component, untruncated.
fn friction_term(
    plan: &SpectralPlan,
    psi: &ComplexField,
    b: &ComplexField,
    params: &Params,
) -> Result<RealVectorField> {
    let grad = plan.gradient(psi)?;
    let comps = grad
        .components()
        .iter()
        .map(|g| g.zip_map(b, |gv, bv| -2.0 * params.lambda * (gv.conj() * bv).im))
        .collect::<Result<Vec<_>>>()?;
    VectorField::from_components(comps)
}

/// `-2Λ Im(∇ψ̄ Bψ) - 2Λ u Re(ψ̄ Bψ)`, the momentum source of the
/// non-conservative form.
pub fn momentum_source_nonconservative(
    plan: &SpectralPlan,
    state: &State,
    params: &Params,
) -> Result<RealVectorField> {
    let b = apply_b_state(plan, state, params)?;
    momentum_source_nonconservative_with(plan, &state.psi, &state.u, &b, params)
}

pub(crate) fn momentum_source_nonconservative_with(
    plan: &SpectralPlan,
    psi: &ComplexField,
    u: &RealVectorField,
    b: &ComplexField,
    params: &Params,
) -> Result<RealVectorField> {
    let fric = friction_term(plan, psi, b, params)?;
    let exch = psi_b_products(psi, b)?.map(|z| 2.0 * params.lambda * z.re);
    let comps = fric
        .components()
        .iter()
        .zip(u.components())
        .map(|(f, ua)| {
            let drag = ua.zip_map(&exch, |a, s| a * s)?;
            plan.dealias(&f.sub(&drag)?)
        })
        .collect::<Result<Vec<_>>>()?;
    VectorField::from_components(comps)
}

/// `-2Λ Im(∇ψ̄ Bψ) + Λ∇Im(ψ̄ Bψ) + (μ/2)∇|ψ|⁴`, the momentum source of the
/// conservative form. Used for cross-checking only.
pub fn momentum_source_conservative(
    plan: &SpectralPlan,
    state: &State,
    params: &Params,
) -> Result<RealVectorField> {
    let b = apply_b_state(plan, state, params)?;
    let fric = friction_term(plan, &state.psi, &b, params)?;
    let prod = psi_b_products(&state.psi, &b)?;
    let potential = prod.zip_map(&state.psi, |z, p| {
        params.lambda * z.im + 0.5 * params.mu * p.norm_sqr() * p.norm_sqr()
    })?;
    let grad = plan.gradient(&potential)?;
    let comps = fric
        .components()
        .iter()
        .zip(grad.components())
        .map(|(f, g)| plan.dealias(&f.add(g)?))
        .collect::<Result<Vec<_>>>()?;
    VectorField::from_components(comps)
}

/// `2Λ u Re(ψ̄ Bψ)`, the drag separating the two momentum forms.
pub fn exchange_drag(plan: &SpectralPlan, state: &State, params: &Params) -> Result<RealVectorField> {
    let b = apply_b_state(plan, state, params)?;
    let exch = psi_b_products(&state.psi, &b)?.map(|z| 2.0 * params.lambda * z.re);
    let comps = state
        .u
        .components()
        .iter()
        .map(|ua| plan.dealias(&ua.zip_map(&exch, |a, s| a * s)?))
        .collect::<Result<Vec<_>>>()?;
    VectorField::from_components(comps)
}

/// `u · ∇u`, componentwise, untruncated.
pub(crate) fn self_advection(plan: &SpectralPlan, u: &RealVectorField) -> Result<RealVectorField> {
    let comps = u
        .components()
        .iter()
        .map(|ua| {
            let g = plan.gradient(ua)?;
            u.dot(&g)
        })
        .collect::<Result<Vec<_>>>()?;
    VectorField::from_components(comps)
}

pub(crate) fn check_floor(state: &State, params: &Params) -> Result<()> {
    match state.floor_violation(params.epsilon) {
        Some(v) => Err(Error::DensityFloor(v)),
        None => Ok(()),
    }
}

/// Acceleration before pressure elimination:
/// `-u·∇u + (νΔu + momentum_source_nonconservative) / ρ`.
pub fn nse_rhs(plan: &SpectralPlan, state: &State, params: &Params) -> Result<RealVectorField> {
    check_floor(state, params)?;
    let b = apply_b_state(plan, state, params)?;
    nse_rhs_with(plan, state, &b, params)
}

pub(crate) fn nse_rhs_with(
    plan: &SpectralPlan,
    state: &State,
    b: &ComplexField,
    params: &Params,
) -> Result<RealVectorField> {
    let src = momentum_source_nonconservative_with(plan, &state.psi, &state.u, b, params)?;
    let lap = plan.vector_laplacian(&state.u)?;
    let adv = self_advection(plan, &state.u)?;
    let comps = (0..state.u.dim())
        .map(|a| {
            let mut acc = RealField::zeros(state.grid());
            let vals = acc.values_mut();
            for i in 0..vals.len() {
                let rho = state.rho.values()[i];
                vals[i] = -adv.component(a).values()[i]
                    + (params.nu * lap.component(a).values()[i] + src.component(a).values()[i]) / rho;
            }
            plan.dealias(&acc)
        })
        .collect::<Result<Vec<_>>>()?;
    VectorField::from_components(comps)
}

/// Density transport `-∇·(ρu)`.
pub(crate) fn density_transport(plan: &SpectralPlan, rho: &RealField, u: &RealVectorField) -> Result<RealField> {
    let flux = u.times_scalar(rho)?;
    let div = plan.divergence(&flux)?;
    plan.dealias(&div.scaled(-1.0))
}

/// Total momentum `∫ρu + Im(ψ̄∇ψ)`, one entry per axis.
pub fn total_momentum(plan: &SpectralPlan, state: &State) -> Result<Vec<f64>> {
    let grad = plan.gradient(&state.psi)?;
    let cell = state.grid().cell_volume();
    let mut out = Vec::with_capacity(state.u.dim());
    for (ua, ga) in state.u.components().iter().zip(grad.components()) {
        let mut s = 0.0;
        for i in 0..ua.values().len() {
            s += state.rho.values()[i] * ua.values()[i]
                + (state.psi.values()[i].conj() * ga.values()[i]).im;
        }
        out.push(s * cell);
    }
    Ok(out)
}

/// Relative gap between `Re⟨ψ,Bψ⟩` and `½‖(-i∇-u)ψ‖² + μ‖ψ‖⁴_{L⁴}`.
pub fn quadratic_form_residual(plan: &SpectralPlan, state: &State, params: &Params) -> Result<f64> {
    let b = apply_b_state(plan, state, params)?;
    let cell = state.grid().cell_volume();
    let q: f64 = state
        .psi
        .values()
        .iter()
        .zip(b.values())
        .map(|(p, v)| (p.conj() * v).re)
        .sum::<f64>()
        * cell;
    let grad = plan.gradient(&state.psi)?;
    let mut cov = 0.0;
    let mut quartic = 0.0;
    for i in 0..state.psi.values().len() {
        let p = state.psi.values()[i];
        for (g, u) in grad.components().iter().zip(state.u.components()) {
            cov += (-I * g.values()[i] - u.values()[i] * p).norm_sqr();
        }
        quartic += p.norm_sqr().powi(2);
    }
    let form = (0.5 * cov + params.mu * quartic) * cell;
    Ok(if form == 0.0 { q.abs() } else { (q - form).abs() / form })
}

/// `‖Leray(conservative - nonconservative - drag)‖∞` over the largest of
/// the three sup norms.
pub fn source_form_residual(plan: &SpectralPlan, state: &State, params: &Params) -> Result<f64> {
    let cons = momentum_source_conservative(plan, state, params)?;
    let non = momentum_source_nonconservative(plan, state, params)?;
    let drag = exchange_drag(plan, state, params)?;
    let scale = cons.max_abs().max(non.max_abs()).max(drag.max_abs());
    let (proj, _) = plan.leray_project(&cons.sub(&non)?.sub(&drag)?)?;
    Ok(if scale == 0.0 { proj.max_abs() } else { proj.max_abs() / scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initial::{plane_wave_state, random_state, PlaneWave, RandomStateSpec};
    use crate::norm::inner_product;
    use std::f64::consts::PI;

    fn grid2() -> Arc<Grid> {
        Grid::new(&[16, 16], &[2.0 * PI, 2.0 * PI]).unwrap()
    }

    fn params() -> Params {
        Params { lambda: 0.3, mu: 0.7, nu: 0.05, ..Params::default() }
    }

    fn wave() -> PlaneWave {
        PlaneWave { k: vec![1, -2], a: Complex64::new(0.6, -0.3), velocity: vec![0.4, 0.25], rho: 1.1 }
    }

    #[test]
    fn constant_psi_at_rest() {
        let g = grid2();
        let plan = SpectralPlan::new(&g);
        let p = params();
        let c = Complex64::new(0.8, 0.5);
        let st = State::new(0.0, ComplexField::constant(&g, c), VectorField::zeros(&g), RealField::constant(&g, 1.0)).unwrap();
        let b = apply_b_state(&plan, &st, &p).unwrap();
        let expect = c * p.mu * c.norm_sqr();
        assert!(b.values().iter().all(|v| (v - expect).norm() < 1e-14));

        let rhs = nls_rhs(&plan, &st, &p).unwrap();
        let expect = -Complex64::new(p.lambda, 1.0) * p.mu * c.norm_sqr() * c;
        assert!(rhs.values().iter().all(|v| (v - expect).norm() < 1e-14));

        let s = continuity_source(&plan, &st, &p).unwrap();
        let expect = 2.0 * p.lambda * p.mu * c.norm_sqr().powi(2);
        assert!(s.values().iter().all(|v| (v - expect).abs() < 1e-14));

        assert!(momentum_source_nonconservative(&plan, &st, &p).unwrap().max_abs() < 1e-14);
        assert!(momentum_source_conservative(&plan, &st, &p).unwrap().max_abs() < 1e-13);
        assert!(nse_rhs(&plan, &st, &p).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn plane_wave_formulas() {
        let g = grid2();
        let plan = SpectralPlan::new(&g);
        let p = params();
        let w = wave();
        let st = plane_wave_state(&g, &w).unwrap();
        let k = [1.0, -2.0];
        let rel = [k[0] - w.velocity[0], k[1] - w.velocity[1]];
        let beta = 0.5 * (rel[0] * rel[0] + rel[1] * rel[1]) + p.mu * w.a.norm_sqr();

        let b = apply_b_state(&plan, &st, &p).unwrap();
        for (bv, pv) in b.values().iter().zip(st.psi.values()) {
            assert!((bv - pv * beta).norm() < 1e-13);
        }
        let s = continuity_source(&plan, &st, &p).unwrap();
        let expect = 2.0 * p.lambda * w.a.norm_sqr() * beta;
        assert!(s.values().iter().all(|v| (v - expect).abs() < 1e-13));

        let f = momentum_source_nonconservative(&plan, &st, &p).unwrap();
        let acc = nse_rhs(&plan, &st, &p).unwrap();
        for a in 0..2 {
            let e = 2.0 * p.lambda * w.a.norm_sqr() * beta * rel[a];
            assert!(f.component(a).values().iter().all(|v| (v - e).abs() < 1e-13));
            assert!(acc.component(a).values().iter().all(|v| (v - e / w.rho).abs() < 1e-13));
        }
        // projected conservative source = non-conservative source + exchange drag
        let cons = momentum_source_conservative(&plan, &st, &p).unwrap();
        let (proj, _) = plan.leray_project(&cons).unwrap();
        for a in 0..2 {
            let e = 2.0 * p.lambda * w.a.norm_sqr() * beta * k[a];
            assert!(proj.component(a).values().iter().all(|v| (v - e).abs() < 1e-12));
        }

        let free = Params { lambda: 0.0, mu: 0.0, ..p };
        let st0 = plane_wave_state(&g, &PlaneWave { velocity: vec![0.0, 0.0], ..w.clone() }).unwrap();
        let rhs = nls_rhs(&plan, &st0, &free).unwrap();
        for (r, pv) in rhs.values().iter().zip(st0.psi.values()) {
            assert!((r - Complex64::new(0.0, -2.5) * pv).norm() < 1e-13);
        }
    }

    #[test]
    fn galilean_shift_of_plane_waves() {
        let g = grid2();
        let plan = SpectralPlan::new(&g);
        let p = Params { mu: 0.0, ..params() };
        // u = U uniform with k, versus k - U at rest: same multiplier
        let a = PlaneWave { k: vec![2, 1], a: Complex64::new(0.5, 0.1), velocity: vec![1.0, 0.0], rho: 1.0 };
        let b = PlaneWave { k: vec![1, 1], velocity: vec![0.0, 0.0], ..a.clone() };
        let sa = plane_wave_state(&g, &a).unwrap();
        let sb = plane_wave_state(&g, &b).unwrap();
        let ba = apply_b_state(&plan, &sa, &p).unwrap();
        let bb = apply_b_state(&plan, &sb, &p).unwrap();
        let ra: Vec<Complex64> = ba.values().iter().zip(sa.psi.values()).map(|(x, y)| x / y).collect();
        let rb: Vec<Complex64> = bb.values().iter().zip(sb.psi.values()).map(|(x, y)| x / y).collect();
        for (x, y) in ra.iter().zip(&rb) {
            assert!((x - y).norm() < 1e-13);
        }
    }

    #[test]
    fn quadratic_form_and_mass_exchange() {
        let g = grid2();
        let plan = SpectralPlan::new(&g);
        let p = params();
        for seed in 0..10 {
            let st = random_state(&g, &RandomStateSpec::default(), &p, seed).unwrap();
            let b = apply_b_state(&plan, &st, &p).unwrap();
            let q = inner_product(&st.psi, &b).unwrap().re;

            // ½‖(-i∇ - u)ψ‖² + μ‖ψ‖⁴_{L⁴} from its own pieces
            let grad = plan.gradient(&st.psi).unwrap();
            let mut cov = 0.0;
            let mut quartic = 0.0;
            for i in 0..g.point_count() {
                let pv = st.psi.values()[i];
                for a in 0..2 {
                    let d = -I * grad.component(a).values()[i] - st.u.component(a).values()[i] * pv;
                    cov += d.norm_sqr();
                }
                quartic += pv.norm_sqr().powi(2);
            }
            let rhs = (0.5 * cov + p.mu * quartic) * g.cell_volume();
            assert!((q - rhs).abs() <= 1e-10 * rhs, "{q} vs {rhs}");
            assert!(q >= 0.0);

            // d/dt ½‖ψ‖² = -Λ Re⟨ψ,Bψ⟩ and the density source balances it
            let dpsi = nls_rhs(&plan, &st, &p).unwrap();
            let rate = inner_product(&st.psi, &dpsi).unwrap().re;
            assert!((rate + p.lambda * q).abs() <= 1e-10 * p.lambda * q);
            let src = continuity_source(&plan, &st, &p).unwrap().integral();
            assert!((src + 2.0 * rate).abs() <= 1e-10 * src.abs());
        }
    }

    #[test]
    fn residual_helpers_agree_with_identities() {
        let g = grid2();
        let plan = SpectralPlan::new(&g);
        let p = params();
        for seed in 0..5 {
            let st = random_state(&g, &RandomStateSpec::default(), &p, 300 + seed).unwrap();
            assert!(quadratic_form_residual(&plan, &st, &p).unwrap() <= 1e-10);
            assert!(source_form_residual(&plan, &st, &p).unwrap() <= 1e-10);
        }
    }

    #[test]
    fn momentum_forms_differ_by_gradient() {
        let g = grid2();
        let plan = SpectralPlan::new(&g);
        let p = params();
        for seed in 0..10 {
            let st = random_state(&g, &RandomStateSpec::default(), &p, 100 + seed).unwrap();
            let cons = momentum_source_conservative(&plan, &st, &p).unwrap();
            let non = momentum_source_nonconservative(&plan, &st, &p).unwrap();
            let drag = exchange_drag(&plan, &st, &p).unwrap();
            let diff = cons.sub(&non).unwrap().sub(&drag).unwrap();
            let (proj, _) = plan.leray_project(&diff).unwrap();
            assert!(proj.max_abs() <= 1e-10 * cons.max_abs());
        }
    }

    #[test]
    fn nonconservative_source_term_by_term() {
        let g = grid2();
        let plan = SpectralPlan::new(&g);
        let p = params();
        let st = random_state(&g, &RandomStateSpec::default(), &p, 77).unwrap();
        let b = apply_b_state(&plan, &st, &p).unwrap();
        let grad = plan.gradient(&st.psi).unwrap();
        let src = momentum_source_nonconservative(&plan, &st, &p).unwrap();
        for a in 0..2 {
            let mut f = RealField::zeros(&g);
            for i in 0..g.point_count() {
                let pv = st.psi.values()[i];
                let bv = b.values()[i];
                let gv = grad.component(a).values()[i];
                f.values_mut()[i] = -2.0 * p.lambda * (gv.conj() * bv).im
                    - 2.0 * p.lambda * st.u.component(a).values()[i] * (pv.conj() * bv).re;
            }
            let f = plan.dealias(&f).unwrap();
            assert!(f.sub(src.component(a)).unwrap().max_abs() <= 1e-12 * f.max_abs());
        }
    }

    #[test]
    fn nse_rhs_manufactured_flow() {
        // ψ = 0: rhs = -u·∇u + νΔu/ρ for a Taylor-Green field, known in closed form
        let g = Grid::new(&[32, 32], &[2.0 * PI, 2.0 * PI]).unwrap();
        let plan = SpectralPlan::new(&g);
        let p = params();
        let amp = 0.7;
        let u = VectorField::from_fn(&g, |x| {
            [amp * x[0].sin() * x[1].cos(), -amp * x[0].cos() * x[1].sin(), 0.0]
        });
        let rho = RealField::from_fn(&g, |x| 1.0 + 0.1 * (x[0] + x[1]).cos());
        let st = State::new(0.0, ComplexField::zeros(&g), u, rho.clone()).unwrap();
        let acc = nse_rhs(&plan, &st, &p).unwrap();
        for i in 0..g.point_count() {
            let x = g.position(i);
            let (s0, c0, s1, c1) = (x[0].sin(), x[0].cos(), x[1].sin(), x[1].cos());
            // (u·∇)u for Taylor-Green: (amp²/2) (sin 2x, sin 2y) · (-1)... evaluated directly
            let ux = amp * s0 * c1;
            let uy = -amp * c0 * s1;
            let adv_x = ux * amp * c0 * c1 + uy * (-amp * s0 * s1);
            let adv_y = ux * amp * s0 * s1 + uy * (-amp * c0 * c1);
            let r = rho.values()[i];
            let ex = -adv_x + p.nu * (-2.0 * ux) / r;
            let ey = -adv_y + p.nu * (-2.0 * uy) / r;
            assert!((acc.component(0).values()[i] - ex).abs() < 1e-12);
            assert!((acc.component(1).values()[i] - ey).abs() < 1e-12);
        }
    }

    #[test]
    fn floor_violation_is_reported() {
        let g = grid2();
        let plan = SpectralPlan::new(&g);
        let p = params();
        let mut rho = RealField::constant(&g, 1.0);
        rho.values_mut()[17] = 0.2;
        let st = State::new(0.25, ComplexField::zeros(&g), VectorField::zeros(&g), rho).unwrap();
        match nse_rhs(&plan, &st, &p) {
            Err(Error::DensityFloor(v)) => {
                assert_eq!(v.index, 17);
                assert_eq!(v.value, 0.2);
                assert_eq!(v.t, 0.25);
            }
            other => panic!("expected floor violation, got {other:?}"),
        }
    }

    #[test]
    fn params_validation() {
        assert!(Params::default().validate().is_ok());
        let e = Params { epsilon: 2.0, m: 1.0, big_m: 1.5, ..Params::default() }.validate();
        assert!(e.unwrap_err().to_string().contains("epsilon must lie in (0, m)"));
        assert!(Params { lambda: 0.0, ..Params::default() }.validate().is_err());
        assert!(Params { nu: -1.0, ..Params::default() }.validate().is_err());
        assert!(Params { m: 2.0, big_m: 1.0, ..Params::default() }.validate().is_err());
        let p = Params { m: 1.0, big_m: 2.0, epsilon: 0.25, ..Params::default() };
        assert_eq!(p.m_prime(), 2.75);
    }

    #[test]
    fn momentum_of_plane_wave() {
        let g = grid2();
        let plan = SpectralPlan::new(&g);
        let w = wave();
        let st = plane_wave_state(&g, &w).unwrap();
        let pm = total_momentum(&plan, &st).unwrap();
        let v = g.volume();
        for a in 0..2 {
            let e = (w.rho * w.velocity[a] + w.k[a] as f64 * w.a.norm_sqr()) * v;
            assert!((pm[a] - e).abs() < 1e-12 * v);
        }
    }
}
