//! Plane-wave reduction of the full system and an adaptive Dormand–Prince
//! 5(4) integrator for it.
//!
//! For `ψ = a e^{ik·x}`, `u ≡ U`, `ρ ≡ ρ` the model collapses to
//!
//! ```text
//! a' = -Λβa - i(½|k|² + μ|a|²)a
//! ρ' = 2Λβ|a|²
//! ρU' = 2Λβ|a|²(k - U),        β = ½|k - U|² + μ|a|²
//! ```
//!
//! with `ρ + |a|²` and `ρU + k|a|²` conserved.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::{Params, State};

/// One point of the reduced trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedState {
    pub t: f64,
    pub a: Complex64,
    pub u: Vec<f64>,
    pub rho: f64,
}

impl ReducedState {
    pub fn mass(&self) -> f64 {
        self.rho + self.a.norm_sqr()
    }

    pub fn momentum(&self, k: &[f64]) -> Vec<f64> {
        let a2 = self.a.norm_sqr();
        self.u.iter().zip(k).map(|(u, k)| self.rho * u + k * a2).collect()
    }
}

struct Reduced<'a> {
    params: &'a Params,
    k: &'a [f64],
}

impl Reduced<'_> {
    /// Packed layout: `[Re a, Im a, ρ, U_0, .., U_{d-1}]`.
    fn rhs(&self, y: &[f64], out: &mut [f64]) {
        let p = self.params;
        let a = Complex64::new(y[0], y[1]);
        let rho = y[2];
        let a2 = a.norm_sqr();
        let k2: f64 = self.k.iter().map(|k| k * k).sum();
        let rel2: f64 = self.k.iter().zip(&y[3..]).map(|(k, u)| (k - u).powi(2)).sum();
        let beta = 0.5 * rel2 + p.mu * a2;
        let da = -p.lambda * beta * a - Complex64::new(0.0, 0.5 * k2 + p.mu * a2) * a;
        out[0] = da.re;
        out[1] = da.im;
        let exchange = 2.0 * p.lambda * beta * a2;
        out[2] = exchange;
        for (i, k) in self.k.iter().enumerate() {
            out[3 + i] = exchange * (k - y[3 + i]) / rho;
        }
    }
}

fn unpack(t: f64, y: &[f64]) -> ReducedState {
    ReducedState { t, a: Complex64::new(y[0], y[1]), u: y[3..].to_vec(), rho: y[2] }
}

/// Accepted steps of the oracle with cubic Hermite interpolation in between.
#[derive(Debug, Clone)]
pub struct OracleTrajectory {
    pub k: Vec<f64>,
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
    slopes: Vec<Vec<f64>>,
}

impl OracleTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn nodes(&self) -> impl Iterator<Item = ReducedState> + '_ {
        self.times.iter().zip(&self.values).map(|(&t, y)| unpack(t, y))
    }

    pub fn last(&self) -> ReducedState {
        unpack(*self.times.last().expect("non-empty"), self.values.last().expect("non-empty"))
    }

    /// State at `t`, clamped to the integrated interval.
    pub fn at(&self, t: f64) -> ReducedState {
        let n = self.times.len();
        let t = t.clamp(self.times[0], self.times[n - 1]);
        if n == 1 {
            return unpack(t, &self.values[0]);
        }
        let i = self.times.partition_point(|&s| s <= t).clamp(1, n - 1) - 1;
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let y: Vec<f64> = (0..self.values[i].len())
            .map(|j| {
                h00 * self.values[i][j]
                    + h10 * h * self.slopes[i][j]
                    + h01 * self.values[i + 1][j]
                    + h11 * h * self.slopes[i + 1][j]
            })
            .collect();
        unpack(t, &y)
    }
}

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights (equal to the last row of `A`).
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Smallest tolerance the oracle accepts.
pub const MIN_TOL: f64 = 1e-14;

/// Integrate the plane-wave reduction from `t = 0` to `t_end` with mixed
/// absolute/relative local error `tol`, then verify that mass and momentum
/// drift by at most `10·tol`.
pub fn reduced_ode_oracle(
    params: &Params,
    k: &[f64],
    a0: Complex64,
    u0: &[f64],
    rho0: f64,
    t_end: f64,
    tol: f64,
) -> Result<OracleTrajectory> {
    if !(rho0 > 0.0) {
        return Err(Error::InvalidState(format!("oracle density must be positive, got {rho0}")));
    }
    if k.len() != u0.len() {
        return Err(Error::InvalidState("wavevector and velocity dimensions differ".into()));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidParams(format!("horizon must be non-negative, got {t_end}")));
    }
    if !(tol >= MIN_TOL) {
        return Err(Error::Tolerance { tol, reason: format!("below the floor {MIN_TOL:e}") });
    }
    let sys = Reduced { params, k };
    let mut y = vec![a0.re, a0.im, rho0];
    y.extend_from_slice(u0);
    let n = y.len();
    let mut f = vec![0.0; n];
    sys.rhs(&y, &mut f);

    let mut traj = OracleTrajectory {
        k: k.to_vec(),
        times: vec![0.0],
        values: vec![y.clone()],
        slopes: vec![f.clone()],
    };
    let mut t = 0.0;
    let mut h = (tol.powf(0.2) * 0.1).min(t_end.max(f64::MIN_POSITIVE));
    let mut stages = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut rejects = 0usize;
    while t < t_end {
        h = h.min(t_end - t);
        if h < 1e-14 * t_end.max(1.0) {
            return Err(Error::Tolerance { tol, reason: format!("step size underflow at t = {t}") });
        }
        stages[0].copy_from_slice(&f);
        for st in 1..7 {
            for j in 0..n {
                tmp[j] = y[j] + h * (0..st).map(|r| A[st][r] * stages[r][j]).sum::<f64>();
            }
            sys.rhs(&tmp, &mut stages[st]);
        }
        let mut err = 0.0f64;
        let mut y5 = vec![0.0; n];
        for j in 0..n {
            let mut hi = 0.0;
            let mut lo = 0.0;
            for s in 0..7 {
                hi += B5[s] * stages[s][j];
                lo += B4[s] * stages[s][j];
            }
            y5[j] = y[j] + h * hi;
            let scale = tol * (1.0 + y[j].abs().max(y5[j].abs()));
            err = err.max((h * (hi - lo)).abs() / scale);
        }
        if !err.is_finite() {
            return Err(Error::Tolerance { tol, reason: format!("non-finite error estimate at t = {t}") });
        }
        if err <= 1.0 {
            t = if t_end - (t + h) <= 1e-15 * t_end { t_end } else { t + h };
            y = y5;
            // first-same-as-last: the seventh stage is f at the new point
            f.copy_from_slice(&stages[6]);
            traj.times.push(t);
            traj.values.push(y.clone());
            traj.slopes.push(f.clone());
            rejects = 0;
        } else {
            rejects += 1;
            if rejects > 100 {
                return Err(Error::Tolerance { tol, reason: format!("repeated step rejection at t = {t}") });
            }
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
    }

    let first = unpack(0.0, &traj.values[0]);
    let m0 = first.mass();
    let p0 = first.momentum(k);
    for s in traj.nodes() {
        let dm = (s.mass() - m0).abs() / m0.abs().max(1.0);
        let dp = s
            .momentum(k)
            .iter()
            .zip(&p0)
            .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
            .fold(0.0f64, f64::max);
        if dm > 10.0 * tol || dp > 10.0 * tol {
            return Err(Error::Tolerance {
                tol,
                reason: format!("conserved quantities drift by {:.3e} at t = {}", dm.max(dp), s.t),
            });
        }
    }
    Ok(traj)
}

/// Plane-wave content of a PDE state: `a` = coefficient of `e^{ik·x}` for the
/// integer mode `modes`, and the means of `u` and `ρ`.
pub fn project_plane_wave(grid: &Arc<Grid>, state: &State, modes: &[i64]) -> ReducedState {
    let len = grid.len();
    let count = grid.point_count() as f64;
    let mut a = Complex64::default();
    for (idx, p) in state.psi.values().iter().enumerate() {
        let x = grid.position(idx);
        let phase: f64 = (0..grid.dim())
            .map(|d| 2.0 * std::f64::consts::PI * modes[d] as f64 * x[d] / len[d])
            .sum();
        a += p * Complex64::new(0.0, -phase).exp();
    }
    ReducedState {
        t: state.t,
        a: a / count,
        u: state.u.components().iter().map(|c| c.mean()).collect(),
        rho: state.rho.mean(),
    }
}

/// Largest deviation between two reduced states: relative in `|a|` and
/// `ρ`, absolute in the phase of `a` (radians), and relative to the velocity
/// scale `max(‖U‖∞, |k|)` (or 1 if both vanish) for each `U` component.
pub fn reduced_deviation(pde: &ReducedState, oracle: &ReducedState, k: &[f64]) -> f64 {
    let rel = |x: f64, y: f64| (x - y).abs() / y.abs();
    let amp = rel(pde.a.norm(), oracle.a.norm());
    let rho = rel(pde.rho, oracle.rho);
    let phase = (pde.a * oracle.a.conj()).arg().abs();
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let scale = match inf(&oracle.u).max(inf(k)) {
        s if s > 0.0 => s,
        _ => 1.0,
    };
    let vel = pde.u.iter().zip(&oracle.u).fold(0.0f64, |m, (p, o)| m.max((p - o).abs() / scale));
    amp.max(rho).max(phase).max(vel)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_zero_closed_form() {
        let p = Params { lambda: 0.3, mu: 1.2, ..Params::default() };
        let a0 = Complex64::new(0.8, -0.4);
        let tr = reduced_ode_oracle(&p, &[0.0, 0.0], a0, &[0.0, 0.0], 1.0, 2.0, 1e-12).unwrap();
        for s in tr.nodes() {
            let exact = a0.norm_sqr() / (1.0 + 2.0 * p.lambda * p.mu * a0.norm_sqr() * s.t);
            assert!((s.a.norm_sqr() - exact).abs() < 1e-10, "t {}", s.t);
            assert!(s.u.iter().all(|&u| u == 0.0));
        }
        let mid = tr.at(0.77);
        let exact = a0.norm_sqr() / (1.0 + 2.0 * p.lambda * p.mu * a0.norm_sqr() * 0.77);
        assert!((mid.a.norm_sqr() - exact).abs() < 1e-9);
        assert_eq!(tr.last().t, 2.0);
    }

    #[test]
    fn conserved_quantities_hold() {
        let p = Params::default();
        let k = [1.0, -2.0];
        let tr = reduced_ode_oracle(&p, &k, Complex64::new(0.5, 0.2), &[0.3, 0.1], 1.1, 1.0, 1e-11).unwrap();
        let first = tr.nodes().next().unwrap();
        for s in tr.nodes() {
            assert!((s.mass() - first.mass()).abs() < 1e-10);
            for (a, b) in s.momentum(&k).iter().zip(first.momentum(&k)) {
                assert!((a - b).abs() < 1e-10);
            }
        }
        assert!(tr.last().rho > 1.1);
    }

    #[test]
    fn rejects_bad_input() {
        let p = Params::default();
        let a = Complex64::new(1.0, 0.0);
        assert!(reduced_ode_oracle(&p, &[0.0], a, &[0.0], 0.0, 1.0, 1e-8).is_err());
        assert!(matches!(
            reduced_ode_oracle(&p, &[0.0], a, &[0.0], 1.0, 1.0, 1e-20),
            Err(Error::Tolerance { .. })
        ));
    }
}
