//! Fourier calculus on the periodic grid: derivatives, Leray projection,
//! 2/3-rule truncation and diagonal Helmholtz solves.
//!
//! Forward transforms are unnormalized; inverse transforms divide by the
//! point count. Odd derivatives use wavenumbers with the Nyquist entry set to
//! zero so that `divergence` is the exact negative adjoint of `gradient` and
//! real fields stay real.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{ensure_same, Field, Grid, RealField, RealVectorField, Sample, VectorField};

/// Fourier coefficients of a field, in the FFT ordering of the grid.
pub type Spectrum = Vec<Complex64>;

pub struct SpectralPlan {
    grid: Arc<Grid>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    /// Derivative wavenumbers per axis and node, Nyquist zeroed.
    kd: Vec<Vec<f64>>,
    /// `|k|²` with the true Nyquist wavenumber.
    k2: Vec<f64>,
    /// `|kd|²`.
    kd2: Vec<f64>,
    keep: Vec<bool>,
}

impl std::fmt::Debug for SpectralPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralPlan").field("grid", &self.grid).finish_non_exhaustive()
    }
}

impl SpectralPlan {
    pub fn new(grid: &Arc<Grid>) -> Self {
        let mut planner = FftPlanner::<f64>::new();
        let dim = grid.dim();
        let n = grid.n();
        let forward = (0..dim).map(|a| planner.plan_fft_forward(n[a])).collect();
        let inverse = (0..dim).map(|a| planner.plan_fft_inverse(n[a])).collect();

        let count = grid.point_count();
        let mut kd = vec![vec![0.0; count]; dim];
        let mut k2 = vec![0.0; count];
        let mut kd2 = vec![0.0; count];
        let mut keep = vec![true; count];
        for idx in 0..count {
            let ijk = grid.unravel(idx);
            for a in 0..dim {
                let k = grid.wavenumbers(a)[ijk[a]];
                let m = grid.mode_indices(a)[ijk[a]];
                let nyquist = m == -(n[a] as i64) / 2;
                let kda = if nyquist { 0.0 } else { k };
                kd[a][idx] = kda;
                k2[idx] += k * k;
                kd2[idx] += kda * kda;
                if (m.unsigned_abs() as f64) > n[a] as f64 / 3.0 {
                    keep[idx] = false;
                }
            }
        }
        SpectralPlan { grid: grid.clone(), forward, inverse, kd, k2, kd2, keep }
    }

    /// Same plan with the 2/3-rule truncation switched off, so `dealias` is the identity.
    pub fn without_truncation(mut self) -> Self {
        self.keep.fill(true);
        self
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// `|k|²` per node, FFT order.
    pub fn k_squared(&self) -> &[f64] {
        &self.k2
    }

    /// Derivative wavenumber along `axis` per node (Nyquist zeroed).
    pub fn derivative_wavenumbers(&self, axis: usize) -> &[f64] {
        &self.kd[axis]
    }

    /// Whether a mode survives the 2/3-rule truncation.
    pub fn is_resolved(&self, idx: usize) -> bool {
        self.keep[idx]
    }

    fn check<T: Sample>(&self, f: &Field<T>) -> Result<()> {
        ensure_same(&self.grid, f.grid())
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let shape = self.grid.shape3();
        let plans = if inverse { &self.inverse } else { &self.forward };
        for (axis, fft) in plans.iter().enumerate() {
            let n = shape[axis];
            let stride: usize = shape[axis + 1..].iter().product();
            let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
            if stride == 1 {
                fft.process_with_scratch(data, &mut scratch);
                continue;
            }
            let block = n * stride;
            let mut buf = vec![Complex64::default(); block];
            for chunk in data.chunks_exact_mut(block) {
                for i in 0..n {
                    for j in 0..stride {
                        buf[j * n + i] = chunk[i * stride + j];
                    }
                }
                fft.process_with_scratch(&mut buf, &mut scratch);
                for i in 0..n {
                    for j in 0..stride {
                        chunk[i * stride + j] = buf[j * n + i];
                    }
                }
            }
        }
        if inverse {
            let scale = 1.0 / data.len() as f64;
            for v in data.iter_mut() {
                *v *= scale;
            }
        }
    }

    pub fn forward<T: Sample>(&self, f: &Field<T>) -> Result<Spectrum> {
        self.check(f)?;
        let mut data: Vec<Complex64> = f.values().iter().map(|v| v.to_complex()).collect();
        self.transform(&mut data, false);
        Ok(data)
    }

    /// Inverse transform; real fields keep the real part.
    pub fn inverse<T: Sample>(&self, mut spec: Spectrum) -> Field<T> {
        assert_eq!(spec.len(), self.grid.point_count(), "spectrum length mismatch");
        self.transform(&mut spec, true);
        let data = spec.into_iter().map(T::from_complex).collect();
        Field::from_vec(&self.grid, data).expect("length checked")
    }

    fn apply_multiplier<T: Sample>(
        &self,
        f: &Field<T>,
        m: impl Fn(usize) -> Complex64,
    ) -> Result<Field<T>> {
        let mut s = self.forward(f)?;
        for (idx, v) in s.iter_mut().enumerate() {
            *v *= m(idx);
        }
        Ok(self.inverse(s))
    }

    pub fn gradient<T: Sample>(&self, f: &Field<T>) -> Result<VectorField<T>> {
        let s = self.forward(f)?;
        let comps = (0..self.grid.dim())
            .map(|a| {
                let ka = &self.kd[a];
                let ds: Spectrum = s
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| v * Complex64::new(0.0, ka[i]))
                    .collect();
                self.inverse(ds)
            })
            .collect();
        VectorField::from_components(comps)
    }

    pub fn divergence<T: Sample>(&self, v: &VectorField<T>) -> Result<Field<T>> {
        let mut acc = vec![Complex64::default(); self.grid.point_count()];
        for (a, comp) in v.components().iter().enumerate() {
            let s = self.forward(comp)?;
            let ka = &self.kd[a];
            for (i, (o, x)) in acc.iter_mut().zip(s).enumerate() {
                *o += x * Complex64::new(0.0, ka[i]);
            }
        }
        Ok(self.inverse(acc))
    }

    pub fn laplacian<T: Sample>(&self, f: &Field<T>) -> Result<Field<T>> {
        self.apply_multiplier(f, |i| Complex64::new(-self.k2[i], 0.0))
    }

    pub fn vector_laplacian<T: Sample>(&self, v: &VectorField<T>) -> Result<VectorField<T>> {
        let comps = v
            .components()
            .iter()
            .map(|c| self.laplacian(c))
            .collect::<Result<Vec<_>>>()?;
        VectorField::from_components(comps)
    }

    /// Split `v` into its divergence-free part and the gradient of a scalar
    /// potential: `v = P v + ∇χ`. The mean mode passes through unchanged and
    /// `χ` has zero mean.
    pub fn leray_project(&self, v: &RealVectorField) -> Result<(RealVectorField, RealField)> {
        let dim = self.grid.dim();
        if v.dim() != dim {
            return Err(Error::GridMismatch);
        }
        let mut specs = v
            .components()
            .iter()
            .map(|c| self.forward(c))
            .collect::<Result<Vec<_>>>()?;
        let mut pot = vec![Complex64::default(); self.grid.point_count()];
        for i in 0..self.grid.point_count() {
            let kk = self.kd2[i];
            if kk == 0.0 {
                continue;
            }
            let mut kdotv = Complex64::default();
            for (a, s) in specs.iter().enumerate() {
                kdotv += s[i] * self.kd[a][i];
            }
            for (a, s) in specs.iter_mut().enumerate() {
                s[i] -= kdotv * (self.kd[a][i] / kk);
            }
            pot[i] = Complex64::new(0.0, -1.0) * kdotv / kk;
        }
        let comps = specs.into_iter().map(|s| self.inverse(s)).collect();
        Ok((VectorField::from_components(comps)?, self.inverse(pot)))
    }

    /// Zero every mode with some `|m_i| > n_i / 3`.
    pub fn dealias<T: Sample>(&self, f: &Field<T>) -> Result<Field<T>> {
        self.apply_multiplier(f, |i| {
            if self.keep[i] {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::default()
            }
        })
    }

    pub fn dealias_vector<T: Sample>(&self, v: &VectorField<T>) -> Result<VectorField<T>> {
        let comps = v
            .components()
            .iter()
            .map(|c| self.dealias(c))
            .collect::<Result<Vec<_>>>()?;
        VectorField::from_components(comps)
    }

    /// Solve `(I - α Δ) out = f`.
    pub fn helmholtz_solve<T: Sample>(&self, f: &Field<T>, alpha: f64) -> Result<Field<T>> {
        if !(alpha >= 0.0) {
            return Err(Error::NegativeAlpha(alpha));
        }
        if alpha == 0.0 {
            self.check(f)?;
            return Ok(f.clone());
        }
        self.apply_multiplier(f, |i| Complex64::new(1.0 / (1.0 + alpha * self.k2[i]), 0.0))
    }

    /// Squared L² norm of `∇f` evaluated spectrally with the derivative wavenumbers.
    pub fn gradient_l2_sq<T: Sample>(&self, f: &Field<T>) -> Result<f64> {
        let s = self.forward(f)?;
        let n = self.grid.point_count() as f64;
        let sum: f64 = s.iter().zip(&self.kd2).map(|(v, k)| v.norm_sqr() * k).sum();
        Ok(sum * self.grid.volume() / (n * n))
    }

    /// `Σ w(k) |f̂(k)|² · V / N²` for a weight over `|k|²`.
    pub(crate) fn weighted_energy<T: Sample>(
        &self,
        f: &Field<T>,
        weight: impl Fn(f64) -> f64,
    ) -> Result<f64> {
        let s = self.forward(f)?;
        let n = self.grid.point_count() as f64;
        let sum: f64 = s.iter().zip(&self.k2).map(|(v, &k)| v.norm_sqr() * weight(k)).sum();
        Ok(sum * self.grid.volume() / (n * n))
    }

    /// Mean-mode-free inverse of `-∇·(a ∇·)` preconditioner: `p̂ = r̂ / |kd|²`.
    pub(crate) fn inverse_neg_laplacian(&self, r: &RealField) -> Result<RealField> {
        self.apply_multiplier(r, |i| {
            let kk = self.kd2[i];
            if kk == 0.0 {
                Complex64::default()
            } else {
                Complex64::new(1.0 / kk, 0.0)
            }
        })
    }

    /// Project out the components on which the derivative operators vanish
    /// (mean and pure-Nyquist modes).
    pub(crate) fn remove_null_modes(&self, r: &RealField) -> Result<RealField> {
        self.apply_multiplier(r, |i| {
            if self.kd2[i] == 0.0 {
                Complex64::default()
            } else {
                Complex64::new(1.0, 0.0)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ComplexField;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn grid2() -> Arc<Grid> {
        Grid::new(&[16, 12], &[2.0 * PI, 3.0]).unwrap()
    }

    /// Band-limited random real field with a handful of low modes.
    fn smooth_random(grid: &Arc<Grid>, seed: u64) -> RealField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = RealField::zeros(grid);
        for _ in 0..6 {
            let kx = rng.random_range(0..3) as f64;
            let ky = rng.random_range(0..3) as f64;
            let amp: f64 = rng.random_range(-1.0..1.0);
            let ph: f64 = rng.random_range(0.0..2.0 * PI);
            let l = grid.len().to_vec();
            let g = RealField::from_fn(grid, |x| {
                amp * (2.0 * PI * (kx * x[0] / l[0] + ky * x[1] / l[1]) + ph).cos()
            });
            f.axpy(1.0, &g).unwrap();
        }
        f
    }

    #[test]
    fn transform_roundtrip_3d() {
        let g = Grid::new(&[4, 6, 8], &[1.0, 1.0, 1.0]).unwrap();
        let plan = SpectralPlan::new(&g);
        let f = ComplexField::from_fn(&g, |x| Complex64::new(x[0].sin() + x[2], x[1] * x[1]));
        let back: ComplexField = plan.inverse(plan.forward(&f).unwrap());
        for (a, b) in f.values().iter().zip(back.values()) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn gradient_of_plane_wave() {
        let g = grid2();
        let plan = SpectralPlan::new(&g);
        let k = [2.0, 2.0 * PI / 3.0];
        let f = ComplexField::from_fn(&g, |x| Complex64::new(0.0, k[0] * x[0] + k[1] * x[1]).exp());
        let grad = plan.gradient(&f).unwrap();
        for a in 0..2 {
            for (gv, fv) in grad.component(a).values().iter().zip(f.values()) {
                let expect = Complex64::new(0.0, k[a]) * fv;
                assert!((gv - expect).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn laplacian_of_constant_vanishes() {
        let g = grid2();
        let plan = SpectralPlan::new(&g);
        let lap = plan.laplacian(&RealField::constant(&g, 3.5)).unwrap();
        assert!(lap.max_abs() < 1e-13);
    }

    #[test]
    fn div_grad_matches_laplacian() {
        let g = grid2();
        let plan = SpectralPlan::new(&g);
        for seed in 0..5 {
            let f = smooth_random(&g, seed);
            let dg = plan.divergence(&plan.gradient(&f).unwrap()).unwrap();
            let lap = plan.laplacian(&f).unwrap();
            let diff = dg.sub(&lap).unwrap().max_abs();
            assert!(diff <= 1e-12 * lap.max_abs().max(1.0), "diff {diff}");
        }
    }

    #[test]
    fn leray_annihilates_gradients() {
        let g = grid2();
        let plan = SpectralPlan::new(&g);
        let chi = smooth_random(&g, 7);
        let grad = plan.gradient(&chi).unwrap();
        let (p, pot) = plan.leray_project(&grad).unwrap();
        assert!(p.max_abs() < 1e-12);
        let shift = chi.mean() - pot.mean();
        for (a, b) in chi.values().iter().zip(pot.values()) {
            assert!((a - b - shift).abs() < 1e-12);
        }
    }

    #[test]
    fn leray_keeps_solenoidal_fields() {
        let g = grid2();
        let plan = SpectralPlan::new(&g);
        let chi = smooth_random(&g, 9);
        let grad = plan.gradient(&chi).unwrap();
        let v = VectorField::from_components(vec![
            grad.component(1).scaled(-1.0),
            grad.component(0).clone(),
        ])
        .unwrap();
        let (p, _) = plan.leray_project(&v).unwrap();
        assert!(p.sub(&v).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn leray_random_field_properties() {
        let g = grid2();
        let plan = SpectralPlan::new(&g);
        let v = VectorField::from_components(vec![smooth_random(&g, 1), smooth_random(&g, 2)])
            .unwrap();
        let (p, pot) = plan.leray_project(&v).unwrap();
        assert!(plan.divergence(&p).unwrap().max_abs() < 1e-12);
        let (pp, _) = plan.leray_project(&p).unwrap();
        assert!(pp.sub(&p).unwrap().max_abs() < 1e-13);
        let recon = p.add(&plan.gradient(&pot).unwrap()).unwrap();
        assert!(recon.sub(&v).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn dealias_rules() {
        let g = Grid::new(&[12, 12], &[2.0 * PI, 2.0 * PI]).unwrap();
        let plan = SpectralPlan::new(&g);
        let low = RealField::from_fn(&g, |x| (x[0] + 2.0 * x[1]).cos());
        assert!(plan.dealias(&low).unwrap().sub(&low).unwrap().max_abs() < 1e-13);
        let nyq = RealField::from_fn(&g, |x| (6.0 * x[0]).cos());
        assert!(plan.dealias(&nyq).unwrap().max_abs() < 1e-13);
        let f = smooth_random(&g, 4).add(&nyq).unwrap();
        let e_in: f64 = f.values().iter().map(|v| v * v).sum();
        let d = plan.dealias(&f).unwrap();
        let e_out: f64 = d.values().iter().map(|v| v * v).sum();
        assert!(e_out <= e_in);
    }

    #[test]
    fn helmholtz() {
        let g = grid2();
        let plan = SpectralPlan::new(&g);
        let f = smooth_random(&g, 3);
        assert_eq!(plan.helmholtz_solve(&f, 0.0).unwrap(), f);
        assert!(matches!(plan.helmholtz_solve(&f, -1.0), Err(Error::NegativeAlpha(_))));

        let k = [1.0, 2.0 * PI / 3.0];
        let wave =
            ComplexField::from_fn(&g, |x| Complex64::new(0.0, k[0] * x[0] + k[1] * x[1]).exp());
        let sol = plan.helmholtz_solve(&wave, 1.0).unwrap();
        let factor = 1.0 / (1.0 + k[0] * k[0] + k[1] * k[1]);
        for (s, w) in sol.values().iter().zip(wave.values()) {
            assert!((s - w * factor).norm() < 1e-13);
        }

        for alpha in [0.1, 1.0, 7.5] {
            let u = plan.helmholtz_solve(&f, alpha).unwrap();
            let back = u.sub(&plan.laplacian(&u).unwrap().scaled(alpha)).unwrap();
            assert!(back.sub(&f).unwrap().max_abs() < 1e-12);
        }
    }

    #[test]
    fn leray_orthogonal_to_gradients() {
        let g = grid2();
        let plan = SpectralPlan::new(&g);
        for seed in 0..5u64 {
            let v = VectorField::from_components(vec![
                smooth_random(&g, 10 + seed),
                smooth_random(&g, 20 + seed),
            ])
            .unwrap();
            let grad = plan.gradient(&smooth_random(&g, 30 + seed)).unwrap();
            let (p, _) = plan.leray_project(&v).unwrap();
            let ip = p.dot(&grad).unwrap().integral();
            let scale = crate::norm::vector_l2(&v) * crate::norm::vector_l2(&grad);
            assert!(ip.abs() <= 1e-12 * scale, "{ip}");
        }
    }

    #[test]
    fn operators_commute_with_grid_shifts() {
        let g = grid2();
        let plan = SpectralPlan::new(&g);
        let f = smooth_random(&g, 5);
        let n = g.shape3();
        let shift = |h: &RealField| {
            let mut out = RealField::zeros(&g);
            for idx in 0..g.point_count() {
                let ijk = g.unravel(idx);
                let src = g.ravel([(ijk[0] + 3) % n[0], (ijk[1] + 5) % n[1], 0]);
                out.values_mut()[idx] = h.values()[src];
            }
            out
        };
        let a = shift(&plan.laplacian(&f).unwrap());
        let b = plan.laplacian(&shift(&f)).unwrap();
        assert!(a.sub(&b).unwrap().max_abs() < 1e-12);
        let a = shift(plan.gradient(&f).unwrap().component(1));
        let b = plan.gradient(&shift(&f)).unwrap().component(1).clone();
        assert!(a.sub(&b).unwrap().max_abs() < 1e-12);
    }
}
