//! Lebesgue and Sobolev norms on the torus.
//!
//! `L^p` norms use node-sum quadrature, `H^s` norms the spectral weight
//! `(1+|k|²)^s` (or `|k|^{2s}` for the homogeneous variant).

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{ensure_same, Field, Sample, VectorField};
use crate::spectral::SpectralPlan;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormSpec {
    /// `L^p`, `p ∈ [1, ∞]`.
    Lp(f64),
    /// `H^s` (inhomogeneous) or `Ḣ^s` (homogeneous).
    SobolevH { s: f64, homogeneous: bool },
    /// `W^{1,p}` as `(‖f‖_p^p + ‖∇f‖_p^p)^{1/p}`.
    W1p(f64),
}

impl NormSpec {
    pub fn h(s: f64) -> Self {
        NormSpec::SobolevH { s, homogeneous: false }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            NormSpec::Lp(p) | NormSpec::W1p(p) => {
                if !(p >= 1.0) {
                    return Err(Error::InvalidNorm(format!("p must be >= 1, got {p}")));
                }
            }
            NormSpec::SobolevH { s, .. } => {
                if !s.is_finite() {
                    return Err(Error::InvalidNorm(format!("s must be finite, got {s}")));
                }
            }
        }
        Ok(())
    }
}

fn lp_of_magnitudes(mags: impl Iterator<Item = f64>, p: f64, cell: f64) -> f64 {
    if p.is_infinite() {
        return mags.fold(0.0, f64::max);
    }
    if p == 2.0 {
        return (mags.map(|m| m * m).sum::<f64>() * cell).sqrt();
    }
    (mags.map(|m| m.powf(p)).sum::<f64>() * cell).powf(1.0 / p)
}

/// Pointwise Euclidean magnitude of a list of component fields.
fn magnitudes<T: Sample>(comps: &[&Field<T>]) -> Vec<f64> {
    let n = comps[0].values().len();
    (0..n)
        .map(|i| {
            if comps.len() == 1 {
                comps[0].values()[i].modulus()
            } else {
                comps
                    .iter()
                    .map(|c| {
                        let m = c.values()[i].modulus();
                        m * m
                    })
                    .sum::<f64>()
                    .sqrt()
            }
        })
        .collect()
}

fn norm_components<T: Sample>(
    plan: &SpectralPlan,
    comps: &[&Field<T>],
    spec: NormSpec,
) -> Result<f64> {
    spec.validate()?;
    for c in comps {
        ensure_same(plan.grid(), c.grid())?;
    }
    let cell = plan.grid().cell_volume();
    match spec {
        NormSpec::Lp(p) => Ok(lp_of_magnitudes(magnitudes(comps).into_iter(), p, cell)),
        NormSpec::SobolevH { s, homogeneous } => {
            let weight = |k2: f64| {
                if homogeneous {
                    if k2 == 0.0 {
                        0.0
                    } else {
                        k2.powf(s)
                    }
                } else {
                    (1.0 + k2).powf(s)
                }
            };
            let mut total = 0.0;
            for c in comps {
                total += plan.weighted_energy(c, weight)?;
            }
            Ok(total.max(0.0).sqrt())
        }
        NormSpec::W1p(p) => {
            let base = lp_of_magnitudes(magnitudes(comps).into_iter(), p, cell);
            let grads = comps
                .iter()
                .map(|c| plan.gradient(*c))
                .collect::<Result<Vec<_>>>()?;
            let grad_comps: Vec<&Field<T>> =
                grads.iter().flat_map(|g| g.components().iter()).collect();
            let dnorm = lp_of_magnitudes(magnitudes(&grad_comps).into_iter(), p, cell);
            if p.is_infinite() {
                Ok(base.max(dnorm))
            } else {
                Ok((base.powf(p) + dnorm.powf(p)).powf(1.0 / p))
            }
        }
    }
}

pub fn norm<T: Sample>(plan: &SpectralPlan, f: &Field<T>, spec: NormSpec) -> Result<f64> {
    norm_components(plan, &[f], spec)
}

pub fn vector_norm<T: Sample>(
    plan: &SpectralPlan,
    v: &VectorField<T>,
    spec: NormSpec,
) -> Result<f64> {
    let comps: Vec<&Field<T>> = v.components().iter().collect();
    norm_components(plan, &comps, spec)
}

/// `⟨f, g⟩ = ∫ conj(f) g`.
pub fn inner_product<T: Sample>(f: &Field<T>, g: &Field<T>) -> Result<Complex64> {
    ensure_same(f.grid(), g.grid())?;
    let sum: Complex64 = f
        .values()
        .iter()
        .zip(g.values())
        .map(|(a, b)| a.to_complex().conj() * b.to_complex())
        .sum();
    Ok(sum * f.grid().cell_volume())
}

/// Squared L² norm by quadrature.
pub fn l2_sq<T: Sample>(f: &Field<T>) -> f64 {
    f.values()
        .iter()
        .map(|v| {
            let m = v.modulus();
            m * m
        })
        .sum::<f64>()
        * f.grid().cell_volume()
}

pub fn vector_l2_sq<T: Sample>(v: &VectorField<T>) -> f64 {
    v.components().iter().map(l2_sq).sum()
}

pub fn vector_l2<T: Sample>(v: &VectorField<T>) -> f64 {
    vector_l2_sq(v).sqrt()
}
