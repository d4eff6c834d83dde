//! Empirical constants of the functional inequalities behind the stability
//! estimates, measured as the largest `LHS / RHS` ratio over sample fields.

use crate::error::Result;
use crate::grid::{Field, Sample};
use crate::norm::{norm, NormSpec};
use crate::spectral::SpectralPlan;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Inequality {
    /// `‖f‖₄ ≤ C ‖f‖₂^{1/4} ‖∇f‖₂^{3/4}`
    Ladyzhenskaya,
    /// `‖f‖∞ ≤ C ‖f‖_{H¹}^{1/2} ‖f‖_{H²}^{1/2}`
    Agmon,
    /// `‖f‖₂ ≤ C ‖∇f‖₂` for mean-zero `f`
    Poincare,
    /// `‖f‖₃ ≤ ‖f‖₂^{1/2} ‖f‖₆^{1/2}`
    LebesgueInterpolation,
    /// `‖f‖₆ ≤ C ‖f‖_{H¹}`
    SobolevEmbedding,
}

impl Inequality {
    pub const ALL: [Inequality; 5] = [
        Inequality::Ladyzhenskaya,
        Inequality::Agmon,
        Inequality::Poincare,
        Inequality::LebesgueInterpolation,
        Inequality::SobolevEmbedding,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Inequality::Ladyzhenskaya => "ladyzhenskaya",
            Inequality::Agmon => "agmon",
            Inequality::Poincare => "poincare",
            Inequality::LebesgueInterpolation => "lebesgue_interpolation",
            Inequality::SobolevEmbedding => "sobolev_embedding",
        }
    }

    /// Whether the exponents are valid in dimension `dim`.
    pub fn holds_in(self, dim: usize) -> bool {
        match self {
            Inequality::Poincare | Inequality::LebesgueInterpolation => true,
            _ => dim == 3,
        }
    }

    /// `(LHS, RHS)` for one field.
    pub fn sides<T: Sample>(self, plan: &SpectralPlan, f: &Field<T>) -> Result<(f64, f64)> {
        let lp = |p: f64| norm(plan, f, NormSpec::Lp(p));
        let h = |s: f64| norm(plan, f, NormSpec::h(s));
        let grad = || plan.gradient_l2_sq(f).map(f64::sqrt);
        Ok(match self {
            Inequality::Ladyzhenskaya => (lp(4.0)?, lp(2.0)?.powf(0.25) * grad()?.powf(0.75)),
            Inequality::Agmon => (lp(f64::INFINITY)?, (h(1.0)? * h(2.0)?).sqrt()),
            Inequality::Poincare => (lp(2.0)?, grad()?),
            Inequality::LebesgueInterpolation => (lp(3.0)?, (lp(2.0)? * lp(6.0)?).sqrt()),
            Inequality::SobolevEmbedding => (lp(6.0)?, h(1.0)?),
        })
    }
}

/// Default ratio cap above which a constant is treated as an implementation bug.
pub const DEFAULT_CAP: f64 = 100.0;

#[derive(Debug, Clone, PartialEq)]
pub struct InequalityResult {
    pub inequality: Inequality,
    /// Largest ratio seen; `None` if every sample was skipped.
    pub max_ratio: Option<f64>,
    pub samples: usize,
    pub skipped: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidatorReport {
    pub cap: f64,
    pub results: Vec<InequalityResult>,
    /// Set when some inequalities were left out for the grid dimension.
    pub notice: Option<String>,
}

impl ValidatorReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn get(&self, which: Inequality) -> Option<&InequalityResult> {
        self.results.iter().find(|r| r.inequality == which)
    }
}

/// Largest `LHS / RHS` per inequality over `fields`. Zero fields are skipped;
/// a nonzero LHS over a zero RHS counts as an infinite ratio.
pub fn inequality_validator<T: Sample>(
    plan: &SpectralPlan,
    fields: &[Field<T>],
    cap: f64,
) -> Result<ValidatorReport> {
    let dim = plan.grid().dim();
    let chosen: Vec<Inequality> = Inequality::ALL.into_iter().filter(|i| i.holds_in(dim)).collect();
    let notice = (chosen.len() < Inequality::ALL.len()).then(|| {
        format!(
            "d = {dim}: only {} checked; the other exponents are three-dimensional",
            chosen.iter().map(|i| i.name()).collect::<Vec<_>>().join(", ")
        )
    });
    let mut results = Vec::with_capacity(chosen.len());
    for which in chosen {
        let mut max_ratio: Option<f64> = None;
        let mut skipped = 0;
        for f in fields {
            let (lhs, rhs) = which.sides(plan, f)?;
            if lhs == 0.0 && rhs == 0.0 {
                skipped += 1;
                continue;
            }
            let ratio = if rhs == 0.0 { f64::INFINITY } else { lhs / rhs };
            max_ratio = Some(max_ratio.map_or(ratio, |m| m.max(ratio)));
        }
        results.push(InequalityResult {
            inequality: which,
            max_ratio,
            samples: fields.len(),
            skipped,
            passed: max_ratio.is_none_or(|r| r.is_finite() && r <= cap),
        });
    }
    Ok(ValidatorReport { cap, results, notice })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{ComplexField, Grid, RealField};
    use crate::initial::random_real_field;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn constant_modulus_mode_is_sharp_for_interpolation() {
        let g = Grid::new(&[8, 8, 8], &[2.0 * PI; 3]).unwrap();
        let plan = SpectralPlan::new(&g);
        let f = ComplexField::from_fn(&g, |x| Complex64::new(0.0, x[0] + 2.0 * x[2]).exp());
        let (l, r) = Inequality::LebesgueInterpolation.sides(&plan, &f).unwrap();
        assert!((l / r - 1.0).abs() < 1e-13);
        let (l, r) = Inequality::Poincare.sides(&plan, &f).unwrap();
        assert!((l / r - 1.0 / 5f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn zero_fields_are_skipped() {
        let g = Grid::new(&[8, 8, 8], &[1.0; 3]).unwrap();
        let plan = SpectralPlan::new(&g);
        let rep = inequality_validator(&plan, &[RealField::zeros(&g)], DEFAULT_CAP).unwrap();
        assert!(rep.passed());
        assert!(rep.results.iter().all(|r| r.skipped == 1 && r.max_ratio.is_none()));
        assert!(rep.notice.is_none());
    }

    #[test]
    fn constants_flag_infinite_ratio() {
        let g = Grid::new(&[8, 8, 8], &[1.0; 3]).unwrap();
        let plan = SpectralPlan::new(&g);
        let rep = inequality_validator(&plan, &[RealField::constant(&g, 1.0)], DEFAULT_CAP).unwrap();
        assert!(!rep.get(Inequality::Poincare).unwrap().passed);
        assert!(rep.get(Inequality::LebesgueInterpolation).unwrap().passed);
    }

    #[test]
    fn lower_dimensions_use_subset() {
        let g = Grid::new(&[16, 16], &[2.0 * PI; 2]).unwrap();
        let plan = SpectralPlan::new(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let fields: Vec<RealField> = (0..5).map(|_| random_real_field(&plan, &mut rng, 1.0, 3, true)).collect();
        let rep = inequality_validator(&plan, &fields, DEFAULT_CAP).unwrap();
        assert_eq!(rep.results.len(), 2);
        assert!(rep.notice.is_some());
        assert!(rep.passed());
        assert!(rep.get(Inequality::LebesgueInterpolation).unwrap().max_ratio.unwrap() <= 1.0 + 1e-12);
    }
}
