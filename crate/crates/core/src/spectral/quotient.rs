use super::{DiscreteForm, SpectralError};

/// Denominators below this are treated as zero.
pub const DEGENERATE_TOL: f64 = 1e-14;

fn check_len(f: &[f64], form: &DiscreteForm) -> Result<(), SpectralError> {
    if f.len() != form.len() {
        return Err(SpectralError::DimensionMismatch(format!(
            "function has {} values, grid has {} nodes",
            f.len(),
            form.len()
        )));
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(SpectralError::InvalidArgument("function is not finite".into()));
    }
    Ok(())
}

/// `E(f) / var_M(f)`.
///
/// The variance is compared against `1e-14` times the second moment, so the
/// test does not depend on the overall scale of `f`.
pub fn rayleigh_quotient(f: &[f64], form: &DiscreteForm) -> Result<f64, SpectralError> {
    check_len(f, form)?;
    let var = form.variance(f);
    let second = form.mean(&f.iter().map(|v| v * v).collect::<Vec<_>>());
    if !(var > DEGENERATE_TOL * second) || var == 0.0 {
        return Err(SpectralError::DegenerateDenominator(var));
    }
    Ok(form.dirichlet_energy(f) / var)
}

/// `Ent_M(f^2)`, with `0 ln 0 = 0`.
pub fn entropy(f: &[f64], form: &DiscreteForm) -> f64 {
    let total = form.total_mass();
    let second: f64 = form.mass.iter().zip(f).map(|(m, v)| m * v * v).sum::<f64>() / total;
    if second == 0.0 {
        return 0.0;
    }
    let s: f64 = form
        .mass
        .iter()
        .zip(f)
        .map(|(m, v)| {
            let g = v * v / second;
            if g > 0.0 {
                m * g * g.ln()
            } else {
                0.0
            }
        })
        .sum();
    second * s / total
}

/// `I(f^2) / Ent_M(f^2) = 2 E(f) / Ent_M(f^2)`.
pub fn entropy_quotient(f: &[f64], form: &DiscreteForm) -> Result<f64, SpectralError> {
    check_len(f, form)?;
    let total = form.total_mass();
    let second: f64 = form.mass.iter().zip(f).map(|(m, v)| m * v * v).sum::<f64>() / total;
    if !(second > 0.0) {
        return Err(SpectralError::DegenerateDenominator(0.0));
    }
    let normalized = entropy(f, form) / second;
    if !(normalized > DEGENERATE_TOL) {
        return Err(SpectralError::DegenerateDenominator(normalized));
    }
    Ok(2.0 * form.dirichlet_energy(f) / (second * normalized))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::corpus_potential;
    use crate::spectral::{assemble_langevin_form, spectral_gap, Grid};
    use proptest::prelude::*;

    fn form() -> DiscreteForm {
        let p = corpus_potential("tilted_double_well").unwrap();
        let g = Grid::uniform(&[-2.0], &[2.0], &[200]).unwrap();
        assemble_langevin_form(p.as_ref(), 0.25, &g).unwrap()
    }

    #[test]
    fn constant_is_degenerate() {
        let f = form();
        let c = vec![3.0; f.len()];
        assert!(matches!(rayleigh_quotient(&c, &f), Err(SpectralError::DegenerateDenominator(_))));
        assert!(matches!(entropy_quotient(&c, &f), Err(SpectralError::DegenerateDenominator(_))));
    }

    #[test]
    fn eigenfunction_attains_gap() {
        let f = form();
        let r = spectral_gap(&f).unwrap();
        let q = rayleigh_quotient(&r.eigenfunction, &f).unwrap();
        assert!((q / r.lambda1 - 1.0).abs() < 1e-8);
    }

    #[test]
    fn length_mismatch() {
        assert!(rayleigh_quotient(&[1.0, 2.0], &form()).is_err());
    }

    proptest! {
        #[test]
        fn quotients_are_positive_and_above_gap(c0 in -1.0f64..1.0, c1 in -1.0f64..1.0, c2 in -1.0f64..1.0) {
            prop_assume!(c1.abs() + c2.abs() > 1e-3);
            let f = form();
            let gap = spectral_gap(&f).unwrap().lambda1;
            let v: Vec<f64> = f.grid.axis(0).iter().map(|x| c0 + c1 * x + c2 * (3.0 * x).sin()).collect();
            let q = rayleigh_quotient(&v, &f).unwrap();
            prop_assert!(q >= gap * (1.0 - 1e-9));
            if let Ok(e) = entropy_quotient(&v, &f) {
                prop_assert!(e > 0.0);
            }
        }
    }
}
