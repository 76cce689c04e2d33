//! Built-in potentials selectable by string id.

use std::sync::Arc;

use super::potential::{
    DomainBox, GaussianBump, GaussianMixture, GrowthDeclaration, Monomial, Polynomial,
    SharedPotential,
};
use super::LandscapeError;

/// Ids accepted by [`corpus_potential`].
pub const CORPUS_IDS: &[&str] = &[
    "quadratic",
    "double_well",
    "tilted_double_well",
    "triple_well",
    "double_well_2d",
    "tilted_double_well_2d",
    "three_well_2d",
    "tilted_double_well_3d",
];

fn mono(coef: f64, powers: &[u32]) -> Monomial {
    Monomial {
        coef,
        powers: powers.to_vec(),
    }
}

/// `(x^2 - 1)^2 + 0.25 (x + 1)` written as monomials.
fn tilted_axis(dim: usize) -> Vec<Monomial> {
    let e = |p: u32| {
        let mut v = vec![0; dim];
        v[0] = p;
        v
    };
    vec![
        mono(1.0, &e(4)),
        mono(-2.0, &e(2)),
        mono(0.25, &e(1)),
        mono(1.25, &e(0)),
    ]
}

fn quadratic_axes(dim: usize, from: usize) -> Vec<Monomial> {
    (from..dim)
        .map(|k| {
            let mut v = vec![0; dim];
            v[k] = 2;
            mono(1.0, &v)
        })
        .collect()
}

/// Look up a corpus potential by id.
///
/// All entries grow at least quadratically at infinity with Hessians bounded
/// below, so both growth declarations hold.
pub fn corpus_potential(id: &str) -> Result<SharedPotential, LandscapeError> {
    let g = GrowthDeclaration::BOTH;
    let p: SharedPotential = match id {
        // x^2 / 2; box wide enough for the OU law at tau = 1.
        "quadratic" => Arc::new(Polynomial::univariate(
            &[0.0, 0.0, 0.5],
            DomainBox::cube(1, -8.0, 8.0),
            g,
        )?),
        "double_well" => Arc::new(Polynomial::univariate(
            &[1.0, 0.0, -2.0, 0.0, 1.0],
            DomainBox::cube(1, -2.0, 2.0),
            g,
        )?),
        "tilted_double_well" => Arc::new(Polynomial::new(
            tilted_axis(1),
            DomainBox::cube(1, -2.0, 2.0),
            g,
        )?),
        // x^6/6 - 5x^4/4 + 2x^2 + 0.3x: minima near -2, 0, 2.
        "triple_well" => Arc::new(Polynomial::univariate(
            &[0.0, 0.3, 2.0, 0.0, -1.25, 0.0, 1.0 / 6.0],
            DomainBox::cube(1, -2.8, 2.8),
            g,
        )?),
        "double_well_2d" => {
            let mut terms = vec![
                mono(1.0, &[4, 0]),
                mono(-2.0, &[2, 0]),
                mono(1.0, &[0, 0]),
            ];
            terms.extend(quadratic_axes(2, 1));
            Arc::new(Polynomial::new(terms, DomainBox::cube(2, -2.0, 2.0), g)?)
        }
        "tilted_double_well_2d" => {
            let mut terms = tilted_axis(2);
            terms.extend(quadratic_axes(2, 1));
            Arc::new(Polynomial::new(terms, DomainBox::cube(2, -2.0, 2.0), g)?)
        }
        "tilted_double_well_3d" => {
            let mut terms = tilted_axis(3);
            terms.extend(quadratic_axes(3, 1));
            Arc::new(Polynomial::new(terms, DomainBox::cube(3, -2.0, 2.0), g)?)
        }
        "three_well_2d" => {
            let confinement = Polynomial::new(
                vec![
                    mono(0.05, &[4, 0]),
                    mono(0.1, &[2, 2]),
                    mono(0.05, &[0, 4]),
                ],
                DomainBox::cube(2, -3.0, 3.0),
                g,
            )?;
            Arc::new(GaussianMixture::new(
                confinement,
                vec![
                    GaussianBump { weight: -3.0, center: vec![-1.2, -0.4], width: 0.6 },
                    GaussianBump { weight: -2.4, center: vec![1.2, -0.4], width: 0.6 },
                    GaussianBump { weight: -2.0, center: vec![0.0, 1.3], width: 0.6 },
                ],
            )?)
        }
        other => {
            return Err(LandscapeError::UnknownPotential(other.to_string()));
        }
    };
    Ok(p)
}
