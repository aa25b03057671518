//! Test-only oracles and generators, independent of the integration and
//! event-localization code under test.

#![allow(dead_code)]

use desabs::partition::Functional;
use desabs::plant::{ControlAlphabet, ControlEntry};
use desabs::{PartitionSpec, PlantSystem, SamplingBox, VectorField};
use rand::Rng;

/// Analytic state of the double integrator.
pub fn di_state(x0: [f64; 2], u: f64, t: f64) -> [f64; 2] {
    [x0[0] + x0[1] * t + 0.5 * u * t * t, x0[1] + u * t]
}

/// Positive roots of `a t^2 + b t + c` in ascending order, computed with the
/// cancellation-free form of the quadratic formula.
pub fn positive_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let mut roots = Vec::new();
    if a == 0.0 {
        if b != 0.0 {
            roots.push(-c / b);
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc > 0.0 {
            let q = -0.5 * (b + b.signum() * disc.sqrt());
            roots.push(q / a);
            if q != 0.0 {
                roots.push(c / q);
            }
        }
    }
    roots.retain(|t| *t > 0.0);
    roots.sort_by(f64::total_cmp);
    roots
}

/// Every crossing `(surface, '+'/'-', time)` of the axis kernels `x1 = 0`,
/// `x2 = 0` by the double integrator in `(0, horizon]`, time-ordered.
pub fn di_crossings(x0: [f64; 2], u: f64, horizon: f64) -> Vec<(usize, char, f64)> {
    let mut out = Vec::new();
    for t in positive_roots(0.5 * u, x0[1], x0[0]) {
        let slope = x0[1] + u * t;
        if slope != 0.0 && t <= horizon {
            out.push((1, if slope > 0.0 { '+' } else { '-' }, t));
        }
    }
    for t in positive_roots(0.0, u, x0[1]) {
        if t <= horizon {
            out.push((2, if u > 0.0 { '+' } else { '-' }, t));
        }
    }
    out.sort_by(|a, b| a.2.total_cmp(&b.2));
    out
}

pub fn random_partition(rng: &mut impl Rng, n_functionals: usize, dim: usize) -> PartitionSpec {
    let functionals = (1..=n_functionals)
        .map(|id| {
            let normal: Vec<f64> = loop {
                let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                if v.iter().map(|c| c * c).sum::<f64>() > 1e-2 {
                    break v;
                }
            };
            Functional::affine(id, normal, rng.gen_range(-1.0..1.0)).unwrap()
        })
        .collect();
    PartitionSpec::new(functionals).unwrap()
}

/// Random planar linear plant with a scalar input, 2 or 3 distinct control
/// values and `n_functionals` random affine hypersurfaces.
pub fn random_linear_system(rng: &mut impl Rng, n_functionals: usize) -> PlantSystem {
    let a: Vec<Vec<f64>> = (0..2)
        .map(|_| (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let b: Vec<Vec<f64>> = (0..2).map(|_| vec![rng.gen_range(-1.0..1.0)]).collect();
    let m = rng.gen_range(2..=3);
    let mut values: Vec<f64> = Vec::new();
    while values.len() < m {
        let v = (rng.gen_range(-2.0..2.0) * 100.0_f64).round() / 100.0;
        if !values.contains(&v) {
            values.push(v);
        }
    }
    let alphabet = ControlAlphabet::new(
        values
            .iter()
            .enumerate()
            .map(|(i, v)| ControlEntry {
                symbol: format!("r{}", i + 1),
                value: vec![*v],
            })
            .collect(),
    )
    .unwrap();
    PlantSystem::new(
        "random",
        VectorField::linear(a, b).unwrap(),
        alphabet,
        random_partition(rng, n_functionals, 2),
        SamplingBox::cube(2, 3.0).unwrap(),
    )
    .unwrap()
}
