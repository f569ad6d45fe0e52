//! Benchmark fixtures shared by the criterion targets.

use std::sync::Arc;

use aniso_core::discrete::Discretization;
use aniso_core::{DataFn, FinslerNorm, FluxParams, Mesh, MeshConfig, Problem, ProblemSpec, WeightSpec};

/// The standard mixed problem on `square:<resolution>` with the given norm tag.
pub fn standard_problem(resolution: usize, norm: &str) -> Problem {
    let norm: FinslerNorm = norm.parse().expect("valid norm tag");
    let spec = ProblemSpec::mixed(
        format!("square:{resolution}").parse::<MeshConfig>().expect("valid domain"),
        norm,
        2.0,
        WeightSpec::constant(1.0, 2),
        0.5,
        0.5,
        DataFn::constant(1.0),
        DataFn::constant(1.0),
    );
    Problem::new(spec).expect("standard problem is admissible")
}

/// A discretization of `square:<resolution>` and a smooth interior field on it.
pub fn discretization_with_field(resolution: usize, norm: &str, p: f64) -> (Discretization, Vec<f64>) {
    let mesh = Arc::new(Mesh::from_config(&format!("square:{resolution}").parse().unwrap()).unwrap());
    let norm: FinslerNorm = norm.parse().unwrap();
    let disc = Discretization::new(Arc::clone(&mesh), FluxParams::new(norm, p).unwrap(), WeightSpec::constant(1.0, 2));
    let x: Vec<f64> = mesh
        .interior
        .iter()
        .map(|&v| {
            let [a, b] = mesh.vertices[v];
            (std::f64::consts::PI * a).sin() * (std::f64::consts::PI * b).sin()
        })
        .collect();
    (disc, x)
}
