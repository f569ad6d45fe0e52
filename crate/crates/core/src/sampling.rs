//! Seeded random zero-boundary test fields.
//!
//! Raw nodal noise has gradients of order `1/h` and only probes the trivial
//! regime of the inequalities checked against it, so fields are smoothed by
//! Jacobi averaging over the vertex neighbourhood before use.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mesh::Mesh;

/// Deterministic RNG for a (seed, stream) pair.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub struct FieldSampler {
    mesh: Arc<Mesh>,
    /// Neighbours of each vertex (including itself).
    neighbourhoods: Vec<Vec<usize>>,
}

impl FieldSampler {
    pub fn new(mesh: Arc<Mesh>) -> Self {
        let mut neighbourhoods: Vec<Vec<usize>> = (0..mesh.num_vertices()).map(|v| vec![v]).collect();
        for tri in &mesh.triangles {
            for a in 0..3 {
                for b in 0..3 {
                    if a != b {
                        neighbourhoods[tri[a]].push(tri[b]);
                    }
                }
            }
        }
        for nb in &mut neighbourhoods {
            nb.sort_unstable();
            nb.dedup();
        }
        Self {
            mesh,
            neighbourhoods,
        }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    /// Applies `passes` Jacobi averaging sweeps to full nodal values,
    /// keeping boundary values at zero.
    pub fn smooth(&self, values: &mut Vec<f64>, passes: usize) {
        for _ in 0..passes {
            let next: Vec<f64> = (0..values.len())
                .map(|v| {
                    if self.mesh.boundary[v] {
                        0.0
                    } else {
                        let nb = &self.neighbourhoods[v];
                        nb.iter().map(|&w| values[w]).sum::<f64>() / nb.len() as f64
                    }
                })
                .collect();
            *values = next;
        }
    }

    /// Interior values of a field drawn uniformly from `[lo, hi)` at interior
    /// vertices and then smoothed by `passes` Jacobi sweeps.
    pub fn sample(&self, rng: &mut impl Rng, lo: f64, hi: f64, passes: usize) -> Vec<f64> {
        let mut values: Vec<f64> = self
            .mesh
            .boundary
            .iter()
            .map(|&b| if b { 0.0 } else { rng.gen_range(lo..hi) })
            .collect();
        self.smooth(&mut values, passes);
        self.mesh.interior.iter().map(|&v| values[v]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, Domain};

    #[test]
    fn samples_are_reproducible_and_smoothed() {
        let mesh = Arc::new(build_mesh(Domain::UnitSquare, 10).unwrap());
        let sampler = FieldSampler::new(Arc::clone(&mesh));
        let a = sampler.sample(&mut rng_for(7, 1), 0.0, 1.0, 2);
        let b = sampler.sample(&mut rng_for(7, 1), 0.0, 1.0, 2);
        let c = sampler.sample(&mut rng_for(7, 2), 0.0, 1.0, 2);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.iter().all(|v| (0.0..1.0).contains(v)));

        let raw = sampler.sample(&mut rng_for(3, 0), -1.0, 1.0, 0);
        let smooth = sampler.sample(&mut rng_for(3, 0), -1.0, 1.0, 2);
        let tv = |x: &[f64]| x.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>();
        assert!(tv(&smooth) < 0.5 * tv(&raw));
    }
}
