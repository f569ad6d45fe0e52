//! Assembled discrete operators on the interior unknowns of a mesh.
//!
//! A [`Discretization`] caches, per triangle, the weighted area
//! `|T| w(b_T)` and the local-to-unknown map, and evaluates the anisotropic
//! energy `Σ |T| w F(∇u)^p` and barycentric loads together with their
//! gradients with respect to the interior nodal values. Summation always
//! runs in triangle order so results are reproducible bit for bit.

use std::sync::Arc;

use crate::finsler::FluxParams;
use crate::mesh::{Field, Mesh};
use crate::weights::WeightSpec;

#[derive(Debug, Clone)]
pub struct Discretization {
    mesh: Arc<Mesh>,
    flux: FluxParams,
    weight: WeightSpec,
    weighted_area: Vec<f64>,
    /// Unknown index per triangle corner (`usize::MAX` on boundary vertices).
    local_dofs: Vec<[usize; 3]>,
    lumped_mass: Vec<f64>,
    inverse_lumped_mass: Vec<f64>,
}

const NO_DOF: usize = usize::MAX;

impl Discretization {
    pub fn new(mesh: Arc<Mesh>, flux: FluxParams, weight: WeightSpec) -> Self {
        let mut dof_of_vertex = vec![NO_DOF; mesh.num_vertices()];
        for (k, &v) in mesh.interior.iter().enumerate() {
            dof_of_vertex[v] = k;
        }
        let weighted_area = mesh
            .areas
            .iter()
            .zip(&mesh.barycenters)
            .map(|(a, b)| a * weight.value(b))
            .collect();
        let local_dofs: Vec<[usize; 3]> = mesh
            .triangles
            .iter()
            .map(|tri| tri.map(|v| dof_of_vertex[v]))
            .collect();
        let mut lumped_mass = vec![0.0; mesh.interior.len()];
        for (t, dofs) in local_dofs.iter().enumerate() {
            for &d in dofs {
                if d != NO_DOF {
                    lumped_mass[d] += mesh.areas[t] / 3.0;
                }
            }
        }
        let inverse_lumped_mass = lumped_mass.iter().map(|m| 1.0 / m).collect();
        Self {
            mesh,
            flux,
            weight,
            weighted_area,
            local_dofs,
            lumped_mass,
            inverse_lumped_mass,
        }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn flux(&self) -> &FluxParams {
        &self.flux
    }

    pub fn p(&self) -> f64 {
        self.flux.p
    }

    pub fn weight(&self) -> &WeightSpec {
        &self.weight
    }

    pub fn num_dofs(&self) -> usize {
        self.mesh.interior.len()
    }

    /// Lumped (row-sum) mass of each interior vertex.
    pub fn lumped_mass(&self) -> &[f64] {
        &self.lumped_mass
    }

    pub fn inverse_lumped_mass(&self) -> &[f64] {
        &self.inverse_lumped_mass
    }

    pub fn field(&self, x: &[f64]) -> Field {
        Field::from_interior(Arc::clone(&self.mesh), x)
    }

    /// Whether triangle `t` touches at least one unknown.
    pub fn has_dofs(&self, t: usize) -> bool {
        self.local_dofs[t].iter().any(|&k| k != NO_DOF)
    }

    pub fn num_triangles(&self) -> usize {
        self.local_dofs.len()
    }

    /// Value of the interpolant at the barycenter of triangle `t`.
    #[inline]
    pub fn barycenter_value(&self, x: &[f64], t: usize) -> f64 {
        let d = &self.local_dofs[t];
        let mut s = 0.0;
        for &k in d {
            if k != NO_DOF {
                s += x[k];
            }
        }
        s / 3.0
    }

    #[inline]
    fn element_gradient(&self, x: &[f64], t: usize) -> [f64; 2] {
        let grads = &self.mesh.basis_gradients[t];
        let mut g = [0.0; 2];
        for (c, &k) in self.local_dofs[t].iter().enumerate() {
            if k != NO_DOF {
                g[0] += x[k] * grads[c][0];
                g[1] += x[k] * grads[c][1];
            }
        }
        g
    }

    /// `‖u‖^p = Σ |T| w F(∇u)^p`.
    pub fn energy(&self, x: &[f64]) -> f64 {
        let p = self.flux.p;
        let norm = &self.flux.norm;
        (0..self.local_dofs.len())
            .map(|t| {
                let f = norm.value(&self.element_gradient(x, t));
                if f == 0.0 {
                    0.0
                } else {
                    self.weighted_area[t] * f.powf(p)
                }
            })
            .sum()
    }

    /// Returns `‖u‖^p` and adds `∇(‖u‖^p / p)` to `grad`.
    pub fn energy_with_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let p = self.flux.p;
        let mut energy = 0.0;
        let mut a = [0.0; 2];
        for t in 0..self.local_dofs.len() {
            let g = self.element_gradient(x, t);
            let f = self.flux.flux_into(&g, &mut a);
            if f == 0.0 {
                continue;
            }
            let wa = self.weighted_area[t];
            energy += wa * f.powf(p);
            let grads = &self.mesh.basis_gradients[t];
            for (c, &k) in self.local_dofs[t].iter().enumerate() {
                if k != NO_DOF {
                    grad[k] += wa * (a[0] * grads[c][0] + a[1] * grads[c][1]);
                }
            }
        }
        energy
    }

    /// `Σ |T| data_T G(ū_T)`, with `-Σ |T| data_T G'(ū_T)/3` added to `grad`
    /// at each interior corner (the gradient of the negated load). Returns the
    /// load and the sum of its absolute terms.
    pub fn load_with_gradient(
        &self,
        x: &[f64],
        data: &[f64],
        primitive: impl Fn(f64) -> f64,
        derivative: impl Fn(f64) -> f64,
        grad: &mut [f64],
    ) -> (f64, f64) {
        let mut load = 0.0;
        let mut magnitude = 0.0;
        for t in 0..self.local_dofs.len() {
            let d = data[t];
            if d == 0.0 {
                continue;
            }
            let u = self.barycenter_value(x, t);
            let area = self.mesh.areas[t];
            let term = area * d * primitive(u);
            load += term;
            magnitude += term.abs();
            let dg = area * d * derivative(u) / 3.0;
            for &k in &self.local_dofs[t] {
                if k != NO_DOF {
                    grad[k] -= dg;
                }
            }
        }
        (load, magnitude)
    }

    /// `Σ |T| data_T G(ū_T)`.
    pub fn load(&self, x: &[f64], data: &[f64], primitive: impl Fn(f64) -> f64) -> f64 {
        (0..self.local_dofs.len())
            .map(|t| {
                if data[t] == 0.0 {
                    0.0
                } else {
                    self.mesh.areas[t] * data[t] * primitive(self.barycenter_value(x, t))
                }
            })
            .sum()
    }

    /// Evaluates a data function at every barycenter.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.mesh.barycenters.iter().map(|b| f(b[0], b[1])).collect()
    }
}
