//! Structured triangulations of simple planar domains and P1 nodal fields.
//!
//! All integrals use one-point barycenter quadrature per triangle. Gradients
//! of P1 fields are element-constant, so the energy integrand only varies
//! through the weight, and barycenters never coincide with a mesh vertex
//! (in particular not with the origin, where power weights are singular).

use std::f64::consts::TAU;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finsler::FluxParams;
use crate::weights::WeightSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum Domain {
    /// `[0,1]^2`, origin at the lower-left corner.
    UnitSquare,
    /// Inscribed polygon of the unit disk centred at the origin.
    UnitDisk,
    /// `[0,a] x [0,b]`.
    Rectangle { a: f64, b: f64 },
}

/// A domain together with its resolution, addressable by a text tag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshConfig {
    pub domain: Domain,
    pub resolution: usize,
}

impl fmt::Display for MeshConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.domain {
            Domain::UnitSquare => write!(f, "square:{}", self.resolution),
            Domain::UnitDisk => write!(f, "disk:{}", self.resolution),
            Domain::Rectangle { a, b } => write!(f, "rect:{a}:{b}:{}", self.resolution),
        }
    }
}

impl FromStr for MeshConfig {
    type Err = Error;

    /// `square:<n>`, `rect:<a>:<b>:<n>` or `disk:<n>`.
    fn from_str(tag: &str) -> Result<Self> {
        let parts: Vec<&str> = tag.trim().split(':').collect();
        let bad = |what: &str| Error::Input(format!("domain tag `{tag}`: {what}"));
        let res = |s: &str| s.trim().parse::<usize>().map_err(|_| bad("resolution must be an integer"));
        let len = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("side length must be a number"));
        let (domain, resolution) = match parts.as_slice() {
            ["square", n] => (Domain::UnitSquare, res(n)?),
            ["disk", n] => (Domain::UnitDisk, res(n)?),
            ["rect", a, b, n] => (
                Domain::Rectangle {
                    a: len(a)?,
                    b: len(b)?,
                },
                res(n)?,
            ),
            _ => return Err(bad("expected square:<n>, rect:<a>:<b>:<n> or disk:<n>")),
        };
        Ok(MeshConfig { domain, resolution })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Mesh {
    pub config: MeshConfig,
    pub vertices: Vec<[f64; 2]>,
    /// Counter-clockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<bool>,
    pub areas: Vec<f64>,
    pub barycenters: Vec<[f64; 2]>,
    /// Constant gradients of the three hat functions on each triangle.
    #[serde(skip)]
    pub basis_gradients: Vec<[[f64; 2]; 3]>,
    /// Indices of the non-boundary vertices (the unknowns of a Dirichlet problem).
    #[serde(skip)]
    pub interior: Vec<usize>,
}

/// Builds a structured triangulation of `domain`. Squares and rectangles are
/// split into `n x n` cells cut along the main diagonal; the disk is built
/// from `n` concentric rings with `6k` vertices on ring `k`.
pub fn build_mesh(domain: Domain, resolution: usize) -> Result<Mesh> {
    if resolution < 2 {
        return Err(Error::Input(format!("mesh resolution must be at least 2, got {resolution}")));
    }
    let (vertices, triangles, boundary) = match domain {
        Domain::UnitSquare => grid(1.0, 1.0, resolution),
        Domain::Rectangle { a, b } => {
            if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
                return Err(Error::Input(format!("rectangle sides must be positive, got ({a}, {b})")));
            }
            grid(a, b, resolution)
        }
        Domain::UnitDisk => disk(resolution),
    };
    Ok(Mesh::from_parts(
        MeshConfig { domain, resolution },
        vertices,
        triangles,
        boundary,
    ))
}

fn grid(a: f64, b: f64, n: usize) -> (Vec<[f64; 2]>, Vec<[usize; 3]>, Vec<bool>) {
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    let mut boundary = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([a * i as f64 / n as f64, b * j as f64 / n as f64]);
            boundary.push(i == 0 || j == 0 || i == n || j == n);
        }
    }
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (v00, v10, v01, v11) = (idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1));
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    (vertices, triangles, boundary)
}

fn disk(n: usize) -> (Vec<[f64; 2]>, Vec<[usize; 3]>, Vec<bool>) {
    let mut vertices = vec![[0.0, 0.0]];
    let mut boundary = vec![false];
    // ring_start[k] = index of the first vertex on ring k
    let mut ring_start = vec![0usize];
    for k in 1..=n {
        ring_start.push(vertices.len());
        let count = 6 * k;
        let radius = k as f64 / n as f64;
        for j in 0..count {
            let theta = TAU * j as f64 / count as f64;
            vertices.push([radius * theta.cos(), radius * theta.sin()]);
            boundary.push(k == n);
        }
    }
    let mut triangles = Vec::with_capacity(6 * n * n);
    for k in 1..=n {
        let outer = ring_start[k];
        let outer_count = 6 * k;
        if k == 1 {
            for j in 0..outer_count {
                triangles.push([0, outer + j, outer + (j + 1) % outer_count]);
            }
            continue;
        }
        let inner = ring_start[k - 1];
        let inner_count = 6 * (k - 1);
        let (mut i, mut j) = (0usize, 0usize);
        while i < inner_count || j < outer_count {
            // advance along the ring whose next vertex has the smaller angle;
            // (j+1)/outer_count <= (i+1)/inner_count compared in integers
            let take_outer = j < outer_count
                && (i == inner_count || (j + 1) * inner_count <= (i + 1) * outer_count);
            let a = inner + i % inner_count;
            let b = outer + j % outer_count;
            if take_outer {
                triangles.push([a, b, outer + (j + 1) % outer_count]);
                j += 1;
            } else {
                triangles.push([a, b, inner + (i + 1) % inner_count]);
                i += 1;
            }
        }
    }
    (vertices, triangles, boundary)
}

impl Mesh {
    fn from_parts(
        config: MeshConfig,
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        boundary: Vec<bool>,
    ) -> Self {
        let mut areas = Vec::with_capacity(triangles.len());
        let mut barycenters = Vec::with_capacity(triangles.len());
        let mut basis_gradients = Vec::with_capacity(triangles.len());
        for tri in &triangles {
            let [p0, p1, p2] = tri.map(|v| vertices[v]);
            let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
            areas.push(0.5 * det);
            barycenters.push([
                (p0[0] + p1[0] + p2[0]) / 3.0,
                (p0[1] + p1[1] + p2[1]) / 3.0,
            ]);
            // ∇φ_a = rot90(opposite edge) / (2 area)
            let grad = |pa: [f64; 2], pb: [f64; 2]| [(pa[1] - pb[1]) / det, (pb[0] - pa[0]) / det];
            basis_gradients.push([grad(p1, p2), grad(p2, p0), grad(p0, p1)]);
        }
        let interior = (0..vertices.len()).filter(|&v| !boundary[v]).collect();
        Mesh {
            config,
            vertices,
            triangles,
            boundary,
            areas,
            barycenters,
            basis_gradients,
            interior,
        }
    }

    pub fn from_config(config: &MeshConfig) -> Result<Self> {
        build_mesh(config.domain, config.resolution)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Area of the polygon bounded by the mesh boundary, from its closed form.
    pub fn polygon_area(&self) -> f64 {
        let n = self.config.resolution as f64;
        match self.config.domain {
            Domain::UnitSquare => 1.0,
            Domain::Rectangle { a, b } => a * b,
            Domain::UnitDisk => 0.5 * 6.0 * n * (TAU / (6.0 * n)).sin(),
        }
    }

    /// Whether a point lies in the centred quarter-area test region.
    pub fn in_test_region(&self, x: [f64; 2]) -> bool {
        match self.config.domain {
            Domain::UnitSquare => (0.25..=0.75).contains(&x[0]) && (0.25..=0.75).contains(&x[1]),
            Domain::Rectangle { a, b } => {
                (0.25 * a..=0.75 * a).contains(&x[0]) && (0.25 * b..=0.75 * b).contains(&x[1])
            }
            Domain::UnitDisk => x[0].hypot(x[1]) <= 0.5,
        }
    }

    /// Smallest edge length, a proxy for the mesh size.
    pub fn min_edge(&self) -> f64 {
        let mut h = f64::INFINITY;
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (self.vertices[tri[k]], self.vertices[tri[(k + 1) % 3]]);
                h = h.min((a[0] - b[0]).hypot(a[1] - b[1]));
            }
        }
        h
    }
}

/// A piecewise-linear field given by its vertex values.
#[derive(Debug, Clone)]
pub struct Field {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
    zero_boundary: bool,
}

impl Field {
    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        let n = mesh.num_vertices();
        Field {
            mesh,
            values: vec![0.0; n],
            zero_boundary: true,
        }
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(mesh: Arc<Mesh>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = mesh.vertices.iter().map(|v| f(v[0], v[1])).collect();
        Field {
            mesh,
            values,
            zero_boundary: false,
        }
    }

    /// Nodal interpolant of `f` with boundary values forced to zero.
    pub fn interpolate_zero_boundary(mesh: Arc<Mesh>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = mesh
            .vertices
            .iter()
            .zip(&mesh.boundary)
            .map(|(v, &b)| if b { 0.0 } else { f(v[0], v[1]) })
            .collect();
        Field {
            mesh,
            values,
            zero_boundary: true,
        }
    }

    /// Wraps nodal values; with `zero_boundary` the boundary entries must vanish.
    pub fn from_values(mesh: Arc<Mesh>, values: Vec<f64>, zero_boundary: bool) -> Result<Self> {
        if values.len() != mesh.num_vertices() {
            return Err(Error::Input(format!(
                "field has {} values for {} vertices",
                values.len(),
                mesh.num_vertices()
            )));
        }
        if zero_boundary
            && values
                .iter()
                .zip(&mesh.boundary)
                .any(|(v, &b)| b && *v != 0.0)
        {
            return Err(Error::Input("zero-boundary field has nonzero boundary values".into()));
        }
        Ok(Field {
            mesh,
            values,
            zero_boundary,
        })
    }

    /// Builds a zero-boundary field from values on the interior vertices.
    pub fn from_interior(mesh: Arc<Mesh>, interior_values: &[f64]) -> Self {
        let mut values = vec![0.0; mesh.num_vertices()];
        for (&v, &x) in mesh.interior.iter().zip(interior_values) {
            values[v] = x;
        }
        Field {
            mesh,
            values,
            zero_boundary: true,
        }
    }

    pub fn interior_values(&self) -> Vec<f64> {
        self.mesh.interior.iter().map(|&v| self.values[v]).collect()
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn zero_boundary(&self) -> bool {
        self.zero_boundary
    }

    pub fn scaled(&self, t: f64) -> Field {
        Field {
            mesh: Arc::clone(&self.mesh),
            values: self.values.iter().map(|v| t * v).collect(),
            zero_boundary: self.zero_boundary,
        }
    }

    /// Average of the three vertex values, i.e. the value at the barycenter.
    pub fn barycenter_value(&self, t: usize) -> f64 {
        let [a, b, c] = self.mesh.triangles[t];
        (self.values[a] + self.values[b] + self.values[c]) / 3.0
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_distance(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs()))
    }

    /// L² norm with barycenter quadrature.
    pub fn l2_norm(&self) -> f64 {
        (0..self.mesh.num_triangles())
            .map(|t| self.mesh.areas[t] * self.barycenter_value(t).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Writes `vertex_id,x,y,value` rows.
    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "vertex_id,x,y,value")?;
        for (i, (v, val)) in self.mesh.vertices.iter().zip(&self.values).enumerate() {
            writeln!(out, "{i},{},{},{}", v[0], v[1], val)?;
        }
        Ok(())
    }
}

/// Constant gradient of the interpolant on triangle `t`.
pub fn element_gradient(field: &Field, t: usize) -> [f64; 2] {
    let mesh = &field.mesh;
    let tri = mesh.triangles[t];
    let grads = &mesh.basis_gradients[t];
    let mut g = [0.0; 2];
    for k in 0..3 {
        let u = field.values[tri[k]];
        g[0] += u * grads[k][0];
        g[1] += u * grads[k][1];
    }
    g
}

/// `Σ_T |T| w(b_T) F(∇u|_T)^p`, the discrete `∫ F(∇u)^p w dx`.
pub fn weighted_energy(field: &Field, params: &FluxParams, weight: &WeightSpec) -> f64 {
    let mesh = &field.mesh;
    (0..mesh.num_triangles())
        .map(|t| {
            let g = element_gradient(field, t);
            let f = params.norm.value(&g);
            if f == 0.0 {
                return 0.0;
            }
            mesh.areas[t] * weight.value(&mesh.barycenters[t]) * f.powf(params.p)
        })
        .sum()
}

/// `Σ_T |T| data(b_T) g(u(b_T))` for a pointwise transform `g`.
pub fn weighted_load(
    field: &Field,
    data: impl Fn(f64, f64) -> f64,
    transform: impl Fn(f64) -> f64,
) -> f64 {
    let mesh = &field.mesh;
    (0..mesh.num_triangles())
        .map(|t| {
            let b = mesh.barycenters[t];
            mesh.areas[t] * data(b[0], b[1]) * transform(field.barycenter_value(t))
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finsler::FinslerNorm;
    use std::f64::consts::PI;

    fn square(n: usize) -> Arc<Mesh> {
        Arc::new(build_mesh(Domain::UnitSquare, n).unwrap())
    }

    fn check_mesh(mesh: &Mesh) {
        for (t, a) in mesh.areas.iter().enumerate() {
            assert!(*a > 0.0, "triangle {t} has area {a}");
        }
        let rel = (mesh.total_area() - mesh.polygon_area()).abs() / mesh.polygon_area();
        assert!(rel < 1e-12, "area mismatch {rel}");
        // conforming: every interior edge is shared by exactly two triangles,
        // boundary edges by one, and those connect boundary vertices
        let mut edges = std::collections::HashMap::new();
        for tri in &mesh.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        let mut on_boundary_edge = vec![false; mesh.num_vertices()];
        for (&(a, b), &count) in &edges {
            assert!(count == 1 || count == 2);
            if count == 1 {
                on_boundary_edge[a] = true;
                on_boundary_edge[b] = true;
            }
        }
        assert_eq!(on_boundary_edge, mesh.boundary);
    }

    #[test]
    fn square_counts() {
        let m = build_mesh(Domain::UnitSquare, 2).unwrap();
        assert_eq!(m.num_vertices(), 9);
        assert_eq!(m.num_triangles(), 8);
        assert!((m.total_area() - 1.0).abs() < 1e-15);
        for n in [3, 7, 16] {
            let m = build_mesh(Domain::UnitSquare, n).unwrap();
            assert_eq!(m.num_vertices(), (n + 1) * (n + 1));
            assert_eq!(m.num_triangles(), 2 * n * n);
            check_mesh(&m);
        }
        check_mesh(&build_mesh(Domain::Rectangle { a: 2.0, b: 0.5 }, 5).unwrap());
    }

    #[test]
    fn disk_area_converges() {
        let mut prev_err = f64::INFINITY;
        for n in [2, 4, 8, 16, 32] {
            let m = build_mesh(Domain::UnitDisk, n).unwrap();
            check_mesh(&m);
            assert_eq!(m.num_triangles(), 6 * n * n);
            let err = PI - m.total_area();
            // inscribed 6n-gon: π - A = O(1/n²), here ≤ 2π³/(3·36 n²)·... bounded by 1/n²
            assert!(err > 0.0 && err < 1.0 / (n * n) as f64, "n={n} err={err}");
            assert!(err < prev_err);
            prev_err = err;
        }
    }

    #[test]
    fn resolution_too_small() {
        assert!(matches!(build_mesh(Domain::UnitSquare, 1), Err(Error::Input(_))));
        assert!(build_mesh(Domain::Rectangle { a: -1.0, b: 1.0 }, 4).is_err());
    }

    #[test]
    fn tags() {
        for tag in ["square:32", "disk:48", "rect:2:0.5:10"] {
            assert_eq!(tag.parse::<MeshConfig>().unwrap().to_string(), tag);
        }
        assert!("square".parse::<MeshConfig>().is_err());
        assert!("circle:3".parse::<MeshConfig>().is_err());
        assert!("square:x".parse::<MeshConfig>().is_err());
    }

    #[test]
    fn gradients_reproduce_linear_fields() {
        for mesh in [square(5), Arc::new(build_mesh(Domain::UnitDisk, 4).unwrap())] {
            let u = Field::interpolate(Arc::clone(&mesh), |x, _| x);
            let c = Field::interpolate(Arc::clone(&mesh), |_, _| 2.5);
            let l = Field::interpolate(Arc::clone(&mesh), |x, y| 3.0 * x + 4.0 * y - 1.0);
            for t in 0..mesh.num_triangles() {
                let g = element_gradient(&u, t);
                assert!((g[0] - 1.0).abs() < 1e-12 && g[1].abs() < 1e-12);
                let g = element_gradient(&c, t);
                assert!(g[0].abs() < 1e-12 && g[1].abs() < 1e-12);
                let g = element_gradient(&l, t);
                assert!((g[0] - 3.0).abs() < 1e-12 && (g[1] - 4.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn energy_examples() {
        let p3 = FluxParams::new(FinslerNorm::euclidean(2), 3.0).unwrap();
        let w = WeightSpec::constant(1.0, 2);
        let rect = Arc::new(build_mesh(Domain::Rectangle { a: 1.0, b: 1.0 }, 6).unwrap());
        let u = Field::interpolate(Arc::clone(&rect), |x, _| x);
        assert!((weighted_energy(&u, &p3, &w) - 1.0).abs() < 1e-12);
        assert_eq!(weighted_energy(&Field::zeros(rect), &p3, &w), 0.0);
    }

    #[test]
    fn energy_of_sine_mode_converges() {
        // ∫ |∇(sin πx sin πy)|² over the unit square = π²/2
        let p2 = FluxParams::new(FinslerNorm::euclidean(2), 2.0).unwrap();
        let w = WeightSpec::constant(1.0, 2);
        let exact = PI * PI / 2.0;
        let mut prev = f64::INFINITY;
        for n in [8, 16, 32] {
            let u = Field::interpolate(square(n), |x, y| (PI * x).sin() * (PI * y).sin());
            let err = (weighted_energy(&u, &p2, &w) - exact).abs();
            assert!(err < prev);
            prev = err;
        }
        assert!(prev < 2e-2);
    }

    #[test]
    fn load_examples() {
        // exact area oracle: u = 1 on interior vertices, 0 on the boundary.
        // On square:n only the boundary strip of cells deviates from 1.
        for n in [8, 32, 128] {
            let mesh = square(n);
            let u = Field::interpolate_zero_boundary(Arc::clone(&mesh), |_, _| 1.0);
            let load = weighted_load(&u, |_, _| 1.0, |v| v);
            // barycenter average over each triangle, summed by hand:
            let mut oracle = 0.0;
            for t in 0..mesh.num_triangles() {
                let interior = mesh.triangles[t].iter().filter(|&&v| !mesh.boundary[v]).count();
                oracle += mesh.areas[t] * interior as f64 / 3.0;
            }
            assert!((load - oracle).abs() < 1e-12);
            assert!((1.0 - load) < 4.0 / n as f64);
        }
        let mesh = square(16);
        let zero = Field::zeros(Arc::clone(&mesh));
        assert_eq!(weighted_load(&zero, |_, _| 1.0, |v| v), 0.0);

        // (·)^{1/2} of a constant-interior field tends to sqrt(c)|Ω|
        let c: f64 = 0.49;
        let mut errs = vec![];
        for n in [8, 64] {
            let u = Field::interpolate_zero_boundary(square(n), |_, _| c);
            let v = weighted_load(&u, |_, _| 1.0, |v: f64| v.max(0.0).sqrt());
            errs.push((v - c.sqrt()).abs());
        }
        assert!(errs[1] < errs[0] && errs[1] < 0.05);
    }

    #[test]
    fn field_boundary_checks() {
        let mesh = square(3);
        let mut vals = vec![0.0; mesh.num_vertices()];
        vals[0] = 1.0;
        assert!(Field::from_values(Arc::clone(&mesh), vals.clone(), true).is_err());
        assert!(Field::from_values(Arc::clone(&mesh), vals, false).is_ok());
        assert!(Field::from_values(mesh, vec![0.0; 3], false).is_err());
    }

    #[test]
    fn csv_export() {
        let mesh = square(2);
        let u = Field::interpolate(mesh, |x, y| x + y);
        let mut buf = Vec::new();
        u.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "vertex_id,x,y,value");
        assert_eq!(lines.len(), 10);
        assert_eq!(lines[9], "8,1,1,2");
    }

    #[test]
    fn barycenters_avoid_vertices() {
        let mesh = build_mesh(Domain::UnitDisk, 6).unwrap();
        for b in &mesh.barycenters {
            assert!(b[0].hypot(b[1]) > 1e-3);
        }
    }
}
