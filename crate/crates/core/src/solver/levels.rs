use serde::{Deserialize, Serialize};

use crate::mesh::Field;

/// Measure of the superlevel set `A(k) = {ū ≥ k}` at barycenters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelSet {
    pub k: f64,
    pub measure: f64,
}

/// `|A(k)|` for `k = 0` and `k = k0 · 2^j`, `j = 0, 1, ...`, stopping at the
/// first empty set or after `max_levels` positive levels. With `k0 = None`
/// the first positive level is `sup u / 64`.
pub fn stampacchia_diagnostic(field: &Field, k0: Option<f64>, max_levels: usize) -> Vec<LevelSet> {
    let mesh = field.mesh();
    let bary: Vec<f64> = (0..mesh.num_triangles()).map(|t| field.barycenter_value(t)).collect();
    let measure = |k: f64| -> f64 {
        bary.iter()
            .zip(&mesh.areas)
            .filter(|(u, _)| **u >= k)
            .map(|(_, a)| a)
            .sum()
    };
    let mut table = vec![LevelSet {
        k: 0.0,
        measure: measure(0.0),
    }];
    let sup = field.max();
    let mut k = match k0 {
        Some(k) if k > 0.0 => k,
        _ if sup > 0.0 => sup / 64.0,
        _ => return table,
    };
    for _ in 0..max_levels {
        let m = measure(k);
        table.push(LevelSet { k, measure: m });
        if m == 0.0 {
            break;
        }
        k *= 2.0;
    }
    table
}
