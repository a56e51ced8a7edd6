//! Pore area, perimeter and hydraulic diameter with exact derivatives
//! with respect to the ring-node positions, and the hydraulic-diameter
//! objective.

use log::warn;
use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// Perimeter below which a pore counts as collapsed (mm).
pub const COLLAPSE_PERIMETER: f64 = 1e-12;

/// Area of a clockwise ring by a triangle fan around the mean node position,
/// with its gradient per ring node.
pub fn pore_area(ring: &[Vector2<f64>]) -> (f64, Vec<Vector2<f64>>) {
    let n = ring.len();
    assert!(n >= 3, "a pore ring needs at least 3 nodes");
    let center = ring.iter().sum::<Vector2<f64>>() / n as f64;
    let mut area = 0.0;
    let mut grad = vec![Vector2::zeros(); n];
    let mut grad_center = Vector2::zeros();
    for k in 0..n {
        let next = (k + 1) % n;
        let a = ring[k] - center;
        let b = ring[next] - center;
        // Clockwise triangles have negative cross products.
        area -= 0.5 * (a.x * b.y - a.y * b.x);
        let da = -0.5 * Vector2::new(b.y, -b.x);
        let db = -0.5 * Vector2::new(-a.y, a.x);
        grad[k] += da;
        grad[next] += db;
        grad_center -= da + db;
    }
    let share = grad_center / n as f64;
    for g in &mut grad {
        *g += share;
    }
    (area, grad)
}

/// Sum of edge lengths with its gradient per ring node.
pub fn pore_perimeter(ring: &[Vector2<f64>]) -> (f64, Vec<Vector2<f64>>) {
    let n = ring.len();
    assert!(n >= 3, "a pore ring needs at least 3 nodes");
    let mut perimeter = 0.0;
    let mut grad = vec![Vector2::zeros(); n];
    for k in 0..n {
        let next = (k + 1) % n;
        let edge = ring[next] - ring[k];
        let len = edge.norm();
        if len == 0.0 {
            continue;
        }
        perimeter += len;
        let unit = edge / len;
        grad[next] += unit;
        grad[k] -= unit;
    }
    (perimeter, grad)
}

/// True if any two non-adjacent edges of the closed ring intersect.
pub fn is_self_intersecting(ring: &[Vector2<f64>]) -> bool {
    let n = ring.len();
    let cross = |o: Vector2<f64>, a: Vector2<f64>, b: Vector2<f64>| {
        (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
    };
    for i in 0..n {
        let (p1, p2) = (ring[i], ring[(i + 1) % n]);
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let (q1, q2) = (ring[j], ring[(j + 1) % n]);
            let d1 = cross(q1, q2, p1);
            let d2 = cross(q1, q2, p2);
            let d3 = cross(p1, p2, q1);
            let d4 = cross(p1, p2, q2);
            if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
                return true;
            }
        }
    }
    false
}

#[derive(Debug, Clone)]
pub struct PoreMetrics {
    pub pore: usize,
    pub area: f64,
    pub perimeter: f64,
    pub hydraulic_diameter: f64,
    pub ring_nodes: Vec<usize>,
    pub area_grad: Vec<Vector2<f64>>,
    pub perimeter_grad: Vec<Vector2<f64>>,
}

impl PoreMetrics {
    pub fn from_ring(pore: usize, ring_nodes: Vec<usize>, coords: &[Vector2<f64>]) -> Result<Self> {
        let (area, area_grad) = pore_area(coords);
        let (perimeter, perimeter_grad) = pore_perimeter(coords);
        if !(perimeter > COLLAPSE_PERIMETER) {
            return Err(Error::CollapsedPore { pore, perimeter });
        }
        if area <= 0.0 || is_self_intersecting(coords) {
            warn!("pore {pore} ring is no longer simple (area {area:.4e} mm^2)");
        }
        Ok(Self {
            pore,
            area,
            perimeter,
            hydraulic_diameter: 4.0 * area / perimeter,
            ring_nodes,
            area_grad,
            perimeter_grad,
        })
    }

    /// Gradient of the hydraulic diameter per ring node.
    pub fn hd_grad(&self) -> Vec<Vector2<f64>> {
        let p2 = self.perimeter * self.perimeter;
        self.area_grad
            .iter()
            .zip(&self.perimeter_grad)
            .map(|(ga, gp)| 4.0 * (self.perimeter * ga - self.area * gp) / p2)
            .collect()
    }
}

/// Metrics of pore `pore` for the displacement field `u`.
pub fn pore_metrics(mesh: &Mesh, pore: usize, u: &[f64]) -> Result<PoreMetrics> {
    let ring = mesh.pore_rings.get(pore).ok_or_else(|| {
        Error::Config(format!("pore index {pore} out of range ({} pores)", mesh.num_pores()))
    })?;
    let coords: Vec<Vector2<f64>> = ring
        .iter()
        .map(|&n| mesh.nodes[n] + Vector2::new(u[2 * n], u[2 * n + 1]))
        .collect();
    PoreMetrics::from_ring(pore, ring.clone(), &coords)
}

pub fn all_pore_metrics(mesh: &Mesh, u: &[f64]) -> Result<Vec<PoreMetrics>> {
    (0..mesh.num_pores()).map(|i| pore_metrics(mesh, i, u)).collect()
}

#[derive(Debug, Clone)]
pub struct Objective {
    pub value: f64,
    /// Derivative with respect to every global DOF.
    pub gradient: Vec<f64>,
}

/// `f0 = sum_i w_i (D*_i - D_i)^2` and its displacement gradient.
pub fn objective(metrics: &[PoreMetrics], targets: &[f64], weights: &[f64], num_dofs: usize) -> Objective {
    assert_eq!(metrics.len(), targets.len());
    assert_eq!(metrics.len(), weights.len());
    let mut value = 0.0;
    let mut gradient = vec![0.0; num_dofs];
    for ((m, &target), &w) in metrics.iter().zip(targets).zip(weights) {
        let gap = target - m.hydraulic_diameter;
        value += w * gap * gap;
        let factor = -2.0 * w * gap;
        for (&node, g) in m.ring_nodes.iter().zip(m.hd_grad()) {
            gradient[2 * node] += factor * g.x;
            gradient[2 * node + 1] += factor * g.y;
        }
    }
    Objective { value, gradient }
}
