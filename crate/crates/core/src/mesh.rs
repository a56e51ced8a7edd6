//! Structured bilinear-quad discretization of the rectangular design domain.
//!
//! Elements lying inside a pore are removed, the surviving nodes are
//! renumbered compactly (x index fastest), and the nodes bounding each pore
//! are collected into a clockwise ring. The left edge is clamped; the right
//! edge carries the prescribed stretch in x and is held in y.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when snapping pore edges to grid lines.
const GRID_SNAP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoreSpec {
    /// Pore center `(x, y)` in mm.
    pub center: [f64; 2],
    /// Pore width along x (mm).
    pub width: f64,
    /// Pore height along y (mm).
    pub height: f64,
    /// Desired hydraulic diameter at full stretch (mm).
    #[serde(default)]
    pub target_hd: f64,
    #[serde(default = "default_weight")]
    pub weight: f64,
}

fn default_weight() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub length_x: f64,
    pub length_y: f64,
    pub nelx: usize,
    pub nely: usize,
    #[serde(default)]
    pub pores: Vec<PoreSpec>,
    /// Prescribed x-displacement of the right edge (mm).
    pub stretch: f64,
}

impl DomainSpec {
    pub fn element_size(&self) -> (f64, f64) {
        (
            self.length_x / self.nelx as f64,
            self.length_y / self.nely as f64,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.length_x) || !positive(self.length_y) {
            return Err(Error::Config("domain lengths must be positive".into()));
        }
        // Zero stretch is accepted as a degenerate analysis (all states at rest).
        if !(self.stretch.is_finite() && self.stretch >= 0.0) {
            return Err(Error::Config("stretch must be non-negative".into()));
        }
        if self.nelx < 2 || self.nely < 2 {
            return Err(Error::Config(
                "at least two elements per direction are required".into(),
            ));
        }
        for (i, p) in self.pores.iter().enumerate() {
            if !positive(p.width) || !positive(p.height) {
                return Err(Error::Config(format!("pore {i}: size must be positive")));
            }
            if !(p.weight.is_finite() && p.weight >= 0.0) {
                return Err(Error::Config(format!(
                    "pore {i}: weight must be non-negative"
                )));
            }
            if !p.target_hd.is_finite() || p.target_hd < 0.0 {
                return Err(Error::Config(format!(
                    "pore {i}: target hydraulic diameter must be non-negative"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofKind {
    Free,
    /// Held at zero displacement.
    Fixed,
    /// Driven by the load factor times the stretch.
    Prescribed,
}

/// Index block `[ix0, ix1) x [iy0, iy1)` of elements removed for one pore.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoreBlock {
    pub ix0: usize,
    pub ix1: usize,
    pub iy0: usize,
    pub iy1: usize,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub length_x: f64,
    pub length_y: f64,
    pub nelx: usize,
    pub nely: usize,
    /// Reference nodal coordinates (mm).
    pub nodes: Vec<Vector2<f64>>,
    /// Counterclockwise node ids per element.
    pub elements: Vec<[usize; 4]>,
    /// `(ix, iy)` position of each surviving element in the full grid.
    pub element_grid: Vec<(usize, usize)>,
    /// Kind of each global DOF (`2 * node + direction`).
    pub dofs: Vec<DofKind>,
    pub pore_blocks: Vec<PoreBlock>,
    /// Clockwise boundary node ids per pore.
    pub pore_rings: Vec<Vec<usize>>,
}

impl Mesh {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn num_dofs(&self) -> usize {
        2 * self.nodes.len()
    }

    pub fn num_pores(&self) -> usize {
        self.pore_rings.len()
    }

    pub fn element_size(&self) -> (f64, f64) {
        (
            self.length_x / self.nelx as f64,
            self.length_y / self.nely as f64,
        )
    }

    pub fn element_coords(&self, e: usize) -> [Vector2<f64>; 4] {
        self.elements[e].map(|n| self.nodes[n])
    }

    /// Global DOF indices of an element, ordered `[u0x, u0y, u1x, ...]`.
    pub fn element_dofs(&self, e: usize) -> [usize; 8] {
        let n = self.elements[e];
        [
            2 * n[0],
            2 * n[0] + 1,
            2 * n[1],
            2 * n[1] + 1,
            2 * n[2],
            2 * n[2] + 1,
            2 * n[3],
            2 * n[3] + 1,
        ]
    }

    pub fn element_centroid(&self, e: usize) -> Vector2<f64> {
        let c = self.element_coords(e);
        (c[0] + c[1] + c[2] + c[3]) * 0.25
    }

    pub fn element_area(&self, e: usize) -> f64 {
        let c = self.element_coords(e);
        polygon_signed_area(&c).abs()
    }

    pub fn fixed_dofs(&self) -> Vec<usize> {
        self.dofs_of_kind(DofKind::Fixed)
    }

    pub fn prescribed_dofs(&self) -> Vec<usize> {
        self.dofs_of_kind(DofKind::Prescribed)
    }

    fn dofs_of_kind(&self, kind: DofKind) -> Vec<usize> {
        self.dofs
            .iter()
            .enumerate()
            .filter(|(_, k)| **k == kind)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Builds the pore-perforated structured mesh.
pub fn build_mesh(spec: &DomainSpec) -> Result<Mesh> {
    spec.validate()?;
    let (hx, hy) = spec.element_size();
    let (nelx, nely) = (spec.nelx, spec.nely);

    let mut blocks = Vec::with_capacity(spec.pores.len());
    for (i, pore) in spec.pores.iter().enumerate() {
        blocks.push(pore_block(i, pore, spec, hx, hy)?);
    }
    for i in 0..blocks.len() {
        for j in i + 1..blocks.len() {
            let (a, b) = (blocks[i], blocks[j]);
            // Touching blocks would share ring nodes, which is treated as an overlap.
            let separated =
                a.ix1 < b.ix0 || b.ix1 < a.ix0 || a.iy1 < b.iy0 || b.iy1 < a.iy0;
            if !separated {
                return Err(Error::Geometry(format!("pores {i} and {j} overlap or touch")));
            }
        }
    }

    let removed = |ix: usize, iy: usize| {
        blocks
            .iter()
            .any(|b| ix >= b.ix0 && ix < b.ix1 && iy >= b.iy0 && iy < b.iy1)
    };

    let grid_node = |ix: usize, iy: usize| iy * (nelx + 1) + ix;
    let mut used = vec![false; (nelx + 1) * (nely + 1)];
    let mut grid_elements = Vec::new();
    for iy in 0..nely {
        for ix in 0..nelx {
            if removed(ix, iy) {
                continue;
            }
            let conn = [
                grid_node(ix, iy),
                grid_node(ix + 1, iy),
                grid_node(ix + 1, iy + 1),
                grid_node(ix, iy + 1),
            ];
            for n in conn {
                used[n] = true;
            }
            grid_elements.push(((ix, iy), conn));
        }
    }

    let mut renumber = vec![usize::MAX; used.len()];
    let mut nodes = Vec::new();
    let mut node_grid = Vec::new();
    for iy in 0..=nely {
        for ix in 0..=nelx {
            let g = grid_node(ix, iy);
            if used[g] {
                renumber[g] = nodes.len();
                nodes.push(Vector2::new(ix as f64 * hx, iy as f64 * hy));
                node_grid.push((ix, iy));
            }
        }
    }

    let elements: Vec<[usize; 4]> = grid_elements
        .iter()
        .map(|(_, conn)| conn.map(|g| renumber[g]))
        .collect();
    let element_grid = grid_elements.iter().map(|(pos, _)| *pos).collect();

    let mut dofs = vec![DofKind::Free; 2 * nodes.len()];
    for (n, &(ix, _)) in node_grid.iter().enumerate() {
        if ix == 0 {
            dofs[2 * n] = DofKind::Fixed;
            dofs[2 * n + 1] = DofKind::Fixed;
        } else if ix == nelx {
            dofs[2 * n] = DofKind::Prescribed;
            dofs[2 * n + 1] = DofKind::Fixed;
        }
    }

    let mut pore_rings = Vec::with_capacity(blocks.len());
    for (i, b) in blocks.iter().enumerate() {
        let mut ring = Vec::new();
        for iy in b.iy0..=b.iy1 {
            for ix in b.ix0..=b.ix1 {
                let on_boundary = ix == b.ix0 || ix == b.ix1 || iy == b.iy0 || iy == b.iy1;
                if on_boundary {
                    let id = renumber[grid_node(ix, iy)];
                    if id == usize::MAX {
                        return Err(Error::Topology {
                            pore: i,
                            detail: format!("boundary node ({ix}, {iy}) is not part of the mesh"),
                        });
                    }
                    ring.push(id);
                }
            }
        }
        let ring = order_ring_clockwise(&ring, &nodes);
        check_ring_closed(i, &ring, &node_grid)?;
        pore_rings.push(ring);
    }

    Ok(Mesh {
        length_x: spec.length_x,
        length_y: spec.length_y,
        nelx,
        nely,
        nodes,
        elements,
        element_grid,
        dofs,
        pore_blocks: blocks,
        pore_rings,
    })
}

fn snap(value: f64, h: f64) -> Option<usize> {
    let k = (value / h).round();
    ((value / h - k).abs() <= GRID_SNAP_TOL * k.abs().max(1.0) && k >= 0.0).then_some(k as usize)
}

fn pore_block(i: usize, pore: &PoreSpec, spec: &DomainSpec, hx: f64, hy: f64) -> Result<PoreBlock> {
    let [cx, cy] = pore.center;
    let (x0, x1) = (cx - 0.5 * pore.width, cx + 0.5 * pore.width);
    let (y0, y1) = (cy - 0.5 * pore.height, cy + 0.5 * pore.height);
    let tol = GRID_SNAP_TOL * spec.length_x.max(spec.length_y);
    if x0 < -tol || y0 < -tol || x1 > spec.length_x + tol || y1 > spec.length_y + tol {
        return Err(Error::Geometry(format!("pore {i} extends outside the domain")));
    }
    let edges = (snap(x0, hx), snap(x1, hx), snap(y0, hy), snap(y1, hy));
    let (Some(ix0), Some(ix1), Some(iy0), Some(iy1)) = edges else {
        return Err(Error::PoreAlignment {
            pore: i,
            detail: format!(
                "edges x=[{x0}, {x1}], y=[{y0}, {y1}] are not multiples of the element size ({hx}, {hy})"
            ),
        });
    };
    if ix1 <= ix0 || iy1 <= iy0 {
        return Err(Error::PoreAlignment {
            pore: i,
            detail: "pore covers no whole element".into(),
        });
    }
    if ix0 == 0 || iy0 == 0 || ix1 == spec.nelx || iy1 == spec.nely {
        return Err(Error::Topology {
            pore: i,
            detail: "pore touches the domain boundary, its ring would be open".into(),
        });
    }
    Ok(PoreBlock { ix0, ix1, iy0, iy1 })
}

fn check_ring_closed(pore: usize, ring: &[usize], node_grid: &[(usize, usize)]) -> Result<()> {
    if ring.len() < 4 {
        return Err(Error::Topology {
            pore,
            detail: format!("ring has only {} nodes", ring.len()),
        });
    }
    for k in 0..ring.len() {
        let (a, b) = (node_grid[ring[k]], node_grid[ring[(k + 1) % ring.len()]]);
        let step = a.0.abs_diff(b.0) + a.1.abs_diff(b.1);
        if step != 1 {
            return Err(Error::Topology {
                pore,
                detail: format!("nodes {} and {} are not joined by an element edge", ring[k], ring[(k + 1) % ring.len()]),
            });
        }
    }
    Ok(())
}

/// Orders ring nodes clockwise by angle around their centroid; ties on the
/// angle are broken by distance from the centroid.
pub fn order_ring_clockwise(ids: &[usize], nodes: &[Vector2<f64>]) -> Vec<usize> {
    let n = ids.len().max(1) as f64;
    let centroid = ids.iter().map(|&i| nodes[i]).sum::<Vector2<f64>>() / n;
    let mut keyed: Vec<(f64, f64, usize)> = ids
        .iter()
        .map(|&i| {
            let d = nodes[i] - centroid;
            (d.y.atan2(d.x), d.norm(), i)
        })
        .collect();
    // Descending angle is clockwise in a y-up frame.
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.total_cmp(&b.1)));
    keyed.into_iter().map(|(_, _, i)| i).collect()
}

#[derive(Debug, Clone)]
pub struct PoreRing {
    pub nodes: Vec<usize>,
    pub coords: Vec<Vector2<f64>>,
}

/// Clockwise boundary ring of pore `pore_index` in the reference configuration.
pub fn pore_ring(mesh: &Mesh, pore_index: usize) -> Result<PoreRing> {
    let ring = mesh.pore_rings.get(pore_index).ok_or_else(|| {
        Error::Config(format!(
            "pore index {pore_index} out of range ({} pores)",
            mesh.num_pores()
        ))
    })?;
    Ok(PoreRing {
        nodes: ring.clone(),
        coords: ring.iter().map(|&n| mesh.nodes[n]).collect(),
    })
}

/// Shoelace signed area; negative for clockwise polygons.
pub fn polygon_signed_area(points: &[Vector2<f64>]) -> f64 {
    let n = points.len();
    (0..n)
        .map(|k| {
            let (p, q) = (points[k], points[(k + 1) % n]);
            p.x * q.y - q.x * p.y
        })
        .sum::<f64>()
        * 0.5
}
