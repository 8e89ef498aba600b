use std::sync::atomic::{AtomicU64, Ordering};

use super::field::{DiscreteField, DualVector};
use super::quadrature::QuadratureRule;
use crate::error::{invalid, Result};

static NEXT_MESH_ID: AtomicU64 = AtomicU64::new(1);

/// Structured layout a mesh was generated from. Used for nested refinement
/// and point location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Layout {
    Interval { a: f64, b: f64, n: usize },
    Rectangle { ax: f64, bx: f64, ay: f64, by: f64, nx: usize, ny: usize },
}

/// A quadrature point in physical coordinates.
#[derive(Debug, Clone, Copy)]
pub struct QuadPoint {
    pub cell: usize,
    pub x: [f64; 2],
    /// Physical weight (normalized rule weight times element measure).
    pub weight: f64,
    pub bary: [f64; 3],
}

/// Simplicial mesh of an interval or a rectangle with P1 degrees of freedom
/// on the interior vertices.
#[derive(Debug, Clone)]
pub struct Mesh {
    id: u64,
    dim: usize,
    layout: Layout,
    coords: Vec<[f64; 2]>,
    cells: Vec<usize>,
    boundary: Vec<bool>,
    dof_of_vertex: Vec<Option<usize>>,
    free_vertices: Vec<usize>,
    measures: Vec<f64>,
    grads: Vec<[[f64; 2]; 3]>,
    rule: QuadratureRule,
    qpoints: Vec<QuadPoint>,
}

/// Uniform mesh of `[a, b]` with `n` segments.
pub fn build_interval_mesh(a: f64, b: f64, n: usize) -> Result<Mesh> {
    const OP: &str = "fem::build_interval_mesh";
    if !(a.is_finite() && b.is_finite()) || a >= b {
        return Err(invalid(OP, format!("need a < b, got a = {a}, b = {b}")));
    }
    if n < 2 {
        return Err(invalid(OP, format!("need n >= 2 elements, got {n}")));
    }
    let h = (b - a) / n as f64;
    let coords: Vec<[f64; 2]> = (0..=n)
        .map(|i| {
            let x = if i == n { b } else { a + i as f64 * h };
            [x, 0.0]
        })
        .collect();
    let cells: Vec<usize> = (0..n).flat_map(|i| [i, i + 1]).collect();
    let boundary = (0..=n).map(|i| i == 0 || i == n).collect();
    Ok(Mesh::assemble(1, Layout::Interval { a, b, n }, coords, cells, boundary))
}

/// Structured triangulation of `[ax, bx] x [ay, by]`: each of the `nx * ny`
/// grid cells is split along its lower-left to upper-right diagonal.
pub fn build_rectangle_mesh(ax: f64, bx: f64, ay: f64, by: f64, nx: usize, ny: usize) -> Result<Mesh> {
    const OP: &str = "fem::build_rectangle_mesh";
    if ![ax, bx, ay, by].iter().all(|v| v.is_finite()) || ax >= bx || ay >= by {
        return Err(invalid(
            OP,
            format!("degenerate rectangle [{ax}, {bx}] x [{ay}, {by}]"),
        ));
    }
    if nx < 2 || ny < 2 {
        return Err(invalid(OP, format!("need nx, ny >= 2, got {nx} x {ny}")));
    }
    let hx = (bx - ax) / nx as f64;
    let hy = (by - ay) / ny as f64;
    let vid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut coords = Vec::with_capacity((nx + 1) * (ny + 1));
    let mut boundary = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        let y = if j == ny { by } else { ay + j as f64 * hy };
        for i in 0..=nx {
            let x = if i == nx { bx } else { ax + i as f64 * hx };
            coords.push([x, y]);
            boundary.push(i == 0 || j == 0 || i == nx || j == ny);
        }
    }
    let mut cells = Vec::with_capacity(6 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (v00, v10, v01, v11) = (vid(i, j), vid(i + 1, j), vid(i, j + 1), vid(i + 1, j + 1));
            cells.extend_from_slice(&[v00, v10, v11, v00, v11, v01]);
        }
    }
    Ok(Mesh::assemble(
        2,
        Layout::Rectangle { ax, bx, ay, by, nx, ny },
        coords,
        cells,
        boundary,
    ))
}

impl Mesh {
    fn assemble(
        dim: usize,
        layout: Layout,
        coords: Vec<[f64; 2]>,
        cells: Vec<usize>,
        boundary: Vec<bool>,
    ) -> Mesh {
        let mut dof_of_vertex = vec![None; coords.len()];
        let mut free_vertices = Vec::new();
        for (v, &on_boundary) in boundary.iter().enumerate() {
            if !on_boundary {
                dof_of_vertex[v] = Some(free_vertices.len());
                free_vertices.push(v);
            }
        }
        let npe = dim + 1;
        let ncells = cells.len() / npe;
        let mut measures = Vec::with_capacity(ncells);
        let mut grads = Vec::with_capacity(ncells);
        for c in 0..ncells {
            let vs = &cells[c * npe..(c + 1) * npe];
            if dim == 1 {
                let h = coords[vs[1]][0] - coords[vs[0]][0];
                measures.push(h);
                grads.push([[-1.0 / h, 0.0], [1.0 / h, 0.0], [0.0, 0.0]]);
            } else {
                let [x1, y1] = coords[vs[0]];
                let [x2, y2] = coords[vs[1]];
                let [x3, y3] = coords[vs[2]];
                let det = (x2 - x1) * (y3 - y1) - (x3 - x1) * (y2 - y1);
                measures.push(0.5 * det);
                grads.push([
                    [(y2 - y3) / det, (x3 - x2) / det],
                    [(y3 - y1) / det, (x1 - x3) / det],
                    [(y1 - y2) / det, (x2 - x1) / det],
                ]);
            }
        }
        let rule = QuadratureRule::for_dimension(dim);
        let mut qpoints = Vec::with_capacity(ncells * rule.nodes.len());
        for c in 0..ncells {
            let vs = &cells[c * npe..(c + 1) * npe];
            for node in &rule.nodes {
                let mut x = [0.0; 2];
                for (k, &v) in vs.iter().enumerate() {
                    x[0] += node.bary[k] * coords[v][0];
                    x[1] += node.bary[k] * coords[v][1];
                }
                qpoints.push(QuadPoint {
                    cell: c,
                    x,
                    weight: node.weight * measures[c],
                    bary: node.bary,
                });
            }
        }
        Mesh {
            id: NEXT_MESH_ID.fetch_add(1, Ordering::Relaxed),
            dim,
            layout,
            coords,
            cells,
            boundary,
            dof_of_vertex,
            free_vertices,
            measures,
            grads,
            rule,
            qpoints,
        }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn num_vertices(&self) -> usize {
        self.coords.len()
    }

    pub fn num_cells(&self) -> usize {
        self.measures.len()
    }

    pub fn num_free(&self) -> usize {
        self.free_vertices.len()
    }

    pub fn nodes_per_cell(&self) -> usize {
        self.dim + 1
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        let npe = self.dim + 1;
        &self.cells[c * npe..(c + 1) * npe]
    }

    /// Coordinates of a vertex, truncated to the mesh dimension.
    pub fn vertex(&self, v: usize) -> &[f64] {
        &self.coords[v][..self.dim]
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    pub fn dof_of_vertex(&self, v: usize) -> Option<usize> {
        self.dof_of_vertex[v]
    }

    pub fn free_vertices(&self) -> &[usize] {
        &self.free_vertices
    }

    /// Coordinates of the `j`-th degree of freedom.
    pub fn free_vertex(&self, j: usize) -> &[f64] {
        self.vertex(self.free_vertices[j])
    }

    pub fn cell_measure(&self, c: usize) -> f64 {
        self.measures[c]
    }

    pub fn cell_measures(&self) -> &[f64] {
        &self.measures
    }

    /// Gradients of the barycentric coordinates of cell `c`.
    pub fn basis_gradients(&self, c: usize) -> &[[f64; 2]; 3] {
        &self.grads[c]
    }

    pub fn quadrature_rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn quadrature_points(&self) -> &[QuadPoint] {
        &self.qpoints
    }

    pub fn quadrature_points_of(&self, c: usize) -> &[QuadPoint] {
        let m = self.rule.nodes.len();
        &self.qpoints[c * m..(c + 1) * m]
    }

    /// Lebesgue measure of the domain from its bounding box.
    pub fn domain_measure(&self) -> f64 {
        match self.layout {
            Layout::Interval { a, b, .. } => b - a,
            Layout::Rectangle { ax, bx, ay, by, .. } => (bx - ax) * (by - ay),
        }
    }

    /// Sum of element measures (equals `domain_measure` up to rounding).
    pub fn total_measure(&self) -> f64 {
        self.measures.iter().sum()
    }

    /// Mean element measure, used to scale nodal residuals.
    pub fn element_scale(&self) -> f64 {
        self.total_measure() / self.num_cells() as f64
    }

    /// Measure of `{x : pred(x)}`, accumulated over quadrature weights.
    pub fn measure_where(&self, pred: impl Fn(&[f64]) -> bool) -> f64 {
        self.qpoints
            .iter()
            .filter(|q| pred(&q.x[..self.dim]))
            .map(|q| q.weight)
            .sum()
    }

    /// Bounding box `(lower, upper)` of the domain.
    pub fn bounds(&self) -> ([f64; 2], [f64; 2]) {
        match self.layout {
            Layout::Interval { a, b, .. } => ([a, 0.0], [b, 0.0]),
            Layout::Rectangle { ax, bx, ay, by, .. } => ([ax, ay], [bx, by]),
        }
    }

    /// Nested refinement: every segment bisected, every grid cell split in four.
    pub fn refine(&self) -> Mesh {
        match self.layout {
            Layout::Interval { a, b, n } => build_interval_mesh(a, b, 2 * n),
            Layout::Rectangle { ax, bx, ay, by, nx, ny } => {
                build_rectangle_mesh(ax, bx, ay, by, 2 * nx, 2 * ny)
            }
        }
        .expect("refining a valid mesh")
    }

    pub fn zero_field(&self) -> DiscreteField {
        DiscreteField::new_unchecked(self.id, vec![0.0; self.num_free()])
    }

    pub fn zero_dual(&self) -> DualVector {
        DualVector::new_unchecked(self.id, vec![0.0; self.num_free()])
    }

    pub fn field(&self, values: Vec<f64>) -> Result<DiscreteField> {
        if values.len() != self.num_free() {
            return Err(invalid(
                "fem::field",
                format!("expected {} coefficients, got {}", self.num_free(), values.len()),
            ));
        }
        Ok(DiscreteField::new_unchecked(self.id, values))
    }

    pub fn dual(&self, values: Vec<f64>) -> Result<DualVector> {
        if values.len() != self.num_free() {
            return Err(invalid(
                "fem::dual",
                format!("expected {} entries, got {}", self.num_free(), values.len()),
            ));
        }
        Ok(DualVector::new_unchecked(self.id, values))
    }

    /// Nodal interpolant of `g` on the free vertices.
    pub fn interpolate(&self, g: impl Fn(&[f64]) -> f64) -> DiscreteField {
        let values = self.free_vertices.iter().map(|&v| g(self.vertex(v))).collect();
        DiscreteField::new_unchecked(self.id, values)
    }

    /// Hat function of degree of freedom `j`.
    pub fn hat(&self, j: usize) -> DiscreteField {
        let mut values = vec![0.0; self.num_free()];
        values[j] = 1.0;
        DiscreteField::new_unchecked(self.id, values)
    }

    /// Values at all vertices, zero on the boundary.
    pub fn vertex_values(&self, u: &DiscreteField) -> Vec<f64> {
        let mut out = vec![0.0; self.num_vertices()];
        for (j, &v) in self.free_vertices.iter().enumerate() {
            out[v] = u.values()[j];
        }
        out
    }

    /// Value of a P1 function (given by all vertex values) at quadrature point `q`.
    pub fn value_at(&self, vertex_values: &[f64], q: &QuadPoint) -> f64 {
        self.cell(q.cell)
            .iter()
            .enumerate()
            .map(|(k, &v)| q.bary[k] * vertex_values[v])
            .sum()
    }

    /// Constant gradient of a P1 function on cell `c`.
    pub fn gradient_on(&self, vertex_values: &[f64], c: usize) -> [f64; 2] {
        let g = &self.grads[c];
        let mut out = [0.0; 2];
        for (k, &v) in self.cell(c).iter().enumerate() {
            out[0] += vertex_values[v] * g[k][0];
            out[1] += vertex_values[v] * g[k][1];
        }
        out
    }

    /// Evaluate a P1 function (all vertex values) at an arbitrary point of the domain.
    pub fn evaluate_at(&self, vertex_values: &[f64], x: &[f64]) -> f64 {
        let (c, bary) = self.locate(x);
        self.cell(c)
            .iter()
            .enumerate()
            .map(|(k, &v)| bary[k] * vertex_values[v])
            .sum()
    }

    /// Cell containing `x` and its barycentric coordinates there (points are clamped to the domain).
    pub fn locate(&self, x: &[f64]) -> (usize, [f64; 3]) {
        match self.layout {
            Layout::Interval { a, b, n } => {
                let t = ((x[0] - a) / (b - a) * n as f64).clamp(0.0, n as f64);
                let i = (t.floor() as usize).min(n - 1);
                let xi = t - i as f64;
                (i, [1.0 - xi, xi, 0.0])
            }
            Layout::Rectangle { ax, bx, ay, by, nx, ny } => {
                let tx = ((x[0] - ax) / (bx - ax) * nx as f64).clamp(0.0, nx as f64);
                let ty = ((x[1] - ay) / (by - ay) * ny as f64).clamp(0.0, ny as f64);
                let i = (tx.floor() as usize).min(nx - 1);
                let j = (ty.floor() as usize).min(ny - 1);
                let (sx, sy) = (tx - i as f64, ty - j as f64);
                let base = 2 * (j * nx + i);
                if sy <= sx {
                    // (v00, v10, v11)
                    (base, [1.0 - sx, sx - sy, sy])
                } else {
                    // (v00, v11, v01)
                    (base + 1, [1.0 - sy, sx, sy - sx])
                }
            }
        }
    }

    /// Transfer a field from a coarser nested mesh by evaluating it at this mesh's vertices.
    pub fn prolongate(&self, coarse: &Mesh, u: &DiscreteField) -> Result<DiscreteField> {
        u.check(coarse, "fem::prolongate")?;
        let cv = coarse.vertex_values(u);
        Ok(self.interpolate(|x| coarse.evaluate_at(&cv, x)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_two_elements() {
        let m = build_interval_mesh(0.0, 1.0, 2).unwrap();
        assert_eq!(m.num_free(), 1);
        assert_eq!(m.free_vertex(0), &[0.5]);
        assert_eq!(m.cell_measures(), &[0.5, 0.5]);
        assert!(m.is_boundary(0) && m.is_boundary(2));
    }

    #[test]
    fn interval_four_elements() {
        let m = build_interval_mesh(0.0, 1.0, 4).unwrap();
        let xs: Vec<f64> = (0..m.num_free()).map(|j| m.free_vertex(j)[0]).collect();
        assert_eq!(xs, vec![0.25, 0.5, 0.75]);
    }

    #[test]
    fn degenerate_inputs_rejected() {
        assert!(build_interval_mesh(0.0, 0.0, 4).is_err());
        assert!(build_interval_mesh(1.0, 0.0, 4).is_err());
        assert!(build_interval_mesh(0.0, 1.0, 1).is_err());
        assert!(build_rectangle_mesh(0.0, 1.0, 1.0, 1.0, 4, 4).is_err());
        assert!(build_rectangle_mesh(0.0, 1.0, 0.0, 1.0, 1, 4).is_err());
    }

    #[test]
    fn rectangle_counts() {
        let m = build_rectangle_mesh(0.0, 1.0, 0.0, 1.0, 2, 2).unwrap();
        assert_eq!(m.num_cells(), 8);
        assert_eq!(m.num_free(), 1);
        assert_eq!(m.free_vertex(0), &[0.5, 0.5]);
        let m = build_rectangle_mesh(0.0, 1.0, 0.0, 1.0, 4, 4).unwrap();
        assert_eq!(m.num_cells(), 32);
        assert_eq!(m.num_free(), 9);
    }

    #[test]
    fn measures_partition_domain() {
        let m = build_rectangle_mesh(0.0, 1.0, 0.0, 1.0, 7, 5).unwrap();
        assert!(m.cell_measures().iter().all(|&a| a > 0.0));
        assert!((m.total_measure() - 1.0).abs() < 1e-12);
        let m = build_rectangle_mesh(-1.0, 2.0, 0.5, 1.25, 9, 13).unwrap();
        let rel = (m.total_measure() - m.domain_measure()).abs() / m.domain_measure();
        assert!(rel < 1e-12);
        let m = build_interval_mesh(-0.3, 2.9, 37).unwrap();
        assert!(((m.total_measure() - 3.2) / 3.2).abs() < 1e-12);
    }

    #[test]
    fn every_geometric_boundary_vertex_is_flagged() {
        let m = build_rectangle_mesh(0.0, 2.0, 0.0, 1.0, 6, 3).unwrap();
        for v in 0..m.num_vertices() {
            let x = m.vertex(v);
            let on_edge = x[0] == 0.0 || x[0] == 2.0 || x[1] == 0.0 || x[1] == 1.0;
            assert_eq!(on_edge, m.is_boundary(v), "vertex {v} at {x:?}");
        }
    }

    #[test]
    fn locate_recovers_vertex_values() {
        let m = build_rectangle_mesh(0.0, 1.0, 0.0, 1.0, 4, 3).unwrap();
        let u = m.interpolate(|x| x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1]));
        let vv = m.vertex_values(&u);
        for v in 0..m.num_vertices() {
            assert!((m.evaluate_at(&vv, m.vertex(v)) - vv[v]).abs() < 1e-14);
        }
        // quadrature points are interior to their own cell
        for q in m.quadrature_points() {
            let direct = m.value_at(&vv, q);
            assert!((m.evaluate_at(&vv, &q.x) - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn prolongation_is_exact_on_nested_meshes() {
        let coarse = build_rectangle_mesh(0.0, 1.0, 0.0, 1.0, 3, 3).unwrap();
        let fine = coarse.refine();
        let u = coarse.interpolate(|x| (x[0] - 0.2).abs() + x[1] * x[1]);
        let uf = fine.prolongate(&coarse, &u).unwrap();
        let cv = coarse.vertex_values(&u);
        let fv = fine.vertex_values(&uf);
        for q in fine.quadrature_points() {
            let a = fine.value_at(&fv, q);
            let b = coarse.evaluate_at(&cv, &q.x);
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn measure_where_counts_quadrature_weight() {
        let m = build_interval_mesh(0.0, 1.0, 10).unwrap();
        let half = m.measure_where(|x| x[0] < 0.5);
        assert!((half - 0.5).abs() < 1e-14);
    }
}
