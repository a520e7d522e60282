use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::curve::{validate_curve, BoundaryCurve, DEFAULT_EPSILONS, DEFAULT_S_MAX};
use crate::error::{domain, Error, Result};
use crate::quadrature::GaussLegendre;

/// A cell thinner than this fraction of `h` (measure over largest face
/// aperture) is merged into the neighbour across that face.
const SLIVER_FRACTION: f64 = 0.25;
const GL_NODES: usize = 8;

/// One unknown of the discretization: a clipped lattice cell, or several
/// merged ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridNode {
    /// In-domain representative point; unused trailing coordinates are 0.
    pub position: [f64; 3],
    pub measure: f64,
    pub boundary: bool,
    /// Lattice index of the largest cell of the node.
    pub lattice: [usize; 3],
}

/// Interface between two nodes, normal to coordinate axis `axis`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridFace {
    pub a: usize,
    pub b: usize,
    pub axis: usize,
    /// Length (2-D) or area (3-D) of the part of the face inside the domain.
    pub aperture: f64,
    /// Separation of the two representative points along `axis`.
    pub distance: f64,
}

impl GridFace {
    /// Two-point transmissibility for unit conductivity.
    pub fn geometric_transmissibility(&self) -> f64 {
        self.aperture / self.distance
    }
}

/// A lattice cell clipped to the domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub node: usize,
    pub lattice: [usize; 3],
    pub measure: f64,
    /// Range of the axial coordinate covered by the cell.
    pub axial: (f64, f64),
}

/// Truncated, discretized horn `D ∩ {x_axial < L}` with Neumann structure:
/// only faces interior to the domain carry flux.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HornGrid {
    pub curve: BoundaryCurve,
    pub dimension: usize,
    pub length: f64,
    pub resolution: f64,
    pub nodes: Vec<GridNode>,
    pub faces: Vec<GridFace>,
    pub cells: Vec<GridCell>,
    pub measure_total: f64,
    pub tail_measure: f64,
    /// Offset of lattice index 0 in the cross-sectional coordinates (3-D).
    origin: f64,
}

impl HornGrid {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn axial_axis(&self) -> usize {
        if self.dimension == 2 {
            0
        } else {
            2
        }
    }

    pub fn masses(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.measure).collect()
    }

    /// Whether `p` satisfies the domain inequalities of the truncated horn.
    pub fn contains(&self, p: &[f64]) -> bool {
        in_horn(&self.curve, self.dimension, self.length, p)
    }

    /// Measure of the part of cell `c` whose axial coordinate exceeds `cut`.
    pub fn cell_measure_beyond(&self, c: &GridCell, cut: f64) -> f64 {
        if cut <= c.axial.0 {
            return c.measure;
        }
        if cut >= c.axial.1 {
            return 0.0;
        }
        let h = self.resolution;
        match self.dimension {
            2 => {
                let y0 = c.lattice[1] as f64 * h;
                area_2d(&self.curve, cut, c.axial.1, y0, y0 + h)
            }
            _ => {
                let (x0, y0) = (self.origin + c.lattice[0] as f64 * h, self.origin + c.lattice[1] as f64 * h);
                volume_3d(&self.curve, x0, x0 + h, y0, y0 + h, cut, c.axial.1)
            }
        }
    }

    /// Position of every node as `(id, coordinates)` rows.
    pub fn coordinates(&self) -> impl Iterator<Item = (usize, &[f64])> {
        self.nodes.iter().enumerate().map(move |(i, n)| (i, &n.position[..self.dimension]))
    }
}

/// Domain inequalities: `0 < x₁ < L, 0 < x₂ < b(x₁)` in 2-D and
/// `0 < x₃ < L, x₁² + x₂² < b(x₃)²` in 3-D.
pub fn in_horn(curve: &BoundaryCurve, dimension: usize, length: f64, p: &[f64]) -> bool {
    match dimension {
        2 => p[0] > 0.0 && p[0] < length && p[1] > 0.0 && p[1] < curve.value(p[0]),
        3 => p[2] > 0.0 && p[2] < length && p[0].hypot(p[1]) < curve.value(p[2]),
        _ => false,
    }
}

/// Largest admissible cell size: half the opening width and a quarter of the
/// truncation length.
pub fn max_resolution(curve: &BoundaryCurve, length: f64) -> f64 {
    (0.5 * curve.value(0.0)).min(0.25 * length)
}

fn gl() -> GaussLegendre {
    GaussLegendre::new(GL_NODES)
}

/// Integral over `[a, b]` split at the given interior breakpoints.
fn piecewise(a: f64, b: f64, mut breaks: Vec<f64>, f: impl Fn(f64) -> f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    breaks.retain(|&x| x > a && x < b);
    breaks.sort_by(f64::total_cmp);
    let g = gl();
    let mut lo = a;
    let mut total = 0.0;
    for x in breaks.into_iter().chain(std::iter::once(b)) {
        total += g.integrate(lo, x, &f);
        lo = x;
    }
    total
}

/// Area of `[xa, xb] × [y0, y1] ∩ {x₂ < b(x₁)}`.
fn area_2d(curve: &BoundaryCurve, xa: f64, xb: f64, y0: f64, y1: f64) -> f64 {
    let xu = curve.inverse(y1).clamp(xa, xb);
    let xl = curve.inverse(y0).clamp(xa, xb);
    let full = (y1 - y0) * (xu - xa);
    let g = GaussLegendre::new(16);
    full + g.integrate_composite(xu, xl, 2, |x| curve.value(x) - y0).max(0.0)
}

/// `G(u) = ∫_0^u √(r² − s²) ds` for `0 ≤ u ≤ r`.
fn circle_primitive(u: f64, r: f64) -> f64 {
    let u = u.min(r);
    0.5 * (u * (r * r - u * u).max(0.0).sqrt() + r * r * (u / r).clamp(-1.0, 1.0).asin())
}

/// Area of `[0, x] × [0, y] ∩ disk(r)` for `x, y ≥ 0`.
fn quarter_area(x: f64, y: f64, r: f64) -> f64 {
    let (x, y) = (x.min(r), y.min(r));
    if x <= 0.0 || y <= 0.0 {
        return 0.0;
    }
    if x * x + y * y <= r * r {
        return x * y;
    }
    let u = (r * r - y * y).max(0.0).sqrt();
    y * u + circle_primitive(x, r) - circle_primitive(u, r)
}

fn signed_quarter(x: f64, y: f64, r: f64) -> f64 {
    x.signum() * y.signum() * quarter_area(x.abs(), y.abs(), r)
}

/// Area of the rectangle `[x0, x1] × [y0, y1]` inside the disk of radius `r`.
pub(crate) fn rect_disk_area(x0: f64, x1: f64, y0: f64, y1: f64, r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let a = signed_quarter(x1, y1, r) - signed_quarter(x0, y1, r) - signed_quarter(x1, y0, r) + signed_quarter(x0, y0, r);
    a.max(0.0)
}

fn interval_distance(a: f64, b: f64) -> f64 {
    if a > 0.0 {
        a
    } else if b < 0.0 {
        -b
    } else {
        0.0
    }
}

fn square_radii(x0: f64, x1: f64, y0: f64, y1: f64) -> Vec<f64> {
    let dmin = interval_distance(x0, x1).hypot(interval_distance(y0, y1));
    let mut r = vec![dmin, x0.abs(), x1.abs(), y0.abs(), y1.abs()];
    for &x in &[x0, x1] {
        for &y in &[y0, y1] {
            r.push(x.hypot(y));
        }
    }
    r
}

/// Volume of `[x0,x1] × [y0,y1] × [za,zb]` inside the 3-D horn.
fn volume_3d(curve: &BoundaryCurve, x0: f64, x1: f64, y0: f64, y1: f64, za: f64, zb: f64) -> f64 {
    let breaks = square_radii(x0, x1, y0, y1).into_iter().map(|r| curve.inverse(r)).collect();
    piecewise(za, zb, breaks, |z| rect_disk_area(x0, x1, y0, y1, curve.value(z)))
}

/// Aperture of the face `{x_axis = c} × [w0, w1] × [za, zb]` in 3-D.
fn side_aperture_3d(curve: &BoundaryCurve, c: f64, w0: f64, w1: f64, za: f64, zb: f64) -> f64 {
    let breaks = vec![curve.inverse(c.abs()), curve.inverse(c.hypot(w0)), curve.inverse(c.hypot(w1))];
    piecewise(za, zb, breaks, |z| {
        let r = curve.value(z);
        if r <= c.abs() {
            return 0.0;
        }
        let w = (r * r - c * c).sqrt();
        (w1.min(w) - w0.max(-w)).max(0.0)
    })
}

struct Lattice {
    cells: Vec<GridCell>,
    /// (cell a, cell b, axis, aperture)
    faces: Vec<(usize, usize, usize, f64)>,
    reps: Vec<[f64; 3]>,
    cut: Vec<bool>,
    on_wall: Vec<bool>,
}

/// Builds the clipped structured grid of the truncated horn.
pub fn build_grid(curve: &BoundaryCurve, dimension: usize, length: f64, resolution: f64) -> Result<HornGrid> {
    if dimension != 2 && dimension != 3 {
        return domain(format!("dimension must be 2 or 3, got {dimension}"));
    }
    if !(length > 0.0 && length.is_finite()) {
        return domain(format!("truncation length must be positive, got {length}"));
    }
    if !(resolution > 0.0 && resolution.is_finite()) {
        return domain(format!("resolution must be positive, got {resolution}"));
    }
    let report = validate_curve(curve, &DEFAULT_EPSILONS, DEFAULT_S_MAX)?;
    if !report.admissible {
        return domain(format!("boundary curve is not admissible: {}", report.reasons.join("; ")));
    }
    let suggested = max_resolution(curve, length);
    if resolution > suggested {
        return Err(Error::Resolution { resolution, suggested });
    }
    let (lattice, origin) = match dimension {
        2 => (lattice_2d(curve, length, resolution), 0.0),
        _ => lattice_3d(curve, length, resolution),
    };
    let tail_measure = match dimension {
        2 => curve.tail_integral(length, 1),
        _ => std::f64::consts::PI * curve.tail_integral(length, 2),
    };
    Ok(assemble(curve, dimension, length, resolution, lattice, tail_measure, origin))
}

fn lattice_2d(curve: &BoundaryCurve, length: f64, h: f64) -> Lattice {
    let nx = (length / h - 1e-9).ceil() as usize;
    let ny = (curve.value(0.0) / h).ceil() as usize;
    let mut index = vec![vec![usize::MAX; ny]; nx];
    let mut cells = Vec::new();
    let mut reps = Vec::new();
    let mut cut = Vec::new();
    let mut on_wall = Vec::new();
    for i in 0..nx {
        let xa = i as f64 * h;
        let xb = ((i + 1) as f64 * h).min(length);
        for j in 0..ny {
            let y0 = j as f64 * h;
            let y1 = y0 + h;
            if curve.value(xa) <= y0 {
                break;
            }
            let area = area_2d(curve, xa, xb, y0, y1);
            if area <= 1e-14 * h * h {
                continue;
            }
            index[i][j] = cells.len();
            let x1r = 0.5 * (xa + curve.inverse(y0).min(xb));
            let x2r = y0 + 0.5 * (curve.value(x1r).min(y1) - y0);
            reps.push([x1r, x2r, 0.0]);
            cut.push(curve.value(xb) < y1);
            on_wall.push(i == 0 || j == 0 || i + 1 == nx);
            cells.push(GridCell { node: 0, lattice: [i, j, 0], measure: area, axial: (xa, xb) });
        }
    }
    let mut faces = Vec::new();
    for i in 0..nx {
        let xa = i as f64 * h;
        let xb = ((i + 1) as f64 * h).min(length);
        for j in 0..ny {
            let c = index[i][j];
            if c == usize::MAX {
                continue;
            }
            let y0 = j as f64 * h;
            if i + 1 < nx && index[i + 1][j] != usize::MAX {
                let ap = (curve.value(xb) - y0).clamp(0.0, h);
                if ap > 0.0 {
                    faces.push((c, index[i + 1][j], 0, ap));
                }
            }
            if j + 1 < ny && index[i][j + 1] != usize::MAX {
                let ap = curve.inverse(y0 + h).clamp(xa, xb) - xa;
                if ap > 0.0 {
                    faces.push((c, index[i][j + 1], 1, ap));
                }
            }
        }
    }
    Lattice { cells, faces, reps, cut, on_wall }
}

fn lattice_3d(curve: &BoundaryCurve, length: f64, h: f64) -> (Lattice, f64) {
    let nz = (length / h - 1e-9).ceil() as usize;
    let nr = (curve.value(0.0) / h).ceil() as usize;
    let origin = -(nr as f64) * h;
    let side = 2 * nr;
    let key = |i: usize, j: usize, k: usize| (k * side + i) * side + j;
    let mut index = vec![usize::MAX; side * side * nz];
    let mut cells = Vec::new();
    let mut reps = Vec::new();
    let mut cut = Vec::new();
    let mut on_wall = Vec::new();
    for k in 0..nz {
        let za = k as f64 * h;
        let zb = ((k + 1) as f64 * h).min(length);
        for i in 0..side {
            let x0 = origin + i as f64 * h;
            for j in 0..side {
                let y0 = origin + j as f64 * h;
                let (x1, y1) = (x0 + h, y0 + h);
                let rmin = interval_distance(x0, x1).hypot(interval_distance(y0, y1));
                if curve.value(za) <= rmin {
                    continue;
                }
                let vol = volume_3d(curve, x0, x1, y0, y1, za, zb);
                if vol <= 1e-14 * h * h * h {
                    continue;
                }
                index[key(i, j, k)] = cells.len();
                let z_end = zb.min(curve.inverse(rmin));
                let zr = 0.5 * (za + z_end);
                let r = curve.value(zr);
                let centre = [x0 + 0.5 * h, y0 + 0.5 * h];
                let (qx, qy) = (0.0f64.clamp(x0, x1), 0.0f64.clamp(y0, y1));
                let rep = if centre[0].hypot(centre[1]) < 0.999 * r {
                    centre
                } else {
                    // Walk from the point nearest the axis towards the centre and
                    // stop halfway to the circle.
                    let (dx, dy) = (centre[0] - qx, centre[1] - qy);
                    let (mut lo, mut hi) = (0.0, 1.0);
                    for _ in 0..60 {
                        let mid = 0.5 * (lo + hi);
                        if (qx + mid * dx).hypot(qy + mid * dy) < r {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    let s = 0.5 * lo;
                    [qx + s * dx, qy + s * dy]
                };
                reps.push([rep[0], rep[1], zr]);
                let corner_out = square_radii(x0, x1, y0, y1).into_iter().fold(0.0, f64::max) >= curve.value(zb);
                cut.push(corner_out);
                on_wall.push(k == 0 || k + 1 == nz);
                cells.push(GridCell { node: 0, lattice: [i, j, k], measure: vol, axial: (za, zb) });
            }
        }
    }
    let mut faces = Vec::new();
    for k in 0..nz {
        let za = k as f64 * h;
        let zb = ((k + 1) as f64 * h).min(length);
        for i in 0..side {
            let x0 = origin + i as f64 * h;
            for j in 0..side {
                let c = index[key(i, j, k)];
                if c == usize::MAX {
                    continue;
                }
                let y0 = origin + j as f64 * h;
                if i + 1 < side && index[key(i + 1, j, k)] != usize::MAX {
                    let ap = side_aperture_3d(curve, x0 + h, y0, y0 + h, za, zb);
                    if ap > 0.0 {
                        faces.push((c, index[key(i + 1, j, k)], 0, ap));
                    }
                }
                if j + 1 < side && index[key(i, j + 1, k)] != usize::MAX {
                    let ap = side_aperture_3d(curve, y0 + h, x0, x0 + h, za, zb);
                    if ap > 0.0 {
                        faces.push((c, index[key(i, j + 1, k)], 1, ap));
                    }
                }
                if k + 1 < nz && index[key(i, j, k + 1)] != usize::MAX {
                    let ap = rect_disk_area(x0, x0 + h, y0, y0 + h, curve.value(zb));
                    if ap > 0.0 {
                        faces.push((c, index[key(i, j, k + 1)], 2, ap));
                    }
                }
            }
        }
    }
    (Lattice { cells, faces, reps, cut, on_wall }, origin)
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn assemble(
    curve: &BoundaryCurve,
    dimension: usize,
    length: f64,
    h: f64,
    lat: Lattice,
    tail_measure: f64,
    origin: f64,
) -> HornGrid {
    let Lattice { mut cells, faces, reps, cut, on_wall } = lat;
    let n = cells.len();

    // Merge slivers into the neighbour across their widest face.
    let mut widest: Vec<(f64, usize)> = vec![(0.0, usize::MAX); n];
    for &(a, b, _, ap) in &faces {
        if ap > widest[a].0 {
            widest[a] = (ap, b);
        }
        if ap > widest[b].0 {
            widest[b] = (ap, a);
        }
    }
    let mut parent: Vec<usize> = (0..n).collect();
    for c in 0..n {
        let (ap, nb) = widest[c];
        if nb != usize::MAX && cells[c].measure < SLIVER_FRACTION * h * ap {
            let (ra, rb) = (find(&mut parent, c), find(&mut parent, nb));
            if ra != rb {
                parent[ra] = rb;
            }
        }
    }

    let mut group_of_root = BTreeMap::new();
    let mut node_of_cell = vec![0usize; n];
    for (c, slot) in node_of_cell.iter_mut().enumerate() {
        let r = find(&mut parent, c);
        let next = group_of_root.len();
        *slot = *group_of_root.entry(r).or_insert(next);
    }
    let n_nodes = group_of_root.len();
    let mut main = vec![usize::MAX; n_nodes];
    let mut measure = vec![0.0; n_nodes];
    let mut boundary = vec![false; n_nodes];
    for c in 0..n {
        let g = node_of_cell[c];
        cells[c].node = g;
        measure[g] += cells[c].measure;
        boundary[g] |= cut[c] || on_wall[c];
        if main[g] == usize::MAX || cells[c].measure > cells[main[g]].measure {
            main[g] = c;
        }
    }
    let nodes: Vec<GridNode> = (0..n_nodes)
        .map(|g| GridNode {
            position: reps[main[g]],
            measure: measure[g],
            boundary: boundary[g],
            lattice: cells[main[g]].lattice,
        })
        .collect();

    let mut merged: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
    for &(a, b, axis, ap) in &faces {
        let (ga, gb) = (node_of_cell[a], node_of_cell[b]);
        if ga == gb {
            continue;
        }
        let k = (ga.min(gb), ga.max(gb), axis);
        *merged.entry(k).or_insert(0.0) += ap;
    }
    let faces = merged
        .into_iter()
        .map(|((a, b, axis), aperture)| {
            let d = (nodes[a].position[axis] - nodes[b].position[axis]).abs();
            GridFace { a, b, axis, aperture, distance: d.max(0.5 * h) }
        })
        .collect();
    let measure_total = measure.iter().sum();
    HornGrid {
        curve: *curve,
        dimension,
        length,
        resolution: h,
        nodes,
        faces,
        cells,
        measure_total,
        tail_measure,
        origin,
    }
}

/// Discrete `∫_{D \ D_cut} |u|²` over the cells beyond the axial cut.
pub fn tail_mass(grid: &HornGrid, field: &[f64], cut: f64) -> Result<f64> {
    check_field(grid, field)?;
    Ok(grid
        .cells
        .iter()
        .map(|c| grid.cell_measure_beyond(c, cut) * field[c.node].powi(2))
        .sum())
}

/// Mass-weighted discrete `L²(D)` norm.
pub fn l2_norm(grid: &HornGrid, field: &[f64]) -> Result<f64> {
    check_field(grid, field)?;
    Ok(grid.nodes.iter().zip(field).map(|(n, u)| n.measure * u * u).sum::<f64>().sqrt())
}

/// Discrete `L²` inner product.
pub fn l2_inner(grid: &HornGrid, u: &[f64], v: &[f64]) -> Result<f64> {
    check_field(grid, u)?;
    check_field(grid, v)?;
    Ok(grid.nodes.iter().zip(u.iter().zip(v)).map(|(n, (a, b))| n.measure * a * b).sum())
}

/// Flux-weighted gradient seminorm `(Σ_f (|f|/d_f)(u_a − u_b)²)^{1/2}`.
pub fn h1_seminorm(grid: &HornGrid, field: &[f64]) -> Result<f64> {
    check_field(grid, field)?;
    Ok(grid
        .faces
        .iter()
        .map(|f| f.geometric_transmissibility() * (field[f.a] - field[f.b]).powi(2))
        .sum::<f64>()
        .sqrt())
}

/// As [`h1_seminorm`], counting only faces with both nodes selected.
pub fn h1_seminorm_on(grid: &HornGrid, field: &[f64], selected: &[bool]) -> Result<f64> {
    check_field(grid, field)?;
    if selected.len() != grid.n_nodes() {
        return domain("selection mask has the wrong length");
    }
    Ok(grid
        .faces
        .iter()
        .filter(|f| selected[f.a] && selected[f.b])
        .map(|f| f.geometric_transmissibility() * (field[f.a] - field[f.b]).powi(2))
        .sum::<f64>()
        .sqrt())
}

pub(crate) fn check_field(grid: &HornGrid, field: &[f64]) -> Result<()> {
    if field.len() != grid.n_nodes() {
        return domain(format!("field has {} values, grid has {} nodes", field.len(), grid.n_nodes()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rectangle_disk_area_matches_cases() {
        let r = 1.0;
        assert_relative_eq!(rect_disk_area(-2.0, 2.0, -2.0, 2.0, r), std::f64::consts::PI, epsilon = 1e-12);
        assert_relative_eq!(rect_disk_area(0.0, 2.0, 0.0, 2.0, r), std::f64::consts::FRAC_PI_4, epsilon = 1e-12);
        assert_relative_eq!(rect_disk_area(-0.1, 0.1, -0.2, 0.3, r), 0.1, epsilon = 1e-12);
        assert_eq!(rect_disk_area(2.0, 3.0, 0.0, 1.0, r), 0.0);
        // Monte Carlo-free check: a strip |x| < 0.5 of the unit disk.
        let strip = 2.0 * (circle_primitive(0.5, 1.0) * 2.0);
        assert_relative_eq!(rect_disk_area(-0.5, 0.5, -1.0, 1.0, 1.0), strip, epsilon = 1e-12);
    }

    #[test]
    fn refusal_suggests_resolution() {
        let c = BoundaryCurve::gaussian();
        match build_grid(&c, 2, 4.0, 0.8) {
            Err(Error::Resolution { suggested, .. }) => assert_relative_eq!(suggested, 0.5),
            other => panic!("expected refusal, got {other:?}"),
        }
        assert!(build_grid(&BoundaryCurve::Exp { scale: 1.0, rate: 1.0 }, 2, 4.0, 0.1).is_err());
        assert!(build_grid(&c, 4, 4.0, 0.1).is_err());
    }

    #[test]
    fn gaussian_measure_2d() {
        let c = BoundaryCurve::gaussian();
        let g = build_grid(&c, 2, 4.0, 0.1).unwrap();
        let total = g.measure_total + g.tail_measure;
        assert_relative_eq!(total, std::f64::consts::PI.sqrt() / 2.0, epsilon = 1e-9);
        for n in &g.nodes {
            assert!(g.contains(&n.position[..2]), "{:?}", n.position);
        }
    }

    #[test]
    fn faces_have_positive_geometry() {
        for dim in [2, 3] {
            let g = build_grid(&BoundaryCurve::gaussian(), dim, 2.0, 0.25).unwrap();
            assert!(!g.faces.is_empty());
            for f in &g.faces {
                assert!(f.aperture > 0.0 && f.distance > 0.0);
                assert!(f.a < f.b);
            }
            for n in &g.nodes {
                assert!(g.contains(&n.position[..dim]), "{:?}", n.position);
            }
        }
    }

    #[test]
    fn constant_field_norms() {
        let g = build_grid(&BoundaryCurve::gaussian(), 2, 3.0, 0.1).unwrap();
        let u = vec![-2.0; g.n_nodes()];
        assert_relative_eq!(l2_norm(&g, &u).unwrap(), 2.0 * g.measure_total.sqrt(), max_relative = 1e-12);
        assert_eq!(h1_seminorm(&g, &u).unwrap(), 0.0);
        let t = tail_mass(&g, &vec![1.0; g.n_nodes()], 1.0).unwrap();
        let direct: f64 = g.cells.iter().map(|c| g.cell_measure_beyond(c, 1.0)).sum();
        assert_relative_eq!(t, direct, max_relative = 1e-12);
        assert_relative_eq!(t, c_integral(1.0, 3.0), max_relative = 1e-9);
        assert!(l2_norm(&g, &[1.0]).is_err());
    }

    fn c_integral(a: f64, b: f64) -> f64 {
        BoundaryCurve::gaussian().integral_pow(a, b, 1)
    }
}
