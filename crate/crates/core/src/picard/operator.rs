//! Discrete half-space Green operator on a [`SampleGrid`].
//!
//! For axially symmetric densities written as `f = G[delta_{e_N}]^p * g`, the
//! potential at grid point `x_i` divided by `G[delta_{e_N}](x_i)` is
//! `sum_j M_ij g_j` when `g` is interpolated bilinearly from its grid
//! values `g_j`. `M` has nonnegative entries. The `y`-integral runs over
//! cells in `(ln rho, t)` bounded by the grid shells and angles, with a power
//! substitution on the ball around `e_N`, dyadic grading toward the target
//! point and toward the boundary, and an exact (adaptive where needed)
//! integral over the transversal sphere.

use crate::kernels::Kernels;
#[cfg(test)]
use crate::quad::adaptive::{integrate, Tolerance};
use crate::quad::rules::GaussLegendre;
use crate::special::sphere_area;

use super::grid::{cos_span, SampleGrid};

/// Gauss order per cell direction.
pub const CELL_ORDER: usize = 6;
/// Dyadic levels of grading toward the target point.
pub const TARGET_LEVELS: usize = 10;

/// Quadrature resolution of the operator assembly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorOptions {
    pub cell_order: usize,
    pub target_levels: usize,
    /// Every cell away from the target is split `split x split`.
    pub split: usize,
}

impl Default for OperatorOptions {
    fn default() -> Self {
        OperatorOptions { cell_order: CELL_ORDER, target_levels: TARGET_LEVELS, split: 1 }
    }
}
/// Outer truncation of the `y`-integral in units of the outermost shell.
pub const OUTER_FACTOR: f64 = 64.0;

#[derive(Debug, Clone, Copy)]
enum RhoKind {
    /// `rho = top * u^(1/gamma)`, `u` in `[0, 1]`.
    Origin { top: f64, gamma: f64 },
    /// `rho = exp(s)`.
    Log,
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    kind: RhoKind,
    s0: f64,
    s1: f64,
    t0: f64,
    t1: f64,
}

/// A `y` node in the meridian half-plane.
#[derive(Debug, Clone, Copy)]
pub struct MeridianNode {
    pub rho: f64,
    pub t: f64,
    /// Distance to the symmetry axis.
    pub ys: f64,
    /// Height `y_N`.
    pub yn: f64,
    /// Volume element of the meridian half-plane times the cell Jacobian and
    /// Gauss weights; excludes the transversal sphere.
    pub weight: f64,
}

fn map_node(kind: RhoKind, s: f64, t: f64, w: f64, dim: usize) -> MeridianNode {
    let (rho, drho) = match kind {
        RhoKind::Log => {
            let r = s.exp();
            (r, r)
        }
        RhoKind::Origin { top, gamma } => {
            let r = top * s.powf(1.0 / gamma);
            (r, r / (gamma * s))
        }
    };
    let span = cos_span(rho);
    let cp = 1.0 - t * span;
    let sp = (1.0 - cp * cp).max(0.0).sqrt();
    // rho^(N-1) sin^(N-2) d theta d rho = rho^(N-1) sin^(N-3) span dt d rho
    let weight = w * drho * span * rho.powi(dim as i32 - 1) * sp.powi(dim as i32 - 3);
    MeridianNode { rho, t, ys: rho * sp, yn: 1.0 + rho * cp, weight }
}

fn push_rect(kind: RhoKind, s0: f64, s1: f64, t0: f64, t1: f64, gl: &GaussLegendre, dim: usize, out: &mut Vec<MeridianNode>) {
    for (s, ws) in gl.on(s0, s1) {
        for (t, wt) in gl.on(t0, t1) {
            out.push(map_node(kind, s, t, ws * wt, dim));
        }
    }
}

/// Quadtree toward the corner `(cs, ct)` of the cell.
fn push_graded(cell: &Cell, cs: f64, ct: f64, levels: usize, gl: &GaussLegendre, dim: usize, out: &mut Vec<MeridianNode>) {
    let (mut s0, mut s1, mut t0, mut t1) = (cell.s0, cell.s1, cell.t0, cell.t1);
    for _ in 0..levels {
        let sm = 0.5 * (s0 + s1);
        let tm = 0.5 * (t0 + t1);
        let near_s = if (cs - s0).abs() < (cs - s1).abs() { (s0, sm) } else { (sm, s1) };
        let near_t = if (ct - t0).abs() < (ct - t1).abs() { (t0, tm) } else { (tm, t1) };
        for sq in [(s0, sm), (sm, s1)] {
            for tq in [(t0, tm), (tm, t1)] {
                if sq != near_s || tq != near_t {
                    push_rect(cell.kind, sq.0, sq.1, tq.0, tq.1, gl, dim, out);
                }
            }
        }
        (s0, s1) = near_s;
        (t0, t1) = near_t;
    }
    push_rect(cell.kind, s0, s1, t0, t1, gl, dim, out);
}

fn push_subdivided(cell: &Cell, split: usize, gl: &GaussLegendre, dim: usize, out: &mut Vec<MeridianNode>) {
    let split = split.max(1);
    let hs = (cell.s1 - cell.s0) / split as f64;
    let ht = (cell.t1 - cell.t0) / split as f64;
    for a in 0..split {
        for b in 0..split {
            let s0 = cell.s0 + a as f64 * hs;
            let t0 = cell.t0 + b as f64 * ht;
            push_rect(cell.kind, s0, s0 + hs, t0, t0 + ht, gl, dim, out);
        }
    }
}

fn push_split(cell: &Cell, gl: &GaussLegendre, dim: usize, out: &mut Vec<MeridianNode>) {
    let sm = 0.5 * (cell.s0 + cell.s1);
    let tm = 0.5 * (cell.t0 + cell.t1);
    for sq in [(cell.s0, sm), (sm, cell.s1)] {
        for tq in [(cell.t0, tm), (tm, cell.t1)] {
            push_rect(cell.kind, sq.0, sq.1, tq.0, tq.1, gl, dim, out);
        }
    }
}

/// Cell decomposition of the meridian half-plane adapted to a grid.
struct CellLayout {
    rho_edges: Vec<f64>,
    t_edges: Vec<f64>,
    cells: Vec<Cell>,
}

impl CellLayout {
    fn new(grid: &SampleGrid, gamma: f64) -> Self {
        let shells = grid.shells();
        let r_min = shells[0];
        let r_max = shells[shells.len() - 1];
        let mut rho = vec![0.0, 0.5 * r_min];
        rho.extend_from_slice(shells);
        if r_min < 1.0 && r_max > 1.0 {
            // the angular span has a kink at rho = 1
            rho.push(1.0);
        }
        let mut r = r_max * 1.5;
        while r < OUTER_FACTOR * r_max {
            rho.push(r);
            r *= 1.5;
        }
        rho.push(OUTER_FACTOR * r_max);
        rho.sort_by(f64::total_cmp);
        rho.dedup();

        let angles = grid.angles();
        let last = angles[angles.len() - 1];
        let mut t = vec![0.0];
        t.extend_from_slice(angles);
        for k in (1..=3).rev() {
            t.push(1.0 - (1.0 - last) / 2f64.powi(k));
        }
        t.push(1.0);
        t.sort_by(f64::total_cmp);
        t.dedup();

        let mut cells = Vec::new();
        for a in 0..rho.len() - 1 {
            let (kind, s0, s1) = if a == 0 {
                (RhoKind::Origin { top: rho[1], gamma }, 0.0, 1.0)
            } else {
                (RhoKind::Log, rho[a].ln(), rho[a + 1].ln())
            };
            for b in 0..t.len() - 1 {
                cells.push(Cell { kind, s0, s1, t0: t[b], t1: t[b + 1] });
            }
        }
        CellLayout { rho_edges: rho, t_edges: t, cells }
    }

    fn n_t(&self) -> usize {
        self.t_edges.len() - 1
    }
}

/// Quadrature nodes for `int f(y) dy` over the half space with `f`
/// axially symmetric about the `e_N` axis and behaving like
/// `|y - e_N|^(gamma - N)` at `e_N`. Every cell is split `split x split`.
/// Weights include the transversal sphere.
pub fn axisymmetric_rule(grid: &SampleGrid, gamma: f64, split: usize) -> Vec<MeridianNode> {
    let dim = grid.dim();
    let layout = CellLayout::new(grid, gamma);
    let gl = GaussLegendre::new(CELL_ORDER);
    let ring = if dim == 2 { 2.0 } else { sphere_area(dim - 2) };
    let split = split.max(1);
    let mut out = Vec::new();
    for cell in &layout.cells {
        let hs = (cell.s1 - cell.s0) / split as f64;
        let ht = (cell.t1 - cell.t0) / split as f64;
        for a in 0..split {
            for b in 0..split {
                let s0 = cell.s0 + a as f64 * hs;
                let t0 = cell.t0 + b as f64 * ht;
                let (s1, t1) = if a + 1 == split { (cell.s1, t0 + ht) } else { (s0 + hs, t0 + ht) };
                let t1 = if b + 1 == split { cell.t1 } else { t1 };
                push_rect(cell.kind, s0, s1, t0, t1, &gl, dim, &mut out);
            }
        }
    }
    for node in &mut out {
        node.weight *= ring;
    }
    out
}

/// Transversal-sphere integral of the half-space kernel between a point at
/// `(xs, xn)` (distance to axis, height) and the ring `(ys, yn)`. In the
/// angle `psi` between the two meridian planes the integrand peaks at
/// `psi = 0` with width `~ 2 sqrt(base / b)`; peaked cases use Gauss panels
/// growing geometrically away from the peak.
struct RingIntegrator<'a> {
    kernels: &'a Kernels,
    dim: usize,
    /// Gauss rules `(psi, weight * sin^(N-3) psi * |S^(N-3)|)` on `[0, pi]`
    /// keyed by the smallest `base / b` they serve, largest first.
    smooth: Vec<(f64, Vec<(f64, f64)>)>,
    /// Reference Gauss rule on `[0, 1]`.
    panel: Vec<(f64, f64)>,
    factor: f64,
}

/// Gauss orders for smooth cases; each reaches ~1e-9 at its threshold.
const RING_SMOOTH_ORDERS: [(f64, usize); 4] = [(400.0, 4), (20.0, 6), (8.0, 8), (2.0, 12)];
/// `base / b` from which the periodic trapezoid rule is used in 3D.
const RING_TRAPEZOID_RATIO: f64 = 0.05;
/// `-ln` of the target relative error of the trapezoid rule.
const RING_DIGITS: f64 = 23.0;
const RING_PANEL_ORDER: usize = 10;
const RING_PANEL_GROWTH: f64 = 2.5;

impl<'a> RingIntegrator<'a> {
    fn new(kernels: &'a Kernels, dim: usize) -> Self {
        let factor = if dim >= 4 { sphere_area(dim - 3) } else { 2.0 };
        let smooth = RING_SMOOTH_ORDERS
            .iter()
            .map(|&(ratio, order)| {
                // the sin^(N-3) weight needs a few more nodes of its own
                let order = if dim >= 4 { order.max(10) } else { order };
                let rule = GaussLegendre::new(order)
                    .on(0.0, std::f64::consts::PI)
                    .map(|(p, w)| (p, w * factor * p.sin().powi(dim as i32 - 3)))
                    .collect();
                (ratio, rule)
            })
            .collect();
        let panel = GaussLegendre::new(RING_PANEL_ORDER).on(0.0, 1.0).collect();
        RingIntegrator { kernels, dim, smooth, panel, factor }
    }

    #[inline]
    fn g(&self, d2: f64, xn: f64, yn: f64) -> f64 {
        self.kernels.halfspace_green_fast(d2, xn, yn)
    }

    fn split(base: f64, b: f64) -> Option<(f64, f64)> {
        let base = base.max(0.0);
        if b <= 1e-14 * base {
            None
        } else {
            Some((base, b))
        }
    }

    fn eval(&self, xs: f64, xn: f64, ys: f64, yn: f64) -> f64 {
        let base = (xs - ys) * (xs - ys) + (xn - yn) * (xn - yn);
        let b = 4.0 * xs * ys;
        if self.dim == 2 {
            return self.g(base, xn, yn) + self.g(base + b, xn, yn);
        }
        let Some((base, b)) = Self::split(base, b) else {
            return sphere_area(self.dim - 2) * self.g(base, xn, yn);
        };
        let f = |psi: f64| {
            let h = (0.5 * psi).sin();
            self.g(base + b * h * h, xn, yn)
        };
        let ratio2 = base / b;
        // complex singularity of the integrand at Im psi = 2 asinh(sqrt(base / b))
        let reach = 2.0 * ratio2.sqrt().asinh();
        if self.dim == 3 && ratio2 >= RING_TRAPEZOID_RATIO {
            // even and 2 pi periodic: the trapezoid rule converges like exp(-n reach)
            let n = ((RING_DIGITS / reach).ceil() as usize).max(4).next_multiple_of(2);
            let h = 2.0 * std::f64::consts::PI / n as f64;
            let mut sum = 0.5 * (f(0.0) + f(std::f64::consts::PI));
            for j in 1..n / 2 {
                sum += f(h * j as f64);
            }
            return self.factor * h * sum;
        }
        if ratio2 >= RING_SMOOTH_ORDERS[RING_SMOOTH_ORDERS.len() - 1].0 {
            let rule = self.smooth.iter().find(|(min_ratio, _)| ratio2 >= *min_ratio).map(|r| &r.1).unwrap();
            return rule.iter().map(|&(p, w)| w * f(p)).sum();
        }
        let pi = std::f64::consts::PI;
        let m = self.dim as i32 - 3;
        let mut lo = 0.0;
        let mut hi = (2.0 * ratio2.sqrt()).min(pi);
        let mut total = 0.0;
        loop {
            let h = hi - lo;
            for &(u, w) in &self.panel {
                let psi = lo + h * u;
                let jac = if m == 0 { 1.0 } else { psi.sin().powi(m) };
                total += h * w * jac * f(psi);
            }
            if hi >= pi {
                break;
            }
            lo = hi;
            hi = (hi * RING_PANEL_GROWTH).min(pi);
            if pi - hi < 0.2 * (hi - lo) {
                hi = pi;
            }
        }
        self.factor * total
    }

    /// Adaptive reference value.
    #[cfg(test)]
    fn eval_adaptive(&self, xs: f64, xn: f64, ys: f64, yn: f64) -> f64 {
        let base = (xs - ys) * (xs - ys) + (xn - yn) * (xn - yn);
        let b = 4.0 * xs * ys;
        let m = self.dim as i32 - 3;
        let f = |psi: f64| {
            let h = (0.5 * psi).sin();
            self.factor * psi.sin().powi(m) * self.g(base + b * h * h, xn, yn)
        };
        let w = 2.0 * (base / b).sqrt();
        let mut pts = vec![0.0];
        pts.extend([w, 4.0 * w, 16.0 * w].into_iter().filter(|x| *x < std::f64::consts::PI));
        pts.push(std::f64::consts::PI);
        integrate(f, &pts, Tolerance { abs: 0.0, rel: 1e-12 }, 4000).value
    }
}

/// `M_ij` and the normalizing potential `G[delta_{e_N}]` at the grid points.
///
/// Inside the innermost shell the density ratio is modelled by the local
/// expansion `g(R, t) = g_c + (g(R_min, t) - g_c) (R / R_min)^gamma`,
/// `gamma = N - (N - 2 alpha) p`, where `g_c` is its value at `e_N`; `M` has
/// one extra column for `g_c`.
#[derive(Debug, Clone)]
pub struct HalfSpaceOperator {
    size: usize,
    /// Rows of width `size + 1`, the last entry multiplying `g_c`.
    matrix: Vec<f64>,
    gamma: f64,
    gdelta: Vec<f64>,
    p: f64,
}

impl HalfSpaceOperator {
    /// Builds `M` for the exponent `p` of the density `G[delta]^p g`.
    pub fn build(kernels: &Kernels, grid: &SampleGrid) -> Self {
        Self::build_with(kernels, grid, OperatorOptions::default())
    }

    pub fn build_with(kernels: &Kernels, grid: &SampleGrid, opts: OperatorOptions) -> Self {
        let params = kernels.params();
        let dim = grid.dim();
        let p = params.p();
        let gamma = dim as f64 + (2.0 * params.alpha() - dim as f64) * p;
        assert!(gamma > 0.0, "G[delta]^p must be locally integrable");
        let layout = CellLayout::new(grid, gamma);
        let gl = GaussLegendre::new(opts.cell_order);
        let ring = RingIntegrator::new(kernels, dim);
        let n = grid.len();
        let gdelta_at = |rho: f64, yn: f64| kernels.halfspace_green_fast(rho * rho, yn, 1.0);

        struct Prepared {
            ys: f64,
            yn: f64,
            w: f64,
            basis: [(usize, f64); 4],
            center: f64,
        }
        let prepare = |node: &MeridianNode| {
            let (basis, center) = grid.interp_weights_with_center(node.rho, node.t, gamma);
            Prepared { ys: node.ys, yn: node.yn, w: node.weight * gdelta_at(node.rho, node.yn).powf(p), basis, center }
        };
        let cached: Vec<Vec<Prepared>> = layout
            .cells
            .iter()
            .map(|c| {
                let mut nodes = Vec::new();
                push_subdivided(c, opts.split, &gl, dim, &mut nodes);
                nodes.iter().map(prepare).collect()
            })
            .collect();

        let gdelta: Vec<f64> = grid
            .points
            .iter()
            .map(|x| {
                let rho2 = x[..dim - 1].iter().map(|v| v * v).sum::<f64>() + (x[dim - 1] - 1.0).powi(2);
                kernels.halfspace_green_fast(rho2, x[dim - 1], 1.0)
            })
            .collect();

        let nt = layout.n_t();
        let width = n + 1;
        let mut matrix = vec![0.0; n * width];
        let mut special = Vec::new();
        for i in 0..n {
            let (r_i, t_i) = grid.polar(i);
            let x = &grid.points[i];
            let xs = x[0];
            let xn = x[dim - 1];
            let a_i = layout.rho_edges.iter().position(|&r| r == r_i).expect("shell is a cell edge");
            let b_i = layout.t_edges.iter().position(|&t| t == t_i).expect("angle is a cell edge");
            let row = &mut matrix[i * width..(i + 1) * width];
            let scale = 1.0 / gdelta[i];
            let add = |pnode: &Prepared, row: &mut [f64]| {
                let v = ring.eval(xs, xn, pnode.ys, pnode.yn) * pnode.w * scale;
                for &(j, bw) in &pnode.basis {
                    row[j] += v * bw;
                }
                row[n] += v * pnode.center;
            };
            for (c_idx, cell) in layout.cells.iter().enumerate() {
                let (a, b) = (c_idx / nt, c_idx % nt);
                let da = a as isize - a_i as isize;
                let db = b as isize - b_i as isize;
                let adjacent = (da == -1 || da == 0) && (db == -1 || db == 0);
                let nearby = (-2..=1).contains(&da) && (-2..=1).contains(&db);
                if !nearby {
                    for pnode in &cached[c_idx] {
                        add(pnode, row);
                    }
                    continue;
                }
                special.clear();
                if adjacent {
                    push_graded(cell, r_i.ln(), t_i, opts.target_levels, &gl, dim, &mut special);
                } else {
                    push_split(cell, &gl, dim, &mut special);
                }
                for node in &special {
                    add(&prepare(node), row);
                }
            }
        }
        HalfSpaceOperator { size: n, matrix, gamma, gdelta, p }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `G[delta_{e_N}]` at the grid points.
    pub fn gdelta(&self) -> &[f64] {
        &self.gdelta
    }

    /// Exponent of the local expansion at `e_N`.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Entry `j` of row `i`; `j == size` is the `e_N` column.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * (self.size + 1) + j]
    }

    /// `out = M (g, g_c)`, summed in index order.
    pub fn apply(&self, g: &[f64], center: f64, out: &mut [f64]) {
        let w = self.size + 1;
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.matrix[i * w..(i + 1) * w];
            *o = row[..self.size].iter().zip(g).map(|(m, v)| m * v).sum::<f64>() + row[self.size] * center;
        }
    }

    /// `M 1`: the discrete ratio `G[G[delta]^p] / G[delta]` at the grid points.
    pub fn row_sums(&self) -> Vec<f64> {
        let ones = vec![1.0; self.size];
        let mut out = vec![0.0; self.size];
        self.apply(&ones, 1.0, &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{DomainKind, ProblemParams};

    #[test]
    fn ring_rule_matches_adaptive() {
        for (dim, alpha) in [(3, 0.5), (4, 0.7), (3, 0.3)] {
            let params = ProblemParams::new(dim, alpha, 1.4, DomainKind::HalfSpace).unwrap();
            let kernels = Kernels::with_defaults(params);
            let ring = RingIntegrator::new(&kernels, dim);
            for &(xs, xn, ys, yn) in &[
                (0.5, 1.2, 0.5001, 1.2002),
                (0.5, 1.2, 0.52, 1.19),
                (2.0, 0.3, 2.2, 0.35),
                (3.0, 0.01, 2.9, 0.02),
                (0.1, 1.0, 1.0, 2.0),
                (10.0, 5.0, 1e-3, 1.0),
                (1.0, 1.0, 1.3, 1.0),
                (1.0, 1.0, 1.0, 3.0),
                (1.0, 1.0, 1.0, 1.5),
                (0.2, 0.5, 0.25, 0.6),
            ] {
                let got = ring.eval(xs, xn, ys, yn);
                let want = ring.eval_adaptive(xs, xn, ys, yn);
                assert!((got - want).abs() <= 1e-8 * want.abs(), "N={dim} ({xs},{xn},{ys},{yn}): {got} vs {want}");
            }
        }
    }

    #[test]
    fn rule_integrates_gaussian_and_singular_mass() {
        let grid = SampleGrid::standard(3, 0).unwrap();
        // int exp(-|y - e_N|^2) over the half space near e_N is nearly pi^(3/2)
        // minus the part below the boundary: pi^(3/2) (1 + erf(1)) / 2
        let rule = axisymmetric_rule(&grid, 3.0, 1);
        let got: f64 = rule.iter().map(|n| n.weight * (-n.rho * n.rho).exp()).sum();
        let want = std::f64::consts::PI.powf(1.5) * 0.5 * (1.0 + 0.842_700_792_949_714_9);
        assert!((got - want).abs() < 1e-7 * want, "{got} vs {want}");
        // |y - e_N|^(-2.5) on the unit ball around e_N: 4 pi / 0.5
        let rule = axisymmetric_rule(&grid, 0.5, 1);
        let got: f64 = rule.iter().filter(|n| n.rho < 1.0).map(|n| n.weight * n.rho.powf(-2.5)).sum();
        assert!((got - 8.0 * std::f64::consts::PI).abs() < 1e-9 * got, "{got}");
    }
}
