//! Nyström discretization of the single-layer formulation of the mixed
//! Helmholtz problem.
//!
//! The unknown is a density ψ on the whole boundary with u = S[ψ]. Rows on
//! Dirichlet nodes impose S[ψ] = f, rows on Neumann nodes impose the interior
//! normal trace (−½ + K*)[ψ] = g. Logarithmic kernel singularities are split
//! off and integrated with Kress product weights on one periodic parameter
//! that runs around the whole boundary; each Dirichlet/Neumann segment is
//! mapped through a sigmoid that clusters nodes at its junctions.

use crate::geometry::{BoundaryKind, Partition, Point};
use crate::specfun::{cyl, Cyl, EULER_GAMMA};
use faer::prelude::*;
use faer::{c64, linalg::solvers::PartialPivLu, Mat};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::sync::OnceLock;
use thiserror::Error;

const TWO_PI: f64 = 2.0 * PI;

/// Wavenumber of the reference operator used to normalize singular values.
pub const REFERENCE_K: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Normalized σ_min below which a solve is refused.
pub const SINGULAR_THRESHOLD: f64 = 1e-6;

/// Evaluation points must be this many local node spacings from the boundary.
pub const DISTANCE_FLOOR_SPACINGS: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BieError {
    #[error("nodes_per_arc must be at least 8, got {0}")]
    TooFewNodes(usize),
    #[error("grading order must be at least 2, got {0}")]
    Grading(u32),
    #[error("wavenumber must be nonzero")]
    ZeroWavenumber,
    #[error("source and target coincide")]
    Coincident,
    #[error("operator is numerically singular (normalized sigma_min = {sigma_min:e})")]
    NearSingular { sigma_min: f64 },
    #[error("point ({x}, {y}) lies outside the domain")]
    Outside { x: f64, y: f64 },
    #[error("point at distance {distance:e} from the boundary is inside the floor {floor:e}")]
    TooClose { distance: f64, floor: f64 },
    #[error("vector length {got} does not match node count {want}")]
    Length { got: usize, want: usize },
    #[error("linear algebra failure: {0}")]
    Linalg(String),
}

/// Γ(x, y) = −(i/4) H0(k|x − y|), the radiating solution of (Δ + k²)Γ = δ.
pub fn fundamental_solution(k: Complex64, x: Point, y: Point) -> Result<Complex64, BieError> {
    let r = dist(x, y);
    if r == 0.0 {
        return Err(BieError::Coincident);
    }
    let c = cyl(k * r).map_err(|_| BieError::ZeroWavenumber)?;
    Ok(gamma_from(&c))
}

/// ∂Γ(x, y)/∂ν_x = (ik/4) H1(k|x − y|) ν_x·(x − y)/|x − y|.
pub fn kernel_normal_derivative(k: Complex64, x: Point, nu_x: Point, y: Point) -> Result<Complex64, BieError> {
    let r = dist(x, y);
    if r == 0.0 {
        return Err(BieError::Coincident);
    }
    let c = cyl(k * r).map_err(|_| BieError::ZeroWavenumber)?;
    let dotn = nu_x[0] * (x[0] - y[0]) + nu_x[1] * (x[1] - y[1]);
    Ok(dgamma_from(&c, k, dotn / r))
}

fn gamma_from(c: &Cyl) -> Complex64 {
    Complex64::new(0.0, -0.25) * c.h0()
}

fn dgamma_from(c: &Cyl, k: Complex64, cos_angle: f64) -> Complex64 {
    Complex64::new(0.0, 0.25) * k * c.h1() * cos_angle
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshOptions {
    pub nodes_per_arc: usize,
    /// order p of the junction sigmoid; nodes approach a junction like u^p
    pub grading_order: u32,
}

impl Default for MeshOptions {
    fn default() -> Self {
        MeshOptions {
            nodes_per_arc: 64,
            grading_order: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshNode {
    /// index on the global periodic grid, s = offset + grid·h
    pub grid: usize,
    pub s: f64,
    pub tau: f64,
    pub point: Point,
    pub normal: Point,
    /// |dx/ds|
    pub speed: f64,
    pub curvature: f64,
    /// arclength quadrature weight h·speed
    pub weight: f64,
    pub kind: BoundaryKind,
    pub segment: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshSegment {
    pub kind: BoundaryKind,
    pub t_start: f64,
    pub t_end: f64,
    pub first_grid: usize,
    pub count: usize,
    pub graded: bool,
}

/// Quadrature nodes for a partition, stored Dirichlet nodes first.
#[derive(Debug)]
pub struct Mesh {
    partition: Partition,
    options: MeshOptions,
    nodes: Vec<MeshNode>,
    segments: Vec<MeshSegment>,
    n_dirichlet: usize,
    h: f64,
    offset: f64,
    /// Kress weights R and log(4 sin²(·/2)) indexed by grid difference
    kress: Vec<f64>,
    logs: Vec<f64>,
    reference: OnceLock<PartialPivLu<c64>>,
}

/// Kress sigmoid g(u) on [0, 1] and its derivative.
pub fn grading(u: f64, p: u32) -> (f64, f64) {
    let pf = p as f64;
    let a = 1.0 / pf - 0.5;
    let v = a * (1.0 - 2.0 * u).powi(3) + (2.0 * u - 1.0) / pf + 0.5;
    let dv = -6.0 * a * (1.0 - 2.0 * u).powi(2) + 2.0 / pf;
    let w = 1.0 - v;
    let vp = v.powi(p as i32);
    let wp = w.powi(p as i32);
    let den = vp + wp;
    let g = vp / den;
    let dg = pf * v.powi(p as i32 - 1) * w.powi(p as i32 - 1) / (den * den) * dv;
    (g, dg)
}

pub fn build_mesh(partition: &Partition, nodes_per_arc: usize) -> Result<Mesh, BieError> {
    build_mesh_with(
        partition,
        MeshOptions {
            nodes_per_arc,
            ..MeshOptions::default()
        },
    )
}

/// Node counts per segment: pure partitions use nodes_per_arc (rounded up to
/// even); otherwise segment i gets max(nodes_per_arc/2, round(nodes_per_arc·m·ℓ_i/L))
/// for m segments, with the last count bumped to make the total even.
fn segment_counts(lengths: &[f64], nodes_per_arc: usize) -> Vec<usize> {
    let total: f64 = lengths.iter().sum();
    if lengths.len() == 1 {
        return vec![nodes_per_arc + nodes_per_arc % 2];
    }
    let budget = (nodes_per_arc * lengths.len()) as f64;
    let mut c: Vec<usize> = lengths
        .iter()
        .map(|l| ((budget * l / total).round() as usize).max(nodes_per_arc / 2))
        .collect();
    let sum: usize = c.iter().sum();
    *c.last_mut().unwrap() += sum % 2;
    c
}

pub fn build_mesh_with(partition: &Partition, options: MeshOptions) -> Result<Mesh, BieError> {
    if options.nodes_per_arc < 8 {
        return Err(BieError::TooFewNodes(options.nodes_per_arc));
    }
    if options.grading_order < 2 {
        return Err(BieError::Grading(options.grading_order));
    }
    let curve = partition.curve();
    let segs = partition.segments();
    let lengths: Vec<f64> = segs.iter().map(|s| s.end_s - s.start_s).collect();
    let counts = segment_counts(&lengths, options.nodes_per_arc);
    let pure = segs.len() == 1;

    // parameter intervals, contiguous and monotone over one turn
    let mut bounds = Vec::with_capacity(segs.len() + 1);
    if pure {
        bounds.push(0.0);
        bounds.push(TWO_PI);
    } else {
        let t0 = curve.param_at(segs[0].start_s);
        bounds.push(t0);
        for s in &segs[1..] {
            let mut t = curve.param_at(s.start_s);
            while t <= *bounds.last().unwrap() {
                t += TWO_PI;
            }
            bounds.push(t);
        }
        bounds.push(t0 + TWO_PI);
    }

    let specs: Vec<MeshSegment> = segs
        .iter()
        .enumerate()
        .scan(0, |grid, (i, seg)| {
            let first = *grid;
            *grid += counts[i];
            Some(MeshSegment {
                kind: seg.kind,
                t_start: bounds[i],
                t_end: bounds[i + 1],
                first_grid: first,
                count: counts[i],
                graded: !pure,
            })
        })
        .collect();
    Ok(construct(partition, options, specs))
}

/// Places the nodes of each segment on the global grid and tabulates the
/// Kress weights.
fn construct(partition: &Partition, options: MeshOptions, segments: Vec<MeshSegment>) -> Mesh {
    let curve = partition.curve();
    let n: usize = segments.iter().map(|s| s.count).sum();
    let h = TWO_PI / n as f64;
    let pure = segments.len() == 1;
    let offset = if pure { 0.0 } else { 0.5 * h };
    let mut all = Vec::with_capacity(n);
    for (i, seg) in segments.iter().enumerate() {
        let c = seg.count;
        for j in 0..c {
            let grid = seg.first_grid + j;
            let (tau, dtau) = if pure {
                (j as f64 * h, 1.0)
            } else {
                let u = (j as f64 + 0.5) / c as f64;
                let (g, dg) = grading(u, options.grading_order);
                let span = seg.t_end - seg.t_start;
                (seg.t_start + span * g, span * dg / (h * c as f64))
            };
            let speed = curve.speed(tau) * dtau;
            all.push(MeshNode {
                grid,
                s: offset + grid as f64 * h,
                tau,
                point: curve.point(tau),
                normal: curve.outward_normal(tau),
                speed,
                curvature: curve.curvature(tau),
                weight: h * speed,
                kind: seg.kind,
                segment: i,
            });
        }
    }
    let mut nodes: Vec<MeshNode> = all.iter().filter(|p| p.kind == BoundaryKind::Dirichlet).cloned().collect();
    let n_dirichlet = nodes.len();
    nodes.extend(all.into_iter().filter(|p| p.kind == BoundaryKind::Neumann));

    let half = n / 2;
    let kress = (0..n)
        .map(|d| {
            let t = d as f64 * h;
            let s: f64 = (1..half).map(|m| (m as f64 * t).cos() / m as f64).sum();
            -TWO_PI / half as f64 * s - PI / (half * half) as f64 * (half as f64 * t).cos()
        })
        .collect();
    let logs = (0..n)
        .map(|d| {
            if d == 0 {
                0.0
            } else {
                (4.0 * (0.5 * d as f64 * h).sin().powi(2)).ln()
            }
        })
        .collect();

    Mesh {
        partition: partition.clone(),
        options,
        nodes,
        segments,
        n_dirichlet,
        h,
        offset,
        kress,
        logs,
        reference: OnceLock::new(),
    }
}

impl Mesh {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[MeshNode] {
        &self.nodes
    }

    pub fn segments(&self) -> &[MeshSegment] {
        &self.segments
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn options(&self) -> MeshOptions {
        self.options
    }

    pub fn n_dirichlet(&self) -> usize {
        self.n_dirichlet
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Same partition and grading with `factor` times as many nodes per segment.
    pub fn refined(&self, factor: usize) -> Mesh {
        let specs = self
            .segments
            .iter()
            .map(|seg| MeshSegment {
                first_grid: seg.first_grid * factor,
                count: seg.count * factor,
                ..seg.clone()
            })
            .collect();
        let options = MeshOptions {
            nodes_per_arc: self.options.nodes_per_arc * factor,
            ..self.options
        };
        construct(&self.partition, options, specs)
    }

    /// The same nodes with every node treated as Dirichlet. Used to compare
    /// operators of different partitions on identical quadrature.
    pub fn relabeled_dirichlet(&self) -> Mesh {
        let mut nodes = self.nodes.clone();
        for node in &mut nodes {
            node.kind = BoundaryKind::Dirichlet;
        }
        let segments = self
            .segments
            .iter()
            .map(|seg| MeshSegment {
                kind: BoundaryKind::Dirichlet,
                ..seg.clone()
            })
            .collect();
        Mesh {
            partition: Partition::pure_dirichlet(self.partition.curve().clone()),
            options: self.options,
            nodes,
            segments,
            n_dirichlet: self.nodes.len(),
            h: self.h,
            offset: self.offset,
            kress: self.kress.clone(),
            logs: self.logs.clone(),
            reference: OnceLock::new(),
        }
    }

    /// Node indices in boundary order (increasing grid index).
    pub fn boundary_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by_key(|&i| self.nodes[i].grid);
        idx
    }

    /// Distance from p to the boundary and the local node spacing there.
    pub fn distance_and_spacing(&self, p: Point) -> (f64, f64) {
        let curve = self.partition.curve();
        let (d, t) = curve.distance_to_boundary(p);
        let q = curve.point(t);
        // spacing of the two nodes nearest to the closest boundary point
        let mut best = [(f64::INFINITY, 0.0); 2];
        for node in &self.nodes {
            let e = dist(node.point, q);
            if e < best[0].0 {
                best[1] = best[0];
                best[0] = (e, node.weight);
            } else if e < best[1].0 {
                best[1] = (e, node.weight);
            }
        }
        (d, best[0].1.max(best[1].1))
    }

    /// Checks that p is inside and far enough from the boundary for the
    /// trapezoidal potential evaluation.
    pub fn check_interior(&self, p: Point) -> Result<(), BieError> {
        if !self.partition.curve().contains(p) {
            return Err(BieError::Outside { x: p[0], y: p[1] });
        }
        let (d, spacing) = self.distance_and_spacing(p);
        let floor = DISTANCE_FLOOR_SPACINGS * spacing;
        if d < floor {
            return Err(BieError::TooClose { distance: d, floor });
        }
        Ok(())
    }

    fn reference_lu(&self) -> &PartialPivLu<c64> {
        self.reference.get_or_init(|| assemble(REFERENCE_K, self).matrix.partial_piv_lu())
    }
}

/// Row type selector for assembly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Rows {
    /// S on Dirichlet nodes and −½ + K* on Neumann nodes
    Mixed,
    /// S on every node
    Value,
    /// −½ + K* on every node
    Normal,
}

/// Dense discretization of the mixed operator at one wavenumber, acting on
/// weighted unknowns W^{1/2}ψ (row-scaled by W^{1/2}).
#[derive(Debug, Clone)]
pub struct BlockOperator<'m> {
    pub k: Complex64,
    pub matrix: Mat<c64>,
    mesh: &'m Mesh,
}

impl<'m> BlockOperator<'m> {
    pub fn mesh(&self) -> &'m Mesh {
        self.mesh
    }

    pub fn n_dirichlet(&self) -> usize {
        self.mesh.n_dirichlet
    }

    /// Singular values of A(i)⁻¹A(k), descending. The reference factor is
    /// cached on the mesh.
    pub fn normalized_singular_values(&self) -> Result<Vec<f64>, BieError> {
        let lu = self.mesh.reference_lu();
        let m = lu.solve(&self.matrix);
        m.singular_values().map_err(|e| BieError::Linalg(format!("{e:?}")))
    }

    /// Smallest normalized singular value, capped at 1. The normalized
    /// operator is identity plus compact, so values above 1 only come from
    /// the discretized tail converging to 1.
    pub fn sigma_min(&self) -> Result<f64, BieError> {
        Ok(self.normalized_singular_values()?.last().unwrap().min(1.0))
    }
}

pub fn assemble(k: Complex64, mesh: &Mesh) -> BlockOperator<'_> {
    BlockOperator {
        k,
        matrix: assemble_rows(k, mesh, Rows::Mixed),
        mesh,
    }
}

/// −½ + K* on every node, scaled like [`assemble`].
pub fn assemble_normal_trace(k: Complex64, mesh: &Mesh) -> Mat<c64> {
    assemble_rows(k, mesh, Rows::Normal)
}

/// S on every node, scaled like [`assemble`].
pub fn assemble_value_trace(k: Complex64, mesh: &Mesh) -> Mat<c64> {
    assemble_rows(k, mesh, Rows::Value)
}

fn assemble_rows(k: Complex64, mesh: &Mesh, rows: Rows) -> Mat<c64> {
    assert!(k != Complex64::new(0.0, 0.0), "wavenumber must be nonzero");
    let n = mesh.len();
    let nodes = &mesh.nodes;
    let h = mesh.h;
    let i_unit = Complex64::i();
    // cylinder functions for the upper triangle, shared by both orientations
    let upper: Vec<Vec<Cyl>> = (0..n)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..n)
                .map(|j| cyl(k * dist(nodes[i].point, nodes[j].point)).expect("distinct nodes"))
                .collect()
        })
        .collect();
    let pair = |i: usize, j: usize| -> &Cyl {
        if i < j {
            &upper[i][j - i - 1]
        } else {
            &upper[j][i - j - 1]
        }
    };
    let diag_m2 = |speed: f64| Complex64::new(EULER_GAMMA / TWO_PI, -0.25) + (k * speed / 2.0).ln() / TWO_PI;
    let row_values: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let ni = &nodes[i];
            let normal_row = match rows {
                Rows::Mixed => ni.kind == BoundaryKind::Neumann,
                Rows::Value => false,
                Rows::Normal => true,
            };
            let sw_i = ni.weight.sqrt();
            (0..n)
                .map(|j| {
                    let nj = &nodes[j];
                    let d = (ni.grid + n - nj.grid) % n;
                    let rw = mesh.kress[d];
                    let lg = mesh.logs[d];
                    let a = if i == j {
                        if normal_row {
                            Complex64::new(h * ni.curvature / (4.0 * PI) * ni.speed - 0.5, 0.0)
                        } else {
                            (rw / (4.0 * PI) + h * diag_m2(ni.speed)) * ni.speed
                        }
                    } else {
                        let c = pair(i, j);
                        let dx = [ni.point[0] - nj.point[0], ni.point[1] - nj.point[1]];
                        let r = dx[0].hypot(dx[1]);
                        if normal_row {
                            let cosang = (ni.normal[0] * dx[0] + ni.normal[1] * dx[1]) / r;
                            let kk = i_unit * 0.25 * k * c.h1() * cosang;
                            let l1 = -k / (4.0 * PI) * c.j1 * cosang;
                            let l2 = kk - l1 * lg;
                            (rw * l1 + h * l2) * nj.speed
                        } else {
                            let gam = gamma_from(c);
                            let m1 = c.j0 / (4.0 * PI);
                            let m2 = gam - m1 * lg;
                            (rw * m1 + h * m2) * nj.speed
                        }
                    };
                    a * (sw_i / nj.weight.sqrt())
                })
                .collect()
        })
        .collect();
    Mat::from_fn(n, n, |i, j| row_values[i][j])
}

/// Boundary density: raw samples of ψ and the weighted unknowns W^{1/2}ψ.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    pub raw: Vec<Complex64>,
    pub weighted: Vec<Complex64>,
    /// relative residual of the linear solve
    pub residual: f64,
}

impl Density {
    pub fn zeros(n: usize) -> Density {
        Density {
            raw: vec![Complex64::new(0.0, 0.0); n],
            weighted: vec![Complex64::new(0.0, 0.0); n],
            residual: 0.0,
        }
    }

    pub fn from_weighted(mesh: &Mesh, weighted: Vec<Complex64>) -> Density {
        let raw = weighted.iter().zip(mesh.nodes()).map(|(v, p)| v / p.weight.sqrt()).collect();
        Density {
            raw,
            weighted,
            residual: 0.0,
        }
    }

    pub fn from_raw(mesh: &Mesh, raw: Vec<Complex64>) -> Density {
        let weighted = raw.iter().zip(mesh.nodes()).map(|(v, p)| v * p.weight.sqrt()).collect();
        Density {
            raw,
            weighted,
            residual: 0.0,
        }
    }

    /// Trigonometric interpolation of the density onto another mesh of the
    /// same partition (the periodic quantity interpolated is ψ·|dx/ds|).
    pub fn interpolate(&self, from: &Mesh, to: &Mesh) -> Density {
        let n = from.len();
        let order = from.boundary_order();
        let f: Vec<Complex64> = order.iter().map(|&i| self.raw[i] * from.nodes[i].speed).collect();
        let s: Vec<f64> = order.iter().map(|&i| from.nodes[i].s).collect();
        let half = n / 2;
        // coefficients for m = -half..=half, Nyquist split evenly
        let coef: Vec<(i64, Complex64)> = (-(half as i64)..=(half as i64))
            .map(|m| {
                let mut c = Complex64::new(0.0, 0.0);
                for (v, &sg) in f.iter().zip(&s) {
                    c += v * Complex64::from_polar(1.0, -(m as f64) * sg);
                }
                let scale = if m.unsigned_abs() as usize == half { 0.5 } else { 1.0 };
                (m, c * scale / n as f64)
            })
            .collect();
        let raw = to
            .nodes
            .par_iter()
            .map(|p| {
                let mut v = Complex64::new(0.0, 0.0);
                for (m, c) in &coef {
                    v += c * Complex64::from_polar(1.0, *m as f64 * p.s);
                }
                v / p.speed
            })
            .collect();
        Density::from_raw(to, raw)
    }
}

/// Solves A v = W^{1/2} rhs by partial-pivoting LU; rhs is raw boundary data.
pub fn solve(op: &BlockOperator, rhs: &[Complex64]) -> Result<Density, BieError> {
    solve_with_threshold(op, rhs, SINGULAR_THRESHOLD)
}

pub fn solve_with_threshold(op: &BlockOperator, rhs: &[Complex64], threshold: f64) -> Result<Density, BieError> {
    let mesh = op.mesh;
    let n = mesh.len();
    if rhs.len() != n {
        return Err(BieError::Length { got: rhs.len(), want: n });
    }
    let sigma_min = op.sigma_min()?;
    if sigma_min < threshold {
        return Err(BieError::NearSingular { sigma_min });
    }
    let b = Mat::from_fn(n, 1, |i, _| rhs[i] * mesh.nodes[i].weight.sqrt());
    let lu = op.matrix.partial_piv_lu();
    let x = lu.solve(&b);
    let r = &op.matrix * &x - &b;
    let bn = b.norm_l2();
    let residual = if bn > 0.0 { r.norm_l2() / bn } else { r.norm_l2() };
    let mut d = Density::from_weighted(mesh, (0..n).map(|i| x[(i, 0)]).collect());
    d.residual = residual;
    Ok(d)
}

/// S[ψ](x) at an interior point.
pub fn eval_single_layer(density: &Density, mesh: &Mesh, k: Complex64, x: Point) -> Result<Complex64, BieError> {
    mesh.check_interior(x)?;
    Ok(single_layer_unchecked(density, mesh, k, x))
}

/// S[ψ](x) without the distance check.
pub fn single_layer_unchecked(density: &Density, mesh: &Mesh, k: Complex64, x: Point) -> Complex64 {
    let mut s = Complex64::new(0.0, 0.0);
    for (p, psi) in mesh.nodes.iter().zip(&density.raw) {
        let r = dist(x, p.point);
        let c = cyl(k * r).expect("point off the boundary");
        s += gamma_from(&c) * psi * p.weight;
    }
    s
}

/// ∇S[ψ](x) at an interior point.
pub fn single_layer_gradient(density: &Density, mesh: &Mesh, k: Complex64, x: Point) -> [Complex64; 2] {
    let mut g = [Complex64::new(0.0, 0.0); 2];
    for (p, psi) in mesh.nodes.iter().zip(&density.raw) {
        let d = [x[0] - p.point[0], x[1] - p.point[1]];
        let r = d[0].hypot(d[1]);
        let c = cyl(k * r).expect("point off the boundary");
        // ∇_x Γ = (ik/4) H1(kr) (x − y)/r
        let f = Complex64::new(0.0, 0.25) * k * c.h1() / r * psi * p.weight;
        g[0] += f * d[0];
        g[1] += f * d[1];
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Interior,
    Exterior,
}

/// Normal derivative of S[ψ] on the boundary nodes, (∓½ + K*)ψ.
pub fn eval_trace_dn(density: &Density, mesh: &Mesh, k: Complex64, side: Side) -> Vec<Complex64> {
    let m = assemble_normal_trace(k, mesh);
    let n = mesh.len();
    let v = Mat::from_fn(n, 1, |i, _| density.weighted[i]);
    let out = &m * &v;
    (0..n)
        .map(|i| {
            let mut t = out[(i, 0)] / mesh.nodes[i].weight.sqrt();
            if side == Side::Exterior {
                t += density.raw[i];
            }
            t
        })
        .collect()
}

/// Boundary values of S[ψ] on the nodes (continuous across the boundary).
pub fn eval_trace_value(density: &Density, mesh: &Mesh, k: Complex64) -> Vec<Complex64> {
    let m = assemble_value_trace(k, mesh);
    let n = mesh.len();
    let v = Mat::from_fn(n, 1, |i, _| density.weighted[i]);
    let out = &m * &v;
    (0..n).map(|i| out[(i, 0)] / mesh.nodes[i].weight.sqrt()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_disk, make_kite, Partition};

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn disk_dirichlet() -> Partition {
        Partition::pure_dirichlet(make_disk(1.0).unwrap())
    }

    #[test]
    fn fundamental_solution_basics() {
        let k = c(1.0);
        let a = [0.1, 0.2];
        let b = [-0.4, 0.7];
        assert_eq!(fundamental_solution(k, a, b).unwrap(), fundamental_solution(k, b, a).unwrap());
        let v = fundamental_solution(k, [0.0, 0.0], [1.0, 0.0]).unwrap();
        let h = crate::specfun::hankel1(0, c(1.0)).unwrap();
        assert!((v - Complex64::new(0.0, -0.25) * h).norm() < 1e-15);
        assert!(fundamental_solution(k, a, a).is_err());
    }

    #[test]
    fn fundamental_solution_is_helmholtz() {
        let k = c(2.0);
        let y = [0.0, 0.0];
        let x = [0.5, 0.0];
        let h = 1e-3;
        let f = |p: Point| fundamental_solution(k, p, y).unwrap();
        let lap = (f([x[0] + h, x[1]]) + f([x[0] - h, x[1]]) + f([x[0], x[1] + h]) + f([x[0], x[1] - h]) - 4.0 * f(x)) / (h * h);
        let res = lap + k * k * f(x);
        assert!(res.norm() < 10.0 * h * h, "{res}");
    }

    #[test]
    fn normal_derivative_kernel() {
        let k = c(1.5);
        let x = [0.3, 0.1];
        let y = [0.3, 0.4];
        assert!(kernel_normal_derivative(k, x, [1.0, 0.0], y).unwrap().norm() < 1e-16);
        let nu = [0.6, 0.8];
        let x = [0.1, -0.2];
        let y = [0.1 - 0.3 * 0.8, -0.2 + 0.3 * 0.6];
        let h = 1e-6;
        let fd = (fundamental_solution(k, [x[0] + h * nu[0], x[1] + h * nu[1]], y).unwrap()
            - fundamental_solution(k, [x[0] - h * nu[0], x[1] - h * nu[1]], y).unwrap())
            / (2.0 * h);
        let nu2 = [0.28, 0.96];
        let fd2 = (fundamental_solution(k, [x[0] + h * nu2[0], x[1] + h * nu2[1]], y).unwrap()
            - fundamental_solution(k, [x[0] - h * nu2[0], x[1] - h * nu2[1]], y).unwrap())
            / (2.0 * h);
        assert!((kernel_normal_derivative(k, x, nu, y).unwrap() - fd).norm() < 1e-6);
        assert!((kernel_normal_derivative(k, x, nu2, y).unwrap() - fd2).norm() < 1e-6);
    }

    #[test]
    fn kernel_diagonal_limit_on_disk() {
        // along the unit circle the kernel tends to κ/(4π) = 1/(4π)
        let k = c(1.0);
        let mut prev = f64::INFINITY;
        for e in [1e-1f64, 1e-2, 1e-3, 1e-4] {
            let x = [1.0, 0.0];
            let y = [e.cos(), e.sin()];
            let v = kernel_normal_derivative(k, x, [1.0, 0.0], y).unwrap();
            let err = (v.re - 1.0 / (4.0 * PI)).abs();
            assert!(err < prev);
            prev = err;
        }
        assert!(prev < 1e-8);
    }

    #[test]
    fn pure_mesh_is_uniform() {
        let m = build_mesh(&disk_dirichlet(), 64).unwrap();
        assert_eq!(m.len(), 64);
        for (j, p) in m.nodes().iter().enumerate() {
            assert!((p.tau - TWO_PI * j as f64 / 64.0).abs() < 1e-14);
        }
        assert!(build_mesh(&disk_dirichlet(), 4).is_err());
    }

    #[test]
    fn graded_junction_offset() {
        let part = disk_dirichlet().nucleate(PI / 2.0, 0.4).unwrap();
        let curve = part.curve().clone();
        let offset = |n: usize| {
            let m = build_mesh(&part, n).unwrap();
            let seg = m.segments().iter().find(|s| s.kind == BoundaryKind::Neumann).unwrap().clone();
            let first = m
                .nodes()
                .iter()
                .filter(|p| p.kind == BoundaryKind::Neumann)
                .map(|p| p.tau)
                .fold(f64::INFINITY, f64::min);
            (curve.arclength_at(first) - curve.arclength_at(seg.t_start), seg.count)
        };
        let (a, ca) = offset(64);
        let (b, cb) = offset(128);
        assert_eq!(cb, 2 * ca);
        let ratio = a / b;
        let p = MeshOptions::default().grading_order as f64;
        assert!((ratio / 2f64.powf(p) - 1.0).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn segment_weights_sum_to_length() {
        let kite = make_kite();
        let part = Partition::pure_dirichlet(kite.clone()).nucleate(2.0, 0.6).unwrap();
        let m = build_mesh(&part, 160).unwrap();
        let segs = part.segments();
        for (i, s) in segs.iter().enumerate() {
            let w: f64 = m.nodes().iter().filter(|p| p.segment == i).map(|p| p.weight).sum();
            assert!((w - (s.end_s - s.start_s)).abs() < 1e-10, "segment {i}: {w}");
        }
        let whole = build_mesh(&Partition::pure_dirichlet(kite.clone()), 160).unwrap();
        let w: f64 = whole.nodes().iter().map(|p| p.weight).sum();
        assert!((w - kite.length()).abs() < 1e-10, "{} {}", w, kite.length());
    }

    #[test]
    fn sigma_min_examples() {
        let part = disk_dirichlet();
        let m64 = build_mesh(&part, 64).unwrap();
        let s64 = assemble(c(1.0), &m64).sigma_min().unwrap();
        assert!(s64 > 0.01);
        let m128 = build_mesh(&part, 128).unwrap();
        let s128 = assemble(c(1.0), &m128).sigma_min().unwrap();
        assert!((s64 - s128).abs() < 1e-8, "{s64} {s128}");
        let s = assemble(c(2.404825557), &m128).sigma_min().unwrap();
        assert!(s < 1e-6, "{s}");
    }

    #[test]
    fn solve_zero_and_near_resonance() {
        let part = disk_dirichlet();
        let m = build_mesh(&part, 64).unwrap();
        let op = assemble(c(1.0), &m);
        let d = solve(&op, &vec![c(0.0); m.len()]).unwrap();
        assert!(d.raw.iter().all(|v| v.norm() == 0.0));
        let m = build_mesh(&part, 128).unwrap();
        let op = assemble(c(2.404825557), &m);
        match solve(&op, &vec![c(1.0); m.len()]) {
            Err(BieError::NearSingular { sigma_min }) => assert!(sigma_min < 1e-6),
            other => panic!("expected NearSingular, got {other:?}"),
        }
    }

    #[test]
    fn plane_wave_reevaluation() {
        let part = disk_dirichlet();
        let m = build_mesh(&part, 64).unwrap();
        let k = c(3.0);
        let dir = [0.6, 0.8];
        let wave = |p: Point| Complex64::from_polar(1.0, 3.0 * (dir[0] * p[0] + dir[1] * p[1]));
        let rhs: Vec<Complex64> = m.nodes().iter().map(|p| wave(p.point)).collect();
        let d = solve(&assemble(k, &m), &rhs).unwrap();
        let fine = m.refined(4);
        let df = d.interpolate(&m, &fine);
        let tr = eval_trace_value(&df, &fine, k);
        let err = fine
            .nodes()
            .iter()
            .zip(&tr)
            .map(|(p, v)| (v - wave(p.point)).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
        let inner = [0.2, -0.3];
        let v = eval_single_layer(&d, &m, k, inner).unwrap();
        assert!((v - wave(inner)).norm() < 1e-10);
    }

    #[test]
    fn evaluation_guards() {
        let part = disk_dirichlet();
        let m = build_mesh(&part, 64).unwrap();
        let d = Density::zeros(m.len());
        assert_eq!(eval_single_layer(&d, &m, c(1.0), [0.1, 0.1]).unwrap(), c(0.0));
        assert!(matches!(
            eval_single_layer(&d, &m, c(1.0), [0.99, 0.0]),
            Err(BieError::TooClose { .. })
        ));
        assert!(matches!(
            eval_single_layer(&d, &m, c(1.0), [1.5, 0.0]),
            Err(BieError::Outside { .. })
        ));
    }

    #[test]
    fn jump_relation_on_disk() {
        // S[e^{imθ}] has interior/exterior normal derivatives differing by ψ
        let part = disk_dirichlet();
        let m = build_mesh(&part, 128).unwrap();
        let k = c(1.3);
        let raw: Vec<Complex64> = m.nodes().iter().map(|p| Complex64::from_polar(1.0, 3.0 * p.tau)).collect();
        let d = Density::from_raw(&m, raw.clone());
        let int = eval_trace_dn(&d, &m, k, Side::Interior);
        let ext = eval_trace_dn(&d, &m, k, Side::Exterior);
        for i in 0..m.len() {
            assert!((ext[i] - int[i] - raw[i]).norm() < 1e-12);
        }
        // interior trace against the exact disk value: S[e^{imθ}] = −(iπ/2) J_m(kr) H_m(k) e^{imθ}
        // so ∂_r at r=1⁻ is −(iπ/2) k J_m'(k) H_m(k)
        let jm = |mm: i32, x: f64| -> f64 {
            let n = 2000;
            let h = PI / n as f64;
            (0..=n)
                .map(|i| {
                    let t = i as f64 * h;
                    let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                    w * (mm as f64 * t - x * t.sin()).cos()
                })
                .sum::<f64>()
                * h
                / PI
        };
        // Y_m via Y_{m+1} = (2m/x) Y_m − Y_{m−1}
        let y0 = crate::specfun::bessel_y(0, 1.3).unwrap();
        let y1 = crate::specfun::bessel_y(1, 1.3).unwrap();
        let y2 = 2.0 / 1.3 * y1 - y0;
        let y3 = 4.0 / 1.3 * y2 - y1;
        let h3 = Complex64::new(jm(3, 1.3), y3);
        let djm = 0.5 * (jm(2, 1.3) - jm(4, 1.3));
        let want = Complex64::new(0.0, -PI / 2.0) * 1.3 * djm * h3;
        for i in 0..m.len() {
            assert!((int[i] - want * raw[i]).norm() < 1e-6, "{} {}", int[i], want * raw[i]);
        }
    }
}
