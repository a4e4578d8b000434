//! Greedy growth of Neumann arcs that pulls a characteristic value down onto
//! a target wavenumber k★, raising |Z(x_S, y)| at k★.

use crate::bie::{build_mesh_with, BieError, Mesh, MeshOptions};
use crate::geometry::{Curve, GeometryError, Partition, Point};
use crate::spectral::{
    char_update_fast, next_higher, polish, sigma_min_scan, CharValue, Derivative, EllipseContour, ScanOptions, SpectralError,
};
use crate::zaremba::{solve_field, solve_field_with_floor, ZarembaError, ZarembaField};
use std::f64::consts::PI;
use thiserror::Error;

/// σ floor for the final field solve. The converged partition has a
/// characteristic value within C_tol of k★ by construction.
pub const FINAL_FLOOR: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Bie(#[from] BieError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Zaremba(#[from] ZarembaError),
    #[error("g is flat on the boundary (spread {0:.3e})")]
    FlatSite(f64),
    #[error("iteration budget of {0} exhausted")]
    Budget(usize, Box<OptimizeTrace>),
    #[error("step size underflow at eps = {0:.3e}")]
    Underflow(f64, Box<OptimizeTrace>),
    #[error("the Neumann arcs cover the boundary")]
    Exhausted(Box<OptimizeTrace>),
}

#[derive(Debug, Clone)]
pub struct OptimizeConfig {
    pub curve: Curve,
    pub source: Point,
    pub receiver: Point,
    pub k_star: f64,
    pub c_tol: f64,
    pub eps0: f64,
    pub mesh: MeshOptions,
    pub max_iterations: usize,
    pub contour_points: usize,
    pub derivative: Derivative,
    /// Newton corrections applied after each one-matrix update
    pub polish_steps: usize,
    /// number of arcs nucleated at the strongest extrema of g (1 = single arc)
    pub arcs: usize,
    pub scan: ScanOptions,
}

impl OptimizeConfig {
    pub fn new(curve: Curve, source: Point, receiver: Point, k_star: f64, c_tol: f64, eps0: f64) -> OptimizeConfig {
        OptimizeConfig {
            curve,
            source,
            receiver,
            k_star,
            c_tol,
            eps0,
            mesh: MeshOptions::default(),
            max_iterations: 200,
            contour_points: 32,
            derivative: Derivative::default(),
            polish_steps: 2,
            arcs: 1,
            scan: ScanOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<(), OptimizeError> {
        let mut bad = Vec::new();
        if !(self.k_star > 0.0) {
            bad.push(format!("k_star must be positive, got {}", self.k_star));
        }
        if !(self.c_tol > 0.0) {
            bad.push(format!("c_tol must be positive, got {}", self.c_tol));
        }
        let limit = self.curve.length() / 20.0;
        if !(self.eps0 > 0.0 && self.eps0 < limit) {
            bad.push(format!("eps0 must lie in (0, {limit:.4}), got {}", self.eps0));
        }
        if self.source == self.receiver {
            bad.push("source and receiver coincide".into());
        }
        for (name, p) in [("source", self.source), ("receiver", self.receiver)] {
            if !self.curve.contains(p) {
                bad.push(format!("{name} ({}, {}) is outside the curve", p[0], p[1]));
            }
        }
        if self.arcs == 0 {
            bad.push("arcs must be at least 1".into());
        }
        if self.contour_points < 4 {
            bad.push("contour_points must be at least 4".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(OptimizeError::Config(bad.join("; ")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Nucleation,
    Growth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Fast,
    Rescan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    /// |k − k★| ≤ C_tol
    Converged,
    /// k > k★ + C_tol, arc kept
    Accepted,
    /// k fell below k★ − C_tol or was lost, arc restored and ε reduced
    Overshoot,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub phase: Phase,
    pub eps: f64,
    /// (center arclength, half-length) of the trial arcs
    pub arcs: Vec<(f64, f64)>,
    pub neumann_length: f64,
    pub k: Option<f64>,
    pub method: Method,
    pub outcome: Outcome,
}

/// Boundary point chosen for nucleation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Site {
    pub t: f64,
    pub s: f64,
    pub point: Point,
    pub g: f64,
}

#[derive(Debug, Clone)]
pub struct OptimizeTrace {
    pub start: Option<CharValue>,
    pub sites: Vec<Site>,
    pub records: Vec<IterationRecord>,
    pub partition: Partition,
    pub k_final: f64,
    pub z_dirichlet: f64,
    pub z_end: f64,
    pub z_end_imag: f64,
    pub gain: f64,
    /// angle of the first arc's center about the curve centroid, in [0, 2π)
    pub theta_center: f64,
    pub center_point: Point,
    pub l_n: f64,
}

/// Extremum of g(z) = Re ∂_ν Z(x_S, z)·∂_ν Z(y, z) on the boundary: the
/// minimum if Z(x_S, y) ≥ 0, the maximum otherwise.
pub fn nucleation_site(field_source: &ZarembaField, field_receiver: &ZarembaField) -> Result<Site, OptimizeError> {
    Ok(nucleation_sites(field_source, field_receiver, 1)?[0])
}

/// The `count` strongest local extrema of g in the direction chosen by the
/// sign of Z(x_S, y), each refined by a three-point quadratic fit.
pub fn nucleation_sites(field_source: &ZarembaField, field_receiver: &ZarembaField, count: usize) -> Result<Vec<Site>, OptimizeError> {
    let mesh = field_source.mesh();
    let z = field_source.eval(field_receiver.source)?;
    let a = field_source.eval_dn_boundary();
    let b = field_receiver.eval_dn_boundary();
    let order = mesh.boundary_order();
    let g: Vec<f64> = order.iter().map(|&i| (a[i] * b[i]).re).collect();
    let spread = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - g.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(spread >= 1e-14) {
        return Err(OptimizeError::FlatSite(spread));
    }
    // work with the quantity to be maximized
    let sign = if z >= 0.0 { -1.0 } else { 1.0 };
    let f: Vec<f64> = g.iter().map(|v| sign * v).collect();
    let n = f.len();
    let mut peaks: Vec<usize> = (0..n).filter(|&j| f[j] >= f[(j + n - 1) % n] && f[j] > f[(j + 1) % n]).collect();
    if peaks.is_empty() {
        peaks.push((0..n).max_by(|&i, &j| f[i].partial_cmp(&f[j]).unwrap()).unwrap());
    }
    // strongest first; ties go to the node nearest the receiver, then smaller t
    let nodes = mesh.nodes();
    let y = field_receiver.source;
    let dist = |j: usize| {
        let p = nodes[order[j]].point;
        (p[0] - y[0]).hypot(p[1] - y[1])
    };
    let top = f.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tie = 1e-9 * top.abs().max(1e-300);
    peaks.sort_by(|&i, &j| {
        if (f[i] - f[j]).abs() <= tie {
            dist(i)
                .partial_cmp(&dist(j))
                .unwrap()
                .then(nodes[order[i]].tau.partial_cmp(&nodes[order[j]].tau).unwrap())
        } else {
            f[j].partial_cmp(&f[i]).unwrap()
        }
    });
    let curve = mesh.partition().curve();
    let h = 2.0 * PI / n as f64;
    Ok(peaks
        .into_iter()
        .take(count.max(1))
        .map(|j| {
            let (fm, f0, fp) = (f[(j + n - 1) % n], f[j], f[(j + 1) % n]);
            let den = fm - 2.0 * f0 + fp;
            let shift = if den < 0.0 { 0.5 * (fm - fp) / den } else { 0.0 };
            let t = (nodes[order[j]].tau + shift.clamp(-0.5, 0.5) * h).rem_euclid(2.0 * PI);
            Site {
                t,
                s: curve.arclength_at(t),
                point: curve.point(t),
                g: sign * (f0 - 0.125 * (fm - fp) * shift),
            }
        })
        .collect())
}

/// Tracks the characteristic value below `k_prev` on a new partition.
fn track(config: &OptimizeConfig, mesh: &Mesh, k_prev: f64) -> Result<(Option<f64>, Method), OptimizeError> {
    let k_star = config.k_star;
    let contour = EllipseContour::between(k_prev, k_star, config.contour_points)?;
    match char_update_fast(mesh, k_prev, &contour, config.derivative) {
        Ok(update) => {
            let mut k = update.select(k_star);
            let reach = k_prev - k_star;
            for _ in 0..config.polish_steps {
                let next = polish(mesh, k, config.derivative)?;
                // a correction that leaves the contour has jumped to another value
                if !next.is_finite() || (next - k).abs() > 0.5 * reach {
                    break;
                }
                k = next;
            }
            Ok((Some(k), Method::Fast))
        }
        Err(SpectralError::NotInContour) | Err(SpectralError::TooManyRoots(_)) => {
            let lo = (k_star - 2.0 * config.c_tol).max(1e-6);
            let hi = k_prev;
            if hi <= lo {
                return Ok((None, Method::Rescan));
            }
            let step = config.scan.grid_step.min((hi - lo) / 20.0);
            let options = ScanOptions {
                grid_step: step,
                ..config.scan
            };
            let scan = sigma_min_scan(mesh, lo, hi, options)?;
            let found = scan
                .values
                .iter()
                .map(|v| v.k)
                .filter(|&k| k < hi - 1e-9)
                .fold(None, |acc: Option<f64>, k| Some(acc.map_or(k, |a| a.max(k))));
            Ok((found, Method::Rescan))
        }
        Err(e) => Err(e.into()),
    }
}

fn arcs_for(sites: &[Site], half: f64) -> Vec<(f64, f64)> {
    sites.iter().map(|s| (s.s, half)).collect()
}

/// Runs the nucleation and growth loops.
pub fn run(config: &OptimizeConfig) -> Result<OptimizeTrace, OptimizeError> {
    config.validate()?;
    let curve = &config.curve;
    let length = curve.length();
    let k_star = config.k_star;
    let pure = Partition::pure_dirichlet(curve.clone());
    let mesh0 = build_mesh_with(&pure, config.mesh)?;

    let start = next_higher(&mesh0, k_star, config.scan)?;
    let field_s = solve_field(&mesh0, k_star, config.source)?;
    let field_y = solve_field(&mesh0, k_star, config.receiver)?;
    let z_dirichlet = field_s.eval(config.receiver)?;
    let sites = nucleation_sites(&field_s, &field_y, config.arcs)?;
    let m = sites.len() as f64;

    let mut trace = OptimizeTrace {
        start: Some(start.clone()),
        sites: sites.clone(),
        records: Vec::new(),
        partition: pure.clone(),
        k_final: start.k,
        z_dirichlet,
        z_end: f64::NAN,
        z_end_imag: f64::NAN,
        gain: f64::NAN,
        theta_center: f64::NAN,
        center_point: [f64::NAN; 2],
        l_n: 0.0,
    };

    let mut eps = config.eps0;
    let mut k = start.k;
    let mut half;
    let floor = 1e-5 * length;
    let mut converged;
    let mut iterations = 0;

    // nucleation: arcs of half-length ε/m at the sites
    loop {
        iterations += 1;
        if iterations > config.max_iterations {
            return Err(OptimizeError::Budget(config.max_iterations, Box::new(trace)));
        }
        if eps < floor {
            return Err(OptimizeError::Underflow(eps, Box::new(trace)));
        }
        let trial = eps / m;
        let arcs = arcs_for(&sites, trial);
        let partition = Partition::with_arcs(curve.clone(), &arcs)?;
        let mesh = build_mesh_with(&partition, config.mesh)?;
        let (kn, method) = track(config, &mesh, k)?;
        let outcome = classify(kn, k_star, config.c_tol);
        trace.records.push(IterationRecord {
            phase: Phase::Nucleation,
            eps,
            arcs,
            neumann_length: partition.neumann_length(),
            k: kn,
            method,
            outcome,
        });
        match outcome {
            Outcome::Converged | Outcome::Accepted => {
                half = trial;
                k = kn.unwrap();
                trace.partition = partition;
                trace.k_final = k;
                converged = outcome == Outcome::Converged;
                break;
            }
            Outcome::Overshoot => eps /= 2f64.sqrt(),
        }
    }

    // growth: extend every arc by ε/(2m) per side
    while !converged {
        iterations += 1;
        if iterations > config.max_iterations {
            return Err(OptimizeError::Budget(config.max_iterations, Box::new(trace)));
        }
        if eps < floor {
            return Err(OptimizeError::Underflow(eps, Box::new(trace)));
        }
        let trial = half + eps / (2.0 * m);
        if 2.0 * trial * m >= length {
            return Err(OptimizeError::Exhausted(Box::new(trace)));
        }
        let arcs = arcs_for(&sites, trial);
        let partition = Partition::with_arcs(curve.clone(), &arcs)?;
        let mesh = build_mesh_with(&partition, config.mesh)?;
        let (kn, method) = track(config, &mesh, k)?;
        let outcome = classify(kn, k_star, config.c_tol);
        trace.records.push(IterationRecord {
            phase: Phase::Growth,
            eps,
            arcs,
            neumann_length: partition.neumann_length(),
            k: kn,
            method,
            outcome,
        });
        match outcome {
            Outcome::Converged | Outcome::Accepted => {
                half = trial;
                k = kn.unwrap();
                trace.partition = partition;
                trace.k_final = k;
                converged = outcome == Outcome::Converged;
            }
            Outcome::Overshoot => eps *= 0.9,
        }
    }

    let mesh = build_mesh_with(&trace.partition, config.mesh)?;
    let field = solve_field_with_floor(&mesh, k_star, config.source, FINAL_FLOOR)?;
    let z = field.eval_full(config.receiver)?;
    trace.z_end = z.re;
    trace.z_end_imag = z.im;
    trace.gain = (z.re / z_dirichlet).abs();
    trace.l_n = trace.partition.neumann_length();
    if let Some(arc) = trace.partition.neumann_arcs().first() {
        let t = 0.5 * (arc.t_start + arc.t_end);
        let p = curve.point(t);
        let c = curve.centroid();
        trace.center_point = p;
        trace.theta_center = (p[1] - c[1]).atan2(p[0] - c[0]).rem_euclid(2.0 * PI);
    }
    Ok(trace)
}

fn classify(k: Option<f64>, k_star: f64, c_tol: f64) -> Outcome {
    match k {
        Some(k) if (k - k_star).abs() <= c_tol => Outcome::Converged,
        Some(k) if k > k_star + c_tol => Outcome::Accepted,
        _ => Outcome::Overshoot,
    }
}

/// The characteristic value nearest k★ on a partition, by a fresh scan.
pub fn certificate(partition: &Partition, options: MeshOptions, k_star: f64, window: f64) -> Result<Option<CharValue>, OptimizeError> {
    let mesh = build_mesh_with(partition, options)?;
    let scan = sigma_min_scan(
        &mesh,
        (k_star - window).max(1e-6),
        k_star + window,
        ScanOptions {
            grid_step: (window / 10.0).min(0.01),
            ..ScanOptions::default()
        },
    )?;
    Ok(scan
        .values
        .into_iter()
        .min_by(|a, b| (a.k - k_star).abs().partial_cmp(&(b.k - k_star).abs()).unwrap()))
}
