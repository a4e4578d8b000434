//! Characteristic values of k ↦ A(k): singular-value scans and contour
//! perturbation formulas.

use crate::bie::{assemble, build_mesh_with, BieError, Mesh, MeshOptions};
use crate::geometry::{Curve, Partition};
use faer::prelude::*;
use faer::{c64, Mat};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use thiserror::Error;

/// Default normalized σ_min threshold for accepting a minimum.
pub const DEFAULT_THRESHOLD: f64 = 1e-6;
/// Forward-difference step for ∂_ω A in the fast update.
pub const DEFAULT_DERIVATIVE_STEP: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error(transparent)]
    Bie(#[from] BieError),
    #[error("contour winding number {0:.4} is not 1")]
    Winding(f64),
    #[error("no characteristic value inside the contour")]
    NotInContour,
    #[error("{0} characteristic values inside the contour; at most 2 are supported")]
    TooManyRoots(usize),
    #[error("invalid contour: {0}")]
    Contour(String),
    #[error("no characteristic value found below k = {0}")]
    Budget(f64),
    #[error("eigenvalue computation failed: {0}")]
    Linalg(String),
}

/// Located characteristic value.
#[derive(Debug, Clone, PartialEq)]
pub struct CharValue {
    pub k: f64,
    pub multiplicity: usize,
    pub sigma_min: f64,
    pub fingerprint: u64,
    pub nodes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    pub grid_step: f64,
    pub threshold: f64,
    /// bracket width at which golden-section refinement stops
    pub tolerance: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            grid_step: 0.01,
            threshold: DEFAULT_THRESHOLD,
            tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Scan {
    pub samples: Vec<(f64, f64)>,
    pub values: Vec<CharValue>,
}

pub fn sigma_min(mesh: &Mesh, k: f64) -> Result<f64, SpectralError> {
    Ok(assemble(Complex64::new(k, 0.0), mesh).sigma_min()?)
}

/// Golden-section search for the minimum of σ_min on [a, b].
pub fn refine_minimum(mesh: &Mesh, a: f64, b: f64, tolerance: f64) -> Result<(f64, f64), SpectralError> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (a, b);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = sigma_min(mesh, c)?;
    let mut fd = sigma_min(mesh, d)?;
    while b - a > tolerance {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = sigma_min(mesh, c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = sigma_min(mesh, d)?;
        }
    }
    let k = 0.5 * (a + b);
    Ok((k, sigma_min(mesh, k)?))
}

fn char_value_at(mesh: &Mesh, k: f64) -> Result<CharValue, SpectralError> {
    let sv = assemble(Complex64::new(k, 0.0), mesh).normalized_singular_values()?;
    let smin = sv.last().unwrap().min(1.0);
    let cut = (1e2 * smin).max(1e-8);
    Ok(CharValue {
        k,
        multiplicity: sv.iter().filter(|&&s| s < cut).count().max(1),
        sigma_min: smin,
        fingerprint: mesh.partition().fingerprint(),
        nodes: mesh.len(),
    })
}

/// Samples σ_min on a grid over [lo, hi] and refines every local minimum.
pub fn sigma_min_scan(mesh: &Mesh, lo: f64, hi: f64, options: ScanOptions) -> Result<Scan, SpectralError> {
    if !(lo > 0.0 && hi > lo && options.grid_step > 0.0) {
        return Err(SpectralError::Contour(format!(
            "bad scan interval [{lo}, {hi}] step {}",
            options.grid_step
        )));
    }
    let n = ((hi - lo) / options.grid_step).ceil() as usize;
    let ks: Vec<f64> = (0..=n).map(|i| (lo + i as f64 * options.grid_step).min(hi)).collect();
    let sig: Vec<f64> = ks.par_iter().map(|&k| sigma_min(mesh, k)).collect::<Result<_, _>>()?;
    let mut values: Vec<CharValue> = Vec::new();
    for i in 0..ks.len() {
        let left = if i > 0 { sig[i - 1] } else { f64::INFINITY };
        let right = if i + 1 < ks.len() { sig[i + 1] } else { f64::INFINITY };
        if !(sig[i] <= left && sig[i] < right) {
            continue;
        }
        let a = ks[i.saturating_sub(1)];
        let b = ks[(i + 1).min(ks.len() - 1)];
        let (k, s) = refine_minimum(mesh, a, b, options.tolerance)?;
        if s < options.threshold && !values.iter().any(|v| (v.k - k).abs() < 10.0 * options.tolerance) {
            values.push(char_value_at(mesh, k)?);
        }
    }
    Ok(Scan {
        samples: ks.into_iter().zip(sig).collect(),
        values,
    })
}

/// Smallest pure-Dirichlet characteristic value strictly above k_star.
pub fn next_higher_dirichlet(curve: &Curve, k_star: f64, mesh: MeshOptions, options: ScanOptions) -> Result<CharValue, SpectralError> {
    let m = build_mesh_with(&Partition::pure_dirichlet(curve.clone()), mesh)?;
    next_higher(&m, k_star, options)
}

/// Forward scan with expanding windows on an existing mesh.
pub fn next_higher(mesh: &Mesh, k_star: f64, options: ScanOptions) -> Result<CharValue, SpectralError> {
    let mut lo = k_star;
    let mut width = 0.5;
    let limit = k_star + 40.0;
    while lo < limit {
        let hi = lo + width;
        let scan = sigma_min_scan(mesh, lo.max(1e-3), hi, options)?;
        if let Some(v) = scan.values.into_iter().find(|v| v.k > k_star) {
            return Ok(v);
        }
        // overlap by one step so a minimum on the window edge is not lost
        lo = hi - options.grid_step;
        width *= 1.5;
    }
    Err(SpectralError::Budget(limit))
}

/// Ellipse ω(θ) = c + a cos θ + i b sin θ with an M-point trapezoidal rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipseContour {
    pub center: Complex64,
    pub semi_major: f64,
    pub semi_minor: f64,
    pub points: usize,
}

impl EllipseContour {
    pub fn new(center: Complex64, semi_major: f64, semi_minor: f64, points: usize) -> Result<Self, SpectralError> {
        if !(semi_major > 0.0) || !(semi_minor > 1e-12 * semi_major.max(1.0)) || points < 4 {
            return Err(SpectralError::Contour(format!(
                "semi-axes ({semi_major}, {semi_minor}) with {points} points"
            )));
        }
        Ok(EllipseContour {
            center,
            semi_major,
            semi_minor,
            points,
        })
    }

    /// The ellipse used by the optimizer: center (k + k★)/2, semi-axes
    /// 0.55(k − k★) and 0.1(k − k★).
    pub fn between(k: f64, k_star: f64, points: usize) -> Result<Self, SpectralError> {
        let d = k - k_star;
        if !(d > 0.0) {
            return Err(SpectralError::Contour(format!("k = {k} must exceed k_star = {k_star}")));
        }
        EllipseContour::new(Complex64::new(0.5 * (k + k_star), 0.0), 0.55 * d, 0.1 * d, points)
    }

    /// Quadrature nodes ω_m and weights dω_m.
    pub fn nodes(&self) -> Vec<(Complex64, Complex64)> {
        let m = self.points;
        (0..m)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / m as f64;
                let w = self.center + Complex64::new(self.semi_major * t.cos(), self.semi_minor * t.sin());
                let dw = Complex64::new(-self.semi_major * t.sin(), self.semi_minor * t.cos()) * (2.0 * PI / m as f64);
                (w, dw)
            })
            .collect()
    }

    pub fn contains(&self, z: Complex64) -> bool {
        let d = z - self.center;
        (d.re / self.semi_major).powi(2) + (d.im / self.semi_minor).powi(2) < 1.0
    }
}

/// How ∂_ω A is approximated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Derivative {
    Forward(f64),
    Central(f64),
}

impl Default for Derivative {
    fn default() -> Self {
        Derivative::Forward(DEFAULT_DERIVATIVE_STEP)
    }
}

fn derivative(mesh: &Mesh, w: Complex64, a0: &Mat<c64>, how: Derivative) -> Mat<c64> {
    match how {
        Derivative::Forward(h) => {
            let a1 = assemble(w + h, mesh).matrix;
            Mat::from_fn(a0.nrows(), a0.ncols(), |i, j| (a1[(i, j)] - a0[(i, j)]) / h)
        }
        Derivative::Central(h) => {
            let ap = assemble(w + h, mesh).matrix;
            let am = assemble(w - h, mesh).matrix;
            Mat::from_fn(a0.nrows(), a0.ncols(), |i, j| (ap[(i, j)] - am[(i, j)]) / (2.0 * h))
        }
    }
}

fn trace(m: &Mat<c64>) -> Complex64 {
    (0..m.nrows()).map(|i| m[(i, i)]).sum()
}

/// (1/2πi) tr∮ A⁻¹∂A dω and (1/2πi) tr∮ (ω − k0) A⁻¹∂A dω.
fn contour_moments(mesh: &Mesh, k0: f64, contour: &EllipseContour, how: Derivative) -> (Complex64, Complex64) {
    let parts: Vec<(Complex64, Complex64)> = contour
        .nodes()
        .par_iter()
        .map(|&(w, dw)| {
            let a = assemble(w, mesh).matrix;
            let d = derivative(mesh, w, &a, how);
            let t = trace(&a.partial_piv_lu().solve(&d));
            (t * dw, (w - k0) * t * dw)
        })
        .collect();
    let scale = Complex64::new(0.0, 2.0 * PI);
    let s0: Complex64 = parts.iter().map(|p| p.0).sum();
    let s1: Complex64 = parts.iter().map(|p| p.1).sum();
    (s0 / scale, s1 / scale)
}

/// Rounded count of characteristic values inside the contour.
pub fn winding_number(mesh: &Mesh, contour: &EllipseContour) -> f64 {
    contour_moments(mesh, contour.center.re, contour, Derivative::Central(1e-5)).0.re
}

fn check_winding(w: Complex64) -> Result<(), SpectralError> {
    if (w.re - 1.0).abs() > 0.25 {
        Err(SpectralError::Winding(w.re))
    } else {
        Ok(())
    }
}

/// Exact contour update: k_ε = k0 + (1/2πi) tr∮ (ω − k0) A_ε(ω)⁻¹ ∂_ω A_ε(ω) dω.
pub fn char_update_exact(mesh_eps: &Mesh, k0: f64, contour: &EllipseContour) -> Result<f64, SpectralError> {
    char_update_exact_with(mesh_eps, k0, contour, Derivative::Central(1e-5))
}

pub fn char_update_exact_with(mesh_eps: &Mesh, k0: f64, contour: &EllipseContour, how: Derivative) -> Result<f64, SpectralError> {
    let (w, s1) = contour_moments(mesh_eps, k0, contour, how);
    check_winding(w)?;
    Ok(k0 + s1.re)
}

/// First-order update k_ε − k0 ≈ −(1/2πi) tr∮ A0(ω)⁻¹ (A_ε(ω) − A0(ω)) dω.
/// Both meshes must carry the same nodes (see [`Mesh::relabeled_dirichlet`]).
pub fn char_update_firstorder(mesh0: &Mesh, mesh_eps: &Mesh, k0: f64, contour: &EllipseContour) -> Result<f64, SpectralError> {
    if mesh0.len() != mesh_eps.len() {
        return Err(SpectralError::Bie(BieError::Length {
            got: mesh0.len(),
            want: mesh_eps.len(),
        }));
    }
    let (w, _) = contour_moments(mesh0, k0, contour, Derivative::Central(1e-5));
    check_winding(w)?;
    let parts: Vec<Complex64> = contour
        .nodes()
        .par_iter()
        .map(|&(w, dw)| {
            let a0 = assemble(w, mesh0).matrix;
            let ae = assemble(w, mesh_eps).matrix;
            let diff = &ae - &a0;
            trace(&a0.partial_piv_lu().solve(&diff)) * dw
        })
        .collect();
    let s: Complex64 = parts.iter().sum();
    Ok(k0 - (s / Complex64::new(0.0, 2.0 * PI)).re)
}

/// Result of the one-matrix update.
#[derive(Debug, Clone, PartialEq)]
pub struct FastUpdate {
    /// (1/2πi)∮ tr(...)' dω, the number of linearized roots inside
    pub winding: f64,
    /// updated characteristic values inside the contour, ascending
    pub roots: Vec<f64>,
}

impl FastUpdate {
    /// The root closest to but above k★; the largest root if none lies above.
    pub fn select(&self, k_star: f64) -> f64 {
        self.roots
            .iter()
            .copied()
            .filter(|&r| r > k_star)
            .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.min(r))))
            .unwrap_or_else(|| self.roots.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    }
}

/// Eigenvalues μ of A(k0)⁻¹ ∂A(k0).
fn linearization(mesh: &Mesh, k0: f64, how: Derivative) -> Result<Vec<Complex64>, SpectralError> {
    let a0 = assemble(Complex64::new(k0, 0.0), mesh).matrix;
    let d = derivative(mesh, Complex64::new(k0, 0.0), &a0, how);
    let x = a0.partial_piv_lu().solve(&d);
    x.eigenvalues().map_err(|e| SpectralError::Linalg(format!("{e:?}")))
}

/// One-matrix update: the linearization A(k0) + (ω − k0)∂A is inverted
/// through the eigenvalues μ of A(k0)⁻¹∂A, and
/// −(1/2πi) tr∮ (I + (ω − k0)A⁻¹∂A)⁻¹ dω together with the count and second
/// moment of its poles are integrated on the contour.
pub fn char_update_fast(mesh_eps: &Mesh, k0: f64, contour: &EllipseContour, how: Derivative) -> Result<FastUpdate, SpectralError> {
    let mu = linearization(mesh_eps, k0, how)?;
    let (mut w, mut m1, mut m2) = (Complex64::default(), Complex64::default(), Complex64::default());
    for (om, dw) in contour.nodes() {
        let z = om - k0;
        let f: Complex64 = mu.iter().map(|&m| m / (1.0 + z * m)).sum::<Complex64>() * dw;
        w += f;
        m1 += z * f;
        m2 += z * z * f;
    }
    let scale = Complex64::new(0.0, 2.0 * PI);
    let (w, m1, m2) = (w / scale, m1 / scale, m2 / scale);
    let count = w.re.round();
    if count < 0.5 {
        return Err(SpectralError::NotInContour);
    }
    let roots = match count as usize {
        1 => vec![k0 + m1.re],
        2 => {
            // z² − p z + q with p = z1 + z2 and q = z1 z2 = (p² − (z1² + z2²))/2
            let p = m1;
            let q = (m1 * m1 - m2) / 2.0;
            let disc = (p * p - 4.0 * q).sqrt();
            let mut r = vec![k0 + ((p + disc) / 2.0).re, k0 + ((p - disc) / 2.0).re];
            r.sort_by(|a, b| a.partial_cmp(b).unwrap());
            r
        }
        n => return Err(SpectralError::TooManyRoots(n)),
    };
    Ok(FastUpdate { winding: w.re, roots })
}

/// Newton-type correction: re-linearizes at k and moves to the nearest pole
/// k − 1/μ of the linearized problem.
pub fn polish(mesh: &Mesh, k: f64, how: Derivative) -> Result<f64, SpectralError> {
    let mu = linearization(mesh, k, how)?;
    let step = mu
        .iter()
        .filter(|m| m.norm() > 0.0)
        .map(|m| -1.0 / m)
        .min_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap())
        .ok_or(SpectralError::NotInContour)?;
    Ok(k + step.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bie::build_mesh;
    use crate::geometry::make_disk;

    #[test]
    fn contour_guards() {
        assert!(EllipseContour::new(Complex64::new(1.0, 0.0), 1.0, 0.0, 32).is_err());
        assert!(EllipseContour::between(1.0, 2.0, 32).is_err());
        let e = EllipseContour::between(2.4, 1.0, 32).unwrap();
        assert!(e.contains(Complex64::new(2.4, 0.0)));
        assert!(e.contains(Complex64::new(1.0, 0.0)));
        assert!(!e.contains(Complex64::new(0.9, 0.0)));
    }

    #[test]
    fn selection_rule() {
        let u = FastUpdate {
            winding: 2.0,
            roots: vec![15.38, 15.45],
        };
        assert_eq!(u.select(15.4), 15.45);
        let u = FastUpdate {
            winding: 2.0,
            roots: vec![15.3, 15.35],
        };
        assert_eq!(u.select(15.4), 15.35);
    }

    #[test]
    fn disk_first_dirichlet_value() {
        let m = build_mesh(&Partition::pure_dirichlet(make_disk(1.0).unwrap()), 64).unwrap();
        let scan = sigma_min_scan(&m, 2.0, 2.8, ScanOptions::default()).unwrap();
        assert_eq!(scan.values.len(), 1);
        let v = &scan.values[0];
        assert!((v.k - 2.404825557695773).abs() < 1e-6);
        assert_eq!(v.multiplicity, 1);
    }

    #[test]
    fn empty_contour_has_zero_winding() {
        let m = build_mesh(&Partition::pure_dirichlet(make_disk(1.0).unwrap()), 32).unwrap();
        let e = EllipseContour::new(Complex64::new(1.5, 0.0), 0.3, 0.05, 16).unwrap();
        let w = winding_number(&m, &e);
        assert!(w.abs() < 1e-6, "{w}");
        assert!(matches!(char_update_exact(&m, 1.5, &e), Err(SpectralError::Winding(_))));
    }
}
