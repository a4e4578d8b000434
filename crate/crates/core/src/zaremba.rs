//! The mixed-boundary Green's function Z = Γ + R, its boundary normal
//! derivatives, the small-arc nucleation formula and the eigenfunction
//! expansion.

use crate::bie::{
    assemble, eval_trace_dn, fundamental_solution, kernel_normal_derivative, single_layer_unchecked, solve_with_threshold, BieError,
    Density, Mesh, Side,
};
use crate::geometry::{BoundaryKind, Point};
use crate::quad::gauss_legendre_on;
use crate::spectral::CharValue;
use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use thiserror::Error;

/// Normalized σ_min below which a field solve is refused.
pub const RESONANCE_FLOOR: f64 = 1e-5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ZarembaError {
    #[error(transparent)]
    Bie(#[from] BieError),
    #[error("wavenumber is too close to a characteristic value (sigma_min = {sigma_min:.3e})")]
    NearResonance { sigma_min: f64 },
    #[error("wavenumber must be positive, got {0}")]
    Wavenumber(f64),
    #[error("receiver coincides with the source")]
    Coincident,
    #[error("boundary interpolation needs a partition without junctions")]
    NotPure,
    #[error("no null vector: multiplicity {0}")]
    Multiplicity(usize),
    #[error("linear algebra failure: {0}")]
    Linalg(String),
}

/// Z(x_S, ·) for one wavenumber and partition.
#[derive(Debug, Clone)]
pub struct ZarembaField<'m> {
    pub k: f64,
    pub source: Point,
    pub density: Density,
    pub sigma_min: f64,
    mesh: &'m Mesh,
}

/// Value of Z with the discarded imaginary part kept as a diagnostic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldValue {
    pub re: f64,
    pub im: f64,
}

pub fn solve_field(mesh: &Mesh, k: f64, source: Point) -> Result<ZarembaField<'_>, ZarembaError> {
    solve_field_with_floor(mesh, k, source, RESONANCE_FLOOR)
}

/// Solves for the remainder R with R = −Γ on Dirichlet nodes and
/// ∂_ν R = −∂_ν Γ on Neumann nodes.
pub fn solve_field_with_floor(mesh: &Mesh, k: f64, source: Point, floor: f64) -> Result<ZarembaField<'_>, ZarembaError> {
    if !(k > 0.0) {
        return Err(ZarembaError::Wavenumber(k));
    }
    mesh.check_interior(source)?;
    let kc = Complex64::new(k, 0.0);
    let rhs: Vec<Complex64> = mesh
        .nodes()
        .iter()
        .map(|p| match p.kind {
            BoundaryKind::Dirichlet => fundamental_solution(kc, p.point, source).map(|v| -v),
            BoundaryKind::Neumann => kernel_normal_derivative(kc, p.point, p.normal, source).map(|v| -v),
        })
        .collect::<Result<_, _>>()?;
    let op = assemble(kc, mesh);
    let density = match solve_with_threshold(&op, &rhs, floor) {
        Ok(d) => d,
        Err(BieError::NearSingular { sigma_min }) => return Err(ZarembaError::NearResonance { sigma_min }),
        Err(e) => return Err(e.into()),
    };
    let sigma_min = op.sigma_min()?;
    Ok(ZarembaField {
        k,
        source,
        density,
        sigma_min,
        mesh,
    })
}

impl<'m> ZarembaField<'m> {
    pub fn mesh(&self) -> &'m Mesh {
        self.mesh
    }

    /// Z(x_S, y) with its imaginary part.
    pub fn eval_full(&self, y: Point) -> Result<FieldValue, ZarembaError> {
        self.mesh.check_interior(y)?;
        let kc = Complex64::new(self.k, 0.0);
        let g = fundamental_solution(kc, y, self.source).map_err(|_| ZarembaError::Coincident)?;
        let z = g + single_layer_unchecked(&self.density, self.mesh, kc, y);
        Ok(FieldValue { re: z.re, im: z.im })
    }

    /// Re Z(x_S, y).
    pub fn eval(&self, y: Point) -> Result<f64, ZarembaError> {
        Ok(self.eval_full(y)?.re)
    }

    /// ∂_ν Z(x_S, ·) at the mesh nodes, in mesh order.
    pub fn eval_dn_boundary(&self) -> Vec<Complex64> {
        let kc = Complex64::new(self.k, 0.0);
        let tr = eval_trace_dn(&self.density, self.mesh, kc, Side::Interior);
        self.mesh
            .nodes()
            .iter()
            .zip(tr)
            .map(|(p, t)| t + kernel_normal_derivative(kc, p.point, p.normal, self.source).expect("source is interior"))
            .collect()
    }

    /// Z(x_S, ·) at the mesh nodes. Vanishes on Dirichlet nodes up to
    /// discretization error.
    pub fn eval_boundary(&self) -> Vec<Complex64> {
        let kc = Complex64::new(self.k, 0.0);
        let tr = crate::bie::eval_trace_value(&self.density, self.mesh, kc);
        self.mesh
            .nodes()
            .iter()
            .zip(tr)
            .map(|(p, t)| t + fundamental_solution(kc, p.point, self.source).expect("source is interior"))
            .collect()
    }

    /// ∂_ν Z(x_S, ·) at curve parameter t, by trigonometric interpolation of
    /// the nodal trace. Only defined on meshes without junctions.
    pub fn dn_at(&self, t: f64) -> Result<Complex64, ZarembaError> {
        if self.mesh.segments().len() != 1 {
            return Err(ZarembaError::NotPure);
        }
        let dn = self.eval_dn_boundary();
        let order = self.mesh.boundary_order();
        let values: Vec<Complex64> = order.iter().map(|&i| dn[i]).collect();
        Ok(trig_interpolate(&values, t))
    }
}

/// Interpolates uniform periodic samples f_j = f(2πj/n) at t.
pub fn trig_interpolate(values: &[Complex64], t: f64) -> Complex64 {
    let n = values.len();
    let half = n / 2;
    let h = 2.0 * PI / n as f64;
    let mut out = Complex64::new(0.0, 0.0);
    for m in -(half as i64)..=(half as i64) {
        let mut c = Complex64::new(0.0, 0.0);
        for (j, v) in values.iter().enumerate() {
            c += v * Complex64::from_polar(1.0, -(m as f64) * j as f64 * h);
        }
        let scale = if n.is_multiple_of(2) && m.unsigned_abs() as usize == half {
            0.5
        } else {
            1.0
        };
        out += c * scale * Complex64::from_polar(1.0, m as f64 * t);
    }
    out / n as f64
}

/// Predicted Z after a Neumann arc of half-length ε is nucleated at the
/// boundary point with parameter t_star:
/// Z_D(x_S, y) − ε²(π/2)·∂_ν Z_D(y, y★)·∂_ν Z_D(x_S, y★).
pub fn nucleation_prediction(
    field_source: &ZarembaField,
    field_receiver: &ZarembaField,
    t_star: f64,
    eps: f64,
) -> Result<f64, ZarembaError> {
    let zd = field_source.eval(field_receiver.source)?;
    if eps == 0.0 {
        return Ok(zd);
    }
    let a = field_source.dn_at(t_star)?;
    let b = field_receiver.dn_at(t_star)?;
    Ok(zd - eps * eps * PI / 2.0 * (a * b).re)
}

/// One L²-normalized real eigenfunction u = Re S_k[ψ].
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: CharValue,
    /// density whose single layer is the eigenfunction (already normalized)
    pub density: Density,
    /// factor that was applied to reach unit L² norm
    pub normalization: f64,
    /// upsampled mesh the density lives on
    mesh: std::sync::Arc<Mesh>,
}

impl EigenPair {
    pub fn eval(&self, x: Point) -> f64 {
        single_layer_unchecked(&self.density, &self.mesh, Complex64::new(self.value.k, 0.0), x).re
    }

    pub fn eigenvalue(&self) -> f64 {
        self.value.k * self.value.k
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }
}

/// Interior quadrature on the star-shaped map x = c + ρ(γ(t) − c).
#[derive(Debug, Clone)]
pub struct InteriorRule {
    /// points in the bulk ρ ≤ 1 − δ with weights
    pub bulk: Vec<(Point, f64)>,
    /// angular nodes of each strip-profile radius, grouped by radius
    pub profile: Vec<(f64, Vec<(Point, f64)>)>,
    /// inner edge of the boundary strip
    pub rho_edge: f64,
}

const RADIAL_NODES: usize = 48;
const ANGULAR_NODES: usize = 128;
const PROFILE_NODES: usize = 8;

impl InteriorRule {
    /// Rule whose points all respect the evaluation distance floor of mesh.
    pub fn new(mesh: &Mesh) -> InteriorRule {
        let curve = mesh.partition().curve();
        let c = curve.centroid();
        let map = |rho: f64, t: f64| -> (Point, f64) {
            let g = curve.point(t);
            let d = curve.d1(t);
            let v = [g[0] - c[0], g[1] - c[1]];
            let p = [c[0] + rho * v[0], c[1] + rho * v[1]];
            (p, rho * (v[0] * d[1] - v[1] * d[0]).abs())
        };
        let ts: Vec<f64> = (0..ANGULAR_NODES).map(|j| 2.0 * PI * j as f64 / ANGULAR_NODES as f64).collect();
        let dt = 2.0 * PI / ANGULAR_NODES as f64;
        let mut delta = 0.02;
        while delta < 0.5 && !ts.iter().all(|&t| mesh.check_interior(map(1.0 - delta, t).0).is_ok()) {
            delta *= 1.25;
        }
        let edge = 1.0 - delta;
        let (rs, ws) = gauss_legendre_on(RADIAL_NODES, 0.0, edge);
        let mut bulk = Vec::with_capacity(RADIAL_NODES * ANGULAR_NODES);
        for (r, w) in rs.iter().zip(&ws) {
            for &t in &ts {
                let (p, jac) = map(*r, t);
                bulk.push((p, w * dt * jac));
            }
        }
        // the angular profile is sampled on [1 − 4δ, 1 − δ] and extrapolated
        let (pr, _) = gauss_legendre_on(PROFILE_NODES, (1.0 - 4.0 * delta).max(0.0), edge);
        let profile = pr
            .iter()
            .map(|&r| (r, ts.iter().map(|&t| map(r, t)).map(|(p, jac)| (p, dt * jac)).collect()))
            .collect();
        InteriorRule {
            bulk,
            profile,
            rho_edge: edge,
        }
    }

    /// ∫_Ω f².
    pub fn norm_sq<F>(&self, f: F) -> f64
    where
        F: Fn(Point) -> f64 + Sync,
    {
        self.inner_many(|p| vec![f(p)], 1)[(0, 0)]
    }

    /// Gram matrix ∫_Ω f_a f_b for a vector-valued f with `m` components.
    pub fn inner_many<F>(&self, f: F, m: usize) -> Mat<f64>
    where
        F: Fn(Point) -> Vec<f64> + Sync,
    {
        let acc = |pts: &[(Point, f64)]| -> Mat<f64> {
            let parts: Vec<Mat<f64>> = pts
                .par_iter()
                .map(|(p, w)| {
                    let v = f(*p);
                    Mat::from_fn(m, m, |a, b| w * v[a] * v[b])
                })
                .collect();
            let mut g = Mat::<f64>::zeros(m, m);
            for part in parts {
                g += part;
            }
            g
        };
        let mut g = acc(&self.bulk);
        // strip ρ ∈ [edge, 1]: polynomial extrapolation of the profile in ρ
        let rs: Vec<f64> = self.profile.iter().map(|(r, _)| *r).collect();
        let prof: Vec<Mat<f64>> = self.profile.iter().map(|(_, pts)| acc(pts)).collect();
        let (sr, sw) = gauss_legendre_on(PROFILE_NODES, self.rho_edge, 1.0);
        for (r, w) in sr.iter().zip(&sw) {
            for (i, ri) in rs.iter().enumerate() {
                let l: f64 = rs
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, rj)| (r - rj) / (ri - rj))
                    .product();
                g += &prof[i] * faer::Scale(w * l);
            }
        }
        g
    }
}

/// Eigenfunctions for a characteristic value: right singular vectors of
/// A(k) spanning the numerical null space, turned into real functions and
/// orthonormalized in L²(Ω).
pub fn eigenpair_extract(mesh: &Mesh, value: &CharValue) -> Result<Vec<EigenPair>, ZarembaError> {
    let m = value.multiplicity.max(1);
    let kc = Complex64::new(value.k, 0.0);
    let a = assemble(kc, mesh).matrix;
    let svd = a.svd().map_err(|e| ZarembaError::Linalg(format!("{e:?}")))?;
    let n = mesh.len();
    if m > n {
        return Err(ZarembaError::Multiplicity(m));
    }
    let v = svd.V();
    let fine = std::sync::Arc::new(mesh.refined(4));
    // candidate real functions Re S[φ] with φ ∈ {ψ_r, −iψ_r}
    let mut dens = Vec::with_capacity(2 * m);
    for r in 0..m {
        let col = n - 1 - r;
        let d = Density::from_weighted(mesh, (0..n).map(|i| v[(i, col)]).collect());
        let d = d.interpolate(mesh, &fine);
        let rot = Density::from_raw(&fine, d.raw.iter().map(|z| z * Complex64::new(0.0, -1.0)).collect());
        dens.push(d);
        dens.push(rot);
    }
    let rule = InteriorRule::new(&fine);
    let q = dens.len();
    let gram = rule.inner_many(|p| layer_values(&dens, &fine, kc, p), q);
    let eig = gram
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| ZarembaError::Linalg(format!("{e:?}")))?;
    let s = eig.S().column_vector();
    let u = eig.U();
    let mut out = Vec::with_capacity(m);
    // dominant directions of the Gram matrix, largest first
    for r in 0..m {
        let c = q - 1 - r;
        let lam = s[c];
        if !(lam > 0.0) {
            return Err(ZarembaError::Multiplicity(m));
        }
        let scale = 1.0 / lam.sqrt();
        let raw: Vec<Complex64> = (0..fine.len())
            .map(|i| (0..q).map(|a| dens[a].raw[i] * (u[(a, c)] * scale)).sum())
            .collect();
        let mut density = Density::from_raw(&fine, raw);
        // fix the sign so that the largest interior sample is positive
        let probe = rule
            .bulk
            .iter()
            .step_by(37)
            .map(|(p, _)| single_layer_unchecked(&density, &fine, kc, *p).re);
        let extreme = probe.fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if extreme < 0.0 {
            density = Density::from_raw(&fine, density.raw.iter().map(|z| -z).collect());
        }
        out.push(EigenPair {
            value: value.clone(),
            density,
            normalization: scale,
            mesh: fine.clone(),
        });
    }
    Ok(out)
}

/// Re S[φ](p) for several densities sharing one kernel evaluation.
fn layer_values(dens: &[Density], mesh: &Mesh, k: Complex64, p: Point) -> Vec<f64> {
    let mut acc = vec![Complex64::new(0.0, 0.0); dens.len()];
    for (i, node) in mesh.nodes().iter().enumerate() {
        let g = fundamental_solution(k, p, node.point).expect("point off the boundary") * node.weight;
        for (a, d) in acc.iter_mut().zip(dens) {
            *a += g * d.raw[i];
        }
    }
    acc.into_iter().map(|z| z.re).collect()
}

/// Partial sum Σ_{j<J} u_j(x_S) u_j(y) / (k² − λ_j).
pub fn spectral_sum(pairs: &[EigenPair], source: Point, y: Point, k: f64, count: usize) -> f64 {
    pairs
        .iter()
        .take(count)
        .map(|p| p.eval(source) * p.eval(y) / (k * k - p.eigenvalue()))
        .sum()
}
