//! Property suite behind the `validate` subcommand.

use crate::bie::{build_mesh, eval_trace_dn, eval_trace_value, fundamental_solution, Density, Mesh, Side};
use crate::geometry::{make_disk, make_kite, Partition, Point};
use crate::specfun::cyl;
use crate::spectral::{sigma_min_scan, winding_number, EllipseContour, ScanOptions};
use crate::zaremba::solve_field;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use std::f64::consts::PI;
use std::time::Instant;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

type Outcome = Result<String, String>;
type CheckFn = Box<dyn Fn(usize) -> Outcome>;

fn within(value: f64, tol: f64, what: &str) -> Outcome {
    if value <= tol {
        Ok(format!("{what} {value:.3e} <= {tol:.0e}"))
    } else {
        Err(format!("{what} {value:.3e} > {tol:.0e}"))
    }
}

/// Runs every check at the given resolution.
pub fn run_suite(nodes_per_arc: usize) -> Vec<Check> {
    let checks: Vec<(&'static str, CheckFn)> = vec![
        ("wronskian", Box::new(|_| wronskian())),
        ("arclength_roundtrip", Box::new(|_| arclength_roundtrip())),
        ("kernel_reciprocity", Box::new(|_| kernel_reciprocity())),
        ("jump_relation", Box::new(jump_relation)),
        ("dirichlet_residual", Box::new(dirichlet_residual)),
        ("neumann_residual", Box::new(neumann_residual)),
        ("green_reciprocity", Box::new(green_reciprocity)),
        ("imaginary_part", Box::new(imaginary_part)),
        ("helmholtz_residual", Box::new(helmholtz_residual)),
        ("winding_consistency", Box::new(winding_consistency)),
    ];
    checks
        .into_iter()
        .map(|(name, f)| {
            let t = Instant::now();
            let out = f(nodes_per_arc);
            let seconds = t.elapsed().as_secs_f64();
            match out {
                Ok(detail) => Check {
                    name,
                    passed: true,
                    detail,
                    seconds,
                },
                Err(detail) => Check {
                    name,
                    passed: false,
                    detail,
                    seconds,
                },
            }
        })
        .collect()
}

fn wronskian() -> Outcome {
    let mut worst: f64 = 0.0;
    for x in [0.05, 0.5, 1.0, 2.5, 7.0, 12.0, 19.9, 20.1, 35.0] {
        let c = cyl(Complex64::new(x, 0.0)).map_err(|e| e.to_string())?;
        let w = (c.j1 * c.y0 - c.j0 * c.y1).re;
        worst = worst.max((w * PI * x / 2.0 - 1.0).abs());
    }
    within(worst, 1e-11, "relative Wronskian defect")
}

fn arclength_roundtrip() -> Outcome {
    let mut worst: f64 = 0.0;
    for curve in [make_disk(1.0).map_err(|e| e.to_string())?, make_kite()] {
        for j in 0..50 {
            let t = 2.0 * PI * (j as f64 + 0.37) / 50.0;
            worst = worst.max((curve.param_at(curve.arclength_at(t)) - t).abs());
        }
    }
    within(worst, 1e-10, "parameter error")
}

fn kernel_reciprocity() -> Outcome {
    let pts = [[0.1, 0.2], [-0.4, 0.3], [0.7, -0.6], [2.0, 1.0]];
    for k in [Complex64::new(1.0, 0.0), Complex64::new(7.5, 0.3)] {
        for a in pts {
            for b in pts {
                if a != b {
                    let u = fundamental_solution(k, a, b).map_err(|e| e.to_string())?;
                    let v = fundamental_solution(k, b, a).map_err(|e| e.to_string())?;
                    if u != v {
                        return Err(format!("Γ({a:?},{b:?}) = {u} but Γ({b:?},{a:?}) = {v}"));
                    }
                }
            }
        }
    }
    Ok("exact".into())
}

/// Normal-derivative traces of S[e^{iθ}] on the unit circle from both
/// sides against the separated-variable values.
fn jump_relation(npa: usize) -> Outcome {
    let m = build_mesh(&Partition::pure_dirichlet(make_disk(1.0).map_err(|e| e.to_string())?), npa).map_err(|e| e.to_string())?;
    let k = 1.3;
    let kc = Complex64::new(k, 0.0);
    let raw: Vec<Complex64> = m.nodes().iter().map(|p| Complex64::from_polar(1.0, p.tau)).collect();
    let d = Density::from_raw(&m, raw.clone());
    let int = eval_trace_dn(&d, &m, kc, Side::Interior);
    let ext = eval_trace_dn(&d, &m, kc, Side::Exterior);
    let c = cyl(kc).map_err(|e| e.to_string())?;
    let (j0, j1, y0, y1) = (c.j0.re, c.j1.re, c.y0.re, c.y1.re);
    let (j2, y2) = (2.0 * j1 / k - j0, 2.0 * y1 / k - y0);
    let h = Complex64::new(j1, y1);
    let dh = Complex64::new(0.5 * (j0 - j2), 0.5 * (y0 - y2));
    // S[e^{iθ}] = −(iπ/2) J_1(kr) H_1(k) e^{iθ} inside, −(iπ/2) J_1(k) H_1(kr) e^{iθ} outside
    let pre = Complex64::new(0.0, -PI / 2.0) * k;
    let want_int = pre * 0.5 * (j0 - j2) * h;
    let want_ext = pre * j1 * dh;
    let worst = (0..m.len())
        .map(|i| (int[i] - want_int * raw[i]).norm().max((ext[i] - want_ext * raw[i]).norm()))
        .fold(0.0, f64::max);
    within(worst, 1e-6, "trace error")
}

fn dirichlet_residual(npa: usize) -> Outcome {
    let m = build_mesh(&Partition::pure_dirichlet(make_disk(1.0).map_err(|e| e.to_string())?), npa).map_err(|e| e.to_string())?;
    let source = [0.1, 0.2];
    let f = solve_field(&m, 1.0, source).map_err(|e| e.to_string())?;
    // re-evaluate on a finer node set than the one used to solve
    let fine = m.refined(4);
    let df = f.density.interpolate(&m, &fine);
    let kc = Complex64::new(1.0, 0.0);
    let tr = eval_trace_value(&df, &fine, kc);
    let worst = fine
        .nodes()
        .iter()
        .zip(&tr)
        .map(|(p, v)| (v + fundamental_solution(kc, p.point, source).unwrap()).norm())
        .fold(0.0, f64::max);
    within(worst, 1e-8, "|Z| on the boundary")
}

fn mixed_mesh(npa: usize) -> Result<Mesh, String> {
    let part = Partition::with_arcs(make_disk(1.0).map_err(|e| e.to_string())?, &[(0.5 * PI, 0.4)]).map_err(|e| e.to_string())?;
    build_mesh(&part, npa).map_err(|e| e.to_string())
}

fn neumann_residual(npa: usize) -> Outcome {
    let m = mixed_mesh(npa)?;
    let f = solve_field(&m, 1.0, [0.1, 0.2]).map_err(|e| e.to_string())?;
    let dn = f.eval_dn_boundary();
    let worst = m
        .nodes()
        .iter()
        .zip(&dn)
        .filter(|(p, _)| p.kind == crate::geometry::BoundaryKind::Neumann)
        .map(|(_, v)| v.norm())
        .fold(0.0, f64::max);
    within(worst, 1e-6, "|∂νZ| on Neumann nodes")
}

fn green_reciprocity(npa: usize) -> Outcome {
    let m = mixed_mesh(npa)?;
    let (a, b): (Point, Point) = ([0.1, 0.2], [-0.3, 0.4]);
    let fa = solve_field(&m, 1.0, a).map_err(|e| e.to_string())?;
    let fb = solve_field(&m, 1.0, b).map_err(|e| e.to_string())?;
    let d = (fa.eval(b).map_err(|e| e.to_string())? - fb.eval(a).map_err(|e| e.to_string())?).abs();
    within(d, 1e-6, "|Z(a,b) − Z(b,a)|")
}

fn imaginary_part(npa: usize) -> Outcome {
    let m = mixed_mesh(npa)?;
    let f = solve_field(&m, 1.0, [0.0, 0.0]).map_err(|e| e.to_string())?;
    let v = f.eval_full([0.0, 0.5]).map_err(|e| e.to_string())?;
    within((v.im / v.re).abs(), 1e-4, "|Im Z|/|Re Z|")
}

fn helmholtz_residual(npa: usize) -> Outcome {
    let m = mixed_mesh(npa)?;
    let k = 2.0;
    let f = solve_field(&m, k, [0.3, 0.4]).map_err(|e| e.to_string())?;
    let h = 1e-3;
    let p = [-0.2, -0.1];
    let z = |x: f64, y: f64| f.eval([x, y]).unwrap();
    let c = z(p[0], p[1]);
    let lap = (z(p[0] + h, p[1]) + z(p[0] - h, p[1]) + z(p[0], p[1] + h) + z(p[0], p[1] - h) - 4.0 * c) / (h * h);
    within((lap + k * k * c).abs(), 1e-5, "|(Δ + k²)Z|")
}

/// Rounded contour winding numbers against σ_min minima counted with
/// multiplicity, for seeded random ellipses on the Dirichlet disk.
fn winding_consistency(npa: usize) -> Outcome {
    let m = build_mesh(&Partition::pure_dirichlet(make_disk(1.0).map_err(|e| e.to_string())?), npa).map_err(|e| e.to_string())?;
    let scan = sigma_min_scan(&m, 1.5, 6.5, ScanOptions::default()).map_err(|e| e.to_string())?;
    let roots: Vec<(f64, usize)> = scan.values.iter().map(|v| (v.k, v.multiplicity)).collect();
    let mut rng = rand::rngs::StdRng::seed_from_u64(0x5eed);
    let mut done = 0;
    let mut worst: f64 = 0.0;
    while done < 20 {
        let c = rng.random_range(2.0..6.0);
        let a = rng.random_range(0.2..1.0);
        // trapezoid nodes must stay well resolved against poles near the contour
        let b = rng.random_range(0.25..0.6) * a;
        if c - a < 1.6 || c + a > 6.4 || roots.iter().any(|(r, _)| ((r - c).abs() - a).abs() < 0.1 * a) {
            continue;
        }
        let e = EllipseContour::new(Complex64::new(c, 0.0), a, b, 64).map_err(|e| e.to_string())?;
        let w = winding_number(&m, &e);
        let want: usize = roots.iter().filter(|(r, _)| (r - c).abs() < a).map(|(_, mult)| mult).sum();
        if (w - want as f64).abs() > 0.1 {
            return Err(format!("contour ({c:.3}, {a:.3}, {b:.3}): winding {w:.4}, minima {want}"));
        }
        worst = worst.max((w - want as f64).abs());
        done += 1;
    }
    Ok(format!("20 contours, max |winding − count| {worst:.2e}"))
}
