//! Smooth closed curves, arclength-measured arcs and Dirichlet/Neumann
//! partitions of the boundary.

use crate::quad::gauss_legendre;
use std::f64::consts::PI;
use thiserror::Error;

pub type Point = [f64; 2];

const TWO_PI: f64 = 2.0 * PI;
const PANELS: usize = 64;
const PANEL_ORDER: usize = 16;
/// Arcs closer than this (in arclength) are treated as touching.
const MERGE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("radius must be positive, got {0}")]
    Radius(f64),
    #[error("curve coefficients are malformed: {0}")]
    Coefficients(String),
    #[error("curve is not regular near tau = {0}")]
    NotRegular(f64),
    #[error("curve must be oriented counterclockwise")]
    Clockwise,
    #[error("arc half-length {half} is invalid for a curve of length {length}")]
    ArcLength { half: f64, length: f64 },
    #[error("Neumann arcs would cover the whole boundary")]
    DirichletExhausted,
    #[error("no Neumann arc with index {0}")]
    ArcIndex(usize),
    #[error("extension must be positive, got {0}")]
    Extension(f64),
}

/// Truncated trigonometric polynomial
/// x(τ) = Σ a_n cos nτ + b_n sin nτ, y(τ) = Σ c_n cos nτ + d_n sin nτ.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPoly {
    pub x_cos: Vec<f64>,
    pub x_sin: Vec<f64>,
    pub y_cos: Vec<f64>,
    pub y_sin: Vec<f64>,
}

impl TrigPoly {
    fn degree(&self) -> usize {
        [&self.x_cos, &self.x_sin, &self.y_cos, &self.y_sin]
            .iter()
            .map(|v| v.len())
            .max()
            .unwrap_or(0)
    }

    /// Position and derivatives up to order 2 at τ.
    fn eval(&self, t: f64) -> [Point; 3] {
        let mut out = [[0.0; 2]; 3];
        for n in 0..self.degree() {
            let nf = n as f64;
            let (s, c) = (nf * t).sin_cos();
            let get = |v: &Vec<f64>| v.get(n).copied().unwrap_or(0.0);
            for (dim, (ac, bs)) in [(get(&self.x_cos), get(&self.x_sin)), (get(&self.y_cos), get(&self.y_sin))]
                .into_iter()
                .enumerate()
            {
                out[0][dim] += ac * c + bs * s;
                out[1][dim] += nf * (-ac * s + bs * c);
                out[2][dim] += -nf * nf * (ac * c + bs * s);
            }
        }
        out
    }
}

/// Smooth closed counterclockwise curve parametrized over τ ∈ [0, 2π).
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    name: String,
    shape: TrigPoly,
    length: f64,
    /// cumulative arclength at the panel breakpoints 2πj/PANELS
    table: Vec<f64>,
    gl: (Vec<f64>, Vec<f64>),
}

pub fn make_disk(radius: f64) -> Result<Curve, GeometryError> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(GeometryError::Radius(radius));
    }
    Curve::new(
        "disk",
        TrigPoly {
            x_cos: vec![0.0, radius],
            x_sin: vec![],
            y_cos: vec![],
            y_sin: vec![0.0, radius],
        },
    )
}

pub fn make_kite() -> Curve {
    Curve::new(
        "kite",
        TrigPoly {
            x_cos: vec![-0.65, 1.0, 0.65],
            x_sin: vec![],
            y_cos: vec![],
            y_sin: vec![0.0, 1.5],
        },
    )
    .expect("kite is a valid curve")
}

impl Curve {
    pub fn new(name: &str, shape: TrigPoly) -> Result<Curve, GeometryError> {
        let all = shape.x_cos.iter().chain(&shape.x_sin).chain(&shape.y_cos).chain(&shape.y_sin);
        if shape.degree() < 2 || all.clone().any(|v| !v.is_finite()) {
            return Err(GeometryError::Coefficients(
                "need finite coefficients up to degree at least 1".into(),
            ));
        }
        let scale = all.fold(0.0f64, |m, v| m.max(v.abs()));
        let mut curve = Curve {
            name: name.to_string(),
            shape,
            length: 0.0,
            table: vec![],
            gl: gauss_legendre(PANEL_ORDER),
        };
        let samples = 4096;
        let mut area = 0.0;
        for j in 0..samples {
            let t = TWO_PI * j as f64 / samples as f64;
            let [p, d, _] = curve.shape.eval(t);
            if (d[0] * d[0] + d[1] * d[1]).sqrt() <= 1e-10 * scale {
                return Err(GeometryError::NotRegular(t));
            }
            area += 0.5 * (p[0] * d[1] - p[1] * d[0]) * TWO_PI / samples as f64;
        }
        if area <= 0.0 {
            return Err(GeometryError::Clockwise);
        }
        let mut table = vec![0.0; PANELS + 1];
        let h = TWO_PI / PANELS as f64;
        for j in 0..PANELS {
            table[j + 1] = table[j] + curve.integrate_speed(j as f64 * h, (j + 1) as f64 * h);
        }
        curve.length = table[PANELS];
        curve.table = table;
        Ok(curve)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn shape(&self) -> &TrigPoly {
        &self.shape
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn point(&self, t: f64) -> Point {
        self.shape.eval(t)[0]
    }

    pub fn d1(&self, t: f64) -> Point {
        self.shape.eval(t)[1]
    }

    pub fn d2(&self, t: f64) -> Point {
        self.shape.eval(t)[2]
    }

    pub fn speed(&self, t: f64) -> f64 {
        let d = self.d1(t);
        d[0].hypot(d[1])
    }

    /// Unit normal pointing out of the enclosed region.
    pub fn outward_normal(&self, t: f64) -> Point {
        let d = self.d1(t);
        let s = d[0].hypot(d[1]);
        [d[1] / s, -d[0] / s]
    }

    /// Signed curvature, positive for convex counterclockwise curves.
    pub fn curvature(&self, t: f64) -> f64 {
        let [_, d, dd] = self.shape.eval(t);
        let s = d[0].hypot(d[1]);
        (d[0] * dd[1] - d[1] * dd[0]) / (s * s * s)
    }

    fn integrate_speed(&self, a: f64, b: f64) -> f64 {
        let (x, w) = &self.gl;
        let m = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        x.iter().zip(w).map(|(t, v)| v * self.speed(m + r * t)).sum::<f64>() * r
    }

    /// Arclength from τ = 0 to τ (any real τ; one full turn adds the length).
    pub fn arclength_at(&self, t: f64) -> f64 {
        let turns = (t / TWO_PI).floor();
        let u = t - turns * TWO_PI;
        let h = TWO_PI / PANELS as f64;
        let j = ((u / h) as usize).min(PANELS - 1);
        turns * self.length + self.table[j] + self.integrate_speed(j as f64 * h, u)
    }

    /// Inverse of [`Curve::arclength_at`], monotone root-find to 1e-12.
    pub fn param_at(&self, s: f64) -> f64 {
        let turns = (s / self.length).floor();
        let u = s - turns * self.length;
        let j = match self.table.binary_search_by(|v| v.partial_cmp(&u).unwrap()) {
            Ok(j) => j.min(PANELS - 1),
            Err(j) => j.saturating_sub(1).min(PANELS - 1),
        };
        let h = TWO_PI / PANELS as f64;
        let (mut lo, mut hi) = (j as f64 * h, (j + 1) as f64 * h);
        let mut t = lo + h * (u - self.table[j]) / (self.table[j + 1] - self.table[j]);
        for _ in 0..100 {
            let f = self.table[j] + self.integrate_speed(j as f64 * h, t) - u;
            if f.abs() < 1e-14 * self.length.max(1.0) {
                break;
            }
            if f > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let next = t - f / self.speed(t);
            t = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
            if hi - lo < 1e-15 {
                break;
            }
        }
        turns * TWO_PI + t
    }

    /// Winding number of the curve about p (rounded).
    pub fn winding_number(&self, p: Point) -> i64 {
        let n = 4096;
        let mut total = 0.0;
        let mut prev = self.point(0.0);
        for j in 1..=n {
            let cur = self.point(TWO_PI * j as f64 / n as f64);
            let a = (prev[1] - p[1]).atan2(prev[0] - p[0]);
            let b = (cur[1] - p[1]).atan2(cur[0] - p[0]);
            let mut d = b - a;
            if d > PI {
                d -= TWO_PI;
            } else if d < -PI {
                d += TWO_PI;
            }
            total += d;
            prev = cur;
        }
        (total / TWO_PI).round() as i64
    }

    pub fn contains(&self, p: Point) -> bool {
        self.winding_number(p) == 1
    }

    /// Distance from p to the curve and the parameter of the closest point.
    pub fn distance_to_boundary(&self, p: Point) -> (f64, f64) {
        let n = 512;
        let dist = |t: f64| {
            let q = self.point(t);
            (q[0] - p[0]).hypot(q[1] - p[1])
        };
        let mut best = (f64::INFINITY, 0.0);
        for j in 0..n {
            let t = TWO_PI * j as f64 / n as f64;
            let d = dist(t);
            if d < best.0 {
                best = (d, t);
            }
        }
        // golden-section refinement in the bracketing sample interval
        let h = TWO_PI / n as f64;
        let (mut a, mut b) = (best.1 - h, best.1 + h);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let (mut fc, mut fd) = (dist(c), dist(d));
        while b - a > 1e-13 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = dist(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = dist(d);
            }
        }
        let t = 0.5 * (a + b);
        let t = t.rem_euclid(TWO_PI);
        (dist(t).min(best.0), t)
    }

    pub fn centroid(&self) -> Point {
        let n = 4096;
        let (mut a, mut cx, mut cy) = (0.0, 0.0, 0.0);
        for j in 0..n {
            let t = TWO_PI * j as f64 / n as f64;
            let [p, d, _] = self.shape.eval(t);
            let cross = p[0] * d[1] - p[1] * d[0];
            a += 0.5 * cross;
            cx += p[0] * cross / 3.0;
            cy += p[1] * cross / 3.0;
        }
        [cx / a, cy / a]
    }
}

/// Boundary interval of length 2·half_length centered at arclength center_s.
#[derive(Debug, Clone, PartialEq)]
pub struct Arc {
    pub center_s: f64,
    pub half_length: f64,
    /// parameter interval, t_start < t_end (t_end may exceed 2π)
    pub t_start: f64,
    pub t_end: f64,
}

impl Arc {
    pub fn length(&self) -> f64 {
        2.0 * self.half_length
    }

    pub fn start_s(&self) -> f64 {
        self.center_s - self.half_length
    }

    pub fn end_s(&self) -> f64 {
        self.center_s + self.half_length
    }
}

pub fn arc_by_arclength(curve: &Curve, center_s: f64, half_length: f64) -> Result<Arc, GeometryError> {
    let len = curve.length();
    if !(half_length > 0.0) || 2.0 * half_length >= len {
        return Err(GeometryError::ArcLength {
            half: half_length,
            length: len,
        });
    }
    let c = center_s.rem_euclid(len);
    let t_start = curve.param_at(c - half_length);
    let mut t_end = curve.param_at(c + half_length);
    while t_end <= t_start {
        t_end += TWO_PI;
    }
    Ok(Arc {
        center_s: c,
        half_length,
        t_start,
        t_end,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
}

/// Maximal boundary interval carrying one condition, in arclength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start_s: f64,
    pub end_s: f64,
    pub kind: BoundaryKind,
}

/// Split of the boundary into Neumann arcs and the Dirichlet complement.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    curve: Curve,
    neumann_arcs: Vec<Arc>,
    all_neumann: bool,
}

impl Partition {
    pub fn pure_dirichlet(curve: Curve) -> Partition {
        Partition {
            curve,
            neumann_arcs: vec![],
            all_neumann: false,
        }
    }

    pub fn pure_neumann(curve: Curve) -> Partition {
        Partition {
            curve,
            neumann_arcs: vec![],
            all_neumann: true,
        }
    }

    /// Partition from (center_s, half_length) pairs; overlapping arcs are merged.
    pub fn with_arcs(curve: Curve, arcs: &[(f64, f64)]) -> Result<Partition, GeometryError> {
        let len = curve.length();
        let mut spans = Vec::with_capacity(arcs.len());
        for &(c, h) in arcs {
            if !(h > 0.0) || 2.0 * h >= len {
                return Err(GeometryError::ArcLength { half: h, length: len });
            }
            let start = (c - h).rem_euclid(len);
            spans.push((start, start + 2.0 * h));
        }
        let merged = merge_spans(spans, len)?;
        let mut out = Vec::with_capacity(merged.len());
        for (a, b) in merged {
            out.push(arc_by_arclength(&curve, 0.5 * (a + b), 0.5 * (b - a))?);
        }
        out.sort_by(|a, b| a.start_s().rem_euclid(len).partial_cmp(&b.start_s().rem_euclid(len)).unwrap());
        Ok(Partition {
            curve,
            neumann_arcs: out,
            all_neumann: false,
        })
    }

    pub fn curve(&self) -> &Curve {
        &self.curve
    }

    pub fn neumann_arcs(&self) -> &[Arc] {
        &self.neumann_arcs
    }

    pub fn is_pure_dirichlet(&self) -> bool {
        !self.all_neumann && self.neumann_arcs.is_empty()
    }

    pub fn is_pure_neumann(&self) -> bool {
        self.all_neumann
    }

    fn spans(&self) -> Vec<(f64, f64)> {
        self.neumann_arcs.iter().map(|a| (a.center_s, a.half_length)).collect()
    }

    /// Adds a Neumann arc of half-length `half` centered at arclength `center_s`.
    pub fn nucleate(&self, center_s: f64, half: f64) -> Result<Partition, GeometryError> {
        if self.all_neumann {
            return Err(GeometryError::DirichletExhausted);
        }
        let mut spans = self.spans();
        spans.push((center_s, half));
        Partition::with_arcs(self.curve.clone(), &spans)
    }

    /// Grows arc `index` by `delta` of arclength at each end, merging with neighbors.
    pub fn extend_arc(&self, index: usize, delta: f64) -> Result<Partition, GeometryError> {
        if !(delta > 0.0) {
            return Err(GeometryError::Extension(delta));
        }
        let mut spans = self.spans();
        let Some(s) = spans.get_mut(index) else {
            return Err(GeometryError::ArcIndex(index));
        };
        s.1 += delta;
        if 2.0 * s.1 >= self.curve.length() - MERGE_TOL {
            return Err(GeometryError::DirichletExhausted);
        }
        Partition::with_arcs(self.curve.clone(), &spans)
    }

    pub fn neumann_length(&self) -> f64 {
        if self.all_neumann {
            return self.curve.length();
        }
        self.neumann_arcs.iter().map(Arc::length).sum()
    }

    pub fn dirichlet_length(&self) -> f64 {
        self.curve.length() - self.neumann_length()
    }

    /// Ordered segments covering one turn of the boundary. Pure partitions
    /// give a single closed segment [0, L).
    pub fn segments(&self) -> Vec<Segment> {
        let len = self.curve.length();
        if self.neumann_arcs.is_empty() {
            let kind = if self.all_neumann {
                BoundaryKind::Neumann
            } else {
                BoundaryKind::Dirichlet
            };
            return vec![Segment {
                start_s: 0.0,
                end_s: len,
                kind,
            }];
        }
        let mut out = Vec::new();
        let n = self.neumann_arcs.len();
        let base = self.neumann_arcs[0].start_s().rem_euclid(len);
        let mut cursor = base;
        for i in 0..n {
            let a = &self.neumann_arcs[i];
            let mut start = a.start_s().rem_euclid(len);
            while start < cursor - MERGE_TOL {
                start += len;
            }
            if start > cursor {
                out.push(Segment {
                    start_s: cursor,
                    end_s: start,
                    kind: BoundaryKind::Dirichlet,
                });
            }
            out.push(Segment {
                start_s: start,
                end_s: start + a.length(),
                kind: BoundaryKind::Neumann,
            });
            cursor = start + a.length();
        }
        if base + len > cursor {
            out.push(Segment {
                start_s: cursor,
                end_s: base + len,
                kind: BoundaryKind::Dirichlet,
            });
        }
        out
    }

    /// Stable identifier of the Neumann set, used to tag characteristic values.
    pub fn fingerprint(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.curve.name.hash(&mut h);
        for v in [
            &self.curve.shape.x_cos,
            &self.curve.shape.x_sin,
            &self.curve.shape.y_cos,
            &self.curve.shape.y_sin,
        ] {
            for x in v.iter() {
                x.to_bits().hash(&mut h);
            }
        }
        self.all_neumann.hash(&mut h);
        for a in &self.neumann_arcs {
            a.center_s.to_bits().hash(&mut h);
            a.half_length.to_bits().hash(&mut h);
        }
        h.finish()
    }
}

/// Merges circular spans (start in [0, len), end = start + length).
fn merge_spans(mut spans: Vec<(f64, f64)>, len: f64) -> Result<Vec<(f64, f64)>, GeometryError> {
    if spans.is_empty() {
        return Ok(spans);
    }
    spans.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut out: Vec<(f64, f64)> = Vec::new();
    for s in spans {
        match out.last_mut() {
            Some(last) if s.0 <= last.1 + MERGE_TOL => last.1 = last.1.max(s.1),
            _ => out.push(s),
        }
    }
    // wrap-around: the last span may reach past the first start
    while out.len() > 1 {
        let first = out[0];
        let last = *out.last().unwrap();
        if last.1 - len >= first.0 - MERGE_TOL {
            out.remove(0);
            let l = out.last_mut().unwrap();
            l.1 = l.1.max(first.1 + len);
        } else {
            break;
        }
    }
    let total: f64 = out.iter().map(|s| s.1 - s.0).sum();
    if total >= len - MERGE_TOL {
        return Err(GeometryError::DirichletExhausted);
    }
    Ok(out)
}
