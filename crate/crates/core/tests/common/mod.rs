#![allow(dead_code)]

use num_complex::Complex64;
use zaremba::specfun::{bessel_j, bessel_y};

/// J_n(x) = (1/π)∫_0^π cos(nτ − x sin τ) dτ, trapezoid on the periodic extension.
pub fn j(n: u32, x: f64) -> f64 {
    if n <= 1 {
        return bessel_j(n, Complex64::new(x, 0.0)).unwrap().re;
    }
    let m = 400;
    (0..m)
        .map(|i| {
            let t = 2.0 * std::f64::consts::PI * i as f64 / m as f64;
            (n as f64 * t - x * t.sin()).cos()
        })
        .sum::<f64>()
        / m as f64
}

/// Y_n(x) by upward recurrence, which is stable for Y.
pub fn y(n: u32, x: f64) -> f64 {
    let (mut a, mut b) = (bessel_y(0, x).unwrap(), bessel_y(1, x).unwrap());
    if n == 0 {
        return a;
    }
    for m in 1..n {
        (a, b) = (b, 2.0 * m as f64 / x * b - a);
    }
    b
}

/// J_n'(x) from the recurrence 2J_n' = J_{n-1} − J_{n+1}.
pub fn dj(n: u32, x: f64) -> f64 {
    if n == 0 {
        -j(1, x)
    } else {
        0.5 * (j(n - 1, x) - j(n + 1, x))
    }
}

/// Root of f bracketed in [a, b], by bisection to machine precision.
pub fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let fa = f(a);
    assert!(fa * f(b) < 0.0, "no sign change in [{a}, {b}]");
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if f(m) * fa > 0.0 {
            a = m;
        } else {
            b = m;
        }
        if b - a < 1e-15 * b {
            break;
        }
    }
    0.5 * (a + b)
}

/// Sorted positive roots of f below `hi`, located on a fine sampling grid.
pub fn roots(f: impl Fn(f64) -> f64 + Copy, lo: f64, hi: f64) -> Vec<f64> {
    let n = ((hi - lo) / 0.01).ceil() as usize;
    let mut out = Vec::new();
    for i in 0..n {
        let (a, b) = (lo + i as f64 * 0.01, lo + (i + 1) as f64 * 0.01);
        if f(a) * f(b) < 0.0 {
            out.push(bisect(f, a, b));
        }
    }
    out
}

/// Disk eigenvalues sqrt(λ) below `hi` with multiplicity: roots of J_n
/// (Dirichlet) or J_n' (Neumann); orders n ≥ 1 count twice.
pub fn disk_spectrum(neumann: bool, hi: f64) -> Vec<f64> {
    let mut all = Vec::new();
    for n in 0..40u32 {
        // the first zero of J_n and of J_n' lies beyond n
        let lo = (n as f64).max(0.05);
        let r = if neumann {
            roots(|x| dj(n, x), lo, hi)
        } else {
            roots(|x| j(n, x), lo, hi)
        };
        for v in r {
            all.push(v);
            if n > 0 {
                all.push(v);
            }
        }
    }
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    all
}
