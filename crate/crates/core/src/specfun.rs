//! Cylinder functions of order 0 and 1 for complex arguments.
//!
//! Three regimes: power series for |z| < 2, Miller backward recurrence with
//! Neumann series for the Y functions up to |z| = 20, and the Hankel
//! asymptotic expansion beyond.

use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Below this modulus the power series is used.
const SERIES_LIMIT: f64 = 2.0;
/// Above this modulus the Hankel asymptotic expansion is used.
pub const ASYMPTOTIC_LIMIT: f64 = 20.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecFunError {
    #[error("order {0} not supported (only 0 and 1)")]
    Order(u32),
    #[error("Y_n requires a positive argument, got {0}")]
    NonPositive(f64),
    #[error("argument is zero")]
    Zero,
}

/// J0, J1, Y0, Y1 evaluated together at one argument.
#[derive(Debug, Clone, Copy)]
pub struct Cyl {
    pub j0: Complex64,
    pub j1: Complex64,
    pub y0: Complex64,
    pub y1: Complex64,
}

impl Cyl {
    pub fn h0(&self) -> Complex64 {
        self.j0 + Complex64::i() * self.y0
    }

    pub fn h1(&self) -> Complex64 {
        self.j1 + Complex64::i() * self.y1
    }
}

fn check_order(n: u32) -> Result<(), SpecFunError> {
    if n > 1 {
        Err(SpecFunError::Order(n))
    } else {
        Ok(())
    }
}

/// Bessel function of the first kind J_n(z), n in {0, 1}.
pub fn bessel_j(n: u32, z: Complex64) -> Result<Complex64, SpecFunError> {
    check_order(n)?;
    let (j0, j1) = bessel_j01(z);
    Ok(if n == 0 { j0 } else { j1 })
}

/// Bessel function of the second kind Y_n(x) for real x > 0.
pub fn bessel_y(n: u32, x: f64) -> Result<f64, SpecFunError> {
    check_order(n)?;
    if !(x > 0.0) {
        return Err(SpecFunError::NonPositive(x));
    }
    let c = cyl(Complex64::new(x, 0.0))?;
    Ok(if n == 0 { c.y0.re } else { c.y1.re })
}

/// Hankel function of the first kind H_n^(1)(z) = J_n(z) + i Y_n(z).
pub fn hankel1(n: u32, z: Complex64) -> Result<Complex64, SpecFunError> {
    check_order(n)?;
    let c = cyl(z)?;
    Ok(if n == 0 { c.h0() } else { c.h1() })
}

/// J0 and J1 only; entire, so z = 0 is allowed.
pub fn bessel_j01(z: Complex64) -> (Complex64, Complex64) {
    let a = z.norm();
    if a < SERIES_LIMIT {
        series_j01(z)
    } else if a <= ASYMPTOTIC_LIMIT {
        let js = miller(z);
        (js[0], js[1])
    } else {
        let c = asymptotic(z);
        (c.j0, c.j1)
    }
}

/// All four functions at z != 0 (principal branch of the logarithm).
pub fn cyl(z: Complex64) -> Result<Cyl, SpecFunError> {
    let a = z.norm();
    if a == 0.0 {
        return Err(SpecFunError::Zero);
    }
    Ok(if a < SERIES_LIMIT {
        series_all(z)
    } else if a <= ASYMPTOTIC_LIMIT {
        neumann_all(z)
    } else {
        asymptotic(z)
    })
}

fn series_j01(z: Complex64) -> (Complex64, Complex64) {
    let q = -(z * z) / 4.0;
    let mut t0 = Complex64::new(1.0, 0.0);
    let mut t1 = z / 2.0;
    let mut j0 = t0;
    let mut j1 = t1;
    for k in 1..40 {
        let kf = k as f64;
        t0 = t0 * q / (kf * kf);
        t1 = t1 * q / (kf * (kf + 1.0));
        j0 += t0;
        j1 += t1;
        if t0.norm() < 1e-18 && t1.norm() < 1e-18 {
            break;
        }
    }
    (j0, j1)
}

fn series_all(z: Complex64) -> Cyl {
    let q = -(z * z) / 4.0;
    let half = z / 2.0;
    let lg = half.ln() + EULER_GAMMA;
    let mut j0 = Complex64::new(1.0, 0.0);
    let mut j1 = half;
    // sums for the analytic parts of Y0 and Y1
    let mut s0 = Complex64::new(0.0, 0.0);
    // k = 0 term of the Y1 sum: (H_0 + H_1) z/2
    let mut s1 = half;
    let mut t0 = Complex64::new(1.0, 0.0);
    let mut t1 = half;
    let mut hk = 0.0;
    for k in 1..40 {
        let kf = k as f64;
        t0 = t0 * q / (kf * kf);
        t1 = t1 * q / (kf * (kf + 1.0));
        hk += 1.0 / kf;
        j0 += t0;
        j1 += t1;
        s0 -= t0 * hk;
        s1 += t1 * (2.0 * hk + 1.0 / (kf + 1.0));
        if t0.norm() < 1e-18 && t1.norm() < 1e-18 {
            break;
        }
    }
    // Y0 = (2/pi)[(ln(z/2)+gamma) J0 + sum (-1)^{k+1} H_k (z^2/4)^k/(k!)^2]
    let y0 = (lg * j0 + s0) * (2.0 / PI);
    // Y1 = (2/pi) ln(z/2) J1 - 2/(pi z) - (1/pi) sum (-1)^k (H_k + H_{k+1} - 2 gamma) (z/2)^{2k+1}/(k!(k+1)!)
    let y1 = half.ln() * j1 * (2.0 / PI) - 2.0 / (PI * z) - (s1 - 2.0 * EULER_GAMMA * j1) / PI;
    Cyl { j0, j1, y0, y1 }
}

/// J_0..J_n by normalized backward recurrence, for 2 <= |z| <= 20.
fn miller(z: Complex64) -> Vec<Complex64> {
    let a = z.norm();
    let mut top = (1.4 * a) as usize + 30;
    top += top % 2;
    let mut js = vec![Complex64::new(0.0, 0.0); top + 2];
    js[top] = Complex64::new(1e-30, 0.0);
    for n in (1..=top).rev() {
        js[n - 1] = js[n] * (2.0 * n as f64) / z - js[n + 1];
    }
    // 1 = J0 + 2 sum_k J_{2k}
    let mut norm = js[0];
    for n in (2..=top).step_by(2) {
        norm += 2.0 * js[n];
    }
    for v in js.iter_mut() {
        *v /= norm;
    }
    js
}

fn neumann_all(z: Complex64) -> Cyl {
    let js = miller(z);
    let top = js.len() - 2;
    let lg = (z / 2.0).ln() + EULER_GAMMA;
    let mut s0 = Complex64::new(0.0, 0.0);
    let mut s1 = Complex64::new(0.0, 0.0);
    let mut k = 1;
    while 2 * k < top {
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        let kf = k as f64;
        s0 += js[2 * k] * (sign / kf);
        s1 += (js[2 * k - 1] - js[2 * k + 1]) * (sign / kf);
        k += 1;
    }
    let y0 = (lg * js[0] + 2.0 * s0) * (2.0 / PI);
    let y1 = (lg * js[1] - js[0] / z - s1) * (2.0 / PI);
    Cyl {
        j0: js[0],
        j1: js[1],
        y0,
        y1,
    }
}

fn asymptotic(z: Complex64) -> Cyl {
    let i = Complex64::i();
    let pre = (2.0 / (PI * z)).sqrt();
    let mut out = [Complex64::new(0.0, 0.0); 4];
    for n in 0..2 {
        let mu = 4.0 * (n * n) as f64;
        let mut plus = Complex64::new(1.0, 0.0);
        let mut minus = Complex64::new(1.0, 0.0);
        let mut ak = Complex64::new(1.0, 0.0);
        let mut last = f64::INFINITY;
        for k in 1..80 {
            let kf = k as f64;
            let odd = 2.0 * kf - 1.0;
            ak = ak * (mu - odd * odd) / (kf * 8.0) / z;
            let size = ak.norm();
            if size > last || size < 1e-17 {
                break;
            }
            last = size;
            let ik = i.powi(k);
            plus += ik * ak;
            minus += ik.conj() * ak;
        }
        let phase = z - (n as f64) * PI / 2.0 - PI / 4.0;
        let h1 = pre * (i * phase).exp() * plus;
        let h2 = pre * (-i * phase).exp() * minus;
        out[n] = (h1 + h2) / 2.0;
        out[n + 2] = (h1 - h2) / (2.0 * i);
    }
    Cyl {
        j0: out[0],
        j1: out[1],
        y0: out[2],
        y1: out[3],
    }
}
