//! Bessel and Hankel functions of integer order, zeros of `J_m`, and the
//! Lommel integrals.
//!
//! Real-argument `J_m` and `Y_m` come from `libm` (the FreeBSD/musl
//! implementations). Complex-argument `J_m` uses the ascending series near the
//! origin and a normalised Miller recurrence elsewhere.

use num_complex::Complex64;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{OnceLock, RwLock};

/// Largest order for which evaluation is validated.
pub const ORDER_CAP: i32 = 60;
/// Largest |z| accepted by [`bessel_j_complex`].
pub const COMPLEX_RADIUS: f64 = 200.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpecfunError {
    #[error("argument {0} is not finite")]
    NonFinite(f64),
    #[error("order {0} exceeds the validated cap {ORDER_CAP}")]
    OrderTooLarge(i64),
    #[error("Hankel functions need x > 0, got {0}")]
    BranchPoint(f64),
    #[error("|z| = {0} exceeds the supported radius {COMPLEX_RADIUS}")]
    RadiusExceeded(f64),
    #[error("scaled recurrence lost accuracy at z = {0}")]
    Accuracy(Complex64),
    #[error("zero search for J_{m} (l = {l}) did not converge")]
    ZeroNotConverged { m: u32, l: u32 },
    #[error("Lommel cross integral needs a != b; use lommel_equal")]
    DegenerateLommel,
    #[error("radius and wavenumbers must be positive")]
    NonPositive,
}

fn check_order(m: i64) -> Result<(), SpecfunError> {
    if m.abs() > ORDER_CAP as i64 {
        Err(SpecfunError::OrderTooLarge(m))
    } else {
        Ok(())
    }
}

fn check_finite(x: f64) -> Result<(), SpecfunError> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(SpecfunError::NonFinite(x))
    }
}

/// `J_m(x)` without argument validation.
#[inline]
pub fn jn(m: i32, x: f64) -> f64 {
    libm::jn(m, x)
}

/// `Y_m(x)` without argument validation (`-inf` at `x = 0`).
#[inline]
pub fn yn(m: i32, x: f64) -> f64 {
    libm::yn(m, x)
}

/// `H^(1)_m(x)` without argument validation.
#[inline]
pub fn h1n(m: i32, x: f64) -> Complex64 {
    Complex64::new(jn(m, x), yn(m, x))
}

/// `J_m'(x)`.
#[inline]
pub fn jnp(m: i32, x: f64) -> f64 {
    0.5 * (jn(m - 1, x) - jn(m + 1, x))
}

/// `H^(1)_m'(x)`.
#[inline]
pub fn h1np(m: i32, x: f64) -> Complex64 {
    0.5 * (h1n(m - 1, x) - h1n(m + 1, x))
}

/// `J_m(a)·H^(1)_m(b)` for `0 < a <= b`, the separated kernel of the radial
/// operators. For high orders at small arguments `Y_m(b)` overflows while the
/// product stays tame; the leading small-argument form takes over there.
#[inline]
pub fn j_h1_product(m: i32, a: f64, b: f64) -> Complex64 {
    // J_{-m} H_{-m} = J_m H_m.
    let ma = m.unsigned_abs() as i32;
    let ja = jn(ma, a);
    let jb = jn(ma, b);
    let yb = yn(ma, b);
    let im = ja * yb;
    let im = if im.is_finite() {
        im
    } else if ma == 0 {
        0.0
    } else {
        -(a / b).powi(ma) / (PI * ma as f64)
    };
    Complex64::new(ja * jb, im)
}

/// Bessel function of the first kind `J_m(x)`.
pub fn bessel_j(m: i32, x: f64) -> Result<f64, SpecfunError> {
    check_finite(x)?;
    check_order(m as i64)?;
    Ok(jn(m, x))
}

/// Bessel function of the second kind `Y_m(x)` for `x > 0`.
pub fn bessel_y(m: i32, x: f64) -> Result<f64, SpecfunError> {
    check_finite(x)?;
    check_order(m as i64)?;
    if x <= 0.0 {
        return Err(SpecfunError::BranchPoint(x));
    }
    Ok(yn(m, x))
}

/// Hankel function of the first kind `H^(1)_m(x) = J_m(x) + i Y_m(x)`.
pub fn hankel1(m: i32, x: f64) -> Result<Complex64, SpecfunError> {
    check_finite(x)?;
    check_order(m as i64)?;
    if x <= 0.0 {
        return Err(SpecfunError::BranchPoint(x));
    }
    Ok(h1n(m, x))
}

/// Hankel function of the second kind `H^(2)_m(x) = J_m(x) - i Y_m(x)`.
pub fn hankel2(m: i32, x: f64) -> Result<Complex64, SpecfunError> {
    hankel1(m, x).map(|h| h.conj())
}

/// `J_m(z)` for complex `z` with `|z| <= COMPLEX_RADIUS`.
pub fn bessel_j_complex(m: i32, z: Complex64) -> Result<Complex64, SpecfunError> {
    check_finite(z.re)?;
    check_finite(z.im)?;
    check_order(m as i64)?;
    let r = z.norm();
    if r > COMPLEX_RADIUS {
        return Err(SpecfunError::RadiusExceeded(r));
    }
    let ma = m.unsigned_abs();
    let sign = if m < 0 && ma % 2 == 1 { -1.0 } else { 1.0 };
    if r == 0.0 {
        return Ok(Complex64::new(if ma == 0 { 1.0 } else { 0.0 }, 0.0));
    }
    let v = if r <= 2.0 || (r * r) < 0.5 * (ma as f64 + 1.0) {
        j_series(ma, z)
    } else {
        j_miller(ma, z)?
    };
    Ok(sign * v)
}

fn j_series(m: u32, z: Complex64) -> Complex64 {
    let half = 0.5 * z;
    let mut term = Complex64::new(1.0, 0.0);
    for k in 1..=m {
        term = term * half / k as f64;
    }
    let q = -half * half;
    let mut sum = term;
    let mut k = 0u32;
    loop {
        k += 1;
        term = term * q / (k as f64 * (k + m) as f64);
        sum += term;
        if term.norm() <= 1e-17 * sum.norm() || k > 400 {
            break;
        }
    }
    sum
}

fn j_miller(m: u32, z: Complex64) -> Result<Complex64, SpecfunError> {
    let r = z.norm();
    let top = (m as f64).max(r);
    let mut n = (top + 30.0 + 8.0 * top.sqrt()) as u32;
    n += n % 2;
    // c^k weights the normalisation sum; e^{-iz} = J0 + 2 sum (-i)^k J_k
    // avoids cancellation in the upper half plane, e^{iz} in the lower.
    let upper = z.im >= 0.0;
    let c = if upper { Complex64::new(0.0, -1.0) } else { Complex64::new(0.0, 1.0) };
    let mut ck = c.powu(n);
    let two_over_z = 2.0 / z;
    let mut f_next = Complex64::new(0.0, 0.0);
    let mut f = Complex64::new(1e-30, 0.0);
    let mut sum = 2.0 * ck * f;
    let mut biggest = sum.norm();
    let mut saved = if n == m { f } else { Complex64::new(0.0, 0.0) };
    let cinv = c.inv();
    for k in (1..=n).rev() {
        let f_prev = two_over_z * (k as f64) * f - f_next;
        f_next = f;
        f = f_prev;
        ck *= cinv;
        let kk = k - 1;
        let term = if kk == 0 { f } else { 2.0 * ck * f };
        sum += term;
        biggest = biggest.max(term.norm());
        if kk == m {
            saved = f;
        }
        if f.norm() > 1e200 {
            let s = 1e-200;
            f *= s;
            f_next *= s;
            sum *= s;
            saved *= s;
            biggest *= s;
        }
    }
    if sum.norm() < 1e-8 * biggest || !sum.norm().is_finite() {
        return Err(SpecfunError::Accuracy(z));
    }
    let e = if upper { (-Complex64::i() * z).exp() } else { (Complex64::i() * z).exp() };
    Ok(saved * e / sum)
}

/// The `l`-th positive zero `a_{m,l}` of `J_m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselZero {
    pub m: u32,
    pub l: u32,
    pub value: f64,
}

fn zero_cache() -> &'static RwLock<HashMap<u32, Vec<f64>>> {
    static CACHE: OnceLock<RwLock<HashMap<u32, Vec<f64>>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// The `l`-th positive zero of `J_m` (`l >= 1`), cached per order.
pub fn bessel_zero(m: u32, l: u32) -> Result<BesselZero, SpecfunError> {
    check_order(m as i64)?;
    check_order(l as i64)?;
    if l == 0 {
        return Err(SpecfunError::ZeroNotConverged { m, l });
    }
    let idx = (l - 1) as usize;
    if let Some(v) = zero_cache().read().unwrap().get(&m).and_then(|z| z.get(idx)) {
        return Ok(BesselZero { m, l, value: *v });
    }
    let mut cache = zero_cache().write().unwrap();
    let zeros = cache.entry(m).or_default();
    while zeros.len() <= idx {
        let k = zeros.len() as u32 + 1;
        let start = match zeros.last() {
            Some(&prev) => prev + 2.0,
            None => (m as f64).max(1.0),
        };
        let z = find_zero(m as i32, k, start).ok_or(SpecfunError::ZeroNotConverged { m, l: k })?;
        zeros.push(z);
    }
    Ok(BesselZero { m, l, value: zeros[idx] })
}

/// All zeros of `J_m`, for `m = 0, 1, ...`, that do not exceed `cap`.
pub fn zeros_below(cap: f64) -> Result<Vec<BesselZero>, SpecfunError> {
    let mut out = Vec::new();
    for m in 0..=ORDER_CAP as u32 {
        let mut l = 1;
        loop {
            let z = bessel_zero(m, l)?;
            if z.value > cap {
                break;
            }
            out.push(z);
            l += 1;
        }
        if l == 1 {
            break;
        }
    }
    Ok(out)
}

fn mcmahon(m: i32, l: u32) -> f64 {
    let mu = 4.0 * (m as f64).powi(2);
    let b = (l as f64 + 0.5 * m as f64 - 0.25) * PI;
    let b8 = 8.0 * b;
    b - (mu - 1.0) / b8 - 4.0 * (mu - 1.0) * (7.0 * mu - 31.0) / (3.0 * b8.powi(3))
}

fn find_zero(m: i32, l: u32, start: f64) -> Option<f64> {
    let step = 0.25;
    let mut a = start;
    let mut fa = jn(m, a);
    let mut b = a + step;
    let mut fb = jn(m, b);
    let mut guard = 0;
    while fa.signum() == fb.signum() {
        a = b;
        fa = fb;
        b += step;
        fb = jn(m, b);
        guard += 1;
        if guard > 4000 {
            return None;
        }
    }
    let guess = mcmahon(m, l);
    let mut x = if guess > a && guess < b { guess } else { 0.5 * (a + b) };
    for _ in 0..100 {
        let f = jn(m, x);
        if f == 0.0 {
            return Some(x);
        }
        if f.signum() == fa.signum() {
            a = x;
        } else {
            b = x;
        }
        let d = jn(m - 1, x) - m as f64 / x * f;
        let mut next = x - f / d;
        if !(next > a && next < b) {
            next = 0.5 * (a + b);
        }
        let dx = (next - x).abs();
        x = next;
        if dx <= 4.0 * f64::EPSILON * x {
            break;
        }
    }
    if jn(m, x).abs() <= 1e-13 {
        Some(x)
    } else {
        None
    }
}

/// `∫_0^R J_n(a r)^2 r dr = (R^2/2)[J_n(aR)^2 - J_{n-1}(aR) J_{n+1}(aR)]`.
pub fn lommel_equal(n: i32, a: f64, r: f64) -> Result<f64, SpecfunError> {
    check_order(n as i64 + 1)?;
    if !(a > 0.0 && r >= 0.0) {
        return Err(SpecfunError::NonPositive);
    }
    let x = a * r;
    Ok(0.5 * r * r * (jn(n, x).powi(2) - jn(n - 1, x) * jn(n + 1, x)))
}

/// `∫_0^R J_n(a r) J_n(b r) r dr` for `a != b`.
pub fn lommel_cross(n: i32, a: f64, b: f64, r: f64) -> Result<f64, SpecfunError> {
    check_order(n as i64 - 1)?;
    if !(a > 0.0 && b > 0.0 && r >= 0.0) {
        return Err(SpecfunError::NonPositive);
    }
    if a == b {
        return Err(SpecfunError::DegenerateLommel);
    }
    let (xa, xb) = (a * r, b * r);
    Ok(r / (a * a - b * b) * (b * jn(n, xa) * jn(n - 1, xb) - a * jn(n - 1, xa) * jn(n, xb)))
}

/// [`lommel_cross`] with a complex second wavenumber.
pub fn lommel_cross_complex(n: i32, a: f64, b: Complex64, r: f64) -> Result<Complex64, SpecfunError> {
    check_order(n as i64 - 1)?;
    if !(a > 0.0 && r >= 0.0) {
        return Err(SpecfunError::NonPositive);
    }
    if b == Complex64::new(a, 0.0) {
        return Err(SpecfunError::DegenerateLommel);
    }
    let xa = a * r;
    let xb = b * r;
    let jb = bessel_j_complex(n, xb)?;
    let jb1 = bessel_j_complex(n - 1, xb)?;
    Ok(r / (a * a - b * b) * (b * jn(n, xa) * jb1 - a * jn(n - 1, xa) * jb))
}
