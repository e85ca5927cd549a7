//! Airy function of the first kind, its rotated branches A±, its zeros and
//! the large-parameter symbols a±, b±.
//!
//! For |z| ≤ [`SERIES_RADIUS`] the Maclaurin series is summed in
//! double-double arithmetic. Outside that disc the exponential asymptotic
//! expansion is used on |ph z| ≤ 2π/3 and the connection formula elsewhere.
//! At radius 8.5 the optimally truncated expansion has relative error near
//! e^{-2|ζ|} ≈ 5e-15, and the double-double series still resolves the
//! cancellation on the positive axis.

use crate::cutoff::Kappa;
use crate::dd::{CDd, Dd};
use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

pub const SERIES_RADIUS: f64 = 8.5;
pub const MAX_ARG: f64 = 1.0e4;

/// Ai(0) and -Ai'(0) as double-double pairs.
const C1: Dd = Dd::new(0.355_028_053_887_817_2, 2.052_336_324_362_12e-17);
const C2: Dd = Dd::new(0.258_819_403_792_806_8, -2.522_243_111_610_832e-17);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AiryError {
    #[error("|z| = {0} exceeds the supported range {MAX_ARG}")]
    OutOfRange(f64),
    #[error("Ai overflows at z = {0}")]
    Overflow(Complex64),
    #[error("zero refinement for k = {0} did not converge")]
    NoConvergence(usize),
    #[error("invalid zero index {0}")]
    BadIndex(usize),
    #[error("large parameter {0} below the symbol validity threshold 10")]
    SmallParameter(f64),
    #[error("|w| = {0} outside the symbol domain |w| ≤ 1/2")]
    BadW(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AiryValue {
    pub z: Complex64,
    pub ai: Complex64,
    pub ai_prime: Complex64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn as_f64(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

fn omega() -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI / 3.0)
}

pub fn airy_ai(z: Complex64) -> Result<AiryValue, AiryError> {
    let r = z.norm();
    if !(r <= MAX_ARG) {
        return Err(AiryError::OutOfRange(r));
    }
    let (ai, ai_prime) = if r <= SERIES_RADIUS {
        series(z)
    } else if z.arg().abs() <= 2.0 * PI / 3.0 {
        asymptotic(z)?
    } else {
        // Ai(z) = -ω Ai(ωz) - ω̄ Ai(ω̄z); both rotated points sit in the
        // asymptotic sector.
        let w = omega();
        let wb = w.conj();
        let (a1, d1) = asymptotic(w * z)?;
        let (a2, d2) = asymptotic(wb * z)?;
        (-w * a1 - wb * a2, -w * w * d1 - wb * wb * d2)
    };
    Ok(AiryValue { z, ai, ai_prime })
}

/// Real-argument convenience wrapper.
pub fn ai_real(x: f64) -> Result<(f64, f64), AiryError> {
    if x.abs() <= SERIES_RADIUS {
        let (a, d) = series_real(x);
        return Ok((a, d));
    }
    let v = airy_ai(Complex64::new(x, 0.0))?;
    Ok((v.ai.re, v.ai_prime.re))
}

fn series(z: Complex64) -> (Complex64, Complex64) {
    let zd = CDd::from_c64(z);
    let z3 = zd * zd * zd;
    let mut f = CDd::from_dd(Dd::ONE);
    let mut g = zd;
    let mut fp = CDd::ZERO;
    let mut gp = CDd::from_dd(Dd::ONE);
    let mut tf = f;
    let mut tg = g;
    let mut tfp = CDd::from_dd(Dd::ZERO);
    let mut tgp = gp;
    let mut big = 1.0f64.max(z.norm());
    for k in 1..400 {
        let kf = k as f64;
        tf = div(tf * z3, (3.0 * kf - 1.0) * 3.0 * kf);
        tg = div(tg * z3, 3.0 * kf * (3.0 * kf + 1.0));
        tfp = if k == 1 {
            div(zd * zd, 2.0)
        } else {
            div(tfp * z3, (3.0 * kf - 1.0) * (3.0 * kf - 3.0))
        };
        tgp = div(tgp * z3, (3.0 * kf - 2.0) * 3.0 * kf);
        f = f + tf;
        g = g + tg;
        fp = fp + tfp;
        gp = gp + tgp;
        let m = mag(tf).max(mag(tg)).max(mag(tfp)).max(mag(tgp));
        big = big.max(m);
        if m < 1e-34 * big {
            break;
        }
    }
    let ai = f.scale(C1) - g.scale(C2);
    let aip = fp.scale(C1) - gp.scale(C2);
    (ai.to_c64(), aip.to_c64())
}

fn series_real(x: f64) -> (f64, f64) {
    let xd = Dd::from_f64(x);
    let x3 = xd * xd * xd;
    let mut f = Dd::ONE;
    let mut g = xd;
    let mut fp = Dd::ZERO;
    let mut gp = Dd::ONE;
    let (mut tf, mut tg, mut tfp, mut tgp) = (f, g, Dd::ZERO, gp);
    let mut big = 1.0f64.max(x.abs());
    for k in 1..400 {
        let kf = k as f64;
        tf = (tf * x3).div_f64((3.0 * kf - 1.0) * 3.0 * kf);
        tg = (tg * x3).div_f64(3.0 * kf * (3.0 * kf + 1.0));
        tfp = if k == 1 {
            (xd * xd).div_f64(2.0)
        } else {
            (tfp * x3).div_f64((3.0 * kf - 1.0) * (3.0 * kf - 3.0))
        };
        tgp = (tgp * x3).div_f64((3.0 * kf - 2.0) * 3.0 * kf);
        f = f + tf;
        g = g + tg;
        fp = fp + tfp;
        gp = gp + tgp;
        let m = tf.hi.abs().max(tg.hi.abs()).max(tfp.hi.abs()).max(tgp.hi.abs());
        big = big.max(m);
        if m < 1e-34 * big {
            break;
        }
    }
    ((f * C1 - g * C2).to_f64(), (fp * C1 - gp * C2).to_f64())
}

fn div(a: CDd, s: f64) -> CDd {
    CDd { re: a.re.div_f64(s), im: a.im.div_f64(s) }
}

fn mag(a: CDd) -> f64 {
    a.re.hi.abs().max(a.im.hi.abs())
}

/// Coefficients u_k of the Airy asymptotic expansion (u_0 = 1).
pub fn u_coeff(k: usize) -> f64 {
    let mut u = 1.0;
    for j in 1..=k {
        let j = j as f64;
        u *= (6.0 * j - 5.0) * (6.0 * j - 3.0) * (6.0 * j - 1.0) / ((2.0 * j - 1.0) * 216.0 * j);
    }
    u
}

fn asymptotic(z: Complex64) -> Result<(Complex64, Complex64), AiryError> {
    let sq = z.sqrt();
    let zeta = 2.0 / 3.0 * z * sq;
    if -zeta.re > 700.0 {
        return Err(AiryError::Overflow(z));
    }
    let q = sq.sqrt();
    let inv = 1.0 / zeta;
    let mut su = Complex64::new(1.0, 0.0);
    let mut sv = Complex64::new(1.0, 0.0);
    let mut u = 1.0;
    let mut p = Complex64::new(1.0, 0.0);
    let mut last = f64::INFINITY;
    for k in 1..200 {
        let kf = k as f64;
        u *= (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0) / ((2.0 * kf - 1.0) * 216.0 * kf);
        let v = -(6.0 * kf + 1.0) / (6.0 * kf - 1.0) * u;
        p *= -inv;
        let tu = u * p;
        let size = tu.norm();
        if size > last {
            break;
        }
        last = size;
        su += tu;
        sv += v * p;
        if size < 1e-17 {
            break;
        }
    }
    let e = (-zeta).exp();
    let c = 0.5 / PI.sqrt();
    Ok((c * e / q * su, -c * q * e * sv))
}

/// A±(z), normalised so that A⁺ + A⁻ = Ai:
/// A⁻(z) = -ω Ai(ωz), A⁺(z) = -ω̄ Ai(ω̄z), ω = e^{2πi/3}.
pub fn airy_branch(sign: Sign, z: Complex64) -> Result<Complex64, AiryError> {
    let w = match sign {
        Sign::Minus => omega(),
        Sign::Plus => omega().conj(),
    };
    Ok(-w * airy_ai(w * z)?.ai)
}

/// k-th zero of Ai on the negative axis, returned as ω_k > 0.
pub fn airy_zero(k: usize) -> Result<f64, AiryError> {
    if k == 0 || k > 10_000 {
        return Err(AiryError::BadIndex(k));
    }
    let t = 3.0 * PI * (4.0 * k as f64 - 1.0) / 8.0;
    let t2 = t.powi(-2);
    let guess = t.powf(2.0 / 3.0) * (1.0 + 5.0 / 48.0 * t2 - 5.0 / 36.0 * t2 * t2);
    let f = |x: f64| -> Result<f64, AiryError> { Ok(ai_real(-x)?.0) };
    let half = 0.3 * PI / guess.sqrt();
    let (mut lo, mut hi) = (guess - half, guess + half);
    let (mut flo, fhi) = (f(lo)?, f(hi)?);
    if flo * fhi > 0.0 {
        return Err(AiryError::NoConvergence(k));
    }
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..50 {
        let (a, d) = ai_real(-x)?;
        if d == 0.0 {
            break;
        }
        let dx = a / d;
        x += dx;
        if dx.abs() <= 4.0 * f64::EPSILON * x {
            return Ok(x);
        }
    }
    Err(AiryError::NoConvergence(k))
}

/// Truncated large-parameter expansion of A±(-(ηλ)^{2/3}(1-w)) with the
/// phase e^{∓(2/3)iηλ(1-w)^{3/2}} and the power (ηλ)^{-1/6} removed:
///
/// a±(w) = prefactor · Σ_j coefficients[j] (ηλ)^{-j}.
#[derive(Clone, Debug, PartialEq)]
pub struct AirySymbolExpansion {
    pub branch: Sign,
    pub w: f64,
    pub coefficients: Vec<Complex64>,
    pub order: usize,
    pub large_parameter: f64,
    pub prefactor: f64,
}

impl AirySymbolExpansion {
    pub fn value(&self) -> Complex64 {
        let inv = 1.0 / self.large_parameter;
        let mut s = Complex64::new(0.0, 0.0);
        for c in self.coefficients.iter().rev() {
            s = s * inv + c;
        }
        self.prefactor * s
    }
}

pub fn airy_symbol(sign: Sign, w: f64, eta_lambda: f64, order: usize) -> Result<AirySymbolExpansion, AiryError> {
    if !(eta_lambda >= 10.0) {
        return Err(AiryError::SmallParameter(eta_lambda));
    }
    if !(w.abs() <= 0.5) {
        return Err(AiryError::BadW(w));
    }
    Ok(symbol_unchecked(sign, w, eta_lambda, order))
}

pub(crate) fn symbol_unchecked(sign: Sign, w: f64, eta_lambda: f64, order: usize) -> AirySymbolExpansion {
    let s = sign.as_f64();
    let one_w = 1.0 - w;
    let lead = Complex64::from_polar(1.0, s * PI / 4.0);
    let step = Complex64::new(0.0, s * 1.5) * one_w.powf(-1.5);
    let mut c = lead;
    let mut coefficients = Vec::with_capacity(order + 1);
    for j in 0..=order {
        if j > 0 {
            c *= step;
        }
        coefficients.push(c * u_coeff(j));
    }
    AirySymbolExpansion {
        branch: sign,
        w,
        coefficients,
        order,
        large_parameter: eta_lambda,
        prefactor: one_w.powf(-0.25) / (2.0 * PI.sqrt()),
    }
}

/// Value of a±(w, ηλ) truncated at `order`.
pub fn symbol_a(sign: Sign, w: f64, eta_lambda: f64, order: usize) -> Complex64 {
    symbol_unchecked(sign, w, eta_lambda, order).value()
}

/// b±(w, ηλ) = κ(w) / a±(w, ηλ).
pub fn symbol_b(sign: Sign, w: f64, eta_lambda: f64, order: usize, kappa: &Kappa) -> Complex64 {
    let k = kappa.eval(w);
    if k == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    k / symbol_a(sign, w, eta_lambda, order)
}

/// Direct evaluation of the quantity the symbol expands, for comparisons.
pub fn symbol_reference(sign: Sign, w: f64, eta_lambda: f64) -> Result<Complex64, AiryError> {
    let x = eta_lambda.powf(2.0 / 3.0) * (1.0 - w);
    let v = airy_branch(sign, Complex64::new(-x, 0.0))?;
    let phase = sign.as_f64() * 2.0 / 3.0 * eta_lambda * (1.0 - w).powf(1.5);
    Ok(v * Complex64::from_polar(eta_lambda.powf(1.0 / 6.0), phase))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn value_at_origin() {
        let v = airy_ai(c(0.0, 0.0)).unwrap();
        assert!((v.ai.re - 0.355_028_053_887_817_2).abs() < 1e-16);
        assert!((v.ai_prime.re + 0.258_819_403_792_806_8).abs() < 1e-16);
    }

    #[test]
    fn mpmath_references() {
        let cases = [
            (c(6.0, 0.0), c(9.947_694_360_252_889_6e-6, 0.0)),
            (c(-6.0, 0.0), c(-0.329_145_173_629_823_11, 0.0)),
            (c(3.0, 5.0), c(-0.140_049_789_345_737, 0.029_748_277_034_204)),
        ];
        for (z, want) in cases {
            let got = airy_ai(z).unwrap().ai;
            assert!((got - want).norm() <= 1e-12 * want.norm().max(1e-300), "{z}: {got} vs {want}");
        }
    }

    #[test]
    fn series_and_asymptotic_agree_past_switch() {
        for i in 0..24 {
            let th = PI * (i as f64) / 12.0 - PI;
            let z = Complex64::from_polar(8.7, th);
            let s = series(z).0;
            let a = airy_ai(z).unwrap().ai;
            let scale = s.norm().max(1e-6);
            assert!((s - a).norm() / scale < 1e-12, "th={th} {s} {a}");
        }
    }

    #[test]
    fn overflow_reported() {
        assert!(matches!(airy_ai(c(150.0, 0.0)).map(|v| v.ai), Ok(_)));
        assert!(matches!(airy_ai(c(-90.0, 50.0)), Ok(_)));
        let e = airy_ai(Complex64::from_polar(120.0, 2.0 * PI / 3.0 - 0.01));
        assert!(matches!(e, Err(AiryError::Overflow(_))));
        assert!(matches!(airy_ai(c(2e4, 0.0)), Err(AiryError::OutOfRange(_))));
    }

    #[test]
    fn first_zeros() {
        let want = [2.338_107_410_459_767, 4.087_949_444_130_970_6];
        for (k, w) in want.iter().enumerate() {
            assert!((airy_zero(k + 1).unwrap() - w).abs() < 1e-13);
        }
        assert!((airy_zero(10).unwrap() - 12.828_776_752_865_757).abs() < 1e-12);
    }

    #[test]
    fn branch_at_origin_conjugate() {
        let p = airy_branch(Sign::Plus, c(0.0, 0.0)).unwrap();
        let m = airy_branch(Sign::Minus, c(0.0, 0.0)).unwrap();
        assert!((p - m.conj()).norm() < 1e-16);
    }

    #[test]
    fn symbol_leading_term() {
        for s in [Sign::Plus, Sign::Minus] {
            let e = airy_symbol(s, 0.0, 100.0, 0).unwrap();
            assert!((e.coefficients[0].norm() - 1.0).abs() < 1e-15);
        }
        assert!(airy_symbol(Sign::Plus, 0.0, 5.0, 2).is_err());
    }
}
