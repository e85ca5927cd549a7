//! Sampled profiles in the class S_K(λ), the seed, the boundary operators
//! I± and J±, translations and the reflected profiles ρⁿ.
//!
//! Profiles live on a uniform grid z_i = (i0 + i)/m with m points per unit,
//! so integer translations are exact re-indexings. I± and J± are Fourier
//! multipliers in ξ = ηλw; the default backend applies them with one FFT
//! pass, the "panel" backend with Gauss-Legendre panels in w.

use crate::airy::{symbol_a, Sign};
use crate::cutoff::{bump, smoothstep, Kappa, BUMP_MASS};
use crate::quad::composite;
use crate::scale::ScaleParams;
use crate::fft;
use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

type C64 = Complex64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SymbolError {
    #[error("c0 = {0} outside (0, 3/8]")]
    BadC0(f64),
    #[error("lambda = {0} below 10")]
    SmallLambda(f64),
    #[error("grid spacing {spacing} too coarse for lambda = {lambda} (need <= 1/(10 lambda))")]
    CoarseGrid { spacing: f64, lambda: f64 },
    #[error("eta*lambda = {0} below 50")]
    SmallEtaLambda(f64),
    #[error("reflection count {n} violates lambda/n >= h^-eps ({bound})")]
    Validity { n: usize, bound: f64 },
    #[error("quadrature did not converge (estimate {0:e})")]
    Quadrature(f64),
    #[error("unknown {kind} strategy '{name}'")]
    Unknown { kind: &'static str, name: String },
    #[error("profiles live on different grids")]
    GridMismatch,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampledProfile {
    pub i0: i64,
    pub per_unit: usize,
    pub values: Vec<C64>,
    pub lambda: f64,
    /// Nominal support K = [k-, k+].
    pub support: (f64, f64),
}

impl SampledProfile {
    pub fn spacing(&self) -> f64 {
        1.0 / self.per_unit as f64
    }

    pub fn z(&self, i: usize) -> f64 {
        (self.i0 + i as i64) as f64 / self.per_unit as f64
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn window(&self) -> (f64, f64) {
        (self.z(0), self.z(self.len().saturating_sub(1)))
    }

    /// Value at grid index `j` in absolute numbering, zero off the window.
    pub fn at_index(&self, j: i64) -> C64 {
        let k = j - self.i0;
        if k < 0 || k >= self.len() as i64 {
            C64::new(0.0, 0.0)
        } else {
            self.values[k as usize]
        }
    }

    /// Six-point Lagrange interpolation.
    pub fn value_at(&self, z: f64) -> C64 {
        let u = z * self.per_unit as f64;
        let base = u.floor() as i64;
        let frac = u - base as f64;
        if frac == 0.0 {
            return self.at_index(base);
        }
        let nodes = [-2.0, -1.0, 0.0, 1.0, 2.0, 3.0];
        let mut s = C64::new(0.0, 0.0);
        for (k, &xk) in nodes.iter().enumerate() {
            let mut l = 1.0;
            for (m, &xm) in nodes.iter().enumerate() {
                if m != k {
                    l *= (frac - xm) / (xk - xm);
                }
            }
            s += self.at_index(base + xk as i64) * l;
        }
        s
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn integral(&self) -> C64 {
        self.values.iter().sum::<C64>() * self.spacing()
    }

    /// Same profile on a window widened by `units` on each side.
    pub fn padded(&self, units: f64) -> Self {
        let k = (units * self.per_unit as f64).ceil() as usize;
        let mut values = vec![C64::new(0.0, 0.0); self.len() + 2 * k];
        values[k..k + self.len()].copy_from_slice(&self.values);
        SampledProfile { i0: self.i0 - k as i64, values, ..self.clone() }
    }

    pub fn scaled(&self, s: C64) -> Self {
        SampledProfile { values: self.values.iter().map(|v| v * s).collect(), ..self.clone() }
    }

    /// Pointwise combination on the union of both windows.
    pub fn combine(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Result<Self, SymbolError> {
        if self.per_unit != other.per_unit {
            return Err(SymbolError::GridMismatch);
        }
        let lo = self.i0.min(other.i0);
        let hi = (self.i0 + self.len() as i64).max(other.i0 + other.len() as i64);
        let values = (lo..hi).map(|j| f(self.at_index(j), other.at_index(j))).collect();
        Ok(SampledProfile { i0: lo, values, ..self.clone() })
    }

    pub fn sub(&self, other: &Self) -> Result<Self, SymbolError> {
        self.combine(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Self) -> Result<Self, SymbolError> {
        self.combine(other, |a, b| a + b)
    }

    /// Sup of |ϱ| outside [lo, hi].
    pub fn sup_outside(&self, lo: f64, hi: f64) -> f64 {
        (0..self.len())
            .filter(|&i| {
                let z = self.z(i);
                z < lo || z > hi
            })
            .map(|i| self.values[i].norm())
            .fold(0.0, f64::max)
    }

    /// Fraction of ∫|ϱ|² lying outside [lo, hi].
    pub fn exterior_mass(&self, lo: f64, hi: f64) -> f64 {
        let mut out = 0.0;
        let mut all = 0.0;
        for i in 0..self.len() {
            let m = self.values[i].norm_sqr();
            all += m;
            let z = self.z(i);
            if z < lo || z > hi {
                out += m;
            }
        }
        if all == 0.0 {
            0.0
        } else {
            out / all
        }
    }

    /// Finite-difference sup of |∂^α ϱ|.
    pub fn derivative_sup(&self, alpha: usize) -> f64 {
        let mut d = self.values.clone();
        for _ in 0..alpha {
            d = d.windows(2).map(|w| (w[1] - w[0]) * self.per_unit as f64).collect();
        }
        d.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// (z, Re, Im) rows for CSV export.
    pub fn rows(&self) -> Vec<[f64; 3]> {
        (0..self.len()).map(|i| [self.z(i), self.values[i].re, self.values[i].im]).collect()
    }
}

/// T_k ϱ(z) = ϱ(z + k): the window moves by -k.
pub fn translate(k: i64, p: &SampledProfile) -> SampledProfile {
    let m = p.per_unit as i64;
    SampledProfile {
        i0: p.i0 - k * m,
        support: (p.support.0 - k as f64, p.support.1 - k as f64),
        ..p.clone()
    }
}

/// Shape of the unmollified seed on K₀ = [-c₀, c₀].
pub trait SeedShape: Send + Sync {
    fn name(&self) -> &'static str;
    fn eval(&self, z: f64, c0: f64) -> f64;

    /// (ϱ̃ * k_λ)(z) with k_λ(z) = λk(λz).
    fn mollified(&self, z: f64, c0: f64, lambda: f64, nodes: &(Vec<f64>, Vec<f64>)) -> f64 {
        let (u, w) = nodes;
        u.iter().zip(w).map(|(&u, &w)| w * self.eval(z - u / lambda, c0)).sum()
    }
}

/// 1 on |z| ≤ c₀/2, smooth falloff to 0 at |z| = c₀.
pub struct Plateau;

impl SeedShape for Plateau {
    fn name(&self) -> &'static str {
        "plateau"
    }

    fn eval(&self, z: f64, c0: f64) -> f64 {
        let half = 0.5 * c0;
        1.0 - smoothstep((z.abs() - half) / half)
    }
}

/// exp(β - β/(1 - (z/c₀)²)) on K₀. Larger β concentrates the spectrum
/// inside the flat part of κ.
pub struct Bump {
    pub beta: f64,
}

impl Default for Bump {
    fn default() -> Self {
        Bump { beta: 4.0 }
    }
}

impl SeedShape for Bump {
    fn name(&self) -> &'static str {
        "bump"
    }

    fn eval(&self, z: f64, c0: f64) -> f64 {
        let u = z / c0;
        if u.abs() >= 1.0 {
            0.0
        } else {
            (self.beta - self.beta / (1.0 - u * u)).exp()
        }
    }
}

/// Indicator of K₀; all smoothing comes from the mollifier.
pub struct Indicator;

impl SeedShape for Indicator {
    fn name(&self) -> &'static str {
        "indicator"
    }

    fn eval(&self, z: f64, c0: f64) -> f64 {
        if z.abs() <= c0 {
            1.0
        } else {
            0.0
        }
    }

    fn mollified(&self, z: f64, c0: f64, lambda: f64, _nodes: &(Vec<f64>, Vec<f64>)) -> f64 {
        let lo = (lambda * (z - c0)).max(-1.0);
        let hi = (lambda * (z + c0)).min(1.0);
        if hi <= lo {
            return 0.0;
        }
        let (x, w) = composite(lo, hi, 4, 16);
        x.iter().zip(&w).map(|(&u, &w)| w * bump(u)).sum::<f64>() / BUMP_MASS
    }
}

pub fn seed_registry() -> Vec<Box<dyn SeedShape>> {
    vec![Box::new(Bump::default()), Box::new(Plateau), Box::new(Indicator)]
}

pub fn seed_shape(name: &str) -> Result<Box<dyn SeedShape>, SymbolError> {
    seed_registry()
        .into_iter()
        .find(|s| s.name() == name)
        .ok_or_else(|| SymbolError::Unknown { kind: "seed", name: name.to_string() })
}

/// Window margin beyond K₀ on each side of a seed.
pub const SEED_MARGIN: f64 = 3.0;

pub fn grid_per_unit(c0: f64, lambda: f64) -> usize {
    ((10.0 * lambda).ceil() as usize).max((50.0 / c0).ceil() as usize)
}

pub fn make_seed(c0: f64, lambda: f64) -> Result<SampledProfile, SymbolError> {
    make_seed_with(&Bump::default(), c0, lambda, grid_per_unit(c0, lambda))
}

pub fn make_seed_with(shape: &dyn SeedShape, c0: f64, lambda: f64, per_unit: usize) -> Result<SampledProfile, SymbolError> {
    if !(c0 > 0.0 && c0 <= 0.375) {
        return Err(SymbolError::BadC0(c0));
    }
    if !(lambda >= 10.0) {
        return Err(SymbolError::SmallLambda(lambda));
    }
    let spacing = 1.0 / per_unit as f64;
    if spacing > 1.0 / (10.0 * lambda) * (1.0 + 1e-12) {
        return Err(SymbolError::CoarseGrid { spacing, lambda });
    }
    let (u, mut w) = composite(-1.0, 1.0, 8, 16);
    for (wi, ui) in w.iter_mut().zip(&u) {
        *wi *= bump(*ui);
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    let nodes = (u, w);
    let reach = ((c0 + SEED_MARGIN) * per_unit as f64).ceil() as i64;
    let values = (-reach..=reach)
        .map(|j| {
            let z = j as f64 * spacing;
            C64::new(shape.mollified(z, c0, lambda, &nodes), 0.0)
        })
        .collect();
    Ok(SampledProfile { i0: -reach, per_unit, values, lambda, support: (-c0, c0) })
}

/// Applies a Fourier multiplier m(w), ξ = ηλw, and relabels the output
/// window by `shift` units.
pub trait OperatorBackend: Send + Sync {
    fn name(&self) -> &'static str;
    fn apply(&self, p: &SampledProfile, shift: i64, eta_lambda: f64, cutoff: f64, mult: &dyn Fn(f64) -> C64) -> SampledProfile;
}

/// Zero padding on each side of the FFT buffer, in z units.
pub const FFT_PAD: f64 = 1.75;

pub struct FftBackend;

impl OperatorBackend for FftBackend {
    fn name(&self) -> &'static str {
        "fft"
    }

    fn apply(&self, p: &SampledProfile, shift: i64, eta_lambda: f64, cutoff: f64, mult: &dyn Fn(f64) -> C64) -> SampledProfile {
        let m = p.per_unit;
        let pad = ((FFT_PAD.max(shift.unsigned_abs() as f64 + 0.5)) * m as f64).ceil() as usize;
        let len = (p.len() + 2 * pad).next_power_of_two();
        let mut buf = vec![C64::new(0.0, 0.0); len];
        buf[pad..pad + p.len()].copy_from_slice(&p.values);
        fft::forward(len).process(&mut buf);
        let dxi = 2.0 * PI * m as f64 / len as f64;
        for (k, b) in buf.iter_mut().enumerate() {
            let ks = if k <= len / 2 { k as f64 } else { k as f64 - len as f64 };
            let w = ks * dxi / eta_lambda;
            *b = if w.abs() >= cutoff { C64::new(0.0, 0.0) } else { *b * mult(w) / len as f64 };
        }
        fft::inverse(len).process(&mut buf);
        let start = pad as i64 + shift * m as i64;
        let values = (0..p.len()).map(|i| buf[(start + i as i64) as usize]).collect();
        let s = shift as f64;
        SampledProfile {
            i0: p.i0 + shift * m as i64,
            values,
            support: (p.support.0 + s, p.support.1 + s),
            ..p.clone()
        }
    }
}

/// Gauss-Legendre panels in w of width ≤ π/(ηλ), with direct sums in z.
pub struct PanelBackend {
    pub nodes: usize,
}

impl Default for PanelBackend {
    fn default() -> Self {
        PanelBackend { nodes: 20 }
    }
}

impl OperatorBackend for PanelBackend {
    fn name(&self) -> &'static str {
        "panel"
    }

    fn apply(&self, p: &SampledProfile, shift: i64, eta_lambda: f64, cutoff: f64, mult: &dyn Fn(f64) -> C64) -> SampledProfile {
        let cells = ((2.0 * cutoff * eta_lambda / PI).ceil() as usize).max(1);
        let (ws, wts) = composite(-cutoff, cutoff, cells, self.nodes);
        let dz = p.spacing();
        let s = shift as f64;
        let mut out = vec![C64::new(0.0, 0.0); p.len()];
        for (&w, &wt) in ws.iter().zip(&wts) {
            let xi = eta_lambda * w;
            // ϱ̂(ξ) by the trapezoid sum, then the inverse transform at z + shift
            let step = C64::from_polar(1.0, -xi * dz);
            let mut e = C64::from_polar(1.0, -xi * p.z(0));
            let mut hat = C64::new(0.0, 0.0);
            for v in &p.values {
                hat += v * e;
                e *= step;
            }
            let c = hat * dz * mult(w) * (wt * eta_lambda / (2.0 * PI));
            let mut e = C64::from_polar(1.0, xi * (p.z(0) + s));
            let step = step.conj();
            for o in out.iter_mut() {
                *o += c * e;
                e *= step;
            }
        }
        SampledProfile {
            i0: p.i0 + shift * p.per_unit as i64,
            values: out,
            support: (p.support.0 + s, p.support.1 + s),
            ..p.clone()
        }
    }
}

pub fn backend_registry() -> Vec<Box<dyn OperatorBackend>> {
    vec![Box::new(FftBackend), Box::new(PanelBackend::default())]
}

pub fn backend(name: &str) -> Result<Box<dyn OperatorBackend>, SymbolError> {
    backend_registry()
        .into_iter()
        .find(|b| b.name() == name)
        .ok_or_else(|| SymbolError::Unknown { kind: "backend", name: name.to_string() })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymbolOptions {
    pub order: usize,
    pub kappa: Kappa,
}

impl Default for SymbolOptions {
    fn default() -> Self {
        SymbolOptions { order: 3, kappa: Kappa::default() }
    }
}

/// (2/3)((1-w)^{3/2} - 1)
fn airy_phase(w: f64) -> f64 {
    2.0 / 3.0 * ((1.0 - w).powf(1.5) - 1.0)
}

/// Multiplier of I±: e^{∓iηλ(2/3)((1-w)^{3/2}-1)} κ a±.
pub fn i_multiplier(sign: Sign, w: f64, eta_lambda: f64, opts: &SymbolOptions) -> C64 {
    let k = opts.kappa.eval(w);
    if k == 0.0 {
        return C64::new(0.0, 0.0);
    }
    let ph = -sign.as_f64() * eta_lambda * airy_phase(w);
    C64::from_polar(k, ph) * symbol_a(sign, w, eta_lambda, opts.order)
}

/// Multiplier of J±: e^{±iηλ(2/3)((1-w)^{3/2}-1)} κ / a±.
pub fn j_multiplier(sign: Sign, w: f64, eta_lambda: f64, opts: &SymbolOptions) -> C64 {
    let k = opts.kappa.eval(w);
    if k == 0.0 {
        return C64::new(0.0, 0.0);
    }
    let ph = sign.as_f64() * eta_lambda * airy_phase(w);
    C64::from_polar(k, ph) / symbol_a(sign, w, eta_lambda, opts.order)
}

/// One reflection step -T₁J₊I₋T₁ as a multiplier:
/// -e^{iηλ(2w + (4/3)((1-w)^{3/2}-1))} κ² a₋/a₊.
pub fn step_multiplier(w: f64, eta_lambda: f64, opts: &SymbolOptions) -> C64 {
    let k = opts.kappa.eval(w);
    if k == 0.0 {
        return C64::new(0.0, 0.0);
    }
    let ph = eta_lambda * (2.0 * w + 2.0 * airy_phase(w));
    let r = symbol_a(Sign::Minus, w, eta_lambda, opts.order) / symbol_a(Sign::Plus, w, eta_lambda, opts.order);
    -C64::from_polar(k * k, ph) * r
}

fn check_eta_lambda(eta: f64, lambda: f64) -> Result<f64, SymbolError> {
    let el = eta * lambda;
    if !(el >= 50.0) {
        return Err(SymbolError::SmallEtaLambda(el));
    }
    Ok(el)
}

/// Nominal support shift of I± (∓1).
pub fn i_shift(sign: Sign) -> i64 {
    match sign {
        Sign::Plus => -1,
        Sign::Minus => 1,
    }
}

pub fn op_i(sign: Sign, p: &SampledProfile, eta: f64) -> Result<SampledProfile, SymbolError> {
    op_i_with(&FftBackend, &SymbolOptions::default(), sign, p, eta)
}

pub fn op_j(sign: Sign, p: &SampledProfile, eta: f64) -> Result<SampledProfile, SymbolError> {
    op_j_with(&FftBackend, &SymbolOptions::default(), sign, p, eta)
}

pub fn op_i_with(
    be: &dyn OperatorBackend,
    opts: &SymbolOptions,
    sign: Sign,
    p: &SampledProfile,
    eta: f64,
) -> Result<SampledProfile, SymbolError> {
    let el = check_eta_lambda(eta, p.lambda)?;
    Ok(be.apply(p, i_shift(sign), el, opts.kappa.outer, &|w| i_multiplier(sign, w, el, opts)))
}

pub fn op_j_with(
    be: &dyn OperatorBackend,
    opts: &SymbolOptions,
    sign: Sign,
    p: &SampledProfile,
    eta: f64,
) -> Result<SampledProfile, SymbolError> {
    let el = check_eta_lambda(eta, p.lambda)?;
    Ok(be.apply(p, -i_shift(sign), el, opts.kappa.outer, &|w| j_multiplier(sign, w, el, opts)))
}

fn check_validity(n: usize, lambda: f64, scale: &ScaleParams) -> Result<(), SymbolError> {
    if n == 0 {
        return Ok(());
    }
    let bound = scale.h.powf(-scale.eps);
    if scale.enforce_validity && (n > scale.n_max() || lambda / (n as f64) < bound * (1.0 - 1e-12)) {
        return Err(SymbolError::Validity { n, bound });
    }
    Ok(())
}

/// ρⁿ = (-1)ⁿ (T₁J₊I₋T₁)ⁿ ϱ by iterating the operators.
pub fn reflect_n(p: &SampledProfile, eta: f64, n: usize, scale: &ScaleParams) -> Result<SampledProfile, SymbolError> {
    check_validity(n, p.lambda, scale)?;
    if n == 0 {
        return Ok(p.clone());
    }
    let mut q = p.padded(reflection_spread(n, &SymbolOptions::default()));
    for _ in 0..n {
        let a = translate(1, &q);
        let b = op_i(Sign::Minus, &a, eta)?;
        let c = op_j(Sign::Plus, &b, eta)?;
        q = translate(1, &c).scaled(C64::new(-1.0, 0.0));
    }
    q.lambda = p.lambda / n.max(1) as f64;
    Ok(q)
}

/// Extra z-room on each side for n reflections. The step phase is w²/2 + O(w³)
/// so content at frequency w drifts by about n·w; tails at the cutoff edge
/// reach n·κ but sit below 1e-10 of the peak past about n/5.
pub fn reflection_spread(n: usize, opts: &SymbolOptions) -> f64 {
    if n == 0 {
        0.0
    } else {
        1.0 + 0.8 * opts.kappa.outer * n as f64
    }
}

/// ρⁿ via a single FFT pass with the n-th power of the step multiplier.
pub fn reflect_fft(p: &SampledProfile, eta: f64, n: usize, opts: &SymbolOptions) -> Result<SampledProfile, SymbolError> {
    if n == 0 {
        return Ok(p.clone());
    }
    let el = check_eta_lambda(eta, p.lambda)?;
    let p = p.padded(reflection_spread(n, opts));
    let mut q = FftBackend.apply(&p, 0, el, opts.kappa.outer, &|w| step_multiplier(w, el, opts).powu(n as u32));
    q.lambda = p.lambda / n as f64;
    Ok(q)
}

/// Values of (F_{ηλ})^{*n} on z = k·dz, |k| ≤ half_len.
#[derive(Clone, Debug, PartialEq)]
pub struct ReflectionKernel {
    pub n: usize,
    pub eta_lambda: f64,
    pub spacing: f64,
    pub values: Vec<C64>,
    pub w_nodes: usize,
}

impl ReflectionKernel {
    /// Kernel on |z| ≤ extent.
    pub fn new(n: usize, eta_lambda: f64, per_unit: usize, extent: f64, opts: &SymbolOptions) -> Self {
        let spacing = 1.0 / per_unit as f64;
        let half = (extent * per_unit as f64).ceil() as i64;
        let cut = opts.kappa.outer;
        let cells = ((2.0 * cut * eta_lambda / PI).ceil() as usize).max(1);
        let (ws, wts) = composite(-cut, cut, cells, 12);
        let mut values = vec![C64::new(0.0, 0.0); (2 * half + 1) as usize];
        for (&w, &wt) in ws.iter().zip(&wts) {
            let c = step_multiplier(w, eta_lambda, opts).powu(n as u32) * (wt * eta_lambda / (2.0 * PI));
            if c == C64::new(0.0, 0.0) {
                continue;
            }
            let xi = eta_lambda * w;
            let step = C64::from_polar(1.0, xi * spacing);
            let mut e = C64::from_polar(1.0, -xi * half as f64 * spacing);
            for (k, v) in values.iter_mut().enumerate() {
                // restart the recurrence now and then to keep rounding in check
                if k % 512 == 0 {
                    e = C64::from_polar(1.0, xi * (k as f64 - half as f64) * spacing);
                }
                *v += c * e;
                e *= step;
            }
        }
        ReflectionKernel { n, eta_lambda, spacing, values, w_nodes: ws.len() }
    }

    pub fn half_len(&self) -> usize {
        self.values.len() / 2
    }

    /// ∫F(z - z')ϱ(z')dz' on the profile's own window (linear convolution).
    pub fn convolve(&self, p: &SampledProfile) -> SampledProfile {
        let h = self.half_len();
        let len = (p.len() + self.values.len()).next_power_of_two();
        let mut a = vec![C64::new(0.0, 0.0); len];
        let mut b = vec![C64::new(0.0, 0.0); len];
        a[..p.len()].copy_from_slice(&p.values);
        b[..self.values.len()].copy_from_slice(&self.values);
        let fw = fft::forward(len);
        fw.process(&mut a);
        fw.process(&mut b);
        for (x, y) in a.iter_mut().zip(&b) {
            *x *= y;
        }
        fft::inverse(len).process(&mut a);
        let s = self.spacing / len as f64;
        let out = (0..p.len()).map(|j| a[j + h] * s).collect();
        SampledProfile { values: out, lambda: p.lambda / self.n.max(1) as f64, ..p.clone() }
    }
}

/// ρⁿ through the kernel path.
pub fn reflect_kernel(p: &SampledProfile, eta: f64, n: usize, opts: &SymbolOptions) -> Result<SampledProfile, SymbolError> {
    if n == 0 {
        return Ok(p.clone());
    }
    let el = check_eta_lambda(eta, p.lambda)?;
    let p = p.padded(reflection_spread(n, opts));
    let (lo, hi) = p.window();
    Ok(ReflectionKernel::new(n, el, p.per_unit, hi - lo, opts).convolve(&p))
}

/// Neighbourhood of K used for the exterior test.
pub const CLASS_DELTA: f64 = 0.25;

#[derive(Clone, Debug, PartialEq)]
pub struct ClassCertificate {
    pub lambda: f64,
    /// Measured sup|∂^α ϱ|, α = 0..4.
    pub c_alpha: [f64; 5],
    /// sup outside K + δ relative to the overall sup.
    pub exterior: f64,
    pub delta: f64,
    pub exterior_ok: bool,
    /// C_α ≤ λ^{α/4}·C₀·10^α; a single profile cannot certify λ-uniformity.
    pub derivative_ok: bool,
}

impl ClassCertificate {
    pub fn passes(&self) -> bool {
        self.exterior_ok && self.derivative_ok
    }
}

pub fn class_check(p: &SampledProfile, k: (f64, f64), lambda: f64) -> ClassCertificate {
    let mut c_alpha = [0.0; 5];
    for (a, c) in c_alpha.iter_mut().enumerate() {
        *c = p.derivative_sup(a);
    }
    let sup = c_alpha[0].max(f64::MIN_POSITIVE);
    let exterior = p.sup_outside(k.0 - CLASS_DELTA, k.1 + CLASS_DELTA) / sup;
    let derivative_ok = (1..5).all(|a| c_alpha[a] <= sup * 10f64.powi(a as i32) * lambda.powf(a as f64 / 4.0));
    ClassCertificate {
        lambda,
        c_alpha,
        exterior,
        delta: CLASS_DELTA,
        exterior_ok: exterior <= lambda.powi(-3),
        derivative_ok,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FamilyCertificate {
    pub certificates: Vec<ClassCertificate>,
    /// Fitted log-log slope of C_α against λ.
    pub c_alpha_slopes: [f64; 5],
    pub exterior_slope: f64,
    pub bounded_ok: bool,
    pub decay_ok: bool,
}

/// Least-squares slope of log y against log x; -∞ when every y is zero.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x.iter().zip(y).filter(|(_, y)| **y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < x.len() {
        return if pts.is_empty() { f64::NEG_INFINITY } else { f64::NAN };
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Both class conditions over a λ-ladder of profiles.
pub fn class_family(profiles: &[SampledProfile], k: (f64, f64)) -> FamilyCertificate {
    let certificates: Vec<ClassCertificate> = profiles.iter().map(|p| class_check(p, k, p.lambda)).collect();
    let lam: Vec<f64> = certificates.iter().map(|c| c.lambda).collect();
    let mut c_alpha_slopes = [0.0; 5];
    for (a, s) in c_alpha_slopes.iter_mut().enumerate() {
        let ys: Vec<f64> = certificates.iter().map(|c| c.c_alpha[a]).collect();
        *s = loglog_slope(&lam, &ys);
    }
    let ext: Vec<f64> = certificates.iter().map(|c| c.exterior).collect();
    let exterior_slope = loglog_slope(&lam, &ext);
    FamilyCertificate {
        bounded_ok: c_alpha_slopes.iter().all(|s| *s <= 0.1),
        decay_ok: exterior_slope == f64::NEG_INFINITY
            || exterior_slope <= -3.0
            || certificates.iter().all(|c| c.exterior <= 1e-12),
        certificates,
        c_alpha_slopes,
        exterior_slope,
    }
}

/// Half-maximum width of the rising edge near z = -c₀.
pub fn edge_width(p: &SampledProfile) -> f64 {
    let peak = p.sup();
    let cross = |level: f64| {
        (1..p.len())
            .find(|&i| p.values[i].norm() >= level * peak)
            .map(|i| {
                let (a, b) = (p.values[i - 1].norm(), p.values[i].norm());
                p.z(i - 1) + (level * peak - a) / (b - a) * p.spacing()
            })
            .unwrap_or(f64::NAN)
    };
    cross(0.9) - cross(0.1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seed(lambda: f64) -> SampledProfile {
        make_seed(0.375, lambda).unwrap()
    }

    #[test]
    fn seed_mass_and_tail() {
        let p = seed(300.0);
        let mass = p.integral();
        let bump = crate::quad::integrate(|z| Bump::default().eval(z, 0.375), -0.375, 0.375, 64, 20);
        assert!((mass.re - bump).abs() < 1e-10, "{mass} {bump}");
        assert!(p.sup_outside(-0.375 - 2.0 / 300.0, 0.375 + 2.0 / 300.0) < 1e-8);
    }

    #[test]
    fn indicator_edge_width_scales() {
        let sh = Indicator;
        let w1 = edge_width(&make_seed_with(&sh, 0.375, 50.0, grid_per_unit(0.375, 50.0)).unwrap());
        let w2 = edge_width(&make_seed_with(&sh, 0.375, 500.0, grid_per_unit(0.375, 500.0)).unwrap());
        let r = w1 / w2;
        assert!((r / 10.0 - 1.0).abs() < 0.2, "ratio {r}");
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(make_seed(0.5, 100.0), Err(SymbolError::BadC0(_))));
        assert!(matches!(make_seed(0.3, 5.0), Err(SymbolError::SmallLambda(_))));
        assert!(matches!(
            make_seed_with(&Plateau, 0.3, 100.0, 500),
            Err(SymbolError::CoarseGrid { .. })
        ));
        assert!(seed_shape("nope").is_err() && backend("nope").is_err());
    }

    #[test]
    fn translate_roundtrip() {
        let p = seed(100.0);
        assert_eq!(translate(-1, &translate(1, &p)), p);
        let q = translate(1, &p);
        assert_eq!(q.value_at(-1.0), p.value_at(0.0));
        assert_eq!(q.support, (-1.375, -0.625));
    }

    #[test]
    fn i_plus_shifts_support_left() {
        let p = seed(200.0);
        let q = op_i(Sign::Plus, &p, 1.0).unwrap();
        assert_eq!(q.support, (-1.375, -0.625));
        let d = CLASS_DELTA;
        assert!(q.exterior_mass(-1.375 - d, -0.625 + d) <= 1e-6);
        let r = op_i(Sign::Minus, &p, 1.0).unwrap();
        assert!(r.exterior_mass(0.625 - d, 1.375 + d) <= 1e-6);
    }

    #[test]
    fn fft_and_panel_agree() {
        let p = make_seed(0.375, 60.0).unwrap();
        let opts = SymbolOptions::default();
        for s in [Sign::Plus, Sign::Minus] {
            let a = op_i_with(&FftBackend, &opts, s, &p, 1.0).unwrap();
            let b = op_i_with(&PanelBackend::default(), &opts, s, &p, 1.0).unwrap();
            let d = a.sub(&b).unwrap().sup();
            assert!(d < 1e-6 * a.sup(), "{d}");
        }
    }

    #[test]
    fn commutes_with_translation() {
        let p = seed(100.0);
        let a = op_i(Sign::Minus, &translate(1, &p), 1.0).unwrap();
        let b = translate(1, &op_i(Sign::Minus, &p, 1.0).unwrap());
        assert!(a.sub(&b).unwrap().sup() < 1e-12);
    }

    #[test]
    fn reflection_paths_agree() {
        let p = seed(200.0);
        let sc = ScaleParams { enforce_validity: false, ..ScaleParams::default() };
        let it = reflect_n(&p, 1.0, 2, &sc).unwrap();
        let kn = reflect_kernel(&p, 1.0, 2, &SymbolOptions::default()).unwrap();
        let ff = reflect_fft(&p, 1.0, 2, &SymbolOptions::default()).unwrap();
        assert!(it.sub(&kn).unwrap().sup() < 1e-6);
        assert!(it.sub(&ff).unwrap().sup() < 1e-7);
        assert_eq!(reflect_n(&p, 1.0, 0, &sc).unwrap(), p);
    }

    #[test]
    fn gaussian_far_away_fails_exterior() {
        let p = seed(100.0);
        let g = SampledProfile {
            values: (0..p.len()).map(|i| C64::new((-(p.z(i) - 0.8).powi(2) * 50.0).exp(), 0.0)).collect(),
            ..p.clone()
        };
        assert!(!class_check(&g, (-0.375, 0.375), 100.0).exterior_ok);
        assert!(class_check(&p, (-0.375, 0.375), 100.0).passes());
    }
}
