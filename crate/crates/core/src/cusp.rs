//! Model cusp solutions uⁿ, their boundary traces, the lazy sum U_h and
//! localisation diagnostics.
//!
//! Everything is evaluated in rescaled variables
//!
//! s = (x − a)/a,  Y′ = (y − tc)/a^{3/2},  Z = t/(2ca^{1/2}),  ξ = a^{1/2}v,
//!
//! in which uⁿ = a^{1/2} ∫ Ψ(η) e^{iηλ(Y′ + 4n/3)} G(s, η) dη with
//! G(s, η) = ∫ ρⁿ(Z + v − 2n, η) e^{iηλ(vs + v³/3)} dv. The v-integral runs
//! over the profile grid and is evaluated for a whole s-grid at once by a
//! chirp transform; the η-integral is a trapezoid sum whose node spacing is
//! matched to the Y′ grid so that one FFT per s-row produces a row of u.

use crate::airy::Sign;
use crate::cutoff::{smoothstep, Kappa, Psi};
use crate::eikonal::LocalJet;
use crate::fft;
use crate::scale::ScaleParams;
use crate::spectrum::{trapezoid, Field2D};
use crate::symbols::{make_seed, op_i_with, reflect_fft, FftBackend, SampledProfile, SymbolError, SymbolOptions};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use thiserror::Error;

type C64 = Complex64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CuspError {
    #[error(transparent)]
    Symbol(#[from] SymbolError),
    #[error(transparent)]
    Scale(#[from] crate::scale::ScaleError),
    #[error("reflection index {n} exceeds N = {max}")]
    Index { n: usize, max: usize },
    #[error("Psi half-width {0} must lie in (0, 1/8]")]
    Psi(f64),
    #[error("kappa cutoff ({0}, {1}) must satisfy 0 < inner < outer <= 1/2")]
    Kappa(f64, f64),
    #[error("grid does not resolve the oscillation: {0}")]
    Resolution(String),
    #[error("jet window exceeded at y = {0}")]
    JetWindow(f64),
}

/// λY′ beyond which the transform of Ψ has dropped below ~1e-7.
pub const PSI_TAIL: f64 = 3200.0;

/// How the seed couples t and ξ.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeedCoupling {
    /// profile evaluated at (t + 2cξ)/(2ca^{1/2}) − 2n
    Transport,
    /// profile evaluated at t/(2ca^{1/2}) − 2n, times the seed in v
    Frozen,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CuspSpec {
    pub n: usize,
    pub scale: ScaleParams,
    pub psi: Psi,
    pub seed: SampledProfile,
    pub opts: SymbolOptions,
    pub coupling: SeedCoupling,
}

impl CuspSpec {
    pub fn new(scale: ScaleParams, n: usize) -> Result<Self, CuspError> {
        scale.validate()?;
        if n > scale.n_max() {
            return Err(CuspError::Index { n, max: scale.n_max() });
        }
        let seed = make_seed(scale.c0, scale.lambda())?;
        Ok(CuspSpec { n, scale, psi: Psi::default(), seed, opts: SymbolOptions::default(), coupling: SeedCoupling::Transport })
    }

    pub fn with_n(&self, n: usize) -> Self {
        CuspSpec { n, ..self.clone() }
    }

    pub fn with_psi(mut self, psi: Psi) -> Result<Self, CuspError> {
        if !(psi.half_width > 0.0 && psi.half_width <= 0.125) {
            return Err(CuspError::Psi(psi.half_width));
        }
        self.psi = psi;
        Ok(self)
    }

    pub fn with_kappa(mut self, kappa: Kappa) -> Result<Self, CuspError> {
        if !(kappa.inner > 0.0 && kappa.inner < kappa.outer && kappa.outer <= 0.5) {
            return Err(CuspError::Kappa(kappa.inner, kappa.outer));
        }
        self.opts.kappa = kappa;
        Ok(self)
    }

    /// Same cutoffs, different scale.
    pub fn rescaled(&self, scale: ScaleParams) -> Result<Self, CuspError> {
        CuspSpec::new(scale, self.n)?.with_psi(self.psi)?.with_kappa(self.opts.kappa)
    }

    pub fn a(&self) -> f64 {
        self.scale.a()
    }

    pub fn lambda(&self) -> f64 {
        self.scale.lambda()
    }

    pub fn c(&self) -> f64 {
        self.scale.speed()
    }

    /// Z = t/(2ca^{1/2}).
    pub fn z_of_t(&self, t: f64) -> f64 {
        t / (2.0 * self.c() * self.a().sqrt())
    }

    pub fn t_of_z(&self, z: f64) -> f64 {
        z * 2.0 * self.c() * self.a().sqrt()
    }

    /// I_n(c₀) = 2a^{1/2}c[2n − (1+c₀), 2n + (1+c₀)].
    pub fn interval(&self, c0: f64) -> (f64, f64) {
        let m = 2.0 * self.n as f64;
        (self.t_of_z(m - 1.0 - c0), self.t_of_z(m + 1.0 + c0))
    }

    /// J_n = 2a^{1/2}c[2n − (1−c₀), 2n + (1−c₀)], where uⁿ stays off the boundary.
    pub fn inner_interval(&self) -> (f64, f64) {
        let m = 2.0 * self.n as f64;
        let c0 = self.scale.c0;
        (self.t_of_z(m - 1.0 + c0), self.t_of_z(m + 1.0 - c0))
    }

    fn profile(&self, eta: f64) -> Result<SampledProfile, CuspError> {
        Ok(reflect_fft(&self.seed, eta, self.n, &self.opts)?)
    }

    /// I±(ρⁿ(η)); the operator runs at the true frequency ηλ, not at the
    /// class parameter λ/n carried by ρⁿ.
    fn traced(&self, sign: Sign, eta: f64) -> Result<SampledProfile, CuspError> {
        let mut rho = self.profile(eta)?;
        rho.lambda = self.lambda();
        Ok(op_i_with(&FftBackend, &self.opts, sign, &rho, eta)?)
    }
}

/// Uniform grid in (s, Y′).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RescaledGrid {
    pub s0: f64,
    pub ds: f64,
    pub ns: usize,
    pub y0: f64,
    pub dy: f64,
    pub ny: usize,
}

impl RescaledGrid {
    /// Spacing 0.5/λ in both directions.
    pub fn standard(lambda: f64, s: (f64, f64), y: (f64, f64)) -> Self {
        let d = 0.5 / lambda;
        RescaledGrid {
            s0: s.0,
            ds: d,
            ns: ((s.1 - s.0) / d).ceil() as usize + 1,
            y0: y.0,
            dy: d,
            ny: ((y.1 - y.0) / d).ceil() as usize + 1,
        }
    }

    pub fn s(&self, i: usize) -> f64 {
        self.s0 + i as f64 * self.ds
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y0 + j as f64 * self.dy
    }
}

/// v-samples f_p at v₀ + p·dv.
struct VSamples {
    v0: f64,
    dv: f64,
    vals: Vec<C64>,
}

impl VSamples {
    fn coarse(&self) -> VSamples {
        VSamples { v0: self.v0, dv: 2.0 * self.dv, vals: self.vals.iter().step_by(2).cloned().collect() }
    }

    fn map(&self, f: impl Fn(f64, C64) -> C64) -> VSamples {
        let vals = self.vals.iter().enumerate().map(|(p, x)| f(self.v0 + p as f64 * self.dv, *x)).collect();
        VSamples { vals, ..*self }
    }

    fn range(&self) -> (f64, f64) {
        (self.v0, self.v0 + self.dv * (self.vals.len().max(1) - 1) as f64)
    }
}

/// Relative amplitude below which profile samples are dropped; FFT round-off
/// after many reflections sits a few decades under this.
const TRIM: f64 = 1e-10;

fn trim(p: &SampledProfile) -> (usize, usize) {
    let m = p.sup();
    let keep = |v: &C64| v.norm() > TRIM * m;
    let lo = p.values.iter().position(keep).unwrap_or(0);
    let hi = p.values.iter().rposition(keep).map(|i| i + 1).unwrap_or(0);
    (lo.saturating_sub(4), (hi + 4).min(p.len()))
}

/// Finite-difference z-derivative of a profile (sixth order).
fn dz(p: &SampledProfile) -> SampledProfile {
    let c = [-1.0 / 60.0, 3.0 / 20.0, -3.0 / 4.0, 0.0, 3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0];
    let n = p.len() as i64;
    let m = p.per_unit as f64;
    let values = (0..n)
        .map(|i| {
            let mut s = C64::new(0.0, 0.0);
            for (k, ck) in c.iter().enumerate() {
                s += p.at_index(p.i0 + i + k as i64 - 3) * *ck;
            }
            s * m
        })
        .collect();
    SampledProfile { values, ..p.clone() }
}

/// Radii (inner, outer) of the smooth v-taper for grids with |s| ≤ s_abs.
/// Stationary points of the v-phase sit at v² = −s − w with |w| < κ, so the
/// taper only touches non-stationary parts of the integrand.
fn v_window(s_abs: f64) -> (f64, f64) {
    let inner = 2.0f64.max((s_abs + 0.25).sqrt() + 0.75);
    (inner, inner + 1.0)
}

/// Integrand samples of the v-integral for profile `g` (already ρⁿ at η),
/// at zc = Z − 2n.
fn v_samples(spec: &CuspSpec, g: &SampledProfile, zc: f64, s_abs: f64) -> VSamples {
    match spec.coupling {
        SeedCoupling::Transport => {
            // v = z − zc
            let (v_in, v_out) = v_window(s_abs);
            let (lo, hi) = trim(g);
            let m = g.per_unit as f64;
            let lo = lo.max((((zc - v_out) - g.z(0)) * m).floor().max(0.0) as usize);
            let hi = hi.min((((zc + v_out) - g.z(0)) * m).ceil().max(0.0) as usize + 1);
            let hi = hi.max(lo);
            let vals = (lo..hi)
                .map(|i| {
                    let v = (g.z(i) - zc).abs();
                    g.values[i] * (1.0 - smoothstep((v - v_in) / (v_out - v_in)))
                })
                .collect();
            VSamples { v0: g.z(lo) - zc, dv: g.spacing(), vals }
        }
        SeedCoupling::Frozen => {
            let (lo, hi) = trim(&spec.seed);
            let amp = g.value_at(zc);
            VSamples {
                v0: spec.seed.z(lo),
                dv: spec.seed.spacing(),
                vals: spec.seed.values[lo..hi].iter().map(|v| v * amp).collect(),
            }
        }
    }
}

/// G_i = dv Σ_p f_p e^{iμ(v_p s_i + v_p³/3)} for s_i = s₀ + i·ds.
fn g_transform(f: &VSamples, mu: f64, s0: f64, ds: f64, ns: usize) -> Vec<C64> {
    let pre: Vec<C64> = f
        .vals
        .iter()
        .enumerate()
        .map(|(p, x)| {
            let v = f.v0 + p as f64 * f.dv;
            x * C64::from_polar(1.0, mu * (v * v * v / 3.0 + p as f64 * f.dv * s0))
        })
        .collect();
    let ch = fft::chirp(&pre, mu * f.dv * ds, ns);
    ch.into_iter()
        .enumerate()
        .map(|(i, c)| c * C64::from_polar(f.dv, mu * f.v0 * (s0 + i as f64 * ds)))
        .collect()
}

/// η nodes matched to a Y′ period of `len` points of spacing dy.
#[derive(Clone, Debug, PartialEq)]
pub struct EtaPlan {
    pub len: usize,
    pub d_eta: f64,
    pub etas: Vec<f64>,
}

impl EtaPlan {
    pub fn new(lambda: f64, psi: &Psi, span: f64, dy: f64) -> Self {
        let mut len = ((span / dy).ceil() as usize).next_power_of_two().max(64);
        loop {
            let d_eta = 2.0 * PI / (lambda * len as f64 * dy);
            let k = (2.0 * psi.half_width / d_eta).floor() as usize;
            if k >= 48 {
                let mid = (k as f64 - 1.0) / 2.0;
                let etas = (0..k).map(|i| 1.0 + (i as f64 - mid) * d_eta).collect();
                return EtaPlan { len, d_eta, etas };
            }
            len *= 2;
        }
    }

    /// k midpoint nodes across supp Ψ, for plain quadrature (no FFT pairing).
    pub fn quadrature(psi: &Psi, k: usize) -> Self {
        let d_eta = 2.0 * psi.half_width / k as f64;
        let etas = (0..k).map(|i| 1.0 - psi.half_width + (i as f64 + 0.5) * d_eta).collect();
        EtaPlan { len: k, d_eta, etas }
    }
}

/// Y′ range where uⁿ is not negligible.
fn cusp_y_support(v: (f64, f64), s: (f64, f64), n: usize, lambda: f64) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::MAX, f64::MIN);
    for k in 0..=400 {
        let vv = v.0 + (v.1 - v.0) * k as f64 / 400.0;
        for ss in [s.0, s.1] {
            let y = -(vv * ss + vv * vv * vv / 3.0);
            lo = lo.min(y);
            hi = hi.max(y);
        }
    }
    let shift = 4.0 / 3.0 * n as f64;
    let tail = PSI_TAIL / lambda;
    (lo - shift - tail, hi - shift + tail)
}

/// Per-η tables of G on the s-grid (fine and coarse v-sampling).
struct GTable {
    g: Vec<Vec<C64>>,
    coarse: Vec<Vec<C64>>,
    v_range: (f64, f64),
}

/// Which field a row evaluation produces.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    /// uⁿ
    Value,
    /// ∂ₜuⁿ at fixed (x, y)
    TimeDerivative,
}

fn g_table(spec: &CuspSpec, t: f64, etas: &[f64], s0: f64, ds: f64, ns: usize) -> Result<GTable, CuspError> {
    g_table_kind(spec, t, etas, s0, ds, ns, FieldKind::Value)
}

fn g_table_kind(
    spec: &CuspSpec,
    t: f64,
    etas: &[f64],
    s0: f64,
    ds: f64,
    ns: usize,
    kind: FieldKind,
) -> Result<GTable, CuspError> {
    let lambda = spec.lambda();
    let zc = spec.z_of_t(t) - 2.0 * spec.n as f64;
    let s_abs = s0.abs().max((s0 + ds * ns as f64).abs());
    let (h, c, a) = (spec.scale.h, spec.c(), spec.a());
    let rows: Vec<Result<(Vec<C64>, Vec<C64>, (f64, f64)), CuspError>> = etas
        .par_iter()
        .map(|&eta| {
            let g = spec.profile(eta)?;
            let f = v_samples(spec, &g, zc, s_abs);
            let mu = eta * lambda;
            let mut fine = g_transform(&f, mu, s0, ds, ns);
            let mut coarse = g_transform(&f.coarse(), mu, s0, ds, ns);
            if kind == FieldKind::TimeDerivative {
                // y′ moves with −c/a^{3/2}, Z with 1/(2ca^{1/2})
                let fz = v_samples(spec, &dz(&g), zc, s_abs);
                let gz = g_transform(&fz, mu, s0, ds, ns);
                let gzc = g_transform(&fz.coarse(), mu, s0, ds, ns);
                let rot = C64::new(0.0, -eta * c / h);
                let k = 1.0 / (2.0 * c * a.sqrt());
                for i in 0..ns {
                    fine[i] = fine[i] * rot + gz[i] * k;
                    coarse[i] = coarse[i] * rot + gzc[i] * k;
                }
            }
            Ok((fine, coarse, f.range()))
        })
        .collect();
    let mut out = GTable { g: vec![], coarse: vec![], v_range: (f64::MAX, f64::MIN) };
    for r in rows {
        let (a, b, vr) = r?;
        out.g.push(a);
        out.coarse.push(b);
        out.v_range = (out.v_range.0.min(vr.0), out.v_range.1.max(vr.1));
    }
    Ok(out)
}

/// Layout of the rows handed to the visitor of [`eval_rows`].
#[derive(Clone, Debug, PartialEq)]
pub struct RowLayout {
    pub y0: f64,
    pub dy: f64,
    pub len: usize,
    /// index of the requested grid's first Y′ inside a row
    pub offset: usize,
    pub eta: EtaPlan,
}

/// Chooses the Y′ period for a grid: it starts at or below grid.y0, on the
/// grid's lattice, and covers both the requested window and the support.
pub fn row_layout(spec: &CuspSpec, t: f64, grid: &RescaledGrid) -> Result<RowLayout, CuspError> {
    let lambda = spec.lambda();
    if grid.dy * lambda * (1.0 + spec.psi.half_width) > PI / 2.0 {
        return Err(CuspError::Resolution(format!("spacing ({}, {}) vs lambda {lambda}", grid.ds, grid.dy)));
    }
    let zc = spec.z_of_t(t) - 2.0 * spec.n as f64;
    let s_end = grid.s(grid.ns.saturating_sub(1));
    let v = match spec.coupling {
        SeedCoupling::Transport => {
            let g = spec.profile(1.0)?;
            let (lo, hi) = trim(&g);
            let r = v_window(grid.s0.abs().max(s_end.abs())).1;
            ((g.z(lo) - zc).max(-r), (g.z(hi.max(lo + 1) - 1) - zc).min(r))
        }
        SeedCoupling::Frozen => {
            let (lo, hi) = trim(&spec.seed);
            (spec.seed.z(lo), spec.seed.z(hi.max(lo + 1) - 1))
        }
    };
    let sup = cusp_y_support(v, (grid.s0, s_end), spec.n, lambda);
    let y_end = grid.y(grid.ny.saturating_sub(1));
    let start = grid.y0.min(sup.0);
    let stop = y_end.max(sup.1);
    let shift_pts = ((grid.y0 - start) / grid.dy).ceil();
    let y0 = grid.y0 - shift_pts * grid.dy;
    let eta = EtaPlan::new(lambda, &spec.psi, stop - y0 + grid.dy, grid.dy);
    Ok(RowLayout { y0, dy: grid.dy, len: eta.len, offset: shift_pts as usize, eta })
}

/// Streams rows u(s_i, ·) over one full Y′ period (see [`row_layout`]) with
/// a mesh-doubling error estimate per point. Rows arrive in order of i.
pub fn eval_rows(
    spec: &CuspSpec,
    t: f64,
    grid: &RescaledGrid,
    layout: &RowLayout,
    visit: impl FnMut(usize, &[C64], &[f64]),
) -> Result<(), CuspError> {
    eval_rows_kind(spec, t, grid, layout, FieldKind::Value, visit)
}

pub fn eval_rows_kind(
    spec: &CuspSpec,
    t: f64,
    grid: &RescaledGrid,
    layout: &RowLayout,
    kind: FieldKind,
    mut visit: impl FnMut(usize, &[C64], &[f64]),
) -> Result<(), CuspError> {
    let lambda = spec.lambda();
    let eta = &layout.eta;
    let gt = g_table_kind(spec, t, &eta.etas, grid.s0, grid.ds, grid.ns, kind)?;
    let len = layout.len;
    let a_half = spec.a().sqrt();
    let off = layout.y0 + 4.0 / 3.0 * spec.n as f64;
    let eb = eta.etas[0];
    let kphase: Vec<C64> = eta
        .etas
        .iter()
        .enumerate()
        .map(|(k, e)| C64::from_polar(spec.psi.eval(*e), lambda * eta.d_eta * k as f64 * off))
        .collect();
    let out_phase: Vec<C64> = (0..len)
        .map(|j| C64::from_polar(a_half * eta.d_eta, lambda * eb * (off + j as f64 * layout.dy)))
        .collect();
    let plan = fft::inverse(len);
    let mut fine = vec![C64::new(0.0, 0.0); len];
    let mut coarse = vec![C64::new(0.0, 0.0); len];
    let mut err = vec![0.0; len];
    for i in 0..grid.ns {
        fine.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
        coarse.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
        for k in 0..eta.etas.len() {
            fine[k] = gt.g[k][i] * kphase[k];
            coarse[k] = gt.coarse[k][i] * kphase[k];
        }
        plan.process(&mut fine);
        plan.process(&mut coarse);
        for j in 0..len {
            fine[j] *= out_phase[j];
            coarse[j] *= out_phase[j];
            err[j] = (fine[j] - coarse[j]).norm();
        }
        visit(i, &fine, &err);
    }
    Ok(())
}

/// Physical grids (x, y) of a rescaled grid at time t.
pub fn physical_axes(spec: &CuspSpec, grid: &RescaledGrid, t: f64) -> ((Vec<f64>, Vec<f64>), (Vec<f64>, Vec<f64>)) {
    let a = spec.a();
    let a32 = a.powf(1.5);
    let x = trapezoid(a * (1.0 + grid.s0), a * grid.ds, grid.ns);
    let y = trapezoid(t * spec.c() + a32 * grid.y0, a32 * grid.dy, grid.ny);
    (x, y)
}

/// uⁿ on a rescaled grid, returned in physical coordinates with an error grid.
pub fn eval_cusp(spec: &CuspSpec, grid: &RescaledGrid, t: f64) -> Result<Field2D, CuspError> {
    eval_cusp_kind(spec, grid, t, FieldKind::Value)
}

/// uⁿ or ∂ₜuⁿ on a rescaled grid, in physical coordinates with an error grid.
pub fn eval_cusp_kind(spec: &CuspSpec, grid: &RescaledGrid, t: f64, kind: FieldKind) -> Result<Field2D, CuspError> {
    let layout = row_layout(spec, t, grid)?;
    let ny = grid.ny;
    let mut vals = vec![C64::new(0.0, 0.0); grid.ns * ny];
    let mut errs = vec![0.0; grid.ns * ny];
    let o = layout.offset;
    eval_rows_kind(spec, t, grid, &layout, kind, |i, row, e| {
        vals[i * ny..(i + 1) * ny].copy_from_slice(&row[o..o + ny]);
        errs[i * ny..(i + 1) * ny].copy_from_slice(&e[o..o + ny]);
    })?;
    let (x, y) = physical_axes(spec, grid, t);
    Ok(Field2D { x: x.0, wx: x.1, y: y.0, wy: y.1, values: vals, error: Some(errs) })
}

/// Σ uⁿ over the cusps whose I_n(c₀), widened by 2c₀·2a^{1/2}, contains t.
pub fn active_indices(scale: &ScaleParams, t: f64) -> Vec<usize> {
    let a = scale.a();
    let c = scale.speed();
    let pad = 4.0 * scale.c0 * a.sqrt();
    (0..=scale.n_max())
        .filter(|&n| {
            let m = 2.0 * n as f64;
            let lo = 2.0 * c * a.sqrt() * (m - 1.0 - scale.c0) - pad;
            let hi = 2.0 * c * a.sqrt() * (m + 1.0 + scale.c0) + pad;
            t >= lo && t <= hi
        })
        .collect()
}

pub fn sum_parametrix(base: &CuspSpec, grid: &RescaledGrid, t: f64) -> Result<Field2D, CuspError> {
    sum_parametrix_kind(base, grid, t, FieldKind::Value)
}

pub fn sum_parametrix_kind(base: &CuspSpec, grid: &RescaledGrid, t: f64, kind: FieldKind) -> Result<Field2D, CuspError> {
    let idx = active_indices(&base.scale, t);
    let mut out: Option<Field2D> = None;
    for n in idx {
        let f = eval_cusp_kind(&base.with_n(n), grid, t, kind)?;
        out = Some(match out {
            None => f,
            Some(mut acc) => {
                for (x, y) in acc.values.iter_mut().zip(&f.values) {
                    *x += y;
                }
                if let (Some(ea), Some(eb)) = (acc.error.as_mut(), f.error.as_ref()) {
                    for (x, y) in ea.iter_mut().zip(eb) {
                        *x += y;
                    }
                }
                acc
            }
        });
    }
    Ok(out.unwrap_or_else(|| {
        let (x, y) = physical_axes(base, grid, t);
        Field2D::zeros(x, y)
    }))
}

/// Boundary trace Tr±(uⁿ) on a (Z, Y′) grid; values are Z-major over a full
/// Y′ period of `len` points starting at y0.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub sign: Sign,
    pub n: usize,
    pub z0: f64,
    pub dz: f64,
    pub nz: usize,
    pub y0: f64,
    pub dy: f64,
    pub len: usize,
    pub values: Vec<C64>,
    /// I±(ρⁿ) at η = 1.
    pub profile: SampledProfile,
}

impl TraceRecord {
    pub fn at(&self, i: usize, j: usize) -> C64 {
        self.values[i * self.len + j]
    }

    /// Σ|Tr|² dZ dY′ (rescaled measure).
    pub fn l2_sq(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.dz * self.dy
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn add(&self, o: &TraceRecord) -> Result<TraceRecord, CuspError> {
        if (self.z0, self.dz, self.nz, self.y0, self.dy, self.len) != (o.z0, o.dz, o.nz, o.y0, o.dy, o.len) {
            return Err(CuspError::Resolution("trace grids differ".into()));
        }
        let values = self.values.iter().zip(&o.values).map(|(a, b)| a + b).collect();
        Ok(TraceRecord { values, ..self.clone() })
    }
}

/// Z and Y′ sampling of a trace; the Y′ period is chosen to cover
/// [y_lo, y_hi] and the Ψ tails.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceGrid {
    pub z0: f64,
    pub dz: f64,
    pub nz: usize,
    pub y_lo: f64,
    pub y_hi: f64,
    pub dy: f64,
}

impl TraceGrid {
    /// Z over I_n(c₀) (plus 0.25), Y′ around the trace of uⁿ, spacing 0.5/λ.
    pub fn around(spec: &CuspSpec) -> Self {
        let lambda = spec.lambda();
        let d = 0.5 / lambda;
        let m = 2.0 * spec.n as f64;
        let half = 1.0 + spec.scale.c0 + 0.25;
        let yc = -4.0 / 3.0 * spec.n as f64;
        TraceGrid {
            z0: m - half,
            dz: d,
            nz: (2.0 * half / d).ceil() as usize + 1,
            y_lo: yc - 1.0,
            y_hi: yc + 1.0,
            dy: d,
        }
    }
}

/// Tr±(uⁿ)(Y′, Z) = 2πa^{1/2} ∫ Ψ(η)(ηλ)^{-1/2} e^{iηλ(Y′ ∓ 2/3 + 4n/3)} I±(ρⁿ)(Z − 2n) dη.
pub fn trace(spec: &CuspSpec, sign: Sign, g: &TraceGrid) -> Result<TraceRecord, CuspError> {
    let lambda = spec.lambda();
    let tail = PSI_TAIL / lambda;
    let y0 = ((g.y_lo - tail) / g.dy).floor() * g.dy;
    let eta = EtaPlan::new(lambda, &spec.psi, g.y_hi + tail - y0, g.dy);
    let len = eta.len;
    let nn = 2.0 * spec.n as f64;
    let cols: Vec<Result<Vec<C64>, CuspError>> = eta
        .etas
        .par_iter()
        .map(|&e| {
            let q = spec.traced(sign, e)?;
            Ok((0..g.nz).map(|i| q.value_at(g.z0 + i as f64 * g.dz - nn)).collect())
        })
        .collect();
    let cols: Vec<Vec<C64>> = cols.into_iter().collect::<Result<_, _>>()?;
    let off = y0 - sign.as_f64() * 2.0 / 3.0 + 4.0 / 3.0 * spec.n as f64;
    let eb = eta.etas[0];
    let pref = 2.0 * PI * spec.a().sqrt() * eta.d_eta;
    let kphase: Vec<C64> = eta
        .etas
        .iter()
        .enumerate()
        .map(|(k, e)| C64::from_polar(spec.psi.eval(*e) * (e * lambda).powf(-0.5), lambda * eta.d_eta * k as f64 * off))
        .collect();
    let out_phase: Vec<C64> = (0..len).map(|j| C64::from_polar(pref, lambda * eb * (off + j as f64 * g.dy))).collect();
    let plan = fft::inverse(len);
    let mut values = vec![C64::new(0.0, 0.0); g.nz * len];
    let mut buf = vec![C64::new(0.0, 0.0); len];
    for i in 0..g.nz {
        buf.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
        for k in 0..eta.etas.len() {
            buf[k] = cols[k][i] * kphase[k];
        }
        plan.process(&mut buf);
        for j in 0..len {
            values[i * len + j] = buf[j] * out_phase[j];
        }
    }
    let profile = spec.traced(sign, 1.0)?;
    Ok(TraceRecord { sign, n: spec.n, z0: g.z0, dz: g.dz, nz: g.nz, y0, dy: g.dy, len, values, profile })
}

/// ‖Tr₋(uⁿ) + Tr₊(uⁿ⁺¹)‖² and ‖Tr₋(uⁿ)‖² over all (Y′, Z).
///
/// Both traces carry the phase e^{iηλ(Y′ + 2/3 + 4n/3)}, so by Plancherel in
/// Y′ the norms reduce to ∫Ψ²(ηλ)^{-1}∫|I₋ρⁿ(z) + I₊ρⁿ⁺¹(z − 2)|²dz dη (up
/// to a common constant, dropped).
pub fn trace_pairing(spec: &CuspSpec) -> Result<(f64, f64), CuspError> {
    trace_pairing_with(spec, 96)
}

/// [`trace_pairing`] with `k` midpoint nodes in η.
pub fn trace_pairing_with(spec: &CuspSpec, k: usize) -> Result<(f64, f64), CuspError> {
    let next = spec.with_n(spec.n + 1);
    if spec.n + 1 > spec.scale.n_max() {
        return Err(CuspError::Index { n: spec.n + 1, max: spec.scale.n_max() });
    }
    let lambda = spec.lambda();
    let plan = EtaPlan::quadrature(&spec.psi, k);
    let parts: Vec<Result<(f64, f64), CuspError>> = plan
        .etas
        .par_iter()
        .map(|&e| {
            let p = spec.traced(Sign::Minus, e)?;
            let q = next.traced(Sign::Plus, e)?;
            let shift = 2 * p.per_unit as i64;
            let lo = p.i0.min(q.i0 + shift);
            let hi = (p.i0 + p.len() as i64).max(q.i0 + shift + q.len() as i64);
            let (mut r, mut b) = (0.0, 0.0);
            for j in lo..hi {
                let x = p.at_index(j);
                r += (x + q.at_index(j - shift)).norm_sqr();
                b += x.norm_sqr();
            }
            let w = spec.psi.eval(e).powi(2) / (e * lambda) * p.spacing();
            Ok((w * r, w * b))
        })
        .collect();
    let (mut r, mut b) = (0.0, 0.0);
    for x in parts {
        let (u, v) = x?;
        r += u;
        b += v;
    }
    Ok((r, b))
}

/// Fraction of the y-Fourier power of uⁿ(·, t) on `grid`'s s-rows that sits
/// at |ηh − 1| ≤ width, η the dual variable of y.
pub fn frequency_fraction(spec: &CuspSpec, t: f64, grid: &RescaledGrid, width: f64) -> Result<f64, CuspError> {
    let layout = row_layout(spec, t, grid)?;
    let lambda = spec.lambda();
    let len = layout.len;
    let plan = fft::forward(len);
    let (mut inside, mut all) = (0.0, 0.0);
    let mut buf = vec![C64::new(0.0, 0.0); len];
    eval_rows(spec, t, grid, &layout, |_, row, _| {
        buf.copy_from_slice(row);
        plan.process(&mut buf);
        for (k, v) in buf.iter().enumerate() {
            let ks = if k <= len / 2 { k as f64 } else { k as f64 - len as f64 };
            // e^{iηλY′} = e^{iηy/h}: η is the rescaled frequency
            let eta = 2.0 * PI * ks / (len as f64 * layout.dy * lambda);
            let p = v.norm_sqr();
            all += p;
            if (eta - 1.0).abs() <= width {
                inside += p;
            }
        }
    })?;
    Ok(if all > 0.0 { inside / all } else { 1.0 })
}

/// Overlap ∫m_a m_b dt / (∫m_a² ∫m_b²)^{1/2} of the time profiles
/// m(t) = ‖u(·, t)‖²_{x≥0} of two cusps sharing a scale.
pub fn support_overlap(a: &CuspSpec, b: &CuspSpec, samples: usize) -> Result<f64, CuspError> {
    let (lo_a, hi_a) = a.interval(3.0 * a.scale.c0 + 1.0);
    let (lo_b, hi_b) = b.interval(3.0 * b.scale.c0 + 1.0);
    let (lo, hi) = (lo_a.min(lo_b), hi_a.max(hi_b));
    let times: Vec<f64> = (0..samples).map(|k| lo + (hi - lo) * k as f64 / (samples - 1) as f64).collect();
    let ma: Vec<f64> = times.iter().map(|t| marginal(a, *t).map(|m| m.total)).collect::<Result<_, _>>()?;
    let mb: Vec<f64> = times.iter().map(|t| marginal(b, *t).map(|m| m.total)).collect::<Result<_, _>>()?;
    let ab: f64 = ma.iter().zip(&mb).map(|(x, y)| x * y).sum();
    let aa: f64 = ma.iter().map(|x| x * x).sum();
    let bb: f64 = mb.iter().map(|x| x * x).sum();
    Ok(ab / (aa * bb).sqrt())
}

/// ∫|uⁿ(·, t)|² over x ≥ 0 by Plancherel in Y′, together with the
/// x-marginal ∫|u|² dy on the s-grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Marginal {
    pub s0: f64,
    pub ds: f64,
    /// ∫|u|² dy at each s (physical y measure)
    pub density: Vec<f64>,
    /// physical ∫∫|u|² dx dy over the s-grid
    pub total: f64,
}

impl Marginal {
    /// Mass fraction at x < x_cut (physical).
    pub fn fraction_below(&self, spec: &CuspSpec, x_cut: f64) -> f64 {
        let a = spec.a();
        let below: f64 = self
            .density
            .iter()
            .enumerate()
            .filter(|(i, _)| a * (1.0 + self.s0 + *i as f64 * self.ds) < x_cut)
            .map(|(_, d)| d * a * self.ds)
            .sum();
        if self.total > 0.0 {
            below / self.total
        } else {
            0.0
        }
    }
}

/// s-grid [−1, s_max] with spacing 0.5/λ.
pub fn half_plane_s(lambda: f64) -> (f64, f64, usize) {
    let ds = 0.5 / lambda;
    let s_max = 0.05 + (40.0 / lambda).powf(2.0 / 3.0);
    (-1.0, ds, ((s_max + 1.0) / ds).ceil() as usize + 1)
}

pub fn marginal(spec: &CuspSpec, t: f64) -> Result<Marginal, CuspError> {
    let lambda = spec.lambda();
    let (s0, ds, ns) = half_plane_s(lambda);
    // η nodes for a plain quadrature of a smooth compact integrand
    let plan = EtaPlan::quadrature(&spec.psi, 96);
    let gt = g_table(spec, t, &plan.etas, s0, ds, ns)?;
    let a = spec.a();
    // ∫|u|²dY′ = a·(2π/λ)∫Ψ²|G|²dη; dy = a^{3/2}dY′
    let pref = a * a.powf(1.5) * 2.0 * PI / lambda * plan.d_eta;
    let mut density = vec![0.0; ns];
    for (k, e) in plan.etas.iter().enumerate() {
        let p2 = spec.psi.eval(*e).powi(2);
        for i in 0..ns {
            density[i] += pref * p2 * gt.g[k][i].norm_sqr();
        }
    }
    let mut total = 0.0;
    for (i, d) in density.iter().enumerate() {
        let w = if i == 0 || i + 1 == ns { 0.5 } else { 1.0 };
        total += w * d * a * ds;
    }
    Ok(Marginal { s0, ds, density, total })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SupportReport {
    pub n: usize,
    pub times: Vec<f64>,
    /// ‖uⁿ(·, t)‖²
    pub mass: Vec<f64>,
    /// fraction of ∫‖uⁿ(t)‖²dt with t outside I_n(2c₀)
    pub outside_fraction: f64,
    /// fraction of ‖uⁿ(t)‖² at x < a/4, at the centre of J_n
    pub near_boundary_center: f64,
    /// length of the t-window around the centre where the mass at x < a/2
    /// stays below 1e-3
    pub off_boundary_length: f64,
}

/// Mass of uⁿ over a t-ladder spanning I_n(3c₀ + 1).
pub fn support_diagnostics(spec: &CuspSpec, samples: usize) -> Result<SupportReport, CuspError> {
    let c0 = spec.scale.c0;
    let (lo, hi) = {
        let m = 2.0 * spec.n as f64;
        (spec.t_of_z(m - 2.0 - 3.0 * c0), spec.t_of_z(m + 2.0 + 3.0 * c0))
    };
    let inside = spec.interval(2.0 * c0);
    let dt = (hi - lo) / (samples - 1) as f64;
    let times: Vec<f64> = (0..samples).map(|i| lo + i as f64 * dt).collect();
    let marg: Vec<Marginal> = times.iter().map(|t| marginal(spec, *t)).collect::<Result<_, _>>()?;
    let mass: Vec<f64> = marg.iter().map(|m| m.total).collect();
    let (mut all, mut out) = (0.0, 0.0);
    for (t, m) in times.iter().zip(&mass) {
        all += m;
        if *t < inside.0 || *t > inside.1 {
            out += m;
        }
    }
    let centre = spec.t_of_z(2.0 * spec.n as f64);
    let a = spec.a();
    let near_boundary_center = marginal(spec, centre)?.fraction_below(spec, 0.25 * a);
    // walk outwards from the centre
    let step = spec.t_of_z(0.05);
    let mut len = 0.0;
    for dir in [-1.0, 1.0] {
        let mut k = 1;
        loop {
            let t = centre + dir * k as f64 * step;
            if k > 40 || marginal(spec, t)?.fraction_below(spec, 0.5 * a) > 1e-3 {
                break;
            }
            k += 1;
        }
        len += (k - 1) as f64 * step;
    }
    Ok(SupportReport {
        n: spec.n,
        times,
        mass,
        outside_fraction: if all > 0.0 { out / all } else { 0.0 },
        near_boundary_center,
        off_boundary_length: len,
    })
}

/// h‖□uⁿ(·, t)‖/‖uⁿ(·, t)‖ over x ≥ 0, with □ = ∂²ₜ − ∂²ₓ − (1+x)∂²ᵧ applied
/// under the integral sign.
///
/// With g = g(Z, v) the integrand amplitude, the bracket multiplying the
/// phase is
/// (η²a/h²)(s + v²)g − i(η/h)a^{-1/2} g_Z + g_ZZ/(4c²a).
pub fn box_residual(spec: &CuspSpec, t: f64) -> Result<f64, CuspError> {
    let lambda = spec.lambda();
    let h = spec.scale.h;
    let a = spec.a();
    let c = spec.c();
    let (s0, ds, ns) = half_plane_s(lambda);
    let s_abs = s0.abs().max((s0 + ds * ns as f64).abs());
    let plan = EtaPlan::quadrature(&spec.psi, 96);
    let zc = spec.z_of_t(t) - 2.0 * spec.n as f64;
    let rows: Vec<Result<(f64, f64), CuspError>> = plan
        .etas
        .par_iter()
        .map(|&eta| {
            let g = spec.profile(eta)?;
            let g1 = dz(&g);
            let g2 = dz(&g1);
            let mu = eta * lambda;
            let (f0, f1, f2) = (v_samples(spec, &g, zc, s_abs), v_samples(spec, &g1, zc, s_abs), v_samples(spec, &g2, zc, s_abs));
            let fv2 = f0.map(|v, x| x * v * v);
            let g0 = g_transform(&f0, mu, s0, ds, ns);
            let gv2 = g_transform(&fv2, mu, s0, ds, ns);
            let gz = g_transform(&f1, mu, s0, ds, ns);
            let gzz = g_transform(&f2, mu, s0, ds, ns);
            let big = eta * eta * a / (h * h);
            let mid = C64::new(0.0, -eta / h / a.sqrt());
            let small = 1.0 / (4.0 * c * c * a);
            let (mut num, mut den) = (0.0, 0.0);
            for i in 0..ns {
                let s = s0 + i as f64 * ds;
                let b = (g0[i] * s + gv2[i]) * big + gz[i] * mid + gzz[i] * small;
                num += b.norm_sqr();
                den += g0[i].norm_sqr();
            }
            let p2 = spec.psi.eval(eta).powi(2);
            Ok((p2 * num, p2 * den))
        })
        .collect();
    let (mut num, mut den) = (0.0, 0.0);
    for r in rows {
        let (x, y) = r?;
        num += x;
        den += y;
    }
    Ok(h * (num / den).sqrt())
}

/// Finite-difference □ on three time slices (t − δ, t, t + δ) sharing one
/// uniform grid: fourth order in x and y, second order in t. Returns
/// ‖□u‖/‖u‖ over interior points.
pub fn box_fd(prev: &Field2D, cur: &Field2D, next: &Field2D, dt: f64) -> Result<f64, CuspError> {
    if !cur.same_grid(prev) || !cur.same_grid(next) || cur.nx() < 5 || cur.ny() < 5 {
        return Err(CuspError::Resolution("box_fd needs three slices on one grid of at least 5x5".into()));
    }
    let dx = cur.x[1] - cur.x[0];
    let dy = cur.y[1] - cur.y[0];
    let c = [-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0];
    let (nx, ny) = (cur.nx(), cur.ny());
    let (mut num, mut den) = (0.0, 0.0);
    for i in 2..nx - 2 {
        for j in 2..ny - 2 {
            let u = cur.at(i, j);
            let utt = (prev.at(i, j) - u * 2.0 + next.at(i, j)) / (dt * dt);
            let mut uxx = C64::new(0.0, 0.0);
            let mut uyy = C64::new(0.0, 0.0);
            for (k, ck) in c.iter().enumerate() {
                uxx += cur.at(i + k - 2, j) * *ck;
                uyy += cur.at(i, j + k - 2) * *ck;
            }
            let b = utt - uxx / (dx * dx) - uyy * ((1.0 + cur.x[i]) / (dy * dy));
            num += b.norm_sqr();
            den += u.norm_sqr();
        }
    }
    Ok((num / den).sqrt())
}

/// Cusp with jet-truncated phases θ + η^{1/3}ξζ + ηξ³/3 + (4/3)n(−ζ₀)^{3/2}
/// (leading symbol only), summed directly at each point.
///
/// The jet is taken at η = 1, τ = −c and extended by homogeneity:
/// θ(η) = ηθ(1), ζ(η) = η^{2/3}ζ(1).
pub fn general_cusp_eval(
    jet: &LocalJet,
    spec: &CuspSpec,
    x: &[f64],
    y: &[f64],
    t: f64,
    window: f64,
) -> Result<Field2D, CuspError> {
    let h = spec.scale.h;
    let a = spec.a();
    let c = spec.c();
    if let Some(bad) = y.iter().find(|yy| (*yy - jet.y0).abs() > window) {
        return Err(CuspError::JetWindow(*bad));
    }
    let z0 = -jet.zeta0;
    let plan = EtaPlan::quadrature(&spec.psi, 96);
    let zc = spec.z_of_t(t) - 2.0 * spec.n as f64;
    let s_abs = x.iter().map(|xx| (xx / a - 1.0).abs()).fold(0.0, f64::max);
    let nn = spec.n as f64;
    let profiles: Vec<(f64, VSamples)> = plan
        .etas
        .iter()
        .map(|&e| Ok((e, v_samples(spec, &spec.profile(e)?, zc, s_abs))))
        .collect::<Result<_, CuspError>>()?;
    let mut vals = vec![C64::new(0.0, 0.0); x.len() * y.len()];
    vals.par_chunks_mut(y.len()).enumerate().for_each(|(i, row)| {
        for (j, out) in row.iter_mut().enumerate() {
            let th = jet.theta_at(x[i], y[j]);
            let ze = jet.zeta_at(x[i], y[j]);
            let mut acc = C64::new(0.0, 0.0);
            for (e, f) in &profiles {
                let e13 = e.powf(1.0 / 3.0);
                let base = e * (jet.y0 + th) + 4.0 / 3.0 * nn * e * z0.powf(1.5) - t * e * c;
                let mut s = C64::new(0.0, 0.0);
                for (p, val) in f.vals.iter().enumerate() {
                    let v = f.v0 + p as f64 * f.dv;
                    let xi = a.sqrt() * v;
                    // η^{1/3}ξ·η^{2/3}ζ(1) = ηξζ(1)
                    let ph = xi * e13 * e13 * e13 * ze + e * xi * xi * xi / 3.0;
                    s += val * C64::from_polar(1.0, ph / h);
                }
                acc += s * C64::from_polar(f.dv * spec.psi.eval(*e), base / h);
            }
            *out = acc * (a.sqrt() * plan.d_eta);
        }
    });
    let tx = grid_axis::axis(x);
    let ty = grid_axis::axis(y);
    Ok(Field2D { x: tx.0, wx: tx.1, y: ty.0, wy: ty.1, values: vals, error: None })
}

mod grid_axis {
    /// Trapezoid-style weights for a strictly increasing, possibly non-uniform axis.
    pub fn axis(v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = v.len();
        let w = (0..n)
            .map(|i| {
                let l = if i > 0 { v[i] - v[i - 1] } else { 0.0 };
                let r = if i + 1 < n { v[i + 1] - v[i] } else { 0.0 };
                let w = 0.5 * (l + r);
                if w > 0.0 {
                    w
                } else {
                    1.0
                }
            })
            .collect();
        (v.to_vec(), w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize) -> CuspSpec {
        CuspSpec::new(ScaleParams::default(), n).unwrap()
    }

    #[test]
    fn point_value_matches_direct_quadrature() {
        let sp = spec(2);
        let lam = sp.lambda();
        let t = sp.t_of_z(4.1);
        let (s_pt, y_pt) = (-0.3, -8.0 / 3.0 + 0.02);
        let grid = RescaledGrid { s0: s_pt, ds: 0.5 / lam, ns: 1, y0: y_pt, dy: 0.5 / lam, ny: 1 };
        let got = eval_cusp(&sp, &grid, t).unwrap().values[0];
        // plain Riemann sums over every profile sample and 400 η nodes
        let zc = sp.z_of_t(t) - 4.0;
        let k = 400;
        let de = 2.0 * sp.psi.half_width / k as f64;
        let mut want = C64::new(0.0, 0.0);
        for q in 0..k {
            let e = 1.0 - sp.psi.half_width + (q as f64 + 0.5) * de;
            let g = sp.profile(e).unwrap();
            let mut inner = C64::new(0.0, 0.0);
            for (i, val) in g.values.iter().enumerate() {
                let v = g.z(i) - zc;
                if v.abs() > 3.0 {
                    continue;
                }
                inner += val * C64::from_polar(g.spacing(), e * lam * (v * s_pt + v * v * v / 3.0));
            }
            want += inner * C64::from_polar(de * sp.psi.eval(e), e * lam * (y_pt + 8.0 / 3.0));
        }
        want *= sp.a().sqrt();
        assert!((got - want).norm() < 1e-4 * want.norm().max(1e-3), "{got} vs {want}");
    }

    #[test]
    fn time_derivative_matches_difference() {
        let sp = spec(1);
        let lam = sp.lambda();
        let (a32, c) = (sp.a().powf(1.5), sp.c());
        let t = sp.t_of_z(2.3);
        let (s_pt, y_pt) = (-0.2, -4.0 / 3.0 + 0.01);
        let at = |tt: f64, kind| {
            // same physical y at every time
            let y = y_pt - (tt - t) * c / a32;
            let g = RescaledGrid { s0: s_pt, ds: 0.5 / lam, ns: 1, y0: y, dy: 0.5 / lam, ny: 1 };
            eval_cusp_kind(&sp, &g, tt, kind).unwrap().values[0]
        };
        let d = 1e-6;
        let fd = (at(t + d, FieldKind::Value) - at(t - d, FieldKind::Value)) / (2.0 * d);
        let an = at(t, FieldKind::TimeDerivative);
        assert!((fd - an).norm() < 1e-4 * an.norm(), "{fd} {an}");
    }

    #[test]
    fn flat_general_cusp_matches_model() {
        use crate::eikonal::{local_jet, PolyCurvature};
        let sp = spec(1);
        let (a, lam) = (sp.a(), sp.lambda());
        let t = sp.t_of_z(2.2);
        let jet = local_jet(&PolyCurvature::flat(), t * sp.c(), 4, 1.0, -sp.c()).unwrap();
        let grid = RescaledGrid { s0: -0.4, ds: 0.05, ns: 9, y0: -4.0 / 3.0 - 0.04, dy: 0.5 / lam, ny: 24 };
        let model = eval_cusp(&sp, &grid, t).unwrap();
        let general = general_cusp_eval(&jet, &sp, &model.x, &model.y, t, 1.0).unwrap();
        let peak = model.max_abs();
        let worst = model.values.iter().zip(&general.values).map(|(m, g)| (m - g).norm()).fold(0.0, f64::max);
        assert!(worst < 1e-4 * peak, "{worst} vs {peak}");
        assert!((model.x[0] - a * 0.6).abs() < 1e-12);
        assert!(matches!(
            general_cusp_eval(&jet, &sp, &model.x, &[jet.y0 + 2.0], t, 1.0),
            Err(CuspError::JetWindow(_))
        ));
    }

    #[test]
    fn dirichlet_pairing() {
        let sp = spec(3);
        let tg = TraceGrid::around(&sp);
        let sum = trace(&sp, Sign::Plus, &tg).unwrap().add(&trace(&sp, Sign::Minus, &tg).unwrap()).unwrap();
        let (mut i, mut jm, mut peak) = (0, 0, 0.0);
        for a in 0..sum.nz {
            for b in 0..sum.len {
                if sum.at(a, b).norm() > peak {
                    (i, jm, peak) = (a, b, sum.at(a, b).norm());
                }
            }
        }
        let t = sp.t_of_z(sum.z0 + i as f64 * sum.dz);
        let j0 = jm - 100;
        let g = RescaledGrid { s0: -1.0, ds: sum.dz, ns: 1, y0: sum.y0 + j0 as f64 * sum.dy, dy: sum.dy, ny: 200 };
        let f = eval_cusp(&sp, &g, t).unwrap();
        let diff = (0..200).map(|j| (f.values[j] - sum.at(i, j0 + j)).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-3 * peak, "{diff} vs {peak}");
    }

    #[test]
    fn plancherel_marginal_matches_grid_norm() {
        let sp = spec(1);
        let lam = sp.lambda();
        let t = sp.t_of_z(2.2);
        let (s0, ds, ns) = half_plane_s(lam);
        let grid = RescaledGrid { s0, ds, ns, y0: -4.0 / 3.0 - 5.0, dy: 0.5 / lam, ny: (20.0 * lam) as usize };
        let f = eval_cusp(&sp, &grid, t).unwrap();
        let m = marginal(&sp, t).unwrap();
        let rel = (f.l2_sq() / m.total - 1.0).abs();
        assert!(rel < 1e-2, "{} vs {}", f.l2_sq(), m.total);
    }

    #[test]
    fn frozen_coupling_inflates_residual() {
        let sp = spec(1);
        let t = sp.t_of_z(2.0);
        let good = box_residual(&sp, t).unwrap();
        let bad = box_residual(&CuspSpec { coupling: SeedCoupling::Frozen, ..sp.clone() }, t).unwrap();
        assert!(bad > 10.0 * good, "{bad} vs {good}");
    }

    #[test]
    fn active_indices_cover_centres() {
        let sc = ScaleParams::default();
        for n in [0usize, 7, 40] {
            let sp = spec(n);
            assert!(active_indices(&sc, sp.t_of_z(2.0 * n as f64)).contains(&n));
            assert!(!active_indices(&sc, sp.t_of_z(2.0 * n as f64 + 6.0)).contains(&n));
        }
    }

    #[test]
    fn rejects_bad_index_and_psi() {
        let sc = ScaleParams::default();
        assert!(matches!(CuspSpec::new(sc, sc.n_max() + 1), Err(CuspError::Index { .. })));
        assert!(spec(0).with_psi(Psi { half_width: 0.2 }).is_err());
    }

    #[test]
    fn trace_grids_must_match() {
        let sp = spec(0);
        let a = trace(&sp, Sign::Plus, &TraceGrid::around(&sp)).unwrap();
        let mut g = TraceGrid::around(&sp);
        g.nz -= 1;
        let b = trace(&sp, Sign::Plus, &g).unwrap();
        assert!(a.add(&b).is_err());
    }
}
