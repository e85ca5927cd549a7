//! Gallery-mode basis of ∂²ₓ + (1+x)∂²ᵧ on the half-plane x > 0 with
//! Dirichlet data, and the exact propagator on its span.
//!
//! Modes are e^{iyη} Ai(η^{2/3}x − ω_k) with eigenvalue μ = η² + ω_k η^{4/3}.
//! y is periodic with period Ly, so η runs over multiples of 2π/Ly.

use crate::airy::{ai_real, airy_zero, AiryError};
use crate::fft;
use crate::quad::composite;
use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

type C64 = Complex64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectrumError {
    #[error(transparent)]
    Airy(#[from] AiryError),
    #[error("eta = {0} must be positive")]
    Eta(f64),
    #[error("mode index {0} outside the basis")]
    Mode(usize),
    #[error("grid mismatch: {0}")]
    Grid(String),
}

/// Ai and Ai' on a uniform table, read back by cubic Hermite interpolation.
#[derive(Clone, Debug)]
pub struct AiryTable {
    lo: f64,
    step: f64,
    ai: Vec<f64>,
    dai: Vec<f64>,
}

impl AiryTable {
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<Self, AiryError> {
        let n = ((hi - lo) / step).ceil() as usize + 1;
        let mut ai = Vec::with_capacity(n);
        let mut dai = Vec::with_capacity(n);
        for i in 0..n {
            let (a, d) = ai_real(lo + i as f64 * step)?;
            ai.push(a);
            dai.push(d);
        }
        Ok(AiryTable { lo, step, ai, dai })
    }

    pub fn hi(&self) -> f64 {
        self.lo + (self.ai.len() - 1) as f64 * self.step
    }

    /// Ai(x); zero beyond the right end, where Ai is negligible.
    pub fn eval(&self, x: f64) -> f64 {
        let u = (x - self.lo) / self.step;
        if u < 0.0 {
            return f64::NAN;
        }
        let i = u.floor() as usize;
        if i + 1 >= self.ai.len() {
            return 0.0;
        }
        let t = u - i as f64;
        let h = self.step;
        let (p0, p1) = (self.ai[i], self.ai[i + 1]);
        let (m0, m1) = (self.dai[i] * h, self.dai[i + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * p0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * p1 + (t3 - t2) * m1
    }
}

/// Ai(η^{2/3}x − ω_k), 1-based k.
pub fn gallery_mode(eta: f64, k: usize, x: f64) -> Result<f64, SpectrumError> {
    if !(eta > 0.0) {
        return Err(SpectrumError::Eta(eta));
    }
    let w = airy_zero(k)?;
    Ok(ai_real(eta.powf(2.0 / 3.0) * x - w)?.0)
}

/// μ_k(η) = η² + ω_k η^{4/3}.
pub fn eigenvalue(eta: f64, k: usize) -> Result<f64, SpectrumError> {
    if !(eta > 0.0) {
        return Err(SpectrumError::Eta(eta));
    }
    let w = airy_zero(k)?;
    Ok(eta * eta + w * eta.powf(4.0 / 3.0))
}

#[derive(Clone, Debug)]
pub struct ModeBasis {
    pub eta_grid: Vec<f64>,
    pub mode_count: usize,
    /// ω_1..ω_K
    pub zeros: Vec<f64>,
    /// |Ai'(−ω_k)|, so that ‖Ai(η^{2/3}· − ω_k)‖_{L²(0,∞)} = η^{-1/3}|Ai'(−ω_k)|
    pub zero_slopes: Vec<f64>,
    pub x_cutoff: f64,
    table: AiryTable,
}

impl ModeBasis {
    pub fn new(eta_grid: Vec<f64>, mode_count: usize) -> Result<Self, SpectrumError> {
        if mode_count == 0 || eta_grid.is_empty() {
            return Err(SpectrumError::Grid("empty basis".into()));
        }
        if let Some(e) = eta_grid.iter().find(|e| !(**e > 0.0)) {
            return Err(SpectrumError::Eta(*e));
        }
        let zeros: Vec<f64> = (1..=mode_count).map(airy_zero).collect::<Result<_, _>>()?;
        let zero_slopes = zeros
            .iter()
            .map(|w| ai_real(-w).map(|v| v.1.abs()))
            .collect::<Result<Vec<_>, _>>()?;
        let emin = eta_grid.iter().cloned().fold(f64::MAX, f64::min);
        let emax = eta_grid.iter().cloned().fold(0.0, f64::max);
        let wk = zeros[mode_count - 1];
        let x_cutoff = 2.0 * wk * emin.powf(-2.0 / 3.0) + 10.0 * emax.powf(-2.0 / 3.0);
        let table = AiryTable::new(-wk - 1.0, 14.0, 1e-3)?;
        Ok(ModeBasis { eta_grid, mode_count, zeros, zero_slopes, x_cutoff, table })
    }

    /// Basis whose η are the multiples of 2π/period inside [lo, hi].
    pub fn for_period(period: f64, lo: f64, hi: f64, mode_count: usize) -> Result<Self, SpectrumError> {
        let d = 2.0 * PI / period;
        let m0 = (lo / d).ceil() as i64;
        let m1 = (hi / d).floor() as i64;
        let grid = (m0.max(1)..=m1).map(|m| m as f64 * d).collect();
        Self::new(grid, mode_count)
    }

    pub fn eigenvalue(&self, j: usize, k: usize) -> f64 {
        let e = self.eta_grid[j];
        e * e + self.zeros[k] * e.powf(4.0 / 3.0)
    }

    pub fn norm_constant(&self, j: usize, k: usize) -> f64 {
        self.eta_grid[j].powf(-1.0 / 3.0) * self.zero_slopes[k]
    }

    /// Unnormalised mode Ai(η_j^{2/3}x − ω_k), 0-based indices.
    pub fn mode(&self, j: usize, k: usize, x: f64) -> f64 {
        let arg = self.eta_grid[j].powf(2.0 / 3.0) * x - self.zeros[k];
        if arg > self.table.hi() {
            0.0
        } else {
            self.table.eval(arg)
        }
    }

    fn index(&self, j: usize, k: usize) -> usize {
        j * self.mode_count + k
    }
}

/// Complex samples on a tensor grid, stored x-major: values[i·ny + j].
#[derive(Clone, Debug, PartialEq)]
pub struct Field2D {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub wx: Vec<f64>,
    pub wy: Vec<f64>,
    pub values: Vec<C64>,
    /// Per-point error estimate, when the producer has one.
    pub error: Option<Vec<f64>>,
}

/// Trapezoid weights on x0 + i·dx.
pub fn trapezoid(x0: f64, dx: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let x = (0..n).map(|i| x0 + i as f64 * dx).collect();
    let mut w = vec![dx; n];
    if n > 1 {
        w[0] = 0.5 * dx;
        w[n - 1] = 0.5 * dx;
    }
    (x, w)
}

/// Equal weights on one period y0 + j·dy, j < n.
pub fn periodic(y0: f64, dy: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    ((0..n).map(|j| y0 + j as f64 * dy).collect(), vec![dy; n])
}

pub fn gauss(a: f64, b: f64, cells: usize, n: usize) -> (Vec<f64>, Vec<f64>) {
    composite(a, b, cells, n)
}

impl Field2D {
    pub fn new(x: (Vec<f64>, Vec<f64>), y: (Vec<f64>, Vec<f64>), values: Vec<C64>) -> Result<Self, SpectrumError> {
        let f = Field2D { x: x.0, wx: x.1, y: y.0, wy: y.1, values, error: None };
        f.check()?;
        Ok(f)
    }

    pub fn zeros(x: (Vec<f64>, Vec<f64>), y: (Vec<f64>, Vec<f64>)) -> Self {
        let n = x.0.len() * y.0.len();
        Field2D { x: x.0, wx: x.1, y: y.0, wy: y.1, values: vec![C64::new(0.0, 0.0); n], error: None }
    }

    pub fn from_fn(x: (Vec<f64>, Vec<f64>), y: (Vec<f64>, Vec<f64>), f: impl Fn(f64, f64) -> C64) -> Self {
        let mut out = Self::zeros(x, y);
        let ny = out.y.len();
        for i in 0..out.x.len() {
            for j in 0..ny {
                out.values[i * ny + j] = f(out.x[i], out.y[j]);
            }
        }
        out
    }

    pub fn check(&self) -> Result<(), SpectrumError> {
        let inc = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]);
        if !inc(&self.x) || !inc(&self.y) {
            return Err(SpectrumError::Grid("grids must be strictly increasing".into()));
        }
        if self.wx.len() != self.x.len() || self.wy.len() != self.y.len() {
            return Err(SpectrumError::Grid("weight length".into()));
        }
        if self.wx.iter().chain(&self.wy).any(|w| !(*w > 0.0)) {
            return Err(SpectrumError::Grid("weights must be positive".into()));
        }
        if self.values.len() != self.x.len() * self.y.len() {
            return Err(SpectrumError::Grid("value count".into()));
        }
        Ok(())
    }

    pub fn nx(&self) -> usize {
        self.x.len()
    }

    pub fn ny(&self) -> usize {
        self.y.len()
    }

    pub fn at(&self, i: usize, j: usize) -> C64 {
        self.values[i * self.ny() + j]
    }

    pub fn area(&self) -> f64 {
        self.wx.iter().sum::<f64>() * self.wy.iter().sum::<f64>()
    }

    /// ∫|u|² with the grid weights.
    pub fn l2_sq(&self) -> f64 {
        let ny = self.ny();
        let mut s = 0.0;
        for (i, wx) in self.wx.iter().enumerate() {
            for (j, wy) in self.wy.iter().enumerate() {
                s += wx * wy * self.values[i * ny + j].norm_sqr();
            }
        }
        s
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn same_grid(&self, o: &Field2D) -> bool {
        self.x == o.x && self.y == o.y
    }
}

/// Spectral coefficients of (u, ∂ₜu) in the orthonormal basis
/// ψ_{jk}(x) e^{iη_j y} / √Ly, ψ = mode / norm constant.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveState {
    pub pos: Vec<C64>,
    pub vel: Vec<C64>,
    pub time: f64,
}

impl WaveState {
    pub fn zeros(basis: &ModeBasis) -> Self {
        let n = basis.eta_grid.len() * basis.mode_count;
        WaveState { pos: vec![C64::new(0.0, 0.0); n], vel: vec![C64::new(0.0, 0.0); n], time: 0.0 }
    }

    /// Σ |ċ|² + μ|c|², conserved by [`propagate`].
    pub fn energy(&self, basis: &ModeBasis) -> f64 {
        let mut e = 0.0;
        for j in 0..basis.eta_grid.len() {
            for k in 0..basis.mode_count {
                let i = basis.index(j, k);
                e += self.vel[i].norm_sqr() + basis.eigenvalue(j, k) * self.pos[i].norm_sqr();
            }
        }
        e
    }

    pub fn get(&self, basis: &ModeBasis, j: usize, k: usize) -> C64 {
        self.pos[basis.index(j, k)]
    }
}

pub fn propagate(state: &WaveState, basis: &ModeBasis, t: f64) -> WaveState {
    let mut out = state.clone();
    for j in 0..basis.eta_grid.len() {
        for k in 0..basis.mode_count {
            let i = basis.index(j, k);
            let om = basis.eigenvalue(j, k).sqrt();
            let (s, c) = (om * t).sin_cos();
            out.pos[i] = state.pos[i] * c + state.vel[i] * (s / om);
            out.vel[i] = -state.pos[i] * (om * s) + state.vel[i] * c;
        }
    }
    out.time = state.time + t;
    out
}

/// Checks a uniform periodic y grid compatible with every η of the basis
/// and returns (y0, Ly).
fn y_layout(f: &Field2D, basis: &ModeBasis) -> Result<(f64, f64), SpectrumError> {
    let ny = f.ny();
    if ny < 2 {
        return Err(SpectrumError::Grid("need at least two y points".into()));
    }
    let dy = f.y[1] - f.y[0];
    if f.y.windows(2).any(|w| ((w[1] - w[0]) - dy).abs() > 1e-9 * dy) {
        return Err(SpectrumError::Grid("y grid must be uniform".into()));
    }
    let ly = dy * ny as f64;
    for e in &basis.eta_grid {
        let m = e * ly / (2.0 * PI);
        if (m - m.round()).abs() > 1e-6 || m.round() as usize >= ny / 2 {
            return Err(SpectrumError::Grid(format!("eta = {e} is not a resolved multiple of 2pi/{ly}")));
        }
    }
    Ok((f.y[0], ly))
}

fn project_one(f: &Field2D, basis: &ModeBasis, y0: f64, ly: f64, out: &mut [C64]) {
    let ny = f.ny();
    let plan = fft::forward(ny);
    let ne = basis.eta_grid.len();
    // û_j(x) = (1/√Ly) ∫ u e^{-iη_j y} dy
    let mut hat = vec![C64::new(0.0, 0.0); f.nx() * ne];
    let mut row = vec![C64::new(0.0, 0.0); ny];
    let dy = ly / ny as f64;
    for i in 0..f.nx() {
        row.copy_from_slice(&f.values[i * ny..(i + 1) * ny]);
        plan.process(&mut row);
        for (j, e) in basis.eta_grid.iter().enumerate() {
            let m = (e * ly / (2.0 * PI)).round() as usize;
            hat[i * ne + j] = row[m] * C64::from_polar(dy / ly.sqrt(), -e * y0);
        }
    }
    for j in 0..ne {
        for k in 0..basis.mode_count {
            let nc = basis.norm_constant(j, k);
            let mut s = C64::new(0.0, 0.0);
            for i in 0..f.nx() {
                s += hat[i * ne + j] * (f.wx[i] * basis.mode(j, k, f.x[i]));
            }
            out[basis.index(j, k)] = s / nc;
        }
    }
}

pub fn project(pos: &Field2D, vel: &Field2D, basis: &ModeBasis) -> Result<WaveState, SpectrumError> {
    if !pos.same_grid(vel) {
        return Err(SpectrumError::Grid("position and velocity grids differ".into()));
    }
    let (y0, ly) = y_layout(pos, basis)?;
    let mut st = WaveState::zeros(basis);
    project_one(pos, basis, y0, ly, &mut st.pos);
    project_one(vel, basis, y0, ly, &mut st.vel);
    Ok(st)
}

/// Position field of `state` on the grids of `template`.
pub fn synthesize(state: &WaveState, basis: &ModeBasis, template: &Field2D) -> Result<Field2D, SpectrumError> {
    let (y0, ly) = y_layout(template, basis)?;
    let ny = template.ny();
    let ne = basis.eta_grid.len();
    let plan = fft::inverse(ny);
    let mut out = Field2D { values: vec![C64::new(0.0, 0.0); template.values.len()], error: None, ..template.clone() };
    let mut row = vec![C64::new(0.0, 0.0); ny];
    for i in 0..template.nx() {
        row.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        for j in 0..ne {
            let e = basis.eta_grid[j];
            let m = (e * ly / (2.0 * PI)).round() as usize;
            let mut s = C64::new(0.0, 0.0);
            for k in 0..basis.mode_count {
                s += state.pos[basis.index(j, k)] * (basis.mode(j, k, template.x[i]) / basis.norm_constant(j, k));
            }
            row[m] += s * C64::from_polar(1.0 / ly.sqrt(), e * y0);
        }
        plan.process(&mut row);
        out.values[i * ny..(i + 1) * ny].copy_from_slice(&row);
    }
    Ok(out)
}

/// Σ μ^s |c|², the square of the spectral Ḣ^s norm.
pub fn sobolev_sq(state: &WaveState, basis: &ModeBasis, s: f64) -> f64 {
    let mut t = 0.0;
    for j in 0..basis.eta_grid.len() {
        for k in 0..basis.mode_count {
            t += basis.eigenvalue(j, k).powf(s) * state.pos[basis.index(j, k)].norm_sqr();
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_examples() {
        assert!(gallery_mode(1.0, 3, 0.0).unwrap().abs() < 1e-12);
        let w1 = airy_zero(1).unwrap();
        assert!((gallery_mode(1.0, 1, w1).unwrap() - 0.355_028_053_887_817_2).abs() < 1e-12);
        let (e, x) = (2.7f64, 0.4);
        let lhs = gallery_mode(e, 2, x).unwrap();
        let rhs = gallery_mode(1.0, 2, e.powf(2.0 / 3.0) * x).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
        assert!((eigenvalue(1.0, 1).unwrap() - 3.338_107_410_459_767).abs() < 1e-9);
    }

    #[test]
    fn velocity_relation() {
        let (e, k) = (40.0f64, 3);
        let a = airy_zero(k).unwrap() * e.powf(-2.0 / 3.0);
        let mu = eigenvalue(e, k).unwrap();
        assert!((mu.sqrt() - e * (1.0 + a).sqrt()).abs() < 1e-12 * mu.sqrt());
    }

    #[test]
    fn table_matches_direct() {
        let t = AiryTable::new(-20.0, 10.0, 1e-3).unwrap();
        for x in [-19.3217, -3.1, 0.00037, 4.9] {
            assert!((t.eval(x) - ai_real(x).unwrap().0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_mode_projects_to_norm_constant() {
        let basis = ModeBasis::for_period(2.0 * PI, 3.5, 6.5, 8).unwrap();
        assert_eq!(basis.eta_grid, vec![4.0, 5.0, 6.0]);
        let xg = gauss(0.0, basis.x_cutoff, 60, 16);
        let yg = periodic(-1.0, 2.0 * PI / 32.0, 32);
        let (j, k) = (1, 1);
        let f = Field2D::from_fn(xg, yg, |x, y| C64::from_polar(basis.mode(j, k, x), 5.0 * y));
        let st = project(&f, &f, &basis).unwrap();
        let want = basis.norm_constant(j, k) * (2.0 * PI).sqrt();
        for (idx, c) in st.pos.iter().enumerate() {
            if idx == basis.index(j, k) {
                assert!((c.re - want).abs() < 1e-8 && c.im.abs() < 1e-8, "{c} {want}");
            } else {
                assert!(c.norm() < 1e-8, "{idx} {c}");
            }
        }
        let back = synthesize(&st, &basis, &f).unwrap();
        let d: f64 = back.values.iter().zip(&f.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(d < 1e-8);
        // Dirichlet at x = 0 on a grid containing it
        let tf = Field2D::zeros(trapezoid(0.0, 0.1, 5), periodic(0.0, 2.0 * PI / 32.0, 32));
        let at0 = synthesize(&st, &basis, &tf).unwrap();
        assert!((0..32).all(|jj| at0.at(0, jj).norm() < 1e-12));
    }

    #[test]
    fn propagate_group_and_energy() {
        let basis = ModeBasis::for_period(2.0 * PI, 2.5, 4.5, 5).unwrap();
        let mut st = WaveState::zeros(&basis);
        for (i, (p, v)) in st.pos.iter_mut().zip(st.vel.iter_mut()).enumerate() {
            let f = i as f64;
            *p = C64::new((1.3 * f).sin(), (0.7 * f).cos());
            *v = C64::new((2.1 * f).cos(), 0.5 * (f * 0.3).sin());
        }
        assert_eq!(propagate(&st, &basis, 0.0).pos, st.pos);
        let e0 = st.energy(&basis);
        for m in 1..=10 {
            let e = propagate(&st, &basis, 0.1 * m as f64).energy(&basis);
            assert!((e - e0).abs() < 1e-10 * e0);
        }
        let a = propagate(&propagate(&st, &basis, 0.37), &basis, 0.51);
        let b = propagate(&st, &basis, 0.88);
        for (x, y) in a.pos.iter().zip(&b.pos) {
            assert!((x - y).norm() < 1e-10);
        }
        let om = basis.eigenvalue(0, 0).sqrt();
        let single = WaveState { pos: st.pos.iter().enumerate().map(|(i, c)| if i == 0 { *c } else { C64::new(0.0, 0.0) }).collect(), vel: vec![C64::new(0.0, 0.0); st.vel.len()], time: 0.0 };
        let back = propagate(&single, &basis, 2.0 * PI / om);
        assert!((back.pos[0] - single.pos[0]).norm() < 1e-12);
    }
}
