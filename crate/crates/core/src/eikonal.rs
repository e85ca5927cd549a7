//! Taylor-series solution of the eikonal system
//!
//!   ⟨dθ,dθ⟩ − ζ⟨dζ,dζ⟩ = 0,   ⟨dθ,dζ⟩ = 0,
//!   ⟨da,db⟩ = ∂ₓa∂ₓb + (1 + x b(y)) ∂ᵧa∂ᵧb − ∂ₜa∂ₜb,
//!
//! near the boundary x = 0, with θ = tτ + θ̃(x, y) and ζ independent of t.
//!
//! Each local jet is a truncated bivariate series in (x, y − y₀). The
//! unknown coefficients are found by sweeps that zero the residual order by
//! order in x. At ζ₀ = 0 the system is triangular and one pass suffices;
//! for ζ₀ ≠ 0 the ζ₀-coupling between neighbouring orders is resolved by
//! iterating to convergence.

use crate::quad::gauss_legendre;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JetError {
    #[error("|b^(1/3)(y) - 1| = {0} exceeds 1/10 at y = {1}")]
    CurvatureRange(f64, f64),
    #[error("jet sweep diverged at y = {0} (zeta0 too large for the window?)")]
    Divergence(f64),
    #[error("jet coefficient {0:e} exceeds 1e6, window too large")]
    BlowUp(f64),
    #[error("order J = {0} not supported (1..=6)")]
    Order(usize),
    #[error("radicand tau^2 + zeta0 zeta1^2 = {0} is not positive")]
    Radicand(f64),
    #[error("no sign change of zeta(x) on [0, {0}]")]
    NoCaustic(f64),
    #[error("eta must be positive")]
    Eta,
}

/// Boundary curvature b(y).
pub trait Curvature: Send + Sync {
    fn eval(&self, y: f64) -> f64;
    /// Taylor coefficients of b about y0, degree ≤ `degree`.
    fn taylor(&self, y0: f64, degree: usize) -> Vec<f64>;
}

/// b(y) = Σ c_k y^k.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyCurvature {
    pub coeffs: Vec<f64>,
}

impl PolyCurvature {
    pub fn flat() -> Self {
        PolyCurvature { coeffs: vec![1.0] }
    }

    pub fn new(coeffs: Vec<f64>) -> Self {
        PolyCurvature { coeffs }
    }
}

impl Curvature for PolyCurvature {
    fn eval(&self, y: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * y + c)
    }

    fn taylor(&self, y0: f64, degree: usize) -> Vec<f64> {
        // repeated synthetic division gives the shifted coefficients
        let mut c = self.coeffs.clone();
        let n = c.len();
        for i in 0..n {
            for j in (i..n - 1).rev() {
                c[j] += y0 * c[j + 1];
            }
        }
        c.resize(degree + 1, 0.0);
        c
    }
}

type Poly = Vec<f64>;

fn pmul(a: &[f64], b: &[f64], p: usize) -> Poly {
    let mut c = vec![0.0; p + 1];
    for (i, x) in a.iter().enumerate() {
        if *x == 0.0 {
            continue;
        }
        for (j, y) in b.iter().enumerate().take(p + 1 - i) {
            c[i + j] += x * y;
        }
    }
    c
}

fn pdiv(a: &[f64], b: &[f64], p: usize) -> Poly {
    let mut c = vec![0.0; p + 1];
    for k in 0..=p {
        let mut s = a[k];
        for i in 0..k {
            s -= c[i] * b[k - i];
        }
        c[k] = s / b[0];
    }
    c
}

fn psqrt(a: &[f64], p: usize) -> Poly {
    let mut s = vec![0.0; p + 1];
    s[0] = a[0].sqrt();
    for k in 1..=p {
        let mut r = a[k];
        for i in 1..k {
            r -= s[i] * s[k - i];
        }
        s[k] = r / (2.0 * s[0]);
    }
    s
}

fn pderiv(a: &[f64]) -> Poly {
    let mut d = vec![0.0; a.len()];
    for k in 1..a.len() {
        d[k - 1] = k as f64 * a[k];
    }
    d
}

fn peval(a: &[f64], y: f64) -> f64 {
    a.iter().rev().fold(0.0, |acc, c| acc * y + c)
}

/// Bivariate series, rows indexed by the power of x.
type Bi = Vec<Poly>;

fn bzero(j: usize, p: usize) -> Bi {
    vec![vec![0.0; p + 1]; j + 1]
}

fn bmul(a: &Bi, b: &Bi, p: usize) -> Bi {
    let j = a.len() - 1;
    let mut c = bzero(j, p);
    for (i, ra) in a.iter().enumerate() {
        for (k, rb) in b.iter().enumerate().take(j + 1 - i) {
            let prod = pmul(ra, rb, p);
            for (dst, v) in c[i + k].iter_mut().zip(prod) {
                *dst += v;
            }
        }
    }
    c
}

fn badd(a: &Bi, b: &Bi) -> Bi {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(u, v)| u + v).collect())
        .collect()
}

fn bdx(a: &Bi) -> Bi {
    let mut d = bzero(a.len() - 1, a[0].len() - 1);
    for j in 1..a.len() {
        for k in 0..a[j].len() {
            d[j - 1][k] = j as f64 * a[j][k];
        }
    }
    d
}

fn bdy(a: &Bi) -> Bi {
    a.iter().map(|r| pderiv(r)).collect()
}

/// Residuals (E1, E2) of the eikonal system for series θ̃, ζ.
fn residuals(theta: &Bi, zeta: &Bi, b: &Poly, tau: f64, p: usize) -> (Bi, Bi) {
    let jmax = theta.len() - 1;
    let mut metric = bzero(jmax, p);
    metric[0][0] = 1.0;
    if jmax >= 1 {
        metric[1] = b.clone();
    }
    let tx = bdx(theta);
    let ty = bdy(theta);
    let zx = bdx(zeta);
    let zy = bdy(zeta);
    let tt = badd(&bmul(&tx, &tx, p), &bmul(&metric, &bmul(&ty, &ty, p), p));
    let zz = badd(&bmul(&zx, &zx, p), &bmul(&metric, &bmul(&zy, &zy, p), p));
    let mut e1 = tt;
    let zzz = bmul(zeta, &zz, p);
    for (r, s) in e1.iter_mut().zip(&zzz) {
        for (u, v) in r.iter_mut().zip(s) {
            *u -= v;
        }
    }
    e1[0][0] -= tau * tau;
    let e2 = badd(&bmul(&tx, &zx, p), &bmul(&metric, &bmul(&ty, &zy, p), p));
    (e1, e2)
}

/// Jet of (θ̃, ζ) about one boundary point y₀, ordinary Taylor coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalJet {
    pub y0: f64,
    pub eta: f64,
    pub tau: f64,
    pub zeta0: f64,
    pub order: usize,
    /// theta[j][k]: coefficient of x^j (y-y0)^k, with θ̃(0, y0) = 0
    pub theta: Vec<Vec<f64>>,
    pub zeta: Vec<Vec<f64>>,
}

impl LocalJet {
    pub fn theta_at(&self, x: f64, y: f64) -> f64 {
        let dy = y - self.y0;
        self.theta.iter().rev().fold(0.0, |acc, r| acc * x + peval(r, dy))
    }

    pub fn zeta_at(&self, x: f64, y: f64) -> f64 {
        let dy = y - self.y0;
        self.zeta.iter().rev().fold(0.0, |acc, r| acc * x + peval(r, dy))
    }

    /// ∂ₓ^j θ at (0, y0).
    pub fn theta_j(&self, j: usize) -> f64 {
        factorial(j) * self.theta[j][0]
    }

    /// ∂ₓ^j ζ at (0, y0).
    pub fn zeta_j(&self, j: usize) -> f64 {
        factorial(j) * self.zeta[j][0]
    }

    /// ∂ᵧθ₀ at y0.
    pub fn dtheta0(&self) -> f64 {
        self.theta[0][1]
    }
}

fn factorial(j: usize) -> f64 {
    (1..=j).map(|k| k as f64).product()
}

/// Settings for the local solver.
#[derive(Clone, Copy, Debug)]
pub struct JetOptions {
    pub max_sweeps: usize,
    pub tol: f64,
    /// validity radius for |ζ₀|
    pub zeta0_radius: f64,
}

impl Default for JetOptions {
    fn default() -> Self {
        JetOptions { max_sweeps: 400, tol: 1e-15, zeta0_radius: 0.5 }
    }
}

pub fn local_jet(b: &dyn Curvature, y0: f64, order: usize, eta: f64, tau: f64) -> Result<LocalJet, JetError> {
    local_jet_with(b, y0, order, eta, tau, JetOptions::default())
}

pub fn local_jet_with(
    b: &dyn Curvature,
    y0: f64,
    order: usize,
    eta: f64,
    tau: f64,
    opts: JetOptions,
) -> Result<LocalJet, JetError> {
    if !(1..=6).contains(&order) {
        return Err(JetError::Order(order));
    }
    if !(eta > 0.0) {
        return Err(JetError::Eta);
    }
    let b0 = b.eval(y0);
    let dev = (b0.cbrt() - 1.0).abs();
    if !(dev <= 0.1 + 1e-12) {
        return Err(JetError::CurvatureRange(dev, y0));
    }
    let z0 = crate::billiard::zeta0(eta, tau);
    if z0.abs() > opts.zeta0_radius {
        return Err(JetError::Divergence(y0));
    }
    let jm = order;
    let p = 3 * jm + 6;
    let bp = b.taylor(y0, p);
    let mut theta = bzero(jm, p);
    let mut zeta = bzero(jm, p);
    zeta[0][0] = z0;
    zeta[1][0] = (b0 * tau * tau).cbrt();

    let set_theta0 = |theta: &mut Bi, zeta: &Bi| -> Result<(), JetError> {
        // θ̃₀' = +sqrt(τ² + ζ₀ ζ₁²)
        let mut rad = pmul(&zeta[1], &zeta[1], p);
        for r in rad.iter_mut() {
            *r *= z0;
        }
        rad[0] += tau * tau;
        if !(rad[0] > 0.0) {
            return Err(JetError::Radicand(rad[0]));
        }
        let d = psqrt(&rad, p);
        theta[0][0] = 0.0;
        for k in 0..p {
            theta[0][k + 1] = d[k] / (k as f64 + 1.0);
        }
        Ok(())
    };

    let mut converged = false;
    for _ in 0..opts.max_sweeps {
        set_theta0(&mut theta, &zeta)?;
        let (e1, _) = residuals(&theta, &zeta, &bp, tau, p);
        // Newton step on the cubic for ζ₁
        let z1 = &zeta[1];
        let z2 = if jm >= 2 { zeta[2].clone() } else { vec![0.0; p + 1] };
        let mut den = pmul(z1, z1, p);
        for v in den.iter_mut() {
            *v *= 3.0;
        }
        let bz = pmul(&bp, z1, p);
        for k in 0..=p {
            den[k] += 4.0 * z0 * z2[k] - 2.0 * z0 * bz[k];
        }
        let step1 = pdiv(&e1[1], &den, p);
        let mut change: f64 = step1.iter().fold(0.0, |m, v| m.max(v.abs()));
        for k in 0..=p {
            zeta[1][k] += step1[k];
        }
        if zeta[1][0] <= 0.0 || !zeta[1][0].is_finite() {
            return Err(JetError::Divergence(y0));
        }

        set_theta0(&mut theta, &zeta)?;
        let (e1, e2) = residuals(&theta, &zeta, &bp, tau, p);
        let z1 = zeta[1].clone();
        let z2 = zeta[2.min(jm)].clone();
        for l in 2..=jm {
            // ∂E1_l/∂Z_l = -((2l+1) Z₁² + 4l ζ₀ Z₂)
            let lf = l as f64;
            let mut den = pmul(&z1, &z1, p);
            for k in 0..=p {
                den[k] = (2.0 * lf + 1.0) * den[k] + 4.0 * lf * z0 * z2[k];
            }
            let s = pdiv(&e1[l], &den, p);
            for k in 0..=p {
                zeta[l][k] += s[k];
                change = change.max(s[k].abs());
            }
        }
        for l in 1..jm {
            let mut den = z1.clone();
            for v in den.iter_mut() {
                *v *= (l + 1) as f64;
            }
            let s = pdiv(&e2[l], &den, p);
            for k in 0..=p {
                theta[l + 1][k] -= s[k];
                change = change.max(s[k].abs());
            }
        }
        if !change.is_finite() {
            return Err(JetError::Divergence(y0));
        }
        if change <= opts.tol * (1.0 + zeta[1][0].abs()) {
            converged = true;
            break;
        }
    }
    set_theta0(&mut theta, &zeta)?;
    if !converged {
        return Err(JetError::Divergence(y0));
    }
    let jet = LocalJet { y0, eta, tau, zeta0: z0, order: jm, theta, zeta };
    for j in 0..=jm {
        let m = jet.theta_j(j).abs().max(jet.zeta_j(j).abs());
        if m > 1e6 {
            return Err(JetError::BlowUp(m));
        }
    }
    Ok(jet)
}

/// ζ₁(y, η, τ) = ∂ₓζ at the boundary.
pub fn zeta1(b: &dyn Curvature, y: f64, eta: f64, tau: f64) -> Result<f64, JetError> {
    Ok(local_jet(b, y, 4, eta, tau)?.zeta[1][0])
}

/// Friedlander phases θ_F = yη + tτ, ζ_F = (x - (τ²-η²)/η²) η^{2/3}.
pub fn friedlander_phase(x: f64, y: f64, t: f64, eta: f64, tau: f64) -> (f64, f64) {
    let theta = y * eta + t * tau;
    let zeta = (x - (tau * tau - eta * eta) / (eta * eta)) * eta.powf(2.0 / 3.0);
    (theta, zeta)
}

/// Sampled boundary phase θ₀ on a grid, with θ₀(y_ref) = 0.
#[derive(Clone, Debug, PartialEq)]
pub struct Theta0 {
    pub y: Vec<f64>,
    /// θ₀(y, t = 0)
    pub theta0: Vec<f64>,
    pub dtheta0: Vec<f64>,
}

fn dtheta0_at(b: &dyn Curvature, y: f64, eta: f64, tau: f64) -> Result<f64, JetError> {
    let z0 = crate::billiard::zeta0(eta, tau);
    let z1 = zeta1(b, y, eta, tau)?;
    let r = tau * tau + z0 * z1 * z1;
    if !(r > 0.0) {
        return Err(JetError::Radicand(r));
    }
    Ok(r.sqrt())
}

/// θ₀ by composite Gauss–Legendre (16 nodes per cell) from `y_ref`.
/// The t-dependence is the additive term tτ.
pub fn theta0(y_grid: &[f64], eta: f64, tau: f64, b: &dyn Curvature, y_ref: f64) -> Result<Theta0, JetError> {
    let (gx, gw) = gauss_legendre(16);
    let integral = |lo: f64, hi: f64| -> Result<f64, JetError> {
        // split long stretches so each cell has length ≤ 0.25
        let cells = ((hi - lo).abs() / 0.25).ceil().max(1.0) as usize;
        let h = (hi - lo) / cells as f64;
        let mut s = 0.0;
        for c in 0..cells {
            let mid = lo + (c as f64 + 0.5) * h;
            for (x, w) in gx.iter().zip(&gw) {
                s += 0.5 * h * w * dtheta0_at(b, mid + 0.5 * h * x, eta, tau)?;
            }
        }
        Ok(s)
    };
    let mut theta0 = Vec::with_capacity(y_grid.len());
    let mut dtheta0 = Vec::with_capacity(y_grid.len());
    let mut prev: Option<(f64, f64)> = None;
    for &y in y_grid {
        let v = match prev {
            None => integral(y_ref, y)?,
            Some((py, pv)) => pv + integral(py, y)?,
        };
        theta0.push(v);
        dtheta0.push(dtheta0_at(b, y, eta, tau)?);
        prev = Some((y, v));
    }
    Ok(Theta0 { y: y_grid.to_vec(), theta0, dtheta0 })
}

/// Phase jet sampled on a y grid.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseJet {
    pub order: usize,
    pub eta: f64,
    pub tau: f64,
    pub zeta0: f64,
    pub y_grid: Vec<f64>,
    pub theta0: Vec<f64>,
    pub dtheta0: Vec<f64>,
    /// theta[j][i] = ∂ₓ^j θ(0, y_i), j = 0..=order
    pub theta: Vec<Vec<f64>>,
    pub zeta: Vec<Vec<f64>>,
    pub local: Vec<LocalJet>,
}

pub fn jet_recursion(b: &dyn Curvature, order: usize, eta: f64, tau: f64, y_grid: &[f64]) -> Result<PhaseJet, JetError> {
    let th = theta0(y_grid, eta, tau, b, 0.0)?;
    let mut theta = vec![Vec::with_capacity(y_grid.len()); order + 1];
    let mut zeta = vec![Vec::with_capacity(y_grid.len()); order + 1];
    let mut local = Vec::with_capacity(y_grid.len());
    for (i, &y) in y_grid.iter().enumerate() {
        let mut jet = local_jet(b, y, order, eta, tau)?;
        // anchor the constant so θ̃(0, y_i) = θ₀(y_i)
        jet.theta[0][0] = th.theta0[i];
        for j in 0..=order {
            theta[j].push(jet.theta_j(j));
            zeta[j].push(jet.zeta_j(j));
        }
        local.push(jet);
    }
    Ok(PhaseJet {
        order,
        eta,
        tau,
        zeta0: crate::billiard::zeta0(eta, tau),
        y_grid: y_grid.to_vec(),
        theta0: th.theta0,
        dtheta0: th.dtheta0,
        theta,
        zeta,
        local,
    })
}

impl PhaseJet {
    /// Column names and rows for tabular export.
    pub fn table(&self) -> (Vec<String>, Vec<Vec<f64>>) {
        let mut cols = vec!["y".to_string(), "theta0".into(), "dtheta0".into()];
        for j in 1..=self.order {
            cols.push(format!("theta{j}"));
        }
        for j in 1..=self.order {
            cols.push(format!("zeta{j}"));
        }
        let rows = (0..self.y_grid.len())
            .map(|i| {
                let mut r = vec![self.y_grid[i], self.theta0[i], self.dtheta0[i]];
                r.extend((1..=self.order).map(|j| self.theta[j][i]));
                r.extend((1..=self.order).map(|j| self.zeta[j][i]));
                r
            })
            .collect();
        (cols, rows)
    }
}

/// Root x = C(y, η, τ) of ζ(x, y) = 0.
pub fn caustic(jet: &LocalJet) -> Result<f64, JetError> {
    let f = |x: f64| jet.zeta_at(x, jet.y0);
    let d = |x: f64| {
        let mut s = 0.0;
        for j in (1..jet.zeta.len()).rev() {
            s = s * x + j as f64 * jet.zeta[j][0];
        }
        s
    };
    let z1 = jet.zeta[1][0];
    let mut hi = (2.0 * jet.zeta0.abs() / z1).max(1e-12);
    let (lo, f_lo) = (0.0, f(0.0));
    if f_lo >= 0.0 {
        return if f_lo == 0.0 { Ok(0.0) } else { Err(JetError::NoCaustic(0.0)) };
    }
    while f(hi) < 0.0 {
        hi *= 2.0;
        if hi > 1.0 {
            return Err(JetError::NoCaustic(hi));
        }
    }
    let (mut lo, mut hi) = (lo, hi);
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let dx = d(x);
        let mut nx = x - fx / dx;
        if !(nx > lo && nx < hi) {
            nx = 0.5 * (lo + hi);
        }
        if (nx - x).abs() <= 1e-16 * x.abs().max(1e-300) || hi - lo <= 1e-17 {
            return Ok(nx);
        }
        x = nx;
    }
    Ok(x)
}
