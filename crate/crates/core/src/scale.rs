//! The coupled semiclassical parameters h, ε, a, λ, N, c₀.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScaleError {
    #[error("h = {0} must lie in (0, 1]")]
    H(f64),
    #[error("epsilon = {0} must lie in (0, 1/4)")]
    Epsilon(f64),
    #[error("C0 = {0} must lie in (0, 1]")]
    BigC0(f64),
    #[error("c0 = {0} must lie in (0, 3/8]")]
    SmallC0(f64),
    #[error("window length Y = {0} must be positive")]
    Window(f64),
    #[error("a = {a} is below the gallery threshold M h^(2/3) = {bound}")]
    Gallery { a: f64, bound: f64 },
    #[error("validity condition lambda h^eps = {lhs} >= N = {n} fails")]
    Validity { lhs: f64, n: usize },
    #[error("{0} must be positive")]
    Positive(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaleParams {
    pub h: f64,
    pub eps: f64,
    /// tangential window length Y
    pub window: f64,
    /// C₀
    pub big_c0: f64,
    /// c₀
    pub c0: f64,
    /// gallery-regime constant M
    pub m_gallery: f64,
    /// constant in front of N
    pub n_factor: f64,
    pub enforce_validity: bool,
}

impl Default for ScaleParams {
    fn default() -> Self {
        ScaleParams {
            h: 1e-3,
            eps: 0.1,
            window: 400.0,
            big_c0: 1.0,
            c0: 0.375,
            m_gallery: 4.0,
            n_factor: 1.0,
            enforce_validity: true,
        }
    }
}

impl ScaleParams {
    pub fn new(h: f64, eps: f64) -> Result<Self, ScaleError> {
        let s = ScaleParams { h, eps, ..Default::default() };
        s.validate()?;
        Ok(s)
    }

    pub fn with_h(&self, h: f64) -> Self {
        ScaleParams { h, ..*self }
    }

    pub fn a(&self) -> f64 {
        0.5 * self.big_c0.sqrt() * self.window.sqrt() * self.h.powf(0.5 * (1.0 - self.eps))
    }

    pub fn lambda(&self) -> f64 {
        self.a().powf(1.5) / self.h
    }

    /// (1+a)^{1/2}, the tangential speed of the packet.
    pub fn speed(&self) -> f64 {
        (1.0 + self.a()).sqrt()
    }

    pub fn n_max(&self) -> usize {
        let v = self.n_factor * self.big_c0 * self.window * self.a().powf(-0.5) / 4.0;
        // guard against 149.99999999 rounding down
        (v * (1.0 + 1e-12)).floor().max(0.0) as usize
    }

    /// Time offset of one reflection, 4 c a^{1/2}.
    pub fn period(&self) -> f64 {
        4.0 * self.speed() * self.a().sqrt()
    }

    pub fn validate(&self) -> Result<(), ScaleError> {
        if !(self.h > 0.0 && self.h <= 1.0) {
            return Err(ScaleError::H(self.h));
        }
        if !(self.eps > 0.0 && self.eps < 0.25) {
            return Err(ScaleError::Epsilon(self.eps));
        }
        if !(self.big_c0 > 0.0 && self.big_c0 <= 1.0) {
            return Err(ScaleError::BigC0(self.big_c0));
        }
        if !(self.c0 > 0.0 && self.c0 <= 0.375) {
            return Err(ScaleError::SmallC0(self.c0));
        }
        if !(self.window > 0.0) {
            return Err(ScaleError::Window(self.window));
        }
        if !(self.m_gallery >= 1.0) {
            return Err(ScaleError::Positive("M (at least 1)"));
        }
        if !(self.n_factor > 0.0) {
            return Err(ScaleError::Positive("n_factor"));
        }
        let a = self.a();
        let bound = self.m_gallery * self.h.powf(2.0 / 3.0);
        if a < bound {
            return Err(ScaleError::Gallery { a, bound });
        }
        if self.enforce_validity {
            let lhs = self.lambda() * self.h.powf(self.eps);
            let n = self.n_max();
            if lhs * (1.0 + 1e-9) < n as f64 {
                return Err(ScaleError::Validity { lhs, n });
            }
        }
        Ok(())
    }
}
