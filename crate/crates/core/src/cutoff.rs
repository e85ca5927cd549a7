//! Smooth cutoffs: the symbol cutoff κ(w), the frequency window Ψ(η), and
//! the C∞ smoothstep they are built from.

/// C∞ step: 0 for x ≤ 0, 1 for x ≥ 1.
pub fn smoothstep(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / x).exp();
        let b = (-1.0 / (1.0 - x)).exp();
        a / (a + b)
    }
}

/// Standard bump exp(-1/(1-u²)) on (-1, 1), unnormalised.
pub fn bump(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - u * u)).exp()
    }
}

/// ∫ bump over (-1, 1).
pub const BUMP_MASS: f64 = 0.443_993_816_168_079_4;

/// κ(w): equal to 1 on |w| ≤ inner, 0 on |w| ≥ outer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Kappa {
    pub inner: f64,
    pub outer: f64,
}

impl Default for Kappa {
    fn default() -> Self {
        Kappa { inner: 0.125, outer: 0.25 }
    }
}

impl Kappa {
    pub fn with_half_width(outer: f64) -> Self {
        Kappa { inner: 0.5 * outer, outer }
    }

    pub fn eval(&self, w: f64) -> f64 {
        1.0 - smoothstep((w.abs() - self.inner) / (self.outer - self.inner))
    }
}

/// Ψ(η): bump centred at 1 with half-width `half_width`, Ψ(1) = 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Psi {
    pub half_width: f64,
}

impl Default for Psi {
    fn default() -> Self {
        Psi { half_width: 1.0 / 16.0 }
    }
}

impl Psi {
    pub fn eval(&self, eta: f64) -> f64 {
        std::f64::consts::E * bump((eta - 1.0) / self.half_width)
    }

    pub fn support(&self) -> (f64, f64) {
        (1.0 - self.half_width, 1.0 + self.half_width)
    }
}
