//! Billiard ball maps of the model domain and the Hamiltonian flow that
//! interpolates them.

use crate::airy::Sign;
use crate::ode::{self, OdeError, Tolerance};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BilliardError {
    #[error("point (eta={eta}, tau={tau}) is not hyperbolic (need |tau| > |eta|, eta > 0)")]
    NotHyperbolic { eta: f64, tau: f64 },
    #[error(transparent)]
    Ode(#[from] OdeError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhasePoint {
    pub y: f64,
    pub t: f64,
    pub eta: f64,
    pub tau: f64,
}

impl PhasePoint {
    pub fn new(y: f64, t: f64, eta: f64, tau: f64) -> Self {
        PhasePoint { y, t, eta, tau }
    }

    pub fn is_hyperbolic(&self) -> bool {
        self.eta > 0.0 && self.tau.abs() > self.eta
    }
}

/// ζ₀(η, τ) = -(τ² - η²) η^{-4/3}.
pub fn zeta0(eta: f64, tau: f64) -> f64 {
    -(tau * tau - eta * eta) * eta.powf(-4.0 / 3.0)
}

/// (-ζ₀)^{3/2} = (τ² - η²)^{3/2} / η².
pub fn hamiltonian(eta: f64, tau: f64) -> f64 {
    (tau * tau - eta * eta).max(0.0).powf(1.5) / (eta * eta)
}

fn check(p: &PhasePoint) -> Result<f64, BilliardError> {
    if !p.is_hyperbolic() {
        return Err(BilliardError::NotHyperbolic { eta: p.eta, tau: p.tau });
    }
    Ok((p.tau * p.tau / (p.eta * p.eta) - 1.0).sqrt())
}

pub fn delta(sign: Sign, p: PhasePoint) -> Result<PhasePoint, BilliardError> {
    delta_iter(sign, 1, p)
}

/// n-fold iterate in closed form; the maps only translate (y, t).
pub fn delta_iter(sign: Sign, n: u32, p: PhasePoint) -> Result<PhasePoint, BilliardError> {
    let s = check(&p)?;
    let sg = sign.as_f64();
    let nf = n as f64;
    let dy = 4.0 * s + 8.0 / 3.0 * s * s * s;
    let dt = -4.0 * s * p.tau / p.eta;
    Ok(PhasePoint {
        y: p.y + sg * nf * dy,
        t: p.t + sg * nf * dt,
        ..p
    })
}

/// Integrate the Hamiltonian field of (-ζ₀)^{3/2} for flow time ±4/3.
///
/// The field is taken as (ẏ, ṫ, η̇, τ̇) = (-∂_η H, -∂_τ H, ∂_y H, ∂_t H); with
/// this orientation the forward flow reproduces δ⁺.
pub fn hamiltonian_flow(p: PhasePoint, time: f64, tol: Tolerance) -> Result<PhasePoint, BilliardError> {
    check(&p)?;
    let field = |_s: f64, v: &[f64]| -> Vec<f64> {
        let (eta, tau) = (v[2], v[3]);
        let r = (tau * tau - eta * eta).max(0.0);
        let sr = r.sqrt();
        let d_eta = -3.0 * sr / eta - 2.0 * r * sr / (eta * eta * eta);
        let d_tau = 3.0 * tau * sr / (eta * eta);
        vec![-d_eta, -d_tau, 0.0, 0.0]
    };
    let end = ode::integrate(field, 0.0, &[p.y, p.t, p.eta, p.tau], time, tol)?;
    Ok(PhasePoint::new(end[0], end[1], end[2], end[3]))
}

pub fn hamiltonian_flow_check(sign: Sign, p: PhasePoint) -> Result<PhasePoint, BilliardError> {
    hamiltonian_flow(p, sign.as_f64() * 4.0 / 3.0, Tolerance::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gallery_point(a: f64) -> PhasePoint {
        PhasePoint::new(0.0, 0.0, 1.0, -(1.0 + a).sqrt())
    }

    #[test]
    fn zeta0_examples() {
        assert_eq!(zeta0(1.0, -1.0), 0.0);
        let a = 0.37;
        assert!((zeta0(1.0, -(1.0f64 + a).sqrt()) + a).abs() < 1e-15);
    }

    #[test]
    fn delta_plus_closed_form() {
        let a: f64 = 0.01;
        let q = delta(Sign::Plus, gallery_point(a)).unwrap();
        assert!((q.y - (4.0 * a.sqrt() + 8.0 / 3.0 * a.powf(1.5))).abs() < 1e-13);
        assert!((q.t - 4.0 * a.sqrt() * (1.0 + a).sqrt()).abs() < 1e-13);
    }

    #[test]
    fn elliptic_rejected() {
        assert!(delta(Sign::Plus, PhasePoint::new(0.0, 0.0, 1.0, 0.5)).is_err());
    }

    #[test]
    fn flow_matches_map() {
        for a in [1e-2, 1e-3] {
            for s in [Sign::Plus, Sign::Minus] {
                let p = gallery_point(a);
                let f = hamiltonian_flow_check(s, p).unwrap();
                let d = delta(s, p).unwrap();
                assert!((f.y - d.y).abs() < 1e-9 && (f.t - d.t).abs() < 1e-9);
                assert_eq!((f.eta, f.tau), (p.eta, p.tau));
            }
        }
    }

    proptest! {
        #[test]
        fn inverse_and_group_law(y in -5.0f64..5.0, t in -5.0f64..5.0, eta in 0.5f64..2.0,
                                 r in 1.0001f64..2.0, n in 0u32..6, m in 0u32..6) {
            let p = PhasePoint::new(y, t, eta, -r * eta);
            let back = delta(Sign::Minus, delta(Sign::Plus, p).unwrap()).unwrap();
            prop_assert!((back.y - p.y).abs() < 1e-12 && (back.t - p.t).abs() < 1e-12);
            let a = delta_iter(Sign::Plus, n, delta_iter(Sign::Plus, m, p).unwrap()).unwrap();
            let b = delta_iter(Sign::Plus, n + m, p).unwrap();
            prop_assert!((a.y - b.y).abs() < 1e-11 && (a.t - b.t).abs() < 1e-11);
            prop_assert_eq!(zeta0(a.eta, a.tau), zeta0(p.eta, p.tau));
        }

        #[test]
        fn zeta0_homogeneous(eta in 0.5f64..2.0, tau in -3.0f64..3.0, s in 0.25f64..4.0) {
            let lhs = zeta0(s * eta, s * tau);
            let rhs = s.powf(2.0 / 3.0) * zeta0(eta, tau);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
        }

        #[test]
        fn y_shift_increases_with_slope(r1 in 1.001f64..3.0, dr in 0.001f64..1.0) {
            let p1 = PhasePoint::new(0.0, 0.0, 1.0, -r1);
            let p2 = PhasePoint::new(0.0, 0.0, 1.0, -(r1 + dr));
            prop_assert!(delta(Sign::Plus, p2).unwrap().y > delta(Sign::Plus, p1).unwrap().y);
        }
    }
}
