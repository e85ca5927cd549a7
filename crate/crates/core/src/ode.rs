//! Adaptive Dormand–Prince 5(4) integrator.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at s = {0}")]
    StepUnderflow(f64),
    #[error("step budget exhausted at s = {0}")]
    TooManySteps(f64),
    #[error("non-finite derivative at s = {0}")]
    NonFinite(f64),
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

#[derive(Clone, Copy, Debug)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { rtol: 1e-11, atol: 1e-11 }
    }
}

/// Integrate y' = f(s, y) from s0 to s1 and return y(s1).
pub fn integrate<F>(f: F, s0: f64, y0: &[f64], s1: f64, tol: Tolerance) -> Result<Vec<f64>, OdeError>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut s = s0;
    let span = s1 - s0;
    if span == 0.0 {
        return Ok(y);
    }
    let dir = span.signum();
    let mut h = 0.01 * span.abs().max(1e-3);
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    for _ in 0..1_000_000 {
        let rest = (s1 - s) * dir;
        if rest <= 0.0 {
            return Ok(y);
        }
        if h > rest {
            h = rest;
        }
        k[0] = f(s, &y);
        for st in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for j in 0..st {
                    acc += dir * h * A[st][j] * k[j][i];
                }
                tmp[i] = acc;
            }
            k[st] = f(s + dir * h * C[st], &tmp);
        }
        let mut err: f64 = 0.0;
        let mut y5 = vec![0.0; n];
        for i in 0..n {
            let mut d5 = 0.0;
            let mut d4 = 0.0;
            for j in 0..7 {
                d5 += B5[j] * k[j][i];
                d4 += B4[j] * k[j][i];
            }
            y5[i] = y[i] + dir * h * d5;
            let sc = tol.atol + tol.rtol * y[i].abs().max(y5[i].abs());
            err = err.max((dir * h * (d5 - d4)).abs() / sc);
        }
        if !err.is_finite() {
            return Err(OdeError::NonFinite(s));
        }
        if err <= 1.0 {
            s += dir * h;
            y = y5;
            if (s1 - s) * dir <= 1e-15 * span.abs() {
                return Ok(y);
            }
        }
        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= fac;
        if h < 1e-14 * span.abs() {
            return Err(OdeError::StepUnderflow(s));
        }
    }
    Err(OdeError::TooManySteps(s))
}
