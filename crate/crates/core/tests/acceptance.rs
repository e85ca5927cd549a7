//! Acceptance criteria 1-10, one line each.
//!
//! Runs without the libtest harness so the report is never captured. A
//! criterion that is not met prints FAIL and the run still succeeds; only a
//! panic (a bug in this file) fails `cargo test`.
//!
//! `CUSPWAVE_ACCEPT=1,5,9` restricts the run to the listed criteria.

use cuspwave::airy::{ai_real, airy_ai, airy_branch, airy_zero, Sign};
use cuspwave::billiard::{delta, delta_iter, hamiltonian_flow_check, zeta0, PhasePoint};
use cuspwave::cusp::{frequency_fraction, half_plane_s, support_diagnostics, support_overlap, trace_pairing, CuspSpec, RescaledGrid};
use cuspwave::eikonal::{friedlander_phase, local_jet, Curvature, LocalJet, PolyCurvature};
use cuspwave::norms::{beta_loss, fit_loglog, geometric_ladder, measure_ladder, spectral_crosscheck, Fit, LadderRecord};
use cuspwave::scale::ScaleParams;
use cuspwave::spectrum::{periodic, propagate, synthesize, trapezoid, Field2D, ModeBasis, WaveState};
use cuspwave::symbols::{loglog_slope, make_seed, op_i, op_j, reflect_fft, reflect_kernel, reflect_n, SymbolOptions, CLASS_DELTA};
use num_complex::Complex64 as C64;
use std::error::Error;
use std::f64::consts::PI;
use std::time::Instant;

type Res = Result<(bool, String), Box<dyn Error>>;

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

// ---------------------------------------------------------------- 1. Airy

/// Γ(1/3), Γ(2/3) to 19 digits; Ai(0) = 1/(3^{2/3}Γ(2/3)), Ai′(0) = −1/(3^{1/3}Γ(1/3)).
const GAMMA_13: f64 = 2.678_938_534_707_747_633;
const GAMMA_23: f64 = 1.354_117_939_426_400_417;

fn rk4_step(x: f64, y: [f64; 2], h: f64) -> [f64; 2] {
    let f = |x: f64, y: [f64; 2]| [y[1], x * y[0]];
    let k1 = f(x, y);
    let k2 = f(x + 0.5 * h, [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
    let k3 = f(x + 0.5 * h, [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
    let k4 = f(x + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
    [y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]), y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])]
}

/// First `count` zeros of Ai by integrating Ai″ = xAi leftwards from the
/// closed-form values at 0 and bisecting inside each bracketing step.
fn ode_zeros(count: usize) -> Vec<f64> {
    let ai0 = 1.0 / (3f64.powf(2.0 / 3.0) * GAMMA_23);
    let aip0 = -1.0 / (3f64.cbrt() * GAMMA_13);
    let h = -2e-4;
    let (mut x, mut y) = (0.0, [ai0, aip0]);
    let mut out = Vec::new();
    while out.len() < count {
        let next = rk4_step(x, y, h);
        if next[0].signum() != y[0].signum() {
            let (mut lo, mut hi) = (0.0, h);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if rk4_step(x, y, mid)[0].signum() == y[0].signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            out.push(-(x + 0.5 * (lo + hi)));
        }
        x += h;
        y = next;
    }
    out
}

fn criterion_1() -> Res {
    let oracle = ode_zeros(10);
    let mut zero_err: f64 = 0.0;
    for (k, w) in oracle.iter().enumerate() {
        zero_err = zero_err.max((airy_zero(k + 1)? - w).abs());
    }
    let (a0, d0) = ai_real(0.0)?;
    let v_err = (a0 - 1.0 / (3f64.powf(2.0 / 3.0) * GAMMA_23)).abs().max((d0 + 1.0 / (3f64.cbrt() * GAMMA_13)).abs());
    let mut branch: f64 = 0.0;
    for k in 0..1000 {
        let z = C64::new(-10.0 + 20.0 * k as f64 / 999.0, 0.0);
        let (p, m) = (airy_branch(Sign::Plus, z)?, airy_branch(Sign::Minus, z)?);
        branch = branch.max((p + m - airy_ai(z)?.ai).norm() / (p.norm() + m.norm()));
    }
    let ok = zero_err <= 1e-10 && v_err <= 1e-10 && branch <= 1e-12;
    Ok((ok, format!("zeros {zero_err:.1e}, Ai(0)/Ai'(0) {v_err:.1e}, A+ + A- - Ai {branch:.1e} (relative to |A+|+|A-|)")))
}

// ------------------------------------------------------ 2. spectral solver

fn criterion_2() -> Res {
    let basis = ModeBasis::for_period(2.0 * PI, 20.0, 30.0, 6)?;
    let mut st = WaveState::zeros(&basis);
    for (i, (p, v)) in st.pos.iter_mut().zip(st.vel.iter_mut()).enumerate() {
        let f = i as f64;
        *p = C64::new((1.3 * f).sin(), (0.7 * f).cos());
        *v = C64::new((2.1 * f).cos(), 0.5 * (0.3 * f).sin());
    }
    let grid = Field2D::zeros(trapezoid(0.0, 0.02, 40), periodic(0.0, 2.0 * PI / 256.0, 256));
    let u = synthesize(&st, &basis, &grid)?;
    let trace = (0..u.ny()).map(|j| u.at(0, j).norm()).fold(0.0, f64::max) / u.max_abs();
    let e0 = st.energy(&basis);
    let energy = (0..=20).map(|m| (propagate(&st, &basis, 0.05 * m as f64).energy(&basis) / e0 - 1.0).abs()).fold(0.0, f64::max);
    let a = propagate(&propagate(&st, &basis, 0.37), &basis, 0.51);
    let b = propagate(&st, &basis, 0.88);
    let scale = b.pos.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let group = a.pos.iter().zip(&b.pos).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale;
    let ok = trace <= 1e-8 && energy <= 1e-10 && group <= 1e-10;
    Ok((ok, format!("Dirichlet trace {trace:.1e}, energy drift {energy:.1e}, group law {group:.1e}")))
}

// ------------------------------------------------------------- 3. billiard

fn criterion_3() -> Res {
    let mut flow: f64 = 0.0;
    let mut iter: f64 = 0.0;
    for a in [1e-2f64, 1e-3] {
        let p = PhasePoint::new(0.0, 0.0, 1.0, -(1.0 + a).sqrt());
        for s in [Sign::Plus, Sign::Minus] {
            let f = hamiltonian_flow_check(s, p)?;
            let d = delta(s, p)?;
            flow = flow.max((f.y - d.y).abs()).max((f.t - d.t).abs());
            let mut q = p;
            for n in 1..=8 {
                q = delta(s, q)?;
                let c = delta_iter(s, n, p)?;
                iter = iter.max((c.y - q.y).abs() / c.y.abs().max(1.0)).max((c.t - q.t).abs() / c.t.abs().max(1.0));
            }
        }
    }
    let ok = flow <= 1e-9 && iter <= 1e-14;
    Ok((ok, format!("flow vs delta {flow:.1e}, closed form vs composition {iter:.1e}")))
}

// -------------------------------------------------------------- 4. eikonal

fn d4(f: &dyn Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}

/// |E1| + |E2| of the eikonal system at (x, y0) by finite differences.
fn eikonal_residual(jet: &LocalJet, b: &dyn Curvature, x: f64) -> f64 {
    let y = jet.y0;
    let h = 1e-3;
    let tx = d4(&|s| jet.theta_at(s, y), x, h);
    let ty = d4(&|s| jet.theta_at(x, s), y, h);
    let zx = d4(&|s| jet.zeta_at(s, y), x, h);
    let zy = d4(&|s| jet.zeta_at(x, s), y, h);
    let g = 1.0 + x * b.eval(y);
    let z = jet.zeta_at(x, y);
    let e1 = tx * tx + g * ty * ty - jet.tau * jet.tau - z * (zx * zx + g * zy * zy);
    let e2 = tx * zx + g * ty * zy;
    e1.abs() + e2.abs()
}

fn criterion_4() -> Res {
    // flat boundary: jets against the closed-form phases
    let (eta, tau) = (1.3, -1.3 * 1.02f64.sqrt());
    let y0 = 0.4;
    let jet = local_jet(&PolyCurvature::flat(), y0, 6, eta, tau)?;
    let (th_ref, _) = friedlander_phase(0.0, y0, 0.0, eta, tau);
    let mut fried: f64 = 0.0;
    for x in [0.0, 0.01, 0.05, 0.1] {
        for y in [0.3, 0.4, 0.55] {
            let (th, z) = friedlander_phase(x, y, 0.0, eta, tau);
            fried = fried.max((jet.theta_at(x, y) - (th - th_ref)).abs()).max((jet.zeta_at(x, y) - z).abs());
        }
    }
    // residual of the order-J jet scales like x^J
    let b = PolyCurvature::new(vec![1.0, 0.05, 0.02]);
    let order = 3;
    let jet = local_jet(&b, 0.3, order, 1.0, -(1.01f64).sqrt())?;
    let ratios: Vec<f64> = [0.01, 0.02, 0.04, 0.08].iter().map(|&x| eikonal_residual(&jet, &b, x) / x.powi(order as i32)).collect();
    let spread = ratios.iter().cloned().fold(f64::MIN, f64::max) / ratios.iter().cloned().fold(f64::MAX, f64::min);
    // ∂²_{yη}θ₀ → b^{2/3}
    let b = PolyCurvature::new(vec![1.0, 0.05]);
    let (y, dh) = (1.0, 1e-5);
    let mut mixed: f64 = 0.0;
    let mut mixed_ok = true;
    for a in [1e-2f64, 1e-3] {
        let tau = -(1.0 + a).sqrt();
        let dt0 = |e: f64| local_jet(&b, y, 4, e, tau).map(|j| j.dtheta0());
        let d = (dt0(1.0 + dh)? - dt0(1.0 - dh)?) / (2.0 * dh);
        let dev = (d - b.eval(y).powf(2.0 / 3.0)).abs();
        mixed_ok &= dev <= 2.0 * zeta0(1.0, tau).abs();
        mixed = mixed.max(dev / zeta0(1.0, tau).abs());
    }
    let ok = fried <= 1e-13 && spread <= 3.0 && mixed_ok;
    Ok((ok, format!("Friedlander {fried:.1e}, residual/x^J spread {spread:.2}, |d2theta0 - b^(2/3)|/|zeta0| {mixed:.2}")))
}

// ------------------------------------------------------ 5. operator calculus

fn criterion_5() -> Res {
    let lams = [60.0, 120.0, 240.0, 480.0];
    let mut res = Vec::new();
    for &l in &lams {
        let p = make_seed(0.375, l)?;
        let back = op_j(Sign::Plus, &op_i(Sign::Plus, &p, 1.0)?, 1.0)?;
        res.push(back.sub(&p)?.sup() / p.sup());
    }
    let slope = loglog_slope(&lams, &res);
    let p = make_seed(0.375, 200.0)?;
    let d = CLASS_DELTA;
    let q = op_i(Sign::Plus, &p, 1.0)?;
    let r = op_i(Sign::Minus, &p, 1.0)?;
    let ext = q.exterior_mass(-1.375 - d, -0.625 + d).max(r.exterior_mass(0.625 - d, 1.375 + d));
    let sc = ScaleParams { enforce_validity: false, ..ScaleParams::default() };
    let it = reflect_n(&p, 1.0, 2, &sc)?;
    let opts = SymbolOptions::default();
    let dual = it.sub(&reflect_kernel(&p, 1.0, 2, &opts)?)?.sup().max(it.sub(&reflect_fft(&p, 1.0, 2, &opts)?)?.sup()) / it.sup();
    // J∘I leaves only the spectral mass outside κ's plateau, so the residual
    // can hit the floor before the largest λ; the slope is taken over the
    // points still above it
    let live: Vec<usize> = (0..lams.len()).filter(|&i| res[i] > 1e-14).collect();
    let slope = if live.len() >= 2 {
        loglog_slope(&live.iter().map(|&i| lams[i]).collect::<Vec<_>>(), &live.iter().map(|&i| res[i]).collect::<Vec<_>>())
    } else {
        slope
    };
    let ok = slope <= -3.0 && ext <= 1e-6 && dual <= 1e-6;
    let shown: Vec<String> = res.iter().map(|r| format!("{r:.1e}")).collect();
    Ok((ok, format!("J+I+ residuals [{}] slope {slope:.2}, exterior mass {ext:.1e}, reflect_n paths {dual:.1e}", shown.join(", "))))
}

// ------------------------------------------------- 6. boundary cancellation

fn criterion_6() -> Res {
    let hs = [1e-3, 1e-4, 1e-5];
    let mut parts = Vec::new();
    let mut ok = true;
    for n in 0..3 {
        let mut lam = Vec::new();
        let mut ratio = Vec::new();
        for &h in &hs {
            let sp = CuspSpec::new(ScaleParams { h, ..Default::default() }, n)?;
            let (r, b) = trace_pairing(&sp)?;
            lam.push(sp.lambda());
            ratio.push((r / b).sqrt());
        }
        let s = loglog_slope(&lam, &ratio);
        ok &= s <= -2.0;
        parts.push(format!("n={n}: {:.1e}..{:.1e} slope {s:.2}", ratio[0], ratio[2]));
    }
    Ok((ok, parts.join("; ")))
}

// -------------------------------------------------------- 7/8. ladders

struct Ladders {
    main: LadderRecord,
    half_eps: LadderRecord,
    small_eps: LadderRecord,
}

fn ladder(eps: f64, rs: &[f64]) -> Result<LadderRecord, Box<dyn Error>> {
    let hs = geometric_ladder(2f64.powi(-19), 2f64.powi(-10), 10)?;
    let template = CuspSpec::new(ScaleParams { h: hs[0], eps, ..Default::default() }, 0)?;
    Ok(measure_ladder(&template, &hs, 0.0, rs)?)
}

fn target(r: f64, eps: f64) -> f64 {
    if r == 2.0 {
        1.0 + (1.0 - eps) / 8.0
    } else {
        1.0 / 3.0 + 5.0 / (3.0 * r)
    }
}

fn criterion_7(l: &Ladders) -> Res {
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, r) in [2.0, 6.0, 8.0, 64.0].iter().enumerate() {
        let label = &l.main.labels[k];
        let f = l.main.fit(label)?;
        let tol = if *r == 2.0 { 0.03 } else { 0.02 };
        let want = target(*r, 0.1);
        let hit = (f.slope - want).abs() <= tol;
        ok &= hit;
        let g = l.half_eps.fit(label)?;
        let indep = if *r > 4.0 {
            let se = (f.stderr.powi(2) + g.stderr.powi(2)).sqrt();
            let same = (f.slope - g.slope).abs() <= 2.0 * se;
            ok &= same;
            format!(", eps=0.05 {:.4} ({})", g.slope, if same { "same" } else { "differs" })
        } else {
            String::new()
        };
        parts.push(format!("{label} {:.4}±{:.1e} vs {want:.4}{indep}", f.slope, f.stderr));
    }
    Ok((ok, parts.join("; ")))
}

fn quotient_fit(rec: &LadderRecord, k: usize) -> Result<Fit, Box<dyn Error>> {
    let h: Vec<f64> = rec.rows.iter().map(|r| r.h).collect();
    let q: Vec<f64> = rec.rows.iter().map(|r| r.values[k] / r.values[0]).collect();
    let e: Vec<f64> = rec.rows.iter().zip(&q).map(|(r, q)| q * (r.errors[k] / r.values[k] + r.errors[0] / r.values[0])).collect();
    Ok(fit_loglog(&h, &q, &e)?)
}

fn criterion_8(l: &Ladders) -> Res {
    let bl = beta_loss(64.0)?;
    let f = quotient_fit(&l.small_eps, 1)?;
    let bound = -bl.free_space - 0.5 * bl.loss;
    let ok = f.slope <= bound;
    let off = f.slope + bl.beta;
    let near = if off.abs() <= 0.02 { "within" } else { "outside" };
    Ok((ok, format!("r=64 eps=0.02 quotient slope {:.4}±{:.4} <= {bound:.4}; -beta {:.4}, off by {off:.4} ({near} 0.02)", f.slope, f.stderr, -bl.beta)))
}

// ------------------------------------------------------- 9. cross-check

fn criterion_9() -> Res {
    let sc = ScaleParams { h: 1e-3, window: 60.0, ..Default::default() };
    let sp = CuspSpec::new(sc, 0)?;
    let j0 = sp.inner_interval();
    let j1 = sp.with_n(1).inner_interval();
    let times = [0.5 * j0.1, 0.5 * (j1.0 + j1.1), j1.0 + 0.75 * (j1.1 - j1.0)];
    let (setup, rows) = spectral_crosscheck(&sp, &times, &[2.0, 6.0, 64.0])?;
    let worst = rows.iter().map(|r| (r.ratio() - 1.0).abs()).fold(0.0, f64::max);
    let ok = worst <= 0.3;
    let (lo, hi) = rows.iter().fold((f64::MAX, f64::MIN), |(a, b), r| (a.min(r.ratio()), b.max(r.ratio())));
    Ok((ok, format!("{} rows, exact/parametrix in [{lo:.3}, {hi:.3}], projection error {:.1e}, {} modes x {} eta", rows.len(), setup.projection_error, setup.modes, setup.etas)))
}

// ----------------------------------------------------- 10. localization

fn criterion_10() -> Res {
    let sc = ScaleParams { h: 1e-4, ..Default::default() };
    let base = CuspSpec::new(sc, 0)?;
    let need = sc.c0 * base.a().sqrt();
    let (mut outside, mut near, mut len, mut freq) = (0.0f64, 0.0f64, f64::MAX, 1.0f64);
    for n in 0..3 {
        let sp = base.with_n(n);
        let rep = support_diagnostics(&sp, 41)?;
        outside = outside.max(rep.outside_fraction);
        near = near.max(rep.near_boundary_center);
        len = len.min(rep.off_boundary_length);
        let lam = sp.lambda();
        let (s0, ds, ns) = half_plane_s(lam);
        let g = RescaledGrid { s0, ds, ns, y0: -1.0, dy: 0.5 / lam, ny: 2 };
        freq = freq.min(frequency_fraction(&sp, sp.t_of_z(2.0 * n as f64), &g, 2.0 * sp.psi.half_width)?);
    }
    let overlap = support_overlap(&base, &base.with_n(2), 81)?;
    let ok = outside <= 1e-6 && near <= 1e-4 && len >= need && freq >= 0.999 && overlap <= 1e-8;
    Ok((
        ok,
        format!(
            "outside I_n(2c0) {outside:.1e}, x<a/4 {near:.1e}, |J| {len:.3} >= {need:.3}, frequency {freq:.8}, overlap(0,2) {overlap:.1e}"
        ),
    ))
}

fn main() {
    let only: Option<Vec<u32>> = std::env::var("CUSPWAVE_ACCEPT").ok().map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |k: u32| only.as_ref().is_none_or(|v| v.contains(&k));
    let names = [
        "Airy core",
        "spectral propagator",
        "billiard/flow identity",
        "eikonal jets",
        "operator calculus",
        "boundary cancellation",
        "norm scalings",
        "Strichartz-loss synthesis",
        "exact-evolution cross-check",
        "localization",
    ];
    let report = |k: u32, r: Res, started: Instant| {
        let secs = started.elapsed().as_secs_f64();
        match r {
            Ok((ok, msg)) => println!("criterion {k:>2} {:<28} {}  {msg}  [{secs:.0}s]", names[k as usize - 1], verdict(ok)),
            Err(e) => println!("criterion {k:>2} {:<28} FAIL  error: {e}  [{secs:.0}s]", names[k as usize - 1]),
        }
    };
    let simple: [(u32, fn() -> Res); 6] = [(1, criterion_1), (2, criterion_2), (3, criterion_3), (4, criterion_4), (5, criterion_5), (6, criterion_6)];
    for (k, f) in simple {
        if wanted(k) {
            let t = Instant::now();
            report(k, f(), t);
        }
    }
    if wanted(7) || wanted(8) {
        let t = Instant::now();
        let ladders = (|| -> Result<Ladders, Box<dyn Error>> {
            let rs = [2.0, 6.0, 8.0, 64.0];
            Ok(Ladders { main: ladder(0.1, &rs)?, half_eps: ladder(0.05, &rs)?, small_eps: ladder(0.02, &[2.0, 64.0])? })
        })();
        match ladders {
            Ok(l) => {
                if wanted(7) {
                    report(7, criterion_7(&l), t);
                }
                if wanted(8) {
                    report(8, criterion_8(&l), t);
                }
            }
            Err(e) => {
                for k in [7, 8].into_iter().filter(|k| wanted(*k)) {
                    report(k, Err(e.to_string().into()), t);
                }
            }
        }
    }
    for (k, f) in [(9u32, criterion_9 as fn() -> Res), (10, criterion_10)] {
        if wanted(k) {
            let t = Instant::now();
            report(k, f(), t);
        }
    }
}
