//! Experiment suites, looked up by name.

use crate::cache::{cache_key, Cache, Lookup};
use crate::config::{ConfigError, ExperimentConfig};
use crate::output::{Output, Table};
use anyhow::{bail, Context as _};
use cuspwave::airy::{ai_real, airy_ai, airy_branch, airy_zero, Sign};
use cuspwave::billiard::{delta, delta_iter, hamiltonian_flow_check, PhasePoint};
use cuspwave::cusp::{eval_cusp, trace_pairing_with, RescaledGrid};
use cuspwave::eikonal::{jet_recursion, PolyCurvature};
use cuspwave::norms::{beta_loss, cusp_lr_norms, fit_loglog, measure_ladder, mixed_norm, r_label, AdmissiblePair, LadderRecord};
use cuspwave::spectrum::eigenvalue;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Ai(0) and Ai′(0) to 18 digits.
const AI0: f64 = 0.355_028_053_887_817_239;
const AIP0: f64 = -0.258_819_403_792_806_798;

pub struct Context<'a> {
    pub config: &'a ExperimentConfig,
    pub cache: Option<Cache>,
    pub out: Output,
}

pub trait Suite: Send + Sync {
    fn name(&self) -> &'static str;
    fn describe(&self) -> &'static str;
    fn run(&self, cx: &mut Context) -> anyhow::Result<()>;
}

pub fn registry() -> Vec<Box<dyn Suite>> {
    vec![
        Box::new(AirySelftest),
        Box::new(Modes),
        Box::new(Billiard),
        Box::new(Eikonal),
        Box::new(Cusp),
        Box::new(Trace),
        Box::new(Norms),
        Box::new(Scaling { name: "scaling-r6", fixed: Some(&[6.0]) }),
        Box::new(Scaling { name: "scaling", fixed: None }),
        Box::new(Quotient),
    ]
}

pub fn suite(name: &str) -> Result<Box<dyn Suite>, ConfigError> {
    registry().into_iter().find(|s| s.name() == name).ok_or_else(|| {
        let known: Vec<_> = registry().iter().map(|s| s.name()).collect();
        ConfigError::Invalid(format!("unknown suite {name:?}; known: {}", known.join(", ")))
    })
}

fn check(ok: bool) -> String {
    if ok { "pass" } else { "FAIL" }.to_string()
}

/// Newton step |Ai(−ω)/Ai′(−ω)| at a computed zero.
fn zero_residual(w: f64) -> anyhow::Result<f64> {
    let (v, d) = ai_real(-w)?;
    Ok((v / d).abs())
}

struct AirySelftest;

impl Suite for AirySelftest {
    fn name(&self) -> &'static str {
        "airy-selftest"
    }

    fn describe(&self) -> &'static str {
        "Airy zeros, values at 0 and the A+ + A- = Ai identity"
    }

    fn run(&self, cx: &mut Context) -> anyhow::Result<()> {
        let mut t = Table::new(&["check", "threshold", "result"], &["value"]);
        let mut fails = 0;
        let mut row = |t: &mut Table, name: String, tol: f64, v: f64, e: f64| {
            let ok = e <= tol;
            fails += usize::from(!ok);
            t.push(vec![name, format!("{tol:e}"), check(ok)], &[(v, e)]);
        };
        for k in 1..=10 {
            let w = airy_zero(k)?;
            row(&mut t, format!("zero_{k}"), 1e-10, w, zero_residual(w)?);
        }
        let (a0, d0) = ai_real(0.0)?;
        row(&mut t, "ai_0".into(), 1e-10, a0, (a0 - AI0).abs());
        row(&mut t, "ai_prime_0".into(), 1e-10, d0, (d0 - AIP0).abs());
        let mut worst: f64 = 0.0;
        for k in 0..1000 {
            let z = Complex64::new(-10.0 + 20.0 * k as f64 / 999.0, 0.0);
            let (p, m) = (airy_branch(Sign::Plus, z)?, airy_branch(Sign::Minus, z)?);
            let ai = airy_ai(z)?.ai;
            // A± grow for x > 0 while Ai decays: compare at the branches' scale
            worst = worst.max((p + m - ai).norm() / (p.norm() + m.norm()));
        }
        row(&mut t, "branch_identity".into(), 1e-12, worst, worst);
        cx.out.write_table("airy.csv", &t)?;
        cx.out.note("checks", t.len().to_string());
        cx.out.note("failed", fails.to_string());
        if fails > 0 {
            bail!("{fails} Airy checks failed");
        }
        Ok(())
    }
}

struct Modes;

impl Suite for Modes {
    fn name(&self) -> &'static str {
        "modes"
    }

    fn describe(&self) -> &'static str {
        "gallery-mode eigenvalues mu_k(eta) = eta^2 + omega_k eta^(4/3)"
    }

    fn run(&self, cx: &mut Context) -> anyhow::Result<()> {
        let cfg = cx.config;
        let h = cfg.scale.h;
        let mut t = Table::new(&["k"], &["eta", "omega", "eigenvalue"]);
        for &e in &cfg.modes.eta {
            let eta = e / h;
            for k in 1..=cfg.modes.count {
                let w = airy_zero(k)?;
                let dw = zero_residual(w)?;
                let mu = eigenvalue(eta, k)?;
                let dmu = dw * eta.powf(4.0 / 3.0) + mu * f64::EPSILON;
                t.push(vec![k.to_string()], &[(eta, 0.0), (w, dw), (mu, dmu)]);
            }
        }
        cx.out.write_table("modes.csv", &t)?;
        cx.out.note("rows", t.len().to_string());
        Ok(())
    }
}

struct Billiard;

impl Suite for Billiard {
    fn name(&self) -> &'static str {
        "billiard"
    }

    fn describe(&self) -> &'static str {
        "closed-form iterates of the billiard maps against composition and the Hamiltonian flow"
    }

    fn run(&self, cx: &mut Context) -> anyhow::Result<()> {
        let cfg = &cx.config.billiard;
        let mut orbit = Table::new(&["n"], &["a", "y", "t"]);
        let mut flow = Table::new(&["sign"], &["a", "y", "t"]);
        for &a in &cfg.a {
            let p0 = PhasePoint::new(0.0, 0.0, 1.0, -(1.0 + a).sqrt());
            let mut p = p0;
            for n in 0..=cfg.iterations {
                let closed = delta_iter(Sign::Plus, n, p0)?;
                let err = (closed.y - p.y).abs().max((closed.t - p.t).abs());
                orbit.push(vec![n.to_string()], &[(a, 0.0), (closed.y, err), (closed.t, err)]);
                p = delta(Sign::Plus, p)?;
            }
            for sign in [Sign::Plus, Sign::Minus] {
                let d = delta(sign, p0)?;
                let f = hamiltonian_flow_check(sign, p0)?;
                let err = (d.y - f.y).abs().max((d.t - f.t).abs());
                let name = if sign == Sign::Plus { "+" } else { "-" };
                flow.push(vec![name.into()], &[(a, 0.0), (d.y, err), (d.t, err)]);
            }
        }
        cx.out.write_table("orbit.csv", &orbit)?;
        cx.out.write_table("flow.csv", &flow)?;
        Ok(())
    }
}

struct Eikonal;

impl Suite for Eikonal {
    fn name(&self) -> &'static str {
        "eikonal"
    }

    fn describe(&self) -> &'static str {
        "x-jets of the phase and of zeta along the boundary"
    }

    /// Errors come from repeating the computation on a y grid with the
    /// midpoints inserted.
    fn run(&self, cx: &mut Context) -> anyhow::Result<()> {
        let e = &cx.config.eikonal;
        let a = e.a;
        let b = PolyCurvature::new(e.curvature.clone());
        let tau = -(1.0 + a).sqrt();
        let step = (e.y_max - e.y_min) / (e.count - 1) as f64;
        let coarse: Vec<f64> = (0..e.count).map(|i| e.y_min + i as f64 * step).collect();
        let fine: Vec<f64> = (0..2 * e.count - 1).map(|i| e.y_min + i as f64 * 0.5 * step).collect();
        let jc = jet_recursion(&b, e.order, 1.0, tau, &coarse)?;
        let jf = jet_recursion(&b, e.order, 1.0, tau, &fine)?;
        let (cols, rows) = jc.table();
        let (_, rows_f) = jf.table();
        let names: Vec<&str> = cols.iter().map(|c| c.as_str()).collect();
        let mut t = Table::new(&[], &names);
        for (i, r) in rows.iter().enumerate() {
            let rf = &rows_f[2 * i];
            let pairs: Vec<(f64, f64)> = r.iter().zip(rf).map(|(x, y)| (*x, (x - y).abs())).collect();
            t.push(vec![], &pairs);
        }
        cx.out.write_table("jets.csv", &t)?;
        cx.out.note("a", format!("{a:?}"));
        Ok(())
    }
}

struct Cusp;

impl Suite for Cusp {
    fn name(&self) -> &'static str {
        "cusp"
    }

    fn describe(&self) -> &'static str {
        "one parametrix piece u^n on a rescaled grid"
    }

    fn run(&self, cx: &mut Context) -> anyhow::Result<()> {
        let cfg = cx.config;
        let g = &cfg.grid;
        let spec = cfg.spec(cfg.scale(), g.n)?;
        let lam = spec.lambda();
        let dy = g.dy_lambda / lam;
        let shift = -4.0 / 3.0 * g.n as f64;
        let ds = if g.ns > 1 { (g.s_max - g.s_min) / (g.ns - 1) as f64 } else { 1.0 };
        let grid = RescaledGrid {
            s0: g.s_min,
            ds,
            ns: g.ns,
            y0: g.y_min + shift,
            dy,
            ny: ((g.y_max - g.y_min) / dy).floor() as usize + 1,
        };
        let t = spec.t_of_z(g.z);
        let f = eval_cusp(&spec, &grid, t)?;
        let mut tab = Table::new(&[], &["s", "y_rescaled", "x", "y", "re", "im", "abs"]);
        let ny = f.ny();
        for i in 0..f.nx() {
            for j in 0..ny {
                let v = f.at(i, j);
                let e = f.error.as_ref().map_or(0.0, |e| e[i * ny + j]);
                tab.push(
                    vec![],
                    &[(grid.s(i), 0.0), (grid.y(j), 0.0), (f.x[i], 0.0), (f.y[j], 0.0), (v.re, e), (v.im, e), (v.norm(), e)],
                );
            }
        }
        cx.out.write_table("cusp.csv", &tab)?;
        cx.out.note("n", g.n.to_string());
        cx.out.note("t", format!("{t:?}"));
        cx.out.note("lambda", format!("{lam:?}"));
        Ok(())
    }
}

struct Trace;

impl Suite for Trace {
    fn name(&self) -> &'static str {
        "trace"
    }

    fn describe(&self) -> &'static str {
        "boundary cancellation |Tr-(u^n) + Tr+(u^(n+1))| / |Tr-(u^n)|"
    }

    fn run(&self, cx: &mut Context) -> anyhow::Result<()> {
        let cfg = cx.config;
        let base = cfg.spec(cfg.scale(), 0)?;
        let rows: Vec<anyhow::Result<(usize, f64, f64)>> = cfg
            .trace
            .n
            .par_iter()
            .map(|&n| {
                let sp = base.with_n(n);
                let (r, b) = trace_pairing_with(&sp, 96)?;
                let (rc, bc) = trace_pairing_with(&sp, 48)?;
                let ratio = (r / b).sqrt();
                Ok((n, ratio, (ratio - (rc / bc).sqrt()).abs()))
            })
            .collect();
        let mut t = Table::new(&["n"], &["lambda", "ratio"]);
        for row in rows {
            let (n, ratio, err) = row?;
            t.push(vec![n.to_string()], &[(base.lambda(), 0.0), (ratio, err)]);
        }
        cx.out.write_table("trace.csv", &t)?;
        Ok(())
    }
}

/// Chebyshev nodes on [lo, hi].
fn chebyshev(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    (0..k)
        .map(|j| {
            let x = -((2 * j + 1) as f64 * PI / (2 * k) as f64).cos();
            0.5 * (lo + hi) + 0.5 * (hi - lo) * x
        })
        .collect()
}

struct Norms;

impl Suite for Norms {
    fn name(&self) -> &'static str {
        "norms"
    }

    fn describe(&self) -> &'static str {
        "L^r norms of u^0 across J_0 and the mixed L^q L^r norm"
    }

    fn run(&self, cx: &mut Context) -> anyhow::Result<()> {
        let cfg = cx.config;
        let spec = cfg.spec(cfg.scale(), 0)?;
        let mut rs = vec![2.0];
        rs.extend(cfg.norms.r.iter().filter(|r| **r != 2.0));
        let (lo, hi) = spec.inner_interval();
        let times = chebyshev(lo, hi, cfg.norms.samples);
        let lam = spec.lambda();
        let (s0, ds, ns) = cuspwave::cusp::half_plane_s(lam);
        let grid = RescaledGrid { s0, ds, ns, y0: -2.0, dy: 0.5 / lam, ny: 3 };
        let per_t: Vec<_> = times.iter().map(|&t| cusp_lr_norms(&spec, t, &grid, &rs)).collect::<Result<_, _>>()?;
        let labels: Vec<String> = rs.iter().map(|r| r_label(*r)).collect();
        let names: Vec<&str> = std::iter::once("t").chain(labels.iter().map(|s| s.as_str())).collect();
        let mut t = Table::new(&[], &names);
        for (time, est) in times.iter().zip(&per_t) {
            let mut row = vec![(*time, 0.0)];
            row.extend(est.iter().map(|e| (e.value, e.error)));
            t.push(vec![], &row);
        }
        cx.out.write_table("lr.csv", &t)?;
        let mut m = Table::new(&["label"], &["r", "q", "gamma", "mixed", "beta", "free_space", "loss"]);
        for (k, &r) in rs.iter().enumerate() {
            if r == 2.0 {
                continue;
            }
            let pair = AdmissiblePair::sharp(r)?;
            let vals: Vec<f64> = per_t.iter().map(|e| e[k].value).collect();
            let rel = per_t.iter().map(|e| e[k].error / e[k].value).fold(0.0, f64::max);
            let mixed = mixed_norm(&times, &vals, pair.q)?;
            let bl = beta_loss(r)?;
            m.push(
                vec![labels[k].clone()],
                &[(r, 0.0), (pair.q, 0.0), (pair.gamma, 0.0), (mixed, rel * mixed), (bl.beta, 0.0), (bl.free_space, 0.0), (bl.loss, 0.0)],
            );
        }
        cx.out.write_table("mixed.csv", &m)?;
        cx.out.note("J0", format!("[{lo:?}, {hi:?}]"));
        Ok(())
    }
}

/// Ladder of u⁰ norms for `rs` (L² always included), through the cache.
fn ladder(cx: &mut Context, rs: &[f64]) -> anyhow::Result<LadderRecord> {
    let cfg = cx.config;
    let hs = cfg.ladder_h()?;
    if hs.len() < 8 {
        return Err(ConfigError::Invalid(format!("ladder needs at least 8 points, got {}", hs.len())).into());
    }
    let key = cache_key("ladder", &cfg.ladder_canonical(rs));
    if let Some(c) = &cx.cache {
        match c.load(&key).context("reading cache")? {
            Lookup::Hit(rec) => {
                cx.out.note("cache", "hit");
                return Ok(rec);
            }
            Lookup::Miss => cx.out.note("cache", "miss"),
            Lookup::Stale(v) => cx.out.note("cache", format!("stale entry (version {v}) recomputed")),
            Lookup::Quarantined(p) => cx.out.note("cache", format!("corrupt entry quarantined to {}", p.display())),
        }
    }
    let template = cfg.spec(cfg.scale(), 0)?;
    let rec = measure_ladder(&template, &hs, cfg.ladder.z, rs)?;
    if let Some(c) = &cx.cache {
        c.store(&key, &rec).context("writing cache")?;
    }
    Ok(rec)
}

fn ladder_rs(extra: &[f64]) -> Vec<f64> {
    let mut rs = vec![2.0];
    rs.extend(extra.iter().filter(|r| **r != 2.0));
    rs
}

/// Predicted slope of ‖u⁰‖_{L^r} in h.
fn target_slope(r: f64, eps: f64) -> f64 {
    if r == 2.0 {
        1.0 + (1.0 - eps) / 8.0
    } else {
        1.0 / 3.0 + 5.0 / (3.0 * r)
    }
}

struct Scaling {
    name: &'static str,
    fixed: Option<&'static [f64]>,
}

impl Suite for Scaling {
    fn name(&self) -> &'static str {
        self.name
    }

    fn describe(&self) -> &'static str {
        "h-ladder of L^r norms of u^0 with fitted slopes"
    }

    fn run(&self, cx: &mut Context) -> anyhow::Result<()> {
        let rs = ladder_rs(self.fixed.unwrap_or(&cx.config.norms.r));
        let rec = ladder(cx, &rs)?;
        let mut csv = Vec::new();
        rec.write_csv(&mut csv)?;
        cx.out.write_bytes("ladder.csv", &csv)?;
        let mut fits = Table::new(&["label", "check"], &["slope", "target"]);
        for (label, &r) in rec.labels.clone().iter().zip(&rs) {
            let f = rec.fit(label)?;
            let check = match rec.validate(label) {
                Ok(()) => "ok".to_string(),
                Err(e) => e.to_string(),
            };
            fits.push(vec![label.clone(), check], &[(f.slope, f.stderr), (target_slope(r, cx.config.scale.eps), 0.0)]);
        }
        cx.out.write_table("fits.csv", &fits)?;
        cx.out.note("points", rec.rows.len().to_string());
        Ok(())
    }
}

struct Quotient;

impl Suite for Quotient {
    fn name(&self) -> &'static str {
        "quotient"
    }

    fn describe(&self) -> &'static str {
        "slope of |u^0(t)|_Lr / |u^0(0)|_L2 against the free-space and lossy predictions"
    }

    fn run(&self, cx: &mut Context) -> anyhow::Result<()> {
        let rs = ladder_rs(&cx.config.norms.r);
        let rec = ladder(cx, &rs)?;
        let h: Vec<f64> = rec.rows.iter().map(|r| r.h).collect();
        let mut t = Table::new(&["label"], &["slope", "minus_beta", "free_space", "half_loss_bound"]);
        for (k, &r) in rs.iter().enumerate().skip(1) {
            let q: Vec<f64> = rec.rows.iter().map(|row| row.values[k] / row.values[0]).collect();
            let qe: Vec<f64> = rec
                .rows
                .iter()
                .zip(&q)
                .map(|(row, q)| q * (row.errors[k] / row.values[k] + row.errors[0] / row.values[0]))
                .collect();
            let f = fit_loglog(&h, &q, &qe)?;
            let bl = beta_loss(r)?;
            t.push(
                vec![rec.labels[k].clone()],
                &[(f.slope, f.stderr), (-bl.beta, 0.0), (-bl.free_space, 0.0), (-bl.free_space - 0.5 * bl.loss, 0.0)],
            );
        }
        cx.out.write_table("quotient.csv", &t)?;
        Ok(())
    }
}
