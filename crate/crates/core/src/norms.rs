//! L^r, mixed and spectral Sobolev norms, Strichartz exponent arithmetic,
//! log-log exponent fits and the ladder record that carries them.

use crate::airy::airy_zero;
use crate::cusp::{eval_rows, half_plane_s, row_layout, sum_parametrix_kind, CuspError, CuspSpec, FieldKind, RescaledGrid};
use crate::spectrum::{project, propagate, sobolev_sq, synthesize, Field2D, ModeBasis, SpectrumError, WaveState};
use num_complex::Complex64;
use rayon::prelude::*;
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NormError {
    #[error("exponent {0} outside the supported range")]
    Exponent(f64),
    #[error("resolution: {0}")]
    Resolution(String),
    #[error("time samples undersample the envelope: {0}")]
    Undersampled(String),
    #[error("degenerate ladder: {0}")]
    Degenerate(String),
    #[error("unknown norm label {0}")]
    Label(String),
    #[error("bad ladder cache: {0}")]
    Format(String),
    #[error(transparent)]
    Cusp(#[from] CuspError),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A measured quantity with an absolute error bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// Running Σ w|u|^r on a fine grid and on its every-other-point subgrid.
#[derive(Clone, Debug)]
pub struct LrAccumulator {
    pub r: f64,
    fine: f64,
    coarse: f64,
    quad: f64,
}

impl LrAccumulator {
    pub fn new(r: f64) -> Result<Self, NormError> {
        if !(r >= 1.0 && r.is_finite()) {
            return Err(NormError::Exponent(r));
        }
        Ok(LrAccumulator { r, fine: 0.0, coarse: 0.0, quad: 0.0 })
    }

    /// One x-row with x-weight `wx`, y-weights `wy` and optional per-point
    /// errors. `even_row` marks rows kept on the coarse grid.
    pub fn add_row(&mut self, vals: &[Complex64], err: Option<&[f64]>, wx: f64, wy: &[f64], even_row: bool) {
        let r = self.r;
        for (j, (v, w)) in vals.iter().zip(wy).enumerate() {
            let p = v.norm().powf(r);
            self.fine += wx * w * p;
            if even_row && j % 2 == 0 {
                self.coarse += 4.0 * wx * w * p;
            }
            if let Some(e) = err {
                self.quad += wx * w * e[j].powf(r);
            }
        }
    }

    pub fn finish(&self) -> Estimate {
        let r = self.r;
        let f = self.fine.powf(1.0 / r);
        let c = self.coarse.powf(1.0 / r);
        Estimate { value: f, error: (f - c).abs() + self.quad.powf(1.0 / r) }
    }
}

/// Weighted discrete L^r norm of a field with a mesh-doubling error bound.
pub fn lr_norm(field: &Field2D, r: f64) -> Result<Estimate, NormError> {
    if !(r >= 2.0 && r.is_finite()) {
        return Err(NormError::Exponent(r));
    }
    if field.nx() < 3 || field.ny() < 3 {
        return Err(NormError::Resolution(format!("{}x{} grid", field.nx(), field.ny())));
    }
    let mut acc = LrAccumulator::new(r)?;
    let ny = field.ny();
    for i in 0..field.nx() {
        let row = &field.values[i * ny..(i + 1) * ny];
        let err = field.error.as_ref().map(|e| &e[i * ny..(i + 1) * ny]);
        acc.add_row(row, err, field.wx[i], &field.wy, i % 2 == 0);
    }
    Ok(acc.finish())
}

/// L^r norms of uⁿ(·, t) over the rescaled grid's s-range (all of Y′),
/// streamed row by row. Entry for r = 2 is the L² norm.
pub fn cusp_lr_norms(spec: &CuspSpec, t: f64, grid: &RescaledGrid, rs: &[f64]) -> Result<Vec<Estimate>, NormError> {
    let layout = row_layout(spec, t, grid)?;
    let a = spec.a();
    let wy = vec![a.powf(1.5) * layout.dy; layout.len];
    let mut accs: Vec<LrAccumulator> = rs.iter().map(|r| LrAccumulator::new(*r)).collect::<Result<_, _>>()?;
    let ns = grid.ns;
    eval_rows(spec, t, grid, &layout, |i, row, err| {
        let end = if i == 0 || i + 1 == ns { 0.5 } else { 1.0 };
        let wx = end * a * grid.ds;
        for acc in accs.iter_mut() {
            acc.add_row(row, Some(err), wx, &wy, i % 2 == 0);
        }
    })?;
    Ok(accs.iter().map(|a| a.finish()).collect())
}

/// (∫ ‖u(t)‖^q dt)^{1/q} from samples of ‖u(t)‖_{L^r} by the trapezoid rule.
///
/// Rejects sample sets in which the envelope moves by more than half its
/// maximum between neighbours.
pub fn mixed_norm(times: &[f64], lr: &[f64], q: f64) -> Result<f64, NormError> {
    if !(q >= 1.0 && q.is_finite()) {
        return Err(NormError::Exponent(q));
    }
    if times.len() != lr.len() || times.len() < 2 {
        return Err(NormError::Undersampled(format!("{} samples", times.len())));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(NormError::Undersampled("times must increase".into()));
    }
    let peak = lr.iter().cloned().fold(0.0, f64::max);
    if let Some(k) = lr.windows(2).position(|w| (w[1] - w[0]).abs() > 0.5 * peak) {
        return Err(NormError::Undersampled(format!("jump between t = {} and {}", times[k], times[k + 1])));
    }
    let mut s = 0.0;
    for k in 0..times.len() - 1 {
        s += 0.5 * (times[k + 1] - times[k]) * (lr[k].powf(q) + lr[k + 1].powf(q));
    }
    Ok(s.powf(1.0 / q))
}

/// Spectral Ḣ^s norm of a state.
pub fn sobolev_norm(state: &WaveState, basis: &ModeBasis, s: f64) -> Result<f64, NormError> {
    if s.abs() > 2.0 {
        return Err(NormError::Exponent(s));
    }
    Ok(sobolev_sq(state, basis, s).sqrt())
}

/// β(r) and its split into the free-space part and the loss.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BetaLoss {
    pub r: f64,
    pub beta: f64,
    /// (3/2)(1/2 − 1/r)
    pub free_space: f64,
    /// (1/6)(1/4 − 1/r)
    pub loss: f64,
    /// false for r ≤ 4, where there is nothing to lose
    pub loss_regime: bool,
}

pub fn beta_loss(r: f64) -> Result<BetaLoss, NormError> {
    if !(r >= 2.0) || r.is_nan() {
        return Err(NormError::Exponent(r));
    }
    let inv = if r.is_infinite() { 0.0 } else { 1.0 / r };
    let free_space = 1.5 * (0.5 - inv);
    let loss = (0.25 - inv) / 6.0;
    Ok(BetaLoss { r, beta: free_space + loss, free_space, loss, loss_regime: r > 4.0 })
}

/// Sharp wave-admissible pair in d = 2: 2/q + 1/r = 1/2.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdmissiblePair {
    pub q: f64,
    pub r: f64,
    pub d: u32,
    pub gamma: f64,
}

impl AdmissiblePair {
    pub fn sharp(r: f64) -> Result<Self, NormError> {
        // q = 2 (the endpoint) would need r = ∞
        if !(r > 2.0) || r.is_infinite() {
            return Err(NormError::Exponent(r));
        }
        let q = 4.0 * r / (r - 2.0);
        let d = 2.0;
        Ok(AdmissiblePair { q, r, d: 2, gamma: d / 2.0 - d / r - 1.0 / q })
    }

    /// 2/q + (d−1)/r − (d−1)/2, zero for a sharp pair.
    pub fn defect(&self) -> f64 {
        let d = self.d as f64;
        2.0 / self.q + (d - 1.0) / self.r - (d - 1.0) / 2.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fit {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
}

/// Weighted least squares of log y on log x. Weights are (y/err)², so
/// errors act as relative uncertainties; a zero error gets the median weight.
pub fn fit_loglog(x: &[f64], y: &[f64], err: &[f64]) -> Result<Fit, NormError> {
    let n = x.len();
    if n < 3 || y.len() != n || err.len() != n {
        return Err(NormError::Degenerate(format!("{n} points")));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(NormError::Degenerate("non-positive or non-finite sample".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mut w: Vec<f64> = y.iter().zip(err).map(|(v, e)| if *e > 0.0 { (v / e).powi(2) } else { f64::NAN }).collect();
    let mut known: Vec<f64> = w.iter().cloned().filter(|v| v.is_finite()).collect();
    known.sort_by(|a, b| a.total_cmp(b));
    let fill = known.get(known.len() / 2).cloned().unwrap_or(1.0);
    for v in w.iter_mut() {
        if !v.is_finite() {
            *v = fill;
        }
    }
    let sw: f64 = w.iter().sum();
    let mx = w.iter().zip(&lx).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = w.iter().zip(&ly).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = w.iter().zip(&lx).map(|(a, b)| a * (b - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(NormError::Degenerate("all x equal".into()));
    }
    let sxy: f64 = (0..n).map(|i| w[i] * (lx[i] - mx) * (ly[i] - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = (0..n).map(|i| w[i] * (ly[i] - intercept - slope * lx[i]).powi(2)).sum();
    let stderr = (rss / (n as f64 - 2.0) / sxx).sqrt();
    Ok(Fit { slope, stderr, intercept })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LadderRow {
    pub h: f64,
    pub a: f64,
    pub lambda: f64,
    pub n_max: u64,
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
}

/// Norms measured along a geometric h-ladder.
#[derive(Clone, Debug, PartialEq)]
pub struct LadderRecord {
    pub labels: Vec<String>,
    pub rows: Vec<LadderRow>,
}

pub const LADDER_MAGIC: &[u8; 4] = b"CWLR";
pub const LADDER_VERSION: u8 = 1;

/// `count` values from h_max down to h_min, equally spaced in log h.
pub fn geometric_ladder(h_min: f64, h_max: f64, count: usize) -> Result<Vec<f64>, NormError> {
    if count < 2 || !(h_min > 0.0) || !(h_max > h_min) {
        return Err(NormError::Degenerate(format!("ladder [{h_min}, {h_max}] x {count}")));
    }
    let (l0, l1) = (h_max.ln(), h_min.ln());
    let mut hs: Vec<f64> = (0..count).map(|k| (l0 + (l1 - l0) * k as f64 / (count - 1) as f64).exp()).collect();
    // exact endpoints, not exp(ln(h)) round-off
    hs[0] = h_max;
    hs[count - 1] = h_min;
    Ok(hs)
}

/// Column label for an L^r norm ("L2", "L6", ...).
pub fn r_label(r: f64) -> String {
    format!("L{r}")
}

/// L^r norms of uⁿ(·, t) over the half plane at one ladder point. The Y′
/// axis is a full period, so only a couple of nominal rows are requested.
pub fn ladder_row(spec: &CuspSpec, t: f64, rs: &[f64]) -> Result<LadderRow, NormError> {
    let lambda = spec.lambda();
    let (s0, ds, ns) = half_plane_s(lambda);
    let grid = RescaledGrid { s0, ds, ns, y0: -2.0, dy: 0.5 / lambda, ny: 3 };
    let est = cusp_lr_norms(spec, t, &grid, rs)?;
    Ok(LadderRow {
        h: spec.scale.h,
        a: spec.a(),
        lambda,
        n_max: spec.scale.n_max() as u64,
        values: est.iter().map(|e| e.value).collect(),
        errors: est.iter().map(|e| e.error).collect(),
    })
}

/// Measures every h concurrently with the template's cutoffs, at the same
/// Z = t/(2ca^{1/2}) for each h. Rows come back in ladder order.
pub fn measure_ladder(template: &CuspSpec, hs: &[f64], z: f64, rs: &[f64]) -> Result<LadderRecord, NormError> {
    let rows: Vec<LadderRow> = hs
        .par_iter()
        .map(|&h| {
            let sp = template.rescaled(template.scale.with_h(h))?;
            ladder_row(&sp, sp.t_of_z(z), rs)
        })
        .collect::<Result<_, _>>()?;
    let mut rec = LadderRecord::new(rs.iter().map(|r| r_label(*r)).collect());
    rec.rows = rows;
    Ok(rec)
}

impl LadderRecord {
    pub fn new(labels: Vec<String>) -> Self {
        LadderRecord { labels, rows: Vec::new() }
    }

    fn column(&self, label: &str) -> Result<usize, NormError> {
        self.labels.iter().position(|l| l == label).ok_or_else(|| NormError::Label(label.into()))
    }

    /// Slope of log(norm) against log h with its standard error.
    pub fn fit(&self, label: &str) -> Result<Fit, NormError> {
        let k = self.column(label)?;
        if self.rows.len() < 8 {
            return Err(NormError::Degenerate(format!("{} rows, need at least 8", self.rows.len())));
        }
        let h: Vec<f64> = self.rows.iter().map(|r| r.h).collect();
        let y: Vec<f64> = self.rows.iter().map(|r| r.values[k]).collect();
        let e: Vec<f64> = self.rows.iter().map(|r| r.errors[k]).collect();
        fit_loglog(&h, &y, &e)
    }

    /// Checks the span (≥ 2.5 decades) and that every quadrature error is at
    /// most 10% of the smallest gap between neighbouring values of a label.
    pub fn validate(&self, label: &str) -> Result<(), NormError> {
        let k = self.column(label)?;
        let (lo, hi) = self.rows.iter().fold((f64::MAX, f64::MIN), |(a, b), r| (a.min(r.h), b.max(r.h)));
        if self.rows.len() < 8 || (hi / lo).log10() < 2.5 - 1e-9 {
            return Err(NormError::Degenerate(format!("{} rows over {:.2} decades", self.rows.len(), (hi / lo).log10())));
        }
        let mut ys: Vec<f64> = self.rows.iter().map(|r| r.values[k]).collect();
        ys.sort_by(|a, b| a.total_cmp(b));
        let gap = ys.windows(2).map(|w| w[1] - w[0]).fold(f64::MAX, f64::min);
        let worst = self.rows.iter().map(|r| r.errors[k]).fold(0.0, f64::max);
        if worst > 0.1 * gap {
            return Err(NormError::Resolution(format!("{label}: error {worst:e} vs gap {gap:e}")));
        }
        Ok(())
    }

    /// One row per h: h, a, lambda, N, then value and error per label.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), NormError> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        let mut head = vec!["h".to_string(), "a".into(), "lambda".into(), "N".into()];
        for l in &self.labels {
            head.push(l.clone());
            head.push(format!("{l}_err"));
        }
        out.write_record(&head)?;
        for r in &self.rows {
            // Debug formatting is the shortest string that round-trips
            let mut rec = vec![format!("{:?}", r.h), format!("{:?}", r.a), format!("{:?}", r.lambda), r.n_max.to_string()];
            for (v, e) in r.values.iter().zip(&r.errors) {
                rec.push(format!("{v:?}"));
                rec.push(format!("{e:?}"));
            }
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Binary layout, all integers and floats little-endian:
    /// magic "CWLR", version byte, u32 label count, labels as (u32 length,
    /// UTF-8 bytes), u32 row count, then per row h, a, λ (f64), N (u64) and
    /// value/error pairs (f64) in label order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(LADDER_MAGIC);
        b.push(LADDER_VERSION);
        b.extend_from_slice(&(self.labels.len() as u32).to_le_bytes());
        for l in &self.labels {
            b.extend_from_slice(&(l.len() as u32).to_le_bytes());
            b.extend_from_slice(l.as_bytes());
        }
        b.extend_from_slice(&(self.rows.len() as u32).to_le_bytes());
        for r in &self.rows {
            for v in [r.h, r.a, r.lambda] {
                b.extend_from_slice(&v.to_le_bytes());
            }
            b.extend_from_slice(&r.n_max.to_le_bytes());
            for (v, e) in r.values.iter().zip(&r.errors) {
                b.extend_from_slice(&v.to_le_bytes());
                b.extend_from_slice(&e.to_le_bytes());
            }
        }
        b
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self, NormError> {
        let mut cur = Reader { b, pos: 0 };
        if cur.take(4)? != LADDER_MAGIC {
            return Err(NormError::Format("bad magic".into()));
        }
        let v = cur.take(1)?[0];
        if v != LADDER_VERSION {
            return Err(NormError::Format(format!("version {v}, expected {LADDER_VERSION}")));
        }
        let nl = cur.u32()? as usize;
        let mut labels = Vec::with_capacity(nl.min(1024));
        for _ in 0..nl {
            let len = cur.u32()? as usize;
            let s = std::str::from_utf8(cur.take(len)?).map_err(|e| NormError::Format(e.to_string()))?;
            labels.push(s.to_string());
        }
        let nr = cur.u32()? as usize;
        let mut rows = Vec::with_capacity(nr.min(1 << 16));
        for _ in 0..nr {
            let (h, a, lambda) = (cur.f64()?, cur.f64()?, cur.f64()?);
            let n_max = u64::from_le_bytes(cur.take(8)?.try_into().unwrap());
            let mut values = Vec::with_capacity(nl);
            let mut errors = Vec::with_capacity(nl);
            for _ in 0..nl {
                values.push(cur.f64()?);
                errors.push(cur.f64()?);
            }
            rows.push(LadderRow { h, a, lambda, n_max, values, errors });
        }
        if cur.pos != b.len() {
            return Err(NormError::Format(format!("{} trailing bytes", b.len() - cur.pos)));
        }
        Ok(LadderRecord { labels, rows })
    }
}

struct Reader<'a> {
    b: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NormError> {
        if self.pos + n > self.b.len() {
            return Err(NormError::Format("truncated".into()));
        }
        let s = &self.b[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, NormError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, NormError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// One time of the parametrix-versus-exact comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossRow {
    pub t: f64,
    pub r: f64,
    pub exact: f64,
    pub parametrix: Estimate,
}

impl CrossRow {
    pub fn ratio(&self) -> f64 {
        self.exact / self.parametrix.value
    }
}

/// Setup used by [`spectral_crosscheck`].
#[derive(Clone, Debug, PartialEq)]
pub struct CrossSetup {
    pub modes: usize,
    pub etas: usize,
    pub period: f64,
    /// relative L² error of the projected initial data
    pub projection_error: f64,
}

/// Full-period rescaled grid over the half plane at time t.
fn period_grid(spec: &CuspSpec, t: f64) -> Result<RescaledGrid, NormError> {
    let lambda = spec.lambda();
    let (s0, ds, ns) = half_plane_s(lambda);
    let probe = RescaledGrid { s0, ds, ns, y0: -4.0 / 3.0 * spec.n as f64, dy: 0.5 / lambda, ny: 2 };
    let lay = row_layout(spec, t, &probe)?;
    let grid = RescaledGrid { y0: lay.y0, ny: lay.len, ..probe };
    let check = row_layout(spec, t, &grid)?;
    if check.len != grid.ny || check.offset != 0 {
        return Err(NormError::Resolution("could not settle a full-period grid".into()));
    }
    Ok(grid)
}

/// Projects U_h(0) and ∂ₜU_h(0) onto gallery modes, evolves exactly and
/// compares L^r norms with the parametrix at each time.
pub fn spectral_crosscheck(base: &CuspSpec, times: &[f64], rs: &[f64]) -> Result<(CrossSetup, Vec<CrossRow>), NormError> {
    let grid = period_grid(base, 0.0)?;
    let pos = sum_parametrix_kind(base, &grid, 0.0, FieldKind::Value)?;
    let vel = sum_parametrix_kind(base, &grid, 0.0, FieldKind::TimeDerivative)?;
    let h = base.scale.h;
    let w = base.psi.half_width;
    let (lo, hi) = ((1.0 - 2.0 * w) / h, (1.0 + 2.0 * w) / h);
    let period = (pos.y[1] - pos.y[0]) * pos.ny() as f64;
    // turning points must clear the grid
    let x_max = *pos.x.last().unwrap();
    let target = hi.powf(2.0 / 3.0) * x_max + 8.0;
    let mut modes = 1;
    while airy_zero(modes).map_err(SpectrumError::from)? < target {
        modes += 1;
    }
    let basis = ModeBasis::for_period(period, lo, hi, modes)?;
    let state = project(&pos, &vel, &basis)?;
    let back = synthesize(&state, &basis, &pos)?;
    let diff: f64 = back.values.iter().zip(&pos.values).map(|(a, b)| (a - b).norm_sqr()).sum();
    let norm: f64 = pos.values.iter().map(|a| a.norm_sqr()).sum();
    let setup = CrossSetup { modes, etas: basis.eta_grid.len(), period, projection_error: (diff / norm).sqrt() };
    let mut rows = Vec::new();
    for &t in times {
        let ex = synthesize(&propagate(&state, &basis, t), &basis, &pos)?;
        let pg = period_grid(base, t)?;
        let par = sum_parametrix_kind(base, &pg, t, FieldKind::Value)?;
        for &r in rs {
            rows.push(CrossRow { t, r, exact: lr_norm(&ex, r)?.value, parametrix: lr_norm(&par, r)? });
        }
    }
    Ok((setup, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::trapezoid;
    use proptest::prelude::*;

    fn unit_square(n: usize, f: impl Fn(f64, f64) -> f64) -> Field2D {
        let d = 1.0 / (n - 1) as f64;
        Field2D::from_fn(trapezoid(0.0, d, n), trapezoid(0.0, d, n), |x, y| Complex64::new(f(x, y), 0.0))
    }

    #[test]
    fn constant_on_unit_square() {
        let f = unit_square(33, |_, _| 1.0);
        for r in [2.0, 6.0, 64.0] {
            let e = lr_norm(&f, r).unwrap();
            assert!((e.value - 1.0).abs() < 1e-12);
        }
        assert!(lr_norm(&f, 1.5).is_err());
    }

    #[test]
    fn high_r_tracks_max() {
        let d = 10.0 / 800.0;
        let ax = trapezoid(-5.0, d, 801);
        let f = Field2D::from_fn(ax.clone(), ax, |x, y| Complex64::new((-(x * x + y * y) / 2.0).exp(), 0.0));
        let e = lr_norm(&f, 64.0).unwrap();
        assert!((e.value / f.max_abs() - 1.0).abs() < 0.05);
        // on the plane ∫exp(-32 r²) = π/32
        let want = (std::f64::consts::PI / 32.0).powf(1.0 / 64.0);
        assert!((e.value - want).abs() < 1e-9, "{} {}", e.value, want);
        assert!(e.error < 1e-6);
    }

    #[test]
    fn mixed_norm_constant_in_time() {
        let t: Vec<f64> = (0..21).map(|k| k as f64 * 0.1).collect();
        let v = vec![3.0; 21];
        let m = mixed_norm(&t, &v, 6.0).unwrap();
        assert!((m - 2f64.powf(1.0 / 6.0) * 3.0).abs() < 1e-12);
        let mut spiky = v.clone();
        spiky[10] = 30.0;
        assert!(matches!(mixed_norm(&t, &spiky, 6.0), Err(NormError::Undersampled(_))));
    }

    #[test]
    fn mixed_norm_disjoint_windows() {
        // N windows, each a smooth bump of width w, sampled 16 times
        let (nw, w, q) = (5usize, 0.3, 6.0);
        let mut t = vec![];
        let mut v = vec![];
        for k in 0..nw {
            for j in 0..=32 {
                let s = j as f64 / 32.0;
                t.push(k as f64 + s * w);
                v.push((std::f64::consts::PI * s).sin().powi(2) * 2.0);
            }
        }
        let all = mixed_norm(&t, &v, q).unwrap();
        let one = mixed_norm(&t[..33], &v[..33], q).unwrap();
        assert!(((all / one) / (nw as f64).powf(1.0 / q) - 1.0).abs() < 0.2);
    }

    #[test]
    fn beta_values() {
        let b = beta_loss(6.0).unwrap();
        assert!((b.beta - 37.0 / 72.0).abs() < 1e-15);
        let b = beta_loss(64.0).unwrap();
        assert!((b.beta - 0.765625).abs() < 1e-15);
        assert!((b.free_space - 0.7265625).abs() < 1e-15);
        assert!((b.loss - 0.0390625).abs() < 1e-15);
        let b = beta_loss(4.0).unwrap();
        assert_eq!(b.loss, 0.0);
        assert!(!b.loss_regime);
    }

    #[test]
    fn fit_exact_and_noisy() {
        let h = geometric_ladder(2f64.powi(-19), 2f64.powi(-10), 10).unwrap();
        let y: Vec<f64> = h.iter().map(|v| v.powf(0.7)).collect();
        let f = fit_loglog(&h, &y, &vec![0.0; 10]).unwrap();
        assert!((f.slope - 0.7).abs() < 1e-12 && f.stderr < 0.005);
        // fixed pseudo-noise of ±5%
        let noise = [0.04, -0.05, 0.02, 0.05, -0.03, -0.01, 0.05, -0.04, 0.0, 0.03];
        let yn: Vec<f64> = y.iter().zip(noise).map(|(v, n)| v * (1.0 + n)).collect();
        let f = fit_loglog(&h, &yn, &vec![0.0; 10]).unwrap();
        assert!((f.slope - 0.7).abs() < 0.02, "{}", f.slope);
    }

    fn record() -> LadderRecord {
        let mut r = LadderRecord::new(vec!["l2".into(), "l6".into()]);
        for (k, h) in geometric_ladder(1e-6, 1e-3, 8).unwrap().into_iter().enumerate() {
            r.rows.push(LadderRow {
                h,
                a: h.sqrt(),
                lambda: 1.0 / h,
                n_max: k as u64,
                values: vec![h, h.powf(0.6)],
                errors: vec![h * 1e-6, 0.0],
            });
        }
        r
    }

    #[test]
    fn ladder_csv_and_fit() {
        let r = record();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("h,a,lambda,N,l2,l2_err,l6,l6_err\n"));
        assert!(!s.contains('\r'));
        assert_eq!(s.lines().count(), 9);
        assert!((r.fit("l6").unwrap().slope - 0.6).abs() < 1e-12);
        assert!(r.validate("l2").is_ok());
        assert!(matches!(r.fit("l4"), Err(NormError::Label(_))));
    }

    #[test]
    fn binary_rejects_damage() {
        let b = record().to_bytes();
        let mut bad = b.clone();
        bad[4] = 9;
        assert!(matches!(LadderRecord::from_bytes(&bad), Err(NormError::Format(_))));
        assert!(LadderRecord::from_bytes(&b[..b.len() - 3]).is_err());
        assert!(LadderRecord::from_bytes(b"XXXX").is_err());
    }

    proptest! {
        #[test]
        fn binary_round_trip(vals in proptest::collection::vec(any::<f64>(), 1..40), label in "[a-z_]{1,12}") {
            let mut r = LadderRecord::new(vec![label]);
            for (k, v) in vals.iter().enumerate() {
                r.rows.push(LadderRow { h: *v, a: -*v, lambda: k as f64, n_max: k as u64, values: vec![*v], errors: vec![v.abs()] });
            }
            let back = LadderRecord::from_bytes(&r.to_bytes()).unwrap();
            prop_assert_eq!(back.to_bytes(), r.to_bytes());
        }

        #[test]
        fn sharp_pairs(r in 2.01f64..1e4) {
            let p = AdmissiblePair::sharp(r).unwrap();
            prop_assert!(p.defect().abs() < 1e-12);
            prop_assert!((p.gamma - (1.0 - 2.0 / r - 1.0 / p.q)).abs() < 1e-15);
            prop_assert!(p.q > 4.0);
        }

        #[test]
        fn beta_split(r in 4.0f64..1e6) {
            let b = beta_loss(r).unwrap();
            prop_assert!((b.beta - (19.0 / 24.0 - 5.0 / (3.0 * r))).abs() < 1e-14);
            prop_assert!(b.loss >= 0.0);
        }
    }
}
