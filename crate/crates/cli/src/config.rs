use cuspwave::cutoff::{Kappa, Psi};
use cuspwave::cusp::CuspSpec;
use cuspwave::norms::geometric_ladder;
use cuspwave::scale::ScaleParams;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub suite: Option<String>,
    pub output_dir: Option<PathBuf>,
    pub cache: Option<bool>,
    pub scale: ScaleSection,
    pub cutoffs: CutoffSection,
    pub ladder: LadderSection,
    pub norms: NormSection,
    pub grid: GridSection,
    pub modes: ModeSection,
    pub billiard: BilliardSection,
    pub eikonal: EikonalSection,
    pub trace: TraceSection,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ScaleSection {
    pub h: f64,
    pub eps: f64,
    pub window: f64,
    pub big_c0: f64,
    pub c0: f64,
    pub m_gallery: f64,
    pub n_factor: f64,
}

impl Default for ScaleSection {
    fn default() -> Self {
        let s = ScaleParams::default();
        ScaleSection {
            h: s.h,
            eps: s.eps,
            window: s.window,
            big_c0: s.big_c0,
            c0: s.c0,
            m_gallery: s.m_gallery,
            n_factor: s.n_factor,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct CutoffSection {
    pub psi_half_width: f64,
    pub kappa_inner: f64,
    pub kappa_outer: f64,
}

impl Default for CutoffSection {
    fn default() -> Self {
        let (p, k) = (Psi::default(), Kappa::default());
        CutoffSection { psi_half_width: p.half_width, kappa_inner: k.inner, kappa_outer: k.outer }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct LadderSection {
    pub h_min: f64,
    pub h_max: f64,
    pub count: usize,
    /// time of measurement as Z = t/(2ca^{1/2}); 0 is the centre of J₀
    pub z: f64,
}

impl Default for LadderSection {
    fn default() -> Self {
        LadderSection { h_min: 10f64.powf(-5.5), h_max: 1e-3, count: 8, z: 0.0 }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct NormSection {
    pub r: Vec<f64>,
    /// time samples per J₀ window (Chebyshev nodes)
    pub samples: usize,
}

impl Default for NormSection {
    fn default() -> Self {
        NormSection { r: vec![6.0, 8.0, 64.0], samples: 9 }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub n: usize,
    pub z: f64,
    pub s_min: f64,
    pub s_max: f64,
    pub ns: usize,
    /// rescaled tangential window, Y′ + 4n/3
    pub y_min: f64,
    pub y_max: f64,
    /// Y′ spacing times λ
    pub dy_lambda: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { n: 0, z: 0.0, s_min: -1.0, s_max: 0.5, ns: 61, y_min: -1.0, y_max: 1.0, dy_lambda: 0.5 }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ModeSection {
    /// η in units of 1/h
    pub eta: Vec<f64>,
    pub count: usize,
}

impl Default for ModeSection {
    fn default() -> Self {
        ModeSection { eta: vec![0.95, 1.0, 1.05], count: 10 }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct BilliardSection {
    pub a: Vec<f64>,
    pub iterations: u32,
}

impl Default for BilliardSection {
    fn default() -> Self {
        BilliardSection { a: vec![1e-2, 1e-3], iterations: 10 }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct EikonalSection {
    /// glancing parameter, τ = −(1+a)^{1/2} at η = 1
    pub a: f64,
    /// b(y) = Σ c_k y^k
    pub curvature: Vec<f64>,
    pub order: usize,
    pub y_min: f64,
    pub y_max: f64,
    pub count: usize,
}

impl Default for EikonalSection {
    fn default() -> Self {
        EikonalSection { a: 0.01, curvature: vec![1.0, 0.05], order: 4, y_min: -0.5, y_max: 0.5, count: 11 }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TraceSection {
    pub n: Vec<usize>,
}

impl Default for TraceSection {
    fn default() -> Self {
        TraceSection { n: vec![0, 1, 2] }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn scale(&self) -> ScaleParams {
        let s = &self.scale;
        ScaleParams {
            h: s.h,
            eps: s.eps,
            window: s.window,
            big_c0: s.big_c0,
            c0: s.c0,
            m_gallery: s.m_gallery,
            n_factor: s.n_factor,
            enforce_validity: true,
        }
    }

    pub fn psi(&self) -> Psi {
        Psi { half_width: self.cutoffs.psi_half_width }
    }

    pub fn kappa(&self) -> Kappa {
        Kappa { inner: self.cutoffs.kappa_inner, outer: self.cutoffs.kappa_outer }
    }

    /// Parametrix piece n at the configured scale and cutoffs.
    pub fn spec(&self, scale: ScaleParams, n: usize) -> Result<CuspSpec, ConfigError> {
        CuspSpec::new(scale, n)
            .and_then(|s| s.with_psi(self.psi()))
            .and_then(|s| s.with_kappa(self.kappa()))
            .map_err(|e| invalid(e.to_string()))
    }

    pub fn ladder_h(&self) -> Result<Vec<f64>, ConfigError> {
        let l = &self.ladder;
        if l.count == 0 {
            return Err(invalid("empty ladder: ladder.count is 0"));
        }
        geometric_ladder(l.h_min, l.h_max, l.count).map_err(|e| invalid(e.to_string()))
    }

    /// Re-checks everything derived from the scale section plus the ranges
    /// the suites rely on.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let scale = self.scale();
        scale.validate().map_err(|e| invalid(format!("scale: {e}")))?;
        self.spec(scale, 0)?;
        if let Some(r) = self.norms.r.iter().find(|r| !(**r >= 2.0 && r.is_finite())) {
            return Err(invalid(format!("norms.r = {r}: need 2 <= r < inf")));
        }
        if self.norms.r.is_empty() {
            return Err(invalid("norms.r is empty"));
        }
        if self.norms.samples < 2 {
            return Err(invalid("norms.samples must be at least 2"));
        }
        let l = &self.ladder;
        if l.count > 0 {
            if !(l.h_min > 0.0 && l.h_max > l.h_min) {
                return Err(invalid(format!("ladder range [{}, {}]", l.h_min, l.h_max)));
            }
            for h in self.ladder_h()? {
                scale.with_h(h).validate().map_err(|e| invalid(format!("ladder h = {h:e}: {e}")))?;
            }
        }
        let g = &self.grid;
        if g.ns == 0 || !(g.s_max > g.s_min) || !(g.y_max > g.y_min) || !(g.dy_lambda > 0.0) {
            return Err(invalid("grid section describes an empty grid"));
        }
        if g.n > scale.n_max() {
            return Err(invalid(format!("grid.n = {} exceeds N = {}", g.n, scale.n_max())));
        }
        if let Some(n) = self.trace.n.iter().find(|n| **n + 1 > scale.n_max()) {
            return Err(invalid(format!("trace.n = {n}: needs n + 1 <= N = {}", scale.n_max())));
        }
        if self.modes.count == 0 || self.modes.eta.iter().any(|e| !(*e > 0.0)) {
            return Err(invalid("modes: need count >= 1 and positive eta"));
        }
        if self.billiard.a.iter().any(|a| !(*a > 0.0)) {
            return Err(invalid("billiard.a must be positive"));
        }
        let e = &self.eikonal;
        if !(e.a > 0.0) || e.order == 0 || e.count < 2 || !(e.y_max > e.y_min) || e.curvature.is_empty() {
            return Err(invalid("eikonal section describes an empty jet"));
        }
        Ok(())
    }

    /// Settings a ladder record depends on, as sorted key/value strings.
    /// Floats use the shortest round-trip form so equal values hash equally.
    pub fn ladder_canonical(&self, rs: &[f64]) -> BTreeMap<&'static str, String> {
        let s = &self.scale;
        let l = &self.ladder;
        let c = &self.cutoffs;
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",");
        BTreeMap::from([
            ("scale.eps", format!("{:?}", s.eps)),
            ("scale.window", format!("{:?}", s.window)),
            ("scale.big_c0", format!("{:?}", s.big_c0)),
            ("scale.c0", format!("{:?}", s.c0)),
            ("scale.m_gallery", format!("{:?}", s.m_gallery)),
            ("scale.n_factor", format!("{:?}", s.n_factor)),
            ("cutoffs.psi_half_width", format!("{:?}", c.psi_half_width)),
            ("cutoffs.kappa_inner", format!("{:?}", c.kappa_inner)),
            ("cutoffs.kappa_outer", format!("{:?}", c.kappa_outer)),
            ("ladder.h_min", format!("{:?}", l.h_min)),
            ("ladder.h_max", format!("{:?}", l.h_max)),
            ("ladder.count", l.count.to_string()),
            ("ladder.z", format!("{:?}", l.z)),
            ("r", list(rs)),
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ExperimentConfig::parse("").unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(ExperimentConfig::parse("colour = 1"), Err(ConfigError::Parse(_))));
        assert!(matches!(ExperimentConfig::parse("[scale]\nhh = 1e-3"), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn derived_checks_rerun() {
        assert!(matches!(ExperimentConfig::parse("[scale]\neps = 0.4"), Err(ConfigError::Invalid(_))));
        assert!(matches!(ExperimentConfig::parse("[cutoffs]\npsi_half_width = 0.5"), Err(ConfigError::Invalid(_))));
        let e = ExperimentConfig::parse("[ladder]\ncount = 0").unwrap().ladder_h().unwrap_err();
        assert!(e.to_string().contains("empty ladder"));
    }

    #[test]
    fn canonical_form_ignores_key_order() {
        let a = ExperimentConfig::parse("[scale]\neps = 0.05\nc0 = 0.375\n[ladder]\ncount = 9\nh_max = 1e-3").unwrap();
        let b = ExperimentConfig::parse("[ladder]\nh_max = 0.001\ncount = 9\n[scale]\nc0 = 0.375\neps = 0.05").unwrap();
        assert_eq!(a.ladder_canonical(&[2.0, 6.0]), b.ladder_canonical(&[2.0, 6.0]));
        assert_ne!(a.ladder_canonical(&[2.0]), b.ladder_canonical(&[2.0, 6.0]));
    }
}
