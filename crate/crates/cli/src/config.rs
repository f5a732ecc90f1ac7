//! Run configuration: the TOML schema, its validation and the translation into
//! core objects. The schema is documented in docs/config-schema.md.

use crate::failure::{CliResult, Failure, InModule};
use cohpath_core::contour::build_grid;
use cohpath_core::linalg::CMat;
use cohpath_core::{
    Bath, ContourGrid, Convention, FermionDot, FermionPairing, GridKind, Mode, PathSumMethod, SpectralFunction, Statistics, SystemModel, C64,
};
use serde::{Deserialize, Serialize};
use std::ops::Range;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Verify,
    Partition,
    Correlator,
    Current,
    Green,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Verify => "verify",
            Task::Partition => "partition",
            Task::Correlator => "correlator",
            Task::Current => "current",
            Task::Green => "green",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Formalism {
    Imaginary,
    Keldysh,
    Kadanoff,
}

impl Formalism {
    pub fn kind(self) -> GridKind {
        match self {
            Formalism::Imaginary => GridKind::ImaginaryAxis,
            Formalism::Keldysh => GridKind::Keldysh,
            Formalism::Kadanoff => GridKind::Kadanoff,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Formalism::Imaginary => "imaginary",
            Formalism::Keldysh => "keldysh",
            Formalism::Kadanoff => "kadanoff",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatisticsName {
    Boson,
    Fermion,
}

impl StatisticsName {
    pub fn core(self) -> Statistics {
        match self {
            StatisticsName::Boson => Statistics::Boson,
            StatisticsName::Fermion => Statistics::Fermion,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StatisticsName::Boson => "boson",
            StatisticsName::Fermion => "fermion",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConventionName {
    #[default]
    Exponential,
    Linearized,
}

impl ConventionName {
    pub fn core(self) -> Convention {
        match self {
            ConventionName::Exponential => Convention::Exponential,
            ConventionName::Linearized => Convention::Linearized,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ConventionName::Exponential => "exponential",
            ConventionName::Linearized => "linearized",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub beta: f64,
    #[serde(default)]
    pub t_final: f64,
    #[serde(default)]
    pub m: usize,
    #[serde(default)]
    pub n: usize,
    #[serde(default)]
    pub convention: ConventionName,
    /// Sizes to sweep: `m` on the imaginary axis, `n` on Keldysh, both on Kadanoff.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ladder: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian_imag: Option<Vec<Vec<f64>>>,
    /// Eigenvalues of the coupling operator; the path basis is its eigenbasis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density_imag: Option<Vec<Vec<f64>>>,
    /// Dot level of the fermion model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    /// Initial dot occupation on the Keldysh contour.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occupation: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    pub freq: f64,
    pub coupling: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    /// `strength * w * exp(-w / cutoff)`
    Ohmic,
    /// `strength`
    Flat,
    /// `strength * cutoff^2 / ((w - center)^2 + cutoff^2)`
    Lorentzian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuousConfig {
    pub shape: Shape,
    pub strength: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<f64>,
    pub window: [f64; 2],
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modes: Option<Vec<ModeConfig>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub continuous: Option<ContinuousConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    #[default]
    Enumerate,
    Memory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairingName {
    #[default]
    Unshifted,
    Shifted,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSumConfig {
    #[serde(default)]
    pub method: MethodName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory: Option<usize>,
    #[serde(default)]
    pub pairing: PairingName,
}

fn default_n_max() -> usize {
    40
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    /// Trotterized operator reference on the same grid.
    #[serde(default)]
    pub oracle: bool,
    /// Exact diagonalization (continuum limit).
    #[serde(default)]
    pub exact: bool,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        ReferenceConfig { oracle: false, exact: false, n_max: default_n_max() }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserveConfig {
    /// Contour-order index pairs `[p, q]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<[usize; 2]>>,
    #[serde(default)]
    pub bath: usize,
    #[serde(default)]
    pub mode: usize,
    /// Forward steps at which currents are reported.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<Vec<usize>>,
}

fn default_seed() -> u32 {
    7
}
fn default_samples() -> usize {
    200
}
fn default_sizes() -> Vec<usize> {
    vec![4, 16, 64, 256]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "default_seed")]
    pub seed: u32,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_sizes")]
    pub sizes: Vec<usize>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { seed: default_seed(), samples: default_samples(), sizes: default_sizes() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<Task>,
    pub formalism: Formalism,
    pub statistics: StatisticsName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    pub grid: GridConfig,
    #[serde(default)]
    pub system: SystemConfig,
    #[serde(default)]
    pub baths: Vec<BathConfig>,
    #[serde(default)]
    pub pathsum: PathSumConfig,
    #[serde(default)]
    pub reference: ReferenceConfig,
    #[serde(default)]
    pub observe: ObserveConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Failure::schema(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| Failure::schema(e.to_string()))
    }

    /// Checks everything that does not need the core constructors.
    pub fn validate(&self) -> CliResult<()> {
        let g = &self.grid;
        finite_pos("grid.beta", g.beta)?;
        if !g.t_final.is_finite() || g.t_final < 0.0 {
            return Err(Failure::schema("grid.t_final must be finite and non-negative"));
        }
        let real = self.formalism != Formalism::Imaginary;
        if real && !(g.t_final > 0.0) {
            return Err(Failure::schema("grid.t_final must be positive on real-time contours"));
        }
        let uses_m = self.formalism != Formalism::Keldysh;
        for (m, n) in self.sizes() {
            if uses_m && m == 0 {
                return Err(Failure::schema("grid.m must be at least 1"));
            }
            if real && n == 0 {
                return Err(Failure::schema("grid.n must be at least 1"));
            }
        }
        if self.baths.is_empty() {
            return Err(Failure::schema("at least one [[baths]] entry is required"));
        }
        for (i, b) in self.baths.iter().enumerate() {
            if let Some(beta) = b.beta {
                finite_pos(&format!("baths[{i}].beta"), beta)?;
                if self.formalism != Formalism::Keldysh && beta != g.beta {
                    return Err(Failure::schema(format!("baths[{i}].beta must equal grid.beta on thermal contours")));
                }
            }
            match (&b.modes, &b.continuous) {
                (Some(modes), None) => {
                    if modes.is_empty() {
                        return Err(Failure::schema(format!("baths[{i}].modes is empty")));
                    }
                    for m in modes {
                        if !m.freq.is_finite() || !m.coupling.is_finite() {
                            return Err(Failure::schema(format!("baths[{i}] has a non-finite mode")));
                        }
                    }
                }
                (None, Some(c)) => c.validate(i, self.statistics)?,
                _ => return Err(Failure::schema(format!("baths[{i}] needs exactly one of modes or continuous"))),
            }
        }
        let s = &self.system;
        match self.statistics {
            StatisticsName::Boson => {
                if s.level.is_some() || s.occupation.is_some() {
                    return Err(Failure::schema("system.level and system.occupation belong to the fermion model"));
                }
                let h = s.hamiltonian.as_ref().ok_or_else(|| Failure::schema("system.hamiltonian is required"))?;
                let d = h.len();
                square("system.hamiltonian", h, d)?;
                if let Some(hi) = &s.hamiltonian_imag {
                    square("system.hamiltonian_imag", hi, d)?;
                }
                let c = s.coupling.as_ref().ok_or_else(|| Failure::schema("system.coupling is required"))?;
                if c.len() != d || c.iter().any(|x| !x.is_finite()) {
                    return Err(Failure::schema("system.coupling needs d finite eigenvalues"));
                }
                match (&s.density, self.formalism) {
                    (Some(r), Formalism::Keldysh) => {
                        square("system.density", r, d)?;
                        if let Some(ri) = &s.density_imag {
                            square("system.density_imag", ri, d)?;
                        }
                    }
                    (None, Formalism::Keldysh) => return Err(Failure::schema("system.density is required on the Keldysh contour")),
                    (Some(_), _) => return Err(Failure::schema("system.density is only used on the Keldysh contour")),
                    (None, _) => {
                        if s.density_imag.is_some() {
                            return Err(Failure::schema("system.density_imag without system.density"));
                        }
                    }
                }
            }
            StatisticsName::Fermion => {
                if s.hamiltonian.is_some() || s.hamiltonian_imag.is_some() || s.coupling.is_some() || s.density.is_some() || s.density_imag.is_some() {
                    return Err(Failure::schema("the fermion model takes only system.level and system.occupation"));
                }
                let e = s.level.ok_or_else(|| Failure::schema("system.level is required"))?;
                if !e.is_finite() {
                    return Err(Failure::schema("system.level must be finite"));
                }
                if let Some(p) = s.occupation {
                    if self.formalism != Formalism::Keldysh {
                        return Err(Failure::schema("system.occupation is only used on the Keldysh contour"));
                    }
                    if !(0.0..1.0).contains(&p) {
                        return Err(Failure::schema("system.occupation must lie in [0, 1)"));
                    }
                }
            }
        }
        if self.pathsum.method == MethodName::Memory && self.pathsum.memory.is_none() {
            return Err(Failure::schema("pathsum.memory is required with method = \"memory\""));
        }
        if self.reference.n_max == 0 {
            return Err(Failure::schema("reference.n_max must be positive"));
        }
        Ok(())
    }

    /// `(m, n)` for every run of the size ladder.
    pub fn sizes(&self) -> Vec<(usize, usize)> {
        let g = &self.grid;
        if g.ladder.is_empty() {
            return vec![(g.m, g.n)];
        }
        g.ladder
            .iter()
            .map(|&v| match self.formalism {
                Formalism::Imaginary => (v, g.n),
                Formalism::Keldysh => (g.m, v),
                Formalism::Kadanoff => (v, v),
            })
            .collect()
    }
}

fn finite_pos(name: &str, x: f64) -> CliResult<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Failure::schema(format!("{name} must be finite and positive")))
    }
}

fn square(name: &str, rows: &[Vec<f64>], d: usize) -> CliResult<()> {
    if d == 0 || rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(Failure::schema(format!("{name} must be a non-empty {d} x {d} table")));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Failure::schema(format!("{name} has non-finite entries")));
    }
    Ok(())
}

impl ContinuousConfig {
    fn validate(&self, i: usize, stat: StatisticsName) -> CliResult<()> {
        let [lo, hi] = self.window;
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Failure::schema(format!("baths[{i}].continuous.window must be finite with lo < hi")));
        }
        if stat == StatisticsName::Boson && lo < 0.0 {
            return Err(Failure::schema(format!("baths[{i}].continuous.window must start at w >= 0 for bosons")));
        }
        if self.count == 0 {
            return Err(Failure::schema(format!("baths[{i}].continuous.count must be positive")));
        }
        if !(self.strength.is_finite() && self.strength >= 0.0) {
            return Err(Failure::schema(format!("baths[{i}].continuous.strength must be finite and non-negative")));
        }
        match self.shape {
            Shape::Ohmic | Shape::Lorentzian => {
                let c = self.cutoff.ok_or_else(|| Failure::schema(format!("baths[{i}].continuous.cutoff is required")))?;
                finite_pos(&format!("baths[{i}].continuous.cutoff"), c)?;
            }
            Shape::Flat => {}
        }
        if self.shape == Shape::Lorentzian && !self.center.unwrap_or(0.0).is_finite() {
            return Err(Failure::schema(format!("baths[{i}].continuous.center must be finite")));
        }
        Ok(())
    }

    fn density(&self, w: f64) -> f64 {
        let c = self.cutoff.unwrap_or(1.0);
        match self.shape {
            Shape::Ohmic => self.strength * w * (-w / c).exp(),
            Shape::Flat => self.strength,
            Shape::Lorentzian => {
                let x = w - self.center.unwrap_or(0.0);
                self.strength * c * c / (x * x + c * c)
            }
        }
    }

    /// Midpoint rule: node `w_k` carries `V_k^2 = J(w_k) dw`.
    pub fn discretize(&self) -> Vec<Mode> {
        let [lo, hi] = self.window;
        let dw = (hi - lo) / self.count as f64;
        (0..self.count)
            .map(|k| {
                let w = lo + (k as f64 + 0.5) * dw;
                Mode { freq: w, coupling: (self.density(w) * dw).sqrt() }
            })
            .collect()
    }
}

/// The configuration translated into core objects.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub kind: GridKind,
    pub statistics: Statistics,
    pub convention: Convention,
    pub baths: Vec<Bath>,
    /// Range of each bath's modes in the concatenated mode list.
    pub bath_modes: Vec<Range<usize>>,
    pub all_modes: SpectralFunction,
    pub mode_betas: Vec<f64>,
    pub model: Option<SystemModel>,
    pub dot: Option<FermionDot>,
    pub method: PathSumMethod,
    pub pairing: FermionPairing,
}

fn matrix(re: &[Vec<f64>], im: Option<&Vec<Vec<f64>>>) -> CMat {
    let d = re.len();
    CMat::from_fn(d, d, |i, j| C64::new(re[i][j], im.map_or(0.0, |m| m[i][j])))
}

impl Resolved {
    pub fn new(cfg: &RunConfig) -> CliResult<Self> {
        let stat = cfg.statistics.core();
        let mut baths = Vec::new();
        let mut bath_modes = Vec::new();
        let mut modes = Vec::new();
        let mut mode_betas = Vec::new();
        for b in &cfg.baths {
            let list = match (&b.modes, &b.continuous) {
                (Some(m), _) => m.iter().map(|m| Mode { freq: m.freq, coupling: m.coupling }).collect(),
                (_, Some(c)) => c.discretize(),
                _ => unreachable!("validated"),
            };
            let beta = b.beta.unwrap_or(cfg.grid.beta);
            let spec = SpectralFunction::new(stat, list.clone()).in_module("greens")?;
            baths.push(Bath::new(spec, beta).in_module("greens")?);
            bath_modes.push(modes.len()..modes.len() + list.len());
            mode_betas.extend(std::iter::repeat(beta).take(list.len()));
            modes.extend(list);
        }
        let all_modes = SpectralFunction::new(stat, modes).in_module("greens")?;
        let convention = cfg.grid.convention.core();
        let s = &cfg.system;
        let (model, dot) = match cfg.statistics {
            StatisticsName::Boson => {
                let h = matrix(s.hamiltonian.as_ref().unwrap(), s.hamiltonian_imag.as_ref());
                let c = s.coupling.as_ref().unwrap();
                let sop = CMat::from_fn(c.len(), c.len(), |i, j| if i == j { C64::new(c[i], 0.0) } else { C64::new(0.0, 0.0) });
                let rho = s.density.as_ref().map(|r| matrix(r, s.density_imag.as_ref()));
                (Some(SystemModel::new(h, sop, rho).in_module("pathsum")?), None)
            }
            StatisticsName::Fermion => {
                let dot = FermionDot::new(s.level.unwrap(), s.occupation.unwrap_or(0.0), convention).in_module("pathsum")?;
                (None, Some(dot))
            }
        };
        let method = match cfg.pathsum.method {
            MethodName::Enumerate => PathSumMethod::Enumerate,
            MethodName::Memory => PathSumMethod::MemoryTruncated { k_mem: cfg.pathsum.memory.unwrap() },
        };
        let pairing = match cfg.pathsum.pairing {
            PairingName::Unshifted => FermionPairing::Unshifted,
            PairingName::Shifted => FermionPairing::Shifted,
        };
        Ok(Resolved { kind: cfg.formalism.kind(), statistics: stat, convention, baths, bath_modes, all_modes, mode_betas, model, dot, method, pairing })
    }

    pub fn grid(&self, cfg: &RunConfig, m: usize, n: usize) -> CliResult<ContourGrid> {
        let m = if self.kind == GridKind::Keldysh { m.max(1) } else { m };
        build_grid(self.kind, cfg.grid.beta, cfg.grid.t_final, m, n).in_module("contour")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
formalism = "keldysh"
statistics = "boson"

[grid]
beta = 1.0
t_final = 2.0
n = 4
ladder = [2, 4]

[system]
hamiltonian = [[0.0, 0.5], [0.5, 0.0]]
coupling = [1.0, -1.0]
density = [[1.0, 0.0], [0.0, 0.0]]

[[baths]]
beta = 0.5
modes = [{ freq = 1.0, coupling = 0.3 }]

[[baths]]
continuous = { shape = "ohmic", strength = 0.1, cutoff = 2.0, window = [0.0, 4.0], count = 3 }
"#;

    #[test]
    fn sample_parses_and_resolves() {
        let cfg = RunConfig::parse(SAMPLE).unwrap();
        assert_eq!(cfg.sizes(), vec![(0, 2), (0, 4)]);
        let r = Resolved::new(&cfg).unwrap();
        assert_eq!(r.bath_modes, vec![0..1, 1..4]);
        assert_eq!(r.mode_betas, vec![0.5, 1.0, 1.0, 1.0]);
        assert!(r.model.as_ref().unwrap().initial_density.is_some());
        assert_eq!(r.grid(&cfg, 0, 4).unwrap().len(), 9);
    }

    #[test]
    fn midpoint_quadrature_weights() {
        let c = ContinuousConfig { shape: Shape::Flat, strength: 0.2, cutoff: None, center: None, window: [-1.0, 1.0], count: 4 };
        let m = c.discretize();
        assert_eq!(m.iter().map(|m| m.freq).collect::<Vec<_>>(), vec![-0.75, -0.25, 0.25, 0.75]);
        let total: f64 = m.iter().map(|m| m.coupling * m.coupling).sum();
        assert!((total - 0.4).abs() < 1e-15);
    }

    #[test]
    fn schema_violations_exit_two() {
        let bad = [
            SAMPLE.replace("beta = 1.0", "beta = -1.0"),
            SAMPLE.replace("statistics = \"boson\"", "statistics = \"anyon\""),
            SAMPLE.replace("count = 3", "count = 0"),
            SAMPLE.replace("[grid]", "[grid]\nunknown = 1"),
            SAMPLE.replace("density = [[1.0, 0.0], [0.0, 0.0]]", ""),
            SAMPLE.replace("coupling = [1.0, -1.0]", "coupling = [1.0]"),
        ];
        for text in bad {
            assert_eq!(RunConfig::parse(&text).unwrap_err().code, 2, "{text}");
        }
    }

    #[test]
    fn thermal_contours_tie_bath_temperature_to_grid() {
        let text = SAMPLE.replace("formalism = \"keldysh\"", "formalism = \"kadanoff\"").replace("density = [[1.0, 0.0], [0.0, 0.0]]", "").replace("n = 4", "n = 4\nm = 3");
        assert!(RunConfig::parse(&text).unwrap_err().message.contains("beta"));
        let ok = text.replace("beta = 0.5\n", "");
        RunConfig::parse(&ok).unwrap();
    }

    #[test]
    fn round_trip_of_sample() {
        let cfg = RunConfig::parse(SAMPLE).unwrap();
        let again = RunConfig::parse(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, again);
    }
}
