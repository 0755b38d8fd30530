//! Scenario files. Every field has a default, so an empty document is the
//! headline scenario: an even cat with |α|² = 2.1 squeezed by 4 dB along x,
//! sent through pure loss from η = 0.9 downward.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use squeezecat::channels::ChannelSpec;
use squeezecat::metrics::Objective;
use squeezecat::states::{self, DEFAULT_DIM};
use squeezecat::{Complex64, DensityMatrix, Parity, SqueezeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    Cat,
    Fock,
    Coherent,
    Vacuum,
    Thermal,
    ZeroTwo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ParityArg {
    Even,
    Odd,
}

impl From<ParityArg> for Parity {
    fn from(p: ParityArg) -> Self {
        match p {
            ParityArg::Even => Parity::Even,
            ParityArg::Odd => Parity::Odd,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StateConfig {
    pub kind: StateKind,
    /// Coherent amplitude squared, for cat and coherent states.
    pub alpha2: f64,
    /// Phase of the coherent amplitude, radians.
    pub alpha_phase: f64,
    pub parity: ParityArg,
    /// Fock index.
    pub n: usize,
    /// Thermal occupation.
    pub nbar: f64,
    /// Two-photon weight `|c₂|²` of the zero/two superposition (real amplitudes).
    pub two_photon_weight: f64,
    pub s_db: f64,
    pub angle: f64,
    pub dim: usize,
}

impl Default for StateConfig {
    fn default() -> Self {
        Self {
            kind: StateKind::Cat,
            alpha2: 2.1,
            alpha_phase: 0.0,
            parity: ParityArg::Even,
            n: 1,
            nbar: 0.5,
            two_photon_weight: 0.5,
            s_db: 4.0,
            angle: 0.0,
            dim: DEFAULT_DIM,
        }
    }
}

impl StateConfig {
    /// The state before squeezing.
    pub fn build_unsqueezed(&self) -> squeezecat::Result<DensityMatrix> {
        let alpha = Complex64::from_polar(self.alpha2.max(0.0).sqrt(), self.alpha_phase);
        if self.alpha2 < 0.0 {
            return Err(squeezecat::Error::InvalidParameter(format!("alpha2 = {} is negative", self.alpha2)));
        }
        match self.kind {
            StateKind::Cat => states::cat(alpha, self.parity.into(), self.dim),
            StateKind::Fock => states::fock(self.n, self.dim),
            StateKind::Coherent => states::coherent(alpha, self.dim),
            StateKind::Vacuum => states::vacuum(self.dim),
            StateKind::Thermal => states::thermal(self.nbar, self.dim),
            StateKind::ZeroTwo => {
                let w = self.two_photon_weight;
                if !(0.0..=1.0).contains(&w) {
                    return Err(squeezecat::Error::InvalidParameter(format!(
                        "two_photon_weight = {w} is outside [0, 1]"
                    )));
                }
                states::zero_two_superposition(
                    Complex64::new((1.0 - w).sqrt(), 0.0),
                    Complex64::new(w.sqrt(), 0.0),
                    self.dim,
                )
            }
        }
    }

    pub fn squeeze_params(&self) -> SqueezeParams {
        SqueezeParams::new(self.s_db, self.angle)
    }

    pub fn build(&self) -> squeezecat::Result<DensityMatrix> {
        self.build_unsqueezed()?.squeeze(self.squeeze_params())
    }

    pub fn describe(&self) -> String {
        let base = match self.kind {
            StateKind::Cat => format!(
                "{} cat alpha2={}",
                match self.parity {
                    ParityArg::Even => "even",
                    ParityArg::Odd => "odd",
                },
                self.alpha2
            ),
            StateKind::Fock => format!("fock n={}", self.n),
            StateKind::Coherent => format!("coherent alpha2={}", self.alpha2),
            StateKind::Vacuum => "vacuum".to_string(),
            StateKind::Thermal => format!("thermal nbar={}", self.nbar),
            StateKind::ZeroTwo => format!("zero-two w2={}", self.two_photon_weight),
        };
        if self.s_db == 0.0 {
            base
        } else {
            format!("{base} squeezed {} dB at angle {}", self.s_db, self.angle)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            start: 0.9,
            stop: 0.5,
            step: 0.05,
        }
    }
}

impl SweepConfig {
    /// Descending transmissions `start, start − step, …` down to `stop`.
    pub fn etas(&self) -> squeezecat::Result<Vec<f64>> {
        let ok = self.step > 0.0 && self.start <= 1.0 && self.stop >= 0.0 && self.stop <= self.start;
        if !ok {
            return Err(squeezecat::Error::InvalidParameter(format!(
                "sweep needs 1 ≥ start ≥ stop ≥ 0 and step > 0 (got {self:?})"
            )));
        }
        let count = ((self.start - self.stop) / self.step + 1e-9).floor() as usize;
        Ok((0..=count)
            .map(|k| {
                let e = self.start - k as f64 * self.step;
                (e * 1e12).round() / 1e12
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WignerConfig {
    pub half_width: f64,
    pub points: usize,
    /// `x` of the cross section along `p`.
    pub cross_x: f64,
}

impl Default for WignerConfig {
    fn default() -> Self {
        Self {
            half_width: 6.0,
            points: 241,
            cross_x: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig2Config {
    pub alpha2_min: f64,
    pub alpha2_max: f64,
    pub alpha2_step: f64,
    pub n_max: usize,
    pub parity: ParityArg,
}

impl Default for Fig2Config {
    fn default() -> Self {
        Self {
            alpha2_min: 0.5,
            alpha2_max: 3.0,
            alpha2_step: 0.25,
            n_max: 6,
            parity: ParityArg::Odd,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeConfig {
    pub eta: f64,
    pub objective: Objective,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            eta: 0.9,
            objective: Objective::MinRd,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TomoConfig {
    pub samples: usize,
    pub phases: usize,
    /// Detection efficiency applied to the simulated data.
    pub efficiency: f64,
    /// Fold the detection efficiency into the reconstruction.
    pub correct: bool,
    pub dim: usize,
    pub gamma: f64,
    pub delay_tau: f64,
    pub max_iters: usize,
    pub convergence_tol: f64,
}

impl Default for TomoConfig {
    fn default() -> Self {
        Self {
            samples: 50_000,
            phases: 12,
            efficiency: 1.0,
            correct: false,
            dim: 30,
            gamma: 1.0,
            delay_tau: 0.0,
            max_iters: 2000,
            convergence_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub state: StateConfig,
    pub channel: ChannelSpec,
    pub sweep: SweepConfig,
    pub wigner: WignerConfig,
    pub fig2: Fig2Config,
    pub optimize: OptimizeConfig,
    pub tomo: TomoConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            state: StateConfig::default(),
            channel: ChannelSpec::pure_loss(0.8),
            sweep: SweepConfig::default(),
            wigner: WignerConfig::default(),
            fig2: Fig2Config::default(),
            optimize: OptimizeConfig::default(),
            tomo: TomoConfig::default(),
        }
    }
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl ScenarioConfig {
    /// Parse a JSON (`.json`) or TOML (anything else) scenario file.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
        } else {
            toml::from_str(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.message())))
        }
    }
}
