//! Experiment configuration: one JSON document, desk defaults for every field,
//! and validation of the parameter inequalities before any computation.

use fracnls_core::dynamics::RhsKind;
use fracnls_core::mourre::{growth_horizon, min_k_max, mourre_radius, nu0};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Initial data for `simulate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSpec {
    Zero,
    PlaneWave {
        k: i64,
        a: f64,
    },
    /// Seeded random field with the given `H^{s₀}` norm.
    Random {
        norm: f64,
    },
    /// Well-prepared data built from the tangential and normal parameters.
    WellPrepared,
    /// A field file as written by `make-data`.
    File {
        path: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateOptions {
    pub rhs: RhsKind,
    pub data: DataSpec,
    pub stride: usize,
    /// Relative `L²` tolerance against the exact orbit for plane-wave data.
    pub plane_wave_tol: f64,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        Self { rhs: RhsKind::Renormalized, data: DataSpec::WellPrepared, stride: 100, plane_wave_tol: 1e-7 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EffectiveOptions {
    /// Truncation radius of the growth run; `None` picks one that keeps the
    /// packet away from the edge of the basis.
    pub growth_k: Option<usize>,
    pub stride: usize,
    /// Run the `𝔳 ≡ 0` control (`z₋1 = 0`) instead of the growth experiment.
    pub control: bool,
}

impl Default for EffectiveOptions {
    fn default() -> Self {
        Self { growth_k: None, stride: 50, control: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResonanceOptions {
    #[serde(rename = "J")]
    pub j_max: i64,
    /// Dispersion exponents to audit; empty means the top-level `alpha`.
    pub alphas: Vec<f64>,
    /// Truncation for the exhaustive projection identities.
    pub projection_j: i64,
}

impl Default for ResonanceOptions {
    fn default() -> Self {
        Self { j_max: 300, alphas: Vec::new(), projection_j: 50 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormalFormOptions {
    /// Amplitude `a` of the two-mode field `a + i a e^{ix}`.
    pub amplitude: f64,
    pub rhos: Vec<f64>,
    /// Radius for the block-diagonalization decay.
    pub decay_k: usize,
    /// Radius for the `g₂` residual decay.
    pub residual_k: usize,
    /// Radius and sample count for the transport identity.
    pub transport_k: usize,
    pub transport_samples: u64,
    /// Truncation for the strong-`Λ` check.
    pub strong_lambda_j: usize,
}

impl Default for NormalFormOptions {
    fn default() -> Self {
        Self {
            amplitude: 0.1,
            rhos: vec![1.0, 2.0],
            decay_k: 128,
            residual_k: 256,
            transport_k: 64,
            transport_samples: 20,
            strong_lambda_j: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MourreOptions {
    /// Largest admissible `C` in the positive-commutator bound.
    pub c_limit: f64,
    /// Extra values of `ε` for a stability table of `C` against `R`.
    pub epsilon_sweep: Vec<f64>,
}

impl Default for MourreOptions {
    fn default() -> Self {
        Self { c_limit: 100.0, epsilon_sweep: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub alpha: f64,
    pub epsilon: f64,
    pub theta: f64,
    pub s: f64,
    pub s0: f64,
    pub rho1: f64,
    pub rho_m1: f64,
    pub rho: f64,
    #[serde(rename = "K")]
    pub k_max: usize,
    /// Spatial resolution of symbol grids; `None` uses `4K + 4`.
    #[serde(rename = "M")]
    pub m: Option<usize>,
    pub dt: f64,
    /// Final time; `None` uses the growth horizon `(T0/ε²) log(1/ε)`.
    #[serde(rename = "T")]
    pub t_final: Option<f64>,
    pub seed: u64,
    pub simulate: SimulateOptions,
    pub effective: EffectiveOptions,
    pub resonance: ResonanceOptions,
    pub normalform: NormalFormOptions,
    pub mourre: MourreOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            epsilon: 0.5,
            theta: 0.05,
            s: 7.0,
            s0: 2.0,
            rho1: 0.6,
            rho_m1: 0.6,
            rho: 1e-10,
            k_max: 256,
            m: None,
            dt: 1e-3,
            t_final: None,
            seed: 0,
            simulate: SimulateOptions::default(),
            effective: EffectiveOptions::default(),
            resonance: ResonanceOptions::default(),
            normalform: NormalFormOptions::default(),
            mourre: MourreOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Effective,
    ResonanceAudit,
    NormalFormVerify,
    MourreCheck,
    MakeData,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Effective => "effective",
            Command::ResonanceAudit => "resonance-audit",
            Command::NormalFormVerify => "normalform-verify",
            Command::MourreCheck => "mourre-check",
            Command::MakeData => "make-data",
        }
    }

    fn needs_mourre_radius(self) -> bool {
        matches!(self, Command::Effective | Command::MourreCheck | Command::MakeData)
    }
}

fn invalid(msg: String) -> CliError {
    CliError::Config(msg)
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| invalid(format!("cannot parse config: {e}")))
    }

    /// Upper end of the admissible `θ` interval.
    pub fn theta_star(&self) -> f64 {
        ((self.s - 3.0 * self.s0) / (2.0 * self.s - self.s0)).min(0.2)
    }

    pub fn radius(&self) -> f64 {
        mourre_radius(self.epsilon, self.theta, self.alpha)
    }

    pub fn nu0(&self) -> f64 {
        nu0(self.rho1, self.rho_m1)
    }

    /// The growth horizon `(T0/ε²) log(1/ε)` with `T0 = 1/ν0`.
    pub fn horizon(&self) -> f64 {
        growth_horizon(self.epsilon, self.nu0())
    }

    pub fn t_final(&self) -> f64 {
        self.t_final.unwrap_or_else(|| self.horizon())
    }

    pub fn symbol_resolution(&self) -> usize {
        self.m.unwrap_or(4 * self.k_max + 4)
    }

    /// Checks every inequality the command relies on and names the first
    /// violated one.
    pub fn validate(&self, cmd: Command) -> Result<(), CliError> {
        let finite = [self.alpha, self.epsilon, self.theta, self.s, self.s0, self.rho1, self.rho_m1, self.rho, self.dt];
        if finite.iter().any(|x| !x.is_finite()) {
            return Err(invalid("all real parameters must be finite".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid(format!("need 0 < α < 1, got α = {}", self.alpha)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(invalid(format!("need 0 < ε < 1, got ε = {}", self.epsilon)));
        }
        if !(self.s0 > 0.0 && self.s > 3.0 * self.s0) {
            return Err(invalid(format!("need s > 3·s0, got s = {}, s0 = {}", self.s, self.s0)));
        }
        let theta_star = self.theta_star();
        if !(self.theta > 0.0 && self.theta < theta_star) {
            return Err(invalid(format!(
                "need 0 < θ < min((s−3s0)/(2s−s0), 1/5) = {theta_star:.6}, got θ = {}",
                self.theta
            )));
        }
        if !(self.dt > 0.0) {
            return Err(invalid(format!("need dt > 0, got {}", self.dt)));
        }
        if let Some(t) = self.t_final {
            if !(t > 0.0 && t.is_finite()) {
                return Err(invalid(format!("need T > 0, got {t}")));
            }
        }
        if self.k_max == 0 {
            return Err(invalid("need K ≥ 1".into()));
        }
        if let Some(m) = self.m {
            if m < 4 * self.k_max + 4 {
                return Err(invalid(format!("need M ≥ 4K+4 = {}, got M = {m}", 4 * self.k_max + 4)));
            }
        }
        let needs_radius = match cmd {
            Command::Simulate => self.simulate.data == DataSpec::WellPrepared,
            _ => cmd.needs_mourre_radius(),
        };
        if needs_radius {
            let need = min_k_max(self.radius());
            if self.k_max < need {
                return Err(invalid(format!(
                    "need K ≥ 3·ceil(ε^(−(3+θ)/(1−α))) + 10 = {need}, got K = {}",
                    self.k_max
                )));
            }
        }
        match cmd {
            Command::Effective if !self.effective.control => {
                if !(self.nu0() > 0.0) {
                    return Err(invalid(format!("need ν0 = 2ρ1ρ−1 − (ρ1² + ρ−1²)/2 > 0, got {:.6e}", self.nu0())));
                }
                if let Some(t) = self.t_final {
                    let t_max = self.horizon();
                    if t > t_max * (1.0 + 1e-12) {
                        return Err(invalid(format!("need T ≤ (T0/ε²)log(1/ε) = {t_max:.6}, got T = {t}")));
                    }
                }
                if let Some(k) = self.effective.growth_k {
                    if k < self.k_max {
                        return Err(invalid(format!("need growth_k ≥ K = {}, got {k}", self.k_max)));
                    }
                }
            }
            Command::Effective => {}
            Command::ResonanceAudit => {
                let r = &self.resonance;
                if r.j_max < 1 || r.projection_j < 1 {
                    return Err(invalid("need J ≥ 1 and projection_j ≥ 1".into()));
                }
                if let Some(a) = r.alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
                    return Err(invalid(format!("need every swept α in (0,1), got {a}")));
                }
            }
            Command::NormalFormVerify => {
                let n = &self.normalform;
                if n.rhos.iter().any(|r| !(*r > 0.0)) {
                    return Err(invalid("need every ρ > 0".into()));
                }
                if n.decay_k == 0 || n.residual_k == 0 || n.transport_k == 0 || n.strong_lambda_j < 2 {
                    return Err(invalid("need positive radii and strong_lambda_j ≥ 2".into()));
                }
            }
            Command::MourreCheck => {
                if let Some(e) = self.mourre.epsilon_sweep.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
                    return Err(invalid(format!("need every swept ε in (0,1), got {e}")));
                }
            }
            Command::Simulate | Command::MakeData => {}
        }
        Ok(())
    }
}
