//! Spin system description: chemical-shift offsets, scalar couplings, the
//! rotating-frame Hamiltonian they generate, and the thermal equilibrium
//! deviation state.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::opkit::{pauli, Axis, OpError, Operator, MAX_SPINS};

/// Planck constant, J s (exact SI value).
pub const PLANCK_J_S: f64 = 6.62607015e-34;

/// Boltzmann constant, J/K (exact SI value).
pub const BOLTZMANN_J_PER_K: f64 = 1.380649e-23;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid system config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("system must have between 1 and {MAX_SPINS} spins, got {n}")]
    SpinCount { n: usize },
    #[error("coupling ({i},{j}) does not name two distinct spins in range")]
    BadPair { i: usize, j: usize },
    #[error("coupling ({i},{j}) appears more than once")]
    DuplicatePair { i: usize, j: usize },
    #[error("non-finite value in config: {what}")]
    NonFinite { what: String },
}

/// One spin entry in a system config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinConfig {
    pub label: String,
    pub offset_hz: f64,
}

/// One scalar coupling entry; `i` and `j` are 1-indexed spin numbers.
/// Couplings marked `weak` are skipped unless explicitly requested.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    pub i: usize,
    pub j: usize,
    pub hz: f64,
    #[serde(default, skip_serializing_if = "is_false")]
    pub weak: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// Declarative spin system description, loadable from JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub spins: Vec<SpinConfig>,
    pub couplings: Vec<CouplingConfig>,
}

impl SystemConfig {
    /// The labeled carbon backbone of 13C-alanine. The long-range coupling
    /// between the outer carbons is small and marked weak, so it only enters
    /// the Hamiltonian on request.
    pub fn alanine() -> SystemConfig {
        SystemConfig {
            spins: vec![
                SpinConfig {
                    label: "C1".into(),
                    offset_hz: 0.0,
                },
                SpinConfig {
                    label: "C2".into(),
                    offset_hz: 0.0,
                },
                SpinConfig {
                    label: "C3".into(),
                    offset_hz: 0.0,
                },
            ],
            couplings: vec![
                CouplingConfig {
                    i: 1,
                    j: 2,
                    hz: 53.4,
                    weak: false,
                },
                CouplingConfig {
                    i: 2,
                    j: 3,
                    hz: 35.3,
                    weak: false,
                },
                CouplingConfig {
                    i: 1,
                    j: 3,
                    hz: 1.4,
                    weak: true,
                },
            ],
        }
    }

    pub fn from_json_str(s: &str) -> Result<SystemConfig, ConfigError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn from_path(path: &Path) -> Result<SystemConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        SystemConfig::from_json_str(&text)
    }

    /// Validate and instantiate. `include_weak` pulls weak-marked couplings
    /// into the Hamiltonian; otherwise they are dropped entirely.
    pub fn build(&self, include_weak: bool) -> Result<SpinSystem, ConfigError> {
        let n = self.spins.len();
        if n == 0 || n > MAX_SPINS {
            return Err(ConfigError::SpinCount { n });
        }
        for s in &self.spins {
            if !s.offset_hz.is_finite() {
                return Err(ConfigError::NonFinite {
                    what: format!("offset of {}", s.label),
                });
            }
        }
        let mut seen = Vec::new();
        let mut couplings = Vec::new();
        for cp in &self.couplings {
            if cp.i == cp.j || cp.i == 0 || cp.j == 0 || cp.i > n || cp.j > n {
                return Err(ConfigError::BadPair { i: cp.i, j: cp.j });
            }
            if !cp.hz.is_finite() {
                return Err(ConfigError::NonFinite {
                    what: format!("coupling ({},{})", cp.i, cp.j),
                });
            }
            let pair = (cp.i.min(cp.j), cp.i.max(cp.j));
            if seen.contains(&pair) {
                return Err(ConfigError::DuplicatePair {
                    i: pair.0,
                    j: pair.1,
                });
            }
            seen.push(pair);
            if cp.weak && !include_weak {
                continue;
            }
            couplings.push(Coupling {
                i: pair.0,
                j: pair.1,
                hz: cp.hz,
            });
        }
        Ok(SpinSystem {
            labels: self.spins.iter().map(|s| s.label.clone()).collect(),
            offsets_hz: self.spins.iter().map(|s| s.offset_hz).collect(),
            couplings,
        })
    }
}

/// A scalar coupling retained in a built system; `i < j`, 1-indexed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling {
    pub i: usize,
    pub j: usize,
    pub hz: f64,
}

/// A validated spin system ready for simulation.
#[derive(Debug, Clone)]
pub struct SpinSystem {
    labels: Vec<String>,
    offsets_hz: Vec<f64>,
    couplings: Vec<Coupling>,
}

impl SpinSystem {
    pub fn n_spins(&self) -> usize {
        self.offsets_hz.len()
    }

    pub fn dim(&self) -> usize {
        1 << self.n_spins()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn offsets_hz(&self) -> &[f64] {
        &self.offsets_hz
    }

    pub fn couplings(&self) -> &[Coupling] {
        &self.couplings
    }

    /// Coupling constant for an unordered spin pair, if one is present.
    pub fn coupling_hz(&self, a: usize, b: usize) -> Option<f64> {
        let pair = (a.min(b), a.max(b));
        self.couplings
            .iter()
            .find(|c| (c.i, c.j) == pair)
            .map(|c| c.hz)
    }

    /// Rotating-frame Hamiltonian in rad/s:
    /// sum of offset terms (2 pi nu_j / 2) sz_j and coupling terms
    /// (pi / 2) J_jk sz_j sz_k. Diagonal by construction.
    pub fn hamiltonian(&self) -> Operator {
        let mut h = Operator::zeros(self.dim());
        for (idx, &nu) in self.offsets_hz.iter().enumerate() {
            let sz = self.sz(idx + 1);
            h = h.add(&sz.scale(PI * nu)).unwrap();
        }
        for c in &self.couplings {
            let zz = self.sz(c.i).mul(&self.sz(c.j)).unwrap();
            h = h.add(&zz.scale(PI / 2.0 * c.hz)).unwrap();
        }
        h
    }

    /// Deviation part of the high-temperature thermal state for identical
    /// nuclei: the sum of sz over all spins, diag(3,1,1,-1,...) for three.
    pub fn equilibrium_deviation(&self) -> Operator {
        let mut rho = Operator::zeros(self.dim());
        for j in 1..=self.n_spins() {
            rho = rho.add(&self.sz(j)).unwrap();
        }
        rho
    }

    fn sz(&self, spin: usize) -> Operator {
        pauli(Axis::Z, spin, self.n_spins()).expect("spin index validated at build")
    }

    pub fn pauli(&self, axis: Axis, spin: usize) -> Result<Operator, OpError> {
        pauli(axis, spin, self.n_spins())
    }
}

/// Field strength and temperature defining the actual (tiny) polarization
/// that the deviation-matrix convention divides out.
#[derive(Debug, Clone, Copy)]
pub struct ThermalParams {
    pub frequency_hz: f64,
    pub temperature_k: f64,
}

impl ThermalParams {
    /// Ratio of Zeeman quantum to thermal energy, h nu / (k T). Around
    /// 1.6e-5 for carbon at typical spectrometer fields, which is why the
    /// unit-scale deviation matrix is the convenient object to evolve.
    pub fn boltzmann_factor(&self) -> f64 {
        PLANCK_J_S * self.frequency_hz / (BOLTZMANN_J_PER_K * self.temperature_k)
    }
}
