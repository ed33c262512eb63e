//! Simulation of a liquid-state NMR experiment on three weakly coupled
//! spin-1/2 nuclei: pseudo-pure state preparation by pulsed gradients,
//! rotation into a GHZ-correlated deviation density matrix, and readout of
//! three-spin correlations as phased multiplet spectra. An exhaustive
//! enumeration of deterministic local +-1 assignments shows that no such
//! assignment reproduces all four measured correlation products.
//!
//! Modules, bottom up:
//!
//! * [`opkit`] - dense complex operators, Pauli algebra, matrix exponential
//! * [`spinsys`] - spin system parameters and the weak-coupling Hamiltonian
//! * [`seqlang`] - pulse-program IR, text grammar, and builtin sequences
//! * [`engine`] - pulse/delay/gradient propagation of deviation matrices
//! * [`acquire`] - FID synthesis, spectra, multiplet decoding
//! * [`ghz`] - experiment driver, correlation oracles, LHV enumeration

pub mod acquire;
pub mod engine;
pub mod ghz;
pub mod opkit;
pub mod seqlang;
pub mod spinsys;

pub use acquire::{Fid, Multiplet, SpectralLine, Spectrum};
pub use engine::{EngineState, RunOptions};
pub use ghz::{ExperimentConfig, ExperimentRun, MeasurementSetting};
pub use opkit::{Axis, Operator, TransverseAxis};
pub use seqlang::{Delay, Gradient, Pulse, SeqElement, Sequence};
pub use spinsys::{SpinSystem, SystemConfig, ThermalParams};
