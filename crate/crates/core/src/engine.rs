//! Sequence execution against deviation density matrices.
//!
//! Rotation convention, frozen repo-wide: a pulse of flip angle theta at rf
//! phase phi conjugates the state by
//!
//! ```text
//! U = exp(+i (theta/2) sum_t [cos(phi) sx_t + sin(phi) sy_t])
//! ```
//!
//! while free evolution is the physical U = exp(-i H t). This sign pairing
//! is the one under which the built-in preparation sequence maps thermal
//! equilibrium onto the diag(1,0,...,0,-1) pseudo-pure pattern with a
//! positive overall scale, and the built-in rotation sequence produces the
//! corner-coherence entangled matrix with value -1; flipping it negates the
//! prepared corners and every decoded correlation product.
//!
//! Pulses are ideal: instantaneous with respect to the Hamiltonian, with
//! their nominal length entering only the elapsed-time accounting. Coupling
//! delays evolve under the single named zz term, the idealized effect of the
//! refocusing cycles that real sequences embed. Gradients are crushers: the
//! sample-averaged channel that zeroes every element whose total coherence
//! order is nonzero.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::opkit::{expm_hermitian_generator, pauli, Axis, OpError, Operator};
use crate::seqlang::{validate, Delay, Gradient, Pulse, SeqElement, SeqError, Sequence};
use crate::spinsys::SpinSystem;

/// Hermiticity and trace drift allowed on the state after each element.
pub const STATE_DRIFT_TOL: f64 = 1e-10;

/// Allowed off-pattern residue when normalizing a prepared pseudo-pure state.
pub const PSEUDO_PURE_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Op(#[from] OpError),
    #[error(transparent)]
    Sequence(#[from] SeqError),
    #[error("state does not match the pseudo-pure pattern (max deviation {deviation:.3e})")]
    NotPseudoPure { deviation: f64 },
}

/// Timing knobs that are pure bookkeeping: neither adds any evolution.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunOptions {
    /// Time charged per gradient crusher, seconds.
    pub crusher_time_s: f64,
    /// Time charged between two back-to-back pulses, seconds.
    pub inter_pulse_gap_s: f64,
}

/// A deviation density matrix bound to its spin system, with elapsed time
/// since the start of the current sequence.
#[derive(Debug, Clone)]
pub struct EngineState {
    pub rho: Operator,
    pub sys: SpinSystem,
    pub elapsed: f64,
    pub opts: RunOptions,
}

impl EngineState {
    /// Start at thermal equilibrium.
    pub fn equilibrium(sys: SpinSystem, opts: RunOptions) -> EngineState {
        let rho = sys.equilibrium_deviation();
        EngineState {
            rho,
            sys,
            elapsed: 0.0,
            opts,
        }
    }

    pub fn with_state(sys: SpinSystem, rho: Operator, opts: RunOptions) -> EngineState {
        assert_eq!(rho.dim(), sys.dim(), "state dimension must match system");
        EngineState {
            rho,
            sys,
            elapsed: 0.0,
            opts,
        }
    }

    pub fn apply_pulse(&self, p: &Pulse) -> Result<EngineState, EngineError> {
        let n = self.sys.n_spins();
        let (sin_phi, cos_phi) = p.phase_rad().sin_cos();
        let mut g = Operator::zeros(self.sys.dim());
        for &s in &p.spins {
            g = g
                .add(&pauli(Axis::X, s, n)?.scale(cos_phi))?
                .add(&pauli(Axis::Y, s, n)?.scale(sin_phi))?;
        }
        // exp(+i (theta/2) G), written as the t = -theta/2 propagator of G.
        let u = expm_hermitian_generator(&g, -p.angle_rad() / 2.0)?;
        self.conjugated(&u, p.duration_s())
    }

    pub fn apply_delay(&self, d: &Delay) -> Result<EngineState, EngineError> {
        match *d {
            Delay::CouplingFraction { pair, frac } => {
                let (i, j) = pair;
                let hz = self
                    .sys
                    .coupling_hz(i, j)
                    .ok_or(SeqError::UnknownCoupling { i, j })?;
                if hz == 0.0 {
                    return Err(SeqError::ZeroCoupling { i, j }.into());
                }
                let t = frac / hz;
                let n = self.sys.n_spins();
                let zz = pauli(Axis::Z, i, n)?.mul(&pauli(Axis::Z, j, n)?)?;
                let u = expm_hermitian_generator(&zz.scale(PI / 2.0 * hz), t)?;
                self.conjugated(&u, t)
            }
            Delay::FixedTime { seconds } => {
                let u = expm_hermitian_generator(&self.sys.hamiltonian(), seconds)?;
                self.conjugated(&u, seconds)
            }
        }
    }

    /// Crusher channel: zero every element whose bra and ket differ in total
    /// z-magnetization, keep the rest untouched. Exact and idempotent.
    pub fn apply_gradient(&self, _g: &Gradient) -> EngineState {
        let dim = self.sys.dim();
        let rho = Operator::from_fn(dim, |a, b| {
            if (a as u32).count_ones() == (b as u32).count_ones() {
                self.rho.get(a, b)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let next = EngineState {
            rho,
            sys: self.sys.clone(),
            elapsed: self.elapsed + self.opts.crusher_time_s,
            opts: self.opts,
        };
        next.check_integrity();
        next
    }

    /// Execute a full sequence. The returned state's `elapsed` is the
    /// duration of this sequence alone, including configured crusher times
    /// and inter-pulse gaps.
    pub fn run(&self, seq: &Sequence) -> Result<EngineState, EngineError> {
        validate(seq, &self.sys)?;
        let mut state = self.clone();
        state.elapsed = 0.0;
        let mut prev_was_pulse = false;
        for el in &seq.elements {
            let is_pulse = matches!(el, SeqElement::Pulse(_));
            if is_pulse && prev_was_pulse {
                state.elapsed += self.opts.inter_pulse_gap_s;
            }
            state = match el {
                SeqElement::Pulse(p) => state.apply_pulse(p)?,
                SeqElement::Delay(d) => state.apply_delay(d)?,
                SeqElement::Gradient(g) => state.apply_gradient(g),
            };
            prev_was_pulse = is_pulse;
        }
        Ok(state)
    }

    fn conjugated(&self, u: &Operator, dt: f64) -> Result<EngineState, EngineError> {
        let rho = u.mul(&self.rho)?.mul(&u.dagger())?;
        let next = EngineState {
            rho,
            sys: self.sys.clone(),
            elapsed: self.elapsed + dt,
            opts: self.opts,
        };
        next.check_integrity();
        Ok(next)
    }

    fn check_integrity(&self) {
        let herm = self.rho.hermiticity_deviation();
        assert!(
            herm <= STATE_DRIFT_TOL,
            "state lost Hermiticity (drift {herm:.3e})"
        );
        let tr = self.rho.trace().norm();
        assert!(
            tr <= STATE_DRIFT_TOL * self.rho.max_abs().max(1.0),
            "state gained trace ({tr:.3e})"
        );
    }
}

/// The ideal three-spin pseudo-pure deviation matrix diag(1,0,...,0,-1),
/// provided so later stages can be validated independently of the fidelity
/// of the preparation sequence.
pub fn rho_pp_exact() -> Operator {
    let mut m = Operator::zeros(8);
    m.set(0, 0, Complex64::new(1.0, 0.0));
    m.set(7, 7, Complex64::new(-1.0, 0.0));
    m
}

/// Divide out the positive scale a crusher-based preparation leaves behind
/// and check the result against the ideal pseudo-pure pattern. Returns the
/// normalized state and the scale removed.
pub fn normalize_pseudo_pure(rho: &Operator) -> Result<(Operator, f64), EngineError> {
    assert_eq!(rho.dim(), 8, "pseudo-pure normalization is three-spin only");
    let scale = (0..8).map(|i| rho.get(i, i).norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(EngineError::NotPseudoPure { deviation: 1.0 });
    }
    let normalized = rho.scale(1.0 / scale);
    let deviation = normalized.max_abs_diff(&rho_pp_exact());
    if deviation > PSEUDO_PURE_TOL {
        return Err(EngineError::NotPseudoPure { deviation });
    }
    Ok((normalized, scale))
}

/// Total wall time a sequence would take, without executing it. Matches the
/// `elapsed` of a run with the same options.
pub fn sequence_duration(
    seq: &Sequence,
    sys: &SpinSystem,
    opts: &RunOptions,
) -> Result<f64, EngineError> {
    validate(seq, sys)?;
    let mut total = 0.0;
    let mut prev_was_pulse = false;
    for el in &seq.elements {
        let is_pulse = matches!(el, SeqElement::Pulse(_));
        match el {
            SeqElement::Pulse(p) => {
                if prev_was_pulse {
                    total += opts.inter_pulse_gap_s;
                }
                total += p.duration_s();
            }
            SeqElement::Delay(Delay::CouplingFraction { pair, frac }) => {
                let hz = sys.coupling_hz(pair.0, pair.1).expect("validated above");
                total += frac / hz;
            }
            SeqElement::Delay(Delay::FixedTime { seconds }) => total += seconds,
            SeqElement::Gradient(_) => total += opts.crusher_time_s,
        }
        prev_was_pulse = is_pulse;
    }
    Ok(total)
}

/// Serialized form of a deviation matrix: row-major [re, im] pairs plus the
/// scale that was divided out before display.
#[derive(Debug, Serialize, Deserialize)]
pub struct MatrixDump {
    pub schema_version: String,
    pub dim: usize,
    pub scale: f64,
    pub matrix: Vec<Vec<[f64; 2]>>,
}

impl MatrixDump {
    pub fn new(rho: &Operator, scale: f64) -> MatrixDump {
        let dim = rho.dim();
        let matrix = (0..dim)
            .map(|r| {
                (0..dim)
                    .map(|c| {
                        let v = rho.get(r, c);
                        [v.re, v.im]
                    })
                    .collect()
            })
            .collect();
        MatrixDump {
            schema_version: "1".into(),
            dim,
            scale,
            matrix,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("matrix dump serialization cannot fail")
    }
}
