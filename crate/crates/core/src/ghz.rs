//! Experiment driver and independent oracles: the pure three-spin entangled
//! state, its deviation-matrix counterpart, the exhaustive deterministic
//! local-value enumeration, and timing accounting for the whole protocol.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_4;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::acquire::{
    acquire_fid, line_amplitude_oracle, phase_and_decode, spectrum, AcquireError, Multiplet,
    SpectralLine, Spectrum, DEFAULT_DWELL_S, DEFAULT_N_POINTS,
};
use crate::engine::{
    normalize_pseudo_pure, sequence_duration, EngineError, EngineState, RunOptions,
};
use crate::opkit::{expm_hermitian_generator, pauli, Axis, Operator, TransverseAxis};
use crate::seqlang::{measure, prepare_pp, rotate_ghz};
use crate::spinsys::SpinSystem;

/// Decoded line amplitudes must match the direct-trace oracle to this
/// relative tolerance (against the largest oracle magnitude).
pub const LINE_ORACLE_REL_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum GhzError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("setting {setting}: {source}")]
    Decode {
        setting: String,
        source: AcquireError,
    },
    #[error("setting {setting}: line signs do not encode a single product")]
    InconsistentLines { setting: String },
    #[error("timing needs the ({i},{j}) coupling, which the system does not define")]
    MissingCoupling { i: usize, j: usize },
}

/// Unit-norm amplitude vector on the 8-dimensional three-spin basis.
#[derive(Debug, Clone)]
pub struct StateVector {
    pub amps: Vec<Complex64>,
}

impl StateVector {
    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// The maximally entangled target state (|+++> - |--->)/sqrt(2).
pub fn ghz_state() -> StateVector {
    let r = 1.0 / 2.0f64.sqrt();
    let mut amps = vec![Complex64::new(0.0, 0.0); 8];
    amps[0] = Complex64::new(r, 0.0);
    amps[7] = Complex64::new(-r, 0.0);
    StateVector { amps }
}

/// Deviation-matrix counterpart of the entangled state: zeros everywhere
/// except the two corner coherences, both -1.
pub fn ghz_deviation_reference() -> Operator {
    let mut m = Operator::zeros(8);
    m.set(0, 7, Complex64::new(-1.0, 0.0));
    m.set(7, 0, Complex64::new(-1.0, 0.0));
    m
}

/// The one-shot unitary oracle for the entangling step,
/// exp(+i (pi/4) sx_1 sx_2 sy_3); conjugating the ideal pseudo-pure state
/// by it lands exactly on [`ghz_deviation_reference`].
pub fn ghz_rotation_oracle() -> Operator {
    let g = pauli(Axis::X, 1, 3)
        .unwrap()
        .mul(&pauli(Axis::X, 2, 3).unwrap())
        .unwrap()
        .mul(&pauli(Axis::Y, 3, 3).unwrap())
        .unwrap();
    expm_hermitian_generator(&g, -FRAC_PI_4).unwrap()
}

/// One transverse measurement axis per spin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MeasurementSetting {
    pub spin1: TransverseAxis,
    pub spin2: TransverseAxis,
    pub spin3: TransverseAxis,
}

impl MeasurementSetting {
    pub fn new(spin1: TransverseAxis, spin2: TransverseAxis, spin3: TransverseAxis) -> Self {
        MeasurementSetting {
            spin1,
            spin2,
            spin3,
        }
    }

    /// The four settings whose products no deterministic local assignment
    /// can jointly reproduce: xyy, yxy, yyx and xxx.
    pub fn standard_four() -> [MeasurementSetting; 4] {
        use TransverseAxis::{X, Y};
        [
            MeasurementSetting::new(X, Y, Y),
            MeasurementSetting::new(Y, X, Y),
            MeasurementSetting::new(Y, Y, X),
            MeasurementSetting::new(X, X, X),
        ]
    }

    pub fn axes(&self) -> [TransverseAxis; 3] {
        [self.spin1, self.spin2, self.spin3]
    }

    /// The product observable for this setting.
    pub fn operator(&self) -> Operator {
        pauli(self.spin1.axis(), 1, 3)
            .unwrap()
            .mul(&pauli(self.spin2.axis(), 2, 3).unwrap())
            .unwrap()
            .mul(&pauli(self.spin3.axis(), 3, 3).unwrap())
            .unwrap()
    }
}

impl fmt::Display for MeasurementSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}", self.spin1, self.spin2, self.spin3)
    }
}

impl FromStr for MeasurementSetting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let axes: Vec<char> = s.chars().collect();
        if axes.len() != 3 {
            return Err(format!("setting must be three axes like xyy, got {s:?}"));
        }
        let parse = |c: char| -> Result<TransverseAxis, String> { c.to_string().parse() };
        Ok(MeasurementSetting::new(
            parse(axes[0])?,
            parse(axes[1])?,
            parse(axes[2])?,
        ))
    }
}

/// Expectation of the product observable on a pure state.
pub fn state_expectation(psi: &StateVector, s: &MeasurementSetting) -> f64 {
    let op = s.operator();
    let applied = op.mul_vec(&psi.amps);
    psi.amps
        .iter()
        .zip(applied.iter())
        .map(|(a, b)| (a.conj() * b).re)
        .sum()
}

/// Expectation of the product observable on a deviation matrix, normalized
/// by the corner magnitude 2 so ideal states give exactly +-1.
pub fn deviation_expectation(rho: &Operator, s: &MeasurementSetting) -> f64 {
    rho.mul(&s.operator()).unwrap().trace().re / 2.0
}

/// One deterministic +-1 outcome per particle per transverse axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LhvAssignment {
    /// values[particle][axis], axis 0 = x, 1 = y.
    pub values: [[i8; 2]; 3],
}

impl LhvAssignment {
    pub fn from_index(idx: usize) -> LhvAssignment {
        assert!(idx < 64);
        let mut values = [[0i8; 2]; 3];
        for (p, particle) in values.iter_mut().enumerate() {
            for (a, value) in particle.iter_mut().enumerate() {
                let bit = (idx >> (p * 2 + a)) & 1;
                *value = if bit == 0 { 1 } else { -1 };
            }
        }
        LhvAssignment { values }
    }

    fn axis_index(axis: TransverseAxis) -> usize {
        match axis {
            TransverseAxis::X => 0,
            TransverseAxis::Y => 1,
        }
    }

    /// Product of the three predetermined outcomes under a setting.
    pub fn product(&self, s: &MeasurementSetting) -> i8 {
        let axes = s.axes();
        (0..3)
            .map(|p| self.values[p][Self::axis_index(axes[p])])
            .product()
    }
}

/// Everything the exhaustive enumeration establishes.
#[derive(Debug, Clone)]
pub struct LhvSummary {
    /// Distinct product 4-tuples over (xyy, yxy, yyx, xxx), sorted.
    pub achievable: Vec<[i8; 4]>,
    /// Largest number of the four quantum values (+1,+1,+1,-1) any single
    /// assignment reproduces.
    pub max_satisfied: usize,
    pub quantum_achievable: bool,
    /// Whether every assignment's four products multiply to +1 (they must:
    /// each particle's x and y values each enter exactly twice).
    pub parity_always_positive: bool,
}

/// All 64 assignments with their product 4-tuples, in index order.
pub fn lhv_table() -> Vec<(LhvAssignment, [i8; 4])> {
    let settings = MeasurementSetting::standard_four();
    (0..64)
        .map(|idx| {
            let a = LhvAssignment::from_index(idx);
            let mut prods = [0i8; 4];
            for (i, s) in settings.iter().enumerate() {
                prods[i] = a.product(s);
            }
            (a, prods)
        })
        .collect()
}

pub fn lhv_enumerate() -> LhvSummary {
    let quantum = [1i8, 1, 1, -1];
    let mut achievable = Vec::new();
    let mut max_satisfied = 0;
    let mut parity_always_positive = true;
    for (_, prods) in lhv_table() {
        if !achievable.contains(&prods) {
            achievable.push(prods);
        }
        let satisfied = prods
            .iter()
            .zip(quantum.iter())
            .filter(|(a, b)| a == b)
            .count();
        max_satisfied = max_satisfied.max(satisfied);
        let parity: i8 = prods.iter().product();
        if parity != 1 {
            parity_always_positive = false;
        }
    }
    achievable.sort();
    let quantum_achievable = achievable.contains(&quantum);
    LhvSummary {
        achievable,
        max_satisfied,
        quantum_achievable,
        parity_always_positive,
    }
}

/// Stage durations for the protocol, all in seconds.
#[derive(Debug, Clone, Copy)]
pub struct TimingReport {
    pub prep_s: f64,
    pub rotate_s: f64,
    pub measure_s: f64,
    pub total_s: f64,
    pub half_j12_s: f64,
    pub half_j23_s: f64,
    /// The point of the exercise: the readout block is over before the
    /// fastest coupling has had time to act.
    pub measure_faster_than_half_j12: bool,
}

pub fn timing_report(sys: &SpinSystem, opts: &RunOptions) -> Result<TimingReport, GhzError> {
    let j12 = sys
        .coupling_hz(1, 2)
        .filter(|j| *j != 0.0)
        .ok_or(GhzError::MissingCoupling { i: 1, j: 2 })?;
    let j23 = sys
        .coupling_hz(2, 3)
        .filter(|j| *j != 0.0)
        .ok_or(GhzError::MissingCoupling { i: 2, j: 3 })?;
    let prep_s = sequence_duration(&prepare_pp(), sys, opts)?;
    let rotate_s = sequence_duration(&rotate_ghz(), sys, opts)?;
    // All measurement blocks share one shape: two equal pulses.
    let meas = measure(TransverseAxis::X, TransverseAxis::Y, TransverseAxis::Y);
    let measure_s = sequence_duration(&meas, sys, opts)?;
    let half_j12_s = 0.5 / j12.abs();
    let half_j23_s = 0.5 / j23.abs();
    Ok(TimingReport {
        prep_s,
        rotate_s,
        measure_s,
        total_s: prep_s + rotate_s + measure_s,
        half_j12_s,
        half_j23_s,
        measure_faster_than_half_j12: measure_s < half_j12_s,
    })
}

/// Acquisition and timing knobs for a full run.
#[derive(Debug, Clone, Copy)]
pub struct ExperimentConfig {
    pub dwell_s: f64,
    pub n_points: usize,
    pub opts: RunOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dwell_s: DEFAULT_DWELL_S,
            n_points: DEFAULT_N_POINTS,
            opts: RunOptions::default(),
        }
    }
}

/// Results for one measurement setting.
#[derive(Debug, Clone)]
pub struct SettingOutcome {
    pub setting: MeasurementSetting,
    pub spectrum: Spectrum,
    pub multiplet: Multiplet,
    /// Common value of line sign times s1 s3 across the multiplet.
    pub product: i8,
    /// Direct expectation on the pre-readout state; ideally exactly +-1.
    pub oracle: f64,
    /// Whether product, per-line signs, and amplitudes all match the
    /// direct-trace oracles.
    pub agrees: bool,
}

#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub outcomes: Vec<SettingOutcome>,
    pub lhv: LhvSummary,
    pub timing: TimingReport,
    pub pass: bool,
}

/// Run the full protocol once per setting: fresh equilibrium, preparation,
/// normalization, entangling rotation, readout pulses, acquisition, and
/// spectral decoding, each cross-checked against the direct-trace oracle.
pub fn run_experiment(
    sys: &SpinSystem,
    settings: &[MeasurementSetting],
    cfg: &ExperimentConfig,
) -> Result<ExperimentRun, GhzError> {
    let mut outcomes = Vec::with_capacity(settings.len());
    for &setting in settings {
        let name = setting.to_string();
        let eq = EngineState::equilibrium(sys.clone(), cfg.opts);
        let prepared = eq.run(&prepare_pp())?;
        let (pp, _scale) = normalize_pseudo_pure(&prepared.rho)?;
        let entangled = EngineState::with_state(sys.clone(), pp, cfg.opts).run(&rotate_ghz())?;
        let oracle = deviation_expectation(&entangled.rho, &setting);
        let readout = entangled.run(&measure(setting.spin1, setting.spin2, setting.spin3))?;
        let fid = acquire_fid(&readout.rho, sys, cfg.dwell_s, cfg.n_points);
        let spec = spectrum(&fid);
        let multiplet =
            phase_and_decode(&spec, sys, setting.spin2).map_err(|source| GhzError::Decode {
                setting: name.clone(),
                source,
            })?;
        let product = multiplet
            .product()
            .ok_or(GhzError::InconsistentLines { setting: name })?;

        let line_oracles: Vec<f64> = multiplet
            .lines
            .iter()
            .map(|l| line_amplitude_oracle(&readout.rho, l.s1, l.s3, setting.spin2))
            .collect();
        let oracle_scale = line_oracles.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let mut agrees = (oracle - product as f64).abs() <= LINE_ORACLE_REL_TOL;
        for (l, o) in multiplet.lines.iter().zip(line_oracles.iter()) {
            agrees &= l.amp.signum() == o.signum();
            agrees &= (l.amp - o).abs() <= LINE_ORACLE_REL_TOL * oracle_scale;
            agrees &= (l.amp.signum() as i8) * l.s1 * l.s3 == product;
        }

        outcomes.push(SettingOutcome {
            setting,
            spectrum: spec,
            multiplet,
            product,
            oracle,
            agrees,
        });
    }
    let lhv = lhv_enumerate();
    let timing = timing_report(sys, &cfg.opts)?;
    let pass = outcomes.iter().all(|o| o.agrees)
        && lhv.parity_always_positive
        && !lhv.quantum_achievable
        && lhv.max_satisfied == 3
        && timing.measure_faster_than_half_j12;
    Ok(ExperimentRun {
        outcomes,
        lhv,
        timing,
        pass,
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SettingJson {
    pub axes: String,
    pub product: i8,
    pub oracle: f64,
    pub lines: Vec<SpectralLine>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LhvJson {
    pub max_satisfied: usize,
    pub quantum_achievable: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TimingJson {
    pub measure_ms: f64,
    pub half_j12_ms: f64,
    pub half_j23_ms: f64,
    pub prep_ms: f64,
    pub rotate_ms: f64,
    pub total_ms: f64,
    pub measure_faster_than_half_j12: bool,
}

impl From<&TimingReport> for TimingJson {
    fn from(t: &TimingReport) -> TimingJson {
        TimingJson {
            measure_ms: t.measure_s * 1e3,
            half_j12_ms: t.half_j12_s * 1e3,
            half_j23_ms: t.half_j23_s * 1e3,
            prep_ms: t.prep_s * 1e3,
            rotate_ms: t.rotate_s * 1e3,
            total_ms: t.total_s * 1e3,
            measure_faster_than_half_j12: t.measure_faster_than_half_j12,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ReportJson {
    pub schema_version: String,
    pub settings: Vec<SettingJson>,
    pub lhv: LhvJson,
    pub timing: TimingJson,
    pub pass: bool,
}

impl ExperimentRun {
    pub fn report(&self) -> ReportJson {
        ReportJson {
            schema_version: "1".into(),
            settings: self
                .outcomes
                .iter()
                .map(|o| SettingJson {
                    axes: o.setting.to_string(),
                    product: o.product,
                    oracle: o.oracle,
                    lines: o.multiplet.lines.clone(),
                })
                .collect(),
            lhv: LhvJson {
                max_satisfied: self.lhv.max_satisfied,
                quantum_achievable: self.lhv.quantum_achievable,
            },
            timing: TimingJson::from(&self.timing),
            pass: self.pass,
        }
    }

    pub fn report_json(&self) -> String {
        serde_json::to_string_pretty(&self.report()).expect("report serialization cannot fail")
    }
}
