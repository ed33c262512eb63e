//! Acceptance gate: nine end-to-end criteria covering the equilibrium
//! state, pseudo-pure preparation, the entangling rotation, correlation
//! oracles, spectral readout, the local-assignment bound, timing, and the
//! property suites. Each test prints one PASS or FAIL line.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ghzsim_core::acquire::{
    acquire_fid, line_amplitude_oracle, phase_and_decode, spectrum, Multiplet, DEFAULT_DWELL_S,
    DEFAULT_N_POINTS,
};
use ghzsim_core::engine::{normalize_pseudo_pure, rho_pp_exact, EngineState, RunOptions};
use ghzsim_core::ghz::{
    deviation_expectation, ghz_deviation_reference, ghz_rotation_oracle, ghz_state, lhv_table,
    state_expectation, timing_report, MeasurementSetting,
};
use ghzsim_core::opkit::{expm_hermitian_generator, pauli, Axis, Operator};
use ghzsim_core::seqlang::{
    self, measure, prepare_pp, rotate_ghz, Delay, Gradient, Pulse, SeqElement, Sequence,
};
use ghzsim_core::spinsys::{SpinSystem, SystemConfig};

fn alanine() -> SpinSystem {
    SystemConfig::alanine().build(false).unwrap()
}

fn gate(n: u32, desc: &str, failures: Vec<String>) {
    if failures.is_empty() {
        println!("PASS criterion {n}: {desc}");
    } else {
        println!("FAIL criterion {n}: {desc}");
        panic!("criterion {n} failed:\n  {}", failures.join("\n  "));
    }
}

fn check(failures: &mut Vec<String>, ok: bool, detail: impl FnOnce() -> String) {
    if !ok {
        failures.push(detail());
    }
}

#[test]
fn criterion_1_equilibrium_matrix() {
    let mut failures = Vec::new();
    let rho = alanine().equilibrium_deviation();
    let diag = [3.0, 1.0, 1.0, -1.0, 1.0, -1.0, -1.0, -3.0];
    for (r, &d) in diag.iter().enumerate() {
        for c in 0..8 {
            let expected = if r == c { d } else { 0.0 };
            let v = rho.get(r, c);
            check(
                &mut failures,
                (v - Complex64::new(expected, 0.0)).norm() <= 1e-12,
                || format!("entry ({r},{c}) = {v}, expected {expected}"),
            );
        }
    }
    gate(
        1,
        "equilibrium deviation matrix is diag(3,1,1,-1,1,-1,-1,-3) within 1e-12",
        failures,
    );
}

#[test]
fn criterion_2_pseudo_pure_preparation() {
    let mut failures = Vec::new();
    let prepared = EngineState::equilibrium(alanine(), RunOptions::default())
        .run(&prepare_pp())
        .unwrap();
    match normalize_pseudo_pure(&prepared.rho) {
        Ok((rho, scale)) => {
            check(&mut failures, scale > 0.0, || {
                format!("normalization scale {scale} is not positive")
            });
            let dev = rho.max_abs_diff(&rho_pp_exact());
            check(&mut failures, dev <= 1e-8, || {
                format!("off-pattern deviation {dev:.3e} exceeds 1e-8")
            });
        }
        Err(e) => failures.push(format!("normalization rejected the prepared state: {e}")),
    }
    gate(
        2,
        "preparation sequence reaches diag(1,0,...,0,-1) after positive-scale normalization (1e-8)",
        failures,
    );
}

#[test]
fn criterion_3_entangling_rotation_oracle() {
    let mut failures = Vec::new();
    let u = ghz_rotation_oracle();
    let rho = u.mul(&rho_pp_exact()).unwrap().mul(&u.dagger()).unwrap();
    let dev = rho.max_abs_diff(&ghz_deviation_reference());
    check(&mut failures, dev <= 1e-10, || {
        format!("deviation from corner-coherence matrix {dev:.3e} exceeds 1e-10")
    });
    gate(
        3,
        "unitary oracle maps the pseudo-pure state onto the corner-coherence matrix (1e-10)",
        failures,
    );
}

#[test]
fn criterion_4_correlation_oracles() {
    let mut failures = Vec::new();
    let reference = ghz_deviation_reference();
    let psi = ghz_state();
    let expected = [1.0, 1.0, 1.0, -1.0];
    for (s, e) in MeasurementSetting::standard_four().iter().zip(expected) {
        let dev = deviation_expectation(&reference, s);
        check(&mut failures, (dev - e).abs() <= 1e-10, || {
            format!("deviation expectation for {s} = {dev}, expected {e}")
        });
        let pure = state_expectation(&psi, s);
        check(&mut failures, (pure - e).abs() <= 1e-10, || {
            format!("pure-state expectation for {s} = {pure}, expected {e}")
        });
    }
    gate(
        4,
        "correlation oracles give +1,+1,+1,-1 for xyy,yxy,yyx,xxx (1e-10)",
        failures,
    );
}

/// One full pipeline pass composed from the public stage operations,
/// independent of the packaged driver.
struct SettingRun {
    setting: MeasurementSetting,
    multiplet: Multiplet,
    readout_rho: Operator,
    oracle: f64,
    resolution_hz: f64,
}

fn execute(setting: MeasurementSetting) -> SettingRun {
    let sys = alanine();
    let opts = RunOptions::default();
    let prepared = EngineState::equilibrium(sys.clone(), opts)
        .run(&prepare_pp())
        .unwrap();
    let (pp, _scale) = normalize_pseudo_pure(&prepared.rho).unwrap();
    let rotated = EngineState::with_state(sys.clone(), pp, opts)
        .run(&rotate_ghz())
        .unwrap();
    let oracle = deviation_expectation(&rotated.rho, &setting);
    let readout = rotated
        .run(&measure(setting.spin1, setting.spin2, setting.spin3))
        .unwrap();
    let fid = acquire_fid(&readout.rho, &sys, DEFAULT_DWELL_S, DEFAULT_N_POINTS);
    let spec = spectrum(&fid);
    let multiplet = phase_and_decode(&spec, &sys, setting.spin2).unwrap();
    SettingRun {
        setting,
        multiplet,
        readout_rho: readout.rho,
        oracle,
        resolution_hz: spec.resolution_hz(),
    }
}

#[test]
fn criterion_5_spectrum_reproduction() {
    let mut failures = Vec::new();
    let runs: Vec<SettingRun> = MeasurementSetting::standard_four()
        .into_iter()
        .map(execute)
        .collect();

    let centers = [-44.35, -9.05, 9.05, 44.35];
    for run in &runs {
        for (line, center) in run.multiplet.lines.iter().zip(centers) {
            check(
                &mut failures,
                (line.freq_hz - center).abs() <= run.resolution_hz,
                || {
                    format!(
                        "{}: line at {} Hz, expected {center} Hz within one bin ({} Hz)",
                        run.setting, line.freq_hz, run.resolution_hz
                    )
                },
            );
        }
    }
    let expected_signs = [
        [1.0, -1.0, -1.0, 1.0],
        [1.0, -1.0, -1.0, 1.0],
        [1.0, -1.0, -1.0, 1.0],
        [-1.0, 1.0, 1.0, -1.0],
    ];
    for (run, signs) in runs.iter().zip(expected_signs) {
        let got: Vec<f64> = run.multiplet.lines.iter().map(|l| l.amp.signum()).collect();
        check(&mut failures, got == signs.to_vec(), || {
            format!("{}: line signs {got:?}, expected {signs:?}", run.setting)
        });
    }
    let products: Vec<Option<i8>> = runs.iter().map(|r| r.multiplet.product()).collect();
    check(
        &mut failures,
        products == vec![Some(1), Some(1), Some(1), Some(-1)],
        || format!("decoded products {products:?}, expected +1,+1,+1,-1"),
    );
    gate(
        5,
        "end-to-end multiplets sit at -44.35/-9.05/+9.05/+44.35 Hz with signs (+,-,-,+)x3 and (-,+,+,-), products +1,+1,+1,-1",
        failures,
    );
}

#[test]
fn criterion_6_decode_matches_direct_trace_oracle() {
    let mut failures = Vec::new();
    for setting in MeasurementSetting::standard_four() {
        let run = execute(setting);
        let oracles: Vec<f64> = run
            .multiplet
            .lines
            .iter()
            .map(|l| line_amplitude_oracle(&run.readout_rho, l.s1, l.s3, setting.spin2))
            .collect();
        let scale = oracles.iter().map(|v| v.abs()).fold(0.0, f64::max);
        check(&mut failures, scale > 0.0, || {
            format!("{setting}: direct-trace oracle is silent")
        });
        for (line, oracle) in run.multiplet.lines.iter().zip(oracles.iter()) {
            check(&mut failures, line.amp.signum() == oracle.signum(), || {
                format!(
                    "{setting}: line ({},{}) decoded sign {} vs oracle sign {}",
                    line.s1,
                    line.s3,
                    line.amp.signum(),
                    oracle.signum()
                )
            });
            check(
                &mut failures,
                (line.amp - oracle).abs() <= 1e-6 * scale,
                || {
                    format!(
                        "{setting}: line ({},{}) amp {} vs oracle {} beyond 1e-6 relative",
                        line.s1, line.s3, line.amp, oracle
                    )
                },
            );
        }
        check(
            &mut failures,
            (run.oracle - run.multiplet.product().unwrap_or(0) as f64).abs() <= 1e-6,
            || {
                format!(
                    "{setting}: decoded product {:?} vs expectation {}",
                    run.multiplet.product(),
                    run.oracle
                )
            },
        );
    }
    gate(
        6,
        "every decoded line agrees with the direct-trace oracle in sign and to 1e-6 relative in amplitude",
        failures,
    );
}

#[test]
fn criterion_7_no_local_assignment_matches() {
    let mut failures = Vec::new();
    let quantum = [1i8, 1, 1, -1];
    let table = lhv_table();
    check(&mut failures, table.len() == 64, || {
        format!(
            "enumeration covered {} assignments, expected 64",
            table.len()
        )
    });
    let mut max_satisfied = 0usize;
    for (assignment, prods) in &table {
        let parity: i8 = prods.iter().product();
        check(&mut failures, parity == 1, || {
            format!("assignment {assignment:?} has four-product parity {parity}")
        });
        let satisfied = prods
            .iter()
            .zip(quantum.iter())
            .filter(|(a, b)| a == b)
            .count();
        max_satisfied = max_satisfied.max(satisfied);
        check(&mut failures, *prods != quantum, || {
            format!("assignment {assignment:?} reproduces the quantum pattern")
        });
    }
    check(&mut failures, max_satisfied == 3, || {
        format!("max simultaneously satisfied products {max_satisfied}, expected 3")
    });
    gate(
        7,
        "no deterministic local assignment yields +1,+1,+1,-1; parity is always +1; best is 3 of 4",
        failures,
    );
}

#[test]
fn criterion_8_readout_beats_the_coupling_clock() {
    let mut failures = Vec::new();
    let opts = RunOptions {
        inter_pulse_gap_s: 43e-6,
        ..RunOptions::default()
    };
    let timing = timing_report(&alanine(), &opts).unwrap();
    check(
        &mut failures,
        (timing.half_j12_s - 9.363e-3).abs() <= 0.01e-3,
        || format!("1/(2 J12) = {} s, expected 9.363 ms", timing.half_j12_s),
    );
    check(
        &mut failures,
        (timing.measure_s - 4.043e-3).abs() <= 1e-9,
        || format!("readout duration {} s, expected 4.043 ms", timing.measure_s),
    );
    check(
        &mut failures,
        timing.measure_s < timing.half_j12_s && timing.measure_faster_than_half_j12,
        || "readout is not faster than 1/(2 J12)".to_string(),
    );
    gate(
        8,
        "readout block (4.043 ms with 43 us gaps) finishes inside 1/(2 J12) = 9.363 ms",
        failures,
    );
}

fn random_traceless_hermitian(rng: &mut ChaCha8Rng) -> Operator {
    let raw = Operator::from_fn(8, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let sym = raw.add(&raw.dagger()).unwrap().scale(0.5);
    let shift = Operator::identity(8).scale(sym.trace() / 8.0);
    sym.sub(&shift).unwrap()
}

fn sorted_eigenvalues(m: &Operator) -> Vec<f64> {
    m.eigh().unwrap().0
}

fn fuzz_sequence(rng: &mut ChaCha8Rng) -> Sequence {
    let name = if rng.gen_bool(0.5) {
        let len = rng.gen_range(1..10);
        let mut s = String::new();
        s.push(rng.gen_range(b'a'..=b'z') as char);
        for _ in 1..len {
            let c = match rng.gen_range(0..3) {
                0 => rng.gen_range(b'a'..=b'z') as char,
                1 => rng.gen_range(b'0'..=b'9') as char,
                _ => '_',
            };
            s.push(c);
        }
        s
    } else {
        String::new()
    };
    let n_elements = rng.gen_range(0..10);
    let elements = (0..n_elements)
        .map(|_| match rng.gen_range(0..4) {
            0 => {
                let mut spins: Vec<usize> = (1..=4).filter(|_| rng.gen_bool(0.5)).collect();
                if spins.is_empty() {
                    spins.push(rng.gen_range(1..=4));
                }
                SeqElement::Pulse(Pulse {
                    // (0, 360] and (-180, 180]: flip the half-open ends of
                    // the generator ranges.
                    angle_deg: 360.0 - rng.gen_range(0.0..360.0),
                    phase_deg: -rng.gen_range(-180.0..180.0),
                    spins,
                    len_ms: rng.gen_range(0.0..6.0),
                })
            }
            1 => {
                let i = rng.gen_range(1..=3);
                let j = rng.gen_range(i + 1..=4);
                SeqElement::Delay(Delay::CouplingFraction {
                    pair: (i, j),
                    frac: 2.0 - rng.gen_range(0.0..2.0),
                })
            }
            2 => SeqElement::Delay(Delay::FixedTime {
                seconds: 1.0 - rng.gen_range(0.0..1.0),
            }),
            _ => SeqElement::Gradient(Gradient {
                axis: [Axis::X, Axis::Y, Axis::Z][rng.gen_range(0..3)],
            }),
        })
        .collect();
    Sequence { name, elements }
}

#[test]
fn criterion_9_property_suites() {
    let mut failures = Vec::new();

    // Gradient crusher equals the 64-point rotation average and is
    // idempotent.
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_acce);
    let fz = pauli(Axis::Z, 1, 3)
        .unwrap()
        .add(&pauli(Axis::Z, 2, 3).unwrap())
        .unwrap()
        .add(&pauli(Axis::Z, 3, 3).unwrap())
        .unwrap()
        .scale(0.5);
    let sys = alanine();
    let g = Gradient { axis: Axis::Z };
    for trial in 0..3 {
        let rho = random_traceless_hermitian(&mut rng);
        let state = EngineState::with_state(sys.clone(), rho.clone(), RunOptions::default());
        let crushed = state.apply_gradient(&g).rho;
        let k = 64;
        let mut avg = Operator::zeros(8);
        for m in 0..k {
            let theta = 2.0 * std::f64::consts::PI * m as f64 / k as f64;
            let u = expm_hermitian_generator(&fz, theta).unwrap();
            avg = avg
                .add(&u.mul(&rho).unwrap().mul(&u.dagger()).unwrap())
                .unwrap();
        }
        avg = avg.scale(1.0 / k as f64);
        let dev = crushed.max_abs_diff(&avg);
        check(&mut failures, dev <= 1e-10, || {
            format!("trial {trial}: crusher deviates from rotation average by {dev:.3e}")
        });
        let twice = EngineState::with_state(sys.clone(), crushed.clone(), RunOptions::default())
            .apply_gradient(&g)
            .rho;
        check(&mut failures, twice.max_abs_diff(&crushed) == 0.0, || {
            format!("trial {trial}: crusher is not idempotent")
        });
    }

    // Pulses and delays preserve eigenvalue spectra.
    let mut state = EngineState::equilibrium(sys.clone(), RunOptions::default());
    let reference = sorted_eigenvalues(&state.rho);
    for (idx, el) in prepare_pp().elements.iter().enumerate() {
        match el {
            SeqElement::Pulse(p) => state = state.apply_pulse(p).unwrap(),
            SeqElement::Delay(d) => state = state.apply_delay(d).unwrap(),
            SeqElement::Gradient(_) => continue,
        }
        let now = sorted_eigenvalues(&state.rho);
        let worst = reference
            .iter()
            .zip(now.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        check(&mut failures, worst <= 1e-9, || {
            format!("eigenvalues drifted {worst:.3e} after element {idx}")
        });
    }

    // Parseval: FFT energy equals FID energy, for the real acquisition and
    // for random signals.
    let run = execute(MeasurementSetting::standard_four()[0]);
    let mut fids = vec![acquire_fid(
        &run.readout_rho,
        &sys,
        DEFAULT_DWELL_S,
        DEFAULT_N_POINTS,
    )];
    for _ in 0..2 {
        let n = rng.gen_range(100..1000);
        let samples: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        fids.push(ghzsim_core::acquire::Fid {
            dwell: 1e-3,
            samples,
        });
    }
    for (idx, fid) in fids.iter().enumerate() {
        let spec = spectrum(fid);
        let freq_energy: f64 = spec.amps.iter().map(|a| a.norm_sqr()).sum();
        let time_energy: f64 =
            fid.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / fid.samples.len() as f64;
        let diff = (freq_energy - time_energy).abs();
        check(&mut failures, diff <= 1e-9 * time_energy.max(1.0), || {
            format!("fid {idx}: energy mismatch {diff:.3e}")
        });
    }

    // Text round trip is exact over ten thousand fuzzed sequences.
    for case in 0..10_000 {
        let seq = fuzz_sequence(&mut rng);
        let text = seqlang::format(&seq);
        match seqlang::parse(&text) {
            Ok(parsed) => check(&mut failures, parsed == seq, || {
                format!("case {case}: round trip changed the sequence\n{text}")
            }),
            Err(e) => failures.push(format!("case {case}: canonical text rejected: {e}\n{text}")),
        }
        if failures.len() > 5 {
            break;
        }
    }

    gate(
        9,
        "crusher average/idempotence, eigenvalue preservation, Parseval, and 10^4-case parse/format round trip",
        failures,
    );
}
