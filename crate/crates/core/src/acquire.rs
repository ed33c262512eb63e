//! Signal acquisition and spectral decoding.
//!
//! The induction signal is s(t) = tr[rho(t) sum_j (sx_j + i sy_j)], sampled
//! on a uniform dwell grid while the state evolves freely. Its discrete
//! Fourier transform, phased along the chosen transverse axis, yields the
//! four-line multiplet of spin 2 whose line signs encode the conditional
//! spin-2 polarization for each (s1, s3) state of the outer spins.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::opkit::{pauli, Axis, Operator, TransverseAxis};
use crate::spinsys::SpinSystem;

/// Default sampling interval, seconds.
pub const DEFAULT_DWELL_S: f64 = 1e-3;

/// Default number of FID points. With the default dwell this gives a 0.05 Hz
/// grid on which the alanine line positions (multiples of 0.05 Hz) fall
/// exactly, so window sums capture full line amplitudes instead of leaking
/// into sign-alternating sidelobes.
pub const DEFAULT_N_POINTS: usize = 20000;

/// Half-width of the integration window around each expected line, Hz.
pub const LINE_WINDOW_HZ: f64 = 2.0;

/// A line is rejected when its magnitude falls below this fraction of the
/// strongest line in the multiplet.
pub const LINE_THRESHOLD_REL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum AcquireError {
    #[error(
        "frequency resolution {resolution_hz:.4} Hz too coarse to resolve the multiplet \
         (needs < {limit_hz:.4} Hz)"
    )]
    UnresolvedLines { resolution_hz: f64, limit_hz: f64 },
    #[error("decoding needs the ({i},{j}) coupling, which the system does not define")]
    MissingCoupling { i: usize, j: usize },
    #[error("no signal in any multiplet window")]
    NoSignal,
    #[error("line (s1={s1}, s3={s3}) amplitude {amp:.3e} below threshold {threshold:.3e}")]
    WeakLine {
        s1: i8,
        s3: i8,
        amp: f64,
        threshold: f64,
    },
}

/// Complex free-induction signal on a uniform time grid.
#[derive(Debug, Clone)]
pub struct Fid {
    pub dwell: f64,
    pub samples: Vec<Complex64>,
}

impl Fid {
    pub fn n_points(&self) -> usize {
        self.samples.len()
    }
}

/// Sample the induction signal of a state evolving under the system
/// Hamiltonian. The Hamiltonian here is always diagonal (offsets and zz
/// couplings), so each contributing element rotates at a fixed frequency;
/// the signal is the sum of those rotating terms.
pub fn acquire_fid(rho: &Operator, sys: &SpinSystem, dwell: f64, n_points: usize) -> Fid {
    assert_eq!(rho.dim(), sys.dim(), "state dimension must match system");
    assert!(dwell > 0.0, "dwell must be positive");
    assert!(n_points >= 2, "need at least two samples");
    let h = sys.hamiltonian();
    let dim = sys.dim();
    for r in 0..dim {
        for c in 0..dim {
            if r != c {
                assert_eq!(
                    h.get(r, c).norm(),
                    0.0,
                    "acquisition assumes a diagonal Hamiltonian"
                );
            }
        }
    }
    let energies: Vec<f64> = (0..dim).map(|i| h.get(i, i).re).collect();

    // Detection operator sum_j (sx_j + i sy_j): picks up each element
    // <a|rho|b> where a has exactly one more down spin than b, weight 2.
    let n = sys.n_spins();
    let mut terms: Vec<(Complex64, f64)> = Vec::new();
    for j in 1..=n {
        let mask = 1usize << (n - j);
        for b in 0..dim {
            if b & mask != 0 {
                continue;
            }
            let a = b | mask;
            let w = rho.get(a, b) * 2.0;
            if w.norm() > 0.0 {
                terms.push((w, energies[a] - energies[b]));
            }
        }
    }

    let samples = (0..n_points)
        .map(|m| {
            let t = m as f64 * dwell;
            terms
                .iter()
                .map(|&(w, omega)| w * Complex64::from_polar(1.0, -omega * t))
                .sum()
        })
        .collect();
    Fid { dwell, samples }
}

/// Frequency-domain spectrum, bins in strictly ascending frequency.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub freqs: Vec<f64>,
    pub amps: Vec<Complex64>,
}

impl Spectrum {
    pub fn resolution_hz(&self) -> f64 {
        self.freqs[1] - self.freqs[0]
    }
}

/// Discrete Fourier transform with 1/N normalization, bins folded to the
/// interval (-1/(2 dwell), +1/(2 dwell)] and reordered ascending.
pub fn spectrum(fid: &Fid) -> Spectrum {
    let n = fid.n_points();
    let mut buf = fid.samples.clone();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    let df = 1.0 / (n as f64 * fid.dwell);
    // Raw bin j sits at j*df; bins past n/2 alias to negative frequencies.
    let split = n / 2 + 1;
    let mut freqs = Vec::with_capacity(n);
    let mut amps = Vec::with_capacity(n);
    for k in (split..n).chain(0..split) {
        let f = if k < split {
            k as f64 * df
        } else {
            (k as f64 - n as f64) * df
        };
        freqs.push(f);
        amps.push(buf[k] * scale);
    }
    Spectrum { freqs, amps }
}

/// CSV rendering: `freq_hz,re,im` header, one bin per row, 12 significant
/// digits, byte-deterministic.
pub fn spectrum_csv(spec: &Spectrum) -> String {
    let mut out = String::with_capacity(spec.freqs.len() * 48 + 16);
    out.push_str("freq_hz,re,im\n");
    for (f, a) in spec.freqs.iter().zip(spec.amps.iter()) {
        out.push_str(&format!("{:.11e},{:.11e},{:.11e}\n", f, a.re, a.im));
    }
    out
}

/// One decoded multiplet line: position, signed absorptive amplitude, and
/// the z-states of spins 1 and 3 it is conditioned on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralLine {
    pub freq_hz: f64,
    pub amp: f64,
    pub s1: i8,
    pub s3: i8,
}

/// The four-line doublet-of-doublets of spin 2, lines in ascending
/// frequency.
#[derive(Debug, Clone)]
pub struct Multiplet {
    pub center_spin: usize,
    pub lines: Vec<SpectralLine>,
}

impl Multiplet {
    /// The common value of sign(amp) * s1 * s3 across the four lines, if it
    /// is in fact common; this is the decoded three-spin correlation.
    pub fn product(&self) -> Option<i8> {
        let mut vals = self.lines.iter().map(|l| {
            if l.amp > 0.0 {
                l.s1 * l.s3
            } else {
                -l.s1 * l.s3
            }
        });
        let first = vals.next()?;
        vals.all(|v| v == first).then_some(first)
    }
}

/// Decode the spin-2 multiplet: phase the spectrum along axis `k` (0 degrees
/// for x, -90 for y), integrate a window around each expected line position
/// nu2 + s1 J12/2 + s3 J23/2, and report the real parts as signed
/// amplitudes.
///
/// With both couplings positive and J12 > J23 this maps line positions to
/// (s1, s3) states uniquely; ascending frequency runs (-1,-1), (-1,+1),
/// (+1,-1), (+1,+1).
pub fn phase_and_decode(
    spec: &Spectrum,
    sys: &SpinSystem,
    k: TransverseAxis,
) -> Result<Multiplet, AcquireError> {
    let j12 = sys
        .coupling_hz(1, 2)
        .ok_or(AcquireError::MissingCoupling { i: 1, j: 2 })?;
    let j23 = sys
        .coupling_hz(2, 3)
        .ok_or(AcquireError::MissingCoupling { i: 2, j: 3 })?;
    let resolution = spec.resolution_hz();
    let limit = (j23.abs().min((j12 - j23).abs())) / 4.0;
    if resolution >= limit {
        return Err(AcquireError::UnresolvedLines {
            resolution_hz: resolution,
            limit_hz: limit,
        });
    }
    let nu2 = sys.offsets_hz()[1];
    let phase = match k {
        TransverseAxis::X => Complex64::new(1.0, 0.0),
        TransverseAxis::Y => Complex64::new(0.0, -1.0),
    };

    let mut lines = Vec::with_capacity(4);
    for s1 in [-1i8, 1] {
        for s3 in [-1i8, 1] {
            let center = nu2 + s1 as f64 * j12 / 2.0 + s3 as f64 * j23 / 2.0;
            let mut integral = Complex64::new(0.0, 0.0);
            let mut peak_freq = center;
            let mut peak_mag = -1.0;
            for (f, a) in spec.freqs.iter().zip(spec.amps.iter()) {
                if (f - center).abs() <= LINE_WINDOW_HZ {
                    integral += a * phase;
                    if a.norm() > peak_mag {
                        peak_mag = a.norm();
                        peak_freq = *f;
                    }
                }
            }
            lines.push((peak_freq, integral, s1, s3));
        }
    }
    lines.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    // Judge line strength against the full complex window content, so a
    // wrongly phased multiplet (energy in the rejected quadrature) fails
    // loudly instead of decoding to noise.
    let scale = lines.iter().map(|l| l.1.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(AcquireError::NoSignal);
    }
    let threshold = LINE_THRESHOLD_REL * scale;
    for &(_, integral, s1, s3) in &lines {
        if integral.re.abs() < threshold {
            return Err(AcquireError::WeakLine {
                s1,
                s3,
                amp: integral.re,
                threshold,
            });
        }
    }
    Ok(Multiplet {
        center_spin: 2,
        lines: lines
            .into_iter()
            .map(|(freq_hz, integral, s1, s3)| SpectralLine {
                freq_hz,
                amp: integral.re,
                s1,
                s3,
            })
            .collect(),
    })
}

/// Independent cross-check of the FID path: the spin-2 polarization along
/// `k` conditional on spins 1 and 3 being in z-states s1 and s3, read
/// directly from the density matrix as tr(rho P_s1 k_2 P_s3).
pub fn line_amplitude_oracle(rho: &Operator, s1: i8, s3: i8, k: TransverseAxis) -> f64 {
    let n = 3;
    let proj = |spin: usize, s: i8| {
        let sz = pauli(Axis::Z, spin, n).unwrap();
        Operator::identity(8)
            .add(&sz.scale(s as f64))
            .unwrap()
            .scale(0.5)
    };
    let obs = proj(1, s1)
        .mul(&pauli(k.axis(), 2, n).unwrap())
        .unwrap()
        .mul(&proj(3, s3))
        .unwrap();
    rho.mul(&obs).unwrap().trace().re
}

/// Serializable multiplet record.
#[derive(Debug, Serialize, Deserialize)]
pub struct MultipletJson {
    pub schema_version: String,
    pub setting: String,
    pub lines: Vec<SpectralLine>,
    pub product: i8,
}

impl MultipletJson {
    pub fn new(setting: &str, m: &Multiplet, product: i8) -> MultipletJson {
        MultipletJson {
            schema_version: "1".into(),
            setting: setting.to_string(),
            lines: m.lines.clone(),
            product,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("multiplet serialization cannot fail")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spinsys::{SpinConfig, SystemConfig};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn single_spin(offset_hz: f64) -> SpinSystem {
        SystemConfig {
            spins: vec![SpinConfig {
                label: "A".into(),
                offset_hz,
            }],
            couplings: vec![],
        }
        .build(false)
        .unwrap()
    }

    fn alanine() -> SpinSystem {
        SystemConfig::alanine().build(false).unwrap()
    }

    #[test]
    fn transverse_state_on_resonance_gives_constant_signal() {
        let sys = single_spin(0.0);
        let rho = pauli(Axis::X, 1, 1).unwrap();
        let fid = acquire_fid(&rho, &sys, 1e-3, 16);
        for s in &fid.samples {
            assert!((s - c(2.0, 0.0)).norm() <= 1e-12);
        }
    }

    #[test]
    fn longitudinal_state_is_silent() {
        let sys = alanine();
        let rho = sys.equilibrium_deviation();
        let fid = acquire_fid(&rho, &sys, 1e-3, 8);
        for s in &fid.samples {
            assert_eq!(s.norm(), 0.0);
        }
    }

    #[test]
    fn offset_appears_as_a_positive_frequency_tone() {
        let nu = 8.0;
        let sys = single_spin(nu);
        let rho = pauli(Axis::X, 1, 1).unwrap();
        let fid = acquire_fid(&rho, &sys, 1e-3, 1000);
        for (m, s) in fid.samples.iter().enumerate() {
            let t = m as f64 * 1e-3;
            let expect = c(2.0, 0.0) * Complex64::from_polar(1.0, 2.0 * PI * nu * t);
            assert!((s - expect).norm() <= 1e-12);
        }
        let spec = spectrum(&fid);
        let (peak_idx, _) = spec
            .amps
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().partial_cmp(&b.1.norm()).unwrap())
            .unwrap();
        assert_eq!(spec.freqs[peak_idx], nu);
        assert!((spec.amps[peak_idx] - c(2.0, 0.0)).norm() <= 1e-9);
    }

    #[test]
    fn dc_fid_transforms_to_a_single_zero_bin() {
        let fid = Fid {
            dwell: 1e-3,
            samples: vec![c(3.0, 1.0); 64],
        };
        let spec = spectrum(&fid);
        for (f, a) in spec.freqs.iter().zip(spec.amps.iter()) {
            if *f == 0.0 {
                assert!((a - c(3.0, 1.0)).norm() <= 1e-12);
            } else {
                assert!(a.norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn spectrum_axis_is_ascending_and_folded() {
        let fid = Fid {
            dwell: 0.01,
            samples: vec![c(0.0, 0.0); 100],
        };
        let spec = spectrum(&fid);
        assert_eq!(spec.freqs.len(), 100);
        assert!((spec.freqs[0] - (-49.0)).abs() <= 1e-12);
        assert!((spec.freqs[99] - 50.0).abs() <= 1e-12);
        assert!(spec.freqs.windows(2).all(|w| w[1] > w[0]));
        assert!((spec.resolution_hz() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn two_tones_recover_their_amplitudes() {
        let (f1, f2) = (5.0, -12.0);
        let dwell = 0.01;
        let n = 100;
        let samples: Vec<Complex64> = (0..n)
            .map(|m| {
                let t = m as f64 * dwell;
                Complex64::from_polar(1.0, 2.0 * PI * f1 * t)
                    + Complex64::from_polar(0.5, 2.0 * PI * f2 * t)
            })
            .collect();
        let spec = spectrum(&Fid { dwell, samples });
        for (f, a) in spec.freqs.iter().zip(spec.amps.iter()) {
            let expect = if (f - f1).abs() < 1e-9 {
                c(1.0, 0.0)
            } else if (f - f2).abs() < 1e-9 {
                c(0.5, 0.0)
            } else {
                c(0.0, 0.0)
            };
            assert!((a - expect).norm() <= 1e-9);
        }
    }

    #[test]
    fn parseval_energy_balance() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0020);
        let samples: Vec<Complex64> = (0..777)
            .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let fid = Fid {
            dwell: 2e-3,
            samples,
        };
        let time_energy: f64 =
            fid.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / fid.n_points() as f64;
        let spec = spectrum(&fid);
        let freq_energy: f64 = spec.amps.iter().map(|a| a.norm_sqr()).sum();
        assert!((time_energy - freq_energy).abs() <= 1e-9 * time_energy.max(1.0));
    }

    /// A state carrying only the observable correlation term decodes into
    /// line amplitudes s1*s3 that match the direct-trace oracle exactly.
    #[test]
    fn decode_recovers_conditional_polarizations() {
        let sys = alanine();
        let rho = pauli(Axis::Z, 1, 3)
            .unwrap()
            .mul(&pauli(Axis::Y, 2, 3).unwrap())
            .unwrap()
            .mul(&pauli(Axis::Z, 3, 3).unwrap())
            .unwrap()
            .scale(0.5);
        let fid = acquire_fid(&rho, &sys, DEFAULT_DWELL_S, DEFAULT_N_POINTS);
        let spec = spectrum(&fid);
        let m = phase_and_decode(&spec, &sys, TransverseAxis::Y).unwrap();
        assert_eq!(m.lines.len(), 4);
        let expected_centers = [-44.35, -9.05, 9.05, 44.35];
        let expected_states = [(-1, -1), (-1, 1), (1, -1), (1, 1)];
        for (i, l) in m.lines.iter().enumerate() {
            assert!((l.freq_hz - expected_centers[i]).abs() <= spec.resolution_hz() / 2.0);
            assert_eq!((l.s1, l.s3), expected_states[i]);
            let expect = (l.s1 * l.s3) as f64;
            assert!((l.amp - expect).abs() <= 1e-9, "line {i}: {}", l.amp);
            let oracle = line_amplitude_oracle(&rho, l.s1, l.s3, TransverseAxis::Y);
            assert!((l.amp - oracle).abs() <= 1e-9);
        }
        assert_eq!(m.product(), Some(1));
    }

    #[test]
    fn phasing_selects_the_matching_axis() {
        let sys = alanine();
        let rho = pauli(Axis::Z, 1, 3)
            .unwrap()
            .mul(&pauli(Axis::X, 2, 3).unwrap())
            .unwrap()
            .mul(&pauli(Axis::Z, 3, 3).unwrap())
            .unwrap()
            .scale(0.5);
        let fid = acquire_fid(&rho, &sys, DEFAULT_DWELL_S, DEFAULT_N_POINTS);
        let spec = spectrum(&fid);
        let m = phase_and_decode(&spec, &sys, TransverseAxis::X).unwrap();
        for l in &m.lines {
            assert!((l.amp - (l.s1 * l.s3) as f64).abs() <= 1e-9);
        }
        // Phased 90 degrees off, every line is dispersive: no absorptive
        // signal survives.
        match phase_and_decode(&spec, &sys, TransverseAxis::Y) {
            Err(AcquireError::WeakLine { .. }) | Err(AcquireError::NoSignal) => {}
            other => panic!("expected threshold failure, got {other:?}"),
        }
    }

    #[test]
    fn oracle_on_plain_transverse_spin2() {
        let rho = pauli(Axis::X, 2, 3).unwrap();
        for s1 in [-1, 1] {
            for s3 in [-1, 1] {
                let v = line_amplitude_oracle(&rho, s1, s3, TransverseAxis::X);
                assert!((v - 2.0).abs() <= 1e-12);
                let v = line_amplitude_oracle(&rho, s1, s3, TransverseAxis::Y);
                assert!(v.abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn coarse_grids_are_rejected() {
        let sys = alanine();
        let fid = Fid {
            dwell: 1e-3,
            samples: vec![c(1.0, 0.0); 64],
        };
        let spec = spectrum(&fid);
        assert!(matches!(
            phase_and_decode(&spec, &sys, TransverseAxis::X),
            Err(AcquireError::UnresolvedLines { .. })
        ));
    }

    #[test]
    fn multiplet_json_shape() {
        let m = Multiplet {
            center_spin: 2,
            lines: vec![
                SpectralLine {
                    freq_hz: -44.35,
                    amp: 1.0,
                    s1: -1,
                    s3: -1,
                },
                SpectralLine {
                    freq_hz: 44.35,
                    amp: 1.0,
                    s1: 1,
                    s3: 1,
                },
            ],
        };
        let j = MultipletJson::new("xyy", &m, 1);
        let text = j.to_json();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["schema_version"], "1");
        assert_eq!(v["setting"], "xyy");
        assert_eq!(v["product"], 1);
        assert_eq!(v["lines"][0]["s1"], -1);
        assert_eq!(v["lines"][1]["freq_hz"], 44.35);
    }
}
