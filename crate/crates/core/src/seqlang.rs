//! A small text language for pulse programs and the built-in sequences used
//! by the experiment driver.
//!
//! Grammar, one statement per line (or several joined by ";"):
//!
//! ```text
//! pulse angle=90 phase=-90 spins=1 len=2
//! delay J=1,2 frac=0.25
//! delay t=0.005
//! grad axis=z
//! # comment
//! ```
//!
//! `angle` and `phase` are degrees, `len` is milliseconds, `t` is seconds,
//! and `frac` is the dimensionless fraction f of a coupling evolution, giving
//! a delay of f/J seconds. A first-line comment of the form `# name: text`
//! names the sequence. Unknown or duplicate keys are errors; `format` emits
//! canonical text that parses back to the identical IR.

use std::fmt;

use thiserror::Error;

use crate::opkit::{Axis, TransverseAxis, MAX_SPINS};
use crate::spinsys::SpinSystem;

/// Pulse length assumed when a statement omits `len`.
pub const DEFAULT_PULSE_LEN_MS: f64 = 2.0;

/// An rf pulse rotating the target spins by `angle_deg` about the in-plane
/// axis at `phase_deg` from x. Angles are kept in degrees so parsed text
/// round-trips exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Pulse {
    pub angle_deg: f64,
    pub phase_deg: f64,
    pub spins: Vec<usize>,
    pub len_ms: f64,
}

impl Pulse {
    pub fn angle_rad(&self) -> f64 {
        self.angle_deg.to_radians()
    }

    pub fn phase_rad(&self) -> f64 {
        self.phase_deg.to_radians()
    }

    pub fn duration_s(&self) -> f64 {
        self.len_ms * 1e-3
    }
}

/// Free-evolution element. `CouplingFraction` is the idealized form used by
/// the builtin sequences: only the named scalar coupling acts, for a time
/// of `frac`/J seconds. `FixedTime` evolves under the full Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub enum Delay {
    CouplingFraction { pair: (usize, usize), frac: f64 },
    FixedTime { seconds: f64 },
}

/// Gradient crusher. The axis is bookkeeping only; every gradient acts as
/// the same coherence-order filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gradient {
    pub axis: Axis,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SeqElement {
    Pulse(Pulse),
    Delay(Delay),
    Gradient(Gradient),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sequence {
    pub name: String,
    pub elements: Vec<SeqElement>,
}

#[derive(Debug, Error)]
#[error("line {line}, column {col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum SeqError {
    #[error("unknown builtin sequence {0:?}")]
    UnknownBuiltin(String),
    #[error("sequence {name:?} is empty")]
    Empty { name: String },
    #[error("pulse targets spin {spin} but the system has {n} spins")]
    SpinOutOfRange { spin: usize, n: usize },
    #[error("delay references coupling ({i},{j}) which the system does not define")]
    UnknownCoupling { i: usize, j: usize },
    #[error("delay references coupling ({i},{j}) which is zero")]
    ZeroCoupling { i: usize, j: usize },
}

fn err(line: usize, col: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        col,
        message: message.into(),
    }
}

// Map |p| <= 360 into the canonical (-180, 180] window. Values already in
// the window pass through untouched, which keeps parse exact on formatted
// output.
fn normalize_phase(p: f64) -> f64 {
    if p > -180.0 && p <= 180.0 {
        return p;
    }
    let r = p.rem_euclid(360.0);
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

fn tokens(s: &str) -> Vec<(usize, &str)> {
    let bytes = s.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < s.len() {
        if bytes[i].is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        while i < s.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        out.push((start, &s[start..i]));
    }
    out
}

struct StmtCtx<'a> {
    line: usize,
    base: usize,
    keyword: &'a str,
}

impl<'a> StmtCtx<'a> {
    fn col(&self, off: usize) -> usize {
        self.base + off + 1
    }
}

fn parse_f64(ctx: &StmtCtx, off: usize, key: &str, raw: &str) -> Result<f64, ParseError> {
    let v: f64 = raw.parse().map_err(|_| {
        err(
            ctx.line,
            ctx.col(off),
            format!("{key} expects a number, got {raw:?}"),
        )
    })?;
    if !v.is_finite() {
        return Err(err(ctx.line, ctx.col(off), format!("{key} must be finite")));
    }
    Ok(v)
}

fn parse_spin(ctx: &StmtCtx, off: usize, raw: &str) -> Result<usize, ParseError> {
    let v: usize = raw.parse().map_err(|_| {
        err(
            ctx.line,
            ctx.col(off),
            format!("expected a spin index, got {raw:?}"),
        )
    })?;
    if v == 0 || v > MAX_SPINS {
        return Err(err(
            ctx.line,
            ctx.col(off),
            format!("spin index {v} out of range 1..={MAX_SPINS}"),
        ));
    }
    Ok(v)
}

/// Parse a pulse program. Errors carry 1-indexed line and column.
pub fn parse(text: &str) -> Result<Sequence, ParseError> {
    let mut name = String::new();
    let mut elements = Vec::new();
    let mut first_content_seen = false;
    for (line_idx, raw_line) in text.lines().enumerate() {
        let line = line_idx + 1;
        let trimmed = raw_line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.starts_with('#') {
            if !first_content_seen {
                if let Some(rest) = trimmed.strip_prefix("# name:") {
                    name = rest.trim().to_string();
                }
                first_content_seen = true;
            }
            continue;
        }
        first_content_seen = true;
        let mut base = 0usize;
        for piece in raw_line.split(';') {
            if piece.trim().is_empty() {
                return Err(err(line, base + 1, "empty statement"));
            }
            elements.push(parse_stmt(line, base, piece)?);
            base += piece.len() + 1;
        }
    }
    Ok(Sequence { name, elements })
}

fn parse_stmt(line: usize, base: usize, piece: &str) -> Result<SeqElement, ParseError> {
    let toks = tokens(piece);
    let (kw_off, keyword) = toks[0];
    let ctx = StmtCtx {
        line,
        base,
        keyword,
    };
    let mut kvs = Vec::new();
    for &(off, tok) in &toks[1..] {
        let (key, value) = tok.split_once('=').ok_or_else(|| {
            err(
                line,
                ctx.col(off),
                format!("expected key=value, got {tok:?}"),
            )
        })?;
        if kvs.iter().any(|&(_, k, _)| k == key) {
            return Err(err(line, ctx.col(off), format!("duplicate key {key:?}")));
        }
        kvs.push((off, key, value));
    }
    match keyword {
        "pulse" => parse_pulse(&ctx, &kvs),
        "delay" => parse_delay(&ctx, &kvs),
        "grad" => parse_grad(&ctx, &kvs),
        other => Err(err(
            line,
            ctx.col(kw_off),
            format!("unknown statement {other:?}, expected pulse, delay, or grad"),
        )),
    }
}

fn parse_pulse(ctx: &StmtCtx, kvs: &[(usize, &str, &str)]) -> Result<SeqElement, ParseError> {
    let mut angle = None;
    let mut phase = None;
    let mut spins = None;
    let mut len = None;
    for &(off, key, value) in kvs {
        match key {
            "angle" => {
                let v = parse_f64(ctx, off, "angle", value)?;
                if !(v > 0.0 && v <= 360.0) {
                    return Err(err(
                        ctx.line,
                        ctx.col(off),
                        format!("angle must be in (0, 360] degrees, got {value}"),
                    ));
                }
                angle = Some(v);
            }
            "phase" => {
                let v = parse_f64(ctx, off, "phase", value)?;
                if !(-360.0..=360.0).contains(&v) {
                    return Err(err(
                        ctx.line,
                        ctx.col(off),
                        format!("phase must be within [-360, 360] degrees, got {value}"),
                    ));
                }
                phase = Some(normalize_phase(v));
            }
            "spins" => {
                let mut list = Vec::new();
                for part in value.split(',') {
                    let s = parse_spin(ctx, off, part)?;
                    if list.contains(&s) {
                        return Err(err(
                            ctx.line,
                            ctx.col(off),
                            format!("spin {s} listed twice"),
                        ));
                    }
                    list.push(s);
                }
                list.sort_unstable();
                spins = Some(list);
            }
            "len" => {
                let v = parse_f64(ctx, off, "len", value)?;
                if v < 0.0 {
                    return Err(err(ctx.line, ctx.col(off), "len must be >= 0 ms"));
                }
                len = Some(v);
            }
            other => {
                return Err(err(
                    ctx.line,
                    ctx.col(off),
                    format!("unknown key {other:?} for {}", ctx.keyword),
                ))
            }
        }
    }
    let missing = |what: &str| err(ctx.line, ctx.base + 1, format!("pulse requires {what}"));
    Ok(SeqElement::Pulse(Pulse {
        angle_deg: angle.ok_or_else(|| missing("angle"))?,
        phase_deg: phase.ok_or_else(|| missing("phase"))?,
        spins: spins.ok_or_else(|| missing("spins"))?,
        len_ms: len.unwrap_or(DEFAULT_PULSE_LEN_MS),
    }))
}

fn parse_delay(ctx: &StmtCtx, kvs: &[(usize, &str, &str)]) -> Result<SeqElement, ParseError> {
    let mut pair = None;
    let mut frac = None;
    let mut t = None;
    for &(off, key, value) in kvs {
        match key {
            "J" => {
                let parts: Vec<&str> = value.split(',').collect();
                if parts.len() != 2 {
                    return Err(err(
                        ctx.line,
                        ctx.col(off),
                        format!("J expects a spin pair like 1,2, got {value:?}"),
                    ));
                }
                let a = parse_spin(ctx, off, parts[0])?;
                let b = parse_spin(ctx, off, parts[1])?;
                if a == b {
                    return Err(err(
                        ctx.line,
                        ctx.col(off),
                        "J pair must name two distinct spins",
                    ));
                }
                pair = Some((a.min(b), a.max(b)));
            }
            "frac" => {
                let v = parse_f64(ctx, off, "frac", value)?;
                if v <= 0.0 {
                    return Err(err(ctx.line, ctx.col(off), "frac must be > 0"));
                }
                frac = Some(v);
            }
            "t" => {
                let v = parse_f64(ctx, off, "t", value)?;
                if v <= 0.0 {
                    return Err(err(ctx.line, ctx.col(off), "t must be > 0 seconds"));
                }
                t = Some(v);
            }
            other => {
                return Err(err(
                    ctx.line,
                    ctx.col(off),
                    format!("unknown key {other:?} for {}", ctx.keyword),
                ))
            }
        }
    }
    match (pair, frac, t) {
        (Some(pair), Some(frac), None) => {
            Ok(SeqElement::Delay(Delay::CouplingFraction { pair, frac }))
        }
        (None, None, Some(seconds)) => Ok(SeqElement::Delay(Delay::FixedTime { seconds })),
        _ => Err(err(
            ctx.line,
            ctx.base + 1,
            "delay takes either J=j,k with frac=f, or t=seconds",
        )),
    }
}

fn parse_grad(ctx: &StmtCtx, kvs: &[(usize, &str, &str)]) -> Result<SeqElement, ParseError> {
    let mut axis = None;
    for &(off, key, value) in kvs {
        match key {
            "axis" => {
                let a: Axis = value.parse().map_err(|e| err(ctx.line, ctx.col(off), e))?;
                axis = Some(a);
            }
            other => {
                return Err(err(
                    ctx.line,
                    ctx.col(off),
                    format!("unknown key {other:?} for {}", ctx.keyword),
                ))
            }
        }
    }
    Ok(SeqElement::Gradient(Gradient {
        axis: axis.ok_or_else(|| err(ctx.line, ctx.base + 1, "grad requires axis"))?,
    }))
}

/// Canonical text form; `parse(&format(&s)) == s` for every valid sequence.
pub fn format(seq: &Sequence) -> String {
    let mut out = String::new();
    if !seq.name.is_empty() {
        out.push_str(&format!("# name: {}\n", seq.name));
    }
    for el in &seq.elements {
        match el {
            SeqElement::Pulse(p) => {
                let spins: Vec<String> = p.spins.iter().map(|s| s.to_string()).collect();
                out.push_str(&format!(
                    "pulse angle={} phase={} spins={} len={}\n",
                    p.angle_deg,
                    p.phase_deg,
                    spins.join(","),
                    p.len_ms
                ));
            }
            SeqElement::Delay(Delay::CouplingFraction { pair, frac }) => {
                out.push_str(&format!("delay J={},{} frac={}\n", pair.0, pair.1, frac));
            }
            SeqElement::Delay(Delay::FixedTime { seconds }) => {
                out.push_str(&format!("delay t={}\n", seconds));
            }
            SeqElement::Gradient(g) => {
                out.push_str(&format!("grad axis={}\n", g.axis));
            }
        }
    }
    out
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format(self))
    }
}

/// Check a sequence against a concrete system: every pulse target must
/// exist and every coupling delay must resolve to a nonzero J.
pub fn validate(seq: &Sequence, sys: &SpinSystem) -> Result<(), SeqError> {
    if seq.elements.is_empty() {
        return Err(SeqError::Empty {
            name: seq.name.clone(),
        });
    }
    for el in &seq.elements {
        match el {
            SeqElement::Pulse(p) => {
                for &s in &p.spins {
                    if s > sys.n_spins() {
                        return Err(SeqError::SpinOutOfRange {
                            spin: s,
                            n: sys.n_spins(),
                        });
                    }
                }
            }
            SeqElement::Delay(Delay::CouplingFraction { pair, .. }) => {
                let hz = sys
                    .coupling_hz(pair.0, pair.1)
                    .ok_or(SeqError::UnknownCoupling {
                        i: pair.0,
                        j: pair.1,
                    })?;
                if hz == 0.0 {
                    return Err(SeqError::ZeroCoupling {
                        i: pair.0,
                        j: pair.1,
                    });
                }
            }
            _ => {}
        }
    }
    Ok(())
}

fn p90(phase_deg: f64, spins: &[usize]) -> SeqElement {
    SeqElement::Pulse(Pulse {
        angle_deg: 90.0,
        phase_deg,
        spins: spins.to_vec(),
        len_ms: DEFAULT_PULSE_LEN_MS,
    })
}

fn dj(pair: (usize, usize), frac: f64) -> SeqElement {
    SeqElement::Delay(Delay::CouplingFraction { pair, frac })
}

fn grad(axis: Axis) -> SeqElement {
    SeqElement::Gradient(Gradient { axis })
}

/// Preparation of the pseudo-pure state from thermal equilibrium: selective
/// rotations interleaved with coupling delays and three orthogonal crusher
/// gradients.
pub fn prepare_pp() -> Sequence {
    Sequence {
        name: "prepare_pp".into(),
        elements: vec![
            p90(90.0, &[2]),
            grad(Axis::Z),
            p90(-90.0, &[3]),
            dj((2, 3), 0.25),
            p90(135.0, &[3]),
            grad(Axis::Y),
            p90(-90.0, &[1]),
            dj((1, 2), 0.25),
            p90(135.0, &[1]),
            grad(Axis::X),
            p90(0.0, &[2]),
            dj((1, 2), 0.5),
            p90(-90.0, &[2]),
        ],
    }
}

/// Rotation of the pseudo-pure state into the entangled state whose corner
/// coherences carry the three-spin correlations.
pub fn rotate_ghz() -> Sequence {
    Sequence {
        name: "rotate_ghz".into(),
        elements: vec![
            p90(-90.0, &[1]),
            dj((1, 2), 0.5),
            p90(0.0, &[2, 3]),
            dj((2, 3), 0.5),
            p90(180.0, &[2, 3]),
            dj((1, 2), 0.5),
            p90(-90.0, &[1]),
        ],
    }
}

/// Readout pulses turning the chosen transverse axes of spins 1 and 3 into
/// z-polarizations; the middle axis k is resolved later by spectral phasing
/// and only contributes to the sequence name.
pub fn measure(j: TransverseAxis, k: TransverseAxis, l: TransverseAxis) -> Sequence {
    Sequence {
        name: format!("measure({},{},{})", j, k, l),
        elements: vec![
            p90(j.angle_deg() - 90.0, &[1]),
            p90(l.angle_deg() - 90.0, &[3]),
        ],
    }
}

/// Look up a builtin by name; measurement sequences are spelled
/// `measure(x,y,y)`.
pub fn builtin(name: &str) -> Result<Sequence, SeqError> {
    match name {
        "prepare_pp" => return Ok(prepare_pp()),
        "rotate_ghz" => return Ok(rotate_ghz()),
        _ => {}
    }
    if let Some(rest) = name
        .strip_prefix("measure(")
        .and_then(|r| r.strip_suffix(')'))
    {
        let parts: Vec<&str> = rest.split(',').collect();
        if parts.len() == 3 {
            let axes: Result<Vec<TransverseAxis>, _> =
                parts.iter().map(|p| p.trim().parse()).collect();
            if let Ok(axes) = axes {
                return Ok(measure(axes[0], axes[1], axes[2]));
            }
        }
    }
    Err(SeqError::UnknownBuiltin(name.to_string()))
}
