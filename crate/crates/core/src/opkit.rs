//! Dense complex operators and Pauli algebra for up to [`MAX_SPINS`]
//! spin-1/2 particles, plus the matrix exponential used for every propagator
//! in the simulator.
//!
//! Matrices are tiny (dimension 2^n <= 16), so everything here is naive
//! dense arithmetic. The exponential goes through a cyclic Jacobi
//! eigendecomposition of the Hermitian generator rather than a power series;
//! the series form survives only as a test oracle.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use thiserror::Error;

/// Largest supported spin count; operators act on at most 2^4 = 16 states.
pub const MAX_SPINS: usize = 4;

/// Hermiticity tolerance applied when an operator is constructed for a
/// Hermitian role (Hamiltonian, deviation matrix, observable).
pub const HERMITICITY_TOL: f64 = 1e-12;

/// Unitarity tolerance asserted on every computed propagator.
pub const UNITARITY_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum OpError {
    #[error("dimension mismatch: {left}x{left} vs {right}x{right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("spin index {spin} out of range for {n} spins")]
    SpinOutOfRange { spin: usize, n: usize },
    #[error("{n} spins exceeds the supported maximum of {MAX_SPINS}")]
    TooManySpins { n: usize },
    #[error("operator is not Hermitian (max |A - A^H| entry = {deviation:.3e})")]
    NotHermitian { deviation: f64 },
    #[error("matrix data has {len} entries, expected {dim}x{dim}")]
    BadShape { len: usize, dim: usize },
}

/// A measurement or rotation axis in spin space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn label(self) -> char {
        match self {
            Axis::X => 'x',
            Axis::Y => 'y',
            Axis::Z => 'z',
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            other => Err(format!("unknown axis {other:?}, expected x, y, or z")),
        }
    }
}

/// An axis restricted to the transverse plane, as used for spin measurement
/// settings and for spectrum phasing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TransverseAxis {
    X,
    Y,
}

impl TransverseAxis {
    pub fn axis(self) -> Axis {
        match self {
            TransverseAxis::X => Axis::X,
            TransverseAxis::Y => Axis::Y,
        }
    }

    /// In-plane angle of the axis: x at 0 degrees, y at 90 degrees.
    pub fn angle_deg(self) -> f64 {
        match self {
            TransverseAxis::X => 0.0,
            TransverseAxis::Y => 90.0,
        }
    }

    pub fn label(self) -> char {
        self.axis().label()
    }
}

impl fmt::Display for TransverseAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

impl FromStr for TransverseAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "x" => Ok(TransverseAxis::X),
            "y" => Ok(TransverseAxis::Y),
            other => Err(format!(
                "unknown transverse axis {other:?}, expected x or y"
            )),
        }
    }
}

/// Dense square complex matrix on the 2^n-dimensional product basis.
///
/// Basis ordering: spin 1 is the most significant bit and bit value 0 means
/// the +z eigenstate, so index 0 is |+++...> and the last index is |---...>.
#[derive(Debug, Clone)]
pub struct Operator {
    dim: usize,
    data: Vec<Complex64>,
}

impl Operator {
    pub fn zeros(dim: usize) -> Operator {
        Operator {
            dim,
            data: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Operator {
        let mut m = Operator::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_data(dim: usize, data: Vec<Complex64>) -> Result<Operator, OpError> {
        if data.len() != dim * dim {
            return Err(OpError::BadShape {
                len: data.len(),
                dim,
            });
        }
        Ok(Operator { dim, data })
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Operator {
        let mut m = Operator::zeros(dim);
        for r in 0..dim {
            for c in 0..dim {
                m.data[r * dim + c] = f(r, c);
            }
        }
        m
    }

    /// Constructor for Hermitian roles; rejects input drifting past
    /// [`HERMITICITY_TOL`].
    pub fn hermitian(dim: usize, data: Vec<Complex64>) -> Result<Operator, OpError> {
        let m = Operator::from_data(dim, data)?;
        m.require_hermitian(HERMITICITY_TOL)?;
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.dim + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.dim + c] = v;
    }

    pub fn mul(&self, rhs: &Operator) -> Result<Operator, OpError> {
        self.check_dim(rhs)?;
        let n = self.dim;
        let mut out = Operator::zeros(n);
        for r in 0..n {
            for k in 0..n {
                let a = self.data[r * n + k];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for c in 0..n {
                    out.data[r * n + c] += a * rhs.data[k * n + c];
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, rhs: &Operator) -> Result<Operator, OpError> {
        self.check_dim(rhs)?;
        let mut out = self.clone();
        for (o, r) in out.data.iter_mut().zip(rhs.data.iter()) {
            *o += r;
        }
        Ok(out)
    }

    pub fn sub(&self, rhs: &Operator) -> Result<Operator, OpError> {
        self.check_dim(rhs)?;
        let mut out = self.clone();
        for (o, r) in out.data.iter_mut().zip(rhs.data.iter()) {
            *o -= r;
        }
        Ok(out)
    }

    pub fn scale<C: Into<Complex64>>(&self, c: C) -> Operator {
        let c = c.into();
        let mut out = self.clone();
        for v in out.data.iter_mut() {
            *v *= c;
        }
        out
    }

    pub fn dagger(&self) -> Operator {
        let n = self.dim;
        Operator::from_fn(n, |r, c| self.data[c * n + r].conj())
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    pub fn commutator(&self, rhs: &Operator) -> Result<Operator, OpError> {
        self.mul(rhs)?.sub(&rhs.mul(self)?)
    }

    /// Matrix-vector product; `v` must have length `dim`.
    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.dim, "vector length must match dimension");
        let n = self.dim;
        (0..n)
            .map(|r| (0..n).map(|c| self.data[r * n + c] * v[c]).sum())
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, rhs: &Operator) -> f64 {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        self.data
            .iter()
            .zip(rhs.data.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for r in 0..n {
            for c in r..n {
                let d = (self.data[r * n + c] - self.data[c * n + r].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn require_hermitian(&self, tol: f64) -> Result<(), OpError> {
        let deviation = self.hermiticity_deviation();
        if deviation > tol {
            Err(OpError::NotHermitian { deviation })
        } else {
            Ok(())
        }
    }

    fn check_dim(&self, rhs: &Operator) -> Result<(), OpError> {
        if self.dim != rhs.dim {
            Err(OpError::DimensionMismatch {
                left: self.dim,
                right: rhs.dim,
            })
        } else {
            Ok(())
        }
    }

    /// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
    ///
    /// Returns eigenvalues in ascending order and the matching unitary of
    /// column eigenvectors, so `self = V diag(w) V^H`.
    pub fn eigh(&self) -> Result<(Vec<f64>, Operator), OpError> {
        self.require_hermitian(HERMITICITY_TOL)?;
        let n = self.dim;
        let mut a = self.clone();
        let mut v = Operator::identity(n);
        let scale = self.frobenius().max(1.0);
        let tol = 1e-15 * scale;
        let mut converged = false;
        for _sweep in 0..60 {
            if a.off_diagonal_norm() <= tol {
                converged = true;
                break;
            }
            for p in 0..n - 1 {
                for q in p + 1..n {
                    let apq = a.data[p * n + q];
                    let absg = apq.norm();
                    if absg == 0.0 {
                        continue;
                    }
                    let alpha = a.data[p * n + p].re;
                    let beta = a.data[q * n + q].re;
                    let phase = apq / absg;
                    let tau = (beta - alpha) / (2.0 * absg);
                    let t = if tau >= 0.0 {
                        1.0 / (tau + (1.0 + tau * tau).sqrt())
                    } else {
                        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    // Plane rotation U: U[p][p]=c, U[p][q]=s*phase,
                    // U[q][p]=-s*conj(phase), U[q][q]=c. Apply A <- U^H A U
                    // and accumulate V <- V U.
                    let sp = phase.scale(s);
                    for r in 0..n {
                        let arp = a.data[r * n + p];
                        let arq = a.data[r * n + q];
                        a.data[r * n + p] = arp.scale(c) - sp.conj() * arq;
                        a.data[r * n + q] = sp * arp + arq.scale(c);
                    }
                    for col in 0..n {
                        let apc = a.data[p * n + col];
                        let aqc = a.data[q * n + col];
                        a.data[p * n + col] = apc.scale(c) - sp * aqc;
                        a.data[q * n + col] = sp.conj() * apc + aqc.scale(c);
                    }
                    for r in 0..n {
                        let vrp = v.data[r * n + p];
                        let vrq = v.data[r * n + q];
                        v.data[r * n + p] = vrp.scale(c) - sp.conj() * vrq;
                        v.data[r * n + q] = sp * vrp + vrq.scale(c);
                    }
                }
            }
        }
        if !converged && a.off_diagonal_norm() > tol {
            panic!("Jacobi eigensolver failed to converge at dim {n}");
        }
        let mut order: Vec<usize> = (0..n).collect();
        let vals: Vec<f64> = (0..n).map(|i| a.data[i * n + i].re).collect();
        order.sort_by(|&i, &j| vals[i].partial_cmp(&vals[j]).unwrap());
        let sorted_vals: Vec<f64> = order.iter().map(|&i| vals[i]).collect();
        let sorted_vecs = Operator::from_fn(n, |r, c| v.data[r * n + order[c]]);
        Ok((sorted_vals, sorted_vecs))
    }

    fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    fn off_diagonal_norm(&self) -> f64 {
        let n = self.dim;
        let mut acc = 0.0;
        for r in 0..n {
            for c in 0..n {
                if r != c {
                    acc += self.data[r * n + c].norm_sqr();
                }
            }
        }
        acc.sqrt()
    }
}

/// Embedded Pauli operator for one spin of an n-spin system (1-indexed,
/// spin 1 leftmost in the tensor product).
pub fn pauli(axis: Axis, spin: usize, n: usize) -> Result<Operator, OpError> {
    if n == 0 || n > MAX_SPINS {
        return Err(OpError::TooManySpins { n });
    }
    if spin == 0 || spin > n {
        return Err(OpError::SpinOutOfRange { spin, n });
    }
    let dim = 1usize << n;
    let mask = 1usize << (n - spin);
    let mut m = Operator::zeros(dim);
    for r in 0..dim {
        let bit = (r & mask) != 0;
        match axis {
            Axis::X => m.set(r, r ^ mask, Complex64::new(1.0, 0.0)),
            Axis::Y => {
                // sigma_y maps |+> to i|->: entry (1,0) = i, (0,1) = -i.
                let v = if bit {
                    Complex64::new(0.0, 1.0)
                } else {
                    Complex64::new(0.0, -1.0)
                };
                m.set(r, r ^ mask, v);
            }
            Axis::Z => {
                let v = if bit { -1.0 } else { 1.0 };
                m.set(r, r, Complex64::new(v, 0.0));
            }
        }
    }
    Ok(m)
}

/// Propagator `U = exp(-i H t)` for a Hermitian generator `H`, computed by
/// eigendecomposition. Unitarity of the result is asserted to
/// [`UNITARITY_TOL`].
pub fn expm_hermitian_generator(h: &Operator, t: f64) -> Result<Operator, OpError> {
    let (vals, vecs) = h.eigh()?;
    let n = h.dim();
    let mut w = vecs.clone();
    for (c, &val) in vals.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, -val * t);
        for r in 0..n {
            let v = w.get(r, c) * phase;
            w.set(r, c, v);
        }
    }
    let u = w.mul(&vecs.dagger())?;
    let drift = u.mul(&u.dagger())?.max_abs_diff(&Operator::identity(n));
    assert!(
        drift <= UNITARITY_TOL,
        "propagator lost unitarity (drift {drift:.3e})"
    );
    Ok(u)
}
