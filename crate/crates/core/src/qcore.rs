//! Dense complex linear algebra, Pauli strings, and the states and gates the
//! rest of the crate is built from.
//!
//! Qubit ordering: the leftmost Pauli letter (and the leftmost character of an
//! outcome bitstring) is qubit 0, which is the most significant bit of the
//! matrix index.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde_with::{DeserializeFromStr, SerializeDisplay};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Absolute tolerance for Hermiticity, unitarity and PSD checks.
pub const TOL: f64 = 1e-10;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Number of ones in `x`.
#[inline]
pub fn hamming_weight(x: usize) -> u32 {
    x.count_ones()
}

/// Value of qubit `q` in the `n`-qubit basis index `x`.
#[inline]
pub fn qubit_bit(x: usize, q: usize, n: usize) -> usize {
    (x >> (n - 1 - q)) & 1
}

/// Render a basis index as an `n`-character bitstring, qubit 0 first.
pub fn format_bits(x: usize, n: usize) -> String {
    (0..n)
        .map(|q| if qubit_bit(x, q, n) == 1 { '1' } else { '0' })
        .collect()
}

/// Parse a bitstring such as `"010"` into `(index, n)`.
pub fn parse_bits(s: &str) -> Result<(usize, usize)> {
    if s.is_empty() || s.len() > 16 {
        return Err(Error::InvalidArgument(format!("bad bitstring {s:?}")));
    }
    let mut x = 0usize;
    for c in s.chars() {
        x <<= 1;
        match c {
            '0' => {}
            '1' => x |= 1,
            _ => return Err(Error::InvalidArgument(format!("bad bitstring {s:?}"))),
        }
    }
    Ok((x, s.len()))
}

fn qubits_for_dim(dim: usize) -> Result<usize> {
    if dim < 2 || !dim.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(dim));
    }
    Ok(dim.trailing_zeros() as usize)
}

/// Dense complex square matrix whose dimension is a power of two.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    mat: DMatrix<C64>,
}

impl Operator {
    pub fn from_matrix(mat: DMatrix<C64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch {
                expected: mat.nrows(),
                got: mat.ncols(),
            });
        }
        qubits_for_dim(mat.nrows())?;
        Ok(Self { mat })
    }

    /// Build from row-major entries.
    pub fn from_rows(dim: usize, entries: &[C64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: entries.len(),
            });
        }
        Self::from_matrix(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        assert!(dim >= 2 && dim.is_power_of_two(), "dimension {dim} is not a power of two");
        Self {
            mat: DMatrix::from_fn(dim, dim, f),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |r, c| if r == c { ONE } else { ZERO })
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_fn(dim, |_, _| ZERO)
    }

    /// Diagonal operator from real entries.
    pub fn diagonal(diag: &[f64]) -> Self {
        Self::from_fn(diag.len(), |r, c| if r == c { C64::from(diag[r]) } else { ZERO })
    }

    /// `|v⟩⟨v|`.
    pub fn outer(v: &[C64]) -> Self {
        Self::from_fn(v.len(), |r, c| v[r] * v[c].conj())
    }

    /// `|x⟩⟨x|` on `n` qubits.
    pub fn projector(x: usize, n: usize) -> Self {
        Self::from_fn(1 << n, |r, c| if r == x && c == x { ONE } else { ZERO })
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn num_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.mat[(r, c)]
    }

    pub fn adjoint(&self) -> Self {
        Self {
            mat: self.mat.adjoint(),
        }
    }

    pub fn kron(&self, other: &Operator) -> Self {
        Self {
            mat: self.mat.kronecker(&other.mat),
        }
    }

    /// `op ⊗ op ⊗ … ⊗ op` (`n` factors).
    pub fn tensor_power(&self, n: usize) -> Self {
        assert!(n >= 1);
        (1..n).fold(self.clone(), |acc, _| acc.kron(self))
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { mat: &self.mat * s }
    }

    /// `tr[self · other]` without forming the product.
    pub fn trace_product(&self, other: &Operator) -> C64 {
        let d = self.dim();
        let mut acc = ZERO;
        for r in 0..d {
            for c in 0..d {
                acc += self.mat[(r, c)] * other.mat[(c, r)];
            }
        }
        acc
    }

    /// `G · self · G†`.
    pub fn conjugate_by(&self, g: &Operator) -> Self {
        Self {
            mat: &g.mat * &self.mat * g.mat.adjoint(),
        }
    }

    pub fn diagonal_real(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.mat[(i, i)].re).collect()
    }

    /// Zero every off-diagonal entry.
    pub fn dephased(&self) -> Self {
        Self::from_fn(self.dim(), |r, c| if r == c { self.mat[(r, c)] } else { ZERO })
    }

    /// Largest modulus among off-diagonal entries.
    pub fn max_offdiag_abs(&self) -> f64 {
        let d = self.dim();
        let mut m = 0.0f64;
        for r in 0..d {
            for c in 0..d {
                if r != c {
                    m = m.max(self.mat[(r, c)].norm());
                }
            }
        }
        m
    }

    /// `max |A - A†|` entrywise.
    pub fn hermitian_deviation(&self) -> f64 {
        let d = self.dim();
        let mut m = 0.0f64;
        for r in 0..d {
            for c in r..d {
                m = m.max((self.mat[(r, c)] - self.mat[(c, r)].conj()).norm());
            }
        }
        m
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    /// `max |A A† - 1|` entrywise.
    pub fn unitary_deviation(&self) -> f64 {
        let prod = &self.mat * self.mat.adjoint();
        let d = self.dim();
        let mut m = 0.0f64;
        for r in 0..d {
            for c in 0..d {
                let target = if r == c { ONE } else { ZERO };
                m = m.max((prod[(r, c)] - target).norm());
            }
        }
        m
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitary_deviation() <= tol
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let herm = (&self.mat + self.mat.adjoint()) * C64::from(0.5);
        let mut ev: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.hermitian_eigenvalues()[0]
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        self.mat
            .iter()
            .zip(other.mat.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Apply to a column vector.
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let out = &self.mat * DVector::from_column_slice(v);
        out.iter().copied().collect()
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator {
            mat: &self.mat + &rhs.mat,
        }
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        Operator {
            mat: &self.mat - &rhs.mat,
        }
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator {
            mat: &self.mat * &rhs.mat,
        }
    }
}

/// Single-qubit Pauli letter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> Operator {
        let e = match self {
            Pauli::I => [ONE, ZERO, ZERO, ONE],
            Pauli::X => [ZERO, ONE, ONE, ZERO],
            Pauli::Y => [ZERO, -I, I, ZERO],
            Pauli::Z => [ONE, ZERO, ZERO, -ONE],
        };
        Operator::from_rows(2, &e).expect("2x2")
    }

    /// Symplectic `(x, z)` bits: `P ∝ X^x Z^z`.
    pub fn xz(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    /// Whether the letter flips a computational basis state.
    pub fn flips(self) -> bool {
        matches!(self, Pauli::X | Pauli::Y)
    }

    fn index(self) -> usize {
        self as usize
    }

    fn to_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// Tensor product of single-qubit Paulis, qubit 0 first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, SerializeDisplay, DeserializeFromStr)]
pub struct PauliString {
    letters: Vec<Pauli>,
}

impl PauliString {
    pub fn new(letters: Vec<Pauli>) -> Self {
        assert!(!letters.is_empty(), "empty Pauli string");
        Self { letters }
    }

    pub fn identity(n: usize) -> Self {
        Self::new(vec![Pauli::I; n])
    }

    /// The `index`-th string of `{I,X,Y,Z}^n` in lexicographic order.
    pub fn from_index(mut index: usize, n: usize) -> Self {
        let mut letters = vec![Pauli::I; n];
        for q in (0..n).rev() {
            letters[q] = Pauli::ALL[index % 4];
            index /= 4;
        }
        Self::new(letters)
    }

    /// Position in the lexicographic order of `{I,X,Y,Z}^n`.
    pub fn index(&self) -> usize {
        self.letters.iter().fold(0, |acc, p| acc * 4 + p.index())
    }

    /// All `4^n` strings in lexicographic order.
    pub fn all(n: usize) -> Vec<PauliString> {
        (0..1usize << (2 * n)).map(|i| Self::from_index(i, n)).collect()
    }

    /// Strings drawn letterwise from `alphabet`, ordered lexicographically.
    pub fn product_set(alphabet: &[Pauli], n: usize) -> Vec<PauliString> {
        let k = alphabet.len();
        (0..k.pow(n as u32))
            .map(|mut idx| {
                let mut letters = vec![alphabet[0]; n];
                for q in (0..n).rev() {
                    letters[q] = alphabet[idx % k];
                    idx /= k;
                }
                Self::new(letters)
            })
            .collect()
    }

    pub fn num_qubits(&self) -> usize {
        self.letters.len()
    }

    pub fn letters(&self) -> &[Pauli] {
        &self.letters
    }

    pub fn is_identity(&self) -> bool {
        self.letters.iter().all(|&p| p == Pauli::I)
    }

    /// True when every letter is `I` or `Z`.
    pub fn is_diagonal(&self) -> bool {
        self.letters.iter().all(|&p| matches!(p, Pauli::I | Pauli::Z))
    }

    /// Mask of qubits (as index bits) whose letter flips the basis state.
    pub fn flip_mask(&self) -> usize {
        let n = self.num_qubits();
        self.letters
            .iter()
            .enumerate()
            .filter(|(_, p)| p.flips())
            .fold(0, |m, (q, _)| m | (1 << (n - 1 - q)))
    }

    /// Mask of qubits (as index bits) whose letter is not `I`.
    pub fn support_mask(&self) -> usize {
        let n = self.num_qubits();
        self.letters
            .iter()
            .enumerate()
            .filter(|(_, &p)| p != Pauli::I)
            .fold(0, |m, (q, _)| m | (1 << (n - 1 - q)))
    }

    /// `P|col⟩ = phase · |row⟩`; returns `(row, phase)`.
    pub fn action(&self, col: usize) -> (usize, C64) {
        let n = self.num_qubits();
        let mut phase = ONE;
        for (q, p) in self.letters.iter().enumerate() {
            let bit = qubit_bit(col, q, n);
            match p {
                Pauli::I | Pauli::X => {}
                Pauli::Y => phase *= if bit == 0 { I } else { -I },
                Pauli::Z => {
                    if bit == 1 {
                        phase = -phase
                    }
                }
            }
        }
        (col ^ self.flip_mask(), phase)
    }

    /// Symplectic form `⟨a,b⟩ = a_x·b_z + a_z·b_x (mod 2)`.
    pub fn symplectic_product(&self, other: &PauliString) -> u32 {
        assert_eq!(self.num_qubits(), other.num_qubits());
        self.letters
            .iter()
            .zip(&other.letters)
            .map(|(a, b)| {
                let (ax, az) = a.xz();
                let (bx, bz) = b.xz();
                ((ax && bz) as u32) ^ ((az && bx) as u32)
            })
            .fold(0, |acc, v| acc ^ v)
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        self.symplectic_product(other) == 0
    }

    pub fn to_operator(&self) -> Operator {
        let dim = 1 << self.num_qubits();
        let mut op = Operator::zeros(dim);
        for col in 0..dim {
            let (row, phase) = self.action(col);
            op.mat[(row, col)] = phase;
        }
        op
    }

    /// `tr[self · A]` using the single nonzero per column of the Pauli.
    pub fn trace_with(&self, a: &Operator) -> C64 {
        let mut acc = ZERO;
        for col in 0..a.dim() {
            let (row, phase) = self.action(col);
            // tr[P A] = Σ_c ⟨c|P A|c⟩ = Σ_c Σ_r P(c,r) A(r,c); P(row,col)=phase
            acc += phase * a.get(col, row);
        }
        acc
    }

    /// `P · A · P` (Paulis are self-inverse).
    pub fn conjugate(&self, a: &Operator) -> Operator {
        let dim = a.dim();
        let acts: Vec<(usize, C64)> = (0..dim).map(|c| self.action(c)).collect();
        let mut out = Operator::zeros(dim);
        for c in 0..dim {
            let (rc, pc) = acts[c];
            for r in 0..dim {
                let (rr, pr) = acts[r];
                // (P A P)(rr, rc) = pr · A(r,c) · conj(pc)
                out.mat[(rr, rc)] = pr * a.get(r, c) * pc.conj();
            }
        }
        out
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.letters {
            write!(f, "{}", p.to_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.is_empty() {
            return Err(Error::InvalidArgument("empty Pauli string".into()));
        }
        let letters = s
            .chars()
            .map(|c| match c.to_ascii_uppercase() {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                _ => Err(Error::InvalidArgument(format!("bad Pauli letter {c:?} in {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(letters))
    }
}

/// `pauli_operator`: Kronecker product of the letters' matrices.
pub fn pauli_operator(p: &PauliString) -> Operator {
    p.to_operator()
}

/// Standard gates.
pub mod gates {
    use super::*;

    pub fn hadamard() -> Operator {
        let h = C64::from(FRAC_1_SQRT_2);
        Operator::from_rows(2, &[h, h, h, -h]).unwrap()
    }

    /// `diag(1, e^{iθ})`.
    pub fn phase(theta: f64) -> Operator {
        Operator::from_rows(2, &[ONE, ZERO, ZERO, C64::from_polar(1.0, theta)]).unwrap()
    }

    pub fn s_dagger() -> Operator {
        phase(-PI / 2.0)
    }

    /// `e^{-iθY/2}`.
    pub fn ry(theta: f64) -> Operator {
        let (s, c) = (theta / 2.0).sin_cos();
        Operator::from_rows(2, &[c.into(), (-s).into(), s.into(), c.into()]).unwrap()
    }

    /// `e^{iα(cos φ X + sin φ Y)}`.
    pub fn xy_rotation(alpha: f64, phi: f64) -> Operator {
        let (sa, ca) = alpha.sin_cos();
        let off = I * sa;
        let e_m = C64::from_polar(1.0, -phi);
        let e_p = C64::from_polar(1.0, phi);
        Operator::from_rows(2, &[ca.into(), off * e_m, off * e_p, ca.into()]).unwrap()
    }

    /// Single-qubit `gate` acting on qubit `q` of `n`.
    pub fn on_qubit(gate: &Operator, q: usize, n: usize) -> Operator {
        assert_eq!(gate.dim(), 2);
        assert!(q < n);
        let id = Operator::identity(2);
        let mut acc: Option<Operator> = None;
        for k in 0..n {
            let f = if k == q { gate } else { &id };
            acc = Some(match acc {
                None => f.clone(),
                Some(a) => a.kron(f),
            });
        }
        acc.unwrap()
    }

    /// Tensor product of per-qubit gates, qubit 0 first.
    pub fn product(per_qubit: &[Operator]) -> Operator {
        let mut it = per_qubit.iter();
        let first = it.next().expect("at least one qubit").clone();
        it.fold(first, |acc, g| acc.kron(g))
    }

    /// Controlled-Z between qubits `a` and `b` of `n`.
    pub fn cz(a: usize, b: usize, n: usize) -> Operator {
        let diag: Vec<f64> = (0..1usize << n)
            .map(|x| {
                if qubit_bit(x, a, n) == 1 && qubit_bit(x, b, n) == 1 {
                    -1.0
                } else {
                    1.0
                }
            })
            .collect();
        Operator::diagonal(&diag)
    }
}

/// Validated density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityState {
    op: Operator,
}

impl DensityState {
    /// Checks unit trace, Hermiticity and the eigenvalue floor at [`TOL`].
    pub fn new(op: Operator) -> Result<Self> {
        let tr = op.trace();
        if (tr - ONE).norm() > TOL {
            return Err(Error::InvalidState(format!("trace {tr} != 1")));
        }
        let dev = op.hermitian_deviation();
        if dev > TOL {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {dev:.3e})")));
        }
        let min = op.min_eigenvalue();
        if min < -TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(Self { op })
    }

    pub(crate) fn new_unchecked(op: Operator) -> Self {
        Self { op }
    }

    /// `|ψ⟩⟨ψ|` for a normalized vector.
    pub fn from_pure(psi: &[C64]) -> Result<Self> {
        qubits_for_dim(psi.len())?;
        let norm: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > TOL {
            return Err(Error::InvalidState(format!("state vector norm² {norm} != 1")));
        }
        Ok(Self::new_unchecked(Operator::outer(psi)))
    }

    /// Computational basis state `|x⟩⟨x|`.
    pub fn basis(x: usize, n: usize) -> Self {
        assert!(x < 1 << n);
        Self::new_unchecked(Operator::projector(x, n))
    }

    pub fn operator(&self) -> &Operator {
        &self.op
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn num_qubits(&self) -> usize {
        self.op.num_qubits()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.op.diagonal_real()
    }

    pub fn purity(&self) -> f64 {
        self.op.trace_product(&self.op).re
    }

    /// `tr[A ρ]`.
    pub fn expectation(&self, a: &Operator) -> C64 {
        a.trace_product(&self.op)
    }

    /// `G ρ G†`; `gate` must be unitary and dimension-matched.
    pub fn apply_gate(&self, gate: &Operator) -> Result<Self> {
        if gate.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: gate.dim(),
            });
        }
        let dev = gate.unitary_deviation();
        if dev > TOL {
            return Err(Error::NotUnitary(dev));
        }
        Ok(Self::new_unchecked(self.op.conjugate_by(gate)))
    }

    /// `P ρ P` for a Pauli string.
    pub fn apply_pauli(&self, p: &PauliString) -> Self {
        Self::new_unchecked(p.conjugate(&self.op))
    }
}

/// `|+_θ⟩^⊗n` with `|+_θ⟩ = (|0⟩ + e^{iθ}|1⟩)/√2`.
pub fn plus_theta_state(theta: f64, n: usize) -> DensityState {
    assert!(n >= 1);
    let dim = 1usize << n;
    let amp = (dim as f64).sqrt().recip();
    let psi: Vec<C64> = (0..dim)
        .map(|y| C64::from_polar(amp, theta * hamming_weight(y) as f64))
        .collect();
    DensityState::new_unchecked(Operator::outer(&psi))
}

/// `1/2^n`.
pub fn maximally_mixed(n: usize) -> DensityState {
    assert!(n >= 1);
    let dim = 1usize << n;
    DensityState::new_unchecked(Operator::identity(dim).scale(C64::from(1.0 / dim as f64)))
}

/// `(|0…0⟩ + e^{iφ}|1…1⟩)/√2`.
pub fn cat_state(n: usize, phi: f64) -> DensityState {
    assert!(n >= 1);
    let dim = 1usize << n;
    let mut psi = vec![ZERO; dim];
    psi[0] = C64::from(FRAC_1_SQRT_2);
    psi[dim - 1] = C64::from_polar(FRAC_1_SQRT_2, phi);
    DensityState::new_unchecked(Operator::outer(&psi))
}

/// `(|0…0⟩ + |1…1⟩)/√2`.
pub fn ghz_state(n: usize) -> DensityState {
    assert!(n >= 2);
    cat_state(n, 0.0)
}

/// Four-qubit `(|0000⟩ + e^{3πi/4}|1111⟩)/√2`.
pub fn mermin_state() -> DensityState {
    cat_state(4, 3.0 * PI / 4.0)
}
