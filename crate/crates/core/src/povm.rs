//! POVM and Pauli-transfer-matrix representations of measurement devices,
//! plus the quantities computed from them: classicality, witness values,
//! Fourier coefficients of the witness curve, fidelity and coherence.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{hamming_weight, plus_theta_state, Operator, PauliString, C64, TOL};

/// Default off-diagonal threshold for [`is_classical`].
pub const CLASSICAL_TOL: f64 = 1e-8;

/// Tolerance on `Σ_x Π_x = 1`.
pub const COMPLETENESS_TOL: f64 = 1e-8;

/// Ordered POVM on `n` qubits with one element per outcome bitstring.
#[derive(Clone, Debug, PartialEq)]
pub struct Povm {
    n: usize,
    elements: Vec<Operator>,
}

impl Povm {
    /// Validates element count, dimensions, Hermiticity, PSD and completeness.
    pub fn new(elements: Vec<Operator>) -> Result<Self> {
        let count = elements.len();
        if count < 2 || !count.is_power_of_two() {
            return Err(Error::InvalidPovm(format!("{count} elements is not 2^n")));
        }
        let n = count.trailing_zeros() as usize;
        let dim = count;
        for (x, e) in elements.iter().enumerate() {
            if e.dim() != dim {
                return Err(Error::InvalidPovm(format!(
                    "element {x} has dimension {}, expected {dim}",
                    e.dim()
                )));
            }
            let dev = e.hermitian_deviation();
            if dev > TOL {
                return Err(Error::InvalidPovm(format!("element {x} not Hermitian ({dev:.3e})")));
            }
            let min = e.min_eigenvalue();
            if min < -TOL {
                return Err(Error::InvalidPovm(format!("element {x} has eigenvalue {min:.3e}")));
            }
        }
        let sum = elements
            .iter()
            .skip(1)
            .fold(elements[0].clone(), |acc, e| &acc + e);
        let dev = sum.max_abs_diff(&Operator::identity(dim));
        if dev > COMPLETENESS_TOL {
            return Err(Error::InvalidPovm(format!("elements sum to identity only within {dev:.3e}")));
        }
        Ok(Self { n, elements })
    }

    pub(crate) fn new_unchecked(elements: Vec<Operator>) -> Self {
        let n = elements.len().trailing_zeros() as usize;
        Self { n, elements }
    }

    /// Ideal computational-basis measurement.
    pub fn ideal(n: usize) -> Self {
        Self::new_unchecked((0..1 << n).map(|x| Operator::projector(x, n)).collect())
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn elements(&self) -> &[Operator] {
        &self.elements
    }

    pub fn element(&self, x: usize) -> &Operator {
        &self.elements[x]
    }

    /// Largest off-diagonal modulus over all elements.
    pub fn max_offdiag_abs(&self) -> f64 {
        self.elements
            .iter()
            .map(Operator::max_offdiag_abs)
            .fold(0.0, f64::max)
    }

    /// Elementwise `p·self + (1-p)·other`.
    pub fn mix(&self, p: f64, other: &Povm) -> Result<Povm> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: other.n,
            });
        }
        Ok(Self::new_unchecked(
            self.elements
                .iter()
                .zip(&other.elements)
                .map(|(a, b)| &a.scale(C64::from(p)) + &b.scale(C64::from(1.0 - p)))
                .collect(),
        ))
    }

    /// `{Π¹_x ⊗ Π²_y}` indexed by the concatenated bitstring `xy`.
    pub fn tensor(&self, other: &Povm) -> Povm {
        let mut elements = Vec::with_capacity(self.elements.len() * other.elements.len());
        for a in &self.elements {
            for b in &other.elements {
                elements.push(a.kron(b));
            }
        }
        Self::new_unchecked(elements)
    }

    /// `Π_x → G† Π_x G`; models a unitary applied before the device.
    pub fn precede_by(&self, g: &Operator) -> Result<Povm> {
        if g.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: g.dim(),
            });
        }
        let dev = g.unitary_deviation();
        if dev > TOL {
            return Err(Error::NotUnitary(dev));
        }
        let gd = g.adjoint();
        Ok(Self::new_unchecked(
            self.elements.iter().map(|e| e.conjugate_by(&gd)).collect(),
        ))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&PovmFile::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Povm> {
        let file: PovmFile = serde_json::from_str(s)?;
        file.try_into()
    }
}

/// On-disk POVM: `{"n": int, "elements": [[[re, im], ...row-major], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PovmFile {
    pub n: usize,
    pub elements: Vec<Vec<[f64; 2]>>,
}

impl From<&Povm> for PovmFile {
    fn from(p: &Povm) -> Self {
        let dim = p.dim();
        let elements = p
            .elements
            .iter()
            .map(|e| {
                let mut row_major = Vec::with_capacity(dim * dim);
                for r in 0..dim {
                    for c in 0..dim {
                        let v = e.get(r, c);
                        row_major.push([v.re, v.im]);
                    }
                }
                row_major
            })
            .collect();
        Self { n: p.n, elements }
    }
}

impl TryFrom<PovmFile> for Povm {
    type Error = Error;

    fn try_from(f: PovmFile) -> Result<Povm> {
        if f.n == 0 || f.n > 6 {
            return Err(Error::InvalidPovm(format!("unsupported qubit count {}", f.n)));
        }
        let dim = 1usize << f.n;
        if f.elements.len() != dim {
            return Err(Error::InvalidPovm(format!(
                "expected {dim} elements, found {}",
                f.elements.len()
            )));
        }
        let elements = f
            .elements
            .iter()
            .map(|e| {
                let entries: Vec<C64> = e.iter().map(|[re, im]| C64::new(*re, *im)).collect();
                Operator::from_rows(dim, &entries)
            })
            .collect::<Result<Vec<_>>>()?;
        Povm::new(elements)
    }
}

/// Real `4^n × 4^n` Pauli transfer matrix of a measurement channel.
#[derive(Clone, Debug, PartialEq)]
pub struct Ptm {
    n: usize,
    entries: DMatrix<f64>,
}

impl Ptm {
    pub fn new(n: usize, entries: DMatrix<f64>) -> Result<Self> {
        let d = 1usize << (2 * n);
        if entries.nrows() != d || entries.ncols() != d {
            return Err(Error::MalformedPtm(format!(
                "expected {d}x{d}, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        Ok(Self { n, entries })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn get_by_pauli(&self, row: &PauliString, col: &PauliString) -> f64 {
        self.entries[(row.index(), col.index())]
    }
}

/// Indices of `{I,Z}^n` within the lexicographic Pauli order, paired with the
/// Z-mask (index bits) of each string.
pub(crate) fn diagonal_paulis(n: usize) -> Vec<(usize, usize)> {
    (0..1usize << n)
        .map(|zmask| {
            // letter I has digit 0 and Z has digit 3
            let mut idx = 0usize;
            for q in 0..n {
                let bit = (zmask >> (n - 1 - q)) & 1;
                idx = idx * 4 + 3 * bit;
            }
            (idx, zmask)
        })
        .collect()
}

/// `⟨x|Z[mask]|x⟩`.
#[inline]
pub(crate) fn z_sign(mask: usize, x: usize) -> f64 {
    if hamming_weight(mask & x).is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// `[M]_ij = 2^{-n} Σ_x tr[Π_x P_j] ⟨x|P_i|x⟩`.
pub fn povm_to_ptm(povm: &Povm) -> Ptm {
    let n = povm.n;
    let dim = povm.dim();
    let d2 = dim * dim;
    let paulis = PauliString::all(n);
    // tr[Π_x P_j], real for Hermitian Π_x
    let traces: Vec<Vec<f64>> = povm
        .elements
        .iter()
        .map(|e| paulis.iter().map(|p| p.trace_with(e).re).collect())
        .collect();
    let mut entries = DMatrix::<f64>::zeros(d2, d2);
    let norm = 1.0 / dim as f64;
    for (i, zmask) in diagonal_paulis(n) {
        for j in 0..d2 {
            let s: f64 = (0..dim).map(|x| traces[x][j] * z_sign(zmask, x)).sum();
            entries[(i, j)] = s * norm;
        }
    }
    Ptm { n, entries }
}

/// `Π_x = 2^{-n} Σ_{i,j} ⟨x|P_i|x⟩ [M]_ij P_j`.
pub fn ptm_to_povm(ptm: &Ptm) -> Result<Povm> {
    let n = ptm.n;
    let dim = 1usize << n;
    let d2 = dim * dim;
    let paulis = PauliString::all(n);
    let diag = diagonal_paulis(n);
    let norm = 1.0 / dim as f64;
    let mut elements = Vec::with_capacity(dim);
    for x in 0..dim {
        let mut op = Operator::zeros(dim);
        let mut mat = op.matrix().clone();
        for j in 0..d2 {
            let coeff: f64 = diag
                .iter()
                .map(|&(i, zmask)| z_sign(zmask, x) * ptm.entries[(i, j)])
                .sum::<f64>()
                * norm;
            if coeff == 0.0 {
                continue;
            }
            let p = &paulis[j];
            for col in 0..dim {
                let (row, phase) = p.action(col);
                mat[(row, col)] += phase * coeff;
            }
        }
        op = Operator::from_matrix(mat)?;
        elements.push(op);
    }
    for (x, e) in elements.iter().enumerate() {
        let dev = e.hermitian_deviation();
        if dev > TOL {
            return Err(Error::MalformedPtm(format!("element {x} not Hermitian ({dev:.3e})")));
        }
        let min = e.min_eigenvalue();
        if min < -TOL {
            return Err(Error::MalformedPtm(format!(
                "reconstructed element {x} has eigenvalue {min:.3e}"
            )));
        }
    }
    Ok(Povm::new_unchecked(elements))
}

/// Every off-diagonal modulus of every element is below `tol`.
pub fn is_classical(povm: &Povm, tol: f64) -> bool {
    povm.max_offdiag_abs() < tol
}

/// Signed witness value `2^n · tr[(1/2^n − Φ_θ) Π_x]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub outcome: usize,
    pub theta: f64,
    pub value: f64,
}

/// Evaluates the `Φ_θ`-induced witness on element `outcome`.
pub fn witness_expectation(povm: &Povm, outcome: usize, theta: f64) -> WitnessReport {
    let e = povm.element(outcome);
    let probe = plus_theta_state(theta, povm.n);
    let dim = povm.dim() as f64;
    let value = e.trace().re - dim * e.trace_product(probe.operator()).re;
    WitnessReport {
        outcome,
        theta,
        value,
    }
}

/// Quantum-noise measure `|2^n tr[W_Φ^θ Π_x]|`.
pub fn noise_measure(povm: &Povm, outcome: usize, theta: f64) -> f64 {
    witness_expectation(povm, outcome, theta).value.abs()
}

/// Outcome-averaged measure `2^{-n} Σ_x Q(Π_x)`.
pub fn average_noise_measure(povm: &Povm, theta: f64) -> f64 {
    let dim = povm.dim();
    (0..dim).map(|x| noise_measure(povm, x, theta)).sum::<f64>() / dim as f64
}

/// Truncated trigonometric series `a_0 + Σ_h a_h cos hθ + b_h sin hθ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierSeries {
    /// Cosine coefficients `a_0..=a_H`.
    pub a: Vec<f64>,
    /// Sine coefficients `b_1..=b_H` stored at `b[h-1]`.
    pub b: Vec<f64>,
}

impl FourierSeries {
    pub fn zeros(harmonics: usize) -> Self {
        Self {
            a: vec![0.0; harmonics + 1],
            b: vec![0.0; harmonics],
        }
    }

    pub fn harmonics(&self) -> usize {
        self.b.len()
    }

    pub fn eval(&self, theta: f64) -> f64 {
        let mut v = self.a[0];
        for h in 1..=self.harmonics() {
            let (s, c) = (h as f64 * theta).sin_cos();
            v += self.a[h] * c + self.b[h - 1] * s;
        }
        v
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.a.iter().chain(&self.b).map(|v| v.abs()).fold(0.0, f64::max)
    }
}

/// Closed-form witness series of element `outcome`, grouped by `|h|` with
/// `h = |z| - |y|` over pairs `y < z`.
pub fn theoretical_fourier_coeffs(povm: &Povm, outcome: usize) -> FourierSeries {
    let n = povm.n;
    let dim = povm.dim();
    let e = povm.element(outcome);
    let mut series = FourierSeries::zeros(n);
    for y in 0..dim {
        for z in (y + 1)..dim {
            let v = e.get(y, z);
            let k = hamming_weight(z) as i64 - hamming_weight(y) as i64;
            let h = k.unsigned_abs() as usize;
            series.a[h] -= 2.0 * v.re;
            if k != 0 {
                series.b[h - 1] += 2.0 * k.signum() as f64 * v.im;
            }
        }
    }
    series
}

/// Assignment fidelity `2^{-n} Σ_x ⟨x|Π_x|x⟩`.
pub fn measurement_fidelity(povm: &Povm) -> f64 {
    let dim = povm.dim();
    (0..dim).map(|x| povm.element(x).get(x, x).re).sum::<f64>() / dim as f64
}

/// Fidelity read from the PTM diagonal: `2^{-n} Σ_{i∈{I,Z}^n} [M]_ii`.
pub fn fidelity_from_ptm(ptm: &Ptm) -> f64 {
    let n = ptm.n;
    diagonal_paulis(n).iter().map(|&(i, _)| ptm.get(i, i)).sum::<f64>() / (1usize << n) as f64
}

/// `ℓ∞`-coherence `Σ_x Σ_{y<z} |Π_x(y,z)|`.
pub fn linf_coherence(povm: &Povm) -> f64 {
    let dim = povm.dim();
    povm.elements
        .iter()
        .map(|e| {
            let mut s = 0.0;
            for y in 0..dim {
                for z in (y + 1)..dim {
                    s += e.get(y, z).norm();
                }
            }
            s
        })
        .sum()
}

/// `(T_x)_ij = (-1)^{(x ⊕ i)·j}`.
pub fn pauli_transition_matrix(x: usize, n: usize) -> DMatrix<f64> {
    let dim = 1usize << n;
    DMatrix::from_fn(dim, dim, |i, j| z_sign(x ^ i, j))
}

/// `W − D_W`: keeps only the off-diagonal part of a witness.
pub fn offdiagonal_witness(w: &Operator) -> Operator {
    w - &w.dephased()
}

/// `1/2^n − Φ_θ` as an explicit operator.
pub fn phi_witness(theta: f64, n: usize) -> Operator {
    let dim = 1usize << n;
    &Operator::identity(dim).scale(C64::from(1.0 / dim as f64)) - plus_theta_state(theta, n).operator()
}
