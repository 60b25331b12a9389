//! Calibration matrices and classical readout-error mitigation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noisemodel::{born_probabilities, sample_histogram, ProbVector, SeededRng};
use crate::povm::Povm;
use crate::qcore::DensityState;

pub const LSQ_MAX_ITERS: usize = 10_000;
pub const LSQ_TOL: f64 = 1e-10;
pub const IBU_ITERS: usize = 100;
pub const IBU_TOL: f64 = 1e-8;

/// `A[x][y] = P(outcome x | basis input y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationMatrix {
    n: usize,
    a: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CalibrationFile {
    n: usize,
    #[serde(rename = "A")]
    a: Vec<f64>,
}

impl CalibrationMatrix {
    /// Checks shape and column sums (within `1e-9`); entries may carry small
    /// statistical slack but must be finite.
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        let dim = a.nrows();
        if a.ncols() != dim || dim < 2 || !dim.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(dim));
        }
        for y in 0..dim {
            let col = a.column(y);
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::NotStochastic(format!("column {y} has a non-finite entry")));
            }
            let s: f64 = col.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::NotStochastic(format!("column {y} sums to {s}")));
            }
        }
        Ok(Self {
            n: dim.trailing_zeros() as usize,
            a,
        })
    }

    pub fn identity(n: usize) -> Self {
        let dim = 1usize << n;
        Self {
            n,
            a: DMatrix::identity(dim, dim),
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn to_json(&self) -> Result<String> {
        let dim = self.dim();
        let mut a = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                a.push(self.a[(r, c)]);
            }
        }
        Ok(serde_json::to_string_pretty(&CalibrationFile { n: self.n, a })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: CalibrationFile = serde_json::from_str(s)?;
        if f.n == 0 || f.n > 6 {
            return Err(Error::InvalidArgument(format!("unsupported qubit count {}", f.n)));
        }
        let dim = 1usize << f.n;
        if f.a.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: f.a.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(dim, dim, &f.a))
    }
}

#[derive(Debug)]
pub enum CalibrationMode<'a> {
    Analytic,
    Shots { shots: u64, rng: &'a SeededRng },
}

/// Analytic: `A[x][y] = ⟨y|Π_x|y⟩`; shots: empirical frequencies per basis input.
pub fn calibrate(povm: &Povm, mode: CalibrationMode<'_>) -> Result<CalibrationMatrix> {
    let dim = povm.dim();
    let n = povm.num_qubits();
    let mut a = DMatrix::zeros(dim, dim);
    for y in 0..dim {
        let col = match &mode {
            CalibrationMode::Analytic => (0..dim).map(|x| povm.element(x).get(y, y).re).collect(),
            CalibrationMode::Shots { shots, rng } => {
                if *shots == 0 {
                    return Err(Error::InvalidArgument("shots must be positive".into()));
                }
                let p = born_probabilities(povm, &DensityState::basis(y, n))?;
                sample_histogram(&p, *shots, &mut rng.substream(y as u64)).frequencies()
            }
        };
        for x in 0..dim {
            a[(x, y)] = col[x];
        }
    }
    CalibrationMatrix::new(a)
}

/// Output of [`mitigate_inverse`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InverseResult {
    /// `A⁻¹ p`, unclamped.
    pub q: Vec<f64>,
    /// 2-norm condition number of `A`.
    pub condition_number: f64,
    pub has_negative: bool,
}

fn check_dims(a: &CalibrationMatrix, p: &ProbVector) -> Result<()> {
    if a.dim() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: p.dim(),
        });
    }
    Ok(())
}

/// `q = A⁻¹ p`.
pub fn mitigate_inverse(a: &CalibrationMatrix, p: &ProbVector) -> Result<InverseResult> {
    check_dims(a, p)?;
    let sv = a.a.singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    if smin <= smax * f64::EPSILON * a.dim() as f64 {
        return Err(Error::SingularMatrix);
    }
    let lu = a.a.clone().lu();
    let q = lu
        .solve(&DVector::from_column_slice(&p.p))
        .ok_or(Error::SingularMatrix)?;
    let q: Vec<f64> = q.iter().copied().collect();
    Ok(InverseResult {
        has_negative: q.iter().any(|&v| v < 0.0),
        condition_number: smax / smin,
        q,
    })
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            tau = t;
        }
    }
    v.iter().map(|&x| (x - tau).max(0.0)).collect()
}

/// `argmin ‖Aq − p‖₂` over the probability simplex.
pub fn mitigate_least_squares(a: &CalibrationMatrix, p: &ProbVector) -> Result<ProbVector> {
    check_dims(a, p)?;
    // a feasible unconstrained minimizer is the constrained one
    if let Ok(inv) = mitigate_inverse(a, p) {
        if inv.q.iter().all(|&v| v >= -1e-12) {
            return ProbVector::new(inv.q);
        }
    }
    let am = &a.a;
    let ata = am.transpose() * am;
    let lipschitz = ata.symmetric_eigenvalues().amax();
    if lipschitz.is_nan() || lipschitz <= 0.0 {
        return Err(Error::SingularMatrix);
    }
    let step = 1.0 / lipschitz;
    let atp = am.transpose() * DVector::from_column_slice(&p.p);
    let dim = a.dim();
    let mut q = DVector::from_element(dim, 1.0 / dim as f64);
    let mut change = f64::INFINITY;
    for _ in 0..LSQ_MAX_ITERS {
        let grad = &ata * &q - &atp;
        let next = project_simplex((&q - grad * step).as_slice());
        let next = DVector::from_vec(next);
        change = (&next - &q).amax();
        q = next;
        if change < LSQ_TOL {
            return ProbVector::new(q.iter().copied().collect());
        }
    }
    Err(Error::NonConvergence {
        iterations: LSQ_MAX_ITERS,
        residual: change,
    })
}

/// Iterative Bayesian unfolding from the uniform prior.
pub fn mitigate_ibu(a: &CalibrationMatrix, p: &ProbVector, iters: usize, tol: f64) -> Result<ProbVector> {
    check_dims(a, p)?;
    if iters == 0 {
        return Err(Error::InvalidArgument("ibu needs at least one iteration".into()));
    }
    let dim = a.dim();
    let am = &a.a;
    let mut t = vec![1.0 / dim as f64; dim];
    for _ in 0..iters {
        let pred: Vec<f64> = (0..dim)
            .map(|x| (0..dim).map(|y| am[(x, y)] * t[y]).sum())
            .collect();
        for x in 0..dim {
            if pred[x] <= 0.0 && p.p[x] > 0.0 {
                return Err(Error::DegenerateCalibration { outcome: x });
            }
        }
        let next: Vec<f64> = (0..dim)
            .map(|y| {
                let s: f64 = (0..dim)
                    .filter(|&x| p.p[x] > 0.0)
                    .map(|x| am[(x, y)] * p.p[x] / pred[x])
                    .sum();
                t[y] * s
            })
            .collect();
        let change: f64 = next.iter().zip(&t).map(|(a, b)| (a - b).abs()).sum();
        t = next;
        if change < tol {
            break;
        }
    }
    ProbVector::new(t)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mitigator {
    None,
    Inverse,
    Lsq,
    Ibu,
}

impl Mitigator {
    pub const CORRECTING: [Mitigator; 3] = [Mitigator::Inverse, Mitigator::Lsq, Mitigator::Ibu];

    /// Corrected (quasi-)distribution; only `Inverse` may leave the simplex.
    pub fn apply(self, a: &CalibrationMatrix, p: &ProbVector) -> Result<Vec<f64>> {
        Ok(match self {
            Mitigator::None => p.p.clone(),
            Mitigator::Inverse => mitigate_inverse(a, p)?.q,
            Mitigator::Lsq => mitigate_least_squares(a, p)?.p,
            Mitigator::Ibu => mitigate_ibu(a, p, IBU_ITERS, IBU_TOL)?.p,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Mitigator::None => "none",
            Mitigator::Inverse => "inverse",
            Mitigator::Lsq => "lsq",
            Mitigator::Ibu => "ibu",
        }
    }
}

impl std::str::FromStr for Mitigator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Mitigator::None),
            "inverse" => Ok(Mitigator::Inverse),
            "lsq" | "least-squares" => Ok(Mitigator::Lsq),
            "ibu" => Ok(Mitigator::Ibu),
            other => Err(Error::InvalidArgument(format!("unknown mitigator '{other}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noisemodel::{confusion_measurement, ry_measurement};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn two_by_two() -> CalibrationMatrix {
        CalibrationMatrix::new(DMatrix::from_row_slice(2, 2, &[0.9, 0.2, 0.1, 0.8])).unwrap()
    }

    fn half() -> ProbVector {
        ProbVector::new(vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn calibration_examples() {
        assert_eq!(calibrate(&Povm::ideal(2), CalibrationMode::Analytic).unwrap(), CalibrationMatrix::identity(2));
        let a0 = DMatrix::from_row_slice(2, 2, &[0.97, 0.05, 0.03, 0.95]);
        let cal = calibrate(&confusion_measurement(&a0).unwrap(), CalibrationMode::Analytic).unwrap();
        assert_eq!(cal.matrix(), &a0);
        let a = PI / 40.0;
        let cal = calibrate(&ry_measurement(1, a), CalibrationMode::Analytic).unwrap();
        let (c2, s2) = (a.cos().powi(2), a.sin().powi(2));
        let expect = [[c2, s2], [s2, c2]];
        for r in 0..2 {
            for c in 0..2 {
                assert_abs_diff_eq!(cal.matrix()[(r, c)], expect[r][c], epsilon = 1e-15);
            }
        }
        let rng = SeededRng::new(1, 0);
        let shot = calibrate(&ry_measurement(1, a), CalibrationMode::Shots { shots: 100_000, rng: &rng }).unwrap();
        assert!((shot.matrix() - cal.matrix()).amax() < 0.005);
    }

    #[test]
    fn json_roundtrip() {
        let cal = two_by_two();
        assert_eq!(CalibrationMatrix::from_json(&cal.to_json().unwrap()).unwrap(), cal);
        assert!(CalibrationMatrix::from_json(r#"{"n":1,"A":[1,0,0]}"#).is_err());
        assert!(CalibrationMatrix::from_json(r#"{"n":1,"A":[0.5,0,0,1]}"#).is_err());
    }

    #[test]
    fn inverse_examples() {
        let p = ProbVector::new(vec![0.2, 0.3, 0.1, 0.4]).unwrap();
        assert_eq!(mitigate_inverse(&CalibrationMatrix::identity(2), &p).unwrap().q, p.p);
        let r = mitigate_inverse(&two_by_two(), &half()).unwrap();
        assert_abs_diff_eq!(r.q[0], 3.0 / 7.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.q[1], 4.0 / 7.0, epsilon = 1e-12);
        assert!(!r.has_negative);
        let sing = CalibrationMatrix::new(DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5])).unwrap();
        assert!(matches!(mitigate_inverse(&sing, &half()), Err(Error::SingularMatrix)));
        let q = [0.1, 0.2, 0.3, 0.4];
        let a0 = DMatrix::from_row_slice(
            4,
            4,
            &[0.9, 0.05, 0.02, 0.0, 0.05, 0.9, 0.0, 0.03, 0.05, 0.0, 0.95, 0.07, 0.0, 0.05, 0.03, 0.9],
        );
        let p = ProbVector::new((&a0 * DVector::from_column_slice(&q)).iter().copied().collect()).unwrap();
        let r = mitigate_inverse(&CalibrationMatrix::new(a0).unwrap(), &p).unwrap();
        for (a, b) in r.q.iter().zip(q) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn negative_inverse_and_lsq_grid_oracle() {
        let a = two_by_two();
        for p0 in [0.95, 0.99, 0.05, 0.12] {
            let p = ProbVector::new(vec![p0, 1.0 - p0]).unwrap();
            let inv = mitigate_inverse(&a, &p).unwrap();
            let lsq = mitigate_least_squares(&a, &p).unwrap();
            // brute-force grid over the 1-simplex
            let mut best = (f64::INFINITY, 0.0);
            for k in 0..=1000 {
                let q0 = k as f64 / 1000.0;
                let r0 = 0.9 * q0 + 0.2 * (1.0 - q0) - p0;
                let r1 = 0.1 * q0 + 0.8 * (1.0 - q0) - (1.0 - p0);
                let cost = r0 * r0 + r1 * r1;
                if cost < best.0 {
                    best = (cost, q0);
                }
            }
            assert!((lsq.p[0] - best.1).abs() <= 1e-3, "p0={p0}");
            if !inv.has_negative {
                assert_abs_diff_eq!(lsq.p[0], inv.q[0], epsilon = 1e-6);
            }
        }
        let p = ProbVector::new(vec![0.95, 0.05]).unwrap();
        assert!(mitigate_inverse(&a, &p).unwrap().has_negative);
    }

    #[test]
    fn simplex_projection() {
        assert_eq!(project_simplex(&[0.2, 0.8]), vec![0.2, 0.8]);
        assert_eq!(project_simplex(&[2.0, 0.0]), vec![1.0, 0.0]);
        let v = project_simplex(&[0.5, 0.5, 0.5]);
        assert!(v.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn ibu_examples() {
        let p = ProbVector::new(vec![0.2, 0.3, 0.1, 0.4]).unwrap();
        let r = mitigate_ibu(&CalibrationMatrix::identity(2), &p, 1, IBU_TOL).unwrap();
        for (a, b) in r.p.iter().zip(&p.p) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
        let r = mitigate_ibu(&two_by_two(), &half(), 100, IBU_TOL).unwrap();
        assert_abs_diff_eq!(r.p[0], 0.4286, epsilon = 1e-3);
        assert_abs_diff_eq!(r.p[1], 0.5714, epsilon = 1e-3);
        let a = CalibrationMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 0.0])).unwrap();
        assert!(matches!(
            mitigate_ibu(&a, &half(), 10, IBU_TOL),
            Err(Error::DegenerateCalibration { outcome: 1 })
        ));
    }

    #[test]
    fn ibu_fixed_point() {
        let a = two_by_two();
        let q = [3.0 / 7.0, 4.0 / 7.0];
        let pred = a.matrix() * DVector::from_column_slice(&q);
        let p = ProbVector::new(pred.iter().copied().collect()).unwrap();
        let dim = 2;
        let next: Vec<f64> = (0..dim)
            .map(|y| q[y] * (0..dim).map(|x| a.matrix()[(x, y)] * p.p[x] / pred[x]).sum::<f64>())
            .collect();
        for y in 0..dim {
            assert_abs_diff_eq!(next[y], q[y], epsilon = 1e-15);
        }
    }
}
