//! Quantum-noise elimination by IZ dephasing, XY twirling and Pauli twirling.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noisemodel::{born_probabilities, sample_histogram, ProbVector, SeededRng};
use crate::povm::{diagonal_paulis, povm_to_ptm, ptm_to_povm, Povm, Ptm};
use crate::qcore::{hamming_weight, DensityState, Pauli, PauliString};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TwirlMethod {
    Iz,
    Xy,
    Pauli,
}

impl TwirlMethod {
    pub const ALL: [TwirlMethod; 3] = [TwirlMethod::Iz, TwirlMethod::Xy, TwirlMethod::Pauli];

    /// `{I,Z}^n`, `{X,Y}^n` or `{I,X,Y,Z}^n`.
    pub fn twirl_set(self, n: usize) -> Vec<PauliString> {
        match self {
            TwirlMethod::Iz => PauliString::product_set(&[Pauli::I, Pauli::Z], n),
            TwirlMethod::Xy => PauliString::product_set(&[Pauli::X, Pauli::Y], n),
            TwirlMethod::Pauli => PauliString::all(n),
        }
    }

    pub fn twirl_set_size(self, n: usize) -> usize {
        match self {
            TwirlMethod::Iz | TwirlMethod::Xy => 1 << n,
            TwirlMethod::Pauli => 1 << (2 * n),
        }
    }

    /// Uniform draw from the twirl set.
    pub fn sample(self, n: usize, rng: &mut SeededRng) -> PauliString {
        let alphabet: &[Pauli] = match self {
            TwirlMethod::Iz => &[Pauli::I, Pauli::Z],
            TwirlMethod::Xy => &[Pauli::X, Pauli::Y],
            TwirlMethod::Pauli => &Pauli::ALL,
        };
        PauliString::new(
            (0..n)
                .map(|_| alphabet[rng.random_range(0..alphabet.len())])
                .collect(),
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            TwirlMethod::Iz => "iz",
            TwirlMethod::Xy => "xy",
            TwirlMethod::Pauli => "pauli",
        }
    }
}

impl std::str::FromStr for TwirlMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "iz" => Ok(TwirlMethod::Iz),
            "xy" => Ok(TwirlMethod::Xy),
            "pauli" => Ok(TwirlMethod::Pauli),
            other => Err(Error::InvalidArgument(format!("unknown twirl method '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EliminationMode {
    /// `K` Paulis drawn uniformly with replacement.
    Sampled,
    /// Every element of the twirl set exactly once.
    Exhaustive,
    /// Born probabilities of the effective POVM.
    Analytic,
}

impl std::str::FromStr for EliminationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sampled" => Ok(EliminationMode::Sampled),
            "exhaustive" => Ok(EliminationMode::Exhaustive),
            "analytic" => Ok(EliminationMode::Analytic),
            other => Err(Error::InvalidArgument(format!("unknown elimination mode '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EliminationConfig {
    pub method: TwirlMethod,
    /// Number of sampled Paulis (sampled mode only).
    pub k: usize,
    /// Shots per Pauli, or in total for analytic mode; `None` uses exact probabilities.
    pub shots: Option<u64>,
    pub mode: EliminationMode,
}

impl EliminationConfig {
    pub fn analytic(method: TwirlMethod) -> Self {
        Self {
            method,
            k: 0,
            shots: None,
            mode: EliminationMode::Analytic,
        }
    }

    pub fn exhaustive(method: TwirlMethod) -> Self {
        Self {
            method,
            k: 0,
            shots: None,
            mode: EliminationMode::Exhaustive,
        }
    }
}

/// Flips bit `q` of `x` iff letter `q` of `pauli` is X or Y.
pub fn outcome_relabel(x: usize, pauli: &PauliString) -> usize {
    x ^ pauli.flip_mask()
}

fn xy_twirl_ptm(ptm: &Ptm) -> Ptm {
    let n = ptm.num_qubits();
    let d2 = 1usize << (2 * n);
    let diag = diagonal_paulis(n);
    let mut out = nalgebra::DMatrix::zeros(d2, d2);
    for &(i, zi) in &diag {
        for &(j, zj) in &diag {
            let sign = if (hamming_weight(zi) + hamming_weight(zj)).is_multiple_of(2) {
                1.0
            } else {
                -1.0
            };
            out[(i, j)] = sign * ptm.get(i, j);
        }
    }
    Ptm::new(n, out).expect("same shape")
}

fn pauli_twirl_ptm(ptm: &Ptm) -> Ptm {
    let n = ptm.num_qubits();
    let d2 = 1usize << (2 * n);
    let mut out = nalgebra::DMatrix::zeros(d2, d2);
    for (i, _) in diagonal_paulis(n) {
        out[(i, i)] = ptm.get(i, i);
    }
    Ptm::new(n, out).expect("same shape")
}

/// Exact POVM of the twirled-and-relabeled measurement.
pub fn effective_povm(povm: &Povm, method: TwirlMethod) -> Povm {
    match method {
        TwirlMethod::Iz => Povm::new_unchecked(povm.elements().iter().map(|e| e.dephased()).collect()),
        TwirlMethod::Xy => ptm_to_povm(&xy_twirl_ptm(&povm_to_ptm(povm)))
            .expect("twirling a valid channel yields a valid channel"),
        TwirlMethod::Pauli => ptm_to_povm(&pauli_twirl_ptm(&povm_to_ptm(povm)))
            .expect("twirling a valid channel yields a valid channel"),
    }
}

fn relabeled(p: &[f64], mask: usize) -> Vec<f64> {
    (0..p.len()).map(|x| p[x ^ mask]).collect()
}

fn one_pauli(
    povm: &Povm,
    state: &DensityState,
    pauli: &PauliString,
    shots: Option<u64>,
    rng: &mut SeededRng,
) -> Result<Vec<f64>> {
    let p = born_probabilities(povm, &state.apply_pauli(pauli))?;
    let observed = match shots {
        None => p.p,
        Some(s) => sample_histogram(&p, s, rng).frequencies(),
    };
    Ok(relabeled(&observed, pauli.flip_mask()))
}

/// Mean of the relabeled distributions over the twirl.
pub fn run_elimination(
    povm: &Povm,
    state: &DensityState,
    cfg: &EliminationConfig,
    rng: &SeededRng,
) -> Result<ProbVector> {
    let n = povm.num_qubits();
    if state.dim() != povm.dim() {
        return Err(Error::DimensionMismatch {
            expected: povm.dim(),
            got: state.dim(),
        });
    }
    if cfg.shots == Some(0) {
        return Err(Error::InvalidArgument("shots must be positive".into()));
    }
    let paulis = match cfg.mode {
        EliminationMode::Analytic => {
            let p = born_probabilities(&effective_povm(povm, cfg.method), state)?;
            return Ok(match cfg.shots {
                None => p,
                Some(s) => sample_histogram(&p, s, &mut rng.substream(0)).to_prob_vector(),
            });
        }
        EliminationMode::Exhaustive => cfg.method.twirl_set(n),
        EliminationMode::Sampled => {
            if cfg.k == 0 {
                return Err(Error::InvalidArgument("sampled mode needs k >= 1".into()));
            }
            let mut draw = rng.substream(u64::MAX);
            (0..cfg.k).map(|_| cfg.method.sample(n, &mut draw)).collect()
        }
    };
    let parts = paulis
        .par_iter()
        .enumerate()
        .map(|(k, pauli)| one_pauli(povm, state, pauli, cfg.shots, &mut rng.substream(k as u64)))
        .collect::<Result<Vec<_>>>()?;
    let mut mean = vec![0.0; povm.dim()];
    for part in &parts {
        mean.iter_mut().zip(part).for_each(|(m, v)| *m += v);
    }
    let count = parts.len() as f64;
    mean.iter_mut().for_each(|m| *m /= count);
    ProbVector::new(mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::{run_detection, DetectionConfig, EstimationMode};
    use crate::noisemodel::ry_measurement;
    use crate::povm::{is_classical, measurement_fidelity};
    use crate::qcore::{plus_theta_state, Operator, C64};
    use crate::random::{random_povm, test_rng};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    const A: f64 = PI / 40.0;

    /// `Π^T_x = |T|^{-1} Σ_P P Π_{relabel(x,P)} P`.
    fn enumerated(povm: &Povm, method: TwirlMethod) -> Povm {
        let n = povm.num_qubits();
        let set = method.twirl_set(n);
        let w = C64::from(1.0 / set.len() as f64);
        Povm::new_unchecked(
            (0..povm.dim())
                .map(|x| {
                    set.iter().fold(Operator::zeros(povm.dim()), |acc, p| {
                        &acc + &p.conjugate(povm.element(outcome_relabel(x, p))).scale(w)
                    })
                })
                .collect(),
        )
    }

    #[test]
    fn twirl_set_sizes() {
        for n in 1..=3 {
            for m in TwirlMethod::ALL {
                assert_eq!(m.twirl_set(n).len(), m.twirl_set_size(n));
            }
        }
    }

    #[test]
    fn relabel_examples() {
        let p = |s: &str| s.parse::<PauliString>().unwrap();
        assert_eq!(outcome_relabel(0b010, &p("XXX")), 0b101);
        assert_eq!(outcome_relabel(0b010, &p("IZI")), 0b010);
        assert_eq!(outcome_relabel(0b0110, &p("XZYI")), 0b1100);
    }

    #[test]
    fn effective_matches_enumeration() {
        let mut rng = test_rng(21);
        for n in 1..=3 {
            let povm = random_povm(n, &mut rng);
            for m in TwirlMethod::ALL {
                let fast = effective_povm(&povm, m);
                let slow = enumerated(&povm, m);
                for x in 0..povm.dim() {
                    assert!(fast.element(x).max_abs_diff(slow.element(x)) < 1e-12, "{m:?} n={n}");
                }
            }
        }
    }

    #[test]
    fn effective_examples() {
        let ideal = Povm::ideal(2);
        for m in TwirlMethod::ALL {
            let e = effective_povm(&ideal, m);
            for x in 0..4 {
                assert!(e.element(x).max_abs_diff(ideal.element(x)) < 1e-14);
            }
        }
        let iz = effective_povm(&ry_measurement(1, A), TwirlMethod::Iz);
        assert_eq!(iz.element(0).max_offdiag_abs(), 0.0);
        assert_abs_diff_eq!(iz.element(0).get(0, 0).re, A.cos().powi(2), epsilon = 1e-15);
        assert_abs_diff_eq!(iz.element(0).get(1, 1).re, A.sin().powi(2), epsilon = 1e-15);
        let ry = ry_measurement(3, A);
        for m in TwirlMethod::ALL {
            let e = effective_povm(&ry, m);
            assert!(is_classical(&e, 1e-12));
            assert_abs_diff_eq!(measurement_fidelity(&e), measurement_fidelity(&ry), epsilon = 1e-12);
        }
    }

    #[test]
    fn elimination_examples() {
        let plus = plus_theta_state(0.0, 1);
        let p = run_elimination(&Povm::ideal(1), &plus, &EliminationConfig::exhaustive(TwirlMethod::Iz), &test_rng(0)).unwrap();
        assert_abs_diff_eq!(p.p[0], 0.5, epsilon = 1e-15);
        let zero = DensityState::basis(0, 1);
        let ry = ry_measurement(1, A);
        for m in TwirlMethod::ALL {
            let p = run_elimination(&ry, &zero, &EliminationConfig::exhaustive(m), &test_rng(0)).unwrap();
            let oracle = born_probabilities(&effective_povm(&ry, m), &zero).unwrap();
            assert!(oracle.l1_distance(&p.p) < 1e-14);
        }
        let p = run_elimination(&ry, &zero, &EliminationConfig::exhaustive(TwirlMethod::Iz), &test_rng(0)).unwrap();
        assert_abs_diff_eq!(p.p[0], A.cos().powi(2), epsilon = 1e-15);
    }

    #[test]
    fn pauli_eliminated_device_has_no_fitted_noise() {
        let eff = effective_povm(&ry_measurement(3, A), TwirlMethod::Pauli);
        let cfg = DetectionConfig {
            k: 40,
            shots: 1,
            seed: 3,
            harmonics: None,
            mode: EstimationMode::Analytic,
        };
        for fit in run_detection(&eff, &cfg).unwrap() {
            assert!(fit.series.max_abs_coefficient() < 1e-10);
        }
    }

    #[test]
    fn sampled_mode_is_reproducible_and_unbiased() {
        let povm = random_povm(2, &mut test_rng(8));
        let state = plus_theta_state(0.3, 2);
        let cfg = EliminationConfig {
            method: TwirlMethod::Pauli,
            k: 16,
            shots: Some(256),
            mode: EliminationMode::Sampled,
        };
        let a = run_elimination(&povm, &state, &cfg, &SeededRng::new(4, 1)).unwrap();
        let b = run_elimination(&povm, &state, &cfg, &SeededRng::new(4, 1)).unwrap();
        assert_eq!(a, b);
        let oracle = born_probabilities(&effective_povm(&povm, TwirlMethod::Pauli), &state).unwrap();
        let runs = 200;
        let mut mean = vec![0.0; 4];
        for s in 0..runs {
            let r = run_elimination(&povm, &state, &cfg, &SeededRng::new(s, 2)).unwrap();
            mean.iter_mut().zip(&r.p).for_each(|(m, v)| *m += v / runs as f64);
        }
        // per-run variance is at most 1/(4·16) from the Pauli draw plus 1/(4·16·256) from shots
        let sigma = (1.0 / 64.0 / runs as f64).sqrt();
        for x in 0..4 {
            assert!((mean[x] - oracle.p[x]).abs() < 3.0 * sigma, "x={x}");
        }
    }
}
