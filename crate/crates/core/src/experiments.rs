//! End-to-end pipelines: Mermin polynomial, GHZ parity oscillation and a
//! small VQE for H₂ driven by sequential minimal optimization.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, TAU};

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::EstimationMode;
use crate::eliminate::{effective_povm, run_elimination, EliminationConfig, EliminationMode};
use crate::error::{Error, Result};
use crate::mitigate::{calibrate, CalibrationMatrix, CalibrationMode, Mitigator};
use crate::noisemodel::{born_probabilities, sample_histogram, SeededRng};
use crate::povm::{z_sign, Povm};
use crate::qcore::{gates, ghz_state, hamming_weight, DensityState, Operator, Pauli, PauliString, C64};

/// Real linear combination of Pauli strings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hamiltonian {
    pub n: usize,
    pub terms: Vec<(f64, PauliString)>,
}

impl Hamiltonian {
    pub fn new(terms: Vec<(f64, PauliString)>) -> Result<Self> {
        let n = terms
            .first()
            .map(|(_, p)| p.num_qubits())
            .ok_or_else(|| Error::InvalidArgument("empty Hamiltonian".into()))?;
        if let Some((_, p)) = terms.iter().find(|(_, p)| p.num_qubits() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: p.num_qubits(),
            });
        }
        Ok(Self { n, terms })
    }

    pub fn to_operator(&self) -> Operator {
        let dim = 1usize << self.n;
        self.terms.iter().fold(Operator::zeros(dim), |acc, (c, p)| {
            &acc + &p.to_operator().scale(C64::from(*c))
        })
    }

    pub fn ground_energy(&self) -> f64 {
        ground_energy(&self.to_operator())
    }
}

/// Smallest eigenvalue of a Hermitian operator.
pub fn ground_energy(h: &Operator) -> f64 {
    h.min_eigenvalue()
}

fn pauli_term(n: usize, letters: &[(usize, Pauli)]) -> PauliString {
    let mut l = vec![Pauli::I; n];
    for &(q, p) in letters {
        l[q] = p;
    }
    PauliString::new(l)
}

/// Four-qubit H₂ Hamiltonian in the Jordan-Wigner encoding (15 terms).
pub fn h2_hamiltonian() -> Hamiltonian {
    use Pauli::{X, Y, Z};
    let t = |l: &[(usize, Pauli)]| pauli_term(4, l);
    let terms = vec![
        (-0.097066, t(&[])),
        (-0.045303, t(&[(0, X), (1, X), (2, Y), (3, Y)])),
        (0.045303, t(&[(0, X), (1, Y), (2, Y), (3, X)])),
        (0.045303, t(&[(0, Y), (1, X), (2, X), (3, Y)])),
        (-0.045303, t(&[(0, Y), (1, Y), (2, X), (3, X)])),
        (0.171413, t(&[(0, Z)])),
        (0.168689, t(&[(0, Z), (1, Z)])),
        (0.120625, t(&[(0, Z), (2, Z)])),
        (0.165928, t(&[(0, Z), (3, Z)])),
        (0.171413, t(&[(1, Z)])),
        (0.165928, t(&[(1, Z), (2, Z)])),
        (0.120625, t(&[(1, Z), (3, Z)])),
        (-0.223432, t(&[(2, Z)])),
        (0.174413, t(&[(2, Z), (3, Z)])),
        (-0.223432, t(&[(3, Z)])),
    ];
    Hamiltonian { n: 4, terms }
}

/// Basis change `Q` with `Q P Q†` diagonal, plus the parity support of `P`.
#[derive(Clone, Debug)]
pub struct ExpectationTask {
    pub observable: PauliString,
    pub rotation: Operator,
    pub support: usize,
}

impl ExpectationTask {
    pub fn new(observable: PauliString) -> Self {
        let per_qubit: Vec<Operator> = observable
            .letters()
            .iter()
            .map(|l| match l {
                Pauli::X => gates::hadamard(),
                Pauli::Y => &gates::hadamard() * &gates::s_dagger(),
                Pauli::I | Pauli::Z => Operator::identity(2),
            })
            .collect();
        Self {
            rotation: gates::product(&per_qubit),
            support: observable.support_mask(),
            observable,
        }
    }

    /// Measurement-basis key: letters with I and Z merged.
    pub fn basis_key(&self) -> String {
        self.observable
            .letters()
            .iter()
            .map(|l| match l {
                Pauli::X => 'X',
                Pauli::Y => 'Y',
                Pauli::I | Pauli::Z => 'Z',
            })
            .collect()
    }

    /// `Σ_x (−1)^{|x ∧ support|} q_x`.
    pub fn parity(&self, q: &[f64]) -> f64 {
        q.iter()
            .enumerate()
            .map(|(x, v)| z_sign(self.support, x) * v)
            .sum()
    }
}

/// Elimination, estimation and mitigation settings for one measurement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    pub elimination: Option<EliminationConfig>,
    pub mitigator: Mitigator,
    pub estimation: EstimationMode,
    /// Shots per measured basis in shot mode.
    pub shots: u64,
}

impl Pipeline {
    pub fn analytic() -> Self {
        Self {
            elimination: None,
            mitigator: Mitigator::None,
            estimation: EstimationMode::Analytic,
            shots: 0,
        }
    }

    pub fn with_elimination(mut self, cfg: Option<EliminationConfig>) -> Self {
        self.elimination = cfg;
        self
    }

    pub fn with_mitigator(mut self, m: Mitigator) -> Self {
        self.mitigator = m;
        self
    }

    pub fn with_shots(mut self, shots: u64) -> Self {
        self.estimation = EstimationMode::Shots;
        self.shots = shots;
        self
    }

    /// Resolves the effective device and its analytic calibration.
    pub fn prepare<'a>(&'a self, povm: &'a Povm) -> Result<PreparedPipeline<'a>> {
        if self.estimation == EstimationMode::Shots && self.shots == 0 {
            return Err(Error::InvalidArgument("shots must be positive".into()));
        }
        let device = match &self.elimination {
            None => povm.clone(),
            Some(cfg) => effective_povm(povm, cfg.method),
        };
        let calibration = calibrate(&device, CalibrationMode::Analytic)?;
        Ok(PreparedPipeline {
            pipeline: self,
            raw: povm,
            device,
            calibration,
        })
    }

    pub fn label(&self) -> String {
        match &self.elimination {
            None => "raw".into(),
            Some(cfg) => cfg.method.name().into(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PreparedPipeline<'a> {
    pipeline: &'a Pipeline,
    raw: &'a Povm,
    device: Povm,
    calibration: CalibrationMatrix,
}

impl PreparedPipeline<'_> {
    pub fn calibration(&self) -> &CalibrationMatrix {
        &self.calibration
    }

    /// Mitigated outcome (quasi-)distribution of `state`.
    pub fn distribution(&self, state: &DensityState, rng: &SeededRng) -> Result<Vec<f64>> {
        let p = self.pipeline;
        let shots = match p.estimation {
            EstimationMode::Analytic => None,
            EstimationMode::Shots => Some(p.shots),
        };
        let probs = match &p.elimination {
            Some(cfg) if cfg.mode != EliminationMode::Analytic => {
                let cfg = EliminationConfig { shots, ..cfg.clone() };
                run_elimination(self.raw, state, &cfg, rng)?
            }
            _ => {
                let exact = born_probabilities(&self.device, state)?;
                match shots {
                    None => exact,
                    Some(s) => sample_histogram(&exact, s, &mut rng.substream(0)).to_prob_vector(),
                }
            }
        };
        p.mitigator.apply(&self.calibration, &probs)
    }

    /// Estimates `Σ_i c_i ⟨P_i⟩`, measuring each distinct basis once.
    pub fn observable_sum(&self, state: &DensityState, terms: &[(f64, ExpectationTask)], rng: &SeededRng) -> Result<f64> {
        let mut cache: HashMap<String, Vec<f64>> = HashMap::new();
        let mut total = 0.0;
        for (k, (c, task)) in terms.iter().enumerate() {
            if task.support == 0 {
                total += c;
                continue;
            }
            let key = task.basis_key();
            if !cache.contains_key(&key) {
                let rotated = state.apply_gate(&task.rotation)?;
                let q = self.distribution(&rotated, &rng.substream(k as u64))?;
                cache.insert(key.clone(), q);
            }
            total += c * task.parity(&cache[&key]);
        }
        Ok(total)
    }
}

/// `⟨obs⟩` through the measurement pipeline.
pub fn pauli_expectation(
    povm: &Povm,
    state: &DensityState,
    obs: &PauliString,
    pipeline: &Pipeline,
    rng: &SeededRng,
) -> Result<f64> {
    let task = ExpectationTask::new(obs.clone());
    if task.support == 0 {
        return Ok(1.0);
    }
    let prepared = pipeline.prepare(povm)?;
    let rotated = state.apply_gate(&task.rotation)?;
    Ok(task.parity(&prepared.distribution(&rotated, rng)?))
}

/// `Σ_i α_i Q_i† R† (Σ_j β_{j|i} |j⟩⟨j|) R Q_i` for a noise unitary `R` before an
/// ideal measurement, with `β_{j|i}` the parity signs of term `i`.
pub fn transformed_hamiltonian(ham: &Hamiltonian, noise_gate: &Operator) -> Result<Operator> {
    transformed_hamiltonian_with(ham, noise_gate, None)
}

/// Same as [`transformed_hamiltonian`], with `β → A^{-T} β` when a calibration
/// matrix is given (inverse mitigation folded into the observable).
pub fn transformed_hamiltonian_with(
    ham: &Hamiltonian,
    noise_gate: &Operator,
    inverse_calibration: Option<&CalibrationMatrix>,
) -> Result<Operator> {
    let dim = 1usize << ham.n;
    if noise_gate.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: noise_gate.dim(),
        });
    }
    let dev = noise_gate.unitary_deviation();
    if dev > crate::qcore::TOL {
        return Err(Error::NotUnitary(dev));
    }
    let ainv_t = match inverse_calibration {
        None => None,
        Some(a) => Some(
            a.matrix()
                .clone()
                .try_inverse()
                .ok_or(Error::SingularMatrix)?
                .transpose(),
        ),
    };
    let mut out = Operator::zeros(dim);
    for (alpha, p) in &ham.terms {
        let task = ExpectationTask::new(p.clone());
        let beta: Vec<f64> = (0..dim).map(|j| z_sign(task.support, j)).collect();
        let beta = match &ainv_t {
            None => beta,
            Some(m) => (m * nalgebra::DVector::from_vec(beta)).iter().copied().collect(),
        };
        let rq = noise_gate * &task.rotation;
        let term = Operator::diagonal(&beta).conjugate_by(&rq.adjoint());
        out = &out + &term.scale(C64::from(*alpha));
    }
    Ok(out)
}

/// Mean and standard error over repetitions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub stderr: f64,
}

impl Stats {
    pub fn from_samples(v: &[f64]) -> Self {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = if v.len() > 1 {
            v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            stderr: (var / n).sqrt(),
        }
    }
}

/// Signed terms of the four-qubit Mermin polynomial.
pub fn mermin_terms() -> Vec<(f64, PauliString)> {
    let plus = [
        "XXXY", "XXYX", "XYXX", "YXXX", "XXYY", "XYXY", "XYYX", "YXXY", "YXYX", "YYXX",
    ];
    // the −YYYY sign makes the polynomial reach 8√2 on the target state
    let minus = ["XXXX", "XYYY", "YXYY", "YYXY", "YYYX", "YYYY"];
    plus.iter()
        .map(|s| (1.0, s.parse().expect("valid Pauli string")))
        .chain(minus.iter().map(|s| (-1.0, s.parse().expect("valid Pauli string"))))
        .collect()
}

fn tasks(terms: &[(f64, PauliString)]) -> Vec<(f64, ExpectationTask)> {
    terms
        .iter()
        .map(|(c, p)| (*c, ExpectationTask::new(p.clone())))
        .collect()
}

/// One estimate of the Mermin polynomial on the target state.
pub fn run_mermin(povm: &Povm, pipeline: &Pipeline, rng: &SeededRng) -> Result<f64> {
    if povm.num_qubits() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            got: povm.num_qubits(),
        });
    }
    let prepared = pipeline.prepare(povm)?;
    prepared.observable_sum(&crate::qcore::mermin_state(), &tasks(&mermin_terms()), rng)
}

/// Independent repetitions, each on its own substream of `seed`.
pub fn repeat<F>(repeats: usize, seed: u64, f: F) -> Result<Vec<f64>>
where
    F: Fn(&SeededRng) -> Result<f64> + Sync,
{
    let root = SeededRng::new(seed, 0);
    (0..repeats)
        .into_par_iter()
        .map(|r| f(&root.substream(r as u64)))
        .collect()
}

/// GHZ state after `U_φ = e^{iπσ_φ/4}` on every qubit.
pub fn rotated_ghz(n: usize, phi: f64) -> DensityState {
    let u = gates::xy_rotation(FRAC_PI_4, phi);
    let g = gates::product(&vec![u; n]);
    ghz_state(n).apply_gate(&g).expect("rotation is unitary")
}

/// Dense-matrix `tr[Z^{⊗n} ρ_φ]`.
pub fn ghz_parity_theory(n: usize, phi: f64) -> f64 {
    let z = PauliString::new(vec![Pauli::Z; n]);
    rotated_ghz(n, phi).expectation(&z.to_operator()).re
}

/// Parity `Σ_x (−1)^{|x|} p(x)` of the rotated GHZ state for each `φ`.
pub fn run_ghz_parity(povm: &Povm, phis: &[f64], pipeline: &Pipeline, rng: &SeededRng) -> Result<Vec<f64>> {
    let n = povm.num_qubits();
    if n < 2 {
        return Err(Error::InvalidArgument("GHZ parity needs at least 2 qubits".into()));
    }
    let prepared = pipeline.prepare(povm)?;
    phis.iter()
        .enumerate()
        .map(|(k, &phi)| {
            let q = prepared.distribution(&rotated_ghz(n, phi), &rng.substream(k as u64))?;
            Ok(q.iter()
                .enumerate()
                .map(|(x, v)| if hamming_weight(x).is_multiple_of(2) { *v } else { -*v })
                .sum())
        })
        .collect()
}

/// Layered Ry/CZ ansatz with `thetas[layer * n + qubit]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnsatzParams {
    pub n: usize,
    pub layers: usize,
    pub thetas: Vec<f64>,
}

impl AnsatzParams {
    pub fn random(n: usize, layers: usize, rng: &mut SeededRng) -> Self {
        Self {
            n,
            layers,
            thetas: (0..n * layers).map(|_| rng.random_range(0.0..TAU)).collect(),
        }
    }

    /// CZ pairs after layer `l`: `(0,1),(2,3),…` on even `l`, `(1,2),(3,4),…` on odd `l`.
    pub fn cz_pairs(&self, layer: usize) -> Vec<(usize, usize)> {
        let start = layer % 2;
        (start..self.n.saturating_sub(1))
            .step_by(2)
            .map(|q| (q, q + 1))
            .collect()
    }

    /// `|ψ(θ)⟩` from `|0…0⟩`.
    pub fn state_vector(&self) -> Vec<C64> {
        let n = self.n;
        let dim = 1usize << n;
        let mut psi = vec![C64::from(0.0); dim];
        psi[0] = C64::from(1.0);
        for l in 0..self.layers {
            for q in 0..n {
                let (s, c) = (self.thetas[l * n + q] / 2.0).sin_cos();
                let bit = 1usize << (n - 1 - q);
                for x in 0..dim {
                    if x & bit == 0 {
                        let (a, b) = (psi[x], psi[x | bit]);
                        psi[x] = a * c - b * s;
                        psi[x | bit] = a * s + b * c;
                    }
                }
            }
            for (a, b) in self.cz_pairs(l) {
                let mask = (1usize << (n - 1 - a)) | (1usize << (n - 1 - b));
                for (x, v) in psi.iter_mut().enumerate() {
                    if x & mask == mask {
                        *v = -*v;
                    }
                }
            }
        }
        psi
    }

    pub fn state(&self) -> DensityState {
        DensityState::from_pure(&self.state_vector()).expect("unitary evolution keeps the norm")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoConfig {
    pub layers: usize,
    pub max_sweeps: usize,
    pub tol: f64,
}

impl Default for SmoConfig {
    fn default() -> Self {
        Self {
            layers: 6,
            max_sweeps: 30,
            tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VqeTrace {
    /// Energy after each sweep; entry 0 is the initial point.
    pub energies: Vec<f64>,
    pub params: AnsatzParams,
}

impl VqeTrace {
    pub fn final_energy(&self) -> f64 {
        *self.energies.last().expect("trace holds the initial energy")
    }
}

/// Minimizer of `a + b cos(θ − c)` from samples at `θ0` and `θ0 ± π/2`.
pub fn smo_step(theta0: f64, f0: f64, fp: f64, fm: f64) -> f64 {
    theta0 - FRAC_PI_2 - (2.0 * f0 - fp - fm).atan2(fp - fm)
}

/// Cyclic single-parameter analytic minimization, qubit-major order.
pub fn run_vqe(povm: &Povm, ham: &Hamiltonian, pipeline: &Pipeline, opt: &SmoConfig, seed: u64) -> Result<VqeTrace> {
    let n = ham.n;
    if povm.num_qubits() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: povm.num_qubits(),
        });
    }
    let prepared = pipeline.prepare(povm)?;
    let terms = tasks(&ham.terms);
    let root = SeededRng::new(seed, 1);
    let mut evals = 0u64;
    let mut cost = |params: &AnsatzParams| -> Result<f64> {
        evals += 1;
        let e = prepared.observable_sum(&params.state(), &terms, &root.substream(evals))?;
        if e.is_finite() {
            Ok(e)
        } else {
            Err(Error::NonFiniteCost)
        }
    };
    let mut params = AnsatzParams::random(n, opt.layers, &mut SeededRng::new(seed, 0));
    let mut energy = cost(&params)?;
    let mut energies = vec![energy];
    for _ in 0..opt.max_sweeps {
        for q in 0..n {
            for l in 0..opt.layers {
                let i = l * n + q;
                let t0 = params.thetas[i];
                let mut probe = params.clone();
                probe.thetas[i] = t0 + FRAC_PI_2;
                let fp = cost(&probe)?;
                probe.thetas[i] = t0 - FRAC_PI_2;
                let fm = cost(&probe)?;
                probe.thetas[i] = smo_step(t0, energy, fp, fm).rem_euclid(TAU);
                let fnew = cost(&probe)?;
                if fnew <= energy {
                    params = probe;
                    energy = fnew;
                }
            }
        }
        let prev = *energies.last().expect("non-empty");
        energies.push(energy);
        if (prev - energy).abs() < opt.tol {
            break;
        }
    }
    Ok(VqeTrace { energies, params })
}

/// `restarts` independent runs with seeds derived from `seed`.
pub fn run_vqe_restarts(
    povm: &Povm,
    ham: &Hamiltonian,
    pipeline: &Pipeline,
    opt: &SmoConfig,
    restarts: usize,
    seed: u64,
) -> Result<Vec<VqeTrace>> {
    let root = SeededRng::new(seed, 2);
    (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut sub = root.substream(r as u64);
            run_vqe(povm, ham, pipeline, opt, sub.next_u64())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eliminate::TwirlMethod;
    use crate::noisemodel::{ry_measurement, ry_unitary};
    use crate::qcore::{mermin_state, plus_theta_state};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    const A: f64 = PI / 40.0;

    fn rng() -> SeededRng {
        SeededRng::new(0, 0)
    }

    #[test]
    fn pauli_expectation_examples() {
        let ideal1 = Povm::ideal(1);
        let x: PauliString = "X".parse().unwrap();
        let z: PauliString = "Z".parse().unwrap();
        let p = Pipeline::analytic();
        assert_abs_diff_eq!(pauli_expectation(&ideal1, &plus_theta_state(0.0, 1), &x, &p, &rng()).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(pauli_expectation(&ideal1, &DensityState::basis(0, 1), &z, &p, &rng()).unwrap(), 1.0, epsilon = 1e-14);
        let y: PauliString = "Y".parse().unwrap();
        assert_abs_diff_eq!(pauli_expectation(&ideal1, &plus_theta_state(FRAC_PI_2, 1), &y, &p, &rng()).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn rotations_diagonalize() {
        for p in PauliString::all(2) {
            let t = ExpectationTask::new(p.clone());
            let d = p.to_operator().conjugate_by(&t.rotation);
            assert!(d.max_offdiag_abs() < 1e-14, "{p}");
        }
    }

    #[test]
    fn mermin_terms_match_dense_oracle() {
        let g = mermin_state();
        let ideal = Povm::ideal(4);
        let mut total = 0.0;
        for (c, p) in mermin_terms() {
            let v = pauli_expectation(&ideal, &g, &p, &Pipeline::analytic(), &rng()).unwrap();
            assert_abs_diff_eq!(v, g.expectation(&p.to_operator()).re, epsilon = 1e-10);
            total += c * v;
        }
        assert_abs_diff_eq!(total, 8.0 * 2f64.sqrt(), epsilon = 1e-9);
        let m = run_mermin(&ideal, &Pipeline::analytic(), &rng()).unwrap();
        assert_abs_diff_eq!(m, 8.0 * 2f64.sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn mermin_ry_raw_and_eliminated() {
        let ry = ry_measurement(4, A);
        let raw = run_mermin(&ry, &Pipeline::analytic(), &rng()).unwrap();
        assert_abs_diff_eq!(raw, 10.775, epsilon = 0.01);
        let p = Pipeline::analytic()
            .with_elimination(Some(EliminationConfig::exhaustive(TwirlMethod::Iz)))
            .with_mitigator(Mitigator::Lsq);
        assert_abs_diff_eq!(run_mermin(&ry, &p, &rng()).unwrap(), 8.0 * 2f64.sqrt(), epsilon = 0.01);
    }

    #[test]
    fn h2_examples() {
        let h = h2_hamiltonian();
        assert_eq!(h.terms.len(), 15);
        assert_eq!(h.terms[0].0, -0.097066);
        assert!(h.terms[0].1.is_identity());
        assert_abs_diff_eq!(h.ground_energy(), -1.137, epsilon = 5e-4);
    }

    #[test]
    fn transformed_examples() {
        let h = h2_hamiltonian();
        let id = transformed_hamiltonian(&h, &Operator::identity(16)).unwrap();
        assert!(id.max_abs_diff(&h.to_operator()) < 1e-12);
        let r = ry_unitary(A).tensor_power(4);
        let t = transformed_hamiltonian(&h, &r).unwrap();
        assert!(t.hermitian_deviation() < 1e-12);
        assert_abs_diff_eq!(ground_energy(&t), -1.135, epsilon = 1e-3);
        let cal = calibrate(&ry_measurement(4, A), CalibrationMode::Analytic).unwrap();
        let tm = transformed_hamiltonian_with(&h, &r, Some(&cal)).unwrap();
        assert_abs_diff_eq!(ground_energy(&tm), -1.152, epsilon = 1e-3);
    }

    #[test]
    fn transformed_matches_pipeline_energy() {
        let h = h2_hamiltonian();
        let ry = ry_measurement(4, A);
        let r = ry_unitary(A).tensor_power(4);
        let t = transformed_hamiltonian(&h, &r).unwrap();
        let params = AnsatzParams::random(4, 6, &mut SeededRng::new(3, 3));
        let state = params.state();
        let prepared = Pipeline::analytic();
        let prepared = prepared.prepare(&ry).unwrap();
        let e = prepared.observable_sum(&state, &tasks(&h.terms), &rng()).unwrap();
        assert_abs_diff_eq!(e, state.expectation(&t).re, epsilon = 1e-12);
    }

    #[test]
    fn cost_is_sinusoidal_in_each_parameter() {
        let h = h2_hamiltonian();
        let dense = h.to_operator();
        let base = AnsatzParams::random(4, 6, &mut SeededRng::new(5, 0));
        for i in [0, 7, 13, 23] {
            let f = |t: f64| {
                let mut p = base.clone();
                p.thetas[i] = t;
                p.state().expectation(&dense).re
            };
            let (f0, fp, fm) = (f(0.0), f(FRAC_PI_2), f(-FRAC_PI_2));
            let a = (fp + fm) / 2.0;
            let bc = f0 - a;
            let bs = (fp - fm) / 2.0;
            for k in 0..12 {
                let t = 0.5 * k as f64;
                assert_abs_diff_eq!(f(t), a + bc * t.cos() + bs * t.sin(), epsilon = 1e-9);
            }
            let tmin = smo_step(0.0, f0, fp, fm);
            assert_abs_diff_eq!(f(tmin), a - (bc * bc + bs * bs).sqrt(), epsilon = 1e-9);
        }
    }

    #[test]
    fn ansatz_matches_gate_construction() {
        let params = AnsatzParams::random(4, 6, &mut SeededRng::new(9, 0));
        let mut rho = DensityState::basis(0, 4);
        for l in 0..6 {
            let rys: Vec<Operator> = (0..4).map(|q| gates::ry(params.thetas[l * 4 + q])).collect();
            rho = rho.apply_gate(&gates::product(&rys)).unwrap();
            for (a, b) in params.cz_pairs(l) {
                rho = rho.apply_gate(&gates::cz(a, b, 4)).unwrap();
            }
        }
        assert!(rho.operator().max_abs_diff(params.state().operator()) < 1e-12);
        assert_eq!(params.cz_pairs(0), vec![(0, 1), (2, 3)]);
        assert_eq!(params.cz_pairs(1), vec![(1, 2)]);
    }

    #[test]
    fn ghz_theory_and_ideal_pipeline() {
        let phis: Vec<f64> = (0..8).map(|k| k as f64 * PI / 8.0).collect();
        let ideal = Povm::ideal(4);
        let vals = run_ghz_parity(&ideal, &phis, &Pipeline::analytic(), &rng()).unwrap();
        for (v, &phi) in vals.iter().zip(&phis) {
            assert_abs_diff_eq!(*v, ghz_parity_theory(4, phi), epsilon = 1e-10);
        }
        // unit amplitude, period 2π/4
        let t0 = ghz_parity_theory(4, 0.0);
        assert_abs_diff_eq!(t0.abs(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ghz_parity_theory(4, PI / 2.0), t0, epsilon = 1e-12);
        assert_abs_diff_eq!(ghz_parity_theory(4, PI / 4.0), -t0, epsilon = 1e-12);
    }

    #[test]
    fn smo_converges_ideal() {
        let h = h2_hamiltonian();
        let trace = run_vqe(&Povm::ideal(4), &h, &Pipeline::analytic(), &SmoConfig::default(), 1).unwrap();
        assert!(trace.energies.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(trace.final_energy() < -1.10);
    }
}
