//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so that every line is printed
//! whether or not an earlier criterion fails.

use std::f64::consts::{PI, TAU};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rayon::prelude::*;

use mnl::detect::{estimate_witness_at, run_detection, sample_estimates, DetectionConfig, EstimationMode};
use mnl::eliminate::{effective_povm, run_elimination, EliminationConfig, EliminationMode, TwirlMethod};
use mnl::experiments::{
    ghz_parity_theory, h2_hamiltonian, run_ghz_parity, run_mermin, run_vqe_restarts, repeat, transformed_hamiltonian,
    ground_energy, Pipeline, SmoConfig, Stats,
};
use mnl::mitigate::Mitigator;
use mnl::noisemodel::{ry_measurement, ry_unitary, SeededRng};
use mnl::povm::{
    average_noise_measure, linf_coherence, measurement_fidelity, noise_measure, pauli_transition_matrix, povm_to_ptm,
    ptm_to_povm, theoretical_fourier_coeffs, witness_expectation, Povm,
};
use mnl::qcore::plus_theta_state;
use mnl::random::{random_povm, test_rng};

const RY_ANGLE: f64 = PI / 40.0;
/// Criteria that cannot hold for any implementation; they are still run and
/// reported as FAIL but do not set the exit status.
const UNATTAINABLE: [(&str, &str); 1] = [(
    "8a measure normalization",
    "the per-element bound fails for n >= 2, e.g. |++><++| as an element gives 3 at theta = 0 \
     (see povm::tests::normalization_counterexample); the sharp bound is 2^n - 1",
)];

const MERMIN_MAX: f64 = 11.313_708_498_984_761;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let elapsed = start.elapsed();
    if let Some(limit) = limit {
        if elapsed > limit {
            o.pass = false;
        }
        o.detail = format!("{} [{:.1}s, limit {}s]", o.detail, elapsed.as_secs_f64(), limit.as_secs());
    } else {
        o.detail = format!("{} [{:.1}s]", o.detail, elapsed.as_secs_f64());
    }
    o
}

/// Two hundred random POVMs cycling through n = 1, 2, 3.
fn povm_ensemble(count: usize, seed: u64) -> Vec<Povm> {
    let mut rng = test_rng(seed);
    (0..count).map(|i| random_povm(1 + i % 3, &mut rng)).collect()
}

fn criterion_1() -> Outcome {
    let ry = ry_measurement(3, RY_ANGLE);
    let target_a = [2.0 * -0.018, 2.0 * 0.236, 2.0 * -0.018, 0.0];
    let seeds = 20;
    let fits: Vec<_> = (0..seeds)
        .into_par_iter()
        .map(|s| {
            let cfg = DetectionConfig {
                k: 100,
                shots: 1 << 13,
                seed: 1000 + s,
                harmonics: None,
                mode: EstimationMode::Shots,
            };
            run_detection(&ry, &cfg).expect("detection runs")[0].series.clone()
        })
        .collect();
    let mut a = [0.0; 4];
    let mut b = [0.0; 3];
    for f in &fits {
        for h in 0..4 {
            a[h] += f.a[h] / seeds as f64;
        }
        for h in 0..3 {
            b[h] += f.b[h] / seeds as f64;
        }
    }
    let shot_err = (0..4)
        .map(|h| (a[h] - target_a[h]).abs())
        .chain(b.iter().map(|v| v.abs()))
        .fold(0.0, f64::max);
    let cfg = DetectionConfig {
        k: 100,
        shots: 1,
        seed: 5,
        harmonics: None,
        mode: EstimationMode::Analytic,
    };
    let mut analytic_err: f64 = 0.0;
    for fit in run_detection(&ry, &cfg).expect("analytic detection runs") {
        let exact = theoretical_fourier_coeffs(&ry, fit.outcome);
        for (x, y) in fit.series.a.iter().zip(&exact.a).chain(fit.series.b.iter().zip(&exact.b)) {
            analytic_err = analytic_err.max((x - y).abs());
        }
    }
    outcome(
        shot_err <= 0.01 && analytic_err <= 1e-8,
        format!(
            "mean fit a=({:.4}, {:.4}, {:.4}, {:.4}) b=({:.4}, {:.4}, {:.4}); max dev {shot_err:.4}; analytic vs closed form {analytic_err:.1e}",
            a[0], a[1], a[2], a[3], b[0], b[1], b[2]
        ),
    )
}

fn criterion_2(ensemble: &[Povm]) -> Outcome {
    let worst = ensemble
        .par_iter()
        .map(|p| {
            TwirlMethod::ALL
                .iter()
                .map(|&m| effective_povm(p, m).max_offdiag_abs())
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    outcome(worst < 1e-12, format!("max off-diagonal modulus {worst:.2e} over {} POVMs x 3 methods", ensemble.len()))
}

fn criterion_3(ensemble: &[Povm]) -> Outcome {
    let worst = ensemble
        .par_iter()
        .map(|p| {
            let f = measurement_fidelity(p);
            TwirlMethod::ALL
                .iter()
                .map(|&m| (measurement_fidelity(&effective_povm(p, m)) - f).abs())
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    outcome(worst < 1e-12, format!("max fidelity change {worst:.2e}"))
}

fn criterion_4(ensemble: &[Povm]) -> Outcome {
    let worst = ensemble
        .par_iter()
        .map(|p| {
            let n = p.num_qubits();
            let dim = p.dim();
            let eff = effective_povm(p, TwirlMethod::Pauli);
            let diag: Vec<DMatrix<f64>> = (0..dim)
                .map(|x| DMatrix::from_vec(dim, 1, eff.element(x).diagonal_real()))
                .collect();
            let mut worst: f64 = 0.0;
            for x in 0..dim {
                let tinv = pauli_transition_matrix(x, n).try_inverse().expect("invertible");
                for y in 0..dim {
                    let pred = pauli_transition_matrix(y, n) * &tinv * &diag[x];
                    worst = worst.max((pred - &diag[y]).amax());
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    outcome(worst < 1e-10, format!("max deviation {worst:.2e} over all outcome pairs"))
}

fn mermin_cell(povm: &Povm, pipeline: &Pipeline, seed: u64) -> Stats {
    let samples = repeat(100, seed, |rng| run_mermin(povm, pipeline, rng)).expect("mermin runs");
    Stats::from_samples(&samples)
}

fn criterion_5() -> Outcome {
    let ideal = Povm::ideal(4);
    let ry = ry_measurement(4, RY_ANGLE);
    let base = Pipeline::analytic().with_shots(1 << 13);
    let mut pass = true;
    let mut parts = Vec::new();
    let mut check = |label: String, s: Stats, target: f64, tol: f64| {
        let ok = (s.mean - target).abs() <= tol;
        pass &= ok;
        parts.push(format!("{label}={:.4}±{:.4}{}", s.mean, s.stderr, if ok { "" } else { "(!)" }));
    };
    check("ideal".into(), mermin_cell(&ideal, &base, 1), MERMIN_MAX, 0.01);
    check("raw".into(), mermin_cell(&ry, &base, 2), 10.775, 0.05);
    for (i, m) in Mitigator::CORRECTING.iter().enumerate() {
        let p = base.clone().with_mitigator(*m);
        check(format!("raw+{}", m.name()), mermin_cell(&ry, &p, 10 + i as u64), 11.335, 0.05);
    }
    for (j, method) in TwirlMethod::ALL.iter().enumerate() {
        for (i, m) in Mitigator::CORRECTING.iter().enumerate() {
            let p = base
                .clone()
                .with_elimination(Some(EliminationConfig::analytic(*method)))
                .with_mitigator(*m);
            check(
                format!("{}+{}", method.name(), m.name()),
                mermin_cell(&ry, &p, 100 + 10 * j as u64 + i as u64),
                MERMIN_MAX,
                0.03,
            );
        }
    }
    outcome(pass, parts.join(" "))
}

fn criterion_6() -> Outcome {
    let h = h2_hamiltonian();
    let ry = ry_measurement(4, RY_ANGLE);
    let ideal = Povm::ideal(4);
    let opt = SmoConfig::default();
    let oracle = ground_energy(&transformed_hamiltonian(&h, &ry_unitary(RY_ANGLE).tensor_power(4)).expect("unitary"));
    let cases: [(&str, &Povm, Pipeline, f64, f64); 4] = [
        ("ideal", &ideal, Pipeline::analytic(), -1.137, 0.005),
        ("raw", &ry, Pipeline::analytic(), -1.135, 0.005),
        ("raw+lsq", &ry, Pipeline::analytic().with_mitigator(Mitigator::Lsq), -1.152, 0.01),
        (
            "iz+lsq",
            &ry,
            Pipeline::analytic()
                .with_elimination(Some(EliminationConfig::analytic(TwirlMethod::Iz)))
                .with_mitigator(Mitigator::Lsq),
            -1.137,
            0.005,
        ),
    ];
    let mut pass = (oracle - -1.135).abs() <= 1e-3;
    let mut parts = vec![format!("transformed-H oracle {oracle:.4}")];
    for (label, dev, pipe, target, tol) in cases {
        let traces = run_vqe_restarts(dev, &h, &pipe, &opt, 10, 2024).expect("vqe runs");
        let finals: Vec<f64> = traces.iter().map(|t| t.final_energy()).collect();
        let best = finals.iter().copied().fold(f64::INFINITY, f64::min);
        let mean = finals.iter().sum::<f64>() / finals.len() as f64;
        let ok = (best - target).abs() <= tol;
        pass &= ok;
        parts.push(format!("{label}: best {best:.4} mean {mean:.4}{}", if ok { "" } else { "(!)" }));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_7() -> Outcome {
    let ry = ry_measurement(4, RY_ANGLE);
    let phis: Vec<f64> = (0..20).map(|k| k as f64 * TAU / 20.0).collect();
    let theory: Vec<f64> = phis.iter().map(|&p| ghz_parity_theory(4, p)).collect();
    let rng = SeededRng::new(7, 0);
    let mut worst_elim: f64 = 0.0;
    for method in TwirlMethod::ALL {
        let p = Pipeline::analytic()
            .with_elimination(Some(EliminationConfig::exhaustive(method)))
            .with_mitigator(Mitigator::Lsq);
        let vals = run_ghz_parity(&ry, &phis, &p, &rng).expect("ghz runs");
        for (v, t) in vals.iter().zip(&theory) {
            worst_elim = worst_elim.max((v - t).abs());
        }
    }
    let raw = run_ghz_parity(&ry, &phis, &Pipeline::analytic(), &rng).expect("ghz runs");
    let non_node: Vec<usize> = (0..phis.len()).filter(|&k| theory[k].abs() > 0.05).collect();
    let deviating = non_node.iter().filter(|&&k| (raw[k] - theory[k]).abs() > 0.02).count();
    outcome(
        worst_elim <= 0.02 && 2 * deviating > non_node.len(),
        format!(
            "eliminated+lsq max gap {worst_elim:.2e}; raw deviates >0.02 at {deviating}/{} non-node points",
            non_node.len()
        ),
    )
}

fn criterion_8a(ensemble: &[Povm]) -> Outcome {
    let grid: Vec<f64> = (0..16).map(|k| k as f64 * TAU / 16.0).collect();
    let mut violating = 0usize;
    let mut worst: f64 = 0.0;
    let mut per_n = [0usize; 3];
    for p in ensemble {
        let mut bad = false;
        for &t in &grid {
            for x in 0..p.dim() {
                let q = noise_measure(p, x, t);
                worst = worst.max(q);
                bad |= q > 1.0 + 1e-12;
            }
        }
        if bad {
            violating += 1;
            per_n[p.num_qubits() - 1] += 1;
        }
    }
    let avg_violating = ensemble
        .iter()
        .filter(|p| grid.iter().any(|&t| average_noise_measure(p, t) > 1.0 + 1e-12))
        .count();
    outcome(
        violating == 0,
        format!(
            "{violating}/{} POVMs have an element measure above 1 (n=1: {}, n=2: {}, n=3: {}); max {worst:.3}; \
             outcome-averaged measure above 1 for {avg_violating}",
            ensemble.len(),
            per_n[0],
            per_n[1],
            per_n[2]
        ),
    )
}

fn criterion_8b(ensemble: &[Povm]) -> Outcome {
    let grid: Vec<f64> = (0..8).map(|k| k as f64 * TAU / 8.0).collect();
    let mut rng = test_rng(808);
    let mut conv_worst = f64::NEG_INFINITY;
    let mut linf_worst = f64::NEG_INFINITY;
    for p1 in ensemble {
        let p2 = random_povm(p1.num_qubits(), &mut rng);
        for w in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let mix = p1.mix(w, &p2).expect("same size");
            for &t in &grid {
                for x in 0..p1.dim() {
                    let lhs = noise_measure(&mix, x, t);
                    let rhs = w * noise_measure(p1, x, t) + (1.0 - w) * noise_measure(&p2, x, t);
                    conv_worst = conv_worst.max(lhs - rhs);
                }
            }
        }
        let n = p1.num_qubits();
        let gap = (1usize << (n - 1)) as f64 * average_noise_measure(p1, 0.0) - linf_coherence(p1);
        linf_worst = linf_worst.max(gap);
    }
    let mut add_worst = f64::NEG_INFINITY;
    for _ in 0..ensemble.len() {
        let a = random_povm(1, &mut rng);
        let b = random_povm(1, &mut rng);
        let ab = a.tensor(&b);
        for &t in &grid {
            for x in 0..2 {
                let lhs = noise_measure(&ab, 3 * x, t);
                let rhs = 2.0 * (noise_measure(&a, x, t) + noise_measure(&b, x, t));
                add_worst = add_worst.max(lhs - rhs);
            }
        }
    }
    outcome(
        conv_worst <= 1e-12 && linf_worst <= 1e-12 && add_worst <= 1e-12,
        format!(
            "convexity max excess {conv_worst:.1e}; additivity max excess {add_worst:.3}; l-inf bound max excess {linf_worst:.1e}"
        ),
    )
}

fn criterion_8c(ensemble: &[Povm]) -> Outcome {
    let worst = ensemble
        .par_iter()
        .map(|p| {
            let back = ptm_to_povm(&povm_to_ptm(p)).expect("valid PTM");
            (0..p.dim())
                .map(|x| back.element(x).max_abs_diff(p.element(x)))
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    outcome(worst <= 1e-10, format!("PTM round-trip max error {worst:.1e}"))
}

fn criterion_8d() -> Outcome {
    let povm = random_povm(1, &mut test_rng(77));
    let theta = 1.1;
    let shots = 2000;
    let seeds = 200;
    let samples: Vec<Vec<f64>> = (0..seeds)
        .map(|s| estimate_witness_at(&povm, theta, shots, &SeededRng::new(s, 5)))
        .collect();
    let mut worst_z: f64 = 0.0;
    for x in 0..2 {
        let v: Vec<f64> = samples.iter().map(|e| e[x]).collect();
        let st = Stats::from_samples(&v);
        let exact = witness_expectation(&povm, x, theta).value;
        worst_z = worst_z.max((st.mean - exact).abs() / st.stderr);
    }
    outcome(worst_z <= 3.0, format!("estimator bias max |z| = {worst_z:.2} over {seeds} seeds"))
}

fn criterion_8e() -> Outcome {
    let ry = ry_measurement(3, RY_ANGLE);
    let cfg = DetectionConfig {
        k: 40,
        shots: 4096,
        seed: 99,
        harmonics: None,
        mode: EstimationMode::Shots,
    };
    let run = || serde_json::to_vec(&sample_estimates(&ry, &cfg).expect("runs")).expect("serializes");
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("pool")
        .install(run);
    let multi = run();
    let elim_cfg = EliminationConfig {
        method: TwirlMethod::Pauli,
        k: 64,
        shots: Some(512),
        mode: EliminationMode::Sampled,
    };
    let state = plus_theta_state(0.4, 3);
    let elim = || {
        serde_json::to_vec(&run_elimination(&ry, &state, &elim_cfg, &SeededRng::new(3, 3)).expect("runs"))
            .expect("serializes")
    };
    let e1 = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("pool")
        .install(elim);
    let e2 = elim();
    outcome(
        single == multi && run() == multi && e1 == e2,
        format!("detection {} bytes, elimination {} bytes identical across runs and thread counts", multi.len(), e1.len()),
    )
}

fn main() {
    let ensemble = povm_ensemble(200, 2);
    let ensemble500 = povm_ensemble(500, 8);
    let criteria: Vec<(&str, Box<dyn FnOnce() -> Outcome>)> = vec![
        ("1 Fourier-fit reproduction", Box::new(|| timed(Some(Duration::from_secs(60)), criterion_1))),
        ("2 classicalization", Box::new(|| timed(Some(Duration::from_secs(30)), || criterion_2(&ensemble)))),
        ("3 fidelity identity", Box::new(|| timed(None, || criterion_3(&ensemble)))),
        ("4 transition-matrix regularization", Box::new(|| timed(None, || criterion_4(&ensemble)))),
        ("5 Mermin table", Box::new(|| timed(Some(Duration::from_secs(600)), criterion_5))),
        ("6 VQE", Box::new(|| timed(Some(Duration::from_secs(900)), criterion_6))),
        ("7 GHZ parity", Box::new(|| timed(None, criterion_7))),
        ("8a measure normalization", Box::new(|| timed(None, || criterion_8a(&ensemble500)))),
        ("8b convexity/additivity/l-inf", Box::new(|| timed(None, || criterion_8b(&ensemble500)))),
        ("8c PTM round-trip", Box::new(|| timed(None, || criterion_8c(&ensemble500)))),
        ("8d estimator unbiasedness", Box::new(|| timed(None, criterion_8d))),
        ("8e RNG determinism", Box::new(|| timed(None, criterion_8e))),
    ];
    let mut failed = Vec::new();
    for (name, run) in criteria {
        let o = run();
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if o.pass {
            continue;
        }
        if let Some((_, why)) = UNATTAINABLE.iter().find(|(n, _)| *n == name) {
            println!("     criterion {name} is unattainable: {why}");
        } else {
            failed.push(name);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {}", failed.join(", "));
        std::process::exit(1);
    }
}
