//! Noisy measurement devices and the seeded shot sampler.

use nalgebra::DMatrix;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::povm::Povm;
use crate::qcore::{DensityState, Operator, C64};

/// Floor below which a negative Born probability is treated as an error.
pub const NEGATIVE_PROB_TOL: f64 = 1e-12;

/// Tolerance on `Σ p = 1`.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Single-qubit `e^{-i·angle·σ_y}`.
pub fn ry_unitary(angle: f64) -> Operator {
    let (s, c) = angle.sin_cos();
    Operator::from_rows(2, &[C64::from(c), C64::from(-s), C64::from(s), C64::from(c)])
        .expect("2x2 is a valid operator")
}

/// `Π_x = G†|x⟩⟨x|G` with `G = (e^{-i·angle·σ_y})^{⊗n}`.
pub fn ry_measurement(n: usize, angle: f64) -> Povm {
    let g = ry_unitary(angle).tensor_power(n);
    Povm::ideal(n)
        .precede_by(&g)
        .expect("tensor power of a rotation is unitary")
}

fn check_stochastic(a: &DMatrix<f64>) -> Result<usize> {
    let dim = a.nrows();
    if a.ncols() != dim {
        return Err(Error::NotStochastic(format!("shape {}x{}", dim, a.ncols())));
    }
    if dim < 2 || !dim.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(dim));
    }
    for y in 0..dim {
        let mut sum = 0.0;
        for x in 0..dim {
            let v = a[(x, y)];
            if !v.is_finite() || v < -NEGATIVE_PROB_TOL {
                return Err(Error::NotStochastic(format!("entry ({x},{y}) = {v}")));
            }
            sum += v;
        }
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotStochastic(format!("column {y} sums to {sum}")));
        }
    }
    Ok(dim)
}

/// Diagonal POVM `Π_x = Σ_y A[x][y] |y⟩⟨y|` from a column-stochastic matrix.
pub fn confusion_measurement(a: &DMatrix<f64>) -> Result<Povm> {
    let dim = check_stochastic(a)?;
    Ok(Povm::new_unchecked(
        (0..dim)
            .map(|x| Operator::diagonal(&a.row(x).iter().copied().collect::<Vec<_>>()))
            .collect(),
    ))
}

/// Classical post-processing `Π_x → Σ_y A[x][y] Π_y`.
pub fn post_process(povm: &Povm, a: &DMatrix<f64>) -> Result<Povm> {
    let dim = check_stochastic(a)?;
    if dim != povm.dim() {
        return Err(Error::DimensionMismatch {
            expected: povm.dim(),
            got: dim,
        });
    }
    Ok(Povm::new_unchecked(
        (0..dim)
            .map(|x| {
                (0..dim).fold(Operator::zeros(dim), |acc, y| {
                    &acc + &povm.element(y).scale(C64::from(a[(x, y)]))
                })
            })
            .collect(),
    ))
}

/// Normalized outcome distribution over `2^n` bitstrings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbVector {
    pub n: usize,
    pub p: Vec<f64>,
}

impl ProbVector {
    /// Clamps negatives above `-1e-12` and renormalizes.
    pub fn new(p: Vec<f64>) -> Result<Self> {
        let dim = p.len();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(dim));
        }
        let mut p = p;
        for (x, v) in p.iter_mut().enumerate() {
            if !v.is_finite() || *v < -NEGATIVE_PROB_TOL {
                return Err(Error::InconsistentInputs(format!("probability of {x} is {v}")));
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::InconsistentInputs(format!("probabilities sum to {sum}")));
        }
        p.iter_mut().for_each(|v| *v /= sum);
        Ok(Self {
            n: dim.trailing_zeros() as usize,
            p,
        })
    }

    pub fn uniform(n: usize) -> Self {
        let dim = 1usize << n;
        Self {
            n,
            p: vec![1.0 / dim as f64; dim],
        }
    }

    pub fn point(x: usize, n: usize) -> Self {
        let mut p = vec![0.0; 1 << n];
        p[x] = 1.0;
        Self { n, p }
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }

    pub fn l1_distance(&self, other: &[f64]) -> f64 {
        self.p.iter().zip(other).map(|(a, b)| (a - b).abs()).sum()
    }
}

/// Outcome counts from a finite number of shots.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub n: usize,
    pub counts: Vec<u64>,
    pub shots: u64,
}

impl Histogram {
    pub fn frequencies(&self) -> Vec<f64> {
        self.counts
            .iter()
            .map(|&c| c as f64 / self.shots as f64)
            .collect()
    }

    pub fn to_prob_vector(&self) -> ProbVector {
        ProbVector {
            n: self.n,
            p: self.frequencies(),
        }
    }
}

/// `p(x) = tr[Π_x ρ]`.
pub fn born_probabilities(povm: &Povm, state: &DensityState) -> Result<ProbVector> {
    if povm.dim() != state.dim() {
        return Err(Error::DimensionMismatch {
            expected: povm.dim(),
            got: state.dim(),
        });
    }
    ProbVector::new(
        povm.elements()
            .iter()
            .map(|e| e.trace_product(state.operator()).re)
            .collect(),
    )
}

/// ChaCha8 stream keyed by `(seed, stream)`; the draw index is the stream position.
#[derive(Clone, Debug)]
pub struct SeededRng {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            seed,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Child stream `k`, independent of this stream's draw position.
    pub fn substream(&self, k: u64) -> SeededRng {
        SeededRng::new(self.seed, splitmix64(self.stream ^ splitmix64(k.wrapping_add(1))))
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Multinomial draw via sequential conditional binomials.
pub fn sample_histogram(p: &ProbVector, shots: u64, rng: &mut SeededRng) -> Histogram {
    let dim = p.dim();
    let mut counts = vec![0u64; dim];
    let mut remaining = shots;
    let mut mass = 1.0;
    for x in 0..dim {
        if remaining == 0 {
            break;
        }
        if x + 1 == dim {
            counts[x] = remaining;
            break;
        }
        let q = if mass > 0.0 {
            (p.p[x] / mass).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let k = Binomial::new(remaining, q)
            .expect("probability clamped to [0,1]")
            .sample(rng);
        counts[x] = k;
        remaining -= k;
        mass -= p.p[x];
    }
    Histogram {
        n: p.n,
        counts,
        shots,
    }
}

/// Shots on the maximally mixed state, each prepared as a uniformly random
/// basis state and measured with the device.
pub fn sample_maximally_mixed(povm: &Povm, shots: u64, rng: &mut SeededRng) -> Histogram {
    let dim = povm.dim();
    let n = povm.num_qubits();
    // column y holds the outcome distribution for basis input |y⟩
    let columns: Vec<ProbVector> = (0..dim)
        .map(|y| {
            born_probabilities(povm, &DensityState::basis(y, n))
                .expect("basis state matches device dimension")
        })
        .collect();
    let mut inputs = vec![0u64; dim];
    for _ in 0..shots {
        inputs[rng.random_range(0..dim)] += 1;
    }
    let mut counts = vec![0u64; dim];
    for (y, &m) in inputs.iter().enumerate() {
        if m == 0 {
            continue;
        }
        let mut sub = rng.substream(y as u64);
        let h = sample_histogram(&columns[y], m, &mut sub);
        counts.iter_mut().zip(&h.counts).for_each(|(c, k)| *c += k);
    }
    Histogram { n, counts, shots }
}

/// Measures `shots` copies of `state` with the device.
pub fn measure(povm: &Povm, state: &DensityState, shots: u64, rng: &mut SeededRng) -> Result<Histogram> {
    let p = born_probabilities(povm, state)?;
    Ok(sample_histogram(&p, shots, rng))
}
