//! Random instances (POVMs, states, stochastic matrices) for tests and benchmarks.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::noisemodel::{confusion_measurement, SeededRng};
use crate::povm::Povm;
use crate::qcore::{DensityState, Operator, C64};

/// Fixed-stream generator for reproducible tests.
pub fn test_rng(seed: u64) -> SeededRng {
    SeededRng::new(seed, 0x7e57)
}

fn gaussian(rng: &mut SeededRng) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// `A A†` with `A` a complex Ginibre matrix.
fn random_psd(dim: usize, rng: &mut SeededRng) -> DMatrix<C64> {
    let a = DMatrix::from_fn(dim, dim, |_, _| gaussian(rng));
    &a * a.adjoint()
}

/// Hermitian `S^{-1/2}` for positive-definite `S`.
fn inverse_sqrt(s: &DMatrix<C64>) -> DMatrix<C64> {
    let herm = (s + s.adjoint()).scale(0.5);
    let eig = herm.symmetric_eigen();
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| C64::from(1.0 / v.sqrt())));
    &eig.eigenvectors * d * eig.eigenvectors.adjoint()
}

/// POVM `Π_x = S^{-1/2} G_x S^{-1/2}` with Ginibre `G_x` and `S = Σ G_x`.
pub fn random_povm(n: usize, rng: &mut SeededRng) -> Povm {
    let dim = 1usize << n;
    let gs: Vec<DMatrix<C64>> = (0..dim).map(|_| random_psd(dim, rng)).collect();
    let s = gs.iter().skip(1).fold(gs[0].clone(), |acc, g| acc + g);
    let w = inverse_sqrt(&s);
    let elements = gs
        .iter()
        .map(|g| {
            let e = &w * g * &w;
            let e = (&e + e.adjoint()).scale(0.5);
            Operator::from_matrix(e).expect("square power-of-two matrix")
        })
        .collect();
    Povm::new_unchecked(elements)
}

/// Unitary from the QR factor of a complex Ginibre matrix.
pub fn random_unitary(n: usize, rng: &mut SeededRng) -> Operator {
    let dim = 1usize << n;
    let a = DMatrix::from_fn(dim, dim, |_, _| gaussian(rng));
    Operator::from_matrix(a.qr().q()).expect("square power-of-two matrix")
}

/// Column-stochastic matrix with i.i.d. uniform entries normalized per column.
pub fn random_stochastic(dim: usize, rng: &mut SeededRng) -> DMatrix<f64> {
    let mut a = DMatrix::from_fn(dim, dim, |_, _| rng.random::<f64>() + 1e-3);
    for mut col in a.column_iter_mut() {
        let s: f64 = col.iter().sum();
        col /= s;
    }
    a
}

/// Column-stochastic matrix close to the identity: each column puts weight
/// `1 - ε` on its own outcome with `ε` up to `max_flip`.
pub fn random_near_identity_stochastic(dim: usize, max_flip: f64, rng: &mut SeededRng) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(dim, dim);
    for y in 0..dim {
        let eps = max_flip * rng.random::<f64>();
        let noise: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
        let off: f64 = noise.iter().enumerate().filter(|&(x, _)| x != y).map(|(_, v)| v).sum();
        for x in 0..dim {
            a[(x, y)] = if x == y { 1.0 - eps } else { eps * noise[x] / off };
        }
    }
    a
}

/// Diagonal POVM from [`random_stochastic`].
pub fn random_classical_povm(n: usize, rng: &mut SeededRng) -> Povm {
    confusion_measurement(&random_stochastic(1 << n, rng)).expect("stochastic by construction")
}

/// Mixed state `A A† / tr` with Ginibre `A`.
pub fn random_state(n: usize, rng: &mut SeededRng) -> DensityState {
    let m = random_psd(1 << n, rng);
    let tr = m.trace();
    let m = (&m + m.adjoint()).scale(0.5 / tr.re);
    DensityState::new(Operator::from_matrix(m).expect("square")).expect("PSD with unit trace")
}

/// Haar-like random pure state from a normalized complex Gaussian vector.
pub fn random_pure_state(n: usize, rng: &mut SeededRng) -> DensityState {
    let v: Vec<C64> = (0..1usize << n).map(|_| gaussian(rng)).collect();
    let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let v: Vec<C64> = v.into_iter().map(|c| c / norm).collect();
    DensityState::from_pure(&v).expect("normalized")
}
