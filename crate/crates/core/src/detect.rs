//! Shot-based witness estimation over random phases and least-squares
//! Fourier fitting of the resulting curves.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::noisemodel::{born_probabilities, sample_histogram, sample_maximally_mixed, SeededRng};
use crate::povm::{witness_expectation, FourierSeries, Povm};
use crate::qcore::plus_theta_state;

/// Default number of sampled phases.
pub const DEFAULT_K: usize = 100;

const THETA_STREAM: u64 = 0;
const ESTIMATE_STREAM: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimationMode {
    /// Finite-shot histograms.
    Shots,
    /// Exact Born probabilities.
    Analytic,
}

impl std::str::FromStr for EstimationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "shots" => Ok(EstimationMode::Shots),
            "analytic" => Ok(EstimationMode::Analytic),
            other => Err(Error::InvalidArgument(format!("unknown estimation mode '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    pub k: usize,
    pub shots: u64,
    pub seed: u64,
    /// Highest fitted harmonic; defaults to the qubit count.
    pub harmonics: Option<usize>,
    pub mode: EstimationMode,
}

impl DetectionConfig {
    pub fn harmonics_for(&self, n: usize) -> usize {
        self.harmonics.unwrap_or(n)
    }
}

/// Fitted witness series of one outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierFit {
    pub outcome: usize,
    #[serde(flatten)]
    pub series: FourierSeries,
    /// Root-mean-square deviation between the series and the estimates.
    pub residual: f64,
}

/// Sampled phases and per-outcome estimates, `estimates[k][x]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionRun {
    pub thetas: Vec<f64>,
    pub estimates: Vec<Vec<f64>>,
}

/// Shots needed for additive error `eps` with confidence `1 - delta`.
pub fn hoeffding_shots(eps: f64, delta: f64) -> u64 {
    ((2.0 / delta).ln() / (2.0 * eps * eps)).ceil() as u64
}

/// `2^n (M_x − N_x^θ) / shots` for every outcome `x`.
pub fn estimate_witness_at(povm: &Povm, theta: f64, shots: u64, rng: &SeededRng) -> Vec<f64> {
    let dim = povm.dim();
    let m = sample_maximally_mixed(povm, shots, &mut rng.substream(0));
    let probe = born_probabilities(povm, &plus_theta_state(theta, povm.num_qubits()))
        .expect("probe matches device dimension");
    let nth = sample_histogram(&probe, shots, &mut rng.substream(1));
    let scale = dim as f64 / shots as f64;
    m.counts
        .iter()
        .zip(&nth.counts)
        .map(|(&a, &b)| (a as f64 - b as f64) * scale)
        .collect()
}

/// Exact signed witness values for every outcome.
pub fn analytic_witness_at(povm: &Povm, theta: f64) -> Vec<f64> {
    (0..povm.dim())
        .map(|x| witness_expectation(povm, x, theta).value)
        .collect()
}

/// Draws `K` phases and evaluates the estimator at each.
pub fn sample_estimates(povm: &Povm, cfg: &DetectionConfig) -> Result<DetectionRun> {
    if cfg.k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    if cfg.mode == EstimationMode::Shots && cfg.shots == 0 {
        return Err(Error::InvalidArgument("shots must be positive".into()));
    }
    let mut theta_rng = SeededRng::new(cfg.seed, THETA_STREAM);
    let thetas: Vec<f64> = (0..cfg.k).map(|_| theta_rng.random_range(0.0..TAU)).collect();
    let root = SeededRng::new(cfg.seed, ESTIMATE_STREAM);
    let estimates = thetas
        .par_iter()
        .enumerate()
        .map(|(k, &theta)| match cfg.mode {
            EstimationMode::Analytic => analytic_witness_at(povm, theta),
            EstimationMode::Shots => estimate_witness_at(povm, theta, cfg.shots, &root.substream(k as u64)),
        })
        .collect();
    Ok(DetectionRun { thetas, estimates })
}

fn design_matrix(thetas: &[f64], harmonics: usize) -> DMatrix<f64> {
    DMatrix::from_fn(thetas.len(), 2 * harmonics + 1, |r, c| {
        let t = thetas[r];
        if c == 0 {
            1.0
        } else if c <= harmonics {
            (c as f64 * t).cos()
        } else {
            ((c - harmonics) as f64 * t).sin()
        }
    })
}

/// Ordinary least squares on `{1, cos hθ, sin hθ}_{h ≤ H}` for several curves
/// sharing the same phases; `values[k][x]` is curve `x` at `thetas[k]`.
pub fn fit_fourier(thetas: &[f64], values: &[Vec<f64>], harmonics: usize) -> Result<Vec<(FourierSeries, f64)>> {
    let cols = 2 * harmonics + 1;
    let rows = thetas.len();
    if values.len() != rows {
        return Err(Error::DimensionMismatch {
            expected: rows,
            got: values.len(),
        });
    }
    let curves = values.first().map_or(0, Vec::len);
    let x = design_matrix(thetas, harmonics);
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = smax * 1e-10 * rows.max(cols) as f64;
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    if rows < cols || rank < cols {
        return Err(Error::RankDeficientFit {
            rank: rank.min(rows),
            needed: cols,
        });
    }
    let y = DMatrix::from_fn(rows, curves, |r, c| values[r][c]);
    let beta = svd
        .solve(&y, cutoff)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let fitted = &x * &beta;
    Ok((0..curves)
        .map(|c| {
            let mut series = FourierSeries::zeros(harmonics);
            for h in 0..=harmonics {
                series.a[h] = beta[(h, c)];
            }
            for h in 1..=harmonics {
                series.b[h - 1] = beta[(harmonics + h, c)];
            }
            let sse: f64 = (0..rows).map(|r| (fitted[(r, c)] - y[(r, c)]).powi(2)).sum();
            (series, (sse / rows as f64).sqrt())
        })
        .collect())
}

/// Fits every outcome's curve of an existing run.
pub fn fit_run(run: &DetectionRun, harmonics: usize) -> Result<Vec<FourierFit>> {
    Ok(fit_fourier(&run.thetas, &run.estimates, harmonics)?
        .into_iter()
        .enumerate()
        .map(|(outcome, (series, residual))| FourierFit {
            outcome,
            series,
            residual,
        })
        .collect())
}

/// Samples phases, estimates the witness at each and fits the series.
pub fn run_detection(povm: &Povm, cfg: &DetectionConfig) -> Result<Vec<FourierFit>> {
    let harmonics = cfg.harmonics_for(povm.num_qubits());
    if cfg.k < 2 * harmonics + 1 {
        return Err(Error::RankDeficientFit {
            rank: cfg.k,
            needed: 2 * harmonics + 1,
        });
    }
    let run = sample_estimates(povm, cfg)?;
    fit_run(&run, harmonics)
}
