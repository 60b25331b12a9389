use std::f64::consts::TAU;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use mnl::detect::{fit_run, sample_estimates, DetectionConfig, EstimationMode, DEFAULT_K};
use mnl::eliminate::{effective_povm, run_elimination, EliminationConfig, EliminationMode, TwirlMethod};
use mnl::experiments::{
    ghz_parity_theory, h2_hamiltonian, repeat, run_ghz_parity, run_mermin, run_vqe_restarts, Pipeline, SmoConfig,
    Stats,
};
use mnl::mitigate::{calibrate, mitigate_inverse, CalibrationMatrix, CalibrationMode, Mitigator};
use mnl::povm::{
    average_noise_measure, is_classical, linf_coherence, measurement_fidelity, noise_measure, povm_to_ptm,
    CLASSICAL_TOL,
};
use mnl::qcore::format_bits;
use mnl::{Povm, ProbVector, SeededRng};

use crate::config::{parse_or, parse_value, pick, positive, require, RunConfig};
use crate::device::{read, DeviceSpec, StateSpec};
use crate::error::{CliError, CliResult};
use crate::output::{emit_csv, emit_json, emit_text};
use crate::{DetectArgs, EliminateArgs, MitigateArgs, PipelineArgs, ToolArgs};

const DEFAULT_SHOTS: u64 = 8192;
const DEFAULT_TWIRLS: usize = 100;
const MERMIN_REPEATS: usize = 1000;
const GHZ_REPEATS: usize = 100;
const GHZ_PHIS: usize = 32;
const VQE_RESTARTS: usize = 10;

pub const DETECT_HELP: &str = "\
Output JSON:
  {\"device\": str, \"k\": int, \"shots\": int|null, \"seed\": int, \"mode\": \"shots\"|\"analytic\",
   \"harmonics\": int,
   \"fits\": [{\"outcome\": int, \"bits\": str, \"a\": [a_0..a_H], \"b\": [b_1..b_H], \"residual\": float}]}
  The fitted witness of outcome x is a_0 + Σ_h a_h cos(hθ) + b_h sin(hθ); residual is the
  root-mean-square deviation from the estimates.
--csv-dir writes estimates_<bits>.csv per outcome with columns theta,estimate.";

pub const ELIMINATE_HELP: &str = "\
Output JSON: {\"n\": int, \"p\": [floats]}, the outcome distribution indexed by bitstring.";

pub const MITIGATE_HELP: &str = "\
Input JSON: {\"n\": int, \"p\": [floats]}.
Output JSON:
  {\"mitigator\": str, \"n\": int, \"q\": [floats],
   \"condition_number\": float, \"has_negative\": bool}   (last two for inverse only)";

pub const MERMIN_HELP: &str = "\
CSV columns: method,mitigator,mean,stderr
Summary JSON:
  {\"experiment\": \"mermin\", \"device\": str, \"seed\": int, \"mode\": str, \"shots\": int|null,
   \"repeats\": int, \"ideal\": float, \"rows\": [{\"method\", \"mitigator\", \"mean\", \"stderr\"}]}
Methods: raw (no twirling), iz, xy, pauli. The device must have 4 qubits.";

pub const GHZ_HELP: &str = "\
CSV columns: phi,method,value,stderr (method \"theory\" holds the noiseless curve)
Summary JSON:
  {\"experiment\": \"ghz\", \"device\": str, \"seed\": int, \"mode\": str, \"shots\": int|null,
   \"repeats\": int, \"mitigator\": str, \"rows\": [{\"phi\", \"method\", \"value\", \"stderr\"}],
   \"max_deviation\": {method: float}}";

pub const VQE_HELP: &str = "\
CSV columns: run,iteration,energy (iteration 0 is the random initial point)
Summary JSON:
  {\"experiment\": \"vqe\", \"device\": str, \"seed\": int, \"mode\": str, \"shots\": int|null,
   \"method\": str, \"mitigator\": str, \"ground_energy\": float, \"final_energies\": [floats],
   \"best\": float, \"mean\": float, \"stderr\": float, \"best_thetas\": [floats]}
The device must have 4 qubits. thetas are indexed layer * 4 + qubit.";

pub const INFO_HELP: &str = "\
Output JSON:
  {\"n\": int, \"classical\": bool, \"max_offdiag\": float, \"fidelity\": float,
   \"linf_coherence\": float, \"average_noise_measure\": float, \"noise_measure\": [floats]}
Noise measures are evaluated at θ = 0, one per outcome.";

fn load_device(flag: Option<String>, file: &RunConfig) -> CliResult<(String, Povm)> {
    let spec = require(flag, &file.device, "device")?;
    let povm = parse_value::<DeviceSpec>("device", &spec)?.load()?;
    Ok((spec, povm))
}

fn shots_field(mode: EstimationMode, shots: u64) -> Option<u64> {
    (mode == EstimationMode::Shots).then_some(shots)
}

#[derive(Serialize)]
struct FitRow {
    outcome: usize,
    bits: String,
    a: Vec<f64>,
    b: Vec<f64>,
    residual: f64,
}

#[derive(Serialize)]
struct DetectReport {
    device: String,
    k: usize,
    shots: Option<u64>,
    seed: u64,
    mode: EstimationMode,
    harmonics: usize,
    fits: Vec<FitRow>,
}

#[derive(Serialize)]
struct EstimateRow {
    theta: f64,
    estimate: f64,
}

pub fn detect(a: DetectArgs, file: &RunConfig, seed: u64) -> CliResult<()> {
    let (device, povm) = load_device(a.device, file)?;
    let n = povm.num_qubits();
    let cfg = DetectionConfig {
        k: positive("k", pick(a.k, &file.k).unwrap_or(DEFAULT_K))?,
        shots: positive("shots", pick(a.shots, &file.shots).unwrap_or(DEFAULT_SHOTS))?,
        seed,
        harmonics: pick(a.harmonics, &file.harmonics),
        mode: parse_or("mode", pick(a.mode, &file.mode), EstimationMode::Shots)?,
    };
    let harmonics = cfg.harmonics_for(n);
    if cfg.k < 2 * harmonics + 1 {
        return Err(CliError::config(format!(
            "--k {} is too small to fit {harmonics} harmonics (need at least {})",
            cfg.k,
            2 * harmonics + 1
        )));
    }
    let run = sample_estimates(&povm, &cfg)?;
    let fits = fit_run(&run, harmonics)?;
    if let Some(dir) = pick(a.csv_dir, &file.csv_dir) {
        std::fs::create_dir_all(&dir).map_err(|e| CliError::from(e).context(dir.display()))?;
        for x in 0..povm.dim() {
            let rows: Vec<EstimateRow> = run
                .thetas
                .iter()
                .zip(&run.estimates)
                .map(|(&theta, est)| EstimateRow { theta, estimate: est[x] })
                .collect();
            emit_csv(&rows, &dir.join(format!("estimates_{}.csv", format_bits(x, n))))?;
        }
    }
    let report = DetectReport {
        device,
        k: cfg.k,
        shots: shots_field(cfg.mode, cfg.shots),
        seed,
        mode: cfg.mode,
        harmonics,
        fits: fits
            .into_iter()
            .map(|f| FitRow {
                outcome: f.outcome,
                bits: format_bits(f.outcome, n),
                a: f.series.a,
                b: f.series.b,
                residual: f.residual,
            })
            .collect(),
    };
    emit_json(&report, pick(a.output, &file.output).as_deref())
}

pub fn eliminate(a: EliminateArgs, file: &RunConfig, seed: u64) -> CliResult<()> {
    let (_, povm) = load_device(a.device, file)?;
    let mode = parse_or("mode", pick(a.mode, &file.mode), EliminationMode::Sampled)?;
    let cfg = EliminationConfig {
        method: parse_or("method", pick(a.method, &file.method), TwirlMethod::Pauli)?,
        k: positive("twirls", pick(a.twirls, &file.twirls).unwrap_or(DEFAULT_TWIRLS))?,
        shots: pick(a.shots, &file.shots).map(|s| positive("shots", s)).transpose()?,
        mode,
    };
    let state = parse_or("state", pick(a.state, &file.state), StateSpec::Zero)?.build(povm.num_qubits())?;
    let p = run_elimination(&povm, &state, &cfg, &SeededRng::new(seed, 0))?;
    emit_json(&p, pick(a.output, &file.output).as_deref())
}

#[derive(Serialize)]
struct MitigateReport {
    mitigator: Mitigator,
    n: usize,
    q: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    condition_number: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    has_negative: Option<bool>,
}

fn load_distribution(path: &Path) -> CliResult<ProbVector> {
    let raw: ProbVector = serde_json::from_str(&read(path)?).map_err(|e| CliError::from(e).context(path.display()))?;
    let n = raw.n;
    let p = ProbVector::new(raw.p).map_err(|e| CliError::from(e).context(path.display()))?;
    if p.n != n {
        return Err(CliError::config(format!(
            "{}: n = {n} but p has {} entries",
            path.display(),
            p.dim()
        )));
    }
    Ok(p)
}

fn calibration_of(povm: &Povm, shots: Option<u64>, seed: u64) -> CliResult<CalibrationMatrix> {
    let rng = SeededRng::new(seed, 0);
    let mode = match shots {
        None => CalibrationMode::Analytic,
        Some(s) => CalibrationMode::Shots {
            shots: positive("calibration-shots", s)?,
            rng: &rng,
        },
    };
    Ok(calibrate(povm, mode)?)
}

pub fn mitigate(a: MitigateArgs, file: &RunConfig, seed: u64) -> CliResult<()> {
    let p = load_distribution(&require(a.input, &file.input, "input")?)?;
    let cal = match (pick(a.calibration, &file.calibration), pick(a.device, &file.device)) {
        (Some(path), _) => crate::device::load_calibration(&path)?,
        (None, Some(dev)) => {
            let (_, povm) = load_device(Some(dev), file)?;
            calibration_of(&povm, pick(a.calibration_shots, &file.calibration_shots), seed)?
        }
        (None, None) => return Err(CliError::config("either --calibration or --device is required")),
    };
    if cal.dim() != p.dim() {
        return Err(CliError::config(format!(
            "calibration is {0}x{0} but the distribution has {1} outcomes",
            cal.dim(),
            p.dim()
        )));
    }
    let mitigator = parse_or("mitigator", pick(a.mitigator, &file.mitigator), Mitigator::Lsq)?;
    let report = if mitigator == Mitigator::Inverse {
        let r = mitigate_inverse(&cal, &p)?;
        MitigateReport {
            mitigator,
            n: p.n,
            q: r.q,
            condition_number: Some(r.condition_number),
            has_negative: Some(r.has_negative),
        }
    } else {
        MitigateReport {
            mitigator,
            n: p.n,
            q: mitigator.apply(&cal, &p)?,
            condition_number: None,
            has_negative: None,
        }
    };
    emit_json(&report, pick(a.output, &file.output).as_deref())
}

/// Resolved measurement settings of an experiment.
struct Measurement {
    device: String,
    povm: Povm,
    estimation: EstimationMode,
    shots: u64,
    elimination_mode: EliminationMode,
    twirls: usize,
}

impl Measurement {
    fn resolve(a: &PipelineArgs, file: &RunConfig) -> CliResult<Self> {
        let (device, povm) = load_device(a.device.clone(), file)?;
        Ok(Self {
            device,
            povm,
            estimation: parse_or("mode", pick(a.mode.clone(), &file.mode), EstimationMode::Shots)?,
            shots: positive("shots", pick(a.shots, &file.shots).unwrap_or(DEFAULT_SHOTS))?,
            elimination_mode: parse_or(
                "elimination-mode",
                pick(a.elimination_mode.clone(), &file.elimination_mode),
                EliminationMode::Analytic,
            )?,
            twirls: positive("twirls", pick(a.twirls, &file.twirls).unwrap_or(DEFAULT_TWIRLS))?,
        })
    }

    fn pipeline(&self, method: Option<TwirlMethod>, mitigator: Mitigator) -> Pipeline {
        let elimination = method.map(|m| EliminationConfig {
            method: m,
            k: self.twirls,
            shots: None,
            mode: self.elimination_mode,
        });
        let p = Pipeline::analytic().with_elimination(elimination).with_mitigator(mitigator);
        match self.estimation {
            EstimationMode::Shots => p.with_shots(self.shots),
            EstimationMode::Analytic => p,
        }
    }

    fn shots(&self) -> Option<u64> {
        shots_field(self.estimation, self.shots)
    }

    /// Repetitions only matter when something is random.
    fn repeats(&self, requested: Option<usize>, default: usize) -> CliResult<usize> {
        let deterministic =
            self.estimation == EstimationMode::Analytic && self.elimination_mode != EliminationMode::Sampled;
        match requested {
            Some(r) => positive("repeats", r),
            None if deterministic => Ok(1),
            None => Ok(default),
        }
    }
}

/// `raw` means no twirling.
fn parse_method(s: &str) -> CliResult<Option<TwirlMethod>> {
    if s == "raw" {
        Ok(None)
    } else {
        parse_value("method", s).map(Some)
    }
}

fn method_label(m: Option<TwirlMethod>) -> &'static str {
    m.map_or("raw", TwirlMethod::name)
}

fn parse_list<T>(
    name: &str,
    flag: Option<Vec<String>>,
    file: &Option<Vec<String>>,
    default: Vec<T>,
    parse: impl Fn(&str) -> CliResult<T>,
) -> CliResult<Vec<T>> {
    match pick(flag, file) {
        None => Ok(default),
        Some(v) if v.is_empty() => Err(CliError::config(format!("--{name} must not be empty"))),
        Some(v) => v.iter().map(|s| parse(s.trim())).collect(),
    }
}

#[derive(Serialize)]
struct MerminRow {
    method: &'static str,
    mitigator: &'static str,
    mean: f64,
    stderr: f64,
}

#[derive(Serialize)]
struct MerminSummary<'a> {
    experiment: &'static str,
    device: &'a str,
    seed: u64,
    mode: EstimationMode,
    shots: Option<u64>,
    repeats: usize,
    ideal: f64,
    rows: &'a [MerminRow],
}

pub fn mermin(
    a: PipelineArgs,
    methods: Option<Vec<String>>,
    mitigators: Option<Vec<String>>,
    repeats: Option<usize>,
    file: &RunConfig,
    seed: u64,
) -> CliResult<()> {
    let m = Measurement::resolve(&a, file)?;
    let all_methods = std::iter::once(None).chain(TwirlMethod::ALL.map(Some)).collect();
    let methods = parse_list("methods", methods, &file.methods, all_methods, parse_method)?;
    let all_mitigators = vec![Mitigator::None, Mitigator::Inverse, Mitigator::Lsq, Mitigator::Ibu];
    let mitigators = parse_list("mitigators", mitigators, &file.mitigators, all_mitigators, |s| {
        parse_value("mitigators", s)
    })?;
    let repeats = m.repeats(pick(repeats, &file.repeats), MERMIN_REPEATS)?;
    let mut rows = Vec::new();
    for &method in &methods {
        for &mitigator in &mitigators {
            let pipeline = m.pipeline(method, mitigator);
            let samples = repeat(repeats, seed, |rng| run_mermin(&m.povm, &pipeline, rng))?;
            let s = Stats::from_samples(&samples);
            rows.push(MerminRow {
                method: method_label(method),
                mitigator: mitigator.name(),
                mean: s.mean,
                stderr: s.stderr,
            });
        }
    }
    if let Some(path) = pick(a.csv, &file.csv) {
        emit_csv(&rows, &path)?;
    }
    let summary = MerminSummary {
        experiment: "mermin",
        device: &m.device,
        seed,
        mode: m.estimation,
        shots: m.shots(),
        repeats,
        ideal: 8.0 * std::f64::consts::SQRT_2,
        rows: &rows,
    };
    emit_json(&summary, pick(a.output, &file.output).as_deref())
}

#[derive(Serialize)]
struct GhzRow {
    phi: f64,
    method: &'static str,
    value: f64,
    stderr: f64,
}

#[derive(Serialize)]
struct GhzSummary<'a> {
    experiment: &'static str,
    device: &'a str,
    seed: u64,
    mode: EstimationMode,
    shots: Option<u64>,
    repeats: usize,
    mitigator: Mitigator,
    rows: &'a [GhzRow],
    max_deviation: std::collections::BTreeMap<&'static str, f64>,
}

#[allow(clippy::too_many_arguments)]
pub fn ghz(
    a: PipelineArgs,
    methods: Option<Vec<String>>,
    mitigator: Option<String>,
    phis: Option<usize>,
    repeats: Option<usize>,
    file: &RunConfig,
    seed: u64,
) -> CliResult<()> {
    let m = Measurement::resolve(&a, file)?;
    let n = m.povm.num_qubits();
    if n < 2 {
        return Err(CliError::numeric("GHZ parity needs at least 2 qubits"));
    }
    let methods = parse_list(
        "methods",
        methods,
        &file.methods,
        vec![None, Some(TwirlMethod::Pauli)],
        parse_method,
    )?;
    let mitigator = parse_or("mitigator", pick(mitigator, &file.mitigator), Mitigator::None)?;
    let count = positive("phis", pick(phis, &file.phis).unwrap_or(GHZ_PHIS))?;
    let phis: Vec<f64> = (0..count).map(|k| TAU * k as f64 / count as f64).collect();
    let repeats = m.repeats(pick(repeats, &file.repeats), GHZ_REPEATS)?;
    let theory: Vec<f64> = phis.iter().map(|&p| ghz_parity_theory(n, p)).collect();
    let mut rows: Vec<GhzRow> = phis
        .iter()
        .zip(&theory)
        .map(|(&phi, &value)| GhzRow {
            phi,
            method: "theory",
            value,
            stderr: 0.0,
        })
        .collect();
    let mut max_deviation = std::collections::BTreeMap::new();
    let root = SeededRng::new(seed, 0);
    for &method in &methods {
        let pipeline = m.pipeline(method, mitigator);
        let runs = (0..repeats)
            .into_par_iter()
            .map(|r| run_ghz_parity(&m.povm, &phis, &pipeline, &root.substream(r as u64)))
            .collect::<mnl::Result<Vec<_>>>()?;
        let mut worst = 0.0f64;
        for (k, &phi) in phis.iter().enumerate() {
            let samples: Vec<f64> = runs.iter().map(|r| r[k]).collect();
            let s = Stats::from_samples(&samples);
            worst = worst.max((s.mean - theory[k]).abs());
            rows.push(GhzRow {
                phi,
                method: method_label(method),
                value: s.mean,
                stderr: s.stderr,
            });
        }
        max_deviation.insert(method_label(method), worst);
    }
    if let Some(path) = pick(a.csv, &file.csv) {
        emit_csv(&rows, &path)?;
    }
    let summary = GhzSummary {
        experiment: "ghz",
        device: &m.device,
        seed,
        mode: m.estimation,
        shots: m.shots(),
        repeats,
        mitigator,
        rows: &rows,
        max_deviation,
    };
    emit_json(&summary, pick(a.output, &file.output).as_deref())
}

pub struct VqeOptions {
    pub method: Option<String>,
    pub mitigator: Option<String>,
    pub restarts: Option<usize>,
    pub layers: Option<usize>,
    pub sweeps: Option<usize>,
    pub tol: Option<f64>,
}

#[derive(Serialize)]
struct VqeRow {
    run: usize,
    iteration: usize,
    energy: f64,
}

#[derive(Serialize)]
struct VqeSummary<'a> {
    experiment: &'static str,
    device: &'a str,
    seed: u64,
    mode: EstimationMode,
    shots: Option<u64>,
    method: &'static str,
    mitigator: Mitigator,
    ground_energy: f64,
    final_energies: Vec<f64>,
    best: f64,
    mean: f64,
    stderr: f64,
    best_thetas: &'a [f64],
}

pub fn vqe(a: PipelineArgs, o: VqeOptions, file: &RunConfig, seed: u64) -> CliResult<()> {
    let m = Measurement::resolve(&a, file)?;
    let method = parse_method(&pick(o.method, &file.method).unwrap_or_else(|| "raw".into()))?;
    let mitigator = parse_or("mitigator", pick(o.mitigator, &file.mitigator), Mitigator::None)?;
    let defaults = SmoConfig::default();
    let opt = SmoConfig {
        layers: positive("layers", pick(o.layers, &file.layers).unwrap_or(defaults.layers))?,
        max_sweeps: positive("sweeps", pick(o.sweeps, &file.sweeps).unwrap_or(defaults.max_sweeps))?,
        tol: positive("tol", pick(o.tol, &file.tol).unwrap_or(defaults.tol))?,
    };
    let restarts = positive("restarts", pick(o.restarts, &file.restarts).unwrap_or(VQE_RESTARTS))?;
    let ham = h2_hamiltonian();
    let traces = run_vqe_restarts(&m.povm, &ham, &m.pipeline(method, mitigator), &opt, restarts, seed)?;
    let rows: Vec<VqeRow> = traces
        .iter()
        .enumerate()
        .flat_map(|(run, t)| {
            t.energies
                .iter()
                .enumerate()
                .map(move |(iteration, &energy)| VqeRow { run, iteration, energy })
        })
        .collect();
    if let Some(path) = pick(a.csv, &file.csv) {
        emit_csv(&rows, &path)?;
    }
    let finals: Vec<f64> = traces.iter().map(|t| t.final_energy()).collect();
    let best_run = finals
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .map(|(i, _)| i)
        .expect("at least one restart");
    let stats = Stats::from_samples(&finals);
    let summary = VqeSummary {
        experiment: "vqe",
        device: &m.device,
        seed,
        mode: m.estimation,
        shots: m.shots(),
        method: method_label(method),
        mitigator,
        ground_energy: ham.ground_energy(),
        best: finals[best_run],
        mean: stats.mean,
        stderr: stats.stderr,
        final_energies: finals.clone(),
        best_thetas: &traces[best_run].params.thetas,
    };
    emit_json(&summary, pick(a.output, &file.output).as_deref())
}

fn povm_json(povm: &Povm) -> CliResult<String> {
    Ok(povm.to_json()? + "\n")
}

pub fn export(a: ToolArgs, file: &RunConfig) -> CliResult<()> {
    let (_, povm) = load_device(a.device, file)?;
    emit_text(&povm_json(&povm)?, pick(a.output, &file.output).as_deref())
}

#[derive(Serialize)]
struct InfoReport {
    n: usize,
    classical: bool,
    max_offdiag: f64,
    fidelity: f64,
    linf_coherence: f64,
    average_noise_measure: f64,
    noise_measure: Vec<f64>,
}

pub fn info(a: ToolArgs, file: &RunConfig) -> CliResult<()> {
    let (_, povm) = load_device(a.device, file)?;
    let report = InfoReport {
        n: povm.num_qubits(),
        classical: is_classical(&povm, CLASSICAL_TOL),
        max_offdiag: povm.max_offdiag_abs(),
        fidelity: measurement_fidelity(&povm),
        linf_coherence: linf_coherence(&povm),
        average_noise_measure: average_noise_measure(&povm, 0.0),
        noise_measure: (0..povm.dim()).map(|x| noise_measure(&povm, x, 0.0)).collect(),
    };
    emit_json(&report, pick(a.output, &file.output).as_deref())
}

#[derive(Serialize)]
struct PtmReport {
    n: usize,
    ptm: Vec<Vec<f64>>,
}

pub fn ptm(a: ToolArgs, file: &RunConfig) -> CliResult<()> {
    let (_, povm) = load_device(a.device, file)?;
    let m = povm_to_ptm(&povm);
    let e = m.entries();
    let report = PtmReport {
        n: m.num_qubits(),
        ptm: (0..e.nrows()).map(|i| e.row(i).iter().copied().collect()).collect(),
    };
    emit_json(&report, pick(a.output, &file.output).as_deref())
}

pub fn twirl(a: ToolArgs, method: Option<String>, file: &RunConfig) -> CliResult<()> {
    let (_, povm) = load_device(a.device, file)?;
    let method = parse_or("method", pick(method, &file.method), TwirlMethod::Pauli)?;
    emit_text(&povm_json(&effective_povm(&povm, method))?, pick(a.output, &file.output).as_deref())
}

pub fn calibrate_tool(a: ToolArgs, shots: Option<u64>, file: &RunConfig, seed: u64) -> CliResult<()> {
    let (_, povm) = load_device(a.device, file)?;
    let cal = calibration_of(&povm, pick(shots, &file.calibration_shots), seed)?;
    emit_text(&(cal.to_json()? + "\n"), pick(a.output, &file.output).as_deref())
}
