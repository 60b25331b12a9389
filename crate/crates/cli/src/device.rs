use std::path::PathBuf;
use std::str::FromStr;

use mnl::mitigate::CalibrationMatrix;
use mnl::noisemodel::{confusion_measurement, ry_measurement};
use mnl::qcore::{cat_state, ghz_state, maximally_mixed, parse_bits, plus_theta_state};
use mnl::{DensityState, Povm};

use crate::error::{CliError, CliResult};

/// Qubit counts the dense simulator handles comfortably.
const MAX_QUBITS: usize = 6;

/// Measurement device selected with `--device`.
#[derive(Clone, Debug, PartialEq)]
pub enum DeviceSpec {
    /// `ry:N:ANGLE`: every qubit rotated by `Ry(ANGLE)` before a computational-basis readout.
    Ry { n: usize, angle: f64 },
    /// `ideal:N`: noiseless computational-basis measurement.
    Ideal { n: usize },
    /// `povm:PATH`: POVM JSON file.
    PovmFile(PathBuf),
    /// `confusion:PATH`: classical device from a calibration-matrix JSON file.
    ConfusionFile(PathBuf),
}

fn parse_qubits(s: &str) -> CliResult<usize> {
    let n: usize = s
        .parse()
        .map_err(|_| CliError::config(format!("invalid qubit count '{s}'")))?;
    if n == 0 || n > MAX_QUBITS {
        return Err(CliError::config(format!("qubit count must be in 1..={MAX_QUBITS}, got {n}")));
    }
    Ok(n)
}

fn parse_angle(s: &str) -> CliResult<f64> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| CliError::config(format!("invalid angle '{s}'")))
}

impl FromStr for DeviceSpec {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        match kind {
            "ry" => {
                let (n, angle) = rest
                    .split_once(':')
                    .ok_or_else(|| CliError::config(format!("expected ry:N:ANGLE, got '{s}'")))?;
                Ok(Self::Ry {
                    n: parse_qubits(n)?,
                    angle: parse_angle(angle)?,
                })
            }
            "ideal" => Ok(Self::Ideal { n: parse_qubits(rest)? }),
            "povm" if !rest.is_empty() => Ok(Self::PovmFile(rest.into())),
            "confusion" if !rest.is_empty() => Ok(Self::ConfusionFile(rest.into())),
            _ => Err(CliError::config(format!(
                "unknown device '{s}' (expected ry:N:ANGLE, ideal:N, povm:PATH or confusion:PATH)"
            ))),
        }
    }
}

impl DeviceSpec {
    pub fn load(&self) -> CliResult<Povm> {
        match self {
            Self::Ry { n, angle } => Ok(ry_measurement(*n, *angle)),
            Self::Ideal { n } => Ok(Povm::ideal(*n)),
            Self::PovmFile(path) => {
                let text = read(path)?;
                Povm::from_json(&text).map_err(|e| CliError::from(e).context(path.display()))
            }
            Self::ConfusionFile(path) => {
                let cal = load_calibration(path)?;
                Ok(confusion_measurement(cal.matrix())?)
            }
        }
    }
}

pub fn read(path: &std::path::Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::from(e).context(path.display()))
}

pub fn load_calibration(path: &std::path::Path) -> CliResult<CalibrationMatrix> {
    CalibrationMatrix::from_json(&read(path)?).map_err(|e| CliError::from(e).context(path.display()))
}

/// Input state selected with `--state`.
#[derive(Clone, Debug, PartialEq)]
pub enum StateSpec {
    /// `zero`: `|0…0⟩`.
    Zero,
    /// `basis:BITS`: computational basis state, qubit 0 leftmost.
    Basis(usize),
    /// `plus:THETA`: `|+_θ⟩^{⊗n}`.
    Plus(f64),
    /// `mixed`: maximally mixed state.
    Mixed,
    /// `ghz`: `(|0…0⟩ + |1…1⟩)/√2`.
    Ghz,
    /// `cat:PHI`: `(|0…0⟩ + e^{iφ}|1…1⟩)/√2`.
    Cat(f64),
}

impl FromStr for StateSpec {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        match (kind, rest.is_empty()) {
            ("zero", true) => Ok(Self::Zero),
            ("mixed", true) => Ok(Self::Mixed),
            ("ghz", true) => Ok(Self::Ghz),
            ("basis", false) => {
                let (x, _) = parse_bits(rest).map_err(|e| CliError::config(e.to_string()))?;
                Ok(Self::Basis(x))
            }
            ("plus", false) => Ok(Self::Plus(parse_angle(rest)?)),
            ("cat", false) => Ok(Self::Cat(parse_angle(rest)?)),
            _ => Err(CliError::config(format!(
                "unknown state '{s}' (expected zero, basis:BITS, plus:THETA, mixed, ghz or cat:PHI)"
            ))),
        }
    }
}

impl StateSpec {
    pub fn build(&self, n: usize) -> CliResult<DensityState> {
        Ok(match self {
            Self::Zero => DensityState::basis(0, n),
            Self::Basis(x) => {
                if *x >= 1 << n {
                    return Err(CliError::config(format!("basis state {x} does not fit in {n} qubits")));
                }
                DensityState::basis(*x, n)
            }
            Self::Plus(theta) => plus_theta_state(*theta, n),
            Self::Mixed => maximally_mixed(n),
            Self::Ghz => ghz_state(n),
            Self::Cat(phi) => cat_state(n, *phi),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn device_specs() {
        assert_eq!("ry:3:0.5".parse::<DeviceSpec>().unwrap(), DeviceSpec::Ry { n: 3, angle: 0.5 });
        assert_eq!("ideal:4".parse::<DeviceSpec>().unwrap(), DeviceSpec::Ideal { n: 4 });
        assert_eq!(
            "povm:a/b.json".parse::<DeviceSpec>().unwrap(),
            DeviceSpec::PovmFile("a/b.json".into())
        );
        for bad in ["ry:3", "ry:0:1", "ideal:x", "povm:", "foo:1", "ry:2:nan"] {
            assert_eq!(bad.parse::<DeviceSpec>().unwrap_err().code, crate::error::EXIT_CONFIG, "{bad}");
        }
    }

    #[test]
    fn state_specs() {
        assert_eq!("zero".parse::<StateSpec>().unwrap(), StateSpec::Zero);
        assert_eq!("basis:10".parse::<StateSpec>().unwrap(), StateSpec::Basis(2));
        assert!("basis:".parse::<StateSpec>().is_err());
        assert!("zero:1".parse::<StateSpec>().is_err());
        assert!(StateSpec::Basis(4).build(2).is_err());
    }
}
