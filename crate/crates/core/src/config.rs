//! Run configuration: a sectioned, human-readable key-value format (TOML)
//! with angles written as π expressions such as `"7pi/4"`.
//!
//! Every validation failure names the offending field, so callers can
//! surface actionable messages (and the right exit code) without parsing
//! prose.

use crate::error::{Result, SimError};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// The config format revision this build reads.
pub const CONFIG_VERSION: u32 = 1;

/// Parses an angle written as a π expression or a plain number.
///
/// Accepted forms: `"0"`, `"pi"`, `"2pi"`, `"pi/4"`, `"7pi/4"`, `"-3pi/2"`,
/// `"0.5pi"`, and plain decimals like `"1.5708"` (radians).
pub fn parse_angle(text: &str) -> Result<f64> {
    let bad = |reason: &str| {
        SimError::invalid("angle", format!("cannot parse {text:?} as an angle: {reason}"))
    };
    let s = text.trim();
    if s.is_empty() {
        return Err(bad("empty string"));
    }
    let (sign, s) = match s.strip_prefix('-') {
        Some(rest) => (-1.0, rest.trim_start()),
        None => (1.0, s.strip_prefix('+').unwrap_or(s).trim_start()),
    };
    let value = match s.find("pi") {
        None => s.parse::<f64>().map_err(|_| bad("not a number"))?,
        Some(at) => {
            let coef_text = s[..at].trim();
            let coef = if coef_text.is_empty() {
                1.0
            } else {
                coef_text.parse::<f64>().map_err(|_| bad("bad multiplier before `pi`"))?
            };
            let rest = s[at + 2..].trim();
            let denom = if rest.is_empty() {
                1.0
            } else {
                let denom_text = rest
                    .strip_prefix('/')
                    .ok_or_else(|| bad("expected `/denominator` after `pi`"))?
                    .trim();
                let d = denom_text.parse::<f64>().map_err(|_| bad("bad divisor after `pi/`"))?;
                if d == 0.0 {
                    return Err(bad("division by zero"));
                }
                d
            };
            coef * PI / denom
        }
    };
    if !value.is_finite() {
        return Err(bad("not finite"));
    }
    Ok(sign * value)
}

/// Noise environment parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    /// Dephasing strength γ (inverse time).
    pub gamma: f64,
    /// Correlation time t_c.
    pub t_c: f64,
    /// Uniform cross-correlation applied to every off-diagonal ξ entry.
    #[serde(default)]
    pub correlation: f64,
    /// Full cross-correlation matrix; overrides `correlation` when present.
    #[serde(default)]
    pub xi: Option<Vec<Vec<f64>>>,
}

/// Register geometry.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegisterSection {
    pub qubits: usize,
}

/// Hardware limits and conventions of the control fields.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlSection {
    /// Peak Rabi frequency available to any pulse.
    pub omega_max: f64,
    /// Narrowest allowed pulse width.
    pub sigma_min: f64,
    /// Convention factor between accumulated drive phase and the phase
    /// modulation seen by a dressed coherence. Physically 2: the driven
    /// doublet splits by twice the drive phase.
    pub modulation_winding: f64,
}

impl Default for ControlSection {
    fn default() -> Self {
        ControlSection { omega_max: 1.0, sigma_min: 0.5, modulation_winding: 2.0 }
    }
}

/// Which study to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    /// Competing storage/gate pulse sequences on three singles, swept over
    /// the noise correlation time.
    StorageSequences,
    /// Spectator storage + two-qubit gate protection, swept over the
    /// cross-correlation.
    GateProtection,
    /// Fixed-parameter comparison of a conventional and a protected
    /// implementation on trapped-ion-like numbers.
    TrappedIon,
}

/// Sweep axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    TC,
    Correlation,
    Gamma,
}

impl SweepParameter {
    pub fn label(&self) -> &'static str {
        match self {
            SweepParameter::TC => "t_c",
            SweepParameter::Correlation => "correlation",
            SweepParameter::Gamma => "gamma",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

/// Study selection and its inputs.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub kind: ScenarioKind,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    /// Angle targets per sequence, as π expressions; meaning depends on the
    /// scenario (one entry per register for storage sequences, spectator /
    /// antisymmetric gate / symmetric storage for gate protection).
    #[serde(default)]
    pub sequences: Option<Vec<Vec<String>>>,
    /// Pulse count per field position; scenario defaults apply when absent.
    #[serde(default)]
    pub pulses_per_field: Option<Vec<usize>>,
}

/// Estimator to run for each point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Trajectory-sampled ensemble average.
    Mc,
    /// Dressed-picture perturbative density.
    SecondOrder,
    /// State-averaged fidelity from the dephasing functionals.
    ClosedForm,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Mc => "mc",
            Method::SecondOrder => "second_order",
            Method::ClosedForm => "closed_form",
        }
    }
}

/// Sampling and integration budget.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExecutionSection {
    pub realizations: usize,
    /// Haar states scored per realization in averaged-fidelity sampling.
    pub states_per_realization: usize,
    pub seed: u64,
    /// Integrator step override; 0 or absent picks the automatic step.
    pub step: Option<f64>,
    pub methods: Vec<Method>,
    /// Duration of a standalone noise-trajectory sample, in units of t_c.
    pub sample_duration_tc: f64,
    /// Node count of a standalone noise-trajectory sample.
    pub sample_points: usize,
}

impl Default for ExecutionSection {
    fn default() -> Self {
        ExecutionSection {
            realizations: 400,
            states_per_realization: 1,
            seed: 1234,
            step: None,
            methods: vec![Method::Mc, Method::SecondOrder],
            sample_duration_tc: 10.0,
            sample_points: 1001,
        }
    }
}

/// A fully parsed and validated run configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub noise: NoiseSection,
    pub register: RegisterSection,
    #[serde(default)]
    pub control: ControlSection,
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub execution: ExecutionSection,
}

impl RunConfig {
    /// Parses and validates a config document.
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        let config: RunConfig = toml::from_str(text)
            .map_err(|e| SimError::invalid("config", e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Field-by-field sanity checks; the first violation is reported with
    /// its dotted field path.
    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(SimError::invalid(
                "version",
                format!("unsupported config version {}, expected {CONFIG_VERSION}", self.version),
            ));
        }
        if !(self.noise.gamma > 0.0) || !self.noise.gamma.is_finite() {
            return Err(SimError::invalid(
                "noise.gamma",
                format!("must be positive and finite, got {}", self.noise.gamma),
            ));
        }
        if !(self.noise.t_c > 0.0) || !self.noise.t_c.is_finite() {
            return Err(SimError::invalid(
                "noise.t_c",
                format!("must be positive and finite, got {}", self.noise.t_c),
            ));
        }
        if !(0.0..=1.0).contains(&self.noise.correlation) {
            return Err(SimError::invalid(
                "noise.correlation",
                format!("must lie in [0, 1], got {}", self.noise.correlation),
            ));
        }
        if let Some(xi) = &self.noise.xi {
            let n = self.register.qubits;
            if xi.len() != n || xi.iter().any(|row| row.len() != n) {
                return Err(SimError::invalid(
                    "noise.xi",
                    format!("must be a {n}×{n} matrix matching register.qubits"),
                ));
            }
        }
        if self.register.qubits == 0 || self.register.qubits > 12 {
            return Err(SimError::invalid(
                "register.qubits",
                format!("must be between 1 and 12, got {}", self.register.qubits),
            ));
        }
        if !(self.control.omega_max > 0.0) {
            return Err(SimError::invalid(
                "control.omega_max",
                format!("must be positive, got {}", self.control.omega_max),
            ));
        }
        if !(self.control.sigma_min > 0.0) {
            return Err(SimError::invalid(
                "control.sigma_min",
                format!("must be positive, got {}", self.control.sigma_min),
            ));
        }
        if self.control.modulation_winding == 0.0 {
            return Err(SimError::invalid(
                "control.modulation_winding",
                "must be nonzero (physical value is 2)".to_string(),
            ));
        }
        if let Some(sweep) = &self.scenario.sweep {
            if sweep.values.is_empty() {
                return Err(SimError::invalid("scenario.sweep.values", "must not be empty"));
            }
            for (i, v) in sweep.values.iter().enumerate() {
                let ok = match sweep.parameter {
                    SweepParameter::TC | SweepParameter::Gamma => *v > 0.0 && v.is_finite(),
                    SweepParameter::Correlation => (0.0..=1.0).contains(v),
                };
                if !ok {
                    return Err(SimError::invalid(
                        format!("scenario.sweep.values[{i}]"),
                        format!("{v} is out of range for {}", sweep.parameter.label()),
                    ));
                }
            }
        }
        if let Some(sequences) = &self.scenario.sequences {
            if sequences.is_empty() {
                return Err(SimError::invalid("scenario.sequences", "must not be empty"));
            }
            for (i, seq) in sequences.iter().enumerate() {
                for (j, angle) in seq.iter().enumerate() {
                    parse_angle(angle).map_err(|e| {
                        SimError::invalid(format!("scenario.sequences[{i}][{j}]"), e.to_string())
                    })?;
                }
            }
        }
        if self.execution.realizations == 0 {
            return Err(SimError::invalid(
                "execution.realizations",
                "must be at least 1 (a single realization reports no scatter estimate)",
            ));
        }
        if self.execution.states_per_realization == 0 {
            return Err(SimError::invalid("execution.states_per_realization", "must be at least 1"));
        }
        if let Some(step) = self.execution.step {
            if !(step > 0.0) || !step.is_finite() {
                return Err(SimError::invalid(
                    "execution.step",
                    format!("must be positive and finite, got {step}"),
                ));
            }
        }
        if self.execution.methods.is_empty() {
            return Err(SimError::invalid("execution.methods", "must not be empty"));
        }
        if !(self.execution.sample_duration_tc > 0.0) {
            return Err(SimError::invalid(
                "execution.sample_duration_tc",
                format!("must be positive, got {}", self.execution.sample_duration_tc),
            ));
        }
        if self.execution.sample_points < 2 {
            return Err(SimError::invalid(
                "execution.sample_points",
                format!("need at least 2 grid points, got {}", self.execution.sample_points),
            ));
        }
        Ok(())
    }

    /// The cross-correlation matrix this config describes.
    pub fn xi_matrix(&self) -> Vec<Vec<f64>> {
        match &self.noise.xi {
            Some(xi) => xi.clone(),
            None => {
                let n = self.register.qubits;
                (0..n)
                    .map(|i| {
                        (0..n)
                            .map(|j| if i == j { 1.0 } else { self.noise.correlation })
                            .collect()
                    })
                    .collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const MINIMAL: &str = r#"
version = 1

[noise]
gamma = 0.002
t_c = 30.0

[register]
qubits = 3

[scenario]
kind = "storage-sequences"
"#;

    #[test]
    fn angle_expressions_parse() {
        for (text, want) in [
            ("0", 0.0),
            ("pi", PI),
            ("2pi", 2.0 * PI),
            ("pi/4", PI / 4.0),
            ("7pi/4", 7.0 * PI / 4.0),
            ("3pi/2", 1.5 * PI),
            ("17pi/4", 17.0 * PI / 4.0),
            ("-pi/2", -PI / 2.0),
            ("+pi", PI),
            ("0.5pi", PI / 2.0),
            (" 2pi ", 2.0 * PI),
            ("1.5708", 1.5708),
            ("2.5e-1", 0.25),
        ] {
            assert_abs_diff_eq!(parse_angle(text).unwrap(), want, epsilon = 1e-15);
        }
    }

    #[test]
    fn malformed_angles_are_rejected() {
        for text in ["", "pie", "pi/0", "pi4", "2pi/", "one", "pi/pi", "--pi"] {
            assert!(parse_angle(text).is_err(), "{text:?} should fail");
        }
    }

    #[test]
    fn minimal_config_parses_with_defaults() {
        let config = RunConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(config.version, 1);
        assert_eq!(config.register.qubits, 3);
        assert_eq!(config.control.modulation_winding, 2.0);
        assert_eq!(config.execution.realizations, 400);
        assert_eq!(config.execution.methods, vec![Method::Mc, Method::SecondOrder]);
        assert_eq!(config.scenario.kind, ScenarioKind::StorageSequences);
        let xi = config.xi_matrix();
        assert_eq!(xi.len(), 3);
        assert_eq!(xi[0][0], 1.0);
        assert_eq!(xi[0][1], 0.0);
    }

    #[test]
    fn unknown_fields_are_named() {
        let text = MINIMAL.replace("[register]\nqubits = 3", "[register]\nqubits = 3\nfrobnicate = 1");
        let err = RunConfig::from_toml(&text).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("frobnicate"), "{msg}");
    }

    #[test]
    fn version_mismatch_is_reported_by_name() {
        let text = MINIMAL.replace("version = 1", "version = 9");
        let msg = format!("{}", RunConfig::from_toml(&text).unwrap_err());
        assert!(msg.contains("version"), "{msg}");
    }

    #[test]
    fn negative_gamma_is_reported_with_its_path() {
        let text = MINIMAL.replace("gamma = 0.002", "gamma = -1.0");
        let msg = format!("{}", RunConfig::from_toml(&text).unwrap_err());
        assert!(msg.contains("noise.gamma"), "{msg}");
    }

    #[test]
    fn out_of_range_correlation_is_rejected() {
        let text = MINIMAL.replace("t_c = 30.0", "t_c = 30.0\ncorrelation = 1.5");
        let msg = format!("{}", RunConfig::from_toml(&text).unwrap_err());
        assert!(msg.contains("noise.correlation"), "{msg}");
    }

    #[test]
    fn xi_shape_must_match_the_register() {
        let text = MINIMAL.replace(
            "t_c = 30.0",
            "t_c = 30.0\nxi = [[1.0, 0.5], [0.5, 1.0]]",
        );
        let msg = format!("{}", RunConfig::from_toml(&text).unwrap_err());
        assert!(msg.contains("noise.xi"), "{msg}");
    }

    #[test]
    fn sweep_and_sequences_are_validated_entrywise() {
        let text = MINIMAL.replace(
            "kind = \"storage-sequences\"",
            "kind = \"storage-sequences\"\nsweep = { parameter = \"t_c\", values = [10.0, -3.0] }",
        );
        let msg = format!("{}", RunConfig::from_toml(&text).unwrap_err());
        assert!(msg.contains("scenario.sweep.values[1]"), "{msg}");

        let text = MINIMAL.replace(
            "kind = \"storage-sequences\"",
            "kind = \"storage-sequences\"\nsequences = [[\"2pi\", \"pie\", \"0\"]]",
        );
        let msg = format!("{}", RunConfig::from_toml(&text).unwrap_err());
        assert!(msg.contains("scenario.sequences[0][1]"), "{msg}");
    }

    #[test]
    fn config_round_trips_through_toml() {
        let config = RunConfig::from_toml(MINIMAL).unwrap();
        let text = toml::to_string_pretty(&config).unwrap();
        let back = RunConfig::from_toml(&text).unwrap();
        assert_eq!(back.register.qubits, config.register.qubits);
        assert_eq!(back.execution.seed, config.execution.seed);
    }

    use std::f64::consts::PI;
}
