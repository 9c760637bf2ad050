//! Experiment configuration files (TOML).

use crate::error::{Error, Result};
use crate::experiments::SweepSettings;
use crate::kernels::{KernelSpec, PerturbationSpec};
use crate::simulator::ExternalFieldSpec;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    pub dim: usize,
    pub s: f64,
    pub alpha: f64,
    pub beta: f64,
    pub lambda: Vec<f64>,
    /// `"none"` or `"gaussian"`.
    #[serde(default = "none_str")]
    pub perturbation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_w: Option<f64>,
    #[serde(default)]
    pub delta: f64,
}

fn none_str() -> String {
    "none".into()
}

impl KernelSection {
    pub fn to_spec(&self) -> Result<KernelSpec> {
        let perturbation = match self.perturbation.as_str() {
            "none" => PerturbationSpec::None,
            "gaussian" => match (self.c, self.sigma_w) {
                (Some(amplitude), Some(width)) => PerturbationSpec::Gaussian { amplitude, width },
                _ => return Err(Error::Config("gaussian perturbation needs c and sigma_w".into())),
            },
            other => return Err(Error::Config(format!("unknown perturbation {other:?}"))),
        };
        let spec = KernelSpec {
            dim: self.dim,
            s: self.s,
            alpha: self.alpha,
            beta: self.beta,
            lambda: self.lambda.clone(),
            perturbation,
            regularization_delta: self.delta,
        };
        spec.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(spec)
    }

    pub fn from_spec(spec: &KernelSpec) -> Self {
        let (perturbation, c, sigma_w) = match spec.perturbation {
            PerturbationSpec::None => (none_str(), None, None),
            PerturbationSpec::Gaussian { amplitude, width } => ("gaussian".into(), Some(amplitude), Some(width)),
        };
        KernelSection {
            dim: spec.dim,
            s: spec.s,
            alpha: spec.alpha,
            beta: spec.beta,
            lambda: spec.lambda.clone(),
            perturbation,
            c,
            sigma_w,
            delta: spec.regularization_delta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinimizerSection {
    #[serde(default = "one")]
    pub mass: f64,
    /// `"auto"`, `"explicit"`, `"ellipse"`, `"one_dim"` or `"gradient_flow"`.
    #[serde(default = "auto_str")]
    pub method: String,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// Certification threshold on the interior deviation, relative to `|A0|`.
    #[serde(default = "default_tol")]
    pub tolerance: f64,
    /// Parameter of the reduced one-dimensional problem (kernel
    /// `|t|^{-2(1-s)} + |t|²`), used by `one_dim`; must lie in `(0, 1)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_1d: Option<f64>,
}

fn one() -> f64 {
    1.0
}
fn auto_str() -> String {
    "auto".into()
}
fn default_n() -> usize {
    2000
}
fn default_steps() -> usize {
    2000
}
fn default_tol() -> f64 {
    1e-3
}

impl Default for MinimizerSection {
    fn default() -> Self {
        MinimizerSection { mass: 1.0, method: auto_str(), n: default_n(), steps: default_steps(), tolerance: default_tol(), s_1d: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub n: usize,
    pub epsilon: f64,
    #[serde(default = "one")]
    pub lambda_drag: f64,
    /// Defaults to `0.02·sqrt(ε)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub t_final: f64,
    #[serde(default)]
    pub thermal: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_init: Option<Vec<f64>>,
    /// Constant initial velocity field.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_init: Option<Vec<f64>>,
    #[serde(default = "one_usize")]
    pub record_every: usize,
    /// Write a binary snapshot every this many steps (0: only the last).
    #[serde(default)]
    pub snapshot_every: usize,
}

fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    /// `"zero"`, `"constant"`, `"linear"` or `"rotation"`.
    pub variant: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
}

impl FieldSection {
    pub fn to_spec(&self, dim: usize) -> Result<ExternalFieldSpec> {
        let need_b = || self.b.clone().ok_or_else(|| Error::Config("external_field needs b".into()));
        let f = match self.variant.as_str() {
            "zero" => ExternalFieldSpec::Zero,
            "constant" => ExternalFieldSpec::Constant { b: need_b()? },
            "linear" => ExternalFieldSpec::Linear {
                a: self.a.clone().ok_or_else(|| Error::Config("linear field needs a".into()))?,
                b: self.b.clone().unwrap_or_else(|| vec![0.0; dim]),
            },
            "rotation" => ExternalFieldSpec::Rotation {
                omega: self.omega.ok_or_else(|| Error::Config("rotation field needs omega".into()))?,
            },
            other => return Err(Error::Config(format!("unknown external field {other:?}"))),
        };
        f.validate(dim).map_err(|e| Error::Config(e.to_string()))?;
        Ok(f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub directory: String,
    /// Subset of `csv`, `json`, `svg`.
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

fn default_dir() -> String {
    "out".into()
}
fn default_formats() -> Vec<String> {
    vec!["csv".into(), "json".into()]
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { directory: default_dir(), formats: default_formats() }
    }
}

impl OutputSection {
    pub fn wants(&self, format: &str) -> bool {
        self.formats.iter().any(|f| f == format)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kernel: KernelSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minimizer: Option<MinimizerSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external_field: Option<FieldSection>,
    #[serde(default)]
    pub output: OutputSection,
}

impl ExperimentConfig {
    /// Parses and validates every section present.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let spec = self.kernel.to_spec()?;
        let dim = spec.dim;
        self.field()?;
        if let Some(m) = &self.minimizer {
            if !(m.mass > 0.0 && m.tolerance > 0.0) {
                return Err(Error::Config("minimizer mass and tolerance must be positive".into()));
            }
            if !["auto", "explicit", "ellipse", "one_dim", "gradient_flow"].contains(&m.method.as_str()) {
                return Err(Error::Config(format!("unknown minimizer method {:?}", m.method)));
            }
            if m.s_1d.is_some_and(|s| !(s > 0.0 && s < 1.0)) {
                return Err(Error::Config("s_1d must lie in (0, 1)".into()));
            }
        }
        if let Some(s) = &self.simulation {
            if s.n == 0 || !(s.epsilon > 0.0) || !(s.t_final >= 0.0) || !(s.thermal >= 0.0) || s.record_every == 0 {
                return Err(Error::Config("simulation needs n ≥ 1, ε > 0, t_final ≥ 0, thermal ≥ 0".into()));
            }
            if s.dt.is_some_and(|d| !(d > 0.0)) {
                return Err(Error::Config("dt must be positive".into()));
            }
            for v in [&s.x_init, &s.v_init].into_iter().flatten() {
                if v.len() != dim {
                    return Err(Error::Config("x_init and v_init must match the dimension".into()));
                }
            }
        }
        if let Some(s) = &self.sweep {
            s.validate()?;
            if s.x0.len() != dim || s.v0.len() != dim {
                return Err(Error::Config("sweep x0 and v0 must match the dimension".into()));
            }
        }
        for f in &self.output.formats {
            if !["csv", "json", "svg"].contains(&f.as_str()) {
                return Err(Error::Config(format!("unknown output format {f:?}")));
            }
        }
        Ok(())
    }

    pub fn spec(&self) -> Result<KernelSpec> {
        self.kernel.to_spec()
    }

    /// The external field, `zero` when the section is absent.
    pub fn field(&self) -> Result<ExternalFieldSpec> {
        match &self.external_field {
            Some(f) => f.to_spec(self.kernel.dim),
            None => Ok(ExternalFieldSpec::Zero),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
[kernel]
dim = 2
s = 0.75
alpha = 1.0
beta = 1.0
lambda = [1.0, 2.0]
perturbation = "gaussian"
c = -0.05
sigma_w = 0.3

[minimizer]
method = "ellipse"

[simulation]
n = 500
epsilon = 0.05
t_final = 1.0
v_init = [0.5, 0.0]

[sweep]
epsilons = [0.1, 0.05, 0.025]
seeds = [1, 2]
n = 500
mass = 1.0
t_final = 1.0
lambda_drag = 1.0
x0 = [0.0, 0.0]
v0 = [0.5, 0.0]
dt_factor = 0.02
records = 20
thermal_coeff = 0.0
relax_steps = 50
bandwidth_factor = 3.0

[external_field]
variant = "linear"
a = [[-0.5, 0.2], [0.2, -0.3]]
b = [0.3, 0.1]

[output]
directory = "runs/a"
formats = ["csv", "svg"]
"#;

    #[test]
    fn round_trip() {
        let c = ExperimentConfig::from_toml(SAMPLE).unwrap();
        let text = c.to_toml().unwrap();
        let d = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(c, d);
        assert!(matches!(c.spec().unwrap().perturbation, PerturbationSpec::Gaussian { .. }));
        assert!(matches!(c.field().unwrap(), ExternalFieldSpec::Linear { .. }));
    }

    #[test]
    fn unknown_keys_fail() {
        let bad = SAMPLE.replace("seeds = [1, 2]", "seeds = [1, 2]\ncolour = 3");
        assert!(matches!(ExperimentConfig::from_toml(&bad), Err(Error::Config(_))));
        let bad = SAMPLE.replace("[output]", "[outputs]");
        assert!(ExperimentConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn invalid_values_fail() {
        assert!(ExperimentConfig::from_toml(&SAMPLE.replace("s = 0.75", "s = 1.5")).is_err());
        assert!(ExperimentConfig::from_toml(&SAMPLE.replace("0.025]", "0.02]")).is_err());
        assert!(ExperimentConfig::from_toml(&SAMPLE.replace("\"linear\"", "\"spiral\"")).is_err());
    }

    #[test]
    fn partial_sweep_section_takes_defaults() {
        let text = "[kernel]\ndim = 2\ns = 1.0\nalpha = 1.0\nbeta = 1.0\nlambda = [1.0, 1.0]\n\
                    [sweep]\nepsilons = [0.2, 0.1, 0.05]\n[minimizer]\ns_1d = 0.8\n";
        let c = ExperimentConfig::from_toml(text).unwrap();
        let s = c.sweep.unwrap();
        assert_eq!(s.n, SweepSettings::default().n);
        assert_eq!(c.minimizer.unwrap().s_1d, Some(0.8));
        assert!(ExperimentConfig::from_toml(&text.replace("s_1d = 0.8", "s_1d = 1.2")).is_err());
    }
}
