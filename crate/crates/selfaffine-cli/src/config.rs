//! Run configuration: one TOML file describes the system, the norm, and the
//! budgets of every subcommand. All fields beyond the system itself have
//! defaults, and the fully resolved configuration (defaults materialized) is
//! hashed so every output file can state exactly which settings produced it.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

use selfaffine::{
    build_pseudo_norm, build_renorm, default_theta, parse_rational, Error, ExpandingSystem,
    NormVariant, PseudoNorm, RenormedNorm, Result,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemConfig,
    #[serde(default)]
    pub norm: NormConfig,
    #[serde(default)]
    pub osc: OscConfig,
    #[serde(default)]
    pub measure: MeasureConfig,
    #[serde(default)]
    pub probe: ProbeConfig,
    #[serde(default)]
    pub convolution: ConvolutionConfig,
    #[serde(default)]
    pub render: RenderConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub dim: usize,
    /// "integer", "float", or "rational".
    #[serde(default = "default_mode")]
    pub mode: String,
    /// Row-major matrix entries (integer and float modes).
    #[serde(default)]
    pub matrix: Vec<f64>,
    /// Matrix entries as exact fractions ("p/q" or "k"), rational mode.
    #[serde(default)]
    pub matrix_rational: Vec<String>,
    /// Digit vectors, one per digit (integer and float modes).
    #[serde(default)]
    pub digits: Vec<Vec<f64>>,
    /// Digit vectors as exact fractions, rational mode.
    #[serde(default)]
    pub digits_rational: Vec<Vec<String>>,
    /// Identification tolerance for float mode.
    #[serde(default)]
    pub tau: Option<f64>,
}

fn default_mode() -> String {
    "integer".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormConfig {
    /// "step", "mollified", or "similarity".
    pub variant: String,
    /// Mollifier width (mollified variant only).
    pub delta: f64,
    /// Renorm decay rate; 0 selects the spectral default.
    pub theta: f64,
}

impl Default for NormConfig {
    fn default() -> Self {
        NormConfig { variant: "step".into(), delta: 0.25, theta: 0.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OscConfig {
    pub max_depth: usize,
    pub state_budget: usize,
}

impl Default for OscConfig {
    fn default() -> Self {
        OscConfig { max_depth: 64, state_budget: 1_000_000 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeasureConfig {
    pub depth: usize,
    pub level_margin: usize,
    pub levels: usize,
    pub anchors_per_level: usize,
    pub size_steps: usize,
    pub include_balls: bool,
    pub cylinder_budget: usize,
    /// Folds used to amplify a collision when the open set condition fails.
    pub amplify_folds: usize,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        MeasureConfig {
            depth: 13,
            level_margin: 7,
            levels: 4,
            anchors_per_level: 24,
            size_steps: 4,
            include_balls: true,
            cylinder_budget: 1 << 22,
            amplify_folds: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    pub samples: usize,
    pub seed: u64,
    pub comparability_cap: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig { samples: 4096, seed: 17, comparability_cap: 1e6 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvolutionConfig {
    pub depth: usize,
    pub trials: usize,
    pub samples: usize,
    pub seed: u64,
}

impl Default for ConvolutionConfig {
    fn default() -> Self {
        ConvolutionConfig { depth: 3, trials: 15, samples: 4096, seed: 11 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenderConfig {
    pub width: usize,
    pub height: usize,
    pub margin: f64,
    /// Points for the chaos game (style = "cloud", depth = 0).
    pub points: usize,
    pub seed: u64,
    /// "cloud" (histogram) or "norm" (heatmap of ln w).
    pub style: String,
    /// 0 samples by chaos game; ≥ 1 enumerates cylinder centers.
    pub depth: usize,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            width: 640,
            height: 480,
            margin: 0.05,
            points: 200_000,
            seed: 5,
            style: "cloud".into(),
            depth: 0,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidParameter(format!("config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| Error::InvalidParameter(format!("config parse: {e}")))
    }

    /// Hash of the fully resolved configuration (defaults included).
    pub fn hash(&self) -> String {
        let canon = toml::to_string(self).expect("resolved config serializes");
        let mut h = Sha256::new();
        h.update(canon.as_bytes());
        let digest = h.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn build_system(&self) -> Result<ExpandingSystem> {
        let s = &self.system;
        let n = s.dim;
        match s.mode.as_str() {
            "integer" => {
                let mat = int_entries(&s.matrix, n * n, "matrix")?;
                let mut digits = Vec::new();
                for d in &s.digits {
                    digits.extend(int_entries(d, n, "digit")?);
                }
                ExpandingSystem::new_integer(n, &mat, &digits)
            }
            "float" => {
                if s.matrix.len() != n * n {
                    return Err(Error::InvalidParameter("matrix length must be dim²".into()));
                }
                let mut digits = Vec::new();
                for d in &s.digits {
                    if d.len() != n {
                        return Err(Error::InvalidParameter(
                            "every digit needs dim coordinates".into(),
                        ));
                    }
                    digits.extend_from_slice(d);
                }
                let tau = s.tau.ok_or_else(|| {
                    Error::InvalidParameter("float mode requires tau".into())
                })?;
                ExpandingSystem::new_float(n, &s.matrix, &digits, tau)
            }
            "rational" => {
                let mut mat = Vec::new();
                for e in &s.matrix_rational {
                    mat.push(parse_rational(e)?);
                }
                if mat.len() != n * n {
                    return Err(Error::InvalidParameter(
                        "matrix_rational length must be dim²".into(),
                    ));
                }
                let mut digits = Vec::new();
                for d in &s.digits_rational {
                    if d.len() != n {
                        return Err(Error::InvalidParameter(
                            "every rational digit needs dim coordinates".into(),
                        ));
                    }
                    for e in d {
                        digits.push(parse_rational(e)?);
                    }
                }
                ExpandingSystem::new_rational(n, mat, digits)
            }
            other => Err(Error::InvalidParameter(format!("unknown mode \"{other}\""))),
        }
    }

    pub fn build_norms(&self, sys: &ExpandingSystem) -> Result<(RenormedNorm, PseudoNorm)> {
        let theta = if self.norm.theta > 0.0 {
            self.norm.theta
        } else {
            default_theta(&sys.matrix)
        };
        let rn = build_renorm(&sys.matrix, theta)?;
        let variant = match self.norm.variant.as_str() {
            "step" => NormVariant::Step,
            "mollified" => NormVariant::Mollified { delta: self.norm.delta },
            "similarity" => NormVariant::ExactSimilarity,
            other => {
                return Err(Error::InvalidParameter(format!("unknown norm variant \"{other}\"")))
            }
        };
        let pn = build_pseudo_norm(&sys.matrix, variant, Some(theta))?;
        Ok((rn, pn))
    }

    pub fn sweep_params(&self) -> selfaffine::SweepParams {
        let m = &self.measure;
        selfaffine::SweepParams {
            depth: m.depth,
            level_margin: m.level_margin,
            levels: m.levels,
            anchors_per_level: m.anchors_per_level,
            size_steps: m.size_steps,
            include_balls: m.include_balls,
            cylinder_budget: m.cylinder_budget,
        }
    }
}

fn int_entries(vals: &[f64], expect: usize, what: &str) -> Result<Vec<i64>> {
    if vals.len() != expect {
        return Err(Error::InvalidParameter(format!(
            "{what} needs {expect} entries, got {}",
            vals.len()
        )));
    }
    let mut out = Vec::with_capacity(vals.len());
    for &v in vals {
        if v.fract() != 0.0 || v.abs() > 2f64.powi(53) {
            return Err(Error::InvalidParameter(format!(
                "{what} entry {v} is not an exact integer"
            )));
        }
        out.push(v as i64);
    }
    Ok(out)
}
