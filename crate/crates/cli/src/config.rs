//! Experiment configuration: a single TOML file with nesting and comments.
//! Unknown keys are rejected; `--print-config` dumps the fully resolved
//! form, and every output row embeds the sha-256 hash of that form.

use num_complex::Complex64;
use riesz_core::{CoefficientMatrix, GroupSpec, SimConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub group: GroupSection,
    #[serde(default)]
    pub alpha: AlphaSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub norms: NormsSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub transform: TransformSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSection {
    pub cyclic_orders: Vec<u32>,
    pub torus_dim: usize,
    pub band_limit: i32,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexPair {
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl From<ComplexPair> for Complex64 {
    fn from(p: ComplexPair) -> Self {
        Complex64::new(p.re, p.im)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaSection {
    /// α^x, one entry per cyclic factor.
    #[serde(default)]
    pub x: Vec<ComplexPair>,
    /// α^y as an n×n nested array.
    #[serde(default)]
    pub y: Vec<Vec<ComplexPair>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub lambda: f64,
    pub horizon_t: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub master_seed: u64,
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection { lambda: 2.0, horizon_t: 6.0, dt: 1e-3, n_paths: 20_000, master_seed: 7 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormsSection {
    pub p: Vec<f64>,
    /// 0 means the default 4·(2K+1).
    pub torus_res: usize,
    pub max_iter: usize,
    pub tol: f64,
    /// Additional seeded random coefficient sets besides [alpha].
    pub random_alphas: usize,
}

impl Default for NormsSection {
    fn default() -> Self {
        NormsSection { p: vec![1.5, 2.0, 3.0, 4.0], torus_res: 0, max_iter: 200, tol: 1e-9, random_alphas: 0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    pub weak_identity_pairs: usize,
    pub weak_identity_tol: f64,
    pub pairing_cases: usize,
    pub pairing_z_max: f64,
    pub subordination_alphas: usize,
    pub subordination_p: Vec<f64>,
    /// Torus bins per axis for the conditional-expectation map; 0 disables
    /// the map check.
    pub bins: usize,
    pub map_z_max: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection {
            weak_identity_pairs: 20,
            weak_identity_tol: 1e-12,
            pairing_cases: 1,
            pairing_z_max: 3.5,
            subordination_alphas: 2,
            subordination_p: vec![1.5, 2.0, 3.0, 4.0],
            bins: 0,
            map_z_max: 4.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformSection {
    /// Coefficient table of the input function.
    pub input: String,
    pub output_coeffs: String,
    pub output_grid: String,
    /// 0 means 2K+1 (the exact synthesis grid).
    pub torus_res: usize,
}

impl Default for TransformSection {
    fn default() -> Self {
        TransformSection {
            input: "f.coeffs".into(),
            output_coeffs: "transformed.coeffs".into(),
            output_grid: "transformed_grid.csv".into(),
            torus_res: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub n_paths: usize,
    pub output: String,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection { n_paths: 4, output: "paths.log".into() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
    /// Reduce ensembles in path order so reruns are byte-identical.
    pub fixed_order: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: ".".into(), fixed_order: true }
    }
}

impl ExperimentConfig {
    pub fn from_str(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| format!("config parse error: {e}"))
    }

    pub fn group_spec(&self) -> Result<GroupSpec, String> {
        GroupSpec::new(
            self.group.cyclic_orders.clone(),
            self.group.torus_dim,
            self.group.band_limit,
        )
        .map_err(|e| format!("invalid [group]: {e}"))
    }

    pub fn coefficients(&self, spec: &GroupSpec) -> Result<CoefficientMatrix, String> {
        let n = spec.torus_dim;
        let x: Vec<Complex64> = self.alpha.x.iter().map(|&p| p.into()).collect();
        if x.len() != spec.discrete_dims() {
            return Err(format!(
                "[alpha].x has {} entries, group has {} cyclic factors",
                x.len(),
                spec.discrete_dims()
            ));
        }
        if self.alpha.y.len() != n || self.alpha.y.iter().any(|row| row.len() != n) {
            return Err(format!("[alpha].y must be a {n}×{n} array"));
        }
        let mut y = Vec::with_capacity(n * n);
        for row in &self.alpha.y {
            for &v in row {
                y.push(v.into());
            }
        }
        CoefficientMatrix::new(x, y, n).map_err(|e| format!("invalid [alpha]: {e}"))
    }

    pub fn sim_config(&self, seed_override: Option<u64>) -> SimConfig {
        SimConfig {
            lambda: self.sim.lambda,
            horizon_t: self.sim.horizon_t,
            dt: self.sim.dt,
            n_paths: self.sim.n_paths,
            master_seed: seed_override.unwrap_or(self.sim.master_seed),
        }
    }

    /// Fully resolved TOML text (all defaults explicit).
    pub fn resolved_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// sha-256 of the resolved config, hex-encoded; embedded in every output
    /// row for provenance.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.resolved_toml().as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
