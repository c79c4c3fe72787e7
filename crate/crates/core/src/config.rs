//! TOML run configuration, `schema = 1`.
//!
//! Every section is optional; omitted keys take the values of the quadratic
//! example (`f = v^2`, `g = 0`, `A = B = Laplacian - 1`).

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{IntegrateOptions, Scheme};
use crate::error::{Error, Result};
use crate::experiments::ExperimentConfig;
use crate::lyapunov_perron::LpOptions;
use crate::spectral::{split_cutoff_for, DiagonalOperator, SpectralSplit};
use crate::system::{AssumptionConstants, FastSlowSystem, PolynomialNonlinearity};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSection {
    pub epsilon: f64,
    /// Fourier resolution `K` of the full system.
    pub resolution: usize,
    /// Factor `c in (0, 1)` of the timescale gate.
    pub c: f64,
}

impl Default for SystemSection {
    fn default() -> Self {
        SystemSection { epsilon: 1e-3, resolution: 8, c: 0.95 }
    }
}

/// Either the cutoff `k0` (with the largest `zeta` selecting it) or `zeta` itself;
/// `k0 = 1` when neither is given.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub k0: Option<usize>,
    pub zeta: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantName {
    #[default]
    Full,
    Galerkin,
    ReducedSlow,
}

/// Initial fast variable for `simulate`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartKind {
    /// `u0` on the slow manifold of the example.
    #[default]
    OnManifold,
    /// `u0 = h0(v0)`.
    Critical,
    /// `u0 = 0`.
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsSection {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub stride: usize,
    pub variant: VariantName,
    pub start: StartKind,
    /// Added to mode 0 of `u0`.
    pub u_offset: f64,
    pub n: f64,
}

impl Default for DynamicsSection {
    fn default() -> Self {
        DynamicsSection {
            dt: 1e-3,
            t_end: 1.0,
            scheme: Scheme::Etdrk4,
            stride: 10,
            variant: VariantName::Full,
            start: StartKind::OnManifold,
            u_offset: 0.0,
            n: 1.0,
        }
    }
}

impl DynamicsSection {
    pub fn integrate_options(&self) -> IntegrateOptions {
        IntegrateOptions { scheme: self.scheme, stride: self.stride, n: self.n, ..Default::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub schema: u32,
    pub seed: u64,
    pub system: SystemSection,
    pub op_a: DiagonalOperator,
    pub op_b: DiagonalOperator,
    pub f: PolynomialNonlinearity,
    pub g: PolynomialNonlinearity,
    pub constants: AssumptionConstants,
    pub split: SplitSection,
    pub lp: LpOptions,
    pub dynamics: DynamicsSection,
    pub experiment: ExperimentConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            schema: SCHEMA_VERSION,
            seed: 20240601,
            system: SystemSection::default(),
            op_a: DiagonalOperator::laplacian_minus_one(),
            op_b: DiagonalOperator::laplacian_minus_one(),
            f: PolynomialNonlinearity::v_squared(),
            g: PolynomialNonlinearity::zero(),
            constants: AssumptionConstants::default(),
            split: SplitSection::default(),
            lp: LpOptions::default(),
            dynamics: DynamicsSection::default(),
            experiment: ExperimentConfig::default(),
        }
    }
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the canonical serialisation, so equivalent files hash alike.
    /// The output directory is not part of a run's identity and is left out.
    pub fn hash(&self) -> Result<String> {
        let mut c = self.clone();
        c.experiment.out_dir.clear();
        Ok(hex::encode(Sha256::digest(c.to_toml()?.as_bytes())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::Config(format!("unsupported schema {} (expected {SCHEMA_VERSION})", self.schema)));
        }
        if self.split.k0.is_some() && self.split.zeta.is_some() {
            return Err(Error::Config("set at most one of split.k0 and split.zeta".into()));
        }
        let e = &self.experiment;
        if e.m > e.n {
            return Err(Error::Config(format!("experiment.m = {} exceeds experiment.n = {}", e.m, e.n)));
        }
        if e.epsilons.iter().chain(&e.scaling_epsilons).chain([&self.system.epsilon]).any(|&x| !(x > 0.0 && x < 1.0)) {
            return Err(Error::Config("epsilon values must lie in (0, 1)".into()));
        }
        if !(self.dynamics.dt > 0.0) || !(self.dynamics.t_end >= 0.0) {
            return Err(Error::Config("dynamics.dt must be positive and t_end nonnegative".into()));
        }
        self.system().validate()
    }

    pub fn system(&self) -> FastSlowSystem {
        FastSlowSystem {
            op_a: self.op_a,
            op_b: self.op_b,
            f: self.f.clone(),
            g: self.g.clone(),
            epsilon: self.system.epsilon,
            resolution: self.system.resolution,
            constants: self.constants.clone(),
            gate_c: self.system.c,
        }
    }

    pub fn spectral_split(&self) -> Result<SpectralSplit> {
        match (self.split.k0, self.split.zeta) {
            (None, Some(zeta)) => split_cutoff_for(&self.op_b, zeta, self.constants.omega_a),
            (k0, _) => Ok(SpectralSplit::for_cutoff(&self.op_b, k0.unwrap_or(1), self.constants.omega_a)),
        }
    }
}
