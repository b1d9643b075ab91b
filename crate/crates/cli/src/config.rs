//! Experiment configuration: a versioned JSON document, validated in full
//! before anything is computed.

use std::fmt;
use std::path::{Path, PathBuf};

use roughwave::grid::Domain;
use roughwave::kernel::{KernelSpec, RoughKernel};
use roughwave::verify::{
    CoifmanFeffermanParams, CommutatorParams, CzParams, DecayParams, DominationParams,
    EndpointParams, RefinementParams, SharpParams, WeakTypeParams,
};
use roughwave::weights::Weight;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub domain: DomainSpec,
    #[serde(default = "default_kernel")]
    pub kernel: KernelSpec,
    #[serde(default)]
    pub corpus: CorpusSpec,
    pub checks: Checks,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default = "yes")]
    pub plots: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    /// The box is `[-L, L]²`.
    pub half_width: f64,
    pub n: usize,
}

impl Default for DomainSpec {
    fn default() -> Self {
        Self {
            half_width: 1.0,
            n: 128,
        }
    }
}

/// Seed and item counts of each corpus family.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusSpec {
    pub seed: u64,
    pub pairs: usize,
    pub spikes: usize,
    pub rough: usize,
    pub smooth: usize,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            seed: 1,
            pairs: 20,
            spikes: 10,
            rough: 10,
            smooth: 10,
        }
    }
}

/// The selected checks; an absent entry is not run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checks {
    pub domination: Option<DominationParams>,
    pub weak_type_tstar: Option<WeakTypeParams>,
    pub grand_maximal_endpoint: Option<EndpointParams>,
    pub sharp_weak_type: Option<SharpParams>,
    pub coifman_fefferman: Option<CoifmanFeffermanParams>,
    pub mollification_decay: Option<DecayParams>,
    pub refinement: Option<RefinementParams>,
    pub commutator: Option<CommutatorParams>,
    pub cz_constants: Option<CzParams>,
}

fn default_kernel() -> KernelSpec {
    KernelSpec::Preset {
        preset: "sign4".into(),
        angles: Some(512),
    }
}

fn yes() -> bool {
    true
}

/// A config that cannot be run, with the position of the offending token
/// when the problem is syntactic.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaError {
    pub path: PathBuf,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.path.display())?;
        if let (Some(l), Some(c)) = (self.line, self.column) {
            write!(f, ":{l}:{c}")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for SchemaError {}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, SchemaError> {
        let text = std::fs::read_to_string(path).map_err(|e| SchemaError {
            path: path.to_path_buf(),
            line: None,
            column: None,
            message: format!("cannot read config: {e}"),
        })?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self, SchemaError> {
        let config: Self = serde_json::from_str(text).map_err(|e| SchemaError {
            path: path.to_path_buf(),
            line: Some(e.line()),
            column: Some(e.column()),
            // serde_json appends "at line L column C"; the position is
            // already in the prefix
            message: e.to_string().split(" at line ").next().unwrap_or_default().to_string(),
        })?;
        config.validate().map_err(|message| SchemaError {
            path: path.to_path_buf(),
            line: None,
            column: None,
            message,
        })?;
        Ok(config)
    }

    pub fn domain(&self) -> Domain {
        Domain::new(self.domain.half_width, self.domain.n).expect("validated")
    }

    pub fn kernel(&self) -> RoughKernel {
        RoughKernel::from_spec(&self.kernel).expect("validated")
    }

    /// Everything that can be checked without running a check.
    fn validate(&self) -> Result<(), String> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        let dom = Domain::new(self.domain.half_width, self.domain.n)
            .map_err(|e| format!("domain: {e}"))?;
        RoughKernel::from_spec(&self.kernel).map_err(|e| format!("kernel: {e}"))?;
        let c = &self.checks;
        let corpus = &self.corpus;
        let v = Validator { dom };

        if let Some(p) = &c.domination {
            v.count("corpus.pairs", corpus.pairs)?;
            v.exponents("checks.domination.r_list", &p.r_list)?;
        }
        if let Some(p) = &c.weak_type_tstar {
            v.count("corpus.spikes", corpus.spikes)?;
            v.alphas("checks.weak_type_tstar.alphas", &p.alphas)?;
            v.weights("checks.weak_type_tstar.weights", &p.weights, true)?;
        }
        if let Some(p) = &c.grand_maximal_endpoint {
            v.count("corpus.spikes", corpus.spikes)?;
            v.alphas("checks.grand_maximal_endpoint.alphas", &p.alphas)?;
            v.unit_interval("checks.grand_maximal_endpoint.lambdas", &p.lambdas)?;
            if !p.operator.is_maximal() {
                return Err("checks.grand_maximal_endpoint.operator: must be a maximal operator".into());
            }
        }
        if let Some(p) = &c.sharp_weak_type {
            v.count("corpus.spikes", corpus.spikes)?;
            v.alphas("checks.sharp_weak_type.alphas", &p.alphas)?;
            v.exponents("checks.sharp_weak_type.p_list", &p.p_list)?;
        }
        if let Some(p) = &c.coifman_fefferman {
            v.count("corpus.smooth", corpus.smooth)?;
            v.exponents("checks.coifman_fefferman.p_list", &p.p_list)?;
            v.weights("checks.coifman_fefferman.weights", &p.weights, false)?;
        }
        if let Some(p) = &c.mollification_decay {
            let path = "checks.mollification_decay";
            nonempty(&format!("{path}.l_list"), &p.l_list)?;
            nonempty(&format!("{path}.m_list"), &p.m_list)?;
            if p.l_list.iter().any(|l| *l < 0) {
                return Err(format!("{path}.l_list: depths must be non-negative"));
            }
            if p.m_list.contains(&0) {
                return Err(format!("{path}.m_list: need m >= 1"));
            }
            if p.bank_size == 0 {
                return Err(format!("{path}.bank_size: must be positive"));
            }
        }
        if let Some(p) = &c.refinement {
            v.count("corpus.rough", corpus.rough)?;
            v.exponents("checks.refinement.r_list", &p.r_list)?;
        }
        if let Some(p) = &c.commutator {
            v.count("corpus.pairs", corpus.pairs)?;
            v.count("corpus.spikes", corpus.spikes)?;
            v.exponents("checks.commutator.r_list", &p.r_list)?;
            nonempty("checks.commutator.b_list", &p.b_list)?;
            v.alphas("checks.commutator.alphas", &p.alphas)?;
            v.weights("checks.commutator.weights", &p.weights, false)?;
        }
        if let Some(p) = &c.cz_constants {
            v.count("corpus.rough", corpus.rough)?;
            v.unit_interval("checks.cz_constants.lambdas", &p.lambdas)?;
            if !(p.c1 > 0.0 && p.c1 < 0.25) {
                return Err(format!("checks.cz_constants.c1: need 0 < c1 < 1/4, got {}", p.c1));
            }
        }
        Ok(())
    }
}

fn nonempty<T>(path: &str, xs: &[T]) -> Result<(), String> {
    if xs.is_empty() {
        return Err(format!("{path}: must not be empty"));
    }
    Ok(())
}

struct Validator {
    dom: Domain,
}

impl Validator {
    fn count(&self, path: &str, n: usize) -> Result<(), String> {
        if n == 0 {
            return Err(format!("{path}: the selected checks need at least one item"));
        }
        Ok(())
    }

    fn exponents(&self, path: &str, xs: &[f64]) -> Result<(), String> {
        nonempty(path, xs)?;
        match xs.iter().find(|x| !(x.is_finite() && **x > 1.0)) {
            Some(x) => Err(format!("{path}: exponents must exceed 1, got {x}")),
            None => Ok(()),
        }
    }

    fn alphas(&self, path: &str, xs: &[f64]) -> Result<(), String> {
        nonempty(path, xs)?;
        match xs.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
            Some(x) => Err(format!("{path}: levels must be positive, got {x}")),
            None => Ok(()),
        }
    }

    fn unit_interval(&self, path: &str, xs: &[f64]) -> Result<(), String> {
        nonempty(path, xs)?;
        match xs.iter().find(|x| !(**x > 0.0 && **x < 1.0)) {
            Some(x) => Err(format!("{path}: need 0 < λ < 1, got {x}")),
            None => Ok(()),
        }
    }

    fn weights(&self, path: &str, specs: &[String], may_be_empty: bool) -> Result<(), String> {
        if !may_be_empty {
            nonempty(path, specs)?;
        }
        for s in specs {
            Weight::preset(self.dom, s).map_err(|e| format!("{path}: {e}"))?;
        }
        Ok(())
    }
}
