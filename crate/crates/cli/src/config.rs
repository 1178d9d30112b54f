use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use mqfb::filterbank::{lazy_spec, orthogonal_cosine_spec, FilterBankSpec, FilterMode};
use mqfb::multires::OperatorKind;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyArg {
    Lazy,
    OrthoCosine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorArg {
    Comb,
    Norm,
}

impl From<OperatorArg> for OperatorKind {
    fn from(o: OperatorArg) -> Self {
        match o {
            OperatorArg::Comb => OperatorKind::Combinatorial,
            OperatorArg::Norm => OperatorKind::Normalized,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Dense,
    Poly,
}

impl From<ModeArg> for FilterMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Dense => FilterMode::Dense,
            ModeArg::Poly => FilterMode::Polynomial,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineArg {
    None,
    Bipartite,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CommonArgs {
    /// Input files (PLY clouds, or a tree directory for `reconstruct`).
    #[arg(long, num_args = 1..)]
    pub input: Vec<PathBuf>,

    /// KNN neighbourhood size.
    #[arg(long, default_value_t = 5)]
    pub k: usize,

    /// Decomposition levels.
    #[arg(long, default_value_t = 7)]
    pub levels: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, value_enum, default_value_t = FamilyArg::Lazy)]
    pub family: FamilyArg,

    /// JSON filter-bank description; overrides --family.
    #[arg(long)]
    pub spec_file: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = OperatorArg::Comb)]
    pub operator: OperatorArg,

    /// Filter evaluation; defaults to the family's natural mode.
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,

    #[arg(long, value_enum, default_value_t = BaselineArg::None)]
    pub baseline: BaselineArg,

    /// Output directory (or report file for `verify`).
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Tolerance for PR and orthogonality checks.
    #[arg(long)]
    pub tol: Option<f64>,
}

/// Everything needed to rerun a command, embedded in each report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    #[serde(flatten)]
    pub common: CommonArgs,
    pub spec: FilterBankSpec,
    pub tolerance: f64,
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

/// Filter-bank file: a named family, or four ascending coefficient lists.
#[derive(Debug, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
enum SpecFile {
    Family {
        family: FamilyArg,
        mode: Option<FilterMode>,
    },
    Coefficients {
        h0: Vec<f64>,
        h1: Vec<f64>,
        g0: Vec<f64>,
        g1: Vec<f64>,
        mode: Option<FilterMode>,
    },
}

fn family_spec(f: FamilyArg) -> FilterBankSpec {
    match f {
        FamilyArg::Lazy => lazy_spec(),
        FamilyArg::OrthoCosine => orthogonal_cosine_spec(),
    }
}

pub fn load_spec_file(path: &Path) -> mqfb::Result<FilterBankSpec> {
    let file: SpecFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    match file {
        SpecFile::Family { family, mode } => {
            let spec = family_spec(family);
            match mode {
                Some(m) => spec.with_mode(m),
                None => Ok(spec),
            }
        }
        SpecFile::Coefficients { h0, h1, g0, g1, mode } => {
            FilterBankSpec::polynomial([h0, h1, g0, g1], mode.unwrap_or(FilterMode::Polynomial))
        }
    }
}

impl CommonArgs {
    pub fn spec(&self) -> mqfb::Result<FilterBankSpec> {
        let spec = match &self.spec_file {
            Some(path) => load_spec_file(path)?,
            None => family_spec(self.family),
        };
        match self.mode {
            Some(m) => spec.with_mode(m.into()),
            None => Ok(spec),
        }
    }

    pub fn run_config(&self, command: &str, spec: &FilterBankSpec) -> RunConfig {
        RunConfig {
            command: command.into(),
            common: self.clone(),
            spec: spec.clone(),
            tolerance: self.tol.unwrap_or_else(|| spec.default_tolerance()),
            extra: Default::default(),
        }
    }
}

impl RunConfig {
    pub fn with(mut self, key: &str, value: impl Serialize) -> Self {
        self.extra.insert(
            key.into(),
            serde_json::to_value(value).expect("config values serialize"),
        );
        self
    }
}
