//! Run configuration: a flat TOML file with command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use dissent_core::aggregation::{AhpParams, EloParams};
use dissent_core::{BootstrapParams, Country, Dimension, Membership, Normalization, ScoreFunction};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    /// Directory with proposals.csv and optional approvals/ranks/participants.
    PlatformCsv,
    /// A PrefLib strict-order-complete file.
    PreflibSoc,
    /// A synthetic electorate spec (TOML).
    SyntheticSpec,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FunctionName {
    Win,
    Copeland,
    Elo,
    Ahp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub kind: DatasetKind,
    pub function: FunctionName,
    /// Demographic splits to evaluate when profiles are present.
    pub splits: Vec<Dimension>,
    /// Which shipped label tables to use.
    pub country: Country,
    pub bootstrap_iters: usize,
    pub bootstrap_fraction: f64,
    pub bootstrap_divisiveness: bool,
    pub iia_threshold: usize,
    pub seed: u64,
    /// Output directory. Not part of the config hash.
    pub out: PathBuf,
    pub formats: Vec<Format>,

    /// Apply suspicious-user removal and deduplication (never for PrefLib).
    pub curate: bool,
    pub accepted_universes: Vec<i32>,
    pub recaptcha_threshold: f64,
    pub static_rank_max_update_rate: f64,
    pub static_rank_min_panels: usize,
    pub max_approvals: Option<usize>,
    /// CSV with a `user_id` column listing consenting users.
    pub consent: Option<PathBuf>,
    /// CSV with `candidate_id,orientation` (left, right, centrist).
    pub orientations: Option<PathBuf>,

    pub elo_k: f64,
    pub elo_s0: f64,
    pub elo_shuffles: usize,
    pub ahp_smoothing: bool,
    pub membership: Membership,
    pub normalization: Normalization,

    pub audit_iia: bool,
    pub audit_convergence: bool,
    pub audit_spectral: bool,
    /// Empty means a default grid of fractions of the record count.
    pub convergence_sizes: Vec<usize>,
    pub convergence_iters: usize,
    pub factors: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            kind: DatasetKind::PlatformCsv,
            function: FunctionName::Win,
            splits: Dimension::ALL.to_vec(),
            country: Country::France,
            bootstrap_iters: 30,
            bootstrap_fraction: 0.5,
            bootstrap_divisiveness: false,
            iia_threshold: 4,
            seed: 0,
            out: PathBuf::from("out"),
            formats: vec![Format::Csv, Format::Json],
            curate: true,
            accepted_universes: vec![2, 4, 5, 6],
            recaptcha_threshold: 0.7,
            static_rank_max_update_rate: 0.10,
            static_rank_min_panels: 3,
            max_approvals: None,
            consent: None,
            orientations: None,
            elo_k: 10.0,
            elo_s0: 400.0,
            elo_shuffles: 30,
            ahp_smoothing: true,
            membership: Membership::Majority,
            normalization: Normalization::ValidTerms,
            audit_iia: true,
            audit_convergence: true,
            audit_spectral: true,
            convergence_sizes: Vec::new(),
            convergence_iters: 30,
            factors: 5,
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Clone, Debug, Default, clap::Args)]
pub struct Overrides {
    /// Flat TOML run configuration
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Input directory, PrefLib file or synthetic spec
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    pub kind: Option<DatasetKind>,
    #[arg(long, value_enum, global = true)]
    pub function: Option<FunctionName>,
    /// Demographic split (repeatable): politics, location, age, sex, education, zone
    #[arg(long = "split", value_parser = parse_dimension, global = true)]
    pub splits: Vec<Dimension>,
    #[arg(long, global = true)]
    pub bootstrap_iters: Option<usize>,
    #[arg(long, global = true)]
    pub bootstrap_fraction: Option<f64>,
    #[arg(long, global = true)]
    pub iia_threshold: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output format (repeatable)
    #[arg(long = "format", value_enum, global = true)]
    pub formats: Vec<Format>,
}

fn parse_dimension(s: &str) -> std::result::Result<Dimension, String> {
    Dimension::parse(s).ok_or_else(|| format!("unknown dimension '{s}'"))
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        Ok(toml::from_str(s)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Config file (if any) with command-line overrides applied.
    pub fn resolve(o: &Overrides) -> Result<Self> {
        let mut c = match &o.config {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        if let Some(v) = &o.input {
            c.input = Some(v.clone());
        }
        if let Some(v) = o.kind {
            c.kind = v;
        }
        if let Some(v) = o.function {
            c.function = v;
        }
        if !o.splits.is_empty() {
            c.splits = o.splits.clone();
        }
        if let Some(v) = o.bootstrap_iters {
            c.bootstrap_iters = v;
        }
        if let Some(v) = o.bootstrap_fraction {
            c.bootstrap_fraction = v;
        }
        if let Some(v) = o.iia_threshold {
            c.iia_threshold = v;
        }
        if let Some(v) = o.seed {
            c.seed = v;
        }
        if let Some(v) = &o.out {
            c.out = v.clone();
        }
        if !o.formats.is_empty() {
            c.formats = o.formats.clone();
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.formats.is_empty() {
            bail!("at least one output format is required");
        }
        if !(self.bootstrap_fraction > 0.0 && self.bootstrap_fraction <= 1.0) {
            bail!(
                "bootstrap_fraction {} is outside (0, 1]",
                self.bootstrap_fraction
            );
        }
        if self.bootstrap_iters == 0 {
            bail!("bootstrap_iters must be positive");
        }
        Ok(())
    }

    pub fn input(&self) -> Result<&Path> {
        self.input
            .as_deref()
            .context("no input given (use --input or `input` in the config)")
    }

    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }

    /// SHA-256 of the canonical TOML form of every result-affecting setting.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = PathBuf::new();
        c.formats.sort();
        c.formats.dedup();
        let text = toml::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn score_function(&self) -> ScoreFunction {
        match self.function {
            FunctionName::Win => ScoreFunction::Win,
            FunctionName::Copeland => ScoreFunction::Copeland,
            FunctionName::Elo => ScoreFunction::Elo(EloParams {
                k_factor: self.elo_k,
                s0: self.elo_s0,
                shuffles: self.elo_shuffles,
                seed: self.seed,
            }),
            FunctionName::Ahp => ScoreFunction::Ahp(AhpParams {
                smoothing: self.ahp_smoothing,
                ..AhpParams::default()
            }),
        }
    }

    pub fn bootstrap(&self) -> BootstrapParams {
        BootstrapParams {
            iterations: self.bootstrap_iters,
            fraction: self.bootstrap_fraction,
            seed: self.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(RunConfig::from_toml_str("").unwrap(), RunConfig::default());
    }

    #[test]
    fn flat_keys_parse() {
        let c = RunConfig::from_toml_str(
            "kind = \"preflib-soc\"\nfunction = \"copeland\"\nsplits = [\"politics\", \"age\"]\nseed = 7\nmembership = \"any-record\"\n",
        )
        .unwrap();
        assert_eq!(c.kind, DatasetKind::PreflibSoc);
        assert_eq!(c.function, FunctionName::Copeland);
        assert_eq!(c.splits, vec![Dimension::Politics, Dimension::Age]);
        assert_eq!(c.membership, Membership::AnyRecord);
        assert!(RunConfig::from_toml_str("nonsense = 1").is_err());
    }

    #[test]
    fn hash_ignores_output_dir_only() {
        let a = RunConfig::default();
        let b = RunConfig {
            out: "elsewhere".into(),
            ..RunConfig::default()
        };
        let c = RunConfig {
            seed: 1,
            ..RunConfig::default()
        };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn overrides_win() {
        let o = Overrides {
            seed: Some(5),
            function: Some(FunctionName::Elo),
            formats: vec![Format::Json],
            ..Default::default()
        };
        let c = RunConfig::resolve(&o).unwrap();
        assert_eq!(c.seed, 5);
        assert!(matches!(c.score_function(), ScoreFunction::Elo(p) if p.seed == 5));
        assert!(!c.wants(Format::Csv));
    }
}
