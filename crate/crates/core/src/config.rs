//! Run configuration: a single TOML file, every field defaulted.

use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cohort::{default_l_axis, default_s_axis, CreationBucket, ThresholdRule};
use crate::corpus::CorpusPaths;
use crate::lexicon::LexiconFormat;
use crate::model::TrainConfig;
use crate::synth::SynthSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub rng_seed: u64,
    pub out_dir: PathBuf,
    /// Worker threads; 0 uses every core. Outputs do not depend on it.
    pub workers: usize,
    pub corpus: CorpusSection,
    pub cohort: CohortSection,
    pub control: ControlSection,
    pub features: FeaturesSection,
    pub model: ModelSection,
    pub topics: TopicsSection,
    pub synth: SynthSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            rng_seed: 42,
            out_dir: PathBuf::from("out"),
            workers: 0,
            corpus: CorpusSection::default(),
            cohort: CohortSection::default(),
            control: ControlSection::default(),
            features: FeaturesSection::default(),
            model: ModelSection::default(),
            topics: TopicsSection::default(),
            synth: SynthSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    /// Directory holding the five conventionally named files.
    pub dir: Option<PathBuf>,
    pub users: Option<PathBuf>,
    pub tweets: Option<PathBuf>,
    pub likes: Option<PathBuf>,
    pub follows: Option<PathBuf>,
    pub seeds: Option<PathBuf>,
    /// Generate the corpus from `[synth]` into `<out_dir>/corpus` first.
    pub synthetic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortSection {
    pub l_min: u64,
    pub s_min: usize,
    pub max_cov: f64,
    pub require_follow: bool,
    /// Choose `(l_min, s_min)` from the grid instead of using the fixed values.
    pub auto_thresholds: bool,
    pub target_size: u64,
    pub at_or_below: bool,
    pub min_likes: Option<u64>,
    pub min_sources: Option<usize>,
    pub l_axis: Vec<u64>,
    pub s_axis: Vec<usize>,
}

impl Default for CohortSection {
    fn default() -> Self {
        CohortSection {
            l_min: 25,
            s_min: 4,
            max_cov: 1.0,
            require_follow: true,
            auto_thresholds: false,
            target_size: 10_000,
            at_or_below: false,
            min_likes: None,
            min_sources: None,
            l_axis: default_l_axis(),
            s_axis: default_s_axis(),
        }
    }
}

impl CohortSection {
    pub fn rule(&self) -> ThresholdRule {
        ThresholdRule {
            target: self.target_size,
            at_or_below: self.at_or_below,
            min_likes: self.min_likes,
            min_sources: self.min_sources,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlSection {
    pub target_language: String,
    pub creation_bucket: CreationBucket,
    /// Candidates must have used one of this many top cohort hashtags.
    pub top_hashtags: usize,
    /// Control size; the conspiracy cohort size when absent.
    pub size: Option<usize>,
    pub allow_overflow: bool,
}

impl Default for ControlSection {
    fn default() -> Self {
        ControlSection {
            target_language: "en".into(),
            creation_bucket: CreationBucket::Quarter,
            top_hashtags: 10,
            size: None,
            allow_overflow: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LexiconSpec {
    pub name: String,
    pub path: PathBuf,
    pub format: LexiconFormat,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesSection {
    /// Age reference; the latest profile snapshot when absent.
    pub snapshot: Option<DateTime<Utc>>,
    pub lexicons: Vec<LexiconSpec>,
    /// `user_id` + numeric columns CSVs joined onto the matrix.
    pub external: Vec<PathBuf>,
}

/// Training hyperparameters; the seed comes from the top-level `rng_seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    pub k_folds: usize,
    pub test_fraction: f64,
    pub lambda: f64,
    pub max_bins: usize,
    /// Feature counts for the growth curve; every count when absent.
    pub curve_ks: Option<Vec<usize>>,
}

impl Default for ModelSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        ModelSection {
            n_trees: t.n_trees,
            max_depth: t.max_depth,
            learning_rate: t.learning_rate,
            min_samples_leaf: t.min_samples_leaf,
            k_folds: t.k_folds,
            test_fraction: t.test_fraction,
            lambda: t.lambda,
            max_bins: t.max_bins,
            curve_ks: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopicsSection {
    pub top_k: usize,
}

impl Default for TopicsSection {
    fn default() -> Self {
        TopicsSection { top_k: 50 }
    }
}

impl RunConfig {
    /// Parses TOML; relative paths are taken relative to `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<RunConfig, toml::de::Error> {
        let mut cfg: RunConfig = toml::from_str(text)?;
        cfg.rebase(base);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        RunConfig::from_toml(&text, base).map_err(|e| format!("{}: {e}", path.display()))
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out_dir);
        let c = &mut self.corpus;
        for p in [
            &mut c.dir,
            &mut c.users,
            &mut c.tweets,
            &mut c.likes,
            &mut c.follows,
            &mut c.seeds,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        for l in &mut self.features.lexicons {
            fix(&mut l.path);
        }
        for p in &mut self.features.external {
            fix(p);
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let m = &self.model;
        TrainConfig {
            n_trees: m.n_trees,
            max_depth: m.max_depth,
            learning_rate: m.learning_rate,
            min_samples_leaf: m.min_samples_leaf,
            rng_seed: self.rng_seed,
            k_folds: m.k_folds,
            test_fraction: m.test_fraction,
            lambda: m.lambda,
            max_bins: m.max_bins,
        }
    }

    /// Corpus file locations. Explicit per-file paths win over `dir`.
    pub fn corpus_paths(&self) -> CorpusPaths {
        let dir = if self.corpus.synthetic {
            self.out_dir.join("corpus")
        } else {
            self.corpus
                .dir
                .clone()
                .unwrap_or_else(|| PathBuf::from("."))
        };
        let d = CorpusPaths::in_dir(dir);
        let c = &self.corpus;
        let pick = |o: &Option<PathBuf>, default: PathBuf| o.clone().unwrap_or(default);
        CorpusPaths {
            users: pick(&c.users, d.users),
            tweets: pick(&c.tweets, d.tweets),
            likes: pick(&c.likes, d.likes),
            follows: pick(&c.follows, d.follows),
            seeds: pick(&c.seeds, d.seeds),
        }
    }

    /// Every problem found, so a user can fix them in one pass.
    pub fn problems(&self) -> Vec<String> {
        let mut out = self.settings_problems();
        out.extend(self.input_problems());
        out
    }

    /// Problems in the values themselves, without touching the filesystem.
    pub fn settings_problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        for p in self.train_config().problems() {
            out.push(format!("model: {p}"));
        }
        if let Some(ks) = &self.model.curve_ks {
            if ks.is_empty() || ks.contains(&0) {
                out.push("model.curve_ks must be non-empty and positive".into());
            }
        }
        let c = &self.cohort;
        if c.l_min == 0 || c.s_min == 0 {
            out.push("cohort.l_min and cohort.s_min must be at least 1".into());
        }
        if c.max_cov.is_nan() || c.max_cov < 0.0 {
            out.push(format!(
                "cohort.max_cov = {} must be non-negative",
                c.max_cov
            ));
        }
        if c.target_size == 0 {
            out.push("cohort.target_size must be positive".into());
        }
        if c.l_axis.is_empty() || c.l_axis[0] == 0 || !c.l_axis.windows(2).all(|w| w[0] < w[1]) {
            out.push("cohort.l_axis must be positive and strictly ascending".into());
        }
        if c.s_axis.is_empty() || c.s_axis[0] == 0 || !c.s_axis.windows(2).all(|w| w[0] < w[1]) {
            out.push("cohort.s_axis must be positive and strictly ascending".into());
        }
        let k = &self.control;
        if k.target_language.trim().is_empty() {
            out.push("control.target_language must not be empty".into());
        }
        if k.top_hashtags == 0 {
            out.push("control.top_hashtags must be positive".into());
        }
        if k.size == Some(0) {
            out.push("control.size must be positive".into());
        }
        if k.creation_bucket == CreationBucket::Days(0) {
            out.push("control.creation_bucket days must be positive".into());
        }
        if self.topics.top_k == 0 {
            out.push("topics.top_k must be positive".into());
        }
        if self.corpus.synthetic {
            for p in self.synth.problems() {
                out.push(format!("synth: {p}"));
            }
        }
        let mut names = std::collections::BTreeSet::new();
        for l in &self.features.lexicons {
            if !names.insert(l.name.as_str()) {
                out.push(format!("lexicon name {} is used twice", l.name));
            }
        }
        out
    }

    /// Input files that do not exist. A synthetic corpus is not checked.
    pub fn input_problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.corpus.synthetic {
            let paths = self.corpus_paths();
            for p in paths.all() {
                if !p.is_file() {
                    out.push(format!("corpus file {} does not exist", p.display()));
                }
            }
        }
        for l in &self.features.lexicons {
            if !l.path.is_file() {
                out.push(format!("lexicon file {} does not exist", l.path.display()));
            }
        }
        for p in &self.features.external {
            if !p.is_file() {
                out.push(format!(
                    "external feature file {} does not exist",
                    p.display()
                ));
            }
        }
        out
    }

    /// SHA-256 of the canonical JSON form, ignoring the output directory and
    /// worker count, which do not affect results.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        c.workers = 0;
        let json = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}
