//! Stage runner. Every stage reads its inputs from the output directory (or
//! the corpus), writes its artifacts there and records them in
//! `manifest.json` with content hashes, the config hash and the seed.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cohort::{
    auto_thresholds_with, build_control, build_like_matrix, filter_cov, filter_follows_seed,
    select_cohort, threshold_grid, top_hashtags, topic_candidates, CohortError, CohortFile,
    ControlConstraints,
};
use crate::config::RunConfig;
use crate::corpus::{
    load_corpus, validate_corpus, Corpus, CorpusError, LoadCounts, ValidationReport,
};
use crate::features::{
    feature_matrix, tokenized_timelines, FeatureError, FeatureMeta, Snapshot, TIMELINE_CAP,
    TOKENIZER_VERSION,
};
use crate::lexicon::{append_lexicon_features, join_external_features, load_lexicon, LexiconError};
use crate::matrix::{
    Column, FeatureGroup, FeatureMatrix, MatrixError, LABEL_CONSPIRACY, LABEL_CONTROL,
};
use crate::model::{
    baseline_majority, baseline_random, cross_validate, evaluate, f1_growth_curve, feature_report,
    fit_evaluate, importance_ranking, predict_labels, stratified_split, train_gbdt, CvSummary,
    Imputer, Metrics, ModelError, Split, TreeEnsemble, RANDOM_BASELINE_DRAWS,
};
use crate::synth::{generate_corpus, write_synth, SynthError};
use crate::topics::{cooccurrence_graph, top_k_subgraph};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const COHORT_FILE: &str = "cohort.json";
pub const CONTROL_FILE: &str = "control.json";
pub const GRID_FILE: &str = "grid.csv";
pub const HASHTAGS_FILE: &str = "hashtags.csv";
pub const VALIDATION_FILE: &str = "validation.json";
pub const FEATURES_FILE: &str = "features.csv";
pub const FEATURES_META_FILE: &str = "features.meta.json";
pub const MODEL_FILE: &str = "model.json";
pub const SPLIT_FILE: &str = "split.json";
pub const METRICS_FILE: &str = "metrics.json";
pub const IMPORTANCE_FILE: &str = "importance.csv";
pub const CURVE_FILE: &str = "curve.csv";
pub const EDGES_FILE: &str = "edges.csv";
pub const NODES_FILE: &str = "nodes.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    SynthGenerate,
    IngestValidate,
    CohortBuild,
    HashtagsTop,
    CohortControl,
    FeaturesExtract,
    Train,
    Evaluate,
    Importance,
    Curve,
    TopicsGraph,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::SynthGenerate => "synth generate",
            Stage::IngestValidate => "ingest validate",
            Stage::CohortBuild => "cohort build",
            Stage::HashtagsTop => "hashtags top",
            Stage::CohortControl => "cohort control",
            Stage::FeaturesExtract => "features extract",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Importance => "importance",
            Stage::Curve => "curve",
            Stage::TopicsGraph => "topics graph",
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),
    #[error("stage `{stage}` needs {artifact}, which is missing; run `{producer}` first")]
    MissingArtifact {
        stage: &'static str,
        artifact: String,
        producer: &'static str,
    },
    #[error("stage `{stage}`: {message}")]
    Stage {
        stage: &'static str,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Cohort(#[from] CohortError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

type Result<T> = std::result::Result<T, PipelineError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = std::fs::File::open(path).map_err(io_err(path))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(io_err(path))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("artifact serializes");
    write_text(path, &(text + "\n"))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// One stage's record in `manifest.json`. The stored config alone is
/// enough to rerun the stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub version: String,
    pub config_hash: String,
    pub rng_seed: u64,
    pub config: RunConfig,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub parameters: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub stages: BTreeMap<String, StageRecord>,
}

/// Everything `metrics.json` reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rng_seed: u64,
    pub n_users: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub n_features: usize,
    pub holdout: Metrics,
    pub majority_baseline: Metrics,
    pub random_baseline: Metrics,
    pub random_baseline_draws: usize,
    pub cross_validation: CvSummary,
    pub feature_sets: Vec<FeatureSetResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSetResult {
    pub name: String,
    pub n_features: usize,
    pub holdout: Metrics,
}

/// Builds a pool with `workers` threads (0 = one per core) and runs `f` in it.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| PipelineError::Stage {
            stage: "setup",
            message: e.to_string(),
        })?;
    Ok(pool.install(f))
}

pub struct Pipeline {
    cfg: RunConfig,
    out: PathBuf,
    config_hash: String,
    corpus: OnceLock<Corpus>,
}

impl Pipeline {
    /// Validates the configuration and creates the output directory.
    pub fn new(cfg: RunConfig) -> Result<Pipeline> {
        let problems = cfg.problems();
        if !problems.is_empty() {
            return Err(PipelineError::Config(problems));
        }
        Self::open(cfg)
    }

    /// Like [`Pipeline::new`] but does not require the input files, for
    /// `synth generate` and stages that only read earlier artifacts.
    pub fn settings_only(cfg: RunConfig) -> Result<Pipeline> {
        let problems = cfg.settings_problems();
        if !problems.is_empty() {
            return Err(PipelineError::Config(problems));
        }
        Self::open(cfg)
    }

    fn open(cfg: RunConfig) -> Result<Pipeline> {
        let out = cfg.out_dir.clone();
        std::fs::create_dir_all(&out).map_err(io_err(&out))?;
        Ok(Pipeline {
            config_hash: cfg.hash(),
            cfg,
            out,
            corpus: OnceLock::new(),
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn out_dir(&self) -> &Path {
        &self.out
    }

    pub fn artifact(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn require(&self, stage: Stage, name: &str, producer: Stage) -> Result<PathBuf> {
        let p = self.artifact(name);
        if p.is_file() {
            Ok(p)
        } else {
            Err(PipelineError::MissingArtifact {
                stage: stage.name(),
                artifact: name.to_string(),
                producer: producer.name(),
            })
        }
    }

    fn corpus(&self) -> Result<&Corpus> {
        if let Some(c) = self.corpus.get() {
            return Ok(c);
        }
        let paths = self.cfg.corpus_paths();
        for p in paths.all() {
            if !p.is_file() {
                return Err(PipelineError::Stage {
                    stage: Stage::IngestValidate.name(),
                    message: format!("corpus file {} does not exist", p.display()),
                });
            }
        }
        let (c, counts) = load_corpus(&paths)?;
        log::info!(
            "loaded {} users, {} tweets, {} likes, {} follows, {} seeds",
            counts.users,
            counts.tweets,
            counts.likes,
            counts.follows,
            counts.seeds
        );
        let _ = self.corpus.set(c);
        Ok(self.corpus.get().expect("just set"))
    }

    fn corpus_inputs(&self) -> Result<BTreeMap<String, String>> {
        let mut m = BTreeMap::new();
        for p in self.cfg.corpus_paths().all() {
            m.insert(p.display().to_string(), sha256_file(p)?);
        }
        Ok(m)
    }

    fn hashes(&self, names: &[&str]) -> Result<BTreeMap<String, String>> {
        names
            .iter()
            .map(|n| Ok((n.to_string(), sha256_file(&self.artifact(n))?)))
            .collect()
    }

    fn record(
        &self,
        stage: Stage,
        inputs: BTreeMap<String, String>,
        outputs: &[&str],
        parameters: BTreeMap<String, Value>,
    ) -> Result<()> {
        let outputs = self.hashes(outputs)?;
        self.record_hashed(stage, inputs, outputs, parameters)
    }

    fn record_hashed(
        &self,
        stage: Stage,
        inputs: BTreeMap<String, String>,
        outputs: BTreeMap<String, String>,
        parameters: BTreeMap<String, Value>,
    ) -> Result<()> {
        let path = self.artifact(MANIFEST_FILE);
        let mut manifest = if path.is_file() {
            read_json::<Manifest>(&path).unwrap_or_else(|e| {
                log::warn!("{e}; starting a new manifest");
                Manifest::default()
            })
        } else {
            Manifest::default()
        };
        manifest.stages.insert(
            stage.name().to_string(),
            StageRecord {
                version: VERSION.into(),
                config_hash: self.config_hash.clone(),
                rng_seed: self.cfg.rng_seed,
                config: self.cfg.clone(),
                inputs,
                outputs,
                parameters,
            },
        );
        write_json(&path, &manifest)
    }

    /// Writes the synthetic corpus described by `[synth]` into `dir`.
    pub fn synth_generate(&self, dir: &Path) -> Result<BTreeMap<String, u8>> {
        let out = generate_corpus(&self.cfg.synth, self.cfg.rng_seed)?;
        write_synth(&out, dir)?;
        let mut files: Vec<PathBuf> = crate::corpus::CorpusPaths::in_dir(dir)
            .all()
            .iter()
            .map(|p| p.to_path_buf())
            .collect();
        files.push(dir.join("ground_truth.json"));
        let mut outputs = BTreeMap::new();
        for f in &files {
            outputs.insert(f.display().to_string(), sha256_file(f)?);
        }
        let params = BTreeMap::from([
            ("corpus_dir".to_string(), json!(dir.display().to_string())),
            ("n_per_group".to_string(), json!(self.cfg.synth.n_per_group)),
            ("separation".to_string(), json!(self.cfg.synth.separation)),
        ]);
        self.record_hashed(Stage::SynthGenerate, BTreeMap::new(), outputs, params)?;
        Ok(out.ground_truth)
    }

    pub fn ingest_validate(&self) -> Result<(LoadCounts, ValidationReport)> {
        let c = self.corpus()?;
        let counts = LoadCounts {
            users: c.users.len(),
            tweets: c.tweet_count(),
            likes: c.likes.len(),
            follows: c.follows.len(),
            seeds: c.seeds.len(),
        };
        let report = validate_corpus(c);
        write_json(
            &self.artifact(VALIDATION_FILE),
            &json!({ "counts": counts, "report": report }),
        )?;
        self.record(
            Stage::IngestValidate,
            self.corpus_inputs()?,
            &[VALIDATION_FILE],
            BTreeMap::new(),
        )?;
        Ok((counts, report))
    }

    /// Like matrix, filters, grid and the conspiracy cohort. Writes
    /// `cohort.json` and, when `write_grid`, `grid.csv`.
    pub fn cohort_build(&self, write_grid: bool) -> Result<CohortFile> {
        let c = self.cfg.cohort.clone();
        let corpus = self.corpus()?;
        let mut m = build_like_matrix(corpus)?;
        let likers = m.len();
        if c.require_follow {
            m = filter_follows_seed(m, corpus);
        }
        let followers = m.len();
        let m = filter_cov(m, c.max_cov);
        let grid = threshold_grid(&m, &c.l_axis, &c.s_axis)?;
        let (l_min, s_min) = if c.auto_thresholds {
            auto_thresholds_with(&grid, &c.rule())?
        } else {
            (c.l_min, c.s_min)
        };
        let members = select_cohort(&m, l_min, s_min)?;
        log::info!("{likers} seed likers, {followers} after follow filter, {} after Cov filter, {} selected", m.len(), members.len());
        let mut parameters = BTreeMap::from([
            ("l_min".to_string(), json!(l_min)),
            ("s_min".to_string(), json!(s_min)),
            ("max_cov".to_string(), json!(c.max_cov)),
            ("require_follow".to_string(), json!(c.require_follow)),
            ("auto_thresholds".to_string(), json!(c.auto_thresholds)),
            ("seed_likers".to_string(), json!(likers)),
            ("after_follow_filter".to_string(), json!(followers)),
            ("after_cov_filter".to_string(), json!(m.len())),
        ]);
        if c.auto_thresholds {
            parameters.insert("target_size".into(), json!(c.target_size));
        }
        let file = CohortFile {
            label: "conspiracy".into(),
            user_ids: members.into_iter().collect(),
            parameters: parameters.clone(),
            rng_seed: self.cfg.rng_seed,
        };
        write_json(&self.artifact(COHORT_FILE), &file)?;
        let mut outputs = vec![COHORT_FILE];
        if write_grid {
            write_text(&self.artifact(GRID_FILE), &grid.to_csv())?;
            outputs.push(GRID_FILE);
        }
        self.record(
            Stage::CohortBuild,
            self.corpus_inputs()?,
            &outputs,
            parameters,
        )?;
        Ok(file)
    }

    fn load_cohort(&self, stage: Stage, name: &str, producer: Stage) -> Result<CohortFile> {
        read_json(&self.require(stage, name, producer)?)
    }

    pub fn hashtags_top(&self) -> Result<Vec<(String, u64)>> {
        let stage = Stage::HashtagsTop;
        let cohort = self.load_cohort(stage, COHORT_FILE, Stage::CohortBuild)?;
        let k = self.cfg.control.top_hashtags;
        let top = top_hashtags(self.corpus()?, &cohort.members(), k);
        let mut csv = String::from("rank,hashtag,tweets\n");
        for (i, (h, n)) in top.iter().enumerate() {
            writeln!(csv, "{},{h},{n}", i + 1).unwrap();
        }
        write_text(&self.artifact(HASHTAGS_FILE), &csv)?;
        let mut inputs = self.hashes(&[COHORT_FILE])?;
        inputs.extend(self.corpus_inputs()?);
        self.record(
            stage,
            inputs,
            &[HASHTAGS_FILE],
            BTreeMap::from([("k".to_string(), json!(k))]),
        )?;
        Ok(top)
    }

    fn read_hashtags(&self, stage: Stage) -> Result<Vec<String>> {
        let path = self.require(stage, HASHTAGS_FILE, Stage::HashtagsTop)?;
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let mut tags = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| PipelineError::Format {
                path: path.clone(),
                message: e.to_string(),
            })?;
            tags.push(rec.get(1).unwrap_or_default().to_string());
        }
        Ok(tags)
    }

    pub fn cohort_control(&self) -> Result<CohortFile> {
        let stage = Stage::CohortControl;
        let cohort = self.load_cohort(stage, COHORT_FILE, Stage::CohortBuild)?;
        let tags = self.read_hashtags(stage)?;
        let corpus = self.corpus()?;
        let members = cohort.members();
        let candidates = topic_candidates(corpus, &tags, &members);
        let k = &self.cfg.control;
        let n = k.size.unwrap_or(members.len());
        let constraints = ControlConstraints {
            target_language: k.target_language.clone(),
            creation_bucket: k.creation_bucket,
            excluded_users: BTreeSet::new(),
            excluded_follow_targets: BTreeSet::new(),
            allow_overflow: k.allow_overflow,
        };
        let control = build_control(
            corpus,
            &members,
            &candidates,
            n,
            &constraints,
            self.cfg.rng_seed,
        )?;
        let parameters = BTreeMap::from([
            ("size".to_string(), json!(n)),
            ("candidates".to_string(), json!(candidates.len())),
            ("target_language".to_string(), json!(k.target_language)),
            ("creation_bucket".to_string(), json!(k.creation_bucket)),
            ("allow_overflow".to_string(), json!(k.allow_overflow)),
            ("hashtags".to_string(), json!(tags)),
        ]);
        let file = CohortFile {
            label: "control".into(),
            user_ids: control.into_iter().collect(),
            parameters: parameters.clone(),
            rng_seed: self.cfg.rng_seed,
        };
        write_json(&self.artifact(CONTROL_FILE), &file)?;
        let mut inputs = self.hashes(&[COHORT_FILE, HASHTAGS_FILE])?;
        inputs.extend(self.corpus_inputs()?);
        self.record(stage, inputs, &[CONTROL_FILE], parameters)?;
        Ok(file)
    }

    pub fn features_extract(&self) -> Result<FeatureMatrix> {
        let stage = Stage::FeaturesExtract;
        let consp = self
            .load_cohort(stage, COHORT_FILE, Stage::CohortBuild)?
            .members();
        let control = self
            .load_cohort(stage, CONTROL_FILE, Stage::CohortControl)?
            .members();
        let corpus = self.corpus()?;
        let snap = match self.cfg.features.snapshot {
            Some(as_of) => Snapshot { as_of },
            None => Snapshot::latest(corpus).ok_or_else(|| PipelineError::Stage {
                stage: stage.name(),
                message: "corpus has no users".into(),
            })?,
        };
        let mut m = feature_matrix(
            corpus,
            &[(LABEL_CONSPIRACY, &consp), (LABEL_CONTROL, &control)],
            snap,
        )?;
        let mut inputs = self.hashes(&[COHORT_FILE, CONTROL_FILE])?;
        inputs.extend(self.corpus_inputs()?);
        if !self.cfg.features.lexicons.is_empty() {
            let mut lexicons = Vec::new();
            for l in &self.cfg.features.lexicons {
                lexicons.push(load_lexicon(&l.name, &l.path, l.format)?);
                inputs.insert(l.path.display().to_string(), sha256_file(&l.path)?);
            }
            let ids: Vec<String> = m.rows.iter().map(|r| r.user_id.clone()).collect();
            let timelines = tokenized_timelines(corpus, ids.iter());
            append_lexicon_features(&mut m, &timelines, &lexicons)?;
        }
        for p in &self.cfg.features.external {
            join_external_features(&mut m, p)?;
            inputs.insert(p.display().to_string(), sha256_file(p)?);
        }
        let path = self.artifact(FEATURES_FILE);
        let mut buf = Vec::new();
        m.write_csv(&mut buf)?;
        std::fs::write(&path, buf).map_err(io_err(&path))?;
        let meta = FeatureMeta {
            snapshot: snap.as_of,
            tokenizer_version: TOKENIZER_VERSION.into(),
            timeline_cap: TIMELINE_CAP,
            columns: m.columns.clone(),
        };
        write_json(&self.artifact(FEATURES_META_FILE), &meta)?;
        let parameters = BTreeMap::from([
            ("rows".to_string(), json!(m.n_rows())),
            ("columns".to_string(), json!(m.n_cols())),
            ("snapshot".to_string(), json!(snap.as_of)),
        ]);
        self.record(
            stage,
            inputs,
            &[FEATURES_FILE, FEATURES_META_FILE],
            parameters,
        )?;
        Ok(m)
    }

    /// Reads `features.csv` with the column schema from its sidecar.
    pub fn load_features(&self, stage: Stage) -> Result<FeatureMatrix> {
        let path = self.require(stage, FEATURES_FILE, Stage::FeaturesExtract)?;
        let meta_path = self.require(stage, FEATURES_META_FILE, Stage::FeaturesExtract)?;
        let meta: FeatureMeta = read_json(&meta_path)?;
        let f = std::fs::File::open(&path).map_err(io_err(&path))?;
        Ok(FeatureMatrix::read_csv(
            std::io::BufReader::new(f),
            Some(&meta.columns),
        )?)
    }

    fn load_model(&self, stage: Stage) -> Result<TreeEnsemble> {
        let path = self.require(stage, MODEL_FILE, Stage::Train)?;
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        Ok(TreeEnsemble::from_json(&text)?)
    }

    /// Fits the boosted-tree model on the training side of the stratified
    /// split; writes `model.json` and `split.json`.
    pub fn train(&self) -> Result<TreeEnsemble> {
        let stage = Stage::Train;
        let m = self.load_features(stage)?;
        let cfg = self.cfg.train_config();
        let split = stratified_split(&m.labels(), cfg.test_fraction, cfg.rng_seed)?;
        let imputer = Imputer::fit(&m, &split.train)?;
        let ens = train_gbdt(&imputer.transform(&m, &split.train), &cfg)?;
        write_text(&self.artifact(MODEL_FILE), &(ens.to_json() + "\n"))?;
        let ids = |idx: &[usize]| {
            idx.iter()
                .map(|&i| m.rows[i].user_id.clone())
                .collect::<Vec<_>>()
        };
        write_json(
            &self.artifact(SPLIT_FILE),
            &json!({ "train": ids(&split.train), "test": ids(&split.test) }),
        )?;
        let parameters = BTreeMap::from([("train_config".to_string(), json!(cfg))]);
        self.record(
            stage,
            self.hashes(&[FEATURES_FILE, FEATURES_META_FILE])?,
            &[MODEL_FILE, SPLIT_FILE],
            parameters,
        )?;
        Ok(ens)
    }

    fn split_from_file(&self, stage: Stage, m: &FeatureMatrix) -> Result<Split> {
        let path = self.require(stage, SPLIT_FILE, Stage::Train)?;
        let v: BTreeMap<String, Vec<String>> = read_json(&path)?;
        let index: BTreeMap<&str, usize> = m
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| (r.user_id.as_str(), i))
            .collect();
        let lookup = |key: &str| -> Result<Vec<usize>> {
            let mut out = Vec::new();
            for u in v.get(key).into_iter().flatten() {
                let i = index.get(u.as_str()).ok_or_else(|| PipelineError::Format {
                    path: path.clone(),
                    message: format!("user {u} is not in {FEATURES_FILE}; rerun `train`"),
                })?;
                out.push(*i);
            }
            out.sort_unstable();
            Ok(out)
        };
        Ok(Split {
            train: lookup("train")?,
            test: lookup("test")?,
        })
    }

    /// Hold-out metrics of the trained model, both baselines, k-fold CV on
    /// the training side and one hold-out score per feature group.
    pub fn evaluate(&self) -> Result<MetricsReport> {
        let stage = Stage::Evaluate;
        let m = self.load_features(stage)?;
        let ens = self.load_model(stage)?;
        let split = self.split_from_file(stage, &m)?;
        let cfg = self.cfg.train_config();
        if ens.feature_names != m.column_names() {
            return Err(PipelineError::Stage {
                stage: stage.name(),
                message: format!("{MODEL_FILE} was trained on different columns; rerun `train`"),
            });
        }
        let labels = m.labels();
        let imputer = Imputer::fit(&m, &split.train)?;
        let test = imputer.transform(&m, &split.test);
        let holdout = evaluate(&predict_labels(&ens, &test.rows())?, &test.labels)?;
        let train_labels: Vec<u8> = split.train.iter().map(|&i| labels[i]).collect();
        let majority = baseline_majority(&train_labels, &test.labels)?;
        let random = baseline_random(&test.labels, cfg.rng_seed, RANDOM_BASELINE_DRAWS)?;
        let cv = cross_validate(&m, &split.train, &cfg)?;
        let mut sets: Vec<(&str, Vec<FeatureGroup>)> = vec![
            ("credibility", vec![FeatureGroup::Credibility]),
            ("initiative", vec![FeatureGroup::Initiative]),
            ("adaptability", vec![FeatureGroup::Adaptability]),
            (
                "behavioral",
                vec![
                    FeatureGroup::Credibility,
                    FeatureGroup::Initiative,
                    FeatureGroup::Adaptability,
                ],
            ),
        ];
        if m.columns
            .iter()
            .any(|c| c.group == FeatureGroup::Psycholinguistic)
        {
            sets.push(("psycholinguistic", vec![FeatureGroup::Psycholinguistic]));
            sets.push((
                "all",
                vec![
                    FeatureGroup::Credibility,
                    FeatureGroup::Initiative,
                    FeatureGroup::Adaptability,
                    FeatureGroup::Psycholinguistic,
                ],
            ));
        }
        let mut feature_sets = Vec::new();
        for (name, groups) in sets {
            let cols = m.columns_in_groups(&groups);
            if cols.is_empty() {
                continue;
            }
            let out = fit_evaluate(&m.select_columns(&cols), &cfg)?;
            feature_sets.push(FeatureSetResult {
                name: name.into(),
                n_features: cols.len(),
                holdout: out.metrics,
            });
        }
        let report = MetricsReport {
            rng_seed: cfg.rng_seed,
            n_users: m.n_rows(),
            n_train: split.train.len(),
            n_test: split.test.len(),
            n_features: m.n_cols(),
            holdout,
            majority_baseline: majority,
            random_baseline: random,
            random_baseline_draws: RANDOM_BASELINE_DRAWS,
            cross_validation: cv,
            feature_sets,
        };
        write_json(&self.artifact(METRICS_FILE), &report)?;
        let inputs = self.hashes(&[FEATURES_FILE, FEATURES_META_FILE, MODEL_FILE, SPLIT_FILE])?;
        self.record(
            stage,
            inputs,
            &[METRICS_FILE],
            BTreeMap::from([("train_config".to_string(), json!(cfg))]),
        )?;
        Ok(report)
    }

    fn columns_meta(&self, stage: Stage) -> Result<Vec<Column>> {
        let p = self.require(stage, FEATURES_META_FILE, Stage::FeaturesExtract)?;
        Ok(read_json::<FeatureMeta>(&p)?.columns)
    }

    /// Normalized split-gain importance of every feature.
    pub fn importance(&self) -> Result<Vec<(usize, String, FeatureGroup, f64)>> {
        let stage = Stage::Importance;
        let ens = self.load_model(stage)?;
        let columns = self.columns_meta(stage)?;
        let groups: BTreeMap<&str, FeatureGroup> =
            columns.iter().map(|c| (c.name.as_str(), c.group)).collect();
        let rows = feature_report(&ens, ens.feature_names.len())?;
        let mut csv = String::from("rank,feature,group,importance\n");
        let mut out = Vec::new();
        for r in rows {
            let g = groups
                .get(r.feature.as_str())
                .copied()
                .unwrap_or(FeatureGroup::Psycholinguistic);
            let gname = serde_json::to_value(g).unwrap();
            writeln!(
                csv,
                "{},{},{},{}",
                r.rank,
                r.feature,
                gname.as_str().unwrap(),
                r.importance
            )
            .unwrap();
            out.push((r.rank, r.feature, g, r.importance));
        }
        write_text(&self.artifact(IMPORTANCE_FILE), &csv)?;
        self.record(
            stage,
            self.hashes(&[MODEL_FILE, FEATURES_META_FILE])?,
            &[IMPORTANCE_FILE],
            BTreeMap::new(),
        )?;
        Ok(out)
    }

    /// F1 after retraining on the top-k features by importance.
    pub fn curve(&self) -> Result<Vec<(usize, f64)>> {
        let stage = Stage::Curve;
        let m = self.load_features(stage)?;
        let ens = self.load_model(stage)?;
        if ens.feature_names != m.column_names() {
            return Err(PipelineError::Stage {
                stage: stage.name(),
                message: format!("{MODEL_FILE} was trained on different columns; rerun `train`"),
            });
        }
        let ranking = importance_ranking(&ens);
        let ks: Vec<usize> = match &self.cfg.model.curve_ks {
            Some(ks) => ks.iter().copied().filter(|&k| k <= m.n_cols()).collect(),
            None => (1..=m.n_cols()).collect(),
        };
        let curve = f1_growth_curve(&m, &ranking, &ks, &self.cfg.train_config())?;
        let mut csv = String::from("k,f1\n");
        for (k, f) in &curve {
            writeln!(csv, "{k},{f}").unwrap();
        }
        write_text(&self.artifact(CURVE_FILE), &csv)?;
        self.record(
            stage,
            self.hashes(&[FEATURES_FILE, FEATURES_META_FILE, MODEL_FILE])?,
            &[CURVE_FILE],
            BTreeMap::new(),
        )?;
        Ok(curve)
    }

    /// Co-occurrence graph of the conspiracy cohort's hashtags, reduced to
    /// the top-k nodes by weighted degree.
    pub fn topics_graph(&self) -> Result<(usize, usize)> {
        let stage = Stage::TopicsGraph;
        let cohort = self.load_cohort(stage, COHORT_FILE, Stage::CohortBuild)?;
        let g = cooccurrence_graph(self.corpus()?, &cohort.members());
        let sub = top_k_subgraph(&g, self.cfg.topics.top_k);
        let mut e = Vec::new();
        sub.write_edges_csv(&mut e).expect("write to vec");
        let mut n = Vec::new();
        sub.write_nodes_csv(&mut n).expect("write to vec");
        let (pe, pn) = (self.artifact(EDGES_FILE), self.artifact(NODES_FILE));
        std::fs::write(&pe, e).map_err(io_err(&pe))?;
        std::fs::write(&pn, n).map_err(io_err(&pn))?;
        let mut inputs = self.hashes(&[COHORT_FILE])?;
        inputs.extend(self.corpus_inputs()?);
        let parameters = BTreeMap::from([
            ("top_k".to_string(), json!(self.cfg.topics.top_k)),
            ("nodes".to_string(), json!(g.nodes.len())),
            ("edges".to_string(), json!(g.edges.len())),
        ]);
        self.record(stage, inputs, &[EDGES_FILE, NODES_FILE], parameters)?;
        Ok((sub.nodes.len(), sub.edges.len()))
    }

    /// Every stage in order; generates the corpus first when configured as
    /// synthetic.
    pub fn run_all(&self) -> Result<MetricsReport> {
        if self.cfg.corpus.synthetic {
            self.synth_generate(&self.out.join("corpus"))?;
        }
        let (_, report) = self.ingest_validate()?;
        if !report.is_empty() {
            log::warn!(
                "validation: {} dangling likes, {} dangling follows, {} retweets without author, {} empty timelines",
                report.dangling_likes.len(),
                report.dangling_follows.len(),
                report.retweets_without_author.len(),
                report.empty_timelines.len()
            );
        }
        self.cohort_build(true)?;
        self.hashtags_top()?;
        self.cohort_control()?;
        self.features_extract()?;
        self.train()?;
        let metrics = self.evaluate()?;
        self.importance()?;
        self.curve()?;
        self.topics_graph()?;
        Ok(metrics)
    }
}
