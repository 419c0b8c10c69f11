//! Word-association lexicons (emotion/sentiment word lists and category
//! dictionaries) scored as per-token rates over a user's timeline.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{is_placeholder, TokenizedTweet};
use crate::matrix::{Column, ColumnKind, FeatureGroup, FeatureMatrix, MatrixError};

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unknown lexicon format {0:?} (expected \"nrc\" or \"dict\")")]
    UnknownFormat(String),
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("contradictory flags for ({word}, {category})")]
    Contradiction { word: String, category: String },
    #[error("lexicon {0} has no categories")]
    NoCategories(String),
    #[error("external features: {0}")]
    External(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LexiconFormat {
    /// `word<TAB>category<TAB>flag`, flag in {0,1}.
    Nrc,
    /// `category: word1 word2*`, `*` marking a prefix wildcard.
    Dict,
}

impl FromStr for LexiconFormat {
    type Err = LexiconError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "nrc" | "tsv" => Ok(LexiconFormat::Nrc),
            "dict" | "dic" => Ok(LexiconFormat::Dict),
            other => Err(LexiconError::UnknownFormat(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchMode {
    Exact,
    PrefixWildcard,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    pub name: String,
    pub categories: Vec<String>,
    /// word → category indices
    pub entries: BTreeMap<String, BTreeSet<usize>>,
    /// wildcard stem (without `*`) → category indices
    pub prefixes: BTreeMap<String, BTreeSet<usize>>,
    pub match_mode: MatchMode,
}

impl Lexicon {
    pub fn parse(name: &str, text: &str, format: LexiconFormat) -> Result<Lexicon, LexiconError> {
        let lex = match format {
            LexiconFormat::Nrc => parse_nrc(name, text)?,
            LexiconFormat::Dict => parse_dict(name, text)?,
        };
        if lex.categories.is_empty() {
            return Err(LexiconError::NoCategories(name.to_string()));
        }
        Ok(lex)
    }

    /// Categories a token falls in; each category counted once.
    pub fn categories_of(&self, token: &str) -> BTreeSet<usize> {
        let mut out = self.entries.get(token).cloned().unwrap_or_default();
        if self.match_mode == MatchMode::PrefixWildcard {
            for (stem, cats) in &self.prefixes {
                if token.starts_with(stem.as_str()) {
                    out.extend(cats);
                }
            }
        }
        out
    }

    pub fn column_names(&self) -> Vec<String> {
        self.categories
            .iter()
            .map(|c| format!("{}_{}", self.name, c))
            .collect()
    }
}

fn category_index(categories: &mut Vec<String>, cat: &str) -> usize {
    match categories.iter().position(|c| c == cat) {
        Some(i) => i,
        None => {
            categories.push(cat.to_string());
            categories.len() - 1
        }
    }
}

fn parse_nrc(name: &str, text: &str) -> Result<Lexicon, LexiconError> {
    let mut categories = Vec::new();
    let mut flags: HashMap<(String, usize), bool> = HashMap::new();
    let mut entries: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = if line.contains('\t') {
            line.split('\t').map(str::trim).collect()
        } else {
            line.split_whitespace().collect()
        };
        let [word, cat, flag] = fields[..] else {
            return Err(LexiconError::Syntax {
                line: i + 1,
                message: format!("expected 3 fields, found {}", fields.len()),
            });
        };
        let flag = match flag {
            "0" => false,
            "1" => true,
            other => {
                return Err(LexiconError::Syntax {
                    line: i + 1,
                    message: format!("flag must be 0 or 1, found {other:?}"),
                })
            }
        };
        if word.ends_with('*') {
            return Err(LexiconError::Syntax {
                line: i + 1,
                message: "wildcards are not allowed in exact-match lexicons".into(),
            });
        }
        let word = word.to_lowercase();
        let cat = category_index(&mut categories, &cat.to_lowercase());
        if let Some(prev) = flags.insert((word.clone(), cat), flag) {
            if prev != flag {
                return Err(LexiconError::Contradiction {
                    word,
                    category: categories[cat].clone(),
                });
            }
        }
        if flag {
            entries.entry(word).or_default().insert(cat);
        }
    }
    Ok(Lexicon {
        name: name.to_string(),
        categories,
        entries,
        prefixes: BTreeMap::new(),
        match_mode: MatchMode::Exact,
    })
}

fn parse_dict(name: &str, text: &str) -> Result<Lexicon, LexiconError> {
    let mut categories = Vec::new();
    let mut entries: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    let mut prefixes: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((cat, words)) = line.split_once(':') else {
            return Err(LexiconError::Syntax {
                line: i + 1,
                message: "expected \"category: words\"".into(),
            });
        };
        let cat = category_index(&mut categories, &cat.trim().to_lowercase());
        for w in words.split_whitespace() {
            let w = w.to_lowercase();
            match w.strip_suffix('*') {
                Some(stem) if !stem.is_empty() && !stem.contains('*') => {
                    prefixes.entry(stem.to_string()).or_default().insert(cat);
                }
                None if !w.contains('*') => {
                    entries.entry(w).or_default().insert(cat);
                }
                _ => {
                    return Err(LexiconError::Syntax {
                        line: i + 1,
                        message: format!("bad wildcard entry {w:?}"),
                    })
                }
            }
        }
    }
    Ok(Lexicon {
        name: name.to_string(),
        categories,
        entries,
        prefixes,
        match_mode: MatchMode::PrefixWildcard,
    })
}

pub fn load_lexicon(
    name: &str,
    path: &Path,
    format: LexiconFormat,
) -> Result<Lexicon, LexiconError> {
    let text = std::fs::read_to_string(path).map_err(|source| LexiconError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Lexicon::parse(name, &text, format)
}

/// Per-category rates over the concatenated token stream, one cell per
/// category of each lexicon in order. Placeholder tokens are ignored; a
/// stream with no remaining tokens gives all-missing cells.
pub fn lexicon_features(timeline: &[TokenizedTweet], lexicons: &[Lexicon]) -> Vec<Option<f64>> {
    let width: usize = lexicons.iter().map(|l| l.categories.len()).sum();
    let mut tf: BTreeMap<&str, u64> = BTreeMap::new();
    for t in timeline {
        for tok in t.tokens.iter().filter(|t| !is_placeholder(t)) {
            *tf.entry(tok.as_str()).or_default() += 1;
        }
    }
    let total: u64 = tf.values().sum();
    if total == 0 {
        return vec![None; width];
    }
    let mut out = Vec::with_capacity(width);
    for lex in lexicons {
        let mut hits = vec![0u64; lex.categories.len()];
        for (tok, n) in &tf {
            for c in lex.categories_of(tok) {
                hits[c] += n;
            }
        }
        out.extend(hits.into_iter().map(|h| Some(h as f64 / total as f64)));
    }
    out
}

pub fn lexicon_columns(lexicons: &[Lexicon]) -> Vec<Column> {
    lexicons
        .iter()
        .flat_map(Lexicon::column_names)
        .map(|name| Column {
            name,
            kind: ColumnKind::Numeric,
            group: FeatureGroup::Psycholinguistic,
        })
        .collect()
}

/// Appends one column per lexicon category to `matrix`.
pub fn append_lexicon_features(
    matrix: &mut FeatureMatrix,
    timelines: &HashMap<&str, Vec<TokenizedTweet>>,
    lexicons: &[Lexicon],
) -> Result<(), LexiconError> {
    let values: HashMap<String, Vec<Option<f64>>> = matrix
        .rows
        .iter()
        .map(|r| {
            let tl = timelines
                .get(r.user_id.as_str())
                .map(Vec::as_slice)
                .unwrap_or(&[]);
            (r.user_id.clone(), lexicon_features(tl, lexicons))
        })
        .collect();
    matrix.append_columns(lexicon_columns(lexicons), &values)?;
    Ok(())
}

/// Joins a `user_id` + numeric-columns CSV onto the matrix. An empty file
/// leaves the matrix unchanged.
pub fn join_external_features(
    matrix: &mut FeatureMatrix,
    path: &Path,
) -> Result<usize, LexiconError> {
    let text = std::fs::read_to_string(path).map_err(|source| LexiconError::Io {
        path: path.display().to_string(),
        source,
    })?;
    join_external_csv(matrix, &text)
}

pub fn join_external_csv(matrix: &mut FeatureMatrix, text: &str) -> Result<usize, LexiconError> {
    if text.trim().is_empty() {
        log::warn!("external feature file is empty; nothing joined");
        return Ok(0);
    }
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| LexiconError::External(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let Some(id_col) = header.iter().position(|h| h == "user_id") else {
        return Err(LexiconError::External("missing user_id column".into()));
    };
    let names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != id_col)
        .map(|(_, h)| h.clone())
        .collect();
    let mut values: HashMap<String, Vec<Option<f64>>> = HashMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| LexiconError::External(e.to_string()))?;
        let mut row = Vec::with_capacity(names.len());
        for (j, cell) in rec.iter().enumerate() {
            if j == id_col {
                continue;
            }
            let cell = cell.trim();
            row.push(if cell.is_empty() {
                None
            } else {
                Some(cell.parse::<f64>().map_err(|_| {
                    LexiconError::External(format!(
                        "row {}: cannot parse {cell:?} in {}",
                        i + 1,
                        header[j]
                    ))
                })?)
            });
        }
        values.insert(rec[id_col].to_string(), row);
    }
    if values.is_empty() {
        log::warn!("external feature file has no rows; nothing joined");
        return Ok(0);
    }
    let cols = names
        .into_iter()
        .map(|name| Column {
            name,
            kind: ColumnKind::Numeric,
            group: FeatureGroup::Psycholinguistic,
        })
        .collect::<Vec<_>>();
    let n = cols.len();
    matrix.append_columns(cols, &values)?;
    Ok(n)
}
