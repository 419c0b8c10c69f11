//! Archived corpus: users, timelines, likes, follows and the seed list.
//!
//! Every record file is JSON Lines. Timestamps are ISO-8601 and are truncated
//! to whole UTC seconds on load.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, SubsecRound, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message} at line {line}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: duplicate tweet_id {tweet_id} at line {line}")]
    DuplicateTweet {
        path: PathBuf,
        line: usize,
        tweet_id: String,
    },
    #[error("{path}: duplicate user_id {user_id} at line {line}")]
    DuplicateUser {
        path: PathBuf,
        line: usize,
        user_id: String,
    },
    #[error("{path}: user {user_id} created_at is after snapshot_at (line {line})")]
    SnapshotBeforeCreation {
        path: PathBuf,
        line: usize,
        user_id: String,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRecord {
    pub user_id: String,
    pub created_at: DateTime<Utc>,
    pub followers_count: u64,
    pub following_count: u64,
    pub tweet_count: u64,
    pub listed_count: u64,
    pub verified: bool,
    pub has_default_pic: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bio: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predominant_language: Option<String>,
    pub snapshot_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TweetKind {
    Original,
    Retweet,
    Reply,
    Quote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub tweet_id: String,
    pub author_id: String,
    pub created_at: DateTime<Utc>,
    pub kind: TweetKind,
    #[serde(default)]
    pub text: String,
    #[serde(default)]
    pub hashtags: Vec<String>,
    #[serde(default)]
    pub urls: Vec<String>,
    #[serde(default)]
    pub mentions: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retweeted_author: Option<String>,
    /// Language tag of the item, when the archive carries one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lang: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Like {
    pub user_id: String,
    pub seed_id: String,
    pub liked_tweet_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Follow {
    pub follower_id: String,
    pub followee_id: String,
}

/// Locations of the five corpus files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusPaths {
    pub users: PathBuf,
    pub tweets: PathBuf,
    pub likes: PathBuf,
    pub follows: PathBuf,
    pub seeds: PathBuf,
}

impl CorpusPaths {
    /// The conventional file names inside one directory.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        Self {
            users: dir.join("users.jsonl"),
            tweets: dir.join("tweets.jsonl"),
            likes: dir.join("likes.jsonl"),
            follows: dir.join("follows.jsonl"),
            seeds: dir.join("seeds.json"),
        }
    }

    pub fn all(&self) -> [&Path; 5] {
        [
            &self.users,
            &self.tweets,
            &self.likes,
            &self.follows,
            &self.seeds,
        ]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadCounts {
    pub users: usize,
    pub tweets: usize,
    pub likes: usize,
    pub follows: usize,
    pub seeds: usize,
}

/// Immutable, validated-on-load view of an archive.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub users: BTreeMap<String, UserRecord>,
    /// Per-author timelines, ascending by `(created_at, tweet_id)`.
    pub timelines: BTreeMap<String, Vec<TweetRecord>>,
    pub likes: Vec<Like>,
    pub follows: Vec<Follow>,
    pub seeds: Vec<String>,
}

impl Corpus {
    /// Builds a corpus from in-memory records, applying the same
    /// normalization as [`load_corpus`]. Duplicate tweet ids keep the first.
    pub fn from_records(
        users: Vec<UserRecord>,
        tweets: Vec<TweetRecord>,
        likes: Vec<Like>,
        follows: Vec<Follow>,
        seeds: Vec<String>,
    ) -> Self {
        let users = users
            .into_iter()
            .map(|mut u| {
                normalize_user(&mut u);
                (u.user_id.clone(), u)
            })
            .collect();
        let mut seen = HashSet::new();
        let tweets = tweets
            .into_iter()
            .filter(|t| seen.insert(t.tweet_id.clone()))
            .collect();
        Corpus {
            users,
            timelines: group_timelines(tweets),
            likes,
            follows,
            seeds,
        }
    }

    pub fn timeline(&self, user_id: &str) -> &[TweetRecord] {
        self.timelines
            .get(user_id)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn tweet_count(&self) -> usize {
        self.timelines.values().map(Vec::len).sum()
    }

    pub fn seed_set(&self) -> BTreeSet<&str> {
        self.seeds.iter().map(String::as_str).collect()
    }

    /// Users who liked at least one post of a seed account.
    pub fn seed_likers(&self) -> BTreeSet<String> {
        let seeds = self.seed_set();
        self.likes
            .iter()
            .filter(|l| seeds.contains(l.seed_id.as_str()))
            .map(|l| l.user_id.clone())
            .collect()
    }

    /// Users who follow at least one seed account.
    pub fn seed_followers(&self) -> BTreeSet<String> {
        let seeds = self.seed_set();
        self.follows
            .iter()
            .filter(|f| seeds.contains(f.followee_id.as_str()))
            .map(|f| f.follower_id.clone())
            .collect()
    }

    /// The user's language: the profile field when present, else the modal
    /// tweet language (ties broken by the lexicographically smallest tag).
    pub fn predominant_language(&self, user_id: &str) -> Option<String> {
        if let Some(lang) = self
            .users
            .get(user_id)
            .and_then(|u| u.predominant_language.clone())
        {
            return Some(lang);
        }
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for t in self.timeline(user_id) {
            if let Some(l) = &t.lang {
                *counts.entry(l.as_str()).or_default() += 1;
            }
        }
        let mut best: Option<(&str, usize)> = None;
        for (lang, n) in counts {
            if best.is_none_or(|(_, b)| n > b) {
                best = Some((lang, n));
            }
        }
        best.map(|(l, _)| l.to_string())
    }
}

fn normalize_time(t: &mut DateTime<Utc>) {
    *t = t.trunc_subsecs(0);
}

fn normalize_user(u: &mut UserRecord) {
    normalize_time(&mut u.created_at);
    normalize_time(&mut u.snapshot_at);
}

fn normalize_tweet(t: &mut TweetRecord) {
    normalize_time(&mut t.created_at);
    let mut seen = HashSet::new();
    let tags = std::mem::take(&mut t.hashtags);
    t.hashtags = tags
        .into_iter()
        .map(|h| h.trim_start_matches('#').to_lowercase())
        .filter(|h| !h.is_empty() && seen.insert(h.clone()))
        .collect();
}

fn group_timelines(tweets: Vec<TweetRecord>) -> BTreeMap<String, Vec<TweetRecord>> {
    let mut timelines: BTreeMap<String, Vec<TweetRecord>> = BTreeMap::new();
    for mut t in tweets {
        normalize_tweet(&mut t);
        timelines.entry(t.author_id.clone()).or_default().push(t);
    }
    for tl in timelines.values_mut() {
        tl.sort_by(|a, b| {
            a.created_at
                .cmp(&b.created_at)
                .then_with(|| a.tweet_id.cmp(&b.tweet_id))
        });
    }
    timelines
}

/// Parses serde's trailing " at line X column Y" off, since every record
/// sits on line 1 of its own string.
fn parse_message(e: &serde_json::Error) -> String {
    let msg = e.to_string();
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].replace('`', ""),
        None => msg.replace('`', ""),
    }
}

/// Reads a JSON Lines file; blank lines are skipped. Returns records with
/// their 1-based line numbers.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>, CorpusError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: parse_message(&e),
        })?;
        out.push((i + 1, rec));
    }
    Ok(out)
}

pub fn write_jsonl<'a, T, I>(path: &Path, records: I) -> Result<(), CorpusError>
where
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| CorpusError::Io {
            path: path.to_path_buf(),
            source: e.into(),
        })?;
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn load_users(path: &Path) -> Result<BTreeMap<String, UserRecord>, CorpusError> {
    let mut users = BTreeMap::new();
    for (line, mut u) in read_jsonl::<UserRecord>(path)? {
        normalize_user(&mut u);
        if u.created_at > u.snapshot_at {
            return Err(CorpusError::SnapshotBeforeCreation {
                path: path.to_path_buf(),
                line,
                user_id: u.user_id,
            });
        }
        if users.contains_key(&u.user_id) {
            return Err(CorpusError::DuplicateUser {
                path: path.to_path_buf(),
                line,
                user_id: u.user_id,
            });
        }
        users.insert(u.user_id.clone(), u);
    }
    Ok(users)
}

fn load_tweets(path: &Path) -> Result<(usize, BTreeMap<String, Vec<TweetRecord>>), CorpusError> {
    let records = read_jsonl::<TweetRecord>(path)?;
    let mut seen = HashSet::with_capacity(records.len());
    for (line, t) in &records {
        if !seen.insert(t.tweet_id.as_str()) {
            return Err(CorpusError::DuplicateTweet {
                path: path.to_path_buf(),
                line: *line,
                tweet_id: t.tweet_id.clone(),
            });
        }
    }
    let n = records.len();
    Ok((
        n,
        group_timelines(records.into_iter().map(|(_, t)| t).collect()),
    ))
}

fn load_seeds(path: &Path) -> Result<Vec<String>, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| CorpusError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: parse_message(&e),
    })
}

/// Loads all five files. Users/tweets and likes/follows are read in parallel.
pub fn load_corpus(paths: &CorpusPaths) -> Result<(Corpus, LoadCounts), CorpusError> {
    let ((users, tweets), ((likes, follows), seeds)) = rayon::join(
        || rayon::join(|| load_users(&paths.users), || load_tweets(&paths.tweets)),
        || {
            rayon::join(
                || {
                    rayon::join(
                        || read_jsonl::<Like>(&paths.likes),
                        || read_jsonl::<Follow>(&paths.follows),
                    )
                },
                || load_seeds(&paths.seeds),
            )
        },
    );
    let users = users?;
    let (n_tweets, timelines) = tweets?;
    let likes: Vec<Like> = likes?.into_iter().map(|(_, l)| l).collect();
    let follows: Vec<Follow> = follows?.into_iter().map(|(_, f)| f).collect();
    let seeds = seeds?;
    let counts = LoadCounts {
        users: users.len(),
        tweets: n_tweets,
        likes: likes.len(),
        follows: follows.len(),
        seeds: seeds.len(),
    };
    Ok((
        Corpus {
            users,
            timelines,
            likes,
            follows,
            seeds,
        },
        counts,
    ))
}

/// Writes the corpus in the load schema. Tweets are emitted grouped by author
/// in timeline order.
pub fn write_corpus(corpus: &Corpus, paths: &CorpusPaths) -> Result<(), CorpusError> {
    write_jsonl(&paths.users, corpus.users.values())?;
    write_jsonl(&paths.tweets, corpus.timelines.values().flatten())?;
    write_jsonl(&paths.likes, &corpus.likes)?;
    write_jsonl(&paths.follows, &corpus.follows)?;
    let seeds = serde_json::to_string_pretty(&corpus.seeds).expect("string list serializes");
    std::fs::write(&paths.seeds, seeds + "\n").map_err(io_err(&paths.seeds))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// Likes whose user is unknown or whose seed is not in the seed list.
    pub dangling_likes: Vec<Like>,
    /// Follows whose follower is unknown.
    pub dangling_follows: Vec<Follow>,
    /// Tweet ids of retweets lacking `retweeted_author`.
    pub retweets_without_author: Vec<String>,
    /// Known users with no timeline items.
    pub empty_timelines: Vec<String>,
    /// Authors with tweets but no user record.
    pub unknown_authors: Vec<String>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.dangling_likes.is_empty()
            && self.dangling_follows.is_empty()
            && self.retweets_without_author.is_empty()
            && self.empty_timelines.is_empty()
            && self.unknown_authors.is_empty()
    }
}

/// Report-only consistency check. A like is resolvable when its user is a
/// known user and its seed is in the seed list; a follow when its follower is
/// known (followees outside the user table are normal: seeds, celebrities).
pub fn validate_corpus(c: &Corpus) -> ValidationReport {
    let seeds = c.seed_set();
    let dangling_likes = c
        .likes
        .iter()
        .filter(|l| !c.users.contains_key(&l.user_id) || !seeds.contains(l.seed_id.as_str()))
        .cloned()
        .collect();
    let dangling_follows = c
        .follows
        .iter()
        .filter(|f| !c.users.contains_key(&f.follower_id))
        .cloned()
        .collect();
    let retweets_without_author = c
        .timelines
        .values()
        .flatten()
        .filter(|t| t.kind == TweetKind::Retweet && t.retweeted_author.is_none())
        .map(|t| t.tweet_id.clone())
        .collect();
    let empty_timelines = c
        .users
        .keys()
        .filter(|u| c.timeline(u).is_empty())
        .cloned()
        .collect();
    let unknown_authors = c
        .timelines
        .keys()
        .filter(|a| !c.users.contains_key(*a))
        .cloned()
        .collect();
    ValidationReport {
        dangling_likes,
        dangling_follows,
        retweets_without_author,
        empty_timelines,
        unknown_authors,
    }
}
