//! Behavioral feature suite: 17 credibility, 19 initiative and 56
//! adaptability columns per user.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::sync::LazyLock;

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::corpus::{Corpus, TweetKind, TweetRecord, UserRecord};
use crate::matrix::{Column, ColumnKind, FeatureGroup, FeatureMatrix, FeatureRow};
use crate::statkit::{self, DistParams};

pub const URL_TOKEN: &str = "⟨url⟩";
pub const MENTION_TOKEN: &str = "⟨mention⟩";
pub const TOKENIZER_VERSION: &str = "1";
/// Only the most recent items of a timeline are used.
pub const TIMELINE_CAP: usize = 3200;
pub const N_BEHAVIORAL: usize = 92;

static URL_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(?:https?://|www\.)[^\s]+").unwrap());
static MENTION_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"@[\p{L}\p{N}_]+").unwrap());
static TOKEN_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?P<url>(?i)\b(?:https?://|www\.)[^\s]+)|(?P<mention>@[\p{L}\p{N}_]+)").unwrap()
});
static HASHTAG_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"#[\p{L}\p{N}_]+").unwrap());

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("cohorts overlap on user {0}")]
    OverlappingCohorts(String),
    #[error("snapshot {as_of} precedes creation of user {user_id}")]
    SnapshotBeforeCreation {
        user_id: String,
        as_of: DateTime<Utc>,
    },
}

/// NFC-normalizes and lowercases, replaces URLs and @mentions by placeholder
/// tokens, then splits on runs of non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    let text: String = text.nfc().collect::<String>().to_lowercase();
    let mut tokens = Vec::new();
    let push_words = |s: &str, tokens: &mut Vec<String>| {
        tokens.extend(
            s.split(|c: char| !c.is_alphanumeric())
                .filter(|w| !w.is_empty())
                .map(str::to_string),
        );
    };
    let mut last = 0;
    for cap in TOKEN_RE.captures_iter(&text) {
        let m = cap.get(0).unwrap();
        push_words(&text[last..m.start()], &mut tokens);
        tokens.push(
            if cap.name("url").is_some() {
                URL_TOKEN
            } else {
                MENTION_TOKEN
            }
            .to_string(),
        );
        last = m.end();
    }
    push_words(&text[last..], &mut tokens);
    tokens
}

pub fn is_placeholder(token: &str) -> bool {
    token == URL_TOKEN || token == MENTION_TOKEN
}

/// Hostname with a leading `www.` removed.
pub fn registered_domain(raw: &str) -> Option<String> {
    let with_scheme = if raw.contains("://") {
        raw.to_string()
    } else {
        format!("http://{raw}")
    };
    let url = url::Url::parse(&with_scheme).ok()?;
    let host = url.host_str()?.to_lowercase();
    Some(host.strip_prefix("www.").unwrap_or(&host).to_string())
}

/// Timeline item reduced to what the features need.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenizedTweet {
    pub tokens: Vec<String>,
    pub kind: TweetKind,
    pub has_url: bool,
    pub has_mention: bool,
    pub timestamp: DateTime<Utc>,
    pub retweeted_author: Option<String>,
    pub domains: Vec<String>,
    pub char_count: usize,
}

impl TokenizedTweet {
    pub fn from_record(t: &TweetRecord) -> Self {
        let tokens = tokenize(&t.text);
        let text_urls: Vec<&str> = URL_RE.find_iter(&t.text).map(|m| m.as_str()).collect();
        let domains = if t.urls.is_empty() {
            text_urls
                .iter()
                .filter_map(|u| registered_domain(u))
                .collect()
        } else {
            t.urls.iter().filter_map(|u| registered_domain(u)).collect()
        };
        TokenizedTweet {
            has_url: !t.urls.is_empty() || !text_urls.is_empty(),
            has_mention: !t.mentions.is_empty() || MENTION_RE.is_match(&t.text),
            tokens,
            kind: t.kind,
            timestamp: t.created_at,
            retweeted_author: t.retweeted_author.clone(),
            domains,
            char_count: t.text.chars().count(),
        }
    }

    pub fn is_retweet(&self) -> bool {
        self.kind == TweetKind::Retweet
    }

    pub fn is_reply(&self) -> bool {
        self.kind == TweetKind::Reply
    }

    pub fn is_quote(&self) -> bool {
        self.kind == TweetKind::Quote
    }
}

/// Tokenizes the most recent [`TIMELINE_CAP`] items of a sorted timeline.
pub fn tokenize_timeline(timeline: &[TweetRecord]) -> Vec<TokenizedTweet> {
    let start = timeline.len().saturating_sub(TIMELINE_CAP);
    timeline[start..]
        .iter()
        .map(TokenizedTweet::from_record)
        .collect()
}

/// Point in time used for account age.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub as_of: DateTime<Utc>,
}

impl Snapshot {
    /// Latest profile snapshot in the corpus.
    pub fn latest(c: &Corpus) -> Option<Snapshot> {
        c.users
            .values()
            .map(|u| u.snapshot_at)
            .max()
            .map(|as_of| Snapshot { as_of })
    }
}

pub const CREDIBILITY_COLUMNS: [&str; 17] = [
    "following_count",
    "followers_count",
    "followers_ratio",
    "account_age_days",
    "followers_age_ratio",
    "following_age_ratio",
    "tweets_age_ratio",
    "verified",
    "has_bio",
    "has_default_pic",
    "has_url_in_bio",
    "urls_count_bio",
    "hashtags_count_bio",
    "listed_count",
    "bio_sentences",
    "bio_tokens",
    "bio_chars",
];

pub const INITIATIVE_RATIOS: [&str; 5] = [
    "retweet_ratio",
    "reply_ratio",
    "tweet_url_ratio",
    "retweet_url_ratio",
    "reply_url_ratio",
];

pub const INITIATIVE_DISTRIBUTIONS: [&str; 2] = ["unique_words", "pair_entropy"];

pub const ADAPTABILITY_DISTRIBUTIONS: [&str; 8] = [
    "language_novelty",
    "time_between_tweets",
    "time_between_retweets",
    "time_between_mentions",
    "retweeted_accounts",
    "url_domains",
    "tweet_words",
    "tweet_chars",
];

const BINARY_COLUMNS: [&str; 4] = ["verified", "has_bio", "has_default_pic", "has_url_in_bio"];

fn dist_columns(prefix: &str) -> impl Iterator<Item = String> + '_ {
    DistParams::NAMES
        .iter()
        .map(move |p| format!("{prefix}_{p}"))
}

static BEHAVIORAL: LazyLock<Vec<Column>> = LazyLock::new(|| {
    let mk = |name: String, group| Column {
        kind: if BINARY_COLUMNS.contains(&name.as_str()) {
            ColumnKind::Binary
        } else {
            ColumnKind::Numeric
        },
        name,
        group,
    };
    let mut cols = Vec::with_capacity(N_BEHAVIORAL);
    cols.extend(
        CREDIBILITY_COLUMNS
            .iter()
            .map(|n| mk(n.to_string(), FeatureGroup::Credibility)),
    );
    cols.extend(
        INITIATIVE_RATIOS
            .iter()
            .map(|n| mk(n.to_string(), FeatureGroup::Initiative)),
    );
    for d in INITIATIVE_DISTRIBUTIONS {
        cols.extend(dist_columns(d).map(|n| mk(n, FeatureGroup::Initiative)));
    }
    for d in ADAPTABILITY_DISTRIBUTIONS {
        cols.extend(dist_columns(d).map(|n| mk(n, FeatureGroup::Adaptability)));
    }
    cols
});

/// The 92 behavioral columns, in matrix order.
pub fn behavioral_columns() -> &'static [Column] {
    &BEHAVIORAL
}

/// Catalog lookup; unknown names are numeric psycholinguistic columns.
pub fn describe_column(name: &str) -> Column {
    behavioral_columns()
        .iter()
        .find(|c| c.name == name)
        .cloned()
        .unwrap_or_else(|| Column {
            name: name.to_string(),
            kind: ColumnKind::Numeric,
            group: FeatureGroup::Psycholinguistic,
        })
}

fn bool_f(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

pub fn credibility_features(u: &UserRecord, snap: Snapshot) -> [f64; 17] {
    let age_days = (snap.as_of - u.created_at).num_seconds() as f64 / 86_400.0;
    // a same-day account would otherwise divide by ~0
    let age_den = age_days.max(1.0);
    let following = u.following_count as f64;
    let followers = u.followers_count as f64;
    let bio = u.bio.as_deref().map(str::trim).filter(|b| !b.is_empty());
    let (urls, hashtags, sentences, tokens, chars) = match bio {
        Some(b) => (
            URL_RE.find_iter(b).count(),
            HASHTAG_RE.find_iter(b).count(),
            b.split(['.', '!', '?'])
                .filter(|s| !s.trim().is_empty())
                .count(),
            tokenize(b).len(),
            b.chars().count(),
        ),
        None => (0, 0, 0, 0, 0),
    };
    [
        following,
        followers,
        following / followers.max(1.0).powi(2),
        age_days,
        followers / age_den,
        following / age_den,
        u.tweet_count as f64 / age_den,
        bool_f(u.verified),
        bool_f(bio.is_some()),
        bool_f(u.has_default_pic),
        bool_f(urls > 0),
        urls as f64,
        hashtags as f64,
        u.listed_count as f64,
        sentences as f64,
        tokens as f64,
        chars as f64,
    ]
}

fn push_dist(out: &mut Vec<Option<f64>>, sample: &[f64]) {
    match statkit::dist_params(sample) {
        Ok(p) => out.extend(p.to_array().map(Some)),
        Err(_) => out.extend([None; 7]),
    }
}

/// Shares of original, retweet, reply and quote items.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KindShares {
    pub original: f64,
    pub retweet: f64,
    pub reply: f64,
    pub quote: f64,
}

pub fn kind_shares(timeline: &[TokenizedTweet]) -> Option<KindShares> {
    if timeline.is_empty() {
        return None;
    }
    let n = timeline.len() as f64;
    let count = |k: TweetKind| timeline.iter().filter(|t| t.kind == k).count() as f64 / n;
    Some(KindShares {
        original: count(TweetKind::Original),
        retweet: count(TweetKind::Retweet),
        reply: count(TweetKind::Reply),
        quote: count(TweetKind::Quote),
    })
}

fn frequency(tokens: impl IntoIterator<Item = impl AsRef<str>>) -> Vec<u64> {
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for t in tokens {
        *counts.entry(t.as_ref().to_string()).or_default() += 1;
    }
    counts.into_values().collect()
}

/// Per-tweet distinct-token counts.
pub fn unique_words_series(timeline: &[TokenizedTweet]) -> Vec<f64> {
    timeline
        .iter()
        .map(|t| t.tokens.iter().collect::<HashSet<_>>().len() as f64)
        .collect()
}

/// Entropy (bits) of the token frequencies of each consecutive pair.
pub fn pair_entropy_series(timeline: &[TokenizedTweet]) -> Vec<f64> {
    timeline
        .windows(2)
        .map(|w| statkit::entropy_of_counts(frequency(w[0].tokens.iter().chain(&w[1].tokens))))
        .collect()
}

/// Percentage of each tweet's token types never seen in earlier tweets.
/// The first tweet is 100 by definition; token-less tweets score 0.
pub fn language_novelty_series(timeline: &[TokenizedTweet]) -> Vec<f64> {
    let mut seen: HashSet<&str> = HashSet::new();
    let mut out = Vec::with_capacity(timeline.len());
    for (i, t) in timeline.iter().enumerate() {
        let types: BTreeSet<&str> = t.tokens.iter().map(String::as_str).collect();
        let fresh = types.iter().filter(|w| !seen.contains(*w)).count();
        let v = if i == 0 {
            100.0
        } else if types.is_empty() {
            0.0
        } else {
            100.0 * fresh as f64 / types.len() as f64
        };
        out.push(v);
        seen.extend(types);
    }
    out
}

fn gaps<'a>(items: impl Iterator<Item = &'a TokenizedTweet>) -> Vec<f64> {
    let times: Vec<i64> = items.map(|t| t.timestamp.timestamp()).collect();
    times.windows(2).map(|w| (w[1] - w[0]) as f64).collect()
}

fn occurrence_counts<'a>(keys: impl Iterator<Item = &'a str>) -> Vec<f64> {
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for k in keys {
        *counts.entry(k).or_default() += 1;
    }
    counts.into_values().map(|c| c as f64).collect()
}

/// Five ratios plus the unique-word and pair-entropy distributions.
/// An empty timeline yields 19 missing cells.
pub fn initiative_features(timeline: &[TokenizedTweet]) -> Vec<Option<f64>> {
    let mut out = Vec::with_capacity(19);
    if timeline.is_empty() {
        out.resize(19, None);
        return out;
    }
    let n = timeline.len() as f64;
    let ratio =
        |f: &dyn Fn(&TokenizedTweet) -> bool| timeline.iter().filter(|t| f(t)).count() as f64 / n;
    out.push(Some(ratio(&|t| t.is_retweet())));
    out.push(Some(ratio(&|t| t.is_reply())));
    out.push(Some(ratio(&|t| t.has_url)));
    out.push(Some(ratio(&|t| t.is_retweet() && t.has_url)));
    out.push(Some(ratio(&|t| t.is_reply() && t.has_url)));
    push_dist(&mut out, &unique_words_series(timeline));
    push_dist(&mut out, &pair_entropy_series(timeline));
    out
}

/// Eight distributions × seven parameters. Empty sub-series yield missing cells.
pub fn adaptability_features(timeline: &[TokenizedTweet]) -> Vec<Option<f64>> {
    let mut out = Vec::with_capacity(56);
    push_dist(&mut out, &language_novelty_series(timeline));
    push_dist(&mut out, &gaps(timeline.iter()));
    push_dist(&mut out, &gaps(timeline.iter().filter(|t| t.is_retweet())));
    push_dist(&mut out, &gaps(timeline.iter().filter(|t| t.has_mention)));
    push_dist(
        &mut out,
        &occurrence_counts(
            timeline
                .iter()
                .filter(|t| t.is_retweet())
                .filter_map(|t| t.retweeted_author.as_deref()),
        ),
    );
    push_dist(
        &mut out,
        &occurrence_counts(
            timeline
                .iter()
                .flat_map(|t| t.domains.iter().map(String::as_str)),
        ),
    );
    let words: Vec<f64> = timeline.iter().map(|t| t.tokens.len() as f64).collect();
    push_dist(&mut out, &words);
    let chars: Vec<f64> = timeline.iter().map(|t| t.char_count as f64).collect();
    push_dist(&mut out, &chars);
    out
}

/// All 92 behavioral cells for one user.
pub fn user_features(u: &UserRecord, timeline: &[TweetRecord], snap: Snapshot) -> Vec<Option<f64>> {
    let tokenized = tokenize_timeline(timeline);
    let mut row: Vec<Option<f64>> = credibility_features(u, snap).map(Some).to_vec();
    row.extend(initiative_features(&tokenized));
    row.extend(adaptability_features(&tokenized));
    debug_assert_eq!(row.len(), N_BEHAVIORAL);
    row
}

/// One row per cohort member, cohorts in the order given and users sorted
/// within each cohort. Users without a profile are skipped with a warning.
pub fn feature_matrix(
    c: &Corpus,
    cohorts: &[(u8, &BTreeSet<String>)],
    snap: Snapshot,
) -> Result<FeatureMatrix, FeatureError> {
    let mut seen = HashSet::new();
    let mut members: Vec<(u8, &String)> = Vec::new();
    for (label, users) in cohorts {
        for u in users.iter() {
            if !seen.insert(u) {
                return Err(FeatureError::OverlappingCohorts(u.clone()));
            }
            members.push((*label, u));
        }
    }
    let mut kept = Vec::with_capacity(members.len());
    for (label, u) in members {
        match c.users.get(u) {
            Some(rec) if rec.created_at > snap.as_of => {
                return Err(FeatureError::SnapshotBeforeCreation {
                    user_id: u.clone(),
                    as_of: snap.as_of,
                })
            }
            Some(rec) => kept.push((label, rec)),
            None => log::warn!("user {u} has no profile record; row skipped"),
        }
    }
    let rows: Vec<FeatureRow> = kept
        .par_iter()
        .map(|(label, rec)| FeatureRow {
            user_id: rec.user_id.clone(),
            label: *label,
            values: user_features(rec, c.timeline(&rec.user_id), snap),
        })
        .collect();
    Ok(FeatureMatrix {
        columns: behavioral_columns().to_vec(),
        rows,
    })
}

/// Sidecar written next to `features.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMeta {
    pub snapshot: DateTime<Utc>,
    pub tokenizer_version: String,
    pub timeline_cap: usize,
    pub columns: Vec<Column>,
}

/// Token streams of a user's (capped) timeline, keyed by user id.
pub fn tokenized_timelines<'a>(
    c: &'a Corpus,
    users: impl IntoIterator<Item = &'a String>,
) -> HashMap<&'a str, Vec<TokenizedTweet>> {
    users
        .into_iter()
        .map(|u| (u.as_str(), tokenize_timeline(c.timeline(u))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tt(tokens: &[&str], kind: TweetKind, secs: i64) -> TokenizedTweet {
        TokenizedTweet {
            tokens: tokens.iter().map(|s| s.to_string()).collect(),
            kind,
            has_url: false,
            has_mention: false,
            timestamp: DateTime::from_timestamp(secs, 0).unwrap(),
            retweeted_author: None,
            domains: vec![],
            char_count: 0,
        }
    }

    #[test]
    fn tokenizer_examples() {
        assert_eq!(tokenize("Wake UP, people!"), ["wake", "up", "people"]);
        assert_eq!(
            tokenize("see https://x.y @bob"),
            ["see", URL_TOKEN, MENTION_TOKEN]
        );
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("#Covid19 café"), ["covid19", "café"]);
        // decomposed e + combining acute composes under NFC
        assert_eq!(tokenize("cafe\u{301}"), ["café"]);
    }

    #[test]
    fn domains() {
        assert_eq!(
            registered_domain("https://www.Example.com/a?b").as_deref(),
            Some("example.com")
        );
        assert_eq!(
            registered_domain("www.foo.org/x").as_deref(),
            Some("foo.org")
        );
        assert_eq!(registered_domain("not a url"), None);
    }

    fn user(following: u64, followers: u64, bio: Option<&str>) -> UserRecord {
        UserRecord {
            user_id: "u".into(),
            created_at: "2020-01-01T00:00:00Z".parse().unwrap(),
            followers_count: followers,
            following_count: following,
            tweet_count: 100,
            listed_count: 3,
            verified: false,
            has_default_pic: true,
            bio: bio.map(str::to_string),
            predominant_language: None,
            snapshot_at: "2022-01-01T00:00:00Z".parse().unwrap(),
        }
    }

    #[test]
    fn credibility_examples() {
        let snap = Snapshot {
            as_of: "2020-01-11T00:00:00Z".parse().unwrap(),
        };
        let f = credibility_features(&user(100, 10, None), snap);
        assert_eq!(f[2], 1.0);
        assert_eq!(f[3], 10.0);
        assert_eq!((f[8], f[16], f[11]), (0.0, 0.0, 0.0));
        let f = credibility_features(&user(7, 0, None), snap);
        assert_eq!(f[2], 7.0);
        let f = credibility_features(
            &user(1, 1, Some("Truth seeker. Read https://a.b #wakeup!")),
            snap,
        );
        assert_eq!(f[8], 1.0);
        assert_eq!((f[10], f[11], f[12]), (1.0, 1.0, 1.0));
        // "Truth seeker", " Read https://a", "b #wakeup" -> 3 sentences
        assert_eq!(f[14], 3.0);
    }

    #[test]
    fn initiative_examples() {
        let mut tl: Vec<TokenizedTweet> = (0..10)
            .map(|i| tt(&["a"], TweetKind::Original, i))
            .collect();
        for t in tl.iter_mut().take(3) {
            t.kind = TweetKind::Reply;
        }
        let f = initiative_features(&tl);
        assert_eq!(f[1], Some(0.3));

        let pair = [
            tt(&["a", "b"], TweetKind::Original, 0),
            tt(&["c", "d"], TweetKind::Original, 1),
        ];
        assert_eq!(pair_entropy_series(&pair), [2.0]);

        let f = initiative_features(&pair[..1]);
        assert!(f[12..19].iter().all(Option::is_none));
        assert!(f[5..12].iter().all(Option::is_some));
        assert!(initiative_features(&[]).iter().all(Option::is_none));
    }

    #[test]
    fn adaptability_examples() {
        let tl = [
            tt(&["a", "b"], TweetKind::Original, 0),
            tt(&["a", "c"], TweetKind::Original, 5),
        ];
        assert_eq!(language_novelty_series(&tl), [100.0, 50.0]);
        let tl = [
            tt(&["x", "y"], TweetKind::Original, 0),
            tt(&["x", "y"], TweetKind::Original, 5),
        ];
        assert_eq!(language_novelty_series(&tl), [100.0, 0.0]);

        let mut rts: Vec<TokenizedTweet> = ["X", "X", "Y"]
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let mut t = tt(&[], TweetKind::Retweet, i as i64);
                t.retweeted_author = Some(a.to_string());
                t
            })
            .collect();
        rts.push(tt(&["z"], TweetKind::Original, 10));
        let f = adaptability_features(&rts);
        // retweeted_accounts sample [2, 1]: min 1, max 2
        assert_eq!(&f[28..30], &[Some(1.0), Some(2.0)]);
        assert_eq!(f.len(), 56);
        // no mentions -> missing
        assert!(f[21..28].iter().all(Option::is_none));
    }

    #[test]
    fn column_catalog() {
        let cols = behavioral_columns();
        assert_eq!(cols.len(), 92);
        let names: HashSet<_> = cols.iter().map(|c| &c.name).collect();
        assert_eq!(names.len(), 92);
        assert_eq!(
            cols.iter().filter(|c| c.kind == ColumnKind::Binary).count(),
            4
        );
        assert_eq!(
            cols.iter()
                .filter(|c| c.group == FeatureGroup::Credibility)
                .count(),
            17
        );
        assert_eq!(
            cols.iter()
                .filter(|c| c.group == FeatureGroup::Initiative)
                .count(),
            19
        );
        assert_eq!(
            cols.iter()
                .filter(|c| c.group == FeatureGroup::Adaptability)
                .count(),
            56
        );
        assert_eq!(
            describe_column("emo_joy").group,
            FeatureGroup::Psycholinguistic
        );
    }

    fn arb_timeline() -> impl Strategy<Value = Vec<TokenizedTweet>> {
        let vocab = prop::sample::select(vec!["a", "b", "c", "d", "e", URL_TOKEN]);
        let kinds = prop::sample::select(vec![
            TweetKind::Original,
            TweetKind::Retweet,
            TweetKind::Reply,
            TweetKind::Quote,
        ]);
        prop::collection::vec(
            (prop::collection::vec(vocab, 0..6), kinds, 0i64..1000),
            1..30,
        )
        .prop_map(|items| {
            let mut t = 0;
            items
                .into_iter()
                .map(|(toks, kind, gap)| {
                    t += gap;
                    tt(&toks, kind, t)
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn kinds_partition_timeline(tl in arb_timeline()) {
            let s = kind_shares(&tl).unwrap();
            prop_assert!((s.original + s.retweet + s.reply + s.quote - 1.0).abs() < 1e-12);
            let f = initiative_features(&tl);
            prop_assert_eq!(f[0], Some(s.retweet));
            prop_assert_eq!(f[1], Some(s.reply));
            for v in f[..5].iter().flatten() {
                prop_assert!((0.0..=1.0).contains(v));
            }
        }

        #[test]
        fn novelty_and_gaps_bounded(tl in arb_timeline()) {
            let nov = language_novelty_series(&tl);
            prop_assert_eq!(nov[0], 100.0);
            prop_assert!(nov.iter().all(|v| (0.0..=100.0).contains(v)));
            prop_assert!(gaps(tl.iter()).iter().all(|g| *g >= 0.0));
        }
    }
}
