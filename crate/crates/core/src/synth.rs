//! Synthetic corpora with planted behavioral contrasts between a
//! conspiracy-engaged group and a pool of control candidates.
//!
//! Group membership drives the like/follow pattern (planted conspiracists
//! pass the cohort filters, noise likers fail them, control candidates never
//! touch a seed). Behavior is drawn from a [`ProfileSpec`] per group; the
//! conspiracy profile is interpolated from the control profile by
//! `separation`, so `separation = 0` makes the groups indistinguishable.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, Datelike, Duration, TimeZone, Utc};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, Gamma, LogNormal, Zipf};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{
    write_corpus, Corpus, CorpusError, CorpusPaths, Follow, Like, TweetKind, TweetRecord,
    UserRecord,
};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("infeasible synthetic spec: {}", .0.join("; "))]
    Infeasible(Vec<String>),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Words that the bundled emotion lexicon tags negative (mostly fear/anger).
pub const NEGATIVE_WORDS: [&str; 16] = [
    "afraid", "threat", "danger", "panic", "poison", "toxic", "lies", "corrupt", "fraud", "evil",
    "tyranny", "censor", "hidden", "shocking", "betray", "victim",
];
/// Words that the bundled emotion lexicon tags positive.
pub const POSITIVE_WORDS: [&str; 13] = [
    "happy",
    "love",
    "friend",
    "share",
    "learn",
    "team",
    "celebrate",
    "hope",
    "thanks",
    "beautiful",
    "trust",
    "science",
    "kind",
];
/// Hashtags both groups draw from; the first is on every user's first tweet.
pub const SHARED_HASHTAGS: [&str; 8] = [
    "covid19", "vaccine", "lockdown", "health", "news", "freedom", "usa", "climate",
];

const CONSONANTS: [char; 12] = ['b', 'd', 'g', 'k', 'l', 'm', 'n', 'p', 'r', 't', 'v', 'z'];
const VOWELS: [char; 4] = ['a', 'i', 'o', 'u'];
const MAX_DOMAINS: u32 = 100;

/// Pseudo-word `i` (three consonant-vowel syllables), never a lexicon word.
pub fn pseudo_word(mut i: u32) -> String {
    let mut w = String::with_capacity(6);
    for _ in 0..3 {
        let s = (i % 48) as usize;
        i /= 48;
        w.push(CONSONANTS[s / 4]);
        w.push(VOWELS[s % 4]);
    }
    w
}

fn domain(i: u32) -> String {
    format!("www.site{i:02}.net")
}

/// Behavioral distributions for one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub no_bio_prob: f64,
    /// Inclusive word-count range of a present bio.
    pub bio_words: (u32, u32),
    /// Chance of each of two possible bio URLs.
    pub bio_url_prob: f64,
    pub bio_hashtag_prob: f64,
    pub followers_log_mean: f64,
    pub followers_log_sd: f64,
    pub following_log_mean: f64,
    pub following_log_sd: f64,
    pub listed_rate: f64,
    pub verified_prob: f64,
    pub default_pic_prob: f64,
    /// Inclusive timeline-length range.
    pub tweets: (u32, u32),
    pub retweet_share: f64,
    pub reply_share: f64,
    pub quote_share: f64,
    /// Dirichlet concentration of per-user kind shares around the group's.
    pub share_concentration: f64,
    pub url_prob: f64,
    pub mention_prob: f64,
    pub hashtag_prob: f64,
    /// Mean inter-tweet gap.
    pub gap_hours: f64,
    pub vocab_size: u32,
    pub words_per_tweet: (u32, u32),
    pub negative_share: f64,
    pub positive_share: f64,
    pub retweet_authors: u32,
    pub domains: u32,
    /// Log-normal sd of each user's personal multiplier on rates and tweet length.
    pub user_spread: f64,
}

impl ProfileSpec {
    pub fn default_control() -> Self {
        ProfileSpec {
            no_bio_prob: 0.0,
            bio_words: (8, 25),
            bio_url_prob: 0.1,
            bio_hashtag_prob: 0.1,
            followers_log_mean: 6.0,
            followers_log_sd: 1.5,
            following_log_mean: 6.0,
            following_log_sd: 1.0,
            listed_rate: 0.01,
            verified_prob: 0.02,
            default_pic_prob: 0.05,
            tweets: (40, 160),
            retweet_share: 0.35,
            reply_share: 0.21,
            quote_share: 0.06,
            share_concentration: 30.0,
            url_prob: 0.25,
            mention_prob: 0.2,
            hashtag_prob: 0.3,
            gap_hours: 20.0,
            vocab_size: 1500,
            words_per_tweet: (5, 20),
            negative_share: 0.03,
            positive_share: 0.08,
            retweet_authors: 60,
            domains: 25,
            user_spread: 0.35,
        }
    }

    pub fn default_conspiracy() -> Self {
        ProfileSpec {
            no_bio_prob: 0.25,
            bio_words: (3, 12),
            bio_url_prob: 0.45,
            bio_hashtag_prob: 0.3,
            followers_log_mean: 5.5,
            following_log_mean: 6.5,
            retweet_share: 0.40,
            reply_share: 0.35,
            quote_share: 0.06,
            url_prob: 0.45,
            mention_prob: 0.3,
            gap_hours: 10.0,
            vocab_size: 3000,
            words_per_tweet: (8, 30),
            negative_share: 0.12,
            positive_share: 0.03,
            retweet_authors: 15,
            domains: 8,
            ..Self::default_control()
        }
    }

    /// `(1 - t)·a + t·b` field by field; integer fields are rounded.
    pub fn blend(a: &ProfileSpec, b: &ProfileSpec, t: f64) -> ProfileSpec {
        let f = |x: f64, y: f64| (1.0 - t) * x + t * y;
        let u = |x: u32, y: u32| f(f64::from(x), f64::from(y)).round() as u32;
        let r = |x: (u32, u32), y: (u32, u32)| (u(x.0, y.0), u(x.1, y.1));
        ProfileSpec {
            no_bio_prob: f(a.no_bio_prob, b.no_bio_prob),
            bio_words: r(a.bio_words, b.bio_words),
            bio_url_prob: f(a.bio_url_prob, b.bio_url_prob),
            bio_hashtag_prob: f(a.bio_hashtag_prob, b.bio_hashtag_prob),
            followers_log_mean: f(a.followers_log_mean, b.followers_log_mean),
            followers_log_sd: f(a.followers_log_sd, b.followers_log_sd),
            following_log_mean: f(a.following_log_mean, b.following_log_mean),
            following_log_sd: f(a.following_log_sd, b.following_log_sd),
            listed_rate: f(a.listed_rate, b.listed_rate),
            verified_prob: f(a.verified_prob, b.verified_prob),
            default_pic_prob: f(a.default_pic_prob, b.default_pic_prob),
            tweets: r(a.tweets, b.tweets),
            retweet_share: f(a.retweet_share, b.retweet_share),
            reply_share: f(a.reply_share, b.reply_share),
            quote_share: f(a.quote_share, b.quote_share),
            share_concentration: f(a.share_concentration, b.share_concentration),
            url_prob: f(a.url_prob, b.url_prob),
            mention_prob: f(a.mention_prob, b.mention_prob),
            hashtag_prob: f(a.hashtag_prob, b.hashtag_prob),
            gap_hours: f(a.gap_hours, b.gap_hours),
            vocab_size: u(a.vocab_size, b.vocab_size),
            words_per_tweet: r(a.words_per_tweet, b.words_per_tweet),
            negative_share: f(a.negative_share, b.negative_share),
            positive_share: f(a.positive_share, b.positive_share),
            retweet_authors: u(a.retweet_authors, b.retweet_authors),
            domains: u(a.domains, b.domains),
            user_spread: f(a.user_spread, b.user_spread),
        }
    }

    fn original_share(&self) -> f64 {
        1.0 - self.retweet_share - self.reply_share - self.quote_share
    }

    fn problems(&self, group: &str, out: &mut Vec<String>) {
        let probs = [
            ("no_bio_prob", self.no_bio_prob),
            ("bio_url_prob", self.bio_url_prob),
            ("bio_hashtag_prob", self.bio_hashtag_prob),
            ("verified_prob", self.verified_prob),
            ("default_pic_prob", self.default_pic_prob),
            ("retweet_share", self.retweet_share),
            ("reply_share", self.reply_share),
            ("quote_share", self.quote_share),
            ("url_prob", self.url_prob),
            ("mention_prob", self.mention_prob),
            ("hashtag_prob", self.hashtag_prob),
            ("negative_share", self.negative_share),
            ("positive_share", self.positive_share),
            ("listed_rate", self.listed_rate),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                out.push(format!("{group}.{name} = {p} is not in [0,1]"));
            }
        }
        let kinds = self.retweet_share + self.reply_share + self.quote_share;
        if kinds > 1.0 + 1e-12 {
            out.push(format!(
                "{group}: retweet + reply + quote shares = {kinds} exceed 1"
            ));
        }
        let words = self.negative_share + self.positive_share;
        if words > 1.0 + 1e-12 {
            out.push(format!(
                "{group}: negative + positive word shares = {words} exceed 1"
            ));
        }
        for (name, (lo, hi), min) in [
            ("bio_words", self.bio_words, 1),
            ("tweets", self.tweets, 1),
            ("words_per_tweet", self.words_per_tweet, 1),
        ] {
            if lo < min || lo > hi {
                out.push(format!(
                    "{group}.{name} = ({lo}, {hi}) must satisfy {min} <= lo <= hi"
                ));
            }
        }
        for (name, v) in [
            ("followers_log_sd", self.followers_log_sd),
            ("following_log_sd", self.following_log_sd),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                out.push(format!("{group}.{name} = {v} must be non-negative"));
            }
        }
        for (name, v) in [
            ("share_concentration", self.share_concentration),
            ("gap_hours", self.gap_hours),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                out.push(format!("{group}.{name} = {v} must be positive"));
            }
        }
        if !(self.user_spread >= 0.0 && self.user_spread.is_finite()) {
            out.push(format!(
                "{group}.user_spread = {} must be finite and non-negative",
                self.user_spread
            ));
        }
        if !self.followers_log_mean.is_finite() || !self.following_log_mean.is_finite() {
            out.push(format!("{group}: log means must be finite"));
        }
        if self.vocab_size == 0 || self.vocab_size > 48 * 48 * 48 {
            out.push(format!(
                "{group}.vocab_size = {} must be in 1..={}",
                self.vocab_size,
                48 * 48 * 48
            ));
        }
        if self.retweet_authors == 0 {
            out.push(format!("{group}.retweet_authors must be positive"));
        }
        if self.domains == 0 || self.domains > MAX_DOMAINS {
            out.push(format!(
                "{group}.domains = {} must be in 1..={MAX_DOMAINS}",
                self.domains
            ));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_per_group: usize,
    /// English control candidates per planted conspiracist.
    pub control_pool_factor: usize,
    /// Extra non-English candidates, as a fraction of the English pool.
    pub other_language_fraction: f64,
    /// Seed likers planted to fail the cohort filters, per conspiracist.
    pub noise_fraction: f64,
    pub n_seeds: usize,
    /// 0 gives identical group behavior, 1 the full conspiracy profile.
    pub separation: f64,
    pub creation_start: DateTime<Utc>,
    pub creation_end: DateTime<Utc>,
    pub tweets_start: DateTime<Utc>,
    pub snapshot: DateTime<Utc>,
    pub target_language: String,
    pub other_language: String,
    /// Inclusive range of a conspiracist's total likes on seed posts.
    pub likes_total: (u32, u32),
    /// Inclusive range of distinct seeds a conspiracist likes.
    pub liked_seeds: (usize, usize),
    /// Inclusive range of seeds a conspiracist follows.
    pub followed_seeds: (usize, usize),
    pub control: ProfileSpec,
    pub conspiracy: ProfileSpec,
}

fn utc(y: i32, m: u32, d: u32) -> DateTime<Utc> {
    Utc.with_ymd_and_hms(y, m, d, 0, 0, 0).unwrap()
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_per_group: 200,
            control_pool_factor: 3,
            other_language_fraction: 0.2,
            noise_fraction: 0.5,
            n_seeds: 26,
            separation: 1.0,
            creation_start: utc(2016, 1, 1),
            creation_end: utc(2021, 4, 1),
            tweets_start: utc(2021, 6, 1),
            snapshot: utc(2022, 6, 13),
            target_language: "en".into(),
            other_language: "es".into(),
            likes_total: (25, 60),
            liked_seeds: (4, 8),
            followed_seeds: (1, 3),
            control: ProfileSpec::default_control(),
            conspiracy: ProfileSpec::default_conspiracy(),
        }
    }
}

impl SynthSpec {
    /// The conspiracy profile actually used, after applying `separation`.
    pub fn effective_conspiracy(&self) -> ProfileSpec {
        ProfileSpec::blend(&self.control, &self.conspiracy, self.separation)
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.n_per_group < 2 {
            out.push(format!(
                "n_per_group = {} must be at least 2",
                self.n_per_group
            ));
        }
        if self.control_pool_factor == 0 {
            out.push("control_pool_factor must be positive".into());
        }
        for (name, v) in [
            ("other_language_fraction", self.other_language_fraction),
            ("noise_fraction", self.noise_fraction),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                out.push(format!("{name} = {v} must be non-negative"));
            }
        }
        if !(0.0..=1.0).contains(&self.separation) {
            out.push(format!("separation = {} is not in [0,1]", self.separation));
        }
        if self.n_seeds < 4 {
            out.push(format!("n_seeds = {} must be at least 4", self.n_seeds));
        }
        let (slo, shi) = self.liked_seeds;
        if slo == 0 || slo > shi || shi > self.n_seeds {
            out.push(format!(
                "liked_seeds = ({slo}, {shi}) must satisfy 1 <= lo <= hi <= n_seeds"
            ));
        }
        let (flo, fhi) = self.followed_seeds;
        if flo == 0 || flo > fhi || fhi > self.n_seeds {
            out.push(format!(
                "followed_seeds = ({flo}, {fhi}) must satisfy 1 <= lo <= hi <= n_seeds"
            ));
        }
        let (llo, lhi) = self.likes_total;
        if llo as usize > lhi as usize || (llo as usize) < shi {
            out.push(format!(
                "likes_total = ({llo}, {lhi}) must satisfy liked_seeds.hi <= lo <= hi"
            ));
        }
        if !(self.creation_start < self.creation_end
            && self.creation_end <= self.tweets_start
            && self.tweets_start < self.snapshot)
        {
            out.push(
                "dates must satisfy creation_start < creation_end <= tweets_start < snapshot"
                    .into(),
            );
        }
        if self.target_language == self.other_language {
            out.push("other_language must differ from target_language".into());
        }
        self.control.problems("control", &mut out);
        self.conspiracy.problems("conspiracy", &mut out);
        out
    }
}

/// Which role a generated account plays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Conspiracy,
    Control,
    OtherLanguage,
    /// Seed engagement that fails one cohort filter; `0..4` picks which.
    Noise(u8),
}

pub struct SynthOutput {
    pub corpus: Corpus,
    /// 1 for planted conspiracists, 0 for everyone else.
    pub ground_truth: BTreeMap<String, u8>,
    pub roles: BTreeMap<String, Role>,
}

struct Plan {
    index: usize,
    user_id: String,
    role: Role,
    /// Quarter to copy the creation date from, for matched candidates.
    quarter_of: Option<DateTime<Utc>>,
}

struct Generated {
    user: UserRecord,
    tweets: Vec<TweetRecord>,
    likes: Vec<Like>,
    follows: Vec<Follow>,
}

fn stream(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn between(rng: &mut ChaCha8Rng, lo: DateTime<Utc>, hi: DateTime<Utc>) -> DateTime<Utc> {
    let span = (hi - lo).num_seconds().max(1);
    lo + Duration::seconds(rng.random_range(0..span))
}

fn quarter_bounds(t: DateTime<Utc>) -> (DateTime<Utc>, DateTime<Utc>) {
    let q0 = (t.month0() / 3) * 3 + 1;
    let start = utc(t.year(), q0, 1);
    let end = if q0 == 10 {
        utc(t.year() + 1, 1, 1)
    } else {
        utc(t.year(), q0 + 3, 1)
    };
    (start, end)
}

fn creation_date(
    spec: &SynthSpec,
    rng: &mut ChaCha8Rng,
    quarter_of: Option<DateTime<Utc>>,
) -> DateTime<Utc> {
    match quarter_of {
        Some(t) => {
            let (lo, hi) = quarter_bounds(t);
            between(rng, lo.max(spec.creation_start), hi.min(spec.creation_end))
        }
        None => between(rng, spec.creation_start, spec.creation_end),
    }
}

fn zipf_index(rng: &mut ChaCha8Rng, n: u32, s: f64) -> u32 {
    if n <= 1 {
        return 0;
    }
    let z = Zipf::new(f64::from(n), s).expect("valid zipf");
    (z.sample(rng) as u32).clamp(1, n) - 1
}

fn word(rng: &mut ChaCha8Rng, p: &ProfileSpec, offset: u32) -> String {
    let u: f64 = rng.random();
    if u < p.negative_share {
        NEGATIVE_WORDS[rng.random_range(0..NEGATIVE_WORDS.len())].to_string()
    } else if u < p.negative_share + p.positive_share {
        POSITIVE_WORDS[rng.random_range(0..POSITIVE_WORDS.len())].to_string()
    } else {
        pseudo_word((zipf_index(rng, p.vocab_size, 1.05) + offset) % (48 * 48 * 48))
    }
}

fn words(rng: &mut ChaCha8Rng, p: &ProfileSpec, n: u32) -> Vec<String> {
    (0..n).map(|_| word(rng, p, 0)).collect()
}

fn bio(rng: &mut ChaCha8Rng, p: &ProfileSpec) -> Option<String> {
    if rng.random_bool(p.no_bio_prob) {
        return None;
    }
    let n = rng.random_range(p.bio_words.0..=p.bio_words.1);
    let ws = words(rng, p, n);
    let mut sentences = Vec::new();
    let mut rest = &ws[..];
    while !rest.is_empty() {
        let k = rng.random_range(3..=8).min(rest.len());
        let mut s = rest[..k].join(" ");
        if let Some(c) = s.get_mut(0..1) {
            c.make_ascii_uppercase();
        }
        sentences.push(s + ".");
        rest = &rest[k..];
    }
    let mut text = sentences.join(" ");
    for _ in 0..2 {
        if rng.random_bool(p.bio_url_prob) {
            text.push_str(&format!(
                " https://{}/about",
                domain(rng.random_range(0..p.domains))
            ));
        }
    }
    if rng.random_bool(p.bio_hashtag_prob) {
        text.push_str(&format!(
            " #{}",
            SHARED_HASHTAGS[zipf_index(rng, SHARED_HASHTAGS.len() as u32, 1.0) as usize]
        ));
    }
    Some(text)
}

fn kind_weights(rng: &mut ChaCha8Rng, p: &ProfileSpec) -> [f64; 4] {
    let shares = [
        p.original_share(),
        p.retweet_share,
        p.reply_share,
        p.quote_share,
    ];
    let mut g = [0.0; 4];
    for (gi, s) in g.iter_mut().zip(shares) {
        if s > 1e-12 {
            *gi = Gamma::new(p.share_concentration * s, 1.0)
                .expect("valid gamma")
                .sample(rng);
        }
    }
    if g.iter().sum::<f64>() <= 0.0 {
        return shares;
    }
    g
}

/// One user's own rates: the group's, each scaled by a log-normal factor.
fn personalize(rng: &mut ChaCha8Rng, p: &ProfileSpec) -> ProfileSpec {
    let jitter = LogNormal::new(0.0, p.user_spread).expect("valid lognormal");
    let mut rate = |x: f64| (x * jitter.sample(rng)).min(1.0);
    let mut q = p.clone();
    q.url_prob = rate(p.url_prob);
    q.mention_prob = rate(p.mention_prob);
    q.hashtag_prob = rate(p.hashtag_prob);
    q.negative_share = rate(p.negative_share);
    q.positive_share = rate(p.positive_share);
    let words = q.negative_share + q.positive_share;
    if words > 0.9 {
        q.negative_share *= 0.9 / words;
        q.positive_share *= 0.9 / words;
    }
    let scale = jitter.sample(rng);
    let lo = ((f64::from(p.words_per_tweet.0) * scale).round() as u32).max(1);
    let hi = ((f64::from(p.words_per_tweet.1) * scale).round() as u32).max(lo);
    q.words_per_tweet = (lo, hi);
    q
}

fn timeline(
    spec: &SynthSpec,
    p: &ProfileSpec,
    rng: &mut ChaCha8Rng,
    user_id: &str,
    lang: &str,
) -> Vec<TweetRecord> {
    let p = &personalize(rng, p);
    let n = rng.random_range(p.tweets.0..=p.tweets.1);
    let kinds = WeightedIndex::new(kind_weights(rng, p)).expect("positive kind weights");
    let user_gap = p.gap_hours
        * LogNormal::new(0.0, 0.3)
            .expect("valid lognormal")
            .sample(rng);
    let gap = Exp::new(1.0 / user_gap).expect("valid exp");
    let offset = rng.random_range(0..p.vocab_size.min(200));
    let mut t = spec.tweets_start + Duration::seconds(rng.random_range(0..30 * 86_400));
    let mut out = Vec::with_capacity(n as usize);
    for i in 0..n {
        if i > 0 {
            t += Duration::seconds((gap.sample(rng) * 3600.0).round() as i64);
        }
        if t >= spec.snapshot {
            break;
        }
        let kind = [
            TweetKind::Original,
            TweetKind::Retweet,
            TweetKind::Reply,
            TweetKind::Quote,
        ][kinds.sample(rng)];
        let nw = rng.random_range(p.words_per_tweet.0..=p.words_per_tweet.1);
        let body: Vec<String> = (0..nw).map(|_| word(rng, p, offset)).collect();
        let mut text = String::new();
        let mut mentions = Vec::new();
        let mut retweeted_author = None;
        match kind {
            TweetKind::Retweet => {
                let a = format!("acct{}", zipf_index(rng, p.retweet_authors, 1.1));
                text.push_str(&format!("RT @{a}: "));
                mentions.push(a.clone());
                retweeted_author = Some(a);
            }
            TweetKind::Reply => {
                let a = format!("acct{}", rng.random_range(0..500));
                text.push_str(&format!("@{a} "));
                mentions.push(a);
            }
            _ => {
                if rng.random_bool(p.mention_prob) {
                    let a = format!("acct{}", rng.random_range(0..500));
                    text.push_str(&format!("@{a} "));
                    mentions.push(a);
                }
            }
        }
        text.push_str(&body.join(" "));
        let mut urls = Vec::new();
        if rng.random_bool(p.url_prob) {
            let u = format!(
                "https://{}/p/{}",
                domain(zipf_index(rng, p.domains, 1.0)),
                rng.random_range(0..100_000)
            );
            text.push(' ');
            text.push_str(&u);
            urls.push(u);
        }
        let mut hashtags: Vec<String> = Vec::new();
        if i == 0 {
            hashtags.push(SHARED_HASHTAGS[0].to_string());
        }
        if rng.random_bool(p.hashtag_prob) {
            for _ in 0..rng.random_range(1..=2) {
                let h = SHARED_HASHTAGS
                    [zipf_index(rng, SHARED_HASHTAGS.len() as u32, 1.0) as usize]
                    .to_string();
                if !hashtags.contains(&h) {
                    hashtags.push(h);
                }
            }
        }
        for h in &hashtags {
            text.push_str(&format!(" #{h}"));
        }
        out.push(TweetRecord {
            tweet_id: format!("{user_id}_{i:05}"),
            author_id: user_id.to_string(),
            created_at: t,
            kind,
            text,
            hashtags,
            urls,
            mentions,
            retweeted_author,
            lang: Some(lang.to_string()),
        });
    }
    out
}

fn seed_id(i: usize) -> String {
    format!("seed_{:02}", i + 1)
}

/// `total` likes spread as evenly as possible over `seeds`.
fn even_likes(rng: &mut ChaCha8Rng, user_id: &str, seeds: &[usize], total: u32) -> Vec<Like> {
    let k = seeds.len() as u32;
    let mut out = Vec::new();
    for (j, &s) in seeds.iter().enumerate() {
        let n = total / k + u32::from((j as u32) < total % k);
        out.extend(counted_likes(rng, user_id, s, n));
    }
    out
}

fn counted_likes(rng: &mut ChaCha8Rng, user_id: &str, seed: usize, n: u32) -> Vec<Like> {
    let base = rng.random_range(0..10_000u32);
    (0..n)
        .map(|k| Like {
            user_id: user_id.to_string(),
            seed_id: seed_id(seed),
            liked_tweet_id: format!("{}_p{:05}", seed_id(seed), base + k),
        })
        .collect()
}

fn follows(user_id: &str, seeds: &[usize]) -> Vec<Follow> {
    seeds
        .iter()
        .map(|&s| Follow {
            follower_id: user_id.to_string(),
            followee_id: seed_id(s),
        })
        .collect()
}

fn engagement(spec: &SynthSpec, rng: &mut ChaCha8Rng, plan: &Plan) -> (Vec<Like>, Vec<Follow>) {
    let uid = plan.user_id.as_str();
    let pick = |rng: &mut ChaCha8Rng, k: usize| {
        let mut v = index::sample(rng, spec.n_seeds, k).into_vec();
        v.sort_unstable();
        v
    };
    match plan.role {
        Role::Conspiracy => {
            let s = rng.random_range(spec.liked_seeds.0..=spec.liked_seeds.1);
            let total = rng.random_range(spec.likes_total.0..=spec.likes_total.1);
            let liked = pick(rng, s);
            let likes = even_likes(rng, uid, &liked, total);
            let f = rng.random_range(spec.followed_seeds.0..=spec.followed_seeds.1);
            (likes, follows(uid, &pick(rng, f)))
        }
        Role::Control | Role::OtherLanguage => (Vec::new(), Vec::new()),
        // likes enough seeds evenly, but follows none
        Role::Noise(0) => {
            let liked = pick(rng, 4);
            (
                even_likes(rng, uid, &liked, spec.likes_total.0.max(28)),
                Vec::new(),
            )
        }
        // follows, but one seed dominates (Cov ≈ 1.57)
        Role::Noise(1) => {
            let liked = pick(rng, 4);
            let mut likes = counted_likes(rng, uid, liked[0], 40);
            for &s in &liked[1..] {
                likes.extend(counted_likes(rng, uid, s, 1));
            }
            (likes, follows(uid, &liked[..1]))
        }
        // follows, but too few likes on too few seeds
        Role::Noise(2) => {
            let liked = pick(rng, 2);
            (even_likes(rng, uid, &liked, 10), follows(uid, &liked[..1]))
        }
        // follows a seed without liking anything
        Role::Noise(_) => (Vec::new(), follows(uid, &pick(rng, 1))),
    }
}

fn generate_user(
    spec: &SynthSpec,
    conspiracy: &ProfileSpec,
    rng_seed: u64,
    plan: &Plan,
) -> Generated {
    let mut rng = stream(rng_seed, plan.index);
    let p = if plan.role == Role::Conspiracy {
        conspiracy
    } else {
        &spec.control
    };
    let lang = if plan.role == Role::OtherLanguage {
        &spec.other_language
    } else {
        &spec.target_language
    };
    let created_at = creation_date(spec, &mut rng, plan.quarter_of);
    let followers = LogNormal::new(p.followers_log_mean, p.followers_log_sd)
        .expect("valid lognormal")
        .sample(&mut rng);
    let following = LogNormal::new(p.following_log_mean, p.following_log_sd)
        .expect("valid lognormal")
        .sample(&mut rng);
    let listed = (followers * p.listed_rate * rng.random_range(0.5..1.5)).floor();
    let bio = bio(&mut rng, p);
    let verified = rng.random_bool(p.verified_prob);
    let has_default_pic = rng.random_bool(p.default_pic_prob);
    let tweets = timeline(spec, p, &mut rng, &plan.user_id, lang);
    let (likes, follows) = engagement(spec, &mut rng, plan);
    let user = UserRecord {
        user_id: plan.user_id.clone(),
        created_at,
        followers_count: followers.round() as u64,
        following_count: following.round() as u64,
        tweet_count: tweets.len() as u64 + rng.random_range(0..5000),
        listed_count: listed as u64,
        verified,
        has_default_pic,
        bio,
        predominant_language: Some(lang.clone()),
        snapshot_at: spec.snapshot,
    };
    Generated {
        user,
        tweets,
        likes,
        follows,
    }
}

/// Builds the corpus in memory. Each account draws from its own ChaCha
/// stream `(rng_seed, account index)`, so the result does not depend on
/// scheduling.
pub fn generate_corpus(spec: &SynthSpec, rng_seed: u64) -> Result<SynthOutput, SynthError> {
    let problems = spec.problems();
    if !problems.is_empty() {
        return Err(SynthError::Infeasible(problems));
    }
    let n = spec.n_per_group;
    let pool = n * spec.control_pool_factor;
    let other = (pool as f64 * spec.other_language_fraction).round() as usize;
    let noise = (n as f64 * spec.noise_fraction).round() as usize;
    let total = n + pool + other + noise;
    let width = total.to_string().len().max(5);
    let id = |i: usize| format!("u{i:0width$}");

    // conspiracist creation dates first: matched candidates reuse their quarters
    let anchors: Vec<DateTime<Utc>> = (0..n)
        .into_par_iter()
        .map(|i| creation_date(spec, &mut stream(rng_seed, i), None))
        .collect();
    let mut plans = Vec::with_capacity(total);
    for i in 0..n {
        plans.push(Plan {
            index: i,
            user_id: id(i),
            role: Role::Conspiracy,
            quarter_of: None,
        });
    }
    for j in 0..pool {
        let i = n + j;
        plans.push(Plan {
            index: i,
            user_id: id(i),
            role: Role::Control,
            quarter_of: Some(anchors[j % n]),
        });
    }
    for j in 0..other {
        let i = n + pool + j;
        plans.push(Plan {
            index: i,
            user_id: id(i),
            role: Role::OtherLanguage,
            quarter_of: None,
        });
    }
    for j in 0..noise {
        let i = n + pool + other + j;
        plans.push(Plan {
            index: i,
            user_id: id(i),
            role: Role::Noise((j % 4) as u8),
            quarter_of: None,
        });
    }
    let conspiracy = spec.effective_conspiracy();
    let generated: Vec<Generated> = plans
        .par_iter()
        .map(|p| generate_user(spec, &conspiracy, rng_seed, p))
        .collect();
    debug_assert!(generated[..n]
        .iter()
        .zip(&anchors)
        .all(|(g, a)| g.user.created_at == *a));

    let ground_truth = plans
        .iter()
        .map(|p| (p.user_id.clone(), u8::from(p.role == Role::Conspiracy)))
        .collect();
    let roles = plans.iter().map(|p| (p.user_id.clone(), p.role)).collect();
    let mut users = Vec::with_capacity(total);
    let mut tweets = Vec::new();
    let mut likes = Vec::new();
    let mut follows = Vec::new();
    for g in generated {
        users.push(g.user);
        tweets.extend(g.tweets);
        likes.extend(g.likes);
        follows.extend(g.follows);
    }
    let seeds = (0..spec.n_seeds).map(seed_id).collect();
    Ok(SynthOutput {
        corpus: Corpus::from_records(users, tweets, likes, follows, seeds),
        ground_truth,
        roles,
    })
}

/// Writes the five corpus files plus `ground_truth.json` into `dir`.
pub fn write_synth(out: &SynthOutput, dir: &Path) -> Result<(), SynthError> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| SynthError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    write_corpus(&out.corpus, &CorpusPaths::in_dir(dir))?;
    let gt = dir.join("ground_truth.json");
    let text = serde_json::to_string_pretty(&out.ground_truth).expect("map serializes");
    std::fs::write(&gt, text + "\n").map_err(io(&gt))
}
