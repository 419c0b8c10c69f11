//! Conspiracy-cohort selection over the user × seed like matrix, plus the
//! matched control-group construction.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::{DateTime, Datelike, Utc};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;

#[derive(Debug, Error, PartialEq)]
pub enum CohortError {
    #[error("seed list is empty")]
    NoSeeds,
    #[error("grid axis {0} must be nonempty, ascending and >= 1")]
    BadAxis(&'static str),
    #[error("grid is empty")]
    EmptyGrid,
    #[error("thresholds must be >= 1")]
    BadThreshold,
    #[error("requested {requested} control users but the conspiracy cohort has only {available} with profiles")]
    CohortTooSmall { requested: usize, available: usize },
    #[error("creation bucket {bucket}: need {needed} control users, {available} eligible (shortfall {shortfall})")]
    BucketShortfall {
        bucket: String,
        needed: usize,
        available: usize,
        shortfall: usize,
    },
    #[error("requested {requested} control users but only {available} candidates are eligible")]
    InsufficientCandidates { requested: usize, available: usize },
}

/// One user's like counts, indexed like [`LikeMatrix::seeds`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LikeRow {
    pub user_id: String,
    pub counts: Vec<u32>,
}

impl LikeRow {
    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    pub fn distinct(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    /// Cov over the liked (nonzero) seeds. A single liked seed gives 0.
    ///
    /// Computed as `sqrt(n·Σx² − S²) / S` from exact integer sums, so rows
    /// whose Cov sits exactly on a threshold such as 0.5 are not pushed
    /// over it by rounding.
    pub fn cov(&self) -> f64 {
        let (mut n, mut s, mut s2) = (0u128, 0u128, 0u128);
        for &c in self.counts.iter().filter(|&&c| c > 0) {
            n += 1;
            s += c as u128;
            s2 += (c as u128) * (c as u128);
        }
        if s == 0 {
            return 0.0;
        }
        ((n * s2 - s * s) as f64).sqrt() / s as f64
    }
}

/// Users × seeds like counts. Only users with at least one seed like have a
/// row; rows are sorted by user id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LikeMatrix {
    pub seeds: Vec<String>,
    pub rows: Vec<LikeRow>,
}

impl LikeMatrix {
    pub fn user_ids(&self) -> BTreeSet<String> {
        self.rows.iter().map(|r| r.user_id.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn cell(&self, user_id: &str, seed_id: &str) -> u32 {
        let Some(col) = self.seeds.iter().position(|s| s == seed_id) else {
            return 0;
        };
        self.rows
            .binary_search_by(|r| r.user_id.as_str().cmp(user_id))
            .map(|i| self.rows[i].counts[col])
            .unwrap_or(0)
    }

    fn retain(mut self, keep: impl Fn(&LikeRow) -> bool) -> Self {
        self.rows.retain(|r| keep(r));
        self
    }
}

/// Counts likes on seed posts per user. Likes on non-seed accounts are ignored.
pub fn build_like_matrix(c: &Corpus) -> Result<LikeMatrix, CohortError> {
    if c.seeds.is_empty() {
        return Err(CohortError::NoSeeds);
    }
    let col: HashMap<&str, usize> = c
        .seeds
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let n = c.seeds.len();
    let merged: HashMap<&str, Vec<u32>> = c
        .likes
        .par_iter()
        .fold(HashMap::new, |mut acc: HashMap<&str, Vec<u32>>, like| {
            if let Some(&j) = col.get(like.seed_id.as_str()) {
                acc.entry(like.user_id.as_str())
                    .or_insert_with(|| vec![0; n])[j] += 1;
            }
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            for (u, counts) in b {
                let row = a.entry(u).or_insert_with(|| vec![0; n]);
                for (x, y) in row.iter_mut().zip(counts) {
                    *x += y;
                }
            }
            a
        });
    let mut rows: Vec<LikeRow> = merged
        .into_iter()
        .map(|(u, counts)| LikeRow {
            user_id: u.to_string(),
            counts,
        })
        .collect();
    rows.sort_by(|a, b| a.user_id.cmp(&b.user_id));
    Ok(LikeMatrix {
        seeds: c.seeds.clone(),
        rows,
    })
}

/// Keeps users following at least one seed account.
pub fn filter_follows_seed(m: LikeMatrix, c: &Corpus) -> LikeMatrix {
    let followers = c.seed_followers();
    m.retain(|r| followers.contains(&r.user_id))
}

/// Keeps users whose Cov over liked seeds is at most `max_cov`.
pub fn filter_cov(m: LikeMatrix, max_cov: f64) -> LikeMatrix {
    m.retain(|r| r.cov() <= max_cov)
}

/// Users with at least `l_min` total likes over at least `s_min` distinct seeds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridTable {
    pub l_axis: Vec<u64>,
    pub s_axis: Vec<usize>,
    /// `counts[i][j]` is the cell for `(l_axis[i], s_axis[j])`.
    pub counts: Vec<Vec<u64>>,
}

impl GridTable {
    pub fn get(&self, l_min: u64, s_min: usize) -> Option<u64> {
        let i = self.l_axis.iter().position(|&l| l == l_min)?;
        let j = self.s_axis.iter().position(|&s| s == s_min)?;
        Some(self.counts[i][j])
    }

    /// Non-increasing along both axes.
    pub fn is_monotone(&self) -> bool {
        let rows_ok = self
            .counts
            .iter()
            .all(|row| row.windows(2).all(|w| w[0] >= w[1]));
        let cols_ok = self
            .counts
            .windows(2)
            .all(|pair| pair[0].iter().zip(&pair[1]).all(|(a, b)| a >= b));
        rows_ok && cols_ok
    }

    /// CSV with a leading `l_min` column and one `s>=k` column per s-axis value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("l_min");
        for s in &self.s_axis {
            out.push_str(&format!(",s>={s}"));
        }
        out.push('\n');
        for (l, row) in self.l_axis.iter().zip(&self.counts) {
            out.push_str(&l.to_string());
            for c in row {
                out.push_str(&format!(",{c}"));
            }
            out.push('\n');
        }
        out
    }
}

/// The default likes axis `1, 5, 10, ..., 35`.
pub fn default_l_axis() -> Vec<u64> {
    std::iter::once(1).chain((5..=35).step_by(5)).collect()
}

pub fn default_s_axis() -> Vec<usize> {
    (1..=7).collect()
}

fn ascending_positive<T: PartialOrd + Copy + From<u8>>(axis: &[T]) -> bool {
    !axis.is_empty() && axis[0] >= T::from(1) && axis.windows(2).all(|w| w[0] < w[1])
}

pub fn threshold_grid(
    m: &LikeMatrix,
    l_axis: &[u64],
    s_axis: &[usize],
) -> Result<GridTable, CohortError> {
    if !ascending_positive(l_axis) {
        return Err(CohortError::BadAxis("likes"));
    }
    if !ascending_positive(s_axis) {
        return Err(CohortError::BadAxis("sources"));
    }
    let mut counts = vec![vec![0u64; s_axis.len()]; l_axis.len()];
    for r in &m.rows {
        let total = r.total();
        let distinct = r.distinct();
        // both axes ascending: count the prefix of satisfied thresholds
        let li = l_axis.partition_point(|&l| l <= total);
        let sj = s_axis.partition_point(|&s| s <= distinct);
        for row in counts.iter_mut().take(li) {
            for cell in row.iter_mut().take(sj) {
                *cell += 1;
            }
        }
    }
    let grid = GridTable {
        l_axis: l_axis.to_vec(),
        s_axis: s_axis.to_vec(),
        counts,
    };
    assert!(grid.is_monotone(), "threshold grid must be monotone");
    Ok(grid)
}

pub fn select_cohort(
    m: &LikeMatrix,
    l_min: u64,
    s_min: usize,
) -> Result<BTreeSet<String>, CohortError> {
    if l_min < 1 || s_min < 1 {
        return Err(CohortError::BadThreshold);
    }
    Ok(m.rows
        .iter()
        .filter(|r| r.total() >= l_min && r.distinct() >= s_min)
        .map(|r| r.user_id.clone())
        .collect())
}

/// Cell-selection rule for [`auto_thresholds`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRule {
    pub target: u64,
    /// Only consider cells whose count does not exceed the target.
    #[serde(default)]
    pub at_or_below: bool,
    #[serde(default)]
    pub min_likes: Option<u64>,
    #[serde(default)]
    pub min_sources: Option<usize>,
}

impl ThresholdRule {
    pub fn closest(target: u64) -> Self {
        Self {
            target,
            at_or_below: false,
            min_likes: None,
            min_sources: None,
        }
    }
}

/// Grid cell whose count is closest to the target; ties go to the larger
/// `s_min`, then the larger `l_min`.
pub fn auto_thresholds(g: &GridTable, target: u64) -> Result<(u64, usize), CohortError> {
    auto_thresholds_with(g, &ThresholdRule::closest(target))
}

/// [`auto_thresholds`] restricted to cells admitted by `rule`.
pub fn auto_thresholds_with(
    g: &GridTable,
    rule: &ThresholdRule,
) -> Result<(u64, usize), CohortError> {
    let mut best: Option<(u64, usize, usize, u64)> = None; // (dist, s, l-index, l)
    for (i, &l) in g.l_axis.iter().enumerate() {
        for (j, &s) in g.s_axis.iter().enumerate() {
            let count = g.counts[i][j];
            if rule.at_or_below && count > rule.target {
                continue;
            }
            if rule.min_likes.is_some_and(|m| l < m) || rule.min_sources.is_some_and(|m| s < m) {
                continue;
            }
            let dist = count.abs_diff(rule.target);
            let better = match best {
                None => true,
                Some((bd, bs, _, bl)) => {
                    (dist, std::cmp::Reverse(s), std::cmp::Reverse(l))
                        < (bd, std::cmp::Reverse(bs), std::cmp::Reverse(bl))
                }
            };
            if better {
                best = Some((dist, s, i, l));
            }
        }
    }
    best.map(|(_, s, _, l)| (l, s))
        .ok_or(CohortError::EmptyGrid)
}

/// Hashtags ranked by the number of cohort tweets containing them;
/// ties broken by tag.
pub fn top_hashtags(c: &Corpus, cohort: &BTreeSet<String>, k: usize) -> Vec<(String, u64)> {
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for user in cohort {
        for t in c.timeline(user) {
            for h in &t.hashtags {
                *counts.entry(h.as_str()).or_default() += 1;
            }
        }
    }
    let mut ranked: Vec<(String, u64)> = counts
        .into_iter()
        .map(|(h, n)| (h.to_string(), n))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(k);
    ranked
}

/// Authors outside `exclude` with at least one tweet using any of `tags`.
pub fn topic_candidates(
    c: &Corpus,
    tags: &[String],
    exclude: &BTreeSet<String>,
) -> BTreeSet<String> {
    let tags: BTreeSet<&str> = tags.iter().map(String::as_str).collect();
    c.timelines
        .iter()
        .filter(|(u, _)| !exclude.contains(*u))
        .filter(|(_, tl)| {
            tl.iter()
                .any(|t| t.hashtags.iter().any(|h| tags.contains(h.as_str())))
        })
        .map(|(u, _)| u.clone())
        .collect()
}

/// Granularity of account-creation matching.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CreationBucket {
    #[default]
    Quarter,
    Days(u32),
}

impl CreationBucket {
    /// Ordinal bucket index; adjacent buckets differ by 1.
    pub fn index(&self, t: DateTime<Utc>) -> i64 {
        match *self {
            CreationBucket::Quarter => t.year() as i64 * 4 + (t.month0() / 3) as i64,
            CreationBucket::Days(d) => t.timestamp().div_euclid(d.max(1) as i64 * 86_400),
        }
    }

    pub fn label(&self, index: i64) -> String {
        match *self {
            CreationBucket::Quarter => {
                format!("{}Q{}", index.div_euclid(4), index.rem_euclid(4) + 1)
            }
            CreationBucket::Days(d) => format!("day{}+{}", index * d as i64, d),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlConstraints {
    pub target_language: String,
    #[serde(default)]
    pub creation_bucket: CreationBucket,
    /// Seed likers; filled from the corpus when empty.
    #[serde(default)]
    pub excluded_users: BTreeSet<String>,
    /// Accounts a control user must not follow; the seed list when empty.
    #[serde(default)]
    pub excluded_follow_targets: BTreeSet<String>,
    /// Borrow from the nearest bucket instead of failing on a shortfall.
    #[serde(default)]
    pub allow_overflow: bool,
}

impl ControlConstraints {
    pub fn new(target_language: impl Into<String>) -> Self {
        Self {
            target_language: target_language.into(),
            creation_bucket: CreationBucket::Quarter,
            excluded_users: BTreeSet::new(),
            excluded_follow_targets: BTreeSet::new(),
            allow_overflow: false,
        }
    }
}

/// Candidates passing the exclusion and language rules (profile required).
pub fn eligible_controls(
    c: &Corpus,
    conspiracy: &BTreeSet<String>,
    candidates: &BTreeSet<String>,
    constraints: &ControlConstraints,
) -> BTreeSet<String> {
    let mut excluded = constraints.excluded_users.clone();
    excluded.extend(c.seed_likers());
    let follow_targets: BTreeSet<&str> = if constraints.excluded_follow_targets.is_empty() {
        c.seed_set()
    } else {
        constraints
            .excluded_follow_targets
            .iter()
            .map(String::as_str)
            .collect()
    };
    let bad_followers: BTreeSet<&str> = c
        .follows
        .iter()
        .filter(|f| follow_targets.contains(f.followee_id.as_str()))
        .map(|f| f.follower_id.as_str())
        .collect();
    let seeds = c.seed_set();
    candidates
        .iter()
        .filter(|u| !conspiracy.contains(*u) && !excluded.contains(*u))
        .filter(|u| !bad_followers.contains(u.as_str()) && !seeds.contains(u.as_str()))
        .filter(|u| c.users.contains_key(*u))
        .filter(|u| {
            c.predominant_language(u).as_deref() == Some(constraints.target_language.as_str())
        })
        .cloned()
        .collect()
}

/// Draws `n` control users whose creation-bucket histogram equals that of a
/// size-`n` random sample of the conspiracy cohort.
pub fn build_control(
    c: &Corpus,
    conspiracy: &BTreeSet<String>,
    candidates: &BTreeSet<String>,
    n: usize,
    constraints: &ControlConstraints,
    rng_seed: u64,
) -> Result<BTreeSet<String>, CohortError> {
    let bucket = constraints.creation_bucket;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);

    let mut profiled: Vec<&String> = conspiracy
        .iter()
        .filter(|u| c.users.contains_key(*u))
        .collect();
    if profiled.len() < n {
        return Err(CohortError::CohortTooSmall {
            requested: n,
            available: profiled.len(),
        });
    }
    profiled.shuffle(&mut rng);
    let mut need: BTreeMap<i64, usize> = BTreeMap::new();
    for u in &profiled[..n] {
        *need
            .entry(bucket.index(c.users[*u].created_at))
            .or_default() += 1;
    }

    let eligible = eligible_controls(c, conspiracy, candidates, constraints);
    if eligible.len() < n {
        return Err(CohortError::InsufficientCandidates {
            requested: n,
            available: eligible.len(),
        });
    }
    let mut pools: BTreeMap<i64, Vec<&String>> = BTreeMap::new();
    for u in &eligible {
        pools
            .entry(bucket.index(c.users[u].created_at))
            .or_default()
            .push(u);
    }
    for pool in pools.values_mut() {
        pool.shuffle(&mut rng);
    }

    let mut chosen = BTreeSet::new();
    let mut shortfalls: Vec<(i64, usize)> = Vec::new();
    for (&b, &k) in &need {
        let pool = pools.entry(b).or_default();
        let take = k.min(pool.len());
        chosen.extend(pool.drain(..take).cloned());
        if take < k {
            if !constraints.allow_overflow {
                return Err(CohortError::BucketShortfall {
                    bucket: bucket.label(b),
                    needed: k,
                    available: take,
                    shortfall: k - take,
                });
            }
            shortfalls.push((b, k - take));
        }
    }
    for (b, mut missing) in shortfalls {
        log::warn!(
            "creation bucket {} short by {missing}; borrowing from neighbours",
            bucket.label(b)
        );
        while missing > 0 {
            // nearest bucket with spare candidates; earlier bucket wins ties
            let donor = pools
                .iter()
                .filter(|(_, p)| !p.is_empty())
                .min_by_key(|(&d, _)| ((d - b).abs(), d))
                .map(|(&d, _)| d)
                .expect("eligible count checked above");
            let u = pools.get_mut(&donor).unwrap().pop().unwrap();
            chosen.insert(u.clone());
            missing -= 1;
        }
    }
    Ok(chosen)
}

/// Serialized cohort artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortFile {
    pub label: String,
    pub user_ids: Vec<String>,
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub rng_seed: u64,
}

impl CohortFile {
    pub fn members(&self) -> BTreeSet<String> {
        self.user_ids.iter().cloned().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Follow, Like, UserRecord};

    fn likes(pairs: &[(&str, &str, usize)]) -> Vec<Like> {
        let mut out = Vec::new();
        for &(u, s, n) in pairs {
            for k in 0..n {
                out.push(Like {
                    user_id: u.into(),
                    seed_id: s.into(),
                    liked_tweet_id: format!("{s}-{k}"),
                });
            }
        }
        out
    }

    fn corpus(likes: Vec<Like>, follows: Vec<(&str, &str)>) -> Corpus {
        Corpus::from_records(
            vec![],
            vec![],
            likes,
            follows
                .into_iter()
                .map(|(a, b)| Follow {
                    follower_id: a.into(),
                    followee_id: b.into(),
                })
                .collect(),
            vec!["A".into(), "B".into()],
        )
    }

    #[test]
    fn like_matrix_counts() {
        let c = corpus(likes(&[("u", "A", 2), ("u", "X", 5)]), vec![]);
        let m = build_like_matrix(&c).unwrap();
        assert_eq!(m.cell("u", "A"), 2);
        assert_eq!(m.rows.len(), 1);
        assert_eq!(m.rows[0].total(), 2);
        let c = corpus(
            likes(&[
                ("u1", "A", 3),
                ("u1", "B", 1),
                ("u2", "B", 4),
                ("u3", "A", 1),
            ]),
            vec![],
        );
        let m = build_like_matrix(&c).unwrap();
        let totals: Vec<u64> = m.rows.iter().map(LikeRow::total).collect();
        assert_eq!(totals, [4, 4, 1]);
        let mut empty = c.clone();
        empty.seeds.clear();
        assert_eq!(build_like_matrix(&empty), Err(CohortError::NoSeeds));
    }

    #[test]
    fn follow_filter() {
        let c = corpus(
            likes(&[("u1", "A", 3), ("u2", "B", 1)]),
            vec![("u2", "B"), ("u1", "Z")],
        );
        let m = filter_follows_seed(build_like_matrix(&c).unwrap(), &c);
        assert_eq!(m.user_ids(), BTreeSet::from(["u2".to_string()]));
    }

    #[test]
    fn cov_on_the_threshold_is_kept() {
        // [1, 3]: mean 2, population sd 1
        assert_eq!(row(&[1, 3, 0]).rows[0].cov(), 0.5);
        assert_eq!(filter_cov(row(&[1, 3, 0]), 0.5).len(), 1);
        let want = crate::statkit::coefficient_of_variation(&[1.0, 1.0, 10.0]).unwrap();
        assert!((row(&[1, 1, 10]).rows[0].cov() - want).abs() < 1e-15);
    }

    fn row(counts: &[u32]) -> LikeMatrix {
        LikeMatrix {
            seeds: (0..counts.len()).map(|i| format!("s{i}")).collect(),
            rows: vec![LikeRow {
                user_id: "u".into(),
                counts: counts.to_vec(),
            }],
        }
    }

    #[test]
    fn cov_filter() {
        assert_eq!(filter_cov(row(&[5, 5, 5, 0, 0]), 1.0).len(), 1);
        assert_eq!(filter_cov(row(&[1, 1, 10, 0]), 1.0).len(), 0);
        assert_eq!(filter_cov(row(&[40, 0, 0]), 1.0).len(), 1);
    }

    #[test]
    fn grid_single_row() {
        let m = row(&[25, 5, 3, 2]);
        let g = threshold_grid(&m, &default_l_axis(), &default_s_axis()).unwrap();
        for (i, &l) in g.l_axis.iter().enumerate() {
            for (j, &s) in g.s_axis.iter().enumerate() {
                assert_eq!(g.counts[i][j], u64::from(l <= 35 && s <= 4), "l={l} s={s}");
            }
        }
        let empty = LikeMatrix {
            seeds: vec!["a".into()],
            rows: vec![],
        };
        let g = threshold_grid(&empty, &default_l_axis(), &default_s_axis()).unwrap();
        assert!(g.counts.iter().flatten().all(|&c| c == 0));
        assert!(threshold_grid(&empty, &[5, 1], &[1]).is_err());
    }

    /// Published like-threshold grid (rows l>=1,5,...,35; columns s>=1..7).
    pub(crate) fn published_grid() -> GridTable {
        GridTable {
            l_axis: default_l_axis(),
            s_axis: default_s_axis(),
            counts: vec![
                vec![345_936, 132_828, 55_064, 19_966, 7618, 2462, 790],
                vec![147_108, 95_526, 49_535, 19_630, 7618, 2462, 790],
                vec![88_628, 61_635, 34_542, 15_817, 6932, 2366, 779],
                vec![61_778, 44_206, 25_228, 12_118, 5809, 2095, 726],
                vec![46_220, 33_507, 19_265, 9413, 4807, 1812, 648],
                vec![36_055, 26_342, 15_169, 7394, 3928, 1517, 557],
                vec![29_577, 21_870, 12_746, 6370, 3438, 1354, 504],
                vec![24_597, 18_308, 10_810, 5474, 3000, 1187, 447],
            ],
        }
    }

    #[test]
    fn published_grid_cell_and_selection_rules() {
        let g = published_grid();
        assert!(g.is_monotone());
        assert_eq!(g.get(25, 4), Some(7394));
        // plain closest-to-target picks 9413
        assert_eq!(auto_thresholds(&g, 10_000).unwrap(), (20, 4));
        let rule = ThresholdRule {
            target: 10_000,
            at_or_below: true,
            min_likes: Some(25),
            min_sources: Some(4),
        };
        assert_eq!(auto_thresholds_with(&g, &rule).unwrap(), (25, 4));
        assert_eq!(auto_thresholds(&g, 7394).unwrap(), (25, 4));
    }

    #[test]
    fn auto_threshold_tie_prefers_more_sources() {
        let g = GridTable {
            l_axis: vec![1, 5],
            s_axis: vec![1, 2],
            counts: vec![vec![12, 8], vec![5, 2]],
        };
        // |12-10| = |8-10| = 2: the s=2 cell wins
        assert_eq!(auto_thresholds(&g, 10).unwrap(), (1, 2));
        let g = GridTable {
            l_axis: vec![1, 5],
            s_axis: vec![1],
            counts: vec![vec![12], vec![8]],
        };
        assert_eq!(auto_thresholds(&g, 10).unwrap(), (5, 1));
    }

    #[test]
    fn select_all_with_unit_thresholds() {
        let c = corpus(likes(&[("u1", "A", 1), ("u2", "B", 1)]), vec![]);
        let m = build_like_matrix(&c).unwrap();
        assert_eq!(select_cohort(&m, 1, 1).unwrap(), m.user_ids());
        assert_eq!(select_cohort(&m, 0, 1), Err(CohortError::BadThreshold));
    }

    fn tweet(id: &str, author: &str, tags: &[&str]) -> crate::corpus::TweetRecord {
        crate::corpus::TweetRecord {
            tweet_id: id.into(),
            author_id: author.into(),
            created_at: "2022-01-01T00:00:00Z".parse().unwrap(),
            kind: crate::corpus::TweetKind::Original,
            text: String::new(),
            hashtags: tags.iter().map(|s| s.to_string()).collect(),
            urls: vec![],
            mentions: vec![],
            retweeted_author: None,
            lang: Some("en".into()),
        }
    }

    #[test]
    fn hashtag_ranking() {
        let tweets = vec![
            tweet("1", "u", &["a", "b"]),
            tweet("2", "u", &["a"]),
            tweet("3", "v", &["a", "c"]),
            tweet("4", "w", &["z", "z", "z"]),
        ];
        let c = Corpus::from_records(vec![], tweets, vec![], vec![], vec![]);
        let cohort: BTreeSet<String> = ["u", "v"].iter().map(|s| s.to_string()).collect();
        assert_eq!(
            top_hashtags(&c, &cohort, 10),
            vec![
                ("a".to_string(), 3),
                ("b".to_string(), 1),
                ("c".to_string(), 1)
            ]
        );
        assert_eq!(top_hashtags(&c, &cohort, 1).len(), 1);
    }

    fn user(id: &str, created: &str, lang: &str) -> UserRecord {
        UserRecord {
            user_id: id.into(),
            created_at: created.parse().unwrap(),
            followers_count: 1,
            following_count: 1,
            tweet_count: 1,
            listed_count: 0,
            verified: false,
            has_default_pic: false,
            bio: None,
            predominant_language: Some(lang.into()),
            snapshot_at: "2022-06-13T00:00:00Z".parse().unwrap(),
        }
    }

    #[test]
    fn control_exclusions() {
        let users = vec![
            user("c1", "2019-02-01T00:00:00Z", "en"),
            user("liker", "2019-02-01T00:00:00Z", "en"),
            user("spanish", "2019-02-01T00:00:00Z", "es"),
            user("follower", "2019-02-01T00:00:00Z", "en"),
            user("ok", "2019-02-01T00:00:00Z", "en"),
        ];
        let c = Corpus::from_records(
            users,
            vec![],
            likes(&[("liker", "A", 1)]),
            vec![Follow {
                follower_id: "follower".into(),
                followee_id: "B".into(),
            }],
            vec!["A".into(), "B".into()],
        );
        let consp = BTreeSet::from(["c1".to_string()]);
        let cands: BTreeSet<String> = ["liker", "spanish", "follower", "ok"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let cons = ControlConstraints::new("en");
        assert_eq!(
            eligible_controls(&c, &consp, &cands, &cons),
            BTreeSet::from(["ok".to_string()])
        );
        assert_eq!(
            build_control(&c, &consp, &cands, 1, &cons, 7).unwrap(),
            BTreeSet::from(["ok".to_string()])
        );
    }

    #[test]
    fn control_histogram_matches_and_shortfall_errors() {
        let mut users = Vec::new();
        let quarters = ["2018-01-15", "2018-05-15", "2018-08-15", "2019-11-15"];
        let mut consp = BTreeSet::new();
        let mut cands = BTreeSet::new();
        for i in 0..20 {
            let q = quarters[i % 4];
            let id = format!("c{i:02}");
            users.push(user(&id, &format!("{q}T00:00:00Z"), "en"));
            consp.insert(id);
            let id = format!("r{i:02}");
            users.push(user(&id, &format!("{q}T12:00:00Z"), "en"));
            cands.insert(id);
        }
        let c = Corpus::from_records(users, vec![], vec![], vec![], vec!["A".into()]);
        let cons = ControlConstraints::new("en");
        let ctl = build_control(&c, &consp, &cands, 5, &cons, 3).unwrap();
        assert_eq!(ctl.len(), 5);

        // replay the sample to get the matched conspiracy histogram
        let b = CreationBucket::Quarter;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut sample: Vec<&String> = consp.iter().collect();
        sample.shuffle(&mut rng);
        let hist = |ids: &mut dyn Iterator<Item = &String>| {
            let mut h: BTreeMap<i64, usize> = BTreeMap::new();
            for u in ids {
                *h.entry(b.index(c.users[u].created_at)).or_default() += 1;
            }
            h
        };
        assert_eq!(
            hist(&mut sample[..5].iter().copied()),
            hist(&mut ctl.iter())
        );

        // only 1 candidate in 2019Q4
        let thin: BTreeSet<String> = cands
            .iter()
            .filter(|u| !["r07", "r11", "r15", "r19"].contains(&u.as_str()))
            .cloned()
            .collect();
        let err = build_control(&c, &consp, &thin, 20, &cons, 3).unwrap_err();
        assert!(matches!(err, CohortError::InsufficientCandidates { .. }));
        let err = build_control(&c, &consp, &thin, 16, &cons, 3).unwrap_err();
        match err {
            CohortError::BucketShortfall {
                bucket, shortfall, ..
            } => {
                assert_eq!(bucket, "2019Q4");
                assert!(shortfall >= 1);
            }
            other => panic!("{other}"),
        }
        let mut relaxed = cons.clone();
        relaxed.allow_overflow = true;
        assert_eq!(
            build_control(&c, &consp, &thin, 16, &relaxed, 3)
                .unwrap()
                .len(),
            16
        );
    }

    #[test]
    fn bucket_labels() {
        let b = CreationBucket::Quarter;
        let t: DateTime<Utc> = "2021-11-30T00:00:00Z".parse().unwrap();
        assert_eq!(b.label(b.index(t)), "2021Q4");
    }
}
