//! Flow similarity, non-parse rate and latency percentiles.

use serde::Serialize;

use crate::dsl::{Flow, ParseError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("cannot aggregate an empty list of {0}")]
    Empty(&'static str),
    #[error("percentile must lie in (0, 100], got {0}")]
    PercentileOutOfRange(f64),
    #[error("latency samples must be finite and non-negative, got {0}")]
    InvalidSample(f64),
}

/// Similarity in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize)]
#[serde(transparent)]
pub struct SimilarityScore(f64);

impl SimilarityScore {
    pub const ZERO: SimilarityScore = SimilarityScore(0.0);
    pub const ONE: SimilarityScore = SimilarityScore(1.0);

    pub fn new(value: f64) -> Option<Self> {
        (0.0..=1.0).contains(&value).then_some(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Length of the longest common subsequence of `a` and `b`.
///
/// Elements of the subsequence need not be adjacent in either input.
/// O(|a|·|b|) time, O(min(|a|, |b|)) space.
pub fn lcss<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    const INLINE: usize = 32;
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    if short.is_empty() {
        return 0;
    }
    if short.len() < INLINE {
        lcss_rows(long, short, &mut [0; INLINE][..=short.len()])
    } else {
        lcss_rows(long, short, &mut vec![0; short.len() + 1])
    }
}

// row[j] = LCS of the processed prefix of `long` and short[..j]
fn lcss_rows<T: PartialEq>(long: &[T], short: &[T], row: &mut [usize]) -> usize {
    for x in long {
        let mut diagonal = 0;
        let mut left = 0;
        for (cell, y) in row[1..].iter_mut().zip(short) {
            let above = *cell;
            left = if x == y { diagonal + 1 } else { above.max(left) };
            *cell = left;
            diagonal = above;
        }
    }
    row[short.len()]
}

/// LCS length divided by the longer sequence's length. Two empty
/// sequences are identical and score 1.
pub fn sequence_similarity<T: PartialEq>(a: &[T], b: &[T]) -> SimilarityScore {
    let longest = a.len().max(b.len());
    if longest == 0 {
        return SimilarityScore::ONE;
    }
    SimilarityScore(lcss(a, b) as f64 / longest as f64)
}

/// Similarity of two compiled flows over their `actions + trigger` sequences.
pub fn flow_similarity(a: &Flow, b: &Flow) -> SimilarityScore {
    sequence_similarity(&a.action_sequence(), &b.action_sequence())
}

/// Result of pushing one completion through the harm gate and compiler.
#[derive(Debug, Clone, PartialEq)]
pub enum ParseOutcome {
    Parsed(Flow),
    NonParsed(ParseError),
    /// The model emitted the harm flag, which never parses.
    HarmFlagged,
}

impl ParseOutcome {
    pub fn is_parsed(&self) -> bool {
        matches!(self, ParseOutcome::Parsed(_))
    }
}

/// Counts behind a non-parse percentage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ParseStats {
    pub total: usize,
    pub non_parsed: usize,
}

impl ParseStats {
    pub fn from_outcomes(outcomes: &[ParseOutcome]) -> Self {
        Self {
            total: outcomes.len(),
            non_parsed: outcomes.iter().filter(|o| !o.is_parsed()).count(),
        }
    }

    pub fn non_parse_rate(&self) -> Result<f64, MetricsError> {
        if self.total == 0 {
            return Err(MetricsError::Empty("parse outcomes"));
        }
        Ok(self.non_parsed as f64 * 100.0 / self.total as f64)
    }

    /// `100 - non_parse_rate`, so the two always sum to exactly 100.
    pub fn parse_rate(&self) -> Result<f64, MetricsError> {
        Ok(100.0 - self.non_parse_rate()?)
    }
}

/// Percentage of outcomes that did not yield a flow. Harm-flagged
/// completions count as non-parsed.
pub fn non_parse_rate(outcomes: &[ParseOutcome]) -> Result<f64, MetricsError> {
    ParseStats::from_outcomes(outcomes).non_parse_rate()
}

pub fn parse_rate(outcomes: &[ParseOutcome]) -> Result<f64, MetricsError> {
    ParseStats::from_outcomes(outcomes).parse_rate()
}

/// Arithmetic mean. Callers pass zero for every non-parsed or harm-flagged
/// record so those records pull the mean down rather than dropping out.
pub fn mean_similarity(scores: &[SimilarityScore]) -> Result<f64, MetricsError> {
    if scores.is_empty() {
        return Err(MetricsError::Empty("similarity scores"));
    }
    Ok(scores.iter().map(|s| s.value()).sum::<f64>() / scores.len() as f64)
}

/// Nearest-rank percentile: the element at index `ceil(p/100 · n) - 1` of
/// the ascending sort.
pub fn percentile(samples: &[f64], p: f64) -> Result<f64, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::Empty("latency samples"));
    }
    if !(p > 0.0 && p <= 100.0) {
        return Err(MetricsError::PercentileOutOfRange(p));
    }
    if let Some(&bad) = samples.iter().find(|s| !s.is_finite() || **s < 0.0) {
        return Err(MetricsError::InvalidSample(bad));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let rank = (p * n as f64 / 100.0).ceil() as usize;
    Ok(sorted[rank.clamp(1, n) - 1])
}

/// P10, P50 and P90 as reported in latency tables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatencyPercentiles {
    pub p10: f64,
    pub p50: f64,
    pub p90: f64,
}

impl LatencyPercentiles {
    pub fn from_samples(samples: &[f64]) -> Result<Self, MetricsError> {
        Ok(Self {
            p10: percentile(samples, 10.0)?,
            p50: percentile(samples, 50.0)?,
            p90: percentile(samples, 90.0)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::Catalog;
    use crate::dsl::{compile_source, ParseErrorKind};
    use proptest::prelude::*;

    /// Longest common subsequence by enumerating every subsequence of `a`.
    fn brute_force_lcs(a: &[u8], b: &[u8]) -> usize {
        fn is_subsequence(needle: &[u8], hay: &[u8]) -> bool {
            let mut it = hay.iter();
            needle.iter().all(|x| it.any(|y| y == x))
        }
        (0u32..1 << a.len())
            .filter_map(|mask| {
                let sub: Vec<u8> = (0..a.len())
                    .filter(|i| mask & (1 << i) != 0)
                    .map(|i| a[i])
                    .collect();
                is_subsequence(&sub, b).then_some(sub.len())
            })
            .max()
            .unwrap_or(0)
    }

    #[test]
    fn lcss_examples() {
        assert_eq!(lcss(&["x", "y", "z"], &["x", "y", "z"]), 3);
        assert_eq!(lcss::<&str>(&["x", "y", "z"], &[]), 0);
        assert_eq!(brute_force_lcs(b"abct", b"act"), 3);
        assert_eq!(lcss(&["a", "b", "c", "t"], &["a", "c", "t"]), 3);
    }

    #[test]
    fn similarity_examples() {
        let a = ["a", "b", "c", "t"];
        let b = ["a", "c", "t"];
        let oracle = brute_force_lcs(b"abct", b"act") as f64 / 4.0;
        assert_eq!(oracle, 0.75);
        assert_eq!(sequence_similarity(&a, &b).value(), oracle);
        assert_eq!(sequence_similarity(&a, &a).value(), 1.0);
        assert_eq!(sequence_similarity(&["p", "q"], &["r"]).value(), 0.0);
    }

    #[test]
    fn flow_similarity_of_compiled_flows() {
        let catalog = Catalog::empty();
        let full = compile_source(
            "t = commonTrigger.Recurrence({}); w = shared_msnweather.TodaysForecast({}); m = shared_flowpush.SendEmailNotification({});",
            &catalog,
        )
        .unwrap();
        let shorter = compile_source(
            "t = commonTrigger.Recurrence({}); m = shared_flowpush.SendEmailNotification({});",
            &catalog,
        )
        .unwrap();
        assert_eq!(flow_similarity(&full, &full), SimilarityScore::ONE);
        assert_eq!(flow_similarity(&full, &shorter).value(), 2.0 / 3.0);
        assert_eq!(flow_similarity(&shorter, &full).value(), 2.0 / 3.0);
    }

    #[test]
    fn non_parse_rate_rows() {
        let err = ParseOutcome::NonParsed(ParseError::new(ParseErrorKind::Lexical, 0, "x"));
        let ok = ParseOutcome::Parsed(
            compile_source("t = commonTrigger.Recurrence({});", &Catalog::empty()).unwrap(),
        );
        let mut outcomes = vec![err.clone(); 38];
        outcomes.extend(std::iter::repeat_n(ok.clone(), 962));
        assert_eq!(non_parse_rate(&outcomes).unwrap(), 3.8);
        assert_eq!(non_parse_rate(&vec![ok; 1000]).unwrap(), 0.0);
        assert_eq!(
            non_parse_rate(&vec![ParseOutcome::HarmFlagged; 204]).unwrap(),
            100.0
        );
        assert_eq!(non_parse_rate(&[]), Err(MetricsError::Empty("parse outcomes")));
    }

    #[test]
    fn rates_sum_to_exactly_one_hundred() {
        for total in 1..=1500usize {
            for non_parsed in 0..=total {
                let stats = ParseStats { total, non_parsed };
                let sum = stats.non_parse_rate().unwrap() + stats.parse_rate().unwrap();
                assert_eq!(sum, 100.0, "{non_parsed}/{total}");
            }
        }
    }

    #[test]
    fn mean_similarity_examples() {
        let s = |v| SimilarityScore::new(v).unwrap();
        assert_eq!(mean_similarity(&[s(1.0), s(0.5), s(0.0)]).unwrap(), 0.5);
        assert_eq!(mean_similarity(&vec![SimilarityScore::ZERO; 204]).unwrap(), 0.0);
        assert!(mean_similarity(&[]).is_err());

        let parsed = [1.0, 0.75, 0.5, 1.0, 2.0 / 3.0, 1.0, 0.25, 0.8];
        let mut scores: Vec<_> = parsed.iter().map(|&v| s(v)).collect();
        scores.insert(3, SimilarityScore::ZERO);
        scores.push(SimilarityScore::ZERO);
        let hand_sum = 1.0 + 0.75 + 0.5 + 1.0 + 2.0 / 3.0 + 1.0 + 0.25 + 0.8;
        let mean = mean_similarity(&scores).unwrap();
        assert!((mean - hand_sum / 10.0).abs() < 1e-12);
    }

    #[test]
    fn percentile_examples() {
        assert_eq!(percentile(&[1.0], 10.0).unwrap(), 1.0);
        assert_eq!(percentile(&[1.0], 99.0).unwrap(), 1.0);
        let ten: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(percentile(&ten, 50.0).unwrap(), 5.0);
        assert_eq!(percentile(&ten, 90.0).unwrap(), 9.0);
        assert_eq!(percentile(&ten, 10.0).unwrap(), 1.0);
        assert_eq!(percentile(&ten, 100.0).unwrap(), 10.0);
        assert!(percentile(&[], 50.0).is_err());
        assert!(percentile(&ten, 0.0).is_err());
        assert!(percentile(&[-1.0], 50.0).is_err());
    }

    proptest! {
        #[test]
        fn lcss_matches_brute_force(a in prop::collection::vec(0u8..4, 0..9), b in prop::collection::vec(0u8..4, 0..9)) {
            let expected = brute_force_lcs(&a, &b);
            prop_assert_eq!(lcss(&a, &b), expected);
            prop_assert_eq!(lcss(&b, &a), expected);
            prop_assert!(expected <= a.len().min(b.len()));
            prop_assert_eq!(lcss(&a, &a), a.len());
        }

        #[test]
        fn similarity_bounds_and_identity(a in prop::collection::vec(0u8..6, 1..12), b in prop::collection::vec(0u8..6, 1..12)) {
            let s = sequence_similarity(&a, &b).value();
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert_eq!(s == 1.0, a == b);
            prop_assert_eq!(s, sequence_similarity(&b, &a).value());
        }

        #[test]
        fn similarity_invariant_under_renaming(a in prop::collection::vec(0u8..6, 1..12), b in prop::collection::vec(0u8..6, 1..12), shift in 1u8..6) {
            let rename = |v: &Vec<u8>| v.iter().map(|x| (x + shift) % 6 + 10).collect::<Vec<_>>();
            prop_assert_eq!(sequence_similarity(&a, &b), sequence_similarity(&rename(&a), &rename(&b)));
        }

        #[test]
        fn percentile_monotone_and_bounded(samples in prop::collection::vec(0.0f64..100.0, 1..50), p in 1.0f64..100.0, q in 1.0f64..100.0) {
            let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
            let a = percentile(&samples, lo).unwrap();
            let b = percentile(&samples, hi).unwrap();
            prop_assert!(a <= b);
            let min = samples.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(min <= a && b <= max);
        }
    }
}
