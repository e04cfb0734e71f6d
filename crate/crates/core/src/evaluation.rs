//! Raw link-prediction ranking.
//!
//! For each test triple the head (then the tail) is replaced by every entity
//! in turn, the corrupted triples are scored, and the rank of the true entity
//! among them is recorded. Ranks are optimistic: `1 + #{strictly smaller}`.
//! Other true triples among the corruptions are not discounted.

use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::error::{Error, Result};
use crate::kb::{EntityId, RelationId, Triple};
use crate::model::{EmbeddingModel, TripleScore};

/// Which dissimilarity ranks the candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Scorer {
    /// `d(h + l, t)`.
    #[default]
    Translation,
    /// `d(h, t)`, the label-free baseline.
    Unstructured,
}

impl Scorer {
    #[inline]
    fn score_unchecked(self, model: &EmbeddingModel, t: &Triple) -> f64 {
        match self {
            Scorer::Translation => model.translated(t),
            Scorer::Unstructured => model.untranslated(t),
        }
    }

    pub fn score(self, model: &EmbeddingModel, triple: &Triple) -> Result<TripleScore> {
        match self {
            Scorer::Translation => model.dissimilarity(triple),
            Scorer::Unstructured => model.dissimilarity_unstructured(triple),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scorer::Translation => "translate",
            Scorer::Unstructured => "unstructured",
        }
    }
}

impl core::str::FromStr for Scorer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "translate" => Ok(Scorer::Translation),
            "unstructured" => Ok(Scorer::Unstructured),
            other => Err(Error::invalid(alloc::format!(
                "unknown scorer {other} (expected translate or unstructured)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CorruptSide {
    Head,
    Tail,
}

impl CorruptSide {
    fn replace(self, triple: &Triple, entity: EntityId) -> Triple {
        let mut t = *triple;
        match self {
            CorruptSide::Head => t.head = entity,
            CorruptSide::Tail => t.tail = entity,
        }
        t
    }
}

/// Rank of the true entity when `side` is replaced by every entity.
///
/// The true entity is among the candidates; ties with it do not count against it.
pub fn rank_entity(
    model: &EmbeddingModel,
    triple: &Triple,
    side: CorruptSide,
    scorer: Scorer,
) -> Result<usize> {
    model.check_triple(triple)?;
    Ok(rank_unchecked(model, triple, side, scorer))
}

fn rank_unchecked(
    model: &EmbeddingModel,
    triple: &Triple,
    side: CorruptSide,
    scorer: Scorer,
) -> usize {
    let truth = scorer.score_unchecked(model, triple);
    let better = (0..model.num_entities() as u32)
        .filter(|&e| scorer.score_unchecked(model, &side.replace(triple, EntityId(e))) < truth)
        .count();
    better + 1
}

/// `(head rank, tail rank)` of one triple.
pub fn triple_ranks(
    model: &EmbeddingModel,
    triple: &Triple,
    scorer: Scorer,
) -> Result<(usize, usize)> {
    model.check_triple(triple)?;
    Ok((
        rank_unchecked(model, triple, CorruptSide::Head, scorer),
        rank_unchecked(model, triple, CorruptSide::Tail, scorer),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MetricSide {
    Head,
    Tail,
    Combined,
}

impl MetricSide {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricSide::Head => "head",
            MetricSide::Tail => "tail",
            MetricSide::Combined => "combined",
        }
    }
}

/// Mean rank, median rank and the fraction of ranks at most 10.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankingMetrics {
    pub mean_rank: f64,
    /// Middle rank; the mean of the two middle ranks for an even count.
    pub median_rank: f64,
    pub hits_at_10: f64,
    pub count: usize,
    pub side: MetricSide,
}

impl RankingMetrics {
    pub fn from_ranks(ranks: &[usize], side: MetricSide) -> Result<Self> {
        if ranks.is_empty() {
            return Err(Error::invalid("cannot aggregate an empty rank list"));
        }
        if ranks.contains(&0) {
            return Err(Error::invalid("ranks start at 1"));
        }
        let n = ranks.len();
        // integer sum keeps the mean independent of summation order
        let sum: u64 = ranks.iter().map(|&r| r as u64).sum();
        let hits = ranks.iter().filter(|&&r| r <= 10).count();
        let mut sorted = ranks.to_vec();
        sorted.sort_unstable();
        let median = if n % 2 == 1 {
            sorted[n / 2] as f64
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0
        };
        Ok(RankingMetrics {
            mean_rank: sum as f64 / n as f64,
            median_rank: median,
            hits_at_10: hits as f64 / n as f64,
            count: n,
            side,
        })
    }
}

impl fmt::Display for RankingMetrics {
    /// `side=<side> mean=<float> median=<float> hits10=<percent> n=<int>`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "side={} mean={:.3} median={:.1} hits10={:.1} n={}",
            self.side.as_str(),
            self.mean_rank,
            self.median_rank,
            self.hits_at_10 * 100.0,
            self.count
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub head: RankingMetrics,
    pub tail: RankingMetrics,
    /// Pools both rank lists (two ranks per triple).
    pub combined: RankingMetrics,
}

impl Evaluation {
    /// Aggregates `(head rank, tail rank)` pairs.
    pub fn from_rank_pairs(pairs: &[(usize, usize)]) -> Result<Self> {
        let heads: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let tails: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let mut all = heads.clone();
        all.extend_from_slice(&tails);
        Ok(Evaluation {
            head: RankingMetrics::from_ranks(&heads, MetricSide::Head)?,
            tail: RankingMetrics::from_ranks(&tails, MetricSide::Tail)?,
            combined: RankingMetrics::from_ranks(&all, MetricSide::Combined)?,
        })
    }
}

impl fmt::Display for Evaluation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.head)?;
        writeln!(f, "{}", self.tail)?;
        writeln!(f, "{}", self.combined)
    }
}

/// Ranks every triple on both sides and aggregates head, tail and combined metrics.
pub fn evaluate(model: &EmbeddingModel, triples: &[Triple], scorer: Scorer) -> Result<Evaluation> {
    if triples.is_empty() {
        return Err(Error::invalid("no triples to evaluate"));
    }
    let pairs = triples
        .iter()
        .map(|t| triple_ranks(model, t, scorer))
        .collect::<Result<Vec<_>>>()?;
    Evaluation::from_rank_pairs(&pairs)
}

/// The `n` tails with the smallest score for `(head, label, ?)`, ascending,
/// ties broken by entity id. `n` is clamped to the number of entities.
pub fn predict_top_k(
    model: &EmbeddingModel,
    head: EntityId,
    label: RelationId,
    n: usize,
    scorer: Scorer,
) -> Result<Vec<(EntityId, TripleScore)>> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let probe = Triple {
        head,
        label,
        tail: head,
    };
    model.check_triple(&probe)?;
    let mut scored: Vec<(EntityId, TripleScore)> = (0..model.num_entities() as u32)
        .map(|e| {
            let t = CorruptSide::Tail.replace(&probe, EntityId(e));
            (EntityId(e), TripleScore(scorer.score_unchecked(model, &t)))
        })
        .collect();
    let by_score = |a: &(EntityId, TripleScore), b: &(EntityId, TripleScore)| -> Ordering {
        a.1 .0.total_cmp(&b.1 .0).then(a.0.cmp(&b.0))
    };
    let n = n.min(scored.len());
    if n < scored.len() {
        scored.select_nth_unstable_by(n - 1, by_score);
        scored.truncate(n);
    }
    scored.sort_unstable_by(by_score);
    Ok(scored)
}
