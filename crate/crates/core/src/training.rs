//! Margin-ranking SGD with corrupted-triple negatives.
//!
//! Each positive `(h, l, t)` is paired with one negative obtained by replacing
//! either its head or its tail by a uniformly drawn different entity. The pair
//! contributes `[gamma + d(h + l, t) - d(h' + l, t')]_+` and a violated pair
//! moves the involved rows along the negative subgradient, after which the
//! touched entity rows are projected back onto the unit sphere.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::evaluation::{evaluate, Scorer};
use crate::kb::{EntityId, KnowledgeBase, RelationId, Triple};
use crate::model::{DissimilarityKind, EmbeddingModel};

const SGD_STREAM: u64 = 1;
const VALID_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    /// Embedding dimension.
    pub k: usize,
    /// Margin of the hinge.
    pub gamma: f64,
    /// Constant learning rate.
    pub eta: f64,
    pub max_epochs: usize,
    /// Epochs between validation evaluations. The last epoch is always evaluated.
    pub eval_every: usize,
    pub seed: u64,
    pub dissim: DissimilarityKind,
    /// Rank only this many (seeded) validation triples during model selection.
    pub valid_sample: Option<usize>,
}

impl Default for Hyperparams {
    /// The Freebase settings: k = 50, margin 1, learning rate 0.01, L1, 1000 epochs.
    fn default() -> Self {
        Hyperparams {
            k: 50,
            gamma: 1.0,
            eta: 0.01,
            max_epochs: 1000,
            eval_every: 25,
            seed: 42,
            dissim: DissimilarityKind::L1,
            valid_sample: Some(1000),
        }
    }
}

impl Hyperparams {
    /// The WordNet settings: k = 20, margin 2, otherwise as [`Default`].
    pub fn wordnet() -> Self {
        Hyperparams {
            k: 20,
            gamma: 2.0,
            ..Hyperparams::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: alloc::string::String| Err(Error::InvalidArgument(msg));
        if self.k == 0 {
            return fail("k must be positive".into());
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return fail(format!(
                "margin must be positive and finite, got {}",
                self.gamma
            ));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return fail(format!(
                "learning rate must be positive and finite, got {}",
                self.eta
            ));
        }
        if self.max_epochs == 0 {
            return fail("max_epochs must be at least 1".into());
        }
        if self.eval_every == 0 || self.eval_every > self.max_epochs {
            return fail(format!(
                "eval_every must be in 1..={}, got {}",
                self.max_epochs, self.eval_every
            ));
        }
        if self.valid_sample == Some(0) {
            return fail("valid_sample must be positive".into());
        }
        Ok(())
    }
}

/// Replaces the head (probability 1/2) or the tail of `pos` by a uniformly
/// drawn entity different from the one it replaces.
pub fn sample_negative<R: Rng + ?Sized>(
    pos: &Triple,
    num_entities: usize,
    rng: &mut R,
) -> Result<Triple> {
    if num_entities < 2 {
        return Err(Error::invalid(format!(
            "corrupting a triple needs at least 2 entities, have {num_entities}"
        )));
    }
    let corrupt_head = rng.random::<bool>();
    let original = if corrupt_head { pos.head } else { pos.tail };
    let mut drawn = rng.random_range(0..num_entities as u32 - 1);
    if drawn >= original.0 {
        drawn += 1;
    }
    let mut neg = *pos;
    if corrupt_head {
        neg.head = EntityId(drawn);
    } else {
        neg.tail = EntityId(drawn);
    }
    Ok(neg)
}

/// `max(0, gamma + d(pos) - d(neg))`.
pub fn hinge_loss(model: &EmbeddingModel, pos: &Triple, neg: &Triple, gamma: f64) -> Result<f64> {
    let d_pos = model.dissimilarity(pos)?.value();
    let d_neg = model.dissimilarity(neg)?.value();
    Ok((gamma + d_pos - d_neg).max(0.0))
}

/// Subgradient of the hinge with respect to every row it touches.
#[derive(Debug, Clone, PartialEq)]
pub struct HingeGradient {
    pub loss: f64,
    /// One entry per distinct entity, in order of first use (h, t, h', t').
    pub entities: Vec<(EntityId, Vec<f64>)>,
    pub relation: (RelationId, Vec<f64>),
}

/// Subgradient of `d(h + l, t)` with respect to `x = h + l - t`, written into `out`.
fn distance_subgradient(kind: DissimilarityKind, h: &[f64], l: &[f64], t: &[f64], out: &mut [f64]) {
    for (((o, h), l), t) in out.iter_mut().zip(h).zip(l).zip(t) {
        *o = h + l - t;
    }
    match kind {
        DissimilarityKind::L1 => out.iter_mut().for_each(|x| *x = sign(*x)),
        DissimilarityKind::L2 => {
            let norm = libm::sqrt(out.iter().map(|x| x * x).sum());
            if norm > 0.0 {
                out.iter_mut().for_each(|x| *x /= norm);
            } else {
                out.iter_mut().for_each(|x| *x = 0.0);
            }
        }
        DissimilarityKind::L2Squared => out.iter_mut().for_each(|x| *x *= 2.0),
    }
}

/// `sign(0) = 0`.
#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `(loss, d dist(pos) / d x, d dist(neg) / d x)` for `x = h + l - t`.
type PairGradients = (f64, Vec<f64>, Vec<f64>);

/// Per-dissimilarity gradients `(dpos, dneg)` of the pair, or `None` when the
/// margin is satisfied.
fn pair_subgradients(
    model: &EmbeddingModel,
    pos: &Triple,
    neg: &Triple,
    gamma: f64,
) -> Result<Option<PairGradients>> {
    let loss = hinge_loss(model, pos, neg, gamma)?;
    if loss <= 0.0 {
        return Ok(None);
    }
    let k = model.k();
    let mut g_pos = vec![0.0; k];
    let mut g_neg = vec![0.0; k];
    let kind = model.dissim();
    distance_subgradient(
        kind,
        model.entity(pos.head),
        model.relation(pos.label),
        model.entity(pos.tail),
        &mut g_pos,
    );
    distance_subgradient(
        kind,
        model.entity(neg.head),
        model.relation(neg.label),
        model.entity(neg.tail),
        &mut g_neg,
    );
    Ok(Some((loss, g_pos, g_neg)))
}

/// Analytic subgradient of [`hinge_loss`], or `None` when the loss is zero.
///
/// `pos` and `neg` must share their label.
pub fn hinge_gradient(
    model: &EmbeddingModel,
    pos: &Triple,
    neg: &Triple,
    gamma: f64,
) -> Result<Option<HingeGradient>> {
    if pos.label != neg.label {
        return Err(Error::invalid("positive and negative must share the label"));
    }
    let Some((loss, g_pos, g_neg)) = pair_subgradients(model, pos, neg, gamma)? else {
        return Ok(None);
    };
    let k = model.k();
    let mut entities: Vec<(EntityId, Vec<f64>)> = Vec::with_capacity(4);
    let mut add = |id: EntityId, g: &[f64], scale: f64| {
        let slot = match entities.iter().position(|(e, _)| *e == id) {
            Some(i) => i,
            None => {
                entities.push((id, vec![0.0; k]));
                entities.len() - 1
            }
        };
        for (acc, v) in entities[slot].1.iter_mut().zip(g) {
            *acc += scale * v;
        }
    };
    add(pos.head, &g_pos, 1.0);
    add(pos.tail, &g_pos, -1.0);
    add(neg.head, &g_neg, -1.0);
    add(neg.tail, &g_neg, 1.0);
    let relation: Vec<f64> = g_pos.iter().zip(&g_neg).map(|(p, n)| p - n).collect();
    Ok(Some(HingeGradient {
        loss,
        entities,
        relation: (pos.label, relation),
    }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub loss: f64,
    pub violated: bool,
    /// Zero-norm rows replaced during projection.
    pub repaired: usize,
}

/// One SGD update on a `(pos, neg)` pair.
///
/// A satisfied margin leaves the model untouched. Otherwise the rows of the
/// entities and the label involved move by `-eta` times the subgradient and
/// the touched entity rows are renormalized.
pub fn sgd_step(
    model: &mut EmbeddingModel,
    pos: &Triple,
    neg: &Triple,
    gamma: f64,
    eta: f64,
) -> Result<StepReport> {
    if pos.label != neg.label {
        return Err(Error::invalid("positive and negative must share the label"));
    }
    let Some((loss, g_pos, g_neg)) = pair_subgradients(model, pos, neg, gamma)? else {
        return Ok(StepReport {
            loss: 0.0,
            violated: false,
            repaired: 0,
        });
    };
    let axpy = |row: &mut [f64], g: &[f64], scale: f64| {
        row.iter_mut().zip(g).for_each(|(r, v)| *r += scale * v);
    };
    axpy(model.entity_mut(pos.head), &g_pos, -eta);
    axpy(model.entity_mut(pos.tail), &g_pos, eta);
    axpy(model.entity_mut(neg.head), &g_neg, eta);
    axpy(model.entity_mut(neg.tail), &g_neg, -eta);
    model
        .relation_mut(pos.label)
        .iter_mut()
        .zip(g_pos.iter().zip(&g_neg))
        .for_each(|(r, (p, n))| *r -= eta * (p - n));
    let repaired = model.project_entities(&[pos.head, pos.tail, neg.head, neg.tail]);
    Ok(StepReport {
        loss,
        violated: true,
        repaired,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub mean_loss: f64,
    pub visited: usize,
    pub violations: usize,
    pub repaired: usize,
}

/// Visits every training triple once in a fresh shuffle, one negative each.
pub fn train_epoch<R: Rng + ?Sized>(
    model: &mut EmbeddingModel,
    train: &[Triple],
    hp: &Hyperparams,
    rng: &mut R,
) -> Result<EpochStats> {
    if train.is_empty() {
        return Err(Error::invalid("training split is empty"));
    }
    let mut order: Vec<usize> = (0..train.len()).collect();
    order.shuffle(rng);
    let num_entities = model.num_entities();
    let mut total = 0.0;
    let mut violations = 0;
    let mut repaired = 0;
    for &i in &order {
        let pos = &train[i];
        let neg = sample_negative(pos, num_entities, rng)?;
        let step = sgd_step(model, pos, &neg, hp.gamma, hp.eta)?;
        total += step.loss;
        violations += step.violated as usize;
        repaired += step.repaired;
    }
    Ok(EpochStats {
        mean_loss: total / train.len() as f64,
        visited: train.len(),
        violations,
        repaired,
    })
}

/// Mean rank of a frozen model on a triple list, used for model selection.
///
/// The sequential implementation is [`SequentialRanker`]; callers may supply a
/// parallel one.
pub trait ValidationRanker {
    fn mean_rank(&self, model: &EmbeddingModel, triples: &[Triple]) -> Result<f64>;
}

/// Combined (head and tail) mean rank with the translation scorer, one triple at a time.
#[derive(Debug, Clone, Copy, Default)]
pub struct SequentialRanker;

impl ValidationRanker for SequentialRanker {
    fn mean_rank(&self, model: &EmbeddingModel, triples: &[Triple]) -> Result<f64> {
        Ok(evaluate(model, triples, Scorer::Translation)?
            .combined
            .mean_rank)
    }
}

/// Receives one call per finished epoch and per validation evaluation.
pub trait ProgressSink {
    fn epoch(&mut self, epoch: usize, stats: &EpochStats);
    fn evaluation(&mut self, epoch: usize, valid_mean_rank: f64, best: bool);
}

/// Discards progress.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoProgress;

impl ProgressSink for NoProgress {
    fn epoch(&mut self, _: usize, _: &EpochStats) {}
    fn evaluation(&mut self, _: usize, _: f64, _: bool) {}
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean hinge loss of each epoch, index 0 = epoch 1.
    pub epoch_losses: Vec<f64>,
    /// `(epoch, validation mean rank)` in evaluation order.
    pub evaluations: Vec<(usize, f64)>,
    pub best_epoch: usize,
    pub best_valid_mean_rank: f64,
    pub triples_visited: usize,
    pub repaired_rows: usize,
}

/// Validation triples used for model selection: all of them, or a seeded
/// sample fixed for the whole run.
pub fn validation_subset(valid: &[Triple], sample: Option<usize>, seed: u64) -> Vec<Triple> {
    match sample {
        Some(n) if n < valid.len() => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(VALID_STREAM);
            let mut picked: Vec<Triple> = valid.to_vec();
            let (head, _) = picked.partial_shuffle(&mut rng, n);
            head.to_vec()
        }
        _ => valid.to_vec(),
    }
}

/// Trains from a seeded initialization for up to `max_epochs` epochs.
///
/// Every `eval_every` epochs, and after the last one, the validation mean rank
/// is computed; the model is snapshotted whenever it strictly improves. The
/// returned model is the best snapshot.
pub fn train<V, P>(
    kb: &KnowledgeBase,
    hp: &Hyperparams,
    ranker: &V,
    progress: &mut P,
) -> Result<(EmbeddingModel, TrainReport)>
where
    V: ValidationRanker + ?Sized,
    P: ProgressSink + ?Sized,
{
    hp.validate()?;
    if kb.valid().is_empty() {
        return Err(Error::EmptySplit(crate::kb::Split::Valid));
    }
    let mut model = init_model(kb, hp)?;
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    rng.set_stream(SGD_STREAM);
    let valid = validation_subset(kb.valid(), hp.valid_sample, hp.seed);

    let mut report = TrainReport {
        epoch_losses: Vec::with_capacity(hp.max_epochs),
        evaluations: Vec::new(),
        best_epoch: 0,
        best_valid_mean_rank: f64::INFINITY,
        triples_visited: 0,
        repaired_rows: 0,
    };
    let mut best: Option<EmbeddingModel> = None;

    for epoch in 1..=hp.max_epochs {
        let stats = train_epoch(&mut model, kb.train(), hp, &mut rng)?;
        report.epoch_losses.push(stats.mean_loss);
        report.triples_visited += stats.visited;
        report.repaired_rows += stats.repaired;
        progress.epoch(epoch, &stats);

        if epoch % hp.eval_every == 0 || epoch == hp.max_epochs {
            let rank = ranker.mean_rank(&model, &valid)?;
            let improved = best.is_none() || rank < report.best_valid_mean_rank;
            report.evaluations.push((epoch, rank));
            if improved {
                report.best_epoch = epoch;
                report.best_valid_mean_rank = rank;
                best = Some(model.clone());
            }
            progress.evaluation(epoch, rank, improved);
        }
    }
    // the last epoch is always evaluated, so a snapshot exists
    let best = best.unwrap_or(model);
    Ok((best, report))
}

/// The untrained model `train` starts from.
pub fn init_model(kb: &KnowledgeBase, hp: &Hyperparams) -> Result<EmbeddingModel> {
    EmbeddingModel::new(
        kb.num_entities(),
        kb.num_relations(),
        hp.k,
        hp.dissim,
        hp.seed,
    )
}
