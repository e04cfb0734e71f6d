//! Embedding tables and triple dissimilarities.
//!
//! Entity rows are kept on the unit sphere by [`EmbeddingModel::project_entities`];
//! relation rows are never constrained.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kb::{check_bounds, EntityId, RelationId, Triple};

/// Rows whose norm falls below this are treated as zero by the projection.
const MIN_NORM: f64 = 1e-12;

/// The dissimilarity `d(h + l, t)` used to score a triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum DissimilarityKind {
    /// Sum of absolute coordinates.
    #[default]
    L1,
    /// Euclidean distance.
    L2,
    /// Squared Euclidean distance.
    L2Squared,
}

impl DissimilarityKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DissimilarityKind::L1 => "l1",
            DissimilarityKind::L2 => "l2",
            DissimilarityKind::L2Squared => "l2sq",
        }
    }

    /// `d(h + l, t)`; with `label == None` the translation is zero.
    #[inline]
    pub fn distance(self, head: &[f64], label: Option<&[f64]>, tail: &[f64]) -> f64 {
        match label {
            Some(label) => {
                let diff = head
                    .iter()
                    .zip(label)
                    .zip(tail)
                    .map(|((h, l), t)| h + l - t);
                self.reduce(diff)
            }
            None => self.reduce(head.iter().zip(tail).map(|(h, t)| h - t)),
        }
    }

    #[inline]
    fn reduce(self, diff: impl Iterator<Item = f64>) -> f64 {
        match self {
            DissimilarityKind::L1 => diff.map(f64::abs).sum(),
            DissimilarityKind::L2 => libm::sqrt(diff.map(|x| x * x).sum()),
            DissimilarityKind::L2Squared => diff.map(|x| x * x).sum(),
        }
    }
}

impl fmt::Display for DissimilarityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DissimilarityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1" => Ok(DissimilarityKind::L1),
            "l2" => Ok(DissimilarityKind::L2),
            "l2sq" => Ok(DissimilarityKind::L2Squared),
            other => Err(Error::invalid(format!(
                "unknown dissimilarity {other} (expected l1, l2 or l2sq)"
            ))),
        }
    }
}

/// A dissimilarity value; lower means more plausible.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct TripleScore(pub f64);

impl TripleScore {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Entity and relation embedding tables, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    k: usize,
    dissim: DissimilarityKind,
    entities: Vec<f64>,
    relations: Vec<f64>,
    /// Seed for replacement vectors when projection meets a zero row.
    repair_seed: u64,
    repairs: u64,
}

impl EmbeddingModel {
    /// Draws every coordinate uniformly from `[-6/sqrt(k), 6/sqrt(k)]`, then
    /// normalizes the entity rows. Deterministic for a fixed seed.
    pub fn new(
        num_entities: usize,
        num_relations: usize,
        k: usize,
        dissim: DissimilarityKind,
        seed: u64,
    ) -> Result<Self> {
        if num_entities == 0 || num_relations == 0 || k == 0 {
            return Err(Error::invalid(format!(
                "model needs at least one entity, relation and dimension \
                 (got entities={num_entities} relations={num_relations} k={k})"
            )));
        }
        let bound = 6.0 / libm::sqrt(k as f64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw =
            |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-bound..=bound)).collect() };
        let entities = draw(num_entities * k);
        let relations = draw(num_relations * k);
        let mut model = EmbeddingModel {
            k,
            dissim,
            entities,
            relations,
            repair_seed: seed ^ 0x9e37_79b9_7f4a_7c15,
            repairs: 0,
        };
        model.project_all();
        Ok(model)
    }

    /// Wraps existing tables without modifying them. Lengths must be
    /// multiples of `k` and every value finite.
    pub fn from_tables(
        k: usize,
        dissim: DissimilarityKind,
        entities: Vec<f64>,
        relations: Vec<f64>,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("k must be positive"));
        }
        for (what, table) in [("entity", &entities), ("relation", &relations)] {
            if table.len() % k != 0 {
                return Err(Error::invalid(format!(
                    "{what} table length {} is not a multiple of k={k}",
                    table.len()
                )));
            }
            if table.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!(
                    "{what} table has a non-finite value"
                )));
            }
        }
        let repair_seed = (entities.len() as u64).rotate_left(17) ^ relations.len() as u64;
        Ok(EmbeddingModel {
            k,
            dissim,
            entities,
            relations,
            repair_seed,
            repairs: 0,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dissim(&self) -> DissimilarityKind {
        self.dissim
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len() / self.k
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len() / self.k
    }

    #[inline]
    pub fn entity(&self, id: EntityId) -> &[f64] {
        let start = id.index() * self.k;
        &self.entities[start..start + self.k]
    }

    #[inline]
    pub fn entity_mut(&mut self, id: EntityId) -> &mut [f64] {
        let start = id.index() * self.k;
        &mut self.entities[start..start + self.k]
    }

    #[inline]
    pub fn relation(&self, id: RelationId) -> &[f64] {
        let start = id.index() * self.k;
        &self.relations[start..start + self.k]
    }

    #[inline]
    pub fn relation_mut(&mut self, id: RelationId) -> &mut [f64] {
        let start = id.index() * self.k;
        &mut self.relations[start..start + self.k]
    }

    pub fn entity_table(&self) -> &[f64] {
        &self.entities
    }

    pub fn relation_table(&self) -> &[f64] {
        &self.relations
    }

    pub fn check_triple(&self, triple: &Triple) -> Result<()> {
        check_bounds(triple, self.num_entities(), self.num_relations())
    }

    /// `d(h + l, t)` under the model's dissimilarity.
    pub fn dissimilarity(&self, triple: &Triple) -> Result<TripleScore> {
        self.check_triple(triple)?;
        Ok(TripleScore(self.translated(triple)))
    }

    /// `d(h, t)`: the label is ignored, as if every translation were zero.
    ///
    /// On unit-norm rows with [`DissimilarityKind::L2Squared`] this is
    /// `2 - 2 h·t`, so ranking by it is ranking by descending dot product.
    pub fn dissimilarity_unstructured(&self, triple: &Triple) -> Result<TripleScore> {
        self.check_triple(triple)?;
        Ok(TripleScore(self.untranslated(triple)))
    }

    #[inline]
    pub(crate) fn translated(&self, t: &Triple) -> f64 {
        self.dissim.distance(
            self.entity(t.head),
            Some(self.relation(t.label)),
            self.entity(t.tail),
        )
    }

    #[inline]
    pub(crate) fn untranslated(&self, t: &Triple) -> f64 {
        self.dissim
            .distance(self.entity(t.head), None, self.entity(t.tail))
    }

    /// Rescales the given entity rows to unit L2 norm. A row with (near) zero
    /// norm is replaced by a seeded random unit vector; the number of such
    /// replacements is returned.
    pub fn project_entities(&mut self, touched: &[EntityId]) -> usize {
        touched.iter().map(|&e| self.project_row(e.index())).sum()
    }

    /// [`project_entities`](Self::project_entities) over every row.
    pub fn project_all(&mut self) -> usize {
        (0..self.num_entities()).map(|i| self.project_row(i)).sum()
    }

    fn project_row(&mut self, index: usize) -> usize {
        let k = self.k;
        let row = &mut self.entities[index * k..(index + 1) * k];
        let norm = l2_norm(row);
        if norm > MIN_NORM && norm.is_finite() {
            if norm != 1.0 {
                row.iter_mut().for_each(|v| *v /= norm);
            }
            return 0;
        }
        let unit = unit_vector(k, self.repair_seed, self.repairs);
        self.repairs += 1;
        self.entities[index * k..(index + 1) * k].copy_from_slice(&unit);
        1
    }

    /// Largest `| ||e|| - 1 |` over all entity rows.
    pub fn max_entity_norm_error(&self) -> f64 {
        self.entities
            .chunks_exact(self.k)
            .map(|row| (l2_norm(row) - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn l2_norm(row: &[f64]) -> f64 {
    libm::sqrt(row.iter().map(|v| v * v).sum())
}

fn unit_vector(k: usize, seed: u64, stream: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    loop {
        let mut v = vec![0.0; k];
        v.iter_mut().for_each(|x| *x = rng.random_range(-1.0..=1.0));
        let norm = l2_norm(&v);
        if norm > 1e-3 {
            v.iter_mut().for_each(|x| *x /= norm);
            return v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy(kind: DissimilarityKind, h: [f64; 2], l: [f64; 2], t: [f64; 2]) -> EmbeddingModel {
        let mut ents = h.to_vec();
        ents.extend_from_slice(&t);
        EmbeddingModel::from_tables(2, kind, ents, l.to_vec()).unwrap()
    }

    #[test]
    fn exact_translation_scores_zero() {
        let m = toy(DissimilarityKind::L1, [1.0, 0.0], [-1.0, 1.0], [0.0, 1.0]);
        assert_eq!(m.dissimilarity(&Triple::new(0, 0, 1)).unwrap().value(), 0.0);
    }

    #[test]
    fn l1_hand_value() {
        let m = toy(DissimilarityKind::L1, [1.0, 0.0], [0.0, 0.0], [0.0, 1.0]);
        assert_eq!(m.dissimilarity(&Triple::new(0, 0, 1)).unwrap().value(), 2.0);
        let m = toy(
            DissimilarityKind::L2Squared,
            [1.0, 0.0],
            [0.0, 0.0],
            [0.0, 1.0],
        );
        assert_eq!(m.dissimilarity(&Triple::new(0, 0, 1)).unwrap().value(), 2.0);
        let m = toy(DissimilarityKind::L2, [3.0, 0.0], [0.0, 0.0], [0.0, 4.0]);
        assert_eq!(m.dissimilarity(&Triple::new(0, 0, 1)).unwrap().value(), 5.0);
    }

    #[test]
    fn out_of_range_ids() {
        let m = EmbeddingModel::new(3, 2, 4, DissimilarityKind::L1, 1).unwrap();
        assert!(matches!(
            m.dissimilarity(&Triple::new(0, 2, 1)),
            Err(Error::IdOutOfRange {
                kind: "relation",
                ..
            })
        ));
        assert!(matches!(
            m.dissimilarity_unstructured(&Triple::new(3, 0, 1)),
            Err(Error::IdOutOfRange { kind: "entity", .. })
        ));
    }

    #[test]
    fn init_rejects_zero_sizes() {
        for (e, r, k) in [(0, 1, 1), (1, 0, 1), (1, 1, 0)] {
            assert!(EmbeddingModel::new(e, r, k, DissimilarityKind::L1, 0).is_err());
        }
    }

    #[test]
    fn init_is_deterministic_and_projected() {
        let a = EmbeddingModel::new(3, 2, 20, DissimilarityKind::L1, 7).unwrap();
        let b = EmbeddingModel::new(3, 2, 20, DissimilarityKind::L1, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.max_entity_norm_error() < 1e-6);
        let c = EmbeddingModel::new(3, 2, 20, DissimilarityKind::L1, 8).unwrap();
        assert_ne!(a.entity_table(), c.entity_table());
    }

    #[test]
    fn init_relation_entries_are_centered_and_bounded() {
        let k = 20;
        let m = EmbeddingModel::new(1, 5000, k, DissimilarityKind::L1, 3).unwrap();
        let bound = 6.0 / libm::sqrt(k as f64);
        let rel = m.relation_table();
        assert_eq!(rel.len(), 100_000);
        assert!(rel.iter().all(|v| v.abs() <= bound));
        let mean = rel.iter().sum::<f64>() / rel.len() as f64;
        assert!(mean.abs() < 0.01 * bound, "mean {mean}");
    }

    #[test]
    fn projection_examples() {
        let mut m = EmbeddingModel::from_tables(
            2,
            DissimilarityKind::L1,
            vec![3.0, 4.0, 0.6, 0.8, 0.0, 0.0],
            vec![0.0, 0.0],
        )
        .unwrap();
        let repaired = m.project_entities(&[EntityId(0), EntityId(1)]);
        assert_eq!(repaired, 0);
        assert!((m.entity(EntityId(0))[0] - 0.6).abs() < 1e-15);
        assert!((m.entity(EntityId(0))[1] - 0.8).abs() < 1e-15);
        assert!((m.entity(EntityId(1))[0] - 0.6).abs() < 1e-12);
        // untouched zero row stays zero
        assert_eq!(m.entity(EntityId(2)), &[0.0, 0.0]);

        assert_eq!(m.project_entities(&[EntityId(2)]), 1);
        assert!((l2_norm(m.entity(EntityId(2))) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_row_repair_is_deterministic() {
        let zero = |seed_rows: usize| {
            let mut m = EmbeddingModel::from_tables(
                3,
                DissimilarityKind::L2,
                vec![0.0; 3 * seed_rows],
                vec![1.0; 3],
            )
            .unwrap();
            m.project_all();
            m
        };
        let (a, b) = (zero(2), zero(2));
        assert_eq!(a.entity_table(), b.entity_table());
        // successive repairs differ
        assert_ne!(a.entity(EntityId(0)), a.entity(EntityId(1)));
    }

    #[test]
    fn unstructured_ignores_label() {
        let m = EmbeddingModel::new(4, 6, 5, DissimilarityKind::L1, 11).unwrap();
        let base = m.dissimilarity_unstructured(&Triple::new(1, 0, 2)).unwrap();
        for r in 1..6 {
            assert_eq!(
                m.dissimilarity_unstructured(&Triple::new(1, r, 2)).unwrap(),
                base
            );
        }
        for kind in [
            DissimilarityKind::L1,
            DissimilarityKind::L2,
            DissimilarityKind::L2Squared,
        ] {
            let mut m = m.clone();
            m.dissim = kind;
            assert_eq!(
                m.dissimilarity_unstructured(&Triple::new(3, 2, 3))
                    .unwrap()
                    .value(),
                0.0
            );
        }
    }

    #[test]
    fn unstructured_l2sq_is_two_minus_two_dot() {
        let m = EmbeddingModel::new(10, 1, 8, DissimilarityKind::L2Squared, 5).unwrap();
        for h in 0..10 {
            for t in 0..10 {
                let dot: f64 = m
                    .entity(EntityId(h))
                    .iter()
                    .zip(m.entity(EntityId(t)))
                    .map(|(a, b)| a * b)
                    .sum();
                let d = m
                    .dissimilarity_unstructured(&Triple::new(h, 0, t))
                    .unwrap()
                    .value();
                assert!((d - (2.0 - 2.0 * dot)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dissim_names_round_trip() {
        for kind in [
            DissimilarityKind::L1,
            DissimilarityKind::L2,
            DissimilarityKind::L2Squared,
        ] {
            assert_eq!(kind.as_str().parse::<DissimilarityKind>().unwrap(), kind);
        }
        assert!("l3".parse::<DissimilarityKind>().is_err());
    }

    fn vec_k(k: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-3.0f64..3.0, k)
    }

    proptest! {
        #[test]
        fn squared_distance_expansion(
            (h, l, t) in (1usize..16).prop_flat_map(|k| (vec_k(k), vec_k(k), vec_k(k)))
        ) {
            let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
            let t_minus_h: Vec<f64> = t.iter().zip(&h).map(|(a, b)| a - b).collect();
            let expanded = dot(&h, &h) + dot(&l, &l) + dot(&t, &t)
                - 2.0 * (dot(&h, &t) + dot(&l, &t_minus_h));
            let direct = DissimilarityKind::L2Squared.distance(&h, Some(&l), &t);
            prop_assert!((direct - expanded).abs() <= 1e-9);
        }

        #[test]
        fn projection_is_idempotent(rows in proptest::collection::vec(vec_k(6), 1..8)) {
            let flat: Vec<f64> = rows.concat();
            let mut m = EmbeddingModel::from_tables(6, DissimilarityKind::L1, flat, vec![0.0; 6]).unwrap();
            m.project_all();
            let once = m.clone();
            m.project_all();
            prop_assert!(m.max_entity_norm_error() < 1e-12);
            for (a, b) in once.entity_table().iter().zip(m.entity_table()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn translation_consistency(h in vec_k(7), l in vec_k(7)) {
            let t: Vec<f64> = h.iter().zip(&l).map(|(a, b)| a + b).collect();
            for kind in [DissimilarityKind::L1, DissimilarityKind::L2, DissimilarityKind::L2Squared] {
                let mut ents = h.clone();
                ents.extend_from_slice(&t);
                let m = EmbeddingModel::from_tables(7, kind, ents, l.clone()).unwrap();
                let d = m.dissimilarity(&Triple::new(0, 0, 1)).unwrap().value();
                prop_assert_eq!(d, 0.0, "{}", kind);
            }
        }
    }
}
