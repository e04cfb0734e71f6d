//! Triples, name dictionaries and closed train/valid/test splits.

use alloc::collections::BTreeMap;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// Dense index of an entity in `[0, num_entities)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityId(pub u32);

/// Dense index of a relation label in `[0, num_relations)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelationId(pub u32);

impl EntityId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelationId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub head: EntityId,
    pub label: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(head: u32, label: u32, tail: u32) -> Self {
        Triple {
            head: EntityId(head),
            label: RelationId(label),
            tail: EntityId(tail),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        })
    }
}

/// One textual `(head, label, tail)` record with the line it came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawTriple<'a> {
    pub head: &'a str,
    pub label: &'a str,
    pub tail: &'a str,
    /// 1-based source line, used in error messages.
    pub line: usize,
}

impl<'a> RawTriple<'a> {
    fn check_fields(&self) -> Result<()> {
        if self.head.is_empty() || self.label.is_empty() || self.tail.is_empty() {
            return Err(Error::MalformedRecord {
                line: self.line,
                reason: "empty field".to_string(),
            });
        }
        Ok(())
    }
}

/// Bijection between names and contiguous ids, in first-appearance order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dictionary {
    name_to_id: BTreeMap<String, u32>,
    id_to_name: Vec<String>,
}

impl Dictionary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a dictionary from names listed in id order. Duplicates are rejected.
    pub fn from_names<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut dict = Dictionary::new();
        for name in names {
            let name = name.into();
            if dict.name_to_id.contains_key(&name) {
                return Err(Error::invalid(format!("duplicate dictionary name {name}")));
            }
            dict.insert(&name);
        }
        Ok(dict)
    }

    /// Returns the id of `name`, assigning the next free id if it is new.
    pub fn insert(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.name_to_id.get(name) {
            return id;
        }
        let id = self.id_to_name.len() as u32;
        self.name_to_id.insert(name.to_string(), id);
        self.id_to_name.push(name.to_string());
        id
    }

    pub fn id(&self, name: &str) -> Option<u32> {
        self.name_to_id.get(name).copied()
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.id_to_name.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.id_to_name.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_name.is_empty()
    }

    /// Names in id order.
    pub fn names(&self) -> impl ExactSizeIterator<Item = &str> {
        self.id_to_name.iter().map(String::as_str)
    }
}

/// Builds the entity and relation dictionaries from the training records.
///
/// Heads and tails share the entity dictionary. Ids follow first appearance,
/// scanning each record head, label, tail.
pub fn build_dictionaries(records: &[RawTriple<'_>]) -> Result<(Dictionary, Dictionary)> {
    let mut entities = Dictionary::new();
    let mut relations = Dictionary::new();
    for rec in records {
        rec.check_fields()?;
        entities.insert(rec.head);
        relations.insert(rec.label);
        entities.insert(rec.tail);
    }
    Ok((entities, relations))
}

/// Maps records to ids. Any name missing from the dictionaries is a closure violation.
pub fn parse_triples(
    records: &[RawTriple<'_>],
    entities: &Dictionary,
    relations: &Dictionary,
    split: Split,
) -> Result<Vec<Triple>> {
    let entity = |name: &str| {
        entities
            .id(name)
            .map(EntityId)
            .ok_or_else(|| Error::UnknownEntity {
                name: name.to_string(),
                split,
            })
    };
    records
        .iter()
        .map(|rec| {
            rec.check_fields()?;
            let head = entity(rec.head)?;
            let label =
                relations
                    .id(rec.label)
                    .map(RelationId)
                    .ok_or_else(|| Error::UnknownRelation {
                        name: rec.label.to_string(),
                        split,
                    })?;
            let tail = entity(rec.tail)?;
            Ok(Triple { head, label, tail })
        })
        .collect()
}

/// Dictionaries plus the three splits.
///
/// Every id used by the validation or test split also occurs in the training
/// split, so every ranked entity has a trained embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeBase {
    entities: Dictionary,
    relations: Dictionary,
    train: Vec<Triple>,
    valid: Vec<Triple>,
    test: Vec<Triple>,
}

impl KnowledgeBase {
    /// Assembles a knowledge base from already-indexed splits.
    ///
    /// Fails if any id is out of dictionary bounds, if the training split is
    /// empty, or if valid/test use an entity or relation absent from train.
    pub fn new(
        entities: Dictionary,
        relations: Dictionary,
        train: Vec<Triple>,
        valid: Vec<Triple>,
        test: Vec<Triple>,
    ) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptySplit(Split::Train));
        }
        let kb = KnowledgeBase {
            entities,
            relations,
            train,
            valid,
            test,
        };
        for split in [Split::Train, Split::Valid, Split::Test] {
            for t in kb.split(split) {
                check_bounds(t, kb.entities.len(), kb.relations.len())?;
            }
        }
        kb.check_closure()?;
        Ok(kb)
    }

    /// Builds dictionaries from `train` and indexes all three splits against them.
    /// None of the splits may be empty.
    pub fn from_records(
        train: &[RawTriple<'_>],
        valid: &[RawTriple<'_>],
        test: &[RawTriple<'_>],
    ) -> Result<Self> {
        for (split, recs) in [
            (Split::Train, train),
            (Split::Valid, valid),
            (Split::Test, test),
        ] {
            if recs.is_empty() {
                return Err(Error::EmptySplit(split));
            }
        }
        let (entities, relations) = build_dictionaries(train)?;
        let train_t = parse_triples(train, &entities, &relations, Split::Train)?;
        let valid_t = parse_triples(valid, &entities, &relations, Split::Valid)?;
        let test_t = parse_triples(test, &entities, &relations, Split::Test)?;
        KnowledgeBase::new(entities, relations, train_t, valid_t, test_t)
    }

    /// Verifies that ids in valid ∪ test are a subset of ids in train.
    pub fn check_closure(&self) -> Result<()> {
        let mut seen_e = BTreeSet::new();
        let mut seen_r = BTreeSet::new();
        for t in &self.train {
            seen_e.insert(t.head);
            seen_e.insert(t.tail);
            seen_r.insert(t.label);
        }
        for split in [Split::Valid, Split::Test] {
            for t in self.split(split) {
                for e in [t.head, t.tail] {
                    if !seen_e.contains(&e) {
                        return Err(Error::UnknownEntity {
                            name: self.entity_name(e).to_string(),
                            split,
                        });
                    }
                }
                if !seen_r.contains(&t.label) {
                    return Err(Error::UnknownRelation {
                        name: self.relation_name(t.label).to_string(),
                        split,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn entities(&self) -> &Dictionary {
        &self.entities
    }

    pub fn relations(&self) -> &Dictionary {
        &self.relations
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn train(&self) -> &[Triple] {
        &self.train
    }

    pub fn valid(&self) -> &[Triple] {
        &self.valid
    }

    pub fn test(&self) -> &[Triple] {
        &self.test
    }

    pub fn split(&self, split: Split) -> &[Triple] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    /// `(train, valid, test)` sizes.
    pub fn counts(&self) -> (usize, usize, usize) {
        (self.train.len(), self.valid.len(), self.test.len())
    }

    pub fn entity_name(&self, id: EntityId) -> &str {
        self.entities.name(id.0).unwrap_or("?")
    }

    pub fn relation_name(&self, id: RelationId) -> &str {
        self.relations.name(id.0).unwrap_or("?")
    }
}

pub(crate) fn check_bounds(t: &Triple, num_entities: usize, num_relations: usize) -> Result<()> {
    for e in [t.head, t.tail] {
        if e.index() >= num_entities {
            return Err(Error::IdOutOfRange {
                kind: "entity",
                index: e.index(),
                bound: num_entities,
            });
        }
    }
    if t.label.index() >= num_relations {
        return Err(Error::IdOutOfRange {
            kind: "relation",
            index: t.label.index(),
            bound: num_relations,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn rec<'a>(h: &'a str, r: &'a str, t: &'a str, line: usize) -> RawTriple<'a> {
        RawTriple {
            head: h,
            label: r,
            tail: t,
            line,
        }
    }

    #[test]
    fn first_appearance_order() {
        let recs = [rec("a", "r", "b", 1), rec("b", "r", "c", 2)];
        let (e, r) = build_dictionaries(&recs).unwrap();
        assert_eq!(e.names().collect::<Vec<_>>(), vec!["a", "b", "c"]);
        assert_eq!(r.names().collect::<Vec<_>>(), vec!["r"]);
        assert_eq!(e.id("c"), Some(2));
        assert_eq!(r.id("r"), Some(0));
    }

    #[test]
    fn empty_input_gives_empty_dictionaries() {
        let (e, r) = build_dictionaries(&[]).unwrap();
        assert!(e.is_empty());
        assert!(r.is_empty());
    }

    #[test]
    fn empty_field_reports_line() {
        let recs = [rec("a", "r", "b", 1), rec("a", "", "b", 7)];
        match build_dictionaries(&recs) {
            Err(Error::MalformedRecord { line, .. }) => assert_eq!(line, 7),
            other => panic!("expected malformed record, got {other:?}"),
        }
    }

    #[test]
    fn lookup_and_unknown_names() {
        let recs = [rec("a", "r", "b", 1), rec("b", "r", "c", 2)];
        let (e, r) = build_dictionaries(&recs).unwrap();
        let ts = parse_triples(&[rec("a", "r", "b", 1)], &e, &r, Split::Test).unwrap();
        assert_eq!(ts, vec![Triple::new(0, 0, 1)]);

        let err = parse_triples(&[rec("zzz", "r", "b", 1)], &e, &r, Split::Test).unwrap_err();
        assert_eq!(err.to_string(), "unknown entity zzz in test split");
        let err = parse_triples(&[rec("a", "q", "b", 1)], &e, &r, Split::Valid).unwrap_err();
        assert!(
            matches!(err, Error::UnknownRelation { ref name, split: Split::Valid } if name == "q")
        );
    }

    #[test]
    fn dictionary_bijection() {
        let recs = [
            rec("x", "p", "y", 1),
            rec("y", "q", "z", 2),
            rec("z", "p", "x", 3),
            rec("w", "q", "w", 4),
        ];
        let (e, r) = build_dictionaries(&recs).unwrap();
        for d in [&e, &r] {
            for (i, name) in d.names().enumerate() {
                assert_eq!(d.id(name), Some(i as u32));
                assert_eq!(d.name(i as u32), Some(name));
            }
        }
        assert_eq!(e.len(), 4);
    }

    #[test]
    fn from_names_rejects_duplicates() {
        assert!(Dictionary::from_names(["a", "b", "a"]).is_err());
        let d = Dictionary::from_names(["a", "b"]).unwrap();
        assert_eq!(d.id("b"), Some(1));
    }

    #[test]
    fn closure_violation_is_an_error() {
        let train = [
            rec("a", "r", "b", 1),
            rec("b", "r", "c", 2),
            rec("c", "s", "a", 3),
        ];
        let valid = [rec("a", "r", "d", 1)];
        let test = [rec("a", "s", "b", 1)];
        let err = KnowledgeBase::from_records(&train, &valid, &test).unwrap_err();
        assert!(
            matches!(err, Error::UnknownEntity { ref name, split: Split::Valid } if name == "d")
        );
    }

    #[test]
    fn shared_dictionary_and_counts() {
        let train = [
            rec("a", "r", "b", 1),
            rec("b", "r", "c", 2),
            rec("c", "s", "a", 3),
        ];
        let valid = [rec("a", "s", "c", 1)];
        let test = [rec("b", "s", "a", 1)];
        let kb = KnowledgeBase::from_records(&train, &valid, &test).unwrap();
        assert_eq!(kb.counts(), (3, 1, 1));
        assert_eq!(kb.valid()[0], Triple::new(0, 1, 2));
        assert_eq!(kb.test()[0], Triple::new(1, 1, 0));
        assert_eq!(kb.entity_name(EntityId(2)), "c");
    }

    #[test]
    fn empty_split_rejected() {
        let train = [rec("a", "r", "b", 1)];
        let err = KnowledgeBase::from_records(&train, &[], &train).unwrap_err();
        assert_eq!(err, Error::EmptySplit(Split::Valid));
    }

    #[test]
    fn new_checks_bounds_and_closure() {
        let e = Dictionary::from_names(["a", "b", "c"]).unwrap();
        let r = Dictionary::from_names(["r"]).unwrap();
        let err = KnowledgeBase::new(
            e.clone(),
            r.clone(),
            vec![Triple::new(0, 0, 3)],
            vec![],
            vec![],
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::IdOutOfRange {
                kind: "entity",
                index: 3,
                ..
            }
        ));

        // entity 2 exists in the dictionary but never in train
        let err = KnowledgeBase::new(
            e,
            r,
            vec![Triple::new(0, 0, 1)],
            vec![],
            vec![Triple::new(0, 0, 2)],
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::UnknownEntity {
                split: Split::Test,
                ..
            }
        ));
    }

    #[test]
    fn duplicates_are_kept() {
        let train = [rec("a", "r", "b", 1), rec("a", "r", "b", 2)];
        let kb = KnowledgeBase::from_records(&train, &train[..1], &train).unwrap();
        assert_eq!(kb.counts(), (2, 1, 2));
    }
}
