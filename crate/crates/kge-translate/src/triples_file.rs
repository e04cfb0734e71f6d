//! Tab-separated triple files: one `head\tlabel\ttail` record per line.

use std::fs;
use std::io::Write;
use std::path::Path;

use kge_translate_core::{KnowledgeBase, RawTriple, Split};

use crate::error::{Error, Result};

/// Splits `text` into records. Blank lines are skipped; any other line must
/// hold exactly two TAB separators.
pub fn parse_records(text: &str) -> kge_translate_core::Result<Vec<RawTriple<'_>>> {
    let mut out = Vec::new();
    for (i, line) in text.split('\n').enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let (Some(head), Some(label), Some(tail), None) =
            (fields.next(), fields.next(), fields.next(), fields.next())
        else {
            return Err(kge_translate_core::Error::MalformedRecord {
                line: i + 1,
                reason: format!(
                    "expected 3 tab-separated fields, found {}",
                    line.split('\t').count()
                ),
            });
        };
        out.push(RawTriple {
            head,
            label,
            tail,
            line: i + 1,
        });
    }
    Ok(out)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Loads the three splits. Dictionaries come from the training file; the
/// other two must only use names seen there.
pub fn load_dataset(train: &Path, valid: &Path, test: &Path) -> Result<KnowledgeBase> {
    let texts = [read(train)?, read(valid)?, read(test)?];
    let paths = [train, valid, test];
    let mut records = Vec::with_capacity(3);
    for (text, path) in texts.iter().zip(paths) {
        records.push(parse_records(text).map_err(|source| Error::InFile {
            path: path.to_path_buf(),
            source,
        })?);
    }
    KnowledgeBase::from_records(&records[0], &records[1], &records[2]).map_err(|source| {
        let path = match &source {
            kge_translate_core::Error::UnknownEntity { split, .. }
            | kge_translate_core::Error::UnknownRelation { split, .. }
            | kge_translate_core::Error::EmptySplit(split) => paths[*split as usize],
            _ => train,
        };
        Error::InFile {
            path: path.to_path_buf(),
            source,
        }
    })
}

/// Writes one split back in the file format.
pub fn write_split<W: Write>(kb: &KnowledgeBase, split: Split, out: &mut W) -> std::io::Result<()> {
    for t in kb.split(split) {
        writeln!(
            out,
            "{}\t{}\t{}",
            kb.entity_name(t.head),
            kb.relation_name(t.label),
            kb.entity_name(t.tail)
        )?;
    }
    Ok(())
}
