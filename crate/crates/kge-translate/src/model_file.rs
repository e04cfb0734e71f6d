//! Text serialization of a trained model and its dictionaries.
//!
//! ```text
//! kge-translate/1
//! k=<int> dissim=<l1|l2|l2sq> entities=<int> relations=<int>
//! [entities]
//! <one name per line, id order>
//! [relations]
//! <one name per line, id order>
//! [entity_embeddings]
//! <k space-separated floats per line>
//! [relation_embeddings]
//! <k space-separated floats per line>
//! ```
//!
//! Floats are written with 17 significant digits, so reading a file back
//! reproduces every value bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use kge_translate_core::{Dictionary, DissimilarityKind, EmbeddingModel};

use crate::error::{Error, ModelFormatError, Result};

pub const MAGIC: &str = "kge-translate";
pub const VERSION: u32 = 1;

/// A model together with the dictionaries that name its rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub model: EmbeddingModel,
    pub entities: Dictionary,
    pub relations: Dictionary,
}

pub fn write_model<W: Write>(
    model: &EmbeddingModel,
    entities: &Dictionary,
    relations: &Dictionary,
    out: &mut W,
) -> std::io::Result<()> {
    writeln!(out, "{MAGIC}/{VERSION}")?;
    writeln!(
        out,
        "k={} dissim={} entities={} relations={}",
        model.k(),
        model.dissim(),
        model.num_entities(),
        model.num_relations()
    )?;
    writeln!(out, "[entities]")?;
    for name in entities.names() {
        writeln!(out, "{name}")?;
    }
    writeln!(out, "[relations]")?;
    for name in relations.names() {
        writeln!(out, "{name}")?;
    }
    for (section, table) in [
        ("entity_embeddings", model.entity_table()),
        ("relation_embeddings", model.relation_table()),
    ] {
        writeln!(out, "[{section}]")?;
        for row in table.chunks_exact(model.k()) {
            let mut first = true;
            for v in row {
                if !first {
                    out.write_all(b" ")?;
                }
                write!(out, "{v:.16e}")?;
                first = false;
            }
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

pub fn save_model(
    model: &EmbeddingModel,
    entities: &Dictionary,
    relations: &Dictionary,
    path: &Path,
) -> Result<()> {
    if entities.len() != model.num_entities() || relations.len() != model.num_relations() {
        return Err(Error::Usage(format!(
            "dictionaries ({} entities, {} relations) do not match the model ({}, {})",
            entities.len(),
            relations.len(),
            model.num_entities(),
            model.num_relations()
        )));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_model(model, entities, relations, &mut out)
        .and_then(|()| out.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<SavedModel> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_model(BufReader::new(file))
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    number: usize,
}

impl<R: BufRead> Lines<R> {
    fn next(&mut self, what: &str) -> Result<String, ModelFormatError> {
        match self.inner.next() {
            Some(line) => {
                self.number += 1;
                Ok(line?)
            }
            None => Err(ModelFormatError::Truncated(format!(
                "end of file while reading {what}"
            ))),
        }
    }

    fn expect_section(&mut self, name: &str) -> Result<(), ModelFormatError> {
        let line = self.next(&format!("[{name}] marker"))?;
        if line != format!("[{name}]") {
            return Err(ModelFormatError::Syntax {
                line: self.number,
                msg: format!("expected [{name}], found {line:?}"),
            });
        }
        Ok(())
    }

    fn syntax(&self, msg: impl Into<String>) -> ModelFormatError {
        ModelFormatError::Syntax {
            line: self.number,
            msg: msg.into(),
        }
    }
}

struct Header {
    k: usize,
    dissim: DissimilarityKind,
    entities: usize,
    relations: usize,
}

fn parse_header<R: BufRead>(lines: &mut Lines<R>) -> Result<Header, ModelFormatError> {
    let line = lines.next("header")?;
    let mut fields = [None; 4];
    const KEYS: [&str; 4] = ["k", "dissim", "entities", "relations"];
    for token in line.split_whitespace() {
        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| lines.syntax(format!("bad header token {token:?}")))?;
        let slot = KEYS
            .iter()
            .position(|k| *k == key)
            .ok_or_else(|| lines.syntax(format!("unknown header key {key:?}")))?;
        fields[slot] = Some(value);
    }
    let get =
        |i: usize| fields[i].ok_or_else(|| lines.syntax(format!("header lacks {}=", KEYS[i])));
    let count = |i: usize| -> Result<usize, ModelFormatError> {
        get(i)?
            .parse()
            .map_err(|_| lines.syntax(format!("bad {} value", KEYS[i])))
    };
    let header = Header {
        k: count(0)?,
        dissim: get(1)?
            .parse()
            .map_err(|e: kge_translate_core::Error| lines.syntax(e.to_string()))?,
        entities: count(2)?,
        relations: count(3)?,
    };
    if header.k == 0 {
        return Err(lines.syntax("k must be positive"));
    }
    Ok(header)
}

fn read_names<R: BufRead>(
    lines: &mut Lines<R>,
    section: &str,
    count: usize,
) -> Result<Dictionary, Error> {
    lines.expect_section(section)?;
    let mut names = Vec::with_capacity(count);
    for _ in 0..count {
        names.push(lines.next(section)?);
    }
    Ok(Dictionary::from_names(names)?)
}

fn read_rows<R: BufRead>(
    lines: &mut Lines<R>,
    section: &str,
    rows: usize,
    k: usize,
) -> Result<Vec<f64>, ModelFormatError> {
    lines.expect_section(section)?;
    let mut table = Vec::with_capacity(rows * k);
    for _ in 0..rows {
        let line = lines.next(section)?;
        let before = table.len();
        for token in line.split_ascii_whitespace() {
            let v: f64 = token
                .parse()
                .map_err(|_| lines.syntax(format!("bad float {token:?}")))?;
            table.push(v);
        }
        let found = table.len() - before;
        if found != k {
            return Err(ModelFormatError::Dimension {
                line: lines.number,
                expected: k,
                found,
            });
        }
    }
    Ok(table)
}

pub fn read_model<R: BufRead>(reader: R) -> Result<SavedModel> {
    let mut lines = Lines {
        inner: reader.lines(),
        number: 0,
    };
    let first = lines.next("format line")?;
    let version = first
        .strip_prefix(MAGIC)
        .and_then(|rest| rest.strip_prefix('/'))
        .ok_or_else(|| ModelFormatError::Magic(first.clone()))?;
    if version != VERSION.to_string() {
        return Err(ModelFormatError::Version {
            found: version.to_string(),
            expected: VERSION,
        }
        .into());
    }
    let header = parse_header(&mut lines)?;
    let entities = read_names(&mut lines, "entities", header.entities)?;
    let relations = read_names(&mut lines, "relations", header.relations)?;
    let ent = read_rows(&mut lines, "entity_embeddings", header.entities, header.k)?;
    let rel = read_rows(
        &mut lines,
        "relation_embeddings",
        header.relations,
        header.k,
    )?;
    while let Some(extra) = lines.inner.next() {
        lines.number += 1;
        if !extra.map_err(ModelFormatError::Io)?.trim().is_empty() {
            return Err(lines
                .syntax("unexpected content after the last section")
                .into());
        }
    }
    let model = EmbeddingModel::from_tables(header.k, header.dissim, ent, rel)?;
    Ok(SavedModel {
        model,
        entities,
        relations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SavedModel {
        let model = EmbeddingModel::new(3, 2, 4, DissimilarityKind::L2, 7).unwrap();
        SavedModel {
            model,
            entities: Dictionary::from_names(["a", "b b", "c"]).unwrap(),
            relations: Dictionary::from_names(["r", "s"]).unwrap(),
        }
    }

    fn to_text(s: &SavedModel) -> String {
        let mut buf = Vec::new();
        write_model(&s.model, &s.entities, &s.relations, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn layout() {
        let text = to_text(&sample());
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "kge-translate/1");
        assert_eq!(lines[1], "k=4 dissim=l2 entities=3 relations=2");
        assert_eq!(lines[2], "[entities]");
        assert_eq!(lines[4], "b b");
        assert_eq!(lines[6], "[relations]");
        assert_eq!(lines[9], "[entity_embeddings]");
        assert_eq!(lines[13], "[relation_embeddings]");
        assert_eq!(lines.len(), 16);
        // 17 significant digits per value
        let first = lines[10].split(' ').next().unwrap();
        let mantissa = first.split('e').next().unwrap().trim_start_matches('-');
        assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
    }

    #[test]
    fn round_trip_is_exact() {
        let s = sample();
        let back = read_model(to_text(&s).as_bytes()).unwrap();
        assert_eq!(back.model.entity_table(), s.model.entity_table());
        assert_eq!(back.model.relation_table(), s.model.relation_table());
        assert_eq!(back.entities, s.entities);
        assert_eq!(back.relations, s.relations);
        assert_eq!(back.model.dissim(), DissimilarityKind::L2);
    }

    #[test]
    fn version_mismatch() {
        let text = to_text(&sample()).replacen("kge-translate/1", "kge-translate/2", 1);
        let err = read_model(text.as_bytes()).unwrap_err();
        assert!(
            matches!(err, Error::ModelFormat(ModelFormatError::Version { .. })),
            "{err}"
        );
        let err = read_model("something else\n".as_bytes()).unwrap_err();
        assert!(
            matches!(err, Error::ModelFormat(ModelFormatError::Magic(_))),
            "{err}"
        );
    }

    #[test]
    fn short_row_is_dimension_error() {
        let text = to_text(&sample());
        let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
        let row: Vec<&str> = lines[11].split(' ').collect();
        lines[11] = row[..3].join(" ");
        let err = read_model(lines.join("\n").as_bytes()).unwrap_err();
        assert!(
            matches!(
                err,
                Error::ModelFormat(ModelFormatError::Dimension {
                    line: 12,
                    expected: 4,
                    found: 3
                })
            ),
            "{err}"
        );
    }

    #[test]
    fn truncated_file() {
        let text = to_text(&sample());
        let cut: String = text.lines().take(12).collect::<Vec<_>>().join("\n");
        let err = read_model(cut.as_bytes()).unwrap_err();
        assert!(
            matches!(err, Error::ModelFormat(ModelFormatError::Truncated(_))),
            "{err}"
        );
    }

    #[test]
    fn header_errors() {
        let text = to_text(&sample());
        for (from, to) in [
            ("dissim=l2", "dissim=l9"),
            ("k=4", "k=0"),
            (" relations=2", ""),
        ] {
            let bad = text.replacen(from, to, 1);
            assert!(read_model(bad.as_bytes()).is_err(), "{from} -> {to}");
        }
    }
}
