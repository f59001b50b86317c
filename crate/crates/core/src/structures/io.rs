//! Tree and graph file formats.
//!
//! Trees use a CoNLL-like TSV layout, one token per line
//! (`index<TAB>form<TAB>head`), with a blank line between sentences. An
//! optional `# id = <k>` comment line carries the instance id.
//!
//! Graphs (and whole instances) use JSON-lines, one object per sentence:
//! `{"id": 0, "tokens": [...], "arcs": [[head, modifier, label], ...]}`,
//! optionally with `"heads"` (a tree) and `"label"` (an end-task class).

use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{DepTree, SemGraph, SentenceInstance};
use crate::{Error, Result};

/// Maps token forms to ids. Unknown forms map to [`Vocabulary::unk_id`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    forms: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new(forms: Vec<String>) -> Self {
        let index = forms
            .iter()
            .enumerate()
            .map(|(i, f)| (f.clone(), i))
            .collect();
        Vocabulary { forms, index }
    }

    /// The vocabulary `w0, w1, …` used by generated data.
    pub fn synthetic(size: usize) -> Self {
        Vocabulary::new((0..size).map(|i| format!("w{i}")).collect())
    }

    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }

    pub fn unk_id(&self) -> usize {
        self.forms.len()
    }

    pub fn id(&self, form: &str) -> usize {
        if self.index.is_empty() && !self.forms.is_empty() {
            // deserialized without the index
            return self
                .forms
                .iter()
                .position(|f| f == form)
                .unwrap_or(self.unk_id());
        }
        self.index.get(form).copied().unwrap_or(self.unk_id())
    }

    pub fn form(&self, id: usize) -> &str {
        self.forms.get(id).map(String::as_str).unwrap_or("<unk>")
    }
}

/// One JSON-lines record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceRecord {
    #[serde(default)]
    pub id: usize,
    pub tokens: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heads: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arcs: Option<Vec<(usize, usize, usize)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<usize>,
}

impl SentenceRecord {
    pub fn from_instance(inst: &SentenceInstance, vocab: &Vocabulary) -> Self {
        SentenceRecord {
            id: inst.id,
            tokens: inst
                .tokens
                .iter()
                .map(|&t| vocab.form(t).to_string())
                .collect(),
            heads: inst.gold_tree.as_ref().map(|t| t.heads().to_vec()),
            arcs: inst.gold_graph.as_ref().map(|g| g.triples().collect()),
            label: inst.end_label,
        }
    }

    pub fn to_instance(&self, vocab: &Vocabulary) -> Result<SentenceInstance> {
        let tokens: Vec<usize> = self.tokens.iter().map(|f| vocab.id(f)).collect();
        let n = tokens.len();
        let gold_tree = self.heads.clone().map(DepTree::new).transpose()?;
        let gold_graph = self
            .arcs
            .clone()
            .map(|arcs| SemGraph::new(n, arcs))
            .transpose()?;
        SentenceInstance::new(
            self.id,
            tokens,
            vocab.unk_id() + 1,
            gold_tree,
            gold_graph,
            self.label,
        )
    }
}

pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Vec<SentenceRecord>> {
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: lineno + 1,
            msg: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_jsonl<W: Write>(mut writer: W, records: &[SentenceRecord]) -> Result<()> {
    for rec in records {
        serde_json::to_writer(&mut writer, rec)?;
        writeln!(writer)?;
    }
    Ok(())
}

/// A sentence as stored in the TSV tree format.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConllSentence {
    pub id: Option<usize>,
    pub forms: Vec<String>,
    pub tree: DepTree,
}

pub fn read_conll<R: BufRead>(reader: R) -> Result<Vec<ConllSentence>> {
    let mut out = Vec::new();
    let mut id = None;
    let mut forms = Vec::new();
    let mut heads = Vec::new();
    let mut start_line = 1;

    let finish = |id: &mut Option<usize>,
                  forms: &mut Vec<String>,
                  heads: &mut Vec<usize>,
                  line: usize,
                  out: &mut Vec<ConllSentence>|
     -> Result<()> {
        if forms.is_empty() {
            return Ok(());
        }
        let tree = DepTree::new(std::mem::take(heads)).map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        out.push(ConllSentence {
            id: id.take(),
            forms: std::mem::take(forms),
            tree,
        });
        Ok(())
    };

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = lineno + 1;
        let trimmed = line.trim_end();
        if trimmed.is_empty() {
            finish(&mut id, &mut forms, &mut heads, start_line, &mut out)?;
            start_line = line_no + 1;
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            if let Some(value) = comment.trim().strip_prefix("id =") {
                id = Some(value.trim().parse().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("bad id comment {trimmed:?}"),
                })?);
            }
            continue;
        }
        let fields: Vec<&str> = trimmed.split('\t').collect();
        if fields.len() < 3 {
            return Err(Error::Parse {
                line: line_no,
                msg: "expected index<TAB>form<TAB>head".into(),
            });
        }
        let parse = |s: &str, what: &str| -> Result<usize> {
            s.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad {what} {s:?}"),
            })
        };
        let index = parse(fields[0], "index")?;
        if index != forms.len() + 1 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected token index {}, found {index}", forms.len() + 1),
            });
        }
        forms.push(fields[1].to_string());
        heads.push(parse(fields[2], "head")?);
    }
    finish(&mut id, &mut forms, &mut heads, start_line, &mut out)?;
    Ok(out)
}

pub fn write_conll<W: Write>(mut writer: W, sentences: &[ConllSentence]) -> Result<()> {
    for s in sentences {
        if let Some(id) = s.id {
            writeln!(writer, "# id = {id}")?;
        }
        for (j, (form, head)) in s.forms.iter().zip(s.tree.heads()).enumerate() {
            writeln!(writer, "{}\t{}\t{}", j + 1, form, head)?;
        }
        writeln!(writer)?;
    }
    Ok(())
}
