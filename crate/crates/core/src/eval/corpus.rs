use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::code::{build_program_graph, parse_minilang, AstTree, RawAst};
use crate::error::{Error, Result};
use crate::graph::{validate_graph, LabeledMultigraph};
use crate::text_graph::{text_graph_for, tokenize};

/// One line of the raw corpus file. Exactly one of `code` and `ast` is set;
/// `parse` optionally carries a bracketed constituency parse of `doc`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawEntry {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ast: Option<RawAst>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parse: Option<String>,
}

impl RawEntry {
    pub fn with_code(id: impl Into<String>, doc: impl Into<String>, code: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            doc: Some(doc.into()),
            code: Some(code.into()),
            ast: None,
            parse: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub min_lines: usize,
    pub min_words: usize,
    pub max_nodes: usize,
    /// Drop docs whose share of ASCII letters among all letters is below this.
    /// A crude stand-in for language identification; off by default.
    pub min_ascii_letter_ratio: Option<f32>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            min_lines: 3,
            min_words: 3,
            max_nodes: 300,
            min_ascii_letter_ratio: None,
        }
    }
}

/// How many entries each rule removed, in application order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub input: usize,
    pub malformed: usize,
    pub duplicate_id: usize,
    pub missing_doc: usize,
    pub too_few_lines: usize,
    pub too_few_words: usize,
    pub non_english: usize,
    pub duplicate_doc: usize,
    pub unparsable: usize,
    pub too_many_nodes: usize,
    pub kept: usize,
}

/// A filtered entry with both graphs built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusEntry {
    pub id: String,
    pub doc: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<String>,
    pub text_graph: LabeledMultigraph,
    pub code_graph: LabeledMultigraph,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Corpus {
    pub entries: Vec<CorpusEntry>,
    pub report: FilterReport,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.id.clone()).collect()
    }

    /// Contiguous sub-corpus (entries `range`), report reset.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Corpus {
        Corpus {
            entries: self.entries[range].to_vec(),
            report: FilterReport::default(),
        }
    }
}

/// Non-blank source lines.
pub fn code_lines(code: &str) -> usize {
    code.lines().filter(|l| !l.trim().is_empty()).count()
}

fn ascii_letter_ratio(text: &str) -> f32 {
    let (mut ascii, mut all) = (0usize, 0usize);
    for c in text.chars().filter(|c| c.is_alphabetic()) {
        all += 1;
        if c.is_ascii_alphabetic() {
            ascii += 1;
        }
    }
    if all == 0 {
        1.0
    } else {
        ascii as f32 / all as f32
    }
}

fn build_graphs(entry: &RawEntry, doc: &str) -> Result<(LabeledMultigraph, LabeledMultigraph)> {
    let text = text_graph_for(doc, entry.parse.as_deref())?;
    let ast = match (&entry.code, &entry.ast) {
        (Some(code), None) => parse_minilang(code)?,
        (None, Some(raw)) => AstTree::from_raw(raw)?,
        _ => return Err(Error::Format("entry needs exactly one of \"code\" and \"ast\"".into())),
    };
    Ok((text, build_program_graph(&ast)?))
}

/// Applies the filters in order: missing doc, code lines, doc words, optional
/// ASCII ratio, duplicate doc (first kept), graph construction, node cap.
/// Entries given as an AST have no source lines and skip the line filter.
pub fn ingest_corpus(raw: Vec<RawEntry>, config: &FilterConfig) -> Corpus {
    let mut report = FilterReport {
        input: raw.len(),
        ..FilterReport::default()
    };
    let mut seen_ids = HashSet::new();
    let mut seen_docs = HashSet::new();
    let mut entries = Vec::new();
    for entry in raw {
        if !seen_ids.insert(entry.id.clone()) {
            log::warn!("entry {}: duplicate id, skipped", entry.id);
            report.duplicate_id += 1;
            continue;
        }
        let doc = match entry.doc.as_deref().map(str::trim) {
            Some(d) if !d.is_empty() => d.to_string(),
            _ => {
                report.missing_doc += 1;
                continue;
            }
        };
        if let Some(code) = &entry.code {
            if code_lines(code) < config.min_lines {
                report.too_few_lines += 1;
                continue;
            }
        }
        if tokenize(&doc).len() < config.min_words {
            report.too_few_words += 1;
            continue;
        }
        if let Some(min) = config.min_ascii_letter_ratio {
            if ascii_letter_ratio(&doc) < min {
                report.non_english += 1;
                continue;
            }
        }
        if !seen_docs.insert(doc.clone()) {
            report.duplicate_doc += 1;
            continue;
        }
        let (text_graph, code_graph) = match build_graphs(&entry, &doc) {
            Ok(g) => g,
            Err(e) => {
                log::warn!("entry {}: {e}, skipped", entry.id);
                report.unparsable += 1;
                continue;
            }
        };
        let cap = Some(config.max_nodes);
        if !validate_graph(&text_graph, cap).is_ok() || !validate_graph(&code_graph, cap).is_ok() {
            report.too_many_nodes += 1;
            continue;
        }
        entries.push(CorpusEntry {
            id: entry.id,
            doc,
            code: entry.code,
            text_graph,
            code_graph,
        });
    }
    report.kept = entries.len();
    Corpus { entries, report }
}

/// Reads raw JSONL. Blank lines are ignored; malformed lines are logged and
/// counted, not fatal.
pub fn read_raw_entries(path: &Path) -> Result<(Vec<RawEntry>, usize)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    let mut malformed = 0;
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<RawEntry>(&line) {
            Ok(e) => out.push(e),
            Err(e) => {
                log::warn!("{}:{}: {e}, skipped", path.display(), n + 1);
                malformed += 1;
            }
        }
    }
    Ok((out, malformed))
}

/// Reads, filters and builds a corpus from a raw JSONL file.
pub fn ingest_file(path: &Path, config: &FilterConfig) -> Result<Corpus> {
    let (raw, malformed) = read_raw_entries(path)?;
    let mut corpus = ingest_corpus(raw, config);
    corpus.report.malformed = malformed;
    corpus.report.input += malformed;
    Ok(corpus)
}

pub fn write_corpus(path: &Path, corpus: &Corpus) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for e in &corpus.entries {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a built corpus; unlike raw input, every line must be valid.
pub fn read_corpus(path: &Path) -> Result<Corpus> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut entries = Vec::new();
    let mut ids = HashSet::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: CorpusEntry = serde_json::from_str(&line)
            .map_err(|e| Error::parse_at(format!("{}:{}", path.display(), n + 1), e.to_string()))?;
        if !ids.insert(entry.id.clone()) {
            return Err(Error::Format(format!("{}: duplicate id {}", path.display(), entry.id)));
        }
        entries.push(entry);
    }
    Ok(Corpus {
        report: FilterReport {
            input: entries.len(),
            kept: entries.len(),
            ..FilterReport::default()
        },
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const CODE: &str = "x = 1\ny = x\nreturn y";

    #[test]
    fn each_rule_fires() {
        let long_code = (0..120).map(|i| format!("v{i} = {i}")).collect::<Vec<_>>().join("\n");
        let mut no_doc = RawEntry::with_code("b", "", CODE);
        no_doc.doc = None;
        let raw = vec![
            RawEntry::with_code("a", "return the value of y", CODE),
            no_doc,
            RawEntry::with_code("c", "set x then y", "x = 1\ny = 2"),
            RawEntry::with_code("d", "tiny doc", CODE),
            RawEntry::with_code("e", "return the value of y", CODE),
            RawEntry::with_code("f", "a doc for a syntax error", "x = \n y = 1\nz = 2"),
            RawEntry::with_code("g", "a very long program body", &long_code),
            RawEntry::with_code("a", "same id as first", CODE),
        ];
        let c = ingest_corpus(raw, &FilterConfig::default());
        assert_eq!(c.ids(), vec!["a"]);
        let r = &c.report;
        assert_eq!(
            (r.missing_doc, r.too_few_lines, r.too_few_words, r.duplicate_doc, r.unparsable, r.too_many_nodes, r.duplicate_id),
            (1, 1, 1, 1, 1, 1, 1)
        );
        assert_eq!((r.input, r.kept), (8, 1));
    }

    #[test]
    fn ascii_filter_is_opt_in() {
        let raw = vec![RawEntry::with_code("a", "вычислить сумму двух чисел", CODE)];
        assert_eq!(ingest_corpus(raw.clone(), &FilterConfig::default()).len(), 1);
        let cfg = FilterConfig {
            min_ascii_letter_ratio: Some(0.5),
            ..FilterConfig::default()
        };
        let c = ingest_corpus(raw, &cfg);
        assert_eq!((c.len(), c.report.non_english), (0, 1));
    }

    #[test]
    fn ast_entries_skip_line_filter() {
        let raw_ast = RawAst::node("Return", vec![RawAst::identifier("x")]);
        let e = RawEntry {
            id: "t".into(),
            doc: Some("return the x value".into()),
            code: None,
            ast: Some(raw_ast),
            parse: None,
        };
        let c = ingest_corpus(vec![e], &FilterConfig::default());
        assert_eq!(c.len(), 1);
        assert_eq!(c.entries[0].code_graph.node_count(), 2);
    }

    #[test]
    fn corpus_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let raw_path = dir.path().join("raw.jsonl");
        let lines = [
            serde_json::to_string(&RawEntry::with_code("a", "return the value of y", CODE)).unwrap(),
            "{not json".to_string(),
            String::new(),
        ];
        std::fs::write(&raw_path, lines.join("\n")).unwrap();
        let c = ingest_file(&raw_path, &FilterConfig::default()).unwrap();
        assert_eq!((c.report.input, c.report.malformed, c.len()), (2, 1, 1));

        let out = dir.path().join("corpus.jsonl");
        write_corpus(&out, &c).unwrap();
        let back = read_corpus(&out).unwrap();
        assert_eq!(back.entries, c.entries);
    }
}
