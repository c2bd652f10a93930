//! Initial node features from a pretrained word-embedding table.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::LabeledMultigraph;
use crate::tensor::Matrix;

/// Lowercase token → embedding row. Immutable once built.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EmbeddingTable {
    index: HashMap<String, usize>,
    values: Vec<f32>,
    dim: Option<usize>,
}

impl EmbeddingTable {
    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Row width, unknown until the first row is added.
    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn lookup(&self, token: &str) -> Option<&[f32]> {
        let d = self.dim?;
        let &row = self.index.get(token)?;
        Some(&self.values[row * d..(row + 1) * d])
    }

    /// Adds a row; the first occurrence of a token wins. Tokens are lowercased.
    pub fn insert(&mut self, token: &str, row: &[f32]) -> Result<()> {
        match self.dim {
            Some(d) if d != row.len() => {
                return Err(Error::Format(format!(
                    "token {token:?} has {} values, expected {d}",
                    row.len()
                )))
            }
            None if row.is_empty() => {
                return Err(Error::Format(format!("token {token:?} has no values")));
            }
            _ => {}
        }
        let key = token.to_lowercase();
        if self.index.contains_key(&key) {
            return Ok(());
        }
        self.dim = Some(row.len());
        self.index.insert(key, self.index.len());
        self.values.extend_from_slice(row);
        Ok(())
    }

    /// Deterministic pseudo-random vectors (uniform in `[-1, 1)`) for each token,
    /// seeded per token so a token's vector does not depend on the others.
    /// Stands in for pretrained vectors when none are available.
    pub fn hashed<'a>(tokens: impl IntoIterator<Item = &'a str>, dim: usize, seed: u64) -> Self {
        let mut table = Self::default();
        let unique: BTreeSet<String> = tokens.into_iter().map(str::to_lowercase).collect();
        for tok in unique {
            let digest = Sha256::digest(tok.as_bytes());
            let mut word = [0u8; 8];
            word.copy_from_slice(&digest[..8]);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ u64::from_le_bytes(word));
            let row: Vec<f32> = (0..dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
            table.insert(&tok, &row).expect("uniform width");
        }
        table
    }
}

/// Loads GloVe text format (`token v1 v2 ... vd` per line). With `restrict`,
/// only tokens in that set (compared lowercase) are kept.
pub fn load_embeddings(path: impl AsRef<Path>, restrict: Option<&HashSet<String>>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_embeddings(BufReader::new(file), restrict)
}

pub fn read_embeddings(reader: impl BufRead, restrict: Option<&HashSet<String>>) -> Result<EmbeddingTable> {
    let mut table = EmbeddingTable::default();
    let mut width: Option<usize> = None;
    let mut row = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Format(format!("line {}: {e}", n + 1)))?;
        let mut parts = line.split_whitespace();
        let Some(token) = parts.next() else { continue };
        row.clear();
        for p in parts {
            let v: f32 = p
                .parse()
                .map_err(|_| Error::Format(format!("line {}: bad number {p:?}", n + 1)))?;
            row.push(v);
        }
        match width {
            Some(w) if w != row.len() => {
                return Err(Error::Format(format!(
                    "line {}: {} values, expected {w}",
                    n + 1,
                    row.len()
                )))
            }
            None if row.is_empty() => {
                return Err(Error::Format(format!("line {}: token without values", n + 1)));
            }
            _ => width = Some(row.len()),
        }
        if let Some(keep) = restrict {
            if !keep.contains(&token.to_lowercase()) {
                continue;
            }
        }
        table.insert(token, &row)?;
    }
    if table.dim.is_none() {
        table.dim = width;
    }
    Ok(table)
}

/// Splits an identifier into lowercase parts at camelCase humps, acronym ends,
/// letter/digit changes and any non-alphanumeric character.
pub fn split_subtokens(token: &str) -> Vec<String> {
    let chars: Vec<char> = token.chars().collect();
    let mut parts = Vec::new();
    let mut cur = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if !c.is_alphanumeric() {
            if !cur.is_empty() {
                parts.push(std::mem::take(&mut cur));
            }
            continue;
        }
        if let Some(&prev) = cur.chars().last().as_ref() {
            let next = chars.get(i + 1).copied();
            let boundary = (prev.is_lowercase() && c.is_uppercase())
                || (prev.is_alphabetic() != c.is_alphabetic())
                || (prev.is_uppercase() && c.is_uppercase() && next.is_some_and(|n| n.is_lowercase()));
            if boundary {
                parts.push(std::mem::take(&mut cur));
            }
        }
        cur.push(c);
    }
    if !cur.is_empty() {
        parts.push(cur);
    }
    parts.into_iter().map(|p| p.to_lowercase()).collect()
}

/// Feature vector for one token: the exact (lowercased) row if present,
/// otherwise the mean of the subtoken rows that are present, otherwise zeros.
pub fn token_feature(token: &str, table: &EmbeddingTable, out: &mut [f32]) {
    out.fill(0.0);
    if let Some(row) = table.lookup(&token.to_lowercase()) {
        out.copy_from_slice(row);
        return;
    }
    let mut hits = 0usize;
    for sub in split_subtokens(token) {
        if let Some(row) = table.lookup(&sub) {
            for (o, &v) in out.iter_mut().zip(row) {
                *o += v;
            }
            hits += 1;
        }
    }
    if hits > 1 {
        let inv = 1.0 / hits as f32;
        out.iter_mut().for_each(|v| *v *= inv);
    }
}

/// `|V| × d_in` initial features, row `i` from node `i`'s token.
pub fn node_features(g: &LabeledMultigraph, table: &EmbeddingTable) -> Result<Matrix<f32>> {
    let d = table
        .dim()
        .ok_or_else(|| Error::Argument("embedding table is empty".into()))?;
    let mut out = Matrix::zeros(g.node_count(), d);
    for (i, node) in g.nodes().iter().enumerate() {
        token_feature(&node.token, table, out.row_mut(i));
    }
    Ok(out)
}

/// Every lowercase token and subtoken appearing in the given graphs.
pub fn graph_vocabulary<'a>(graphs: impl IntoIterator<Item = &'a LabeledMultigraph>) -> HashSet<String> {
    let mut vocab = HashSet::new();
    for g in graphs {
        for n in g.nodes() {
            vocab.insert(n.token.to_lowercase());
            vocab.extend(split_subtokens(&n.token));
        }
    }
    vocab
}

/// Vocabulary for [`EmbeddingTable::hashed`]: subtokens only, so compound
/// identifiers share rows with their parts; tokens with no alphanumeric part
/// keep their own row.
pub fn hashed_vocabulary<'a>(graphs: impl IntoIterator<Item = &'a LabeledMultigraph>) -> BTreeSet<String> {
    let mut vocab = BTreeSet::new();
    for g in graphs {
        for n in g.nodes() {
            let subs = split_subtokens(&n.token);
            if subs.is_empty() {
                vocab.insert(n.token.to_lowercase());
            } else {
                vocab.extend(subs);
            }
        }
    }
    vocab
}

/// Feature table covering `graphs`: GloVe vectors from `embeddings` when
/// given (width must equal `dim`), otherwise hashed vectors seeded by `seed`.
pub fn feature_table<'a>(
    embeddings: Option<&Path>,
    graphs: impl IntoIterator<Item = &'a LabeledMultigraph>,
    dim: usize,
    seed: u64,
) -> Result<EmbeddingTable> {
    match embeddings {
        Some(path) => {
            let table = load_embeddings(path, Some(&graph_vocabulary(graphs)))?;
            match table.dim() {
                Some(d) if d == dim => Ok(table),
                Some(d) => Err(Error::Format(format!(
                    "{}: vectors have width {d}, model expects {dim}",
                    path.display()
                ))),
                None => Err(Error::Format(format!("{}: no vectors for the corpus vocabulary", path.display()))),
            }
        }
        None => {
            let vocab = hashed_vocabulary(graphs);
            Ok(EmbeddingTable::hashed(vocab.iter().map(String::as_str), dim, seed))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{GraphKind, GraphNode, RelationVocab};

    fn graph_of(tokens: &[&str]) -> LabeledMultigraph {
        LabeledMultigraph::new(
            GraphKind::Code,
            RelationVocab::new(["r"]).unwrap(),
            tokens.iter().map(|t| GraphNode::new(*t, true)).collect(),
            [],
        )
        .unwrap()
    }

    #[test]
    fn load_examples() {
        let t = read_embeddings("the 0.1 0.2 0.3\na 1 2 3\n".as_bytes(), None).unwrap();
        assert_eq!((t.len(), t.dim()), (2, Some(3)));
        assert_eq!(t.lookup("a").unwrap(), &[1.0, 2.0, 3.0]);

        assert!(matches!(read_embeddings("the 0.1 0.2\na 0.3\n".as_bytes(), None), Err(Error::Format(_))));
        assert!(matches!(read_embeddings("the 0.1 x\n".as_bytes(), None), Err(Error::Format(_))));

        let empty = read_embeddings("".as_bytes(), None).unwrap();
        assert!(empty.is_empty());
        assert_eq!(empty.dim(), None);
        assert!(empty.lookup("the").is_none());
        assert!(node_features(&graph_of(&["the"]), &empty).is_err());
    }

    #[test]
    fn duplicates_keep_first_and_restriction_filters() {
        let t = read_embeddings("The 1 1\nthe 2 2\n".as_bytes(), None).unwrap();
        assert_eq!(t.lookup("the").unwrap(), &[1.0, 1.0]);
        let keep: HashSet<String> = ["b".to_string()].into();
        let t = read_embeddings("a 1 1\nb 2 2\n".as_bytes(), Some(&keep)).unwrap();
        assert_eq!(t.len(), 1);
        assert!(t.lookup("a").is_none());
    }

    #[test]
    fn subtoken_examples() {
        assert_eq!(split_subtokens("getWindowSize"), vec!["get", "window", "size"]);
        assert_eq!(split_subtokens("max_value2"), vec!["max", "value", "2"]);
        assert_eq!(split_subtokens("size"), vec!["size"]);
        assert_eq!(split_subtokens("HTTPServerError"), vec!["http", "server", "error"]);
        assert_eq!(split_subtokens("\"hello world\""), vec!["hello", "world"]);
        assert!(split_subtokens("==").is_empty());
    }

    #[test]
    fn feature_examples() {
        let table = read_embeddings("the 3 4\nwindow 1 0\nsize 0 1\n".as_bytes(), None).unwrap();
        let f = node_features(&graph_of(&["the", "windowSize", "zzqq", "windowQq"]), &table).unwrap();
        assert_eq!(f.row(0), &[3.0, 4.0]);
        assert_eq!(f.row(1), &[0.5, 0.5]);
        assert_eq!(f.row(2), &[0.0, 0.0]);
        assert_eq!(f.row(3), &[1.0, 0.0]);
    }

    #[test]
    fn hashed_table_is_order_independent() {
        let a = EmbeddingTable::hashed(["x", "Y", "z"], 4, 3);
        let b = EmbeddingTable::hashed(["z", "y"], 4, 3);
        assert_eq!(a.lookup("y"), b.lookup("y"));
        assert_ne!(a.lookup("x"), a.lookup("y"));
        assert_ne!(a.lookup("x"), EmbeddingTable::hashed(["x"], 4, 4).lookup("x"));
    }

    proptest::proptest! {
        #[test]
        fn subtoken_average_within_max_norm(tok in "[a-z]{1,4}([A-Z][a-z]{1,4}){0,3}") {
            let table = EmbeddingTable::hashed(split_subtokens(&tok).iter().map(String::as_str), 5, 1);
            let mut out = vec![0.0; 5];
            token_feature(&tok, &table, &mut out);
            let norm = |v: &[f32]| v.iter().map(|x| x * x).sum::<f32>().sqrt();
            let max = split_subtokens(&tok).iter().filter_map(|s| table.lookup(s)).map(norm).fold(0.0, f32::max);
            proptest::prop_assert!(norm(&out) <= max + 1e-5);
        }
    }
}
