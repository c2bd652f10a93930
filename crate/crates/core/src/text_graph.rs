//! Text graphs: constituency tree edges plus a left-to-right word chain.

use crate::error::{Error, Result};
use crate::graph::{Edge, GraphKind, GraphNode, LabeledMultigraph, RelationVocab};

pub const CONSTITUENCY: &str = "Constituency";
pub const NEXT_WORD: &str = "NextWord";

/// Relation names used by text graphs, before inverse augmentation.
pub fn text_relations() -> RelationVocab {
    RelationVocab::new([CONSTITUENCY, NEXT_WORD]).expect("static vocabulary")
}

/// Phrase-structure tree in Penn Treebank bracketing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BracketedParse {
    Node {
        label: String,
        children: Vec<BracketedParse>,
    },
    Leaf(String),
}

impl BracketedParse {
    pub fn leaves(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            BracketedParse::Leaf(w) => out.push(w),
            BracketedParse::Node { children, .. } => {
                for c in children {
                    c.collect_leaves(out);
                }
            }
        }
    }

    /// Labels of internal nodes in preorder.
    pub fn labels(&self) -> Vec<&str> {
        let mut out = Vec::new();
        fn walk<'a>(t: &'a BracketedParse, out: &mut Vec<&'a str>) {
            if let BracketedParse::Node { label, children } = t {
                out.push(label);
                for c in children {
                    walk(c, out);
                }
            }
        }
        walk(self, &mut out);
        out
    }

    /// A node whose only child is a word: a part-of-speech tag over its word.
    fn is_preterminal(&self) -> Option<&str> {
        match self {
            BracketedParse::Node { children, .. } => match children.as_slice() {
                [BracketedParse::Leaf(w)] => Some(w),
                _ => None,
            },
            BracketedParse::Leaf(_) => None,
        }
    }
}

#[derive(Debug, PartialEq)]
enum Tok<'a> {
    Open,
    Close,
    Atom(&'a str),
}

fn lex(text: &str) -> Vec<(usize, Tok<'_>)> {
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(i, c)) = chars.peek() {
        match c {
            '(' => {
                out.push((i, Tok::Open));
                chars.next();
            }
            ')' => {
                out.push((i, Tok::Close));
                chars.next();
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            _ => {
                let start = i;
                let mut end = text.len();
                while let Some(&(j, c)) = chars.peek() {
                    if c == '(' || c == ')' || c.is_whitespace() {
                        end = j;
                        break;
                    }
                    chars.next();
                }
                out.push((start, Tok::Atom(&text[start..end])));
            }
        }
    }
    out
}

/// Parses one bracketed tree such as `(S (VP (VB Configure) (NP the window)))`.
/// Errors carry the byte offset of the offending token.
pub fn parse_bracketed(text: &str) -> Result<BracketedParse> {
    let toks = lex(text);
    let mut pos = 0;
    let tree = parse_tree(&toks, &mut pos, text.len())?;
    if let Some((at, _)) = toks.get(pos) {
        return Err(Error::parse_at(format!("byte {at}"), "trailing input after tree"));
    }
    Ok(tree)
}

fn parse_tree(toks: &[(usize, Tok<'_>)], pos: &mut usize, end: usize) -> Result<BracketedParse> {
    let at = |p: usize| toks.get(p).map_or(end, |t| t.0);
    match toks.get(*pos) {
        Some((_, Tok::Open)) => *pos += 1,
        _ => return Err(Error::parse_at(format!("byte {}", at(*pos)), "expected '('")),
    }
    let label = match toks.get(*pos) {
        Some((_, Tok::Atom(a))) => {
            *pos += 1;
            a.to_string()
        }
        _ => return Err(Error::parse_at(format!("byte {}", at(*pos)), "empty label")),
    };
    let mut children = Vec::new();
    loop {
        match toks.get(*pos) {
            Some((_, Tok::Close)) => {
                *pos += 1;
                break;
            }
            Some((_, Tok::Open)) => children.push(parse_tree(toks, pos, end)?),
            Some((_, Tok::Atom(w))) => {
                children.push(BracketedParse::Leaf(w.to_string()));
                *pos += 1;
            }
            None => {
                return Err(Error::parse_at(format!("byte {end}"), "unbalanced parentheses"));
            }
        }
    }
    if children.is_empty() {
        return Err(Error::parse_at(
            format!("byte {}", at(*pos - 1)),
            format!("node {label:?} has no children"),
        ));
    }
    Ok(BracketedParse::Node { label, children })
}

/// Fallback parse: a single `S` over every token.
pub fn flat_parse<S: AsRef<str>>(tokens: &[S]) -> Result<BracketedParse> {
    if tokens.is_empty() {
        return Err(Error::Argument("flat_parse needs at least one token".into()));
    }
    Ok(BracketedParse::Node {
        label: "S".into(),
        children: tokens
            .iter()
            .map(|t| BracketedParse::Leaf(t.as_ref().to_string()))
            .collect(),
    })
}

/// Splits raw text into word tokens at whitespace and punctuation.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// One graph node per tree node, except that a non-root POS tag over a single
/// word is merged into that word. Words are lowercased.
pub fn build_text_graph(parse: &BracketedParse) -> Result<LabeledMultigraph> {
    let relations = text_relations();
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let mut words = Vec::new();

    fn walk(
        t: &BracketedParse,
        is_root: bool,
        nodes: &mut Vec<GraphNode>,
        edges: &mut Vec<Edge>,
        words: &mut Vec<usize>,
    ) -> usize {
        let id = nodes.len();
        let word = match t {
            BracketedParse::Leaf(w) => Some(w.as_str()),
            node if !is_root => node.is_preterminal(),
            _ => None,
        };
        if let Some(w) = word {
            nodes.push(GraphNode::new(w.to_lowercase(), true));
            words.push(id);
            return id;
        }
        let BracketedParse::Node { label, children } = t else {
            unreachable!()
        };
        nodes.push(GraphNode::new(label.clone(), false));
        for c in children {
            let child = walk(c, false, nodes, edges, words);
            edges.push(Edge::new(id, child, 0));
        }
        id
    }

    walk(parse, true, &mut nodes, &mut edges, &mut words);
    if words.is_empty() {
        return Err(Error::Argument("parse has no words".into()));
    }
    edges.extend(words.windows(2).map(|w| Edge::new(w[0], w[1], 1)));
    LabeledMultigraph::new(GraphKind::Text, relations, nodes, edges)
}

/// Text graph for raw text: bracketed parse when given, flat parse otherwise.
pub fn text_graph_for(doc: &str, parse: Option<&str>) -> Result<LabeledMultigraph> {
    let tree = match parse {
        Some(p) => parse_bracketed(p)?,
        None => flat_parse(&tokenize(doc))?,
    };
    build_text_graph(&tree)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf(w: &str) -> BracketedParse {
        BracketedParse::Leaf(w.into())
    }

    #[test]
    fn parse_examples() {
        assert_eq!(
            parse_bracketed("(NN size)").unwrap(),
            BracketedParse::Node {
                label: "NN".into(),
                children: vec![leaf("size")]
            }
        );
        let t = parse_bracketed("(S (VP (VB Configure) (NP (DT the) (NN window) (NN size))))").unwrap();
        assert_eq!(t.leaves(), vec!["Configure", "the", "window", "size"]);
        assert_eq!(t.labels(), vec!["S", "VP", "VB", "NP", "DT", "NN", "NN"]);

        let spaced = parse_bracketed("  ( S\n\t(NP  a )\n b ) ").unwrap();
        assert_eq!(spaced, parse_bracketed("(S (NP a) b)").unwrap());

        for bad in ["((S a)", "(S a", "()", "(S)", "(S a))", "", "a"] {
            assert!(matches!(parse_bracketed(bad), Err(Error::Parse { .. })), "{bad:?}");
        }
        match parse_bracketed("(S a") {
            Err(Error::Parse { position, .. }) => assert_eq!(position, "byte 4"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn flat_parse_examples() {
        assert_eq!(flat_parse(&["configure"]).unwrap(), parse_bracketed("(S configure)").unwrap());
        assert_eq!(flat_parse(&["a", "b"]).unwrap(), parse_bracketed("(S a b)").unwrap());
        assert!(matches!(flat_parse::<&str>(&[]), Err(Error::Argument(_))));
    }

    #[test]
    fn build_examples() {
        let g = build_text_graph(&parse_bracketed("(S a)").unwrap()).unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edges_named(CONSTITUENCY).count(), 1);
        assert_eq!(g.edges_named(NEXT_WORD).count(), 0);

        let g = build_text_graph(&parse_bracketed("(S a b)").unwrap()).unwrap();
        assert_eq!(g.node_count(), 3);
        let c: Vec<_> = g.edges_named(CONSTITUENCY).map(|e| (e.src, e.dst)).collect();
        assert_eq!(c, vec![(0, 1), (0, 2)]);
        let n: Vec<_> = g.edges_named(NEXT_WORD).map(|e| (e.src, e.dst)).collect();
        assert_eq!(n, vec![(1, 2)]);
    }

    #[test]
    fn pos_tags_merge_into_words() {
        let t = parse_bracketed("(S (VP (VB Configure) (NP (DT the) (NN window) (NN size))))").unwrap();
        let g = build_text_graph(&t).unwrap();
        let symbols: Vec<_> = g.nodes().iter().filter(|n| !n.is_terminal).map(|n| n.token.as_str()).collect();
        assert_eq!(symbols, vec!["S", "VP", "NP"]);
        let words: Vec<_> = g.nodes().iter().filter(|n| n.is_terminal).map(|n| n.token.as_str()).collect();
        assert_eq!(words, vec!["configure", "the", "window", "size"]);
    }

    #[test]
    fn tokenizer_drops_punctuation() {
        assert_eq!(tokenize("Returns the max_value, (or -1)."), vec!["Returns", "the", "max_value", "or", "1"]);
        assert!(tokenize("  ... ").is_empty());
    }
}
