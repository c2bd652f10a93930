//! Code graphs: AST ingestion and program-graph construction.

mod ast;
mod minilang;

pub use ast::{decode_ast_json, encode_ast_json, AstNode, AstTree, RawAst};
pub use minilang::{parse_minilang, parse_minilang_raw};

use std::collections::HashMap;

use crate::error::Result;
use crate::graph::{Edge, GraphKind, GraphNode, LabeledMultigraph, RelationVocab};

pub const CHILD: &str = "Child";
pub const NEXT_TOKEN: &str = "NextToken";
pub const LAST_LEXICAL_USE: &str = "LastLexicalUse";

/// Relation names used by program graphs, before inverse augmentation.
pub fn code_relations() -> RelationVocab {
    RelationVocab::new([CHILD, NEXT_TOKEN, LAST_LEXICAL_USE]).expect("static vocabulary")
}

/// Program graph over an AST: `Child` edges for syntax structure, `NextToken`
/// between consecutive terminals, and `LastLexicalUse` from each identifier
/// occurrence back to the previous occurrence with the same spelling.
pub fn build_program_graph(ast: &AstTree) -> Result<LabeledMultigraph> {
    let nodes: Vec<GraphNode> = ast
        .nodes()
        .iter()
        .map(|n| match &n.value {
            Some(v) => GraphNode::new(v.clone(), true),
            None => GraphNode::new(n.kind.clone(), false),
        })
        .collect();

    let mut edges = Vec::new();
    for p in 0..ast.len() {
        edges.extend(ast.children(p).iter().map(|&c| Edge::new(p, c, 0)));
    }
    let terminals = ast.terminals();
    edges.extend(terminals.windows(2).map(|w| Edge::new(w[0], w[1], 1)));

    let mut last_use: HashMap<&str, usize> = HashMap::new();
    for &t in &terminals {
        let node = &ast.nodes()[t];
        if !node.is_identifier {
            continue;
        }
        let name = node.value.as_deref().unwrap_or_default();
        if let Some(prev) = last_use.insert(name, t) {
            edges.push(Edge::new(t, prev, 2));
        }
    }
    LabeledMultigraph::new(GraphKind::Code, code_relations(), nodes, edges)
}
