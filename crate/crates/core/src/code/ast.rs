use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::json_error_offset;

/// Language-neutral AST node. `value` is the token spelling and is present
/// exactly for terminals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AstNode {
    pub kind: String,
    pub value: Option<String>,
    pub is_identifier: bool,
    /// Left-to-right rank among terminals; `None` for non-terminals.
    pub source_order: Option<usize>,
}

impl AstNode {
    pub fn is_terminal(&self) -> bool {
        self.value.is_some()
    }
}

/// Nested AST form, used both as the JSON interchange shape and as the
/// parser's output before flattening.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawAst {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub id: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<RawAst>,
}

impl RawAst {
    pub fn node(kind: impl Into<String>, children: Vec<RawAst>) -> Self {
        Self {
            kind: kind.into(),
            value: None,
            id: false,
            children,
        }
    }

    pub fn terminal(kind: impl Into<String>, value: impl Into<String>) -> Self {
        Self {
            kind: kind.into(),
            value: Some(value.into()),
            id: false,
            children: Vec::new(),
        }
    }

    pub fn identifier(name: impl Into<String>) -> Self {
        Self {
            id: true,
            ..Self::terminal("Identifier", name)
        }
    }
}

/// Flat AST with nodes numbered in preorder; `children[p]` lists p's children
/// in source order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AstTree {
    nodes: Vec<AstNode>,
    children: Vec<Vec<usize>>,
    root: usize,
}

impl AstTree {
    /// Validates arbitrary node/child-list parts and renumbers them in preorder.
    /// `nodes` carry `(kind, value, is_identifier)`.
    pub fn from_parts(
        nodes: Vec<(String, Option<String>, bool)>,
        children: Vec<Vec<usize>>,
        root: usize,
    ) -> Result<Self> {
        let n = nodes.len();
        if n == 0 {
            return Err(Error::Argument("empty AST".into()));
        }
        if children.len() > n {
            return Err(Error::Argument("child lists for missing nodes".into()));
        }
        if root >= n {
            return Err(Error::Argument(format!("root {root} is not a node")));
        }
        let child_list = |p: usize| children.get(p).map(Vec::as_slice).unwrap_or(&[]);
        let mut parent = vec![None; n];
        for p in 0..n {
            for &c in child_list(p) {
                if c >= n {
                    return Err(Error::Argument(format!("node {p} lists missing child {c}")));
                }
                if c == root || parent[c].is_some() {
                    return Err(Error::Argument(format!("node {c} has more than one parent")));
                }
                parent[c] = Some(p);
            }
        }
        // Preorder walk from the root; with single parents, unvisited nodes mean a cycle
        // or a disconnected piece.
        let mut order = Vec::with_capacity(n);
        let mut stack = vec![root];
        while let Some(p) = stack.pop() {
            order.push(p);
            stack.extend(child_list(p).iter().rev());
        }
        if order.len() != n {
            return Err(Error::Argument("AST has cycles or nodes unreachable from the root".into()));
        }
        let mut new_id = vec![0; n];
        for (i, &old) in order.iter().enumerate() {
            new_id[old] = i;
        }
        let mut out_nodes = Vec::with_capacity(n);
        let mut out_children = Vec::with_capacity(n);
        let mut terminal_rank = 0;
        for &old in &order {
            let (kind, value, is_identifier) = &nodes[old];
            let kids = child_list(old);
            if kind.is_empty() {
                return Err(Error::Argument(format!("node {old} has an empty kind")));
            }
            match (value, kids.is_empty()) {
                (Some(_), false) => {
                    return Err(Error::Argument(format!("terminal {kind:?} has children")));
                }
                (None, true) => {
                    return Err(Error::Argument(format!("non-terminal {kind:?} has no children")));
                }
                _ => {}
            }
            let source_order = value.as_ref().map(|_| {
                terminal_rank += 1;
                terminal_rank - 1
            });
            out_nodes.push(AstNode {
                kind: kind.clone(),
                value: value.clone(),
                is_identifier: *is_identifier,
                source_order,
            });
            out_children.push(kids.iter().map(|&c| new_id[c]).collect());
        }
        Ok(Self {
            nodes: out_nodes,
            children: out_children,
            root: 0,
        })
    }

    pub fn from_raw(raw: &RawAst) -> Result<Self> {
        let mut nodes = Vec::new();
        let mut children = Vec::new();
        fn flatten(
            r: &RawAst,
            nodes: &mut Vec<(String, Option<String>, bool)>,
            children: &mut Vec<Vec<usize>>,
        ) -> usize {
            let id = nodes.len();
            nodes.push((r.kind.clone(), r.value.clone(), r.id));
            children.push(Vec::new());
            for c in &r.children {
                let cid = flatten(c, nodes, children);
                children[id].push(cid);
            }
            id
        }
        flatten(raw, &mut nodes, &mut children);
        Self::from_parts(nodes, children, 0)
    }

    pub fn to_raw(&self) -> RawAst {
        fn build(t: &AstTree, id: usize) -> RawAst {
            let n = &t.nodes[id];
            RawAst {
                kind: n.kind.clone(),
                value: n.value.clone(),
                id: n.is_identifier,
                children: t.children[id].iter().map(|&c| build(t, c)).collect(),
            }
        }
        build(self, self.root)
    }

    pub fn nodes(&self) -> &[AstNode] {
        &self.nodes
    }

    pub fn children(&self, id: usize) -> &[usize] {
        &self.children[id]
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Terminal node ids ordered by `source_order`.
    pub fn terminals(&self) -> Vec<usize> {
        let mut t: Vec<(usize, usize)> = self
            .nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| n.source_order.map(|o| (o, i)))
            .collect();
        t.sort_unstable();
        t.into_iter().map(|(_, i)| i).collect()
    }
}

pub fn encode_ast_json(tree: &AstTree) -> Vec<u8> {
    serde_json::to_vec(&tree.to_raw()).expect("AST serialization is infallible")
}

pub fn decode_ast_json(bytes: &[u8]) -> Result<AstTree> {
    let raw: RawAst = serde_json::from_slice(bytes)
        .map_err(|e| Error::parse_at(format!("byte {}", json_error_offset(bytes, &e)), e.to_string()))?;
    AstTree::from_raw(&raw).map_err(|e| Error::parse_at("ast", e.to_string()))
}
