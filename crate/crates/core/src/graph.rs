//! Dependency graph over translation units: construction from resolved
//! references, SCC collapsing for mutual recursion, observed function-type
//! edges, deterministic dependency-order iteration, and immediate-parent
//! slices.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::ast::{ProgramAst, TranslationUnit, UnitId, UnitKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Syntactic,
    FunctionTypeObserved,
}

/// A node is either a single unit or a group of mutually recursive functions
/// collapsed into one translation step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: UnitId,
    /// Members in deterministic order; singleton for ordinary nodes.
    pub members: Vec<UnitId>,
    pub kind: UnitKind,
    pub file_order: (usize, usize),
}

impl Node {
    pub fn is_group(&self) -> bool {
        self.members.len() > 1
    }
}

/// Directed edges point from dependency to dependent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyGraph {
    pub nodes: Vec<Node>,
    pub edges: BTreeSet<(UnitId, UnitId, EdgeKind)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownUnit(pub UnitId);

impl core::fmt::Display for UnknownUnit {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "unknown unit `{}`", self.0)
    }
}

impl DependencyGraph {
    /// Node containing `unit` (a member lookup for group nodes).
    pub fn node_of(&self, unit: &UnitId) -> Option<&Node> {
        self.nodes
            .iter()
            .find(|n| n.id == *unit || n.members.contains(unit))
    }

    pub fn edge_pairs(&self) -> impl Iterator<Item = (&UnitId, &UnitId)> {
        self.edges.iter().map(|(a, b, _)| (a, b))
    }

    /// Dependencies (immediate parents) of a node, deduplicated.
    pub fn parents(&self, id: &UnitId) -> BTreeSet<UnitId> {
        self.edges
            .iter()
            .filter(|(_, to, _)| to == id)
            .map(|(from, _, _)| from.clone())
            .collect()
    }
}

/// Build the dependency graph from resolved references. Edges point from
/// dependency to dependent; strongly connected components of mutually
/// recursive functions collapse into group nodes.
pub fn build_graph(
    ast: &ProgramAst,
    references: &BTreeMap<UnitId, BTreeSet<UnitId>>,
) -> DependencyGraph {
    // references: unit -> set of units it depends on.
    let unit_index: BTreeMap<&UnitId, &TranslationUnit> =
        ast.units.iter().map(|u| (&u.id, u)).collect();

    let sccs = tarjan_sccs(references);

    // Map every unit to its component representative.
    let mut rep_of: BTreeMap<UnitId, UnitId> = BTreeMap::new();
    let mut nodes: Vec<Node> = Vec::new();
    for comp in &sccs {
        let mut members = comp.clone();
        members.sort();
        // Representative: the member earliest in file order.
        let rep = members
            .iter()
            .min_by_key(|id| unit_index.get(id).map(|u| u.file_order).unwrap_or((usize::MAX, 0)))
            .cloned()
            .expect("non-empty component");
        for m in &members {
            rep_of.insert(m.clone(), rep.clone());
        }
        let u = unit_index.get(&rep).expect("component member is a unit");
        nodes.push(Node {
            id: rep.clone(),
            members,
            kind: u.kind,
            file_order: u.file_order,
        });
    }
    nodes.sort_by_key(|n| n.file_order);

    let mut edges = BTreeSet::new();
    for (dependent, deps) in references {
        let to = rep_of.get(dependent).cloned();
        for dep in deps {
            let from = rep_of.get(dep).cloned();
            if let (Some(from), Some(to)) = (from.clone(), to.clone()) {
                if from != to {
                    edges.insert((from, to, EdgeKind::Syntactic));
                }
            }
        }
    }
    DependencyGraph { nodes, edges }
}

/// Observed function-pointer bindings: for every function-pointer parameter
/// seen bound to function `g` at runtime, adds `g -> user` if absent.
/// Monotone: the edge set only grows; nodes are unchanged.
pub fn add_observed_function_edges(
    graph: &DependencyGraph,
    bindings: &BTreeMap<String, BTreeSet<String>>,
) -> DependencyGraph {
    let mut out = graph.clone();
    for (user_fn, bound) in bindings {
        let user_id = UnitId::new(UnitKind::Function, user_fn);
        let Some(user_node) = graph.node_of(&user_id) else {
            continue;
        };
        for g in bound {
            let g_id = UnitId::new(UnitKind::Function, g);
            let Some(g_node) = graph.node_of(&g_id) else {
                continue;
            };
            if g_node.id != user_node.id {
                out.edges.insert((
                    g_node.id.clone(),
                    user_node.id.clone(),
                    EdgeKind::FunctionTypeObserved,
                ));
            }
        }
    }
    out
}

/// Deterministic topological order: every node after all its dependencies,
/// ties broken by (kind rank: StructDef < Typedef < Macro < GlobalAssign <
/// Function, then file order).
pub fn iterate_dependency_order(graph: &DependencyGraph) -> Vec<UnitId> {
    let mut indegree: BTreeMap<&UnitId, usize> = graph.nodes.iter().map(|n| (&n.id, 0)).collect();
    let mut dependents: BTreeMap<&UnitId, Vec<&UnitId>> = BTreeMap::new();
    let mut seen_pairs: BTreeSet<(&UnitId, &UnitId)> = BTreeSet::new();
    for (from, to, _) in &graph.edges {
        if seen_pairs.insert((from, to)) {
            *indegree.get_mut(to).expect("edge endpoint is a node") += 1;
            dependents.entry(from).or_default().push(to);
        }
    }
    let node_meta: BTreeMap<&UnitId, (u8, (usize, usize))> = graph
        .nodes
        .iter()
        .map(|n| (&n.id, (n.kind.rank(), n.file_order)))
        .collect();

    let mut ready: Vec<&UnitId> = indegree
        .iter()
        .filter(|(_, d)| **d == 0)
        .map(|(id, _)| *id)
        .collect();
    let sort_key = |id: &UnitId| node_meta.get(id).copied().unwrap_or((u8::MAX, (0, 0)));
    ready.sort_by_key(|id| sort_key(id));

    let mut out = Vec::new();
    while !ready.is_empty() {
        let next = ready.remove(0);
        out.push(next.clone());
        if let Some(deps) = dependents.get(next) {
            for d in deps {
                let entry = indegree.get_mut(d).expect("node");
                *entry -= 1;
                if *entry == 0 {
                    ready.push(d);
                }
            }
        }
        ready.sort_by_key(|id| sort_key(id));
    }
    out
}

/// Immediate dependencies of `unit` (not the transitive closure), in
/// deterministic order.
pub fn dependency_slice(
    graph: &DependencyGraph,
    unit: &UnitId,
) -> Result<Vec<UnitId>, UnknownUnit> {
    let node = graph.node_of(unit).ok_or_else(|| UnknownUnit(unit.clone()))?;
    Ok(graph.parents(&node.id).into_iter().collect())
}

/// Tarjan's strongly connected components over the reference relation.
/// Input maps dependent -> dependencies; SCCs are returned in deterministic
/// order.
fn tarjan_sccs(references: &BTreeMap<UnitId, BTreeSet<UnitId>>) -> Vec<Vec<UnitId>> {
    struct State<'a> {
        refs: &'a BTreeMap<UnitId, BTreeSet<UnitId>>,
        index: BTreeMap<&'a UnitId, usize>,
        lowlink: BTreeMap<&'a UnitId, usize>,
        on_stack: BTreeSet<&'a UnitId>,
        stack: Vec<&'a UnitId>,
        next: usize,
        out: Vec<Vec<UnitId>>,
    }
    fn strongconnect<'a>(v: &'a UnitId, st: &mut State<'a>) {
        st.index.insert(v, st.next);
        st.lowlink.insert(v, st.next);
        st.next += 1;
        st.stack.push(v);
        st.on_stack.insert(v);
        if let Some(deps) = st.refs.get(v) {
            for w in deps {
                if !st.refs.contains_key(w) {
                    continue;
                }
                if !st.index.contains_key(w) {
                    strongconnect(w, st);
                    let wl = st.lowlink[w];
                    let vl = st.lowlink[&v];
                    if wl < vl {
                        st.lowlink.insert(v, wl);
                    }
                } else if st.on_stack.contains(w) {
                    let wi = st.index[w];
                    let vl = st.lowlink[&v];
                    if wi < vl {
                        st.lowlink.insert(v, wi);
                    }
                }
            }
        }
        if st.lowlink[&v] == st.index[&v] {
            let mut comp = Vec::new();
            loop {
                let w = st.stack.pop().expect("stack non-empty");
                st.on_stack.remove(w);
                comp.push(w.clone());
                if w == v {
                    break;
                }
            }
            st.out.push(comp);
        }
    }
    let mut st = State {
        refs: references,
        index: BTreeMap::new(),
        lowlink: BTreeMap::new(),
        on_stack: BTreeSet::new(),
        stack: Vec::new(),
        next: 0,
        out: Vec::new(),
    };
    for v in references.keys() {
        if !st.index.contains_key(v) {
            strongconnect(v, &mut st);
        }
    }
    st.out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn uid(name: &str) -> UnitId {
        UnitId::new(UnitKind::Function, name)
    }

    fn refs_of(pairs: &[(&str, &[&str])]) -> BTreeMap<UnitId, BTreeSet<UnitId>> {
        pairs
            .iter()
            .map(|(n, deps)| (uid(n), deps.iter().map(|d| uid(d)).collect()))
            .collect()
    }

    fn ast_with_functions(names: &[&str]) -> ProgramAst {
        use crate::ast::{FunctionDef, TranslationUnit, UnitDecl};
        let units = names
            .iter()
            .enumerate()
            .map(|(i, n)| TranslationUnit {
                id: uid(n),
                kind: UnitKind::Function,
                name: (*n).into(),
                source_text: alloc::string::String::new(),
                decl: UnitDecl::Function(FunctionDef {
                    name: (*n).into(),
                    params: vec![],
                    ret: crate::ctype::CType::Void,
                    body: vec![],
                }),
                file_order: (0, i),
            })
            .collect();
        ProgramAst {
            units,
            entry_point: None,
        }
    }

    #[test]
    fn single_function_no_calls() {
        let ast = ast_with_functions(&["a"]);
        let refs = refs_of(&[("a", &[])]);
        let g = build_graph(&ast, &refs);
        assert_eq!(g.nodes.len(), 1);
        assert_eq!(g.edges.len(), 0);
    }

    #[test]
    fn mutual_recursion_groups() {
        let ast = ast_with_functions(&["a", "b"]);
        let refs = refs_of(&[("a", &["b"]), ("b", &["a"])]);
        let g = build_graph(&ast, &refs);
        assert_eq!(g.nodes.len(), 1);
        assert!(g.nodes[0].is_group());
        assert_eq!(g.nodes[0].members.len(), 2);
    }

    #[test]
    fn chain_forces_order() {
        let ast = ast_with_functions(&["a", "b", "c"]);
        let refs = refs_of(&[("a", &[]), ("b", &["a"]), ("c", &["b"])]);
        let g = build_graph(&ast, &refs);
        let order = iterate_dependency_order(&g);
        assert_eq!(order, vec![uid("a"), uid("b"), uid("c")]);
    }

    #[test]
    fn observed_edges_grow_monotonically() {
        let ast = ast_with_functions(&["f", "kernel1"]);
        let refs = refs_of(&[("f", &[]), ("kernel1", &[])]);
        let g = build_graph(&ast, &refs);
        let mut bindings = BTreeMap::new();
        bindings.insert(
            alloc::string::String::from("f"),
            [alloc::string::String::from("kernel1")].into_iter().collect(),
        );
        let g2 = add_observed_function_edges(&g, &bindings);
        assert_eq!(g2.nodes, g.nodes);
        assert!(g2.edges.len() == g.edges.len() + 1);
        assert!(g2
            .edges
            .contains(&(uid("kernel1"), uid("f"), EdgeKind::FunctionTypeObserved)));
        // Unknown names are ignored, never panics.
        let g3 = add_observed_function_edges(&g2, &bindings);
        assert_eq!(g3, g2);
    }

    #[test]
    fn empty_graph_empty_order() {
        let g = DependencyGraph {
            nodes: vec![],
            edges: BTreeSet::new(),
        };
        assert!(iterate_dependency_order(&g).is_empty());
    }
}
