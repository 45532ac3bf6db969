//! Directed graphs over named finite-alphabet nodes.
//!
//! Cycles are allowed, self-loops are not. Node sets are handled internally
//! as `u64` bitmasks indexed by declaration order, which caps a graph at 64
//! nodes; the models this crate works with have a handful.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

/// Bitmask over node indices.
pub type Mask = u64;

pub const MAX_NODES: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("node `{0}` has an empty alphabet")]
    EmptyAlphabet(String),
    #[error("self-loop on `{0}`")]
    SelfLoop(String),
    #[error("duplicate edge `{0} -> {1}`")]
    DuplicateEdge(String, String),
    #[error("node sets must be pairwise disjoint")]
    NotDisjoint,
    #[error("node set must be nonempty")]
    EmptySet,
    #[error("graph has {0} nodes, at most {MAX_NODES} are supported")]
    TooManyNodes(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeKind {
    Observed,
    Latent,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Observed => "observed",
            NodeKind::Latent => "latent",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub name: String,
    /// Number of values; the node ranges over `0..alphabet`.
    pub alphabet: usize,
    pub kind: NodeKind,
}

impl Node {
    pub fn new(name: impl Into<String>, alphabet: usize, kind: NodeKind) -> Self {
        Node {
            name: name.into(),
            alphabet,
            kind,
        }
    }

    pub fn observed(name: impl Into<String>, alphabet: usize) -> Self {
        Self::new(name, alphabet, NodeKind::Observed)
    }

    pub fn latent(name: impl Into<String>, alphabet: usize) -> Self {
        Self::new(name, alphabet, NodeKind::Latent)
    }

    pub fn is_observed(&self) -> bool {
        self.kind == NodeKind::Observed
    }
}

/// Orientation of a path step relative to the underlying edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// `prev -> next`
    Forward,
    /// `prev <- next`
    Backward,
}

/// A simple, not necessarily directed, path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    pub nodes: Vec<String>,
    /// `directions[i]` orients the edge between `nodes[i]` and `nodes[i + 1]`.
    pub directions: Vec<Direction>,
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, node) in self.nodes.iter().enumerate() {
            if i > 0 {
                match self.directions[i - 1] {
                    Direction::Forward => f.write_str("->")?,
                    Direction::Backward => f.write_str("<-")?,
                }
            }
            f.write_str(node)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    nodes: Vec<Node>,
    edges: Vec<(usize, usize)>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    index: HashMap<String, usize>,
}

impl Graph {
    pub fn new<S, T>(nodes: Vec<Node>, edges: impl IntoIterator<Item = (S, T)>) -> Result<Self, GraphError>
    where
        S: AsRef<str>,
        T: AsRef<str>,
    {
        if nodes.len() > MAX_NODES {
            return Err(GraphError::TooManyNodes(nodes.len()));
        }
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, node) in nodes.iter().enumerate() {
            if node.alphabet == 0 {
                return Err(GraphError::EmptyAlphabet(node.name.clone()));
            }
            if index.insert(node.name.clone(), i).is_some() {
                return Err(GraphError::DuplicateNode(node.name.clone()));
            }
        }
        let n = nodes.len();
        let mut graph = Graph {
            nodes,
            edges: Vec::new(),
            parents: vec![Vec::new(); n],
            children: vec![Vec::new(); n],
            index,
        };
        for (from, to) in edges {
            let (from, to) = (from.as_ref(), to.as_ref());
            let u = graph.id(from)?;
            let v = graph.id(to)?;
            graph.add_edge(u, v)?;
        }
        Ok(graph)
    }

    fn add_edge(&mut self, u: usize, v: usize) -> Result<(), GraphError> {
        if u == v {
            return Err(GraphError::SelfLoop(self.nodes[u].name.clone()));
        }
        if self.children[u].contains(&v) {
            return Err(GraphError::DuplicateEdge(
                self.nodes[u].name.clone(),
                self.nodes[v].name.clone(),
            ));
        }
        self.edges.push((u, v));
        self.children[u].push(v);
        self.parents[v].push(u);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    pub fn name(&self, id: usize) -> &str {
        &self.nodes[id].name
    }

    pub fn id(&self, name: &str) -> Result<usize, GraphError> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| GraphError::UnknownNode(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    /// Edges as `(parent, child)` index pairs, in insertion order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_names(&self) -> BTreeSet<(String, String)> {
        self.edges
            .iter()
            .map(|&(u, v)| (self.nodes[u].name.clone(), self.nodes[v].name.clone()))
            .collect()
    }

    pub fn parents(&self, id: usize) -> &[usize] {
        &self.parents[id]
    }

    pub fn children(&self, id: usize) -> &[usize] {
        &self.children[id]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.children[u].contains(&v)
    }

    /// Indices of observed nodes in declaration order.
    pub fn observed(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.nodes[i].is_observed()).collect()
    }

    pub fn observed_names(&self) -> Vec<String> {
        self.observed().into_iter().map(|i| self.nodes[i].name.clone()).collect()
    }

    pub fn mask_of<S: AsRef<str>>(&self, names: &[S]) -> Result<Mask, GraphError> {
        names.iter().try_fold(0, |m, s| Ok(m | 1 << self.id(s.as_ref())?))
    }

    pub fn names_of(&self, mask: Mask) -> Vec<String> {
        iter_mask(mask).map(|i| self.nodes[i].name.clone()).collect()
    }

    /// Nodes reachable from `id` along at least one edge.
    pub fn descendants_mask(&self, id: usize) -> Mask {
        self.reach(1 << id, |v| &self.children[v])
    }

    /// Nodes from which `id` is reachable along at least one edge.
    pub fn ancestors_mask(&self, id: usize) -> Mask {
        self.reach(1 << id, |v| &self.parents[v])
    }

    fn reach<'a>(&'a self, seeds: Mask, next: impl Fn(usize) -> &'a [usize]) -> Mask {
        let mut seen: Mask = 0;
        let mut stack: Vec<usize> = iter_mask(seeds).collect();
        while let Some(v) = stack.pop() {
            for &w in next(v) {
                if seen & (1 << w) == 0 {
                    seen |= 1 << w;
                    stack.push(w);
                }
            }
        }
        seen
    }

    /// Descendants of `name`, in declaration order. A node is its own
    /// descendant only when it lies on a directed cycle.
    pub fn descendants(&self, name: &str) -> Result<Vec<String>, GraphError> {
        let id = self.id(name)?;
        Ok(self.names_of(self.descendants_mask(id)))
    }

    pub fn directed_path_exists<S: AsRef<str>>(&self, from: &[S], to: &[S]) -> Result<bool, GraphError> {
        let from = self.mask_of(from)?;
        let to = self.mask_of(to)?;
        if from == 0 || to == 0 {
            return Err(GraphError::EmptySet);
        }
        if from & to != 0 {
            return Err(GraphError::NotDisjoint);
        }
        Ok(self.reach(from, |v| &self.children[v]) & to != 0)
    }

    pub fn is_on_cycle(&self, id: usize) -> bool {
        self.descendants_mask(id) & (1 << id) != 0
    }

    pub fn is_acyclic(&self) -> bool {
        self.topological_order().is_some()
    }

    /// Kahn's algorithm, smallest declared index first among ready nodes.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.len();
        let mut indegree: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut ready: BTreeSet<usize> = (0..n).filter(|&v| indegree[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = ready.pop_first() {
            order.push(v);
            for &w in &self.children[v] {
                indegree[w] -= 1;
                if indegree[w] == 0 {
                    ready.insert(w);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// Acyclicity of the subgraph induced by the nodes outside `removed`.
    pub fn is_acyclic_without(&self, removed: Mask) -> bool {
        let n = self.len();
        let keep = |v: usize| removed & (1 << v) == 0;
        let mut indegree: Vec<usize> = (0..n)
            .map(|v| self.parents[v].iter().filter(|&&p| keep(p)).count())
            .collect();
        let mut stack: Vec<usize> = (0..n).filter(|&v| keep(v) && indegree[v] == 0).collect();
        let mut visited = 0;
        while let Some(v) = stack.pop() {
            visited += 1;
            for &w in &self.children[v] {
                if keep(w) {
                    indegree[w] -= 1;
                    if indegree[w] == 0 {
                        stack.push(w);
                    }
                }
            }
        }
        visited == (0..n).filter(|&v| keep(v)).count()
    }

    /// Copy of the graph with every edge into a node of `targets` removed.
    pub fn without_incoming(&self, targets: Mask) -> Graph {
        let mut out = Graph {
            nodes: self.nodes.clone(),
            edges: Vec::new(),
            parents: vec![Vec::new(); self.len()],
            children: vec![Vec::new(); self.len()],
            index: self.index.clone(),
        };
        for &(u, v) in &self.edges {
            if targets & (1 << v) == 0 {
                out.add_edge(u, v).expect("edges of a valid graph");
            }
        }
        out
    }

    /// Whether `x` and `y` are d-separated by `z`.
    pub fn d_separated<S: AsRef<str>>(&self, x: &[S], y: &[S], z: &[S]) -> Result<bool, GraphError> {
        Ok(self.d_connecting_path(x, y, z)?.is_none())
    }

    /// A simple path between `x` and `y` that `z` does not block, if any.
    pub fn d_connecting_path<S: AsRef<str>>(
        &self,
        x: &[S],
        y: &[S],
        z: &[S],
    ) -> Result<Option<Path>, GraphError> {
        let (x, y, z) = (self.mask_of(x)?, self.mask_of(y)?, self.mask_of(z)?);
        self.d_connecting_path_masks(x, y, z)
    }

    pub fn d_separated_masks(&self, x: Mask, y: Mask, z: Mask) -> Result<bool, GraphError> {
        Ok(self.d_connecting_path_masks(x, y, z)?.is_none())
    }

    pub fn d_connecting_path_masks(&self, x: Mask, y: Mask, z: Mask) -> Result<Option<Path>, GraphError> {
        if x == 0 || y == 0 {
            return Err(GraphError::EmptySet);
        }
        if x & y != 0 || x & z != 0 || y & z != 0 {
            return Err(GraphError::NotDisjoint);
        }
        // A collider W is open iff W or one of its descendants is in z.
        let open_collider: Mask = (0..self.len())
            .filter(|&w| (self.descendants_mask(w) | 1 << w) & z != 0)
            .fold(0, |m, w| m | 1 << w);
        let mut search = PathSearch {
            graph: self,
            targets: y,
            avoid: x,
            z,
            open_collider,
            stack: Vec::new(),
            dirs: Vec::new(),
        };
        for start in iter_mask(x) {
            search.stack.push(start);
            if search.extend(start, 1 << start, None) {
                return Ok(Some(search.into_path()));
            }
            search.stack.pop();
        }
        Ok(None)
    }
}

struct PathSearch<'a> {
    graph: &'a Graph,
    targets: Mask,
    avoid: Mask,
    z: Mask,
    open_collider: Mask,
    stack: Vec<usize>,
    dirs: Vec<Direction>,
}

impl PathSearch<'_> {
    /// Depth-first over simple paths; every interior node is checked for
    /// blocking as soon as both of its edges are known.
    fn extend(&mut self, cur: usize, visited: Mask, arrived: Option<Direction>) -> bool {
        let g = self.graph;
        let steps = g.children[cur]
            .iter()
            .map(|&w| (w, Direction::Forward))
            .chain(g.parents[cur].iter().map(|&w| (w, Direction::Backward)));
        for (next, dir) in steps {
            if visited & (1 << next) != 0 {
                continue;
            }
            if let Some(arrived) = arrived {
                let collider = arrived == Direction::Forward && dir == Direction::Backward;
                let blocked = if collider {
                    self.open_collider & (1 << cur) == 0
                } else {
                    self.z & (1 << cur) != 0
                };
                if blocked {
                    continue;
                }
            }
            self.stack.push(next);
            self.dirs.push(dir);
            if self.targets & (1 << next) != 0 {
                return true;
            }
            // The tail of a path re-entering `x` is itself a candidate from
            // that source, so sources are never interior nodes.
            if self.avoid & (1 << next) == 0 && self.extend(next, visited | 1 << next, Some(dir)) {
                return true;
            }
            self.stack.pop();
            self.dirs.pop();
        }
        false
    }

    fn into_path(self) -> Path {
        Path {
            nodes: self.stack.iter().map(|&i| self.graph.name(i).to_string()).collect(),
            directions: self.dirs,
        }
    }
}

pub fn iter_mask(mask: Mask) -> impl Iterator<Item = usize> {
    let mut m = mask;
    std::iter::from_fn(move || {
        if m == 0 {
            None
        } else {
            let i = m.trailing_zeros() as usize;
            m &= m - 1;
            Some(i)
        }
    })
}
