//! Undirected connected graphs, vertex sets and the graph-theoretic helpers
//! used throughout the crate.
//!
//! Vertices are numbered `0..r` internally. Everything that crosses the I/O
//! boundary (JSON, edge lists, display, error messages) is 1-based.

use std::collections::VecDeque;
use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest graph accepted by [`enumerate_independent_sets`].
pub const ENUMERATION_LIMIT: usize = 24;

/// An immutable, simple, undirected and connected graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphSpec {
    name: Option<String>,
    neighbours: Vec<Vec<usize>>,
    adjacency: Vec<bool>,
    edge_count: usize,
}

impl GraphSpec {
    /// Builds a graph on `vertex_count` vertices from 0-based edges.
    pub fn new(vertex_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if vertex_count == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut adjacency = vec![false; vertex_count * vertex_count];
        let mut neighbours = vec![Vec::new(); vertex_count];
        for &(i, j) in edges {
            for v in [i, j] {
                if v >= vertex_count {
                    return Err(Error::VertexOutOfRange {
                        vertex: v + 1,
                        count: vertex_count,
                    });
                }
            }
            if i == j {
                return Err(Error::SelfLoop(i + 1));
            }
            if adjacency[i * vertex_count + j] {
                return Err(Error::DuplicateEdge(i.min(j) + 1, i.max(j) + 1));
            }
            adjacency[i * vertex_count + j] = true;
            adjacency[j * vertex_count + i] = true;
            neighbours[i].push(j);
            neighbours[j].push(i);
        }
        for list in &mut neighbours {
            list.sort_unstable();
        }
        let graph = GraphSpec {
            name: None,
            neighbours,
            adjacency,
            edge_count: edges.len(),
        };
        let components = graph.component_count();
        if components != 1 {
            return Err(Error::Disconnected { components });
        }
        Ok(graph)
    }

    /// Builds a graph from 1-based edges, as they appear in input files.
    pub fn from_one_based(vertex_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut shifted = Vec::with_capacity(edges.len());
        for &(i, j) in edges {
            if i == 0 || j == 0 {
                return Err(Error::VertexOutOfRange {
                    vertex: 0,
                    count: vertex_count,
                });
            }
            shifted.push((i - 1, j - 1));
        }
        Self::new(vertex_count, &shifted)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    /// Name if one was given, otherwise a short structural description.
    pub fn label(&self) -> String {
        match &self.name {
            Some(n) => n.clone(),
            None => format!("graph(r={}, |E|={})", self.vertex_count(), self.edge_count),
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.neighbours.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbours[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbours.iter().map(Vec::len).collect()
    }

    pub fn neighbours(&self, i: usize) -> &[usize] {
        &self.neighbours[i]
    }

    pub fn is_adjacent(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.vertex_count() + j]
    }

    /// Edges as 0-based pairs `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbours
            .iter()
            .enumerate()
            .flat_map(|(i, ns)| ns.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    /// Number of edges of the subgraph induced by `set`.
    pub fn induced_edge_count(&self, set: &VertexSet) -> usize {
        let m = set.members();
        let mut count = 0;
        for (k, &i) in m.iter().enumerate() {
            for &j in &m[k + 1..] {
                if self.is_adjacent(i, j) {
                    count += 1;
                }
            }
        }
        count
    }

    fn component_count(&self) -> usize {
        let r = self.vertex_count();
        let mut seen = vec![false; r];
        let mut components = 0;
        for start in 0..r {
            if seen[start] {
                continue;
            }
            components += 1;
            seen[start] = true;
            let mut queue = VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                for &w in &self.neighbours[v] {
                    if !seen[w] {
                        seen[w] = true;
                        queue.push_back(w);
                    }
                }
            }
        }
        components
    }

    /// Breadth-first distances from `source`.
    fn distances_from(&self, source: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.vertex_count()];
        dist[source] = 0;
        let mut queue = VecDeque::from([source]);
        while let Some(v) = queue.pop_front() {
            for &w in &self.neighbours[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Longest shortest-path length between two vertices.
    pub fn diameter(&self) -> usize {
        (0..self.vertex_count())
            .map(|v| self.distances_from(v).into_iter().max().unwrap_or(0))
            .max()
            .unwrap_or(0)
    }

    /// `L = D - A`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let r = self.vertex_count();
        DMatrix::from_fn(r, r, |i, j| {
            if i == j {
                self.degree(i) as f64
            } else if self.is_adjacent(i, j) {
                -1.0
            } else {
                0.0
            }
        })
    }

    pub fn to_json(&self) -> GraphJson {
        GraphJson {
            vertices: self.vertex_count(),
            edges: self.edges().map(|(i, j)| [i + 1, j + 1]).collect(),
        }
    }
}

impl fmt::Display for GraphSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// The on-disk JSON form of a graph, with 1-based vertices.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct GraphJson {
    pub vertices: usize,
    pub edges: Vec<[usize; 2]>,
}

impl TryFrom<GraphJson> for GraphSpec {
    type Error = Error;

    fn try_from(value: GraphJson) -> Result<Self> {
        let edges: Vec<_> = value.edges.iter().map(|e| (e[0], e[1])).collect();
        GraphSpec::from_one_based(value.vertices, &edges)
    }
}

/// A set of vertices, stored sorted and 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct VertexSet(Vec<usize>);

impl VertexSet {
    /// Rejects duplicate members.
    pub fn new(mut members: Vec<usize>) -> Result<Self> {
        members.sort_unstable();
        if let Some(w) = members.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateVertex(w[0] + 1));
        }
        Ok(VertexSet(members))
    }

    pub fn from_one_based(members: &[usize]) -> Result<Self> {
        if members.contains(&0) {
            return Err(Error::VertexOutOfRange {
                vertex: 0,
                count: 0,
            });
        }
        Self::new(members.iter().map(|v| v - 1).collect())
    }

    pub fn empty() -> Self {
        VertexSet(Vec::new())
    }

    pub fn full(r: usize) -> Self {
        VertexSet((0..r).collect())
    }

    pub(crate) fn from_sorted_unchecked(members: Vec<usize>) -> Self {
        VertexSet(members)
    }

    pub fn members(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.0.binary_search(&v).is_ok()
    }

    pub fn is_subset_of(&self, other: &VertexSet) -> bool {
        self.0.iter().all(|&v| other.contains(v))
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.0.iter().map(|v| v + 1).collect()
    }

    fn check_range(&self, r: usize) -> Result<()> {
        match self.0.last() {
            Some(&v) if v >= r => Err(Error::VertexOutOfRange {
                vertex: v + 1,
                count: r,
            }),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for VertexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, v) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", v + 1)?;
        }
        f.write_str("}")
    }
}

impl Serialize for VertexSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.one_based().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for VertexSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<usize>::deserialize(d)?;
        VertexSet::from_one_based(&raw).map_err(serde::de::Error::custom)
    }
}

/// True iff no two members of `set` are adjacent.
pub fn is_independent_set(g: &GraphSpec, set: &VertexSet) -> Result<bool> {
    set.check_range(g.vertex_count())?;
    let m = set.members();
    for (k, &i) in m.iter().enumerate() {
        if m[k + 1..].iter().any(|&j| g.is_adjacent(i, j)) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Identifies vertices `i` and `j` (0-based), which must have identical
/// neighbourhoods. The merged vertex keeps the smaller index and the
/// vertices above the larger one shift down by one.
pub fn reduce_graph(g: &GraphSpec, i: usize, j: usize) -> Result<GraphSpec> {
    let r = g.vertex_count();
    for v in [i, j] {
        if v >= r {
            return Err(Error::VertexOutOfRange {
                vertex: v + 1,
                count: r,
            });
        }
    }
    if i == j || g.neighbours(i) != g.neighbours(j) {
        return Err(Error::NeighbourhoodMismatch { i: i + 1, j: j + 1 });
    }
    let (keep, drop) = (i.min(j), i.max(j));
    let relabel = |v: usize| if v > drop { v - 1 } else { v };
    let edges: Vec<_> = g
        .edges()
        .filter(|&(u, v)| u != drop && v != drop)
        .map(|(u, v)| (relabel(u), relabel(v)))
        .collect();
    let reduced = GraphSpec::new(r - 1, &edges)?;
    Ok(match g.name() {
        Some(n) => reduced.with_name(format!("{n}/{{{}+{}}}", keep + 1, drop + 1)),
        None => reduced,
    })
}

/// Eigenvalues of the graph Laplacian in ascending order.
pub fn laplacian_spectrum(g: &GraphSpec) -> Vec<f64> {
    let mut values: Vec<f64> = g.laplacian().symmetric_eigen().eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

/// Second-smallest Laplacian eigenvalue; zero for a single vertex.
pub fn algebraic_connectivity(g: &GraphSpec) -> f64 {
    laplacian_spectrum(g).get(1).copied().unwrap_or(0.0)
}

/// All non-empty independent sets (or only the maximal ones), sorted
/// lexicographically as increasing vertex lists.
pub fn enumerate_independent_sets(g: &GraphSpec, maximal_only: bool) -> Result<Vec<VertexSet>> {
    let r = g.vertex_count();
    if r > ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            what: "independent-set enumeration",
            size: r as u128,
            limit: ENUMERATION_LIMIT as u128,
        });
    }
    let masks: Vec<u32> = (0..r)
        .map(|i| g.neighbours(i).iter().fold(0u32, |m, &j| m | (1 << j)))
        .collect();
    let mut out = Vec::new();
    let mut current = Vec::new();
    // Depth-first over increasing vertices yields lexicographic order.
    fn visit(
        start: usize,
        blocked: u32,
        masks: &[u32],
        current: &mut Vec<usize>,
        maximal_only: bool,
        out: &mut Vec<VertexSet>,
    ) {
        let r = masks.len();
        for v in start..r {
            if blocked & (1 << v) != 0 {
                continue;
            }
            current.push(v);
            let now_blocked = blocked | masks[v] | (1 << v);
            let mut chosen = 0u32;
            for &c in current.iter() {
                chosen |= 1 << c;
            }
            let extendable = (0..r).any(|w| now_blocked & (1 << w) == 0);
            if !maximal_only || !extendable_outside(chosen, masks) {
                out.push(VertexSet::from_sorted_unchecked(current.clone()));
            }
            if extendable {
                visit(v + 1, now_blocked, masks, current, maximal_only, out);
            }
            current.pop();
        }
    }
    // A set is maximal iff every other vertex has a neighbour inside it.
    fn extendable_outside(chosen: u32, masks: &[u32]) -> bool {
        (0..masks.len()).any(|w| chosen & (1 << w) == 0 && masks[w] & chosen == 0)
    }
    visit(0, 0, &masks, &mut current, maximal_only, &mut out);
    Ok(out)
}

/// Complete graph `K_r`.
pub fn complete(r: usize) -> Result<GraphSpec> {
    let mut edges = Vec::new();
    for i in 0..r {
        for j in i + 1..r {
            edges.push((i, j));
        }
    }
    Ok(GraphSpec::new(r, &edges)?.with_name(format!("K{r}")))
}

/// Cycle `C_r`, `i ~ i+1 mod r`.
pub fn cycle(r: usize) -> Result<GraphSpec> {
    if r < 3 {
        return Err(Error::InvalidParameter(format!("cycle needs at least 3 vertices, got {r}")));
    }
    let edges: Vec<_> = (0..r).map(|i| (i, (i + 1) % r)).collect();
    Ok(GraphSpec::new(r, &edges)?.with_name(format!("C{r}")))
}

/// Star `S_k = K_{1,k}` with centre vertex 1 and leaves `2..=k+1`.
pub fn star(leaves: usize) -> Result<GraphSpec> {
    if leaves == 0 {
        return Err(Error::InvalidParameter("star needs at least one leaf".into()));
    }
    let edges: Vec<_> = (1..=leaves).map(|j| (0, j)).collect();
    Ok(GraphSpec::new(leaves + 1, &edges)?.with_name(format!("S{leaves}")))
}

/// Path `P_r`.
pub fn path(r: usize) -> Result<GraphSpec> {
    let edges: Vec<_> = (1..r).map(|i| (i - 1, i)).collect();
    Ok(GraphSpec::new(r, &edges)?.with_name(format!("P{r}")))
}

/// Complete bipartite `K_{r,s}` with parts `{1..r}` and `{r+1..r+s}`.
pub fn complete_bipartite(r: usize, s: usize) -> Result<GraphSpec> {
    if r == 0 || s == 0 {
        return Err(Error::InvalidParameter("bipartite parts must be non-empty".into()));
    }
    let mut edges = Vec::new();
    for i in 0..r {
        for j in r..r + s {
            edges.push((i, j));
        }
    }
    Ok(GraphSpec::new(r + s, &edges)?.with_name(format!("K{r},{s}")))
}

/// The Petersen graph: outer 5-cycle 1..5, inner pentagram 6..10, spokes.
pub fn petersen() -> Result<GraphSpec> {
    let mut edges = Vec::new();
    for i in 0..5 {
        edges.push((i, (i + 1) % 5));
        edges.push((5 + i, 5 + (i + 2) % 5));
        edges.push((i, 5 + i));
    }
    Ok(GraphSpec::new(10, &edges)?.with_name("Petersen"))
}

/// Resolves `K<r>`, `C<r>`, `S<k>`, `P<r>`, `K<r>,<s>` and `Petersen`.
/// Returns `None` when `name` is not a built-in.
pub fn builtin(name: &str) -> Option<Result<GraphSpec>> {
    let name = name.trim();
    if name.eq_ignore_ascii_case("petersen") {
        return Some(petersen());
    }
    let (head, rest) = name.split_at(name.chars().next()?.len_utf8());
    let parse = |s: &str| s.parse::<usize>().ok();
    match head {
        "K" => match rest.split_once(',') {
            Some((a, b)) => Some(complete_bipartite(parse(a)?, parse(b)?)),
            None => Some(complete(parse(rest)?)),
        },
        "C" => Some(cycle(parse(rest)?)),
        "S" => Some(star(parse(rest)?)),
        "P" => Some(path(parse(rest)?)),
        _ => None,
    }
}

/// Parses the edge-list text format: one `i j` pair per line, 1-based,
/// `#` starts a comment. The vertex count is the largest index seen.
pub fn parse_edge_list(text: &str) -> Result<GraphSpec> {
    let mut edges = Vec::new();
    let mut max_vertex = 0;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<_> = line.split_whitespace().collect();
        let bad = || Error::GraphParse(format!("line {}: expected `i j`, got `{raw}`", lineno + 1));
        if fields.len() != 2 {
            return Err(bad());
        }
        let i: usize = fields[0].parse().map_err(|_| bad())?;
        let j: usize = fields[1].parse().map_err(|_| bad())?;
        max_vertex = max_vertex.max(i).max(j);
        edges.push((i, j));
    }
    GraphSpec::from_one_based(max_vertex, &edges)
}

pub fn parse_json(text: &str) -> Result<GraphSpec> {
    let raw: GraphJson = serde_json::from_str(text).map_err(|e| Error::GraphParse(e.to_string()))?;
    GraphSpec::try_from(raw)
}

/// Resolves a graph argument: built-in names first, then a file path
/// (`.json` files as JSON, anything else as an edge list).
pub fn resolve(spec: &str) -> Result<GraphSpec> {
    if let Some(g) = builtin(spec) {
        return g;
    }
    let path = Path::new(spec);
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::GraphParse(format!("`{spec}` is neither a built-in graph nor a readable file: {e}")))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or(spec).to_string();
    let g = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        parse_json(&text)?
    } else {
        parse_edge_list(&text)?
    };
    Ok(g.with_name(stem))
}
