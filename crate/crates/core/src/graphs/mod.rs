//! MaxCut instances: cubic graph generators, the worst-case catalogue,
//! edge-neighbourhood classification and brute-force cut oracles.

mod planarity;

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::seed::rng_from_seed;
use crate::statevector::{DiagonalCost, MAX_QUBITS};

pub use planarity::is_planar;

/// Simple undirected graph. Edges are stored as `(u, v)` with `u < v`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphJson", into = "GraphJson")]
pub struct Graph {
    n_vertices: usize,
    edges: Vec<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    n: usize,
    edges: Vec<[usize; 2]>,
}

impl TryFrom<GraphJson> for Graph {
    type Error = Error;

    fn try_from(raw: GraphJson) -> Result<Self> {
        Graph::new(raw.n, raw.edges.into_iter().map(|[u, v]| (u, v)))
    }
}

impl From<Graph> for GraphJson {
    fn from(g: Graph) -> Self {
        GraphJson {
            n: g.n_vertices,
            edges: g.edges.into_iter().map(|(u, v)| [u, v]).collect(),
        }
    }
}

impl Graph {
    /// Validates and normalises an edge list. Edge order is preserved.
    pub fn new(n_vertices: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut list = Vec::new();
        for (u, v) in edges {
            if u >= n_vertices || v >= n_vertices {
                return Err(invalid(format!(
                    "edge ({u}, {v}) references a vertex outside 0..{n_vertices}"
                )));
            }
            if u == v {
                return Err(invalid(format!("self-loop at vertex {u}")));
            }
            let e = (u.min(v), u.max(v));
            if !seen.insert(e) {
                return Err(invalid(format!("duplicate edge ({}, {})", e.0, e.1)));
            }
            list.push(e);
        }
        Ok(Self {
            n_vertices,
            edges: list,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbours(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_vertices];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n_vertices];
        for &(u, v) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }

    pub fn is_cubic(&self) -> bool {
        self.degrees().iter().all(|&d| d == 3)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        let e = (u.min(v), u.max(v));
        self.edges.contains(&e)
    }

    /// Number of edges cut by the assignment whose bit `i` is vertex `i`.
    pub fn cut_value(&self, assignment: usize) -> usize {
        self.edges
            .iter()
            .filter(|&&(u, v)| (assignment >> u ^ assignment >> v) & 1 == 1)
            .count()
    }

    /// Length of the shortest cycle, `None` for forests.
    pub fn girth(&self) -> Option<usize> {
        let adj = self.neighbours();
        let mut best: Option<usize> = None;
        for root in 0..self.n_vertices {
            let mut dist = vec![usize::MAX; self.n_vertices];
            let mut parent = vec![usize::MAX; self.n_vertices];
            dist[root] = 0;
            let mut queue = VecDeque::from([root]);
            while let Some(x) = queue.pop_front() {
                for &y in &adj[x] {
                    if dist[y] == usize::MAX {
                        dist[y] = dist[x] + 1;
                        parent[y] = x;
                        queue.push_back(y);
                    } else if parent[x] != y {
                        let len = dist[x] + dist[y] + 1;
                        best = Some(best.map_or(len, |b| b.min(len)));
                    }
                }
            }
        }
        best
    }

    /// Canonical edge ordering (lexicographic), used for persistence.
    pub fn sorted(mut self) -> Self {
        self.edges.sort_unstable();
        self
    }

    fn from_lcf(n: usize, shifts: &[isize]) -> Self {
        let mut edges: BTreeSet<(usize, usize)> = (0..n)
            .map(|i| {
                let j = (i + 1) % n;
                (i.min(j), i.max(j))
            })
            .collect();
        for i in 0..n {
            let j = (i as isize + shifts[i % shifts.len()]).rem_euclid(n as isize) as usize;
            edges.insert((i.min(j), i.max(j)));
        }
        Self::new(n, edges).expect("LCF notation yields a simple graph")
    }
}

/// `K_n`.
pub fn complete_graph(n: usize) -> Graph {
    let edges = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v)));
    Graph::new(n, edges).expect("complete graph is simple")
}

/// `K_{a,b}` with the first part on vertices `0..a`.
pub fn complete_bipartite(a: usize, b: usize) -> Graph {
    let edges = (0..a).flat_map(|u| (a..a + b).map(move |v| (u, v)));
    Graph::new(a + b, edges).expect("complete bipartite graph is simple")
}

pub fn cycle_graph(n: usize) -> Graph {
    Graph::new(n, (0..n).map(|i| (i, (i + 1) % n))).expect("cycle is simple for n >= 3")
}

/// Generalised Petersen graph `GP(n, k)`: outer cycle `0..n`, spokes to
/// `n..2n`, inner vertices joined with step `k`.
pub fn generalized_petersen(n: usize, k: usize) -> Result<Graph> {
    if n < 3 || k == 0 || 2 * k >= n {
        return Err(invalid(format!(
            "GP({n}, {k}) needs n >= 3 and 1 <= k < n/2"
        )));
    }
    let mut edges = Vec::with_capacity(3 * n);
    for i in 0..n {
        edges.push((i, (i + 1) % n));
        edges.push((i, n + i));
        edges.push((n + i, n + (i + k) % n));
    }
    Graph::new(2 * n, edges)
}

pub fn petersen_graph() -> Graph {
    generalized_petersen(5, 2).expect("GP(5,2) is valid")
}

/// The 3-cube `Q3`.
pub fn cube_graph() -> Graph {
    let edges = (0..8usize).flat_map(|u| {
        (0..3)
            .map(move |b| (u, u ^ (1 << b)))
            .filter(|&(u, v)| u < v)
    });
    Graph::new(8, edges).expect("cube is simple")
}

/// Random cubic graph from the pairing (configuration) model; any draw with
/// a loop or a repeated edge is discarded and the whole pairing redrawn.
pub fn gen_random_cubic(n: usize, seed: u64) -> Result<Graph> {
    if n < 4 || n % 2 == 1 {
        return Err(invalid(format!(
            "cubic graphs need an even vertex count >= 4, got {n}"
        )));
    }
    const MAX_ATTEMPTS: usize = 1_000_000;
    let mut rng = rng_from_seed(seed);
    let mut points: Vec<usize> = (0..3 * n).collect();
    for _ in 0..MAX_ATTEMPTS {
        points.shuffle(&mut rng);
        let mut edges = BTreeSet::new();
        let ok = points.chunks_exact(2).all(|pair| {
            let (u, v) = (pair[0] / 3, pair[1] / 3);
            u != v && edges.insert((u.min(v), u.max(v)))
        });
        if ok {
            return Graph::new(n, edges);
        }
    }
    Err(Error::Resource(format!(
        "pairing model did not produce a simple graph in {MAX_ATTEMPTS} attempts"
    )))
}

/// Cost diagonal `values[z]` = number of edges cut by assignment `z`.
pub fn maxcut_cost(graph: &Graph) -> Result<DiagonalCost> {
    let n = graph.n_vertices();
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::Resource(format!(
            "{n} vertices cannot be mapped onto 1..={MAX_QUBITS} qubits"
        )));
    }
    DiagonalCost::new(
        (0..1usize << n)
            .map(|z| graph.cut_value(z) as f64)
            .collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BruteForceOptions {
    /// Maximum number of maximisers reported.
    pub cap: usize,
    /// Report only one of each complementary pair `z`, `!z`.
    pub dedup_complement: bool,
}

impl Default for BruteForceOptions {
    fn default() -> Self {
        Self {
            cap: 1 << 16,
            dedup_complement: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaxCutSolution {
    pub c_max: usize,
    /// Maximising assignments in increasing index order, truncated at the cap.
    pub maximizers: Vec<usize>,
}

pub fn brute_force_maxcut(graph: &Graph) -> Result<MaxCutSolution> {
    brute_force_maxcut_with(graph, BruteForceOptions::default())
}

pub fn brute_force_maxcut_with(graph: &Graph, opts: BruteForceOptions) -> Result<MaxCutSolution> {
    let n = graph.n_vertices();
    if n > MAX_QUBITS {
        return Err(Error::Resource(format!(
            "brute force over {n} vertices exceeds the {MAX_QUBITS}-vertex limit"
        )));
    }
    let full = (1usize << n) - 1;
    let mut c_max = 0;
    let mut maximizers = Vec::new();
    for z in 0..=full {
        if opts.dedup_complement && n > 0 && z >> (n - 1) & 1 == 1 {
            continue;
        }
        let c = graph.cut_value(z);
        if c > c_max {
            c_max = c;
            maximizers.clear();
        }
        if c == c_max && maximizers.len() < opts.cap {
            maximizers.push(z);
        }
    }
    Ok(MaxCutSolution { c_max, maximizers })
}

/// Radius-1 environment of an edge in a cubic graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EdgeSubgraphClass {
    /// The edge lies on a triangle.
    G4,
    /// The edge lies on a 4-cycle but on no triangle.
    G5,
    /// Tree-like neighbourhood: no triangle, no 4-cycle through the edge.
    G6,
}

/// Classifies every edge, in edge-list order.
pub fn classify_edge_subgraphs(graph: &Graph) -> Result<Vec<((usize, usize), EdgeSubgraphClass)>> {
    if !graph.is_cubic() {
        return Err(invalid(
            "edge classification is defined for 3-regular graphs only",
        ));
    }
    let adj = graph.neighbours();
    Ok(graph
        .edges()
        .iter()
        .map(|&(u, v)| {
            let nu: Vec<usize> = adj[u].iter().copied().filter(|&x| x != v).collect();
            let nv: Vec<usize> = adj[v].iter().copied().filter(|&x| x != u).collect();
            let class = if nu.iter().any(|x| nv.contains(x)) {
                EdgeSubgraphClass::G4
            } else if nu.iter().any(|&a| nv.iter().any(|&b| graph.has_edge(a, b))) {
                EdgeSubgraphClass::G5
            } else {
                EdgeSubgraphClass::G6
            };
            ((u, v), class)
        })
        .collect())
}

pub fn is_all_g6(graph: &Graph) -> bool {
    classify_edge_subgraphs(graph)
        .map(|classes| classes.iter().all(|(_, c)| *c == EdgeSubgraphClass::G6))
        .unwrap_or(false)
}

/// Catalogued cubic graphs whose every edge is G6 and which are nonplanar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WorstCaseFamily {
    Petersen,
    Heawood,
    MobiusKantor,
    Pappus,
    Desargues,
    Nauru,
    McGee,
    /// `GP(n, k)` for the smallest admissible `k` at `size = 2n`.
    GeneralizedPetersen,
    /// Whichever named member of the catalogue has the requested size.
    Catalogue,
}

impl WorstCaseFamily {
    pub const NAMED: [WorstCaseFamily; 7] = [
        WorstCaseFamily::Petersen,
        WorstCaseFamily::Heawood,
        WorstCaseFamily::MobiusKantor,
        WorstCaseFamily::Pappus,
        WorstCaseFamily::Desargues,
        WorstCaseFamily::Nauru,
        WorstCaseFamily::McGee,
    ];

    fn named_graph(self) -> Option<Graph> {
        use WorstCaseFamily::*;
        Some(match self {
            Petersen => petersen_graph(),
            Heawood => Graph::from_lcf(14, &[5, -5]),
            MobiusKantor => Graph::from_lcf(16, &[5, -5]),
            Pappus => Graph::from_lcf(18, &[5, 7, -7, 7, -7, -5]),
            Desargues => Graph::from_lcf(20, &[5, -5, 9, -9]),
            Nauru => Graph::from_lcf(24, &[5, -9, 7, -7, 9, -5]),
            McGee => Graph::from_lcf(24, &[12, 7, -7]),
            GeneralizedPetersen | Catalogue => return None,
        })
    }
}

impl fmt::Display for WorstCaseFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use WorstCaseFamily::*;
        f.write_str(match self {
            Petersen => "petersen",
            Heawood => "heawood",
            MobiusKantor => "mobius-kantor",
            Pappus => "pappus",
            Desargues => "desargues",
            Nauru => "nauru",
            McGee => "mcgee",
            GeneralizedPetersen => "generalized-petersen",
            Catalogue => "catalogue",
        })
    }
}

impl FromStr for WorstCaseFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        use WorstCaseFamily::*;
        Ok(match s {
            "petersen" => Petersen,
            "heawood" => Heawood,
            "mobius-kantor" => MobiusKantor,
            "pappus" => Pappus,
            "desargues" => Desargues,
            "nauru" => Nauru,
            "mcgee" => McGee,
            "generalized-petersen" | "gp" => GeneralizedPetersen,
            "catalogue" => Catalogue,
            other => return Err(invalid(format!("unknown worst-case family {other:?}"))),
        })
    }
}

fn admissible_worst_case(g: &Graph) -> bool {
    g.is_cubic() && is_all_g6(g) && !is_planar(g)
}

/// Looks up a cubic, all-G6, nonplanar graph with `size` vertices.
pub fn gen_worst_case_graph(family: WorstCaseFamily, size: usize) -> Result<Graph> {
    let candidate = match family {
        WorstCaseFamily::GeneralizedPetersen => {
            if size % 2 == 1 || size < 10 {
                None
            } else {
                let n = size / 2;
                (2..n.div_ceil(2))
                    .filter_map(|k| generalized_petersen(n, k).ok())
                    .find(admissible_worst_case)
            }
        }
        WorstCaseFamily::Catalogue => WorstCaseFamily::NAMED
            .iter()
            .filter_map(|f| f.named_graph())
            .find(|g| g.n_vertices() == size),
        named => named.named_graph().filter(|g| g.n_vertices() == size),
    };
    match candidate {
        Some(g) if admissible_worst_case(&g) => Ok(g),
        Some(_) => Err(invalid(format!(
            "catalogue entry {family} at size {size} fails the all-G6 nonplanar check"
        ))),
        None => Err(invalid(format!("no {family} graph with {size} vertices"))),
    }
}
