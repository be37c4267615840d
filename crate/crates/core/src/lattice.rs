//! Contraction graphs, regions and the standard lattice generators.
//!
//! A [`LatticeGraph`] carries one virtual leg per edge end plus a number of
//! dangling ("open") legs per vertex. Every leg has a global sort key
//! `(min endpoint, max endpoint, slot)`; open legs of vertex `v` use the key
//! `(v, usize::MAX, slot)` and therefore sort after the real edges whose
//! smaller endpoint is `v`. Tensor leg order, boundary order and every
//! matricization downstream follow this key.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axis {
    Horizontal,
    Vertical,
}

/// Orientation of an edge produced by a square-lattice generator. `tail` is the
/// left endpoint of a horizontal edge or the upper endpoint of a vertical one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Direction {
    pub axis: Axis,
    pub tail: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Edge {
    /// Smaller endpoint.
    pub a: usize,
    /// Larger endpoint.
    pub b: usize,
    /// Index among the parallel edges joining `a` and `b`.
    pub slot: usize,
    pub direction: Option<Direction>,
}

impl Edge {
    pub fn other(&self, v: usize) -> usize {
        if v == self.a {
            self.b
        } else {
            self.a
        }
    }

    pub fn touches(&self, v: usize) -> bool {
        self.a == v || self.b == v
    }
}

/// A virtual leg of the graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Leg {
    /// Index into [`LatticeGraph::edges`].
    Edge(usize),
    /// The `slot`-th dangling leg of `vertex`.
    Open { vertex: usize, slot: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LatticeKind {
    SquareTorus,
    SquareOpen,
    HexagonalOpen,
    HexagonalTorus,
    SquareWithDefects,
    SquareWithSubstructure,
}

impl LatticeKind {
    pub fn name(self) -> &'static str {
        match self {
            LatticeKind::SquareTorus => "square-torus",
            LatticeKind::SquareOpen => "square-open",
            LatticeKind::HexagonalOpen => "hexagonal-open",
            LatticeKind::HexagonalTorus => "hexagonal-torus",
            LatticeKind::SquareWithDefects => "square-with-defects",
            LatticeKind::SquareWithSubstructure => "square-with-substructure",
        }
    }

    pub fn is_periodic(self) -> bool {
        !matches!(self, LatticeKind::SquareOpen | LatticeKind::HexagonalOpen)
    }
}

impl fmt::Display for LatticeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LatticeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "square-torus" => LatticeKind::SquareTorus,
            "square-open" => LatticeKind::SquareOpen,
            "hexagonal-open" => LatticeKind::HexagonalOpen,
            "hexagonal-torus" => LatticeKind::HexagonalTorus,
            "square-with-defects" => LatticeKind::SquareWithDefects,
            "square-with-substructure" => LatticeKind::SquareWithSubstructure,
            other => return Err(Error::invalid(format!("unknown lattice kind `{other}`"))),
        })
    }
}

/// How a generated lattice was produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorInfo {
    pub kind: LatticeKind,
    pub dims: Vec<usize>,
    pub periodic: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub defect_probability: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Undirected multigraph with uniform bond dimension and dangling legs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphDocument", into = "GraphDocument")]
pub struct LatticeGraph {
    num_vertices: usize,
    edges: Vec<Edge>,
    open_legs: Vec<usize>,
    bond_dim: usize,
    positions: Option<Vec<[i64; 2]>>,
    generator: Option<GeneratorInfo>,
    incident: Vec<Vec<Leg>>,
}

type RawEdge = (usize, usize, Option<Direction>);

impl LatticeGraph {
    /// Builds a graph from an edge list. Repeated pairs become parallel edges
    /// with increasing slots; self-loops are rejected.
    pub fn new(
        num_vertices: usize,
        edges: &[(usize, usize)],
        open_legs: Vec<usize>,
        bond_dim: usize,
    ) -> Result<Self> {
        let raw: Vec<RawEdge> = edges.iter().map(|&(a, b)| (a, b, None)).collect();
        Self::build(num_vertices, raw, open_legs, bond_dim, None, None)
    }

    /// A graph without edges or open legs.
    pub fn isolated(num_vertices: usize, bond_dim: usize) -> Result<Self> {
        Self::new(num_vertices, &[], vec![0; num_vertices], bond_dim)
    }

    fn build(
        num_vertices: usize,
        raw: Vec<RawEdge>,
        open_legs: Vec<usize>,
        bond_dim: usize,
        positions: Option<Vec<[i64; 2]>>,
        generator: Option<GeneratorInfo>,
    ) -> Result<Self> {
        let mut edges = Vec::with_capacity(raw.len());
        let mut seen: std::collections::HashMap<(usize, usize), usize> = Default::default();
        for (u, v, direction) in raw {
            let (a, b) = (u.min(v), u.max(v));
            if a == b {
                return Err(Error::invalid(format!("self-loop at vertex {a}")));
            }
            let slot = seen.entry((a, b)).or_insert(0);
            edges.push(Edge {
                a,
                b,
                slot: *slot,
                direction,
            });
            *slot += 1;
        }
        Self::from_edges(num_vertices, edges, open_legs, bond_dim, positions, generator)
    }

    fn from_edges(
        num_vertices: usize,
        mut edges: Vec<Edge>,
        open_legs: Vec<usize>,
        bond_dim: usize,
        positions: Option<Vec<[i64; 2]>>,
        generator: Option<GeneratorInfo>,
    ) -> Result<Self> {
        if bond_dim == 0 {
            return Err(Error::invalid("bond dimension must be positive"));
        }
        if open_legs.len() != num_vertices {
            return Err(Error::invalid(format!(
                "open-leg list has {} entries for {} vertices",
                open_legs.len(),
                num_vertices
            )));
        }
        if let Some(p) = &positions {
            if p.len() != num_vertices {
                return Err(Error::invalid("position list length differs from vertex count"));
            }
        }
        for e in &edges {
            if e.a >= num_vertices || e.b >= num_vertices {
                return Err(Error::invalid(format!(
                    "edge ({}, {}) references a missing vertex",
                    e.a, e.b
                )));
            }
            if e.a >= e.b {
                return Err(Error::invalid(format!(
                    "edge ({}, {}) must list its smaller endpoint first and cannot be a self-loop",
                    e.a, e.b
                )));
            }
            if let Some(d) = e.direction {
                if !e.touches(d.tail) {
                    return Err(Error::invalid("edge direction tail is not an endpoint"));
                }
            }
        }
        edges.sort_by_key(|e| (e.a, e.b, e.slot));
        for w in edges.windows(2) {
            if (w[0].a, w[0].b, w[0].slot) == (w[1].a, w[1].b, w[1].slot) {
                return Err(Error::invalid(format!(
                    "duplicate edge ({}, {}) slot {}",
                    w[0].a, w[0].b, w[0].slot
                )));
            }
        }
        let mut incident = vec![Vec::new(); num_vertices];
        for (i, e) in edges.iter().enumerate() {
            incident[e.a].push(Leg::Edge(i));
            incident[e.b].push(Leg::Edge(i));
        }
        for (v, &k) in open_legs.iter().enumerate() {
            for slot in 0..k {
                incident[v].push(Leg::Open { vertex: v, slot });
            }
        }
        let mut graph = LatticeGraph {
            num_vertices,
            edges,
            open_legs,
            bond_dim,
            positions,
            generator,
            incident,
        };
        let mut incident = std::mem::take(&mut graph.incident);
        for legs in incident.iter_mut() {
            legs.sort_by_key(|&l| graph.leg_key(l));
        }
        graph.incident = incident;
        Ok(graph)
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn vertices(&self) -> std::ops::Range<usize> {
        0..self.num_vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, i: usize) -> &Edge {
        &self.edges[i]
    }

    pub fn bond_dim(&self) -> usize {
        self.bond_dim
    }

    pub fn open_legs(&self, v: usize) -> usize {
        self.open_legs[v]
    }

    pub fn total_open_legs(&self) -> usize {
        self.open_legs.iter().sum()
    }

    pub fn positions(&self) -> Option<&[[i64; 2]]> {
        self.positions.as_deref()
    }

    pub fn generator(&self) -> Option<&GeneratorInfo> {
        self.generator.as_ref()
    }

    /// Legs of `v` in global order. Their count is `e_v`.
    pub fn incident_legs(&self, v: usize) -> &[Leg] {
        &self.incident[v]
    }

    /// `e_v`: edges at `v` plus its open legs.
    pub fn num_legs(&self, v: usize) -> usize {
        self.incident[v].len()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.incident[v].len() - self.open_legs[v]
    }

    pub fn leg_key(&self, leg: Leg) -> (usize, usize, usize) {
        match leg {
            Leg::Edge(i) => {
                let e = &self.edges[i];
                (e.a, e.b, e.slot)
            }
            Leg::Open { vertex, slot } => (vertex, usize::MAX, slot),
        }
    }

    /// Distinct neighbours of `v` in increasing order.
    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        let set: BTreeSet<usize> = self.incident[v]
            .iter()
            .filter_map(|&l| match l {
                Leg::Edge(i) => Some(self.edges[i].other(v)),
                Leg::Open { .. } => None,
            })
            .collect();
        set.into_iter().collect()
    }

    /// Vertex at a generator position, if positions are known.
    pub fn vertex_at(&self, pos: [i64; 2]) -> Option<usize> {
        self.positions.as_ref()?.iter().position(|&p| p == pos)
    }

    /// Same vertices and edges with every open leg removed.
    pub fn without_open_legs(&self) -> LatticeGraph {
        let mut g = self.clone();
        g.open_legs = vec![0; self.num_vertices];
        for (v, legs) in g.incident.iter_mut().enumerate() {
            legs.retain(|l| matches!(l, Leg::Edge(_)));
            debug_assert_eq!(legs.len(), self.degree(v));
        }
        g
    }

    /// Same graph with another bond dimension.
    pub fn with_bond_dim(&self, bond_dim: usize) -> Result<LatticeGraph> {
        if bond_dim == 0 {
            return Err(Error::invalid("bond dimension must be positive"));
        }
        let mut g = self.clone();
        g.bond_dim = bond_dim;
        Ok(g)
    }

    /// Renumbers vertices: old vertex `v` becomes `perm[v]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<LatticeGraph> {
        check_permutation(perm, self.num_vertices)?;
        let mut raw: Vec<Edge> = self
            .edges
            .iter()
            .map(|e| {
                let (a, b) = (perm[e.a], perm[e.b]);
                Edge {
                    a: a.min(b),
                    b: a.max(b),
                    slot: e.slot,
                    direction: e.direction.map(|d| Direction {
                        axis: d.axis,
                        tail: perm[d.tail],
                    }),
                }
            })
            .collect();
        raw.sort_by_key(|e| (e.a, e.b, e.slot));
        let mut open = vec![0; self.num_vertices];
        let mut positions = self.positions.clone();
        for v in 0..self.num_vertices {
            open[perm[v]] = self.open_legs[v];
            if let (Some(new), Some(old)) = (positions.as_mut(), self.positions.as_ref()) {
                new[perm[v]] = old[v];
            }
        }
        Self::from_edges(self.num_vertices, raw, open, self.bond_dim, positions, None)
    }

    /// Structural hash used to tie regions to their graph.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv::new();
        h.write(self.num_vertices as u64);
        h.write(self.bond_dim as u64);
        for e in &self.edges {
            h.write(e.a as u64);
            h.write(e.b as u64);
            h.write(e.slot as u64);
        }
        for &k in &self.open_legs {
            h.write(k as u64);
        }
        h.finish()
    }

    /// Region over this graph.
    pub fn region<I: IntoIterator<Item = usize>>(&self, members: I) -> Result<Region> {
        Region::new(self, members)
    }

    pub fn full_region(&self) -> Region {
        Region {
            members: (0..self.num_vertices).collect(),
            graph_id: self.fingerprint(),
        }
    }

    fn check_region(&self, r: &Region) -> Result<()> {
        if r.graph_id != self.fingerprint() {
            return Err(Error::invalid("region belongs to a different graph"));
        }
        Ok(())
    }

    /// Outgoing legs `E` and boundary vertices `R̄` of a region.
    pub fn boundary(&self, region: &Region) -> Result<Boundary> {
        self.check_region(region)?;
        let inside = self.membership(region);
        let mut legs = Vec::new();
        let mut vertices = BTreeSet::new();
        for &v in &region.members {
            for &leg in &self.incident[v] {
                let outgoing = match leg {
                    Leg::Edge(i) => !inside[self.edges[i].other(v)],
                    Leg::Open { .. } => true,
                };
                if outgoing {
                    legs.push(leg);
                    vertices.insert(v);
                }
            }
        }
        legs.sort_by_key(|&l| self.leg_key(l));
        Ok(Boundary {
            legs,
            vertices: vertices.into_iter().collect(),
        })
    }

    /// Number of legs leaving the region at each member, in member order.
    pub fn outgoing_counts(&self, region: &Region) -> Result<Vec<usize>> {
        self.check_region(region)?;
        let inside = self.membership(region);
        Ok(region
            .members
            .iter()
            .map(|&v| {
                self.incident[v]
                    .iter()
                    .filter(|&&leg| match leg {
                        Leg::Edge(i) => !inside[self.edges[i].other(v)],
                        Leg::Open { .. } => true,
                    })
                    .count()
            })
            .collect())
    }

    /// Edges with both endpoints inside the region.
    pub fn internal_edges(&self, region: &Region) -> Result<Vec<usize>> {
        self.check_region(region)?;
        let inside = self.membership(region);
        Ok((0..self.edges.len())
            .filter(|&i| inside[self.edges[i].a] && inside[self.edges[i].b])
            .collect())
    }

    /// The vertex of `region` carrying a boundary leg.
    pub fn inside_end(&self, region: &Region, leg: Leg) -> usize {
        match leg {
            Leg::Edge(i) => {
                let e = &self.edges[i];
                if region.contains(e.a) {
                    e.a
                } else {
                    e.b
                }
            }
            Leg::Open { vertex, .. } => vertex,
        }
    }

    fn membership(&self, region: &Region) -> Vec<bool> {
        let mut inside = vec![false; self.num_vertices];
        for &v in &region.members {
            inside[v] = true;
        }
        inside
    }

    /// Connectivity of the subgraph induced by the region. The empty region is
    /// not connected.
    pub fn is_connected(&self, region: &Region) -> Result<bool> {
        self.check_region(region)?;
        let Some(&start) = region.members.first() else {
            return Ok(false);
        };
        let inside = self.membership(region);
        let mut seen = vec![false; self.num_vertices];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for w in self.neighbors(v) {
                if inside[w] && !seen[w] {
                    seen[w] = true;
                    count += 1;
                    queue.push_back(w);
                }
            }
        }
        Ok(count == region.members.len())
    }

    /// Disjoint regions joined by at least one edge.
    pub fn are_adjacent(&self, a: &Region, b: &Region) -> Result<bool> {
        self.check_region(a)?;
        self.check_region(b)?;
        if !a.is_disjoint(b)? {
            return Ok(false);
        }
        Ok(!self.crossing_edges(a, b).is_empty())
    }

    /// Edges with one endpoint in `a` and the other in `b`.
    pub fn crossing_edges(&self, a: &Region, b: &Region) -> Vec<usize> {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, e)| {
                (a.contains(e.a) && b.contains(e.b)) || (a.contains(e.b) && b.contains(e.a))
            })
            .map(|(i, _)| i)
            .collect()
    }
}

fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::invalid("permutation length differs from vertex count"));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(Error::invalid("not a permutation"));
        }
    }
    Ok(())
}

struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }

    fn write(&mut self, x: u64) {
        for byte in x.to_le_bytes() {
            self.0 ^= byte as u64;
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }

    fn finish(&self) -> u64 {
        self.0
    }
}

/// Outgoing legs of a region and the members that carry them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Boundary {
    /// `E`, in global leg order.
    pub legs: Vec<Leg>,
    /// `R̄`, increasing.
    pub vertices: Vec<usize>,
}

/// A set of vertices of one graph.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Region {
    members: Vec<usize>,
    graph_id: u64,
}

impl Region {
    pub fn new<I: IntoIterator<Item = usize>>(graph: &LatticeGraph, members: I) -> Result<Self> {
        let set: BTreeSet<usize> = members.into_iter().collect();
        if let Some(&v) = set.iter().find(|&&v| v >= graph.num_vertices()) {
            return Err(Error::invalid(format!("unknown vertex id {v}")));
        }
        Ok(Region {
            members: set.into_iter().collect(),
            graph_id: graph.fingerprint(),
        })
    }

    /// Members in increasing order.
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.members.binary_search(&v).is_ok()
    }

    fn same_graph(&self, other: &Region) -> Result<()> {
        if self.graph_id != other.graph_id {
            return Err(Error::invalid("regions belong to different graphs"));
        }
        Ok(())
    }

    pub fn union(&self, other: &Region) -> Result<Region> {
        self.same_graph(other)?;
        let set: BTreeSet<usize> = self.members.iter().chain(&other.members).copied().collect();
        Ok(Region {
            members: set.into_iter().collect(),
            graph_id: self.graph_id,
        })
    }

    pub fn intersection(&self, other: &Region) -> Result<Region> {
        self.same_graph(other)?;
        Ok(Region {
            members: self
                .members
                .iter()
                .copied()
                .filter(|&v| other.contains(v))
                .collect(),
            graph_id: self.graph_id,
        })
    }

    pub fn difference(&self, other: &Region) -> Result<Region> {
        self.same_graph(other)?;
        Ok(Region {
            members: self
                .members
                .iter()
                .copied()
                .filter(|&v| !other.contains(v))
                .collect(),
            graph_id: self.graph_id,
        })
    }

    pub fn is_disjoint(&self, other: &Region) -> Result<bool> {
        self.same_graph(other)?;
        Ok(self.members.iter().all(|&v| !other.contains(v)))
    }

    pub fn is_subset(&self, other: &Region) -> Result<bool> {
        self.same_graph(other)?;
        Ok(self.members.iter().all(|&v| other.contains(v)))
    }
}

impl Serialize for Region {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.members.serialize(s)
    }
}

/// Parameters of [`generate_lattice`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub kind: LatticeKind,
    pub dims: Vec<usize>,
    #[serde(default = "default_bond_dim")]
    pub bond_dim: usize,
    #[serde(default)]
    pub defect_probability: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_bond_dim() -> usize {
    2
}

impl LatticeSpec {
    pub fn new(kind: LatticeKind, dims: &[usize]) -> Self {
        LatticeSpec {
            kind,
            dims: dims.to_vec(),
            bond_dim: 2,
            defect_probability: 0.0,
            seed: 0,
        }
    }

    pub fn bond_dim(mut self, d: usize) -> Self {
        self.bond_dim = d;
        self
    }

    pub fn defects(mut self, p: f64, seed: u64) -> Self {
        self.defect_probability = p;
        self.seed = seed;
        self
    }
}

/// Builds one of the standard lattices.
///
/// * `square-torus`, `square-with-defects`, `square-with-substructure`: dims
///   `[rows, cols]` (a single entry means one column). A periodic direction of
///   length 2 yields parallel edges; length 1 yields none.
/// * `square-open`: dims `[rows, cols]`; boundary vertices get open legs up to
///   coordination 4.
/// * `hexagonal-open`: dims `[cell rows, cell cols]` of a brick-wall honeycomb
///   patch; open legs up to coordination 3.
/// * `hexagonal-torus`: dims `[rows, cols]` of the brick-wall vertex grid, both even.
pub fn generate_lattice(spec: &LatticeSpec) -> Result<LatticeGraph> {
    if spec.dims.is_empty() || spec.dims.len() > 2 {
        return Err(Error::invalid("lattice dims must have one or two entries"));
    }
    if spec.dims.contains(&0) {
        return Err(Error::invalid("lattice dims must be positive"));
    }
    let (n, m) = (spec.dims[0], spec.dims.get(1).copied().unwrap_or(1));
    let info = GeneratorInfo {
        kind: spec.kind,
        dims: vec![n, m],
        periodic: spec.kind.is_periodic(),
        defect_probability: None,
        seed: None,
    };
    let d = spec.bond_dim;
    match spec.kind {
        LatticeKind::SquareTorus => square(n, m, true, d, info),
        LatticeKind::SquareOpen => square(n, m, false, d, info),
        LatticeKind::SquareWithDefects => {
            let p = spec.defect_probability;
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid("defect probability must lie in [0, 1]"));
            }
            let info = GeneratorInfo {
                defect_probability: Some(p),
                seed: Some(spec.seed),
                ..info
            };
            let full = square(n, m, true, d, info.clone())?;
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let kept: Vec<Edge> = full
                .edges
                .iter()
                .filter(|_| !rng.random_bool(p))
                .cloned()
                .collect();
            LatticeGraph::from_edges(
                full.num_vertices,
                kept,
                vec![0; full.num_vertices],
                d,
                full.positions.clone(),
                Some(info),
            )
        }
        LatticeKind::SquareWithSubstructure => substructure(n, m, d, info),
        LatticeKind::HexagonalOpen => hexagonal_open(n, m, d, info),
        LatticeKind::HexagonalTorus => hexagonal_torus(n, m, d, info),
    }
}

fn square(n: usize, m: usize, periodic: bool, d: usize, info: GeneratorInfo) -> Result<LatticeGraph> {
    let idx = |r: usize, c: usize| r * m + c;
    let mut raw = Vec::new();
    for r in 0..n {
        for c in 0..m {
            let v = idx(r, c);
            if c + 1 < m || (periodic && m > 1) {
                raw.push((v, idx(r, (c + 1) % m), Some(Direction { axis: Axis::Horizontal, tail: v })));
            }
            if r + 1 < n || (periodic && n > 1) {
                raw.push((v, idx((r + 1) % n, c), Some(Direction { axis: Axis::Vertical, tail: v })));
            }
        }
    }
    let positions = (0..n)
        .flat_map(|r| (0..m).map(move |c| [r as i64, c as i64]))
        .collect();
    let mut open = vec![0; n * m];
    if !periodic {
        let mut degree = vec![0usize; n * m];
        for &(a, b, _) in &raw {
            degree[a] += 1;
            degree[b] += 1;
        }
        for v in 0..n * m {
            open[v] = 4 - degree[v];
        }
    }
    LatticeGraph::build(n * m, raw, open, d, Some(positions), Some(info))
}

fn substructure(n: usize, m: usize, d: usize, info: GeneratorInfo) -> Result<LatticeGraph> {
    // Each site becomes a 4-cycle of sub-vertices (up, right, down, left); each
    // sub-vertex carries the one lattice bond pointing its way.
    let sub = |r: usize, c: usize, k: usize| 4 * (r * m + c) + k;
    let mut raw = Vec::new();
    let mut positions = Vec::new();
    for r in 0..n {
        for c in 0..m {
            for k in 0..4 {
                raw.push((sub(r, c, k), sub(r, c, (k + 1) % 4), None));
                let (dr, dc) = [(-1, 0), (0, 1), (1, 0), (0, -1)][k];
                positions.push([3 * r as i64 + dr, 3 * c as i64 + dc]);
            }
            let right = sub(r, (c + 1) % m, 3);
            raw.push((sub(r, c, 1), right, Some(Direction { axis: Axis::Horizontal, tail: sub(r, c, 1) })));
            let down = sub((r + 1) % n, c, 0);
            raw.push((sub(r, c, 2), down, Some(Direction { axis: Axis::Vertical, tail: sub(r, c, 2) })));
        }
    }
    let total = 4 * n * m;
    LatticeGraph::build(total, raw, vec![0; total], d, Some(positions), Some(info))
}

fn hexagonal_open(rows: usize, cols: usize, d: usize, info: GeneratorInfo) -> Result<LatticeGraph> {
    // Brick-wall embedding: grid vertices (r, c), horizontal bonds along rows,
    // vertical bond (r, c)-(r+1, c) whenever r + c is even. Hexagon cells sit
    // at (r, c) with r + c even and span columns c..=c+2 of rows r, r+1.
    let grid_rows = rows + 1;
    let grid_cols = if rows == 1 { 2 * cols + 1 } else { 2 * cols + 2 };
    let mut in_cell = vec![vec![false; grid_cols]; grid_rows];
    for r in 0..rows {
        for c in 0..grid_cols.saturating_sub(2) {
            if (r + c) % 2 == 0 {
                for rr in r..=r + 1 {
                    for cc in c..=c + 2 {
                        in_cell[rr][cc] = true;
                    }
                }
            }
        }
    }
    let mut index = vec![vec![usize::MAX; grid_cols]; grid_rows];
    let mut positions = Vec::new();
    for r in 0..grid_rows {
        for c in 0..grid_cols {
            if in_cell[r][c] {
                index[r][c] = positions.len();
                positions.push([r as i64, c as i64]);
            }
        }
    }
    let mut raw = Vec::new();
    for r in 0..grid_rows {
        for c in 0..grid_cols {
            let v = index[r][c];
            if v == usize::MAX {
                continue;
            }
            if c + 1 < grid_cols && index[r][c + 1] != usize::MAX {
                raw.push((v, index[r][c + 1], Some(Direction { axis: Axis::Horizontal, tail: v })));
            }
            if (r + c) % 2 == 0 && r + 1 < grid_rows && index[r + 1][c] != usize::MAX {
                raw.push((v, index[r + 1][c], Some(Direction { axis: Axis::Vertical, tail: v })));
            }
        }
    }
    let n = positions.len();
    let mut degree = vec![0usize; n];
    for &(a, b, _) in &raw {
        degree[a] += 1;
        degree[b] += 1;
    }
    let open = degree.iter().map(|&k| 3 - k).collect();
    LatticeGraph::build(n, raw, open, d, Some(positions), Some(info))
}

fn hexagonal_torus(rows: usize, cols: usize, d: usize, info: GeneratorInfo) -> Result<LatticeGraph> {
    if !rows.is_multiple_of(2) || !cols.is_multiple_of(2) {
        return Err(Error::invalid("hexagonal-torus dims must both be even"));
    }
    let idx = |r: usize, c: usize| r * cols + c;
    let mut raw = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let v = idx(r, c);
            raw.push((v, idx(r, (c + 1) % cols), Some(Direction { axis: Axis::Horizontal, tail: v })));
            if (r + c) % 2 == 0 {
                raw.push((v, idx((r + 1) % rows, c), Some(Direction { axis: Axis::Vertical, tail: v })));
            }
        }
    }
    let positions = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| [r as i64, c as i64]))
        .collect();
    LatticeGraph::build(rows * cols, raw, vec![0; rows * cols], d, Some(positions), Some(info))
}

/// Ring of `n` vertices (`n ≥ 3`), each with two legs.
pub fn ring(n: usize, bond_dim: usize) -> Result<LatticeGraph> {
    if n < 3 {
        return Err(Error::invalid("a ring needs at least three vertices"));
    }
    let edges: Vec<(usize, usize)> = (0..n).map(|v| (v, (v + 1) % n)).collect();
    LatticeGraph::new(n, &edges, vec![0; n], bond_dim)
}

/// Vertices of the hexagon cell whose upper-left corner is grid point `(r, c)`
/// of a brick-wall lattice, or `None` if the cell is not fully present.
pub fn hexagon_cell(graph: &LatticeGraph, r: i64, c: i64) -> Option<Vec<usize>> {
    let positions = graph.positions()?;
    let find = |rr: i64, cc: i64| positions.iter().position(|&p| p == [rr, cc]);
    let mut cell = Vec::with_capacity(6);
    for (dr, dc) in [(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2)] {
        cell.push(find(r + dr, c + dc)?);
    }
    cell.sort_unstable();
    Some(cell)
}

/// Disjoint covering of a brick-wall hexagonal torus by hexagon cells.
/// Needs `rows` even and `cols` a multiple of 6.
pub fn hexagon_tiling(graph: &LatticeGraph) -> Result<Vec<Vec<usize>>> {
    let info = graph
        .generator()
        .filter(|g| g.kind == LatticeKind::HexagonalTorus)
        .ok_or_else(|| Error::invalid("hexagon tiling needs a hexagonal-torus lattice"))?;
    let (rows, cols) = (info.dims[0], info.dims[1]);
    if cols % 6 != 0 {
        return Err(Error::invalid("hexagon tiling needs a column count divisible by 6"));
    }
    let idx = |r: usize, c: usize| (r % rows) * cols + (c % cols);
    let mut cells = Vec::new();
    for block in 0..cols / 3 {
        let c0 = 3 * block;
        let mut r = block % 2;
        while r < rows + block % 2 {
            let mut cell: Vec<usize> = (0..2)
                .flat_map(|dr| (0..3).map(move |dc| (r + dr, c0 + dc)))
                .map(|(rr, cc)| idx(rr, cc))
                .collect();
            cell.sort_unstable();
            cells.push(cell);
            r += 2;
        }
    }
    Ok(cells)
}

/// Serialized form of a [`LatticeGraph`].
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDocument {
    pub vertices: Vec<usize>,
    pub bond_dim: usize,
    pub edges: Vec<EdgeDocument>,
    pub open_legs: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<[i64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorInfo>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDocument {
    pub a: usize,
    pub b: usize,
    #[serde(default)]
    pub slot: usize,
    pub bond_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
}

impl From<LatticeGraph> for GraphDocument {
    fn from(g: LatticeGraph) -> Self {
        GraphDocument {
            vertices: (0..g.num_vertices).collect(),
            bond_dim: g.bond_dim,
            edges: g
                .edges
                .iter()
                .map(|e| EdgeDocument {
                    a: e.a,
                    b: e.b,
                    slot: e.slot,
                    bond_dim: g.bond_dim,
                    direction: e.direction,
                })
                .collect(),
            open_legs: g.open_legs.clone(),
            positions: g.positions.clone(),
            generator: g.generator.clone(),
        }
    }
}

impl TryFrom<GraphDocument> for LatticeGraph {
    type Error = Error;

    fn try_from(doc: GraphDocument) -> Result<Self> {
        if doc.vertices.iter().enumerate().any(|(i, &v)| i != v) {
            return Err(Error::invalid("vertex ids must be 0, 1, …, n-1 in order"));
        }
        if let Some(e) = doc.edges.iter().find(|e| e.bond_dim != doc.bond_dim) {
            return Err(Error::invalid(format!(
                "edge ({}, {}) has bond dimension {} but the graph is uniform with {}",
                e.a, e.b, e.bond_dim, doc.bond_dim
            )));
        }
        let edges = doc
            .edges
            .into_iter()
            .map(|e| Edge {
                a: e.a,
                b: e.b,
                slot: e.slot,
                direction: e.direction,
            })
            .collect();
        LatticeGraph::from_edges(
            doc.vertices.len(),
            edges,
            doc.open_legs,
            doc.bond_dim,
            doc.positions,
            doc.generator,
        )
    }
}
