//! Finite lattice boxes, general finite graphs and connectivity primitives.
//!
//! Vertices and edges carry dense integer ids fixed at construction; every
//! configuration is a flat array keyed by those ids. Vertices are ordered
//! lexicographically by coordinates and edges by (min endpoint, max
//! endpoint), so iteration order — and therefore every seeded run built on
//! top of it — is reproducible.
//!
//! The box `G_n` has vertex set `Λ_n ∪ ∂Λ_n` where `Λ_n = {-n..n}^d`, and
//! contains every lattice edge with both endpoints in that set. The
//! `boundary` of the graph is `∂Λ_n`; general graphs may designate any
//! (possibly empty) boundary set.

use std::collections::HashMap;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::params::Color;

pub type VertexId = usize;
pub type EdgeId = usize;

/// A finite graph with dense vertex/edge indexing.
///
/// Each vertex is an integer coordinate tuple (`d >= 1`); lattice boxes
/// additionally record their radius. Adjacency lists store
/// `(edge id, neighbor id)` pairs.
#[derive(Clone, Debug)]
pub struct FiniteGraph {
    dim: usize,
    coords: Vec<Vec<i64>>,
    edges: Vec<(VertexId, VertexId)>,
    adjacency: Vec<Vec<(EdgeId, VertexId)>>,
    boundary: Vec<VertexId>,
    is_boundary: Vec<bool>,
    index: HashMap<Vec<i64>, VertexId>,
    box_radius: Option<usize>,
}

impl FiniteGraph {
    /// General constructor. Vertices are reordered lexicographically by
    /// coordinates and edges by their (reindexed) endpoint pair; duplicate
    /// vertices, duplicate edges and self-loops are rejected.
    pub fn from_parts(
        vertices: Vec<Vec<i64>>,
        edge_list: Vec<(usize, usize)>,
        boundary: Vec<usize>,
    ) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::InvalidParams("graph needs at least one vertex".into()));
        }
        let dim = vertices[0].len();
        if dim == 0 || vertices.iter().any(|c| c.len() != dim) {
            return Err(Error::InvalidParams("inconsistent coordinate dimension".into()));
        }

        let mut order: Vec<usize> = (0..vertices.len()).collect();
        order.sort_by(|&i, &j| vertices[i].cmp(&vertices[j]));
        let mut rank = vec![0usize; vertices.len()];
        for (new, &old) in order.iter().enumerate() {
            rank[old] = new;
        }
        let coords: Vec<Vec<i64>> = order.iter().map(|&i| vertices[i].clone()).collect();

        let mut index = HashMap::with_capacity(coords.len());
        for (i, c) in coords.iter().enumerate() {
            if index.insert(c.clone(), i).is_some() {
                return Err(Error::InvalidParams(format!("duplicate vertex {c:?}")));
            }
        }

        let n = coords.len();
        let mut edges: Vec<(usize, usize)> = Vec::with_capacity(edge_list.len());
        for (a, b) in edge_list {
            if a >= n || b >= n {
                return Err(Error::InvalidParams(format!("edge ({a},{b}) out of range")));
            }
            if a == b {
                return Err(Error::InvalidParams(format!("self-loop at vertex {a}")));
            }
            let (x, y) = (rank[a].min(rank[b]), rank[a].max(rank[b]));
            edges.push((x, y));
        }
        edges.sort_unstable();
        if edges.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParams("duplicate edge".into()));
        }

        let mut adjacency = vec![Vec::new(); n];
        for (e, &(x, y)) in edges.iter().enumerate() {
            adjacency[x].push((e, y));
            adjacency[y].push((e, x));
        }

        let mut is_boundary = vec![false; n];
        let mut bnd: Vec<usize> = boundary.iter().map(|&v| rank[v]).collect();
        bnd.sort_unstable();
        bnd.dedup();
        for &v in &bnd {
            is_boundary[v] = true;
        }

        Ok(FiniteGraph {
            dim,
            coords,
            edges,
            adjacency,
            boundary: bnd,
            is_boundary,
            index,
            box_radius: None,
        })
    }

    /// Open rectangular grid with vertex coordinates `0..dims[i]` in each
    /// axis and no designated boundary.
    pub fn grid(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() || dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidParams("grid dimensions must be positive".into()));
        }
        let lo = vec![0i64; dims.len()];
        let hi: Vec<i64> = dims.iter().map(|&d| d as i64 - 1).collect();
        Self::finish_lattice(enumerate_cells(&lo, &hi), None)
    }

    fn finish_lattice(vertices: Vec<Vec<i64>>, box_radius: Option<usize>) -> Result<Self> {
        let index: HashMap<Vec<i64>, usize> =
            vertices.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();
        let mut edge_list = Vec::new();
        for (i, c) in vertices.iter().enumerate() {
            // Scan +1 in each axis; every lattice edge is found exactly once.
            for axis in 0..c.len() {
                let mut nb = c.clone();
                nb[axis] += 1;
                if let Some(&j) = index.get(&nb) {
                    edge_list.push((i, j));
                }
            }
        }
        let boundary = match box_radius {
            Some(n) => {
                let lim = n as i64;
                vertices
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.iter().any(|&x| x.abs() > lim))
                    .map(|(i, _)| i)
                    .collect()
            }
            None => Vec::new(),
        };
        let mut g = Self::from_parts(vertices, edge_list, boundary)?;
        g.box_radius = box_radius;
        Ok(g)
    }

    pub fn vertex_count(&self) -> usize {
        self.coords.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    /// Box radius `n` for graphs built by [`build_box`].
    pub fn box_radius(&self) -> Option<usize> {
        self.box_radius
    }

    #[inline]
    pub fn coords(&self, v: VertexId) -> &[i64] {
        &self.coords[v]
    }

    #[inline]
    pub fn endpoints(&self, e: EdgeId) -> (VertexId, VertexId) {
        self.edges[e]
    }

    #[inline]
    pub fn incident(&self, v: VertexId) -> &[(EdgeId, VertexId)] {
        &self.adjacency[v]
    }

    #[inline]
    pub fn degree(&self, v: VertexId) -> usize {
        self.adjacency[v].len()
    }

    pub fn boundary_vertices(&self) -> &[VertexId] {
        &self.boundary
    }

    #[inline]
    pub fn is_boundary(&self, v: VertexId) -> bool {
        self.is_boundary[v]
    }

    pub fn vertex_at(&self, coords: &[i64]) -> Option<VertexId> {
        self.index.get(coords).copied()
    }

    /// Edge between two vertices, if present.
    pub fn edge_between(&self, x: VertexId, y: VertexId) -> Option<EdgeId> {
        self.adjacency[x].iter().find(|&&(_, w)| w == y).map(|&(e, _)| e)
    }

    /// Edges whose both endpoints are boundary vertices (the set frozen
    /// open under wired boundary conditions).
    pub fn boundary_ring_edges(&self) -> Vec<EdgeId> {
        (0..self.edge_count())
            .filter(|&e| {
                let (x, y) = self.edges[e];
                self.is_boundary[x] && self.is_boundary[y]
            })
            .collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self.box_radius {
            Some(n) => serde_json::json!({ "dimension": self.dim, "radius": n }),
            None => serde_json::json!({
                "vertices": self.coords,
                "edges": self.edges.iter().map(|&(a, b)| [a, b]).collect::<Vec<_>>(),
                "boundary": self.boundary,
            }),
        }
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct BoxDoc {
            dimension: usize,
            radius: usize,
        }
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct GeneralDoc {
            vertices: Vec<Vec<i64>>,
            edges: Vec<(usize, usize)>,
            #[serde(default)]
            boundary: Vec<usize>,
        }
        if value.get("dimension").is_some() {
            let doc: BoxDoc = serde_json::from_value(value.clone())?;
            build_box(doc.dimension, doc.radius)
        } else {
            let doc: GeneralDoc = serde_json::from_value(value.clone())?;
            Self::from_parts(doc.vertices, doc.edges, doc.boundary)
        }
    }

    /// Subgraph induced by a vertex subset. Returns the subgraph together
    /// with maps from subgraph vertex/edge ids back to ids in `self`.
    pub fn induced_subgraph(&self, keep: &[bool]) -> (FiniteGraph, Vec<VertexId>, Vec<EdgeId>) {
        assert_eq!(keep.len(), self.vertex_count());
        let vertex_map: Vec<usize> = (0..self.vertex_count()).filter(|&v| keep[v]).collect();
        let mut back = vec![usize::MAX; self.vertex_count()];
        for (new, &old) in vertex_map.iter().enumerate() {
            back[old] = new;
        }
        let mut edge_map = Vec::new();
        let mut edge_list = Vec::new();
        for (e, &(x, y)) in self.edges.iter().enumerate() {
            if keep[x] && keep[y] {
                edge_map.push(e);
                edge_list.push((back[x], back[y]));
            }
        }
        let coords = vertex_map.iter().map(|&v| self.coords[v].clone()).collect();
        let boundary = vertex_map
            .iter()
            .enumerate()
            .filter(|(_, &old)| self.is_boundary[old])
            .map(|(new, _)| new)
            .collect();
        // Vertex ids are already in lexicographic order, so from_parts
        // preserves the maps built above.
        let sub = FiniteGraph::from_parts(coords, edge_list, boundary)
            .expect("induced subgraph of a valid graph is valid");
        (sub, vertex_map, edge_map)
    }
}

/// All integer tuples in the product range `[lo_i, hi_i]`, lexicographic.
fn enumerate_cells(lo: &[i64], hi: &[i64]) -> Vec<Vec<i64>> {
    let d = lo.len();
    let mut out = Vec::new();
    let mut cursor = lo.to_vec();
    'outer: loop {
        out.push(cursor.clone());
        for axis in (0..d).rev() {
            cursor[axis] += 1;
            if cursor[axis] <= hi[axis] {
                continue 'outer;
            }
            cursor[axis] = lo[axis];
        }
        return out;
    }
}

/// Builds the box graph `G_n = (Λ_n ∪ ∂Λ_n, E_n)` in dimension `d`.
pub fn build_box(d: usize, n: usize) -> Result<FiniteGraph> {
    if d == 0 || n == 0 {
        return Err(Error::InvalidParams(format!(
            "build_box needs d >= 1, n >= 1 (got d={d}, n={n})"
        )));
    }
    let lim = n as i64;
    // Λ_n, then the 2d faces of ∂Λ_n (exactly one coordinate at ±(n+1)).
    let mut vertices = enumerate_cells(&vec![-lim; d], &vec![lim; d]);
    for axis in 0..d {
        for sign in [-1i64, 1] {
            let mut lo = vec![-lim; d];
            let mut hi = vec![lim; d];
            lo[axis] = sign * (lim + 1);
            hi[axis] = sign * (lim + 1);
            vertices.extend(enumerate_cells(&lo, &hi));
        }
    }
    FiniteGraph::finish_lattice(vertices, Some(n))
}

/// Whether a coordinate tuple lies in `Λ_k = {-k..k}^d`.
pub fn in_lambda(coords: &[i64], k: usize) -> bool {
    let lim = k as i64;
    coords.iter().all(|&x| x.abs() <= lim)
}

/// One open/closed state per edge.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BondConfig {
    open: Vec<bool>,
}

impl BondConfig {
    pub fn all_closed(edge_count: usize) -> Self {
        BondConfig { open: vec![false; edge_count] }
    }

    pub fn all_open(edge_count: usize) -> Self {
        BondConfig { open: vec![true; edge_count] }
    }

    pub fn from_mask(edge_count: usize, mask: u64) -> Self {
        assert!(edge_count <= 64);
        BondConfig { open: (0..edge_count).map(|e| mask >> e & 1 == 1).collect() }
    }

    pub fn to_mask(&self) -> u64 {
        assert!(self.open.len() <= 64);
        self.open.iter().enumerate().fold(0u64, |m, (e, &o)| m | (o as u64) << e)
    }

    pub fn len(&self) -> usize {
        self.open.len()
    }

    pub fn is_empty(&self) -> bool {
        self.open.is_empty()
    }

    #[inline]
    pub fn is_open(&self, e: EdgeId) -> bool {
        self.open[e]
    }

    #[inline]
    pub fn set(&mut self, e: EdgeId, open: bool) {
        self.open[e] = open;
    }

    pub fn count_open(&self) -> usize {
        self.open.iter().filter(|&&o| o).count()
    }
}

/// Per-vertex colors in `{1..s}`; `0` marks vertices outside the domain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpinConfig {
    colors: Vec<Color>,
}

impl SpinConfig {
    pub fn empty(vertex_count: usize) -> Self {
        SpinConfig { colors: vec![0; vertex_count] }
    }

    pub fn constant(vertex_count: usize, color: Color) -> Self {
        assert!(color > 0);
        SpinConfig { colors: vec![color; vertex_count] }
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }

    #[inline]
    pub fn get(&self, v: VertexId) -> Option<Color> {
        match self.colors[v] {
            0 => None,
            c => Some(c),
        }
    }

    #[inline]
    pub fn set(&mut self, v: VertexId, color: Color) {
        assert!(color > 0, "colors are 1-based");
        self.colors[v] = color;
    }

    pub fn clear(&mut self, v: VertexId) {
        self.colors[v] = 0;
    }

    pub fn is_total(&self) -> bool {
        self.colors.iter().all(|&c| c != 0)
    }

    pub fn defined(&self) -> impl Iterator<Item = (VertexId, Color)> + '_ {
        self.colors.iter().enumerate().filter(|(_, &c)| c != 0).map(|(v, &c)| (v, c))
    }
}

/// Union-find labeling of the open-edge subgraph. Isolated vertices are
/// singleton components; component ids are dense and ordered by each
/// component's smallest vertex id.
#[derive(Clone, Debug)]
pub struct ClusterLabeling {
    pub component_id: Vec<u32>,
    pub component_count: usize,
    pub members: Vec<Vec<VertexId>>,
}

struct Dsu {
    parent: Vec<u32>,
    rank: Vec<u8>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu { parent: (0..n as u32).collect(), rank: vec![0; n] }
    }

    fn reset(&mut self, n: usize) {
        self.parent.clear();
        self.parent.extend(0..n as u32);
        self.rank.clear();
        self.rank.resize(n, 0);
    }

    #[inline]
    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let g = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = g;
            x = g;
        }
        x
    }

    /// Returns true if the roots were distinct.
    #[inline]
    fn union(&mut self, x: u32, y: u32) -> bool {
        let (rx, ry) = (self.find(x), self.find(y));
        if rx == ry {
            return false;
        }
        let (a, b) = if self.rank[rx as usize] >= self.rank[ry as usize] { (rx, ry) } else { (ry, rx) };
        self.parent[b as usize] = a;
        if self.rank[a as usize] == self.rank[b as usize] {
            self.rank[a as usize] += 1;
        }
        true
    }
}

/// Incremental union-find over vertex ids.
pub struct UnionFind {
    dsu: Dsu,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind { dsu: Dsu::new(n) }
    }

    #[inline]
    pub fn union(&mut self, x: VertexId, y: VertexId) -> bool {
        self.dsu.union(x as u32, y as u32)
    }

    #[inline]
    pub fn find(&mut self, x: VertexId) -> VertexId {
        self.dsu.find(x as u32) as usize
    }

    #[inline]
    pub fn same(&mut self, x: VertexId, y: VertexId) -> bool {
        self.find(x) == self.find(y)
    }
}

/// Reusable union-find scratch for component counting in tight loops.
pub struct DsuScratch {
    dsu: Dsu,
}

impl DsuScratch {
    pub fn new(vertex_count: usize) -> Self {
        DsuScratch { dsu: Dsu::new(vertex_count) }
    }

    /// Number of connected components of the subgraph whose edges satisfy
    /// `open`.
    pub fn component_count<F: Fn(EdgeId) -> bool>(&mut self, g: &FiniteGraph, open: F) -> usize {
        self.load(g, open);
        let mut count = g.vertex_count();
        for v in 0..g.vertex_count() as u32 {
            if self.dsu.parent[v as usize] != v {
                count -= 1;
            }
        }
        count
    }

    /// Rebuilds the union-find over the edges satisfying `open`.
    pub fn load<F: Fn(EdgeId) -> bool>(&mut self, g: &FiniteGraph, open: F) {
        self.dsu.reset(g.vertex_count());
        for (e, &(x, y)) in g.edges.iter().enumerate() {
            if open(e) {
                self.dsu.union(x as u32, y as u32);
            }
        }
    }

    /// Representative of `v` in the structure built by the last
    /// [`DsuScratch::load`].
    #[inline]
    pub fn find(&mut self, v: VertexId) -> VertexId {
        self.dsu.find(v as u32) as usize
    }
}

/// Full cluster labeling of the open-bond subgraph.
pub fn label_clusters(g: &FiniteGraph, bonds: &BondConfig) -> ClusterLabeling {
    assert_eq!(bonds.len(), g.edge_count(), "bond config sized to graph");
    let mut dsu = Dsu::new(g.vertex_count());
    for (e, &(x, y)) in g.edges.iter().enumerate() {
        if bonds.is_open(e) {
            dsu.union(x as u32, y as u32);
        }
    }
    let n = g.vertex_count();
    let mut component_id = vec![u32::MAX; n];
    let mut root_to_id: HashMap<u32, u32> = HashMap::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for v in 0..n {
        let root = dsu.find(v as u32);
        let id = *root_to_id.entry(root).or_insert_with(|| {
            members.push(Vec::new());
            (members.len() - 1) as u32
        });
        component_id[v] = id;
        members[id as usize].push(v);
    }
    ClusterLabeling { component_id, component_count: members.len(), members }
}

/// The vertex boundary `∂H`: vertices outside `H` adjacent to some vertex
/// of `H`.
pub fn vertex_boundary(g: &FiniteGraph, h: &[VertexId]) -> Vec<VertexId> {
    let mut in_h = vec![false; g.vertex_count()];
    for &v in h {
        in_h[v] = true;
    }
    let mut seen = vec![false; g.vertex_count()];
    let mut out = Vec::new();
    for &v in h {
        for &(_, w) in g.incident(v) {
            if !in_h[w] && !seen[w] {
                seen[w] = true;
                out.push(w);
            }
        }
    }
    out.sort_unstable();
    out
}

/// The `k`-neighborhood `∂_k H`: vertices at graph distance `1..=k` from
/// `H`. `k = 1` coincides with [`vertex_boundary`].
pub fn k_neighborhood(g: &FiniteGraph, h: &[VertexId], k: usize) -> Vec<VertexId> {
    assert!(k >= 1);
    let mut dist = vec![usize::MAX; g.vertex_count()];
    let mut queue = std::collections::VecDeque::new();
    for &v in h {
        dist[v] = 0;
        queue.push_back(v);
    }
    let mut out = Vec::new();
    while let Some(v) = queue.pop_front() {
        if dist[v] == k {
            continue;
        }
        for &(_, w) in g.incident(v) {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                out.push(w);
                queue.push_back(w);
            }
        }
    }
    out.sort_unstable();
    out
}

/// The edge boundary `ΔW`: edges with exactly one endpoint in `W`.
pub fn edge_boundary(g: &FiniteGraph, w: &[VertexId]) -> Vec<EdgeId> {
    let mut in_w = vec![false; g.vertex_count()];
    for &v in w {
        in_w[v] = true;
    }
    (0..g.edge_count())
        .filter(|&e| {
            let (x, y) = g.edges[e];
            in_w[x] != in_w[y]
        })
        .collect()
}

/// Reusable scratch for repeated connectivity queries. Visit marks are
/// epoch-stamped so queries are allocation-free after warmup.
pub struct ConnScratch {
    mark: Vec<u32>,
    side: Vec<u8>,
    epoch: u32,
    frontier_a: Vec<VertexId>,
    frontier_b: Vec<VertexId>,
    next: Vec<VertexId>,
}

impl ConnScratch {
    pub fn new(vertex_count: usize) -> Self {
        ConnScratch {
            mark: vec![0; vertex_count],
            side: vec![0; vertex_count],
            epoch: 0,
            frontier_a: Vec::new(),
            frontier_b: Vec::new(),
            next: Vec::new(),
        }
    }

    fn bump(&mut self, n: usize) {
        if self.mark.len() < n {
            self.mark.resize(n, 0);
            self.side.resize(n, 0);
        }
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.mark.iter_mut().for_each(|m| *m = 0);
            self.epoch = 1;
        }
    }

    /// Bidirectional BFS: is there a path from `x` to `y` whose edges all
    /// satisfy `passable`?
    pub fn connected<F: Fn(EdgeId) -> bool>(
        &mut self,
        g: &FiniteGraph,
        x: VertexId,
        y: VertexId,
        passable: F,
    ) -> bool {
        if x == y {
            return true;
        }
        self.bump(g.vertex_count());
        let epoch = self.epoch;
        self.mark[x] = epoch;
        self.side[x] = 0;
        self.mark[y] = epoch;
        self.side[y] = 1;
        self.frontier_a.clear();
        self.frontier_a.push(x);
        self.frontier_b.clear();
        self.frontier_b.push(y);
        loop {
            // Expand the smaller frontier.
            let expand_a = self.frontier_a.len() <= self.frontier_b.len();
            let (frontier, my_side) = if expand_a {
                (&mut self.frontier_a, 0u8)
            } else {
                (&mut self.frontier_b, 1u8)
            };
            if frontier.is_empty() {
                return false;
            }
            self.next.clear();
            for &v in frontier.iter() {
                for &(e, w) in g.incident(v) {
                    if !passable(e) {
                        continue;
                    }
                    if self.mark[w] == epoch {
                        if self.side[w] != my_side {
                            return true;
                        }
                    } else {
                        self.mark[w] = epoch;
                        self.side[w] = my_side;
                        self.next.push(w);
                    }
                }
            }
            std::mem::swap(frontier, &mut self.next);
        }
    }

    /// Is any vertex of `targets` reachable from `sources` through
    /// `passable` edges? `targets` is given as a membership mask.
    pub fn set_connected<F: Fn(EdgeId) -> bool>(
        &mut self,
        g: &FiniteGraph,
        sources: &[VertexId],
        targets: &[bool],
        passable: F,
    ) -> bool {
        self.bump(g.vertex_count());
        let epoch = self.epoch;
        self.frontier_a.clear();
        for &v in sources {
            if targets[v] {
                return true;
            }
            if self.mark[v] != epoch {
                self.mark[v] = epoch;
                self.frontier_a.push(v);
            }
        }
        while let Some(v) = self.frontier_a.pop() {
            for &(e, w) in g.incident(v) {
                if !passable(e) || self.mark[w] == epoch {
                    continue;
                }
                if targets[w] {
                    return true;
                }
                self.mark[w] = epoch;
                self.frontier_a.push(w);
            }
        }
        false
    }
}

/// True iff an open path joins `x` and `y` using no edge from `excluded`.
pub fn connected_excluding(
    g: &FiniteGraph,
    bonds: &BondConfig,
    x: VertexId,
    y: VertexId,
    excluded: &[EdgeId],
) -> bool {
    let mut scratch = ConnScratch::new(g.vertex_count());
    scratch.connected(g, x, y, |e| bonds.is_open(e) && !excluded.contains(&e))
}

/// An edge set separating the graph, with the component(s) containing the
/// designated boundary as exterior and everything else as interior.
#[derive(Clone, Debug)]
pub struct Barrier {
    pub edges: Vec<EdgeId>,
    pub interior_vertices: Vec<VertexId>,
    pub interior_edges: Vec<EdgeId>,
    pub exterior_vertices: Vec<VertexId>,
    pub exterior_edges: Vec<EdgeId>,
}

impl Barrier {
    /// Max Chebyshev norm over interior vertex coordinates; a containment
    /// radius for barriers around the origin.
    pub fn interior_radius(&self, g: &FiniteGraph) -> i64 {
        self.interior_vertices
            .iter()
            .map(|&v| g.coords(v).iter().map(|x| x.abs()).max().unwrap_or(0))
            .max()
            .unwrap_or(0)
    }
}

/// Checks whether removing `b` separates the graph into a part containing
/// the designated boundary and at least one other part. Returns the
/// resulting [`Barrier`] (interior = union of the non-boundary parts), or
/// `None` when no separation occurs. Graphs without designated boundary
/// have no exterior, hence no barriers.
pub fn is_barrier(g: &FiniteGraph, b: &[EdgeId]) -> Option<Barrier> {
    if g.boundary.is_empty() {
        return None;
    }
    let mut in_b = vec![false; g.edge_count()];
    for &e in b {
        in_b[e] = true;
    }
    let mut dsu = Dsu::new(g.vertex_count());
    for (e, &(x, y)) in g.edges.iter().enumerate() {
        if !in_b[e] {
            dsu.union(x as u32, y as u32);
        }
    }
    let mut root_exterior = vec![false; g.vertex_count()];
    for &v in &g.boundary {
        let r = dsu.find(v as u32) as usize;
        root_exterior[r] = true;
    }
    let mut interior_vertices = Vec::new();
    let mut exterior_vertices = Vec::new();
    for v in 0..g.vertex_count() {
        if root_exterior[dsu.find(v as u32) as usize] {
            exterior_vertices.push(v);
        } else {
            interior_vertices.push(v);
        }
    }
    if interior_vertices.is_empty() {
        return None;
    }
    let mut interior_mask = vec![false; g.vertex_count()];
    for &v in &interior_vertices {
        interior_mask[v] = true;
    }
    let mut interior_edges = Vec::new();
    let mut exterior_edges = Vec::new();
    for (e, &(x, y)) in g.edges.iter().enumerate() {
        if in_b[e] {
            continue;
        }
        // Components never straddle the removed set.
        if interior_mask[x] {
            interior_edges.push(e);
        } else {
            exterior_edges.push(e);
        }
        debug_assert_eq!(interior_mask[x], interior_mask[y]);
    }
    Some(Barrier {
        edges: b.to_vec(),
        interior_vertices,
        interior_edges,
        exterior_vertices,
        exterior_edges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent neighbor-scan oracle: count unordered vertex pairs at
    /// Euclidean distance one.
    fn scan_edge_count(g: &FiniteGraph) -> usize {
        let mut count = 0;
        for i in 0..g.vertex_count() {
            for j in (i + 1)..g.vertex_count() {
                let d2: i64 = g
                    .coords(i)
                    .iter()
                    .zip(g.coords(j))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                if d2 == 1 {
                    count += 1;
                }
            }
        }
        count
    }

    #[test]
    fn box_d1_n1() {
        let g = build_box(1, 1).unwrap();
        assert_eq!(g.vertex_count(), 5);
        assert_eq!(g.edge_count(), 4);
        let coords: Vec<i64> = (0..5).map(|v| g.coords(v)[0]).collect();
        assert_eq!(coords, vec![-2, -1, 0, 1, 2]);
        assert_eq!(g.boundary_vertices().len(), 2);
    }

    #[test]
    fn box_d2_n1_golden() {
        let g = build_box(2, 1).unwrap();
        assert_eq!(g.vertex_count(), 21);
        // Golden value cross-checked by the neighbor scan below.
        assert_eq!(g.edge_count(), 32);
        assert_eq!(scan_edge_count(&g), 32);
        assert_eq!(g.boundary_vertices().len(), 12);
    }

    #[test]
    fn box_d2_n2_golden() {
        let g = build_box(2, 2).unwrap();
        // Λ_2 has 25 vertices plus |∂Λ_2| = 20.
        assert_eq!(g.vertex_count(), 45);
        assert_eq!(g.edge_count(), scan_edge_count(&g));
        assert_eq!(g.boundary_vertices().len(), 20);
    }

    #[test]
    fn box_rejects_degenerate() {
        assert!(build_box(0, 3).is_err());
        assert!(build_box(2, 0).is_err());
    }

    #[test]
    fn box_edges_match_scan_d3() {
        let g = build_box(3, 1).unwrap();
        assert_eq!(g.edge_count(), scan_edge_count(&g));
    }

    #[test]
    fn vertex_boundary_cases() {
        let g = build_box(2, 3).unwrap();
        let all: Vec<usize> = (0..g.vertex_count()).collect();
        assert!(vertex_boundary(&g, &all).is_empty());

        let origin = g.vertex_at(&[0, 0]).unwrap();
        assert_eq!(vertex_boundary(&g, &[origin]).len(), 4);

        let lambda1: Vec<usize> =
            (0..g.vertex_count()).filter(|&v| in_lambda(g.coords(v), 1)).collect();
        assert_eq!(lambda1.len(), 9);
        assert_eq!(vertex_boundary(&g, &lambda1).len(), 12);
    }

    #[test]
    fn k_neighborhood_cases() {
        let g = build_box(2, 3).unwrap();
        let origin = g.vertex_at(&[0, 0]).unwrap();
        assert_eq!(k_neighborhood(&g, &[origin], 1), vertex_boundary(&g, &[origin]));
        assert_eq!(k_neighborhood(&g, &[origin], 2).len(), 12);
        let all: Vec<usize> = (0..g.vertex_count()).collect();
        assert!(k_neighborhood(&g, &all, 3).is_empty());
    }

    #[test]
    fn edge_boundary_cases() {
        let g = build_box(2, 3).unwrap();
        assert!(edge_boundary(&g, &[]).is_empty());
        let origin = g.vertex_at(&[0, 0]).unwrap();
        assert_eq!(edge_boundary(&g, &[origin]).len(), 4);
        let lambda1: Vec<usize> =
            (0..g.vertex_count()).filter(|&v| in_lambda(g.coords(v), 1)).collect();
        assert_eq!(edge_boundary(&g, &lambda1).len(), 12);
    }

    #[test]
    fn cluster_labeling_cases() {
        let g = build_box(1, 1).unwrap();
        let closed = BondConfig::all_closed(g.edge_count());
        assert_eq!(label_clusters(&g, &closed).component_count, 5);

        let open = BondConfig::all_open(g.edge_count());
        assert_eq!(label_clusters(&g, &open).component_count, 1);

        // Only the edge {-1, 0} open: 4 components.
        let a = g.vertex_at(&[-1]).unwrap();
        let b = g.vertex_at(&[0]).unwrap();
        let e = g.edge_between(a, b).unwrap();
        let mut bonds = BondConfig::all_closed(g.edge_count());
        bonds.set(e, true);
        let lab = label_clusters(&g, &bonds);
        assert_eq!(lab.component_count, 4);
        assert_eq!(lab.component_id[a], lab.component_id[b]);
        let total: usize = lab.members.iter().map(|m| m.len()).sum();
        assert_eq!(total, g.vertex_count());
    }

    #[test]
    fn connected_excluding_cases() {
        let tri = FiniteGraph::from_parts(
            vec![vec![0], vec![1], vec![2]],
            vec![(0, 1), (1, 2), (0, 2)],
            vec![],
        )
        .unwrap();
        let open = BondConfig::all_open(tri.edge_count());
        let xy = tri.edge_between(0, 1).unwrap();
        assert!(connected_excluding(&tri, &open, 0, 1, &[xy]));
        assert!(connected_excluding(&tri, &open, 0, 0, &[]));
        let closed = BondConfig::all_closed(tri.edge_count());
        assert!(!connected_excluding(&tri, &closed, 0, 1, &[]));
    }

    #[test]
    fn barrier_cases() {
        let g = build_box(2, 2).unwrap();
        let origin = g.vertex_at(&[0, 0]).unwrap();
        let b = edge_boundary(&g, &[origin]);
        let barrier = is_barrier(&g, &b).expect("origin edge boundary separates");
        assert_eq!(barrier.interior_vertices, vec![origin]);

        assert!(is_barrier(&g, &[]).is_none());

        let lambda1: Vec<usize> =
            (0..g.vertex_count()).filter(|&v| in_lambda(g.coords(v), 1)).collect();
        let b1 = edge_boundary(&g, &lambda1);
        let barrier1 = is_barrier(&g, &b1).expect("Λ_1 edge boundary separates");
        let mut interior = barrier1.interior_vertices.clone();
        interior.sort_unstable();
        let mut expect = lambda1.clone();
        expect.sort_unstable();
        assert_eq!(interior, expect);
        // Non-barrier edges are partitioned.
        assert_eq!(
            barrier1.interior_edges.len() + barrier1.exterior_edges.len() + b1.len(),
            g.edge_count()
        );
    }

    #[test]
    fn grid_and_json_round_trip() {
        let g = FiniteGraph::grid(&[2, 2]).unwrap();
        assert_eq!(g.vertex_count(), 4);
        assert_eq!(g.edge_count(), 4);

        let doc = build_box(2, 1).unwrap().to_json();
        let back = FiniteGraph::from_json(&doc).unwrap();
        assert_eq!(back.vertex_count(), 21);

        let doc2 = g.to_json();
        let back2 = FiniteGraph::from_json(&doc2).unwrap();
        assert_eq!(back2.edge_count(), 4);
    }

    #[test]
    fn rejects_malformed_graphs() {
        assert!(FiniteGraph::from_parts(vec![vec![0], vec![0]], vec![], vec![]).is_err());
        assert!(FiniteGraph::from_parts(vec![vec![0], vec![1]], vec![(0, 0)], vec![]).is_err());
        assert!(
            FiniteGraph::from_parts(vec![vec![0], vec![1]], vec![(0, 1), (1, 0)], vec![]).is_err()
        );
    }
}
