//! Metric graphs: explicit finite graphs and depth-truncated self-similar
//! trees.
//!
//! Vertices are identified by string names. Trees built from a [`TreeSpec`]
//! use the address word of each vertex as its name (the root is the empty
//! word), with children ordered `0..b-1`, so boundary addresses map onto
//! vertices exactly.

use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Parameters of a self-similar rooted tree: every vertex has `b` children
/// and the edge below a depth-`k` vertex has length `l0 * r^k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeSpec {
    pub b: u32,
    pub r: f64,
    pub l0: f64,
    pub depth: u32,
}

impl TreeSpec {
    pub fn new(b: u32, r: f64, l0: f64, depth: u32) -> Result<Self> {
        if b < 2 {
            return Err(Error::InvalidTreeSpec(format!("branching b = {b} must be >= 2")));
        }
        if b > 10 {
            return Err(Error::InvalidTreeSpec(format!(
                "branching b = {b} exceeds 10; address words use single digits"
            )));
        }
        if !(r > 0.0 && r < 1.0) || !r.is_finite() {
            return Err(Error::InvalidTreeSpec(format!("ratio r = {r} must lie in (0,1)")));
        }
        if !(l0 > 0.0) || !l0.is_finite() {
            return Err(Error::InvalidTreeSpec(format!("root edge length l0 = {l0} must be positive")));
        }
        if depth < 1 {
            return Err(Error::InvalidTreeSpec("depth must be >= 1".into()));
        }
        Ok(TreeSpec { b, r, l0, depth })
    }

    /// Length of an edge whose tail vertex sits at depth `k`.
    pub fn edge_len(&self, k: u32) -> f64 {
        self.l0 * self.r.powi(k as i32)
    }

    /// Metric length of the infinite tail hanging below a depth-`k` vertex:
    /// `l0 * r^k / (1 - r)`.
    pub fn tail_length(&self, k: u32) -> f64 {
        self.l0 * self.r.powi(k as i32) / (1.0 - self.r)
    }

    /// Effective resistance of the infinite homogeneous subtree below a
    /// depth-`k` vertex, with unit conductivity per unit length:
    /// `l0 * r^k / (b - r)`.
    ///
    /// Each child contributes an edge of length `l0 r^k` in series with the
    /// next stage, and the `b` children act in parallel; self-similarity
    /// gives the closed form.
    pub fn tail_resistance(&self, k: u32) -> f64 {
        self.l0 * self.r.powi(k as i32) / (self.b as f64 - self.r)
    }

    /// Total volume of the infinite subtree below a depth-`k` vertex,
    /// finite iff `b*r < 1`.
    pub fn tail_volume(&self, k: u32) -> Option<f64> {
        let br = self.b as f64 * self.r;
        if br < 1.0 {
            Some(self.b as f64 * self.l0 * self.r.powi(k as i32) / (1.0 - br))
        } else {
            None
        }
    }

    /// Whether the infinite tree has finite volume (`b*r < 1`).
    pub fn summable(&self) -> bool {
        (self.b as f64) * self.r < 1.0
    }

    /// Volume of the whole infinite tree, `b*l0/(1-b*r)`, when finite.
    pub fn infinite_volume(&self) -> Option<f64> {
        self.tail_volume(0)
    }

    /// Diameter of the cylinder of ends extending a depth-`n` word, in the
    /// completion metric: two ends diverging at the word's vertex descend
    /// disjoint tails, so the diameter is `2 * l0 * r^n / (1 - r)`.
    pub fn cylinder_diameter(&self, word_len: u32) -> f64 {
        2.0 * self.tail_length(word_len)
    }

    /// Number of vertices of the depth-`d` truncation.
    pub fn vertex_count(&self) -> usize {
        let b = self.b as usize;
        let mut total = 1usize;
        let mut level = 1usize;
        for _ in 0..self.depth {
            level *= b;
            total += level;
        }
        total
    }
}

/// A point of a metric graph: an offset along an edge. Offsets `0` and
/// `length` alias the tail and head vertices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphPoint {
    pub edge: usize,
    pub offset: f64,
}

impl GraphPoint {
    pub fn new(edge: usize, offset: f64) -> Self {
        GraphPoint { edge, offset }
    }
}

#[derive(Debug, Clone)]
pub struct EdgeData {
    pub tail: usize,
    pub head: usize,
    pub length: f64,
}

#[derive(Debug, Clone)]
struct TreeMeta {
    spec: TreeSpec,
    depth: Vec<u32>,
    parent_edge: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
}

/// A connected, locally finite metric graph with tagged boundary vertices.
///
/// Subgraphs produced by [`MetricGraph::epsilon_core`] may be empty or
/// disconnected; graphs built through [`build_tree`] and [`build_explicit`]
/// are always connected.
#[derive(Debug, Clone)]
pub struct MetricGraph {
    names: Vec<String>,
    index: BTreeMap<String, usize>,
    edges: Vec<EdgeData>,
    incident: Vec<Vec<usize>>,
    boundary: Vec<bool>,
    origin: Option<usize>,
    tree: Option<TreeMeta>,
}

impl MetricGraph {
    pub(crate) fn from_parts_unchecked(
        names: Vec<String>,
        edges: Vec<EdgeData>,
        boundary: Vec<bool>,
        origin: Option<usize>,
    ) -> Self {
        let index: BTreeMap<String, usize> =
            names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        let mut incident = vec![Vec::new(); names.len()];
        for (e, ed) in edges.iter().enumerate() {
            incident[ed.tail].push(e);
            if ed.head != ed.tail {
                incident[ed.head].push(e);
            }
        }
        MetricGraph { names, index, edges, incident, boundary, origin, tree: None }
    }

    pub fn vertex_count(&self) -> usize {
        self.names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex_name(&self, v: usize) -> &str {
        &self.names[v]
    }

    pub fn vertex_index(&self, name: &str) -> Result<usize> {
        self.index.get(name).copied().ok_or_else(|| Error::UnknownVertex(name.to_string()))
    }

    pub fn edge(&self, e: usize) -> &EdgeData {
        &self.edges[e]
    }

    pub fn edges(&self) -> &[EdgeData] {
        &self.edges
    }

    /// Edge ids incident on `v`.
    pub fn incident(&self, v: usize) -> &[usize] {
        &self.incident[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.incident[v]
            .iter()
            .map(|&e| if self.edges[e].tail == self.edges[e].head { 2 } else { 1 })
            .sum()
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    pub fn boundary_vertices(&self) -> Vec<usize> {
        (0..self.names.len()).filter(|&v| self.boundary[v]).collect()
    }

    pub fn interior_vertices(&self) -> Vec<usize> {
        (0..self.names.len()).filter(|&v| !self.boundary[v]).collect()
    }

    pub fn origin(&self) -> Option<usize> {
        self.origin
    }

    /// The far endpoint of `e` as seen from `v`.
    pub fn other_end(&self, e: usize, v: usize) -> usize {
        let ed = &self.edges[e];
        if ed.tail == v {
            ed.head
        } else {
            ed.tail
        }
    }

    /// The tree spec this graph was built from, if any.
    pub fn tree_spec(&self) -> Option<&TreeSpec> {
        self.tree.as_ref().map(|t| &t.spec)
    }

    pub fn is_tree_graph(&self) -> bool {
        self.tree.is_some()
    }

    /// Depth of vertex `v` in a tree graph.
    pub fn tree_depth(&self, v: usize) -> Result<u32> {
        Ok(self.tree.as_ref().ok_or(Error::NotATree)?.depth[v])
    }

    /// Parent edge of `v` in a tree graph (`None` at the root).
    pub fn tree_parent_edge(&self, v: usize) -> Result<Option<usize>> {
        Ok(self.tree.as_ref().ok_or(Error::NotATree)?.parent_edge[v])
    }

    /// Child vertices of `v` in canonical `0..b-1` order.
    pub fn tree_children(&self, v: usize) -> Result<&[usize]> {
        Ok(&self.tree.as_ref().ok_or(Error::NotATree)?.children[v])
    }

    /// Depth-`spec.depth` leaves of a tree graph, in address order.
    pub fn tree_leaves(&self) -> Result<Vec<usize>> {
        let meta = self.tree.as_ref().ok_or(Error::NotATree)?;
        Ok((0..self.names.len()).filter(|&v| meta.depth[v] == meta.spec.depth).collect())
    }

    /// Vertices sorted by decreasing tree depth (leaves first, root last).
    pub fn tree_bottom_up(&self) -> Result<Vec<usize>> {
        let meta = self.tree.as_ref().ok_or(Error::NotATree)?;
        let mut order: Vec<usize> = (0..self.names.len()).collect();
        order.sort_by(|&a, &b| meta.depth[b].cmp(&meta.depth[a]).then(a.cmp(&b)));
        Ok(order)
    }

    /// Validates that `p` lies on the graph.
    pub fn check_point(&self, p: GraphPoint) -> Result<()> {
        if p.edge >= self.edges.len() {
            return Err(Error::InvalidPoint(format!("edge {} out of range", p.edge)));
        }
        let l = self.edges[p.edge].length;
        if !(0.0..=l).contains(&p.offset) || !p.offset.is_finite() {
            return Err(Error::InvalidPoint(format!(
                "offset {} outside [0, {}] on edge {}",
                p.offset, l, p.edge
            )));
        }
        Ok(())
    }

    /// The vertex aliased by `p`, if its offset is an edge endpoint.
    pub fn point_as_vertex(&self, p: GraphPoint) -> Option<usize> {
        let ed = &self.edges[p.edge];
        if p.offset == 0.0 {
            Some(ed.tail)
        } else if p.offset == ed.length {
            Some(ed.head)
        } else {
            None
        }
    }

    pub fn vertex_point(&self, v: usize) -> GraphPoint {
        let e = self.incident[v][0];
        if self.edges[e].tail == v {
            GraphPoint::new(e, 0.0)
        } else {
            GraphPoint::new(e, self.edges[e].length)
        }
    }

    /// Single-source shortest-path distances from `v` to every vertex.
    pub fn distances_from(&self, v: usize) -> Vec<f64> {
        self.multi_source_distances(std::iter::once((v, 0.0)))
    }

    /// Dijkstra from a set of seeded vertices with initial offsets.
    pub fn multi_source_distances(&self, sources: impl IntoIterator<Item = (usize, f64)>) -> Vec<f64> {
        let n = self.names.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut heap: BinaryHeap<HeapItem> = BinaryHeap::new();
        for (v, d0) in sources {
            if d0 < dist[v] {
                dist[v] = d0;
                heap.push(HeapItem { dist: d0, vertex: v });
            }
        }
        while let Some(HeapItem { dist: d, vertex: v }) = heap.pop() {
            if d > dist[v] {
                continue;
            }
            for &e in &self.incident[v] {
                let w = self.other_end(e, v);
                let nd = d + self.edges[e].length;
                if nd < dist[w] {
                    dist[w] = nd;
                    heap.push(HeapItem { dist: nd, vertex: w });
                }
            }
        }
        dist
    }

    /// Geodesic distance between two points of the graph.
    pub fn geodesic_distance(&self, p: GraphPoint, q: GraphPoint) -> Result<f64> {
        self.check_point(p)?;
        self.check_point(q)?;
        let ep = &self.edges[p.edge];
        let eq = &self.edges[q.edge];
        let mut best = if p.edge == q.edge { (p.offset - q.offset).abs() } else { f64::INFINITY };
        // Route through edge endpoints; covers all paths leaving the edges.
        let from_tail = self.distances_from(ep.tail);
        let from_head = self.distances_from(ep.head);
        for (dq, off_q) in [(&from_tail, p.offset), (&from_head, ep.length - p.offset)] {
            let via_tail = off_q + dq[eq.tail] + q.offset;
            let via_head = off_q + dq[eq.head] + (eq.length - q.offset);
            best = best.min(via_tail).min(via_head);
        }
        Ok(best)
    }

    /// Per-vertex distance to the nearest boundary vertex.
    pub fn distance_to_boundary(&self) -> Vec<f64> {
        self.multi_source_distances(
            (0..self.names.len()).filter(|&v| self.boundary[v]).map(|v| (v, 0.0)),
        )
    }

    /// Volume, diameter, and per-vertex boundary distances.
    pub fn metrics(&self) -> GraphMetrics {
        let volume = self.edges.iter().map(|e| e.length).sum();
        let diameter = if self.names.is_empty() {
            0.0
        } else if self.tree.is_some() {
            // Double sweep: exact on trees.
            let d0 = self.distances_from(0);
            let a = argmax(&d0);
            let da = self.distances_from(a);
            da.iter().cloned().fold(0.0, f64::max)
        } else {
            let mut best = 0.0f64;
            for v in 0..self.names.len() {
                let dv = self.distances_from(v);
                best = best.max(dv.iter().cloned().fold(0.0, f64::max));
            }
            best
        };
        GraphMetrics {
            volume,
            diameter,
            distance_to_boundary: self.distance_to_boundary(),
            infinite_volume: self.tree.as_ref().and_then(|t| t.spec.infinite_volume()),
        }
    }

    /// Maximum of `d(x, boundary)` over points `x` of edge `e`.
    ///
    /// On an edge the boundary distance is `min(d_tail + t, d_head + l - t)`,
    /// a concave piecewise-linear function, so the maximum sits at an
    /// endpoint or where the two branches cross.
    pub fn edge_max_boundary_distance(&self, e: usize, dist_boundary: &[f64]) -> f64 {
        let ed = &self.edges[e];
        let (du, dv, l) = (dist_boundary[ed.tail], dist_boundary[ed.head], ed.length);
        if du.is_infinite() || dv.is_infinite() {
            return f64::INFINITY;
        }
        let mut best = du.min(dv + l).max(dv.min(du + l));
        let t_star = (dv + l - du) / 2.0;
        if (0.0..=l).contains(&t_star) {
            best = best.max((du + dv + l) / 2.0);
        }
        best
    }

    /// The ε-core: the subgraph of closed edges containing some point at
    /// distance at least `eps` from the boundary. Whole edges are kept; no
    /// cut points are introduced. May be empty or disconnected.
    pub fn epsilon_core(&self, eps: f64) -> Result<MetricGraph> {
        if !(eps > 0.0) {
            return Err(Error::InvalidPoint(format!("epsilon {eps} must be positive")));
        }
        let dist = self.distance_to_boundary();
        let kept: Vec<usize> = (0..self.edges.len())
            .filter(|&e| self.edge_max_boundary_distance(e, &dist) >= eps)
            .collect();
        Ok(self.edge_subgraph(&kept))
    }

    /// Subgraph induced by a set of edges. Degree-1 vertices of the result
    /// and surviving boundary vertices are tagged boundary.
    pub fn edge_subgraph(&self, edge_ids: &[usize]) -> MetricGraph {
        let mut vmap: BTreeMap<usize, usize> = BTreeMap::new();
        let mut names = Vec::new();
        for &e in edge_ids {
            for v in [self.edges[e].tail, self.edges[e].head] {
                vmap.entry(v).or_insert_with(|| {
                    names.push(self.names[v].clone());
                    names.len() - 1
                });
            }
        }
        let edges: Vec<EdgeData> = edge_ids
            .iter()
            .map(|&e| EdgeData {
                tail: vmap[&self.edges[e].tail],
                head: vmap[&self.edges[e].head],
                length: self.edges[e].length,
            })
            .collect();
        let mut g = MetricGraph::from_parts_unchecked(
            names,
            edges,
            vec![false; vmap.len()],
            self.origin.and_then(|o| vmap.get(&o).copied()),
        );
        for (&old, &new) in &vmap {
            g.boundary[new] = self.boundary[old] || g.degree(new) == 1;
        }
        // Re-tag: any degree-1 vertex must be boundary.
        for v in 0..g.names.len() {
            if g.degree(v) == 1 {
                g.boundary[v] = true;
            }
        }
        g
    }

    /// Number of connected components (0 for the empty graph).
    pub fn component_count(&self) -> usize {
        let n = self.names.len();
        let mut seen = vec![false; n];
        let mut count = 0;
        for s in 0..n {
            if seen[s] {
                continue;
            }
            count += 1;
            let mut stack = vec![s];
            seen[s] = true;
            while let Some(v) = stack.pop() {
                for &e in &self.incident[v] {
                    let w = self.other_end(e, v);
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        count
    }

    /// Component count after deleting a set of vertices (with their edges).
    pub fn component_count_without(&self, removed: &BTreeSet<usize>) -> usize {
        let n = self.names.len();
        let mut seen = vec![false; n];
        for &v in removed {
            seen[v] = true;
        }
        let mut count = 0;
        for s in 0..n {
            if seen[s] {
                continue;
            }
            count += 1;
            let mut stack = vec![s];
            seen[s] = true;
            while let Some(v) = stack.pop() {
                for &e in &self.incident[v] {
                    let w = self.other_end(e, v);
                    if !seen[w] && !removed.contains(&self.other_end(e, v)) {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        count
    }

    /// Serializes to the line-oriented text format: a `boundary` header, an
    /// optional `origin` line, then one `tail head length` line per edge.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let names: Vec<&str> =
            self.boundary_vertices().iter().map(|&v| self.names[v].as_str()).collect();
        let _ = writeln!(out, "boundary {}", names.join(" "));
        if let Some(o) = self.origin {
            let _ = writeln!(out, "origin {}", self.names[o]);
        }
        for e in &self.edges {
            let _ = writeln!(out, "{} {} {:.17e}", self.names[e.tail], self.names[e.head], e.length);
        }
        out
    }

    /// Parses the text format produced by [`MetricGraph::to_text`].
    pub fn from_text(text: &str) -> Result<MetricGraph> {
        let mut boundary: Option<Vec<String>> = None;
        let mut origin: Option<String> = None;
        let mut edges: Vec<(String, String, f64)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let first = parts.next().unwrap();
            match first {
                "boundary" => {
                    boundary = Some(parts.map(str::to_string).collect());
                }
                "origin" => {
                    origin = Some(
                        parts
                            .next()
                            .ok_or_else(|| Error::Parse(format!("line {}: origin needs a vertex", lineno + 1)))?
                            .to_string(),
                    );
                }
                tail => {
                    let head = parts
                        .next()
                        .ok_or_else(|| Error::Parse(format!("line {}: expected 'tail head length'", lineno + 1)))?;
                    let len: f64 = parts
                        .next()
                        .ok_or_else(|| Error::Parse(format!("line {}: missing length", lineno + 1)))?
                        .parse()
                        .map_err(|e| Error::Parse(format!("line {}: bad length ({e})", lineno + 1)))?;
                    edges.push((tail.to_string(), head.to_string(), len));
                }
            }
        }
        let boundary = boundary.ok_or_else(|| Error::Parse("missing 'boundary' header".into()))?;
        let mut g = build_explicit(
            &edges.iter().map(|(t, h, l)| (t.as_str(), h.as_str(), *l)).collect::<Vec<_>>(),
            &boundary.iter().map(String::as_str).collect::<Vec<_>>(),
        )?;
        if let Some(o) = origin {
            g.origin = Some(g.vertex_index(&o)?);
        }
        Ok(g)
    }
}

/// Summary quantities of a graph.
#[derive(Debug, Clone)]
pub struct GraphMetrics {
    pub volume: f64,
    pub diameter: f64,
    pub distance_to_boundary: Vec<f64>,
    /// For tree graphs with `b*r < 1`, the volume of the untruncated tree.
    pub infinite_volume: Option<f64>,
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

#[derive(PartialEq)]
struct HeapItem {
    dist: f64,
    vertex: usize,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Min-heap on distance; lengths are finite positive so total order holds.
        other.dist.partial_cmp(&self.dist).unwrap().then(other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Builds the depth-truncated self-similar tree described by `spec`.
///
/// Vertex names are address words over `0..b-1` (root = empty word), listed
/// level by level in lexicographic order, so the truncation at depth `d` is a
/// prefix of the truncation at depth `d+1` with identical indices and
/// lengths. Depth-`d` leaves are tagged boundary.
pub fn build_tree(spec: TreeSpec) -> Result<MetricGraph> {
    TreeSpec::new(spec.b, spec.r, spec.l0, spec.depth)?;
    let b = spec.b as usize;
    let mut names: Vec<String> = vec![String::new()];
    let mut edges: Vec<EdgeData> = Vec::new();
    let mut depth: Vec<u32> = vec![0];
    let mut parent_edge: Vec<Option<usize>> = vec![None];
    let mut children: Vec<Vec<usize>> = vec![Vec::new()];
    let mut level_start = 0usize;
    for k in 0..spec.depth {
        let level_end = names.len();
        let len = spec.edge_len(k);
        for parent in level_start..level_end {
            for digit in 0..b {
                let child = names.len();
                let mut name = names[parent].clone();
                name.push(char::from(b'0' + digit as u8));
                names.push(name);
                depth.push(k + 1);
                edges.push(EdgeData { tail: parent, head: child, length: len });
                parent_edge.push(Some(edges.len() - 1));
                children.push(Vec::new());
                children[parent].push(child);
            }
        }
        level_start = level_end;
    }
    let n = names.len();
    let boundary: Vec<bool> = depth.iter().map(|&d| d == spec.depth).collect();
    let mut g = MetricGraph::from_parts_unchecked(names, edges, boundary, Some(0));
    debug_assert_eq!(g.vertex_count(), n);
    g.tree = Some(TreeMeta { spec, depth, parent_edge, children });
    Ok(g)
}

/// Builds and validates an explicit metric graph.
///
/// Rejects nonpositive lengths, disconnected graphs, unknown boundary names,
/// and degree-1 vertices left untagged.
pub fn build_explicit(edges: &[(&str, &str, f64)], boundary: &[&str]) -> Result<MetricGraph> {
    let mut names: Vec<String> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    let intern = |name: &str, names: &mut Vec<String>, index: &mut BTreeMap<String, usize>| {
        *index.entry(name.to_string()).or_insert_with(|| {
            names.push(name.to_string());
            names.len() - 1
        })
    };
    let mut edge_data = Vec::new();
    for &(tail, head, length) in edges {
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::NonpositiveLength(format!("({tail},{head})"), length));
        }
        let t = intern(tail, &mut names, &mut index);
        let h = intern(head, &mut names, &mut index);
        edge_data.push(EdgeData { tail: t, head: h, length });
    }
    if names.is_empty() {
        return Err(Error::Parse("graph has no edges".into()));
    }
    let mut btags = vec![false; names.len()];
    for &bname in boundary {
        let v = *index.get(bname).ok_or_else(|| Error::UnknownVertex(bname.to_string()))?;
        btags[v] = true;
    }
    let g = MetricGraph::from_parts_unchecked(names, edge_data, btags, None);
    if g.component_count() != 1 {
        return Err(Error::Disconnected);
    }
    for v in 0..g.vertex_count() {
        if g.degree(v) == 1 && !g.boundary[v] {
            return Err(Error::UntaggedLeaf(g.names[v].clone()));
        }
    }
    Ok(g)
}

/// Shared handle used by functions defined over a graph.
pub type GraphRef = Arc<MetricGraph>;
