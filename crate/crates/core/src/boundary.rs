//! The end space of a truncated self-similar tree: address words, clopen
//! cylinder partitions, boundary measures, step functions, separating vertex
//! sets, and eventually-flat cutoff functions.
//!
//! An address word over the alphabet `0..b-1` names the cylinder set of all
//! ends extending it; finite unions of cylinders form the computable clopen
//! algebra of the boundary.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::graph::{MetricGraph, TreeSpec};
use crate::piecewise::{EdgeShape, PiecewiseFunction};

/// A finite word over the branching alphabet, naming a cylinder of ends.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct EndAddress {
    digits: Vec<u8>,
}

impl EndAddress {
    pub fn root() -> Self {
        EndAddress { digits: Vec::new() }
    }

    pub fn from_digits(digits: Vec<u8>) -> Self {
        EndAddress { digits }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let mut digits = Vec::with_capacity(s.len());
        for ch in s.chars() {
            let d = ch
                .to_digit(10)
                .ok_or_else(|| Error::BadWord(s.to_string(), format!("non-digit character {ch:?}")))?;
            digits.push(d as u8);
        }
        Ok(EndAddress { digits })
    }

    pub fn digits(&self) -> &[u8] {
        &self.digits
    }

    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }

    pub fn child(&self, digit: u8) -> Self {
        let mut digits = self.digits.clone();
        digits.push(digit);
        EndAddress { digits }
    }

    pub fn is_prefix_of(&self, other: &EndAddress) -> bool {
        other.digits.len() >= self.digits.len() && other.digits[..self.digits.len()] == self.digits[..]
    }

    /// Length of the longest common prefix.
    pub fn common_prefix_len(&self, other: &EndAddress) -> usize {
        self.digits.iter().zip(&other.digits).take_while(|(a, b)| a == b).count()
    }

    /// Rejects digits outside `0..b` or words deeper than `max_depth`.
    pub fn validate(&self, b: u32, max_depth: Option<u32>) -> Result<()> {
        for &d in &self.digits {
            if u32::from(d) >= b {
                return Err(Error::BadWord(
                    self.to_string(),
                    format!("digit {d} outside alphabet 0..{b}"),
                ));
            }
        }
        if let Some(depth) = max_depth {
            if self.digits.len() as u32 > depth {
                return Err(Error::WordTooDeep(self.to_string(), depth));
            }
        }
        Ok(())
    }
}

impl fmt::Display for EndAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.digits {
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

/// One cell of a clopen partition: a finite union of cylinders.
#[derive(Debug, Clone)]
pub struct PartitionCell {
    pub id: String,
    pub words: Vec<EndAddress>,
    /// Id of the cell this one was refined from, when applicable.
    pub parent: Option<String>,
}

/// A finite partition of the end space into clopen cells.
#[derive(Debug, Clone)]
pub struct ClopenPartition {
    b: u32,
    cells: Vec<PartitionCell>,
}

impl ClopenPartition {
    /// Builds a partition from `(id, words)` pairs and validates coverage
    /// and disjointness.
    pub fn new(b: u32, cells: Vec<(String, Vec<EndAddress>)>) -> Result<Self> {
        let cells: Vec<PartitionCell> = cells
            .into_iter()
            .map(|(id, words)| PartitionCell { id, words, parent: None })
            .collect();
        let p = ClopenPartition { b, cells };
        p.validate()?;
        Ok(p)
    }

    /// The single-cell partition covering the whole boundary.
    pub fn whole(b: u32) -> Self {
        ClopenPartition {
            b,
            cells: vec![PartitionCell {
                id: String::new(),
                words: vec![EndAddress::root()],
                parent: None,
            }],
        }
    }

    /// The depth-`k` cylinder partition: `b^k` singleton-word cells whose
    /// diameters shrink geometrically in `k`.
    pub fn standard(b: u32, k: u32) -> Result<Self> {
        if !(2..=10).contains(&b) {
            return Err(Error::BadPartition(format!("branching {b} outside 2..=10")));
        }
        let mut cells = vec![PartitionCell {
            id: String::new(),
            words: vec![EndAddress::root()],
            parent: None,
        }];
        for _ in 0..k {
            let mut next = Vec::with_capacity(cells.len() * b as usize);
            for cell in &cells {
                for digit in 0..b as u8 {
                    let word = cell.words[0].child(digit);
                    next.push(PartitionCell {
                        id: word.to_string(),
                        words: vec![word],
                        parent: Some(cell.id.clone()),
                    });
                }
            }
            cells = next;
        }
        Ok(ClopenPartition { b, cells })
    }

    pub fn branching(&self) -> u32 {
        self.b
    }

    pub fn cells(&self) -> &[PartitionCell] {
        &self.cells
    }

    pub fn cell(&self, n: usize) -> &PartitionCell {
        &self.cells[n]
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Longest word length across all cells.
    pub fn max_word_len(&self) -> u32 {
        self.cells
            .iter()
            .flat_map(|c| c.words.iter())
            .map(|w| w.len() as u32)
            .max()
            .unwrap_or(0)
    }

    /// Checks prefix-freeness across all words and exact coverage of the end
    /// space (in exact integer arithmetic on cylinder weights).
    pub fn validate(&self) -> Result<()> {
        if self.cells.is_empty() {
            return Err(Error::BadPartition("partition has no cells".into()));
        }
        let mut words: Vec<(&EndAddress, &str)> = Vec::new();
        for cell in &self.cells {
            if cell.words.is_empty() {
                return Err(Error::BadPartition(format!("cell {:?} has no words", cell.id)));
            }
            for w in &cell.words {
                w.validate(self.b, None)?;
                words.push((w, &cell.id));
            }
        }
        for (i, (wi, ci)) in words.iter().enumerate() {
            for (wj, cj) in words.iter().skip(i + 1) {
                if wi.is_prefix_of(wj) || wj.is_prefix_of(wi) {
                    return Err(Error::BadPartition(format!(
                        "cylinder {wi} (cell {ci:?}) overlaps cylinder {wj} (cell {cj:?})"
                    )));
                }
            }
        }
        let depth = self.max_word_len();
        if depth > 38 {
            return Err(Error::BadPartition(format!("word depth {depth} too large to verify coverage")));
        }
        let full: u128 = (self.b as u128).pow(depth);
        let covered: u128 =
            words.iter().map(|(w, _)| (self.b as u128).pow(depth - w.len() as u32)).sum();
        if covered != full {
            return Err(Error::BadPartition(format!(
                "cylinders cover {covered}/{full} of the end space at depth {depth}"
            )));
        }
        Ok(())
    }

    /// The index of the cell whose cylinder contains all ends extending
    /// `word`, when `word` is at least as deep as the covering cylinder.
    pub fn cell_of_word(&self, word: &EndAddress) -> Option<usize> {
        self.cells
            .iter()
            .position(|c| c.words.iter().any(|w| w.is_prefix_of(word)))
    }

    /// Splits every cell word by appending one letter, producing singleton
    /// cells; cell ids record parentage.
    pub fn refine(&self) -> ClopenPartition {
        let mut cells = Vec::new();
        for cell in &self.cells {
            for word in &cell.words {
                for digit in 0..self.b as u8 {
                    let w = word.child(digit);
                    cells.push(PartitionCell {
                        id: w.to_string(),
                        words: vec![w],
                        parent: Some(cell.id.clone()),
                    });
                }
            }
        }
        ClopenPartition { b: self.b, cells }
    }

    /// Like [`ClopenPartition::refine`] but rejects refinements that exceed
    /// a truncation depth.
    pub fn refine_checked(&self, max_depth: u32) -> Result<ClopenPartition> {
        if self.max_word_len() + 1 > max_depth {
            return Err(Error::WordTooDeep(
                format!("refinement of depth-{} partition", self.max_word_len()),
                max_depth,
            ));
        }
        Ok(self.refine())
    }
}

/// A finite positive measure on the end space, given by masses on a
/// prefix-free family of cylinders and split uniformly below them.
#[derive(Debug, Clone)]
pub struct BoundaryMeasure {
    b: u32,
    atoms: Vec<(EndAddress, f64)>,
}

impl BoundaryMeasure {
    /// The uniform Bernoulli measure: `mass(word) = total * b^(-|word|)`.
    pub fn uniform(b: u32, total: f64) -> Result<Self> {
        BoundaryMeasure::with_atoms(b, vec![(EndAddress::root(), total)])
    }

    /// A measure with explicit masses on a prefix-free covering family.
    pub fn with_atoms(b: u32, atoms: Vec<(EndAddress, f64)>) -> Result<Self> {
        let cells = atoms
            .iter()
            .enumerate()
            .map(|(i, (w, _))| (format!("atom{i}"), vec![w.clone()]))
            .collect();
        ClopenPartition::new(b, cells)
            .map_err(|e| Error::BadPartition(format!("measure atoms must cover the boundary: {e}")))?;
        let total: f64 = atoms.iter().map(|(_, m)| m).sum();
        if !(total > 0.0) || atoms.iter().any(|(_, m)| *m < 0.0 || !m.is_finite()) {
            return Err(Error::BadPartition(
                "measure masses must be nonnegative with positive finite total".into(),
            ));
        }
        Ok(BoundaryMeasure { b, atoms })
    }

    pub fn branching(&self) -> u32 {
        self.b
    }

    pub fn total(&self) -> f64 {
        self.atoms.iter().map(|(_, m)| m).sum()
    }

    /// Mass of the cylinder named by `word`.
    pub fn mass_of_word(&self, word: &EndAddress) -> f64 {
        let mut mass = 0.0;
        for (atom, m) in &self.atoms {
            if atom.is_prefix_of(word) {
                mass += m * (self.b as f64).powi(-((word.len() - atom.len()) as i32));
            } else if word.is_prefix_of(atom) {
                mass += m;
            }
        }
        mass
    }

    /// Mass of a finite union of cylinders.
    pub fn measure_of(&self, words: &[EndAddress]) -> f64 {
        words.iter().map(|w| self.mass_of_word(w)).sum()
    }

    pub fn measure_of_cell(&self, cell: &PartitionCell) -> f64 {
        self.measure_of(&cell.words)
    }
}

/// A step function on the end space: one value per partition cell.
#[derive(Debug, Clone)]
pub struct StepFunction {
    pub partition: ClopenPartition,
    pub values: Vec<f64>,
}

impl StepFunction {
    pub fn new(partition: ClopenPartition, values: Vec<f64>) -> Result<Self> {
        if values.len() != partition.len() {
            return Err(Error::DimensionMismatch { expected: partition.len(), got: values.len() });
        }
        Ok(StepFunction { partition, values })
    }

    /// The indicator of cell `n` on the same partition.
    pub fn indicator(partition: ClopenPartition, n: usize) -> Result<Self> {
        let mut values = vec![0.0; partition.len()];
        if n >= values.len() {
            return Err(Error::DimensionMismatch { expected: partition.len(), got: n });
        }
        values[n] = 1.0;
        StepFunction::new(partition, values)
    }

    pub fn constant(b: u32, value: f64) -> Self {
        StepFunction { partition: ClopenPartition::whole(b), values: vec![value] }
    }

    /// Value on the cylinder of `word` (which must be at least as deep as
    /// the covering cell word).
    pub fn value_on_word(&self, word: &EndAddress) -> Result<f64> {
        self.partition
            .cell_of_word(word)
            .map(|n| self.values[n])
            .ok_or_else(|| Error::BadPartition(format!("word {word} not resolved by the partition")))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_constant(&self) -> bool {
        self.values.windows(2).all(|w| w[0] == w[1])
    }

    /// `∫ f g dμ` for two step functions, by recursive descent over the
    /// address tree; exact for cylinder measures.
    pub fn inner(&self, other: &StepFunction, mu: &BoundaryMeasure) -> f64 {
        fn descend(
            f: &StepFunction,
            g: &StepFunction,
            mu: &BoundaryMeasure,
            word: &EndAddress,
        ) -> f64 {
            let fv = f.partition.cell_of_word(word);
            let gv = g.partition.cell_of_word(word);
            match (fv, gv) {
                (Some(i), Some(j)) => f.values[i] * g.values[j] * mu.mass_of_word(word),
                _ => (0..f.partition.branching() as u8)
                    .map(|d| descend(f, g, mu, &word.child(d)))
                    .sum(),
            }
        }
        descend(self, other, mu, &EndAddress::root())
    }
}

/// The complement of a prefix-free cylinder family, again as a prefix-free
/// cylinder family (empty when the input covers everything).
pub fn complement_words(b: u32, words: &[EndAddress]) -> Vec<EndAddress> {
    fn descend(b: u32, words: &[EndAddress], node: &EndAddress, out: &mut Vec<EndAddress>) {
        if words.iter().any(|w| w.is_prefix_of(node)) {
            return;
        }
        if !words.iter().any(|w| node.is_prefix_of(w)) {
            out.push(node.clone());
            return;
        }
        for d in 0..b as u8 {
            descend(b, words, &node.child(d), out);
        }
    }
    let mut out = Vec::new();
    descend(b, words, &EndAddress::root(), &mut out);
    out
}

/// Distance from every vertex of a truncated tree to the set of ends named
/// by `words`, in the completion metric.
///
/// From a vertex inside a named subtree the nearest end lies straight below
/// it; otherwise the path climbs to the named vertex first and then descends
/// its tail.
pub fn end_set_distances(graph: &MetricGraph, words: &[EndAddress]) -> Result<Vec<f64>> {
    let spec = *graph.tree_spec().ok_or(Error::NotATree)?;
    let n = graph.vertex_count();
    let mut dist = vec![f64::INFINITY; n];
    for w in words {
        w.validate(spec.b, Some(spec.depth))?;
        let anchor = graph.vertex_index(&w.to_string())?;
        let from_anchor = graph.distances_from(anchor);
        let tail = spec.tail_length(w.len() as u32);
        for v in 0..n {
            // Inside the subtree the straight descent is shorter.
            let inside = graph.vertex_name(v).starts_with(&w.to_string());
            let d = if inside {
                spec.tail_length(graph.tree_depth(v)?)
            } else {
                from_anchor[v] + tail
            };
            if d < dist[v] {
                dist[v] = d;
            }
        }
    }
    Ok(dist)
}

/// Minimal completion distance between the end sets of two disjoint
/// prefix-free families.
pub fn end_set_separation(spec: &TreeSpec, a: &[EndAddress], b_words: &[EndAddress]) -> f64 {
    let mut best = f64::INFINITY;
    for u in a {
        for w in b_words {
            let p = u.common_prefix_len(w);
            let mut d = 0.0;
            for k in p..u.len() {
                d += spec.edge_len(k as u32);
            }
            for k in p..w.len() {
                d += spec.edge_len(k as u32);
            }
            d += spec.tail_length(u.len() as u32) + spec.tail_length(w.len() as u32);
            best = best.min(d);
        }
    }
    best
}

/// The finite vertex set separating two diverging end addresses: the single
/// vertex at their deepest common ancestor.
pub fn separating_vertices(
    graph: &MetricGraph,
    a: &EndAddress,
    b: &EndAddress,
) -> Result<BTreeSet<usize>> {
    let spec = graph.tree_spec().ok_or(Error::NotATree)?;
    a.validate(spec.b, Some(spec.depth))?;
    b.validate(spec.b, Some(spec.depth))?;
    let p = a.common_prefix_len(b);
    if p == a.len() || p == b.len() {
        return Err(Error::CannotSeparate(format!(
            "addresses {a:?} and {b:?} do not diverge within the truncation"
        )));
    }
    let ancestor = EndAddress::from_digits(a.digits()[..p].to_vec());
    let v = graph.vertex_index(&ancestor.to_string())?;
    Ok(BTreeSet::from([v]))
}

/// An eventually flat cutoff: 1 toward one part of the boundary, 0 toward
/// the rest, with smoothstep ramps and vanishing derivatives at vertices.
pub struct FlatCutoff {
    pub function: PiecewiseFunction,
    /// Edges carrying a nonconstant ramp.
    pub ramp_edges: Vec<usize>,
}

/// Builds the cutoff for the cylinder family `cell_words` on a truncated
/// tree.
///
/// Vertices whose subtree lies under a cell word get 1, vertices under the
/// complement get 0, and the finitely many mixed ancestors take smoothstep
/// ramp values graded by distance, so the function is constant outside a
/// finite edge set and flat at every vertex. Requires `3ε` below the
/// end-set separation; the whole-boundary cell yields the constant 1.
pub fn flat_cutoff(
    graph: &Arc<MetricGraph>,
    cell_words: &[EndAddress],
    eps: f64,
) -> Result<FlatCutoff> {
    let spec = *graph.tree_spec().ok_or(Error::NotATree)?;
    for w in cell_words {
        w.validate(spec.b, Some(spec.depth))?;
    }
    let comp = complement_words(spec.b, cell_words);
    if cell_words.is_empty() {
        return Err(Error::BadPartition("cutoff cell is empty".into()));
    }
    if comp.is_empty() {
        // Whole boundary: the constant 1.
        let shapes = vec![EdgeShape::Constant(1.0); graph.edge_count()];
        return Ok(FlatCutoff {
            function: PiecewiseFunction::new(Arc::clone(graph), shapes)?,
            ramp_edges: Vec::new(),
        });
    }
    let sep = end_set_separation(&spec, cell_words, &comp);
    if !(eps > 0.0) || 3.0 * eps >= sep {
        return Err(Error::RegionsOverlap(format!(
            "need 3*eps < {sep} (end-set separation), got eps = {eps}"
        )));
    }

    let n = graph.vertex_count();
    // +1 under a cell word, 0 under a complement word, ramp in between.
    let mut side = vec![None::<f64>; n];
    for v in 0..n {
        let name = graph.vertex_name(v);
        let addr = EndAddress::parse(name)?;
        if cell_words.iter().any(|w| w.is_prefix_of(&addr)) {
            side[v] = Some(1.0);
        } else if comp.iter().any(|w| w.is_prefix_of(&addr)) {
            side[v] = Some(0.0);
        }
    }
    // Mixed ancestors: grade by graph distance to the two constant regions.
    let d_one = graph.multi_source_distances(
        (0..n).filter(|&v| side[v] == Some(1.0)).map(|v| (v, 0.0)),
    );
    let d_zero = graph.multi_source_distances(
        (0..n).filter(|&v| side[v] == Some(0.0)).map(|v| (v, 0.0)),
    );
    let mut values = vec![0.0; n];
    for v in 0..n {
        values[v] = match side[v] {
            Some(s) => s,
            None => {
                let frac = d_zero[v] / (d_zero[v] + d_one[v]);
                crate::piecewise::smoothstep(frac)
            }
        };
    }
    let mut shapes = Vec::with_capacity(graph.edge_count());
    let mut ramp_edges = Vec::new();
    for (e, ed) in graph.edges().iter().enumerate() {
        let (a, b) = (values[ed.tail], values[ed.head]);
        if a == b {
            shapes.push(EdgeShape::Constant(a));
        } else {
            ramp_edges.push(e);
            shapes.push(EdgeShape::Smoothstep { v0: a, v1: b });
        }
    }
    Ok(FlatCutoff {
        function: PiecewiseFunction::new(Arc::clone(graph), shapes)?,
        ramp_edges,
    })
}

/// Cutoff on an explicit finite graph whose ends are its boundary vertices:
/// 1 on the `eps`-collar of `one_side`, 0 elsewhere, ramping only on edges
/// that meet the collar.
///
/// Follows the finite-graph construction: edges with no point of value 1
/// default to 0, remaining edges ramp with vanishing endpoint derivatives.
pub fn flat_cutoff_vertices(
    graph: &Arc<MetricGraph>,
    one_side: &[&str],
    eps: f64,
) -> Result<FlatCutoff> {
    let one: BTreeSet<usize> =
        one_side.iter().map(|s| graph.vertex_index(s)).collect::<Result<_>>()?;
    for &v in &one {
        if !graph.is_boundary(v) {
            return Err(Error::BadPartition(format!(
                "{} is not a boundary vertex",
                graph.vertex_name(v)
            )));
        }
    }
    let zero: BTreeSet<usize> =
        graph.boundary_vertices().into_iter().filter(|v| !one.contains(v)).collect();
    if one.is_empty() || zero.is_empty() {
        return Err(Error::BadPartition("both boundary sides must be nonempty".into()));
    }
    let d_one = graph.multi_source_distances(one.iter().map(|&v| (v, 0.0)));
    let sep = zero.iter().map(|&v| d_one[v]).fold(f64::INFINITY, f64::min);
    if !(eps > 0.0) || 3.0 * eps >= sep {
        return Err(Error::RegionsOverlap(format!(
            "need 3*eps < {sep} (boundary separation), got eps = {eps}"
        )));
    }
    let mut shapes = Vec::with_capacity(graph.edge_count());
    let mut ramp_edges = Vec::new();
    for (e, ed) in graph.edges().iter().enumerate() {
        let l = ed.length;
        // The 1-region on this edge is anchored at an endpoint within eps.
        let tail_in = d_one[ed.tail] <= eps;
        let head_in = d_one[ed.head] <= eps;
        let reach_tail = eps - d_one[ed.tail]; // 1-segment [0, reach_tail]
        let reach_head = eps - d_one[ed.head]; // 1-segment [l - reach_head, l]
        if !tail_in && !head_in {
            shapes.push(EdgeShape::Constant(0.0));
        } else if reach_tail >= l || reach_head >= l {
            shapes.push(EdgeShape::Constant(1.0));
        } else if tail_in && head_in {
            // Both collars enter but do not join; by 3ε separation no
            // 0-constraint lives between them, keep the edge at 1.
            shapes.push(EdgeShape::Constant(1.0));
        } else {
            // Ramp from the collar boundary down to 0 at the far vertex.
            ramp_edges.push(e);
            if tail_in {
                shapes.push(EdgeShape::Smoothstep { v0: 1.0, v1: 0.0 });
            } else {
                shapes.push(EdgeShape::Smoothstep { v0: 0.0, v1: 1.0 });
            }
        }
    }
    Ok(FlatCutoff {
        function: PiecewiseFunction::new(Arc::clone(graph), shapes)?,
        ramp_edges,
    })
}
