//! Level sets of piecewise-linear harmonic functions: regular values,
//! crossings, super-level subgraphs, fluxes, thresholds, and descent paths.
//!
//! For a piecewise-linear function on a truncated tree the critical values
//! are exactly the vertex values and the values of flat edges or tails.
//! Level sets are computed on the resolved core; a level that continues
//! into a tail beyond the truncation is reported as an error rather than
//! silently truncated.

use std::collections::BTreeSet;

use crate::boundary::{end_set_distances, EndAddress};
use crate::error::{Error, Result};
use crate::graph::{EdgeData, GraphPoint, MetricGraph};
use crate::harmonic::HarmonicFunction;

/// Tolerance below which a level is treated as hitting a critical value.
pub const REGULARITY_TOL: f64 = 1e-11;

/// One point of a regular level set.
#[derive(Debug, Clone, Copy)]
pub struct LevelCrossing {
    pub point: GraphPoint,
    /// Signed slope of the function along the edge (tail → head).
    pub slope: f64,
    /// Flux magnitude through the cut; positive at regular crossings.
    pub outward_flux: f64,
}

/// The retained side `f >= t` after cutting at the crossings.
#[derive(Debug)]
pub struct LevelSubgraph {
    pub graph: MetricGraph,
    pub crossings: Vec<LevelCrossing>,
    pub threshold: f64,
}

/// Flux through a level set.
#[derive(Debug, Clone, Copy)]
pub struct FluxReport {
    pub total: f64,
    pub crossing_count: usize,
    /// Set when the level set is empty.
    pub empty: bool,
}

/// Endpoint of a descent path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DescentTerminal {
    /// A graph boundary vertex without a continuing tail.
    BoundaryVertex(String),
    /// A truncation leaf whose tail keeps descending; the leaf's address
    /// names the cylinder holding the limiting end.
    End { leaf: String },
}

/// A strictly descending walk.
#[derive(Debug, Clone)]
pub struct DescentPath {
    pub points: Vec<(GraphPoint, f64)>,
    pub terminal: DescentTerminal,
}

/// True iff no vertex value and no flat edge or constant tail attains `t`
/// within [`REGULARITY_TOL`].
pub fn is_regular_value(h: &HarmonicFunction, t: f64) -> bool {
    let g = h.graph();
    for v in 0..g.vertex_count() {
        if (h.vertex_value(v) - t).abs() <= REGULARITY_TOL {
            return false;
        }
    }
    for (e, ed) in g.edges().iter().enumerate() {
        if h.slope(e) == 0.0 && (h.vertex_value(ed.tail) - t).abs() <= REGULARITY_TOL {
            return false;
        }
    }
    for (&v, tail) in h.tails() {
        if tail.value == h.vertex_value(v) && (tail.value - t).abs() <= REGULARITY_TOL {
            return false;
        }
    }
    true
}

fn check_level(h: &HarmonicFunction, t: f64) -> Result<()> {
    if !is_regular_value(h, t) {
        return Err(Error::Numerical(format!("t = {t} is not a regular value")));
    }
    for (&leaf, tail) in h.tails() {
        let a = h.vertex_value(leaf);
        let lo = tail.value.min(a);
        let hi = tail.value.max(a);
        // A level inside the tail span crosses beyond the truncation.
        if (tail.value - t).abs() <= REGULARITY_TOL || (t > lo && t < hi) {
            return Err(Error::LevelMeetsBoundary(t));
        }
    }
    Ok(())
}

/// The finite set of points where `f = t`, one per straddling edge.
pub fn level_crossings(h: &HarmonicFunction, t: f64) -> Result<Vec<LevelCrossing>> {
    check_level(h, t)?;
    let g = h.graph();
    let mut out = Vec::new();
    for (e, ed) in g.edges().iter().enumerate() {
        let (vt, vh) = (h.vertex_value(ed.tail), h.vertex_value(ed.head));
        if (vt - t) * (vh - t) < 0.0 {
            let slope = (vh - vt) / ed.length;
            let offset = (t - vt) / (vh - vt) * ed.length;
            out.push(LevelCrossing {
                point: GraphPoint::new(e, offset),
                slope,
                outward_flux: slope.abs(),
            });
        }
    }
    Ok(out)
}

/// Sum of crossing fluxes at a regular level. Between two regular values
/// bounding a band free of graph boundary vertices the flux is conserved.
pub fn level_flux(h: &HarmonicFunction, t: f64) -> Result<FluxReport> {
    let crossings = level_crossings(h, t)?;
    Ok(FluxReport {
        total: crossings.iter().map(|c| c.outward_flux).sum(),
        crossing_count: crossings.len(),
        empty: crossings.is_empty(),
    })
}

/// Cuts the graph at the level-`t` crossings and keeps the side `f >= t`.
/// Crossings become degree-1 boundary vertices of the result.
pub fn subgraph_above(h: &HarmonicFunction, t: f64) -> Result<LevelSubgraph> {
    let crossings = level_crossings(h, t)?;
    let g = h.graph();
    let mut names: Vec<String> = Vec::new();
    let mut index: std::collections::BTreeMap<usize, usize> = std::collections::BTreeMap::new();
    let mut edges: Vec<EdgeData> = Vec::new();
    let mut boundary_names: BTreeSet<String> = BTreeSet::new();
    let mut keep = |v: usize, names: &mut Vec<String>| {
        *index.entry(v).or_insert_with(|| {
            names.push(g.vertex_name(v).to_string());
            names.len() - 1
        })
    };
    for (e, ed) in g.edges().iter().enumerate() {
        let (vt, vh) = (h.vertex_value(ed.tail), h.vertex_value(ed.head));
        if vt > t && vh > t {
            let a = keep(ed.tail, &mut names);
            let b = keep(ed.head, &mut names);
            edges.push(EdgeData { tail: a, head: b, length: ed.length });
        } else if (vt - t) * (vh - t) < 0.0 {
            let crossing = crossings
                .iter()
                .find(|c| c.point.edge == e)
                .expect("straddling edge has a crossing");
            let cut_name = format!("cut@e{e}");
            names.push(cut_name.clone());
            let cut = names.len() - 1;
            boundary_names.insert(cut_name);
            if vt > t {
                let a = keep(ed.tail, &mut names);
                edges.push(EdgeData { tail: a, head: cut, length: crossing.point.offset });
            } else {
                let b = keep(ed.head, &mut names);
                edges.push(EdgeData {
                    tail: cut,
                    head: b,
                    length: ed.length - crossing.point.offset,
                });
            }
        }
    }
    for (&old, &_new) in &index {
        if g.is_boundary(old) {
            boundary_names.insert(g.vertex_name(old).to_string());
        }
    }
    let boundary: Vec<bool> = names.iter().map(|n| boundary_names.contains(n)).collect();
    let sub = MetricGraph::from_parts_unchecked(names, edges, boundary, None);
    // Retained vertices keep their full degree (a harmonic value above t
    // forces at least one neighbor above t), so any degree-1 vertex is an
    // original boundary vertex or a cut point, both tagged above.
    for v in 0..sub.vertex_count() {
        if sub.degree(v) == 1 && !sub.is_boundary(v) {
            return Err(Error::Numerical(format!(
                "vertex {} became degree 1 without a boundary tag",
                sub.vertex_name(v)
            )));
        }
    }
    Ok(LevelSubgraph { graph: sub, crossings, threshold: t })
}

/// Finds a regular `t` with `C < t <` (complement minimum) whose sublevel
/// set `{f <= t}` lies inside the `eps`-neighborhood of the end set `E`,
/// bisecting downward from the complement minimum.
///
/// Requires `f` constant (= its minimum `C`) on `E` and strictly larger on
/// the complement data, as in the clamp construction.
pub fn threshold_for_neighborhood(
    h: &HarmonicFunction,
    cell_words: &[EndAddress],
    eps: f64,
) -> Result<f64> {
    let g = h.graph();
    let spec = *g.tree_spec().ok_or(Error::NotATree)?;
    if h.tails().is_empty() {
        return Err(Error::NoThreshold("function carries no boundary tails".into()));
    }
    // Split tails into E side and complement, and read off C and the
    // complement minimum.
    let mut c_value: Option<f64> = None;
    let mut complement_min = f64::INFINITY;
    let mut e_leaves: BTreeSet<usize> = BTreeSet::new();
    for (&leaf, tail) in h.tails() {
        let word = EndAddress::parse(g.vertex_name(leaf))?;
        let in_e = cell_words.iter().any(|w| w.is_prefix_of(&word));
        if in_e {
            match c_value {
                None => c_value = Some(tail.value),
                Some(c) if (c - tail.value).abs() <= 1e-12 => {}
                Some(c) => {
                    return Err(Error::NoThreshold(format!(
                        "data is not constant on the cell: {c} vs {}",
                        tail.value
                    )))
                }
            }
            e_leaves.insert(leaf);
        } else {
            complement_min = complement_min.min(tail.value);
        }
    }
    let c = c_value.ok_or_else(|| Error::NoThreshold("cell matches no truncation leaf".into()))?;
    if e_leaves.len() == h.tails().len() {
        return Err(Error::NoThreshold("complement is empty".into()));
    }
    if !(complement_min > c + REGULARITY_TOL) {
        return Err(Error::NoThreshold(format!(
            "data minimum {c} is not strictly below the complement minimum {complement_min}"
        )));
    }
    // Every point of an E tail lies within the tail length of the cell ends.
    let tail_reach = spec.tail_length(spec.depth);
    if tail_reach > eps {
        return Err(Error::NoThreshold(format!(
            "truncation too shallow: tail length {tail_reach} exceeds eps = {eps}"
        )));
    }
    let d_e = end_set_distances(g, cell_words)?;
    let sublevel_within = |t: f64| -> bool {
        // Complement tails must contribute nothing to the sublevel set.
        for (&leaf, tail) in h.tails() {
            if !e_leaves.contains(&leaf) && (tail.value <= t || h.vertex_value(leaf) <= t) {
                return false;
            }
        }
        for ed in g.edges() {
            let (vt, vh) = (h.vertex_value(ed.tail), h.vertex_value(ed.head));
            let l = ed.length;
            // Sublevel segment on this edge, in edge coordinates.
            let seg = if vt <= t && vh <= t {
                Some((0.0, l))
            } else if (vt - t) * (vh - t) < 0.0 {
                let cut = (t - vt) / (vh - vt) * l;
                if vt <= t {
                    Some((0.0, cut))
                } else {
                    Some((cut, l))
                }
            } else {
                None
            };
            if let Some((a, b)) = seg {
                // d(., E) along the edge is the concave min of two linear
                // branches; its maximum over [a, b] sits at an endpoint or
                // at the interior peak.
                let du = d_e[ed.tail];
                let dv = d_e[ed.head];
                let at = |s: f64| (du + s).min(dv + (l - s));
                let mut worst = at(a).max(at(b));
                let peak = (dv + l - du) / 2.0;
                if peak > a && peak < b {
                    worst = worst.max(at(peak));
                }
                if worst > eps {
                    return false;
                }
            }
        }
        true
    };
    let mut gap = complement_min - c;
    for _ in 0..60 {
        gap *= 0.5;
        let mut t = c + gap;
        // Nudge off critical values if needed.
        for _ in 0..8 {
            if is_regular_value(h, t) {
                break;
            }
            t += gap * 1e-7;
        }
        if !is_regular_value(h, t) {
            continue;
        }
        if sublevel_within(t) && check_level(h, t).is_ok() {
            return Ok(t);
        }
    }
    Err(Error::NoThreshold(format!(
        "no admissible level found below {complement_min} for eps = {eps}"
    )))
}

/// Walks from `start` in the direction of steepest decrease until reaching
/// a boundary vertex or entering a descending tail. Interior Kirchhoff
/// balance guarantees a strictly decreasing outgoing edge at every interior
/// vertex passed.
pub fn descent_path(h: &HarmonicFunction, start: GraphPoint) -> Result<DescentPath> {
    let g = h.graph();
    g.check_point(start)?;
    let mut points: Vec<(GraphPoint, f64)> = Vec::new();
    let mut current_vertex: usize;
    let start_value = h.evaluate(start)?;
    points.push((start, start_value));
    match g.point_as_vertex(start) {
        Some(v) => current_vertex = v,
        None => {
            let slope = h.slope(start.edge);
            if slope == 0.0 {
                return Err(Error::NoDescent(format!(
                    "edge {} is flat at the start point",
                    start.edge
                )));
            }
            let ed = g.edge(start.edge);
            // Walk downhill along the starting edge.
            current_vertex = if slope > 0.0 { ed.tail } else { ed.head };
            points.push((g.vertex_point(current_vertex), h.vertex_value(current_vertex)));
        }
    }
    let mut guard = g.vertex_count() + 2;
    loop {
        guard -= 1;
        if guard == 0 {
            return Err(Error::Numerical("descent did not terminate".into()));
        }
        let v = current_vertex;
        let value = h.vertex_value(v);
        // Tail direction at a truncation leaf.
        if let Some(tail) = h.tails().get(&v) {
            if tail.value < value - 0.0 {
                return Ok(DescentPath {
                    points,
                    terminal: DescentTerminal::End { leaf: g.vertex_name(v).to_string() },
                });
            }
        }
        // Steepest strictly descending core edge; ties break to the lowest
        // edge id for reproducibility.
        let mut best: Option<(f64, usize)> = None;
        for &e in g.incident(v) {
            let d = h.outward_derivative(v, e);
            if d < 0.0 {
                let better = match best {
                    None => true,
                    Some((bd, be)) => d < bd || (d == bd && e < be),
                };
                if better {
                    best = Some((d, e));
                }
            }
        }
        match best {
            Some((_, e)) => {
                let w = g.other_end(e, v);
                points.push((g.vertex_point(w), h.vertex_value(w)));
                current_vertex = w;
            }
            None => {
                if g.is_boundary(v) && h.tails().get(&v).is_none() {
                    return Ok(DescentPath {
                        points,
                        terminal: DescentTerminal::BoundaryVertex(g.vertex_name(v).to_string()),
                    });
                }
                return Err(Error::NoDescent(format!(
                    "no descending direction at {}",
                    g.vertex_name(v)
                )));
            }
        }
    }
}
