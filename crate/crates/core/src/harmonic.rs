//! Harmonic functions with finite energy: exact Dirichlet solves for step
//! boundary data, energy reports, harmonic measure, uniform approximation of
//! continuous data, and the structural residual checks.
//!
//! On a truncated self-similar tree the solve is exact for the untruncated
//! tree: boundary data resolvable at the truncation depth is constant on
//! each leaf's cylinder, and the infinite homogeneous subtree below a leaf
//! acts on the core exactly like a single conductor of closed-form
//! resistance `l0 r^d / (b - r)` tied to the data value. Eliminating the
//! tails through that Schur complement leaves the core values independent of
//! the truncation depth.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::boundary::{BoundaryMeasure, ClopenPartition, EndAddress, StepFunction};
use crate::error::{Error, Result};
use crate::graph::{GraphPoint, MetricGraph, TreeSpec};
use crate::piecewise::{adaptive_simpson, EdgeShape, PiecewiseFunction};

/// Infinite tail hanging below a truncation leaf: the boundary data value on
/// the leaf's cylinder and the tail's effective resistance.
#[derive(Debug, Clone, Copy)]
pub struct TailData {
    pub value: f64,
    pub resistance: f64,
}

/// A piecewise-linear harmonic function on a metric graph.
///
/// Stores per-vertex values; edge slopes follow from linearity. Tree solves
/// carry per-leaf [`TailData`] describing the harmonic continuation below
/// the truncation.
#[derive(Debug, Clone)]
pub struct HarmonicFunction {
    graph: Arc<MetricGraph>,
    values: Vec<f64>,
    tails: BTreeMap<usize, TailData>,
    trace: Option<StepFunction>,
}

/// The energy pairing split into its two parts.
#[derive(Debug, Clone, Copy)]
pub struct EnergyReport {
    /// `∫ f' g'` over the graph (tails included for tree solves).
    pub dirichlet: f64,
    /// `∫ f g dμ` over the boundary.
    pub boundary: f64,
    /// Their sum.
    pub h1: f64,
}

/// Boundary measure, matched to the kind of graph.
#[derive(Debug, Clone)]
pub enum GraphMeasure {
    /// Cylinder measure on the end space of a tree.
    Ends(BoundaryMeasure),
    /// Point masses at boundary vertices of an explicit graph.
    Vertices(BTreeMap<String, f64>),
}

impl HarmonicFunction {
    pub fn graph(&self) -> &Arc<MetricGraph> {
        &self.graph
    }

    pub fn vertex_value(&self, v: usize) -> f64 {
        self.values[v]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tails(&self) -> &BTreeMap<usize, TailData> {
        &self.tails
    }

    /// The step function the solve was built from, when known.
    pub fn trace(&self) -> Option<&StepFunction> {
        self.trace.as_ref()
    }

    /// Slope along edge `e`, oriented tail → head.
    pub fn slope(&self, e: usize) -> f64 {
        let ed = self.graph.edge(e);
        (self.values[ed.head] - self.values[ed.tail]) / ed.length
    }

    /// Linear interpolation at a point of the graph.
    pub fn evaluate(&self, p: GraphPoint) -> Result<f64> {
        self.graph.check_point(p)?;
        let ed = self.graph.edge(p.edge);
        Ok(self.values[ed.tail] + (self.values[ed.head] - self.values[ed.tail]) * p.offset / ed.length)
    }

    /// Limit of the function along the ends below a truncation leaf; equals
    /// the boundary data there.
    pub fn end_limit(&self, address: &EndAddress) -> Result<f64> {
        if let Some(trace) = &self.trace {
            if trace.partition.cell_of_word(address).is_some() {
                return trace.value_on_word(address);
            }
        }
        for (&leaf, tail) in &self.tails {
            let word = EndAddress::parse(self.graph.vertex_name(leaf))?;
            if word.is_prefix_of(address) || address.is_prefix_of(&word) {
                return Ok(tail.value);
            }
        }
        Err(Error::BadWord(address.to_string(), "no tail resolves this address".into()))
    }

    /// Outward derivative at `v` along edge `e`.
    pub fn outward_derivative(&self, v: usize, e: usize) -> f64 {
        let ed = self.graph.edge(e);
        if ed.tail == v {
            self.slope(e)
        } else {
            -self.slope(e)
        }
    }

    /// Sum of outward derivatives at `v`, including the tail conductor at a
    /// truncation leaf. Vanishes at every vertex interior to the infinite
    /// graph.
    pub fn kirchhoff_residual(&self, v: usize) -> f64 {
        let mut total: f64 = self
            .graph
            .incident(v)
            .iter()
            .map(|&e| {
                let ed = self.graph.edge(e);
                if ed.tail == ed.head {
                    0.0
                } else {
                    self.outward_derivative(v, e)
                }
            })
            .sum();
        if let Some(tail) = self.tails.get(&v) {
            total += (tail.value - self.values[v]) / tail.resistance;
        }
        total
    }

    /// Largest Kirchhoff residual over vertices interior to the infinite
    /// graph (interior vertices, plus leaves carrying tails).
    pub fn max_kirchhoff_residual(&self) -> f64 {
        (0..self.graph.vertex_count())
            .filter(|&v| !self.graph.is_boundary(v) || self.tails.contains_key(&v))
            .map(|v| self.kirchhoff_residual(v).abs())
            .fold(0.0, f64::max)
    }

    /// Dirichlet energy `∫ (f')^2`, tails in closed form.
    pub fn dirichlet_energy(&self) -> f64 {
        let core: f64 = (0..self.graph.edge_count())
            .map(|e| {
                let ed = self.graph.edge(e);
                let d = self.values[ed.head] - self.values[ed.tail];
                d * d / ed.length
            })
            .sum();
        let tail: f64 = self
            .tails
            .iter()
            .map(|(&v, t)| {
                let d = self.values[v] - t.value;
                d * d / t.resistance
            })
            .sum();
        core + tail
    }

    /// Mean-value residual at `v`: difference between `f(v)` and the mean of
    /// the equidistant edge samples at arc distance `x`.
    pub fn mean_value_residual(&self, v: usize, x: f64) -> Result<f64> {
        let edges = self.graph.incident(v);
        if edges.is_empty() {
            return Err(Error::InvalidPoint("isolated vertex".into()));
        }
        let mut sum = 0.0;
        for &e in edges {
            let ed = self.graph.edge(e);
            if x > ed.length {
                return Err(Error::InvalidPoint(format!(
                    "sample distance {x} exceeds edge length {}",
                    ed.length
                )));
            }
            sum += self.values[v] + x * self.outward_derivative(v, e);
        }
        Ok(self.values[v] - sum / edges.len() as f64)
    }

    /// The same function as edge-wise linear profiles.
    pub fn to_piecewise(&self) -> PiecewiseFunction {
        let shapes = self
            .graph
            .edges()
            .iter()
            .map(|ed| EdgeShape::Linear { v0: self.values[ed.tail], v1: self.values[ed.head] })
            .collect();
        PiecewiseFunction::new(Arc::clone(&self.graph), shapes).expect("edge count matches")
    }

    /// Boundary trace as a step function; built from the tails when the
    /// solve did not record one.
    pub fn trace_step(&self) -> Result<StepFunction> {
        if let Some(t) = &self.trace {
            return Ok(t.clone());
        }
        let spec = self.graph.tree_spec().ok_or(Error::NotATree)?;
        let mut cells = Vec::new();
        let mut values = Vec::new();
        for (&leaf, tail) in &self.tails {
            let name = self.graph.vertex_name(leaf).to_string();
            cells.push((name.clone(), vec![EndAddress::parse(&name)?]));
            values.push(tail.value);
        }
        StepFunction::new(ClopenPartition::new(spec.b, cells)?, values)
    }
}

/// Solves the Dirichlet problem on a truncated tree for step boundary data.
///
/// Assembles the weighted vertex Laplacian with conductances `1/l_e`, closes
/// each truncation leaf with its exact tail conductor, and eliminates
/// bottom-up (trees factor without fill-in). The core values equal those of
/// the untruncated tree; solving the same data at a deeper truncation
/// reproduces them exactly.
pub fn solve_dirichlet(graph: &Arc<MetricGraph>, data: &StepFunction) -> Result<HarmonicFunction> {
    let spec = *graph.tree_spec().ok_or(Error::NotATree)?;
    data.partition.validate()?;
    if data.partition.branching() != spec.b {
        return Err(Error::BadPartition(format!(
            "partition branching {} does not match tree branching {}",
            data.partition.branching(),
            spec.b
        )));
    }
    if data.partition.max_word_len() > spec.depth {
        return Err(Error::WordTooDeep(
            format!("partition of depth {}", data.partition.max_word_len()),
            spec.depth,
        ));
    }
    let leaves = graph.tree_leaves()?;
    let resistance = spec.tail_resistance(spec.depth);
    let mut tails = BTreeMap::new();
    for &leaf in &leaves {
        let word = EndAddress::parse(graph.vertex_name(leaf))?;
        let value = data.value_on_word(&word)?;
        tails.insert(leaf, TailData { value, resistance });
    }
    let values = if data.is_constant() {
        vec![data.values[0]; graph.vertex_count()]
    } else {
        solve_tree_with_tails(graph, &tails)?
    };
    Ok(HarmonicFunction {
        graph: Arc::clone(graph),
        values,
        tails,
        trace: Some(data.clone()),
    })
}

/// Bottom-up elimination of the tree Laplacian with tail conductors at the
/// leaves. Expresses each vertex as an affine function of its parent, then
/// back-substitutes from the root.
fn solve_tree_with_tails(
    graph: &Arc<MetricGraph>,
    tails: &BTreeMap<usize, TailData>,
) -> Result<Vec<f64>> {
    let n = graph.vertex_count();
    let order = graph.tree_bottom_up()?;
    let mut coef_a = vec![0.0; n];
    let mut coef_b = vec![0.0; n];
    let root = graph.origin().ok_or(Error::NotATree)?;
    for &v in &order {
        let mut sum_ga = 0.0;
        let mut sum_g_open = 0.0; // Σ g_c (1 - B_c) over eliminated neighbors
        for &c in graph.tree_children(v)? {
            let e = graph.tree_parent_edge(c)?.expect("child has a parent edge");
            let g = 1.0 / graph.edge(e).length;
            sum_ga += g * coef_a[c];
            sum_g_open += g * (1.0 - coef_b[c]);
        }
        if let Some(t) = tails.get(&v) {
            let g = 1.0 / t.resistance;
            sum_ga += g * t.value;
            sum_g_open += g;
        }
        if v == root {
            if sum_g_open <= 0.0 {
                return Err(Error::Numerical("singular tree system".into()));
            }
            coef_a[v] = sum_ga / sum_g_open;
            coef_b[v] = 0.0;
        } else {
            let e = graph.tree_parent_edge(v)?.expect("non-root has a parent edge");
            let gp = 1.0 / graph.edge(e).length;
            let d = gp + sum_g_open;
            coef_a[v] = sum_ga / d;
            coef_b[v] = gp / d;
        }
    }
    // Top-down pass in increasing depth (reverse elimination order).
    let mut values = vec![0.0; n];
    for &v in order.iter().rev() {
        if v == root {
            values[v] = coef_a[v];
        } else {
            let e = graph.tree_parent_edge(v)?.expect("non-root has a parent edge");
            let p = graph.other_end(e, v);
            values[v] = coef_a[v] + coef_b[v] * values[p];
        }
    }
    Ok(values)
}

/// Solves the Dirichlet problem on any graph with values pinned at the
/// boundary vertices, by a dense symmetric factorization of the weighted
/// Laplacian restricted to the interior.
pub fn solve_dirichlet_pinned(
    graph: &Arc<MetricGraph>,
    pinned: &BTreeMap<String, f64>,
) -> Result<HarmonicFunction> {
    let n = graph.vertex_count();
    let mut fixed = vec![None::<f64>; n];
    for (name, &value) in pinned {
        fixed[graph.vertex_index(name)?] = Some(value);
    }
    for v in 0..n {
        if graph.is_boundary(v) && fixed[v].is_none() {
            return Err(Error::BadBoundaryCondition(format!(
                "boundary vertex {} has no Dirichlet value",
                graph.vertex_name(v)
            )));
        }
    }
    let free: Vec<usize> = (0..n).filter(|&v| fixed[v].is_none()).collect();
    let col: BTreeMap<usize, usize> = free.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let m = free.len();
    let mut values = vec![0.0; n];
    for v in 0..n {
        if let Some(x) = fixed[v] {
            values[v] = x;
        }
    }
    if m > 0 {
        let mut lap = DMatrix::<f64>::zeros(m, m);
        let mut rhs = DVector::<f64>::zeros(m);
        for ed in graph.edges() {
            if ed.tail == ed.head {
                continue;
            }
            let g = 1.0 / ed.length;
            for (a, b) in [(ed.tail, ed.head), (ed.head, ed.tail)] {
                if let Some(&i) = col.get(&a) {
                    lap[(i, i)] += g;
                    match col.get(&b) {
                        Some(&j) => lap[(i, j)] -= g,
                        None => rhs[i] += g * fixed[b].unwrap(),
                    }
                }
            }
        }
        let chol = Cholesky::new(lap)
            .ok_or_else(|| Error::Numerical("interior Laplacian is not positive definite".into()))?;
        let x = chol.solve(&rhs);
        for (i, &v) in free.iter().enumerate() {
            values[v] = x[i];
        }
    }
    Ok(HarmonicFunction { graph: Arc::clone(graph), values, tails: BTreeMap::new(), trace: None })
}

/// Energy inner product of two harmonic functions under `measure`.
///
/// The Dirichlet part is exact for piecewise-linear functions; tail pairs
/// contribute `(f(w)-c_f)(g(w)-c_g)/R` since both continuations are scalar
/// multiples of the same radial profile.
pub fn h1_inner(
    f: &HarmonicFunction,
    g: &HarmonicFunction,
    measure: &GraphMeasure,
) -> Result<EnergyReport> {
    if !Arc::ptr_eq(&f.graph, &g.graph) {
        return Err(Error::GraphMismatch);
    }
    let graph = &f.graph;
    let mut dirichlet = 0.0;
    for (e, ed) in graph.edges().iter().enumerate() {
        dirichlet += f.slope(e) * g.slope(e) * ed.length;
    }
    for (&v, tf) in &f.tails {
        let tg = g
            .tails
            .get(&v)
            .ok_or_else(|| Error::Numerical("tail structures do not match".into()))?;
        dirichlet += (f.values[v] - tf.value) * (g.values[v] - tg.value) / tf.resistance;
    }
    let boundary = match measure {
        GraphMeasure::Ends(mu) => {
            let tf = f.trace_step()?;
            let tg = g.trace_step()?;
            tf.inner(&tg, mu)
        }
        GraphMeasure::Vertices(w) => {
            let mut total = 0.0;
            for (name, &mass) in w {
                let v = graph.vertex_index(name)?;
                total += f.values[v] * g.values[v] * mass;
            }
            total
        }
    };
    Ok(EnergyReport { dirichlet, boundary, h1: dirichlet + boundary })
}

/// Harmonic measure of the partition cells at a point: the values at `at`
/// of the harmonic extensions of the cell indicators. Entries lie in
/// `[0, 1]` and sum to 1.
pub fn harmonic_measure(
    graph: &Arc<MetricGraph>,
    partition: &ClopenPartition,
    at: GraphPoint,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(partition.len());
    for n in 0..partition.len() {
        let indicator = StepFunction::indicator(partition.clone(), n)?;
        let h = solve_dirichlet(graph, &indicator)?;
        out.push(h.evaluate(at)?);
    }
    Ok(out)
}

/// Harmonic measure on an explicit graph whose boundary is grouped into
/// named plates.
pub fn harmonic_measure_groups(
    graph: &Arc<MetricGraph>,
    groups: &[Vec<String>],
    at: GraphPoint,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(groups.len());
    for n in 0..groups.len() {
        let mut pinned = BTreeMap::new();
        for (i, group) in groups.iter().enumerate() {
            for name in group {
                pinned.insert(name.clone(), if i == n { 1.0 } else { 0.0 });
            }
        }
        let h = solve_dirichlet_pinned(graph, &pinned)?;
        out.push(h.evaluate(at)?);
    }
    Ok(out)
}

/// One refinement stage of [`extend_continuous`].
#[derive(Debug, Clone, Copy)]
pub struct ExtendStep {
    pub depth: u32,
    /// Sup-norm difference to the previous stage over all core vertices;
    /// absent at the first stage.
    pub sup_diff: Option<f64>,
    pub dirichlet_energy: f64,
}

/// Outcome of the uniform-approximation iteration.
pub struct ExtendOutcome {
    pub function: HarmonicFunction,
    /// Whether the sup-norm stopping rule fired before the truncation depth
    /// was exhausted.
    pub converged: bool,
    pub steps: Vec<ExtendStep>,
}

/// Extends continuous boundary data by refining cylinder step data until
/// successive harmonic extensions differ by less than `tol` in sup norm
/// (the maximum principle controls the whole graph by the boundary values).
///
/// Exhausting the truncation depth first returns the last iterate flagged
/// as unconverged.
pub fn extend_continuous(
    graph: &Arc<MetricGraph>,
    sampler: &dyn Fn(&EndAddress) -> f64,
    tol: f64,
    min_depth: u32,
) -> Result<ExtendOutcome> {
    let spec = *graph.tree_spec().ok_or(Error::NotATree)?;
    let mut prev: Option<HarmonicFunction> = None;
    let mut steps = Vec::new();
    for k in 0..=spec.depth {
        let partition = ClopenPartition::standard(spec.b, k)?;
        let values: Vec<f64> = partition.cells().iter().map(|c| sampler(&c.words[0])).collect();
        let data = StepFunction::new(partition, values)?;
        let h = solve_dirichlet(graph, &data)?;
        let sup_diff = prev.as_ref().map(|p| {
            (0..graph.vertex_count())
                .map(|v| (h.values[v] - p.values[v]).abs())
                .fold(0.0, f64::max)
        });
        steps.push(ExtendStep { depth: k, sup_diff, dirichlet_energy: h.dirichlet_energy() });
        let done = k >= min_depth && sup_diff.map(|d| d < tol).unwrap_or(false);
        prev = Some(h);
        if done {
            return Ok(ExtendOutcome { function: prev.unwrap(), converged: true, steps });
        }
    }
    Ok(ExtendOutcome { function: prev.unwrap(), converged: false, steps })
}

/// Boundary sampler returning the square root of the distance from a
/// cylinder's leftmost end to the all-zeros end of the tree.
///
/// Continuous on the end space but rougher than any Lipschitz function, so
/// the harmonic extensions of its refinements converge uniformly while
/// their Dirichlet energies grow without bound.
pub fn sqrt_distance_to_leftmost_end(spec: TreeSpec) -> impl Fn(&EndAddress) -> f64 {
    move |w: &EndAddress| {
        let p = w.digits().iter().take_while(|&&d| d == 0).count();
        if p == w.len() {
            return 0.0;
        }
        // The two ends diverge at depth p; sum both descents.
        let mut d = spec.tail_length(p as u32) + spec.tail_length(w.len() as u32);
        for k in p..w.len() {
            d += spec.edge_len(k as u32);
        }
        d.sqrt()
    }
}

/// Result of sampling the path-length Lipschitz bound.
#[derive(Debug, Clone, Copy)]
pub struct LipschitzReport {
    /// Largest `|f(y)-f(x)|^2 / (2 d(x,y))` over the sampled pairs.
    pub max_ratio: f64,
    /// The bound `‖f‖₁²`.
    pub bound: f64,
}

/// Checks `|f(y)-f(x)|^2 <= 2 d(x,y) ‖f‖₁²` over sample pairs.
pub fn lipschitz_check(
    h: &HarmonicFunction,
    measure: &GraphMeasure,
    pairs: &[(GraphPoint, GraphPoint)],
) -> Result<LipschitzReport> {
    let norm = h1_inner(h, h, measure)?.h1;
    let mut max_ratio = 0.0f64;
    for &(p, q) in pairs {
        let d = h.graph.geodesic_distance(p, q)?;
        if d == 0.0 {
            continue;
        }
        let diff = h.evaluate(p)? - h.evaluate(q)?;
        max_ratio = max_ratio.max(diff * diff / (2.0 * d));
    }
    Ok(LipschitzReport { max_ratio, bound: norm })
}

/// `|⟨f, h⟩₁|` for a compactly supported interior test function against a
/// harmonic function; the boundary term vanishes with the trace of `f`.
pub fn orthogonality_residual(
    f: &PiecewiseFunction,
    h: &HarmonicFunction,
    quad_tol: f64,
) -> Result<f64> {
    if !Arc::ptr_eq(f.graph(), h.graph()) {
        return Err(Error::GraphMismatch);
    }
    let graph = f.graph();
    for e in f.support_edges() {
        let ed = graph.edge(e);
        if graph.is_boundary(ed.tail) || graph.is_boundary(ed.head) {
            return Err(Error::NotCompactlySupported(format!(
                "support edge {e} touches a boundary vertex"
            )));
        }
    }
    let mut total = 0.0;
    for e in f.support_edges() {
        let len = graph.edge(e).length;
        let slope = h.slope(e);
        if slope == 0.0 {
            continue;
        }
        let shape = f.shape(e).clone();
        total += adaptive_simpson(&|t| shape.deriv(t, len) * slope, 0.0, len, quad_tol);
    }
    Ok(total.abs())
}

/// A continuous interior test function: `amplitude` at `v`, falling to zero
/// with flat derivatives along every incident edge. Requires `v` and all of
/// its neighbors to be interior vertices.
pub fn interior_bump(
    graph: &Arc<MetricGraph>,
    v: usize,
    amplitude: f64,
) -> Result<PiecewiseFunction> {
    if graph.is_boundary(v) {
        return Err(Error::NotCompactlySupported(format!(
            "{} is a boundary vertex",
            graph.vertex_name(v)
        )));
    }
    for &e in graph.incident(v) {
        let w = graph.other_end(e, v);
        if graph.is_boundary(w) {
            return Err(Error::NotCompactlySupported(format!(
                "neighbor {} is a boundary vertex",
                graph.vertex_name(w)
            )));
        }
    }
    let mut f = PiecewiseFunction::zero(Arc::clone(graph));
    for &e in graph.incident(v) {
        let ed = graph.edge(e);
        let shape = if ed.tail == v {
            EdgeShape::hermite(ed.length, amplitude, 0.0, 0.0, 0.0)
        } else {
            EdgeShape::hermite(ed.length, 0.0, 0.0, amplitude, 0.0)
        };
        f.set_shape(e, shape);
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_explicit, build_tree, TreeSpec};
    use approx::assert_relative_eq;

    fn tree(b: u32, r: f64, l0: f64, d: u32) -> Arc<MetricGraph> {
        Arc::new(build_tree(TreeSpec::new(b, r, l0, d).unwrap()).unwrap())
    }

    fn indicator_of_zero(b: u32) -> StepFunction {
        StepFunction::indicator(ClopenPartition::standard(b, 1).unwrap(), 0).unwrap()
    }

    #[test]
    fn interval_solve_linear() {
        let g = Arc::new(build_explicit(&[("a", "b", 1.0)], &["a", "b"]).unwrap());
        let pinned = BTreeMap::from([("a".to_string(), 0.0), ("b".to_string(), 1.0)]);
        let h = solve_dirichlet_pinned(&g, &pinned).unwrap();
        assert_relative_eq!(h.evaluate(GraphPoint::new(0, 0.5)).unwrap(), 0.5);
        assert_relative_eq!(h.evaluate(GraphPoint::new(0, 0.25)).unwrap(), 0.25);
        assert_relative_eq!(h.dirichlet_energy(), 1.0);
    }

    #[test]
    fn star_center_is_mean() {
        let g = Arc::new(
            build_explicit(&[("c", "x", 1.0), ("c", "y", 1.0), ("c", "z", 1.0)], &["x", "y", "z"])
                .unwrap(),
        );
        let pinned = BTreeMap::from([
            ("x".to_string(), 0.0),
            ("y".to_string(), 0.0),
            ("z".to_string(), 1.0),
        ]);
        let h = solve_dirichlet_pinned(&g, &pinned).unwrap();
        let c = g.vertex_index("c").unwrap();
        assert_relative_eq!(h.vertex_value(c), 1.0 / 3.0, epsilon = 1e-14);
        assert!(h.kirchhoff_residual(c).abs() < 1e-14);
    }

    #[test]
    fn indicator_extension_root_and_depth_stability() {
        let data = indicator_of_zero(2);
        let g3 = tree(2, 0.5, 1.0, 3);
        let g6 = tree(2, 0.5, 1.0, 6);
        let h3 = solve_dirichlet(&g3, &data).unwrap();
        let h6 = solve_dirichlet(&g6, &data).unwrap();
        let root = g3.vertex_index("").unwrap();
        assert_relative_eq!(h3.vertex_value(root), 0.5, epsilon = 1e-14);
        // Core values agree across truncation depths exactly.
        for v in 0..g3.vertex_count() {
            let name = g3.vertex_name(v);
            let w = g6.vertex_index(name).unwrap();
            assert_relative_eq!(h3.vertex_value(v), h6.vertex_value(w), epsilon = 1e-12);
        }
        // Closed-form check: h("0") = 1 - (3/8)*R_tail(1) current balance.
        let v0 = g3.vertex_index("0").unwrap();
        assert_relative_eq!(h3.vertex_value(v0), 7.0 / 8.0, epsilon = 1e-13);
    }

    #[test]
    fn tree_solver_matches_dense_solver() {
        // With the tails re-expressed as explicit pinned stub edges, the
        // bottom-up elimination and the dense factorization must agree.
        let g = tree(3, 0.4, 1.0, 3);
        let partition = ClopenPartition::standard(3, 2).unwrap();
        let values: Vec<f64> = (0..partition.len()).map(|i| (i as f64) * 0.37 - 1.0).collect();
        let data = StepFunction::new(partition, values).unwrap();
        let h = solve_dirichlet(&g, &data).unwrap();

        // Build the augmented explicit graph with one stub edge per leaf.
        let spec = g.tree_spec().unwrap();
        let r_tail = spec.tail_resistance(spec.depth);
        let mut edges: Vec<(String, String, f64)> = g
            .edges()
            .iter()
            .map(|e| {
                (
                    g.vertex_name(e.tail).to_string(),
                    g.vertex_name(e.head).to_string(),
                    e.length,
                )
            })
            .collect();
        let mut pinned = BTreeMap::new();
        for (&leaf, tail) in h.tails() {
            let stub = format!("tail:{}", g.vertex_name(leaf));
            edges.push((g.vertex_name(leaf).to_string(), stub.clone(), r_tail));
            pinned.insert(stub, tail.value);
        }
        let edge_refs: Vec<(&str, &str, f64)> =
            edges.iter().map(|(a, b, l)| (a.as_str(), b.as_str(), *l)).collect();
        let boundary: Vec<&str> = pinned.keys().map(String::as_str).collect();
        let aug = Arc::new(build_explicit(&edge_refs, &boundary).unwrap());
        let dense = solve_dirichlet_pinned(&aug, &pinned).unwrap();
        for v in 0..g.vertex_count() {
            let w = aug.vertex_index(g.vertex_name(v)).unwrap();
            assert_relative_eq!(h.vertex_value(v), dense.vertex_value(w), epsilon = 1e-12);
        }
    }

    #[test]
    fn kirchhoff_residuals_vanish() {
        let g = tree(2, 0.5, 1.0, 5);
        let h = solve_dirichlet(&g, &indicator_of_zero(2)).unwrap();
        assert!(h.max_kirchhoff_residual() < 1e-12);
    }

    #[test]
    fn constant_data_short_circuits() {
        let g = tree(2, 0.5, 1.0, 4);
        let data = StepFunction::new(ClopenPartition::standard(2, 2).unwrap(), vec![3.0; 4]).unwrap();
        let h = solve_dirichlet(&g, &data).unwrap();
        assert!(h.values().iter().all(|&x| x == 3.0));
        assert_eq!(h.dirichlet_energy(), 0.0);
    }

    #[test]
    fn word_deeper_than_truncation_rejected() {
        let g = tree(2, 0.5, 1.0, 2);
        let p = ClopenPartition::standard(2, 3).unwrap();
        let data = StepFunction::new(p, vec![0.0; 8]).unwrap();
        assert!(matches!(solve_dirichlet(&g, &data), Err(Error::WordTooDeep(_, 2))));
    }

    #[test]
    fn energy_matches_effective_resistance() {
        // Indicator of cylinder "0": energy = 1/R with
        // R = 2 (l0 + R_tail(1)) for the binary tree.
        for depth in [2, 4, 6] {
            let g = tree(2, 0.5, 1.0, depth);
            let spec = g.tree_spec().unwrap();
            let h = solve_dirichlet(&g, &indicator_of_zero(2)).unwrap();
            let r = 2.0 * (1.0 + spec.tail_resistance(1));
            assert_relative_eq!(h.dirichlet_energy(), 1.0 / r, epsilon = 1e-13);
        }
    }

    #[test]
    fn h1_inner_interval_example() {
        let g = Arc::new(build_explicit(&[("a", "b", 1.0)], &["a", "b"]).unwrap());
        let pinned = BTreeMap::from([("a".to_string(), 0.0), ("b".to_string(), 1.0)]);
        let h = solve_dirichlet_pinned(&g, &pinned).unwrap();
        let mu = GraphMeasure::Vertices(BTreeMap::from([
            ("a".to_string(), 1.0),
            ("b".to_string(), 1.0),
        ]));
        let report = h1_inner(&h, &h, &mu).unwrap();
        assert_relative_eq!(report.dirichlet, 1.0);
        assert_relative_eq!(report.boundary, 1.0);
        assert_relative_eq!(report.h1, 2.0);
    }

    #[test]
    fn h1_constant_equals_mass() {
        let g = tree(2, 0.5, 1.0, 3);
        let data = StepFunction::constant(2, 2.0);
        let h = solve_dirichlet(&g, &data).unwrap();
        let mu = GraphMeasure::Ends(BoundaryMeasure::uniform(2, 1.5).unwrap());
        let report = h1_inner(&h, &h, &mu).unwrap();
        assert_relative_eq!(report.h1, 4.0 * 1.5, epsilon = 1e-13);
    }

    #[test]
    fn harmonic_measure_symmetric_root() {
        let g = tree(2, 0.5, 1.0, 3);
        let p = ClopenPartition::standard(2, 1).unwrap();
        let root = g.vertex_point(g.vertex_index("").unwrap());
        let m = harmonic_measure(&g, &p, root).unwrap();
        assert_relative_eq!(m[0], 0.5, epsilon = 1e-13);
        assert_relative_eq!(m[1], 0.5, epsilon = 1e-13);
    }

    #[test]
    fn harmonic_measure_sums_to_one() {
        let g = tree(3, 0.3, 1.0, 3);
        let p = ClopenPartition::standard(3, 2).unwrap();
        let at = GraphPoint::new(1, 0.1);
        let m = harmonic_measure(&g, &p, at).unwrap();
        let sum: f64 = m.iter().sum();
        assert_relative_eq!(sum, 1.0, epsilon = 1e-12);
        assert!(m.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn harmonic_measure_conductance_weighted() {
        // Legs of length 1 and 2: measure at the center is (2/3, 1/3).
        let g = Arc::new(build_explicit(&[("c", "a", 1.0), ("c", "b", 2.0)], &["a", "b"]).unwrap());
        let c = g.vertex_point(g.vertex_index("c").unwrap());
        let m =
            harmonic_measure_groups(&g, &[vec!["a".to_string()], vec!["b".to_string()]], c).unwrap();
        assert_relative_eq!(m[0], 2.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(m[1], 1.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn extend_constant_converges_immediately() {
        let g = tree(2, 0.5, 1.0, 4);
        let out = extend_continuous(&g, &|_| 5.0, 1e-9, 0).unwrap();
        assert!(out.converged);
        assert_eq!(out.steps.len(), 2);
        assert!(out.function.values().iter().all(|&x| (x - 5.0).abs() < 1e-13));
    }

    #[test]
    fn extend_indicator_is_fixed_point() {
        let g = tree(2, 0.5, 1.0, 5);
        let sampler = |w: &EndAddress| {
            if w.digits().first() == Some(&0) {
                1.0
            } else {
                0.0
            }
        };
        let out = extend_continuous(&g, &sampler, 1e-12, 0).unwrap();
        assert!(out.converged);
        let direct = solve_dirichlet(&g, &indicator_of_zero(2)).unwrap();
        for v in 0..g.vertex_count() {
            assert_relative_eq!(out.function.vertex_value(v), direct.vertex_value(v), epsilon = 1e-12);
        }
    }

    #[test]
    fn sqrt_distance_energies_grow() {
        let g = tree(2, 0.5, 1.0, 8);
        let sampler = sqrt_distance_to_leftmost_end(*g.tree_spec().unwrap());
        let out = extend_continuous(&g, &sampler, 0.0, 8).unwrap();
        assert!(!out.converged);
        let steps: Vec<_> = out.steps.iter().filter(|s| s.depth >= 3).collect();
        for w in steps.windows(2) {
            assert!(
                w[1].dirichlet_energy > w[0].dirichlet_energy,
                "energies must strictly increase: {:?}",
                steps.iter().map(|s| s.dirichlet_energy).collect::<Vec<_>>()
            );
        }
        let diffs: Vec<f64> = steps.iter().filter_map(|s| s.sup_diff).collect();
        for w in diffs.windows(2) {
            assert!(w[1] <= w[0], "sup diffs must decrease: {diffs:?}");
        }
    }

    #[test]
    fn lipschitz_bound_holds() {
        let g = tree(2, 0.5, 1.0, 5);
        let h = solve_dirichlet(&g, &indicator_of_zero(2)).unwrap();
        let mu = GraphMeasure::Ends(BoundaryMeasure::uniform(2, 1.0).unwrap());
        let mut pairs = Vec::new();
        for e in (0..g.edge_count()).step_by(3) {
            let q = (e + 5) % g.edge_count();
            pairs.push((
                GraphPoint::new(e, 0.25 * g.edge(e).length),
                GraphPoint::new(q, 0.5 * g.edge(q).length),
            ));
        }
        let report = lipschitz_check(&h, &mu, &pairs).unwrap();
        assert!(report.max_ratio <= report.bound + 1e-12);
    }

    #[test]
    fn orthogonality_single_edge_bump() {
        let g = tree(2, 0.5, 1.0, 4);
        let h = solve_dirichlet(&g, &indicator_of_zero(2)).unwrap();
        // Quartic bump on an interior edge, zero value and slope at ends.
        let mut f = PiecewiseFunction::zero(Arc::clone(&g));
        let e = 0; // root edge: both endpoints interior
        let l = g.edge(e).length;
        f.set_shape(e, EdgeShape::Poly(vec![0.0, 0.0, 1.0, -2.0 / l, 1.0 / (l * l)]));
        let res = orthogonality_residual(&f, &h, 1e-12).unwrap();
        assert!(res < 1e-10, "residual {res}");
    }

    #[test]
    fn orthogonality_star_bump() {
        let g = tree(2, 0.5, 1.0, 5);
        let h = solve_dirichlet(&g, &indicator_of_zero(2)).unwrap();
        let v = g.vertex_index("01").unwrap();
        let f = interior_bump(&g, v, 1.3).unwrap();
        let res = orthogonality_residual(&f, &h, 1e-12).unwrap();
        assert!(res < 1e-9, "residual {res}");
    }

    #[test]
    fn bump_near_boundary_rejected() {
        let g = tree(2, 0.5, 1.0, 3);
        let v = g.vertex_index("01").unwrap(); // children are depth-3 leaves
        assert!(matches!(interior_bump(&g, v, 1.0), Err(Error::NotCompactlySupported(_))));
    }

    #[test]
    fn mean_value_property() {
        let g = tree(2, 0.5, 1.0, 4);
        let h = solve_dirichlet(&g, &indicator_of_zero(2)).unwrap();
        // Vertex "0" has edges of lengths 1 (up) and 1/2, 1/2 (down).
        let v = g.vertex_index("0").unwrap();
        let res = h.mean_value_residual(v, 0.25).unwrap();
        assert!(res.abs() < 1e-12);
    }

    #[test]
    fn evaluate_at_vertex_points_and_invalid_offsets() {
        let g = tree(2, 0.5, 1.0, 3);
        let h = solve_dirichlet(&g, &indicator_of_zero(2)).unwrap();
        for v in [g.vertex_index("").unwrap(), g.vertex_index("01").unwrap()] {
            let p = g.vertex_point(v);
            assert_relative_eq!(h.evaluate(p).unwrap(), h.vertex_value(v));
        }
        assert!(matches!(
            h.evaluate(GraphPoint::new(0, 2.5)),
            Err(Error::InvalidPoint(_))
        ));
        assert!(matches!(
            h.evaluate(GraphPoint::new(999, 0.0)),
            Err(Error::InvalidPoint(_))
        ));
    }

    #[test]
    fn h1_inner_rejects_mismatched_graphs() {
        let g1 = tree(2, 0.5, 1.0, 3);
        let g2 = tree(2, 0.5, 1.0, 3);
        let h1v = solve_dirichlet(&g1, &indicator_of_zero(2)).unwrap();
        let h2v = solve_dirichlet(&g2, &indicator_of_zero(2)).unwrap();
        let mu = GraphMeasure::Ends(BoundaryMeasure::uniform(2, 1.0).unwrap());
        assert!(matches!(h1_inner(&h1v, &h2v, &mu), Err(Error::GraphMismatch)));
    }

    #[test]
    fn lipschitz_of_constant_is_zero() {
        let g = tree(2, 0.5, 1.0, 3);
        let h = solve_dirichlet(&g, &StepFunction::constant(2, 4.0)).unwrap();
        let mu = GraphMeasure::Ends(BoundaryMeasure::uniform(2, 1.0).unwrap());
        let pairs = vec![(GraphPoint::new(0, 0.25), GraphPoint::new(3, 0.1))];
        let report = lipschitz_check(&h, &mu, &pairs).unwrap();
        assert_eq!(report.max_ratio, 0.0);
    }

    #[test]
    fn end_limit_reports_data() {
        let g = tree(2, 0.5, 1.0, 3);
        let h = solve_dirichlet(&g, &indicator_of_zero(2)).unwrap();
        let a = EndAddress::parse("0110").unwrap();
        assert_relative_eq!(h.end_limit(&a).unwrap(), 1.0);
        let b = EndAddress::parse("10").unwrap();
        assert_relative_eq!(h.end_limit(&b).unwrap(), 0.0);
    }
}
