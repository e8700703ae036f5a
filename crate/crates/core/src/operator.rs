//! Symmetric discretizations of the second derivative on metric graphs.
//!
//! Each edge carries `m` linear elements with consistent mass; shared vertex
//! degrees of freedom give continuity, and the Kirchhoff condition arises as
//! the natural condition of the energy form. Boundary conditions:
//!
//! * `Dirichlet` — listed (or all) boundary vertices pinned to zero.
//! * `Neumann` — natural, no constraint.
//! * `RobinClassical` — adds `k_v f(v)^2` to the quadratic form at boundary
//!   vertices, the string-with-spring model.
//! * `ConstantClamp` — each cluster of cut vertices shares one constant
//!   unknown; clamped tails contribute their volume as mass and no
//!   stiffness.
//! * `HarmonicClamp` — beyond each cluster the function is a constant
//!   multiple of a fixed harmonic profile `h`; the cluster reduces to one
//!   unknown `c` with stiffness `c^2 B` and mass `c^2 ∫ h^2`, where
//!   `B = Σ_v h(v) ∂_ν h(v)` with the derivative taken into the core. Both
//!   tail terms are exact closed forms, so no truncation error enters.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};

use crate::boundary::EndAddress;
use crate::error::{Error, Result};
use crate::graph::MetricGraph;
use crate::harmonic::HarmonicFunction;
use crate::piecewise::{adaptive_simpson, PiecewiseFunction};

/// A named group of cut vertices sharing one clamp constant.
#[derive(Debug, Clone)]
pub struct ClampCluster {
    pub id: String,
    pub vertices: Vec<String>,
}

/// Data reducing a clamped region to a single degree of freedom.
#[derive(Debug, Clone)]
pub struct ClampProfile {
    /// Profile value at each cut vertex; must be nonzero.
    pub values: BTreeMap<String, f64>,
    /// `Σ_v h(v) ∂_ν h(v)`, derivative into the core.
    pub boundary_term: f64,
    /// `∫ h^2` over the clamped region.
    pub tail_mass: f64,
}

impl ClampProfile {
    /// Profile of a harmonic function across the truncation tails at the
    /// given cut vertices. The boundary term uses the exact tail flux
    /// `(h(v) - c) / R`, and the tail mass sums the radial profile `h^2`
    /// level by level in closed form.
    pub fn from_harmonic(h: &HarmonicFunction, vertices: &[String]) -> Result<ClampProfile> {
        let g = h.graph();
        let spec = g.tree_spec().ok_or(Error::NotATree)?;
        let mut values = BTreeMap::new();
        let mut boundary_term = 0.0;
        let mut tail_mass = 0.0;
        for name in vertices {
            let v = g.vertex_index(name)?;
            let tail = h
                .tails()
                .get(&v)
                .ok_or_else(|| Error::BadBoundaryCondition(format!("{name} carries no tail")))?;
            let a = h.vertex_value(v);
            values.insert(name.clone(), a);
            boundary_term += a * (a - tail.value) / tail.resistance;
            tail_mass += tail_squared_mass(spec.b, spec.r, spec.l0, spec.depth, a, tail.value)?;
        }
        Ok(ClampProfile { values, boundary_term, tail_mass })
    }

    /// Profile for a clamp at explicit boundary vertices with no region
    /// beyond: a value and an inward slope per vertex, as in the classical
    /// Robin picture where the profile grows linearly into the core.
    pub fn at_vertices(data: &[(String, f64, f64)]) -> ClampProfile {
        let mut values = BTreeMap::new();
        let mut boundary_term = 0.0;
        for (name, value, inward_slope) in data {
            values.insert(name.clone(), *value);
            boundary_term += value * inward_slope;
        }
        ClampProfile { values, boundary_term, tail_mass: 0.0 }
    }

    /// The constant profile: value `c` at every cut vertex, no boundary
    /// term, tail mass `c^2 vol(tail)`.
    pub fn constant(c: f64, vertices: &[String], tail_volume: f64) -> ClampProfile {
        ClampProfile {
            values: vertices.iter().map(|n| (n.clone(), c)).collect(),
            boundary_term: 0.0,
            tail_mass: c * c * tail_volume,
        }
    }
}

/// `∫ h^2` over the infinite homogeneous subtree below one depth-`d` vertex
/// where the radial harmonic profile descends from `a` to the end value `c`.
///
/// Level `j` holds `b^{j+1}` edges of length `l0 r^{d+j}`; the node values
/// are `c + (a-c) (r/b)^j`, so the integral splits into three geometric
/// series with ratios `b r`, `r^2`, and `r^3 / b`. The first diverges when
/// `b r >= 1` unless `c = 0`.
pub fn tail_squared_mass(b: u32, r: f64, l0: f64, depth: u32, a: f64, c: f64) -> Result<f64> {
    let bf = b as f64;
    let br = bf * r;
    let s = r / bf;
    let amp = a - c;
    let prefactor = bf * l0 * r.powi(depth as i32) / 3.0;
    let mut total = 0.0;
    if c != 0.0 {
        if br >= 1.0 {
            return Err(Error::InfiniteTailMass(format!(
                "b*r = {br} >= 1 with nonzero end value {c}"
            )));
        }
        total += 3.0 * c * c / (1.0 - br);
        total += 3.0 * c * amp * (1.0 + s) / (1.0 - r * r);
    }
    // The decaying part has ratio r^3/b < 1 and always converges.
    total += amp * amp * (1.0 + s + s * s) / (1.0 - r * r * r / bf);
    Ok(prefactor * total)
}

/// Boundary conditions supported by [`assemble`].
#[derive(Debug, Clone)]
pub enum BoundaryCondition {
    /// Pin the listed vertices (all boundary vertices when `None`) to zero.
    Dirichlet { vertices: Option<Vec<String>> },
    Neumann,
    /// `k_v >= 0` per boundary vertex.
    RobinClassical { coefficients: BTreeMap<String, f64> },
    ConstantClamp { clusters: Vec<ClampCluster> },
    HarmonicClamp { clusters: Vec<(ClampCluster, ClampProfile)> },
}

impl BoundaryCondition {
    /// Robin condition with one coefficient at every boundary vertex.
    pub fn robin_uniform(graph: &MetricGraph, k: f64) -> BoundaryCondition {
        let coefficients = graph
            .boundary_vertices()
            .into_iter()
            .map(|v| (graph.vertex_name(v).to_string(), k))
            .collect();
        BoundaryCondition::RobinClassical { coefficients }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            BoundaryCondition::Dirichlet { .. } => "dirichlet",
            BoundaryCondition::Neumann => "neumann",
            BoundaryCondition::RobinClassical { .. } => "robin",
            BoundaryCondition::ConstantClamp { .. } => "constant_clamp",
            BoundaryCondition::HarmonicClamp { .. } => "harmonic_clamp",
        }
    }
}

/// Degree-of-freedom kinds, in assembly order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Dof {
    Vertex(usize),
    Internal { edge: usize, node: usize },
    Clamp { cluster: usize },
}

#[derive(Debug, Clone, Copy)]
enum VertexDof {
    Free(usize),
    FixedZero,
    Clamped { dof: usize, coeff: f64 },
}

/// Per-cluster clamp data in dof coordinates.
#[derive(Debug, Clone)]
pub struct ClampDofInfo {
    pub cluster_id: String,
    pub dof: usize,
    pub boundary_term: f64,
    pub tail_mass: f64,
}

/// A symmetric stiffness/mass pencil with its dof map and the boundary-term
/// decomposition of its quadratic form.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    graph: Arc<MetricGraph>,
    kind: String,
    k: DMatrix<f64>,
    m: DMatrix<f64>,
    dofs: Vec<Dof>,
    mesh: usize,
    vertex_dofs: Vec<VertexDof>,
    clamp_info: Vec<ClampDofInfo>,
    robin_terms: Vec<(usize, f64)>,
}

/// Quadratic-form decomposition `total = core + boundary`.
#[derive(Debug, Clone, Copy)]
pub struct FormReport {
    pub total: f64,
    pub core_energy: f64,
    pub boundary_part: f64,
}

/// Ascending eigenvalues of the stiffness/mass pencil.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Option<DMatrix<f64>>,
}

/// Assembles the piecewise-linear finite-element discretization of the
/// second derivative on `graph` with `mesh` subintervals per edge under the
/// given boundary condition.
pub fn assemble(
    graph: &Arc<MetricGraph>,
    bc: &BoundaryCondition,
    mesh: usize,
) -> Result<DiscreteOperator> {
    if mesh < 2 {
        return Err(Error::BadBoundaryCondition(format!("mesh m = {mesh} must be >= 2")));
    }
    let n_vertices = graph.vertex_count();
    let mut vertex_dofs = vec![VertexDof::Free(usize::MAX); n_vertices];
    let mut dofs: Vec<Dof> = Vec::new();
    let mut clamp_info: Vec<ClampDofInfo> = Vec::new();
    let mut robin_terms: Vec<(usize, f64)> = Vec::new();

    // Classify vertices according to the boundary condition.
    let mut pinned: BTreeSet<usize> = BTreeSet::new();
    let mut clamped: BTreeMap<usize, (usize, f64)> = BTreeMap::new(); // vertex -> (cluster idx, coeff)
    let mut cluster_data: Vec<(String, f64, f64)> = Vec::new(); // (id, B, tail mass)
    match bc {
        BoundaryCondition::Neumann => {}
        BoundaryCondition::Dirichlet { vertices } => {
            match vertices {
                None => pinned.extend(graph.boundary_vertices()),
                Some(names) => {
                    for name in names {
                        pinned.insert(graph.vertex_index(name)?);
                    }
                }
            }
            if pinned.is_empty() {
                return Err(Error::BadBoundaryCondition(
                    "Dirichlet condition pins no vertices".into(),
                ));
            }
        }
        BoundaryCondition::RobinClassical { coefficients } => {
            for (name, &k) in coefficients {
                let v = graph.vertex_index(name)?;
                if !graph.is_boundary(v) {
                    return Err(Error::BadBoundaryCondition(format!(
                        "Robin coefficient given at interior vertex {name}"
                    )));
                }
                if k < 0.0 || !k.is_finite() {
                    return Err(Error::BadBoundaryCondition(format!(
                        "Robin coefficient {k} at {name} must be nonnegative"
                    )));
                }
            }
        }
        BoundaryCondition::ConstantClamp { clusters } => {
            for (ci, cluster) in clusters.iter().enumerate() {
                let spec = graph.tree_spec();
                let tail_volume = match spec {
                    Some(s) => {
                        let per_leaf = s.tail_volume(s.depth).ok_or_else(|| {
                            Error::InfiniteTailMass(format!(
                                "b*r = {} >= 1: constant clamp tails have infinite volume",
                                s.b as f64 * s.r
                            ))
                        })?;
                        per_leaf * cluster.vertices.len() as f64
                    }
                    None => 0.0,
                };
                register_cluster(
                    graph,
                    &mut clamped,
                    ci,
                    cluster,
                    &ClampProfile::constant(1.0, &cluster.vertices, tail_volume),
                )?;
                cluster_data.push((cluster.id.clone(), 0.0, tail_volume));
            }
        }
        BoundaryCondition::HarmonicClamp { clusters } => {
            for (ci, (cluster, profile)) in clusters.iter().enumerate() {
                register_cluster(graph, &mut clamped, ci, cluster, profile)?;
                cluster_data.push((cluster.id.clone(), profile.boundary_term, profile.tail_mass));
            }
        }
    }

    // Vertex dofs.
    for v in 0..n_vertices {
        if pinned.contains(&v) {
            vertex_dofs[v] = VertexDof::FixedZero;
        } else if let Some(&(_ci, coeff)) = clamped.get(&v) {
            vertex_dofs[v] = VertexDof::Clamped { dof: usize::MAX, coeff };
        } else {
            vertex_dofs[v] = VertexDof::Free(dofs.len());
            dofs.push(Dof::Vertex(v));
        }
    }
    // Internal dofs per edge.
    let mut internal_start = vec![0usize; graph.edge_count()];
    for e in 0..graph.edge_count() {
        internal_start[e] = dofs.len();
        for node in 1..mesh {
            dofs.push(Dof::Internal { edge: e, node });
        }
    }
    // Clamp dofs.
    let mut cluster_dof = vec![usize::MAX; cluster_data.len()];
    for (ci, (id, b_term, t_mass)) in cluster_data.iter().enumerate() {
        let dof = dofs.len();
        cluster_dof[ci] = dof;
        dofs.push(Dof::Clamp { cluster: ci });
        clamp_info.push(ClampDofInfo {
            cluster_id: id.clone(),
            dof,
            boundary_term: *b_term,
            tail_mass: *t_mass,
        });
    }
    for (&v, &(ci, coeff)) in &clamped {
        vertex_dofs[v] = VertexDof::Clamped { dof: cluster_dof[ci], coeff };
    }
    if let BoundaryCondition::RobinClassical { coefficients } = bc {
        for (name, &kv) in coefficients {
            let v = graph.vertex_index(name)?;
            if let VertexDof::Free(d) = vertex_dofs[v] {
                robin_terms.push((d, kv));
            }
        }
    }

    let n = dofs.len();
    let mut k = DMatrix::<f64>::zeros(n, n);
    let mut m = DMatrix::<f64>::zeros(n, n);
    // Element loop: nodes 0..=mesh along each edge; node 0 = tail vertex,
    // node mesh = head vertex.
    for (e, ed) in graph.edges().iter().enumerate() {
        let h = ed.length / mesh as f64;
        let node_dof = |node: usize| -> Option<(usize, f64)> {
            if node == 0 {
                match vertex_dofs[ed.tail] {
                    VertexDof::Free(d) => Some((d, 1.0)),
                    VertexDof::FixedZero => None,
                    VertexDof::Clamped { dof, coeff } => Some((dof, coeff)),
                }
            } else if node == mesh {
                match vertex_dofs[ed.head] {
                    VertexDof::Free(d) => Some((d, 1.0)),
                    VertexDof::FixedZero => None,
                    VertexDof::Clamped { dof, coeff } => Some((dof, coeff)),
                }
            } else {
                Some((internal_start[e] + node - 1, 1.0))
            }
        };
        let k_local = [[1.0 / h, -1.0 / h], [-1.0 / h, 1.0 / h]];
        let m_local = [[h / 3.0, h / 6.0], [h / 6.0, h / 3.0]];
        for elem in 0..mesh {
            let nodes = [elem, elem + 1];
            for (i, &ni) in nodes.iter().enumerate() {
                let Some((di, ci)) = node_dof(ni) else { continue };
                for (j, &nj) in nodes.iter().enumerate() {
                    let Some((dj, cj)) = node_dof(nj) else { continue };
                    k[(di, dj)] += ci * cj * k_local[i][j];
                    m[(di, dj)] += ci * cj * m_local[i][j];
                }
            }
        }
    }
    for &(d, kv) in &robin_terms {
        k[(d, d)] += kv;
    }
    for info in &clamp_info {
        k[(info.dof, info.dof)] += info.boundary_term;
        m[(info.dof, info.dof)] += info.tail_mass;
    }
    Ok(DiscreteOperator {
        graph: Arc::clone(graph),
        kind: bc.kind().to_string(),
        k,
        m,
        dofs,
        mesh,
        vertex_dofs,
        clamp_info,
        robin_terms,
    })
}

fn register_cluster(
    graph: &MetricGraph,
    clamped: &mut BTreeMap<usize, (usize, f64)>,
    ci: usize,
    cluster: &ClampCluster,
    profile: &ClampProfile,
) -> Result<()> {
    if cluster.vertices.is_empty() {
        return Err(Error::BadBoundaryCondition(format!("cluster {:?} is empty", cluster.id)));
    }
    for name in &cluster.vertices {
        let v = graph.vertex_index(name)?;
        if !graph.is_boundary(v) {
            return Err(Error::BadBoundaryCondition(format!(
                "cluster {:?} includes interior vertex {name}",
                cluster.id
            )));
        }
        if clamped.contains_key(&v) {
            return Err(Error::BadBoundaryCondition(format!(
                "vertex {name} appears in more than one cluster"
            )));
        }
        let coeff = *profile.values.get(name).ok_or_else(|| {
            Error::BadBoundaryCondition(format!("profile missing a value at {name}"))
        })?;
        if coeff <= 0.0 {
            return Err(Error::BadBoundaryCondition(format!(
                "clamp profile must be positive at cut vertex {name}, got {coeff}"
            )));
        }
        if !profile.tail_mass.is_finite() || profile.tail_mass < 0.0 {
            return Err(Error::InfiniteTailMass(format!(
                "cluster {:?} has tail mass {}",
                cluster.id, profile.tail_mass
            )));
        }
        clamped.insert(v, (ci, coeff));
    }
    Ok(())
}

impl DiscreteOperator {
    pub fn dof_count(&self) -> usize {
        self.dofs.len()
    }

    pub fn dofs(&self) -> &[Dof] {
        &self.dofs
    }

    pub fn stiffness(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn mass(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn mesh(&self) -> usize {
        self.mesh
    }

    pub fn kind(&self) -> &str {
        &self.kind
    }

    pub fn clamp_info(&self) -> &[ClampDofInfo] {
        &self.clamp_info
    }

    pub fn graph(&self) -> &Arc<MetricGraph> {
        &self.graph
    }

    /// Value of the represented function at a mesh node of edge `e`, for
    /// the dof vector `x`.
    fn node_value(&self, x: &[f64], e: usize, node: usize, internal_start: &[usize]) -> f64 {
        let ed = self.graph.edge(e);
        if node == 0 || node == self.mesh {
            let v = if node == 0 { ed.tail } else { ed.head };
            match self.vertex_dofs[v] {
                VertexDof::Free(d) => x[d],
                VertexDof::FixedZero => 0.0,
                VertexDof::Clamped { dof, coeff } => coeff * x[dof],
            }
        } else {
            x[internal_start[e] + node - 1]
        }
    }

    fn internal_starts(&self) -> Vec<usize> {
        let mut starts = vec![0usize; self.graph.edge_count()];
        for (i, dof) in self.dofs.iter().enumerate() {
            if let Dof::Internal { edge, node: 1 } = dof {
                starts[*edge] = i;
            }
        }
        starts
    }

    /// Evaluates `x^T K x` and reports the decomposition into the core
    /// Dirichlet energy of the interpolated function and the boundary part.
    /// The core part is recomputed from node differences, independently of
    /// the assembled matrix.
    pub fn quadratic_form(&self, x: &[f64]) -> Result<FormReport> {
        if x.len() != self.dofs.len() {
            return Err(Error::DimensionMismatch { expected: self.dofs.len(), got: x.len() });
        }
        let xv = nalgebra::DVector::from_column_slice(x);
        let total = (xv.transpose() * &self.k * &xv)[(0, 0)];
        let starts = self.internal_starts();
        let mut core = 0.0;
        for e in 0..self.graph.edge_count() {
            let h = self.graph.edge(e).length / self.mesh as f64;
            for elem in 0..self.mesh {
                let a = self.node_value(x, e, elem, &starts);
                let b = self.node_value(x, e, elem + 1, &starts);
                core += (b - a) * (b - a) / h;
            }
        }
        let mut boundary = 0.0;
        for info in &self.clamp_info {
            boundary += info.boundary_term * x[info.dof] * x[info.dof];
        }
        for &(d, kv) in &self.robin_terms {
            boundary += kv * x[d] * x[d];
        }
        Ok(FormReport { total, core_energy: core, boundary_part: boundary })
    }

    /// `max |K - K^T| + max |M - M^T|`; zero for every assembly.
    pub fn symmetry_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        let n = self.k.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self.k[(i, j)] - self.k[(j, i)]).abs());
            }
        }
        let mut worst_m = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                worst_m = worst_m.max((self.m[(i, j)] - self.m[(j, i)]).abs());
            }
        }
        worst + worst_m
    }

    /// Negative-control fixture: a copy with one off-diagonal stiffness
    /// entry perturbed, breaking symmetry on purpose.
    pub fn corrupted_for_negative_control(&self) -> DiscreteOperator {
        let mut out = self.clone();
        if out.k.nrows() >= 2 {
            out.k[(0, 1)] += 0.125;
        }
        out
    }

    /// The `count` smallest eigenvalues of `K x = λ M x`.
    pub fn eigenvalues(&self, count: usize) -> Result<Spectrum> {
        self.eigen(count, false)
    }

    pub fn eigenpairs(&self, count: usize) -> Result<Spectrum> {
        self.eigen(count, true)
    }

    fn eigen(&self, count: usize, want_vectors: bool) -> Result<Spectrum> {
        if count > self.dofs.len() {
            return Err(Error::TooManyEigenvalues(count, self.dofs.len()));
        }
        let (values, vectors) = generalized_symmetric_eigen(&self.k, &self.m, want_vectors)?;
        Ok(Spectrum {
            eigenvalues: values.into_iter().take(count).collect(),
            eigenvectors: vectors.map(|m| m.columns(0, count).into_owned()),
        })
    }
}

/// Solves the symmetric-definite pencil `K x = λ M x` by a Cholesky
/// reduction to a standard symmetric eigenproblem; eigenvalues ascending.
pub fn generalized_symmetric_eigen(
    k: &DMatrix<f64>,
    m: &DMatrix<f64>,
    want_vectors: bool,
) -> Result<(Vec<f64>, Option<DMatrix<f64>>)> {
    let chol = Cholesky::new(m.clone())
        .ok_or_else(|| Error::Numerical("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    let y = l
        .solve_lower_triangular(k)
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    let a_t = l
        .solve_lower_triangular(&y.transpose())
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    let a = 0.5 * (&a_t + a_t.transpose());
    let eig = SymmetricEigen::new(a);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = if want_vectors {
        // Back-transform x = L^{-T} y.
        let lt = l.transpose();
        let mut cols = DMatrix::<f64>::zeros(n, n);
        for (ci, &i) in order.iter().enumerate() {
            let y = eig.eigenvectors.column(i).into_owned();
            let x = lt
                .solve_upper_triangular(&y)
                .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
            cols.set_column(ci, &x);
        }
        Some(cols)
    } else {
        None
    };
    Ok((values, vectors))
}

/// Residual of the integration-by-parts identity
/// `∫ f'' h + ∫ f' h' + Σ_{v ∈ ∂} h(v) ∂_ν f_e(v) = 0`
/// by composite quadrature, together with the interior Kirchhoff balance of
/// `f` (the identity legitimately fails without it).
#[derive(Debug, Clone, Copy)]
pub struct IbpReport {
    pub residual: f64,
    /// Largest interior Kirchhoff residual of `f`.
    pub kirchhoff_residual: f64,
    pub kirchhoff_ok: bool,
}

pub fn ibp_residual(
    f: &PiecewiseFunction,
    h: &PiecewiseFunction,
    quad_tol: f64,
) -> Result<IbpReport> {
    if !Arc::ptr_eq(f.graph(), h.graph()) {
        return Err(Error::GraphMismatch);
    }
    let graph = f.graph();
    let mut integral = 0.0;
    for (e, ed) in graph.edges().iter().enumerate() {
        let len = ed.length;
        let fs = f.shape(e).clone();
        let hs = h.shape(e).clone();
        integral += adaptive_simpson(
            &|t| fs.deriv2(t, len) * hs.value(t, len) + fs.deriv(t, len) * hs.deriv(t, len),
            0.0,
            len,
            quad_tol,
        );
    }
    let mut boundary = 0.0;
    for v in graph.boundary_vertices() {
        let hv = h.vertex_value(v);
        for &e in graph.incident(v) {
            boundary += hv * f.outward_derivative(v, e);
        }
    }
    let kirchhoff_residual = (0..graph.vertex_count())
        .filter(|&v| !graph.is_boundary(v))
        .map(|v| f.kirchhoff_residual(v).abs())
        .fold(0.0, f64::max);
    Ok(IbpReport {
        residual: (integral + boundary).abs(),
        kirchhoff_residual,
        kirchhoff_ok: kirchhoff_residual <= 1e-8,
    })
}

/// Side-by-side comparison of the constant and harmonic clamps on one core.
#[derive(Debug, Clone)]
pub struct ClampComparison {
    pub lambda1_constant: f64,
    pub lambda1_harmonic: f64,
    /// `λ₁(harmonic) - λ₁(constant)`.
    pub lambda_gap: f64,
    /// Minimum of `Σ c_n² B_n` over clamp-supported vectors of unit mass
    /// norm; strictly positive when some `B_n > 0`.
    pub form_gap: f64,
}

/// Assembles both clamp operators over the same clusters and mesh and
/// compares their ground states and forms.
pub fn compare_clamps(
    graph: &Arc<MetricGraph>,
    clusters: &[ClampCluster],
    profiles: &[ClampProfile],
    mesh: usize,
) -> Result<ClampComparison> {
    if clusters.len() != profiles.len() {
        return Err(Error::DimensionMismatch { expected: clusters.len(), got: profiles.len() });
    }
    let constant = assemble(
        graph,
        &BoundaryCondition::ConstantClamp { clusters: clusters.to_vec() },
        mesh,
    )?;
    let harmonic = assemble(
        graph,
        &BoundaryCondition::HarmonicClamp {
            clusters: clusters.iter().cloned().zip(profiles.iter().cloned()).collect(),
        },
        mesh,
    )?;
    let l_const = constant.eigenvalues(1)?.eigenvalues[0];
    let l_harm = harmonic.eigenvalues(1)?.eigenvalues[0];
    // Form gap over clamp-supported vectors: the smallest eigenvalue of the
    // pencil (diag B, M restricted to the clamp block).
    let n_clamp = harmonic.clamp_info.len();
    let form_gap = if n_clamp == 0 {
        0.0
    } else {
        let mut bmat = DMatrix::<f64>::zeros(n_clamp, n_clamp);
        let mut mmat = DMatrix::<f64>::zeros(n_clamp, n_clamp);
        for (i, a) in harmonic.clamp_info.iter().enumerate() {
            bmat[(i, i)] = a.boundary_term;
            for (j, b) in harmonic.clamp_info.iter().enumerate() {
                mmat[(i, j)] = harmonic.m[(a.dof, b.dof)];
            }
        }
        generalized_symmetric_eigen(&bmat, &mmat, false)?.0[0]
    };
    Ok(ClampComparison {
        lambda1_constant: l_const,
        lambda1_harmonic: l_harm,
        lambda_gap: l_harm - l_const,
        form_gap,
    })
}

/// The truncation leaves lying under the given cylinder words, as a clamp
/// cluster.
pub fn cluster_for_cell(
    graph: &MetricGraph,
    id: &str,
    cell_words: &[EndAddress],
) -> Result<ClampCluster> {
    let _ = graph.tree_spec().ok_or(Error::NotATree)?;
    let mut vertices = Vec::new();
    for &leaf in &graph.tree_leaves()? {
        let word = EndAddress::parse(graph.vertex_name(leaf))?;
        if cell_words.iter().any(|w| w.is_prefix_of(&word)) {
            vertices.push(graph.vertex_name(leaf).to_string());
        }
    }
    if vertices.is_empty() {
        return Err(Error::BadBoundaryCondition(format!(
            "cell {id:?} matches no truncation leaf"
        )));
    }
    Ok(ClampCluster { id: id.to_string(), vertices })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{ClopenPartition, StepFunction};
    use crate::graph::{build_explicit, build_tree, TreeSpec};
    use crate::harmonic::solve_dirichlet;
    use crate::piecewise::EdgeShape;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn interval() -> Arc<MetricGraph> {
        Arc::new(build_explicit(&[("a", "b", 1.0)], &["a", "b"]).unwrap())
    }

    #[test]
    fn neumann_stiffness_has_zero_row_sums() {
        let g = interval();
        let op = assemble(&g, &BoundaryCondition::Neumann, 100).unwrap();
        let k = op.stiffness();
        for i in 0..k.nrows() {
            let sum: f64 = (0..k.ncols()).map(|j| k[(i, j)]).sum();
            assert!(sum.abs() < 1e-12, "row {i} sums to {sum}");
        }
        assert_eq!(op.symmetry_residual(), 0.0);
    }

    #[test]
    fn robin_form_of_constant_is_total_spring() {
        let g = interval();
        let op = assemble(&g, &BoundaryCondition::robin_uniform(&g, 1.0), 50).unwrap();
        let x = vec![1.0; op.dof_count()];
        let report = op.quadratic_form(&x).unwrap();
        assert_relative_eq!(report.total, 2.0, epsilon = 1e-12);
        assert_relative_eq!(report.core_energy, 0.0, epsilon = 1e-13);
        assert_relative_eq!(report.boundary_part, 2.0);
    }

    #[test]
    fn dirichlet_interval_spectrum() {
        let g = interval();
        let op = assemble(&g, &BoundaryCondition::Dirichlet { vertices: None }, 200).unwrap();
        let spec = op.eigenvalues(3).unwrap();
        for (i, lam) in spec.eigenvalues.iter().enumerate() {
            let exact = ((i + 1) as f64 * PI).powi(2);
            assert!(
                (lam - exact).abs() / exact < 1e-3,
                "mode {i}: {lam} vs {exact}"
            );
        }
    }

    #[test]
    fn neumann_interval_spectrum() {
        let g = interval();
        let op = assemble(&g, &BoundaryCondition::Neumann, 200).unwrap();
        let spec = op.eigenvalues(4).unwrap();
        assert!(spec.eigenvalues[0].abs() < 1e-10);
        for i in 1..4 {
            let exact = (i as f64 * PI).powi(2);
            assert!((spec.eigenvalues[i] - exact).abs() / exact < 1e-3);
        }
    }

    #[test]
    fn robin_secular_equation_root() {
        // k_a = k_b = 1: the first eigenvalue solves tan μ = 2μ/(μ²-1).
        let g = interval();
        let op = assemble(&g, &BoundaryCondition::robin_uniform(&g, 1.0), 400).unwrap();
        let lam = op.eigenvalues(1).unwrap().eigenvalues[0];
        let secular = |mu: f64| (mu * mu - 1.0) * mu.sin() - 2.0 * mu * mu.cos();
        let mut lo = 0.5;
        let mut hi = PI - 1e-9;
        assert!(secular(lo) < 0.0 && secular(hi) > 0.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if secular(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mu = 0.5 * (lo + hi);
        assert!(hi - lo < 1e-12);
        assert!((lam - mu * mu).abs() / (mu * mu) < 1e-3, "{lam} vs {}", mu * mu);
    }

    #[test]
    fn robin_monotone_in_k() {
        let g = interval();
        let mut prev = -1.0;
        for k in [0.0, 1.0, 10.0] {
            let op = assemble(&g, &BoundaryCondition::robin_uniform(&g, k), 100).unwrap();
            let lam = op.eigenvalues(1).unwrap().eigenvalues[0];
            assert!(lam > prev, "λ₁ must increase with k");
            prev = lam;
        }
    }

    #[test]
    fn bc_ordering_dirichlet_robin_neumann() {
        let g = interval();
        let m = 100;
        let dir = assemble(&g, &BoundaryCondition::Dirichlet { vertices: None }, m).unwrap();
        let rob = assemble(&g, &BoundaryCondition::robin_uniform(&g, 2.0), m).unwrap();
        let neu = assemble(&g, &BoundaryCondition::Neumann, m).unwrap();
        let ld = dir.eigenvalues(5).unwrap().eigenvalues;
        let lr = rob.eigenvalues(5).unwrap().eigenvalues;
        let ln = neu.eigenvalues(5).unwrap().eigenvalues;
        for i in 0..5 {
            assert!(ld[i] >= lr[i] - 1e-9, "mode {i}: Dirichlet {} < Robin {}", ld[i], lr[i]);
            assert!(lr[i] >= ln[i] - 1e-9, "mode {i}: Robin {} < Neumann {}", lr[i], ln[i]);
        }
    }

    #[test]
    fn mesh_convergence_is_second_order() {
        let g = interval();
        let exact = PI * PI;
        let mut errors = Vec::new();
        for m in [25, 50, 100, 200] {
            let op = assemble(&g, &BoundaryCondition::Dirichlet { vertices: None }, m).unwrap();
            errors.push(op.eigenvalues(1).unwrap().eigenvalues[0] - exact);
        }
        for w in errors.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.5..=4.5).contains(&ratio), "ratio {ratio} outside [3.5, 4.5]");
        }
    }

    #[test]
    fn symmetry_negative_control() {
        let g = interval();
        let op = assemble(&g, &BoundaryCondition::Neumann, 10).unwrap();
        assert_eq!(op.symmetry_residual(), 0.0);
        let bad = op.corrupted_for_negative_control();
        assert!(bad.symmetry_residual() > 0.1);
    }

    #[test]
    fn tail_mass_constant_profile_is_volume() {
        // a = c: the closed form must reduce to c^2 * tail volume.
        let spec = TreeSpec::new(2, 0.4, 1.0, 3).unwrap();
        let mass = tail_squared_mass(2, 0.4, 1.0, 3, 2.0, 2.0).unwrap();
        assert_relative_eq!(mass, 4.0 * spec.tail_volume(3).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn tail_mass_matches_truncated_sum() {
        // Sum the radial profile directly over many levels; b*r = 0.7 makes
        // the truncation remainder negligible after 200 levels.
        let (b, r, l0, d) = (2u32, 0.35f64, 1.3f64, 2u32);
        let (a, c) = (1.7, 0.6);
        let closed = tail_squared_mass(b, r, l0, d, a, c).unwrap();
        let s = r / b as f64;
        let mut direct = 0.0;
        let mut edge_count = b as f64;
        for j in 0..200 {
            let len = l0 * r.powi((d + j) as i32);
            let vj = c + (a - c) * s.powi(j as i32);
            let vj1 = c + (a - c) * s.powi(j as i32 + 1);
            direct += edge_count * len * (vj * vj + vj * vj1 + vj1 * vj1) / 3.0;
            edge_count *= b as f64;
        }
        assert_relative_eq!(closed, direct, epsilon = 1e-10);
    }

    #[test]
    fn tail_mass_divergence_detected() {
        assert!(tail_squared_mass(2, 0.6, 1.0, 2, 1.5, 1.0).is_err());
        // Zero end value converges even at b*r >= 1.
        assert!(tail_squared_mass(2, 0.6, 1.0, 2, 1.5, 0.0).is_ok());
    }

    fn klass_profiles(
        g: &Arc<MetricGraph>,
    ) -> (Vec<ClampCluster>, Vec<ClampProfile>) {
        let p = ClopenPartition::standard(2, 1).unwrap();
        let mut clusters = Vec::new();
        let mut profiles = Vec::new();
        for n in 0..p.len() {
            let cell = &p.cell(n).words;
            let cluster = cluster_for_cell(g, &p.cell(n).id, cell).unwrap();
            // Harmonic profile: 1 on the cell, 2 on the complement; its
            // minimum sits on the cell with positive flux at the cut.
            let mut values = vec![2.0; p.len()];
            values[n] = 1.0;
            let data = StepFunction::new(p.clone(), values).unwrap();
            let h = solve_dirichlet(g, &data).unwrap();
            profiles.push(ClampProfile::from_harmonic(&h, &cluster.vertices).unwrap());
            clusters.push(cluster);
        }
        (clusters, profiles)
    }

    #[test]
    fn harmonic_clamp_form_decomposition() {
        let g = Arc::new(build_tree(TreeSpec::new(2, 0.4, 1.0, 2).unwrap()).unwrap());
        let (clusters, profiles) = klass_profiles(&g);
        let bc = BoundaryCondition::HarmonicClamp {
            clusters: clusters.into_iter().zip(profiles).collect(),
        };
        let op = assemble(&g, &bc, 6).unwrap();
        assert_eq!(op.symmetry_residual(), 0.0);
        // 100 pseudo-random vectors: x^T K x = core + boundary to 1e-10.
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for _ in 0..100 {
            let x: Vec<f64> = (0..op.dof_count()).map(|_| next()).collect();
            let report = op.quadratic_form(&x).unwrap();
            assert!(
                (report.total - report.core_energy - report.boundary_part).abs() < 1e-10,
                "decomposition mismatch: {report:?}"
            );
        }
        // Boundary part strictly positive on clamp-supported vectors.
        let mut x = vec![0.0; op.dof_count()];
        x[op.clamp_info()[0].dof] = 1.0;
        let report = op.quadratic_form(&x).unwrap();
        assert!(report.boundary_part > 0.0);
        // All eigenvalues nonnegative.
        let spec = op.eigenvalues(op.dof_count().min(8)).unwrap();
        assert!(spec.eigenvalues.iter().all(|&l| l >= -1e-10));
    }

    #[test]
    fn clamp_comparison_interval_robin_vs_neumann() {
        // One cluster at the right endpoint with profile value 1 and inward
        // slope 1 is the Robin condition k = 1 there; the constant clamp is
        // Neumann with ground state zero.
        let g = interval();
        let clusters = vec![ClampCluster { id: "right".into(), vertices: vec!["b".into()] }];
        let profiles =
            vec![ClampProfile::at_vertices(&[("b".to_string(), 1.0, 1.0)])];
        let cmp = compare_clamps(&g, &clusters, &profiles, 100).unwrap();
        assert!(cmp.lambda1_constant.abs() < 1e-10);
        assert!(cmp.lambda1_harmonic > 1e-3);
        assert!(cmp.form_gap > 0.0);
        // Against the one-sided Robin secular equation tan μ = 1/μ.
        let secular = |mu: f64| mu * mu.sin() - mu.cos();
        let (mut lo, mut hi) = (0.1, 1.5);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if secular(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mu = 0.5 * (lo + hi);
        assert!((cmp.lambda1_harmonic - mu * mu).abs() / (mu * mu) < 1e-3);
    }

    #[test]
    fn clamp_comparison_on_tree() {
        let g = Arc::new(build_tree(TreeSpec::new(2, 0.4, 1.0, 2).unwrap()).unwrap());
        let (clusters, profiles) = klass_profiles(&g);
        let cmp = compare_clamps(&g, &clusters, &profiles, 8).unwrap();
        assert!(cmp.lambda1_constant >= -1e-10);
        assert!(
            cmp.lambda1_harmonic > cmp.lambda1_constant + 1e-6,
            "expected a spectral gap, got {cmp:?}"
        );
        assert!(cmp.form_gap > 0.0);
    }

    #[test]
    fn constant_profiles_coincide_with_constant_clamp() {
        // A constant profile value γ only rescales the clamp dof, so the
        // spectrum must match the constant clamp exactly.
        let g = Arc::new(build_tree(TreeSpec::new(2, 0.4, 1.0, 2).unwrap()).unwrap());
        let spec = g.tree_spec().unwrap();
        let p = ClopenPartition::standard(2, 1).unwrap();
        let mut clusters = Vec::new();
        let mut profiles = Vec::new();
        for n in 0..p.len() {
            let cluster = cluster_for_cell(&g, &p.cell(n).id, &p.cell(n).words).unwrap();
            let vol = spec.tail_volume(spec.depth).unwrap() * cluster.vertices.len() as f64;
            profiles.push(ClampProfile::constant(1.5, &cluster.vertices, vol));
            clusters.push(cluster);
        }
        let cmp = compare_clamps(&g, &clusters, &profiles, 6).unwrap();
        assert!(
            (cmp.lambda1_harmonic - cmp.lambda1_constant).abs() < 1e-10,
            "degenerate clamps must coincide: {cmp:?}"
        );
        assert_eq!(cmp.form_gap, 0.0);
    }

    #[test]
    fn ibp_identity_linear() {
        let g = interval();
        let f = PiecewiseFunction::new(
            Arc::clone(&g),
            vec![EdgeShape::Linear { v0: 0.0, v1: 2.0 }],
        )
        .unwrap();
        let h = PiecewiseFunction::new(
            Arc::clone(&g),
            vec![EdgeShape::Linear { v0: 1.0, v1: -1.0 }],
        )
        .unwrap();
        let report = ibp_residual(&f, &h, 1e-12).unwrap();
        assert!(report.residual < 1e-10);
        assert!(report.kirchhoff_ok);
    }

    #[test]
    fn ibp_identity_sine() {
        let g = interval();
        let f = PiecewiseFunction::new(
            Arc::clone(&g),
            vec![EdgeShape::Sine { amplitude: 1.0, omega: PI, phase: 0.0, offset: 0.0 }],
        )
        .unwrap();
        let h = PiecewiseFunction::new(
            Arc::clone(&g),
            vec![EdgeShape::Linear { v0: 0.0, v1: 1.0 }],
        )
        .unwrap();
        let report = ibp_residual(&f, &h, 1e-12).unwrap();
        assert!(report.residual < 1e-8, "residual {}", report.residual);
    }

    #[test]
    fn ibp_identity_kirchhoff_cubics_on_star() {
        let g = Arc::new(
            build_explicit(&[("c", "x", 1.0), ("c", "y", 1.0), ("c", "z", 1.0)], &["x", "y", "z"])
                .unwrap(),
        );
        // f: value 1 at the center, Hermite falloff with balanced slopes.
        let mut f = PiecewiseFunction::zero(Arc::clone(&g));
        let slopes = [0.5, -0.3, -0.2]; // sums to zero outward at the center
        for (i, &e) in g.incident(g.vertex_index("c").unwrap()).iter().enumerate() {
            let ed = g.edge(e);
            // Center is the tail of each leg.
            f.set_shape(e, EdgeShape::hermite(ed.length, 1.0, slopes[i], 0.4 * (i as f64), 0.1));
        }
        let h = PiecewiseFunction::new(
            Arc::clone(&g),
            vec![
                EdgeShape::Poly(vec![0.3, 0.2, -0.1, 0.05]),
                EdgeShape::Poly(vec![0.3, -0.4, 0.2, 0.0]),
                EdgeShape::Poly(vec![0.3, 0.1, 0.0, -0.02]),
            ],
        )
        .unwrap();
        let report = ibp_residual(&f, &h, 1e-12).unwrap();
        assert!(report.kirchhoff_ok, "constructed f balances at the center");
        assert!(report.residual < 1e-8, "residual {}", report.residual);
    }

    #[test]
    fn ibp_flags_unbalanced_functions() {
        let g = Arc::new(
            build_explicit(&[("c", "x", 1.0), ("c", "y", 1.0), ("c", "z", 1.0)], &["x", "y", "z"])
                .unwrap(),
        );
        let mut f = PiecewiseFunction::zero(Arc::clone(&g));
        for (i, &e) in g.incident(g.vertex_index("c").unwrap()).iter().enumerate() {
            let ed = g.edge(e);
            f.set_shape(e, EdgeShape::hermite(ed.length, 1.0, 0.5 + i as f64, 0.0, 0.0));
        }
        let h = PiecewiseFunction::new(
            Arc::clone(&g),
            vec![
                EdgeShape::Linear { v0: 1.0, v1: 0.0 },
                EdgeShape::Linear { v0: 1.0, v1: 0.0 },
                EdgeShape::Linear { v0: 1.0, v1: 0.0 },
            ],
        )
        .unwrap();
        let report = ibp_residual(&f, &h, 1e-12).unwrap();
        assert!(!report.kirchhoff_ok);
    }

    #[test]
    fn mesh_must_be_at_least_two() {
        let g = interval();
        assert!(assemble(&g, &BoundaryCondition::Neumann, 1).is_err());
    }

    #[test]
    fn clamp_rejects_zero_profile_value() {
        let g = interval();
        let clusters = vec![(
            ClampCluster { id: "right".into(), vertices: vec!["b".into()] },
            ClampProfile::at_vertices(&[("b".to_string(), 0.0, 1.0)]),
        )];
        assert!(matches!(
            assemble(&g, &BoundaryCondition::HarmonicClamp { clusters }, 10),
            Err(Error::BadBoundaryCondition(_))
        ));
    }

    #[test]
    fn too_many_eigenvalues_rejected() {
        let g = interval();
        let op = assemble(&g, &BoundaryCondition::Neumann, 4).unwrap();
        assert!(matches!(
            op.eigenvalues(op.dof_count() + 1),
            Err(Error::TooManyEigenvalues(_, _))
        ));
    }

    #[test]
    fn quadratic_form_rejects_wrong_dimension() {
        let g = interval();
        let op = assemble(&g, &BoundaryCondition::Neumann, 4).unwrap();
        assert!(matches!(
            op.quadratic_form(&vec![0.0; op.dof_count() + 2]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn robin_rejects_interior_vertex_and_negative_k() {
        let g = Arc::new(
            build_explicit(&[("c", "x", 1.0), ("c", "y", 1.0)], &["x", "y"]).unwrap(),
        );
        let interior = BoundaryCondition::RobinClassical {
            coefficients: BTreeMap::from([("c".to_string(), 1.0)]),
        };
        assert!(matches!(
            assemble(&g, &interior, 4),
            Err(Error::BadBoundaryCondition(_))
        ));
        let negative = BoundaryCondition::RobinClassical {
            coefficients: BTreeMap::from([("x".to_string(), -1.0)]),
        };
        assert!(matches!(
            assemble(&g, &negative, 4),
            Err(Error::BadBoundaryCondition(_))
        ));
    }

    #[test]
    fn constant_clamp_rejects_infinite_volume_tails() {
        // b*r = 1.2 >= 1: constant tails carry infinite mass.
        let g = Arc::new(build_tree(TreeSpec::new(2, 0.6, 1.0, 2).unwrap()).unwrap());
        let p = ClopenPartition::standard(2, 1).unwrap();
        let clusters: Vec<ClampCluster> = (0..p.len())
            .map(|n| cluster_for_cell(&g, &p.cell(n).id, &p.cell(n).words).unwrap())
            .collect();
        assert!(matches!(
            assemble(&g, &BoundaryCondition::ConstantClamp { clusters }, 4),
            Err(Error::InfiniteTailMass(_))
        ));
    }
}
