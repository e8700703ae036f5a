//! Config schema and resolution into library values.
//!
//! Configs are TOML with dotted sections matching the documented field
//! names: `graph.type`, `graph.b`, `graph.r`, `graph.l0`, `graph.depth`,
//! `partition.cells`, `partition.values`, `bc.kind`, `bc.k`, `bc.clusters`,
//! `mesh.m`, `out.dir`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use gharm_core::boundary::{BoundaryMeasure, ClopenPartition, EndAddress, StepFunction};
use gharm_core::graph::{build_tree, MetricGraph, TreeSpec};
use gharm_core::harmonic::{solve_dirichlet, GraphMeasure};
use gharm_core::operator::{
    cluster_for_cell, BoundaryCondition, ClampCluster, ClampProfile,
};

/// Error class for the exit-code contract: schema violations exit 2,
/// numerical failures exit 3.
#[derive(Debug)]
pub enum CliError {
    Schema(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Schema(m) | CliError::Numerical(m) => m,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn schema(msg: impl Into<String>) -> CliError {
    CliError::Schema(msg.into())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub command: String,
    pub graph: GraphSection,
    pub partition: Option<PartitionSection>,
    pub measure: Option<MeasureSection>,
    pub bc: Option<BcSection>,
    pub mesh: Option<MeshSection>,
    pub spectrum: Option<SpectrumSection>,
    pub levelset: Option<LevelsetSection>,
    pub query: Option<QuerySection>,
    pub diverge: Option<DivergeSection>,
    pub sweep: Option<SweepSection>,
    pub out: Option<OutSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    #[serde(rename = "type")]
    pub kind: String,
    pub b: Option<u32>,
    pub r: Option<f64>,
    pub l0: Option<f64>,
    pub depth: Option<u32>,
    pub file: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSection {
    pub cells: Vec<Vec<String>>,
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSection {
    pub total: Option<f64>,
    pub words: Option<Vec<String>>,
    pub masses: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BcSection {
    pub kind: String,
    pub k: Option<f64>,
    pub k_per_vertex: Option<BTreeMap<String, f64>>,
    pub vertices: Option<Vec<String>>,
    pub clusters: Option<Vec<Vec<String>>>,
    /// Explicit-graph clamp profiles: (vertex, value, inward slope).
    pub profile: Option<Vec<(String, f64, f64)>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    pub m: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    pub count: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelsetSection {
    pub levels: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuerySection {
    pub at: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DivergeSection {
    pub min_depth: u32,
    pub max_depth: u32,
    pub sampler: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: String,
    pub values: Vec<f64>,
    pub quantity: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutSection {
    pub dir: String,
}

impl Config {
    pub fn load(path: &Path) -> CliResult<Config> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| schema(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: Config =
            toml::from_str(&text).map_err(|e| schema(format!("config parse error: {e}")))?;
        let known = ["solve", "measure", "levelset", "spectrum", "compare", "diverge"];
        if cfg.command != "sweep" && !known.contains(&cfg.command.as_str()) {
            return Err(schema(format!(
                "unknown command {:?}; expected one of {known:?} or \"sweep\"",
                cfg.command
            )));
        }
        Ok(cfg)
    }

    pub fn out_dir(&self, override_dir: Option<&Path>) -> PathBuf {
        if let Some(d) = override_dir {
            return d.to_path_buf();
        }
        self.out
            .as_ref()
            .map(|o| PathBuf::from(&o.dir))
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}

/// Boundary data resolved against the graph kind.
pub enum ResolvedData {
    /// Step function on the end space of a tree.
    Step(StepFunction),
    /// Named boundary-vertex groups with one value each.
    VertexGroups { groups: Vec<Vec<String>>, values: Vec<f64> },
}

/// A config resolved into library values; all references validated.
pub struct Resolved {
    pub graph: Arc<MetricGraph>,
    pub spec: Option<TreeSpec>,
    pub data: Option<ResolvedData>,
    pub measure: GraphMeasure,
    pub mesh: usize,
}

pub fn resolve_graph(cfg: &Config, base: &Path) -> CliResult<(Arc<MetricGraph>, Option<TreeSpec>)> {
    match cfg.graph.kind.as_str() {
        "tree" => {
            let b = cfg.graph.b.ok_or_else(|| schema("graph.b required for tree graphs"))?;
            let r = cfg.graph.r.ok_or_else(|| schema("graph.r required for tree graphs"))?;
            let l0 = cfg.graph.l0.ok_or_else(|| schema("graph.l0 required for tree graphs"))?;
            let depth =
                cfg.graph.depth.ok_or_else(|| schema("graph.depth required for tree graphs"))?;
            let spec = TreeSpec::new(b, r, l0, depth).map_err(|e| schema(e.to_string()))?;
            let g = build_tree(spec).map_err(|e| schema(e.to_string()))?;
            Ok((Arc::new(g), Some(spec)))
        }
        "explicit" => {
            let file = cfg
                .graph
                .file
                .as_ref()
                .ok_or_else(|| schema("graph.file required for explicit graphs"))?;
            let path = base.join(file);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| schema(format!("cannot read graph file {}: {e}", path.display())))?;
            let g = MetricGraph::from_text(&text).map_err(|e| schema(e.to_string()))?;
            Ok((Arc::new(g), None))
        }
        other => Err(schema(format!("graph.type {other:?} must be \"tree\" or \"explicit\""))),
    }
}

pub fn resolve(cfg: &Config, base: &Path) -> CliResult<Resolved> {
    let (graph, spec) = resolve_graph(cfg, base)?;
    let data = match &cfg.partition {
        None => None,
        Some(p) => {
            let values = p
                .values
                .clone()
                .ok_or_else(|| schema("partition.values required with partition.cells"))?;
            if values.len() != p.cells.len() {
                return Err(schema(format!(
                    "partition has {} cells but {} values",
                    p.cells.len(),
                    values.len()
                )));
            }
            match &spec {
                Some(s) => {
                    let cells = parse_cells(&p.cells, s)?;
                    let partition =
                        ClopenPartition::new(s.b, cells).map_err(|e| schema(e.to_string()))?;
                    let step = StepFunction::new(partition, values)
                        .map_err(|e| schema(e.to_string()))?;
                    Some(ResolvedData::Step(step))
                }
                None => {
                    for group in &p.cells {
                        for name in group {
                            let v = graph
                                .vertex_index(name)
                                .map_err(|e| schema(e.to_string()))?;
                            if !graph.is_boundary(v) {
                                return Err(schema(format!(
                                    "partition names interior vertex {name:?}"
                                )));
                            }
                        }
                    }
                    Some(ResolvedData::VertexGroups { groups: p.cells.clone(), values })
                }
            }
        }
    };
    let measure = resolve_measure(cfg, &graph, &spec)?;
    let mesh = cfg.mesh.as_ref().map(|m| m.m).unwrap_or(100);
    Ok(Resolved { graph, spec, data, measure, mesh })
}

fn parse_cells(
    cells: &[Vec<String>],
    spec: &TreeSpec,
) -> CliResult<Vec<(String, Vec<EndAddress>)>> {
    let mut out = Vec::with_capacity(cells.len());
    for (i, words) in cells.iter().enumerate() {
        let mut parsed = Vec::with_capacity(words.len());
        for w in words {
            let addr = EndAddress::parse(w).map_err(|e| schema(e.to_string()))?;
            addr.validate(spec.b, Some(spec.depth)).map_err(|e| schema(e.to_string()))?;
            parsed.push(addr);
        }
        out.push((format!("cell{i}"), parsed));
    }
    Ok(out)
}

fn resolve_measure(
    cfg: &Config,
    graph: &Arc<MetricGraph>,
    spec: &Option<TreeSpec>,
) -> CliResult<GraphMeasure> {
    match spec {
        Some(s) => {
            let total = cfg.measure.as_ref().and_then(|m| m.total).unwrap_or(1.0);
            let mu = match cfg.measure.as_ref().and_then(|m| m.words.as_ref()) {
                None => BoundaryMeasure::uniform(s.b, total).map_err(|e| schema(e.to_string()))?,
                Some(words) => {
                    let masses = cfg
                        .measure
                        .as_ref()
                        .and_then(|m| m.masses.clone())
                        .ok_or_else(|| schema("measure.masses required with measure.words"))?;
                    if masses.len() != words.len() {
                        return Err(schema("measure.words and measure.masses lengths differ"));
                    }
                    let atoms = words
                        .iter()
                        .zip(masses)
                        .map(|(w, m)| Ok((EndAddress::parse(w).map_err(|e| schema(e.to_string()))?, m)))
                        .collect::<CliResult<Vec<_>>>()?;
                    BoundaryMeasure::with_atoms(s.b, atoms).map_err(|e| schema(e.to_string()))?
                }
            };
            Ok(GraphMeasure::Ends(mu))
        }
        None => {
            // Point masses at the boundary vertices; default mass 1 each.
            let mut masses: BTreeMap<String, f64> = graph
                .boundary_vertices()
                .into_iter()
                .map(|v| (graph.vertex_name(v).to_string(), 1.0))
                .collect();
            if let Some(m) = &cfg.measure {
                if let (Some(words), Some(values)) = (&m.words, &m.masses) {
                    if words.len() != values.len() {
                        return Err(schema("measure.words and measure.masses lengths differ"));
                    }
                    for (w, &x) in words.iter().zip(values) {
                        graph.vertex_index(w).map_err(|e| schema(e.to_string()))?;
                        masses.insert(w.clone(), x);
                    }
                }
            }
            Ok(GraphMeasure::Vertices(masses))
        }
    }
}

/// Resolves the `[bc]` section against the graph. Harmonic-clamp clusters on
/// trees receive the canonical profile: the extension of data 1 on the
/// cluster cell and 2 elsewhere.
pub fn resolve_bc(cfg: &Config, resolved: &Resolved) -> CliResult<BoundaryCondition> {
    let bc = cfg.bc.as_ref().ok_or_else(|| schema("[bc] section required"))?;
    let graph = &resolved.graph;
    match bc.kind.as_str() {
        "neumann" => Ok(BoundaryCondition::Neumann),
        "dirichlet" => Ok(BoundaryCondition::Dirichlet { vertices: bc.vertices.clone() }),
        "robin" => {
            if let Some(per) = &bc.k_per_vertex {
                for name in per.keys() {
                    graph.vertex_index(name).map_err(|e| schema(e.to_string()))?;
                }
                Ok(BoundaryCondition::RobinClassical { coefficients: per.clone() })
            } else {
                let k = bc.k.ok_or_else(|| schema("bc.k required for robin"))?;
                Ok(BoundaryCondition::robin_uniform(graph, k))
            }
        }
        "constant_clamp" => {
            let clusters = resolve_clusters(bc, resolved)?;
            Ok(BoundaryCondition::ConstantClamp { clusters })
        }
        "harmonic_clamp" => {
            let clusters = resolve_clusters(bc, resolved)?;
            let profiles = clamp_profiles(bc, resolved, &clusters)?;
            Ok(BoundaryCondition::HarmonicClamp {
                clusters: clusters.into_iter().zip(profiles).collect(),
            })
        }
        other => Err(schema(format!("unknown bc.kind {other:?}"))),
    }
}

pub fn resolve_clusters(bc: &BcSection, resolved: &Resolved) -> CliResult<Vec<ClampCluster>> {
    let lists = bc
        .clusters
        .as_ref()
        .ok_or_else(|| schema("bc.clusters required for clamp conditions"))?;
    let mut out = Vec::with_capacity(lists.len());
    for (i, names) in lists.iter().enumerate() {
        let id = format!("cluster{i}");
        match &resolved.spec {
            Some(spec) => {
                let mut words = Vec::with_capacity(names.len());
                for w in names {
                    let addr = EndAddress::parse(w).map_err(|e| schema(e.to_string()))?;
                    addr.validate(spec.b, Some(spec.depth))
                        .map_err(|e| schema(e.to_string()))?;
                    words.push(addr);
                }
                out.push(
                    cluster_for_cell(&resolved.graph, &id, &words)
                        .map_err(|e| schema(e.to_string()))?,
                );
            }
            None => {
                for name in names {
                    let v = resolved
                        .graph
                        .vertex_index(name)
                        .map_err(|e| schema(e.to_string()))?;
                    if !resolved.graph.is_boundary(v) {
                        return Err(schema(format!("cluster vertex {name:?} is interior")));
                    }
                }
                out.push(ClampCluster { id, vertices: names.clone() });
            }
        }
    }
    Ok(out)
}

pub fn clamp_profiles(
    bc: &BcSection,
    resolved: &Resolved,
    clusters: &[ClampCluster],
) -> CliResult<Vec<ClampProfile>> {
    match &resolved.spec {
        Some(spec) => {
            let lists = bc.clusters.as_ref().expect("validated by resolve_clusters");
            let mut profiles = Vec::with_capacity(clusters.len());
            for (i, cluster) in clusters.iter().enumerate() {
                let mut cells: Vec<(String, Vec<EndAddress>)> = Vec::new();
                for (j, names) in lists.iter().enumerate() {
                    let words = names
                        .iter()
                        .map(|w| EndAddress::parse(w).map_err(|e| schema(e.to_string())))
                        .collect::<CliResult<Vec<_>>>()?;
                    cells.push((format!("cell{j}"), words));
                }
                let partition =
                    ClopenPartition::new(spec.b, cells).map_err(|e| schema(e.to_string()))?;
                let values: Vec<f64> =
                    (0..partition.len()).map(|j| if j == i { 1.0 } else { 2.0 }).collect();
                let data = StepFunction::new(partition, values)
                    .map_err(|e| schema(e.to_string()))?;
                let h = solve_dirichlet(&resolved.graph, &data)
                    .map_err(|e| CliError::Numerical(e.to_string()))?;
                profiles.push(
                    ClampProfile::from_harmonic(&h, &cluster.vertices)
                        .map_err(|e| CliError::Numerical(e.to_string()))?,
                );
            }
            Ok(profiles)
        }
        None => {
            let entries = bc.profile.as_ref().ok_or_else(|| {
                schema("bc.profile = [[vertex, value, inward_slope], ...] required for explicit graphs")
            })?;
            let mut profiles = Vec::with_capacity(clusters.len());
            for cluster in clusters {
                let data: Vec<(String, f64, f64)> = entries
                    .iter()
                    .filter(|(name, _, _)| cluster.vertices.contains(name))
                    .cloned()
                    .collect();
                if data.len() != cluster.vertices.len() {
                    return Err(schema(format!(
                        "bc.profile must cover every vertex of cluster {:?}",
                        cluster.id
                    )));
                }
                profiles.push(ClampProfile::at_vertices(&data));
            }
            Ok(profiles)
        }
    }
}
