//! The named invariant suite: every structural fact the library relies on,
//! run as an independent deterministic check with a one-line verdict.
//!
//! All randomness is drawn from per-check fixed seeds, so two runs produce
//! identical reports.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::boundary::{
    self, BoundaryMeasure, ClopenPartition, EndAddress, StepFunction,
};
use crate::graph::{build_explicit, build_tree, GraphPoint, MetricGraph, TreeSpec};
use crate::harmonic::{
    self, extend_continuous, harmonic_measure, harmonic_measure_groups, interior_bump,
    solve_dirichlet, sqrt_distance_to_leftmost_end, GraphMeasure, HarmonicFunction,
};
use crate::levelset::{
    descent_path, is_regular_value, level_crossings, level_flux, subgraph_above,
    threshold_for_neighborhood, DescentTerminal,
};
use crate::operator::{
    assemble, cluster_for_cell, compare_clamps, ibp_residual, BoundaryCondition, ClampCluster,
    ClampProfile,
};
use crate::piecewise::{EdgeShape, PiecewiseFunction};

/// Outcome of a single named check.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Report of the whole suite.
#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub results: Vec<CheckResult>,
    pub elapsed: Duration,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> Vec<&CheckResult> {
        self.results.iter().filter(|r| !r.passed).collect()
    }
}

type CheckFn = fn() -> Result<String, String>;

/// The checks in reporting order.
pub fn checks() -> Vec<(&'static str, CheckFn)> {
    vec![
        ("metric-axioms", check_metric_axioms),
        ("truncation-consistency", check_truncation_consistency),
        ("volume-formulas", check_volume_formulas),
        ("epsilon-core", check_epsilon_core),
        ("partition-refinement", check_partition_refinement),
        ("measure-additivity", check_measure_additivity),
        ("separating-vertices", check_separating_vertices),
        ("cutoff-flatness", check_cutoff_flatness),
        ("dirichlet-exactness", check_dirichlet_exactness),
        ("kirchhoff-balance", check_kirchhoff_balance),
        ("mean-value", check_mean_value),
        ("maximum-principle", check_maximum_principle),
        ("energy-minimality", check_energy_minimality),
        ("orthogonality", check_orthogonality),
        ("lipschitz-bound", check_lipschitz_bound),
        ("effective-resistance", check_effective_resistance),
        ("harmonic-measure", check_harmonic_measure),
        ("regular-values", check_regular_values),
        ("flux-conservation", check_flux_conservation),
        ("descent-paths", check_descent_paths),
        ("threshold-neighborhood", check_threshold_neighborhood),
        ("ibp-identity", check_ibp_identity),
        ("operator-symmetry", check_operator_symmetry),
        ("form-decomposition", check_form_decomposition),
        ("spectra-classical", check_spectra_classical),
        ("robin-secular", check_robin_secular),
        ("bc-ordering", check_bc_ordering),
        ("mesh-convergence", check_mesh_convergence),
        ("nonnegativity", check_nonnegativity),
        ("clamp-comparison", check_clamp_comparison),
        ("energy-blowup", check_energy_blowup),
        ("determinism", check_determinism),
    ]
}

/// Runs every check and collects the report.
pub fn run_all() -> VerifyReport {
    let start = Instant::now();
    let results = checks()
        .into_iter()
        .map(|(name, run)| match run() {
            Ok(detail) => CheckResult { name, passed: true, detail },
            Err(detail) => CheckResult { name, passed: false, detail },
        })
        .collect();
    VerifyReport { results, elapsed: start.elapsed() }
}

fn rng_for(tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0x67_68_61_72_6d ^ tag)
}

fn random_spec(rng: &mut ChaCha8Rng) -> TreeSpec {
    let b = if rng.gen_bool(0.5) { 2 } else { 3 };
    let r = rng.gen_range(0.3..0.6);
    let l0 = rng.gen_range(0.5..2.0);
    let depth = rng.gen_range(3..=5);
    TreeSpec::new(b, r, l0, depth).expect("parameters in range")
}

fn random_step(rng: &mut ChaCha8Rng, spec: &TreeSpec) -> StepFunction {
    let k = rng.gen_range(1..=2u32.min(spec.depth));
    let partition = ClopenPartition::standard(spec.b, k).expect("valid standard partition");
    let values = (0..partition.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    StepFunction::new(partition, values).expect("matching values")
}

fn fail(msg: String) -> Result<String, String> {
    Err(msg)
}

// ---------------------------------------------------------------------------
// graph checks

fn check_metric_axioms() -> Result<String, String> {
    let mut rng = rng_for(1);
    let mut graphs: Vec<Arc<MetricGraph>> = Vec::new();
    for _ in 0..4 {
        graphs.push(Arc::new(build_tree(random_spec(&mut rng)).map_err(|e| e.to_string())?));
    }
    graphs.push(Arc::new(
        build_explicit(&[("a", "b", 1.0), ("b", "c", 2.0), ("c", "a", 0.5)], &[])
            .map_err(|e| e.to_string())?,
    ));
    graphs.push(Arc::new(
        build_explicit(
            &[("c", "x", 1.0), ("c", "y", 0.5), ("c", "z", 2.0), ("x", "w", 0.25)],
            &["y", "z", "w"],
        )
        .map_err(|e| e.to_string())?,
    ));
    let mut count = 0;
    for g in &graphs {
        for _ in 0..20 {
            let pick = |rng: &mut ChaCha8Rng| {
                let e = rng.gen_range(0..g.edge_count());
                GraphPoint::new(e, rng.gen_range(0.0..=g.edge(e).length))
            };
            let p = pick(&mut rng);
            let q = pick(&mut rng);
            let r = pick(&mut rng);
            let dpq = g.geodesic_distance(p, q).map_err(|e| e.to_string())?;
            let dqp = g.geodesic_distance(q, p).map_err(|e| e.to_string())?;
            let dpp = g.geodesic_distance(p, p).map_err(|e| e.to_string())?;
            let dpr = g.geodesic_distance(p, r).map_err(|e| e.to_string())?;
            let dqr = g.geodesic_distance(q, r).map_err(|e| e.to_string())?;
            if dpp != 0.0 {
                return fail(format!("d(p,p) = {dpp}"));
            }
            if (dpq - dqp).abs() > 1e-12 {
                return fail(format!("asymmetry {dpq} vs {dqp}"));
            }
            if dpq < 0.0 {
                return fail(format!("negative distance {dpq}"));
            }
            if dpr > dpq + dqr + 1e-12 {
                return fail(format!("triangle violated: {dpr} > {dpq} + {dqr}"));
            }
            count += 1;
        }
    }
    Ok(format!("{count} sampled triples on {} graphs", graphs.len()))
}

fn check_truncation_consistency() -> Result<String, String> {
    let mut rng = rng_for(2);
    for _ in 0..4 {
        let spec = random_spec(&mut rng);
        let small = build_tree(spec).map_err(|e| e.to_string())?;
        let large = build_tree(TreeSpec { depth: spec.depth + 1, ..spec })
            .map_err(|e| e.to_string())?;
        for v in 0..small.vertex_count() {
            if small.vertex_name(v) != large.vertex_name(v) {
                return fail(format!("vertex {v} renamed under deeper truncation"));
            }
        }
        for e in 0..small.edge_count() {
            let (a, b) = (small.edge(e), large.edge(e));
            if a.tail != b.tail || a.head != b.head || a.length != b.length {
                return fail(format!("edge {e} differs under deeper truncation"));
            }
        }
    }
    Ok("4 random truncations extend consistently".into())
}

fn check_volume_formulas() -> Result<String, String> {
    let mut rng = rng_for(3);
    for _ in 0..4 {
        let spec = random_spec(&mut rng);
        let g = build_tree(spec).map_err(|e| e.to_string())?;
        let m = g.metrics();
        let brute: f64 = g.edges().iter().map(|e| e.length).sum();
        if (m.volume - brute).abs() > 1e-12 * brute.max(1.0) {
            return fail(format!("volume {} vs edge sum {brute}", m.volume));
        }
        let br = spec.b as f64 * spec.r;
        if br < 1.0 {
            let formula = spec.b as f64 * spec.l0 / (1.0 - br);
            // Truncated volume plus the exact tail remainder.
            let leaves = (spec.b as f64).powi(spec.depth as i32);
            let total = brute + leaves * spec.tail_volume(spec.depth).unwrap();
            if (m.infinite_volume.unwrap() - formula).abs() > 1e-12 * formula {
                return fail(format!("infinite volume {formula} not reported"));
            }
            if (total - formula).abs() > 1e-9 * formula {
                return fail(format!("brute {total} vs closed form {formula}"));
            }
        }
    }
    Ok("volumes match brute sums and closed forms".into())
}

fn check_epsilon_core() -> Result<String, String> {
    let g = build_tree(TreeSpec::new(2, 0.5, 1.0, 5).unwrap()).map_err(|e| e.to_string())?;
    let dist = g.distance_to_boundary();
    let mut prev_edges = usize::MAX;
    for eps in [0.2, 0.5, 1.0, 1.5, 2.0] {
        let core = g.epsilon_core(eps).map_err(|e| e.to_string())?;
        if core.edge_count() > prev_edges {
            return fail(format!("ε-core grew when ε increased to {eps}"));
        }
        prev_edges = core.edge_count();
        // Brute force: sample points along each edge, measure by Dijkstra
        // on the graph with the point spliced in as a vertex.
        for e in 0..g.edge_count() {
            let ed = g.edge(e);
            let mut brute: f64 = 0.0;
            let peak = (dist[ed.head] + ed.length - dist[ed.tail]) / 2.0;
            let mut offsets: Vec<f64> =
                (0..=8).map(|i| ed.length * i as f64 / 8.0).collect();
            if peak > 0.0 && peak < ed.length {
                offsets.push(peak);
            }
            for t in offsets {
                brute = brute.max(splice_distance_to_boundary(&g, e, t));
            }
            let kept = core.edge_count() > 0
                && (0..core.edge_count()).any(|ce| {
                    let c = core.edge(ce);
                    core.vertex_name(c.tail) == g.vertex_name(ed.tail)
                        && core.vertex_name(c.head) == g.vertex_name(ed.head)
                        && c.length == ed.length
                });
            if (brute >= eps + 1e-12) != kept && (brute - eps).abs() > 1e-12 {
                return fail(format!(
                    "edge {e}: brute max distance {brute}, eps {eps}, kept = {kept}"
                ));
            }
        }
    }
    Ok("inclusion monotone and edge selection matches brute-force scan".into())
}

/// Distance from the point at offset `t` on edge `e` to the boundary,
/// computed on a copy of the graph with the point added as a vertex.
fn splice_distance_to_boundary(g: &MetricGraph, e: usize, t: f64) -> f64 {
    let ed = g.edge(e);
    if t == 0.0 {
        return g.distance_to_boundary()[ed.tail];
    }
    if t == ed.length {
        return g.distance_to_boundary()[ed.head];
    }
    let mut edges: Vec<(String, String, f64)> = Vec::new();
    for (i, other) in g.edges().iter().enumerate() {
        if i == e {
            continue;
        }
        edges.push((
            g.vertex_name(other.tail).to_string(),
            g.vertex_name(other.head).to_string(),
            other.length,
        ));
    }
    edges.push((g.vertex_name(ed.tail).to_string(), "@probe".to_string(), t));
    edges.push(("@probe".to_string(), g.vertex_name(ed.head).to_string(), ed.length - t));
    let boundary: Vec<String> =
        g.boundary_vertices().iter().map(|&v| g.vertex_name(v).to_string()).collect();
    let edge_refs: Vec<(&str, &str, f64)> =
        edges.iter().map(|(a, b, l)| (a.as_str(), b.as_str(), *l)).collect();
    let boundary_refs: Vec<&str> = boundary.iter().map(String::as_str).collect();
    let aug = build_explicit(&edge_refs, &boundary_refs).expect("spliced graph is valid");
    let probe = aug.vertex_index("@probe").expect("probe vertex present");
    aug.distance_to_boundary()[probe]
}

// ---------------------------------------------------------------------------
// boundary checks

fn check_partition_refinement() -> Result<String, String> {
    for b in [2u32, 3] {
        let spec = TreeSpec::new(b, 0.5, 1.0, 6).unwrap();
        let mut p = ClopenPartition::whole(b);
        let mut prev_diam = f64::INFINITY;
        for _ in 0..5 {
            p.validate().map_err(|e| e.to_string())?;
            let diam = p
                .cells()
                .iter()
                .flat_map(|c| c.words.iter())
                .map(|w| spec.cylinder_diameter(w.len() as u32))
                .fold(0.0, f64::max);
            if diam > prev_diam {
                return fail(format!("max cell diameter grew: {diam} > {prev_diam}"));
            }
            prev_diam = diam;
            p = p.refine();
        }
        if prev_diam >= spec.cylinder_diameter(0) {
            return fail("diameters did not shrink across the refinement chain".into());
        }
    }
    Ok("refinement chains stay valid with shrinking cell diameters".into())
}

fn check_measure_additivity() -> Result<String, String> {
    let mut rng = rng_for(6);
    for b in [2u32, 3] {
        let uniform = BoundaryMeasure::uniform(b, 1.0).map_err(|e| e.to_string())?;
        let skew: Vec<(EndAddress, f64)> = (0..b as u8)
            .map(|d| (EndAddress::root().child(d), rng.gen_range(0.1..2.0)))
            .collect();
        let weighted = BoundaryMeasure::with_atoms(b, skew).map_err(|e| e.to_string())?;
        for mu in [&uniform, &weighted] {
            for _ in 0..30 {
                let len = rng.gen_range(0..5usize);
                let word = EndAddress::from_digits(
                    (0..len).map(|_| rng.gen_range(0..b as u8)).collect(),
                );
                let parent = mu.mass_of_word(&word);
                let children: f64 =
                    (0..b as u8).map(|d| mu.mass_of_word(&word.child(d))).sum();
                if (parent - children).abs() > 1e-13 * parent.abs().max(1.0) {
                    return fail(format!("mass({word}) = {parent} but children sum {children}"));
                }
            }
        }
    }
    Ok("uniform and weighted cylinder masses are exactly additive".into())
}

fn check_separating_vertices() -> Result<String, String> {
    let mut rng = rng_for(7);
    let mut tested = 0;
    for _ in 0..4 {
        let spec = random_spec(&mut rng);
        let g = build_tree(spec).map_err(|e| e.to_string())?;
        for _ in 0..5 {
            let len = spec.depth as usize;
            let a = EndAddress::from_digits(
                (0..len).map(|_| rng.gen_range(0..spec.b as u8)).collect(),
            );
            let b = EndAddress::from_digits(
                (0..len).map(|_| rng.gen_range(0..spec.b as u8)).collect(),
            );
            if a.common_prefix_len(&b) == a.len().min(b.len()) {
                continue;
            }
            let w = boundary::separating_vertices(&g, &a, &b).map_err(|e| e.to_string())?;
            let parts = g.component_count_without(&w);
            if parts < 2 {
                return fail(format!("removing {w:?} left {parts} component(s)"));
            }
            tested += 1;
        }
    }
    Ok(format!("{tested} separating sets disconnect their end pairs"))
}

fn check_cutoff_flatness() -> Result<String, String> {
    let mut rng = rng_for(8);
    let mut checked = 0;
    for _ in 0..4 {
        let spec = random_spec(&mut rng);
        let g = Arc::new(build_tree(spec).map_err(|e| e.to_string())?);
        let k = rng.gen_range(1..=2u32);
        let p = ClopenPartition::standard(spec.b, k).map_err(|e| e.to_string())?;
        let n = rng.gen_range(0..p.len());
        let words = &p.cell(n).words;
        let comp = boundary::complement_words(spec.b, words);
        let sep = boundary::end_set_separation(&spec, words, &comp);
        let cut =
            boundary::flat_cutoff(&g, words, sep / 4.0).map_err(|e| e.to_string())?;
        let f = &cut.function;
        if f.continuity_residual() > 1e-12 {
            return fail(format!("cutoff discontinuous: {}", f.continuity_residual()));
        }
        // One-sided finite differences at every vertex.
        for v in 0..g.vertex_count() {
            let fv = f.vertex_value(v);
            for &e in g.incident(v) {
                let ed = g.edge(e);
                let delta = 1e-5 * ed.length;
                let t = if ed.tail == v { delta } else { ed.length - delta };
                let sample = f.value_at(GraphPoint::new(e, t)).map_err(|e| e.to_string())?;
                let quotient = (sample - fv).abs() / delta;
                if quotient > 1e-8 {
                    return fail(format!(
                        "one-sided derivative {quotient} at {} along edge {e}",
                        g.vertex_name(v)
                    ));
                }
            }
        }
        checked += 1;
    }
    Ok(format!("{checked} cutoffs continuous with flat vertex derivatives"))
}

// ---------------------------------------------------------------------------
// harmonic checks

fn check_dirichlet_exactness() -> Result<String, String> {
    let mut rng = rng_for(9);
    for _ in 0..4 {
        let spec = random_spec(&mut rng);
        let data = random_step(&mut rng, &spec);
        let shallow = Arc::new(build_tree(spec).map_err(|e| e.to_string())?);
        let deep = Arc::new(
            build_tree(TreeSpec { depth: spec.depth + 2, ..spec }).map_err(|e| e.to_string())?,
        );
        let hs = solve_dirichlet(&shallow, &data).map_err(|e| e.to_string())?;
        let hd = solve_dirichlet(&deep, &data).map_err(|e| e.to_string())?;
        for v in 0..shallow.vertex_count() {
            let w = deep.vertex_index(shallow.vertex_name(v)).map_err(|e| e.to_string())?;
            if (hs.vertex_value(v) - hd.vertex_value(w)).abs() > 1e-12 {
                return fail(format!(
                    "core value drifted at {}: {} vs {}",
                    shallow.vertex_name(v),
                    hs.vertex_value(v),
                    hd.vertex_value(w)
                ));
            }
        }
    }
    Ok("core values identical at depth d and d+2 (1e-12)".into())
}

fn check_kirchhoff_balance() -> Result<String, String> {
    let mut rng = rng_for(10);
    let mut worst = 0.0f64;
    for _ in 0..25 {
        let spec = random_spec(&mut rng);
        let g = Arc::new(build_tree(spec).map_err(|e| e.to_string())?);
        let data = random_step(&mut rng, &spec);
        let h = solve_dirichlet(&g, &data).map_err(|e| e.to_string())?;
        worst = worst.max(h.max_kirchhoff_residual());
    }
    if worst > 1e-10 {
        return fail(format!("Kirchhoff residual {worst} exceeds 1e-10"));
    }
    Ok(format!("25 random solves, worst interior residual {worst:.2e}"))
}

fn check_mean_value() -> Result<String, String> {
    let mut rng = rng_for(11);
    let mut worst = 0.0f64;
    for _ in 0..25 {
        let spec = random_spec(&mut rng);
        let g = Arc::new(build_tree(spec).map_err(|e| e.to_string())?);
        let data = random_step(&mut rng, &spec);
        let h = solve_dirichlet(&g, &data).map_err(|e| e.to_string())?;
        for v in 0..g.vertex_count() {
            if g.is_boundary(v) {
                continue;
            }
            let min_len = g
                .incident(v)
                .iter()
                .map(|&e| g.edge(e).length)
                .fold(f64::INFINITY, f64::min);
            let res = h
                .mean_value_residual(v, 0.5 * min_len)
                .map_err(|e| e.to_string())?;
            worst = worst.max(res.abs());
        }
    }
    if worst > 1e-12 {
        return fail(format!("mean-value residual {worst} exceeds 1e-12"));
    }
    Ok(format!("25 random solves, worst equidistant-mean residual {worst:.2e}"))
}

fn check_maximum_principle() -> Result<String, String> {
    let mut rng = rng_for(12);
    for _ in 0..25 {
        let spec = random_spec(&mut rng);
        let g = Arc::new(build_tree(spec).map_err(|e| e.to_string())?);
        let data = random_step(&mut rng, &spec);
        let h = solve_dirichlet(&g, &data).map_err(|e| e.to_string())?;
        let (lo, hi) = (data.min_value(), data.max_value());
        for v in 0..g.vertex_count() {
            let x = h.vertex_value(v);
            if x < lo - 1e-12 || x > hi + 1e-12 {
                return fail(format!("value {x} escapes data range [{lo}, {hi}]"));
            }
            if !data.is_constant() && (x == lo || x == hi) {
                return fail(format!(
                    "interior extremum at {} for nonconstant data",
                    g.vertex_name(v)
                ));
            }
        }
    }
    Ok("25 random solves stay strictly inside their data range".into())
}

fn check_energy_minimality() -> Result<String, String> {
    let mut rng = rng_for(13);
    let mut compared = 0;
    for _ in 0..3 {
        let spec = random_spec(&mut rng);
        let g = Arc::new(build_tree(spec).map_err(|e| e.to_string())?);
        let k = rng.gen_range(1..=2u32);
        let p = ClopenPartition::standard(spec.b, k).map_err(|e| e.to_string())?;
        let values: Vec<f64> = (0..p.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let data = StepFunction::new(p.clone(), values.clone()).map_err(|e| e.to_string())?;
        let h = solve_dirichlet(&g, &data).map_err(|e| e.to_string())?;
        let harmonic_energy = h.dirichlet_energy();
        // Cutoff interpolants with the same boundary trace.
        let sep = (0..p.len())
            .map(|n| {
                let comp = boundary::complement_words(spec.b, &p.cell(n).words);
                boundary::end_set_separation(&spec, &p.cell(n).words, &comp)
            })
            .fold(f64::INFINITY, f64::min);
        for frac in [0.9, 0.7, 0.5, 0.3, 0.1] {
            let eps = sep / 3.0 * frac;
            let cutoffs: Vec<_> = (0..p.len())
                .map(|n| boundary::flat_cutoff(&g, &p.cell(n).words, eps))
                .collect::<crate::Result<_>>()
                .map_err(|e| e.to_string())?;
            let terms: Vec<(f64, &PiecewiseFunction)> = values
                .iter()
                .zip(cutoffs.iter())
                .map(|(&c, cut)| (c, &cut.function))
                .collect();
            let competitor =
                PiecewiseFunction::combine_ramps(&terms).map_err(|e| e.to_string())?;
            // The competitor is constant on each cell subtree, so its trace
            // matches the step data; add the (zero) tail energies and
            // compare Dirichlet energies.
            let competitor_energy = competitor.dirichlet_energy(1e-12);
            if data.is_constant() {
                continue;
            }
            if harmonic_energy > competitor_energy - 1e-8 {
                return fail(format!(
                    "harmonic energy {harmonic_energy} not below competitor {competitor_energy}"
                ));
            }
            compared += 1;
        }
    }
    Ok(format!("{compared} cutoff competitors strictly above the minimizer"))
}

fn check_orthogonality() -> Result<String, String> {
    let mut rng = rng_for(14);
    let mut worst = 0.0f64;
    let mut count = 0;
    while count < 20 {
        let spec = random_spec(&mut rng);
        let g = Arc::new(build_tree(spec).map_err(|e| e.to_string())?);
        let data = random_step(&mut rng, &spec);
        let h = solve_dirichlet(&g, &data).map_err(|e| e.to_string())?;
        // A bump at a random deep interior vertex.
        let candidates: Vec<usize> = (0..g.vertex_count())
            .filter(|&v| {
                !g.is_boundary(v)
                    && g.incident(v)
                        .iter()
                        .all(|&e| !g.is_boundary(g.other_end(e, v)))
            })
            .collect();
        if candidates.is_empty() {
            continue;
        }
        let v = candidates[rng.gen_range(0..candidates.len())];
        let f = interior_bump(&g, v, rng.gen_range(0.5..2.0)).map_err(|e| e.to_string())?;
        let res = harmonic::orthogonality_residual(&f, &h, 1e-12).map_err(|e| e.to_string())?;
        worst = worst.max(res);
        count += 1;
    }
    if worst > 1e-9 {
        return fail(format!("orthogonality residual {worst} exceeds 1e-9"));
    }
    Ok(format!("20 bump pairings, worst residual {worst:.2e}"))
}

fn check_lipschitz_bound() -> Result<String, String> {
    let mut rng = rng_for(15);
    let spec = TreeSpec::new(2, 0.5, 1.0, 6).unwrap();
    let g = Arc::new(build_tree(spec).map_err(|e| e.to_string())?);
    let data = random_step(&mut rng, &spec);
    let h = solve_dirichlet(&g, &data).map_err(|e| e.to_string())?;
    let mu = GraphMeasure::Ends(BoundaryMeasure::uniform(2, 1.0).map_err(|e| e.to_string())?);
    let mut pairs = Vec::with_capacity(1000);
    for _ in 0..1000 {
        let e1 = rng.gen_range(0..g.edge_count());
        let e2 = rng.gen_range(0..g.edge_count());
        pairs.push((
            GraphPoint::new(e1, rng.gen_range(0.0..=g.edge(e1).length)),
            GraphPoint::new(e2, rng.gen_range(0.0..=g.edge(e2).length)),
        ));
    }
    let report = harmonic::lipschitz_check(&h, &mu, &pairs).map_err(|e| e.to_string())?;
    if report.max_ratio > report.bound + 1e-12 {
        return fail(format!(
            "ratio {} exceeds the energy bound {}",
            report.max_ratio, report.bound
        ));
    }
    Ok(format!(
        "1000 pairs, max ratio {:.4} below bound {:.4}",
        report.max_ratio, report.bound
    ))
}

/// Two-terminal resistance by series-parallel reduction, independent of the
/// harmonic solver.
fn two_terminal_resistance(
    mut edges: Vec<(usize, usize, f64)>,
    n_nodes: usize,
    s: usize,
    t: usize,
) -> f64 {
    loop {
        // Parallel merge.
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(a, b, r) in &edges {
            let key = (a.min(b), a.max(b));
            let g = merged.entry(key).or_insert(0.0);
            *g += 1.0 / r;
        }
        edges = merged.into_iter().map(|((a, b), g)| (a, b, 1.0 / g)).collect();
        if edges.len() == 1 {
            let (a, b, r) = edges[0];
            assert!((a.min(b), a.max(b)) == (s.min(t), s.max(t)));
            return r;
        }
        // Degrees.
        let mut degree = vec![0usize; n_nodes];
        for &(a, b, _) in &edges {
            degree[a] += 1;
            degree[b] += 1;
        }
        // Remove a dangling node or contract a series node.
        let mut changed = false;
        for v in 0..n_nodes {
            if v == s || v == t {
                continue;
            }
            if degree[v] == 1 {
                edges.retain(|&(a, b, _)| a != v && b != v);
                changed = true;
                break;
            }
            if degree[v] == 2 {
                let mut touching: Vec<(usize, usize, f64)> = Vec::new();
                edges.retain(|&(a, b, r)| {
                    if a == v || b == v {
                        touching.push((a, b, r));
                        false
                    } else {
                        true
                    }
                });
                let (a1, b1, r1) = touching[0];
                let (a2, b2, r2) = touching[1];
                let u = if a1 == v { b1 } else { a1 };
                let w = if a2 == v { b2 } else { a2 };
                edges.push((u, w, r1 + r2));
                changed = true;
                break;
            }
        }
        assert!(changed, "network is not series-parallel reducible");
    }
}

fn check_effective_resistance() -> Result<String, String> {
    let mut details = Vec::new();
    for (b, r) in [(2u32, 0.5f64), (3, 0.3)] {
        let spec = TreeSpec::new(b, r, 1.0, 4).unwrap();
        let g = Arc::new(build_tree(spec).map_err(|e| e.to_string())?);
        let p = ClopenPartition::standard(b, 1).map_err(|e| e.to_string())?;
        let data = StepFunction::indicator(p, 0).map_err(|e| e.to_string())?;
        let h = solve_dirichlet(&g, &data).map_err(|e| e.to_string())?;
        // Network: core edges plus one tail resistor per leaf, ends of the
        // cell cylinder -> plate s, the rest -> plate t.
        let n = g.vertex_count();
        let (s, t) = (n, n + 1);
        let mut edges: Vec<(usize, usize, f64)> = g
            .edges()
            .iter()
            .map(|e| (e.tail, e.head, e.length))
            .collect();
        for &leaf in &g.tree_leaves().map_err(|e| e.to_string())? {
            let plate = if g.vertex_name(leaf).starts_with('0') { s } else { t };
            edges.push((leaf, plate, spec.tail_resistance(spec.depth)));
        }
        let resistance = two_terminal_resistance(edges, n + 2, s, t);
        let energy = h.dirichlet_energy();
        if (energy - 1.0 / resistance).abs() > 1e-12 * energy.max(1.0) {
            return fail(format!(
                "b={b}: energy {energy} vs 1/R = {}",
                1.0 / resistance
            ));
        }
        details.push(format!("b={b}: E = 1/R = {energy:.6}"));
    }
    Ok(details.join("; "))
}

fn check_harmonic_measure() -> Result<String, String> {
    let mut rng = rng_for(17);
    // Row-stochastic on random trees, stable across truncation depth.
    for _ in 0..3 {
        let spec = random_spec(&mut rng);
        let g = Arc::new(build_tree(spec).map_err(|e| e.to_string())?);
        let p = ClopenPartition::standard(spec.b, 1).map_err(|e| e.to_string())?;
        let at = g.vertex_point(g.origin().expect("tree has a root"));
        let m = harmonic_measure(&g, &p, at).map_err(|e| e.to_string())?;
        let sum: f64 = m.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return fail(format!("measure sums to {sum}"));
        }
        if m.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return fail(format!("measure entries escape [0,1]: {m:?}"));
        }
        let deeper = Arc::new(
            build_tree(TreeSpec { depth: spec.depth + 1, ..spec }).map_err(|e| e.to_string())?,
        );
        let at2 = deeper.vertex_point(deeper.origin().expect("root"));
        let m2 = harmonic_measure(&deeper, &p, at2).map_err(|e| e.to_string())?;
        for (a, b) in m.iter().zip(&m2) {
            if (a - b).abs() > 1e-12 {
                return fail(format!("measure drifted across depths: {a} vs {b}"));
            }
        }
    }
    // Conductance weighting on the asymmetric 2-star.
    let star = Arc::new(
        build_explicit(&[("c", "a", 1.0), ("c", "b", 2.0)], &["a", "b"])
            .map_err(|e| e.to_string())?,
    );
    let at = star.vertex_point(star.vertex_index("c").map_err(|e| e.to_string())?);
    let m = harmonic_measure_groups(&star, &[vec!["a".into()], vec!["b".into()]], at)
        .map_err(|e| e.to_string())?;
    if (m[0] - 2.0 / 3.0).abs() > 1e-13 || (m[1] - 1.0 / 3.0).abs() > 1e-13 {
        return fail(format!("asymmetric star measure {m:?} != (2/3, 1/3)"));
    }
    Ok("stochastic, depth-stable, and conductance-weighted".into())
}

// ---------------------------------------------------------------------------
// level-set checks

fn indicator_extension(depth: u32) -> (Arc<MetricGraph>, HarmonicFunction) {
    let g = Arc::new(build_tree(TreeSpec::new(2, 0.5, 1.0, depth).unwrap()).unwrap());
    let data = StepFunction::indicator(ClopenPartition::standard(2, 1).unwrap(), 0).unwrap();
    let h = solve_dirichlet(&g, &data).unwrap();
    (g, h)
}

fn check_regular_values() -> Result<String, String> {
    let mut rng = rng_for(18);
    let (g, h) = indicator_extension(4);
    let vertex_values: Vec<f64> = (0..g.vertex_count()).map(|v| h.vertex_value(v)).collect();
    let mut hits = 0;
    for _ in 0..200 {
        let t = rng.gen_range(-0.2..1.2);
        let near_critical = vertex_values.iter().any(|&v| (v - t).abs() <= 2e-11);
        if near_critical {
            continue;
        }
        if !is_regular_value(&h, t) {
            return fail(format!("t = {t} misclassified as critical"));
        }
        hits += 1;
    }
    for &v in vertex_values.iter().take(10) {
        if is_regular_value(&h, v) {
            return fail(format!("vertex value {v} misclassified as regular"));
        }
    }
    Ok(format!("{hits} random levels regular, vertex values critical"))
}

fn check_flux_conservation() -> Result<String, String> {
    let (g, h) = indicator_extension(5);
    let root = g.vertex_index("").map_err(|e| e.to_string())?;
    let v0 = g.vertex_index("0").map_err(|e| e.to_string())?;
    let (a, b) = (h.vertex_value(root), h.vertex_value(v0));
    let mut fluxes = Vec::new();
    for i in 1..=5 {
        let t = a + (b - a) * i as f64 / 6.0;
        let report = level_flux(&h, t).map_err(|e| e.to_string())?;
        let crossings = level_crossings(&h, t).map_err(|e| e.to_string())?;
        if crossings.iter().any(|c| c.outward_flux <= 0.0) {
            return fail(format!("nonpositive crossing flux at t = {t}"));
        }
        fluxes.push(report.total);
    }
    for i in 0..fluxes.len() {
        for j in (i + 1)..fluxes.len() {
            if (fluxes[i] - fluxes[j]).abs() > 1e-10 {
                return fail(format!(
                    "fluxes differ: {} vs {} (levels {i}, {j})",
                    fluxes[i], fluxes[j]
                ));
            }
        }
    }
    // The subgraph above a mid level is connected for indicator data.
    let sub = subgraph_above(&h, 0.5 * (a + b)).map_err(|e| e.to_string())?;
    if sub.graph.component_count() != 1 {
        return fail("super-level subgraph disconnected".into());
    }
    Ok(format!("5 levels agree at {:.6}", fluxes[0]))
}

fn check_descent_paths() -> Result<String, String> {
    let mut rng = rng_for(19);
    let (g, h) = indicator_extension(5);
    let mut ends = 0;
    let mut tried = 0;
    while tried < 20 {
        let e = rng.gen_range(0..g.edge_count());
        let p = GraphPoint::new(e, rng.gen_range(0.0..=g.edge(e).length));
        if h.slope(e) == 0.0 {
            continue;
        }
        tried += 1;
        let path = descent_path(&h, p).map_err(|e| e.to_string())?;
        for w in path.points.windows(2) {
            if w[1].1 >= w[0].1 {
                return fail(format!("descent value rose: {} -> {}", w[0].1, w[1].1));
            }
        }
        match &path.terminal {
            DescentTerminal::End { .. } => ends += 1,
            DescentTerminal::BoundaryVertex(_) => {}
        }
    }
    // Descent from the root must run into the zero-data cylinder.
    let root_path =
        descent_path(&h, g.vertex_point(g.vertex_index("").unwrap())).map_err(|e| e.to_string())?;
    match &root_path.terminal {
        DescentTerminal::End { leaf } if leaf.starts_with('1') => {}
        other => return fail(format!("root descent ended at {other:?}")),
    }
    Ok(format!("20 paths strictly decreasing, {ends} reaching ends"))
}

fn check_threshold_neighborhood() -> Result<String, String> {
    let g = Arc::new(build_tree(TreeSpec::new(2, 0.5, 1.0, 6).unwrap()).unwrap());
    let p = ClopenPartition::standard(2, 1).map_err(|e| e.to_string())?;
    let data = StepFunction::new(p, vec![0.0, 1.0]).map_err(|e| e.to_string())?;
    let h = solve_dirichlet(&g, &data).map_err(|e| e.to_string())?;
    let cell = vec![EndAddress::parse("0").map_err(|e| e.to_string())?];
    let mut prev = f64::INFINITY;
    let mut ts = Vec::new();
    for eps in [4.0, 2.0, 1.0, 0.5, 0.25] {
        let t = threshold_for_neighborhood(&h, &cell, eps).map_err(|e| e.to_string())?;
        if t > prev {
            return fail(format!("threshold grew as eps shrank: {t} > {prev}"));
        }
        if !is_regular_value(&h, t) {
            return fail(format!("returned level {t} is not regular"));
        }
        prev = t;
        ts.push(t);
    }
    Ok(format!("thresholds monotone over eps grid: {ts:?}"))
}

// ---------------------------------------------------------------------------
// operator checks

fn interval_graph() -> Arc<MetricGraph> {
    Arc::new(build_explicit(&[("a", "b", 1.0)], &["a", "b"]).unwrap())
}

fn check_ibp_identity() -> Result<String, String> {
    use std::f64::consts::PI;
    let g = interval_graph();
    let f = PiecewiseFunction::new(
        Arc::clone(&g),
        vec![EdgeShape::Sine { amplitude: 1.0, omega: PI, phase: 0.0, offset: 0.0 }],
    )
    .map_err(|e| e.to_string())?;
    let h = PiecewiseFunction::new(
        Arc::clone(&g),
        vec![EdgeShape::Linear { v0: 0.0, v1: 1.0 }],
    )
    .map_err(|e| e.to_string())?;
    let r1 = ibp_residual(&f, &h, 1e-12).map_err(|e| e.to_string())?;
    if r1.residual > 1e-8 {
        return fail(format!("sine/linear residual {}", r1.residual));
    }
    // Kirchhoff-balanced cubics on the 3-star.
    let star = Arc::new(
        build_explicit(&[("c", "x", 1.0), ("c", "y", 1.0), ("c", "z", 1.0)], &["x", "y", "z"])
            .unwrap(),
    );
    let mut f2 = PiecewiseFunction::zero(Arc::clone(&star));
    let slopes = [1.0, -0.75, -0.25];
    for (i, &e) in star
        .incident(star.vertex_index("c").map_err(|e| e.to_string())?)
        .iter()
        .enumerate()
    {
        let ed = star.edge(e);
        f2.set_shape(e, EdgeShape::hermite(ed.length, 0.8, slopes[i], 0.2 * i as f64, -0.3));
    }
    let h2 = PiecewiseFunction::new(
        Arc::clone(&star),
        vec![
            EdgeShape::Poly(vec![0.5, 0.1, -0.2, 0.07]),
            EdgeShape::Poly(vec![0.5, -0.3, 0.1, 0.0]),
            EdgeShape::Poly(vec![0.5, 0.2, 0.05, -0.01]),
        ],
    )
    .map_err(|e| e.to_string())?;
    let r2 = ibp_residual(&f2, &h2, 1e-12).map_err(|e| e.to_string())?;
    if !r2.kirchhoff_ok {
        return fail(format!("star cubics unbalanced: {}", r2.kirchhoff_residual));
    }
    if r2.residual > 1e-8 {
        return fail(format!("star residual {}", r2.residual));
    }
    Ok(format!("residuals {:.2e} and {:.2e}", r1.residual, r2.residual))
}

type ClampSetup = (Arc<MetricGraph>, Vec<ClampCluster>, Vec<ClampProfile>);

fn tree_clamp_setup(r: f64) -> Result<ClampSetup, String> {
    let g = Arc::new(build_tree(TreeSpec::new(2, r, 1.0, 2).unwrap()).unwrap());
    let p = ClopenPartition::standard(2, 1).map_err(|e| e.to_string())?;
    let mut clusters = Vec::new();
    let mut profiles = Vec::new();
    for n in 0..p.len() {
        let cluster =
            cluster_for_cell(&g, &p.cell(n).id, &p.cell(n).words).map_err(|e| e.to_string())?;
        let mut values = vec![2.0; p.len()];
        values[n] = 1.0;
        let data = StepFunction::new(p.clone(), values).map_err(|e| e.to_string())?;
        let h = solve_dirichlet(&g, &data).map_err(|e| e.to_string())?;
        profiles.push(ClampProfile::from_harmonic(&h, &cluster.vertices).map_err(|e| e.to_string())?);
        clusters.push(cluster);
    }
    Ok((g, clusters, profiles))
}

fn check_operator_symmetry() -> Result<String, String> {
    let g = interval_graph();
    let (tree, clusters, profiles) = tree_clamp_setup(0.4)?;
    let bcs: Vec<(String, Arc<MetricGraph>, BoundaryCondition)> = vec![
        ("neumann".into(), Arc::clone(&g), BoundaryCondition::Neumann),
        ("dirichlet".into(), Arc::clone(&g), BoundaryCondition::Dirichlet { vertices: None }),
        ("robin".into(), Arc::clone(&g), BoundaryCondition::robin_uniform(&g, 1.0)),
        (
            "constant-clamp".into(),
            Arc::clone(&tree),
            BoundaryCondition::ConstantClamp { clusters: clusters.clone() },
        ),
        (
            "harmonic-clamp".into(),
            Arc::clone(&tree),
            BoundaryCondition::HarmonicClamp {
                clusters: clusters.into_iter().zip(profiles).collect(),
            },
        ),
    ];
    for (name, graph, bc) in &bcs {
        let op = assemble(graph, bc, 8).map_err(|e| e.to_string())?;
        if op.symmetry_residual() != 0.0 {
            return fail(format!("{name} assembly asymmetric"));
        }
    }
    // Negative control: a corrupted stiffness must be detected.
    let op = assemble(&g, &BoundaryCondition::Neumann, 8).map_err(|e| e.to_string())?;
    let bad = op.corrupted_for_negative_control();
    if bad.symmetry_residual() <= 0.0 {
        return fail("corrupted fixture not detected".into());
    }
    Ok("5 assemblies exactly symmetric; corrupted fixture detected".into())
}

fn check_form_decomposition() -> Result<String, String> {
    let mut rng = rng_for(22);
    let (g, clusters, profiles) = tree_clamp_setup(0.4)?;
    let interval = interval_graph();
    let assemblies: Vec<(Arc<MetricGraph>, BoundaryCondition)> = vec![
        (Arc::clone(&interval), BoundaryCondition::Neumann),
        (Arc::clone(&interval), BoundaryCondition::Dirichlet { vertices: None }),
        (Arc::clone(&interval), BoundaryCondition::robin_uniform(&interval, 2.0)),
        (Arc::clone(&g), BoundaryCondition::ConstantClamp { clusters: clusters.clone() }),
        (
            Arc::clone(&g),
            BoundaryCondition::HarmonicClamp {
                clusters: clusters.into_iter().zip(profiles).collect(),
            },
        ),
    ];
    let mut worst = 0.0f64;
    for (graph, bc) in &assemblies {
        let op = assemble(graph, bc, 6).map_err(|e| e.to_string())?;
        for _ in 0..100 {
            let x: Vec<f64> = (0..op.dof_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let report = op.quadratic_form(&x).map_err(|e| e.to_string())?;
            worst = worst.max((report.total - report.core_energy - report.boundary_part).abs());
        }
        // Boundary part strictly positive whenever a clamp constant is
        // nonzero with a positive boundary term.
        for info in op.clamp_info() {
            if info.boundary_term == 0.0 {
                continue;
            }
            let mut x = vec![0.0; op.dof_count()];
            x[info.dof] = 1.0;
            let report = op.quadratic_form(&x).map_err(|e| e.to_string())?;
            if report.boundary_part <= 0.0 {
                return fail(format!("cluster {} has no boundary term", info.cluster_id));
            }
        }
        let spec = op.eigenvalues(op.dof_count()).map_err(|e| e.to_string())?;
        if spec.eigenvalues.iter().any(|&l| l < -1e-10) {
            return fail(format!("{}: negative eigenvalue", bc.kind()));
        }
    }
    if worst > 1e-10 {
        return fail(format!("form decomposition residual {worst} exceeds 1e-10"));
    }
    Ok(format!(
        "{} assemblies x 100 random vectors, worst residual {worst:.2e}",
        assemblies.len()
    ))
}

fn check_spectra_classical() -> Result<String, String> {
    use std::f64::consts::PI;
    let start = Instant::now();
    let g = interval_graph();
    let dir = assemble(&g, &BoundaryCondition::Dirichlet { vertices: None }, 200)
        .map_err(|e| e.to_string())?
        .eigenvalues(3)
        .map_err(|e| e.to_string())?;
    let neu = assemble(&g, &BoundaryCondition::Neumann, 200)
        .map_err(|e| e.to_string())?
        .eigenvalues(4)
        .map_err(|e| e.to_string())?;
    for n in 1..=3usize {
        let exact = (n as f64 * PI).powi(2);
        let ed = (dir.eigenvalues[n - 1] - exact).abs() / exact;
        let en = (neu.eigenvalues[n] - exact).abs() / exact;
        if ed > 1e-3 {
            return fail(format!("Dirichlet mode {n} off by {ed:.2e}"));
        }
        if en > 1e-3 {
            return fail(format!("Neumann mode {n} off by {en:.2e}"));
        }
    }
    if neu.eigenvalues[0].abs() > 1e-10 {
        return fail(format!("Neumann ground state {} not zero", neu.eigenvalues[0]));
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(1) {
        return fail(format!("classical spectra took {elapsed:?} (budget 1 s)"));
    }
    Ok("modes 1..3 within 1e-3, inside the 1 s budget".into())
}

/// Root of the two-sided Robin secular equation
/// `(μ² - k²) sin μ = 2kμ cos μ` in `(0, π)`, by bisection to 1e-12.
pub fn robin_secular_root(k: f64) -> f64 {
    let f = |mu: f64| (mu * mu - k * k) * mu.sin() - 2.0 * k * mu * mu.cos();
    let mut lo = 1e-6;
    let mut hi = std::f64::consts::PI - 1e-9;
    assert!(f(lo) < 0.0 && f(hi) > 0.0, "secular root not bracketed");
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn check_robin_secular() -> Result<String, String> {
    let g = interval_graph();
    let op = assemble(&g, &BoundaryCondition::robin_uniform(&g, 1.0), 400)
        .map_err(|e| e.to_string())?;
    let lam = op.eigenvalues(1).map_err(|e| e.to_string())?.eigenvalues[0];
    let mu = robin_secular_root(1.0);
    let rel = (lam - mu * mu).abs() / (mu * mu);
    if rel > 1e-3 {
        return fail(format!("λ₁ = {lam} vs secular {} (rel {rel:.2e})", mu * mu));
    }
    let mut prev = -1.0;
    for k in [0.0, 1.0, 10.0] {
        let op = assemble(&g, &BoundaryCondition::robin_uniform(&g, k), 100)
            .map_err(|e| e.to_string())?;
        let l1 = op.eigenvalues(1).map_err(|e| e.to_string())?.eigenvalues[0];
        if l1 <= prev {
            return fail(format!("λ₁ not increasing at k = {k}"));
        }
        prev = l1;
    }
    Ok(format!("λ₁ matches the secular root to {rel:.2e}; increasing in k"))
}

fn check_bc_ordering() -> Result<String, String> {
    let g = interval_graph();
    let m = 100;
    let ld = assemble(&g, &BoundaryCondition::Dirichlet { vertices: None }, m)
        .map_err(|e| e.to_string())?
        .eigenvalues(5)
        .map_err(|e| e.to_string())?
        .eigenvalues;
    let lr = assemble(&g, &BoundaryCondition::robin_uniform(&g, 3.0), m)
        .map_err(|e| e.to_string())?
        .eigenvalues(5)
        .map_err(|e| e.to_string())?
        .eigenvalues;
    let ln = assemble(&g, &BoundaryCondition::Neumann, m)
        .map_err(|e| e.to_string())?
        .eigenvalues(5)
        .map_err(|e| e.to_string())?
        .eigenvalues;
    for n in 0..5 {
        if !(ld[n] >= lr[n] - 1e-9 && lr[n] >= ln[n] - 1e-9) {
            return fail(format!(
                "mode {n}: Dirichlet {} / Robin {} / Neumann {}",
                ld[n], lr[n], ln[n]
            ));
        }
    }
    Ok("λ_n(Dirichlet) ≥ λ_n(Robin) ≥ λ_n(Neumann) for n ≤ 5".into())
}

fn check_mesh_convergence() -> Result<String, String> {
    use std::f64::consts::PI;
    let g = interval_graph();
    let mut errors = Vec::new();
    for m in [25, 50, 100, 200] {
        let op = assemble(&g, &BoundaryCondition::Dirichlet { vertices: None }, m)
            .map_err(|e| e.to_string())?;
        errors.push(op.eigenvalues(1).map_err(|e| e.to_string())?.eigenvalues[0] - PI * PI);
    }
    let mut ratios = Vec::new();
    for w in errors.windows(2) {
        let ratio = w[0] / w[1];
        if !(3.5..=4.5).contains(&ratio) {
            return fail(format!("convergence ratio {ratio} outside [3.5, 4.5]"));
        }
        ratios.push(ratio);
    }
    Ok(format!("error ratios {ratios:?}"))
}

fn check_nonnegativity() -> Result<String, String> {
    let g = interval_graph();
    let (tree, clusters, profiles) = tree_clamp_setup(0.45)?;
    let mut assemblies: Vec<(Arc<MetricGraph>, BoundaryCondition)> = vec![
        (Arc::clone(&g), BoundaryCondition::Neumann),
        (Arc::clone(&g), BoundaryCondition::Dirichlet { vertices: None }),
    ];
    for k in [0.0, 1.0, 10.0] {
        assemblies.push((Arc::clone(&g), BoundaryCondition::robin_uniform(&g, k)));
    }
    assemblies.push((
        Arc::clone(&tree),
        BoundaryCondition::ConstantClamp { clusters: clusters.clone() },
    ));
    assemblies.push((
        Arc::clone(&tree),
        BoundaryCondition::HarmonicClamp {
            clusters: clusters.into_iter().zip(profiles).collect(),
        },
    ));
    let mut min_seen = f64::INFINITY;
    for (graph, bc) in &assemblies {
        let op = assemble(graph, bc, 12).map_err(|e| e.to_string())?;
        let spec = op.eigenvalues(op.dof_count().min(6)).map_err(|e| e.to_string())?;
        for &l in &spec.eigenvalues {
            min_seen = min_seen.min(l);
            if l < -1e-10 {
                return fail(format!("{} produced eigenvalue {l}", bc.kind()));
            }
        }
    }
    Ok(format!("{} assemblies, smallest eigenvalue {min_seen:.2e}", assemblies.len()))
}

fn check_clamp_comparison() -> Result<String, String> {
    let (g, clusters, profiles) = tree_clamp_setup(0.4)?;
    let cmp = compare_clamps(&g, &clusters, &profiles, 8).map_err(|e| e.to_string())?;
    if cmp.lambda_gap <= 1e-6 {
        return fail(format!("spectral gap {} below 1e-6", cmp.lambda_gap));
    }
    if cmp.form_gap <= 0.0 {
        return fail(format!("form gap {} not positive", cmp.form_gap));
    }
    // Degenerate profiles: constants must reproduce the constant clamp.
    let spec = g.tree_spec().expect("tree");
    let vol = spec.tail_volume(spec.depth).expect("finite volume");
    let const_profiles: Vec<ClampProfile> = clusters
        .iter()
        .map(|c| ClampProfile::constant(1.5, &c.vertices, vol * c.vertices.len() as f64))
        .collect();
    let degenerate =
        compare_clamps(&g, &clusters, &const_profiles, 8).map_err(|e| e.to_string())?;
    if degenerate.lambda_gap.abs() > 1e-10 {
        return fail(format!(
            "constant profiles should coincide, gap {}",
            degenerate.lambda_gap
        ));
    }
    Ok(format!(
        "λ₁ gap {:.6}, form gap {:.6}; constant profiles coincide",
        cmp.lambda_gap, cmp.form_gap
    ))
}

fn check_energy_blowup() -> Result<String, String> {
    let g = Arc::new(build_tree(TreeSpec::new(2, 0.5, 1.0, 8).unwrap()).unwrap());
    let sampler = sqrt_distance_to_leftmost_end(*g.tree_spec().expect("tree"));
    let out = extend_continuous(&g, &sampler, 0.0, 8).map_err(|e| e.to_string())?;
    let steps: Vec<_> = out.steps.iter().filter(|s| s.depth >= 3).collect();
    if steps.len() < 6 {
        return fail(format!("expected depths 3..8, got {} steps", steps.len()));
    }
    for w in steps.windows(2) {
        if w[1].dirichlet_energy <= w[0].dirichlet_energy {
            return fail(format!(
                "energy not strictly increasing at depth {}",
                w[1].depth
            ));
        }
        if let (Some(a), Some(b)) = (w[0].sup_diff, w[1].sup_diff) {
            if b > a {
                return fail(format!("sup difference grew at depth {}", w[1].depth));
            }
        }
    }
    let first = steps.first().expect("nonempty").dirichlet_energy;
    let last = steps.last().expect("nonempty").dirichlet_energy;
    Ok(format!("energies climb {first:.4} → {last:.4} while sup diffs shrink"))
}

fn check_determinism() -> Result<String, String> {
    let run = || -> Result<Vec<u64>, String> {
        let mut rng = rng_for(31);
        let spec = random_spec(&mut rng);
        let g = Arc::new(build_tree(spec).map_err(|e| e.to_string())?);
        let data = random_step(&mut rng, &spec);
        let h = solve_dirichlet(&g, &data).map_err(|e| e.to_string())?;
        Ok(h.values().iter().map(|v| v.to_bits()).collect())
    };
    let a = run()?;
    let b = run()?;
    if a != b {
        return fail("two identical runs produced different bits".into());
    }
    Ok(format!("{} solve values bit-identical across runs", a.len()))
}
