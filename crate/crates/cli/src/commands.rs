//! Command execution: each command computes everything first and only
//! writes its CSV files at the end, so failures leave no partial outputs.

use std::collections::BTreeMap;
use std::path::Path;

use gharm_core::boundary::EndAddress;
use gharm_core::graph::GraphPoint;
use gharm_core::harmonic::{
    extend_continuous, h1_inner, harmonic_measure, harmonic_measure_groups, solve_dirichlet,
    solve_dirichlet_pinned, sqrt_distance_to_leftmost_end, GraphMeasure, HarmonicFunction,
};
use gharm_core::levelset::{level_crossings, level_flux};
use gharm_core::operator::{assemble, compare_clamps};
use gharm_core::verify;

use crate::config::{
    clamp_profiles, resolve, resolve_bc, resolve_clusters, CliError, CliResult, Config,
    Resolved, ResolvedData,
};
use crate::csvout::{fmt_f64, Table};

fn numerical(e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

fn schema(msg: impl Into<String>) -> CliError {
    CliError::Schema(msg.into())
}

/// Output files as (name, content) pairs, written only on success.
pub struct Outputs {
    pub files: Vec<(String, String)>,
    pub notes: Vec<String>,
}

pub fn run_command(cfg: &Config, base: &Path) -> CliResult<Outputs> {
    let resolved = resolve(cfg, base)?;
    match cfg.command.as_str() {
        "solve" => cmd_solve(cfg, &resolved),
        "measure" => cmd_measure(cfg, &resolved),
        "levelset" => cmd_levelset(cfg, &resolved),
        "spectrum" => cmd_spectrum(cfg, &resolved),
        "compare" => cmd_compare(cfg, &resolved),
        "diverge" => cmd_diverge(cfg, &resolved),
        "sweep" => cmd_sweep(cfg, &resolved, base),
        other => Err(schema(format!("unknown command {other:?}"))),
    }
}

fn solve_from_data(resolved: &Resolved) -> CliResult<HarmonicFunction> {
    match resolved.data.as_ref().ok_or_else(|| schema("[partition] section required"))? {
        ResolvedData::Step(step) => {
            solve_dirichlet(&resolved.graph, step).map_err(numerical)
        }
        ResolvedData::VertexGroups { groups, values } => {
            let mut pinned = BTreeMap::new();
            for (group, &value) in groups.iter().zip(values) {
                for name in group {
                    pinned.insert(name.clone(), value);
                }
            }
            solve_dirichlet_pinned(&resolved.graph, &pinned).map_err(numerical)
        }
    }
}

fn cmd_solve(_cfg: &Config, resolved: &Resolved) -> CliResult<Outputs> {
    let h = solve_from_data(resolved)?;
    let g = &resolved.graph;
    let mut values = Table::new(&["vertex", "value"]);
    for v in 0..g.vertex_count() {
        values.push(vec![g.vertex_name(v).to_string(), fmt_f64(h.vertex_value(v))]);
    }
    let report = h1_inner(&h, &h, &resolved.measure).map_err(numerical)?;
    let mut energy = Table::new(&["quantity", "value"]);
    energy.push(vec!["dirichlet_energy".into(), fmt_f64(report.dirichlet)]);
    energy.push(vec!["boundary_term".into(), fmt_f64(report.boundary)]);
    energy.push(vec!["h1_inner".into(), fmt_f64(report.h1)]);
    // Boundary data as (word, mass, value) rows where the measure applies.
    let mut files = vec![
        ("values.csv".to_string(), values.render()),
        ("energy.csv".to_string(), energy.render()),
    ];
    if let (ResolvedData::Step(step), GraphMeasure::Ends(mu)) = (
        resolved.data.as_ref().expect("solve resolved data"),
        &resolved.measure,
    ) {
        let mut boundary = Table::new(&["word", "mass", "value"]);
        for (cell, &value) in step.partition.cells().iter().zip(&step.values) {
            for word in &cell.words {
                boundary.push(vec![
                    word.to_string(),
                    fmt_f64(mu.mass_of_word(word)),
                    fmt_f64(value),
                ]);
            }
        }
        files.push(("boundary.csv".into(), boundary.render()));
    }
    Ok(Outputs {
        files,
        notes: vec![format!(
            "solved {} vertices, dirichlet energy {}",
            g.vertex_count(),
            report.dirichlet
        )],
    })
}

fn query_point(cfg: &Config, resolved: &Resolved) -> CliResult<GraphPoint> {
    let g = &resolved.graph;
    match &cfg.query {
        Some(q) => {
            let v = g.vertex_index(&q.at).map_err(|e| schema(e.to_string()))?;
            Ok(g.vertex_point(v))
        }
        None => {
            let v = g
                .origin()
                .ok_or_else(|| schema("graph has no origin; set [query] at = \"<vertex>\""))?;
            Ok(g.vertex_point(v))
        }
    }
}

fn cmd_measure(cfg: &Config, resolved: &Resolved) -> CliResult<Outputs> {
    let at = query_point(cfg, resolved)?;
    let (ids, weights): (Vec<String>, Vec<f64>) =
        match resolved.data.as_ref().ok_or_else(|| schema("[partition] section required"))? {
            ResolvedData::Step(step) => {
                let w = harmonic_measure(&resolved.graph, &step.partition, at)
                    .map_err(numerical)?;
                (step.partition.cells().iter().map(|c| c.id.clone()).collect(), w)
            }
            ResolvedData::VertexGroups { groups, .. } => {
                let w = harmonic_measure_groups(&resolved.graph, groups, at)
                    .map_err(numerical)?;
                (groups.iter().map(|g| g.join("+")).collect(), w)
            }
        };
    let mut table = Table::new(&["cell", "weight"]);
    for (id, w) in ids.iter().zip(&weights) {
        table.push(vec![id.clone(), fmt_f64(*w)]);
    }
    let total: f64 = weights.iter().sum();
    Ok(Outputs {
        files: vec![("measure.csv".into(), table.render())],
        notes: vec![format!("harmonic measure over {} cells sums to {total}", ids.len())],
    })
}

fn cmd_levelset(cfg: &Config, resolved: &Resolved) -> CliResult<Outputs> {
    let levels = &cfg
        .levelset
        .as_ref()
        .ok_or_else(|| schema("[levelset] levels = [...] required"))?
        .levels;
    let h = solve_from_data(resolved)?;
    let mut crossings_table = Table::new(&["t", "edge", "offset", "flux"]);
    let mut flux_table = Table::new(&["t", "flux", "crossings"]);
    for &t in levels {
        let crossings = level_crossings(&h, t).map_err(numerical)?;
        for c in &crossings {
            crossings_table.push(vec![
                fmt_f64(t),
                c.point.edge.to_string(),
                fmt_f64(c.point.offset),
                fmt_f64(c.outward_flux),
            ]);
        }
        let flux = level_flux(&h, t).map_err(numerical)?;
        flux_table.push(vec![
            fmt_f64(t),
            fmt_f64(flux.total),
            flux.crossing_count.to_string(),
        ]);
    }
    Ok(Outputs {
        files: vec![
            ("crossings.csv".into(), crossings_table.render()),
            ("flux.csv".into(), flux_table.render()),
        ],
        notes: vec![format!("{} levels processed", levels.len())],
    })
}

fn cmd_spectrum(cfg: &Config, resolved: &Resolved) -> CliResult<Outputs> {
    let bc = resolve_bc(cfg, resolved)?;
    let count = cfg.spectrum.as_ref().map(|s| s.count).unwrap_or(5);
    let op = assemble(&resolved.graph, &bc, resolved.mesh).map_err(numerical)?;
    let spectrum = op.eigenvalues(count.min(op.dof_count())).map_err(numerical)?;
    let mut table = Table::new(&["index", "eigenvalue"]);
    for (i, l) in spectrum.eigenvalues.iter().enumerate() {
        table.push(vec![(i + 1).to_string(), fmt_f64(*l)]);
    }
    // Quadratic-form decomposition on seeded pseudo-random trial vectors.
    let mut form = Table::new(&["trial", "total", "core", "boundary"]);
    let mut state = 0x243f6a8885a308d3u64;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    for trial in 0..20 {
        let x: Vec<f64> = (0..op.dof_count()).map(|_| next()).collect();
        let report = op.quadratic_form(&x).map_err(numerical)?;
        form.push(vec![
            trial.to_string(),
            fmt_f64(report.total),
            fmt_f64(report.core_energy),
            fmt_f64(report.boundary_part),
        ]);
    }
    Ok(Outputs {
        files: vec![
            ("spectrum.csv".into(), table.render()),
            ("form.csv".into(), form.render()),
        ],
        notes: vec![format!(
            "{} dofs, lambda_1 = {}",
            op.dof_count(),
            spectrum.eigenvalues.first().copied().unwrap_or(f64::NAN)
        )],
    })
}

fn cmd_compare(cfg: &Config, resolved: &Resolved) -> CliResult<Outputs> {
    let bc = cfg.bc.as_ref().ok_or_else(|| schema("[bc] section required"))?;
    let clusters = resolve_clusters(bc, resolved)?;
    let profiles = clamp_profiles(bc, resolved, &clusters)?;
    let cmp = compare_clamps(&resolved.graph, &clusters, &profiles, resolved.mesh)
        .map_err(numerical)?;
    let mut table = Table::new(&["quantity", "value"]);
    table.push(vec!["lambda1_constant".into(), fmt_f64(cmp.lambda1_constant)]);
    table.push(vec!["lambda1_harmonic".into(), fmt_f64(cmp.lambda1_harmonic)]);
    table.push(vec!["lambda_gap".into(), fmt_f64(cmp.lambda_gap)]);
    table.push(vec!["form_gap".into(), fmt_f64(cmp.form_gap)]);
    Ok(Outputs {
        files: vec![("compare.csv".into(), table.render())],
        notes: vec![format!("lambda gap {}", cmp.lambda_gap)],
    })
}

fn cmd_diverge(cfg: &Config, resolved: &Resolved) -> CliResult<Outputs> {
    let section = cfg
        .diverge
        .as_ref()
        .ok_or_else(|| schema("[diverge] min_depth/max_depth required"))?;
    let spec = resolved
        .spec
        .ok_or_else(|| schema("diverge requires a tree graph"))?;
    if section.max_depth > spec.depth {
        return Err(schema(format!(
            "diverge.max_depth {} exceeds graph depth {}",
            section.max_depth, spec.depth
        )));
    }
    if section.min_depth > section.max_depth {
        return Err(schema("diverge.min_depth exceeds diverge.max_depth"));
    }
    let sampler_name = section.sampler.as_deref().unwrap_or("sqrt_distance");
    let outcome = match sampler_name {
        "sqrt_distance" => {
            let sampler = sqrt_distance_to_leftmost_end(spec);
            extend_continuous(&resolved.graph, &sampler, 0.0, section.max_depth)
                .map_err(numerical)?
        }
        "indicator" => {
            let sampler = |w: &EndAddress| {
                if w.digits().first() == Some(&0) {
                    1.0
                } else {
                    0.0
                }
            };
            extend_continuous(&resolved.graph, &sampler, 0.0, section.max_depth)
                .map_err(numerical)?
        }
        other => return Err(schema(format!("unknown diverge.sampler {other:?}"))),
    };
    let mut table = Table::new(&["depth", "sup_diff", "energy"]);
    for step in outcome
        .steps
        .iter()
        .filter(|s| s.depth >= section.min_depth && s.depth <= section.max_depth)
    {
        table.push(vec![
            step.depth.to_string(),
            step.sup_diff.map(fmt_f64).unwrap_or_default(),
            fmt_f64(step.dirichlet_energy),
        ]);
    }
    Ok(Outputs {
        files: vec![("diverge.csv".into(), table.render())],
        notes: vec![format!(
            "depths {}..{} recorded, final energy {}",
            section.min_depth,
            section.max_depth,
            outcome.steps.last().map(|s| s.dirichlet_energy).unwrap_or(f64::NAN)
        )],
    })
}

// ---------------------------------------------------------------------------
// sweep

#[derive(Clone, Copy)]
enum SweepParameter {
    MeshM,
    BcK,
    GraphDepth,
}

type SweepResult = Option<CliResult<Vec<(String, f64)>>>;

fn sweep_quantities(
    cfg: &Config,
    base_resolved: &Resolved,
    parameter: SweepParameter,
    value: f64,
    base: &Path,
) -> CliResult<Vec<(String, f64)>> {
    // Re-resolve with the overridden parameter where needed.
    let quantity = cfg.sweep.as_ref().expect("caller checked").quantity.as_str();
    let mesh = match parameter {
        SweepParameter::MeshM => value as usize,
        _ => base_resolved.mesh,
    };
    let resolved: Resolved = match parameter {
        SweepParameter::GraphDepth => {
            let mut patched = toml_patch_depth(cfg, value as u32);
            patched.mesh = cfg.mesh.as_ref().map(|m| crate::config::MeshSection { m: m.m });
            resolve(&patched, base)?
        }
        _ => resolve(cfg, base)?,
    };
    match quantity {
        "lambda1" => {
            let bc = match parameter {
                SweepParameter::BcK => {
                    gharm_core::operator::BoundaryCondition::robin_uniform(&resolved.graph, value)
                }
                _ => resolve_bc(cfg, &resolved)?,
            };
            let op = assemble(&resolved.graph, &bc, mesh).map_err(numerical)?;
            let spectrum = op.eigenvalues(1).map_err(numerical)?;
            Ok(vec![("lambda1".into(), spectrum.eigenvalues[0])])
        }
        "energy" => {
            let h = solve_from_data(&resolved)?;
            Ok(vec![("energy".into(), h.dirichlet_energy())])
        }
        "flux" => {
            let levels = &cfg
                .levelset
                .as_ref()
                .ok_or_else(|| schema("[levelset] levels required for flux sweeps"))?
                .levels;
            let h = solve_from_data(&resolved)?;
            let flux = level_flux(&h, levels[0]).map_err(numerical)?;
            Ok(vec![("flux".into(), flux.total)])
        }
        "measure" => {
            let at = query_point(cfg, &resolved)?;
            match resolved.data.as_ref().ok_or_else(|| schema("[partition] required"))? {
                ResolvedData::Step(step) => {
                    let w = harmonic_measure(&resolved.graph, &step.partition, at)
                        .map_err(numerical)?;
                    Ok(w
                        .into_iter()
                        .enumerate()
                        .map(|(i, x)| (format!("measure_{i}"), x))
                        .collect())
                }
                ResolvedData::VertexGroups { groups, .. } => {
                    let w = harmonic_measure_groups(&resolved.graph, groups, at)
                        .map_err(numerical)?;
                    Ok(w
                        .into_iter()
                        .enumerate()
                        .map(|(i, x)| (format!("measure_{i}"), x))
                        .collect())
                }
            }
        }
        other => Err(schema(format!("unknown sweep.quantity {other:?}"))),
    }
}

/// Clones the config with `graph.depth` replaced.
fn toml_patch_depth(cfg: &Config, depth: u32) -> Config {
    Config {
        command: cfg.command.clone(),
        graph: crate::config::GraphSection {
            kind: cfg.graph.kind.clone(),
            b: cfg.graph.b,
            r: cfg.graph.r,
            l0: cfg.graph.l0,
            depth: Some(depth),
            file: cfg.graph.file.clone(),
        },
        partition: cfg.partition.as_ref().map(|p| crate::config::PartitionSection {
            cells: p.cells.clone(),
            values: p.values.clone(),
        }),
        measure: cfg.measure.as_ref().map(|m| crate::config::MeasureSection {
            total: m.total,
            words: m.words.clone(),
            masses: m.masses.clone(),
        }),
        bc: None,
        mesh: None,
        spectrum: None,
        levelset: cfg.levelset.as_ref().map(|l| crate::config::LevelsetSection {
            levels: l.levels.clone(),
        }),
        query: cfg.query.as_ref().map(|q| crate::config::QuerySection { at: q.at.clone() }),
        diverge: None,
        sweep: None,
        out: None,
    }
}

fn cmd_sweep(cfg: &Config, resolved: &Resolved, base: &Path) -> CliResult<Outputs> {
    let section = cfg.sweep.as_ref().ok_or_else(|| schema("[sweep] section required"))?;
    let parameter = match section.parameter.as_str() {
        "mesh.m" => SweepParameter::MeshM,
        "bc.k" => SweepParameter::BcK,
        "graph.depth" => SweepParameter::GraphDepth,
        other => return Err(schema(format!("unknown sweep.parameter {other:?}"))),
    };
    if section.values.is_empty() {
        return Err(schema("sweep.values is empty"));
    }
    let base = base.to_path_buf();
    // Dispatch grid points across up to GH_THREADS workers; results are
    // collected in grid order regardless of completion order.
    let cap = std::env::var("GH_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    let workers = cap.min(section.values.len());
    let mut results: Vec<SweepResult> = (0..section.values.len()).map(|_| None).collect();
    if workers <= 1 {
        for (i, &v) in section.values.iter().enumerate() {
            results[i] = Some(sweep_quantities(cfg, resolved, parameter, v, &base));
        }
    } else {
        let chunks: Vec<Vec<usize>> = (0..workers)
            .map(|w| (w..section.values.len()).step_by(workers).collect())
            .collect();
        let slots: Vec<std::sync::Mutex<SweepResult>> =
            (0..section.values.len()).map(|_| std::sync::Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for chunk in &chunks {
                let slots = &slots;
                let values = &section.values;
                let base = &base;
                scope.spawn(move || {
                    for &i in chunk {
                        let out = sweep_quantities(cfg, resolved, parameter, values[i], base);
                        *slots[i].lock().expect("poisoned slot") = Some(out);
                    }
                });
            }
        });
        for (i, slot) in slots.into_iter().enumerate() {
            results[i] = slot.into_inner().expect("poisoned slot");
        }
    }
    // First row determines the columns.
    let first = results[0]
        .as_ref()
        .expect("all grid points computed")
        .as_ref()
        .map_err(|e| match e {
            CliError::Schema(m) => CliError::Schema(m.clone()),
            CliError::Numerical(m) => CliError::Numerical(m.clone()),
        })?;
    let mut header: Vec<&str> = vec!["parameter", "value"];
    let names: Vec<String> = first.iter().map(|(n, _)| n.clone()).collect();
    for n in &names {
        header.push(n);
    }
    let mut table = Table::new(&header);
    for (i, &v) in section.values.iter().enumerate() {
        let row = results[i].take().expect("computed").map_err(|e| match e {
            CliError::Schema(m) => CliError::Schema(m),
            CliError::Numerical(m) => CliError::Numerical(m),
        })?;
        let mut cells = vec![section.parameter.clone(), fmt_f64(v)];
        for (_, x) in &row {
            cells.push(fmt_f64(*x));
        }
        table.push(cells);
    }
    Ok(Outputs {
        files: vec![("sweep.csv".into(), table.render())],
        notes: vec![format!(
            "{} grid points over {} with {} worker(s)",
            section.values.len(),
            section.parameter,
            workers
        )],
    })
}

/// Runs the verification suite, printing one line per check.
pub fn run_verify(quiet: bool) -> i32 {
    let report = verify::run_all();
    for r in &report.results {
        if r.passed {
            if !quiet {
                println!("PASS {} — {}", r.name, r.detail);
            }
        } else {
            println!("FAIL {} — {}", r.name, r.detail);
        }
    }
    let failures = report.failures().len();
    if !quiet {
        println!("verify: {}/{} checks passed", report.results.len() - failures, report.results.len());
        eprintln!("elapsed: {:?}", report.elapsed);
    }
    if failures == 0 {
        0
    } else {
        3
    }
}
