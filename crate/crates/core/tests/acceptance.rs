//! Acceptance suite: the ten exit criteria, each as one test printing a
//! pass/fail line with the measured quantities.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gharm_core::boundary::{
    complement_words, end_set_separation, flat_cutoff, ClopenPartition, StepFunction,
};
use gharm_core::graph::{build_explicit, build_tree, MetricGraph, TreeSpec};
use gharm_core::harmonic::{
    extend_continuous, harmonic_measure, interior_bump, orthogonality_residual, solve_dirichlet,
    sqrt_distance_to_leftmost_end,
};
use gharm_core::levelset::{level_crossings, level_flux};
use gharm_core::operator::{
    assemble, cluster_for_cell, compare_clamps, BoundaryCondition, ClampCluster, ClampProfile,
};
use gharm_core::piecewise::PiecewiseFunction;
use gharm_core::verify;

fn interval() -> Arc<MetricGraph> {
    Arc::new(build_explicit(&[("a", "b", 1.0)], &["a", "b"]).unwrap())
}

fn binary_tree(depth: u32) -> Arc<MetricGraph> {
    Arc::new(build_tree(TreeSpec::new(2, 0.5, 1.0, depth).unwrap()).unwrap())
}

#[test]
fn criterion_01_classical_spectra() {
    let start = Instant::now();
    let g = interval();
    let dirichlet = assemble(&g, &BoundaryCondition::Dirichlet { vertices: None }, 200)
        .unwrap()
        .eigenvalues(3)
        .unwrap()
        .eigenvalues;
    let neumann = assemble(&g, &BoundaryCondition::Neumann, 200)
        .unwrap()
        .eigenvalues(4)
        .unwrap()
        .eigenvalues;
    let mut worst = 0.0f64;
    for n in 1..=3usize {
        let exact = (n as f64 * PI).powi(2);
        worst = worst.max((dirichlet[n - 1] - exact).abs() / exact);
        worst = worst.max((neumann[n] - exact).abs() / exact);
    }
    let elapsed = start.elapsed();
    assert!(worst < 1e-3, "relative error {worst}");
    assert!(neumann[0].abs() < 1e-10);
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    println!("PASS criterion 1: classical spectra within {worst:.2e} in {elapsed:?}");
}

#[test]
fn criterion_02_robin_secular() {
    let g = interval();
    let lam = assemble(&g, &BoundaryCondition::robin_uniform(&g, 1.0), 400)
        .unwrap()
        .eigenvalues(1)
        .unwrap()
        .eigenvalues[0];
    let mu = verify::robin_secular_root(1.0);
    let rel = (lam - mu * mu).abs() / (mu * mu);
    assert!(rel < 1e-3, "λ₁ = {lam} vs secular {}", mu * mu);
    let mut prev = -1.0;
    for k in [0.0, 1.0, 10.0] {
        let l1 = assemble(&g, &BoundaryCondition::robin_uniform(&g, k), 400)
            .unwrap()
            .eigenvalues(1)
            .unwrap()
            .eigenvalues[0];
        assert!(l1 > prev, "λ₁ not strictly increasing at k = {k}");
        prev = l1;
    }
    println!("PASS criterion 2: Robin λ₁ matches the secular root to {rel:.2e}, increasing in k");
}

#[test]
fn criterion_03_dirichlet_exactness() {
    let partition = ClopenPartition::standard(2, 2).unwrap();
    let data = StepFunction::new(partition, vec![2.0, -1.0, 0.5, 3.0]).unwrap();
    let g4 = binary_tree(4);
    let g6 = binary_tree(6);
    let h4 = solve_dirichlet(&g4, &data).unwrap();
    let h6 = solve_dirichlet(&g6, &data).unwrap();
    let mut worst = 0.0f64;
    for v in 0..g4.vertex_count() {
        let w = g6.vertex_index(g4.vertex_name(v)).unwrap();
        worst = worst.max((h4.vertex_value(v) - h6.vertex_value(w)).abs());
    }
    assert!(worst <= 1e-12, "depth-4 vs depth-6 drift {worst}");
    let g = binary_tree(4);
    let cells = ClopenPartition::standard(2, 1).unwrap();
    let root = g.vertex_point(g.origin().unwrap());
    let m = harmonic_measure(&g, &cells, root).unwrap();
    assert!((m[0] - 0.5).abs() <= 1e-12 && (m[1] - 0.5).abs() <= 1e-12, "measure {m:?}");
    println!("PASS criterion 3: core values depth-stable ({worst:.2e}); root measure (0.5, 0.5)");
}

#[test]
fn criterion_04_mean_value_and_maximum_principle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_kirchhoff = 0.0f64;
    for _ in 0..100 {
        let b = if rng.gen_bool(0.5) { 2 } else { 3 };
        let spec = TreeSpec::new(
            b,
            rng.gen_range(0.25..0.6),
            rng.gen_range(0.5..2.0),
            rng.gen_range(2..=5),
        )
        .unwrap();
        let g = Arc::new(build_tree(spec).unwrap());
        let k = rng.gen_range(1..=2u32.min(spec.depth));
        let partition = ClopenPartition::standard(spec.b, k).unwrap();
        let values: Vec<f64> = (0..partition.len()).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let data = StepFunction::new(partition, values).unwrap();
        let h = solve_dirichlet(&g, &data).unwrap();
        worst_kirchhoff = worst_kirchhoff.max(h.max_kirchhoff_residual());
        let (lo, hi) = (data.min_value(), data.max_value());
        for v in 0..g.vertex_count() {
            let x = h.vertex_value(v);
            assert!(x >= lo - 1e-12 && x <= hi + 1e-12, "value {x} outside [{lo}, {hi}]");
            if !data.is_constant() {
                assert!(x != lo && x != hi, "interior extremum for nonconstant data");
            }
        }
    }
    assert!(worst_kirchhoff <= 1e-10, "Kirchhoff residual {worst_kirchhoff}");
    println!(
        "PASS criterion 4: 100 random solves, Kirchhoff ≤ {worst_kirchhoff:.2e}, maximum principle holds"
    );
}

#[test]
fn criterion_05_minimality_and_orthogonality() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    // Energy minimality against cutoff competitors with the same trace.
    let spec = TreeSpec::new(2, 0.5, 1.0, 5).unwrap();
    let g = Arc::new(build_tree(spec).unwrap());
    let partition = ClopenPartition::standard(2, 1).unwrap();
    let mut min_margin = f64::INFINITY;
    for values in [vec![1.0, 0.0], vec![2.0, -1.5], vec![0.3, 0.7]] {
        let data = StepFunction::new(partition.clone(), values.clone()).unwrap();
        let h = solve_dirichlet(&g, &data).unwrap();
        let harmonic_energy = h.dirichlet_energy();
        let sep = (0..partition.len())
            .map(|n| {
                let comp = complement_words(2, &partition.cell(n).words);
                end_set_separation(&spec, &partition.cell(n).words, &comp)
            })
            .fold(f64::INFINITY, f64::min);
        let mut competitors = 0;
        for frac in [0.9, 0.7, 0.5, 0.3, 0.1] {
            let eps = sep / 3.0 * frac;
            let cutoffs: Vec<_> = (0..partition.len())
                .map(|n| flat_cutoff(&g, &partition.cell(n).words, eps).unwrap())
                .collect();
            let terms: Vec<(f64, &PiecewiseFunction)> = values
                .iter()
                .zip(cutoffs.iter())
                .map(|(&c, cut)| (c, &cut.function))
                .collect();
            let competitor = PiecewiseFunction::combine_ramps(&terms).unwrap();
            let margin = competitor.dirichlet_energy(1e-12) - harmonic_energy;
            assert!(margin > 1e-8, "competitor margin {margin} too small");
            min_margin = min_margin.min(margin);
            competitors += 1;
        }
        assert_eq!(competitors, 5);
    }
    // Orthogonality of interior bumps against harmonic extensions.
    let mut worst = 0.0f64;
    let mut pairs = 0;
    while pairs < 20 {
        let depth = rng.gen_range(3..=5);
        let g = binary_tree(depth);
        let k = rng.gen_range(1..=2u32);
        let partition = ClopenPartition::standard(2, k).unwrap();
        let values: Vec<f64> = (0..partition.len()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let h = solve_dirichlet(&g, &StepFunction::new(partition, values).unwrap()).unwrap();
        let candidates: Vec<usize> = (0..g.vertex_count())
            .filter(|&v| {
                !g.is_boundary(v)
                    && g.incident(v).iter().all(|&e| !g.is_boundary(g.other_end(e, v)))
            })
            .collect();
        if candidates.is_empty() {
            continue;
        }
        let v = candidates[rng.gen_range(0..candidates.len())];
        let bump = interior_bump(&g, v, rng.gen_range(0.5..2.0)).unwrap();
        worst = worst.max(orthogonality_residual(&bump, &h, 1e-12).unwrap());
        pairs += 1;
    }
    assert!(worst <= 1e-9, "orthogonality residual {worst}");
    println!(
        "PASS criterion 5: 15 competitors beaten (min margin {min_margin:.2e}); 20 pairings ⟂ to {worst:.2e}"
    );
}

#[test]
fn criterion_06_flux_conservation() {
    let g = binary_tree(5);
    let data = StepFunction::indicator(ClopenPartition::standard(2, 1).unwrap(), 0).unwrap();
    let h = solve_dirichlet(&g, &data).unwrap();
    // Band between the root value and the value at vertex "0": its closure
    // contains no graph boundary vertices.
    let a = h.vertex_value(g.vertex_index("").unwrap());
    let b = h.vertex_value(g.vertex_index("0").unwrap());
    let mut fluxes = Vec::new();
    for i in 1..=5 {
        let t = a + (b - a) * i as f64 / 6.0;
        let crossings = level_crossings(&h, t).unwrap();
        assert!(!crossings.is_empty());
        for c in &crossings {
            assert!(c.outward_flux > 0.0, "nonpositive flux at t = {t}");
        }
        fluxes.push(level_flux(&h, t).unwrap().total);
    }
    let mut worst = 0.0f64;
    for i in 0..fluxes.len() {
        for j in (i + 1)..fluxes.len() {
            worst = worst.max((fluxes[i] - fluxes[j]).abs());
        }
    }
    assert!(worst <= 1e-10, "flux drift {worst}");
    println!(
        "PASS criterion 6: 5 level fluxes agree to {worst:.2e} at {:.6}, all crossings positive",
        fluxes[0]
    );
}

fn clamp_setup() -> (Arc<MetricGraph>, Vec<ClampCluster>, Vec<ClampProfile>) {
    let g = Arc::new(build_tree(TreeSpec::new(2, 0.4, 1.0, 2).unwrap()).unwrap());
    let p = ClopenPartition::standard(2, 1).unwrap();
    let mut clusters = Vec::new();
    let mut profiles = Vec::new();
    for n in 0..p.len() {
        let cluster = cluster_for_cell(&g, &p.cell(n).id, &p.cell(n).words).unwrap();
        let mut values = vec![2.0; p.len()];
        values[n] = 1.0;
        let data = StepFunction::new(p.clone(), values).unwrap();
        let h = solve_dirichlet(&g, &data).unwrap();
        profiles.push(ClampProfile::from_harmonic(&h, &cluster.vertices).unwrap());
        clusters.push(cluster);
    }
    (g, clusters, profiles)
}

#[test]
fn criterion_07_quadratic_form_decomposition() {
    let (g, clusters, profiles) = clamp_setup();
    let bc = BoundaryCondition::HarmonicClamp {
        clusters: clusters.into_iter().zip(profiles).collect(),
    };
    let op = assemble(&g, &bc, 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let x: Vec<f64> = (0..op.dof_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let report = op.quadratic_form(&x).unwrap();
        worst = worst.max((report.total - report.core_energy - report.boundary_part).abs());
        // Whenever a clamp constant is nonzero the boundary part is present.
        let clamp_active = op.clamp_info().iter().any(|info| x[info.dof] != 0.0);
        if clamp_active {
            assert!(report.boundary_part > 0.0, "boundary part vanished with active clamps");
        }
    }
    assert!(worst <= 1e-10, "form decomposition residual {worst}");
    let spectrum = op.eigenvalues(op.dof_count()).unwrap();
    let min = spectrum.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(min >= -1e-10, "negative eigenvalue {min}");
    println!(
        "PASS criterion 7: x^T K x = core + boundary to {worst:.2e}; spectrum ≥ {min:.2e}"
    );
}

#[test]
fn criterion_08_extension_comparison() {
    let (g, clusters, profiles) = clamp_setup();
    let cmp = compare_clamps(&g, &clusters, &profiles, 8).unwrap();
    assert!(cmp.lambda_gap > 1e-6, "λ₁ gap {} too small", cmp.lambda_gap);
    assert!(cmp.lambda1_harmonic > cmp.lambda1_constant);
    let spec = g.tree_spec().unwrap();
    let vol = spec.tail_volume(spec.depth).unwrap();
    let const_profiles: Vec<ClampProfile> = clusters
        .iter()
        .map(|c| ClampProfile::constant(2.5, &c.vertices, vol * c.vertices.len() as f64))
        .collect();
    let degenerate = compare_clamps(&g, &clusters, &const_profiles, 8).unwrap();
    assert!(
        degenerate.lambda_gap.abs() <= 1e-10,
        "constant profiles drifted by {}",
        degenerate.lambda_gap
    );
    println!(
        "PASS criterion 8: λ₁ gap {:.6} > 1e-6; constant profiles coincide to {:.2e}",
        cmp.lambda_gap,
        degenerate.lambda_gap.abs()
    );
}

#[test]
fn criterion_09_energy_blowup() {
    let g = binary_tree(8);
    let sampler = sqrt_distance_to_leftmost_end(*g.tree_spec().unwrap());
    let out = extend_continuous(&g, &sampler, 0.0, 8).unwrap();
    let steps: Vec<_> = out.steps.iter().filter(|s| s.depth >= 3).collect();
    assert_eq!(steps.len(), 6, "expected depths 3..8");
    for w in steps.windows(2) {
        assert!(
            w[1].dirichlet_energy > w[0].dirichlet_energy,
            "energy fell at depth {}",
            w[1].depth
        );
        let (a, b) = (w[0].sup_diff.unwrap(), w[1].sup_diff.unwrap());
        assert!(b <= a, "sup difference grew at depth {}", w[1].depth);
    }
    println!(
        "PASS criterion 9: energies {:.4} → {:.4} strictly increasing, sup diffs {:.4} → {:.4} decreasing",
        steps.first().unwrap().dirichlet_energy,
        steps.last().unwrap().dirichlet_energy,
        steps.first().unwrap().sup_diff.unwrap(),
        steps.last().unwrap().sup_diff.unwrap()
    );
}

#[test]
fn criterion_10_verify_suite() {
    let report = verify::run_all();
    for r in &report.results {
        assert!(r.passed, "{} failed: {}", r.name, r.detail);
    }
    assert!(
        report.elapsed < Duration::from_secs(120),
        "verify took {:?}",
        report.elapsed
    );
    println!(
        "PASS criterion 10: {} checks passed in {:?}",
        report.results.len(),
        report.elapsed
    );
}
