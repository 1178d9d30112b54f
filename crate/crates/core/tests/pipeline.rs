use mqfb::bench::{max_relative_error, run_arm, BenchArm};
use mqfb::cloud::{synthetic_cloud, PointCloud};
use mqfb::filterbank::{lazy_spec, orthogonal_cosine_spec, ChannelCoefficients};
use mqfb::multires::{
    decompose, keep_fractions, linear_approximation, load_tree, psnr, reconstruct, save_tree, Arm, DecomposeOptions,
    OperatorKind, PSNR_SENTINEL,
};
use mqfb::sparse::{spmv, SolverOptions};
use mqfb::Error;

fn rel_err(x: &[Vec<f64>], y: &[Vec<f64>]) -> f64 {
    max_relative_error(x, y)
}

#[test]
fn one_level_gives_one_detail_set() {
    let pc = synthetic_cloud(500, 1).unwrap();
    let tree = decompose(&pc, &DecomposeOptions::new(lazy_spec(), 5, 1, 3)).unwrap();
    assert_eq!(tree.levels.len(), 1);
    let p = &tree.levels[0].partition;
    assert_eq!(p.a_len() + p.b_len(), 500);
    for ch in 0..3 {
        assert_eq!(tree.levels[0].details[ch].len() + tree.root[ch].len(), 500);
    }
}

#[test]
fn constant_attributes_have_zero_detail_at_every_level() {
    let base = synthetic_cloud(4000, 2).unwrap();
    let pc = PointCloud::new(base.positions.clone(), vec![vec![128.0; 4000]; 3]).unwrap();
    for operator in [OperatorKind::Combinatorial, OperatorKind::Normalized] {
        for arm in [Arm::Proposed, Arm::Bipartite] {
            let mut o = DecomposeOptions::new(lazy_spec(), 5, 5, 7);
            o.zero_dc = true;
            o.operator = operator;
            o.arm = arm;
            let tree = decompose(&pc, &o).unwrap();
            for (l, level) in tree.levels.iter().enumerate() {
                // Isolated vertices of a bipartized graph keep an identity row
                // and are exempt.
                let bip = (arm == Arm::Bipartite)
                    .then(|| mqfb::graph::bipartize(&level.graph, &level.partition).unwrap());
                let b_idx = level.partition.b_indices();
                for d in &level.details {
                    for (k, v) in d.iter().enumerate() {
                        if bip.as_ref().is_some_and(|g| g.degrees()[b_idx[k]] == 0.0) {
                            continue;
                        }
                        assert!(v.abs() <= 1e-8, "{operator:?} {arm:?} level {} detail {v}", l + 1);
                    }
                }
            }
            assert!(rel_err(&pc.attributes, &reconstruct(&tree).unwrap()) < 1e-10);
        }
    }
}

#[test]
fn seven_levels_reconstruct() {
    let pc = synthetic_cloud(10_000, 5).unwrap();
    for arm in [Arm::Proposed, Arm::Bipartite] {
        let mut o = DecomposeOptions::new(lazy_spec(), 5, 7, 11);
        o.arm = arm;
        let tree = decompose(&pc, &o).unwrap();
        assert_eq!(tree.levels.len(), 7);
        assert_eq!(tree.coefficient_count(), 10_000 * 3);
        assert!(rel_err(&pc.attributes, &reconstruct(&tree).unwrap()) <= 1e-6);
    }
}

#[test]
fn detail_counts_halve_per_level() {
    let pc = synthetic_cloud(20_000, 9).unwrap();
    let tree = decompose(&pc, &DecomposeOptions::new(lazy_spec(), 5, 4, 2)).unwrap();
    for (l, level) in tree.levels.iter().enumerate() {
        let expected = 20_000.0 * 0.5f64.powi(l as i32 + 1);
        let sd = (20_000.0 * 0.5f64.powi(l as i32)).sqrt() * 0.5;
        assert!((level.details[0].len() as f64 - expected).abs() <= 5.0 * sd);
    }
}

#[test]
fn iterative_solver_matches_direct() {
    let pc = synthetic_cloud(3000, 4).unwrap();
    let direct = decompose(&pc, &DecomposeOptions::new(lazy_spec(), 5, 3, 1)).unwrap();
    let mut o = DecomposeOptions::new(lazy_spec(), 5, 3, 1);
    o.solver = SolverOptions::iterative(1e-12);
    let cg = decompose(&pc, &o).unwrap();
    assert_eq!(cg.levels.len(), direct.levels.len());
    for (a, b) in cg.levels.iter().zip(&direct.levels) {
        assert_eq!(a.partition, b.partition);
        assert!(rel_err(&a.details, &b.details) < 1e-8);
    }
    assert!(rel_err(&pc.attributes, &reconstruct(&cg).unwrap()) < 1e-8);
}

#[test]
fn tree_directory_round_trip_is_exact() {
    let pc = synthetic_cloud(2000, 6).unwrap();
    let tree = decompose(&pc, &DecomposeOptions::new(lazy_spec(), 5, 4, 8)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_tree(&tree, dir.path()).unwrap();
    for name in ["meta.json", "root.bin", "level_1/partition.txt", "level_4/graph.mtx", "level_2/detail.bin"] {
        assert!(dir.path().join(name).is_file(), "{name}");
    }
    let loaded = load_tree(dir.path()).unwrap();
    assert_eq!(loaded, tree);
    let a = reconstruct(&tree).unwrap();
    let b = reconstruct(&loaded).unwrap();
    assert!(a.iter().flatten().zip(b.iter().flatten()).all(|(u, v)| u.to_bits() == v.to_bits()));

    std::fs::remove_dir_all(dir.path().join("level_3")).unwrap();
    let err = load_tree(dir.path()).unwrap_err();
    assert!(matches!(err, Error::MissingLevel(_)), "{err}");
}

#[test]
fn truncated_tree_is_rejected() {
    let pc = synthetic_cloud(1000, 6).unwrap();
    let mut tree = decompose(&pc, &DecomposeOptions::new(lazy_spec(), 5, 3, 8)).unwrap();
    tree.levels[1].details[2].pop();
    assert!(matches!(reconstruct(&tree).unwrap_err(), Error::MissingLevel(_)));
}

#[test]
fn linear_approximation_properties() {
    let pc = synthetic_cloud(8000, 12).unwrap();
    let tree = decompose(&pc, &DecomposeOptions::new(lazy_spec(), 5, 7, 12)).unwrap();
    let full = linear_approximation(&tree, 1.0).unwrap();
    assert_eq!(full.m_over_n, 1.0);
    assert!(full.psnr.iter().all(|&p| p >= 120.0));

    let coarsest = linear_approximation(&tree, 1.0 / 128.0).unwrap();
    assert_eq!(coarsest.m_over_n, tree.root[0].len() as f64 / 8000.0);
    assert!(coarsest.psnr.iter().all(|p| p.is_finite() && *p < PSNR_SENTINEL));

    let mut psnrs = Vec::new();
    for keep in keep_fractions(7) {
        let r = linear_approximation(&tree, keep).unwrap();
        assert!(r.m_over_n > keep * 0.7 && r.m_over_n < keep * 1.3, "{keep} {}", r.m_over_n);
        psnrs.push(r.psnr[0]);
    }
    assert!(psnrs[1] > psnrs[7]);
    assert!(linear_approximation(&tree, 0.3).is_err());
}

#[test]
fn psnr_reference_values() {
    let x = vec![vec![0.0, 0.0, 0.0]];
    assert_eq!(psnr(&x, &x, 255.0).unwrap(), vec![PSNR_SENTINEL]);
    let y = vec![vec![5.0, -5.0, 5.0]];
    assert!((psnr(&x, &y, 255.0).unwrap()[0] - 34.1514).abs() < 1e-4);
}

/// Each level conserves the Q-energy of its input: with per-level
/// inner products the total does not telescope, so it is checked level by
/// level.
#[test]
fn orthogonal_bank_conserves_energy_per_level() {
    let pc = synthetic_cloud(600, 3).unwrap();
    let o = DecomposeOptions::new(orthogonal_cosine_spec(), 5, 3, 4);
    let tree = decompose(&pc, &o).unwrap();
    assert!(rel_err(&pc.attributes, &reconstruct(&tree).unwrap()) < 1e-8);

    let mut input = pc.attributes.clone();
    for l in 1..=tree.levels.len() {
        let level = &tree.levels[l - 1];
        let op = tree.level_operator(l).unwrap();
        let q = op.q();
        let p = &level.partition;
        let approx: Vec<Vec<f64>> = op
            .analyze(&o.spec, p, &input)
            .unwrap()
            .into_iter()
            .map(|c| c.a)
            .collect();
        for ch in 0..3 {
            let x = &input[ch];
            let energy_in: f64 = spmv(q, x).unwrap().iter().zip(x).map(|(a, b)| a * b).sum();
            let c = ChannelCoefficients {
                a: approx[ch].clone(),
                d: level.details[ch].clone(),
            };
            let energy_out = c.q_inner(&c, q, p).unwrap();
            assert!((energy_in - energy_out).abs() <= 1e-6 * energy_in, "level {l}: {energy_in} vs {energy_out}");
        }
        input = approx;
    }
}

#[test]
fn dense_mode_respects_the_cap() {
    let pc = synthetic_cloud(300, 3).unwrap();
    let mut o = DecomposeOptions::new(orthogonal_cosine_spec(), 5, 2, 4);
    o.dense_cap = 100;
    let err = decompose(&pc, &o).unwrap_err();
    assert!(matches!(err.root(), Error::DenseCapExceeded { .. }));
    assert!(matches!(err, Error::AtLevel { level: 1, .. }));
}

#[test]
fn stage_timings_account_for_wall_time() {
    let pc = synthetic_cloud(20_000, 1).unwrap();
    let base = DecomposeOptions::new(lazy_spec(), 5, 7, 1);
    for arm in [Arm::Proposed, Arm::Bipartite] {
        let run = run_arm("t", &pc, BenchArm { arm, k: 10 }, &base).unwrap();
        let r = run.row;
        assert!((r.timings.total() - r.total).abs() <= 0.1 * r.total, "{r:?}");
    }
}

#[test]
fn repeated_runs_give_identical_coefficients() {
    let pc = synthetic_cloud(5000, 2).unwrap();
    let base = DecomposeOptions::new(lazy_spec(), 5, 5, 99);
    let a = run_arm("a", &pc, BenchArm { arm: Arm::Proposed, k: 5 }, &base).unwrap();
    let b = run_arm("a", &pc, BenchArm { arm: Arm::Proposed, k: 5 }, &base).unwrap();
    assert_eq!(a.tree, b.tree);
    for (x, y) in a.tree.root.iter().flatten().zip(b.tree.root.iter().flatten()) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
}

#[test]
fn filtering_cost_scales_with_edges() {
    let base = DecomposeOptions::new(lazy_spec(), 5, 7, 3);
    let mut edges = Vec::new();
    let mut seconds = Vec::new();
    for n in [10_000, 100_000] {
        let pc = synthetic_cloud(n, 3).unwrap();
        let runs: Vec<_> = (0..3)
            .map(|_| run_arm("s", &pc, BenchArm { arm: Arm::Proposed, k: 5 }, &base).unwrap().row)
            .collect();
        edges.push(runs[0].edges as f64);
        seconds.push(runs.iter().map(|r| r.timings.filtering).fold(f64::INFINITY, f64::min));
    }
    let slope = mqfb::bench::loglog_slope(&edges, &seconds).unwrap();
    eprintln!("filtering slope {slope:.3} (edges {edges:?}, seconds {seconds:?})");
    assert!((0.8..=1.3).contains(&slope), "slope {slope}");
}
