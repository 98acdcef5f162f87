//! Fast paths checked against slow, independent computations.

use faer::Mat;
use fieldtrial_core::design::{
    BetweenProblem, Genotype, KinshipSource, Location, LocationSize, TrialSpec, WithinProblem,
};
use fieldtrial_core::engine::{evolve, restart_rng, EngineConfig, PermutationProblem, Quiet, Strategy};
use fieldtrial_core::model::{
    build_projection, build_residual, objective, pev, FieldLayout, KinshipMatrix, ObjectiveConfig,
    ResidualModel, VarianceComponents,
};
use fieldtrial_core::oracle::{exhaustive_best, kron_ar1_reference, pev_via_mme};
use rand::Rng;

fn max_diff(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max((a[(i, j)] - b[(i, j)]).abs());
        }
    }
    m
}

#[test]
fn residual_matches_kronecker_construction() {
    let mut rng = restart_rng(1, 0);
    for _ in 0..200 {
        let rows = rng.random_range(1..9);
        let cols = rng.random_range(1..9);
        let last = rng.random_range(1..=cols);
        let layout = FieldLayout::new(rows, cols, last).unwrap();
        let (rho_r, rho_c) = (rng.random_range(0.0..0.99), rng.random_range(0.0..0.99));
        let nugget = rng.random_range(0.0..1.0);
        let fast = build_residual(&layout, &ResidualModel::Ar1xAr1 { rho_r, rho_c, nugget }).unwrap();
        let slow = kron_ar1_reference(&layout, rho_r, rho_c, nugget);
        assert!(max_diff(&fast, &slow) <= 1e-12);
    }
}

fn random_kinship(q: usize, rng: &mut impl Rng) -> KinshipMatrix {
    let a = Mat::from_fn(q, q, |_, _| rng.random_range(-0.5..0.5));
    let mut k = &a * a.transpose();
    for i in 0..q {
        k[(i, i)] += 1.0;
    }
    KinshipMatrix::from_matrix(k).unwrap()
}

#[test]
fn pev_matches_mixed_model_equations() {
    let mut rng = restart_rng(2, 0);
    for _ in 0..100 {
        let rows = rng.random_range(2..5);
        let cols = rng.random_range(2..5);
        let layout = FieldLayout::rect(rows, cols).unwrap();
        let n = layout.n_plots();
        let q = rng.random_range(1..n);
        // every genotype at least once, the rest random
        let geno: Vec<usize> = (0..n).map(|i| if i < q { i } else { rng.random_range(0..q) }).collect();
        let z = Mat::from_fn(n, q, |i, j| f64::from(geno[i] == j));
        let p = rng.random_range(0..3usize);
        let x = Mat::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { f64::from(i % 2 == 0) });
        let model = ResidualModel::Ar1xAr1 {
            rho_r: rng.random_range(0.0..0.9),
            rho_c: rng.random_range(0.0..0.9),
            nugget: rng.random_range(0.0..0.5),
        };
        let r = build_residual(&layout, &model).unwrap();
        let k = random_kinship(q, &mut rng);
        let vc = VarianceComponents::new(rng.random_range(0.1..4.0), rng.random_range(0.1..4.0)).unwrap();
        let m = build_projection(r.as_ref(), x.as_ref()).unwrap();
        let fast = pev(z.as_ref(), m.as_ref(), &k, &vc).unwrap();
        let slow = pev_via_mme(x.as_ref(), z.as_ref(), r.as_ref(), &k, &vc).unwrap();
        let scale = fast.norm_max().max(1.0);
        assert!(max_diff(&fast, &slow) <= 1e-8 * scale, "{}", max_diff(&fast, &slow));
    }
}

fn between_spec(off_diag: f64, h2: f64) -> TrialSpec {
    let g = (0..18)
        .map(|i| Genotype::experimental(format!("g{i}"), Some(format!("F{}", i % 4))))
        .collect();
    let l = (0..3)
        .map(|i| Location {
            id: format!("L{i}"),
            size: LocationSize::Plots(12),
            check_reps: None,
        })
        .collect();
    let mut s = TrialSpec::new(g, l);
    s.presence = 2;
    s.kinship = KinshipSource::FamilyBlocks { off_diag };
    s.variance = VarianceComponents::from_heritability(h2).unwrap();
    s
}

#[test]
fn between_criterion_matches_dense_pev() {
    let mut rng = restart_rng(3, 0);
    for case in 0..30 {
        let spec = between_spec(rng.random_range(0.0..0.6), rng.random_range(0.2..0.9));
        let cfg = if case % 3 == 0 {
            ObjectiveConfig::full_trace()
        } else {
            ObjectiveConfig::truncated(rng.random_range(1..6))
        };
        let problem = BetweenProblem::new(&spec, cfg).unwrap();
        let perm = problem.random_initial(&mut rng).unwrap();
        let d = problem.design_matrices(&perm).unwrap();
        let k = spec.kinship_matrix().unwrap().submatrix(problem.slots().genotypes());
        let r = Mat::<f64>::identity(d.n_obs(), d.n_obs());
        let slow = pev_via_mme(d.x.as_ref(), d.z.as_ref(), r.as_ref(), &k, &spec.variance).unwrap();
        let want = objective(slow.as_ref(), &cfg).unwrap();
        let got = problem.evaluate(&perm).unwrap();
        assert!((got - want).abs() <= 1e-9 * want, "{got} vs {want}");
    }
}

fn toy_spec(rng: &mut impl Rng) -> TrialSpec {
    let mut g = vec![
        Genotype::experimental("A", Some("F1".into())),
        Genotype::experimental("B", Some("F1".into())),
        Genotype::experimental("C", Some("F2".into())),
        Genotype::experimental("D", Some("F2".into())),
    ];
    g.push(Genotype::check("K", Some("F1".into())));
    let mut s = TrialSpec::new(
        g,
        vec![Location {
            id: "field".into(),
            size: LocationSize::Layout(FieldLayout::rect(2, 3).unwrap()),
            check_reps: None,
        }],
    );
    s.check_reps.insert("K".into(), 2);
    s.kinship = KinshipSource::FamilyBlocks {
        off_diag: rng.random_range(0.0..0.5),
    };
    s.residual = ResidualModel::Ar1xAr1 {
        rho_r: rng.random_range(0.1..0.9),
        rho_c: rng.random_range(0.1..0.9),
        nugget: 0.0,
    };
    s.variance = VarianceComponents::from_heritability(0.8).unwrap();
    s
}

#[test]
fn evolve_finds_exhaustive_optimum_on_toy_fields() {
    let mut rng = restart_rng(4, 0);
    let mut hits = 0;
    for seed in 0..20 {
        let spec = toy_spec(&mut rng);
        let problem = WithinProblem::single_location(&spec, ObjectiveConfig::truncated(2)).unwrap();
        let best = exhaustive_best(&problem).unwrap();
        assert_eq!(best.evaluated, 720);
        let cfg = EngineConfig {
            np: 8,
            lambda: 0.5,
            strategy: Strategy::Rand2Best,
            max_evals: 2000,
            restarts: 3,
            seed,
        };
        let out = evolve(&problem, &cfg, &mut Quiet).unwrap();
        assert!(out.best.fitness >= best.best_value - 1e-12);
        if (out.best.fitness - best.best_value).abs() <= 1e-10 {
            hits += 1;
        }
    }
    assert!(hits >= 19, "{hits} of 20");
}
