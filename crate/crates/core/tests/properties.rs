use faer::Mat;
use fieldtrial_core::design::{
    BetweenProblem, Genotype, Location, LocationSize, TrialSpec, WithinProblem, WithinStart,
};
use fieldtrial_core::engine::{
    de_step, evolve, hamming, interchange, restart_rng, EngineConfig, Permutation,
    PermutationProblem, Quiet, Strategy as DeStrategy,
};
use fieldtrial_core::model::{
    objective, FieldLayout, ObjectiveConfig, ResidualModel,
};
use fieldtrial_core::Result;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn perm(d: usize) -> impl Strategy<Value = Permutation> {
    Just((0..d).collect::<Vec<_>>())
        .prop_shuffle()
        .prop_map(|v| Permutation::new(v).unwrap())
}

fn perms3() -> impl Strategy<Value = (Permutation, Permutation, Permutation)> {
    (1usize..12).prop_flat_map(|d| (perm(d), perm(d), perm(d)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn hamming_is_a_metric((p, q, r) in perms3()) {
        let pq = hamming(&p, &q).unwrap();
        prop_assert_eq!(pq, hamming(&q, &p).unwrap());
        prop_assert_eq!(pq == 0, p == q);
        prop_assert!(pq <= hamming(&p, &r).unwrap() + hamming(&r, &q).unwrap());
        prop_assert!(pq != 1);
    }

    #[test]
    fn interchange_is_an_involution_at_distance_two(
        (p, i, j) in (2usize..12).prop_flat_map(|d| (perm(d), 0..d, 0..d))
    ) {
        prop_assume!(i != j);
        let q = interchange(&p, i, j).unwrap();
        prop_assert_eq!(hamming(&p, &q).unwrap(), 2);
        prop_assert_eq!(interchange(&q, i, j).unwrap(), p);
    }
}

/// Random quadratic assignment instance.
struct Qap {
    flow: Vec<Vec<f64>>,
    dist: Vec<Vec<f64>>,
}

impl Qap {
    fn random(d: usize, seed: u64) -> Self {
        let mut rng = restart_rng(seed, 99);
        let mut m = || {
            (0..d)
                .map(|_| (0..d).map(|_| rng.random_range(0.0..10.0)).collect())
                .collect()
        };
        Self { flow: m(), dist: m() }
    }
}

impl PermutationProblem for Qap {
    fn dimension(&self) -> usize {
        self.flow.len()
    }
    fn evaluate(&self, p: &Permutation) -> Result<f64> {
        let d = self.dimension();
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                s += self.flow[i][j] * self.dist[p[i]][p[j]];
            }
        }
        Ok(s)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn population_best_never_worsens(seed in any::<u64>(), d in 4usize..8, s in 0usize..3) {
        let q = Qap::random(d, seed);
        let cfg = EngineConfig {
            np: 5,
            lambda: 0.4,
            strategy: DeStrategy::ALL[s],
            max_evals: 40,
            restarts: 2,
            seed,
        };
        let out = evolve(&q, &cfg, &mut Quiet).unwrap();
        for r in 0..2 {
            let v: Vec<f64> = out.trace.restart(r).map(|p| p.best_objective).collect();
            prop_assert!(v.windows(2).all(|w| w[1] <= w[0]));
        }
        prop_assert_eq!(out.best.fitness, q.evaluate(&out.best.perm).unwrap());
    }
}

fn between_spec() -> TrialSpec {
    let g = (0..24)
        .map(|i| Genotype::experimental(format!("g{i}"), Some(format!("F{}", i % 3))))
        .collect();
    let l = (0..4)
        .map(|i| Location {
            id: format!("L{i}"),
            size: LocationSize::Plots(12),
            check_reps: None,
        })
        .collect();
    let mut s = TrialSpec::new(g, l);
    s.presence = 2;
    s
}

#[test]
fn feasibility_closed_under_ten_thousand_steps() {
    let spec = between_spec();
    let p = BetweenProblem::new(&spec, ObjectiveConfig::truncated(3)).unwrap();
    let mut rng = restart_rng(17, 0);
    let mut cur = p.random_initial(&mut rng).unwrap();
    for step in 0..10_000 {
        let n = rng.random_range(1..6);
        cur = de_step(&cur, n, &p, &mut rng).unwrap();
        assert!(p.is_feasible(&cur), "infeasible after step {step}");
    }
}

fn within_spec() -> TrialSpec {
    let mut g: Vec<Genotype> = (0..9)
        .map(|i| Genotype::experimental(format!("e{i}"), Some(format!("F{}", i % 2))))
        .collect();
    g.push(Genotype::check("c1", None));
    g.push(Genotype::check("c2", None));
    let mut s = TrialSpec::new(
        g,
        vec![Location {
            id: "f".into(),
            size: LocationSize::Layout(FieldLayout::rect(3, 5).unwrap()),
            check_reps: None,
        }],
    );
    s.check_reps.insert("c1".into(), 3);
    s.check_reps.insert("c2".into(), 3);
    s.residual = ResidualModel::Ar1xAr1 {
        rho_r: 0.6,
        rho_c: 0.4,
        nugget: 0.1,
    };
    s
}

#[test]
fn identical_check_swaps_leave_objective_unchanged() {
    let spec = within_spec();
    let p = WithinProblem::single_location(&spec, ObjectiveConfig::truncated(3)).unwrap();
    let mut rng = restart_rng(5, 0);
    for _ in 0..1000 {
        let perm = p.start(WithinStart::Random, &spec, &mut rng);
        let placement = p.placement(&perm);
        let check = spec.genotype_index(if rng.random_bool(0.5) { "c1" } else { "c2" }).unwrap();
        let mut at: Vec<usize> = (0..15).filter(|&i| placement.plots[i] == check).collect();
        at.shuffle(&mut rng);
        let swapped = interchange(&perm, at[0], at[1]).unwrap();
        assert_eq!(p.evaluate(&perm).unwrap(), p.evaluate(&swapped).unwrap());
    }
}

fn random_spd(n: usize, rng: &mut impl Rng) -> Mat<f64> {
    let a = Mat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let mut s = &a * a.transpose();
    for i in 0..n {
        s[(i, i)] += 0.5;
    }
    s
}

#[test]
fn all_eigenvalues_equal_full_trace() {
    let mut rng = restart_rng(11, 0);
    for _ in 0..1000 {
        let n = rng.random_range(1..9);
        let pev = random_spd(n, &mut rng);
        let a = objective(pev.as_ref(), &ObjectiveConfig::truncated(n)).unwrap();
        let b = objective(pev.as_ref(), &ObjectiveConfig::full_trace()).unwrap();
        assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn relabelling_locations_keeps_objective() {
    // identity kinship, equal locations: swapping two whole locations' contents
    let spec = between_spec();
    let p = BetweenProblem::new(&spec, ObjectiveConfig::truncated(2)).unwrap();
    let mut rng = restart_rng(23, 0);
    for _ in 0..20 {
        let perm = p.random_initial(&mut rng).unwrap();
        let mut v = perm.clone().into_vec();
        let (a, b) = v.split_at_mut(12);
        a.swap_with_slice(&mut b[..12]);
        let moved = Permutation::new(v).unwrap();
        let x = p.evaluate(&perm).unwrap();
        let y = p.evaluate(&moved).unwrap();
        assert!((x - y).abs() <= 1e-10 * x.abs(), "{x} vs {y}");
    }
}

#[test]
fn design_matrices_match_replication() {
    let spec = between_spec();
    let p = BetweenProblem::new(&spec, ObjectiveConfig::truncated(2)).unwrap();
    let mut rng = restart_rng(29, 0);
    for _ in 0..50 {
        let perm = p.random_initial(&mut rng).unwrap();
        let d = p.design_matrices(&perm).unwrap();
        d.validate_incidence().unwrap();
        for j in 0..d.z.ncols() {
            let s: f64 = (0..d.z.nrows()).map(|i| d.z[(i, j)]).sum();
            assert_eq!(s, 2.0);
        }
        for j in 0..d.x.ncols() {
            let s: f64 = (0..d.x.nrows()).map(|i| d.x[(i, j)]).sum();
            assert_eq!(s, 12.0);
        }
    }
}
