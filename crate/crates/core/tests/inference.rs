mod common;

use common::*;
use hyperspn::circuit::*;
use hyperspn::matrix::BinaryMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn structure(n: usize, k: usize, r: usize, seed: u64) -> CircuitStructure {
    CircuitStructure::build(StructureConfig::new(n, k, r, seed)).unwrap()
}

#[test]
fn log_density_matches_naive_oracle() {
    let s = structure(6, 3, 2, 1);
    let w = random_weights(&s, 7);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..50 {
        let states = random_states(6, &mut rng);
        let got = log_density(&s, &w, &Evidence::from_states(states.clone())).unwrap();
        let want = naive_prob(&s, &w, &states).ln();
        assert_close(got, want, 1e-12, "log density");
    }
}

#[test]
fn conditional_matches_enumerated_ratio() {
    let s = structure(4, 2, 2, 3);
    let w = random_weights(&s, 11);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    while checked < 30 {
        let q = random_states(4, &mut rng);
        let c = random_states(4, &mut rng);
        let (qe, ce) = (Evidence::from_states(q), Evidence::from_states(c.clone()));
        let Ok(joint) = qe.union(&ce) else { continue };
        let got = conditional_log(&s, &w, &qe, &ce).unwrap();
        let want =
            (enumerated_marginal(&s, &w, joint.states()) / enumerated_marginal(&s, &w, &c)).ln();
        assert_close(got, want, 1e-9, "conditional");
        checked += 1;
    }
}

#[test]
fn empty_condition_gives_the_marginal() {
    let s = structure(5, 2, 3, 0);
    let w = random_weights(&s, 2);
    let q = Evidence::marginal(5)
        .with(1, VarState::One)
        .with(4, VarState::Zero);
    let cond = conditional_log(&s, &w, &q, &Evidence::marginal(5)).unwrap();
    assert_eq!(cond, log_density(&s, &w, &q).unwrap());
}

#[test]
fn sampling_matches_enumerated_distribution() {
    let s = structure(4, 3, 2, 8);
    let w = random_weights(&s, 21);
    let samples = sample(&s, &w, 100_000, 99).unwrap();
    let mut counts = [0usize; 16];
    for row in samples.iter_rows() {
        counts[row
            .iter()
            .enumerate()
            .map(|(v, &b)| (b as usize) << v)
            .sum::<usize>()] += 1;
    }
    let tv: f64 = assignments(4)
        .iter()
        .enumerate()
        .map(|(m, x)| {
            let states: Vec<VarState> = x.iter().map(|&b| VarState::from_bit(b)).collect();
            (counts[m] as f64 / 1e5 - naive_prob(&s, &w, &states)).abs()
        })
        .sum::<f64>()
        / 2.0;
    assert!(tv < 0.01, "total variation {tv}");
}

#[test]
fn row_and_evidence_paths_agree() {
    let s = structure(9, 3, 2, 4);
    let w = random_weights(&s, 4);
    let data = sample(&s, &w, 40, 1).unwrap();
    let by_rows = log_density_rows(&s, &w, &data).unwrap();
    let ev: Vec<Evidence> = data.iter_rows().map(Evidence::from_bits).collect();
    assert_eq!(by_rows, eval_log_density(&s, &w, &ev).unwrap());
    let wrong = BinaryMatrix::zeros(2, 8);
    assert!(matches!(
        log_density_rows(&s, &w, &wrong),
        Err(EvalError::EvidenceLength { .. })
    ));
}

#[test]
fn streaming_bound_on_large_trees() {
    for (n, bound) in [(16, 5), (1024, 11), (1000, 10), (1556, 11)] {
        let s = structure(n, 2, 1, 3);
        let w = random_weights(&s, 3);
        let e = Evidence::from_bits(&vec![1; n]);
        let out = stream_eval(&s, &w, &e).unwrap();
        assert!(
            out.peak_live_vectors <= bound,
            "n={n}: {}",
            out.peak_live_vectors
        );
        assert_eq!(
            out.log_prob.to_bits(),
            log_density(&s, &w, &e).unwrap().to_bits()
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn normalizes_over_all_assignments(n in 2usize..9, k in 1usize..4, r in 1usize..4, l in 1usize..4, seed in any::<u64>()) {
        let s = CircuitStructure::build(StructureConfig::new(n, k, r, seed).with_leaves(l)).unwrap();
        let w = random_weights(&s, seed ^ 0x5eed);
        let batch: Vec<Evidence> = assignments(n).iter().map(|x| Evidence::from_bits(x)).collect();
        let total: f64 = eval_log_density(&s, &w, &batch).unwrap().iter().map(|v| v.exp()).sum();
        prop_assert!((total - 1.0).abs() < 1e-9, "total {}", total);
    }

    #[test]
    fn marginals_are_consistent(n in 2usize..8, k in 1usize..4, r in 1usize..3, seed in any::<u64>(), var_seed in any::<u64>()) {
        let s = CircuitStructure::build(StructureConfig::new(n, k, r, seed)).unwrap();
        let w = random_weights(&s, seed.wrapping_add(1));
        let mut rng = ChaCha8Rng::seed_from_u64(var_seed);
        let mut states = random_states(n, &mut rng);
        let var = (var_seed % n as u64) as usize;
        states[var] = VarState::Marginal;
        let e = Evidence::from_states(states);
        let p = log_density(&s, &w, &e).unwrap().exp();
        let p0 = log_density(&s, &w, &e.clone().with(var, VarState::Zero)).unwrap().exp();
        let p1 = log_density(&s, &w, &e.with(var, VarState::One)).unwrap().exp();
        prop_assert!((p - p0 - p1).abs() < 1e-9);
    }

    #[test]
    fn streaming_is_bit_identical(n in 2usize..200, k in 1usize..4, r in 1usize..3, seed in any::<u64>()) {
        let s = CircuitStructure::build(StructureConfig::new(n, k, r, seed)).unwrap();
        let w = random_weights(&s, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = Evidence::from_states(random_states(n, &mut rng));
        let out = stream_eval(&s, &w, &e).unwrap();
        prop_assert_eq!(out.log_prob.to_bits(), log_density(&s, &w, &e).unwrap().to_bits());
        let bound = (n as f64).log2().floor() as usize + 1;
        prop_assert!(out.peak_live_vectors <= bound);
    }

    #[test]
    fn evaluation_is_deterministic(n in 2usize..30, seed in any::<u64>()) {
        let a = CircuitStructure::build(StructureConfig::new(n, 2, 2, seed)).unwrap();
        let b = CircuitStructure::build(StructureConfig::new(n, 2, 2, seed)).unwrap();
        prop_assert_eq!(&a, &b);
        let w = random_weights(&a, seed);
        let xs = sample(&a, &w, 5, seed).unwrap();
        prop_assert_eq!(&xs, &sample(&b, &w, 5, seed).unwrap());
        prop_assert_eq!(log_density_rows(&a, &w, &xs).unwrap(), log_density_rows(&b, &w, &xs).unwrap());
    }
}
