//! Invariants checked over randomly generated inputs.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use chimps::circuit::{brick_1d, grid_2d, named_gate, random_1q, Circuit, GateSet};
use chimps::metrics::exact_fidelity;
use chimps::mps::EntryKind;
use chimps::tensor::{contract, cut_spectrum, svd, Tensor};
use chimps::{Grid, GroupedMpsState, Grouping, MpsState, StateVector, C64};

const TWO_QUBIT: [&str; 4] = ["CZ", "CX", "iSWAP", "iS_pi/6"];

fn random_tensor(shape: Vec<usize>, seed: u64) -> Tensor {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(shape, |_| C64::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5))
}

fn combine(a: &Tensor, b: &Tensor, c: C64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x + c * y).collect();
    Tensor::new(a.shape().to_vec(), data).unwrap()
}

fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config(32))]

    #[test]
    fn contraction_is_bilinear(
        (i, j, k) in (1usize..5, 1usize..5, 1usize..5),
        seed in any::<u64>(),
        re in -2.0f64..2.0,
        im in -2.0f64..2.0,
    ) {
        let a1 = random_tensor(vec![i, j], seed);
        let a2 = random_tensor(vec![i, j], seed ^ 1);
        let b = random_tensor(vec![j, k], seed ^ 2);
        let c = C64::new(re, im);
        let lhs = contract(&combine(&a1, &a2, c), &b, &[(1, 0)]).unwrap();
        let rhs = combine(
            &contract(&a1, &b, &[(1, 0)]).unwrap(),
            &contract(&a2, &b, &[(1, 0)]).unwrap(),
            c,
        );
        prop_assert!(max_diff(lhs.data(), rhs.data()) < 1e-12);
    }

    #[test]
    fn svd_reconstructs(dims in prop::collection::vec(1usize..5, 2..5), split in 1usize..4, seed in any::<u64>()) {
        let split = split.min(dims.len() - 1);
        let t = random_tensor(dims.clone(), seed);
        let left: Vec<usize> = (0..split).collect();
        let res = svd(&t, &left).unwrap();
        prop_assert!(res.s.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(max_diff(res.reconstruct().data(), t.data()) < 1e-12);
    }

    #[test]
    fn cut_fidelity_grows_with_the_cap(mut s in prop::collection::vec(0.0f64..1.0, 1..20)) {
        s.sort_by(|a, b| b.total_cmp(a));
        let mut last = 0.0;
        for chi in 1..=s.len() + 2 {
            let cut = cut_spectrum(&s, chi);
            prop_assert!(cut.fidelity >= last);
            prop_assert!(cut.fidelity <= 1.0);
            if chi >= cut.rank {
                prop_assert_eq!(cut.fidelity, 1.0);
            }
            last = cut.fidelity;
        }
    }

    #[test]
    fn disjoint_gates_commute(seed in any::<u64>(), tag in prop::sample::select(&TWO_QUBIT[..])) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let n = 6;
        let mut base = StateVector::zero(n).unwrap();
        for q in 0..n {
            base.apply(&random_1q(&mut r).on(&[q]).unwrap()).unwrap();
        }
        let g1 = named_gate(tag).unwrap().on(&[0, 1]).unwrap();
        let g2 = named_gate(tag).unwrap().on(&[4, 2]).unwrap();
        let one = random_1q(&mut r).on(&[5]).unwrap();
        let mut a = base.clone();
        let mut b = base;
        for g in [&g1, &g2, &one] {
            a.apply(g).unwrap();
        }
        for g in [&one, &g2, &g1] {
            b.apply(g).unwrap();
        }
        prop_assert!(max_diff(a.amplitudes(), b.amplitudes()) < 1e-12);
        prop_assert!((a.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uncapped_mps_equals_the_state_vector(
        n in 2usize..9,
        depth in 1usize..12,
        seed in any::<u64>(),
        tag in prop::sample::select(&TWO_QUBIT[..]),
    ) {
        let c = brick_1d(n, depth, seed, tag).unwrap();
        let mut mps = MpsState::zero(n, 1 << (n / 2)).unwrap();
        mps.run_circuit(&c).unwrap();
        let mut sv = StateVector::zero(n).unwrap();
        sv.run_circuit(&c).unwrap();
        prop_assert!(mps.log().entries().iter().all(|e| e.f == 1.0));
        prop_assert!(max_diff(mps.to_statevector().unwrap().amplitudes(), sv.amplitudes()) < 1e-10);
        prop_assert!((mps.norm_sqr() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn circuit_text_round_trips(n in 2usize..10, depth in 0usize..8, seed in any::<u64>()) {
        let c = brick_1d(n, depth, seed, "iS_pi/6").unwrap();
        let back = Circuit::from_text(&c.to_text()).unwrap();
        prop_assert_eq!(back, c);
    }
}

proptest! {
    #![proptest_config(config(16))]

    #[test]
    fn truncated_runs_respect_their_bounds(n in 6usize..11, chi in 2usize..6, seed in any::<u64>()) {
        let c = brick_1d(n, 10, seed, "CZ").unwrap();
        let mut mps = MpsState::zero(n, chi).unwrap();
        mps.run_circuit(&c).unwrap();
        let mut sv = StateVector::zero(n).unwrap();
        sv.run_circuit(&c).unwrap();
        let exact = exact_fidelity(&mps, &sv).unwrap();
        let log = mps.log();
        prop_assert!(log.overlap_lower_bound() <= exact + 1e-9);
        prop_assert!(mps.bond_dims().iter().all(|&b| b <= chi));
        prop_assert!((mps.norm_sqr() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn windowed_average_matches_recomputation(n in 6usize..11, chi in 2usize..5, seed in any::<u64>()) {
        let c = brick_1d(n, 12, seed, "iSWAP").unwrap();
        let mut mps = MpsState::zero(n, chi).unwrap();
        mps.run_circuit(&c).unwrap();
        let log = mps.log();
        for depth in 1usize..=12 {
            let window: Vec<f64> = log
                .entries()
                .iter()
                .filter(|e| e.kind == EntryKind::Gate && (depth.saturating_sub(1)..=depth).contains(&e.depth))
                .map(|e| e.f.ln())
                .collect();
            let expected = (!window.is_empty()).then(|| (window.iter().sum::<f64>() / window.len() as f64).exp());
            match (log.windowed_f_av(depth), expected) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12),
                (a, b) => prop_assert_eq!(a, b),
            }
        }
    }

    #[test]
    fn low_rank_gates_are_exact(n in 4usize..9, chi in 1usize..6, seed in any::<u64>()) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let mut mps = MpsState::zero(n, chi).unwrap();
        let cz = named_gate("CZ").unwrap();
        for _ in 0..30 {
            let q = r.random_range(0..n);
            mps.apply_1q(&random_1q(&mut r).matrix, q).unwrap();
            let site = r.random_range(0..n - 1);
            let report = mps.apply_2q_report(&cz.matrix, site).unwrap();
            let smax = report.spectrum[0];
            let rank = report.spectrum.iter().filter(|&&s| s > 1e-12 * smax).count();
            if rank <= chi {
                prop_assert_eq!(report.f, 1.0);
            }
            prop_assert!(report.bond <= chi);
        }
    }

    #[test]
    fn cross_group_spectra_are_bounded_by_four_chi(chi in 1usize..4, seed in any::<u64>()) {
        let grid = Grid::parse("4x2").unwrap();
        let g = Grouping::parse("[1^4]", &grid).unwrap();
        let mut state = GroupedMpsState::zero(&g, chi).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let cz = named_gate("CZ").unwrap();
        let edges = grid.edges();
        for _ in 0..20 {
            for q in 0..8 {
                state.apply_gate(&random_1q(&mut r).on(&[q]).unwrap()).unwrap();
            }
            let e = edges[r.random_range(0..edges.len())];
            let site = g.locate(e.left).unwrap().0;
            let before = state.bond_dims()[site];
            let report = state.apply_across_groups_report(&cz.matrix, e.left, e.right).unwrap();
            let smax = report.spectrum[0];
            let rank = report.spectrum.iter().filter(|&&s| s > 1e-12 * smax).count();
            prop_assert!(rank <= 4 * before.max(1));
            prop_assert!(report.bond <= chi);
        }
    }

    #[test]
    fn coarser_groupings_log_no_more_entries(seed in any::<u64>(), chi in 2usize..8) {
        let grid = Grid::parse("4,3,4,3").unwrap();
        let c = grid_2d(&grid, 6, seed, &GateSet::for_two_qubit("CZ").unwrap()).unwrap();
        let mut counts = Vec::new();
        for tag in ["[1^4]", "[2,1,1]", "[2,2]", "[4]"] {
            let g = Grouping::parse(tag, &grid).unwrap();
            let mut s = GroupedMpsState::zero(&g, chi).unwrap();
            s.run_circuit(&c).unwrap();
            prop_assert!(s.log().entries().iter().all(|e| e.kind == EntryKind::Gate));
            counts.push(s.log().len());
        }
        prop_assert!(counts.windows(2).all(|w| w[0] >= w[1]), "{:?}", counts);
        prop_assert_eq!(counts[3], 0);
    }

    #[test]
    fn regroup_round_trip_is_exact(seed in any::<u64>()) {
        let grid = Grid::parse("2,1,2,2,1").unwrap();
        let c = grid_2d(&grid, 5, seed, &GateSet::for_two_qubit("iSWAP").unwrap()).unwrap();
        let a = Grouping::parse("[2,1,2]", &grid).unwrap();
        let b = Grouping::parse("[1,3,1]", &grid).unwrap();
        let mut s = GroupedMpsState::zero(&a, 1 << 8).unwrap();
        s.run_circuit(&c).unwrap();
        let before = s.to_statevector().unwrap();
        let fs = s.regroup(&b).unwrap();
        prop_assert!(fs.iter().all(|&f| f == 1.0));
        s.regroup(&a).unwrap();
        let after = s.to_statevector().unwrap();
        prop_assert!(max_diff(before.amplitudes(), after.amplitudes()) < 1e-10);
    }
}
