//! Property-based invariants across the public API.

use proptest::prelude::*;
use typmatch::conditions::{converse_cer, seeded_region, SeededRegion};
use typmatch::graph::{accuracy, upper_triangle, AttributedGraph};
use typmatch::perm::{
    derangement_count, induced_edge_permutation, set_partitions, standard_permutation, ut_index, ut_pair, Permutation,
};
use typmatch::rng::{derive_seed, substream};
use typmatch::typicality::{
    correction_terms, exponent_e_alpha, exponent_ehat, exponent_eprime_alpha, is_strongly_typical, joint_type,
    kl_divergence, mutual_information, CorrectionConfig, JointDistribution, MinimizerConfig, TypicalBox,
};

fn perm(n: usize, seed: u64) -> Permutation {
    Permutation::random(n, &mut substream(seed, "prop-perm", n as u64))
}

fn joint(lx: usize, ly: usize, seed: u64) -> JointDistribution {
    JointDistribution::random(vec![lx, ly], &mut substream(seed, "prop-joint", 0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inverse_and_composition(n in 1usize..40, a in any::<u64>(), b in any::<u64>(), c in any::<u64>()) {
        let (p, q, r) = (perm(n, a), perm(n, b), perm(n, c));
        prop_assert_eq!(p.compose(&p.inverse()).unwrap(), Permutation::identity(n));
        let left = p.compose(&q).unwrap().compose(&r).unwrap();
        let right = p.compose(&q.compose(&r).unwrap()).unwrap();
        prop_assert_eq!(left, right);
        // (p∘q)⁻¹ = q⁻¹∘p⁻¹
        prop_assert_eq!(p.compose(&q).unwrap().inverse(), q.inverse().compose(&p.inverse()).unwrap());
    }

    #[test]
    fn sequence_action_round_trips(n in 1usize..40, s in any::<u64>()) {
        let p = perm(n, s);
        let seq: Vec<usize> = (100..100 + n).collect();
        let moved = p.apply_to_sequence(&seq).unwrap();
        prop_assert_eq!(p.inverse().apply_to_sequence(&moved).unwrap(), seq);
    }

    #[test]
    fn signature_is_a_class_invariant(n in 1usize..30, s in any::<u64>(), t in any::<u64>()) {
        let p = perm(n, s);
        let sig = p.cycle_signature();
        prop_assert_eq!(sig.fixed + sig.lengths.iter().sum::<usize>(), n);
        prop_assert_eq!(sig.fixed, p.fixed_points());
        let std = standard_permutation(&sig).unwrap();
        prop_assert_eq!(std.cycle_signature(), sig.clone());
        // conjugation preserves the cycle type
        let g = perm(n, t);
        let conj = g.compose(&p).unwrap().compose(&g.inverse()).unwrap();
        prop_assert_eq!(conj.cycle_signature(), sig.clone());
        prop_assert_eq!(p.inverse().cycle_signature(), sig);
    }

    #[test]
    fn induced_edge_fixed_points(n in 2usize..25, s in any::<u64>()) {
        let p = perm(n, s);
        let sig = p.cycle_signature();
        let two_cycles = sig.lengths.iter().filter(|&&l| l == 2).count();
        let m = sig.fixed;
        prop_assert_eq!(induced_edge_permutation(&p).fixed_points(), m * m.saturating_sub(1) / 2 + two_cycles);
    }

    #[test]
    fn ut_index_bijection(n in 2usize..60, seed in any::<u64>()) {
        let len = n * (n - 1) / 2;
        let idx = (seed % len as u64) as usize;
        let (i, j) = ut_pair(n, idx);
        prop_assert!(i < j && j < n);
        prop_assert_eq!(ut_index(n, i, j), idx);
        prop_assert_eq!(ut_index(n, j, i), idx);
    }

    #[test]
    fn upper_triangle_is_label_space(n in 2usize..20, s in any::<u64>(), t in any::<u64>(), l in 2usize..4) {
        let mut rng = substream(s, "prop-graph", 0);
        let g = AttributedGraph::from_fn(n, l, |_, _| rand::Rng::gen_range(&mut rng, 0..l)).unwrap();
        let sigma = perm(n, s ^ 1);
        let pi = perm(n, t);
        let moved = g.relabel(&pi).unwrap();
        let sigma_moved = sigma.compose(&pi.inverse()).unwrap();
        prop_assert_eq!(upper_triangle(&moved, &sigma_moved).unwrap(), upper_triangle(&g, &sigma).unwrap());
    }

    #[test]
    fn accuracy_range(n in 1usize..50, s in any::<u64>(), t in any::<u64>()) {
        let a = perm(n, s);
        let b = perm(n, t);
        let acc = accuracy(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&acc));
        prop_assert_eq!(accuracy(&a, &a).unwrap(), 1.0);
        prop_assert_eq!(acc, accuracy(&b, &a).unwrap());
    }

    #[test]
    fn meet_refines_both(k in 1usize..6, i in any::<usize>(), j in any::<usize>()) {
        let parts = set_partitions(k);
        let (a, b) = (&parts[i % parts.len()], &parts[j % parts.len()]);
        let m = a.meet(b);
        prop_assert_eq!(&m, &b.meet(a));
        prop_assert!(m.block_count() >= a.block_count().max(b.block_count()));
        for block in m.blocks() {
            for w in block.windows(2) {
                prop_assert!(a.blocks().iter().any(|x| x.contains(&w[0]) && x.contains(&w[1])));
                prop_assert!(b.blocks().iter().any(|x| x.contains(&w[0]) && x.contains(&w[1])));
            }
        }
    }

    #[test]
    fn derangement_recurrence(n in 2usize..40) {
        let lhs = derangement_count(n);
        let rhs = (derangement_count(n - 1) + derangement_count(n - 2)) * (n as u64 - 1);
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn kl_is_nonnegative(s in any::<u64>(), t in any::<u64>(), l in 2usize..5) {
        let p = joint(l, 2, s);
        let q = joint(l, 2, t);
        prop_assert!(kl_divergence(p.pmf(), q.pmf()).unwrap().value() >= 0.0);
        prop_assert!(kl_divergence(p.pmf(), p.pmf()).unwrap().value().abs() < 1e-12);
        let info = mutual_information(&p).unwrap();
        prop_assert!(info >= -1e-12 && info <= (l as f64).log2() + 1e-12);
    }

    #[test]
    fn typical_box_agrees_with_predicate(s in any::<u64>(), len in 1usize..60, eps in 0.0f64..0.3) {
        let p = joint(2, 3, s);
        let mut rng = substream(s, "prop-seq", 0);
        let x: Vec<u8> = (0..len).map(|_| rand::Rng::gen_range(&mut rng, 0..2u8)).collect();
        let y: Vec<u8> = (0..len).map(|_| rand::Rng::gen_range(&mut rng, 0..3u8)).collect();
        let t = joint_type(&[&x, &y], &[2, 3]).unwrap();
        prop_assert_eq!(t.counts.iter().sum::<u64>(), len as u64);
        let bx = TypicalBox::new(&p, eps, len);
        prop_assert_eq!(bx.contains(&t.counts), is_strongly_typical(&[&x, &y], &p, eps).unwrap());
    }

    #[test]
    fn exponent_chain(s in any::<u64>(), a in 0usize..=20) {
        let p = joint(2, 2, s);
        let alpha = a as f64 / 20.0;
        let cfg = MinimizerConfig::default();
        let e = exponent_e_alpha(&p, alpha, &cfg).unwrap().value;
        let ep = exponent_eprime_alpha(&p, alpha, &cfg).unwrap().value;
        let eh = exponent_ehat(&p, alpha).unwrap();
        prop_assert!(e >= -1e-12 && ep >= -1e-12 && eh >= -1e-12);
        prop_assert!(2.0 / 3.0 * e <= eh + 1e-3);
        prop_assert!(eh <= ep + 1e-3);
    }

    #[test]
    fn corrections_shrink_with_n(s in any::<u64>(), n in 2usize..10_000) {
        let p = joint(2, 2, s);
        let cfg = CorrectionConfig::default();
        let a = correction_terms(n, &p, 0.01, 0.5, &cfg).unwrap();
        let b = correction_terms(2 * n, &p, 0.01, 0.5, &cfg).unwrap();
        prop_assert!(b.zeta < a.zeta && b.zeta_prime < a.zeta_prime);
        prop_assert_eq!(a.delta_eps, b.delta_eps);
    }

    #[test]
    fn seeded_region_grows_with_n(s in any::<u64>(), n in 4usize..100_000) {
        let p = joint(2, 2, s);
        match (seeded_region(&p, n).unwrap(), seeded_region(&p, 2 * n).unwrap()) {
            (SeededRegion::Matchable { lambda_min: a, .. }, SeededRegion::Matchable { lambda_min: b, .. }) => {
                prop_assert!(b >= a);
            }
            (SeededRegion::Unmatchable, SeededRegion::Unmatchable) => {}
            _ => prop_assert!(false, "regions disagree on matchability"),
        }
    }

    #[test]
    fn converse_is_threshold_in_information(s in any::<u64>(), n in 2usize..1000) {
        let p = joint(2, 2, s);
        let r = converse_cer(&p, n).unwrap();
        let info = mutual_information(&p).unwrap();
        prop_assert_eq!(r.satisfied, 2.0 * (n as f64).log2() / n as f64 <= info);
    }

    #[test]
    fn seed_derivation_is_keyed(m in any::<u64>(), i in any::<u64>()) {
        prop_assert_eq!(derive_seed(m, "tag", i), derive_seed(m, "tag", i));
        prop_assert_ne!(derive_seed(m, "tag", i), derive_seed(m, "other", i));
    }
}
