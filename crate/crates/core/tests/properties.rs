//! Property tests for the invariants that hold across all inputs rather
//! than at specific values.

use listlab::concepts::{
    class_from_str, class_to_string, empirical_loss, list_loss, Concept, ConceptClass, Domain,
    LabelSpace, LabeledExample, ListHypothesis, Sample,
};
use listlab::dims::{monotone_dim, SearchBudget};
use listlab::trees::{chain_type, ImplicitTree};
use num::rational::Ratio;
use proptest::prelude::*;

fn class_strategy() -> impl Strategy<Value = ConceptClass> {
    (2usize..=4, 2usize..=4).prop_flat_map(|(n, l)| {
        proptest::collection::vec(proptest::collection::vec(0..l as u16, n), 1..10).prop_map(
            move |rows| {
                ConceptClass::new(
                    Domain::new(n).unwrap(),
                    LabelSpace::new(l).unwrap(),
                    rows.into_iter().map(Concept::new).collect(),
                )
                .unwrap()
            },
        )
    })
}

proptest! {
    #[test]
    fn class_serialization_round_trips(class in class_strategy()) {
        let text = class_to_string(&class);
        let back = class_from_str(&text).unwrap();
        prop_assert_eq!(class, back);
    }

    #[test]
    fn empirical_loss_is_the_exact_miss_fraction(
        pred in proptest::collection::vec(proptest::sample::subsequence(vec![0u16, 1, 2, 3], 2), 1..6),
        raw in proptest::collection::vec((0usize..6, 0u16..4), 1..12),
    ) {
        let labels = LabelSpace::new(4).unwrap();
        let h = ListHypothesis::new(labels, 2, pred.clone()).unwrap();
        let examples: Vec<LabeledExample> = raw
            .into_iter()
            .map(|(p, y)| LabeledExample { point: p % pred.len(), label: y })
            .collect();
        let sample = Sample::new(examples.clone());
        let loss = empirical_loss(&h, &sample).unwrap();
        prop_assert!(loss >= Ratio::new(0, 1) && loss <= Ratio::new(1, 1));
        let misses: u64 = examples
            .iter()
            .map(|ex| u64::from(list_loss(&h, ex).unwrap()))
            .sum();
        prop_assert_eq!(loss, Ratio::new(misses, examples.len() as u64));
        // realizability is exactly zero loss
        prop_assert_eq!(loss == Ratio::new(0, 1), misses == 0);
    }

    #[test]
    fn monotone_dim_is_invariant_under_label_permutation(
        class in class_strategy(),
        perm_seed in 0u64..64,
    ) {
        let l = class.labels().count();
        // a seeded permutation of the labels
        let mut perm: Vec<u16> = (0..l as u16).collect();
        for i in (1..l).rev() {
            let j = (listlab::rng::indexed_uniform(perm_seed, "perm", &[i as u64], (i + 1) as u64))
                as usize;
            perm.swap(i, j);
        }
        let k = 1;
        let base = monotone_dim(&class, k, SearchBudget::default()).unwrap().value;
        let relabeled: Vec<Concept> = class
            .concepts()
            .iter()
            .map(|c| Concept::new(c.values().iter().map(|&y| perm[y as usize]).collect()))
            .collect();
        let rl = ConceptClass::new(class.domain(), class.labels(), relabeled).unwrap();
        prop_assert_eq!(monotone_dim(&rl, k, SearchBudget::default()).unwrap().value, base);
    }

    #[test]
    fn chain_types_are_shift_invariant(
        turns in proptest::collection::vec(0u8..3, 1..6),
        prefix in proptest::collection::vec(0u8..3, 0..4),
        cut_seed in 0u64..32,
    ) {
        // build a chain along the branch given by `turns`, then embed it
        // below `prefix`: its type is unchanged
        let tree = ImplicitTree::new(3, 32).unwrap();
        let mut chain: Vec<Vec<u8>> = Vec::new();
        let mut cur: Vec<u8> = Vec::new();
        for (i, &t) in turns.iter().enumerate() {
            if listlab::rng::indexed_uniform(cut_seed, "cut", &[i as u64], 2) == 0 {
                chain.push(cur.clone());
            }
            cur.push(t);
        }
        chain.push(cur);
        let ty = chain_type(&tree, &chain).unwrap();
        let shifted: Vec<Vec<u8>> = chain
            .iter()
            .map(|v| prefix.iter().chain(v.iter()).copied().collect())
            .collect();
        prop_assert_eq!(chain_type(&tree, &shifted).unwrap(), ty);
    }
}
