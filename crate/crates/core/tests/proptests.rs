use lonelywalks_core::kernel::{JumpKernel, TorusGeometry, TorusKernel};
use lonelywalks_core::seeding::replica_rng;
use lonelywalks_core::sim::{simulate_eta, step, BranchRule, EtaModel, EventKind, InitialLaw, Occupancy};
use proptest::prelude::*;

fn rules() -> impl Strategy<Value = BranchRule> {
    prop_oneof![
        (0.0..3.0f64).prop_map(BranchRule::lonely),
        (0.0..2.0f64).prop_map(|c| BranchRule::Linear { c }),
        (0.0..3.0f64, 1u32..4).prop_map(|(gamma, j)| BranchRule::JStar { gamma, j }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn steps_change_mass_by_at_most_one(
        counts in prop::collection::vec(0u32..4, 6),
        rule in rules(),
        seed in any::<u64>(),
    ) {
        let g = TorusGeometry::cube(1, 6).unwrap();
        let tk = TorusKernel::new(&JumpKernel::simple(1).unwrap(), &g).unwrap();
        let mut occ = Occupancy::from_counts(&g, rule, &counts).unwrap();
        let mut rng = replica_rng(seed, "prop-step", 0);
        let mut t = 0.0;
        for _ in 0..200 {
            if occ.total() == 0 {
                break;
            }
            let before = occ.counts().to_vec();
            let ev = step(&mut occ, &tk, &mut rng, t).unwrap();
            prop_assert!(ev.time >= t);
            t = ev.time;
            let after = occ.counts();
            match ev.kind {
                EventKind::Jump { from, to } => {
                    prop_assert!(before[from] >= 1);
                    prop_assert_ne!(from, to);
                    prop_assert_eq!(after[to], before[to] + 1);
                    prop_assert_eq!(after[from] + 1, before[from]);
                }
                EventKind::Birth { site } => {
                    prop_assert!(rule.rate(before[site]) > 0.0);
                    prop_assert_eq!(after[site], before[site] + 1);
                }
                EventKind::Death { site } => {
                    prop_assert!(rule.rate(before[site]) > 0.0);
                    prop_assert_eq!(after[site] + 1, before[site]);
                }
            }
            occ.check_invariants().unwrap();
        }
    }

    #[test]
    fn same_seed_same_log(seed in any::<u64>(), gamma in 0.0..2.0f64) {
        let g = TorusGeometry::cube(1, 10).unwrap();
        let model = EtaModel::new(
            JumpKernel::simple(1).unwrap(),
            g.clone(),
            BranchRule::lonely(gamma),
            InitialLaw::Poisson { lambda: 0.8 },
        )
        .unwrap();
        let times = [0.5, 1.0, 2.0];
        let a = simulate_eta(&model, &times, &mut replica_rng(seed, "prop-log", 0), true).unwrap();
        let b = simulate_eta(&model, &times, &mut replica_rng(seed, "prop-log", 0), true).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.replay(&g, &times).unwrap(), a.snapshots);
    }
}
