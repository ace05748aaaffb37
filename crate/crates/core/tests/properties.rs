use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use oranfl::config::{parse_config_str, to_config_string};
use oranfl::fl::{select_clients, ClientHistory, SelectionStrategy};
use oranfl::net::{pathway_latency, ClientNode, Pathway, PathwayStage, RatProfile, UnitKind};
use oranfl::output::fmt_num;
use oranfl::ric::{
    action_outage_probability, allocate_prbs, outage_guard, select_pathway, Action, AllocationKind,
    AllocationPolicy, GuardOutcome,
};
use oranfl::rng::seeded;
use oranfl::sim::SimConfig;

fn rat(levels: Vec<f64>, threshold: f64) -> RatProfile {
    RatProfile {
        rat_id: 0,
        label: "r".into(),
        prb_count: 10,
        prb_bandwidth_hz: 1e5,
        base_latency_s: 0.001,
        power_levels_w: levels,
        idle_power_w: 0.0,
        outage_snr_threshold: threshold,
    }
}

fn increasing_levels() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..2.0, 1..6).prop_map(|steps| {
        let mut acc = 0.0;
        steps.into_iter().map(|s| {
            acc += s;
            acc
        })
        .collect()
    })
}

fn pathway_strategy(id: u32) -> impl Strategy<Value = Pathway> {
    (prop::collection::vec(1e-4f64..0.05, 1..4), 1e3f64..1e9).prop_map(move |(lat, cap)| Pathway {
        pathway_id: id,
        stages: lat
            .into_iter()
            .zip([UnitKind::RadioUnit, UnitKind::DistributedUnit, UnitKind::CentralisedUnit])
            .map(|(latency_s, unit)| PathwayStage { unit, latency_s })
            .collect(),
        capacity_bps: cap,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn guard_never_lowers_power_and_respects_bound(
        levels in increasing_levels(),
        start in 0usize..6,
        snr in 0.1f64..500.0,
        threshold in 0.1f64..5.0,
        eps in 0.001f64..0.5,
    ) {
        let r = rat(levels, threshold);
        let start = start % r.power_levels_w.len();
        let client = ClientNode {
            client_id: 0,
            mean_snr: BTreeMap::from([(0, snr)]),
            dataset_size: 1,
            compute_rate: 1.0,
            compute_power_w: 0.0,
        };
        match outage_guard(Action::new(0, start), &client, &r, eps) {
            GuardOutcome::Feasible(a) => {
                prop_assert!(a.power_level_index >= start);
                prop_assert!(action_outage_probability(&client, &r, a.power_level_index) <= eps);
                // The guard picks the lowest level that works.
                for lower in start..a.power_level_index {
                    prop_assert!(action_outage_probability(&client, &r, lower) > eps);
                }
            }
            GuardOutcome::Infeasible => {
                for level in start..r.power_levels_w.len() {
                    prop_assert!(action_outage_probability(&client, &r, level) > eps);
                }
            }
        }
    }

    #[test]
    fn chosen_pathway_is_never_beaten(
        paths in prop::collection::vec(0u32..1, 1..6)
            .prop_flat_map(|v| (0..v.len() as u32).map(pathway_strategy).collect::<Vec<_>>()),
        payload in 0.0f64..1e7,
        rate in 1.0f64..1e8,
    ) {
        let chosen = select_pathway(&paths, payload, rate).unwrap();
        let best = paths.iter().find(|p| p.pathway_id == chosen).unwrap();
        let best_latency = pathway_latency(best, payload, rate).unwrap();
        for p in &paths {
            prop_assert!(best_latency <= pathway_latency(p, payload, rate).unwrap());
        }
    }

    #[test]
    fn pf_utility_never_below_equal_share(
        se in prop::collection::vec(0.05f64..10.0, 1..8),
        extra in 0u32..20,
    ) {
        let prb = se.len() as u32 + extra;
        let clients: Vec<(u32, f64)> = se.iter().enumerate().map(|(i, s)| (i as u32, *s)).collect();
        let utility = |kind| {
            let a = allocate_prbs(&AllocationPolicy { kind, prb_count: prb }, &clients).unwrap();
            clients.iter().map(|(id, s)| (s * a[id] as f64).ln()).sum::<f64>()
        };
        prop_assert!(utility(AllocationKind::ProportionalFair) >= utility(AllocationKind::EqualShare) - 1e-9);
    }

    #[test]
    fn selection_is_a_nonempty_subset(
        ids in prop::collection::btree_set(0u32..50, 1..20),
        losses in prop::collection::vec(0.0f64..5.0, 20),
        seed in any::<u64>(),
        fraction in 0.01f64..1.0,
        k in 1usize..25,
        which in 0usize..4,
    ) {
        let mut history = ClientHistory::default();
        for (id, loss) in ids.iter().zip(&losses) {
            history.record(*id, *loss);
        }
        let name = SelectionStrategy::NAMES[which];
        let strategy = SelectionStrategy::from_name(name, fraction, k).unwrap();
        let chosen: BTreeSet<u32> = select_clients(&strategy, &history, &ids, &mut seeded(seed)).unwrap();
        prop_assert!(!chosen.is_empty());
        prop_assert!(chosen.is_subset(&ids));
    }

    #[test]
    fn formatted_numbers_keep_six_significant_digits(x in -1e12f64..1e12) {
        let back: f64 = fmt_num(x).parse().unwrap();
        prop_assert!((back - x).abs() <= 5e-6 * x.abs());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn config_text_round_trips(
        levels in increasing_levels(),
        snrs in prop::collection::vec(0.5f64..1e4, 2..6),
        deadline in 0.01f64..10.0,
        seeds in prop::collection::vec(any::<u64>(), 1..4),
        alpha in 0.001f64..1.0,
        enabled in any::<bool>(),
    ) {
        let pathway = Pathway {
            pathway_id: 4,
            stages: vec![PathwayStage { unit: UnitKind::DistributedUnit, latency_s: 1.0 / 3.0 }],
            capacity_bps: 12345.678,
        };
        let clients = snrs
            .iter()
            .enumerate()
            .map(|(i, s)| ClientNode {
                client_id: 10 + i as u32,
                mean_snr: BTreeMap::from([(0, *s)]),
                dataset_size: 7,
                compute_rate: 99.5,
                compute_power_w: 0.1,
            })
            .collect();
        let mut cfg = SimConfig::with_topology(vec![rat(levels, 1.0)], vec![pathway], clients);
        cfg.deadline_s = deadline.max(0.0011);
        cfg.seeds = seeds;
        cfg.controller.q.alpha = alpha;
        cfg.controller.enabled = enabled;
        let text = to_config_string(&cfg);
        prop_assert_eq!(parse_config_str(&text, None).unwrap(), cfg);
    }
}
