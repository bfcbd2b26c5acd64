use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use symclust::diag::{contrast, diagnostics_report, one_way_anova, specificity, ContrastFlag};
use symclust::dissim::{partition_criterion, sq_euclidean, unit_leader_dissim};
use symclust::hclust::{agglomerate, cut};
use symclust::ingest::{build_dataset, compute_weight, CauseMapping, RateRecord, StandardPopulation2D};
use symclust::leader::{compute_leader, run_leader_method, LeaderConfig};
use symclust::synth::{random_composition, random_dataset};
use symclust::{CategorySchema, Cluster, Composition, Dataset, Partition, VariableSchema};

fn dataset(seed: u64, n: usize, p: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_dataset(&mut rng, n, p, 7, 0.01..10.0).unwrap()
}

fn raw_composition() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, 2..10).prop_filter("positive mass", |v| v.iter().sum::<f64>() > 1e-3)
}

fn random_labels(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    (0..n).map(|i| if i < k { i } else { rng.random_range(0..k) }).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn composition_validation_is_idempotent(raw in raw_composition()) {
        let total: f64 = raw.iter().sum();
        let scaled: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let once = Composition::new(scaled, 1e-6).unwrap();
        prop_assert_eq!(symclust::numeric::sum(once.values().iter().copied()), 1.0);
        let twice = Composition::new(once.values().to_vec(), 1e-9).unwrap();
        prop_assert_eq!(once.values(), twice.values());
    }

    #[test]
    fn sq_euclidean_is_symmetric_and_bounded(seed in any::<u64>(), m in 2usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_composition(&mut rng, m, 0.5);
        let b = random_composition(&mut rng, m, 0.5);
        let d = sq_euclidean(&a, &b).unwrap();
        prop_assert_eq!(d, sq_euclidean(&b, &a).unwrap());
        prop_assert!((0.0..=2.0).contains(&d));
        prop_assert_eq!(sq_euclidean(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn dissimilarity_is_linear_in_weights(seed in any::<u64>(), c in 0.1f64..50.0) {
        let ds = dataset(seed, 3, 4);
        let scaled = ds.with_scaled_weights(c).unwrap();
        let leader = compute_leader(&[&ds.units()[1], &ds.units()[2]]).unwrap();
        let base = unit_leader_dissim(&ds.units()[0], &leader).unwrap();
        let s = unit_leader_dissim(&scaled.units()[0], &leader).unwrap();
        prop_assert!((s - c * base).abs() <= 1e-12 * (c * base).max(1e-300));
    }

    #[test]
    fn leader_lies_in_member_hull(seed in any::<u64>(), n in 1usize..8) {
        let ds = dataset(seed, n, 3);
        let members: Vec<_> = ds.units().iter().collect();
        let leader = compute_leader(&members).unwrap();
        for (j, comp) in leader.components().iter().enumerate() {
            prop_assert_eq!(symclust::numeric::sum(comp.values().iter().copied()), 1.0);
            for (l, &v) in comp.values().iter().enumerate() {
                let lo = members.iter().map(|u| u.descriptions()[j].values()[l]).fold(f64::INFINITY, f64::min);
                let hi = members.iter().map(|u| u.descriptions()[j].values()[l]).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn criterion_is_additive_over_clusters(seed in any::<u64>(), k in 1usize..5) {
        let ds = dataset(seed, 10, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let labels = random_labels(&mut rng, 10, k);
        let partition = Partition::from_labels(&ds, &labels).unwrap();
        let total = partition_criterion(&partition, &ds).unwrap();
        let by_cluster: f64 = partition
            .clusters()
            .iter()
            .map(|c| symclust::dissim::cluster_error(c, &ds).unwrap())
            .sum();
        prop_assert!((total - by_cluster).abs() <= 1e-12 * total.max(1.0));
        prop_assert!(total >= 0.0);
    }

    #[test]
    fn leader_trace_never_increases(seed in any::<u64>(), k in 1usize..6) {
        let ds = dataset(seed, 20, 3);
        let run = run_leader_method(&ds, &LeaderConfig::new(k).with_seed(seed)).unwrap();
        prop_assert!(run.criterion_trace.windows(2).all(|w| w[1] <= w[0]));
        prop_assert_eq!(run.partition.len(), k);
        let recomputed = partition_criterion(&run.partition, &ds).unwrap();
        prop_assert!((recomputed - run.criterion()).abs() <= 1e-9 * recomputed.max(1.0));
    }

    #[test]
    fn hierarchy_heights_sum_to_root_error(seed in any::<u64>(), n in 2usize..12) {
        let ds = dataset(seed, n, 3);
        let d = agglomerate(&ds, false).unwrap();
        prop_assert_eq!(d.merges().len(), n - 1);
        let heights: f64 = d.merges().iter().map(|m| m.height).sum();
        let all = Cluster::from_members(&ds, (0..n).collect()).unwrap();
        let root_err = symclust::dissim::cluster_error(&all, &ds).unwrap();
        prop_assert!((heights - root_err).abs() <= 1e-9 * root_err.max(1.0));
        for k in 1..=n {
            prop_assert_eq!(cut(&d, k, &ds).unwrap().len(), k);
        }
    }

    #[test]
    fn specificity_is_symmetric(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_composition(&mut rng, 7, 0.5);
        let b = random_composition(&mut rng, 7, 0.5);
        let s = specificity(&a, &b).unwrap();
        prop_assert_eq!(s, specificity(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&s));
    }

    #[test]
    fn contrast_sign_and_magnitude(r_c in 0.0f64..1.0, r_s in 0.0f64..1.0) {
        let c = contrast(r_c, r_s).unwrap();
        match c.flag {
            ContrastFlag::BothZero => prop_assert_eq!(c.value, 1.0),
            ContrastFlag::OneZero => prop_assert!(c.value.is_infinite()),
            ContrastFlag::Defined => {
                prop_assert!(c.value.abs() >= 1.0);
                if r_c > r_s { prop_assert!(c.value >= 1.0) }
                if r_c < r_s { prop_assert!(c.value <= -1.0) }
            }
        }
    }

    #[test]
    fn cluster_leaders_average_to_global_leader(seed in any::<u64>(), k in 1usize..5) {
        let ds = dataset(seed, 12, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
        let partition = Partition::from_labels(&ds, &random_labels(&mut rng, 12, k)).unwrap();
        let global = compute_leader(&ds.units().iter().collect::<Vec<_>>()).unwrap();
        for j in 0..ds.num_variables() {
            let total: f64 = partition.clusters().iter().map(|c| c.agg_weights()[j]).sum();
            for l in 0..ds.num_categories() {
                let mixed: f64 = partition
                    .clusters()
                    .iter()
                    .map(|c| c.agg_weights()[j] * c.leader().components()[j].values()[l])
                    .sum::<f64>() / total;
                prop_assert!((mixed - global.components()[j].values()[l]).abs() <= 1e-12);
            }
        }
        let report = diagnostics_report(&partition, &ds, 1.25).unwrap();
        prop_assert_eq!(report.clusters.len(), partition.len());
    }

    #[test]
    fn bonferroni_never_lowers_p(seed in any::<u64>(), k in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let groups: Vec<(usize, Vec<f64>)> = (0..k)
            .map(|g| (g, (0..rng.random_range(2..6)).map(|_| rng.random_range(0.0..10.0)).collect()))
            .collect();
        let result = one_way_anova("x", &groups).unwrap();
        prop_assert!((0.0..=1.0).contains(&result.p_value));
        prop_assert_eq!(result.comparisons.len(), k * (k - 1) / 2);
        for c in &result.comparisons {
            prop_assert!(c.adjusted_p_value >= c.p_value && c.adjusted_p_value <= 1.0);
        }
    }

    #[test]
    fn weight_is_linear_in_deaths(deaths in 0.0f64..1e5, pop in 1.0f64..1e7, std in 1.0f64..1e6, c in 0.5f64..20.0) {
        let w = compute_weight(deaths, pop, std).unwrap();
        let wc = compute_weight(c * deaths, pop, std).unwrap();
        prop_assert!((wc - c * w).abs() <= 1e-12 * (c * w).max(1e-300));
    }

    #[test]
    fn ingest_ignores_row_order_and_recovers_counts(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cats = CategorySchema::mortality();
        let vars = VariableSchema::young_adults();
        let codes = ["C34", "G40", "I21", "J18", "V89", "X70", "R99", "D48.9"];
        let mut records = Vec::new();
        let mut expected: BTreeMap<(String, String), (f64, Vec<f64>)> = BTreeMap::new();
        for country in ["AA", "BB", "CC"] {
            for var in vars.names() {
                let pop = rng.random_range(1e4..1e6f64).round();
                let mut counts = vec![0.0; cats.len()];
                for code in codes {
                    let deaths = rng.random_range(0..200) as f64;
                    let category = match &code[..1] {
                        "C" | "D" => "Neop",
                        "G" => "Nerv",
                        "I" => "Circ",
                        "J" => "Resp",
                        "V" => "Acc",
                        "X" => "Suic",
                        _ => "Oth",
                    };
                    counts[cats.position(category).unwrap()] += deaths;
                    records.push(RateRecord {
                        country: country.into(),
                        variable: var.clone(),
                        cause_code: code.into(),
                        deaths,
                        population: pop,
                    });
                }
                expected.insert((country.into(), var.clone()), (pop, counts));
            }
        }
        let std = StandardPopulation2D::new(vars.names().iter().map(|v| (v.clone(), 1000.0)).collect()).unwrap();
        let mapping = CauseMapping::mortality();
        let ds = build_dataset(&records, &std, &mapping, &cats, &vars).unwrap();
        records.shuffle(&mut rng);
        let shuffled = build_dataset(&records, &std, &mapping, &cats, &vars).unwrap();
        prop_assert_eq!(&ds, &shuffled);
        for unit in ds.units() {
            for (j, var) in vars.names().iter().enumerate() {
                let (pop, counts) = &expected[&(unit.id().to_string(), var.clone())];
                let total: f64 = counts.iter().sum();
                if total == 0.0 {
                    prop_assert_eq!(unit.weights()[j], 0.0);
                    continue;
                }
                let w = unit.weights()[j];
                prop_assert!((w - total * 1000.0 / pop).abs() <= 1e-12 * w);
                // weight * population / std recovers the death counts
                for (l, &x) in unit.descriptions()[j].values().iter().enumerate() {
                    prop_assert!((x * w * pop / 1000.0 - counts[l]).abs() <= 1e-9 * total);
                }
            }
        }
    }
}
