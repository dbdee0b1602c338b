use proptest::prelude::*;

use bridgewalk::bridge::{backward_table, sample_bridge};
use bridgewalk::cli::fmt_float;
use bridgewalk::kernels::{first_return_probabilities, return_probabilities, verify_moment_properties};
use bridgewalk::range_stats::range_of_path;
use bridgewalk::rng::trial_rng;
use bridgewalk::walk_models::LampState;
use bridgewalk::{make_model, ModelSpec, Vertex, WalkModel};

fn model_strategy() -> impl Strategy<Value = WalkModel> {
    prop_oneof![
        (2u32..5).prop_map(|b| WalkModel::tree(b).unwrap()),
        (1usize..4, prop::sample::subsequence(vec![1i64, 2, 3], 1..3))
            .prop_map(|(dim, jumps)| make_model(&ModelSpec::Lattice { dim, jumps }).unwrap()),
        Just(WalkModel::lamplighter(1).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sampled_bridges_close_up(model in model_strategy(), half in 1usize..8, seed in any::<u64>()) {
        let n = 2 * half;
        let table = backward_table(&model, n).unwrap();
        let mut rng = trial_rng(seed, 0);
        let path = sample_bridge(&model, &table, &mut rng).unwrap();
        let e = model.canonical_key(&model.identity());
        prop_assert_eq!(path.vertices.len(), n + 1);
        prop_assert_eq!(model.canonical_key(&path.vertices[0]), e.clone());
        prop_assert_eq!(model.canonical_key(&path.vertices[n]), e);
        for w in path.vertices.windows(2) {
            let next = model.canonical_key(&w[1]);
            prop_assert!(model.neighbors(&w[0]).unwrap().iter().any(|(x, _)| model.canonical_key(x) == next));
        }
        let r = range_of_path(&model, &path.vertices);
        prop_assert!(r >= 2 && r <= n);
    }

    #[test]
    fn neighbor_laws_are_probability_vectors(model in model_strategy(), seed in any::<u64>()) {
        let mut rng = trial_rng(seed, 1);
        let path = bridgewalk::bridge::sample_walk(&model, 10, &mut rng);
        for v in &path.vertices {
            let nb = model.neighbors(v).unwrap();
            prop_assert_eq!(nb.len(), model.degree());
            let total: f64 = nb.iter().map(|x| x.1).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn kernels_are_consistent(model in model_strategy()) {
        let n = match model.dim() { Some(3) => 40, _ => 60 };
        let u = return_probabilities(&model, n).unwrap();
        let f = first_return_probabilities(&u).unwrap();
        prop_assert!(f.f.iter().all(|&x| x >= 0.0));
        prop_assert!(f.partial.iter().all(|&x| x <= 1.0 + 1e-12));
        prop_assert!(verify_moment_properties(&u).is_empty());
        for k in 1..=n {
            if k % model.period() != 0 {
                prop_assert_eq!(u.u[k], 0.0);
            }
        }
    }

    #[test]
    fn csv_floats_round_trip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(fmt_float(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn lamplighter_keys_identify_states(sites in prop::collection::btree_set(-5i64..5, 0..6), pos in -5i64..5) {
        let model = WalkModel::lamplighter(1).unwrap();
        let state = LampState { lamps: sites.iter().map(|&s| vec![s]).collect(), position: vec![pos] };
        let mut toggled = state.clone();
        toggled.flip_here();
        let a = model.canonical_key(&Vertex::Lamplighter(state.clone()));
        let b = model.canonical_key(&Vertex::Lamplighter(toggled.clone()));
        prop_assert_ne!(&a, &b);
        toggled.flip_here();
        prop_assert_eq!(model.canonical_key(&Vertex::Lamplighter(toggled)), a);
    }
}
