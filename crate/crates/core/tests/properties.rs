use lipnorm::dp_norm::{default_witnesses, dp_lower_dual, dp_upper, DpBudget, MixedTensor};
use lipnorm::hilbert_schmidt::{basis_config_lower, hs_norm, random_orthogonal, rotate_factor};
use lipnorm::io::parse_json;
use lipnorm::report::to_json_string;
use lipnorm::rng::{self, domain};
use lipnorm::summing::{certified_summing_upper, lower_bound_config, pietsch_upper_lp};
use lipnorm::{elementary_tensor, operator_norm, vector_norm, Ball, DenseTensor, MultilinearOperator, Norm, PairConfiguration, SegrePoint};
use proptest::prelude::*;

fn norm_strategy() -> impl Strategy<Value = Norm> {
    prop_oneof![Just(Norm::L1), Just(Norm::L2), Just(Norm::Inf)]
}

/// Operator with factor dims in 1..=3 (arity ≤ 3) and codomain dim ≤ 2.
fn operator_strategy() -> impl Strategy<Value = MultilinearOperator> {
    (prop::collection::vec(1usize..=3, 1..=3), 1usize..=2)
        .prop_flat_map(|(dims, m)| {
            let n = dims.len();
            let len = dims.iter().product::<usize>() * m;
            (
                Just(dims),
                Just(m),
                prop::collection::vec(-3.0f64..3.0, len),
                prop::collection::vec(norm_strategy(), n),
                norm_strategy(),
            )
        })
        .prop_map(|(dims, m, data, norms, cnorm)| {
            let mut shape = dims;
            shape.push(m);
            MultilinearOperator::new(DenseTensor::new(shape, data).unwrap(), norms, cnorm).unwrap()
        })
}

fn euclidean_strategy() -> impl Strategy<Value = MultilinearOperator> {
    operator_strategy().prop_map(|t| MultilinearOperator::euclidean(t.kernel().clone()).unwrap())
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() }
}

fn point_strategy(dims: Vec<usize>) -> impl Strategy<Value = SegrePoint> {
    dims.into_iter().map(|d| prop::collection::vec(-2.0f64..2.0, d)).collect::<Vec<_>>().prop_map(SegrePoint::new)
}

fn with_points(k: usize) -> impl Strategy<Value = (MultilinearOperator, Vec<SegrePoint>)> {
    operator_strategy().prop_flat_map(move |t| {
        let dims = t.factor_dims().to_vec();
        (Just(t), prop::collection::vec(point_strategy(dims), k))
    })
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn evaluation_is_linear_in_each_slot((t, pts) in with_points(2), a in -2.0f64..2.0, b in -2.0f64..2.0, slot in 0usize..3) {
        let k = slot % t.arity();
        let mut mixed = pts[0].clone();
        let mut other = pts[0].clone();
        mixed.factors[k] = pts[0].factors[k].iter().zip(&pts[1].factors[k]).map(|(x, y)| a * x + b * y).collect();
        other.factors[k] = pts[1].factors[k].clone();
        let lhs = t.eval(&mixed).unwrap();
        let (u, v) = (t.eval(&pts[0]).unwrap(), t.eval(&other).unwrap());
        for l in 0..lhs.len() {
            prop_assert!(close(lhs[l], a * u[l] + b * v[l], 1e-12));
        }
    }

    #[test]
    fn elementary_tensor_entries_are_products(x in prop::collection::vec(1usize..=3, 1..=3).prop_flat_map(point_strategy)) {
        let e = elementary_tensor(&x);
        let dims = x.dims();
        let mut idx = vec![0; dims.len()];
        for _ in 0..e.len() {
            let product: f64 = idx.iter().enumerate().map(|(k, &i)| x.factors[k][i]).product();
            prop_assert!(close(e.get(&idx), product, 1e-14));
            for k in (0..dims.len()).rev() {
                idx[k] += 1;
                if idx[k] < dims[k] { break; }
                idx[k] = 0;
            }
        }
    }

    #[test]
    fn evaluation_is_bounded_by_norm_upper((t, pts) in with_points(1)) {
        let bound = operator_norm(&t);
        prop_assert!(bound.certified_lower <= bound.certified_upper * (1.0 + 1e-9));
        let value = vector_norm(&t.eval(&pts[0]).unwrap(), t.codomain_norm());
        prop_assert!(value <= bound.certified_upper * pts[0].norm_product(t.factor_norms()) * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn hs_norm_is_rotation_invariant(t in euclidean_strategy(), seed in any::<u64>(), slot in 0usize..3) {
        let k = slot % t.arity();
        let mut r = rng::stream(seed, domain::SUITE, 0);
        let q = random_orthogonal(&mut r, t.factor_dims()[k]);
        let rotated = rotate_factor(&t, k, &q).unwrap();
        prop_assert!(close(hs_norm(&rotated).unwrap(), hs_norm(&t).unwrap(), 1e-12));
    }

    #[test]
    fn basis_configuration_recovers_hs_norm(t in euclidean_strategy()) {
        let frob = t.kernel().data().iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!(close(hs_norm(&t).unwrap(), frob, 1e-13));
        prop_assert!(close(basis_config_lower(&t).unwrap(), frob, 1e-9));
    }

    #[test]
    fn operator_json_round_trip_is_bit_exact(t in operator_strategy()) {
        let back: MultilinearOperator = parse_json(&to_json_string(&t), "prop").unwrap();
        let bits = |m: &MultilinearOperator| m.kernel().data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back), bits(&t));
        prop_assert_eq!(back, t);
    }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn configuration_lower_bound_is_below_certified_upper(
        (t, pts) in with_points(6),
        w in prop::collection::vec(0.1f64..1.0, 3),
        p in prop_oneof![Just(1.0), Just(2.0), Just(3.0)],
    ) {
        let pairs: Vec<_> = (0..3).map(|i| (pts[2 * i].clone(), pts[2 * i + 1].clone())).collect();
        let cfg = PairConfiguration::weighted(pairs, w).unwrap();
        if let Ok(lower) = lower_bound_config(&t, &cfg, p) {
            prop_assert!(lower.certified_lower <= certified_summing_upper(&t, p, Ball::Operator) * (1.0 + 1e-9));
        }
    }

    #[test]
    fn dictionary_lp_dominates_configuration_lower_bound(
        (t, pts) in with_points(4),
        forms in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 27), 1..4),
        p in prop_oneof![Just(1.0), Just(2.0)],
    ) {
        let pairs: Vec<_> = (0..2).map(|i| (pts[2 * i].clone(), pts[2 * i + 1].clone())).collect();
        let cfg = PairConfiguration::new(pairs).unwrap();
        let dims = t.factor_dims().to_vec();
        let len: usize = dims.iter().product();
        let dictionary: Vec<_> = forms
            .iter()
            .map(|f| MultilinearOperator::form(DenseTensor::new(dims.clone(), f[..len].to_vec()).unwrap(), t.factor_norms().to_vec()).unwrap())
            .collect();
        if let (Ok(lower), Ok(cert)) = (lower_bound_config(&t, &cfg, p), pietsch_upper_lp(&t, &cfg, &dictionary, p)) {
            if cert.feasible {
                prop_assert!(lower.certified_lower <= cert.constant * (1.0 + 1e-7) + 1e-12);
            }
        }
    }

    #[test]
    fn dp_weak_duality(t in operator_strategy(), p in prop_oneof![Just(1.5), Just(2.0), Just(3.0)], seed in any::<u64>()) {
        let z = MixedTensor::new(t.kernel().clone(), t.factor_norms().to_vec(), t.codomain_norm()).unwrap();
        let lower = dp_lower_dual(&z, p, &default_witnesses(&z, p, seed).unwrap()).unwrap();
        let upper = dp_upper(&z, p, None, &DpBudget { seed, restarts: 2, ..DpBudget::default() }).unwrap();
        prop_assert!(lower.certified_lower <= upper.report.certified_upper * (1.0 + 1e-9) + 1e-12);
    }
}
