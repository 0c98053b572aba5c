use nalgebra::DVector;
use proptest::prelude::*;

use varcycle::cycle::{forcing_term, reduce_to_cycle, simulate_cycle, ScalarNoise};
use varcycle::model::{build_transition_matrix, validate_params, NoiseSpec, RawParams};
use varcycle::simulate::{aggregates, sample_noise_path, simulate_recursive};

fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, n).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

fn config() -> impl Strategy<Value = RawParams> {
    (2usize..=6).prop_flat_map(|n| {
        (Just(n), 0.01f64..1.2, 0.01f64..1.2, simplex(n), simplex(n))
            .prop_map(|(n, alpha, beta, a, b)| RawParams { n, alpha, beta, a, b })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn aggregate_obeys_cycle_equation(raw in config(), seed in any::<u64>()) {
        let p = validate_params(&raw).unwrap();
        let n = p.n();
        let noise = sample_noise_path(&NoiseSpec::isotropic(n, 1.0), &p, 200, seed).unwrap();
        let z0 = DVector::from_fn(2 * n, |i, _| (i as f64 * 0.37).sin());
        let tr = simulate_recursive(&build_transition_matrix(&p), &z0, &noise).unwrap();
        let x = aggregates(&tr, &p).unwrap().xbar;
        let model = reduce_to_cycle(p.alpha(), p.beta());
        let scalar = ScalarNoise::from_vector_noise(&noise, &p);

        // The scalar recursion started from the aggregate reproduces it.
        let y = simulate_cycle(&model, &scalar, x[0], x[1], 200).unwrap();
        let scale = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for t in 0..=200 {
            prop_assert!((x[t] - y[t]).abs() < 1e-9 * scale);
        }
        for t in 0..199 {
            let h = forcing_term(&scalar, p.alpha(), p.beta(), t).unwrap();
            prop_assert!(model.residual(x[t], x[t + 1], x[t + 2], h).abs() < 1e-10 * scale.max(h.abs()));
        }
    }
}
