use megu_core::data::{gen_synthetic, SyntheticSpec};
use megu_core::eval::{accuracy, LabelSpace};
use megu_core::guidance::{assign_perturbing_label, relevance_vector, TransitionMatrix};
use megu_core::noise::combine;
use megu_core::numeric::softmax;
use megu_core::{Activation, Classifier, Exec, Tensor};
use proptest::prelude::*;

fn relevance() -> impl Strategy<Value = Vec<f64>> {
    (2usize..=12).prop_flat_map(|k| {
        prop::collection::vec(prop_oneof![Just(0.0), Just(0.5), 0.0f64..1.0], k)
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, ..ProptestConfig::default() })]

    #[test]
    fn perturbing_label_is_never_the_original(r in relevance(), label_seed in 0usize..64, tau in 0.01f64..0.99) {
        let k = r.len();
        let label = label_seed % k;
        match assign_perturbing_label(&r, tau, label) {
            Ok(y) => prop_assert_ne!(y, label),
            Err(e) => prop_assert!(e.to_string().contains("floor(K * tau)")),
        }
    }

    #[test]
    fn selection_is_scale_invariant(r in relevance(), label_seed in 0usize..64, tau in 0.01f64..0.99, c in 1e-3f64..1e3) {
        let label = label_seed % r.len();
        let scaled: Vec<f64> = r.iter().map(|v| v * c).collect();
        // Rounding is monotone, so order survives scaling; skip the rare
        // case where two distinct values round onto each other.
        let merged = (0..r.len()).any(|i| (0..r.len()).any(|j| r[i] < r[j] && scaled[i] == scaled[j]));
        prop_assume!(!merged);
        let a = assign_perturbing_label(&r, tau, label).ok();
        let b = assign_perturbing_label(&scaled, tau, label).ok();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn relevance_ignores_mass_at_original_label(k in 2usize..8, seed in any::<u64>(), label_seed in 0usize..8, boost in 0.0f64..50.0) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let label = label_seed % k;
        let sim: Vec<Vec<f64>> = (0..k).map(|_| (0..k).map(|_| rng.gen_range(0.01..1.0)).collect()).collect();
        let t = TransitionMatrix::from_similarity(&sim, 1, "test").unwrap();
        let logits: Vec<f64> = (0..k).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let p = softmax(&logits);
        let mut q = p.clone();
        q[label] += boost;
        let (a, b) = (relevance_vector(&t, &p, label).unwrap(), relevance_vector(&t, &q, label).unwrap());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn similarity_normalizes_to_column_stochastic(k in 1usize..12, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let sim: Vec<Vec<f64>> = (0..k).map(|_| (0..k).map(|_| rng.gen_range(1e-9..1.0)).collect()).collect();
        let t = TransitionMatrix::from_similarity(&sim, 3, "test").unwrap();
        for col in &t.columns {
            prop_assert!(col.iter().all(|&v| v >= 0.0));
            prop_assert!((col.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn combine_endpoints_are_exact(v in prop::collection::vec(-5.0f64..5.0, 1..32), w in prop::collection::vec(-5.0f64..5.0, 1..32)) {
        let n = v.len().min(w.len());
        let p = Tensor::new(vec![1, n], v[..n].to_vec()).unwrap();
        let q = Tensor::new(vec![1, n], w[..n].to_vec()).unwrap();
        prop_assert_eq!(combine(&p, &q, 1.0).unwrap(), p.clone());
        prop_assert_eq!(combine(&p, &q, 0.0).unwrap(), q);
    }

    #[test]
    fn loss_is_bounded(logits in prop::collection::vec(-20.0f64..20.0, 2..10), label_seed in 0usize..10) {
        let k = logits.len();
        let label = label_seed % k;
        let t = Tensor::new(vec![1, k], logits.clone()).unwrap();
        let loss = megu_core::numeric::softmax_ce_loss(&t, &[label]).unwrap();
        let spread = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - logits.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!(loss >= 0.0);
        prop_assert!(loss <= (k as f64).ln() + spread + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn parallel_forward_is_bitwise_sequential(seed in any::<u64>(), rows in 1usize..150) {
        use rand::{Rng, SeedableRng};
        let m = Classifier::mlp(9, &[7, 5], 4, Activation::Softplus, seed).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x = Tensor::new(vec![rows, 9], (0..rows * 9).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let y: Vec<usize> = (0..rows).map(|_| rng.gen_range(0..4)).collect();
        prop_assert_eq!(m.forward_with(&x, Exec::Parallel).unwrap(), m.forward_with(&x, Exec::Sequential).unwrap());
        let (la, ga) = m.loss_and_grad_with(&x, &y, Exec::Parallel).unwrap();
        let (lb, gb) = m.loss_and_grad_with(&x, &y, Exec::Sequential).unwrap();
        prop_assert_eq!(la.to_bits(), lb.to_bits());
        prop_assert_eq!(ga.tensors, gb.tensors);
    }

    #[test]
    fn accuracy_is_a_percentage_and_coarse_dominates(seed in 0u64..1000) {
        let spec = SyntheticSpec { dim: 32, per_class: 6, ..SyntheticSpec::grouped(3, 2, 2) };
        let ds = gen_synthetic(&spec, seed).unwrap();
        let m = Classifier::mlp(32, &[8], 6, Activation::Tanh, seed).unwrap();
        let fine = accuracy(&m, &ds.inputs, &ds.labels, LabelSpace::Fine).unwrap();
        let map = ds.coarse_map().unwrap();
        let coarse = accuracy(&m, &ds.inputs, ds.coarse_labels.as_ref().unwrap(), LabelSpace::Coarse(&map)).unwrap();
        prop_assert!((0.0..=100.0).contains(&fine));
        prop_assert!((0.0..=100.0).contains(&coarse));
        prop_assert!(coarse >= fine);
    }
}
