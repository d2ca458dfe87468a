use gembed_tensor::{Adam, Tape, Tensor};
use proptest::prelude::*;

proptest! {
    #[test]
    fn softmax_rows_are_distributions(
        rows in 1usize..5,
        vals in prop::collection::vec(-30.0f64..30.0, 20)
    ) {
        let cols = 4;
        let data = vals[..rows * cols].to_vec();
        let mut t = Tape::new();
        let x = t.constant(Tensor::matrix(rows, cols, data).unwrap()).unwrap();
        let y = t.softmax_rows(x).unwrap();
        for row in t.value(y).chunks(cols) {
            prop_assert!(row.iter().all(|v| *v >= 0.0));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn adam_with_zero_lr_is_noop(
        vals in prop::collection::vec(-5.0f64..5.0, 1..8),
        grads in prop::collection::vec(-5.0f64..5.0, 8),
        steps in 1usize..4
    ) {
        let mut p = Tensor::vector(vals.clone()).trainable();
        p.accumulate_grad(&grads[..vals.len()]).unwrap();
        let mut opt = Adam::new(0.0);
        for _ in 0..steps {
            opt.step(&mut [&mut p]).unwrap();
        }
        prop_assert!(p.data().iter().zip(&vals).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}
