use biqgemm::quantizer::{quantization_error, quantize_greedy};
use biqgemm::DenseMatrix;
use proptest::prelude::*;

fn matrix() -> impl Strategy<Value = DenseMatrix<f64>> {
    (1usize..16, 1usize..48).prop_flat_map(|(m, n)| {
        prop::collection::vec(-10.0f64..10.0, m * n).prop_map(move |v| DenseMatrix::from_vec(m, n, v).unwrap())
    })
}

proptest! {
    #[test]
    fn error_never_grows_with_more_planes(w in matrix()) {
        let q = quantize_greedy(&w, 5).unwrap();
        // Once a row is fit exactly the error is rounding noise of order eps·‖W‖.
        let floor = 1e-12 * w.frobenius_norm();
        let mut prev = w.frobenius_norm();
        for beta in 1..=5 {
            let e = quantization_error(&w, &q.truncate(beta).unwrap()).unwrap();
            prop_assert!(e <= prev + floor, "beta {}: {} > {}", beta, e, prev);
            prev = e;
        }
    }

    #[test]
    fn first_plane_is_sign_with_mean_magnitude(w in matrix()) {
        let q = quantize_greedy(&w, 3).unwrap();
        for r in 0..w.rows() {
            let mean = w.row(r).iter().map(|v| v.abs()).sum::<f64>() / w.cols() as f64;
            prop_assert_eq!(q.alphas()[0][r], mean);
            for (c, &v) in w.row(r).iter().enumerate() {
                prop_assert_eq!(q.planes()[0].get(r, c), if v >= 0.0 { 1 } else { -1 });
            }
            for plane in q.alphas() {
                prop_assert!(plane[r] >= 0.0);
            }
        }
    }

    #[test]
    fn truncation_matches_fresh_fit(w in matrix(), beta in 1usize..4) {
        let long = quantize_greedy(&w, 4).unwrap();
        prop_assert_eq!(long.truncate(beta).unwrap(), quantize_greedy(&w, beta).unwrap());
    }
}
