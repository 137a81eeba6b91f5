use biqgemm::kernel::{biqgemm, biqgemm_plane, KernelConfig, TileShape};
use biqgemm::quantizer::{dequantize, quantize_greedy, QuantizedLinear};
use biqgemm::{BinaryPlane, DenseMatrix, LutBuilder, LutLayout};
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DenseMatrix<f64>> {
    prop::collection::vec(-1.0f64..1.0, rows * cols).prop_map(move |v| DenseMatrix::from_vec(rows, cols, v).unwrap())
}

/// `(W, X)` with `W: m x n`, `X: n x b`.
fn operands(max_m: usize, max_n: usize, max_b: usize) -> impl Strategy<Value = (DenseMatrix<f64>, DenseMatrix<f64>)> {
    (1..=max_m, 1..=max_n, 1..=max_b).prop_flat_map(|(m, n, b)| (matrix(m, n), matrix(n, b)))
}

/// `Σ_i α_i ∘ (B_i · X)` by direct summation.
fn reference(q: &QuantizedLinear<f64>, x: &DenseMatrix<f64>) -> DenseMatrix<f64> {
    DenseMatrix::from_fn(q.m(), x.cols(), |r, c| {
        let mut y = 0.0;
        for (plane, alpha) in q.planes().iter().zip(q.alphas()) {
            let dot: f64 = (0..q.n()).map(|k| plane.get(r, k) as f64 * x.get(k, c)).sum();
            y += alpha[r] * dot;
        }
        y
    })
}

fn close(a: &DenseMatrix<f64>, b: &DenseMatrix<f64>, tol: f64) -> bool {
    a.shape() == b.shape() && a.relative_error(b).unwrap() <= tol
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_reference((w, x) in operands(40, 70, 8), beta in 1usize..=3, mu in 1usize..=9) {
        let q = quantize_greedy(&w, beta).unwrap();
        let y = biqgemm(&q.pack(mu).unwrap(), &x, &KernelConfig::default()).unwrap().y;
        prop_assert!(close(&y, &reference(&q, &x), 1e-12));
    }

    #[test]
    fn zero_padding_is_neutral((w, x) in operands(20, 50, 5), mu in 1usize..=8) {
        let packed = quantize_greedy(&w, 2).unwrap().pack(mu).unwrap();
        let extra = packed.groups() * mu - w.cols();
        let cfg = KernelConfig::default();
        let plain = biqgemm(&packed, &x, &cfg).unwrap().y;
        let padded = biqgemm(&packed, &x.pad_rows(extra), &cfg).unwrap().y;
        prop_assert!(plain.bitwise_eq(&padded));
    }

    #[test]
    fn tiles_workers_and_layouts_agree(
        (w, x) in operands(30, 60, 6),
        mu in 1usize..=6,
        t_w in 1usize..6,
        t_h in 1usize..12,
        workers in 1usize..=4,
        naive in any::<bool>(),
    ) {
        let packed = quantize_greedy(&w, 2).unwrap().pack(mu).unwrap();
        let base = biqgemm(&packed, &x, &KernelConfig::default()).unwrap().y;
        let builder = if naive { LutBuilder::Naive } else { LutBuilder::Dp };
        let cfg = KernelConfig::default()
            .with_tile(TileShape::new(t_w, t_h).unwrap())
            .with_workers(workers)
            .with_budget(usize::MAX);
        prop_assert!(biqgemm(&packed, &x, &cfg).unwrap().y.bitwise_eq(&base));
        for layout in [LutLayout::TableMajor, LutLayout::KeyMajor] {
            let y = biqgemm(&packed, &x, &cfg.clone().with_layout(layout)).unwrap().y;
            prop_assert!(y.bitwise_eq(&base));
        }
        let y = biqgemm(&packed, &x, &KernelConfig::default().with_builder(builder)).unwrap().y;
        prop_assert!(close(&y, &base, 1e-12));
    }

    #[test]
    fn unordered_split_stays_close((w, x) in operands(30, 90, 6), mu in 1usize..=6, t_w in 1usize..4) {
        let packed = quantize_greedy(&w, 2).unwrap().pack(mu).unwrap();
        let base = biqgemm(&packed, &x, &KernelConfig::default()).unwrap().y;
        let cfg = KernelConfig::default()
            .with_tile(TileShape::new(t_w, 4).unwrap())
            .with_workers(3)
            .with_budget(usize::MAX)
            .deterministic(false);
        prop_assert!(close(&biqgemm(&packed, &x, &cfg).unwrap().y, &base, 1e-12));
    }

    #[test]
    fn linear_in_planes((w, x) in operands(24, 48, 5), beta in 1usize..=4, mu in 1usize..=8) {
        let q = quantize_greedy(&w, beta).unwrap();
        let packed = q.pack(mu).unwrap();
        let cfg = KernelConfig::default();
        let all = biqgemm(&packed, &x, &cfg).unwrap().y;
        let per_plane: Vec<_> = packed.keys().iter().map(|k| biqgemm_plane(k, &x, &cfg).unwrap().y).collect();
        let summed = DenseMatrix::from_fn(w.rows(), x.cols(), |r, c| {
            per_plane.iter().zip(q.alphas()).map(|(y, a)| a[r] * y.get(r, c)).sum()
        });
        prop_assert!(close(&all, &summed, 1e-12));
    }

    #[test]
    fn rows_are_independent((w, x) in operands(16, 40, 4), beta in 1usize..=3, mu in 1usize..=8) {
        let cfg = KernelConfig::default();
        let full = biqgemm(&quantize_greedy(&w, beta).unwrap().pack(mu).unwrap(), &x, &cfg).unwrap().y;
        for r in 0..w.rows() {
            let single = DenseMatrix::from_rows(&[w.row(r).to_vec()]).unwrap();
            let y = biqgemm(&quantize_greedy(&single, beta).unwrap().pack(mu).unwrap(), &x, &cfg).unwrap().y;
            for c in 0..x.cols() {
                prop_assert_eq!(y.get(0, c).to_bits(), full.get(r, c).to_bits());
            }
        }
    }

    #[test]
    fn scaled_sign_rows_quantize_exactly(
        (m, n, signs) in (1usize..12, 1usize..40).prop_flat_map(|(m, n)| (Just(m), Just(n), prop::collection::vec(any::<bool>(), m * n))),
        eighths in prop::collection::vec(1u32..64, 12),
    ) {
        // Dyadic scales keep the mean of |w| exact.
        let scales: Vec<f64> = eighths.iter().map(|&k| k as f64 / 8.0).collect();
        let w = DenseMatrix::from_fn(m, n, |r, c| if signs[r * n + c] { scales[r] } else { -scales[r] });
        let q = quantize_greedy(&w, 1).unwrap();
        prop_assert_eq!(&q.planes()[0], &BinaryPlane::from_fn(m, n, |r, c| signs[r * n + c]));
        prop_assert_eq!(&q.alphas()[0][..], &scales[..m]);
        prop_assert_eq!(dequantize(&q), w);
    }
}
