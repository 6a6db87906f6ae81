//! Dense-network numeric engine: matrices, dense layers, softmax and
//! cross-entropy, hand-derived backpropagation, plain mini-batch SGD.

mod checkpoint;
mod matrix;
mod network;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use matrix::Matrix;
pub use network::{
    backward, dense_forward, forward, forward_with, init_network, sgd_step, DenseLayer,
    ForwardTrace, Gradients, LayerGradient, Network, SiteTransform,
};

use crate::error::{Error, Result};

/// Probabilities are clamped to this floor before taking the log.
pub const LOG_CLAMP: f64 = 1e-12;

pub fn relu(z: &Matrix) -> Matrix {
    z.map(|x| x.max(0.0))
}

/// Row-wise softmax with max subtraction.
pub fn softmax(z: &Matrix) -> Result<Matrix> {
    if z.as_slice().iter().any(|x| x.is_nan()) {
        return Err(Error::usage("softmax input contains NaN"));
    }
    let mut out = z.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for x in row.iter_mut() {
            *x = (*x - max).exp();
            sum += *x;
        }
        for x in row.iter_mut() {
            *x /= sum;
        }
    }
    Ok(out)
}

/// Mean over the batch of `-Σ y_c log(max(ŷ_c, 1e-12))`.
pub fn cross_entropy(y_true: &Matrix, y_prob: &Matrix) -> Result<f64> {
    if y_true.shape() != y_prob.shape() {
        return Err(Error::shape(
            "cross_entropy",
            format!("{:?}", y_true.shape()),
            format!("{:?}", y_prob.shape()),
        ));
    }
    if y_true.rows() == 0 {
        return Err(Error::usage("cross_entropy of an empty batch"));
    }
    let total: f64 = y_true
        .as_slice()
        .iter()
        .zip(y_prob.as_slice())
        .filter(|(&y, _)| y != 0.0)
        .map(|(&y, &p)| -y * p.max(LOG_CLAMP).ln())
        .sum();
    Ok(total / y_true.rows() as f64)
}

/// Index of the largest entry of each row; ties go to the lowest index.
pub fn argmax_rows(m: &Matrix) -> Vec<usize> {
    (0..m.rows())
        .map(|r| {
            let row = m.row(r);
            let mut best = 0;
            for (k, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_examples() {
        let z = Matrix::from_rows(&[[-1.0, 0.0, 2.0]]).unwrap();
        assert_eq!(relu(&z).as_slice(), &[0.0, 0.0, 2.0]);
        let neg = Matrix::filled(2, 3, -0.5);
        assert!(relu(&neg).as_slice().iter().all(|&x| x == 0.0));
        let pos = Matrix::from_rows(&[[0.0, 1.5], [3.0, 7.0]]).unwrap();
        assert_eq!(relu(&pos), pos);
    }

    #[test]
    fn softmax_examples() {
        let p = softmax(&Matrix::zeros(1, 4)).unwrap();
        for &x in p.as_slice() {
            assert!((x - 0.25).abs() < 1e-15);
        }
        let p = softmax(&Matrix::from_rows(&[[1f64.ln(), 3f64.ln()]]).unwrap()).unwrap();
        assert!((p.get(0, 0) - 0.25).abs() < 1e-15);
        assert!((p.get(0, 1) - 0.75).abs() < 1e-15);
        let p = softmax(&Matrix::from_rows(&[[1000.0, 1000.0]]).unwrap()).unwrap();
        assert_eq!(p.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn softmax_shift_invariant() {
        let z = Matrix::from_rows(&[[0.3, -1.2, 2.5], [4.0, 4.0, -9.0]]).unwrap();
        let shifted = z.map(|x| x + 123.0);
        let (a, b) = (softmax(&z).unwrap(), softmax(&shifted).unwrap());
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_rejects_nan() {
        let z = Matrix::from_rows(&[[0.0, f64::NAN]]).unwrap();
        assert!(matches!(softmax(&z), Err(Error::Usage(_))));
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn cross_entropy_examples() {
        let y = Matrix::from_rows(&[[0.0, 1.0, 0.0]]).unwrap();
        assert!(cross_entropy(&y, &y).unwrap().abs() < 1e-15);

        let mut y10 = Matrix::zeros(1, 10);
        y10.set(0, 7, 1.0);
        let uniform = Matrix::filled(1, 10, 0.1);
        let ce = cross_entropy(&y10, &uniform).unwrap();
        assert!((ce - 10f64.ln()).abs() < 1e-12);
        assert!((ce - 2.302585).abs() < 1e-6);

        let y2 = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let p2 = Matrix::from_rows(&[[0.8, 0.2], [0.4, 0.6]]).unwrap();
        let a = -(0.8f64.ln());
        let b = -(0.6f64.ln());
        assert!((cross_entropy(&y2, &p2).unwrap() - (a + b) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn cross_entropy_clamps_zero_probability() {
        let y = Matrix::from_rows(&[[1.0, 0.0]]).unwrap();
        let p = Matrix::from_rows(&[[0.0, 1.0]]).unwrap();
        let ce = cross_entropy(&y, &p).unwrap();
        assert!((ce + LOG_CLAMP.ln()).abs() < 1e-12);
        assert!(cross_entropy(&y, &Matrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn argmax_ties_pick_first() {
        let m = Matrix::from_rows(&[[0.2, 0.5, 0.5], [0.9, 0.0, 0.1]]).unwrap();
        assert_eq!(argmax_rows(&m), vec![1, 0]);
    }
}
