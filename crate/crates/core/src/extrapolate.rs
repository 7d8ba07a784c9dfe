//! Polynomial extrapolation of a sequence `f(h_k)` to `h = 0`.

use num_complex::Complex64;

/// Lagrange weights `w_k` with `p(0) = sum_k w_k f(h_k)` for the polynomial
/// through all nodes.
pub fn zero_weights(nodes: &[f64]) -> Vec<f64> {
    (0..nodes.len())
        .map(|k| {
            nodes
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != k)
                .map(|(_, &hj)| hj / (hj - nodes[k]))
                .product()
        })
        .collect()
}

pub fn to_zero(nodes: &[f64], values: &[Complex64]) -> Complex64 {
    zero_weights(nodes)
        .iter()
        .zip(values)
        .map(|(w, v)| v * *w)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_polynomials() {
        let nodes = [0.4, 0.2, 0.1];
        let f = |h: f64| Complex64::new(1.0 + 2.0 * h - 3.0 * h * h, h);
        let vals: Vec<_> = nodes.iter().map(|&h| f(h)).collect();
        assert!((to_zero(&nodes, &vals) - Complex64::new(1.0, 0.0)).norm() < 1e-13);
        let w = zero_weights(&nodes);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(
            (w[0] - 1.0 / 3.0).abs() < 1e-14
                && (w[1] + 2.0).abs() < 1e-14
                && (w[2] - 8.0 / 3.0).abs() < 1e-14
        );
    }

    #[test]
    fn single_node_is_identity() {
        assert_eq!(zero_weights(&[0.3]), vec![1.0]);
    }
}
