//! Closed Newton-Cotes weights on uniform nodes.

/// Weights (for unit spacing) of the closed composite rule over `n` intervals.
///
/// Even `n` uses composite Simpson. Odd `n >= 3` uses Simpson on the first
/// `n - 3` intervals and the 3/8 rule on the last three. `n = 1` is the
/// trapezoid. All weights are positive and sum to `n`.
pub fn composite_weights(n: usize) -> Vec<f64> {
    let mut w = vec![0.0; n + 1];
    match n {
        0 => {}
        1 => {
            w[0] = 0.5;
            w[1] = 0.5;
        }
        _ => {
            let simpson_end = if n.is_multiple_of(2) { n } else { n - 3 };
            let mut i = 0;
            while i < simpson_end {
                w[i] += 1.0 / 3.0;
                w[i + 1] += 4.0 / 3.0;
                w[i + 2] += 1.0 / 3.0;
                i += 2;
            }
            if n % 2 == 1 {
                let s = n - 3;
                w[s] += 3.0 / 8.0;
                w[s + 1] += 9.0 / 8.0;
                w[s + 2] += 9.0 / 8.0;
                w[s + 3] += 3.0 / 8.0;
            }
        }
    }
    w
}

/// Integral of uniformly spaced samples with spacing `h`.
pub fn integrate_uniform(values: &[f64], h: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let w = composite_weights(values.len() - 1);
    h * w.iter().zip(values).map(|(a, b)| a * b).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_interval_count() {
        for n in 0..40 {
            let s: f64 = composite_weights(n).iter().sum();
            assert!((s - n as f64).abs() < 1e-13, "n = {n}");
        }
    }

    #[test]
    fn exact_for_cubics() {
        for n in [2usize, 3, 5, 8, 9] {
            let h = 0.7 / n as f64;
            let v: Vec<f64> = (0..=n)
                .map(|i| {
                    let x = i as f64 * h;
                    1.0 - 2.0 * x + 3.0 * x * x - x * x * x
                })
                .collect();
            let exact = 0.7 - 0.49 + 0.343 - 0.7f64.powi(4) / 4.0;
            assert!((integrate_uniform(&v, h) - exact).abs() < 1e-14, "n = {n}");
        }
    }
}
