//! Small numeric helpers shared by the evaluators and the decoder.

/// `ln Σ exp(x)`; an empty or all `-inf` slice gives `-inf`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub fn softmax_in_place(values: &mut [f64]) {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in values.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in values.iter_mut() {
        *v /= total;
    }
}

pub fn log_softmax_in_place(values: &mut [f64]) {
    let norm = log_sum_exp(values);
    for v in values.iter_mut() {
        *v -= norm;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn handles_infinities() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, 0.0]), 0.0);
    }

    #[test]
    fn large_values_do_not_overflow() {
        let got = log_sum_exp(&[1234.0, 1232.0]);
        let want = 1232.0 + (2f64.exp() + 1.0).ln();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn softmax_is_shift_invariant() {
        let mut a = vec![0.3, -1.2, 2.5, 0.0];
        let mut b: Vec<f64> = a.iter().map(|x| x + 17.25).collect();
        softmax_in_place(&mut a);
        softmax_in_place(&mut b);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
