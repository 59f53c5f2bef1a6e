//! Clipped surrogate, combined advantage and critic losses.

pub fn combined_advantage(a_r: f64, a_c: f64, lambda: f64) -> f64 {
    a_r - lambda * a_c
}

/// `min(r A, clip(r, 1 - eps, 1 + eps) A)`, the quantity to maximise.
pub fn clipped_surrogate(ratio: f64, advantage: f64, eps: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps);
    (ratio * advantage).min(clipped * advantage)
}

/// Derivative of [`clipped_surrogate`] with respect to the ratio.
pub fn surrogate_slope(ratio: f64, advantage: f64, eps: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps);
    if ratio * advantage <= clipped * advantage {
        advantage
    } else {
        0.0
    }
}

/// Batch-averaged `(c1 (V_R - t_R)^2, c2 (V_C - t_C)^2)`.
pub fn critic_losses(
    v_r: &[f64],
    v_c: &[f64],
    t_r: &[f64],
    t_c: &[f64],
    c1: f64,
    c2: f64,
) -> (f64, f64) {
    assert!(v_r.len() == t_r.len() && v_c.len() == t_c.len() && v_r.len() == v_c.len());
    if v_r.is_empty() {
        return (0.0, 0.0);
    }
    let n = v_r.len() as f64;
    let l_r = v_r
        .iter()
        .zip(t_r)
        .map(|(v, t)| (v - t).powi(2))
        .sum::<f64>()
        * c1
        / n;
    let l_c = v_c
        .iter()
        .zip(t_c)
        .map(|(v, t)| (v - t).powi(2))
        .sum::<f64>()
        * c2
        / n;
    (l_r, l_c)
}

/// Shift to zero mean and scale to unit standard deviation.
pub fn normalize(xs: &mut [f64]) {
    if xs.is_empty() {
        return;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt() + 1e-8;
    for x in xs {
        *x = (*x - mean) / std;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn combined_examples() {
        assert_eq!(combined_advantage(0.7, 3.0, 0.0), 0.7);
        assert_eq!(combined_advantage(1.0, 0.5, 2.0), 0.0);
    }

    #[test]
    fn surrogate_examples() {
        assert_eq!(clipped_surrogate(1.0, -2.5, 0.3), -2.5);
        assert!((clipped_surrogate(1.5, 1.0, 0.08) - 1.08).abs() < 1e-12);
        assert!((clipped_surrogate(0.5, -1.0, 0.08) + 0.92).abs() < 1e-12);
    }

    #[test]
    fn slope_is_zero_only_when_clipped() {
        assert_eq!(surrogate_slope(1.5, 1.0, 0.08), 0.0);
        assert_eq!(surrogate_slope(1.5, -1.0, 0.08), -1.0);
        assert_eq!(surrogate_slope(0.5, -1.0, 0.08), 0.0);
        assert_eq!(surrogate_slope(0.5, 1.0, 0.08), 1.0);
        assert_eq!(surrogate_slope(1.02, 2.0, 0.08), 2.0);
    }

    #[test]
    fn critic_examples() {
        assert_eq!(
            critic_losses(&[1.0], &[0.0], &[3.0], &[0.0], 0.5, 0.5),
            (2.0, 0.0)
        );
        assert_eq!(
            critic_losses(&[2.0, 1.0], &[2.0, 1.0], &[2.0, 1.0], &[2.0, 1.0], 0.5, 0.5),
            (0.0, 0.0)
        );
        let (_, a) = critic_losses(&[0.0], &[1.0], &[0.0], &[3.0], 0.5, 0.5);
        let (_, b) = critic_losses(&[0.0], &[1.0], &[0.0], &[3.0], 0.5, 1.5);
        assert!((b - 3.0 * a).abs() < 1e-12);
    }

    #[test]
    fn normalize_moments() {
        let mut xs = vec![1.0, 2.0, 3.0, 4.0];
        normalize(&mut xs);
        let mean: f64 = xs.iter().sum::<f64>() / 4.0;
        let var: f64 = xs.iter().map(|x| x * x).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-6);
        let mut same = vec![2.0; 3];
        normalize(&mut same);
        assert_eq!(same, vec![0.0; 3]);
    }

    proptest! {
        #[test]
        fn larger_lambda_lowers_combined(a_r in -5.0f64..5.0, a_c in 0.01f64..5.0, l in 0.0f64..5.0, dl in 0.01f64..5.0) {
            prop_assert!(combined_advantage(a_r, a_c, l + dl) < combined_advantage(a_r, a_c, l));
        }

        #[test]
        fn surrogate_never_exceeds_unclipped(r in 0.01f64..3.0, a in -5.0f64..5.0, eps in 0.01f64..0.5) {
            prop_assert!(clipped_surrogate(r, a, eps) <= r * a + 1e-12);
        }

        #[test]
        fn slope_matches_finite_difference(r in 0.2f64..2.0, a in -5.0f64..5.0, eps in 0.05f64..0.5) {
            let h = 1e-7;
            prop_assume!((r - (1.0 - eps)).abs() > 1e-5 && (r - (1.0 + eps)).abs() > 1e-5);
            let fd = (clipped_surrogate(r + h, a, eps) - clipped_surrogate(r - h, a, eps)) / (2.0 * h);
            prop_assert!((fd - surrogate_slope(r, a, eps)).abs() < 1e-6);
        }
    }
}
