/// Logistic function, evaluated without overflow for large `|z|`.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of one cell, computed from its logit as
/// `max(z, 0) - z*y + ln(1 + exp(-|z|))`.
pub fn bce_with_logit(logit: f64, target: f64) -> f64 {
    logit.max(0.0) - logit * target + (-logit.abs()).exp().ln_1p()
}

/// Summed binary cross-entropy over all cells of a `B × L` batch, given
/// logits rather than probabilities so saturated cells do not lose precision.
pub fn bce_loss(logits: &[f64], targets: &[f64]) -> f64 {
    debug_assert_eq!(logits.len(), targets.len());
    logits
        .iter()
        .zip(targets)
        .map(|(&z, &y)| bce_with_logit(z, y))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saturated_logits_give_vanishing_loss() {
        assert!(bce_loss(&[30.0, -30.0], &[1.0, 0.0]) < 1e-12);
        assert!(bce_loss(&[800.0, -800.0], &[1.0, 0.0]) < 1e-300);
        assert!(bce_loss(&[800.0], &[0.0]).is_finite());
    }

    #[test]
    fn half_probabilities() {
        let l = bce_loss(&[0.0; 4], &[1.0, 0.0, 1.0, 0.0]);
        assert!((l - 4.0 * std::f64::consts::LN_2).abs() < 1e-15);
        assert!((l - 2.7726).abs() < 1e-4);
    }

    #[test]
    fn matches_direct_formula() {
        let cases = [(-2.3, 1.0), (0.7, 0.0), (1.9, 1.0), (-0.1, 0.0)];
        for (z, y) in cases {
            let p = 1.0 / (1.0 + f64::exp(-z));
            let direct = -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
            assert!((bce_with_logit(z, y) - direct).abs() < 1e-10);
        }
    }

    #[test]
    fn sigmoid_is_symmetric() {
        for z in [-50.0, -3.0, 0.0, 0.5, 40.0] {
            assert!((sigmoid(z) + sigmoid(-z) - 1.0).abs() < 1e-15);
        }
    }
}
