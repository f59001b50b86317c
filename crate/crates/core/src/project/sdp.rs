/// Bisection tolerance on the multiplier.
const TOL: f64 = 1e-10;
const MAX_ITERS: usize = 200;

/// Projects one arc block `(p_u, p_1..p_L)` onto
/// `{Σ_ℓ p_ℓ = p_u, 0 ≤ p ≤ 1}`.
///
/// Stationarity gives `p_u = clamp(a + λ)` and `p_ℓ = clamp(b_ℓ − λ)` for
/// the multiplier `λ` of the coupling row; the residual
/// `Σ_ℓ p_ℓ(λ) − p_u(λ)` is nonincreasing, so `λ` is bracketed by bisection
/// and then solved exactly on the final linear piece.
pub(crate) fn project_arc(arc: f64, labels: &[f64], out_labels: &mut [f64]) -> f64 {
    let clamp = |x: f64| x.clamp(0.0, 1.0);
    let residual = |lambda: f64| -> f64 {
        labels.iter().map(|b| clamp(b - lambda)).sum::<f64>() - clamp(arc + lambda)
    };
    let spread = labels.iter().fold(arc.abs(), |m, b| m.max(b.abs())) + 2.0;
    let (mut lo, mut hi) = (-spread, spread);
    for _ in 0..MAX_ITERS {
        if hi - lo <= TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if residual(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut lambda = 0.5 * (lo + hi);

    // exact root on the linear piece containing the bracket
    let free_labels = labels
        .iter()
        .filter(|&&b| b - lambda > 0.0 && b - lambda < 1.0)
        .count();
    let arc_free = arc + lambda > 0.0 && arc + lambda < 1.0;
    let slope = free_labels as f64 + if arc_free { 1.0 } else { 0.0 };
    if slope > 0.0 {
        let candidate = lambda + residual(lambda) / slope;
        if residual(candidate).abs() < residual(lambda).abs() {
            lambda = candidate;
        }
    }

    for (o, b) in out_labels.iter_mut().zip(labels) {
        *o = clamp(b - lambda);
    }
    clamp(arc + lambda)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_label_closed_form() {
        let mut out = [0.0];
        let u = project_arc(0.4, &[0.8], &mut out);
        assert!((u - 0.6).abs() < 1e-12 && (out[0] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn feasible_is_fixed() {
        let mut out = [0.0; 3];
        let u = project_arc(0.7, &[0.2, 0.0, 0.5], &mut out);
        assert!((u - 0.7).abs() < 1e-12);
        assert!(
            (out[0] - 0.2).abs() < 1e-12 && out[1].abs() < 1e-12 && (out[2] - 0.5).abs() < 1e-12
        );
    }

    #[test]
    fn all_negative_collapses() {
        let mut out = [0.0; 2];
        let u = project_arc(-1.0, &[-0.5, -2.0], &mut out);
        assert_eq!((u, out), (0.0, [0.0, 0.0]));
    }
}
