//! Shared helpers for the integration suites.
// Each suite uses a subset of these helpers; the rest are dead code there.
#![allow(dead_code)]

/// Central finite differences against analytic gradients; returns the
/// maximum relative error over all coordinates.
pub fn finite_diff_max_rel_err(
    mut loss_fn: impl FnMut(&[f64]) -> f64,
    theta: &[f64],
    analytic: &[f64],
    eps: f64,
) -> f64 {
    assert_eq!(theta.len(), analytic.len());
    let mut worst = 0.0f64;
    let mut probe = theta.to_vec();
    for i in 0..theta.len() {
        probe[i] = theta[i] + eps;
        let plus = loss_fn(&probe);
        probe[i] = theta[i] - eps;
        let minus = loss_fn(&probe);
        probe[i] = theta[i];
        let numeric = (plus - minus) / (2.0 * eps);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-6);
        let rel = (analytic[i] - numeric).abs() / denom;
        if rel > worst {
            worst = rel;
        }
    }
    worst
}

/// Deterministic pseudo-random n-gram with roughly `fill_per_mille`/1000
/// cell density.
pub fn random_ngram(rng: &mut mtp_core::rng::Rng, fill_per_mille: u64) -> mtp_core::pianoroll::NGram {
    let mut g = mtp_core::pianoroll::NGram::default();
    for row in 0..mtp_core::pianoroll::N_PITCHES {
        for t in 0..mtp_core::pianoroll::NGRAM_LEN {
            if rng.next_below(1000) < fill_per_mille {
                g.set(row, t, true);
            }
        }
    }
    g
}
