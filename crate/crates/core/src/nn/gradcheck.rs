//! Central finite-difference check of [`ActorCritic::loss_and_grad`].

use super::network::{ActorCritic, LossSpec, Sample};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub n_params: usize,
    /// Largest `|g - fd| / max(|g|, |fd|, floor)` over all parameters.
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
}

/// Compares every analytic partial derivative against
/// `(L(p + h) - L(p - h)) / 2h`.
pub fn check_gradients(
    net: &ActorCritic,
    batch: &[Sample],
    spec: &LossSpec,
    h: f64,
    floor: f64,
) -> Result<GradCheckReport> {
    let (_, grad) = net.loss_and_grad(batch, spec)?;
    let analytic: Vec<f64> = grad.shared.iter().chain(&grad.cost).copied().collect();
    let base = net.flat();
    let mut probe = net.clone();
    let mut params = base.clone();
    let mut report = GradCheckReport {
        n_params: base.len(),
        max_rel_error: 0.0,
        worst_index: 0,
        worst_analytic: 0.0,
        worst_numeric: 0.0,
    };
    for i in 0..base.len() {
        params[i] = base[i] + h;
        probe.set_flat(&params)?;
        let plus = probe.loss(batch, spec)?.total;
        params[i] = base[i] - h;
        probe.set_flat(&params)?;
        let minus = probe.loss(batch, spec)?.total;
        params[i] = base[i];
        let fd = (plus - minus) / (2.0 * h);
        let g = analytic[i];
        let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(floor);
        if rel > report.max_rel_error {
            report = GradCheckReport {
                max_rel_error: rel,
                worst_index: i,
                worst_analytic: g,
                worst_numeric: fd,
                ..report
            };
        }
    }
    Ok(report)
}
