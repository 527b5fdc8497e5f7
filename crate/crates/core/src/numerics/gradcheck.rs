//! Central finite differences for checking analytic gradients.

use super::Tensor;

pub const FD_STEP: f64 = 1e-6;

/// Gradients smaller than this are compared on absolute error: an entry
/// whose true gradient is exactly zero only sees roundoff (~1e-9 at this
/// step size), which has no meaningful relative size.
pub const REL_ERR_FLOOR: f64 = 1e-3;

/// Central differences of scalar `f` around `x`.
pub fn numeric_gradient(x: &Tensor, step: f64, mut f: impl FnMut(&Tensor) -> f64) -> Tensor {
    let mut g = Tensor::zeros(x.shape());
    let mut probe = x.clone();
    for i in 0..x.len() {
        let orig = x.data()[i];
        probe.data_mut()[i] = orig + step;
        let up = f(&probe);
        probe.data_mut()[i] = orig - step;
        let down = f(&probe);
        probe.data_mut()[i] = orig;
        g.data_mut()[i] = (up - down) / (2.0 * step);
    }
    g
}

/// Largest `|a − n| / max(|a|, |n|, REL_ERR_FLOOR)` over all entries.
pub fn max_relative_error(analytic: &Tensor, numeric: &Tensor) -> f64 {
    assert_eq!(analytic.shape(), numeric.shape(), "gradient shapes differ");
    analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(REL_ERR_FLOOR))
        .fold(0.0, f64::max)
}
