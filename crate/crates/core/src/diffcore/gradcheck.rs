//! Central finite-difference checks for scalar functions of one tensor.

use super::tensor::Tensor;

/// Default step for central differences.
pub const FD_STEP: f64 = 1e-5;

/// Numeric gradient of `f` at `x` by central differences.
pub fn numeric_gradient(f: impl Fn(&Tensor) -> f64, x: &Tensor, step: f64) -> Tensor {
    let mut probe = x.clone();
    let mut grad = Tensor::zeros(x.shape());
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + step;
        let plus = f(&probe);
        probe.data_mut()[i] = orig - step;
        let minus = f(&probe);
        probe.data_mut()[i] = orig;
        grad.data_mut()[i] = (plus - minus) / (2.0 * step);
    }
    grad
}

/// Largest elementwise relative error `|a−n| / max(|a|, |n|, floor)`.
///
/// The floor keeps near-zero gradients from producing huge ratios out of
/// round-off; it is an absolute scale below which errors are compared
/// directly.
pub fn max_relative_error(analytic: &Tensor, numeric: &Tensor, floor: f64) -> f64 {
    analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}
