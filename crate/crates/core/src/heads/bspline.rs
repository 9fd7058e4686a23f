//! Uniform B-spline basis evaluation via the iterative Cox-de Boor
//! recurrence. The knot vector spans [-1, 1] with `order` extra knots of the
//! same spacing on each side, so inputs slightly outside the domain still see
//! well-defined bases without clamping.

/// Knot vector for `grid_size` cells on [-1, 1], extended by `order` knots on
/// each side: `grid_size + 1 + 2 * order` knots supporting
/// `grid_size + order` basis functions.
pub fn uniform_knots(grid_size: usize, order: usize) -> Vec<f64> {
    assert!(grid_size >= 1, "grid_size must be at least 1");
    let h = 2.0 / grid_size as f64;
    (0..grid_size + 1 + 2 * order)
        .map(|i| -1.0 + h * (i as f64 - order as f64))
        .collect()
}

/// The `grid_size + order` order-`order` basis values at `x`.
pub fn bspline_basis(x: f64, knots: &[f64], order: usize) -> Vec<f64> {
    let cells = knots.len() - 1;
    debug_assert!(cells > order);
    let mut b: Vec<f64> = (0..cells)
        .map(|i| {
            if knots[i] <= x && x < knots[i + 1] {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    for d in 1..=order {
        let remaining = cells - d;
        for i in 0..remaining {
            let left = (x - knots[i]) / (knots[i + d] - knots[i]) * b[i];
            let right = (knots[i + d + 1] - x) / (knots[i + d + 1] - knots[i + 1]) * b[i + 1];
            b[i] = left + right;
        }
        b.truncate(remaining);
    }
    b
}

/// Basis values and their first derivatives at `x`.
///
/// The derivative uses the standard recurrence
/// d/dx B_i^k = k * (B_i^{k-1} / (t_{i+k} - t_i) - B_{i+1}^{k-1} / (t_{i+k+1} - t_{i+1})).
pub fn bspline_basis_and_deriv(x: f64, knots: &[f64], order: usize) -> (Vec<f64>, Vec<f64>) {
    if order == 0 {
        let values = bspline_basis(x, knots, 0);
        let deriv = vec![0.0; values.len()];
        return (values, deriv);
    }
    let lower = bspline_basis(x, knots, order - 1);
    let count = lower.len() - 1;
    let mut values = Vec::with_capacity(count);
    let mut deriv = Vec::with_capacity(count);
    let k = order as f64;
    for i in 0..count {
        let span_left = knots[i + order] - knots[i];
        let span_right = knots[i + order + 1] - knots[i + 1];
        values.push(
            (x - knots[i]) / span_left * lower[i]
                + (knots[i + order + 1] - x) / span_right * lower[i + 1],
        );
        deriv.push(k * (lower[i] / span_left - lower[i + 1] / span_right));
    }
    (values, deriv)
}
