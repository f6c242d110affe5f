//! Affine-plus-quadratic bounds on a bilinear product around an anchor point.

/// Concave lower bound of `xy`, tight at `(x_a, y_a)`: equals `xy − ¼((x+y) − (x_a+y_a))²`.
pub fn theta_lower(x: f64, y: f64, x_anchor: f64, y_anchor: f64) -> f64 {
    let sa = x_anchor + y_anchor;
    0.5 * sa * (x + y) - 0.25 * sa * sa - 0.25 * (x - y) * (x - y)
}

/// Convex upper bound of `xy`, tight at `(x_a, y_a)`: equals `xy + ¼((x−y) − (x_a−y_a))²`.
pub fn theta_upper(x: f64, y: f64, x_anchor: f64, y_anchor: f64) -> f64 {
    let da = x_anchor - y_anchor;
    0.25 * (x + y) * (x + y) + 0.25 * da * da - 0.5 * da * (x - y)
}
