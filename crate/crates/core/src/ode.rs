//! Fixed-step classical Runge–Kutta on small fixed-size systems.

pub(crate) fn rk4_step<const N: usize>(
    t: f64,
    y: &[f64; N],
    h: f64,
    f: impl Fn(f64, &[f64; N]) -> [f64; N],
) -> [f64; N] {
    let axpy = |base: &[f64; N], k: &[f64; N], s: f64| -> [f64; N] {
        let mut out = *base;
        for i in 0..N {
            out[i] += s * k[i];
        }
        out
    };
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, &axpy(y, &k1, 0.5 * h));
    let k3 = f(t + 0.5 * h, &axpy(y, &k2, 0.5 * h));
    let k4 = f(t + h, &axpy(y, &k3, h));
    let mut out = *y;
    for i in 0..N {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Number of `dt` steps in `span`, if `span` is an integer multiple of `dt`.
pub(crate) fn step_count(span: f64, dt: f64) -> Option<usize> {
    if !(dt > 0.0) || !(span > 0.0) || !span.is_finite() {
        return None;
    }
    let n = (span / dt).round();
    ((n * dt - span).abs() <= 1e-9 * span.max(1.0) && n >= 1.0).then_some(n as usize)
}

/// Linear interpolation of samples on a uniform grid starting at 0.
pub(crate) fn lerp_uniform(values: &[f64], dt: f64, t: f64) -> f64 {
    debug_assert!(!values.is_empty());
    let last = values.len() - 1;
    let x = (t / dt).max(0.0);
    let i = x.floor() as usize;
    if i >= last {
        return values[last];
    }
    let w = x - i as f64;
    values[i] * (1.0 - w) + values[i + 1] * w
}
