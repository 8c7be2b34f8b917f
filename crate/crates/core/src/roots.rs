//! One-dimensional root finding for monotone functions.

/// Find the root of a strictly decreasing `f`, starting from `x0`.
///
/// The bracket is grown geometrically from `x0` with initial width `step`,
/// then refined by Illinois regula falsi with bisection safeguards until the
/// bracket width is below `rel_tol * max(1, |x|)`.
pub(crate) fn root_decreasing<F: FnMut(f64) -> f64>(
    mut f: F,
    x0: f64,
    step: f64,
    rel_tol: f64,
) -> f64 {
    let f0 = f(x0);
    if f0 == 0.0 {
        return x0;
    }
    let dir = if f0 > 0.0 { 1.0 } else { -1.0 };
    let (mut a, mut fa) = (x0, f0);
    let mut width = step.max(f64::MIN_POSITIVE);
    let (mut b, mut fb);
    loop {
        b = x0 + dir * width;
        fb = f(b);
        if fb == 0.0 {
            return b;
        }
        if fb.signum() != fa.signum() {
            break;
        }
        a = b;
        fa = fb;
        width *= 2.0;
        if !width.is_finite() || !fb.is_finite() {
            return b;
        }
    }
    // Now f(a) and f(b) have opposite signs.
    let mut side = 0i8;
    for _ in 0..300 {
        let tol = rel_tol * a.abs().max(b.abs()).max(1.0);
        if (b - a).abs() <= tol {
            break;
        }
        let mut c = (a * fb - b * fa) / (fb - fa);
        let lo = a.min(b);
        let hi = a.max(b);
        if !(c > lo && c < hi) {
            c = 0.5 * (a + b);
        }
        let fc = f(c);
        if fc == 0.0 {
            return c;
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    if fa.abs() < fb.abs() {
        a
    } else {
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_roots_on_either_side() {
        let r = root_decreasing(|x| 3.0 - x, 0.0, 1.0, 1e-15);
        assert!((r - 3.0).abs() < 1e-14);
        let r = root_decreasing(|x| -x.powi(3) - 8.0, 10.0, 1.0, 1e-15);
        assert!((r + 2.0).abs() < 1e-13);
        let r = root_decreasing(|x| (1e6 - x) * 1e-12, 1.0, 1.0, 1e-15);
        assert!((r - 1e6).abs() < 1e-8);
    }
}
