//! Adaptive Simpson quadrature.

/// Integrate `f` over `[a, b]` to an absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Integrate over consecutive panels `[edges[i], edges[i+1]]`, splitting the
/// tolerance in proportion to panel width.
pub fn integrate_panels<F: Fn(f64) -> f64>(f: &F, edges: &[f64], tol: f64) -> f64 {
    let span = edges.last().unwrap_or(&0.0) - edges.first().unwrap_or(&0.0);
    if span <= 0.0 {
        return 0.0;
    }
    edges
        .windows(2)
        .map(|w| adaptive_simpson(f, w[0], w[1], tol * (w[1] - w[0]) / span))
        .sum()
}
