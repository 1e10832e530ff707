//! Quadrature on (possibly non-uniform) sample grids.

/// Exact integral over `[u, v]` of the quadratic interpolating three samples.
pub fn quadratic_segment(t: [f64; 3], f: [f64; 3], u: f64, v: f64) -> f64 {
    let q = |x: f64| {
        let l0 = (x - t[1]) * (x - t[2]) / ((t[0] - t[1]) * (t[0] - t[2]));
        let l1 = (x - t[0]) * (x - t[2]) / ((t[1] - t[0]) * (t[1] - t[2]));
        let l2 = (x - t[0]) * (x - t[1]) / ((t[2] - t[0]) * (t[2] - t[1]));
        f[0] * l0 + f[1] * l1 + f[2] * l2
    };
    (v - u) / 6.0 * (q(u) + 4.0 * q(0.5 * (u + v)) + q(v))
}

/// Composite Simpson rule over all nodes. Interval pairs use the
/// non-uniform Simpson weights; a trailing odd interval is integrated with
/// the quadratic through the last three nodes.
pub fn simpson(t: &[f64], f: &[f64]) -> f64 {
    debug_assert_eq!(t.len(), f.len());
    let n = t.len();
    match n {
        0 | 1 => return 0.0,
        2 => return 0.5 * (t[1] - t[0]) * (f[0] + f[1]),
        _ => {}
    }
    let mut acc = 0.0;
    let mut i = 0;
    while i + 2 < n {
        let h0 = t[i + 1] - t[i];
        let h1 = t[i + 2] - t[i + 1];
        let s = h0 + h1;
        acc += s / 6.0
            * ((2.0 - h1 / h0) * f[i] + s * s / (h0 * h1) * f[i + 1] + (2.0 - h0 / h1) * f[i + 2]);
        i += 2;
    }
    if i + 1 < n {
        let j = n - 3;
        acc += quadratic_segment(
            [t[j], t[j + 1], t[j + 2]],
            [f[j], f[j + 1], f[j + 2]],
            t[n - 2],
            t[n - 1],
        );
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_cubics_on_uniform_even_grid() {
        let t: Vec<f64> = (0..=10).map(|i| i as f64 * 0.3).collect();
        let f: Vec<f64> = t.iter().map(|x| x * x * x - 2.0 * x + 1.0).collect();
        let exact = |x: f64| x.powi(4) / 4.0 - x * x + x;
        assert!((simpson(&t, &f) - exact(3.0)).abs() < 1e-12);
    }

    #[test]
    fn exact_for_quadratics_on_ragged_grid() {
        let t = [0.0, 0.1, 0.35, 0.4, 1.0, 1.7];
        let f: Vec<f64> = t.iter().map(|x| 3.0 * x * x - x + 2.0).collect();
        let exact = |x: f64| x * x * x - x * x / 2.0 + 2.0 * x;
        assert!((simpson(&t, &f) - exact(1.7)).abs() < 1e-12);
    }

    #[test]
    fn fourth_order_convergence() {
        let err = |n: usize| {
            let t: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
            let f: Vec<f64> = t.iter().map(|x| (3.0 * x).exp()).collect();
            (simpson(&t, &f) - ((3.0f64).exp() - 1.0) / 3.0).abs()
        };
        let ratio = err(20) / err(40);
        assert!(ratio > 14.0 && ratio < 18.0, "ratio {ratio}");
    }
}
