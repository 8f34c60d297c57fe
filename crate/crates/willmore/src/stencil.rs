//! Finite-difference stencils and quadrature on uniform grids.
//!
//! Weights come from Fornberg's recurrence (Math. Comp. 51 (1988), 699-706)
//! for arbitrary node offsets, so interior points get centered fourth-order
//! stencils and boundary points one-sided ones of the same order without a
//! table per case.

/// Weights for the m-th derivative at evaluation point `z` from nodes `x`.
pub fn fd_weights(z: f64, x: &[f64], m: usize) -> Vec<f64> {
    let n = x.len();
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

/// m-th derivative of uniformly sampled values, fourth-order accurate,
/// one-sided near the ends.
pub fn deriv_line(values: &[f64], h: f64, m: usize) -> Vec<f64> {
    let n = values.len();
    let w = 4 + m; // stencil width for order-4 accuracy
    assert!(n >= w, "grid too coarse for order-4 stencil");
    let mut out = vec![0.0; n];
    for i in 0..n {
        let lo = i.saturating_sub(w / 2).min(n - w);
        let nodes: Vec<f64> = (0..w).map(|j| (lo + j) as f64 * h).collect();
        let wts = fd_weights(i as f64 * h, &nodes, m);
        out[i] = wts
            .iter()
            .enumerate()
            .map(|(j, c)| c * values[lo + j])
            .sum();
    }
    out
}

/// m-th derivative of periodically sampled values (period n*h), centered
/// fourth-order stencils everywhere.
pub fn deriv_periodic(values: &[f64], h: f64, m: usize) -> Vec<f64> {
    let n = values.len();
    let w = 4 + m;
    assert!(n >= w, "grid too coarse for order-4 stencil");
    let half = w / 2;
    let nodes: Vec<f64> = (0..w).map(|j| (j as f64 - half as f64) * h).collect();
    let wts = fd_weights(0.0, &nodes, m);
    let mut out = vec![0.0; n];
    for i in 0..n {
        let mut acc = 0.0;
        for (j, c) in wts.iter().enumerate() {
            let idx = (i + n + j - half) % n;
            acc += c * values[idx];
        }
        out[i] = acc;
    }
    out
}

/// Composite Simpson rule over an even number of intervals.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    assert!(n >= 3 && n % 2 == 1, "Simpson needs an even interval count");
    let mut acc = values[0] + values[n - 1];
    for (i, v) in values.iter().enumerate().take(n - 1).skip(1) {
        acc += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    acc * h / 3.0
}

/// Mean over the periodic θ-grid times 2π: the rectangle rule, spectrally
/// exact for trigonometric polynomials of degree below n/2.
pub fn rect_circle(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    values.iter().sum::<f64>() * std::f64::consts::TAU / n
}
