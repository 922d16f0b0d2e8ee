//! One-dimensional quadrature over sampled integrands.

/// Composite Simpson rule on possibly non-uniform nodes.
///
/// Pairs of intervals use the three-point rule for unequal widths; a
/// trailing unpaired interval (or a very short final interval) is closed
/// with the one-interval quadratic correction through its left neighbour.
pub fn simpson(nodes: &[f64], values: &[f64]) -> f64 {
    assert_eq!(nodes.len(), values.len(), "nodes and values must align");
    let n = nodes.len().saturating_sub(1);
    match n {
        0 => return 0.0,
        1 => return 0.5 * (nodes[1] - nodes[0]) * (values[0] + values[1]),
        _ => {}
    }
    let width = |k: usize| nodes[k + 1] - nodes[k];
    let mut paired = if n.is_multiple_of(2) { n } else { n - 1 };
    if paired == n && paired >= 4 && width(n - 1) < 0.1 * width(n - 2) {
        paired = n - 2;
    }
    let mut total = 0.0;
    for k in (0..paired).step_by(2) {
        let (h0, h1) = (width(k), width(k + 1));
        let hs = h0 + h1;
        total += hs / 6.0
            * ((2.0 - h1 / h0) * values[k] + hs * hs / (h0 * h1) * values[k + 1] + (2.0 - h0 / h1) * values[k + 2]);
    }
    for k in paired..n {
        let (h0, h1) = (width(k - 1), width(k));
        let alpha = (2.0 * h1 * h1 + 3.0 * h0 * h1) / (6.0 * (h0 + h1));
        let beta = (h1 * h1 + 3.0 * h0 * h1) / (6.0 * h0);
        let eta = h1 * h1 * h1 / (6.0 * h0 * (h0 + h1));
        total += alpha * values[k + 1] + beta * values[k] - eta * values[k - 1];
    }
    total
}

/// Cumulative integral using cubic Hermite interpolation on each interval
/// (values and derivatives at the nodes). Returns one entry per node,
/// starting at zero.
pub fn cumulative_hermite(nodes: &[f64], values: &[f64], derivs: &[f64]) -> Vec<f64> {
    assert!(nodes.len() == values.len() && nodes.len() == derivs.len());
    let mut out = Vec::with_capacity(nodes.len());
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..nodes.len() {
        let h = nodes[k] - nodes[k - 1];
        acc += 0.5 * h * (values[k - 1] + values[k]) + h * h / 12.0 * (derivs[k - 1] - derivs[k]);
        out.push(acc);
    }
    out
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 {
                1.0
            } else if n == 1 {
                z
            } else {
                p1
            };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pn1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `int_a^b f` by composite Gauss-Legendre with `panels` panels of `order` nodes.
pub fn integrate_gl(f: impl Fn(f64) -> f64, a: f64, b: f64, order: usize, panels: usize) -> f64 {
    let (z, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for (zi, wi) in z.iter().zip(&w) {
            total += wi * f(mid + 0.5 * h * zi);
        }
    }
    0.5 * h * total
}
