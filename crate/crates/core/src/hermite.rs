//! Gauss-Hermite rules rescaled to expectations under a standard normal.
//!
//! Nodes and weights come from the Golub-Welsch construction: the nodes are
//! the eigenvalues of the Jacobi matrix of the probabilists' Hermite
//! polynomials (zero diagonal, off-diagonal `sqrt(i)`), and each weight is the
//! squared first component of the matching normalized eigenvector. Only the
//! first row of the eigenvector matrix is carried through the implicit QL
//! sweeps. The rule is symmetrized afterwards so that `+node` and `-node`
//! share one weight exactly.

/// `E[f(xi)]` for `xi ~ N(0, 1)` is approximated by `sum_i weights[i] * f(nodes[i])`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalRule {
    /// Strictly positive nodes, ascending.
    pub positive: Vec<f64>,
    /// Weights matching `positive`; each applies to `+node` and `-node`.
    pub pair_weights: Vec<f64>,
    /// Weight of the node at zero (odd orders only).
    pub center_weight: Option<f64>,
}

impl NormalRule {
    /// Rule with `n >= 1` nodes; exact for polynomials up to degree `2n - 1`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Hermite rule needs at least one node");
        let (x, w) = golub_welsch(n);
        // x is descending; the first n/2 entries are positive.
        let half = n / 2;
        let positive = (0..half).rev().map(|i| x[i]).collect();
        let pair_weights = (0..half).rev().map(|i| w[i]).collect();
        let center_weight = (n % 2 == 1).then(|| w[half]);
        NormalRule { positive, pair_weights, center_weight }
    }

    pub fn len(&self) -> usize {
        2 * self.positive.len() + usize::from(self.center_weight.is_some())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All `(node, weight)` pairs, ascending in node.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let mut pts = Vec::with_capacity(self.len());
        for (&x, &w) in self.positive.iter().zip(&self.pair_weights).rev() {
            pts.push((-x, w));
        }
        if let Some(w) = self.center_weight {
            pts.push((0.0, w));
        }
        for (&x, &w) in self.positive.iter().zip(&self.pair_weights) {
            pts.push((x, w));
        }
        pts
    }

    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.points().iter().map(|&(x, w)| w * f(x)).sum()
    }
}

/// Nodes (descending) and weights of the `n`-point rule for the standard
/// normal density.
fn golub_welsch(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut d = vec![0.0; n];
    let mut e: Vec<f64> = (1..=n).map(|i| if i < n { (i as f64).sqrt() } else { 0.0 }).collect();
    let mut first = vec![0.0; n];
    first[0] = 1.0;
    implicit_ql(&mut d, &mut e, &mut first);
    let mut pts: Vec<(f64, f64)> = d.into_iter().zip(first.into_iter().map(|v| v * v)).collect();
    pts.sort_by(|a, b| b.0.total_cmp(&a.0));
    // Enforce exact symmetry.
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let j = n - 1 - i;
        let node = 0.5 * (pts[i].0 - pts[j].0);
        let weight = 0.5 * (pts[i].1 + pts[j].1);
        x[i] = node;
        x[j] = -node;
        w[i] = weight;
        w[j] = weight;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Eigenvalues of the symmetric tridiagonal matrix `(d, e)` in place, with
/// `z` rotated alongside as the first row of the eigenvector matrix.
fn implicit_ql(d: &mut [f64], e: &mut [f64], z: &mut [f64]) {
    let n = d.len();
    for l in 0..n {
        let mut iterations = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            assert!(iterations < 100, "QL iteration did not converge");
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let zf = z[i + 1];
                z[i + 1] = s * z[i] + c * zf;
                z[i] = c * z[i] - s * zf;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
}
