//! Gauss-Legendre quadrature on a finite interval.

/// Nodes and weights of an `n`-point Gauss-Legendre rule on `[a, b]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the rule by Newton iteration on the Legendre polynomial roots.
    pub fn new(n: usize, a: f64, b: f64) -> Self {
        assert!(n >= 1, "quadrature rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess for the i-th root of P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_and_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = mid - half * x;
            nodes[n - 1 - i] = mid + half * x;
            weights[i] = half * w;
            weights[n - 1 - i] = half * w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Evaluates (P_n(x), P_n'(x)) by the three-term recurrence.
fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn integrates_polynomials_exactly() {
        // n nodes are exact through degree 2n-1
        let rule = GaussLegendre::new(8, -1.0, 1.0);
        for k in 0..=15u32 {
            let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
            let got = rule.integrate(|x| x.powi(k as i32));
            assert!((got - exact).abs() < 1e-13, "k={k}: {got} vs {exact}");
        }
    }

    #[test]
    fn integrates_sin_squared_on_quarter_period() {
        let rule = GaussLegendre::new(32, 0.0, PI / 2.0);
        let got = rule.integrate(|t| t.sin().powi(2));
        assert!((got - PI / 4.0).abs() < 1e-14);
    }

    #[test]
    fn node_count_matches() {
        assert_eq!(GaussLegendre::new(64, 0.0, 1.0).len(), 64);
        assert_eq!(GaussLegendre::new(7, 0.0, 1.0).len(), 7);
    }
}
