//! Gauss–Legendre rules and closed-form integrals of linear functions against
//! power weights. The singular kernels of the pathwise estimates are all of
//! the form `u^p` after a shift, and every path in the crate is piecewise
//! linear, so these primitives make segment integrals exact.

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn on(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.on(a, b).map(|(x, w)| w * f(x)).sum()
    }

    /// Composite rule with `panels` equal sub-intervals.
    pub fn integrate_composite(&self, a: f64, b: f64, panels: usize, f: impl Fn(f64) -> f64) -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|k| {
                let lo = a + h * k as f64;
                self.integrate(lo, lo + h, &f)
            })
            .sum()
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `∫_a^b u^p du` for `0 <= a <= b`. Returns `+inf` for a non-integrable
/// singularity at zero.
pub fn power_moment(a: f64, b: f64, p: f64) -> f64 {
    debug_assert!(a >= 0.0 && b >= a);
    if b == a {
        return 0.0;
    }
    let q = p + 1.0;
    if a == 0.0 && q <= 0.0 {
        return f64::INFINITY;
    }
    if q.abs() < 1e-14 {
        return (b / a).ln();
    }
    (b.powf(q) - a.powf(q)) / q
}

/// `∫_a^b (c0 + c1 u) u^p du` for `0 <= a <= b`.
pub fn linear_power(c0: f64, c1: f64, a: f64, b: f64, p: f64) -> f64 {
    let mut total = 0.0;
    if c0 != 0.0 {
        total += c0 * power_moment(a, b, p);
    }
    if c1 != 0.0 {
        total += c1 * power_moment(a, b, p + 1.0);
    }
    total
}

/// `∫_a^b |c0 + c1 u| u^p du` for `0 <= a <= b`, split at the sign change.
pub fn abs_linear_power(c0: f64, c1: f64, a: f64, b: f64, p: f64) -> f64 {
    if c1 != 0.0 {
        let root = -c0 / c1;
        if root > a && root < b {
            return abs_linear_power(c0, c1, a, root, p) + abs_linear_power(c0, c1, root, b, p);
        }
    }
    let mid = 0.5 * (a + b);
    let sign = if c0 + c1 * mid < 0.0 { -1.0 } else { 1.0 };
    sign * linear_power(c0, c1, a, b, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        for n in 1..=10 {
            let gl = GaussLegendre::new(n);
            assert_relative_eq!(gl.weights.iter().sum::<f64>(), 2.0, epsilon = 1e-14);
            for deg in 0..(2 * n) {
                let got = gl.integrate(0.0, 1.0, |x| x.powi(deg as i32));
                assert_relative_eq!(got, 1.0 / (deg as f64 + 1.0), epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn power_moment_cases() {
        assert_relative_eq!(power_moment(0.0, 1.0, -0.3), 1.0 / 0.7, epsilon = 1e-15);
        assert_relative_eq!(power_moment(1.0, std::f64::consts::E, -1.0), 1.0, epsilon = 1e-15);
        assert!(power_moment(0.0, 1.0, -1.2).is_infinite());
        assert_eq!(power_moment(0.5, 0.5, -3.0), 0.0);
    }

    #[test]
    fn abs_linear_power_matches_quadrature() {
        // |1 - 3u| u^{-0.4} on [0.1, 1]: sign change at 1/3.
        let exact = abs_linear_power(1.0, -3.0, 0.1, 1.0, -0.4);
        let gl = GaussLegendre::new(20);
        let q = gl.integrate(0.1, 1.0 / 3.0, |u| (1.0 - 3.0 * u).abs() * u.powf(-0.4))
            + gl.integrate(1.0 / 3.0, 1.0, |u| (1.0 - 3.0 * u).abs() * u.powf(-0.4));
        assert_relative_eq!(exact, q, epsilon = 1e-12);
    }
}
