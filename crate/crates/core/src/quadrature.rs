//! Composite Gauss–Legendre rules for time integrals of heat-kernel
//! quantities, taken in the variable `σ = √s` so that the `s^{-1/2}` factors
//! of the kernel become bounded.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

/// Quadrature nodes and weights on an `s`-interval; `∫ f(s) ds ≈ Σ w f(s)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SqrtRule {
    base: Vec<(f64, f64)>,
    /// Panels shrink geometrically towards `σ = 0` until they are below this.
    floor: f64,
    ratio: f64,
}

impl SqrtRule {
    /// `points` Gauss nodes per panel; panels halve towards `σ = 0` down to
    /// `floor`, which should resolve the smallest spatial scale (about
    /// `0.01 h √k`).
    pub fn new(points: usize, floor: f64) -> Self {
        let n = NonZeroUsize::new(points.max(1)).expect("nonzero");
        let base = GaussLegendre::new(n).as_node_weight_pairs().to_vec();
        Self { base, floor, ratio: 0.5 }
    }

    /// Finer variant used to validate the default rule.
    #[cfg(test)]
    pub fn refined(&self) -> Self {
        let points = 2 * self.base.len();
        Self { ratio: self.ratio.sqrt(), ..Self::new(points, self.floor * 0.25) }
    }

    fn panels(&self, a: f64, b: f64) -> Vec<(f64, f64)> {
        let mut cuts = vec![b];
        let mut c = b;
        loop {
            let next = c * self.ratio;
            if next <= a || next < self.floor {
                break;
            }
            cuts.push(next);
            c = next;
        }
        cuts.push(a);
        cuts.windows(2).map(|w| (w[1], w[0])).collect()
    }

    /// Rule for `∫_lo^hi ds`, `0 <= lo < hi`.
    pub fn rule(&self, lo: f64, hi: f64) -> TimeRule {
        let (a, b) = (lo.max(0.0).sqrt(), hi.sqrt());
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for (p, q) in self.panels(a, b) {
            let (mid, half) = (0.5 * (p + q), 0.5 * (q - p));
            for &(x, w) in &self.base {
                let sigma = mid + half * x;
                nodes.push(sigma * sigma);
                weights.push(2.0 * sigma * half * w);
            }
        }
        TimeRule { nodes, weights }
    }
}
