//! Composite Gauss-Legendre quadrature with per-panel adaptive bisection.

use std::sync::OnceLock;

/// Nodes and weights of an n-point Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
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
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: &F, a: f64, b: f64) -> f64 {
        let h = 0.5 * (b - a);
        let c = 0.5 * (a + b);
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(c + h * x);
        }
        s * h
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Shared 20-point rule.
pub fn gl20() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(20))
}

const MAX_DEPTH: u32 = 18;

/// Integrates `f` over consecutive panels given by sorted `edges`.
///
/// Each panel is bisected until two half-panel estimates agree with the whole
/// within the share of the tolerance budget assigned to that panel.
pub fn integrate_panels<F: Fn(f64) -> f64>(f: &F, edges: &[f64], rtol: f64) -> f64 {
    integrate_panels_floor(f, edges, rtol, 0.0)
}

/// As [`integrate_panels`], with a total absolute error allowance `abs_floor` shared across panels.
pub fn integrate_panels_floor<F: Fn(f64) -> f64>(
    f: &F,
    edges: &[f64],
    rtol: f64,
    abs_floor: f64,
) -> f64 {
    if edges.len() < 2 {
        return 0.0;
    }
    let rule = gl20();
    let coarse: Vec<f64> = edges
        .windows(2)
        .map(|w| rule.integrate(f, w[0], w[1]))
        .collect();
    let scale: f64 = coarse.iter().map(|v| v.abs()).sum();
    if scale == 0.0 || !scale.is_finite() {
        return coarse.iter().sum();
    }
    let atol = (1e-2 * rtol * scale).max(abs_floor) / coarse.len() as f64;
    edges
        .windows(2)
        .zip(&coarse)
        .map(|(w, &whole)| refine(f, rule, w[0], w[1], whole, rtol, atol, 0))
        .sum()
}

#[allow(clippy::too_many_arguments)]
fn refine<F: Fn(f64) -> f64>(
    f: &F,
    rule: &GaussLegendre,
    a: f64,
    b: f64,
    whole: f64,
    rtol: f64,
    atol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let l = rule.integrate(f, a, m);
    let r = rule.integrate(f, m, b);
    let both = l + r;
    if (both - whole).abs() <= (rtol * both.abs()).max(atol) || depth >= MAX_DEPTH {
        return both;
    }
    refine(f, rule, a, m, l, rtol, 0.5 * atol, depth + 1)
        + refine(f, rule, m, b, r, rtol, 0.5 * atol, depth + 1)
}

/// Splits [a, b] into panels no wider than `max_width`, keeping every interior breakpoint.
pub fn panel_edges(a: f64, b: f64, breakpoints: &[f64], max_width: f64) -> Vec<f64> {
    let mut pts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|p| p.is_finite() && *p > a && *p < b)
        .collect();
    pts.push(a);
    pts.push(b);
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * y.abs().max(1e-300));
    let mut edges = Vec::with_capacity(pts.len());
    edges.push(pts[0]);
    for w in pts.windows(2) {
        let span = w[1] - w[0];
        let pieces = if max_width.is_finite() && max_width > 0.0 {
            (span / max_width).ceil().max(1.0) as usize
        } else {
            1
        };
        for k in 1..pieces {
            edges.push(w[0] + span * k as f64 / pieces as f64);
        }
        edges.push(w[1]);
    }
    edges
}
