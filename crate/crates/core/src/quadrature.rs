//! Gauss-Legendre rules and the radial rule shared by the phaseless channel
//! denoiser and the exact noise-variance update.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::special::{i0e, r0, r0_derivative};

pub(crate) const RADIAL_NODES: usize = 64;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            // three-term recurrence for P_n(x) and P_{n-1}(x)
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn gl_radial() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(RADIAL_NODES))
}

/// Discretization of the radial density
///
/// ```text
/// f(rho) ∝ rho exp(-c rho^2) I0(a rho) I0(b rho),   rho >= 0,
/// ```
///
/// which is the law of `|z|` both for the phaseless-channel posterior
/// (`a = 2y/nu`, `b = 2 tau |p|`, `c = 1/nu + tau`) and for a circular Gaussian
/// `CN(zhat, 1/zeta)` (`a = 0`, `b = 2 zeta |zhat|`, `c = zeta`). The weights
/// are normalized, so `sum_k w_k h(rho_k)` approximates `E[h(rho)]`.
#[derive(Debug, Clone)]
pub(crate) struct RadialRule {
    pub nodes: [f64; RADIAL_NODES],
    pub weights: [f64; RADIAL_NODES],
}

struct RadialDensity {
    a: f64,
    b: f64,
    c: f64,
}

impl RadialDensity {
    fn log_density(&self, rho: f64) -> f64 {
        if rho <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let (ar, br) = (self.a * rho, self.b * rho);
        rho.ln() - self.c * rho * rho + i0e(ar).ln() + ar + i0e(br).ln() + br
    }

    fn score(&self, rho: f64) -> f64 {
        1.0 / rho - 2.0 * self.c * rho + self.a * r0(self.a * rho) + self.b * r0(self.b * rho)
    }

    /// Negative second derivative of the log-density.
    fn curvature(&self, rho: f64) -> f64 {
        1.0 / (rho * rho) + 2.0 * self.c
            - self.a * self.a * r0_derivative(self.a * rho)
            - self.b * self.b * r0_derivative(self.b * rho)
    }

    fn mode(&self) -> f64 {
        let (a, b, c) = (self.a, self.b, self.c);
        // score >= 1/rho - 2c rho, and score <= 1/rho - 2c rho + a + b
        let mut lo = (0.5 / c).sqrt();
        let mut hi = ((a + b) + ((a + b) * (a + b) + 8.0 * c).sqrt()) / (4.0 * c);
        let mut x = ((a + b) / (2.0 * c)).max(lo).min(hi);
        for _ in 0..200 {
            let g = self.score(x);
            if g == 0.0 {
                return x;
            }
            if g > 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let d = self.curvature(x);
            let newton = x + g / d;
            let next = if d > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - x).abs() <= 1e-14 * x || hi - lo <= 1e-14 * hi {
                return next;
            }
            x = next;
        }
        x
    }
}

impl RadialRule {
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        debug_assert!(a >= 0.0 && b >= 0.0 && c > 0.0);
        let density = RadialDensity { a, b, c };
        let mode = density.mode();
        let peak = density.log_density(mode);
        let curv = density.curvature(mode);
        let width = if curv > 0.0 && curv.is_finite() {
            1.0 / curv.sqrt()
        } else {
            (0.5 / c).sqrt()
        };

        // 10 local standard deviations either side, widened until the density
        // is below e^-40 of its peak at both ends
        let drop = 40.0;
        let mut hi = mode + 10.0 * width;
        for _ in 0..64 {
            if density.log_density(hi) < peak - drop {
                break;
            }
            hi += 5.0 * width;
        }
        let mut lo = (mode - 10.0 * width).max(0.0);
        for _ in 0..64 {
            if lo == 0.0 || density.log_density(lo) < peak - drop {
                break;
            }
            lo = (lo - 5.0 * width).max(0.0);
        }

        let (gl_nodes, gl_weights) = gl_radial();
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let mut nodes = [0.0; RADIAL_NODES];
        let mut weights = [0.0; RADIAL_NODES];
        let mut total = 0.0;
        for k in 0..RADIAL_NODES {
            let rho = mid + half * gl_nodes[k];
            nodes[k] = rho;
            weights[k] = gl_weights[k] * (density.log_density(rho) - peak).exp();
            total += weights[k];
        }
        for w in &mut weights {
            *w /= total;
        }
        Self { nodes, weights }
    }

    pub fn expect(&self, mut h: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&rho, &w)| w * h(rho))
            .sum()
    }
}
