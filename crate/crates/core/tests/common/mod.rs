//! Reference computations shared by the integration tests. Nothing here calls
//! into the library's special functions or quadrature.

#![allow(dead_code)]

use std::f64::consts::PI;

use emgvamp::{Complex64, DMatrix, DVector, Field};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        ((a - b) / b).abs()
    }
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One 15-point Kronrod panel with the embedded 7-point Gauss estimate.
fn gk15<const K: usize>(f: &mut impl FnMut(f64) -> [f64; K], a: f64, b: f64) -> ([f64; K], f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut kron = [0.0; K];
    let mut gauss = [0.0; K];
    let center = f(c);
    for k in 0..K {
        kron[k] = WGK[7] * center[k];
        gauss[k] = WG[3] * center[k];
    }
    for i in 0..7 {
        let lo = f(c - h * XGK[i]);
        let hi = f(c + h * XGK[i]);
        for k in 0..K {
            kron[k] += WGK[i] * (lo[k] + hi[k]);
            if i % 2 == 1 {
                gauss[k] += WG[i / 2] * (lo[k] + hi[k]);
            }
        }
    }
    let mut err: f64 = 0.0;
    for k in 0..K {
        kron[k] *= h;
        gauss[k] *= h;
        err = err.max((kron[k] - gauss[k]).abs());
    }
    (kron, err)
}

/// Adaptive Gauss-Kronrod integration of a vector-valued integrand over
/// `[a, b]`, starting from 64 equal panels and bisecting until each panel's
/// Kronrod-Gauss gap is below `abs_tol` scaled by the panel's share of the
/// interval.
pub fn integrate<const K: usize>(mut f: impl FnMut(f64) -> [f64; K], a: f64, b: f64, abs_tol: f64) -> [f64; K] {
    let mut total = [0.0; K];
    let h = (b - a) / 64.0;
    let mut stack: Vec<(f64, f64, usize)> = (0..64)
        .map(|i| (a + i as f64 * h, a + (i + 1) as f64 * h, 0))
        .collect();
    while let Some((lo, hi, depth)) = stack.pop() {
        let (val, err) = gk15(&mut f, lo, hi);
        let share = (hi - lo) / (b - a);
        if err <= abs_tol * share.max(1e-3) || depth >= 40 {
            for k in 0..K {
                total[k] += val[k];
            }
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, depth + 1));
            stack.push((mid, hi, depth + 1));
        }
    }
    total
}

pub fn integrate1(f: impl Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64) -> f64 {
    integrate(|x| [f(x)], a, b, abs_tol)[0]
}

/// [`integrate`] with the tolerance taken relative to the first component,
/// whose magnitude is estimated from 64 fixed panels first.
pub fn integrate_rel<const K: usize>(mut f: impl FnMut(f64) -> [f64; K], a: f64, b: f64, rel_tol: f64) -> [f64; K] {
    let h = (b - a) / 64.0;
    let mut coarse = 0.0;
    for i in 0..64 {
        let lo = a + i as f64 * h;
        coarse += gk15(&mut f, lo, lo + h).0[0];
    }
    integrate(f, a, b, rel_tol * coarse.abs().max(f64::MIN_POSITIVE))
}

/// `e^{-x} I0(x)` and `e^{-x} I1(x)` from `(1/pi) int_0^pi e^{x (cos t - 1)} cos(n t) dt`
/// with the trapezoid rule, which converges geometrically for periodic
/// analytic integrands.
pub fn bessel_scaled_trapezoid(x: f64) -> (f64, f64) {
    let nodes = 64 + (40.0 * x.sqrt()) as usize;
    let h = PI / nodes as f64;
    let (mut s0, mut s1) = (0.0, 0.0);
    for k in 0..=nodes {
        let t = k as f64 * h;
        let w = if k == 0 || k == nodes { 0.5 } else { 1.0 };
        let e = (x * (t.cos() - 1.0)).exp();
        s0 += w * e;
        s1 += w * e * t.cos();
    }
    (s0 * h / PI, s1 * h / PI)
}

/// Phaseless posterior of `z` under `Rice(y; |z|, nu) N(z; p, 1/tau)` by
/// polar integration: adaptive in the radius, trapezoid in the angle.
/// Returns `(E z, E|z - E z|^2)`.
pub fn phaseless_posterior_oracle(y: f64, p: Complex64, nu: f64, tau: f64) -> (Complex64, f64) {
    let spread = (1.0 / tau).max(nu).sqrt();
    let center = y.max(p.norm());
    let hi = center + 60.0 * spread;
    let angles = 64 + (60.0 * (2.0 * tau * p.norm() * hi).sqrt()) as usize;
    // log of the integrand's peak, to keep exponents bounded
    let shift = -(y - p.norm()).powi(2) / (nu + 1.0 / tau);
    let integrand = |rho: f64| -> [f64; 4] {
        // Rician likelihood up to the constant 2y/nu, scaled by e^{-2 y rho / nu}
        let (i0, _) = bessel_scaled_trapezoid(2.0 * y * rho / nu);
        let radial = rho * i0 * (-(y - rho).powi(2) / nu - shift).exp();
        let (mut s0, mut sr, mut si) = (0.0, 0.0, 0.0);
        for k in 0..angles {
            let t = 2.0 * PI * k as f64 / angles as f64;
            let z = Complex64::from_polar(rho, t);
            let w = (-tau * (z - p).norm_sqr()).exp();
            s0 += w;
            sr += w * z.re;
            si += w * z.im;
        }
        let scale = radial * 2.0 * PI / angles as f64;
        [scale * s0, scale * sr, scale * si, scale * s0 * rho * rho]
    };
    let lo = 0.0_f64.max(y.min(p.norm()) - 60.0 * spread);
    let [z0, zr, zi, z2] = integrate_rel(integrand, lo, hi, 1e-12);
    let mean = Complex64::new(zr / z0, zi / z0);
    (mean, z2 / z0 - mean.norm_sqr())
}

/// Real Bernoulli-Gaussian posterior of `x` given `r = x + N(0, 1/gamma)`:
/// the slab part by quadrature, the spike analytically.
pub fn bg_posterior_oracle(r: f64, gamma: f64, sparsity: f64, variance: f64) -> (f64, f64) {
    let lik = |x: f64| (-0.5 * gamma * (r - x).powi(2)).exp() * (gamma / (2.0 * PI)).sqrt();
    let slab = |x: f64| (-0.5 * x * x / variance).exp() / (2.0 * PI * variance).sqrt();
    // the slab posterior is N(r v / (v + 1/gamma), v / (1 + gamma v))
    let center = r * variance / (variance + 1.0 / gamma);
    let sd = (variance / (1.0 + gamma * variance)).sqrt();
    let (lo, hi) = (center - 40.0 * sd, center + 40.0 * sd);
    let [m0, m1, m2] = integrate_rel(
        |x| {
            let w = slab(x) * lik(x);
            [w, w * x, w * x * x]
        },
        lo,
        hi,
        1e-13,
    );
    let spike = (1.0 - sparsity) * lik(0.0);
    let z = sparsity * m0 + spike;
    let mean = sparsity * m1 / z;
    (mean, sparsity * m2 / z - mean * mean)
}

/// Real AWGN channel posterior of `z` under `N(y; z, nu) N(z; p, 1/tau)` by
/// quadrature.
pub fn awgn_posterior_oracle(y: f64, p: f64, nu: f64, tau: f64) -> (f64, f64) {
    let width = nu.sqrt().min((1.0 / tau).sqrt());
    let center = 0.5 * (y + p);
    let span = (y - p).abs() + 40.0 * width;
    let [m0, m1, m2] = integrate_rel(
        |z| {
            let w = (-0.5 * (y - z).powi(2) / nu - 0.5 * tau * (z - p).powi(2)).exp();
            [w, w * z, w * z * z]
        },
        center - span,
        center + span,
        1e-13,
    );
    let mean = m1 / m0;
    (mean, m2 / m0 - mean * mean)
}

/// Golden-section maximization of a unimodal function on `[a, b]`.
pub fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = 0.5 * (5.0_f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol * (a.abs() + b.abs()).max(1e-300) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Expected Rician log-likelihood `E ln p(y | z; nu)` under
/// `z ~ CN(zhat, 1/zeta)` for one scalar. The angular integral of the
/// Gaussian is `2 pi e^{-zeta (rho - |zhat|)^2} e^{-x} I0(x)` with
/// `x = 2 zeta rho |zhat|`, both Bessel factors by the trapezoid rule.
pub fn expected_rician_loglike(y: f64, zhat: Complex64, zeta: f64, nu: f64) -> f64 {
    let sd = (1.0 / zeta).sqrt();
    let r = zhat.norm();
    let [mass, value] = integrate_rel(
        |rho| {
            let (i0_lik, _) = bessel_scaled_trapezoid(2.0 * y * rho / nu);
            let loglik = (2.0 * y / nu).ln() - (y - rho).powi(2) / nu + i0_lik.ln();
            let (i0_ang, _) = bessel_scaled_trapezoid(2.0 * zeta * rho * r);
            let w = rho * (-zeta * (rho - r).powi(2)).exp() * i0_ang;
            [w, w * loglik]
        },
        0.0_f64.max(r - 40.0 * sd),
        r + 40.0 * sd,
        1e-13,
    );
    value / mass
}

pub fn complex_normal_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize, var: f64) -> DMatrix<Complex64> {
    DMatrix::from_fn(m, n, |_, _| Complex64::sample_normal(rng, var))
}

pub fn real_normal_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize, var: f64) -> DMatrix<f64> {
    DMatrix::from_fn(m, n, |_, _| f64::sample_normal(rng, var))
}

/// `(I/nu_x + A^T A/nu_w)^{-1} A^T y / nu_w` for a zero-mean real Gaussian
/// prior, and the average posterior variance.
pub fn dense_bayes_linear(a: &DMatrix<f64>, y: &DVector<f64>, nu_x: f64, nu_w: f64) -> (DVector<f64>, f64) {
    let n = a.ncols();
    let precision = DMatrix::identity(n, n) / nu_x + a.transpose() * a / nu_w;
    let chol = precision.cholesky().expect("positive definite");
    let mean = chol.solve(&(a.transpose() * y / nu_w));
    let avg_var = chol.inverse().trace() / n as f64;
    (mean, avg_var)
}
