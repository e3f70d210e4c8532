//! Second GVAMP stage: the joint Gaussian estimate of `(x, z)` under the
//! pseudo-priors `N(x; r2, I/gamma2)`, `N(z; p2, I/tau2)` and the exact
//! constraint `z = A x`.

use nalgebra::DVector;

use crate::error::{domain, Error, Result};
use crate::model::LinearOperator;
use crate::scalar::Field;

#[derive(Debug, Clone, PartialEq)]
pub struct LmmseResult<T: Field> {
    pub x2: DVector<T>,
    pub z2: DVector<T>,
    /// `(gamma2 / N) tr Cov[x]`.
    pub alpha_x: f64,
    /// `(tau2 / M) tr Cov[z]` with `Cov[z] = A Cov[x] A^H`.
    pub alpha_z: f64,
}

/// Minimizes `gamma2 |x - r2|^2 + tau2 |A x - p2|^2` through the cached SVD:
///
/// ```text
/// x2 = r2 + V [ D (gamma2 V^H r2 + tau2 S U^H p2) - V^H r2 ],   D = diag(1/(gamma2 + tau2 s^2))
/// ```
///
/// The `r2 - V V^H r2` part is the unconstrained component of `r2` outside the
/// row space of `A`, which the data leave untouched.
pub fn lmmse_solve<T: Field>(
    op: &LinearOperator<T>,
    r2: &DVector<T>,
    gamma2: f64,
    p2: &DVector<T>,
    tau2: f64,
) -> Result<LmmseResult<T>> {
    for (name, v) in [("gamma2", gamma2), ("tau2", tau2)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(domain("lmmse_solve", format!("{name} = {v}")));
        }
    }
    let (m, n) = (op.nrows(), op.ncols());
    if r2.len() != n || p2.len() != m {
        return Err(Error::Dimension(format!(
            "operator is {m}x{n}, got r2 of length {} and p2 of length {}",
            r2.len(),
            p2.len()
        )));
    }

    let s = op.singular_values();
    let v = op.v();
    let vr = v.ad_mul(r2);
    let up = op.u().ad_mul(p2);

    let mut coeff = DVector::zeros(s.len());
    let mut trace_x = (n - s.len()) as f64;
    let mut trace_z = 0.0;
    for i in 0..s.len() {
        let s2 = s[i] * s[i];
        let d = 1.0 / (gamma2 + tau2 * s2);
        coeff[i] = (vr[i].scale(gamma2) + up[i].scale(tau2 * s[i])).scale(d) - vr[i];
        trace_x += gamma2 * d;
        trace_z += s2 * d;
    }
    let x2 = r2 + v * coeff;
    let z2 = op.apply(&x2);
    Ok(LmmseResult {
        x2,
        z2,
        alpha_x: trace_x / n as f64,
        alpha_z: tau2 * trace_z / m as f64,
    })
}
