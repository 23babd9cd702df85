//! Hilbert-Schmidt norm, Khintchine constants and the basis-configuration
//! side of the HS sandwich.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::form_norm::{check_p, Ball, DenominatorOptions, ENUMERATION_CAP};
use crate::rng::{self, StreamRng};
use crate::summing::{lower_bound_config_with, lp_constant_on, Budget};
use crate::tensor::{basis_configuration, strides, DenseTensor, MultilinearOperator};

/// Largest `d_1 ⋯ d_n` for which the basis configuration is built.
pub const BASIS_CAP: usize = ENUMERATION_CAP;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KhintchineConstant {
    pub p: f64,
    pub value: f64,
}

/// `B_p`: 1 for `p ≤ 2`, the Gaussian moment constant `√2 (Γ((p+1)/2)/√π)^{1/p}` above.
pub fn khintchine_constant(p: f64) -> Result<KhintchineConstant> {
    check_p(p)?;
    let value = if p <= 2.0 {
        1.0
    } else {
        let ln = ln_gamma((p + 1.0) / 2.0) - 0.5 * std::f64::consts::PI.ln();
        (2.0f64.sqrt() * (ln / p).exp()).max(1.0)
    };
    Ok(KhintchineConstant { p, value })
}

fn require_euclidean(t: &MultilinearOperator) -> Result<()> {
    if !t.is_euclidean() {
        return Err(Error::arg("Hilbert-Schmidt quantities need l2 on every factor and the codomain"));
    }
    Ok(())
}

/// Frobenius norm of the kernel.
pub fn hs_norm(t: &MultilinearOperator) -> Result<f64> {
    require_euclidean(t)?;
    Ok(t.kernel().frobenius_norm())
}

/// `N / D` for the full basis configuration under the HS ball at `p = 2`.
pub fn basis_config_lower(t: &MultilinearOperator) -> Result<f64> {
    require_euclidean(t)?;
    let width: usize = t.factor_dims().iter().product();
    if width > BASIS_CAP {
        return Err(Error::arg(format!("basis configuration of {width} pairs exceeds the cap {BASIS_CAP}")));
    }
    let cfg = basis_configuration(t.factor_dims())?;
    let lb = lower_bound_config_with(t, &cfg, 2.0, Ball::HilbertSchmidt, &DenominatorOptions::default())?;
    Ok(lb.report.certified_lower)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub p: f64,
    pub hs_norm: f64,
    pub basis_lower: f64,
    /// HS-ball LP constant (exponent 2) on the basis pair set.
    pub lp_constant: f64,
    /// `lp_constant / hs_norm`; 1 when both vanish.
    pub ratio: f64,
    pub khintchine: f64,
    /// `B_p^n ‖T‖_HS`.
    pub upper_side: f64,
    pub lower_exact: bool,
    pub lp_consistent: bool,
}

impl SandwichReport {
    pub fn holds(&self) -> bool {
        self.lower_exact && self.lp_consistent
    }
}

pub fn verify_sandwich(t: &MultilinearOperator, p: f64, budget: &Budget) -> Result<SandwichReport> {
    require_euclidean(t)?;
    let b = khintchine_constant(p)?.value;
    let hs = hs_norm(t)?;
    let basis_lower = basis_config_lower(t)?;
    let cfg = basis_configuration(t.factor_dims())?;
    let lp_budget = Budget { ball: Ball::HilbertSchmidt, ..budget.clone() };
    let cert = lp_constant_on(t, &cfg, 2.0, &lp_budget)?;
    let ratio = if hs == 0.0 {
        if cert.constant == 0.0 { 1.0 } else { f64::INFINITY }
    } else {
        cert.constant / hs
    };
    Ok(SandwichReport {
        p,
        hs_norm: hs,
        basis_lower,
        lp_constant: cert.constant,
        ratio,
        khintchine: b,
        upper_side: b.powi(t.arity() as i32) * hs,
        lower_exact: (basis_lower - hs).abs() <= 1e-9 * hs.max(f64::MIN_POSITIVE),
        lp_consistent: cert.constant >= hs - 1e-7,
    })
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix, sign-fixed).
pub fn random_orthogonal(rng: &mut StreamRng, d: usize) -> DMatrix<f64> {
    let g = DMatrix::from_vec(d, d, rng::gaussian_vec(rng, d * d));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Kernel with factor `k` replaced by `Q x` (applies `Q` along mode `k`).
pub fn rotate_factor(t: &MultilinearOperator, k: usize, q: &DMatrix<f64>) -> Result<MultilinearOperator> {
    let shape = t.kernel().shape().to_vec();
    if k >= t.arity() || q.nrows() != shape[k] || q.ncols() != shape[k] {
        return Err(Error::shape("rotation does not match the factor"));
    }
    let st = strides(&shape);
    let d = shape[k];
    let data = t.kernel().data();
    let mut out = vec![0.0; data.len()];
    for (off, o) in out.iter_mut().enumerate() {
        let ik = (off / st[k]) % d;
        let base = off - ik * st[k];
        *o = (0..d).map(|j| data[base + j * st[k]] * q[(j, ik)]).sum();
    }
    t.with_kernel(DenseTensor::new(shape, out)?)
}
