//! The tensor norm `d_p^Lip` on `X_1 ⊗ ... ⊗ X_n ⊗ Y`.
//!
//! Upper bounds come from explicit representations `z = Σ (u_i − v_i) ⊗ y_i`,
//! each valued at `D_{p'}(pairs) · (Σ ‖y_i‖^p)^{1/p}` with the certified upper
//! of the configuration denominator. Lower bounds pair `z` with operators whose
//! `π_{p'}^Lip` has a known upper bound.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::form_norm::{
    config_denominator, denominator, lp_norm, operator_norm_with, projective_upper, Ball, DenominatorOptions,
    Geometry, NormOptions,
};
use crate::linalg::{least_squares, rank};
use crate::report::{inf_or_null, BoundReport};
use crate::rng::{self, domain};
use crate::summing::{certified_summing_upper, lp_constant_on, Budget};
use crate::tensor::{outer, strides, vector_norm, DenseTensor, MultilinearOperator, Norm, PairConfiguration, SegrePoint};

/// An element of `X_1 ⊗ ... ⊗ X_n ⊗ Y`, kernel shape `(d_1, ..., d_n, m)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MixedRepr", into = "MixedRepr")]
pub struct MixedTensor {
    tensor: DenseTensor,
    factor_norms: Vec<Norm>,
    codomain_norm: Norm,
}

#[derive(Serialize, Deserialize)]
struct MixedRepr {
    #[serde(default)]
    role: Option<String>,
    shape: Vec<usize>,
    data: Vec<f64>,
    #[serde(default)]
    factor_norms: Option<Vec<Norm>>,
    #[serde(default)]
    codomain_norm: Option<Norm>,
}

impl TryFrom<MixedRepr> for MixedTensor {
    type Error = Error;
    fn try_from(r: MixedRepr) -> Result<Self> {
        if let Some(role) = &r.role {
            if role != "mixed" {
                return Err(Error::Schema(format!("expected role \"mixed\", found \"{role}\"")));
            }
        }
        let tensor = DenseTensor::new(r.shape, r.data).map_err(|e| Error::Schema(e.to_string()))?;
        let n = tensor.order().saturating_sub(1);
        let norms = r.factor_norms.unwrap_or_else(|| vec![Norm::L2; n]);
        MixedTensor::new(tensor, norms, r.codomain_norm.unwrap_or(Norm::L2)).map_err(|e| Error::Schema(e.to_string()))
    }
}

impl From<MixedTensor> for MixedRepr {
    fn from(z: MixedTensor) -> Self {
        MixedRepr {
            role: Some("mixed".into()),
            shape: z.tensor.shape().to_vec(),
            data: z.tensor.into_data(),
            factor_norms: Some(z.factor_norms),
            codomain_norm: Some(z.codomain_norm),
        }
    }
}

impl MixedTensor {
    pub fn new(tensor: DenseTensor, factor_norms: Vec<Norm>, codomain_norm: Norm) -> Result<Self> {
        if tensor.order() < 2 {
            return Err(Error::shape("mixed tensor needs shape (d1, ..., dn, m) with n >= 1"));
        }
        if factor_norms.len() != tensor.order() - 1 {
            return Err(Error::NormSpec(format!(
                "{} factor norms given for {} factors",
                factor_norms.len(),
                tensor.order() - 1
            )));
        }
        Ok(MixedTensor { tensor, factor_norms, codomain_norm })
    }

    pub fn euclidean(tensor: DenseTensor) -> Result<Self> {
        let n = tensor.order().saturating_sub(1);
        Self::new(tensor, vec![Norm::L2; n], Norm::L2)
    }

    /// `(x_1 ⊗ ... ⊗ x_n) ⊗ y`.
    pub fn elementary(x: &SegrePoint, y: &[f64], factor_norms: Vec<Norm>, codomain_norm: Norm) -> Result<Self> {
        let mut factors = x.factors.clone();
        factors.push(y.to_vec());
        let mut shape = x.dims();
        shape.push(y.len());
        Self::new(DenseTensor::new(shape, outer(&factors))?, factor_norms, codomain_norm)
    }

    pub fn tensor(&self) -> &DenseTensor {
        &self.tensor
    }

    pub fn factor_norms(&self) -> &[Norm] {
        &self.factor_norms
    }

    pub fn codomain_norm(&self) -> Norm {
        self.codomain_norm
    }

    pub fn factor_dims(&self) -> &[usize] {
        let s = self.tensor.shape();
        &s[..s.len() - 1]
    }

    pub fn codomain_dim(&self) -> usize {
        *self.tensor.shape().last().unwrap()
    }

    pub fn scaled(&self, t: f64) -> Self {
        MixedTensor { tensor: self.tensor.scaled(t), ..self.clone() }
    }

    pub fn add(&self, other: &MixedTensor) -> Result<Self> {
        if self.tensor.shape() != other.tensor.shape()
            || self.factor_norms != other.factor_norms
            || self.codomain_norm != other.codomain_norm
        {
            return Err(Error::shape("mixed tensors live in different spaces"));
        }
        let data = self.tensor.data().iter().zip(other.tensor.data()).map(|(a, b)| a + b).collect();
        Self::new(DenseTensor::new(self.tensor.shape().to_vec(), data)?, self.factor_norms.clone(), self.codomain_norm)
    }
}

/// One term `(u − v) ⊗ y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub u: SegrePoint,
    pub v: SegrePoint,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Representation {
    pub terms: Vec<Term>,
}

impl Representation {
    /// `Σ (u_i − v_i) ⊗ y_i` as flat data of shape `(dims, m)`.
    pub fn reconstruct(&self, dims: &[usize], m: usize) -> Vec<f64> {
        let width: usize = dims.iter().product();
        let mut out = vec![0.0; width * m];
        for term in &self.terms {
            let pu = term.u.outer_flat();
            let pv = term.v.outer_flat();
            for i in 0..width {
                let d = pu[i] - pv[i];
                if d != 0.0 {
                    for (o, y) in out[i * m..(i + 1) * m].iter_mut().zip(&term.y) {
                        *o += d * y;
                    }
                }
            }
        }
        out
    }

    /// Relative Frobenius reconstruction error (absolute when `z = 0`).
    pub fn residual(&self, z: &MixedTensor) -> f64 {
        let r = self.reconstruct(z.factor_dims(), z.codomain_dim());
        let err: f64 = r.iter().zip(z.tensor.data()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = z.tensor.frobenius_norm();
        if scale > 0.0 {
            err / scale
        } else {
            err
        }
    }

    fn scaled_y(mut self, s: f64) -> Self {
        for t in &mut self.terms {
            t.y.iter_mut().for_each(|x| *x *= s);
        }
        self
    }
}

/// `p' = p / (p − 1)`, with `p = ∞ ↦ 1`; `p ≤ 1` is rejected.
pub fn conjugate_exponent(p: f64) -> Result<f64> {
    if p.is_nan() || p <= 1.0 {
        return Err(Error::arg(format!("exponent p = {p} must exceed 1")));
    }
    Ok(if p.is_infinite() { 1.0 } else { p / (p - 1.0) })
}

/// `(Σ ‖y_i‖^p)^{1/p}`; the maximum for `p = ∞`.
pub fn delta_p_norm(ys: &[Vec<f64>], p: f64, r: Norm) -> f64 {
    let norms: Vec<f64> = ys.iter().map(|y| vector_norm(y, r)).collect();
    if p.is_infinite() {
        norms.into_iter().fold(0.0, f64::max)
    } else {
        lp_norm(&norms, p)
    }
}

/// `ε(Σ e_i ⊗ (u_i − v_i))`, i.e. the operator-ball configuration denominator.
pub fn epsilon_norm_diff(cfg: &PairConfiguration, p: f64, factor_norms: &[Norm]) -> Result<BoundReport> {
    config_denominator(cfg, p, Ball::Operator, factor_norms)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpBudget {
    /// Starts of the alternating least-squares search.
    pub restarts: usize,
    pub als_iter: usize,
    pub residual_tol: f64,
    pub seed: u64,
}

impl Default for DpBudget {
    fn default() -> Self {
        DpBudget { restarts: 8, als_iter: 200, residual_tol: 1e-8, seed: 0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DpUpper {
    pub report: BoundReport,
    pub representation: Representation,
    pub residual: f64,
}

fn value_options() -> DenominatorOptions {
    DenominatorOptions { restarts: 1, max_iter: 50, ..DenominatorOptions::default() }
}

/// Certified value `D_{p'}^{cu}(pairs) · Δ_p(y)` of a representation.
pub fn representation_value(rep: &Representation, z: &MixedTensor, p: f64) -> Result<f64> {
    let q = conjugate_exponent(p)?;
    let dims = z.factor_dims();
    let mut pairs = Vec::new();
    let mut ys = Vec::new();
    let probe = PairConfiguration::new(rep.terms.iter().map(|t| (t.u.clone(), t.v.clone())).collect());
    let probe = match probe {
        Ok(c) => c,
        Err(_) if rep.terms.is_empty() => return Ok(0.0),
        Err(e) => return Err(e),
    };
    for (i, t) in rep.terms.iter().enumerate() {
        if t.u.dims() != dims || t.v.dims() != dims || t.y.len() != z.codomain_dim() {
            return Err(Error::shape(format!("term {i} does not match the tensor's spaces")));
        }
        if probe.is_degenerate(i) || t.y.iter().all(|&x| x == 0.0) {
            continue;
        }
        pairs.push((t.u.clone(), t.v.clone()));
        ys.push(t.y.clone());
    }
    if pairs.is_empty() {
        return Ok(0.0);
    }
    let cfg = PairConfiguration::new(pairs)?;
    let d = denominator(&cfg, q, Geometry::Operator, z.factor_norms(), &value_options())?;
    Ok(d.report.certified_upper * delta_p_norm(&ys, p, z.codomain_norm()))
}

/// Split a tensor on `dims` into elementary terms by recursive SVD.
fn elementary_split(w: &[f64], dims: &[usize]) -> Vec<Vec<Vec<f64>>> {
    if dims.len() == 1 {
        return if w.iter().any(|&x| x != 0.0) { vec![vec![w.to_vec()]] } else { Vec::new() };
    }
    let rest: usize = dims[1..].iter().product();
    let m = DMatrix::from_row_slice(dims[0], rest, w);
    let svd = m.svd(true, true);
    let top = svd.singular_values.iter().fold(0.0f64, |a, &b| a.max(b));
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut out = Vec::new();
    for (s, &sigma) in svd.singular_values.iter().enumerate() {
        if sigma <= 1e-14 * top || sigma == 0.0 {
            continue;
        }
        let us: Vec<f64> = u.column(s).iter().copied().collect();
        let vs: Vec<f64> = vt.row(s).iter().map(|x| x * sigma).collect();
        for mut tail in elementary_split(&vs, &dims[1..]) {
            tail.insert(0, us.clone());
            out.push(tail);
        }
    }
    out
}

/// Exact representation with `v_i = 0` from the SVD of the
/// `(factors) × (codomain)` flattening.
fn svd_representation(z: &[f64], dims: &[usize], m: usize) -> Representation {
    let width: usize = dims.iter().product();
    let zm = DMatrix::from_row_slice(width, m, z);
    let svd = zm.svd(true, true);
    let top = svd.singular_values.iter().fold(0.0f64, |a, &b| a.max(b));
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut terms = Vec::new();
    for (s, &sigma) in svd.singular_values.iter().enumerate() {
        if sigma <= 1e-14 * top || sigma == 0.0 {
            continue;
        }
        let a: Vec<f64> = u.column(s).iter().copied().collect();
        let b: Vec<f64> = vt.row(s).iter().map(|x| x * sigma).collect();
        for factors in elementary_split(&a, dims) {
            terms.push(Term { u: SegrePoint::new(factors), v: SegrePoint::zeros(dims), y: b.clone() });
        }
    }
    Representation { terms }
}

/// Given the pair points, solve for the `y_i` by least squares.
fn repair_y(rep: &mut Representation, z: &[f64], dims: &[usize], m: usize) {
    let width: usize = dims.iter().product();
    let k = rep.terms.len();
    if k == 0 {
        return;
    }
    let mut e = DMatrix::zeros(width, k);
    for (c, t) in rep.terms.iter().enumerate() {
        let pu = t.u.outer_flat();
        let pv = t.v.outer_flat();
        for i in 0..width {
            e[(i, c)] = pu[i] - pv[i];
        }
    }
    let b = DMatrix::from_row_slice(width, m, z);
    let y = least_squares(&e, &b);
    for (c, t) in rep.terms.iter_mut().enumerate() {
        t.y = (0..m).map(|l| y[(c, l)]).collect();
    }
}

/// CP alternating least squares with `k` rank-one terms over all `n + 1` modes.
fn cp_als(z: &[f64], shape: &[usize], k: usize, iters: usize, seed: u64, start: u64) -> Vec<DMatrix<f64>> {
    let modes = shape.len();
    let mut r = rng::stream(seed, domain::REPRESENTATION, start);
    let mut a: Vec<DMatrix<f64>> =
        shape.iter().map(|&d| DMatrix::from_vec(d, k, rng::gaussian_vec(&mut r, d * k))).collect();
    let st = strides(shape);
    let total = z.len();
    let index = |off: usize, mode: usize| (off / st[mode]) % shape[mode];
    let mut prev = f64::INFINITY;
    for _ in 0..iters {
        for mode in 0..modes {
            let mut mm = DMatrix::zeros(shape[mode], k);
            for (off, &zv) in z.iter().enumerate().take(total) {
                if zv == 0.0 {
                    continue;
                }
                for c in 0..k {
                    let mut prod = zv;
                    for (j, aj) in a.iter().enumerate() {
                        if j != mode {
                            prod *= aj[(index(off, j), c)];
                        }
                    }
                    mm[(index(off, mode), c)] += prod;
                }
            }
            let mut g = DMatrix::from_element(k, k, 1.0);
            for (j, aj) in a.iter().enumerate() {
                if j != mode {
                    g.component_mul_assign(&(aj.transpose() * aj));
                }
            }
            // a_mode = M G^+ solved as G a_modeᵀ = Mᵀ.
            let sol = least_squares(&g, &mm.transpose());
            a[mode] = sol.transpose();
        }
        let fit = cp_residual(z, shape, &a);
        if (prev - fit).abs() <= 1e-14 * prev.max(1.0) || fit < 1e-14 {
            break;
        }
        prev = fit;
    }
    a
}

fn cp_residual(z: &[f64], shape: &[usize], a: &[DMatrix<f64>]) -> f64 {
    let st = strides(shape);
    let k = a[0].ncols();
    let mut err = 0.0;
    for (off, &zv) in z.iter().enumerate() {
        let mut s = 0.0;
        for c in 0..k {
            let mut prod = 1.0;
            for (j, aj) in a.iter().enumerate() {
                prod *= aj[((off / st[j]) % shape[j], c)];
            }
            s += prod;
        }
        err += (s - zv).powi(2);
    }
    err.sqrt()
}

/// Rescale each pair against its `y_i` so the rowwise bound of the value
/// becomes `Σ_i b_i ‖y_i‖` (Hölder equality).
fn balanced(rep: &Representation, norms: &[Norm], cnorm: Norm, p: f64, q: f64) -> Representation {
    let mut out = rep.clone();
    for t in &mut out.terms {
        let b = projective_upper(&t.u.factors, &t.v.factors, norms);
        let w = vector_norm(&t.y, cnorm);
        if b <= 0.0 || w <= 0.0 {
            continue;
        }
        let s = if p.is_infinite() { w / b } else { (w.powf(p) / b.powf(q)).powf(1.0 / (p + q)) };
        t.u.factors[0].iter_mut().for_each(|x| *x *= s);
        t.v.factors[0].iter_mut().for_each(|x| *x *= s);
        t.y.iter_mut().for_each(|x| *x /= s);
    }
    out
}

/// Best certified representation value over an exact SVD representation
/// (only when `k` is unset or large enough) and CP-ALS fits with `k` terms
/// (default `2 · rank` of the flattening).
pub fn dp_upper(z: &MixedTensor, p: f64, k: Option<usize>, budget: &DpBudget) -> Result<DpUpper> {
    let q = conjugate_exponent(p)?;
    let dims = z.factor_dims().to_vec();
    let m = z.codomain_dim();
    let fro = z.tensor.frobenius_norm();
    if fro == 0.0 {
        let report = BoundReport::zero("representation").with_meta(0, 0, budget.seed);
        return Ok(DpUpper { report, representation: Representation::default(), residual: 0.0 });
    }
    // Work on z / ‖z‖_F so the search is scale-free.
    let zn: Vec<f64> = z.tensor.data().iter().map(|x| x / fro).collect();
    let width: usize = dims.iter().product();
    let r = rank(&DMatrix::from_row_slice(width, m, &zn), 1e-12);
    let k_target = k.unwrap_or(2 * r).max(1);

    let mut candidates: Vec<Representation> = Vec::new();
    let exact = svd_representation(&zn, &dims, m);
    if k.is_none() || exact.terms.len() <= k_target {
        candidates.push(exact);
    }
    let mut shape = dims.clone();
    shape.push(m);
    let mut best_residual = f64::INFINITY;
    let zn_mixed = z.scaled(1.0 / fro);
    for start in 0..budget.restarts {
        let a = cp_als(&zn, &shape, k_target, budget.als_iter, budget.seed, start as u64);
        let terms = (0..k_target)
            .map(|c| Term {
                u: SegrePoint::new((0..dims.len()).map(|j| a[j].column(c).iter().copied().collect()).collect()),
                v: SegrePoint::zeros(&dims),
                y: vec![0.0; m],
            })
            .collect();
        let mut rep = Representation { terms };
        repair_y(&mut rep, &zn, &dims, m);
        let res = rep.residual(&zn_mixed);
        best_residual = best_residual.min(res);
        if res <= budget.residual_tol {
            candidates.push(rep);
        }
    }
    if candidates.is_empty() {
        return Err(Error::IncreaseTerms { terms: k_target, residual: best_residual });
    }

    let mut best: Option<(f64, Representation)> = None;
    for rep in candidates {
        let scaled = balanced(&rep, z.factor_norms(), z.codomain_norm(), p, q);
        for cand in [rep, scaled] {
            let v = representation_value(&cand, &zn_mixed, p)?;
            if best.as_ref().is_none_or(|(b, _)| v < *b) {
                best = Some((v, cand));
            }
        }
    }
    let (value, rep) = best.expect("at least one candidate");
    let rep = rep.scaled_y(fro);
    let residual = rep.residual(z);
    let value = value * fro;
    let report = BoundReport {
        certified_lower: 0.0,
        heuristic_lower: 0.0,
        heuristic_upper: value,
        certified_upper: value,
        method: format!("representation/{}-terms", rep.terms.len()),
        iterations: budget.als_iter,
        restarts: budget.restarts,
        seed: budget.seed,
    };
    Ok(DpUpper { report, representation: rep, residual })
}

/// Operator `T` into `ℝ^m` (carrying the dual codomain norm) with an upper
/// estimate of `π_{p'}^Lip(T)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Witness {
    pub operator: MultilinearOperator,
    #[serde(with = "inf_or_null")]
    pub pi_upper: f64,
    /// Whether `pi_upper` is a proven bound.
    pub certified: bool,
}

impl Witness {
    /// `(⊗ f_k) ⊗ y*`, whose summing norm is `∏ ‖f_k‖_* · ‖y*‖_*` for every exponent.
    pub fn rank_one(fs: &[Vec<f64>], y_star: &[f64], z: &MixedTensor) -> Result<Witness> {
        let dims = z.factor_dims();
        if fs.len() != dims.len() || fs.iter().zip(dims).any(|(f, &d)| f.len() != d) || y_star.len() != z.codomain_dim() {
            return Err(Error::shape("witness factors do not match the tensor"));
        }
        let mut factors = fs.to_vec();
        factors.push(y_star.to_vec());
        let kernel = DenseTensor::new(z.tensor.shape().to_vec(), outer(&factors))?;
        let cdual = z.codomain_norm.dual();
        let operator = MultilinearOperator::new(kernel, z.factor_norms.clone(), cdual)?;
        let pi_upper = fs.iter().zip(&z.factor_norms).map(|(f, r)| vector_norm(f, r.dual())).product::<f64>()
            * vector_norm(y_star, cdual);
        Ok(Witness { operator, pi_upper, certified: true })
    }
}

/// `⟨T̂, z⟩`, the full contraction.
pub fn pairing(t: &MultilinearOperator, z: &MixedTensor) -> Result<f64> {
    if t.kernel().shape() != z.tensor.shape() {
        return Err(Error::shape("witness kernel shape differs from the tensor"));
    }
    Ok(t.kernel().data().iter().zip(z.tensor.data()).map(|(a, b)| a * b).sum())
}

/// Rank-one injective maximizer plus `z` itself as an operator.
pub fn default_witnesses(z: &MixedTensor, p: f64, seed: u64) -> Result<Vec<Witness>> {
    let q = conjugate_exponent(p)?;
    let n = z.factor_dims().len();
    let mut out = Vec::new();
    if z.tensor.is_zero() {
        return Ok(out);
    }
    let mut slot_norms: Vec<Norm> = z.factor_norms.iter().map(|r| r.dual()).collect();
    slot_norms.push(z.codomain_norm.dual());
    let inj = MultilinearOperator::form(z.tensor.clone(), slot_norms)?;
    let arg = operator_norm_with(&inj, &NormOptions { seed, ..NormOptions::default() }).argmax;
    out.push(Witness::rank_one(&arg.factors[..n], &arg.factors[n], z)?);

    let t = MultilinearOperator::new(z.tensor.clone(), z.factor_norms.clone(), z.codomain_norm.dual())?;
    let upper = certified_summing_upper(&t, q, Ball::Operator);
    if upper.is_finite() {
        out.push(Witness { operator: t, pi_upper: upper, certified: true });
    } else {
        let budget = Budget { rounds: 3, restarts: 4, seed, ..Budget::default() };
        let est = crate::summing::estimate_pi_lip(&t, q, &budget)?;
        out.push(Witness { operator: t, pi_upper: est.heuristic_upper, certified: false });
    }
    Ok(out)
}

/// `max |⟨T̂, z⟩| / π_{p'}` over witnesses. Only certified witnesses enter
/// `certified_lower`; the rest contribute to `heuristic_lower`.
pub fn dp_lower_dual(z: &MixedTensor, p: f64, witnesses: &[Witness]) -> Result<BoundReport> {
    conjugate_exponent(p)?;
    let mut cl: f64 = 0.0;
    let mut hl: f64 = 0.0;
    for (i, w) in witnesses.iter().enumerate() {
        if w.operator.factor_norms() != z.factor_norms() || w.operator.codomain_norm() != z.codomain_norm.dual() {
            return Err(Error::NormSpec(format!("witness {i} does not act on the dual space of the tensor")));
        }
        let a = pairing(&w.operator, z)?.abs();
        if a == 0.0 {
            continue;
        }
        let ratio = if w.pi_upper > 0.0 { a / w.pi_upper } else { continue };
        hl = hl.max(ratio);
        if w.certified {
            cl = cl.max(ratio);
        }
    }
    Ok(BoundReport {
        certified_lower: cl,
        heuristic_lower: hl.max(cl),
        heuristic_upper: f64::INFINITY,
        certified_upper: f64::INFINITY,
        method: "dual-witness".into(),
        iterations: witnesses.len(),
        restarts: 0,
        seed: 0,
    }
    .clamped())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominationCheck {
    /// `Δ_p` of the weighted mapped differences.
    pub lhs: f64,
    #[serde(with = "inf_or_null")]
    pub constant: f64,
    pub epsilon_upper: f64,
    #[serde(with = "inf_or_null")]
    pub rhs: f64,
    pub holds: bool,
}

/// `Δ_p((1 ⊗ T̂)(Σ e_i ⊗ (u_i − v_i))) ≤ C · ε(Σ e_i ⊗ (u_i − v_i))` with `C`
/// the LP constant of `T` on `cfg`.
pub fn check_difference_domination(
    t: &MultilinearOperator,
    cfg: &PairConfiguration,
    p: f64,
    budget: &Budget,
) -> Result<DominationCheck> {
    let (cfg, _) = cfg.without_degenerate()?;
    let mapped: Vec<Vec<f64>> = (0..cfg.len())
        .map(|i| {
            let s = cfg.weights()[i].powf(1.0 / p);
            t.apply_linearized(&cfg.difference(i)).into_iter().map(|x| x * s).collect()
        })
        .collect();
    let lhs = delta_p_norm(&mapped, p, t.codomain_norm());
    let cert = lp_constant_on(t, &cfg, p, budget)?;
    let eps = epsilon_norm_diff(&cfg, p, t.factor_norms())?;
    let rhs = if lhs == 0.0 { 0.0 } else { cert.constant * eps.certified_upper };
    Ok(DominationCheck {
        lhs,
        constant: cert.constant,
        epsilon_upper: eps.certified_upper,
        rhs,
        holds: lhs <= rhs + 1e-7,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn e(d: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        v
    }

    #[test]
    fn delta_examples() {
        assert_eq!(delta_p_norm(&[vec![3.0, 4.0]], 2.0, Norm::L2), 5.0);
        assert_relative_eq!(delta_p_norm(&[e(2, 0), e(2, 1)], 2.0, Norm::L2), 2.0f64.sqrt());
        assert_eq!(delta_p_norm(&[vec![1.0], vec![1.0], vec![1.0]], 1.0, Norm::L2), 3.0);
    }

    #[test]
    fn conjugates() {
        assert_eq!(conjugate_exponent(2.0).unwrap(), 2.0);
        assert_eq!(conjugate_exponent(f64::INFINITY).unwrap(), 1.0);
        assert!(conjugate_exponent(1.0).is_err());
    }

    #[test]
    fn coordinate_tensor_bracket_is_one() {
        let x = SegrePoint::new(vec![e(2, 0), e(2, 0)]);
        let z = MixedTensor::elementary(&x, &e(2, 0), vec![Norm::L2; 2], Norm::L2).unwrap();
        let up = dp_upper(&z, 2.0, None, &DpBudget::default()).unwrap();
        assert_relative_eq!(up.report.certified_upper, 1.0, max_relative = 1e-9);
        let w = Witness::rank_one(&[e(2, 0), e(2, 0)], &e(2, 0), &z).unwrap();
        let lo = dp_lower_dual(&z, 2.0, &[w]).unwrap();
        assert_relative_eq!(lo.certified_lower, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn elementary_saturation() {
        let a = vec![0.6, -0.8, 0.3];
        let b = vec![1.5, 0.5];
        let y = vec![2.0, -1.0];
        let x = SegrePoint::new(vec![a.clone(), b.clone()]);
        let z = MixedTensor::elementary(&x, &y, vec![Norm::L2; 2], Norm::L2).unwrap();
        let norms = vector_norm(&a, Norm::L2) * vector_norm(&b, Norm::L2) * vector_norm(&y, Norm::L2);
        let unit = |v: &Vec<f64>| {
            let n = vector_norm(v, Norm::L2);
            v.iter().map(|x| x / n).collect::<Vec<f64>>()
        };
        let w = Witness::rank_one(&[unit(&a), unit(&b)], &unit(&y), &z).unwrap();
        let lo = dp_lower_dual(&z, 2.0, &[w]).unwrap();
        assert_relative_eq!(lo.certified_lower, norms, max_relative = 1e-12);
        let up = dp_upper(&z, 2.0, None, &DpBudget::default()).unwrap();
        assert!(up.report.certified_upper <= norms * (1.0 + 1e-9));
        assert!(up.residual <= 1e-12);
        let d = default_witnesses(&z, 2.0, 0).unwrap();
        let lo = dp_lower_dual(&z, 2.0, &d).unwrap();
        assert!(lo.certified_lower >= norms * (1.0 - 1e-9), "{lo:?}");
    }

    #[test]
    fn zero_tensor() {
        let z = MixedTensor::euclidean(DenseTensor::zeros(vec![2, 2, 2])).unwrap();
        assert_eq!(dp_upper(&z, 2.0, None, &DpBudget::default()).unwrap().report.certified_upper, 0.0);
        assert_eq!(dp_lower_dual(&z, 2.0, &default_witnesses(&z, 2.0, 0).unwrap()).unwrap().certified_lower, 0.0);
    }

    #[test]
    fn single_term_value_is_denominator_times_norm() {
        let x = SegrePoint::new(vec![vec![1.0, 2.0], vec![0.5, -1.0]]);
        let y = vec![3.0, 4.0];
        let z = MixedTensor::elementary(&x, &y, vec![Norm::L1, Norm::Inf], Norm::L2).unwrap();
        let cfg = PairConfiguration::new(vec![(x.clone(), SegrePoint::zeros(&[2, 2]))]).unwrap();
        let d = config_denominator(&cfg, 2.0, Ball::Operator, &[Norm::L1, Norm::Inf]).unwrap();
        let up = dp_upper(&z, 2.0, None, &DpBudget::default()).unwrap();
        assert!(up.report.certified_upper <= d.certified_upper * 5.0 * (1.0 + 1e-9));
        let rep = Representation { terms: vec![Term { u: x, v: SegrePoint::zeros(&[2, 2]), y }] };
        assert_relative_eq!(representation_value(&rep, &z, 2.0).unwrap(), d.certified_upper * 5.0, max_relative = 1e-12);
    }

    #[test]
    fn explicit_small_k_fails_with_increase_terms() {
        let mut r = rng::stream(5, domain::GENERATOR, 0);
        let z = MixedTensor::euclidean(DenseTensor::new(vec![3, 3, 3], rng::gaussian_vec(&mut r, 27)).unwrap()).unwrap();
        let budget = DpBudget { restarts: 2, als_iter: 50, ..DpBudget::default() };
        assert!(matches!(dp_upper(&z, 2.0, Some(1), &budget), Err(Error::IncreaseTerms { terms: 1, .. })));
    }

    #[test]
    fn linear_case_is_frobenius() {
        // For n = 1 with l2 norms and p = 2 the value is exactly ‖Z‖_F.
        let mut r = rng::stream(9, domain::GENERATOR, 0);
        let z = MixedTensor::euclidean(DenseTensor::new(vec![3, 2], rng::gaussian_vec(&mut r, 6)).unwrap()).unwrap();
        let up = dp_upper(&z, 2.0, None, &DpBudget::default()).unwrap();
        assert_relative_eq!(up.report.certified_upper, z.tensor().frobenius_norm(), max_relative = 1e-9);
    }

    #[test]
    fn scalar_product_domination() {
        let t = MultilinearOperator::scalar_product(2);
        let cfg = PairConfiguration::new(vec![
            (SegrePoint::new(vec![vec![1.0], vec![2.0]]), SegrePoint::new(vec![vec![-1.0], vec![0.5]])),
            (SegrePoint::new(vec![vec![0.3], vec![1.0]]), SegrePoint::zeros(&[1, 1])),
        ])
        .unwrap();
        let c = check_difference_domination(&t, &cfg, 2.0, &Budget::default()).unwrap();
        assert!(c.holds, "{c:?}");
        assert_relative_eq!(c.constant, 1.0, max_relative = 1e-9);
        let z = MultilinearOperator::zero(&[1, 1], 1, vec![Norm::L2; 2], Norm::L2).unwrap();
        let c = check_difference_domination(&z, &cfg, 2.0, &Budget::default()).unwrap();
        assert_eq!(c.lhs, 0.0);
        assert!(c.holds);
    }

    #[test]
    fn mixed_json_role() {
        let z: MixedTensor = serde_json::from_str(r#"{"role":"mixed","shape":[1,1],"data":[2.0]}"#).unwrap();
        assert_eq!(z.tensor().data(), &[2.0]);
        assert!(serde_json::from_str::<MixedTensor>(r#"{"role":"operator","shape":[1,1],"data":[2.0]}"#).is_err());
        let s = serde_json::to_string(&z).unwrap();
        assert!(s.contains("\"role\":\"mixed\""));
    }
}
