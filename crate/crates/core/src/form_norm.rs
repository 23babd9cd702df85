//! Operator norms of multilinear maps and the configuration denominator
//! `D = sup_{φ ∈ B} (Σ a_i |φ(Δ_i)|^p)^{1/p}`.
//!
//! An operator `T` into `ℓ_s^m` is handled as the `(n+1)`-linear form
//! `(x_1, ..., x_n, y) ↦ <y, T(x)>` whose last slot carries `ℓ_{s'}`; its sup
//! over the unit balls is `‖T‖`. All routines below work on such forms given
//! by a flat kernel, per-slot dimensions and per-slot norms.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, axpy, dot, norm2};
use crate::report::BoundReport;
use crate::rng::{self, domain, StreamRng};
use crate::tensor::{
    contract_all_but, dual_maximizer, outer, vector_norm, DenseTensor, MultilinearOperator, Norm, PairConfiguration,
    SegrePoint,
};

/// Largest number of extreme-point combinations enumerated exactly.
pub const ENUMERATION_CAP: usize = 4096;

#[derive(Debug, Clone)]
pub struct NormOptions {
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub enumeration_cap: usize,
    pub seed: u64,
}

impl Default for NormOptions {
    fn default() -> Self {
        NormOptions { restarts: 64, max_iter: 10_000, tol: 1e-9, enumeration_cap: ENUMERATION_CAP, seed: 0 }
    }
}

/// Which unit ball of forms the denominator ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ball {
    #[serde(rename = "op")]
    Operator,
    #[serde(rename = "hs")]
    HilbertSchmidt,
}

impl Ball {
    pub fn parse(s: &str) -> Result<Ball> {
        match s {
            "op" | "operator" => Ok(Ball::Operator),
            "hs" | "hilbert-schmidt" => Ok(Ball::HilbertSchmidt),
            other => Err(Error::arg(format!("unknown ball {other:?}; expected op or hs"))),
        }
    }
}

// ---------------------------------------------------------------------------
// Norm oracle for forms

/// Extreme points of the unit ball up to a global sign; `None` for `ℓ_2`.
fn extreme_count(d: usize, r: Norm) -> Option<usize> {
    if d == 1 {
        return Some(1);
    }
    match r {
        Norm::L2 => None,
        Norm::L1 => Some(d),
        Norm::Inf if d > 20 => Some(usize::MAX),
        Norm::Inf => Some(1 << (d - 1)),
    }
}

fn extreme_point(d: usize, r: Norm, idx: usize) -> Vec<f64> {
    if d == 1 {
        return vec![1.0];
    }
    match r {
        Norm::L1 => {
            let mut e = vec![0.0; d];
            e[idx] = 1.0;
            e
        }
        _ => (0..d).map(|j| if j > 0 && (idx >> (j - 1)) & 1 == 1 { -1.0 } else { 1.0 }).collect(),
    }
}

#[derive(Debug, Clone)]
enum Plan {
    /// Enumerate extreme points of `enumerated`; the free slot is solved by its dual norm.
    Enumerate { free: usize, enumerated: Vec<usize>, count: usize },
    /// Enumerate all but two `ℓ_2` slots and take a spectral norm.
    Svd { a: usize, b: usize, enumerated: Vec<usize>, count: usize },
    /// Alternating maximization, relaxed upper bound.
    Search,
}

/// Bracket on the norm of one form.
#[derive(Debug, Clone)]
pub(crate) struct NormValue {
    /// Attained by `argmax`.
    pub lower: f64,
    pub upper: f64,
    /// Unit factors (in each slot's norm) with `F(argmax) = sign * lower`.
    pub argmax: Vec<Vec<f64>>,
    pub sign: f64,
}

/// Plans and evaluates `sup |F(x_1, ..., x_k)|` over products of `ℓ_r` balls.
#[derive(Debug, Clone)]
pub(crate) struct NormOracle {
    dims: Vec<usize>,
    norms: Vec<Norm>,
    plan: Plan,
    /// `∏ max ‖x‖_2` over each unit ball.
    beta: f64,
    splits: Vec<(Vec<usize>, Vec<usize>)>,
}

impl NormOracle {
    pub fn new(dims: &[usize], norms: &[Norm], cap: usize) -> Self {
        assert_eq!(dims.len(), norms.len());
        let k = dims.len();
        let counts: Vec<Option<usize>> = dims.iter().zip(norms).map(|(&d, &r)| extreme_count(d, r)).collect();
        let product = |skip: &[usize]| -> Option<usize> {
            let mut acc: usize = 1;
            for (i, c) in counts.iter().enumerate() {
                if skip.contains(&i) {
                    continue;
                }
                acc = acc.checked_mul((*c)?)?;
            }
            Some(acc)
        };
        let mut plan = Plan::Search;
        let mut best = usize::MAX;
        for free in 0..k {
            if let Some(c) = product(&[free]) {
                if c <= cap && c < best {
                    best = c;
                    plan = Plan::Enumerate { free, enumerated: (0..k).filter(|&i| i != free).collect(), count: c };
                }
            }
        }
        if matches!(plan, Plan::Search) {
            for a in 0..k {
                for b in a + 1..k {
                    if norms[a] != Norm::L2 || norms[b] != Norm::L2 {
                        continue;
                    }
                    if let Some(c) = product(&[a, b]) {
                        if c <= cap && c < best {
                            best = c;
                            let enumerated = (0..k).filter(|&i| i != a && i != b).collect();
                            plan = Plan::Svd { a, b, enumerated, count: c };
                        }
                    }
                }
            }
        }
        let beta = dims.iter().zip(norms).map(|(&d, &r)| r.l2_over(d)).product();
        let mut splits = Vec::new();
        if k >= 2 {
            for mask in 0..(1usize << (k - 1)) - 1 {
                let rows: Vec<usize> = std::iter::once(0).chain((1..k).filter(|j| (mask >> (j - 1)) & 1 == 1)).collect();
                let cols: Vec<usize> = (0..k).filter(|j| !rows.contains(j)).collect();
                splits.push((rows, cols));
            }
        }
        NormOracle { dims: dims.to_vec(), norms: norms.to_vec(), plan, beta, splits }
    }

    pub fn is_exact(&self) -> bool {
        !matches!(self.plan, Plan::Search)
    }

    pub fn method(&self) -> &'static str {
        match self.plan {
            Plan::Enumerate { .. } => "enumeration",
            Plan::Svd { .. } => "svd",
            Plan::Search => "relaxed",
        }
    }

    fn decode(&self, enumerated: &[usize], mut c: usize) -> Vec<Vec<f64>> {
        let mut vs: Vec<Vec<f64>> = self.dims.iter().map(|&d| vec![0.0; d]).collect();
        for &s in enumerated.iter().rev() {
            let cnt = extreme_count(self.dims[s], self.norms[s]).unwrap();
            vs[s] = extreme_point(self.dims[s], self.norms[s], c % cnt);
            c /= cnt;
        }
        vs
    }

    fn exact(&self, data: &[f64]) -> NormValue {
        let mut best_val = -1.0;
        let mut best_x = Vec::new();
        match &self.plan {
            Plan::Enumerate { free, enumerated, count } => {
                for c in 0..*count {
                    let mut vs = self.decode(enumerated, c);
                    let refs: Vec<&[f64]> = vs.iter().map(|v| v.as_slice()).collect();
                    let g = contract_all_but(&self.dims, data, &refs, *free);
                    let val = vector_norm(&g, self.norms[*free].dual());
                    if val > best_val {
                        best_val = val;
                        vs[*free] = dual_maximizer(&g, self.norms[*free])
                            .unwrap_or_else(|| unit_basis(self.dims[*free], 0));
                        best_x = vs;
                    }
                }
            }
            Plan::Svd { a, b, enumerated, count } => {
                for c in 0..*count {
                    let mut vs = self.decode(enumerated, c);
                    let mut shape = self.dims.clone();
                    let mut cur = data.to_vec();
                    for &s in enumerated.iter().rev() {
                        let (sh, d) = crate::tensor::contract_mode_raw(&shape, &cur, s, &vs[s]);
                        shape = sh;
                        cur = d;
                    }
                    let m = nalgebra::DMatrix::from_row_slice(shape[0], shape[1], &cur);
                    let (s, u, v) = linalg::top_singular_triple(&m);
                    if s > best_val {
                        best_val = s;
                        vs[*a] = normalize_or_basis(u.iter().copied().collect());
                        vs[*b] = normalize_or_basis(v.iter().copied().collect());
                        best_x = vs;
                    }
                }
            }
            Plan::Search => unreachable!("exact() called on a search plan"),
        }
        let value = form_value(&self.dims, data, &best_x);
        let lower = value.abs();
        NormValue { lower, upper: best_val.max(lower), argmax: best_x, sign: sign_of(value) }
    }

    /// Certified upper bound alone (exact when a plan allows).
    pub fn upper(&self, data: &[f64]) -> f64 {
        if self.is_exact() {
            self.exact(data).upper
        } else {
            self.relaxed_upper(data)
        }
    }

    fn relaxed_upper(&self, data: &[f64]) -> f64 {
        let t = DenseTensor::from_parts(self.dims.clone(), data.to_vec());
        let frob = t.frobenius_norm();
        let mut best = frob;
        for (rows, cols) in &self.splits {
            let m = t.flatten(rows, cols).expect("valid split");
            best = best.min(linalg::spectral_norm(&m));
        }
        if self.splits.is_empty() {
            best = vector_norm(data, self.norms[0].dual());
            return best;
        }
        self.beta * best
    }

    /// Full evaluation. `restarts` random starts plus an optional warm start
    /// are used only when no exact plan exists.
    pub fn evaluate(
        &self,
        data: &[f64],
        restarts: usize,
        max_iter: usize,
        tol: f64,
        rng: &mut StreamRng,
        warm: Option<&[Vec<f64>]>,
    ) -> NormValue {
        if self.is_exact() {
            return self.exact(data);
        }
        let mut starts: Vec<Vec<Vec<f64>>> = Vec::new();
        if let Some(w) = warm {
            starts.push(w.to_vec());
        }
        while starts.len() < restarts.max(1) + warm.is_some() as usize {
            starts.push(self.dims.iter().zip(&self.norms).map(|(&d, &r)| rng::unit_vec(rng, d, r)).collect());
        }
        let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
        for x0 in starts {
            let (val, x) = alternating(&self.dims, &self.norms, data, x0, max_iter, tol);
            if best.as_ref().is_none_or(|(b, _)| val > *b) {
                best = Some((val, x));
            }
        }
        let (_, x) = best.unwrap();
        let value = form_value(&self.dims, data, &x);
        let lower = value.abs();
        NormValue { lower, upper: self.relaxed_upper(data).max(lower), argmax: x, sign: sign_of(value) }
    }
}

fn sign_of(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

fn unit_basis(d: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; d];
    e[i] = 1.0;
    e
}

fn normalize_or_basis(v: Vec<f64>) -> Vec<f64> {
    let n = norm2(&v);
    if n > 0.0 {
        v.into_iter().map(|x| x / n).collect()
    } else {
        unit_basis(v.len(), 0)
    }
}

/// `F(x_1, ..., x_k)` for a form kernel.
pub(crate) fn form_value(dims: &[usize], data: &[f64], x: &[Vec<f64>]) -> f64 {
    let refs: Vec<&[f64]> = x.iter().map(|v| v.as_slice()).collect();
    let g = contract_all_but(dims, data, &refs, 0);
    dot(&g, &x[0])
}

/// Block-coordinate ascent: each slot in turn becomes the dual maximizer of
/// its partial gradient. The value never decreases.
pub(crate) fn alternating(
    dims: &[usize],
    norms: &[Norm],
    data: &[f64],
    mut x: Vec<Vec<f64>>,
    max_iter: usize,
    tol: f64,
) -> (f64, Vec<Vec<f64>>) {
    let mut value = form_value(dims, data, &x).abs();
    for _ in 0..max_iter {
        let prev = value;
        for k in 0..dims.len() {
            let refs: Vec<&[f64]> = x.iter().map(|v| v.as_slice()).collect();
            let g = contract_all_but(dims, data, &refs, k);
            if let Some(xk) = dual_maximizer(&g, norms[k]) {
                x[k] = xk;
                value = vector_norm(&g, norms[k].dual());
            }
        }
        if value - prev <= tol * value.max(1e-300) {
            break;
        }
    }
    (value, x)
}

// ---------------------------------------------------------------------------
// Operator norm

#[derive(Debug, Clone)]
pub struct OperatorNorm {
    pub report: BoundReport,
    /// Unit point of the factor balls attaining `certified_lower`.
    pub argmax: SegrePoint,
}

fn operator_slots(t: &MultilinearOperator) -> (Vec<usize>, Vec<Norm>) {
    let dims = t.kernel().shape().to_vec();
    let mut norms = t.factor_norms().to_vec();
    norms.push(t.codomain_norm().dual());
    (dims, norms)
}

/// `‖T‖` with default options.
pub fn operator_norm(t: &MultilinearOperator) -> BoundReport {
    operator_norm_with(t, &NormOptions::default()).report
}

pub fn operator_norm_with(t: &MultilinearOperator, opts: &NormOptions) -> OperatorNorm {
    let (dims, norms) = operator_slots(t);
    let oracle = NormOracle::new(&dims, &norms, opts.enumeration_cap);
    let data = t.kernel().data();
    let n = t.arity();
    let (value, restarts, iterations) = if oracle.is_exact() {
        (oracle.exact(data), 0, 1)
    } else {
        let runs: Vec<(f64, Vec<Vec<f64>>)> = (0..opts.restarts.max(1))
            .into_par_iter()
            .map(|i| {
                let mut r = rng::stream(opts.seed, domain::OPERATOR_NORM, i as u64);
                let x0 = dims.iter().zip(&norms).map(|(&d, &nr)| rng::unit_vec(&mut r, d, nr)).collect();
                alternating(&dims, &norms, data, x0, opts.max_iter, opts.tol)
            })
            .collect();
        let mut best = 0;
        for (i, (v, _)) in runs.iter().enumerate() {
            if *v > runs[best].0 {
                best = i;
            }
        }
        let x = runs[best].1.clone();
        let value = form_value(&dims, data, &x);
        let lower = value.abs();
        let nv = NormValue { lower, upper: oracle.relaxed_upper(data).max(lower), argmax: x, sign: sign_of(value) };
        (nv, opts.restarts.max(1), runs.len())
    };
    let argmax = SegrePoint::new(value.argmax[..n].to_vec());
    // Recompute the attained value directly on the operator.
    let attained = {
        let y = t.eval(&argmax).expect("argmax has operator dimensions");
        let denom = argmax.norm_product(t.factor_norms());
        if denom > 0.0 {
            vector_norm(&y, t.codomain_norm()) / denom
        } else {
            0.0
        }
    };
    let lower = attained.min(value.upper);
    let upper = if oracle.is_exact() { value.upper.max(lower) } else { value.upper };
    let hu = if oracle.is_exact() { upper } else { lower };
    let report = BoundReport {
        certified_lower: lower,
        heuristic_lower: lower,
        heuristic_upper: hu,
        certified_upper: upper,
        method: oracle.method().to_string(),
        iterations,
        restarts,
        seed: opts.seed,
    }
    .clamped();
    OperatorNorm { report, argmax }
}

/// Certified upper bound on the operator norm of a form kernel (flat, shape
/// `dims`) on `ℓ_{r_1} × ... × ℓ_{r_n}`.
pub fn form_norm_upper(data: &[f64], dims: &[usize], norms: &[Norm]) -> f64 {
    NormOracle::new(dims, norms, ENUMERATION_CAP).upper(data)
}

/// `κ` with `‖φ‖_F ≤ κ ‖φ‖_op` for every form on the given spaces.
pub fn kappa(dims: &[usize], norms: &[Norm]) -> f64 {
    (0..dims.len())
        .map(|f| {
            let rest: usize = dims.iter().enumerate().filter(|&(k, _)| k != f).map(|(_, &d)| d).product();
            let eta = if norms[f] == Norm::L1 { (dims[f] as f64).sqrt() } else { 1.0 };
            (rest as f64).sqrt() * eta
        })
        .fold(f64::INFINITY, f64::min)
}

// ---------------------------------------------------------------------------
// Projective bounds

/// Upper bound on the projective norm of `u_1⊗...⊗u_n − v_1⊗...⊗v_n`, i.e. on
/// `sup_{‖φ‖_op ≤ 1} |φ(Δ)|`. Exact for `n = 1`, for two `ℓ_2` factors, and
/// whenever peeling `ℓ_1` factors reduces to those cases.
pub fn projective_upper(u: &[Vec<f64>], v: &[Vec<f64>], norms: &[Norm]) -> f64 {
    let n = u.len();
    if n == 1 {
        let d: Vec<f64> = u[0].iter().zip(&v[0]).map(|(a, b)| a - b).collect();
        return vector_norm(&d, norms[0]);
    }
    let nu: Vec<f64> = u.iter().zip(norms).map(|(x, &r)| vector_norm(x, r)).collect();
    let nv: Vec<f64> = v.iter().zip(norms).map(|(x, &r)| vector_norm(x, r)).collect();
    let pu: f64 = nu.iter().product();
    let pv: f64 = nv.iter().product();
    if pu == 0.0 || pv == 0.0 {
        return pu + pv;
    }
    let dims: Vec<usize> = u.iter().map(|x| x.len()).collect();
    let diff: Vec<f64> = outer(u).iter().zip(outer(v)).map(|(a, b)| a - b).collect();
    if n == 2 && norms.iter().all(|&r| r == Norm::L2) {
        let m = nalgebra::DMatrix::from_row_slice(dims[0], dims[1], &diff);
        return linalg::nuclear_norm(&m).min(pu + pv);
    }
    let mut best = (pu + pv).min(kappa(&dims, norms) * norm2(&diff));
    if let Some(k) = norms.iter().position(|&r| r == Norm::L1) {
        // ℓ_1 ⊗̂ X = ℓ_1(X): the projective norm is the sum over slices.
        let rest_norms: Vec<Norm> = norms.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, &r)| r).collect();
        let mut sum = 0.0;
        for i in 0..dims[k] {
            let (a, b) = (u[k][i], v[k][i]);
            if a == 0.0 && b == 0.0 {
                continue;
            }
            let mut ur: Vec<Vec<f64>> = u.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, x)| x.clone()).collect();
            let mut vr: Vec<Vec<f64>> = v.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, x)| x.clone()).collect();
            ur[0].iter_mut().for_each(|x| *x *= a);
            vr[0].iter_mut().for_each(|x| *x *= b);
            sum += projective_upper(&ur, &vr, &rest_norms);
        }
        best = best.min(sum);
    }
    best.min(telescoping_bound(u, v, &nu, &nv, norms)).min(telescoping_bound(v, u, &nv, &nu, norms))
}

/// `Σ_k ‖v'_1‖⋯‖v'_{k-1}‖ ‖u'_k − v'_k‖ ‖u'_{k+1}‖⋯‖u'_n‖` minimized over
/// raw/balanced scalings and sign patterns that leave both tensors unchanged.
fn telescoping_bound(u: &[Vec<f64>], v: &[Vec<f64>], nu: &[f64], nv: &[f64], norms: &[Norm]) -> f64 {
    let n = u.len();
    let gu = nu.iter().product::<f64>().powf(1.0 / n as f64);
    let gv = nv.iter().product::<f64>().powf(1.0 / n as f64);
    let balanced = |x: &[Vec<f64>], nx: &[f64], g: f64| -> Vec<Vec<f64>> {
        x.iter().zip(nx).map(|(f, &s)| f.iter().map(|a| a * g / s).collect()).collect()
    };
    let variants = [(u.to_vec(), v.to_vec()), (balanced(u, nu, gu), balanced(v, nv, gv))];
    let mut best = f64::INFINITY;
    for (uu, vv) in &variants {
        for signs in 0..(1usize << (n - 1)) {
            let mut vs = vv.clone();
            let mut parity = 1.0;
            for (k, f) in vs.iter_mut().enumerate().take(n - 1) {
                if (signs >> k) & 1 == 1 {
                    f.iter_mut().for_each(|x| *x = -*x);
                    parity = -parity;
                }
            }
            if parity < 0.0 {
                vs[n - 1].iter_mut().for_each(|x| *x = -*x);
            }
            let un: Vec<f64> = uu.iter().zip(norms).map(|(x, &r)| vector_norm(x, r)).collect();
            let vn: Vec<f64> = vs.iter().zip(norms).map(|(x, &r)| vector_norm(x, r)).collect();
            let mut total = 0.0;
            for k in 0..n {
                let d: Vec<f64> = uu[k].iter().zip(&vs[k]).map(|(a, b)| a - b).collect();
                let left: f64 = vn[..k].iter().product();
                let right: f64 = un[k + 1..].iter().product();
                total += left * vector_norm(&d, norms[k]) * right;
            }
            best = best.min(total);
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Configuration denominator

#[derive(Debug, Clone)]
pub struct DenominatorOptions {
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub enumeration_cap: usize,
    pub seed: u64,
    /// Extra starting forms (flat kernels); any scaling.
    pub warm_starts: Vec<Vec<f64>>,
}

impl Default for DenominatorOptions {
    fn default() -> Self {
        DenominatorOptions {
            restarts: 64,
            max_iter: 10_000,
            tol: 1e-9,
            enumeration_cap: ENUMERATION_CAP,
            seed: 0,
            warm_starts: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Denominator {
    pub report: BoundReport,
    /// A form inside the ball attaining at least `certified_lower`.
    pub maximizer: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Geometry {
    Operator,
    HilbertSchmidt,
    /// Forms evaluated on the diagonal, normalized by the polynomial norm.
    Polynomial,
}

/// `D` for the given ball with default search options.
pub fn config_denominator(cfg: &PairConfiguration, p: f64, ball: Ball, factor_norms: &[Norm]) -> Result<BoundReport> {
    Ok(config_denominator_with(cfg, p, ball, factor_norms, &DenominatorOptions::default())?.report)
}

pub fn config_denominator_with(
    cfg: &PairConfiguration,
    p: f64,
    ball: Ball,
    factor_norms: &[Norm],
    opts: &DenominatorOptions,
) -> Result<Denominator> {
    let geometry = match ball {
        Ball::Operator => Geometry::Operator,
        Ball::HilbertSchmidt => Geometry::HilbertSchmidt,
    };
    denominator(cfg, p, geometry, factor_norms, opts)
}

pub(crate) fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::arg(format!("exponent p = {p} must be finite and at least 1")));
    }
    Ok(())
}

/// `(Σ |y_i|^p)^{1/p}`.
pub(crate) fn lp_norm(y: &[f64], p: f64) -> f64 {
    if p == 1.0 {
        return y.iter().map(|x| x.abs()).sum();
    }
    if p == 2.0 {
        return norm2(y);
    }
    let m = y.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if m == 0.0 {
        return 0.0;
    }
    m * y.iter().map(|x| (x.abs() / m).powf(p)).sum::<f64>().powf(1.0 / p)
}

fn psi(y: f64, p: f64) -> f64 {
    if y == 0.0 {
        0.0
    } else if p == 1.0 {
        y.signum()
    } else if p == 2.0 {
        y
    } else {
        y.signum() * y.abs().powf(p - 1.0)
    }
}

struct Rows {
    rows: Vec<Vec<f64>>,
    width: usize,
}

impl Rows {
    fn apply(&self, phi: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| dot(r, phi)).collect()
    }

    /// `Aᵀ ψ(y)`.
    fn pullback(&self, y: &[f64], p: f64) -> Vec<f64> {
        let mut g = vec![0.0; self.width];
        for (r, &yi) in self.rows.iter().zip(y) {
            let w = psi(yi, p);
            if w != 0.0 {
                axpy(&mut g, w, r);
            }
        }
        g
    }
}

struct HsBracket {
    lower: f64,
    upper: f64,
    vector: Vec<f64>,
}

/// Sup of `‖Aφ‖_p` over the Frobenius unit sphere.
fn hs_bracket(rows: &Rows, p: f64, opts: &DenominatorOptions) -> HsBracket {
    let sm = linalg::sigma_max_rows(&rows.rows, rows.width);
    if p == 2.0 {
        return HsBracket { lower: sm.lower, upper: sm.upper, vector: sm.vector };
    }
    let k = rows.rows.len() as f64;
    let row_bound = lp_norm(&rows.rows.iter().map(|r| norm2(r)).collect::<Vec<_>>(), p);
    let upper = (k.powf((1.0 / p - 0.5).max(0.0)) * sm.upper).min(row_bound);
    let mut starts = vec![sm.vector.clone()];
    for w in &opts.warm_starts {
        starts.push(w.clone());
    }
    for r in &rows.rows {
        starts.push(r.clone());
    }
    let mut rng = rng::stream(opts.seed, domain::DENOMINATOR, u64::MAX);
    for _ in 0..opts.restarts.min(16) {
        starts.push(rng::gaussian_vec(&mut rng, rows.width));
    }
    let mut best = (-1.0, sm.vector.clone());
    for s in starts {
        let n = norm2(&s);
        if n == 0.0 {
            continue;
        }
        let mut phi: Vec<f64> = s.iter().map(|x| x / n).collect();
        let mut val = lp_norm(&rows.apply(&phi), p);
        for _ in 0..opts.max_iter.min(2000) {
            let g = rows.pullback(&rows.apply(&phi), p);
            let gn = norm2(&g);
            if gn == 0.0 {
                break;
            }
            let next: Vec<f64> = g.iter().map(|x| x / gn).collect();
            let nv = lp_norm(&rows.apply(&next), p);
            if nv <= val * (1.0 + opts.tol) {
                if nv > val {
                    phi = next;
                    val = nv;
                }
                break;
            }
            phi = next;
            val = nv;
        }
        if val > best.0 {
            best = (val, phi);
        }
    }
    HsBracket { lower: best.0.min(upper), upper: upper.max(best.0), vector: best.1 }
}

/// Norm oracle for the denominator's ball, shared by all starts.
struct FormBall {
    geometry: Geometry,
    dims: Vec<usize>,
    norms: Vec<Norm>,
    op: NormOracle,
}

impl FormBall {
    fn evaluate(&self, phi: &[f64], rng: &mut StreamRng, warm: Option<&[Vec<f64>]>) -> NormValue {
        match self.geometry {
            Geometry::Polynomial => self.polynomial(phi, rng, warm),
            _ => self.op.evaluate(phi, 1, 200, 1e-10, rng, warm),
        }
    }

    /// `sup_{‖x‖ ≤ 1} |φ(x, ..., x)|` bracketed by a fixed-point search (lower)
    /// and the multilinear norm (upper).
    fn polynomial(&self, phi: &[f64], rng: &mut StreamRng, warm: Option<&[Vec<f64>]>) -> NormValue {
        let n = self.dims.len();
        let (d, r) = (self.dims[0], self.norms[0]);
        let opv = self.op.evaluate(phi, 1, 200, 1e-10, rng, None);
        let mut starts = vec![opv.argmax[0].clone()];
        if let Some(w) = warm {
            starts.push(w[0].clone());
        }
        starts.push(rng::unit_vec(rng, d, r));
        let eval = |x: &Vec<f64>| {
            let xs = vec![x.clone(); n];
            let refs: Vec<&[f64]> = xs.iter().map(|v| v.as_slice()).collect();
            let g = contract_all_but(&self.dims, phi, &refs, 0);
            (dot(&g, x), g)
        };
        let mut best = (0.0, starts[0].clone(), 1.0);
        for mut x in starts {
            let (mut val, mut g) = eval(&x);
            for _ in 0..200 {
                if val.abs() > best.0 {
                    best = (val.abs(), x.clone(), sign_of(val));
                }
                let s = sign_of(val);
                let sg: Vec<f64> = g.iter().map(|v| s * v).collect();
                let Some(next) = dual_maximizer(&sg, r) else { break };
                let (nv, ng) = eval(&next);
                if nv.abs() <= val.abs() * (1.0 + 1e-12) {
                    if nv.abs() > best.0 {
                        best = (nv.abs(), next.clone(), sign_of(nv));
                    }
                    break;
                }
                x = next;
                val = nv;
                g = ng;
            }
        }
        let (lower, x, sign) = best;
        NormValue { lower, upper: opv.upper.max(lower), argmax: vec![x; n], sign }
    }

    fn symmetrize(&self, phi: Vec<f64>) -> Vec<f64> {
        if self.geometry != Geometry::Polynomial {
            return phi;
        }
        DenseTensor::from_parts(self.dims.clone(), phi)
            .symmetrize_leading(self.dims.len())
            .expect("polynomial forms have equal dimensions")
            .into_data()
    }
}

/// Polarization constant with `‖φ_sym‖ ≤ c ‖P‖` for `n`-homogeneous
/// polynomials on `ℓ_r`: 1 on Hilbert space, `n^n/n!` in general.
pub(crate) fn polarization_constant(n: usize, r: Norm) -> f64 {
    if r == Norm::L2 {
        return 1.0;
    }
    let mut c = 1.0;
    for k in 1..=n {
        c *= n as f64 / k as f64;
    }
    c
}

struct AscentResult {
    heuristic: f64,
    certified: f64,
    /// Best certified form scaled into the ball.
    form: Vec<f64>,
    iterations: usize,
}

/// Ascent on `log ‖Aφ‖_p − log ‖φ‖` over the Frobenius sphere with a
/// Danskin gradient for the norm and backtracking steps.
fn ascend(rows: &Rows, p: f64, ball: &FormBall, start: Vec<f64>, opts: &DenominatorOptions, rng: &mut StreamRng) -> AscentResult {
    let mut phi = start;
    let n0 = norm2(&phi);
    let mut out = AscentResult { heuristic: 0.0, certified: 0.0, form: vec![0.0; rows.width], iterations: 0 };
    if n0 == 0.0 {
        return out;
    }
    phi.iter_mut().for_each(|x| *x /= n0);
    let record = |out: &mut AscentResult, phi: &[f64], num: f64, nv: &NormValue| {
        if nv.lower > 0.0 {
            out.heuristic = out.heuristic.max(num / nv.lower);
        }
        if nv.upper > 0.0 && num / nv.upper > out.certified {
            out.certified = num / nv.upper;
            out.form = phi.iter().map(|x| x / nv.upper).collect();
        }
    };
    let mut y = rows.apply(&phi);
    let mut num = lp_norm(&y, p);
    let mut nv = ball.evaluate(&phi, rng, None);
    record(&mut out, &phi, num, &nv);
    if num == 0.0 || nv.lower == 0.0 {
        return out;
    }
    let mut obj = num.ln() - nv.lower.ln();
    let mut step = 0.5;
    for it in 0..opts.max_iter {
        out.iterations = it + 1;
        let mut grad = rows.pullback(&y, p);
        let scale = num.powf(p);
        grad.iter_mut().for_each(|g| *g /= scale);
        let xstar = outer(&nv.argmax);
        axpy(&mut grad, -nv.sign / nv.lower, &xstar);
        let along = dot(&grad, &phi);
        axpy(&mut grad, -along, &phi);
        let gn = norm2(&grad);
        if gn < 1e-14 {
            break;
        }
        let mut accepted = false;
        while step > 1e-10 {
            let mut cand = phi.clone();
            axpy(&mut cand, step / gn, &grad);
            let cand = ball.symmetrize(cand);
            let cn = norm2(&cand);
            let cand: Vec<f64> = cand.iter().map(|x| x / cn).collect();
            let cy = rows.apply(&cand);
            let cnum = lp_norm(&cy, p);
            let cnv = ball.evaluate(&cand, rng, Some(&nv.argmax));
            if cnum > 0.0 && cnv.lower > 0.0 {
                let cobj = cnum.ln() - cnv.lower.ln();
                if cobj > obj + 1e-4 * step * gn {
                    record(&mut out, &cand, cnum, &cnv);
                    let gain = cobj - obj;
                    phi = cand;
                    y = cy;
                    num = cnum;
                    nv = cnv;
                    obj = cobj;
                    step = (step * 2.0).min(1.0);
                    accepted = gain > opts.tol;
                    if !accepted {
                        step = 0.0;
                    }
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    out
}

/// Rank-one form `⊗ f_k` with `f_k` dual to the larger endpoint of a pair;
/// its multilinear norm is exactly 1.
fn rank_one_dual(u: &SegrePoint, v: &SegrePoint, norms: &[Norm], diagonal: bool) -> Option<Vec<f64>> {
    let src = if u.norm_product(norms) >= v.norm_product(norms) { u } else { v };
    let mut fs: Vec<Vec<f64>> = Vec::new();
    for (k, (x, &r)) in src.factors.iter().zip(norms).enumerate() {
        if diagonal && k > 0 {
            fs.push(fs[0].clone());
            continue;
        }
        fs.push(dual_maximizer(x, r.dual())?);
    }
    Some(outer(&fs))
}

pub(crate) fn denominator(
    cfg: &PairConfiguration,
    p: f64,
    geometry: Geometry,
    norms: &[Norm],
    opts: &DenominatorOptions,
) -> Result<Denominator> {
    check_p(p)?;
    let dims = cfg.dims();
    if norms.len() != dims.len() {
        return Err(Error::NormSpec(format!("{} norms for {} factors", norms.len(), dims.len())));
    }
    let (cfg, _) = cfg.without_degenerate()?;
    let width: usize = dims.iter().product();
    let rows = Rows {
        rows: (0..cfg.len())
            .map(|i| {
                let s = cfg.weights()[i].powf(1.0 / p);
                cfg.difference(i).into_iter().map(|x| x * s).collect()
            })
            .collect(),
        width,
    };
    let hs = hs_bracket(&rows, p, opts);
    if geometry == Geometry::HilbertSchmidt {
        let exact = p == 2.0;
        let report = BoundReport {
            certified_lower: hs.lower,
            heuristic_lower: hs.lower,
            heuristic_upper: if exact { hs.upper } else { hs.lower },
            certified_upper: hs.upper,
            method: if exact { "hs-exact".into() } else { "hs-linearization".into() },
            iterations: 1,
            restarts: 1,
            seed: opts.seed,
        }
        .clamped();
        return Ok(Denominator { report, maximizer: hs.vector });
    }

    let n = dims.len();
    let poly = geometry == Geometry::Polynomial;
    let c_pol = if poly { polarization_constant(n, norms[0]) } else { 1.0 };
    let b: Vec<f64> = cfg
        .pairs()
        .iter()
        .map(|(u, v)| {
            let proj = projective_upper(&u.factors, &v.factors, norms);
            if poly {
                let pu = vector_norm(&u.factors[0], norms[0]).powi(n as i32);
                let pv = vector_norm(&v.factors[0], norms[0]).powi(n as i32);
                (pu + pv).min(c_pol * proj)
            } else {
                proj
            }
        })
        .collect();
    let rowwise = lp_norm(
        &b.iter().zip(cfg.weights()).map(|(bi, &a)| bi * a.powf(1.0 / p)).collect::<Vec<_>>(),
        p,
    );
    let certified_upper = (c_pol * kappa(&dims, norms) * hs.upper).min(rowwise);

    let ball = FormBall {
        geometry,
        dims: dims.clone(),
        norms: norms.to_vec(),
        op: NormOracle::new(&dims, norms, opts.enumeration_cap),
    };
    let mut starts: Vec<Vec<f64>> = opts.warm_starts.iter().map(|w| ball.symmetrize(w.clone())).collect();
    starts.push(ball.symmetrize(hs.vector.clone()));
    for (u, v) in cfg.pairs() {
        if starts.len() >= opts.restarts.max(starts.len()) {
            break;
        }
        if let Some(f) = rank_one_dual(u, v, norms, poly) {
            starts.push(f);
        }
    }
    let fixed = starts.len();
    let total = opts.restarts.max(fixed);
    let results: Vec<AscentResult> = (0..total)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(opts.seed, domain::DENOMINATOR, i as u64);
            let start = if i < fixed { starts[i].clone() } else { ball.symmetrize(rng::gaussian_vec(&mut r, width)) };
            ascend(&rows, p, &ball, start, opts, &mut r)
        })
        .collect();
    let mut best = 0;
    let mut heuristic: f64 = 0.0;
    let mut iterations = 0;
    for (i, r) in results.iter().enumerate() {
        heuristic = heuristic.max(r.heuristic);
        iterations += r.iterations;
        if r.certified > results[best].certified {
            best = i;
        }
    }
    let certified_lower = results[best].certified.min(certified_upper);
    let report = BoundReport {
        certified_lower,
        heuristic_lower: heuristic.max(certified_lower),
        heuristic_upper: heuristic.max(certified_lower),
        certified_upper,
        method: format!("ascent/{}", ball.op.method()),
        iterations,
        restarts: total,
        seed: opts.seed,
    }
    .clamped();
    Ok(Denominator { report, maximizer: results[best].form.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pt(f: &[&[f64]]) -> SegrePoint {
        SegrePoint::new(f.iter().map(|x| x.to_vec()).collect())
    }

    #[test]
    fn lambda_n_has_unit_norm() {
        for n in 1..=4 {
            let r = operator_norm(&MultilinearOperator::scalar_product(n));
            assert_eq!((r.certified_lower, r.certified_upper), (1.0, 1.0), "n = {n}");
        }
    }

    #[test]
    fn zero_operator_has_zero_norm() {
        let t = MultilinearOperator::zero(&[2, 3], 2, vec![Norm::L2, Norm::Inf], Norm::L1).unwrap();
        let r = operator_norm(&t);
        assert_eq!((r.certified_lower, r.certified_upper), (0.0, 0.0));
    }

    #[test]
    fn identity_bilinear_form_matches_svd() {
        let k = DenseTensor::new(vec![2, 2, 1], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let r = operator_norm(&MultilinearOperator::euclidean(k).unwrap());
        assert_relative_eq!(r.certified_lower, 1.0, epsilon = 1e-12);
        assert_relative_eq!(r.certified_upper, 1.0, epsilon = 1e-12);
        assert_eq!(r.method, "svd");
    }

    #[test]
    fn enumeration_matches_sign_grid() {
        // Brute force over all sign vectors of both slots.
        let data = [0.3, -1.2, 2.0, 0.7];
        let k = DenseTensor::new(vec![2, 2, 1], data.to_vec()).unwrap();
        let t = MultilinearOperator::new(k, vec![Norm::Inf, Norm::Inf], Norm::L2).unwrap();
        let mut grid: f64 = 0.0;
        for s in 0..16 {
            let x = [if s & 1 == 0 { 1.0 } else { -1.0 }, if s & 2 == 0 { 1.0 } else { -1.0 }];
            let y = [if s & 4 == 0 { 1.0 } else { -1.0 }, if s & 8 == 0 { 1.0 } else { -1.0 }];
            let v = data[0] * x[0] * y[0] + data[1] * x[0] * y[1] + data[2] * x[1] * y[0] + data[3] * x[1] * y[1];
            grid = grid.max(v.abs());
        }
        let r = operator_norm(&t);
        assert_eq!(r.method, "enumeration");
        // Equal up to summation order.
        assert_relative_eq!(r.certified_upper, grid, max_relative = 1e-15);
        assert_relative_eq!(r.certified_lower, grid, max_relative = 1e-15);
    }

    #[test]
    fn relaxed_fallback_brackets_search() {
        let k = DenseTensor::new(vec![2, 2, 2, 1], vec![1.0, 0.5, -0.3, 2.0, 0.1, -1.0, 0.7, 0.2]).unwrap();
        let t = MultilinearOperator::euclidean(k).unwrap();
        let r = operator_norm(&t);
        assert_eq!(r.method, "relaxed");
        assert!(r.certified_lower <= r.certified_upper);
        assert!(r.certified_lower > 0.0);
    }

    #[test]
    fn kappa_all_l2() {
        assert_relative_eq!(kappa(&[2, 3, 4], &[Norm::L2; 3]), 6.0f64.sqrt());
        assert_relative_eq!(kappa(&[2, 2], &[Norm::L2; 2]), 2.0f64.sqrt());
    }

    #[test]
    fn projective_exact_cases() {
        let n2 = [Norm::L2, Norm::L2];
        let u = [vec![3.0, 4.0], vec![1.0, 0.0]];
        let z = [vec![0.0, 0.0], vec![0.0, 0.0]];
        assert_relative_eq!(projective_upper(&u, &z, &n2), 5.0, epsilon = 1e-12);
        // e1⊗e1 − e2⊗e2 has nuclear norm 2.
        let a = [vec![1.0, 0.0], vec![1.0, 0.0]];
        let b = [vec![0.0, 1.0], vec![0.0, 1.0]];
        assert_relative_eq!(projective_upper(&a, &b, &n2), 2.0, epsilon = 1e-12);
        // Sign flips: (−x)⊗(−y) − x⊗y = 0.
        let c = [vec![-1.0, 2.0], vec![-0.5, 1.0]];
        let d = [vec![1.0, -2.0], vec![0.5, -1.0]];
        assert!(projective_upper(&c, &d, &[Norm::Inf, Norm::L2]) < 1e-12);
    }

    #[test]
    fn single_pair_hs_denominator() {
        let cfg = PairConfiguration::new(vec![(pt(&[&[1.0, 2.0], &[0.5, -1.0, 2.0]]), SegrePoint::zeros(&[2, 3]))]).unwrap();
        let r = config_denominator(&cfg, 2.0, Ball::HilbertSchmidt, &[Norm::L2, Norm::L2]).unwrap();
        let expected = 5.0f64.sqrt() * 5.25f64.sqrt();
        assert_relative_eq!(r.certified_lower, expected, max_relative = 1e-12);
        assert_relative_eq!(r.certified_upper, expected, max_relative = 1e-11);
    }

    #[test]
    fn basis_configuration_hs_denominator_is_one() {
        let cfg = crate::tensor::basis_configuration(&[2, 2]).unwrap();
        let r = config_denominator(&cfg, 2.0, Ball::HilbertSchmidt, &[Norm::L2, Norm::L2]).unwrap();
        assert_relative_eq!(r.certified_lower, 1.0, epsilon = 1e-12);
        assert_relative_eq!(r.certified_upper, 1.0, epsilon = 1e-11);
    }

    #[test]
    fn n1_denominator_homogeneous_against_grid() {
        // d = 2, ℓ_2 dual ball: φ = (cos θ, sin θ).
        let cfg = PairConfiguration::new(vec![
            (pt(&[&[1.0, 0.5]]), pt(&[&[-0.2, 1.0]])),
            (pt(&[&[0.3, -0.7]]), pt(&[&[0.0, 0.0]])),
        ])
        .unwrap();
        let grid = |c: &PairConfiguration| {
            let ds = c.differences();
            (0..20000)
                .map(|k| {
                    let t = k as f64 * std::f64::consts::PI / 10000.0;
                    let v: f64 = ds.iter().map(|d| (d[0] * t.cos() + d[1] * t.sin()).abs().powi(3)).sum();
                    v.powf(1.0 / 3.0)
                })
                .fold(0.0, f64::max)
        };
        let opts = DenominatorOptions { restarts: 8, ..Default::default() };
        for t in [1.0, 2.5] {
            let c = cfg.scaled_factors(t);
            let r = config_denominator_with(&c, 3.0, Ball::Operator, &[Norm::L2], &opts).unwrap().report;
            let g = grid(&c);
            assert_relative_eq!(r.certified_lower, g, max_relative = 1e-6);
            assert!(r.certified_upper >= g * (1.0 - 1e-9));
        }
    }

    #[test]
    fn empty_or_degenerate_configuration_is_rejected() {
        let u = pt(&[&[1.0]]);
        let cfg = PairConfiguration::new(vec![(u.clone(), u)]).unwrap();
        assert!(config_denominator(&cfg, 2.0, Ball::Operator, &[Norm::L2]).is_err());
    }
}
