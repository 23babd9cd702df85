//! Dense row-major tensors, multilinear operators and Segre points.
//!
//! A `MultilinearOperator` with kernel shape `(d1, ..., dn, m)` is the map
//! `T(x1, ..., xn)_l = sum_{i1..in} K[i1, ..., in, l] x1[i1] ... xn[in]`.
//! The same kernel contracted against an arbitrary tensor of shape
//! `(d1, ..., dn)` is the linearization on the tensor product, so
//! `T(x) = T_hat(x1 ⊗ ... ⊗ xn)`.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Exponent of an `ℓ_r` norm on a coordinate space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Norm {
    L1,
    L2,
    Inf,
}

impl Norm {
    /// Conjugate exponent: the norm of the dual space.
    pub fn dual(self) -> Norm {
        match self {
            Norm::L1 => Norm::Inf,
            Norm::L2 => Norm::L2,
            Norm::Inf => Norm::L1,
        }
    }

    pub fn exponent(self) -> f64 {
        match self {
            Norm::L1 => 1.0,
            Norm::L2 => 2.0,
            Norm::Inf => f64::INFINITY,
        }
    }

    pub fn parse(s: &str) -> Result<Norm> {
        match s.trim() {
            "1" | "l1" => Ok(Norm::L1),
            "2" | "l2" => Ok(Norm::L2),
            "inf" | "infinity" | "linf" | "∞" => Ok(Norm::Inf),
            other => Err(Error::NormSpec(format!("unsupported norm exponent {other:?}; expected 1, 2 or inf"))),
        }
    }

    /// Smallest `c` with `‖x‖_2 <= c ‖x‖_r` on `ℝ^d`.
    pub fn l2_over(self, d: usize) -> f64 {
        match self {
            Norm::Inf => (d as f64).sqrt(),
            _ => 1.0,
        }
    }

    /// Smallest `c` with `‖x‖_r <= c ‖x‖_2` on `ℝ^d`.
    pub fn over_l2(self, d: usize) -> f64 {
        match self {
            Norm::L1 => (d as f64).sqrt(),
            _ => 1.0,
        }
    }
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Norm::L1 => write!(f, "1"),
            Norm::L2 => write!(f, "2"),
            Norm::Inf => write!(f, "inf"),
        }
    }
}

impl Serialize for Norm {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Norm::L1 => s.serialize_u64(1),
            Norm::L2 => s.serialize_u64(2),
            Norm::Inf => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Norm {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(x) if x == 1.0 => Ok(Norm::L1),
            Repr::Num(x) if x == 2.0 => Ok(Norm::L2),
            Repr::Num(x) => Err(serde::de::Error::custom(format!(
                "unsupported norm exponent {x}; expected 1, 2 or \"inf\""
            ))),
            Repr::Text(t) => Norm::parse(&t).map_err(serde::de::Error::custom),
        }
    }
}

/// `ℓ_r` norm of a vector.
pub fn vector_norm(v: &[f64], r: Norm) -> f64 {
    match r {
        Norm::L1 => v.iter().map(|x| x.abs()).sum(),
        Norm::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
        Norm::Inf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
    }
}

/// A point `x` of the unit sphere of the dual of `ℓ_r` with `<x, g> = ‖g‖_{r'}`,
/// i.e. the maximizer of the linear functional `g` over the `ℓ_r` unit ball.
/// Returns `None` when `g` vanishes.
pub fn dual_maximizer(g: &[f64], r: Norm) -> Option<Vec<f64>> {
    let scale = vector_norm(g, Norm::Inf);
    if scale == 0.0 || !scale.is_finite() {
        return None;
    }
    Some(match r {
        Norm::L2 => {
            let n = vector_norm(g, Norm::L2);
            g.iter().map(|x| x / n).collect()
        }
        Norm::L1 => {
            let mut best = 0;
            for (i, x) in g.iter().enumerate() {
                if x.abs() > g[best].abs() {
                    best = i;
                }
            }
            let mut e = vec![0.0; g.len()];
            e[best] = g[best].signum();
            e
        }
        Norm::Inf => g.iter().map(|&x| if x < 0.0 { -1.0 } else { 1.0 }).collect(),
    })
}

/// Multi-index real array in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TensorRepr", into = "TensorRepr")]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TensorRepr {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl TryFrom<TensorRepr> for DenseTensor {
    type Error = Error;
    fn try_from(r: TensorRepr) -> Result<Self> {
        DenseTensor::new(r.shape, r.data).map_err(|e| Error::Schema(e.to_string()))
    }
}

impl From<DenseTensor> for TensorRepr {
    fn from(t: DenseTensor) -> Self {
        TensorRepr { shape: t.shape, data: t.data }
    }
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() {
            return Err(Error::shape("tensor needs at least one mode"));
        }
        if let Some(pos) = shape.iter().position(|&d| d == 0) {
            return Err(Error::shape(format!("mode {pos} has dimension 0")));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::shape(format!(
                "shape {shape:?} needs {len} entries, got {}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::shape(format!("entry {pos} is not finite")));
        }
        Ok(DenseTensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        DenseTensor { shape, data: vec![0.0; len] }
    }

    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        DenseTensor { shape, data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        let mut flat = 0;
        for (i, (&ix, &d)) in index.iter().zip(&self.shape).enumerate() {
            assert!(ix < d, "index {ix} out of range in mode {i}");
            flat = flat * d + ix;
        }
        self.data[flat]
    }

    pub fn frobenius_norm(&self) -> f64 {
        vector_norm(&self.data, Norm::L2)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0.0)
    }

    pub fn scaled(&self, s: f64) -> DenseTensor {
        DenseTensor::from_parts(self.shape.clone(), self.data.iter().map(|x| x * s).collect())
    }

    pub fn reshaped(&self, shape: Vec<usize>) -> Result<DenseTensor> {
        DenseTensor::new(shape, self.data.clone())
    }

    /// Matricization: rows indexed row-major by `row_modes`, columns by `col_modes`.
    pub fn flatten(&self, row_modes: &[usize], col_modes: &[usize]) -> Result<DMatrix<f64>> {
        let n = self.order();
        let mut seen = vec![false; n];
        for &m in row_modes.iter().chain(col_modes) {
            if m >= n || seen[m] {
                return Err(Error::shape(format!(
                    "split {row_modes:?}|{col_modes:?} is not a partition of {n} modes"
                )));
            }
            seen[m] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::shape(format!(
                "split {row_modes:?}|{col_modes:?} does not cover all {n} modes"
            )));
        }
        let strides = strides(&self.shape);
        let rows: usize = row_modes.iter().map(|&m| self.shape[m]).product();
        let cols: usize = col_modes.iter().map(|&m| self.shape[m]).product();
        let row_offsets = mode_offsets(&self.shape, &strides, row_modes);
        let col_offsets = mode_offsets(&self.shape, &strides, col_modes);
        Ok(DMatrix::from_fn(rows, cols, |r, c| self.data[row_offsets[r] + col_offsets[c]]))
    }

    /// Contract mode `mode` against `v`, removing that mode.
    pub fn contract_mode(&self, mode: usize, v: &[f64]) -> DenseTensor {
        let (shape, data) = contract_mode_raw(&self.shape, &self.data, mode, v);
        if shape.is_empty() {
            DenseTensor::from_parts(vec![1], data)
        } else {
            DenseTensor::from_parts(shape, data)
        }
    }

    /// Symmetrize over the first `modes` modes (all of which must share a dimension).
    pub fn symmetrize_leading(&self, modes: usize) -> Result<DenseTensor> {
        let d = self.shape[0];
        if modes > self.order() || self.shape[..modes].iter().any(|&x| x != d) {
            return Err(Error::shape("symmetrized modes must share one dimension"));
        }
        let perms = permutations(modes);
        let tail: usize = self.shape[modes..].iter().product();
        let strides = strides(&self.shape);
        let mut out = vec![0.0; self.data.len()];
        let mut idx = vec![0usize; modes];
        let lead_count = d.pow(modes as u32);
        for lead in 0..lead_count {
            let mut rem = lead;
            for k in (0..modes).rev() {
                idx[k] = rem % d;
                rem /= d;
            }
            for t in 0..tail {
                let mut acc = 0.0;
                for perm in &perms {
                    let mut off = t;
                    for k in 0..modes {
                        off += idx[perm[k]] * strides[k];
                    }
                    acc += self.data[off];
                }
                out[lead * tail + t] = acc / perms.len() as f64;
            }
        }
        Ok(DenseTensor::from_parts(self.shape.clone(), out))
    }
}

pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * shape[k + 1];
    }
    s
}

fn mode_offsets(shape: &[usize], strides: &[usize], modes: &[usize]) -> Vec<usize> {
    let mut offsets = vec![0usize];
    for &m in modes {
        let mut next = Vec::with_capacity(offsets.len() * shape[m]);
        for &o in &offsets {
            for i in 0..shape[m] {
                next.push(o + i * strides[m]);
            }
        }
        offsets = next;
    }
    offsets
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..n {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Contract one mode of a raw row-major array.
pub(crate) fn contract_mode_raw(shape: &[usize], data: &[f64], mode: usize, v: &[f64]) -> (Vec<usize>, Vec<f64>) {
    let d = shape[mode];
    assert_eq!(v.len(), d, "vector length must match mode {mode}");
    let outer: usize = shape[..mode].iter().product();
    let inner: usize = shape[mode + 1..].iter().product();
    let mut out = vec![0.0; outer * inner];
    for o in 0..outer {
        let dst = &mut out[o * inner..(o + 1) * inner];
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            let src = &data[(o * d + i) * inner..(o * d + i + 1) * inner];
            for (a, b) in dst.iter_mut().zip(src) {
                *a += vi * b;
            }
        }
    }
    let mut new_shape = shape.to_vec();
    new_shape.remove(mode);
    (new_shape, out)
}

/// Contract every mode except `keep` against the matching vector in `vectors`
/// (entries at `keep` are ignored). Returns a vector of length `shape[keep]`.
pub(crate) fn contract_all_but(shape: &[usize], data: &[f64], vectors: &[&[f64]], keep: usize) -> Vec<f64> {
    let mut cur_shape = shape.to_vec();
    let mut cur = data.to_vec();
    for mode in (0..shape.len()).rev() {
        if mode == keep {
            continue;
        }
        let (s, d) = contract_mode_raw(&cur_shape, &cur, mode, vectors[mode]);
        cur_shape = s;
        cur = d;
    }
    cur
}

/// Contract the leading `vectors.len()` modes; returns the remaining entries.
pub(crate) fn contract_leading(shape: &[usize], data: &[f64], vectors: &[&[f64]]) -> Vec<f64> {
    let mut cur_shape = shape.to_vec();
    let mut cur = data.to_vec();
    for v in vectors {
        let (s, d) = contract_mode_raw(&cur_shape, &cur, 0, v);
        cur_shape = s;
        cur = d;
    }
    cur
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Outer product `x1 ⊗ ... ⊗ xn` as a flat row-major vector.
pub(crate) fn outer(factors: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![1.0];
    for f in factors {
        let mut next = Vec::with_capacity(out.len() * f.len());
        for &a in &out {
            for &b in f {
                next.push(a * b);
            }
        }
        out = next;
    }
    out
}

/// An element `x1 ⊗ ... ⊗ xn` of the Segre cone, stored by its factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SegrePoint {
    pub factors: Vec<Vec<f64>>,
}

impl SegrePoint {
    pub fn new(factors: Vec<Vec<f64>>) -> Self {
        SegrePoint { factors }
    }

    pub fn zeros(dims: &[usize]) -> Self {
        SegrePoint { factors: dims.iter().map(|&d| vec![0.0; d]).collect() }
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.len()).collect()
    }

    pub fn order(&self) -> usize {
        self.factors.len()
    }

    /// Product of the factor norms.
    pub fn norm_product(&self, norms: &[Norm]) -> f64 {
        self.factors.iter().zip(norms).map(|(f, &r)| vector_norm(f, r)).product()
    }

    pub fn is_zero(&self) -> bool {
        self.factors.iter().any(|f| f.iter().all(|&x| x == 0.0))
    }

    /// Flat row-major entries of the elementary tensor.
    pub fn outer_flat(&self) -> Vec<f64> {
        outer(&self.factors)
    }
}

/// The elementary tensor of a Segre point.
pub fn elementary_tensor(x: &SegrePoint) -> DenseTensor {
    if x.factors.is_empty() {
        return DenseTensor::from_parts(vec![1], vec![1.0]);
    }
    DenseTensor::from_parts(x.dims(), x.outer_flat())
}

/// `T ∈ L(ℓ_{r1}^{d1}, ..., ℓ_{rn}^{dn}; ℓ_{rc}^m)` stored by its kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OperatorRepr", into = "OperatorRepr")]
pub struct MultilinearOperator {
    kernel: DenseTensor,
    factor_norms: Vec<Norm>,
    codomain_norm: Norm,
}

#[derive(Serialize, Deserialize)]
struct OperatorRepr {
    shape: Vec<usize>,
    data: Vec<f64>,
    #[serde(default)]
    factor_norms: Option<Vec<Norm>>,
    #[serde(default)]
    codomain_norm: Option<Norm>,
}

impl TryFrom<OperatorRepr> for MultilinearOperator {
    type Error = Error;
    fn try_from(r: OperatorRepr) -> Result<Self> {
        let kernel = DenseTensor::new(r.shape, r.data).map_err(|e| Error::Schema(e.to_string()))?;
        if kernel.order() < 2 {
            return Err(Error::Schema("operator kernel needs shape (d1, ..., dn, m) with n >= 1".into()));
        }
        let n = kernel.order() - 1;
        let norms = r.factor_norms.unwrap_or_else(|| vec![Norm::L2; n]);
        MultilinearOperator::new(kernel, norms, r.codomain_norm.unwrap_or(Norm::L2))
            .map_err(|e| Error::Schema(e.to_string()))
    }
}

impl From<MultilinearOperator> for OperatorRepr {
    fn from(t: MultilinearOperator) -> Self {
        OperatorRepr {
            shape: t.kernel.shape,
            data: t.kernel.data,
            factor_norms: Some(t.factor_norms),
            codomain_norm: Some(t.codomain_norm),
        }
    }
}

impl MultilinearOperator {
    pub fn new(kernel: DenseTensor, factor_norms: Vec<Norm>, codomain_norm: Norm) -> Result<Self> {
        if kernel.order() < 2 {
            return Err(Error::shape("operator kernel needs shape (d1, ..., dn, m) with n >= 1"));
        }
        if factor_norms.len() != kernel.order() - 1 {
            return Err(Error::NormSpec(format!(
                "{} factor norms given for {} factors",
                factor_norms.len(),
                kernel.order() - 1
            )));
        }
        Ok(MultilinearOperator { kernel, factor_norms, codomain_norm })
    }

    /// All norms `ℓ_2`.
    pub fn euclidean(kernel: DenseTensor) -> Result<Self> {
        let n = kernel.order().saturating_sub(1);
        Self::new(kernel, vec![Norm::L2; n], Norm::L2)
    }

    /// Scalar-valued form with kernel of shape `(d1, ..., dn)`.
    pub fn form(kernel: DenseTensor, factor_norms: Vec<Norm>) -> Result<Self> {
        let mut shape = kernel.shape.clone();
        shape.push(1);
        Self::new(DenseTensor::from_parts(shape, kernel.data), factor_norms, Norm::L2)
    }

    /// `Λ_n(z1, ..., zn) = z1 ⋯ zn` on `ℝ`.
    pub fn scalar_product(n: usize) -> Self {
        let kernel = DenseTensor::from_parts(vec![1; n + 1], vec![1.0]);
        Self::new(kernel, vec![Norm::L2; n], Norm::L2).expect("valid shape")
    }

    pub fn zero(dims: &[usize], m: usize, factor_norms: Vec<Norm>, codomain_norm: Norm) -> Result<Self> {
        let mut shape = dims.to_vec();
        shape.push(m);
        Self::new(DenseTensor::zeros(shape), factor_norms, codomain_norm)
    }

    pub fn kernel(&self) -> &DenseTensor {
        &self.kernel
    }

    pub fn factor_norms(&self) -> &[Norm] {
        &self.factor_norms
    }

    pub fn codomain_norm(&self) -> Norm {
        self.codomain_norm
    }

    /// Number of factor spaces `n`.
    pub fn arity(&self) -> usize {
        self.kernel.order() - 1
    }

    pub fn factor_dims(&self) -> &[usize] {
        &self.kernel.shape[..self.arity()]
    }

    /// Codomain dimension `m`.
    pub fn codomain_dim(&self) -> usize {
        *self.kernel.shape.last().unwrap()
    }

    pub fn is_form(&self) -> bool {
        self.codomain_dim() == 1
    }

    pub fn is_zero(&self) -> bool {
        self.kernel.is_zero()
    }

    /// All factor norms and the codomain norm are `ℓ_2`.
    pub fn is_euclidean(&self) -> bool {
        self.codomain_norm == Norm::L2 && self.factor_norms.iter().all(|&r| r == Norm::L2)
    }

    pub fn with_kernel(&self, kernel: DenseTensor) -> Result<Self> {
        if kernel.shape != self.kernel.shape {
            return Err(Error::shape("replacement kernel has a different shape"));
        }
        Ok(MultilinearOperator { kernel, ..self.clone() })
    }

    pub fn scaled(&self, s: f64) -> Self {
        MultilinearOperator { kernel: self.kernel.scaled(s), ..self.clone() }
    }

    fn check_point(&self, x: &SegrePoint) -> Result<()> {
        if x.dims() != self.factor_dims() {
            return Err(Error::shape(format!(
                "point has factor dimensions {:?}, operator expects {:?}",
                x.dims(),
                self.factor_dims()
            )));
        }
        Ok(())
    }

    /// `T(x1, ..., xn)`.
    pub fn eval(&self, x: &SegrePoint) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let vs: Vec<&[f64]> = x.factors.iter().map(|f| f.as_slice()).collect();
        Ok(contract_leading(&self.kernel.shape, &self.kernel.data, &vs))
    }

    /// `T_hat(z)` for a tensor `z` of shape `(d1, ..., dn)` given by its flat entries.
    pub fn apply_linearized(&self, z: &[f64]) -> Vec<f64> {
        let m = self.codomain_dim();
        debug_assert_eq!(z.len() * m, self.kernel.len());
        let mut out = vec![0.0; m];
        for (i, &zi) in z.iter().enumerate() {
            if zi == 0.0 {
                continue;
            }
            let row = &self.kernel.data[i * m..(i + 1) * m];
            for (o, &k) in out.iter_mut().zip(row) {
                *o += zi * k;
            }
        }
        out
    }

    /// `y* ∘ T` as a form kernel of shape `(d1, ..., dn)` (flat).
    pub fn compose_functional(&self, y: &[f64]) -> Vec<f64> {
        let m = self.codomain_dim();
        self.kernel.data.chunks(m).map(|row| dot(row, y)).collect()
    }

    /// Kernel of the `l`-th output coordinate as a flat form of shape `(d1, ..., dn)`.
    pub fn component(&self, l: usize) -> Vec<f64> {
        let m = self.codomain_dim();
        self.kernel.data.iter().skip(l).step_by(m).copied().collect()
    }
}

/// A weighted list of pairs `(u_i, v_i)` of Segre points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConfigRepr", into = "ConfigRepr")]
pub struct PairConfiguration {
    pairs: Vec<(SegrePoint, SegrePoint)>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PairRepr {
    u: SegrePoint,
    v: SegrePoint,
}

#[derive(Serialize, Deserialize)]
struct ConfigRepr {
    pairs: Vec<PairRepr>,
    #[serde(default)]
    weights: Option<Vec<f64>>,
}

impl TryFrom<ConfigRepr> for PairConfiguration {
    type Error = Error;
    fn try_from(r: ConfigRepr) -> Result<Self> {
        let pairs = r.pairs.into_iter().map(|p| (p.u, p.v)).collect();
        match r.weights {
            Some(w) => PairConfiguration::weighted(pairs, w),
            None => PairConfiguration::new(pairs),
        }
        .map_err(|e| Error::Schema(e.to_string()))
    }
}

impl From<PairConfiguration> for ConfigRepr {
    fn from(c: PairConfiguration) -> Self {
        ConfigRepr {
            pairs: c.pairs.into_iter().map(|(u, v)| PairRepr { u, v }).collect(),
            weights: Some(c.weights),
        }
    }
}

/// Relative size below which `u⊗ - v⊗` counts as zero.
const DEGENERACY_TOL: f64 = 1e-13;

impl PairConfiguration {
    pub fn new(pairs: Vec<(SegrePoint, SegrePoint)>) -> Result<Self> {
        let w = vec![1.0; pairs.len()];
        Self::weighted(pairs, w)
    }

    pub fn weighted(pairs: Vec<(SegrePoint, SegrePoint)>, weights: Vec<f64>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::arg("pair configuration is empty"));
        }
        if weights.len() != pairs.len() {
            return Err(Error::arg(format!("{} weights for {} pairs", weights.len(), pairs.len())));
        }
        if let Some(i) = weights.iter().position(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::arg(format!("weight {i} is not strictly positive")));
        }
        let dims = pairs[0].0.dims();
        for (i, (u, v)) in pairs.iter().enumerate() {
            if u.dims() != dims || v.dims() != dims {
                return Err(Error::shape(format!("pair {i} has inconsistent factor dimensions")));
            }
            if u.factors.iter().chain(&v.factors).flatten().any(|x| !x.is_finite()) {
                return Err(Error::arg(format!("pair {i} has non-finite entries")));
            }
        }
        Ok(PairConfiguration { pairs, weights })
    }

    pub fn pairs(&self) -> &[(SegrePoint, SegrePoint)] {
        &self.pairs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.pairs[0].0.dims()
    }

    /// `u_i⊗ - v_i⊗` as a flat row-major vector.
    pub fn difference(&self, i: usize) -> Vec<f64> {
        let (u, v) = &self.pairs[i];
        u.outer_flat().iter().zip(v.outer_flat()).map(|(a, b)| a - b).collect()
    }

    pub fn differences(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.difference(i)).collect()
    }

    /// Whether `elementary_tensor(u_i) = elementary_tensor(v_i)` numerically.
    pub fn is_degenerate(&self, i: usize) -> bool {
        let (u, v) = &self.pairs[i];
        let a = u.outer_flat();
        let b = v.outer_flat();
        let scale = vector_norm(&a, Norm::L2).max(vector_norm(&b, Norm::L2));
        let diff: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        diff <= DEGENERACY_TOL * scale || scale == 0.0
    }

    /// Drop degenerate pairs, logging a warning for each. Their contribution
    /// to every sum in the summing inequality is zero.
    pub fn without_degenerate(&self) -> Result<(PairConfiguration, usize)> {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| !self.is_degenerate(i)).collect();
        let dropped = self.len() - keep.len();
        if dropped > 0 {
            log::warn!("dropping {dropped} degenerate pair(s) with u⊗ = v⊗");
        }
        if keep.is_empty() {
            return Err(Error::arg("every pair in the configuration is degenerate"));
        }
        let pairs = keep.iter().map(|&i| self.pairs[i].clone()).collect();
        let weights = keep.iter().map(|&i| self.weights[i]).collect();
        Ok((PairConfiguration { pairs, weights }, dropped))
    }

    pub fn push(&mut self, u: SegrePoint, v: SegrePoint, weight: f64) -> Result<()> {
        if u.dims() != self.dims() || v.dims() != self.dims() {
            return Err(Error::shape("pair dimensions do not match the configuration"));
        }
        if !(weight > 0.0) {
            return Err(Error::arg("weight must be positive"));
        }
        self.pairs.push((u, v));
        self.weights.push(weight);
        Ok(())
    }

    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        Self::weighted(self.pairs.clone(), weights)
    }

    /// Scale every factor of every point by `t` (so each difference scales by `t^n`).
    pub fn scaled_factors(&self, t: f64) -> Self {
        let scale = |p: &SegrePoint| SegrePoint::new(p.factors.iter().map(|f| f.iter().map(|x| x * t).collect()).collect());
        PairConfiguration {
            pairs: self.pairs.iter().map(|(u, v)| (scale(u), scale(v))).collect(),
            weights: self.weights.clone(),
        }
    }
}

/// Full-basis configuration `{((e_{j1}, ..., e_{jn}), 0)}`.
pub fn basis_configuration(dims: &[usize]) -> Result<PairConfiguration> {
    let total: usize = dims.iter().product();
    let mut pairs = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rem = flat;
        let mut idx = vec![0; dims.len()];
        for k in (0..dims.len()).rev() {
            idx[k] = rem % dims[k];
            rem /= dims[k];
        }
        let u = SegrePoint::new(
            dims.iter()
                .zip(&idx)
                .map(|(&d, &i)| {
                    let mut e = vec![0.0; d];
                    e[i] = 1.0;
                    e
                })
                .collect(),
        );
        pairs.push((u, SegrePoint::zeros(dims)));
    }
    PairConfiguration::new(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn identity_form() -> MultilinearOperator {
        let k = DenseTensor::new(vec![2, 2, 1], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        MultilinearOperator::euclidean(k).unwrap()
    }

    #[test]
    fn eval_scalar_product() {
        let t = MultilinearOperator::scalar_product(2);
        let x = SegrePoint::new(vec![vec![3.0], vec![4.0]]);
        assert_eq!(t.eval(&x).unwrap(), vec![12.0]);
    }

    #[test]
    fn eval_zero_factor_gives_zero() {
        let k = DenseTensor::new(vec![2, 2, 2], (1..=8).map(f64::from).collect()).unwrap();
        let t = MultilinearOperator::euclidean(k).unwrap();
        let x = SegrePoint::new(vec![vec![0.0, 0.0], vec![1.0, -2.0]]);
        assert_eq!(t.eval(&x).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn eval_identity_form_on_orthogonal_vectors() {
        let x = SegrePoint::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(identity_form().eval(&x).unwrap(), vec![0.0]);
    }

    #[test]
    fn eval_dimension_mismatch() {
        let x = SegrePoint::new(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0]]);
        assert!(matches!(identity_form().eval(&x), Err(Error::Shape(_))));
    }

    #[test]
    fn elementary_tensor_examples() {
        let e = elementary_tensor(&SegrePoint::new(vec![vec![1.0, 0.0], vec![1.0, 0.0]]));
        assert_eq!(e.shape(), &[2, 2]);
        assert_eq!(e.data(), &[1.0, 0.0, 0.0, 0.0]);
        let s = elementary_tensor(&SegrePoint::new(vec![vec![2.0], vec![3.0], vec![5.0]]));
        assert_eq!(s.shape(), &[1, 1, 1]);
        assert_eq!(s.data(), &[30.0]);
        let m = elementary_tensor(&SegrePoint::new(vec![vec![1.0, 1.0], vec![1.0, -1.0]]));
        assert_eq!(m.data(), &[1.0, -1.0, 1.0, -1.0]);
    }

    #[test]
    fn vector_norm_examples() {
        assert_eq!(vector_norm(&[3.0, 4.0], Norm::L2), 5.0);
        assert_eq!(vector_norm(&[3.0, 4.0], Norm::Inf), 4.0);
        assert_eq!(vector_norm(&[3.0, 4.0], Norm::L1), 7.0);
    }

    #[test]
    fn flatten_examples() {
        let t = DenseTensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let m = t.flatten(&[0], &[1]).unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        let ones = DenseTensor::new(vec![2, 2, 2], vec![1.0; 8]).unwrap();
        let f = ones.flatten(&[0], &[1, 2]).unwrap();
        assert_eq!(f.shape(), (2, 4));
        assert!(f.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn flatten_rejects_bad_partition() {
        let t = DenseTensor::zeros(vec![2, 2, 2]);
        assert!(t.flatten(&[0], &[1]).is_err());
        assert!(t.flatten(&[0, 1], &[1, 2]).is_err());
        assert!(t.flatten(&[0, 1], &[3]).is_err());
    }

    #[test]
    fn flatten_elementary_is_rank_one() {
        let x = SegrePoint::new(vec![vec![1.0, -2.0], vec![0.5, 3.0, 1.0], vec![2.0, 1.0]]);
        let e = elementary_tensor(&x);
        for (rows, cols) in [(vec![0], vec![1, 2]), (vec![1], vec![0, 2]), (vec![0, 2], vec![1])] {
            let sv = e.flatten(&rows, &cols).unwrap().singular_values();
            let mut s: Vec<f64> = sv.iter().copied().collect();
            s.sort_by(|a, b| b.partial_cmp(a).unwrap());
            assert!(s[1] <= 1e-10 * s[0]);
        }
    }

    #[test]
    fn tensor_rejects_bad_data() {
        assert!(DenseTensor::new(vec![2, 2], vec![1.0; 3]).is_err());
        assert!(DenseTensor::new(vec![2, 0], vec![]).is_err());
        assert!(DenseTensor::new(vec![1], vec![f64::NAN]).is_err());
    }

    #[test]
    fn norm_json() {
        let norms: Vec<Norm> = serde_json::from_str(r#"[1, 2, "inf", 2.0]"#).unwrap();
        assert_eq!(norms, vec![Norm::L1, Norm::L2, Norm::Inf, Norm::L2]);
        assert_eq!(serde_json::to_string(&norms).unwrap(), r#"[1,2,"inf",2]"#);
        assert!(serde_json::from_str::<Norm>("3").is_err());
    }

    #[test]
    fn operator_json_defaults_to_euclidean() {
        let t: MultilinearOperator = serde_json::from_str(r#"{"shape":[2,1],"data":[1,2]}"#).unwrap();
        assert_eq!(t.factor_norms(), &[Norm::L2]);
        let bad = serde_json::from_str::<MultilinearOperator>(r#"{"shape":[2,2],"data":[1,2]}"#);
        assert!(bad.is_err());
    }

    #[test]
    fn degenerate_pairs_are_dropped() {
        let u = SegrePoint::new(vec![vec![1.0, 2.0], vec![3.0]]);
        let v = SegrePoint::new(vec![vec![-1.0, -2.0], vec![-3.0]]);
        let w = SegrePoint::new(vec![vec![1.0, 0.0], vec![1.0]]);
        let cfg = PairConfiguration::new(vec![(u.clone(), v), (u, w)]).unwrap();
        assert!(cfg.is_degenerate(0));
        let (kept, dropped) = cfg.without_degenerate().unwrap();
        assert_eq!((kept.len(), dropped), (1, 1));
    }

    #[test]
    fn configuration_validation() {
        assert!(PairConfiguration::new(vec![]).is_err());
        let u = SegrePoint::new(vec![vec![1.0]]);
        assert!(PairConfiguration::weighted(vec![(u.clone(), u.clone())], vec![0.0]).is_err());
        let bad = SegrePoint::new(vec![vec![1.0, 2.0]]);
        assert!(PairConfiguration::new(vec![(u, bad)]).is_err());
    }

    #[test]
    fn symmetrize_matrix() {
        let t = DenseTensor::new(vec![2, 2, 1], vec![1.0, 2.0, 4.0, 3.0]).unwrap();
        let s = t.symmetrize_leading(2).unwrap();
        assert_abs_diff_eq!(s.data()[1], 3.0);
        assert_abs_diff_eq!(s.data()[2], 3.0);
    }

    #[test]
    fn component_and_functional() {
        let k = DenseTensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let t = MultilinearOperator::euclidean(k).unwrap();
        assert_eq!(t.component(1), vec![2.0, 4.0]);
        assert_eq!(t.compose_functional(&[1.0, -1.0]), vec![-1.0, -1.0]);
    }
}
