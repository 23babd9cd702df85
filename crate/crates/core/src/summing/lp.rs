//! Pietsch domination LP on a finite pair set and form dictionary.
//!
//! With `t_i = ‖T(u_i) − T(v_i)‖^p` and `s_ij = |φ_j(Δ_i)|^p` the restricted
//! constant is `c*^p = min_{w ∈ simplex} max_i t_i / (S w)_i`. Equivalently
//! `1/c*^p` is the value of the matrix game `M_ij = s_ij / t_i`, whose
//! optimal row strategy gives pair weights for a matching lower bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::form_norm::{check_p, form_norm_upper, lp_norm, Ball};
use crate::report::inf_or_null;
use crate::simplex::{LinearProgram, LpOutcome, Relation};
use crate::tensor::{dot, vector_norm, DenseTensor, MultilinearOperator, Norm, PairConfiguration};

pub const BISECTION_STEPS: usize = 60;
pub const BISECTION_REL_WIDTH: f64 = 1e-9;

/// Domination certificate: `t_i ≤ constant^p Σ_j w_j s_ij` on every pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PietschCertificate {
    /// Scalar forms (codomain dimension 1), each inside the ball.
    pub forms: Vec<MultilinearOperator>,
    pub weights: Vec<f64>,
    #[serde(with = "inf_or_null")]
    pub constant: f64,
    pub p: f64,
    pub pairset: PairConfiguration,
    pub ball: Ball,
    pub feasible: bool,
    /// Lower end of the final bisection bracket, as a constant.
    pub bisection_lower: f64,
    pub bisection_steps: usize,
    /// `(c^p - L) / c^p`, where `L` is the lower bound on `c^p` certified
    /// by `pair_weights`.
    pub duality_gap: f64,
    /// Optimal dual strategy over pairs (sums to 1 over pairs with `t_i > 0`).
    pub pair_weights: Vec<f64>,
}

impl PietschCertificate {
    /// Largest relative violation of the domination inequality on the pair set.
    pub fn max_violation(&self, t: &MultilinearOperator) -> Result<f64> {
        let forms: Vec<Vec<f64>> = self.forms.iter().map(|f| f.kernel().data().to_vec()).collect();
        let data = LpData::new(t, &self.pairset, &forms, self.p)?;
        let cp = self.constant.powf(self.p);
        let mut worst: f64 = 0.0;
        for (ti, si) in data.t.iter().zip(&data.s) {
            let rhs = cp * dot(si, &self.weights);
            if *ti > rhs {
                worst = worst.max((ti - rhs) / ti.max(1e-300));
            }
        }
        Ok(worst)
    }
}

/// Certified size of a form in the given ball (`‖φ‖_op` upper or `‖φ‖_F`).
pub(crate) fn form_size(form: &[f64], dims: &[usize], norms: &[Norm], ball: Ball) -> f64 {
    match ball {
        Ball::Operator => form_norm_upper(form, dims, norms),
        Ball::HilbertSchmidt => vector_norm(form, Norm::L2),
    }
}

/// Scale a form into the ball (no-op if already inside).
pub(crate) fn into_ball(mut form: Vec<f64>, dims: &[usize], norms: &[Norm], ball: Ball) -> Vec<f64> {
    let s = form_size(&form, dims, norms, ball);
    if s > 1.0 {
        form.iter_mut().for_each(|x| *x /= s);
    }
    form
}

pub(crate) struct LpData {
    pub t: Vec<f64>,
    pub s: Vec<Vec<f64>>,
}

impl LpData {
    pub fn new(t: &MultilinearOperator, pairs: &PairConfiguration, forms: &[Vec<f64>], p: f64) -> Result<Self> {
        if pairs.dims() != t.factor_dims() {
            return Err(Error::shape("pair set dimensions do not match the operator"));
        }
        let width: usize = t.factor_dims().iter().product();
        if let Some(j) = forms.iter().position(|f| f.len() != width) {
            return Err(Error::shape(format!("dictionary form {j} has the wrong size")));
        }
        let mut tv = Vec::with_capacity(pairs.len());
        let mut sv = Vec::with_capacity(pairs.len());
        for i in 0..pairs.len() {
            let delta = pairs.difference(i);
            let z = t.apply_linearized(&delta);
            let a = pairs.weights()[i];
            tv.push(a * vector_norm(&z, t.codomain_norm()).powf(p));
            sv.push(forms.iter().map(|f| a * dot(f, &delta).abs().powf(p)).collect());
        }
        Ok(LpData { t: tv, s: sv })
    }

    fn active(&self) -> Vec<usize> {
        (0..self.t.len()).filter(|&i| self.t[i] > 0.0).collect()
    }

    /// Lower bound on `min_w max_i t_i / (S w)_i` from a mixed strategy over
    /// pairs: `1 / max_j Σ_i α_i s_ij / t_i`.
    pub fn dual_bound(&self, alpha: &[f64]) -> f64 {
        let total: f64 = (0..self.t.len()).filter(|&i| self.t[i] > 0.0).map(|i| alpha[i]).sum();
        if total <= 0.0 {
            return 0.0;
        }
        let nf = self.s.first().map_or(0, |r| r.len());
        let best = (0..nf)
            .map(|j| {
                (0..self.t.len()).filter(|&i| self.t[i] > 0.0).map(|i| alpha[i] / total * self.s[i][j] / self.t[i]).sum::<f64>()
            })
            .fold(0.0f64, f64::max);
        if best > 0.0 { 1.0 / best } else { f64::INFINITY }
    }

    /// `max_i t_i / (S w)_i`.
    pub fn attained(&self, w: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (ti, si) in self.t.iter().zip(&self.s) {
            if *ti > 0.0 {
                let d = dot(si, w);
                worst = worst.max(if d > 0.0 { ti / d } else { f64::INFINITY });
            }
        }
        worst
    }
}

#[derive(Debug, Clone)]
pub(crate) struct GameSolution {
    /// `c*^p`; `+∞` if some active pair is invisible to every form.
    pub gamma: f64,
    pub w: Vec<f64>,
    pub alpha: Vec<f64>,
}

/// Solve the game LP and its dual directly.
pub(crate) fn solve_game(data: &LpData) -> Result<GameSolution> {
    let nf = data.s.first().map_or(0, |r| r.len());
    let active = data.active();
    let uniform = if nf > 0 { vec![1.0 / nf as f64; nf] } else { Vec::new() };
    if active.is_empty() {
        return Ok(GameSolution { gamma: 0.0, w: uniform, alpha: vec![0.0; data.t.len()] });
    }
    if nf == 0 || active.iter().any(|&i| data.s[i].iter().all(|&x| x == 0.0)) {
        return Ok(GameSolution { gamma: f64::INFINITY, w: uniform, alpha: vec![0.0; data.t.len()] });
    }
    let m: Vec<Vec<f64>> = active.iter().map(|&i| data.s[i].iter().map(|x| x / data.t[i]).collect()).collect();
    // The game value is at most min_i max_j M_ij; scaling by it keeps the
    // value near 1 so the solver's absolute tolerances stay relative.
    let scale = m.iter().map(|r| r.iter().fold(0.0f64, |a, &b| a.max(b))).fold(f64::INFINITY, f64::min);
    let m: Vec<Vec<f64>> = m.iter().map(|r| r.iter().map(|x| x / scale).collect()).collect();

    // Column player: max z s.t. (M w)_i ≥ z, Σ w = 1.
    let mut primal = LinearProgram::new((0..=nf).map(|j| if j == nf { -1.0 } else { 0.0 }).collect());
    for row in &m {
        let mut c = row.clone();
        c.push(-1.0);
        primal.add(c, Relation::Ge, 0.0);
    }
    primal.add((0..=nf).map(|j| if j == nf { 0.0 } else { 1.0 }).collect(), Relation::Eq, 1.0);
    let (w, y) = match primal.solve()? {
        LpOutcome::Optimal { x, duals, .. } => (x[..nf].to_vec(), duals),
        other => return Err(Error::Lp(format!("game LP not optimal: {other:?}"))),
    };
    let wsum: f64 = w.iter().sum();
    let w: Vec<f64> = w.iter().map(|x| x / wsum).collect();
    let spread = |a: &[f64]| {
        let mut alpha = vec![0.0; data.t.len()];
        let sum: f64 = a.iter().map(|v| v.max(0.0)).sum();
        if sum > 0.0 {
            for (&i, v) in active.iter().zip(a) {
                alpha[i] = v.max(0.0) / sum;
            }
        }
        alpha
    };
    // Pair weights are the multipliers of the pair rows.
    let mut alpha = spread(&y[..m.len()]);
    let gamma = data.attained(&w);
    if (gamma - data.dual_bound(&alpha)) > 1e-10 * gamma {
        // Row player: min v s.t. Σ_i α_i M_ij ≤ v, Σ α = 1.
        let k = m.len();
        let mut dual = LinearProgram::new((0..=k).map(|i| if i == k { 1.0 } else { 0.0 }).collect());
        for j in 0..nf {
            let mut c: Vec<f64> = m.iter().map(|r| r[j]).collect();
            c.push(-1.0);
            dual.add(c, Relation::Le, 0.0);
        }
        dual.add((0..=k).map(|i| if i == k { 0.0 } else { 1.0 }).collect(), Relation::Eq, 1.0);
        if let LpOutcome::Optimal { x, .. } = dual.solve()? {
            let other = spread(&x[..k]);
            if data.dual_bound(&other) > data.dual_bound(&alpha) {
                alpha = other;
            }
        }
    }
    Ok(GameSolution { gamma, w, alpha })
}

pub(crate) struct Bisection {
    pub gamma: f64,
    pub lower: f64,
    pub w: Vec<f64>,
    pub steps: usize,
}

/// Bisection on `γ = c^p` with an LP feasibility test per step.
pub(crate) fn bisect(data: &LpData, max_steps: usize, rel_width: f64) -> Result<Bisection> {
    let nf = data.s.first().map_or(0, |r| r.len());
    let active = data.active();
    let uniform = if nf > 0 { vec![1.0 / nf as f64; nf] } else { Vec::new() };
    if active.is_empty() {
        return Ok(Bisection { gamma: 0.0, lower: 0.0, w: uniform, steps: 0 });
    }
    if nf == 0 || active.iter().any(|&i| data.s[i].iter().all(|&x| x == 0.0)) {
        return Ok(Bisection { gamma: f64::INFINITY, lower: f64::INFINITY, w: uniform, steps: 0 });
    }
    let mut lo = active
        .iter()
        .map(|&i| data.t[i] / data.s[i].iter().fold(0.0f64, |a, &b| a.max(b)))
        .fold(0.0, f64::max);
    let mut best_w = uniform.clone();
    let mut hi = data.attained(&uniform);
    let mut steps = 0;
    while steps < max_steps && hi - lo > rel_width * hi {
        steps += 1;
        let mid = (lo * hi).sqrt();
        let mut lp = LinearProgram::new(vec![0.0; nf]);
        for &i in &active {
            let scale = mid / data.t[i];
            lp.add(data.s[i].iter().map(|x| x * scale).collect(), Relation::Ge, 1.0);
        }
        lp.add(vec![1.0; nf], Relation::Eq, 1.0);
        match lp.solve()? {
            LpOutcome::Optimal { x, .. } => {
                let sum: f64 = x.iter().sum();
                let w: Vec<f64> = x.iter().map(|v| v / sum).collect();
                let attained = data.attained(&w);
                if attained < hi {
                    hi = attained;
                    best_w = w;
                }
            }
            LpOutcome::Infeasible => lo = mid,
            LpOutcome::Unbounded => return Err(Error::Lp("feasibility LP reported unbounded".into())),
        }
        lo = lo.min(hi);
    }
    Ok(Bisection { gamma: hi, lower: lo, w: best_w, steps })
}

/// Dictionary-restricted Pietsch constant on a pair set (operator ball).
pub fn pietsch_upper_lp(
    t: &MultilinearOperator,
    pairset: &PairConfiguration,
    dictionary: &[MultilinearOperator],
    p: f64,
) -> Result<PietschCertificate> {
    pietsch_upper_lp_in(t, pairset, dictionary, p, Ball::Operator)
}

pub fn pietsch_upper_lp_in(
    t: &MultilinearOperator,
    pairset: &PairConfiguration,
    dictionary: &[MultilinearOperator],
    p: f64,
    ball: Ball,
) -> Result<PietschCertificate> {
    let dims = t.factor_dims().to_vec();
    let mut forms = Vec::with_capacity(dictionary.len());
    for (j, f) in dictionary.iter().enumerate() {
        if !f.is_form() || f.factor_dims() != dims.as_slice() {
            return Err(Error::shape(format!("dictionary entry {j} is not a scalar form on the operator's factors")));
        }
        forms.push(f.kernel().data().to_vec());
    }
    certificate_from_forms(t, pairset, forms, p, ball, BISECTION_STEPS)
}

pub(crate) fn certificate_from_forms(
    t: &MultilinearOperator,
    pairset: &PairConfiguration,
    forms: Vec<Vec<f64>>,
    p: f64,
    ball: Ball,
    steps: usize,
) -> Result<PietschCertificate> {
    check_p(p)?;
    if forms.is_empty() {
        return Err(Error::arg("dictionary is empty"));
    }
    let dims = t.factor_dims().to_vec();
    let norms = t.factor_norms().to_vec();
    let (pairset, _) = pairset.without_degenerate()?;
    let forms: Vec<Vec<f64>> = forms.into_iter().map(|f| into_ball(f, &dims, &norms, ball)).collect();
    let data = LpData::new(t, &pairset, &forms, p)?;
    let game = solve_game(&data)?;
    let bis = bisect(&data, steps, BISECTION_REL_WIDTH)?;
    let feasible = bis.gamma.is_finite();
    let duality_gap = if feasible && bis.gamma > 0.0 {
        ((bis.gamma - data.dual_bound(&game.alpha)) / bis.gamma).max(0.0)
    } else {
        0.0
    };
    let forms = forms
        .into_iter()
        .map(|f| MultilinearOperator::form(DenseTensor::from_parts(dims.clone(), f), norms.clone()))
        .collect::<Result<Vec<_>>>()?;
    Ok(PietschCertificate {
        forms,
        weights: bis.w,
        constant: bis.gamma.powf(1.0 / p),
        p,
        pairset,
        ball,
        feasible,
        bisection_lower: bis.lower.powf(1.0 / p),
        bisection_steps: bis.steps,
        duality_gap,
        pair_weights: game.alpha,
    })
}

/// `(Σ_j w_j |φ_j(Δ)|^p)^{1/p}` for a flat difference tensor.
pub(crate) fn dominated_norm(forms: &[Vec<f64>], w: &[f64], delta: &[f64], p: f64) -> f64 {
    let terms: Vec<f64> = forms.iter().zip(w).map(|(f, &wj)| wj.powf(1.0 / p) * dot(f, delta)).collect();
    lp_norm(&terms, p)
}
