//! Bracketing `π_p^Lip(T)` by column generation.
//!
//! Each round solves the Pietsch game on the current pair set and dictionary,
//! turns the optimal pair strategy into a weighted configuration whose
//! denominator ascent yields both a certified lower bound and a new dictionary
//! form, and adds pairs that most violate the current domination.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::form_norm::{
    self, check_p, denominator, lp_norm, operator_norm_with, Ball, DenominatorOptions, Geometry, NormOptions,
    ENUMERATION_CAP,
};
use crate::linalg::{axpy, dot, norm2};
use crate::report::{to_json_string, BoundReport};
use crate::rng::{self, domain, StreamRng};
use crate::summing::lp::{certificate_from_forms, form_size, solve_game, LpData, PietschCertificate};
use crate::tensor::{
    basis_configuration, contract_all_but, dual_maximizer, outer, vector_norm, DenseTensor, MultilinearOperator, Norm,
    PairConfiguration, SegrePoint,
};

/// Search budget for [`estimate_pi_lip`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub rounds: usize,
    /// Restarts of each denominator ascent.
    pub restarts: usize,
    /// Starts of the adversarial pair search per round.
    pub pair_starts: usize,
    pub max_pairs: usize,
    pub max_forms: usize,
    pub random_forms: usize,
    pub initial_pairs: usize,
    pub bisection_steps: usize,
    /// Iteration cap of each inner ascent.
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
    pub ball: Ball,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            rounds: 8,
            restarts: 16,
            pair_starts: 16,
            max_pairs: 48,
            max_forms: 96,
            random_forms: 32,
            initial_pairs: 4,
            bisection_steps: crate::summing::lp::BISECTION_STEPS,
            max_iter: 300,
            tol: 1e-9,
            seed: 0,
            ball: Ball::Operator,
        }
    }
}

impl Budget {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rounds", self.rounds),
            ("restarts", self.restarts),
            ("pair_starts", self.pair_starts),
            ("max_pairs", self.max_pairs),
            ("max_forms", self.max_forms),
            ("bisection_steps", self.bisection_steps),
            ("max_iter", self.max_iter),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::arg(format!("budget {name} must be positive")));
            }
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::arg("tolerance must lie in (0, 1)"));
        }
        Ok(())
    }

    fn denominator_options(&self, seed: u64, warm: Vec<Vec<f64>>) -> DenominatorOptions {
        DenominatorOptions {
            restarts: self.restarts,
            max_iter: self.max_iter,
            tol: self.tol,
            enumeration_cap: ENUMERATION_CAP,
            seed,
            warm_starts: warm,
        }
    }
}

// ---------------------------------------------------------------------------
// Lower bounds from a configuration

#[derive(Debug, Clone)]
pub struct LowerBound {
    /// Bracket on `N / D` for this configuration.
    pub report: BoundReport,
    pub numerator: f64,
    pub denominator: BoundReport,
    /// Form in the ball attaining the denominator's certified lower value.
    pub maximizer: Vec<f64>,
    pub config: PairConfiguration,
}

/// `N / D` for a configuration, operator ball.
pub fn lower_bound_config(t: &MultilinearOperator, cfg: &PairConfiguration, p: f64) -> Result<BoundReport> {
    Ok(lower_bound_config_with(t, cfg, p, Ball::Operator, &DenominatorOptions::default())?.report)
}

pub fn lower_bound_config_with(
    t: &MultilinearOperator,
    cfg: &PairConfiguration,
    p: f64,
    ball: Ball,
    opts: &DenominatorOptions,
) -> Result<LowerBound> {
    let geometry = match ball {
        Ball::Operator => Geometry::Operator,
        Ball::HilbertSchmidt => Geometry::HilbertSchmidt,
    };
    lower_bound_geometry(t, cfg, p, geometry, opts)
}

/// `N = (Σ a_i ‖T(u_i) − T(v_i)‖^p)^{1/p}`.
pub fn config_numerator(t: &MultilinearOperator, cfg: &PairConfiguration, p: f64) -> Result<f64> {
    if cfg.dims() != t.factor_dims() {
        return Err(Error::shape("configuration dimensions do not match the operator"));
    }
    let terms: Vec<f64> = (0..cfg.len())
        .map(|i| {
            let z = t.apply_linearized(&cfg.difference(i));
            cfg.weights()[i].powf(1.0 / p) * vector_norm(&z, t.codomain_norm())
        })
        .collect();
    Ok(lp_norm(&terms, p))
}

pub(crate) fn lower_bound_geometry(
    t: &MultilinearOperator,
    cfg: &PairConfiguration,
    p: f64,
    geometry: Geometry,
    opts: &DenominatorOptions,
) -> Result<LowerBound> {
    check_p(p)?;
    let (cfg, _) = cfg.without_degenerate()?;
    let numerator = config_numerator(t, &cfg, p)?;
    let width: usize = t.factor_dims().iter().product();
    if numerator == 0.0 {
        let report = BoundReport::zero("config").with_meta(0, 0, opts.seed);
        return Ok(LowerBound { denominator: report.clone(), report, numerator, maximizer: vec![0.0; width], config: cfg });
    }
    let den = denominator(&cfg, p, geometry, t.factor_norms(), opts)?;
    let d = &den.report;
    let ratio = |x: f64| if x > 0.0 { numerator / x } else { f64::INFINITY };
    let report = BoundReport {
        certified_lower: ratio(d.certified_upper),
        heuristic_lower: ratio(d.heuristic_lower),
        heuristic_upper: ratio(d.heuristic_lower),
        certified_upper: ratio(d.certified_lower),
        method: format!("config/{}", d.method),
        iterations: d.iterations,
        restarts: d.restarts,
        seed: d.seed,
    }
    .clamped();
    Ok(LowerBound { report, numerator, denominator: den.report, maximizer: den.maximizer, config: cfg })
}

// ---------------------------------------------------------------------------
// Estimation

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Variant {
    Multilinear,
    /// Pairs restricted to diagonal points, forms to symmetric ones.
    Polynomial,
}

#[derive(Debug, Clone)]
pub struct Estimate {
    pub report: BoundReport,
    /// Final certificate (bisection) on the explored pair set and dictionary.
    pub certificate: PietschCertificate,
    /// Configuration achieving `certified_lower`.
    pub witness: PairConfiguration,
    pub rounds: usize,
}

/// Bracket on `π_p^Lip(T)`; `heuristic_upper` is the final LP constant.
pub fn estimate_pi_lip(t: &MultilinearOperator, p: f64, budget: &Budget) -> Result<BoundReport> {
    Ok(estimate_pi_lip_full(t, p, budget, None)?.report)
}

/// Full result. `seed_pairs` are kept in the pair set for every round.
pub fn estimate_pi_lip_full(
    t: &MultilinearOperator,
    p: f64,
    budget: &Budget,
    seed_pairs: Option<&PairConfiguration>,
) -> Result<Estimate> {
    Engine::new(t, p, budget, Variant::Multilinear)?.run(seed_pairs)
}

/// LP constant on a fixed pair set with the default dictionary (rank-one
/// duals, targeted forms, random forms and one denominator maximizer).
pub fn lp_constant_on(
    t: &MultilinearOperator,
    pairset: &PairConfiguration,
    p: f64,
    budget: &Budget,
) -> Result<PietschCertificate> {
    let mut e = Engine::new(t, p, budget, Variant::Multilinear)?;
    let (pairset, _) = pairset.without_degenerate()?;
    for (u, v) in pairset.pairs() {
        e.add_pair_forms(u, v);
    }
    e.add_random_forms();
    if !t.is_zero() {
        let data = LpData::new(t, &pairset, &e.forms, p)?;
        let game = solve_game(&data)?;
        if let Some(cfg) = dual_configuration(&pairset, &data, &game.alpha) {
            let opts = budget.denominator_options(rng::child_seed(budget.seed, domain::DICTIONARY, 0), Vec::new());
            let lb = lower_bound_geometry(t, &cfg, p, e.geometry, &opts)?;
            e.add_form(lb.maximizer);
        }
    }
    certificate_from_forms(t, &pairset, e.forms, p, e.size_ball, budget.bisection_steps)
}

/// Pairs with positive dual weight, weighted `a_i = α_i / t_i`.
fn dual_configuration(pairs: &PairConfiguration, data: &LpData, alpha: &[f64]) -> Option<PairConfiguration> {
    let top = alpha.iter().fold(0.0f64, |a, &b| a.max(b));
    let mut ps = Vec::new();
    let mut ws = Vec::new();
    for i in 0..pairs.len() {
        if alpha[i] > 1e-12 * top && data.t[i] > 0.0 {
            ps.push(pairs.pairs()[i].clone());
            // Rescale so weights are O(1); N/D is invariant under common scaling.
            ws.push(alpha[i] / data.t[i] * pairs.weights()[i]);
        }
    }
    if ps.is_empty() {
        return None;
    }
    let m = ws.iter().fold(0.0f64, |a, &b| a.max(b));
    let ws = ws.into_iter().map(|w| w / m).collect();
    PairConfiguration::weighted(ps, ws).ok()
}

pub(crate) struct Engine<'a> {
    t: &'a MultilinearOperator,
    p: f64,
    budget: &'a Budget,
    variant: Variant,
    pub(crate) geometry: Geometry,
    /// Ball used to size dictionary forms.
    pub(crate) size_ball: Ball,
    dims: Vec<usize>,
    norms: Vec<Norm>,
    pub(crate) forms: Vec<Vec<f64>>,
    rng: StreamRng,
}

impl<'a> Engine<'a> {
    pub(crate) fn new(t: &'a MultilinearOperator, p: f64, budget: &'a Budget, variant: Variant) -> Result<Self> {
        check_p(p)?;
        budget.validate()?;
        let (geometry, size_ball) = match (variant, budget.ball) {
            (Variant::Polynomial, _) => (Geometry::Polynomial, Ball::Operator),
            (_, Ball::Operator) => (Geometry::Operator, Ball::Operator),
            (_, Ball::HilbertSchmidt) => (Geometry::HilbertSchmidt, Ball::HilbertSchmidt),
        };
        Ok(Engine {
            t,
            p,
            budget,
            variant,
            geometry,
            size_ball,
            dims: t.factor_dims().to_vec(),
            norms: t.factor_norms().to_vec(),
            forms: Vec::new(),
            rng: rng::stream(budget.seed, domain::DICTIONARY, 0),
        })
    }

    fn symmetrize(&self, f: Vec<f64>) -> Vec<f64> {
        if self.variant != Variant::Polynomial {
            return f;
        }
        DenseTensor::from_parts(self.dims.clone(), f)
            .symmetrize_leading(self.dims.len())
            .expect("polynomial forms have equal dimensions")
            .into_data()
    }

    /// Add a form scaled to unit size in the ball, skipping near-duplicates.
    pub(crate) fn add_form(&mut self, f: Vec<f64>) {
        let f = self.symmetrize(f);
        let s = form_size(&f, &self.dims, &self.norms, self.size_ball);
        if !(s > 1e-14) || !s.is_finite() {
            return;
        }
        let f: Vec<f64> = f.into_iter().map(|x| x / s).collect();
        let nf = norm2(&f);
        for g in &self.forms {
            let c = dot(&f, g) / (nf * norm2(g));
            if c.abs() > 1.0 - 1e-10 {
                return;
            }
        }
        self.forms.push(f);
    }

    /// Rank-one dual forms of both endpoints and the codomain-targeted form.
    pub(crate) fn add_pair_forms(&mut self, u: &SegrePoint, v: &SegrePoint) {
        for x in [u, v] {
            let fs: Option<Vec<Vec<f64>>> =
                x.factors.iter().zip(&self.norms).map(|(f, &r)| dual_maximizer(f, r.dual())).collect();
            if let Some(fs) = fs {
                self.add_form(outer(&fs));
            }
        }
        let mut delta = u.outer_flat();
        axpy(&mut delta, -1.0, &v.outer_flat());
        let z = self.t.apply_linearized(&delta);
        if let Some(y) = dual_maximizer(&z, self.t.codomain_norm().dual()) {
            self.add_form(self.t.compose_functional(&y));
        }
    }

    pub(crate) fn add_random_forms(&mut self) {
        for l in 0..self.t.codomain_dim() {
            self.add_form(self.t.component(l));
        }
        let width: usize = self.dims.iter().product();
        for _ in 0..self.budget.random_forms {
            let g = rng::gaussian_vec(&mut self.rng, width);
            self.add_form(g);
        }
    }

    fn random_point(&self, rng: &mut StreamRng) -> SegrePoint {
        if self.variant == Variant::Polynomial {
            let x = rng::unit_vec(rng, self.dims[0], self.norms[0]);
            return SegrePoint::new(vec![x; self.dims.len()]);
        }
        SegrePoint::new(self.dims.iter().zip(&self.norms).map(|(&d, &r)| rng::unit_vec(rng, d, r)).collect())
    }

    fn argmax_point(&self) -> SegrePoint {
        match self.variant {
            Variant::Multilinear => {
                let opts = NormOptions { seed: self.budget.seed, ..NormOptions::default() };
                operator_norm_with(self.t, &opts).argmax
            }
            Variant::Polynomial => {
                let x = crate::summing::poly::polynomial_argmax(self.t, self.budget.restarts, self.budget.seed);
                SegrePoint::new(vec![x; self.dims.len()])
            }
        }
    }

    pub(crate) fn run(mut self, seed_pairs: Option<&PairConfiguration>) -> Result<Estimate> {
        let t = self.t;
        let p = self.p;
        let budget = self.budget;
        let zero_pair = SegrePoint::zeros(&self.dims);
        let argmax = self.argmax_point();
        let mut pairs: Vec<(SegrePoint, SegrePoint)> = vec![(argmax.clone(), zero_pair.clone())];
        let mut protected = 1;
        if let Some(sp) = seed_pairs {
            if sp.dims() != self.dims {
                return Err(Error::shape("seed pairs do not match the operator"));
            }
            let (sp, _) = sp.without_degenerate()?;
            pairs.extend(sp.pairs().iter().cloned());
            protected = pairs.len();
        }
        let mut init_rng = rng::stream(budget.seed, domain::INITIAL_PAIRS, 0);
        for _ in 0..budget.initial_pairs {
            let u = self.random_point(&mut init_rng);
            let v = self.random_point(&mut init_rng);
            pairs.push((u, v));
        }
        for (u, v) in pairs.clone() {
            self.add_pair_forms(&u, &v);
        }
        self.add_random_forms();

        if t.is_zero() {
            let cfg = PairConfiguration::new(pairs)?;
            let cert = certificate_from_forms(t, &cfg, self.forms, p, self.size_ball, budget.bisection_steps)?;
            let report = BoundReport::zero("zero-operator").with_meta(0, 0, budget.seed);
            return Ok(Estimate { report, certificate: cert, witness: cfg, rounds: 0 });
        }

        // Candidate lower bounds.
        let mut best: Option<LowerBound> = None;
        let mut heuristic_lower: f64 = 0.0;
        let mut consider = |lb: LowerBound, best: &mut Option<LowerBound>| {
            heuristic_lower = heuristic_lower.max(lb.report.heuristic_lower);
            if best.as_ref().is_none_or(|b| lb.report.certified_lower > b.report.certified_lower) {
                *best = Some(lb);
            }
        };
        let base = PairConfiguration::new(vec![(argmax, zero_pair)])?;
        let opts = budget.denominator_options(rng::child_seed(budget.seed, domain::DENOMINATOR, 1000), Vec::new());
        consider(lower_bound_geometry(t, &base, p, self.geometry, &opts)?, &mut best);
        if self.geometry == Geometry::HilbertSchmidt && self.dims.iter().product::<usize>() <= 256 {
            let basis = basis_configuration(&self.dims)?;
            let lb = lower_bound_geometry(t, &basis, p, self.geometry, &opts)?;
            if lb.numerator > 0.0 {
                self.add_form(lb.maximizer.clone());
                consider(lb, &mut best);
            }
        }

        let mut warm: Vec<f64> = Vec::new();
        let mut rounds = 0;
        for round in 0..budget.rounds {
            rounds = round + 1;
            let cfg = PairConfiguration::new(pairs.clone())?;
            let data = LpData::new(t, &cfg, &self.forms, p)?;
            let mut game = solve_game(&data)?;
            if game.gamma.is_finite() {
                self.trim(&mut pairs, &mut game, protected);
            }
            let cfg = PairConfiguration::new(pairs.clone())?;
            let data = LpData::new(t, &cfg, &self.forms, p)?;
            let game = solve_game(&data)?;
            if !game.gamma.is_finite() {
                for (u, v) in pairs.clone() {
                    self.add_pair_forms(&u, &v);
                }
                continue;
            }
            let c_round = game.gamma.powf(1.0 / p);

            if let Some(wcfg) = dual_configuration(&cfg, &data, &game.alpha) {
                let mut warm_starts: Vec<Vec<f64>> = Vec::new();
                if !warm.is_empty() {
                    warm_starts.push(warm.clone());
                }
                let mut order: Vec<usize> = (0..self.forms.len()).collect();
                order.sort_by(|&a, &b| game.w[b].partial_cmp(&game.w[a]).unwrap().then(a.cmp(&b)));
                warm_starts.extend(order.iter().take(4).filter(|&&j| game.w[j] > 0.0).map(|&j| self.forms[j].clone()));
                let seed = rng::child_seed(budget.seed, domain::DENOMINATOR, round as u64);
                let lb = lower_bound_geometry(t, &wcfg, p, self.geometry, &budget.denominator_options(seed, warm_starts))?;
                if norm2(&lb.maximizer) > 0.0 {
                    warm = lb.maximizer.clone();
                    self.add_form(lb.maximizer.clone());
                }
                consider(lb, &mut best);
            }
            let cl = best.as_ref().map_or(0.0, |b| b.report.certified_lower);
            if cl >= c_round * (1.0 - budget.tol) {
                break;
            }
            let active: Vec<usize> = (0..game.w.len()).filter(|&j| game.w[j] > 0.0).collect();
            let search = PairSearch {
                t,
                p,
                dims: &self.dims,
                forms: active.iter().map(|&j| self.forms[j].as_slice()).collect(),
                w: active.iter().map(|&j| game.w[j]).collect(),
                diagonal: self.variant == Variant::Polynomial,
            };
            let mut starts: Vec<(SegrePoint, SegrePoint)> = Vec::new();
            let mut srng = rng::stream(budget.seed, domain::PAIR_SEARCH, round as u64);
            let mut by_alpha: Vec<usize> = (0..pairs.len()).collect();
            by_alpha.sort_by(|&a, &b| game.alpha[b].partial_cmp(&game.alpha[a]).unwrap().then(a.cmp(&b)));
            for s in 0..budget.pair_starts {
                let start = match s % 3 {
                    0 => (self.random_point(&mut srng), SegrePoint::zeros(&self.dims)),
                    1 => (self.random_point(&mut srng), self.random_point(&mut srng)),
                    _ => {
                        let (u, v) = &pairs[by_alpha[(s / 3) % by_alpha.len()]];
                        (self.perturb(u, &mut srng), self.perturb(v, &mut srng))
                    }
                };
                starts.push(start);
            }
            let max_iter = budget.max_iter;
            let found: Vec<(f64, SegrePoint, SegrePoint)> =
                starts.into_par_iter().map(|(u, v)| search.ascend(u, v, max_iter)).collect();
            let mut found: Vec<(usize, f64, SegrePoint, SegrePoint)> =
                found.into_iter().enumerate().map(|(i, (r, u, v))| (i, r, u, v)).collect();
            found.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
            let mut added = 0;
            for (_, ratio, u, v) in found {
                if added >= 4 || !(ratio > game.gamma * (1.0 + 1e-6)) {
                    break;
                }
                if is_duplicate(&pairs, &u, &v) {
                    continue;
                }
                self.add_pair_forms(&u, &v);
                pairs.push((u, v));
                added += 1;
            }
        }

        let cfg = PairConfiguration::new(pairs)?;
        let cert = certificate_from_forms(t, &cfg, self.forms, p, self.size_ball, budget.bisection_steps)?;
        let best = best.expect("at least one lower bound was computed");
        let method = match (self.geometry, p == 2.0 && t.is_euclidean()) {
            (Geometry::HilbertSchmidt, true) => "pietsch-lp/hs-exact",
            (Geometry::HilbertSchmidt, false) => "pietsch-lp/hs",
            (Geometry::Polynomial, _) => "pietsch-lp/poly",
            (Geometry::Operator, _) => "pietsch-lp/op",
        };
        let mut report = BoundReport {
            certified_lower: best.report.certified_lower,
            heuristic_lower: heuristic_lower.max(best.report.certified_lower),
            heuristic_upper: cert.constant,
            certified_upper: certified_summing_upper(t, p, self.size_ball),
            method: method.to_string(),
            iterations: rounds,
            restarts: budget.restarts,
            seed: budget.seed,
        };
        if report.certified_lower > report.heuristic_upper + 1e-6 {
            log::warn!(
                "certified lower {} exceeds LP constant {}; dictionary is not in the ball?",
                report.certified_lower,
                report.heuristic_upper
            );
        }
        if !cert.feasible {
            let partial = report.clone().clamped();
            return Err(Error::DictionaryExhausted(format!(
                "LP infeasible on the explored pair set; partial report: {}",
                to_json_string(&partial).trim()
            )));
        }
        report.heuristic_upper = report.heuristic_upper.max(report.certified_lower);
        Ok(Estimate { report: report.clamped(), certificate: cert, witness: best.config, rounds })
    }

    fn perturb(&self, x: &SegrePoint, rng: &mut StreamRng) -> SegrePoint {
        let noise = |f: &Vec<f64>, rng: &mut StreamRng| -> Vec<f64> {
            let scale = vector_norm(f, Norm::L2).max(1e-3);
            let g = rng::gaussian_vec(rng, f.len());
            f.iter().zip(g).map(|(a, b)| a + 0.3 * scale * b).collect()
        };
        if self.variant == Variant::Polynomial {
            let y = noise(&x.factors[0], rng);
            return SegrePoint::new(vec![y; x.order()]);
        }
        SegrePoint::new(x.factors.iter().map(|f| noise(f, rng)).collect())
    }

    /// Drop zero-weight pairs and forms (oldest first) beyond the caps.
    fn trim(&mut self, pairs: &mut Vec<(SegrePoint, SegrePoint)>, game: &mut crate::summing::lp::GameSolution, protected: usize) {
        if pairs.len() > self.budget.max_pairs {
            let mut excess = pairs.len() - self.budget.max_pairs;
            let mut keep = vec![true; pairs.len()];
            for i in protected..pairs.len() {
                if excess == 0 {
                    break;
                }
                if game.alpha[i] <= 1e-12 {
                    keep[i] = false;
                    excess -= 1;
                }
            }
            let mut it = keep.iter();
            pairs.retain(|_| *it.next().unwrap());
        }
        if self.forms.len() > self.budget.max_forms {
            let mut excess = self.forms.len() - self.budget.max_forms;
            let mut keep = vec![true; self.forms.len()];
            for j in 0..self.forms.len() {
                if excess == 0 {
                    break;
                }
                if game.w[j] <= 1e-12 {
                    keep[j] = false;
                    excess -= 1;
                }
            }
            let mut it = keep.iter();
            self.forms.retain(|_| *it.next().unwrap());
        }
    }
}

/// Proven upper bound on `π_p` for `p ≥ 2` via `π_p ≤ π_2 ≤ f γ ‖T‖_F`, where
/// `f` bounds the forms' Frobenius norm by their operator norm (1 for the HS
/// ball) and `γ` compares the codomain norm with `ℓ_2`. Infinite for `p < 2`.
pub fn certified_summing_upper(t: &MultilinearOperator, p: f64, ball: Ball) -> f64 {
    if p < 2.0 {
        return f64::INFINITY;
    }
    let fro = t.kernel().frobenius_norm();
    let gamma = t.codomain_norm().over_l2(t.codomain_dim());
    match ball {
        Ball::HilbertSchmidt => gamma * fro,
        Ball::Operator => {
            let f: f64 = t.factor_dims().iter().zip(t.factor_norms()).map(|(&d, &r)| r.l2_over(d)).product();
            f * gamma * fro
        }
    }
}

fn is_duplicate(pairs: &[(SegrePoint, SegrePoint)], u: &SegrePoint, v: &SegrePoint) -> bool {
    let mut d = u.outer_flat();
    axpy(&mut d, -1.0, &v.outer_flat());
    let nd = norm2(&d);
    if nd == 0.0 {
        return true;
    }
    pairs.iter().any(|(a, b)| {
        let mut e = a.outer_flat();
        axpy(&mut e, -1.0, &b.outer_flat());
        let ne = norm2(&e);
        ne > 0.0 && (dot(&d, &e) / (nd * ne)).abs() > 1.0 - 1e-9 && ((nd - ne).abs() <= 1e-9 * nd.max(ne))
    })
}

/// Ascent on `log ‖T(u) − T(v)‖^p − log Σ_j w_j |φ_j(Δ)|^p` over pairs.
struct PairSearch<'b> {
    t: &'b MultilinearOperator,
    p: f64,
    dims: &'b [usize],
    forms: Vec<&'b [f64]>,
    w: Vec<f64>,
    diagonal: bool,
}

impl PairSearch<'_> {
    fn parts(&self, u: &SegrePoint, v: &SegrePoint) -> (f64, f64, Vec<f64>) {
        let mut delta = u.outer_flat();
        axpy(&mut delta, -1.0, &v.outer_flat());
        let z = self.t.apply_linearized(&delta);
        let f = vector_norm(&z, self.t.codomain_norm()).powf(self.p);
        let h: f64 = self.forms.iter().zip(&self.w).map(|(g, &w)| w * dot(g, &delta).abs().powf(self.p)).sum();
        (f, h, delta)
    }

    /// Combined form `H` with `∂/∂u_k log R = H(u, .., ·_k, .., u)`.
    fn gradient_form(&self, delta: &[f64], f: f64, h: f64) -> Vec<f64> {
        let z = self.t.apply_linearized(delta);
        let zn = f.powf(1.0 / self.p);
        let y = dual_maximizer(&z, self.t.codomain_norm().dual()).unwrap_or_else(|| vec![0.0; z.len()]);
        let mut hform: Vec<f64> = self.t.compose_functional(&y).into_iter().map(|x| x * self.p / zn).collect();
        for (g, &w) in self.forms.iter().zip(&self.w) {
            let a = dot(g, delta);
            if a == 0.0 {
                continue;
            }
            let coef = w * self.p * a.signum() * a.abs().powf(self.p - 1.0) / h;
            axpy(&mut hform, -coef, g);
        }
        hform
    }

    fn grads(&self, hform: &[f64], x: &SegrePoint) -> Vec<Vec<f64>> {
        let refs: Vec<&[f64]> = x.factors.iter().map(|f| f.as_slice()).collect();
        let gs: Vec<Vec<f64>> = (0..self.dims.len()).map(|k| contract_all_but(self.dims, hform, &refs, k)).collect();
        if self.diagonal {
            let mut s = vec![0.0; gs[0].len()];
            for g in &gs {
                axpy(&mut s, 1.0, g);
            }
            return vec![s; gs.len()];
        }
        gs
    }

    fn normalize(&self, u: &mut SegrePoint, v: &mut SegrePoint) {
        let total: f64 = u.factors.iter().chain(&v.factors).map(|f| dot(f, f)).sum::<f64>();
        if total > 0.0 {
            let s = (2.0 * self.dims.len() as f64 / total).sqrt();
            for f in u.factors.iter_mut().chain(v.factors.iter_mut()) {
                f.iter_mut().for_each(|x| *x *= s);
            }
        }
    }

    /// Returns `(ratio f/h, u, v)`; ratio is `+∞` when no form sees the pair.
    fn ascend(&self, mut u: SegrePoint, mut v: SegrePoint, max_iter: usize) -> (f64, SegrePoint, SegrePoint) {
        self.normalize(&mut u, &mut v);
        let (mut f, mut h, mut delta) = self.parts(&u, &v);
        if f == 0.0 {
            return (0.0, u, v);
        }
        if h == 0.0 {
            return (f64::INFINITY, u, v);
        }
        let mut obj = f.ln() - h.ln();
        let mut step = 0.5;
        for _ in 0..max_iter {
            let hform = self.gradient_form(&delta, f, h);
            let gu = self.grads(&hform, &u);
            let gv: Vec<Vec<f64>> = self.grads(&hform, &v).into_iter().map(|g| g.into_iter().map(|x| -x).collect()).collect();
            let gn = gu.iter().chain(&gv).map(|g| dot(g, g)).sum::<f64>().sqrt();
            if gn < 1e-14 {
                break;
            }
            let mut accepted = false;
            while step > 1e-10 {
                let mut cu = u.clone();
                let mut cv = v.clone();
                for (x, g) in cu.factors.iter_mut().zip(&gu) {
                    axpy(x, step / gn, g);
                }
                for (x, g) in cv.factors.iter_mut().zip(&gv) {
                    axpy(x, step / gn, g);
                }
                self.normalize(&mut cu, &mut cv);
                let (cf, ch, cd) = self.parts(&cu, &cv);
                if cf > 0.0 && ch == 0.0 {
                    return (f64::INFINITY, cu, cv);
                }
                if cf > 0.0 {
                    let cobj = cf.ln() - ch.ln();
                    if cobj > obj + 1e-4 * step * gn {
                        let gain = cobj - obj;
                        u = cu;
                        v = cv;
                        f = cf;
                        h = ch;
                        delta = cd;
                        obj = cobj;
                        step = (step * 2.0).min(1.0);
                        accepted = gain > 1e-10;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        (f / h, u, v)
    }
}

/// Scalar form check used in tests and diagnostics: `‖φ‖` bracket.
pub fn form_norm_bracket(phi: &MultilinearOperator) -> BoundReport {
    form_norm::operator_norm(phi)
}
