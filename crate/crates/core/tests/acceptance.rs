//! Acceptance criteria AC1-AC9. Runs without the libtest harness so every
//! criterion prints one PASS/FAIL line; exits non-zero if any fails.

use std::collections::BTreeMap;
use std::process::Command;
use std::time::{Duration, Instant};

use lipnorm::dp_norm::{default_witnesses, dp_lower_dual, dp_upper, check_difference_domination, DpBudget, MixedTensor};
use lipnorm::form_norm::{operator_norm_with, NormOptions};
use lipnorm::hilbert_schmidt::basis_config_lower;
use lipnorm::rng::{self, domain, StreamRng};
use lipnorm::suite::{random_configuration, random_mixed, random_operator, random_point};
use lipnorm::summing::{
    estimate_pi_lip_full, lift_configuration, pietsch_upper_lp, restrict_operator, Budget,
};
use lipnorm::{vector_norm, DenseTensor, MultilinearOperator, Norm, PairConfiguration, SegrePoint};
use rand::Rng;

const NORMS: [Norm; 3] = [Norm::L1, Norm::L2, Norm::Inf];

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn small_budget(seed: u64) -> Budget {
    Budget { rounds: 4, restarts: 8, pair_starts: 8, random_forms: 16, seed, ..Budget::default() }
}

fn instance(rng: &mut StreamRng) -> MultilinearOperator {
    let n = rng.random_range(1..=3);
    let max_dim = if n == 3 { 2 } else { 3 };
    let dims: Vec<usize> = (0..n).map(|_| rng.random_range(1..=max_dim)).collect();
    let norms: Vec<Norm> = (0..n).map(|_| NORMS[rng.random_range(0..3)]).collect();
    let m = rng.random_range(1..=2);
    let cnorm = NORMS[rng.random_range(0..3)];
    random_operator(rng, &dims, m, norms, cnorm).unwrap()
}

fn stream(ac: u64, i: u64) -> StreamRng {
    rng::stream(2024, domain::SUITE, (ac << 32) | i)
}

/// π_p^Lip(Λ_n) = 1: the estimator's certified lower bound and the LP with
/// the single form Λ_n both land on 1.
fn ac1() -> Outcome {
    let mut worst = Duration::ZERO;
    let mut details = Vec::new();
    let mut ok = true;
    for n in [2, 3] {
        for p in [1.0, 2.0] {
            let start = Instant::now();
            let t = MultilinearOperator::scalar_product(n);
            let est = estimate_pi_lip_full(&t, p, &Budget::default(), None).unwrap();
            let cert = pietsch_upper_lp(&t, &est.certificate.pairset, std::slice::from_ref(&t), p).unwrap();
            let elapsed = start.elapsed();
            worst = worst.max(elapsed);
            let good = est.report.certified_lower >= 0.999 && cert.constant <= 1.001 && elapsed < Duration::from_secs(1);
            ok &= good;
            details.push(format!("n={n} p={p}: cl={:.6} lp={:.6}", est.report.certified_lower, cert.constant));
        }
    }
    outcome(ok, format!("{}; slowest {:.3}s", details.join(", "), worst.as_secs_f64()))
}

/// Largest singular value of a 2×2 matrix in closed form.
fn sigma_max_2x2(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let s = a * a + b * b + c * c + d * d;
    let det = a * d - b * c;
    ((s + (s * s - 4.0 * det * det).max(0.0).sqrt()) / 2.0).sqrt()
}

/// For scalar forms the summing norm is the form norm, here the spectral norm.
fn ac2() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut misses = 0;
    for i in 0..50u64 {
        let mut r = stream(2, i);
        let k = rng::gaussian_vec(&mut r, 4);
        let sigma = sigma_max_2x2(k[0], k[1], k[2], k[3]);
        let phi = MultilinearOperator::form(DenseTensor::new(vec![2, 2], k).unwrap(), vec![Norm::L2; 2]).unwrap();
        let p = [1.0, 2.0, 3.0][i as usize % 3];
        let est = estimate_pi_lip_full(&phi, p, &Budget { seed: i, ..Budget::default() }, None).unwrap();
        let (cl, hu) = (est.report.certified_lower, est.report.heuristic_upper);
        let err = ((cl - sigma).abs() / sigma).max((hu - sigma).abs() / sigma);
        worst = worst.max(err);
        if err > 0.02 {
            misses += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        misses == 0 && elapsed < Duration::from_secs(30),
        format!("50 forms, {misses} outside 2%, worst relative error {worst:.2e}, {:.2}s", elapsed.as_secs_f64()),
    )
}

/// The basis configuration recovers the Frobenius norm exactly.
fn ac3() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for i in 0..100u64 {
        let mut r = stream(3, i);
        let n = r.random_range(1..=3);
        let dims: Vec<usize> = (0..n).map(|_| r.random_range(1..=3)).collect();
        let m = r.random_range(1..=3);
        let t = random_operator(&mut r, &dims, m, vec![Norm::L2; n], Norm::L2).unwrap();
        let frob = t.kernel().data().iter().map(|x| x * x).sum::<f64>().sqrt();
        worst = worst.max((basis_config_lower(&t).unwrap() - frob).abs() / frob);
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-9 && elapsed < Duration::from_secs(10),
        format!("100 kernels, worst relative error {worst:.2e}, {:.2}s", elapsed.as_secs_f64()),
    )
}

/// Certified lower bound at q against the LP constant at p < q on a pair set
/// containing the q-witness.
fn ac4() -> Outcome {
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for i in 0..50u64 {
        let mut r = stream(4, i);
        let t = instance(&mut r);
        for (p, q) in [(1.0, 2.0), (2.0, 4.0)] {
            let budget = small_budget(i);
            let at_q = estimate_pi_lip_full(&t, q, &budget, None).unwrap();
            let at_p = estimate_pi_lip_full(&t, p, &budget, Some(&at_q.witness)).unwrap();
            let excess = at_q.report.certified_lower - at_p.certificate.constant;
            worst = worst.max(excess);
            if excess > 1e-7 {
                violations += 1;
            }
        }
    }
    outcome(violations == 0, format!("100 checks, {violations} violations, worst excess {worst:.2e}"))
}

/// Operator norm against the LP constant on a pair set holding the argmax pair.
fn ac5() -> Outcome {
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for i in 0..50u64 {
        let mut r = stream(5, i);
        let t = instance(&mut r);
        let p = [1.0, 2.0, 3.0][i as usize % 3];
        let op = operator_norm_with(&t, &NormOptions { seed: i, ..NormOptions::default() });
        let seed_pairs = PairConfiguration::new(vec![(op.argmax.clone(), SegrePoint::zeros(t.factor_dims()))]).unwrap();
        let est = estimate_pi_lip_full(&t, p, &small_budget(i), Some(&seed_pairs)).unwrap();
        let excess = op.report.certified_lower - est.certificate.constant;
        worst = worst.max(excess);
        if excess > 1e-6 {
            violations += 1;
        }
    }
    outcome(violations == 0, format!("50 instances, {violations} violations, worst excess {worst:.2e}"))
}

/// Fixing a slot to x⁰ scales the constant by at most ‖x⁰‖.
fn ac6() -> Outcome {
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for i in 0..30u64 {
        let mut r = stream(6, i);
        let dims: Vec<usize> = (0..3).map(|_| r.random_range(1..=2)).collect();
        let norms: Vec<Norm> = (0..3).map(|_| NORMS[r.random_range(0..3)]).collect();
        let m = r.random_range(1..=2);
        let t = random_operator(&mut r, &dims, m, norms.clone(), Norm::L2).unwrap();
        let k = r.random_range(0..3);
        let x0 = rng::unit_vec(&mut r, dims[k], norms[k]);
        let fixed = BTreeMap::from([(k, x0.clone())]);
        let restricted = restrict_operator(&t, &fixed).unwrap();
        let p = [1.0, 2.0][i as usize % 2];
        let budget = small_budget(i);
        let est_r = estimate_pi_lip_full(&restricted, p, &budget, None).unwrap();
        let lifted = lift_configuration(&est_r.witness, &fixed).unwrap();
        let parent = estimate_pi_lip_full(&t, p, &budget, Some(&lifted)).unwrap();
        let excess = est_r.report.certified_lower - vector_norm(&x0, norms[k]) * parent.certificate.constant;
        worst = worst.max(excess);
        if excess > 1e-6 {
            violations += 1;
        }
    }
    outcome(violations == 0, format!("30 trilinear instances, {violations} violations, worst excess {worst:.2e}"))
}

/// Δ_p of the mapped differences against C times the ε-norm of the differences.
fn ac7() -> Outcome {
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for i in 0..50u64 {
        let mut r = stream(7, i);
        let t = instance(&mut r);
        let k = r.random_range(1..=4);
        let cfg = random_configuration(&mut r, t.factor_dims(), k).unwrap();
        let c = check_difference_domination(&t, &cfg, 2.0, &small_budget(i)).unwrap();
        let excess = c.lhs - c.rhs;
        worst = worst.max(excess);
        if excess > 1e-7 {
            violations += 1;
        }
    }
    outcome(violations == 0, format!("50 triples, {violations} violations, worst excess {worst:.2e}"))
}

/// Weak duality on random mixed tensors; bracket width on elementary ones.
fn ac8() -> Outcome {
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for i in 0..50u64 {
        let mut r = stream(8, i);
        let n = r.random_range(1..=2);
        let dims: Vec<usize> = (0..n).map(|_| r.random_range(1..=3)).collect();
        let norms: Vec<Norm> = (0..n).map(|_| NORMS[r.random_range(0..3)]).collect();
        let m = r.random_range(1..=2);
        let cnorm = NORMS[r.random_range(0..3)];
        let z = random_mixed(&mut r, &dims, m, norms, cnorm).unwrap();
        let p = [1.5, 2.0, 3.0][i as usize % 3];
        let lower = dp_lower_dual(&z, p, &default_witnesses(&z, p, i).unwrap()).unwrap();
        let upper = dp_upper(&z, p, None, &DpBudget { seed: i, ..DpBudget::default() }).unwrap();
        let excess = lower.certified_lower - upper.report.certified_upper;
        worst = worst.max(excess);
        if excess > 1e-7 {
            violations += 1;
        }
    }
    let mut widest: f64 = 0.0;
    for i in 0..20u64 {
        let mut r = stream(80, i);
        let dims: Vec<usize> = (0..2).map(|_| r.random_range(1..=2)).collect();
        let x = random_point(&mut r, &dims);
        let my = r.random_range(1..=2);
        let y = rng::gaussian_vec(&mut r, my);
        let z = MixedTensor::elementary(&x, &y, vec![Norm::L2; 2], Norm::L2).unwrap();
        let lower = dp_lower_dual(&z, 2.0, &default_witnesses(&z, 2.0, i).unwrap()).unwrap().certified_lower;
        let upper = dp_upper(&z, 2.0, None, &DpBudget { seed: i, ..DpBudget::default() }).unwrap().report.certified_upper;
        widest = widest.max((upper - lower) / upper);
    }
    outcome(
        violations == 0 && widest <= 0.05,
        format!("50 tensors, {violations} violations, worst excess {worst:.2e}; elementary width {widest:.2e}"),
    )
}

/// Two `verify --seed 7` runs give byte-identical reports.
fn ac9() -> Outcome {
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_lipnorm"))
            .args(["verify", "--seed", "7"])
            .env("RUST_LOG", "error")
            .output()
            .expect("run lipnorm")
    };
    let (a, b) = (run(), run());
    let same = a.stdout == b.stdout && !a.stdout.is_empty();
    let green = a.status.code() == Some(0) && b.status.code() == Some(0);
    outcome(same && green, format!("{} bytes, identical: {same}, exit codes {:?} {:?}", a.stdout.len(), a.status.code(), b.status.code()))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("AC1 scalar product unit norm", ac1),
        ("AC2 scalar form exactness", ac2),
        ("AC3 Hilbert-Schmidt lower exactness", ac3),
        ("AC4 inclusion", ac4),
        ("AC5 norm domination", ac5),
        ("AC6 restriction bound", ac6),
        ("AC7 difference domination", ac7),
        ("AC8 weak duality", ac8),
        ("AC9 determinism", ac9),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let o = f();
        println!("{name}: {} ({})", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        if !o.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
