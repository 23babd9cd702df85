//! Homogeneous polynomials `P(x) = T(x, ..., x)` given by symmetric kernels.

use crate::error::{Error, Result};
use crate::report::BoundReport;
use crate::rng::{self, domain};
use crate::summing::estimate::{Budget, Engine, Estimate, Variant};
use crate::tensor::{contract_all_but, dual_maximizer, vector_norm, MultilinearOperator, Norm};

/// Bracket on the Lipschitz p-summing norm of the polynomial.
pub fn estimate_pi_lip_poly(t: &MultilinearOperator, p: f64, budget: &Budget) -> Result<BoundReport> {
    Ok(estimate_pi_lip_poly_full(t, p, budget)?.report)
}

pub fn estimate_pi_lip_poly_full(t: &MultilinearOperator, p: f64, budget: &Budget) -> Result<Estimate> {
    check_symmetric(t)?;
    Engine::new(t, p, budget, Variant::Polynomial)?.run(None)
}

fn check_symmetric(t: &MultilinearOperator) -> Result<()> {
    let dims = t.factor_dims();
    let norms = t.factor_norms();
    if dims.iter().any(|&d| d != dims[0]) || norms.iter().any(|&r| r != norms[0]) {
        return Err(Error::arg("polynomial needs equal factor spaces"));
    }
    let sym = t.kernel().symmetrize_leading(dims.len())?;
    let diff: Vec<f64> = sym.data().iter().zip(t.kernel().data()).map(|(a, b)| a - b).collect();
    let scale = t.kernel().data().iter().fold(1.0f64, |a, &b| a.max(b.abs()));
    if vector_norm(&diff, Norm::Inf) > 1e-12 * scale {
        return Err(Error::arg("polynomial kernel is not symmetric in its factor slots"));
    }
    Ok(())
}

/// `‖P(x)‖` for `x` repeated in every slot.
fn poly_value(t: &MultilinearOperator, x: &[f64]) -> f64 {
    let z = t.apply_linearized(&crate::tensor::outer(&vec![x.to_vec(); t.arity()]));
    vector_norm(&z, t.codomain_norm())
}

/// Approximate maximizer of `‖P(x)‖` on the unit sphere of the factor norm.
pub fn polynomial_argmax(t: &MultilinearOperator, restarts: usize, seed: u64) -> Vec<f64> {
    let n = t.arity();
    let d = t.factor_dims()[0];
    let r = t.factor_norms()[0];
    let dims = t.factor_dims().to_vec();
    let mut best = (f64::NEG_INFINITY, vec![0.0; d]);
    let mut starts: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            e
        })
        .collect();
    let mut rng = rng::stream(seed, domain::POLY, 0);
    starts.extend((0..restarts.max(1)).map(|_| rng::unit_vec(&mut rng, d, r)));
    for mut x in starts {
        let mut v = poly_value(t, &x);
        for _ in 0..200 {
            let z = t.apply_linearized(&crate::tensor::outer(&vec![x.clone(); n]));
            let Some(y) = dual_maximizer(&z, t.codomain_norm().dual()) else { break };
            let form = t.compose_functional(&y);
            let refs: Vec<&[f64]> = vec![x.as_slice(); n];
            let mut g = vec![0.0; d];
            for k in 0..n {
                for (a, b) in g.iter_mut().zip(contract_all_but(&dims, &form, &refs, k)) {
                    *a += b;
                }
            }
            let Some(next) = dual_maximizer(&g, r.dual()) else { break };
            let nv = poly_value(t, &next);
            if nv <= v * (1.0 + 1e-12) {
                break;
            }
            x = next;
            v = nv;
        }
        if v > best.0 {
            best = (v, x);
        }
    }
    best.1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::DenseTensor;

    fn grid_max(f: impl Fn(f64) -> f64) -> f64 {
        (0..=20000).map(|i| f(-1.0 + 2.0 * i as f64 / 20000.0)).fold(0.0, f64::max)
    }

    #[test]
    fn monomial_bracket_contains_one() {
        for n in [2, 3] {
            let t = MultilinearOperator::scalar_product(n);
            let sup = grid_max(|z| z.powi(n as i32).abs());
            let r = estimate_pi_lip_poly(&t, 2.0, &Budget::default()).unwrap();
            assert!(r.certified_lower <= sup + 1e-9 && r.heuristic_upper >= sup - 1e-9, "{r:?}");
            assert!((r.certified_lower - 1.0).abs() < 1e-9, "{r:?}");
        }
    }

    #[test]
    fn zero_polynomial() {
        let t = MultilinearOperator::zero(&[2, 2], 1, vec![Norm::L2; 2], Norm::L2).unwrap();
        let r = estimate_pi_lip_poly(&t, 2.0, &Budget::default()).unwrap();
        assert_eq!((r.certified_lower, r.heuristic_upper), (0.0, 0.0));
    }

    #[test]
    fn single_coordinate_diagonal_polynomial() {
        // P(a) = (a_1^2, 0) on ℓ_∞^2 → ℓ_2^2 reduces to z ↦ z^2 on ℝ.
        let mut data = vec![0.0; 8];
        data[0] = 1.0;
        let k = DenseTensor::new(vec![2, 2, 2], data).unwrap();
        let t = MultilinearOperator::new(k, vec![Norm::Inf; 2], Norm::L2).unwrap();
        let r = estimate_pi_lip_poly(&t, 2.0, &Budget::default()).unwrap();
        assert!(r.certified_lower <= 1.0 + 1e-9 && r.heuristic_upper >= 1.0 - 1e-9, "{r:?}");
    }

    #[test]
    fn rejects_non_symmetric_kernel() {
        let k = DenseTensor::new(vec![2, 2, 1], vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        let t = MultilinearOperator::euclidean(k).unwrap();
        assert!(matches!(estimate_pi_lip_poly(&t, 2.0, &Budget::default()), Err(Error::Argument(_))));
    }
}
