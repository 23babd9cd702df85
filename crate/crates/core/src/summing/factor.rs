//! Explicit factorization `T = h_T ∘ j_p ∘ ⊗` from a certificate, and
//! restriction of an operator by fixing slots.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::inf_or_null;
use crate::summing::lp::{dominated_norm, PietschCertificate};
use nalgebra::DMatrix;

use crate::tensor::{dot, strides, vector_norm, DenseTensor, MultilinearOperator, PairConfiguration, SegrePoint};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactorizationBundle {
    pub certificate: PietschCertificate,
    pub samples: Vec<SegrePoint>,
    /// `j_p(x) = (w_j^{1/p} φ_j(x))_j` for each sample.
    pub embedded: Vec<Vec<f64>>,
    /// `h_T(j_p(x)) = T(x)` for each sample.
    pub values: Vec<Vec<f64>>,
    /// Lipschitz constant of `h_T` on the certified pair set (`≤ constant`).
    pub lipschitz_pairset: f64,
    /// Lipschitz constant of `h_T` over all sample pairs.
    #[serde(with = "inf_or_null")]
    pub lipschitz_samples: f64,
    /// Sample index pairs with equal embeddings but different values.
    pub quotient_violations: Vec<(usize, usize)>,
}

impl FactorizationBundle {
    /// Pair set extended by the quotient violations, for a re-solve.
    pub fn pairs_for_resolve(&self) -> Result<PairConfiguration> {
        let mut cfg = self.certificate.pairset.clone();
        for &(i, j) in &self.quotient_violations {
            cfg.push(self.samples[i].clone(), self.samples[j].clone(), 1.0)?;
        }
        Ok(cfg)
    }
}

const COLLAPSE_TOL: f64 = 1e-12;
const VALUE_TOL: f64 = 1e-9;

pub fn build_factorization(
    cert: &PietschCertificate,
    samples: &[SegrePoint],
    t: &MultilinearOperator,
) -> Result<FactorizationBundle> {
    if !cert.feasible || !cert.constant.is_finite() {
        return Err(Error::arg("certificate is infeasible"));
    }
    let p = cert.p;
    let forms: Vec<Vec<f64>> = cert.forms.iter().map(|f| f.kernel().data().to_vec()).collect();
    let scales: Vec<f64> = cert.weights.iter().map(|w| w.powf(1.0 / p)).collect();
    let cnorm = t.codomain_norm();
    let mut embedded = Vec::with_capacity(samples.len());
    let mut values = Vec::with_capacity(samples.len());
    for x in samples {
        let flat = x.outer_flat();
        embedded.push(forms.iter().zip(&scales).map(|(f, s)| s * dot(f, &flat)).collect::<Vec<f64>>());
        values.push(t.eval(x)?);
    }

    let mut lipschitz_pairset: f64 = 0.0;
    for i in 0..cert.pairset.len() {
        let delta = cert.pairset.difference(i);
        let num = vector_norm(&t.apply_linearized(&delta), cnorm);
        if num == 0.0 {
            continue;
        }
        let den = dominated_norm(&forms, &cert.weights, &delta, p);
        lipschitz_pairset = lipschitz_pairset.max(if den > 0.0 { num / den } else { f64::INFINITY });
    }

    let mut lipschitz_samples: f64 = 0.0;
    let mut quotient_violations = Vec::new();
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            let dv: Vec<f64> = values[i].iter().zip(&values[j]).map(|(a, b)| a - b).collect();
            let num = vector_norm(&dv, cnorm);
            let de: Vec<f64> = embedded[i].iter().zip(&embedded[j]).map(|(a, b)| a - b).collect();
            let den = crate::form_norm::lp_norm(&de, p);
            let scale = lp_norm_max(&embedded[i], &embedded[j], p).max(1.0);
            if den <= COLLAPSE_TOL * scale {
                if num > VALUE_TOL * vector_norm(&values[i], cnorm).max(1.0) {
                    quotient_violations.push((i, j));
                    lipschitz_samples = f64::INFINITY;
                }
                continue;
            }
            lipschitz_samples = lipschitz_samples.max(num / den);
        }
    }
    Ok(FactorizationBundle {
        certificate: cert.clone(),
        samples: samples.to_vec(),
        embedded,
        values,
        lipschitz_pairset,
        lipschitz_samples,
        quotient_violations,
    })
}

fn lp_norm_max(a: &[f64], b: &[f64], p: f64) -> f64 {
    crate::form_norm::lp_norm(a, p).max(crate::form_norm::lp_norm(b, p))
}

/// Contract the slots in `fixed` against the given vectors.
pub fn restrict_operator(t: &MultilinearOperator, fixed: &BTreeMap<usize, Vec<f64>>) -> Result<MultilinearOperator> {
    let n = t.arity();
    if fixed.is_empty() {
        return Err(Error::arg("no slot fixed"));
    }
    if fixed.len() >= n {
        return Err(Error::arg("fixing every slot leaves a constant, not an operator"));
    }
    let dims = t.factor_dims();
    for (&k, v) in fixed {
        if k >= n {
            return Err(Error::arg(format!("slot {k} out of range for arity {n}")));
        }
        if v.len() != dims[k] {
            return Err(Error::shape(format!("slot {k} expects dimension {}, got {}", dims[k], v.len())));
        }
    }
    let mut kernel: DenseTensor = t.kernel().clone();
    for (&k, v) in fixed.iter().rev() {
        kernel = kernel.contract_mode(k, v);
    }
    let norms = (0..n).filter(|k| !fixed.contains_key(k)).map(|k| t.factor_norms()[k]).collect();
    MultilinearOperator::new(kernel, norms, t.codomain_norm())
}

/// Insert the fixed vectors back into every pair of a configuration of the
/// restricted operator, giving a configuration of the parent.
pub fn lift_configuration(cfg: &PairConfiguration, fixed: &BTreeMap<usize, Vec<f64>>) -> Result<PairConfiguration> {
    let lift = |x: &SegrePoint| {
        let mut factors = x.factors.clone();
        for (&k, v) in fixed {
            if k > factors.len() {
                return Err(Error::arg(format!("slot {k} out of range when lifting")));
            }
            factors.insert(k, v.clone());
        }
        Ok(SegrePoint::new(factors))
    };
    let pairs = cfg.pairs().iter().map(|(u, v)| Ok((lift(u)?, lift(v)?))).collect::<Result<Vec<_>>>()?;
    PairConfiguration::weighted(pairs, cfg.weights().to_vec())
}

fn mode_product(shape: &[usize], data: &[f64], mode: usize, m: &DMatrix<f64>) -> (Vec<usize>, Vec<f64>) {
    let old = strides(shape);
    let mut new_shape = shape.to_vec();
    new_shape[mode] = m.ncols();
    let st = strides(&new_shape);
    let len: usize = new_shape.iter().product();
    let out = (0..len)
        .map(|off| {
            let j = (off / st[mode]) % new_shape[mode];
            let rest = off - j * st[mode];
            let base: usize = (0..shape.len())
                .filter(|&a| a != mode)
                .map(|a| (rest / st[a]) % new_shape[a] * old[a])
                .sum();
            (0..shape[mode]).map(|i| m[(i, j)] * data[base + i * old[mode]]).sum()
        })
        .collect();
    (new_shape, out)
}

/// `R ∘ T ∘ (S_1 × ... × S_n)` with `S_k: ℝ^{d'_k} → ℝ^{d_k}` and `R: ℝ^m → ℝ^{m'}`.
/// Factor and codomain norms are those of `T`.
pub fn compose_operator(t: &MultilinearOperator, r: &DMatrix<f64>, s: &[DMatrix<f64>]) -> Result<MultilinearOperator> {
    let dims = t.factor_dims();
    if s.len() != dims.len() || s.iter().zip(dims).any(|(m, &d)| m.nrows() != d) || r.ncols() != t.codomain_dim() {
        return Err(Error::shape("composition matrices do not match the operator"));
    }
    let mut shape = t.kernel().shape().to_vec();
    let mut data = t.kernel().data().to_vec();
    for (k, m) in s.iter().enumerate() {
        (shape, data) = mode_product(&shape, &data, k, m);
    }
    (shape, data) = mode_product(&shape, &data, dims.len(), &r.transpose());
    MultilinearOperator::new(DenseTensor::new(shape, data)?, t.factor_norms().to_vec(), t.codomain_norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::summing::lp::pietsch_upper_lp;
    use crate::tensor::Norm;
    use approx::assert_relative_eq;

    #[test]
    fn restrict_scalar_product() {
        let t = MultilinearOperator::scalar_product(2);
        let r = restrict_operator(&t, &BTreeMap::from([(1, vec![1.0])])).unwrap();
        assert_eq!(r.arity(), 1);
        assert_eq!(r.kernel().data(), &[1.0]);
    }

    #[test]
    fn restrict_hand_contraction() {
        // Kernel [[1,2],[3,4]], slot 0 fixed to e_1 → (1, 2).
        let k = DenseTensor::new(vec![2, 2, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let t = MultilinearOperator::euclidean(k).unwrap();
        let r = restrict_operator(&t, &BTreeMap::from([(0, vec![1.0, 0.0])])).unwrap();
        assert_eq!(r.kernel().shape(), &[2, 1]);
        assert_eq!(r.kernel().data(), &[1.0, 2.0]);
        let z = restrict_operator(&t, &BTreeMap::from([(1, vec![0.0, 0.0])])).unwrap();
        assert!(z.is_zero());
    }

    #[test]
    fn restrict_rejects_all_slots() {
        let t = MultilinearOperator::scalar_product(2);
        let all = BTreeMap::from([(0, vec![1.0]), (1, vec![1.0])]);
        assert!(matches!(restrict_operator(&t, &all), Err(Error::Argument(_))));
    }

    #[test]
    fn scalar_form_factorization() {
        // j_p is φ₀/‖φ₀‖ itself and h_T is multiplication by ‖φ₀‖.
        let phi = vec![3.0, 0.0, 0.0, 4.0];
        let t = MultilinearOperator::form(DenseTensor::new(vec![2, 2], phi.clone()).unwrap(), vec![Norm::L2; 2]).unwrap();
        let unit = MultilinearOperator::form(
            DenseTensor::new(vec![2, 2], phi.iter().map(|x| x / 4.0).collect()).unwrap(),
            vec![Norm::L2; 2],
        )
        .unwrap();
        let pts = vec![
            SegrePoint::new(vec![vec![1.0, 0.0], vec![1.0, 0.0]]),
            SegrePoint::new(vec![vec![0.0, 1.0], vec![0.6, 0.8]]),
            SegrePoint::new(vec![vec![0.3, -0.2], vec![0.5, 0.1]]),
        ];
        let pairs = PairConfiguration::new(vec![(pts[0].clone(), pts[1].clone()), (pts[2].clone(), SegrePoint::zeros(&[2, 2]))]).unwrap();
        let cert = pietsch_upper_lp(&t, &pairs, &[unit], 2.0).unwrap();
        assert_relative_eq!(cert.constant, 4.0, max_relative = 1e-9);
        let b = build_factorization(&cert, &pts, &t).unwrap();
        assert!(b.quotient_violations.is_empty());
        assert_relative_eq!(b.lipschitz_samples, 4.0, max_relative = 1e-9);
        assert!(b.lipschitz_pairset <= cert.constant * (1.0 + 1e-9));
    }

    #[test]
    fn zero_operator_factorization() {
        let t = MultilinearOperator::zero(&[1, 1], 1, vec![Norm::L2; 2], Norm::L2).unwrap();
        let dict = vec![MultilinearOperator::form(DenseTensor::new(vec![1, 1], vec![1.0]).unwrap(), vec![Norm::L2; 2]).unwrap()];
        let pts = vec![SegrePoint::new(vec![vec![1.0], vec![2.0]]), SegrePoint::zeros(&[1, 1])];
        let pairs = PairConfiguration::new(vec![(pts[0].clone(), pts[1].clone())]).unwrap();
        let cert = pietsch_upper_lp(&t, &pairs, &dict, 2.0).unwrap();
        let b = build_factorization(&cert, &pts, &t).unwrap();
        assert_eq!(b.lipschitz_samples, 0.0);
        assert!(b.values.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn collapsed_samples_are_quotient_violations() {
        let t = MultilinearOperator::euclidean(DenseTensor::new(vec![2, 1], vec![1.0, 1.0]).unwrap()).unwrap();
        let dict = vec![MultilinearOperator::form(DenseTensor::new(vec![2], vec![1.0, 0.0]).unwrap(), vec![Norm::L2]).unwrap()];
        let pts = vec![SegrePoint::new(vec![vec![1.0, 0.0]]), SegrePoint::new(vec![vec![0.0, 0.0]])];
        let pairs = PairConfiguration::new(vec![(pts[0].clone(), pts[1].clone())]).unwrap();
        let cert = pietsch_upper_lp(&t, &pairs, &dict, 2.0).unwrap();
        let extra = vec![SegrePoint::new(vec![vec![0.0, 1.0]]), SegrePoint::new(vec![vec![0.0, 0.0]])];
        let b = build_factorization(&cert, &extra, &t).unwrap();
        assert_eq!(b.quotient_violations, vec![(0, 1)]);
        assert_eq!(b.pairs_for_resolve().unwrap().len(), 2);
    }

    #[test]
    fn composition_matches_pointwise_definition() {
        let k = DenseTensor::new(vec![2, 3, 2], (0..12).map(|i| (i as f64 * 0.7).sin()).collect()).unwrap();
        let t = MultilinearOperator::euclidean(k).unwrap();
        let s0 = DMatrix::from_row_slice(2, 1, &[0.5, -1.0]);
        let s1 = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.2, 0.3, -0.4, 0.9]);
        let r = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.0, -1.0, 0.5, 0.5]);
        let c = compose_operator(&t, &r, &[s0.clone(), s1.clone()]).unwrap();
        assert_eq!(c.kernel().shape(), &[1, 2, 3]);
        let x = vec![vec![1.3], vec![0.4, -2.0]];
        let sx: Vec<Vec<f64>> = [&s0, &s1]
            .iter()
            .zip(&x)
            .map(|(m, v)| (*m * nalgebra::DVector::from_vec(v.clone())).as_slice().to_vec())
            .collect();
        let inner = nalgebra::DVector::from_vec(t.eval(&SegrePoint::new(sx)).unwrap());
        let want = r * inner;
        let got = c.eval(&SegrePoint::new(x)).unwrap();
        for (a, b) in got.iter().zip(want.iter()) {
            assert_relative_eq!(*a, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn lifting_inserts_fixed_slots() {
        let cfg = PairConfiguration::new(vec![(SegrePoint::new(vec![vec![1.0, 2.0]]), SegrePoint::new(vec![vec![0.0, 1.0]]))]).unwrap();
        let lifted = lift_configuration(&cfg, &BTreeMap::from([(0, vec![0.5])])).unwrap();
        assert_eq!(lifted.pairs()[0].0.factors, vec![vec![0.5], vec![1.0, 2.0]]);
        assert_eq!(lifted.pairs()[0].1.factors, vec![vec![0.5], vec![0.0, 1.0]]);
    }
}
