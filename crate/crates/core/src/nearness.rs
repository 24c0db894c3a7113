//! Campanato-style nearness of operators as executable checks on sampled
//! pairs.
//!
//! Operator `A` is near `B` when there are constants `α > 0` and
//! `K ∈ (0, 1)` with `‖Bu − Bv − α(Au − Av)‖ ≤ K‖Bu − Bv‖` for all inputs;
//! nearness transfers bijectivity from `B` to `A`. Universal quantification
//! is not machine-checkable, so everything here operates on finite samples
//! of difference pairs `(Bu − Bv, Au − Av)` and reports worst-case ratios so
//! the margin is visible. The sample space is anything with a norm and a
//! scaled subtraction, which keeps the checks shared between grid fields and
//! finite-dimensional vectors.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::report::Json;

/// Minimal vector-space surface the checks need.
pub trait SampleSpace {
    fn norm(&self) -> f64;
    /// `self − alpha·other`.
    fn sub_scaled(&self, alpha: f64, other: &Self) -> Self;
}

impl SampleSpace for Vec<f64> {
    fn norm(&self) -> f64 {
        self.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn sub_scaled(&self, alpha: f64, other: &Self) -> Self {
        assert_eq!(self.len(), other.len(), "sample vectors of unequal length");
        self.iter()
            .zip(other.iter())
            .map(|(&a, &b)| a - alpha * b)
            .collect()
    }
}

impl SampleSpace for ScalarField {
    fn norm(&self) -> f64 {
        self.l2_norm()
    }

    fn sub_scaled(&self, alpha: f64, other: &Self) -> Self {
        self.sub(&other.scaled(alpha))
    }
}

/// Sampled difference images of an operator pair: element `i` holds
/// `(Bu_i − Bv_i, Au_i − Av_i)`.
pub struct OperatorPairSample<V: SampleSpace> {
    pairs: Vec<(V, V)>,
}

impl<V: SampleSpace> OperatorPairSample<V> {
    /// Pair up reference differences `Bu − Bv` with probe differences
    /// `Au − Av`.
    pub fn from_images(b_diffs: Vec<V>, a_diffs: Vec<V>) -> Result<OperatorPairSample<V>> {
        if b_diffs.len() != a_diffs.len() {
            return Err(Error::Config(format!(
                "{} reference differences but {} probe differences",
                b_diffs.len(),
                a_diffs.len()
            )));
        }
        Ok(OperatorPairSample {
            pairs: b_diffs.into_iter().zip(a_diffs).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(V, V)] {
        &self.pairs
    }
}

/// Outcome of a nearness check on one sample.
#[derive(Debug, Clone)]
pub struct NearnessReport {
    pub passed: bool,
    /// Largest `‖b − αa‖ / ‖b‖` seen; infinite when a pair with `‖b‖ = 0`
    /// has a nonzero combination.
    pub worst_ratio: f64,
    /// Index of the first pair attaining `worst_ratio`.
    pub worst_index: usize,
    pub pairs_checked: usize,
}

impl NearnessReport {
    pub fn to_json(&self) -> Json {
        let mut doc = Json::object();
        doc.push("passed", Json::Bool(self.passed));
        doc.push("worst_ratio", Json::Float(self.worst_ratio));
        doc.push("worst_index", Json::from(self.worst_index));
        doc.push("pairs_checked", Json::from(self.pairs_checked));
        doc
    }
}

/// Check the definition of nearness: `‖b − αa‖ ≤ K‖b‖` on every pair, with
/// `α > 0` and `K ∈ (0, 1)`.
pub fn check_near_definition<V: SampleSpace>(
    sample: &OperatorPairSample<V>,
    alpha: f64,
    k: f64,
) -> Result<NearnessReport> {
    if !(alpha > 0.0) {
        return Err(Error::Config(format!(
            "alpha must be positive, got {}",
            alpha
        )));
    }
    if !(k > 0.0 && k < 1.0) {
        return Err(Error::Config(format!("K must lie in (0, 1), got {}", k)));
    }
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut passed = true;
    let mut worst_ratio = f64::NEG_INFINITY;
    let mut worst_index = 0;
    for (idx, (b, a)) in sample.pairs.iter().enumerate() {
        let b_norm = b.norm();
        let combo = b.sub_scaled(alpha, a).norm();
        if combo > k * b_norm {
            passed = false;
        }
        let ratio = if b_norm > 0.0 {
            combo / b_norm
        } else if combo == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        if ratio > worst_ratio {
            worst_ratio = ratio;
            worst_index = idx;
        }
    }
    Ok(NearnessReport {
        passed,
        worst_ratio,
        worst_index,
        pairs_checked: sample.len(),
    })
}

/// Outcome of the two-sided sufficient criterion.
#[derive(Debug, Clone)]
pub struct SufficientReport {
    pub passed: bool,
    /// Smallest `‖a‖ / ‖b‖`; must stay `≥ M`.
    pub min_lower_ratio: f64,
    /// Largest `‖b − αa‖ / ‖b‖`; must stay `≤ μ`.
    pub max_combo_ratio: f64,
    pub pairs_checked: usize,
}

impl SufficientReport {
    pub fn to_json(&self) -> Json {
        let mut doc = Json::object();
        doc.push("passed", Json::Bool(self.passed));
        doc.push("min_lower_ratio", Json::Float(self.min_lower_ratio));
        doc.push("max_combo_ratio", Json::Float(self.max_combo_ratio));
        doc.push("pairs_checked", Json::from(self.pairs_checked));
        doc
    }
}

/// Check the sufficient pair of inequalities `‖a‖ ≥ M‖b‖` and
/// `‖b − αa‖ ≤ μ‖b‖` with the constraint `μ < 1 + αM`.
pub fn check_near_sufficient<V: SampleSpace>(
    sample: &OperatorPairSample<V>,
    alpha: f64,
    m: f64,
    mu: f64,
) -> Result<SufficientReport> {
    if !(alpha > 0.0) || !(m > 0.0) || mu < 0.0 {
        return Err(Error::Config(format!(
            "need alpha, M > 0 and mu >= 0; got alpha {}, M {}, mu {}",
            alpha, m, mu
        )));
    }
    if mu >= 1.0 + alpha * m {
        return Err(Error::Config(format!(
            "mu = {} violates mu < 1 + alpha*M = {}",
            mu,
            1.0 + alpha * m
        )));
    }
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut passed = true;
    let mut min_lower = f64::INFINITY;
    let mut max_combo = f64::NEG_INFINITY;
    for (b, a) in &sample.pairs {
        let b_norm = b.norm();
        let a_norm = a.norm();
        let combo = b.sub_scaled(alpha, a).norm();
        if a_norm < m * b_norm || combo > mu * b_norm {
            passed = false;
        }
        let lower = if b_norm > 0.0 {
            a_norm / b_norm
        } else {
            f64::INFINITY
        };
        let ratio = if b_norm > 0.0 {
            combo / b_norm
        } else if combo == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        if lower < min_lower {
            min_lower = lower;
        }
        if ratio > max_combo {
            max_combo = ratio;
        }
    }
    Ok(SufficientReport {
        passed,
        min_lower_ratio: min_lower,
        max_combo_ratio: max_combo,
        pairs_checked: sample.len(),
    })
}

/// Empirical constants over a sample: the largest `M` and, per `α`, the
/// smallest `μ` for which the sufficient criterion could hold.
#[derive(Debug, Clone)]
pub struct ConstantsEstimate {
    /// `min ‖a‖ / ‖b‖` over the sample.
    pub m_hat: f64,
    /// `(α, max ‖b − αa‖ / ‖b‖)` per requested α.
    pub mu_hat: Vec<(f64, f64)>,
}

impl ConstantsEstimate {
    pub fn to_json(&self) -> Json {
        let mut doc = Json::object();
        doc.push("m_hat", Json::Float(self.m_hat));
        let rows = self
            .mu_hat
            .iter()
            .map(|&(alpha, mu)| {
                let mut row = Json::object();
                row.push("alpha", Json::Float(alpha));
                row.push("mu_hat", Json::Float(mu));
                row
            })
            .collect();
        doc.push("mu_hat", Json::Array(rows));
        doc
    }
}

/// Estimate the nearness constants on a sample. Fails on pairs whose
/// reference difference vanishes, since every ratio divides by `‖b‖`.
pub fn estimate_constants<V: SampleSpace>(
    sample: &OperatorPairSample<V>,
    alphas: &[f64],
) -> Result<ConstantsEstimate> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    for (idx, (b, _)) in sample.pairs.iter().enumerate() {
        if b.norm() == 0.0 {
            return Err(Error::DegenerateSample(format!(
                "pair {} has a vanishing reference difference",
                idx
            )));
        }
    }
    let m_hat = sample
        .pairs
        .iter()
        .map(|(b, a)| a.norm() / b.norm())
        .fold(f64::INFINITY, f64::min);
    let mu_hat = alphas
        .iter()
        .map(|&alpha| {
            let worst = sample
                .pairs
                .iter()
                .map(|(b, a)| b.sub_scaled(alpha, a).norm() / b.norm())
                .fold(f64::NEG_INFINITY, f64::max);
            (alpha, worst)
        })
        .collect();
    Ok(ConstantsEstimate { m_hat, mu_hat })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_vectors(count: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect()
    }

    fn scaled_pairs(factor: f64, seed: u64) -> OperatorPairSample<Vec<f64>> {
        let b = random_vectors(12, 6, seed);
        let a = b.iter().map(|v| v.iter().map(|x| factor * x).collect()).collect();
        OperatorPairSample::from_images(b, a).unwrap()
    }

    #[test]
    fn definition_examples() {
        // A = B with alpha = 1: exact cancellation.
        let s = scaled_pairs(1.0, 1);
        let report = check_near_definition(&s, 1.0, 0.5).unwrap();
        assert!(report.passed);
        assert!(report.worst_ratio <= 1e-15);

        // A = 2B with alpha = 1/2: also exact.
        let s = scaled_pairs(2.0, 2);
        let report = check_near_definition(&s, 0.5, 0.1).unwrap();
        assert!(report.passed);
        assert!(report.worst_ratio <= 1e-15);

        // A = 2B with alpha = 1 gives ratio 1 > 0.5.
        let report = check_near_definition(&s, 1.0, 0.5).unwrap();
        assert!(!report.passed);
        assert!((report.worst_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn definition_rejects_bad_parameters() {
        let s = scaled_pairs(1.0, 3);
        assert!(matches!(
            check_near_definition(&s, 0.0, 0.5),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            check_near_definition(&s, 1.0, 1.0),
            Err(Error::Config(_))
        ));
        let empty = OperatorPairSample::<Vec<f64>>::from_images(vec![], vec![]).unwrap();
        assert!(matches!(
            check_near_definition(&empty, 1.0, 0.5),
            Err(Error::EmptySample)
        ));
    }

    #[test]
    fn sufficient_examples() {
        let s = scaled_pairs(1.0, 4);
        assert!(check_near_sufficient(&s, 1.0, 1.0, 0.0).unwrap().passed);

        let s = scaled_pairs(2.0, 5);
        assert!(check_near_sufficient(&s, 0.5, 2.0, 0.0).unwrap().passed);

        assert!(matches!(
            check_near_sufficient(&s, 1.0, 1.0, 2.5),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn estimate_examples() {
        let s = scaled_pairs(1.0, 6);
        let est = estimate_constants(&s, &[1.0]).unwrap();
        assert!((est.m_hat - 1.0).abs() < 1e-14);
        assert!(est.mu_hat[0].1 < 1e-14);

        let s = scaled_pairs(2.0, 7);
        let est = estimate_constants(&s, &[0.5]).unwrap();
        assert!((est.m_hat - 2.0).abs() < 1e-14);
        assert!(est.mu_hat[0].1 < 1e-14);
    }

    #[test]
    fn estimate_bounded_perturbation() {
        // A = B + 0.1·P with ‖P‖ = ‖B‖ per pair: mu_hat(1) <= 0.1, checked
        // against a brute-force maximum computed independently.
        let b = random_vectors(20, 8, 8);
        let p = random_vectors(20, 8, 9);
        let a: Vec<Vec<f64>> = b
            .iter()
            .zip(p.iter())
            .map(|(bv, pv)| {
                let scale = 0.1 * SampleSpace::norm(bv) / SampleSpace::norm(pv);
                bv.iter().zip(pv.iter()).map(|(&x, &y)| x + scale * y).collect()
            })
            .collect();
        let mut brute = f64::NEG_INFINITY;
        for (bv, av) in b.iter().zip(a.iter()) {
            let diff: Vec<f64> = bv.iter().zip(av.iter()).map(|(&x, &y)| x - y).collect();
            brute = brute.max(SampleSpace::norm(&diff) / SampleSpace::norm(bv));
        }
        let s = OperatorPairSample::from_images(b, a).unwrap();
        let est = estimate_constants(&s, &[1.0]).unwrap();
        assert!(est.mu_hat[0].1 <= 0.1 + 1e-12);
        assert!((est.mu_hat[0].1 - brute).abs() < 1e-14);
    }

    #[test]
    fn estimate_rejects_zero_reference() {
        let b = vec![vec![0.0, 0.0], vec![1.0, 0.0]];
        let a = vec![vec![1.0, 0.0], vec![1.0, 0.0]];
        let s = OperatorPairSample::from_images(b, a).unwrap();
        assert!(matches!(
            estimate_constants(&s, &[1.0]),
            Err(Error::DegenerateSample(_))
        ));
    }

    #[test]
    fn bijectivity_transfer_smoke_test() {
        // Finite-dimensional witness: B well-conditioned, A a small
        // perturbation. Nearness holds on a spanning sample with K < 1, and
        // the linear system Ax = b is indeed solvable.
        use nalgebra::{DMatrix, DVector};
        let n = 8;
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let b_mat = DMatrix::<f64>::identity(n, n)
            + DMatrix::from_fn(n, n, |_, _| 0.05 * rng.gen_range(-1.0..1.0f64));
        let a_mat = &b_mat + DMatrix::from_fn(n, n, |_, _| 0.02 * rng.gen_range(-1.0..1.0f64));

        // Spanning sample: differences along every basis direction.
        let mut b_diffs = Vec::new();
        let mut a_diffs = Vec::new();
        for j in 0..n {
            let mut e = DVector::<f64>::zeros(n);
            e[j] = 1.0;
            b_diffs.push((&b_mat * &e).iter().cloned().collect::<Vec<f64>>());
            a_diffs.push((&a_mat * &e).iter().cloned().collect::<Vec<f64>>());
        }
        let s = OperatorPairSample::from_images(b_diffs, a_diffs).unwrap();
        let report = check_near_definition(&s, 1.0, 0.9).unwrap();
        assert!(report.passed, "worst ratio {}", report.worst_ratio);

        let rhs = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0f64));
        let x = a_mat.clone().lu().solve(&rhs).expect("A is invertible");
        let residual = (&a_mat * &x - &rhs).norm();
        assert!(residual < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn outcomes_are_scale_invariant(seed in 0u64..1u64 << 48, s in 0.001f64..1000.0) {
            // Scaling every image by s > 0 scales both sides of every
            // inequality, so pass/fail flips never happen.
            let b = random_vectors(10, 5, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcdef);
            let a: Vec<Vec<f64>> = b
                .iter()
                .map(|v| v.iter().map(|x| 1.3 * x + 0.05 * rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let scale = |vs: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
                vs.iter().map(|v| v.iter().map(|x| s * x).collect()).collect()
            };
            let sample = OperatorPairSample::from_images(b.clone(), a.clone()).unwrap();
            let scaled = OperatorPairSample::from_images(scale(&b), scale(&a)).unwrap();
            let r1 = check_near_definition(&sample, 0.7, 0.6).unwrap();
            let r2 = check_near_definition(&scaled, 0.7, 0.6).unwrap();
            prop_assert_eq!(r1.passed, r2.passed);
            prop_assert!((r1.worst_ratio - r2.worst_ratio).abs() < 1e-9 * r1.worst_ratio.max(1.0));
        }

        #[test]
        fn sufficient_implies_definition(seed in 0u64..1u64 << 48) {
            // When the sufficient criterion holds with mu < 1, the
            // definition holds with K = mu on the same sample.
            let b = random_vectors(10, 5, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1234);
            let a: Vec<Vec<f64>> = b
                .iter()
                .map(|v| v.iter().map(|x| x + 0.1 * rng.gen_range(-1.0..1.0) * x).collect())
                .collect();
            let sample = OperatorPairSample::from_images(b, a).unwrap();
            let est = estimate_constants(&sample, &[1.0]).unwrap();
            let mu = est.mu_hat[0].1;
            prop_assume!(mu < 1.0 && mu > 0.0);
            // Estimated constants are extrema of rounded ratios; pad both by
            // a relative epsilon before feeding them back as thresholds.
            let m = (est.m_hat * (1.0 - 1e-9)).max(1e-6);
            let suff = check_near_sufficient(&sample, 1.0, m, mu * 1.000001).unwrap();
            prop_assert!(suff.passed);
            let def = check_near_definition(&sample, 1.0, (mu * 1.000001).min(0.999999)).unwrap();
            prop_assert!(def.passed);
        }
    }
}
