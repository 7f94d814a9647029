//! Finite probability spaces and the random variables living on them.
//!
//! A space is a normalized weight vector over finitely many outcomes.
//! Expectations, inner products and norms are compensated finite sums, so
//! the concrete space doubles as an exact model of both the L2 and the L1
//! geometry used elsewhere in the crate.
//!
//! Two random variables are considered equal *almost surely* when they agree
//! on every outcome of positive weight; [`ALMOST_SURE_TOL`] is the per-value
//! tolerance adopted for that comparison (configurable through the
//! `*_within` variants).

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::sum::CompensatedSum;

/// Default per-value tolerance for "equal almost surely" comparisons.
pub const ALMOST_SURE_TOL: f64 = 1e-9;

/// Slack accepted before weights are rescaled on construction. Keeping
/// already-normalized weight vectors untouched makes normalization
/// idempotent, which file round-trips rely on.
const NORMALIZATION_TOL: f64 = 1e-12;

/// A finite probability space: nonnegative weights with total mass one.
///
/// Outcomes of weight exactly zero are permitted; they are exactly the
/// points that "almost surely" statements are allowed to ignore.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilitySpace {
    weights: Vec<f64>,
    labels: Option<Vec<String>>,
}

impl ProbabilitySpace {
    /// Builds a space from nonnegative weights, rescaling to total mass one.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        Self::with_labels(weights, None)
    }

    /// Like [`ProbabilitySpace::new`] with display labels for the outcomes.
    pub fn with_labels(weights: Vec<f64>, labels: Option<Vec<String>>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptyOutcomes);
        }
        for (index, &weight) in weights.iter().enumerate() {
            if !weight.is_finite() {
                return Err(Error::NonFiniteWeight { index, weight });
            }
            if weight < 0.0 {
                return Err(Error::NegativeWeight { index, weight });
            }
        }
        if let Some(l) = &labels {
            if l.len() != weights.len() {
                return Err(Error::LabelCountMismatch {
                    labels: l.len(),
                    outcomes: weights.len(),
                });
            }
        }
        let total = crate::sum::compensated_sum(weights.iter().copied());
        if total <= 0.0 {
            return Err(Error::ZeroTotalMass);
        }
        let weights = if (total - 1.0).abs() <= NORMALIZATION_TOL {
            weights
        } else {
            weights.iter().map(|w| w / total).collect()
        };
        Ok(Self { weights, labels })
    }

    /// Uniform space over `n` outcomes.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyOutcomes);
        }
        Self::new(vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        false // at least one outcome by construction
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, outcome: usize) -> f64 {
        self.weights[outcome]
    }

    /// Display label of an outcome; falls back to the index.
    pub fn label(&self, outcome: usize) -> String {
        match &self.labels {
            Some(l) => l[outcome].clone(),
            None => outcome.to_string(),
        }
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    fn check_len(&self, x: &RandomVariable) -> Result<()> {
        if x.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// E(X) = sum of p_i * x_i.
    pub fn expectation(&self, x: &RandomVariable) -> Result<f64> {
        self.check_len(x)?;
        let mut acc = CompensatedSum::new();
        for (p, v) in self.weights.iter().zip(x.values()) {
            acc.add(p * v);
        }
        Ok(acc.value())
    }

    /// The L2 inner product <X, Y> = E(X * Y).
    pub fn inner_product(&self, x: &RandomVariable, y: &RandomVariable) -> Result<f64> {
        self.check_len(x)?;
        self.check_len(y)?;
        let mut acc = CompensatedSum::new();
        for ((p, xv), yv) in self.weights.iter().zip(x.values()).zip(y.values()) {
            acc.add(p * xv * yv);
        }
        Ok(acc.value())
    }

    /// The L2 norm sqrt(E(X^2)).
    pub fn norm2(&self, x: &RandomVariable) -> Result<f64> {
        Ok(self.inner_product(x, x)?.max(0.0).sqrt())
    }

    /// The L1 norm E(|X|).
    pub fn norm1(&self, x: &RandomVariable) -> Result<f64> {
        self.check_len(x)?;
        let mut acc = CompensatedSum::new();
        for (p, v) in self.weights.iter().zip(x.values()) {
            acc.add(p * v.abs());
        }
        Ok(acc.value())
    }

    /// The integral of X over the event B.
    pub fn integrate_over(&self, x: &RandomVariable, event: &Event) -> Result<f64> {
        self.check_len(x)?;
        event.validate(self.len())?;
        let mut acc = CompensatedSum::new();
        for &i in event.members() {
            acc.add(self.weights[i] * x.values()[i]);
        }
        Ok(acc.value())
    }

    /// P(B), the probability of an event.
    pub fn event_probability(&self, event: &Event) -> Result<f64> {
        event.validate(self.len())?;
        let mut acc = CompensatedSum::new();
        for &i in event.members() {
            acc.add(self.weights[i]);
        }
        Ok(acc.value())
    }

    /// True when X and Y agree on every outcome of positive weight, each
    /// value within [`ALMOST_SURE_TOL`].
    pub fn almost_surely_equal(&self, x: &RandomVariable, y: &RandomVariable) -> Result<bool> {
        self.almost_surely_equal_within(x, y, ALMOST_SURE_TOL)
    }

    pub fn almost_surely_equal_within(
        &self,
        x: &RandomVariable,
        y: &RandomVariable,
        tol: f64,
    ) -> Result<bool> {
        self.check_len(x)?;
        self.check_len(y)?;
        Ok(self
            .weights
            .iter()
            .zip(x.values().iter().zip(y.values()))
            .all(|(&p, (&xv, &yv))| p == 0.0 || (xv - yv).abs() <= tol))
    }
}

/// A real value per outcome: an element of L2 of its space.
///
/// Values are validated to be finite; the tie to a particular space is a
/// length check performed by every operation that consumes the variable.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomVariable {
    values: Vec<f64>,
}

impl RandomVariable {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFiniteValue { index, value });
            }
        }
        Ok(Self { values })
    }

    pub fn constant(len: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; len])
    }

    pub fn zero(len: usize) -> Self {
        Self {
            values: vec![0.0; len],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// self + scale * other, validated to stay finite.
    pub fn add_scaled(&self, scale: f64, other: &RandomVariable) -> Result<RandomVariable> {
        if other.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        RandomVariable::new(
            self.values
                .iter()
                .zip(other.values())
                .map(|(a, b)| a + scale * b)
                .collect(),
        )
    }

    /// Pointwise difference self - other.
    pub fn sub(&self, other: &RandomVariable) -> Result<RandomVariable> {
        self.add_scaled(-1.0, other)
    }
}

/// An event: a set of outcome indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    members: BTreeSet<usize>,
}

impl Event {
    pub fn new<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        Self {
            members: indices.into_iter().collect(),
        }
    }

    pub fn empty() -> Self {
        Self {
            members: BTreeSet::new(),
        }
    }

    /// The full space {0, ..., n-1}.
    pub fn full(n: usize) -> Self {
        Self::new(0..n)
    }

    pub fn members(&self) -> impl Iterator<Item = &usize> + '_ {
        self.members.iter()
    }

    pub fn contains(&self, outcome: usize) -> bool {
        self.members.contains(&outcome)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Complement within a space of `n` outcomes.
    pub fn complement(&self, n: usize) -> Result<Event> {
        self.validate(n)?;
        Ok(Event::new((0..n).filter(|i| !self.members.contains(i))))
    }

    pub(crate) fn validate(&self, size: usize) -> Result<()> {
        if let Some(&max) = self.members.iter().next_back() {
            if max >= size {
                return Err(Error::IndexOutOfRange { index: max, size });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn uniform4() -> ProbabilitySpace {
        ProbabilitySpace::new(vec![0.25; 4]).unwrap()
    }

    fn rv(values: &[f64]) -> RandomVariable {
        RandomVariable::new(values.to_vec()).unwrap()
    }

    #[test]
    fn new_space_uniform() {
        let s = uniform4();
        assert_eq!(s.weights(), &[0.25, 0.25, 0.25, 0.25]);
    }

    #[test]
    fn new_space_single_outcome() {
        let s = ProbabilitySpace::new(vec![1.0]).unwrap();
        assert_eq!(s.weights(), &[1.0]);
    }

    #[test]
    fn new_space_normalizes_counts() {
        let s = ProbabilitySpace::new(vec![2.0, 2.0, 4.0]).unwrap();
        assert_eq!(s.weights(), &[0.25, 0.25, 0.5]);
    }

    #[test]
    fn new_space_rejects_bad_input() {
        assert!(matches!(
            ProbabilitySpace::new(vec![]),
            Err(Error::EmptyOutcomes)
        ));
        assert!(matches!(
            ProbabilitySpace::new(vec![0.5, -0.1]),
            Err(Error::NegativeWeight { index: 1, .. })
        ));
        assert!(matches!(
            ProbabilitySpace::new(vec![0.0, 0.0]),
            Err(Error::ZeroTotalMass)
        ));
        assert!(matches!(
            ProbabilitySpace::new(vec![f64::NAN]),
            Err(Error::NonFiniteWeight { .. })
        ));
    }

    #[test]
    fn label_count_must_match() {
        let err = ProbabilitySpace::with_labels(vec![0.5, 0.5], Some(vec!["a".into()]));
        assert!(matches!(err, Err(Error::LabelCountMismatch { .. })));
    }

    #[test]
    fn expectation_examples() {
        let s = uniform4();
        assert_eq!(s.expectation(&rv(&[1.0, 2.0, 3.0, 4.0])).unwrap(), 2.5);
        assert_eq!(s.expectation(&rv(&[7.0; 4])).unwrap(), 7.0);
        assert_eq!(s.expectation(&RandomVariable::zero(4)).unwrap(), 0.0);
    }

    #[test]
    fn expectation_rejects_length_mismatch() {
        let s = uniform4();
        assert!(matches!(
            s.expectation(&rv(&[1.0, 2.0])),
            Err(Error::LengthMismatch {
                expected: 4,
                found: 2
            })
        ));
    }

    #[test]
    fn inner_product_examples() {
        let s = uniform4();
        let x = rv(&[1.0, 2.0, 3.0, 4.0]);
        let y = rv(&[1.0, 1.0, 0.0, 0.0]);
        assert_eq!(s.inner_product(&x, &y).unwrap(), 0.75);
        assert_eq!(s.inner_product(&x, &RandomVariable::zero(4)).unwrap(), 0.0);
        assert_eq!(s.inner_product(&x, &x).unwrap(), 7.5);
    }

    #[test]
    fn norm2_examples() {
        let s = uniform4();
        assert_eq!(s.norm2(&RandomVariable::zero(4)).unwrap(), 0.0);
        assert_eq!(s.norm2(&rv(&[1.0; 4])).unwrap(), 1.0);
        assert_eq!(
            s.norm2(&rv(&[1.0, 2.0, 3.0, 4.0])).unwrap(),
            7.5_f64.sqrt()
        );
    }

    #[test]
    fn norm1_examples() {
        let s = uniform4();
        assert_eq!(s.norm1(&RandomVariable::zero(4)).unwrap(), 0.0);
        assert_eq!(s.norm1(&rv(&[1.0, 2.0, 3.0, 4.0])).unwrap(), 2.5);
        let half = ProbabilitySpace::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(half.norm1(&rv(&[-1.0, 1.0])).unwrap(), 1.0);
    }

    #[test]
    fn integrate_over_examples() {
        let s = uniform4();
        let x = rv(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.integrate_over(&x, &Event::empty()).unwrap(), 0.0);
        assert_eq!(
            s.integrate_over(&x, &Event::full(4)).unwrap(),
            s.expectation(&x).unwrap()
        );
        assert_eq!(s.integrate_over(&x, &Event::new([0, 1])).unwrap(), 0.75);
    }

    #[test]
    fn integrate_over_rejects_out_of_range() {
        let s = uniform4();
        let x = rv(&[1.0, 2.0, 3.0, 4.0]);
        assert!(matches!(
            s.integrate_over(&x, &Event::new([4])),
            Err(Error::IndexOutOfRange { index: 4, size: 4 })
        ));
    }

    #[test]
    fn random_variable_rejects_non_finite() {
        assert!(matches!(
            RandomVariable::new(vec![1.0, f64::INFINITY]),
            Err(Error::NonFiniteValue { index: 1, .. })
        ));
    }

    #[test]
    fn almost_sure_equality_ignores_null_outcomes() {
        let s = ProbabilitySpace::new(vec![0.5, 0.0, 0.5]).unwrap();
        let x = rv(&[1.0, 9.0, 2.0]);
        let y = rv(&[1.0, -3.0, 2.0]);
        assert!(s.almost_surely_equal(&x, &y).unwrap());
        let z = rv(&[1.0, 9.0, 2.1]);
        assert!(!s.almost_surely_equal(&x, &z).unwrap());
    }

    prop_compose! {
        fn arb_space_and_pair(max_n: usize)
            (n in 1..=max_n)
            (weights in prop::collection::vec(0.0..1.0f64, n),
             xs in prop::collection::vec(-10.0..10.0f64, n),
             ys in prop::collection::vec(-10.0..10.0f64, n))
            -> (ProbabilitySpace, RandomVariable, RandomVariable)
        {
            let mut weights = weights;
            if weights.iter().sum::<f64>() <= 0.0 {
                weights[0] = 1.0;
            }
            (
                ProbabilitySpace::new(weights).unwrap(),
                RandomVariable::new(xs).unwrap(),
                RandomVariable::new(ys).unwrap(),
            )
        }
    }

    proptest! {
        #[test]
        fn cauchy_schwarz((s, x, y) in arb_space_and_pair(32)) {
            let ip = s.inner_product(&x, &y).unwrap();
            let bound = s.norm2(&x).unwrap() * s.norm2(&y).unwrap();
            prop_assert!(ip.abs() <= bound * (1.0 + 1e-12) + 1e-12);
        }

        #[test]
        fn norm1_below_norm2((s, x, _y) in arb_space_and_pair(32)) {
            let n1 = s.norm1(&x).unwrap();
            let n2 = s.norm2(&x).unwrap();
            prop_assert!(n1 <= n2 * (1.0 + 1e-12) + 1e-12);
        }

        #[test]
        fn integral_splits_over_complement(
            (s, x, _y) in arb_space_and_pair(32),
            picks in prop::collection::vec(any::<bool>(), 32),
        ) {
            let event = Event::new(
                (0..s.len()).filter(|&i| *picks.get(i).unwrap_or(&false)),
            );
            let co = event.complement(s.len()).unwrap();
            let total = s.expectation(&x).unwrap();
            let split = s.integrate_over(&x, &event).unwrap()
                + s.integrate_over(&x, &co).unwrap();
            prop_assert!((split - total).abs() <= 1e-12 * (1.0 + total.abs()));
        }

        #[test]
        fn inner_product_is_bilinear(
            (s, x, y) in arb_space_and_pair(32),
            a in -4.0..4.0f64,
            b in -4.0..4.0f64,
        ) {
            let z = RandomVariable::new(
                x.values().iter().map(|v| v * 0.5 + 1.0).collect(),
            ).unwrap();
            let combo = RandomVariable::new(
                x.values()
                    .iter()
                    .zip(z.values())
                    .map(|(xv, zv)| a * xv + b * zv)
                    .collect(),
            ).unwrap();
            let lhs = s.inner_product(&combo, &y).unwrap();
            let rhs = a * s.inner_product(&x, &y).unwrap() + b * s.inner_product(&z, &y).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs() + rhs.abs()));
        }
    }
}
