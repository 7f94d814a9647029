//! Error-compensated accumulation.
//!
//! Every integral in this crate is a finite sum. The Neumaier variant of
//! Kahan summation keeps the accumulated rounding error near one ulp of the
//! true result independent of the number of terms, which is what lets the
//! verification suites demand 1e-12-class tolerances on spaces with
//! thousands of outcomes.

/// Neumaier-compensated accumulator for `f64` sums.
///
/// Adding `0.0` leaves the accumulator state untouched, so sums over sparse
/// data are identical whether or not the zero terms are visited.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    /// Current value of the sum including the compensation term.
    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Compensated sum over an iterator of terms.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let mut acc = CompensatedSum::new();
    for term in terms {
        acc.add(term);
    }
    acc.value()
}
