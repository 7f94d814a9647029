//! The energy functional, its exact directional derivatives, and a
//! finite-step derivative checker.
//!
//! For a fixed X the linear form is T(Y) = <X, Y> and the energy is
//! J(Y) = 1/2 <Y, Y> - T(Y). Both are polynomial in Y, so every finite
//! difference quotient has a closed form:
//!
//! * T:   (T(u+tv) - T(u)) / t                  = T(v)               for all t
//! * 1/2|.|^2: quotient                         = <u,v> + (t/2)|v|^2 for all t
//! * J:   quotient - J'_u(v)                    = (t/2)|v|^2         for all t
//! * J':  (J'_{u+tv}(w) - J'_u(w)) / t          = <v,w>              for all t
//!
//! The checker tests these identities at finite steps instead of
//! extrapolating t -> 0, so there is no step-size tuning and a failure is
//! unambiguous. Steps below ~1e-2 start trading the identity defect against
//! rounding amplified by 1/t; the defaults in [`DEFAULT_GATEAUX_STEPS`] are
//! dyadic and stay well inside the stated tolerances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::prob_space::{ProbabilitySpace, RandomVariable};
use crate::sigma_algebra::SigmaAlgebra;

/// Default step sizes for derivative checks: 2^-1 .. 2^-6.
pub const DEFAULT_GATEAUX_STEPS: [f64; 6] = [0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625];

/// Absolute tolerance on the linear-functional quotient defect.
pub const LINEAR_QUOTIENT_TOL: f64 = 1e-12;
/// Relative tolerance on the quadratic-expansion defect of J.
pub const EXPANSION_REL_TOL: f64 = 1e-10;
/// Relative tolerance on the second-derivative quotient defect.
pub const SECOND_QUOTIENT_REL_TOL: f64 = 1e-10;

/// The three concrete functionals the checker can differentiate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionalKind {
    /// J(Y) = 1/2 <Y,Y> - <X,Y>.
    EnergyJ,
    /// T(Y) = <X,Y>.
    LinearT,
    /// F(Y) = 1/2 <Y,Y>.
    HalfSquaredNorm,
}

/// A conditioning problem: the space, the given X, and the sigma-algebra
/// that carries the subspace J is minimized over.
#[derive(Debug, Clone)]
pub struct EnergyProblem {
    space: ProbabilitySpace,
    x: RandomVariable,
    sigma: SigmaAlgebra,
}

impl EnergyProblem {
    pub fn new(space: ProbabilitySpace, x: RandomVariable, sigma: SigmaAlgebra) -> Result<Self> {
        if x.len() != space.len() {
            return Err(Error::LengthMismatch {
                expected: space.len(),
                found: x.len(),
            });
        }
        if sigma.space_size() != space.len() {
            return Err(Error::SizeMismatch {
                left: space.len(),
                right: sigma.space_size(),
            });
        }
        Ok(Self { space, x, sigma })
    }

    pub fn space(&self) -> &ProbabilitySpace {
        &self.space
    }

    pub fn x(&self) -> &RandomVariable {
        &self.x
    }

    pub fn sigma(&self) -> &SigmaAlgebra {
        &self.sigma
    }

    /// T(Y) = <X, Y>. Linear and bounded by |X| |Y|.
    pub fn t_apply(&self, y: &RandomVariable) -> Result<f64> {
        self.space.inner_product(&self.x, y)
    }

    /// J(Y) = 1/2 <Y,Y> - T(Y).
    pub fn j_eval(&self, y: &RandomVariable) -> Result<f64> {
        Ok(0.5 * self.space.inner_product(y, y)? - self.t_apply(y)?)
    }

    /// First derivative of J at Z in direction Y: <Z, Y> - T(Y).
    pub fn j_gateaux(&self, z: &RandomVariable, y: &RandomVariable) -> Result<f64> {
        Ok(self.space.inner_product(z, y)? - self.t_apply(y)?)
    }

    /// Second derivative of J: <Y, W>, independent of the base point.
    pub fn j_second(&self, y: &RandomVariable, w: &RandomVariable) -> Result<f64> {
        self.space.inner_product(y, w)
    }

    fn eval(&self, kind: FunctionalKind, y: &RandomVariable) -> Result<f64> {
        match kind {
            FunctionalKind::EnergyJ => self.j_eval(y),
            FunctionalKind::LinearT => self.t_apply(y),
            FunctionalKind::HalfSquaredNorm => Ok(0.5 * self.space.inner_product(y, y)?),
        }
    }

    /// The difference quotient (F(u + t v) - F(u)) / t, exactly as defined.
    pub fn directional_quotient(
        &self,
        kind: FunctionalKind,
        u: &RandomVariable,
        v: &RandomVariable,
        t: f64,
    ) -> Result<f64> {
        if t == 0.0 || !t.is_finite() {
            return Err(Error::ZeroStep);
        }
        let shifted = u.add_scaled(t, v)?;
        Ok((self.eval(kind, &shifted)? - self.eval(kind, u)?) / t)
    }

    /// Runs the derivative checks on seeded random base points and
    /// directions. `steps` must be strictly decreasing and positive.
    pub fn check_derivatives(
        &self,
        directions: usize,
        steps: &[f64],
        seed: u64,
    ) -> Result<DerivativeCheckReport> {
        if directions == 0 {
            return Err(Error::InvalidSteps {
                reason: "need at least one direction".into(),
            });
        }
        validate_steps(steps)?;

        let n = self.space.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut per_step: Vec<StepDefects> = steps
            .iter()
            .map(|&step| StepDefects {
                step,
                linear: 0.0,
                expansion: 0.0,
                second: 0.0,
            })
            .collect();

        for _ in 0..directions {
            let u = random_vector(&mut rng, n);
            let v = random_vector(&mut rng, n);
            let w = random_vector(&mut rng, n);
            let t_of_v = self.t_apply(&v)?;
            let gateaux_uv = self.j_gateaux(&u, &v)?;
            let v_norm_sq = self.space.inner_product(&v, &v)?;
            let second_vw = self.j_second(&v, &w)?;
            let gateaux_uw = self.j_gateaux(&u, &w)?;

            for (slot, &t) in per_step.iter_mut().zip(steps) {
                let linear_q = self.directional_quotient(FunctionalKind::LinearT, &u, &v, t)?;
                slot.linear = slot.linear.max((linear_q - t_of_v).abs());

                let energy_q = self.directional_quotient(FunctionalKind::EnergyJ, &u, &v, t)?;
                let lhs = energy_q - gateaux_uv;
                let rhs = 0.5 * t * v_norm_sq;
                slot.expansion = slot
                    .expansion
                    .max((lhs - rhs).abs() / (1.0 + lhs.abs() + rhs.abs()));

                let shifted = u.add_scaled(t, &v)?;
                let second_q = (self.j_gateaux(&shifted, &w)? - gateaux_uw) / t;
                slot.second = slot
                    .second
                    .max((second_q - second_vw).abs() / (1.0 + second_vw.abs()));
            }
        }

        Ok(DerivativeCheckReport::new(directions, per_step))
    }

    /// J(Y) - J(xi) for two measurable candidates. When `xi` is the true
    /// conditional expectation this equals 1/2 |Y - xi|^2.
    pub fn minimum_gap(&self, xi: &RandomVariable, y: &RandomVariable) -> Result<f64> {
        if !self.sigma.is_measurable(&self.space, xi)? {
            return Err(Error::NotMeasurable {
                what: "claimed minimizer".into(),
            });
        }
        if !self.sigma.is_measurable(&self.space, y)? {
            return Err(Error::NotMeasurable {
                what: "comparison point".into(),
            });
        }
        Ok(self.j_eval(y)? - self.j_eval(xi)?)
    }
}

fn validate_steps(steps: &[f64]) -> Result<()> {
    if steps.is_empty() {
        return Err(Error::InvalidSteps {
            reason: "need at least one step".into(),
        });
    }
    for &t in steps {
        if !t.is_finite() || t <= 0.0 {
            return Err(Error::InvalidSteps {
                reason: format!("step {t} is not positive"),
            });
        }
    }
    for pair in steps.windows(2) {
        if pair[1] >= pair[0] {
            return Err(Error::InvalidSteps {
                reason: "steps must be strictly decreasing".into(),
            });
        }
    }
    Ok(())
}

pub(crate) fn random_vector(rng: &mut ChaCha8Rng, len: usize) -> RandomVariable {
    RandomVariable::new((0..len).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .expect("bounded values are finite")
}

/// Worst defects observed at one step size.
#[derive(Debug, Clone, Copy)]
pub struct StepDefects {
    pub step: f64,
    /// |quotient - T(v)| for the linear functional.
    pub linear: f64,
    /// Relative defect of quotient - J'_u(v) against (t/2)|v|^2.
    pub expansion: f64,
    /// Relative defect of the first-derivative quotient against <v,w>.
    pub second: f64,
}

/// One derivative formula with its aggregated defect.
#[derive(Debug, Clone)]
pub struct FormulaCheck {
    pub name: &'static str,
    pub max_defect: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Outcome of [`EnergyProblem::check_derivatives`].
#[derive(Debug, Clone)]
pub struct DerivativeCheckReport {
    direction_count: usize,
    per_step: Vec<StepDefects>,
    checks: Vec<FormulaCheck>,
}

impl DerivativeCheckReport {
    fn new(direction_count: usize, per_step: Vec<StepDefects>) -> Self {
        let fold = |f: fn(&StepDefects) -> f64| per_step.iter().map(f).fold(0.0f64, f64::max);
        let linear = fold(|s| s.linear);
        let expansion = fold(|s| s.expansion);
        let second = fold(|s| s.second);
        let checks = vec![
            FormulaCheck {
                name: "linear-quotient",
                max_defect: linear,
                tolerance: LINEAR_QUOTIENT_TOL,
                pass: linear <= LINEAR_QUOTIENT_TOL,
            },
            FormulaCheck {
                name: "quadratic-expansion",
                max_defect: expansion,
                tolerance: EXPANSION_REL_TOL,
                pass: expansion <= EXPANSION_REL_TOL,
            },
            FormulaCheck {
                name: "second-quotient",
                max_defect: second,
                tolerance: SECOND_QUOTIENT_REL_TOL,
                pass: second <= SECOND_QUOTIENT_REL_TOL,
            },
        ];
        Self {
            direction_count,
            per_step,
            checks,
        }
    }

    pub fn direction_count(&self) -> usize {
        self.direction_count
    }

    pub fn step_sizes(&self) -> Vec<f64> {
        self.per_step.iter().map(|s| s.step).collect()
    }

    pub fn per_step(&self) -> &[StepDefects] {
        &self.per_step
    }

    pub fn checks(&self) -> &[FormulaCheck] {
        &self.checks
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}
