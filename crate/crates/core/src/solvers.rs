//! Three independent routes to the conditional expectation, plus the
//! verification suites that tie them together.
//!
//! * `solve_oracle` averages X over each atom; on a finite space this is
//!   the density of the measure B -> E(X 1_B) with respect to P on the
//!   sub-sigma-algebra, so it serves as the ground truth.
//! * `solve_projection` solves the Gram system of a measurable basis, i.e.
//!   computes the orthogonal projection of X onto the measurable subspace.
//! * `solve_gradient` descends the energy J(Y) = 1/2 <Y,Y> - <X,Y> in atom
//!   coordinates; the Hessian is diag(P(atom)), so the Jacobi-preconditioned
//!   step lands on the minimizer exactly and the fixed-step trace makes the
//!   descent observable.
//!
//! Solutions are fixed to 0 on atoms of probability zero. The defining
//! identity only determines them almost surely; a fixed convention keeps
//! outputs deterministic, and the affected atoms are listed on the result.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gram::{min_norm_spd_solve, RANK_TOL};
use crate::prob_space::{ProbabilitySpace, RandomVariable};
use crate::sigma_algebra::SigmaAlgebra;
use crate::sum::CompensatedSum;

/// Defining-property tolerance, scaled by (1 + |X|_2).
pub const DEFINING_PROPERTY_TOL: f64 = 1e-12;
/// Product-identity tolerance on defects normalized by (1 + |X|_2 |Y|_2).
pub const PRODUCT_IDENTITY_TOL: f64 = 1e-10;
/// Per-outcome tolerance for the tower property.
pub const TOWER_TOL: f64 = 1e-11;
/// Relative tolerance for the minimum-gap identity.
pub const DIRICHLET_REL_TOL: f64 = 1e-10;

/// Seed and sample count used by [`verify_defining_property`] for its
/// random unions of atoms; [`verify_defining_property_with`] overrides them.
pub const DEFAULT_UNION_SEED: u64 = 0x5eed_0a70;
pub const DEFAULT_UNION_SAMPLES: usize = 32;

/// Which route produced a [`CondExpResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Oracle,
    Projection,
    Gradient,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Oracle => "oracle",
            Method::Projection => "projection",
            Method::Gradient => "gradient",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Step-size policy for the gradient solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepPolicy {
    /// Constant step; contraction needs eta * max P(atom) < 2.
    Fixed(f64),
    /// Per-atom step 1 / P(atom): exact for the diagonal Hessian.
    JacobiPreconditioned,
}

/// Starting point of the descent, in atom coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialPoint {
    Zero,
    UnconditionalMean,
}

#[derive(Debug, Clone)]
pub struct GradientConfig {
    pub step_policy: StepPolicy,
    /// Stop when the Euclidean norm of the gradient over non-null atoms
    /// drops to this value.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub initial_point: InitialPoint,
}

impl Default for GradientConfig {
    fn default() -> Self {
        Self {
            step_policy: StepPolicy::JacobiPreconditioned,
            tolerance: 1e-10,
            max_iterations: 2000,
            initial_point: InitialPoint::Zero,
        }
    }
}

/// The default fixed step 1 / max P(atom), which contracts every coordinate.
pub fn default_fixed_step(space: &ProbabilitySpace, sigma: &SigmaAlgebra) -> Result<f64> {
    let (masses, _) = atom_stats(space, sigma, &RandomVariable::zero(space.len()))?;
    let max = masses.iter().copied().fold(0.0f64, f64::max);
    Ok(1.0 / max)
}

/// The solution of a conditioning problem: a measurable variable, its value
/// per atom, and diagnostics of the route that produced it.
#[derive(Debug, Clone)]
pub struct CondExpResult {
    xi: RandomVariable,
    atom_values: Vec<f64>,
    method: Method,
    iterations: usize,
    final_gradient_norm: Option<f64>,
    null_atom_indices: Vec<usize>,
    j_trace: Vec<f64>,
}

impl CondExpResult {
    fn from_atom_values(
        sigma: &SigmaAlgebra,
        masses: &[f64],
        mut atom_values: Vec<f64>,
        method: Method,
        iterations: usize,
        final_gradient_norm: Option<f64>,
        j_trace: Vec<f64>,
    ) -> Self {
        let mut null_atom_indices = Vec::new();
        for (i, &m) in masses.iter().enumerate() {
            if m == 0.0 {
                atom_values[i] = 0.0;
                null_atom_indices.push(i);
            }
        }
        let mut values = vec![0.0; sigma.space_size()];
        for (outcome, v) in values.iter_mut().enumerate() {
            *v = atom_values[sigma.atom_index_of(outcome)];
        }
        Self {
            xi: RandomVariable::new(values).expect("atom values are finite"),
            atom_values,
            method,
            iterations,
            final_gradient_norm,
            null_atom_indices,
            j_trace,
        }
    }

    /// The solution, constant on every atom.
    pub fn xi(&self) -> &RandomVariable {
        &self.xi
    }

    /// Value per atom, in canonical atom order; 0 on null atoms.
    pub fn atom_values(&self) -> &[f64] {
        &self.atom_values
    }

    pub fn method(&self) -> Method {
        self.method
    }

    /// Iteration count; 0 for the direct methods.
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn final_gradient_norm(&self) -> Option<f64> {
        self.final_gradient_norm
    }

    /// Atoms of probability zero, where the value is fixed to 0 by convention.
    pub fn null_atom_indices(&self) -> &[usize] {
        &self.null_atom_indices
    }

    /// Energy value at every visited iterate (gradient method only).
    pub fn j_trace(&self) -> &[f64] {
        &self.j_trace
    }
}

/// One named defect measurement.
#[derive(Debug, Clone)]
pub struct VerificationCheck {
    pub name: String,
    pub max_defect: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl VerificationCheck {
    fn new(name: impl Into<String>, max_defect: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            max_defect,
            tolerance,
            pass: max_defect <= tolerance,
        }
    }
}

/// A bundle of checks; passes only if every check does.
#[derive(Debug, Clone)]
pub struct VerificationReport {
    checks: Vec<VerificationCheck>,
    overall_pass: bool,
}

impl VerificationReport {
    pub fn new(checks: Vec<VerificationCheck>) -> Self {
        let overall_pass = checks.iter().all(|c| c.pass);
        Self {
            checks,
            overall_pass,
        }
    }

    pub fn checks(&self) -> &[VerificationCheck] {
        &self.checks
    }

    pub fn overall_pass(&self) -> bool {
        self.overall_pass
    }

    /// The failing checks, if any.
    pub fn failures(&self) -> impl Iterator<Item = &VerificationCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

/// Mass and integral of X per atom, in canonical atom order.
fn atom_stats(
    space: &ProbabilitySpace,
    sigma: &SigmaAlgebra,
    x: &RandomVariable,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if sigma.space_size() != space.len() {
        return Err(Error::SizeMismatch {
            left: space.len(),
            right: sigma.space_size(),
        });
    }
    if x.len() != space.len() {
        return Err(Error::LengthMismatch {
            expected: space.len(),
            found: x.len(),
        });
    }
    let mut masses = Vec::with_capacity(sigma.atom_count());
    let mut integrals = Vec::with_capacity(sigma.atom_count());
    for atom in sigma.atoms() {
        let mut mass = CompensatedSum::new();
        let mut integral = CompensatedSum::new();
        for &i in atom {
            mass.add(space.weight(i));
            integral.add(space.weight(i) * x.values()[i]);
        }
        masses.push(mass.value());
        integrals.push(integral.value());
    }
    Ok((masses, integrals))
}

/// Atom-averaging route: value = integral of X over the atom / P(atom).
pub fn solve_oracle(
    space: &ProbabilitySpace,
    sigma: &SigmaAlgebra,
    x: &RandomVariable,
) -> Result<CondExpResult> {
    let (masses, integrals) = atom_stats(space, sigma, x)?;
    let atom_values = masses
        .iter()
        .zip(&integrals)
        .map(|(&m, &q)| if m > 0.0 { q / m } else { 0.0 })
        .collect();
    Ok(CondExpResult::from_atom_values(
        sigma,
        &masses,
        atom_values,
        Method::Oracle,
        0,
        None,
        Vec::new(),
    ))
}

/// Orthogonal-projection route.
///
/// With no basis the atom indicators are used; they are orthogonal, the
/// Gram system is diagonal, and the result reproduces `solve_oracle`. A
/// user basis must be measurable and span the non-null atom directions;
/// redundant bases are fine, the coefficients are the minimum-norm solution
/// of the rank-deficient Gram system and the projection itself is unchanged.
pub fn solve_projection(
    space: &ProbabilitySpace,
    sigma: &SigmaAlgebra,
    x: &RandomVariable,
    basis: Option<&[RandomVariable]>,
) -> Result<CondExpResult> {
    let (masses, integrals) = atom_stats(space, sigma, x)?;
    let Some(basis) = basis else {
        let atom_values = masses
            .iter()
            .zip(&integrals)
            .map(|(&m, &q)| if m > 0.0 { q / m } else { 0.0 })
            .collect();
        return Ok(CondExpResult::from_atom_values(
            sigma,
            &masses,
            atom_values,
            Method::Projection,
            0,
            None,
            Vec::new(),
        ));
    };

    let atom_count = sigma.atom_count();
    let needed = masses.iter().filter(|&&m| m > 0.0).count();
    let mut coords: Vec<Vec<f64>> = Vec::with_capacity(basis.len());
    for (index, element) in basis.iter().enumerate() {
        if !sigma.is_measurable(space, element)? {
            return Err(Error::BasisNotMeasurable { index });
        }
        // Atom coordinate: the weighted average over the atom (equal to the
        // constant value for an exactly measurable element).
        let (_, element_integrals) = atom_stats(space, sigma, element)?;
        let coord: Vec<f64> = masses
            .iter()
            .zip(&element_integrals)
            .map(|(&m, &q)| if m > 0.0 { q / m } else { 0.0 })
            .collect();
        coords.push(coord);
    }

    let b = basis.len();
    let mut gram = vec![0.0; b * b];
    let mut rhs = vec![0.0; b];
    for s in 0..b {
        for t in s..b {
            let mut acc = CompensatedSum::new();
            for a in 0..atom_count {
                acc.add(masses[a] * coords[s][a] * coords[t][a]);
            }
            gram[s * b + t] = acc.value();
            gram[t * b + s] = gram[s * b + t];
        }
        let mut acc = CompensatedSum::new();
        for a in 0..atom_count {
            acc.add(coords[s][a] * integrals[a]);
        }
        rhs[s] = acc.value();
    }

    let solution = min_norm_spd_solve(&gram, b, &rhs, RANK_TOL)?;
    if solution.rank < needed {
        return Err(Error::BasisDoesNotSpan {
            rank: solution.rank,
            needed,
        });
    }
    let mut atom_values = vec![0.0; atom_count];
    for (a, value) in atom_values.iter_mut().enumerate() {
        let mut acc = CompensatedSum::new();
        for (coefficient, coord) in solution.coefficients.iter().zip(&coords) {
            acc.add(coefficient * coord[a]);
        }
        *value = acc.value();
    }
    Ok(CondExpResult::from_atom_values(
        sigma,
        &masses,
        atom_values,
        Method::Projection,
        0,
        None,
        Vec::new(),
    ))
}

/// Gradient-descent route on J in atom coordinates.
///
/// Stops when the Euclidean norm of the gradient over non-null atoms
/// reaches `config.tolerance`; exceeding `config.max_iterations` is an
/// explicit [`Error::NonConvergence`] carrying the last iterate.
pub fn solve_gradient(
    space: &ProbabilitySpace,
    sigma: &SigmaAlgebra,
    x: &RandomVariable,
    config: &GradientConfig,
) -> Result<CondExpResult> {
    if !config.tolerance.is_finite() || config.tolerance <= 0.0 {
        return Err(Error::InvalidConfig {
            reason: format!("tolerance {} must be positive", config.tolerance),
        });
    }
    if config.max_iterations == 0 {
        return Err(Error::InvalidConfig {
            reason: "max_iterations must be at least 1".into(),
        });
    }
    if let StepPolicy::Fixed(eta) = config.step_policy {
        if !eta.is_finite() || eta <= 0.0 {
            return Err(Error::InvalidConfig {
                reason: format!("fixed step {eta} must be positive"),
            });
        }
    }

    let (masses, integrals) = atom_stats(space, sigma, x)?;
    let atom_count = sigma.atom_count();
    let active: Vec<usize> = (0..atom_count).filter(|&a| masses[a] > 0.0).collect();

    let mut c = vec![0.0; atom_count];
    if config.initial_point == InitialPoint::UnconditionalMean {
        let mean = space.expectation(x)?;
        for &a in &active {
            c[a] = mean;
        }
    }

    // J in atom coordinates: sum over atoms of (c^2/2) P(atom) - c * integral.
    let energy = |c: &[f64]| {
        let mut acc = CompensatedSum::new();
        for &a in &active {
            acc.add(0.5 * c[a] * c[a] * masses[a]);
            acc.add(-(c[a] * integrals[a]));
        }
        acc.value()
    };

    let mut j_trace = Vec::new();
    let mut gradient = vec![0.0; atom_count];
    let mut iterations = 0;
    loop {
        let mut norm_sq = CompensatedSum::new();
        for &a in &active {
            gradient[a] = c[a] * masses[a] - integrals[a];
            norm_sq.add(gradient[a] * gradient[a]);
        }
        let gradient_norm = norm_sq.value().max(0.0).sqrt();
        j_trace.push(energy(&c));

        if gradient_norm <= config.tolerance {
            return Ok(CondExpResult::from_atom_values(
                sigma,
                &masses,
                c,
                Method::Gradient,
                iterations,
                Some(gradient_norm),
                j_trace,
            ));
        }
        if iterations == config.max_iterations {
            let last = CondExpResult::from_atom_values(
                sigma,
                &masses,
                c,
                Method::Gradient,
                iterations,
                Some(gradient_norm),
                j_trace,
            );
            return Err(Error::NonConvergence {
                iterations,
                gradient_norm,
                last: Box::new(last),
            });
        }

        for &a in &active {
            let step = match config.step_policy {
                StepPolicy::Fixed(eta) => eta,
                StepPolicy::JacobiPreconditioned => 1.0 / masses[a],
            };
            c[a] -= step * gradient[a];
        }
        iterations += 1;
    }
}

/// Checks the defining identity: the integrals of X and of the claimed
/// solution agree on every atom and on a seeded sample of atom unions.
/// Passing on the atoms alone is already conclusive, since every event of
/// the sigma-algebra is a disjoint union of atoms.
pub fn verify_defining_property(
    space: &ProbabilitySpace,
    sigma: &SigmaAlgebra,
    x: &RandomVariable,
    xi: &RandomVariable,
) -> Result<VerificationReport> {
    verify_defining_property_with(space, sigma, x, xi, DEFAULT_UNION_SEED, DEFAULT_UNION_SAMPLES)
}

pub fn verify_defining_property_with(
    space: &ProbabilitySpace,
    sigma: &SigmaAlgebra,
    x: &RandomVariable,
    xi: &RandomVariable,
    seed: u64,
    union_samples: usize,
) -> Result<VerificationReport> {
    if !sigma.is_measurable(space, xi)? {
        return Err(Error::NotMeasurable {
            what: "claimed solution".into(),
        });
    }
    let tolerance = DEFINING_PROPERTY_TOL * (1.0 + space.norm2(x)?);
    let (_, x_integrals) = atom_stats(space, sigma, x)?;
    let (_, xi_integrals) = atom_stats(space, sigma, xi)?;

    let mut checks = Vec::with_capacity(sigma.atom_count() + 1);
    for (a, (qx, qxi)) in x_integrals.iter().zip(&xi_integrals).enumerate() {
        checks.push(VerificationCheck::new(
            format!("atom {a}"),
            (qx - qxi).abs(),
            tolerance,
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..union_samples {
        let mut x_total = CompensatedSum::new();
        let mut xi_total = CompensatedSum::new();
        for a in 0..sigma.atom_count() {
            if rng.gen_bool(0.5) {
                x_total.add(x_integrals[a]);
                xi_total.add(xi_integrals[a]);
            }
        }
        worst = worst.max((x_total.value() - xi_total.value()).abs());
    }
    checks.push(VerificationCheck::new(
        format!("atom-unions ({union_samples} samples)"),
        worst,
        tolerance,
    ));
    Ok(VerificationReport::new(checks))
}

/// A seeded random measurable variable: atom values uniform in [-1, 1].
fn random_measurable(sigma: &SigmaAlgebra, rng: &mut ChaCha8Rng) -> RandomVariable {
    let atom_values: Vec<f64> = (0..sigma.atom_count())
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    let mut values = vec![0.0; sigma.space_size()];
    for (outcome, v) in values.iter_mut().enumerate() {
        *v = atom_values[sigma.atom_index_of(outcome)];
    }
    RandomVariable::new(values).expect("bounded values are finite")
}

/// Checks <X, Y> = <xi, Y> on all atom indicators and on seeded random
/// measurable directions; defects are normalized by (1 + |X|_2 |Y|_2).
pub fn verify_product_identity(
    space: &ProbabilitySpace,
    sigma: &SigmaAlgebra,
    x: &RandomVariable,
    xi: &RandomVariable,
    sample_count: usize,
    seed: u64,
) -> Result<VerificationReport> {
    if !sigma.is_measurable(space, xi)? {
        return Err(Error::NotMeasurable {
            what: "claimed solution".into(),
        });
    }
    let x_norm = space.norm2(x)?;
    let normalized = |space: &ProbabilitySpace, y: &RandomVariable| -> Result<f64> {
        let defect = (space.inner_product(x, y)? - space.inner_product(xi, y)?).abs();
        Ok(defect / (1.0 + x_norm * space.norm2(y)?))
    };

    let mut worst_atoms = 0.0f64;
    for a in 0..sigma.atom_count() {
        let ind = crate::sigma_algebra::indicator(sigma.space_size(), &sigma.atom_event(a))?;
        worst_atoms = worst_atoms.max(normalized(space, &ind)?);
    }
    let mut checks = vec![VerificationCheck::new(
        "atom-indicators",
        worst_atoms,
        PRODUCT_IDENTITY_TOL,
    )];

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_random = 0.0f64;
    for _ in 0..sample_count {
        let y = random_measurable(sigma, &mut rng);
        worst_random = worst_random.max(normalized(space, &y)?);
    }
    checks.push(VerificationCheck::new(
        format!("random-directions ({sample_count} samples)"),
        worst_random,
        PRODUCT_IDENTITY_TOL,
    ));
    Ok(VerificationReport::new(checks))
}

/// Samples measurable competitors Y and checks the minimum principle:
/// J(Y) - J(xi) is nonnegative and equals 1/2 |Y - xi|^2.
pub fn verify_dirichlet_gap(
    space: &ProbabilitySpace,
    sigma: &SigmaAlgebra,
    x: &RandomVariable,
    xi: &RandomVariable,
    sample_count: usize,
    seed: u64,
) -> Result<VerificationReport> {
    let problem =
        crate::functional::EnergyProblem::new(space.clone(), x.clone(), sigma.clone())?;
    if !sigma.is_measurable(space, xi)? {
        return Err(Error::NotMeasurable {
            what: "claimed solution".into(),
        });
    }
    let j_xi = problem.j_eval(xi)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_negative = 0.0f64;
    let mut worst_identity = 0.0f64;
    for _ in 0..sample_count {
        let y = random_measurable(sigma, &mut rng);
        let gap = problem.j_eval(&y)? - j_xi;
        let diff = y.sub(xi)?;
        let predicted = 0.5 * space.inner_product(&diff, &diff)?;
        worst_negative = worst_negative.max(-gap);
        worst_identity =
            worst_identity.max((gap - predicted).abs() / (1.0 + gap.abs() + predicted));
    }
    let checks = vec![
        VerificationCheck::new(
            "gap-nonnegative",
            worst_negative,
            1e-12 * (1.0 + j_xi.abs()),
        ),
        VerificationCheck::new("gap-identity", worst_identity, DIRICHLET_REL_TOL),
    ];
    Ok(VerificationReport::new(checks))
}

/// Conditioning in two stages must match conditioning in one:
/// E(E(X | fine) | coarse) = E(X | coarse) on outcomes of positive weight.
pub fn tower_check(
    space: &ProbabilitySpace,
    coarse: &SigmaAlgebra,
    fine: &SigmaAlgebra,
    x: &RandomVariable,
) -> Result<VerificationReport> {
    if !fine.refines(coarse)? {
        return Err(Error::NotRefinement);
    }
    let inner = solve_oracle(space, fine, x)?;
    let two_stage = solve_oracle(space, coarse, inner.xi())?;
    let direct = solve_oracle(space, coarse, x)?;
    let mut worst = 0.0f64;
    for (i, (&a, &b)) in two_stage
        .xi()
        .values()
        .iter()
        .zip(direct.xi().values())
        .enumerate()
    {
        if space.weight(i) > 0.0 {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(VerificationReport::new(vec![VerificationCheck::new(
        "tower-property",
        worst,
        TOWER_TOL,
    )]))
}
