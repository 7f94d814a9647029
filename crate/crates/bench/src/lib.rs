//! Seeded problem generation shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use condexp::{ProbabilitySpace, RandomVariable, SigmaAlgebra};

pub struct BenchProblem {
    pub space: ProbabilitySpace,
    pub sigma: SigmaAlgebra,
    pub x: RandomVariable,
}

/// A dense seeded problem with `outcomes` outcomes and roughly
/// `outcomes / atom_size` atoms.
pub fn problem(seed: u64, outcomes: usize, atom_size: usize) -> BenchProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<f64> = (0..outcomes).map(|_| rng.gen_range(0.5..1.5)).collect();
    let space = ProbabilitySpace::new(weights).unwrap();
    let groups = (outcomes / atom_size).max(1);
    let mut atoms: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for outcome in 0..outcomes {
        atoms
            .entry(rng.gen_range(0..groups))
            .or_default()
            .push(outcome);
    }
    let sigma = SigmaAlgebra::from_atoms(outcomes, atoms.into_values().collect()).unwrap();
    let x = RandomVariable::new((0..outcomes).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .unwrap();
    BenchProblem { space, sigma, x }
}
