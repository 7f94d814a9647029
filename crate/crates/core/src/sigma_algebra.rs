//! Sub-sigma-algebras of a finite space, represented by atom partitions.
//!
//! On a finite outcome set every sub-sigma-algebra is generated by a
//! partition; the atoms are the finest events it can resolve, and a random
//! variable is measurable exactly when it is constant on each atom (up to
//! outcomes of probability zero). Atoms are kept in a canonical order,
//! sorted by smallest member, so printed reports are reproducible.
//!
//! Null outcomes stay inside their atoms: the partition is independent of
//! the measure, and "almost surely" is handled at comparison time.

use crate::error::{Error, Result};
use crate::prob_space::{Event, ProbabilitySpace, RandomVariable, ALMOST_SURE_TOL};

/// A sub-sigma-algebra given by its atom partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SigmaAlgebra {
    atoms: Vec<Vec<usize>>,
    /// Outcome index -> atom index, for O(1) lookups.
    atom_of: Vec<usize>,
    space_size: usize,
}

impl SigmaAlgebra {
    /// Builds a sigma-algebra from an explicit partition of `{0..space_size}`.
    ///
    /// Atoms are canonicalized: members sorted ascending, atoms sorted by
    /// smallest member.
    pub fn from_atoms(space_size: usize, atoms: Vec<Vec<usize>>) -> Result<Self> {
        if space_size == 0 {
            return Err(Error::EmptyOutcomes);
        }
        let mut atoms: Vec<Vec<usize>> = atoms;
        let mut atom_of = vec![usize::MAX; space_size];
        for (index, atom) in atoms.iter_mut().enumerate() {
            if atom.is_empty() {
                return Err(Error::EmptyAtom { index });
            }
            atom.sort_unstable();
            for pair in atom.windows(2) {
                if pair[0] == pair[1] {
                    return Err(Error::OverlappingAtoms { outcome: pair[0] });
                }
            }
            for &outcome in atom.iter() {
                if outcome >= space_size {
                    return Err(Error::IndexOutOfRange {
                        index: outcome,
                        size: space_size,
                    });
                }
                if atom_of[outcome] != usize::MAX {
                    return Err(Error::OverlappingAtoms { outcome });
                }
                atom_of[outcome] = index;
            }
        }
        if let Some(outcome) = atom_of.iter().position(|&a| a == usize::MAX) {
            return Err(Error::UncoveredOutcome { outcome });
        }
        atoms.sort_by_key(|atom| atom[0]);
        for (index, atom) in atoms.iter().enumerate() {
            for &outcome in atom {
                atom_of[outcome] = index;
            }
        }
        Ok(Self {
            atoms,
            atom_of,
            space_size,
        })
    }

    /// The sigma-algebra generated by a family of events: atoms are the
    /// classes of outcomes with identical membership signatures. With no
    /// generators this is the trivial sigma-algebra (a single atom).
    pub fn generate(space_size: usize, generators: &[Event]) -> Result<Self> {
        if space_size == 0 {
            return Err(Error::EmptyOutcomes);
        }
        for event in generators {
            event.validate(space_size)?;
        }
        let mut groups: std::collections::BTreeMap<Vec<bool>, Vec<usize>> = Default::default();
        for outcome in 0..space_size {
            let signature: Vec<bool> = generators.iter().map(|g| g.contains(outcome)).collect();
            groups.entry(signature).or_default().push(outcome);
        }
        Self::from_atoms(space_size, groups.into_values().collect())
    }

    /// The finest sigma-algebra: one singleton atom per outcome.
    pub fn discrete(space_size: usize) -> Result<Self> {
        Self::from_atoms(space_size, (0..space_size).map(|i| vec![i]).collect())
    }

    /// The coarsest sigma-algebra: a single atom covering everything.
    pub fn trivial(space_size: usize) -> Result<Self> {
        Self::generate(space_size, &[])
    }

    pub fn atoms(&self) -> &[Vec<usize>] {
        &self.atoms
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn space_size(&self) -> usize {
        self.space_size
    }

    pub fn atom_index_of(&self, outcome: usize) -> usize {
        self.atom_of[outcome]
    }

    /// Atom number `index` as an event.
    pub fn atom_event(&self, index: usize) -> Event {
        Event::new(self.atoms[index].iter().copied())
    }

    /// True when every atom of `self` is contained in some atom of
    /// `coarse`; equivalently, `coarse` is a sub-sigma-algebra of `self`.
    pub fn refines(&self, coarse: &SigmaAlgebra) -> Result<bool> {
        if self.space_size != coarse.space_size {
            return Err(Error::SizeMismatch {
                left: self.space_size,
                right: coarse.space_size,
            });
        }
        Ok(self.atoms.iter().all(|atom| {
            let target = coarse.atom_of[atom[0]];
            atom.iter().all(|&o| coarse.atom_of[o] == target)
        }))
    }

    /// True when X is constant on every atom, ignoring outcomes of
    /// probability zero, within [`ALMOST_SURE_TOL`] per value.
    pub fn is_measurable(&self, space: &ProbabilitySpace, x: &RandomVariable) -> Result<bool> {
        self.is_measurable_within(space, x, ALMOST_SURE_TOL)
    }

    pub fn is_measurable_within(
        &self,
        space: &ProbabilitySpace,
        x: &RandomVariable,
        tol: f64,
    ) -> Result<bool> {
        if space.len() != self.space_size {
            return Err(Error::SizeMismatch {
                left: space.len(),
                right: self.space_size,
            });
        }
        if x.len() != space.len() {
            return Err(Error::LengthMismatch {
                expected: space.len(),
                found: x.len(),
            });
        }
        for atom in &self.atoms {
            let mut reference: Option<f64> = None;
            for &outcome in atom {
                if space.weight(outcome) == 0.0 {
                    continue;
                }
                let value = x.values()[outcome];
                match reference {
                    None => reference = Some(value),
                    Some(r) => {
                        if (value - r).abs() > tol {
                            return Ok(false);
                        }
                    }
                }
            }
        }
        Ok(true)
    }
}

/// The indicator variable of an event: 1 on members, 0 elsewhere.
pub fn indicator(space_size: usize, event: &Event) -> Result<RandomVariable> {
    event.validate(space_size)?;
    let mut values = vec![0.0; space_size];
    for &i in event.members() {
        values[i] = 1.0;
    }
    RandomVariable::new(values)
}
