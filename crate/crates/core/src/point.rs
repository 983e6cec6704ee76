//! Assignments of values to even coordinates.

use std::collections::BTreeMap;
use std::fmt;

use crate::scalar::Scalar;

/// A point of the reduced (ordinary) space: values for even coordinates only.
/// Odd coordinates have no points to evaluate at; everything odd is handled
/// symbolically.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvenPoint {
    bindings: BTreeMap<String, Scalar>,
}

impl EvenPoint {
    pub fn new() -> Self {
        EvenPoint::default()
    }

    pub fn insert(&mut self, name: String, value: Scalar) {
        self.bindings.insert(name, value);
    }

    pub fn get(&self, name: &str) -> Option<&Scalar> {
        self.bindings.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Scalar)> {
        self.bindings.iter()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn from_pairs<I: IntoIterator<Item = (String, Scalar)>>(pairs: I) -> Self {
        EvenPoint {
            bindings: pairs.into_iter().collect(),
        }
    }

    /// Coordinates in the order of `names`; None if any is missing.
    pub fn values_for(&self, names: &[String]) -> Option<Vec<Scalar>> {
        names.iter().map(|n| self.bindings.get(n).cloned()).collect()
    }
}

impl fmt::Display for EvenPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, (k, v)) in self.bindings.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{k}={v}")?;
        }
        write!(f, ")")
    }
}
