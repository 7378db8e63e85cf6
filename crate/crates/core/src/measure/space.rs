use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use super::{MeasureError, PROB_SUM_TOLERANCE};

/// Largest space for which dense `2^n` set-function tables are built.
pub const MAX_TABLE_ATOMS: usize = 20;

/// An ordered, finite set of labelled atoms.
///
/// Atom order is fixed at construction; subset masks and probability vectors
/// index atoms in this order. Cloning is cheap.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct FiniteSpace {
    labels: Arc<[String]>,
}

impl FiniteSpace {
    pub fn new<I, S>(labels: I) -> Result<Self, MeasureError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(MeasureError::EmptySpace);
        }
        let mut seen = HashSet::with_capacity(labels.len());
        for label in &labels {
            if !seen.insert(label.as_str()) {
                return Err(MeasureError::DuplicateLabel(label.clone()));
            }
        }
        Ok(Self {
            labels: labels.into(),
        })
    }

    /// Space with atoms labelled `w0, w1, ...`.
    pub fn indexed(n: usize) -> Result<Self, MeasureError> {
        Self::new((0..n).map(|k| format!("w{k}")))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, atom: usize) -> &str {
        &self.labels[atom]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Errors with `TooLarge` when dense `2^n` tables would exceed the cap.
    pub fn check_table_size(&self, cap: usize) -> Result<(), MeasureError> {
        if self.len() > cap {
            Err(MeasureError::TooLarge {
                atoms: self.len(),
                cap,
            })
        } else {
            Ok(())
        }
    }

    pub fn full_mask(&self) -> SubsetMask {
        SubsetMask::full(self.len())
    }

    /// Every subset mask, from the empty set to the whole space.
    pub fn masks(&self) -> impl Iterator<Item = SubsetMask> {
        (0..1u32 << self.len()).map(SubsetMask)
    }
}

impl fmt::Debug for FiniteSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.labels.iter()).finish()
    }
}

/// Bitmask-encoded subset of a [`FiniteSpace`]: bit `k` set iff atom `k` is in the subset.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct SubsetMask(pub u32);

impl SubsetMask {
    pub const EMPTY: SubsetMask = SubsetMask(0);

    pub fn full(n: usize) -> Self {
        debug_assert!(n <= 31);
        SubsetMask((1u32 << n) - 1)
    }

    pub fn singleton(atom: usize) -> Self {
        SubsetMask(1 << atom)
    }

    pub fn from_atoms<I: IntoIterator<Item = usize>>(atoms: I) -> Self {
        SubsetMask(atoms.into_iter().fold(0, |m, a| m | (1 << a)))
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn contains(self, atom: usize) -> bool {
        self.0 >> atom & 1 == 1
    }

    pub fn with(self, atom: usize) -> Self {
        SubsetMask(self.0 | 1 << atom)
    }

    pub fn union(self, other: Self) -> Self {
        SubsetMask(self.0 | other.0)
    }

    pub fn intersection(self, other: Self) -> Self {
        SubsetMask(self.0 & other.0)
    }

    pub fn complement(self, n: usize) -> Self {
        SubsetMask(!self.0 & Self::full(n).0)
    }

    pub fn is_subset_of(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn count(self) -> u32 {
        self.0.count_ones()
    }

    pub fn atoms(self) -> impl Iterator<Item = usize> {
        (0..32).filter(move |&k| self.contains(k))
    }
}

impl fmt::Debug for SubsetMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.atoms()).finish()
    }
}

/// A real value per atom.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomVariable {
    space: FiniteSpace,
    values: Vec<f64>,
}

impl RandomVariable {
    pub fn new(space: &FiniteSpace, values: Vec<f64>) -> Result<Self, MeasureError> {
        if values.len() != space.len() {
            return Err(MeasureError::LengthMismatch {
                expected: space.len(),
                actual: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(MeasureError::NonFinite(k));
        }
        Ok(Self {
            space: space.clone(),
            values,
        })
    }

    pub fn constant(space: &FiniteSpace, c: f64) -> Self {
        Self::new(space, vec![c; space.len()]).expect("constant must be finite")
    }

    pub fn indicator(space: &FiniteSpace, set: SubsetMask) -> Self {
        let values = (0..space.len())
            .map(|k| if set.contains(k) { 1.0 } else { 0.0 })
            .collect();
        Self {
            space: space.clone(),
            values,
        }
    }

    pub fn space(&self) -> &FiniteSpace {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, atom: usize) -> f64 {
        self.values[atom]
    }

    /// Sorted distinct values.
    pub fn range(&self) -> Vec<f64> {
        distinct_sorted(&self.values)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self, MeasureError> {
        Self::new(&self.space, self.values.iter().map(|&v| f(v)).collect())
    }

    /// The upper set `{X >= alpha}`.
    pub fn at_least(&self, alpha: f64) -> SubsetMask {
        SubsetMask::from_atoms((0..self.values.len()).filter(|&k| self.values[k] >= alpha))
    }
}

/// Sorted distinct values of a slice (exact comparison).
pub fn distinct_sorted(values: &[f64]) -> Vec<f64> {
    let mut out = values.to_vec();
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Atom indices sorted by descending value, ties broken by atom order.
pub fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    order
}

/// A probability vector over a [`FiniteSpace`].
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityVector {
    space: FiniteSpace,
    p: Vec<f64>,
}

impl ProbabilityVector {
    pub fn new(space: &FiniteSpace, p: Vec<f64>) -> Result<Self, MeasureError> {
        if p.len() != space.len() {
            return Err(MeasureError::LengthMismatch {
                expected: space.len(),
                actual: p.len(),
            });
        }
        for (atom, &value) in p.iter().enumerate() {
            if !value.is_finite() {
                return Err(MeasureError::NonFinite(atom));
            }
            if value < 0.0 {
                return Err(MeasureError::NegativeProbability { atom, value });
            }
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOLERANCE {
            return Err(MeasureError::NotNormalized(total));
        }
        Ok(Self {
            space: space.clone(),
            p,
        })
    }

    pub fn point_mass(space: &FiniteSpace, atom: usize) -> Self {
        let mut p = vec![0.0; space.len()];
        p[atom] = 1.0;
        Self {
            space: space.clone(),
            p,
        }
    }

    pub fn uniform(space: &FiniteSpace) -> Self {
        let n = space.len();
        Self {
            space: space.clone(),
            p: vec![1.0 / n as f64; n],
        }
    }

    pub fn space(&self) -> &FiniteSpace {
        &self.space
    }

    pub fn probs(&self) -> &[f64] {
        &self.p
    }

    pub fn prob(&self, atom: usize) -> f64 {
        self.p[atom]
    }

    pub fn prob_of(&self, set: SubsetMask) -> f64 {
        set.atoms()
            .take_while(|&k| k < self.p.len())
            .map(|k| self.p[k])
            .sum()
    }

    pub fn expectation(&self, x: &RandomVariable) -> f64 {
        debug_assert_eq!(x.space(), &self.space);
        self.p.iter().zip(x.values()).map(|(p, v)| p * v).sum()
    }

    /// `P(A)` for every mask, built by a subset-sum sweep.
    pub fn subset_table(&self) -> Result<Vec<f64>, MeasureError> {
        self.space.check_table_size(MAX_TABLE_ATOMS)?;
        Ok(subset_sums(&self.p))
    }
}

pub(crate) fn subset_sums(p: &[f64]) -> Vec<f64> {
    let mut table = vec![0.0; 1 << p.len()];
    for mask in 1..table.len() {
        let low = mask.trailing_zeros() as usize;
        table[mask] = table[mask & (mask - 1)] + p[low];
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_must_be_unique() {
        assert_eq!(
            FiniteSpace::new(["R", "R"]),
            Err(MeasureError::DuplicateLabel("R".into()))
        );
        assert_eq!(
            FiniteSpace::new(Vec::<String>::new()),
            Err(MeasureError::EmptySpace)
        );
    }

    #[test]
    fn mask_algebra() {
        let a = SubsetMask::from_atoms([0, 2]);
        let b = SubsetMask::from_atoms([2, 3]);
        assert_eq!(a.union(b), SubsetMask::from_atoms([0, 2, 3]));
        assert_eq!(a.intersection(b), SubsetMask::singleton(2));
        assert_eq!(a.complement(4), SubsetMask::from_atoms([1, 3]));
        assert!(SubsetMask::singleton(2).is_subset_of(a));
        assert!(!b.is_subset_of(a));
        assert_eq!(SubsetMask::full(3).count(), 3);
    }

    #[test]
    fn probability_vector_invariants() {
        let s = FiniteSpace::new(["a", "b"]).unwrap();
        assert!(ProbabilityVector::new(&s, vec![0.5, 0.5]).is_ok());
        assert!(matches!(
            ProbabilityVector::new(&s, vec![0.6, 0.6]),
            Err(MeasureError::NotNormalized(_))
        ));
        assert!(matches!(
            ProbabilityVector::new(&s, vec![-0.1, 1.1]),
            Err(MeasureError::NegativeProbability { atom: 0, .. })
        ));
    }

    #[test]
    fn subset_table_matches_direct_sums() {
        let s = FiniteSpace::indexed(4).unwrap();
        let p = ProbabilityVector::new(&s, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let table = p.subset_table().unwrap();
        for mask in s.masks() {
            assert!((table[mask.0 as usize] - p.prob_of(mask)).abs() < 1e-15);
        }
    }

    #[test]
    fn descending_order_is_stable_on_ties() {
        assert_eq!(descending_order(&[1.0, 3.0, 1.0, 3.0]), vec![1, 3, 0, 2]);
    }
}
