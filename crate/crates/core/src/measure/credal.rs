use super::capacity::Capacity;
use super::choquet::{choquet_integral, SetFunction};
use super::space::{subset_sums, MAX_TABLE_ATOMS};
use super::{FiniteSpace, MeasureError, ProbabilityVector, RandomVariable};

/// A finite, nonempty set of probability vectors on one space.
#[derive(Clone, Debug, PartialEq)]
pub struct CredalSet {
    space: FiniteSpace,
    members: Vec<ProbabilityVector>,
}

/// An extremal expectation together with the member attaining it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Envelope {
    pub value: f64,
    pub member: usize,
}

impl CredalSet {
    pub fn new(space: &FiniteSpace, members: Vec<ProbabilityVector>) -> Result<Self, MeasureError> {
        if members.is_empty() {
            return Err(MeasureError::EmptyCredalSet);
        }
        if members.iter().any(|m| m.space() != space) {
            return Err(MeasureError::SpaceMismatch);
        }
        Ok(Self {
            space: space.clone(),
            members,
        })
    }

    /// Builds members from raw probability rows.
    pub fn from_rows(space: &FiniteSpace, rows: Vec<Vec<f64>>) -> Result<Self, MeasureError> {
        let members = rows
            .into_iter()
            .map(|row| ProbabilityVector::new(space, row))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(space, members)
    }

    pub fn singleton(p: ProbabilityVector) -> Self {
        Self {
            space: p.space().clone(),
            members: vec![p],
        }
    }

    pub fn space(&self) -> &FiniteSpace {
        &self.space
    }

    pub fn members(&self) -> &[ProbabilityVector] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Drops exact duplicate members, keeping first occurrences.
    pub fn normalized(&self) -> Self {
        let mut members: Vec<ProbabilityVector> = Vec::with_capacity(self.members.len());
        for m in &self.members {
            if !members.iter().any(|k| k.probs() == m.probs()) {
                members.push(m.clone());
            }
        }
        Self {
            space: self.space.clone(),
            members,
        }
    }

    pub fn upper_envelope(&self, x: &RandomVariable) -> f64 {
        self.upper_envelope_arg(x).value
    }

    pub fn lower_envelope(&self, x: &RandomVariable) -> f64 {
        self.lower_envelope_arg(x).value
    }

    pub fn upper_envelope_arg(&self, x: &RandomVariable) -> Envelope {
        self.extremum(x, |a, b| a > b)
    }

    pub fn lower_envelope_arg(&self, x: &RandomVariable) -> Envelope {
        self.extremum(x, |a, b| a < b)
    }

    fn extremum(&self, x: &RandomVariable, better: impl Fn(f64, f64) -> bool) -> Envelope {
        assert_eq!(x.space(), &self.space, "random variable on another space");
        let mut best = Envelope {
            value: self.members[0].expectation(x),
            member: 0,
        };
        for (member, p) in self.members.iter().enumerate().skip(1) {
            let value = p.expectation(x);
            if better(value, best.value) {
                best = Envelope { value, member };
            }
        }
        best
    }

    /// Lazy `A -> max_P P(A)`.
    pub fn upper_probability(&self) -> UpperProbability<'_> {
        UpperProbability(self)
    }

    /// Lazy `A -> min_P P(A)`.
    pub fn lower_probability(&self) -> LowerProbability<'_> {
        LowerProbability(self)
    }

    /// Dense upper capacity table `A -> max_P P(A)`.
    pub fn upper_capacity(&self) -> Result<Capacity, MeasureError> {
        self.capacity_table(f64::max, f64::NEG_INFINITY)
    }

    /// Dense lower capacity table `A -> min_P P(A)`.
    pub fn lower_capacity(&self) -> Result<Capacity, MeasureError> {
        self.capacity_table(f64::min, f64::INFINITY)
    }

    fn capacity_table(
        &self,
        pick: fn(f64, f64) -> f64,
        init: f64,
    ) -> Result<Capacity, MeasureError> {
        self.space.check_table_size(MAX_TABLE_ATOMS)?;
        let mut table = vec![init; 1 << self.space.len()];
        for m in &self.members {
            for (slot, v) in table.iter_mut().zip(subset_sums(m.probs())) {
                *slot = pick(*slot, v);
            }
        }
        // member sums are only 1 up to rounding
        table[0] = 0.0;
        Ok(Capacity::from_table_unchecked(self.space.clone(), table))
    }

    /// Choquet integral with respect to the upper probability.
    pub fn upper_choquet(&self, x: &RandomVariable) -> f64 {
        choquet_integral(&self.upper_probability(), x.values())
    }

    /// Choquet integral with respect to the lower probability.
    pub fn lower_choquet(&self, x: &RandomVariable) -> f64 {
        choquet_integral(&self.lower_probability(), x.values())
    }
}

fn chain_extremum(set: &CredalSet, order: &[usize], pick: fn(f64, f64) -> f64) -> Vec<f64> {
    let mut out: Option<Vec<f64>> = None;
    for m in &set.members {
        let p = m.probs();
        let mut acc = 0.0;
        let mut chain = Vec::with_capacity(order.len() + 1);
        chain.push(0.0);
        for &atom in order {
            acc += p[atom];
            chain.push(acc);
        }
        out = Some(match out {
            None => chain,
            Some(mut best) => {
                for (b, c) in best.iter_mut().zip(chain) {
                    *b = pick(*b, c);
                }
                best
            }
        });
    }
    out.expect("credal sets are nonempty")
}

/// Upper probability of a [`CredalSet`], evaluated on demand.
#[derive(Clone, Copy, Debug)]
pub struct UpperProbability<'a>(pub &'a CredalSet);

/// Lower probability of a [`CredalSet`], evaluated on demand.
#[derive(Clone, Copy, Debug)]
pub struct LowerProbability<'a>(pub &'a CredalSet);

impl SetFunction for UpperProbability<'_> {
    fn atom_count(&self) -> usize {
        self.0.space.len()
    }

    fn chain_values(&self, order: &[usize]) -> Vec<f64> {
        chain_extremum(self.0, order, f64::max)
    }
}

impl SetFunction for LowerProbability<'_> {
    fn atom_count(&self) -> usize {
        self.0.space.len()
    }

    fn chain_values(&self, order: &[usize]) -> Vec<f64> {
        chain_extremum(self.0, order, f64::min)
    }
}
