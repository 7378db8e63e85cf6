use super::choquet::{choquet_integral, SetFunction};
use super::space::{descending_order, subset_sums, MAX_TABLE_ATOMS};
use super::{FiniteSpace, MeasureError, ProbabilityVector, RandomVariable, SubsetMask, Tolerance};

/// Largest space on which pairwise and Möbius checks run exhaustively.
pub const MAX_EXHAUSTIVE_ATOMS: usize = 12;

/// A normalised monotone set function stored as a dense table over all subsets.
#[derive(Clone, Debug, PartialEq)]
pub struct Capacity {
    space: FiniteSpace,
    table: Vec<f64>,
}

/// Outcome of [`Capacity::classify`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Classification {
    pub two_alternating: bool,
    pub totally_monotone: bool,
    pub totally_alternating: bool,
}

/// Greedy maximiser of the expectation over the core.
#[derive(Clone, Debug, PartialEq)]
pub struct CoreMaximizer {
    pub value: f64,
    pub argmax: ProbabilityVector,
}

/// Checks grounding and monotonicity of `table` and wraps it as a capacity.
///
/// Monotonicity is swept over single-bit supersets, which covers every
/// comparable pair by transitivity.
pub fn validate_capacity(space: &FiniteSpace, table: Vec<f64>) -> Result<Capacity, MeasureError> {
    validate_capacity_with(space, table, Tolerance::default())
}

pub fn validate_capacity_with(
    space: &FiniteSpace,
    table: Vec<f64>,
    tol: Tolerance,
) -> Result<Capacity, MeasureError> {
    space.check_table_size(MAX_TABLE_ATOMS)?;
    let n = space.len();
    let expected = 1usize << n;
    if table.len() != expected {
        return Err(MeasureError::LengthMismatch {
            expected,
            actual: table.len(),
        });
    }
    if let Some(k) = table.iter().position(|v| !v.is_finite()) {
        return Err(MeasureError::NonFinite(k));
    }
    for mask in 0..expected {
        for atom in 0..n {
            let sup = mask | 1 << atom;
            if sup != mask && table[mask] > table[sup] + tol.identity {
                return Err(MeasureError::NotMonotone {
                    subset: SubsetMask(mask as u32),
                    superset: SubsetMask(sup as u32),
                    lower: table[mask],
                    upper: table[sup],
                });
            }
        }
    }
    let full = table[expected - 1];
    if table[0].abs() > tol.identity || (full - 1.0).abs() > tol.identity {
        return Err(MeasureError::NotGrounded {
            empty: table[0],
            full,
        });
    }
    Ok(Capacity {
        space: space.clone(),
        table,
    })
}

impl Capacity {
    /// The additive capacity of a probability vector.
    pub fn from_probability(p: &ProbabilityVector) -> Result<Self, MeasureError> {
        let table = p.subset_table()?;
        Ok(Self {
            space: p.space().clone(),
            table,
        })
    }

    /// `A -> g(P(A))`; `g` must be nondecreasing with `g(0)=0`, `g(1)=1`.
    pub fn distortion(p: &ProbabilityVector, g: impl Fn(f64) -> f64) -> Result<Self, MeasureError> {
        let table = p
            .subset_table()?
            .into_iter()
            .map(|v| g(v.clamp(0.0, 1.0)))
            .collect();
        validate_capacity(p.space(), table)
    }

    pub(crate) fn from_table_unchecked(space: FiniteSpace, table: Vec<f64>) -> Self {
        Self { space, table }
    }

    pub fn space(&self) -> &FiniteSpace {
        &self.space
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn get(&self, set: SubsetMask) -> f64 {
        self.table[set.0 as usize]
    }

    /// `A -> 1 - V(A^c)`.
    pub fn conjugate(&self) -> Capacity {
        let full = self.table.len() - 1;
        let table = (0..self.table.len())
            .map(|mask| 1.0 - self.table[full & !mask])
            .collect();
        Capacity {
            space: self.space.clone(),
            table,
        }
    }

    /// Choquet integral `E_V[X]`.
    pub fn choquet(&self, x: &RandomVariable) -> f64 {
        assert_eq!(x.space(), &self.space, "random variable on another space");
        choquet_integral(self, x.values())
    }

    /// Möbius transform `m(A) = sum_{B ⊆ A} (-1)^{|A \ B|} V(B)`.
    pub fn mobius(&self) -> Result<Vec<f64>, MeasureError> {
        self.space.check_table_size(MAX_EXHAUSTIVE_ATOMS)?;
        let mut m = self.table.clone();
        for bit in 0..self.space.len() {
            let b = 1 << bit;
            for mask in 0..m.len() {
                if mask & b != 0 {
                    m[mask] -= m[mask ^ b];
                }
            }
        }
        Ok(m)
    }

    /// First witness `(A, B)` with `V(A ∪ B) + V(A ∩ B) > V(A) + V(B)`.
    pub fn two_alternating_violation(
        &self,
        tol: f64,
    ) -> Result<Option<(SubsetMask, SubsetMask)>, MeasureError> {
        self.space.check_table_size(MAX_EXHAUSTIVE_ATOMS)?;
        let t = &self.table;
        for a in 0..t.len() {
            for b in (a + 1)..t.len() {
                if t[a | b] + t[a & b] > t[a] + t[b] + tol {
                    return Ok(Some((SubsetMask(a as u32), SubsetMask(b as u32))));
                }
            }
        }
        Ok(None)
    }

    pub fn classify(&self) -> Result<Classification, MeasureError> {
        self.classify_with(Tolerance::default())
    }

    pub fn classify_with(&self, tol: Tolerance) -> Result<Classification, MeasureError> {
        let two_alternating = self.two_alternating_violation(tol.identity)?.is_none();
        let totally_monotone = self.mobius()?.iter().all(|&m| m >= -tol.derived);
        let totally_alternating = self
            .conjugate()
            .mobius()?
            .iter()
            .all(|&m| m >= -tol.derived);
        Ok(Classification {
            two_alternating,
            totally_monotone,
            totally_alternating,
        })
    }

    /// True iff `Q(A) <= V(A)` for every subset `A`.
    pub fn core_contains(&self, q: &ProbabilityVector) -> bool {
        self.core_violation(q, Tolerance::default().identity)
            .is_none()
    }

    /// First subset where `q` exceeds the capacity by more than `tol`.
    pub fn core_violation(&self, q: &ProbabilityVector, tol: f64) -> Option<SubsetMask> {
        assert_eq!(q.space(), &self.space, "probability on another space");
        let sums = subset_sums(q.probs());
        sums.iter()
            .zip(&self.table)
            .position(|(qa, va)| *qa > va + tol)
            .map(|m| SubsetMask(m as u32))
    }

    /// Maximises `E_Q[X]` over the core with the greedy vector along the
    /// descending order of `X`. Only valid for 2-alternating capacities.
    pub fn core_sup_expectation(&self, x: &RandomVariable) -> Result<CoreMaximizer, MeasureError> {
        if let Some((a, b)) = self.two_alternating_violation(Tolerance::default().identity)? {
            return Err(MeasureError::NotTwoAlternating(a, b));
        }
        let order = descending_order(x.values());
        let chain = self.chain_values(&order);
        let mut q = vec![0.0; self.space.len()];
        for (k, &atom) in order.iter().enumerate() {
            q[atom] = (chain[k + 1] - chain[k]).max(0.0);
        }
        let value = q.iter().zip(x.values()).map(|(p, v)| p * v).sum();
        let argmax = ProbabilityVector::new(&self.space, q)?;
        Ok(CoreMaximizer { value, argmax })
    }
}

impl SetFunction for Capacity {
    fn atom_count(&self) -> usize {
        self.space.len()
    }

    fn chain_values(&self, order: &[usize]) -> Vec<f64> {
        let mut out = Vec::with_capacity(order.len() + 1);
        let mut mask = 0usize;
        out.push(self.table[0]);
        for &atom in order {
            mask |= 1 << atom;
            out.push(self.table[mask]);
        }
        out
    }
}

/// Zeta transform: `V(A) = sum_{B ⊆ A} m(B)`.
pub fn mobius_inverse(m: &[f64]) -> Vec<f64> {
    let mut v = m.to_vec();
    let n = m.len().trailing_zeros();
    for bit in 0..n {
        let b = 1 << bit;
        for mask in 0..v.len() {
            if mask & b != 0 {
                v[mask] += v[mask ^ b];
            }
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn urn() -> FiniteSpace {
        FiniteSpace::new(["R", "B"]).unwrap()
    }

    fn ellsberg_upper() -> Capacity {
        validate_capacity(&urn(), vec![0.0, 0.5, 0.7, 1.0]).unwrap()
    }

    #[test]
    fn singleton_capacity_is_valid() {
        let s = FiniteSpace::new(["only"]).unwrap();
        assert!(validate_capacity(&s, vec![0.0, 1.0]).is_ok());
    }

    #[test]
    fn rejects_full_set_below_subset() {
        let err = validate_capacity(&urn(), vec![0.0, 0.8, 0.7, 0.75]).unwrap_err();
        assert!(matches!(
            err,
            MeasureError::NotMonotone {
                subset: SubsetMask(1),
                superset: SubsetMask(3),
                ..
            }
        ));
    }

    #[test]
    fn rejects_non_monotone_grounded_table() {
        let s = FiniteSpace::indexed(3).unwrap();
        let mut t = vec![0.0, 0.5, 0.2, 0.4, 0.3, 0.6, 0.6, 1.0];
        t[3] = 0.4; // {0,1} below {0}
        let err = validate_capacity(&s, t).unwrap_err();
        assert_eq!(
            err,
            MeasureError::NotMonotone {
                subset: SubsetMask(1),
                superset: SubsetMask(3),
                lower: 0.5,
                upper: 0.4
            }
        );
    }

    #[test]
    fn rejects_ungrounded() {
        assert!(matches!(
            validate_capacity(&urn(), vec![0.1, 0.5, 0.7, 1.0]),
            Err(MeasureError::NotGrounded { .. })
        ));
        assert!(matches!(
            validate_capacity(&urn(), vec![0.0, 0.5]),
            Err(MeasureError::LengthMismatch {
                expected: 4,
                actual: 2
            })
        ));
    }

    #[test]
    fn additive_capacity_is_everything() {
        let s = FiniteSpace::indexed(4).unwrap();
        let p = ProbabilityVector::new(&s, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let c = Capacity::from_probability(&p).unwrap().classify().unwrap();
        assert_eq!(
            c,
            Classification {
                two_alternating: true,
                totally_monotone: true,
                totally_alternating: true
            }
        );
    }

    #[test]
    fn concave_distortion_is_two_alternating() {
        let s = FiniteSpace::indexed(3).unwrap();
        let p = ProbabilityVector::uniform(&s);
        let v = Capacity::distortion(&p, f64::sqrt).unwrap();
        let c = v.classify().unwrap();
        assert!(c.two_alternating);
        assert!(c.totally_alternating);
        assert!(!c.totally_monotone);
    }

    #[test]
    fn ellsberg_upper_capacity_classification() {
        let c = ellsberg_upper().classify().unwrap();
        assert!(c.two_alternating);
    }

    #[test]
    fn classify_rejects_large_spaces() {
        let s = FiniteSpace::indexed(13).unwrap();
        let v = Capacity::from_probability(&ProbabilityVector::uniform(&s)).unwrap();
        assert_eq!(
            v.classify(),
            Err(MeasureError::TooLarge { atoms: 13, cap: 12 })
        );
    }

    #[test]
    fn choquet_examples() {
        let v = ellsberg_upper();
        let x = RandomVariable::new(&urn(), vec![1.0, 0.0]).unwrap();
        assert_eq!(v.choquet(&x), 0.5);
        assert_eq!(v.choquet(&RandomVariable::constant(&urn(), -2.5)), -2.5);
        for mask in urn().masks() {
            assert_eq!(
                v.choquet(&RandomVariable::indicator(&urn(), mask)),
                v.get(mask)
            );
        }
    }

    #[test]
    fn core_membership_examples() {
        let v = ellsberg_upper();
        assert!(v.core_contains(&ProbabilityVector::new(&urn(), vec![0.5, 0.5]).unwrap()));
        assert_eq!(
            v.core_violation(
                &ProbabilityVector::new(&urn(), vec![0.6, 0.4]).unwrap(),
                1e-12
            ),
            Some(SubsetMask(1))
        );
    }

    #[test]
    fn greedy_core_maximiser() {
        let v = ellsberg_upper();
        let x = RandomVariable::new(&urn(), vec![1.0, 0.0]).unwrap();
        let r = v.core_sup_expectation(&x).unwrap();
        assert_eq!(r.value, 0.5);
        assert_eq!(r.argmax.probs(), &[0.5, 0.5]);
        let y = RandomVariable::new(&urn(), vec![0.0, 1.0]).unwrap();
        let r = v.core_sup_expectation(&y).unwrap();
        assert!((r.value - 0.7).abs() < 1e-15);
        assert!((r.argmax.prob(0) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn greedy_refuses_non_two_alternating() {
        let s = FiniteSpace::indexed(3).unwrap();
        let p = ProbabilityVector::uniform(&s);
        let v = Capacity::distortion(&p, |t| t * t).unwrap();
        let x = RandomVariable::new(&s, vec![1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(
            v.core_sup_expectation(&x),
            Err(MeasureError::NotTwoAlternating(_, _))
        ));
    }

    #[test]
    fn mobius_round_trip() {
        let s = FiniteSpace::indexed(4).unwrap();
        let p = ProbabilityVector::new(&s, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let v = Capacity::distortion(&p, |t| t.powf(0.3)).unwrap();
        let back = mobius_inverse(&v.mobius().unwrap());
        for (a, b) in back.iter().zip(v.table()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
