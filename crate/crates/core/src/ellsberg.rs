//! The dominating probability `P'` of an Ellsberg urn and product-model
//! Fubini verification.
//!
//! For an urn whose observed values are sorted `x_1 < ... < x_m`,
//! `P'(X = x_m) = max_l p_{lm}` and
//! `P'(X = x_k) = max_l Σ_{j≥k} p_{lj} - max_l Σ_{j>k} p_{lj}`, so the
//! survival function of `X` under `P'` is the upper survival function
//! `α -> max_l P_l(X >= α)`.

use rand::Rng;
use serde::Serialize;

use crate::comonotone::BoundedFn;
use crate::independence::{
    fubini_rows, relative_gap, threshold_grid, Convention, IndependenceError, RowSet, Urn, UrnModel,
};
use crate::measure::{
    descending_order, distinct_sorted, CredalSet, FiniteSpace, MeasureError, ProbabilityVector,
    RandomVariable, SubsetMask,
};
use crate::rng;

/// An urn with the atom permutation sorting `X` ascending (stable on ties).
#[derive(Clone, Debug, PartialEq)]
pub struct SortedUrn {
    urn: Urn,
    perm: Vec<usize>,
}

impl SortedUrn {
    pub fn new(urn: Urn) -> Self {
        let mut perm = descending_order(urn.variable().values());
        // descending_order is stable descending; reverse each tie block to
        // keep atom order within ties after reversal
        perm.reverse();
        let values = urn.variable().values();
        let mut start = 0;
        while start < perm.len() {
            let mut end = start + 1;
            while end < perm.len() && values[perm[end]] == values[perm[start]] {
                end += 1;
            }
            perm[start..end].reverse();
            start = end;
        }
        Self { urn, perm }
    }

    pub fn urn(&self) -> &Urn {
        &self.urn
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    /// Re-sorts the urn by `φ(X)`, with `φ` tabulated on the range of `X`.
    pub fn by_phi(&self, phi: &BoundedFn) -> Result<SortedUrn, MeasureError> {
        let range = self.urn.range();
        if phi.values().len() != range.len() {
            return Err(MeasureError::LengthMismatch {
                expected: range.len(),
                actual: phi.values().len(),
            });
        }
        let idx = self.urn.range_index();
        let x = RandomVariable::new(
            self.urn.space(),
            idx.iter().map(|&k| phi.values()[k]).collect(),
        )?;
        let urn = Urn::new(self.urn.credal().clone(), x).expect("same space");
        Ok(SortedUrn::new(urn))
    }
}

/// Builds `P'` by max-telescoping the upper survival function over the
/// distinct values of `X`. Mass of a value shared by several atoms is split
/// in proportion to the member attaining the maximum at that value, or
/// uniformly when that member gives the value no mass.
pub fn build_pprime(u: &SortedUrn) -> ProbabilityVector {
    let urn = u.urn();
    let values = urn.variable().values();
    let range = urn.range();
    let idx = urn.range_index();
    let m = range.len();
    let members = urn.credal().members();
    // survival[l][k] = P_l(X >= x_k), built from the top value down
    let survival: Vec<Vec<f64>> = members
        .iter()
        .map(|p| {
            let mut mass = vec![0.0; m + 1];
            for (atom, &q) in p.probs().iter().enumerate() {
                mass[idx[atom]] += q;
            }
            for k in (0..m).rev() {
                mass[k] += mass[k + 1];
            }
            mass
        })
        .collect();
    let upper: Vec<(f64, usize)> = (0..=m)
        .map(|k| {
            let mut best = (survival[0][k], 0);
            for (l, s) in survival.iter().enumerate().skip(1) {
                if s[k] > best.0 {
                    best = (s[k], l);
                }
            }
            best
        })
        .collect();
    let mut probs = vec![0.0; values.len()];
    for k in 0..m {
        let mass = upper[k].0 - upper[k + 1].0;
        let atoms: Vec<usize> = u.perm().iter().copied().filter(|&a| idx[a] == k).collect();
        let member = members[upper[k].1].probs();
        let within: f64 = atoms.iter().map(|&a| member[a]).sum();
        for &a in &atoms {
            probs[a] = if within > 0.0 {
                mass * member[a] / within
            } else {
                mass / atoms.len() as f64
            };
        }
    }
    ProbabilityVector::new(urn.space(), probs).expect("telescoped maxima form a probability")
}

/// `P'` for the urn re-sorted by `φ(X)`.
pub fn pprime_for_phi(u: &SortedUrn, phi: &BoundedFn) -> Result<ProbabilityVector, MeasureError> {
    Ok(build_pprime(&u.by_phi(phi)?))
}

/// Checks on a candidate `P'`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PPrimeVerdict {
    pub is_prob: bool,
    pub in_core: bool,
    pub survival_match: bool,
    /// First subset `A` with `P'(A) > V(A) + tol`.
    pub core_witness: Option<Vec<usize>>,
    /// Largest `|V(X >= α) - P'(X >= α)|` over the threshold grid.
    pub max_survival_gap: f64,
}

impl PPrimeVerdict {
    pub fn all(&self) -> bool {
        self.is_prob && self.in_core && self.survival_match
    }
}

/// Probability, core and survival checks of `p` against the urn's upper
/// capacity, each to absolute tolerance `tol`.
pub fn verify_pprime(
    u: &SortedUrn,
    p: &ProbabilityVector,
    tol: f64,
) -> Result<PPrimeVerdict, MeasureError> {
    let urn = u.urn();
    let probs = p.probs();
    let is_prob = p.space() == urn.space()
        && probs.iter().all(|&q| q >= -tol && q.is_finite())
        && (probs.iter().sum::<f64>() - 1.0).abs() <= tol;
    let v = urn.credal().upper_capacity()?;
    let core_witness = v
        .core_violation(p, tol)
        .map(|mask: SubsetMask| mask.atoms().collect());
    let x = urn.variable();
    let mut max_survival_gap: f64 = 0.0;
    for alpha in threshold_grid(x.values()) {
        let set = x.at_least(alpha);
        let gap = (v.get(set) - p.prob_of(set)).abs();
        max_survival_gap = max_survival_gap.max(gap);
    }
    Ok(PPrimeVerdict {
        is_prob,
        in_core: core_witness.is_none(),
        survival_match: max_survival_gap <= tol,
        core_witness,
        max_survival_gap,
    })
}

/// One threshold of [`verify_product_fubini`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProductFubiniRow {
    pub alpha: f64,
    /// `V(Σ φ_i(X_i) >= α)` over the product law.
    pub joint: f64,
    /// `max_P E_P[V_n(s(x) + φ_n(X_n) >= α)]` over prefix members `P`.
    pub iterated: f64,
    /// `max_P (P ⊗ P'_{φ_n})(Σ φ_i(X_i) >= α)`.
    pub pprime_route: f64,
    /// Relative gap between `joint` and `iterated`.
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProductFubiniReport {
    pub rows: Vec<ProductFubiniRow>,
    pub max_gap: f64,
    pub holds: bool,
}

/// Both sides of the product Fubini identity at every threshold, together
/// with the route through `P'_{φ_n}` used for the lower bound.
pub fn verify_product_fubini(
    m: &UrnModel,
    phis: &[BoundedFn],
    tol: f64,
) -> Result<ProductFubiniReport, IndependenceError> {
    if !m.is_product() {
        return Err(IndependenceError::NotProductLaw);
    }
    let tables = m.phi_tables(phis)?;
    let last = m.len() - 1;
    let sorted = SortedUrn::new(m.urns()[last].clone());
    let pprime = pprime_for_phi(&sorted, &phis[last])?;
    let idx = m.urns()[last].range_index();
    let mut pprime_values = vec![0.0; m.dims()[last]];
    for (atom, &q) in pprime.probs().iter().enumerate() {
        pprime_values[idx[atom]] += q;
    }
    let prefix_dims = &m.dims()[..last];
    let prefix_len = prefix_dims.iter().product::<usize>();
    let mut coords = vec![0; last];
    let pre: Vec<f64> = (0..prefix_len)
        .map(|x| {
            crate::comonotone::unflatten(x, prefix_dims, &mut coords);
            coords.iter().enumerate().map(|(i, &c)| tables[i][c]).sum()
        })
        .collect();
    let phi_last = tables[last];

    let mut max_gap: f64 = 0.0;
    let rows: Vec<ProductFubiniRow> = fubini_rows(m, phis, Convention::AtLeast)?
        .into_iter()
        .map(|r| {
            let inner: Vec<f64> = pre
                .iter()
                .map(|&s| {
                    pprime_values
                        .iter()
                        .zip(phi_last)
                        .filter(|(_, &v)| s + v >= r.alpha)
                        .map(|(q, _)| q)
                        .sum()
                })
                .collect();
            let pprime_route = RowSet(m.prefix_rows()).upper_expectation(&inner);
            let gap = relative_gap(r.joint, r.iterated);
            max_gap = max_gap.max(gap);
            ProductFubiniRow {
                alpha: r.alpha,
                joint: r.joint,
                iterated: r.iterated,
                pprime_route,
                gap,
            }
        })
        .collect();
    Ok(ProductFubiniReport {
        rows,
        max_gap,
        holds: max_gap <= tol,
    })
}

/// A random urn with `atoms` atoms, `members` flat-Dirichlet members and
/// distinct values drawn without replacement from `{-5, -4.5, ..., 5}`.
pub fn random_urn(rng: &mut impl Rng, atoms: usize, members: usize) -> Urn {
    let space = FiniteSpace::indexed(atoms).expect("nonempty");
    let rows = (0..members)
        .map(|_| rng::dirichlet_flat(rng, atoms))
        .collect();
    let credal = CredalSet::from_rows(&space, rows).expect("dirichlet rows");
    let x = RandomVariable::new(&space, rng::distinct_grid_values(rng, atoms)).expect("finite");
    Urn::new(credal, x).expect("same space")
}

/// A random urn whose members are `(1 - ε) P + ε δ_k` for a Dirichlet `P`
/// and every atom `k`, with distinct grid values.
pub fn contamination_urn(rng: &mut impl Rng, atoms: usize, eps: f64) -> Urn {
    let space = FiniteSpace::indexed(atoms).expect("nonempty");
    let base = rng::dirichlet_flat(rng, atoms);
    let rows = (0..atoms)
        .map(|k| {
            let mut row: Vec<f64> = base.iter().map(|p| (1.0 - eps) * p).collect();
            row[k] += eps;
            row
        })
        .collect();
    let credal = CredalSet::from_rows(&space, rows).expect("mixture rows");
    let x = RandomVariable::new(&space, rng::distinct_grid_values(rng, atoms)).expect("finite");
    Urn::new(credal, x).expect("same space")
}

/// Distinct grid values of a sorted urn, handy for reports.
pub fn value_support(u: &SortedUrn) -> Vec<f64> {
    distinct_sorted(u.urn().variable().values())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::independence::{ellsberg_pair, ellsberg_urn};

    fn urn(values: Vec<f64>, rows: Vec<Vec<f64>>) -> SortedUrn {
        let space = FiniteSpace::indexed(values.len()).unwrap();
        let credal = CredalSet::from_rows(&space, rows).unwrap();
        let x = RandomVariable::new(&space, values).unwrap();
        SortedUrn::new(Urn::new(credal, x).unwrap())
    }

    #[test]
    fn perm_sorts_ascending_and_is_stable() {
        let u = urn(vec![2.0, 1.0, 2.0, 0.0], vec![vec![0.25; 4]]);
        assert_eq!(u.perm(), &[3, 1, 0, 2]);
    }

    #[test]
    fn singleton_urn_is_its_own_pprime() {
        let u = urn(vec![1.0, 3.0, 2.0], vec![vec![0.2, 0.5, 0.3]]);
        let p = build_pprime(&u);
        for (a, b) in p.probs().iter().zip([0.2, 0.5, 0.3]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn ellsberg_pprime() {
        let u = SortedUrn::new(ellsberg_urn());
        let p = build_pprime(&u);
        assert_eq!(p.probs(), &[0.5, 0.5]);
        let v = verify_pprime(&u, &p, 1e-12).unwrap();
        assert!(v.all());
        let x = u.urn().variable();
        let cap = u.urn().credal().upper_capacity().unwrap();
        assert_eq!(cap.get(x.at_least(-0.5)), 1.0);
        assert_eq!(cap.get(x.at_least(0.5)), 0.5);
        assert_eq!(cap.get(x.at_least(1.5)), 0.0);
    }

    #[test]
    fn three_value_pprime() {
        let u = urn(
            vec![1.0, 2.0, 3.0],
            vec![vec![0.2, 0.3, 0.5], vec![0.4, 0.4, 0.2]],
        );
        let p = build_pprime(&u);
        let expected = [0.2, 0.3, 0.5];
        for (a, b) in p.probs().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(verify_pprime(&u, &p, 1e-12).unwrap().all());
    }

    #[test]
    fn order_reversing_phi_swaps_roles() {
        let u = SortedUrn::new(ellsberg_urn());
        let axis = crate::independence::range_axis(&u.urn().range());
        let neg = BoundedFn::new(&axis, vec![0.0, -1.0]).unwrap();
        let p = pprime_for_phi(&u, &neg).unwrap();
        // atom order is (R, B); X = 1 on R
        assert!((p.prob(1) - 0.7).abs() < 1e-15);
        assert!((p.prob(0) - 0.3).abs() < 1e-15);
        let id = BoundedFn::new(&axis, vec![0.0, 1.0]).unwrap();
        assert_eq!(pprime_for_phi(&u, &id).unwrap(), build_pprime(&u));
        let flat = BoundedFn::new(&axis, vec![4.0, 4.0]).unwrap();
        let p = pprime_for_phi(&u, &flat).unwrap();
        assert!(
            verify_pprime(&u.by_phi(&flat).unwrap(), &p, 1e-12)
                .unwrap()
                .survival_match
        );
    }

    #[test]
    fn ties_follow_the_maximising_member() {
        let u = urn(
            vec![0.0, 1.0, 1.0],
            vec![vec![0.5, 0.1, 0.4], vec![0.8, 0.2, 0.0]],
        );
        let p = build_pprime(&u);
        assert!((p.prob(1) - 0.1).abs() < 1e-15);
        assert!((p.prob(2) - 0.4).abs() < 1e-15);
        let z = urn(vec![0.0, 1.0, 1.0], vec![vec![1.0, 0.0, 0.0]]);
        assert_eq!(build_pprime(&z).probs(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn pprime_can_leave_the_core_without_two_alternation() {
        // the two top-valued atoms sit in different members
        let u = urn(
            vec![3.0, 0.0, 1.0, 2.0],
            vec![vec![0.5, 0.5, 0.0, 0.0], vec![0.0, 0.0, 0.5, 0.5]],
        );
        let p = build_pprime(&u);
        let v = verify_pprime(&u, &p, 1e-12).unwrap();
        assert!(v.is_prob && v.survival_match);
        assert!(!v.in_core);
        assert_eq!(p.probs(), &[0.5, 0.0, 0.5, 0.0]);
        assert_eq!(v.core_witness, Some(vec![0, 2]));
    }

    #[test]
    fn product_fubini_on_ellsberg_pair() {
        let m = ellsberg_pair();
        let id: Vec<BoundedFn> = (0..2)
            .map(|i| BoundedFn::new(&m.range_axis(i), vec![0.0, 1.0]).unwrap())
            .collect();
        let r = verify_product_fubini(&m, &id, 1e-9).unwrap();
        assert!(r.holds);
        let alphas: Vec<f64> = r.rows.iter().map(|row| row.alpha).collect();
        assert_eq!(alphas, vec![-1.0, 0.0, 0.5, 1.0, 1.5, 2.0, 3.0]);
        for row in &r.rows {
            assert!((row.pprime_route - row.iterated).abs() < 1e-12);
        }
    }

    #[test]
    fn product_fubini_rejects_explicit_law() {
        let m = crate::independence::correlated_coupling();
        let id: Vec<BoundedFn> = (0..2)
            .map(|i| BoundedFn::new(&m.range_axis(i), vec![0.0, 1.0]).unwrap())
            .collect();
        assert_eq!(
            verify_product_fubini(&m, &id, 1e-9).unwrap_err(),
            IndependenceError::NotProductLaw
        );
    }

    #[test]
    fn product_fubini_strict_gap_counterexample() {
        let first = urn(vec![0.0, 1.0], vec![vec![0.5, 0.5]]);
        let last = urn(
            vec![0.0, 1.0, 2.0],
            vec![vec![0.5, 0.0, 0.5], vec![0.0, 1.0, 0.0]],
        );
        let m = UrnModel::product(vec![first.urn().clone(), last.urn().clone()]).unwrap();
        let id: Vec<BoundedFn> = (0..2)
            .map(|i| BoundedFn::new(&m.range_axis(i), m.ranges()[i].clone()).unwrap())
            .collect();
        let r = verify_product_fubini(&m, &id, 1e-9).unwrap();
        assert!(!r.holds);
        let at_two = r.rows.iter().find(|row| row.alpha == 2.0).unwrap();
        assert!((at_two.joint - 0.5).abs() < 1e-15);
        assert!((at_two.iterated - 0.75).abs() < 1e-15);
    }
}
