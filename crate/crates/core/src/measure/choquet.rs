use super::space::descending_order;

/// A set function evaluated along nested chains of atoms.
///
/// Choquet integration only ever needs the values on the chain of upper
/// sets of the integrand, so implementors need not materialise a full
/// `2^n` table.
pub trait SetFunction {
    fn atom_count(&self) -> usize;

    /// `[V(S_0), V(S_1), ..., V(S_n)]` for `S_k = {order[0], ..., order[k-1]}`.
    fn chain_values(&self, order: &[usize]) -> Vec<f64>;

    /// `V(A)` for an explicit list of atoms.
    fn measure(&self, atoms: &[usize]) -> f64 {
        *self.chain_values(atoms).last().unwrap_or(&0.0)
    }
}

impl<T: SetFunction + ?Sized> SetFunction for &T {
    fn atom_count(&self) -> usize {
        (**self).atom_count()
    }

    fn chain_values(&self, order: &[usize]) -> Vec<f64> {
        (**self).chain_values(order)
    }

    fn measure(&self, atoms: &[usize]) -> f64 {
        (**self).measure(atoms)
    }
}

/// Choquet integral of `values` (one per atom) with respect to `v`.
///
/// Atoms are sorted by descending value (ties by atom order) and the
/// integral is accumulated as
/// `sum_k (x_(k) - x_(k+1)) V(S_k) + x_(n) V(S_n)`, which is the
/// telescoped survival-function form on a finite space. Tied atoms
/// contribute zero-width steps, so the result does not depend on how ties
/// are ordered.
pub fn choquet_integral<V: SetFunction + ?Sized>(v: &V, values: &[f64]) -> f64 {
    assert_eq!(values.len(), v.atom_count(), "integrand length mismatch");
    if values.is_empty() {
        return 0.0;
    }
    let order = descending_order(values);
    let chain = v.chain_values(&order);
    let n = order.len();
    let mut total = values[order[n - 1]] * chain[n];
    for k in 1..n {
        let step = values[order[k - 1]] - values[order[k]];
        if step != 0.0 {
            total += step * chain[k];
        }
    }
    total
}
