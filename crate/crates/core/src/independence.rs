//! Finite multi-urn models and exact checks of independence notions.
//!
//! An [`UrnModel`] holds urns `(Ω_i, 𝒫_i, X_i)` and a joint law, either the
//! set of all products of per-urn members or an explicit finite set of
//! joint probabilities on `Ω_1 × ... × Ω_n`. Every check here depends on the
//! urns only through `(X_1, ..., X_n)`, so the model is pushed forward once
//! onto the grid `range(X_1) × ... × range(X_n)` (row-major, last urn
//! fastest) and all work happens there.
//!
//! Throughout, "the last urn" plays the role of `X_n` and the other urns
//! are grouped into the prefix `(X_1, ..., X_{n-1})`.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::comonotone::{BoundedFn, ComonotoneError, GridFunction};
use crate::measure::{
    choquet_integral, distinct_sorted, CredalSet, FiniteSpace, MeasureError, RandomVariable,
    SetFunction, SubsetMask, PROB_SUM_TOLERANCE,
};
use crate::rng;

/// Cap on `prod |𝒫_i|` for the product law.
pub const MAX_PRODUCT_MEMBERS: u128 = 1_000_000;
/// Cap on `prod |Ω_i|`.
pub const MAX_PRODUCT_ATOMS: u128 = 1_000_000;
/// Cap on joint members times grid points held in memory.
pub const MAX_JOINT_ENTRIES: u128 = 10_000_000;
/// Cap on the number of rectangles of the n-fold product rule.
pub const MAX_RECTANGLES: u128 = 1 << 20;

/// Relative tolerance for "holds".
pub const DEFAULT_TOLERANCE: f64 = 1e-9;
/// Random function tuples tried by [`exp_independent`].
pub const DEFAULT_TRIALS: usize = 200;
/// Depths `k = 1..=STEP_DEPTH` of the step family `0` on a set, `-k` off it.
pub const STEP_DEPTH: u32 = 30;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IndependenceError {
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Comonotone(#[from] ComonotoneError),
    #[error("{what} has {size} entries, cap is {cap}")]
    EnumerationCap {
        what: &'static str,
        size: u128,
        cap: u128,
    },
    #[error("model has no urns")]
    NoUrns,
    #[error("urn index {index} out of range for {len} urns")]
    UrnIndex { index: usize, len: usize },
    #[error("urn indices must differ, got {0} twice")]
    SameUrn(usize),
    #[error("expected {expected} functions, got {actual}")]
    ArityMismatch { expected: usize, actual: usize },
    #[error("function {0} is not tabulated on the range of its urn")]
    AxisMismatch(usize),
    #[error("random variable and credal set live on different spaces")]
    UrnSpaceMismatch,
    #[error("explicit joint law row {row}: {source}")]
    JointRow { row: usize, source: MeasureError },
    #[error("explicit joint law has no rows")]
    EmptyJoint,
    #[error("operation requires the product law")]
    NotProductLaw,
}

/// One urn: a credal set on `Ω` and the observed variable `X: Ω -> R`.
#[derive(Clone, Debug, PartialEq)]
pub struct Urn {
    credal: CredalSet,
    variable: RandomVariable,
}

impl Urn {
    pub fn new(credal: CredalSet, variable: RandomVariable) -> Result<Self, IndependenceError> {
        if credal.space() != variable.space() {
            return Err(IndependenceError::UrnSpaceMismatch);
        }
        Ok(Self { credal, variable })
    }

    pub fn credal(&self) -> &CredalSet {
        &self.credal
    }

    pub fn variable(&self) -> &RandomVariable {
        &self.variable
    }

    pub fn space(&self) -> &FiniteSpace {
        self.credal.space()
    }

    /// Sorted distinct values of `X`.
    pub fn range(&self) -> Vec<f64> {
        self.variable.range()
    }

    /// Position of each atom's value in [`Urn::range`].
    pub fn range_index(&self) -> Vec<usize> {
        let range = self.range();
        self.variable
            .values()
            .iter()
            .map(|v| range.partition_point(|r| r.total_cmp(v).is_lt()))
            .collect()
    }

    /// Distributions of `X` under each member, deduplicated.
    pub fn value_law(&self) -> Vec<Vec<f64>> {
        let idx = self.range_index();
        let width = self.range().len();
        let rows = self.credal.members().iter().map(|m| {
            let mut row = vec![0.0; width];
            for (atom, &p) in m.probs().iter().enumerate() {
                row[idx[atom]] += p;
            }
            row
        });
        dedup_rows(rows)
    }
}

/// Axis whose atoms are the values in `range`, labelled by their decimal form.
pub fn range_axis(range: &[f64]) -> FiniteSpace {
    FiniteSpace::new(range.iter().map(|v| format!("{v}")))
        .expect("distinct values give distinct labels")
}

fn dedup_rows(rows: impl IntoIterator<Item = Vec<f64>>) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for row in rows {
        if !out.contains(&row) {
            out.push(row);
        }
    }
    out
}

/// The joint law of an [`UrnModel`].
#[derive(Clone, Debug, PartialEq)]
pub enum JointLaw {
    /// All products `Q_1 × ... × Q_n` with `Q_i ∈ 𝒫_i`.
    Product,
    /// Explicit probabilities on `Ω_1 × ... × Ω_n`, last urn fastest.
    Explicit(Vec<Vec<f64>>),
}

/// Urns together with a joint law, pushed forward onto the value grid.
#[derive(Clone, Debug)]
pub struct UrnModel {
    urns: Vec<Urn>,
    law: JointLaw,
    ranges: Vec<Vec<f64>>,
    dims: Vec<usize>,
    marginals: Vec<Vec<Vec<f64>>>,
    joint: Vec<Vec<f64>>,
    prefix: Vec<Vec<f64>>,
}

fn product_u128(xs: impl IntoIterator<Item = usize>) -> u128 {
    xs.into_iter()
        .fold(1u128, |acc, x| acc.saturating_mul(x as u128))
}

fn check_cap(what: &'static str, size: u128, cap: u128) -> Result<(), IndependenceError> {
    if size > cap {
        Err(IndependenceError::EnumerationCap { what, size, cap })
    } else {
        Ok(())
    }
}

/// All products of one row per factor; the first factor varies slowest.
fn product_rows(factors: &[Vec<Vec<f64>>]) -> Vec<Vec<f64>> {
    let mut rows = vec![vec![1.0]];
    for factor in factors {
        let mut next = Vec::with_capacity(rows.len() * factor.len());
        for r in &rows {
            for m in factor {
                next.push(
                    r.iter()
                        .flat_map(|&a| m.iter().map(move |&b| a * b))
                        .collect(),
                );
            }
        }
        rows = next;
    }
    rows
}

/// Marginalises grid rows onto the coordinates in `keep` (in order).
fn project(rows: &[Vec<f64>], dims: &[usize], keep: &[usize]) -> Vec<Vec<f64>> {
    let total = dims.iter().product::<usize>();
    let kept_dims: Vec<usize> = keep.iter().map(|&i| dims[i]).collect();
    let width = kept_dims.iter().product::<usize>();
    let mut coords = vec![0; dims.len()];
    let map: Vec<usize> = (0..total)
        .map(|g| {
            crate::comonotone::unflatten(g, dims, &mut coords);
            keep.iter().fold(0, |acc, &i| acc * dims[i] + coords[i])
        })
        .collect();
    dedup_rows(rows.iter().map(|r| {
        let mut out = vec![0.0; width];
        for (g, &p) in r.iter().enumerate() {
            out[map[g]] += p;
        }
        out
    }))
}

fn validate_joint_row(row: &[f64], atoms: usize) -> Result<(), MeasureError> {
    if row.len() != atoms {
        return Err(MeasureError::LengthMismatch {
            expected: atoms,
            actual: row.len(),
        });
    }
    for (atom, &value) in row.iter().enumerate() {
        if !value.is_finite() {
            return Err(MeasureError::NonFinite(atom));
        }
        if value < 0.0 {
            return Err(MeasureError::NegativeProbability { atom, value });
        }
    }
    let total: f64 = row.iter().sum();
    if (total - 1.0).abs() > PROB_SUM_TOLERANCE {
        return Err(MeasureError::NotNormalized(total));
    }
    Ok(())
}

impl UrnModel {
    /// Urns under the product law.
    pub fn product(urns: Vec<Urn>) -> Result<Self, IndependenceError> {
        Self::build(urns, JointLaw::Product)
    }

    /// Urns under an explicit joint law on the product of their spaces.
    pub fn with_joint(urns: Vec<Urn>, rows: Vec<Vec<f64>>) -> Result<Self, IndependenceError> {
        Self::build(urns, JointLaw::Explicit(rows))
    }

    pub fn build(urns: Vec<Urn>, law: JointLaw) -> Result<Self, IndependenceError> {
        if urns.is_empty() {
            return Err(IndependenceError::NoUrns);
        }
        let atoms = product_u128(urns.iter().map(|u| u.space().len()));
        check_cap("product sample space", atoms, MAX_PRODUCT_ATOMS)?;
        let ranges: Vec<Vec<f64>> = urns.iter().map(Urn::range).collect();
        let dims: Vec<usize> = ranges.iter().map(Vec::len).collect();
        let grid = dims.iter().product::<usize>();
        let n = urns.len();
        let prefix_keep: Vec<usize> = (0..n - 1).collect();

        let (marginals, joint, prefix) = match &law {
            JointLaw::Product => {
                check_cap(
                    "product credal set",
                    product_u128(urns.iter().map(|u| u.credal().len())),
                    MAX_PRODUCT_MEMBERS,
                )?;
                let marginals: Vec<Vec<Vec<f64>>> = urns.iter().map(Urn::value_law).collect();
                check_cap(
                    "joint law",
                    product_u128(marginals.iter().map(Vec::len)).saturating_mul(grid as u128),
                    MAX_JOINT_ENTRIES,
                )?;
                let joint = product_rows(&marginals);
                let prefix = dedup_rows(product_rows(&marginals[..n - 1]));
                (marginals, joint, prefix)
            }
            JointLaw::Explicit(rows) => {
                if rows.is_empty() {
                    return Err(IndependenceError::EmptyJoint);
                }
                check_cap(
                    "joint law",
                    (rows.len() as u128).saturating_mul(atoms),
                    MAX_JOINT_ENTRIES,
                )?;
                let atoms = atoms as usize;
                for (row, r) in rows.iter().enumerate() {
                    validate_joint_row(r, atoms)
                        .map_err(|source| IndependenceError::JointRow { row, source })?;
                }
                let space_dims: Vec<usize> = urns.iter().map(|u| u.space().len()).collect();
                let idx: Vec<Vec<usize>> = urns.iter().map(Urn::range_index).collect();
                let mut coords = vec![0; n];
                let to_grid: Vec<usize> = (0..atoms)
                    .map(|a| {
                        crate::comonotone::unflatten(a, &space_dims, &mut coords);
                        (0..n).fold(0, |acc, i| acc * dims[i] + idx[i][coords[i]])
                    })
                    .collect();
                let joint = dedup_rows(rows.iter().map(|r| {
                    let mut out = vec![0.0; grid];
                    for (a, &p) in r.iter().enumerate() {
                        out[to_grid[a]] += p;
                    }
                    out
                }));
                let marginals = (0..n).map(|i| project(&joint, &dims, &[i])).collect();
                let prefix = project(&joint, &dims, &prefix_keep);
                (marginals, joint, prefix)
            }
        };
        Ok(Self {
            urns,
            law,
            ranges,
            dims,
            marginals,
            joint,
            prefix,
        })
    }

    pub fn urns(&self) -> &[Urn] {
        &self.urns
    }

    pub fn len(&self) -> usize {
        self.urns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.urns.is_empty()
    }

    pub fn law(&self) -> &JointLaw {
        &self.law
    }

    pub fn is_product(&self) -> bool {
        self.law == JointLaw::Product
    }

    pub fn ranges(&self) -> &[Vec<f64>] {
        &self.ranges
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn range_axis(&self, i: usize) -> FiniteSpace {
        range_axis(&self.ranges[i])
    }

    pub fn range_axes(&self) -> Vec<FiniteSpace> {
        (0..self.len()).map(|i| self.range_axis(i)).collect()
    }

    /// Joint value distributions, one row per joint member.
    pub fn joint_rows(&self) -> &[Vec<f64>] {
        &self.joint
    }

    /// Value distributions of urn `i` under the joint law.
    pub fn marginal_rows(&self, i: usize) -> &[Vec<f64>] {
        &self.marginals[i]
    }

    /// Joint value distributions of the first `n - 1` urns.
    pub fn prefix_rows(&self) -> &[Vec<f64>] {
        &self.prefix
    }

    fn last(&self) -> usize {
        self.urns.len() - 1
    }

    fn check_urn(&self, index: usize) -> Result<(), IndependenceError> {
        if index >= self.len() {
            Err(IndependenceError::UrnIndex {
                index,
                len: self.len(),
            })
        } else {
            Ok(())
        }
    }

    /// Checks that `phis` holds one function per urn, each on its range axis,
    /// and returns their value tables.
    pub fn phi_tables<'a>(
        &self,
        phis: &'a [BoundedFn],
    ) -> Result<Vec<&'a [f64]>, IndependenceError> {
        if phis.len() != self.len() {
            return Err(IndependenceError::ArityMismatch {
                expected: self.len(),
                actual: phis.len(),
            });
        }
        phis.iter()
            .enumerate()
            .map(|(i, phi)| {
                if phi.axis().labels() != self.range_axis(i).labels() {
                    Err(IndependenceError::AxisMismatch(i))
                } else {
                    Ok(phi.values())
                }
            })
            .collect()
    }

    /// `(Σ_{i<n} φ_i(x_i), φ_n(x_n))` split of a sum over the grid: prefix
    /// sums per prefix point, and the full sums `s(x) + φ_n(y)` per grid point.
    fn sums(&self, tables: &[&[f64]]) -> (Vec<f64>, Vec<f64>) {
        let prefix_dims = &self.dims[..self.last()];
        let prefix_len = prefix_dims.iter().product::<usize>();
        let mut coords = vec![0; prefix_dims.len()];
        let pre: Vec<f64> = (0..prefix_len)
            .map(|x| {
                crate::comonotone::unflatten(x, prefix_dims, &mut coords);
                coords.iter().enumerate().map(|(i, &c)| tables[i][c]).sum()
            })
            .collect();
        let last = tables[self.last()];
        let full = pre
            .iter()
            .flat_map(|&s| last.iter().map(move |&v| s + v))
            .collect();
        (pre, full)
    }
}

/// Upper probability / Choquet integration for a finite set of grid rows.
#[derive(Clone, Copy, Debug)]
pub struct RowSet<'a>(pub &'a [Vec<f64>]);

impl RowSet<'_> {
    /// `max_r Σ_{g ∈ A} r[g]`.
    pub fn upper_prob(&self, member: impl Fn(usize) -> bool) -> f64 {
        self.0
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|(g, _)| member(*g))
                    .fold(0.0, |acc, (_, p)| acc + p)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max_r Σ_g r[g] f[g]`.
    pub fn upper_expectation(&self, f: &[f64]) -> f64 {
        self.0
            .iter()
            .map(|r| r.iter().zip(f).fold(0.0, |acc, (p, v)| acc + p * v))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn choquet(&self, f: &[f64]) -> f64 {
        choquet_integral(self, f)
    }
}

impl SetFunction for RowSet<'_> {
    fn atom_count(&self) -> usize {
        self.0[0].len()
    }

    fn chain_values(&self, order: &[usize]) -> Vec<f64> {
        let mut best = vec![f64::NEG_INFINITY; order.len() + 1];
        for r in self.0 {
            let mut acc = 0.0;
            best[0] = best[0].max(0.0);
            for (k, &g) in order.iter().enumerate() {
                acc += r[g];
                best[k + 1] = best[k + 1].max(acc);
            }
        }
        best
    }
}

/// `|a - b| / max(|a|, |b|, f64::MIN_POSITIVE)`.
pub fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Which property an [`IndependenceReport`] is about.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IndependenceKind {
    Mm,
    Exponential,
    FubiniChain,
    Peng,
    ProductRule,
    FubiniTheorem,
}

impl IndependenceKind {
    pub fn name(self) -> &'static str {
        match self {
            IndependenceKind::Mm => "mm",
            IndependenceKind::Exponential => "exp",
            IndependenceKind::FubiniChain => "fubini",
            IndependenceKind::Peng => "peng",
            IndependenceKind::ProductRule => "product-rule",
            IndependenceKind::FubiniTheorem => "fubini-theorem",
        }
    }
}

/// Verdict of one check. `lhs`, `rhs` and `witness` describe the instance
/// with the largest relative gap (the first one on ties).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IndependenceReport {
    pub kind: IndependenceKind,
    pub holds: bool,
    pub max_gap: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub witness: Option<String>,
}

#[derive(Clone, Debug)]
struct GapTracker {
    max_gap: f64,
    lhs: f64,
    rhs: f64,
    witness: Option<String>,
}

impl GapTracker {
    fn new() -> Self {
        Self {
            max_gap: 0.0,
            lhs: 0.0,
            rhs: 0.0,
            witness: None,
        }
    }

    fn observe(&mut self, lhs: f64, rhs: f64, witness: impl FnOnce() -> String) {
        let gap = relative_gap(lhs, rhs);
        if self.witness.is_none() || gap > self.max_gap {
            self.max_gap = gap;
            self.lhs = lhs;
            self.rhs = rhs;
            self.witness = Some(witness());
        }
    }

    fn merge(&mut self, other: GapTracker) {
        if let Some(w) = other.witness {
            self.observe(other.lhs, other.rhs, || w);
        }
    }

    fn finish(self, kind: IndependenceKind, tol: f64) -> IndependenceReport {
        let holds = self.max_gap <= tol;
        IndependenceReport {
            kind,
            holds,
            max_gap: self.max_gap,
            lhs: self.lhs,
            rhs: self.rhs,
            witness: if holds { None } else { self.witness },
        }
    }
}

fn describe_set(range: &[f64], mask: u32) -> String {
    let mut s = String::from("{");
    for (k, atom) in SubsetMask(mask).atoms().enumerate() {
        if k > 0 {
            s.push(',');
        }
        let _ = write!(s, "{}", range[atom]);
    }
    s.push('}');
    s
}

/// `(V(X_i ∈ A, X_j ∈ B), V(X_i ∈ A) V(X_j ∈ B))` for masks over the ranges.
pub fn mm_pair(
    m: &UrnModel,
    i: usize,
    j: usize,
    a: SubsetMask,
    b: SubsetMask,
) -> Result<(f64, f64), IndependenceError> {
    let pair = PairView::new(m, i, j)?;
    Ok(pair.eval(a.bits(), b.bits()))
}

struct PairView {
    rows: Vec<Vec<f64>>,
    di: usize,
    dj: usize,
    vi: Vec<f64>,
    vj: Vec<f64>,
}

impl PairView {
    fn new(m: &UrnModel, i: usize, j: usize) -> Result<Self, IndependenceError> {
        m.check_urn(i)?;
        m.check_urn(j)?;
        if i == j {
            return Err(IndependenceError::SameUrn(i));
        }
        let (di, dj) = (m.dims[i], m.dims[j]);
        check_cap(
            "rectangle family",
            1u128 << (di + dj).min(127),
            MAX_RECTANGLES,
        )?;
        let upper_table = |rows: &[Vec<f64>], d: usize| -> Vec<f64> {
            (0..1u32 << d)
                .map(|mask| RowSet(rows).upper_prob(|g| mask >> g & 1 == 1))
                .collect()
        };
        Ok(Self {
            rows: project(&m.joint, &m.dims, &[i, j]),
            di,
            dj,
            vi: upper_table(&m.marginals[i], di),
            vj: upper_table(&m.marginals[j], dj),
        })
    }

    fn eval(&self, a: u32, b: u32) -> (f64, f64) {
        let dj = self.dj;
        let joint = if a == 0 || b == 0 {
            0.0
        } else {
            RowSet(&self.rows).upper_prob(|g| a >> (g / dj) & 1 == 1 && b >> (g % dj) & 1 == 1)
        };
        (joint, self.vi[a as usize] * self.vj[b as usize])
    }
}

/// Product rule `V(X_i ∈ A, X_j ∈ B) = V(X_i ∈ A) V(X_j ∈ B)` over all
/// subsets of the two ranges, with `V` the joint upper probability.
pub fn mm_independent(
    m: &UrnModel,
    i: usize,
    j: usize,
    tol: f64,
) -> Result<IndependenceReport, IndependenceError> {
    let pair = PairView::new(m, i, j)?;
    let mut track = GapTracker::new();
    for a in 0..1u32 << pair.di {
        for b in 0..1u32 << pair.dj {
            let (joint, prod) = pair.eval(a, b);
            track.observe(joint, prod, || {
                format!(
                    "A={} B={}",
                    describe_set(&m.ranges[i], a),
                    describe_set(&m.ranges[j], b)
                )
            });
        }
    }
    Ok(track.finish(IndependenceKind::Mm, tol))
}

/// n-fold rule `V(∩ X_i ∈ A_i) = Π V(X_i ∈ A_i)` over all rectangles.
pub fn product_rule(m: &UrnModel, tol: f64) -> Result<IndependenceReport, IndependenceError> {
    let n = m.len();
    let count = m
        .dims
        .iter()
        .fold(1u128, |acc, &d| acc.saturating_mul(1u128 << d.min(127)));
    check_cap("rectangle family", count, MAX_RECTANGLES)?;
    let marginal_tables: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..1u32 << m.dims[i])
                .map(|mask| RowSet(&m.marginals[i]).upper_prob(|g| mask >> g & 1 == 1))
                .collect()
        })
        .collect();
    let grid = m.dims.iter().product::<usize>();
    let mut coords_of = Vec::with_capacity(grid);
    let mut coords = vec![0; n];
    for g in 0..grid {
        crate::comonotone::unflatten(g, &m.dims, &mut coords);
        coords_of.push(coords.clone());
    }
    let mut masks = vec![0u32; n];
    let mut track = GapTracker::new();
    loop {
        let joint = RowSet(&m.joint).upper_prob(|g| {
            coords_of[g]
                .iter()
                .zip(&masks)
                .all(|(&c, &mask)| mask >> c & 1 == 1)
        });
        let prod: f64 = (0..n)
            .map(|i| marginal_tables[i][masks[i] as usize])
            .product();
        track.observe(joint, prod, || {
            masks
                .iter()
                .enumerate()
                .map(|(i, &mask)| format!("A{}={}", i + 1, describe_set(&m.ranges[i], mask)))
                .collect::<Vec<_>>()
                .join(" ")
        });
        // odometer over mask tuples, last urn fastest
        let mut axis = n;
        loop {
            if axis == 0 {
                return Ok(track.finish(IndependenceKind::ProductRule, tol));
            }
            axis -= 1;
            masks[axis] += 1;
            if masks[axis] < 1 << m.dims[axis] {
                break;
            }
            masks[axis] = 0;
        }
    }
}

/// `φ_i` values drawn uniformly from `[-3, 3]` at every range point.
pub fn random_phis(m: &UrnModel, seed: u64, trial: u64) -> Vec<BoundedFn> {
    let mut rng = rng::stream(seed, trial);
    (0..m.len())
        .map(|i| {
            let values = (0..m.dims[i])
                .map(|_| -3.0 + 6.0 * rng::open_unit(&mut rng))
                .collect();
            BoundedFn::new(&m.range_axis(i), values).expect("finite by construction")
        })
        .collect()
}

/// `(E_V[e^{Σ φ_i}], E_V[e^{Σ_{i<n} φ_i}] · E_V[e^{φ_n}])` as Choquet
/// integrals with respect to the joint upper probability.
pub fn exp_factorization(
    m: &UrnModel,
    phis: &[BoundedFn],
) -> Result<(f64, f64), IndependenceError> {
    let tables = m.phi_tables(phis)?;
    Ok(exp_sides(m, &tables))
}

fn exp_sides(m: &UrnModel, tables: &[&[f64]]) -> (f64, f64) {
    let (pre, full) = m.sums(tables);
    let f: Vec<f64> = full.iter().map(|s| s.exp()).collect();
    let g: Vec<f64> = pre.iter().map(|s| s.exp()).collect();
    let h: Vec<f64> = tables[m.last()].iter().map(|s| s.exp()).collect();
    let lhs = RowSet(&m.joint).choquet(&f);
    let rhs = RowSet(&m.prefix).choquet(&g) * RowSet(&m.marginals[m.last()]).choquet(&h);
    (lhs, rhs)
}

/// Per-trial verdicts of the exponential factorization on random `φ`.
pub fn exp_random_trials(
    m: &UrnModel,
    trials: usize,
    seed: u64,
    tol: f64,
) -> Vec<(f64, f64, bool)> {
    (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let phis = random_phis(m, seed, t);
            let tables: Vec<&[f64]> = phis.iter().map(BoundedFn::values).collect();
            let (lhs, rhs) = exp_sides(m, &tables);
            (lhs, rhs, relative_gap(lhs, rhs) <= tol)
        })
        .collect()
}

/// Exponential factorization over the step family only: `φ_j = -k` off a
/// set `A` of one prefix urn, `φ_n = -k` off a set `B`, all other `φ` zero.
pub fn exp_step_family(m: &UrnModel, tol: f64) -> Result<IndependenceReport, IndependenceError> {
    let last = m.last();
    let mut track = GapTracker::new();
    let zero: Vec<Vec<f64>> = m.dims.iter().map(|&d| vec![0.0; d]).collect();
    for j in 0..last {
        check_cap(
            "step family",
            1u128 << (m.dims[j] + m.dims[last]).min(127),
            MAX_RECTANGLES,
        )?;
        let parts: Vec<GapTracker> = (1..1u32 << m.dims[j])
            .into_par_iter()
            .map(|a| {
                let mut local = GapTracker::new();
                let mut tables = zero.clone();
                for b in 1..1u32 << m.dims[last] {
                    for k in 1..=STEP_DEPTH {
                        let depth = -(k as f64);
                        tables[j] = (0..m.dims[j])
                            .map(|g| if a >> g & 1 == 1 { 0.0 } else { depth })
                            .collect();
                        tables[last] = (0..m.dims[last])
                            .map(|g| if b >> g & 1 == 1 { 0.0 } else { depth })
                            .collect();
                        let refs: Vec<&[f64]> = tables.iter().map(Vec::as_slice).collect();
                        let (lhs, rhs) = exp_sides(m, &refs);
                        local.observe(lhs, rhs, || {
                            format!(
                                "step urn={} A={} B={} k={}",
                                j + 1,
                                describe_set(&m.ranges[j], a),
                                describe_set(&m.ranges[last], b),
                                k
                            )
                        });
                    }
                }
                local
            })
            .collect();
        for part in parts {
            track.merge(part);
        }
    }
    Ok(track.finish(IndependenceKind::Exponential, tol))
}

/// Exponential independence of the last urn from the others: random `φ`
/// tuples plus the step family, with `E_V` the Choquet integral.
pub fn exp_independent(
    m: &UrnModel,
    trials: usize,
    seed: u64,
    tol: f64,
) -> Result<IndependenceReport, IndependenceError> {
    let mut track = GapTracker::new();
    for (t, (lhs, rhs, _)) in exp_random_trials(m, trials, seed, tol)
        .into_iter()
        .enumerate()
    {
        track.observe(lhs, rhs, || format!("trial {t}"));
    }
    let steps = exp_step_family(m, tol)?;
    if steps.witness.is_some() || steps.max_gap > track.max_gap {
        track.observe(steps.lhs, steps.rhs, || {
            steps
                .witness
                .clone()
                .unwrap_or_else(|| "step family".into())
        });
    }
    Ok(track.finish(IndependenceKind::Exponential, tol))
}

/// Threshold convention for upper sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Convention {
    /// `{S >= α}`
    AtLeast,
    /// `{S > α}`
    Greater,
}

impl Convention {
    pub fn test(self, s: f64, alpha: f64) -> bool {
        match self {
            Convention::AtLeast => s >= alpha,
            Convention::Greater => s > alpha,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Convention::AtLeast => ">=",
            Convention::Greater => ">",
        }
    }
}

/// Distinct values, the midpoints between consecutive ones, and one point
/// beyond each end.
pub fn threshold_grid(values: &[f64]) -> Vec<f64> {
    let d = distinct_sorted(values);
    let mut out = Vec::with_capacity(2 * d.len() + 1);
    out.push(d[0] - 1.0);
    for (k, &v) in d.iter().enumerate() {
        out.push(v);
        if let Some(&next) = d.get(k + 1) {
            out.push(v + (next - v) / 2.0);
        }
    }
    out.push(d[d.len() - 1] + 1.0);
    out
}

/// One threshold of a Fubini chain comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FubiniRow {
    pub alpha: f64,
    /// `V(Σ φ_i(X_i) ⋄ α)` under the joint law.
    pub joint: f64,
    /// Outer upper envelope of `x -> V_n(s(x) + φ_n(X_n) ⋄ α)`.
    pub iterated: f64,
}

/// Both sides of the Fubini chain identity at every threshold of the grid.
pub fn fubini_rows(
    m: &UrnModel,
    phis: &[BoundedFn],
    convention: Convention,
) -> Result<Vec<FubiniRow>, IndependenceError> {
    let tables = m.phi_tables(phis)?;
    let (pre, full) = m.sums(&tables);
    let last = tables[m.last()];
    let distinct = distinct_sorted(&full);
    // suffix sums per joint row over distinct sum values
    let group: Vec<usize> = full
        .iter()
        .map(|s| distinct.partition_point(|d| d.total_cmp(s).is_lt()))
        .collect();
    let suffix: Vec<Vec<f64>> = m
        .joint
        .iter()
        .map(|r| {
            let mut mass = vec![0.0; distinct.len() + 1];
            for (g, &p) in r.iter().enumerate() {
                mass[group[g]] += p;
            }
            for k in (0..distinct.len()).rev() {
                mass[k] += mass[k + 1];
            }
            mass
        })
        .collect();
    let last_rows = &m.marginals[m.last()];
    Ok(threshold_grid(&full)
        .into_iter()
        .map(|alpha| {
            let start = distinct.partition_point(|&d| !convention.test(d, alpha));
            let joint = suffix
                .iter()
                .map(|s| s[start])
                .fold(f64::NEG_INFINITY, f64::max);
            let inner: Vec<f64> = pre
                .iter()
                .map(|&s| {
                    last_rows
                        .iter()
                        .map(|q| {
                            q.iter()
                                .zip(last)
                                .filter(|(_, &v)| convention.test(s + v, alpha))
                                .map(|(p, _)| p)
                                .sum::<f64>()
                        })
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .collect();
            let iterated = RowSet(&m.prefix).upper_expectation(&inner);
            FubiniRow {
                alpha,
                joint,
                iterated,
            }
        })
        .collect())
}

/// Fubini independence of the last urn on the upper sets of `Σ φ_i(X_i)`.
pub fn fubini_independent_chain(
    m: &UrnModel,
    phis: &[BoundedFn],
    convention: Convention,
    tol: f64,
) -> Result<IndependenceReport, IndependenceError> {
    let mut track = GapTracker::new();
    for row in fubini_rows(m, phis, convention)? {
        track.observe(row.joint, row.iterated, || {
            format!("alpha={} ({})", row.alpha, convention.symbol())
        });
    }
    Ok(track.finish(IndependenceKind::FubiniChain, tol))
}

/// Both sides of Peng's iterated-envelope identity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PengCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub equal: bool,
}

fn check_grid(m: &UrnModel, f: &GridFunction) -> Result<(), IndependenceError> {
    let axes = m.range_axes();
    if f.axes().len() != axes.len() {
        return Err(IndependenceError::ArityMismatch {
            expected: axes.len(),
            actual: f.axes().len(),
        });
    }
    for (i, (a, b)) in f.axes().iter().zip(&axes).enumerate() {
        if a.labels() != b.labels() {
            return Err(IndependenceError::AxisMismatch(i));
        }
    }
    Ok(())
}

/// `lhs = max_joint E[φ]`, `rhs = max_P E_P[x -> max_Q E_Q[φ(x, ·)]]`, where
/// `P` ranges over the prefix law and `Q` over the last urn's law.
pub fn peng_check(
    m: &UrnModel,
    phi: &GridFunction,
    tol: f64,
) -> Result<PengCheck, IndependenceError> {
    check_grid(m, phi)?;
    let width = m.dims[m.last()];
    let lhs = RowSet(&m.joint).upper_expectation(phi.values());
    let last = RowSet(&m.marginals[m.last()]);
    let inner: Vec<f64> = phi
        .values()
        .chunks(width)
        .map(|section| last.upper_expectation(section))
        .collect();
    let rhs = RowSet(&m.prefix).upper_expectation(&inner);
    Ok(PengCheck {
        lhs,
        rhs,
        equal: relative_gap(lhs, rhs) <= tol,
    })
}

/// `E_V[f(X)]` against `E_V[E_V[f(x, X_n)]|_{x = X_{<n}}]`, all Choquet
/// integrals with respect to upper probabilities.
pub fn fubini_theorem(
    m: &UrnModel,
    f: &GridFunction,
    tol: f64,
) -> Result<IndependenceReport, IndependenceError> {
    check_grid(m, f)?;
    let (lhs, rhs) = fubini_theorem_sides(m, f.values());
    let mut track = GapTracker::new();
    track.observe(lhs, rhs, || "iterated Choquet integral".into());
    Ok(track.finish(IndependenceKind::FubiniTheorem, tol))
}

pub(crate) fn fubini_theorem_sides(m: &UrnModel, f: &[f64]) -> (f64, f64) {
    let width = m.dims[m.last()];
    let lhs = RowSet(&m.joint).choquet(f);
    let last = RowSet(&m.marginals[m.last()]);
    let inner: Vec<f64> = f
        .chunks(width)
        .map(|section| last.choquet(section))
        .collect();
    (lhs, RowSet(&m.prefix).choquet(&inner))
}

/// Results of [`implication_suite`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ImplicationReport {
    pub fubini: IndependenceReport,
    pub exponential: IndependenceReport,
    pub exponential_steps: IndependenceReport,
    pub mm: IndependenceReport,
    pub product_rule: IndependenceReport,
    /// Trials where Fubini held but the exponential factorization failed.
    pub fubini_without_exp: Vec<usize>,
    /// The step family passed while a product rule failed.
    pub steps_without_mm: bool,
}

impl ImplicationReport {
    pub fn coherent(&self) -> bool {
        self.fubini_without_exp.is_empty() && !self.steps_without_mm
    }

    pub fn reports(&self) -> [&IndependenceReport; 4] {
        [
            &self.fubini,
            &self.exponential,
            &self.mm,
            &self.product_rule,
        ]
    }
}

/// Runs Fubini (sampled `φ`, both conventions), exponential, MM (each
/// prefix urn against the last) and the n-fold product rule, and records
/// any break in the chain Fubini ⇒ exponential ⇒ product rule.
pub fn implication_suite(
    m: &UrnModel,
    trials: usize,
    seed: u64,
    tol: f64,
) -> Result<ImplicationReport, IndependenceError> {
    let fubini_parts: Vec<(IndependenceReport, IndependenceReport)> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let phis = random_phis(m, seed, t);
            Ok((
                fubini_independent_chain(m, &phis, Convention::Greater, tol)?,
                fubini_independent_chain(m, &phis, Convention::AtLeast, tol)?,
            ))
        })
        .collect::<Result<_, IndependenceError>>()?;
    let exp_trials = exp_random_trials(m, trials, seed, tol);

    let mut fubini = GapTracker::new();
    let mut exponential = GapTracker::new();
    let mut fubini_without_exp = Vec::new();
    for (t, ((gt, ge), (lhs, rhs, exp_ok))) in fubini_parts.iter().zip(&exp_trials).enumerate() {
        for r in [gt, ge] {
            fubini.observe(r.lhs, r.rhs, || {
                format!("trial {t} {}", r.witness.clone().unwrap_or_default())
            });
        }
        exponential.observe(*lhs, *rhs, || format!("trial {t}"));
        if gt.holds && ge.holds && !exp_ok {
            fubini_without_exp.push(t);
        }
    }
    if m.len() == 1 {
        let vacuous = |kind| IndependenceReport {
            kind,
            holds: true,
            max_gap: 0.0,
            lhs: 0.0,
            rhs: 0.0,
            witness: None,
        };
        return Ok(ImplicationReport {
            fubini: fubini.finish(IndependenceKind::FubiniChain, tol),
            exponential: exponential.finish(IndependenceKind::Exponential, tol),
            exponential_steps: vacuous(IndependenceKind::Exponential),
            mm: vacuous(IndependenceKind::Mm),
            product_rule: vacuous(IndependenceKind::ProductRule),
            fubini_without_exp,
            steps_without_mm: false,
        });
    }
    let steps = exp_step_family(m, tol)?;
    exponential.observe(steps.lhs, steps.rhs, || {
        steps
            .witness
            .clone()
            .unwrap_or_else(|| "step family".into())
    });
    let mut mm = GapTracker::new();
    for j in 0..m.last() {
        let r = mm_independent(m, j, m.last(), tol)?;
        mm.observe(r.lhs, r.rhs, || {
            format!(
                "urns {},{} {}",
                j + 1,
                m.len(),
                r.witness.clone().unwrap_or_default()
            )
        });
    }
    let mm = mm.finish(IndependenceKind::Mm, tol);
    Ok(ImplicationReport {
        fubini: fubini.finish(IndependenceKind::FubiniChain, tol),
        exponential: exponential.finish(IndependenceKind::Exponential, tol),
        steps_without_mm: steps.holds && !mm.holds,
        exponential_steps: steps,
        mm,
        product_rule: product_rule(m, tol)?,
        fubini_without_exp,
    })
}

/// Two binary urns (`X = 1` on the first atom) with members
/// `q ∈ {0.5, 0.3}`, under the product law.
pub fn ellsberg_pair() -> UrnModel {
    let urn = ellsberg_urn();
    UrnModel::product(vec![urn.clone(), urn]).expect("small model")
}

/// Binary urn `{R, B}` with `P(R) ∈ {0.5, 0.3}` and `X = 1_R`.
pub fn ellsberg_urn() -> Urn {
    let space = FiniteSpace::new(["R", "B"]).expect("valid labels");
    let credal =
        CredalSet::from_rows(&space, vec![vec![0.5, 0.5], vec![0.3, 0.7]]).expect("valid rows");
    let x = RandomVariable::new(&space, vec![1.0, 0.0]).expect("finite");
    Urn::new(credal, x).expect("same space")
}

/// Two Ellsberg urns coupled so both draws share one colour: joint members
/// put `q` on `(R, R)` and `1 - q` on `(B, B)`.
pub fn correlated_coupling() -> UrnModel {
    let urn = ellsberg_urn();
    let rows = [0.5, 0.3]
        .iter()
        .map(|&q| vec![q, 0.0, 0.0, 1.0 - q])
        .collect();
    UrnModel::with_joint(vec![urn.clone(), urn], rows).expect("small model")
}
