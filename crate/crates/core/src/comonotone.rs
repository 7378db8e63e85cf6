//! Comonotonicity on product grids and dyadic chain decompositions.
//!
//! A [`GridFunction`] tabulates a function on the product of finitely many
//! axes (row-major, last axis fastest). The chain decomposition of a
//! positive grid function at resolution `p` writes its dyadic floor
//! `f_p = u_p(f)` as a positive combination of indicators of nested upper
//! sets `{f >= i / 2^p}`, which is the form Choquet integrals split over by
//! comonotonic additivity.

use thiserror::Error;

use crate::measure::{FiniteSpace, SetFunction};

/// Largest grid handled by the exhaustive (quadratic) checks.
pub const MAX_GRID_POINTS: usize = 4096;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ComonotoneError {
    #[error("grid functions have different axes")]
    AxisMismatch,
    #[error("expected a two-dimensional grid, got {0} axes")]
    NotTwoDimensional(usize),
    #[error("grid has {points} points, cap is {cap}")]
    TooLarge { points: usize, cap: usize },
    #[error("expected {expected} values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("non-finite value at grid point {0}")]
    NonFinite(usize),
    #[error("dyadic floor of negative input {0}")]
    NegativeInput(f64),
    #[error("chain decomposition needs a strictly positive function (min {0})")]
    NonPositiveFunction(f64),
}

/// A bounded function tabulated on one axis.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundedFn {
    axis: FiniteSpace,
    values: Vec<f64>,
}

impl BoundedFn {
    pub fn new(axis: &FiniteSpace, values: Vec<f64>) -> Result<Self, ComonotoneError> {
        if values.len() != axis.len() {
            return Err(ComonotoneError::LengthMismatch {
                expected: axis.len(),
                actual: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(ComonotoneError::NonFinite(k));
        }
        Ok(Self {
            axis: axis.clone(),
            values,
        })
    }

    pub fn axis(&self) -> &FiniteSpace {
        &self.axis
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// A real function on a finite product grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    axes: Vec<FiniteSpace>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(axes: Vec<FiniteSpace>, values: Vec<f64>) -> Result<Self, ComonotoneError> {
        let expected = axes.iter().map(FiniteSpace::len).product::<usize>();
        if values.len() != expected {
            return Err(ComonotoneError::LengthMismatch {
                expected,
                actual: values.len(),
            });
        }
        if expected > MAX_GRID_POINTS {
            return Err(ComonotoneError::TooLarge {
                points: expected,
                cap: MAX_GRID_POINTS,
            });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(ComonotoneError::NonFinite(k));
        }
        Ok(Self { axes, values })
    }

    /// Tabulates `f` at every grid point (coordinates are axis indices).
    pub fn from_fn(
        axes: Vec<FiniteSpace>,
        f: impl Fn(&[usize]) -> f64,
    ) -> Result<Self, ComonotoneError> {
        let dims: Vec<usize> = axes.iter().map(FiniteSpace::len).collect();
        let total = dims.iter().product::<usize>();
        let mut coords = vec![0; dims.len()];
        let mut values = Vec::with_capacity(total);
        for idx in 0..total {
            unflatten(idx, &dims, &mut coords);
            values.push(f(&coords));
        }
        Self::new(axes, values)
    }

    pub fn axes(&self) -> &[FiniteSpace] {
        &self.axes
    }

    pub fn dims(&self) -> Vec<usize> {
        self.axes.iter().map(FiniteSpace::len).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn at(&self, coords: &[usize]) -> f64 {
        self.values[flatten(coords, &self.dims())]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        Self {
            axes: self.axes.clone(),
            values,
        }
    }

    /// Indicator of a set of grid points.
    pub fn indicator(&self, members: &[bool]) -> Self {
        self.with_values(members.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect())
    }
}

pub(crate) fn flatten(coords: &[usize], dims: &[usize]) -> usize {
    coords.iter().zip(dims).fold(0, |acc, (&c, &d)| acc * d + c)
}

pub(crate) fn unflatten(mut idx: usize, dims: &[usize], out: &mut [usize]) {
    for axis in (0..dims.len()).rev() {
        out[axis] = idx % dims[axis];
        idx /= dims[axis];
    }
}

/// Outcome of a comonotonicity test.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Comonotonicity {
    Comonotonic,
    /// Two points where the functions move in opposite directions.
    Violated(usize, usize),
}

impl Comonotonicity {
    pub fn holds(self) -> bool {
        self == Comonotonicity::Comonotonic
    }
}

fn comonotone_vectors(f: &[f64], g: &[f64]) -> Comonotonicity {
    for u in 0..f.len() {
        for v in (u + 1)..f.len() {
            if (f[u] - f[v]) * (g[u] - g[v]) < 0.0 {
                return Comonotonicity::Violated(u, v);
            }
        }
    }
    Comonotonicity::Comonotonic
}

/// `[f(u) - f(v)][g(u) - g(v)] >= 0` for every pair of grid points.
pub fn are_comonotonic(
    f: &GridFunction,
    g: &GridFunction,
) -> Result<Comonotonicity, ComonotoneError> {
    if f.axes != g.axes {
        return Err(ComonotoneError::AxisMismatch);
    }
    Ok(comonotone_vectors(&f.values, &g.values))
}

/// Whether every class member pair is comonotonic.
pub fn is_comonotonic_class(class: &[GridFunction]) -> Result<bool, ComonotoneError> {
    for (i, f) in class.iter().enumerate() {
        for g in &class[i + 1..] {
            if !are_comonotonic(f, g)?.holds() {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Whether the sections obtained by fixing coordinate `axis` of a 2-D grid
/// function are pairwise comonotonic. `axis = 0` gives the x1-sections
/// `f(x, .)`.
pub fn has_comonotonic_sections(f: &GridFunction, axis: usize) -> Result<bool, ComonotoneError> {
    if f.axes.len() != 2 {
        return Err(ComonotoneError::NotTwoDimensional(f.axes.len()));
    }
    let dims = f.dims();
    let section = |fixed: usize| -> Vec<f64> {
        (0..dims[1 - axis])
            .map(|free| {
                let coords = if axis == 0 {
                    [fixed, free]
                } else {
                    [free, fixed]
                };
                f.at(&coords)
            })
            .collect()
    };
    let sections: Vec<Vec<f64>> = (0..dims[axis]).map(section).collect();
    for (i, s) in sections.iter().enumerate() {
        for t in &sections[i + 1..] {
            if !comonotone_vectors(s, t).holds() {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Comonotonic x1- and x2-sections.
pub fn is_slice_comonotonic(f: &GridFunction) -> Result<bool, ComonotoneError> {
    Ok(has_comonotonic_sections(f, 0)? && has_comonotonic_sections(f, 1)?)
}

/// A set of grid points whose indicator has comonotonic x1-sections.
pub fn is_comonotonic_set(grid: &GridFunction, members: &[bool]) -> Result<bool, ComonotoneError> {
    has_comonotonic_sections(&grid.indicator(members), 0)
}

/// `(x_1, ..., x_d) -> exp(phi_1(x_1) + ... + phi_d(x_d))`.
pub fn exp_sum_function(phis: &[BoundedFn]) -> Result<GridFunction, ComonotoneError> {
    let axes: Vec<FiniteSpace> = phis.iter().map(|p| p.axis.clone()).collect();
    GridFunction::from_fn(axes, |coords| {
        coords
            .iter()
            .zip(phis)
            .map(|(&c, phi)| phi.values[c])
            .sum::<f64>()
            .exp()
    })
}

/// `u_p(r)`: the largest `i / 2^p` not exceeding `r`.
pub fn dyadic_floor(r: f64, p: u32) -> Result<f64, ComonotoneError> {
    if r < 0.0 || r.is_nan() {
        return Err(ComonotoneError::NegativeInput(r));
    }
    let scale = 2f64.powi(p as i32);
    Ok((r * scale).floor() / scale)
}

/// One distinct upper set of a chain decomposition.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainLevel {
    /// Dyadic indices `first..=last` share this set.
    pub first: u64,
    pub last: u64,
    /// `last / 2^p`; the set equals `{f >= alpha}`.
    pub alpha: f64,
    /// `(last - first + 1) / 2^p`.
    pub weight: f64,
    pub members: Vec<bool>,
}

/// Nested upper sets `A_1 ⊇ A_2 ⊇ ...` with positive weights such that
/// `f_p = sum_i w_i 1_{A_i}`.
///
/// Levels `i / 2^p` that produce the same set are stored once with their
/// weights summed; [`ChainDecomposition::dyadic_levels`] expands them back.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainDecomposition {
    resolution: u32,
    axes: Vec<FiniteSpace>,
    levels: Vec<ChainLevel>,
}

impl ChainDecomposition {
    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn levels(&self) -> &[ChainLevel] {
        &self.levels
    }

    /// `(i, alpha_i, weight_i, A_i)` for every dyadic level `i = 1..=K`.
    pub fn dyadic_levels(&self) -> impl Iterator<Item = (u64, f64, f64, &[bool])> + '_ {
        let scale = 2f64.powi(self.resolution as i32);
        self.levels.iter().flat_map(move |level| {
            (level.first..=level.last)
                .map(move |i| (i, i as f64 / scale, 1.0 / scale, level.members.as_slice()))
        })
    }

    /// `f_p = sum_i w_i 1_{A_i}`.
    pub fn reconstruct(&self) -> GridFunction {
        let len = self.axes.iter().map(FiniteSpace::len).product::<usize>();
        let mut values = vec![0.0; len];
        for level in &self.levels {
            for (v, &inside) in values.iter_mut().zip(&level.members) {
                if inside {
                    *v += level.weight;
                }
            }
        }
        GridFunction {
            axes: self.axes.clone(),
            values,
        }
    }

    /// Indicators of the chain sets, outermost first.
    pub fn indicators(&self) -> Vec<GridFunction> {
        self.levels
            .iter()
            .map(|l| GridFunction {
                axes: self.axes.clone(),
                values: l
                    .members
                    .iter()
                    .map(|&b| if b { 1.0 } else { 0.0 })
                    .collect(),
            })
            .collect()
    }

    pub fn is_nested(&self) -> bool {
        self.levels.windows(2).all(|w| {
            w[1].members
                .iter()
                .zip(&w[0].members)
                .all(|(&inner, &outer)| !inner || outer)
        })
    }
}

/// Decomposes the dyadic floor of a strictly positive grid function into a
/// chain of upper sets `{f >= i / 2^p}`, `i = 1..=floor(max f * 2^p)`.
pub fn chain_decompose(f: &GridFunction, p: u32) -> Result<ChainDecomposition, ComonotoneError> {
    let min = f.min();
    if min <= 0.0 {
        return Err(ComonotoneError::NonPositiveFunction(min));
    }
    let scale = 2f64.powi(p as i32);
    // f >= i / 2^p  <=>  floor(f * 2^p) >= i for integer i
    let index: Vec<u64> = f
        .values
        .iter()
        .map(|&v| (v * scale).floor() as u64)
        .collect();
    let mut distinct: Vec<u64> = index.iter().copied().filter(|&k| k > 0).collect();
    distinct.sort_unstable();
    distinct.dedup();
    let mut levels = Vec::with_capacity(distinct.len());
    let mut prev = 0u64;
    for &k in &distinct {
        levels.push(ChainLevel {
            first: prev + 1,
            last: k,
            alpha: k as f64 / scale,
            weight: (k - prev) as f64 / scale,
            members: index.iter().map(|&i| i >= k).collect(),
        });
        prev = k;
    }
    Ok(ChainDecomposition {
        resolution: p,
        axes: f.axes.clone(),
        levels,
    })
}

/// `sum_i w_i V(A_i)` for a set function over the grid points.
pub fn choquet_via_chain<V: SetFunction + ?Sized>(v: &V, chain: &ChainDecomposition) -> f64 {
    chain
        .levels
        .iter()
        .map(|level| {
            let atoms: Vec<usize> = (0..level.members.len())
                .filter(|&i| level.members[i])
                .collect();
            level.weight * v.measure(&atoms)
        })
        .sum()
}
