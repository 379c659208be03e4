//! Points, sample grids, dense component arrays and tensor fields whose
//! components are [`ExprAst`]s.
//!
//! Component arrays are stored row-major with upper indices first, then lower
//! indices; a derivative index, when present, is always the last slot. Index
//! values are zero-based in memory and one-based wherever they leave the crate
//! (residual reports, scenario keys).

use std::ops::Deref;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::expr::{central_difference, ExprAst, ExprError};
use crate::scalar::{lit, Real};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("shape mismatch: {0:?} vs {1:?}")]
    Shape(Vec<usize>, Vec<usize>),
    #[error("expected {expected} components, got {got}")]
    ComponentCount { expected: usize, got: usize },
    #[error("point has {got} coordinates, chart dimension is {expected}")]
    PointDimension { expected: usize, got: usize },
    #[error("point coordinate {0} is not finite")]
    NonFinite(usize),
    #[error("rank {0} exceeds the supported maximum of 4")]
    Rank(usize),
    #[error("component {index}: {source}")]
    Expr {
        index: String,
        #[source]
        source: ExprError,
    },
}

/// A point of the chart.
#[derive(Debug, Clone, PartialEq)]
pub struct Point<T>(Vec<T>);

impl<T: Real> Point<T> {
    pub fn new(coords: Vec<T>) -> Result<Self, TensorError> {
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(TensorError::NonFinite(i + 1));
        }
        Ok(Point(coords))
    }

    pub fn origin(n: usize) -> Self {
        Point(vec![T::zero(); n])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[T] {
        &self.0
    }
}

impl<T> Deref for Point<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.0
    }
}

/// How partial derivatives are taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiffMode<T> {
    Exact,
    Fd(T),
}

impl<T: Real> DiffMode<T> {
    pub fn is_exact(&self) -> bool {
        matches!(self, DiffMode::Exact)
    }
}

/// Dense component array of shape `[n; rank]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    n: usize,
    rank: usize,
    data: Vec<T>,
}

impl<T: Real> Dense<T> {
    pub fn zeros(n: usize, rank: usize) -> Self {
        Dense {
            n,
            rank,
            data: vec![T::zero(); n.pow(rank as u32)],
        }
    }

    pub fn from_vec(n: usize, rank: usize, data: Vec<T>) -> Result<Self, TensorError> {
        let expected = n.pow(rank as u32);
        if data.len() != expected {
            return Err(TensorError::ComponentCount {
                expected,
                got: data.len(),
            });
        }
        Ok(Dense { n, rank, data })
    }

    pub fn from_fn(n: usize, rank: usize, mut f: impl FnMut(&[usize]) -> T) -> Self {
        let mut out = Self::zeros(n, rank);
        let mut idx = vec![0; rank];
        for flat in 0..out.data.len() {
            unflatten(flat, n, &mut idx);
            out.data[flat] = f(&idx);
        }
        out
    }

    pub fn kronecker(n: usize) -> Self {
        Self::from_fn(n, 2, |ix| if ix[0] == ix[1] { T::one() } else { T::zero() })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn shape(&self) -> Vec<usize> {
        vec![self.n; self.rank]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank);
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    pub fn get(&self, idx: &[usize]) -> T {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: T) {
        let o = self.offset(idx);
        self.data[o] = v;
    }

    #[inline]
    pub fn at1(&self, i: usize) -> T {
        self.data[i]
    }

    #[inline]
    pub fn at2(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn at3(&self, i: usize, j: usize, k: usize) -> T {
        self.data[(i * self.n + j) * self.n + k]
    }

    #[inline]
    pub fn at4(&self, i: usize, j: usize, k: usize, l: usize) -> T {
        self.data[((i * self.n + j) * self.n + k) * self.n + l]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Dense {
            n: self.n,
            rank: self.rank,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert_eq!(self.shape(), other.shape(), "shape mismatch");
        Dense {
            n: self.n,
            rank: self.rank,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Swaps two index slots (zero-based slot numbers).
    pub fn swap_slots(&self, a: usize, b: usize) -> Self {
        Self::from_fn(self.n, self.rank, |ix| {
            let mut src = ix.to_vec();
            src.swap(a, b);
            self.get(&src)
        })
    }

    /// Converts a flat offset into a zero-based multi-index.
    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.rank];
        unflatten(flat, self.n, &mut idx);
        idx
    }
}

fn unflatten(mut flat: usize, n: usize, idx: &mut [usize]) {
    for slot in idx.iter_mut().rev() {
        *slot = flat % n;
        flat /= n;
    }
}

/// Largest componentwise deviation `max |a - b|` and where it occurs
/// (one-based multi-index). NaN components count as the largest deviation.
pub fn max_abs_diff<T: Real>(a: &Dense<T>, b: &Dense<T>) -> Result<(T, Vec<usize>), TensorError> {
    if a.shape() != b.shape() {
        return Err(TensorError::Shape(a.shape(), b.shape()));
    }
    let mut best = T::zero();
    let mut at = 0;
    for (flat, (&x, &y)) in a.data.iter().zip(&b.data).enumerate() {
        let d = (x - y).abs();
        if d.is_nan() {
            if !best.is_nan() {
                best = d;
                at = flat;
            }
        } else if !best.is_nan() && d > best {
            best = d;
            at = flat;
        }
    }
    Ok((best, a.multi_index(at).into_iter().map(|i| i + 1).collect()))
}

/// Value and first partial derivatives of a field at one point. The gradient
/// carries the differentiation index as its last slot.
#[derive(Debug, Clone)]
pub struct Jet<T> {
    pub value: Dense<T>,
    pub grad: Dense<T>,
}

/// Tensor field of valence `(upper, lower)` with expression components.
#[derive(Debug, Clone)]
pub struct TensorField<T = f64> {
    n: usize,
    upper: usize,
    lower: usize,
    comps: Vec<ExprAst<T>>,
}

impl<T: Real> TensorField<T> {
    pub fn new(
        n: usize,
        upper: usize,
        lower: usize,
        comps: Vec<ExprAst<T>>,
    ) -> Result<Self, TensorError> {
        let rank = upper + lower;
        if rank > 4 {
            return Err(TensorError::Rank(rank));
        }
        let expected = n.pow(rank as u32);
        if comps.len() != expected {
            return Err(TensorError::ComponentCount {
                expected,
                got: comps.len(),
            });
        }
        Ok(TensorField {
            n,
            upper,
            lower,
            comps,
        })
    }

    pub fn from_fn(
        n: usize,
        upper: usize,
        lower: usize,
        mut f: impl FnMut(&[usize]) -> ExprAst<T>,
    ) -> Self {
        let rank = upper + lower;
        assert!(rank <= 4, "rank {rank} exceeds 4");
        let len = n.pow(rank as u32);
        let mut idx = vec![0; rank];
        let comps = (0..len)
            .map(|flat| {
                unflatten(flat, n, &mut idx);
                f(&idx)
            })
            .collect();
        TensorField {
            n,
            upper,
            lower,
            comps,
        }
    }

    /// Parses one expression per component, in storage order.
    pub fn parse<S: AsRef<str>>(
        n: usize,
        upper: usize,
        lower: usize,
        texts: &[S],
    ) -> Result<Self, TensorError> {
        let rank = upper + lower;
        let comps = texts
            .iter()
            .enumerate()
            .map(|(flat, s)| {
                ExprAst::parse(s.as_ref(), n).map_err(|source| {
                    let mut idx = vec![0; rank];
                    unflatten(flat, n, &mut idx);
                    TensorError::Expr {
                        index: one_based_key(&idx),
                        source,
                    }
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(n, upper, lower, comps)
    }

    pub fn zeros(n: usize, upper: usize, lower: usize) -> Self {
        Self::from_fn(n, upper, lower, |_| ExprAst::zero())
    }

    /// Constant field `δ^i_j`.
    pub fn kronecker(n: usize) -> Self {
        Self::from_fn(n, 1, 1, |ix| {
            if ix[0] == ix[1] {
                ExprAst::one()
            } else {
                ExprAst::zero()
            }
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn valence(&self) -> (usize, usize) {
        (self.upper, self.lower)
    }

    pub fn rank(&self) -> usize {
        self.upper + self.lower
    }

    pub fn components(&self) -> &[ExprAst<T>] {
        &self.comps
    }

    pub fn comp(&self, idx: &[usize]) -> &ExprAst<T> {
        let o = idx.iter().fold(0, |acc, &i| acc * self.n + i);
        &self.comps[o]
    }

    pub fn map(&self, f: impl Fn(&ExprAst<T>) -> ExprAst<T>) -> Self {
        TensorField {
            n: self.n,
            upper: self.upper,
            lower: self.lower,
            comps: self.comps.iter().map(f).collect(),
        }
    }

    pub fn zip_with(
        &self,
        other: &Self,
        f: impl Fn(&ExprAst<T>, &ExprAst<T>) -> ExprAst<T>,
    ) -> Self {
        assert_eq!(
            (self.n, self.upper, self.lower),
            (other.n, other.upper, other.lower),
            "valence mismatch"
        );
        TensorField {
            n: self.n,
            upper: self.upper,
            lower: self.lower,
            comps: self
                .comps
                .iter()
                .zip(&other.comps)
                .map(|(a, b)| f(a, b))
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|a| a.scale(s))
    }

    pub fn neg(&self) -> Self {
        self.map(|a| a.neg())
    }

    pub fn check_point(&self, x: &[T]) -> Result<(), TensorError> {
        if x.len() != self.n {
            return Err(TensorError::PointDimension {
                expected: self.n,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Componentwise evaluation.
    pub fn eval(&self, x: &[T]) -> Dense<T> {
        Dense {
            n: self.n,
            rank: self.rank(),
            data: self.comps.iter().map(|c| c.eval(x)).collect(),
        }
    }

    /// Componentwise partial derivative along `x^k` (one-based).
    pub fn partial(&self, k: usize, x: &[T], mode: DiffMode<T>) -> Dense<T> {
        let data = match mode {
            DiffMode::Exact => self.comps.iter().map(|c| c.diff(k).eval(x)).collect(),
            DiffMode::Fd(h) => self.comps.iter().map(|c| c.diff_fd(k, x, h)).collect(),
        };
        Dense {
            n: self.n,
            rank: self.rank(),
            data,
        }
    }

    /// Field of exact partial derivatives along `x^k` (one-based).
    pub fn derivative(&self, k: usize) -> Self {
        self.map(|c| c.diff(k))
    }

    /// Total node count over all components.
    pub fn size(&self) -> usize {
        self.comps.iter().map(ExprAst::size).sum()
    }
}

/// A field paired with its exact partial derivative fields, so repeated jet
/// evaluation does not differentiate symbolically at every point.
#[derive(Debug, Clone)]
pub struct JetField<T = f64> {
    field: TensorField<T>,
    derivatives: Vec<TensorField<T>>,
}

impl<T: Real> JetField<T> {
    pub fn new(field: TensorField<T>) -> Self {
        let derivatives = (1..=field.dim()).map(|k| field.derivative(k)).collect();
        JetField { field, derivatives }
    }

    pub fn field(&self) -> &TensorField<T> {
        &self.field
    }

    pub fn value(&self, x: &[T]) -> Dense<T> {
        self.field.eval(x)
    }

    pub fn jet(&self, x: &[T], mode: DiffMode<T>) -> Jet<T> {
        let n = self.field.dim();
        let rank = self.field.rank();
        let value = self.field.eval(x);
        let mut grad = Dense::zeros(n, rank + 1);
        for (k, dfield) in self.derivatives.iter().enumerate() {
            for (flat, c) in self.field.comps.iter().enumerate() {
                let d = match mode {
                    DiffMode::Exact => dfield.comps[flat].eval(x),
                    DiffMode::Fd(h) => c.diff_fd(k + 1, x, h),
                };
                grad.data[flat * n + k] = d;
            }
        }
        Jet { value, grad }
    }
}

/// Central-difference gradient of an arbitrary array-valued function, used by
/// objects that are only available pointwise.
pub fn fd_gradient<T: Real>(f: impl Fn(&[T]) -> Dense<T>, x: &[T], h: T) -> Dense<T> {
    let base = f(x);
    let n = x.len();
    let mut grad = Dense::zeros(base.dim(), base.rank() + 1);
    for k in 1..=n {
        for flat in 0..base.data.len() {
            let d = central_difference(|p| f(p).data[flat], k, x, h);
            grad.data[flat * n + (k - 1)] = d;
        }
    }
    grad
}

pub(crate) fn one_based_key(idx: &[usize]) -> String {
    idx.iter()
        .map(|i| (i + 1).to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Per-coordinate closed interval.
pub type Bounds<T> = Vec<(T, T)>;

/// Deterministic sample grid.
#[derive(Debug, Clone)]
pub struct Grid<T = f64> {
    points: Vec<Point<T>>,
    seed: u64,
    bounds: Bounds<T>,
}

impl<T: Real> Grid<T> {
    pub const DEFAULT_COUNT: usize = 50;
    pub const DEFAULT_HALF_WIDTH: f64 = 0.9;

    pub fn default_bounds(n: usize) -> Bounds<T> {
        let w = lit::<T>(Self::DEFAULT_HALF_WIDTH);
        vec![(-w, w); n]
    }

    /// Uniform samples inside `bounds` drawn from a ChaCha8 stream seeded by
    /// `seed`; identical inputs give bit-identical grids on every platform.
    pub fn generate(seed: u64, count: usize, bounds: Bounds<T>) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = (0..count)
            .map(|_| {
                Point(
                    bounds
                        .iter()
                        .map(|&(lo, hi)| {
                            let u: f64 = rng.random();
                            lo + (hi - lo) * lit(u)
                        })
                        .collect(),
                )
            })
            .collect();
        Grid {
            points,
            seed,
            bounds,
        }
    }

    /// Grid made of explicitly given points (seed 0).
    pub fn from_points(points: Vec<Point<T>>, bounds: Bounds<T>) -> Self {
        Grid {
            points,
            seed: 0,
            bounds,
        }
    }

    pub fn points(&self) -> &[Point<T>] {
        &self.points
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn bounds(&self) -> &Bounds<T> {
        &self.bounds
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Evaluates `f` at every point in parallel and keeps the largest result;
    /// ties resolve to the earliest point so the outcome is deterministic.
    pub fn max_residual<F>(&self, f: F) -> Residual<T>
    where
        F: Fn(&Point<T>) -> (T, Vec<usize>) + Sync + Send,
    {
        let per_point: Vec<(T, Vec<usize>)> = self.points.par_iter().map(&f).collect();
        let mut best = Residual::zero();
        for (p, (value, index)) in self.points.iter().zip(per_point) {
            best.absorb(Residual {
                value,
                point: p.coords().to_vec(),
                index,
            });
        }
        best
    }
}

/// Maximum residual over a grid with its location.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual<T = f64> {
    pub value: T,
    pub point: Vec<T>,
    /// One-based component multi-index.
    pub index: Vec<usize>,
}

impl<T: Real> Residual<T> {
    pub fn zero() -> Self {
        Residual {
            value: T::zero(),
            point: Vec::new(),
            index: Vec::new(),
        }
    }

    /// Keeps the larger of the two; NaN dominates.
    pub fn absorb(&mut self, other: Residual<T>) {
        if self.value.is_nan() {
            return;
        }
        if other.value.is_nan() || other.value > self.value || self.point.is_empty() {
            *self = other;
        }
    }

    pub fn passes(&self, tol: T) -> bool {
        self.value <= tol
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronecker_and_zero_fields() {
        let d = TensorField::<f64>::kronecker(3);
        assert_eq!(d.eval(&[0.1, 0.2, 0.3]), Dense::kronecker(3));
        let z = TensorField::<f64>::zeros(2, 1, 2);
        assert!(z.eval(&[0.5, 0.5]).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn component_slot_evaluates() {
        let t = TensorField::<f64>::parse(2, 1, 1, &["0", "x1*x2", "0", "0"]).unwrap();
        assert_eq!(t.eval(&[2.0, 3.0]).at2(0, 1), 6.0);
    }

    #[test]
    fn partial_modes() {
        let t = TensorField::<f64>::parse(2, 0, 1, &["x1^3", "7"]).unwrap();
        let x = [1.0, 0.4];
        let ex = t.partial(1, &x, DiffMode::Exact);
        assert_eq!(ex.data(), &[3.0, 0.0]);
        let fd = t.partial(1, &x, DiffMode::Fd(1e-4));
        assert!((fd.at1(0) - 3.0).abs() < 1e-7);
        assert_eq!(fd.at1(1), 0.0);
    }

    #[test]
    fn jet_matches_partial() {
        let t = TensorField::<f64>::parse(2, 1, 1, &["x1*x2", "sin(x1)", "x2^2", "exp(x1*x2)"]).unwrap();
        let jf = JetField::new(t.clone());
        let x = [0.3, -0.4];
        let jet = jf.jet(&x, DiffMode::Exact);
        for k in 0..2 {
            let p = t.partial(k + 1, &x, DiffMode::Exact);
            for i in 0..2 {
                for j in 0..2 {
                    assert_eq!(jet.grad.at3(i, j, k), p.at2(i, j));
                }
            }
        }
    }

    #[test]
    fn max_abs_diff_examples() {
        let a = Dense::from_vec(2, 1, vec![1.0, 2.0]).unwrap();
        let b = Dense::from_vec(2, 1, vec![1.0, 2.5]).unwrap();
        assert_eq!(max_abs_diff(&a, &a).unwrap().0, 0.0);
        assert_eq!(max_abs_diff(&a, &b).unwrap(), (0.5, vec![2]));
        let c = Dense::<f64>::zeros(2, 2);
        assert!(matches!(max_abs_diff(&a, &c), Err(TensorError::Shape(..))));
    }

    #[test]
    fn grid_is_reproducible_and_bounded() {
        let g1 = Grid::<f64>::generate(11, 50, Grid::default_bounds(3));
        let g2 = Grid::<f64>::generate(11, 50, Grid::default_bounds(3));
        assert_eq!(g1.points(), g2.points());
        assert!(g1
            .points()
            .iter()
            .all(|p| p.iter().all(|&c| (-0.9..=0.9).contains(&c))));
        let g3 = Grid::<f64>::generate(12, 50, Grid::default_bounds(3));
        assert_ne!(g1.points(), g3.points());
    }

    #[test]
    fn point_rejects_non_finite() {
        assert!(Point::new(vec![0.0, f64::NAN]).is_err());
        assert!(Point::new(vec![0.0, 1.0]).is_ok());
    }

    #[test]
    fn rank_limit() {
        assert!(matches!(
            TensorField::<f64>::new(2, 3, 2, vec![]),
            Err(TensorError::Rank(5))
        ));
    }
}
