//! Non-symmetric affine connections, their symmetric/torsion split and the
//! four kinds of covariant differentiation.
//!
//! Kinds differ in which lower slot of `L` receives the differentiation index
//! `k`:
//!
//! | kind | upper index `i`     | lower index `j`      |
//! |------|---------------------|----------------------|
//! | 1    | `+ L^i_{αk} a^α`    | `- L^α_{jk} a_α`     |
//! | 2    | `+ L^i_{kα} a^α`    | `- L^α_{kj} a_α`     |
//! | 3    | `+ L^i_{αk} a^α`    | `- L^α_{kj} a_α`     |
//! | 4    | `+ L^i_{kα} a^α`    | `- L^α_{jk} a_α`     |
//!
//! Higher valences apply the rule slot by slot.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::expr::ExprAst;
use crate::scalar::{lit, Real};
use crate::tensor::{DiffMode, Dense, Jet, JetField, TensorError, TensorField};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpaceError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("covariant derivative not supported for valence ({0},{1}); at most rank 3")]
    UnsupportedValence(usize, usize),
    #[error("connection must have valence (1,2), got ({0},{1})")]
    ConnectionValence(usize, usize),
    #[error("chart dimension must be at least 2, got {0}")]
    Dimension(usize),
    #[error("dimension mismatch: connection has N={connection}, field has N={field}")]
    DimensionMismatch { connection: usize, field: usize },
    #[error("connection is not symmetric (max |S^i_jk - S^i_kj| = {0:e})")]
    NotSymmetric(f64),
    #[error("bad component key '{0}': expected \"i,j,k\" with indices in 1..N")]
    ComponentKey(String),
}

/// Kind of covariant differentiation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kind {
    First,
    Second,
    Third,
    Fourth,
}

impl Kind {
    pub const ALL: [Kind; 4] = [Kind::First, Kind::Second, Kind::Third, Kind::Fourth];

    pub fn from_index(k: u8) -> Option<Self> {
        match k {
            1 => Some(Kind::First),
            2 => Some(Kind::Second),
            3 => Some(Kind::Third),
            4 => Some(Kind::Fourth),
            _ => None,
        }
    }

    pub fn index(self) -> u8 {
        match self {
            Kind::First => 1,
            Kind::Second => 2,
            Kind::Third => 3,
            Kind::Fourth => 4,
        }
    }

    /// Upper indices contract `L^i_{αk}` (else `L^i_{kα}`).
    fn upper_alpha_first(self) -> bool {
        matches!(self, Kind::First | Kind::Third)
    }

    /// Lower indices contract `L^α_{jk}` (else `L^α_{kj}`).
    fn lower_j_first(self) -> bool {
        matches!(self, Kind::First | Kind::Fourth)
    }
}

/// Coefficients `L^i_{jk}` of an affine connection, no symmetry assumed.
#[derive(Debug, Clone)]
pub struct ConnectionField<T = f64> {
    coeffs: TensorField<T>,
}

impl<T: Real> ConnectionField<T> {
    pub fn new(coeffs: TensorField<T>) -> Result<Self, SpaceError> {
        let (p, q) = coeffs.valence();
        if (p, q) != (1, 2) {
            return Err(SpaceError::ConnectionValence(p, q));
        }
        if coeffs.dim() < 2 {
            return Err(SpaceError::Dimension(coeffs.dim()));
        }
        Ok(ConnectionField { coeffs })
    }

    pub fn zero(n: usize) -> Self {
        ConnectionField {
            coeffs: TensorField::zeros(n, 1, 2),
        }
    }

    pub fn from_fn(n: usize, f: impl FnMut(&[usize]) -> ExprAst<T>) -> Self {
        ConnectionField {
            coeffs: TensorField::from_fn(n, 1, 2, f),
        }
    }

    /// Builds a connection from sparse `"i,j,k"` (one-based) keys; absent
    /// components are zero.
    pub fn from_sparse<K, V>(n: usize, entries: &BTreeMap<K, V>) -> Result<Self, SpaceError>
    where
        K: AsRef<str>,
        V: AsRef<str>,
    {
        if n < 2 {
            return Err(SpaceError::Dimension(n));
        }
        let mut comps = vec![ExprAst::zero(); n * n * n];
        for (key, text) in entries {
            let idx = parse_key(key.as_ref(), n, 3)?;
            let expr = ExprAst::parse(text.as_ref(), n).map_err(|source| TensorError::Expr {
                index: key.as_ref().to_string(),
                source,
            })?;
            comps[(idx[0] * n + idx[1]) * n + idx[2]] = expr;
        }
        Self::new(TensorField::new(n, 1, 2, comps)?)
    }

    pub fn dim(&self) -> usize {
        self.coeffs.dim()
    }

    pub fn coeffs(&self) -> &TensorField<T> {
        &self.coeffs
    }

    pub fn eval(&self, x: &[T]) -> Dense<T> {
        self.coeffs.eval(x)
    }

    pub fn add(&self, other: &TensorField<T>) -> Self {
        ConnectionField {
            coeffs: self.coeffs.add(other),
        }
    }

    /// Symmetric part and torsion.
    pub fn split(&self) -> ConnectionSplit<T> {
        let half = lit::<T>(0.5);
        let n = self.dim();
        let l = &self.coeffs;
        let sym = TensorField::from_fn(n, 1, 2, |ix| {
            (l.comp(&[ix[0], ix[1], ix[2]]) + l.comp(&[ix[0], ix[2], ix[1]])).scale(half)
        });
        let torsion = TensorField::from_fn(n, 1, 2, |ix| {
            (l.comp(&[ix[0], ix[1], ix[2]]) - l.comp(&[ix[0], ix[2], ix[1]])).scale(half)
        });
        ConnectionSplit { sym, torsion }
    }
}

/// Parses a one-based `"i,j,..."` key into zero-based indices.
pub fn parse_key(key: &str, n: usize, rank: usize) -> Result<Vec<usize>, SpaceError> {
    let bad = || SpaceError::ComponentKey(key.to_string());
    let idx = key
        .split(',')
        .map(|s| s.trim().parse::<usize>().map_err(|_| bad()))
        .collect::<Result<Vec<_>, _>>()?;
    if idx.len() != rank || idx.iter().any(|&i| i == 0 || i > n) {
        return Err(bad());
    }
    Ok(idx.into_iter().map(|i| i - 1).collect())
}

/// `S̃^i_{jk} = ½(L^i_{jk} + L^i_{kj})`, `T̃^i_{jk} = ½(L^i_{jk} - L^i_{kj})`.
#[derive(Debug, Clone)]
pub struct ConnectionSplit<T = f64> {
    pub sym: TensorField<T>,
    pub torsion: TensorField<T>,
}

impl<T: Real> ConnectionSplit<T> {
    /// The associated symmetric connection.
    pub fn sym_connection(&self) -> ConnectionField<T> {
        ConnectionField {
            coeffs: self.sym.clone(),
        }
    }
}

/// Covariant derivative of the kind `kind` from a pointwise jet: `conn` holds
/// `L^i_{jk}` at the point, `jet` the value and partials of a tensor with
/// `upper` contravariant slots leading. The derivative index is appended last.
pub fn covariant_from_jet<T: Real>(conn: &Dense<T>, jet: &Jet<T>, upper: usize, kind: Kind) -> Dense<T> {
    let n = conn.dim();
    let value = &jet.value;
    let rank = value.rank();
    let mut out = jet.grad.clone();
    let mut src = vec![0usize; rank];
    for flat in 0..out.data().len() {
        let idx = out.multi_index(flat);
        let k = idx[rank];
        let mut acc = T::zero();
        for s in 0..rank {
            let free = idx[s];
            src.copy_from_slice(&idx[..rank]);
            for a in 0..n {
                src[s] = a;
                let v = value.get(&src);
                if s < upper {
                    let c = if kind.upper_alpha_first() {
                        conn.at3(free, a, k)
                    } else {
                        conn.at3(free, k, a)
                    };
                    acc += c * v;
                } else {
                    let c = if kind.lower_j_first() {
                        conn.at3(a, free, k)
                    } else {
                        conn.at3(a, k, free)
                    };
                    acc -= c * v;
                }
            }
        }
        out.data_mut()[flat] += acc;
    }
    out
}

fn check_valence<T: Real>(l: &ConnectionField<T>, t: &TensorField<T>) -> Result<(), SpaceError> {
    let (p, q) = t.valence();
    if p + q > 3 {
        return Err(SpaceError::UnsupportedValence(p, q));
    }
    if t.dim() != l.dim() {
        return Err(SpaceError::DimensionMismatch {
            connection: l.dim(),
            field: t.dim(),
        });
    }
    Ok(())
}

/// Covariant derivative of the given kind of `t` at `x`; output rank is
/// `p + q + 1` with the differentiation index last.
pub fn covdiff<T: Real>(
    l: &ConnectionField<T>,
    t: &TensorField<T>,
    kind: Kind,
    x: &[T],
    mode: DiffMode<T>,
) -> Result<Dense<T>, SpaceError> {
    check_valence(l, t)?;
    t.check_point(x)?;
    let jet = JetField::new(t.clone()).jet(x, mode);
    Ok(covariant_from_jet(&l.eval(x), &jet, t.valence().0, kind))
}

/// Covariant derivative with respect to a symmetric connection,
/// `a^i_{j;k} = a^i_{j,k} + S^i_{αk} a^α_j - S^α_{jk} a^i_α`, extended per slot.
pub fn covdiff_assoc<T: Real>(
    s: &ConnectionField<T>,
    t: &TensorField<T>,
    x: &[T],
    mode: DiffMode<T>,
) -> Result<Dense<T>, SpaceError> {
    check_valence(s, t)?;
    t.check_point(x)?;
    let conn = s.eval(x);
    let n = conn.dim();
    let asym = Dense::from_fn(n, 3, |ix| conn.at3(ix[0], ix[1], ix[2]) - conn.at3(ix[0], ix[2], ix[1]));
    let scale = conn.max_abs().max(T::one());
    if asym.max_abs() > lit::<T>(1e-12) * scale {
        return Err(SpaceError::NotSymmetric(crate::scalar::to_f64(asym.max_abs())));
    }
    let jet = JetField::new(t.clone()).jet(x, mode);
    let upper = t.valence().0;
    let rank = t.rank();
    let mut out = jet.grad.clone();
    for flat in 0..out.data().len() {
        let idx = out.multi_index(flat);
        let k = idx[rank];
        let mut acc = T::zero();
        for s in 0..rank {
            let mut src = idx[..rank].to_vec();
            for a in 0..n {
                src[s] = a;
                let v = jet.value.get(&src);
                if s < upper {
                    acc += conn.at3(idx[s], a, k) * v;
                } else {
                    acc -= conn.at3(a, idx[s], k) * v;
                }
            }
        }
        out.data_mut()[flat] += acc;
    }
    Ok(out)
}

/// Contraction `c_j = C^α_{jα}` of a rank-3 array.
pub fn contraction<T: Real>(c: &Dense<T>) -> Dense<T> {
    let n = c.dim();
    Dense::from_fn(n, 1, |ix| (0..n).map(|a| c.at3(a, ix[0], a)).sum())
}

/// Formal first-kind derivative of the contraction `C^α_{jα}` treated as a
/// covector: `c_{j,n} - L^β_{jn} c_β`. Output indexed `(j, n)`.
pub fn contraction_derivative<T: Real>(conn: &Dense<T>, of: &Jet<T>) -> Dense<T> {
    let n = conn.dim();
    let c = contraction(&of.value);
    Dense::from_fn(n, 2, |ix| {
        let (j, m) = (ix[0], ix[1]);
        let partial: T = (0..n).map(|a| of.grad.at4(a, j, a, m)).sum();
        let corr: T = (0..n).map(|b| conn.at3(b, j, m) * c.at1(b)).sum();
        partial - corr
    })
}

/// Same object reached the other way round: first-kind derivative of `C^i_{jk}`
/// as a (1,2) tensor, then contraction of `i` with `k`.
pub fn derivative_then_contraction<T: Real>(conn: &Dense<T>, of: &Jet<T>) -> Dense<T> {
    let n = conn.dim();
    let d = covariant_from_jet(conn, of, 1, Kind::First);
    Dense::from_fn(n, 2, |ix| (0..n).map(|a| d.at4(a, ix[0], a, ix[1])).sum())
}

/// Formal derivative of `L^α_{jα}` (or of `S̃^α_{jα}` when `of` is the
/// symmetric part) with respect to the full connection `l`.
pub fn formal_contraction_deriv<T: Real>(
    l: &ConnectionField<T>,
    of: &TensorField<T>,
    x: &[T],
    mode: DiffMode<T>,
) -> Result<Dense<T>, SpaceError> {
    check_valence(l, of)?;
    if of.valence() != (1, 2) {
        let (p, q) = of.valence();
        return Err(SpaceError::ConnectionValence(p, q));
    }
    let jet = JetField::new(of.clone()).jet(x, mode);
    Ok(contraction_derivative(&l.eval(x), &jet))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::max_abs_diff;

    fn sparse(n: usize, entries: &[(&str, &str)]) -> ConnectionField<f64> {
        let map: BTreeMap<String, String> = entries
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        ConnectionField::from_sparse(n, &map).unwrap()
    }

    fn sample_connection() -> ConnectionField<f64> {
        sparse(
            2,
            &[
                ("1,1,2", "x1*x2"),
                ("1,2,1", "0.3 + x2^2"),
                ("2,1,1", "sin(x1)"),
                ("2,2,1", "x1 - x2"),
                ("2,1,2", "exp(x2)"),
                ("1,2,2", "0.5*x1"),
            ],
        )
    }

    #[test]
    fn split_example() {
        let l = sparse(2, &[("1,1,2", "1")]);
        let sp = l.split();
        let x = [0.0, 0.0];
        let s = sp.sym.eval(&x);
        let t = sp.torsion.eval(&x);
        assert_eq!(s.at3(0, 0, 1), 0.5);
        assert_eq!(s.at3(0, 1, 0), 0.5);
        assert_eq!(t.at3(0, 0, 1), 0.5);
        assert_eq!(t.at3(0, 1, 0), -0.5);
    }

    #[test]
    fn split_reconstructs_and_has_symmetries() {
        let l = sample_connection();
        let sp = l.split();
        let x = [0.2, -0.6];
        let s = sp.sym.eval(&x);
        let t = sp.torsion.eval(&x);
        assert!(max_abs_diff(&s.add(&t), &l.eval(&x)).unwrap().0 <= 1e-14);
        assert!(max_abs_diff(&s, &s.swap_slots(1, 2)).unwrap().0 == 0.0);
        assert!(max_abs_diff(&t, &t.swap_slots(1, 2).scale(-1.0)).unwrap().0 == 0.0);
    }

    #[test]
    fn symmetric_and_antisymmetric_inputs() {
        let sym = sparse(2, &[("1,1,2", "x1"), ("1,2,1", "x1")]);
        assert!(sym.split().torsion.eval(&[0.4, 0.1]).max_abs() == 0.0);
        let anti = sparse(2, &[("1,1,2", "x1"), ("1,2,1", "-x1")]);
        assert!(anti.split().sym.eval(&[0.4, 0.1]).max_abs() == 0.0);
    }

    #[test]
    fn kronecker_kind_one_vanishes_kind_three_gives_torsion() {
        let l = sample_connection();
        let delta = TensorField::kronecker(2);
        let x = [0.3, 0.7];
        let d1 = covdiff(&l, &delta, Kind::First, &x, DiffMode::Exact).unwrap();
        assert!(d1.max_abs() <= 1e-15);
        let d3 = covdiff(&l, &delta, Kind::Third, &x, DiffMode::Exact).unwrap();
        let t = l.split().torsion.eval(&x).scale(2.0);
        assert!(max_abs_diff(&d3, &t).unwrap().0 <= 1e-14);
    }

    #[test]
    fn zero_connection_is_partial() {
        let l = ConnectionField::<f64>::zero(2);
        let t = TensorField::parse(2, 1, 1, &["x1*x2", "x1^2", "sin(x2)", "1"]).unwrap();
        let x = [0.5, -0.25];
        for kind in Kind::ALL {
            let d = covdiff(&l, &t, kind, &x, DiffMode::Exact).unwrap();
            for k in 0..2 {
                let p = t.partial(k + 1, &x, DiffMode::Exact);
                for i in 0..2 {
                    for j in 0..2 {
                        assert_eq!(d.at3(i, j, k), p.at2(i, j));
                    }
                }
            }
        }
    }

    #[test]
    fn kind_one_minus_kind_three_is_torsion_contraction() {
        let l = sample_connection();
        let a = TensorField::parse(2, 1, 1, &["x1*x2", "x1^2", "sin(x2)", "1 + x1"]).unwrap();
        let x = [0.45, -0.3];
        let d1 = covdiff(&l, &a, Kind::First, &x, DiffMode::Exact).unwrap();
        let d3 = covdiff(&l, &a, Kind::Third, &x, DiffMode::Exact).unwrap();
        let t = l.split().torsion.eval(&x);
        let av = a.eval(&x);
        let expect = Dense::from_fn(2, 3, |ix| {
            let (i, j, k) = (ix[0], ix[1], ix[2]);
            (0..2).map(|al| -2.0 * t.at3(al, j, k) * av.at2(i, al)).sum()
        });
        assert!(max_abs_diff(&d1.sub(&d3), &expect).unwrap().0 <= 1e-12);
    }

    #[test]
    fn assoc_matches_kind_one_for_symmetric_connection() {
        let s = sample_connection().split().sym_connection();
        let x = [0.1, 0.8];
        for (p, q, texts) in [
            (0usize, 1usize, vec!["x1*x2", "x2^2"]),
            (1, 0, vec!["sin(x1)", "x1 - x2"]),
            (1, 1, vec!["x1*x2", "x1^2", "sin(x2)", "1"]),
        ] {
            let t = TensorField::parse(2, p, q, &texts).unwrap();
            let a = covdiff_assoc(&s, &t, &x, DiffMode::Exact).unwrap();
            for kind in Kind::ALL {
                let b = covdiff(&s, &t, kind, &x, DiffMode::Exact).unwrap();
                assert!(max_abs_diff(&a, &b).unwrap().0 <= 1e-14);
            }
        }
        let delta = TensorField::kronecker(2);
        assert!(covdiff_assoc(&s, &delta, &x, DiffMode::Exact).unwrap().max_abs() <= 1e-15);
        assert!(matches!(
            covdiff_assoc(&sample_connection(), &delta, &x, DiffMode::Exact),
            Err(SpaceError::NotSymmetric(_))
        ));
    }

    #[test]
    fn covector_with_zero_symmetric_connection() {
        let s = ConnectionField::<f64>::zero(2);
        let sigma = TensorField::parse(2, 0, 1, &["x1*x2", "cos(x1)"]).unwrap();
        let x = [0.3, 0.2];
        let d = covdiff_assoc(&s, &sigma, &x, DiffMode::Exact).unwrap();
        assert_eq!(d.at2(0, 1), 0.3);
        assert_eq!(d.at2(1, 0), -(0.3f64).sin());
    }

    #[test]
    fn unsupported_valence() {
        let l = ConnectionField::<f64>::zero(2);
        let big = TensorField::zeros(2, 1, 3);
        assert!(matches!(
            covdiff(&l, &big, Kind::First, &[0.0, 0.0], DiffMode::Exact),
            Err(SpaceError::UnsupportedValence(1, 3))
        ));
    }

    #[test]
    fn formal_contraction_examples() {
        let x = [0.2, 0.3];
        let z = ConnectionField::<f64>::zero(2);
        assert_eq!(
            formal_contraction_deriv(&z, z.coeffs(), &x, DiffMode::Exact).unwrap().max_abs(),
            0.0
        );
        let c = sparse(2, &[("1,1,1", "0.5"), ("2,1,2", "2"), ("1,2,1", "-1"), ("2,2,1", "0.25")]);
        let d = formal_contraction_deriv(&c, c.coeffs(), &x, DiffMode::Exact).unwrap();
        let lv = c.eval(&x);
        let cv = contraction(&lv);
        for j in 0..2 {
            for m in 0..2 {
                let want: f64 = -(0..2).map(|b| lv.at3(b, j, m) * cv.at1(b)).sum::<f64>();
                assert!((d.at2(j, m) - want).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn contraction_routes_agree() {
        let l = sample_connection();
        let x = [0.6, -0.1];
        let jet = JetField::new(l.coeffs().clone()).jet(&x, DiffMode::Exact);
        let a = contraction_derivative(&l.eval(&x), &jet);
        let b = derivative_then_contraction(&l.eval(&x), &jet);
        assert!(max_abs_diff(&a, &b).unwrap().0 <= 1e-14);
    }

    #[test]
    fn bad_keys_rejected() {
        let mut m = BTreeMap::new();
        m.insert("1,2".to_string(), "1".to_string());
        assert!(ConnectionField::<f64>::from_sparse(2, &m).is_err());
        let mut m = BTreeMap::new();
        m.insert("1,2,3".to_string(), "1".to_string());
        assert!(ConnectionField::<f64>::from_sparse(2, &m).is_err());
    }
}
