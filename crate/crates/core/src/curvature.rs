//! Curvature of the associated (symmetric) space in two readings, and the
//! Ricci contraction.
//!
//! `Standard` is the coordinate curvature of `S̃`. `Paper` expands the
//! first-kind derivative of `S̃` with respect to the full connection and adds
//! the torsion products; it differs from `Standard` by
//! `S̃^α_{jm}S̃^i_{αn} - S̃^α_{jn}S̃^i_{αm}`.

use std::fmt;
use std::str::FromStr;

use crate::scalar::{lit, to_f64, Real};
use crate::space::{covariant_from_jet, ConnectionField, Kind, SpaceError};
use crate::tensor::{DiffMode, Dense, Jet, JetField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum CurvatureMode {
    #[default]
    Paper,
    Standard,
}

impl CurvatureMode {
    pub const ALL: [CurvatureMode; 2] = [CurvatureMode::Paper, CurvatureMode::Standard];

    pub fn name(self) -> &'static str {
        match self {
            CurvatureMode::Paper => "paper",
            CurvatureMode::Standard => "standard",
        }
    }
}

impl fmt::Display for CurvatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CurvatureMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper" => Ok(CurvatureMode::Paper),
            "standard" => Ok(CurvatureMode::Standard),
            other => Err(format!("unknown curvature mode '{other}' (expected paper|standard)")),
        }
    }
}

/// `R^i_{jmn} = S̃^i_{jm,n} - S̃^i_{jn,m} + S̃^α_{jm}S̃^i_{αn} - S̃^α_{jn}S̃^i_{αm}`
/// from a jet of `S̃`.
pub fn curvature_std_from<T: Real>(s: &Jet<T>) -> Dense<T> {
    let n = s.value.dim();
    let sv = &s.value;
    Dense::from_fn(n, 4, |ix| {
        let (i, j, m, nn) = (ix[0], ix[1], ix[2], ix[3]);
        let mut r = s.grad.at4(i, j, m, nn) - s.grad.at4(i, j, nn, m);
        for a in 0..n {
            r += sv.at3(a, j, m) * sv.at3(i, a, nn) - sv.at3(a, j, nn) * sv.at3(i, a, m);
        }
        r
    })
}

/// Right side of the expanded curvature: `S̃^i_{jm|n} - S̃^i_{jn|m}` (first
/// kind, full connection `l`) plus the five torsion-product terms.
pub fn curvature_paper_from<T: Real>(l: &Dense<T>, s: &Jet<T>, t: &Dense<T>) -> Dense<T> {
    let n = l.dim();
    let ds = covariant_from_jet(l, s, 1, Kind::First);
    let sv = &s.value;
    let two = lit::<T>(2.0);
    Dense::from_fn(n, 4, |ix| {
        let (i, j, m, nn) = (ix[0], ix[1], ix[2], ix[3]);
        let mut r = ds.at4(i, j, m, nn) - ds.at4(i, j, nn, m);
        for a in 0..n {
            r -= t.at3(i, a, nn) * sv.at3(a, j, m);
            r -= t.at3(a, j, m) * sv.at3(i, a, nn);
            r += t.at3(a, j, nn) * sv.at3(i, a, m);
            r += t.at3(i, a, m) * sv.at3(a, j, nn);
            r += two * t.at3(a, m, nn) * sv.at3(i, j, a);
        }
        r
    })
}

fn check_symmetric<T: Real>(s: &Dense<T>) -> Result<(), SpaceError> {
    let n = s.dim();
    let mut worst = T::zero();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                worst = worst.max((s.at3(i, j, k) - s.at3(i, k, j)).abs());
            }
        }
    }
    if worst > lit::<T>(1e-12) * s.max_abs().max(T::one()) {
        return Err(SpaceError::NotSymmetric(to_f64(worst)));
    }
    Ok(())
}

/// Standard curvature of a symmetric connection at `x`.
pub fn curvature_std<T: Real>(
    s: &ConnectionField<T>,
    x: &[T],
    mode: DiffMode<T>,
) -> Result<Dense<T>, SpaceError> {
    s.coeffs().check_point(x)?;
    let jet = JetField::new(s.coeffs().clone()).jet(x, mode);
    check_symmetric(&jet.value)?;
    Ok(curvature_std_from(&jet))
}

/// Expanded curvature of the associated space of `l` at `x`.
pub fn curvature_paper<T: Real>(
    l: &ConnectionField<T>,
    x: &[T],
    mode: DiffMode<T>,
) -> Result<Dense<T>, SpaceError> {
    l.coeffs().check_point(x)?;
    let split = l.split();
    let s = JetField::new(split.sym).jet(x, mode);
    Ok(curvature_paper_from(&l.eval(x), &s, &split.torsion.eval(x)))
}

/// Curvature of the associated space of `l` in the requested reading.
pub fn curvature<T: Real>(
    l: &ConnectionField<T>,
    which: CurvatureMode,
    x: &[T],
    mode: DiffMode<T>,
) -> Result<Dense<T>, SpaceError> {
    match which {
        CurvatureMode::Paper => curvature_paper(l, x, mode),
        CurvatureMode::Standard => curvature_std(&l.split().sym_connection(), x, mode),
    }
}

/// `R_{jm} = R^α_{jmα}`.
pub fn ricci<T: Real>(r: &Dense<T>) -> Dense<T> {
    let n = r.dim();
    Dense::from_fn(n, 2, |ix| (0..n).map(|a| r.at4(a, ix[0], ix[1], a)).sum())
}

/// `S̃^α_{jm}S̃^i_{αn} - S̃^α_{jn}S̃^i_{αm}`: the gap between the two readings.
pub fn mode_gap<T: Real>(s: &Dense<T>) -> Dense<T> {
    let n = s.dim();
    Dense::from_fn(n, 4, |ix| {
        let (i, j, m, nn) = (ix[0], ix[1], ix[2], ix[3]);
        (0..n)
            .map(|a| s.at3(a, j, m) * s.at3(i, a, nn) - s.at3(a, j, nn) * s.at3(i, a, m))
            .sum()
    })
}
