//! Geodesics of a connection and the almost-geodesic defect of a sampled
//! curve.
//!
//! A curve with tangent `λ` is almost geodesic of kind `θ` in `L̄` when
//! `λ₂ = a·λ + b·λ₁` for some functions `a, b`, where `λ₁ = λ_{‖θα}λ^α` and
//! `λ₂ = λ₁_{‖θα}λ^α`. The defect is the smallest singular value of the
//! column-normalized matrix `[λ | λ₁ | λ₂]`.

use std::io::{self, Write};

use nalgebra::DMatrix;
use thiserror::Error;

use crate::scalar::{lit, to_f64, Real};
use crate::space::{ConnectionField, Kind};
use crate::tensor::{Bounds, Dense};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PathError {
    #[error("at least 16 integration steps are required, got {0}")]
    Steps(usize),
    #[error("initial tangent must be nonzero")]
    ZeroTangent,
    #[error("point/tangent dimension {got} does not match the chart dimension {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("trajectory left the chart bounds at t = {t} (coordinate x{coord})")]
    LeftChart { t: f64, coord: usize },
    #[error("trajectory became non-finite at t = {0}")]
    NonFinite(f64),
    #[error("theta must be 1 or 2")]
    Theta,
    #[error("too few samples for the defect stencil: {0} (need at least 9)")]
    TooFewSamples(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveSample<T = f64> {
    pub t: T,
    pub x: Vec<T>,
    /// Tangent `dx/dt`.
    pub lambda: Vec<T>,
}

/// `-L^i_{αβ}λ^αλ^β`; the torsion part drops out of the double contraction.
fn acceleration<T: Real>(l: &Dense<T>, lambda: &[T]) -> Vec<T> {
    let n = lambda.len();
    (0..n)
        .map(|i| {
            let mut acc = T::zero();
            for a in 0..n {
                for b in 0..n {
                    acc += l.at3(i, a, b) * lambda[a] * lambda[b];
                }
            }
            -acc
        })
        .collect()
}

fn axpy<T: Real>(x: &[T], h: T, d: &[T]) -> Vec<T> {
    x.iter().zip(d).map(|(&a, &b)| a + h * b).collect()
}

/// Classical fixed-step RK4 for `x' = λ`, `λ' = -L^i_{αβ}λ^αλ^β` over
/// `[0, t_end]`; returns `steps + 1` samples. When `bounds` is given, leaving
/// them is an error.
pub fn integrate_geodesic<T: Real>(
    l: &ConnectionField<T>,
    x0: &[T],
    l0: &[T],
    t_end: T,
    steps: usize,
    bounds: Option<&Bounds<T>>,
) -> Result<Vec<CurveSample<T>>, PathError> {
    let n = l.dim();
    if x0.len() != n || l0.len() != n {
        return Err(PathError::Dimension {
            expected: n,
            got: if x0.len() != n { x0.len() } else { l0.len() },
        });
    }
    if steps < 16 {
        return Err(PathError::Steps(steps));
    }
    if l0.iter().all(|v| *v == T::zero()) {
        return Err(PathError::ZeroTangent);
    }
    let h = t_end / lit(steps as f64);
    let half = lit::<T>(0.5);
    let sixth = lit::<T>(1.0 / 6.0);
    let two = lit::<T>(2.0);
    let deriv = |x: &[T], v: &[T]| (v.to_vec(), acceleration(&l.eval(x), v));
    let mut x = x0.to_vec();
    let mut v = l0.to_vec();
    let mut out = Vec::with_capacity(steps + 1);
    for step in 0..=steps {
        let t = h * lit(step as f64);
        if x.iter().chain(&v).any(|c| !c.is_finite()) {
            return Err(PathError::NonFinite(to_f64(t)));
        }
        if let Some(b) = bounds {
            if let Some(k) = (0..n).find(|&k| x[k] < b[k].0 || x[k] > b[k].1) {
                return Err(PathError::LeftChart {
                    t: to_f64(t),
                    coord: k + 1,
                });
            }
        }
        out.push(CurveSample {
            t,
            x: x.clone(),
            lambda: v.clone(),
        });
        if step == steps {
            break;
        }
        let (k1x, k1v) = deriv(&x, &v);
        let (k2x, k2v) = deriv(&axpy(&x, half * h, &k1x), &axpy(&v, half * h, &k1v));
        let (k3x, k3v) = deriv(&axpy(&x, half * h, &k2x), &axpy(&v, half * h, &k2v));
        let (k4x, k4v) = deriv(&axpy(&x, h, &k3x), &axpy(&v, h, &k3v));
        for i in 0..n {
            x[i] += sixth * h * (k1x[i] + two * k2x[i] + two * k3x[i] + k4x[i]);
            v[i] += sixth * h * (k1v[i] + two * k2v[i] + two * k3v[i] + k4v[i]);
        }
    }
    Ok(out)
}

/// Defect of a sampled curve.
#[derive(Debug, Clone, PartialEq)]
pub enum Defect<T = f64> {
    /// `N < 3`: any three vectors are dependent.
    Vacuous,
    /// One value per sample; `None` where the stencil does not fit.
    Values(Vec<Option<T>>),
}

impl<T: Real> Defect<T> {
    pub fn max(&self) -> Option<T> {
        match self {
            Defect::Vacuous => None,
            Defect::Values(v) => v.iter().flatten().copied().reduce(T::max),
        }
    }
}

/// Fourth-order centered derivative of a uniformly sampled vector sequence.
fn centered<T: Real>(seq: &[Option<Vec<T>>], k: usize, h: T) -> Option<Vec<T>> {
    if k < 2 || k + 2 >= seq.len() {
        return None;
    }
    let [a, b, c, d] = [seq[k - 2].as_ref()?, seq[k - 1].as_ref()?, seq[k + 1].as_ref()?, seq[k + 2].as_ref()?];
    let eight = lit::<T>(8.0);
    let den = lit::<T>(12.0) * h;
    Some(
        (0..a.len())
            .map(|i| (a[i] - eight * b[i] + eight * c[i] - d[i]) / den)
            .collect(),
    )
}

/// `dv/dt + L̄^i_{αβ}v^αλ^β` (kind 1) or `+ L̄^i_{βα}v^αλ^β` (kind 2).
fn along<T: Real>(l: &Dense<T>, dv: &[T], v: &[T], lambda: &[T], kind: Kind) -> Vec<T> {
    let n = v.len();
    (0..n)
        .map(|i| {
            let mut r = dv[i];
            for a in 0..n {
                for b in 0..n {
                    let c = if kind == Kind::First { l.at3(i, a, b) } else { l.at3(i, b, a) };
                    r += c * v[a] * lambda[b];
                }
            }
            r
        })
        .collect()
}

/// Columns shorter than this (relative to `max(1, |λ|)`) count as zero; they
/// carry only differencing noise.
pub const NULL_COLUMN: f64 = 1e-8;

/// Smallest singular value of `[λ | λ₁ | λ₂]` with each nonzero column
/// scaled to unit length.
pub fn span_defect<T: Real>(cols: [&[T]; 3]) -> T {
    let n = cols[0].len();
    let norm = |col: &[T]| col.iter().map(|v| to_f64(*v).powi(2)).sum::<f64>().sqrt();
    let floor = NULL_COLUMN * norm(cols[0]).max(1.0);
    let mut m = DMatrix::<f64>::zeros(n, 3);
    for (c, col) in cols.iter().enumerate() {
        let norm = norm(col);
        let scale = if norm > floor { 1.0 / norm } else { 0.0 };
        for i in 0..n {
            m[(i, c)] = to_f64(col[i]) * scale;
        }
    }
    let sv = m.singular_values();
    lit(sv.min())
}

/// Almost-geodesic defect of uniformly spaced samples measured in `lbar`.
pub fn ag_defect<T: Real>(
    lbar: &ConnectionField<T>,
    samples: &[CurveSample<T>],
    theta: Kind,
) -> Result<Defect<T>, PathError> {
    if !matches!(theta, Kind::First | Kind::Second) {
        return Err(PathError::Theta);
    }
    let n = lbar.dim();
    if n < 3 {
        return Ok(Defect::Vacuous);
    }
    if samples.len() < 9 {
        return Err(PathError::TooFewSamples(samples.len()));
    }
    let h = samples[1].t - samples[0].t;
    let conn: Vec<Dense<T>> = samples.iter().map(|s| lbar.eval(&s.x)).collect();
    let lambdas: Vec<Option<Vec<T>>> = samples.iter().map(|s| Some(s.lambda.clone())).collect();
    let first: Vec<Option<Vec<T>>> = (0..samples.len())
        .map(|k| {
            centered(&lambdas, k, h).map(|dl| along(&conn[k], &dl, &samples[k].lambda, &samples[k].lambda, theta))
        })
        .collect();
    let values = (0..samples.len())
        .map(|k| {
            let d1 = centered(&first, k, h)?;
            let l1 = first[k].as_ref()?;
            let l2 = along(&conn[k], &d1, l1, &samples[k].lambda, theta);
            Some(span_defect([&samples[k].lambda, l1, &l2]))
        })
        .collect();
    Ok(Defect::Values(values))
}

/// Writes `t, x1..xN, lambda1..lambdaN, defect` rows; the defect cell is empty
/// where it was not computed.
pub fn write_csv<T: Real, W: Write>(out: &mut W, samples: &[CurveSample<T>], defect: &Defect<T>) -> io::Result<()> {
    let n = samples.first().map_or(0, |s| s.x.len());
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend((1..=n).map(|i| format!("lambda{i}")));
    header.push("defect".into());
    writeln!(out, "{}", header.join(","))?;
    for (k, s) in samples.iter().enumerate() {
        let mut row = vec![format!("{:.16e}", to_f64(s.t))];
        row.extend(s.x.iter().chain(&s.lambda).map(|v| format!("{:.16e}", to_f64(*v))));
        row.push(match defect {
            Defect::Values(v) => v[k].map(|d| format!("{:.16e}", to_f64(d))).unwrap_or_default(),
            Defect::Vacuous => String::new(),
        });
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agmap::{deform, Generator};
    use crate::tensor::TensorField;
    use std::collections::BTreeMap;

    fn sparse(n: usize, entries: &[(&str, &str)]) -> ConnectionField<f64> {
        let map: BTreeMap<String, String> = entries
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        ConnectionField::from_sparse(n, &map).unwrap()
    }

    #[test]
    fn flat_connection_gives_straight_line() {
        let l = ConnectionField::<f64>::zero(3);
        let s = integrate_geodesic(&l, &[0.1, 0.2, 0.3], &[1.0, -0.5, 0.25], 1.0, 64, None).unwrap();
        let last = s.last().unwrap();
        assert!((last.x[0] - 1.1).abs() <= 1e-14);
        assert!((last.x[1] + 0.3).abs() <= 1e-14);
        assert_eq!(last.lambda, vec![1.0, -0.5, 0.25]);
        match ag_defect(&l, &s, Kind::First).unwrap() {
            Defect::Values(v) => assert!(v.iter().flatten().all(|d| *d == 0.0)),
            Defect::Vacuous => panic!(),
        }
    }

    #[test]
    fn torsion_only_connection_gives_straight_line() {
        let l = sparse(2, &[("1,1,2", "x1*x2"), ("1,2,1", "-x1*x2"), ("2,1,2", "3"), ("2,2,1", "-3")]);
        let s = integrate_geodesic(&l, &[0.1, 0.2], &[0.3, 0.4], 1.0, 32, None).unwrap();
        let last = s.last().unwrap();
        assert!((last.x[0] - 0.4).abs() <= 1e-14 && (last.x[1] - 0.6).abs() <= 1e-14);
    }

    #[test]
    fn geodesics_ignore_torsion() {
        let l = sparse(
            3,
            &[("1,1,2", "x1*x2"), ("1,2,1", "0.3 + x3"), ("2,3,1", "sin(x1)"), ("3,2,2", "x1 - x3"), ("2,1,3", "0.5")],
        );
        let s = l.split().sym_connection();
        let a = integrate_geodesic(&l, &[0.1, 0.0, -0.1], &[0.5, 0.3, -0.2], 1.0, 128, None).unwrap();
        let b = integrate_geodesic(&s, &[0.1, 0.0, -0.1], &[0.5, 0.3, -0.2], 1.0, 128, None).unwrap();
        for (p, q) in a.iter().zip(&b) {
            for i in 0..3 {
                assert!((p.x[i] - q.x[i]).abs() <= 1e-12);
                assert!((p.lambda[i] - q.lambda[i]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn fourth_order_convergence() {
        let l = sparse(2, &[("1,1,1", "x2"), ("2,1,2", "0.5*x1"), ("2,2,1", "0.5*x1"), ("1,2,2", "x1*x2")]);
        let run = |steps| {
            let s = integrate_geodesic(&l, &[0.1, -0.2], &[0.8, 0.6], 1.0, steps, None).unwrap();
            s.last().unwrap().x.clone()
        };
        let reference = run(4096);
        let err = |steps| {
            let x = run(steps);
            (0..2).map(|i| (x[i] - reference[i]).abs()).fold(0.0, f64::max)
        };
        let ratio = err(32) / err(64);
        assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn rejections() {
        let l = ConnectionField::<f64>::zero(2);
        assert_eq!(integrate_geodesic(&l, &[0.0, 0.0], &[1.0, 0.0], 1.0, 8, None), Err(PathError::Steps(8)));
        assert_eq!(integrate_geodesic(&l, &[0.0, 0.0], &[0.0, 0.0], 1.0, 32, None), Err(PathError::ZeroTangent));
        let b = vec![(-0.5, 0.5); 2];
        assert!(matches!(
            integrate_geodesic(&l, &[0.0, 0.0], &[1.0, 0.0], 1.0, 32, Some(&b)),
            Err(PathError::LeftChart { coord: 1, .. })
        ));
        let s = integrate_geodesic(&l, &[0.0, 0.0], &[1.0, 0.0], 1.0, 32, None).unwrap();
        assert_eq!(ag_defect(&l, &s, Kind::First).unwrap(), Defect::Vacuous);
    }

    #[test]
    fn geodesic_against_its_own_connection() {
        let l = sparse(3, &[("1,1,2", "x1*x2"), ("1,2,1", "x1*x2"), ("3,3,3", "0.4"), ("2,1,1", "x3")]);
        let s = integrate_geodesic(&l, &[0.1, 0.0, -0.1], &[0.5, 0.3, -0.2], 1.0, 512, None).unwrap();
        let d = ag_defect(&l, &s, Kind::First).unwrap();
        assert!(d.max().unwrap() <= 1e-6);
    }

    #[test]
    fn defect_scale_invariance() {
        let a = [1.0, 0.0, 0.0];
        let b = [0.0, 2.0, 0.0];
        let c = [0.3, 0.1, 0.5];
        let d1 = span_defect([&a[..], &b[..], &c[..]]);
        let a2: Vec<f64> = a.iter().map(|v| v * 7.0).collect();
        let d2 = span_defect([&a2[..], &b[..], &c[..]]);
        assert!((d1 - d2).abs() <= 1e-14);
        assert!(d1 > 0.1);
    }

    #[test]
    fn mapped_geodesic_is_almost_geodesic() {
        let cov = |t: &[&str]| TensorField::parse(3, 0, 1, t).unwrap();
        let (l, inst) = Generator {
            e: 1,
            f0: Dense::from_fn(3, 2, |ix| match (ix[0], ix[1]) {
                (0, 0) | (2, 2) => 1.0,
                (1, 1) => -1.0,
                _ => 0.0,
            }),
            p: cov(&["x2", "0.3*x1*x3", "sin(x1)"]),
            q: cov(&["0.2*x3", "x1*x2", "0.5"]),
            sigma: cov(&["x1", "x2^2", "cos(x3)"]),
            psi: cov(&["1 + x3", "0.1*x1", "x2*x1"]),
        }
        .build()
        .unwrap();
        let lbar = deform(&l, &inst).unwrap();
        let s = integrate_geodesic(&l, &[0.1, 0.0, -0.1], &[0.4, 0.3, -0.2], 1.0, 512, None).unwrap();
        let d = ag_defect(&lbar, &s, Kind::First).unwrap();
        assert!(d.max().unwrap() <= 1e-6, "{:?}", d.max());
        let mut csv = Vec::new();
        write_csv(&mut csv, &s, &d).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("t,x1,x2,x3,lambda1,lambda2,lambda3,defect\n"));
        assert_eq!(text.lines().count(), 514);
    }
}
