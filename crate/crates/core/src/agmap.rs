//! Equitorsion second-type almost geodesic mappings with reciprocity.
//!
//! A mapping is described by covectors `ψ, σ, μ, ν`, the affinor `F` with
//! `F² = e·I`, and the derivative kind `θ`. The target connection is
//! `L̄^i_{jk} = L^i_{jk} + ψ_jδ^i_k + ψ_kδ^i_j + σ_jF^i_k + σ_kF^i_j` and the
//! data must satisfy
//! `F^i_{j|k} + F^i_{k|j} = μ_jF^i_k + μ_kF^i_j + (ν_j-eσ_j)δ^i_k + (ν_k-eσ_k)δ^i_j`.
//! The torsion part of the deformation (ξ) is always zero here.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::expr::ExprAst;
use crate::scalar::{count, lit, to_f64, Real};
use crate::space::{covariant_from_jet, ConnectionField, Kind, SpaceError};
use crate::tensor::{DiffMode, Dense, Grid, Jet, JetField, Residual, TensorField};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgmapError {
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("e must be one of -1, 0, 1, got {0}")]
    BadE(i32),
    #[error("theta must be 1 or 2, got {0}")]
    BadTheta(u8),
    #[error("F0*F0 differs from e*I by {residual:e}")]
    Affinor { residual: f64 },
    #[error("e = -1 requires an even dimension, got N = {0}")]
    Parity(usize),
    #[error("{what} has valence ({got_p},{got_q}) or dimension {got_n}; expected ({p},{q}) in dimension {n}")]
    FieldShape {
        what: &'static str,
        got_p: usize,
        got_q: usize,
        got_n: usize,
        p: usize,
        q: usize,
        n: usize,
    },
    #[error("generated instance fails the basic equations (residual {residual:e})")]
    Validation { residual: f64 },
    #[error("inverse mapping not realized: {reason} (residual {residual:e})")]
    FitFailure { reason: &'static str, residual: f64 },
}

/// Data of one mapping between connection spaces of dimension `N`.
#[derive(Debug, Clone)]
pub struct MappingInstance<T = f64> {
    pub psi: TensorField<T>,
    pub sigma: TensorField<T>,
    pub f: TensorField<T>,
    pub mu: TensorField<T>,
    pub nu: TensorField<T>,
    pub e: i8,
    pub theta: Kind,
}

fn check_shape<T: Real>(
    what: &'static str,
    t: &TensorField<T>,
    n: usize,
    p: usize,
    q: usize,
) -> Result<(), AgmapError> {
    let (gp, gq) = t.valence();
    if (gp, gq) != (p, q) || t.dim() != n {
        return Err(AgmapError::FieldShape {
            what,
            got_p: gp,
            got_q: gq,
            got_n: t.dim(),
            p,
            q,
            n,
        });
    }
    Ok(())
}

/// `v_α F^α_j` as expressions.
fn covector_times_affinor<T: Real>(v: &TensorField<T>, f: &TensorField<T>) -> TensorField<T> {
    let n = v.dim();
    TensorField::from_fn(n, 0, 1, |ix| {
        ExprAst::sum_by(n, |a| v.comp(&[a]) * f.comp(&[a, ix[0]]))
    })
}

impl<T: Real> MappingInstance<T> {
    pub fn new(
        psi: TensorField<T>,
        sigma: TensorField<T>,
        f: TensorField<T>,
        mu: TensorField<T>,
        nu: TensorField<T>,
        e: i8,
        theta: Kind,
    ) -> Result<Self, AgmapError> {
        let n = f.dim();
        check_shape("F", &f, n, 1, 1)?;
        check_shape("psi", &psi, n, 0, 1)?;
        check_shape("sigma", &sigma, n, 0, 1)?;
        check_shape("mu", &mu, n, 0, 1)?;
        check_shape("nu", &nu, n, 0, 1)?;
        if !(-1..=1).contains(&e) {
            return Err(AgmapError::BadE(e as i32));
        }
        if !matches!(theta, Kind::First | Kind::Second) {
            return Err(AgmapError::BadTheta(theta.index()));
        }
        Ok(MappingInstance {
            psi,
            sigma,
            f,
            mu,
            nu,
            e,
            theta,
        })
    }

    /// All fields zero, `e = 0`, first kind.
    pub fn zero(n: usize) -> Self {
        let cov = TensorField::zeros(n, 0, 1);
        MappingInstance {
            psi: cov.clone(),
            sigma: cov.clone(),
            f: TensorField::zeros(n, 1, 1),
            mu: cov.clone(),
            nu: cov,
            e: 0,
            theta: Kind::First,
        }
    }

    pub fn dim(&self) -> usize {
        self.f.dim()
    }

    pub fn e_value(&self) -> T {
        lit(self.e as f64)
    }

    /// Data of the inverse mapping: `ψ̄ = -ψ`, `σ̄ = -σ`, `F̄ = F`, and
    /// `μ̄_j = μ_j + σ_αF^α_j - ψ_j`, `ν̄_j = ν_j - 3eσ_j + ψ_αF^α_j`, which make
    /// the barred basic equations hold in `L̄` whenever the original ones hold
    /// in `L` (any `θ ∈ {1,2}`).
    pub fn inverse(&self) -> Self {
        let e = self.e_value();
        let sigma_f = covector_times_affinor(&self.sigma, &self.f);
        let psi_f = covector_times_affinor(&self.psi, &self.f);
        MappingInstance {
            psi: self.psi.neg(),
            sigma: self.sigma.neg(),
            f: self.f.clone(),
            mu: self.mu.add(&sigma_f).sub(&self.psi),
            nu: self
                .nu
                .sub(&self.sigma.scale(lit::<T>(3.0) * e))
                .add(&psi_f),
            e: self.e,
            theta: self.theta,
        }
    }
}

/// `L̄ = L + ψ_jδ^i_k + ψ_kδ^i_j + σ_jF^i_k + σ_kF^i_j`.
pub fn deform<T: Real>(
    l: &ConnectionField<T>,
    inst: &MappingInstance<T>,
) -> Result<ConnectionField<T>, AgmapError> {
    let n = l.dim();
    check_shape("F", &inst.f, n, 1, 1)?;
    let (psi, sigma, f) = (&inst.psi, &inst.sigma, &inst.f);
    let delta = TensorField::from_fn(n, 1, 2, |ix| {
        let (i, j, k) = (ix[0], ix[1], ix[2]);
        let mut t = ExprAst::zero();
        if i == k {
            t = t + psi.comp(&[j]);
        }
        if i == j {
            t = t + psi.comp(&[k]);
        }
        t + sigma.comp(&[j]) * f.comp(&[i, k]) + sigma.comp(&[k]) * f.comp(&[i, j])
    });
    Ok(l.add(&delta))
}

/// Left minus right side of the basic equations at one point; indexed
/// `(i, j, k)`.
pub fn basic_defect<T: Real>(
    l: &Dense<T>,
    f: &Jet<T>,
    sigma: &Dense<T>,
    mu: &Dense<T>,
    nu: &Dense<T>,
    e: T,
    theta: Kind,
) -> Dense<T> {
    let n = l.dim();
    let df = covariant_from_jet(l, f, 1, theta);
    let fv = &f.value;
    Dense::from_fn(n, 3, |ix| {
        let (i, j, k) = (ix[0], ix[1], ix[2]);
        let lhs = df.at3(i, j, k) + df.at3(i, k, j);
        let mut rhs = mu.at1(j) * fv.at2(i, k) + mu.at1(k) * fv.at2(i, j);
        if i == k {
            rhs += nu.at1(j) - e * sigma.at1(j);
        }
        if i == j {
            rhs += nu.at1(k) - e * sigma.at1(k);
        }
        lhs - rhs
    })
}

fn max_entry<T: Real>(d: &Dense<T>) -> (T, Vec<usize>) {
    let mut best = (T::zero(), vec![1; d.rank()]);
    for (flat, v) in d.data().iter().enumerate() {
        let a = v.abs();
        if a.is_nan() {
            return (a, d.multi_index(flat).iter().map(|i| i + 1).collect());
        }
        if a > best.0 {
            best = (a, d.multi_index(flat).iter().map(|i| i + 1).collect());
        }
    }
    best
}

/// Maximum of `|F^i_αF^α_j - eδ^i_j|` over the grid.
pub fn reciprocity_residual<T: Real>(inst: &MappingInstance<T>, grid: &Grid<T>) -> Residual<T> {
    let n = inst.dim();
    let e = inst.e_value();
    grid.max_residual(|x| {
        let f = inst.f.eval(x);
        let d = Dense::from_fn(n, 2, |ix| {
            let sq: T = (0..n).map(|a| f.at2(ix[0], a) * f.at2(a, ix[1])).sum();
            sq - if ix[0] == ix[1] { e } else { T::zero() }
        });
        max_entry(&d)
    })
}

/// Maximum defect of the basic equations over the grid (kind `inst.theta`).
pub fn basic_residual<T: Real>(
    l: &ConnectionField<T>,
    inst: &MappingInstance<T>,
    grid: &Grid<T>,
    mode: DiffMode<T>,
) -> Residual<T> {
    let fj = JetField::new(inst.f.clone());
    let e = inst.e_value();
    grid.max_residual(|x| {
        let d = basic_defect(
            &l.eval(x),
            &fj.jet(x, mode),
            &inst.sigma.eval(x),
            &inst.mu.eval(x),
            &inst.nu.eval(x),
            e,
            inst.theta,
        );
        max_entry(&d)
    })
}

/// Defect of the contracted basic equation
/// `F_{|j} = μ_jF + μ_αF^α_j + (N+1)(ν_j - eσ_j) - F^α_{j|α}` at one point.
pub fn contracted_defect<T: Real>(
    l: &Dense<T>,
    f: &Jet<T>,
    sigma: &Dense<T>,
    mu: &Dense<T>,
    nu: &Dense<T>,
    e: T,
    theta: Kind,
) -> Dense<T> {
    let n = l.dim();
    let df = covariant_from_jet(l, f, 1, theta);
    let fv = &f.value;
    let trace: T = (0..n).map(|a| fv.at2(a, a)).sum();
    let np1 = count::<T>(n + 1);
    Dense::from_fn(n, 1, |ix| {
        let j = ix[0];
        let trace_grad: T = (0..n).map(|a| f.grad.at3(a, a, j)).sum();
        let mu_f: T = (0..n).map(|a| mu.at1(a) * fv.at2(a, j)).sum();
        let div: T = (0..n).map(|a| df.at3(a, j, a)).sum();
        trace_grad - (mu.at1(j) * trace + mu_f + np1 * (nu.at1(j) - e * sigma.at1(j)) - div)
    })
}

pub fn contracted_residual<T: Real>(
    l: &ConnectionField<T>,
    inst: &MappingInstance<T>,
    grid: &Grid<T>,
    mode: DiffMode<T>,
) -> Residual<T> {
    let fj = JetField::new(inst.f.clone());
    let e = inst.e_value();
    grid.max_residual(|x| {
        let d = contracted_defect(
            &l.eval(x),
            &fj.jet(x, mode),
            &inst.sigma.eval(x),
            &inst.mu.eval(x),
            &inst.nu.eval(x),
            e,
            inst.theta,
        );
        max_entry(&d)
    })
}

/// `ψ_j` recomputed from the contraction of the deformation, pointwise:
/// `(L̄^α_{jα} - L^α_{jα})/(N+1) + ((σ̄_jF̄ + σ̄_αF̄^α_j) - (σ_jF + σ_αF^α_j))/(2(N+1))`
/// with `σ̄ = -σ`, `F̄ = F`.
pub fn psi_from_contraction<T: Real>(l: &Dense<T>, lbar: &Dense<T>, sigma: &Dense<T>, f: &Dense<T>) -> Dense<T> {
    let n = l.dim();
    let np1 = count::<T>(n + 1);
    let trace: T = (0..n).map(|a| f.at2(a, a)).sum();
    Dense::from_fn(n, 1, |ix| {
        let j = ix[0];
        let dl: T = (0..n).map(|a| lbar.at3(a, j, a) - l.at3(a, j, a)).sum();
        let s = |sg: T, sig_f: T| sg * trace + sig_f;
        let sig_f: T = (0..n).map(|a| sigma.at1(a) * f.at2(a, j)).sum();
        let barred = s(-sigma.at1(j), -sig_f);
        let plain = s(sigma.at1(j), sig_f);
        dl / np1 + (barred - plain) / (lit::<T>(2.0) * np1)
    })
}

/// Deviation of the recovered `ψ` from the stored one over the grid.
pub fn recover_psi<T: Real>(
    l: &ConnectionField<T>,
    lbar: &ConnectionField<T>,
    inst: &MappingInstance<T>,
    grid: &Grid<T>,
) -> Residual<T> {
    grid.max_residual(|x| {
        let rec = psi_from_contraction(&l.eval(x), &lbar.eval(x), &inst.sigma.eval(x), &inst.f.eval(x));
        max_entry(&rec.sub(&inst.psi.eval(x)))
    })
}

/// Pointwise least-squares solution for `(μ, ν)` of the basic equations.
#[derive(Debug, Clone)]
pub struct MuNuFit<T = f64> {
    pub mu: Vec<T>,
    pub nu: Vec<T>,
    /// Euclidean norm of the remaining defect.
    pub residual: T,
    /// Numerical rank of the `N³ × 2N` system; below `2N` the minimum-norm
    /// solution is returned.
    pub rank: usize,
}

impl<T> MuNuFit<T> {
    pub fn full_rank(&self) -> bool {
        self.rank == 2 * self.mu.len()
    }
}

/// Solves the basic equations at `x` for `μ_j, ν_j` in the least-squares sense.
/// The solve runs in `f64` regardless of the working scalar.
pub fn fit_mu_nu<T: Real>(
    l: &ConnectionField<T>,
    f: &TensorField<T>,
    sigma: &TensorField<T>,
    e: i8,
    theta: Kind,
    x: &[T],
    mode: DiffMode<T>,
) -> MuNuFit<T> {
    let jet = JetField::new(f.clone()).jet(x, mode);
    fit_mu_nu_at(&l.eval(x), &jet, &sigma.eval(x), e, theta)
}

pub fn fit_mu_nu_at<T: Real>(l: &Dense<T>, f: &Jet<T>, sigma: &Dense<T>, e: i8, theta: Kind) -> MuNuFit<T> {
    let n = l.dim();
    let df = covariant_from_jet(l, f, 1, theta);
    let fv = &f.value;
    let ef = e as f64;
    let rows = n * n * n;
    let mut a = DMatrix::<f64>::zeros(rows, 2 * n);
    let mut b = DVector::<f64>::zeros(rows);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let r = (i * n + j) * n + k;
                // μ_j F^i_k + μ_k F^i_j + ν_j δ^i_k + ν_k δ^i_j = D^i_jk + eσ_j δ^i_k + eσ_k δ^i_j
                a[(r, j)] += to_f64(fv.at2(i, k));
                a[(r, k)] += to_f64(fv.at2(i, j));
                let mut rhs = to_f64(df.at3(i, j, k) + df.at3(i, k, j));
                if i == k {
                    a[(r, n + j)] += 1.0;
                    rhs += ef * to_f64(sigma.at1(j));
                }
                if i == j {
                    a[(r, n + k)] += 1.0;
                    rhs += ef * to_f64(sigma.at1(k));
                }
                b[r] = rhs;
            }
        }
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = 1e-10 * smax.max(1.0);
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    let sol = svd
        .solve(&b, eps)
        .unwrap_or_else(|_| DVector::zeros(2 * n));
    let residual = (&a * &sol - &b).norm();
    MuNuFit {
        mu: (0..n).map(|j| lit(sol[j])).collect(),
        nu: (0..n).map(|j| lit(sol[n + j])).collect(),
        residual: lit(residual),
        rank,
    }
}

/// Inverse mapping data, checked against the barred space: the barred basic
/// residual must stay within `tol`, and wherever the pointwise fit is full
/// rank it must agree with the closed-form `μ̄, ν̄`.
pub fn invert_instance<T: Real>(
    l: &ConnectionField<T>,
    inst: &MappingInstance<T>,
    grid: &Grid<T>,
    mode: DiffMode<T>,
    tol: T,
) -> Result<MappingInstance<T>, AgmapError> {
    let inv = inst.inverse();
    let lbar = deform(l, inst)?;
    let res = basic_residual(&lbar, &inv, grid, mode);
    if !res.passes(tol) {
        return Err(AgmapError::FitFailure {
            reason: "barred basic equations do not hold",
            residual: to_f64(res.value),
        });
    }
    let fj = JetField::new(inv.f.clone());
    let worst = grid.max_residual(|x| {
        let fit = fit_mu_nu_at(&lbar.eval(x), &fj.jet(x, mode), &inv.sigma.eval(x), inv.e, inv.theta);
        if !fit.full_rank() {
            return (T::zero(), Vec::new());
        }
        let mu = inv.mu.eval(x);
        let nu = inv.nu.eval(x);
        let d = (0..x.len())
            .map(|j| (fit.mu[j] - mu.at1(j)).abs().max((fit.nu[j] - nu.at1(j)).abs()))
            .fold(T::zero(), T::max);
        (d, Vec::new())
    });
    if worst.value > tol.sqrt() {
        return Err(AgmapError::FitFailure {
            reason: "pointwise fit disagrees with the inverse data",
            residual: to_f64(worst.value),
        });
    }
    Ok(inv)
}

/// Parameters of the synthetic family: constant affinor `F0`, and covector
/// expressions `p, q, σ, ψ`.
#[derive(Debug, Clone)]
pub struct Generator<T = f64> {
    pub e: i8,
    pub f0: Dense<T>,
    pub p: TensorField<T>,
    pub q: TensorField<T>,
    pub sigma: TensorField<T>,
    pub psi: TensorField<T>,
}

/// Tolerance on `F0·F0 = eI`.
pub const AFFINOR_TOL: f64 = 1e-12;
/// Basic-equation tolerance a generated instance must meet (exact mode).
pub const GENERATOR_TOL: f64 = 1e-10;

impl<T: Real> Generator<T> {
    /// Checks everything that does not need the construction itself; returns
    /// every violation found.
    pub fn violations(&self) -> Vec<AgmapError> {
        let mut out = Vec::new();
        let n = self.f0.dim();
        if !(-1..=1).contains(&self.e) {
            out.push(AgmapError::BadE(self.e as i32));
        }
        if n < 2 {
            out.push(AgmapError::Space(SpaceError::Dimension(n)));
        }
        if self.f0.rank() != 2 {
            out.push(AgmapError::FieldShape {
                what: "F0",
                got_p: self.f0.rank(),
                got_q: 0,
                got_n: n,
                p: 1,
                q: 1,
                n,
            });
            return out;
        }
        let e = lit::<T>(self.e as f64);
        let mut worst = T::zero();
        for i in 0..n {
            for j in 0..n {
                let sq: T = (0..n).map(|a| self.f0.at2(i, a) * self.f0.at2(a, j)).sum();
                let target = if i == j { e } else { T::zero() };
                worst = worst.max((sq - target).abs());
            }
        }
        if worst.is_nan() || worst > lit(AFFINOR_TOL) {
            out.push(AgmapError::Affinor {
                residual: to_f64(worst),
            });
        }
        if self.e == -1 && n % 2 == 1 {
            out.push(AgmapError::Parity(n));
        }
        for (what, t) in [("p", &self.p), ("q", &self.q), ("sigma", &self.sigma), ("psi", &self.psi)] {
            if let Err(err) = check_shape(what, t, n, 0, 1) {
                out.push(err);
            }
        }
        out
    }

    /// Builds `L = S̃ + T̃` with `S̃^i_{jk} = q_jδ^i_k + q_kδ^i_j`,
    /// `T̃^i_{jk} = p_jF0^i_k - p_kF0^i_j`, and the instance with `F = F0`,
    /// `μ_j = p_αF0^α_j - q_j`, `ν_j = eσ_j + q_αF0^α_j - e p_j`, `θ = 1`.
    pub fn build(&self) -> Result<(ConnectionField<T>, MappingInstance<T>), AgmapError> {
        if let Some(err) = self.violations().into_iter().next() {
            return Err(err);
        }
        let n = self.f0.dim();
        let f0 = &self.f0;
        let fc = |i: usize, j: usize| ExprAst::constant(f0.at2(i, j));
        let (p, q) = (&self.p, &self.q);
        let l = ConnectionField::from_fn(n, |ix| {
            let (i, j, k) = (ix[0], ix[1], ix[2]);
            let sym = q.comp(&[j]) * ExprAst::delta(i, k) + q.comp(&[k]) * ExprAst::delta(i, j);
            let tor = p.comp(&[j]) * fc(i, k) - p.comp(&[k]) * fc(i, j);
            sym + tor
        });
        let f = TensorField::from_fn(n, 1, 1, |ix| fc(ix[0], ix[1]));
        let e = lit::<T>(self.e as f64);
        let p_f = covector_times_affinor(p, &f);
        let q_f = covector_times_affinor(q, &f);
        let mu = p_f.sub(q);
        let nu = self.sigma.scale(e).add(&q_f).sub(&p.scale(e));
        let inst = MappingInstance::new(
            self.psi.clone(),
            self.sigma.clone(),
            f,
            mu,
            nu,
            self.e,
            Kind::First,
        )?;
        let probe = Grid::generate(0, 8, Grid::default_bounds(n));
        let res = basic_residual(&l, &inst, &probe, DiffMode::Exact);
        let tol = lit::<T>(GENERATOR_TOL).max(T::epsilon() * lit(1e4));
        if !res.passes(tol) {
            return Err(AgmapError::Validation {
                residual: to_f64(res.value),
            });
        }
        Ok((l, inst))
    }
}

/// Convenience wrapper around [`Generator::build`].
pub fn generate_instance<T: Real>(gen: &Generator<T>) -> Result<(ConnectionField<T>, MappingInstance<T>), AgmapError> {
    gen.build()
}
