//! Derived objects of a mapping pair: the deformation magnitude `ω`, the
//! generalized Thomas parameter `𝒯 = L - ω`, its symmetric part `𝒰`, the
//! curvature-level correction `𝓕`, the Weyl-type object `𝒲`, and the
//! intermediate magnitudes `ν̂, ρ̂, Δ̂` of the curvature chain.
//!
//! Symbolic fields (`ω`, `𝒯`, `𝒰`) are built as expressions so their
//! covariant derivatives are exact. Everything else is assembled pointwise in
//! [`PointData`]. All covariant derivatives here are of the first kind.
//!
//! Some printed formulas admit more than one reading; each choice is an
//! explicit enum so the audit can evaluate all of them.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::agmap::MappingInstance;
use crate::curvature::{curvature_paper_from, curvature_std_from, ricci, CurvatureMode};
use crate::expr::ExprAst;
use crate::scalar::{count, lit, to_f64, Real};
use crate::space::{
    contraction_derivative, covariant_from_jet, ConnectionField, ConnectionSplit, Kind,
};
use crate::tensor::{DiffMode, Dense, Jet, JetField, TensorField};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InvariantError {
    #[error("degenerate affinor: |e - F^2| = {0:e} at the requested point")]
    DegenerateAffinor(f64),
}

macro_rules! reading {
    ($(#[$doc:meta])* $name:ident { $($var:ident => $text:literal),+ $(,)? }) => {
        $(#[$doc])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum $name {
            $($var),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$var),+];

            pub fn name(self) -> &'static str {
                match self {
                    $($name::$var => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                $name::ALL
                    .iter()
                    .copied()
                    .find(|r| r.name() == s)
                    .ok_or_else(|| {
                        let names: Vec<_> = $name::ALL.iter().map(|r| r.name()).collect();
                        format!("unknown reading '{}' (expected {})", s, names.join("|"))
                    })
            }
        }
    };
}

reading!(
    /// Scope of the second symmetrization in the canonical-mapping parameter.
    T2Reading {
        PairScope => "pair-scope",
        BracketScope => "bracket-scope",
    }
);

reading!(
    /// How `ν̂` is evaluated.
    ///
    /// `literal-target-conn`: the printed formula, barred blocks differentiated
    /// in the target space. `literal-source-conn`: the printed formula with the
    /// barred `σ̄, F̄` blocks differentiated in the source space. `rederived`:
    /// the `δ^i_m` coefficient of `Δ̂` obtained from the `ω`-derivative
    /// expansion, with the opposite sign.
    NuHatReading {
        LiteralTarget => "literal-target-conn",
        LiteralSource => "literal-source-conn",
        Rederived => "rederived",
    }
);

reading!(
    /// Coefficient of the torsion-trace term `L^β_{jn}T̃^α_{βα}δ^i_m` in `ρ̂`:
    /// `1` as printed, or `1/(N+1)`.
    RhoReading {
        Literal => "literal",
        TraceScaled => "trace-scaled",
    }
);

reading!(
    /// Whether the `𝓕` traces entering the Ricci combination are plain
    /// (`𝓕_{jm}`) or alternated (`𝓕_{jm} - 𝓕_{mj}`).
    TraceReading {
        Plain => "plain",
        Alternated => "alternated",
    }
);

reading!(
    /// Slot of `L` receiving the derivative index in the formal derivative of
    /// `L^α_{jα}`: `L^β_{jn}` (first kind) or `L^β_{nj}`.
    ContractionReading {
        FirstKind => "first-kind",
        SecondKind => "second-kind",
    }
);

reading!(
    /// Which symmetric part multiplies the barred `𝒰` in the derivative
    /// relations: the target one (`S̃̄`) or the source one as printed.
    PairingReading {
        TargetPaired => "target-paired",
        AsPrinted => "as-printed",
    }
);

/// `ω^i_{jk}` as expressions.
pub fn omega_field<T: Real>(l: &ConnectionField<T>, inst: &MappingInstance<T>) -> TensorField<T> {
    let n = l.dim();
    let lc = l.coeffs();
    let (sigma, f) = (&inst.sigma, &inst.f);
    let c = lit::<T>(1.0) / count::<T>(n + 1);
    let half = lit::<T>(0.5);
    let trace = ExprAst::sum_by(n, |a| f.comp(&[a, a]).clone());
    let contr: Vec<ExprAst<T>> = (0..n)
        .map(|j| ExprAst::sum_by(n, |a| lc.comp(&[a, j, a]).clone()))
        .collect();
    let g: Vec<ExprAst<T>> = (0..n)
        .map(|j| sigma.comp(&[j]) * &trace + ExprAst::sum_by(n, |a| sigma.comp(&[a]) * f.comp(&[a, j])))
        .collect();
    TensorField::from_fn(n, 1, 2, |ix| {
        let (i, j, k) = (ix[0], ix[1], ix[2]);
        let mut t = (sigma.comp(&[j]) * f.comp(&[i, k]) + sigma.comp(&[k]) * f.comp(&[i, j])).scale(-half);
        if i == k {
            t = t + contr[j].scale(c) + g[j].scale(half * c);
        }
        if i == j {
            t = t + contr[k].scale(c) + g[k].scale(half * c);
        }
        t
    })
}

/// `𝒯^i_{jk} = L^i_{jk} - ω^i_{jk}`.
pub fn thomas_field<T: Real>(l: &ConnectionField<T>, inst: &MappingInstance<T>) -> TensorField<T> {
    l.coeffs().sub(&omega_field(l, inst))
}

/// `𝒰^i_{jk} = ½(𝒯^i_{jk} + 𝒯^i_{kj})`.
pub fn u_field<T: Real>(thomas: &TensorField<T>) -> TensorField<T> {
    let half = lit::<T>(0.5);
    TensorField::from_fn(thomas.dim(), 1, 2, |ix| {
        (thomas.comp(&[ix[0], ix[1], ix[2]]) + thomas.comp(&[ix[0], ix[2], ix[1]])).scale(half)
    })
}

pub fn omega<T: Real>(l: &ConnectionField<T>, inst: &MappingInstance<T>, x: &[T]) -> Dense<T> {
    omega_field(l, inst).eval(x)
}

pub fn thomas_pi2<T: Real>(l: &ConnectionField<T>, inst: &MappingInstance<T>, x: &[T]) -> Dense<T> {
    thomas_field(l, inst).eval(x)
}

pub fn u_sym<T: Real>(l: &ConnectionField<T>, inst: &MappingInstance<T>, x: &[T]) -> Dense<T> {
    u_field(&thomas_field(l, inst)).eval(x)
}

/// Symbolic objects of one side of a mapping pair.
#[derive(Debug, Clone)]
pub struct SpaceData<T = f64> {
    pub l: ConnectionField<T>,
    pub inst: MappingInstance<T>,
    pub split: ConnectionSplit<T>,
    pub omega: TensorField<T>,
    pub thomas: TensorField<T>,
    pub u: TensorField<T>,
    l_jet: JetField<T>,
    s_jet: JetField<T>,
    omega_jet: JetField<T>,
    u_jet: JetField<T>,
    sigma_jet: JetField<T>,
    f_jet: JetField<T>,
}

impl<T: Real> SpaceData<T> {
    pub fn new(l: ConnectionField<T>, inst: MappingInstance<T>) -> Self {
        let split = l.split();
        let omega = omega_field(&l, &inst);
        let thomas = l.coeffs().sub(&omega);
        let u = u_field(&thomas);
        SpaceData {
            l_jet: JetField::new(l.coeffs().clone()),
            s_jet: JetField::new(split.sym.clone()),
            omega_jet: JetField::new(omega.clone()),
            u_jet: JetField::new(u.clone()),
            sigma_jet: JetField::new(inst.sigma.clone()),
            f_jet: JetField::new(inst.f.clone()),
            l,
            inst,
            split,
            omega,
            thomas,
            u,
        }
    }

    pub fn dim(&self) -> usize {
        self.l.dim()
    }

    pub fn at(&self, x: &[T], mode: DiffMode<T>) -> PointData<T> {
        let l = self.l.eval(x);
        let l_jet = self.l_jet.jet(x, mode);
        let s_jet = self.s_jet.jet(x, mode);
        let omega_jet = self.omega_jet.jet(x, mode);
        let u_jet = self.u_jet.jet(x, mode);
        let sigma_jet = self.sigma_jet.jet(x, mode);
        let f_jet = self.f_jet.jet(x, mode);
        PointData {
            e: self.inst.e_value(),
            ds: covariant_from_jet(&l, &s_jet, 1, Kind::First),
            domega: covariant_from_jet(&l, &omega_jet, 1, Kind::First),
            du: covariant_from_jet(&l, &u_jet, 1, Kind::First),
            dsigma: covariant_from_jet(&l, &sigma_jet, 0, Kind::First),
            df: covariant_from_jet(&l, &f_jet, 1, Kind::First),
            c_l: contraction_derivative(&l, &l_jet),
            c_s: contraction_derivative(&l, &s_jet),
            t: self.split.torsion.eval(x),
            thomas: self.thomas.eval(x),
            u: u_jet.value.clone(),
            mu: self.inst.mu.eval(x),
            nu: self.inst.nu.eval(x),
            psi: self.inst.psi.eval(x),
            l,
            l_jet,
            s_jet,
            omega_jet,
            sigma_jet,
            f_jet,
        }
    }
}

/// Everything one side contributes at one point. Derivative arrays carry the
/// derivative index last and are first-kind derivatives in the side's own
/// connection.
#[derive(Debug, Clone)]
pub struct PointData<T = f64> {
    pub e: T,
    pub l: Dense<T>,
    pub t: Dense<T>,
    pub thomas: Dense<T>,
    /// `𝒰` evaluated from its symbolic field.
    pub u: Dense<T>,
    pub mu: Dense<T>,
    pub nu: Dense<T>,
    pub psi: Dense<T>,
    pub l_jet: Jet<T>,
    pub s_jet: Jet<T>,
    pub omega_jet: Jet<T>,
    pub sigma_jet: Jet<T>,
    pub f_jet: Jet<T>,
    /// `S̃^i_{jm|n}`.
    pub ds: Dense<T>,
    /// `ω^i_{jm|n}`.
    pub domega: Dense<T>,
    /// `𝒰^i_{jm|n}`.
    pub du: Dense<T>,
    /// `σ_{j|n}`.
    pub dsigma: Dense<T>,
    /// `F^i_{j|n}`.
    pub df: Dense<T>,
    /// Formal derivative of `L^α_{jα}`, indexed `(j, n)`.
    pub c_l: Dense<T>,
    /// Formal derivative of `S̃^α_{jα}`, indexed `(j, n)`.
    pub c_s: Dense<T>,
}

impl<T: Real> PointData<T> {
    pub fn dim(&self) -> usize {
        self.l.dim()
    }

    pub fn s(&self) -> &Dense<T> {
        &self.s_jet.value
    }

    pub fn omega(&self) -> &Dense<T> {
        &self.omega_jet.value
    }

    pub fn sigma(&self) -> &Dense<T> {
        &self.sigma_jet.value
    }

    pub fn f(&self) -> &Dense<T> {
        &self.f_jet.value
    }

    pub fn trace_f(&self) -> T {
        let f = self.f();
        (0..self.dim()).map(|a| f.at2(a, a)).sum()
    }

    pub fn curvature(&self, mode: CurvatureMode) -> Dense<T> {
        match mode {
            CurvatureMode::Paper => curvature_paper_from(&self.l, &self.s_jet, &self.t),
            CurvatureMode::Standard => curvature_std_from(&self.s_jet),
        }
    }

    /// `G^i_{jmn} = σ_{j|n}F^i_m + σ_{m|n}F^i_j + σ_jF^i_{m|n} + σ_mF^i_{j|n}`.
    pub fn g_block(&self) -> Dense<T> {
        g_block(self.sigma(), self.f(), &self.dsigma, &self.df)
    }

    /// `h_{jn} = σ_{j|n}F + σ_{α|n}F^α_j + σ_αF^α_{j|n}`.
    pub fn h(&self) -> Dense<T> {
        h_block(self.sigma(), self.f(), &self.dsigma, &self.df)
    }

    /// `k_n = μ_nF + μ_αF^α_n - F^α_{n|α}`.
    pub fn k(&self) -> Dense<T> {
        k_vector(&self.mu, self.f(), &self.df)
    }

    /// `L^β_{jn}T̃^α_{βα}`.
    pub fn torsion_trace_term(&self) -> Dense<T> {
        let n = self.dim();
        let tv = Dense::from_fn(n, 1, |ix| (0..n).map(|a| self.t.at3(a, ix[0], a)).sum());
        Dense::from_fn(n, 2, |ix| (0..n).map(|b| self.l.at3(b, ix[0], ix[1]) * tv.at1(b)).sum())
    }

    /// Formal derivative of `L^α_{jα}` with the derivative index placed per
    /// `reading`.
    pub fn contraction_derivative(&self, reading: ContractionReading) -> Dense<T> {
        match reading {
            ContractionReading::FirstKind => self.c_l.clone(),
            ContractionReading::SecondKind => {
                let n = self.dim();
                let c = Dense::from_fn(n, 1, |ix| (0..n).map(|a| self.l.at3(a, ix[0], a)).sum());
                Dense::from_fn(n, 2, |ix| {
                    let (j, m) = (ix[0], ix[1]);
                    let partial: T = (0..n).map(|a| self.l_jet.grad.at4(a, j, a, m)).sum();
                    partial - (0..n).map(|b| self.l.at3(b, m, j) * c.at1(b)).sum::<T>()
                })
            }
        }
    }

    pub fn f_script(&self) -> Dense<T> {
        f_script_from(self)
    }
}

pub fn g_block<T: Real>(sigma: &Dense<T>, f: &Dense<T>, dsigma: &Dense<T>, df: &Dense<T>) -> Dense<T> {
    let n = f.dim();
    Dense::from_fn(n, 4, |ix| {
        let (i, j, m, nn) = (ix[0], ix[1], ix[2], ix[3]);
        dsigma.at2(j, nn) * f.at2(i, m)
            + dsigma.at2(m, nn) * f.at2(i, j)
            + sigma.at1(j) * df.at3(i, m, nn)
            + sigma.at1(m) * df.at3(i, j, nn)
    })
}

pub fn h_block<T: Real>(sigma: &Dense<T>, f: &Dense<T>, dsigma: &Dense<T>, df: &Dense<T>) -> Dense<T> {
    let n = f.dim();
    let trace: T = (0..n).map(|a| f.at2(a, a)).sum();
    Dense::from_fn(n, 2, |ix| {
        let (j, nn) = (ix[0], ix[1]);
        dsigma.at2(j, nn) * trace
            + (0..n)
                .map(|a| dsigma.at2(a, nn) * f.at2(a, j) + sigma.at1(a) * df.at3(a, j, nn))
                .sum::<T>()
    })
}

pub fn k_vector<T: Real>(mu: &Dense<T>, f: &Dense<T>, df: &Dense<T>) -> Dense<T> {
    let n = f.dim();
    let trace: T = (0..n).map(|a| f.at2(a, a)).sum();
    Dense::from_fn(n, 1, |ix| {
        let j = ix[0];
        mu.at1(j) * trace + (0..n).map(|a| mu.at1(a) * f.at2(a, j) - df.at3(a, j, a)).sum::<T>()
    })
}

/// `𝓕^i_{jmn}`: alternated `½G` block, doubled `S̃S̃` products, `ω·L` products
/// and `-2ω^i_{jα}T̃^α_{mn}`.
pub fn f_script_from<T: Real>(p: &PointData<T>) -> Dense<T> {
    let n = p.dim();
    let g = p.g_block();
    let (s, w, l, t) = (p.s(), p.omega(), &p.l, &p.t);
    let half = lit::<T>(0.5);
    let two = lit::<T>(2.0);
    Dense::from_fn(n, 4, |ix| {
        let (i, j, m, nn) = (ix[0], ix[1], ix[2], ix[3]);
        let mut r = half * (g.at4(i, j, m, nn) - g.at4(i, j, nn, m));
        for a in 0..n {
            r += -two * s.at3(i, a, nn) * s.at3(a, j, m) + two * s.at3(a, j, nn) * s.at3(i, a, m);
            r += w.at3(a, j, m) * l.at3(i, a, nn) + w.at3(i, a, nn) * l.at3(a, j, m)
                - w.at3(i, a, m) * l.at3(a, j, nn)
                - w.at3(a, j, nn) * l.at3(i, a, m);
            r -= two * w.at3(i, j, a) * t.at3(a, m, nn);
        }
        r
    })
}

pub fn f_script<T: Real>(
    l: &ConnectionField<T>,
    inst: &MappingInstance<T>,
    x: &[T],
    mode: DiffMode<T>,
) -> Dense<T> {
    SpaceData::new(l.clone(), inst.clone()).at(x, mode).f_script()
}

/// `𝓕_{jm} = 𝓕^α_{jmα}`.
pub fn f_trace<T: Real>(f: &Dense<T>) -> Dense<T> {
    ricci(f)
}

/// `X_{jm} - X_{mj}`.
pub fn alternate<T: Real>(x: &Dense<T>) -> Dense<T> {
    x.sub(&x.swap_slots(0, 1))
}

/// `Q + (1/(N+1))δ^i_jY_{[mn]} + (N/(N²-1))δ^i_{[m}Y_{jn]} + (1/(N²-1))δ^i_{[m}Y_{n]j}`
/// with `Y` the trace of `Q` (or its alternation).
pub fn weyl_part<T: Real>(q: &Dense<T>, reading: TraceReading) -> Dense<T> {
    let n = q.dim();
    let tr = ricci(q);
    let y = match reading {
        TraceReading::Plain => tr,
        TraceReading::Alternated => alternate(&tr),
    };
    let nf = count::<T>(n);
    let c1 = T::one() / (nf + T::one());
    let c2 = nf / (nf * nf - T::one());
    let c3 = T::one() / (nf * nf - T::one());
    Dense::from_fn(n, 4, |ix| {
        let (i, j, m, nn) = (ix[0], ix[1], ix[2], ix[3]);
        let mut r = q.at4(i, j, m, nn);
        if i == j {
            r += c1 * (y.at2(m, nn) - y.at2(nn, m));
        }
        if i == m {
            r += c2 * y.at2(j, nn) + c3 * y.at2(nn, j);
        }
        if i == nn {
            r -= c2 * y.at2(j, m) + c3 * y.at2(m, j);
        }
        r
    })
}

/// `𝒲` from a curvature and `𝓕`, with the trace reading applied to the `𝓕`
/// block (the curvature block always uses plain Ricci traces).
pub fn weyl_from<T: Real>(r: &Dense<T>, fs: &Dense<T>, reading: TraceReading) -> Dense<T> {
    weyl_part(r, TraceReading::Plain).add(&weyl_part(fs, reading))
}

pub fn weyl_pi2<T: Real>(
    l: &ConnectionField<T>,
    inst: &MappingInstance<T>,
    x: &[T],
    curvature: CurvatureMode,
    reading: TraceReading,
    mode: DiffMode<T>,
) -> Dense<T> {
    let p = SpaceData::new(l.clone(), inst.clone()).at(x, mode);
    weyl_from(&p.curvature(curvature), &p.f_script(), reading)
}

/// `δ^i_m v_{jn} + δ^i_j v_{mn}` pattern used throughout: returns
/// `a_{jn}δ^i_m + a_{mn}δ^i_j` as a rank-4 array.
pub fn delta_pair<T: Real>(a: &Dense<T>) -> Dense<T> {
    let n = a.dim();
    Dense::from_fn(n, 4, |ix| {
        let (i, j, m, nn) = (ix[0], ix[1], ix[2], ix[3]);
        let mut r = T::zero();
        if i == m {
            r += a.at2(j, nn);
        }
        if i == j {
            r += a.at2(m, nn);
        }
        r
    })
}

/// `b_n(σ_jδ^i_m + σ_mδ^i_j)`.
fn sigma_delta<T: Real>(b: &Dense<T>, sigma: &Dense<T>) -> Dense<T> {
    let n = b.dim();
    delta_pair(&Dense::from_fn(n, 2, |ix| b.at1(ix[1]) * sigma.at1(ix[0])))
}

/// `S^i_{αn}U^α_{jm} - S^α_{jn}U^i_{αm} - S^α_{mn}U^i_{jα}`.
fn su_block<T: Real>(s: &Dense<T>, u: &Dense<T>) -> Dense<T> {
    let n = s.dim();
    Dense::from_fn(n, 4, |ix| {
        let (i, j, m, nn) = (ix[0], ix[1], ix[2], ix[3]);
        (0..n)
            .map(|a| s.at3(i, a, nn) * u.at3(a, j, m) - s.at3(a, j, nn) * u.at3(i, a, m) - s.at3(a, m, nn) * u.at3(i, j, a))
            .sum()
    })
}

/// Connection-difference block of the `𝒰`-derivative relation: the barred
/// `𝒰` paired with `S̃̄` (or with `S̃` as printed) minus the source pairing.
pub fn u_pairing_block<T: Real>(src: &PointData<T>, dst: &PointData<T>, reading: PairingReading) -> Dense<T> {
    let s_for_bar = match reading {
        PairingReading::TargetPaired => dst.s(),
        PairingReading::AsPrinted => src.s(),
    };
    su_block(s_for_bar, &dst.u).sub(&su_block(src.s(), &src.u))
}

/// Expansion of `ω^i_{jm|n}` in terms of the mapping data:
/// `(1/(N+1))(L^α_{jα|n}δ^i_m + L^α_{mα|n}δ^i_j) + ½(ν_n - eσ_n)(σ_jδ^i_m + σ_mδ^i_j) - ½G
///  + (1/(2(N+1)))(h_{jn}δ^i_m + h_{mn}δ^i_j) + (1/(2(N+1)))k_n(σ_jδ^i_m + σ_mδ^i_j)`.
pub fn omega_derivative_expansion<T: Real>(p: &PointData<T>, reading: ContractionReading) -> Dense<T> {
    let n = p.dim();
    let c = T::one() / count::<T>(n + 1);
    let half = lit::<T>(0.5);
    let nu_e = p.nu.sub(&p.sigma().scale(p.e));
    delta_pair(&p.contraction_derivative(reading))
        .scale(c)
        .add(&sigma_delta(&nu_e, p.sigma()).scale(half))
        .sub(&p.g_block().scale(half))
        .add(&delta_pair(&p.h()).scale(half * c))
        .add(&sigma_delta(&p.k(), p.sigma()).scale(half * c))
}

/// `ρ̂^i_{jmn}` of one side (half the printed combination).
pub fn rho_hat_from<T: Real>(p: &PointData<T>, reading: RhoReading) -> Dense<T> {
    let n = p.dim();
    let c = T::one() / count::<T>(n + 1);
    let tcoef = match reading {
        RhoReading::Literal => T::one(),
        RhoReading::TraceScaled => c,
    };
    let half = lit::<T>(0.5);
    let nu_e = p.nu.sub(&p.sigma().scale(p.e));
    let mut r = delta_pair(&p.torsion_trace_term()).scale(-tcoef);
    r = r.add(&sigma_delta(&nu_e, p.sigma()).scale(half));
    r = r.sub(&p.g_block().scale(half));
    r = r.add(&delta_pair(&p.h()).scale(half * c));
    r.add(&sigma_delta(&p.k(), p.sigma()).scale(half * c))
}

/// `Δ̂^i_{jmn} = ω̄^i_{jm‖n} - ω^i_{jm|n}`, each derivative in its own space.
pub fn delta_hat_from<T: Real>(src: &PointData<T>, dst: &PointData<T>) -> Dense<T> {
    dst.domega.sub(&src.domega)
}

/// Right side of the `Δ̂` decomposition: `(1/(N+1))` times the `δ`-paired
/// difference of the formal `S̃`-contraction derivatives, plus `ρ̂̄ - ρ̂`.
pub fn delta_hat_decomposition<T: Real>(src: &PointData<T>, dst: &PointData<T>, reading: RhoReading) -> Dense<T> {
    let n = src.dim();
    let c = T::one() / count::<T>(n + 1);
    delta_pair(&dst.c_s.sub(&src.c_s))
        .scale(c)
        .add(&rho_hat_from(dst, reading))
        .sub(&rho_hat_from(src, reading))
}

/// `h̄` and `k̄` of the target side with derivatives taken in the source
/// connection.
fn barred_blocks_in_source<T: Real>(src: &PointData<T>, dst: &PointData<T>) -> (Dense<T>, Dense<T>) {
    let dsigma = covariant_from_jet(&src.l, &dst.sigma_jet, 0, Kind::First);
    let df = covariant_from_jet(&src.l, &dst.f_jet, 1, Kind::First);
    (
        h_block(dst.sigma(), dst.f(), &dsigma, &df),
        k_vector(&dst.mu, dst.f(), &df),
    )
}

/// `ν̂_{ij}` from both sides of the mapping.
pub fn nu_hat_from<T: Real>(src: &PointData<T>, dst: &PointData<T>, reading: NuHatReading) -> Dense<T> {
    let n = src.dim();
    let c = T::one() / count::<T>(n + 1);
    let half = lit::<T>(0.5);
    let outer = |b: &Dense<T>, s: &Dense<T>| Dense::from_fn(n, 2, |ix| b.at1(ix[1]) * s.at1(ix[0]));
    let nu_e = src.nu.sub(&src.sigma().scale(src.e));
    let nu_e_bar = dst.nu.sub(&dst.sigma().scale(dst.e));
    match reading {
        NuHatReading::Rederived => {
            let side = |p: &PointData<T>, ne: &Dense<T>| {
                p.c_s
                    .scale(c)
                    .sub(&p.torsion_trace_term().scale(c))
                    .add(&outer(ne, p.sigma()).scale(half))
                    .add(&p.h().scale(half * c))
                    .add(&outer(&p.k(), p.sigma()).scale(half * c))
            };
            side(src, &nu_e).sub(&side(dst, &nu_e_bar))
        }
        NuHatReading::LiteralTarget | NuHatReading::LiteralSource => {
            let (hb, kb) = match reading {
                NuHatReading::LiteralTarget => (dst.h(), dst.k()),
                _ => barred_blocks_in_source(src, dst),
            };
            let barred = dst
                .c_s
                .scale(-c)
                .add(&dst.torsion_trace_term())
                .sub(&outer(&nu_e_bar, src.sigma()))
                .add(&hb.scale(half * c))
                .sub(&outer(&kb, dst.sigma()).scale(half * c));
            let plain = src
                .c_s
                .scale(c)
                .sub(&src.torsion_trace_term())
                .add(&outer(&nu_e, src.sigma()))
                .sub(&src.h().scale(half * c))
                .add(&outer(&src.k(), src.sigma()).scale(half * c));
            barred.add(&plain)
        }
    }
}

/// `P(v)^i_{jmn} = -δ^i_mv_{jn} + δ^i_nv_{jm} - δ^i_jv_{[mn]}`.
pub fn projective_term<T: Real>(v: &Dense<T>) -> Dense<T> {
    let n = v.dim();
    Dense::from_fn(n, 4, |ix| {
        let (i, j, m, nn) = (ix[0], ix[1], ix[2], ix[3]);
        let mut r = T::zero();
        if i == m {
            r -= v.at2(j, nn);
        }
        if i == nn {
            r += v.at2(j, m);
        }
        if i == j {
            r -= v.at2(m, nn) - v.at2(nn, m);
        }
        r
    })
}

/// Displayed formula with the leading `S̃`:
/// `S̃^i_{jk} - ((FS̃^α_{kα} - F^α_kS̃^β_{αβ})F^i_j + (FS̃^α_{jα} - F^α_jS̃^β_{αβ})F^i_k)/(e - F²)`.
pub fn t1<T: Real>(l: &ConnectionField<T>, inst: &MappingInstance<T>, x: &[T]) -> Result<Dense<T>, InvariantError> {
    let n = l.dim();
    let s = l.split().sym.eval(x);
    let f = inst.f.eval(x);
    let trace: T = (0..n).map(|a| f.at2(a, a)).sum();
    let denom = inst.e_value() - trace * trace;
    if denom.abs() < lit(1e-12) {
        return Err(InvariantError::DegenerateAffinor(to_f64(denom.abs())));
    }
    let sc: Vec<T> = (0..n).map(|j| (0..n).map(|a| s.at3(a, j, a)).sum()).collect();
    let w: Vec<T> = (0..n)
        .map(|k| trace * sc[k] - (0..n).map(|a| f.at2(a, k) * sc[a]).sum::<T>())
        .collect();
    Ok(Dense::from_fn(n, 3, |ix| {
        let (i, j, k) = (ix[0], ix[1], ix[2]);
        s.at3(i, j, k) - (w[k] * f.at2(i, j) + w[j] * f.at2(i, k)) / denom
    }))
}

/// Classical Thomas parameter of the associated space,
/// `S̃^i_{jk} - (S̃^α_{jα}δ^i_k + S̃^α_{kα}δ^i_j)/(N+1)`.
pub fn thomas_classical<T: Real>(s: &Dense<T>) -> Dense<T> {
    let n = s.dim();
    let c = T::one() / count::<T>(n + 1);
    let sc: Vec<T> = (0..n).map(|j| (0..n).map(|a| s.at3(a, j, a)).sum()).collect();
    Dense::from_fn(n, 3, |ix| {
        let (i, j, k) = (ix[0], ix[1], ix[2]);
        let mut r = s.at3(i, j, k);
        if i == k {
            r -= c * sc[j];
        }
        if i == j {
            r -= c * sc[k];
        }
        r
    })
}

/// Invariant candidate of the canonical mappings (compute only).
pub fn t2hat<T: Real>(
    l: &ConnectionField<T>,
    inst: &MappingInstance<T>,
    x: &[T],
    reading: T2Reading,
    mode: DiffMode<T>,
) -> Dense<T> {
    let n = l.dim();
    let p = SpaceData::new(l.clone(), inst.clone()).at(x, mode);
    let (f, df, t) = (p.f(), &p.df, &p.t);
    let e = p.e;
    let c = T::one() / count::<T>(n + 1);
    let tf = |a: usize, g: usize, b: usize| -> T { (0..n).map(|q| t.at3(a, q, g) * f.at2(q, b)).sum() };
    // first bracket: F^α_{j|k} + F^α_{k|j} - (T̃^α_{βk}F^β_j + T̃^α_{βj}F^β_k)
    let inner = Dense::from_fn(n, 3, |ix| {
        let (a, j, k) = (ix[0], ix[1], ix[2]);
        df.at3(a, j, k) + df.at3(a, k, j) - (tf(a, k, j) + tf(a, j, k))
    });
    // second bracket, indexed (α, β, j)
    let second = Dense::from_fn(n, 3, |ix| {
        let (a, b, j) = (ix[0], ix[1], ix[2]);
        match reading {
            T2Reading::PairScope => df.at3(a, b, j) - (tf(a, b, j) + tf(a, j, b)),
            T2Reading::BracketScope => df.at3(a, b, j) - tf(a, b, j) + df.at3(a, j, b) - tf(a, j, b),
        }
    });
    let contracted: Vec<T> = (0..n)
        .map(|j| {
            (0..n)
                .flat_map(|a| (0..n).map(move |b| (a, b)))
                .map(|(a, b)| f.at2(b, a) * second.at3(a, b, j))
                .sum()
        })
        .collect();
    let base = thomas_classical(p.s());
    Dense::from_fn(n, 3, |ix| {
        let (i, j, k) = (ix[0], ix[1], ix[2]);
        let mut r = base.at3(i, j, k) + e * (0..n).map(|a| f.at2(i, a) * inner.at3(a, j, k)).sum::<T>();
        if i == k {
            r -= e * c * contracted[j];
        }
        if i == j {
            r -= e * c * contracted[k];
        }
        r
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agmap::{deform, Generator};
    use crate::tensor::max_abs_diff;

    fn cov(n: usize, texts: &[&str]) -> TensorField<f64> {
        TensorField::parse(n, 0, 1, texts).unwrap()
    }

    fn generated3() -> (ConnectionField<f64>, MappingInstance<f64>) {
        Generator {
            e: 1,
            f0: Dense::from_fn(3, 2, |ix| {
                if ix[0] != ix[1] {
                    0.0
                } else if ix[0] == 1 {
                    -1.0
                } else {
                    1.0
                }
            }),
            p: cov(3, &["x2", "0.3*x1*x3", "sin(x1)"]),
            q: cov(3, &["0.2*x3", "x1*x2", "0.5"]),
            sigma: cov(3, &["x1", "x2^2", "cos(x3)"]),
            psi: cov(3, &["1 + x3", "0.1*x1", "x2*x1"]),
        }
        .build()
        .unwrap()
    }

    const X: [f64; 3] = [0.3, -0.2, 0.4];

    #[test]
    fn omega_symmetric_and_sigma_free_case() {
        let (l, mut inst) = generated3();
        let w = omega(&l, &inst, &X);
        assert!(max_abs_diff(&w, &w.swap_slots(1, 2)).unwrap().0 <= 1e-14);
        inst.sigma = TensorField::zeros(3, 0, 1);
        let w = omega(&l, &inst, &X);
        let lv = l.eval(&X);
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let mut want = 0.0;
                    if i == k {
                        want += (0..3).map(|a| lv.at3(a, j, a)).sum::<f64>() / 4.0;
                    }
                    if i == j {
                        want += (0..3).map(|a| lv.at3(a, k, a)).sum::<f64>() / 4.0;
                    }
                    assert!((w.at3(i, j, k) - want).abs() <= 1e-15);
                }
            }
        }
    }

    #[test]
    fn trace_free_sigma_free_gives_l() {
        let mut inst = MappingInstance::<f64>::zero(2);
        inst.f = TensorField::parse(2, 1, 1, &["1", "0", "0", "-1"]).unwrap();
        let map: std::collections::BTreeMap<String, String> =
            [("1,1,2".to_string(), "x1".to_string()), ("2,2,1".to_string(), "x2".to_string())].into();
        let l = ConnectionField::from_sparse(2, &map).unwrap();
        let x = [0.4, 0.6];
        assert_eq!(omega(&l, &inst, &x).max_abs(), 0.0);
        assert_eq!(thomas_pi2(&l, &inst, &x), l.eval(&x));
        let s = l.split().sym.eval(&x);
        assert!(max_abs_diff(&u_sym(&l, &inst, &x), &s).unwrap().0 <= 1e-15);
    }

    #[test]
    fn thomas_invariance_and_u_identity() {
        let (l, inst) = generated3();
        let lbar = deform(&l, &inst).unwrap();
        let inv = inst.inverse();
        let a = thomas_pi2(&l, &inst, &X);
        let b = thomas_pi2(&lbar, &inv, &X);
        assert!(max_abs_diff(&a, &b).unwrap().0 <= 1e-12);
        let u = u_sym(&l, &inst, &X);
        let s_minus_w = l.split().sym.eval(&X).sub(&omega(&l, &inst, &X));
        assert!(max_abs_diff(&u, &s_minus_w).unwrap().0 <= 1e-13);
        let torsion = l.split().torsion.eval(&X);
        let anti = a.sub(&a.swap_slots(1, 2)).scale(0.5);
        assert!(max_abs_diff(&anti, &torsion).unwrap().0 <= 1e-14);
    }

    #[test]
    fn weyl_invariance_paper_mode() {
        let (l, inst) = generated3();
        let lbar = deform(&l, &inst).unwrap();
        let inv = inst.inverse();
        let w = weyl_pi2(&l, &inst, &X, CurvatureMode::Paper, TraceReading::Plain, DiffMode::Exact);
        let wb = weyl_pi2(&lbar, &inv, &X, CurvatureMode::Paper, TraceReading::Plain, DiffMode::Exact);
        assert!(w.max_abs() > 1e-3);
        assert!(max_abs_diff(&w, &wb).unwrap().0 <= 1e-10);
    }

    #[test]
    fn zero_data_gives_zero_objects() {
        let l = ConnectionField::<f64>::zero(3);
        let inst = MappingInstance::<f64>::zero(3);
        let x = [0.1, 0.2, 0.3];
        assert_eq!(f_script(&l, &inst, &x, DiffMode::Exact).max_abs(), 0.0);
        let w = weyl_pi2(&l, &inst, &x, CurvatureMode::Paper, TraceReading::Plain, DiffMode::Exact);
        assert_eq!(w.max_abs(), 0.0);
        let p = SpaceData::new(l, inst).at(&x, DiffMode::Exact);
        for r in RhoReading::ALL {
            assert_eq!(rho_hat_from(&p, *r).max_abs(), 0.0);
        }
        for r in NuHatReading::ALL {
            assert_eq!(nu_hat_from(&p, &p, *r).max_abs(), 0.0);
        }
    }

    #[test]
    fn f_script_sigma_block_antisymmetric() {
        let (l, inst) = generated3();
        let p = SpaceData::new(l, inst).at(&X, DiffMode::Exact);
        let g = p.g_block();
        let block = g.sub(&g.swap_slots(2, 3)).scale(0.5);
        assert!(max_abs_diff(&block, &block.swap_slots(2, 3).scale(-1.0)).unwrap().0 == 0.0);
        // trace of the block against an independent contraction
        let tr = f_trace(&block);
        for j in 0..3 {
            for m in 0..3 {
                let want: f64 = (0..3).map(|a| 0.5 * (g.at4(a, j, m, a) - g.at4(a, j, a, m))).sum();
                assert!((tr.at2(j, m) - want).abs() <= 1e-14);
            }
        }
        assert_eq!(f_trace(&p.f_script()).shape(), vec![3, 3]);
    }

    #[test]
    fn identity_deformation_has_zero_delta_hat() {
        let (l, mut inst) = generated3();
        inst.psi = TensorField::zeros(3, 0, 1);
        inst.sigma = TensorField::zeros(3, 0, 1);
        let lbar = deform(&l, &inst).unwrap();
        let src = SpaceData::new(l, inst.clone()).at(&X, DiffMode::Exact);
        let dst = SpaceData::new(lbar, inst.inverse()).at(&X, DiffMode::Exact);
        assert!(delta_hat_from(&src, &dst).max_abs() <= 1e-15);
    }

    #[test]
    fn nu_hat_swap_negates_rederived() {
        let (l, inst) = generated3();
        let lbar = deform(&l, &inst).unwrap();
        let src = SpaceData::new(l, inst.clone()).at(&X, DiffMode::Exact);
        let dst = SpaceData::new(lbar, inst.inverse()).at(&X, DiffMode::Exact);
        let a = nu_hat_from(&src, &dst, NuHatReading::Rederived);
        let b = nu_hat_from(&dst, &src, NuHatReading::Rederived);
        assert!(max_abs_diff(&a, &b.scale(-1.0)).unwrap().0 <= 1e-13);
    }

    #[test]
    fn t1_examples() {
        let (l, inst) = generated3();
        // diag(1,-1,1): trace 1, e - F^2 = 0
        assert!(matches!(t1(&l, &inst, &X), Err(InvariantError::DegenerateAffinor(_))));
        let mut inst2 = MappingInstance::<f64>::zero(2);
        inst2.f = TensorField::parse(2, 1, 1, &["1", "0", "0", "-1"]).unwrap();
        inst2.e = 1;
        let map: std::collections::BTreeMap<String, String> =
            [("1,2,2".to_string(), "x1".to_string()), ("2,1,1".to_string(), "x2".to_string())].into();
        let l2 = ConnectionField::from_sparse(2, &map).unwrap();
        let x = [0.3, 0.1];
        // S^α_{jα} = 0 for this connection, so t1 = S̃
        let got = t1(&l2, &inst2, &x).unwrap();
        assert!(max_abs_diff(&got, &l2.split().sym.eval(&x)).unwrap().0 <= 1e-15);
    }

    #[test]
    fn t2hat_constant_affinor_zero_connection() {
        let l = ConnectionField::<f64>::zero(2);
        let mut inst = MappingInstance::<f64>::zero(2);
        inst.f = TensorField::parse(2, 1, 1, &["0", "1", "1", "0"]).unwrap();
        inst.e = 1;
        for r in T2Reading::ALL {
            assert_eq!(t2hat(&l, &inst, &[0.2, 0.2], *r, DiffMode::Exact).max_abs(), 0.0);
        }
    }

    #[test]
    fn reading_names_round_trip() {
        for r in NuHatReading::ALL {
            assert_eq!(r.name().parse::<NuHatReading>().unwrap(), *r);
        }
        assert!("bogus".parse::<TraceReading>().is_err());
    }
}
