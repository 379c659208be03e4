//! Step-by-step numerical audit of the invariance derivation for one
//! (connection, mapping) pair.
//!
//! Every check evaluates both sides of one identity at each grid point from
//! separately computed objects and records the largest componentwise gap.
//! Identities whose printed form is ambiguous are evaluated under every
//! enumerated reading; the reading with the smallest residual is kept and all
//! alternatives are reported.

use std::fmt;

use rayon::prelude::*;

use crate::agmap::{basic_defect, contracted_defect, deform, psi_from_contraction, AgmapError, MappingInstance};
use crate::curvature::{mode_gap, ricci, CurvatureMode};
use crate::invariants::{
    alternate, delta_hat_decomposition, delta_hat_from, delta_pair, f_trace, nu_hat_from,
    omega_derivative_expansion, projective_term, u_pairing_block, weyl_from, ContractionReading,
    NuHatReading, PairingReading, PointData, RhoReading, SpaceData, TraceReading,
};
use crate::scalar::{count, lit, Real};
use crate::space::{ConnectionField, Kind};
use crate::tensor::{DiffMode, Dense, Grid};

/// Identity identifiers in dependency order; `A20` and `A21` stand apart from
/// the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CheckId {
    A1,
    A2,
    A3,
    A4,
    A5,
    A6,
    A7,
    A8,
    A9,
    A10,
    A11,
    A12,
    A13,
    A14,
    A15,
    A16,
    A17,
    A18,
    A19,
    A20,
    A21,
}

impl CheckId {
    pub const ALL: [CheckId; 21] = [
        CheckId::A1,
        CheckId::A2,
        CheckId::A3,
        CheckId::A4,
        CheckId::A5,
        CheckId::A6,
        CheckId::A7,
        CheckId::A8,
        CheckId::A9,
        CheckId::A10,
        CheckId::A11,
        CheckId::A12,
        CheckId::A13,
        CheckId::A14,
        CheckId::A15,
        CheckId::A16,
        CheckId::A17,
        CheckId::A18,
        CheckId::A19,
        CheckId::A20,
        CheckId::A21,
    ];

    pub fn number(self) -> usize {
        self as usize + 1
    }

    /// Member of the dependency chain `A1 → … → A19`.
    pub fn in_chain(self) -> bool {
        self <= CheckId::A19
    }

    pub fn layer(self) -> Layer {
        if self <= CheckId::A7 {
            Layer::Algebraic
        } else {
            Layer::Derivative
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            CheckId::A1 => "reciprocity of the affinor",
            CheckId::A2 => "basic equations of the mapping",
            CheckId::A3 => "contracted basic equation",
            CheckId::A4 => "psi recovered from the contracted deformation",
            CheckId::A5 => "invariance of the generalized Thomas parameter",
            CheckId::A6 => "deformation of the symmetric part",
            CheckId::A7 => "U equals S minus omega",
            CheckId::A8 => "deformation of the U derivative",
            CheckId::A9 => "deformation of the S derivative",
            CheckId::A10 => "torsion product S^a_jm T^i_an",
            CheckId::A11 => "torsion product S^i_ja T^a_mn",
            CheckId::A12 => "expansion of the omega derivative",
            CheckId::A13 => "decomposition of the omega-derivative difference",
            CheckId::A14 => "S derivative relation through nu-hat",
            CheckId::A15 => "deformation of the curvature tensor",
            CheckId::A16 => "deformation of the Ricci tensor",
            CheckId::A17 => "alternated Ricci relation",
            CheckId::A18 => "nu-hat from the Ricci tensors",
            CheckId::A19 => "invariance of the Weyl-type tensor",
            CheckId::A20 => "gap between the two curvature readings",
            CheckId::A21 => "Weyl-type invariance under both curvature readings",
        }
    }
}

impl fmt::Display for CheckId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "A{}", self.number())
    }
}

impl std::str::FromStr for CheckId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let k: usize = s
            .strip_prefix('A')
            .and_then(|d| d.parse().ok())
            .ok_or_else(|| format!("bad check id '{s}'"))?;
        CheckId::ALL
            .get(k.wrapping_sub(1))
            .copied()
            .ok_or_else(|| format!("bad check id '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    Algebraic,
    Derivative,
}

impl Layer {
    pub fn name(self) -> &'static str {
        match self {
            Layer::Algebraic => "algebraic",
            Layer::Derivative => "derivative",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances<T = f64> {
    pub algebraic_exact: T,
    pub algebraic_fd: T,
    pub derivative_exact: T,
    pub derivative_fd: T,
}

impl<T: Real> Default for Tolerances<T> {
    fn default() -> Self {
        Tolerances {
            algebraic_exact: lit(1e-10),
            algebraic_fd: lit(1e-6),
            derivative_exact: lit(1e-8),
            derivative_fd: lit(1e-4),
        }
    }
}

impl<T: Real> Tolerances<T> {
    pub fn get(&self, layer: Layer, mode: DiffMode<T>) -> T {
        match (layer, mode.is_exact()) {
            (Layer::Algebraic, true) => self.algebraic_exact,
            (Layer::Algebraic, false) => self.algebraic_fd,
            (Layer::Derivative, true) => self.derivative_exact,
            (Layer::Derivative, false) => self.derivative_fd,
        }
    }
}

/// Fixed readings; `None` means "enumerate and keep the best".
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ReadingOverrides {
    pub pairing: Option<PairingReading>,
    pub contraction: Option<ContractionReading>,
    pub rho: Option<RhoReading>,
    pub nu_hat: Option<NuHatReading>,
    pub ricci_trace: Option<TraceReading>,
    pub weyl_trace: Option<TraceReading>,
}

#[derive(Debug, Clone)]
pub struct AuditOptions<T = f64> {
    pub mode: DiffMode<T>,
    pub curvature: CurvatureMode,
    pub tolerances: Tolerances<T>,
    pub readings: ReadingOverrides,
}

impl<T: Real> Default for AuditOptions<T> {
    fn default() -> Self {
        AuditOptions {
            mode: DiffMode::Exact,
            curvature: CurvatureMode::Paper,
            tolerances: Tolerances::default(),
            readings: ReadingOverrides::default(),
        }
    }
}

/// Residual of one reading.
#[derive(Debug, Clone, PartialEq)]
pub struct Alternative<T = f64> {
    pub reading: String,
    pub residual: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityCheck<T = f64> {
    pub id: CheckId,
    pub eq_ref: &'static str,
    pub layer: Layer,
    pub residual: T,
    pub tolerance: T,
    pub argmax_point: Vec<T>,
    /// One-based component index of the largest gap.
    pub argmax_index: Vec<usize>,
    pub pass: bool,
    /// Chosen reading (`dimension=value` pairs joined by `,`), if the check
    /// has any.
    pub reading: Option<String>,
    /// Every evaluated reading with its residual, in enumeration order.
    pub alternatives: Vec<Alternative<T>>,
    /// A check earlier in the chain already failed.
    pub inherited: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport<T = f64> {
    pub mode: DiffMode<T>,
    pub curvature: CurvatureMode,
    pub theta: u8,
    pub grid_points: usize,
    pub checks: Vec<IdentityCheck<T>>,
}

impl<T: Real> AuditReport<T> {
    pub fn check(&self, id: CheckId) -> Option<&IdentityCheck<T>> {
        self.checks.iter().find(|c| c.id == id)
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// First failing check that is not downstream of an earlier failure.
    pub fn localize_failure(&self) -> Option<&IdentityCheck<T>> {
        localize_failure(&self.checks)
    }
}

pub fn localize_failure<T>(checks: &[IdentityCheck<T>]) -> Option<&IdentityCheck<T>> {
    let mut ordered: Vec<&IdentityCheck<T>> = checks.iter().collect();
    ordered.sort_by_key(|c| c.id);
    ordered.into_iter().find(|c| !c.pass && !c.inherited)
}

/// Per-point data of both sides.
struct Pair<T> {
    x: Vec<T>,
    src: PointData<T>,
    dst: PointData<T>,
}

fn argmax<T: Real>(d: &Dense<T>) -> (T, Vec<usize>) {
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

struct Measured<T> {
    residual: T,
    point: Vec<T>,
    index: Vec<usize>,
}

/// Largest gap over all points; `gap` may return several arrays per point
/// (e.g. source and target side).
fn measure<T: Real>(pairs: &[Pair<T>], gap: impl Fn(&Pair<T>) -> Vec<Dense<T>>) -> Measured<T> {
    let mut best = Measured {
        residual: T::zero(),
        point: pairs.first().map(|p| p.x.clone()).unwrap_or_default(),
        index: Vec::new(),
    };
    for p in pairs {
        for d in gap(p) {
            let (v, idx) = argmax(&d);
            if best.index.is_empty() || v > best.residual || (v.is_nan() && !best.residual.is_nan()) {
                best = Measured {
                    residual: v,
                    point: p.x.clone(),
                    index: idx,
                };
            }
        }
    }
    best
}

fn choices<R: Copy>(all: &[R], fixed: Option<R>) -> Vec<R> {
    match fixed {
        Some(r) => vec![r],
        None => all.to_vec(),
    }
}

struct Ctx<'a, T> {
    pairs: &'a [Pair<T>],
    options: &'a AuditOptions<T>,
    n: usize,
    theta: Kind,
}

impl<T: Real> Ctx<'_, T> {
    fn finish(&self, id: CheckId, candidates: Vec<(Option<String>, Measured<T>)>) -> IdentityCheck<T> {
        let tolerance = self.options.tolerances.get(id.layer(), self.options.mode);
        let alternatives: Vec<Alternative<T>> = candidates
            .iter()
            .filter_map(|(r, m)| {
                r.as_ref().map(|r| Alternative {
                    reading: r.clone(),
                    residual: m.residual,
                })
            })
            .collect();
        let (reading, best) = candidates
            .into_iter()
            .reduce(|a, b| {
                let better = b.1.residual < a.1.residual || (a.1.residual.is_nan() && !b.1.residual.is_nan());
                if better {
                    b
                } else {
                    a
                }
            })
            .expect("at least one candidate");
        IdentityCheck {
            id,
            eq_ref: id.label(),
            layer: id.layer(),
            pass: best.residual <= tolerance,
            residual: best.residual,
            tolerance,
            argmax_point: best.point,
            argmax_index: best.index,
            reading,
            alternatives,
            inherited: false,
        }
    }

    fn single(&self, id: CheckId, gap: impl Fn(&Pair<T>) -> Vec<Dense<T>>) -> IdentityCheck<T> {
        self.finish(id, vec![(None, measure(self.pairs, gap))])
    }

    fn run(&self, id: CheckId) -> IdentityCheck<T> {
        let n = self.n;
        let nf = count::<T>(n);
        let half = lit::<T>(0.5);
        let o = &self.options.readings;
        let curv = self.options.curvature;
        match id {
            CheckId::A1 => self.single(id, |p| {
                let recip = |d: &PointData<T>| {
                    let f = d.f();
                    Dense::from_fn(n, 2, |ix| {
                        let sq: T = (0..n).map(|a| f.at2(ix[0], a) * f.at2(a, ix[1])).sum();
                        sq - if ix[0] == ix[1] { d.e } else { T::zero() }
                    })
                };
                vec![recip(&p.src), recip(&p.dst)]
            }),
            CheckId::A2 | CheckId::A3 => {
                let theta = self.theta;
                self.single(id, |p| {
                    [&p.src, &p.dst]
                        .into_iter()
                        .map(|d| {
                            let f = if id == CheckId::A2 { basic_defect } else { contracted_defect };
                            f(&d.l, &d.f_jet, d.sigma(), &d.mu, &d.nu, d.e, theta)
                        })
                        .collect()
                })
            }
            CheckId::A4 => self.single(id, |p| {
                let rec = psi_from_contraction(&p.src.l, &p.dst.l, p.src.sigma(), p.src.f());
                vec![rec.sub(&p.src.psi)]
            }),
            CheckId::A5 => self.single(id, |p| vec![p.dst.thomas.sub(&p.src.thomas)]),
            CheckId::A6 => self.single(id, |p| {
                let rhs = p.src.s().add(p.dst.omega()).sub(p.src.omega());
                vec![p.dst.s().sub(&rhs)]
            }),
            CheckId::A7 => self.single(id, |p| {
                [&p.src, &p.dst]
                    .into_iter()
                    .map(|d| d.u.sub(&d.s().sub(d.omega())))
                    .collect()
            }),
            CheckId::A8 | CheckId::A9 => {
                let cands = choices(PairingReading::ALL, o.pairing)
                    .into_iter()
                    .map(|r| {
                        let m = measure(self.pairs, |p| {
                            let b = u_pairing_block(&p.src, &p.dst, r);
                            if id == CheckId::A8 {
                                vec![p.dst.du.sub(&p.src.du).sub(&b)]
                            } else {
                                let rhs = p.src.ds.add(&p.dst.domega).sub(&p.src.domega).add(&b);
                                vec![p.dst.ds.sub(&rhs)]
                            }
                        });
                        (Some(format!("pairing={r}")), m)
                    })
                    .collect();
                self.finish(id, cands)
            }
            CheckId::A10 | CheckId::A11 => self.single(id, |p| {
                let predicted = p.src.s().add(p.dst.omega()).sub(p.src.omega());
                let prod = |s: &Dense<T>, t: &Dense<T>| {
                    Dense::from_fn(n, 4, |ix| {
                        let (i, j, m, nn) = (ix[0], ix[1], ix[2], ix[3]);
                        (0..n)
                            .map(|a| {
                                if id == CheckId::A10 {
                                    s.at3(a, j, m) * t.at3(i, a, nn)
                                } else {
                                    s.at3(i, j, a) * t.at3(a, m, nn)
                                }
                            })
                            .sum()
                    })
                };
                vec![prod(p.dst.s(), &p.dst.t).sub(&prod(&predicted, &p.src.t))]
            }),
            CheckId::A12 => {
                let cands = choices(ContractionReading::ALL, o.contraction)
                    .into_iter()
                    .map(|r| {
                        let m = measure(self.pairs, |p| {
                            [&p.src, &p.dst]
                                .into_iter()
                                .map(|d| d.domega.sub(&omega_derivative_expansion(d, r)))
                                .collect()
                        });
                        (Some(format!("contraction={r}")), m)
                    })
                    .collect();
                self.finish(id, cands)
            }
            CheckId::A13 => {
                let cands = choices(RhoReading::ALL, o.rho)
                    .into_iter()
                    .map(|r| {
                        let m = measure(self.pairs, |p| {
                            vec![delta_hat_from(&p.src, &p.dst).sub(&delta_hat_decomposition(&p.src, &p.dst, r))]
                        });
                        (Some(format!("rho={r}")), m)
                    })
                    .collect();
                self.finish(id, cands)
            }
            CheckId::A14 => {
                let mut cands = Vec::new();
                for nr in choices(NuHatReading::ALL, o.nu_hat) {
                    for pr in choices(PairingReading::ALL, o.pairing) {
                        let m = measure(self.pairs, |p| {
                            let v = nu_hat_from(&p.src, &p.dst, nr);
                            let rhs = p
                                .src
                                .ds
                                .sub(&delta_pair(&v))
                                .sub(&p.dst.g_block().scale(half))
                                .add(&p.src.g_block().scale(half))
                                .add(&u_pairing_block(&p.src, &p.dst, pr));
                            vec![p.dst.ds.sub(&rhs)]
                        });
                        cands.push((Some(format!("nu_hat={nr},pairing={pr}")), m));
                    }
                }
                self.finish(id, cands)
            }
            CheckId::A15 | CheckId::A16 | CheckId::A17 => {
                let cands = choices(NuHatReading::ALL, o.nu_hat)
                    .into_iter()
                    .map(|nr| {
                        let m = measure(self.pairs, |p| {
                            let v = nu_hat_from(&p.src, &p.dst, nr);
                            let (r, rb) = (p.src.curvature(curv), p.dst.curvature(curv));
                            let (fs, fsb) = (p.src.f_script(), p.dst.f_script());
                            match id {
                                CheckId::A15 => {
                                    let rhs = r.add(&projective_term(&v)).add(&fs).sub(&fsb);
                                    vec![rb.sub(&rhs)]
                                }
                                CheckId::A16 => {
                                    let rhs = ricci(&r)
                                        .add(&v.scale(nf - T::one()))
                                        .add(&alternate(&v))
                                        .add(&f_trace(&fs))
                                        .sub(&f_trace(&fsb));
                                    vec![ricci(&rb).sub(&rhs)]
                                }
                                _ => {
                                    let lhs = alternate(&v).scale(nf + T::one());
                                    let rhs = alternate(&ricci(&rb))
                                        .sub(&alternate(&ricci(&r)))
                                        .sub(&alternate(&f_trace(&fs)))
                                        .add(&alternate(&f_trace(&fsb)));
                                    vec![lhs.sub(&rhs)]
                                }
                            }
                        });
                        (Some(format!("nu_hat={nr}")), m)
                    })
                    .collect();
                self.finish(id, cands)
            }
            CheckId::A18 => {
                let mut cands = Vec::new();
                for nr in choices(NuHatReading::ALL, o.nu_hat) {
                    for tr in choices(TraceReading::ALL, o.ricci_trace) {
                        let m = measure(self.pairs, |p| {
                            let v = nu_hat_from(&p.src, &p.dst, nr);
                            let combo = |x: &Dense<T>| x.scale(nf).add(&x.swap_slots(0, 1));
                            let ftr = |d: &PointData<T>| {
                                let t = f_trace(&d.f_script());
                                match tr {
                                    TraceReading::Plain => t,
                                    TraceReading::Alternated => alternate(&t),
                                }
                            };
                            let rhs = combo(&ricci(&p.dst.curvature(curv)))
                                .sub(&combo(&ricci(&p.src.curvature(curv))))
                                .add(&combo(&ftr(&p.dst)))
                                .sub(&combo(&ftr(&p.src)));
                            vec![v.scale(nf * nf - T::one()).sub(&rhs)]
                        });
                        cands.push((Some(format!("nu_hat={nr},f_trace={tr}")), m));
                    }
                }
                self.finish(id, cands)
            }
            CheckId::A19 => {
                let cands = choices(TraceReading::ALL, o.weyl_trace)
                    .into_iter()
                    .map(|tr| (Some(format!("weyl_trace={tr}")), self.weyl_gap(curv, tr)))
                    .collect();
                self.finish(id, cands)
            }
            CheckId::A20 => self.single(id, |p| {
                [&p.src, &p.dst]
                    .into_iter()
                    .map(|d| {
                        d.curvature(CurvatureMode::Paper)
                            .sub(&d.curvature(CurvatureMode::Standard))
                            .sub(&mode_gap(d.s()))
                    })
                    .collect()
            }),
            CheckId::A21 => {
                let tr = o.weyl_trace.unwrap_or(TraceReading::Plain);
                let cands = CurvatureMode::ALL
                    .iter()
                    .map(|&cm| (Some(format!("curvature={cm}")), self.weyl_gap(cm, tr)))
                    .collect();
                self.finish(id, cands)
            }
        }
    }

    fn weyl_gap(&self, curv: CurvatureMode, tr: TraceReading) -> Measured<T> {
        measure(self.pairs, |p| {
            let w = weyl_from(&p.src.curvature(curv), &p.src.f_script(), tr);
            let wb = weyl_from(&p.dst.curvature(curv), &p.dst.f_script(), tr);
            vec![wb.sub(&w)]
        })
    }
}

/// Runs the requested checks (all of them when `only` is `None`) and marks
/// chain failures downstream of an earlier failure as inherited.
pub fn run_checks<T: Real>(
    l: &ConnectionField<T>,
    inst: &MappingInstance<T>,
    grid: &Grid<T>,
    options: &AuditOptions<T>,
    only: Option<&[CheckId]>,
) -> Result<AuditReport<T>, AgmapError> {
    let lbar = deform(l, inst)?;
    let src = SpaceData::new(l.clone(), inst.clone());
    let dst = SpaceData::new(lbar, inst.inverse());
    let mode = options.mode;
    let pairs: Vec<Pair<T>> = grid
        .points()
        .par_iter()
        .map(|x| Pair {
            x: x.coords().to_vec(),
            src: src.at(x, mode),
            dst: dst.at(x, mode),
        })
        .collect();
    let ctx = Ctx {
        pairs: &pairs,
        options,
        n: l.dim(),
        theta: inst.theta,
    };
    let ids: Vec<CheckId> = match only {
        Some(ids) => {
            let mut v = ids.to_vec();
            v.sort();
            v.dedup();
            v
        }
        None => CheckId::ALL.to_vec(),
    };
    let mut checks: Vec<IdentityCheck<T>> = ids.par_iter().map(|&id| ctx.run(id)).collect();
    let mut failed = false;
    for c in checks.iter_mut().filter(|c| c.id.in_chain()) {
        if !c.pass && failed {
            c.inherited = true;
        }
        failed |= !c.pass;
    }
    Ok(AuditReport {
        mode,
        curvature: options.curvature,
        theta: inst.theta.index(),
        grid_points: grid.len(),
        checks,
    })
}

pub fn run_audit<T: Real>(
    l: &ConnectionField<T>,
    inst: &MappingInstance<T>,
    grid: &Grid<T>,
    options: &AuditOptions<T>,
) -> Result<AuditReport<T>, AgmapError> {
    run_checks(l, inst, grid, options, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agmap::Generator;
    use crate::tensor::TensorField;

    fn cov(n: usize, texts: &[&str]) -> TensorField<f64> {
        TensorField::parse(n, 0, 1, texts).unwrap()
    }

    fn generated3() -> (ConnectionField<f64>, MappingInstance<f64>) {
        Generator {
            e: 1,
            f0: Dense::from_fn(3, 2, |ix| match (ix[0], ix[1]) {
                (0, 0) | (2, 2) => 1.0,
                (1, 1) => -1.0,
                _ => 0.0,
            }),
            p: cov(3, &["x2", "0.3*x1*x3", "sin(x1)"]),
            q: cov(3, &["0.2*x3", "x1*x2", "0.5"]),
            sigma: cov(3, &["x1", "x2^2", "cos(x3)"]),
            psi: cov(3, &["1 + x3", "0.1*x1", "x2*x1"]),
        }
        .build()
        .unwrap()
    }

    fn grid() -> Grid<f64> {
        Grid::generate(3, 12, Grid::default_bounds(3))
    }

    #[test]
    fn generated_instance_passes_in_paper_mode() {
        let (l, inst) = generated3();
        let rep = run_audit(&l, &inst, &grid(), &AuditOptions::default()).unwrap();
        assert!(rep.all_pass());
        assert!(rep.localize_failure().is_none());
    }

    #[test]
    fn zero_scenario_is_trivially_clean() {
        let l = ConnectionField::<f64>::zero(2);
        let rep = run_audit(&l, &MappingInstance::zero(2), &Grid::generate(1, 5, Grid::default_bounds(2)), &AuditOptions::default()).unwrap();
        assert!(rep.checks.iter().all(|c| c.residual == 0.0 && c.pass));
    }

    #[test]
    fn perturbed_mu_localizes_to_the_basic_equations() {
        let (l, mut inst) = generated3();
        inst.mu = inst.mu.add(&cov(3, &["0.1", "0", "0"]));
        let rep = run_audit(&l, &inst, &grid(), &AuditOptions::default()).unwrap();
        let first = rep.localize_failure().unwrap();
        assert_eq!(first.id, CheckId::A2);
        assert!(first.residual >= 0.1 * 1e-2);
        assert!(rep.check(CheckId::A1).unwrap().pass);
        assert!(rep.checks.iter().filter(|c| !c.pass && c.id > CheckId::A2).all(|c| c.inherited));
    }

    #[test]
    fn standard_curvature_breaks_the_curvature_deformation() {
        let (l, inst) = generated3();
        let options = AuditOptions {
            curvature: CurvatureMode::Standard,
            ..AuditOptions::default()
        };
        let rep = run_audit(&l, &inst, &grid(), &options).unwrap();
        assert_eq!(rep.localize_failure().unwrap().id, CheckId::A15);
        assert!(rep.checks.iter().filter(|c| c.id < CheckId::A15).all(|c| c.pass));
    }

    #[test]
    fn finite_differences_pass_at_loose_tolerance() {
        let (l, inst) = generated3();
        let options = AuditOptions {
            mode: DiffMode::Fd(1e-4),
            ..AuditOptions::default()
        };
        let rep = run_audit(&l, &inst, &grid(), &options).unwrap();
        assert!(rep.all_pass());
    }

    #[test]
    fn fixed_reading_is_reported_even_when_failing() {
        let (l, inst) = generated3();
        let options = AuditOptions {
            readings: ReadingOverrides {
                rho: Some(RhoReading::Literal),
                ..ReadingOverrides::default()
            },
            ..AuditOptions::default()
        };
        let rep = run_checks(&l, &inst, &grid(), &options, Some(&[CheckId::A13])).unwrap();
        let c = &rep.checks[0];
        assert_eq!(c.reading.as_deref(), Some("rho=literal"));
        assert!(!c.pass && c.residual > 0.1);
        assert_eq!(c.alternatives.len(), 1);
    }
}
