//! The mirror functor from normal-form sheaves to lines with connections,
//! and residuals certifying that it intertwines composition.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::derived::{
    self, compose, compose_with_torsion, evaluate_section, hom_space, DerivedMorphism, HomKind, LineBundleObj,
    PushforwardObj, TorsionObj,
};
use crate::error::{MirrorError, Result};
use crate::fukaya::{self, m2, m2_vertical, CoverLine, FukayaMorphism, FukayaObj, SlopeLine, VerticalLine};
use crate::linalg::{exp_nilpotent, HomTensor, Matrix};
use crate::theta::{TruncationSpec, C64, TWO_PI_I};

/// Any of the normal-form objects the functor is defined on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum DerivedObj {
    Line(LineBundleObj),
    Pushforward(PushforwardObj),
    Torsion(TorsionObj),
}

/// `T -> scalar · left · T · right`; `left` and `right` are unipotent.
#[derive(Clone, Debug, PartialEq)]
pub struct PhiPrefactor {
    pub scalar: C64,
    pub left: Matrix,
    pub right: Matrix,
}

impl PhiPrefactor {
    pub fn identity(d_target: usize, d_source: usize) -> Self {
        Self { scalar: C64::new(1.0, 0.0), left: Matrix::identity(d_target), right: Matrix::identity(d_source) }
    }

    pub fn apply(&self, t: &HomTensor) -> HomTensor {
        (&(&self.left * t) * &self.right).scale(self.scalar)
    }

    pub fn inverse(&self) -> Self {
        let inv = |m: &Matrix| {
            // unipotent: exp(-log m) via the finite Neumann series of (I - m)
            let d = m.rows();
            let nil = &Matrix::identity(d) - m;
            let mut acc = Matrix::identity(d);
            let mut p = Matrix::identity(d);
            for _ in 1..d.max(1) {
                p = &p * &nil;
                acc = &acc + &p;
            }
            acc
        };
        Self { scalar: 1.0 / self.scalar, left: inv(&self.left), right: inv(&self.right) }
    }
}

pub fn phi_line(o: &LineBundleObj) -> SlopeLine {
    SlopeLine { n: o.degree, alpha: o.alpha, beta: o.beta, local: o.local.clone(), rho: o.tau.mirror() }
}

pub fn phi_object(o: &DerivedObj) -> FukayaObj {
    match o {
        DerivedObj::Line(l) => FukayaObj::Slope(phi_line(l)),
        DerivedObj::Torsion(t) => FukayaObj::Vertical(VerticalLine {
            alpha: t.alpha,
            beta: t.beta,
            local: t.local.clone(),
            rho: t.tau.mirror(),
        }),
        DerivedObj::Pushforward(p) => FukayaObj::Cover(CoverLine { r: p.r, inner: phi_line(&p.base) }),
    }
}

fn unphi_line(s: &SlopeLine) -> LineBundleObj {
    LineBundleObj { degree: s.n, alpha: s.alpha, beta: s.beta, local: s.local.clone(), tau: s.rho.mirror() }
}

/// Reads slope, intercept and connection back into normal-form data.
pub fn phi_object_inverse(l: &FukayaObj) -> DerivedObj {
    match l {
        FukayaObj::Slope(s) => DerivedObj::Line(unphi_line(s)),
        FukayaObj::Vertical(v) => DerivedObj::Torsion(TorsionObj {
            alpha: v.alpha,
            beta: v.beta,
            local: v.local.clone(),
            tau: v.rho.mirror(),
        }),
        FukayaObj::Cover(c) => DerivedObj::Pushforward(PushforwardObj { r: c.r, base: unphi_line(&c.inner) }),
    }
}

/// `exp(-pi i tau alpha12^2 n) · exp[alpha12 (N2 - N1* - 2 pi i n beta12)]`
/// for a Hom space of gap `n > 0`; the identity for equal degrees.
pub fn line_prefactor(o1: &LineBundleObj, o2: &LineBundleObj) -> Result<PhiPrefactor> {
    let hom = hom_space(o1, o2)?;
    match hom.kind {
        HomKind::Sections { gap, alpha12, beta12 } => {
            let (a, b, n) = (alpha12.value(), beta12.value(), gap as f64);
            let tau = o1.tau.tau();
            let scalar = (C64::new(0.0, -PI) * tau * (a * a * n) - TWO_PI_I * (n * a * b)).exp();
            Ok(PhiPrefactor {
                scalar,
                left: exp_nilpotent(&o2.local.matrix().scale_real(a))?,
                right: exp_nilpotent(&o1.local.matrix().scale_real(-a))?,
            })
        }
        _ => Ok(PhiPrefactor::identity(o2.rank(), o1.rank())),
    }
}

/// Prefactor for `Hom(L(phi_1) ⊗ F(V1, e^{N1}), S(x, V, N))`:
/// `exp[-pi i tau n alpha_V^2 - 2 pi i tau alpha1 alpha_V - alpha_V (n N - N1* + 2 pi i (beta1 + n beta_V)) - alpha1 (N + 2 pi i beta_V)]`.
pub fn torsion_prefactor(source: &LineBundleObj, torsion: &TorsionObj) -> Result<PhiPrefactor> {
    if source.tau.tau() != torsion.tau.tau() {
        return Err(MirrorError::MixedModularParam);
    }
    let tau = source.tau.tau();
    let n = source.degree as f64;
    let (a1, b1) = (source.alpha.value(), source.beta.value());
    let (av, bv) = (torsion.alpha.value(), torsion.beta.value());
    let scalar = (C64::new(0.0, -PI) * tau * (n * av * av) - TWO_PI_I * tau * (a1 * av)
        - TWO_PI_I * (av * (b1 + n * bv) + a1 * bv))
        .exp();
    Ok(PhiPrefactor {
        scalar,
        left: exp_nilpotent(&torsion.local.matrix().scale_real(-(n * av + a1)))?,
        right: exp_nilpotent(&source.local.matrix().scale_real(av))?,
    })
}

pub fn phi_morphism(m: &DerivedMorphism) -> Result<FukayaMorphism> {
    let pre = line_prefactor(&m.source, &m.target)?;
    let coeffs = m.coeffs.iter().map(|t| pre.apply(t)).collect();
    FukayaMorphism::new(FukayaObj::Slope(phi_line(&m.source)), FukayaObj::Slope(phi_line(&m.target)), coeffs)
}

pub fn phi_morphism_inverse(u: &FukayaMorphism) -> Result<DerivedMorphism> {
    let (s1, s2) = match (&u.source, &u.target) {
        (FukayaObj::Slope(a), FukayaObj::Slope(b)) => (unphi_line(a), unphi_line(b)),
        _ => return Err(MirrorError::Invalid("inverse is implemented for morphisms between slope lines".into())),
    };
    let pre = line_prefactor(&s1, &s2)?.inverse();
    let coeffs = u.coeffs.iter().map(|t| pre.apply(t)).collect();
    DerivedMorphism::new(s1, s2, coeffs)
}

/// Image of `A: V1 -> V` viewed as a morphism into the torsion sheaf.
pub fn phi_torsion_morphism(a: &HomTensor, source: &LineBundleObj, torsion: &TorsionObj) -> Result<FukayaMorphism> {
    let pre = torsion_prefactor(source, torsion)?;
    FukayaMorphism::new(
        FukayaObj::Slope(phi_line(source)),
        phi_object(&DerivedObj::Torsion(torsion.clone())),
        vec![pre.apply(a)],
    )
}

/// `max |Phi(m23 ∘ m12) - m2(Phi m12, Phi m23)|`.
pub fn functoriality_residual(m12: &DerivedMorphism, m23: &DerivedMorphism, trunc: &TruncationSpec) -> Result<f64> {
    let lhs = phi_morphism(&compose(m12, m23, trunc)?)?;
    let rhs = m2(&phi_morphism(m12)?, &phi_morphism(m23)?, trunc)?;
    Ok(lhs.max_abs_diff(&rhs))
}

/// `max |Phi(B ∘ m12) - m2(Phi m12, Phi B)|` for a chain ending at a torsion sheaf.
pub fn torsion_functoriality_residual(
    m12: &DerivedMorphism,
    b: &HomTensor,
    torsion: &TorsionObj,
    trunc: &TruncationSpec,
) -> Result<f64> {
    let composed = compose_with_torsion(m12, b, torsion, trunc)?;
    let lhs = phi_torsion_morphism(&composed, &m12.source, torsion)?;
    let rhs = m2_vertical(&phi_morphism(m12)?, &phi_torsion_morphism(b, &m12.target, torsion)?, trunc)?;
    Ok(lhs.max_abs_diff(&rhs))
}

/// Standard basis `V(f_k ⊗ E_ij)` of `Hom(o1, o2)` (or of the intertwiners).
pub fn probe_basis(o1: &LineBundleObj, o2: &LineBundleObj) -> Result<Vec<DerivedMorphism>> {
    let hom = hom_space(o1, o2)?;
    let mut out = Vec::new();
    match hom.kind {
        HomKind::Sections { gap, .. } => {
            for k in 0..gap as usize {
                for i in 0..o2.rank() {
                    for j in 0..o1.rank() {
                        let mut t = Matrix::zeros(o2.rank(), o1.rank());
                        t[(i, j)] = C64::new(1.0, 0.0);
                        out.push(DerivedMorphism::basis(o1.clone(), o2.clone(), k, t)?);
                    }
                }
            }
        }
        HomKind::Intertwiners(basis) => {
            for t in basis {
                out.push(DerivedMorphism::new(o1.clone(), o2.clone(), vec![t])?);
            }
        }
        HomKind::Zero => {}
    }
    Ok(out)
}

/// Sample points used to compare a section with its pullback.
const ISOGENY_SAMPLES: [(f64, f64); 3] = [(0.13, 0.0), (-0.29, 0.11), (0.41, -0.07)];

/// Residual of the square `Phi_{q^r} ∘ pi_r^* = pi_r^* ∘ Phi_q`.
///
/// Objects must agree exactly (`INFINITY` otherwise). For each probe the two
/// paths are compared coefficient-wise, and the pulled-back section is
/// evaluated against the original at a few points, which is where the
/// isogeny splitting of theta functions enters numerically.
pub fn isogeny_square_residual(
    o: &LineBundleObj,
    r: u32,
    probes: &[DerivedMorphism],
    trunc: &TruncationSpec,
) -> Result<f64> {
    let up = derived::pullback_isogeny(r, o);
    if phi_line(&up) != fukaya::pullback_line(r, &phi_line(o)) {
        return Ok(f64::INFINITY);
    }
    let mut worst: f64 = 0.0;
    for m in probes {
        for end in [&m.source, &m.target] {
            if phi_line(&derived::pullback_isogeny(r, end)) != fukaya::pullback_line(r, &phi_line(end)) {
                return Ok(f64::INFINITY);
            }
        }
        let pulled = derived::pullback_morphism(r, m)?;
        let via_derived = phi_morphism(&pulled)?;
        let via_fukaya = fukaya::pullback_morphism(r, &phi_morphism(m)?)?;
        worst = worst.max(via_derived.max_abs_diff(&via_fukaya));
        if m.gap() > 0 {
            for (re, im) in ISOGENY_SAMPLES {
                let z = C64::new(re, im);
                let a = evaluate_section(m, z, trunc)?;
                let b = evaluate_section(&pulled, z, trunc)?;
                worst = worst.max(a.max_abs_diff(&b));
            }
        }
    }
    Ok(worst)
}

/// Dimension of `Hom(o1, o2)` on both sides of the functor.
pub fn hom_dimensions(o1: &LineBundleObj, o2: &LineBundleObj) -> Result<(usize, usize)> {
    let d = hom_space(o1, o2)?.dimension;
    let f = fukaya::hom_dimension(&FukayaObj::Slope(phi_line(o1)), &FukayaObj::Slope(phi_line(o2)))?;
    Ok((d, f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::LocalSystemData;
    use crate::shift::Shift;
    use crate::theta::ModularParam;

    fn tau_i() -> ModularParam {
        ModularParam::new(C64::new(0.0, 1.0)).unwrap()
    }

    fn obj(t: ModularParam, n: i64, a: Shift, b: Shift, d: usize) -> LineBundleObj {
        LineBundleObj::new(t, n, a, b, if d == 1 { LocalSystemData::trivial(1) } else { LocalSystemData::jordan(d) })
    }

    fn sample(rows: usize, cols: usize, seed: f64) -> Matrix {
        Matrix::from_fn(rows, cols, |r, c| C64::new((seed + 0.9 * r as f64 - 0.4 * c as f64).cos(), (seed - c as f64).sin() * 0.3))
    }

    #[test]
    fn objects_and_round_trip() {
        let t = tau_i();
        let o = obj(t, 1, Shift::ZERO, Shift::ZERO, 1);
        let l = phi_object(&DerivedObj::Line(o.clone()));
        assert_eq!(l.direction(), (1, 1));
        assert_eq!(l.base_point(), (0.0, 0.0));
        assert_eq!(phi_object_inverse(&l), DerivedObj::Line(o));
        let s = TorsionObj::new(t, Shift::ZERO, Shift::ZERO, LocalSystemData::trivial(1));
        let v = phi_object(&DerivedObj::Torsion(s.clone()));
        assert_eq!((v.direction(), v.base_point(), v.log_slope()), ((0, 1), (0.0, 0.0), 0.5));
        assert_eq!(phi_object_inverse(&v), DerivedObj::Torsion(s));
        let p = PushforwardObj { r: 2, base: obj(t.scaled(2), 1, Shift::ZERO, Shift::ZERO, 1) };
        let c = phi_object(&DerivedObj::Pushforward(p.clone()));
        assert_eq!(c.direction(), (2, 1));
        assert_eq!(phi_object_inverse(&c), DerivedObj::Pushforward(p));
    }

    #[test]
    fn prefactor_examples() {
        let t = tau_i();
        let o1 = obj(t, 0, Shift::ZERO, Shift::ZERO, 1);
        let o2 = obj(t, 2, Shift::ratio(1, 2), Shift::ZERO, 1);
        let pre = line_prefactor(&o1, &o2).unwrap();
        assert!((pre.scalar - C64::new((PI / 8.0).exp(), 0.0)).norm() < 1e-12);
        let o3 = obj(t, 0, Shift::ZERO, Shift::ZERO, 2);
        let o4 = obj(t, 1, Shift::ratio(1, 3), Shift::ZERO, 2);
        let pre = line_prefactor(&o3, &o4).unwrap();
        let expect = &Matrix::identity(2) + &Matrix::jordan(2).scale_real(1.0 / 3.0);
        assert!(pre.left.max_abs_diff(&expect) < 1e-15);
        let zero_shift = line_prefactor(&o1, &obj(t, 3, Shift::ZERO, Shift::ZERO, 1)).unwrap();
        assert_eq!(zero_shift.scalar, C64::new(1.0, 0.0));
    }

    #[test]
    fn torsion_prefactor_examples() {
        let t = tau_i();
        let o = obj(t, 1, Shift::ZERO, Shift::ZERO, 1);
        let s = TorsionObj::new(t, Shift::ratio(1, 2), Shift::ZERO, LocalSystemData::trivial(1));
        let pre = torsion_prefactor(&o, &s).unwrap();
        assert!((pre.scalar - C64::new((PI / 4.0).exp(), 0.0)).norm() < 1e-12);
        let s2 = TorsionObj::new(t, Shift::ratio(1, 2), Shift::ZERO, LocalSystemData::jordan(2));
        let pre = torsion_prefactor(&o, &s2).unwrap();
        let expect = &Matrix::identity(2) - &Matrix::jordan(2).scale_real(0.5);
        assert!(pre.left.max_abs_diff(&expect) < 1e-15);
        let plain = TorsionObj::new(t, Shift::ZERO, Shift::ZERO, LocalSystemData::trivial(1));
        assert_eq!(torsion_prefactor(&o, &plain).unwrap().scalar, C64::new(1.0, 0.0));
    }

    #[test]
    fn prefactor_inverse() {
        let t = ModularParam::new(C64::new(0.2, 1.1)).unwrap();
        let pre = line_prefactor(&obj(t, 0, Shift::ZERO, Shift::ratio(1, 4), 3), &obj(t, 2, Shift::ratio(1, 3), Shift::ZERO, 2)).unwrap();
        let x = sample(2, 3, 0.5);
        assert!(pre.inverse().apply(&pre.apply(&x)).max_abs_diff(&x) < 1e-12);
    }

    #[test]
    fn functoriality_basic() {
        let t = tau_i();
        let tr = TruncationSpec::default();
        let one = Matrix::scalar(C64::new(1.0, 0.0));
        let (o0, o1, o2) = (obj(t, 0, Shift::ZERO, Shift::ZERO, 1), obj(t, 1, Shift::ZERO, Shift::ZERO, 1), obj(t, 2, Shift::ZERO, Shift::ZERO, 1));
        let s = DerivedMorphism::new(o0, o1.clone(), vec![one.clone()]).unwrap();
        let u = DerivedMorphism::new(o1, o2, vec![one]).unwrap();
        assert!(functoriality_residual(&s, &u, &tr).unwrap() < 1e-10);
    }

    #[test]
    fn functoriality_with_shifts_and_jordan_blocks() {
        let t = ModularParam::new(C64::new(0.2, 1.1)).unwrap();
        let tr = TruncationSpec::default();
        let o1 = obj(t, 0, Shift::ratio(1, 4), Shift::ratio(1, 3), 1);
        let o2 = obj(t, 2, Shift::ratio(-1, 3), Shift::ratio(1, 2), 2);
        let o3 = obj(t, 5, Shift::Real(0.377), Shift::ratio(-1, 4), 2);
        let s = DerivedMorphism::new(o1, o2.clone(), (0..2).map(|k| sample(2, 1, k as f64)).collect()).unwrap();
        let u = DerivedMorphism::new(o2, o3, (0..3).map(|k| sample(2, 2, 1.0 + k as f64)).collect()).unwrap();
        let r = functoriality_residual(&s, &u, &tr).unwrap();
        assert!(r < 1e-8, "{r}");
    }

    #[test]
    fn torsion_functoriality() {
        let tr = TruncationSpec::default();
        let t = tau_i();
        let one = Matrix::scalar(C64::new(1.0, 0.0));
        let m = DerivedMorphism::new(obj(t, 0, Shift::ZERO, Shift::ZERO, 1), obj(t, 1, Shift::ZERO, Shift::ZERO, 1), vec![one.clone()]).unwrap();
        let s = TorsionObj::new(t, Shift::ZERO, Shift::ZERO, LocalSystemData::trivial(1));
        assert!(torsion_functoriality_residual(&m, &one, &s, &tr).unwrap() < 1e-10);
        assert_eq!(torsion_functoriality_residual(&m, &Matrix::zeros(1, 1), &s, &tr).unwrap(), 0.0);

        let t = ModularParam::new(C64::new(-0.1, 0.9)).unwrap();
        let o1 = obj(t, 0, Shift::ratio(1, 3), Shift::ratio(1, 4), 2);
        let o2 = obj(t, 2, Shift::ratio(1, 2), Shift::ratio(-1, 3), 3);
        let m = DerivedMorphism::new(o1, o2, (0..2).map(|k| sample(3, 2, 0.3 * k as f64)).collect()).unwrap();
        let s = TorsionObj::new(t, Shift::ratio(1, 4), Shift::ratio(2, 3), LocalSystemData::jordan(2));
        let r = torsion_functoriality_residual(&m, &sample(2, 3, 2.0), &s, &tr).unwrap();
        assert!(r < 1e-8, "{r}");
    }

    #[test]
    fn isogeny_square() {
        let tr = TruncationSpec::default();
        let t = tau_i();
        let o1 = obj(t, 0, Shift::ZERO, Shift::ZERO, 1);
        let o2 = obj(t, 1, Shift::ZERO, Shift::ZERO, 1);
        let probes = probe_basis(&o1, &o2).unwrap();
        assert_eq!(isogeny_square_residual(&o2, 1, &probes, &tr).unwrap(), 0.0);
        assert!(isogeny_square_residual(&o2, 2, &probes, &tr).unwrap() < 1e-10);
        let t = ModularParam::new(C64::new(0.1, 0.8)).unwrap();
        let o1 = obj(t, 0, Shift::ZERO, Shift::ratio(1, 5), 2);
        let o2 = obj(t, 2, Shift::ratio(1, 4), Shift::ratio(1, 3), 2);
        let probes = probe_basis(&o1, &o2).unwrap();
        assert_eq!(probes.len(), 8);
        let r = isogeny_square_residual(&o2, 3, &probes, &tr).unwrap();
        assert!(r < 1e-9, "{r}");
    }

    #[test]
    fn dimensions_agree() {
        let t = tau_i();
        let (d, f) = hom_dimensions(&obj(t, 0, Shift::ZERO, Shift::ZERO, 1), &obj(t, 3, Shift::ZERO, Shift::ZERO, 2)).unwrap();
        assert_eq!((d, f), (6, 6));
        let (d, f) = hom_dimensions(&obj(t, 2, Shift::ZERO, Shift::ZERO, 2), &obj(t, 2, Shift::int(1), Shift::ZERO, 2)).unwrap();
        assert_eq!((d, f), (2, 2));
    }
}
