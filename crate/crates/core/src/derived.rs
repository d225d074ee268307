//! The holomorphic side: normal-form sheaves on `E_q`, their degree-zero Hom
//! spaces in the theta basis, composition, isogeny functors and torsion
//! sheaves.
//!
//! A morphism between `L(phi_1) ⊗ F(V1, exp N1)` and `L(phi_2) ⊗ F(V2, exp N2)`
//! with `n1 < n2` is stored by its coordinates `T_k ∈ Hom(V1, V2)` in the
//! canonical identification `V(f ⊗ T) = exp(D L / n) f · T`, where
//! `f_k(z) = theta[k/n, 0](n tau, n (z + alpha12 tau + beta12))`,
//! `n = n2 - n1`, `D = -(1/2 pi i) d/dz` and `L(T) = N2 T - T N1`.
//! As a function, such a section is `sum_k f_k(z - L / (2 pi i n)) T_k`
//! (a finite Taylor expansion in the nilpotent direction).

use std::f64::consts::PI;

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{MirrorError, Result};
use crate::linalg::{factorial, intertwiners, HomTensor, LocalSystemData, Matrix, TripleContraction};
use crate::shift::Shift;
use crate::theta::{level_theta, ModularParam, TailModel, TruncationSpec, C64, TWO_PI_I};

/// `L(t_x^* phi_0 · phi_0^{n-1}) ⊗ F(V, exp N)` with `x = alpha tau + beta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineBundleObj {
    pub degree: i64,
    pub alpha: Shift,
    pub beta: Shift,
    pub local: LocalSystemData,
    pub tau: ModularParam,
}

impl LineBundleObj {
    pub fn new(tau: ModularParam, degree: i64, alpha: Shift, beta: Shift, local: LocalSystemData) -> Self {
        Self { degree, alpha, beta, local, tau }
    }

    /// Degree-`n` bundle with zero shift and a trivial rank-one local system.
    pub fn plain(tau: ModularParam, degree: i64) -> Self {
        Self::new(tau, degree, Shift::ZERO, Shift::ZERO, LocalSystemData::trivial(1))
    }

    pub fn rank(&self) -> usize {
        self.local.dim()
    }

    /// The translation point `x = alpha tau + beta`.
    pub fn point(&self) -> C64 {
        self.tau.tau() * self.alpha.value() + self.beta.value()
    }

    /// Multiplier `phi(z) = exp(-pi i n tau - 2 pi i n z - 2 pi i x)` of the line bundle factor.
    pub fn multiplier(&self, z: C64) -> C64 {
        let n = self.degree as f64;
        (C64::new(0.0, -PI) * self.tau.tau() * n - TWO_PI_I * (z * n + self.point())).exp()
    }
}

/// `pi_{r*}(base)` with `base` living over `E_{q^r}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PushforwardObj {
    pub r: u32,
    pub base: LineBundleObj,
}

impl PushforwardObj {
    pub fn rank(&self) -> usize {
        self.r as usize * self.base.rank()
    }

    pub fn degree(&self) -> i64 {
        self.base.degree
    }

    /// The parameter of the curve the pushforward lives on.
    pub fn tau(&self) -> ModularParam {
        let t = self.base.tau;
        ModularParam::new(t.tau() / self.r as f64).expect("base parameter is in the upper half plane")
    }
}

/// The skyscraper-type sheaf `S(x, V, N)` supported at `x = alpha tau + beta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorsionObj {
    pub alpha: Shift,
    pub beta: Shift,
    pub local: LocalSystemData,
    pub tau: ModularParam,
}

impl TorsionObj {
    pub fn new(tau: ModularParam, alpha: Shift, beta: Shift, local: LocalSystemData) -> Self {
        Self { alpha, beta, local, tau }
    }

    pub fn length(&self) -> usize {
        self.local.dim()
    }

    pub fn point(&self) -> C64 {
        self.tau.tau() * self.alpha.value() + self.beta.value()
    }
}

/// Shape of a degree-zero Hom space between two line-bundle objects.
#[derive(Clone, Debug, PartialEq)]
pub enum HomKind {
    /// `n1 < n2`: theta-basis sections with the given relative shift.
    Sections { gap: i64, alpha12: Shift, beta12: Shift },
    /// `n1 = n2` with equal shifts mod the lattice: intertwiners of the nilpotents.
    Intertwiners(Vec<HomTensor>),
    Zero,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HomSpace {
    pub dimension: usize,
    /// Theta-basis indices `k` (`0..gap`), or `[0]` for intertwiners.
    pub indices: Vec<i64>,
    pub kind: HomKind,
}

impl HomSpace {
    pub fn is_zero(&self) -> bool {
        matches!(self.kind, HomKind::Zero)
    }
}

fn same_param(a: &ModularParam, b: &ModularParam) -> Result<()> {
    if a.tau() != b.tau() {
        return Err(MirrorError::MixedModularParam);
    }
    Ok(())
}

pub fn hom_space(o1: &LineBundleObj, o2: &LineBundleObj) -> Result<HomSpace> {
    same_param(&o1.tau, &o2.tau)?;
    let (n1, n2) = (o1.degree, o2.degree);
    let (d1, d2) = (o1.rank(), o2.rank());
    if n1 < n2 {
        let gap = n2 - n1;
        return Ok(HomSpace {
            dimension: gap as usize * d1 * d2,
            indices: (0..gap).collect(),
            kind: HomKind::Sections {
                gap,
                alpha12: (o2.alpha - o1.alpha).div_int(gap),
                beta12: (o2.beta - o1.beta).div_int(gap),
            },
        });
    }
    if n1 == n2 && o1.alpha.eq_mod_one(&o2.alpha) && o1.beta.eq_mod_one(&o2.beta) {
        let basis = intertwiners(&o1.local, &o2.local);
        if basis.is_empty() {
            return Ok(HomSpace { dimension: 0, indices: vec![], kind: HomKind::Zero });
        }
        return Ok(HomSpace { dimension: basis.len(), indices: vec![0], kind: HomKind::Intertwiners(basis) });
    }
    Ok(HomSpace { dimension: 0, indices: vec![], kind: HomKind::Zero })
}

/// A degree-zero morphism between line-bundle objects, in theta-basis
/// coordinates (see the module docs).
#[derive(Clone, Debug, PartialEq)]
pub struct DerivedMorphism {
    pub source: LineBundleObj,
    pub target: LineBundleObj,
    pub coeffs: Vec<HomTensor>,
}

impl DerivedMorphism {
    pub fn new(source: LineBundleObj, target: LineBundleObj, coeffs: Vec<HomTensor>) -> Result<Self> {
        let hom = hom_space(&source, &target)?;
        let shape = (target.rank(), source.rank());
        let expected = match &hom.kind {
            HomKind::Sections { gap, .. } => *gap as usize,
            HomKind::Intertwiners(_) => 1,
            HomKind::Zero => 0,
        };
        if coeffs.len() != expected {
            return Err(MirrorError::ShapeMismatch(format!(
                "expected {expected} coefficient tensors, got {}",
                coeffs.len()
            )));
        }
        if let Some(bad) = coeffs.iter().find(|c| c.shape() != shape) {
            return Err(MirrorError::ShapeMismatch(format!(
                "coefficient has shape {:?}, expected {shape:?}",
                bad.shape()
            )));
        }
        if let HomKind::Intertwiners(_) = hom.kind {
            let t = &coeffs[0];
            let lhs = t * source.local.matrix();
            let rhs = target.local.matrix() * t;
            if lhs.max_abs_diff(&rhs) > 1e-9 * (1.0 + t.max_abs()) {
                return Err(MirrorError::Invalid("equal-degree morphism must intertwine the nilpotents".into()));
            }
        }
        Ok(Self { source, target, coeffs })
    }

    pub fn zero(source: LineBundleObj, target: LineBundleObj) -> Result<Self> {
        let hom = hom_space(&source, &target)?;
        let n = match hom.kind {
            HomKind::Sections { gap, .. } => gap as usize,
            HomKind::Intertwiners(_) => 1,
            HomKind::Zero => 0,
        };
        let coeffs = vec![Matrix::zeros(target.rank(), source.rank()); n];
        Ok(Self { source, target, coeffs })
    }

    /// `V(f_k ⊗ T)`.
    pub fn basis(source: LineBundleObj, target: LineBundleObj, k: usize, t: HomTensor) -> Result<Self> {
        let mut m = Self::zero(source, target)?;
        if k >= m.coeffs.len() {
            return Err(MirrorError::Invalid(format!("basis index {k} out of range")));
        }
        m.coeffs[k] = t;
        Self::new(m.source, m.target, m.coeffs)
    }

    pub fn gap(&self) -> i64 {
        self.target.degree - self.source.degree
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Matrix::is_zero)
    }

    /// Largest coefficient-wise distance; `INFINITY` when the morphisms live in different Hom spaces.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.source != other.source || self.target != other.target || self.coeffs.len() != other.coeffs.len() {
            return f64::INFINITY;
        }
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.max_abs_diff(b)).fold(0.0, f64::max)
    }

    /// The shift `x12 = alpha12 tau + beta12` of the theta basis.
    fn basis_shift(&self) -> C64 {
        let gap = self.gap();
        let a = (self.target.alpha - self.source.alpha).div_int(gap);
        let b = (self.target.beta - self.source.beta).div_int(gap);
        self.source.tau.tau() * a.value() + b.value()
    }
}

/// `L(T) = N2 T - T N1`.
fn hom_nilpotent(source: &LocalSystemData, target: &LocalSystemData, t: &HomTensor) -> HomTensor {
    &(target.matrix() * t) - &(t * source.matrix())
}

/// Value of the section at `z` as a map `V1 -> V2`.
pub fn evaluate_section(m: &DerivedMorphism, z: C64, trunc: &TruncationSpec) -> Result<HomTensor> {
    let shape = (m.target.rank(), m.source.rank());
    let mut out = Matrix::zeros(shape.0, shape.1);
    if m.coeffs.is_empty() {
        return Ok(out);
    }
    let gap = m.gap();
    if gap == 0 {
        return Ok(m.coeffs[0].clone());
    }
    let tau = m.source.tau.tau();
    let w = z + m.basis_shift();
    let max_order = m.source.local.nil_index() + m.target.local.nil_index();
    let per_term = trunc.scaled(1.0 / (gap as f64 * max_order as f64));
    let scale = C64::new(0.0, 1.0 / (2.0 * PI * gap as f64)); // -1 / (2 pi i n)
    for (k, t) in m.coeffs.iter().enumerate() {
        if t.is_zero() {
            continue;
        }
        let mut lt = t.clone();
        let mut j = 0u32;
        while !lt.is_zero() {
            let deriv = level_theta(k as i64, gap, tau, w, j, &per_term.scaled(1.0 / (1.0 + lt.max_abs())))?;
            out.axpy(deriv * scale.powu(j) / factorial(j as usize), &lt);
            lt = hom_nilpotent(&m.source.local, &m.target.local, &lt);
            j += 1;
        }
    }
    Ok(out)
}

fn check_chain(m12: &DerivedMorphism, m23: &DerivedMorphism) -> Result<()> {
    if m12.target != m23.source {
        return Err(MirrorError::ChainMismatch("target of the first morphism is not the source of the second".into()));
    }
    same_param(&m12.source.tau, &m23.target.tau)
}

/// Composition `m23 ∘ m12` of sections, expressed again in the theta basis.
pub fn compose(m12: &DerivedMorphism, m23: &DerivedMorphism, trunc: &TruncationSpec) -> Result<DerivedMorphism> {
    check_chain(m12, m23)?;
    let (o1, o2, o3) = (&m12.source, &m12.target, &m23.target);
    let target_hom = hom_space(o1, o3)?;
    if m12.coeffs.is_empty() || m23.coeffs.is_empty() || target_hom.is_zero() {
        return DerivedMorphism::zero(o1.clone(), o3.clone());
    }
    let (n1, n2, n3) = (o1.degree, o2.degree, o3.degree);
    if n1 == n2 || n2 == n3 {
        let exact = |a: &LineBundleObj, b: &LineBundleObj| a.alpha == b.alpha && a.beta == b.beta;
        if (n1 == n2 && !exact(o1, o2)) || (n2 == n3 && !exact(o2, o3)) {
            return Err(MirrorError::ChainMismatch(
                "equal-degree links must use identical shift representatives".into(),
            ));
        }
        let coeffs = if n1 == n2 && n2 == n3 {
            vec![&m23.coeffs[0] * &m12.coeffs[0]]
        } else if n1 == n2 {
            m23.coeffs.iter().map(|b| b * &m12.coeffs[0]).collect()
        } else {
            m12.coeffs.iter().map(|a| &m23.coeffs[0] * a).collect()
        };
        return DerivedMorphism::new(o1.clone(), o3.clone(), coeffs);
    }
    let coeffs = compose_sections(m12, m23, trunc)?;
    DerivedMorphism::new(o1.clone(), o3.clone(), coeffs)
}

/// The strictly increasing case. Each pair of basis sections `(f_a, g_b)`
/// multiplies out by the product formula into
///
/// ```text
/// sum_m exp[pi i tau k^2/(n n' n'') + 2 pi i k/n'' (delta tau + beta23 - beta12)]
///       · exp[k/(n n') (N2 - (n N3 + n' N1)/n'')] (A ⊗ B)  at class (a + b + n' m) mod n''
/// ```
///
/// with `k = n b - n' a + n n' m`, `delta = alpha23 - alpha12`, `N3` acting
/// on the left, `N2` in the middle and `N1` on the right.
fn compose_sections(m12: &DerivedMorphism, m23: &DerivedMorphism, trunc: &TruncationSpec) -> Result<Vec<HomTensor>> {
    let (o1, o2, o3) = (&m12.source, &m12.target, &m23.target);
    let (n, np) = (o2.degree - o1.degree, o3.degree - o2.degree);
    let npp = n + np;
    let (nf, npf, nppf) = (n as f64, np as f64, npp as f64);
    let tau = o1.tau.tau();
    let y = tau.im;
    let alpha12 = (o2.alpha - o1.alpha).div_int(n);
    let alpha23 = (o3.alpha - o2.alpha).div_int(np);
    let beta12 = (o2.beta - o1.beta).div_int(n);
    let beta23 = (o3.beta - o2.beta).div_int(np);
    let delta = (alpha23 - alpha12).value();
    let shift = tau * delta + (beta23 - beta12).value();
    let mut out = vec![Matrix::zeros(o3.rank(), o1.rank()); npp as usize];
    let pairs = (n * np) as f64;
    for (a, ta) in m12.coeffs.iter().enumerate() {
        for (b, tb) in m23.coeffs.iter().enumerate() {
            let tc = TripleContraction::new(&o3.local, &o2.local, &o1.local, ta, tb)?;
            if tc.is_zero() {
                continue;
            }
            let (a, b) = (a as i64, b as i64);
            let norm: f64 = ta.max_abs() * tb.max_abs() * nil_norm_bound(o1, o2, o3);
            let model = TailModel {
                amplitude: (PI * y * nf * npf * delta * delta / nppf).exp() * norm,
                decay: PI * y * nf * npf / nppf,
                center: -delta,
                shift: b as f64 / npf - a as f64 / nf,
                poly_scale: 1.0,
                poly_offset: 1.0,
                degree: tc.max_total_degree() as u32,
            };
            let window = model.window(trunc.epsilon / pairs, trunc.max_terms)?;
            for m in window.indices() {
                let k = n * b - np * a + n * np * m;
                let kf = k as f64;
                let scalar = (C64::new(0.0, PI) * tau * (kf * kf / (nf * npf * nppf)) + TWO_PI_I * shift * (kf / nppf)).exp();
                let x2 = C64::new(kf / (nf * npf), 0.0);
                let x3 = C64::new(-kf / (npf * nppf), 0.0);
                let x1 = C64::new(-kf / (nf * nppf), 0.0);
                let c = (a + b + np * m).mod_floor(&npp) as usize;
                out[c].axpy(scalar, &tc.apply_exp(x3, x2, x1));
            }
        }
    }
    Ok(out)
}

/// Crude bound on `sum_{i,j,k} |N3^i| |N2^j| |N1^k|` entry growth.
fn nil_norm_bound(o1: &LineBundleObj, o2: &LineBundleObj, o3: &LineBundleObj) -> f64 {
    let f = |o: &LineBundleObj| {
        let d = o.rank() as f64;
        (1.0 + d * o.local.matrix().max_abs()).powi(o.local.nil_index() as i32)
    };
    f(o1) * f(o2) * f(o3) * (o2.rank() as f64)
}

/// `pi_r^*`: degree `r n`, shift `(alpha, r beta)` over `r tau`, local system `exp(r N)`.
///
/// The `r`-fold cocycle product of `phi(z) = exp(-pi i n tau - 2 pi i n z - 2 pi i x)`
/// is `exp(-pi i n r^2 tau - 2 pi i n r z - 2 pi i r x)`, which is already
/// in normal form over `tau' = r tau` with `x' = r x = alpha tau' + r beta`;
/// no scalar normalization is needed.
pub fn pullback_isogeny(r: u32, o: &LineBundleObj) -> LineBundleObj {
    assert!(r >= 1, "isogeny level must be positive");
    let ri = r as i64;
    LineBundleObj {
        degree: o.degree * ri,
        alpha: o.alpha,
        beta: o.beta.mul_int(ri),
        local: o.local.scaled(r as f64),
        tau: o.tau.scaled(r),
    }
}

/// Pulls a morphism back along `pi_r`. The section is the same function; in
/// the target basis `f'_j` (gap `r n`) the basis element `f_a` splits as
/// `sum_{k in Z/r} f'_{a + n k}`, and the canonical identification uses the
/// same operator `L / n = (r L) / (r n)`, so coordinates transport verbatim.
pub fn pullback_morphism(r: u32, m: &DerivedMorphism) -> Result<DerivedMorphism> {
    let src = pullback_isogeny(r, &m.source);
    let tgt = pullback_isogeny(r, &m.target);
    if m.coeffs.is_empty() || m.gap() == 0 {
        return DerivedMorphism::new(src, tgt, m.coeffs.clone());
    }
    let n = m.gap() as usize;
    let coeffs = (0..n * r as usize).map(|j| m.coeffs[j % n].clone()).collect();
    DerivedMorphism::new(src, tgt, coeffs)
}

/// Explicit multiplier of `pi_{r*}(base)` on `V ⊗ C^r` (index `v * r + i`):
/// `v ⊗ e_i -> v ⊗ e_{i+1}` for `i < r - 1` and `v ⊗ e_{r-1} -> A v ⊗ e_0`.
///
/// With `S_i(z) = s(z - i tau)` for a section `s` of the base, the vector `S`
/// satisfies `S(z + tau) = M(z) S(z)`, which forces the corner block to be
/// the base multiplier evaluated at `z - (r - 1) tau`.
#[derive(Clone, Debug, PartialEq)]
pub struct PushforwardMultiplier {
    pub r: u32,
    pub base: LineBundleObj,
}

impl PushforwardMultiplier {
    pub fn rank(&self) -> usize {
        self.r as usize * self.base.rank()
    }

    /// Base multiplier `A(z) = phi(z) exp(N)` over `E_{q^r}`.
    pub fn base_multiplier(&self, z: C64) -> Matrix {
        crate::linalg::nilpotent_exp(&self.base.local).scale(self.base.multiplier(z))
    }

    pub fn evaluate(&self, z: C64) -> Matrix {
        let r = self.r as usize;
        let d = self.base.rank();
        let small_tau = self.base.tau.tau() / self.r as f64;
        let corner = self.base_multiplier(z - small_tau * (r as f64 - 1.0));
        let mut m = Matrix::zeros(d * r, d * r);
        for v in 0..d {
            for i in 0..r.saturating_sub(1) {
                m[(v * r + i + 1, v * r + i)] = C64::new(1.0, 0.0);
            }
            for w in 0..d {
                m[(w * r, v * r + r - 1)] = corner[(w, v)];
            }
        }
        m
    }
}

pub fn pushforward_object(r: u32, base: LineBundleObj) -> (PushforwardObj, PushforwardMultiplier) {
    assert!(r >= 1, "isogeny level must be positive");
    (PushforwardObj { r, base: base.clone() }, PushforwardMultiplier { r, base })
}

/// One summand of `Hom(pi_{r1*} E1, pi_{r2*} E2)` after base change to a
/// component of the fibered product, which is a copy of `E_{q^level}` with
/// `level = lcm(r1, r2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PushforwardHomComponent {
    pub component: i64,
    pub level: u32,
    pub source: LineBundleObj,
    pub target: LineBundleObj,
    pub hom: HomSpace,
}

/// Translation `t_y^*` by `y = s * tau_small`, `tau_small = tau_obj / r_obj`:
/// `x -> x + n y`, i.e. `alpha -> alpha + n s / r_obj`.
fn translate_by_small_period(o: &LineBundleObj, s: i64, r_obj: u32) -> LineBundleObj {
    let mut out = o.clone();
    out.alpha = o.alpha + Shift::ratio(o.degree * s, r_obj as i64);
    out
}

/// Splits `Hom(pi_{r1*} E1, pi_{r2*} E2)` into `d = gcd(r1, r2)` Hom problems
/// between line-bundle objects over `E_{q^{lcm(r1, r2)}}`, component `s`
/// pairing `u` on the first cover with `q^s u` on the second.
pub fn hom_pushforward_reduce(o1: &PushforwardObj, o2: &PushforwardObj) -> Result<Vec<PushforwardHomComponent>> {
    // The small-curve parameters are recovered by division, so compare them
    // up to rounding and then put every component over one shared parameter.
    let (t1, t2) = (o1.tau().tau(), o2.tau().tau());
    if (t1 - t2).norm() > 1e-12 * t1.norm() {
        return Err(MirrorError::MixedModularParam);
    }
    let (r1, r2) = (o1.r, o2.r);
    let d = r1.gcd(&r2);
    let level = r1.lcm(&r2);
    let mut out = Vec::with_capacity(d as usize);
    for s in 0..d as i64 {
        let source = pullback_isogeny(level / r1, &o1.base);
        let mut target = pullback_isogeny(level / r2, &translate_by_small_period(&o2.base, s, r2));
        target.tau = source.tau;
        let hom = hom_space(&source, &target)?;
        out.push(PushforwardHomComponent { component: s, level, source, target, hom });
    }
    Ok(out)
}

/// `V(f ⊗ A) ∘ B` for a morphism into the torsion sheaf `S(x, V, N)`:
///
/// ```text
/// sum_a Tr_{V2} f_a(x + N/(2 pi i) - (N2 - N1)/(2 pi i n)) (A_a ⊗ B)
/// ```
///
/// with `N` acting on the left of `B`, `N2` in the middle and `N1` on the
/// right of `A_a` (the dual action on `V1*`).
pub fn compose_with_torsion(
    m12: &DerivedMorphism,
    b: &HomTensor,
    torsion: &TorsionObj,
    trunc: &TruncationSpec,
) -> Result<HomTensor> {
    same_param(&m12.source.tau, &torsion.tau)?;
    if b.shape() != (torsion.length(), m12.target.rank()) {
        return Err(MirrorError::ShapeMismatch(format!(
            "torsion morphism has shape {:?}, expected {:?}",
            b.shape(),
            (torsion.length(), m12.target.rank())
        )));
    }
    let mut out = Matrix::zeros(torsion.length(), m12.source.rank());
    if m12.coeffs.is_empty() {
        return Ok(out);
    }
    let gap = m12.gap();
    if gap == 0 {
        return Ok(b * &m12.coeffs[0]);
    }
    let tau = m12.source.tau.tau();
    let w = torsion.point() + m12.basis_shift();
    let nf = gap as f64;
    let inv = C64::new(0.0, -1.0 / (2.0 * PI)); // 1/(2 pi i)
    let count = m12.coeffs.len() as f64;
    for (a, ta) in m12.coeffs.iter().enumerate() {
        let tc = TripleContraction::new(&torsion.local, &m12.target.local, &m12.source.local, ta, b)?;
        if tc.is_zero() {
            continue;
        }
        let max_p = tc.max_total_degree();
        let budget = trunc.scaled(1.0 / (count * (max_p as f64 + 1.0) * (1.0 + ta.max_abs() * b.max_abs())));
        let derivs: Vec<C64> = (0..=max_p)
            .map(|p| level_theta(a as i64, gap, tau, w, p as u32, &budget))
            .collect::<Result<_>>()?;
        out = &out
            + &tc.apply(|i, j, k| {
                derivs[i + j + k] * inv.powu((i + j + k) as u32) * (-1.0 / nf).powi(j as i32) * (1.0 / nf).powi(k as i32)
                    / (factorial(i) * factorial(j) * factorial(k))
            });
    }
    Ok(out)
}
