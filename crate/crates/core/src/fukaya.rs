//! The symplectic side: geodesic lines with flat connections on the square
//! torus `R^2 / Z^2` with complexified Kähler parameter `rho`, their
//! intersection points, Maslov grading and the triangle product `m2`.
//!
//! A slope line `y = n x - alpha` carries the connection `(-2 pi i beta + N) dx`,
//! so parallel transport over a horizontal displacement `dx` is
//! `exp[(-2 pi i beta + N) dx]`. A vertical line `x = -alpha` carries
//! `(2 pi i beta + N) dy`. Every edge connection is constant, so path ordering
//! along an edge is trivial; the three edge transports act on different
//! slots of `A ⊗ B` (right of `A`, between `A` and `B`, left of `B`) and commute.

use std::f64::consts::PI;

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{MirrorError, Result};
use crate::linalg::{intertwiners, HomTensor, LocalSystemData, Matrix, TripleContraction};
use crate::shift::Shift;
use crate::theta::{ModularParam, TailModel, TruncationSpec, C64, TWO_PI_I};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeLine {
    pub n: i64,
    pub alpha: Shift,
    pub beta: Shift,
    pub local: LocalSystemData,
    pub rho: ModularParam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerticalLine {
    pub alpha: Shift,
    pub beta: Shift,
    pub local: LocalSystemData,
    pub rho: ModularParam,
}

/// Image of a slope line on the `r`-fold cover `(x', y) -> (r x', y)`,
/// whose Kähler parameter is `r rho`: a line of direction `(r, n)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverLine {
    pub r: u32,
    pub inner: SlopeLine,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum FukayaObj {
    Slope(SlopeLine),
    Vertical(VerticalLine),
    Cover(CoverLine),
}

impl SlopeLine {
    pub fn new(rho: ModularParam, n: i64, alpha: Shift, beta: Shift, local: LocalSystemData) -> Self {
        Self { n, alpha, beta, local, rho }
    }

    pub fn log_slope(&self) -> f64 {
        (self.n as f64).atan() / PI
    }

    /// Distance of `(x, y)` from the line, measured vertically modulo 1.
    pub fn offset(&self, x: f64, y: f64) -> f64 {
        dist_to_int(y - self.n as f64 * x + self.alpha.value())
    }
}

impl VerticalLine {
    pub fn new(rho: ModularParam, alpha: Shift, beta: Shift, local: LocalSystemData) -> Self {
        Self { alpha, beta, local, rho }
    }

    pub fn offset(&self, x: f64, _y: f64) -> f64 {
        dist_to_int(x + self.alpha.value())
    }
}

fn dist_to_int(v: f64) -> f64 {
    (v - v.round()).abs()
}

impl FukayaObj {
    pub fn rho(&self) -> ModularParam {
        match self {
            FukayaObj::Slope(s) => s.rho,
            FukayaObj::Vertical(v) => v.rho,
            FukayaObj::Cover(c) => {
                ModularParam::kahler(c.inner.rho.b_field() / c.r as f64, c.inner.rho.area() / c.r as f64)
                    .expect("cover parameter is in the upper half plane")
            }
        }
    }

    pub fn local(&self) -> &LocalSystemData {
        match self {
            FukayaObj::Slope(s) => &s.local,
            FukayaObj::Vertical(v) => &v.local,
            FukayaObj::Cover(c) => &c.inner.local,
        }
    }

    pub fn rank(&self) -> usize {
        self.local().dim()
    }

    /// `alpha_log` in `(-1/2, 1/2]` with slope `tan(pi alpha_log)`.
    pub fn log_slope(&self) -> f64 {
        match self {
            FukayaObj::Slope(s) => s.log_slope(),
            FukayaObj::Vertical(_) => 0.5,
            FukayaObj::Cover(c) => (c.inner.n as f64 / c.r as f64).atan() / PI,
        }
    }

    /// Integer direction vector of the closed geodesic.
    pub fn direction(&self) -> (i64, i64) {
        match self {
            FukayaObj::Slope(s) => (1, s.n),
            FukayaObj::Vertical(_) => (0, 1),
            FukayaObj::Cover(c) => (c.r as i64, c.inner.n),
        }
    }

    /// The point at parameter `t = 0`.
    pub fn base_point(&self) -> (f64, f64) {
        match self {
            FukayaObj::Slope(s) => {
                let a = s.alpha.value();
                (a, (s.n - 1) as f64 * a)
            }
            FukayaObj::Vertical(v) => (-v.alpha.value(), 0.0),
            FukayaObj::Cover(c) => {
                let a = c.inner.alpha.value();
                (c.r as f64 * a, (c.inner.n - 1) as f64 * a)
            }
        }
    }
}

/// A point of `L1 ∩ L2` in `[0, 1)^2` with its class index and Maslov degree.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntersectionPoint {
    pub coords: (f64, f64),
    pub index: i64,
    pub maslov: i32,
}

/// `-floor(alpha_log(L2) - alpha_log(L1))`.
pub fn maslov_index(l1: &FukayaObj, l2: &FukayaObj) -> i32 {
    -((l2.log_slope() - l1.log_slope()).floor() as i32)
}

fn wrap(v: f64) -> f64 {
    let w = v.rem_euclid(1.0);
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

pub fn intersections(l1: &FukayaObj, l2: &FukayaObj) -> Result<Vec<IntersectionPoint>> {
    let maslov = maslov_index(l1, l2);
    match (l1, l2) {
        (FukayaObj::Slope(a), FukayaObj::Slope(b)) => {
            if a.n == b.n {
                return Err(MirrorError::ParallelLines);
            }
            let (lo, hi) = if a.n < b.n { (a, b) } else { (b, a) };
            let n = hi.n - lo.n;
            let alpha12 = (hi.alpha.value() - lo.alpha.value()) / n as f64;
            Ok((0..n)
                .map(|k| {
                    let x = alpha12 + k as f64 / n as f64;
                    let y = lo.n as f64 * x - lo.alpha.value();
                    IntersectionPoint { coords: (wrap(x), wrap(y)), index: k, maslov }
                })
                .collect())
        }
        (FukayaObj::Slope(s), FukayaObj::Vertical(v)) | (FukayaObj::Vertical(v), FukayaObj::Slope(s)) => {
            let x = -v.alpha.value();
            let y = s.n as f64 * x - s.alpha.value();
            Ok(vec![IntersectionPoint { coords: (wrap(x), wrap(y)), index: 0, maslov }])
        }
        _ => general_intersections(l1, l2, maslov),
    }
}

/// Solves `P1 + t d1 = P2 + u d2 (mod Z^2)` for `(t, u) ∈ [0, 1)^2`, which
/// has `|det(d1, d2)|` solutions.
fn general_intersections(l1: &FukayaObj, l2: &FukayaObj, maslov: i32) -> Result<Vec<IntersectionPoint>> {
    let (p, q) = l1.direction();
    let (r, s) = l2.direction();
    let det = (p * s - q * r) as f64;
    if det == 0.0 {
        return Err(MirrorError::ParallelLines);
    }
    let (p1, p2) = (l1.base_point(), l2.base_point());
    let delta = (p2.0 - p1.0, p2.1 - p1.1);
    // t d1 - u d2 = delta + v
    let corners = [(0.0, 0.0), (p as f64, q as f64), (-r as f64, -s as f64), ((p - r) as f64, (q - s) as f64)];
    let xs = corners.iter().map(|c| c.0 - delta.0);
    let ys = corners.iter().map(|c| c.1 - delta.1);
    let (x0, x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (y0, y1) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    const TOL: f64 = 1e-12;
    let mut out = Vec::new();
    for vx in (x0.floor() as i64 - 1)..=(x1.ceil() as i64 + 1) {
        for vy in (y0.floor() as i64 - 1)..=(y1.ceil() as i64 + 1) {
            let (bx, by) = (delta.0 + vx as f64, delta.1 + vy as f64);
            // [p -r; q -s] (t, u) = (bx, by)
            let t = (-s as f64 * bx + r as f64 * by) / (-det);
            let u = (-q as f64 * bx + p as f64 * by) / (-det);
            if (-TOL..1.0 - TOL).contains(&t) && (-TOL..1.0 - TOL).contains(&u) {
                let x = p1.0 + t * p as f64;
                let y = p1.1 + t * q as f64;
                out.push((t, IntersectionPoint { coords: (wrap(x), wrap(y)), index: 0, maslov }));
            }
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out
        .into_iter()
        .enumerate()
        .map(|(i, (_, mut pt))| {
            pt.index = i as i64;
            pt
        })
        .collect())
}

/// A degree-zero morphism: one tensor `V1 -> V2` per intersection point.
#[derive(Clone, Debug, PartialEq)]
pub struct FukayaMorphism {
    pub source: FukayaObj,
    pub target: FukayaObj,
    pub coeffs: Vec<HomTensor>,
}

/// Lines that coincide (same slope, same intercept and holonomy mod 1).
fn same_line(a: &SlopeLine, b: &SlopeLine) -> bool {
    a.n == b.n && a.alpha.eq_mod_one(&b.alpha) && a.beta.eq_mod_one(&b.beta)
}

/// Number of generators of `Hom^0(L1, L2)` and, for coinciding lines, the intertwiner basis.
fn hom0_generators(l1: &FukayaObj, l2: &FukayaObj) -> Result<usize> {
    if let (FukayaObj::Slope(a), FukayaObj::Slope(b)) = (l1, l2) {
        if a.n == b.n {
            if same_line(a, b) && !intertwiners(&a.local, &b.local).is_empty() {
                return Ok(1);
            }
            return Ok(0);
        }
    }
    if maslov_index(l1, l2) != 0 {
        return Ok(0);
    }
    Ok(intersections(l1, l2)?.len())
}

/// `dim Hom^0(L1, L2)`: intersection points times `d1 d2`, or the
/// intertwiner dimension for coinciding lines.
pub fn hom_dimension(l1: &FukayaObj, l2: &FukayaObj) -> Result<usize> {
    if let (FukayaObj::Slope(a), FukayaObj::Slope(b)) = (l1, l2) {
        if a.n == b.n {
            return Ok(if same_line(a, b) { intertwiners(&a.local, &b.local).len() } else { 0 });
        }
    }
    Ok(hom0_generators(l1, l2)? * l1.rank() * l2.rank())
}

impl FukayaMorphism {
    pub fn new(source: FukayaObj, target: FukayaObj, coeffs: Vec<HomTensor>) -> Result<Self> {
        if source.rho().tau() != target.rho().tau() {
            return Err(MirrorError::MixedModularParam);
        }
        let parallel = matches!((&source, &target), (FukayaObj::Slope(a), FukayaObj::Slope(b)) if a.n == b.n);
        if !parallel && maslov_index(&source, &target) != 0 && !coeffs.is_empty() {
            return Err(MirrorError::Invalid(format!(
                "intersection points have Maslov index {}; only degree-zero morphisms are supported",
                maslov_index(&source, &target)
            )));
        }
        let expected = hom0_generators(&source, &target)?;
        if coeffs.len() != expected {
            return Err(MirrorError::ShapeMismatch(format!("expected {expected} coefficient tensors, got {}", coeffs.len())));
        }
        let shape = (target.rank(), source.rank());
        if let Some(bad) = coeffs.iter().find(|c| c.shape() != shape) {
            return Err(MirrorError::ShapeMismatch(format!("coefficient has shape {:?}, expected {shape:?}", bad.shape())));
        }
        if parallel && expected == 1 {
            let t = &coeffs[0];
            let lhs = t * source.local().matrix();
            let rhs = target.local().matrix() * t;
            if lhs.max_abs_diff(&rhs) > 1e-9 * (1.0 + t.max_abs()) {
                return Err(MirrorError::Invalid("morphism between coinciding lines must intertwine the nilpotents".into()));
            }
        }
        Ok(Self { source, target, coeffs })
    }

    pub fn zero(source: FukayaObj, target: FukayaObj) -> Result<Self> {
        let n = hom0_generators(&source, &target)?;
        let coeffs = vec![Matrix::zeros(target.rank(), source.rank()); n];
        Self::new(source, target, coeffs)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Matrix::is_zero)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.source != other.source || self.target != other.target || self.coeffs.len() != other.coeffs.len() {
            return f64::INFINITY;
        }
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.max_abs_diff(b)).fold(0.0, f64::max)
    }
}

/// One term of the triangle sum for a chain of slope lines `n1 < n2 < n3`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriangleDatum {
    pub m: i64,
    pub k: i64,
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    /// Area from the closed form `[k + delta n n']^2 / (2 n n' n'')`.
    pub area: f64,
    /// Area from the determinant `|det[(l1, n1 l1), (l2, n2 l2)]| / 2`.
    pub area_det: f64,
    pub target_class: i64,
    /// Vertices `L1∩L2`, `L2∩L3`, `L3∩L1` (lifted to the plane).
    pub vertices: [(f64, f64); 3],
    /// Largest distance (mod 1) of a vertex from either of its two lines.
    pub vertex_residual: f64,
}

struct ChainGeometry {
    n: i64,
    np: i64,
    npp: i64,
    delta: f64,
}

fn chain_geometry(s1: &SlopeLine, s2: &SlopeLine, s3: &SlopeLine) -> Result<ChainGeometry> {
    if !(s1.n < s2.n && s2.n < s3.n) {
        return Err(MirrorError::ChainMismatch("slopes must be strictly increasing".into()));
    }
    let (n, np) = (s2.n - s1.n, s3.n - s2.n);
    let alpha12 = (s2.alpha - s1.alpha).div_int(n);
    let alpha23 = (s3.alpha - s2.alpha).div_int(np);
    Ok(ChainGeometry { n, np, npp: n + np, delta: (alpha23 - alpha12).value() })
}

fn triangle(s: [&SlopeLine; 3], g: &ChainGeometry, a: i64, b: i64, m: i64) -> TriangleDatum {
    let (n, np, npp) = (g.n, g.np, g.npp);
    let (nf, npf, nppf) = (n as f64, np as f64, npp as f64);
    let k = n * b - np * a + n * np * m;
    let bracket = k as f64 + g.delta * nf * npf;
    let l2 = bracket / (nf * npf);
    let l1 = npf * l2 / nppf;
    let l3 = -nf * l2 / nppf;
    let area = 0.5 * bracket * bracket / (nf * npf * nppf);
    let (n1, n2) = (s[0].n as f64, s[1].n as f64);
    let area_det = 0.5 * (l1 * n2 * l2 - l2 * n1 * l1).abs();
    let x12 = (s[1].alpha.value() - s[0].alpha.value()) / nf + a as f64 / nf;
    let v12 = (x12, n1 * x12 - s[0].alpha.value());
    let v23 = (v12.0 + l2, v12.1 + n2 * l2);
    let v31 = (v23.0 + l3, v23.1 + s[2].n as f64 * l3);
    let vertex_residual = [
        s[0].offset(v12.0, v12.1),
        s[1].offset(v12.0, v12.1),
        s[1].offset(v23.0, v23.1),
        s[2].offset(v23.0, v23.1),
        s[2].offset(v31.0, v31.1),
        s[0].offset(v31.0, v31.1),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    TriangleDatum {
        m,
        k,
        l1,
        l2,
        l3,
        area,
        area_det,
        target_class: (a + b + np * m).mod_floor(&npp),
        vertices: [v12, v23, v31],
        vertex_residual,
    }
}

/// Triangles with corners at `e_a ∈ L1∩L2` and `e_b ∈ L2∩L3`, one per `m`.
pub fn triangle_scan(
    s1: &SlopeLine,
    s2: &SlopeLine,
    s3: &SlopeLine,
    a: i64,
    b: i64,
    ms: impl IntoIterator<Item = i64>,
) -> Result<Vec<TriangleDatum>> {
    let g = chain_geometry(s1, s2, s3)?;
    Ok(ms.into_iter().map(|m| triangle([s1, s2, s3], &g, a, b, m)).collect())
}

fn nil_norm_bound(locals: &[&LocalSystemData]) -> f64 {
    locals
        .iter()
        .map(|l| (1.0 + l.dim() as f64 * l.matrix().max_abs()).powi(l.nil_index() as i32))
        .product::<f64>()
        * locals[1].dim() as f64
}

fn check_chain(u12: &FukayaMorphism, u23: &FukayaMorphism) -> Result<()> {
    if u12.target != u23.source {
        return Err(MirrorError::ChainMismatch("target of the first morphism is not the source of the second".into()));
    }
    Ok(())
}

/// `m2(u12, u23)`, the composite `u23 ∘ u12`.
pub fn m2(u12: &FukayaMorphism, u23: &FukayaMorphism, trunc: &TruncationSpec) -> Result<FukayaMorphism> {
    check_chain(u12, u23)?;
    let (o1, o2, o3) = (&u12.source, &u12.target, &u23.target);
    if let FukayaObj::Vertical(_) = o3 {
        return m2_vertical(u12, u23, trunc);
    }
    let (s1, s2, s3) = match (o1, o2, o3) {
        (FukayaObj::Slope(a), FukayaObj::Slope(b), FukayaObj::Slope(c)) => (a, b, c),
        _ => return Err(MirrorError::Invalid("m2 is implemented for chains of slope lines, optionally ending on a vertical line".into())),
    };
    let empty = FukayaMorphism::zero(o1.clone(), o3.clone())?;
    if u12.coeffs.is_empty() || u23.coeffs.is_empty() || empty.coeffs.is_empty() {
        return Ok(empty);
    }
    if s1.n == s2.n || s2.n == s3.n {
        let exact = |a: &SlopeLine, b: &SlopeLine| a.alpha == b.alpha && a.beta == b.beta;
        if (s1.n == s2.n && !exact(s1, s2)) || (s2.n == s3.n && !exact(s2, s3)) {
            return Err(MirrorError::ChainMismatch("coinciding-line links must use identical shift representatives".into()));
        }
        let coeffs = if s1.n == s2.n && s2.n == s3.n {
            vec![&u23.coeffs[0] * &u12.coeffs[0]]
        } else if s1.n == s2.n {
            u23.coeffs.iter().map(|b| b * &u12.coeffs[0]).collect()
        } else {
            u12.coeffs.iter().map(|a| &u23.coeffs[0] * a).collect()
        };
        return FukayaMorphism::new(o1.clone(), o3.clone(), coeffs);
    }
    let g = chain_geometry(s1, s2, s3)?;
    let (nf, npf, nppf) = (g.n as f64, g.np as f64, g.npp as f64);
    let rho = s1.rho.rho();
    let (b1, b2, b3) = (s1.beta.value(), s2.beta.value(), s3.beta.value());
    let mut out = vec![Matrix::zeros(s3.local.dim(), s1.local.dim()); g.npp as usize];
    let pairs = (g.n * g.np) as f64;
    let norm_base = nil_norm_bound(&[&s1.local, &s2.local, &s3.local]);
    for (a, ta) in u12.coeffs.iter().enumerate() {
        for (b, tb) in u23.coeffs.iter().enumerate() {
            let tc = TripleContraction::new(&s3.local, &s2.local, &s1.local, ta, tb)?;
            if tc.is_zero() {
                continue;
            }
            let (a, b) = (a as i64, b as i64);
            let model = TailModel {
                amplitude: ta.max_abs() * tb.max_abs() * norm_base,
                decay: PI * rho.im * nf * npf / nppf,
                center: -g.delta,
                shift: b as f64 / npf - a as f64 / nf,
                poly_scale: 1.0,
                poly_offset: 1.0,
                degree: tc.max_total_degree() as u32,
            };
            let window = model.window(trunc.epsilon / pairs, trunc.max_terms)?;
            for m in window.indices() {
                let t = triangle([s1, s2, s3], &g, a, b, m);
                let weight = (TWO_PI_I * (rho * t.area + (t.l1 * b1 - t.l2 * b2 - t.l3 * b3))).exp();
                let hol = tc.apply_exp(C64::new(t.l3, 0.0), C64::new(t.l2, 0.0), C64::new(-t.l1, 0.0));
                out[t.target_class as usize].axpy(weight, &hol);
            }
        }
    }
    FukayaMorphism::new(o1.clone(), o3.clone(), out)
}

/// `m2` for a chain `slope(n1) -> slope(n2) -> vertical`.
///
/// With `x_a = alpha12 + a/n` the first coordinate of `e_a` and `l` the
/// signed horizontal distance from `e_a` to a lift `x = -alpha_V + j` of the
/// vertical line, the triangle has legs `l` along `L2`, `n l` along the
/// vertical line and `-l` along `L1`, area `n l^2 / 2`, and holonomy
/// `exp[l (N2 - 2 pi i beta2) - n l (N_V + 2 pi i beta_V) - l (N1 - 2 pi i beta1)]`.
pub fn m2_vertical(u12: &FukayaMorphism, u_s: &FukayaMorphism, trunc: &TruncationSpec) -> Result<FukayaMorphism> {
    check_chain(u12, u_s)?;
    let (s1, s2, v) = match (&u12.source, &u12.target, &u_s.target) {
        (FukayaObj::Slope(a), FukayaObj::Slope(b), FukayaObj::Vertical(c)) => (a, b, c),
        _ => return Err(MirrorError::ChainMismatch("expected slope -> slope -> vertical".into())),
    };
    let target_src = u12.source.clone();
    let target_tgt = u_s.target.clone();
    let mut out = Matrix::zeros(v.local.dim(), s1.local.dim());
    if u12.coeffs.is_empty() {
        return FukayaMorphism::new(target_src, target_tgt, vec![out]);
    }
    let tb = &u_s.coeffs[0];
    if s1.n == s2.n {
        if !(s1.alpha == s2.alpha && s1.beta == s2.beta) {
            return Err(MirrorError::ChainMismatch("coinciding-line links must use identical shift representatives".into()));
        }
        return FukayaMorphism::new(target_src, target_tgt, vec![tb * &u12.coeffs[0]]);
    }
    let n = s2.n - s1.n;
    let nf = n as f64;
    let rho = s1.rho.rho();
    let alpha12 = (s2.alpha - s1.alpha).div_int(n).value();
    let beta_sum = s2.beta.value() - s1.beta.value() + nf * v.beta.value();
    let norm_base = nil_norm_bound(&[&s1.local, &s2.local, &v.local]);
    for (a, ta) in u12.coeffs.iter().enumerate() {
        let tc = TripleContraction::new(&v.local, &s2.local, &s1.local, ta, tb)?;
        if tc.is_zero() {
            continue;
        }
        let shift = -(v.alpha.value() + alpha12 + a as f64 / nf);
        let model = TailModel {
            amplitude: ta.max_abs() * tb.max_abs() * norm_base,
            decay: PI * rho.im * nf,
            center: 0.0,
            shift,
            poly_scale: nf,
            poly_offset: 1.0,
            degree: tc.max_total_degree() as u32,
        };
        let window = model.window(trunc.epsilon / nf, trunc.max_terms)?;
        for j in window.indices() {
            let l = j as f64 + shift;
            let weight = (C64::new(0.0, PI) * rho * (nf * l * l) - TWO_PI_I * (l * beta_sum)).exp();
            let hol = tc.apply_exp(C64::new(-nf * l, 0.0), C64::new(l, 0.0), C64::new(-l, 0.0));
            out.axpy(weight, &hol);
        }
    }
    FukayaMorphism::new(target_src, target_tgt, vec![out])
}

/// `max |m2(m2(u12, u23), u34) - m2(u12, m2(u23, u34))|`.
pub fn associativity_residual(
    u12: &FukayaMorphism,
    u23: &FukayaMorphism,
    u34: &FukayaMorphism,
    trunc: &TruncationSpec,
) -> Result<f64> {
    let left = m2(&m2(u12, u23, trunc)?, u34, trunc)?;
    let right = m2(u12, &m2(u23, u34, trunc)?, trunc)?;
    Ok(left.max_abs_diff(&right))
}

/// Preimage of a slope line under `(x', y) -> (r x', y)`: slope `r n`, the
/// same intercept, connection `r (-2 pi i beta + N) dx'`, parameter `r rho`.
pub fn pullback_line(r: u32, s: &SlopeLine) -> SlopeLine {
    let ri = r as i64;
    SlopeLine {
        n: s.n * ri,
        alpha: s.alpha,
        beta: s.beta.mul_int(ri),
        local: s.local.scaled(r as f64),
        rho: s.rho.scaled(r),
    }
}

/// An intersection point `e_k` pulls back to the sum of its `r` preimages,
/// which are the points of class `k + n j` upstairs.
pub fn pullback_morphism(r: u32, u: &FukayaMorphism) -> Result<FukayaMorphism> {
    let (s1, s2) = match (&u.source, &u.target) {
        (FukayaObj::Slope(a), FukayaObj::Slope(b)) => (a, b),
        _ => return Err(MirrorError::Invalid("pullback is implemented for morphisms between slope lines".into())),
    };
    let src = FukayaObj::Slope(pullback_line(r, s1));
    let tgt = FukayaObj::Slope(pullback_line(r, s2));
    if s1.n >= s2.n || u.coeffs.is_empty() {
        return FukayaMorphism::new(src, tgt, u.coeffs.clone());
    }
    let n = u.coeffs.len();
    let coeffs = (0..n * r as usize).map(|j| u.coeffs[j % n].clone()).collect();
    FukayaMorphism::new(src, tgt, coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theta::{theta_eval, ThetaChar};

    fn rho_i() -> ModularParam {
        ModularParam::kahler(0.0, 1.0).unwrap()
    }

    fn line(n: i64, alpha: Shift) -> FukayaObj {
        FukayaObj::Slope(SlopeLine::new(rho_i(), n, alpha, Shift::ZERO, LocalSystemData::trivial(1)))
    }

    fn one() -> Matrix {
        Matrix::scalar(C64::new(1.0, 0.0))
    }

    #[test]
    fn intersection_points_slopes_zero_two() {
        let pts = intersections(&line(0, Shift::ZERO), &line(2, Shift::ZERO)).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[0].coords, (0.0, 0.0));
        assert_eq!(pts[1].coords, (0.5, 0.0));
    }

    #[test]
    fn intersection_points_lie_on_both_lines() {
        let (a, b) = (Shift::Real(0.2), Shift::Real(-0.1));
        let (l1, l2) = (line(1, a), line(4, b));
        let pts = intersections(&l1, &l2).unwrap();
        assert_eq!(pts.len(), 3);
        for p in &pts {
            let (x, y) = p.coords;
            assert!(dist_to_int(y - x + 0.2) < 1e-12);
            assert!(dist_to_int(y - 4.0 * x - 0.1) < 1e-12);
        }
    }

    #[test]
    fn general_direction_counts() {
        let h = FukayaObj::Slope(SlopeLine::new(rho_i(), 0, Shift::ZERO, Shift::ZERO, LocalSystemData::trivial(1)));
        let v = FukayaObj::Vertical(VerticalLine::new(rho_i(), Shift::ZERO, Shift::ZERO, LocalSystemData::trivial(1)));
        assert_eq!(intersections(&h, &v).unwrap().len(), 1);
        let inner = |n, alpha| SlopeLine::new(ModularParam::kahler(0.0, 2.0).unwrap(), n, alpha, Shift::ZERO, LocalSystemData::trivial(1));
        let c1 = FukayaObj::Cover(CoverLine { r: 2, inner: inner(1, Shift::Real(0.13)) });
        let c2 = FukayaObj::Cover(CoverLine { r: 2, inner: inner(3, Shift::Real(-0.31)) });
        assert_eq!(intersections(&c1, &c2).unwrap().len(), 4);
        let c3 = FukayaObj::Cover(CoverLine { r: 3, inner: inner(2, Shift::Real(0.07)) });
        assert_eq!(intersections(&c1, &c3).unwrap().len(), 1); // |2*2 - 1*3|
        assert_eq!(intersections(&line(1, Shift::Real(0.11)), &c3).unwrap().len(), 1); // |1*2 - 1*3|
        assert_eq!(intersections(&line(1, Shift::ZERO), &line(1, Shift::Real(0.5))), Err(MirrorError::ParallelLines));
    }

    #[test]
    fn maslov_values() {
        let a = line(0, Shift::ZERO);
        assert_eq!(maslov_index(&a, &a), 0);
        let b = line(1, Shift::ZERO);
        assert_eq!(maslov_index(&a, &b), 0);
        assert_eq!(maslov_index(&b, &a), 1);
        assert!(FukayaMorphism::new(b, a, vec![one()]).is_err());
    }

    #[test]
    fn addition_formula_product() {
        let tr = TruncationSpec::default();
        let (l0, l1, l2) = (line(0, Shift::ZERO), line(1, Shift::ZERO), line(2, Shift::ZERO));
        let u = FukayaMorphism::new(l0, l1.clone(), vec![one()]).unwrap();
        let v = FukayaMorphism::new(l1, l2, vec![one()]).unwrap();
        let w = m2(&u, &v, &tr).unwrap();
        let c0: f64 = (-20..=20).map(|n: i32| (-2.0 * PI * (n * n) as f64).exp()).sum();
        let c1: f64 = (-20..=20).map(|n: i32| (-2.0 * PI * (n as f64 + 0.5).powi(2)).exp()).sum();
        assert!((w.coeffs[0][(0, 0)] - c0).norm() < 1e-12);
        assert!((w.coeffs[1][(0, 0)] - c1).norm() < 1e-12);
        assert!((c0 - 1.0037349).abs() < 1e-7);
    }

    #[test]
    fn shifted_third_line_gives_characteristic_thetas() {
        let tr = TruncationSpec::default();
        let (alpha, beta) = (0.17, 0.23);
        let l3 = FukayaObj::Slope(SlopeLine::new(rho_i(), 2, Shift::Real(2.0 * alpha), Shift::Real(beta), LocalSystemData::trivial(1)));
        let (l0, l1) = (line(0, Shift::ZERO), line(1, Shift::ZERO));
        let u = FukayaMorphism::new(l0, l1.clone(), vec![one()]).unwrap();
        let v = FukayaMorphism::new(l1, l3, vec![one()]).unwrap();
        let w = m2(&u, &v, &tr).unwrap();
        let two = ModularParam::new(C64::new(0.0, 2.0)).unwrap();
        let zero = C64::new(0.0, 0.0);
        let t0 = theta_eval(&ThetaChar::new(alpha, beta), &two, zero, 0, &tr).unwrap();
        let t1 = theta_eval(&ThetaChar::new(0.5 + alpha, beta), &two, zero, 0, &tr).unwrap();
        assert!((w.coeffs[0][(0, 0)] - t0).norm() < 1e-12);
        assert!((w.coeffs[1][(0, 0)] - t1).norm() < 1e-12);
    }

    #[test]
    fn zero_input_gives_zero() {
        let tr = TruncationSpec::default();
        let (l0, l1, l3) = (line(0, Shift::ZERO), line(1, Shift::ZERO), line(3, Shift::ZERO));
        let u = FukayaMorphism::zero(l0, l1.clone()).unwrap();
        let v = FukayaMorphism::new(l1, l3, vec![one(), one()]).unwrap();
        assert!(m2(&u, &v, &tr).unwrap().is_zero());
    }

    #[test]
    fn triangle_scan_basic_chain() {
        let mk = |n| SlopeLine::new(rho_i(), n, Shift::ZERO, Shift::ZERO, LocalSystemData::trivial(1));
        let (a, b, c) = (mk(0), mk(1), mk(2));
        let tris = triangle_scan(&a, &b, &c, 0, 0, -4..=4).unwrap();
        for t in &tris {
            assert_eq!(t.l2, t.m as f64);
            assert!((t.area - (t.m * t.m) as f64 / 4.0).abs() < 1e-15);
            assert!((t.area - t.area_det).abs() < 1e-12);
            assert!(t.vertex_residual < 1e-12);
        }
        let zero = tris.iter().find(|t| t.m == 0).unwrap();
        assert_eq!(zero.area, 0.0);
        let even: Vec<_> = tris.iter().filter(|t| t.m % 2 == 0).map(|t| (t.m / 2, t.area)).collect();
        for (n, area) in even {
            assert_eq!(area, (n * n) as f64);
        }
    }

    #[test]
    fn associativity_small() {
        let tr = TruncationSpec::default();
        let ls: Vec<_> = (0..4).map(|n| line(n, Shift::ZERO)).collect();
        let u: Vec<_> = (0..3).map(|i| FukayaMorphism::new(ls[i].clone(), ls[i + 1].clone(), vec![one()]).unwrap()).collect();
        assert!(associativity_residual(&u[0], &u[1], &u[2], &tr).unwrap() < 1e-9);
    }

    #[test]
    fn vertical_product_at_origin() {
        let tr = TruncationSpec::default();
        let (l0, l1) = (line(0, Shift::ZERO), line(1, Shift::ZERO));
        let v = FukayaObj::Vertical(VerticalLine::new(rho_i(), Shift::ZERO, Shift::ZERO, LocalSystemData::trivial(1)));
        let u = FukayaMorphism::new(l0, l1.clone(), vec![one()]).unwrap();
        let s = FukayaMorphism::new(l1.clone(), v.clone(), vec![one()]).unwrap();
        let w = m2(&u, &s, &tr).unwrap();
        assert!((w.coeffs[0][(0, 0)].re - 1.0864348).abs() < 1e-7);
        let z = FukayaMorphism::zero(l1, v).unwrap();
        assert!(m2(&u, &z, &tr).unwrap().is_zero());
    }

    #[test]
    fn pulled_back_lines() {
        let s = SlopeLine::new(rho_i(), 2, Shift::ratio(1, 4), Shift::ratio(1, 3), LocalSystemData::jordan(2));
        let p = pullback_line(3, &s);
        assert_eq!((p.n, p.alpha, p.beta), (6, Shift::ratio(1, 4), Shift::int(1)));
        assert_eq!(p.rho.tau(), C64::new(0.0, 3.0));
    }
}
