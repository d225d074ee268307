//! Theta functions with characteristics.
//!
//! The series evaluated everywhere in this crate is
//!
//! ```text
//! theta[c', c''](tau, z) = sum_m exp{ 2 pi i [ tau (m + c')^2 / 2 + (m + c')(z + c'') ] }
//! ```
//!
//! together with its term-wise `z`-derivatives. Truncation is certified by a
//! Gaussian tail bound (see [`TailModel`]), so every value returned here is
//! within the requested absolute `epsilon` of the full series.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{MirrorError, Result};

pub type C64 = Complex64;

/// Largest supported derivative order for [`theta_eval`].
pub const MAX_DERIVATIVE_ORDER: u32 = 16;

pub const DEFAULT_EPSILON: f64 = 1e-12;
pub const DEFAULT_MAX_TERMS: u64 = 20_000;

pub(crate) const TWO_PI_I: C64 = C64::new(0.0, 2.0 * PI);

/// Which side of the mirror the parameter is read on. The numerical value is
/// the same either way (`tau = rho`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ParamSide {
    #[default]
    Complex,
    Kahler,
}

/// The modular parameter `tau` (equivalently `q = exp(2 pi i tau)`, or the
/// complexified Kähler parameter `rho = b + iA`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModularParam {
    tau: C64,
    side: ParamSide,
}

impl ModularParam {
    pub fn new(tau: C64) -> Result<Self> {
        if !(tau.im > 0.0) || !tau.re.is_finite() || !tau.im.is_finite() {
            return Err(MirrorError::NonConvergent(tau.im));
        }
        Ok(Self { tau, side: ParamSide::Complex })
    }

    /// Kähler-side constructor: `rho = b + iA` with area `A > 0`.
    pub fn kahler(b: f64, area: f64) -> Result<Self> {
        let mut p = Self::new(C64::new(b, area))?;
        p.side = ParamSide::Kahler;
        Ok(p)
    }

    pub fn tau(&self) -> C64 {
        self.tau
    }

    pub fn rho(&self) -> C64 {
        self.tau
    }

    pub fn side(&self) -> ParamSide {
        self.side
    }

    pub fn area(&self) -> f64 {
        self.tau.im
    }

    pub fn b_field(&self) -> f64 {
        self.tau.re
    }

    pub fn q(&self) -> C64 {
        (TWO_PI_I * self.tau).exp()
    }

    /// The parameter of the `r`-fold cover: `r * tau`.
    pub fn scaled(&self, r: u32) -> Self {
        Self { tau: self.tau * r as f64, side: self.side }
    }

    /// Mirror map: the same number read on the other side.
    pub fn mirror(&self) -> Self {
        let side = match self.side {
            ParamSide::Complex => ParamSide::Kahler,
            ParamSide::Kahler => ParamSide::Complex,
        };
        Self { tau: self.tau, side }
    }
}

/// Characteristics `(c', c'')`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaChar {
    pub c_prime: f64,
    pub c_double_prime: f64,
}

impl ThetaChar {
    pub fn new(c_prime: f64, c_double_prime: f64) -> Self {
        Self { c_prime, c_double_prime }
    }

    pub fn zero() -> Self {
        Self::new(0.0, 0.0)
    }

    /// Reduces both characteristics into `[0, 1)`.
    ///
    /// Returns the reduced characteristic and the unit-modulus factor `u` with
    /// `theta[self] = u * theta[reduced]` (valid for every derivative order):
    /// shifting `c'` by an integer only re-indexes the sum, shifting `c''` by
    /// an integer `p` multiplies by `exp(2 pi i c' p)`.
    pub fn canonical(&self) -> (ThetaChar, C64) {
        let c1 = self.c_prime.rem_euclid(1.0);
        let c2 = self.c_double_prime.rem_euclid(1.0);
        let p = (self.c_double_prime - c2).round();
        let factor = (TWO_PI_I * (c1 * p)).exp();
        (ThetaChar::new(c1, c2), factor)
    }
}

/// Absolute error target plus a hard cap on the summation window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationSpec {
    pub epsilon: f64,
    pub max_terms: u64,
}

impl Default for TruncationSpec {
    fn default() -> Self {
        Self { epsilon: DEFAULT_EPSILON, max_terms: DEFAULT_MAX_TERMS }
    }
}

impl TruncationSpec {
    pub fn new(epsilon: f64, max_terms: u64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(MirrorError::Invalid(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(Self { epsilon, max_terms })
    }

    pub fn with_epsilon(epsilon: f64) -> Self {
        Self { epsilon, ..Self::default() }
    }

    /// Same cap, epsilon scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self { epsilon: self.epsilon * factor, max_terms: self.max_terms }
    }
}

/// Envelope for a one-parameter family of series terms indexed by
/// `t = m + shift`, `m` an integer:
///
/// ```text
/// |term(t)| <= amplitude * (poly_scale * |t| + poly_offset)^degree * exp(-decay * (t - center)^2)
/// ```
///
/// [`TailModel::window`] picks the symmetric window `|m - m_c| <= M` around
/// the integer `m_c` nearest the Gaussian center such that the omitted terms
/// sum to at most `epsilon`. For `|m - m_c| > M` the distance to the center is
/// at least `s0 = M + 1/2`; the ratio of consecutive envelope values beyond
/// `s0` is at most
/// `rho = ((|center| + s0 + 1 + o) / (|center| + s0 + o))^degree * exp(-decay (2 s0 + 1))`
/// (with `o = poly_offset / poly_scale`), so each side contributes at most
/// `g(s0) / (1 - rho)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailModel {
    pub amplitude: f64,
    pub decay: f64,
    pub center: f64,
    pub shift: f64,
    pub poly_scale: f64,
    pub poly_offset: f64,
    pub degree: u32,
}

/// A chosen summation window: `m` runs over `center_index - half_width ..= center_index + half_width`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Window {
    pub center_index: i64,
    pub half_width: u64,
}

impl Window {
    pub fn indices(&self) -> impl Iterator<Item = i64> {
        let w = self.half_width as i64;
        (self.center_index - w)..=(self.center_index + w)
    }

    pub fn widened(&self, factor: u64) -> Self {
        Self { center_index: self.center_index, half_width: self.half_width * factor + factor }
    }
}

impl TailModel {
    fn log_envelope(&self, s: f64) -> f64 {
        let mut lg = self.amplitude.ln() - self.decay * s * s;
        if self.degree > 0 {
            let base = self.poly_scale * (self.center.abs() + s) + self.poly_offset;
            lg += self.degree as f64 * base.max(f64::MIN_POSITIVE).ln();
        }
        lg
    }

    /// Upper bound (as a natural log) on the omitted tail for half-width `m`.
    pub fn log_tail_bound(&self, m: u64) -> f64 {
        let s0 = m as f64 + 0.5;
        let mut log_ratio = -self.decay * (2.0 * s0 + 1.0);
        if self.degree > 0 && self.poly_scale > 0.0 {
            let o = self.poly_offset / self.poly_scale;
            let a = self.center.abs() + s0 + o;
            log_ratio += self.degree as f64 * ((a + 1.0) / a).ln();
        }
        if log_ratio >= 0.0 {
            return f64::INFINITY;
        }
        let ratio = log_ratio.exp();
        std::f64::consts::LN_2 + self.log_envelope(s0) - (1.0 - ratio).ln()
    }

    pub fn window(&self, epsilon: f64, cap: u64) -> Result<Window> {
        if !(self.decay > 0.0) {
            return Err(MirrorError::NonConvergent(self.decay));
        }
        let center_index = (self.center - self.shift).round() as i64;
        if self.amplitude == 0.0 {
            return Ok(Window { center_index, half_width: 0 });
        }
        let target = epsilon.ln();
        let mut m = 0u64;
        // Skip ahead to the region where the Gaussian dominates.
        let guess = ((-target + self.amplitude.ln().max(0.0)) / self.decay).max(0.0).sqrt();
        if guess > 4.0 {
            m = (guess as u64).saturating_sub(2).min(cap + 1);
            while m > 0 && self.log_tail_bound(m - 1) <= target {
                m /= 2;
            }
        }
        loop {
            if m > cap {
                return Err(MirrorError::TruncationCapExceeded { needed: m, cap });
            }
            if self.log_tail_bound(m) <= target {
                return Ok(Window { center_index, half_width: m });
            }
            m += 1;
        }
    }
}

fn theta_tail_model(ch: &ThetaChar, tau: C64, z: C64, order: u32) -> TailModel {
    let y = tau.im;
    let v = z.im;
    TailModel {
        amplitude: (PI * v * v / y).exp(),
        decay: PI * y,
        center: -v / y,
        shift: ch.c_prime,
        poly_scale: 2.0 * PI,
        poly_offset: 0.0,
        degree: order,
    }
}

/// Half-width of the summation window meeting the Gaussian tail bound.
///
/// Reports the half-width `M` of the window around the Gaussian center; the
/// sum is taken over `2M + 1` consecutive indices.
pub fn truncation_window(
    ch: &ThetaChar,
    tau: &ModularParam,
    z: C64,
    order: u32,
    epsilon: f64,
    cap: u64,
) -> Result<u64> {
    Ok(theta_tail_model(ch, tau.tau(), z, order).window(epsilon, cap)?.half_width)
}

fn theta_sum(ch: &ThetaChar, tau: C64, z: C64, order: u32, window: Window) -> C64 {
    let zc = z + ch.c_double_prime;
    let mut acc = C64::new(0.0, 0.0);
    for m in window.indices() {
        let t = m as f64 + ch.c_prime;
        let phase = TWO_PI_I * (tau * (t * t / 2.0) + zc * t);
        let mut term = phase.exp();
        if order > 0 {
            term *= (TWO_PI_I * t).powu(order);
        }
        acc += term;
    }
    acc
}

/// `(d/dz)^order theta[c', c''](tau, z)`, accurate to `trunc.epsilon`.
pub fn theta_eval(
    ch: &ThetaChar,
    tau: &ModularParam,
    z: C64,
    order: u32,
    trunc: &TruncationSpec,
) -> Result<C64> {
    theta_eval_raw(ch, tau.tau(), z, order, trunc)
}

pub(crate) fn theta_eval_raw(
    ch: &ThetaChar,
    tau: C64,
    z: C64,
    order: u32,
    trunc: &TruncationSpec,
) -> Result<C64> {
    if !(tau.im > 0.0) {
        return Err(MirrorError::NonConvergent(tau.im));
    }
    if order > MAX_DERIVATIVE_ORDER {
        return Err(MirrorError::DerivativeOrder { order, max: MAX_DERIVATIVE_ORDER });
    }
    let window = theta_tail_model(ch, tau, z, order).window(trunc.epsilon, trunc.max_terms)?;
    Ok(theta_sum(ch, tau, z, order, window))
}

/// `theta[a/n, 0](n tau, n w)` and its `w`-derivatives (chain rule included).
pub(crate) fn level_theta(
    a: i64,
    n: i64,
    tau: C64,
    w: C64,
    order: u32,
    trunc: &TruncationSpec,
) -> Result<C64> {
    let ch = ThetaChar::new(a as f64 / n as f64, 0.0);
    let nf = n as f64;
    let v = theta_eval_raw(&ch, tau * nf, w * nf, order, &trunc.scaled(1.0 / nf.powi(order as i32)))?;
    Ok(v * nf.powi(order as i32))
}

/// Upper bound on `sum_j |exp(pi i T (j + c)^2 + 2 pi i (j + c) w)|` over all
/// characteristics `c`, used to budget errors when theta values are summed.
pub(crate) fn theta_magnitude_bound(big_tau: C64, w: C64) -> f64 {
    let y = big_tau.im;
    let v = w.im;
    (PI * v * v / y).exp() * (1.0 + 1.0 / y.sqrt())
}

/// Absolute difference between the two sides of the product formula
///
/// ```text
/// theta[a/n, 0](n tau, n z1) * theta[b/n', 0](n' tau, n' z2)
///   = sum_m exp[pi i tau k_m^2 / (n n' n'') + 2 pi i k_m (z2 - z1) / n'']
///           * theta[(a + b + n' m) / n'', 0](n'' tau, n z1 + n' z2)
/// ```
///
/// with `n = n2 - n1`, `n' = n3 - n2`, `n'' = n3 - n1` and
/// `k_m = n b - n' a + n n' m`.
#[allow(clippy::too_many_arguments)]
pub fn addition_identity_residual(
    n1: i64,
    n2: i64,
    n3: i64,
    a: i64,
    b: i64,
    tau: &ModularParam,
    z1: C64,
    z2: C64,
    trunc: &TruncationSpec,
) -> Result<f64> {
    if !(n1 < n2 && n2 < n3) {
        return Err(MirrorError::Invalid(format!(
            "degrees must be strictly increasing, got ({n1}, {n2}, {n3})"
        )));
    }
    let t = tau.tau();
    let (n, np) = (n2 - n1, n3 - n2);
    let half = trunc.scaled(0.5);
    let lhs = level_theta(a, n, t, z1, 0, &half)? * level_theta(b, np, t, z2, 0, &half)?;
    let rhs = addition_rhs(n, np, a, b, t, z1, z2, &half)?;
    Ok((lhs - rhs).norm())
}

#[allow(clippy::too_many_arguments)]
fn addition_rhs(
    n: i64,
    np: i64,
    a: i64,
    b: i64,
    t: C64,
    z1: C64,
    z2: C64,
    trunc: &TruncationSpec,
) -> Result<C64> {
    let npp = n + np;
    let (nf, npf, nppf) = (n as f64, np as f64, npp as f64);
    let w = z1 * nf + z2 * npf;
    let u = (z2 - z1).im;
    let y = t.im;
    let ratio = nf * npf / nppf;
    let theta_bound = theta_magnitude_bound(t * nppf, w);
    // k_m = n n' (m + b/n' - a/n); the m-envelope is a Gaussian in that variable.
    let model = TailModel {
        amplitude: (PI * ratio * u * u / y).exp() * theta_bound,
        decay: PI * y * ratio,
        center: -u / y,
        shift: b as f64 / npf - a as f64 / nf,
        poly_scale: 0.0,
        poly_offset: 1.0,
        degree: 0,
    };
    let window = model.window(trunc.epsilon / 2.0, trunc.max_terms)?;
    let count = (2 * window.half_width + 1) as f64;
    let inner = trunc.scaled(0.5 / (count * model.amplitude.max(1.0)));
    let mut acc = C64::new(0.0, 0.0);
    for m in window.indices() {
        let k = n * b - np * a + n * np * m;
        let kf = k as f64;
        let pref = (C64::new(0.0, PI) * t * (kf * kf / (nf * npf * nppf))
            + TWO_PI_I * (z2 - z1) * (kf / nppf))
            .exp();
        let ch = ThetaChar::new((a + b + np * m) as f64 / nppf, 0.0);
        acc += pref * theta_eval_raw(&ch, t * nppf, w, 0, &inner)?;
    }
    Ok(acc)
}

/// Residual of the isogeny splitting
/// `theta[a/n,0](n tau, n z) = sum_{k in Z/r} theta[(a + n k)/(n r), 0](n r^2 tau, n r z)`.
pub fn isogeny_split_residual(
    a: i64,
    n: i64,
    r: i64,
    tau: &ModularParam,
    z: C64,
    trunc: &TruncationSpec,
) -> Result<f64> {
    if n < 1 || r < 1 {
        return Err(MirrorError::Invalid(format!("need n >= 1 and r >= 1, got n={n}, r={r}")));
    }
    let t = tau.tau();
    let half = trunc.scaled(0.5);
    let lhs = level_theta(a, n, t, z, 0, &half)?;
    let each = trunc.scaled(0.5 / r as f64);
    let mut rhs = C64::new(0.0, 0.0);
    for k in 0..r {
        rhs += level_theta(a + n * k, n * r, t * r as f64, z, 0, &each)?;
    }
    Ok((lhs - rhs).norm())
}
