//! Log-domain evaluation of the integral families
//!
//! ```text
//! 𝒜(p,q,r,s,t,u) = ∫ xᵖ exp(qx − rx²) / (x² + sx + t)ᵘ dx
//! ℬ(p,q,r,s,t,u) = ∫ xᵖ exp{qx − r eˣ − s eˣ/(t + eˣ)} / (t + eˣ)ᵘ dx
//! 𝒞_b(p,q,r)     = ∫ xᵖ exp{qx − rx² − b(x)} dx,  b(x) = log(1 + eˣ) or eˣ
//! ```
//!
//! Each integrand is handled through its log-density `g`. The mode is found by a
//! bracketed Newton iteration, the window spans `tail_halfwidth_sigmas` local
//! standard deviations (extended while the weighted integrand is still above
//! `exp(-tail²/2)` of the peak), and the composite trapezoid rule is refined by
//! halving the spacing. Sums are accumulated with the maximum subtracted in the
//! exponent, so the result is a [`LogValue`].

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadConfig<T> {
    pub rel_tol: T,
    /// Absolute floor (in units of the peak value) for the convergence test.
    pub abs_tol: T,
    pub max_doublings: usize,
    pub initial_nodes: usize,
    pub tail_halfwidth_sigmas: T,
}

impl<T: Real> Default for QuadConfig<T> {
    fn default() -> Self {
        QuadConfig {
            rel_tol: T::lit(1e-10),
            abs_tol: T::lit(1e-300),
            max_doublings: 15,
            initial_nodes: 129,
            tail_halfwidth_sigmas: T::lit(12.0),
        }
    }
}

impl<T: Real> QuadConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > T::zero()) {
            return Err(Error::Contract("rel_tol must be positive".into()));
        }
        if self.initial_nodes < 33 || self.initial_nodes.is_multiple_of(2) {
            return Err(Error::Contract(
                "initial_nodes must be odd and at least 33".into(),
            ));
        }
        if self.max_doublings < 1 {
            return Err(Error::Contract("max_doublings must be at least 1".into()));
        }
        if !(self.tail_halfwidth_sigmas > T::zero()) {
            return Err(Error::Contract(
                "tail_halfwidth_sigmas must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A real number stored as `sign · exp(log_magnitude)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogValue<T> {
    pub log_magnitude: T,
    pub sign: i8,
}

impl<T: Real> LogValue<T> {
    pub fn zero() -> Self {
        LogValue {
            log_magnitude: T::neg_infinity(),
            sign: 0,
        }
    }

    pub fn from_value(v: T) -> Self {
        if v == T::zero() {
            Self::zero()
        } else {
            LogValue {
                log_magnitude: v.abs().ln(),
                sign: if v > T::zero() { 1 } else { -1 },
            }
        }
    }

    pub fn value(&self) -> T {
        match self.sign {
            0 => T::zero(),
            s => T::lit(s as f64) * self.log_magnitude.exp(),
        }
    }

    /// `self / other`, formed in the log domain.
    pub fn ratio(&self, other: &Self) -> T {
        if self.sign == 0 {
            return T::zero();
        }
        T::lit((self.sign * other.sign) as f64) * (self.log_magnitude - other.log_magnitude).exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum IntegrandKernel {
    /// b(x) = log(1 + eˣ)
    Logistic,
    /// b(x) = eˣ
    Poisson,
}

impl IntegrandKernel {
    /// (b, b', b'') at x.
    fn eval<T: Real>(self, x: T) -> (T, T, T) {
        match self {
            IntegrandKernel::Logistic => {
                let p = sigmoid(x);
                let pc = sigmoid(-x);
                (softplus(x), p, p * pc)
            }
            IntegrandKernel::Poisson => {
                let e = x.exp();
                (e, e, e)
            }
        }
    }

    pub fn b<T: Real>(self, x: T) -> T {
        self.eval(x).0
    }
}

pub(crate) fn sigmoid<T: Real>(z: T) -> T {
    if z >= T::zero() {
        (T::one() + (-z).exp()).recip()
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

pub(crate) fn softplus<T: Real>(z: T) -> T {
    z.max(T::zero()) + (-z.abs()).exp().ln_1p()
}

/// A weight multiplying the base integrand. `Central` and `ExpUp` are
/// relative to the anchor `c` (the principal mode): (x−c)ᵖ and e^(x−c).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Weight {
    Raw(u32),
    Central(u32),
    ExpUp,
}

impl Weight {
    /// (log |w|, sign of w) at x with anchor c.
    #[inline]
    fn log_abs<T: Real>(self, x: T, c: T) -> (T, i8) {
        let (v, p) = match self {
            Weight::Raw(p) => (x, p),
            Weight::Central(p) => (x - c, p),
            Weight::ExpUp => return (x - c, 1),
        };
        if p == 0 {
            return (T::zero(), 1);
        }
        if v == T::zero() {
            return (T::neg_infinity(), 0);
        }
        let sign = if v < T::zero() && p % 2 == 1 { -1 } else { 1 };
        (T::lit(p as f64) * v.abs().ln(), sign)
    }

    /// Upper bound on log |w| used when deciding how far the window extends.
    fn growth<T: Real>(self, x: T, c: T) -> T {
        match self {
            Weight::Raw(p) => T::lit(p as f64) * x.abs().ln_1p(),
            Weight::Central(p) => T::lit(p as f64) * (x - c).abs().ln_1p(),
            Weight::ExpUp => x - c,
        }
    }
}

/// Log-integrand with first and second derivatives.
pub(crate) trait LogIntegrand<T: Real>: Sync {
    fn eval(&self, x: T) -> (T, T, T);
    fn candidates(&self) -> Vec<T>;
    /// Constant dropped from `g` for conditioning; added back to results.
    fn log_const(&self) -> T {
        T::zero()
    }
}

pub(crate) struct AIntegrand<T> {
    q: T,
    r: T,
    half_s: T,
    d: T,
    u: T,
}

impl<T: Real> AIntegrand<T> {
    pub(crate) fn new(q: T, r: T, s: T, t: T, u: T) -> Result<Self> {
        if ![q, r, s, t, u].iter().all(|v| v.is_finite()) {
            return Err(Error::Domain("𝒜 arguments must be finite".into()));
        }
        if !(r > T::zero()) {
            return Err(Error::Domain(format!("𝒜 needs r > 0, got r = {r}")));
        }
        let half_s = T::lit(0.5) * s;
        let d = t - half_s * half_s;
        if !(d > T::zero()) {
            return Err(Error::Domain(format!(
                "𝒜 needs t > s²/4, got s = {s}, t = {t}"
            )));
        }
        if !(u >= T::zero()) {
            return Err(Error::Domain(format!("𝒜 needs u ≥ 0, got u = {u}")));
        }
        Ok(AIntegrand { q, r, half_s, d, u })
    }
}

impl<T: Real> LogIntegrand<T> for AIntegrand<T> {
    // (x² + sx + t) = d·(1 + y²/d) with y = x + s/2.
    fn eval(&self, x: T) -> (T, T, T) {
        let two = T::lit(2.0);
        let y = x + self.half_s;
        let den = self.d + y * y;
        let g = self.q * x - self.r * x * x - self.u * (y * y / self.d).ln_1p();
        let g1 = self.q - two * self.r * x - self.u * two * y / den;
        let g2 = -two * self.r - self.u * two * (self.d - y * y) / (den * den);
        (g, g1, g2)
    }

    fn candidates(&self) -> Vec<T> {
        vec![self.q / (T::lit(2.0) * self.r), -self.half_s]
    }

    fn log_const(&self) -> T {
        -self.u * self.d.ln()
    }
}

pub(crate) struct BIntegrand<T> {
    q: T,
    r: T,
    s: T,
    u: T,
    ln_t: T,
}

impl<T: Real> BIntegrand<T> {
    pub(crate) fn new(q: T, r: T, s: T, t: T, u: T) -> Result<Self> {
        if ![q, r, s, t, u].iter().all(|v| v.is_finite()) {
            return Err(Error::Domain("ℬ arguments must be finite".into()));
        }
        if !(r > T::zero()) {
            return Err(Error::Domain(format!("ℬ needs r > 0, got r = {r}")));
        }
        if !(s >= T::zero()) {
            return Err(Error::Domain(format!("ℬ needs s ≥ 0, got s = {s}")));
        }
        if !(t > T::zero()) {
            return Err(Error::Domain(format!("ℬ needs t > 0, got t = {t}")));
        }
        if !(u > T::zero()) {
            return Err(Error::Domain(format!("ℬ needs u > 0, got u = {u}")));
        }
        // The left tail behaves like exp(qx).
        if !(q > T::zero()) {
            return Err(Error::Domain(format!(
                "ℬ needs q > 0 for the integral to converge, got q = {q}"
            )));
        }
        Ok(BIntegrand {
            q,
            r,
            s,
            u,
            ln_t: t.ln(),
        })
    }
}

impl<T: Real> LogIntegrand<T> for BIntegrand<T> {
    // log(t + eˣ) = log t + softplus(x − log t); eˣ/(t + eˣ) = σ(x − log t).
    fn eval(&self, x: T) -> (T, T, T) {
        let z = x - self.ln_t;
        let p = sigmoid(z);
        let pc = sigmoid(-z);
        let ex = x.exp();
        let rex = if ex.is_finite() { self.r * ex } else { T::infinity() };
        let g = self.q * x - rex - self.s * p - self.u * softplus(z);
        let pp = p * pc;
        let g1 = self.q - rex - self.s * pp - self.u * p;
        let g2 = -rex - self.s * pp * (pc - p) - self.u * pp;
        (g, g1, g2)
    }

    fn candidates(&self) -> Vec<T> {
        vec![(self.q / self.r).ln(), self.ln_t, T::zero()]
    }

    fn log_const(&self) -> T {
        -self.u * self.ln_t
    }
}

pub(crate) struct CIntegrand<T> {
    kernel: IntegrandKernel,
    q: T,
    r: T,
}

impl<T: Real> CIntegrand<T> {
    pub(crate) fn new(kernel: IntegrandKernel, q: T, r: T) -> Result<Self> {
        if !q.is_finite() || !r.is_finite() {
            return Err(Error::Domain("𝒞 arguments must be finite".into()));
        }
        if !(r > T::zero()) {
            return Err(Error::Domain(format!("𝒞 needs r > 0, got r = {r}")));
        }
        Ok(CIntegrand { kernel, q, r })
    }
}

impl<T: Real> LogIntegrand<T> for CIntegrand<T> {
    fn eval(&self, x: T) -> (T, T, T) {
        let (b, b1, b2) = self.kernel.eval(x);
        let two = T::lit(2.0);
        (
            self.q * x - self.r * x * x - b,
            self.q - two * self.r * x - b1,
            -two * self.r - b2,
        )
    }

    fn candidates(&self) -> Vec<T> {
        vec![self.q / (T::lit(2.0) * self.r), T::zero()]
    }
}

/// Local maximum of `g` reached from `x0` by bracketing a sign change of `g'`
/// and then Newton steps safeguarded by bisection.
fn find_mode<T: Real, F: LogIntegrand<T> + ?Sized>(f: &F, x0: T) -> Option<T> {
    if !x0.is_finite() {
        return None;
    }
    let (g0, d0, h0) = f.eval(x0);
    if !g0.is_finite() || !d0.is_finite() {
        return None;
    }
    if d0 == T::zero() {
        return Some(x0);
    }
    let dir = if d0 > T::zero() { T::one() } else { -T::one() };
    let floor = T::lit(1e-6) * (T::one() + x0.abs());
    let mut step = if h0 < T::zero() && h0.is_finite() {
        (d0 / h0).abs().max(floor)
    } else {
        T::one()
    };
    let mut a = x0;
    let mut b = x0 + dir * step;
    let mut bracketed = false;
    for _ in 0..400 {
        let (gb, db, _) = f.eval(b);
        if db.is_nan() || gb.is_nan() {
            step *= T::lit(0.5);
            b = a + dir * step;
            continue;
        }
        if db * dir <= T::zero() {
            bracketed = true;
            break;
        }
        a = b;
        step *= T::lit(2.0);
        b = a + dir * step;
    }
    if !bracketed {
        return None;
    }
    let (mut lo, mut hi) = if dir > T::zero() { (a, b) } else { (b, a) };
    let mut x = if dir > T::zero() { a } else { b };
    let tiny = T::epsilon() * T::lit(16.0);
    for _ in 0..300 {
        let (_, d, h) = f.eval(x);
        if d == T::zero() {
            return Some(x);
        }
        if d > T::zero() {
            lo = x;
        } else {
            hi = x;
        }
        let mut next = if h < T::zero() { x - d / h } else { T::nan() };
        if !(next > lo && next < hi) {
            next = T::lit(0.5) * (lo + hi);
        }
        let scale = T::one().max(x.abs());
        if (next - x).abs() <= tiny * scale || (hi - lo) <= tiny * scale {
            return Some(next);
        }
        x = next;
    }
    Some(x)
}

/// Integrals of `w_j(x)·exp(g(x))` for several weights on one node set.
pub(crate) struct Integrated<T> {
    /// Anchor (principal mode) used by the central and exponential weights.
    pub center: T,
    pub values: Vec<LogValue<T>>,
    /// Signed sums and their shifts, without the integrand's log-constant.
    raw: Vec<(T, T)>,
}

impl<T: Real> Integrated<T> {
    /// `values[j] / values[k]` formed from the raw sums, so a large
    /// log-constant does not cost precision.
    pub fn ratio(&self, j: usize, k: usize) -> T {
        let (sj, hj) = self.raw[j];
        let (sk, hk) = self.raw[k];
        sj / sk * (hj - hk).exp()
    }

    /// `log |values[j] / values[k]|`.
    pub fn log_ratio(&self, j: usize, k: usize) -> T {
        let (sj, hj) = self.raw[j];
        let (sk, hk) = self.raw[k];
        (sj / sk).abs().ln() + hj - hk
    }
}

/// Upper limit on trapezoid nodes per level, against pathological inputs.
const MAX_NODES: usize = 1 << 22;

pub(crate) fn integrate<T: Real, F: LogIntegrand<T> + ?Sized>(
    f: &F,
    weights: &[Weight],
    cfg: &QuadConfig<T>,
) -> Result<Integrated<T>> {
    cfg.validate()?;
    let two = T::lit(2.0);

    // Modes and local scales.
    let mut modes: Vec<(T, T, T)> = Vec::new();
    for x0 in f.candidates() {
        if let Some(m) = find_mode(f, x0) {
            let (g, _, h) = f.eval(m);
            if g.is_finite() {
                let sigma = if h < T::zero() && h.is_finite() {
                    (-h).sqrt().recip()
                } else {
                    T::one()
                };
                modes.push((m, g, sigma));
            }
        }
    }
    if modes.is_empty() {
        return Err(Error::Numeric("could not locate the integrand mode".into()));
    }
    let (center, gmax, _) = modes
        .iter()
        .copied()
        .fold(modes[0], |best, m| if m.1 > best.1 { m } else { best });
    let sigma_min = modes.iter().fold(T::infinity(), |s, m| s.min(m.2));

    // Window: at least `tail` local SDs beyond every mode, then extended until
    // the (weighted) integrand is below exp(-tail²/2) of the peak.
    let tail = cfg.tail_halfwidth_sigmas;
    let drop = tail * tail / two;
    let cutoff = |x: T| -> T {
        let (g, _, _) = f.eval(x);
        let grow = weights
            .iter()
            .fold(T::zero(), |m, w| m.max(w.growth(x, center)));
        if g.is_nan() {
            T::neg_infinity()
        } else {
            g + grow
        }
    };
    let (lo_mode, hi_mode) = modes.iter().fold((modes[0], modes[0]), |(lo, hi), &m| {
        (if m.0 < lo.0 { m } else { lo }, if m.0 > hi.0 { m } else { hi })
    });
    let extend = |start: T, sigma: T, dir: T| -> Result<T> {
        let mut x = start + dir * tail * sigma;
        let mut step = sigma;
        for _ in 0..2000 {
            if cutoff(x) < gmax - drop {
                return Ok(x);
            }
            x += dir * step;
            step *= T::lit(1.5);
        }
        Err(Error::Numeric(
            "integrand does not decay; window search failed".into(),
        ))
    };
    let lo = extend(lo_mode.0, lo_mode.2, -T::one())?;
    let hi = extend(hi_mode.0, hi_mode.2, T::one())?;

    let width = hi - lo;
    let mut h = (width / T::lit((cfg.initial_nodes - 1) as f64)).min(sigma_min);
    let max_nodes = T::lit(MAX_NODES as f64);
    if width / h > max_nodes {
        h = width / max_nodes;
    }
    let k_lo = ((center - lo) / h).ceil().to_usize().unwrap_or(0);
    let k_hi = ((hi - center) / h).ceil().to_usize().unwrap_or(0);

    // Per-weight shifts from the level-0 nodes.
    let nw = weights.len();
    let reach0 = k_lo.max(k_hi);
    let mut shift = vec![T::neg_infinity(); nw];
    for k in -(k_lo as i64)..=(k_hi as i64) {
        let x = center + T::lit(k as f64) * h;
        let g = f.eval(x).0;
        if g.is_nan() {
            continue;
        }
        for (j, w) in weights.iter().enumerate() {
            shift[j] = shift[j].max(g + w.log_abs(x, center).0);
        }
    }
    for s in shift.iter_mut() {
        if !s.is_finite() {
            *s = gmax;
        }
    }

    // Signed and absolute sums over the pair {c + kh, c − kh}, so that odd
    // moments of symmetric integrands cancel exactly.
    let pair_sum = |xs: &[T]| -> Vec<(T, T)> {
        let mut out = vec![(T::zero(), T::zero()); nw];
        for &x in xs {
            let g = f.eval(x).0;
            if g.is_nan() || g == T::neg_infinity() {
                continue;
            }
            for (j, w) in weights.iter().enumerate() {
                let (lw, sg) = w.log_abs(x, center);
                if sg == 0 {
                    continue;
                }
                let v = (g + lw - shift[j]).exp();
                out[j].0 += if sg > 0 { v } else { -v };
                out[j].1 += v;
            }
        }
        out
    };
    let add_into = |acc: &mut Vec<(T, T)>, part: Vec<(T, T)>| {
        for (a, p) in acc.iter_mut().zip(part) {
            a.0 += p.0;
            a.1 += p.1;
        }
    };

    let mut level = pair_sum(&[center]);
    for k in 1..=reach0 {
        let off = T::lit(k as f64) * h;
        let mut xs = Vec::with_capacity(2);
        if k <= k_hi {
            xs.push(center + off);
        }
        if k <= k_lo {
            xs.push(center - off);
        }
        add_into(&mut level, pair_sum(&xs));
    }
    for v in level.iter_mut() {
        v.0 *= h;
        v.1 *= h;
    }

    let mut k_lo = k_lo;
    let mut k_hi = k_hi;
    let mut previous = level.clone();
    for _ in 0..cfg.max_doublings {
        let hh = h / two;
        // New nodes sit at odd multiples of hh.
        let mut new_sum = vec![(T::zero(), T::zero()); nw];
        for k in 0..k_lo.max(k_hi) {
            let off = T::lit((2 * k + 1) as f64) * hh;
            let mut xs = Vec::with_capacity(2);
            if k < k_hi {
                xs.push(center + off);
            }
            if k < k_lo {
                xs.push(center - off);
            }
            add_into(&mut new_sum, pair_sum(&xs));
        }
        let current: Vec<(T, T)> = (0..nw)
            .map(|j| {
                (
                    previous[j].0 / two + new_sum[j].0 * hh,
                    previous[j].1 / two + new_sum[j].1 * hh,
                )
            })
            .collect();
        let converged = (0..nw).all(|j| {
            (current[j].0 - previous[j].0).abs() <= cfg.rel_tol * current[j].1 + cfg.abs_tol
        });
        h = hh;
        k_lo *= 2;
        k_hi *= 2;
        if converged {
            let lc = f.log_const();
            let values = (0..nw)
                .map(|j| {
                    let s = current[j].0;
                    if s == T::zero() {
                        LogValue::zero()
                    } else {
                        LogValue {
                            log_magnitude: s.abs().ln() + shift[j] + lc,
                            sign: if s > T::zero() { 1 } else { -1 },
                        }
                    }
                })
                .collect();
            let raw = (0..nw).map(|j| (current[j].0, shift[j])).collect();
            return Ok(Integrated { center, values, raw });
        }
        previous = current;
        if (k_lo + k_hi) * 2 > MAX_NODES * 4 {
            break;
        }
    }
    let lc = f.log_const();
    let to_log = |s: T| (s.abs().ln() + shift[0] + lc).as_f64();
    Err(Error::QuadratureNonConvergence {
        previous: to_log(previous[0].0),
        last: to_log(level[0].0),
    })
}

/// 𝒜(p, q, r, s, t, u). Accepts u = 0 (pure Gaussian integrand).
pub fn integral_a<T: Real>(p: u32, q: T, r: T, s: T, t: T, u: T, cfg: &QuadConfig<T>) -> Result<LogValue<T>> {
    let f = AIntegrand::new(q, r, s, t, u)?;
    Ok(integrate(&f, &[Weight::Raw(p)], cfg)?.values[0])
}

/// ℬ(p, q, r, s, t, u).
pub fn integral_b<T: Real>(p: u32, q: T, r: T, s: T, t: T, u: T, cfg: &QuadConfig<T>) -> Result<LogValue<T>> {
    let f = BIntegrand::new(q, r, s, t, u)?;
    Ok(integrate(&f, &[Weight::Raw(p)], cfg)?.values[0])
}

/// 𝒞_b(p, q, r) for p ∈ {0, 1, 2}.
pub fn integral_c<T: Real>(kernel: IntegrandKernel, p: u32, q: T, r: T, cfg: &QuadConfig<T>) -> Result<LogValue<T>> {
    if p > 2 {
        return Err(Error::Domain(format!("𝒞 is defined for p ∈ {{0,1,2}}, got {p}")));
    }
    let f = CIntegrand::new(kernel, q, r)?;
    Ok(integrate(&f, &[Weight::Raw(p)], cfg)?.values[0])
}

/// Mean and variance of the density proportional to `exp(g)`, from central
/// moments about the mode on a single node set.
pub(crate) fn mean_var<T: Real, F: LogIntegrand<T> + ?Sized>(f: &F, cfg: &QuadConfig<T>) -> Result<(T, T)> {
    let r = integrate(f, &[Weight::Central(0), Weight::Central(1), Weight::Central(2)], cfg)?;
    let m1 = r.ratio(1, 0);
    let m2 = r.ratio(2, 0);
    let var = m2 - m1 * m1;
    if !(var > T::zero()) || !var.is_finite() {
        return Err(Error::MomentDomain(format!(
            "tilted variance is not positive ({var}); quadrature failure"
        )));
    }
    Ok((r.center + m1, var))
}

/// (𝒞(1,q,r)/𝒞(0,q,r), 𝒞(2,q,r)/𝒞(0,q,r)) from one node set.
pub fn moment_ratios_c<T: Real>(kernel: IntegrandKernel, q: T, r: T, cfg: &QuadConfig<T>) -> Result<(T, T)> {
    let f = CIntegrand::new(kernel, q, r)?;
    let (mean, var) = mean_var(&f, cfg)?;
    Ok((mean, var + mean * mean))
}

/// Under the density ∝ exp(g) of a ℬ integrand: `log E[eˣ] − E[x]` (positive by
/// Jensen) and `log E[eˣ]`, from one node set.
pub(crate) fn b_log_gap<T: Real>(f: &BIntegrand<T>, cfg: &QuadConfig<T>) -> Result<(T, T)> {
    let r = integrate(f, &[Weight::Central(0), Weight::Central(1), Weight::ExpUp], cfg)?;
    let m1 = r.ratio(1, 0);
    let log_e = r.log_ratio(2, 0);
    Ok((log_e - m1, r.center + log_e))
}
