//! Azzalini–Capitanio skew-t distribution.
//!
//! With `z = (y - mu) / sigma` the density is
//!
//! ```text
//! f(y) = (2 / sigma) t_nu(z) T_{nu+1}( alpha z sqrt((nu + 1) / (nu + z^2)) )
//! ```
//!
//! where `t_nu` and `T_{nu+1}` are the Student-t density and CDF. The CDF
//! has no closed form for real `nu` and is integrated numerically. Both
//! tails decay like `|z|^(-nu-1)`, so the infinite tail integrals are mapped
//! onto (0, 1] with `z = a w^(-p)`, which turns the power-law decay into a
//! bounded integrand.

use std::f64::consts::PI;

use statrs::function::{erf::erfc_inv, gamma::ln_gamma};

use crate::data::TailSide;
use crate::error::{invalid, GarError, Result};
use crate::numeric::{integrate, Tolerance};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewTParams {
    pub mu: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub nu: f64,
}

impl SkewTParams {
    pub fn new(mu: f64, sigma: f64, alpha: f64, nu: f64) -> Result<Self> {
        let p = Self {
            mu,
            sigma,
            alpha,
            nu,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn standard(alpha: f64, nu: f64) -> Result<Self> {
        Self::new(0.0, 1.0, alpha, nu)
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.mu, self.sigma, self.alpha, self.nu].iter().all(|v| v.is_finite()) {
            return Err(invalid("skew-t parameters", format!("must be finite, got {self:?}")));
        }
        if !(self.sigma > 0.0) {
            return Err(invalid("sigma", format!("must be positive, got {}", self.sigma)));
        }
        if !(self.nu > 0.0) {
            return Err(invalid("nu", format!("must be positive, got {}", self.nu)));
        }
        Ok(())
    }
}

/// Student-t CDF for a fixed number of degrees of freedom, through the
/// regularised incomplete beta function `I_x(n/2, 1/2)` with its log-beta
/// constant computed once. The skew factor of the density evaluates this
/// at every quadrature node.
#[derive(Debug, Clone)]
struct StudentCdf {
    n: f64,
    a: f64,
    ln_beta: f64,
}

impl StudentCdf {
    const B: f64 = 0.5;

    fn new(n: f64) -> Self {
        let a = 0.5 * n;
        Self {
            n,
            a,
            ln_beta: ln_gamma(a) + ln_gamma(Self::B) - ln_gamma(a + Self::B),
        }
    }

    fn cdf(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 0.5;
        }
        let t2 = t * t;
        // x = n / (n + t^2) and 1 - x, each without cancellation.
        let x = self.n / (self.n + t2);
        let y = t2 / (self.n + t2);
        let tail = 0.5 * self.incomplete_beta(x, y);
        if t < 0.0 {
            tail
        } else {
            1.0 - tail
        }
    }

    /// `I_x(a, 1/2)` with `y = 1 - x`.
    fn incomplete_beta(&self, x: f64, y: f64) -> f64 {
        let (a, b) = (self.a, Self::B);
        if x <= 0.0 {
            return 0.0;
        }
        if y <= 0.0 {
            return 1.0;
        }
        let front = (a * x.ln() + b * y.ln() - self.ln_beta).exp();
        if x < (a + 1.0) / (a + b + 2.0) {
            front * beta_continued_fraction(a, b, x) / a
        } else {
            1.0 - front * beta_continued_fraction(b, a, y) / b
        }
    }
}

/// Modified Lentz evaluation of the incomplete-beta continued fraction.
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=300 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// A skew-t distribution with its normalising constants precomputed.
#[derive(Debug, Clone)]
pub struct SkewT {
    params: SkewTParams,
    /// `log` of the Student-t(nu) density constant.
    log_t_norm: f64,
    /// `P(Z <= 0) = 1/2 - atan(alpha)/pi`.
    f0: f64,
    skew_cdf: StudentCdf,
}

const QUANTILE_MAX_ITER: usize = 200;

impl SkewT {
    pub fn new(params: SkewTParams) -> Result<Self> {
        params.validate()?;
        let nu = params.nu;
        let log_t_norm = ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * PI).ln();
        Ok(Self {
            params,
            log_t_norm,
            f0: 0.5 - params.alpha.atan() / PI,
            skew_cdf: StudentCdf::new(nu + 1.0),
        })
    }

    pub fn params(&self) -> SkewTParams {
        self.params
    }

    /// `log f(z)` of the standardised distribution.
    fn ln_std_pdf(&self, z: f64) -> f64 {
        let SkewTParams { alpha, nu, .. } = self.params;
        let ln_t = self.log_t_norm - 0.5 * (nu + 1.0) * (z * z / nu).ln_1p();
        let skew = if alpha == 0.0 {
            0.5
        } else {
            self.skew_cdf.cdf(alpha * z * ((nu + 1.0) / (nu + z * z)).sqrt())
        };
        std::f64::consts::LN_2 + ln_t + skew.ln()
    }

    fn std_pdf(&self, z: f64) -> f64 {
        self.ln_std_pdf(z).exp()
    }

    /// `int f(z) dz` over `(-inf, a]` for `a < 0`, or `[a, inf)` for `a > 0`,
    /// optionally weighted by `z`.
    fn std_tail_integral(&self, a: f64, first_moment: bool) -> Result<f64> {
        let nu = self.params.nu;
        let decay = if first_moment { nu - 1.0 } else { nu };
        let p = 1.0 / decay.min(1.0);
        let ln_scale = (p * a.abs()).ln();
        let integrand = |w: f64| {
            let z = a * w.powf(-p);
            let v = (self.ln_std_pdf(z) + ln_scale - (p + 1.0) * w.ln()).exp();
            if first_moment {
                v * z
            } else {
                v
            }
        };
        integrate(integrand, 0.0, 1.0, Tolerance::default())
    }

    fn std_span(&self, a: f64, b: f64) -> Result<f64> {
        integrate(|z| self.std_pdf(z), a, b, Tolerance::default())
    }

    /// `P(Z <= z)` for the standardised variable.
    fn std_lower(&self, z: f64) -> Result<f64> {
        if z <= -1.0 {
            self.std_tail_integral(z, false)
        } else if z < 1.0 {
            Ok((self.f0 + self.std_span(0.0, z)?).clamp(0.0, 1.0))
        } else {
            Ok((1.0 - self.std_tail_integral(z, false)?).clamp(0.0, 1.0))
        }
    }

    /// `P(Z > z)` for the standardised variable.
    fn std_upper(&self, z: f64) -> Result<f64> {
        if z >= 1.0 {
            self.std_tail_integral(z, false)
        } else if z > -1.0 {
            Ok((1.0 - self.f0 - self.std_span(0.0, z)?).clamp(0.0, 1.0))
        } else {
            Ok((1.0 - self.std_tail_integral(z, false)?).clamp(0.0, 1.0))
        }
    }

    fn standardise(&self, y: f64) -> f64 {
        (y - self.params.mu) / self.params.sigma
    }

    pub fn pdf(&self, y: f64) -> f64 {
        self.std_pdf(self.standardise(y)) / self.params.sigma
    }

    pub fn cdf(&self, y: f64) -> Result<f64> {
        self.std_lower(self.standardise(y))
    }

    /// Survival function `P(Y > y)`, accurate deep in the upper tail.
    pub fn sf(&self, y: f64) -> Result<f64> {
        self.std_upper(self.standardise(y))
    }

    pub fn quantile(&self, tau: f64) -> Result<f64> {
        Ok(self.params.mu + self.params.sigma * self.std_quantile(tau)?)
    }

    /// Quantiles at several levels. Each solve after the first starts from
    /// the previous solution, which is cheap when `taus` is sorted.
    pub fn quantiles(&self, taus: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(taus.len());
        let mut warm: Option<(f64, f64)> = None;
        for &tau in taus {
            let (z, lower) = self.std_quantile_from(tau, warm)?;
            warm = Some((z, lower));
            out.push(self.params.mu + self.params.sigma * z);
        }
        Ok(out)
    }

    /// Standardised quantile. Below the median this solves
    /// `log P(Z <= z) = log tau`, above it `log P(Z > z) = log(1 - tau)`, by
    /// Newton steps kept inside a shrinking bracket. The tail probability is
    /// carried along and updated by integrating the density over each step.
    pub(crate) fn std_quantile(&self, tau: f64) -> Result<f64> {
        Ok(self.std_quantile_from(tau, None)?.0)
    }

    /// Standardised quantile and `P(Z <= z)` there, optionally starting from
    /// a point `(z, P(Z <= z))` whose probability is known.
    fn std_quantile_from(&self, tau: f64, warm: Option<(f64, f64)>) -> Result<(f64, f64)> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(invalid("tau", format!("must lie in (0, 1), got {tau}")));
        }
        let lower_mode = tau <= 0.5;
        let target = if lower_mode { tau } else { 1.0 - tau };
        let ln_target = target.ln();
        // +1 when the tracked tail probability grows with z.
        let dir = if lower_mode { 1.0 } else { -1.0 };
        let fresh = |z: f64| if lower_mode { self.std_lower(z) } else { self.std_upper(z) };
        // Maps the tracked tail probability to P(Z <= z) and back.
        let flip = |p: f64| if lower_mode { p } else { 1.0 - p };

        let (mut z, mut p) = match warm {
            // Converting between the two tails loses precision only when the
            // tracked side is tiny.
            Some((z, lower)) if flip(lower).min(1.0 - flip(lower)) > 1e-3 => (z, flip(lower)),
            _ => {
                let z = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * tau);
                (z, fresh(z)?)
            }
        };
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for _ in 0..QUANTILE_MAX_ITER {
            if (p - target).abs() <= 1e-12 + 1e-10 * target {
                return Ok((z, flip(p)));
            }
            let g = p.ln() - ln_target;
            // g > 0 means too much mass on the tracked side.
            if (g > 0.0) == (dir > 0.0) {
                hi = z;
            } else {
                lo = z;
            }
            if hi - lo <= 1e-14 * (1.0 + z.abs()) {
                return Ok((z, flip(p)));
            }
            let slope = dir * self.std_pdf(z) / p;
            // Far from the root the log-space step can be enormous; cap it
            // and let the bracket take over.
            let reach = 1.0 + z.abs();
            let mut next = z + (-g / slope).clamp(-reach, reach);
            if !(next > lo && next < hi && next.is_finite()) {
                next = match (lo.is_finite(), hi.is_finite()) {
                    (true, true) => 0.5 * (lo + hi),
                    (true, false) => z + (1.0 + z.abs()),
                    (false, true) => z - (1.0 + z.abs()),
                    (false, false) => unreachable!("one side of the bracket is set every step"),
                };
            }
            // Adaptive quadrature over a long span can step over a narrow
            // peak, so only short moves are integrated incrementally.
            p = if (next - z).abs() <= 1.0 {
                let updated = p + dir * self.std_span(z, next)?;
                if updated > 0.5 * p && updated < 1.0 {
                    updated
                } else {
                    fresh(next)?
                }
            } else {
                fresh(next)?
            };
            z = next;
        }
        Err(GarError::NonConvergence {
            solver: "skew-t quantile",
            iterations: QUANTILE_MAX_ITER,
            residual: (p - target).abs(),
        })
    }

    /// Mean of `Y` beyond its `pi` quantile (lower tail) or its `1 - pi`
    /// quantile (upper tail).
    pub fn expected_tail(&self, pi: f64, side: TailSide) -> Result<f64> {
        if !(pi > 0.0 && pi < 0.5) {
            return Err(invalid("pi", format!("must lie in (0, 0.5), got {pi}")));
        }
        if !(self.params.nu > 1.0) {
            return Err(GarError::InfiniteTailExpectation(self.params.nu));
        }
        let moment = match side {
            TailSide::Lower => {
                let q = self.std_quantile(pi)?;
                let a = q.min(-1.0);
                self.std_tail_integral(a, true)? + self.std_first_moment_span(a, q)?
            }
            TailSide::Upper => {
                let q = self.std_quantile(1.0 - pi)?;
                let a = q.max(1.0);
                self.std_tail_integral(a, true)? + self.std_first_moment_span(q, a)?
            }
        };
        Ok(self.params.mu + self.params.sigma * moment / pi)
    }

    fn std_first_moment_span(&self, a: f64, b: f64) -> Result<f64> {
        integrate(|z| z * self.std_pdf(z), a, b, Tolerance::default())
    }
}

pub fn skewt_pdf(theta: &SkewTParams, y: f64) -> Result<f64> {
    Ok(SkewT::new(*theta)?.pdf(y))
}

pub fn skewt_cdf(theta: &SkewTParams, y: f64) -> Result<f64> {
    SkewT::new(*theta)?.cdf(y)
}

pub fn skewt_quantile(theta: &SkewTParams, tau: f64) -> Result<f64> {
    SkewT::new(*theta)?.quantile(tau)
}

/// Expected shortfall (`Lower`) or longrise (`Upper`) at tail probability
/// `pi`.
pub fn skewt_expected_tail(theta: &SkewTParams, pi: f64, side: TailSide) -> Result<f64> {
    SkewT::new(*theta)?.expected_tail(pi, side)
}
