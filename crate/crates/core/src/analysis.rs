//! Outage probability and throughput of the harvest-then-transmit link, by
//! finite-interval quadrature, by the closed-form hypergeometric series, and
//! in the high-power limit, plus the optimal rate and EH time factor for the
//! limiting throughput.

use crate::channel::EffectiveChannel;
use crate::ehmodel::{EhModel, Sigmoid};
use crate::error::{domain, Error, Result};
use crate::numerics::{
    find_root_bracketed, integrate, richardson_estimate, DiffSpec, DEFAULT_ROOT_TOL,
};
use crate::specfun::{gamma_times_hyp_u, ln_gamma, poisson_tail_sum, reg_lower_gamma};

/// Default relative tolerance for [`outage_quadrature`].
pub const QUAD_REL_TOL: f64 = 1e-10;

/// Highest downlink shape m₁N₁ handled by [`outage_series`].
pub const SERIES_MAX_SHAPE: u32 = 10;

/// Largest tolerated ratio between the biggest series term and the result.
pub const SERIES_CANCELLATION_LIMIT: f64 = 1e6;

const CLAMP_SLACK: f64 = 1e-12;
const HYP_U_DIFF_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// Power station transmit power, W.
    pub p_t: f64,
    /// EH time factor τ.
    pub tau: f64,
    /// Target rate R, bits/s/Hz.
    pub rate: f64,
    /// Noise power σ² at the receiver, W.
    pub sigma2: f64,
    /// Power amplifier efficiency θ.
    pub theta: f64,
    pub dl: EffectiveChannel,
    pub ul: EffectiveChannel,
    pub eh: EhModel,
}

impl SystemParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        p_t: f64,
        tau: f64,
        rate: f64,
        sigma2: f64,
        theta: f64,
        dl: EffectiveChannel,
        ul: EffectiveChannel,
        eh: EhModel,
    ) -> Result<Self> {
        let p = Self {
            p_t,
            tau,
            rate,
            sigma2,
            theta,
            dl,
            ul,
            eh,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_t > 0.0 && self.p_t.is_finite()) {
            return Err(domain(format!(
                "transmit power must be positive, got {}",
                self.p_t
            )));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(domain(format!("tau must lie in (0, 1), got {}", self.tau)));
        }
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(domain(format!("rate must be positive, got {}", self.rate)));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(domain(format!(
                "noise power must be positive, got {}",
                self.sigma2
            )));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(domain(format!(
                "theta must lie in (0, 1], got {}",
                self.theta
            )));
        }
        Ok(())
    }

    pub fn with_p_t(&self, p_t: f64) -> Self {
        Self {
            p_t,
            ..self.clone()
        }
    }

    pub fn with_rate(&self, rate: f64) -> Self {
        Self {
            rate,
            ..self.clone()
        }
    }

    pub fn with_tau(&self, tau: f64) -> Self {
        Self {
            tau,
            ..self.clone()
        }
    }

    /// SNR threshold 2^R − 1.
    pub fn gamma_thr(&self) -> f64 {
        (self.rate * std::f64::consts::LN_2).exp_m1()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    pub gamma_thr: f64,
    /// Uplink gain needed at full saturation, γ_thr σ²(1−τ)/(θMτ).
    pub c: f64,
    /// λ₁/(a p_t).
    pub c1: f64,
    /// λ₂ c (1 + e^{ab}).
    pub c2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Quadrature,
    Series,
    Asymptotic,
    MonteCarlo,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Quadrature => "quadrature",
            Method::Series => "series",
            Method::Asymptotic => "asymptotic",
            Method::MonteCarlo => "montecarlo",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "quadrature" | "quad" => Ok(Method::Quadrature),
            "series" => Ok(Method::Series),
            "asymptotic" | "asym" => Ok(Method::Asymptotic),
            "montecarlo" | "mc" => Ok(Method::MonteCarlo),
            other => Err(format!("unknown method '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageEstimate {
    pub value: f64,
    pub method: Method,
    pub abs_err: f64,
}

impl OutageEstimate {
    /// Clamps rounding spill of at most 1e-12 into [0, 1]; anything larger is
    /// reported as an internal inconsistency.
    pub fn new(value: f64, method: Method, abs_err: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::Consistency(format!("{method} outage is not finite")));
        }
        let clamped = value.clamp(0.0, 1.0);
        if (clamped - value).abs() > CLAMP_SLACK {
            return Err(Error::Consistency(format!(
                "{method} outage {value:e} outside [0, 1]"
            )));
        }
        Ok(Self {
            value: clamped,
            method,
            abs_err: abs_err.max(0.0),
        })
    }
}

fn sigmoid_of(p: &SystemParams) -> Result<&Sigmoid> {
    p.eh.as_sigmoid()
}

pub fn derived_constants(p: &SystemParams) -> Result<DerivedConstants> {
    let s = sigmoid_of(p)?;
    let gamma_thr = p.gamma_thr();
    let c = gamma_thr * p.sigma2 * (1.0 - p.tau) / (p.theta * s.max_power * p.tau);
    Ok(DerivedConstants {
        gamma_thr,
        c,
        c1: p.dl.rate / (s.a * p.p_t),
        c2: p.ul.rate * c * (1.0 + (s.a * s.b).exp()),
    })
}

/// Uplink threshold in terms of z = a·p_t·v₁: c + c(1+e^{ab})/(e^z − 1).
fn threshold_at(c: f64, e_ab: f64, z: f64) -> f64 {
    if z > 700.0 {
        return c;
    }
    c + c * (1.0 + e_ab) / z.exp_m1()
}

/// Smallest uplink gain v₂ that avoids outage when the downlink gain is `v1`.
pub fn ul_gain_threshold(p: &SystemParams, v1: f64) -> Result<f64> {
    let s = sigmoid_of(p)?;
    if !(v1 > 0.0) {
        return Err(domain(format!("downlink gain must be positive, got {v1}")));
    }
    let k = derived_constants(p)?;
    Ok(threshold_at(k.c, (s.a * s.b).exp(), s.a * p.p_t * v1))
}

/// Break points in z = a·p_t·v₁ where the integrand changes character: the
/// uplink threshold settles over z of order one, and the downlink Gamma law
/// has its bulk near shape/c₁.
fn z_breakpoints(shape: u32, c1: f64) -> Vec<f64> {
    let n = shape as f64;
    let mut z: Vec<f64> = [1e-3, 1e-2, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 40.0]
        .into_iter()
        .chain(
            [0.01, 0.1, 0.5, 1.0, 2.0, 5.0]
                .into_iter()
                .map(|q| q * n / c1),
        )
        .filter(|z| z.is_finite() && *z > 0.0)
        .collect();
    z.sort_by(f64::total_cmp);
    z.dedup();
    z
}

fn integrate_pieces<F: Fn(f64) -> f64>(
    f: F,
    mut knots: Vec<f64>,
    rel_tol: f64,
) -> Result<(f64, f64)> {
    knots.retain(|x| *x > 0.0 && *x < 1.0);
    knots.push(0.0);
    knots.push(1.0);
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let abs_tol = 1e-3 * rel_tol / knots.len() as f64;
    let mut value = 0.0;
    let mut err = 0.0;
    for w in knots.windows(2) {
        let q = integrate(&f, w[0], w[1], rel_tol, abs_tol)?;
        value += q.value;
        err += q.abs_err;
    }
    Ok((value, err))
}

/// Outage probability by adaptive quadrature over the unit interval.
///
/// The success probability is written as an integral over y = 1 − e^{−a p_t v₁}.
/// When c₁ < 1 the density's (1−y)^{c₁−1} endpoint singularity is absorbed by
/// u = (1−y)^{c₁}, leaving (−ln u)^{n−1}/Γ(n) times the uplink tail; otherwise
/// the y form is integrated directly in log space.
pub fn outage_quadrature(p: &SystemParams, rel_tol: f64) -> Result<OutageEstimate> {
    let s = sigmoid_of(p)?;
    p.validate()?;
    let k = derived_constants(p)?;
    let e_ab = (s.a * s.b).exp();
    let n = p.dl.shape;
    let nf = n as f64;
    let lg = ln_gamma(nf)?;
    let ul = p.ul;
    let tail = move |z: f64| poisson_tail_sum(ul.shape, ul.rate * threshold_at(k.c, e_ab, z));
    let zs = z_breakpoints(n, k.c1);

    let (success, err) = if k.c1 < 1.0 {
        let c1 = k.c1;
        let knots = zs.iter().map(|z| (-c1 * z).exp()).collect();
        integrate_pieces(
            move |u: f64| {
                let t = -u.ln();
                let dens = if n == 1 {
                    1.0
                } else {
                    ((nf - 1.0) * t.ln() - lg).exp()
                };
                dens * tail(t / c1)
            },
            knots,
            rel_tol,
        )?
    } else {
        let c1 = k.c1;
        let knots = zs.iter().map(|z| -(-z).exp_m1()).collect();
        integrate_pieces(
            move |y: f64| {
                let z = -(-y).ln_1p();
                let log_dens = nf * c1.ln() - lg + (nf - 1.0) * z.ln() - (c1 - 1.0) * z;
                log_dens.exp() * tail(z)
            },
            knots,
            rel_tol,
        )?
    };
    OutageEstimate::new(1.0 - success, Method::Quadrature, err)
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Richardson start step for the (n−1)-th derivative in s at s = 1. The
/// differentiated function has a pole at s = 0, so the widest stencil stays
/// within 0.4 of the expansion point.
fn series_step(order: usize) -> f64 {
    (0.8 / order.max(1) as f64).min(0.2)
}

/// Outage probability from the closed-form double series in k, l with the
/// (m₁N₁−1)-th s-derivative of Γ(c₁s)·U(c₁s, l, c₂) at s = 1.
///
/// Returns [`Error::Precision`] when the largest term exceeds the result by
/// more than six orders of magnitude; [`outage`] then falls back to
/// quadrature.
pub fn outage_series(p: &SystemParams) -> Result<OutageEstimate> {
    let s = sigmoid_of(p)?;
    p.validate()?;
    let n = p.dl.shape;
    if n > SERIES_MAX_SHAPE {
        return Err(domain(format!(
            "series path supports downlink shape <= {SERIES_MAX_SHAPE}, got {n}; use quadrature"
        )));
    }
    let k = derived_constants(p)?;
    let kmax = p.ul.shape;
    let order = (n - 1) as usize;
    let e_ab = (s.a * s.b).exp();

    let mut derivs = Vec::with_capacity(kmax as usize);
    for l in 0..kmax {
        let f = |sv: f64| match gamma_times_hyp_u(k.c1 * sv, l as f64, k.c2, HYP_U_DIFF_TOL) {
            Ok(r) => r.value,
            Err(_) => f64::NAN,
        };
        let (d, e) = if order == 0 {
            let r = gamma_times_hyp_u(k.c1, l as f64, k.c2, HYP_U_DIFF_TOL)?;
            (r.value, r.abs_err)
        } else {
            richardson_estimate(f, DiffSpec::new(order, 1.0).with_step(series_step(order)))?
        };
        derivs.push((d, e));
    }

    let lam_c = p.ul.rate * k.c;
    let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
    let pref = k.c1 * sign * (-lam_c).exp() / (ln_gamma(n as f64)?).exp();
    let x = lam_c * e_ab;
    let y = 1.0 + 1.0 / e_ab;

    let mut total = 0.0;
    let mut err = 0.0;
    let mut max_term: f64 = 0.0;
    let mut xk_over_fact = 1.0;
    for kk in 0..kmax {
        if kk > 0 {
            xk_over_fact *= x / kk as f64;
        }
        let mut yl = 1.0;
        for l in 0..=kk {
            if l > 0 {
                yl *= y;
            }
            let alt = if (kk - l) % 2 == 0 { 1.0 } else { -1.0 };
            let coef = pref * xk_over_fact * binomial(kk, l) * alt * yl;
            let (d, e) = derivs[l as usize];
            let term = coef * d;
            max_term = max_term.max(term.abs());
            total += term;
            err += (coef * e).abs();
        }
    }
    // A result outside [0, 1] beyond rounding is also lost precision.
    let spill = (1.0 - total).clamp(0.0, 1.0) - (1.0 - total);
    if !total.is_finite()
        || max_term > SERIES_CANCELLATION_LIMIT * total.abs()
        || spill.abs() > CLAMP_SLACK
    {
        return Err(Error::Precision {
            max_term,
            result: total,
        });
    }
    OutageEstimate::new(
        1.0 - total,
        Method::Series,
        err + 4.0 * f64::EPSILON * max_term,
    )
}

/// Series path when it is trustworthy, quadrature otherwise.
pub fn outage(p: &SystemParams) -> Result<OutageEstimate> {
    match outage_series(p) {
        Ok(est) => Ok(est),
        Err(
            Error::Precision { .. }
            | Error::Unstable { .. }
            | Error::Domain(_)
            | Error::Convergence { .. },
        ) if p.eh.as_sigmoid().is_ok() => outage_quadrature(p, QUAD_REL_TOL),
        Err(e) => Err(e),
    }
}

/// High-power outage floor P(m₂N₂, λ₂c); does not depend on the downlink.
pub fn outage_asymptotic(p: &SystemParams) -> Result<OutageEstimate> {
    let k = derived_constants(p)?;
    let v = reg_lower_gamma(p.ul.shape, p.ul.rate * k.c)?;
    OutageEstimate::new(v, Method::Asymptotic, 4.0 * f64::EPSILON)
}

/// R(1−τ)(1−P_out), bits/s/Hz.
pub fn throughput(p: &SystemParams, outage: &OutageEstimate) -> f64 {
    p.rate * (1.0 - p.tau) * (1.0 - outage.value)
}

/// Throughput with the outage floor in place of the finite-power outage.
pub fn throughput_asymptotic(p: &SystemParams) -> Result<f64> {
    Ok(throughput(p, &outage_asymptotic(p)?))
}

/// ln Σ_{k<n} y^k/k! by log-sum-exp.
fn ln_partial_exp(n: u32, ln_y: f64) -> f64 {
    let logs: Vec<f64> = (0..n).map(|k| k as f64 * ln_y - ln_factorial(k)).collect();
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + logs.iter().map(|l| (l - m).exp()).sum::<f64>().ln()
}

fn ln_factorial(k: u32) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

/// ln(2^R − 1) without overflow.
fn ln_gamma_thr(rate: f64) -> f64 {
    let x = rate * std::f64::consts::LN_2;
    if x > 36.0 {
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().ln()
    }
}

/// α = λ₂σ²(1−τ)/(θMτ), the scale turning 2^R − 1 into λ₂c.
pub fn rate_alpha(p: &SystemParams) -> Result<f64> {
    let s = sigmoid_of(p)?;
    Ok(p.ul.rate * p.sigma2 * (1.0 - p.tau) / (p.theta * s.max_power * p.tau))
}

/// β = λ₂σ²(2^R−1)/(θM), the scale turning (1−τ)/τ into λ₂c.
pub fn tau_beta(p: &SystemParams) -> Result<f64> {
    let s = sigmoid_of(p)?;
    Ok(p.ul.rate * p.sigma2 * p.gamma_thr() / (p.theta * s.max_power))
}

/// Stationarity condition of the limiting throughput in R, divided through
/// by (n−1)! e^{−αx} and taken in logs:
/// ln[R ln2 2^R α^n x^{n−1}/Γ(n)] − ln Σ_{k<n} (αx)^k/k!, x = 2^R − 1.
pub fn rate_condition(shape: u32, alpha: f64, rate: f64) -> f64 {
    let n = shape as f64;
    let ln_x = ln_gamma_thr(rate);
    let lhs = rate.ln()
        + std::f64::consts::LN_2.ln()
        + rate * std::f64::consts::LN_2
        + n * alpha.ln()
        + (n - 1.0) * ln_x
        - ln_factorial(shape - 1);
    lhs - ln_partial_exp(shape, alpha.ln() + ln_x)
}

/// Stationarity condition of the limiting throughput in τ, in logs:
/// ln τ + ln Γ(n, y) − n ln y + y, y = β(1−τ)/τ.
pub fn tau_condition(shape: u32, beta: f64, tau: f64) -> f64 {
    let ln_y = beta.ln() + (1.0 - tau).ln() - tau.ln();
    tau.ln() + ln_factorial(shape - 1) + ln_partial_exp(shape, ln_y) - shape as f64 * ln_y
}

const RATE_LO: f64 = 1e-6;
const RATE_HI_LIMIT: f64 = 1024.0;
const TAU_EPS: f64 = 1e-9;

/// Rate maximizing the limiting throughput, and that throughput.
pub fn optimal_rate_asymptotic(p: &SystemParams) -> Result<(f64, f64)> {
    let alpha = rate_alpha(p)?;
    let n = p.ul.shape;
    let g = |r: f64| rate_condition(n, alpha, r);
    let mut hi = 1.0;
    while g(hi) <= 0.0 {
        hi *= 2.0;
        if hi > RATE_HI_LIMIT {
            return Err(Error::Bracket {
                lo: RATE_LO,
                hi,
                g_lo: g(RATE_LO),
                g_hi: g(hi),
            });
        }
    }
    let r = find_root_bracketed(g, RATE_LO, hi, DEFAULT_ROOT_TOL)?;
    Ok((r, throughput_asymptotic(&p.with_rate(r))?))
}

/// EH time factor maximizing the limiting throughput, and that throughput.
pub fn optimal_tau_asymptotic(p: &SystemParams) -> Result<(f64, f64)> {
    let beta = tau_beta(p)?;
    let n = p.ul.shape;
    let tau = find_root_bracketed(
        |t| tau_condition(n, beta, t),
        TAU_EPS,
        1.0 - TAU_EPS,
        DEFAULT_ROOT_TOL,
    )?;
    Ok((tau, throughput_asymptotic(&p.with_tau(tau))?))
}
