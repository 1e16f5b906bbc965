//! RF-to-DC energy harvesting transfer functions: the parametric sigmoid
//! model, linear and piecewise-linear baselines, and a cubic-spline
//! interpolant of tabulated circuit data. All powers are in watts.

use std::path::Path;

use crate::error::{domain, Error, Result};

/// Saturating sigmoid harvester with maximum output `max_power` (M),
/// steepness `a` (per watt) and turning point `b` (watts).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sigmoid {
    pub max_power: f64,
    pub a: f64,
    pub b: f64,
}

impl Sigmoid {
    pub fn new(max_power: f64, a: f64, b: f64) -> Result<Self> {
        for (name, v) in [("M", max_power), ("a", a), ("b", b)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(domain(format!(
                    "sigmoid parameter {name} must be positive, got {v}"
                )));
            }
        }
        Ok(Self { max_power, a, b })
    }

    /// Ω = 1/(1 + e^{ab}), the logistic value at zero input.
    pub fn omega(&self) -> f64 {
        1.0 / (1.0 + (self.a * self.b).exp())
    }

    /// M (1 - e^{-a p}) / (1 + e^{-a (p - b)}); exactly zero at p = 0.
    pub fn harvested(&self, p_r: f64) -> f64 {
        let num = -(-self.a * p_r).exp_m1();
        self.max_power * num / (1.0 + (-self.a * (p_r - self.b)).exp())
    }

    /// The same curve written as a logistic shifted and rescaled to pass
    /// through the origin.
    pub fn harvested_logistic_form(&self, p_r: f64) -> f64 {
        let omega = self.omega();
        let logistic = self.max_power / (1.0 + (-self.a * (p_r - self.b)).exp());
        (logistic - self.max_power * omega) / (1.0 - omega)
    }

    /// Largest slope dP_EH/dP_R over p_r >= 0, found by golden-section search.
    pub fn max_slope(&self) -> f64 {
        let slope = |p: f64| {
            let h = 1e-4 / self.a;
            (self.harvested(p + h) - self.harvested((p - h).max(0.0))) / (p + h - (p - h).max(0.0))
        };
        let hi = (self.b + 20.0 / self.a).max(40.0 / self.a);
        crate::numerics::maximize_quasiconcave(slope, 0.0, hi, 1e-6 / self.a)
            .map(|m| m.value)
            .unwrap_or_else(|_| slope(0.0))
    }
}

/// Natural cubic spline through measured (p_in, p_out) samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulated {
    p_in: Vec<f64>,
    p_out: Vec<f64>,
    second: Vec<f64>,
}

impl Tabulated {
    pub fn new(samples: &[(f64, f64)]) -> Result<Self> {
        validate_samples(samples)?;
        let p_in: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let p_out: Vec<f64> = samples.iter().map(|s| s.1).collect();
        let second = natural_spline_second_derivatives(&p_in, &p_out);
        Ok(Self {
            p_in,
            p_out,
            second,
        })
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.p_in.iter().copied().zip(self.p_out.iter().copied())
    }

    /// Spline value inside the sample range. Below the first knot the output
    /// ramps linearly from the origin; above the last knot it holds the last
    /// sample. The result is clamped to [0, last p_out] outside the range and
    /// to >= 0 inside it.
    pub fn harvested(&self, p_r: f64) -> f64 {
        let n = self.p_in.len();
        let (first, last) = (self.p_in[0], self.p_in[n - 1]);
        let cap = self.p_out[n - 1];
        if p_r >= last {
            return cap;
        }
        if p_r < first {
            let ramp = if first > 0.0 {
                self.p_out[0] * p_r / first
            } else {
                0.0
            };
            return ramp.clamp(0.0, cap);
        }
        let k = match self.p_in.partition_point(|&x| x <= p_r) {
            0 => 0,
            i => (i - 1).min(n - 2),
        };
        let h = self.p_in[k + 1] - self.p_in[k];
        let a = (self.p_in[k + 1] - p_r) / h;
        let b = 1.0 - a;
        let v = a * self.p_out[k]
            + b * self.p_out[k + 1]
            + ((a * a * a - a) * self.second[k] + (b * b * b - b) * self.second[k + 1]) * h * h
                / 6.0;
        v.max(0.0)
    }
}

fn validate_samples(samples: &[(f64, f64)]) -> Result<()> {
    if samples.len() < 4 {
        return Err(domain(format!(
            "need at least 4 samples, got {}",
            samples.len()
        )));
    }
    for w in samples.windows(2) {
        if !(w[1].0 > w[0].0) {
            return Err(domain(format!(
                "p_in must be strictly increasing ({} then {})",
                w[0].0, w[1].0
            )));
        }
    }
    for &(p_in, p_out) in samples {
        if !p_in.is_finite() || !(p_out >= 0.0) || !p_out.is_finite() {
            return Err(domain(format!("invalid sample ({p_in}, {p_out})")));
        }
    }
    Ok(())
}

fn natural_spline_second_derivatives(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut y2 = vec![0.0; n];
    let mut u = vec![0.0; n];
    for i in 1..n - 1 {
        let sig = (x[i] - x[i - 1]) / (x[i + 1] - x[i - 1]);
        let p = sig * y2[i - 1] + 2.0;
        y2[i] = (sig - 1.0) / p;
        let d = (y[i + 1] - y[i]) / (x[i + 1] - x[i]) - (y[i] - y[i - 1]) / (x[i] - x[i - 1]);
        u[i] = (6.0 * d / (x[i + 1] - x[i - 1]) - sig * u[i - 1]) / p;
    }
    y2[n - 1] = 0.0;
    for k in (0..n - 1).rev() {
        y2[k] = y2[k] * y2[k + 1] + u[k];
    }
    y2
}

/// Harvesting transfer function P_R -> P_EH.
#[derive(Debug, Clone, PartialEq)]
pub enum EhModel {
    NonLinearSigmoid(Sigmoid),
    /// Unbounded, zero-sensitivity conversion η·P_R.
    Linear {
        eta: f64,
    },
    /// min(η·P_R, M).
    PiecewiseLinear {
        eta: f64,
        max_power: f64,
    },
    Tabulated(Tabulated),
}

impl EhModel {
    pub fn linear(eta: f64) -> Result<Self> {
        check_eta(eta)?;
        Ok(EhModel::Linear { eta })
    }

    pub fn piecewise_linear(eta: f64, max_power: f64) -> Result<Self> {
        check_eta(eta)?;
        if !(max_power > 0.0) || !max_power.is_finite() {
            return Err(domain(format!(
                "saturation power must be positive, got {max_power}"
            )));
        }
        Ok(EhModel::PiecewiseLinear { eta, max_power })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            EhModel::NonLinearSigmoid(_) => "sigmoid",
            EhModel::Linear { .. } => "linear",
            EhModel::PiecewiseLinear { .. } => "piecewise",
            EhModel::Tabulated(_) => "tabulated",
        }
    }

    pub fn as_sigmoid(&self) -> Result<&Sigmoid> {
        match self {
            EhModel::NonLinearSigmoid(s) => Ok(s),
            other => Err(Error::ModelMismatch(other.kind())),
        }
    }

    /// Harvested DC power for received RF power `p_r >= 0`.
    pub fn harvested_power(&self, p_r: f64) -> Result<f64> {
        if !(p_r >= 0.0) {
            return Err(domain(format!("received power must be >= 0, got {p_r}")));
        }
        Ok(self.harvested_unchecked(p_r))
    }

    pub(crate) fn harvested_unchecked(&self, p_r: f64) -> f64 {
        match self {
            EhModel::NonLinearSigmoid(s) => s.harvested(p_r),
            EhModel::Linear { eta } => eta * p_r,
            EhModel::PiecewiseLinear { eta, max_power } => (eta * p_r).min(*max_power),
            EhModel::Tabulated(t) => t.harvested(p_r),
        }
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && eta <= 1.0 {
        Ok(())
    } else {
        Err(domain(format!("efficiency must lie in (0, 1], got {eta}")))
    }
}

/// Result of fitting the sigmoid model to data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitReport {
    pub params: Sigmoid,
    /// Root-mean-square residual in watts.
    pub rmse: f64,
    pub iterations: usize,
    pub converged: bool,
}

const FIT_MAX_ITER: usize = 2000;
const FIT_DIAMETER: f64 = 1e-8;

/// Least-squares fit of the sigmoid model by Nelder–Mead on (ln M, ln a, ln b).
///
/// Starts from M = max p_out, b = the input where the data first reaches
/// M/2, a = 4/b. The simplex is restarted around the incumbent after each
/// collapse until a restart no longer moves it; the whole fit shares one
/// budget of 2000 iterations.
pub fn fit_sigmoid(data: &[(f64, f64)]) -> Result<FitReport> {
    validate_samples(data)?;
    let m0 = data.iter().map(|d| d.1).fold(0.0, f64::max);
    if !(m0 > 0.0) {
        return Err(domain("all output samples are zero"));
    }
    let b0 = half_max_input(data, m0);
    let x0 = [m0.ln(), (4.0 / b0).ln(), b0.ln()];

    let sse = |x: &[f64; 3]| -> f64 {
        let model = Sigmoid {
            max_power: x[0].exp(),
            a: x[1].exp(),
            b: x[2].exp(),
        };
        data.iter()
            .map(|&(p, y)| {
                let r = model.harvested(p) - y;
                r * r
            })
            .sum()
    };

    let mut best = x0;
    let mut best_f = sse(&best);
    if !best_f.is_finite() {
        return Err(Error::Fit(
            "objective not finite at the starting point".into(),
        ));
    }
    let mut used = 0;
    let mut converged = false;
    let mut step = 0.5;
    while used < FIT_MAX_ITER {
        let run = nelder_mead(&sse, best, step, FIT_MAX_ITER - used);
        used += run.iterations;
        let moved = run
            .x
            .iter()
            .zip(best.iter())
            .any(|(a, b)| (a - b).abs() > FIT_DIAMETER);
        let improved = run.f < best_f;
        if improved {
            best = run.x;
            best_f = run.f;
        }
        if run.converged && (!moved || !improved) {
            converged = true;
            break;
        }
        if !run.converged {
            break;
        }
        step = 0.05;
    }

    let rmse = (best_f / data.len() as f64).sqrt();
    if !rmse.is_finite() {
        return Err(Error::Fit("residual became non-finite".into()));
    }
    Ok(FitReport {
        params: Sigmoid {
            max_power: best[0].exp(),
            a: best[1].exp(),
            b: best[2].exp(),
        },
        rmse,
        iterations: used,
        converged,
    })
}

fn half_max_input(data: &[(f64, f64)], m0: f64) -> f64 {
    let half = 0.5 * m0;
    for w in data.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if y0 < half && y1 >= half {
            let t = (half - y0) / (y1 - y0);
            return x0 + t * (x1 - x0);
        }
    }
    let positive = data.iter().map(|d| d.0).find(|&x| x > 0.0).unwrap_or(1e-6);
    positive.max(data[data.len() / 2].0)
}

struct NmRun {
    x: [f64; 3],
    f: f64,
    iterations: usize,
    converged: bool,
}

fn nelder_mead<F: Fn(&[f64; 3]) -> f64>(f: &F, start: [f64; 3], step: f64, budget: usize) -> NmRun {
    let eval = |x: &[f64; 3]| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let mut simplex: Vec<([f64; 3], f64)> = Vec::with_capacity(4);
    simplex.push((start, eval(&start)));
    for i in 0..3 {
        let mut x = start;
        x[i] += step;
        simplex.push((x, eval(&x)));
    }

    let mut iterations = 0;
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let diameter = simplex[1..]
            .iter()
            .flat_map(|(x, _)| {
                x.iter()
                    .zip(simplex[0].0.iter())
                    .map(|(a, b)| (a - b).abs())
            })
            .fold(0.0, f64::max);
        if diameter < FIT_DIAMETER {
            return NmRun {
                x: simplex[0].0,
                f: simplex[0].1,
                iterations,
                converged: true,
            };
        }
        if iterations >= budget {
            return NmRun {
                x: simplex[0].0,
                f: simplex[0].1,
                iterations,
                converged: false,
            };
        }
        iterations += 1;

        let mut centroid = [0.0; 3];
        for (x, _) in &simplex[..3] {
            for k in 0..3 {
                centroid[k] += x[k] / 3.0;
            }
        }
        let worst = simplex[3];
        let along = |t: f64| -> [f64; 3] {
            let mut p = [0.0; 3];
            for k in 0..3 {
                p[k] = centroid[k] + t * (worst.0[k] - centroid[k]);
            }
            p
        };

        let xr = along(-1.0);
        let fr = eval(&xr);
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = eval(&xe);
            simplex[3] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[2].1 {
            simplex[3] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let x = along(-0.5);
                (x, eval(&x))
            } else {
                let x = along(0.5);
                (x, eval(&x))
            };
            if fc < worst.1.min(fr) {
                simplex[3] = (xc, fc);
            } else {
                let best = simplex[0].0;
                for v in simplex.iter_mut().skip(1) {
                    for k in 0..3 {
                        v.0[k] = best[k] + 0.5 * (v.0[k] - best[k]);
                    }
                    v.1 = eval(&v.0);
                }
            }
        }
    }
}

/// Parses a two-column (p_in, p_out) text table in microwatts and returns
/// watt-valued pairs. Columns may be separated by commas, semicolons or
/// whitespace; lines starting with '#' are comments and a single non-numeric
/// header line is allowed before the data.
pub fn parse_samples_uw(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    let mut header_seen = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c == ';' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        let parsed: Option<Vec<f64>> = fields.iter().map(|f| f.parse::<f64>().ok()).collect();
        match parsed {
            Some(v) if v.len() == 2 => out.push((v[0] * 1e-6, v[1] * 1e-6)),
            Some(v) => {
                return Err(Error::Parse {
                    line: idx + 1,
                    msg: format!("expected 2 columns, found {}", v.len()),
                })
            }
            None if !header_seen && out.is_empty() => header_seen = true,
            None => {
                return Err(Error::Parse {
                    line: idx + 1,
                    msg: format!("non-numeric data row '{line}'"),
                })
            }
        }
    }
    Ok(out)
}

/// Reads [`parse_samples_uw`] input from a file.
pub fn load_samples_uw(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse {
        line: 0,
        msg: format!("{}: {e}", path.display()),
    })?;
    parse_samples_uw(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn table1() -> Sigmoid {
        Sigmoid::new(9.079e-6, 47_083.0, 2.9e-6).unwrap()
    }

    fn log_grid() -> impl Iterator<Item = f64> {
        (0..=200).map(|i| 10f64.powf(-9.0 + 10.0 * i as f64 / 200.0))
    }

    #[test]
    fn sigmoid_examples() {
        let s = table1();
        assert_eq!(s.harvested(0.0), 0.0);
        let at_b = s.harvested(s.b);
        let ab: f64 = 47_083.0 * 2.9e-6;
        assert!((ab - 0.136_540_7).abs() < 1e-7);
        assert!((at_b - 9.079e-6 * (1.0 - (-ab).exp()) / 2.0).abs() < 1e-20);
        assert!((at_b - 0.5794e-6).abs() < 0.0001e-6, "{at_b}");
        assert!((s.harvested(1.0) / 9.079e-6 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn linear_and_piecewise_examples() {
        let lin = EhModel::linear(0.5).unwrap();
        assert!((lin.harvested_power(4e-6).unwrap() - 2e-6).abs() < 1e-21);
        assert!(EhModel::linear(0.0).is_err());
        assert!(EhModel::linear(1.2).is_err());

        let pw = EhModel::piecewise_linear(0.4, 5e-6).unwrap();
        for p in log_grid() {
            let v = pw.harvested_power(p).unwrap();
            if p < 5e-6 / 0.4 {
                assert_eq!(v, 0.4 * p);
            } else {
                assert_eq!(v, 5e-6);
            }
        }
    }

    #[test]
    fn negative_input_rejected() {
        let m = EhModel::NonLinearSigmoid(table1());
        assert!(m.harvested_power(-1e-9).is_err());
    }

    #[test]
    fn sigmoid_strictly_increasing_and_bounded() {
        let s = table1();
        let mut prev = 0.0;
        for p in log_grid() {
            let v = s.harvested(p);
            assert!(v <= s.max_power);
            if p < 1e-3 {
                assert!(v > prev, "not increasing at {p}");
            } else {
                // Saturated to M in floating point.
                assert!(v >= prev);
            }
            prev = v;
        }
    }

    #[test]
    fn algebraic_forms_agree() {
        // The logistic form subtracts M·Ω from a nearby value, so its own
        // rounding is a few ulps of M.
        let s = table1();
        for p in log_grid() {
            let (a, b) = (s.harvested(p), s.harvested_logistic_form(p));
            assert!(
                (a - b).abs() <= 1e-12 * a.abs() + 8.0 * f64::EPSILON * s.max_power,
                "{p}: {a} vs {b}"
            );
        }
        for p in (1..=100).map(|i| i as f64 * 1e-6) {
            let (a, b) = (s.harvested(p), s.harvested_logistic_form(p));
            assert!(((a - b) / a).abs() < 1e-12, "{p}");
        }
    }

    #[test]
    fn max_slope_matches_dense_scan() {
        let s = table1();
        let slope = s.max_slope();
        let h = 1e-9;
        let scan = (0..20_000)
            .map(|i| i as f64 * 1e-8)
            .map(|p| (s.harvested(p + h) - s.harvested(p)) / h)
            .fold(0.0, f64::max);
        assert!((slope / scan - 1.0).abs() < 1e-3, "{slope} vs {scan}");
    }

    fn samples() -> Vec<(f64, f64)> {
        parse_samples_uw(include_str!("../../../data/eh_circuit_illustrative.csv")).unwrap()
    }

    #[test]
    fn tabulated_hits_knots_and_clamps() {
        let data = samples();
        let t = Tabulated::new(&data).unwrap();
        for &(x, y) in &data {
            assert_eq!(t.harvested(x), y);
        }
        let last = data.last().unwrap().1;
        assert_eq!(t.harvested(1.0), last);
        assert_eq!(t.harvested(0.0), 0.0);
        for p in log_grid() {
            let v = t.harvested(p);
            assert!(v >= 0.0);
            if p > data.last().unwrap().0 {
                assert!(v <= last);
            }
        }
    }

    #[test]
    fn tabulated_reproduces_cubic_between_knots() {
        // A natural spline through a straight line is the line itself.
        let line: Vec<(f64, f64)> = (0..6).map(|i| (i as f64, 2.0 * i as f64 + 1.0)).collect();
        let t = Tabulated::new(&line).unwrap();
        for i in 0..50 {
            let x = i as f64 * 0.1;
            assert!((t.harvested(x) - (2.0 * x + 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn tabulated_rejects_bad_samples() {
        assert!(Tabulated::new(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)]).is_err());
        assert!(Tabulated::new(&[(0.0, 0.0), (1.0, 1.0), (1.0, 2.0), (3.0, 2.0)]).is_err());
        assert!(Tabulated::new(&[(0.0, 0.0), (1.0, -1.0), (2.0, 2.0), (3.0, 2.0)]).is_err());
    }

    #[test]
    fn parse_handles_header_comments_and_separators() {
        let text = "# comment\np_in_uW p_out_uW\n1 2\n3;4\n\n5,6\n";
        let v = parse_samples_uw(text).unwrap();
        assert_eq!(v.len(), 3);
        assert!((v[1].0 - 3e-6).abs() < 1e-20 && (v[2].1 - 6e-6).abs() < 1e-20);
        assert!(parse_samples_uw("1,2\nfoo,bar\n").is_err());
        assert!(parse_samples_uw("1,2,3\n").is_err());
    }

    fn synth(s: &Sigmoid) -> Vec<(f64, f64)> {
        (0..20)
            .map(|i| {
                let p = 20e-6 * i as f64 / 19.0;
                (p, s.harvested(p))
            })
            .collect()
    }

    #[test]
    fn fit_recovers_noiseless_parameters() {
        let truth = table1();
        let r = fit_sigmoid(&synth(&truth)).unwrap();
        let rel = |a: f64, b: f64| (a / b - 1.0).abs();
        assert!(rel(r.params.max_power, truth.max_power) < 5e-3, "{r:?}");
        assert!(rel(r.params.a, truth.a) < 5e-3, "{r:?}");
        assert!(rel(r.params.b, truth.b) < 5e-3, "{r:?}");
        assert!(r.converged);
    }

    #[test]
    fn fit_with_noise_has_small_residual() {
        let truth = table1();
        let clean = synth(&truth);
        let mut worst: f64 = 0.0;
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let noisy: Vec<(f64, f64)> = clean
                .iter()
                .map(|&(p, y)| {
                    let z = standard_normal(&mut rng);
                    (p, (y * (1.0 + 0.01 * z)).max(0.0))
                })
                .collect();
            let r = fit_sigmoid(&noisy).unwrap();
            worst = worst.max(r.rmse);
        }
        assert!(worst <= 0.02 * truth.max_power, "worst rmse {worst}");
    }

    fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
        use rand::Rng;
        let u1: f64 = 1.0 - rng.gen::<f64>();
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    #[test]
    fn fit_needs_four_points() {
        assert!(matches!(
            fit_sigmoid(&[(0.0, 0.0), (1e-6, 1e-7), (2e-6, 3e-7)]),
            Err(Error::Domain(_))
        ));
    }
}
