use crate::error::{domain, Error, Result};

/// Highest derivative order the stencil tables are trusted for.
pub const MAX_DIFF_ORDER: usize = 12;

const AGREEMENT: f64 = 1e-9;

/// Parameters of a Richardson-extrapolated central-difference derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffSpec {
    pub order: usize,
    pub point: f64,
    /// Initial step; the widest stencil reaches `point ± order * h0 / 2`.
    pub h0: f64,
    /// Number of step halvings (tableau rows).
    pub levels: usize,
}

impl DiffSpec {
    /// Default schedule: `h0 = 1e-2 * max(1, |point|)`, six levels.
    pub fn new(order: usize, point: f64) -> Self {
        Self {
            order,
            point,
            h0: 1e-2 * point.abs().max(1.0),
            levels: 6,
        }
    }

    pub fn with_step(mut self, h0: f64) -> Self {
        self.h0 = h0;
        self
    }

    pub fn with_levels(mut self, levels: usize) -> Self {
        self.levels = levels;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.order > MAX_DIFF_ORDER {
            return Err(domain(format!(
                "derivative order {} exceeds {MAX_DIFF_ORDER}",
                self.order
            )));
        }
        if !(self.h0 > 0.0 && self.h0.is_finite()) || !self.point.is_finite() {
            return Err(domain("step and point must be finite, step positive"));
        }
        if self.levels < 2 {
            return Err(domain("need at least two extrapolation levels"));
        }
        Ok(())
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// n-th central difference quotient with step h; error expands in h², h⁴, ...
fn central_difference<F: Fn(f64) -> f64>(f: &F, order: usize, x: f64, h: f64) -> f64 {
    let half = order as f64 / 2.0;
    let mut acc = 0.0;
    for j in 0..=order {
        let w = binomial(order, j) * if j % 2 == 0 { 1.0 } else { -1.0 };
        acc += w * f(x + (half - j as f64) * h);
    }
    acc / h.powi(order as i32)
}

/// Diagonal of the Richardson tableau, one entry per level. Entry `i` has
/// eliminated the first `i` even powers of the step.
pub fn richardson_diagonal<F: Fn(f64) -> f64>(f: F, spec: DiffSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    if spec.order == 0 {
        return Ok(vec![f(spec.point)]);
    }
    let mut prev: Vec<f64> = Vec::with_capacity(spec.levels);
    let mut diag = Vec::with_capacity(spec.levels);
    let mut h = spec.h0;
    for _ in 0..spec.levels {
        let mut row = Vec::with_capacity(prev.len() + 1);
        row.push(central_difference(&f, spec.order, spec.point, h));
        let mut factor = 1.0;
        for j in 0..prev.len() {
            factor *= 4.0;
            let last = row[j];
            row.push(last + (last - prev[j]) / (factor - 1.0));
        }
        diag.push(*row.last().unwrap());
        prev = row;
        h *= 0.5;
    }
    Ok(diag)
}

/// Derivative of order `spec.order` at `spec.point`.
///
/// Builds the Richardson tableau over successive step halvings, keeping the
/// entry whose distance to its two parents is smallest (Ridders' error
/// estimate). Stops early once two successive diagonal extrapolants agree to
/// 1e-9 relative, or when the diagonal starts drifting away from the best
/// estimate because rounding noise dominates the smaller steps. If the best
/// error estimate still exceeds 1e-3 of the value the extrapolants never
/// settled and [`Error::Unstable`] is returned.
pub fn richardson_derivative<F: Fn(f64) -> f64>(f: F, spec: DiffSpec) -> Result<f64> {
    richardson_estimate(f, spec).map(|(value, _)| value)
}

/// Like [`richardson_derivative`] but also returns the error estimate.
pub fn richardson_estimate<F: Fn(f64) -> f64>(f: F, spec: DiffSpec) -> Result<(f64, f64)> {
    spec.validate()?;
    if spec.order == 0 {
        return Ok((f(spec.point), 0.0));
    }

    let mut prev: Vec<f64> = Vec::with_capacity(spec.levels);
    let mut best = f64::NAN;
    let mut best_err = f64::INFINITY;
    let mut h = spec.h0;

    for i in 0..spec.levels {
        let mut row = Vec::with_capacity(i + 1);
        row.push(central_difference(&f, spec.order, spec.point, h));
        if !row[0].is_finite() {
            return Err(domain("function not finite on the stencil"));
        }
        let mut factor = 1.0;
        for j in 1..=i {
            factor *= 4.0;
            let t = row[j - 1] + (row[j - 1] - prev[j - 1]) / (factor - 1.0);
            let err = (t - row[j - 1]).abs().max((t - prev[j - 1]).abs());
            if err <= best_err {
                best_err = err;
                best = t;
            }
            row.push(t);
        }
        if i > 0 {
            let diag_step = (row[i] - prev[i - 1]).abs();
            if diag_step <= AGREEMENT * row[i].abs() {
                return Ok((row[i], diag_step));
            }
            if diag_step >= 2.0 * best_err {
                break;
            }
        }
        prev = row;
        h *= 0.5;
    }

    if !(best_err <= 1e-3 * best.abs()) {
        return Err(Error::Unstable {
            order: spec.order,
            spread: best_err,
        });
    }
    Ok((best, best_err))
}
