use crate::error::{domain, Result};

/// Default argument tolerance for [`maximize_quasiconcave`].
pub const DEFAULT_MAX_TOL: f64 = 1e-6;

const INV_PHI: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum {
    pub arg: f64,
    pub value: f64,
    pub iterations: usize,
}

/// Golden-section search for the maximizer of a strictly quasi-concave
/// function on `[lo, hi]`. Each iteration shrinks the bracket by 1/φ.
pub fn maximize_quasiconcave<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<Maximum> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(domain(format!("invalid interval [{lo}, {hi}]")));
    }
    if !(tol > 0.0) {
        return Err(domain("tolerance must be positive"));
    }
    let eval = |x: f64| {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(domain(format!("objective not finite at {x}")))
        }
    };

    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = eval(x1)?;
    let mut f2 = eval(x2)?;
    let mut iterations = 0;

    while b - a > tol {
        iterations += 1;
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = eval(x2)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = eval(x1)?;
        }
    }

    let arg = 0.5 * (a + b);
    let value = eval(arg)?;
    Ok(Maximum {
        arg,
        value,
        iterations,
    })
}
