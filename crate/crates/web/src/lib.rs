//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every exported function takes plain numbers and returns a flat
//! `Vec<f64>` (a `Float64Array` on the JS side). Invalid input yields a JS
//! exception carrying the error message.

use wasm_bindgen::prelude::*;

use wpc_core::analysis::{
    optimal_rate_asymptotic, optimal_tau_asymptotic, outage_asymptotic, outage_quadrature,
    throughput_asymptotic, SystemParams, QUAD_REL_TOL,
};
use wpc_core::ehmodel::EhModel;
use wpc_core::scenario::{dbm_to_watts, Scenario};

fn params(
    pt_dbm: f64,
    m: u32,
    n1: u32,
    n2: u32,
    tau: f64,
    rate: f64,
) -> Result<SystemParams, String> {
    Scenario {
        pt_w: dbm_to_watts(pt_dbm),
        m1: m,
        n1,
        m2: m,
        n2,
        tau,
        rate,
        ..Scenario::default()
    }
    .system_params()
    .map_err(|e| e.to_string())
}

fn linspace(start: f64, stop: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..points)
            .map(|i| start + (stop - start) * i as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// Rows of `[pt_dbm, outage_quadrature, outage_floor]`.
pub fn outage_curve_native(
    start_dbm: f64,
    stop_dbm: f64,
    points: usize,
    m: u32,
    n1: u32,
    n2: u32,
    rate: f64,
) -> Result<Vec<f64>, String> {
    let mut out = Vec::with_capacity(3 * points);
    for x in linspace(start_dbm, stop_dbm, points) {
        let p = params(x, m, n1, n2, 0.5, rate)?;
        let q = outage_quadrature(&p, QUAD_REL_TOL).map_err(|e| e.to_string())?;
        let a = outage_asymptotic(&p).map_err(|e| e.to_string())?;
        out.extend([x, q.value, a.value]);
    }
    Ok(out)
}

/// `[r_opt, th_opt, tau_opt, th_tau_opt]` followed by rows of
/// `[rate, throughput]` for the saturated-harvester throughput.
pub fn throughput_curve_native(
    m: u32,
    n2: u32,
    tau: f64,
    rate_max: f64,
    points: usize,
) -> Result<Vec<f64>, String> {
    let p = params(60.0, m, 1, n2, tau, 1.0)?;
    let (r_opt, th_r) = optimal_rate_asymptotic(&p).map_err(|e| e.to_string())?;
    let (t_opt, th_t) = optimal_tau_asymptotic(&p.with_rate(r_opt)).map_err(|e| e.to_string())?;
    let mut out = vec![r_opt, th_r, t_opt, th_t];
    for r in linspace(rate_max / points.max(1) as f64, rate_max, points) {
        let th = throughput_asymptotic(&p.with_rate(r)).map_err(|e| e.to_string())?;
        out.extend([r, th]);
    }
    Ok(out)
}

/// Rows of `[p_in_w, sigmoid_w, linear_w, piecewise_w]`.
pub fn eh_curves_native(max_input_uw: f64, points: usize) -> Result<Vec<f64>, String> {
    let s = Scenario::default();
    let eta = s.eta();
    let sigmoid = s.eh_model().map_err(|e| e.to_string())?;
    let linear = EhModel::linear(eta).map_err(|e| e.to_string())?;
    let piecewise =
        EhModel::piecewise_linear(eta, s.sigmoid.max_power).map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity(4 * points);
    for p in linspace(0.0, max_input_uw * 1e-6, points) {
        out.push(p);
        for model in [&sigmoid, &linear, &piecewise] {
            out.push(model.harvested_power(p).map_err(|e| e.to_string())?);
        }
    }
    Ok(out)
}

#[wasm_bindgen]
pub fn outage_curve(
    start_dbm: f64,
    stop_dbm: f64,
    points: usize,
    m: u32,
    n1: u32,
    n2: u32,
    rate: f64,
) -> Result<Vec<f64>, JsError> {
    outage_curve_native(start_dbm, stop_dbm, points, m, n1, n2, rate).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn throughput_curve(
    m: u32,
    n2: u32,
    tau: f64,
    rate_max: f64,
    points: usize,
) -> Result<Vec<f64>, JsError> {
    throughput_curve_native(m, n2, tau, rate_max, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn eh_curves(max_input_uw: f64, points: usize) -> Result<Vec<f64>, JsError> {
    eh_curves_native(max_input_uw, points).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outage_curve_decreases_to_floor() {
        let v = outage_curve_native(-10.0, 50.0, 7, 2, 1, 1, 5.0).unwrap();
        assert_eq!(v.len(), 21);
        let rows: Vec<&[f64]> = v.chunks(3).collect();
        assert_eq!(rows[0][0], -10.0);
        assert!(rows.windows(2).all(|w| w[1][1] <= w[0][1]));
        assert!(rows.iter().all(|r| r[1] >= r[2] - 1e-12));
        let last = rows.last().unwrap();
        assert!(last[1] - last[2] < 1e-3);
    }

    #[test]
    fn throughput_curve_peaks_at_reported_optimum() {
        let v = throughput_curve_native(2, 1, 0.5, 16.0, 64).unwrap();
        let (r_opt, th_opt) = (v[0], v[1]);
        assert!(v[4..].chunks(2).all(|r| r[1] <= th_opt + 1e-12));
        let best = v[4..]
            .chunks(2)
            .max_by(|a, b| a[1].total_cmp(&b[1]))
            .unwrap();
        assert!((best[0] - r_opt).abs() <= 0.25);
        assert!(v[2] > 0.0 && v[2] < 1.0);
        assert!(v[3] >= th_opt - 1e-9);
    }

    #[test]
    fn eh_curves_are_ordered() {
        let v = eh_curves_native(300.0, 31).unwrap();
        assert_eq!(v.len(), 124);
        for r in v.chunks(4) {
            assert!(r[3] >= r[1] && r[2] >= r[3]);
        }
        assert!((v[v.len() - 4] - 3e-4).abs() < 1e-15);
    }

    #[test]
    fn bad_input_is_an_error() {
        assert!(outage_curve_native(0.0, 10.0, 3, 0, 1, 1, 5.0).is_err());
        assert!(throughput_curve_native(2, 1, 1.5, 10.0, 5).is_err());
    }
}
