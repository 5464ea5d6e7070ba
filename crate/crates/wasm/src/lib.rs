//! Browser bindings for three cdlab reports. Each returns a JSON string.

use cdlab::rkhs::{curvature_closed_form, curvature_profile, szego_power_coeffs, CurvatureMethod};
use cdlab::shifts::{hypercontractivity_report, WeightSequence};
use cdlab::similarity::{boundary_dyadic, commutator_example, linear_radii, DiagonalX};
use cdlab::LabError;
use serde_json::json;
use wasm_bindgen::prelude::*;

fn err(e: LabError) -> String {
    e.to_string()
}

/// Szegő-`power` curvature on `r = 1 − 2^{−k}`, `k_min..=k_max`, next to the closed form.
pub fn curvature_report(power: u32, method: &str, k_min: u32, k_max: u32) -> Result<String, String> {
    let method = match method {
        "series" => CurvatureMethod::Series,
        "closed-form" => CurvatureMethod::ClosedForm,
        "finite-difference" => CurvatureMethod::FiniteDifference,
        other => return Err(format!("unknown method {other:?}")),
    };
    let k = szego_power_coeffs(power).map_err(err)?;
    let radii = boundary_dyadic(k_min, k_max).map_err(err)?;
    let p = curvature_profile(&k, &radii, method, 1e-3).map_err(err)?;
    let closed = radii.iter().map(|&r| curvature_closed_form(&k, r)).collect::<Result<Vec<_>, _>>().map_err(err)?;
    Ok(json!({ "radii": p.radii, "values": p.values, "closed_form": closed, "method": method }).to_string())
}

/// Defect verdicts of a Szegő-`power` shift scaled by `scale`, with the
/// first weight replaced by `first_weight` when it is positive.
pub fn hypercontract_report(power: u32, scale: f64, first_weight: f64, order: usize, n: usize) -> Result<String, String> {
    let mut w = WeightSequence::szego(power).and_then(|w| w.scaled(scale)).map_err(err)?;
    if first_weight > 0.0 {
        w = w.with_weight(0, first_weight).map_err(err)?;
    }
    let rep = hypercontractivity_report(&w, order, n, 1e-10).map_err(err)?;
    Ok(json!({ "passes": rep.passes(), "first_failure": rep.first_failure(), "report": rep }).to_string())
}

/// `det h_T / K²` for the commutator example with `X = diag(entries, 0, …)`.
pub fn commutator_report(entries: Vec<f64>, n: usize, points: usize) -> Result<String, String> {
    let x = DiagonalX::new(entries, 0.0).map_err(err)?;
    let radii = linear_radii(0.05, 0.9, points).map_err(err)?;
    let rep = commutator_example(&x, n, &radii).map_err(err)?;
    Ok(json!({
        "radii": rep.profile.radii,
        "ratio": rep.profile.ratio,
        "upper": 1.0 + rep.x_norm * rep.x_norm,
        "pinch_ok": rep.pinch_ok,
        "closed_form_check": rep.closed_form_check,
    })
    .to_string())
}

#[wasm_bindgen]
pub fn curvature(power: u32, method: &str, k_min: u32, k_max: u32) -> Result<String, JsValue> {
    curvature_report(power, method, k_min, k_max).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn hypercontract(power: u32, scale: f64, first_weight: f64, order: usize, n: usize) -> Result<String, JsValue> {
    hypercontract_report(power, scale, first_weight, order, n).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn commutator(entries: Vec<f64>, n: usize, points: usize) -> Result<String, JsValue> {
    commutator_report(entries, n, points).map_err(|e| JsValue::from_str(&e))
}
