//! WebAssembly bindings for the static page in `www/`.
//!
//! Every export returns a JSON string. The `*_json` functions hold the logic
//! so they can be tested natively; the `#[wasm_bindgen]` wrappers only turn
//! errors into JS exceptions.

use mmse_lab::degradedness::{is_degraded, Channel, DEFAULT_FEASIBILITY_TOL};
use mmse_lab::exact::mmse_exact;
use mmse_lab::lab::{builtin_scenarios, find_scenario, geometric_grid, run_scenario};
use mmse_lab::laws;
use mmse_lab::lmmse::lmmse;
use mmse_lab::prob::moments_exact;
use serde_json::json;
use wasm_bindgen::prelude::*;

const TOL: f64 = 0.02;
/// Keeps a single click responsive in the browser.
const MAX_N: u32 = 256;

pub fn scenario_list_json() -> String {
    let items: Vec<_> = builtin_scenarios()
        .iter()
        .map(|s| {
            json!({
                "name": s.name(),
                "description": s.description(),
                "expected": s.expected().kind.to_string(),
            })
        })
        .collect();
    serde_json::Value::Array(items).to_string()
}

/// Runs a built-in scenario on a geometric grid up to `n_stop`.
pub fn scenario_curve_json(name: &str, n_stop: u32, seed: u32) -> Result<String, String> {
    if n_stop == 0 || n_stop > MAX_N {
        return Err(format!("n_stop must be in 1..={MAX_N}"));
    }
    let s = find_scenario(name).map_err(|e| e.to_string())?;
    let report = run_scenario(&s, &geometric_grid(1, n_stop.into()), TOL, seed.into()).map_err(|e| e.to_string())?;
    serde_json::to_string(&report).map_err(|e| e.to_string())
}

/// Decides both directions of degradedness between two binary symmetric channels.
pub fn bsc_garbling_json(p1: f64, p2: f64) -> Result<String, String> {
    let w1 = Channel::bsc(p1).map_err(|e| e.to_string())?;
    let w2 = Channel::bsc(p2).map_err(|e| e.to_string())?;
    let fwd = is_degraded(&w1, &w2, DEFAULT_FEASIBILITY_TOL).map_err(|e| e.to_string())?;
    let rev = is_degraded(&w2, &w1, DEFAULT_FEASIBILITY_TOL).map_err(|e| e.to_string())?;
    Ok(json!({ "forward": fwd, "reverse": rev }).to_string())
}

/// MMSE and LMMSE along the spike-mixture sequence, whose LMMSE jumps at the limit.
pub fn mixture_curves_json(n_stop: u32) -> Result<String, String> {
    if n_stop == 0 || n_stop > 10 * MAX_N {
        return Err(format!("n_stop must be in 1..={}", 10 * MAX_N));
    }
    let mut rows = Vec::with_capacity(n_stop as usize);
    for n in 1..=u64::from(n_stop) {
        let j = laws::spike_measurement(n);
        let m = mmse_exact(&j).map_err(|e| e.to_string())?.mmse;
        rows.push(json!({ "n": n, "mmse": m, "lmmse": lmmse(&moments_exact(&j)).value }));
    }
    let limit = laws::bsc_joint(0.0);
    let limit_mmse = mmse_exact(&limit).map_err(|e| e.to_string())?.mmse;
    let limit_lmmse = lmmse(&moments_exact(&limit)).value;
    Ok(json!({ "rows": rows, "limit": { "mmse": limit_mmse, "lmmse": limit_lmmse } }).to_string())
}

#[wasm_bindgen]
pub fn scenarios() -> String {
    scenario_list_json()
}

#[wasm_bindgen]
pub fn scenario_curve(name: &str, n_stop: u32, seed: u32) -> Result<String, JsError> {
    scenario_curve_json(name, n_stop, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn bsc_garbling(p1: f64, p2: f64) -> Result<String, JsError> {
    bsc_garbling_json(p1, p2).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn mixture_curves(n_stop: u32) -> Result<String, JsError> {
    mixture_curves_json(n_stop).map_err(|e| JsError::new(&e))
}
