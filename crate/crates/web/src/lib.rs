//! Browser demo: propagate one expression, draw bridge and string profiles,
//! and scatter a cluster cloud.
//!
//! The plain functions hold the logic and run anywhere; the `wasm_bindgen`
//! exports only convert errors.

use errcalc::calculus::{propagate, ErroneousQuantity};
use errcalc::cluster::{run_cluster, ClusterConfig};
use errcalc::expr::Expression;
use errcalc::map::SmoothMap;
use errcalc::process::{bridge_gamma_analytic, string_mean_square_deflection, StringModel};
use wasm_bindgen::prelude::*;

fn model(source: &str, names: &[String]) -> Result<SmoothMap, String> {
    let e = Expression::parse_declared(source, names).map_err(|e| e.to_string())?;
    SmoothMap::from_expressions(names, vec![("f".into(), e)]).map_err(|e| e.to_string())
}

fn split_names(names: &str) -> Vec<String> {
    names
        .split(',')
        .map(|s| s.trim().to_owned())
        .filter(|s| !s.is_empty())
        .collect()
}

fn quantity(values: &[f64], variances: &[f64]) -> Result<ErroneousQuantity, String> {
    ErroneousQuantity::independent(values, variances).map_err(|e| e.to_string())
}

/// `[value, gamma, bias]` of `source` over independent inputs.
pub fn propagate_one(
    source: &str,
    names: &str,
    values: &[f64],
    variances: &[f64],
) -> Result<Vec<f64>, String> {
    let names = split_names(names);
    let f = model(source, &names)?;
    let y = propagate(&quantity(values, variances)?, &f).map_err(|e| e.to_string())?;
    Ok(vec![y.value()[0], y.gamma()[(0, 0)], y.bias()[0]])
}

/// Interleaved `[t, Γ_K(t, t), t(1 − t)]` on `points` equispaced times.
pub fn bridge_profile(k: usize, points: usize) -> Result<Vec<f64>, String> {
    let mut out = Vec::with_capacity(3 * points);
    for i in 0..points {
        let t = i as f64 / (points.max(2) - 1) as f64;
        let g = bridge_gamma_analytic(t, t, k).map_err(|e| e.to_string())?;
        out.extend([t, g, t * (1.0 - t)]);
    }
    Ok(out)
}

/// Interleaved `[x, mean-square deflection]` at interior points.
pub fn string_profile(
    length: f64,
    tension: f64,
    temperature: f64,
    k: usize,
    points: usize,
) -> Result<Vec<f64>, String> {
    let mut out = Vec::with_capacity(2 * points);
    for i in 1..=points {
        let x = length * i as f64 / (points + 1) as f64;
        let m = StringModel::new(length, tension, temperature, x).map_err(|e| e.to_string())?;
        let d = string_mean_square_deflection(&m, k).map_err(|e| e.to_string())?;
        out.extend([x, d.value]);
    }
    Ok(out)
}

/// A cluster run on a two-input expression, with the cloud for plotting.
#[wasm_bindgen]
#[derive(Debug, Clone, PartialEq)]
pub struct CloudView {
    points: Vec<f64>,
    summary: Vec<f64>,
}

#[wasm_bindgen]
impl CloudView {
    /// Interleaved `x, y` coordinates of the cloud.
    #[wasm_bindgen(getter)]
    pub fn points(&self) -> Vec<f64> {
        self.points.clone()
    }

    /// `[gamma_hat, s.e., bias_hat, s.e., gamma, bias]`, the last two from
    /// propagation.
    #[wasm_bindgen(getter)]
    pub fn summary(&self) -> Vec<f64> {
        self.summary.clone()
    }
}

pub fn cloud(
    source: &str,
    names: &str,
    values: &[f64],
    variances: &[f64],
    scale: f64,
    points: usize,
    seed: u64,
) -> Result<CloudView, String> {
    let names = split_names(names);
    if names.len() != 2 {
        return Err("the cloud view needs exactly two inputs".into());
    }
    let f = model(source, &names)?;
    let x = quantity(values, variances)?;
    let reference = propagate(&x, &f).map_err(|e| e.to_string())?;
    let cfg = ClusterConfig::new(
        values.to_vec(),
        x.gamma().clone(),
        scale,
        points,
        errcalc::cluster::CloudDistribution::Gaussian,
        seed,
    )
    .map_err(|e| e.to_string())?;
    let est = run_cluster(&f, &cfg).map_err(|e| e.to_string())?;
    Ok(CloudView {
        points: cfg.cloud().into_iter().flatten().collect(),
        summary: vec![
            est.gamma_hat[(0, 0)],
            est.gamma_std_error[(0, 0)],
            est.bias_hat[0],
            est.bias_std_error[0],
            reference.gamma()[(0, 0)],
            reference.bias()[0],
        ],
    })
}

#[wasm_bindgen(js_name = propagate)]
pub fn propagate_js(
    source: &str,
    names: &str,
    values: &[f64],
    variances: &[f64],
) -> Result<Vec<f64>, JsError> {
    propagate_one(source, names, values, variances).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = bridgeProfile)]
pub fn bridge_profile_js(k: usize, points: usize) -> Result<Vec<f64>, JsError> {
    bridge_profile(k, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = stringProfile)]
pub fn string_profile_js(
    length: f64,
    tension: f64,
    temperature: f64,
    k: usize,
    points: usize,
) -> Result<Vec<f64>, JsError> {
    string_profile(length, tension, temperature, k, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = clusterCloud)]
pub fn cloud_js(
    source: &str,
    names: &str,
    values: &[f64],
    variances: &[f64],
    scale: f64,
    points: usize,
    seed: u64,
) -> Result<CloudView, JsError> {
    cloud(source, names, values, variances, scale, points, seed).map_err(|e| JsError::new(&e))
}
