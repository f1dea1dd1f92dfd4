//! Wasm bindings for the browser demo page (`demo/index.html`).
//!
//! Three operations are exposed, each taking the distribution JSON
//! (`{"q": [[...], ...], "reps": k}`) and returning a JSON string:
//!
//! - [`analyze_distribution`] — spectral profile, marginals, the cycle-MI
//!   curve over a grid of orders, and the recovery-threshold prediction
//! - [`exponent_curve`] — the Chernoff exponent curve over a theta grid
//! - [`phase_sweep`] — a small seeded recovery-rate sweep over reps
//!
//! The computational entry points are plain Rust functions (unit-tested on
//! the host); the `#[wasm_bindgen]` exports are thin wrappers.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use dbalign::bounds;
use dbalign::experiments::{sweep, ExperimentConfig, SweepAxis, SweepRow};
use dbalign::spectral;
use dbalign::ProductForm;

#[derive(Serialize)]
struct OrderPoint {
    order: f64,
    value_nats: f64,
}

#[derive(Serialize)]
struct DistributionAnalysis {
    reps: u32,
    sigma_sq: Vec<f64>,
    marginal_a: Vec<f64>,
    marginal_b: Vec<f64>,
    /// Cycle MI of the full product model over a grid of orders.
    cmi_curve: Vec<OrderPoint>,
    /// Per-repetition order-2 cycle MI of the base distribution.
    cmi2_per_rep: f64,
    /// b_circ(z, z, 2) of the base distribution.
    b2: f64,
    /// Repetitions needed to reach the order-2 threshold 2 ln n at the
    /// requested database size.
    threshold_reps: f64,
    n: usize,
}

fn analyze_distribution_impl(dist_json: &str, n: usize) -> Result<String, String> {
    let model = ProductForm::from_json_str(dist_json).map_err(|e| e.to_string())?;
    let q = model.base();
    let profile = spectral::spectral_profile(q).map_err(|e| e.to_string())?;
    let cmi_curve = (0..=16)
        .map(|i| {
            let order = i as f64 * 0.25;
            Ok(OrderPoint {
                order,
                value_nats: spectral::cycle_mi(&model, order).map_err(|e: dbalign::Error| e.to_string())?,
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    let cmi2_per_rep = spectral::cycle_mi_joint(q, 2.0).map_err(|e| e.to_string())?;
    let threshold_reps = if cmi2_per_rep > 0.0 {
        2.0 * (n.max(2) as f64).ln() / cmi2_per_rep
    } else {
        f64::INFINITY
    };
    let analysis = DistributionAnalysis {
        reps: model.reps(),
        sigma_sq: profile.sigma_sq().to_vec(),
        marginal_a: q.marginal_a().to_vec(),
        marginal_b: q.marginal_b().to_vec(),
        cmi_curve,
        cmi2_per_rep,
        b2: bounds::log_b2(q).exp(),
        threshold_reps,
        n,
    };
    serde_json::to_string(&analysis).map_err(|e| e.to_string())
}

fn exponent_curve_impl(dist_json: &str, points: usize) -> Result<String, String> {
    if points < 2 {
        return Err("points must be >= 2".into());
    }
    let model = ProductForm::from_json_str(dist_json).map_err(|e| e.to_string())?;
    let thetas: Vec<f64> = (0..points)
        .map(|i| i as f64 / (points - 1) as f64)
        .collect();
    let curve = bounds::exponent_curve(model.base(), &thetas);
    serde_json::to_string(&curve).map_err(|e| e.to_string())
}

fn phase_sweep_impl(
    dist_json: &str,
    n: usize,
    reps_values: &[u32],
    trials: usize,
    master_seed: u64,
) -> Result<String, String> {
    let model = ProductForm::from_json_str(dist_json).map_err(|e| e.to_string())?;
    let config = ExperimentConfig {
        model,
        n,
        trials,
        master_seed,
        axis: SweepAxis::Reps,
        values: reps_values.iter().map(|&v| v as f64).collect(),
    };
    let rows: Vec<SweepRow> = sweep(&config)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|(row, _)| row)
        .collect();
    serde_json::to_string(&rows).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn analyze_distribution(dist_json: &str, n: usize) -> Result<String, JsValue> {
    analyze_distribution_impl(dist_json, n).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn exponent_curve(dist_json: &str, points: usize) -> Result<String, JsValue> {
    exponent_curve_impl(dist_json, points).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn phase_sweep(
    dist_json: &str,
    n: usize,
    reps_values: Vec<u32>,
    trials: usize,
    master_seed: u64,
) -> Result<String, JsValue> {
    phase_sweep_impl(dist_json, n, &reps_values, trials, master_seed)
        .map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const CANONICAL: &str = r#"{"q": [[0.45,0.05],[0.05,0.45]], "reps": 4}"#;

    #[test]
    fn analysis_reports_profile_and_threshold() {
        let json = analyze_distribution_impl(CANONICAL, 100).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["reps"], 4);
        assert!((v["sigma_sq"][0].as_f64().unwrap() - 0.8).abs() < 1e-12);
        assert!((v["b2"].as_f64().unwrap() - 0.68).abs() < 1e-12);
        // threshold reps for n = 100 at 0.3857 nats per coordinate
        assert!((v["threshold_reps"].as_f64().unwrap() - 23.88).abs() < 0.01);
        assert_eq!(v["cmi_curve"].as_array().unwrap().len(), 17);
    }

    #[test]
    fn exponent_curve_is_symmetric_json() {
        let json = exponent_curve_impl(CANONICAL, 21).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        let points = v.as_array().unwrap();
        assert_eq!(points.len(), 21);
        let first = points[0]["value"].as_f64().unwrap();
        let mid = points[10]["value"].as_f64().unwrap();
        assert!((first - 1.0).abs() < 1e-12);
        assert!((mid - 0.68).abs() < 1e-12);
    }

    #[test]
    fn phase_sweep_returns_rows_in_axis_order() {
        let json = phase_sweep_impl(CANONICAL, 20, &[4, 12, 24], 20, 7).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        let rows = v.as_array().unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0]["axis_value"], 4.0);
        assert_eq!(rows[2]["axis_value"], 24.0);
        let low = rows[0]["recovery_rate"].as_f64().unwrap();
        let high = rows[2]["recovery_rate"].as_f64().unwrap();
        assert!(low <= high);
    }

    #[test]
    fn invalid_distribution_is_reported() {
        let err = analyze_distribution_impl(r#"{"q": [[2.0]]}"#, 10).unwrap_err();
        assert!(err.contains("normalized"), "{err}");
    }
}
