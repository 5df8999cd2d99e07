//! Browser bindings for the demo scenarios. Each export runs one scenario
//! and hands the page a JSON string; all plotting happens in JavaScript.
//!
//! Build with `wasm-pack build --target web crates/wasm` and serve the
//! `www/` directory next to the generated `pkg/`.

pub mod demo;

use wasm_bindgen::prelude::*;

fn to_json<T: serde::Serialize>(value: cgp_core::Result<T>) -> Result<String, JsError> {
    let value = value.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

/// Even parity race between plain selection and prefer-larger selection.
#[wasm_bindgen]
pub fn run_static_comparison(
    bits: u32,
    nodes: u32,
    lambda: u32,
    rate: f64,
    budget: u32,
    seed: u32,
) -> Result<String, JsError> {
    to_json(demo::compare_static(
        bits as usize,
        nodes as usize,
        lambda.max(1) as usize,
        rate,
        budget as u64,
        seed as u64,
    ))
}

/// Moving-target race; the target flips bits every epoch.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn run_dynamic_comparison(
    bits: u32,
    nodes: u32,
    lambda: u32,
    rate: f64,
    epochs: u32,
    epoch_length: u32,
    flips: u32,
    seed: u32,
) -> Result<String, JsError> {
    to_json(demo::compare_dynamic(
        bits as usize,
        nodes as usize,
        lambda.max(1) as usize,
        rate,
        epochs as usize,
        epoch_length as u64,
        flips as usize,
        seed as u64,
    ))
}

/// Evolves a solution per method, then probes mutation robustness and walks
/// the neutral network.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn run_robustness_comparison(
    bits: u32,
    nodes: u32,
    lambda: u32,
    rate: f64,
    budget: u32,
    probe_samples: u32,
    walk_steps: u32,
    seed: u32,
) -> Result<String, JsError> {
    to_json(demo::compare_robustness(
        bits as usize,
        nodes as usize,
        lambda.max(1) as usize,
        rate,
        budget as u64,
        probe_samples as u64,
        walk_steps as u64,
        seed as u64,
    ))
}
