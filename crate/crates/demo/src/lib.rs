//! Browser demo: two-dimensional Gaussian pairs sharing one covariance.
//!
//! The plain functions in [`api`] hold the logic and are tested natively.
//! The `#[wasm_bindgen]` wrappers below only translate errors for JavaScript.

pub mod api;

use wasm_bindgen::prelude::*;

fn js(e: rscusum::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Instantaneous score on an `n × n` grid over `[-extent, extent]²`, row-major with `y` increasing.
#[wasm_bindgen]
pub fn z_field(q_inf: &[f64], q_post: &[f64], rho: f64, extent: f64, n: u32) -> Result<Vec<f64>, JsError> {
    api::z_field(q_inf, q_post, rho, extent, n as usize).map_err(js)
}

/// Statistic path `Z(1..=length)`; samples come from `pre` before `change_point` and `post` from it on.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn simulate_path(
    q_inf: &[f64],
    q_post: &[f64],
    pre: &[f64],
    post: &[f64],
    change_point: u32,
    length: u32,
    rho: f64,
    seed: u32,
) -> Result<Vec<f64>, JsError> {
    api::simulate_path(q_inf, q_post, pre, post, change_point as u64, length as usize, rho, seed as u64).map_err(js)
}

/// ARL/EDD sweep flattened as `[omega, arl, arl_stderr, edd, edd_stderr]` per threshold.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn sweep(
    q_inf: &[f64],
    q_post: &[f64],
    p_inf: &[f64],
    p_post: &[f64],
    rho: f64,
    omegas: &[f64],
    paths: u32,
    cap: u32,
    seed: u32,
) -> Result<Vec<f64>, JsError> {
    api::sweep(q_inf, q_post, p_inf, p_post, rho, omegas, paths as usize, cap as u64, seed as u64).map_err(js)
}
