//! Browser bindings for a few mixing-ustat operations.
//!
//! Each export has a plain Rust counterpart returning `Result<_, String>` so
//! the logic is testable off the browser.

use mixing_ustat::conditions::{
    theorem2_check, BetaModel, BoundModel, ConditionConfig, HFunction, RateModel, VarianceModel,
};
use mixing_ustat::kernel::{BuiltinKernel, KernelSpec};
use mixing_ustat::mc::{ks_distance, simulate_statistics};
use mixing_ustat::process::{Process, ProcessSpec};
use mixing_ustat::Mode;
use wasm_bindgen::prelude::*;

const MAX_REPLICATES: usize = 200_000;

pub fn beta_values(p: f64, q: f64, t_max: usize) -> Result<Vec<f64>, String> {
    let process = Process::new(ProcessSpec::two_state(p, q)).map_err(|e| e.to_string())?;
    let profile = process.beta_profile(t_max).map_err(|e| e.to_string())?;
    Ok(profile.into_iter().map(|b| b.value).collect())
}

/// Standardized replicates of a U-statistic and their KS distance to N(0, 1).
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct CltSample {
    z: Vec<f64>,
    ks: f64,
}

#[wasm_bindgen]
impl CltSample {
    #[wasm_bindgen(getter)]
    pub fn z(&self) -> Vec<f64> {
        self.z.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn ks(&self) -> f64 {
        self.ks
    }
}

fn demo_process(name: &str) -> Result<ProcessSpec, String> {
    match name {
        "iid_uniform" => Ok(ProcessSpec::IidUniform01 {}),
        "chain" => Ok(ProcessSpec::two_state(0.2, 0.5)),
        other => Err(format!("unknown process `{other}`")),
    }
}

fn demo_kernel(name: &str) -> Result<KernelSpec, String> {
    match name {
        "gini" => Ok(KernelSpec::ClippedGini { clip: 1.0 }),
        "product" => Ok(KernelSpec::Product { bound: 1.0 }),
        "degenerate" => Ok(KernelSpec::DegenerateProduct { mu: 0.5, bound: 0.25 }),
        "match" => Ok(KernelSpec::MatchIndicator),
        other => Err(format!("unknown kernel `{other}`")),
    }
}

pub fn clt_values(process: &str, kernel: &str, n: usize, replicates: usize, seed: u32) -> Result<CltSample, String> {
    if !(2..=MAX_REPLICATES).contains(&replicates) {
        return Err(format!("replicates must be between 2 and {MAX_REPLICATES}"));
    }
    let process = Process::new(demo_process(process)?).map_err(|e| e.to_string())?;
    let kernel = BuiltinKernel::new(demo_kernel(kernel)?).map_err(|e| e.to_string())?;
    let values = simulate_statistics(&process, &kernel, Mode::U, n, u64::from(seed), 0, replicates)
        .map_err(|e| e.to_string())?;
    let len = values.len() as f64;
    let mean = values.iter().sum::<f64>() / len;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (len - 1.0);
    if var <= 0.0 {
        return Err("the statistic has zero variance at this n".into());
    }
    let sd = var.sqrt();
    let z: Vec<f64> = values.iter().map(|v| (v - mean) / sd).collect();
    let ks = ks_distance(&z);
    Ok(CltSample { z, ks })
}

/// Rows `(n, m_n, T1, T2)` for the rate model with `r = 2`, `F = 1`,
/// `D U_n = n^{2+κ}` and `β(t) = t^{−ln t}`, flattened.
pub fn condition_rows(kappa: f64, b0: f64) -> Result<Vec<f64>, String> {
    let model = RateModel {
        r: 2,
        bound: BoundModel::Constant { value: 1.0 },
        variance: VarianceModel::Parametric { c: 1.0, kappa },
        beta: BetaModel::Power { h: HFunction::Ln },
    };
    let grid = vec![1_000, 10_000, 100_000, 1_000_000];
    let report = theorem2_check(&ConditionConfig::new(model, grid, vec![b0], b0)).map_err(|e| e.to_string())?;
    Ok(report.points.iter().flat_map(|p| [p.n as f64, p.m_n as f64, p.t1, p.t2]).collect())
}

#[wasm_bindgen]
pub fn beta_curve(p: f64, q: f64, t_max: usize) -> Result<Vec<f64>, JsError> {
    beta_values(p, q, t_max).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn clt_sample(process: &str, kernel: &str, n: usize, replicates: usize, seed: u32) -> Result<CltSample, JsError> {
    clt_values(process, kernel, n, replicates, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn condition_terms(kappa: f64, b0: f64) -> Result<Vec<f64>, JsError> {
    condition_rows(kappa, b0).map_err(|e| JsError::new(&e))
}
