//! Browser bindings for the demo page in `www/`.
//!
//! Every export takes plain numbers or strings and returns a JSON document;
//! failures come back as `{"error": "..."}` so the page never has to catch.

use chebyshev_core::bounds::{self, Inequality, PreparedBound};
use chebyshev_core::measure::{Family, Quantization, Sampler};
use chebyshev_core::space::{operator_norm, p_norm, Exponent, PNormSpace};
use chebyshev_core::DiscreteMeasure;
use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

const MAX_DEMO_SAMPLES: usize = 20_000;
const OUTLINE_POINTS: usize = 256;

fn respond(result: Result<Value, String>) -> String {
    match result {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

fn exponent(text: &str) -> Result<Exponent, String> {
    text.trim().parse().map_err(|e| format!("{e}"))
}

/// Tail probability and bound for one inequality (or `all`) over a log-spaced ε grid.
#[wasm_bindgen(js_name = boundCurve)]
pub fn bound_curve(measure_json: &str, inequality: &str, start: f64, stop: f64, points: usize) -> String {
    respond(bound_curve_value(measure_json, inequality, start, stop, points))
}

fn bound_curve_value(
    measure_json: &str,
    inequality: &str,
    start: f64,
    stop: f64,
    points: usize,
) -> Result<Value, String> {
    let mu = DiscreteMeasure::from_json(measure_json).map_err(|e| e.to_string())?;
    let grid = bounds::log_grid(start, stop, points).map_err(|e| e.to_string())?;
    let selected: Vec<Inequality> = match inequality {
        "all" => Inequality::ALL.to_vec(),
        name => vec![name.parse().map_err(|e| format!("{e}"))?],
    };
    let mut curves = Vec::new();
    let mut skipped = Vec::new();
    let centered = mu.center();
    for inequality in selected {
        // Chen and Rao are stated for centered laws.
        let target = match inequality {
            Inequality::Chen | Inequality::RaoForward | Inequality::RaoInverse => &centered,
            _ => &mu,
        };
        match PreparedBound::new(inequality, target, None) {
            Ok(prepared) => {
                let rows = grid
                    .iter()
                    .map(|&e| prepared.evaluate(e).map_err(|err| err.to_string()))
                    .collect::<Result<Vec<_>, _>>()?;
                curves.push(json!({ "inequality": inequality.name(), "reports": rows }));
            }
            Err(e) => skipped.push(json!({ "inequality": inequality.name(), "reason": e.to_string() })),
        }
    }
    Ok(json!({ "epsilon": grid, "curves": curves, "skipped": skipped }))
}

/// Draws from a planar sampler and their truncation onto the `δ`-grid.
#[wasm_bindgen(js_name = quantizeDemo)]
pub fn quantize_demo(family: &str, p: &str, resolution: f64, samples: usize, seed: u32) -> String {
    respond(quantize_value(family, p, resolution, samples, seed))
}

fn quantize_value(family: &str, p: &str, resolution: f64, samples: usize, seed: u32) -> Result<Value, String> {
    if samples == 0 || samples > MAX_DEMO_SAMPLES {
        return Err(format!("samples must be between 1 and {MAX_DEMO_SAMPLES}"));
    }
    let space = PNormSpace::new(2, exponent(p)?).map_err(|e| e.to_string())?;
    let sampler = match family {
        "gaussian" => Sampler::isotropic_gaussian(space, 1.0, seed.into()),
        "uniform-ball" => Sampler::new(space, Family::UniformBall { radius: 1.0 }, seed.into()),
        other => return Err(format!("unknown family {other:?}")),
    }
    .map_err(|e| e.to_string())?;
    let q = Quantization::draw(&sampler, samples, resolution).map_err(|e| e.to_string())?;
    let merged = q.merged_measure();
    let rows = |v: &[DVector<f64>]| v.iter().map(|x| [x[0], x[1]]).collect::<Vec<_>>();
    Ok(json!({
        "raw": rows(q.raw()),
        "quantized": rows(q.quantized()),
        "cells": merged.len(),
        "error_bound": q.error_bound(),
        "max_error": q.max_error(),
        "shrink": q.shrinks(),
        "raw_second_moment": q.raw_measure().second_moment(),
        "quantized_second_moment": merged.second_moment(),
    }))
}

/// Bracket for `‖M‖` from `ℓ_from` to `ℓ_to` with `M = [[a, b], [c, d]]`, plus
/// the image of the unit `from`-sphere for plotting.
#[wasm_bindgen(js_name = operatorNormDemo)]
pub fn operator_norm_demo(a: f64, b: f64, c: f64, d: f64, from: &str, to: &str) -> String {
    respond(operator_norm_value([a, b, c, d], from, to))
}

fn operator_norm_value(entries: [f64; 4], from: &str, to: &str) -> Result<Value, String> {
    let (from, to) = (exponent(from)?, exponent(to)?);
    let m = DMatrix::from_row_slice(2, 2, &entries);
    let bracket = operator_norm(&m, from, to).map_err(|e| e.to_string())?;
    let sphere = |p: Exponent| -> Vec<[f64; 2]> {
        (0..OUTLINE_POINTS)
            .map(|i| {
                let t = std::f64::consts::TAU * i as f64 / OUTLINE_POINTS as f64;
                let v = [t.cos(), t.sin()];
                let n = p_norm(&v, p);
                [v[0] / n, v[1] / n]
            })
            .collect()
    };
    let domain = sphere(from);
    let image: Vec<[f64; 2]> = domain
        .iter()
        .map(|v| {
            let w = &m * DVector::from_column_slice(v);
            [w[0], w[1]]
        })
        .collect();
    let outline_max = image.iter().map(|w| p_norm(w, to)).fold(0.0, f64::max);
    Ok(json!({
        "lower": bracket.lower,
        "upper": bracket.upper,
        "exact": bracket.exact,
        "domain": domain,
        "image": image,
        "target_sphere": sphere(to),
        "outline_max": outline_max,
    }))
}
