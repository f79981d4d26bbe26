//! WebAssembly bindings for the static demo page in `www/`.

use std::fmt::Write;

use stgraph::data::{make_windows, synth_generate, synth_network, Splits, SYNTH_PERIOD};
use stgraph::eval::ha_report;
use stgraph::graphs::{build_edge_graph, build_node_graph, dump, parse_distances, parse_ids, EdgeVariant, DEFAULT_KAPPA};
use stgraph::gradcheck;
use wasm_bindgen::prelude::*;

fn js(e: stgraph::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// Dumps the node graph and the chosen edge-wise graph for a distance table.
#[wasm_bindgen]
pub fn build_graphs(ids: &str, distances: &str, variant: &str) -> Result<String, JsValue> {
    let variant: EdgeVariant = variant.parse().map_err(js)?;
    let ids = parse_ids(ids, "ids").map_err(js)?;
    let d = parse_distances(distances, &ids, "distances").map_err(js)?;
    let g = build_node_graph(&d, DEFAULT_KAPPA).map_err(js)?;
    let e = build_edge_graph(&g, variant).map_err(js)?;
    Ok(dump(&g, &e))
}

/// Generates a synthetic network and series, then scores the historical
/// average on its test split.
#[wasm_bindgen]
pub fn synth_baseline(nodes: usize, edges: usize, steps: usize, noise: f64, seed: u64) -> Result<String, JsValue> {
    let (_, d) = synth_network(nodes, edges, seed).map_err(js)?;
    let g = build_node_graph(&d, DEFAULT_KAPPA).map_err(js)?;
    let table = synth_generate(&g, steps, seed, noise).map_err(js)?;
    let splits = Splits::default();
    let w = make_windows(&table, 12, 12, splits).map_err(js)?;
    let (report, fallbacks) = ha_report(&w.test, splits.sizes(steps).0, SYNTH_PERIOD).map_err(js)?;
    let mut out = format!(
        "{nodes} sensors, {} links, {steps} steps; windows train/val/test {}/{}/{}\n\n",
        g.edge_count(),
        w.train.len(),
        w.val.len(),
        w.test.len()
    );
    out.push_str("historical average on the test split\n");
    out.push_str(&report.to_text());
    if fallbacks > 0 {
        let _ = writeln!(out, "({fallbacks} entries fell back to node means)");
    }
    Ok(out)
}

/// Finite-difference check of every layer's gradients.
#[wasm_bindgen]
pub fn gradient_check(seed: u64) -> Result<String, JsValue> {
    let results = gradcheck::run_suite(seed).map_err(js)?;
    let mut out = String::new();
    for r in &results {
        let verdict = if r.passed() { "ok" } else { "FAILED" };
        let _ = writeln!(out, "{:<12} {:>5} entries  max rel error {:.2e}  {verdict}", r.name, r.entries, r.max_rel_error);
    }
    Ok(out)
}
