//! wasm-bindgen bindings for the static page in `www/`.

use gigp_core::nn::ParamStore;
use gigp_core::oracle::{random_invariant_table, verify_expressivity, FiniteDomain};
use gigp_core::{assign_orbits, gigp_forward, lift, GigpLayer, GroupElement, GroupId, RawPointCloud};
use serde_json::json;
use wasm_bindgen::prelude::*;

fn js(r: Result<String, String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

/// Soft orbit-to-anchor weights, one row of `anchors.len()` per orbit value.
pub fn orbit_weights_json(orbits: &[f64], anchors: &[f64], sigma: f64) -> Result<String, String> {
    let w = assign_orbits(orbits, anchors, sigma).map_err(|e| e.to_string())?;
    let rows: Vec<&[f64]> = w.chunks(anchors.len().max(1)).collect();
    Ok(json!({ "weights": rows }).to_string())
}

#[wasm_bindgen]
pub fn orbit_weights(orbits: &[f64], anchors: &[f64], sigma: f64) -> Result<String, JsValue> {
    js(orbit_weights_json(orbits, anchors, sigma))
}

/// Pools a planar cloud (flat `x0,y0,x1,y1,...`, feature = 1 per point)
/// before and after rotating it by `angle`.
pub fn rotate_and_pool_json(coords: &[f64], angle: f64, alpha: f64) -> Result<String, String> {
    let err = |e: gigp_core::Error| e.to_string();
    let n = coords.len() / 2;
    let cloud = RawPointCloud::new(2, coords.to_vec(), 1, vec![1.0; n]).map_err(err)?;
    let rotated = cloud.transformed(&GroupElement::so2(angle)).map_err(err)?;
    let mut store = ParamStore::new();
    let layer = GigpLayer::new(&mut store, "pool", &[0.5, 1.5, 2.5], 0.5, 1, &[4], false, 0).map_err(err)?;
    let ids = layer.ids();
    store.get_mut(ids.alpha).data_mut()[0] = alpha;
    store.get_mut(ids.w).data_mut().copy_from_slice(&[2.0, 1.0, 0.25]);
    let pool = |c: &RawPointCloud| gigp_forward(&layer, &store, &lift(c, GroupId::SO2).map_err(err)?).map_err(err);
    let (a, b) = (pool(&cloud)?, pool(&rotated)?);
    let max_diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    Ok(json!({ "rotated_coords": rotated.coords, "pooled": a, "pooled_rotated": b, "max_diff": max_diff }).to_string())
}

#[wasm_bindgen]
pub fn rotate_and_pool(coords: &[f64], angle: f64, alpha: f64) -> Result<String, JsValue> {
    js(rotate_and_pool_json(coords, angle, alpha))
}

/// Exact check on a domain whose orbits are consecutive runs of the given sizes.
pub fn expressivity_json(orbit_sizes: &[u32], n_values: u32, seed: u64) -> Result<String, String> {
    let total: usize = orbit_sizes.iter().map(|&s| s as usize).sum();
    if total > 8 {
        return Err("at most 8 elements".into());
    }
    let mut orbits = Vec::new();
    let mut next = 0;
    for &s in orbit_sizes {
        orbits.push((next..next + s as usize).collect());
        next += s as usize;
    }
    let domain = FiniteDomain::new(total, n_values as usize, orbits).map_err(|e| e.to_string())?;
    let table = random_invariant_table(&domain, seed, 1000);
    let r = verify_expressivity(&domain, &table).map_err(|e| e.to_string())?;
    Ok(json!({
        "passed": r.passed(),
        "assignments": r.assignments,
        "classes": r.classes,
        "dictionary_size": r.dictionary_size,
        "collisions": r.collisions.len(),
        "lookup_entries": r.lookup_entries,
        "max_code_ln": r.max_code_ln,
    })
    .to_string())
}

#[wasm_bindgen]
pub fn expressivity(orbit_sizes: &[u32], n_values: u32, seed: u64) -> Result<String, JsValue> {
    js(expressivity_json(orbit_sizes, n_values, seed))
}
