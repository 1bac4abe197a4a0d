//! wasm-bindgen entry points for the static page in `www/`. Every function
//! returns a JSON string; errors come back as `{"error": "..."}`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use stfp::fingerprints::ecfp;
use stfp::smiles::{enumerate_random, parse};
use stfp::transformer::positional_encoding;
use wasm_bindgen::prelude::*;

fn to_json(r: Result<Value, String>) -> String {
    r.unwrap_or_else(|e| json!({ "error": e })).to_string()
}

/// `n` random SMILES of the same molecule, plus how many are distinct.
#[wasm_bindgen]
pub fn enumerate(smiles: &str, n: usize, seed: u64) -> String {
    to_json(parse(smiles).map_err(|e| e.to_string()).map(|g| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let variants: Vec<String> = (0..n.min(1000)).map(|_| enumerate_random(&g, &mut rng)).collect();
        let mut distinct = variants.clone();
        distinct.sort();
        distinct.dedup();
        json!({ "atoms": g.atom_count(), "variants": variants, "distinct": distinct.len() })
    }))
}

/// Set bits of the folded circular fingerprint.
#[wasm_bindgen]
pub fn ecfp_bits(smiles: &str, diameter: u32, n_bits: usize) -> String {
    if n_bits == 0 {
        return to_json(Err("n_bits must be positive".into()));
    }
    to_json(parse(smiles).map_err(|e| e.to_string()).map(|g| {
        let fp = ecfp(&g, diameter, n_bits);
        json!({ "n_bits": n_bits, "on": fp.ones().collect::<Vec<_>>(), "hex": fp.to_hex() })
    }))
}

/// Sinusoidal position encoding as a row-major `length x d_model` matrix.
#[wasm_bindgen]
pub fn positional_heatmap(length: usize, d_model: usize) -> String {
    if d_model == 0 || !d_model.is_multiple_of(2) || length == 0 || length * d_model > 1 << 20 {
        return to_json(Err("need a positive even d_model and a modest matrix".into()));
    }
    let pe = positional_encoding::<f64>(length, d_model);
    to_json(Ok(json!({ "length": length, "d_model": d_model, "values": pe.data() })))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn returns_json() {
        let v: Value = serde_json::from_str(&enumerate("CCO", 20, 1)).unwrap();
        assert_eq!(v["variants"].as_array().unwrap().len(), 20);
        assert!(v["distinct"].as_u64().unwrap() >= 2);
        let v: Value = serde_json::from_str(&ecfp_bits("c1ccccc1", 4, 1024)).unwrap();
        assert!(v["on"].as_array().unwrap().len() <= 3);
        let v: Value = serde_json::from_str(&positional_heatmap(4, 6)).unwrap();
        assert_eq!(v["values"].as_array().unwrap().len(), 24);
        assert!(serde_json::from_str::<Value>(&ecfp_bits("C(", 4, 64)).unwrap()["error"].is_string());
        assert!(serde_json::from_str::<Value>(&positional_heatmap(4, 5)).unwrap()["error"].is_string());
    }
}
