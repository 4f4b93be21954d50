//! JSON reports: `{"metadata": {...}, "theory": {...}, "report": {...}}`.

use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::Result;
use crate::io::meta::Metadata;
use crate::params::ModelParams;
use crate::theory::{apriori_bounds, contraction_modulus, default_radius};

/// Contraction modulus at `Lambda1 = Lambda2` and the a-priori bounds at the
/// default radius, or the violated inequality.
pub fn theory_block(params: &ModelParams, b: Option<f64>) -> Value {
    let b = b.unwrap_or_else(|| default_radius(params));
    let modulus = contraction_modulus(params, params.lambda_total, params.lambda_total).ok();
    let bounds = match apriori_bounds(params, b) {
        Ok(bounds) => json!({ "applicable": true, "bounds": bounds }),
        Err(na) => json!({ "applicable": false, "violated": na.violated, "contraction_modulus_on_ball": na.contraction_modulus }),
    };
    json!({
        "contraction_modulus": modulus,
        "contracting": modulus.map(|q| q < 1.0),
        "b": b,
        "apriori": bounds,
    })
}

pub fn report_value(meta: &Metadata, theory: Option<Value>, body: &impl Serialize) -> Result<Value> {
    let mut doc = serde_json::Map::new();
    doc.insert("metadata".into(), serde_json::to_value(meta.to_map())?);
    if let Some(t) = theory {
        doc.insert("theory".into(), t);
    }
    doc.insert("report".into(), serde_json::to_value(body)?);
    Ok(Value::Object(doc))
}

pub fn write_report(path: &Path, meta: &Metadata, theory: Option<Value>, body: &impl Serialize) -> Result<()> {
    let doc = report_value(meta, theory, body)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocks_present() {
        let p = ModelParams::default();
        let v = report_value(&Metadata::for_model(&p), Some(theory_block(&p, None)), &json!({"x": 1})).unwrap();
        assert_eq!(v["metadata"]["sigma"], "3");
        assert_eq!(v["theory"]["contracting"], false);
        assert_eq!(v["theory"]["apriori"]["applicable"], false);
        assert_eq!(v["report"]["x"], 1);
    }

    #[test]
    fn bounds_reported_when_contracting() {
        let p = ModelParams::default().with_tau(0.01);
        let v = theory_block(&p, Some(0.1));
        assert_eq!(v["apriori"]["applicable"], true);
        assert!(v["apriori"]["bounds"]["l_psi"].as_f64().unwrap() > 0.0);
    }
}
