//! JavaScript bindings for the demo page. Inputs and outputs are JSON
//! strings so the page needs no generated type definitions.

mod session;

pub use session::{MatrixRequest, Session, Summary, VariableView};

use datagrid::{OptimizerConfig, PlantSpec, Schema};
use serde::de::DeserializeOwned;
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn parse<T: DeserializeOwned>(what: &str, json: &str) -> Result<T, JsError> {
    serde_json::from_str(json).map_err(|e| JsError::new(&format!("bad {what}: {e}")))
}

fn to_json<T: Serialize>(value: &T) -> Result<String, JsError> {
    serde_json::to_string(value).map_err(|e| JsError::new(&e.to_string()))
}

fn js(e: datagrid::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct Explorer {
    inner: Session,
}

#[wasm_bindgen]
impl Explorer {
    /// Generates a planted table from a generator spec and trains on it.
    pub fn generate(spec_json: &str, config_json: &str) -> Result<Explorer, JsError> {
        let spec: PlantSpec = parse("generator spec", spec_json)?;
        let config: OptimizerConfig = parse("optimizer config", config_json)?;
        Ok(Explorer {
            inner: Session::generate(&spec, &config).map_err(js)?,
        })
    }

    /// Trains on pasted delimited text.
    #[wasm_bindgen(js_name = fromTable)]
    pub fn from_table(text: &str, schema_json: &str, config_json: &str) -> Result<Explorer, JsError> {
        let schema: Schema = parse("schema", schema_json)?;
        let config: OptimizerConfig = parse("optimizer config", config_json)?;
        Ok(Explorer {
            inner: Session::from_table(text, &schema, &config).map_err(js)?,
        })
    }

    pub fn summary(&self) -> Result<String, JsError> {
        to_json(&self.inner.summary().map_err(js)?)
    }

    #[wasm_bindgen(js_name = setStep)]
    pub fn set_step(&mut self, step: usize) -> Result<(), JsError> {
        self.inner.set_step(step).map_err(js)
    }

    #[wasm_bindgen(js_name = setInfoRatio)]
    pub fn set_info_ratio(&mut self, ratio: f64) -> Result<usize, JsError> {
        self.inner.set_info_ratio(ratio).map_err(js)
    }

    pub fn matrix(&self, request_json: &str) -> Result<String, JsError> {
        let req: MatrixRequest = parse("matrix request", request_json)?;
        to_json(&self.inner.matrix(&req).map_err(js)?)
    }

    pub fn typicality(&self, variable: usize, cluster: usize) -> Result<String, JsError> {
        to_json(&self.inner.typicality(variable, cluster).map_err(js)?)
    }

    pub fn document(&self) -> Result<String, JsError> {
        self.inner.document().map_err(js)
    }
}
