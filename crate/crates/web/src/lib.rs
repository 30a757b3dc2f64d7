//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Three operations: step a training run epoch by epoch while watching the
//! clean/noisy histogram of the selection statistic split apart; compare the
//! drop-rate curves of the two statistics; and apply the histogram threshold
//! to a hand-typed window of values. All exchange JSON strings.

pub mod demo;

use wasm_bindgen::prelude::*;

fn js_err(msg: String) -> JsError {
    JsError::new(&msg)
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("serializable")
}

#[wasm_bindgen]
pub struct TrainingSession {
    inner: demo::Session,
}

#[wasm_bindgen]
impl TrainingSession {
    /// `settings` is a JSON object of dotted config keys.
    #[wasm_bindgen(constructor)]
    pub fn new(settings: &str) -> Result<TrainingSession, JsError> {
        demo::Session::new(settings)
            .map(|inner| TrainingSession { inner })
            .map_err(js_err)
    }

    pub fn epoch(&self) -> usize {
        self.inner.epoch()
    }

    #[wasm_bindgen(js_name = totalEpochs)]
    pub fn total_epochs(&self) -> usize {
        self.inner.total_epochs()
    }

    #[wasm_bindgen(js_name = isFinished)]
    pub fn is_finished(&self) -> bool {
        self.inner.is_finished()
    }

    /// Histogram under the untrained (or current) network.
    pub fn histogram(&self) -> Result<String, JsError> {
        self.inner.histogram().map(|h| to_json(&h)).map_err(js_err)
    }

    /// Trains one epoch; returns its metrics and the new histogram.
    pub fn step(&mut self) -> Result<String, JsError> {
        self.inner.step().map(|v| to_json(&v)).map_err(js_err)
    }
}

#[wasm_bindgen(js_name = dropCurves)]
pub fn drop_curves(settings: &str, probe_epoch: usize) -> Result<String, JsError> {
    demo::drop_curves(settings, probe_epoch).map_err(js_err)
}

#[wasm_bindgen]
pub fn select(values: &str, rate: f64, bins: usize) -> Result<String, JsError> {
    demo::select(values, rate, bins).map(|s| to_json(&s)).map_err(js_err)
}
