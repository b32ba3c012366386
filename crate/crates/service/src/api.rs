//! JSON prediction API.
//!
//! * `POST /api/v1/predict` — price estimate for one car
//! * `GET  /api/v1/metadata` — vocabularies and numeric bounds for form building
//! * `GET  /healthz` — 200 once a model is loaded
//!
//! Errors are returned as `{code, message, field?, validValues?}`.

use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use carprice_core::model::{AgeInput, CarAttributes, EncodeError, ForestModel, NumericBounds};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub struct LoadedModel {
    pub model: ForestModel,
    pub version: String,
}

impl LoadedModel {
    pub fn new(model: ForestModel) -> carprice_core::Result<Self> {
        let version = model.fingerprint()?;
        Ok(Self { model, version })
    }
}

/// Shared service state: a single model slot that can be swapped atomically.
/// Requests clone the `Arc` and never hold the lock while predicting.
#[derive(Clone, Default)]
pub struct AppState {
    slot: Arc<RwLock<Option<Arc<LoadedModel>>>>,
}

impl AppState {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn with_model(model: LoadedModel) -> Self {
        let state = Self::default();
        state.replace(model);
        state
    }

    pub fn replace(&self, model: LoadedModel) {
        *self.slot.write().unwrap_or_else(|e| e.into_inner()) = Some(Arc::new(model));
    }

    pub fn current(&self) -> Option<Arc<LoadedModel>> {
        self.slot.read().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub valid_values: Option<Vec<String>>,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status: status.as_u16(),
            code: code.into(),
            message: message.into(),
            field: None,
            valid_values: None,
        }
    }

    fn on_field(mut self, field: &str) -> Self {
        self.field = Some(field.into());
        self
    }

    fn no_model() -> Self {
        Self::new(StatusCode::SERVICE_UNAVAILABLE, "no_model", "no model is loaded")
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

impl From<EncodeError> for ApiError {
    fn from(e: EncodeError) -> Self {
        let message = e.to_string();
        match e {
            EncodeError::UnknownCategory { field, valid, .. } => {
                let mut err = Self::new(StatusCode::UNPROCESSABLE_ENTITY, "unknown_category", message).on_field(field);
                err.valid_values = Some(valid);
                err
            }
            EncodeError::OutOfBounds { field, .. } => {
                Self::new(StatusCode::UNPROCESSABLE_ENTITY, "out_of_range", message).on_field(field)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PredictionResponse {
    pub price: f64,
    pub min: f64,
    pub max: f64,
    pub std: f64,
    pub model_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Vocabularies {
    pub vehicle_type: Vec<String>,
    pub model: Vec<String>,
    pub fuel_type: Vec<String>,
    pub brand: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MetadataResponse {
    pub model_version: String,
    pub columns: Vec<String>,
    pub vocabularies: Vocabularies,
    pub bounds: NumericBounds,
    pub reference_year: i64,
    pub n_trees: usize,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/v1/predict", post(predict))
        .route("/api/v1/metadata", get(metadata))
        .route("/healthz", get(healthz))
        .with_state(state)
}

fn bad_request(code: &str, field: &str, message: String) -> ApiError {
    ApiError::new(StatusCode::BAD_REQUEST, code, message).on_field(field)
}

fn text_field(body: &Map<String, Value>, field: &str) -> Result<String, ApiError> {
    match body.get(field) {
        None | Some(Value::Null) => Err(bad_request("missing_field", field, format!("missing field `{field}`"))),
        Some(Value::String(s)) => Ok(s.clone()),
        Some(_) => Err(bad_request(
            "invalid_type",
            field,
            format!("`{field}` must be a string"),
        )),
    }
}

fn int_field(body: &Map<String, Value>, field: &str) -> Result<Option<i64>, ApiError> {
    match body.get(field) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v
            .as_i64()
            .or_else(|| {
                v.as_f64()
                    .filter(|f| f.fract() == 0.0 && f.abs() < 9e15)
                    .map(|f| f as i64)
            })
            .map(Some)
            .ok_or_else(|| bad_request("invalid_type", field, format!("`{field}` must be an integer"))),
    }
}

fn required_int(body: &Map<String, Value>, field: &str) -> Result<i64, ApiError> {
    int_field(body, field)?.ok_or_else(|| bad_request("missing_field", field, format!("missing field `{field}`")))
}

fn bool_field(body: &Map<String, Value>, field: &str) -> Result<bool, ApiError> {
    match body.get(field) {
        None | Some(Value::Null) => Err(bad_request("missing_field", field, format!("missing field `{field}`"))),
        Some(Value::Bool(b)) => Ok(*b),
        Some(_) => Err(bad_request(
            "invalid_type",
            field,
            format!("`{field}` must be a boolean"),
        )),
    }
}

/// Parses a prediction request body. Exactly one of `age` and
/// `yearOfRegistration` must be present.
pub fn parse_request(body: &[u8]) -> Result<CarAttributes, ApiError> {
    let value: Value = serde_json::from_slice(body).map_err(|e| {
        ApiError::new(
            StatusCode::BAD_REQUEST,
            "invalid_json",
            format!("invalid JSON body: {e}"),
        )
    })?;
    let Value::Object(body) = value else {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "invalid_json",
            "body must be a JSON object",
        ));
    };
    let age = match (int_field(&body, "age")?, int_field(&body, "yearOfRegistration")?) {
        (Some(a), None) => AgeInput::Age(a),
        (None, Some(y)) => AgeInput::YearOfRegistration(y),
        (None, None) => {
            return Err(bad_request(
                "missing_field",
                "age",
                "missing field `age` (or `yearOfRegistration`)".into(),
            ))
        }
        (Some(_), Some(_)) => {
            return Err(bad_request(
                "ambiguous_field",
                "age",
                "give either `age` or `yearOfRegistration`, not both".into(),
            ))
        }
    };
    Ok(CarAttributes {
        vehicle_type: text_field(&body, "vehicleType")?,
        age,
        power_ps: required_int(&body, "powerPS")?,
        model: text_field(&body, "model")?,
        kilometer: required_int(&body, "kilometer")?,
        fuel_type: text_field(&body, "fuelType")?,
        brand: text_field(&body, "brand")?,
        damage_repaired: bool_field(&body, "damageRepaired")?,
        is_automatic: bool_field(&body, "isAutomatic")?,
    })
}

pub fn predict_with(loaded: &LoadedModel, body: &[u8]) -> Result<PredictionResponse, ApiError> {
    let car = parse_request(body)?;
    let x = loaded.model.encode(&car)?;
    let p = loaded
        .model
        .predict(&x)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?;
    Ok(PredictionResponse {
        price: p.estimate,
        min: p.min,
        max: p.max,
        std: p.std,
        model_version: loaded.version.clone(),
    })
}

async fn predict(State(state): State<AppState>, body: Bytes) -> Result<Json<PredictionResponse>, ApiError> {
    let loaded = state.current().ok_or_else(ApiError::no_model)?;
    predict_with(&loaded, &body).map(Json)
}

pub fn metadata_for(loaded: &LoadedModel) -> MetadataResponse {
    let schema = &loaded.model.schema;
    MetadataResponse {
        model_version: loaded.version.clone(),
        columns: schema.columns.clone(),
        vocabularies: Vocabularies {
            vehicle_type: schema.vocab.vehicle_type.values().to_vec(),
            model: schema.vocab.model.values().to_vec(),
            fuel_type: schema.vocab.fuel_type.values().to_vec(),
            brand: schema.vocab.brand.values().to_vec(),
        },
        bounds: schema.bounds,
        reference_year: schema.reference_year,
        n_trees: loaded.model.forest.trees().len(),
    }
}

async fn metadata(State(state): State<AppState>) -> Result<Json<MetadataResponse>, ApiError> {
    let loaded = state.current().ok_or_else(ApiError::no_model)?;
    Ok(Json(metadata_for(&loaded)))
}

async fn healthz(State(state): State<AppState>) -> Response {
    match state.current() {
        Some(m) => Json(serde_json::json!({ "status": "ok", "modelVersion": m.version })).into_response(),
        None => ApiError::no_model().into_response(),
    }
}
