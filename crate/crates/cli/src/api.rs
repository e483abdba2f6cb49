//! HTTP/JSON service over a [`SessionManager`].

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use loopgraft_core::dynamics::{CorrelationMetric, SortOrder};
use loopgraft_core::grafting::origin_table;
use loopgraft_core::orchestration::{OrchestrationError, Role, SessionManager, SsOverride};
use loopgraft_core::structure_io::StructureError;
use loopgraft_core::{Phase, SsClass, TriageState};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::commands::parse_methods;
use crate::input::ProteinArg;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            kind: "BadRequest",
            message: message.into(),
        }
    }
}

impl From<OrchestrationError> for ApiError {
    fn from(e: OrchestrationError) -> Self {
        use OrchestrationError as E;
        let (status, kind) = match &e {
            E::UnknownSession(_) => (StatusCode::NOT_FOUND, "UnknownSession"),
            E::UnknownJob(_) => (StatusCode::NOT_FOUND, "UnknownJob"),
            E::UnknownModel(_) => (StatusCode::NOT_FOUND, "UnknownModel"),
            E::Structure(StructureError::NotFound(_)) => (StatusCode::NOT_FOUND, "NotFound"),
            E::Structure(StructureError::NetworkFailure { .. }) => (StatusCode::BAD_GATEWAY, "NetworkFailure"),
            E::Structure(_) => (StatusCode::UNPROCESSABLE_ENTITY, "Structure"),
            E::GateUnsatisfied(_) => (StatusCode::CONFLICT, "GateUnsatisfied"),
            E::StructureChanged { .. } => (StatusCode::CONFLICT, "StructureChanged"),
            E::EmptySpecs => (StatusCode::UNPROCESSABLE_ENTITY, "EmptySpecs"),
            E::InvalidPairing(_) => (StatusCode::UNPROCESSABLE_ENTITY, "InvalidPairing"),
            E::SchemaVersionMismatch { .. } => (StatusCode::BAD_REQUEST, "SchemaVersionMismatch"),
            E::Persistence(_) => (StatusCode::BAD_REQUEST, "Persistence"),
            E::InvalidJobTransition { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "InvalidJobTransition"),
            E::SecondaryStructure(_) => (StatusCode::UNPROCESSABLE_ENTITY, "SecondaryStructure"),
            E::Loop(_) => (StatusCode::UNPROCESSABLE_ENTITY, "Loop"),
            E::Geometry(_) => (StatusCode::UNPROCESSABLE_ENTITY, "Geometry"),
            E::Dynamics(_) => (StatusCode::UNPROCESSABLE_ENTITY, "Dynamics"),
            E::Graft(_) => (StatusCode::UNPROCESSABLE_ENTITY, "Graft"),
        };
        Self {
            status,
            kind,
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.status,
            Json(json!({ "error": self.kind, "message": self.message })),
        )
            .into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Runs blocking session work off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError {
        status: StatusCode::INTERNAL_SERVER_ERROR,
        kind: "Internal",
        message: e.to_string(),
    })?
}

pub fn router(manager: SessionManager) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/load", post(load_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/document", get(save_session))
        .route("/sessions/{id}/phase", post(set_phase))
        .route("/sessions/{id}/ss-override", post(ss_override))
        .route("/sessions/{id}/loops", get(get_loops).post(add_custom_loop))
        .route("/sessions/{id}/loops/{lid}/triage", post(set_triage))
        .route("/sessions/{id}/geometry", get(get_geometry))
        .route("/sessions/{id}/flexibility", get(get_flexibility))
        .route("/sessions/{id}/xcorr", get(get_xcorr))
        .route("/sessions/{id}/pairings", post(set_pairings))
        .route("/sessions/{id}/graft", post(submit_graft))
        .route("/jobs/{id}", get(get_job))
        .route("/models/{file}", get(get_model))
        .with_state(manager)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ProteinRef {
    Short(String),
    Full { pdb_id: String, chain: String },
}

impl ProteinRef {
    fn resolve(self) -> ApiResult<(String, char)> {
        let (id, chain) = match self {
            ProteinRef::Short(s) => {
                let a: ProteinArg = s.parse().map_err(ApiError::bad_request)?;
                (a.source, a.chain)
            }
            ProteinRef::Full { pdb_id, chain } => (
                pdb_id,
                crate::input::parse_chain(&chain).map_err(ApiError::bad_request)?,
            ),
        };
        Ok((id, chain))
    }
}

#[derive(Deserialize)]
struct CreateSession {
    scaffold: ProteinRef,
    insert: ProteinRef,
}

async fn create_session(
    State(m): State<SessionManager>,
    Json(body): Json<CreateSession>,
) -> ApiResult<impl IntoResponse> {
    let s = body.scaffold.resolve()?;
    let i = body.insert.resolve()?;
    let summary = blocking(move || {
        let id = m.create_session((&s.0, s.1), (&i.0, i.1))?;
        Ok(m.snapshot(&id)?.summary())
    })
    .await?;
    Ok((StatusCode::CREATED, Json(summary)))
}

async fn load_session(State(m): State<SessionManager>, body: axum::body::Bytes) -> ApiResult<impl IntoResponse> {
    let summary = blocking(move || {
        let id = m.load_session(&body)?;
        Ok(m.snapshot(&id)?.summary())
    })
    .await?;
    Ok((StatusCode::CREATED, Json(summary)))
}

async fn get_session(State(m): State<SessionManager>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    blocking(move || Ok(Json(m.snapshot(&id)?.summary()))).await
}

async fn save_session(State(m): State<SessionManager>, Path(id): Path<String>) -> ApiResult<Response> {
    let bytes = blocking(move || Ok(m.save_session(&id)?)).await?;
    Ok(([(header::CONTENT_TYPE, "application/json")], bytes).into_response())
}

#[derive(Deserialize)]
struct PhaseBody {
    phase: String,
}

async fn set_phase(
    State(m): State<SessionManager>,
    Path(id): Path<String>,
    Json(body): Json<PhaseBody>,
) -> ApiResult<Json<Value>> {
    let to: Phase = body
        .phase
        .parse()
        .map_err(|_| ApiError::bad_request(format!("unknown phase {:?}", body.phase)))?;
    blocking(move || {
        m.with_session(&id, |s| {
            s.advance_phase(to)?;
            Ok(Json(s.summary()))
        })
        .map_err(Into::into)
    })
    .await
}

#[derive(Deserialize)]
struct OverrideBody {
    role: Role,
    #[serde(default)]
    reset: bool,
    start: Option<i32>,
    end: Option<i32>,
    class: Option<String>,
}

async fn ss_override(
    State(m): State<SessionManager>,
    Path(id): Path<String>,
    Json(body): Json<OverrideBody>,
) -> ApiResult<Json<Value>> {
    let edit = if body.reset {
        None
    } else {
        let (Some(start), Some(end), Some(class)) = (body.start, body.end, body.class.as_deref()) else {
            return Err(ApiError::bad_request(
                "start, end and class are required unless reset is set",
            ));
        };
        let class: SsClass = class
            .parse()
            .map_err(|e: loopgraft_core::secondary_structure::SsError| ApiError::bad_request(e.to_string()))?;
        Some(SsOverride { start, end, class })
    };
    blocking(move || {
        m.with_session(&id, |s| {
            match edit {
                Some(o) => s.override_ss(body.role, o)?,
                None => s.reset_ss(body.role),
            }
            Ok(Json(s.summary()))
        })
        .map_err(Into::into)
    })
    .await
}

fn loops_json(s: &loopgraft_core::Session) -> Value {
    let scaffold: Vec<Value> = s
        .scaffold
        .loops
        .iter()
        .map(|(l, st)| json!({ "loop": l, "state": st, "graft_range": s.scaffold.graft_seq_range(l) }))
        .collect();
    let insert: Vec<Value> = s
        .insert
        .loops
        .loops()
        .map(|l| json!({ "loop": l, "graft_range": s.insert.graft_seq_range(l) }))
        .collect();
    json!({
        "scaffold": scaffold,
        "insert": insert,
        "scaffold_segments": s.scaffold.segments(),
        "insert_segments": s.insert.segments(),
        "candidates": s.candidate_count(),
    })
}

async fn get_loops(State(m): State<SessionManager>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    blocking(move || Ok(Json(loops_json(&m.snapshot(&id)?)))).await
}

#[derive(Deserialize)]
struct CustomLoopBody {
    #[serde(default = "scaffold_role")]
    role: Role,
    start: i32,
    end: i32,
}

fn scaffold_role() -> Role {
    Role::Scaffold
}

async fn add_custom_loop(
    State(m): State<SessionManager>,
    Path(id): Path<String>,
    Json(body): Json<CustomLoopBody>,
) -> ApiResult<impl IntoResponse> {
    let v = blocking(move || {
        m.with_session(&id, |s| {
            let lid = s.add_custom_loop(body.role, body.start, body.end)?;
            Ok(json!({ "id": lid, "loops": loops_json(s) }))
        })
        .map_err(Into::into)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(v)))
}

#[derive(Deserialize)]
struct TriageBody {
    state: TriageState,
}

async fn set_triage(
    State(m): State<SessionManager>,
    Path((id, lid)): Path<(String, String)>,
    Json(body): Json<TriageBody>,
) -> ApiResult<Json<Value>> {
    blocking(move || {
        m.with_session(&id, |s| {
            s.set_triage(&lid, body.state)?;
            Ok(Json(loops_json(s)))
        })
        .map_err(Into::into)
    })
    .await
}

async fn get_geometry(State(m): State<SessionManager>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    blocking(move || {
        m.with_session(&id, |s| {
            Ok(Json(serde_json::to_value(s.geometry()?).expect("serializable view")))
        })
        .map_err(Into::into)
    })
    .await
}

#[derive(Deserialize)]
struct FlexQuery {
    method: Option<String>,
}

async fn get_flexibility(
    State(m): State<SessionManager>,
    Path(id): Path<String>,
    Query(q): Query<FlexQuery>,
) -> ApiResult<Json<Value>> {
    let methods =
        parse_methods(q.method.as_deref().unwrap_or("all")).map_err(|e| ApiError::bad_request(e.to_string()))?;
    blocking(move || {
        m.with_session(&id, |s| {
            let view = s.flexibility(&methods)?;
            Ok(Json(serde_json::to_value(view).expect("serializable view")))
        })
        .map_err(Into::into)
    })
    .await
}

#[derive(Deserialize)]
struct XcorrQuery {
    sort: Option<String>,
    order: Option<SortOrder>,
}

async fn get_xcorr(
    State(m): State<SessionManager>,
    Path(id): Path<String>,
    Query(q): Query<XcorrQuery>,
) -> ApiResult<Json<Value>> {
    let metric: CorrelationMetric = q
        .sort
        .as_deref()
        .unwrap_or("position")
        .parse()
        .map_err(|e: loopgraft_core::dynamics::DynamicsError| ApiError::bad_request(e.to_string()))?;
    let order = q.order.unwrap_or_default();
    blocking(move || {
        m.with_session(&id, |s| {
            let view = s.correlation(metric, order)?;
            Ok(Json(serde_json::to_value(view).expect("serializable view")))
        })
        .map_err(Into::into)
    })
    .await
}

#[derive(Deserialize)]
struct PairRef {
    scaffold_loop_id: String,
    insert_loop_id: String,
}

#[derive(Deserialize)]
struct PairingsBody {
    #[serde(default)]
    pairs: Vec<PairRef>,
    /// Accept the greedy default pairing instead of `pairs`.
    #[serde(default)]
    default: bool,
}

async fn set_pairings(
    State(m): State<SessionManager>,
    Path(id): Path<String>,
    Json(body): Json<PairingsBody>,
) -> ApiResult<Json<Value>> {
    blocking(move || {
        m.with_session(&id, |s| {
            if body.default {
                s.accept_default_pairings()?;
            } else {
                let pairs: Vec<(String, String)> = body
                    .pairs
                    .into_iter()
                    .map(|p| (p.scaffold_loop_id, p.insert_loop_id))
                    .collect();
                s.set_pairings(&pairs)?;
            }
            Ok(Json(json!({ "pairings": s.pairings, "session": s.summary() })))
        })
        .map_err(Into::into)
    })
    .await
}

#[derive(Deserialize, Default)]
struct GraftBody {
    window: Option<usize>,
}

async fn submit_graft(
    State(m): State<SessionManager>,
    Path(id): Path<String>,
    body: Option<Json<GraftBody>>,
) -> ApiResult<impl IntoResponse> {
    let window = body.map(|b| b.0).unwrap_or_default().window;
    let job = blocking(move || Ok(m.submit_graft_job(&id, None, window)?)).await?;
    Ok((StatusCode::ACCEPTED, Json(job)))
}

async fn get_job(State(m): State<SessionManager>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let job = m.job(&id)?;
    let models: Vec<Value> = job
        .ranked_model_ids
        .iter()
        .filter_map(|mid| m.model(mid).ok())
        .map(|sm| {
            json!({
                "id": sm.model.id,
                "label": sm.model.spec.label(),
                "scores": sm.model.scores,
                "origin_mask": sm.model.origin_mask,
            })
        })
        .collect();
    let mut v = serde_json::to_value(&job).expect("serializable job");
    v["models"] = Value::Array(models);
    Ok(Json(v))
}

async fn get_model(State(m): State<SessionManager>, Path(file): Path<String>) -> ApiResult<Response> {
    if let Some(id) = file.strip_suffix(".pdb") {
        let sm = m.model(id)?;
        return Ok(([(header::CONTENT_TYPE, "chemical/x-pdb")], sm.model.to_pdb()).into_response());
    }
    if let Some(id) = file.strip_suffix(".csv") {
        let sm = m.model(id)?;
        return Ok(([(header::CONTENT_TYPE, "text/csv")], origin_table(&sm.model)).into_response());
    }
    Err(ApiError::from(OrchestrationError::UnknownModel(file)))
}
