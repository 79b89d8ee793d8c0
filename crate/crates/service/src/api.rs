use std::path::PathBuf;

use agenda_core::report::QueryReport;
use agenda_core::retrieval::{
    ascending, classify_documents, descend_threshold, nearest_words, retrieve, snap_threshold, DocLabel,
    Neighbor, RetrievalHit, DEFAULT_NEIGHBORS, DEFAULT_THRESHOLD,
};
use agenda_core::vectorizer::embed_query;
use axum::extract::rejection::{JsonRejection, PathRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::ApiError;
use crate::session::{normalize_term, replay, Draft, DraftState, Edit, Event};
use crate::{AppState, Engine};

type ApiResult<T> = Result<Json<T>, ApiError>;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/session", get(session))
        .route("/neighbors", get(neighbors))
        .route("/queries", get(list_queries).post(create_query))
        .route("/queries/{id}", get(get_query).patch(patch_query))
        .route("/queries/{id}/history", get(history))
        .route("/queries/{id}/hits", get(hits))
        .route("/queries/{id}/descend", post(descend))
        .route("/queries/{id}/accept", post(accept))
        .route("/classify/{id}", post(classify))
        .route("/documents/{doc_id}/pages/{n}", get(page))
        .fallback(|| async { ApiError::not_found("no such endpoint") })
        .with_state(state)
}

fn json_body<T>(body: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    body.map(|Json(b)| b).map_err(|e| ApiError::bad_request(e.body_text()))
}

fn query_params<T>(params: Result<Query<T>, QueryRejection>) -> Result<T, ApiError> {
    params.map(|Query(p)| p).map_err(|e| ApiError::bad_request(e.body_text()))
}

impl Engine {
    fn query_vector(&self, terms: &[String]) -> Result<Vec<f32>, ApiError> {
        Ok(embed_query(terms, &self.study.stats, &self.embeddings)?)
    }
}

#[derive(Debug, Serialize)]
struct DraftView {
    id: String,
    label: String,
    terms: Vec<String>,
    threshold: f64,
    accepted: bool,
    /// Number of events in the history.
    revision: usize,
}

impl From<&Draft> for DraftView {
    fn from(d: &Draft) -> Self {
        DraftView {
            id: d.id.clone(),
            label: d.state.label.clone(),
            terms: d.state.terms.clone(),
            threshold: d.state.threshold,
            accepted: d.state.accepted,
            revision: d.history.len(),
        }
    }
}

#[derive(Debug, Serialize)]
struct SessionView {
    session_id: String,
    corpus_id: String,
    embedding_id: String,
    documents: usize,
    paragraphs: usize,
    vocabulary: usize,
    drafts: Vec<DraftView>,
}

async fn session(State(app): State<AppState>) -> ApiResult<SessionView> {
    let e = &app.engine;
    let s = app.session();
    Ok(Json(SessionView {
        session_id: s.id().to_owned(),
        corpus_id: e.corpus_id.clone(),
        embedding_id: e.embedding_id.clone(),
        documents: e.corpus.len(),
        paragraphs: e.study.index.len(),
        vocabulary: e.embeddings.len(),
        drafts: s.drafts().map(DraftView::from).collect(),
    }))
}

#[derive(Debug, Deserialize)]
struct NeighborParams {
    #[serde(default)]
    terms: String,
    k: Option<usize>,
}

#[derive(Debug, Serialize)]
struct NeighborsView {
    terms: Vec<String>,
    k: usize,
    neighbors: Vec<Neighbor>,
}

async fn neighbors(
    State(app): State<AppState>,
    params: Result<Query<NeighborParams>, QueryRejection>,
) -> ApiResult<NeighborsView> {
    let params = query_params(params)?;
    let terms: Vec<String> = params.terms.split(',').map(normalize_term).filter(|t| !t.is_empty()).collect();
    if terms.is_empty() {
        return Err(ApiError::bad_request("terms must name at least one word"));
    }
    let k = params.k.unwrap_or(DEFAULT_NEIGHBORS);
    if k == 0 {
        return Err(ApiError::bad_request("k must be at least 1"));
    }
    let v = app.engine.query_vector(&terms)?;
    let neighbors = nearest_words(&v, &app.engine.embeddings, k, &terms)?;
    Ok(Json(NeighborsView { terms, k, neighbors }))
}

async fn list_queries(State(app): State<AppState>) -> ApiResult<Vec<DraftView>> {
    Ok(Json(app.session().drafts().map(DraftView::from).collect()))
}

#[derive(Debug, Deserialize)]
struct CreateBody {
    label: String,
    terms: Vec<String>,
    threshold: Option<f64>,
}

async fn create_query(
    State(app): State<AppState>,
    body: Result<Json<CreateBody>, JsonRejection>,
) -> Result<(StatusCode, Json<DraftView>), ApiError> {
    let body = json_body(body)?;
    let threshold = body.threshold.unwrap_or(DEFAULT_THRESHOLD);
    let state = DraftState::create(&body.label, &body.terms, threshold)?;
    app.engine.query_vector(&state.terms)?;
    let mut s = app.session();
    let id = s.create(&body.label, &body.terms, threshold, app.now())?;
    Ok((StatusCode::CREATED, Json(DraftView::from(s.draft(&id)?))))
}

async fn get_query(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<DraftView> {
    Ok(Json(DraftView::from(app.session().draft(&id)?)))
}

/// Edits accepted by PATCH; descent and acceptance have their own routes.
#[derive(Debug, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
enum Patch {
    AddTerm { term: String },
    RemoveTerm { term: String },
    SetThreshold { threshold: f64 },
}

async fn patch_query(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<Patch>, JsonRejection>,
) -> ApiResult<DraftView> {
    let edit = match json_body(body)? {
        Patch::AddTerm { term } => Edit::AddTerm { term },
        Patch::RemoveTerm { term } => Edit::RemoveTerm { term },
        Patch::SetThreshold { threshold } => Edit::SetThreshold { threshold },
    };
    let mut s = app.session();
    let mut next = s.draft(&id)?.state.clone();
    next.apply(&edit)?;
    if matches!(edit, Edit::AddTerm { .. }) {
        app.engine.query_vector(&next.terms)?;
    }
    let d = s.edit(&id, edit, app.now())?;
    Ok(Json(DraftView::from(d)))
}

#[derive(Debug, Serialize)]
struct HistoryView {
    id: String,
    events: Vec<Event>,
    /// State rebuilt from `events` alone.
    replayed: DraftState,
}

async fn history(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<HistoryView> {
    let s = app.session();
    let d = s.draft(&id)?;
    let replayed = replay(d.history.iter().map(|e| &e.edit))?;
    Ok(Json(HistoryView {
        id,
        events: d.history.clone(),
        replayed,
    }))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Order {
    #[default]
    Desc,
    Asc,
}

#[derive(Debug, Deserialize)]
struct HitsParams {
    #[serde(default)]
    order: Order,
}

#[derive(Debug, Serialize)]
struct HitsView {
    id: String,
    threshold: f64,
    order: Order,
    hits: Vec<RetrievalHit>,
}

/// Current state of a draft, copied out so the lock is not held while
/// scoring.
fn snapshot(app: &AppState, id: &str) -> Result<DraftState, ApiError> {
    Ok(app.session().draft(id)?.state.clone())
}

async fn hits(
    State(app): State<AppState>,
    Path(id): Path<String>,
    params: Result<Query<HitsParams>, QueryRejection>,
) -> ApiResult<HitsView> {
    let order = query_params(params)?.order;
    let state = snapshot(&app, &id)?;
    let q = app.engine.query_vector(&state.terms)?;
    let mut hits = retrieve(&q, state.threshold, &app.engine.study.index)?;
    if order == Order::Asc {
        hits.sort_by(ascending);
    }
    Ok(Json(HitsView {
        id,
        threshold: state.threshold,
        order,
        hits,
    }))
}

#[derive(Debug, Serialize)]
struct DescentView {
    id: String,
    from: f64,
    threshold: f64,
    /// Hits with `threshold <= similarity < from`, best first.
    admitted: Vec<RetrievalHit>,
    draft: DraftView,
}

async fn descend(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<DescentView> {
    let mut s = app.session();
    let state = s.draft(&id)?.state.clone();
    let (step, floor) = (app.config.step, app.config.floor);
    let to = snap_threshold(state.threshold - step);
    if to < floor - 1e-12 {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "floor",
            format!("the threshold cannot descend below {floor:.2}"),
        )
        .with_detail(json!({ "threshold": state.threshold, "floor": floor })));
    }
    let edit = Edit::Descend { threshold: to };
    state.clone().apply(&edit)?;
    let q = app.engine.query_vector(&state.terms)?;
    let admitted = descend_threshold(&q, state.threshold, step, to, &app.engine.study.index)?
        .nth(1)
        .map(|step| step.admitted)
        .unwrap_or_default();
    let d = s.edit(&id, edit, app.now())?;
    Ok(Json(DescentView {
        id,
        from: state.threshold,
        threshold: d.state.threshold,
        admitted,
        draft: DraftView::from(d),
    }))
}

#[derive(Debug, Serialize)]
struct ClassifyView {
    id: String,
    label: String,
    threshold: f64,
    positives: usize,
    labels: Vec<DocLabel>,
}

async fn classify(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<ClassifyView> {
    let state = snapshot(&app, &id)?;
    let q = app.engine.query_vector(&state.terms)?;
    let labels = classify_documents(&state.label, &q, state.threshold, &app.engine.study.index)?;
    Ok(Json(ClassifyView {
        id,
        label: state.label,
        threshold: state.threshold,
        positives: labels.iter().filter(|l| l.predicted).count(),
        labels,
    }))
}

#[derive(Debug, Serialize)]
struct AcceptView {
    draft: DraftView,
    query: agenda_core::retrieval::AgendaQuery,
    reports: Vec<PathBuf>,
}

async fn accept(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<AcceptView> {
    let mut s = app.session();
    let state = s.draft(&id)?.state.clone();
    state.clone().apply(&Edit::Accept)?;
    let q = app.engine.query_vector(&state.terms)?;
    let index = &app.engine.study.index;
    let hits = retrieve(&q, state.threshold, index)?;
    let labels = classify_documents(&state.label, &q, state.threshold, index)?;

    let now = app.now();
    let d = s.edit(&id, Edit::Accept, now.clone())?;
    let query = d.state.to_query(d.notes());
    let mut reports = Vec::new();
    if let Some(dir) = &app.config.reports {
        let report = QueryReport::new(&query, &hits, &labels, &app.engine.corpus_id, now);
        let (txt, json) = report.write(dir).map_err(|e| ApiError::internal(format!("{}: {e}", dir.display())))?;
        reports = vec![txt, json];
    }
    Ok(Json(AcceptView {
        draft: DraftView::from(d),
        query,
        reports,
    }))
}

#[derive(Debug, Serialize)]
struct PageView {
    doc_id: String,
    page: usize,
    page_count: usize,
    text: String,
}

async fn page(State(app): State<AppState>, path: Result<Path<(String, usize)>, PathRejection>) -> ApiResult<PageView> {
    let Path((doc_id, n)) = path.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let doc = app
        .engine
        .corpus
        .get(&doc_id)
        .ok_or_else(|| ApiError::not_found(format!("no document `{doc_id}`")))?;
    let text = doc.page(n).ok_or_else(|| {
        ApiError::not_found(format!("`{doc_id}` has no page {n}"))
            .with_detail(json!({ "page_count": doc.pages.len() }))
    })?;
    Ok(Json(PageView {
        doc_id: doc_id.clone(),
        page: n,
        page_count: doc.pages.len(),
        text: text.to_owned(),
    }))
}
