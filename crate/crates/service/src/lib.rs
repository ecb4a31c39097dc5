//! HTTP access to a finished analysis: the factor map, the concept
//! hierarchy, and term to segment lookups.
//!
//! A bundle is a directory holding `config.json`, `embedding.json`,
//! `hierarchy.json`, `frequency.tsv` and `segments.json`, as written by
//! `ultratext ontology`. It is loaded and checked once; requests only read.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use serde::{Deserialize, Serialize};
use tower_http::cors::CorsLayer;
use ultratext::corpus::{FrequencyMatrix, MatrixMode};
use ultratext::embed::{EmbeddingJson, FactorEmbedding};
use ultratext::ontology::ConceptHierarchy;
use ultratext::pipeline::{ConfigRecord, SegmentRecord, SegmentsFile};

#[derive(Debug, thiserror::Error)]
pub enum BundleError {
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Malformed { path: PathBuf, msg: String },
    #[error("inconsistent bundle: {0}")]
    Inconsistent(String),
}

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct MapTerm {
    pub term: String,
    pub x: f64,
    pub y: f64,
    /// Depth in the concept hierarchy, absent for terms outside it.
    pub dominance_level: Option<usize>,
}

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct MapSegment {
    pub id: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct MapView {
    pub terms: Vec<MapTerm>,
    pub segments: Vec<MapSegment>,
}

#[derive(Serialize, Debug, Clone, PartialEq, Eq)]
pub struct SegmentCount {
    pub segment_id: String,
    pub count: u64,
}

/// A loaded bundle. Responses are rendered up front so repeated requests
/// return the same bytes.
#[derive(Debug)]
pub struct Bundle {
    config_hash: String,
    map: Vec<u8>,
    hierarchy: Vec<u8>,
    term_segments: HashMap<String, Vec<u8>>,
    segments: HashMap<String, Vec<u8>>,
}

#[derive(Deserialize)]
struct Stamp {
    config_hash: String,
}

fn read(path: &Path) -> Result<String, BundleError> {
    fs::read_to_string(path).map_err(|source| BundleError::Read {
        path: path.to_path_buf(),
        source,
    })
}

fn parse<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T, BundleError> {
    serde_json::from_str(text).map_err(|e| BundleError::Malformed {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

fn json_bytes<T: Serialize>(v: &T) -> Vec<u8> {
    serde_json::to_vec(v).expect("response serializes")
}

fn coord(coords: &[f64], k: usize) -> f64 {
    coords.get(k).copied().unwrap_or(0.0)
}

impl Bundle {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self, BundleError> {
        let dir = dir.as_ref();
        let p = |name: &str| dir.join(name);

        let config_path = p("config.json");
        let config: ConfigRecord = parse(&config_path, &read(&config_path)?)?;
        let hash = config.config_hash;

        let stamped = |name: &str| -> Result<(PathBuf, String), BundleError> {
            let path = p(name);
            let text = read(&path)?;
            let stamp: Stamp = parse(&path, &text)?;
            if stamp.config_hash != hash {
                return Err(BundleError::Inconsistent(format!(
                    "{name} was produced by a different configuration"
                )));
            }
            Ok((path, text))
        };
        let (emb_path, emb_text) = stamped("embedding.json")?;
        let emb_json: EmbeddingJson = parse(&emb_path, &emb_text)?;
        FactorEmbedding::from_json(&emb_json).map_err(|e| BundleError::Malformed {
            path: emb_path.clone(),
            msg: e.to_string(),
        })?;
        let (h_path, h_text) = stamped("hierarchy.json")?;
        let hierarchy: ConceptHierarchy = parse(&h_path, &h_text)?;
        let (s_path, s_text) = stamped("segments.json")?;
        let segments: SegmentsFile = parse(&s_path, &s_text)?;

        let f_path = p("frequency.tsv");
        let freq = FrequencyMatrix::from_tsv(&read(&f_path)?, MatrixMode::Counts).map_err(|e| {
            BundleError::Malformed {
                path: f_path.clone(),
                msg: e.to_string(),
            }
        })?;

        let seg_ids: Vec<&str> = segments.segments.iter().map(|s| s.id.as_str()).collect();
        if freq
            .row_ids
            .iter()
            .map(String::as_str)
            .ne(seg_ids.iter().copied())
        {
            return Err(BundleError::Inconsistent(
                "frequency rows do not match segments".into(),
            ));
        }
        let seg_set: HashSet<&str> = seg_ids.iter().copied().collect();
        if seg_set.len() != seg_ids.len() {
            return Err(BundleError::Inconsistent("duplicate segment ids".into()));
        }
        if let Some(r) = emb_json
            .rows
            .iter()
            .find(|r| !seg_set.contains(r.id.as_str()))
        {
            return Err(BundleError::Inconsistent(format!(
                "embedded segment `{}` has no text",
                r.id
            )));
        }
        let freq_terms: HashSet<&str> = freq.col_ids.iter().map(String::as_str).collect();
        if let Some(c) = emb_json
            .cols
            .iter()
            .find(|c| !freq_terms.contains(c.id.as_str()))
        {
            return Err(BundleError::Inconsistent(format!(
                "embedded term `{}` is missing from the frequency table",
                c.id
            )));
        }
        let emb_terms: HashSet<&str> = emb_json.cols.iter().map(|c| c.id.as_str()).collect();
        for node in &hierarchy.nodes {
            if let Some(m) = node
                .members
                .iter()
                .find(|m| !emb_terms.contains(m.as_str()))
            {
                return Err(BundleError::Inconsistent(format!(
                    "hierarchy term `{m}` is not on the map"
                )));
            }
        }

        let depths = hierarchy.term_depths();
        let map = MapView {
            terms: emb_json
                .cols
                .iter()
                .map(|c| MapTerm {
                    term: c.id.clone(),
                    x: coord(&c.coords, 0),
                    y: coord(&c.coords, 1),
                    dominance_level: depths.get(&c.id).copied(),
                })
                .collect(),
            segments: emb_json
                .rows
                .iter()
                .map(|r| MapSegment {
                    id: r.id.clone(),
                    x: coord(&r.coords, 0),
                    y: coord(&r.coords, 1),
                })
                .collect(),
        };

        let mut term_segments = HashMap::new();
        for (j, term) in freq.col_ids.iter().enumerate() {
            let mut ranked: Vec<(usize, u64)> = (0..freq.nrows())
                .map(|i| (i, freq.values[(i, j)].round() as u64))
                .filter(|&(_, c)| c > 0)
                .collect();
            ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            let list: Vec<SegmentCount> = ranked
                .into_iter()
                .map(|(i, count)| SegmentCount {
                    segment_id: freq.row_ids[i].clone(),
                    count,
                })
                .collect();
            term_segments.insert(term.clone(), json_bytes(&list));
        }

        #[derive(Serialize)]
        struct SegmentText<'a> {
            id: &'a str,
            text: &'a str,
        }
        let segments = segments
            .segments
            .iter()
            .map(|s: &SegmentRecord| {
                (
                    s.id.clone(),
                    json_bytes(&SegmentText {
                        id: &s.id,
                        text: &s.text,
                    }),
                )
            })
            .collect();

        Ok(Bundle {
            map: json_bytes(&map),
            hierarchy: json_bytes(&hierarchy),
            config_hash: hash,
            term_segments,
            segments,
        })
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }
}

fn json_response(status: StatusCode, body: Vec<u8>) -> Response {
    (
        status,
        [(header::CONTENT_TYPE, "application/json; charset=utf-8")],
        body,
    )
        .into_response()
}

fn ok(body: &[u8]) -> Response {
    json_response(StatusCode::OK, body.to_vec())
}

fn not_found(msg: String) -> Response {
    #[derive(Serialize)]
    struct Body {
        error: String,
    }
    json_response(StatusCode::NOT_FOUND, json_bytes(&Body { error: msg }))
}

async fn map(State(b): State<Arc<Bundle>>) -> Response {
    ok(&b.map)
}

async fn hierarchy(State(b): State<Arc<Bundle>>) -> Response {
    ok(&b.hierarchy)
}

async fn term_segments(State(b): State<Arc<Bundle>>, UrlPath(term): UrlPath<String>) -> Response {
    match b.term_segments.get(&term) {
        Some(body) => ok(body),
        None => not_found(format!("unknown term `{term}`")),
    }
}

async fn segment(State(b): State<Arc<Bundle>>, UrlPath(id): UrlPath<String>) -> Response {
    match b.segments.get(&id) {
        Some(body) => ok(body),
        None => not_found(format!("unknown segment `{id}`")),
    }
}

async fn health(State(b): State<Arc<Bundle>>) -> Response {
    #[derive(Serialize)]
    struct Body<'a> {
        ok: bool,
        config_hash: &'a str,
    }
    ok(&json_bytes(&Body {
        ok: true,
        config_hash: &b.config_hash,
    }))
}

pub fn router(bundle: Arc<Bundle>) -> Router {
    Router::new()
        .route("/map", get(map))
        .route("/hierarchy", get(hierarchy))
        .route("/terms/{term}/segments", get(term_segments))
        .route("/segments/{id}", get(segment))
        .route("/health", get(health))
        .layer(CorsLayer::permissive())
        .with_state(bundle)
}

/// Loads the bundle, then serves it until the process is stopped.
pub async fn serve(dir: impl AsRef<Path>, port: u16) -> Result<(), Box<dyn std::error::Error>> {
    let bundle = Arc::new(Bundle::load(dir)?);
    let addr = SocketAddr::from(([127, 0, 0, 1], port));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("serving on http://{}", listener.local_addr()?);
    axum::serve(listener, router(bundle)).await?;
    Ok(())
}
