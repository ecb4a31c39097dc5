//! End-to-end runs: configuration, the analysis steps shared by every
//! command, and the files each command writes.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{
    build_frequency_matrix, build_support, load_and_segment, reduce_document, Corpus,
    FrequencyMatrix, MatrixMode, ReducedDocument, SegmentSet, Segmentation, SupportSet,
    SupportSource,
};
use crate::cvnc::{recode_distances, CodedDistanceMatrix};
use crate::dissimilarity::Dissimilarity;
use crate::embed::{correspondence_analysis, double_profiles, FactorEmbedding};
use crate::error::{Error, Result};
use crate::hclust::{agglomerate, Criterion, Dendrogram};
use crate::ontology::{
    canonicalize, derive_concept_hierarchy, extract_subsumption_triples, ConceptHierarchy,
    Dominance, HierarchyOptions, SubsumptionTriple,
};
use crate::select::{closest_term_per_row, nearest_terms, ColumnCoords, NearestTermsResult};
use crate::umetry::{
    resolve_terms, scan_global, scan_linear, AngleClassifier, PerTripletCoded, TripletClassifier,
    UltrametricityReport, ANGLE_TOLERANCE, DEFAULT_BUDGET,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SupportSpec {
    File { path: PathBuf },
    Heuristic { min_frequency: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifierKind {
    /// Global-mean CvNC codes.
    #[default]
    Coded,
    /// CvNC codes against each triangle's own mean.
    PerTriplet,
    /// Interior angles with a tolerance.
    Angle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanKind {
    #[default]
    Global,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClusterMetric {
    /// Recoded CvNC distances.
    #[default]
    Cvnc,
    /// Squared Euclidean distances in the factor space.
    SqEuclidean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TermSelection {
    #[default]
    All,
    /// The closest term to each segment.
    Nearest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n: usize,
    pub dims: usize,
}

/// Every knob of a run. Validated before any work and written next to
/// the outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus: Vec<PathBuf>,
    pub segmentation: Segmentation,
    pub support: SupportSpec,
    pub matrix_mode: MatrixMode,
    pub doubling: bool,
    pub classifier: ClassifierKind,
    pub angle_tolerance: f64,
    pub scan: ScanKind,
    pub per_document: bool,
    pub budget: u64,
    pub seed: u64,
    pub criterion: Criterion,
    pub metric: ClusterMetric,
    pub terms: TermSelection,
    pub dominance: Dominance,
    pub k: usize,
    pub column_coords: ColumnCoords,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            corpus: Vec::new(),
            segmentation: Segmentation::ByDocument,
            support: SupportSpec::Heuristic { min_frequency: 3 },
            matrix_mode: MatrixMode::Counts,
            doubling: false,
            classifier: ClassifierKind::Coded,
            angle_tolerance: ANGLE_TOLERANCE,
            scan: ScanKind::Global,
            per_document: false,
            budget: DEFAULT_BUDGET,
            seed: 0,
            criterion: Criterion::Single,
            metric: ClusterMetric::Cvnc,
            terms: TermSelection::All,
            dominance: Dominance::LaterDominates,
            k: 5,
            column_coords: ColumnCoords::Principal,
            synthetic: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if let Some(s) = self.synthetic {
            if s.n < 3 {
                return bad(format!("synthetic point count {} is below 3", s.n));
            }
            if s.dims == 0 {
                return bad("synthetic dimension must be at least 1".into());
            }
        } else {
            if self.corpus.is_empty() {
                return bad("no corpus given".into());
            }
            for p in &self.corpus {
                if !p.exists() {
                    return bad(format!("input {} does not exist", p.display()));
                }
            }
            if let SupportSpec::File { path } = &self.support {
                if !path.is_file() {
                    return bad(format!("support list {} does not exist", path.display()));
                }
            }
        }
        if let Segmentation::FixedWordCount(0) = self.segmentation {
            return bad("fixed word count must be at least 1".into());
        }
        if self.budget == 0 {
            return bad("budget must be at least 1".into());
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if !(self.angle_tolerance.is_finite() && self.angle_tolerance >= 0.0) {
            return bad("angle tolerance must be a non-negative number".into());
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, in hex.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&json);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Everything derived from the text up to the factor embedding.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub corpus: Corpus,
    pub segments: SegmentSet,
    pub support: SupportSet,
    pub matrix: FrequencyMatrix,
    /// Rows are segments, columns are terms.
    pub embedding: FactorEmbedding,
}

impl Analysis {
    pub fn reduced(&self) -> ReducedDocument {
        reduce_document(&self.corpus, &self.support)
    }
}

/// Doubles term profiles over segments so that every term weighs the same,
/// then reports the result with segments as rows and terms as columns.
/// Complement columns are not reported.
fn doubled_embedding(matrix: &FrequencyMatrix) -> Result<FactorEmbedding> {
    let zero_terms: HashSet<usize> = matrix.zero_cols().into_iter().collect();
    let keep: Vec<usize> = (0..matrix.ncols())
        .filter(|j| !zero_terms.contains(j))
        .collect();
    let transposed = FrequencyMatrix::new(
        keep.iter().map(|&j| matrix.col_ids[j].clone()).collect(),
        matrix.row_ids.clone(),
        DMatrix::from_fn(keep.len(), matrix.nrows(), |a, i| {
            matrix.values[(i, keep[a])]
        }),
        matrix.mode,
    )?;
    let e = correspondence_analysis(&double_profiles(&transposed)?)?;
    let originals: HashSet<&str> = matrix.row_ids.iter().map(String::as_str).collect();
    let segs: Vec<usize> = (0..e.col_ids.len())
        .filter(|&j| originals.contains(e.col_ids[j].as_str()))
        .collect();
    let mut dropped_rows: Vec<String> = matrix
        .row_ids
        .iter()
        .filter(|id| !segs.iter().any(|&j| &e.col_ids[j] == *id))
        .cloned()
        .collect();
    dropped_rows.sort_by_key(|id| matrix.row_ids.iter().position(|r| r == id));
    Ok(FactorEmbedding {
        row_ids: segs.iter().map(|&j| e.col_ids[j].clone()).collect(),
        col_ids: e.row_ids.clone(),
        row_coords: DMatrix::from_fn(segs.len(), e.rank(), |a, k| e.col_coords[(segs[a], k)]),
        col_coords: e.row_coords.clone(),
        eigenvalues: e.eigenvalues.clone(),
        row_masses: segs.iter().map(|&j| e.col_masses[j]).collect(),
        col_masses: e.row_masses.clone(),
        dropped_rows,
        dropped_cols: {
            let mut z: Vec<usize> = zero_terms.into_iter().collect();
            z.sort_unstable();
            z.into_iter().map(|j| matrix.col_ids[j].clone()).collect()
        },
    })
}

pub fn analyse(config: &PipelineConfig) -> Result<Analysis> {
    let (corpus, segments) = load_and_segment(&config.corpus, config.segmentation)?;
    let source = match &config.support {
        SupportSpec::File { path } => SupportSource::File(path.clone()),
        SupportSpec::Heuristic { min_frequency } => SupportSource::Heuristic {
            min_frequency: *min_frequency,
        },
    };
    let support = build_support(&source, &corpus)?;
    let matrix = build_frequency_matrix(&segments, &support, config.matrix_mode);
    let embedding = if config.doubling {
        doubled_embedding(&matrix)?
    } else {
        correspondence_analysis(&matrix)?
    };
    Ok(Analysis {
        corpus,
        segments,
        support,
        matrix,
        embedding,
    })
}

/// Points to classify: ids with coordinates.
struct PointSet {
    ids: Vec<String>,
    coords: DMatrix<f64>,
}

impl PointSet {
    fn terms(embedding: &FactorEmbedding) -> Self {
        PointSet {
            ids: embedding.col_ids.clone(),
            coords: embedding.col_coords.clone(),
        }
    }

    fn subset(&self, ids: &[String]) -> Result<Self> {
        let idx = resolve_terms(ids.iter().map(String::as_str), &self.ids)?;
        Ok(PointSet {
            ids: ids.to_vec(),
            coords: DMatrix::from_fn(idx.len(), self.coords.ncols(), |a, k| {
                self.coords[(idx[a], k)]
            }),
        })
    }

    fn synthetic(spec: SyntheticSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coords = DMatrix::from_fn(spec.n, spec.dims, |_, _| rng.random::<f64>());
        PointSet {
            ids: (0..spec.n).map(|i| format!("p{i}")).collect(),
            coords,
        }
    }

    fn squared(&self) -> Result<Dissimilarity> {
        Dissimilarity::squared_euclidean(self.ids.clone(), &self.coords)
    }
}

fn with_classifier<T>(
    points: &PointSet,
    config: &PipelineConfig,
    f: impl FnOnce(&dyn TripletClassifier) -> Result<T>,
) -> Result<T> {
    match config.classifier {
        ClassifierKind::Coded => f(&recode_distances(&points.squared()?, 2)?),
        ClassifierKind::PerTriplet => f(&PerTripletCoded {
            squared: &points.squared()?,
        }),
        ClassifierKind::Angle => f(&AngleClassifier::new(
            &points.coords,
            config.angle_tolerance,
        )),
    }
}

fn fingerprint_points(
    points: &PointSet,
    sequence: Option<&[usize]>,
    config: &PipelineConfig,
) -> Result<UltrametricityReport> {
    with_classifier(points, config, |c| match sequence {
        Some(seq) => scan_linear(seq, c),
        None => scan_global(c, config.budget, config.seed),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentReport {
    pub id: String,
    pub report: UltrametricityReport,
}

/// The corpus-level report and, when asked, one per document.
#[derive(Debug, Clone, PartialEq)]
pub struct Fingerprint {
    pub report: UltrametricityReport,
    pub documents: Vec<DocumentReport>,
}

impl Fingerprint {
    pub fn table(&self) -> String {
        let mut out = String::from("text\ttotal\tisosceles%\tequilateral%\tnonUM%\n");
        out.push_str(&self.report.table_row("(all)"));
        out.push('\n');
        for d in &self.documents {
            out.push_str(&d.report.table_row(&d.id));
            out.push('\n');
        }
        out
    }
}

pub fn fingerprint(config: &PipelineConfig) -> Result<Fingerprint> {
    if let Some(spec) = config.synthetic {
        let points = PointSet::synthetic(spec, config.seed);
        let sequence: Option<Vec<usize>> = match config.scan {
            ScanKind::Global => None,
            ScanKind::Linear => {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
                Some((0..spec.n).map(|_| rng.random_range(0..spec.n)).collect())
            }
        };
        return Ok(Fingerprint {
            report: fingerprint_points(&points, sequence.as_deref(), config)?,
            documents: Vec::new(),
        });
    }
    let analysis = analyse(config)?;
    let all = PointSet::terms(&analysis.embedding);
    let reduced = analysis.reduced();
    let report = match config.scan {
        ScanKind::Global => fingerprint_points(&all, None, config)?,
        ScanKind::Linear => {
            let seq = resolve_terms(reduced.terms(), &all.ids)?;
            fingerprint_points(&all, Some(&seq), config)?
        }
    };
    let mut documents = Vec::new();
    if config.per_document {
        for doc in analysis.corpus.documents() {
            let doc_reduced: Vec<&str> = doc
                .tokens
                .iter()
                .map(|t| t.text.as_str())
                .filter(|t| analysis.support.contains(t))
                .collect();
            let mut used: Vec<String> = Vec::new();
            for t in &doc_reduced {
                if !used.iter().any(|u| u == t) {
                    used.push(t.to_string());
                }
            }
            if used.len() < 3 {
                continue;
            }
            let points = all.subset(&used)?;
            let report = match config.scan {
                ScanKind::Global => fingerprint_points(&points, None, config)?,
                ScanKind::Linear => {
                    let seq = resolve_terms(doc_reduced.iter().copied(), &points.ids)?;
                    if seq.len() < 3 {
                        continue;
                    }
                    fingerprint_points(&points, Some(&seq), config)?
                }
            };
            documents.push(DocumentReport {
                id: doc.id.clone(),
                report,
            });
        }
    }
    Ok(Fingerprint { report, documents })
}

fn selected_terms(analysis: &Analysis, config: &PipelineConfig) -> Result<PointSet> {
    let all = PointSet::terms(&analysis.embedding);
    match config.terms {
        TermSelection::All => Ok(all),
        TermSelection::Nearest => all.subset(&closest_term_per_row(
            &analysis.embedding,
            config.column_coords,
        )?),
    }
}

fn cluster_points(points: &PointSet, config: &PipelineConfig) -> Result<Dendrogram> {
    let d = match config.metric {
        ClusterMetric::Cvnc => recode_distances(&points.squared()?, 2)?.to_dissimilarity(),
        ClusterMetric::SqEuclidean => points.squared()?,
    };
    agglomerate(&d, config.criterion, None)
}

pub fn cluster(analysis: &Analysis, config: &PipelineConfig) -> Result<Dendrogram> {
    cluster_points(&selected_terms(analysis, config)?, config)
}

pub fn ontology(analysis: &Analysis, config: &PipelineConfig) -> Result<ConceptHierarchy> {
    let tree = canonicalize(&cluster(analysis, config)?);
    derive_concept_hierarchy(
        &tree,
        HierarchyOptions {
            dominance: config.dominance,
            level_tolerance: 0.0,
        },
    )
}

/// The coded matrix over all embedded terms.
pub fn coded_terms(analysis: &Analysis) -> Result<CodedDistanceMatrix> {
    recode_distances(&PointSet::terms(&analysis.embedding).squared()?, 2)
}

pub fn triples(analysis: &Analysis) -> Result<Vec<SubsumptionTriple>> {
    let coded = coded_terms(analysis)?;
    let reduced = analysis.reduced();
    let seq: Vec<&str> = reduced.terms().collect();
    extract_subsumption_triples(&seq, &coded)
}

pub fn nearest(
    analysis: &Analysis,
    config: &PipelineConfig,
    segment: Option<&str>,
) -> Result<Vec<NearestTermsResult>> {
    match segment {
        Some(id) => Ok(vec![nearest_terms(
            &analysis.embedding,
            id,
            config.k,
            config.column_coords,
        )?]),
        None => analysis
            .embedding
            .row_ids
            .iter()
            .map(|id| nearest_terms(&analysis.embedding, id, config.k, config.column_coords))
            .collect(),
    }
}

/// A JSON body with the run's config hash as its first field.
#[derive(Serialize)]
pub struct Stamped<'a, T: Serialize> {
    pub config_hash: &'a str,
    #[serde(flatten)]
    pub body: &'a T,
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes files into one output directory, stamping JSON with the config
/// hash.
pub struct Writer {
    dir: PathBuf,
    hash: String,
    config: PipelineConfig,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConfigRecord {
    pub config_hash: String,
    pub config: PipelineConfig,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SegmentRecord {
    pub id: String,
    pub document: String,
    pub ordinal: usize,
    pub text: String,
}

impl Writer {
    pub fn new(dir: impl Into<PathBuf>, config: &PipelineConfig) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Writer {
            dir,
            hash: config.hash(),
            config: config.clone(),
        })
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn config(&self) -> Result<PathBuf> {
        let rec = ConfigRecord {
            config_hash: self.hash.clone(),
            config: self.config.clone(),
        };
        write(&self.dir, "config.json", &to_json_bytes(&rec)?)
    }

    pub fn json<T: Serialize>(&self, name: &str, body: &T) -> Result<PathBuf> {
        let stamped = Stamped {
            config_hash: &self.hash,
            body,
        };
        write(&self.dir, name, &to_json_bytes(&stamped)?)
    }

    pub fn text(&self, name: &str, text: &str) -> Result<PathBuf> {
        write(&self.dir, name, text.as_bytes())
    }

    pub fn json_lines<T: Serialize>(&self, name: &str, items: &[T]) -> Result<PathBuf> {
        let mut out = Vec::new();
        for it in items {
            serde_json::to_writer(&mut out, it)?;
            out.push(b'\n');
        }
        write(&self.dir, name, &out)
    }

    /// Everything the service needs to browse a run.
    pub fn bundle(&self, analysis: &Analysis, hierarchy: &ConceptHierarchy) -> Result<()> {
        self.config()?;
        self.json("embedding.json", &analysis.embedding.to_json())?;
        self.json("hierarchy.json", hierarchy)?;
        self.text("frequency.tsv", &analysis.matrix.to_tsv())?;
        let segments: Vec<SegmentRecord> = analysis
            .segments
            .segments
            .iter()
            .map(|s| SegmentRecord {
                id: s.id.clone(),
                document: s.document.clone(),
                ordinal: s.ordinal,
                text: s.text.clone(),
            })
            .collect();
        self.json("segments.json", &SegmentsFile { segments })?;
        Ok(())
    }
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct SegmentsFile {
    pub segments: Vec<SegmentRecord>,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct ReportsFile {
    pub documents: Vec<DocumentReport>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus_dir() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        let texts = [
            "The robot moved the arm. The robot learned a task from the arm sensor.",
            "A network of agents shares a task. Agents negotiate and the network adapts.",
            "The sensor reads the arm and the network. The robot and agents cooperate.",
            "Learning agents build a model. The model guides the robot and the task.",
        ];
        for (i, t) in texts.iter().enumerate() {
            fs::write(dir.path().join(format!("d{i}.txt")), t).unwrap();
        }
        fs::write(
            dir.path().join("nouns.list"),
            "robot\narm\ntask\nsensor\nnetwork\nagents\nmodel\n",
        )
        .unwrap();
        dir
    }

    fn config(dir: &Path) -> PipelineConfig {
        PipelineConfig {
            corpus: vec![dir.to_path_buf()],
            support: SupportSpec::File {
                path: dir.join("nouns.list"),
            },
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn validation_catches_missing_inputs() {
        let mut c = PipelineConfig::default();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        c.corpus = vec!["/no/such/dir".into()];
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let ok = PipelineConfig {
            synthetic: Some(SyntheticSpec { n: 10, dims: 3 }),
            ..PipelineConfig::default()
        };
        assert!(ok.validate().is_ok());
    }

    #[test]
    fn hash_changes_with_config() {
        let a = PipelineConfig::default();
        let b = PipelineConfig {
            seed: 1,
            ..a.clone()
        };
        assert_eq!(a.hash(), a.clone().hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn small_corpus_runs_through() {
        let dir = corpus_dir();
        let cfg = config(dir.path());
        cfg.validate().unwrap();
        let a = analyse(&cfg).unwrap();
        assert_eq!(a.matrix.nrows(), 4);
        assert_eq!(a.embedding.rank(), 3);
        let fp = fingerprint(&cfg).unwrap();
        assert_eq!(fp.report.total, 35);
        let h = ontology(&a, &cfg).unwrap();
        let mut members: Vec<String> = h.nodes.iter().flat_map(|n| n.members.clone()).collect();
        members.sort();
        let mut expected = a.embedding.col_ids.clone();
        expected.sort();
        assert_eq!(members, expected);
        triples(&a).unwrap();
        assert_eq!(nearest(&a, &cfg, None).unwrap().len(), 4);
    }

    #[test]
    fn doubling_keeps_segments_as_rows() {
        let dir = corpus_dir();
        let cfg = PipelineConfig {
            doubling: true,
            ..config(dir.path())
        };
        let a = analyse(&cfg).unwrap();
        assert_eq!(a.embedding.row_ids, ["d0", "d1", "d2", "d3"]);
        assert_eq!(a.embedding.col_ids.len(), 7);
        let masses = &a.embedding.col_masses;
        assert!(masses.iter().all(|m| (m - masses[0]).abs() < 1e-12));
    }

    #[test]
    fn synthetic_fingerprint_counts() {
        let cfg = PipelineConfig {
            synthetic: Some(SyntheticSpec { n: 30, dims: 4 }),
            ..PipelineConfig::default()
        };
        let fp = fingerprint(&cfg).unwrap();
        assert_eq!(fp.report.total, 4060);
        let linear = fingerprint(&PipelineConfig {
            scan: ScanKind::Linear,
            ..cfg
        })
        .unwrap();
        assert_eq!(linear.report.total, 28);
    }
}
