use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ultratext::corpus::{MatrixMode, Segmentation};
use ultratext::hclust::Criterion;
use ultratext::ontology::Dominance;
use ultratext::pipeline::{
    self, ClassifierKind, ClusterMetric, PipelineConfig, ReportsFile, ScanKind, SupportSpec,
    SyntheticSpec, TermSelection, Writer,
};
use ultratext::select::ColumnCoords;
use ultratext::umetry::{ANGLE_TOLERANCE, DEFAULT_BUDGET};
use ultratext::Error;

#[derive(Parser)]
#[command(
    name = "ultratext",
    version,
    about = "Ultrametric fingerprints and concept hierarchies for text"
)]
struct Cli {
    /// Worker threads. Defaults to all cores.
    #[arg(long, global = true, env = "ULTRATEXT_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ultrametricity report over term triangles.
    Fingerprint(RunArgs),
    /// Correspondence analysis of the segment by term table.
    Embed(RunArgs),
    /// Dendrogram of the selected terms.
    Cluster(RunArgs),
    /// Concept hierarchy plus the bundle read by `serve`.
    Ontology(RunArgs),
    /// Subsumption triples from isosceles windows of the reduced text.
    Triples(RunArgs),
    /// Closest terms to each segment.
    Nearest {
        #[command(flatten)]
        run: RunArgs,
        /// Only this segment.
        #[arg(long = "segment-id")]
        segment_id: Option<String>,
    },
    /// Serve a bundle over HTTP.
    Serve {
        /// Directory written by `ontology`.
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Global,
    Linear,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassifierArg {
    Coded,
    PerTriplet,
    Angle,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Cvnc,
    Sqeuclidean,
}

#[derive(Clone, Copy, ValueEnum)]
enum TermsArg {
    All,
    Nearest,
}

#[derive(Clone, Copy, ValueEnum)]
enum DominanceArg {
    Later,
    Earlier,
}

#[derive(Clone, Copy, ValueEnum)]
enum CoordsArg {
    Principal,
    Standard,
}

#[derive(Args)]
struct RunArgs {
    /// Text files or directories of .txt files.
    #[arg(long, num_args = 1.., value_name = "PATH")]
    corpus: Vec<PathBuf>,
    /// A single text file; same as --corpus.
    #[arg(long, value_name = "FILE")]
    text: Vec<PathBuf>,
    /// Noun list, one term per line. Without it a suffix and frequency
    /// heuristic picks terms.
    #[arg(long, value_name = "FILE")]
    support: Option<PathBuf>,
    /// Minimum frequency for the heuristic support.
    #[arg(long, default_value_t = 3)]
    min_frequency: usize,
    /// by-document, by-line or fixed:K.
    #[arg(long, default_value = "by-document")]
    segment: Segmentation,
    /// counts or presence.
    #[arg(long, default_value = "counts")]
    matrix: MatrixMode,
    /// Double term profiles so every term weighs the same.
    #[arg(long)]
    doubling: bool,
    #[arg(long, value_enum, default_value_t = ClassifierArg::Coded)]
    classifier: ClassifierArg,
    /// Radians, for the angle classifier.
    #[arg(long, default_value_t = ANGLE_TOLERANCE)]
    angle_tolerance: f64,
    /// Scan all triangles or successive windows of the reduced text.
    #[arg(long, value_enum, default_value_t = ModeArg::Global)]
    mode: ModeArg,
    /// Also report each document separately.
    #[arg(long)]
    per_document: bool,
    /// Above this many triangles the global scan samples.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// single, complete or ward.
    #[arg(long, default_value = "single")]
    criterion: Criterion,
    #[arg(long, value_enum, default_value_t = MetricArg::Cvnc)]
    metric: MetricArg,
    /// Cluster all terms or only the closest term of each segment.
    #[arg(long, value_enum, default_value_t = TermsArg::All)]
    terms: TermsArg,
    #[arg(long, value_enum, default_value_t = DominanceArg::Later)]
    dominance: DominanceArg,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, value_enum, default_value_t = CoordsArg::Principal)]
    column_coords: CoordsArg,
    /// Uniform random points instead of a corpus.
    #[arg(long)]
    synthetic: bool,
    /// Synthetic point count.
    #[arg(long, default_value_t = 231)]
    n: usize,
    /// Synthetic dimension.
    #[arg(long, default_value_t = 10)]
    dims: usize,
    /// Output directory.
    #[arg(long, short, default_value = "out")]
    out: PathBuf,
}

impl RunArgs {
    fn config(&self) -> PipelineConfig {
        let mut corpus = self.corpus.clone();
        corpus.extend(self.text.iter().cloned());
        PipelineConfig {
            corpus,
            segmentation: self.segment,
            support: match &self.support {
                Some(path) => SupportSpec::File { path: path.clone() },
                None => SupportSpec::Heuristic {
                    min_frequency: self.min_frequency,
                },
            },
            matrix_mode: self.matrix,
            doubling: self.doubling,
            classifier: match self.classifier {
                ClassifierArg::Coded => ClassifierKind::Coded,
                ClassifierArg::PerTriplet => ClassifierKind::PerTriplet,
                ClassifierArg::Angle => ClassifierKind::Angle,
            },
            angle_tolerance: self.angle_tolerance,
            scan: match self.mode {
                ModeArg::Global => ScanKind::Global,
                ModeArg::Linear => ScanKind::Linear,
            },
            per_document: self.per_document,
            budget: self.budget,
            seed: self.seed,
            criterion: self.criterion,
            metric: match self.metric {
                MetricArg::Cvnc => ClusterMetric::Cvnc,
                MetricArg::Sqeuclidean => ClusterMetric::SqEuclidean,
            },
            terms: match self.terms {
                TermsArg::All => TermSelection::All,
                TermsArg::Nearest => TermSelection::Nearest,
            },
            dominance: match self.dominance {
                DominanceArg::Later => Dominance::LaterDominates,
                DominanceArg::Earlier => Dominance::EarlierDominates,
            },
            k: self.k,
            column_coords: match self.column_coords {
                CoordsArg::Principal => ColumnCoords::Principal,
                CoordsArg::Standard => ColumnCoords::Standard,
            },
            synthetic: self.synthetic.then_some(SyntheticSpec {
                n: self.n,
                dims: self.dims,
            }),
        }
    }
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Usage(e.to_string()),
            Error::Io { ref source, .. } if source.kind() == std::io::ErrorKind::NotFound => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn prepare(run: &RunArgs, needs_corpus: bool) -> Result<(PipelineConfig, Writer), Failure> {
    let config = run.config();
    if needs_corpus && config.synthetic.is_some() {
        return Err(Failure::Usage(
            "--synthetic only applies to fingerprint".into(),
        ));
    }
    config.validate()?;
    let writer = Writer::new(&run.out, &config)?;
    Ok((config, writer))
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    let mut written = Vec::new();
    match cli.command {
        Command::Fingerprint(args) => {
            let (config, w) = prepare(&args, false)?;
            let fp = pipeline::fingerprint(&config)?;
            written.push(w.config()?);
            written.push(w.json("report.json", &fp.report)?);
            if config.per_document {
                written.push(w.json(
                    "reports.json",
                    &ReportsFile {
                        documents: fp.documents.clone(),
                    },
                )?);
            }
            let table = fp.table();
            written.push(w.text("table.txt", &table)?);
            print!("{table}");
        }
        Command::Embed(args) => {
            let (config, w) = prepare(&args, true)?;
            let a = pipeline::analyse(&config)?;
            written.push(w.config()?);
            written.push(w.json("embedding.json", &a.embedding.to_json())?);
            written.push(w.text("frequency.tsv", &a.matrix.to_tsv())?);
        }
        Command::Cluster(args) => {
            let (config, w) = prepare(&args, true)?;
            let a = pipeline::analyse(&config)?;
            let tree = pipeline::cluster(&a, &config)?;
            written.push(w.config()?);
            written.push(w.json("dendrogram.json", &tree)?);
            written.push(w.text("merges.tsv", &tree.merge_table_tsv())?);
        }
        Command::Ontology(args) => {
            let (config, w) = prepare(&args, true)?;
            let a = pipeline::analyse(&config)?;
            let h = pipeline::ontology(&a, &config)?;
            w.bundle(&a, &h)?;
            for name in [
                "config.json",
                "embedding.json",
                "hierarchy.json",
                "frequency.tsv",
                "segments.json",
            ] {
                written.push(w.dir().join(name));
            }
            written.push(w.text("hierarchy.dot", &h.to_dot())?);
        }
        Command::Triples(args) => {
            let (config, w) = prepare(&args, true)?;
            let a = pipeline::analyse(&config)?;
            let triples = pipeline::triples(&a)?;
            written.push(w.config()?);
            written.push(w.json_lines("triples.jsonl", &triples)?);
        }
        Command::Nearest { run, segment_id } => {
            let (config, w) = prepare(&run, true)?;
            let a = pipeline::analyse(&config)?;
            let results = pipeline::nearest(&a, &config, segment_id.as_deref())?;
            written.push(w.config()?);
            written.push(w.json("nearest.json", &NearestFile { results })?);
        }
        Command::Serve { bundle, port } => {
            if !bundle.is_dir() {
                return Err(Failure::Usage(format!(
                    "bundle directory {} does not exist",
                    bundle.display()
                )));
            }
            let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::Runtime(e.to_string()))?;
            return rt
                .block_on(ultratext_service::serve(&bundle, port))
                .map_err(|e| Failure::Runtime(e.to_string()));
        }
    }
    for p in written {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

#[derive(serde::Serialize)]
struct NearestFile {
    results: Vec<ultratext::select::NearestTermsResult>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
