//! The `susrate` command line: validate, reduce, ingest, rate, analyze, serve.
//!
//! Preference scores are read only by `rate`, from a local file.

use std::fmt::Display;
use std::fs;
use std::io::{self, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use susrate_core::analysis::{
    index_density, ontology_interaction_matrix, product_interaction_matrix, AnalysisError, Histogram, InteractionLevel,
    SharedTagSelector,
};
use susrate_core::explain::{explain, ExplainError};
use susrate_core::ontology::validate::ValidationReport;
use susrate_core::ontology::{overlap_error, Finding};
use susrate_core::rating::rank_order;
use susrate_core::store::{ingest_products, load_ontology, OntologyDocument, StoreError};
use susrate_core::{
    apply_reduction_principle, ontology_version, to_canonical_json, validate_ontology, InteractionMatrix, Ontology,
    PreferenceScoreVector, ProductRating, RatingConfig, RatingEngine, RatingError, RatingExplanation,
    ReferenceStrategy,
};
use susrate_service::{AppState, ServiceConfig, MAX_PAGE_SIZE};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 1;
pub const EXIT_CONFLICT: u8 = 2;
pub const EXIT_IO: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "susrate", version, about = "Sustainability ontology and product rating tool")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Ontology document to read.
    #[arg(long, env = "SUSRATE_ONTOLOGY", global = true)]
    pub ontology: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long, env = "SUSRATE_OUT", global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, env = "SUSRATE_FORMAT", value_enum, default_value_t = Format::Json, global = true)]
    pub format: Format,
    #[arg(long, env = "SUSRATE_ALPHA", global = true)]
    pub alpha: Option<f64>,
    #[arg(long, env = "SUSRATE_BETA", global = true)]
    pub beta: Option<f64>,
    /// Neutral preference score.
    #[arg(long, env = "SUSRATE_S_MEAN", global = true)]
    pub s_mean: Option<f64>,
    #[arg(long, env = "SUSRATE_TAU", global = true)]
    pub tau: Option<f64>,
    #[arg(long, env = "SUSRATE_STRATEGY", global = true)]
    pub strategy: Option<ReferenceStrategy>,
    /// Rate strict preferences like any other.
    #[arg(long, env = "SUSRATE_NO_STRICT", global = true)]
    pub no_strict: bool,
}

impl GlobalArgs {
    pub fn rating_config(&self) -> RatingConfig {
        let mut c = RatingConfig::default();
        if let Some(v) = self.alpha {
            c.alpha = v;
        }
        if let Some(v) = self.beta {
            c.beta = v;
        }
        if let Some(v) = self.s_mean {
            c.s_mean = v;
        }
        if let Some(v) = self.tau {
            c.tau = v;
        }
        if let Some(v) = self.strategy {
            c.reference_strategy = v;
        }
        c.strict_enforcement = !self.no_strict;
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check integrity and report overlap errors.
    Validate,
    /// Make co-assigned product tags concept-disjoint.
    Reduce,
    /// Merge a product CSV into the ontology and re-run the assignment rules.
    Ingest {
        #[arg(long, env = "SUSRATE_CSV")]
        csv: PathBuf,
    },
    /// Rate and rank products for one set of preference scores.
    Rate {
        /// JSON object mapping preference ids to scores.
        #[arg(long, env = "SUSRATE_SCORES")]
        scores: PathBuf,
        /// Restrict to these products.
        #[arg(long, env = "SUSRATE_PRODUCTS", value_delimiter = ',')]
        products: Vec<String>,
        #[arg(long, env = "SUSRATE_CATEGORY")]
        category: Option<String>,
        /// Add the three contribution breakdowns.
        #[arg(long, env = "SUSRATE_EXPLAIN")]
        explain: bool,
        #[arg(long, env = "SUSRATE_PARALLEL")]
        parallel: bool,
    },
    /// Preference interaction matrix and index histograms.
    Analyze {
        #[arg(long, env = "SUSRATE_LEVEL", default_value_t = InteractionLevel::Ontology)]
        level: InteractionLevel,
        #[arg(long, env = "SUSRATE_SELECTOR", default_value_t = SharedTagSelector::NonZero)]
        selector: SharedTagSelector,
        #[arg(long, env = "SUSRATE_BINS", default_value_t = 10)]
        bins: usize,
    },
    /// Run the index service.
    Serve {
        #[arg(long, env = "SUSRATE_LISTEN", default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        #[arg(long, env = "SUSRATE_PAGE_SIZE_CAP", default_value_t = MAX_PAGE_SIZE)]
        page_size_cap: usize,
    },
}

/// A failed command: its exit code and message.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn invalid(message: impl Display) -> Self {
        Self { code: EXIT_INVALID, message: message.to_string() }
    }

    fn io(message: impl Display) -> Self {
        Self { code: EXIT_IO, message: message.to_string() }
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Io { .. } => Failure::io(e),
            StoreError::Integrity(findings) => {
                let lines: Vec<String> = findings.iter().map(|f| format!("  error: {f}")).collect();
                Failure::invalid(format!("integrity errors:\n{}", lines.join("\n")))
            }
            other => Failure::invalid(other),
        }
    }
}

impl From<RatingError> for Failure {
    fn from(e: RatingError) -> Self {
        Failure::invalid(e)
    }
}

impl From<AnalysisError> for Failure {
    fn from(e: AnalysisError) -> Self {
        Failure::invalid(e)
    }
}

impl From<ExplainError> for Failure {
    fn from(e: ExplainError) -> Self {
        Failure::invalid(e)
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::io(e)
    }
}

type Outcome = Result<u8, Failure>;

/// Parses `args` and runs the command. Usage errors exit with 1.
pub fn run_from<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli, stdout, stderr),
        Err(e) if !e.use_stderr() => {
            let _ = write!(stdout, "{e}");
            EXIT_OK
        }
        Err(e) => {
            let _ = write!(stderr, "{e}");
            EXIT_INVALID
        }
    }
}

pub fn run(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8 {
    let g = &cli.global;
    let result = match &cli.command {
        Command::Validate => cmd_validate(g, stdout, stderr),
        Command::Reduce => cmd_reduce(g, stdout, stderr),
        Command::Ingest { csv } => cmd_ingest(g, csv, stdout, stderr),
        Command::Rate { scores, products, category, explain, parallel } => cmd_rate(
            g,
            &RateArgs { scores, products, category: category.as_deref(), explain: *explain, parallel: *parallel },
            stdout,
        ),
        Command::Analyze { level, selector, bins } => cmd_analyze(g, *level, *selector, *bins, stdout),
        Command::Serve { listen, page_size_cap } => cmd_serve(g, *listen, *page_size_cap, stdout),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

fn ontology_path(g: &GlobalArgs) -> Result<&Path, Failure> {
    g.ontology.as_deref().ok_or_else(|| Failure::invalid("--ontology (or SUSRATE_ONTOLOGY) is required"))
}

fn load(g: &GlobalArgs, stderr: &mut dyn Write) -> Result<Ontology, Failure> {
    let loaded = load_ontology(ontology_path(g)?)?;
    for w in &loaded.warnings {
        let _ = writeln!(stderr, "warning: {w}");
    }
    Ok(loaded.ontology)
}

fn load_quiet(g: &GlobalArgs) -> Result<Ontology, Failure> {
    Ok(load_ontology(ontology_path(g)?)?.ontology)
}

/// Writes to `--out` when given, else to `stdout`.
fn emit(g: &GlobalArgs, stdout: &mut dyn Write, bytes: &[u8]) -> Result<(), Failure> {
    match &g.out {
        Some(path) => fs::write(path, bytes).map_err(|e| Failure::io(format!("{}: {e}", path.display()))),
        None => stdout.write_all(bytes).map_err(Failure::io),
    }
}

fn emit_json<T: Serialize>(g: &GlobalArgs, stdout: &mut dyn Write, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(Failure::io)?;
    text.push('\n');
    emit(g, stdout, text.as_bytes())
}

fn emit_csv(g: &GlobalArgs, stdout: &mut dyn Write, header: &[&str], rows: Vec<Vec<String>>) -> Result<(), Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::io(e.to_string()))?;
    emit(g, stdout, &bytes)
}

/// Fixed six decimals, `.` separator.
pub fn csv_number(v: f64) -> String {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

fn csv_option(v: Option<f64>) -> String {
    v.map(csv_number).unwrap_or_default()
}

#[derive(Debug, Serialize)]
struct ValidateOutput {
    ok: bool,
    errors: Vec<Finding>,
    warnings: Vec<Finding>,
    max_overlap_error: f64,
}

fn max_overlap_error(o: &Ontology) -> f64 {
    o.products
        .values()
        .flat_map(|p| o.preference_tags.values().map(move |w| overlap_error::<f64>(o, p, w)))
        .fold(0.0, f64::max)
}

pub fn cmd_validate(g: &GlobalArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Outcome {
    let path = ontology_path(g)?;
    let text = fs::read_to_string(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
    let doc: OntologyDocument =
        serde_json::from_str(&text).map_err(|e| Failure::invalid(StoreError::Parse(e.to_string())))?;
    let o = doc.into_ontology()?;
    let ValidationReport { errors, warnings } = validate_ontology(&o);
    let ok = errors.is_empty();
    let out = ValidateOutput { ok, max_overlap_error: if ok { max_overlap_error(&o) } else { 0.0 }, errors, warnings };
    match g.format {
        Format::Json => emit_json(g, stdout, &out)?,
        Format::Csv => {
            let rows = out
                .errors
                .iter()
                .map(|f| ("error", f))
                .chain(out.warnings.iter().map(|f| ("warning", f)))
                .map(|(severity, f)| {
                    let kind = serde_json::to_value(f).ok().and_then(|v| v["kind"].as_str().map(str::to_owned));
                    vec![severity.to_owned(), kind.unwrap_or_default(), f.to_string()]
                })
                .collect();
            emit_csv(g, stdout, &["severity", "kind", "message"], rows)?;
        }
    }
    let _ = writeln!(stderr, "{} error(s), {} warning(s)", out.errors.len(), out.warnings.len());
    Ok(if ok { EXIT_OK } else { EXIT_INVALID })
}

pub fn cmd_reduce(g: &GlobalArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Outcome {
    let o = load(g, stderr)?;
    let reduction = apply_reduction_principle(&o);
    let report = &reduction.report;
    if !report.conflicts.is_empty() {
        for c in &report.conflicts {
            let reason = serde_json::to_string(&c.reason).unwrap_or_default();
            let _ = writeln!(stderr, "conflict: tags `{}` and `{}`: {reason}", c.product_tags.0, c.product_tags.1);
        }
        return Err(Failure {
            code: EXIT_CONFLICT,
            message: format!("{} reduction conflict(s); nothing written", report.conflicts.len()),
        });
    }
    for t in &report.extracted {
        let concepts: Vec<&str> = t.concepts.iter().map(String::as_str).collect();
        let _ = writeln!(
            stderr,
            "extracted `{}` = {{{}}} from `{}` and `{}` on {} product(s)",
            t.tag_id,
            concepts.join(", "),
            t.split_from.0,
            t.split_from.1,
            t.products.len()
        );
    }
    for u in &report.unassigned {
        let _ =
            writeln!(stderr, "unassigned `{}` from `{}` (contained in `{}`)", u.tag_id, u.product_id, u.kept_tag_id);
    }
    let _ = writeln!(stderr, "max overlap error after reduction: {}", max_overlap_error(&reduction.ontology));
    emit(g, stdout, to_canonical_json(&reduction.ontology).as_bytes())?;
    Ok(EXIT_OK)
}

pub fn cmd_ingest(g: &GlobalArgs, csv: &Path, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Outcome {
    let o = load(g, stderr)?;
    let before = o.products.len();
    let merged = ingest_products(csv, &o)?;
    let _ = writeln!(
        stderr,
        "{} product(s), {} new; version {}",
        merged.products.len(),
        merged.products.len() - before,
        ontology_version(&merged)
    );
    emit(g, stdout, to_canonical_json(&merged).as_bytes())?;
    Ok(EXIT_OK)
}

pub struct RateArgs<'a> {
    pub scores: &'a Path,
    pub products: &'a [String],
    pub category: Option<&'a str>,
    pub explain: bool,
    pub parallel: bool,
}

#[derive(Debug, Serialize)]
pub struct RatedProduct {
    #[serde(flatten)]
    pub rating: ProductRating,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub explanation: Option<RatingExplanation>,
}

#[derive(Debug, Serialize)]
pub struct RateOutput {
    pub ontology_version: String,
    pub config: RatingConfig,
    pub ratings: Vec<RatedProduct>,
}

pub fn read_scores(path: &Path) -> Result<PreferenceScoreVector, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
}

/// Ratings for the selected products in ranking order.
pub fn rate_catalog(
    engine: &RatingEngine,
    products: &[&str],
    scores: &PreferenceScoreVector,
    parallel: bool,
) -> Result<Vec<ProductRating>, RatingError> {
    if !parallel {
        return engine.rank_products(products.iter().copied(), scores);
    }
    let profile = engine.profile(scores)?;
    let mut ratings = products.par_iter().map(|p| engine.rate_profile(&profile, p)).collect::<Result<Vec<_>, _>>()?;
    ratings.par_sort_by(rank_order);
    Ok(ratings)
}

fn select_products<'a>(o: &'a Ontology, ids: &'a [String], category: Option<&str>) -> Result<Vec<&'a str>, Failure> {
    let selected: Vec<&str> = if ids.is_empty() {
        o.products.keys().map(String::as_str).collect()
    } else {
        for id in ids {
            if !o.products.contains_key(id) {
                return Err(RatingError::UnknownProduct(id.clone()).into());
            }
        }
        ids.iter().map(String::as_str).collect()
    };
    Ok(match category {
        Some(c) => selected.into_iter().filter(|id| o.products[*id].category_id == c).collect(),
        None => selected,
    })
}

pub fn cmd_rate(g: &GlobalArgs, args: &RateArgs<'_>, stdout: &mut dyn Write) -> Outcome {
    let scores = read_scores(args.scores)?;
    let o = std::sync::Arc::new(load_quiet(g)?);
    let version = ontology_version(&o);
    let engine = RatingEngine::new(o.clone(), g.rating_config())?;
    let products = select_products(&o, args.products, args.category)?;
    let ratings = rate_catalog(&engine, &products, &scores, args.parallel)?;
    let rated = ratings
        .into_iter()
        .map(|rating| {
            let explanation = if args.explain { Some(explain(&engine, &rating.product_id, &scores)?) } else { None };
            Ok(RatedProduct { rating, explanation })
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    match g.format {
        Format::Json => {
            emit_json(g, stdout, &RateOutput { ontology_version: version, config: *engine.config(), ratings: rated })?
        }
        Format::Csv if !args.explain => {
            let rows = rated
                .iter()
                .map(|r| {
                    vec![
                        r.rating.product_id.clone(),
                        csv_number(r.rating.scaled),
                        csv_number(r.rating.raw),
                        r.rating.strict_violation.clone().unwrap_or_default(),
                    ]
                })
                .collect();
            emit_csv(g, stdout, &["product_id", "scaled", "raw", "strict_violation"], rows)?;
        }
        Format::Csv => {
            let mut rows = Vec::new();
            for r in &rated {
                let e = r.explanation.as_ref().expect("explained");
                let levels = [
                    ("preference", &e.preference_contributions),
                    ("preference_tag", &e.preference_tag_contributions),
                    ("product_tag", &e.product_tag_contributions),
                ];
                for (level, map) in levels {
                    for (id, v) in map {
                        rows.push(vec![
                            r.rating.product_id.clone(),
                            csv_number(r.rating.scaled),
                            level.to_owned(),
                            id.clone(),
                            csv_number(*v),
                        ]);
                    }
                }
            }
            emit_csv(g, stdout, &["product_id", "scaled", "level", "id", "contribution"], rows)?;
        }
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
pub struct AnalyzeOutput {
    pub ontology_version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selector: Option<SharedTagSelector>,
    pub interactions: InteractionMatrix,
    pub densities: Vec<Histogram<f64>>,
}

pub fn analyze(
    o: std::sync::Arc<Ontology>,
    config: RatingConfig,
    level: InteractionLevel,
    selector: SharedTagSelector,
    bins: usize,
) -> Result<AnalyzeOutput, Failure> {
    let engine = RatingEngine::new(o.clone(), config)?;
    let interactions = match level {
        InteractionLevel::Ontology => ontology_interaction_matrix(&o, selector),
        InteractionLevel::Product => product_interaction_matrix(&engine, None)?,
    };
    let products: Vec<&str> = engine.product_ids().iter().map(String::as_str).collect();
    let densities = engine
        .preference_ids()
        .iter()
        .map(|pi| index_density(&engine, pi, &products, bins))
        .collect::<Result<_, _>>()?;
    Ok(AnalyzeOutput {
        ontology_version: ontology_version(&o),
        selector: (level == InteractionLevel::Ontology).then_some(selector),
        interactions,
        densities,
    })
}

pub fn cmd_analyze(
    g: &GlobalArgs,
    level: InteractionLevel,
    selector: SharedTagSelector,
    bins: usize,
    stdout: &mut dyn Write,
) -> Outcome {
    let o = std::sync::Arc::new(load_quiet(g)?);
    let out = analyze(o, g.rating_config(), level, selector, bins)?;
    match g.format {
        Format::Json => emit_json(g, stdout, &out)?,
        Format::Csv => {
            let m = &out.interactions;
            let mut rows = Vec::new();
            for (i, a) in m.preference_ids.iter().enumerate() {
                for (j, b) in m.preference_ids.iter().enumerate() {
                    rows.push(vec!["interaction".into(), a.clone(), b.clone(), csv_option(m.values[i][j])]);
                }
            }
            for h in &out.densities {
                for (k, count) in h.counts.iter().enumerate() {
                    let bin = format!("{}..{}", csv_number(h.edges[k]), csv_number(h.edges[k + 1]));
                    rows.push(vec!["density".into(), h.preference_id.clone(), bin, count.to_string()]);
                }
            }
            emit_csv(g, stdout, &["kind", "preference_id", "key", "value"], rows)?;
        }
    }
    Ok(EXIT_OK)
}

pub fn cmd_serve(g: &GlobalArgs, listen: SocketAddr, page_size_cap: usize, stdout: &mut dyn Write) -> Outcome {
    let config = ServiceConfig {
        ontology_path: Some(ontology_path(g)?.to_path_buf()),
        page_size_cap,
        rating: g.rating_config(),
    };
    let state = AppState::load(config).map_err(|e| match e {
        susrate_service::ServiceError::Store(s) => Failure::from(s),
        other => Failure::invalid(other),
    })?;
    let runtime = tokio::runtime::Runtime::new().map_err(Failure::io)?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(listen)
            .await
            .map_err(|e| Failure::io(format!("cannot bind {listen}: {e}")))?;
        let addr = listener.local_addr().map_err(Failure::io)?;
        writeln!(stdout, "listening on {addr}").map_err(Failure::io)?;
        stdout.flush().map_err(Failure::io)?;
        susrate_service::serve(listener, state, shutdown_signal()).await.map_err(Failure::io)
    })?;
    Ok(EXIT_OK)
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let terminate = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let terminate = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = terminate => {}
    }
}

/// Logs go to standard error, filtered by `SUSRATE_LOG` (default `info`).
pub fn init_logging() {
    let filter = tracing_subscriber::EnvFilter::try_from_env("SUSRATE_LOG")
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info"));
    let _ = tracing_subscriber::fmt().with_env_filter(filter).with_writer(io::stderr).try_init();
}
