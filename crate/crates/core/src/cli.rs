//! Command-line front end. `run` parses arguments, dispatches to the
//! library and maps errors to exit codes.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::embed_tools::{export_vectors, nearest_neighbors, project_2d, write_projection, Metric};
use crate::error::{Error, Result};
use crate::eval::{evaluate_datasets, split, write_pr_curve, Side, SplitMode, SplitSpec};
use crate::fsutil::write_atomic;
use crate::ingest::{
    build_attribute_relation, build_word_relations, filter_categories, parse_stopwords, read_attributes,
    read_categories, read_ratings, read_reviews, resolve_rating_conflicts, PreprocessConfig, ReviewSide,
    StemmerKind,
};
use crate::model::{load_model_file, save_model_file, EmbeddingStore, Precision};
use crate::schema::{
    build_database, load_database_dir, parse_manifest, read_tuple_stream, write_database_dir, write_labeled_cells,
    write_manifest, Database, LabeledCell, Registry, SchemaManifest, TupleRecord, MANIFEST_FILE,
};
use crate::synth::{generate_planted, LabelLink, SynthSpec};
use crate::train::{train, ParallelMode, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;

/// Row marker written by `predict` for pairs that cannot be scored.
pub const ERR_UNKNOWN_ENTITY: &str = "ERR_UNKNOWN_ENTITY";

#[derive(Parser, Debug)]
#[command(name = "relfactor", version, about = "Collective logistic factorization of multi-relational data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build tuple streams from raw ratings, reviews, categories and attributes.
    Ingest(IngestArgs),
    /// Generate a planted-factor synthetic database.
    Synth(SynthArgs),
    /// Split a target relation into train / validation / test.
    Split(SplitArgs),
    /// Fit entity embeddings.
    Train(TrainArgs),
    /// Score labeled test tuples and report precision, recall and F1.
    Evaluate(EvaluateArgs),
    /// Score `relation \t e1 \t e2` pairs.
    Predict(PredictArgs),
    /// Nearest neighbours of an entity in embedding space.
    Nn(NnArgs),
    /// Project entities onto their top two principal components.
    Project(ProjectArgs),
    /// Dump every entity vector as TSV.
    ExportVectors(ExportArgs),
}

#[derive(Args, Debug)]
struct IngestArgs {
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    ratings: Option<PathBuf>,
    #[arg(long)]
    reviews: Option<PathBuf>,
    #[arg(long)]
    categories: Option<PathBuf>,
    #[arg(long)]
    attributes: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    min_word_reviews: usize,
    #[arg(long, default_value_t = 5)]
    min_category_entities: usize,
    #[arg(long, default_value = "porter")]
    stemmer: String,
    /// Replacement stopword list, one word per line.
    #[arg(long)]
    stopwords: Option<PathBuf>,
    #[arg(long, default_value = "R")]
    rating_relation: String,
    #[arg(long, default_value = "C")]
    category_relation: String,
    #[arg(long, default_value = "A")]
    attribute_relation: String,
    #[arg(long, default_value = "BW")]
    item_word_relation: String,
    #[arg(long, default_value = "UW")]
    user_word_relation: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LinkArg {
    Bernoulli,
    Threshold,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 200)]
    users: usize,
    #[arg(long, default_value_t = 200)]
    items: usize,
    #[arg(long, default_value_t = 20)]
    categories: usize,
    #[arg(long, default_value_t = 4)]
    k_true: usize,
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    /// Observation density of every relation.
    #[arg(long, default_value_t = 0.2)]
    density: f64,
    /// Observation density of the category relation, overriding --density.
    #[arg(long)]
    density_c: Option<f64>,
    #[arg(long, value_enum, default_value_t = LinkArg::Bernoulli)]
    link: LinkArg,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    HeldOut,
    ColdStart,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SideArg {
    Row,
    Col,
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Data directory with one `<relation>.tsv` per relation.
    #[arg(long)]
    data: PathBuf,
    /// Schema manifest; defaults to `<data>/schema.txt`.
    #[arg(long)]
    schema: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SplitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum)]
    mode: ModeArg,
    #[arg(long)]
    target: String,
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    #[arg(long, value_enum, default_value_t = SideArg::Col)]
    cold_side: SideArg,
    #[arg(long, default_value_t = 0.1)]
    cold_fraction: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PrecisionArg {
    F64,
    F32,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Comma-separated relations to train on; defaults to all.
    #[arg(long, value_delimiter = ',')]
    relations: Vec<String>,
    #[arg(long, default_value_t = 30)]
    k: usize,
    #[arg(long, default_value_t = 0.001)]
    lambda: f64,
    #[arg(long, default_value_t = 0.01)]
    gamma: f64,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    neg_ratio: f64,
    #[arg(long)]
    biases: bool,
    #[arg(long, default_value_t = 0.01)]
    init_scale: f64,
    /// Labeled tuple stream used for checkpoint-best selection.
    #[arg(long)]
    validation: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Enumerate all unobserved cells of fully observed relations each epoch.
    #[arg(long)]
    full_enumeration: bool,
    /// Lock-free multi-threaded updates (not reproducible).
    #[arg(long)]
    racy: bool,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum, default_value_t = PrecisionArg::F64)]
    precision: PrecisionArg,
    /// Training log TSV; printed to standard output when omitted.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Labeled tuple stream; repeat to pool several datasets.
    #[arg(long, required = true)]
    test: Vec<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[arg(long)]
    pr_out: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Fail with exit code 2 on the first unscorable pair.
    #[arg(long)]
    strict: bool,
    /// Output TSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MetricArg {
    Dot,
    Cosine,
}

#[derive(Args, Debug)]
struct NnArgs {
    #[arg(long)]
    model: PathBuf,
    /// Query as `type:id`.
    #[arg(long)]
    entity: String,
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, value_enum, default_value_t = MetricArg::Cosine)]
    metric: MetricArg,
    /// Restrict candidates to one entity type.
    #[arg(long = "type")]
    type_filter: Option<String>,
}

#[derive(Args, Debug)]
struct ProjectArgs {
    #[arg(long)]
    model: PathBuf,
    /// One `type:id` per line.
    #[arg(long)]
    entities: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Divergence(_) => EXIT_DIVERGENCE,
        Error::InvalidArgument(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match dispatch(cli.command, &mut out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = out.flush();
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Ingest(a) => ingest(a, out),
        Command::Synth(a) => synth(a, out),
        Command::Split(a) => split_cmd(a, out),
        Command::Train(a) => train_cmd(a, out),
        Command::Evaluate(a) => evaluate_cmd(a, out),
        Command::Predict(a) => predict(a, out),
        Command::Nn(a) => nn(a, out),
        Command::Project(a) => project(a, out),
        Command::ExportVectors(a) => {
            let model = load_model_file(&a.model)?;
            write_atomic(&a.out, |w| export_vectors(&model, w))?;
            writeln!(out, "wrote {} vectors to {}", model.registry().total_entities(), a.out.display())?;
            Ok(())
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn read_manifest(path: &Path) -> Result<SchemaManifest> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    parse_manifest(&text, &path.display().to_string())
}

fn load_data(args: &DataArgs) -> Result<Database> {
    let schema = args.schema.clone().unwrap_or_else(|| args.data.join(MANIFEST_FILE));
    load_database_dir(&args.data, &read_manifest(&schema)?)
}

fn read_records(path: &Path) -> Result<Vec<TupleRecord>> {
    read_tuple_stream(open(path)?, &path.display().to_string())
}

fn resolve_cells(registry: &Registry, records: &[TupleRecord]) -> Result<Vec<LabeledCell>> {
    records.iter().map(|r| registry.resolve_record(r)).collect()
}

fn ingest(a: IngestArgs, out: &mut dyn Write) -> Result<()> {
    let manifest = read_manifest(&a.schema)?;
    let declared = |name: &str| manifest.relations.iter().any(|r| r.name == name);
    let require = |name: &str, flag: &str| {
        if declared(name) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("{flag} given but the schema declares no relation `{name}`")))
        }
    };
    let mut config = PreprocessConfig::default()
        .with_min_word_reviews(a.min_word_reviews)
        .with_min_category_entities(a.min_category_entities);
    config.stemmer = a.stemmer.parse::<StemmerKind>().map_err(Error::InvalidArgument)?;
    if let Some(p) = &a.stopwords {
        config.stopwords = parse_stopwords(&fs::read_to_string(p)?);
    }

    let mut records = Vec::new();
    if let Some(p) = &a.ratings {
        require(&a.rating_relation, "--ratings")?;
        let raw = read_ratings(open(p)?, &p.display().to_string())?;
        records.extend(resolve_rating_conflicts(&raw, &a.rating_relation)?);
    }
    if let Some(p) = &a.reviews {
        let raw = read_reviews(open(p)?, &p.display().to_string())?;
        let targets = [
            (&a.item_word_relation, ReviewSide::Item),
            (&a.user_word_relation, ReviewSide::User),
        ];
        let mut any = false;
        for (rel, side) in targets {
            if declared(rel) {
                records.extend(build_word_relations(&raw, side, rel, &config));
                any = true;
            }
        }
        if !any {
            return Err(Error::InvalidArgument(format!(
                "--reviews given but the schema declares neither `{}` nor `{}`",
                a.item_word_relation, a.user_word_relation
            )));
        }
    }
    if let Some(p) = &a.categories {
        require(&a.category_relation, "--categories")?;
        let raw = read_categories(open(p)?, &p.display().to_string())?;
        records.extend(filter_categories(&raw, &a.category_relation, &config));
    }
    if let Some(p) = &a.attributes {
        require(&a.attribute_relation, "--attributes")?;
        let raw = read_attributes(open(p)?, &p.display().to_string())?;
        records.extend(build_attribute_relation(&raw, &a.attribute_relation)?);
    }
    let db = build_database(&manifest, records)?;
    write_database_dir(&db, &a.out)?;
    write!(out, "{db}")?;
    Ok(())
}

fn synth(a: SynthArgs, out: &mut dyn Write) -> Result<()> {
    let spec = SynthSpec {
        n_users: a.users,
        n_items: a.items,
        n_categories: a.categories,
        k_true: a.k_true,
        noise: a.noise,
        density_r: a.density,
        density_c: a.density_c.unwrap_or(a.density),
        seed: a.seed,
        link: match a.link {
            LinkArg::Bernoulli => LabelLink::Bernoulli,
            LinkArg::Threshold => LabelLink::Threshold,
        },
    };
    let planted = generate_planted(&spec)?;
    write_database_dir(&planted.db, &a.out)?;
    write!(out, "{}", planted.db)?;
    Ok(())
}

fn split_cmd(a: SplitArgs, out: &mut dyn Write) -> Result<()> {
    let db = load_data(&a.data)?;
    let spec = SplitSpec {
        mode: match a.mode {
            ModeArg::HeldOut => SplitMode::HeldOut,
            ModeArg::ColdStart => SplitMode::ColdStart,
        },
        target_relation: a.target.clone(),
        train_fraction: a.train_fraction,
        cold_fraction: a.cold_fraction,
        cold_side: match a.cold_side {
            SideArg::Row => Side::Row,
            SideArg::Col => Side::Col,
        },
        seed: a.seed,
    };
    let s = split(&db, &spec)?;
    for w in &s.warnings {
        eprintln!("warning: {w}");
    }
    let reg = db.registry();
    write_database_dir(&s.train, &a.out.join("train"))?;
    write_atomic(&a.out.join(MANIFEST_FILE), |w| write_manifest(&reg.manifest(), w))?;
    write_atomic(&a.out.join("validation.tsv"), |w| write_labeled_cells(reg, &s.validation, w))?;
    write_atomic(&a.out.join("test.tsv"), |w| write_labeled_cells(reg, &s.test, w))?;
    if spec.mode == SplitMode::ColdStart {
        write_atomic(&a.out.join("cold_entities.txt"), |w| {
            for e in &s.cold_entities {
                writeln!(w, "{}", reg.qualified_name(*e))?;
            }
            Ok(())
        })?;
    }
    let rel = db.relation_id(&a.target)?;
    writeln!(
        out,
        "{}: train {} validation {} test {} cold {}",
        a.target,
        s.train.tuple_count(rel),
        s.validation.len(),
        s.test.len(),
        s.cold_entities.len()
    )?;
    Ok(())
}

fn train_cmd(a: TrainArgs, out: &mut dyn Write) -> Result<()> {
    let db = load_data(&a.data)?;
    let relations = if a.relations.is_empty() {
        db.registry().relations().iter().map(|r| r.name.clone()).collect()
    } else {
        a.relations.clone()
    };
    let validation = match &a.validation {
        Some(p) => Some(resolve_cells(db.registry(), &read_records(p)?)?),
        None => None,
    };
    let config = TrainConfig {
        k: a.k,
        lambda: a.lambda,
        gamma: a.gamma,
        epochs: a.epochs,
        seed: a.seed,
        relations,
        neg_ratio: a.neg_ratio,
        enable_biases: a.biases,
        init_scale: a.init_scale,
        parallel_mode: if a.racy { ParallelMode::Racy } else { ParallelMode::Deterministic },
        threshold: a.threshold,
        full_enumeration: a.full_enumeration,
        threads: a.threads,
    };
    let (model, log) = train(&db, &config, validation.as_deref())?;
    let precision = match a.precision {
        PrecisionArg::F64 => Precision::Full,
        PrecisionArg::F32 => Precision::Compact,
    };
    save_model_file(&model, &a.out, precision)?;
    match &a.log {
        Some(p) => write_atomic(p, |w| log.write_tsv(w))?,
        None => log.write_tsv(out)?,
    }
    let degenerate: usize = log.epochs.iter().flat_map(|e| &e.negatives).map(|n| n.degenerate).sum();
    let leaked: usize = log.epochs.iter().map(|e| e.leaked_negatives).sum();
    if degenerate > 0 {
        eprintln!("warning: {degenerate} negative draws hit the rejection cap");
    }
    if let Some(best) = log.best_epoch {
        writeln!(out, "# kept epoch {best}; {leaked} sampled negatives were validation positives")?;
    }
    Ok(())
}

fn evaluate_cmd(a: EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    let model = load_model_file(&a.model)?;
    let mut sets = Vec::new();
    for p in &a.test {
        let name = p
            .file_stem()
            .map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned());
        sets.push((name, resolve_cells(model.registry(), &read_records(p)?)?));
    }
    let views: Vec<(&str, &[LabeledCell])> = sets.iter().map(|(n, c)| (n.as_str(), c.as_slice())).collect();
    let report = evaluate_datasets(&model, &views, a.threshold)?;
    if let Some(p) = &a.report {
        write_atomic(p, |w| report.write_tsv(w))?;
    }
    if let Some(p) = &a.pr_out {
        write_atomic(p, |w| write_pr_curve(&report.pr_curve, w))?;
    }
    report.write_tsv(out)?;
    Ok(())
}

fn predict_rows(model: &EmbeddingStore, pairs: &[TupleRecord], a: &PredictArgs, w: &mut dyn Write) -> Result<()> {
    for p in pairs {
        match model.score_named(&p.relation, &p.e1, &p.e2) {
            Ok(prob) => {
                let label = crate::eval::classify(prob, a.threshold);
                writeln!(w, "{}\t{}\t{}\t{prob}\t{label}", p.relation, p.e1, p.e2)?;
            }
            Err(e @ (Error::UnknownEntity(_) | Error::UnknownRelation(_))) => {
                if a.strict {
                    return Err(e);
                }
                writeln!(w, "{}\t{}\t{}\t{ERR_UNKNOWN_ENTITY}", p.relation, p.e1, p.e2)?;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(())
}

fn read_pairs(path: &Path) -> Result<Vec<TupleRecord>> {
    let name = path.display().to_string();
    let mut pairs = Vec::new();
    for (idx, line) in open(path)?.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        match line.split('\t').collect::<Vec<_>>().as_slice() {
            [rel, e1, e2] | [rel, e1, e2, _] => pairs.push(TupleRecord::new(rel, e1, e2, 0)),
            _ => return Err(Error::parse(&name, idx + 1, "expected `relation \\t e1 \\t e2`")),
        }
    }
    Ok(pairs)
}

fn predict(a: PredictArgs, out: &mut dyn Write) -> Result<()> {
    let model = load_model_file(&a.model)?;
    let pairs = read_pairs(&a.pairs)?;
    match &a.out {
        Some(p) => write_atomic(p, |w| predict_rows(&model, &pairs, &a, w)),
        None => {
            let mut buf = Vec::new();
            predict_rows(&model, &pairs, &a, &mut buf)?;
            out.write_all(&buf)?;
            Ok(())
        }
    }
}

fn nn(a: NnArgs, out: &mut dyn Write) -> Result<()> {
    let model = load_model_file(&a.model)?;
    let reg = model.registry();
    let query = reg.resolve_qualified(&a.entity)?;
    let filter = a.type_filter.as_deref().map(|t| reg.type_id(t)).transpose()?;
    let metric = match a.metric {
        MetricArg::Dot => Metric::Dot,
        MetricArg::Cosine => Metric::Cosine,
    };
    let result = nearest_neighbors(&model, query, a.n, metric, filter)?;
    for (e, score) in &result.neighbors {
        writeln!(out, "{}\t{score}", reg.qualified_name(*e))?;
    }
    Ok(())
}

fn project(a: ProjectArgs, out: &mut dyn Write) -> Result<()> {
    let model = load_model_file(&a.model)?;
    let reg = model.registry();
    let mut subset = Vec::new();
    for line in open(&a.entities)?.lines() {
        let line = line?;
        let name = line.trim();
        if !name.is_empty() {
            subset.push(reg.resolve_qualified(name)?);
        }
    }
    let points = project_2d(&model, &subset)?;
    write_atomic(&a.out, |w| write_projection(&model, &points, w))?;
    writeln!(out, "projected {} entities to {}", points.len(), a.out.display())?;
    Ok(())
}
