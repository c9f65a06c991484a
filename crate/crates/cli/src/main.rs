//! `cote`: evaluate document layout predictions with SSUs and COTe.
//!
//! Exit codes: 0 success, 1 evaluation error, 2 usage or input parse error.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cote_core::corpus::{self, BaselineToggles, RunConfig, SsuMode};
use cote_core::io::report::{self, ReportFormat};
use cote_core::io::ssu_json::{self, SsuDocument};
use cote_core::io::{self, coco, DatasetManifest, GtFormat, PredictionSet};
use cote_core::synth::{self, BlockSpec, Granularity, SyntheticLayoutSpec};
use cote_core::viz::{self, CoteState};
use cote_core::{AutoLabelConfig, CoteError, OverlapPolicy, Prediction};

use config::{parse_weights, FileConfig};

#[derive(Parser)]
#[command(
    name = "cote",
    version,
    about = "Structural Semantic Unit evaluation of document layout predictions"
)]
struct Cli {
    /// TOML file whose keys mirror the long flags; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score predictions against ground truth and write a report.
    Evaluate(EvaluateArgs),
    /// Fill structural and semantic ids from headers and columns.
    LabelSsu(LabelArgs),
    /// Render per-pixel COTe states as PNG overlays.
    Visualize(VisualizeArgs),
    /// Generate a synthetic layout at line and paragraph granularity.
    Synth(SynthArgs),
    /// Compare stored SSU labels against one SSU per region.
    CompareSsu(CompareArgs),
}

#[derive(Args)]
struct EvalArgs {
    /// Ground-truth file, or a directory of PAGE XML files.
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Ground-truth format: ssu-json (default), page-xml or coco.
    #[arg(long)]
    gt_format: Option<String>,
    /// COCO-style detection results (JSON list).
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// use-labels (default), fallback or auto-label.
    #[arg(long)]
    ssu_mode: Option<String>,
    /// Class name that opens a new semantic unit (auto-label mode).
    #[arg(long)]
    header_class: Option<String>,
    /// Horizontal overlap needed to share a column (auto-label mode) [default: 0.5].
    #[arg(long)]
    column_threshold: Option<f64>,
    /// Drop predictions scoring below this [default: 0].
    #[arg(long)]
    score_threshold: Option<f64>,
    /// Composite weights `coverage,overlap,trespass` [default: 1,1,1].
    #[arg(long)]
    weights: Option<String>,
    /// What to do with overlapping SSUs: clip-to-earlier (default) or strict.
    #[arg(long)]
    overlap_policy: Option<String>,
    /// IoU threshold of the greedy F1 match [default: 0.5].
    #[arg(long)]
    f1_iou: Option<f64>,
    /// Skip COCO-style mAP.
    #[arg(long)]
    no_map: bool,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    /// Report file to write.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Report format: json or csv [default: from the report extension, else json].
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    eval: EvalArgs,
    #[command(flatten)]
    report: ReportArgs,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    eval: EvalArgs,
    /// JSON file for the paired results and deltas.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct LabelArgs {
    /// Ground truth to label.
    #[arg(long)]
    input: Option<PathBuf>,
    /// page-xml (default), coco or ssu-json.
    #[arg(long)]
    input_format: Option<String>,
    /// Class name that opens a new semantic unit (required).
    #[arg(long)]
    header_class: Option<String>,
    /// Horizontal overlap needed to share a column [default: 0.5].
    #[arg(long)]
    column_threshold: Option<f64>,
    /// Output SsuJson file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VisualizeArgs {
    #[command(flatten)]
    eval: EvalArgs,
    /// Page image to blend under the overlay (single page only).
    #[arg(long)]
    image: Option<PathBuf>,
    /// Render only this image id.
    #[arg(long)]
    page: Option<String>,
    /// Output directory; one `<image_id>.png` per page.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// limericks (default) or single-line.
    #[arg(long, conflicts_with = "spec")]
    preset: Option<String>,
    /// JSON layout specification instead of a preset.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Override the layout seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Eval(CoteError),
}

impl From<CoteError> for Failure {
    fn from(e: CoteError) -> Self {
        match e {
            CoteError::Parse { .. } | CoteError::Io { .. } | CoteError::VersionMismatch { .. } => {
                Failure::Usage(format!("[{}] {e}", e.code()))
            }
            e => Failure::Eval(e),
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn required<T>(value: Option<T>, flag: &str) -> CliResult<T> {
    value.ok_or_else(|| usage(format!("missing required --{flag}")))
}

fn existing(path: Option<PathBuf>, flag: &str) -> CliResult<PathBuf> {
    let path = required(path, flag)?;
    if !path.exists() {
        return Err(usage(format!(
            "--{flag}: no such file or directory: {}",
            path.display()
        )));
    }
    Ok(path)
}

fn parse_with<T: std::str::FromStr<Err = String>>(value: Option<String>, default: T) -> CliResult<T> {
    value.map_or(Ok(default), |v| v.parse().map_err(Failure::Usage))
}

fn overlap_policy(value: Option<String>) -> CliResult<OverlapPolicy> {
    match value.as_deref() {
        None | Some("clip-to-earlier") => Ok(OverlapPolicy::ClipToEarlier),
        Some("strict") => Ok(OverlapPolicy::Strict),
        Some(other) => Err(usage(format!(
            "unknown overlap policy {other:?} (expected clip-to-earlier or strict)"
        ))),
    }
}

fn unit_interval(value: f64, flag: &str) -> CliResult<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(usage(format!("--{flag} {value} outside [0, 1]")))
    }
}

/// Merges flags over the config file and validates everything before any
/// input file is read.
fn run_config(a: EvalArgs, file: &FileConfig) -> CliResult<RunConfig> {
    let header = a.header_class.or_else(|| file.header_class.clone());
    let column = unit_interval(
        a.column_threshold.or(file.column_threshold).unwrap_or(0.5),
        "column-threshold",
    )?;
    let ssu_mode = match a.ssu_mode.or_else(|| file.ssu_mode.clone()).as_deref() {
        None | Some("use-labels") => SsuMode::UseLabels,
        Some("fallback") | Some("fallback-per-region") => SsuMode::FallbackPerRegion,
        Some("auto-label") => {
            let header = header.ok_or_else(|| usage("--ssu-mode auto-label needs --header-class"))?;
            SsuMode::AutoLabel(AutoLabelConfig {
                header_class: header,
                column_overlap_threshold: column,
            })
        }
        Some(other) => {
            return Err(usage(format!(
                "unknown SSU mode {other:?} (expected use-labels, fallback or auto-label)"
            )))
        }
    };
    let weights = match a.weights.or_else(|| file.weights.clone()) {
        Some(w) => parse_weights(&w).map_err(Failure::Usage)?,
        None => Default::default(),
    };
    let config = RunConfig {
        gt_path: Some(existing(a.gt.or_else(|| file.gt.clone()), "gt")?),
        gt_format: parse_with(a.gt_format.or_else(|| file.gt_format.clone()), GtFormat::SsuJson)?,
        predictions_path: Some(existing(
            a.predictions.or_else(|| file.predictions.clone()),
            "predictions",
        )?),
        ssu_mode,
        score_threshold: unit_interval(
            a.score_threshold.or(file.score_threshold).unwrap_or(0.0),
            "score-threshold",
        )?,
        weights,
        overlap_policy: overlap_policy(a.overlap_policy.or_else(|| file.overlap_policy.clone()))?,
        baselines: BaselineToggles {
            map: !(a.no_map || file.no_map.unwrap_or(false)),
            ..BaselineToggles::default()
        },
        f1_iou_threshold: unit_interval(a.f1_iou.or(file.f1_iou).unwrap_or(0.5), "f1-iou")?,
        jobs: a.jobs.or(file.jobs),
        ..RunConfig::default()
    };
    if config.jobs == Some(0) {
        return Err(usage("--jobs must be at least 1"));
    }
    Ok(config)
}

fn report_target(r: ReportArgs, file: &FileConfig) -> CliResult<Option<(PathBuf, ReportFormat)>> {
    let Some(path) = r.report.or_else(|| file.report.clone()) else {
        return Ok(None);
    };
    let by_extension = match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => ReportFormat::Csv,
        _ => ReportFormat::Json,
    };
    let format = parse_with(r.format.or_else(|| file.format.clone()), by_extension)?;
    Ok(Some((path, format)))
}

fn print_warnings(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn evaluate(args: EvaluateArgs, file: &FileConfig) -> CliResult {
    let target = report_target(args.report, file)?;
    let config = run_config(args.eval, file)?;
    let result = corpus::evaluate_corpus(&config)?;
    print_warnings(&result.warnings);
    print!("{}", report::format_table(&result));
    match &result.spearman_iou_cote.value {
        Some(v) => println!("spearman(IoU, COTe) = {v:.3} over {} pages", result.spearman_iou_cote.n),
        None => println!(
            "spearman(IoU, COTe): {}",
            result.spearman_iou_cote.note.as_deref().unwrap_or("")
        ),
    }
    if let Some((path, format)) = target {
        report::write_report(&result, format, &path)?;
        println!("report written to {}", path.display());
    }
    Ok(())
}

fn compare(args: CompareArgs, file: &FileConfig) -> CliResult {
    let report_path = args.report.or_else(|| file.report.clone());
    let config = run_config(args.eval, file)?;
    let cmp = corpus::compare_ssu_modes(&config)?;
    println!("with SSU labels:");
    print!("{}", report::format_table(&cmp.labelled));
    println!("one SSU per region:");
    print!("{}", report::format_table(&cmp.fallback));
    let d = &cmp.aggregate_deltas;
    println!(
        "delta (per-region - labelled): COTe {:+.4}  C {:+.4}  O {:+.4}  T {:+.4}  E {:+.4}",
        d.cote, d.coverage, d.overlap, d.trespass, d.excess
    );
    if let Some(path) = report_path {
        let text = serde_json::to_string_pretty(&cmp).expect("comparison serializes");
        write_file(&path, text.as_bytes())?;
        println!("report written to {}", path.display());
    }
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn label_ssu(args: LabelArgs, file: &FileConfig) -> CliResult {
    let header = required(args.header_class.or_else(|| file.header_class.clone()), "header-class")?;
    let column = unit_interval(
        args.column_threshold.or(file.column_threshold).unwrap_or(0.5),
        "column-threshold",
    )?;
    let format = parse_with(
        args.input_format.or_else(|| file.input_format.clone()),
        GtFormat::PageXml,
    )?;
    let out = required(args.out.or_else(|| file.out.clone()), "out")?;
    let input = existing(args.input.or_else(|| file.input.clone()), "input")?;

    let mut manifest = io::load_ground_truth(&input, format)?;
    print_warnings(&manifest.warnings);
    let cfg = AutoLabelConfig {
        header_class: header,
        column_overlap_threshold: column,
    };
    let (mut n_regions, mut n_ssus) = (0, 0);
    for page in &mut manifest.pages {
        if page.regions.is_empty() {
            continue;
        }
        page.regions = cote_core::autolabel_ssu_from_structure(&page.regions, &manifest.classes, &cfg)?;
        let labelled = cote_core::group_regions_into_ssus(&page.regions, page.canvas, OverlapPolicy::ClipToEarlier)?;
        n_regions += page.regions.len();
        n_ssus += labelled.ssus().len();
        println!(
            "{}: {} regions, {} SSUs",
            page.image_id,
            page.regions.len(),
            labelled.ssus().len()
        );
    }
    ssu_json::write_ssu_json(&SsuDocument::from_manifest(&manifest)?, &out)?;
    println!(
        "{} pages, {n_regions} regions, {n_ssus} SSUs -> {}",
        manifest.pages.len(),
        out.display()
    );
    Ok(())
}

fn visualize(args: VisualizeArgs, file: &FileConfig) -> CliResult {
    let out = required(args.out.or_else(|| file.out.clone()), "out")?;
    let image = args.image.or_else(|| file.image.clone());
    if let Some(img) = &image {
        if !img.exists() {
            return Err(usage(format!("--image: no such file: {}", img.display())));
        }
    }
    let only = args.page.or_else(|| file.page.clone());
    let config = run_config(args.eval, file)?;
    let manifest = io::load_ground_truth(config.gt_path.as_deref().unwrap(), config.gt_format)?;
    let preds = coco::read_coco_predictions(config.predictions_path.as_deref().unwrap())?;
    let pages: Vec<_> = manifest
        .pages
        .iter()
        .filter(|p| only.as_deref().is_none_or(|id| p.image_id == id))
        .collect();
    if pages.is_empty() {
        return Err(usage(format!("no page matches --page {:?}", only.unwrap_or_default())));
    }
    if image.is_some() && pages.len() > 1 {
        return Err(usage("--image needs a single page; select one with --page"));
    }
    for page in pages {
        let labelled = corpus::label_page(page, &manifest.classes, &config.ssu_mode, config.overlap_policy)?;
        let page_preds = preds
            .for_image(&page.image_id)
            .iter()
            .filter(|r| r.score.is_none_or(|s| s >= config.score_threshold))
            .map(|r| r.to_prediction(page.canvas))
            .collect::<Result<Vec<Prediction>, _>>()?;
        let path = out.join(format!("{}.png", sanitize(&page.image_id)));
        let states = viz::visualize_cote_states(&labelled, &page_preds, image.as_deref(), &path)?;
        let counts = states.state_counts();
        let summary: Vec<String> = CoteState::ALL
            .iter()
            .filter(|s| **s != CoteState::Background)
            .map(|s| format!("{} {}", s.name(), counts[*s as usize]))
            .collect();
        println!("{} -> {} ({})", page.image_id, path.display(), summary.join(", "));
    }
    Ok(())
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "-_.".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn synth_cmd(args: SynthArgs, file: &FileConfig) -> CliResult {
    let out = required(args.out.or_else(|| file.out.clone()), "out")?;
    let mut spec = match (
        args.spec.or_else(|| file.spec.clone()),
        args.preset.or_else(|| file.preset.clone()),
    ) {
        (Some(_), Some(_)) => return Err(usage("--spec and --preset are mutually exclusive")),
        (Some(path), None) => {
            let text = std::fs::read_to_string(&path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            serde_json::from_str::<SyntheticLayoutSpec>(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?
        }
        (None, preset) => match preset.as_deref() {
            None | Some("limericks") => SyntheticLayoutSpec::limericks(),
            Some("single-line") => SyntheticLayoutSpec {
                columns: vec![vec![BlockSpec::text(1)]],
                ..SyntheticLayoutSpec::limericks()
            },
            Some(other) => {
                return Err(usage(format!(
                    "unknown preset {other:?} (expected limericks or single-line)"
                )))
            }
        },
    };
    if let Some(seed) = args.seed.or(file.seed) {
        spec.seed = seed;
    }
    let layout = synth::generate_layout(&spec).map_err(|e| usage(e.to_string()))?;
    for (g, name) in [(Granularity::Line, "line"), (Granularity::Paragraph, "paragraph")] {
        let page = layout.gt_page(g, "synthetic");
        let manifest = DatasetManifest {
            format: GtFormat::SsuJson,
            classes: layout.classes.clone(),
            pages: vec![page],
            warnings: Vec::new(),
        };
        let gt_path = out.join(format!("gt_{name}.json"));
        let pred_path = out.join(format!("pred_{name}.json"));
        ssu_json::write_ssu_json(&SsuDocument::from_manifest(&manifest)?, &gt_path)?;
        coco::write_coco_predictions(
            &PredictionSet::from_records(layout.perfect_predictions(g, "synthetic")),
            &pred_path,
        )?;
        let ssus = layout.labelled_page(g)?.ssus().len();
        println!(
            "{name}: {} regions, {ssus} SSUs -> {}, {}",
            layout.regions(g).len(),
            gt_path.display(),
            pred_path.display()
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let file = match FileConfig::load(cli.config.as_deref()) {
        Ok(f) => f,
        Err(msg) => {
            eprintln!("error: config {msg}");
            return ExitCode::from(2);
        }
    };
    let outcome = match cli.command {
        Command::Evaluate(a) => evaluate(a, &file),
        Command::LabelSsu(a) => label_ssu(a, &file),
        Command::Visualize(a) => visualize(a, &file),
        Command::Synth(a) => synth_cmd(a, &file),
        Command::CompareSsu(a) => compare(a, &file),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Eval(e)) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(1)
        }
    }
}
