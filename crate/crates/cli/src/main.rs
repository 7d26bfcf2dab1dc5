use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use coref_harmonize::convert::ApposLinking;
use coref_harmonize::pipeline::{
    parse_config, render_report, run_convert, run_merge, run_stats, run_validate, MergePolicy,
    MismatchPolicy, ReportFormat, RunConfig, RunReport,
};
use coref_harmonize::stats::render_stats_table;

#[derive(Parser)]
#[command(name = "corefud", version, about = "Convert, check and merge CorefUD coreference files")]
struct Cli {
    /// Rendering of the run report.
    #[arg(long, value_enum, global = true, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum OnMismatch {
    Abort,
    Skip,
}

#[derive(Clone, Copy, ValueEnum)]
enum Linking {
    MergeIntoHeadChain,
    SeparateCluster,
}

#[derive(Subcommand)]
enum Command {
    /// Convert OntoNotes coreference/parse pairs listed in a manifest.
    Convert {
        /// Lines of `coref_path<TAB>parse_path`, relative to the manifest.
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// `key = value` settings; flags below override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        timeout_seconds: Option<f64>,
        #[arg(long, value_enum)]
        appos_linking: Option<Linking>,
        /// Also insert empty nodes for traces outside coreference spans.
        #[arg(long)]
        include_non_coref_zeros: bool,
        /// Write documents that carry no coreference.
        #[arg(long)]
        keep_unannotated: bool,
        /// Do not insert empty nodes at all.
        #[arg(long)]
        no_zeros: bool,
    },
    /// Corpus statistics over every .conllu file in a directory.
    Stats {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        json: bool,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Merge predicted coreference into base treebank files.
    Merge {
        /// A file, or a directory of .conllu files.
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = OnMismatch::Abort)]
        on_mismatch: OnMismatch,
        /// Leave out predicted empty nodes and the mentions ending on them.
        #[arg(long)]
        no_empty_nodes: bool,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Check scheme invariants of every .conllu file in a directory.
    Validate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        json: bool,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

fn exit_for(report: &RunReport) -> ExitCode {
    if report.all_ok() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn json_object(pairs: Vec<(&str, serde_json::Value)>) -> String {
    let map: serde_json::Map<String, serde_json::Value> =
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    let mut s = serde_json::to_string_pretty(&serde_json::Value::Object(map)).expect("json");
    s.push('\n');
    s
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    let format = match cli.format {
        Format::Text => ReportFormat::Text,
        Format::Json => ReportFormat::Json,
    };
    match cli.command {
        Command::Convert {
            manifest,
            out,
            config,
            jobs,
            timeout_seconds,
            appos_linking,
            include_non_coref_zeros,
            keep_unannotated,
            no_zeros,
        } => {
            let mut run_config = match config {
                Some(path) => {
                    let text = fs::read_to_string(&path)
                        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
                    parse_config(&text).map_err(|e| format!("{}: {e}", path.display()))?
                }
                None => RunConfig::default(),
            };
            if jobs.is_some() {
                run_config.jobs = jobs.filter(|&n| n > 0);
            }
            if let Some(secs) = timeout_seconds {
                if !secs.is_finite() || secs < 0.0 {
                    return Err(format!("bad --timeout-seconds {secs}"));
                }
                run_config.timeout = (secs > 0.0).then(|| Duration::from_secs_f64(secs));
            }
            let conversion = &mut run_config.conversion;
            if let Some(l) = appos_linking {
                conversion.appos_linking = match l {
                    Linking::MergeIntoHeadChain => ApposLinking::MergeIntoHeadChain,
                    Linking::SeparateCluster => ApposLinking::SeparateCluster,
                };
            }
            conversion.include_non_coref_zeros |= include_non_coref_zeros;
            if keep_unannotated {
                conversion.omit_unannotated_docs = false;
            }
            if no_zeros {
                conversion.zero_insertion = false;
            }
            let report = run_convert(&manifest, &out, &run_config).map_err(|e| e.to_string())?;
            print!("{}", render_report(&report, format));
            Ok(exit_for(&report))
        }
        Command::Stats { input, json, jobs } => {
            let (stats, report) = run_stats(&input, jobs).map_err(|e| e.to_string())?;
            if json || format == ReportFormat::Json {
                print!(
                    "{}",
                    json_object(vec![
                        ("report", serde_json::to_value(&report).expect("json")),
                        ("stats", serde_json::to_value(stats).expect("json")),
                    ])
                );
            } else {
                print!("{}\n{}", render_stats_table(&stats), render_report(&report, format));
            }
            Ok(exit_for(&report))
        }
        Command::Validate { input, json, jobs } => {
            let (found, report) = run_validate(&input, jobs).map_err(|e| e.to_string())?;
            if json || format == ReportFormat::Json {
                print!(
                    "{}",
                    json_object(vec![
                        ("report", serde_json::to_value(&report).expect("json")),
                        ("violations", serde_json::to_value(&found).expect("json")),
                    ])
                );
            } else {
                for file in &found {
                    for v in &file.violations {
                        let loc = &v.location;
                        println!(
                            "{}: {} {} {} {:?}: {}",
                            file.path,
                            loc.doc_id,
                            loc.sent_id.as_deref().unwrap_or("-"),
                            loc.item.as_deref().unwrap_or("-"),
                            v.code,
                            v.detail
                        );
                    }
                }
                print!("{}", render_report(&report, format));
            }
            Ok(exit_for(&report))
        }
        Command::Merge {
            base,
            pred,
            out,
            on_mismatch,
            no_empty_nodes,
            jobs,
        } => {
            let policy = MergePolicy {
                on_token_mismatch: match on_mismatch {
                    OnMismatch::Abort => MismatchPolicy::Abort,
                    OnMismatch::Skip => MismatchPolicy::SkipFile,
                },
                copy_empty_nodes: !no_empty_nodes,
            };
            let (report, warnings) =
                run_merge(&base, &pred, &out, &policy, jobs).map_err(|e| e.to_string())?;
            for (path, w) in &warnings {
                eprintln!("warning: {path}: {w}");
            }
            print!("{}", render_report(&report, format));
            Ok(exit_for(&report))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("corefud: {message}");
            ExitCode::from(2)
        }
    }
}
