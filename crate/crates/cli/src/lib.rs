//! `clarify` command line: annotate, replay, validate, stats, kappa, compare, serve.
//!
//! Exit status is 0 on success, 1 on data errors and 2 on usage errors.
//! Reports go to stdout, diagnostics to stderr.

mod annotate;
mod resolve;

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::PathBuf;

use clap::{CommandFactory, Parser, Subcommand, ValueEnum};
use clarify_core::agreement::{cohen_kappa, confusion_matrix, format_kappa, LabelSpace};
use clarify_core::corpus::validate_corpus;
use clarify_core::fixtures;
use clarify_core::recipe::{Label, Session};
use clarify_core::stats::{comparison_table, parse_summaries, CorpusSummary};

pub use resolve::{Context, CORPUS_DIR_ENV};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "clarify", version, about = "Clarification request annotation")]
pub struct CliConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum Format {
    #[default]
    Text,
    Records,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum Space {
    /// Compare CR levels only.
    #[default]
    Level,
    /// Compare CR level and source turn.
    Source,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Annotate a dialogue interactively; the session file is saved after every answer.
    Annotate {
        #[arg(long)]
        corpus: String,
        #[arg(long)]
        dialogue: String,
        #[arg(long)]
        annotator: String,
        /// Session file; resumed if it exists.
        #[arg(long)]
        session: PathBuf,
    },
    /// Replay a session file and print the resulting annotations.
    Replay {
        #[arg(long)]
        corpus: String,
        #[arg(long)]
        session: String,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
        /// Also write the replayed session file here.
        #[arg(long)]
        export: Option<PathBuf>,
    },
    /// Check a corpus file and list every violation.
    Validate {
        #[arg(long)]
        corpus: String,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// CR rate and level distribution over one or more sessions.
    Stats {
        #[arg(long)]
        corpus: String,
        #[arg(long = "session", required = true)]
        sessions: Vec<String>,
        /// Column name; defaults to the corpus name.
        #[arg(long)]
        name: Option<String>,
        #[arg(long, default_value = "")]
        task: String,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Cohen's kappa between two annotators of the same dialogue.
    Kappa {
        #[arg(long)]
        corpus: String,
        /// Give exactly two.
        #[arg(long = "session", required = true)]
        sessions: Vec<String>,
        #[arg(long, value_enum, default_value_t)]
        space: Space,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Side-by-side comparison table of corpus summaries.
    Compare {
        /// Bundled summaries; only `table4` exists.
        #[arg(long)]
        fixtures: Option<String>,
        /// Summary record files (one JSON record per line).
        #[arg(long = "summary")]
        summaries: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Serve the HTTP session API.
    Serve {
        #[arg(long = "corpus", required = true)]
        corpora: Vec<String>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Directory sessions are persisted to.
        #[arg(long)]
        store: Option<PathBuf>,
    },
}

impl CliConfig {
    /// Requirements clap cannot express directly.
    fn checked(self) -> Result<Self, clap::Error> {
        if let Command::Kappa { sessions, .. } = &self.command {
            if sessions.len() != 2 {
                let msg = format!("kappa compares exactly two sessions, {} given", sessions.len());
                return Err(CliConfig::command().error(clap::error::ErrorKind::WrongNumberOfValues, msg));
            }
        }
        Ok(self)
    }
}

/// A data error with its context already in the message.
#[derive(Debug)]
pub struct Failure(pub String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

/// Runs with the corpus directory taken from the environment.
pub fn run_cli<I, S>(args: I, stdin: &mut dyn BufRead, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    run_with(&Context::from_env(), args, stdin, stdout, stderr)
}

pub fn run_with<I, S>(
    ctx: &Context,
    args: I,
    stdin: &mut dyn BufRead,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let config = match CliConfig::try_parse_from(args).and_then(CliConfig::checked) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(rendered.as_bytes())
            } else {
                stdout.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    match dispatch(ctx, config.command, stdin, stdout, stderr) {
        Ok(()) => EXIT_OK,
        Err(Failure(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_DATA
        }
    }
}

fn dispatch(
    ctx: &Context,
    command: Command,
    stdin: &mut dyn BufRead,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Outcome {
    match command {
        Command::Annotate {
            corpus,
            dialogue,
            annotator,
            session,
        } => {
            let corpus = ctx.corpus(&corpus)?;
            annotate::run(&corpus, &dialogue, &annotator, &session, stdin, stdout)
        }
        Command::Replay {
            corpus,
            session,
            format,
            export,
        } => replay(ctx, &corpus, &session, format, export, stdout),
        Command::Validate { corpus, format } => validate(ctx, &corpus, format, stdout),
        Command::Stats {
            corpus,
            sessions,
            name,
            task,
            format,
        } => stats(ctx, &corpus, &sessions, name, &task, format, stdout),
        Command::Kappa {
            corpus,
            sessions,
            space,
            format,
        } => kappa(ctx, &corpus, &sessions, space, format, stdout),
        Command::Compare {
            fixtures,
            summaries,
            format,
        } => compare(fixtures.as_deref(), &summaries, format, stdout),
        Command::Serve {
            corpora,
            port,
            host,
            store,
        } => {
            let corpora = corpora.iter().map(|c| ctx.corpus(c)).collect::<Result<Vec<_>, _>>()?;
            let mut service = clarify_service::Service::new(corpora);
            if let Some(dir) = store {
                service = service
                    .with_store(&dir)
                    .map_err(|e| Failure(format!("{}: {e}", dir.display())))?;
            }
            let addr = format!("{host}:{port}");
            writeln!(stderr, "serving on http://{addr}")?;
            clarify_service::serve(&addr, service).map_err(|e| Failure(format!("{addr}: {e}")))
        }
    }
}

fn replayed(ctx: &Context, corpus: &str, session: &str) -> Result<Session, Failure> {
    let corpus = ctx.corpus(corpus)?;
    let log = ctx.session_log(session)?;
    clarify_core::replay(&corpus, &log).map_err(|e| Failure(format!("{session}: {e}")))
}

fn describe_label(label: &Label) -> String {
    match label {
        Label::Cr { source, level } => format!("CR {level} of ({})", source.index + 1),
        Label::PositiveEvidence { source, level } => format!("evidence {level} on ({})", source.index + 1),
        Label::ProposalIntro => "proposal".into(),
        Label::None => "-".into(),
    }
}

fn replay(
    ctx: &Context,
    corpus: &str,
    session: &str,
    format: Format,
    export: Option<PathBuf>,
    out: &mut dyn Write,
) -> Outcome {
    let s = replayed(ctx, corpus, session)?;
    if let Some(path) = export {
        std::fs::write(&path, s.log().to_session_file()).map_err(|e| Failure(format!("{}: {e}", path.display())))?;
    }
    let ann = s.annotation_set();
    match format {
        Format::Records => {
            for r in ann.records() {
                writeln!(out, "{}", serde_json::to_string(&r)?)?;
            }
        }
        Format::Text => {
            let shown = &s.dialogue().turns[..s.cursor().min(s.dialogue().len())];
            let lines: Vec<String> = shown.iter().map(|t| t.display_line()).collect();
            let width = lines.iter().map(|l| l.chars().count()).max().unwrap_or(0);
            for (t, line) in shown.iter().zip(&lines) {
                let labels: Vec<String> = ann
                    .for_turn(t.index)
                    .map(|a| {
                        let mut l = describe_label(&a.label);
                        if let Some(tag) = a.gp_tag {
                            let _ = write!(l, " ({})", serde_json::to_value(tag)?.as_str().unwrap_or(""));
                        }
                        Ok::<_, Failure>(l)
                    })
                    .collect::<Result<_, _>>()?;
                writeln!(out, "{line:<width$}  {}", labels.join(", "))?;
            }
            if !s.is_finished() {
                writeln!(out, "(session stops at turn ({}))", s.cursor() + 1)?;
            }
            writeln!(out, "{} CRs over {} turns", ann.cr_count(), s.dialogue().len())?;
        }
    }
    Ok(())
}

fn validate(ctx: &Context, corpus: &str, format: Format, out: &mut dyn Write) -> Outcome {
    let c = ctx.corpus_lenient(corpus)?;
    let violations = validate_corpus(&c);
    for v in &violations {
        match format {
            Format::Text => writeln!(out, "{v}")?,
            Format::Records => writeln!(out, "{}", serde_json::to_string(v)?)?,
        }
    }
    if violations.is_empty() {
        if format == Format::Text {
            writeln!(
                out,
                "{}: {} dialogues, {} turns, no violations",
                c.corpus_id,
                c.dialogues.len(),
                c.total_turns()
            )?;
        }
        Ok(())
    } else {
        Err(Failure(format!("{corpus}: {} violation(s)", violations.len())))
    }
}

fn stats(
    ctx: &Context,
    corpus: &str,
    sessions: &[String],
    name: Option<String>,
    task: &str,
    format: Format,
    out: &mut dyn Write,
) -> Outcome {
    let replays = sessions
        .iter()
        .map(|s| replayed(ctx, corpus, s))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(s) = replays.iter().find(|s| !s.is_finished()) {
        return Err(Failure(format!(
            "session for {:?} by {:?} is unfinished (at turn ({}))",
            s.dialogue_id(),
            s.annotator_id(),
            s.cursor() + 1
        )));
    }
    let pairs: Vec<_> = replays.iter().map(|s| (s.dialogue(), s.annotation_set())).collect();
    let name = name.unwrap_or_else(|| replays[0].corpus_id().to_string());
    let summary = CorpusSummary::from_annotations(&name, task, &pairs)?;
    emit_report(&[summary], format, out)
}

fn kappa(
    ctx: &Context,
    corpus: &str,
    sessions: &[String],
    space: Space,
    format: Format,
    out: &mut dyn Write,
) -> Outcome {
    let a = replayed(ctx, corpus, &sessions[0])?;
    let b = replayed(ctx, corpus, &sessions[1])?;
    let (a, b) = (a.annotation_set(), b.annotation_set());
    let space = match space {
        Space::Level => LabelSpace::by_level(),
        Space::Source => LabelSpace::source_sensitive(a, b),
    };
    let m = confusion_matrix(a, b, &space)?;
    let report = cohen_kappa(&m)?;
    match format {
        Format::Records => {
            let mut v = serde_json::to_value(report)?;
            v["labels"] = serde_json::to_value(&m.labels)?;
            v["counts"] = serde_json::to_value(&m.counts)?;
            writeln!(out, "{v}")?;
        }
        Format::Text => {
            writeln!(out, "{report}")?;
            let width = m.labels.iter().map(String::len).max().unwrap_or(0).max(5);
            write!(out, "{:width$}", "")?;
            for l in &m.labels {
                write!(out, " {l:>width$}")?;
            }
            writeln!(out)?;
            for (l, row) in m.labels.iter().zip(&m.counts) {
                write!(out, "{l:width$}")?;
                for c in row {
                    write!(out, " {c:>width$}")?;
                }
                writeln!(out)?;
            }
            if let Some(k) = report.kappa {
                writeln!(out, "kappa = {}", format_kappa(k))?;
            }
        }
    }
    Ok(())
}

fn compare(fixture: Option<&str>, files: &[PathBuf], format: Format, out: &mut dyn Write) -> Outcome {
    let mut summaries = Vec::new();
    match fixture {
        Some("table4") => summaries.extend(fixtures::table4()),
        Some(other) => return Err(Failure(format!("unknown fixture {other:?} (available: table4)"))),
        None => {}
    }
    for path in files {
        let text = std::fs::read_to_string(path).map_err(|e| Failure(format!("{}: {e}", path.display())))?;
        summaries.extend(parse_summaries(&text).map_err(|e| Failure(format!("{}: {e}", path.display())))?);
    }
    if summaries.is_empty() {
        return Err(Failure("nothing to compare: pass --fixtures or --summary".into()));
    }
    emit_report(&summaries, format, out)
}

fn emit_report(summaries: &[CorpusSummary], format: Format, out: &mut dyn Write) -> Outcome {
    for s in summaries {
        s.check().map_err(Failure)?;
    }
    let report = comparison_table(summaries);
    match format {
        Format::Text => out.write_all(report.render_text().as_bytes())?,
        Format::Records => out.write_all(report.render_records().as_bytes())?,
    }
    Ok(())
}
