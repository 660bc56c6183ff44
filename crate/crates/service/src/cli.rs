//! The `fdexplain` subcommands other than `serve`.
//!
//! Exit codes: 0 on success, 1 when `diagnose` finds no symptom, 2 on any
//! input error.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use fdexplain::lang::{
    export_explanation, parse_expected, render_closure, DiagnosisReport, DocumentMetadata,
};
use fdexplain::{
    find_symptoms, question_sentence, Answer, DiagnosisSession, ExpectedEnv, Strategy, Universe,
    ValuePair,
};

use crate::{parse_pair, schedule_for, LoadedModel};

#[derive(Debug, Parser)]
#[command(name = "fdexplain", version, about = "Finite-domain propagation with explanations and missing-answer diagnosis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Propagate a model and print the kept values of every variable.
    Solve(SolveArgs),
    /// Print the explanation of a removed value as a JSON document.
    Explain(ExplainArgs),
    /// Locate the constraint responsible for a missing value.
    Diagnose(DiagnoseArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Model file (.fd).
    pub model: PathBuf,
    /// Also print every operator application that removed values.
    #[arg(long)]
    pub trace: bool,
    /// Pick pending operators at random with this seed instead of FIFO.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    pub model: PathBuf,
    /// The removed value, as VAR=value.
    #[arg(long = "value", value_name = "VAR=VALUE")]
    pub value: String,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    pub model: PathBuf,
    /// Expected environment (.expect): lines `VAR: v1 v2 ...`.
    pub expected: PathBuf,
    /// Answers, one per line: yes, no or unknown, optionally followed by
    /// the pair asked about, e.g. `yes (MA,3)` or `no MP=1`. Without a
    /// script, questions are asked on the terminal.
    #[arg(long)]
    pub script: Option<PathBuf>,
    /// Question selection: dac (divide and conquer) or topdown.
    #[arg(long, default_value = "dac", value_parser = parse_strategy)]
    pub strategy: Strategy,
    /// Diagnose this symptom instead of the first one, as VAR=value.
    #[arg(long, value_name = "VAR=VALUE")]
    pub symptom: Option<String>,
    /// Print the diagnosis report as JSON.
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse()
}

/// Failure of a subcommand: message and exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

fn input_error(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

fn load(path: &Path, seed: Option<u64>) -> Result<LoadedModel, Failure> {
    let text = read(path)?;
    LoadedModel::from_text(&text, schedule_for(seed))
        .map_err(|e| input_error(format!("{}:{e}", path.display())))
}

/// Runs a non-serving subcommand; returns the exit code.
pub fn run(command: &Command, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match command {
        Command::Solve(args) => solve(args, out),
        Command::Explain(args) => explain(args, out),
        Command::Diagnose(args) => diagnose(args, input, out),
        Command::Serve(_) => Err(input_error("`serve` is not handled here")),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(err, "{}", f.message);
            f.code
        }
    }
}

fn io(e: std::io::Error) -> Failure {
    input_error(format!("write failed: {e}"))
}

fn solve(args: &SolveArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let model = load(&args.model, args.seed)?;
    let u = model.csp.universe();
    if args.trace {
        for (i, step) in model.closure.steps().iter().enumerate() {
            let op = model.program.operator(step.operator);
            let removed: Vec<String> = step.removed.iter().map(|&p| u.show(p)).collect();
            writeln!(
                out,
                "step {}: {} [{}] removes {}",
                i + 1,
                op.render(u),
                op.constraint_label,
                removed.join(", ")
            )
            .map_err(io)?;
        }
        writeln!(
            out,
            "{} operator applications, {} removals",
            model.closure.applications(),
            model.closure.store().len()
        )
        .map_err(io)?;
    }
    write!(out, "{}", render_closure(model.closure.final_env())).map_err(io)
}

fn explain(args: &ExplainArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let model = load(&args.model, args.seed)?;
    let u = model.csp.universe();
    let pair = parse_pair(&model, &args.value).map_err(input_error)?;
    match model.closure.explanation_for(pair).map_err(|e| input_error(e.to_string()))? {
        None => writeln!(out, "{} was kept: it belongs to the closure", u.show(pair)).map_err(io),
        Some(tree) => {
            let meta = DocumentMetadata::new(&model.csp, model.closure.schedule());
            let doc = export_explanation(&tree, u, meta);
            writeln!(out, "{}", doc.to_json()).map_err(io)
        }
    }
}

/// One line of an answer script.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptLine {
    pub line: usize,
    pub answer: Answer,
    /// The pair the answer is meant for, when the script names it.
    pub pair: Option<(String, i64)>,
}

/// Parses an answer script. Blank lines and `#` comments are skipped.
pub fn parse_script(text: &str) -> Result<Vec<ScriptLine>, String> {
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let n = i + 1;
        let split = line.find(|c: char| c.is_whitespace() || c == ',').unwrap_or(line.len());
        let answer: Answer = line[..split].parse().map_err(|e| format!("script line {n}: {e}"))?;
        let rest = line[split..].trim_start_matches(|c: char| c.is_whitespace() || c == ',');
        let pair = if rest.is_empty() {
            None
        } else {
            Some(parse_named_pair(rest).ok_or_else(|| {
                format!("script line {n}: expected (VAR,value) or VAR=value, got `{rest}`")
            })?)
        };
        lines.push(ScriptLine { line: n, answer, pair });
    }
    Ok(lines)
}

fn parse_named_pair(text: &str) -> Option<(String, i64)> {
    let text = text.trim();
    let (var, value) = if let Some(inner) = text.strip_prefix('(').and_then(|t| t.strip_suffix(')')) {
        inner.split_once(',')?
    } else {
        text.split_once('=')?
    };
    let var = var.trim();
    if var.is_empty() {
        return None;
    }
    Some((var.to_string(), value.trim().parse().ok()?))
}

enum Oracle<'a> {
    Script(std::vec::IntoIter<ScriptLine>),
    Terminal(&'a mut dyn BufRead),
}

impl Oracle<'_> {
    fn ask(&mut self, u: &Universe, pair: ValuePair, out: &mut dyn Write) -> Result<Answer, Failure> {
        let sentence = question_sentence(u, pair);
        match self {
            Oracle::Script(lines) => {
                let line = lines.next().ok_or_else(|| {
                    input_error(format!("script ended before the session finished; next question: {sentence}"))
                })?;
                if let Some((var, value)) = &line.pair {
                    if u.name(pair.var) != var || pair.value != *value {
                        return Err(input_error(format!(
                            "script line {} answers ({var},{value}) but the question is {sentence}",
                            line.line
                        )));
                    }
                }
                Ok(line.answer)
            }
            Oracle::Terminal(input) => loop {
                write!(out, "{sentence} [yes/no/unknown] ").map_err(io)?;
                out.flush().map_err(io)?;
                let mut reply = String::new();
                if input.read_line(&mut reply).map_err(io)? == 0 {
                    return Err(input_error("input ended before the session finished"));
                }
                match reply.parse::<Answer>() {
                    Ok(a) => return Ok(a),
                    Err(e) => writeln!(out, "{e}").map_err(io)?,
                }
            },
        }
    }
}

/// Inputs of a diagnosis run.
#[derive(Debug, Clone, Copy)]
pub struct DiagnoseRequest<'a> {
    /// Expected environment text.
    pub expected: &'a str,
    /// `VAR=value`; defaults to the first symptom.
    pub symptom: Option<&'a str>,
    pub strategy: Strategy,
    /// Answer script; `None` asks on `input`.
    pub script: Option<&'a str>,
    /// Print the symptom and every scripted question and answer.
    pub echo: bool,
}

/// Runs a diagnosis and returns its report.
pub fn diagnose_report(
    model: &LoadedModel,
    request: &DiagnoseRequest<'_>,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
) -> Result<DiagnosisReport, Failure> {
    let DiagnoseRequest {
        expected: expected_text,
        symptom,
        strategy,
        script,
        echo,
    } = *request;
    let u = model.csp.universe();
    let expected = parse_expected(expected_text, u).map_err(|e| input_error(format!("expected environment: {e}")))?;
    let expected = ExpectedEnv::from_environment(&expected);
    let symptoms = find_symptoms(&model.closure, &expected);
    let symptom = match symptom {
        Some(text) => {
            let pair = parse_pair(model, text).map_err(input_error)?;
            if !symptoms.contains(&pair) {
                return Err(input_error(format!("{} is not a symptom", u.show(pair))));
            }
            pair
        }
        None => *symptoms.first().ok_or(Failure {
            code: 1,
            message: "no symptom: every expected value is in the closure".into(),
        })?,
    };
    let mut oracle = match script {
        Some(text) => Oracle::Script(parse_script(text).map_err(input_error)?.into_iter()),
        None => Oracle::Terminal(input),
    };
    let tree = model
        .closure
        .explanation_for(symptom)
        .map_err(|e| input_error(e.to_string()))?
        .expect("symptoms are removed values");
    let mut session = DiagnosisSession::with_expected(&tree, strategy, &expected)
        .map_err(|e| input_error(e.to_string()))?;
    if echo {
        writeln!(out, "symptom: {} ({} nodes in its explanation)", u.show(symptom), tree.len()).map_err(io)?;
    }
    while let Some(q) = session.pending() {
        let answer = oracle.ask(u, q, out)?;
        if echo {
            if let Oracle::Script(_) = oracle {
                writeln!(out, "{} {}", question_sentence(u, q), answer).map_err(io)?;
            }
        }
        session.answer(q, answer).map_err(|e| input_error(e.to_string()))?;
    }
    let diagnosis = session.result().map_err(|e| input_error(e.to_string()))?;
    Ok(DiagnosisReport::new(&model.program, &session, &diagnosis))
}

fn diagnose(args: &DiagnoseArgs, input: &mut dyn BufRead, out: &mut dyn Write) -> Result<(), Failure> {
    let model = load(&args.model, args.seed)?;
    let expected = read(&args.expected)?;
    let script = args.script.as_deref().map(read).transpose()?;
    let request = DiagnoseRequest {
        expected: &expected,
        symptom: args.symptom.as_deref(),
        strategy: args.strategy,
        script: script.as_deref(),
        echo: !args.json,
    };
    let report = diagnose_report(&model, &request, input, out)?;
    if args.json {
        let json = serde_json::to_string_pretty(&report).expect("reports serialize");
        return writeln!(out, "{json}").map_err(io);
    }
    print_report(&report, out).map_err(io)
}

fn print_report(report: &DiagnosisReport, out: &mut dyn Write) -> std::io::Result<()> {
    match report.kind {
        fdexplain::lang::DiagnosisKind::Located => {
            let f = &report.faults[0];
            writeln!(out, "minimal symptom: {}", f.minimal_symptom.label)?;
            writeln!(out, "erroneous rule: {}", f.rule)?;
            writeln!(out, "operator: {} (#{})", f.operator, f.operator_id)?;
            writeln!(out, "constraint: {}", f.constraint)
        }
        fdexplain::lang::DiagnosisKind::Candidates => {
            writeln!(out, "no single culprit; candidate erroneous rules:")?;
            for f in &report.faults {
                writeln!(out, "  {}  from {}  ({})", f.rule, f.constraint, f.operator)?;
            }
            Ok(())
        }
    }
}
