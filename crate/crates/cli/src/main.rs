//! `lmquery`: compile regex queries against a vocabulary, enumerate or
//! sample matches under a scorer, and run the experiment harnesses.
//!
//! Data goes to stdout (JSON lines), diagnostics to stderr. Exit status is
//! 0 on success, 1 for usage or configuration errors, 2 for runtime errors.

mod config;
mod spec;

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use lmquery::harness::{self, sha256_hex, RunManifest};
use lmquery::regex::{CompileOptions, Dfa};
use lmquery::scorer::Scorer;
use lmquery::transducer::{transduce, TokenAutomaton, TransduceOptions};
use lmquery::traversal::{sample, Prompt, QuerySpec, ShortestPaths, TopKScope};
use lmquery::vocab::{TokenId, TokenTrie, Vocabulary};
use serde_json::json;

use crate::spec::ScorerSpec;

#[derive(Parser, Debug)]
#[command(name = "lmquery", version, about = "Regular-expression queries over language models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compile a pattern to a token automaton and print its canonical form.
    Compile {
        pattern: String,
        #[command(flatten)]
        automaton: AutomatonArgs,
        /// Also write a Graphviz rendering here.
        #[arg(long)]
        dot: Option<PathBuf>,
        /// Write the canonical form here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stream matches in order of decreasing probability.
    Enumerate {
        pattern: String,
        #[command(flatten)]
        automaton: AutomatonArgs,
        #[command(flatten)]
        query: QueryArgs,
        #[arg(long, default_value_t = 10)]
        limit: usize,
    },
    /// Draw matches from the model restricted to the pattern.
    Sample {
        pattern: String,
        #[command(flatten)]
        automaton: AutomatonArgs,
        #[command(flatten)]
        query: QueryArgs,
        #[arg(long, default_value_t = 10)]
        num: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        temperature: f64,
        #[arg(long, default_value_t = lmquery::traversal::DEFAULT_MAX_RETRIES)]
        max_retries: usize,
    },
    /// URL memorization: enumeration vs. sampling baselines, with validation.
    EvalMem { config: PathBuf },
    /// Last-word prediction under the four query types.
    EvalLambada { config: PathBuf },
    /// Gender × profession association.
    EvalBias { config: PathBuf },
}

#[derive(clap::Args, Debug)]
struct AutomatonArgs {
    /// Vocabulary file (JSON lines).
    #[arg(long)]
    vocab: PathBuf,
    /// Require EOS after a match.
    #[arg(long)]
    terminated: bool,
    /// Comma-separated token ids never used in a match.
    #[arg(long, value_delimiter = ',')]
    deny: Vec<TokenId>,
    #[arg(long, default_value_t = lmquery::regex::DEFAULT_MAX_DFA_STATES)]
    max_dfa_states: usize,
}

#[derive(clap::Args, Debug)]
struct QueryArgs {
    /// uniform | ngram:<corpus>:<order>:<alpha> | fixture:<path> | remote:<url>
    #[arg(long)]
    scorer: String,
    /// Prompt text, greedily tokenized. `sample` accepts several and draws
    /// one uniformly per sample.
    #[arg(long)]
    prompt: Vec<String>,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long, value_enum, default_value_t = Scope::FullVocab)]
    topk_scope: Scope,
    #[arg(long, default_value_t = lmquery::traversal::DEFAULT_MAX_MATCH_TOKENS)]
    max_tokens: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Scope {
    FullVocab,
    AllowedOnly,
}

impl From<Scope> for TopKScope {
    fn from(s: Scope) -> Self {
        match s {
            Scope::FullVocab => TopKScope::FullVocab,
            Scope::AllowedOnly => TopKScope::AllowedOnly,
        }
    }
}

/// An error tagged with the exit status it maps to.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

trait Classify<T> {
    fn usage(self) -> Result<T, Failure>;
    fn runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure { code: 1, err: e.into() })
    }
    fn runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure { code: 2, err: e.into() })
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, err }) => {
            eprintln!("error: {err:#}");
            ExitCode::from(code)
        }
    }
}

fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Compile { pattern, automaton, dot, out } => cmd_compile(&pattern, &automaton, dot, out),
        Command::Enumerate { pattern, automaton, query, limit } => cmd_enumerate(&pattern, &automaton, &query, limit),
        Command::Sample { pattern, automaton, query, num, seed, temperature, max_retries } => {
            cmd_sample(&pattern, &automaton, &query, num, seed, temperature, max_retries)
        }
        Command::EvalMem { config } => eval_mem(&config),
        Command::EvalLambada { config } => eval_lambada(&config),
        Command::EvalBias { config } => eval_bias(&config),
    }
}

fn load_vocab(path: &Path) -> Result<Vocabulary> {
    Vocabulary::load(path).with_context(|| format!("loading vocabulary {}", path.display()))
}

fn build_automaton(pattern: &str, args: &AutomatonArgs, vocab: &Vocabulary) -> Result<TokenAutomaton> {
    let opts = CompileOptions { max_dfa_states: args.max_dfa_states, ..Default::default() };
    let dfa = Dfa::compile_with(pattern, &opts).with_context(|| format!("pattern {pattern:?}"))?;
    let topts = TransduceOptions {
        terminated: args.terminated,
        deny_list: args.deny.iter().copied().collect(),
        ..Default::default()
    };
    Ok(transduce(&dfa, vocab, &TokenTrie::build(vocab), &topts)?)
}

fn cmd_compile(pattern: &str, args: &AutomatonArgs, dot: Option<PathBuf>, out: Option<PathBuf>) -> Result<(), Failure> {
    let vocab = load_vocab(&args.vocab).usage()?;
    let ta = build_automaton(pattern, args, &vocab).usage()?;
    let canonical = ta.canonical();
    match out {
        Some(path) => fs::write(&path, &canonical).with_context(|| format!("writing {}", path.display())).runtime()?,
        None => io::stdout().write_all(canonical.as_bytes()).runtime()?,
    }
    if let Some(path) = dot {
        fs::write(&path, ta.to_dot(&vocab)).with_context(|| format!("writing {}", path.display())).runtime()?;
    }
    eprintln!("states={} edges={}", ta.num_states(), ta.num_edges());
    Ok(())
}

struct Setup {
    vocab: Vocabulary,
    automaton: TokenAutomaton,
    scorer: Box<dyn Scorer>,
    prompts: Vec<Vec<TokenId>>,
}

fn setup(pattern: &str, args: &AutomatonArgs, query: &QueryArgs) -> Result<Setup> {
    let scorer_spec = ScorerSpec::parse(&query.scorer, Path::new(""))?;
    anyhow::ensure!(query.top_k != Some(0), "--top-k must be at least 1");
    anyhow::ensure!(query.max_tokens >= 1, "--max-tokens must be at least 1");
    let vocab = load_vocab(&args.vocab)?;
    let automaton = build_automaton(pattern, args, &vocab)?;
    let trie = TokenTrie::build(&vocab);
    let prompts = query
        .prompt
        .iter()
        .map(|p| vocab.encode_greedy(&trie, p.as_bytes()).with_context(|| format!("prompt {p:?}")))
        .collect::<Result<Vec<_>>>()?;
    let scorer = scorer_spec.build(vocab.size())?;
    Ok(Setup { vocab, automaton, scorer, prompts })
}

fn query_spec<'a>(s: &'a Setup, query: &QueryArgs) -> QuerySpec<'a> {
    let mut spec = QuerySpec::new(&s.automaton, &s.vocab);
    spec.top_k = query.top_k;
    spec.topk_scope = query.topk_scope.into();
    spec.max_match_tokens = query.max_tokens;
    spec
}

fn cmd_enumerate(pattern: &str, args: &AutomatonArgs, query: &QueryArgs, limit: usize) -> Result<(), Failure> {
    let s = setup(pattern, args, query).usage()?;
    let mut spec = query_spec(&s, query);
    match s.prompts.as_slice() {
        [] => {}
        [p] => spec.prompt = Prompt::Fixed(p.clone()),
        _ => return Err(anyhow::anyhow!("enumerate takes at most one --prompt")).usage(),
    }
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for result in ShortestPaths::new(spec, &s.scorer).usage()?.take(limit) {
        let result = result.runtime()?;
        writeln!(out, "{}", result.to_json_line()).and_then(|_| out.flush()).runtime()?;
    }
    Ok(())
}

fn cmd_sample(
    pattern: &str,
    args: &AutomatonArgs,
    query: &QueryArgs,
    num: usize,
    seed: u64,
    temperature: f64,
    max_retries: usize,
) -> Result<(), Failure> {
    let s = setup(pattern, args, query).usage()?;
    let mut spec = query_spec(&s, query);
    spec.seed = seed;
    spec.temperature = temperature;
    spec.max_retries = max_retries;
    spec.prompt = match s.prompts.len() {
        0 => Prompt::default(),
        1 => Prompt::Fixed(s.prompts[0].clone()),
        _ => Prompt::UniformChoice(s.prompts.clone()),
    };
    spec.validate().usage()?;
    let outcomes = sample(&spec, &s.scorer, num).runtime()?;
    let mut out = BufWriter::new(io::stdout().lock());
    for (i, o) in outcomes.iter().enumerate() {
        writeln!(out, "{}", o.to_json_line(i + 1)).runtime()?;
    }
    out.flush().runtime()
}

/// Creates the output directory and writes the named files into it.
struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    fn create(dir: PathBuf) -> Result<Self> {
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Outputs { dir, written: Vec::new() })
    }

    fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn finish(mut self, command: &str, seed: u64, config: &[u8], started: Instant, summary: serde_json::Value) -> Result<()> {
        self.written.push("manifest.json".into());
        let manifest = RunManifest {
            command: command.into(),
            seed,
            config_sha256: sha256_hex(config),
            wall_time_s: started.elapsed().as_secs_f64(),
            outputs: self.written.clone(),
            summary: summary.clone(),
        };
        manifest.write(self.dir.join("manifest.json"))?;
        println!("{summary}");
        Ok(())
    }
}

fn eval_mem(path: &Path) -> Result<(), Failure> {
    let started = Instant::now();
    let loaded = config::load::<config::MemConfig>(path).usage()?;
    let c = &loaded.config;
    c.experiment.validate().usage()?;
    c.validation.check().usage()?;
    let scorer_spec = loaded.scorer_spec(&c.scorer).usage()?;
    let vocab = load_vocab(&loaded.resolve(&c.vocab)).usage()?;
    let scorer = scorer_spec.build(vocab.size()).usage()?;
    let validator = c.validation.build();
    let mut outputs = Outputs::create(loaded.resolve(&c.output_dir)).runtime()?;

    let mut records = harness::run_memorization(scorer, &vocab, &c.experiment).runtime()?;
    harness::validate_urls(&mut records, validator.as_ref(), c.validation.max_concurrency);
    let report = harness::throughput_report(&records);

    outputs.write("records.csv", harness::report::records_csv(&records)).runtime()?;
    outputs.write("throughput.csv", report.curve_csv()).runtime()?;
    outputs.write("throughput_summary.csv", report.summary_csv()).runtime()?;
    let arms: Vec<serde_json::Value> = report
        .summary
        .iter()
        .map(|s| {
            json!({
                "arm": s.arm.to_string(),
                "records": s.records,
                "unique_valid": s.unique_valid,
                "valid_with_dupes": s.valid_with_dupes,
                "duplicate_fraction": s.duplicate_fraction(),
                "unique_valid_per_s": finite_or_null(s.throughput),
                "ratio_vs_best_baseline": finite_or_null(s.ratio_vs_best_baseline),
            })
        })
        .collect();
    outputs
        .finish("eval-mem", c.experiment.seed, &loaded.bytes, started, json!({ "arms": arms }))
        .runtime()
}

fn finite_or_null(x: f64) -> serde_json::Value {
    if x.is_finite() {
        json!(x)
    } else {
        serde_json::Value::Null
    }
}

fn eval_lambada(path: &Path) -> Result<(), Failure> {
    let started = Instant::now();
    let loaded = config::load::<config::LambadaFileConfig>(path).usage()?;
    let c = &loaded.config;
    if c.experiment.query_types.is_empty() {
        return Err(anyhow::anyhow!("query_types must not be empty")).usage();
    }
    let scorer_spec = loaded.scorer_spec(&c.scorer).usage()?;
    let vocab = load_vocab(&loaded.resolve(&c.vocab)).usage()?;
    let dataset = harness::load_dataset(loaded.resolve(&c.dataset)).usage()?;
    let scorer = scorer_spec.build(vocab.size()).usage()?;
    let mut outputs = Outputs::create(loaded.resolve(&c.output_dir)).runtime()?;

    let report = harness::run_language_understanding(scorer, &vocab, &dataset, &c.experiment).runtime()?;
    outputs.write("accuracy.csv", report.table_csv()).runtime()?;
    outputs.write("examples.csv", report.examples_csv()).runtime()?;
    let accuracy: serde_json::Map<String, serde_json::Value> = report
        .hits
        .keys()
        .map(|q| (q.to_string(), json!(report.accuracy(*q).unwrap_or(0.0))))
        .collect();
    outputs
        .finish("eval-lambada", 0, &loaded.bytes, started, json!({ "examples": report.examples.len(), "accuracy": accuracy }))
        .runtime()
}

fn eval_bias(path: &Path) -> Result<(), Failure> {
    let started = Instant::now();
    let loaded = config::load::<config::BiasFileConfig>(path).usage()?;
    let c = &loaded.config;
    c.experiment.validate().usage()?;
    let scorer_spec = loaded.scorer_spec(&c.scorer).usage()?;
    let vocab = load_vocab(&loaded.resolve(&c.vocab)).usage()?;
    let scorer = scorer_spec.build(vocab.size()).usage()?;
    let mut outputs = Outputs::create(loaded.resolve(&c.output_dir)).runtime()?;

    let estimate = harness::run_bias(scorer, &vocab, &c.experiment).runtime()?;
    outputs.write("bias_matrix.csv", estimate.matrix_csv()).runtime()?;
    let summary = json!({
        "samples": estimate.num_samples,
        "dead_end_rate": estimate.dead_end_rate(),
        "gender_marginals": estimate
            .genders
            .iter()
            .zip(estimate.gender_marginals())
            .map(|(g, m)| (g.clone(), json!(m)))
            .collect::<serde_json::Map<_, _>>(),
    });
    outputs.finish("eval-bias", c.experiment.seed, &loaded.bytes, started, summary).runtime()
}
