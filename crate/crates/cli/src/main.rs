mod config;

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use scripta::abbrev::{default_rules, parse_rules};
use scripta::corpus::{
    build_variant, corpus_stats, normalize_hyphenation, parse_ground_truth_str,
    serialize_corpus_to_string, split_corpus, ClassMode,
};
use scripta::metrics::{self, fmt2, CharUnit};
use scripta::normalizer::{evaluate_normalizer, train_normalizer};
use scripta::pipeline::{
    experiment_inputs, render_report, run_experiment, Pipeline, ReportFormat, SegmentModeName,
};
use scripta::segmenter::{evaluate_segmenter, train_segmenter, SegmentMode, WordLexicon};
use scripta::{
    AlignedCorpus, DatasetVariant, EvalReport, NoiseConfig, NormalizerModel, PipelineConfig,
    SegmenterModel, VariantKind,
};

/// Segmentation and abbreviation expansion for medieval Latin transcriptions.
#[derive(Debug, Parser)]
#[command(name = "scripta", version)]
struct Cli {
    /// Config file (TOML, or JSON with a .json extension). Defaults to $SCRIPTA_CONFIG.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print line, token, density and class-inventory counts of a ground-truth file.
    Stats(StatsArgs),
    /// Write one dataset variant as plain text, one line per record.
    BuildDataset(BuildArgs),
    /// Split a ground-truth file into train/dev/test files.
    Split(SplitArgs),
    /// Train a word segmenter.
    TrainSeg(TrainSegArgs),
    /// Insert spaces into unspaced lines.
    Segment(SegmentArgs),
    /// Score a segmenter against spaced gold lines.
    EvalSeg(EvalSegArgs),
    /// Train an abbreviation normaliser.
    TrainNorm(TrainNormArgs),
    /// Expand abbreviations in spaced lines.
    Normalize(NormalizeArgs),
    /// Per-category token accuracy of a normaliser.
    EvalNorm(EvalNormArgs),
    /// Corrupt lines with simulated recognition noise.
    Noise(NoiseArgs),
    /// Run the setups of the config file against a gold corpus.
    Pipeline(PipelineArgs),
    /// Render a saved report.
    Report(ReportArgs),
    /// CER and WER of hypothesis lines against reference lines.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
struct CorpusInput {
    /// Ground-truth JSONL file.
    #[arg(long)]
    input: PathBuf,
    /// Join words broken across lines at this trailing marker before anything else.
    #[arg(long)]
    hyphen_marker: Option<String>,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[command(flatten)]
    corpus: CorpusInput,
    #[arg(long, value_enum, default_value_t = ModeArg::Grapheme)]
    class_mode: ModeArg,
    /// Print JSON instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct BuildArgs {
    #[command(flatten)]
    corpus: CorpusInput,
    #[arg(long)]
    variant: VariantKind,
    /// Output file; standard output when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SplitArgs {
    #[command(flatten)]
    corpus: CorpusInput,
    /// Line counts as TRAIN,DEV,TEST.
    #[arg(long, value_parser = parse_counts)]
    counts: (usize, usize, usize),
    /// Shuffle before splitting (each part keeps document order).
    #[arg(long)]
    shuffle: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory receiving train.jsonl, dev.jsonl and test.jsonl.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct TrainSegArgs {
    /// Training data: ground-truth JSONL or plain-text spaced lines.
    #[arg(long)]
    train: PathBuf,
    /// Development data in the same form; selects the best epoch.
    #[arg(long)]
    dev: Option<PathBuf>,
    /// Spaced variant to learn from when the inputs are JSONL.
    #[arg(long, default_value = "abb1")]
    variant: VariantKind,
    #[arg(long, short)]
    model: PathBuf,
    /// Defaults to the config file value, else 0.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Grapheme,
    Codepoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DecodeArg {
    Threshold,
    LexiconDp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum UnitArg {
    Codepoint,
    Grapheme,
}

impl From<UnitArg> for CharUnit {
    fn from(u: UnitArg) -> Self {
        match u {
            UnitArg::Codepoint => CharUnit::Codepoint,
            UnitArg::Grapheme => CharUnit::Grapheme,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Text,
    Csv,
    Markdown,
    Json,
}

#[derive(Debug, Args)]
struct DecodeOpts {
    #[arg(long, value_enum, default_value_t = DecodeArg::Threshold)]
    decode: DecodeArg,
    /// Normaliser model supplying the word list for lexicon decoding.
    #[arg(long, required_if_eq("decode", "lexicon-dp"))]
    lexicon_model: Option<PathBuf>,
    /// Take words from the abbreviated side of the lexicon.
    #[arg(long)]
    abbreviated: bool,
}

#[derive(Debug, Args)]
struct SegmentArgs {
    #[arg(long, short)]
    model: PathBuf,
    /// Unspaced lines; standard input when omitted.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[command(flatten)]
    decode: DecodeOpts,
}

#[derive(Debug, Args)]
struct EvalSegArgs {
    #[arg(long, short)]
    model: PathBuf,
    /// Gold data: ground-truth JSONL or plain-text spaced lines.
    #[arg(long)]
    gold: PathBuf,
    #[arg(long, default_value = "abb1")]
    variant: VariantKind,
    #[command(flatten)]
    decode: DecodeOpts,
}

#[derive(Debug, Args)]
struct TrainNormArgs {
    /// Ground-truth JSONL.
    #[arg(long)]
    train: PathBuf,
    #[arg(long, short)]
    model: PathBuf,
    /// Sign rules TSV; the built-in table when omitted.
    #[arg(long)]
    rules: Option<PathBuf>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    beam_width: Option<usize>,
    #[arg(long)]
    lm_order: Option<usize>,
}

#[derive(Debug, Args)]
struct NormalizeArgs {
    #[arg(long, short)]
    model: PathBuf,
    /// Spaced abbreviated lines; standard input when omitted.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalNormArgs {
    #[arg(long, short)]
    model: PathBuf,
    /// Ground-truth JSONL test set.
    #[arg(long)]
    test: PathBuf,
}

#[derive(Debug, Args)]
struct NoiseArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    sub_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    del_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    ins_rate: f64,
    /// Replacement graphemes; the input's own inventory when omitted.
    #[arg(long, default_value = "")]
    charset: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct PipelineArgs {
    /// Gold ground-truth JSONL; every variant is derived from it.
    #[arg(long)]
    gold: PathBuf,
    /// Run only these setup ids.
    #[arg(long = "setup")]
    setups: Vec<String>,
    /// Overrides the noise seed of every noisy setup.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Where to save the full report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Text)]
    format: FormatArg,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Report JSON written by `pipeline --report`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Text)]
    format: FormatArg,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    hyp: PathBuf,
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long, value_enum, default_value_t = UnitArg::Codepoint)]
    unit: UnitArg,
    #[arg(long)]
    json: bool,
}

fn parse_counts(s: &str) -> Result<(usize, usize, usize), String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [a, b, c] => Ok((a, b, c)),
        _ => Err("expected three comma-separated counts".into()),
    }
}

/// Data errors exit with 2; argument errors surface from clap with 1.
const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let chain: Vec<String> = e.chain().map(|c| c.to_string()).collect();
            let msg = json!({ "error": chain.join(": "), "exit_code": EXIT_DATA });
            let _ = writeln!(io::stderr(), "{msg}");
            ExitCode::from(EXIT_DATA)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Stats(a) => stats(a),
        Command::BuildDataset(a) => build_dataset(a),
        Command::Split(a) => split(a),
        Command::TrainSeg(a) => train_seg(a, &cfg),
        Command::Segment(a) => segment(a),
        Command::EvalSeg(a) => eval_seg(a),
        Command::TrainNorm(a) => train_norm(a, &cfg),
        Command::Normalize(a) => normalize(a),
        Command::EvalNorm(a) => eval_norm(a),
        Command::Noise(a) => noise(a),
        Command::Pipeline(a) => pipeline(a, &cfg),
        Command::Report(a) => report(a),
        Command::Eval(a) => eval(a),
    }
}

fn read_text(path: Option<&Path>) -> Result<String> {
    match path {
        Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display())),
        None => {
            let mut s = String::new();
            io::stdin()
                .read_to_string(&mut s)
                .context("reading standard input")?;
            Ok(s)
        }
    }
}

fn read_lines(path: Option<&Path>) -> Result<Vec<String>> {
    Ok(DatasetVariant::from_text(VariantKind::Exp1, &read_text(path)?).lines)
}

fn read_corpus(path: &Path) -> Result<AlignedCorpus> {
    let text = read_text(Some(path))?;
    parse_ground_truth_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_corpus(input: &CorpusInput) -> Result<AlignedCorpus> {
    let corpus = read_corpus(&input.input)?;
    match &input.hyphen_marker {
        Some(m) => Ok(normalize_hyphenation(&corpus, m)?),
        None => Ok(corpus),
    }
}

fn is_jsonl(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "jsonl")
}

/// Spaced lines from a JSONL corpus (as `kind`) or a plain-text file.
fn spaced_variant(path: &Path, kind: VariantKind) -> Result<DatasetVariant> {
    if !kind.is_spaced() {
        bail!("variant {kind} has no spaces to learn or score boundaries from");
    }
    if is_jsonl(path) {
        Ok(build_variant(&read_corpus(path)?, kind))
    } else {
        Ok(DatasetVariant::from_text(kind, &read_text(Some(path))?))
    }
}

fn write_output(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, content).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(content.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn joined(lines: &[String]) -> String {
    let mut s = String::new();
    for l in lines {
        s.push_str(l);
        s.push('\n');
    }
    s
}

fn stats(a: StatsArgs) -> Result<()> {
    let corpus = load_corpus(&a.corpus)?;
    let mode = match a.class_mode {
        ModeArg::Grapheme => ClassMode::Grapheme,
        ModeArg::Codepoint => ClassMode::Codepoint,
    };
    let s = corpus_stats(&corpus, mode)?;
    let out = if a.json {
        format!("{}\n", serde_json::to_string_pretty(&s)?)
    } else {
        let mut t = format!(
            "lines\t{}\ntokens\t{}\nabbreviated_tokens\t{}\ndensity\t{:.4}\n",
            s.lines, s.tokens, s.abbreviated_tokens, s.density
        );
        for (k, n) in &s.classes {
            t.push_str(&format!(
                "classes_{k}\t{n}\ncombining_classes_{k}\t{}\n",
                s.combining_classes[k]
            ));
        }
        t
    };
    write_output(None, &out)
}

fn build_dataset(a: BuildArgs) -> Result<()> {
    let corpus = load_corpus(&a.corpus)?;
    write_output(
        a.output.as_deref(),
        &build_variant(&corpus, a.variant).to_text(),
    )
}

fn split(a: SplitArgs) -> Result<()> {
    let corpus = load_corpus(&a.corpus)?;
    let s = split_corpus(&corpus, a.counts, a.seed, a.shuffle)?;
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    for (name, part) in [("train", &s.train), ("dev", &s.dev), ("test", &s.test)] {
        let path = a.out_dir.join(format!("{name}.jsonl"));
        if path == a.corpus.input {
            bail!("refusing to overwrite the input file {}", path.display());
        }
        write_output(Some(&path), &serialize_corpus_to_string(part))?;
    }
    Ok(())
}

fn train_seg(a: TrainSegArgs, cfg: &config::Loaded) -> Result<()> {
    let mut sc = cfg.file.segmenter.clone().unwrap_or_default();
    if let Some(s) = a.seed {
        sc.seed = s;
    }
    if let Some(e) = a.epochs {
        sc.epochs = e;
    }
    if let Some(r) = a.restarts {
        sc.restarts = r;
    }
    if let Some(t) = a.threshold {
        sc.threshold = t;
    }
    let train = spaced_variant(&a.train, a.variant)?;
    let dev = match &a.dev {
        Some(p) => spaced_variant(p, a.variant)?,
        None => DatasetVariant {
            kind: a.variant,
            lines: Vec::new(),
        },
    };
    let model = train_segmenter(&train, &dev, &sc)?;
    model.save(&a.model)?;
    let summary = json!({
        "model": a.model,
        "fingerprint": model.fingerprint(),
        "best_epoch": model.best_epoch,
        "dev_f": model.dev_f,
    });
    write_output(None, &format!("{summary}\n"))
}

fn word_lexicon(d: &DecodeOpts) -> Result<Option<WordLexicon>> {
    match (d.decode, &d.lexicon_model) {
        (DecodeArg::Threshold, _) => Ok(None),
        (DecodeArg::LexiconDp, Some(p)) => {
            let norm = NormalizerModel::load(p)?;
            Ok(Some(if d.abbreviated {
                WordLexicon::from_abbreviations(&norm.lexicon)
            } else {
                WordLexicon::from_expansions(&norm.lexicon)
            }))
        }
        (DecodeArg::LexiconDp, None) => bail!("lexicon decoding needs --lexicon-model"),
    }
}

fn mode(lex: &Option<WordLexicon>) -> SegmentMode<'_> {
    match lex {
        Some(l) => SegmentMode::LexiconDp(l),
        None => SegmentMode::Threshold,
    }
}

fn segment(a: SegmentArgs) -> Result<()> {
    let model = SegmenterModel::load(&a.model)?;
    let lex = word_lexicon(&a.decode)?;
    let out = read_lines(a.input.as_deref())?
        .iter()
        .enumerate()
        .map(|(i, l)| {
            model
                .segment(l, mode(&lex))
                .with_context(|| format!("line {}", i + 1))
        })
        .collect::<Result<Vec<_>>>()?;
    write_output(a.output.as_deref(), &joined(&out))
}

fn eval_seg(a: EvalSegArgs) -> Result<()> {
    let model = SegmenterModel::load(&a.model)?;
    let lex = word_lexicon(&a.decode)?;
    let gold = spaced_variant(&a.gold, a.variant)?;
    let r = evaluate_segmenter(&model, &gold, mode(&lex))?;
    write_output(None, &format!("{}\n", serde_json::to_string_pretty(&r)?))
}

fn train_norm(a: TrainNormArgs, cfg: &config::Loaded) -> Result<()> {
    let mut nc = cfg.file.normalizer.clone().unwrap_or_default();
    if let Some(l) = a.lambda {
        nc.lambda = l;
    }
    if let Some(b) = a.beam_width {
        nc.beam_width = b;
    }
    if let Some(o) = a.lm_order {
        nc.lm_order = o;
    }
    let rules = match &a.rules {
        Some(p) => {
            parse_rules(&read_text(Some(p))?).with_context(|| format!("parsing {}", p.display()))?
        }
        None => default_rules(),
    };
    let train = read_corpus(&a.train)?;
    let model = train_normalizer(&train, rules, &nc)?;
    model.save(&a.model)?;
    let summary = json!({
        "model": a.model,
        "fingerprint": model.fingerprint(),
        "lexicon_entries": model.lexicon.forward().len(),
        "vocabulary": model.lm.vocab().len(),
    });
    write_output(None, &format!("{summary}\n"))
}

fn normalize(a: NormalizeArgs) -> Result<()> {
    let model = NormalizerModel::load(&a.model)?;
    let out = read_lines(a.input.as_deref())?
        .iter()
        .enumerate()
        .map(|(i, l)| {
            model
                .normalize_line(l)
                .with_context(|| format!("line {}", i + 1))
        })
        .collect::<Result<Vec<_>>>()?;
    write_output(a.output.as_deref(), &joined(&out))
}

fn eval_norm(a: EvalNormArgs) -> Result<()> {
    let model = NormalizerModel::load(&a.model)?;
    let test = read_corpus(&a.test)?;
    let r = evaluate_normalizer(&model, &test, &model.lexicon)?;
    write_output(None, &format!("{}\n", serde_json::to_string_pretty(&r)?))
}

fn noise(a: NoiseArgs) -> Result<()> {
    let nc = NoiseConfig {
        sub_rate: a.sub_rate,
        del_rate: a.del_rate,
        ins_rate: a.ins_rate,
        charset: a.charset,
        seed: a.seed,
    };
    let cfg = PipelineConfig {
        noise: Some(nc),
        ..PipelineConfig::identity("noise", VariantKind::Exp1)
    };
    let p = Pipeline::new(cfg, None, None)?;
    let out = p.run(&read_lines(a.input.as_deref())?)?;
    write_output(a.output.as_deref(), &joined(&out))
}

fn render(report: &EvalReport, format: FormatArg) -> Result<String> {
    Ok(match format {
        FormatArg::Text => render_report(report, ReportFormat::Text),
        FormatArg::Csv => render_report(report, ReportFormat::Csv),
        FormatArg::Markdown => render_report(report, ReportFormat::Markdown),
        FormatArg::Json => format!("{}\n", serde_json::to_string_pretty(report)?),
    })
}

fn pipeline(a: PipelineArgs, cfg: &config::Loaded) -> Result<()> {
    if a.jobs == 0 {
        bail!("--jobs must be at least 1");
    }
    let mut setups: Vec<PipelineConfig> = cfg.file.setups.clone();
    if setups.is_empty() {
        bail!("no [[setup]] entries in the config (pass --config or set SCRIPTA_CONFIG)");
    }
    if !a.setups.is_empty() {
        for id in &a.setups {
            if !setups.iter().any(|s| &s.setup_id == id) {
                bail!("unknown setup id {id:?}");
            }
        }
        setups.retain(|s| a.setups.contains(&s.setup_id));
    }
    if let Some(seed) = a.seed {
        for s in &mut setups {
            if let Some(n) = &mut s.noise {
                n.seed = seed;
            }
        }
    }
    let corpus = read_corpus(&a.gold)?;
    let (inputs, gold) = experiment_inputs(&corpus);

    // Models shared between setups are loaded once.
    let mut segs: BTreeMap<PathBuf, Arc<SegmenterModel>> = BTreeMap::new();
    let mut norms: BTreeMap<PathBuf, Arc<NormalizerModel>> = BTreeMap::new();
    let resolve = |p: &PathBuf| {
        if p.is_absolute() {
            p.clone()
        } else {
            cfg.base_dir.join(p)
        }
    };
    let mut pipelines = Vec::with_capacity(setups.len());
    for s in setups {
        let seg = match (&s.segmenter_model, s.use_segmenter) {
            (Some(p), true) => {
                let p = resolve(p);
                Some(match segs.get(&p) {
                    Some(m) => m.clone(),
                    None => {
                        let m = Arc::new(SegmenterModel::load(&p)?);
                        segs.insert(p, m.clone());
                        m
                    }
                })
            }
            _ => None,
        };
        let wants_norm =
            s.use_normalizer || (s.use_segmenter && s.segment_mode == SegmentModeName::LexiconDp);
        let norm = match (&s.normalizer_model, wants_norm) {
            (Some(p), true) => {
                let p = resolve(p);
                Some(match norms.get(&p) {
                    Some(m) => m.clone(),
                    None => {
                        let m = Arc::new(NormalizerModel::load(&p)?);
                        norms.insert(p, m.clone());
                        m
                    }
                })
            }
            _ => None,
        };
        pipelines.push(Pipeline::new(s, seg, norm)?);
    }
    let report = run_experiment(&pipelines, &inputs, &gold, a.jobs)?;
    if let Some(p) = &a.report {
        fs::write(p, format!("{}\n", serde_json::to_string_pretty(&report)?))
            .with_context(|| format!("writing {}", p.display()))?;
    }
    write_output(a.output.as_deref(), &render(&report, a.format)?)
}

fn report(a: ReportArgs) -> Result<()> {
    let text = read_text(Some(&a.input))?;
    let report: EvalReport =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", a.input.display()))?;
    write_output(a.output.as_deref(), &render(&report, a.format)?)
}

fn eval(a: EvalArgs) -> Result<()> {
    let hyp = read_lines(Some(&a.hyp))?;
    let reference = read_lines(Some(&a.reference))?;
    let unit = CharUnit::from(a.unit);
    let cer = metrics::corpus_cer(&hyp, &reference, unit)?;
    let wer = metrics::corpus_wer(&hyp, &reference)?;
    let out = if a.json {
        format!(
            "{}\n",
            json!({ "cer": fmt2(cer), "wer": fmt2(wer), "lines": hyp.len() })
        )
    } else {
        format!("CER\t{}\nWER\t{}\n", fmt2(cer), fmt2(wer))
    };
    write_output(None, &out)
}
