//! Command-line front end for `apollokit`.
//!
//! Exit codes, for every subcommand:
//!
//! - `0` success (also `--help` / `--version`)
//! - `1` invalid arguments or input data; the message names the offending field
//! - `2` a file could not be read or written

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use apollokit::benchcraft::{
    self, benchmark_correlation, build_profiles, curate, modality_gap, modality_gap_from_scores, BenchScore,
    CurationConfig, Modality, ModalityGap,
};
use apollokit::fusion::{fuse, EncoderKind, EncoderSpec, StubEncoder};
use apollokit::integrator::{render, IntegrationStrategy};
use apollokit::resampler::{resample_grid, ResamplerSpec};
use apollokit::sampler::{plan, token_budget};
use apollokit::scalelab::{
    loglinear_fit_and_extrapolate, pairwise_r2, plan_data_mixture, r2_vs_size_curve, transfer_curve, CurvePoint,
    MixtureFractions, RunMatrix,
};
use apollokit::{atnsr, fixtures, Error, SamplingConfig, SamplingPlan, VideoMeta};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

const EXIT_CODES: &str = "Exit codes: 0 success, 1 invalid arguments or data, 2 file I/O failure.";

#[derive(Debug, Parser)]
#[command(name = "apollokit", version, about = "Video LMM design-space toolkit", after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Plan frame sampling for one video (flags) or many (--input CSV).
    #[command(after_help = "Input CSV header: video_id,duration_s,native_fps,frame_count\n\
        Output: plan JSON on stdout, or <video_id>.json files in --out-dir.\n\
        Exit codes: 0 success, 1 invalid arguments or data, 2 file I/O failure.")]
    Plan(PlanArgs),
    /// Print the fps / tpf / tps token budget of a plan as JSON.
    #[command(after_help = EXIT_CODES)]
    Tokens {
        /// Plan JSON written by `plan`.
        plan: PathBuf,
    },
    /// Lay out video tokens of a plan in a prompt template.
    #[command(after_help = "Strategies: direct, sep_tokens, timestamp, timestamp_sep.\n\
        Output: flat template on stdout, or pieces + text as JSON with --json.\n\
        Exit codes: 0 success, 1 invalid arguments or data, 2 file I/O failure.")]
    Render {
        /// Plan JSON written by `plan`.
        plan: PathBuf,
        #[arg(long, default_value = "direct")]
        strategy: IntegrationStrategy,
        #[arg(long, default_value_t = 16)]
        tokens_per_clip: u32,
        #[arg(long)]
        json: bool,
    },
    /// Interpolate feature grids to a common size and concatenate channels.
    #[command(after_help = "Grids are ATNSR files (magic ATNSR1, rank 4 [T,H,W,C], f32 little-endian).\n\
        With --encoders, the clip is first run through each stub encoder.\n\
        Encoders JSON: [{\"name\",\"clip_frames\",\"out_height\",\"out_width\",\"out_channels\",\"seed\",\"kind\"}]\n\
        with kind frame_local or temporal_mixing.\n\
        Exit codes: 0 success, 1 invalid arguments or data, 2 file I/O failure.")]
    Fuse(FuseArgs),
    /// Reduce a feature grid to a fixed number of tokens.
    #[command(after_help = "Spec JSON, one of:\n  \
        {\"kind\":\"perceiver\",\"latent_count\":N,\"model_dim\":64,\"heads\":4,\"layers\":1,\"granularity\":\"per_clip\"|\"per_frame\"}\n  \
        {\"kind\":\"mlp_pool\",\"tokens_per_frame\":N,\"hidden_dim\":H,\"out_dim\":D}\n  \
        {\"kind\":\"conv_pool\",\"tokens_per_frame\":N,\"hidden_channels\":H,\"out_dim\":D}\n\
        Output: ATNSR [rows,1,1,dim] with --out, otherwise CSV rows on stdout.\n\
        Exit codes: 0 success, 1 invalid arguments or data, 2 file I/O failure.")]
    Resample(ResampleArgs),
    /// Benchmark analytics and question curation.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Scaling-consistency analytics and data-mixture planning.
    #[command(subcommand)]
    Scale(ScaleCommand),
    /// Bundled reference tables.
    #[command(subcommand)]
    Fixtures(FixturesCommand),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Fps,
    Uniform,
}

#[derive(Debug, Args)]
struct PlanArgs {
    /// Video duration in seconds.
    #[arg(long, required_unless_present = "input")]
    duration: Option<f64>,
    /// Native frame rate.
    #[arg(long, required_unless_present = "input")]
    fps: Option<f64>,
    /// Total decoded frames.
    #[arg(long, required_unless_present = "input")]
    frames: Option<u64>,
    #[arg(long, value_enum, default_value = "fps")]
    mode: ModeArg,
    /// Sampling rate inside a clip (fps mode).
    #[arg(long, default_value_t = 2.0)]
    target_fps: f64,
    /// Frames per clip (fps mode).
    #[arg(long, default_value_t = 4)]
    clip_frames: u32,
    #[arg(long, default_value_t = 25)]
    max_clips: u32,
    /// Frames drawn in uniform mode.
    #[arg(long, default_value_t = 8)]
    uniform_frames: u32,
    #[arg(long, default_value_t = 16)]
    tokens_per_frame: u32,
    /// CSV of videos to plan in one go.
    #[arg(long, conflicts_with_all = ["duration", "fps", "frames"], requires = "out_dir")]
    input: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FuseArgs {
    /// Feature grids to fuse (or the clip, with --encoders).
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    encoders: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ResampleArgs {
    grid: PathBuf,
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, env = "APOLLOKIT_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum BenchCommand {
    /// Per-modality accuracy and video-minus-text/image gaps.
    #[command(after_help = "Input: --records (benchmark,question_id,category,model,modality,correct) or\n\
        --scores (benchmark,model,modality,score); defaults to the bundled score tables.\n\
        Output CSV: benchmark,model,video,image,text,video_minus_text,video_minus_image\n\
        Exit codes: 0 success, 1 invalid arguments or data, 2 file I/O failure.")]
    Gaps {
        #[arg(long, conflicts_with = "scores")]
        records: Option<PathBuf>,
        #[arg(long)]
        scores: Option<PathBuf>,
    },
    /// Keep video-dependent, discriminative questions.
    #[command(after_help = "Input CSV: benchmark,question_id,category,model,modality,correct (correct is 0 or 1).\n\
        Deny list: one question id (or benchmark/question_id) per line.\n\
        Output CSV: rank,benchmark,question_id,category,entropy; a summary goes to stderr.\n\
        Exit codes: 0 success, 1 invalid arguments or data, 2 file I/O failure.")]
    Curate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 400)]
        k: usize,
        /// A question is dropped when more than this share of models solve it from text or one frame.
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        #[arg(long)]
        deny: Option<PathBuf>,
    },
    /// R² between benchmarks over shared models.
    #[command(after_help = "Input CSV: benchmark,model[,modality],score; defaults to the bundled tables.\n\
        Output: R² matrix as CSV (NA where undefined); --svg also writes a heatmap.\n\
        Exit codes: 0 success, 1 invalid arguments or data, 2 file I/O failure.")]
    Corr {
        #[arg(long)]
        input: Option<PathBuf>,
        /// Rows tagged with another modality are skipped; untagged rows are kept.
        #[arg(long, value_enum, default_value = "video")]
        modality: ModalityArg,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModalityArg {
    Video,
    Image,
    Text,
}

impl From<ModalityArg> for Modality {
    fn from(m: ModalityArg) -> Self {
        match m {
            ModalityArg::Video => Modality::Video,
            ModalityArg::Image => Modality::Image,
            ModalityArg::Text => Modality::Text,
        }
    }
}

#[derive(Debug, Subcommand)]
enum ScaleCommand {
    /// R² between two LLM sizes.
    #[command(after_help = "Input CSV: variant_id,llm_size_b,score; defaults to the bundled 21-variant table.\n\
        Output: R² with 6 decimals, or NA when a column is constant.\n\
        Exit codes: 0 success, 1 invalid arguments or data, 2 file I/O failure.")]
    R2 {
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// R² of every size against a reference size.
    #[command(after_help = "Input CSV: variant_id,llm_size_b,score; defaults to the bundled 21-variant table.\n\
        Output CSV: size_b,r2\n\
        Exit codes: 0 success, 1 invalid arguments or data, 2 file I/O failure.")]
    Curve {
        #[arg(long = "ref")]
        reference: f64,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Fit R² against log10(size) and extrapolate.
    #[command(after_help = "Without --ref the curve pools every proxy/target pair of sizes >= --min-proxy,\n\
        plotted at the larger size. With --ref the curve is R² against that one size.\n\
        Input CSV: variant_id,llm_size_b,score; defaults to the bundled 21-variant table.\n\
        Output JSON: slope, intercept, target_size, predicted.\n\
        Exit codes: 0 success, 1 invalid arguments or data, 2 file I/O failure.")]
    Fit {
        #[arg(long)]
        target: f64,
        #[arg(long = "ref")]
        reference: Option<f64>,
        #[arg(long, default_value_t = 1.5, conflicts_with = "reference")]
        min_proxy: f64,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Split a sample budget across text, image, multi-image and video.
    #[command(after_help = "Fractions: four comma-separated values t,i,m,v, either fractions summing to 1\n\
        or percentages summing to 100.\n\
        Output JSON: total, fractions, counts.\n\
        Exit codes: 0 success, 1 invalid arguments or data, 2 file I/O failure.")]
    Mixture {
        #[arg(long)]
        total: u64,
        #[arg(long)]
        fractions: String,
    },
}

#[derive(Debug, Subcommand)]
enum FixturesCommand {
    /// Name and description of each bundled table.
    #[command(after_help = EXIT_CODES)]
    List,
    /// Write the bundled tables as CSV files.
    #[command(after_help = EXIT_CODES)]
    Export {
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Debug)]
enum CliError {
    Core(Error),
    Io { path: PathBuf, source: std::io::Error },
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_io() => 2,
            CliError::Core(_) => 1,
            CliError::Io { .. } => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn read(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn read_string(path: &Path) -> CliResult<String> {
    let bytes = read(path)?;
    String::from_utf8(bytes).map_err(|e| Error::validation(path.display().to_string(), e.to_string()).into())
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn load_grid(path: &Path) -> CliResult<apollokit::FeatureGrid> {
    Ok(atnsr::decode(&read(path)?)?)
}

fn to_json<T: Serialize>(v: &T) -> CliResult<String> {
    Ok(serde_json::to_string_pretty(v).map_err(Error::from)?)
}

/// Parses `argv` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    let mut buf = String::new();
    let mut note = String::new();
    match dispatch(cli.command, &mut buf, &mut note) {
        Ok(()) => {
            let _ = err.write_all(note.as_bytes());
            if out.write_all(buf.as_bytes()).and_then(|_| out.flush()).is_err() {
                return 2;
            }
            0
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command, out: &mut String, note: &mut String) -> CliResult<()> {
    match command {
        Command::Plan(args) => cmd_plan(args, out),
        Command::Tokens { plan } => {
            let plan = load_plan(&plan)?;
            writeln!(out, "{}", to_json(&token_budget(&plan)?)?).unwrap();
            Ok(())
        }
        Command::Render {
            plan,
            strategy,
            tokens_per_clip,
            json,
        } => {
            let plan = load_plan(&plan)?;
            let r = render(&plan, strategy, tokens_per_clip)?;
            if json {
                writeln!(out, "{}", to_json(&r)?).unwrap();
            } else {
                writeln!(out, "{}", r.text).unwrap();
            }
            Ok(())
        }
        Command::Fuse(args) => cmd_fuse(args, out),
        Command::Resample(args) => cmd_resample(args, out),
        Command::Bench(b) => cmd_bench(b, out, note),
        Command::Scale(s) => cmd_scale(s, out),
        Command::Fixtures(FixturesCommand::List) => {
            for f in &fixtures::ALL {
                writeln!(out, "{}\t{} rows\t{}", f.name, f.contents.lines().count() - 1, f.description).unwrap();
            }
            Ok(())
        }
        Command::Fixtures(FixturesCommand::Export { out_dir }) => {
            create_dir(&out_dir)?;
            for f in &fixtures::ALL {
                let path = out_dir.join(f.name);
                write(&path, f.contents)?;
                writeln!(out, "{}", path.display()).unwrap();
            }
            Ok(())
        }
    }
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_owned(),
        source,
    })
}

fn load_plan(path: &Path) -> CliResult<SamplingPlan> {
    Ok(SamplingPlan::from_json(&read_string(path)?)?)
}

fn sampling_config(args: &PlanArgs) -> SamplingConfig {
    match args.mode {
        ModeArg::Fps => SamplingConfig::fps_clips(args.target_fps, args.clip_frames, args.max_clips, args.tokens_per_frame),
        ModeArg::Uniform => SamplingConfig::uniform(args.uniform_frames, args.tokens_per_frame),
    }
}

#[derive(Debug, Deserialize)]
struct VideoRow {
    video_id: String,
    duration_s: f64,
    native_fps: f64,
    frame_count: u64,
}

fn cmd_plan(args: PlanArgs, out: &mut String) -> CliResult<()> {
    let config = sampling_config(&args);
    let (Some(input), Some(dir)) = (&args.input, &args.out_dir) else {
        // clap guarantees the three flags when --input is absent
        let meta = VideoMeta::new(args.duration.unwrap(), args.fps.unwrap(), args.frames.unwrap())?;
        writeln!(out, "{}", plan(meta, config)?.to_json()?).unwrap();
        return Ok(());
    };
    let data = read(input)?;
    let mut rdr = csv::Reader::from_reader(&data[..]);
    let mut plans = Vec::new();
    for (i, row) in rdr.deserialize::<VideoRow>().enumerate() {
        let row = row.map_err(Error::from)?;
        let ok_id = !row.video_id.is_empty() && !row.video_id.contains(['/', '\\']) && row.video_id != "..";
        if !ok_id {
            return Err(Error::validation(format!("rows[{i}].video_id"), format!("{:?} is not a file name", row.video_id)).into());
        }
        let meta = VideoMeta::new(row.duration_s, row.native_fps, row.frame_count)
            .map_err(|e| Error::validation(format!("rows[{i}] ({})", row.video_id), e.to_string()))?;
        plans.push((row.video_id, plan(meta, config)?));
    }
    create_dir(dir)?;
    for (id, p) in plans {
        let path = dir.join(format!("{id}.json"));
        write(&path, format!("{}\n", p.to_json()?))?;
        writeln!(out, "{}\t{} clips\t{} raw tokens", path.display(), p.clips.len(), p.raw_token_count).unwrap();
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
struct EncoderEntry {
    #[serde(flatten)]
    spec: EncoderSpec,
    kind: EncoderKind,
}

fn cmd_fuse(args: FuseArgs, out: &mut String) -> CliResult<()> {
    let grids = match &args.encoders {
        Some(path) => {
            if args.inputs.len() != 1 {
                return Err(Error::validation("inputs", "--encoders takes exactly one clip grid").into());
            }
            let entries: Vec<EncoderEntry> = serde_json::from_str(&read_string(path)?).map_err(Error::from)?;
            let clip = load_grid(&args.inputs[0])?;
            entries
                .into_iter()
                .map(|e| StubEncoder::new(e.spec, e.kind)?.encode(&clip))
                .collect::<apollokit::Result<Vec<_>>>()?
        }
        None => args.inputs.iter().map(|p| load_grid(p)).collect::<CliResult<Vec<_>>>()?,
    };
    let fused = fuse(&grids)?;
    let mut bytes = Vec::new();
    atnsr::write_grid(&mut bytes, &fused)?;
    write(&args.out, bytes)?;
    let [t, h, w, c] = fused.dims();
    writeln!(out, "{}\t[{t}, {h}, {w}, {c}]", args.out.display()).unwrap();
    Ok(())
}

fn cmd_resample(args: ResampleArgs, out: &mut String) -> CliResult<()> {
    let spec: ResamplerSpec = serde_json::from_str(&read_string(&args.spec)?).map_err(Error::from)?;
    let grid = load_grid(&args.grid)?;
    let tokens = resample_grid(&grid, &spec, args.seed)?;
    match &args.out {
        Some(path) => {
            let mut bytes = Vec::new();
            atnsr::write_grid(&mut bytes, &atnsr::tokens_to_grid(&tokens)?)?;
            write(path, bytes)?;
            writeln!(out, "{}\t[{}, {}]", path.display(), tokens.rows(), tokens.dim()).unwrap();
        }
        None => {
            for r in 0..tokens.rows() {
                let row: Vec<String> = tokens.row(r).iter().map(|v| v.to_string()).collect();
                writeln!(out, "{}", row.join(",")).unwrap();
            }
        }
    }
    Ok(())
}

fn load_scores(path: Option<&Path>) -> CliResult<Vec<BenchScore>> {
    match path {
        Some(p) => Ok(benchcraft::read_scores(&read(p)?[..])?),
        None => Ok(fixtures::benchmark_scores()),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn write_gaps(gaps: &[ModalityGap], out: &mut String) {
    out.push_str("benchmark,model,video,image,text,video_minus_text,video_minus_image\n");
    for g in gaps {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            csv_field(&g.benchmark),
            csv_field(&g.model),
            opt(g.video),
            opt(g.image),
            opt(g.text),
            opt(g.video_minus_text),
            opt(g.video_minus_image)
        )
        .unwrap();
    }
}

fn cmd_bench(cmd: BenchCommand, out: &mut String, note: &mut String) -> CliResult<()> {
    match cmd {
        BenchCommand::Gaps { records, scores } => {
            let gaps = match records {
                Some(p) => modality_gap(&benchcraft::read_records(&read(&p)?[..])?)?,
                None => modality_gap_from_scores(&load_scores(scores.as_deref())?)?,
            };
            write_gaps(&gaps, out);
        }
        BenchCommand::Curate {
            input,
            k,
            threshold,
            deny,
        } => {
            let records = benchcraft::read_records(&read(&input)?[..])?;
            let deny = match deny {
                Some(p) => read_string(&p)?
                    .lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty() && !l.starts_with('#'))
                    .map(String::from)
                    .collect(),
                None => Default::default(),
            };
            let profiles = build_profiles(&records)?;
            let report = curate(&profiles, &CurationConfig { threshold, k, deny })?;
            out.push_str("rank,benchmark,question_id,category,entropy\n");
            for s in &report.selection.items {
                writeln!(
                    out,
                    "{},{},{},{},{:.6}",
                    s.rank,
                    csv_field(&s.benchmark),
                    csv_field(&s.question_id),
                    csv_field(&s.category),
                    s.entropy
                )
                .unwrap();
            }
            writeln!(
                note,
                "{} questions: {} need no video, {} rejected on review, {} selected{}",
                report.total,
                report.removed_by_filter,
                report.removed_by_review,
                report.selection.items.len(),
                if report.selection.short { format!(" (fewer than k = {k})") } else { String::new() }
            )
            .unwrap();
            for (cat, n) in &report.selection.category_counts {
                writeln!(note, "  {cat}: {n}").unwrap();
            }
        }
        BenchCommand::Corr { input, modality, svg } => {
            let want = Modality::from(modality);
            let scores: Vec<BenchScore> = load_scores(input.as_deref())?
                .into_iter()
                .filter(|s| s.modality.is_none_or(|m| m == want))
                .collect();
            let m = benchmark_correlation(&scores)?;
            out.push_str(&m.to_csv());
            if let Some(path) = svg {
                write(&path, m.to_svg())?;
            }
        }
    }
    Ok(())
}

fn load_matrix(path: Option<&Path>) -> CliResult<RunMatrix> {
    match path {
        Some(p) => Ok(RunMatrix::from_csv(&read(p)?[..])?),
        None => Ok(fixtures::raw_scaling()),
    }
}

/// Accepts fractions summing to 1 or percentages summing to 100.
fn parse_fractions(s: &str) -> CliResult<MixtureFractions> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err(Error::validation("fractions", format!("expected 4 values t,i,m,v, got {}", parts.len())).into());
    }
    let mut v = [0.0; 4];
    for (slot, (p, name)) in v.iter_mut().zip(parts.iter().zip(apollokit::scalelab::MIXTURE_MODALITIES)) {
        let p = p.trim_end_matches('%');
        *slot = p
            .parse()
            .map_err(|_| Error::validation(format!("fractions.{name}"), format!("{p:?} is not a number")))?;
    }
    let sum: f64 = v.iter().sum();
    if (sum - 100.0).abs() <= 1e-6 {
        v = v.map(|x| x / 100.0);
    }
    Ok(MixtureFractions::from_array(v))
}

fn cmd_scale(cmd: ScaleCommand, out: &mut String) -> CliResult<()> {
    match cmd {
        ScaleCommand::R2 { a, b, input } => {
            let m = load_matrix(input.as_deref())?;
            writeln!(out, "{}", opt(pairwise_r2(&m, a, b)?)).unwrap();
        }
        ScaleCommand::Curve { reference, input } => {
            let m = load_matrix(input.as_deref())?;
            out.push_str("size_b,r2\n");
            for CurvePoint { size, r2 } in r2_vs_size_curve(&m, reference)? {
                writeln!(out, "{size},{}", opt(r2)).unwrap();
            }
        }
        ScaleCommand::Fit {
            target,
            reference,
            min_proxy,
            input,
        } => {
            let m = load_matrix(input.as_deref())?;
            let curve = match reference {
                Some(r) => r2_vs_size_curve(&m, r)?,
                None => transfer_curve(&m, min_proxy)?,
            };
            let fit = loglinear_fit_and_extrapolate(&curve, target)?;
            writeln!(out, "{}", to_json(&fit)?).unwrap();
        }
        ScaleCommand::Mixture { total, fractions } => {
            let plan = plan_data_mixture(total, parse_fractions(&fractions)?)?;
            writeln!(out, "{}", to_json(&plan)?).unwrap();
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fractions_auto_detect_scale() {
        let pct = parse_fractions("15,25,20,40").unwrap();
        assert_eq!(pct, parse_fractions("0.15, 0.25, 0.2, 0.4").unwrap());
        assert_eq!(parse_fractions("15%,25%,20%,40%").unwrap(), pct);
        assert!(parse_fractions("1,2,3").is_err());
        assert!(parse_fractions("a,b,c,d").is_err());
    }

    #[test]
    fn run_reports_exit_codes() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(run(["apollokit", "scale", "r2", "--a", "4", "--b", "7"], &mut out, &mut err), 0);
        assert_eq!(String::from_utf8(out).unwrap(), "0.938431\n");
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(run(["apollokit", "scale", "r2", "--a", "4"], &mut out, &mut err), 1);
        assert!(out.is_empty());
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(run(["apollokit", "--help"], &mut out, &mut err), 0);
        assert!(!out.is_empty() && err.is_empty());
    }
}
