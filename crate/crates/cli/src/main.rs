//! `sparse-selector`: scene generation, ray-aware masks, class-balanced token
//! sampling, keeping-ratio sweeps, heatmap rendering and ray positional
//! encodings from the command line.
//!
//! Exit codes: 0 success, 2 usage or validation, 3 I/O or format.

mod config;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

use sparse_selector::cbs::{
    foreground_recall, perclass_recall_from_masks, select_tokens, CbsConfig, DistributionSource, SalienceGrid,
    TokenSet, WeightMode,
};
use sparse_selector::eval::{evaluate, scene_weights};
use sparse_selector::logits::{parse_logits, synthesize, SyntheticLogits};
use sparse_selector::ras::{
    chord_lengths, compare_with_oracle, grid_of, ras_class_masks, ras_mask, ras_oracle_mask, Modality, SupervisionMask,
};
use sparse_selector::raype::{
    anchors_to_csv, bev_cell_under_ray, embed, min_pair_distance, query_anchor_pair, query_encoding, DEFAULT_ANCHORS,
    DEFAULT_D_MAX, DEFAULT_D_MIN, DEFAULT_EMBED_DIM,
};
use sparse_selector::render::{mask_to_pgm, overlay_to_ppm};
use sparse_selector::{
    backproject_pixel_ray, generate_scene, gt_distribution, load_scene, save_scene, Scene, SceneError, SceneParams,
};

const SUBCOMMANDS: [&str; 6] = ["gen-scene", "supervise", "sample", "eval", "render", "raype"];

#[derive(Debug, Parser)]
#[command(
    name = "sparse-selector",
    version,
    about = "Ray-aware token supervision and class-balanced sparse selection"
)]
struct Cli {
    /// Worker threads (outputs do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// TOML file whose keys are flag names of the subcommand; flags win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic scene and print its class distribution.
    GenScene(GenSceneArgs),
    /// Write ray-aware supervision masks for every camera and the BEV grid.
    Supervise(SuperviseArgs),
    /// Class-balanced token selection on one grid.
    Sample(SampleArgs),
    /// Keeping-ratio sweep report.
    Eval(EvalArgs),
    /// Render a mask (and optional token overlay) to PGM/PPM.
    Render(RenderArgs),
    /// Ray anchors and positional encodings for one camera pixel.
    Raype(RaypeArgs),
}

#[derive(Debug, Args)]
struct GenSceneArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 30, allow_negative_numbers = true)]
    boxes: i64,
    #[arg(long, default_value_t = 6, allow_negative_numbers = true)]
    cameras: i64,
    /// Comma-separated class probabilities; defaults to uniform over 10 classes.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    class_mix: Option<Vec<f64>>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SuperviseArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Also write marching-oracle masks and disagreement counts.
    #[arg(long)]
    oracle: bool,
    #[arg(long, default_value_t = 0.01)]
    march_step: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum WeightModeArg {
    Multiply,
    Assign,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DistributionArg {
    Predicted,
    Gt,
}

#[derive(Debug, Args)]
struct LogitArgs {
    #[arg(long)]
    scene: PathBuf,
    /// `perfect`, `noisy:<sigma>` or a logit file (one token per line).
    #[arg(long, default_value = "perfect")]
    logits: String,
    /// `bev` or `camera:<k>`.
    #[arg(long, default_value = "bev")]
    grid: String,
    /// Noise seed for `noisy:<sigma>`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.5, allow_negative_numbers = true)]
    lambda: f64,
    #[arg(long, value_enum, default_value_t = WeightModeArg::Multiply)]
    weight_mode: WeightModeArg,
    #[arg(long, value_enum, default_value_t = DistributionArg::Predicted)]
    distribution: DistributionArg,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[command(flatten)]
    input: LogitArgs,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    rho: f64,
    /// Output directory for `tokens.csv` and `weights.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    input: LogitArgs,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0.25,0.5,0.75,1.0",
        allow_negative_numbers = true
    )]
    rhos: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RenderArgs {
    #[arg(long)]
    mask: PathBuf,
    /// Token CSV; switches the output to a PPM overlay.
    #[arg(long)]
    tokens: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Pixels per cell side.
    #[arg(long, default_value_t = 1)]
    scale: usize,
}

#[derive(Debug, Args)]
struct RaypeArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long, default_value_t = 0)]
    camera: usize,
    /// Feature-cell indices `i,j`.
    #[arg(long, allow_hyphen_values = true)]
    pixel: String,
    #[arg(long, default_value_t = DEFAULT_ANCHORS)]
    d: usize,
    #[arg(long, default_value_t = DEFAULT_EMBED_DIM)]
    embed_dim: usize,
    #[arg(long, default_value_t = DEFAULT_D_MIN)]
    d_min: f64,
    #[arg(long, default_value_t = DEFAULT_D_MAX)]
    d_max: f64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Io(m) => m,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn usage(e: impl ToString) -> CliError {
    CliError::Usage(e.to_string())
}

fn io_err(e: impl ToString) -> CliError {
    CliError::Io(e.to_string())
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| io_err(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| io_err(format!("{}: {e}", path.display())))
}

fn make_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| io_err(format!("{}: {e}", path.display())))
}

fn open_scene(path: &Path) -> CliResult<Scene> {
    load_scene(path).map_err(|e| match e {
        SceneError::Io { .. } => io_err(e),
        other => io_err(format!("{}: {other}", path.display())),
    })
}

fn gen_scene(a: &GenSceneArgs) -> CliResult<String> {
    let n_boxes =
        usize::try_from(a.boxes).map_err(|_| usage(format!("--boxes must be non-negative, got {}", a.boxes)))?;
    let n_cameras =
        usize::try_from(a.cameras).map_err(|_| usage(format!("--cameras must be non-negative, got {}", a.cameras)))?;
    let mut params = SceneParams {
        seed: a.seed,
        n_boxes,
        n_cameras,
        ..Default::default()
    };
    if let Some(mix) = &a.class_mix {
        params.class_mix = mix.clone();
    }
    let scene = generate_scene(&params).map_err(usage)?;
    save_scene(&scene, &a.out).map_err(io_err)?;
    let dist = gt_distribution(&scene);
    let mut out = String::from("class,count\n");
    for (name, count) in scene.class_names.iter().zip(&dist.counts) {
        writeln!(out, "{name},{count}").unwrap();
    }
    Ok(out)
}

fn mask_file(m: Modality) -> String {
    match m {
        Modality::Camera(k) => format!("camera_{k}"),
        Modality::Bev => "bev".into(),
    }
}

fn supervise(a: &SuperviseArgs) -> CliResult<String> {
    if a.oracle && !(a.march_step > 0.0 && a.march_step.is_finite()) {
        return Err(usage(format!("--march-step must be positive, got {}", a.march_step)));
    }
    let scene = open_scene(&a.scene)?;
    make_dir(&a.out_dir)?;
    let modalities: Vec<Modality> = scene
        .cameras
        .iter()
        .map(|c| Modality::Camera(c.id))
        .chain([Modality::Bev])
        .collect();
    let mut report = String::from("mask,positive,disagreements,excluded\n");
    let mut summary = String::new();
    for &m in &modalities {
        let mask = ras_mask(&scene, m).map_err(usage)?;
        write_file(&a.out_dir.join(format!("{}.ras", mask_file(m))), mask.to_text())?;
        writeln!(summary, "{m}: {} positive of {}", mask.count_positive(), mask.len()).unwrap();
        if a.oracle {
            let oracle = ras_oracle_mask(&scene, m, a.march_step).map_err(usage)?;
            let chords = chord_lengths(&scene, m).map_err(usage)?;
            let cmp = compare_with_oracle(&mask, &oracle, &chords, a.march_step);
            write_file(
                &a.out_dir.join(format!("{}.oracle.ras", mask_file(m))),
                oracle.to_text(),
            )?;
            writeln!(
                report,
                "{m},{},{},{}",
                mask.count_positive(),
                cmp.disagreements,
                cmp.excluded
            )
            .unwrap();
            writeln!(
                summary,
                "{m}: oracle disagreements {} (excluded {})",
                cmp.disagreements, cmp.excluded
            )
            .unwrap();
        }
    }
    if a.oracle {
        write_file(&a.out_dir.join("oracle_report.csv"), &report)?;
    }
    Ok(summary)
}

fn cbs_config(input: &LogitArgs, rho: f64) -> CbsConfig {
    CbsConfig {
        lambda: input.lambda,
        rho,
        weight_mode: match input.weight_mode {
            WeightModeArg::Multiply => WeightMode::Multiply,
            WeightModeArg::Assign => WeightMode::Assign,
        },
        distribution_source: match input.distribution {
            DistributionArg::Predicted => DistributionSource::Predicted,
            DistributionArg::Gt => DistributionSource::Gt,
        },
        ..Default::default()
    }
}

fn load_logits(input: &LogitArgs) -> CliResult<(Scene, Modality, SalienceGrid)> {
    if !(input.lambda >= 1.0 && input.lambda.is_finite()) {
        return Err(usage(format!("--lambda must be at least 1, got {}", input.lambda)));
    }
    let modality: Modality = input.grid.parse().map_err(usage)?;
    let scene = open_scene(&input.scene)?;
    let grid = grid_of(&scene, modality).map_err(usage)?;
    let sal = if input.logits == "perfect" || input.logits.starts_with("noisy:") {
        let source: SyntheticLogits = input.logits.parse().map_err(usage)?;
        synthesize(&scene, modality, source, input.seed).map_err(usage)?
    } else {
        let path = Path::new(&input.logits);
        let text = read_text(path)?;
        parse_logits(&text, grid.rows(), grid.cols(), scene.num_classes())
            .map_err(|e| io_err(format!("{}: {e}", path.display())))?
    };
    Ok((scene, modality, sal))
}

fn format_recall(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".into(), |v| v.to_string())
}

fn sample(a: &SampleArgs) -> CliResult<String> {
    if !(a.rho > 0.0 && a.rho <= 1.0) {
        return Err(usage(format!("--rho must lie in (0, 1], got {}", a.rho)));
    }
    let (scene, modality, sal) = load_logits(&a.input)?;
    let cfg = cbs_config(&a.input, a.rho);
    let w = scene_weights(&scene, &sal, &cfg).map_err(usage)?;
    let tok = select_tokens(&sal, &w, a.rho).map_err(usage)?;
    make_dir(&a.out)?;
    write_file(&a.out.join("tokens.csv"), tok.to_csv())?;
    write_file(&a.out.join("weights.csv"), w.to_csv())?;

    let mask = ras_mask(&scene, modality).map_err(usage)?;
    let class_masks = ras_class_masks(&scene, modality).map_err(usage)?;
    let fg = foreground_recall(&tok, &mask).map_err(usage)?;
    let per_class = perclass_recall_from_masks(&tok, &mask, &class_masks).map_err(usage)?;
    let mut out = format!(
        "grid {modality}: kept {} of {} tokens\nforeground_recall {fg}\n",
        tok.len(),
        sal.len()
    );
    for (name, r) in scene.class_names.iter().zip(per_class) {
        writeln!(out, "recall_{name} {}", format_recall(r)).unwrap();
    }
    Ok(out)
}

fn eval(a: &EvalArgs) -> CliResult<String> {
    if a.rhos.is_empty() {
        return Err(usage("--rhos needs at least one ratio"));
    }
    if let Some(bad) = a.rhos.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
        return Err(usage(format!("every ratio must lie in (0, 1], got {bad}")));
    }
    let (scene, modality, sal) = load_logits(&a.input)?;
    let cfg = cbs_config(&a.input, 1.0);
    let report = evaluate(&scene, modality, &sal, &cfg, &a.rhos).map_err(usage)?;
    let csv = report.to_csv(&scene.class_names);
    write_file(&a.out, &csv)?;
    Ok(csv)
}

fn render(a: &RenderArgs) -> CliResult<String> {
    if a.scale == 0 {
        return Err(usage("--scale must be positive"));
    }
    let mask_text = read_text(&a.mask)?;
    let mask = SupervisionMask::from_text(&mask_text).map_err(|e| io_err(format!("{}: {e}", a.mask.display())))?;
    let image = match &a.tokens {
        None => mask_to_pgm(&mask, a.scale),
        Some(path) => {
            let tok = TokenSet::from_csv(&read_text(path)?, mask.rows, mask.cols)
                .map_err(|e| io_err(format!("{}: {e}", path.display())))?;
            overlay_to_ppm(&mask, &tok, a.scale).map_err(|e| io_err(format!("{}: {e}", path.display())))?
        }
    };
    write_file(&a.out, image.encode())?;
    Ok(format!(
        "wrote {}x{} image to {}\n",
        image.width,
        image.height,
        a.out.display()
    ))
}

fn parse_pixel(s: &str) -> CliResult<(i64, i64)> {
    let bad = || usage(format!("--pixel expects `i,j`, got `{s}`"));
    let (i, j) = s.split_once(',').ok_or_else(bad)?;
    Ok((
        i.trim().parse().map_err(|_| bad())?,
        j.trim().parse().map_err(|_| bad())?,
    ))
}

fn raype(a: &RaypeArgs) -> CliResult<String> {
    let (i, j) = parse_pixel(&a.pixel)?;
    let scene = open_scene(&a.scene)?;
    let rig = scene
        .camera(a.camera)
        .ok_or_else(|| usage(format!("scene has no camera {}", a.camera)))?;
    let (rows, cols) = rig.feature_grid_dims();
    let (i, j) = match (usize::try_from(i), usize::try_from(j)) {
        (Ok(i), Ok(j)) if i < rows && j < cols => (i, j),
        _ => return Err(usage(format!("cell ({i}, {j}) outside the {rows}x{cols} feature grid"))),
    };
    let ray = backproject_pixel_ray(rig, i, j).map_err(usage)?;
    let region = &scene.region;
    let (bi, bj) = bev_cell_under_ray(&ray, region, &scene.bev, a.d_min)
        .ok_or_else(|| usage("camera ray never enters the scene region"))?;
    let pair = query_anchor_pair(&ray, scene.bev.cell_center(bi, bj), a.d, region, a.d_min, a.d_max).map_err(usage)?;
    let cam_code = embed(&pair.0, a.embed_dim, region).map_err(usage)?;
    let bev_code = embed(&pair.1, a.embed_dim, region).map_err(usage)?;
    let query = query_encoding(&pair, a.embed_dim, region).map_err(usage)?;

    make_dir(&a.out)?;
    write_file(&a.out.join("anchors.csv"), anchors_to_csv(&[&pair.0, &pair.1]))?;
    write_file(&a.out.join("camera_encoding.csv"), cam_code.to_csv())?;
    write_file(&a.out.join("bev_encoding.csv"), bev_code.to_csv())?;
    write_file(&a.out.join("query_encoding.csv"), query.to_csv())?;
    Ok(format!(
        "camera {} cell ({i}, {j}) -> bev cell ({bi}, {bj})\nanchors {}+{}, clamped {}\nmin pair distance {}\nmax camera spacing {}\n",
        a.camera,
        pair.0.len(),
        pair.1.len(),
        pair.0.clamped.iter().filter(|c| **c).count(),
        min_pair_distance(&pair.0, &pair.1),
        pair.0.max_spacing(),
    ))
}

fn run(cmd: &Command) -> CliResult<String> {
    match cmd {
        Command::GenScene(a) => gen_scene(a),
        Command::Supervise(a) => supervise(a),
        Command::Sample(a) => sample(a),
        Command::Eval(a) => eval(a),
        Command::Render(a) => render(a),
        Command::Raype(a) => raype(a),
    }
}

/// Command-line arguments with the config file, if any, expanded in place.
fn expand_args(mut args: Vec<OsString>) -> CliResult<Vec<OsString>> {
    if let Some(path) = config::take_config_path(&mut args).map_err(usage)? {
        let text = read_text(Path::new(&path))?;
        let flags = config::config_flags(&text).map_err(usage)?;
        config::splice_after_subcommand(&mut args, &SUBCOMMANDS, flags);
    }
    Ok(args)
}

fn parse(args: Vec<OsString>) -> Result<Cli, clap::Error> {
    let mut cmd = Cli::command().args_override_self(true);
    for name in SUBCOMMANDS {
        cmd = cmd.mut_subcommand(name, |s| s.args_override_self(true));
    }
    Cli::from_arg_matches(&cmd.try_get_matches_from(args)?)
}

fn main() -> ExitCode {
    let args = match expand_args(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {}", e.message());
            return ExitCode::from(e.code());
        }
    };
    let cli = match parse(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.threads {
        Some(0) => Err(usage("--threads must be positive")),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(&cli.command)),
            Err(e) => Err(usage(e)),
        },
        None => run(&cli.command),
    };
    match result {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
