use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use facetrack::bench::{benchmark_suite, confusable_suite, format_table, run_ablation};
use facetrack::io;
use facetrack::pipeline::{label_tracks, run};
use facetrack::sim::{generate, make_ghosts, template_db, DbParams, SceneScript};
use facetrack::study::{run_study, QueryClass, StudyParams};
use facetrack::{evaluate, Config, FbtrMode, GhostTracklet, PredictorKind};

const OUT_DIR_ENV: &str = "FACETRACK_OUT_DIR";

#[derive(Parser)]
#[command(name = "facetrack", version, about = "Long-term face tracking with tracklet reconnection")]
struct Cli {
    /// Seed for every random draw the command makes.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track a detection stream.
    Track(TrackArgs),
    /// Generate a detection stream from a scene script.
    Simulate(SimulateArgs),
    /// Run all eight ablation configurations on one stream.
    Ablate(AblateArgs),
    /// Rank-margin parameter study on a template database.
    SweepFbtr(SweepArgs),
    /// Evaluate a track file against a labelled stream.
    Metrics(MetricsArgs),
    /// Write a set of distractor tracklets.
    MakeGhosts(GhostArgs),
    /// Write a synthetic template database for the parameter study.
    MakeDb(DbArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FbtrArg {
    Off,
    Simplified,
    Rank,
}

#[derive(Clone, Copy, ValueEnum)]
enum PredictorArg {
    Static,
    Cv,
    Kalman,
}

#[derive(Args)]
struct OutDir {
    /// Output directory.
    #[arg(long, env = OUT_DIR_ENV, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct TrackArgs {
    #[arg(long)]
    input: PathBuf,
    /// TOML configuration; flags given here take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    fbtr: Option<FbtrArg>,
    #[arg(long, overrides_with = "no_tm")]
    tm: bool,
    #[arg(long, overrides_with = "tm")]
    no_tm: bool,
    #[arg(long, overrides_with = "no_cm")]
    cm: bool,
    #[arg(long, overrides_with = "cm")]
    no_cm: bool,
    #[arg(long, value_enum)]
    predictor: Option<PredictorArg>,
    /// Distractor tracklets to preload (template JSONL).
    #[arg(long)]
    ghosts: Option<PathBuf>,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scene script (TOML).
    #[arg(long, conflicts_with = "scene", required_unless_present_any = ["scene", "list_scenes"])]
    script: Option<PathBuf>,
    /// Built-in benchmark scene.
    #[arg(long)]
    scene: Option<String>,
    /// List the built-in scenes and exit.
    #[arg(long)]
    list_scenes: bool,
    /// Also write the resolved script next to the stream.
    #[arg(long)]
    write_script: Option<PathBuf>,
    #[arg(long, required_unless_present = "list_scenes")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    ghosts: Option<PathBuf>,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Args)]
struct SweepArgs {
    /// Template database (JSONL). A synthetic one is generated when omitted.
    #[arg(long)]
    db: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.05,0.1,0.15,0.2,0.25")]
    mix_levels: Vec<f64>,
    /// Inclusive range `a..b` or a comma list.
    #[arg(long, default_value = "1..9")]
    c_range: String,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    /// Rank-margin value at which filtering percentages are reported.
    #[arg(long, default_value_t = 0.8)]
    epsilon: f64,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    tracks: PathBuf,
    /// Labelled detection stream the tracks were produced from.
    #[arg(long)]
    gt: PathBuf,
    /// Write the report as JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GhostArgs {
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 5)]
    per_ghost: usize,
    #[arg(long, default_value_t = 128)]
    dim: usize,
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DbArgs {
    #[arg(long, default_value_t = 100)]
    identities: usize,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Track(a) => track(a),
        Command::Simulate(a) => simulate(a, seed),
        Command::Ablate(a) => ablate(a),
        Command::SweepFbtr(a) => sweep(a, seed.unwrap_or(0)),
        Command::Metrics(a) => metrics(a),
        Command::MakeGhosts(a) => ghosts(a, seed.unwrap_or(0)),
        Command::MakeDb(a) => db(a, seed.unwrap_or(0)),
    }
}

fn base_config(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => Ok(io::load_config(p)?),
        None => Ok(Config::default()),
    }
}

fn track_config(a: &TrackArgs) -> Result<Config> {
    let mut cfg = base_config(a.config.as_deref())?;
    if let Some(f) = a.fbtr {
        cfg.fbtr_mode = match f {
            FbtrArg::Off => FbtrMode::Off,
            FbtrArg::Simplified => FbtrMode::Simplified,
            FbtrArg::Rank => FbtrMode::RankBased,
        };
    }
    if a.tm {
        cfg.tm_enabled = true;
    } else if a.no_tm {
        cfg.tm_enabled = false;
    }
    if let Some(p) = a.predictor {
        cfg.predictor = match p {
            PredictorArg::Static => PredictorKind::Static,
            PredictorArg::Cv => PredictorKind::ConstantVelocity,
            PredictorArg::Kalman => PredictorKind::KalmanCv,
        };
    }
    if a.cm {
        if cfg.fbtr_mode == FbtrMode::Off {
            bail!("--cm needs reconnection; pass --fbtr simplified or --fbtr rank");
        }
        cfg.cm_enabled = true;
    } else if a.no_cm || cfg.fbtr_mode == FbtrMode::Off {
        cfg.cm_enabled = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_ghosts(path: Option<&Path>) -> Result<Vec<GhostTracklet>> {
    match path {
        Some(p) => io::read_templates(p).with_context(|| format!("reading ghosts from {}", p.display())),
        None => Ok(Vec::new()),
    }
}

fn track(a: TrackArgs) -> Result<()> {
    let cfg = track_config(&a)?;
    let ghosts = load_ghosts(a.ghosts.as_deref())?;
    let reader = io::read_stream(&a.input)?;
    let start = Instant::now();
    let out = run(&cfg, reader.frames::<f64>(), &ghosts)?;
    let secs = start.elapsed().as_secs_f64();
    let dir = &a.out.out_dir;
    io::write_tracks(&io::out_path(dir, "tracks.csv"), &out.tracks)?;
    io::write_joins(&io::out_path(dir, "joins.csv"), &out.joins)?;
    io::write_json(&io::out_path(dir, "stats.json"), &out.stats)?;
    let fps = out.stats.frames as f64 / secs.max(1e-9);
    let input = out.eval_input();
    if input.is_empty() {
        println!("{} frames, {} detections, {} joins; no labels to evaluate", out.stats.frames, out.stats.detections, out.joins.len());
        println!("FPS {fps:.1}");
        return Ok(());
    }
    let report = evaluate(&input)?;
    io::write_report(&io::out_path(dir, "report.json"), &report)?;
    io::write_crp_csv(&io::out_path(dir, "crp.csv"), &[("crp", &report.crp)])?;
    println!("{:>9}  {:>11}  {:>6}  {:>8}", "Frags", "ID-Switches", "CRS", "FPS");
    println!("{:>9.5}  {:>11.5}  {:>6.3}  {:>8.1}", report.frag, report.idsw, report.crs, fps);
    Ok(())
}

fn builtin_scene(name: &str) -> Option<SceneScript> {
    benchmark_suite()
        .into_iter()
        .chain(confusable_suite())
        .map(|b| b.script)
        .find(|s| s.name == name)
}

fn simulate(a: SimulateArgs, seed: Option<u64>) -> Result<()> {
    if a.list_scenes {
        for b in benchmark_suite().into_iter().chain(confusable_suite()) {
            let s = &b.script;
            println!("{:<20} {:>5} frames  {:>3} identities", s.name, s.frame_count, s.identities.len());
        }
        return Ok(());
    }
    let mut script = match (&a.script, &a.scene) {
        (Some(p), _) => io::load_script(p)?,
        (None, Some(n)) => builtin_scene(n).with_context(|| format!("no built-in scene named {n:?}"))?,
        (None, None) => bail!("pass --script or --scene"),
    };
    if let Some(s) = seed {
        script.seed = s;
    }
    let out = a.out.expect("required by clap");
    let scene = generate::<f64>(&script)?;
    io::write_stream(&out, script.embedding_dim, &scene.detections)?;
    if let Some(p) = &a.write_script {
        io::write_text(p, &io::script_to_toml(&script)?)?;
    }
    println!(
        "{}: {} detections of {} identities over {} frames",
        script.name,
        scene.detections.len(),
        script.identities.len(),
        script.frame_count
    );
    Ok(())
}

fn ablate(a: AblateArgs) -> Result<()> {
    let base = base_config(a.config.as_deref())?;
    let ghosts = load_ghosts(a.ghosts.as_deref())?;
    let frames = io::read_stream(&a.input)?.frames::<f64>().collect::<facetrack::Result<Vec<_>>>()?;
    let rows = run_ablation(&base, &frames, &ghosts)?;
    let dir = &a.out.out_dir;
    io::write_ablation_csv(&io::out_path(dir, "ablation.csv"), &rows)?;
    io::write_text(&io::out_path(dir, "ablation.txt"), &format_table(&rows, false))?;
    let series: Vec<(&str, &[f64])> = rows.iter().map(|r| (r.name.as_str(), r.crp.as_slice())).collect();
    io::write_crp_csv(&io::out_path(dir, "crp.csv"), &series)?;
    io::write_crp_svg(&io::out_path(dir, "crp.svg"), &series)?;
    print!("{}", format_table(&rows, true));
    Ok(())
}

fn parse_c_range(s: &str) -> Result<Vec<usize>> {
    let v: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().context("bad C range start")?;
        let b: usize = b.trim().trim_start_matches('=').parse().context("bad C range end")?;
        (a..=b).collect()
    } else {
        s.split(',')
            .map(|x| x.trim().parse().with_context(|| format!("bad C value {x:?}")))
            .collect::<Result<_>>()?
    };
    if v.is_empty() {
        bail!("empty C range {s:?}");
    }
    Ok(v)
}

fn sweep(a: SweepArgs, seed: u64) -> Result<()> {
    let c_values = parse_c_range(&a.c_range)?;
    let db = match &a.db {
        Some(p) => io::read_templates::<f64>(p)?,
        None => template_db(&DbParams::default(), seed)?,
    };
    let params = StudyParams {
        mix_levels: a.mix_levels.clone(),
        c_values: c_values.clone(),
        reps: a.reps,
        seed,
    };
    let result = run_study(&db, &params)?;
    let dir = &a.out.out_dir;
    io::write_study_samples(&io::out_path(dir, "epsilon_samples.csv"), &result.samples)?;
    let summary = result.summaries(a.epsilon, &c_values);
    io::write_study_summary(&io::out_path(dir, "filtered.csv"), &summary)?;

    let xs: Vec<f64> = c_values.iter().map(|&c| c as f64).collect();
    let mut names = Vec::new();
    let mut curves = Vec::new();
    for &level in &a.mix_levels {
        for class in [QueryClass::Correct, QueryClass::Wrong] {
            let ys: Vec<f64> = c_values
                .iter()
                .map(|&c| result.pct_filtered(level, c, class, a.epsilon, None).unwrap_or(f64::NAN))
                .collect();
            names.push(format!("{} {}%", class.name(), io::fmt_sig9(100.0 * level)));
            curves.push(ys);
        }
    }
    let series: Vec<(&str, &[f64])> = names.iter().map(String::as_str).zip(curves.iter().map(Vec::as_slice)).collect();
    let (lo, hi) = (xs[0], xs[xs.len() - 1]);
    let svg = io::line_plot_svg(
        &format!("Filtered reconnections at epsilon {}", io::fmt_sig9(a.epsilon)),
        "C",
        "% filtered",
        &xs,
        &series,
        (lo, if hi > lo { hi } else { lo + 1.0 }),
        (0.0, 100.0),
    );
    io::write_text(&io::out_path(dir, "filtered.svg"), &svg)?;

    println!("{:>6}  {:>3}  {:>8}  {:>8}  {:>8}", "mix", "C", "correct", "wrong", "id_switch");
    for &level in &a.mix_levels {
        for &c in &c_values {
            let p = |class| {
                result
                    .pct_filtered(level, c, class, a.epsilon, None)
                    .map_or("-".to_string(), |v| format!("{v:.1}"))
            };
            println!(
                "{:>6}  {:>3}  {:>8}  {:>8}  {:>8}",
                io::fmt_sig9(level),
                c,
                p(QueryClass::Correct),
                p(QueryClass::Wrong),
                p(QueryClass::IdSwitch)
            );
        }
    }
    Ok(())
}

fn metrics(a: MetricsArgs) -> Result<()> {
    let tracks = io::read_tracks(&a.tracks)?;
    let dets = io::read_detections::<f64>(&a.gt)?;
    let input = label_tracks(&tracks, &dets)?;
    let report = evaluate(&input)?;
    if let Some(p) = &a.out {
        io::write_report(p, &report)?;
    }
    println!("{:>9}  {:>11}  {:>6}", "Frags", "ID-Switches", "CRS");
    println!("{:>9.5}  {:>11.5}  {:>6.3}", report.frag, report.idsw, report.crs);
    Ok(())
}

fn ghosts(a: GhostArgs, seed: u64) -> Result<()> {
    let set = make_ghosts::<f64>(a.count, a.per_ghost, a.dim, a.sigma, seed)?;
    io::write_templates(&a.out, &set)?;
    println!("{} ghost tracklets written to {}", set.len(), a.out.display());
    Ok(())
}

fn db(a: DbArgs, seed: u64) -> Result<()> {
    let params = DbParams {
        identities: a.identities,
        lookalike_pairs: a.identities * 3 / 10,
        ..DbParams::default()
    };
    let set = template_db::<f64>(&params, seed)?;
    io::write_templates(&a.out, &set)?;
    println!("{} template tracklets written to {}", set.len(), a.out.display());
    Ok(())
}
