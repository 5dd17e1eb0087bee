//! `deltapath` command-line driver.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | every requested output written |
//! | 1 | `goldens check` found a mismatch |
//! | 2 | invalid command line |
//! | 3 | scene missing or invalid |
//! | 4 | static field file missing or invalid |
//! | 5 | I/O failure while reading or writing outputs |
//! | 6 | invalid configuration (camera, budget, experiment spec) |
//! | 7 | field training diverged |

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use deltapath::adaptive::{DitherMode, PixelStats};
use deltapath::compositor::{compute_metrics, write_metrics_csv};
use deltapath::experiment::{run_experiment, write_experiment_csv, ExperimentSpec};
use deltapath::field::train::evaluate_loss;
use deltapath::field::{generate_dataset, train, FieldConfig, FieldSource, HashGridConfig, Network, TrainConfig};
use deltapath::integrator::IntegratorConfig;
use deltapath::render::{render, render_hybrid, static_image, Estimator, HybridSettings};
use deltapath::scene::{resolve_scene_desc, Scene, SCENE_DIR_ENV};
use deltapath::{Error, Image, Vec3};

#[derive(Parser)]
#[command(name = "deltapath", version, about = "Hybrid static-field + delta path tracer")]
struct Cli {
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render one frame, or a sequence with a moving dynamic object.
    Render(RenderArgs),
    /// Fit a learned static field to path-traced samples.
    TrainField(TrainArgs),
    /// Compare a learned field against the path-traced oracle.
    EvalField(EvalArgs),
    /// Equal-cost comparison of integrators against a reference.
    Experiment(ExperimentArgs),
    /// Check or update regression hashes of fixed renders.
    Goldens(GoldensArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum IntegratorChoice {
    ReferenceStatic,
    ReferenceDynamic,
    Additive,
    Subtractive,
    DeltaPss,
    Hybrid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Backend {
    Oracle,
    Learned,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum DitherChoice {
    Independent,
    BlockStratified,
}

fn parse_vec3(s: &str) -> Result<Vec3, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected x,y,z, got '{s}'"));
    }
    let mut v = [0.0; 3];
    for (o, p) in v.iter_mut().zip(&parts) {
        *o = p.trim().parse::<f64>().map_err(|e| format!("'{p}': {e}"))?;
    }
    Ok(Vec3::from(v))
}

#[derive(Args, Clone, Debug)]
struct SceneArgs {
    /// Scene JSON file, or `builtin:NAME`. Relative paths resolve against
    /// $DELTAPATH_SCENE_DIR when set.
    #[arg(long)]
    scene: String,
    #[arg(long)]
    width: Option<u32>,
    #[arg(long)]
    height: Option<u32>,
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    camera_pos: Option<Vec3>,
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    look_at: Option<Vec3>,
    /// Vertical field of view in degrees.
    #[arg(long)]
    vfov: Option<f64>,
}

impl SceneArgs {
    fn load(&self, offset: Vec3) -> Result<Scene, Error> {
        let dir = std::env::var_os(SCENE_DIR_ENV).map(PathBuf::from);
        let (mut desc, base) = resolve_scene_desc(&self.scene, dir.as_deref())?;
        if offset != Vec3::new(0.0, 0.0, 0.0) {
            desc = desc.with_dynamic_offset(offset);
        }
        let cam = &mut desc.camera;
        if let Some(w) = self.width {
            cam.width = w;
        }
        if let Some(h) = self.height {
            cam.height = h;
        }
        if let Some(p) = self.camera_pos {
            cam.position = p;
        }
        if let Some(p) = self.look_at {
            cam.look_at = p;
        }
        if let Some(f) = self.vfov {
            cam.vfov = f;
        }
        cam.validate()?;
        Scene::from_desc(desc, base.as_deref())
    }
}

#[derive(Args, Clone, Debug)]
struct RenderArgs {
    #[command(flatten)]
    scene: SceneArgs,
    #[arg(long, value_enum)]
    integrator: IntegratorChoice,
    /// Samples per pixel. For `hybrid`, the mean delta samples per pixel
    /// (fractional allowed, 0 leaves only the per-block floor).
    #[arg(long, default_value_t = 1.0)]
    spp: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Index of the first frame.
    #[arg(long, default_value_t = 0)]
    frame: u32,
    /// Number of frames; frame k moves the dynamic objects by k * --translate.
    #[arg(long, default_value_t = 1)]
    frames: u32,
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true, default_value = "0,0,0")]
    translate: Vec3,
    /// Static field backend for `hybrid`. Defaults to `learned` when
    /// --field is given, `oracle` otherwise.
    #[arg(long, value_enum)]
    field_backend: Option<Backend>,
    /// Learned field file.
    #[arg(long)]
    field: Option<PathBuf>,
    /// Paths per oracle field query.
    #[arg(long, default_value_t = 256)]
    oracle_spp: u32,
    #[arg(long, default_value_t = 0)]
    oracle_seed: u64,
    /// Use the delta-only composition everywhere, ignoring the mask.
    #[arg(long)]
    no_mask: bool,
    /// Uniform sample map instead of the adaptive one.
    #[arg(long)]
    no_adaptive: bool,
    #[arg(long, value_enum, default_value = "block-stratified")]
    dither: DitherChoice,
    /// Also write the static, plus and minus buffers.
    #[arg(long)]
    dump_buffers: bool,
    #[arg(long)]
    dump_sample_map: bool,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    scene: SceneArgs,
    /// Training samples drawn from the static surfaces.
    #[arg(long, default_value_t = 2_000_000)]
    samples: usize,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 4096)]
    batch: usize,
    #[arg(long, default_value_t = 5e-3)]
    lr: f64,
    #[arg(long, default_value_t = 0.75)]
    lr_decay: f64,
    /// Dataset and shuffling seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Parameter initialization seed.
    #[arg(long, default_value_t = 7)]
    net_seed: u64,
    #[arg(long, default_value_t = 8)]
    levels: u32,
    #[arg(long, default_value_t = 14)]
    log2_table_size: u32,
    #[arg(long, default_value_t = 7)]
    hidden_layers: usize,
    #[arg(long, default_value_t = 64)]
    neurons: usize,
    /// Field file to write.
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch loss table.
    #[arg(long)]
    loss_csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    scene: SceneArgs,
    #[arg(long)]
    field: PathBuf,
    #[arg(long, default_value_t = 4096)]
    oracle_spp: u32,
    #[arg(long, default_value_t = 12345)]
    oracle_seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// Experiment spec (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// CSV file to write.
    #[arg(long)]
    out: PathBuf,
    /// Also write the reference image.
    #[arg(long)]
    reference_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GoldensArgs {
    #[arg(value_enum)]
    action: GoldensAction,
    /// Directory holding `goldens.txt`.
    #[arg(long, default_value = concat!(env!("CARGO_MANIFEST_DIR"), "/goldens"))]
    dir: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum GoldensAction {
    Check,
    Update,
}

enum Failure {
    Error(Error),
    GoldenMismatch(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Error(Error::Io(e))
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Scene(_) | Error::SceneParse { .. } => 3,
        Error::FieldFile(_) => 4,
        Error::Io(_) | Error::Csv(_) | Error::Image { .. } => 5,
        Error::Config(_) => 6,
        Error::TrainingDiverged(_) => 7,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().expect("thread pool configured once");
    }
    let result = match cli.command {
        Command::Render(a) => cmd_render(&a),
        Command::TrainField(a) => cmd_train(&a),
        Command::EvalField(a) => cmd_eval(&a),
        Command::Experiment(a) => cmd_experiment(&a),
        Command::Goldens(a) => cmd_goldens(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::GoldenMismatch(n)) => {
            eprintln!("error: {n} golden output(s) differ");
            ExitCode::from(1)
        }
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

// ---------------------------------------------------------------------------
// render

/// Output files of one render, relative name and contents.
type Outputs = Vec<(String, Vec<u8>)>;

fn estimator_of(choice: IntegratorChoice) -> Option<Estimator> {
    Some(match choice {
        IntegratorChoice::ReferenceStatic => Estimator::ReferenceStatic,
        IntegratorChoice::ReferenceDynamic => Estimator::ReferenceDynamic,
        IntegratorChoice::Additive => Estimator::Additive,
        IntegratorChoice::Subtractive => Estimator::Subtractive,
        IntegratorChoice::DeltaPss => Estimator::DeltaPss,
        IntegratorChoice::Hybrid => return None,
    })
}

fn csv_bytes(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>, Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn field_source(a: &RenderArgs) -> Result<FieldSource, Error> {
    let backend = a.field_backend.unwrap_or(if a.field.is_some() { Backend::Learned } else { Backend::Oracle });
    match backend {
        Backend::Oracle => Ok(FieldSource::Oracle { samples: a.oracle_spp, seed: a.oracle_seed }),
        Backend::Learned => match &a.field {
            Some(p) => Ok(FieldSource::Learned { path: p.clone() }),
            None => Err(Error::Config("--field-backend learned needs --field FILE".into())),
        },
    }
}

fn render_outputs(a: &RenderArgs) -> Result<Outputs, Error> {
    if a.frames == 0 {
        return Err(Error::Config("--frames must be at least 1".into()));
    }
    let estimator = estimator_of(a.integrator);
    if estimator.is_some() && (a.spp < 1.0 || a.spp.fract() != 0.0 || a.spp > u32::MAX as f64) {
        return Err(Error::Config(format!("--spp must be a positive integer for this integrator, got {}", a.spp)));
    }
    if !(a.spp.is_finite() && a.spp >= 0.0) {
        return Err(Error::Config(format!("--spp must be finite and non-negative, got {}", a.spp)));
    }
    let cfg = IntegratorConfig::default();
    let base = a.scene.load(Vec3::new(0.0, 0.0, 0.0))?;
    let static_img = match estimator {
        None => Some(static_image(&base, &field_source(a)?.open()?, 0)),
        Some(_) => None,
    };

    let mut out = Outputs::new();
    let mut stats: Option<PixelStats> = None;
    for k in 0..a.frames {
        let scene = if k == 0 { base.clone() } else { a.scene.load(a.translate * k as f64)? };
        let frame = a.frame + k;
        let prefix = if a.frames > 1 { format!("frame_{frame:04}/") } else { String::new() };
        let (w, h) = (scene.camera.width as usize, scene.camera.height as usize);
        let xy = move |i: usize| [(i % w).to_string(), (i / w).to_string()];

        if let Some(est) = estimator {
            let e = render(&scene, est, a.spp as u32, a.seed, frame, &cfg);
            let mean = e.mean_image();
            out.push((format!("{prefix}image.pfm"), mean.clamped().to_pfm_bytes()));
            out.push((format!("{prefix}raw.pfm"), mean.to_pfm_bytes()));
            out.push((format!("{prefix}std_error.pfm"), e.std_error_image().to_pfm_bytes()));
            let rows = e.pixels.iter().enumerate().map(|(i, p)| {
                let (m, se) = (p.mean(), p.std_error());
                let mut r = xy(i).to_vec();
                r.push(p.n.to_string());
                r.extend([m.r, m.g, m.b, se.r, se.g, se.b].map(|v| v.to_string()));
                r
            });
            let header = ["x", "y", "samples", "mean_r", "mean_g", "mean_b", "se_r", "se_g", "se_b"];
            out.push((format!("{prefix}stats.csv"), csv_bytes(&header, rows)?));
            continue;
        }

        let settings = HybridSettings {
            spp: a.spp,
            adaptive: !a.no_adaptive,
            masked: !a.no_mask,
            dither: match a.dither {
                DitherChoice::Independent => DitherMode::Independent,
                DitherChoice::BlockStratified => DitherMode::BlockStratified,
            },
            seed: a.seed,
            frame,
            ..Default::default()
        };
        let f = render_hybrid(&scene, static_img.as_ref().expect("hybrid has a static image"), &settings, &cfg, stats.as_ref())?;
        let delta = f.buffers.delta_image();
        out.push((format!("{prefix}image.pfm"), f.image.clamped().to_pfm_bytes()));
        out.push((format!("{prefix}raw.pfm"), f.image.to_pfm_bytes()));
        out.push((format!("{prefix}delta.pfm"), delta.to_pfm_bytes()));
        out.push((format!("{prefix}mask.pfm"), f.gbuffer.mask_image().to_pfm_bytes()));
        if a.dump_sample_map {
            out.push((format!("{prefix}sample_map.pfm"), Image::from_scalar(w, h, &f.sample_map.values).to_pfm_bytes()));
        }
        if a.dump_buffers {
            out.push((format!("{prefix}static.pfm"), f.buffers.static_image.to_pfm_bytes()));
            out.push((format!("{prefix}plus.pfm"), f.buffers.plus.to_pfm_bytes()));
            out.push((format!("{prefix}minus.pfm"), f.buffers.minus.to_pfm_bytes()));
        }
        let rows = (0..w * h).map(|i| {
            let d = delta.pixels[i];
            let mut r = xy(i).to_vec();
            r.push(f.buffers.mask[i].to_string());
            r.push(f.sample_map.values[i].to_string());
            r.push(f.buffers.spp[i].to_string());
            r.extend([d.r, d.g, d.b, f.delta_variance[i]].map(|v| v.to_string()));
            r
        });
        let header = ["x", "y", "mask", "sample_map", "samples", "delta_r", "delta_g", "delta_b", "delta_lum_variance"];
        out.push((format!("{prefix}stats.csv"), csv_bytes(&header, rows)?));
        log::info!("frame {frame}: {} delta samples", f.delta_samples);
        stats = Some(f.stats);
    }
    Ok(out)
}

fn write_outputs(dir: &Path, outputs: &Outputs) -> Result<(), Error> {
    for (name, bytes) in outputs {
        let path = dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, bytes)?;
    }
    Ok(())
}

fn cmd_render(a: &RenderArgs) -> Result<(), Failure> {
    let t = Instant::now();
    let outputs = render_outputs(a)?;
    write_outputs(&a.out, &outputs)?;
    println!("wrote {} files to {} in {:.2}s", outputs.len(), a.out.display(), t.elapsed().as_secs_f64());
    Ok(())
}

// ---------------------------------------------------------------------------
// field

fn cmd_train(a: &TrainArgs) -> Result<(), Failure> {
    let scene = a.scene.load(Vec3::new(0.0, 0.0, 0.0))?;
    let config = FieldConfig {
        grid: HashGridConfig { levels: a.levels, log2_table_size: a.log2_table_size, ..Default::default() },
        hidden_layers: a.hidden_layers,
        width: a.neurons,
    };
    let mut net = Network::<f32>::new(config, scene.static_bounds().padded(0.01), a.net_seed)?;
    let t = Instant::now();
    let data = generate_dataset(&scene, a.samples, a.seed);
    log::info!("dataset of {} samples in {:.1}s", data.len(), t.elapsed().as_secs_f64());
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch,
        learning_rate: a.lr,
        lr_decay: a.lr_decay,
        seed: a.seed,
        ..Default::default()
    };
    let report = train(&mut net, &data, &cfg)?;
    net.save(&a.out)?;
    if let Some(p) = &a.loss_csv {
        let rows = std::iter::once(vec!["0".to_string(), report.initial_loss.to_string()]).chain(
            report.epoch_losses.iter().enumerate().map(|(i, l)| vec![(i + 1).to_string(), l.to_string()]),
        );
        std::fs::write(p, csv_bytes(&["epoch", "loss"], rows)?)?;
    }
    println!(
        "trained {} parameters in {:.1}s: loss {:.4e} -> {:.4e} (held-in {:.4e})",
        net.param_count(),
        t.elapsed().as_secs_f64(),
        report.initial_loss,
        report.final_loss(),
        evaluate_loss(&net, &data, cfg.loss_epsilon),
    );
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> Result<(), Failure> {
    let scene = a.scene.load(Vec3::new(0.0, 0.0, 0.0))?;
    let learned = static_image(&scene, &FieldSource::Learned { path: a.field.clone() }.open()?, 0);
    let oracle = static_image(&scene, &FieldSource::Oracle { samples: a.oracle_spp, seed: a.oracle_seed }.open()?, 0);
    let m = compute_metrics(&learned, &oracle, None)?;
    std::fs::create_dir_all(&a.out)?;
    learned.write_pfm(&a.out.join("learned.pfm"))?;
    oracle.write_pfm(&a.out.join("oracle.pfm"))?;
    let (w, h) = (learned.width, learned.height);
    Image::from_scalar(w, h, &m.error_map).write_pfm(&a.out.join("error.pfm"))?;
    println!("mse {:.4e} rel_mse {:.4e}", m.mse, m.rel_mse);
    write_metrics_csv(std::fs::File::create(a.out.join("metrics.csv"))?, &[("learned".to_string(), m)])?;
    Ok(())
}

// ---------------------------------------------------------------------------
// experiment

fn cmd_experiment(a: &ExperimentArgs) -> Result<(), Failure> {
    let spec = ExperimentSpec::load(&a.spec)?;
    let dir = std::env::var_os(SCENE_DIR_ENV).map(PathBuf::from);
    let report = run_experiment(&spec, dir.as_deref())?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    write_experiment_csv(std::fs::File::create(&a.out)?, &report.rows)?;
    if let Some(p) = &a.reference_out {
        report.reference.write_pfm(p)?;
    }
    let failed = report.rows.iter().filter(|r| r.error.is_some()).count();
    println!("{} rows written to {} ({failed} failed)", report.rows.len(), a.out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// goldens

/// Fixed render invocations whose outputs are hashed.
const GOLDEN_CASES: &[(&str, &str)] = &[
    ("cornell-reference", "--scene builtin:cornell-sphere --width 16 --height 16 --integrator reference-dynamic --spp 8 --seed 1"),
    ("cornell-delta", "--scene builtin:cornell-sphere --width 16 --height 16 --integrator delta-pss --spp 4 --seed 2"),
    ("two-room-additive", "--scene builtin:two-room --width 16 --height 16 --integrator additive --spp 4 --seed 3"),
    ("env-micro-delta", "--scene builtin:env-micro --width 8 --height 8 --integrator delta-pss --spp 16 --seed 4"),
    (
        "cornell-hybrid-video",
        "--scene builtin:cornell-sphere --width 16 --height 16 --integrator hybrid --spp 1 --seed 5 \
         --frames 2 --translate 0.05,0,0 --oracle-spp 4 --dump-sample-map --dump-buffers",
    ),
];

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn golden_hashes() -> Result<Vec<(String, String)>, Error> {
    let mut lines = Vec::new();
    for (name, args) in GOLDEN_CASES {
        let argv = ["render"].into_iter().chain(args.split_whitespace()).chain(["--out", "unused"]);
        let parsed = Cli::try_parse_from(std::iter::once("deltapath").chain(argv))
            .map_err(|e| Error::Config(format!("golden case {name}: {e}")))?;
        let Command::Render(r) = parsed.command else { unreachable!("golden cases are renders") };
        for (file, bytes) in render_outputs(&r)? {
            lines.push((format!("{name}/{file}"), hex(&Sha256::digest(&bytes))));
        }
    }
    Ok(lines)
}

fn cmd_goldens(a: &GoldensArgs) -> Result<(), Failure> {
    let path = a.dir.join("goldens.txt");
    let current = golden_hashes()?;
    match a.action {
        GoldensAction::Update => {
            std::fs::create_dir_all(&a.dir)?;
            let text: String = current.iter().map(|(k, v)| format!("{k} {v}\n")).collect();
            std::fs::write(&path, text)?;
            println!("wrote {} hashes to {}", current.len(), path.display());
            Ok(())
        }
        GoldensAction::Check => {
            let text = std::fs::read_to_string(&path)?;
            let stored: Vec<(String, String)> = text
                .lines()
                .filter(|l| !l.trim().is_empty())
                .filter_map(|l| l.split_once(' ').map(|(k, v)| (k.to_string(), v.trim().to_string())))
                .collect();
            let mut bad = 0;
            for (k, v) in &current {
                match stored.iter().find(|(sk, _)| sk == k) {
                    Some((_, sv)) if sv == v => {}
                    Some(_) => {
                        eprintln!("mismatch: {k}");
                        bad += 1;
                    }
                    None => {
                        eprintln!("missing golden: {k}");
                        bad += 1;
                    }
                }
            }
            for (k, _) in stored.iter().filter(|(k, _)| !current.iter().any(|(ck, _)| ck == k)) {
                eprintln!("stale golden: {k}");
                bad += 1;
            }
            if bad > 0 {
                return Err(Failure::GoldenMismatch(bad));
            }
            println!("{} golden outputs match", current.len());
            Ok(())
        }
    }
}
