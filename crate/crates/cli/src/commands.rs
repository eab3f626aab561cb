use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use exhaustkit::augment::{augment_frame, AugmentError, AugmentParams};
use exhaustkit::eval::{average_precision_r40, format_table, inject_noise, EvalConfig, EvalError, Metric, NoiseProtocolParams};
use exhaustkit::gas_gen::{generate_cloud, generate_random_noise_cloud, GasCloud, GenError};
use exhaustkit::io::{self, parse_labels, read_pool, Dataset, IoError, LabelFrame};
use exhaustkit::loss::{iou_matrix, noise_loss, total_loss};
use exhaustkit::resampler::{resample_to_sensor, SensorSpec};
use exhaustkit::seed::{derive_seed, STAGE_AUGMENT, STAGE_GENERATE, STAGE_INJECT};
use exhaustkit::{Box3D, SeededRng};

use crate::args::*;
use crate::output::{Manifest, Outputs, MANIFEST};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

macro_rules! data_error {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Data(e.to_string())
            }
        })*
    };
}

data_error!(IoError, GenError, AugmentError, EvalError);

pub fn run(cli: Cli, argv: &[String]) -> Result<(), CliError> {
    let threads = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers)
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let label_frame = if cli.kitti_camera_frame {
        LabelFrame::KittiCamera
    } else {
        LabelFrame::Sensor
    };
    let ctx = Ctx {
        threads,
        label_frame,
        argv,
    };
    match cli.command {
        Command::Generate(a) => generate(&ctx, a),
        Command::Augment(a) => augment(&ctx, a),
        Command::Resample(a) => resample(&ctx, a),
        Command::InjectNoise(a) => inject(&ctx, a),
        Command::Evaluate(a) => evaluate(&ctx, a),
        Command::Iou(a) => iou(&ctx, a),
        Command::Loss(a) => loss(&ctx, a),
    }
}

struct Ctx<'a> {
    threads: rayon::ThreadPool,
    label_frame: LabelFrame,
    argv: &'a [String],
}

impl Ctx<'_> {
    fn dataset(&self, root: &Path) -> Dataset {
        Dataset {
            root: root.to_path_buf(),
            label_frame: self.label_frame,
        }
    }

    /// Runs `f` for every id on the worker pool. Results come back in id
    /// order, so the first failing frame is reported regardless of timing.
    fn per_frame<T: Send>(&self, ids: &[String], f: impl Fn(&str) -> Result<T, CliError> + Sync) -> Result<Vec<T>, CliError> {
        let results: Vec<Result<T, CliError>> = self.threads.install(|| ids.par_iter().map(|id| f(id)).collect());
        results.into_iter().collect()
    }
}

fn distinct_dirs(input: &Path, out: &Path) -> Result<(), CliError> {
    let same = match (input.canonicalize(), out.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    };
    if same {
        return Err(CliError::Usage(format!("--out must differ from the input directory {}", input.display())));
    }
    Ok(())
}

fn frame_ids(ds: &Dataset) -> Result<Vec<String>, CliError> {
    if !ds.root.join("velodyne").is_dir() {
        return Err(CliError::Data(format!("{}: no velodyne/ directory", ds.root.display())));
    }
    Ok(ds.frame_ids()?)
}

fn warn_clamped(total: usize) {
    if total > 0 {
        eprintln!("warning: clamped {total} reflectivity values into [0, 1]");
    }
}

/// Copies the label, prediction and gas sidecar files of a frame unchanged.
fn copy_annotations(out: &Outputs, src: &Dataset, dst: &Dataset, id: &str, with_gas: bool) -> Result<(), CliError> {
    let mut pairs = vec![(src.label_path(id), dst.label_path(id)), (src.pred_path(id), dst.pred_path(id))];
    if with_gas {
        pairs.push((src.gas_label_path(id), dst.gas_label_path(id)));
    }
    for (from, to) in pairs {
        if from.exists() {
            let bytes = fs::read(&from).map_err(|e| CliError::Data(format!("{}: {e}", from.display())))?;
            out.write(&to, bytes)?;
        }
    }
    Ok(())
}

fn generate(ctx: &Ctx, a: GenerateArgs) -> Result<(), CliError> {
    let (pool, ids) = read_pool(&a.pool)?;
    if !a.random_noise && pool.sources().is_empty() {
        return Err(CliError::Data(format!("{}: pool has no sources", a.pool.display())));
    }
    let dest = a.out.clone().unwrap_or_else(|| a.pool.clone());
    let tasks: Vec<String> = (0..a.count).map(|j| format!("{j:06}")).collect();
    let clouds: Vec<GasCloud> = ctx.per_frame(&tasks, |task| {
        let j: usize = task.parse().expect("numeric task id");
        let mut rng = SeededRng::new(derive_seed(a.seed, task, STAGE_GENERATE));
        if a.random_noise {
            return Ok(generate_random_noise_cloud(&mut rng));
        }
        let s = j % pool.sources().len();
        Ok(generate_cloud(&pool.sources()[s], &ids[s], &mut rng)?)
    })?;

    let mut out = Outputs::new();
    out.dir(&dest)?;
    let source_files: Vec<String> = ids.iter().map(|id| format!("{id}.bin")).collect();
    if dest != a.pool {
        for f in &source_files {
            let bytes = fs::read(a.pool.join("sources").join(f)).map_err(|e| CliError::Data(e.to_string()))?;
            out.write(&dest.join("sources").join(f), bytes)?;
        }
    }
    let mut manifest = io::PoolManifest {
        sources: source_files,
        generated: Vec::with_capacity(clouds.len()),
    };
    for (i, gas) in clouds.iter().enumerate() {
        let file = format!("{i:06}.bin");
        out.write(&dest.join("generated").join(&file), io::encode_points(&gas.cloud))?;
        manifest.generated.push(io::PoolEntry {
            file,
            provenance: gas.provenance.clone(),
        });
    }
    let index = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Internal(e.to_string()))?;
    out.write(&dest.join(io::POOL_MANIFEST), index + "\n")?;
    out.manifest(&dest.join(MANIFEST), &Manifest::new("generate", Some(a.seed), ctx.argv))?;
    out.commit();
    eprintln!("generated {} clouds into {}", clouds.len(), dest.display());
    Ok(())
}

fn augment(ctx: &Ctx, a: AugmentArgs) -> Result<(), CliError> {
    distinct_dirs(&a.data, &a.out)?;
    let src = ctx.dataset(&a.data);
    let dst = ctx.dataset(&a.out);
    let params = AugmentParams {
        p_gas: a.p_gas,
        p_top: a.p_top,
        standoff: a.standoff,
        jitter: a.jitter,
        ..AugmentParams::scheduled(a.epoch, a.epochs).map_err(|e| CliError::Usage(e.to_string()))?
    };
    params.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let (pool, _) = read_pool(&a.pool)?;
    let ids = frame_ids(&src)?;
    let mut out = Outputs::new();
    out.dir(&a.out)?;
    let stats = ctx.per_frame(&ids, |id| {
        let (frame, clamped) = src.read_frame(id)?;
        let mut rng = SeededRng::new(derive_seed(a.seed, id, STAGE_AUGMENT));
        let aug = augment_frame(&frame, &pool, &params, &mut rng)?;
        out.write(&dst.cloud_path(id), io::encode_points(&aug.frame.cloud))?;
        copy_annotations(&out, &src, &dst, id, false)?;
        let gas: Vec<String> = aug
            .gas_boxes
            .iter()
            .map(|b| io::format_label_line(&exhaustkit::GroundTruth::simple(exhaustkit::frame::GAS_EXHAUST_CLASS, *b), None, ctx.label_frame) + "\n")
            .collect();
        out.write(&dst.gas_label_path(id), gas.concat())?;
        Ok((clamped, aug.gas_boxes.len()))
    })?;
    warn_clamped(stats.iter().map(|s| s.0).sum());
    out.manifest(&a.out.join(MANIFEST), &Manifest::new("augment", Some(a.seed), ctx.argv))?;
    out.commit();
    eprintln!(
        "augmented {} frames (p_aug {}), inserted {} clouds",
        ids.len(),
        params.p_aug,
        stats.iter().map(|s| s.1).sum::<usize>()
    );
    Ok(())
}

fn load_sensor(name: &str) -> Result<SensorSpec, CliError> {
    if let Some(spec) = SensorSpec::preset(name) {
        return Ok(spec);
    }
    let path = Path::new(name);
    if !path.exists() {
        return Err(CliError::Usage(format!("--sensor: `{name}` is neither a preset nor an existing file")));
    }
    Ok(io::read_sensor_spec(path)?)
}

fn resample(ctx: &Ctx, a: ResampleArgs) -> Result<(), CliError> {
    distinct_dirs(&a.data, &a.out)?;
    let spec = load_sensor(&a.sensor)?;
    let src = ctx.dataset(&a.data);
    let dst = ctx.dataset(&a.out);
    let ids = frame_ids(&src)?;
    let mut out = Outputs::new();
    out.dir(&a.out)?;
    let clamped = ctx.per_frame(&ids, |id| {
        let loaded = io::read_points(&src.cloud_path(id))?;
        out.write(&dst.cloud_path(id), io::encode_points(&resample_to_sensor(&loaded.cloud, &spec)))?;
        copy_annotations(&out, &src, &dst, id, true)?;
        Ok(loaded.clamped)
    })?;
    warn_clamped(clamped.iter().sum());
    out.manifest(&a.out.join(MANIFEST), &Manifest::new("resample", None, ctx.argv))?;
    out.commit();
    Ok(())
}

fn inject(ctx: &Ctx, a: InjectNoiseArgs) -> Result<(), CliError> {
    distinct_dirs(&a.data, &a.out)?;
    if !(a.dilation >= 0.0) {
        return Err(CliError::Usage(format!("--dilation must be non-negative, got {}", a.dilation)));
    }
    let params = NoiseProtocolParams {
        k_prime: a.kprime,
        dilation: a.dilation,
    };
    let src = ctx.dataset(&a.data);
    let dst = ctx.dataset(&a.out);
    let ids = frame_ids(&src)?;
    let mut out = Outputs::new();
    out.dir(&a.out)?;
    let clamped = ctx.per_frame(&ids, |id| {
        let (frame, clamped) = src.read_frame(id)?;
        let mut rng = SeededRng::new(derive_seed(a.seed, id, STAGE_INJECT));
        let noisy = inject_noise(&frame, &params, &mut rng);
        out.write(&dst.cloud_path(id), io::encode_points(&noisy.cloud))?;
        copy_annotations(&out, &src, &dst, id, true)?;
        Ok(clamped)
    })?;
    warn_clamped(clamped.iter().sum());
    out.manifest(&a.out.join(MANIFEST), &Manifest::new("inject-noise", Some(a.seed), ctx.argv))?;
    out.commit();
    Ok(())
}

fn evaluate(ctx: &Ctx, a: EvaluateArgs) -> Result<(), CliError> {
    let ds = ctx.dataset(&a.data);
    let pred_dir = a.pred.clone().unwrap_or_else(|| a.data.join("pred"));
    let ids = ds.labeled_ids()?;
    let frames = ctx.per_frame(&ids, |id| {
        let gts = io::read_labels(&ds.label_path(id), ctx.label_frame)?;
        let pred_path = pred_dir.join(format!("{id}.txt"));
        let preds = if pred_path.exists() {
            io::read_predictions(&pred_path, ctx.label_frame)?
        } else {
            Vec::new()
        };
        Ok((preds, gts))
    })?;
    let mut results = Vec::with_capacity(2);
    let mut config = EvalConfig::default();
    for metric in [Metric::Bev, Metric::ThreeD] {
        config = EvalConfig {
            iou_threshold: a.iou_threshold,
            metric,
            range_gate: a.range_gate,
            ..EvalConfig::default()
        };
        results.push(average_precision_r40(&frames, &config)?);
    }
    let table = format_table(&results, &config);
    print!("{table}");
    if let Some(path) = &a.out {
        let out = Outputs::new();
        out.write(path, &table)?;
        out.manifest(&sidecar(path), &Manifest::new("evaluate", None, ctx.argv))?;
        out.commit();
    }
    Ok(())
}

fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    path.with_file_name(name)
}

/// Boxes from a label-format file; the score column is optional.
fn read_boxes(path: &Path, frame: LabelFrame) -> Result<Vec<Box3D>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(parse_labels(&text, path, frame)?.into_iter().map(|l| l.object.bbox).collect())
}

fn iou(ctx: &Ctx, a: IouArgs) -> Result<(), CliError> {
    let rows = read_boxes(&a.a, ctx.label_frame)?;
    let cols = read_boxes(&a.b, ctx.label_frame)?;
    let m = iou_matrix(&rows, &cols);
    let mut text = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| v.to_string()).collect();
        let _ = writeln!(text, "{}", row.join(","));
    }
    print!("{text}");
    if let Some(path) = &a.out {
        let out = Outputs::new();
        out.write(path, &text)?;
        out.manifest(&sidecar(path), &Manifest::new("iou", None, ctx.argv))?;
        out.commit();
    }
    Ok(())
}

fn loss(ctx: &Ctx, a: LossArgs) -> Result<(), CliError> {
    if !a.beta.is_finite() || !a.l_train.is_finite() {
        return Err(CliError::Usage("--beta and --l-train must be finite".into()));
    }
    let preds = read_boxes(&a.pred, ctx.label_frame)?;
    let gas = read_boxes(&a.gas, ctx.label_frame)?;
    let breakdown = total_loss(a.l_train, noise_loss(&preds, &gas), a.beta);
    let text = serde_json::to_string(&breakdown).map_err(|e| CliError::Internal(e.to_string()))? + "\n";
    print!("{text}");
    if let Some(path) = &a.out {
        let out = Outputs::new();
        out.write(path, &text)?;
        out.manifest(&sidecar(path), &Manifest::new("loss", None, ctx.argv))?;
        out.commit();
    }
    Ok(())
}
