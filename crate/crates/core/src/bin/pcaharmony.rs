use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use pcaharmony::experiment::{
    per_image_csv, run_pipeline, run_stub_trainer, score_predictions, PipelineOptions, RunConfig,
    Stage,
};
use pcaharmony::ingest::matrix::ids_path;
use pcaharmony::ingest::{
    flatten, load_dataset, parse_size, split_dataset, unflatten_images, Channel, DataMatrix,
    Layout, LoadOptions, ScalarWidth, DEFAULT_RATIOS, DEFAULT_SEED,
};
use pcaharmony::metrics::DEFAULT_THRESHOLD;
use pcaharmony::pca::{fit_pca, scree_csv, scree_export, select_components, PcaModel, SelectionPolicy};
use pcaharmony::stats::{paired_t_test, welch_t_test};
use pcaharmony::{Error, Result};

#[derive(Parser)]
#[command(name = "pcaharmony", version, about = "PCA dataset harmonization and cross-dataset segmentation evaluation")]
struct Cli {
    /// Log level filter (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "info")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a PNG dataset, normalize and split it, and write UMX1 matrices.
    Ingest {
        #[arg(long)]
        dir: PathBuf,
        /// Image glob relative to --dir.
        #[arg(long, default_value = "*.png")]
        pattern: String,
        /// Output prefix: writes <prefix>.images.umx, <prefix>.masks.umx and <prefix>.split.csv.
        #[arg(long)]
        out: PathBuf,
        /// Mask path template relative to --dir, `{stem}` is the image stem.
        #[arg(long)]
        masks: Option<String>,
        /// Target size as WxH.
        #[arg(long)]
        resize: Option<String>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Drop records whose mask is empty.
        #[arg(long)]
        require_tumor: bool,
    },
    /// PCA model commands.
    Pca {
        #[command(subcommand)]
        command: PcaCommand,
    },
    /// Score a prediction directory against ground-truth masks.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
    },
    /// Two-tailed t-test between two single-column CSV samples.
    Ttest {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Paired test; the default is Welch's unequal-variance test.
        #[arg(long)]
        paired: bool,
    },
    /// Run the full experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Directory holding a results.csv; only the report stage runs.
        #[arg(long)]
        results_from: Option<PathBuf>,
        #[arg(long)]
        stage: Option<Stage>,
        /// Reports directory (defaults to <work_dir>/reports).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ground-truth-copying trainer used for dry runs.
    #[command(hide = true)]
    StubTrainer { manifest: PathBuf },
}

#[derive(Subcommand)]
enum PcaCommand {
    /// Fit a model on a UMX1 matrix.
    Fit {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct the training samples from k components.
    Reconstruct {
        #[arg(long)]
        model: PathBuf,
        /// `auto` (Kaiser-Guttman), `variance:<f>`, `kaiser:<t>` or a count.
        #[arg(long, default_value = "auto")]
        k: SelectionPolicy,
        /// A `.umx` file or a directory for PNGs.
        #[arg(long)]
        out: PathBuf,
        /// Image size WxH, required for PNG output.
        #[arg(long)]
        shape: Option<String>,
    },
    /// Export eigenvalues and cumulative explained variance.
    Scree {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn ingest(
    dir: &Path,
    pattern: String,
    out: &Path,
    masks: Option<String>,
    resize: Option<String>,
    seed: u64,
    require_tumor: bool,
) -> Result<()> {
    let has_masks = masks.is_some();
    let opts = LoadOptions {
        resize: resize.as_deref().map(parse_size).transpose()?,
        require_tumor,
    };
    let records = load_dataset(dir, &Layout::new(pattern, masks), &opts)?;
    if records.is_empty() {
        return Err(Error::InvalidArgument(format!("no records under {}", dir.display())));
    }
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::Io {
            path: parent.to_path_buf(),
            source: e,
        })?;
    }
    flatten(&records, Channel::Images)?.write_umx(&with_suffix(out, ".images.umx"), ScalarWidth::F32)?;
    if has_masks {
        flatten(&records, Channel::Masks)?.write_umx(&with_suffix(out, ".masks.umx"), ScalarWidth::F32)?;
    }
    let split = split_dataset(&records, DEFAULT_RATIOS, seed)?;
    split.write(&with_suffix(out, ".split.csv"))?;
    println!(
        "{} records, {} train / {} val / {} test",
        records.len(),
        split.train_ids.len(),
        split.val_ids.len(),
        split.test_ids.len()
    );
    Ok(())
}

fn copy_ids(from: &Path, to: &Path) -> Result<()> {
    let src = ids_path(from);
    let dst = ids_path(to);
    fs::copy(&src, &dst).map_err(|e| Error::Io { path: src, source: e })?;
    Ok(())
}

fn pca(cmd: PcaCommand) -> Result<()> {
    match cmd {
        PcaCommand::Fit { input, out } => {
            let x = DataMatrix::read_umx(&input)?;
            let model = fit_pca(&x)?;
            model.write(&out)?;
            copy_ids(&input, &out)?;
            println!("n = {}, d = {}, k_max = {}", model.n_samples(), model.dim(), model.k_max());
        }
        PcaCommand::Reconstruct { model, k, out, shape } => {
            let m = PcaModel::read(&model)?;
            let sel = select_components(m.eigenvalues(), k)?;
            info!("k = {} ({:.1}% variance)", sel.k, 100.0 * sel.achieved_variance);
            let mut recon = m.reconstruct(sel.k)?.map(|v| v.clamp(0.0, 1.0));
            if let Ok(text) = fs::read_to_string(ids_path(&model)) {
                let ids: Vec<String> = text.lines().map(str::to_owned).collect();
                recon = DataMatrix::new(recon.rows(), recon.cols(), recon.into_data(), ids)?;
            }
            if out.extension().is_some_and(|e| e == "umx") {
                recon.write_umx(&out, ScalarWidth::F32)?;
            } else {
                let shape = shape.ok_or_else(|| {
                    Error::InvalidArgument("--shape WxH is required for PNG output".into())
                })?;
                let (w, h) = parse_size(&shape)?;
                fs::create_dir_all(&out).map_err(|e| Error::Io {
                    path: out.clone(),
                    source: e,
                })?;
                for (id, img) in unflatten_images(&recon, w, h)? {
                    img.save_png(&out.join(format!("{id}.png")))?;
                }
            }
            println!("k = {}, explained variance = {:.4}", sel.k, sel.achieved_variance);
        }
        PcaCommand::Scree { model, out } => {
            let m = PcaModel::read(&model)?;
            fs::write(&out, scree_csv(&scree_export(&m))).map_err(|e| Error::Io {
                path: out.clone(),
                source: e,
            })?;
        }
    }
    Ok(())
}

fn evaluate(pred: &Path, gt: &Path, out: &Path, threshold: f64) -> Result<()> {
    let mut ids: Vec<String> = fs::read_dir(pred)
        .map_err(|e| Error::Io {
            path: pred.to_path_buf(),
            source: e,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")))
        .filter_map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .collect();
    ids.sort();
    let rows = score_predictions(pred, gt, &ids, threshold)?;
    fs::write(out, per_image_csv(&rows)).map_err(|e| Error::Io {
        path: out.to_path_buf(),
        source: e,
    })?;
    let scores: Vec<_> = rows.iter().map(|(_, s)| *s).collect();
    match pcaharmony::metrics::aggregate(&scores, pcaharmony::metrics::Degenerate::Exclude) {
        Ok(s) => println!(
            "{} images, recall {:.4}, precision {:.4}, dice {:.4}",
            rows.len(),
            s.recall,
            s.precision,
            s.dice
        ),
        Err(_) => println!("{} images, all degenerate", rows.len()),
    }
    Ok(())
}

fn read_sample(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let field = line.split(',').next().unwrap_or("").trim();
        if field.is_empty() || field.starts_with('#') {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) => out.push(v),
            // a header line
            Err(_) if i == 0 => {}
            Err(_) => {
                return Err(Error::InvalidArgument(format!(
                    "{}:{}: not a number: {field}",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest {
            dir,
            pattern,
            out,
            masks,
            resize,
            seed,
            require_tumor,
        } => ingest(&dir, pattern, &out, masks, resize, seed, require_tumor),
        Command::Pca { command } => pca(command),
        Command::Evaluate { pred, gt, out, threshold } => evaluate(&pred, &gt, &out, threshold),
        Command::Ttest { a, b, paired } => {
            let (a, b) = (read_sample(&a)?, read_sample(&b)?);
            let r = if paired { paired_t_test(&a, &b)? } else { welch_t_test(&a, &b)? };
            println!("t = {:.6}", r.t);
            println!("df = {:.6}", r.df);
            println!("p = {:.6e}", r.p);
            Ok(())
        }
        Command::Run {
            config,
            results_from,
            stage,
            out,
        } => {
            let cfg = RunConfig::read(&config)?;
            let summary = run_pipeline(
                &cfg,
                &PipelineOptions {
                    stage,
                    results_from,
                    out,
                },
            )?;
            let ran: Vec<&str> = summary.ran.iter().map(|s| s.as_str()).collect();
            println!("stages run: {}", if ran.is_empty() { "none".into() } else { ran.join(", ") });
            println!("reports: {}", summary.reports_dir.display());
            Ok(())
        }
        Command::StubTrainer { manifest } => run_stub_trainer(&manifest),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(&cli.log))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
