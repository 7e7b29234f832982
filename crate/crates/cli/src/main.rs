use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use viskp_cli::commands::{cmd_accuracy, cmd_importance, cmd_label, cmd_sample_keypoints, cmd_sym_subset};
use viskp_cli::dataset::KeypointFile;
use viskp_cli::evaluate::{cmd_evaluate, summary_text, EvaluateOptions};
use viskp_cli::simulate::{cmd_simulate, SimulateConfig, TargetShape};
use viskp_cli::{CliError, CliResult, RunConfig};

#[derive(Parser)]
#[command(name = "viskp", version, about = "Visibility-aware keypoint labeling, selection and pose evaluation")]
struct Cli {
    #[command(flatten)]
    run: RunFlags,
    #[command(subcommand)]
    command: Command,
}

/// Shared settings; a `--config` file is applied first, flags override it.
#[derive(Args)]
struct RunFlags {
    /// `key = value` file with any of the settings below
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Number of keypoints N
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Nearest neighbours per keypoint
    #[arg(long, global = true)]
    k: Option<usize>,
    /// PageRank damping
    #[arg(long, global = true)]
    c: Option<f64>,
    #[arg(long, global = true)]
    n_select: Option<usize>,
    #[arg(long, global = true)]
    fallback_threshold: Option<f64>,
    #[arg(long, global = true)]
    sigma_visible: Option<f64>,
    #[arg(long, global = true)]
    sigma_invisible: Option<f64>,
    #[arg(long, global = true)]
    outlier_rate: Option<f64>,
    #[arg(long, global = true)]
    outlier_radius: Option<f64>,
    #[arg(long, global = true)]
    ransac_iters: Option<usize>,
    /// Pixels
    #[arg(long, global = true)]
    reproj_thresh: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// AUC upper threshold, meters
    #[arg(long, global = true)]
    auc_max: Option<f64>,
}

impl RunFlags {
    fn resolve(&self) -> CliResult<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(p) = &self.config {
            cfg.apply_file(p)?;
        }
        let flags: [(&str, Option<String>); 14] = [
            ("n", self.n.map(|v| v.to_string())),
            ("k", self.k.map(|v| v.to_string())),
            ("c", self.c.map(|v| v.to_string())),
            ("n-select", self.n_select.map(|v| v.to_string())),
            ("fallback-threshold", self.fallback_threshold.map(|v| v.to_string())),
            ("sigma-visible", self.sigma_visible.map(|v| v.to_string())),
            ("sigma-invisible", self.sigma_invisible.map(|v| v.to_string())),
            ("outlier-rate", self.outlier_rate.map(|v| v.to_string())),
            ("outlier-radius", self.outlier_radius.map(|v| v.to_string())),
            ("ransac-iters", self.ransac_iters.map(|v| v.to_string())),
            ("reproj-thresh", self.reproj_thresh.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("jobs", self.jobs.map(|v| v.to_string())),
            ("auc-max", self.auc_max.map(|v| v.to_string())),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Farthest point sampling of N keypoints on a mesh
    SampleKeypoints {
        #[arg(long)]
        mesh: PathBuf,
        /// Factor applied to mesh coordinates (e.g. 0.001 for millimeters)
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Visibility labels from pose annotations and masks
    Label {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        keypoints: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        /// Symmetry spec (own format or a BOP models_info entry)
        #[arg(long)]
        symmetry: Option<PathBuf>,
        #[arg(long)]
        obj_id: Option<u32>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Keypoint importance from visibility labels
    Importance {
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        keypoints: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a synthetic occluded dataset
    Simulate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        scenes: usize,
        /// torus, sphere, cylinder or a mesh path
        #[arg(long, default_value = "torus")]
        target: TargetShape,
        #[arg(long, default_value_t = 2)]
        occluders: usize,
        #[arg(long, default_value_t = 0.3)]
        coverage_min: f64,
        #[arg(long, default_value_t = 0.6)]
        coverage_max: f64,
        /// Record the target's symmetries in models.json
        #[arg(long)]
        with_symmetry: bool,
        #[arg(long)]
        no_depth: bool,
    },
    /// End-to-end pose evaluation over a dataset
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        keypoints: Option<PathBuf>,
        /// Also evaluate all keypoints and a random subset
        #[arg(long)]
        baselines: bool,
        #[arg(long)]
        obj_id: Option<u32>,
    },
    /// Keypoint subset used for discrete symmetry canonicalization
    SymSubset {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        keypoints: PathBuf,
        #[arg(long, default_value_t = 4)]
        level: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label accuracy against ray casting
    Accuracy {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        keypoints: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = cli.run.resolve()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build().map_err(|e| CliError::Usage(format!("--jobs: {e}")))?;
    pool.install(|| match cli.command {
        Command::SampleKeypoints { mesh, scale, out } => {
            let f = cmd_sample_keypoints(&mesh, scale, cfg.n, &out)?;
            println!("wrote {} keypoints to {}", f.keypoints.len(), out.display());
            Ok(())
        }
        Command::Label { mesh, keypoints, annotations, symmetry, obj_id, out } => {
            let f = cmd_label(&mesh, &keypoints, &annotations, symmetry.as_deref(), obj_id, &out)?;
            let failed = f.images.iter().filter(|i| i.error.is_some()).count();
            println!("labeled {} images ({failed} with errors) into {}", f.images.len(), out.display());
            Ok(())
        }
        Command::Importance { labels, keypoints, out } => {
            let f = cmd_importance(&labels, &keypoints, cfg.k, cfg.c, &out)?;
            let fallback = f.images.iter().filter(|i| i.fallback).count();
            println!("importance for {} images ({fallback} without visible keypoints) in {}", f.images.len(), out.display());
            Ok(())
        }
        Command::Simulate { out, scenes, target, occluders, coverage_min, coverage_max, with_symmetry, no_depth } => {
            let sim = SimulateConfig {
                scenes,
                seed: cfg.seed,
                target,
                occluders,
                coverage: (coverage_min, coverage_max),
                with_symmetry,
                write_depth: !no_depth,
                ..SimulateConfig::default()
            };
            let f = cmd_simulate(&sim, &out)?;
            println!("wrote {} scenes to {}", f.images.len(), out.display());
            Ok(())
        }
        Command::Evaluate { dataset, out, keypoints, baselines, obj_id } => {
            let report = cmd_evaluate(&dataset, &out, &cfg, &EvaluateOptions { keypoints, baselines, obj_id })?;
            print!("{}", summary_text(&report));
            Ok(())
        }
        Command::SymSubset { mesh, keypoints, level, out } => {
            let f = cmd_sym_subset(&mesh, &keypoints, level, &out)?;
            println!("P_sym has {} keypoints; written to {}", f.indices.len(), out.display());
            Ok(())
        }
        Command::Accuracy { dataset, keypoints, out } => {
            let kps = keypoints.map(|p| KeypointFile::load(&p)).transpose()?.map(|f| f.keypoints);
            let r = cmd_accuracy(&dataset, kps.as_ref(), cfg.n, out.as_deref())?;
            match r.mean_accuracy {
                Some(a) => println!("mean label accuracy {a:.4} over {} images", r.images.len()),
                None => println!("no image could be evaluated"),
            }
            Ok(())
        }
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("viskp: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
