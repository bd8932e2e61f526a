use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

use trackpatch::io::{self, RunConfig};
use trackpatch::pipeline::{self, SweepParam};

#[derive(Parser, Debug)]
#[command(
    name = "trackpatch",
    version,
    about = "Patch-style identity attacks on a two-stage IoU tracker"
)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created if absent.
    #[arg(long, global = true, env = "TRACKPATCH_OUT", default_value = "out")]
    out: PathBuf,
    /// Reseeds the scenario, attack and optimiser.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
enum Cmd {
    /// Write scenario ground truth and clean detections (gt.txt, det.txt).
    Gen,
    /// Track a detection file and write the tracks.
    Track {
        /// Detections; defaults to the clean detections of the configured sequence.
        #[arg(long)]
        detections: Option<PathBuf>,
        /// Sequence length; defaults to the configured ground truth, then the last frame.
        #[arg(long)]
        frames: Option<u32>,
        /// Output file name inside the output directory.
        #[arg(long, default_value = "tracks.txt")]
        name: String,
    },
    /// Apply the configured attack (det_attacked.txt, ledger.csv).
    Attack {
        #[arg(long)]
        detections: Option<PathBuf>,
        #[arg(long)]
        gt: Option<PathBuf>,
    },
    /// Optimise a patch (patch.ppm, trace.csv).
    Optimize,
    /// Score a clean and an attacked run (report.csv).
    Eval {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        clean: PathBuf,
        #[arg(long)]
        attacked: PathBuf,
        #[arg(long)]
        ledger: PathBuf,
        #[arg(long, default_value = "run")]
        label: String,
    },
    /// Sweep one parameter (report.csv, <param>.svg, points/).
    Sweep {
        /// kappa_iou, score_drop, false_score, r_bbox, eot_rotation, eot_brightness,
        /// eot_blur or eot_scale.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
}

/// What a run was asked to do, written next to its outputs.
#[derive(Serialize)]
struct RunManifest<'a> {
    config: Option<&'a Path>,
    out: &'a Path,
    seed: Option<u64>,
    command: &'a Cmd,
    outputs: Vec<String>,
}

/// Collects outputs and writes them only if none would clobber an existing file.
struct Outputs<'a> {
    dir: &'a Path,
    force: bool,
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl<'a> Outputs<'a> {
    fn new(dir: &'a Path, force: bool) -> Self {
        Self {
            dir,
            force,
            files: Vec::new(),
        }
    }

    fn add(&mut self, name: impl AsRef<Path>, data: impl Into<Vec<u8>>) {
        self.files.push((self.dir.join(name), data.into()));
    }

    fn commit(mut self, cli: &Cli, manifest_name: &str) -> Result<()> {
        let manifest = RunManifest {
            config: cli.config.as_deref(),
            out: &cli.out,
            seed: cli.seed,
            command: &cli.cmd,
            outputs: self.files.iter().map(|(p, _)| p.display().to_string()).collect(),
        };
        let json = serde_json::to_string_pretty(&manifest)? + "\n";
        self.add(manifest_name, json);
        if !self.force {
            if let Some((p, _)) = self.files.iter().find(|(p, _)| p.exists()) {
                bail!("refusing to overwrite {} (pass --force)", p.display());
            }
        }
        for (p, data) in &self.files {
            io::write_file(p, data)?;
        }
        Ok(())
    }
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let cfg = match &cli.config {
        Some(p) => io::load_config(p).with_context(|| format!("loading {}", p.display()))?,
        None => RunConfig::default(),
    };
    Ok(match cli.seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    })
}

fn read_mot(path: &Path) -> Result<Vec<io::MotRecord>> {
    let text = io::read_text(path)?;
    io::parse_mot(&text).with_context(|| format!("parsing {}", path.display()))
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load(cli)?;
    let mut out = Outputs::new(&cli.out, cli.force);
    match &cli.cmd {
        Cmd::Gen => {
            if cfg.scenario.is_none() {
                bail!("gen needs a config with a `scenario` section");
            }
            let seq = pipeline::load_sequence(&cfg)?;
            out.add("gt.txt", io::write_mot(&io::gt_records(&seq.gt)));
            out.add("det.txt", io::write_mot(&io::detection_records(&seq.detections)));
            out.commit(cli, "gen.manifest.json")
        }
        Cmd::Track {
            detections,
            frames,
            name,
        } => {
            let gt = pipeline::load_ground_truth(&cfg)?;
            let dets = match detections {
                Some(p) => io::detections_from_records(&read_mot(p)?),
                None => pipeline::load_sequence(&cfg)?.detections,
            };
            let n = frames
                .or(gt.map(|g| g.n_frames))
                .unwrap_or_else(|| dets.iter().map(|d| d.frame).max().unwrap_or(0));
            let result = pipeline::track(&dets, n, &cfg.tracker)?;
            out.add(name, io::write_mot(&io::track_records(&result)));
            out.commit(cli, &format!("{name}.manifest.json"))
        }
        Cmd::Attack { detections, gt } => {
            let gt = match gt {
                Some(p) => io::ground_truth_from_records(&read_mot(p)?, None)?,
                None => pipeline::load_ground_truth(&cfg)?.context("attack needs --gt or a configured sequence")?,
            };
            let dets = match detections {
                Some(p) => io::detections_from_records(&read_mot(p)?),
                None => pipeline::load_sequence(&cfg)?.detections,
            };
            let (dets, ledger) = trackpatch::attack::inject(&dets, &gt, &cfg.attack)?;
            out.add("det_attacked.txt", io::write_mot(&io::detection_records(&dets)));
            out.add("ledger.csv", io::write_ledger(&ledger));
            out.commit(cli, "attack.manifest.json")
        }
        Cmd::Optimize => {
            let (patch, trace) = pipeline::optimize(&cfg)?;
            out.add("patch.ppm", io::save_patch(&patch));
            out.add("trace.csv", io::write_trace(&trace));
            out.commit(cli, "optimize.manifest.json")
        }
        Cmd::Eval {
            gt,
            clean,
            attacked,
            ledger,
            label,
        } => {
            let gt = io::ground_truth_from_records(&read_mot(gt)?, None)?;
            let clean = io::tracking_result_from_records(&read_mot(clean)?, gt.n_frames)?;
            let attacked = io::tracking_result_from_records(&read_mot(attacked)?, gt.n_frames)?;
            let ledger = io::parse_ledger(&io::read_text(ledger)?, gt.boxes.len() as u64, cfg.attack.run_length)?;
            let report = pipeline::score_runs(label, &gt, &clean, &attacked, &ledger, &cfg)?;
            out.add("report.csv", io::write_reports(&[report]));
            out.commit(cli, "eval.manifest.json")
        }
        Cmd::Sweep { param, values } => {
            let param: SweepParam = param.parse()?;
            let seq = pipeline::load_sequence(&cfg)?;
            let points = pipeline::sweep(&seq, &cfg, param, values)?;
            let reports: Vec<_> = points.iter().map(|p| p.run.report.clone()).collect();
            out.add("report.csv", io::write_reports(&reports));
            out.add(format!("{}.svg", param.name()), pipeline::sweep_plot(param, &points));
            for (i, p) in points.iter().enumerate() {
                let dir = PathBuf::from("points").join(format!("{i:03}"));
                out.add(
                    dir.join("det_attacked.txt"),
                    io::write_mot(&io::detection_records(&p.run.detections)),
                );
                out.add(dir.join("ledger.csv"), io::write_ledger(&p.run.ledger));
                out.add(dir.join("tracks.txt"), io::write_mot(&io::track_records(&p.run.tracks)));
            }
            out.commit(cli, "sweep.manifest.json")
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
