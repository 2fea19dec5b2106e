use std::fs;
use std::io::{self, BufReader, BufWriter, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use promptsim::backends::bridge::{serve, serve_tcp};
use promptsim::backends::{DilationBackend, SegmentationRequest, Segmenter};
use promptsim::harness::{generate_phantom, phantom_id, run_experiment, ExperimentConfig, PhantomSpec};
use promptsim::metrics::{report, MetricsReport, DEFAULT_NSD_TOLERANCE_MM};
use promptsim::morph::SimRng;
use promptsim::prompts::{build_prompt_set, select_slices, PromptConfig};
use promptsim::volume::{read_mask, read_volume, write_mask, write_volume, BinaryMask, SliceAxis, VoxelGrid};
use promptsim::Error;
use serde_json::json;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_SESSIONS_FAILED: u8 = 3;

#[derive(Parser)]
#[command(name = "promptsim", version, about = "Simulate prompt-driven 3D segmentation sessions and score them")]
struct Cli {
    /// Log more (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Ndjson,
    Csv,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Model {
    /// Previous mask plus balls around positive prompts minus balls around negative ones.
    Dilation,
    /// Returns the previous mask (empty at the first call).
    Echo,
    /// Always returns the mask given with --mask.
    Fixed,
}

#[derive(Subcommand)]
enum Command {
    /// Write a phantom dataset (images/, labels/, splits.json).
    Phantom {
        #[arg(long)]
        out: PathBuf,
        /// Phantom spec as JSON; defaults to the 20-subject 64³ suite.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "ndjson")]
        format: Format,
    },
    /// Print the prompts a simulated user issues for a ground truth and prediction.
    Prompts {
        #[arg(long)]
        gt: PathBuf,
        /// Current prediction; omit for the first iteration.
        #[arg(long)]
        pred: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        iteration: usize,
        /// Prompt settings as JSON.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "ndjson")]
        format: Format,
        /// Write here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment described by a config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, value_enum, default_value = "ndjson")]
        format: Format,
    },
    /// Score a prediction against a reference mask.
    Metrics {
        reference: PathBuf,
        prediction: PathBuf,
        #[arg(long, default_value_t = DEFAULT_NSD_TOLERANCE_MM)]
        tolerance_mm: f64,
        /// Also score the nonempty reference slices spaced this far apart.
        #[arg(long)]
        slice_frequency: Option<usize>,
        #[arg(long, value_enum, default_value = "transverse")]
        axis: AxisArg,
        #[arg(long, value_enum, default_value = "ndjson")]
        format: Format,
    },
    /// Convert between NIfTI (.nii) and the native format (.vgh/.vgd).
    Convert { input: PathBuf, output: PathBuf },
    /// Serve a simple model over the bridge protocol.
    Serve {
        /// Speak the protocol on standard input and output.
        #[arg(long, conflicts_with = "listen")]
        stdio: bool,
        /// Accept TCP connections on this address.
        #[arg(long)]
        listen: Option<String>,
        #[arg(long, value_enum, default_value = "dilation")]
        model: Model,
        #[arg(long, default_value_t = 2.0)]
        radius_mm: f64,
        /// Mask returned by the fixed model.
        #[arg(long, required_if_eq("model", "fixed"))]
        mask: Option<PathBuf>,
        /// Exit after this many TCP connections.
        #[arg(long)]
        connections: Option<usize>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AxisArg {
    Transverse,
    Longitudinal,
}

impl From<AxisArg> for SliceAxis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::Transverse => SliceAxis::Transverse,
            AxisArg::Longitudinal => SliceAxis::Longitudinal,
        }
    }
}

/// Failure of a subcommand, mapped to an exit status.
enum Failure {
    Usage(String),
    Data(Error),
    SessionsFailed(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Data(Error::Stream(e))
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Data(Error::Config(format!("{}: {e}", path.display()))))?;
    serde_json::from_str(&text).map_err(|e| Failure::Data(Error::Config(format!("{}: {e}", path.display()))))
}

fn write_json_line(out: &mut impl Write, value: &impl serde::Serialize) -> io::Result<()> {
    writeln!(out, "{}", serde_json::to_string(value).expect("serializable"))
}

fn metrics_csv(m: &MetricsReport) -> String {
    let mut s = String::from("scope,dice,nsd,asd_mm,hd95_mm\n");
    s.push_str(&format!("whole,{},{},{},{}\n", m.dice, m.nsd, m.asd_mm, m.hd95_mm));
    if let Some(a) = &m.annotated_slices_only {
        s.push_str(&format!("annotated,{},{},{},{}\n", a.dice, a.nsd, a.asd_mm, a.hd95_mm));
    }
    s
}

fn cmd_phantom(out: &Path, config: Option<&Path>, seed: Option<u64>, format: Format) -> Result<(), Failure> {
    let mut spec: PhantomSpec = match config {
        Some(p) => read_json(p)?,
        None => PhantomSpec::default(),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    spec.validate()?;
    for sub in ["images", "labels"] {
        let d = out.join(sub);
        fs::create_dir_all(&d).map_err(|e| Error::Config(format!("{}: {e}", d.display())))?;
    }
    let mut stdout = BufWriter::new(io::stdout().lock());
    if let Format::Csv = format {
        writeln!(stdout, "id,split,voxels,occupancy")?;
    }
    let mut splits = serde_json::Map::new();
    for split in ["train", "val", "test"] {
        let range = spec.splits.indices(split).expect("known split");
        let mut ids = Vec::new();
        for index in range {
            let p = generate_phantom(&spec, index)?;
            let id = phantom_id(index);
            write_volume(&p.image, out.join("images").join(format!("{id}.nii")))?;
            write_mask(&p.gt, out.join("labels").join(format!("{id}.nii")))?;
            let voxels = p.gt.count();
            let occupancy = voxels as f64 / p.gt.geometry().len() as f64;
            match format {
                Format::Ndjson => write_json_line(
                    &mut stdout,
                    &json!({"id": id, "split": split, "voxels": voxels, "occupancy": occupancy}),
                )?,
                Format::Csv => writeln!(stdout, "{id},{split},{voxels},{occupancy}")?,
            }
            ids.push(serde_json::Value::from(id));
        }
        splits.insert(split.to_string(), ids.into());
    }
    let manifest = json!({"spec": spec, "splits": splits});
    let path = out.join("splits.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest).expect("serializable") + "\n")
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    stdout.flush()?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_prompts(
    gt: &Path,
    pred: Option<&Path>,
    iteration: usize,
    config: Option<&Path>,
    seed: u64,
    format: Format,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let cfg: PromptConfig = match config {
        Some(p) => read_json(p)?,
        None => PromptConfig::default(),
    };
    cfg.validate()?;
    let gt = read_mask(gt)?;
    let pred = pred.map(read_mask).transpose()?;
    if iteration > 0 && pred.is_none() {
        return Err(Failure::Usage("--pred is required when --iteration > 0".into()));
    }
    let set = build_prompt_set(&gt, pred.as_ref(), &cfg, iteration, &mut SimRng::new(seed))?;
    let text = match format {
        Format::Ndjson => set.to_ndjson(),
        Format::Csv => set.to_csv(),
    };
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn cmd_simulate(
    config: &Path,
    seed: Option<u64>,
    out: Option<PathBuf>,
    workers: Option<usize>,
    format: Format,
) -> Result<(), Failure> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(o) = out {
        cfg.output = o;
    }
    if let Some(w) = workers {
        cfg.workers = w;
    }
    let rep = run_experiment(&cfg)?;
    let s = &rep.summary;
    let mut stdout = io::stdout().lock();
    match format {
        Format::Ndjson => write_json_line(
            &mut stdout,
            &json!({
                "output": rep.output,
                "sessions": s.sessions,
                "failed": s.failed,
                "dice_mean": s.dice,
                "nsd_mean": s.nsd,
                "asd_mean": s.asd,
                "hd95_mean": s.hd95,
                "success_rate": s.success_rate,
            }),
        )?,
        Format::Csv => stdout.write_all(promptsim::harness::aggregate::summary_csv(s).as_bytes())?,
    }
    if rep.failures() > 0 {
        return Err(Failure::SessionsFailed(rep.failures()));
    }
    Ok(())
}

fn cmd_metrics(
    reference: &Path,
    prediction: &Path,
    tolerance_mm: f64,
    slice_frequency: Option<usize>,
    axis: SliceAxis,
    format: Format,
) -> Result<(), Failure> {
    let a = read_mask(reference)?;
    let b = read_mask(prediction)?;
    let slices = match slice_frequency {
        Some(f) => Some(select_slices(&a, axis, f)?),
        None => None,
    };
    let m = report(&a, &b, slices.as_deref().map(|s| (axis, s)), tolerance_mm)?;
    let mut stdout = io::stdout().lock();
    match format {
        Format::Ndjson => write_json_line(&mut stdout, &m)?,
        Format::Csv => stdout.write_all(metrics_csv(&m).as_bytes())?,
    }
    Ok(())
}

struct Echo;

impl Segmenter for Echo {
    fn segment(&mut self, req: &SegmentationRequest<'_>) -> promptsim::Result<BinaryMask> {
        Ok(req.previous_mask.cloned().unwrap_or_else(|| BinaryMask::empty(*req.geometry())))
    }
}

struct Fixed(BinaryMask);

impl Segmenter for Fixed {
    fn segment(&mut self, _: &SegmentationRequest<'_>) -> promptsim::Result<BinaryMask> {
        Ok(self.0.clone())
    }
}

fn cmd_serve(
    stdio: bool,
    listen: Option<&str>,
    model: Model,
    radius_mm: f64,
    mask: Option<&Path>,
    connections: Option<usize>,
) -> Result<(), Failure> {
    let fixed = mask.map(read_mask).transpose()?;
    let factory = |_: &str, _: &VoxelGrid| -> promptsim::Result<Box<dyn Segmenter>> {
        Ok(match model {
            Model::Dilation => Box::new(DilationBackend::new(radius_mm)),
            Model::Echo => Box::new(Echo),
            Model::Fixed => Box::new(Fixed(fixed.clone().expect("clap requires --mask"))),
        })
    };
    let result = match (stdio, listen) {
        (true, _) => serve(BufReader::new(io::stdin().lock()), BufWriter::new(io::stdout().lock()), factory),
        (false, Some(addr)) => {
            let listener = TcpListener::bind(addr).map_err(|e| Error::Config(format!("bind {addr}: {e}")))?;
            eprintln!("listening on {}", listener.local_addr()?);
            serve_tcp(listener, factory, connections)
        }
        (false, None) => return Err(Failure::Usage("serve needs --stdio or --listen ADDR".into())),
    };
    result.map_err(|e| Failure::Data(e.into()))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Phantom {
            out,
            config,
            seed,
            format,
        } => cmd_phantom(&out, config.as_deref(), seed, format),
        Command::Prompts {
            gt,
            pred,
            iteration,
            config,
            seed,
            format,
            out,
        } => cmd_prompts(&gt, pred.as_deref(), iteration, config.as_deref(), seed, format, out.as_deref()),
        Command::Simulate {
            config,
            seed,
            out,
            workers,
            format,
        } => cmd_simulate(&config, seed, out, workers, format),
        Command::Metrics {
            reference,
            prediction,
            tolerance_mm,
            slice_frequency,
            axis,
            format,
        } => cmd_metrics(&reference, &prediction, tolerance_mm, slice_frequency, axis.into(), format),
        Command::Convert { input, output } => {
            let grid = read_volume(&input)?;
            write_volume(&grid, &output)?;
            Ok(())
        }
        Command::Serve {
            stdio,
            listen,
            model,
            radius_mm,
            mask,
            connections,
        } => cmd_serve(stdio, listen.as_deref(), model, radius_mm, mask.as_deref(), connections),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_DATA)
        }
        Err(Failure::SessionsFailed(n)) => {
            eprintln!("error: {n} session(s) failed; see sessions.ndjson");
            ExitCode::from(EXIT_SESSIONS_FAILED)
        }
    }
}
