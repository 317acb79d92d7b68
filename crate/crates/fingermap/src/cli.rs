//! Command-line front end. Parameter flags mirror the `MappingParams`
//! field names; nested ones are flattened (`--beta`, `--thumb-press-dist`).

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use fingermap_core::mapping::FilterStage;
use fingermap_core::metrics::Aabb;
use fingermap_core::task_lab::{
    generate_layout, make_task_sequence, synth_reach, HandModel, LayoutConfig, SuiteConfig, SynthTraceSpec,
};
use fingermap_core::{BodyCalibration, MappingParams, Side, Technique};
use serde::de::DeserializeOwned;

use crate::commands::{compare, comparison_table, compute_metrics, map_trace, synth_suite_trace, MetricsOptions};
use crate::service::{self, ServerConfig};
use crate::trace_io::{
    encode, read_layout, read_tasks, read_trace_file, write_layout, write_results, write_tasks, write_trace_file,
    Trace, TraceHeader,
};

#[derive(Debug, Parser)]
#[command(
    name = "fingermap",
    version,
    about = "Finger-to-arm retargeting: replay, metrics, generators and a live session server"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Replay a hand trace through the mapping pipeline.
    Map(MapArgs),
    /// Per-task path ratios, interaction volume and confinement counts.
    Metrics(MetricsArgs),
    /// Generate a target layout and a balanced task sequence.
    Layout(LayoutArgs),
    /// Generate a synthetic hand trace.
    Synth(SynthArgs),
    /// Run the session endpoint.
    Serve(ServeArgs),
    /// Map and measure several techniques on the same tasks.
    Compare(CompareArgs),
}

fn parse_technique(s: &str) -> Result<Technique, String> {
    Technique::from_name(s).ok_or_else(|| {
        let names: Vec<_> = Technique::ALL.iter().map(|t| t.name()).collect();
        format!("unknown technique `{s}` (expected one of {})", names.join(", "))
    })
}

fn parse_filter_stage(s: &str) -> Result<FilterStage, String> {
    FilterStage::from_name(s).ok_or_else(|| format!("unknown filter stage `{s}` (pre_map, post_map, off)"))
}

fn parse_side(s: &str) -> Result<Side, String> {
    Side::from_name(s).ok_or_else(|| format!("unknown side `{s}` (left, right)"))
}

#[derive(Debug, Clone, Default, Args)]
pub struct ParamArgs {
    /// JSON file with (a subset of) the mapping parameters.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long, value_parser = parse_technique)]
    pub technique: Option<Technique>,
    #[arg(long)]
    pub r_min: Option<f64>,
    #[arg(long)]
    pub dead_zone: Option<f64>,
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long)]
    pub arm_length: Option<f64>,
    #[arg(long)]
    pub min_reach: Option<f64>,
    #[arg(long)]
    pub min_cutoff: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub d_cutoff: Option<f64>,
    #[arg(long, value_parser = parse_filter_stage)]
    pub filter_stage: Option<FilterStage>,
    #[arg(long)]
    pub ray_max_length: Option<f64>,
    #[arg(long)]
    pub thumb_press_dist: Option<f64>,
    #[arg(long)]
    pub thumb_release_dist: Option<f64>,
    #[arg(long)]
    pub grab_press_dist: Option<f64>,
    #[arg(long)]
    pub grab_release_dist: Option<f64>,
    /// Smallest and largest interior elbow angle, degrees.
    #[arg(long, num_args = 2, value_names = ["MIN", "MAX"])]
    pub elbow_angle_range: Option<Vec<f64>>,
}

impl ParamArgs {
    /// `base`, then the params file as a merge patch, then single flags.
    pub fn apply(&self, base: MappingParams) -> Result<MappingParams> {
        let mut p = match &self.params {
            Some(path) => {
                let mut v = serde_json::to_value(base)?;
                let patch: serde_json::Value = read_json(path)?;
                json_patch::merge(&mut v, &patch);
                serde_json::from_value(v).with_context(|| format!("invalid parameters in {}", path.display()))?
            }
            None => base,
        };
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$flag { p.$($field).+ = v; })*
            };
        }
        set!(
            technique => technique,
            r_min => r_min,
            dead_zone => dead_zone,
            k => k,
            min_reach => min_reach,
            min_cutoff => euro.min_cutoff,
            beta => euro.beta,
            d_cutoff => euro.d_cutoff,
            filter_stage => filter_stage,
            ray_max_length => ray_max_length,
            thumb_press_dist => triggers.thumb_press_dist,
            thumb_release_dist => triggers.thumb_release_dist,
            grab_press_dist => triggers.grab_press_dist,
            grab_release_dist => triggers.grab_release_dist,
        );
        if let Some(a) = self.arm_length {
            p.arm_length = Some(a);
        }
        if let Some(r) = &self.elbow_angle_range {
            p.elbow_angle_range = (r[0], r[1]);
        }
        p.validate().context("invalid mapping parameters")?;
        Ok(p)
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    serde_json::from_reader(BufReader::new(f)).with_context(|| format!("cannot parse {}", path.display()))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("cannot open {}", path.display()))?,
    ))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

fn load_calibration(path: Option<&Path>, fallback: BodyCalibration) -> Result<BodyCalibration> {
    let c = match path {
        Some(p) => read_json(p)?,
        None => fallback,
    };
    c.validate().context("invalid calibration")?;
    Ok(c)
}

#[derive(Debug, Args)]
pub struct MapArgs {
    /// Input hand trace (.fmtrace).
    pub input: PathBuf,
    /// Output mapped trace (.fmtrace).
    #[arg(short, long)]
    pub output: PathBuf,
    /// Calibration JSON; defaults to the one in the trace header.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    /// Layout whose targets the ray pointer can hit.
    #[arg(long)]
    pub layout: Option<PathBuf>,
    #[command(flatten)]
    pub params: ParamArgs,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Mapped trace (.fmtrace) written by `map`.
    pub trace: PathBuf,
    #[arg(long)]
    pub layout: PathBuf,
    #[arg(long)]
    pub tasks: PathBuf,
    /// JSON `{"min": [x, y, z], "max": [x, y, z]}` of the physical confinement box.
    #[arg(long)]
    pub confinement: Option<PathBuf>,
    #[arg(long, default_value = "right", value_parser = parse_side)]
    pub side: Side,
    /// Drop tasks more than 3 SD from the mean before summarizing.
    #[arg(long)]
    pub drop_outliers: bool,
    /// Results file; `.csv` or `.json`. Repeatable.
    #[arg(short, long)]
    pub out: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LayoutArgs {
    /// User arm span A, meters.
    #[arg(long, default_value_t = 1.7)]
    pub arm_span: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of tasks; must be divisible by 3.
    #[arg(long = "tasks", default_value_t = 30)]
    pub n_tasks: usize,
    #[arg(long, default_value_t = 0.03)]
    pub target_radius: f64,
    #[arg(long)]
    pub swap_layer_spreads: bool,
    #[arg(long)]
    pub transpose_grid: bool,
    #[arg(long)]
    pub out_layout: PathBuf,
    #[arg(long)]
    pub out_tasks: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// JSON trace spec (`{"kind": "reach", ...}` or `{"kind": "keyframes", ...}`).
    #[arg(long, conflicts_with_all = ["layout", "tasks"])]
    pub spec: Option<PathBuf>,
    /// Scripted task suite: layout file.
    #[arg(long, requires = "tasks")]
    pub layout: Option<PathBuf>,
    /// Scripted task suite: task file.
    #[arg(long, requires = "layout")]
    pub tasks: Option<PathBuf>,
    /// Operator timing for the task suite (SuiteConfig JSON).
    #[arg(long)]
    pub suite: Option<PathBuf>,
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    #[arg(short, long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub params: ParamArgs,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 7878)]
    pub port: u16,
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    #[arg(long)]
    pub layout: Option<PathBuf>,
    #[command(flatten)]
    pub params: ParamArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub layout: PathBuf,
    #[arg(long)]
    pub tasks: PathBuf,
    /// Techniques to compare.
    #[arg(long, value_delimiter = ',', value_parser = parse_technique,
          default_value = "attach,direct,hand_passthrough,ray_cast")]
    pub techniques: Vec<Technique>,
    /// Recorded physical trace for a technique, `technique=path`. Techniques
    /// without one are performed by the scripted operator.
    #[arg(long = "trace", value_parser = parse_recorded)]
    pub traces: Vec<(Technique, PathBuf)>,
    #[arg(long)]
    pub suite: Option<PathBuf>,
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    #[arg(long)]
    pub confinement: Option<PathBuf>,
    #[arg(long)]
    pub drop_outliers: bool,
    /// Write all results as one JSON array.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub params: ParamArgs,
}

fn parse_recorded(s: &str) -> Result<(Technique, PathBuf), String> {
    let (t, p) = s.split_once('=').ok_or("expected technique=path")?;
    Ok((parse_technique(t)?, PathBuf::from(p)))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Map(a) => run_map(a),
        Command::Metrics(a) => run_metrics(a),
        Command::Layout(a) => run_layout(a),
        Command::Synth(a) => run_synth(a),
        Command::Serve(a) => run_serve(a),
        Command::Compare(a) => run_compare(a),
    }
}

fn run_map(a: MapArgs) -> Result<()> {
    let input = read_trace_file(&a.input).with_context(|| format!("cannot read {}", a.input.display()))?;
    let base = MappingParams {
        technique: input.header.technique,
        ..input.header.params
    };
    let params = a.params.apply(base)?;
    let calibration = load_calibration(a.calibration.as_deref(), input.header.calibration)?;
    let targets = match &a.layout {
        Some(p) => read_layout(open(p)?)?.targets,
        None => Vec::new(),
    };
    let (out, report) = map_trace(&input, calibration, params, targets)?;
    write_trace_file(&a.output, &out).with_context(|| format!("cannot write {}", a.output.display()))?;
    println!("{}: {report}", params.technique.name());
    Ok(())
}

fn metrics_options(confinement: Option<&Path>, side: Side, drop_outliers: bool) -> Result<MetricsOptions> {
    let confinement = match confinement {
        Some(p) => {
            let b: Aabb = read_json(p)?;
            if !b.is_valid() {
                bail!("confinement box in {} has min > max", p.display());
            }
            Some(b)
        }
        None => None,
    };
    Ok(MetricsOptions {
        side,
        drop_outliers,
        confinement,
        ..MetricsOptions::default()
    })
}

fn run_metrics(a: MetricsArgs) -> Result<()> {
    let trace = read_trace_file(&a.trace).with_context(|| format!("cannot read {}", a.trace.display()))?;
    let layout = read_layout(open(&a.layout)?)?;
    let tasks = read_tasks(open(&a.tasks)?)?;
    let opts = metrics_options(a.confinement.as_deref(), a.side, a.drop_outliers)?;
    let results = compute_metrics(&trace, &layout, &tasks, &opts)?;
    for path in &a.out {
        write_results(path, &results).with_context(|| format!("cannot write {}", path.display()))?;
    }
    let s = &results.summary;
    println!(
        "{}: tasks {}, successful {}, mean time {:.3} s, wrist ratio {:.3}, pointer ratio {:.3}",
        results.technique.name(),
        s.tasks,
        s.successful,
        s.mean_task_time,
        s.mean_physical_ratio,
        s.mean_virtual_ratio
    );
    if let Some(v) = results.interaction_volume {
        println!("interaction volume {:.4} m^3", v.volume);
    }
    if let Some(c) = &results.confinement {
        println!("confinement violations {}", c.count);
    }
    Ok(())
}

fn run_layout(a: LayoutArgs) -> Result<()> {
    let config = LayoutConfig {
        target_radius: a.target_radius,
        swap_layer_spreads: a.swap_layer_spreads,
        transpose_grid: a.transpose_grid,
    };
    let layout = generate_layout(a.arm_span, config)?;
    let tasks = make_task_sequence(&layout, a.n_tasks, a.seed)?;
    write_layout(create(&a.out_layout)?, &layout)?;
    write_tasks(create(&a.out_tasks)?, &tasks, a.seed)?;
    println!("{} targets, {} tasks", layout.targets.len(), tasks.len());
    Ok(())
}

fn run_synth(a: SynthArgs) -> Result<()> {
    let calibration = load_calibration(a.calibration.as_deref(), BodyCalibration::default())?;
    let params = a.params.apply(MappingParams::default())?;
    let trace = match (&a.spec, &a.layout, &a.tasks) {
        (Some(spec), _, _) => {
            let spec: SynthTraceSpec = read_json(spec)?;
            let model = HandModel::for_finger_length(calibration.index_finger_length);
            let frames = synth_reach(&spec, &model)?;
            Trace::from_frames(TraceHeader::new(calibration, params), frames)
        }
        (None, Some(layout), Some(tasks)) => {
            let layout = read_layout(open(layout)?)?;
            let tasks = read_tasks(open(tasks)?)?;
            let suite: SuiteConfig = match &a.suite {
                Some(p) => read_json(p)?,
                None => SuiteConfig::default(),
            };
            synth_suite_trace(&layout, &tasks, calibration, params, &suite)?
        }
        _ => bail!("give either --spec or both --layout and --tasks"),
    };
    write_trace_file(&a.output, &trace)?;
    println!("{} frames", trace.records.len());
    Ok(())
}

fn run_serve(a: ServeArgs) -> Result<()> {
    let params = a.params.apply(MappingParams::default())?;
    let calibration = load_calibration(a.calibration.as_deref(), BodyCalibration::default())?;
    let targets = match &a.layout {
        Some(p) => read_layout(open(p)?)?.targets,
        None => Vec::new(),
    };
    let addr = format!("{}:{}", a.host, a.port);
    let listener = std::net::TcpListener::bind(&addr).with_context(|| format!("cannot bind {addr}"))?;
    println!("listening on {}", listener.local_addr()?);
    io::stdout().flush()?;
    service::serve(
        listener,
        ServerConfig {
            calibration,
            params,
            targets,
        },
    )?;
    Ok(())
}

fn run_compare(a: CompareArgs) -> Result<()> {
    let layout = read_layout(open(&a.layout)?)?;
    let tasks = read_tasks(open(&a.tasks)?)?;
    let calibration = load_calibration(a.calibration.as_deref(), BodyCalibration::default())?;
    let base = a.params.apply(MappingParams::default())?;
    let suite: SuiteConfig = match &a.suite {
        Some(p) => read_json(p)?,
        None => SuiteConfig::default(),
    };
    let recorded = a
        .traces
        .iter()
        .map(|(t, p)| {
            Ok((
                *t,
                read_trace_file(p).with_context(|| format!("cannot read {}", p.display()))?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let opts = metrics_options(a.confinement.as_deref(), suite.side, a.drop_outliers)?;
    let results = compare(
        &layout,
        &tasks,
        &a.techniques,
        &recorded,
        calibration,
        base,
        &suite,
        &opts,
    )?;
    print!("{}", comparison_table(&results));
    if let Some(path) = &a.out {
        let mut w = create(path)?;
        writeln!(w, "{}", encode(&results)?)?;
        w.flush()?;
    }
    Ok(())
}
