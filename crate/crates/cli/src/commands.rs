use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use serde_json::json;
use transient_core::base::{assign_bases, BaseAssignment, BaseOverrides};
use transient_core::ingest::{self, EventBatch, InputFormat, IngestOptions};
use transient_core::pipeline::{self, PipelineOptions};
use transient_core::synth::{self, SynthConfig};
use transient_core::types::{parse_timestamp, NightWindow, ObservationWindow, SECONDS_PER_HOUR};
use transient_core::{oracle, report, CensusBaseline, ModelParams};

use crate::{ModelArgs, OracleArgs, RunArgs, SynthArgs};

pub enum CliError {
    /// Config or I/O failure.
    Fatal(anyhow::Error),
    /// Nothing survived ingest.
    EmptyInput,
    /// Input exceeds the oracle's size guard.
    TooLarge(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Fatal(_) => 1,
            CliError::EmptyInput => 2,
            CliError::TooLarge(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Fatal(e) => write!(f, "{e:#}"),
            CliError::EmptyInput => f.write_str("no events accepted from input"),
            CliError::TooLarge(m) => write!(f, "input too large for oracle: {m}"),
        }
    }
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Fatal(e.into())
    }
}

type CliResult<T> = Result<T, CliError>;

/// Validated settings derived from [`ModelArgs`].
struct ModelSetup {
    format: InputFormat,
    night: NightWindow,
    pingpong_secs: i64,
    cap_secs: Option<i64>,
    window: Option<ObservationWindow>,
    overrides: Option<BaseOverrides>,
}

fn parse_ts_flag(name: &str, value: &Option<String>) -> CliResult<Option<i64>> {
    value
        .as_deref()
        .map(|v| parse_timestamp(v).ok_or_else(|| anyhow!("--{name} `{v}` is not RFC 3339 or epoch seconds").into()))
        .transpose()
}

impl ModelSetup {
    fn from_args(args: &ModelArgs) -> CliResult<Self> {
        let format: InputFormat = args.format.parse()?;
        let night: NightWindow = args.night_window.parse()?;
        if !(args.pingpong_window.is_finite() && args.pingpong_window >= 0.0) {
            return Err(anyhow!("--pingpong-window must be >= 0 minutes").into());
        }
        let pingpong_secs = (args.pingpong_window * 60.0).round() as i64;
        let cap_secs = match args.max_dwell_cap.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "none" => None,
            v => {
                let hours: f64 = v.parse().map_err(|_| anyhow!("--max-dwell-cap `{v}` is not a number of hours"))?;
                if !(hours.is_finite() && hours > 0.0) {
                    return Err(anyhow!("--max-dwell-cap must be > 0").into());
                }
                Some((hours * SECONDS_PER_HOUR as f64).round() as i64)
            }
        };
        let start = parse_ts_flag("window-start", &args.window_start)?;
        let end = parse_ts_flag("window-end", &args.window_end)?;
        let window = match (start, end) {
            (Some(s), Some(e)) => Some(ObservationWindow::new(s, e)?),
            (None, None) => None,
            _ => return Err(anyhow!("--window-start and --window-end must be given together").into()),
        };
        transient_core::geo::check_cell_size(args.cell_size)?;
        let overrides = match &args.bases {
            Some(path) => {
                let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
                Some(BaseOverrides::from_csv(f).with_context(|| format!("reading {}", path.display()))?)
            }
            None => None,
        };
        let setup = Self { format, night, pingpong_secs, cap_secs, window, overrides };
        // Range-check beta and the durations before touching the input.
        setup.params(args, ObservationWindow { start: 0, end: 0 }).validate()?;
        Ok(setup)
    }

    fn params(&self, args: &ModelArgs, window: ObservationWindow) -> ModelParams {
        ModelParams {
            beta: args.beta,
            pingpong_window: self.pingpong_secs,
            max_dwell_cap: self.cap_secs,
            observation_window: window,
        }
    }

    /// Reads every input, parses with continuous line numbering and
    /// canonicalizes locations.
    fn ingest(&self, args: &ModelArgs) -> CliResult<EventBatch> {
        let options = IngestOptions { window: self.window };
        let mut offset = 0;
        let mut batches = Vec::new();
        for path in &args.input {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let b = ingest::parse_events_at(text.as_bytes(), self.format, &options, offset)
                .with_context(|| format!("parsing {}", path.display()))?;
            offset += ingest::line_count(&text);
            batches.push(b);
        }
        let batch = EventBatch::merge(batches);
        Ok(ingest::canonicalize(batch, args.cell_size)?)
    }

    fn window_for(&self, batch: &EventBatch) -> ObservationWindow {
        self.window
            .or_else(|| ObservationWindow::covering(&batch.events))
            .unwrap_or(ObservationWindow { start: 0, end: 0 })
    }

    fn bases(&self, batch: &EventBatch) -> CliResult<BTreeMap<String, BaseAssignment>> {
        Ok(assign_bases(batch, self.night, self.overrides.as_ref())?)
    }
}

fn model_manifest(args: &ModelArgs, setup: &ModelSetup) -> serde_json::Value {
    json!({
        "input": args.input,
        "format": setup.format,
        "beta": args.beta,
        "pingpong_window_minutes": args.pingpong_window,
        "pingpong_window_seconds": setup.pingpong_secs,
        "max_dwell_cap_hours": args.max_dwell_cap,
        "max_dwell_cap_seconds": setup.cap_secs,
        "cell_size": args.cell_size,
        "night_window": setup.night.to_string(),
        "bases": args.bases,
        "window_start": args.window_start,
        "window_end": args.window_end,
    })
}

fn run_manifest(args: &RunArgs, setup: &ModelSetup, window: Option<ObservationWindow>, outputs: &[&str]) -> Vec<u8> {
    let mut config = model_manifest(&args.model, setup);
    let extra = json!({
        "min_unique_visitors": args.min_unique_visitors,
        "absent_threshold": args.absent_threshold,
        "census": args.census,
        "out": args.out,
        "seed": args.seed,
        "threads": std::env::var("TRANSIENT_DYN_THREADS").ok(),
    });
    if let (Some(c), Some(e)) = (config.as_object_mut(), extra.as_object()) {
        c.extend(e.clone());
    }
    let manifest = json!({
        "tool": "transient-dyn",
        "version": env!("CARGO_PKG_VERSION"),
        "generated_at": chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        "config": config,
        "effective_window": window,
        "outputs": outputs,
    });
    pretty(&manifest)
}

fn pretty(v: &impl serde::Serialize) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("serializable value");
    out.push(b'\n');
    out
}

/// Writes every file or none: on the first failure the files already written
/// are removed.
fn write_all(dir: &Path, files: &[(&str, Vec<u8>)]) -> CliResult<()> {
    let created_dir = !dir.exists();
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut written: Vec<PathBuf> = Vec::new();
    for (name, bytes) in files {
        let path = dir.join(name);
        if let Err(e) = fs::write(&path, bytes) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            if created_dir {
                let _ = fs::remove_dir(dir);
            }
            return Err(anyhow!(e).context(format!("writing {}", path.display())).into());
        }
        written.push(path);
    }
    Ok(())
}

fn render<F>(f: F) -> CliResult<Vec<u8>>
where
    F: FnOnce(&mut Vec<u8>) -> transient_core::Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

pub fn run(args: &RunArgs) -> CliResult<()> {
    let setup = ModelSetup::from_args(&args.model)?;
    if !(args.absent_threshold.is_finite() && args.absent_threshold >= 0.0) {
        return Err(anyhow!("--absent-threshold must be >= 0").into());
    }
    if args.min_unique_visitors < 1 {
        return Err(anyhow!("--min-unique-visitors must be >= 1").into());
    }
    let census = match &args.census {
        Some(path) => {
            let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
            let c = CensusBaseline::from_reader(f).with_context(|| format!("reading {}", path.display()))?;
            Some(c)
        }
        None => None,
    };
    let batch = setup.ingest(&args.model)?;

    if batch.is_empty() {
        let rejected = render(|b| batch.write_rejected_csv(b))?;
        let names = ["rejected.csv", "run_manifest.json"];
        let manifest = run_manifest(args, &setup, None, &names);
        write_all(&args.out, &[(names[0], rejected), (names[1], manifest)])?;
        return Err(CliError::EmptyInput);
    }

    let window = setup.window_for(&batch);
    let options = PipelineOptions {
        params: setup.params(&args.model, window),
        cell_size: args.model.cell_size,
        min_unique_visitors: args.min_unique_visitors,
        absent_threshold: args.absent_threshold,
    };
    let bases = setup.bases(&batch)?;
    let out = pipeline::run(&batch, bases, &options, census.as_ref())?;
    let beta = options.params.beta;

    let mut files: Vec<(&str, Vec<u8>)> = vec![
        ("summary.json", pretty(&out.summary)),
        ("profiles.csv", render(|b| report::write_profiles_csv(&out.profiles, b))?),
        ("bases.csv", render(|b| report::write_bases_csv(&out.bases, b))?),
        ("location_stats.csv", render(|b| report::write_location_stats_csv(&out.locations, b))?),
        ("transient_locations.csv", render(|b| report::write_transient_locations_csv(&out.locations, b))?),
        ("category_ranking.csv", render(|b| report::write_category_ranking_csv(&out.categories, b))?),
        ("grid_diff.csv", render(|b| report::write_grid_diff_csv(&out.cell_diff, b))?),
        (
            "transient_locations.geojson",
            pretty(&report::transient_locations_geojson(&out.locations, &out.catalog, beta)),
        ),
        (
            "flagged_cells.geojson",
            pretty(&report::flagged_cells_geojson(&out.cell_diff, options.cell_size, beta)),
        ),
        ("rejected.csv", render(|b| batch.write_rejected_csv(b))?),
    ];
    let mut names: Vec<&str> = files.iter().map(|f| f.0).collect();
    names.push("run_manifest.json");
    files.push(("run_manifest.json", run_manifest(args, &setup, Some(window), &names)));
    write_all(&args.out, &files)?;

    let s = &out.summary;
    eprintln!(
        "accepted {} of {} records; N={} eta={} gamma={} W={} theta={}s; wrote {}",
        s.accepted_events,
        s.source_records,
        s.n,
        s.eta,
        s.gamma,
        s.w,
        s.theta_seconds,
        args.out.display()
    );
    Ok(())
}

pub fn oracle(args: &OracleArgs) -> CliResult<()> {
    let setup = ModelSetup::from_args(&args.model)?;
    let batch = setup.ingest(&args.model)?;
    let params = setup.params(&args.model, setup.window_for(&batch));
    let bases = setup.bases(&batch)?;
    let base_ids = transient_core::base::base_map(&bases);
    let summary = match oracle::evaluate(&batch.events, &base_ids, &params) {
        Ok(s) => s,
        Err(transient_core::Error::OracleTooLarge(m)) => return Err(CliError::TooLarge(m)),
        Err(e) => return Err(e.into()),
    };
    let bytes = pretty(&summary);
    match &args.out {
        Some(path) => fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?,
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&bytes)?;
        }
    }
    Ok(())
}

pub fn synth(args: &SynthArgs) -> CliResult<()> {
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<SynthConfig>(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => SynthConfig::default(),
    };
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.persons {
        config.n_persons = v;
    }
    if let Some(v) = args.days {
        config.n_days = v;
    }
    if let Some(v) = args.transient_fraction {
        config.transient_fraction = v;
    }
    if let Some(v) = args.pingpong_rate {
        config.pingpong_injection_rate = v;
    }
    if let Some(v) = args.noise {
        config.noise = v;
    }
    if let Some(v) = args.cell_size {
        config.cell_size = v;
    }
    let out = synth::generate(&config)?;
    let files = [
        ("events.jsonl", out.events_jsonl.into_bytes()),
        ("ground_truth.json", pretty(&out.ground_truth)),
        ("census.csv", out.census.to_csv_string().into_bytes()),
        ("synth_config.json", pretty(&config)),
    ];
    write_all(&args.out, &files)?;
    eprintln!(
        "wrote {} events for {} persons to {}",
        out.ground_truth.n_events,
        out.ground_truth.n_persons,
        args.out.display()
    );
    Ok(())
}
