//! Command execution and artifact emission.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use eeg_entropy::experiments::{
    default_dead_band, entropy_histogram, greedy_forward_select, monitor_trend, per_channel_study,
    per_feature_study, per_variant_study, segment_length_study, timing_benchmark, ExperimentError,
    LengthStudySetup, StudyTable, SvcTuning, TimingSetup, DEFAULT_LENGTHS, DEFAULT_PLATEAU_EPS,
};
use eeg_entropy::features::{sweep_hyperparameters, FeatureError, VariantBank};
use eeg_entropy::signal::{
    generate_surrogate, load_dataset, prepare_segments, write_dataset, FilterSpec, SignalError,
    SurrogateSpec, ARTIFACT_THRESHOLD_UV, DEFAULT_SEGMENT_LEN, SEGMENTS_PER_RECORD,
};
use eeg_entropy::svc::{two_stage, ProtocolConfig, SvcError};
use eeg_entropy::{
    Channel, EegRecord, EntropyConfig, EntropyError, FeatureKey, FeatureMatrix, SignalVariant,
    SvcParams,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Command, RunConfig, StudyAxis};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

const DEFAULT_BUDGET: usize = 15;
const DEFAULT_TOP_N: usize = 15;
const DEFAULT_BINS: usize = 20;
const DEFAULT_WINDOW: usize = 5;
const DEFAULT_SUBJECTS: usize = 20;
const BENCH_LENGTHS: [usize; 7] = [400, 500, 600, 700, 800, 900, 1000];
const BENCH_SUBSET: usize = 11;
const BENCH_TRAIN_PER_CLASS: usize = 10;
const BENCH_PROBES: usize = 8;

#[derive(Debug)]
pub enum RunError {
    /// Invalid or missing configuration; exit 2.
    Usage(String),
    /// Failure while executing a valid configuration; exit 3.
    Runtime(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Usage(_) => EXIT_USAGE,
            RunError::Runtime(_) => EXIT_RUNTIME,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            RunError::Usage(_) => "usage",
            RunError::Runtime(_) => "runtime",
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Usage(m) | RunError::Runtime(m) => f.write_str(m),
        }
    }
}

fn usage(msg: impl Into<String>) -> RunError {
    RunError::Usage(msg.into())
}

fn runtime(e: impl fmt::Display) -> RunError {
    RunError::Runtime(e.to_string())
}

impl From<SignalError> for RunError {
    fn from(e: SignalError) -> Self {
        runtime(e)
    }
}

impl From<FeatureError> for RunError {
    fn from(e: FeatureError) -> Self {
        runtime(e)
    }
}

impl From<SvcError> for RunError {
    fn from(e: SvcError) -> Self {
        runtime(e)
    }
}

impl From<ExperimentError> for RunError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Invalid(m) => RunError::Usage(m),
            e => runtime(e),
        }
    }
}

impl From<EntropyError> for RunError {
    fn from(e: EntropyError) -> Self {
        match e {
            EntropyError::InvalidParameter(m) => RunError::Usage(m),
            e => runtime(e),
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        runtime(e)
    }
}

/// What produced an artifact.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub command: String,
    pub command_line: Vec<String>,
    pub seed: u64,
    pub engine: String,
    pub version: String,
}

impl Provenance {
    pub fn new(cfg: &RunConfig, argv: &[String]) -> Self {
        Provenance {
            command: cfg.command.map(Command::name).unwrap_or_default().into(),
            command_line: argv.to_vec(),
            seed: cfg.seed(),
            engine: "eeg-entropy".into(),
            version: eeg_entropy::VERSION.into(),
        }
    }
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    provenance: Provenance,
    out: PathBuf,
}

impl Ctx<'_> {
    fn write(&self, name: &str, text: &str) -> Result<PathBuf, RunError> {
        fs::create_dir_all(&self.out)
            .map_err(|e| runtime(format!("cannot create {}: {e}", self.out.display())))?;
        let path = self.out.join(name);
        fs::write(&path, text).map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }

    /// Writes `body` with a `provenance` key added in front.
    fn write_json(&self, name: &str, body: Value) -> Result<PathBuf, RunError> {
        let mut doc = serde_json::Map::new();
        doc.insert("provenance".into(), serde_json::to_value(&self.provenance).expect("serializes"));
        match body {
            Value::Object(m) => doc.extend(m),
            other => {
                doc.insert("result".into(), other);
            }
        }
        let mut text = serde_json::to_string_pretty(&Value::Object(doc)).expect("serializes");
        text.push('\n');
        self.write(name, &text)
    }

    /// `<stem>.csv` plus a `<stem>.json` sidecar.
    fn write_table(&self, stem: &str, csv: &str, sidecar: Value) -> Result<(), RunError> {
        self.write(&format!("{stem}.csv"), csv)?;
        self.write_json(&format!("{stem}.json"), sidecar)?;
        Ok(())
    }

    fn protocol(&self) -> Result<ProtocolConfig, RunError> {
        let d = ProtocolConfig::default();
        let p = ProtocolConfig {
            k: self.cfg.k.unwrap_or(d.k),
            n_stage1: self.cfg.n_stage1.unwrap_or(d.n_stage1),
            n_stage2: self.cfg.n_stage2.unwrap_or(d.n_stage2),
            seed: self.cfg.seed(),
            stratified: d.stratified,
            grouping: self.cfg.grouping.map(Into::into).unwrap_or(d.grouping),
        };
        p.stage1().validate().map_err(|e| usage(e.to_string()))?;
        p.stage2().validate().map_err(|e| usage(e.to_string()))?;
        Ok(p)
    }

    fn entropy(&self) -> Result<EntropyConfig, RunError> {
        let e = self.cfg.entropy.unwrap_or(EntropyConfig::FUZZY_DEFAULT);
        e.validate()?;
        Ok(e)
    }

    fn segment_len(&self) -> usize {
        self.cfg.segment_len.unwrap_or(DEFAULT_SEGMENT_LEN)
    }

    fn records(&self) -> Result<Vec<EegRecord>, RunError> {
        let path = self
            .cfg
            .manifest
            .as_ref()
            .ok_or_else(|| usage("--manifest is required"))?;
        Ok(load_dataset(path)?)
    }

    /// Full-grid matrix from `--matrix`, or built from `--manifest`.
    fn matrix(&self) -> Result<FeatureMatrix, RunError> {
        if let Some(path) = &self.cfg.matrix {
            let text = fs::read_to_string(path)
                .map_err(|e| runtime(format!("cannot read {}: {e}", path.display())))?;
            return Ok(FeatureMatrix::from_csv(&text)?);
        }
        if self.cfg.manifest.is_none() {
            return Err(usage("--manifest or --matrix is required"));
        }
        let entropy = self.entropy()?;
        let records = self.records()?;
        let prepared = prepare_segments(
            &records,
            &FilterSpec::default(),
            self.segment_len(),
            SEGMENTS_PER_RECORD,
            ARTIFACT_THRESHOLD_UV,
        )?;
        let bank = VariantBank::new(&prepared.segments, &FeatureKey::full_grid(entropy))?;
        Ok(bank.build(&FeatureKey::full_grid(entropy))?)
    }

    /// The `--features` subset of `fm`, or all of it.
    fn feature_subset(&self, fm: &FeatureMatrix) -> Result<FeatureMatrix, RunError> {
        match self.selected_pairs()? {
            None => Ok(fm.clone()),
            Some(pairs) => {
                let cols = pairs
                    .iter()
                    .map(|&(c, v)| {
                        fm.keys
                            .iter()
                            .position(|k| k.channel == c && k.variant == v)
                            .ok_or_else(|| usage(format!("feature {c}|{v} not in matrix")))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(fm.select(&cols))
            }
        }
    }

    /// Parsed `--features`; `None` for `full` or absent.
    fn selected_pairs(&self) -> Result<Option<Vec<(Channel, SignalVariant)>>, RunError> {
        let Some(list) = &self.cfg.features else {
            return Ok(None);
        };
        if list.len() == 1 && list[0].eq_ignore_ascii_case("full") {
            return Ok(None);
        }
        let pairs = list
            .iter()
            .map(|s| parse_pair(s))
            .collect::<Result<Vec<_>, _>>()?;
        if pairs.is_empty() {
            return Err(usage("empty --features list"));
        }
        for (i, p) in pairs.iter().enumerate() {
            if pairs[..i].contains(p) {
                return Err(usage(format!("duplicate feature {}|{}", p.0, p.1)));
            }
        }
        Ok(Some(pairs))
    }
}

fn parse_pair(s: &str) -> Result<(Channel, SignalVariant), RunError> {
    let (c, v) = s
        .split_once('|')
        .ok_or_else(|| usage(format!("feature {s:?} is not CHANNEL|VARIANT")))?;
    let c: Channel = c.trim().parse().map_err(|e| usage(format!("{e}")))?;
    let v: SignalVariant = v.trim().parse().map_err(|e| usage(format!("{e}")))?;
    Ok((c, v))
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializes")
}

fn table_sidecar(table: &StudyTable) -> Value {
    to_value(table)
}

/// Executes `cfg`. `argv` is recorded verbatim in provenance blocks.
pub fn run(cfg: &RunConfig, argv: &[String]) -> Result<(), RunError> {
    let command = cfg.command.ok_or_else(|| usage("no command given"))?;
    let ctx = Ctx {
        cfg,
        provenance: Provenance::new(cfg, argv),
        out: cfg.out.clone().unwrap_or_else(|| PathBuf::from(".")),
    };
    match command {
        Command::Synth => synth(&ctx),
        Command::Validate => validate(&ctx),
        Command::Extract => extract(&ctx),
        Command::Sweep => sweep(&ctx),
        Command::Cv => cv(&ctx),
        Command::Select => select(&ctx),
        Command::Study => study(&ctx),
        Command::Bench => bench(&ctx),
        Command::Monitor => monitor(&ctx),
        Command::Entropy => entropy(&ctx),
    }
}

fn synth(ctx: &Ctx) -> Result<(), RunError> {
    if ctx.cfg.out.is_none() {
        return Err(usage("synth requires --out"));
    }
    let spec = SurrogateSpec {
        n_subjects_per_class: ctx.cfg.subjects.unwrap_or(DEFAULT_SUBJECTS),
        seed: ctx.cfg.seed(),
        class_effect: ctx.cfg.class_effect.unwrap_or(SurrogateSpec::default().class_effect),
        ..SurrogateSpec::default()
    };
    spec.validate().map_err(|e| usage(e.to_string()))?;
    let records = generate_surrogate(&spec)?;
    fs::create_dir_all(&ctx.out)?;
    let manifest = write_dataset(&ctx.out, &records)?;
    ctx.write_json(
        "synth.json",
        json!({ "spec": spec, "records": records.len(), "manifest": manifest.file_name().map(|f| f.to_string_lossy().into_owned()) }),
    )?;
    println!("{}", manifest.display());
    Ok(())
}

fn validate(ctx: &Ctx) -> Result<(), RunError> {
    let records = ctx.records()?;
    let prepared = prepare_segments(
        &records,
        &FilterSpec::default(),
        ctx.segment_len(),
        SEGMENTS_PER_RECORD,
        ARTIFACT_THRESHOLD_UV,
    )?;
    let count = |label: eeg_entropy::Label| records.iter().filter(|r| r.label == label).count();
    let rejected: Vec<Value> = prepared
        .rejected
        .iter()
        .map(|(s, i, v)| json!({ "subject_id": s, "segment_index": i, "verdict": format!("{v:?}") }))
        .collect();
    let summary = json!({
        "records": records.len(),
        "nc": count(eeg_entropy::Label::Nc),
        "pd": count(eeg_entropy::Label::Pd),
        "segment_len": ctx.segment_len(),
        "segments": prepared.segments.len(),
        "rejected": rejected,
    });
    if ctx.cfg.out.is_some() {
        ctx.write_json("validate.json", summary.clone())?;
    }
    println!("{}", serde_json::to_string(&summary).expect("serializes"));
    Ok(())
}

fn extract(ctx: &Ctx) -> Result<(), RunError> {
    let fm = ctx.matrix()?;
    let fm = ctx.feature_subset(&fm)?;
    ctx.write_table(
        "features",
        &fm.to_csv(),
        json!({
            "rows": fm.n_rows(),
            "keys": fm.keys,
            "segment_len": ctx.segment_len(),
            "substitutions": fm.substitutions,
        }),
    )
}

fn sweep(ctx: &Ctx) -> Result<(), RunError> {
    let (method, grid) = match (&ctx.cfg.points, ctx.cfg.method) {
        (Some(points), method) => {
            let first = points.first().ok_or_else(|| usage("empty --points"))?.method();
            let method = method.unwrap_or(first);
            (method, points.clone())
        }
        (None, Some(method)) => (method, method.grid()),
        (None, None) => return Err(usage("sweep requires --method or --points")),
    };
    for p in &grid {
        if p.method() != method {
            return Err(usage(format!("{p} is not a {method} configuration")));
        }
        p.validate()?;
    }
    let protocol = ctx.protocol()?;
    let records = ctx.records()?;
    let prepared = prepare_segments(
        &records,
        &FilterSpec::default(),
        ctx.segment_len(),
        SEGMENTS_PER_RECORD,
        ARTIFACT_THRESHOLD_UV,
    )?;
    let bank = VariantBank::full(&prepared.segments)?;
    let report = sweep_hyperparameters(&bank, method, &grid, &[], &protocol)?;

    let mut csv = String::from("params,a_rkf,stddev,C,gamma,substituted_cells\n");
    for p in &report.points {
        csv.push_str(&format!(
            "\"{}\",{},{},{},{},{}\n",
            p.params, p.a_rkf, p.stddev, p.svc.c, p.svc.gamma, p.substituted_cells
        ));
    }
    let sweep: Value = serde_json::from_str(&report.to_json()).expect("valid json");
    ctx.write_table(
        &format!("fig3_{}", method.name().to_lowercase()),
        &csv,
        json!({
            "method": method,
            "protocol": protocol,
            "sweep": sweep,
            "failures": report.failures,
            "best": report.best,
        }),
    )
}

fn cv(ctx: &Ctx) -> Result<(), RunError> {
    let protocol = ctx.protocol()?;
    let fm = ctx.feature_subset(&ctx.matrix()?)?;
    let (stage1, report) = two_stage(&fm, &[], &protocol)?;
    ctx.write_json(
        "cv.json",
        json!({
            "protocol": protocol,
            "keys": fm.keys,
            "stage1": stage1,
            "report": report,
        }),
    )?;
    println!("a_rkf={} std={} C={} gamma={}", report.a_rkf, report.std, report.params.c, report.params.gamma);
    Ok(())
}

/// Stage-1 parameters of the whole matrix, reused where a study fixes them.
fn full_params(fm: &FeatureMatrix, protocol: &ProtocolConfig) -> Result<SvcParams, RunError> {
    Ok(eeg_entropy::svc::stage1_select_hyperparams(fm, &[], &protocol.stage1())?.params)
}

fn select(ctx: &Ctx) -> Result<(), RunError> {
    let protocol = ctx.protocol()?;
    let fm = ctx.feature_subset(&ctx.matrix()?)?;
    let budget = ctx.cfg.budget.unwrap_or(DEFAULT_BUDGET.min(fm.n_keys()));
    let eps = ctx.cfg.plateau_eps.unwrap_or(DEFAULT_PLATEAU_EPS);
    if !(eps >= 0.0) {
        return Err(usage("--plateau-eps must be ≥ 0"));
    }
    let params = full_params(&fm, &protocol)?;
    let trace = greedy_forward_select(&fm, &params, &protocol, budget, eps)?;
    let table = trace.table();
    ctx.write_table(
        "fig8",
        &table.to_csv(),
        json!({
            "table": table,
            "keys": trace.keys,
            "a_rkf": trace.a_rkf,
            "best_so_far": trace.best_so_far,
            "stop": trace.stop,
            "params": trace.params,
        }),
    )?;
    if let Some(a) = trace.a_rkf.last() {
        println!("features={} a_rkf={a}", trace.keys.len());
    }
    Ok(())
}

fn study(ctx: &Ctx) -> Result<(), RunError> {
    let axis = ctx.cfg.axis.ok_or_else(|| usage("study requires --axis"))?;
    let protocol = ctx.protocol()?;
    match axis {
        StudyAxis::Variant => {
            let t = per_variant_study(&ctx.matrix()?, SvcTuning::PerCell, &protocol)?;
            ctx.write_table("fig4", &t.to_csv(), table_sidecar(&t))
        }
        StudyAxis::Channel => {
            let t = per_channel_study(&ctx.matrix()?, SvcTuning::PerCell, &protocol)?;
            ctx.write_table("fig5", &t.to_csv(), table_sidecar(&t))
        }
        StudyAxis::Feature => {
            let fm = ctx.matrix()?;
            let top_n = ctx.cfg.top_n.unwrap_or(DEFAULT_TOP_N.min(fm.n_keys()));
            let params = full_params(&fm, &protocol)?;
            let ranking = per_feature_study(&fm, SvcTuning::Fixed(params), &protocol, top_n)?;
            ctx.write_table("fig6", &ranking.table.to_csv(), table_sidecar(&ranking.table))?;
            let top = ranking.top_table();
            ctx.write_table("table2", &top.to_csv(), json!({ "table": top, "columns": ranking.top }))
        }
        StudyAxis::Length => {
            let entropy = ctx.entropy()?;
            let records = ctx.records()?;
            let lengths = ctx.cfg.lengths.clone().unwrap_or_else(|| DEFAULT_LENGTHS.to_vec());
            let selected = match ctx.selected_pairs()? {
                Some(pairs) => pairs
                    .into_iter()
                    .map(|(c, v)| FeatureKey::new(c, v, entropy))
                    .collect(),
                None => {
                    // Greedy selection on the full-length matrix.
                    let fm = ctx.matrix()?;
                    let params = full_params(&fm, &protocol)?;
                    let budget = ctx.cfg.budget.unwrap_or(DEFAULT_BUDGET);
                    let eps = ctx.cfg.plateau_eps.unwrap_or(DEFAULT_PLATEAU_EPS);
                    greedy_forward_select(&fm, &params, &protocol, budget, eps)?.keys
                }
            };
            let setup = LengthStudySetup {
                records: &records,
                filter: FilterSpec::default(),
                n_segments: SEGMENTS_PER_RECORD,
                threshold_uv: ARTIFACT_THRESHOLD_UV,
                entropy,
                selected: selected.clone(),
            };
            let t = segment_length_study(&setup, &lengths, SvcTuning::PerCell, &protocol)?;
            ctx.write_table("fig9", &t.to_csv(), json!({ "table": t, "selected": selected }))
        }
        StudyAxis::Histogram => {
            let fm = ctx.matrix()?;
            let key = match ctx.cfg.key {
                Some(k) => k,
                None => FeatureKey::new(Channel::T8, SignalVariant::CA3, ctx.entropy()?),
            };
            let h = entropy_histogram(&fm, &key, ctx.cfg.bins.unwrap_or(DEFAULT_BINS))?;
            ctx.write_table("fig7", &h.to_csv(), to_value(&h))
        }
    }
}

fn bench(ctx: &Ctx) -> Result<(), RunError> {
    let entropy = ctx.entropy()?;
    let records = ctx.records()?;
    let full = FeatureKey::full_grid(entropy);
    let subset: Vec<FeatureKey> = match ctx.selected_pairs()? {
        Some(pairs) => pairs
            .into_iter()
            .map(|(c, v)| FeatureKey::new(c, v, entropy))
            .collect(),
        None => full[..BENCH_SUBSET].to_vec(),
    };
    let lengths = ctx.cfg.lengths.clone().unwrap_or_else(|| BENCH_LENGTHS.to_vec());
    let setup = TimingSetup {
        records: &records,
        filter: FilterSpec::default(),
        threshold_uv: ARTIFACT_THRESHOLD_UV,
        params: SvcParams::new(1.0, 1.0 / full.len() as f64),
        feature_sets: vec![full, subset],
        n_train_per_class: BENCH_TRAIN_PER_CLASS,
        n_probes: BENCH_PROBES,
        repetitions: ctx.cfg.repetitions.unwrap_or(5),
    };
    let report = timing_benchmark(&setup, &lengths)?;
    ctx.write_table("fig10", &report.to_csv(), to_value(&report))
}

fn read_series(path: &Path) -> Result<Vec<f64>, RunError> {
    let text = fs::read_to_string(path)
        .map_err(|e| runtime(format!("cannot read {}: {e}", path.display())))?;
    text.split(|c: char| c == '\n' || c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| usage(format!("{}: {s:?} is not a number", path.display())))
        })
        .collect()
}

fn monitor(ctx: &Ctx) -> Result<(), RunError> {
    let history = match (&ctx.cfg.history, &ctx.cfg.input) {
        (Some(h), _) => h.clone(),
        (None, Some(p)) => read_series(p)?,
        (None, None) => return Err(usage("monitor requires --history or --input")),
    };
    let window = ctx.cfg.window.unwrap_or(DEFAULT_WINDOW.min(history.len()));
    let dead_band = match ctx.cfg.dead_band {
        Some(d) => d,
        None => {
            let key = ctx
                .cfg
                .key
                .ok_or_else(|| usage("monitor requires --dead-band, or --key with a dataset"))?;
            default_dead_band(&ctx.matrix()?, &key)?
        }
    };
    let verdict = monitor_trend(&history, window, dead_band)?;
    let slope = eeg_entropy::experiments::trend_slope(&history[history.len() - window..]);
    if ctx.cfg.out.is_some() {
        ctx.write_json(
            "monitor.json",
            json!({ "verdict": verdict, "slope": slope, "window": window, "dead_band": dead_band }),
        )?;
    }
    println!("{}", to_value(&verdict).as_str().unwrap_or_default());
    Ok(())
}

fn entropy(ctx: &Ctx) -> Result<(), RunError> {
    let cfg = ctx.cfg.entropy.ok_or_else(|| usage("entropy requires --entropy"))?;
    cfg.validate()?;
    let path = ctx.cfg.input.as_ref().ok_or_else(|| usage("entropy requires --input"))?;
    let x = read_series(path)?;
    let v = cfg.compute(&x)?;
    println!("{v}");
    Ok(())
}
