//! The `ingest`, `generate` and `analyze` commands.
//!
//! Settings come from flags, optionally layered over a `key = value` config
//! file whose keys are the long flag names (`store-dir = images`). Flags win.
//! Logs go to stderr; data goes to files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::analysis::{
    self, all_cross_level_similarities, all_defaults, apply_threshold, consistency_chains,
    cross_level_similarities, degree_histogram, load_extents, match_defaults_to_extent,
    tail_threshold, AnalysisError, ConsistencyChain, CrossLevelOptions, CrossLevelRecord,
    DefaultReport, ExtentMatch, Extremum, ForestExtentRow, ImageSource, ThresholdFlag,
};
use crate::generation::{
    run_generation, GenerationError, GenerationOptions, ImageProvider, ImageStore, LiveProvider,
    LiveProviderConfig, Manifest, RetryPolicy, SyntheticProvider, Timestamps,
    DEFAULT_API_KEY_ENV, DEFAULT_IMAGE_SIZE,
};
use crate::hierarchy::{prompt_for, HierarchyError, RegionHierarchy, WORLD_CODE};
use crate::image::LumaWeights;
use crate::report::{self, ReportInputs, ThresholdSource};
use crate::similarity::{Measure, SsimParams};

/// Command failure, classified by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or malformed input data.
    #[error("{0}")]
    Input(String),
    /// Bad settings or missing credentials.
    #[error("{0}")]
    Config(String),
    /// Images missing for regions that must be analyzed.
    #[error("{0}")]
    Incomplete(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Config(_) => 3,
            CliError::Incomplete(_) => 4,
            CliError::Internal(_) => 1,
        }
    }
}

impl From<HierarchyError> for CliError {
    fn from(e: HierarchyError) -> Self {
        match e {
            HierarchyError::UnknownRegion(_) | HierarchyError::LevelNotBelow { .. } => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<GenerationError> for CliError {
    fn from(e: GenerationError) -> Self {
        match e {
            GenerationError::MissingCredential(_)
            | GenerationError::ManifestMismatch { .. }
            | GenerationError::Config(_) => CliError::Config(e.to_string()),
            GenerationError::Manifest(_) | GenerationError::Invalid(_) => {
                CliError::Input(e.to_string())
            }
            GenerationError::Io { .. } => CliError::Internal(e.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::MissingImages(_) | AnalysisError::AncestorImage(_) => {
                CliError::Incomplete(e.to_string())
            }
            AnalysisError::ExtentRow { .. } | AnalysisError::Image { .. } => {
                CliError::Input(e.to_string())
            }
            AnalysisError::Hierarchy(h) => h.into(),
            AnalysisError::Params(_) | AnalysisError::InvalidBinWidth(_) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Internal(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Internal(format!("{}: {e}", path.display()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProviderKind {
    Live,
    Synthetic,
}

impl FromStr for ProviderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        <Self as ValueEnum>::from_str(s, true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LumaChoice {
    Bt601,
    Bt709,
}

impl FromStr for LumaChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        <Self as ValueEnum>::from_str(s, true)
    }
}

#[derive(Debug, Parser)]
#[command(name = "regional-defaults", version, about = "Audit text-to-image models for regional defaults")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse the region table, write hierarchy.json and print level counts.
    Ingest(RunArgs),
    /// Request one image per region and record the outcomes in the manifest.
    Generate(RunArgs),
    /// Compute cross-level similarities and write the analysis artifacts.
    Analyze(RunArgs),
}

/// Flags shared by all commands. Unset flags fall back to the config file,
/// then to built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// key = value settings file; keys are long flag names.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Region table (CSV) or serialized hierarchy (.json). Defaults to the bundled snapshot.
    #[arg(long)]
    pub hierarchy: Option<PathBuf>,
    /// Region codes to exclude (repeatable or comma-separated).
    #[arg(long = "exclude", value_delimiter = ',')]
    pub exclusions: Vec<String>,
    #[arg(long, value_enum)]
    pub provider: Option<ProviderKind>,
    /// Seed of the synthetic provider.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub image_size: Option<u32>,
    /// Prompts of these regions are refused by the synthetic provider.
    #[arg(long = "reject", value_delimiter = ',')]
    pub rejections: Vec<String>,
    #[arg(long)]
    pub store_dir: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Manifest path. Defaults to <output-dir>/manifest.json.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Region whose defaults are analyzed.
    #[arg(long)]
    pub ancestor: Option<String>,
    /// Analyze a records.csv directly instead of images.
    #[arg(long)]
    pub records: Option<PathBuf>,
    /// Forest-extent CSV. Defaults to the bundled table.
    #[arg(long)]
    pub extents: Option<PathBuf>,
    #[arg(long)]
    pub mse_bin_width: Option<f64>,
    #[arg(long)]
    pub ssim_bin_width: Option<f64>,
    /// Fixed SSIM threshold instead of the Tukey fence.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Build the distribution from every ancestor-descendant pair.
    #[arg(long)]
    pub pool_all_ancestors: bool,
    /// Proceed when some regions have no image.
    #[arg(long)]
    pub allow_partial: bool,
    #[arg(long)]
    pub ssim_window: Option<usize>,
    #[arg(long)]
    pub ssim_k1: Option<f64>,
    #[arg(long)]
    pub ssim_k2: Option<f64>,
    #[arg(long)]
    pub ssim_data_range: Option<f64>,
    #[arg(long)]
    pub ssim_alpha: Option<f64>,
    #[arg(long)]
    pub ssim_beta: Option<f64>,
    #[arg(long)]
    pub ssim_gamma: Option<f64>,
    /// Normalize variances by N instead of N-1.
    #[arg(long)]
    pub ssim_population: bool,
    #[arg(long, value_enum)]
    pub luma: Option<LumaChoice>,
    /// Worker threads for similarity computation.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Concurrent provider calls.
    #[arg(long)]
    pub max_in_flight: Option<usize>,
    #[arg(long)]
    pub retry_attempts: Option<u32>,
    /// Initial retry backoff in milliseconds.
    #[arg(long)]
    pub retry_backoff_ms: Option<u64>,
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// Environment variable holding the live provider's API key.
    #[arg(long)]
    pub api_key_env: Option<String>,
    /// Minimum spacing between live requests, in milliseconds.
    #[arg(long)]
    pub request_interval_ms: Option<u64>,
}

/// Fully resolved settings.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub hierarchy: Option<PathBuf>,
    pub exclusions: Vec<String>,
    pub provider: ProviderKind,
    pub seed: Option<u64>,
    pub image_size: u32,
    pub rejections: Vec<String>,
    pub store_dir: PathBuf,
    pub output_dir: PathBuf,
    pub manifest: PathBuf,
    pub ancestor: String,
    pub records: Option<PathBuf>,
    pub extents: Option<PathBuf>,
    pub mse_bin_width: f64,
    pub ssim_bin_width: f64,
    pub threshold: Option<f64>,
    pub pool_all_ancestors: bool,
    pub allow_partial: bool,
    pub ssim: SsimParams,
    pub luma: LumaWeights,
    pub threads: Option<usize>,
    pub max_in_flight: usize,
    pub retry: RetryPolicy,
    pub live: LiveProviderConfig,
}

/// Parses `key = value` lines. `#`/`;` comments and `[section]` headers are ignored.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') || line.starts_with('[') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("config line {}: expected key = value", i + 1)))?;
        out.insert(k.trim().replace('_', "-"), v.trim().to_owned());
    }
    Ok(out)
}

struct Layer {
    file: BTreeMap<String, String>,
}

impl Layer {
    fn get<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.file
            .get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| CliError::Config(format!("config `{key}`: {e}")))
            })
            .transpose()
    }

    fn flag(&self, flag: bool, key: &str) -> Result<bool, CliError> {
        Ok(flag || self.get::<bool>(None, key)?.unwrap_or(false))
    }

    fn list(&self, flag: &[String], key: &str) -> Vec<String> {
        if !flag.is_empty() {
            return flag.to_vec();
        }
        self.file
            .get(key)
            .map(|v| {
                v.split(',')
                    .map(|s| s.trim().to_owned())
                    .filter(|s| !s.is_empty())
                    .collect()
            })
            .unwrap_or_default()
    }
}

impl RunConfig {
    pub fn resolve(args: &RunArgs) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                parse_config_file(&text)?
            }
            None => BTreeMap::new(),
        };
        let l = Layer { file };

        let provider = l.get(args.provider, "provider")?.unwrap_or(ProviderKind::Synthetic);
        let seed = l.get(args.seed, "seed")?;
        let output_dir = l.get(args.output_dir.clone(), "output-dir")?.unwrap_or_else(|| "out".into());
        let store_dir = l.get(args.store_dir.clone(), "store-dir")?.unwrap_or_else(|| "images".into());
        let manifest = l
            .get(args.manifest.clone(), "manifest")?
            .unwrap_or_else(|| output_dir.join("manifest.json"));

        let d = SsimParams::default();
        let ssim = SsimParams {
            window_size: l.get(args.ssim_window, "ssim-window")?.unwrap_or(d.window_size),
            k1: l.get(args.ssim_k1, "ssim-k1")?.unwrap_or(d.k1),
            k2: l.get(args.ssim_k2, "ssim-k2")?.unwrap_or(d.k2),
            data_range: l.get(args.ssim_data_range, "ssim-data-range")?.unwrap_or(d.data_range),
            alpha: l.get(args.ssim_alpha, "ssim-alpha")?.unwrap_or(d.alpha),
            beta: l.get(args.ssim_beta, "ssim-beta")?.unwrap_or(d.beta),
            gamma: l.get(args.ssim_gamma, "ssim-gamma")?.unwrap_or(d.gamma),
            sample_covariance: !l.flag(args.ssim_population, "ssim-population")?,
        };
        ssim.validate().map_err(|e| CliError::Config(e.to_string()))?;

        let luma = match l.get(args.luma, "luma")?.unwrap_or(LumaChoice::Bt601) {
            LumaChoice::Bt601 => LumaWeights::BT601,
            LumaChoice::Bt709 => LumaWeights::BT709,
        };
        let dr = RetryPolicy::default();
        let retry = RetryPolicy {
            max_attempts: l.get(args.retry_attempts, "retry-attempts")?.unwrap_or(dr.max_attempts).max(1),
            initial_backoff: l
                .get(args.retry_backoff_ms, "retry-backoff-ms")?
                .map_or(dr.initial_backoff, Duration::from_millis),
            factor: dr.factor,
        };
        let dl = LiveProviderConfig::default();
        let live = LiveProviderConfig {
            endpoint: l.get(args.endpoint.clone(), "endpoint")?.unwrap_or(dl.endpoint),
            model: l.get(args.model.clone(), "model")?.unwrap_or(dl.model),
            api_key_env: l
                .get(args.api_key_env.clone(), "api-key-env")?
                .unwrap_or_else(|| DEFAULT_API_KEY_ENV.to_owned()),
            min_interval: l
                .get(args.request_interval_ms, "request-interval-ms")?
                .map_or(dl.min_interval, Duration::from_millis),
            timeout: dl.timeout,
        };

        let cfg = RunConfig {
            hierarchy: l.get(args.hierarchy.clone(), "hierarchy")?,
            exclusions: l.list(&args.exclusions, "exclude"),
            provider,
            seed,
            image_size: l.get(args.image_size, "image-size")?.unwrap_or(DEFAULT_IMAGE_SIZE),
            rejections: l.list(&args.rejections, "reject"),
            store_dir,
            output_dir,
            manifest,
            ancestor: l.get(args.ancestor.clone(), "ancestor")?.unwrap_or_else(|| WORLD_CODE.to_owned()),
            records: l.get(args.records.clone(), "records")?,
            extents: l.get(args.extents.clone(), "extents")?,
            mse_bin_width: l
                .get(args.mse_bin_width, "mse-bin-width")?
                .unwrap_or_else(|| analysis::default_bin_width(Measure::Mse)),
            ssim_bin_width: l
                .get(args.ssim_bin_width, "ssim-bin-width")?
                .unwrap_or_else(|| analysis::default_bin_width(Measure::Ssim)),
            threshold: l.get(args.threshold, "threshold")?,
            pool_all_ancestors: l.flag(args.pool_all_ancestors, "pool-all-ancestors")?,
            allow_partial: l.flag(args.allow_partial, "allow-partial")?,
            ssim,
            luma,
            threads: l.get(args.threads, "threads")?,
            max_in_flight: l.get(args.max_in_flight, "max-in-flight")?.unwrap_or(1).max(1),
            retry,
            live,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.output_dir == self.store_dir {
            return Err(CliError::Config("output dir and store dir must differ".into()));
        }
        if self.image_size == 0 {
            return Err(CliError::Config("image size must be positive".into()));
        }
        for w in [self.mse_bin_width, self.ssim_bin_width] {
            if !(w > 0.0 && w.is_finite()) {
                return Err(CliError::Config(format!("bin width must be positive, got {w}")));
            }
        }
        Ok(())
    }

    fn check_provider_settings(&self) -> Result<(), CliError> {
        match (self.provider, self.seed) {
            (ProviderKind::Synthetic, None) => {
                Err(CliError::Config("the synthetic provider requires --seed".into()))
            }
            (ProviderKind::Live, Some(_)) => {
                Err(CliError::Config("--seed applies only to the synthetic provider".into()))
            }
            _ => Ok(()),
        }
    }

    /// Hierarchy from the configured source with the configured exclusions.
    pub fn load_hierarchy(&self) -> Result<RegionHierarchy, CliError> {
        let base = match &self.hierarchy {
            None => RegionHierarchy::bundled(),
            Some(p) if p.extension().is_some_and(|e| e == "json") => {
                let text = fs::read_to_string(p).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
                RegionHierarchy::from_json(&text)?
            }
            Some(p) => RegionHierarchy::from_csv_path(p)?,
        };
        Ok(base.with_exclusions(&self.exclusions)?)
    }

    fn load_extents(&self, h: &RegionHierarchy) -> Result<Vec<ForestExtentRow>, CliError> {
        let rows = match &self.extents {
            // The bundled table covers the full hierarchy; keep what this one knows.
            None => load_extents(analysis::BUNDLED_EXTENTS.as_bytes(), None)?
                .into_iter()
                .filter(|r| h.get(&r.region_code).is_some_and(|n| n.level == r.level))
                .collect(),
            Some(p) => {
                let f = fs::File::open(p).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
                load_extents(f, Some(h))?
            }
        };
        Ok(rows)
    }
}

fn counts_line(counts: [usize; 5]) -> String {
    let total: usize = counts.iter().sum();
    let parts: Vec<String> = counts.iter().map(usize::to_string).collect();
    format!("{} ({total} total)", parts.join("/"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestSummary {
    pub counts_before: [usize; 5],
    pub counts_after: [usize; 5],
    pub hierarchy_path: PathBuf,
}

impl IngestSummary {
    pub fn lines(&self) -> Vec<String> {
        vec![
            format!("levels before exclusions: {}", counts_line(self.counts_before)),
            format!("levels after exclusions: {}", counts_line(self.counts_after)),
        ]
    }
}

/// Writes `<output-dir>/hierarchy.json` and reports per-level counts.
pub fn cmd_ingest(cfg: &RunConfig) -> Result<IngestSummary, CliError> {
    let h = cfg.load_hierarchy()?;
    fs::create_dir_all(&cfg.output_dir).map_err(|e| io_err(&cfg.output_dir, e))?;
    let path = cfg.output_dir.join("hierarchy.json");
    fs::write(&path, h.to_json()).map_err(|e| io_err(&path, e))?;
    Ok(IngestSummary {
        counts_before: h.level_counts(true),
        counts_after: h.level_counts(false),
        hierarchy_path: path,
    })
}

#[derive(Debug, Clone)]
pub struct GenerateSummary {
    pub manifest: Manifest,
    pub provider_calls: usize,
    pub tallies: (usize, usize, usize),
    /// Configured exclusions plus regions the provider rejected.
    pub effective_exclusions: Vec<String>,
}

impl GenerateSummary {
    pub fn lines(&self) -> Vec<String> {
        let (g, r, f) = self.tallies;
        let mut out = vec![format!("generated/rejected/failed: {g}/{r}/{f}")];
        if self.provider_calls == 0 {
            out.push("0 provider calls (cache)".to_owned());
        } else {
            out.push(format!("{} provider calls", self.provider_calls));
        }
        if !self.effective_exclusions.is_empty() {
            out.push(format!("excluded from analysis: {}", self.effective_exclusions.join(", ")));
        }
        out
    }
}

fn build_provider(cfg: &RunConfig, h: &RegionHierarchy) -> Result<Box<dyn ImageProvider>, CliError> {
    cfg.check_provider_settings()?;
    match cfg.provider {
        ProviderKind::Live => Ok(Box::new(LiveProvider::from_env(cfg.live.clone())?)),
        ProviderKind::Synthetic => {
            let prompts = cfg
                .rejections
                .iter()
                .map(|code| h.node(code).map(prompt_for))
                .collect::<Result<Vec<_>, _>>()?;
            let seed = cfg.seed.expect("checked above");
            Ok(Box::new(SyntheticProvider::new(seed).with_rejected_prompts(prompts)))
        }
    }
}

pub fn cmd_generate(cfg: &RunConfig) -> Result<GenerateSummary, CliError> {
    let h = cfg.load_hierarchy()?;
    let provider = build_provider(cfg, &h)?;
    let store = ImageStore::open(&cfg.store_dir).map_err(|e| io_err(&cfg.store_dir, e))?;
    if let Some(parent) = cfg.manifest.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    let opts = GenerationOptions {
        image_size: cfg.image_size,
        retry: cfg.retry,
        max_in_flight: cfg.max_in_flight,
        timestamps: Timestamps::from_env(),
    };
    let run = run_generation(&h, provider.as_ref(), &store, &cfg.manifest, &opts)?;
    let mut effective: Vec<String> = h.exclusions().iter().cloned().collect();
    effective.extend(
        run.manifest
            .codes_with(crate::generation::OutcomeStatus::Rejected)
            .map(str::to_owned),
    );
    effective.sort();
    effective.dedup();
    Ok(GenerateSummary {
        tallies: run.manifest.tallies(),
        provider_calls: run.provider_calls,
        manifest: run.manifest,
        effective_exclusions: effective,
    })
}

#[derive(Debug, Clone)]
pub struct AnalyzeSummary {
    pub records: Vec<CrossLevelRecord>,
    pub reports: Vec<DefaultReport>,
    pub chains: Vec<ConsistencyChain>,
    pub threshold: ThresholdSource,
    pub flags: Vec<ThresholdFlag>,
    pub matches: Vec<ExtentMatch>,
}

impl AnalyzeSummary {
    pub fn lines(&self) -> Vec<String> {
        let mut out = vec![format!("{} cross-level records", self.records.len())];
        for c in self.chains.iter().filter(|c| c.extremum == Extremum::Most) {
            out.push(format!("{} default chain: longest hierarchical run {}", c.measure, c.run_length()));
        }
        out.push(match self.threshold.value() {
            Some(t) => format!(
                "SSIM threshold {t:.4}: defaults stand at {} level(s)",
                self.flags.iter().filter(|f| f.default_exists).count()
            ),
            None => "SSIM threshold: none".to_owned(),
        });
        out.push(format!(
            "forest-extent matches: {}/{}",
            self.matches.iter().filter(|m| m.matched).count(),
            self.matches.len()
        ));
        out
    }
}

fn write_file(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> csv::Result<()>) -> Result<(), CliError> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| io_err(path, e))?;
    fs::write(path, buf).map_err(|e| io_err(path, e))
}

/// Computes (or, with `records`, replays) cross-level records for the
/// configured ancestor and writes every analysis artifact to the output dir.
pub fn cmd_analyze(cfg: &RunConfig) -> Result<AnalyzeSummary, CliError> {
    let h = cfg.load_hierarchy()?;
    let ancestor = h.node(&cfg.ancestor)?.code.clone();

    let (records, pooled) = match &cfg.records {
        Some(path) => {
            let f = fs::File::open(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            let all = report::read_records_csv(f).map_err(CliError::Input)?;
            for r in &all {
                h.node(&r.descendant_code)?;
            }
            let mine: Vec<CrossLevelRecord> = all.iter().filter(|r| r.ancestor_code == ancestor).cloned().collect();
            (mine, cfg.pool_all_ancestors.then_some(all))
        }
        None => {
            let manifest = Manifest::load(&cfg.manifest)?;
            let store = ImageStore::open(&cfg.store_dir).map_err(|e| io_err(&cfg.store_dir, e))?;
            let src = ImageSource {
                manifest: &manifest,
                store: &store,
            };
            let opts = CrossLevelOptions {
                ssim: cfg.ssim,
                luma: cfg.luma,
                allow_partial: cfg.allow_partial,
                threads: cfg.threads,
            };
            if cfg.pool_all_ancestors {
                let all = all_cross_level_similarities(&h, &src, &opts)?;
                let mine = all.iter().filter(|r| r.ancestor_code == ancestor).cloned().collect();
                (mine, Some(all))
            } else {
                (cross_level_similarities(&h, &src, &ancestor, &opts)?, None)
            }
        }
    };
    if records.is_empty() {
        return Err(CliError::Incomplete(format!("no cross-level records for `{ancestor}`")));
    }

    let reports = all_defaults(&records)?;
    let mut chains = consistency_chains(&reports, &h, Extremum::Most)?;
    chains.extend(consistency_chains(&reports, &h, Extremum::Least)?);

    let degree = pooled.as_deref().unwrap_or(&records);
    let hist_mse = degree_histogram(degree, Measure::Mse, cfg.mse_bin_width)?;
    let hist_ssim = degree_histogram(degree, Measure::Ssim, cfg.ssim_bin_width)?;
    let threshold = match cfg.threshold {
        Some(t) => ThresholdSource::Override(t),
        None => {
            let values: Vec<f64> = degree.iter().map(|r| r.ssim).collect();
            match tail_threshold(&values, Measure::Ssim) {
                Ok(Some(t)) => ThresholdSource::Fence(t),
                Ok(None) => ThresholdSource::None,
                Err(AnalysisError::TooFewObservations { .. }) => ThresholdSource::None,
                Err(e) => return Err(e.into()),
            }
        }
    };
    let flags = threshold
        .value()
        .map(|t| apply_threshold(&reports, t))
        .unwrap_or_default();

    let extents: Vec<ForestExtentRow> = cfg
        .load_extents(&h)?
        .into_iter()
        .filter(|r| h.is_descendant(&ancestor, &r.region_code))
        .collect();
    let matchable: Vec<DefaultReport> = reports
        .iter()
        .filter(|r| extents.iter().any(|e| e.level == r.level))
        .cloned()
        .collect();
    let matches = match_defaults_to_extent(&matchable, &extents)?;

    let out = &cfg.output_dir;
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    write_file(&out.join("records.csv"), |w| report::write_records_csv(w, degree))?;
    write_file(&out.join("defaults.csv"), |w| report::write_defaults_csv(w, &reports))?;
    write_file(&out.join("histogram_mse.csv"), |w| report::write_histogram_csv(w, &hist_mse))?;
    write_file(&out.join("histogram_ssim.csv"), |w| report::write_histogram_csv(w, &hist_ssim))?;
    write_file(&out.join("matches.csv"), |w| report::write_matches_csv(w, &matches))?;
    write_file(&out.join("consistency.csv"), |w| report::write_consistency_csv(w, &chains))?;
    let threshold_text = match threshold.value() {
        Some(t) => format!("{}\n", report::format_g17(t)),
        None => "none\n".to_owned(),
    };
    let path = out.join("threshold.txt");
    fs::write(&path, threshold_text).map_err(|e| io_err(&path, e))?;
    let md = report::render_markdown(&ReportInputs {
        hierarchy: &h,
        ancestor: &ancestor,
        reports: &reports,
        chains: &chains,
        n_observations: degree.len(),
        threshold,
        flags: &flags,
        matches: &matches,
    });
    let path = out.join("report.md");
    fs::write(&path, md).map_err(|e| io_err(&path, e))?;

    Ok(AnalyzeSummary {
        records,
        reports,
        chains,
        threshold,
        flags,
        matches,
    })
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match &cli.command {
        Command::Ingest(a) => RunConfig::resolve(a).and_then(|c| cmd_ingest(&c)).map(|s| s.lines()),
        Command::Generate(a) => RunConfig::resolve(a).and_then(|c| cmd_generate(&c)).map(|s| s.lines()),
        Command::Analyze(a) => RunConfig::resolve(a).and_then(|c| cmd_analyze(&c)).map(|s| s.lines()),
    };
    match result {
        Ok(lines) => {
            for line in lines {
                log::info!("{line}");
                println!("{line}");
            }
            0
        }
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
