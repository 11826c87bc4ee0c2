//! Obtaining one image per region from a text-to-image provider, with a
//! content-addressed image store and a persistent manifest that makes reruns
//! incremental.

mod live;
mod manifest;
mod provider;
mod store;
mod synthetic;

use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Duration;

use thiserror::Error;

pub use live::{classify_response, LiveProvider, LiveProviderConfig, DEFAULT_API_KEY_ENV};
pub use manifest::{GenerationOutcome, Manifest, OutcomeStatus};
pub use provider::{GenerationRequest, ImageProvider, ProviderError, DEFAULT_IMAGE_SIZE};
pub use store::{content_hash, ImageStore};
pub use synthetic::{synthesize, SyntheticProvider};

use crate::hierarchy::{prompt_for, RegionHierarchy};
use crate::image::decode_png;

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("manifest JSON: {0}")]
    Manifest(serde_json::Error),
    #[error("invalid manifest: {0}")]
    Invalid(String),
    #[error("manifest was produced by {found}, but this run uses {expected}")]
    ManifestMismatch { expected: String, found: String },
    #[error("environment variable `{0}` with the provider API key is not set")]
    MissingCredential(String),
    #[error("configuration: {0}")]
    Config(String),
}

/// Exponential backoff for transient provider failures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    /// Total attempts per region, including the first.
    pub max_attempts: u32,
    pub initial_backoff: Duration,
    pub factor: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            initial_backoff: Duration::from_secs(1),
            factor: 2.0,
        }
    }
}

impl RetryPolicy {
    /// No waiting between attempts.
    pub fn immediate(max_attempts: u32) -> Self {
        Self {
            max_attempts,
            initial_backoff: Duration::ZERO,
            factor: 1.0,
        }
    }

    /// Delay after the `failed`-th failed attempt (1-based).
    pub fn backoff(&self, failed: u32) -> Duration {
        self.initial_backoff
            .mul_f64(self.factor.powi(failed.saturating_sub(1) as i32))
    }
}

/// Source of manifest timestamps.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Timestamps {
    #[default]
    System,
    /// Fixed value, for reproducible manifests.
    Fixed(String),
}

impl Timestamps {
    /// Honors `SOURCE_DATE_EPOCH` when set.
    pub fn from_env() -> Self {
        std::env::var("SOURCE_DATE_EPOCH")
            .ok()
            .and_then(|s| s.trim().parse::<i64>().ok())
            .and_then(|secs| chrono::DateTime::from_timestamp(secs, 0))
            .map(|t| Timestamps::Fixed(t.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)))
            .unwrap_or_default()
    }

    fn now(&self) -> String {
        match self {
            Timestamps::System => {
                chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
            }
            Timestamps::Fixed(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GenerationOptions {
    pub image_size: u32,
    pub retry: RetryPolicy,
    /// Upper bound on concurrent provider calls.
    pub max_in_flight: usize,
    pub timestamps: Timestamps,
}

impl Default for GenerationOptions {
    fn default() -> Self {
        Self {
            image_size: DEFAULT_IMAGE_SIZE,
            retry: RetryPolicy::default(),
            max_in_flight: 1,
            timestamps: Timestamps::System,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GenerationRun {
    pub manifest: Manifest,
    /// Provider calls made by this run, retries included.
    pub provider_calls: usize,
    /// Regions requested by this run (the rest were cache hits).
    pub requested: usize,
}

fn is_cached(manifest: &Manifest, store: &ImageStore, code: &str) -> bool {
    match manifest.outcome(code) {
        Some(o) => match o.status {
            OutcomeStatus::Generated => o.image_ref.as_deref().is_some_and(|r| store.contains(r)),
            OutcomeStatus::Rejected => true,
            OutcomeStatus::Failed => false,
        },
        None => false,
    }
}

fn request_one(
    provider: &dyn ImageProvider,
    store: &ImageStore,
    req: &GenerationRequest,
    opts: &GenerationOptions,
    calls: &AtomicUsize,
) -> std::io::Result<GenerationOutcome> {
    let mut attempts = 0;
    let result = loop {
        attempts += 1;
        calls.fetch_add(1, Ordering::Relaxed);
        match provider.generate(&req.prompt, req.size) {
            Err(ProviderError::Transient(detail)) if attempts < opts.retry.max_attempts => {
                let wait = opts.retry.backoff(attempts);
                log::warn!(
                    "{}: attempt {attempts} failed ({detail}); retrying in {wait:?}",
                    req.region_code
                );
                std::thread::sleep(wait);
            }
            other => break other,
        }
    };

    let mut outcome = GenerationOutcome {
        region_code: req.region_code.clone(),
        status: OutcomeStatus::Failed,
        image_ref: None,
        provider_id: provider.id(),
        prompt: req.prompt.clone(),
        timestamp: opts.timestamps.now(),
        attempts,
        failure_detail: None,
    };
    match result {
        Ok(bytes) => match decode_png(&bytes) {
            Ok(img) if img.width() == req.size && img.height() == req.size => {
                outcome.image_ref = Some(store.put(&bytes)?);
                outcome.status = OutcomeStatus::Generated;
            }
            Ok(img) => {
                outcome.failure_detail = Some(format!(
                    "provider returned {}x{} instead of {}x{}",
                    img.width(),
                    img.height(),
                    req.size,
                    req.size
                ));
            }
            Err(e) => outcome.failure_detail = Some(e.to_string()),
        },
        Err(ProviderError::Rejected(detail)) => {
            outcome.status = OutcomeStatus::Rejected;
            outcome.failure_detail = Some(detail);
        }
        Err(e) => outcome.failure_detail = Some(e.to_string()),
    }
    Ok(outcome)
}

/// Requests an image for every non-excluded region that has no cached
/// Generated or Rejected outcome, persisting the manifest after each result.
///
/// A store I/O failure stops the run; outcomes recorded so far stay on disk.
pub fn run_generation(
    hierarchy: &RegionHierarchy,
    provider: &dyn ImageProvider,
    store: &ImageStore,
    manifest_path: &Path,
    opts: &GenerationOptions,
) -> Result<GenerationRun, GenerationError> {
    if opts.image_size == 0 {
        return Err(GenerationError::Config("image size must be positive".into()));
    }
    let mut manifest = if manifest_path.exists() {
        let m = Manifest::load(manifest_path)?;
        let found = (m.provider_id.as_str(), m.seed, m.image_size);
        if found != (provider.id().as_str(), provider.seed(), opts.image_size) {
            return Err(GenerationError::ManifestMismatch {
                expected: format!("{} (seed {:?}, size {})", provider.id(), provider.seed(), opts.image_size),
                found: format!("{} (seed {:?}, size {})", m.provider_id, m.seed, m.image_size),
            });
        }
        m
    } else {
        Manifest::new(provider.id(), provider.seed(), opts.image_size)
    };

    let pending: Vec<GenerationRequest> = hierarchy
        .nodes()
        .filter(|n| !hierarchy.is_excluded(&n.code))
        .filter(|n| !is_cached(&manifest, store, &n.code))
        .map(|n| GenerationRequest {
            region_code: n.code.clone(),
            prompt: prompt_for(n),
            size: opts.image_size,
        })
        .collect();
    log::info!(
        "{} regions to request, {} cached",
        pending.len(),
        hierarchy.len() - hierarchy.exclusions().len() - pending.len()
    );

    let calls = AtomicUsize::new(0);
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let workers = opts.max_in_flight.clamp(1, pending.len().max(1));
    let mut failure: Option<GenerationError> = None;

    std::thread::scope(|scope| {
        let (tx, rx) = mpsc::channel();
        for _ in 0..workers {
            let tx = tx.clone();
            let (pending, next, abort, calls) = (&pending, &next, &abort, &calls);
            scope.spawn(move || loop {
                if abort.load(Ordering::Relaxed) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(req) = pending.get(i) else { break };
                let result = request_one(provider, store, req, opts, calls);
                if tx.send(result).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        for result in rx {
            match result {
                Ok(outcome) => {
                    log::info!("{}: {:?}", outcome.region_code, outcome.status);
                    manifest.record(outcome);
                    if let Err(e) = manifest.save(manifest_path) {
                        abort.store(true, Ordering::Relaxed);
                        failure.get_or_insert(e);
                    }
                }
                Err(source) => {
                    abort.store(true, Ordering::Relaxed);
                    failure.get_or_insert(GenerationError::Io {
                        path: store.dir().display().to_string(),
                        source,
                    });
                }
            }
        }
    });

    if let Some(e) = failure {
        let _ = manifest.save(manifest_path);
        return Err(e);
    }
    if !manifest_path.exists() {
        manifest.save(manifest_path)?;
    }
    Ok(GenerationRun {
        manifest,
        provider_calls: calls.into_inner(),
        requested: pending.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::parse_region_table;
    use std::sync::Mutex;

    fn toy() -> RegionHierarchy {
        parse_region_table(
            "name,alpha-3,region,sub-region,intermediate-region,region-code,sub-region-code,intermediate-region-code\nAustria,AUT,Europe,Western Europe,,150,155,\n"
                .as_bytes(),
        )
        .unwrap()
    }

    fn opts() -> GenerationOptions {
        GenerationOptions {
            image_size: 16,
            retry: RetryPolicy::immediate(5),
            max_in_flight: 1,
            timestamps: Timestamps::Fixed("2024-01-01T00:00:00Z".into()),
        }
    }

    /// Fails transiently a fixed number of times per prompt, then delegates.
    struct Flaky {
        inner: SyntheticProvider,
        failures: usize,
        seen: Mutex<std::collections::HashMap<String, usize>>,
    }

    impl ImageProvider for Flaky {
        fn id(&self) -> String {
            self.inner.id()
        }
        fn seed(&self) -> Option<u64> {
            self.inner.seed()
        }
        fn generate(&self, prompt: &str, size: u32) -> Result<Vec<u8>, ProviderError> {
            let mut seen = self.seen.lock().unwrap();
            let n = seen.entry(prompt.to_owned()).or_default();
            *n += 1;
            if *n <= self.failures {
                return Err(ProviderError::Transient("503".into()));
            }
            self.inner.generate(prompt, size)
        }
    }

    #[test]
    fn backoff_schedule() {
        let p = RetryPolicy::default();
        let waits: Vec<_> = (1..5).map(|k| p.backoff(k).as_secs()).collect();
        assert_eq!(waits, [1, 2, 4, 8]);
    }

    #[test]
    fn transient_failures_are_retried() {
        let dir = tempfile::tempdir().unwrap();
        let store = ImageStore::open(dir.path().join("s")).unwrap();
        let provider = Flaky {
            inner: SyntheticProvider::new(1),
            failures: 2,
            seen: Mutex::default(),
        };
        let run = run_generation(&toy(), &provider, &store, &dir.path().join("m.json"), &opts()).unwrap();
        assert_eq!(run.manifest.tallies(), (4, 0, 0));
        assert_eq!(run.provider_calls, 12);
        assert!(run.manifest.outcomes.values().all(|o| o.attempts == 3));
    }

    #[test]
    fn exhausted_retries_record_failure_and_are_retried_next_run() {
        let dir = tempfile::tempdir().unwrap();
        let store = ImageStore::open(dir.path().join("s")).unwrap();
        let path = dir.path().join("m.json");
        let provider = Flaky {
            inner: SyntheticProvider::new(1),
            failures: 5,
            seen: Mutex::default(),
        };
        let run = run_generation(&toy(), &provider, &store, &path, &opts()).unwrap();
        assert_eq!(run.manifest.tallies(), (0, 0, 4));
        assert_eq!(run.provider_calls, 20);
        let failed = run.manifest.outcome("AUT").unwrap();
        assert!(failed.image_ref.is_none() && failed.failure_detail.is_some());

        let again = run_generation(&toy(), &provider, &store, &path, &opts()).unwrap();
        assert_eq!(again.requested, 4);
        assert_eq!(again.manifest.tallies(), (4, 0, 0));
    }

    #[test]
    fn wrong_size_is_a_failure() {
        struct Small;
        impl ImageProvider for Small {
            fn id(&self) -> String {
                "small".into()
            }
            fn generate(&self, prompt: &str, _: u32) -> Result<Vec<u8>, ProviderError> {
                SyntheticProvider::new(0).generate(prompt, 8)
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let store = ImageStore::open(dir.path().join("s")).unwrap();
        let run = run_generation(&toy(), &Small, &store, &dir.path().join("m.json"), &opts()).unwrap();
        assert_eq!(run.manifest.tallies(), (0, 0, 4));
        assert_eq!(run.provider_calls, 4);
    }

    #[test]
    fn manifest_from_other_provider_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let store = ImageStore::open(dir.path().join("s")).unwrap();
        let path = dir.path().join("m.json");
        run_generation(&toy(), &SyntheticProvider::new(1), &store, &path, &opts()).unwrap();
        let err = run_generation(&toy(), &SyntheticProvider::new(2), &store, &path, &opts()).unwrap_err();
        assert!(matches!(err, GenerationError::ManifestMismatch { .. }));
    }

    #[test]
    fn missing_store_file_is_regenerated() {
        let dir = tempfile::tempdir().unwrap();
        let store = ImageStore::open(dir.path().join("s")).unwrap();
        let path = dir.path().join("m.json");
        let provider = SyntheticProvider::new(3);
        let run = run_generation(&toy(), &provider, &store, &path, &opts()).unwrap();
        let r = run.manifest.outcome("AUT").unwrap().image_ref.clone().unwrap();
        std::fs::remove_file(store.path_of(&r)).unwrap();
        let again = run_generation(&toy(), &provider, &store, &path, &opts()).unwrap();
        assert_eq!(again.provider_calls, 1);
        assert_eq!(again.manifest, run.manifest);
    }

    #[test]
    fn parallel_requests_match_sequential() {
        let dir = tempfile::tempdir().unwrap();
        let store = ImageStore::open(dir.path().join("s")).unwrap();
        let seq = run_generation(&toy(), &SyntheticProvider::new(9), &store, &dir.path().join("a.json"), &opts()).unwrap();
        let par_opts = GenerationOptions { max_in_flight: 3, ..opts() };
        let par = run_generation(&toy(), &SyntheticProvider::new(9), &store, &dir.path().join("b.json"), &par_opts).unwrap();
        assert_eq!(seq.manifest.to_json(), par.manifest.to_json());
    }
}
