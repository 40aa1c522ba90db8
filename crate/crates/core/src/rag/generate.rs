use std::collections::HashMap;
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::Duration;

use thiserror::Error;
use tracing::{debug, warn};

use super::backend::{BackendError, LlmBackend};
use super::cache::{CacheKey, GenerationCache};
use super::prompt::{build_prompt, BlindnessGuard, PromptError, TemplateSet, DEFAULT_PROMPT_BUDGET};
use super::{GenerationKind, GenerationRequest, GenerationResult};
use crate::clock::Clock;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum GenerationError {
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("backend failed after {attempts} attempt(s): {last}")]
    Backend { attempts: u32, last: BackendError },
    #[error("backend returned an empty answer after {attempts} attempt(s)")]
    EmptyOutput { attempts: u32 },
}

impl GenerationError {
    /// Insufficient data is a property of the corpus, not a failure.
    pub fn is_insufficient_data(&self) -> bool {
        matches!(self, GenerationError::Prompt(PromptError::InsufficientData))
    }
}

/// Exponential backoff: attempt `n` (1-based) waits `base_delay * 2^(n-1)`
/// before the next one.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 4, base_delay: Duration::from_millis(500) }
    }
}

impl RetryPolicy {
    pub fn delay_after(&self, attempt: u32) -> Duration {
        self.base_delay.saturating_mul(1u32 << attempt.saturating_sub(1).min(16))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenerationSettings {
    pub prompt_budget: usize,
    pub retry: RetryPolicy,
    /// Simultaneous backend calls.
    pub parallelism: usize,
    /// Answers longer than this many times the expected length are cut.
    pub overlong_factor: usize,
}

impl Default for GenerationSettings {
    fn default() -> Self {
        GenerationSettings {
            prompt_budget: DEFAULT_PROMPT_BUDGET,
            retry: RetryPolicy::default(),
            parallelism: 4,
            overlong_factor: 4,
        }
    }
}

/// Expected answer length in characters.
pub fn expected_chars(kind: GenerationKind) -> usize {
    match kind {
        GenerationKind::Summary => 800,
        GenerationKind::Definition | GenerationKind::Alternatives => 400,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Generated {
    pub result: GenerationResult,
    /// No backend call was made for this caller.
    pub cache_hit: bool,
}

struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    fn new(n: usize) -> Self {
        Semaphore { free: Mutex::new(n.max(1)), cv: Condvar::new() }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Semaphore);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

type Outcome = Result<GenerationResult, GenerationError>;

#[derive(Default)]
struct Flight {
    outcome: Mutex<Option<Outcome>>,
    cv: Condvar,
}

impl Flight {
    fn wait(&self) -> Outcome {
        let mut slot = self.outcome.lock().unwrap();
        loop {
            if let Some(outcome) = slot.as_ref() {
                return outcome.clone();
            }
            slot = self.cv.wait(slot).unwrap();
        }
    }
}

/// Removes the in-flight entry and wakes waiters, also when the leader panics.
struct Landing<'a> {
    generator: &'a Generator,
    key: CacheKey,
    flight: Arc<Flight>,
    outcome: Option<Outcome>,
}

impl Drop for Landing<'_> {
    fn drop(&mut self) {
        let outcome = self.outcome.take().unwrap_or_else(|| {
            Err(GenerationError::Backend { attempts: 0, last: BackendError::Fatal("generation aborted".into()) })
        });
        self.generator.inflight.lock().unwrap().remove(&self.key);
        *self.flight.outcome.lock().unwrap() = Some(outcome);
        self.flight.cv.notify_all();
    }
}

/// Runs generation requests against a backend with bounded concurrency,
/// retries, an optional persistent cache, and coalescing of identical
/// concurrent requests.
pub struct Generator {
    backend: Arc<dyn LlmBackend>,
    templates: TemplateSet,
    guard: BlindnessGuard,
    cache: Option<GenerationCache>,
    settings: GenerationSettings,
    clock: Clock,
    permits: Semaphore,
    inflight: Mutex<HashMap<CacheKey, Arc<Flight>>>,
}

impl Generator {
    pub fn new(backend: Arc<dyn LlmBackend>, guard: BlindnessGuard) -> Generator {
        let settings = GenerationSettings::default();
        Generator {
            backend,
            templates: TemplateSet::builtin(),
            guard,
            cache: None,
            permits: Semaphore::new(settings.parallelism),
            settings,
            clock: Clock::System,
            inflight: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_templates(mut self, templates: TemplateSet) -> Self {
        self.templates = templates;
        self
    }

    pub fn with_cache(mut self, cache: GenerationCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_settings(mut self, settings: GenerationSettings) -> Self {
        self.permits = Semaphore::new(settings.parallelism);
        self.settings = settings;
        self
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn backend_id(&self) -> &str {
        self.backend.backend_id()
    }

    pub fn templates(&self) -> &TemplateSet {
        &self.templates
    }

    pub fn settings(&self) -> &GenerationSettings {
        &self.settings
    }

    pub fn cache(&self) -> Option<&GenerationCache> {
        self.cache.as_ref()
    }

    pub fn key(&self, request: &GenerationRequest) -> CacheKey {
        CacheKey::new(request, self.templates.version(), self.backend.backend_id())
    }

    /// Generates without consulting or filling the cache.
    pub fn generate(&self, request: &GenerationRequest) -> Outcome {
        let prompt = build_prompt(request, &self.templates, &self.guard, self.settings.prompt_budget)?;
        let (output, attempts) = self.call_with_retry(&prompt.text, request)?;
        let limit = expected_chars(request.kind) * self.settings.overlong_factor;
        let truncated = output.chars().count() > limit;
        let output = if truncated { output.chars().take(limit).collect() } else { output };
        Ok(GenerationResult {
            request: request.clone(),
            provenance: prompt.provenance(),
            prompt: prompt.text,
            output,
            truncated,
            backend_id: self.backend.backend_id().to_string(),
            template_version: self.templates.version().to_string(),
            attempt_count: attempts,
            created_at: self.clock.timestamp(),
        })
    }

    /// Cache-aware generation. Identical requests running at the same time
    /// share one backend call.
    pub fn cached_generate(&self, request: &GenerationRequest) -> Result<Generated, GenerationError> {
        let key = self.key(request);
        if let Some(result) = self.lookup(&key, request) {
            return Ok(Generated { result, cache_hit: true });
        }
        let (flight, leader) = {
            let mut inflight = self.inflight.lock().unwrap();
            match inflight.get(&key) {
                Some(f) => (f.clone(), false),
                None => {
                    let f = Arc::new(Flight::default());
                    inflight.insert(key.clone(), f.clone());
                    (f, true)
                }
            }
        };
        if !leader {
            debug!(key = key.as_str(), "joining in-flight generation");
            return flight.wait().map(|result| Generated { result, cache_hit: true });
        }

        let mut landing = Landing { generator: self, key: key.clone(), flight, outcome: None };
        // A previous leader may have finished between the lookup and the insert.
        if let Some(result) = self.lookup(&key, request) {
            landing.outcome = Some(Ok(result.clone()));
            return Ok(Generated { result, cache_hit: true });
        }
        let outcome = self.generate(request);
        if let (Ok(result), Some(cache)) = (&outcome, &self.cache) {
            if let Err(e) = cache.put(&key, result) {
                warn!(error = %e, "cannot write generation cache entry");
            }
        }
        landing.outcome = Some(outcome.clone());
        outcome.map(|result| Generated { result, cache_hit: false })
    }

    fn lookup(&self, key: &CacheKey, request: &GenerationRequest) -> Option<GenerationResult> {
        self.cache.as_ref()?.get(key, request)
    }

    fn call_with_retry(&self, prompt: &str, request: &GenerationRequest) -> Result<(String, u32), GenerationError> {
        let policy = self.settings.retry;
        let max = policy.max_attempts.max(1);
        let mut attempt = 0;
        loop {
            attempt += 1;
            let reply = {
                let _permit = self.permits.acquire();
                self.backend.complete(prompt, &request.model_id, request.seed)
            };
            match reply {
                Ok(text) if !text.trim().is_empty() => return Ok((text, attempt)),
                Ok(_) if attempt >= max => return Err(GenerationError::EmptyOutput { attempts: attempt }),
                Ok(_) => warn!(attempt, "backend returned an empty answer"),
                Err(e) if !e.is_transient() || attempt >= max => {
                    return Err(GenerationError::Backend { attempts: attempt, last: e });
                }
                Err(e) => warn!(attempt, error = %e, "backend call failed; retrying"),
            }
            thread::sleep(policy.delay_after(attempt));
        }
    }
}
