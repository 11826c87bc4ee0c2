use thiserror::Error;

/// Default edge length of generated square images.
pub const DEFAULT_IMAGE_SIZE: u32 = 1024;

/// Why a provider call did not yield an image.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ProviderError {
    /// Refused by the provider's content policy. Terminal for the region.
    #[error("rejected: {0}")]
    Rejected(String),
    /// Worth retrying (rate limit, timeout, server error).
    #[error("transient failure: {0}")]
    Transient(String),
    /// Not worth retrying (bad credentials, malformed response).
    #[error("failure: {0}")]
    Fatal(String),
    #[error("invalid request: {0}")]
    Precondition(String),
}

/// A text-to-image backend.
///
/// Every call is independent: implementations must not carry conversation
/// state or context from one prompt to the next.
pub trait ImageProvider: Send + Sync {
    /// Stable identifier recorded in the manifest.
    fn id(&self) -> String;

    /// Seed of a deterministic provider, if any.
    fn seed(&self) -> Option<u64> {
        None
    }

    /// Renders `prompt` as a `size`×`size` PNG.
    fn generate(&self, prompt: &str, size: u32) -> Result<Vec<u8>, ProviderError>;
}

pub(crate) fn check_request(prompt: &str, size: u32) -> Result<(), ProviderError> {
    if prompt.trim().is_empty() {
        return Err(ProviderError::Precondition("empty prompt".into()));
    }
    if size == 0 {
        return Err(ProviderError::Precondition("image size must be positive".into()));
    }
    Ok(())
}

/// One image request for one region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerationRequest {
    pub region_code: String,
    pub prompt: String,
    pub size: u32,
}
