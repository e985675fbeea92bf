//! Recognition and student-support prompt assembly, and a record/replay
//! gateway to an LLM HTTP endpoint.
//!
//! HTTP itself is behind the [`Transport`] trait; replay mode never touches it.

mod exchange;
mod gateway;
mod prompt;

pub use exchange::{ExchangeRecord, ExchangeRequest, FixtureStore};
pub use gateway::{
    EndpointConfig, Gateway, Mode, OfflineTransport, ProviderAdapter, Transport, TransportError, DEFAULT_CREDENTIAL_ENV,
};
pub use prompt::{assemble_prompt, parse_sections, PromptTemplate, Section, TemplateId};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LlmError {
    #[error("unknown prompt template {0:?}")]
    UnknownTemplate(String),
    #[error("template {template} has no section {section:?}")]
    UnknownSection { template: String, section: String },
    #[error("endpoint unreachable: {0}")]
    EndpointUnreachable(String),
    #[error("no recorded exchange for request digest {0}")]
    FixtureMissing(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("credential environment variable {0} is not set")]
    MissingCredential(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}
