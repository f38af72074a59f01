//! Expression language: tokens, vocabularies, trees, the fixed-length action
//! encoding, evaluation on grids and fingerprint equivalence.

mod eval;
mod expr;
mod fingerprint;
mod parse;
mod template;
mod token;
mod vocab;

pub use eval::{evaluate, Evaluator, DIVISION_GUARD};
pub use expr::Expr;
pub use fingerprint::{
    equivalent, fingerprint, Fingerprint, ProbeSet, TargetMatcher, DEFAULT_EQUIVALENCE_TOL,
    DEFAULT_PROBE_COUNT, DEFAULT_PROBE_SEED, DEFAULT_SAMPLE_POINTS,
};
pub use parse::parse_expr;
pub use template::{
    template_depth, Decoded, Slot, SlotRole, SlotTemplate, TemplateDescription, TemplateLimits,
};
pub use token::{BinaryOp, Constant, Operand, Token, TokenKind, UnaryOp};
pub use vocab::{build_vocabulary, Vocabulary, VocabularyConfig, MAX_CONSTANT};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DslError {
    #[error("vocabulary configuration: {0}")]
    Config(String),
    #[error("unknown token `{0}`")]
    UnknownToken(String),
    #[error("decode: {0}")]
    Decode(String),
    #[error("not representable in the template: {0}")]
    Unrepresentable(String),
    #[error("parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },
}
