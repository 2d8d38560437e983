use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, found {text:?}")]
    Syntax { line: usize, text: String },
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("bad value {value:?} for `{key}`")]
    BadValue { key: String, value: String },
    #[error("unknown mutation `{0}` (expected none, drop-lock or drop-signal)")]
    UnknownMutation(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Misuse of the model API. These never occur during a correct exploration.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("transition {stmt} of process {owner} is not enabled")]
    Disabled { owner: u8, stmt: u16 },
    #[error("unknown statement {0}")]
    UnknownStatement(u16),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("encoded state has length {found}, expected {expected}")]
    Length { expected: usize, found: usize },
    #[error("field `{0}` holds an out-of-range value")]
    Field(&'static str),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TraceError {
    #[error("step {step}: transition is not enabled in the replayed state")]
    NotEnabled { step: usize },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LtlError {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown proposition `{0}`")]
    UnknownProposition(String),
    #[error("formula uses {0} propositions, at most 32 are supported")]
    TooManyPropositions(usize),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PropertyFileError {
    #[error("line {line}: expected `name: formula`")]
    Syntax { line: usize },
    #[error("line {line}: {source}")]
    Formula { line: usize, source: LtlError },
    #[error("duplicate property `{0}`")]
    Duplicate(String),
    #[error("no property named `{0}`")]
    Unknown(String),
}
