use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("unknown letter `{0}`")]
    UnknownLetter(String),
    #[error("unknown terminal `{0}`")]
    UnknownTerminal(String),
    #[error("letter `{0}` appears in more than one class")]
    DuplicateLetter(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("alphabet has no mark pairing")]
    NoMarks,
    #[error("index {index} out of range for width {width}")]
    IndexOutOfRange { index: usize, width: usize },
    #[error("head type is not a class: {0}")]
    NotClassHead(String),
    #[error("pda is not normalized: {0}")]
    NotNormalized(String),
    #[error("pda is not bi-rooted: {0}")]
    NotBirooted(String),
    #[error("label `{0}` already used")]
    LabelClash(String),
    #[error("unmapped label `{0}`")]
    UnmappedLabel(String),
    #[error("graph contains truncated vertices")]
    Truncated,
    #[error("rule {rule}: {msg}")]
    Rule { rule: String, msg: String },
    #[error("invalid certificate: {0}")]
    Certificate(String),
    #[error("malformed system: {0}")]
    System(String),
    #[error("marked letters not allowed here")]
    Marked,
    #[error("{0}")]
    Input(String),
}

impl Error {
    pub(crate) fn parse(line: usize, col: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, col, msg: msg.into() }
    }

    pub(crate) fn rule(rule: impl std::fmt::Display, msg: impl Into<String>) -> Self {
        Error::Rule { rule: rule.to_string(), msg: msg.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
