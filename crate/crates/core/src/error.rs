use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate docid `{0}` in corpus")]
    DuplicateDocId(String),

    #[error("unknown docid `{0}`")]
    UnknownDocId(String),

    #[error("empty query for topic `{0}`")]
    EmptyQuery(String),

    #[error("invalid ranked list for topic `{qid}`: {reason}")]
    InvalidRankedList { qid: String, reason: String },

    #[error("topic `{qid}`: ranked list has {len} hits, need more than {positives} for pseudo-labels")]
    ListTooShort {
        qid: String,
        len: usize,
        positives: usize,
    },

    #[error("feedback scores for topic `{0}` sum to zero, cannot normalize")]
    ZeroFeedbackMass(String),

    #[error("negative retrieval score in feedback window of topic `{0}`")]
    NegativeFeedbackScore(String),

    #[error("docid `{0}` appears in both pseudo-positive and pseudo-negative sets")]
    OverlappingLabels(String),

    #[error("training set contains a single class")]
    SingleClass,

    #[error("score lists have mismatched lengths: {expected} vs {got}")]
    ScoreLengthMismatch { expected: usize, got: usize },

    #[error("no classifier score for docid `{docid}` of topic `{qid}`")]
    MissingClassifierScore { qid: String, docid: String },

    #[error("cannot normalize an empty score list")]
    EmptyScores,

    #[error("no evaluable topics (every topic lacks relevant judgments)")]
    NoEvaluableTopics,

    #[error("need at least {needed} paired topics, got {got}")]
    TooFewTopics { needed: usize, got: usize },

    #[error("runs are not permutations of each other for topic `{qid}`: {reason}")]
    NotAPermutation { qid: String, reason: String },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("{file}:{line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },

    #[error("corrupt index snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
