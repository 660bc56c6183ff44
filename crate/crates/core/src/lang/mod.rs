//! Text formats: models, expected environments, closures and JSON
//! documents.

mod document;
mod parse;

pub use document::{
    export_explanation, import_explanation, model_hash, DiagnosisKind, DiagnosisReport,
    DocumentMetadata, ExplanationDocument, FaultRecord, NodeRecord, PairRecord, QuestionRecord,
    SessionNodeRecord, SessionState, SessionView, TranscriptRecord,
};
pub use parse::{parse_expected, parse_model, print_model, render_closure};
