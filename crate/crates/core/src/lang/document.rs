//! JSON documents shared by the command line and the HTTP service:
//! explanation trees (`.expl`), diagnosis reports and session views.

use std::collections::HashSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnosis::{Answer, Diagnosis, DiagnosisSession, Fault, NodeStatus, Strategy};
use crate::error::{Error, Result};
use crate::indexical::OperatorId;
use crate::lang::parse::print_model;
use crate::model::{Csp, Universe, ValuePair};
use crate::propagate::{ExplanationTree, Program, Schedule};

/// Hex SHA-256 of the canonical printed form of `csp`.
pub fn model_hash(csp: &Csp) -> String {
    let digest = Sha256::digest(print_model(csp).as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairRecord {
    pub var: String,
    pub value: i64,
    /// `(X,v)`.
    pub label: String,
}

impl PairRecord {
    pub fn new(universe: &Universe, pair: ValuePair) -> Self {
        PairRecord {
            var: universe.name(pair.var).to_string(),
            value: pair.value,
            label: universe.show(pair),
        }
    }

    pub fn resolve(&self, universe: &Universe) -> Result<ValuePair> {
        let var = universe.resolve(&self.var)?;
        let pair = ValuePair::new(var, self.value);
        universe.check(pair)?;
        Ok(pair)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: usize,
    pub var: String,
    pub value: i64,
    /// Position of the removal in the computation; absent for pairs that
    /// were missing from the starting environment.
    pub seq: Option<usize>,
    pub operator: Option<usize>,
    pub constraint: Option<String>,
    /// The deduction rule, rendered.
    pub rule: Option<String>,
    pub children: Vec<usize>,
    /// The children of this node were cut off by the size cap.
    #[serde(default)]
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentMetadata {
    pub model_hash: String,
    /// Seed of the shuffled schedule; absent for FIFO.
    pub schedule_seed: Option<u64>,
}

impl DocumentMetadata {
    pub fn new(csp: &Csp, schedule: Schedule) -> Self {
        DocumentMetadata {
            model_hash: model_hash(csp),
            schedule_seed: schedule.seed(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplanationDocument {
    pub root: usize,
    /// Nodes in preorder; `id` is the index in this list.
    pub nodes: Vec<NodeRecord>,
    pub metadata: DocumentMetadata,
}

impl ExplanationDocument {
    pub fn root_node(&self) -> &NodeRecord {
        &self.nodes[self.root]
    }

    pub fn is_truncated(&self) -> bool {
        self.nodes.iter().any(|n| n.truncated)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Document(e.to_string()))
    }
}

pub fn export_explanation(
    tree: &ExplanationTree,
    universe: &Universe,
    metadata: DocumentMetadata,
) -> ExplanationDocument {
    fn walk(tree: &ExplanationTree, universe: &Universe, nodes: &mut Vec<NodeRecord>) -> usize {
        let id = nodes.len();
        nodes.push(NodeRecord {
            id,
            var: universe.name(tree.root.var).to_string(),
            value: tree.root.value,
            seq: tree.seq,
            operator: tree.rule.as_ref().map(|r| r.operator.0),
            constraint: tree.rule.as_ref().map(|r| r.constraint_label.to_string()),
            rule: tree.rule.as_ref().map(|r| r.display(universe).to_string()),
            children: Vec::new(),
            truncated: tree.truncated,
        });
        let children = tree
            .children
            .iter()
            .map(|c| walk(c, universe, nodes))
            .collect();
        nodes[id].children = children;
        id
    }
    let mut nodes = Vec::with_capacity(tree.len());
    let root = walk(tree, universe, &mut nodes);
    ExplanationDocument {
        root,
        nodes,
        metadata,
    }
}

/// Rebuilds a tree from a document, resolving every rule in `program`.
/// Fails unless the document describes a tree whose nodes are valid proof
/// steps of `program`.
pub fn import_explanation(doc: &ExplanationDocument, program: &Program) -> Result<ExplanationTree> {
    let bad = |msg: String| Error::Document(msg);
    if doc.root >= doc.nodes.len() {
        return Err(bad(format!("root {} does not name a node", doc.root)));
    }
    for (i, n) in doc.nodes.iter().enumerate() {
        if n.id != i {
            return Err(bad(format!("node at position {i} has id {}", n.id)));
        }
        if let Some(&c) = n.children.iter().find(|&&c| c >= doc.nodes.len()) {
            return Err(bad(format!("node {i} has unknown child {c}")));
        }
    }
    let mut visited = HashSet::new();
    let tree = import_node(doc, program, doc.root, &mut visited)?;
    if visited.len() != doc.nodes.len() {
        return Err(bad("some nodes are unreachable from the root".into()));
    }
    if !tree.is_valid_proof(program) {
        return Err(bad("the tree is not a valid proof for this model".into()));
    }
    Ok(tree)
}

fn import_node(
    doc: &ExplanationDocument,
    program: &Program,
    id: usize,
    visited: &mut HashSet<usize>,
) -> Result<ExplanationTree> {
    if !visited.insert(id) {
        return Err(Error::Document(format!("node {id} is reachable twice")));
    }
    let rec = &doc.nodes[id];
    let universe = program.universe();
    let root = PairRecord {
        var: rec.var.clone(),
        value: rec.value,
        label: String::new(),
    }
    .resolve(universe)
    .map_err(|e| Error::Document(format!("node {id}: {e}")))?;
    let rule = match rec.operator {
        None => None,
        Some(op) => {
            if op >= program.operators().len() {
                return Err(Error::Document(format!("node {id}: unknown operator {op}")));
            }
            let rule = program.rule(OperatorId(op), root).ok_or_else(|| {
                Error::Document(format!("node {id}: operator {op} has no rule for {}", universe.show(root)))
            })?;
            Some(Arc::clone(rule))
        }
    };
    let children = rec
        .children
        .iter()
        .map(|&c| import_node(doc, program, c, visited))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExplanationTree {
        root,
        rule,
        seq: rec.seq,
        children,
        truncated: rec.truncated,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub node: usize,
    pub pair: PairRecord,
    /// The question as put to the user.
    pub sentence: String,
}

impl QuestionRecord {
    pub fn new(universe: &Universe, node: usize, pair: ValuePair) -> Self {
        QuestionRecord {
            node,
            pair: PairRecord::new(universe, pair),
            sentence: crate::diagnosis::question_sentence(universe, pair),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub pair: PairRecord,
    pub answer: Answer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultRecord {
    pub minimal_symptom: PairRecord,
    pub rule: String,
    pub operator_id: usize,
    /// The operator in `X in r` form.
    pub operator: String,
    pub constraint: String,
}

impl FaultRecord {
    pub fn new(program: &Program, fault: &Fault) -> Self {
        let u = program.universe();
        FaultRecord {
            minimal_symptom: PairRecord::new(u, fault.minimal_symptom),
            rule: fault.rule.display(u).to_string(),
            operator_id: fault.operator().0,
            operator: program.operator(fault.operator()).render(u),
            constraint: fault.constraint_label().to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiagnosisKind {
    Located,
    Candidates,
}

/// Outcome of a finished session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagnosisReport {
    pub kind: DiagnosisKind,
    /// The located fault, or every candidate.
    pub faults: Vec<FaultRecord>,
    pub symptom: PairRecord,
    pub strategy: Strategy,
    pub transcript: Vec<TranscriptRecord>,
}

impl DiagnosisReport {
    pub fn new(program: &Program, session: &DiagnosisSession, diagnosis: &Diagnosis) -> Self {
        let u = program.universe();
        DiagnosisReport {
            kind: match diagnosis {
                Diagnosis::Located(_) => DiagnosisKind::Located,
                Diagnosis::Candidates(_) => DiagnosisKind::Candidates,
            },
            faults: diagnosis
                .faults()
                .iter()
                .map(|f| FaultRecord::new(program, f))
                .collect(),
            symptom: PairRecord::new(u, session.nodes()[0].pair),
            strategy: session.strategy(),
            transcript: transcript(u, session),
        }
    }
}

fn transcript(universe: &Universe, session: &DiagnosisSession) -> Vec<TranscriptRecord> {
    session
        .transcript()
        .iter()
        .map(|e| TranscriptRecord {
            pair: PairRecord::new(universe, e.pair),
            answer: e.answer,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionNodeRecord {
    pub id: usize,
    pub pair: PairRecord,
    pub constraint: Option<String>,
    pub rule: Option<String>,
    pub children: Vec<usize>,
    pub status: NodeStatus,
    /// Excluded from the search by a `NO` answer at or above this node.
    pub pruned: bool,
    pub truncated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SessionState {
    QuestionPending,
    Done,
}

/// Snapshot of a session: state, pending question, tree with statuses and,
/// once done, the report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionView {
    pub state: SessionState,
    pub strategy: Strategy,
    pub question: Option<QuestionRecord>,
    /// Root of the region still searched.
    pub candidate: usize,
    pub nodes: Vec<SessionNodeRecord>,
    pub transcript: Vec<TranscriptRecord>,
    pub diagnosis: Option<DiagnosisReport>,
}

impl SessionView {
    pub fn new(program: &Program, session: &DiagnosisSession) -> Self {
        let u = program.universe();
        let nodes = session
            .nodes()
            .iter()
            .enumerate()
            .map(|(id, n)| SessionNodeRecord {
                id,
                pair: PairRecord::new(u, n.pair),
                constraint: n.rule.as_ref().map(|r| r.constraint_label.to_string()),
                rule: n.rule.as_ref().map(|r| r.display(u).to_string()),
                children: n.children.clone(),
                status: session.status(id),
                pruned: session.is_pruned(id),
                truncated: n.truncated,
            })
            .collect();
        let diagnosis = session
            .result()
            .ok()
            .map(|d| DiagnosisReport::new(program, session, &d));
        SessionView {
            state: if session.is_done() {
                SessionState::Done
            } else {
                SessionState::QuestionPending
            },
            strategy: session.strategy(),
            question: session
                .pending_node()
                .map(|n| QuestionRecord::new(u, n, session.nodes()[n].pair)),
            candidate: session.candidate(),
            nodes,
            transcript: transcript(u, session),
            diagnosis,
        }
    }
}
