//! Missing-answer diagnosis: symptoms, erroneous rules and the interactive
//! search for a minimal symptom in an explanation tree.
//!
//! A session asks the oracle whether removed pairs should have been kept.
//! `Yes` means the pair is expected, so its removal is a symptom; the search
//! then descends into that node. `No` means the removal is justified and the
//! whole subtree below it is pruned. `Unknown` leaves the node unresolved.
//! The session ends on a node whose children are all justified removals: its
//! rule removed an expected value from removed, unexpected ones, which makes
//! it erroneous.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::indexical::{DeductionRule, OperatorId};
use crate::model::{Environment, Universe, ValuePair};
use crate::propagate::{inconsistent_operators, Closure, ExplanationTree, Program};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Expectation {
    Expected,
    NotExpected,
    Unknown,
}

/// Three-valued knowledge of the expected environment. Statuses only move
/// from `Unknown` to a definite value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpectedEnv {
    universe: Arc<Universe>,
    status: Vec<Expectation>,
}

impl ExpectedEnv {
    pub fn unknown(universe: &Arc<Universe>) -> Self {
        ExpectedEnv {
            universe: Arc::clone(universe),
            status: vec![Expectation::Unknown; universe.size()],
        }
    }

    /// Pairs in `d` are expected, all others are not.
    pub fn from_environment(d: &Environment) -> Self {
        let universe = d.universe();
        let status = (0..universe.size())
            .map(|flat| {
                if d.contains(universe.pair_at(flat)) {
                    Expectation::Expected
                } else {
                    Expectation::NotExpected
                }
            })
            .collect();
        ExpectedEnv {
            universe: Arc::clone(universe),
            status,
        }
    }

    pub fn get(&self, pair: ValuePair) -> Expectation {
        self.universe
            .flat_index(pair)
            .map_or(Expectation::Unknown, |i| self.status[i])
    }

    pub fn set(&mut self, pair: ValuePair, status: Expectation) -> Result<()> {
        let i = self.universe.check(pair).map(|_| self.universe.flat_index(pair).unwrap())?;
        match (self.status[i], status) {
            (_, Expectation::Unknown) => Ok(()),
            (Expectation::Unknown, s) => {
                self.status[i] = s;
                Ok(())
            }
            (old, new) if old == new => Ok(()),
            _ => Err(Error::ExpectationConflict(self.universe.show(pair))),
        }
    }

    /// The definitely expected pairs.
    pub fn expected(&self) -> Environment {
        let mut env = Environment::empty(&self.universe);
        for (flat, s) in self.status.iter().enumerate() {
            if *s == Expectation::Expected {
                env.insert(self.universe.pair_at(flat)).expect("in universe");
            }
        }
        env
    }
}

/// Expected pairs missing from the closure, ordered by variable then value.
pub fn find_symptoms(closure: &Closure, expected: &ExpectedEnv) -> Vec<ValuePair> {
    expected
        .expected()
        .difference(closure.final_env())
        .pairs()
        .collect()
}

/// Operators `r` of `program` with `d ⊄ r(d)`.
pub fn erroneous_operators(program: &Program, d: &Environment) -> Vec<OperatorId> {
    inconsistent_operators(program, d)
}

/// `h ← B` is erroneous for `d` when `h ∈ d` and `B ∩ d = ∅`.
pub fn verify_erroneous(rule: &DeductionRule, d: &Environment) -> bool {
    d.contains(rule.head) && rule.body.iter().all(|&b| !d.contains(b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Answer {
    Yes,
    No,
    Unknown,
}

impl Answer {
    pub fn as_str(self) -> &'static str {
        match self {
            Answer::Yes => "YES",
            Answer::No => "NO",
            Answer::Unknown => "UNKNOWN",
        }
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Answer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "yes" | "y" => Ok(Answer::Yes),
            "no" | "n" => Ok(Answer::No),
            "unknown" | "u" | "?" | "dont-know" => Ok(Answer::Unknown),
            other => Err(format!("expected YES, NO or UNKNOWN, got `{other}`")),
        }
    }
}

/// An oracle answering from a fixed expected environment.
pub fn scripted_oracle(d: Environment) -> impl Fn(ValuePair) -> Answer {
    move |pair| if d.contains(pair) { Answer::Yes } else { Answer::No }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Strategy {
    /// Ask the node splitting the remaining candidate region in half.
    #[default]
    #[serde(rename = "dac")]
    DivideAndConquer,
    /// Ask the children of the current candidate first, breadth first.
    #[serde(rename = "topdown")]
    TopDown,
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "dac" | "divide-and-conquer" => Ok(Strategy::DivideAndConquer),
            "topdown" | "top-down" => Ok(Strategy::TopDown),
            other => Err(format!("unknown strategy `{other}` (use dac or topdown)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeStatus {
    Symptom,
    NotSymptom,
    Unknown,
    Untested,
}

/// A node of the session's flattened tree. Nodes are stored in preorder;
/// the subtree of node `n` is `n..end`.
#[derive(Debug, Clone)]
pub struct SessionNode {
    pub pair: ValuePair,
    pub rule: Option<Arc<DeductionRule>>,
    pub seq: Option<usize>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub end: usize,
    pub truncated: bool,
}

/// The culprit found by a session: a minimal symptom and the rule that
/// removed it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fault {
    pub minimal_symptom: ValuePair,
    pub rule: Arc<DeductionRule>,
}

impl Fault {
    pub fn operator(&self) -> OperatorId {
        self.rule.operator
    }

    pub fn constraint_label(&self) -> &str {
        &self.rule.constraint_label
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Diagnosis {
    /// Every child of the minimal symptom was answered as a justified
    /// removal.
    Located(Fault),
    /// Unanswered questions left several nodes that may be minimal
    /// symptoms. Never empty.
    Candidates(Vec<Fault>),
}

impl Diagnosis {
    pub fn faults(&self) -> &[Fault] {
        match self {
            Diagnosis::Located(f) => std::slice::from_ref(f),
            Diagnosis::Candidates(fs) => fs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub pair: ValuePair,
    pub answer: Answer,
}

/// What happened after an answer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Progress {
    Question(ValuePair),
    Done,
}

/// An oracle-driven walk of one explanation tree.
#[derive(Debug, Clone)]
pub struct DiagnosisSession {
    universe: Arc<Universe>,
    nodes: Vec<SessionNode>,
    strategy: Strategy,
    answers: HashMap<ValuePair, Answer>,
    pruned: Vec<bool>,
    candidate: usize,
    pending: Option<usize>,
    transcript: Vec<TranscriptEntry>,
}

impl DiagnosisSession {
    /// Starts a session on a tree whose root the user reports as a symptom.
    pub fn new(universe: &Arc<Universe>, tree: &ExplanationTree, strategy: Strategy) -> Result<Self> {
        Self::with_knowledge(universe, tree, strategy, None)
    }

    /// Starts a session, checking the root against prior knowledge of the
    /// expected environment. Only an `Expected` root is accepted.
    pub fn with_expected(
        tree: &ExplanationTree,
        strategy: Strategy,
        expected: &ExpectedEnv,
    ) -> Result<Self> {
        let universe = Arc::clone(&expected.universe);
        Self::with_knowledge(&universe, tree, strategy, Some(expected))
    }

    fn with_knowledge(
        universe: &Arc<Universe>,
        tree: &ExplanationTree,
        strategy: Strategy,
        expected: Option<&ExpectedEnv>,
    ) -> Result<Self> {
        let root_ok = tree.rule.is_some()
            && expected.is_none_or(|e| e.get(tree.root) == Expectation::Expected);
        if !root_ok {
            return Err(Error::NotASymptom(universe.show(tree.root)));
        }
        let mut nodes = Vec::with_capacity(tree.len());
        flatten(tree, None, &mut nodes);
        let mut answers = HashMap::new();
        answers.insert(tree.root, Answer::Yes);
        let mut session = DiagnosisSession {
            universe: Arc::clone(universe),
            pruned: vec![false; nodes.len()],
            nodes,
            strategy,
            answers,
            candidate: 0,
            pending: None,
            transcript: Vec::new(),
        };
        session.settle();
        Ok(session)
    }

    pub fn universe(&self) -> &Arc<Universe> {
        &self.universe
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn nodes(&self) -> &[SessionNode] {
        &self.nodes
    }

    /// Index of the root of the current candidate subtree.
    pub fn candidate(&self) -> usize {
        self.candidate
    }

    pub fn transcript(&self) -> &[TranscriptEntry] {
        &self.transcript
    }

    pub fn is_done(&self) -> bool {
        self.pending.is_none()
    }

    /// The pending question, or `None` once the session is done.
    pub fn pending(&self) -> Option<ValuePair> {
        self.pending.map(|n| self.nodes[n].pair)
    }

    pub fn pending_node(&self) -> Option<usize> {
        self.pending
    }

    pub fn next_question(&self) -> Result<ValuePair> {
        self.pending().ok_or(Error::SessionDone)
    }

    /// Status of node `n`, derived from the answers about its pair and the
    /// pruning caused by `No` answers above it.
    pub fn status(&self, n: usize) -> NodeStatus {
        let node = &self.nodes[n];
        match self.answers.get(&node.pair) {
            Some(Answer::Yes) => NodeStatus::Symptom,
            Some(Answer::No) => NodeStatus::NotSymptom,
            Some(Answer::Unknown) => NodeStatus::Unknown,
            None if self.pruned[n] || node.rule.is_none() => NodeStatus::NotSymptom,
            None => NodeStatus::Untested,
        }
    }

    pub fn is_pruned(&self, n: usize) -> bool {
        self.pruned[n]
    }

    pub fn answer(&mut self, pair: ValuePair, answer: Answer) -> Result<Progress> {
        let pending = self.pending.ok_or(Error::SessionDone)?;
        let expected = self.nodes[pending].pair;
        if pair != expected {
            return Err(Error::StaleQuestion {
                expected: self.universe.show(expected),
                got: self.universe.show(pair),
            });
        }
        self.answers.insert(pair, answer);
        self.transcript.push(TranscriptEntry { pair, answer });
        self.settle();
        Ok(match self.pending() {
            Some(q) => Progress::Question(q),
            None => Progress::Done,
        })
    }

    /// Answers questions from `oracle` until done.
    pub fn run(&mut self, oracle: impl Fn(ValuePair) -> Answer) -> Result<Diagnosis> {
        while let Some(q) = self.pending() {
            self.answer(q, oracle(q))?;
        }
        self.result()
    }

    pub fn result(&self) -> Result<Diagnosis> {
        if !self.is_done() {
            return Err(Error::SessionNotDone);
        }
        let c = self.candidate;
        let root = &self.nodes[c];
        let children_justified = !root.truncated
            && root
                .children
                .iter()
                .all(|&ch| self.status(ch) == NodeStatus::NotSymptom);
        if children_justified {
            return Ok(Diagnosis::Located(self.fault(c)));
        }
        let mut seen = std::collections::HashSet::new();
        let mut faults = Vec::new();
        for n in self.live(c) {
            let may_be_symptom = matches!(self.status(n), NodeStatus::Symptom | NodeStatus::Unknown);
            let no_symptom_child = self.nodes[n]
                .children
                .iter()
                .all(|&ch| self.status(ch) != NodeStatus::Symptom);
            if may_be_symptom && no_symptom_child && self.nodes[n].rule.is_some() {
                let fault = self.fault(n);
                if seen.insert((fault.rule.operator, fault.minimal_symptom)) {
                    faults.push(fault);
                }
            }
        }
        Ok(Diagnosis::Candidates(faults))
    }

    fn fault(&self, n: usize) -> Fault {
        let node = &self.nodes[n];
        Fault {
            minimal_symptom: node.pair,
            rule: Arc::clone(node.rule.as_ref().expect("candidate nodes carry rules")),
        }
    }

    /// Non-pruned nodes of the subtree of `n`, in preorder.
    fn live(&self, n: usize) -> impl Iterator<Item = usize> + '_ {
        (n..self.nodes[n].end).filter(move |&i| !self.pruned[i])
    }

    fn askable(&self, n: usize) -> bool {
        n != self.candidate
            && !self.pruned[n]
            && self.nodes[n].rule.is_some()
            && !self.answers.contains_key(&self.nodes[n].pair)
    }

    /// Applies answers to pruning and narrowing, then picks the next
    /// question.
    fn settle(&mut self) {
        loop {
            let c = self.candidate;
            for n in c + 1..self.nodes[c].end {
                if !self.pruned[n] && self.answers.get(&self.nodes[n].pair) == Some(&Answer::No) {
                    let end = self.nodes[n].end;
                    self.pruned[n..end].iter_mut().for_each(|p| *p = true);
                }
            }
            let deeper = (c + 1..self.nodes[c].end).find(|&n| {
                !self.pruned[n] && self.answers.get(&self.nodes[n].pair) == Some(&Answer::Yes)
            });
            match deeper {
                Some(n) => self.candidate = n,
                None => break,
            }
        }
        self.pending = match self.strategy {
            Strategy::DivideAndConquer => self.select_half(),
            Strategy::TopDown => self.select_top_down(),
        };
    }

    fn select_half(&self) -> Option<usize> {
        let c = self.candidate;
        let total = self.live(c).count() as i64;
        self.live(c)
            .filter(|&n| self.askable(n))
            .min_by_key(|&n| {
                let size = self.live(n).count() as i64;
                (
                    (2 * size - total).abs(),
                    size,
                    self.nodes[n].seq.unwrap_or(usize::MAX),
                    n,
                )
            })
    }

    fn select_top_down(&self) -> Option<usize> {
        let mut frontier = std::collections::VecDeque::from([self.candidate]);
        while let Some(n) = frontier.pop_front() {
            if self.askable(n) {
                return Some(n);
            }
            frontier.extend(self.nodes[n].children.iter().filter(|&&ch| !self.pruned[ch]));
        }
        None
    }
}

fn flatten(tree: &ExplanationTree, parent: Option<usize>, out: &mut Vec<SessionNode>) -> usize {
    let me = out.len();
    out.push(SessionNode {
        pair: tree.root,
        rule: tree.rule.clone(),
        seq: tree.seq,
        parent,
        children: Vec::with_capacity(tree.children.len()),
        end: me + 1,
        truncated: tree.truncated,
    });
    for child in &tree.children {
        let id = flatten(child, Some(me), out);
        out[me].children.push(id);
    }
    out[me].end = out.len();
    me
}

/// The question put to the oracle about `pair`.
pub fn question_sentence(universe: &Universe, pair: ValuePair) -> String {
    format!("Is {} expected to be kept?", universe.show(pair))
}
