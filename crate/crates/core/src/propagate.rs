//! Chaotic iteration to the downward closure, recording one deduction rule
//! per removed value so that every removal can be expanded into a proof tree.

use std::collections::VecDeque;
use std::sync::Arc;

use fixedbitset::FixedBitSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::indexical::{compile_constraint, DeductionRule, Operator, OperatorId};
use crate::model::{ConstraintId, Csp, Environment, Universe, ValuePair, VarId};

/// Default node budget when expanding an explanation into a tree.
pub const DEFAULT_TREE_CAP: usize = 1_000_000;

/// A set of operators with their canonical rules and a wake-up index.
#[derive(Debug, Clone)]
pub struct Program {
    universe: Arc<Universe>,
    operators: Vec<Operator>,
    /// `rules[op][i]`: the rule of `op` whose head is the i-th value of its
    /// output variable.
    rules: Vec<Vec<Option<Arc<DeductionRule>>>>,
    wake: Vec<Vec<OperatorId>>,
}

impl Program {
    /// Compiles every constraint of `csp`, in order.
    pub fn compile(csp: &Csp) -> Result<Program> {
        let mut operators = Vec::new();
        for (i, c) in csp.constraints().iter().enumerate() {
            let first = OperatorId(operators.len());
            operators.extend(compile_constraint(c, ConstraintId(i), first)?);
        }
        Ok(Program::from_operators(Arc::clone(csp.universe()), operators))
    }

    /// Builds a program from arbitrary operators; ids are reassigned densely
    /// in the given order.
    pub fn from_operators(universe: Arc<Universe>, mut operators: Vec<Operator>) -> Program {
        let mut wake = vec![Vec::new(); universe.len()];
        let mut rules = Vec::with_capacity(operators.len());
        for (i, op) in operators.iter_mut().enumerate() {
            op.id = OperatorId(i);
            for dep in op.deps() {
                wake[dep.index()].push(op.id);
            }
            let output = universe.var(op.output);
            let mut by_head = vec![None; output.len()];
            for rule in op.rules(&universe) {
                let i = output.index_of(rule.head.value).expect("head in domain");
                by_head[i] = Some(Arc::new(rule));
            }
            rules.push(by_head);
        }
        Program {
            universe,
            operators,
            rules,
            wake,
        }
    }

    pub fn universe(&self) -> &Arc<Universe> {
        &self.universe
    }

    pub fn operators(&self) -> &[Operator] {
        &self.operators
    }

    pub fn operator(&self, id: OperatorId) -> &Operator {
        &self.operators[id.0]
    }

    /// Operators to re-run when `var` loses a value.
    pub fn woken_by(&self, var: VarId) -> &[OperatorId] {
        &self.wake[var.index()]
    }

    /// The rule of `op` concluding `head`, if any.
    pub fn rule(&self, op: OperatorId, head: ValuePair) -> Option<&Arc<DeductionRule>> {
        let op_rules = self.rules.get(op.0)?;
        if self.operators[op.0].output != head.var {
            return None;
        }
        let i = self.universe.var(head.var).index_of(head.value)?;
        op_rules[i].as_ref()
    }

    pub fn rules_of(&self, op: OperatorId) -> impl Iterator<Item = &DeductionRule> {
        self.rules[op.0].iter().flatten().map(|r| r.as_ref())
    }

    /// Every rule of every operator.
    pub fn all_rules(&self) -> impl Iterator<Item = &DeductionRule> {
        self.rules.iter().flatten().flatten().map(|r| r.as_ref())
    }

    /// The downward closure of the whole universe under FIFO scheduling.
    pub fn closure(&self) -> Closure {
        chaotic_iteration(self, &Environment::full(&self.universe), Schedule::Fifo)
    }
}

/// Order in which pending operators are run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Schedule {
    /// First pending, first run; initial queue is program order.
    #[default]
    Fifo,
    /// A uniformly random pending operator each step.
    Shuffled(u64),
}

impl Schedule {
    pub fn seed(self) -> Option<u64> {
        match self {
            Schedule::Fifo => None,
            Schedule::Shuffled(seed) => Some(seed),
        }
    }
}

/// One recorded removal.
#[derive(Debug, Clone)]
pub struct Removal {
    pub pair: ValuePair,
    /// Position in the removal order.
    pub seq: usize,
    pub rule: Arc<DeductionRule>,
}

/// One justification per removed pair, indexed by removal order.
#[derive(Debug, Clone)]
pub struct ExplanationStore {
    universe: Arc<Universe>,
    by_pair: Vec<Option<u32>>,
    removals: Vec<Removal>,
}

impl ExplanationStore {
    fn new(universe: &Arc<Universe>) -> Self {
        ExplanationStore {
            universe: Arc::clone(universe),
            by_pair: vec![None; universe.size()],
            removals: Vec::new(),
        }
    }

    fn record(&mut self, pair: ValuePair, rule: Arc<DeductionRule>) {
        let flat = self.universe.flat_index(pair).expect("pair in universe");
        if self.by_pair[flat].is_some() {
            return;
        }
        let seq = self.removals.len();
        self.by_pair[flat] = Some(seq as u32);
        self.removals.push(Removal { pair, seq, rule });
    }

    pub fn get(&self, pair: ValuePair) -> Option<&Removal> {
        let flat = self.universe.flat_index(pair)?;
        self.by_pair[flat].map(|i| &self.removals[i as usize])
    }

    pub fn removals(&self) -> &[Removal] {
        &self.removals
    }

    pub fn len(&self) -> usize {
        self.removals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.removals.is_empty()
    }
}

/// One operator application that removed something.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub operator: OperatorId,
    pub removed: Vec<ValuePair>,
}

/// Result of a chaotic iteration.
#[derive(Debug, Clone)]
pub struct Closure {
    initial: Environment,
    final_env: Environment,
    store: ExplanationStore,
    steps: Vec<Step>,
    applications: usize,
    schedule: Schedule,
}

impl Closure {
    pub fn final_env(&self) -> &Environment {
        &self.final_env
    }

    pub fn initial_env(&self) -> &Environment {
        &self.initial
    }

    pub fn store(&self) -> &ExplanationStore {
        &self.store
    }

    /// Operator applications that removed at least one value, in order.
    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    /// Total number of operator applications, including idle ones.
    pub fn applications(&self) -> usize {
        self.applications
    }

    pub fn schedule(&self) -> Schedule {
        self.schedule
    }

    /// The pairs removed during the iteration: the roots of the computed
    /// explanations.
    pub fn removed_roots(&self) -> Environment {
        let mut env = Environment::empty(self.final_env.universe());
        for r in &self.store.removals {
            env.insert(r.pair).expect("recorded pair");
        }
        env
    }

    /// The computed explanation of `pair`, or `None` if it was kept.
    pub fn explanation_for(&self, pair: ValuePair) -> Result<Option<ExplanationTree>> {
        self.explanation_with_cap(pair, DEFAULT_TREE_CAP)
    }

    /// Like [`Closure::explanation_for`], expanding at most `cap` nodes;
    /// nodes beyond the budget are returned with `truncated` set and no
    /// children.
    pub fn explanation_with_cap(
        &self,
        pair: ValuePair,
        cap: usize,
    ) -> Result<Option<ExplanationTree>> {
        self.final_env.universe().check(pair)?;
        if self.final_env.contains(pair) {
            return Ok(None);
        }
        let mut budget = cap.max(1);
        Ok(Some(self.materialize(pair, &mut budget)))
    }

    fn materialize(&self, pair: ValuePair, budget: &mut usize) -> ExplanationTree {
        *budget -= 1;
        let Some(removal) = self.store.get(pair) else {
            // Absent from the starting environment.
            return ExplanationTree {
                root: pair,
                rule: None,
                seq: None,
                children: Vec::new(),
                truncated: false,
            };
        };
        let mut children = Vec::with_capacity(removal.rule.body.len());
        let mut truncated = false;
        for &child in &removal.rule.body {
            if *budget == 0 {
                truncated = true;
                children.clear();
                break;
            }
            children.push(self.materialize(child, budget));
        }
        ExplanationTree {
            root: pair,
            rule: Some(Arc::clone(&removal.rule)),
            seq: Some(removal.seq),
            children,
            truncated,
        }
    }
}

/// A proof tree of a value removal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExplanationTree {
    pub root: ValuePair,
    /// `None` when the pair was already absent from the starting
    /// environment.
    pub rule: Option<Arc<DeductionRule>>,
    pub seq: Option<usize>,
    /// One subtree per body element, in body order.
    pub children: Vec<ExplanationTree>,
    /// Children were dropped to respect the node budget.
    pub truncated: bool,
}

impl ExplanationTree {
    /// Number of nodes.
    pub fn len(&self) -> usize {
        1 + self.children.iter().map(ExplanationTree::len).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(ExplanationTree::depth).max().unwrap_or(0)
    }

    pub fn is_truncated(&self) -> bool {
        self.truncated || self.children.iter().any(ExplanationTree::is_truncated)
    }

    /// Nodes in preorder.
    pub fn preorder(&self) -> Vec<&ExplanationTree> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(node) = stack.pop() {
            out.push(node);
            stack.extend(node.children.iter().rev());
        }
        out
    }

    /// Checks that every node is `cons(h, T)` for a rule `h ← {root(t)}` of
    /// `program`, and that removal order strictly decreases toward leaves.
    /// Nodes without a rule must be leaves.
    pub fn is_valid_proof(&self, program: &Program) -> bool {
        self.preorder().into_iter().all(|node| match &node.rule {
            None => node.children.is_empty(),
            Some(rule) => {
                let known = program.rule(rule.operator, node.root);
                let rule_ok = known.is_some_and(|k| **k == **rule) && rule.head == node.root;
                let children_ok = node.truncated
                    || (node.children.len() == rule.body.len()
                        && node.children.iter().zip(&rule.body).all(|(c, &b)| c.root == b));
                let order_ok = node
                    .children
                    .iter()
                    .all(|c| c.seq.is_none() || c.seq < node.seq);
                rule_ok && children_ok && order_ok
            }
        })
    }
}

/// Applies the operators of `program` fairly until no value can be removed,
/// starting from `start`, and records a justification for every removal.
pub fn chaotic_iteration(program: &Program, start: &Environment, schedule: Schedule) -> Closure {
    let universe = program.universe();
    let mut env = start.clone();
    let mut store = ExplanationStore::new(universe);
    let mut steps = Vec::new();
    let mut applications = 0;

    let n = program.operators.len();
    let mut pending = FixedBitSet::with_capacity(n);
    pending.insert_range(..);
    let mut queue = Queue::new(schedule, n);

    while let Some(op_id) = queue.pop() {
        pending.set(op_id, false);
        applications += 1;
        let op = &program.operators[op_id];
        let current = env.bits(op.output);
        let kept = op.kept(&env);
        let mut removed_idx = current.clone();
        removed_idx.difference_with(&kept);
        if removed_idx.is_clear() {
            continue;
        }
        let domain = universe.var(op.output).values();
        let mut removed = Vec::with_capacity(removed_idx.count_ones(..));
        for i in removed_idx.ones() {
            let pair = ValuePair::new(op.output, domain[i]);
            let rule = program.rules[op_id][i]
                .as_ref()
                .expect("a removed value always has a rule");
            debug_assert!(
                rule.body.iter().all(|&b| !env.contains(b)),
                "rule body must already be removed"
            );
            store.record(pair, Arc::clone(rule));
            removed.push(pair);
        }
        env.bits_mut(op.output).difference_with(&removed_idx);
        steps.push(Step {
            operator: op.id,
            removed,
        });
        for &woken in program.woken_by(op.output) {
            if !pending.contains(woken.0) {
                pending.insert(woken.0);
                queue.push(woken.0);
            }
        }
    }

    Closure {
        initial: start.clone(),
        final_env: env,
        store,
        steps,
        applications,
        schedule,
    }
}

enum Queue {
    Fifo(VecDeque<usize>),
    Shuffled(Vec<usize>, Box<ChaCha8Rng>),
}

impl Queue {
    fn new(schedule: Schedule, n: usize) -> Self {
        match schedule {
            Schedule::Fifo => Queue::Fifo((0..n).collect()),
            Schedule::Shuffled(seed) => {
                Queue::Shuffled((0..n).collect(), Box::new(ChaCha8Rng::seed_from_u64(seed)))
            }
        }
    }

    fn push(&mut self, op: usize) {
        match self {
            Queue::Fifo(q) => q.push_back(op),
            Queue::Shuffled(q, _) => q.push(op),
        }
    }

    fn pop(&mut self) -> Option<usize> {
        match self {
            Queue::Fifo(q) => q.pop_front(),
            Queue::Shuffled(q, rng) => {
                if q.is_empty() {
                    None
                } else {
                    let i = rng.gen_range(0..q.len());
                    Some(q.swap_remove(i))
                }
            }
        }
    }
}

/// The least superset of `seed` closed under `rules`: the upward closure by
/// the dual operators.
pub fn upward_closure<'a, I>(rules: I, seed: &Environment) -> Environment
where
    I: IntoIterator<Item = &'a DeductionRule>,
{
    let universe = seed.universe();
    let rules: Vec<&DeductionRule> = rules.into_iter().collect();
    let mut closed = seed.clone();
    // Count, per rule, body elements not yet in the set; fire at zero.
    let mut missing: Vec<usize> = Vec::with_capacity(rules.len());
    let mut watchers: Vec<Vec<usize>> = vec![Vec::new(); universe.size()];
    let mut agenda = Vec::new();
    for (i, rule) in rules.iter().enumerate() {
        let mut count = 0;
        for &b in &rule.body {
            if !closed.contains(b) {
                count += 1;
                watchers[universe.flat_index(b).expect("body in universe")].push(i);
            }
        }
        missing.push(count);
        if count == 0 {
            agenda.push(i);
        }
    }
    while let Some(i) = agenda.pop() {
        let head = rules[i].head;
        if closed.insert(head).expect("head in universe") {
            for &w in &watchers[universe.flat_index(head).expect("head in universe")] {
                missing[w] -= 1;
                if missing[w] == 0 {
                    agenda.push(w);
                }
            }
        }
    }
    closed
}

/// Operators of `program` that are not consistent on `d` (`d ⊄ r(d)`).
pub fn inconsistent_operators(program: &Program, d: &Environment) -> Vec<OperatorId> {
    program
        .operators()
        .iter()
        .filter(|op| !op.is_consistent(d))
        .map(|op| op.id)
        .collect()
}
