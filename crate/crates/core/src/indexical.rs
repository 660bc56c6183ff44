//! Local-consistency operators in the `X in r` style and their deduction rules.
//!
//! An [`Operator`] narrows one output variable as a function of (at most) one
//! other variable's current domain. Its reduction is `d ↦ d ∩ eval(d)`. The
//! dual view describes removals: a [`DeductionRule`] `h ← B` says that once
//! every pair of `B` is gone, `h` may be removed too.

use std::fmt;
use std::sync::Arc;

use fixedbitset::FixedBitSet;

use crate::error::Result;
use crate::model::{
    for_each_assignment, offset_suffix, Comparison, Constraint, ConstraintId, Environment,
    Relation, Universe, ValuePair, VarId,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct OperatorId(pub usize);

/// The range part of an `X in r` operator. Bounds are implicitly clipped to
/// the output variable's initial domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IndexicalExpr {
    /// `X in lo..hi`
    Range { lo: i64, hi: i64 },
    /// `X in min(Y)+offset..infinity`
    MinPlus { var: VarId, offset: i64 },
    /// `X in -infinity..max(Y)-offset`
    MaxMinus { var: VarId, offset: i64 },
    /// `X in -{k}`
    NotConst(i64),
    /// `X in -{val(Y)+offset}`: once Y is bound to v, X loses v+offset.
    NotVal { var: VarId, offset: i64 },
    /// `X in {..}` for a unary table.
    InSet(Vec<i64>),
    /// Binary table support: X keeps e while some f of Y has (e,f) allowed.
    /// Pairs are sorted by (own value, other value).
    Supported { var: VarId, pairs: Arc<[(i64, i64)]> },
}

impl IndexicalExpr {
    pub fn dependency(&self) -> Option<VarId> {
        match self {
            IndexicalExpr::MinPlus { var, .. }
            | IndexicalExpr::MaxMinus { var, .. }
            | IndexicalExpr::NotVal { var, .. }
            | IndexicalExpr::Supported { var, .. } => Some(*var),
            IndexicalExpr::Range { .. } | IndexicalExpr::NotConst(_) | IndexicalExpr::InSet(_) => {
                None
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Operator {
    pub id: OperatorId,
    pub output: VarId,
    pub expr: IndexicalExpr,
    pub constraint: ConstraintId,
    pub constraint_label: Arc<str>,
}

impl Operator {
    /// Variables the operator reads.
    pub fn deps(&self) -> Vec<VarId> {
        self.expr.dependency().into_iter().collect()
    }

    /// The values of the output variable kept by the operator on `d`, as a
    /// bitset over the output's initial domain.
    pub fn kept(&self, d: &Environment) -> FixedBitSet {
        let universe = d.universe();
        let domain = universe.var(self.output).values();
        let mut keep = FixedBitSet::with_capacity(domain.len());
        let mut keep_where = |pred: &dyn Fn(i64) -> bool| {
            for (i, &e) in domain.iter().enumerate() {
                if pred(e) {
                    keep.insert(i);
                }
            }
        };
        match &self.expr {
            IndexicalExpr::Range { lo, hi } => keep_where(&|e| *lo <= e && e <= *hi),
            IndexicalExpr::MinPlus { var, offset } => {
                if let Some(m) = d.min(*var) {
                    keep_where(&|e| e >= m + offset)
                }
            }
            IndexicalExpr::MaxMinus { var, offset } => {
                if let Some(m) = d.max(*var) {
                    keep_where(&|e| e <= m - offset)
                }
            }
            IndexicalExpr::NotConst(k) => keep_where(&|e| e != *k),
            IndexicalExpr::NotVal { var, offset } => match d.count(*var) {
                // No value left for Y: nothing of X is supported.
                0 => {}
                1 => {
                    let v = d.min(*var).expect("singleton");
                    keep_where(&|e| e != v + offset)
                }
                _ => keep_where(&|_| true),
            },
            IndexicalExpr::InSet(values) => keep_where(&|e| values.binary_search(&e).is_ok()),
            IndexicalExpr::Supported { var, pairs } => {
                let support = d.bits(*var);
                let other = universe.var(*var);
                for (i, &e) in domain.iter().enumerate() {
                    let start = pairs.partition_point(|&(a, _)| a < e);
                    let supported = pairs[start..]
                        .iter()
                        .take_while(|&&(a, _)| a == e)
                        .any(|&(_, f)| other.index_of(f).is_some_and(|j| support.contains(j)));
                    if supported {
                        keep.insert(i);
                    }
                }
            }
        }
        keep
    }

    /// `r(d)`: the kept values on the output variable, every other variable
    /// left at its full initial domain.
    pub fn eval(&self, d: &Environment) -> Environment {
        let mut out = Environment::full(d.universe());
        *out.bits_mut(self.output) = self.kept(d);
        out
    }

    /// Whether `d ⊆ r(d)`.
    pub fn is_consistent(&self, d: &Environment) -> bool {
        d.bits(self.output).is_subset(&self.kept(d))
    }

    /// The canonical rule set of the operator: at most one rule per output
    /// value; values without a rule are never removed by this operator.
    pub fn rules(&self, universe: &Universe) -> Vec<DeductionRule> {
        let x = self.output;
        let other = self.expr.dependency().map(|y| (y, universe.var(y).values()));
        let body_where = |pred: &dyn Fn(i64) -> bool| -> Vec<ValuePair> {
            let (y, values) = other.expect("operator has a dependency");
            values
                .iter()
                .filter(|&&f| pred(f))
                .map(|&f| ValuePair::new(y, f))
                .collect()
        };
        let mut rules = Vec::new();
        for &e in universe.var(x).values() {
            let body = match &self.expr {
                IndexicalExpr::Range { lo, hi } => (e < *lo || e > *hi).then(Vec::new),
                IndexicalExpr::MinPlus { offset, .. } => Some(body_where(&|f| f <= e - offset)),
                IndexicalExpr::MaxMinus { offset, .. } => Some(body_where(&|f| f >= e + offset)),
                IndexicalExpr::NotConst(k) => (e == *k).then(Vec::new),
                IndexicalExpr::NotVal { offset, .. } => Some(body_where(&|f| f + offset != e)),
                IndexicalExpr::InSet(values) => values.binary_search(&e).is_err().then(Vec::new),
                IndexicalExpr::Supported { pairs, .. } => {
                    Some(body_where(&|f| pairs.binary_search(&(e, f)).is_ok()))
                }
            };
            if let Some(body) = body {
                rules.push(DeductionRule {
                    head: ValuePair::new(x, e),
                    body,
                    operator: self.id,
                    constraint: self.constraint,
                    constraint_label: Arc::clone(&self.constraint_label),
                });
            }
        }
        rules
    }

    /// Renders the operator in `X in r` notation.
    pub fn render(&self, universe: &Universe) -> String {
        let x = universe.name(self.output);
        let name = |v: &VarId| universe.name(*v);
        match &self.expr {
            IndexicalExpr::Range { lo, hi } => format!("{x} in {lo}..{hi}"),
            IndexicalExpr::MinPlus { var, offset } => {
                format!("{x} in min({}){}..infinity", name(var), offset_suffix(*offset))
            }
            IndexicalExpr::MaxMinus { var, offset } => {
                format!("{x} in -infinity..max({}){}", name(var), offset_suffix(-*offset))
            }
            IndexicalExpr::NotConst(k) => format!("{x} in -{{{k}}}"),
            IndexicalExpr::NotVal { var, offset } => {
                format!("{x} in -{{val({}){}}}", name(var), offset_suffix(*offset))
            }
            IndexicalExpr::InSet(values) => {
                let vs: Vec<String> = values.iter().map(i64::to_string).collect();
                format!("{x} in {{{}}}", vs.join(","))
            }
            IndexicalExpr::Supported { var, .. } => {
                format!("{x} in supported({})", name(var))
            }
        }
    }
}

/// `head ← body`, tagged with the operator and constraint it comes from.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DeductionRule {
    pub head: ValuePair,
    /// Sorted by value.
    pub body: Vec<ValuePair>,
    pub operator: OperatorId,
    pub constraint: ConstraintId,
    pub constraint_label: Arc<str>,
}

impl DeductionRule {
    /// Whether the body is entirely contained in `removed`.
    pub fn fires(&self, removed: &Environment) -> bool {
        self.body.iter().all(|&p| removed.contains(p))
    }

    pub fn display<'a>(&'a self, universe: &'a Universe) -> RuleDisplay<'a> {
        RuleDisplay {
            rule: self,
            universe,
        }
    }
}

pub struct RuleDisplay<'a> {
    rule: &'a DeductionRule,
    universe: &'a Universe,
}

impl fmt::Display for RuleDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} <-", self.universe.show(self.rule.head))?;
        if self.rule.body.is_empty() {
            return f.write_str(" {}");
        }
        for (i, &p) in self.rule.body.iter().enumerate() {
            let sep = if i == 0 { " " } else { ", " };
            write!(f, "{sep}{}", self.universe.show(p))?;
        }
        Ok(())
    }
}

/// Compiles a constraint into its arc-consistency operators. Operator ids
/// are assigned consecutively from `first`.
pub fn compile_constraint(
    constraint: &Constraint,
    id: ConstraintId,
    first: OperatorId,
) -> Result<Vec<Operator>> {
    let scope = constraint.scope();
    let mut exprs: Vec<(VarId, IndexicalExpr)> = Vec::new();
    match constraint.relation() {
        Relation::Compare { op, offset } => {
            let (x, y, k) = (scope[0], scope[1], *offset);
            match op {
                Comparison::Gt => push_ge(&mut exprs, x, y, k + 1),
                Comparison::Ge => push_ge(&mut exprs, x, y, k),
                Comparison::Lt => push_le(&mut exprs, x, y, k - 1),
                Comparison::Le => push_le(&mut exprs, x, y, k),
                Comparison::Eq => {
                    push_ge(&mut exprs, x, y, k);
                    push_le(&mut exprs, x, y, k);
                }
                Comparison::Neq => {
                    exprs.push((x, IndexicalExpr::NotVal { var: y, offset: k }));
                    exprs.push((y, IndexicalExpr::NotVal { var: x, offset: -k }));
                }
            }
        }
        Relation::NeqConst(k) => exprs.push((scope[0], IndexicalExpr::NotConst(*k))),
        Relation::Table(tuples) => match scope {
            [x] => exprs.push((*x, IndexicalExpr::InSet(tuples.iter().map(|t| t[0]).collect()))),
            [x, y] => {
                let forward: Arc<[(i64, i64)]> = tuples.iter().map(|t| (t[0], t[1])).collect();
                let mut backward: Vec<(i64, i64)> = tuples.iter().map(|t| (t[1], t[0])).collect();
                backward.sort_unstable();
                exprs.push((*x, IndexicalExpr::Supported { var: *y, pairs: forward }));
                exprs.push((*y, IndexicalExpr::Supported { var: *x, pairs: backward.into() }));
            }
            _ => {
                return Err(crate::Error::Unsupported(format!(
                    "table `{}` of arity {}",
                    constraint.label(),
                    scope.len()
                )))
            }
        },
    }
    let label: Arc<str> = Arc::from(constraint.label());
    Ok(exprs
        .into_iter()
        .enumerate()
        .map(|(i, (output, expr))| Operator {
            id: OperatorId(first.0 + i),
            output,
            expr,
            constraint: id,
            constraint_label: Arc::clone(&label),
        })
        .collect())
}

// x >= y + k
fn push_ge(exprs: &mut Vec<(VarId, IndexicalExpr)>, x: VarId, y: VarId, k: i64) {
    exprs.push((x, IndexicalExpr::MinPlus { var: y, offset: k }));
    exprs.push((y, IndexicalExpr::MaxMinus { var: x, offset: k }));
}

// x <= y + k
fn push_le(exprs: &mut Vec<(VarId, IndexicalExpr)>, x: VarId, y: VarId, k: i64) {
    exprs.push((x, IndexicalExpr::MaxMinus { var: y, offset: -k }));
    exprs.push((y, IndexicalExpr::MinPlus { var: x, offset: -k }));
}

/// The dual of `op` read off its rules: heads of the rules whose body lies in
/// `removed`.
pub fn dual_apply(rules: &[DeductionRule], removed: &Environment) -> Environment {
    let mut out = Environment::empty(removed.universe());
    for rule in rules.iter().filter(|r| r.fires(removed)) {
        out.insert(rule.head).expect("rule heads lie in the universe");
    }
    out
}

/// Brute-force check that every tuple satisfying all of `constraints` is
/// consistent for `op`. Variables outside the constraints and the operator
/// cannot affect the outcome and are not enumerated.
pub fn verify_preservation(
    op: &Operator,
    constraints: &[Constraint],
    universe: &std::sync::Arc<Universe>,
    cap: u128,
) -> Result<bool> {
    let mut vars: Vec<VarId> = constraints
        .iter()
        .flat_map(|c| c.scope().iter().copied())
        .chain(op.deps())
        .chain(std::iter::once(op.output))
        .collect();
    vars.sort_unstable();
    vars.dedup();
    let mut preserved = true;
    for_each_assignment(universe, &vars, constraints, cap, |values| {
        if !preserved {
            return;
        }
        // Unlisted variables stay empty; `op` reads only its output and its
        // dependency, and both are bound.
        let mut env = Environment::empty(universe);
        for (&v, &e) in vars.iter().zip(values) {
            env.insert(ValuePair::new(v, e)).expect("declared value");
        }
        if !op.is_consistent(&env) {
            preserved = false;
        }
    })?;
    Ok(preserved)
}
