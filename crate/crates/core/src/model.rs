//! Variables, the pair universe, environments, tuples and constraint problems.
//!
//! Every variable owns a finite, sorted initial domain. The universe is the
//! set of all `(variable, value)` pairs; an [`Environment`] is any subset of
//! it, stored as one bitset per variable indexed by position in the
//! variable's initial domain.

use std::collections::HashMap;
use std::fmt;
use std::ops::RangeInclusive;
use std::sync::Arc;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of candidate tuples brute-force enumeration may visit.
pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

/// Default range every domain value must lie in.
pub const DEFAULT_VALUE_RANGE: RangeInclusive<i64> = 0..=1023;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarId(pub u32);

impl VarId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// An element of the universe: a variable paired with one of its values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ValuePair {
    pub var: VarId,
    pub value: i64,
}

impl ValuePair {
    pub fn new(var: VarId, value: i64) -> Self {
        ValuePair { var, value }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    name: String,
    values: Vec<i64>,
}

impl Variable {
    pub fn name(&self) -> &str {
        &self.name
    }

    /// Initial domain, ascending.
    pub fn values(&self) -> &[i64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn index_of(&self, value: i64) -> Option<usize> {
        self.values.binary_search(&value).ok()
    }
}

/// The variable table together with every variable's initial domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Universe {
    vars: Vec<Variable>,
    by_name: HashMap<String, VarId>,
    offsets: Vec<usize>,
    size: usize,
}

impl Universe {
    /// Builds a universe with values restricted to [`DEFAULT_VALUE_RANGE`].
    pub fn new<I, S, V>(vars: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, V)>,
        S: Into<String>,
        V: IntoIterator<Item = i64>,
    {
        Self::with_value_range(vars, DEFAULT_VALUE_RANGE)
    }

    pub fn with_value_range<I, S, V>(vars: I, range: RangeInclusive<i64>) -> Result<Self>
    where
        I: IntoIterator<Item = (S, V)>,
        S: Into<String>,
        V: IntoIterator<Item = i64>,
    {
        let mut table = Vec::new();
        let mut by_name = HashMap::new();
        let mut offsets = Vec::new();
        let mut size = 0;
        for (name, values) in vars {
            let name = name.into();
            let mut values: Vec<i64> = values.into_iter().collect();
            values.sort_unstable();
            values.dedup();
            if values.is_empty() {
                return Err(Error::EmptyDomain(name));
            }
            if let Some(&bad) = values.iter().find(|v| !range.contains(v)) {
                return Err(Error::ValueOutOfRange {
                    var: name,
                    value: bad,
                    min: *range.start(),
                    max: *range.end(),
                });
            }
            let id = VarId(table.len() as u32);
            if by_name.insert(name.clone(), id).is_some() {
                return Err(Error::DuplicateVariable(name));
            }
            offsets.push(size);
            size += values.len();
            table.push(Variable { name, values });
        }
        Ok(Universe {
            vars: table,
            by_name,
            offsets,
            size,
        })
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    /// Number of pairs in the universe.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.vars[id.index()]
    }

    pub fn get(&self, id: VarId) -> Option<&Variable> {
        self.vars.get(id.index())
    }

    pub fn lookup(&self, name: &str) -> Option<VarId> {
        self.by_name.get(name).copied()
    }

    pub fn resolve(&self, name: &str) -> Result<VarId> {
        self.lookup(name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn var_ids(&self) -> impl ExactSizeIterator<Item = VarId> + '_ {
        (0..self.vars.len() as u32).map(VarId)
    }

    pub fn name(&self, id: VarId) -> &str {
        &self.vars[id.index()].name
    }

    /// Checks that `var` exists and `value` belongs to its initial domain.
    pub fn check(&self, pair: ValuePair) -> Result<usize> {
        let var = self
            .get(pair.var)
            .ok_or_else(|| Error::UnknownVariable(format!("#{}", pair.var.0)))?;
        var.index_of(pair.value).ok_or_else(|| Error::ValueOutOfDomain {
            var: var.name.clone(),
            value: pair.value,
        })
    }

    /// Dense index of a pair in `0..size()`.
    pub fn flat_index(&self, pair: ValuePair) -> Option<usize> {
        let var = self.get(pair.var)?;
        var.index_of(pair.value)
            .map(|i| self.offsets[pair.var.index()] + i)
    }

    pub fn pair_at(&self, flat: usize) -> ValuePair {
        let v = self.offsets.partition_point(|&o| o <= flat) - 1;
        let var = VarId(v as u32);
        ValuePair::new(var, self.vars[v].values[flat - self.offsets[v]])
    }

    /// Resolves `NAME=value` style input.
    pub fn pair(&self, name: &str, value: i64) -> Result<ValuePair> {
        let var = self.resolve(name)?;
        let pair = ValuePair::new(var, value);
        self.check(pair)?;
        Ok(pair)
    }

    /// Renders a pair as `(NAME,value)`.
    pub fn show(&self, pair: ValuePair) -> String {
        match self.get(pair.var) {
            Some(v) => format!("({},{})", v.name, pair.value),
            None => format!("(#{},{})", pair.var.0, pair.value),
        }
    }

    /// Product of all domain sizes of `vars`, saturating.
    pub fn search_space(&self, vars: &[VarId]) -> u128 {
        vars.iter().fold(1u128, |acc, v| {
            acc.saturating_mul(self.var(*v).len() as u128)
        })
    }
}

/// A subset of the universe.
#[derive(Clone)]
pub struct Environment {
    universe: Arc<Universe>,
    sets: Vec<FixedBitSet>,
}

impl Environment {
    pub fn empty(universe: &Arc<Universe>) -> Self {
        let sets = universe
            .vars
            .iter()
            .map(|v| FixedBitSet::with_capacity(v.len()))
            .collect();
        Environment {
            universe: Arc::clone(universe),
            sets,
        }
    }

    /// The whole universe.
    pub fn full(universe: &Arc<Universe>) -> Self {
        let mut env = Self::empty(universe);
        for set in &mut env.sets {
            set.insert_range(..);
        }
        env
    }

    pub fn from_pairs<I>(universe: &Arc<Universe>, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = ValuePair>,
    {
        let mut env = Self::empty(universe);
        for p in pairs {
            env.insert(p)?;
        }
        Ok(env)
    }

    pub fn universe(&self) -> &Arc<Universe> {
        &self.universe
    }

    pub fn contains(&self, pair: ValuePair) -> bool {
        match self.universe.get(pair.var).and_then(|v| v.index_of(pair.value)) {
            Some(i) => self.sets[pair.var.index()].contains(i),
            None => false,
        }
    }

    /// Returns `true` if the pair was not present.
    pub fn insert(&mut self, pair: ValuePair) -> Result<bool> {
        let i = self.universe.check(pair)?;
        let set = &mut self.sets[pair.var.index()];
        let fresh = !set.contains(i);
        set.insert(i);
        Ok(fresh)
    }

    /// Returns `true` if the pair was present.
    pub fn remove(&mut self, pair: ValuePair) -> Result<bool> {
        let i = self.universe.check(pair)?;
        let set = &mut self.sets[pair.var.index()];
        let present = set.contains(i);
        set.set(i, false);
        Ok(present)
    }

    /// The bitset of `var`, indexed by position in the initial domain.
    pub fn bits(&self, var: VarId) -> &FixedBitSet {
        &self.sets[var.index()]
    }

    pub(crate) fn bits_mut(&mut self, var: VarId) -> &mut FixedBitSet {
        &mut self.sets[var.index()]
    }

    /// Values currently held for `var`, ascending.
    pub fn values(&self, var: VarId) -> impl Iterator<Item = i64> + '_ {
        let domain = self.universe.var(var).values();
        self.sets[var.index()].ones().map(move |i| domain[i])
    }

    pub fn count(&self, var: VarId) -> usize {
        self.sets[var.index()].count_ones(..)
    }

    pub fn min(&self, var: VarId) -> Option<i64> {
        self.sets[var.index()]
            .minimum()
            .map(|i| self.universe.var(var).values()[i])
    }

    pub fn max(&self, var: VarId) -> Option<i64> {
        self.sets[var.index()]
            .maximum()
            .map(|i| self.universe.var(var).values()[i])
    }

    /// Number of pairs.
    pub fn len(&self) -> usize {
        self.sets.iter().map(|s| s.count_ones(..)).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.iter().all(|s| s.is_clear())
    }

    /// All pairs, ordered by variable then value.
    pub fn pairs(&self) -> impl Iterator<Item = ValuePair> + '_ {
        self.universe
            .var_ids()
            .flat_map(move |var| self.values(var).map(move |value| ValuePair::new(var, value)))
    }

    /// `{ (x,e) ∈ self | x ∈ vars }`.
    pub fn restrict(&self, vars: &[VarId]) -> Result<Environment> {
        let mut out = Self::empty(&self.universe);
        for &var in vars {
            if self.universe.get(var).is_none() {
                return Err(Error::UnknownVariable(format!("#{}", var.0)));
            }
            out.sets[var.index()] = self.sets[var.index()].clone();
        }
        Ok(out)
    }

    /// Every pair of the universe not in `self`.
    pub fn complement(&self) -> Environment {
        let mut out = self.clone();
        for set in &mut out.sets {
            set.toggle_range(..);
        }
        out
    }

    pub fn union(&self, other: &Environment) -> Environment {
        self.zip_with(other, |a, b| a.union_with(b))
    }

    pub fn intersection(&self, other: &Environment) -> Environment {
        self.zip_with(other, |a, b| a.intersect_with(b))
    }

    pub fn difference(&self, other: &Environment) -> Environment {
        self.zip_with(other, |a, b| a.difference_with(b))
    }

    pub fn union_with(&mut self, other: &Environment) {
        self.assert_same_universe(other);
        for (a, b) in self.sets.iter_mut().zip(&other.sets) {
            a.union_with(b);
        }
    }

    pub fn is_subset(&self, other: &Environment) -> bool {
        self.assert_same_universe(other);
        self.sets
            .iter()
            .zip(&other.sets)
            .all(|(a, b)| a.is_subset(b))
    }

    pub fn is_disjoint(&self, other: &Environment) -> bool {
        self.assert_same_universe(other);
        self.sets
            .iter()
            .zip(&other.sets)
            .all(|(a, b)| a.is_disjoint(b))
    }

    fn zip_with(
        &self,
        other: &Environment,
        op: impl Fn(&mut FixedBitSet, &FixedBitSet),
    ) -> Environment {
        self.assert_same_universe(other);
        let mut out = self.clone();
        for (a, b) in out.sets.iter_mut().zip(&other.sets) {
            op(a, b);
        }
        out
    }

    fn assert_same_universe(&self, other: &Environment) {
        debug_assert!(
            Arc::ptr_eq(&self.universe, &other.universe) || self.universe == other.universe,
            "environments over different universes"
        );
    }
}

impl PartialEq for Environment {
    fn eq(&self, other: &Self) -> bool {
        (Arc::ptr_eq(&self.universe, &other.universe) || self.universe == other.universe)
            && self.sets == other.sets
    }
}

impl Eq for Environment {}

impl fmt::Debug for Environment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set()
            .entries(self.pairs().map(|p| DebugPair(self.universe.show(p))))
            .finish()
    }
}

struct DebugPair(String);

impl fmt::Debug for DebugPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// An environment with at most one value per variable: a tuple on the set of
/// variables it mentions.
#[derive(Clone, PartialEq, Eq)]
pub struct Tuple(Environment);

impl Tuple {
    pub fn new(env: Environment) -> Result<Self> {
        for var in env.universe.var_ids() {
            if env.count(var) > 1 {
                return Err(Error::NotATuple(env.universe.name(var).to_string()));
            }
        }
        Ok(Tuple(env))
    }

    pub fn from_assignment<I>(universe: &Arc<Universe>, assignment: I) -> Result<Self>
    where
        I: IntoIterator<Item = (VarId, i64)>,
    {
        let env = Environment::from_pairs(
            universe,
            assignment.into_iter().map(|(v, e)| ValuePair::new(v, e)),
        )?;
        Self::new(env)
    }

    pub fn value(&self, var: VarId) -> Option<i64> {
        self.0.min(var)
    }

    pub fn scope(&self) -> Vec<VarId> {
        self.0
            .universe
            .var_ids()
            .filter(|&v| self.0.count(v) == 1)
            .collect()
    }

    /// True when every variable of the universe has a value.
    pub fn is_total(&self) -> bool {
        self.0.universe.var_ids().all(|v| self.0.count(v) == 1)
    }

    pub fn as_env(&self) -> &Environment {
        &self.0
    }

    pub fn into_env(self) -> Environment {
        self.0
    }
}

impl fmt::Debug for Tuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ConstraintId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Comparison {
    Gt,
    Lt,
    Ge,
    Le,
    Neq,
    Eq,
}

impl Comparison {
    pub const ALL: [Comparison; 6] = [
        Comparison::Gt,
        Comparison::Lt,
        Comparison::Ge,
        Comparison::Le,
        Comparison::Neq,
        Comparison::Eq,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Comparison::Gt => ">",
            Comparison::Lt => "<",
            Comparison::Ge => ">=",
            Comparison::Le => "<=",
            Comparison::Neq => "!=",
            Comparison::Eq => "=",
        }
    }

    pub fn holds(self, lhs: i64, rhs: i64) -> bool {
        match self {
            Comparison::Gt => lhs > rhs,
            Comparison::Lt => lhs < rhs,
            Comparison::Ge => lhs >= rhs,
            Comparison::Le => lhs <= rhs,
            Comparison::Neq => lhs != rhs,
            Comparison::Eq => lhs == rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Relation {
    /// `scope[0] op scope[1] + offset`
    Compare { op: Comparison, offset: i64 },
    /// `scope[0] != k`
    NeqConst(i64),
    /// Allowed tuples over the scope, sorted and deduplicated. Arity 1 or 2.
    Table(Vec<Vec<i64>>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    label: String,
    scope: Vec<VarId>,
    relation: Relation,
}

impl Constraint {
    /// `x op y + offset`
    pub fn compare(
        universe: &Universe,
        x: VarId,
        op: Comparison,
        y: VarId,
        offset: i64,
    ) -> Result<Self> {
        let label = format!(
            "{}{}{}{}",
            universe.name(x),
            op.symbol(),
            universe.name(y),
            offset_suffix(offset)
        );
        Self::build(
            universe,
            label,
            vec![x, y],
            Relation::Compare { op, offset },
        )
    }

    /// `x != k`
    pub fn neq_const(universe: &Universe, x: VarId, k: i64) -> Result<Self> {
        let label = format!("{}!={}", universe.name(x), k);
        Self::build(universe, label, vec![x], Relation::NeqConst(k))
    }

    pub fn table(universe: &Universe, scope: Vec<VarId>, tuples: Vec<Vec<i64>>) -> Result<Self> {
        let names: Vec<&str> = scope
            .iter()
            .map(|&v| universe.get(v).map_or("?", |var| var.name()))
            .collect();
        let label = format!("table({})", names.join(","));
        let mut tuples = tuples;
        tuples.sort();
        tuples.dedup();
        Self::build(universe, label, scope, Relation::Table(tuples))
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    fn build(
        universe: &Universe,
        label: String,
        scope: Vec<VarId>,
        relation: Relation,
    ) -> Result<Self> {
        for &v in &scope {
            if universe.get(v).is_none() {
                return Err(Error::UnknownVariable(format!("#{}", v.0)));
            }
        }
        let arity_ok = match &relation {
            Relation::Compare { .. } => scope.len() == 2,
            Relation::NeqConst(_) => scope.len() == 1,
            Relation::Table(_) => (1..=2).contains(&scope.len()),
        };
        if !arity_ok {
            let expected = match &relation {
                Relation::Compare { .. } => "2",
                Relation::NeqConst(_) => "1",
                Relation::Table(_) => "1 or 2",
            };
            return Err(Error::Arity {
                constraint: label,
                expected: expected.to_string(),
                found: scope.len(),
            });
        }
        if scope.len() == 2 && scope[0] == scope[1] {
            return Err(Error::Unsupported(format!(
                "`{label}` relates a variable to itself"
            )));
        }
        if let Relation::Table(tuples) = &relation {
            for t in tuples {
                if t.len() != scope.len() {
                    return Err(Error::BadTable {
                        constraint: label,
                        reason: format!("tuple of length {} on a scope of {}", t.len(), scope.len()),
                    });
                }
                for (&v, &e) in scope.iter().zip(t) {
                    if universe.var(v).index_of(e).is_none() {
                        return Err(Error::BadTable {
                            constraint: label.clone(),
                            reason: format!(
                                "value {e} is not in the domain of `{}`",
                                universe.name(v)
                            ),
                        });
                    }
                }
            }
        }
        Ok(Constraint {
            label,
            scope,
            relation,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// The variables of the constraint, in relation order.
    pub fn scope(&self) -> &[VarId] {
        &self.scope
    }

    pub fn relation(&self) -> &Relation {
        &self.relation
    }

    /// Tests values given in scope order.
    pub fn holds(&self, values: &[i64]) -> bool {
        match &self.relation {
            Relation::Compare { op, offset } => op.holds(values[0], values[1] + offset),
            Relation::NeqConst(k) => values[0] != *k,
            Relation::Table(tuples) => tuples.binary_search_by(|t| t.as_slice().cmp(values)).is_ok(),
        }
    }

    /// Whether the restriction of `t` to the scope belongs to the relation.
    pub fn accepts(&self, t: &Tuple) -> Result<bool> {
        let universe = t.as_env().universe();
        let mut values = Vec::with_capacity(self.scope.len());
        for &v in &self.scope {
            let value = t
                .value(v)
                .ok_or_else(|| Error::PartialTuple(universe.name(v).to_string()))?;
            values.push(value);
        }
        Ok(self.holds(&values))
    }
}

pub(crate) fn offset_suffix(offset: i64) -> String {
    match offset {
        0 => String::new(),
        k if k > 0 => format!("+{k}"),
        k => format!("{k}"),
    }
}

/// A constraint satisfaction problem over a fixed universe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Csp {
    universe: Arc<Universe>,
    constraints: Vec<Constraint>,
}

impl Csp {
    pub fn new(universe: Arc<Universe>, constraints: Vec<Constraint>) -> Result<Self> {
        for c in &constraints {
            for &v in c.scope() {
                if universe.get(v).is_none() {
                    return Err(Error::UnknownVariable(format!("#{}", v.0)));
                }
            }
        }
        Ok(Csp {
            universe,
            constraints,
        })
    }

    pub fn universe(&self) -> &Arc<Universe> {
        &self.universe
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn constraint(&self, id: ConstraintId) -> &Constraint {
        &self.constraints[id.0]
    }

    /// The same variables with a different constraint list.
    pub fn with_constraints(&self, constraints: Vec<Constraint>) -> Result<Self> {
        Csp::new(Arc::clone(&self.universe), constraints)
    }

    pub fn is_solution(&self, t: &Tuple) -> Result<bool> {
        if let Some(missing) = self.universe.var_ids().find(|&v| t.as_env().count(v) != 1) {
            return Err(Error::PartialTuple(self.universe.name(missing).to_string()));
        }
        for c in &self.constraints {
            if !c.accepts(t)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// All solutions, by brute force over the cartesian product of domains.
    pub fn enumerate_solutions(&self) -> Result<Vec<Tuple>> {
        self.enumerate_solutions_with_cap(DEFAULT_ENUMERATION_CAP)
    }

    pub fn enumerate_solutions_with_cap(&self, cap: u128) -> Result<Vec<Tuple>> {
        let vars: Vec<VarId> = self.universe.var_ids().collect();
        let mut out = Vec::new();
        for_each_assignment(&self.universe, &vars, &self.constraints, cap, |values| {
            let t = Tuple::from_assignment(
                &self.universe,
                vars.iter().copied().zip(values.iter().copied()),
            )
            .expect("assignment over declared domains");
            out.push(t);
        })?;
        Ok(out)
    }
}

/// Calls `visit` with every assignment of `vars` (values in `vars` order)
/// satisfying all of `constraints`. Constraints must only mention `vars`.
pub(crate) fn for_each_assignment(
    universe: &Universe,
    vars: &[VarId],
    constraints: &[Constraint],
    cap: u128,
    mut visit: impl FnMut(&[i64]),
) -> Result<()> {
    let size = universe.search_space(vars);
    if size > cap {
        return Err(Error::EnumerationCap { size, cap });
    }
    let position: HashMap<VarId, usize> = vars.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let checks: Vec<(&Constraint, Vec<usize>)> = constraints
        .iter()
        .map(|c| (c, c.scope().iter().map(|v| position[v]).collect()))
        .collect();
    let domains: Vec<&[i64]> = vars.iter().map(|&v| universe.var(v).values()).collect();
    let mut idx = vec![0usize; vars.len()];
    let mut values: Vec<i64> = domains.iter().map(|d| d[0]).collect();
    let mut scratch = Vec::with_capacity(2);
    loop {
        let ok = checks.iter().all(|(c, pos)| {
            scratch.clear();
            scratch.extend(pos.iter().map(|&p| values[p]));
            c.holds(&scratch)
        });
        if ok {
            visit(&values);
        }
        // odometer
        let mut k = 0;
        loop {
            if k == vars.len() {
                return Ok(());
            }
            idx[k] += 1;
            if idx[k] < domains[k].len() {
                values[k] = domains[k][idx[k]];
                break;
            }
            idx[k] = 0;
            values[k] = domains[k][0];
            k += 1;
        }
    }
}

/// Pointwise union of a set of tuples.
pub fn union_solutions(universe: &Arc<Universe>, solutions: &[Tuple]) -> Environment {
    let mut env = Environment::empty(universe);
    for t in solutions {
        env.union_with(t.as_env());
    }
    env
}
