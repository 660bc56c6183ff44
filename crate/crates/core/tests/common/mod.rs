//! Helpers shared by the integration tests: model corpus, random problem
//! generators, a brute-force arc-consistency oracle and model mutations.

#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use fdexplain::lang::parse_model;
use fdexplain::{Comparison, Constraint, Csp, Environment, Relation, Universe, ValuePair, VarId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn models_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

pub fn model_text(name: &str) -> String {
    let path = models_dir().join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn load(name: &str) -> Csp {
    parse_model(&model_text(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Every `.fd` file of the corpus, sorted by name.
pub fn corpus() -> Vec<(String, Csp)> {
    let mut names: Vec<String> = std::fs::read_dir(models_dir())
        .expect("models directory")
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".fd"))
        .collect();
    names.sort();
    names.into_iter().map(|n| (n.clone(), load(&n))).collect()
}

/// Correct corpus models small enough to enumerate, used as mutation bases.
pub const MUTATION_BASES: [&str; 6] = [
    "conference.fd",
    "precedence.fd",
    "coloring.fd",
    "tables.fd",
    "chain.fd",
    "queens5.fd",
];

/// A random problem with at most 5 variables, 8 values per domain and 10
/// constraints of every supported kind.
pub fn random_csp(seed: u64) -> Csp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nvars = rng.gen_range(2..=5);
    let vars: Vec<(String, Vec<i64>)> = (0..nvars)
        .map(|i| {
            let size = rng.gen_range(1..=8);
            let start = rng.gen_range(0..4);
            (format!("V{i}"), (start..start + size).collect())
        })
        .collect();
    let u = Arc::new(Universe::new(vars).unwrap());
    let mut cs = Vec::new();
    for _ in 0..rng.gen_range(0..=10) {
        let x = VarId(rng.gen_range(0..nvars) as u32);
        let y = VarId((x.0 + rng.gen_range(1..nvars as u32)) % nvars as u32);
        let c = match rng.gen_range(0..5) {
            0 => Constraint::neq_const(&u, x, rng.gen_range(0..12)).unwrap(),
            1 => random_table(&u, &mut rng, x, y, 0.5),
            2 => {
                let values: Vec<Vec<i64>> = u
                    .var(x)
                    .values()
                    .iter()
                    .filter(|_| rng.gen_bool(0.6))
                    .map(|&e| vec![e])
                    .collect();
                Constraint::table(&u, vec![x], values).unwrap()
            }
            _ => {
                let op = Comparison::ALL[rng.gen_range(0..6)];
                Constraint::compare(&u, x, op, y, rng.gen_range(-2..=2)).unwrap()
            }
        };
        cs.push(c);
    }
    Csp::new(u, cs).unwrap()
}

pub fn random_table(u: &Universe, rng: &mut ChaCha8Rng, x: VarId, y: VarId, density: f64) -> Constraint {
    let mut tuples = Vec::new();
    for &e in u.var(x).values() {
        for &f in u.var(y).values() {
            if rng.gen_bool(density) {
                tuples.push(vec![e, f]);
            }
        }
    }
    Constraint::table(u, vec![x, y], tuples).unwrap()
}

/// A problem made only of binary tables.
pub fn random_table_csp(seed: u64) -> Csp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nvars = rng.gen_range(3..=5);
    let vars: Vec<(String, Vec<i64>)> = (0..nvars)
        .map(|i| (format!("T{i}"), (0..rng.gen_range(2..=6)).collect()))
        .collect();
    let u = Arc::new(Universe::new(vars).unwrap());
    let density = rng.gen_range(0.3..0.8);
    let mut cs = Vec::new();
    for _ in 0..rng.gen_range(2..=6) {
        let x = VarId(rng.gen_range(0..nvars) as u32);
        let y = VarId((x.0 + rng.gen_range(1..nvars as u32)) % nvars as u32);
        cs.push(random_table(&u, &mut rng, x, y, density));
    }
    Csp::new(u, cs).unwrap()
}

/// Arc consistency by repeated deletion of unsupported values, computed
/// directly on value lists. Unary tables filter their variable; binary
/// tables delete values without a support in the other variable.
pub fn brute_force_ac(csp: &Csp) -> Environment {
    let u = csp.universe();
    let mut doms: Vec<Vec<i64>> = u.var_ids().map(|v| u.var(v).values().to_vec()).collect();
    loop {
        let mut changed = false;
        for c in csp.constraints() {
            let Relation::Table(tuples) = c.relation() else {
                panic!("only tables are supported");
            };
            let scope = c.scope();
            if scope.len() == 1 {
                let x = scope[0].index();
                let before = doms[x].len();
                doms[x].retain(|&e| tuples.iter().any(|t| t[0] == e));
                changed |= doms[x].len() != before;
                continue;
            }
            let (x, y) = (scope[0].index(), scope[1].index());
            let before = doms[x].len() + doms[y].len();
            let dy = doms[y].clone();
            doms[x].retain(|&e| tuples.iter().any(|t| t[0] == e && dy.contains(&t[1])));
            let dx = doms[x].clone();
            doms[y].retain(|&f| tuples.iter().any(|t| t[1] == f && dx.contains(&t[0])));
            changed |= doms[x].len() + doms[y].len() != before;
        }
        if !changed {
            break;
        }
    }
    let pairs = u
        .var_ids()
        .flat_map(|v| doms[v.index()].iter().map(move |&e| ValuePair::new(v, e)));
    Environment::from_pairs(u, pairs.collect::<Vec<_>>()).unwrap()
}

/// Single-constraint variants of `csp`: every other comparison, offsets
/// moved by one, swapped comparison operands, constants moved by one and
/// tables missing one tuple. Returns the index of the changed constraint
/// with each variant.
pub fn mutations(csp: &Csp) -> Vec<(usize, Csp)> {
    let u = csp.universe();
    let mut out = Vec::new();
    for (i, c) in csp.constraints().iter().enumerate() {
        let mut variants = Vec::new();
        let scope = c.scope();
        match c.relation() {
            Relation::Compare { op, offset } => {
                for other in Comparison::ALL {
                    if other != *op {
                        variants.push(Constraint::compare(u, scope[0], other, scope[1], *offset));
                    }
                }
                for delta in [-1, 1] {
                    variants.push(Constraint::compare(u, scope[0], *op, scope[1], offset + delta));
                }
                variants.push(Constraint::compare(u, scope[1], *op, scope[0], *offset));
            }
            Relation::NeqConst(k) => {
                for delta in [-1, 1] {
                    variants.push(Constraint::neq_const(u, scope[0], k + delta));
                }
            }
            Relation::Table(tuples) => {
                for skip in 0..tuples.len() {
                    let mut fewer = tuples.clone();
                    fewer.remove(skip);
                    variants.push(Constraint::table(u, scope.to_vec(), fewer));
                }
            }
        }
        for v in variants.into_iter().filter_map(|v| v.ok()) {
            let mut cs = csp.constraints().to_vec();
            cs[i] = v;
            out.push((i, csp.with_constraints(cs).unwrap()));
        }
    }
    out
}
