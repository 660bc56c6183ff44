//! The `.fd` model grammar and the `.expect` expected-environment format.
//!
//! ```text
//! # comment
//! var AM in 1..4;
//! var X in {1, 3, 5}
//! MA > AM; MP >= PM + 1
//! AM != PM
//! MA != 4
//! X = Y - 2
//! table (X, Y) { (1, 3), (5, 5) };
//! ```
//!
//! Statements end at `;` or at a newline outside brackets.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Location, Result};
use crate::model::{
    Comparison, Constraint, Csp, Environment, Relation, Universe, DEFAULT_VALUE_RANGE,
};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(i64),
    Var,
    In,
    Table,
    DotDot,
    Cmp(Comparison),
    Plus,
    Minus,
    Colon,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Newline,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(name) => format!("`{name}`"),
            Tok::Int(k) => format!("`{k}`"),
            Tok::Var => "`var`".into(),
            Tok::In => "`in`".into(),
            Tok::Table => "`table`".into(),
            Tok::DotDot => "`..`".into(),
            Tok::Cmp(op) => format!("`{}`", op.symbol()),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Colon => "`:`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Newline => "end of line".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

fn syntax(location: Location, message: impl Into<String>) -> Error {
    Error::Syntax {
        location,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, Location)>> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    for (line_no, line) in text.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let location = Location {
                line: line_no + 1,
                column: i + 1,
            };
            let c = chars[i];
            let next = chars.get(i + 1).copied();
            let (tok, width) = match c {
                '#' => break,
                c if c.is_whitespace() => {
                    i += 1;
                    continue;
                }
                c if c.is_ascii_digit() => {
                    let len = chars[i..].iter().take_while(|c| c.is_ascii_digit()).count();
                    let digits: String = chars[i..i + len].iter().collect();
                    let value = digits
                        .parse::<i64>()
                        .map_err(|_| syntax(location, format!("integer `{digits}` is too large")))?;
                    (Tok::Int(value), len)
                }
                c if c.is_alphabetic() || c == '_' => {
                    let len = chars[i..]
                        .iter()
                        .take_while(|c| c.is_alphanumeric() || **c == '_')
                        .count();
                    let word: String = chars[i..i + len].iter().collect();
                    let tok = match word.as_str() {
                        "var" => Tok::Var,
                        "in" => Tok::In,
                        "table" => Tok::Table,
                        _ => Tok::Ident(word),
                    };
                    (tok, len)
                }
                '.' if next == Some('.') => (Tok::DotDot, 2),
                '>' if next == Some('=') => (Tok::Cmp(Comparison::Ge), 2),
                '<' if next == Some('=') => (Tok::Cmp(Comparison::Le), 2),
                '!' if next == Some('=') => (Tok::Cmp(Comparison::Neq), 2),
                '>' => (Tok::Cmp(Comparison::Gt), 1),
                '<' => (Tok::Cmp(Comparison::Lt), 1),
                '=' => (Tok::Cmp(Comparison::Eq), 1),
                '+' => (Tok::Plus, 1),
                '-' => (Tok::Minus, 1),
                ':' => (Tok::Colon, 1),
                '(' => (Tok::LParen, 1),
                ')' => (Tok::RParen, 1),
                '{' => (Tok::LBrace, 1),
                '}' => (Tok::RBrace, 1),
                ',' => (Tok::Comma, 1),
                ';' => (Tok::Semi, 1),
                other => return Err(syntax(location, format!("unexpected character `{other}`"))),
            };
            match tok {
                Tok::LParen | Tok::LBrace => depth += 1,
                Tok::RParen | Tok::RBrace => depth = depth.saturating_sub(1),
                _ => {}
            }
            out.push((tok, location));
            i += width;
        }
        if depth == 0 {
            out.push((
                Tok::Newline,
                Location {
                    line: line_no + 1,
                    column: chars.len() + 1,
                },
            ));
        }
    }
    let end = Location {
        line: text.lines().count().max(1),
        column: text.lines().last().map_or(0, |l| l.chars().count()) + 1,
    };
    out.push((Tok::Eof, end));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, Location)>,
    pos: usize,
}

type Name = (String, Location);

enum Stmt {
    Var {
        name: Name,
        values: Vec<i64>,
    },
    Compare {
        x: Name,
        op: Comparison,
        y: Name,
        offset: i64,
    },
    NeqConst {
        x: Name,
        k: i64,
    },
    Table {
        location: Location,
        scope: Vec<Name>,
        tuples: Vec<Vec<i64>>,
    },
}

impl Parser {
    fn new(text: &str) -> Result<Self> {
        Ok(Parser {
            toks: lex(text)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn location(&self) -> Location {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, Location) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, wanted: &str) -> Error {
        syntax(
            self.location(),
            format!("expected {wanted}, found {}", self.peek().describe()),
        )
    }

    fn expect(&mut self, tok: Tok, wanted: &str) -> Result<Location> {
        if *self.peek() == tok {
            Ok(self.bump().1)
        } else {
            Err(self.unexpected(wanted))
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<Name> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                let (_, loc) = self.bump();
                Ok((name, loc))
            }
            _ => Err(self.unexpected("a variable name")),
        }
    }

    fn int(&mut self) -> Result<i64> {
        let negative = self.eat(&Tok::Minus);
        match *self.peek() {
            Tok::Int(k) => {
                self.bump();
                Ok(if negative { -k } else { k })
            }
            _ => Err(self.unexpected("an integer")),
        }
    }

    fn skip_blank(&mut self) {
        while matches!(self.peek(), Tok::Newline | Tok::Semi) {
            self.bump();
        }
    }

    fn end_statement(&mut self) -> Result<()> {
        match self.peek() {
            Tok::Semi | Tok::Newline => {
                self.bump();
                Ok(())
            }
            Tok::Eof => Ok(()),
            _ => Err(self.unexpected("`;` or end of line")),
        }
    }

    fn statements(&mut self) -> Result<Vec<Stmt>> {
        let mut out = Vec::new();
        loop {
            self.skip_blank();
            if *self.peek() == Tok::Eof {
                return Ok(out);
            }
            out.push(self.statement()?);
            self.end_statement()?;
        }
    }

    fn statement(&mut self) -> Result<Stmt> {
        match self.peek() {
            Tok::Var => {
                self.bump();
                let name = self.ident()?;
                self.expect(Tok::In, "`in`")?;
                let values = self.domain(&name)?;
                Ok(Stmt::Var { name, values })
            }
            Tok::Table => {
                let (_, location) = self.bump();
                self.expect(Tok::LParen, "`(`")?;
                let mut scope = vec![self.ident()?];
                while self.eat(&Tok::Comma) {
                    scope.push(self.ident()?);
                }
                self.expect(Tok::RParen, "`)`")?;
                self.expect(Tok::LBrace, "`{`")?;
                let mut tuples = Vec::new();
                if !self.eat(&Tok::RBrace) {
                    loop {
                        self.expect(Tok::LParen, "`(`")?;
                        let mut t = vec![self.int()?];
                        while self.eat(&Tok::Comma) {
                            t.push(self.int()?);
                        }
                        self.expect(Tok::RParen, "`)`")?;
                        tuples.push(t);
                        if !self.eat(&Tok::Comma) {
                            break;
                        }
                    }
                    self.expect(Tok::RBrace, "`}`")?;
                }
                Ok(Stmt::Table {
                    location,
                    scope,
                    tuples,
                })
            }
            Tok::Ident(_) => {
                let x = self.ident()?;
                let op = match self.peek() {
                    Tok::Cmp(op) => *op,
                    _ => return Err(self.unexpected("a comparison")),
                };
                self.bump();
                if op == Comparison::Neq && matches!(self.peek(), Tok::Int(_) | Tok::Minus) {
                    let k = self.int()?;
                    return Ok(Stmt::NeqConst { x, k });
                }
                let y = self.ident()?;
                let offset = match self.peek() {
                    Tok::Plus => {
                        self.bump();
                        self.int()?
                    }
                    Tok::Minus => {
                        self.bump();
                        self.int()?
                            .checked_neg()
                            .ok_or_else(|| syntax(self.location(), "offset out of range"))?
                    }
                    _ => 0,
                };
                Ok(Stmt::Compare { x, op, y, offset })
            }
            _ => Err(self.unexpected("`var`, `table` or a constraint")),
        }
    }

    fn domain(&mut self, name: &Name) -> Result<Vec<i64>> {
        let location = self.location();
        if self.eat(&Tok::LBrace) {
            let mut values = Vec::new();
            if !self.eat(&Tok::RBrace) {
                values.push(self.int()?);
                while self.eat(&Tok::Comma) {
                    values.push(self.int()?);
                }
                self.expect(Tok::RBrace, "`}`")?;
            }
            check_values(name, &values, location)?;
            return Ok(values);
        }
        let lo = self.int()?;
        self.expect(Tok::DotDot, "`..`")?;
        let hi = self.int()?;
        if lo > hi {
            return Err(Error::EmptyDomain(name.0.clone()).at(location));
        }
        check_values(name, &[lo, hi], location)?;
        Ok((lo..=hi).collect())
    }
}

fn check_values(name: &Name, values: &[i64], location: Location) -> Result<()> {
    if values.is_empty() {
        return Err(Error::EmptyDomain(name.0.clone()).at(location));
    }
    let range = DEFAULT_VALUE_RANGE;
    if let Some(&bad) = values.iter().find(|v| !range.contains(v)) {
        return Err(Error::ValueOutOfRange {
            var: name.0.clone(),
            value: bad,
            min: *range.start(),
            max: *range.end(),
        }
        .at(location));
    }
    Ok(())
}

/// Parses a model. Variables may be declared after their first use.
pub fn parse_model(text: &str) -> Result<Csp> {
    let stmts = Parser::new(text)?.statements()?;
    let mut decls = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for stmt in &stmts {
        if let Stmt::Var { name, values } = stmt {
            if !seen.insert(name.0.clone()) {
                return Err(Error::DuplicateVariable(name.0.clone()).at(name.1));
            }
            decls.push((name.0.clone(), values.clone()));
        }
    }
    let universe = Arc::new(Universe::new(decls)?);
    let resolve = |(name, loc): &Name| {
        universe
            .lookup(name)
            .ok_or_else(|| Error::UnknownVariable(name.clone()).at(*loc))
    };
    let mut constraints = Vec::new();
    for stmt in &stmts {
        let c = match stmt {
            Stmt::Var { .. } => continue,
            Stmt::Compare { x, op, y, offset } => {
                Constraint::compare(&universe, resolve(x)?, *op, resolve(y)?, *offset)
                    .map_err(|e| e.at(x.1))?
            }
            Stmt::NeqConst { x, k } => {
                Constraint::neq_const(&universe, resolve(x)?, *k).map_err(|e| e.at(x.1))?
            }
            Stmt::Table {
                location,
                scope,
                tuples,
            } => {
                let scope = scope.iter().map(resolve).collect::<Result<Vec<_>>>()?;
                Constraint::table(&universe, scope, tuples.clone()).map_err(|e| e.at(*location))?
            }
        };
        constraints.push(c);
    }
    Csp::new(universe, constraints)
}

fn write_list<T: std::fmt::Display>(out: &mut String, items: impl IntoIterator<Item = T>, sep: &str) {
    for (i, item) in items.into_iter().enumerate() {
        if i > 0 {
            out.push_str(sep);
        }
        let _ = write!(out, "{item}");
    }
}

/// Prints a model in the grammar accepted by [`parse_model`]. Constraint
/// labels are not part of the grammar; reparsing regenerates the default
/// ones.
pub fn print_model(csp: &Csp) -> String {
    let u = csp.universe();
    let mut out = String::new();
    for id in u.var_ids() {
        let var = u.var(id);
        let values = var.values();
        let (first, last) = (values[0], values[values.len() - 1]);
        let _ = write!(out, "var {} in ", var.name());
        if (last - first) as usize + 1 == values.len() {
            let _ = write!(out, "{first}..{last}");
        } else {
            out.push('{');
            write_list(&mut out, values, ", ");
            out.push('}');
        }
        out.push_str(";\n");
    }
    for c in csp.constraints() {
        let names: Vec<&str> = c.scope().iter().map(|&v| u.name(v)).collect();
        match c.relation() {
            Relation::Compare { op, offset } => {
                let _ = write!(out, "{} {} {}", names[0], op.symbol(), names[1]);
                match offset {
                    0 => {}
                    k if *k > 0 => {
                        let _ = write!(out, " + {k}");
                    }
                    k => {
                        let _ = write!(out, " - {}", k.unsigned_abs());
                    }
                }
            }
            Relation::NeqConst(k) => {
                let _ = write!(out, "{} != {k}", names[0]);
            }
            Relation::Table(tuples) => {
                let _ = write!(out, "table ({}) {{", names.join(", "));
                let rendered = tuples.iter().map(|t| {
                    let mut s = String::from("(");
                    write_list(&mut s, t, ", ");
                    s.push(')');
                    s
                });
                write_list(&mut out, rendered, ", ");
                out.push('}');
            }
        }
        out.push_str(";\n");
    }
    out
}

/// Parses an expected environment: lines `X: 1 2` list the expected values
/// of `X`. Variables without a line keep their whole initial domain; a
/// variable listed on several lines gets the union.
pub fn parse_expected(text: &str, universe: &Arc<Universe>) -> Result<Environment> {
    let mut env = Environment::full(universe);
    let mut listed = vec![false; universe.len()];
    for (line_no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        let at = |column: usize| Location {
            line: line_no + 1,
            column: column + 1,
        };
        let Some(colon) = line.find(':') else {
            let col = line.len() - line.trim_start().len();
            return Err(syntax(at(col), "expected `VAR: values`"));
        };
        let name = line[..colon].trim();
        let name_col = line.len() - line.trim_start().len();
        let var = universe
            .lookup(name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()).at(at(name_col)))?;
        if !listed[var.index()] {
            listed[var.index()] = true;
            env.bits_mut(var).clear();
        }
        let mut column = colon + 1;
        for word in line[colon + 1..].split_whitespace() {
            let offset = line[column..].find(word).map_or(column, |o| column + o);
            column = offset + word.len();
            let value: i64 = word
                .parse()
                .map_err(|_| syntax(at(offset), format!("expected an integer, found `{word}`")))?;
            env.insert(crate::model::ValuePair::new(var, value))
                .map_err(|e| e.at(at(offset)))?;
        }
    }
    Ok(env)
}

/// Lists the kept values of every variable, one `X: v1 v2` line each, in
/// declaration order. The output parses back with [`parse_expected`].
pub fn render_closure(env: &Environment) -> String {
    let u = env.universe();
    let mut out = String::new();
    for id in u.var_ids() {
        out.push_str(u.name(id));
        out.push(':');
        for v in env.values(id) {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    out
}
