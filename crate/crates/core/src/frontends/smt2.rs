//! A small SMT-LIBv2 front end for quantifier-free linear arithmetic:
//! `declare-fun` (nullary), `assert`, `let`, the Boolean connectives, linear
//! terms and comparisons. Assertions are conjoined, atoms are collected into
//! the theory map and the Boolean structure goes through Tseitin conversion.

use std::collections::{BTreeMap, HashMap};

use num_rational::BigRational;
use num_traits::{One, Zero};

use super::tseitin::{tseitin_cnf, BoolExpr};
use super::volce::parse_number;
use crate::error::ParseError;
use crate::model::{normalize_constraint, CanonicalConstraint, CmpOp, Formula, NumericKind, Triviality};

#[derive(Clone, Debug, PartialEq)]
enum Sexp {
    Atom(String, usize),
    List(Vec<Sexp>, usize),
}

impl Sexp {
    fn line(&self) -> usize {
        match self {
            Sexp::Atom(_, l) | Sexp::List(_, l) => *l,
        }
    }

    fn symbol(&self) -> Option<&str> {
        match self {
            Sexp::Atom(s, _) => Some(s),
            Sexp::List(..) => None,
        }
    }
}

fn read_sexps(text: &str) -> Result<Vec<Sexp>, ParseError> {
    let mut stack: Vec<(Vec<Sexp>, usize)> = Vec::new();
    let mut top = Vec::new();
    let mut line = 1;
    let mut chars = text.chars().peekable();
    let push = |stack: &mut Vec<(Vec<Sexp>, usize)>, top: &mut Vec<Sexp>, e: Sexp| match stack.last_mut() {
        Some((items, _)) => items.push(e),
        None => top.push(e),
    };
    while let Some(c) = chars.next() {
        match c {
            '\n' => line += 1,
            c if c.is_whitespace() => {}
            ';' => {
                for c in chars.by_ref() {
                    if c == '\n' {
                        line += 1;
                        break;
                    }
                }
            }
            '(' => stack.push((Vec::new(), line)),
            ')' => {
                let (items, start) = stack.pop().ok_or_else(|| ParseError::new(line, "unbalanced `)`"))?;
                push(&mut stack, &mut top, Sexp::List(items, start));
            }
            '|' => {
                let start = line;
                let mut s = String::new();
                loop {
                    match chars.next() {
                        Some('|') => break,
                        Some(c) => {
                            if c == '\n' {
                                line += 1;
                            }
                            s.push(c);
                        }
                        None => return Err(ParseError::new(start, "unterminated quoted symbol")),
                    }
                }
                push(&mut stack, &mut top, Sexp::Atom(s, start));
            }
            '"' => {
                let start = line;
                let mut s = String::from("\"");
                loop {
                    match chars.next() {
                        Some('"') if chars.peek() == Some(&'"') => {
                            chars.next();
                            s.push('"');
                        }
                        Some('"') => break,
                        Some(c) => {
                            if c == '\n' {
                                line += 1;
                            }
                            s.push(c);
                        }
                        None => return Err(ParseError::new(start, "unterminated string literal")),
                    }
                }
                push(&mut stack, &mut top, Sexp::Atom(s, start));
            }
            c => {
                let mut s = String::from(c);
                while let Some(&n) = chars.peek() {
                    if n.is_whitespace() || n == '(' || n == ')' || n == ';' {
                        break;
                    }
                    s.push(n);
                    chars.next();
                }
                push(&mut stack, &mut top, Sexp::Atom(s, line));
            }
        }
    }
    if let Some((_, start)) = stack.last() {
        return Err(ParseError::new(*start, "unbalanced `(`"));
    }
    Ok(top)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sort {
    Bool,
    Int,
    Real,
}

impl Sort {
    fn is_numeric(self) -> bool {
        self != Sort::Bool
    }
}

/// Sort-checked term of the supported fragment.
#[derive(Clone, Debug, PartialEq)]
pub enum SmtAst {
    BoolConst(bool),
    NumConst(BigRational),
    Var { name: String, sort: Sort },
    And(Vec<SmtAst>),
    Or(Vec<SmtAst>),
    Not(Box<SmtAst>),
    Implies(Vec<SmtAst>),
    Ite(Box<SmtAst>, Box<SmtAst>, Box<SmtAst>),
    Let(Vec<(String, SmtAst)>, Box<SmtAst>),
    Add(Vec<SmtAst>),
    Sub(Vec<SmtAst>),
    Mul(Vec<SmtAst>),
    Div(Box<SmtAst>, Vec<SmtAst>),
    Cmp(CmpOp, Vec<SmtAst>),
    Distinct(Vec<SmtAst>),
}

impl SmtAst {
    pub fn sort(&self) -> Sort {
        match self {
            SmtAst::NumConst(q) => {
                if q.is_integer() {
                    Sort::Int
                } else {
                    Sort::Real
                }
            }
            SmtAst::Var { sort, .. } => *sort,
            SmtAst::Ite(_, t, _) => t.sort(),
            SmtAst::Let(_, body) => body.sort(),
            SmtAst::Add(xs) | SmtAst::Sub(xs) | SmtAst::Mul(xs) => numeric_sort(xs),
            SmtAst::Div(..) => Sort::Real,
            _ => Sort::Bool,
        }
    }
}

fn numeric_sort(xs: &[SmtAst]) -> Sort {
    if xs.iter().any(|x| x.sort() == Sort::Real) {
        Sort::Real
    } else {
        Sort::Int
    }
}

struct Declarations {
    sorts: HashMap<String, Sort>,
    numeric_index: HashMap<String, usize>,
    bool_index: HashMap<String, usize>,
    numeric_names: Vec<String>,
    num_bools: usize,
}

fn elaborate(e: &Sexp, decls: &Declarations, scope: &mut Vec<(String, Sort)>) -> Result<SmtAst, ParseError> {
    let line = e.line();
    let err = |m: String| ParseError::new(line, m);
    match e {
        Sexp::Atom(s, _) => {
            if s == "true" || s == "false" {
                return Ok(SmtAst::BoolConst(s == "true"));
            }
            if let Some(q) = parse_number(s) {
                if !s.starts_with('-') && !s.starts_with('+') && !s.contains('/') {
                    return Ok(SmtAst::NumConst(q));
                }
            }
            if let Some((_, sort)) = scope.iter().rev().find(|(n, _)| n == s) {
                return Ok(SmtAst::Var { name: s.clone(), sort: *sort });
            }
            if let Some(sort) = decls.sorts.get(s) {
                return Ok(SmtAst::Var { name: s.clone(), sort: *sort });
            }
            Err(err(format!("unknown identifier `{s}`")))
        }
        Sexp::List(items, _) => {
            let Some(head) = items.first() else {
                return Err(err("empty application".into()));
            };
            let Some(op) = head.symbol() else {
                return Err(err("unsupported application head".into()));
            };
            if op == "let" {
                let [_, Sexp::List(binds, _), body] = items.as_slice() else {
                    return Err(err("malformed let".into()));
                };
                let mut bound = Vec::with_capacity(binds.len());
                for b in binds {
                    let Sexp::List(pair, _) = b else { return Err(err("malformed let binding".into())) };
                    let [Sexp::Atom(name, _), value] = pair.as_slice() else {
                        return Err(err("malformed let binding".into()));
                    };
                    // bindings are parallel: values see the outer scope only
                    bound.push((name.clone(), elaborate(value, decls, scope)?));
                }
                let depth = scope.len();
                scope.extend(bound.iter().map(|(n, v)| (n.clone(), v.sort())));
                let body = elaborate(body, decls, scope);
                scope.truncate(depth);
                return Ok(SmtAst::Let(bound, Box::new(body?)));
            }
            let args = items[1..]
                .iter()
                .map(|a| elaborate(a, decls, scope))
                .collect::<Result<Vec<_>, _>>()?;
            let all = |pred: fn(Sort) -> bool, what: &str| -> Result<(), ParseError> {
                if args.iter().all(|a| pred(a.sort())) {
                    Ok(())
                } else {
                    Err(ParseError::new(line, format!("`{op}` expects {what} arguments")))
                }
            };
            let at_least = |k: usize| -> Result<(), ParseError> {
                if args.len() >= k {
                    Ok(())
                } else {
                    Err(ParseError::new(line, format!("`{op}` needs at least {k} arguments")))
                }
            };
            let is_bool = |s: Sort| s == Sort::Bool;
            Ok(match op {
                "and" | "or" => {
                    all(is_bool, "Boolean")?;
                    if op == "and" { SmtAst::And(args) } else { SmtAst::Or(args) }
                }
                "not" => {
                    all(is_bool, "Boolean")?;
                    if args.len() != 1 {
                        return Err(err("`not` takes one argument".into()));
                    }
                    SmtAst::Not(Box::new(args.into_iter().next().unwrap()))
                }
                "=>" => {
                    all(is_bool, "Boolean")?;
                    at_least(2)?;
                    SmtAst::Implies(args)
                }
                "ite" => {
                    if args.len() != 3 {
                        return Err(err("`ite` takes three arguments".into()));
                    }
                    if args[0].sort() != Sort::Bool {
                        return Err(err("`ite` condition must be Boolean".into()));
                    }
                    if args[1].sort() != Sort::Bool || args[2].sort() != Sort::Bool {
                        return Err(err("numeric `ite` is not supported".into()));
                    }
                    let mut it = args.into_iter();
                    SmtAst::Ite(
                        Box::new(it.next().unwrap()),
                        Box::new(it.next().unwrap()),
                        Box::new(it.next().unwrap()),
                    )
                }
                "+" | "*" => {
                    all(Sort::is_numeric, "numeric")?;
                    at_least(1)?;
                    if op == "+" { SmtAst::Add(args) } else { SmtAst::Mul(args) }
                }
                "-" => {
                    all(Sort::is_numeric, "numeric")?;
                    at_least(1)?;
                    SmtAst::Sub(args)
                }
                "/" => {
                    all(Sort::is_numeric, "numeric")?;
                    at_least(2)?;
                    let mut it = args.into_iter();
                    let first = it.next().unwrap();
                    SmtAst::Div(Box::new(first), it.collect())
                }
                "=" | "<" | "<=" | ">" | ">=" => {
                    at_least(2)?;
                    let cmp = CmpOp::from_symbol(op).unwrap();
                    if cmp == CmpOp::Eq && args.iter().all(|a| a.sort() == Sort::Bool) {
                        SmtAst::Cmp(cmp, args)
                    } else {
                        all(Sort::is_numeric, "numeric")?;
                        SmtAst::Cmp(cmp, args)
                    }
                }
                "distinct" => {
                    at_least(2)?;
                    let bools = args.iter().all(|a| a.sort() == Sort::Bool);
                    if !bools {
                        all(Sort::is_numeric, "numeric")?;
                    }
                    SmtAst::Distinct(args)
                }
                other => return Err(err(format!("unsupported identifier `{other}`"))),
            })
        }
    }
}

/// Linear expression `coeffs · x + constant`.
#[derive(Clone, Debug, PartialEq)]
struct LinExpr {
    coeffs: Vec<BigRational>,
    constant: BigRational,
}

impl LinExpr {
    fn constant(n: usize, c: BigRational) -> Self {
        LinExpr { coeffs: vec![BigRational::zero(); n], constant: c }
    }

    fn is_constant(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    fn add(mut self, other: &LinExpr, sign: &BigRational) -> Self {
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b * sign;
        }
        self.constant += &other.constant * sign;
        self
    }

    fn scale(mut self, k: &BigRational) -> Self {
        for a in self.coeffs.iter_mut() {
            *a *= k;
        }
        self.constant *= k;
        self
    }
}

#[derive(Clone)]
enum Bound {
    Bool(BoolExpr),
    Num(LinExpr),
}

struct Lowering<'a> {
    decls: &'a Declarations,
    atoms: HashMap<CanonicalConstraint, usize>,
    atom_order: Vec<CanonicalConstraint>,
}

impl<'a> Lowering<'a> {
    fn n(&self) -> usize {
        self.decls.numeric_names.len()
    }

    fn lookup<'e>(&self, name: &str, env: &'e [(String, Bound)]) -> Option<&'e Bound> {
        env.iter().rev().find(|(n, _)| n == name).map(|(_, b)| b)
    }

    fn num(&mut self, t: &SmtAst, env: &mut Vec<(String, Bound)>) -> Result<LinExpr, String> {
        let n = self.n();
        Ok(match t {
            SmtAst::NumConst(q) => LinExpr::constant(n, q.clone()),
            SmtAst::Var { name, .. } => match self.lookup(name, env) {
                Some(Bound::Num(e)) => e.clone(),
                Some(Bound::Bool(_)) => return Err(format!("`{name}` is Boolean")),
                None => {
                    let j = *self
                        .decls
                        .numeric_index
                        .get(name)
                        .ok_or_else(|| format!("`{name}` is not numeric"))?;
                    let mut e = LinExpr::constant(n, BigRational::zero());
                    e.coeffs[j] = BigRational::one();
                    e
                }
            },
            SmtAst::Let(binds, body) => {
                let depth = env.len();
                let values = self.bind_all(binds, env)?;
                env.extend(values);
                let r = self.num(body, env);
                env.truncate(depth);
                r?
            }
            SmtAst::Add(xs) => {
                let mut acc = LinExpr::constant(n, BigRational::zero());
                for x in xs {
                    acc = acc.add(&self.num(x, env)?, &BigRational::one());
                }
                acc
            }
            SmtAst::Sub(xs) => {
                let first = self.num(&xs[0], env)?;
                if xs.len() == 1 {
                    first.scale(&-BigRational::one())
                } else {
                    let mut acc = first;
                    for x in &xs[1..] {
                        acc = acc.add(&self.num(x, env)?, &-BigRational::one());
                    }
                    acc
                }
            }
            SmtAst::Mul(xs) => {
                let mut factor = BigRational::one();
                let mut var_part: Option<LinExpr> = None;
                for x in xs {
                    let e = self.num(x, env)?;
                    if e.is_constant() {
                        factor *= e.constant;
                    } else if var_part.is_some() {
                        return Err("multiplication of two variable terms is not linear".into());
                    } else {
                        var_part = Some(e);
                    }
                }
                match var_part {
                    Some(e) => e.scale(&factor),
                    None => LinExpr::constant(n, factor),
                }
            }
            SmtAst::Div(first, rest) => {
                let mut acc = self.num(first, env)?;
                for d in rest {
                    let e = self.num(d, env)?;
                    if !e.is_constant() {
                        return Err("division by a non-constant term".into());
                    }
                    if e.constant.is_zero() {
                        return Err("division by zero".into());
                    }
                    acc = acc.scale(&e.constant.recip());
                }
                acc
            }
            SmtAst::Ite(..) => return Err("numeric `ite` is not supported".into()),
            other => return Err(format!("expected a numeric term, found {other:?}")),
        })
    }

    fn bind_all(&mut self, binds: &[(String, SmtAst)], env: &mut Vec<(String, Bound)>) -> Result<Vec<(String, Bound)>, String> {
        let mut out = Vec::with_capacity(binds.len());
        for (name, value) in binds {
            let b = if value.sort() == Sort::Bool {
                Bound::Bool(self.boolean(value, env)?)
            } else {
                Bound::Num(self.num(value, env)?)
            };
            out.push((name.clone(), b));
        }
        Ok(out)
    }

    fn atom(&mut self, lhs: &LinExpr, op: CmpOp, rhs: &LinExpr) -> BoolExpr {
        let diff = lhs.clone().add(rhs, &-BigRational::one());
        let raw = crate::model::LinearConstraint::new(diff.coeffs, op, -diff.constant);
        let canon = normalize_constraint(&raw);
        match canon.triviality {
            Triviality::Tautology => BoolExpr::Const(true),
            Triviality::Contradiction => BoolExpr::Const(false),
            Triviality::Proper => {
                let base = self.decls.num_bools;
                let next = base + self.atom_order.len() + 1;
                let id = *self.atoms.entry(canon.clone()).or_insert_with(|| {
                    self.atom_order.push(canon);
                    next
                });
                BoolExpr::var(id)
            }
        }
    }

    fn boolean(&mut self, t: &SmtAst, env: &mut Vec<(String, Bound)>) -> Result<BoolExpr, String> {
        Ok(match t {
            SmtAst::BoolConst(b) => BoolExpr::Const(*b),
            SmtAst::Var { name, .. } => match self.lookup(name, env) {
                Some(Bound::Bool(e)) => e.clone(),
                Some(Bound::Num(_)) => return Err(format!("`{name}` is numeric")),
                None => {
                    let id = *self
                        .decls
                        .bool_index
                        .get(name)
                        .ok_or_else(|| format!("`{name}` is not Boolean"))?;
                    BoolExpr::var(id)
                }
            },
            SmtAst::Let(binds, body) => {
                let depth = env.len();
                let values = self.bind_all(binds, env)?;
                env.extend(values);
                let r = self.boolean(body, env);
                env.truncate(depth);
                r?
            }
            SmtAst::And(xs) => BoolExpr::And(self.booleans(xs, env)?),
            SmtAst::Or(xs) => BoolExpr::Or(self.booleans(xs, env)?),
            SmtAst::Not(x) => BoolExpr::not(self.boolean(x, env)?),
            SmtAst::Implies(xs) => {
                // right associative: a => (b => c)
                let mut parts = self.booleans(xs, env)?;
                let mut acc = parts.pop().unwrap();
                while let Some(p) = parts.pop() {
                    acc = BoolExpr::Or(vec![BoolExpr::not(p), acc]);
                }
                acc
            }
            SmtAst::Ite(c, a, b) => {
                let c = self.boolean(c, env)?;
                let a = self.boolean(a, env)?;
                let b = self.boolean(b, env)?;
                BoolExpr::Or(vec![
                    BoolExpr::And(vec![c.clone(), a]),
                    BoolExpr::And(vec![BoolExpr::not(c), b]),
                ])
            }
            SmtAst::Cmp(op, xs) => {
                let mut parts = Vec::with_capacity(xs.len() - 1);
                if xs.iter().all(|x| x.sort() == Sort::Bool) {
                    let bs = self.booleans(xs, env)?;
                    for w in bs.windows(2) {
                        parts.push(iff(w[0].clone(), w[1].clone()));
                    }
                } else {
                    let es = xs.iter().map(|x| self.num(x, env)).collect::<Result<Vec<_>, _>>()?;
                    for w in es.windows(2) {
                        parts.push(self.atom(&w[0], *op, &w[1]));
                    }
                }
                BoolExpr::And(parts)
            }
            SmtAst::Distinct(xs) => {
                let mut parts = Vec::new();
                if xs.iter().all(|x| x.sort() == Sort::Bool) {
                    let bs = self.booleans(xs, env)?;
                    for i in 0..bs.len() {
                        for j in (i + 1)..bs.len() {
                            parts.push(BoolExpr::not(iff(bs[i].clone(), bs[j].clone())));
                        }
                    }
                } else {
                    let es = xs.iter().map(|x| self.num(x, env)).collect::<Result<Vec<_>, _>>()?;
                    for i in 0..es.len() {
                        for j in (i + 1)..es.len() {
                            parts.push(BoolExpr::not(self.atom(&es[i], CmpOp::Eq, &es[j])));
                        }
                    }
                }
                BoolExpr::And(parts)
            }
            other => return Err(format!("expected a Boolean term, found {other:?}")),
        })
    }

    fn booleans(&mut self, xs: &[SmtAst], env: &mut Vec<(String, Bound)>) -> Result<Vec<BoolExpr>, String> {
        xs.iter().map(|x| self.boolean(x, env)).collect()
    }
}

fn iff(a: BoolExpr, b: BoolExpr) -> BoolExpr {
    BoolExpr::Or(vec![
        BoolExpr::And(vec![a.clone(), b.clone()]),
        BoolExpr::And(vec![BoolExpr::not(a), BoolExpr::not(b)]),
    ])
}

pub fn parse_smt2(text: &[u8]) -> Result<Formula, ParseError> {
    let text = std::str::from_utf8(text).map_err(|_| ParseError::new(0, "input is not valid UTF-8"))?;
    let commands = read_sexps(text)?;

    let mut decls = Declarations {
        sorts: HashMap::new(),
        numeric_index: HashMap::new(),
        bool_index: HashMap::new(),
        numeric_names: Vec::new(),
        num_bools: 0,
    };
    let mut saw_int = false;
    let mut saw_real = false;
    let mut assertions: Vec<(SmtAst, usize)> = Vec::new();

    for cmd in &commands {
        let line = cmd.line();
        let Sexp::List(items, _) = cmd else {
            return Err(ParseError::new(line, "expected a command"));
        };
        let name = items.first().and_then(Sexp::symbol).unwrap_or("");
        match name {
            "set-logic" | "set-info" | "check-sat" | "exit" => {}
            "declare-fun" => {
                if !assertions.is_empty() {
                    return Err(ParseError::new(line, "declare-fun must precede all assertions"));
                }
                let [_, Sexp::Atom(var, _), Sexp::List(params, _), Sexp::Atom(sort, _)] = items.as_slice() else {
                    return Err(ParseError::new(line, "malformed declare-fun"));
                };
                if !params.is_empty() {
                    return Err(ParseError::new(line, "only nullary functions are supported"));
                }
                if decls.sorts.contains_key(var) {
                    return Err(ParseError::new(line, format!("`{var}` declared twice")));
                }
                let sort = match sort.as_str() {
                    "Bool" => Sort::Bool,
                    "Int" => Sort::Int,
                    "Real" => Sort::Real,
                    other => return Err(ParseError::new(line, format!("unsupported sort `{other}`"))),
                };
                match sort {
                    Sort::Bool => {
                        decls.num_bools += 1;
                        decls.bool_index.insert(var.clone(), decls.num_bools);
                    }
                    _ => {
                        saw_int |= sort == Sort::Int;
                        saw_real |= sort == Sort::Real;
                        decls.numeric_index.insert(var.clone(), decls.numeric_names.len());
                        decls.numeric_names.push(var.clone());
                    }
                }
                decls.sorts.insert(var.clone(), sort);
            }
            "assert" => {
                let [_, term] = items.as_slice() else {
                    return Err(ParseError::new(line, "assert takes one term"));
                };
                let ast = elaborate(term, &decls, &mut Vec::new())?;
                if ast.sort() != Sort::Bool {
                    return Err(ParseError::new(line, "asserted term is not Boolean"));
                }
                assertions.push((ast, line));
            }
            other => return Err(ParseError::new(line, format!("unsupported command `{other}`"))),
        }
    }
    if saw_int && saw_real {
        return Err(ParseError::new(0, "mixing Int and Real variables is not supported"));
    }

    let mut lowering = Lowering { decls: &decls, atoms: HashMap::new(), atom_order: Vec::new() };
    let mut conjuncts = Vec::with_capacity(assertions.len());
    for (ast, line) in &assertions {
        conjuncts.push(lowering.boolean(ast, &mut Vec::new()).map_err(|m| ParseError::new(*line, m))?);
    }
    let root = BoolExpr::And(conjuncts).simplify();
    let first_free = decls.num_bools + lowering.atom_order.len();
    let cnf = tseitin_cnf(&root, first_free);

    let atoms: BTreeMap<usize, _> = lowering
        .atom_order
        .iter()
        .enumerate()
        .map(|(i, c)| (decls.num_bools + i + 1, c.to_raw()))
        .collect();
    let numeric_kind = if saw_int {
        Some(NumericKind::Int)
    } else if saw_real {
        Some(NumericKind::Real)
    } else {
        None
    };
    Ok(Formula {
        num_bool_vars: cnf.num_vars,
        clauses: cnf.clauses,
        atoms,
        num_numeric_vars: decls.numeric_names.len(),
        numeric_kind,
        var_names: decls.numeric_names.clone(),
        aux_vars: cnf.aux_vars,
    })
}
