//! Tseitin conversion with full biconditional gate definitions, so every
//! auxiliary variable is a function of the original ones.

use std::collections::BTreeSet;

use crate::model::{Clause, Lit};

/// Propositional expression whose leaves are Boolean variables (theory atoms
/// have already been replaced by their variables).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BoolExpr {
    Const(bool),
    Lit(Lit),
    Not(Box<BoolExpr>),
    And(Vec<BoolExpr>),
    Or(Vec<BoolExpr>),
}

impl BoolExpr {
    pub fn var(v: usize) -> BoolExpr {
        BoolExpr::Lit(Lit::new(v, true))
    }

    pub fn not(e: BoolExpr) -> BoolExpr {
        BoolExpr::Not(Box::new(e))
    }

    pub fn eval(&self, value: &dyn Fn(usize) -> bool) -> bool {
        match self {
            BoolExpr::Const(b) => *b,
            BoolExpr::Lit(l) => l.satisfied_by(value(l.var())),
            BoolExpr::Not(e) => !e.eval(value),
            BoolExpr::And(es) => es.iter().all(|e| e.eval(value)),
            BoolExpr::Or(es) => es.iter().any(|e| e.eval(value)),
        }
    }

    /// Folds constants and flattens nested connectives of the same kind.
    pub fn simplify(self) -> BoolExpr {
        match self {
            BoolExpr::Not(e) => match e.simplify() {
                BoolExpr::Const(b) => BoolExpr::Const(!b),
                BoolExpr::Lit(l) => BoolExpr::Lit(!l),
                BoolExpr::Not(inner) => *inner,
                other => BoolExpr::Not(Box::new(other)),
            },
            BoolExpr::And(es) => simplify_nary(es, true),
            BoolExpr::Or(es) => simplify_nary(es, false),
            other => other,
        }
    }
}

fn simplify_nary(es: Vec<BoolExpr>, is_and: bool) -> BoolExpr {
    let mut out = Vec::with_capacity(es.len());
    for e in es {
        match e.simplify() {
            BoolExpr::Const(b) if b == is_and => {}
            BoolExpr::Const(b) => return BoolExpr::Const(b),
            BoolExpr::And(inner) if is_and => out.extend(inner),
            BoolExpr::Or(inner) if !is_and => out.extend(inner),
            other => out.push(other),
        }
    }
    match out.len() {
        0 => BoolExpr::Const(is_and),
        1 => out.pop().unwrap(),
        _ if is_and => BoolExpr::And(out),
        _ => BoolExpr::Or(out),
    }
}

/// Output of [`tseitin_cnf`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Cnf {
    pub clauses: Vec<Clause>,
    pub aux_vars: BTreeSet<usize>,
    /// Highest variable id in use after conversion.
    pub num_vars: usize,
}

/// Converts `root` to an equisatisfiable CNF; fresh variables are numbered
/// from `num_vars + 1`. A constant-true root yields no clauses and a
/// constant-false root yields the empty clause.
pub fn tseitin_cnf(root: &BoolExpr, num_vars: usize) -> Cnf {
    let mut enc = Encoder { cnf: Cnf { num_vars, ..Cnf::default() } };
    match root {
        BoolExpr::Const(true) => {}
        BoolExpr::Const(false) => enc.cnf.clauses.push(Vec::new()),
        _ => {
            let top = enc.encode(root);
            enc.cnf.clauses.push(vec![top]);
        }
    }
    enc.cnf
}

struct Encoder {
    cnf: Cnf,
}

impl Encoder {
    fn fresh(&mut self) -> usize {
        self.cnf.num_vars += 1;
        self.cnf.aux_vars.insert(self.cnf.num_vars);
        self.cnf.num_vars
    }

    /// Literal whose value equals `e` in every model of the emitted clauses.
    fn encode(&mut self, e: &BoolExpr) -> Lit {
        match e {
            BoolExpr::Lit(l) => *l,
            BoolExpr::Not(inner) => !self.encode(inner),
            BoolExpr::Const(b) => {
                let g = self.fresh();
                self.cnf.clauses.push(vec![Lit::new(g, *b)]);
                Lit::new(g, true)
            }
            BoolExpr::And(es) => self.gate(es, true),
            BoolExpr::Or(es) => self.gate(es, false),
        }
    }

    fn gate(&mut self, es: &[BoolExpr], is_and: bool) -> Lit {
        let mut inputs: Vec<Lit> = Vec::with_capacity(es.len());
        for e in es {
            let l = self.encode(e);
            if !inputs.contains(&l) {
                inputs.push(l);
            }
        }
        if inputs.len() == 1 {
            return inputs[0];
        }
        let g = self.fresh();
        let out = Lit::new(g, true);
        let complementary = inputs.iter().any(|l| inputs.contains(&!*l));
        if complementary {
            // x and not x: the conjunction is false, the disjunction true
            self.cnf.clauses.push(vec![if is_and { !out } else { out }]);
            return out;
        }
        if is_and {
            // g -> x_i  and  (x_1 & ... & x_k) -> g
            for &x in &inputs {
                self.cnf.clauses.push(vec![!out, x]);
            }
            let mut back = vec![out];
            back.extend(inputs.iter().map(|&x| !x));
            self.cnf.clauses.push(back);
        } else {
            // g -> (x_1 | ... | x_k)  and  x_i -> g
            let mut fwd = vec![!out];
            fwd.extend(inputs.iter().copied());
            self.cnf.clauses.push(fwd);
            for &x in &inputs {
                self.cnf.clauses.push(vec![out, !x]);
            }
        }
        out
    }
}
