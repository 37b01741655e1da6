//! All-SAT enumeration of the Boolean skeleton modulo linear arithmetic.
//!
//! A DPLL search finds total assignments; the theory literals of each one are
//! checked with an LP, the assignment is shrunk to a partial one (a bunch) and
//! its negation is learned so no later bunch shares a completion with it.

use std::collections::BTreeMap;

use crate::deadline::Deadline;
use crate::error::{BackendError, LpError};
use crate::lp::lp_feasible;
use crate::model::{bunch_polytope, Bunch, Clause, Formula, Lit, SolverConfig};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TheoryVerdict {
    Consistent,
    /// Indices into the checked literal list whose conjunction is infeasible.
    Conflict(Vec<usize>),
}

/// Checks the conjunction of `(atom variable, value)` literals with the LP,
/// under the word-length box of `config`. Negated equalities are ignored. A
/// conflict is shrunk by deletion: each literal is dropped in turn and stays
/// out if the rest is still infeasible.
pub fn theory_check(
    formula: &Formula,
    literals: &[(usize, bool)],
    config: &SolverConfig,
) -> Result<TheoryVerdict, LpError> {
    let feasible = |subset: &[usize]| -> Result<bool, LpError> {
        let bunch = Bunch {
            assignment: subset.iter().map(|&i| literals[i]).collect(),
            free_user_bools: 0,
        };
        let (poly, _) = bunch_polytope(&bunch, formula, config);
        if poly.empty {
            return Ok(false);
        }
        Ok(lp_feasible(&poly.to_real())?.is_some())
    };
    let mut core: Vec<usize> = (0..literals.len()).collect();
    if feasible(&core)? {
        return Ok(TheoryVerdict::Consistent);
    }
    let mut i = 0;
    while i < core.len() {
        let mut trial = core.clone();
        trial.remove(i);
        if feasible(&trial)? {
            i += 1;
        } else {
            core = trial;
        }
    }
    Ok(TheoryVerdict::Conflict(core))
}

/// Greedy minimization: in descending variable order, `v` is unassigned when
/// every clause containing it keeps another assigned satisfying literal.
/// `total[v]` is the value of variable `v` (index 0 unused).
pub fn minimize_assignment(total: &[bool], clauses: &[Clause]) -> BTreeMap<usize, bool> {
    let nv = total.len().saturating_sub(1);
    let mut occurs: Vec<Vec<usize>> = vec![Vec::new(); nv + 1];
    let mut support: Vec<usize> = vec![0; clauses.len()];
    for (ci, clause) in clauses.iter().enumerate() {
        for l in clause {
            occurs[l.var()].push(ci);
            if l.satisfied_by(total[l.var()]) {
                support[ci] += 1;
            }
        }
    }
    let mut assigned = vec![true; nv + 1];
    for v in (1..=nv).rev() {
        let removable = occurs[v].iter().all(|&ci| {
            let own = clauses[ci].iter().any(|l| l.var() == v && l.satisfied_by(total[v]));
            support[ci] > own as usize
        });
        if removable {
            assigned[v] = false;
            for &ci in &occurs[v] {
                if clauses[ci].iter().any(|l| l.var() == v && l.satisfied_by(total[v])) {
                    support[ci] -= 1;
                }
            }
        }
    }
    (1..=nv).filter(|&v| assigned[v]).map(|v| (v, total[v])).collect()
}

fn code(l: Lit) -> usize {
    2 * l.var() + usize::from(!l.is_positive())
}

/// DPLL state over the growing clause database.
pub struct Enumerator<'a> {
    formula: &'a Formula,
    config: &'a SolverConfig,
    deadline: Deadline,
    clauses: Vec<Clause>,
    watches: Vec<Vec<usize>>,
    value: Vec<Option<bool>>,
    level: Vec<usize>,
    trail: Vec<Lit>,
    /// Trail length at the start of each decision level, and whether that
    /// level's decision is the second branch.
    levels: Vec<(usize, bool)>,
    qhead: usize,
    exhausted: bool,
    emitted: usize,
}

impl<'a> Enumerator<'a> {
    pub fn new(formula: &'a Formula, config: &'a SolverConfig, deadline: Deadline) -> Self {
        let nv = formula.num_bool_vars;
        let mut e = Enumerator {
            formula,
            config,
            deadline,
            clauses: Vec::new(),
            watches: vec![Vec::new(); 2 * nv + 2],
            value: vec![None; nv + 1],
            level: vec![0; nv + 1],
            trail: Vec::new(),
            levels: Vec::new(),
            qhead: 0,
            exhausted: false,
            emitted: 0,
        };
        for clause in &formula.clauses {
            let mut c = clause.clone();
            c.sort();
            c.dedup();
            if c.iter().any(|l| c.contains(&!*l)) {
                continue;
            }
            match c.len() {
                0 => e.exhausted = true,
                1 => {
                    if !e.enqueue(c[0]) {
                        e.exhausted = true;
                    }
                    e.clauses.push(c);
                }
                _ => {
                    let ci = e.clauses.len();
                    e.watches[code(c[0])].push(ci);
                    e.watches[code(c[1])].push(ci);
                    e.clauses.push(c);
                }
            }
        }
        e
    }

    pub fn emitted(&self) -> usize {
        self.emitted
    }

    fn lit_value(&self, l: Lit) -> Option<bool> {
        self.value[l.var()].map(|v| l.satisfied_by(v))
    }

    fn decision_level(&self) -> usize {
        self.levels.len()
    }

    /// Assigns `l` true; false when it is already false.
    fn enqueue(&mut self, l: Lit) -> bool {
        match self.lit_value(l) {
            Some(v) => v,
            None => {
                self.value[l.var()] = Some(l.is_positive());
                self.level[l.var()] = self.decision_level();
                self.trail.push(l);
                true
            }
        }
    }

    /// Unit propagation; returns false on conflict.
    fn propagate(&mut self) -> bool {
        while self.qhead < self.trail.len() {
            let falsified = !self.trail[self.qhead];
            self.qhead += 1;
            let watching = std::mem::take(&mut self.watches[code(falsified)]);
            let mut keep = Vec::with_capacity(watching.len());
            let mut ok = true;
            let mut it = watching.into_iter();
            for ci in it.by_ref() {
                let clause = &mut self.clauses[ci];
                if clause[0] == falsified {
                    clause.swap(0, 1);
                }
                let other = clause[0];
                if self.value[other.var()].is_some_and(|v| other.satisfied_by(v)) {
                    keep.push(ci);
                    continue;
                }
                let replacement = (2..clause.len()).find(|&k| {
                    let l = clause[k];
                    self.value[l.var()].is_none_or(|v| l.satisfied_by(v))
                });
                if let Some(k) = replacement {
                    clause.swap(1, k);
                    let w = code(clause[1]);
                    self.watches[w].push(ci);
                    continue;
                }
                keep.push(ci);
                if !self.enqueue(other) {
                    ok = false;
                    break;
                }
            }
            keep.extend(it);
            self.watches[code(falsified)].extend(keep);
            if !ok {
                self.qhead = self.trail.len();
                return false;
            }
        }
        true
    }

    fn backtrack_to(&mut self, lvl: usize) {
        if lvl >= self.decision_level() {
            return;
        }
        let start = self.levels[lvl].0;
        for l in self.trail.drain(start..) {
            self.value[l.var()] = None;
        }
        self.levels.truncate(lvl);
        self.qhead = self.trail.len();
    }

    /// Chronological backtracking: undoes levels up to the most recent first
    /// branch and switches it to its second branch. False when none remains.
    fn flip_last(&mut self) -> bool {
        while let Some(&(start, second)) = self.levels.last() {
            let decision = self.trail[start];
            self.backtrack_to(self.decision_level() - 1);
            if !second {
                self.levels.push((self.trail.len(), true));
                self.enqueue(!decision);
                return true;
            }
        }
        false
    }

    /// Adds a clause that the current assignment falsifies entirely.
    fn learn(&mut self, mut clause: Clause) {
        clause.sort();
        clause.dedup();
        let top = clause.iter().map(|l| self.level[l.var()]).max();
        let Some(top) = top.filter(|&t| t > 0) else {
            self.exhausted = true;
            return;
        };
        // a unit clause has no watches, so it must hold from level 0 on
        self.backtrack_to(if clause.len() == 1 { 0 } else { top - 1 });
        // unassigned literals first, then false ones by decreasing level
        clause.sort_by_key(|l| match self.value[l.var()] {
            None => (0, 0),
            Some(_) => (1, usize::MAX - self.level[l.var()]),
        });
        let ci = self.clauses.len();
        if clause.len() == 1 {
            self.enqueue(clause[0]);
        } else {
            self.watches[code(clause[0])].push(ci);
            self.watches[code(clause[1])].push(ci);
            if self.value[clause[1].var()].is_some() {
                self.enqueue(clause[0]);
            }
        }
        self.clauses.push(clause);
    }

    /// Runs DPLL to the next total assignment satisfying the clause database.
    fn next_model(&mut self) -> Result<Option<Vec<bool>>, BackendError> {
        let nv = self.formula.num_bool_vars;
        let mut next_var = 1;
        loop {
            if self.exhausted {
                return Ok(None);
            }
            self.deadline.check()?;
            if !self.propagate() {
                if !self.flip_last() {
                    self.exhausted = true;
                }
                next_var = 1;
                continue;
            }
            while next_var <= nv && self.value[next_var].is_some() {
                next_var += 1;
            }
            if next_var > nv {
                let total = std::iter::once(false)
                    .chain((1..=nv).map(|v| self.value[v].unwrap()))
                    .collect();
                return Ok(Some(total));
            }
            self.levels.push((self.trail.len(), false));
            self.enqueue(Lit::new(next_var, false));
        }
    }

    /// The next bunch, or `None` once every model is covered.
    pub fn next_bunch(&mut self) -> Result<Option<Bunch>, BackendError> {
        loop {
            let Some(total) = self.next_model()? else {
                return Ok(None);
            };
            let theory: Vec<(usize, bool)> = self.formula.atoms.keys().map(|&v| (v, total[v])).collect();
            match theory_check(self.formula, &theory, self.config)? {
                TheoryVerdict::Consistent => {}
                TheoryVerdict::Conflict(core) => {
                    let block = core.iter().map(|&i| Lit::new(theory[i].0, !theory[i].1)).collect();
                    self.learn(block);
                    continue;
                }
            }
            let assignment = minimize_assignment(&total, &self.clauses);
            let free_user_bools = (1..=self.formula.num_bool_vars)
                .filter(|v| !assignment.contains_key(v) && self.formula.is_user_bool(*v))
                .count();
            let bunch = Bunch { assignment, free_user_bools };
            self.learn(bunch.literals().into_iter().map(|l| !l).collect());
            self.emitted += 1;
            return Ok(Some(bunch));
        }
    }
}

/// Collects every bunch of `formula`.
pub fn enumerate_bunches(
    formula: &Formula,
    config: &SolverConfig,
    deadline: Deadline,
) -> Result<Vec<Bunch>, BackendError> {
    let mut e = Enumerator::new(formula, config, deadline);
    let mut out = Vec::new();
    while let Some(b) = e.next_bunch()? {
        out.push(b);
    }
    Ok(out)
}
