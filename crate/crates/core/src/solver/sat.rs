//! CDCL SAT solver: two watched literals, first-UIP learning, VSIDS with a
//! binary heap, phase saving and Luby restarts.

use std::fmt;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub u32);

/// A literal: variable index times two, plus one when negated.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lit(u32);

impl Lit {
    pub fn new(v: Var, positive: bool) -> Lit {
        Lit(v.0 * 2 + u32::from(!positive))
    }

    pub fn pos(v: Var) -> Lit {
        Lit::new(v, true)
    }

    pub fn var(self) -> Var {
        Var(self.0 >> 1)
    }

    pub fn is_pos(self) -> bool {
        self.0 & 1 == 0
    }

    fn idx(self) -> usize {
        self.0 as usize
    }
}

impl std::ops::Not for Lit {
    type Output = Lit;
    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

impl fmt::Debug for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_pos() {
            write!(f, "x{}", self.var().0)
        } else {
            write!(f, "-x{}", self.var().0)
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum LBool {
    True,
    False,
    Undef,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SatResult {
    Sat,
    Unsat,
    /// The conflict budget ran out.
    Unknown,
}

type CRef = usize;

struct Clause {
    lits: Vec<Lit>,
}

/// Max-heap of variables keyed by activity.
#[derive(Default)]
struct VarHeap {
    heap: Vec<u32>,
    pos: Vec<Option<usize>>,
}

impl VarHeap {
    fn grow(&mut self, n: usize) {
        self.pos.resize(n, None);
    }

    fn contains(&self, v: u32) -> bool {
        self.pos[v as usize].is_some()
    }

    fn insert(&mut self, v: u32, act: &[f64]) {
        if self.contains(v) {
            return;
        }
        self.heap.push(v);
        let i = self.heap.len() - 1;
        self.pos[v as usize] = Some(i);
        self.up(i, act);
    }

    fn bumped(&mut self, v: u32, act: &[f64]) {
        if let Some(i) = self.pos[v as usize] {
            self.up(i, act);
        }
    }

    fn pop(&mut self, act: &[f64]) -> Option<u32> {
        if self.heap.is_empty() {
            return None;
        }
        let top = self.heap[0];
        let last = self.heap.pop().unwrap();
        self.pos[top as usize] = None;
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.pos[last as usize] = Some(0);
            self.down(0, act);
        }
        Some(top)
    }

    fn up(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        while i > 0 {
            let p = (i - 1) / 2;
            if act[self.heap[p] as usize] >= act[v as usize] {
                break;
            }
            self.heap[i] = self.heap[p];
            self.pos[self.heap[i] as usize] = Some(i);
            i = p;
        }
        self.heap[i] = v;
        self.pos[v as usize] = Some(i);
    }

    fn down(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        let n = self.heap.len();
        loop {
            let l = 2 * i + 1;
            if l >= n {
                break;
            }
            let r = l + 1;
            let c = if r < n && act[self.heap[r] as usize] > act[self.heap[l] as usize] { r } else { l };
            if act[self.heap[c] as usize] <= act[v as usize] {
                break;
            }
            self.heap[i] = self.heap[c];
            self.pos[self.heap[i] as usize] = Some(i);
            i = c;
        }
        self.heap[i] = v;
        self.pos[v as usize] = Some(i);
    }
}

#[inline]
fn lit_value(assigns: &[LBool], l: Lit) -> LBool {
    match assigns[(l.0 >> 1) as usize] {
        LBool::Undef => LBool::Undef,
        a => {
            if (a == LBool::True) == l.is_pos() {
                LBool::True
            } else {
                LBool::False
            }
        }
    }
}

fn luby(y: f64, mut x: u64) -> f64 {
    let mut size = 1u64;
    let mut seq = 0u32;
    while size < x + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    while size - 1 != x {
        size = (size - 1) >> 1;
        seq -= 1;
        x %= size;
    }
    y.powi(seq as i32)
}

pub struct SatSolver {
    clauses: Vec<Clause>,
    watches: Vec<Vec<CRef>>,
    assigns: Vec<LBool>,
    level: Vec<u32>,
    reason: Vec<Option<CRef>>,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    activity: Vec<f64>,
    var_inc: f64,
    heap: VarHeap,
    phase: Vec<bool>,
    seen: Vec<bool>,
    ok: bool,
    pub conflicts: u64,
    pub decisions: u64,
}

impl Default for SatSolver {
    fn default() -> Self {
        SatSolver::new()
    }
}

impl SatSolver {
    pub fn new() -> SatSolver {
        SatSolver {
            clauses: Vec::new(),
            watches: Vec::new(),
            assigns: Vec::new(),
            level: Vec::new(),
            reason: Vec::new(),
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            activity: Vec::new(),
            var_inc: 1.0,
            heap: VarHeap::default(),
            phase: Vec::new(),
            seen: Vec::new(),
            ok: true,
            conflicts: 0,
            decisions: 0,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.assigns.len()
    }

    pub fn new_var(&mut self) -> Var {
        let v = self.assigns.len() as u32;
        self.assigns.push(LBool::Undef);
        self.level.push(0);
        self.reason.push(None);
        self.activity.push(0.0);
        self.phase.push(false);
        self.seen.push(false);
        self.watches.push(Vec::new());
        self.watches.push(Vec::new());
        self.heap.grow(self.assigns.len());
        self.heap.insert(v, &self.activity);
        Var(v)
    }

    pub fn value(&self, l: Lit) -> LBool {
        lit_value(&self.assigns, l)
    }

    /// Value of a variable in the current (after SAT: complete) assignment.
    pub fn model_value(&self, v: Var) -> bool {
        self.assigns[v.0 as usize] == LBool::True
    }

    fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    /// Adds a clause. The solver is first reset to decision level 0.
    /// Returns false if the clause set became trivially unsatisfiable.
    pub fn add_clause(&mut self, lits: &[Lit]) -> bool {
        if !self.ok {
            return false;
        }
        self.cancel_until(0);
        let mut ls: Vec<Lit> = lits.to_vec();
        ls.sort();
        ls.dedup();
        for w in ls.windows(2) {
            if w[0] == !w[1] {
                return true;
            }
        }
        let mut kept = Vec::with_capacity(ls.len());
        for l in ls {
            match self.value(l) {
                LBool::True => return true,
                LBool::False => {}
                LBool::Undef => kept.push(l),
            }
        }
        match kept.len() {
            0 => {
                self.ok = false;
                false
            }
            1 => {
                self.enqueue(kept[0], None);
                if self.propagate().is_some() {
                    self.ok = false;
                }
                self.ok
            }
            _ => {
                self.attach(kept);
                true
            }
        }
    }

    fn attach(&mut self, lits: Vec<Lit>) -> CRef {
        let cr = self.clauses.len();
        self.watches[(!lits[0]).idx()].push(cr);
        self.watches[(!lits[1]).idx()].push(cr);
        self.clauses.push(Clause { lits });
        cr
    }

    fn enqueue(&mut self, l: Lit, reason: Option<CRef>) {
        let v = l.var().0 as usize;
        self.assigns[v] = if l.is_pos() { LBool::True } else { LBool::False };
        self.level[v] = self.decision_level();
        self.reason[v] = reason;
        self.trail.push(l);
    }

    fn cancel_until(&mut self, lvl: u32) {
        if self.decision_level() <= lvl {
            return;
        }
        let lim = self.trail_lim[lvl as usize];
        for i in (lim..self.trail.len()).rev() {
            let l = self.trail[i];
            let v = l.var().0 as usize;
            self.phase[v] = l.is_pos();
            self.assigns[v] = LBool::Undef;
            self.reason[v] = None;
            self.heap.insert(v as u32, &self.activity);
        }
        self.trail.truncate(lim);
        self.trail_lim.truncate(lvl as usize);
        self.qhead = self.trail.len();
    }

    /// Unit propagation; returns a conflicting clause if any.
    fn propagate(&mut self) -> Option<CRef> {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            let false_lit = !p;
            let mut ws = std::mem::take(&mut self.watches[p.idx()]);
            let mut i = 0;
            let mut j = 0;
            let mut conflict = None;
            while i < ws.len() {
                let cr = ws[i];
                i += 1;
                let c = &mut self.clauses[cr].lits;
                if c[0] == false_lit {
                    c.swap(0, 1);
                }
                let first = c[0];
                if lit_value(&self.assigns, first) == LBool::True {
                    ws[j] = cr;
                    j += 1;
                    continue;
                }
                let mut found = false;
                for k in 2..c.len() {
                    if lit_value(&self.assigns, c[k]) != LBool::False {
                        c.swap(1, k);
                        let nw = !c[1];
                        self.watches[nw.idx()].push(cr);
                        found = true;
                        break;
                    }
                }
                if found {
                    continue;
                }
                ws[j] = cr;
                j += 1;
                if lit_value(&self.assigns, first) == LBool::False {
                    conflict = Some(cr);
                    while i < ws.len() {
                        ws[j] = ws[i];
                        j += 1;
                        i += 1;
                    }
                } else {
                    self.enqueue(first, Some(cr));
                }
            }
            ws.truncate(j);
            let extra = std::mem::take(&mut self.watches[p.idx()]);
            ws.extend(extra);
            self.watches[p.idx()] = ws;
            if conflict.is_some() {
                self.qhead = self.trail.len();
                return conflict;
            }
        }
        None
    }

    fn bump(&mut self, v: usize) {
        self.activity[v] += self.var_inc;
        if self.activity[v] > 1e100 {
            for a in self.activity.iter_mut() {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
        self.heap.bumped(v as u32, &self.activity);
    }

    /// First-UIP conflict analysis; returns the learnt clause (asserting
    /// literal first) and the backjump level.
    fn analyze(&mut self, mut confl: CRef) -> (Vec<Lit>, u32) {
        let mut learnt: Vec<Lit> = vec![Lit(0)];
        let mut path = 0;
        let mut p: Option<Lit> = None;
        let mut idx = self.trail.len();
        let dl = self.decision_level();
        loop {
            let lits = self.clauses[confl].lits.clone();
            let start = usize::from(p.is_some());
            for &q in &lits[start..] {
                let v = q.var().0 as usize;
                if !self.seen[v] && self.level[v] > 0 {
                    self.seen[v] = true;
                    self.bump(v);
                    if self.level[v] >= dl {
                        path += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                idx -= 1;
                if self.seen[self.trail[idx].var().0 as usize] {
                    break;
                }
            }
            let pl = self.trail[idx];
            p = Some(pl);
            let v = pl.var().0 as usize;
            self.seen[v] = false;
            path -= 1;
            if path == 0 {
                break;
            }
            confl = self.reason[v].expect("implied literal has a reason");
            // reason clauses keep the implied literal first
            let c = &mut self.clauses[confl].lits;
            if c[0] != pl {
                let k = c.iter().position(|&x| x == pl).unwrap();
                c.swap(0, k);
            }
        }
        learnt[0] = !p.unwrap();
        // local minimization: drop literals implied by others in the clause
        let keep: Vec<bool> = learnt
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                if i == 0 {
                    return true;
                }
                let v = l.var().0 as usize;
                match self.reason[v] {
                    None => true,
                    Some(r) => self.clauses[r].lits.iter().any(|&q| {
                        let qv = q.var().0 as usize;
                        qv != v && !self.seen[qv] && self.level[qv] > 0
                    }),
                }
            })
            .collect();
        for l in &learnt[1..] {
            self.seen[l.var().0 as usize] = false;
        }
        let mut learnt: Vec<Lit> = learnt.into_iter().zip(keep).filter(|(_, k)| *k).map(|(l, _)| l).collect();
        let bt = if learnt.len() == 1 {
            0
        } else {
            let mut maxi = 1;
            for i in 2..learnt.len() {
                if self.level[learnt[i].var().0 as usize] > self.level[learnt[maxi].var().0 as usize] {
                    maxi = i;
                }
            }
            learnt.swap(1, maxi);
            self.level[learnt[1].var().0 as usize]
        };
        (learnt, bt)
    }

    fn pick_branch(&mut self) -> Option<Lit> {
        while let Some(v) = self.heap.pop(&self.activity) {
            if self.assigns[v as usize] == LBool::Undef {
                return Some(Lit::new(Var(v), self.phase[v as usize]));
            }
        }
        None
    }

    /// Runs CDCL until a complete satisfying assignment is found, the clause
    /// set is refuted, or `max_conflicts` conflicts occur.
    pub fn solve_limited(&mut self, max_conflicts: Option<u64>) -> SatResult {
        if !self.ok {
            return SatResult::Unsat;
        }
        self.cancel_until(0);
        if self.propagate().is_some() {
            self.ok = false;
            return SatResult::Unsat;
        }
        let start = self.conflicts;
        let mut restart_idx = 0u64;
        let mut budget = (luby(2.0, restart_idx) * 100.0) as u64;
        let mut since_restart = 0u64;
        loop {
            if let Some(confl) = self.propagate() {
                self.conflicts += 1;
                since_restart += 1;
                if self.decision_level() == 0 {
                    self.ok = false;
                    return SatResult::Unsat;
                }
                let (learnt, bt) = self.analyze(confl);
                self.cancel_until(bt);
                if learnt.len() == 1 {
                    self.enqueue(learnt[0], None);
                } else {
                    let l0 = learnt[0];
                    let cr = self.attach(learnt);
                    self.enqueue(l0, Some(cr));
                }
                self.var_inc /= 0.95;
                continue;
            }
            if let Some(m) = max_conflicts {
                if self.conflicts - start >= m {
                    self.cancel_until(0);
                    return SatResult::Unknown;
                }
            }
            if since_restart >= budget {
                since_restart = 0;
                restart_idx += 1;
                budget = (luby(2.0, restart_idx) * 100.0) as u64;
                self.cancel_until(0);
                continue;
            }
            match self.pick_branch() {
                None => return SatResult::Sat,
                Some(l) => {
                    self.decisions += 1;
                    self.trail_lim.push(self.trail.len());
                    self.enqueue(l, None);
                }
            }
        }
    }

    pub fn solve(&mut self) -> SatResult {
        self.solve_limited(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(n: usize, cls: &[Vec<Lit>]) -> bool {
        (0..1u32 << n).any(|m| {
            cls.iter().all(|c| c.iter().any(|l| ((m >> l.var().0) & 1 == 1) == l.is_pos()))
        })
    }

    #[test]
    fn pigeonhole_3_2_unsat() {
        let mut s = SatSolver::new();
        let v: Vec<Vec<Var>> = (0..3).map(|_| (0..2).map(|_| s.new_var()).collect()).collect();
        for p in &v {
            s.add_clause(&[Lit::pos(p[0]), Lit::pos(p[1])]);
        }
        for h in 0..2 {
            for a in 0..3 {
                for b in a + 1..3 {
                    s.add_clause(&[!Lit::pos(v[a][h]), !Lit::pos(v[b][h])]);
                }
            }
        }
        assert_eq!(s.solve(), SatResult::Unsat);
    }

    #[test]
    fn random_3sat_matches_truth_tables() {
        let mut seed = 12345u64;
        let mut next = || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            seed
        };
        for _ in 0..300 {
            let n = 8;
            let m = (next() % 40) as usize + 5;
            let cls: Vec<Vec<Lit>> = (0..m)
                .map(|_| (0..3).map(|_| Lit::new(Var((next() % n) as u32), next() % 2 == 0)).collect())
                .collect();
            let mut s = SatSolver::new();
            for _ in 0..n {
                s.new_var();
            }
            for c in &cls {
                s.add_clause(c);
            }
            let r = s.solve();
            assert_eq!(r == SatResult::Sat, brute(n as usize, &cls));
            if r == SatResult::Sat {
                for c in &cls {
                    assert!(c.iter().any(|l| s.model_value(l.var()) == l.is_pos()));
                }
            }
        }
    }
}
