//! Congruence closure over hash-consed ground terms, with a proof forest
//! for explaining why two terms are equal.

use std::collections::HashMap;

pub type TermId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Reason {
    Input(usize),
    /// two applications with pairwise equal arguments
    Congruence(TermId, TermId),
}

pub struct Congruence {
    /// function symbol id and argument ids for every term
    nodes: Vec<(usize, Vec<TermId>)>,
    parent: Vec<TermId>,
    members: Vec<Vec<TermId>>,
    uses: Vec<Vec<TermId>>,
    sigs: HashMap<(usize, Vec<TermId>), TermId>,
    proof: Vec<Option<(TermId, Reason)>>,
    pending: Vec<(TermId, TermId, Reason)>,
}

impl Congruence {
    /// `nodes[i]` is `(symbol, args)`; arguments must have smaller ids.
    pub fn new(nodes: Vec<(usize, Vec<TermId>)>) -> Congruence {
        let n = nodes.len();
        let mut cc = Congruence {
            parent: (0..n).collect(),
            members: (0..n).map(|i| vec![i]).collect(),
            uses: vec![Vec::new(); n],
            sigs: HashMap::new(),
            proof: vec![None; n],
            pending: Vec::new(),
            nodes,
        };
        for t in 0..n {
            if cc.nodes[t].1.is_empty() {
                continue;
            }
            let args = cc.nodes[t].1.clone();
            for &a in &args {
                if !cc.uses[a].contains(&t) {
                    cc.uses[a].push(t);
                }
            }
            let key = (cc.nodes[t].0, args);
            match cc.sigs.get(&key) {
                Some(&u) => cc.pending.push((t, u, Reason::Congruence(t, u))),
                None => {
                    cc.sigs.insert(key, t);
                }
            }
        }
        cc.process();
        cc
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn find(&self, t: TermId) -> TermId {
        self.parent[t]
    }

    /// Asserts `a = b` justified by the input tag.
    pub fn merge(&mut self, a: TermId, b: TermId, tag: usize) {
        self.pending.push((a, b, Reason::Input(tag)));
        self.process();
    }

    fn process(&mut self) {
        while let Some((a, b, r)) = self.pending.pop() {
            let (ra, rb) = (self.find(a), self.find(b));
            if ra == rb {
                continue;
            }
            self.add_proof_edge(a, b, r);
            // merge the smaller class into the larger
            let (small, big) = if self.members[ra].len() < self.members[rb].len() { (ra, rb) } else { (rb, ra) };
            let moved = std::mem::take(&mut self.members[small]);
            for &t in &moved {
                self.parent[t] = big;
            }
            self.members[big].extend(moved);
            let uses = std::mem::take(&mut self.uses[small]);
            for &u in &uses {
                let key = (self.nodes[u].0, self.nodes[u].1.iter().map(|&x| self.parent[x]).collect::<Vec<_>>());
                match self.sigs.get(&key) {
                    Some(&v) if self.find(v) != self.find(u) => {
                        self.pending.push((u, v, Reason::Congruence(u, v)));
                    }
                    Some(_) => {}
                    None => {
                        self.sigs.insert(key, u);
                    }
                }
            }
            self.uses[big].extend(uses);
        }
    }

    fn add_proof_edge(&mut self, a: TermId, b: TermId, r: Reason) {
        // re-root a's proof tree at a
        let mut prev: Option<(TermId, Reason)> = None;
        let mut cur = a;
        loop {
            let next = self.proof[cur];
            self.proof[cur] = prev;
            match next {
                None => break,
                Some((p, pr)) => {
                    prev = Some((cur, pr));
                    cur = p;
                }
            }
        }
        self.proof[a] = Some((b, r));
    }

    /// Input tags that imply `a = b`. Requires `find(a) == find(b)`.
    pub fn explain(&self, a: TermId, b: TermId) -> Vec<usize> {
        let mut out = Vec::new();
        let mut done = vec![false; self.nodes.len()];
        let mut todo = vec![(a, b)];
        while let Some((x, y)) = todo.pop() {
            if x == y {
                continue;
            }
            let lca = self.common_ancestor(x, y);
            for start in [x, y] {
                let mut cur = start;
                while cur != lca {
                    let (p, r) = self.proof[cur].expect("proof path");
                    if !done[cur] {
                        done[cur] = true;
                        match r {
                            Reason::Input(tag) => out.push(tag),
                            Reason::Congruence(u, v) => {
                                for (&s, &t) in self.nodes[u].1.iter().zip(&self.nodes[v].1) {
                                    todo.push((s, t));
                                }
                            }
                        }
                    }
                    cur = p;
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    fn common_ancestor(&self, a: TermId, b: TermId) -> TermId {
        let mut anc = std::collections::HashSet::new();
        let mut cur = a;
        anc.insert(cur);
        while let Some((p, _)) = self.proof[cur] {
            anc.insert(p);
            cur = p;
        }
        let mut cur = b;
        loop {
            if anc.contains(&cur) {
                return cur;
            }
            cur = self.proof[cur].expect("terms in the same class").0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn congruence_and_explanation() {
        // 0:a 1:b 2:f(a) 3:f(b) 4:c
        let mut cc = Congruence::new(vec![(0, vec![]), (1, vec![]), (2, vec![0]), (2, vec![1]), (3, vec![])]);
        cc.merge(0, 4, 10);
        cc.merge(4, 1, 11);
        assert_eq!(cc.find(2), cc.find(3));
        assert_eq!(cc.explain(2, 3), vec![10, 11]);
        assert_ne!(cc.find(0), cc.find(2));
    }

    #[test]
    fn nested_cycle() {
        // f(a)=b, f(b)=a: f(f(a)) = a
        // 0:a 1:b 2:f(a) 3:f(b) 4:f(f(a))
        let mut cc = Congruence::new(vec![(0, vec![]), (1, vec![]), (2, vec![0]), (2, vec![1]), (2, vec![2])]);
        cc.merge(2, 1, 0);
        cc.merge(3, 0, 1);
        assert_eq!(cc.find(4), cc.find(0));
        assert_eq!(cc.explain(4, 0), vec![0, 1]);
    }
}
