//! Exact thresholds: the least `M` such that every 2-colouring of `[N, M]`
//! contains a monochromatic solution to `x + y = z^2`.
//!
//! A colouring of `[N, M]` avoids all solutions iff every solution triple is
//! not-all-equal, so the decision problem is NAE-SAT over one variable per
//! element. The trusted kernel is a deterministic backtracker with unit-style
//! propagation; a DIMACS encoder bridges to external CDCL solvers for
//! independent audit and for scaling past desk limits.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::colouring::{Colour, ColouringSource, Interval};
use crate::oracle;

/// Exact search refuses intervals reaching past this.
pub const MAX_EXACT_M: u64 = 1 << 20;

/// The colour-blind constraint system for `[N, M]`: every triple
/// `x + y = z^2` inside the interval, each demanding not-all-equal colours.
#[derive(Clone, Debug)]
pub struct NaeInstance {
    n: u64,
    m: u64,
    include_trivial: bool,
    triples: Vec<(u64, u64, u64)>,
}

impl NaeInstance {
    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn include_trivial(&self) -> bool {
        self.include_trivial
    }

    /// Triples `(x, y, z)` with `x <= y`, sorted by `(z, x)`.
    pub fn triples(&self) -> &[(u64, u64, u64)] {
        &self.triples
    }

    pub fn elements(&self) -> u64 {
        self.m - self.n + 1
    }
}

#[derive(Debug, Error)]
pub enum ThresholdError {
    #[error("invalid range: N = {n} exceeds M = {m}")]
    InvalidRange { n: u64, m: u64 },
    #[error("M = {m} exceeds the exact-search cap of {max}")]
    CapacityExceeded { m: u64, max: u64 },
    #[error("external solver failed: {0}")]
    ExternalSolver(String),
}

/// Enumerates the solution pattern of `[n, m]`, colour-blind. The trivial
/// triple `(2, 2, 2)` is excluded unless `include_trivial` is set.
pub fn build_instance(
    n: u64,
    m: u64,
    include_trivial: bool,
) -> Result<NaeInstance, ThresholdError> {
    if n > m || n < 1 {
        return Err(ThresholdError::InvalidRange { n, m });
    }
    if m > MAX_EXACT_M {
        return Err(ThresholdError::CapacityExceeded { m, max: MAX_EXACT_M });
    }
    let mut triples = Vec::new();
    for z in n..=m {
        let s = z * z;
        if s > 2 * m {
            break;
        }
        if s < 2 * n {
            continue;
        }
        for x in n.max(s - m)..=s / 2 {
            if !include_trivial && z == 2 && x == 2 {
                continue;
            }
            triples.push((x, s - x, z));
        }
    }
    Ok(NaeInstance {
        n,
        m,
        include_trivial,
        triples,
    })
}

/// Result of one avoidability decision.
#[derive(Clone, Debug)]
pub struct SearchResult {
    /// A colouring of `[N, M]` with every triple not-all-equal, or `None`
    /// when no such colouring exists.
    pub witness: Option<ColouringSource>,
    /// Branch decisions explored (0 when an external solver decided).
    pub nodes_explored: u64,
}

struct Searcher<'a> {
    triples: Vec<[u32; 3]>,
    occ: Vec<Vec<u32>>,
    values: Vec<Option<bool>>,
    trail: Vec<u32>,
    nodes: u64,
    instance: &'a NaeInstance,
}

impl<'a> Searcher<'a> {
    fn new(instance: &'a NaeInstance) -> Searcher<'a> {
        let n_elems = instance.elements() as usize;
        let triples: Vec<[u32; 3]> = instance
            .triples
            .iter()
            .map(|&(x, y, z)| {
                [
                    (x - instance.n) as u32,
                    (y - instance.n) as u32,
                    (z - instance.n) as u32,
                ]
            })
            .collect();
        let mut occ = vec![Vec::new(); n_elems];
        for (ti, t) in triples.iter().enumerate() {
            let mut seen = [u32::MAX; 3];
            for (slot, &e) in t.iter().enumerate() {
                if !seen[..slot].contains(&e) {
                    occ[e as usize].push(ti as u32);
                    seen[slot] = e;
                }
            }
        }
        Searcher {
            triples,
            occ,
            values: vec![None; n_elems],
            trail: Vec::new(),
            nodes: 0,
            instance,
        }
    }

    fn undo_to(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let v = self.trail.pop().unwrap();
            self.values[v as usize] = None;
        }
    }

    /// Assigns `var = val` and runs propagation to a fixed point. On
    /// conflict the trail is restored to its state at entry.
    fn assign_and_propagate(&mut self, var: u32, val: bool) -> bool {
        let mark = self.trail.len();
        if let Some(existing) = self.values[var as usize] {
            return existing == val;
        }
        self.values[var as usize] = Some(val);
        self.trail.push(var);
        let mut head = mark;
        while head < self.trail.len() {
            let v = self.trail[head];
            head += 1;
            for ti in 0..self.occ[v as usize].len() {
                let t = self.triples[self.occ[v as usize][ti] as usize];
                let [a, b, c] = t;
                let va = self.values[a as usize];
                let vb = self.values[b as usize];
                let vc = self.values[c as usize];
                if let (Some(xa), Some(xb), Some(xc)) = (va, vb, vc) {
                    if xa == xb && xb == xc {
                        self.undo_to(mark);
                        return false;
                    }
                    continue;
                }
                // two equal assigned values force the third opposite
                let force = if va.is_some() && va == vb {
                    Some((c, !va.unwrap()))
                } else if va.is_some() && va == vc {
                    Some((b, !va.unwrap()))
                } else if vb.is_some() && vb == vc {
                    Some((a, !vb.unwrap()))
                } else {
                    None
                };
                if let Some((target, forced)) = force {
                    match self.values[target as usize] {
                        None => {
                            self.values[target as usize] = Some(forced);
                            self.trail.push(target);
                        }
                        Some(existing) if existing != forced => {
                            self.undo_to(mark);
                            return false;
                        }
                        Some(_) => {}
                    }
                }
            }
        }
        true
    }

    fn first_unassigned(&self, from: usize) -> Option<usize> {
        (from..self.values.len()).find(|&i| self.values[i].is_none())
    }

    /// Depth-first search over the remaining free elements in ascending
    /// order, trying `+1` before `-1`. Assumes any prefix is already on the
    /// trail. Returns a total assignment if one satisfies every constraint.
    fn dfs(&mut self) -> Option<Vec<bool>> {
        struct Decision {
            var: u32,
            mark: usize,
            tried_both: bool,
        }
        let mut stack: Vec<Decision> = Vec::new();
        let mut cursor = 0usize;
        loop {
            match self.first_unassigned(cursor) {
                None => {
                    return Some(self.values.iter().map(|v| v.unwrap()).collect());
                }
                Some(u) => {
                    let var = u as u32;
                    let mark = self.trail.len();
                    self.nodes += 1;
                    if self.assign_and_propagate(var, true) {
                        stack.push(Decision {
                            var,
                            mark,
                            tried_both: false,
                        });
                        cursor = u + 1;
                        continue;
                    }
                    self.nodes += 1;
                    if self.assign_and_propagate(var, false) {
                        stack.push(Decision {
                            var,
                            mark,
                            tried_both: true,
                        });
                        cursor = u + 1;
                        continue;
                    }
                    // both branches failed: backtrack
                    loop {
                        let Some(d) = stack.pop() else {
                            return None;
                        };
                        self.undo_to(d.mark);
                        if !d.tried_both {
                            self.nodes += 1;
                            if self.assign_and_propagate(d.var, false) {
                                cursor = d.var as usize + 1;
                                stack.push(Decision {
                                    var: d.var,
                                    mark: d.mark,
                                    tried_both: true,
                                });
                                break;
                            }
                        }
                    }
                }
            }
        }
    }

    fn witness_from(&self, assignment: &[bool]) -> ColouringSource {
        let domain = Interval::new(self.instance.n, self.instance.m)
            .expect("instance range was validated");
        let colours: Vec<Colour> = assignment
            .iter()
            .map(|&b| if b { Colour::Plus } else { Colour::Minus })
            .collect();
        ColouringSource::from_colours(domain, &colours)
            .expect("exact-search domains fit in a bitmap")
    }
}

/// Decides avoidability by deterministic depth-first search. The first
/// element's colour is fixed to `+1` (colour-swap symmetry).
pub fn is_avoidable(instance: &NaeInstance) -> SearchResult {
    let mut s = Searcher::new(instance);
    if !s.assign_and_propagate(0, true) {
        return SearchResult {
            witness: None,
            nodes_explored: s.nodes,
        };
    }
    let witness = s.dfs().map(|a| s.witness_from(&a));
    SearchResult {
        witness,
        nodes_explored: s.nodes,
    }
}

/// Parallel variant: the tree is partitioned by forcing the colours of the
/// first `depth` elements after the symmetry-fixed one. The verdict matches
/// the sequential search; the witness is the one from the lowest prefix.
pub fn is_avoidable_parallel(instance: &NaeInstance, depth: usize) -> SearchResult {
    use rayon::prelude::*;
    let free = instance.elements().saturating_sub(1) as usize;
    let depth = depth.min(free).min(16);
    if depth == 0 {
        return is_avoidable(instance);
    }
    let results: Vec<(Option<ColouringSource>, u64)> = (0u32..1 << depth)
        .into_par_iter()
        .map(|mask| {
            let mut s = Searcher::new(instance);
            if !s.assign_and_propagate(0, true) {
                return (None, s.nodes);
            }
            for bit in 0..depth {
                let val = mask >> bit & 1 == 1;
                if !s.assign_and_propagate(bit as u32 + 1, val) {
                    return (None, s.nodes);
                }
            }
            (s.dfs().map(|a| s.witness_from(&a)), s.nodes)
        })
        .collect();
    let nodes_explored = results.iter().map(|(_, n)| n).sum();
    let witness = results.into_iter().find_map(|(w, _)| w);
    SearchResult {
        witness,
        nodes_explored,
    }
}

/// Decides avoidability by handing the DIMACS encoding to varisat, an
/// independent CDCL solver. Exercises the encoder on every call.
pub fn is_avoidable_external(instance: &NaeInstance) -> Result<SearchResult, ThresholdError> {
    let dimacs = encode_dimacs(instance);
    let mut solver = varisat::Solver::new();
    solver
        .add_dimacs_cnf(dimacs.as_bytes())
        .map_err(|e| ThresholdError::ExternalSolver(e.to_string()))?;
    let sat = solver
        .solve()
        .map_err(|e| ThresholdError::ExternalSolver(e.to_string()))?;
    if !sat {
        return Ok(SearchResult {
            witness: None,
            nodes_explored: 0,
        });
    }
    let model = solver
        .model()
        .ok_or_else(|| ThresholdError::ExternalSolver("sat verdict without model".into()))?;
    let n_elems = instance.elements() as usize;
    let mut colours = vec![Colour::Minus; n_elems];
    for lit in model {
        let idx = lit.var().index();
        if idx < n_elems && lit.is_positive() {
            colours[idx] = Colour::Plus;
        }
    }
    let domain = Interval::new(instance.n, instance.m).expect("validated range");
    let witness = ColouringSource::from_colours(domain, &colours)
        .expect("exact-search domains fit in a bitmap");
    Ok(SearchResult {
        witness: Some(witness),
        nodes_explored: 0,
    })
}

/// Which decision procedure a threshold search used.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "backtracking")]
    Backtracking,
    #[serde(rename = "external-solver")]
    ExternalSolver,
}

/// Decision engine selection for [`search_s`].
#[derive(Clone, Copy, Debug)]
pub enum Engine {
    /// The in-crate backtracker; `jobs > 1` partitions the search tree.
    Backtracking { jobs: usize },
    /// varisat over the DIMACS encoding.
    External,
}

impl Engine {
    fn method(&self) -> Method {
        match self {
            Engine::Backtracking { .. } => Method::Backtracking,
            Engine::External => Method::ExternalSolver,
        }
    }
}

/// `S(N)` with the avoiding witness for `[N, S(N) - 1]`.
#[derive(Clone, Debug)]
pub struct ThresholdResult {
    pub n: u64,
    pub s: u64,
    /// Avoiding colouring of `[N, S - 1]`; `None` only when `S = N`.
    pub witness: Option<ColouringSource>,
    pub nodes_explored: u64,
    pub method: Method,
}

/// Outcome of an ascending threshold search.
#[derive(Clone, Debug)]
pub enum SearchOutcome {
    Found(ThresholdResult),
    /// Every `M` up to the cap was still avoidable.
    CapExceeded {
        n: u64,
        cap: u64,
        witness: Option<ColouringSource>,
        nodes_explored: u64,
        method: Method,
    },
}

/// Ascends `M` from `N` until the first unavoidable interval `[N, M]`;
/// that `M` is `S(N)`. Stops at `m_cap` if everything is still avoidable.
pub fn search_s(
    n: u64,
    m_cap: u64,
    include_trivial: bool,
    engine: Engine,
) -> Result<SearchOutcome, ThresholdError> {
    let mut nodes_total = 0u64;
    let mut previous_witness: Option<ColouringSource> = None;
    for m in n..=m_cap {
        let instance = build_instance(n, m, include_trivial)?;
        let result = match engine {
            Engine::Backtracking { jobs } if jobs > 1 => {
                is_avoidable_parallel(&instance, jobs.next_power_of_two().trailing_zeros() as usize)
            }
            Engine::Backtracking { .. } => is_avoidable(&instance),
            Engine::External => is_avoidable_external(&instance)?,
        };
        nodes_total += result.nodes_explored;
        match result.witness {
            Some(w) => {
                debug_assert!(oracle::enumerate_solutions(&w, !instance.include_trivial(), 1)
                    .map(|v| v.is_empty())
                    .unwrap_or(false));
                previous_witness = Some(w);
            }
            None => {
                if let Some(ref w) = previous_witness {
                    let check = oracle::enumerate_solutions(w, !include_trivial, 1)
                        .expect("witness domains are scannable");
                    assert!(check.is_empty(), "retained witness admits a solution");
                }
                return Ok(SearchOutcome::Found(ThresholdResult {
                    n,
                    s: m,
                    witness: previous_witness,
                    nodes_explored: nodes_total,
                    method: engine.method(),
                }));
            }
        }
    }
    Ok(SearchOutcome::CapExceeded {
        n,
        cap: m_cap,
        witness: previous_witness,
        nodes_explored: nodes_total,
        method: engine.method(),
    })
}

/// CNF text: one variable per element (`element - N + 1`, true means `+1`);
/// per triple the two clauses ruling out all-`+1` and all-`-1`, duplicate
/// literals deduplicated. Satisfiable iff an avoiding colouring exists.
pub fn encode_dimacs(instance: &NaeInstance) -> String {
    let vars = instance.elements();
    let mut text = String::new();
    writeln!(
        text,
        "c n={} m={} triples={}",
        instance.n,
        instance.m,
        instance.triples.len()
    )
    .unwrap();
    writeln!(text, "p cnf {} {}", vars, 2 * instance.triples.len()).unwrap();
    for &(x, y, z) in &instance.triples {
        let mut lits: Vec<u64> = Vec::with_capacity(3);
        for e in [x, y, z] {
            let v = e - instance.n + 1;
            if !lits.contains(&v) {
                lits.push(v);
            }
        }
        for lit in &lits {
            write!(text, "-{lit} ").unwrap();
        }
        writeln!(text, "0").unwrap();
        for lit in &lits {
            write!(text, "{lit} ").unwrap();
        }
        writeln!(text, "0").unwrap();
    }
    text
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::colouring::Colouring;

    #[test]
    fn instance_examples() {
        let inst = build_instance(1, 4, false).unwrap();
        assert_eq!(inst.triples(), &[(1, 3, 2)]);

        let inst = build_instance(5, 7, false).unwrap();
        assert!(inst.triples().is_empty());

        let inst = build_instance(1, 10, false).unwrap();
        assert_eq!(
            inst.triples(),
            &[
                (1, 3, 2),
                (1, 8, 3),
                (2, 7, 3),
                (3, 6, 3),
                (4, 5, 3),
                (6, 10, 4),
                (7, 9, 4),
                (8, 8, 4),
            ]
        );
        // with the trivial triple included, (2,2,2) appears
        let inst = build_instance(1, 10, true).unwrap();
        assert_eq!(inst.triples()[1], (2, 2, 2));
    }

    #[test]
    fn capacity_and_range_errors() {
        assert!(matches!(
            build_instance(1, MAX_EXACT_M + 1, false),
            Err(ThresholdError::CapacityExceeded { .. })
        ));
        assert!(matches!(
            build_instance(5, 4, false),
            Err(ThresholdError::InvalidRange { .. })
        ));
    }

    #[test]
    fn avoidable_small_instances() {
        let inst = build_instance(1, 4, false).unwrap();
        let r = is_avoidable(&inst);
        let w = r.witness.expect("[1,4] is avoidable");
        assert!(oracle::enumerate_solutions(&w, true, 1).unwrap().is_empty());

        // empty triple list: the all-plus assignment works
        let inst = build_instance(5, 7, false).unwrap();
        let r = is_avoidable(&inst);
        let w = r.witness.unwrap();
        for n in 5..=7 {
            assert_eq!(w.colour_at(n).unwrap(), Colour::Plus);
        }
    }

    #[test]
    fn trivial_triple_makes_any_domain_containing_2_unavoidable() {
        let inst = build_instance(2, 2, true).unwrap();
        assert!(is_avoidable(&inst).witness.is_none());
    }

    #[test]
    fn s_of_1_and_3_frozen() {
        match search_s(1, 200, false, Engine::Backtracking { jobs: 1 }).unwrap() {
            SearchOutcome::Found(r) => {
                assert_eq!(r.s, 32);
                assert!(r.witness.is_some());
            }
            other => panic!("expected S(1), got {other:?}"),
        }
        match search_s(3, 200, false, Engine::Backtracking { jobs: 1 }).unwrap() {
            SearchOutcome::Found(r) => assert_eq!(r.s, 32),
            other => panic!("expected S(3), got {other:?}"),
        }
    }

    #[test]
    fn cap_exceeded_is_an_outcome_not_an_error() {
        match search_s(1, 20, false, Engine::Backtracking { jobs: 1 }).unwrap() {
            SearchOutcome::CapExceeded { cap: 20, witness, .. } => {
                assert!(witness.is_some());
            }
            other => panic!("expected cap report, got {other:?}"),
        }
    }

    #[test]
    fn unavoidability_is_monotone_in_m() {
        // S(1) = 32, so [1, 32] and every longer prefix is unavoidable
        for m in [32u64, 33, 40] {
            let inst = build_instance(1, m, false).unwrap();
            assert!(is_avoidable(&inst).witness.is_none(), "M = {m}");
        }
    }

    #[test]
    fn parallel_matches_sequential_verdict() {
        for (n, m) in [(1u64, 20u64), (1, 32), (3, 31), (3, 40)] {
            let inst = build_instance(n, m, false).unwrap();
            let seq = is_avoidable(&inst);
            let par = is_avoidable_parallel(&inst, 3);
            assert_eq!(seq.witness.is_some(), par.witness.is_some(), "({n},{m})");
            if let Some(w) = par.witness {
                assert!(oracle::enumerate_solutions(&w, true, 1).unwrap().is_empty());
            }
        }
    }

    #[test]
    fn external_solver_agrees_on_small_instances() {
        for (n, m) in [(1u64, 4u64), (1, 31), (1, 32), (2, 31), (2, 32), (5, 7)] {
            let inst = build_instance(n, m, false).unwrap();
            let ours = is_avoidable(&inst).witness.is_some();
            let theirs = is_avoidable_external(&inst).unwrap().witness.is_some();
            assert_eq!(ours, theirs, "({n},{m})");
        }
    }

    #[test]
    fn dimacs_single_triple() {
        let inst = build_instance(1, 4, false).unwrap();
        let text = encode_dimacs(&inst);
        assert_eq!(
            text,
            "c n=1 m=4 triples=1\np cnf 4 2\n-1 -3 -2 0\n1 3 2 0\n"
        );
    }

    #[test]
    fn dimacs_deduplicates_repeated_elements() {
        // [4,10] contains (8,8,4): variables 5 and 1
        let inst = build_instance(4, 10, false).unwrap();
        assert!(inst.triples().contains(&(8, 8, 4)));
        let text = encode_dimacs(&inst);
        assert!(text.contains("-5 -1 0\n5 1 0\n"), "{text}");
    }
}
