//! Exact reachability relations of Q-VASR(S) as existential linear
//! arithmetic formulas, and a concrete simulator used as an oracle.
//!
//! A run is classified by its reset shape: the set `R` of coherence classes
//! reset at least once, the order of the last-reset events of those
//! classes (classes sharing a last-reset step form one block), and the edge
//! taken at each such event. Between consecutive events the run is a path
//! in the control graph that never resets a class whose last reset already
//! happened, so its effect on those classes is additive and depends only on
//! the Parikh image of the path. Paths are encoded by per-segment edge
//! counts, flow conservation and a level-based connectivity constraint.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fmt;

use num_traits::Zero;
use tracing::debug;

use crate::config::Limits;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Rational, RationalVector};
use crate::logic::{Formula, Term, Var};
use crate::vas::{coherence_of, QVasr, Transformer};

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Edge {
    pub src: usize,
    pub transformer: Transformer,
    pub dst: usize,
}

/// A Q-VASR with control states `0..states`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct QVasrs {
    pub states: usize,
    pub edges: Vec<Edge>,
    pub dim: usize,
}

impl QVasrs {
    pub fn new(states: usize, dim: usize) -> Self {
        QVasrs {
            states,
            edges: Vec::new(),
            dim,
        }
    }

    pub fn add_edge(&mut self, src: usize, transformer: Transformer, dst: usize) {
        assert!(src < self.states && dst < self.states, "edge endpoint out of range");
        assert_eq!(transformer.dim(), self.dim, "transformer dimension mismatch");
        let e = Edge {
            src,
            transformer,
            dst,
        };
        if !self.edges.contains(&e) {
            self.edges.push(e);
        }
    }

    /// Single-state machine with one self-loop per transformer.
    pub fn from_vasr(v: &QVasr) -> Self {
        let mut m = QVasrs::new(1, v.dim());
        for t in v.iter() {
            m.add_edge(0, t.clone(), 0);
        }
        m
    }
}

impl fmt::Display for QVasrs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "states: {}", self.states)?;
        for e in &self.edges {
            writeln!(f, "  {} -> {}: {}", e.src, e.dst, e.transformer)?;
        }
        Ok(())
    }
}

/// Reachability formula over `pre` and `post` (rational) with free 0/1
/// selectors `begin[q]`, `end[q]` for the start and end control states.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ReachFormula {
    pub formula: Formula,
    pub pre: Vec<Var>,
    pub post: Vec<Var>,
    pub begin: Vec<Var>,
    pub end: Vec<Var>,
}

impl ReachFormula {
    pub fn selectors(&self) -> Vec<Var> {
        self.begin.iter().chain(&self.end).cloned().collect()
    }

    /// The formula with both selector families existentially closed.
    pub fn closed(&self) -> Formula {
        Formula::exists(self.selectors(), self.formula.clone())
    }

    /// Fixes the begin and end states.
    pub fn between(&self, p: usize, q: usize) -> Formula {
        Formula::and(vec![
            self.formula.clone(),
            Formula::eq(self.begin[p].term(), Term::int(1)),
            Formula::eq(self.end[q].term(), Term::int(1)),
        ])
    }

    /// Replaces `pre` by `S x` and `post` by `S x'`. Selectors stay free.
    pub fn instantiate(&self, sim: &Matrix, vocab: &[Var]) -> Formula {
        assert_eq!(sim.rows(), self.pre.len(), "simulation rows must match dimension");
        let primed: Vec<Var> = vocab.iter().map(Var::primed).collect();
        let zero = Rational::zero();
        let map = self
            .pre
            .iter()
            .zip(&self.post)
            .enumerate()
            .flat_map(|(i, (u, v))| {
                [
                    (u.clone(), Term::linear(sim.row(i), vocab, zero.clone())),
                    (v.clone(), Term::linear(sim.row(i), &primed, zero.clone())),
                ]
            })
            .collect();
        self.formula.substitute(&map)
    }

    /// Substitutes concrete endpoints (pre vector, post vector) and
    /// selector values.
    pub fn at(&self, p: usize, u: &[Rational], q: usize, v: &[Rational]) -> Formula {
        let mut map: std::collections::BTreeMap<Var, Term> = self
            .pre
            .iter()
            .cloned()
            .zip(u.iter().cloned().map(Term::Const))
            .chain(self.post.iter().cloned().zip(v.iter().cloned().map(Term::Const)))
            .collect();
        for (j, b) in self.begin.iter().enumerate() {
            map.insert(b.clone(), Term::int(i64::from(j == p)));
        }
        for (j, e) in self.end.iter().enumerate() {
            map.insert(e.clone(), Term::int(i64::from(j == q)));
        }
        self.formula.substitute(&map)
    }
}

pub fn pre_var(i: usize) -> Var {
    Var::real(format!("v!{i}"))
}

pub fn post_var(i: usize) -> Var {
    pre_var(i).primed()
}

pub fn begin_var(q: usize) -> Var {
    Var::int(format!("q!begin!{q}"))
}

pub fn end_var(q: usize) -> Var {
    Var::int(format!("q!end!{q}"))
}

/// One reset shape: `blocks[j]` is a bitmask of coherence classes whose
/// last reset is the `j`-th event, taken by edge `events[j]`.
#[derive(Clone, Debug)]
struct Shape {
    blocks: Vec<u64>,
    events: Vec<usize>,
}

/// Exact reachability relation of a Q-VASRS.
pub fn reach_vasrs(v: &QVasrs) -> Result<ReachFormula> {
    reach_vasrs_with(v, &Limits::default(), None)
}

/// Reachability relation of a Q-VASR (one control state).
pub fn reach_vasr(v: &QVasr) -> Result<ReachFormula> {
    reach_vasrs(&QVasrs::from_vasr(v))
}

/// As [`reach_vasrs`]; with `max_steps`, only runs of at most that many
/// steps are described.
pub fn reach_vasrs_with(
    v: &QVasrs,
    limits: &Limits,
    max_steps: Option<usize>,
) -> Result<ReachFormula> {
    let d = v.dim;
    let classes = coherence_of(d, v.edges.iter().map(|e| &e.transformer)).classes;
    if classes.len() > 63 {
        return Err(Error::ShapeCap(limits.shape_cap));
    }
    let class_of: Vec<usize> = (0..d)
        .map(|i| classes.iter().position(|c| c.contains(&i)).unwrap())
        .collect();
    let resets: Vec<u64> = v
        .edges
        .iter()
        .map(|e| {
            classes
                .iter()
                .enumerate()
                .filter(|(_, c)| e.transformer.resets(c[0]))
                .fold(0u64, |m, (k, _)| m | (1 << k))
        })
        .collect();
    let resettable = resets.iter().fold(0u64, |m, r| m | r);
    let shapes = enumerate_shapes(resettable, &resets, limits.shape_cap)?;
    debug!(
        classes = classes.len(),
        shapes = shapes.len(),
        edges = v.edges.len(),
        states = v.states,
        "reachability encoding"
    );

    let pre: Vec<Var> = (0..d).map(pre_var).collect();
    let post: Vec<Var> = (0..d).map(post_var).collect();
    let begin: Vec<Var> = (0..v.states).map(begin_var).collect();
    let end: Vec<Var> = (0..v.states).map(end_var).collect();

    let mut disjuncts = vec![Formula::and(
        (0..d)
            .map(|i| Formula::eq(post[i].term(), pre[i].term()))
            .chain((0..v.states).map(|q| Formula::eq(begin[q].term(), end[q].term())))
            .collect(),
    )];
    let enc = Encoder {
        v,
        class_of: &class_of,
        resets: &resets,
        pre: &pre,
        post: &post,
        begin: &begin,
        end: &end,
    };
    for shape in &shapes {
        if let Some(f) = enc.shape(shape, max_steps) {
            disjuncts.push(f);
        }
    }

    let mut parts = Vec::new();
    for sel in [&begin, &end] {
        for s in sel.iter() {
            parts.push(Formula::int_ge(s.term(), 0));
            parts.push(Formula::lt(s.term(), Term::int(2)));
        }
        parts.push(Formula::eq(
            Term::sum(sel.iter().map(Var::term).collect()),
            Term::int(1),
        ));
    }
    parts.push(Formula::or(disjuncts));
    Ok(ReachFormula {
        formula: Formula::and(parts),
        pre,
        post,
        begin,
        end,
    })
}

fn enumerate_shapes(resettable: u64, resets: &[u64], cap: usize) -> Result<Vec<Shape>> {
    let mut out = Vec::new();
    // Subsets of the resettable classes, including the empty set.
    let mut r = resettable;
    loop {
        let mut blocks = Vec::new();
        ordered_partitions(r, &mut blocks, &mut |blocks: &[u64]| {
            choose_events(blocks, resets, &mut Vec::new(), &mut out, cap)
        })?;
        if r == 0 {
            break;
        }
        r = (r - 1) & resettable;
    }
    Ok(out)
}

fn ordered_partitions(
    rest: u64,
    blocks: &mut Vec<u64>,
    emit: &mut dyn FnMut(&[u64]) -> Result<()>,
) -> Result<()> {
    if rest == 0 {
        return emit(blocks);
    }
    let mut sub = rest;
    while sub != 0 {
        blocks.push(sub);
        ordered_partitions(rest & !sub, blocks, emit)?;
        blocks.pop();
        sub = (sub - 1) & rest;
    }
    Ok(())
}

fn choose_events(
    blocks: &[u64],
    resets: &[u64],
    events: &mut Vec<usize>,
    out: &mut Vec<Shape>,
    cap: usize,
) -> Result<()> {
    let j = events.len();
    if j == blocks.len() {
        if out.len() >= cap {
            return Err(Error::ShapeCap(cap));
        }
        out.push(Shape {
            blocks: blocks.to_vec(),
            events: events.clone(),
        });
        return Ok(());
    }
    let later = blocks[j..].iter().fold(0u64, |m, b| m | b);
    for (e, &r) in resets.iter().enumerate() {
        if r & blocks[j] == blocks[j] && r & !later == 0 {
            events.push(e);
            choose_events(blocks, resets, events, out, cap)?;
            events.pop();
        }
    }
    Ok(())
}

struct Encoder<'a> {
    v: &'a QVasrs,
    class_of: &'a [usize],
    resets: &'a [u64],
    pre: &'a [Var],
    post: &'a [Var],
    begin: &'a [Var],
    end: &'a [Var],
}

/// Segment endpoint: a fixed state or the state chosen by a selector family.
#[derive(Clone, Copy)]
enum Endpoint<'a> {
    Fixed(usize),
    Selected(&'a [Var]),
}

impl Endpoint<'_> {
    /// `1` if the endpoint is `q`, as a term.
    fn indicator(&self, q: usize) -> Term {
        match self {
            Endpoint::Fixed(p) => Term::int(i64::from(*p == q)),
            Endpoint::Selected(vars) => vars[q].term(),
        }
    }
}

impl Encoder<'_> {
    fn shape(&self, shape: &Shape, max_steps: Option<usize>) -> Option<Formula> {
        let k = shape.blocks.len();
        if max_steps.is_some_and(|m| k > m) {
            return None;
        }
        let edges = &self.v.edges;
        let r_mask: u64 = shape.blocks.iter().fold(0, |m, b| m | b);
        let count = |s: usize, e: usize| Var::int(format!("n!{s}!{e}"));

        // Edges allowed in segment s never reset a class whose last reset
        // happened at or before event s.
        let allowed: Vec<Vec<usize>> = (0..=k)
            .map(|s| {
                let later = shape.blocks[s..].iter().fold(0u64, |m, b| m | b);
                (0..edges.len())
                    .filter(|&e| self.resets[e] & !later == 0)
                    .collect()
            })
            .collect();

        let mut bound = Vec::new();
        let mut parts = Vec::new();
        for (s, es) in allowed.iter().enumerate() {
            for &e in es {
                let n = count(s, e);
                parts.push(Formula::int_ge(n.term(), 0));
                bound.push(n);
            }
        }

        for i in 0..self.pre.len() {
            let class_bit = 1u64 << self.class_of[i];
            let block = shape.blocks.iter().position(|b| b & class_bit != 0);
            let (first_seg, base, first_event) = match block {
                None => {
                    debug_assert_eq!(r_mask & class_bit, 0);
                    (0, self.pre[i].term(), 0)
                }
                Some(j) => (
                    j + 1,
                    Term::Const(edges[shape.events[j]].transformer.add[i].clone()),
                    j + 1,
                ),
            };
            let mut terms = vec![base];
            for &e in &shape.events[first_event..] {
                terms.push(Term::Const(edges[e].transformer.add[i].clone()));
            }
            for (s, es) in allowed.iter().enumerate().skip(first_seg) {
                for &e in es {
                    let a = &edges[e].transformer.add[i];
                    if !a.is_zero() {
                        terms.push(count(s, e).term().scale(a.clone()));
                    }
                }
            }
            parts.push(Formula::eq(self.post[i].term(), Term::sum(terms)));
        }

        let mut levels = Vec::new();
        for (s, es) in allowed.iter().enumerate() {
            let start = if s == 0 {
                Endpoint::Selected(self.begin)
            } else {
                Endpoint::Fixed(edges[shape.events[s - 1]].dst)
            };
            let stop = if s == k {
                Endpoint::Selected(self.end)
            } else {
                Endpoint::Fixed(edges[shape.events[s]].src)
            };
            let level = |q: usize| Var::int(format!("l!{s}!{q}"));
            for q in 0..self.v.states {
                let ins: Vec<usize> = es.iter().copied().filter(|&e| edges[e].dst == q).collect();
                let outs: Vec<usize> = es.iter().copied().filter(|&e| edges[e].src == q).collect();
                let mut flow: Vec<Term> = ins.iter().map(|&e| count(s, e).term()).collect();
                flow.extend(outs.iter().map(|&e| count(s, e).term().neg()));
                flow.push(start.indicator(q));
                parts.push(Formula::eq(Term::sum(flow), stop.indicator(q)));

                if ins.is_empty() && outs.is_empty() {
                    continue;
                }
                let mut options = Vec::new();
                match start {
                    Endpoint::Fixed(p) if p == q => continue,
                    Endpoint::Fixed(_) => {}
                    Endpoint::Selected(vars) => {
                        options.push(Formula::eq(vars[q].term(), Term::int(1)))
                    }
                }
                options.push(Formula::and(
                    ins.iter()
                        .chain(&outs)
                        .map(|&e| Formula::eq(count(s, e).term(), Term::zero()))
                        .collect(),
                ));
                for &e in &ins {
                    let p = edges[e].src;
                    if p == q {
                        continue;
                    }
                    options.push(Formula::and(vec![
                        Formula::int_ge(count(s, e).term(), 1),
                        Formula::eq(level(p).term().add(Term::int(1)), level(q).term()),
                    ]));
                    levels.push(level(p));
                }
                levels.push(level(q));
                parts.push(Formula::or(options));
            }
        }

        if let Some(m) = max_steps {
            let total = Term::sum(bound.iter().map(Var::term).collect());
            parts.push(Formula::le(total, Term::int((m - k) as i64)));
        }

        let mut seen = HashSet::new();
        levels.retain(|l| seen.insert(l.clone()));
        bound.extend(levels);
        Some(Formula::exists(bound, Formula::and(parts)))
    }
}

/// A run: start configuration and the edges taken.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RunTrace {
    pub start_state: usize,
    pub start: RationalVector,
    pub edges: Vec<usize>,
}

/// One step along `edge` from `(state, vec)`.
pub fn step(v: &QVasrs, state: usize, vec: &[Rational], edge: usize) -> Result<(usize, RationalVector)> {
    let e = v
        .edges
        .get(edge)
        .ok_or_else(|| Error::Invalid(format!("no edge {edge}")))?;
    if e.src != state {
        return Err(Error::DisconnectedEdge { edge, state });
    }
    Ok((e.dst, e.transformer.apply(vec)))
}

/// All configurations reachable from `start` in at most `max_len` steps,
/// each with the first run found (breadth-first).
pub fn enumerate_reachable(
    v: &QVasrs,
    start: (usize, &[Rational]),
    max_len: usize,
) -> Vec<(usize, RationalVector, RunTrace)> {
    let (q0, u0) = start;
    let mut seen: BTreeSet<(usize, RationalVector)> = BTreeSet::new();
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    let trace0 = RunTrace {
        start_state: q0,
        start: u0.to_vec(),
        edges: vec![],
    };
    seen.insert((q0, u0.to_vec()));
    out.push((q0, u0.to_vec(), trace0.clone()));
    queue.push_back((q0, u0.to_vec(), trace0));
    while let Some((q, u, trace)) = queue.pop_front() {
        if trace.edges.len() == max_len {
            continue;
        }
        for (i, e) in v.edges.iter().enumerate() {
            if e.src != q {
                continue;
            }
            let w = e.transformer.apply(&u);
            if seen.insert((e.dst, w.clone())) {
                let mut t = trace.clone();
                t.edges.push(i);
                out.push((e.dst, w.clone(), t.clone()));
                queue.push_back((e.dst, w, t));
            }
        }
    }
    out
}

/// Replays a trace, returning the final configuration.
pub fn replay(v: &QVasrs, trace: &RunTrace) -> Result<(usize, RationalVector)> {
    trace
        .edges
        .iter()
        .try_fold((trace.start_state, trace.start.clone()), |(q, u), &e| step(v, q, &u, e))
}
