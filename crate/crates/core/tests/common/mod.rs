#![allow(dead_code)]

use vasr_core::logic::{parse_formula, Formula, Solver, TransitionFormula, Var};

pub fn solver() -> Solver {
    Solver::new().expect("an SMT solver must be available (set VASR_SMT_SOLVER)")
}

pub fn int_vars(names: &[&str]) -> Vec<Var> {
    names.iter().copied().map(Var::int).collect()
}

/// Parses an SMT-LIB2 term over `vocab`, its primed copy and any extra
/// variables.
pub fn formula(text: &str, vocab: &[Var], extra: &[Var]) -> Formula {
    let all: Vec<Var> = vocab
        .iter()
        .cloned()
        .chain(vocab.iter().map(Var::primed))
        .chain(extra.iter().cloned())
        .collect();
    parse_formula(text, &|n| all.iter().find(|v| v.name() == n).cloned())
        .unwrap_or_else(|e| panic!("bad test formula {text}: {e}"))
}

pub fn tf(text: &str, vocab: &[Var]) -> TransitionFormula {
    TransitionFormula::new(formula(text, vocab, &[]), vocab.to_vec())
}

/// The dequeue loop body over (front_len, back_len, mem_ops, size).
pub fn body_deq() -> TransitionFormula {
    let vocab = int_vars(&["front_len", "back_len", "mem_ops", "size"]);
    tf(
        "(and (> back_len 0) (= front_len' (+ front_len 1)) (= back_len' (- back_len 1)) \
         (= mem_ops' (+ mem_ops 3)) (= size' size))",
        &vocab,
    )
}

use rand::rngs::StdRng;
use rand::Rng;
use vasr_core::linalg::{rat, RationalVector};
use vasr_core::reach::QVasrs;
use vasr_core::vas::Transformer;

/// Random machine with `d <= 3`, at most 3 states, at most 4 edges and
/// entries in `[-2, 2]`.
pub fn random_machine(rng: &mut StdRng) -> QVasrs {
    let d = rng.gen_range(1..=3);
    let states = rng.gen_range(1..=3);
    let mut m = QVasrs::new(states, d);
    for _ in 0..rng.gen_range(0..=4) {
        let reset: Vec<u8> = (0..d).map(|_| u8::from(rng.gen_bool(0.7))).collect();
        let add: Vec<i64> = (0..d).map(|_| rng.gen_range(-2..=2)).collect();
        let src = rng.gen_range(0..states);
        let dst = rng.gen_range(0..states);
        m.add_edge(src, Transformer::from_ints(&reset, &add), dst);
    }
    m
}

pub fn random_vector(rng: &mut StdRng, d: usize) -> RationalVector {
    (0..d).map(|_| rat(rng.gen_range(-2..=2))).collect()
}

use vasr_core::logic::Term;
use vasr_core::reach::{enumerate_reachable, reach_vasrs_with, ReachFormula};
use vasr_core::Limits;

fn pin(r: &ReachFormula, p: Option<usize>, u: &[vasr_core::linalg::Rational]) -> Formula {
    let mut parts: Vec<Formula> = r
        .pre
        .iter()
        .zip(u)
        .map(|(x, c)| Formula::eq(x.term(), Term::Const(c.clone())))
        .collect();
    if let Some(p) = p {
        parts.push(Formula::eq(r.begin[p].term(), Term::int(1)));
    }
    Formula::and(parts)
}

/// Every configuration reachable in at most 5 steps from two random starts
/// satisfies the reachability formula. Returns the number of violations.
pub fn reach_soundness(h: &mut Solver, m: &QVasrs, rng: &mut StdRng) -> usize {
    let r = reach_vasrs_with(m, &Limits::default(), None).expect("encoding");
    let mut failures = 0;
    h.push().unwrap();
    h.assert(&r.formula).unwrap();
    for _ in 0..2 {
        let p = rng.gen_range(0..m.states);
        let u = random_vector(rng, m.dim);
        for (q, v, trace) in enumerate_reachable(m, (p, &u), 5) {
            let mut parts = vec![pin(&r, Some(p), &u)];
            parts.push(Formula::eq(r.end[q].term(), Term::int(1)));
            parts.extend(
                r.post
                    .iter()
                    .zip(&v)
                    .map(|(x, c)| Formula::eq(x.term(), Term::Const(c.clone()))),
            );
            h.push().unwrap();
            h.assert(&Formula::and(parts)).unwrap();
            let sat = h.check().unwrap();
            h.pop().unwrap();
            if !sat {
                eprintln!("unsound: machine {m:?}\n  run {trace:?} reaches ({q}, {v:?})");
                failures += 1;
            }
        }
    }
    h.pop().unwrap();
    failures
}

/// Models of the step-bounded reachability formula are reachable by the
/// concrete semantics. Samples up to 20 models (4 starts, 5 endpoints
/// each). Returns the number of violations.
pub fn reach_completeness(h: &mut Solver, m: &QVasrs, rng: &mut StdRng) -> usize {
    let r = reach_vasrs_with(m, &Limits::default(), Some(5)).expect("encoding");
    let mut failures = 0;
    let mut model_vars = r.post.clone();
    model_vars.extend(r.end.iter().cloned());
    h.push().unwrap();
    h.assert(&r.formula).unwrap();
    for _ in 0..4 {
        let p = rng.gen_range(0..m.states);
        let u = random_vector(rng, m.dim);
        let reachable: Vec<(usize, RationalVector)> = enumerate_reachable(m, (p, &u), 5)
            .into_iter()
            .map(|(q, v, _)| (q, v))
            .collect();
        h.push().unwrap();
        h.assert(&pin(&r, Some(p), &u)).unwrap();
        for _ in 0..5 {
            if !h.check().unwrap() {
                break;
            }
            let model = h.values(&model_vars).unwrap();
            let v: RationalVector = r.post.iter().map(|x| model.value(x)).collect();
            let q = (0..m.states)
                .find(|&q| model.value(&r.end[q]) == rat(1))
                .expect("one end state selected");
            if !reachable.contains(&(q, v.clone())) {
                eprintln!("incomplete: machine {m:?}\n  model reaches ({q}, {v:?}) from ({p}, {u:?})");
                failures += 1;
            }
            let mut block: Vec<Formula> = r
                .post
                .iter()
                .zip(&v)
                .map(|(x, c)| Formula::ne(x.term(), Term::Const(c.clone())))
                .collect();
            block.push(Formula::eq(r.end[q].term(), Term::zero()));
            h.assert(&Formula::or(block)).unwrap();
        }
        h.pop().unwrap();
    }
    h.pop().unwrap();
    failures
}

/// Point-wise entailment check: samples up to `n` distinct assignments to
/// `vars` from models of `f` and checks each one against `g`. Used where the
/// conclusion is existentially quantified and a direct validity query would
/// need quantifier reasoning.
pub fn sampled_entails(h: &mut Solver, f: &Formula, g: &Formula, vars: &[Var], n: usize) -> bool {
    let mut blocks = vec![f.clone()];
    for _ in 0..n {
        let Some(m) = vasr_core::logic::is_sat(h, &Formula::and(blocks.clone())).unwrap() else {
            return true;
        };
        let point: std::collections::BTreeMap<Var, Term> = vars
            .iter()
            .map(|v| (v.clone(), Term::Const(m.value(v))))
            .collect();
        if vasr_core::logic::is_sat(h, &g.substitute(&point)).unwrap().is_none() {
            eprintln!("point {point:?} satisfies the premise but not the conclusion");
            return false;
        }
        blocks.push(Formula::or(
            point
                .iter()
                .map(|(v, c)| Formula::ne(v.term(), c.clone()))
                .collect(),
        ));
    }
    true
}

use vasr_core::frontend::interp::{self, Chooser, RunEnd, State};
use vasr_core::frontend::Program;
use vasr_core::vasrs::Method;

/// A bundled `.imp` program with its expected verdicts per method.
pub struct Benchmark {
    pub name: String,
    pub source: String,
    pub expected: Vec<(Method, Vec<String>)>,
}

pub fn parse_method(s: &str) -> Method {
    match s {
        "vasr" => Method::Vasr,
        "vasrs" => Method::Vasrs,
        "vasrs-prec" => Method::VasrsPrecise,
        other => panic!("unknown method {other}"),
    }
}

pub fn benchmarks() -> Vec<Benchmark> {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("programs");
    let mut paths: Vec<_> = std::fs::read_dir(&dir)
        .expect("programs directory")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "imp"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let source = std::fs::read_to_string(&p).unwrap();
            let expected = source
                .lines()
                .filter_map(|l| l.strip_prefix("// expect "))
                .map(|l| {
                    let (m, verdicts) = l.split_once(':').expect("method: verdicts");
                    (
                        parse_method(m.trim()),
                        verdicts.split_whitespace().map(str::to_string).collect(),
                    )
                })
                .collect();
            Benchmark {
                name: p.file_stem().unwrap().to_string_lossy().into_owned(),
                source,
                expected,
            }
        })
        .collect()
}

pub struct RandomChooser<'a>(pub &'a mut StdRng);

impl Chooser for RandomChooser<'_> {
    fn value(&mut self) -> i64 {
        self.0.gen_range(-5..=12)
    }

    fn choose(&mut self) -> bool {
        self.0.gen_bool(0.75)
    }
}

/// Ids of assertions violated by some random concrete run of at most
/// `fuel` statements. Initial states are all-zero or small random values.
pub fn violated_asserts(p: &Program, runs: usize, fuel: usize, rng: &mut StdRng) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    for r in 0..runs {
        let init: State = p
            .vars()
            .into_iter()
            .map(|v| (v, if r % 2 == 0 { 0 } else { rng.gen_range(-3..=6) }))
            .collect();
        let run = interp::run(p, &init, &mut RandomChooser(rng), fuel);
        if run.end != RunEnd::Blocked {
            out.extend(run.violations.iter().map(|(id, _)| *id));
        }
    }
    out
}

use std::collections::BTreeSet;

/// Random linear term over `vars` with coefficients in [-2, 2] and a
/// constant in [-3, 3].
pub fn random_term(rng: &mut StdRng, vars: &[Var]) -> Term {
    let coeffs: Vec<vasr_core::linalg::Rational> =
        vars.iter().map(|_| rat(rng.gen_range(-2..=2))).collect();
    Term::linear(&coeffs, vars, rat(rng.gen_range(-3..=3)))
}

/// Random quantifier-free formula of the given depth: atoms `t < 0` or
/// `t = 0` for random linear `t`, combined by binary conjunction and
/// disjunction.
pub fn random_qf_formula(rng: &mut StdRng, vars: &[Var], depth: usize) -> Formula {
    if depth == 0 || rng.gen_bool(0.3) {
        let t = random_term(rng, vars);
        return if rng.gen_bool(0.6) {
            Formula::lt(t, Term::zero())
        } else {
            Formula::eq(t, Term::zero())
        };
    }
    let a = random_qf_formula(rng, vars, depth - 1);
    let b = random_qf_formula(rng, vars, depth - 1);
    if rng.gen_bool(0.5) {
        Formula::and(vec![a, b])
    } else {
        Formula::or(vec![a, b])
    }
}

/// Random loop-body-like transition formula over `vocab`: a disjunction of
/// one to three paths; each path has an optional pre-state guard `g < 0`
/// and, per variable, one of `x' = x + c`, `x' = c`, `x' = x + y + c`
/// (another variable `y`), `x' <= x + c` or no constraint. Constants are in
/// [-3, 3].
pub fn random_transition_formula(rng: &mut StdRng, vocab: &[Var]) -> TransitionFormula {
    let paths = rng.gen_range(1..=3);
    let mut disjuncts = Vec::new();
    for _ in 0..paths {
        let mut conj = Vec::new();
        if rng.gen_bool(0.5) {
            conj.push(Formula::lt(random_term(rng, vocab), Term::zero()));
        }
        for (i, x) in vocab.iter().enumerate() {
            let c = Term::int(rng.gen_range(-3..=3));
            let post = x.primed().term();
            match rng.gen_range(0..5) {
                0 => conj.push(Formula::eq(post, x.term().add(c))),
                1 => conj.push(Formula::eq(post, c)),
                2 => {
                    let y = &vocab[(i + 1) % vocab.len()];
                    conj.push(Formula::eq(post, x.term().add(y.term()).add(c)));
                }
                3 => conj.push(Formula::le(post, x.term().add(c))),
                _ => {}
            }
        }
        disjuncts.push(Formula::and(conj));
    }
    TransitionFormula::new(Formula::or(disjuncts), vocab.to_vec())
}
