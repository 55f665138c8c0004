mod common;

use common::{formula, int_vars, sampled_entails, solver, tf};
use vasr_core::logic::{compose, entails, equivalent, is_sat, Formula, TransitionFormula, Var};
use vasr_core::vas::abstract_vasr;
use vasr_core::vasrs::{
    abstract_vasrs, control_states, iter_vasr, iter_vasrs, iter_vasrs_precise, VasrsAbstraction,
};

fn vocab() -> Vec<Var> {
    int_vars(&["i", "x"])
}

fn oscillating_body() -> TransitionFormula {
    tf(
        "(or (and (exists ((k Int)) (= i (* 2 k))) (= i' (+ i 1)) (= x' x)) \
             (and (exists ((k Int)) (= i (+ (* 2 k) 1))) (= i' (+ i 1)) (= x' (+ x 1))))",
        &vocab(),
    )
}

fn even() -> Formula {
    formula("(exists ((k Int)) (= i (* 2 k)))", &vocab(), &[])
}

fn odd() -> Formula {
    formula("(exists ((k Int)) (= i (+ (* 2 k) 1)))", &vocab(), &[])
}

fn state_index(h: &mut vasr_core::logic::Solver, preds: &[Formula], p: &Formula) -> usize {
    preds
        .iter()
        .position(|q| equivalent(h, q, p).unwrap())
        .expect("predicate not found")
}

fn assert_pairwise_inconsistent(h: &mut vasr_core::logic::Solver, preds: &[Formula]) {
    for (a, p) in preds.iter().enumerate() {
        for q in &preds[a + 1..] {
            let both = Formula::and(vec![p.clone(), q.clone()]);
            assert!(is_sat(h, &both).unwrap().is_none(), "{p} and {q} overlap");
        }
    }
}

fn assert_sound(h: &mut vasr_core::logic::Solver, f: &TransitionFormula, a: &VasrsAbstraction) {
    let preds = &a.vasrs.predicates;
    for (p, pp) in preds.iter().enumerate() {
        for (q, qq) in preds.iter().enumerate() {
            let g = Formula::and(vec![pp.clone(), f.formula.clone(), f.prime_state(qq)]);
            let gamma = a.gamma_between(p, q, f.vocab());
            assert!(entails(h, &g, &gamma).unwrap(), "edge set {p}->{q} is unsound");
        }
    }
}

#[test]
fn oscillating_control_states_are_parity_classes() {
    let mut h = solver();
    let preds = control_states(&mut h, &oscillating_body()).unwrap();
    assert_eq!(preds.len(), 2);
    assert_pairwise_inconsistent(&mut h, &preds);
    state_index(&mut h, &preds, &even());
    state_index(&mut h, &preds, &odd());
}

#[test]
fn closure_relaxes_strict_guard() {
    let mut h = solver();
    let v = int_vars(&["x"]);
    let preds = control_states(&mut h, &tf("(and (> x 0) (= x' (+ x 1)))", &v)).unwrap();
    assert_eq!(preds.len(), 1);
    let expected = formula("(>= x 0)", &v, &[]);
    assert!(equivalent(&mut h, &preds[0], &expected).unwrap());
}

#[test]
fn overlapping_closed_regions_merge() {
    let mut h = solver();
    let v = int_vars(&["x"]);
    let f = tf(
        "(or (and (> x 0) (= x' (+ x 1))) (and (< x 0) (= x' (- x 1))))",
        &v,
    );
    let preds = control_states(&mut h, &f).unwrap();
    assert_eq!(preds.len(), 1);
    let expected = formula("(or (>= x 0) (<= x 0))", &v, &[]);
    assert!(equivalent(&mut h, &preds[0], &expected).unwrap());
}

#[test]
fn separated_regions_stay_apart() {
    let mut h = solver();
    let v = int_vars(&["x"]);
    let f = tf(
        "(or (and (> x 5) (= x' (+ x 1))) (and (< x 0) (= x' (- x 1))))",
        &v,
    );
    let preds = control_states(&mut h, &f).unwrap();
    assert_eq!(preds.len(), 2);
    assert_pairwise_inconsistent(&mut h, &preds);
}

#[test]
fn oscillating_machine_has_the_two_cross_edges() {
    let mut h = solver();
    let f = oscillating_body();
    let preds = vec![even(), odd()];
    let a = abstract_vasrs(&mut h, &f, &preds).unwrap();
    assert!(a.is_normal());
    assert_sound(&mut h, &f, &a);
    let vocab = vocab();
    let even_to_odd = formula("(and (= i' (+ i 1)) (= x' x))", &vocab, &[]);
    let odd_to_even = formula("(and (= i' (+ i 1)) (= x' (+ x 1)))", &vocab, &[]);
    assert!(equivalent(&mut h, &a.gamma_between(0, 1, &vocab), &even_to_odd).unwrap());
    assert!(equivalent(&mut h, &a.gamma_between(1, 0, &vocab), &odd_to_even).unwrap());
    for p in 0..2 {
        assert!(a.vasrs.machine.edges.iter().all(|e| e.src != p || e.dst != p));
    }
}

#[test]
fn single_state_matches_vasr_abstraction() {
    let mut h = solver();
    let f = oscillating_body();
    let a = abstract_vasrs(&mut h, &f, &[Formula::tt()]).unwrap();
    let b = abstract_vasr(&mut h, &f).unwrap();
    let g1 = a.gamma_between(0, 0, f.vocab());
    let g2 = b.gamma(f.vocab()).formula;
    assert!(equivalent(&mut h, &g1, &g2).unwrap());
}

#[test]
fn infeasible_pairs_contribute_no_edges() {
    let mut h = solver();
    let f = tf(
        "(and (exists ((k Int)) (= i (* 2 k))) (= i' (+ i 1)) (= x' x))",
        &vocab(),
    );
    let a = abstract_vasrs(&mut h, &f, &[even(), odd()]).unwrap();
    assert_sound(&mut h, &f, &a);
    assert!(a.vasrs.machine.edges.iter().all(|e| e.src == 0 && e.dst == 1));
    assert!(!a.vasrs.machine.edges.is_empty());
}

fn holds_after(
    h: &mut vasr_core::logic::Solver,
    pre: &str,
    r: &TransitionFormula,
    post: &str,
) -> bool {
    let vocab = r.vocab().to_vec();
    let pre = formula(pre, &vocab, &[]);
    let post = formula(post, &vocab, &[]);
    entails(h, &Formula::and(vec![pre, r.formula.clone()]), &post).unwrap()
}

#[test]
fn oscillating_invariant_needs_control_states() {
    let mut h = solver();
    let f = oscillating_body();
    let r = iter_vasrs(&mut h, &f).unwrap();
    assert!(holds_after(&mut h, "(and (= x 0) (= i 1))", &r, "(<= (* 2 x') i')"));
    let r = iter_vasr(&mut h, &f).unwrap();
    assert!(!holds_after(&mut h, "(and (= x 0) (= i 1))", &r, "(<= (* 2 x') i')"));
}

#[test]
fn precise_closure_fixes_the_begin_state() {
    let mut h = solver();
    let f = oscillating_body();
    let precise = iter_vasrs_precise(&mut h, &f).unwrap();
    let plain = iter_vasrs(&mut h, &f).unwrap();
    assert!(holds_after(&mut h, "(and (= i 0) (= x 0))", &precise, "(<= x' (* 2 i'))"));
    assert!(holds_after(&mut h, "(and (= i 0) (= x 0))", &precise, "(<= (* 2 x') i')"));
    assert!(!holds_after(&mut h, "(and (= i 0) (= x 0))", &plain, "(<= (* 2 x') i')"));
    let vars: Vec<Var> = vocab().iter().cloned().chain(vocab().iter().map(Var::primed)).collect();
    assert!(sampled_entails(&mut h, &precise.formula, &plain.formula, &vars, 30));
}

#[test]
fn false_iterates_to_identity() {
    let mut h = solver();
    let v = int_vars(&["x"]);
    let f = tf("false", &v);
    let id = TransitionFormula::identity(v.clone());
    for r in [
        iter_vasrs(&mut h, &f).unwrap(),
        iter_vasrs_precise(&mut h, &f).unwrap(),
        iter_vasr(&mut h, &f).unwrap(),
    ] {
        assert!(equivalent(&mut h, &r.formula, &id.formula).unwrap());
    }
}

#[test]
fn guarded_increment_closures() {
    let mut h = solver();
    let v = int_vars(&["x"]);
    let f = tf("(and (>= x 0) (= x' (+ x 1)))", &v);
    let r = iter_vasrs(&mut h, &f).unwrap();
    assert!(entails(&mut h, &r.formula, &formula("(>= x' x)", &v, &[])).unwrap());
    let p = iter_vasrs_precise(&mut h, &f).unwrap();
    let moved = Formula::and(vec![p.formula.clone(), formula("(distinct x x')", &v, &[])]);
    assert!(entails(&mut h, &moved, &formula("(and (>= x 0) (>= x' 0))", &v, &[])).unwrap());
}

#[test]
fn closures_contain_short_iterates() {
    let mut h = solver();
    let v = int_vars(&["x", "y"]);
    let bodies = [
        "(or (and (< x 10) (= x' (+ x 1)) (= y' y)) (and (>= x 10) (= x' 0) (= y' (+ y 1))))",
        "(and (> y 0) (= x' (+ x y)) (= y' (- y 1)))",
        "(or (and (exists ((k Int)) (= x (* 3 k))) (= x' (+ x 1)) (= y' (+ y 2))) \
             (and (= x' (+ x 2)) (= y' y) (> x 0)))",
    ];
    for body in bodies {
        let f = tf(body, &v);
        let id = TransitionFormula::identity(v.clone());
        let mut iterates = vec![id.clone()];
        for _ in 0..3 {
            let next = compose(iterates.last().unwrap(), &f).unwrap();
            iterates.push(next);
        }
        let plain = iter_vasrs(&mut h, &f).unwrap();
        let precise = iter_vasrs_precise(&mut h, &f).unwrap();
        let vasr = iter_vasr(&mut h, &f).unwrap();
        for (k, g) in iterates.iter().enumerate() {
            for r in [&plain, &precise, &vasr] {
                assert!(entails(&mut h, &g.formula, &r.formula).unwrap(), "{body}: iterate {k}");
            }
        }
        assert!(entails(&mut h, &precise.formula, &plain.formula).unwrap());
    }
}
