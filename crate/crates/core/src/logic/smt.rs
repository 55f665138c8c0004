//! SMT-LIB2 rendering and a subprocess solver client.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use tracing::{debug, trace};

use super::sexp::{self, paren_depth, Sexp};
use super::syntax::{Formula, Model, Sort, Term, TransitionFormula, Var};
use crate::error::{Error, Result};
use crate::linalg::Rational;

pub fn quote(name: &str) -> String {
    format!("|{name}|")
}

pub fn sort_name(s: Sort) -> &'static str {
    match s {
        Sort::Int => "Int",
        Sort::Real => "Real",
    }
}

fn write_int(out: &mut String, n: &BigInt, real: bool) {
    let suffix = if real { ".0" } else { "" };
    if n.is_negative() {
        let _ = write!(out, "(- {}{suffix})", -n);
    } else {
        let _ = write!(out, "{n}{suffix}");
    }
}

/// Renders a rational constant in real arithmetic.
pub fn rational_to_smt(c: &Rational) -> String {
    let mut out = String::new();
    if c.is_integer() {
        write_int(&mut out, c.numer(), true);
    } else {
        let body = format!("(/ {}.0 {}.0)", c.numer().abs(), c.denom());
        if c.is_negative() {
            let _ = write!(out, "(- {body})");
        } else {
            out.push_str(&body);
        }
    }
    out
}

fn write_atom(out: &mut String, op: &str, s: &Term, t: &Term) {
    let mut lin = s.clone().sub(t.clone()).to_lin();
    let mut scale = BigInt::one();
    for c in lin.coeffs.values().chain(std::iter::once(&lin.constant)) {
        scale = scale.lcm(c.denom());
    }
    let factor = Rational::from_integer(scale);
    for c in lin.coeffs.values_mut() {
        *c = &*c * &factor;
    }
    lin.constant = &lin.constant * &factor;
    let real = lin.coeffs.keys().any(|v| v.sort() == Sort::Real);

    let mut parts = Vec::new();
    for (v, c) in &lin.coeffs {
        let sym = if real && v.sort() == Sort::Int {
            format!("(to_real {})", quote(v.name()))
        } else {
            quote(v.name())
        };
        let c = c.numer();
        if c.is_one() {
            parts.push(sym);
        } else if (-c).is_one() {
            parts.push(format!("(- {sym})"));
        } else {
            let mut k = String::new();
            write_int(&mut k, c, real);
            parts.push(format!("(* {k} {sym})"));
        }
    }
    let lhs = match parts.len() {
        0 => if real { "0.0".to_string() } else { "0".to_string() },
        1 => parts.pop().unwrap(),
        _ => format!("(+ {})", parts.join(" ")),
    };
    let mut rhs = String::new();
    write_int(&mut rhs, &(-lin.constant.numer()), real);
    let _ = write!(out, "({op} {lhs} {rhs})");
}

fn write_formula(out: &mut String, f: &Formula) {
    match f {
        Formula::Lt(s, t) => write_atom(out, "<", s, t),
        Formula::Eq(s, t) => write_atom(out, "=", s, t),
        Formula::And(fs) | Formula::Or(fs) => {
            let (op, unit) = if matches!(f, Formula::And(_)) {
                ("and", "true")
            } else {
                ("or", "false")
            };
            match fs.len() {
                0 => out.push_str(unit),
                1 => write_formula(out, &fs[0]),
                _ => {
                    let _ = write!(out, "({op}");
                    for g in fs {
                        out.push(' ');
                        write_formula(out, g);
                    }
                    out.push(')');
                }
            }
        }
        Formula::Exists(v, body) => {
            let _ = write!(out, "(exists (({} {})) ", quote(v.name()), sort_name(v.sort()));
            write_formula(out, body);
            out.push(')');
        }
    }
}

/// SMT-LIB2 term for a formula. Integer-only atoms are rendered in integer
/// arithmetic after clearing denominators; mixed atoms in real arithmetic.
pub fn formula_to_smt(f: &Formula) -> String {
    let mut out = String::new();
    write_formula(&mut out, f);
    out
}

/// Self-contained script declaring every free symbol and asserting `tf`.
pub fn transition_script(tf: &TransitionFormula) -> String {
    let mut out = String::new();
    let mut vars: Vec<Var> = tf.vocab().to_vec();
    vars.extend(tf.post_vocab());
    for v in tf.formula.free_vars() {
        if !vars.contains(&v) {
            vars.push(v);
        }
    }
    for v in &vars {
        let _ = writeln!(out, "(declare-const {} {})", quote(v.name()), sort_name(v.sort()));
    }
    let _ = writeln!(out, "(assert {})", formula_to_smt(&tf.formula));
    out
}

/// Solver process settings.
#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub program: String,
    pub args: Vec<String>,
    pub timeout_ms: Option<u64>,
    pub seed: u64,
    pub transcript: Option<PathBuf>,
}

impl SolverConfig {
    /// Reads `VASR_SMT_SOLVER`, `VASR_SMT_ARGS`, `VASR_SEED` and
    /// `VASR_SMT_TRANSCRIPT`.
    pub fn from_env() -> Self {
        let program = std::env::var("VASR_SMT_SOLVER").unwrap_or_else(|_| "z3".to_string());
        let args = match std::env::var("VASR_SMT_ARGS") {
            Ok(a) => a.split_whitespace().map(String::from).collect(),
            Err(_) => default_args(&program),
        };
        let seed = std::env::var("VASR_SEED")
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or(0);
        SolverConfig {
            program,
            args,
            timeout_ms: None,
            seed,
            transcript: std::env::var_os("VASR_SMT_TRANSCRIPT").map(PathBuf::from),
        }
    }

    pub fn with_timeout(mut self, ms: Option<u64>) -> Self {
        self.timeout_ms = ms;
        self
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig::from_env()
    }
}

fn default_args(program: &str) -> Vec<String> {
    let base = program.rsplit('/').next().unwrap_or(program);
    let args: &[&str] = if base.starts_with("cvc5") {
        &["--lang=smt2", "--incremental", "--produce-models"]
    } else if base.starts_with("z3") {
        &["-in", "-smt2"]
    } else {
        &[]
    };
    args.iter().map(|s| s.to_string()).collect()
}

/// One SMT-LIB2 session with an external solver. Not shareable between
/// threads; create one handle per worker.
pub struct Solver {
    child: Child,
    stdin: BufWriter<ChildStdin>,
    stdout: BufReader<ChildStdout>,
    declared: HashMap<String, Sort>,
    transcript: Option<BufWriter<File>>,
    depth: usize,
    queries: u64,
}

impl Solver {
    pub fn new() -> Result<Self> {
        Solver::with_config(&SolverConfig::from_env())
    }

    pub fn with_config(cfg: &SolverConfig) -> Result<Self> {
        let mut child = Command::new(&cfg.program)
            .args(&cfg.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| Error::Solver(format!("cannot start `{}`: {e}", cfg.program)))?;
        let stdin = BufWriter::new(child.stdin.take().expect("piped stdin"));
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        let transcript = match &cfg.transcript {
            Some(p) => Some(BufWriter::new(
                File::options()
                    .create(true)
                    .append(true)
                    .open(p)
                    .map_err(|e| Error::Solver(format!("transcript {}: {e}", p.display())))?,
            )),
            None => None,
        };
        let mut s = Solver {
            child,
            stdin,
            stdout,
            declared: HashMap::new(),
            transcript,
            depth: 0,
            queries: 0,
        };
        s.send("(set-option :global-declarations true)")?;
        s.send("(set-option :produce-models true)")?;
        s.send(&format!("(set-option :random-seed {})", cfg.seed))?;
        s.send("(set-logic LIRA)")?;
        s.set_timeout(cfg.timeout_ms)?;
        debug!(program = %cfg.program, "solver started");
        Ok(s)
    }

    /// Per-query timeout in milliseconds; `None` disables it.
    pub fn set_timeout(&mut self, ms: Option<u64>) -> Result<()> {
        let ms = ms.unwrap_or(0);
        self.send(&format!("(set-option :timeout {ms})"))
    }

    /// Number of `check-sat` calls issued so far.
    pub fn queries(&self) -> u64 {
        self.queries
    }

    fn send(&mut self, cmd: &str) -> Result<()> {
        trace!(target: "vasr_core::smt", "> {cmd}");
        if let Some(t) = &mut self.transcript {
            let _ = writeln!(t, "{cmd}");
        }
        writeln!(self.stdin, "{cmd}").map_err(|e| Error::Solver(format!("write failed: {e}")))
    }

    fn flush(&mut self) -> Result<()> {
        self.stdin
            .flush()
            .map_err(|e| Error::Solver(format!("write failed: {e}")))
    }

    fn read_line(&mut self) -> Result<String> {
        let mut line = String::new();
        let n = self
            .stdout
            .read_line(&mut line)
            .map_err(|e| Error::Solver(format!("read failed: {e}")))?;
        if n == 0 {
            return Err(Error::Solver("solver process exited".into()));
        }
        trace!(target: "vasr_core::smt", "< {}", line.trim_end());
        if let Some(t) = &mut self.transcript {
            let _ = writeln!(t, "; {}", line.trim_end());
        }
        Ok(line)
    }

    /// Reads one complete S-expression response, skipping status chatter.
    fn read_response(&mut self) -> Result<String> {
        loop {
            let mut text = self.read_line()?;
            let head = text.trim();
            if head.is_empty() || head == "success" || head == "unsupported" {
                continue;
            }
            while paren_depth(&text) > 0 {
                text.push_str(&self.read_line()?);
            }
            return Ok(text);
        }
    }

    pub fn declare(&mut self, v: &Var) -> Result<()> {
        match self.declared.get(v.name()) {
            Some(s) if *s == v.sort() => Ok(()),
            Some(_) => Err(Error::Solver(format!(
                "symbol {} redeclared with a different sort",
                v.name()
            ))),
            None => {
                self.declared.insert(v.name().to_string(), v.sort());
                self.send(&format!(
                    "(declare-const {} {})",
                    quote(v.name()),
                    sort_name(v.sort())
                ))
            }
        }
    }

    pub fn declare_all<'a>(&mut self, vars: impl IntoIterator<Item = &'a Var>) -> Result<()> {
        vars.into_iter().try_for_each(|v| self.declare(v))
    }

    /// Declares the free symbols of `f` and asserts it.
    pub fn assert(&mut self, f: &Formula) -> Result<()> {
        let fv = f.free_vars();
        self.declare_all(&fv)?;
        self.send(&format!("(assert {})", formula_to_smt(f)))
    }

    /// Asserts the negation of `f` at the SMT-LIB level; used when `f` is
    /// quantified and cannot be negated inside the grammar.
    pub fn assert_not(&mut self, f: &Formula) -> Result<()> {
        let fv = f.free_vars();
        self.declare_all(&fv)?;
        self.send(&format!("(assert (not {}))", formula_to_smt(f)))
    }

    pub fn push(&mut self) -> Result<()> {
        self.depth += 1;
        self.send("(push 1)")
    }

    pub fn pop(&mut self) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::Solver("pop without matching push".into()));
        }
        self.depth -= 1;
        self.send("(pop 1)")
    }

    /// `Ok(true)` for sat, `Ok(false)` for unsat. Unknown answers and
    /// solver errors are reported as errors.
    pub fn check(&mut self) -> Result<bool> {
        self.queries += 1;
        self.send("(check-sat)")?;
        self.flush()?;
        let mut errors = Vec::new();
        let status = loop {
            let line = self.read_response()?;
            let head = line.trim();
            match head {
                "sat" | "unsat" | "unknown" => break head.to_string(),
                _ if head.starts_with("(error") => errors.push(head.to_string()),
                _ => debug!("ignored solver output: {head}"),
            }
        };
        if !errors.is_empty() {
            return Err(Error::Solver(errors.join("; ")));
        }
        match status.as_str() {
            "sat" => Ok(true),
            "unsat" => Ok(false),
            _ => {
                self.send("(get-info :reason-unknown)")?;
                self.flush()?;
                let reason = self.read_response()?;
                Err(Error::SolverUnknown(reason.trim().to_string()))
            }
        }
    }

    /// Values of `vars` in the current model (after a sat answer).
    pub fn values(&mut self, vars: &[Var]) -> Result<Model> {
        let mut model = Model::new();
        if vars.is_empty() {
            return Ok(model);
        }
        self.declare_all(vars)?;
        let names: Vec<String> = vars.iter().map(|v| quote(v.name())).collect();
        self.send(&format!("(get-value ({}))", names.join(" ")))?;
        self.flush()?;
        let text = self.read_response()?;
        if text.trim_start().starts_with("(error") {
            return Err(Error::Solver(text.trim().to_string()));
        }
        let parsed = sexp::parse_one(&text)?;
        let pairs = parsed
            .as_list()
            .ok_or_else(|| Error::Solver(format!("malformed get-value response: {text}")))?;
        let by_name: HashMap<&str, &Var> = vars.iter().map(|v| (v.name(), v)).collect();
        for p in pairs {
            let (name, value) = match p.as_list() {
                Some([n, v]) => (n, v),
                _ => return Err(Error::Solver(format!("malformed model entry {p}"))),
            };
            let name = name.symbol().unwrap_or_default();
            let value: Rational = value
                .to_rational()
                .ok_or_else(|| Error::Solver(format!("unsupported model value {value}")))?;
            if let Some(v) = by_name.get(name) {
                model.insert(v, value);
            }
        }
        Ok(model)
    }

    /// Checks `f` in a fresh frame and returns a model over its free
    /// symbols when satisfiable.
    pub fn check_formula(&mut self, f: &Formula) -> Result<Option<Model>> {
        self.push()?;
        let result = self.check_formula_inner(f);
        self.pop()?;
        result
    }

    fn check_formula_inner(&mut self, f: &Formula) -> Result<Option<Model>> {
        self.assert(f)?;
        if self.check()? {
            let vars: Vec<Var> = f.free_vars().into_iter().collect();
            Ok(Some(self.values(&vars)?))
        } else {
            Ok(None)
        }
    }
}

impl Drop for Solver {
    fn drop(&mut self) {
        let _ = writeln!(self.stdin, "(exit)");
        let _ = self.stdin.flush();
        if let Some(t) = &mut self.transcript {
            let _ = t.flush();
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Parses an SMT-LIB2 boolean term into a formula. `lookup` resolves symbol
/// names to variables; unknown names are errors.
pub fn parse_formula(text: &str, lookup: &dyn Fn(&str) -> Option<Var>) -> Result<Formula> {
    let s = sexp::parse_one(text)?;
    formula_of(&s, lookup)
}

fn bad(msg: String) -> Error {
    Error::Parse {
        line: 1,
        col: 1,
        msg,
    }
}

fn formula_of(s: &Sexp, lookup: &dyn Fn(&str) -> Option<Var>) -> Result<Formula> {
    match s {
        Sexp::Atom(a) if a == "true" => Ok(Formula::tt()),
        Sexp::Atom(a) if a == "false" => Ok(Formula::ff()),
        Sexp::Atom(a) => Err(bad(format!("expected a boolean term, found `{a}`"))),
        Sexp::List(items) => {
            let (op, args) = match items.split_first() {
                Some((Sexp::Atom(op), args)) => (op.as_str(), args),
                _ => return Err(bad(format!("malformed term {s}"))),
            };
            let subs = || -> Result<Vec<Formula>> {
                args.iter().map(|a| formula_of(a, lookup)).collect()
            };
            let terms = || -> Result<Vec<Term>> { args.iter().map(|a| term_of(a, lookup)).collect() };
            let chain = |mk: fn(Term, Term) -> Formula| -> Result<Formula> {
                let ts = terms()?;
                if ts.len() < 2 {
                    return Err(bad(format!("`{op}` needs at least two arguments")));
                }
                Ok(Formula::and(
                    ts.windows(2).map(|w| mk(w[0].clone(), w[1].clone())).collect(),
                ))
            };
            match op {
                "and" => Ok(Formula::and(subs()?)),
                "or" => Ok(Formula::or(subs()?)),
                "not" => match subs()?.as_slice() {
                    [f] => super::ops::negate(f),
                    _ => Err(bad("`not` takes one argument".into())),
                },
                "=>" => match subs()?.as_slice() {
                    [a, b] => Ok(Formula::or(vec![super::ops::negate(a)?, b.clone()])),
                    _ => Err(bad("`=>` takes two arguments".into())),
                },
                "<" => chain(Formula::lt),
                "<=" => chain(Formula::le),
                ">" => chain(Formula::gt),
                ">=" => chain(Formula::ge),
                "=" => chain(Formula::eq),
                "distinct" => match terms()?.as_slice() {
                    [a, b] => Ok(Formula::ne(a.clone(), b.clone())),
                    _ => Err(bad("`distinct` takes two arguments".into())),
                },
                "exists" => {
                    let [binders, body] = args else {
                        return Err(bad("malformed exists".into()));
                    };
                    let mut vars = Vec::new();
                    for b in binders.as_list().unwrap_or_default() {
                        match b.as_list() {
                            Some([n, Sexp::Atom(srt)]) => {
                                let sort = match srt.as_str() {
                                    "Int" => Sort::Int,
                                    "Real" => Sort::Real,
                                    _ => return Err(bad(format!("unknown sort {srt}"))),
                                };
                                vars.push(Var::new(n.symbol().unwrap_or_default(), sort));
                            }
                            _ => return Err(bad(format!("malformed binder {b}"))),
                        }
                    }
                    let inner = vars.clone();
                    let scoped = move |name: &str| {
                        inner
                            .iter()
                            .find(|v| v.name() == name)
                            .cloned()
                            .or_else(|| lookup(name))
                    };
                    Ok(Formula::exists(vars, formula_of(body, &scoped)?))
                }
                _ => Err(bad(format!("unsupported operator `{op}`"))),
            }
        }
    }
}

fn term_of(s: &Sexp, lookup: &dyn Fn(&str) -> Option<Var>) -> Result<Term> {
    if let Some(c) = s.to_rational() {
        return Ok(Term::Const(c));
    }
    match s {
        Sexp::Atom(_) => {
            let name = s.symbol().unwrap_or_default();
            lookup(name)
                .map(|v| v.term())
                .ok_or_else(|| bad(format!("unknown symbol `{name}`")))
        }
        Sexp::List(items) => {
            let (op, args) = match items.split_first() {
                Some((Sexp::Atom(op), args)) => (op.as_str(), args),
                _ => return Err(bad(format!("malformed term {s}"))),
            };
            let ts: Vec<Term> = args.iter().map(|a| term_of(a, lookup)).collect::<Result<_>>()?;
            match (op, ts.len()) {
                ("+", _) => Ok(Term::sum(ts)),
                ("-", 1) => Ok(ts[0].clone().neg()),
                ("-", n) if n >= 2 => {
                    let mut it = ts.into_iter();
                    let first = it.next().unwrap();
                    Ok(it.fold(first, Term::sub))
                }
                ("to_real", 1) => Ok(ts[0].clone()),
                ("*", 2) => {
                    let (a, b) = (ts[0].to_lin(), ts[1].to_lin());
                    if a.is_constant() {
                        Ok(ts[1].clone().scale(a.constant))
                    } else if b.is_constant() {
                        Ok(ts[0].clone().scale(b.constant))
                    } else {
                        Err(bad(format!("nonlinear term {s}")))
                    }
                }
                ("/", 2) => {
                    let b = ts[1].to_lin();
                    if b.is_constant() && !b.constant.is_zero() {
                        Ok(ts[0].clone().scale(Rational::one() / b.constant))
                    } else {
                        Err(bad(format!("nonlinear term {s}")))
                    }
                }
                _ => Err(bad(format!("unsupported term {s}"))),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{rat, ratio};

    #[test]
    fn integer_atoms_clear_denominators() {
        let x = Var::int("x");
        let f = Formula::lt(x.term().scale(ratio(1, 2)), Term::int(3));
        assert_eq!(formula_to_smt(&f), "(< |x| 6)");
    }

    #[test]
    fn mixed_atoms_use_reals() {
        let x = Var::int("x");
        let r = Var::real("r");
        let f = Formula::eq(r.term(), x.term().sub(Term::int(2)));
        assert_eq!(formula_to_smt(&f), "(= (+ |r| (- (to_real |x|))) (- 2.0))");
    }

    #[test]
    fn rational_rendering() {
        assert_eq!(rational_to_smt(&rat(3)), "3.0");
        assert_eq!(rational_to_smt(&rat(-3)), "(- 3.0)");
        assert_eq!(rational_to_smt(&ratio(-1, 3)), "(- (/ 1.0 3.0))");
    }

    #[test]
    fn parses_terms_back() {
        let x = Var::int("x");
        let y = Var::int("y");
        let look = |n: &str| match n {
            "x" => Some(x.clone()),
            "y" => Some(y.clone()),
            _ => None,
        };
        let f = parse_formula("(and (= x 0) (<= (* 2 y) (+ x 1)))", &look).unwrap();
        let m = Model::new().with(&x, rat(0)).with(&y, rat(0));
        assert_eq!(f.eval(&m), Some(true));
        let m = Model::new().with(&x, rat(0)).with(&y, rat(1));
        assert_eq!(f.eval(&m), Some(false));
        assert!(parse_formula("(< z 0)", &look).is_err());
        assert!(parse_formula("(< (* x y) 0)", &look).is_err());
    }
}
