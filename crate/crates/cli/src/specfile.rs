//! Line-based operator and ensemble spec files.
//!
//! One statement per line; `#` starts a comment. A statement is a keyword
//! followed by whitespace-separated `key=value` pairs.
//!
//! ```text
//! free_laplacian d=1 [r=8]          builtin (also: shift, zero)
//!
//! operator d=1 C=2 r=3 kind=self_adjoint diagonal=bounded period=1
//! coeff j=1 value=1.0               a_j^n for every n (period 1)
//! coeff j=0 cell=1 value=2.0        a_j^n for n ≡ cell mod period
//!
//! ensemble d=1 C=2 r=3 gamma=half_space diagonal=atoms:0,1 default=zero
//! hopping k=1 measure=uniform:-0.5,0.5
//!
//! jacobi gamma=atoms:0,1 [r=3]
//! ```
//!
//! Complex numbers are written `1.5`, `0.5-2i` or `3i`. Measures are
//! `dirac:z`, `atoms:z1,z2,...`, `uniform:lo,hi`, `disk:radius` and
//! `gaussian:mean,std`. Default rules are `zero`, `disk:fraction` and
//! `real:fraction`. Self-adjoint tables are closed under the adjoint
//! symmetry when built, so only one of each mirrored pair is needed.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use longrange::ensemble::{DefaultRule, JacobiEnsemble, Measure, RandomEnsembleSpec, DEFAULT_QUANTILE};
use longrange::operator::{self, PeriodicTableRule, StencilRule};
use longrange::{CoefficientField, Complex64, DecayEnvelope, LatticePoint, OperatorKind};

/// Decay exponent used by builtins when `r` is omitted.
pub const BUILTIN_R: f64 = 8.0;
/// Decay exponent of `jacobi` ensembles when `r` is omitted.
pub const JACOBI_R: f64 = 3.0;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SpecError {
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("invalid value for `{key}`: {message}")]
    Semantic { key: String, message: String },
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> SpecError {
    SpecError::Syntax { line, column, message: message.into() }
}

fn semantic(key: impl Into<String>, message: impl Into<String>) -> SpecError {
    SpecError::Semantic { key: key.into(), message: message.into() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Builtin {
    FreeLaplacian,
    Shift,
    Zero,
}

impl Builtin {
    fn token(self) -> &'static str {
        match self {
            Builtin::FreeLaplacian => "free_laplacian",
            Builtin::Shift => "shift",
            Builtin::Zero => "zero",
        }
    }

    fn from_token(s: &str) -> Option<Self> {
        match s {
            "free_laplacian" => Some(Builtin::FreeLaplacian),
            "shift" => Some(Builtin::Shift),
            "zero" => Some(Builtin::Zero),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TableOperator {
    pub d: usize,
    pub c: f64,
    pub r: f64,
    pub kind: OperatorKind,
    pub diagonal_bounded: bool,
    pub period: i64,
    /// `(j, cell) ↦ a_j^{cell}`.
    pub entries: BTreeMap<(LatticePoint, LatticePoint), Complex64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum OperatorSpec {
    Builtin { builtin: Builtin, d: usize, r: f64 },
    Table(TableOperator),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneralEnsemble {
    pub d: usize,
    pub c: f64,
    pub r: f64,
    pub diagonal: Measure,
    pub default: DefaultRule,
    pub quantile: f64,
    pub hopping: BTreeMap<LatticePoint, Measure>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum EnsembleSpec {
    General(GeneralEnsemble),
    Jacobi { gamma: Measure, r: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub enum SpecDocument {
    Operator(OperatorSpec),
    Ensemble(EnsembleSpec),
}

// ---------------------------------------------------------------------------
// Building library objects.

impl OperatorSpec {
    pub fn dim(&self) -> usize {
        match self {
            OperatorSpec::Builtin { d, .. } => *d,
            OperatorSpec::Table(t) => t.d,
        }
    }

    /// Period of the coefficient table; builtins are translation invariant.
    pub fn period(&self) -> i64 {
        match self {
            OperatorSpec::Builtin { .. } => 1,
            OperatorSpec::Table(t) => t.period,
        }
    }

    pub fn build(&self) -> longrange::Result<CoefficientField> {
        match self {
            OperatorSpec::Builtin { builtin, d, r } => match builtin {
                Builtin::FreeLaplacian => operator::free_laplacian(*d, *r),
                Builtin::Shift => operator::shift(*d, *r),
                Builtin::Zero => operator::zero_operator(*d, *r),
            },
            OperatorSpec::Table(t) => {
                let env = DecayEnvelope::new(t.c, t.r, t.d)?;
                let self_adjoint = t.kind == OperatorKind::SelfAdjoint;
                let field = if t.period == 1 {
                    let table: BTreeMap<_, _> = t.entries.iter().map(|((j, _), v)| (j.clone(), *v)).collect();
                    let rule = if self_adjoint { StencilRule::self_adjoint(table)? } else { StencilRule::new(table) };
                    CoefficientField::new(t.kind, env, t.diagonal_bounded, Arc::new(rule))?
                } else {
                    let rule = if self_adjoint {
                        PeriodicTableRule::self_adjoint(t.period, t.entries.clone())?
                    } else {
                        PeriodicTableRule::new(t.period, t.entries.clone())?
                    };
                    CoefficientField::new(t.kind, env, t.diagonal_bounded, Arc::new(rule))?
                };
                Ok(field)
            }
        }
    }
}

impl EnsembleSpec {
    pub fn dim(&self) -> usize {
        match self {
            EnsembleSpec::General(g) => g.d,
            EnsembleSpec::Jacobi { .. } => 1,
        }
    }

    pub fn build(&self) -> longrange::Result<RandomEnsembleSpec> {
        match self {
            EnsembleSpec::General(g) => {
                let env = DecayEnvelope::new(g.c, g.r, g.d)?;
                RandomEnsembleSpec::new(env, g.diagonal.clone(), g.hopping.clone(), g.default)?.with_quantile(g.quantile)
            }
            EnsembleSpec::Jacobi { gamma, r } => JacobiEnsemble::new(gamma.clone())?.spec(*r),
        }
    }
}

// ---------------------------------------------------------------------------
// Scalar formatting and parsing.

/// Shortest decimal that parses back to the same `f64`; `-0.0` prints as
/// `0.0`.
pub fn fmt_f64(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:?}")
}

pub fn fmt_complex(z: Complex64) -> String {
    if z.im == 0.0 {
        fmt_f64(z.re)
    } else if z.re == 0.0 {
        format!("{}i", fmt_f64(z.im))
    } else if z.im < 0.0 {
        format!("{}-{}i", fmt_f64(z.re), fmt_f64(-z.im))
    } else {
        format!("{}+{}i", fmt_f64(z.re), fmt_f64(z.im))
    }
}

fn parse_real(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|x| x.is_finite())
}

pub fn parse_complex(s: &str) -> Option<Complex64> {
    let Some(body) = s.strip_suffix('i') else {
        return parse_real(s).map(|re| Complex64::new(re, 0.0));
    };
    // Split at the last sign that is not an exponent sign.
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    match split {
        Some(k) => {
            let re = parse_real(&body[..k])?;
            let im = parse_real(&body[k..])?;
            Some(Complex64::new(re, im))
        }
        None => parse_real(body).map(|im| Complex64::new(0.0, im)),
    }
}

fn parse_point(s: &str) -> Option<LatticePoint> {
    let coords: Option<Vec<i64>> = s.split(',').map(|c| c.trim().parse().ok()).collect();
    coords.filter(|c| !c.is_empty()).map(|c| LatticePoint::new(&c))
}

fn join(values: impl IntoIterator<Item = String>) -> String {
    values.into_iter().collect::<Vec<_>>().join(",")
}

pub fn fmt_measure(m: &Measure) -> String {
    match m {
        Measure::Dirac(z) => format!("dirac:{}", fmt_complex(*z)),
        Measure::FiniteUniform(atoms) => format!("atoms:{}", join(atoms.iter().map(|z| fmt_complex(*z)))),
        Measure::UniformInterval { lo, hi } => format!("uniform:{},{}", fmt_f64(*lo), fmt_f64(*hi)),
        Measure::UniformDisk { radius } => format!("disk:{}", fmt_f64(*radius)),
        Measure::Gaussian { mean, std } => format!("gaussian:{},{}", fmt_f64(*mean), fmt_f64(*std)),
    }
}

pub fn parse_measure(s: &str) -> Result<Measure, String> {
    let (name, args) = s.split_once(':').ok_or_else(|| format!("measure `{s}` needs the form name:arguments"))?;
    let reals = || -> Result<Vec<f64>, String> {
        args.split(',').map(|a| parse_real(a).ok_or_else(|| format!("`{a}` is not a finite number"))).collect()
    };
    let exactly = |n: usize| -> Result<Vec<f64>, String> {
        let v = reals()?;
        if v.len() == n {
            Ok(v)
        } else {
            Err(format!("`{name}` takes {n} argument(s), got {}", v.len()))
        }
    };
    match name {
        "dirac" => parse_complex(args).map(Measure::Dirac).ok_or_else(|| format!("`{args}` is not a number")),
        "atoms" => {
            let atoms: Option<Vec<Complex64>> = args.split(',').map(parse_complex).collect();
            atoms.map(Measure::FiniteUniform).ok_or_else(|| format!("bad atom list `{args}`"))
        }
        "uniform" => {
            let v = exactly(2)?;
            if v[0] > v[1] {
                return Err(format!("empty interval [{}, {}]", v[0], v[1]));
            }
            Ok(Measure::UniformInterval { lo: v[0], hi: v[1] })
        }
        "disk" => {
            let v = exactly(1)?;
            if v[0] < 0.0 {
                return Err("disk radius must be nonnegative".into());
            }
            Ok(Measure::UniformDisk { radius: v[0] })
        }
        "gaussian" => {
            let v = exactly(2)?;
            if v[1] <= 0.0 {
                return Err("standard deviation must be positive".into());
            }
            Ok(Measure::Gaussian { mean: v[0], std: v[1] })
        }
        _ => Err(format!("unknown measure `{name}`")),
    }
}

fn fmt_default(rule: DefaultRule) -> String {
    match rule {
        DefaultRule::Zero => "zero".into(),
        DefaultRule::UniformDisk { fraction } => format!("disk:{}", fmt_f64(fraction)),
        DefaultRule::UniformReal { fraction } => format!("real:{}", fmt_f64(fraction)),
    }
}

fn parse_default(s: &str) -> Result<DefaultRule, String> {
    if s == "zero" {
        return Ok(DefaultRule::Zero);
    }
    let (name, arg) = s.split_once(':').ok_or_else(|| format!("unknown default rule `{s}`"))?;
    let fraction = parse_real(arg)
        .filter(|f| (0.0..=1.0).contains(f))
        .ok_or_else(|| format!("fraction `{arg}` must lie in [0, 1]"))?;
    match name {
        "disk" => Ok(DefaultRule::UniformDisk { fraction }),
        "real" => Ok(DefaultRule::UniformReal { fraction }),
        _ => Err(format!("unknown default rule `{name}`")),
    }
}

// ---------------------------------------------------------------------------
// Tokenizing.

struct Token<'a> {
    text: &'a str,
    column: usize,
}

struct Statement<'a> {
    line: usize,
    keyword: Token<'a>,
    pairs: Vec<(Token<'a>, Token<'a>)>,
}

fn tokenize(text: &str) -> Result<Vec<Statement<'_>>, SpecError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut words = Vec::new();
        let mut start = None;
        for (pos, ch) in content.char_indices().chain([(content.len(), ' ')]) {
            if ch.is_whitespace() {
                if let Some(s) = start.take() {
                    words.push(Token { text: &content[s..pos], column: content[..s].chars().count() + 1 });
                }
            } else if start.is_none() {
                start = Some(pos);
            }
        }
        let mut words = words.into_iter();
        let Some(keyword) = words.next() else { continue };
        let mut pairs = Vec::new();
        for w in words {
            let Some((k, v)) = w.text.split_once('=') else {
                return Err(syntax(line, w.column, format!("expected key=value, found `{}`", w.text)));
            };
            if k.is_empty() || v.is_empty() {
                return Err(syntax(line, w.column, format!("empty key or value in `{}`", w.text)));
            }
            let value_column = w.column + k.chars().count() + 1;
            pairs.push((Token { text: k, column: w.column }, Token { text: v, column: value_column }));
        }
        out.push(Statement { line, keyword, pairs });
    }
    Ok(out)
}

/// Typed access to a statement's `key=value` pairs.
struct Fields<'s, 'a> {
    stmt: &'s Statement<'a>,
    used: Vec<bool>,
}

impl<'s, 'a> Fields<'s, 'a> {
    fn new(stmt: &'s Statement<'a>, allowed: &[&str]) -> Result<Self, SpecError> {
        for (i, (k, _)) in stmt.pairs.iter().enumerate() {
            if !allowed.contains(&k.text) {
                return Err(syntax(stmt.line, k.column, format!("unknown key `{}` for `{}`", k.text, stmt.keyword.text)));
            }
            if stmt.pairs[..i].iter().any(|(prev, _)| prev.text == k.text) {
                return Err(syntax(stmt.line, k.column, format!("duplicate key `{}`", k.text)));
            }
        }
        Ok(Self { stmt, used: vec![false; stmt.pairs.len()] })
    }

    fn raw(&mut self, key: &str) -> Option<&'s Token<'a>> {
        let i = self.stmt.pairs.iter().position(|(k, _)| k.text == key)?;
        self.used[i] = true;
        Some(&self.stmt.pairs[i].1)
    }

    fn get<T>(&mut self, key: &str, what: &str, parse: impl FnOnce(&str) -> Result<T, String>) -> Result<Option<T>, SpecError> {
        let line = self.stmt.line;
        match self.raw(key) {
            None => Ok(None),
            Some(tok) => parse(tok.text)
                .map(Some)
                .map_err(|m| syntax(line, tok.column, format!("`{key}` must be {what}: {m}"))),
        }
    }

    fn require<T>(&mut self, key: &str, what: &str, parse: impl FnOnce(&str) -> Result<T, String>) -> Result<T, SpecError> {
        let (line, column) = (self.stmt.line, self.stmt.keyword.column);
        let keyword = self.stmt.keyword.text;
        self.get(key, what, parse)?
            .ok_or_else(|| syntax(line, column, format!("`{keyword}` requires `{key}=`")))
    }
}

fn real_arg(s: &str) -> Result<f64, String> {
    parse_real(s).ok_or_else(|| format!("`{s}` is not a finite number"))
}

fn dim_arg(s: &str) -> Result<usize, String> {
    s.parse::<usize>().ok().filter(|&d| d >= 1).ok_or_else(|| format!("`{s}` is not a positive integer"))
}

fn point_arg(s: &str) -> Result<LatticePoint, String> {
    parse_point(s).ok_or_else(|| format!("`{s}` is not a comma-separated integer point"))
}

fn check_decay(d: usize, r: f64) -> Result<(), SpecError> {
    if r > d as f64 / 2.0 {
        Ok(())
    } else {
        Err(semantic("r", format!("decay exponent must satisfy r > d/2 = {}, got {}", d as f64 / 2.0, fmt_f64(r))))
    }
}

// ---------------------------------------------------------------------------
// Parsing.

pub fn parse_spec(text: &str) -> Result<SpecDocument, SpecError> {
    let statements = tokenize(text)?;
    let Some(head) = statements.first() else {
        return Err(syntax(1, 1, "empty spec"));
    };
    let rest = &statements[1..];
    let body_keyword = |allowed: &str| -> Result<(), SpecError> {
        match rest.iter().find(|s| s.keyword.text != allowed) {
            Some(s) => Err(syntax(s.line, s.keyword.column, format!("unexpected statement `{}`", s.keyword.text))),
            None => Ok(()),
        }
    };
    let doc = match head.keyword.text {
        name if Builtin::from_token(name).is_some() => {
            body_keyword("")?;
            let mut f = Fields::new(head, &["d", "r"])?;
            let d = f.require("d", "a positive integer", dim_arg)?;
            let r = f.get("r", "a number", real_arg)?.unwrap_or(BUILTIN_R);
            check_decay(d, r)?;
            SpecDocument::Operator(OperatorSpec::Builtin { builtin: Builtin::from_token(name).unwrap(), d, r })
        }
        "operator" => {
            body_keyword("coeff")?;
            SpecDocument::Operator(OperatorSpec::Table(parse_table(head, rest)?))
        }
        "ensemble" => {
            body_keyword("hopping")?;
            SpecDocument::Ensemble(EnsembleSpec::General(parse_ensemble(head, rest)?))
        }
        "jacobi" => {
            body_keyword("")?;
            let mut f = Fields::new(head, &["gamma", "r"])?;
            let gamma = f.require("gamma", "a measure", parse_measure)?;
            let r = f.get("r", "a number", real_arg)?.unwrap_or(JACOBI_R);
            check_decay(1, r)?;
            if !gamma.is_real() || gamma.support_radius().is_none() {
                return Err(semantic("gamma", "must be real and compactly supported"));
            }
            SpecDocument::Ensemble(EnsembleSpec::Jacobi { gamma, r })
        }
        other => return Err(syntax(head.line, head.keyword.column, format!("unknown statement `{other}`"))),
    };
    Ok(doc)
}

fn parse_table(head: &Statement<'_>, body: &[Statement<'_>]) -> Result<TableOperator, SpecError> {
    let mut f = Fields::new(head, &["d", "C", "r", "kind", "diagonal", "period"])?;
    let d = f.require("d", "a positive integer", dim_arg)?;
    let c = f.require("C", "a positive number", |s| real_arg(s).and_then(|c| if c > 0.0 { Ok(c) } else { Err("not positive".into()) }))?;
    let r = f.require("r", "a number", real_arg)?;
    let kind = f
        .get("kind", "self_adjoint or normal", |s| match s {
            "self_adjoint" => Ok(OperatorKind::SelfAdjoint),
            "normal" => Ok(OperatorKind::Normal),
            _ => Err(format!("unknown kind `{s}`")),
        })?
        .unwrap_or(OperatorKind::SelfAdjoint);
    let diagonal_bounded = f
        .get("diagonal", "bounded or unbounded", |s| match s {
            "bounded" => Ok(true),
            "unbounded" => Ok(false),
            _ => Err(format!("unknown diagonal mode `{s}`")),
        })?
        .unwrap_or(true);
    let period = f
        .get("period", "a positive integer", |s| s.parse::<i64>().ok().filter(|&p| p >= 1).ok_or_else(|| "not positive".to_string()))?
        .unwrap_or(1);
    check_decay(d, r)?;
    if kind == OperatorKind::Normal && !diagonal_bounded {
        return Err(semantic("diagonal", "normal operators need a bounded diagonal"));
    }
    let env = DecayEnvelope::new(c, r, d).map_err(|e| semantic("r", e.to_string()))?;

    let mut entries = BTreeMap::new();
    for stmt in body {
        let mut f = Fields::new(stmt, &["j", "cell", "value"])?;
        let j = f.require("j", "a lattice point", point_arg)?;
        let cell = f.get("cell", "a lattice point", point_arg)?.unwrap_or_else(|| LatticePoint::origin(d));
        let value = f.require("value", "a complex number", |s| parse_complex(s).ok_or_else(|| format!("`{s}` is not a number")))?;
        let key = format!("coeff j={j} cell={cell}");
        let at = |msg: String| syntax(stmt.line, stmt.keyword.column, msg);
        if j.dim() != d || cell.dim() != d {
            return Err(at(format!("points must have {d} coordinate(s)")));
        }
        if cell.iter().any(|&x| x < 0 || x >= period) {
            return Err(at(format!("cell ({cell}) outside {{0..{}}}^d", period - 1)));
        }
        if (!j.is_origin() || diagonal_bounded) && !env.admits(&j, value) {
            return Err(semantic(
                key,
                format!("|a| = {} exceeds the envelope bound {}", fmt_f64(value.norm()), fmt_f64(env.bound(&j))),
            ));
        }
        if j.is_origin() && kind == OperatorKind::SelfAdjoint && value.im != 0.0 {
            return Err(semantic(key, "diagonal of a self-adjoint operator must be real"));
        }
        if entries.insert((j, cell), value).is_some() {
            return Err(at("duplicate coefficient".into()));
        }
    }
    if kind == OperatorKind::SelfAdjoint {
        PeriodicTableRule::self_adjoint(period, entries.clone()).map_err(|e| semantic("coeff", e.to_string()))?;
    }
    Ok(TableOperator { d, c, r, kind, diagonal_bounded, period, entries })
}

fn parse_ensemble(head: &Statement<'_>, body: &[Statement<'_>]) -> Result<GeneralEnsemble, SpecError> {
    let mut f = Fields::new(head, &["d", "C", "r", "gamma", "diagonal", "default", "quantile"])?;
    let d = f.require("d", "a positive integer", dim_arg)?;
    let c = f.require("C", "a positive number", |s| real_arg(s).and_then(|c| if c > 0.0 { Ok(c) } else { Err("not positive".into()) }))?;
    let r = f.require("r", "a number", real_arg)?;
    f.get("gamma", "half_space", |s| if s == "half_space" { Ok(()) } else { Err(format!("unsupported index partition `{s}`")) })?;
    let diagonal = f.require("diagonal", "a measure", parse_measure)?;
    let default = f.get("default", "a default rule", parse_default)?.unwrap_or(DefaultRule::Zero);
    let quantile = f
        .get("quantile", "a number in (0.5, 1)", |s| real_arg(s).and_then(|q| if q > 0.5 && q < 1.0 { Ok(q) } else { Err("out of range".into()) }))?
        .unwrap_or(DEFAULT_QUANTILE);
    check_decay(d, r)?;
    if !diagonal.is_real() {
        return Err(semantic("diagonal", "the diagonal distribution must be real"));
    }
    let env = DecayEnvelope::new(c, r, d).map_err(|e| semantic("r", e.to_string()))?;

    let mut hopping = BTreeMap::new();
    for stmt in body {
        let mut f = Fields::new(stmt, &["k", "measure"])?;
        let k = f.require("k", "a lattice point", point_arg)?;
        let measure = f.require("measure", "a measure", parse_measure)?;
        let key = format!("hopping k={k}");
        if k.dim() != d {
            return Err(syntax(stmt.line, stmt.keyword.column, format!("points must have {d} coordinate(s)")));
        }
        if !longrange::ensemble::in_gamma(&k) {
            return Err(semantic(key, "index must have a positive first nonzero coordinate"));
        }
        match measure.support_radius() {
            None => return Err(semantic(key, "hopping distributions must be compactly supported")),
            Some(radius) if radius > env.bound(&k) * (1.0 + operator::ENVELOPE_TOLERANCE) => {
                return Err(semantic(
                    key,
                    format!("support radius {} exceeds the envelope bound {}", fmt_f64(radius), fmt_f64(env.bound(&k))),
                ));
            }
            _ => {}
        }
        if hopping.insert(k, measure).is_some() {
            return Err(syntax(stmt.line, stmt.keyword.column, "duplicate hopping index"));
        }
    }
    Ok(GeneralEnsemble { d, c, r, diagonal, default, quantile, hopping })
}

// ---------------------------------------------------------------------------
// Canonical serialization.

impl fmt::Display for SpecDocument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpecDocument::Operator(OperatorSpec::Builtin { builtin, d, r }) => {
                writeln!(f, "{} d={d} r={}", builtin.token(), fmt_f64(*r))
            }
            SpecDocument::Operator(OperatorSpec::Table(t)) => {
                let kind = match t.kind {
                    OperatorKind::SelfAdjoint => "self_adjoint",
                    OperatorKind::Normal => "normal",
                };
                let diagonal = if t.diagonal_bounded { "bounded" } else { "unbounded" };
                writeln!(
                    f,
                    "operator d={} C={} r={} kind={kind} diagonal={diagonal} period={}",
                    t.d,
                    fmt_f64(t.c),
                    fmt_f64(t.r),
                    t.period
                )?;
                for ((j, cell), v) in &t.entries {
                    writeln!(f, "coeff j={j} cell={cell} value={}", fmt_complex(*v))?;
                }
                Ok(())
            }
            SpecDocument::Ensemble(EnsembleSpec::General(g)) => {
                writeln!(
                    f,
                    "ensemble d={} C={} r={} gamma=half_space diagonal={} default={} quantile={}",
                    g.d,
                    fmt_f64(g.c),
                    fmt_f64(g.r),
                    fmt_measure(&g.diagonal),
                    fmt_default(g.default),
                    fmt_f64(g.quantile)
                )?;
                for (k, m) in &g.hopping {
                    writeln!(f, "hopping k={k} measure={}", fmt_measure(m))?;
                }
                Ok(())
            }
            SpecDocument::Ensemble(EnsembleSpec::Jacobi { gamma, r }) => {
                writeln!(f, "jacobi gamma={} r={}", fmt_measure(gamma), fmt_f64(*r))
            }
        }
    }
}

pub fn serialize_spec(doc: &SpecDocument) -> String {
    doc.to_string()
}
