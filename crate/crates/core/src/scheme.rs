//! Palindromic splitting schemes built from A (drift), B (kick) and
//! D (force-gradient kick) stages.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// Residual allowed in `Σa = Σb = 1` at construction time.
pub const SUM_TOLERANCE: f64 = 1e-14;
/// Residual allowed in the closed-form order conditions.
pub const ORDER_CONDITION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Stage {
    /// `exp(a h T̂)`.
    Drift { a: f64 },
    /// `exp(b h V̂)`.
    Kick { b: f64 },
    /// `exp(b h V̂ + c h³ Ĉ)`, `b ≠ 0`, `c ≠ 0`.
    FgKick { b: f64, c: f64 },
}

impl Stage {
    pub fn letter(&self) -> char {
        match self {
            Stage::Drift { .. } => 'A',
            Stage::Kick { .. } => 'B',
            Stage::FgKick { .. } => 'D',
        }
    }

    pub fn is_momentum(&self) -> bool {
        !matches!(self, Stage::Drift { .. })
    }

    pub fn a(&self) -> f64 {
        match self {
            Stage::Drift { a } => *a,
            _ => 0.0,
        }
    }

    pub fn b(&self) -> f64 {
        match self {
            Stage::Kick { b } | Stage::FgKick { b, .. } => *b,
            Stage::Drift { .. } => 0.0,
        }
    }

    pub fn c(&self) -> f64 {
        match self {
            Stage::FgKick { c, .. } => *c,
            _ => 0.0,
        }
    }

    /// Force evaluations of the Hessian-free realisation of this stage.
    pub fn force_cost(&self) -> usize {
        match self {
            Stage::Drift { .. } => 0,
            Stage::Kick { .. } => 1,
            Stage::FgKick { .. } => 2,
        }
    }

    /// A momentum stage with `c = 0` is a plain kick.
    fn momentum(b: f64, c: f64) -> Stage {
        if c == 0.0 {
            Stage::Kick { b }
        } else {
            Stage::FgKick { b, c }
        }
    }
}

/// Rational stage, used where exact arithmetic of the error multipliers is
/// required.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExactStage {
    Drift(Ratio<i64>),
    Kick(Ratio<i64>, Ratio<i64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Version {
    Velocity,
    Position,
}

impl fmt::Display for Version {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Version::Velocity => f.write_str("velocity"),
            Version::Position => f.write_str("position"),
        }
    }
}

/// Tabulated metadata of a catalog row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub id: u32,
    pub n_f: usize,
    pub err: f64,
    pub eff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scheme {
    pub name: String,
    pub stages: Vec<Stage>,
    pub version: Version,
    /// Claimed order; `None` for ad hoc schemes.
    pub order: Option<u32>,
    pub table: Option<TableRow>,
    #[serde(skip)]
    pub exact: Option<Vec<ExactStage>>,
}

impl Scheme {
    pub fn letters(&self) -> String {
        self.stages.iter().map(Stage::letter).collect()
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    /// Number of stages in one half including the centre.
    pub fn half_len(&self) -> usize {
        self.stages.len().div_ceil(2)
    }

    pub fn sum_a(&self) -> f64 {
        self.stages.iter().map(Stage::a).sum()
    }

    pub fn sum_b(&self) -> f64 {
        self.stages.iter().map(Stage::b).sum()
    }

    pub fn is_gradient(&self) -> bool {
        self.stages.iter().any(|s| matches!(s, Stage::FgKick { .. }))
    }

    pub fn with_order(mut self, order: u32) -> Self {
        self.order = Some(order);
        self
    }

    /// Same stage sequence with every `c` replaced by zero.
    pub fn without_gradient(&self) -> Scheme {
        let stages = self
            .stages
            .iter()
            .map(|s| match *s {
                Stage::FgKick { b, .. } => Stage::Kick { b },
                s => s,
            })
            .collect();
        Scheme {
            name: format!("{}-nofg", self.name),
            stages,
            version: self.version,
            order: None,
            table: None,
            exact: None,
        }
    }

    /// Builds a scheme from a full stage list without the palindrome check.
    /// Used for deliberately broken schemes in tests.
    pub fn from_stages_unchecked(name: &str, stages: Vec<Stage>) -> Scheme {
        let version = match stages.first() {
            Some(Stage::Drift { .. }) => Version::Position,
            _ => Version::Velocity,
        };
        Scheme {
            name: name.to_string(),
            stages,
            version,
            order: None,
            table: None,
            exact: None,
        }
    }
}

fn family(letter: char) -> Result<bool> {
    match letter {
        'A' => Ok(false),
        'B' | 'D' => Ok(true),
        other => Err(Error::scheme(format!("unknown stage letter `{other}`"))),
    }
}

fn check_letters(letters: &str) -> Result<Vec<char>> {
    let chars: Vec<char> = letters.chars().collect();
    if chars.is_empty() || chars.len().is_multiple_of(2) {
        return Err(Error::scheme(format!(
            "`{letters}` must have an odd number of stages"
        )));
    }
    for w in chars.windows(2) {
        if family(w[0])? == family(w[1])? {
            return Err(Error::scheme(format!(
                "`{letters}` has adjacent stages of the same family"
            )));
        }
    }
    family(*chars.last().unwrap())?;
    if chars.iter().ne(chars.iter().rev()) {
        return Err(Error::scheme(format!("`{letters}` is not palindromic")));
    }
    Ok(chars)
}

/// Fills a per-kind coefficient list either from its first half (including
/// the centre) or from the full palindromic list.
fn expand_half(kind: &str, list: &[f64], count: usize) -> Result<Vec<f64>> {
    let half = count.div_ceil(2);
    if list.len() == count {
        if list.iter().ne(list.iter().rev()) {
            return Err(Error::scheme(format!("{kind} coefficients are not palindromic")));
        }
        return Ok(list.to_vec());
    }
    if list.len() != half {
        return Err(Error::scheme(format!(
            "expected {half} (half) or {count} (full) {kind} coefficients, got {}",
            list.len()
        )));
    }
    let mut out = list.to_vec();
    out.extend(list[..count / 2].iter().rev());
    Ok(out)
}

/// Assembles and validates a scheme.
///
/// `a_list` and `b_list` hold the drift and momentum-stage coefficients of
/// either the first half (centre included) or the whole sequence;
/// `c_list` holds one entry per `D` letter in the same layout. B and D
/// stages share `b_list`. A `D` with `c = 0` becomes a `B`.
pub fn build_scheme(letters: &str, a_list: &[f64], b_list: &[f64], c_list: &[f64]) -> Result<Scheme> {
    let chars = check_letters(letters)?;
    let n_a = chars.iter().filter(|&&c| c == 'A').count();
    let n_m = chars.len() - n_a;
    let n_d = chars.iter().filter(|&&c| c == 'D').count();
    if n_d == 0 && !c_list.is_empty() {
        return Err(Error::scheme(format!(
            "c coefficients given but `{letters}` has no D stage"
        )));
    }
    let a = expand_half("a", a_list, n_a)?;
    let b = expand_half("b", b_list, n_m)?;
    let c = if n_d == 0 {
        Vec::new()
    } else {
        expand_half("c", c_list, n_d)?
    };
    let (mut ia, mut ib, mut ic) = (0, 0, 0);
    let mut stages = Vec::with_capacity(chars.len());
    for ch in &chars {
        let stage = match ch {
            'A' => {
                ia += 1;
                Stage::Drift { a: a[ia - 1] }
            }
            'B' => {
                ib += 1;
                Stage::Kick { b: b[ib - 1] }
            }
            _ => {
                ib += 1;
                ic += 1;
                Stage::momentum(b[ib - 1], c[ic - 1])
            }
        };
        stages.push(stage);
    }
    let scheme = Scheme::from_stages_unchecked(letters, stages);
    validate(&scheme)?;
    Ok(scheme)
}

/// Structural and consistency checks shared by every constructor.
pub fn validate(scheme: &Scheme) -> Result<()> {
    let s = &scheme.stages;
    if s.is_empty() || s.len().is_multiple_of(2) {
        return Err(Error::scheme("stage count must be odd"));
    }
    for w in s.windows(2) {
        if w[0].is_momentum() == w[1].is_momentum() {
            return Err(Error::scheme("adjacent stages of the same family"));
        }
    }
    for (x, y) in s.iter().zip(s.iter().rev()) {
        if x != y {
            return Err(Error::scheme("stage sequence is not palindromic"));
        }
    }
    for st in s {
        let finite = st.a().is_finite() && st.b().is_finite() && st.c().is_finite();
        if !finite {
            return Err(Error::scheme("non-finite coefficient"));
        }
        if let Stage::FgKick { b, .. } = st {
            if *b == 0.0 {
                return Err(Error::scheme("D stage with b = 0"));
            }
        }
    }
    let sa = scheme.sum_a();
    let sb = scheme.sum_b();
    if (sa - 1.0).abs() > SUM_TOLERANCE || (sb - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::scheme(format!(
            "coefficients must sum to one (Σa = {sa}, Σb = {sb})"
        )));
    }
    Ok(())
}

/// Amortised force evaluations per step in Hessian-free mode.
///
/// B costs one force, D two (shifted and unshifted). For velocity versions
/// the first stage repeats the last stage of the previous step at the same
/// configuration, so its cost is saved.
pub fn count_forces(scheme: &Scheme) -> usize {
    let total: usize = scheme.stages.iter().map(Stage::force_cost).sum();
    match scheme.version {
        Version::Velocity => total - scheme.stages[0].force_cost(),
        Version::Position => total,
    }
}

/// Triple-jump weights `(w1, w2)` for raising a symmetric order-`p` method.
pub fn triple_jump_weights(p: u32) -> (f64, f64) {
    let w1 = 1.0 / (2.0 - 2f64.powf(1.0 / (p as f64 + 1.0)));
    (w1, 1.0 - 2.0 * w1)
}

fn scale(stage: Stage, w: f64) -> Stage {
    match stage {
        Stage::Drift { a } => Stage::Drift { a: a * w },
        Stage::Kick { b } => Stage::Kick { b: b * w },
        Stage::FgKick { b, c } => Stage::FgKick { b: b * w, c: c * w * w * w },
    }
}

fn merge(x: Stage, y: Stage) -> Stage {
    match (x, y) {
        (Stage::Drift { a: a1 }, Stage::Drift { a: a2 }) => Stage::Drift { a: a1 + a2 },
        _ => Stage::momentum(x.b() + y.b(), x.c() + y.c()),
    }
}

/// `k`-fold symmetric triple-jump composition `Φ(w1 h)∘Φ(w2 h)∘Φ(w1 h)`.
///
/// Same-family stages meeting at the seams are merged; for momentum stages
/// this is exact because `V̂` and `Ĉ` commute.
pub fn triple_jump(base: &Scheme, k: u32) -> Result<Scheme> {
    if k < 1 {
        return Err(Error::invalid("triple jump needs k >= 1"));
    }
    let mut p = base
        .order
        .ok_or_else(|| Error::invalid("triple jump needs a base scheme with known order"))?;
    if p % 2 != 0 {
        return Err(Error::invalid("triple jump needs an even-order symmetric base"));
    }
    let mut stages = base.stages.clone();
    for _ in 0..k {
        let (w1, w2) = triple_jump_weights(p);
        let mut out: Vec<Stage> = Vec::with_capacity(3 * stages.len());
        for w in [w1, w2, w1] {
            for &st in &stages {
                let st = scale(st, w);
                match out.last_mut() {
                    Some(last) if last.is_momentum() == st.is_momentum() => *last = merge(*last, st),
                    _ => out.push(st),
                }
            }
        }
        stages = out;
        p += 2;
    }
    let mut scheme = Scheme::from_stages_unchecked("", stages);
    scheme.name = scheme.letters();
    scheme.order = Some(p);
    validate(&scheme)?;
    Ok(scheme)
}

/// Result of checking the closed-form order conditions of a scheme family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderConditionReport {
    pub scheme: String,
    /// `None` when no closed form exists for the scheme's family.
    pub family: Option<&'static str>,
    pub residuals: Vec<(String, f64)>,
    pub pass: Option<bool>,
}

impl OrderConditionReport {
    pub fn is_checkable(&self) -> bool {
        self.family.is_some()
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0_f64, |m, (_, r)| m.max(*r))
    }
}

fn report(scheme: &Scheme, family: &'static str, residuals: Vec<(String, f64)>) -> OrderConditionReport {
    let pass = residuals
        .iter()
        .all(|(_, r)| r.is_finite() && *r < ORDER_CONDITION_TOLERANCE);
    OrderConditionReport {
        scheme: scheme.name.clone(),
        family: Some(family),
        residuals,
        pass: Some(pass),
    }
}

/// Picks the sign branch with the smaller worst residual.
fn best_branch(branches: [Vec<(String, f64)>; 2]) -> Vec<(String, f64)> {
    let worst = |v: &Vec<(String, f64)>| v.iter().fold(0.0_f64, |m, (_, r)| m.max(*r));
    let [plus, minus] = branches;
    if worst(&minus) < worst(&plus) || worst(&plus).is_nan() {
        minus
    } else {
        plus
    }
}

/// Checks the closed-form solutions of the order conditions for the stage
/// families where they are known in closed form: 5- and 7-stage velocity,
/// 7- and 9-stage position. Only schemes claiming order ≥ 4 are constrained.
pub fn validate_order_conditions(scheme: &Scheme) -> OrderConditionReport {
    let not_checkable = OrderConditionReport {
        scheme: scheme.name.clone(),
        family: None,
        residuals: Vec::new(),
        pass: None,
    };
    if scheme.order.is_some_and(|p| p < 4) {
        return not_checkable;
    }
    let s = &scheme.stages;
    let (b, c, a) = (|i: usize| s[i].b(), |i: usize| s[i].c(), |i: usize| s[i].a());
    let r = |name: &str, v: f64| (name.to_string(), v.abs());
    match (s.len(), scheme.version) {
        (5, Version::Velocity) => {
            let (b1, c1, c2) = (b(0), c(0), c(2));
            report(
                scheme,
                "5-stage velocity",
                vec![r("b1 - 1/6", b1 - 1.0 / 6.0), r("c2 - (1/72 - 2 c1)", c2 - (1.0 / 72.0 - 2.0 * c1))],
            )
        }
        (7, Version::Velocity) => {
            let (b1, c1, a2, c2) = (b(0), c(0), a(1), c(2));
            let q = a2 * (a2 - 1.0);
            let b1_cf = (6.0 + 1.0 / q) / 12.0;
            let c1_cf = -(6.0 + 288.0 * c2 - 1.0 / (a2 * (a2 - 1.0).powi(2))) / 288.0;
            report(
                scheme,
                "7-stage velocity",
                vec![r("b1 - closed form", b1 - b1_cf), r("c1 - closed form", c1 - c1_cf)],
            )
        }
        (7, Version::Position) => {
            let (a1, b1, c1, c2) = (a(0), b(1), c(1), c(3));
            let branch = |sgn: f64| {
                let a1_cf = 0.5 + sgn / (24.0 * b1).sqrt();
                let c1_cf = (1.0 - 12.0 * c2 + sgn * (6.0 * b1).sqrt() * (1.0 - b1)) / 24.0;
                vec![r("a1 - closed form", a1 - a1_cf), r("c1 - closed form", c1 - c1_cf)]
            };
            report(scheme, "7-stage position", best_branch([branch(1.0), branch(-1.0)]))
        }
        (9, Version::Position) => {
            let (a1, b1, c1, a2, c2) = (a(0), b(1), c(1), a(2), c(3));
            let root = 3f64.sqrt() * (1.0 - 24.0 * a2 * a2 * b1 + 48.0 * a2 * a2 * b1 * b1).sqrt();
            let branch = |sgn: f64| {
                let a1_cf = (3.0 - 6.0 * a2 + 12.0 * a2 * b1 - sgn * root) / 6.0;
                let c2_cf = (2.0 - 12.0 * a2 * b1 + 24.0 * a2 * b1 * b1 - sgn * root - 48.0 * c1) / 48.0;
                vec![r("a1 - closed form", a1 - a1_cf), r("c2 - closed form", c2 - c2_cf)]
            };
            report(scheme, "9-stage position", best_branch([branch(1.0), branch(-1.0)]))
        }
        _ => not_checkable,
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [", self.name)?;
        for (i, s) in self.stages.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            match s {
                Stage::Drift { a } => write!(f, "A({a})")?,
                Stage::Kick { b } => write!(f, "B({b})")?,
                Stage::FgKick { b, c } => write!(f, "D({b}, {c})")?,
            }
        }
        f.write_str("]")
    }
}
