//! Executes splitting schemes against models.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::{drift, kick, Flip, PhasePoint};
use crate::model::{fg_term_fd, Model};
use crate::scheme::{Scheme, Stage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StepMode {
    /// D stages use a force at a temporarily shifted configuration.
    #[default]
    HessianFree,
    /// D stages use the model's analytic force-gradient term.
    ExactFg,
    /// D stages use a directional finite difference of the force.
    ExactFgFd,
}

impl fmt::Display for StepMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StepMode::HessianFree => "hessian_free",
            StepMode::ExactFg => "exact_fg",
            StepMode::ExactFgFd => "exact_fg_fd",
        })
    }
}

impl FromStr for StepMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "hessian_free" | "hf" => Ok(StepMode::HessianFree),
            "exact_fg" | "exact" => Ok(StepMode::ExactFg),
            "exact_fg_fd" | "fd" => Ok(StepMode::ExactFgFd),
            other => Err(Error::invalid(format!("unknown step mode `{other}`"))),
        }
    }
}

/// Evaluation counts of one trajectory. Monotone non-decreasing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct EvalCounter {
    pub force_evals: u64,
    pub fg_evals: u64,
    pub cache_hits: u64,
}

impl EvalCounter {
    /// Work in force-evaluation units: an analytic or finite-difference
    /// FG evaluation paired with its force counts as one extra force, so a
    /// D stage costs two in every mode.
    pub fn cost(&self) -> u64 {
        self.force_evals + self.fg_evals
    }

    pub fn add(&mut self, other: &EvalCounter) {
        self.force_evals += other.force_evals;
        self.fg_evals += other.fg_evals;
        self.cache_hits += other.cache_hits;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Force,
    Fg,
}

struct CacheEntry {
    version: u64,
    shift_bits: u64,
    kind: Kind,
    value: Vec<f64>,
}

/// One trajectory of a scheme against a model.
///
/// Forces are cached by (configuration version, D-shift): the version is
/// bumped by every drift, so consecutive steps of a velocity version reuse
/// the evaluations of the shared boundary stage.
pub struct Stepper<'a, M: Model + ?Sized> {
    scheme: &'a Scheme,
    model: &'a M,
    mode: StepMode,
    h: f64,
    state: PhasePoint,
    version: u64,
    cache: Vec<CacheEntry>,
    counter: EvalCounter,
}

impl<'a, M: Model + ?Sized> Stepper<'a, M> {
    pub fn new(scheme: &'a Scheme, model: &'a M, state: PhasePoint, h: f64, mode: StepMode) -> Result<Self> {
        if !h.is_finite() || h < 0.0 {
            return Err(Error::invalid(format!("step size must be finite and >= 0, got {h}")));
        }
        if state.dim() != model.dim() || state.p.len() != model.dim() {
            return Err(Error::Geometry(crate::geometry::GeometryError::DimensionMismatch {
                expected: model.dim(),
                got: state.dim(),
            }));
        }
        if mode == StepMode::ExactFg && scheme.is_gradient() && !model.has_fg_term() {
            return Err(Error::MissingFgTerm);
        }
        Ok(Self {
            scheme,
            model,
            mode,
            h,
            state,
            version: 0,
            cache: Vec::with_capacity(4),
            counter: EvalCounter::default(),
        })
    }

    pub fn state(&self) -> &PhasePoint {
        &self.state
    }

    pub fn into_state(self) -> PhasePoint {
        self.state
    }

    pub fn counter(&self) -> EvalCounter {
        self.counter
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    fn cached(&mut self, kind: Kind, shift: f64) -> Option<Vec<f64>> {
        let bits = shift.to_bits();
        let hit = self
            .cache
            .iter()
            .find(|e| e.version == self.version && e.kind == kind && e.shift_bits == bits)
            .map(|e| e.value.clone());
        if hit.is_some() {
            self.counter.cache_hits += 1;
        }
        hit
    }

    fn store(&mut self, kind: Kind, shift: f64, value: &[f64]) {
        self.cache.push(CacheEntry {
            version: self.version,
            shift_bits: shift.to_bits(),
            kind,
            value: value.to_vec(),
        });
    }

    /// `∇V(q − shift·M⁻¹∇V(q))`; `shift = 0` is the plain force.
    fn force(&mut self, shift: f64) -> Result<Vec<f64>> {
        if let Some(g) = self.cached(Kind::Force, shift) {
            return Ok(g);
        }
        let g = if shift == 0.0 {
            self.model.gradient_vec(&self.state.q)?
        } else {
            let g0 = self.force(0.0)?;
            let u = self.model.metric().inverse_times(&g0);
            let q: Vec<f64> = self.state.q.iter().zip(&u).map(|(q, u)| q - shift * u).collect();
            self.model.gradient_vec(&q)?
        };
        self.counter.force_evals += 1;
        self.store(Kind::Force, shift, &g);
        Ok(g)
    }

    fn fg(&mut self) -> Result<Vec<f64>> {
        if let Some(v) = self.cached(Kind::Fg, 0.0) {
            return Ok(v);
        }
        let g0 = self.force(0.0)?;
        let mut out = vec![0.0; g0.len()];
        match self.mode {
            StepMode::ExactFg => {
                if !self.model.fg_term(&self.state.q, &mut out)? {
                    return Err(Error::MissingFgTerm);
                }
            }
            _ => fg_term_fd(self.model, &self.state.q, &g0, &mut out)?,
        }
        self.counter.fg_evals += 1;
        self.store(Kind::Fg, 0.0, &out);
        Ok(out)
    }

    fn apply(&mut self, stage: Stage) -> Result<()> {
        let h = self.h;
        match stage {
            Stage::Drift { a } => {
                drift(&mut self.state, self.model.metric(), a * h)?;
                self.version += 1;
                self.cache.clear();
            }
            Stage::Kick { b } => {
                let g = self.force(0.0)?;
                kick(&mut self.state, &g, b * h)?;
            }
            Stage::FgKick { b, c } => match self.mode {
                StepMode::HessianFree => {
                    let g = self.force(2.0 * c * h * h / b)?;
                    kick(&mut self.state, &g, b * h)?;
                }
                StepMode::ExactFg | StepMode::ExactFgFd => {
                    let g = self.force(0.0)?;
                    let fg = self.fg()?;
                    let (s1, s3) = (b * h, c * h * h * h);
                    for ((p, g), f) in self.state.p.iter_mut().zip(&g).zip(&fg) {
                        *p += -s1 * g + s3 * f;
                    }
                }
            },
        }
        Ok(())
    }

    /// One application of the scheme, stages left to right.
    pub fn step(&mut self) -> Result<()> {
        for i in 0..self.scheme.stages.len() {
            self.apply(self.scheme.stages[i])?;
        }
        Ok(())
    }

    pub fn run(&mut self, n_steps: usize) -> Result<()> {
        for _ in 0..n_steps {
            self.step()?;
        }
        Ok(())
    }

    /// Negates the momenta. Positions are untouched so cached forces stay
    /// valid.
    pub fn flip(&mut self) {
        Flip.apply(&mut self.state);
    }
}

/// A single D stage applied to `state`.
pub fn d_stage<M: Model + ?Sized>(
    state: &mut PhasePoint,
    b: f64,
    c: f64,
    h: f64,
    model: &M,
    mode: StepMode,
) -> Result<EvalCounter> {
    if b == 0.0 {
        return Err(Error::invalid("D stage requires b != 0"));
    }
    if mode == StepMode::ExactFg && c != 0.0 && !model.has_fg_term() {
        return Err(Error::MissingFgTerm);
    }
    let stage = if c == 0.0 { Stage::Kick { b } } else { Stage::FgKick { b, c } };
    let scheme = Scheme::from_stages_unchecked("D", vec![stage]);
    let mut st = Stepper::new(&scheme, model, std::mem::replace(state, PhasePoint::zeros(0)), h, mode)?;
    st.step()?;
    let counter = st.counter();
    *state = st.into_state();
    Ok(counter)
}

/// One step of `scheme`; `counter` accumulates the evaluations.
pub fn step<M: Model + ?Sized>(
    scheme: &Scheme,
    model: &M,
    state: &PhasePoint,
    h: f64,
    mode: StepMode,
    counter: &mut EvalCounter,
) -> Result<PhasePoint> {
    let mut st = Stepper::new(scheme, model, state.clone(), h, mode)?;
    st.step()?;
    counter.add(&st.counter());
    Ok(st.into_state())
}

/// `n_steps` steps with the force cache carried across steps.
pub fn integrate<M: Model + ?Sized>(
    scheme: &Scheme,
    model: &M,
    state: &PhasePoint,
    h: f64,
    n_steps: usize,
    mode: StepMode,
) -> Result<(PhasePoint, EvalCounter)> {
    let mut st = Stepper::new(scheme, model, state.clone(), h, mode)?;
    st.run(n_steps)?;
    let c = st.counter();
    Ok((st.into_state(), c))
}

/// `‖ρ∘Φ^n∘ρ∘Φ^n(x) − x‖∞` for `n_steps` steps of size `h`.
pub fn reversibility_defect_n<M: Model + ?Sized>(
    scheme: &Scheme,
    model: &M,
    state: &PhasePoint,
    h: f64,
    n_steps: usize,
    mode: StepMode,
) -> Result<f64> {
    let (mut y, _) = integrate(scheme, model, state, h, n_steps, mode)?;
    Flip.apply(&mut y);
    let (mut z, _) = integrate(scheme, model, &y, h, n_steps, mode)?;
    Flip.apply(&mut z);
    Ok(z.max_distance(state))
}

pub fn reversibility_defect<M: Model + ?Sized>(
    scheme: &Scheme,
    model: &M,
    state: &PhasePoint,
    h: f64,
    mode: StepMode,
) -> Result<f64> {
    reversibility_defect_n(scheme, model, state, h, 1, mode)
}

/// Largest total phase-space dimension accepted by [`jacobian_det`].
pub const JACOBIAN_MAX_DIM: usize = 8;

/// `det ∂Φ_h/∂(q, p)` by central finite differences.
pub fn jacobian_det<M: Model + ?Sized>(
    scheme: &Scheme,
    model: &M,
    state: &PhasePoint,
    h: f64,
    mode: StepMode,
) -> Result<f64> {
    let x0 = state.to_flat();
    let n = x0.len();
    if n > JACOBIAN_MAX_DIM {
        return Err(Error::invalid(format!(
            "jacobian needs phase dimension <= {JACOBIAN_MAX_DIM}, got {n}"
        )));
    }
    let mut jac = nalgebra::DMatrix::zeros(n, n);
    let mut dummy = EvalCounter::default();
    for j in 0..n {
        let eps = 1e-5 * (1.0 + x0[j].abs());
        let mut xp = x0.clone();
        let mut xm = x0.clone();
        xp[j] += eps;
        xm[j] -= eps;
        let yp = step(scheme, model, &PhasePoint::from_flat(&xp), h, mode, &mut dummy)?.to_flat();
        let ym = step(scheme, model, &PhasePoint::from_flat(&xm), h, mode, &mut dummy)?.to_flat();
        for i in 0..n {
            jac[(i, j)] = (yp[i] - ym[i]) / (2.0 * eps);
        }
    }
    Ok(jac.determinant())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{catalog, lookup};
    use crate::models::toy::{Harmonic, Quartic};
    use crate::scheme::{count_forces, Version};

    fn p1(q: f64, p: f64) -> PhasePoint {
        PhasePoint::new(vec![q], vec![p]).unwrap()
    }

    #[test]
    fn leapfrog_matches_textbook() {
        let m = Harmonic::new(1);
        let bab = lookup("BAB").unwrap();
        let (y, _) = integrate(bab, &m, &p1(1.0, 0.0), 0.1, 1, StepMode::HessianFree).unwrap();
        // p½ = p − h/2·q; q1 = q + h·p½; p1 = p½ − h/2·q1
        let (q, p, h) = (1.0, 0.0, 0.1);
        let ph = p - 0.5 * h * q;
        let q1 = q + h * ph;
        let p1 = ph - 0.5 * h * q1;
        assert_eq!((y.q[0], y.p[0]), (q1, p1));
    }

    #[test]
    fn zero_step_is_identity() {
        let m = Quartic;
        let x = p1(0.7, -0.3);
        for s in catalog() {
            let (y, _) = integrate(s, &m, &x, 0.0, 3, StepMode::HessianFree).unwrap();
            assert_eq!(y, x, "{}", s.name);
        }
        let (y, c) = integrate(lookup("BADAB").unwrap(), &m, &x, 0.1, 0, StepMode::HessianFree).unwrap();
        assert_eq!((y, c.cost()), (x, 0));
    }

    #[test]
    fn badab_force_accounting() {
        let m = Quartic;
        let s = lookup("BADAB").unwrap();
        let mut st = Stepper::new(s, &m, p1(1.0, 0.2), 0.1, StepMode::HessianFree).unwrap();
        st.step().unwrap();
        assert_eq!(st.counter().force_evals, 4);
        for k in 2..=10 {
            st.step().unwrap();
            assert_eq!(st.counter().force_evals, 4 + 3 * (k - 1));
        }
    }

    #[test]
    fn amortised_counts_match_catalog() {
        let m = Quartic;
        for mode in [StepMode::HessianFree, StepMode::ExactFg, StepMode::ExactFgFd] {
            for s in catalog() {
                let n = 5;
                let (_, c) = integrate(s, &m, &p1(0.9, 0.1), 0.05, n, mode).unwrap();
                let nf = count_forces(s) as u64;
                let first = match s.version {
                    Version::Velocity => s.stages[0].force_cost() as u64,
                    Version::Position => 0,
                };
                assert_eq!(c.cost(), nf * n as u64 + first, "{} {mode}", s.name);
            }
        }
    }

    #[test]
    fn d_stage_with_zero_c_is_a_kick() {
        let m = Quartic;
        let mut a = p1(1.3, 0.4);
        d_stage(&mut a, 0.7, 0.0, 0.2, &m, StepMode::HessianFree).unwrap();
        let mut b = p1(1.3, 0.4);
        kick(&mut b, &Quartic.gradient_vec(&[1.3]).unwrap(), 0.7 * 0.2).unwrap();
        assert_eq!(a.q, b.q);
        assert!((a.p[0] - b.p[0]).abs() < 1e-15);
        assert!(d_stage(&mut a, 0.0, 0.1, 0.2, &m, StepMode::HessianFree).is_err());
    }

    #[test]
    fn modes_coincide_on_harmonic_oscillator() {
        let m = Harmonic::new(1);
        for s in catalog().iter().filter(|s| s.is_gradient()) {
            let x = p1(0.8, -0.5);
            let (a, _) = integrate(s, &m, &x, 0.3, 1, StepMode::HessianFree).unwrap();
            let (b, _) = integrate(s, &m, &x, 0.3, 1, StepMode::ExactFg).unwrap();
            assert!(a.max_distance(&b) < 1e-14, "{}", s.name);
        }
    }

    #[test]
    fn exact_mode_requires_fg_term() {
        struct NoFg(crate::geometry::MassMetric);
        impl Model for NoFg {
            fn dim(&self) -> usize {
                1
            }
            fn metric(&self) -> &crate::geometry::MassMetric {
                &self.0
            }
            fn potential(&self, q: &[f64]) -> Result<f64> {
                Ok(q[0] * q[0])
            }
            fn gradient(&self, q: &[f64], out: &mut [f64]) -> Result<()> {
                out[0] = 2.0 * q[0];
                Ok(())
            }
        }
        let m = NoFg(crate::geometry::MassMetric::unit(1));
        let s = lookup("BADAB").unwrap();
        assert!(matches!(
            integrate(s, &m, &p1(1.0, 0.0), 0.1, 1, StepMode::ExactFg),
            Err(Error::MissingFgTerm)
        ));
        assert!(integrate(s, &m, &p1(1.0, 0.0), 0.1, 1, StepMode::ExactFgFd).is_ok());
    }

    #[test]
    fn split_run_equals_full_run() {
        let m = Quartic;
        let s = lookup("ABADABADABA").unwrap();
        let x = p1(1.1, 0.3);
        let (full, _) = integrate(s, &m, &x, 0.07, 40, StepMode::HessianFree).unwrap();
        let (half, _) = integrate(s, &m, &x, 0.07, 20, StepMode::HessianFree).unwrap();
        let (two, _) = integrate(s, &m, &half, 0.07, 20, StepMode::HessianFree).unwrap();
        assert_eq!(full, two);
    }

    #[test]
    fn jacobian_dimension_limit() {
        let m = Harmonic::new(5);
        let s = lookup("BAB").unwrap();
        assert!(jacobian_det(s, &m, &PhasePoint::zeros(5), 0.1, StepMode::HessianFree).is_err());
        let d = jacobian_det(s, &Harmonic::new(1), &p1(1.0, 0.5), 0.1, StepMode::HessianFree).unwrap();
        assert!((d - 1.0).abs() < 1e-9);
    }

    #[test]
    fn mode_parsing() {
        for m in [StepMode::HessianFree, StepMode::ExactFg, StepMode::ExactFgFd] {
            assert_eq!(m.to_string().parse::<StepMode>().unwrap(), m);
        }
        assert!("bogus".parse::<StepMode>().is_err());
    }
}
