//! The contract between physical systems and the integrators.

use rand::Rng;

use crate::error::Result;
use crate::geometry::MassMetric;

/// A separable Hamiltonian `H = ½ pᵀM⁻¹p + V(q)`.
///
/// `gradient` is `∇V` (the kick subtracts it). `fg_term`, if available, is
/// `2·∇²V(q)·M⁻¹·∇V(q)`.
pub trait Model: Sync {
    fn dim(&self) -> usize;

    fn metric(&self) -> &MassMetric;

    fn potential(&self, q: &[f64]) -> Result<f64>;

    fn gradient(&self, q: &[f64], out: &mut [f64]) -> Result<()>;

    fn has_fg_term(&self) -> bool {
        false
    }

    /// Returns `Ok(false)` when no analytic term is implemented.
    fn fg_term(&self, _q: &[f64], _out: &mut [f64]) -> Result<bool> {
        Ok(false)
    }

    fn gradient_vec(&self, q: &[f64]) -> Result<Vec<f64>> {
        let mut g = vec![0.0; q.len()];
        self.gradient(q, &mut g)?;
        Ok(g)
    }

    fn hamiltonian(&self, q: &[f64], p: &[f64]) -> Result<f64> {
        let state = crate::geometry::PhasePoint {
            q: q.to_vec(),
            p: p.to_vec(),
        };
        Ok(crate::geometry::kinetic_energy(&state, self.metric())? + self.potential(q)?)
    }
}

/// Central finite-difference step for a coordinate of size `x`.
fn fd_step(x: f64) -> f64 {
    f64::EPSILON.cbrt() * (1.0 + x.abs())
}

/// Worst relative error between `gradient` and central differences of
/// `potential` over the given points. Relative to `max(‖∇V‖∞, floor)`.
pub fn gradient_consistency<M: Model + ?Sized>(model: &M, points: &[Vec<f64>], floor: f64) -> Result<f64> {
    let mut worst = 0.0_f64;
    for q in points {
        let g = model.gradient_vec(q)?;
        let scale = g.iter().fold(floor, |m, x| m.max(x.abs()));
        let mut x = q.clone();
        for i in 0..q.len() {
            let h = fd_step(q[i]);
            x[i] = q[i] + h;
            let vp = model.potential(&x)?;
            x[i] = q[i] - h;
            let vm = model.potential(&x)?;
            x[i] = q[i];
            let fd = (vp - vm) / (2.0 * h);
            worst = worst.max((fd - g[i]).abs() / scale);
        }
    }
    Ok(worst)
}

/// `2·[∇V(q + εu) − ∇V(q − εu)] / (2ε)` with `u = M⁻¹∇V(q)`.
///
/// `ε` is normalised by `‖u‖∞` so the probe displacement is a fixed
/// fraction of the configuration scale.
pub fn fg_term_fd<M: Model + ?Sized>(model: &M, q: &[f64], grad: &[f64], out: &mut [f64]) -> Result<()> {
    let u = model.metric().inverse_times(grad);
    let unorm = u.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if unorm == 0.0 {
        out.iter_mut().for_each(|o| *o = 0.0);
        return Ok(());
    }
    let qnorm = q.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let eps = f64::EPSILON.cbrt() * (1.0 + qnorm) / unorm;
    let shifted = |sign: f64| -> Vec<f64> { q.iter().zip(&u).map(|(q, u)| q + sign * eps * u).collect() };
    let gp = model.gradient_vec(&shifted(1.0))?;
    let gm = model.gradient_vec(&shifted(-1.0))?;
    for ((o, a), b) in out.iter_mut().zip(&gp).zip(&gm) {
        *o = (a - b) / eps;
    }
    Ok(())
}

/// Worst relative deviation between the analytic FG-term and its directional
/// finite difference, relative to `‖fg‖∞`.
pub fn fg_consistency<M: Model + ?Sized>(model: &M, points: &[Vec<f64>]) -> Result<Option<f64>> {
    if !model.has_fg_term() {
        return Ok(None);
    }
    let mut worst = 0.0_f64;
    for q in points {
        let g = model.gradient_vec(q)?;
        let mut exact = vec![0.0; q.len()];
        model.fg_term(q, &mut exact)?;
        let mut fd = vec![0.0; q.len()];
        fg_term_fd(model, q, &g, &mut fd)?;
        let scale = exact.iter().fold(f64::MIN_POSITIVE, |m, x| m.max(x.abs()));
        for (e, f) in exact.iter().zip(&fd) {
            worst = worst.max((e - f).abs() / scale);
        }
    }
    Ok(Some(worst))
}

/// Extra per-trajectory state for Hybrid Monte Carlo (pseudofermions).
pub trait HmcModel: Model {
    /// Draws any auxiliary fields at the start of a trajectory.
    fn refresh<R: Rng + ?Sized>(&mut self, _q: &[f64], _rng: &mut R) -> Result<()> {
        Ok(())
    }

    /// Potential used in the accept/reject step; may be more accurate than
    /// the one used for forces.
    fn accept_potential(&self, q: &[f64]) -> Result<f64> {
        self.potential(q)
    }

    /// Scalar observable recorded per trajectory.
    fn observable(&self, _q: &[f64]) -> f64 {
        0.0
    }
}
