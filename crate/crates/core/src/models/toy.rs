//! Low-dimensional test systems with analytic force-gradient terms.

use crate::error::Result;
use crate::geometry::MassMetric;
use crate::model::{HmcModel, Model};

/// `V(q) = ½|q|²`, unit mass.
#[derive(Debug, Clone)]
pub struct Harmonic {
    metric: MassMetric,
}

impl Harmonic {
    pub fn new(dim: usize) -> Self {
        Self {
            metric: MassMetric::unit(dim),
        }
    }
}

impl Model for Harmonic {
    fn dim(&self) -> usize {
        self.metric.dim()
    }
    fn metric(&self) -> &MassMetric {
        &self.metric
    }
    fn potential(&self, q: &[f64]) -> Result<f64> {
        Ok(0.5 * q.iter().map(|x| x * x).sum::<f64>())
    }
    fn gradient(&self, q: &[f64], out: &mut [f64]) -> Result<()> {
        out.copy_from_slice(q);
        Ok(())
    }
    fn has_fg_term(&self) -> bool {
        true
    }
    fn fg_term(&self, q: &[f64], out: &mut [f64]) -> Result<bool> {
        for (o, x) in out.iter_mut().zip(q) {
            *o = 2.0 * x;
        }
        Ok(true)
    }
}

/// `V(q) = q⁴/4` in one dimension, unit mass.
#[derive(Debug, Clone, Copy, Default)]
pub struct Quartic;

static UNIT1: MassMetric = MassMetric::Unit(1);

impl Model for Quartic {
    fn dim(&self) -> usize {
        1
    }
    fn metric(&self) -> &MassMetric {
        &UNIT1
    }
    fn potential(&self, q: &[f64]) -> Result<f64> {
        Ok(0.25 * q[0].powi(4))
    }
    fn gradient(&self, q: &[f64], out: &mut [f64]) -> Result<()> {
        out[0] = q[0].powi(3);
        Ok(())
    }
    fn has_fg_term(&self) -> bool {
        true
    }
    fn fg_term(&self, q: &[f64], out: &mut [f64]) -> Result<bool> {
        // 2 V'' V' = 2·3q²·q³
        out[0] = 6.0 * q[0].powi(5);
        Ok(true)
    }
}

/// Anharmonic chain `V(q) = Σ (½ q_i² + ¼ q_i⁴) + Σ ½ (q_{i+1} − q_i)²` with a
/// diagonal mass matrix; a small coupled nonlinear system for geometric tests.
#[derive(Debug, Clone)]
pub struct AnharmonicChain {
    metric: MassMetric,
}

impl AnharmonicChain {
    pub fn new(mass: Vec<f64>) -> Result<Self> {
        Ok(Self {
            metric: MassMetric::diagonal(mass)?,
        })
    }
}

impl Model for AnharmonicChain {
    fn dim(&self) -> usize {
        self.metric.dim()
    }
    fn metric(&self) -> &MassMetric {
        &self.metric
    }
    fn potential(&self, q: &[f64]) -> Result<f64> {
        let onsite: f64 = q.iter().map(|x| 0.5 * x * x + 0.25 * x.powi(4)).sum();
        let bonds: f64 = q.windows(2).map(|w| 0.5 * (w[1] - w[0]).powi(2)).sum();
        Ok(onsite + bonds)
    }
    fn gradient(&self, q: &[f64], out: &mut [f64]) -> Result<()> {
        for (o, x) in out.iter_mut().zip(q) {
            *o = x + x.powi(3);
        }
        for i in 0..q.len().saturating_sub(1) {
            let d = q[i + 1] - q[i];
            out[i] -= d;
            out[i + 1] += d;
        }
        Ok(())
    }
    fn has_fg_term(&self) -> bool {
        true
    }
    fn fg_term(&self, q: &[f64], out: &mut [f64]) -> Result<bool> {
        let g = self.gradient_vec(q)?;
        let u = self.metric.inverse_times(&g);
        // Hessian-vector product H·u
        for i in 0..q.len() {
            out[i] = (1.0 + 3.0 * q[i] * q[i]) * u[i];
        }
        for i in 0..q.len().saturating_sub(1) {
            let d = u[i + 1] - u[i];
            out[i] -= d;
            out[i + 1] += d;
        }
        out.iter_mut().for_each(|o| *o *= 2.0);
        Ok(true)
    }
}

impl HmcModel for Harmonic {
    fn observable(&self, q: &[f64]) -> f64 {
        q.iter().map(|x| x * x).sum::<f64>() / q.len() as f64
    }
}

impl HmcModel for Quartic {
    fn observable(&self, q: &[f64]) -> f64 {
        q[0] * q[0]
    }
}
