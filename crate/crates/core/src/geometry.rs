//! Phase spaces and the primitive flows every splitting stage is built from.
//!
//! Two configuration spaces are supported with one storage layout:
//!
//! * Euclidean coordinates `q ∈ R^d` with a constant symmetric positive
//!   definite mass matrix `M`, kinetic energy `½ pᵀM⁻¹p`;
//! * periodic U(1) lattice links `Q = exp(iθ)` with unit metric. Link angles
//!   are additive in θ, so drifts and kicks are the same shears as in the
//!   Euclidean case and the closure property holds by construction.
//!
//! Sign convention is canonical everywhere: `q̇ = M⁻¹p`, `ṗ = −∇V(q)`. The
//! right-invariant Lie-group convention (`e_i(Q) = −T_i Q`) negates both
//! equations; the two are conjugate under the momentum flip and give
//! identical trajectories for palindromic schemes.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("mass matrix is not symmetric positive definite")]
    NotPositiveDefinite,
    #[error("non-finite value in phase point")]
    NonFinite,
}

/// Constant mass matrix `M` of the kinetic energy.
#[derive(Debug, Clone, PartialEq)]
pub enum MassMetric {
    /// `M = Id` of the given dimension (lattice momenta).
    Unit(usize),
    /// `M = diag(m)`, every entry strictly positive.
    Diagonal { mass: Vec<f64>, inv_mass: Vec<f64> },
    /// General SPD matrix, stored with its inverse and Cholesky factor.
    Dense {
        mass: DMatrix<f64>,
        inv_mass: DMatrix<f64>,
        chol_lower: DMatrix<f64>,
    },
}

impl MassMetric {
    pub fn unit(dim: usize) -> Self {
        MassMetric::Unit(dim)
    }

    pub fn diagonal(mass: Vec<f64>) -> Result<Self, GeometryError> {
        if mass.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(GeometryError::NotPositiveDefinite);
        }
        let inv_mass = mass.iter().map(|m| 1.0 / m).collect();
        Ok(MassMetric::Diagonal { mass, inv_mass })
    }

    pub fn dense(mass: DMatrix<f64>) -> Result<Self, GeometryError> {
        if !mass.is_square() {
            return Err(GeometryError::NotPositiveDefinite);
        }
        let asym = (&mass - mass.transpose()).amax();
        if asym > 1e-12 * mass.amax().max(1.0) {
            return Err(GeometryError::NotPositiveDefinite);
        }
        let chol = mass
            .clone()
            .cholesky()
            .ok_or(GeometryError::NotPositiveDefinite)?;
        let inv_mass = chol.inverse();
        let chol_lower = chol.l();
        Ok(MassMetric::Dense {
            mass,
            inv_mass,
            chol_lower,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            MassMetric::Unit(d) => *d,
            MassMetric::Diagonal { mass, .. } => mass.len(),
            MassMetric::Dense { mass, .. } => mass.nrows(),
        }
    }

    /// Writes `M⁻¹ v` into `out`.
    pub fn apply_inverse(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), out.len());
        match self {
            MassMetric::Unit(_) => out.copy_from_slice(v),
            MassMetric::Diagonal { inv_mass, .. } => {
                for ((o, x), w) in out.iter_mut().zip(v).zip(inv_mass) {
                    *o = x * w;
                }
            }
            MassMetric::Dense { inv_mass, .. } => {
                let r = inv_mass * DVector::from_column_slice(v);
                out.copy_from_slice(r.as_slice());
            }
        }
    }

    pub fn inverse_times(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        self.apply_inverse(v, &mut out);
        out
    }

    /// Draws `p ~ N(0, M)`.
    pub fn sample_momentum<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.dim()).map(|_| rng.sample(StandardNormal)).collect();
        match self {
            MassMetric::Unit(_) => z,
            MassMetric::Diagonal { mass, .. } => {
                z.iter().zip(mass).map(|(z, m)| z * m.sqrt()).collect()
            }
            MassMetric::Dense { chol_lower, .. } => {
                let r = chol_lower * DVector::from_vec(z);
                r.as_slice().to_vec()
            }
        }
    }
}

/// A point `(q, p)` of phase space. For lattice models `q` holds link angles.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl PhasePoint {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Result<Self, GeometryError> {
        if q.len() != p.len() {
            return Err(GeometryError::DimensionMismatch {
                expected: q.len(),
                got: p.len(),
            });
        }
        if q.iter().chain(&p).any(|x| !x.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        Ok(Self { q, p })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            q: vec![0.0; dim],
            p: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(&self.p).all(|x| x.is_finite())
    }

    /// Sup-norm over all position and momentum components.
    pub fn max_norm(&self) -> f64 {
        self.q
            .iter()
            .chain(&self.p)
            .fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Sup-norm of `self − other` over positions and momenta jointly.
    pub fn max_distance(&self, other: &PhasePoint) -> f64 {
        self.q
            .iter()
            .zip(&other.q)
            .chain(self.p.iter().zip(&other.p))
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Flat `[q..., p...]` view, used by finite-difference Jacobians.
    pub fn to_flat(&self) -> Vec<f64> {
        self.q.iter().chain(&self.p).copied().collect()
    }

    pub fn from_flat(x: &[f64]) -> Self {
        let d = x.len() / 2;
        Self {
            q: x[..d].to_vec(),
            p: x[d..].to_vec(),
        }
    }
}

/// Momentum flip `ρ(p, q) = (−p, q)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Flip;

impl Flip {
    pub fn apply(&self, state: &mut PhasePoint) {
        state.p.iter_mut().for_each(|p| *p = -*p);
    }
}

fn check_dim(metric: &MassMetric, state: &PhasePoint) -> Result<(), GeometryError> {
    if metric.dim() != state.dim() || state.q.len() != state.p.len() {
        return Err(GeometryError::DimensionMismatch {
            expected: metric.dim(),
            got: state.dim(),
        });
    }
    Ok(())
}

/// `½ pᵀM⁻¹p`.
pub fn kinetic_energy(state: &PhasePoint, metric: &MassMetric) -> Result<f64, GeometryError> {
    check_dim(metric, state)?;
    let ke = match metric {
        MassMetric::Unit(_) => state.p.iter().map(|p| p * p).sum::<f64>(),
        MassMetric::Diagonal { inv_mass, .. } => {
            state.p.iter().zip(inv_mass).map(|(p, w)| p * p * w).sum()
        }
        MassMetric::Dense { .. } => {
            let v = metric.inverse_times(&state.p);
            state.p.iter().zip(&v).map(|(a, b)| a * b).sum()
        }
    };
    Ok(0.5 * ke)
}

/// Exact kinetic flow for time `s`: `q ← q + s·M⁻¹p`.
pub fn drift(state: &mut PhasePoint, metric: &MassMetric, s: f64) -> Result<(), GeometryError> {
    check_dim(metric, state)?;
    if s == 0.0 {
        return Ok(());
    }
    match metric {
        MassMetric::Unit(_) => {
            for (q, p) in state.q.iter_mut().zip(&state.p) {
                *q += s * p;
            }
        }
        MassMetric::Diagonal { inv_mass, .. } => {
            for ((q, p), w) in state.q.iter_mut().zip(&state.p).zip(inv_mass) {
                *q += s * (p * w);
            }
        }
        MassMetric::Dense { .. } => {
            let v = metric.inverse_times(&state.p);
            for (q, v) in state.q.iter_mut().zip(&v) {
                *q += s * v;
            }
        }
    }
    Ok(())
}

/// Exact potential flow for time `s` given `∇V` at the current configuration:
/// `p ← p − s·∇V`.
pub fn kick(state: &mut PhasePoint, gradient: &[f64], s: f64) -> Result<(), GeometryError> {
    if gradient.len() != state.p.len() {
        return Err(GeometryError::DimensionMismatch {
            expected: state.p.len(),
            got: gradient.len(),
        });
    }
    if s == 0.0 {
        return Ok(());
    }
    for (p, g) in state.p.iter_mut().zip(gradient) {
        *p -= s * g;
    }
    Ok(())
}

/// Maps an unbounded link angle to `[−π, π)`. Only used for reporting.
pub fn wrap_angle(theta: f64) -> f64 {
    let t = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if t >= PI {
        t - 2.0 * PI
    } else {
        t
    }
}

/// Unit-modulus link `exp(iθ)` as `(cos θ, sin θ)`.
pub fn link(theta: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    (c, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kinetic_energy_examples() {
        let m = MassMetric::diagonal(vec![2.0]).unwrap();
        let s = PhasePoint::new(vec![0.3], vec![0.0]).unwrap();
        assert_eq!(kinetic_energy(&s, &m).unwrap(), 0.0);
        let s = PhasePoint::new(vec![0.3], vec![2.0]).unwrap();
        assert_eq!(kinetic_energy(&s, &m).unwrap(), 1.0);
    }

    #[test]
    fn kinetic_energy_dimension_mismatch() {
        let m = MassMetric::unit(3);
        let s = PhasePoint::zeros(2);
        assert!(matches!(
            kinetic_energy(&s, &m),
            Err(GeometryError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn dense_metric_agrees_with_diagonal() {
        let diag = MassMetric::diagonal(vec![2.0, 3.0, 0.5]).unwrap();
        let dense =
            MassMetric::dense(DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0, 0.5])))
                .unwrap();
        let s = PhasePoint::new(vec![1.0, 2.0, 3.0], vec![0.4, -1.0, 2.5]).unwrap();
        let a = kinetic_energy(&s, &diag).unwrap();
        let b = kinetic_energy(&s, &dense).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn dense_metric_rejects_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert_eq!(
            MassMetric::dense(m).unwrap_err(),
            GeometryError::NotPositiveDefinite
        );
        assert!(MassMetric::diagonal(vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn drift_and_kick_examples() {
        let m = MassMetric::unit(1);
        let mut s = PhasePoint::new(vec![0.0], vec![1.0]).unwrap();
        drift(&mut s, &m, 0.0).unwrap();
        assert_eq!(s.q, vec![0.0]);
        drift(&mut s, &m, 0.5).unwrap();
        assert_eq!((s.q[0], s.p[0]), (0.5, 1.0));

        let mut s = PhasePoint::new(vec![0.0], vec![1.0]).unwrap();
        kick(&mut s, &[2.0], 0.25).unwrap();
        assert_eq!(s.p[0], 0.5);
        kick(&mut s, &[2.0], 0.0).unwrap();
        assert_eq!(s.p[0], 0.5);
    }

    #[test]
    fn shears_have_unit_jacobian() {
        // Finite-difference Jacobian of drift and kick (gradient of V = Σ cos q_i).
        let m = MassMetric::diagonal(vec![1.5, 0.7, 3.0]).unwrap();
        let x0 = PhasePoint::new(vec![0.1, -0.4, 1.2], vec![0.3, 0.2, -0.9]).unwrap();
        let grad = |q: &[f64]| q.iter().map(|x| -x.sin()).collect::<Vec<_>>();
        let maps: [Box<dyn Fn(&PhasePoint) -> PhasePoint>; 2] = [
            Box::new(|x: &PhasePoint| {
                let mut y = x.clone();
                drift(&mut y, &m, 0.37).unwrap();
                y
            }),
            Box::new(|x: &PhasePoint| {
                let mut y = x.clone();
                let g = grad(&y.q);
                kick(&mut y, &g, 0.37).unwrap();
                y
            }),
        ];
        for map in &maps {
            let flat = x0.to_flat();
            let n = flat.len();
            let mut jac = DMatrix::zeros(n, n);
            let eps = 1e-6;
            for j in 0..n {
                let mut xp = flat.clone();
                let mut xm = flat.clone();
                xp[j] += eps;
                xm[j] -= eps;
                let yp = map(&PhasePoint::from_flat(&xp)).to_flat();
                let ym = map(&PhasePoint::from_flat(&xm)).to_flat();
                for i in 0..n {
                    jac[(i, j)] = (yp[i] - ym[i]) / (2.0 * eps);
                }
            }
            assert!((jac.determinant() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn closure_on_u1_links() {
        for k in -50..50 {
            let theta = 0.37 * k as f64 + 1e3;
            let (c, s) = link(theta);
            assert!(((c * c + s * s).sqrt() - 1.0).abs() < 1e-15);
            let w = wrap_angle(theta);
            assert!((-PI..PI).contains(&w));
            assert!((w.cos() - c).abs() < 1e-9 && (w.sin() - s).abs() < 1e-9);
        }
    }

    #[test]
    fn momentum_sampling_has_metric_covariance() {
        let m = MassMetric::diagonal(vec![4.0, 0.25]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 40_000;
        let mut acc = [0.0; 2];
        for _ in 0..n {
            let p = m.sample_momentum(&mut rng);
            acc[0] += p[0] * p[0];
            acc[1] += p[1] * p[1];
        }
        assert!((acc[0] / n as f64 - 4.0).abs() < 0.15);
        assert!((acc[1] / n as f64 - 0.25).abs() < 0.01);
    }

    fn state_strategy() -> impl Strategy<Value = PhasePoint> {
        (
            prop::collection::vec(-10.0..10.0f64, 3),
            prop::collection::vec(-10.0..10.0f64, 3),
        )
            .prop_map(|(q, p)| PhasePoint { q, p })
    }

    proptest! {
        #[test]
        fn drift_is_reversible(x in state_strategy(), s in -3.0..3.0f64) {
            let m = MassMetric::diagonal(vec![1.3, 0.2, 7.0]).unwrap();
            let mut y = x.clone();
            drift(&mut y, &m, s).unwrap();
            drift(&mut y, &m, -s).unwrap();
            prop_assert!(y.max_distance(&x) <= 1e-12 * (1.0 + x.max_norm()) * (1.0 + s.abs()) * 10.0);
        }

        #[test]
        fn kick_is_reversible(x in state_strategy(), s in -3.0..3.0f64) {
            let g = vec![0.3, -2.0, 5.5];
            let mut y = x.clone();
            kick(&mut y, &g, s).unwrap();
            kick(&mut y, &g, -s).unwrap();
            prop_assert!(y.max_distance(&x) <= 1e-13 * (1.0 + x.max_norm()) * 10.0);
        }

        #[test]
        fn flip_conjugates_primitives(x in state_strategy(), s in -3.0..3.0f64) {
            let m = MassMetric::diagonal(vec![1.3, 0.2, 7.0]).unwrap();
            let g = vec![0.3, -2.0, 5.5];
            // Flip ∘ drift(s) ∘ Flip = drift(−s)
            let mut a = x.clone();
            Flip.apply(&mut a);
            drift(&mut a, &m, s).unwrap();
            Flip.apply(&mut a);
            let mut b = x.clone();
            drift(&mut b, &m, -s).unwrap();
            prop_assert_eq!(&a, &b);
            // Flip ∘ kick(s) ∘ Flip = kick(−s)
            let mut a = x.clone();
            Flip.apply(&mut a);
            kick(&mut a, &g, s).unwrap();
            Flip.apply(&mut a);
            let mut b = x.clone();
            kick(&mut b, &g, -s).unwrap();
            prop_assert_eq!(&a, &b);
            // Flip ∘ Flip = Id
            let mut c = x.clone();
            Flip.apply(&mut c);
            Flip.apply(&mut c);
            prop_assert_eq!(&c, &x);
        }
    }
}
