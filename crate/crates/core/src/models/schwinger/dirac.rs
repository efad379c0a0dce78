//! Wilson–Dirac operator with two-component spinors and its normal-equation
//! solver.
//!
//! `Dψ(n) = (2+m0)ψ(n) − ½ Σμ [(1−σμ) Qμ(n) ψ(n+μ̂) + (1+σμ) Qμ†(n−μ̂) ψ(n−μ̂)]`
//! with `σ0 = σ1` (Pauli x) along x and `σ1 = σ2` (Pauli y) along t. Spinors
//! are stored as `ψ[2·site + spin]`.

use num_complex::Complex64;

use super::lattice::Lattice;
use crate::error::{Error, Result};

pub type Spinor = Vec<Complex64>;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Fermion boundary condition in time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeBoundary {
    Periodic,
    Antiperiodic,
}

/// `(1 + s·σμ) v` for a two-spinor `v`.
#[inline]
fn proj(mu: usize, s: f64, v: [Complex64; 2]) -> [Complex64; 2] {
    let sv = if mu == 0 { [v[1], v[0]] } else { [-I * v[1], I * v[0]] };
    [v[0] + s * sv[0], v[1] + s * sv[1]]
}

#[derive(Debug, Clone)]
pub struct WilsonDirac<'a> {
    pub lattice: &'a Lattice,
    pub theta: &'a [f64],
    pub m0: f64,
    pub bc: TimeBoundary,
}

impl<'a> WilsonDirac<'a> {
    pub fn new(lattice: &'a Lattice, theta: &'a [f64], m0: f64, bc: TimeBoundary) -> Self {
        Self { lattice, theta, m0, bc }
    }

    /// Link factor of the hop `n → n+μ̂` including the fermion boundary sign.
    #[inline]
    pub fn hop(&self, n: usize, mu: usize) -> Complex64 {
        let u = Complex64::from_polar(1.0, self.theta[Lattice::link(n, mu)]);
        if self.bc == TimeBoundary::Antiperiodic && self.lattice.crosses_time_boundary(n, mu) {
            -u
        } else {
            u
        }
    }

    /// `out = Dψ`, or `D†ψ` when `dagger`. The adjoint swaps the projectors.
    pub fn apply(&self, psi: &[Complex64], out: &mut [Complex64], dagger: bool) {
        let lat = self.lattice;
        let s = if dagger { 1.0 } else { -1.0 };
        let diag = 2.0 + self.m0;
        for n in 0..lat.volume() {
            let mut acc = [diag * psi[2 * n], diag * psi[2 * n + 1]];
            for mu in 0..2 {
                let f = lat.fwd(n, mu);
                let b = lat.bwd(n, mu);
                let uf = self.hop(n, mu);
                let ub = self.hop(b, mu).conj();
                let fw = proj(mu, s, [uf * psi[2 * f], uf * psi[2 * f + 1]]);
                let bw = proj(mu, -s, [ub * psi[2 * b], ub * psi[2 * b + 1]]);
                acc[0] -= 0.5 * (fw[0] + bw[0]);
                acc[1] -= 0.5 * (fw[1] + bw[1]);
            }
            out[2 * n] = acc[0];
            out[2 * n + 1] = acc[1];
        }
    }

    pub fn apply_vec(&self, psi: &[Complex64], dagger: bool) -> Spinor {
        let mut out = vec![Complex64::default(); psi.len()];
        self.apply(psi, &mut out, dagger);
        out
    }

    /// `out = D†Dψ`; `tmp` is scratch.
    pub fn normal(&self, psi: &[Complex64], tmp: &mut [Complex64], out: &mut [Complex64]) {
        self.apply(psi, tmp, false);
        self.apply(tmp, out, true);
    }

    pub fn spinor_len(&self) -> usize {
        2 * self.lattice.volume()
    }
}

pub fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// Outcome of a CG solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgInfo {
    pub iterations: usize,
    /// `‖D†D x − b‖ / ‖b‖`, recomputed from scratch after the solve.
    pub residual: f64,
    /// Smallest Lanczos-Ritz estimate of the spectrum of `D†D` seen by CG.
    pub min_ritz: f64,
}

/// Solves `D†D x = rhs` by conjugate gradients from `x = 0`.
pub fn cg_solve(op: &WilsonDirac, rhs: &[Complex64], tol: f64, maxiter: usize) -> Result<(Spinor, CgInfo)> {
    let n = rhs.len();
    let zero = Complex64::default();
    let bnorm2 = norm_sqr(rhs);
    if bnorm2 == 0.0 {
        return Ok((vec![zero; n], CgInfo { iterations: 0, residual: 0.0, min_ritz: f64::NAN }));
    }
    let mut x = vec![zero; n];
    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let mut ap = vec![zero; n];
    let mut tmp = vec![zero; n];
    let mut rr = bnorm2;
    let target = tol * tol * bnorm2;
    let mut iterations = 0;
    let mut min_ritz = f64::INFINITY;
    while rr > target {
        if iterations >= maxiter {
            return Err(Error::CgNotConverged {
                iterations,
                residual: (rr / bnorm2).sqrt(),
            });
        }
        op.normal(&p, &mut tmp, &mut ap);
        let pap = dot(&p, &ap).re;
        // Rayleigh quotient of the search direction bounds λ_min from above.
        min_ritz = min_ritz.min(pap / norm_sqr(&p));
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = norm_sqr(&r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        iterations += 1;
    }
    op.normal(&x, &mut tmp, &mut ap);
    let true_res = ap
        .iter()
        .zip(rhs)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt()
        / bnorm2.sqrt();
    Ok((x, CgInfo { iterations, residual: true_res, min_ritz }))
}
