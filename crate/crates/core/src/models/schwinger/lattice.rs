//! Two-dimensional periodic lattice geometry and the Wilson gauge action.
//!
//! Sites are lexicographic, `site = x + L·t`; links are site-major,
//! direction-minor, `link = 2·site + μ`, with `μ = 0` along x and `μ = 1`
//! along t.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lattice {
    pub l: usize,
    pub t: usize,
    fwd: Vec<[usize; 2]>,
    bwd: Vec<[usize; 2]>,
}

impl Lattice {
    pub fn new(l: usize, t: usize) -> Self {
        assert!(l >= 2 && t >= 2, "lattice extents must be >= 2");
        let v = l * t;
        let mut fwd = vec![[0; 2]; v];
        let mut bwd = vec![[0; 2]; v];
        for tt in 0..t {
            for x in 0..l {
                let s = x + l * tt;
                fwd[s] = [(x + 1) % l + l * tt, x + l * ((tt + 1) % t)];
                bwd[s] = [(x + l - 1) % l + l * tt, x + l * ((tt + t - 1) % t)];
            }
        }
        Self { l, t, fwd, bwd }
    }

    pub fn volume(&self) -> usize {
        self.l * self.t
    }

    pub fn n_links(&self) -> usize {
        2 * self.volume()
    }

    pub fn site(&self, x: usize, t: usize) -> usize {
        x + self.l * t
    }

    pub fn coords(&self, site: usize) -> (usize, usize) {
        (site % self.l, site / self.l)
    }

    pub fn fwd(&self, site: usize, mu: usize) -> usize {
        self.fwd[site][mu]
    }

    pub fn bwd(&self, site: usize, mu: usize) -> usize {
        self.bwd[site][mu]
    }

    /// True when the hop `site → site + μ̂` crosses the time boundary.
    pub fn crosses_time_boundary(&self, site: usize, mu: usize) -> bool {
        mu == 1 && site / self.l == self.t - 1
    }

    pub fn link(site: usize, mu: usize) -> usize {
        2 * site + mu
    }

    /// Plaquette phase `θ0(n) + θ1(n+0̂) − θ0(n+1̂) − θ1(n)`.
    pub fn plaquette_phase(&self, theta: &[f64], n: usize) -> f64 {
        theta[Self::link(n, 0)] + theta[Self::link(self.fwd(n, 0), 1)]
            - theta[Self::link(self.fwd(n, 1), 0)]
            - theta[Self::link(n, 1)]
    }

    /// Plaquette `exp(i P(n))` as `(re, im)`.
    pub fn plaquette(&self, theta: &[f64], n: usize) -> (f64, f64) {
        let (s, c) = self.plaquette_phase(theta, n).sin_cos();
        (c, s)
    }

    /// `β Σ_n (1 − cos P(n))`.
    pub fn gauge_action(&self, theta: &[f64], beta: f64) -> f64 {
        (0..self.volume())
            .map(|n| 1.0 - self.plaquette_phase(theta, n).cos())
            .sum::<f64>()
            * beta
    }

    /// `∂S_G/∂θ` per link, written into `out`.
    pub fn gauge_force(&self, theta: &[f64], beta: f64, out: &mut [f64]) {
        let sp: Vec<f64> = (0..self.volume()).map(|n| self.plaquette_phase(theta, n).sin()).collect();
        for n in 0..self.volume() {
            out[Self::link(n, 0)] = beta * (sp[n] - sp[self.bwd(n, 1)]);
            out[Self::link(n, 1)] = beta * (-sp[n] + sp[self.bwd(n, 0)]);
        }
    }

    /// Mean of `cos P(n)`.
    pub fn average_plaquette(&self, theta: &[f64]) -> f64 {
        (0..self.volume())
            .map(|n| self.plaquette_phase(theta, n).cos())
            .sum::<f64>()
            / self.volume() as f64
    }

    /// Applies the gauge rotation `θμ(n) ← θμ(n) + α(n) − α(n+μ̂)`.
    pub fn gauge_transform(&self, theta: &mut [f64], alpha: &[f64]) {
        for n in 0..self.volume() {
            for mu in 0..2 {
                theta[Self::link(n, mu)] += alpha[n] - alpha[self.fwd(n, mu)];
            }
        }
    }
}
