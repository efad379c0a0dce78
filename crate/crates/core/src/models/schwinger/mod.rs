//! Two-dimensional U(1) gauge theory with one Wilson-fermion pseudofermion
//! field: `V(θ) = S_G(θ) + η†(D†D)⁻¹η`.
//!
//! Gauge links are periodic in both directions; fermions are antiperiodic in
//! time unless configured otherwise. Pseudofermions are drawn once per
//! trajectory and held fixed during molecular dynamics.

pub mod dirac;
pub mod lattice;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Read, Write};

use crate::error::{Error, Result};
use crate::geometry::MassMetric;
use crate::model::{HmcModel, Model};
pub use dirac::{cg_solve, CgInfo, Spinor, TimeBoundary, WilsonDirac};
pub use lattice::Lattice;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchwingerParams {
    pub l: usize,
    pub t: usize,
    pub beta: f64,
    pub m0: f64,
    /// Relative CG residual for forces.
    pub cg_tol_md: f64,
    /// Relative CG residual for actions (accept/reject, finite differences).
    pub cg_tol_action: f64,
    pub cg_maxiter: usize,
    pub fermion_bc: TimeBoundary,
    /// Pure gauge theory when false.
    pub fermions: bool,
}

impl Default for SchwingerParams {
    fn default() -> Self {
        Self {
            l: 8,
            t: 8,
            beta: 1.0,
            m0: 0.352443,
            cg_tol_md: 1e-10,
            cg_tol_action: 1e-12,
            cg_maxiter: 10_000,
            fermion_bc: TimeBoundary::Antiperiodic,
            fermions: true,
        }
    }
}

impl SchwingerParams {
    pub fn validate(&self) -> Result<()> {
        if self.l < 2 || self.t < 2 {
            return Err(Error::invalid("lattice extents must be >= 2"));
        }
        if !(self.beta > 0.0) {
            return Err(Error::invalid("beta must be positive"));
        }
        if !(self.cg_tol_md > 0.0 && self.cg_tol_action > 0.0) {
            return Err(Error::invalid("CG tolerances must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Schwinger {
    pub params: SchwingerParams,
    pub lattice: Lattice,
    /// Pseudofermion field.
    pub eta: Spinor,
    metric: MassMetric,
}

impl Schwinger {
    pub fn new(params: SchwingerParams) -> Result<Self> {
        params.validate()?;
        let lattice = Lattice::new(params.l, params.t);
        let n = lattice.n_links();
        Ok(Self {
            eta: vec![Complex64::default(); 2 * lattice.volume()],
            metric: MassMetric::unit(n),
            lattice,
            params,
        })
    }

    pub fn dirac<'a>(&'a self, theta: &'a [f64]) -> WilsonDirac<'a> {
        WilsonDirac::new(&self.lattice, theta, self.params.m0, self.params.fermion_bc)
    }

    pub fn gauge_action(&self, theta: &[f64]) -> f64 {
        self.lattice.gauge_action(theta, self.params.beta)
    }

    /// `η†(D†D)⁻¹η` with the given CG tolerance.
    pub fn fermion_action_tol(&self, theta: &[f64], eta: &[Complex64], tol: f64) -> Result<f64> {
        let (phi, _) = cg_solve(&self.dirac(theta), eta, tol, self.params.cg_maxiter)?;
        Ok(dirac::dot(eta, &phi).re)
    }

    pub fn fermion_action(&self, theta: &[f64], eta: &[Complex64]) -> Result<f64> {
        self.fermion_action_tol(theta, eta, self.params.cg_tol_action)
    }

    /// `∂S_F/∂θ = −2 Re[ψ† (∂D/∂θ) φ]`, `φ = (D†D)⁻¹η`, `ψ = Dφ`.
    pub fn fermion_force_tol(&self, theta: &[f64], eta: &[Complex64], tol: f64, out: &mut [f64]) -> Result<CgInfo> {
        let d = self.dirac(theta);
        let (phi, info) = cg_solve(&d, eta, tol, self.params.cg_maxiter)?;
        let psi = d.apply_vec(&phi, false);
        let lat = &self.lattice;
        let i = Complex64::new(0.0, 1.0);
        for n in 0..lat.volume() {
            for mu in 0..2 {
                let f = lat.fwd(n, mu);
                let u = d.hop(n, mu);
                // ∂D/∂θμ(n): row n, col n+μ̂: −½(1−σμ)·iU; row n+μ̂, col n: −½(1+σμ)·(−iU*)
                let a = proj_dot(mu, -1.0, [psi[2 * n], psi[2 * n + 1]], [phi[2 * f], phi[2 * f + 1]]);
                let b = proj_dot(mu, 1.0, [psi[2 * f], psi[2 * f + 1]], [phi[2 * n], phi[2 * n + 1]]);
                let dd = -0.5 * (i * u * a - i * u.conj() * b);
                out[Lattice::link(n, mu)] = -2.0 * dd.re;
            }
        }
        Ok(info)
    }

    pub fn gauge_force(&self, theta: &[f64], out: &mut [f64]) {
        self.lattice.gauge_force(theta, self.params.beta, out);
    }

    /// `η = D†ξ` with complex Gaussian `ξ`, each real component of variance
    /// ½, so that `S_F = |ξ|²`.
    pub fn pseudofermion_heatbath<R: Rng + ?Sized>(&self, theta: &[f64], rng: &mut R) -> Spinor {
        let xi = gaussian_spinor(2 * self.lattice.volume(), rng);
        self.dirac(theta).apply_vec(&xi, true)
    }

    pub fn average_plaquette(&self, theta: &[f64]) -> f64 {
        self.lattice.average_plaquette(theta)
    }
}

/// `a† (1 + s·σμ) b`.
fn proj_dot(mu: usize, s: f64, a: [Complex64; 2], b: [Complex64; 2]) -> Complex64 {
    let i = Complex64::new(0.0, 1.0);
    let sb = if mu == 0 { [b[1], b[0]] } else { [-i * b[1], i * b[0]] };
    a[0].conj() * (b[0] + s * sb[0]) + a[1].conj() * (b[1] + s * sb[1])
}

/// Complex Gaussian vector, each real component `N(0, ½)`.
pub fn gaussian_spinor<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Spinor {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (0..n)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(s * re, s * im)
        })
        .collect()
}

impl Model for Schwinger {
    fn dim(&self) -> usize {
        self.lattice.n_links()
    }

    fn metric(&self) -> &MassMetric {
        &self.metric
    }

    fn potential(&self, q: &[f64]) -> Result<f64> {
        let mut v = self.gauge_action(q);
        if self.params.fermions {
            v += self.fermion_action(q, &self.eta)?;
        }
        Ok(v)
    }

    fn gradient(&self, q: &[f64], out: &mut [f64]) -> Result<()> {
        self.gauge_force(q, out);
        if self.params.fermions {
            let mut f = vec![0.0; out.len()];
            self.fermion_force_tol(q, &self.eta, self.params.cg_tol_md, &mut f)?;
            for (o, x) in out.iter_mut().zip(&f) {
                *o += x;
            }
        }
        Ok(())
    }
}

impl HmcModel for Schwinger {
    fn refresh<R: Rng + ?Sized>(&mut self, q: &[f64], rng: &mut R) -> Result<()> {
        if self.params.fermions {
            self.eta = self.pseudofermion_heatbath(q, rng);
        }
        Ok(())
    }

    fn accept_potential(&self, q: &[f64]) -> Result<f64> {
        self.potential(q)
    }

    fn observable(&self, q: &[f64]) -> f64 {
        self.average_plaquette(q)
    }
}

/// Header of a saved gauge configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeHeader {
    pub l: usize,
    pub t: usize,
    pub beta: f64,
    pub m0: f64,
    pub seed: u64,
    pub trajectory: u64,
}

/// Writes link angles as CSV (`site,mu,theta`) after a `#`-prefixed JSON
/// header line. Angles use shortest round-trip formatting.
pub fn save_gauge<W: Write>(mut w: W, header: &GaugeHeader, theta: &[f64]) -> Result<()> {
    if theta.len() != 2 * header.l * header.t {
        return Err(Error::invalid("theta length does not match the header"));
    }
    writeln!(w, "# {}", serde_json::to_string(header)?)?;
    writeln!(w, "site,mu,theta")?;
    for (i, th) in theta.iter().enumerate() {
        writeln!(w, "{},{},{:e}", i / 2, i % 2, th)?;
    }
    Ok(())
}

pub fn load_gauge<R: Read>(r: R) -> Result<(GaugeHeader, Vec<f64>)> {
    let mut lines = BufReader::new(r).lines();
    let first = lines.next().ok_or_else(|| Error::invalid("empty gauge file"))??;
    let json = first
        .strip_prefix("# ")
        .ok_or_else(|| Error::invalid("missing gauge header"))?;
    let header: GaugeHeader = serde_json::from_str(json)?;
    let rest: String = lines.collect::<std::io::Result<Vec<_>>>()?.join("\n");
    let mut rdr = csv::Reader::from_reader(rest.as_bytes());
    let mut theta = vec![f64::NAN; 2 * header.l * header.t];
    for rec in rdr.deserialize::<(usize, usize, f64)>() {
        let (site, mu, th) = rec?;
        let idx = 2 * site + mu;
        if mu > 1 || idx >= theta.len() {
            return Err(Error::invalid(format!("link ({site}, {mu}) out of range")));
        }
        theta[idx] = th;
    }
    if theta.iter().any(|x| x.is_nan()) {
        return Err(Error::invalid("gauge file is missing links"));
    }
    Ok((header, theta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn model4() -> Schwinger {
        Schwinger::new(SchwingerParams {
            l: 4,
            t: 4,
            ..Default::default()
        })
        .unwrap()
    }

    fn random_theta(n: usize, seed: u64, width: f64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-width..width)).collect()
    }

    #[test]
    fn cold_field_forces() {
        let mut m = model4();
        let theta = vec![0.0; m.dim()];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        m.refresh(&theta, &mut rng).unwrap();
        let mut gf = vec![1.0; m.dim()];
        m.gauge_force(&theta, &mut gf);
        assert!(gf.iter().all(|x| *x == 0.0));
        let g = m.gradient_vec(&theta).unwrap();
        assert!(g.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn total_force_matches_finite_differences() {
        let mut m = model4();
        m.params.cg_tol_md = 1e-12;
        let theta = random_theta(m.dim(), 2, PI);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        m.refresh(&theta, &mut rng).unwrap();
        let g = m.gradient_vec(&theta).unwrap();
        let scale = g.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        let mut x = theta.clone();
        for i in 0..m.dim() {
            let h = 1e-5;
            x[i] = theta[i] + h;
            let vp = m.potential(&x).unwrap();
            x[i] = theta[i] - h;
            let vm = m.potential(&x).unwrap();
            x[i] = theta[i];
            let fd = (vp - vm) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-6 * scale, "link {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn force_is_even_in_eta() {
        let mut m = model4();
        let theta = random_theta(m.dim(), 4, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        m.refresh(&theta, &mut rng).unwrap();
        let a = m.gradient_vec(&theta).unwrap();
        m.eta.iter_mut().for_each(|z| *z = -*z);
        let b = m.gradient_vec(&theta).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn heatbath_scaling_and_determinism() {
        let m = model4();
        let theta = random_theta(m.dim(), 6, PI);
        let mut r1 = ChaCha8Rng::seed_from_u64(9);
        let mut r2 = ChaCha8Rng::seed_from_u64(9);
        let e1 = m.pseudofermion_heatbath(&theta, &mut r1);
        let e2 = m.pseudofermion_heatbath(&theta, &mut r2);
        assert_eq!(e1, e2);
        let s1 = m.fermion_action(&theta, &e1).unwrap();
        let e2: Spinor = e1.iter().map(|z| 2.0 * z).collect();
        let s2 = m.fermion_action(&theta, &e2).unwrap();
        assert!((s2 - 4.0 * s1).abs() < 1e-9 * s2);
    }

    #[test]
    fn gauge_file_round_trip() {
        let m = model4();
        let theta = random_theta(m.dim(), 7, 50.0);
        let header = GaugeHeader { l: 4, t: 4, beta: 1.0, m0: 0.352443, seed: 42, trajectory: 17 };
        let mut buf = Vec::new();
        save_gauge(&mut buf, &header, &theta).unwrap();
        let (h2, t2) = load_gauge(buf.as_slice()).unwrap();
        assert_eq!(h2, header);
        assert_eq!(t2.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), theta.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        assert!(load_gauge("site,mu,theta\n".as_bytes()).is_err());
        assert!(save_gauge(Vec::new(), &GaugeHeader { l: 2, ..header }, &theta).is_err());
    }
}
