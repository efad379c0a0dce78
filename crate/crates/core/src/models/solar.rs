//! Gravitational N-body problem, with the outer solar system as default data.
//!
//! Units: AU, days, solar masses. Coordinates are stored body-major as
//! `[x0, y0, z0, x1, …]`; momenta are `p_i = m_i v_i`.

use serde::{Deserialize, Serialize};
use std::io::Read;

use crate::error::{Error, Result};
use crate::geometry::{MassMetric, PhasePoint};
use crate::model::Model;

/// Gravitational constant in AU³ / (solar mass · day²).
pub const G_AU_DAY: f64 = 2.95912208286e-4;

/// One body of the initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Body {
    pub body: String,
    pub mass: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
}

/// Outer solar system on 5 September 1994, 0h. The sun's mass includes the
/// inner planets. Positions in AU, velocities in AU/day.
pub fn outer_solar_bodies() -> Vec<Body> {
    let b = |name: &str, mass, x, y, z, vx, vy, vz| Body {
        body: name.to_string(),
        mass,
        x,
        y,
        z,
        vx,
        vy,
        vz,
    };
    vec![
        b("sun", 1.00000597682, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0),
        b(
            "jupiter",
            0.000954786104043,
            -3.5023653,
            -3.8169847,
            -1.5507963,
            0.00565429,
            -0.00412490,
            -0.00190589,
        ),
        b(
            "saturn",
            0.000285583733151,
            9.0755314,
            -3.0458353,
            -1.6483708,
            0.00168318,
            0.00483525,
            0.00192462,
        ),
        b(
            "uranus",
            0.0000437273164546,
            8.3101420,
            -16.2901086,
            -7.2521278,
            0.00354178,
            0.00137102,
            0.00055029,
        ),
        b(
            "neptune",
            0.0000517759138449,
            11.4707666,
            -25.7294829,
            -10.8169456,
            0.00288930,
            0.00114527,
            0.00039677,
        ),
        b(
            "pluto",
            1.0 / 1.3e8,
            -15.5387357,
            -25.2225594,
            -3.1902382,
            0.00276725,
            -0.00170702,
            -0.00136504,
        ),
    ]
}

#[derive(Debug, Clone)]
pub struct NBody {
    pub g: f64,
    pub masses: Vec<f64>,
    pub names: Vec<String>,
    metric: MassMetric,
}

impl NBody {
    pub fn new(g: f64, masses: Vec<f64>, names: Vec<String>) -> Result<Self> {
        if masses.is_empty() || masses.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(Error::Model("masses must be positive".into()));
        }
        let metric = MassMetric::diagonal(masses.iter().flat_map(|&m| [m; 3]).collect())?;
        Ok(Self {
            g,
            masses,
            names,
            metric,
        })
    }

    /// Model and initial phase point from a body list.
    pub fn from_bodies(g: f64, bodies: &[Body]) -> Result<(Self, PhasePoint)> {
        let model = Self::new(
            g,
            bodies.iter().map(|b| b.mass).collect(),
            bodies.iter().map(|b| b.body.clone()).collect(),
        )?;
        let q = bodies.iter().flat_map(|b| [b.x, b.y, b.z]).collect();
        let p = bodies
            .iter()
            .flat_map(|b| [b.mass * b.vx, b.mass * b.vy, b.mass * b.vz])
            .collect();
        Ok((model, PhasePoint::new(q, p)?))
    }

    /// Reads `body,mass,x,y,z,vx,vy,vz` records.
    pub fn from_csv<R: Read>(g: f64, reader: R) -> Result<(Self, PhasePoint)> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let bodies: Vec<Body> = rdr.deserialize().collect::<std::result::Result<_, _>>()?;
        Self::from_bodies(g, &bodies)
    }

    pub fn n_bodies(&self) -> usize {
        self.masses.len()
    }

    fn pair(&self, q: &[f64], i: usize, j: usize) -> Result<([f64; 3], f64)> {
        let d = [q[3 * i] - q[3 * j], q[3 * i + 1] - q[3 * j + 1], q[3 * i + 2] - q[3 * j + 2]];
        let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
        if !(r2 > 0.0) {
            return Err(Error::Singular(i, j));
        }
        Ok((d, r2))
    }

    /// Total linear momentum.
    pub fn total_momentum(&self, p: &[f64]) -> [f64; 3] {
        let mut t = [0.0; 3];
        for pi in p.chunks_exact(3) {
            for k in 0..3 {
                t[k] += pi[k];
            }
        }
        t
    }
}

/// Outer solar system model and its initial state.
pub fn default_initial_data() -> (NBody, PhasePoint) {
    NBody::from_bodies(G_AU_DAY, &outer_solar_bodies()).expect("embedded data is valid")
}

impl Model for NBody {
    fn dim(&self) -> usize {
        3 * self.masses.len()
    }

    fn metric(&self) -> &MassMetric {
        &self.metric
    }

    fn potential(&self, q: &[f64]) -> Result<f64> {
        let n = self.n_bodies();
        let mut v = 0.0;
        for i in 1..n {
            for j in 0..i {
                let (_, r2) = self.pair(q, i, j)?;
                v -= self.g * self.masses[i] * self.masses[j] / r2.sqrt();
            }
        }
        Ok(v)
    }

    fn gradient(&self, q: &[f64], out: &mut [f64]) -> Result<()> {
        out.iter_mut().for_each(|o| *o = 0.0);
        let n = self.n_bodies();
        for i in 1..n {
            for j in 0..i {
                let (d, r2) = self.pair(q, i, j)?;
                let k = self.g * self.masses[i] * self.masses[j] / (r2 * r2.sqrt());
                for c in 0..3 {
                    out[3 * i + c] += k * d[c];
                    out[3 * j + c] -= k * d[c];
                }
            }
        }
        Ok(())
    }

    fn has_fg_term(&self) -> bool {
        true
    }

    /// `2·H·w`, `w = M⁻¹∇V`, assembled pairwise from the 3×3 blocks
    /// `k (I/r³ − 3ddᵀ/r⁵)`.
    fn fg_term(&self, q: &[f64], out: &mut [f64]) -> Result<bool> {
        let g = self.gradient_vec(q)?;
        let w = self.metric.inverse_times(&g);
        out.iter_mut().for_each(|o| *o = 0.0);
        let n = self.n_bodies();
        for i in 1..n {
            for j in 0..i {
                let (d, r2) = self.pair(q, i, j)?;
                let k = self.g * self.masses[i] * self.masses[j];
                let r3 = r2 * r2.sqrt();
                let dw = [w[3 * i] - w[3 * j], w[3 * i + 1] - w[3 * j + 1], w[3 * i + 2] - w[3 * j + 2]];
                let ddw = d[0] * dw[0] + d[1] * dw[1] + d[2] * dw[2];
                for c in 0..3 {
                    let v = k * (dw[c] / r3 - 3.0 * d[c] * ddw / (r3 * r2));
                    out[3 * i + c] += 2.0 * v;
                    out[3 * j + c] -= 2.0 * v;
                }
            }
        }
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::lookup;
    use crate::engine::{integrate, StepMode};
    use crate::geometry::kinetic_energy;
    use crate::model::{fg_consistency, gradient_consistency};

    /// Double-double arithmetic: value `hi + lo` with |lo| ≤ ulp(hi)/2.
    #[derive(Clone, Copy)]
    struct Dd(f64, f64);

    impl Dd {
        fn from(x: f64) -> Dd {
            Dd(x, 0.0)
        }
        fn two_sum(a: f64, b: f64) -> Dd {
            let s = a + b;
            let bb = s - a;
            Dd(s, (a - (s - bb)) + (b - bb))
        }
        fn add(self, o: Dd) -> Dd {
            let s = Dd::two_sum(self.0, o.0);
            let t = s.1 + self.1 + o.1;
            Dd::two_sum(s.0, t)
        }
        fn neg(self) -> Dd {
            Dd(-self.0, -self.1)
        }
        fn mul(self, o: Dd) -> Dd {
            let p = self.0 * o.0;
            let e = self.0.mul_add(o.0, -p);
            Dd::two_sum(p, e + self.0 * o.1 + self.1 * o.0)
        }
        fn div(self, o: Dd) -> Dd {
            let q1 = self.0 / o.0;
            let r = self.add(o.mul(Dd::from(q1)).neg());
            let q2 = r.0 / o.0;
            let r = r.add(o.mul(Dd::from(q2)).neg());
            let q3 = r.0 / o.0;
            Dd::two_sum(q1, q2).add(Dd::from(q3))
        }
        fn sqrt(self) -> Dd {
            let x = self.0.sqrt();
            let xx = Dd::from(x).mul(Dd::from(x));
            let corr = self.add(xx.neg()).0 / (2.0 * x);
            Dd::two_sum(x, corr)
        }
    }

    fn energy_dd(bodies: &[Body], g: f64) -> f64 {
        let mut e = Dd::from(0.0);
        for b in bodies {
            let m = Dd::from(b.mass);
            for v in [b.vx, b.vy, b.vz] {
                let p = m.mul(Dd::from(v));
                e = e.add(p.mul(p).div(m.mul(Dd::from(2.0))));
            }
        }
        for i in 0..bodies.len() {
            for j in 0..i {
                let (a, b) = (&bodies[i], &bodies[j]);
                let mut r2 = Dd::from(0.0);
                for (x, y) in [(a.x, b.x), (a.y, b.y), (a.z, b.z)] {
                    let d = Dd::from(x).add(Dd::from(y).neg());
                    r2 = r2.add(d.mul(d));
                }
                let k = Dd::from(g).mul(Dd::from(a.mass)).mul(Dd::from(b.mass));
                e = e.add(k.div(r2.sqrt()).neg());
            }
        }
        e.0 + e.1
    }

    #[test]
    fn two_unit_masses() {
        let m = NBody::new(1.0, vec![1.0, 1.0], vec!["a".into(), "b".into()]).unwrap();
        let q = [0.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        assert_eq!(m.potential(&q).unwrap(), -1.0);
        let g = m.gradient_vec(&q).unwrap();
        assert_eq!(g, vec![-1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let mut fg = vec![0.0; 6];
        m.fg_term(&q, &mut fg).unwrap();
        assert!(fg[1] == 0.0 && fg[2] == 0.0 && fg[4] == 0.0 && fg[5] == 0.0);
        assert!(fg[0] != 0.0);
        let coincident = [0.0; 6];
        assert!(matches!(m.potential(&coincident), Err(Error::Singular(1, 0))));
    }

    #[test]
    fn energy_matches_extended_precision_oracle() {
        let (m, x) = default_initial_data();
        let h = m.hamiltonian(&x.q, &x.p).unwrap();
        let oracle = energy_dd(&outer_solar_bodies(), G_AU_DAY);
        assert!(h < 0.0);
        assert!(((h - oracle) / oracle).abs() < 1e-14, "{h} vs {oracle}");
        let ke = kinetic_energy(&x, m.metric()).unwrap();
        let mut ke_oracle = Dd::from(0.0);
        for b in outer_solar_bodies() {
            for v in [b.vx, b.vy, b.vz] {
                ke_oracle = ke_oracle.add(Dd::from(0.5 * b.mass).mul(Dd::from(v)).mul(Dd::from(v)));
            }
        }
        assert!(((ke - ke_oracle.0) / ke_oracle.0).abs() < 1e-14);
    }

    #[test]
    fn translation_invariance_and_force_balance() {
        let (m, x) = default_initial_data();
        let shifted: Vec<f64> = x.q.iter().enumerate().map(|(i, q)| q + [1.5, -2.0, 0.25][i % 3]).collect();
        let (v0, v1) = (m.potential(&x.q).unwrap(), m.potential(&shifted).unwrap());
        assert!(((v0 - v1) / v0).abs() < 1e-14);
        let g = m.gradient_vec(&x.q).unwrap();
        let total = m.total_momentum(&g);
        let scale = g.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        assert!(total.iter().all(|t| t.abs() < 1e-14 * scale));
    }

    #[test]
    fn gradient_and_fg_consistency() {
        let (m, x) = default_initial_data();
        assert!(gradient_consistency(&m, &[x.q.clone()], 0.0).unwrap() < 1e-7);
        assert!(fg_consistency(&m, &[x.q.clone()]).unwrap().unwrap() < 1e-5);
    }

    #[test]
    fn fg_term_scales_quadratically_in_g() {
        let (m, x) = default_initial_data();
        let m2 = NBody::new(2.0 * m.g, m.masses.clone(), m.names.clone()).unwrap();
        let mut a = vec![0.0; 18];
        let mut b = vec![0.0; 18];
        m.fg_term(&x.q, &mut a).unwrap();
        m2.fg_term(&x.q, &mut b).unwrap();
        for (a, b) in a.iter().zip(&b) {
            assert!((4.0 * a - b).abs() <= 1e-14 * b.abs().max(1e-300));
        }
    }

    #[test]
    fn circular_kepler_orbit_stays_circular() {
        let (m1, m2, r) = (1.0, 1e-3, 1.0);
        let g = G_AU_DAY;
        let v = (g * (m1 + m2) / r).sqrt();
        // barycentric velocities
        let bodies = [
            Body { body: "a".into(), mass: m1, x: -r * m2 / (m1 + m2), y: 0.0, z: 0.0, vx: 0.0, vy: -v * m2 / (m1 + m2), vz: 0.0 },
            Body { body: "b".into(), mass: m2, x: r * m1 / (m1 + m2), y: 0.0, z: 0.0, vx: 0.0, vy: v * m1 / (m1 + m2), vz: 0.0 },
        ];
        let (model, x) = NBody::from_bodies(g, &bodies).unwrap();
        let period = 2.0 * std::f64::consts::PI * r / v;
        let n = 2000;
        let s = lookup("BADAB").unwrap();
        let mut y = x.clone();
        for _ in 0..10 {
            y = integrate(s, &model, &y, period / n as f64, n / 10, StepMode::HessianFree).unwrap().0;
            let d = ((y.q[3] - y.q[0]).powi(2) + (y.q[4] - y.q[1]).powi(2) + (y.q[5] - y.q[2]).powi(2)).sqrt();
            assert!((d - r).abs() < 1e-6, "radius drifted to {d}");
        }
        assert!(y.max_distance(&x) < 1e-5);
    }

    #[test]
    fn momentum_is_conserved() {
        let (m, x) = default_initial_data();
        let p0 = m.total_momentum(&x.p);
        for name in ["BAB", "ABADABADABA", "DADAD"] {
            let (y, _) = integrate(lookup(name).unwrap(), &m, &x, 200.0, 1000, StepMode::HessianFree).unwrap();
            let p1 = m.total_momentum(&y.p);
            for k in 0..3 {
                assert!((p1[k] - p0[k]).abs() < 1e-12, "{name}: {:?} vs {:?}", p1, p0);
            }
        }
    }

    #[test]
    fn csv_round_trip() {
        let mut buf = Vec::new();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            for b in outer_solar_bodies() {
                w.serialize(b).unwrap();
            }
        }
        let (m, x) = NBody::from_csv(G_AU_DAY, buf.as_slice()).unwrap();
        let (m0, x0) = default_initial_data();
        assert_eq!(x, x0);
        assert_eq!(m.masses, m0.masses);
        assert!(NBody::from_csv(G_AU_DAY, "body,mass\nsun,oops\n".as_bytes()).is_err());
    }
}
