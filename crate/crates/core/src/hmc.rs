//! Hybrid Monte Carlo driver and the acceptance/cost statistics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::Write;
use std::time::Instant;

use crate::engine::{StepMode, Stepper};
use crate::error::{Error, Result};
use crate::geometry::{kinetic_energy, PhasePoint};
use crate::model::HmcModel;
use crate::scheme::{count_forces, Scheme};
use crate::stats;

/// Minimum block length (trajectories) for jackknife errors.
pub const MIN_BLOCK: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmcConfig {
    pub tau: f64,
    pub n_steps: usize,
    pub mode: StepMode,
    pub n_traj: usize,
    /// Discarded trajectories; `None` means 10% of `n_traj`.
    pub n_therm: Option<usize>,
    pub seed: u64,
}

impl HmcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::invalid("tau must be positive"));
        }
        if self.n_steps < 1 {
            return Err(Error::invalid("n_steps must be >= 1"));
        }
        Ok(())
    }

    pub fn h(&self) -> f64 {
        self.tau / self.n_steps as f64
    }

    pub fn thermalization(&self) -> usize {
        self.n_therm.unwrap_or(self.n_traj / 10).min(self.n_traj)
    }
}

/// One trajectory's record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub traj: usize,
    #[serde(rename = "dH")]
    pub dh: f64,
    pub accepted: bool,
    pub plaquette: f64,
    pub force_evals: u64,
    pub seconds: f64,
}

/// Momentum and auxiliary-field heatbath, `N` steps of size `τ/N`,
/// Metropolis. On rejection `q` is left untouched.
pub fn run_trajectory<M, R>(
    model: &mut M,
    scheme: &Scheme,
    config: &HmcConfig,
    q: &mut Vec<f64>,
    rng: &mut R,
) -> Result<(f64, bool, u64)>
where
    M: HmcModel,
    R: Rng + ?Sized,
{
    config.validate()?;
    let p = model.metric().sample_momentum(rng);
    model.refresh(q, rng)?;
    let x0 = PhasePoint { q: q.clone(), p };
    let h0 = kinetic_energy(&x0, model.metric())? + model.accept_potential(&x0.q)?;
    let (x1, cost) = {
        let mut st = Stepper::new(scheme, &*model, x0, config.h(), config.mode)?;
        st.run(config.n_steps)?;
        let c = st.counter().cost();
        (st.into_state(), c)
    };
    let h1 = kinetic_energy(&x1, model.metric())? + model.accept_potential(&x1.q)?;
    let dh = h1 - h0;
    let u: f64 = rng.gen();
    let accepted = dh.is_finite() && u < (-dh).exp();
    if accepted {
        *q = x1.q;
    }
    Ok((dh, accepted, cost))
}

/// Chain summary after discarding thermalization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryStats {
    pub n_used: usize,
    pub mean_dh: f64,
    pub sigma2: f64,
    pub sigma2_err: f64,
    pub acceptance: f64,
    pub acceptance_err: f64,
    /// `⟨exp(−ΔH)⟩` and its error.
    pub exp_mdh: f64,
    pub exp_mdh_err: f64,
    pub plaquette: f64,
    pub plaquette_err: f64,
    pub force_evals_per_traj: f64,
}

impl TrajectoryStats {
    pub fn from_records(records: &[TrajectoryRecord]) -> Result<Self> {
        let n = records.len();
        let block = MIN_BLOCK.max(n / 20);
        let dh: Vec<f64> = records.iter().map(|r| r.dh).collect();
        let acc: Vec<f64> = records.iter().map(|r| f64::from(u8::from(r.accepted))).collect();
        let emdh: Vec<f64> = dh.iter().map(|d| (-d).exp()).collect();
        let plaq: Vec<f64> = records.iter().map(|r| r.plaquette).collect();
        let (sigma2, sigma2_err) = stats::jackknife(&dh, block, stats::variance)?;
        let (acceptance, acceptance_err) = stats::jackknife(&acc, block, stats::mean)?;
        let (exp_mdh, exp_mdh_err) = stats::jackknife(&emdh, block, stats::mean)?;
        let (plaquette, plaquette_err) = stats::jackknife(&plaq, block, stats::mean)?;
        Ok(Self {
            n_used: n,
            mean_dh: stats::mean(&dh),
            sigma2,
            sigma2_err,
            acceptance,
            acceptance_err,
            exp_mdh,
            exp_mdh_err,
            plaquette,
            plaquette_err,
            force_evals_per_traj: records.iter().map(|r| r.force_evals as f64).sum::<f64>() / n as f64,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainResult {
    pub records: Vec<TrajectoryRecord>,
    pub stats: TrajectoryStats,
    pub final_q: Vec<f64>,
}

/// Runs `n_traj` trajectories from `q0` with an RNG seeded by `config.seed`.
pub fn run_chain<M: HmcModel>(model: &mut M, scheme: &Scheme, config: &HmcConfig, q0: &[f64]) -> Result<ChainResult> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut q = q0.to_vec();
    let mut records = Vec::with_capacity(config.n_traj);
    for traj in 0..config.n_traj {
        let t0 = Instant::now();
        let (dh, accepted, cost) = run_trajectory(model, scheme, config, &mut q, &mut rng)?;
        records.push(TrajectoryRecord {
            traj,
            dh,
            accepted,
            plaquette: model.observable(&q),
            force_evals: cost,
            seconds: t0.elapsed().as_secs_f64(),
        });
    }
    let stats = TrajectoryStats::from_records(&records[config.thermalization()..])?;
    Ok(ChainResult {
        records,
        stats,
        final_q: q,
    })
}

/// Writes the chain log (`traj,dH,accepted,plaquette,force_evals,seconds`).
pub fn write_chain_log<W: Write>(records: &[TrajectoryRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Seed of the chain for `(master, scheme, N)`.
pub fn derive_seed(master: u64, scheme: &str, n_steps: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(scheme.as_bytes());
    h.update((n_steps as u64).to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

/// `erfc(√(σ²/8))`: acceptance for log-normally distributed `ΔH`.
pub fn acceptance_erfc(sigma2: f64) -> f64 {
    stats::erfc((sigma2.max(0.0) / 8.0).sqrt())
}

/// `exp(−1/p)`.
pub fn optimal_acceptance(p: u32) -> f64 {
    (-1.0 / p as f64).exp()
}

/// `σ²` at which the erfc model gives acceptance `target`.
pub fn sigma2_at_acceptance(target: f64) -> f64 {
    8.0 * stats::erfc_inv(target).powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NfFit {
    /// `log σ² = a − b log N`.
    pub a: f64,
    pub b: f64,
    pub n_star: f64,
    pub nf_per_unit: f64,
}

/// Force evaluations per unit trajectory length needed to reach the target
/// acceptance, from a power-law fit of `σ²(N)`.
pub fn nf_per_unit_at_target(scan: &[(usize, f64)], n_f: usize, tau: f64, target: f64) -> Result<NfFit> {
    if scan.len() < 3 {
        return Err(Error::invalid("need at least three scan points"));
    }
    let mut pts = scan.to_vec();
    pts.sort_by_key(|p| p.0);
    if pts.iter().any(|p| !(p.1 > 0.0)) || pts.windows(2).any(|w| w[1].1 >= w[0].1) {
        return Err(Error::invalid("sigma^2 must be positive and decreasing in N"));
    }
    let x: Vec<f64> = pts.iter().map(|p| (p.0 as f64).ln()).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let fit = stats::linear_fit(&x, &y)?;
    let (a, b) = (fit.intercept, -fit.slope);
    let n_star = ((a - sigma2_at_acceptance(target).ln()) / b).exp();
    Ok(NfFit {
        a,
        b,
        n_star,
        nf_per_unit: n_f as f64 * n_star / tau,
    })
}

/// `n_f·N / (P_acc·τ)`.
pub fn cost_metric(n_f_times_n: f64, p_acc: f64, tau: f64) -> Result<f64> {
    if !(p_acc > 0.0 && p_acc <= 1.0) {
        return Err(Error::invalid("acceptance must lie in (0, 1]"));
    }
    if !(tau > 0.0) {
        return Err(Error::invalid("tau must be positive"));
    }
    Ok(n_f_times_n / (p_acc * tau))
}

/// One `(scheme, N)` point of an acceptance scan.
#[derive(Debug, Clone, Serialize)]
pub struct ScanPoint {
    pub scheme: String,
    #[serde(rename = "N")]
    pub n_steps: usize,
    pub sigma2: f64,
    pub sigma2_err: f64,
    pub acc: f64,
    pub acc_err: f64,
    pub nf_per_unit_at_90: f64,
}

/// Builds scan rows for one scheme and fills `nf_per_unit_at_90` from the
/// fit when possible (NaN otherwise).
pub fn scan_rows(scheme: &Scheme, tau: f64, points: &[(usize, TrajectoryStats)]) -> Vec<ScanPoint> {
    let pairs: Vec<(usize, f64)> = points.iter().map(|(n, s)| (*n, s.sigma2)).collect();
    let nf90 = nf_per_unit_at_target(&pairs, count_forces(scheme), tau, 0.9)
        .map(|f| f.nf_per_unit)
        .unwrap_or(f64::NAN);
    points
        .iter()
        .map(|(n, s)| ScanPoint {
            scheme: scheme.name.clone(),
            n_steps: *n,
            sigma2: s.sigma2,
            sigma2_err: s.sigma2_err,
            acc: s.acceptance,
            acc_err: s.acceptance_err,
            nf_per_unit_at_90: nf90,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::lookup;
    use crate::models::schwinger::{Schwinger, SchwingerParams};
    use crate::models::toy::Harmonic;

    #[test]
    fn acceptance_model_examples() {
        assert_eq!(acceptance_erfc(0.0), 1.0);
        assert!((optimal_acceptance(4) - 0.7788).abs() < 1e-4);
        assert!((optimal_acceptance(2) - 0.61).abs() < 0.005);
        assert!((sigma2_at_acceptance(0.9) - 0.0632).abs() < 1e-4);
        assert!((acceptance_erfc(sigma2_at_acceptance(0.9)) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn cost_examples() {
        assert!((cost_metric(40.0, 0.923, 2.0).unwrap() - 21.67).abs() < 0.005);
        assert!((cost_metric(50.0, 0.975, 2.0).unwrap() - 25.64).abs() < 0.005);
        assert_eq!(cost_metric(2.0, 1.0, 2.0).unwrap(), 1.0);
        assert!(cost_metric(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn power_law_inversion_is_exact() {
        let (c, p) = (40.0, 4);
        let scan: Vec<(usize, f64)> = [10, 14, 20, 28].iter().map(|&n| (n, c * (n as f64).powi(-2 * p))).collect();
        let fit = nf_per_unit_at_target(&scan, 3, 1.0, 0.9).unwrap();
        let n_star = (c / sigma2_at_acceptance(0.9)).powf(1.0 / (2 * p) as f64);
        assert!((fit.b - 8.0).abs() < 1e-12);
        assert!((fit.n_star - n_star).abs() / n_star < 1e-10);
        assert!((fit.nf_per_unit - 3.0 * n_star).abs() / n_star < 1e-10);
        assert!(nf_per_unit_at_target(&scan[..2], 3, 1.0, 0.9).is_err());
        let bad = vec![(10, 0.1), (20, 0.2), (30, 0.05)];
        assert!(nf_per_unit_at_target(&bad, 3, 1.0, 0.9).is_err());
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        assert_eq!(derive_seed(1, "BAB", 10), derive_seed(1, "BAB", 10));
        assert_ne!(derive_seed(1, "BAB", 10), derive_seed(1, "BAB", 11));
        assert_ne!(derive_seed(1, "BAB", 10), derive_seed(1, "ABA", 10));
        assert_ne!(derive_seed(1, "BAB", 10), derive_seed(2, "BAB", 10));
    }

    #[test]
    fn fine_steps_accept_everything() {
        let mut m = Harmonic::new(4);
        let s = lookup("BADAB").unwrap();
        let cfg = HmcConfig { tau: 1.0, n_steps: 200, mode: StepMode::HessianFree, n_traj: 40, n_therm: Some(0), seed: 3 };
        let res = run_chain(&mut m, s, &cfg, &[0.0; 4]).unwrap();
        assert!(res.records.iter().all(|r| r.accepted && r.dh.abs() < 1e-8));
        assert_eq!(res.stats.acceptance, 1.0);
    }

    #[test]
    fn chains_are_deterministic() {
        let mut m = Schwinger::new(SchwingerParams { l: 4, t: 4, ..Default::default() }).unwrap();
        let s = lookup("BADAB").unwrap();
        let cfg = HmcConfig { tau: 0.5, n_steps: 4, mode: StepMode::HessianFree, n_traj: 22, n_therm: Some(0), seed: 17 };
        let q0 = vec![0.0; m.lattice.n_links()];
        let a = run_chain(&mut m, s, &cfg, &q0).unwrap();
        let b = run_chain(&mut m, s, &cfg, &q0).unwrap();
        let bits = |r: &ChainResult| r.records.iter().map(|x| (x.dh.to_bits(), x.accepted)).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_eq!(a.final_q, b.final_q);
        assert!(a.stats.acceptance > 0.0);
        let mut buf = Vec::new();
        write_chain_log(&a.records, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("traj,dH,accepted,plaquette,force_evals,seconds"));
        assert_eq!(text.lines().count(), 23);
    }

    #[test]
    fn rejection_restores_configuration() {
        let mut m = Harmonic::new(3);
        let s = lookup("BAB").unwrap();
        // h = 3 is beyond the leapfrog stability limit: energy explodes.
        let cfg = HmcConfig { tau: 30.0, n_steps: 10, mode: StepMode::HessianFree, n_traj: 1, n_therm: Some(0), seed: 1 };
        let mut q = vec![0.5, -0.2, 0.1];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (dh, acc, _) = run_trajectory(&mut m, s, &cfg, &mut q, &mut rng).unwrap();
        assert!(dh > 100.0 && !acc);
        assert_eq!(q, vec![0.5, -0.2, 0.1]);
    }
}
