//! Empirical checks: convergence order and long-time energy behaviour.

use serde::Serialize;

use crate::engine::{integrate, StepMode, Stepper};
use crate::error::{Error, Result};
use crate::geometry::{drift, kick, PhasePoint};
use crate::model::Model;
use crate::scheme::Scheme;
use crate::stats;

/// Reference solution for global-error measurements.
#[derive(Debug, Clone)]
pub enum Reference {
    /// Richardson extrapolation of the same scheme at `h_min/4` and `h_min/8`
    /// using the scheme's claimed order.
    Richardson,
    Given(PhasePoint),
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderMeasurement {
    pub scheme: String,
    pub slope: f64,
    /// `(h, global error)` with the error in the joint ∞-norm.
    pub errors: Vec<(f64, f64)>,
    /// False if the error does not decrease strictly with `h`.
    pub monotone: bool,
}

fn steps_for(t_end: f64, h: f64) -> Result<usize> {
    let n = (t_end / h).round();
    if !(n >= 1.0) || ((n * h - t_end).abs() > 1e-9 * t_end.abs()) {
        return Err(Error::invalid(format!("t_end = {t_end} is not a multiple of h = {h}")));
    }
    Ok(n as usize)
}

/// State at `t_end` reached with step `h`.
pub fn solve<M: Model + ?Sized>(
    scheme: &Scheme,
    model: &M,
    state0: &PhasePoint,
    t_end: f64,
    h: f64,
    mode: StepMode,
) -> Result<PhasePoint> {
    Ok(integrate(scheme, model, state0, h, steps_for(t_end, h)?, mode)?.0)
}

/// Richardson-extrapolated solution from steps `h` and `h/2`.
pub fn richardson<M: Model + ?Sized>(
    scheme: &Scheme,
    model: &M,
    state0: &PhasePoint,
    t_end: f64,
    h: f64,
    order: u32,
    mode: StepMode,
) -> Result<PhasePoint> {
    let coarse = solve(scheme, model, state0, t_end, h, mode)?;
    let fine = solve(scheme, model, state0, t_end, h / 2.0, mode)?;
    let w = 2f64.powi(order as i32);
    let ex = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(f, c)| (w * f - c) / (w - 1.0)).collect() };
    Ok(PhasePoint {
        q: ex(&fine.q, &coarse.q),
        p: ex(&fine.p, &coarse.p),
    })
}

/// Least-squares slope of `log(error)` against `log h`.
pub fn measure_order<M: Model + ?Sized>(
    scheme: &Scheme,
    model: &M,
    state0: &PhasePoint,
    t_end: f64,
    h_list: &[f64],
    mode: StepMode,
    reference: &Reference,
) -> Result<OrderMeasurement> {
    if h_list.len() < 3 {
        return Err(Error::invalid("measure_order needs at least three step sizes"));
    }
    let reference = match reference {
        Reference::Given(x) => x.clone(),
        Reference::Richardson => {
            let h_min = h_list.iter().copied().fold(f64::INFINITY, f64::min);
            let p = scheme
                .order
                .ok_or_else(|| Error::invalid("Richardson reference needs a claimed order"))?;
            richardson(scheme, model, state0, t_end, h_min / 4.0, p, mode)?
        }
    };
    let mut errors = Vec::with_capacity(h_list.len());
    for &h in h_list {
        let y = solve(scheme, model, state0, t_end, h, mode)?;
        errors.push((h, y.max_distance(&reference)));
    }
    let mut sorted = errors.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let monotone = sorted.windows(2).all(|w| w[0].1 < w[1].1);
    let x: Vec<f64> = errors.iter().map(|e| e.0.ln()).collect();
    let y: Vec<f64> = errors.iter().map(|e| e.1.ln()).collect();
    let slope = stats::linear_fit(&x, &y)?.slope;
    Ok(OrderMeasurement {
        scheme: scheme.name.clone(),
        slope,
        errors,
        monotone,
    })
}

/// One point of a work-precision curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WorkPoint {
    pub n_steps: usize,
    pub total_force_evals: u64,
    pub global_error: f64,
}

/// Global error at `t_end` against `reference` and the force evaluations
/// spent, for each step count in `n_steps`.
pub fn work_precision<M: Model + ?Sized>(
    scheme: &Scheme,
    model: &M,
    state0: &PhasePoint,
    t_end: f64,
    n_steps: &[usize],
    mode: StepMode,
    reference: &PhasePoint,
) -> Result<Vec<WorkPoint>> {
    n_steps
        .iter()
        .map(|&n| {
            if n == 0 {
                return Err(Error::invalid("step count must be >= 1"));
            }
            let (y, c) = integrate(scheme, model, state0, t_end / n as f64, n, mode)?;
            Ok(WorkPoint {
                n_steps: n,
                total_force_evals: c.cost(),
                global_error: y.max_distance(reference),
            })
        })
        .collect()
}

/// Error of a work-precision curve at `work` force evaluations, by linear
/// interpolation in log-log coordinates. `None` outside the sampled range.
pub fn error_at_work(curve: &[WorkPoint], work: f64) -> Option<f64> {
    let mut pts: Vec<(f64, f64)> = curve
        .iter()
        .map(|p| ((p.total_force_evals as f64).ln(), p.global_error.ln()))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let w = work.ln();
    pts.windows(2).find(|s| s[0].0 <= w && w <= s[1].0).map(|s| {
        let t = (w - s[0].0) / (s[1].0 - s[0].0);
        (s[0].1 + t * (s[1].1 - s[0].1)).exp()
    })
}

/// Smallest `error(other) / error(better)` at equal work over the points of
/// `better` with error at most `max_error`. `None` if the curves do not
/// overlap there.
pub fn min_error_ratio(better: &[WorkPoint], other: &[WorkPoint], max_error: f64) -> Option<f64> {
    better
        .iter()
        .filter(|p| p.global_error <= max_error)
        .filter_map(|p| error_at_work(other, p.total_force_evals as f64).map(|e| e / p.global_error))
        .reduce(f64::min)
}

#[derive(Debug, Clone, Serialize)]
pub struct DriftReport {
    /// `(t, (H(t) − H(0)) / |H(0)|)`.
    pub series: Vec<(f64, f64)>,
    /// Robust (Theil–Sen) slope per unit time.
    pub slope: f64,
    /// OLS slope and its standard error, for reference.
    pub ols_slope: f64,
    pub ols_slope_se: f64,
    /// Peak-to-peak amplitude of the detrended series.
    pub amplitude: f64,
    /// `|slope| · T`.
    pub drift_over_run: f64,
}

impl DriftReport {
    /// No visible drift: the accumulated trend stays below the oscillation.
    pub fn no_visible_drift(&self) -> bool {
        self.drift_over_run < self.amplitude
    }
}

/// Largest number of samples entering the `O(n²)` Theil–Sen fit.
const MAX_FIT_SAMPLES: usize = 2000;

fn drift_report(series: Vec<(f64, f64)>) -> Result<DriftReport> {
    let stride = series.len().div_ceil(MAX_FIT_SAMPLES).max(1);
    let (t, e): (Vec<f64>, Vec<f64>) = series.iter().step_by(stride).copied().unzip();
    let slope = stats::theil_sen(&t, &e)?;
    let ols = stats::linear_fit(&t, &e)?;
    let detr = series.iter().map(|(t, e)| e - slope * t);
    let (lo, hi) = detr.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let span = series.last().map(|s| s.0).unwrap_or(0.0) - series.first().map(|s| s.0).unwrap_or(0.0);
    Ok(DriftReport {
        series,
        slope,
        ols_slope: ols.slope,
        ols_slope_se: ols.slope_se,
        amplitude: hi - lo,
        drift_over_run: slope.abs() * span,
    })
}

/// Relative energy error sampled every `every` steps up to `t_end`.
pub fn energy_drift<M: Model + ?Sized>(
    scheme: &Scheme,
    model: &M,
    state0: &PhasePoint,
    h: f64,
    t_end: f64,
    mode: StepMode,
    every: usize,
) -> Result<DriftReport> {
    let n = steps_for(t_end, h)?;
    let every = every.max(1);
    let mut st = Stepper::new(scheme, model, state0.clone(), h, mode)?;
    energy_series(model, state0, n, every, h, |_| {
        st.run(every)?;
        Ok(st.state().clone())
    })
}

fn energy_series<M, F>(model: &M, state0: &PhasePoint, n: usize, every: usize, h: f64, mut advance: F) -> Result<DriftReport>
where
    M: Model + ?Sized,
    F: FnMut(usize) -> Result<PhasePoint>,
{
    let h0 = model.hamiltonian(&state0.q, &state0.p)?;
    let mut series = vec![(0.0, 0.0)];
    let mut done = 0;
    while done + every <= n {
        let x = advance(every)?;
        done += every;
        let e = model.hamiltonian(&x.q, &x.p)?;
        series.push((done as f64 * h, (e - h0) / h0.abs()));
    }
    drift_report(series)
}

/// Energy drift of an arbitrary one-step map.
pub fn energy_drift_map<M, F>(model: &M, state0: &PhasePoint, h: f64, n_steps: usize, every: usize, mut map: F) -> Result<DriftReport>
where
    M: Model + ?Sized,
    F: FnMut(&mut PhasePoint) -> Result<()>,
{
    let mut x = state0.clone();
    energy_series(model, state0, n_steps, every.max(1), h, |k| {
        for _ in 0..k {
            map(&mut x)?;
        }
        Ok(x.clone())
    })
}

/// Explicit Euler: both updates use the old state. Neither symplectic nor
/// reversible; the drift control case.
pub fn explicit_euler_step<M: Model + ?Sized>(model: &M, x: &mut PhasePoint, h: f64) -> Result<()> {
    let g = model.gradient_vec(&x.q)?;
    drift(x, model.metric(), h)?;
    kick(x, &g, h)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::lookup;
    use crate::models::toy::{AnharmonicChain, Harmonic};

    #[test]
    fn leapfrog_is_second_order_on_oscillator() {
        let m = Harmonic::new(1);
        let x0 = PhasePoint::new(vec![1.0], vec![0.0]).unwrap();
        let exact = PhasePoint::new(vec![2f64.cos()], vec![-(2f64.sin())]).unwrap();
        let r = measure_order(
            lookup("BAB").unwrap(),
            &m,
            &x0,
            2.0,
            &[0.1, 0.05, 0.025],
            StepMode::HessianFree,
            &Reference::Given(exact),
        )
        .unwrap();
        assert!((r.slope - 2.0).abs() < 0.05, "{}", r.slope);
        assert!(r.monotone);
    }

    #[test]
    fn richardson_reference_gives_fourth_order() {
        let m = AnharmonicChain::new(vec![1.0, 2.0]).unwrap();
        let x0 = PhasePoint::new(vec![0.8, -0.3], vec![0.1, 0.4]).unwrap();
        let r = measure_order(
            lookup("BADAB").unwrap(),
            &m,
            &x0,
            4.0,
            &[0.2, 0.1, 0.05],
            StepMode::HessianFree,
            &Reference::Richardson,
        )
        .unwrap();
        assert!((r.slope - 4.0).abs() < 0.15, "{}", r.slope);
    }

    #[test]
    fn bad_grids_are_rejected() {
        let m = Harmonic::new(1);
        let x0 = PhasePoint::new(vec![1.0], vec![0.0]).unwrap();
        let s = lookup("BAB").unwrap();
        assert!(measure_order(s, &m, &x0, 1.0, &[0.1, 0.05], StepMode::HessianFree, &Reference::Richardson).is_err());
        assert!(measure_order(s, &m, &x0, 1.0, &[0.3, 0.1, 0.05], StepMode::HessianFree, &Reference::Richardson).is_err());
    }

    #[test]
    fn work_interpolation() {
        let wp = |w: u64, e: f64| WorkPoint {
            n_steps: 0,
            total_force_evals: w,
            global_error: e,
        };
        let a = [wp(100, 1e-2), wp(1000, 1e-6)];
        assert!((error_at_work(&a, 316.22776601683796).unwrap() - 1e-4).abs() < 1e-15);
        assert!(error_at_work(&a, 50.0).is_none());
        let b = [wp(100, 1e-3), wp(1000, 1e-7)];
        assert!((min_error_ratio(&b, &a, 1e-3).unwrap() - 10.0).abs() < 1e-9);
        assert!(min_error_ratio(&b, &a, 1e-9).is_none());
    }

    #[test]
    fn symplectic_bounded_euler_drifts() {
        let m = Harmonic::new(1);
        let x0 = PhasePoint::new(vec![1.0], vec![0.0]).unwrap();
        let r = energy_drift(lookup("BAB").unwrap(), &m, &x0, 0.1, 200.0, StepMode::HessianFree, 5).unwrap();
        assert!(r.no_visible_drift(), "{r:?}");
        let e = energy_drift_map(&m, &x0, 0.01, 20_000, 10, |x| explicit_euler_step(&m, x, 0.01)).unwrap();
        assert!(e.slope > 0.0 && !e.no_visible_drift());
    }
}
