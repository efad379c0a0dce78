//! Leading error multipliers introduced by the Hessian-free approximation,
//! error norms and the efficiency measure.
//!
//! A palindromic scheme is built from its central exponential by symmetric
//! transformations. Transformation `n` wraps the current operator with the
//! stage at distance `2n − 1` from the centre (inner) and the stage at
//! distance `2n` (outer; a zero-coefficient stage if it lies beyond the ends).
//! If the inner stage is a drift the transformation is of velocity form and
//! the ζ12/ζ13 updates use the previous γ5; otherwise it is of position form
//! and they use the updated γ5.

use num_rational::Ratio;
use num_traits::{FromPrimitive, Num, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scheme::{ExactStage, Scheme, Stage, Version};

/// Multipliers of the Hessian-free error terms together with the running
/// sums `ν = Σa`, `σ = Σb` of the completed scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HfMultipliers<T = f64> {
    pub gamma5: T,
    pub zeta11: T,
    pub zeta12: T,
    pub zeta13: T,
    pub nu_run: T,
    pub sigma_run: T,
}

/// Stage coefficients in a field `T`: `(is_drift, a or b, c)`.
type Coef<T> = (bool, T, T);

fn recursion<T>(stages: &[Coef<T>]) -> HfMultipliers<T>
where
    T: Num + Clone + FromPrimitive,
{
    let k = |x: i64| T::from_i64(x).expect("small integer");
    let m = stages.len() / 2;
    let p = stages.len().div_ceil(2);
    let (is_drift, x, cc) = stages[m].clone();
    let (mut gamma5, mut zeta11, mut zeta12, mut zeta13) = (T::zero(), T::zero(), T::zero(), T::zero());
    let (mut nu, mut sigma);
    if is_drift {
        nu = x;
        sigma = T::zero();
    } else {
        if !cc.is_zero() {
            gamma5 = k(2) * cc.clone() * cc.clone() / x.clone();
            zeta11 = k(4) * cc.clone() * cc.clone() * cc / (k(3) * x.clone() * x.clone());
        }
        nu = T::zero();
        sigma = x;
    }
    let zero_stage = |drift: bool| (drift, T::zero(), T::zero());
    for n in 1..=p / 2 {
        let inner = stages[m - (2 * n - 1)].clone();
        let outer = if 2 * n <= m {
            stages[m - 2 * n].clone()
        } else {
            zero_stage(!inner.0)
        };
        let velocity_form = inner.0;
        let (drift, kick) = if velocity_form { (inner, outer) } else { (outer, inner) };
        let a = drift.1;
        let (b, c) = (kick.1, kick.2);
        nu = nu + k(2) * a.clone();
        sigma = sigma + k(2) * b.clone();
        let gamma_prev = gamma5.clone();
        if !c.is_zero() {
            let c2 = c.clone() * c.clone();
            gamma5 = gamma5 + k(4) * c2.clone() / b.clone();
            zeta11 = zeta11
                + (k(8) * c2.clone() * c.clone() / b.clone() + k(2) * sigma.clone() * nu.clone() * c2.clone())
                    / (k(3) * b.clone());
            let nu2c2 = nu.clone() * nu.clone() * c2;
            zeta12 = zeta12 - k(2) * nu2c2.clone() / (k(3) * b.clone());
            zeta13 = zeta13 + nu2c2 / (k(3) * b.clone());
        }
        let g_used = if velocity_form { gamma_prev } else { gamma5.clone() };
        let a2g = a.clone() * a * g_used;
        zeta12 = zeta12 + a2g.clone() / k(3);
        zeta13 = zeta13 - a2g / k(6);
    }
    HfMultipliers {
        gamma5,
        zeta11,
        zeta12,
        zeta13,
        nu_run: nu,
        sigma_run: sigma,
    }
}

fn check_shape(scheme: &Scheme) -> Result<()> {
    let s = &scheme.stages;
    if s.is_empty() || s.len().is_multiple_of(2) {
        return Err(Error::scheme("stage count must be odd"));
    }
    for st in s {
        if let Stage::FgKick { b, .. } = st {
            if *b == 0.0 {
                return Err(Error::scheme("D stage with b = 0"));
            }
        }
    }
    Ok(())
}

/// Hessian-free error multipliers in double precision.
pub fn hf_multipliers(scheme: &Scheme) -> Result<HfMultipliers<f64>> {
    check_shape(scheme)?;
    let coefs: Vec<Coef<f64>> = scheme
        .stages
        .iter()
        .map(|s| match *s {
            Stage::Drift { a } => (true, a, 0.0),
            s => (false, s.b(), s.c()),
        })
        .collect();
    Ok(recursion(&coefs))
}

/// Exact multipliers for schemes carrying rational coefficients.
pub fn hf_multipliers_exact(scheme: &Scheme) -> Option<HfMultipliers<Ratio<i64>>> {
    let stages = scheme.exact.as_ref()?;
    let coefs: Vec<Coef<Ratio<i64>>> = stages
        .iter()
        .map(|s| match *s {
            ExactStage::Drift(a) => (true, a, Ratio::zero()),
            ExactStage::Kick(b, c) => (false, b, c),
        })
        .collect();
    Some(recursion(&coefs))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrNorm {
    pub order_p: u32,
    pub value: f64,
}

/// Weighted norm of the leading error multipliers of an order-`p` scheme.
///
/// * `p = 2`: `[α, β]`;
/// * `p = 4`: `[γ1, γ2, γ3, γ4, γ5]`, γ5 weighted by 1/4;
/// * `p = 6`: `[ζ1, …, ζ13]`, ζ11 and ζ12 weighted by 1/8 and ζ13 by 7/24.
pub fn err_norm(multipliers: &[f64], order_p: u32) -> Result<ErrNorm> {
    let weights: Vec<f64> = match order_p {
        2 => vec![1.0; 2],
        4 => vec![1.0, 1.0, 1.0, 1.0, 0.25],
        6 => {
            let mut w = vec![1.0; 10];
            w.extend([0.125, 0.125, 7.0 / 24.0]);
            w
        }
        _ => return Err(Error::invalid(format!("no error norm for order {order_p}"))),
    };
    if multipliers.len() != weights.len() {
        return Err(Error::invalid(format!(
            "order {order_p} needs {} multipliers, got {}",
            weights.len(),
            multipliers.len()
        )));
    }
    let value = multipliers
        .iter()
        .zip(&weights)
        .map(|(m, w)| (m * w).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(ErrNorm { order_p, value })
}

/// `1 / (n_f^p · Err)`.
pub fn efficiency(n_f: usize, order_p: u32, err: f64) -> Result<f64> {
    if n_f == 0 {
        return Err(Error::invalid("n_f must be positive"));
    }
    if !(err > 0.0) {
        return Err(Error::invalid("err must be positive"));
    }
    Ok(1.0 / ((n_f as f64).powi(order_p as i32) * err))
}

/// Leading third-order multipliers `(α, β)` of a three-stage scheme.
pub fn order3_terms_threestage(scheme: &Scheme) -> Result<(f64, f64)> {
    if scheme.len() != 3 {
        return Err(Error::invalid("three-stage scheme required"));
    }
    Ok(match scheme.version {
        Version::Velocity => (1.0 / 12.0, 1.0 / 24.0 + 2.0 * scheme.stages[0].c()),
        Version::Position => (-1.0 / 24.0, -1.0 / 12.0 + scheme.stages[1].c()),
    })
}
