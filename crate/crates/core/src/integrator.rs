//! Classical fixed-step fourth-order Runge-Kutta.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// One RK4 step of `dx/dt = f(t, x)` from `(t, state)`.
///
/// Fails with [`Error::Divergence`] when the new state is not finite.
pub fn rk4_step<F>(mut f: F, state: &DVector<f64>, t: f64, dt: f64) -> Result<DVector<f64>>
where
    F: FnMut(f64, &DVector<f64>) -> DVector<f64>,
{
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "dt must be positive, got {dt}"
        )));
    }
    let half = 0.5 * dt;
    let k1 = f(t, state);
    let k2 = f(t + half, &(state + &k1 * half));
    let k3 = f(t + half, &(state + &k2 * half));
    let k4 = f(t + dt, &(state + &k3 * dt));
    let next = state + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    if next.iter().all(|x| x.is_finite()) {
        Ok(next)
    } else {
        Err(Error::Divergence { t: t + dt })
    }
}

/// Takes `steps` RK4 steps from `t0` and returns the final state.
pub fn integrate<F>(
    mut f: F,
    x0: &DVector<f64>,
    t0: f64,
    dt: f64,
    steps: usize,
) -> Result<DVector<f64>>
where
    F: FnMut(f64, &DVector<f64>) -> DVector<f64>,
{
    let mut x = x0.clone();
    for k in 0..steps {
        x = rk4_step(&mut f, &x, t0 + k as f64 * dt, dt)?;
    }
    Ok(x)
}

/// Number of steps of size `dt` covering `t_final`, tolerant of the
/// rounding in `t_final / dt`.
pub fn step_count(t_final: f64, dt: f64) -> usize {
    let r = t_final / dt;
    let nearest = r.round();
    if (r - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest as usize
    } else {
        r.floor() as usize
    }
}
