//! 1€ filter: an exponential smoother whose cutoff rises with signal speed.

use core::f64::consts::PI;

use crate::geometry::Vec3;
use crate::Error;

#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EuroParams {
    /// Cutoff at rest, Hz.
    pub min_cutoff: f64,
    /// Cutoff slope per unit/s of filtered speed.
    pub beta: f64,
    /// Cutoff of the derivative low-pass, Hz.
    pub d_cutoff: f64,
}

impl Default for EuroParams {
    fn default() -> Self {
        EuroParams {
            min_cutoff: 1.0,
            beta: 0.5,
            d_cutoff: 1.0,
        }
    }
}

impl EuroParams {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.min_cutoff > 0.0) || !(self.d_cutoff > 0.0) || !(self.beta >= 0.0) {
            return Err(Error::InvalidParameter(
                "1€ filter needs min_cutoff > 0, d_cutoff > 0, beta >= 0",
            ));
        }
        Ok(())
    }
}

/// Smoothing factor for a first-order low-pass at `cutoff` Hz sampled every
/// `period` seconds.
#[inline]
pub fn smoothing_factor(period: f64, cutoff: f64) -> f64 {
    let tau = 1.0 / (2.0 * PI * cutoff);
    1.0 / (1.0 + tau / period)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EuroState {
    value: f64,
    derivative: f64,
    t: f64,
    initialized: bool,
}

impl EuroState {
    pub fn new() -> EuroState {
        EuroState::default()
    }

    pub fn is_initialized(&self) -> bool {
        self.initialized
    }

    pub fn value(&self) -> Option<f64> {
        self.initialized.then_some(self.value)
    }

    /// Filters sample `x` taken at `t`. The first sample passes through.
    pub fn step(&mut self, params: &EuroParams, x: f64, t: f64) -> Result<f64, Error> {
        let (out, next) = euro_step(*self, params, x, t)?;
        *self = next;
        Ok(out)
    }
}

/// Pure form of [`EuroState::step`].
pub fn euro_step(state: EuroState, params: &EuroParams, x: f64, t: f64) -> Result<(f64, EuroState), Error> {
    if !state.initialized {
        return Ok((
            x,
            EuroState {
                value: x,
                derivative: 0.0,
                t,
                initialized: true,
            },
        ));
    }
    let period = t - state.t;
    if !(period > 0.0) {
        return Err(Error::NonMonotonicTime {
            previous: state.t,
            current: t,
        });
    }
    let a_d = smoothing_factor(period, params.d_cutoff);
    let dx = (x - state.value) / period;
    let dx_hat = state.derivative + a_d * (dx - state.derivative);
    let cutoff = params.min_cutoff + params.beta * dx_hat.abs();
    let a = smoothing_factor(period, cutoff);
    let x_hat = state.value + a * (x - state.value);
    Ok((
        x_hat,
        EuroState {
            value: x_hat,
            derivative: dx_hat,
            t,
            initialized: true,
        },
    ))
}

/// Three independent channels for a point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EuroVec3 {
    pub channels: [EuroState; 3],
}

impl EuroVec3 {
    pub fn new() -> EuroVec3 {
        EuroVec3::default()
    }

    pub fn step(&mut self, params: &EuroParams, v: Vec3, t: f64) -> Result<Vec3, Error> {
        let (out, next) = filter_vec3(*self, params, v, t)?;
        *self = next;
        Ok(out)
    }
}

/// Applies [`euro_step`] per axis. Either all three channels advance or none.
pub fn filter_vec3(state: EuroVec3, params: &EuroParams, v: Vec3, t: f64) -> Result<(Vec3, EuroVec3), Error> {
    let [sx, sy, sz] = state.channels;
    let (x, sx) = euro_step(sx, params, v.x, t)?;
    let (y, sy) = euro_step(sy, params, v.y, t)?;
    let (z, sz) = euro_step(sz, params, v.z, t)?;
    Ok((Vec3::new(x, y, z), EuroVec3 { channels: [sx, sy, sz] }))
}
