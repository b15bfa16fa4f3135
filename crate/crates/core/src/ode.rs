//! Adaptive Dormand–Prince 5(4) integrator for small autonomous systems.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step magnitude.
    pub h_init: f64,
    /// Largest step magnitude.
    pub h_max: f64,
    pub max_steps: usize,
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        OdeOptions {
            rtol: tol,
            atol: tol,
            h_init: 1e-3,
            h_max: 1.0,
            max_steps: 2_000_000,
        }
    }
}

/// Returned by the step observer to continue or end the integration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory<const N: usize> {
    pub z: Vec<f64>,
    pub y: Vec<[f64; N]>,
}

impl<const N: usize> Trajectory<N> {
    pub fn last(&self) -> Option<(f64, [f64; N])> {
        self.z.last().map(|z| (*z, *self.y.last().unwrap()))
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn combine<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (w, k) in terms {
        for i in 0..N {
            out[i] += h * w * k[i];
        }
    }
    out
}

/// Integrates `y' = f(y)` from `z0` toward `z_end` (either direction).
///
/// `observer` sees every accepted step, including the initial point, and may
/// stop the integration early. A step whose magnitude falls below
/// `1e−14·(1 + |z|)` fails with [`Error::StepUnderflow`].
pub fn integrate<const N: usize, F, O>(
    f: F,
    z0: f64,
    y0: [f64; N],
    z_end: f64,
    opts: &OdeOptions,
    mut observer: O,
) -> Result<Trajectory<N>>
where
    F: Fn(&[f64; N]) -> [f64; N],
    O: FnMut(f64, &[f64; N]) -> Control,
{
    let dir = if z_end >= z0 { 1.0 } else { -1.0 };
    let mut traj = Trajectory {
        z: vec![z0],
        y: vec![y0],
    };
    if observer(z0, &y0) == Control::Stop || z_end == z0 {
        return Ok(traj);
    }
    let (mut z, mut y) = (z0, y0);
    let mut h = opts.h_init.min(opts.h_max).min((z_end - z0).abs());
    let mut k1 = f(&y);
    for _ in 0..opts.max_steps {
        let remaining = (z_end - z).abs();
        if remaining <= 0.0 {
            break;
        }
        h = h.min(remaining);
        if h < 1e-14 * (1.0 + z.abs()) {
            return Err(Error::StepUnderflow { z });
        }
        let hs = dir * h;
        let k2 = f(&combine(&y, hs, &[(A21, &k1)]));
        let k3 = f(&combine(&y, hs, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(&combine(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(&combine(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = f(&combine(
            &y,
            hs,
            &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
        ));
        let y_new = combine(&y, hs, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
        let k7 = f(&y_new);
        let mut err_sq = 0.0;
        for i in 0..N {
            let e = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let scale = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            err_sq += (e / scale).powi(2);
        }
        let err = (err_sq / N as f64).sqrt();
        if !err.is_finite() {
            h *= 0.2;
            continue;
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        if err <= 1.0 {
            z = if h == remaining { z_end } else { z + hs };
            y = y_new;
            k1 = k7;
            traj.z.push(z);
            traj.y.push(y);
            if observer(z, &y) == Control::Stop {
                return Ok(traj);
            }
            h = (h * factor).min(opts.h_max);
        } else {
            h *= factor.min(1.0);
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_to_tolerance() {
        let opts = OdeOptions::with_tol(1e-10);
        let t = integrate(|y: &[f64; 1]| [-y[0]], 0.0, [1.0], 5.0, &opts, |_, _| Control::Continue).unwrap();
        let (z, y) = t.last().unwrap();
        assert_eq!(z, 5.0);
        assert!((y[0] - (-5f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn harmonic_oscillator_backward() {
        let opts = OdeOptions::with_tol(1e-11);
        let t = integrate(
            |y: &[f64; 2]| [y[1], -y[0]],
            0.0,
            [1.0, 0.0],
            -3.0,
            &opts,
            |_, _| Control::Continue,
        )
        .unwrap();
        let (z, y) = t.last().unwrap();
        assert_eq!(z, -3.0);
        assert!((y[0] - 3f64.cos()).abs() < 1e-9);
        assert!((y[1] - 3f64.sin()).abs() < 1e-9);
        assert!(t.z.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn observer_can_stop() {
        let opts = OdeOptions::with_tol(1e-8);
        let t = integrate(|_: &[f64; 1]| [1.0], 0.0, [0.0], 10.0, &opts, |_, y| {
            if y[0] > 2.0 {
                Control::Stop
            } else {
                Control::Continue
            }
        })
        .unwrap();
        let (z, y) = t.last().unwrap();
        assert!(y[0] > 2.0 && z < 10.0);
    }

    #[test]
    fn blow_up_underflows() {
        let opts = OdeOptions::with_tol(1e-10);
        let r = integrate(|y: &[f64; 1]| [y[0] * y[0]], 0.0, [1.0], 2.0, &opts, |_, _| Control::Continue);
        assert!(matches!(r, Err(Error::StepUnderflow { z }) if (z - 1.0).abs() < 1e-3));
    }
}
