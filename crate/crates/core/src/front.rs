//! Traveling-front ODE: first-order system, first integral, orbit integration
//! and shooting for the front speed.
//!
//! Writing `u(z) = (φ1, φ2)` and `φ3 = φ1'`, `φ4 = φ2'`, a front of speed `c`
//! solves
//!
//! ```text
//! φ1' = φ3
//! φ2' = φ4
//! φ3' = −(c φ3 + φ2 g(φ1))
//! φ4' = −(1/ε)(c φ4 − κ φ2 g(φ1))
//! ```
//!
//! For `ε = 0` the reactant equation is first order, `c φ2' = κ φ2 g(φ1)`,
//! and the state reduces to `(φ1, φ2, φ3)`. In both cases
//! `k = φ3 + cφ1 + (ε/κ)φ4 + (c/κ)φ2` is conserved, with `k = c/κ` on any
//! orbit leaving the unburned state `(0, 1)`.

use std::path::Path;

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::model::{ignition_rate, ignition_rate_derivative, ModelParams};
use crate::ode::{integrate, Control, OdeOptions};
use crate::output::write_csv;

/// Offset of the shooting start point from the unburned state.
pub const MANIFOLD_OFFSET: f64 = 1e-8;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FrontState {
    pub phi1: f64,
    pub phi2: f64,
    pub phi3: f64,
    pub phi4: f64,
}

impl FrontState {
    pub fn new(phi1: f64, phi2: f64, phi3: f64, phi4: f64) -> Self {
        FrontState {
            phi1,
            phi2,
            phi3,
            phi4,
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.phi1, self.phi2, self.phi3, self.phi4]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        FrontState::new(a[0], a[1], a[2], a[3])
    }

    fn reduced(self) -> [f64; 3] {
        [self.phi1, self.phi2, self.phi3]
    }

    fn from_reduced(a: [f64; 3]) -> Self {
        FrontState::new(a[0], a[1], a[2], 0.0)
    }
}

/// Four-dimensional field; requires `ε > 0`.
pub fn vector_field(params: &ModelParams, s: &FrontState) -> Result<FrontState> {
    if !(params.epsilon > 0.0) {
        return Err(Error::param(
            "epsilon",
            "the four-dimensional front field needs epsilon > 0; use the reduced field",
        ));
    }
    Ok(FrontState::from_array(field4(params, &s.to_array())))
}

fn field4(p: &ModelParams, s: &[f64; 4]) -> [f64; 4] {
    let r = s[1] * ignition_rate(s[0]);
    [
        s[2],
        s[3],
        -(p.c * s[2] + r),
        -(p.c * s[3] - p.kappa * r) / p.epsilon,
    ]
}

/// Reduced field for `ε = 0`: `(φ3, (κ/c) φ2 g(φ1), −(cφ3 + φ2 g(φ1)))`.
pub fn reduced_vector_field(params: &ModelParams, s: &[f64; 3]) -> [f64; 3] {
    let r = s[1] * ignition_rate(s[0]);
    [s[2], params.kappa / params.c * r, -(params.c * s[2] + r)]
}

/// Analytic Jacobian of [`reduced_vector_field`].
pub fn reduced_jacobian(params: &ModelParams, s: &[f64; 3]) -> Matrix3<f64> {
    let g = ignition_rate(s[0]);
    let dg = s[1] * ignition_rate_derivative(s[0]);
    let q = params.kappa / params.c;
    Matrix3::new(0.0, 0.0, 1.0, q * dg, q * g, 0.0, -dg, -g, -params.c)
}

/// `k = φ3 + cφ1 + (ε/κ)φ4 + (c/κ)φ2`.
pub fn conserved_k(params: &ModelParams, s: &FrontState) -> f64 {
    s.phi3 + params.c * s.phi1 + params.epsilon / params.kappa * s.phi4 + params.c / params.kappa * s.phi2
}

/// Sampled orbit with its first-integral drift.
#[derive(Clone, Debug, PartialEq)]
pub struct Orbit {
    pub z: Vec<f64>,
    pub states: Vec<FrontState>,
    pub k0: f64,
    pub max_drift: f64,
}

impl Orbit {
    fn from_samples(params: &ModelParams, z: Vec<f64>, states: Vec<FrontState>) -> Self {
        let k0 = conserved_k(params, &states[0]);
        let max_drift = states
            .iter()
            .map(|s| (conserved_k(params, s) - k0).abs())
            .fold(0.0, f64::max);
        Orbit {
            z,
            states,
            k0,
            max_drift,
        }
    }
}

/// Integrates an orbit over `z_span` with absolute and relative tolerance `tol`.
///
/// `ε > 0` uses the four-dimensional field, `ε = 0` the reduced one (the
/// `φ4` entry of `s0` is then ignored and reported as zero).
pub fn integrate_orbit(params: &ModelParams, s0: &FrontState, z_span: (f64, f64), tol: f64) -> Result<Orbit> {
    if !(tol > 0.0) {
        return Err(Error::param("tol", format!("must be positive, got {tol}")));
    }
    params.validate_base()?;
    let opts = OdeOptions::with_tol(tol);
    let (z, states) = if params.epsilon > 0.0 {
        let t = integrate(|y| field4(params, y), z_span.0, s0.to_array(), z_span.1, &opts, |_, _| {
            Control::Continue
        })?;
        (t.z, t.y.into_iter().map(FrontState::from_array).collect())
    } else {
        let t = integrate(
            |y| reduced_vector_field(params, y),
            z_span.0,
            s0.reduced(),
            z_span.1,
            &opts,
            |_, _| Control::Continue,
        )?;
        (t.z, t.y.into_iter().map(FrontState::from_reduced).collect())
    };
    Ok(Orbit::from_samples(params, z, states))
}

/// How a leftward shot from the unburned state ended.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ShotOutcome {
    /// `φ1` fell below zero: the reaction switched off before burning out.
    Quenched { z: f64 },
    /// `φ1` passed `2/κ`.
    Overshot { z: f64 },
    /// Neither happened before the end of the integration window.
    Stalled,
}

#[derive(Clone, Debug)]
pub struct Shot {
    pub c: f64,
    /// Signed miss `φ1(end) − 1/κ`.
    pub functional: f64,
    pub outcome: ShotOutcome,
    pub z: Vec<f64>,
    pub states: Vec<[f64; 3]>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShootOptions {
    /// Integration tolerance.
    pub ode_tol: f64,
    /// Leftmost `z` to integrate to.
    pub z_min: f64,
    pub max_bisections: usize,
}

impl Default for ShootOptions {
    fn default() -> Self {
        ShootOptions {
            ode_tol: 1e-12,
            z_min: -400.0,
            max_bisections: 200,
        }
    }
}

/// Start point on the one-dimensional manifold of `(0, 1, 0)` that grows
/// toward `z → −∞` (eigenvalue `−c`, eigenvector `(1, 0, −c)`).
pub fn manifold_start(c: f64) -> [f64; 3] {
    let n = (1.0 + c * c).sqrt();
    [MANIFOLD_OFFSET / n, 1.0, -c * MANIFOLD_OFFSET / n]
}

/// Fires a shot at speed `c`, integrating leftward from [`manifold_start`].
pub fn shoot(params: &ModelParams, c: f64, opts: &ShootOptions) -> Result<Shot> {
    let p = ModelParams { c, ..*params };
    let target = 1.0 / p.kappa;
    let mut outcome = ShotOutcome::Stalled;
    let ode = OdeOptions {
        h_max: 0.5,
        ..OdeOptions::with_tol(opts.ode_tol)
    };
    let t = integrate(
        |y| reduced_vector_field(&p, y),
        0.0,
        manifold_start(c),
        opts.z_min,
        &ode,
        |z, y| {
            if y[0] < 0.0 {
                outcome = ShotOutcome::Quenched { z };
                Control::Stop
            } else if y[0] >= 2.0 * target {
                outcome = ShotOutcome::Overshot { z };
                Control::Stop
            } else {
                Control::Continue
            }
        },
    )?;
    let functional = t.y.last().unwrap()[0] - target;
    Ok(Shot {
        c,
        functional,
        outcome,
        z: t.z,
        states: t.y,
    })
}

/// Shooting functional `F(c) = φ1(end) − 1/κ`.
pub fn shooting_functional(params: &ModelParams, c: f64, opts: &ShootOptions) -> Result<f64> {
    Ok(shoot(params, c, opts)?.functional)
}

/// Evaluates the functional on a coarse grid of speeds.
pub fn bracket_scan(params: &ModelParams, speeds: &[f64], opts: &ShootOptions) -> Result<Vec<(f64, f64)>> {
    speeds
        .iter()
        .map(|&c| Ok((c, shooting_functional(params, c, opts)?)))
        .collect()
}

/// First adjacent pair of a scan with a sign change.
pub fn find_bracket(scan: &[(f64, f64)]) -> Option<(f64, f64)> {
    scan.windows(2)
        .find(|w| w[0].1.signum() != w[1].1.signum())
        .map(|w| (w[0].0, w[1].0))
}

/// Front profile on an increasing `z` grid; `z = 0` where `φ1` is half burned.
#[derive(Clone, Debug, PartialEq)]
pub struct FrontProfile {
    pub z: Vec<f64>,
    pub states: Vec<FrontState>,
    pub c: f64,
    pub k: f64,
    /// `|k(s) − c/κ|` per sample.
    pub k_drift: Vec<f64>,
    /// Distance of the left end to `(1/κ, 0, 0)`.
    pub left_residual: f64,
    /// Distance of the right end to `(0, 1, 0)`.
    pub right_residual: f64,
}

impl FrontProfile {
    pub fn left(&self) -> &FrontState {
        &self.states[0]
    }

    pub fn max_k_drift(&self) -> f64 {
        self.k_drift.iter().copied().fold(0.0, f64::max)
    }

    /// Number of samples where `φ2` increases when moving toward the burned side.
    pub fn phi2_monotonicity_violations(&self) -> usize {
        self.states
            .windows(2)
            .filter(|w| w[0].phi2 > w[1].phi2)
            .count()
    }

    pub const CSV_HEADER: [&'static str; 6] = ["z", "phi1", "phi2", "phi3", "phi4", "k_drift"];

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let header: Vec<String> = Self::CSV_HEADER.iter().map(|s| s.to_string()).collect();
        let rows = self.z.iter().zip(&self.states).zip(&self.k_drift).map(|((z, s), d)| {
            [*z, s.phi1, s.phi2, s.phi3, s.phi4, *d]
        });
        write_csv(path, &header, rows)
    }
}

#[derive(Clone, Debug)]
pub struct ShootResult {
    pub c_star: f64,
    pub profile: FrontProfile,
    /// Functional at the original bracket endpoints.
    pub bracket_values: (f64, f64),
    /// Final bisection interval.
    pub final_bracket: (f64, f64),
    pub bisections: usize,
}

/// Locates the front speed for `ε = 0` by bisection on [`shooting_functional`].
///
/// Neither final shot converges to the burned state in floating point: the
/// burned state is a saddle for the leftward flow, so each shot passes it at
/// a closest approach and then leaves. The profile is the better of the two
/// final shots truncated at that closest approach, and is accepted when
/// `|φ1 − 1/κ| ≤ tol` there.
pub fn shoot_speed(params: &ModelParams, c_bracket: (f64, f64), tol: f64, opts: &ShootOptions) -> Result<ShootResult> {
    if params.epsilon != 0.0 {
        return Err(Error::param("epsilon", "shooting is implemented for epsilon = 0 only"));
    }
    if !(params.kappa > 0.0) {
        return Err(Error::param("kappa", format!("need kappa > 0, got {}", params.kappa)));
    }
    let (mut lo, mut hi) = c_bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::param("c_bracket", format!("need 0 < lo < hi, got [{lo}, {hi}]")));
    }
    let mut shot_lo = shoot(params, lo, opts)?;
    let mut shot_hi = shoot(params, hi, opts)?;
    let bracket_values = (shot_lo.functional, shot_hi.functional);
    if shot_lo.functional.signum() == shot_hi.functional.signum() {
        return Err(Error::NoSignChange {
            lo,
            hi,
            f_lo: shot_lo.functional,
            f_hi: shot_hi.functional,
        });
    }
    let mut bisections = 0;
    while bisections < opts.max_bisections {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let shot = shoot(params, mid, opts)?;
        bisections += 1;
        if shot.functional.signum() == shot_lo.functional.signum() {
            lo = mid;
            shot_lo = shot;
        } else {
            hi = mid;
            shot_hi = shot;
        }
    }
    let target = 1.0 / params.kappa;
    let closest = |shot: &Shot| {
        shot.states
            .iter()
            .enumerate()
            .map(|(i, s)| (i, ((s[0] - target).powi(2) + s[1].powi(2) + s[2].powi(2)).sqrt()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap()
    };
    let (best, (cut, dist)) = [&shot_lo, &shot_hi]
        .into_iter()
        .map(|s| (s, closest(s)))
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .unwrap();
    let left = best.states[cut];
    let miss = (left[0] - target).abs();
    if !(miss <= tol) {
        return Err(match best.outcome {
            ShotOutcome::Quenched { z } => Error::PrematureQuench { z },
            _ => Error::ShootingMiss { miss, tol },
        });
    }
    let p = ModelParams { c: best.c, ..*params };
    let k = p.c / p.kappa;
    let mut z: Vec<f64> = best.z[..=cut].iter().rev().copied().collect();
    let states: Vec<FrontState> = best.states[..=cut]
        .iter()
        .rev()
        .map(|s| FrontState::from_reduced(*s))
        .collect();
    let half = states
        .iter()
        .position(|s| s.phi1 <= 0.5 * target)
        .unwrap_or(0);
    let shift = z[half];
    for zi in z.iter_mut() {
        *zi -= shift;
    }
    let k_drift = states.iter().map(|s| (conserved_k(&p, s) - k).abs()).collect();
    let right = states.last().unwrap();
    let right_residual = (right.phi1.powi(2) + (right.phi2 - 1.0).powi(2) + right.phi3.powi(2)).sqrt();
    Ok(ShootResult {
        c_star: best.c,
        profile: FrontProfile {
            z,
            states,
            c: best.c,
            k,
            k_drift,
            left_residual: dist,
            right_residual,
        },
        bracket_values,
        final_bracket: (lo, hi),
        bisections,
    })
}

/// End states of the reduced front system.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrontEnd {
    /// `(1/κ, 0, 0)`.
    Burned,
    /// `(0, 1, 0)`.
    Unburned,
}

impl FrontEnd {
    pub fn point(self, params: &ModelParams) -> [f64; 3] {
        match self {
            FrontEnd::Burned => [1.0 / params.kappa, 0.0, 0.0],
            FrontEnd::Unburned => [0.0, 1.0, 0.0],
        }
    }
}

/// Spatial eigenvalues of the reduced field at an end state, ascending.
///
/// The characteristic polynomial factors as `μ (μ + c) (c μ − r)` with
/// `r = κ e^(−κ)` at the burned end (the `ξ = 0` data of the temperature and
/// reactant blocks) and `r = 0` at the unburned end, where `g` is flat.
pub fn spatial_eigenvalues(params: &ModelParams, end: FrontEnd) -> [f64; 3] {
    let r = match end {
        FrontEnd::Burned => params.reactant_rate(),
        FrontEnd::Unburned => 0.0,
    };
    let mut ev = [0.0, -params.c, r / params.c];
    ev.sort_by(f64::total_cmp);
    ev
}

/// Spatial eigenvalues from a dense eigensolve of [`reduced_jacobian`], ascending.
pub fn spatial_eigenvalues_numeric(params: &ModelParams, end: FrontEnd) -> [f64; 3] {
    let jac = reduced_jacobian(params, &end.point(params));
    let ev = jac.complex_eigenvalues();
    let mut out = [ev[0].re, ev[1].re, ev[2].re];
    out.sort_by(f64::total_cmp);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(epsilon: f64, kappa: f64, c: f64) -> ModelParams {
        ModelParams {
            epsilon,
            kappa,
            c,
            alpha: 0.25 * c,
        }
    }

    #[test]
    fn field_vanishes_at_end_states() {
        for kappa in [0.5, 1.0, 3.0] {
            let params = p(0.5, kappa, 1.3);
            let burned = vector_field(&params, &FrontState::new(1.0 / kappa, 0.0, 0.0, 0.0)).unwrap();
            let unburned = vector_field(&params, &FrontState::new(0.0, 1.0, 0.0, 0.0)).unwrap();
            assert!(burned.to_array().iter().chain(&unburned.to_array()).all(|x| x.abs() <= 1e-14));
            let r0 = reduced_vector_field(&p(0.0, kappa, 1.3), &[1.0 / kappa, 0.0, 0.0]);
            let r1 = reduced_vector_field(&p(0.0, kappa, 1.3), &[0.0, 1.0, 0.0]);
            assert!(r0.iter().chain(&r1).all(|x| x.abs() <= 1e-14));
        }
    }

    #[test]
    fn field_example() {
        let f = vector_field(&p(0.5, 1.0, 1.0), &FrontState::new(1.0, 1.0, 0.0, 0.0)).unwrap();
        assert_eq!((f.phi1, f.phi2), (0.0, 0.0));
        assert_relative_eq!(f.phi3, -0.367_879_4, epsilon = 1e-7);
        assert_relative_eq!(f.phi4, 0.735_758_9, epsilon = 1e-7);
        assert!(vector_field(&p(0.0, 1.0, 1.0), &FrontState::default()).is_err());
    }

    #[test]
    fn conserved_k_examples() {
        let params = p(0.5, 4.0, 2.0);
        assert_eq!(conserved_k(&params, &FrontState::new(0.0, 1.0, 0.0, 0.0)), 0.5);
        assert_eq!(conserved_k(&params, &FrontState::new(0.25, 0.0, 0.0, 0.0)), 0.5);
        let k = conserved_k(&p(0.5, 1.0, 1.0), &FrontState::new(0.3, 0.2, 0.1, 0.4));
        assert_relative_eq!(k, 0.8, epsilon = 1e-15);
    }

    #[test]
    fn equilibrium_orbit_is_constant() {
        let params = p(0.5, 2.0, 1.0);
        let s0 = FrontState::new(0.5, 0.0, 0.0, 0.0);
        let orbit = integrate_orbit(&params, &s0, (0.0, 10.0), 1e-10).unwrap();
        assert!(orbit.states.iter().all(|s| *s == s0));
        assert_eq!(orbit.max_drift, 0.0);
    }

    #[test]
    fn manifold_start_lies_on_k_level() {
        for c in [0.3, 1.0, 2.5] {
            let params = p(0.0, 1.7, c);
            let k = conserved_k(&params, &FrontState::from_reduced(manifold_start(c)));
            assert_relative_eq!(k, c / 1.7, epsilon = 1e-15);
        }
    }

    #[test]
    fn spatial_eigenvalues_match_eigensolve() {
        for (kappa, c) in [(1.0, 0.57), (0.5, 1.2), (2.0, 0.3)] {
            let params = p(0.0, kappa, c);
            for end in [FrontEnd::Burned, FrontEnd::Unburned] {
                let closed = spatial_eigenvalues(&params, end);
                let numeric = spatial_eigenvalues_numeric(&params, end);
                for (a, b) in closed.iter().zip(&numeric) {
                    assert!((a - b).abs() < 1e-12, "{end:?}: {closed:?} vs {numeric:?}");
                }
            }
        }
        let b = spatial_eigenvalues(&p(0.0, 1.0, 0.5), FrontEnd::Burned);
        assert_relative_eq!(b[2], 2.0 * (-1f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn shots_bracket_the_speed() {
        let params = p(0.0, 1.0, 1.0);
        let opts = ShootOptions::default();
        let scan = bracket_scan(&params, &[0.3, 0.5, 0.8, 1.2], &opts).unwrap();
        let (lo, hi) = find_bracket(&scan).unwrap();
        assert_eq!((lo, hi), (0.5, 0.8));
        assert!(matches!(shoot(&params, 0.3, &opts).unwrap().outcome, ShotOutcome::Quenched { .. }));
        assert!(matches!(shoot(&params, 1.2, &opts).unwrap().outcome, ShotOutcome::Overshot { .. }));
    }

    #[test]
    fn bad_bracket_reports_values() {
        let params = p(0.0, 1.0, 1.0);
        let err = shoot_speed(&params, (0.8, 1.2), 1e-6, &ShootOptions::default()).unwrap_err();
        match err {
            Error::NoSignChange { f_lo, f_hi, .. } => assert!(f_lo > 0.0 && f_hi > 0.0),
            other => panic!("unexpected {other}"),
        }
        assert!(shoot_speed(&p(0.5, 1.0, 1.0), (0.5, 0.8), 1e-6, &ShootOptions::default()).is_err());
    }
}
