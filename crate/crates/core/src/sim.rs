//! Periodic pseudo-spectral solver for `v_t = D Δv + c ∂z v + ∂f(0) v + N(v)v`.
//!
//! The linear part is advanced exactly, mode by mode, with the matrix
//! exponential of its symbol. The nonlinearity is pointwise and advanced
//! with classical RK4 inside a Strang composition
//! `L(dt/2) ∘ N(dt) ∘ L(dt/2)`.
//!
//! Grids are 1-D or 2-D and periodic on `[−L, L)` per axis. Axis 0 is the
//! propagation axis `z`; 2-D fields are stored with `z` fastest
//! (`index = iy·Nz + iz`).

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BlockSystem, ModelParams};
use crate::norms::{self, NormSample, NormSeries};
use crate::output::write_csv;
use crate::spectral::expm_triangular_2x2;

/// Periodic tensor grid with cached FFT plans and wavenumbers.
#[derive(Clone)]
pub struct Grid {
    half_length: Vec<f64>,
    points: Vec<usize>,
    spacing: Vec<f64>,
    /// Wavenumbers in FFT order, used for `|k|²`.
    wavenumbers: Vec<Vec<f64>>,
    /// Wavenumbers with the Nyquist entry zeroed, used for first derivatives.
    odd_wavenumbers: Vec<Vec<f64>>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("half_length", &self.half_length)
            .field("points", &self.points)
            .finish()
    }
}

impl Grid {
    pub fn new(half_length: &[f64], points: &[usize]) -> Result<Self> {
        let d = half_length.len();
        if !(d == 1 || d == 2) {
            return Err(Error::param("grid", format!("space_dim must be 1 or 2, got {d}")));
        }
        if points.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: points.len(),
            });
        }
        for (&l, &n) in half_length.iter().zip(points) {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::param("grid.L", format!("half-lengths must be positive, got {l}")));
            }
            if n < 16 || !n.is_power_of_two() {
                return Err(Error::param("grid.N", format!("point counts must be powers of two >= 16, got {n}")));
            }
        }
        let mut planner = FftPlanner::new();
        let mut grid = Grid {
            half_length: half_length.to_vec(),
            points: points.to_vec(),
            spacing: vec![],
            wavenumbers: vec![],
            odd_wavenumbers: vec![],
            forward: vec![],
            inverse: vec![],
        };
        for (&l, &n) in half_length.iter().zip(points) {
            let h = 2.0 * l / n as f64;
            let base = std::f64::consts::PI / l;
            let k: Vec<f64> = (0..n)
                .map(|j| {
                    let j = j as i64;
                    let s = if j <= n as i64 / 2 { j } else { j - n as i64 };
                    base * s as f64
                })
                .collect();
            let mut odd = k.clone();
            odd[n / 2] = 0.0;
            grid.spacing.push(h);
            grid.wavenumbers.push(k);
            grid.odd_wavenumbers.push(odd);
            grid.forward.push(planner.plan_fft_forward(n));
            grid.inverse.push(planner.plan_fft_inverse(n));
        }
        Ok(grid)
    }

    pub fn space_dim(&self) -> usize {
        self.points.len()
    }

    pub fn half_length(&self) -> &[f64] {
        &self.half_length
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn volume(&self) -> f64 {
        self.half_length.iter().map(|l| 2.0 * l).product()
    }

    /// Coordinate of sample `i` along `axis`: `−L + i·h`.
    pub fn coordinate(&self, axis: usize, i: usize) -> f64 {
        -self.half_length[axis] + i as f64 * self.spacing[axis]
    }

    /// Per-axis indices of flat index `idx`.
    pub fn unflatten(&self, idx: usize) -> [usize; 2] {
        let nz = self.points[0];
        [idx % nz, idx / nz]
    }

    pub fn wavenumbers(&self, axis: usize) -> &[f64] {
        &self.wavenumbers[axis]
    }

    /// `|k|²` and the drift wavenumber (Nyquist zeroed) of mode `idx`.
    fn mode(&self, idx: usize) -> (f64, f64) {
        let [iz, iy] = self.unflatten(idx);
        let mut k2 = self.wavenumbers[0][iz].powi(2);
        if self.space_dim() == 2 {
            k2 += self.wavenumbers[1][iy].powi(2);
        }
        (k2, self.odd_wavenumbers[0][iz])
    }

    /// Unnormalized forward transform in place.
    pub fn fft(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    /// Inverse transform in place, including the `1/N` factor.
    pub fn ifft(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
        let scale = 1.0 / data.len() as f64;
        for x in data.iter_mut() {
            *x *= scale;
        }
    }

    fn transform(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        plans[0].process(data);
        if self.space_dim() == 2 {
            let (nz, ny) = (self.points[0], self.points[1]);
            let mut t = vec![Complex64::new(0.0, 0.0); data.len()];
            for iy in 0..ny {
                for iz in 0..nz {
                    t[iz * ny + iy] = data[iy * nz + iz];
                }
            }
            plans[1].process(&mut t);
            for iy in 0..ny {
                for iz in 0..nz {
                    data[iy * nz + iz] = t[iz * ny + iy];
                }
            }
        }
    }

    pub fn to_spectral(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.fft(&mut buf);
        buf
    }

    /// Spectral derivative along `axis`.
    pub fn derivative(&self, values: &[f64], axis: usize) -> Vec<f64> {
        let mut buf = self.to_spectral(values);
        for (idx, x) in buf.iter_mut().enumerate() {
            let k = self.odd_wavenumbers[axis][self.unflatten(idx)[axis]];
            *x *= Complex64::new(0.0, k);
        }
        self.ifft(&mut buf);
        buf.into_iter().map(|x| x.re).collect()
    }
}

/// Perturbation field `v = (v1, v2)` on a grid, one array per component.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldState {
    pub t: f64,
    pub components: Vec<Vec<f64>>,
}

impl FieldState {
    pub fn zeros(grid: &Grid, n: usize) -> Self {
        FieldState {
            t: 0.0,
            components: vec![vec![0.0; grid.len()]; n],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().flatten().all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.components.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn scale(&mut self, factor: f64) {
        for x in self.components.iter_mut().flatten() {
            *x *= factor;
        }
    }

    /// Largest pointwise difference to another state of the same shape.
    pub fn max_diff(&self, other: &FieldState) -> f64 {
        self.components
            .iter()
            .flatten()
            .zip(other.components.iter().flatten())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Gaussian,
    Bump,
}

/// Initial perturbation profile.
#[derive(Clone, Debug, PartialEq)]
pub struct Perturbation {
    pub shape: Shape,
    pub amplitude: f64,
    pub center: Vec<f64>,
    pub widths: Vec<f64>,
    /// Components that receive the profile.
    pub mask: Vec<bool>,
    /// Rescale so that `‖v⁰‖_E` equals this value.
    pub target_e_norm: Option<f64>,
}

/// Radius (in widths) where a Gaussian drops below `1e−6` of its peak.
pub const GAUSSIAN_SUPPORT: f64 = 3.716_922_188_849_838;

/// Initial field together with its norms at `k = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialField {
    pub state: FieldState,
    pub norm0: f64,
    pub norm_alpha: f64,
    pub norm_e: f64,
}

/// Samples a perturbation; `alpha` is the weight used for the reported norms.
pub fn build_perturbation(grid: &Grid, pert: &Perturbation, alpha: f64) -> Result<InitialField> {
    let d = grid.space_dim();
    if pert.center.len() != d || pert.widths.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: pert.center.len().min(pert.widths.len()),
        });
    }
    if !(pert.amplitude >= 0.0) {
        return Err(Error::param("amplitude", format!("must be nonnegative, got {}", pert.amplitude)));
    }
    if pert.widths.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::param("widths", "must be positive"));
    }
    let reach = match pert.shape {
        Shape::Gaussian => GAUSSIAN_SUPPORT,
        Shape::Bump => 1.0,
    };
    for axis in 0..d {
        let l = grid.half_length()[axis];
        let r = reach * pert.widths[axis];
        if pert.center[axis] - r < -l || pert.center[axis] + r > l {
            return Err(Error::SupportExceedsGrid { axis });
        }
    }
    let profile: Vec<f64> = (0..grid.len())
        .map(|idx| {
            let ix = grid.unflatten(idx);
            let r2: f64 = (0..d)
                .map(|a| ((grid.coordinate(a, ix[a]) - pert.center[a]) / pert.widths[a]).powi(2))
                .sum();
            match pert.shape {
                Shape::Gaussian => pert.amplitude * (-r2).exp(),
                Shape::Bump if r2 < 1.0 => pert.amplitude * (1.0 - 1.0 / (1.0 - r2)).exp(),
                Shape::Bump => 0.0,
            }
        })
        .collect();
    let components = pert
        .mask
        .iter()
        .map(|&on| if on { profile.clone() } else { vec![0.0; grid.len()] })
        .collect();
    let mut state = FieldState { t: 0.0, components };
    let mut e = norms::norm_e(grid, &state.components, alpha, 0)?;
    if let Some(eta) = pert.target_e_norm {
        if !(eta >= 0.0) {
            return Err(Error::param("eta", format!("must be nonnegative, got {eta}")));
        }
        if e > 0.0 {
            state.scale(eta / e);
        } else if eta > 0.0 {
            return Err(Error::param("eta", "cannot rescale a zero perturbation"));
        }
        e = norms::norm_e(grid, &state.components, alpha, 0)?;
    }
    Ok(InitialField {
        norm0: norms::norm_unweighted(grid, &state.components, 0),
        norm_alpha: norms::norm_weighted(grid, &state.components, alpha, 0)?,
        norm_e: e,
        state,
    })
}

/// Exact linear propagators for one step size, `n×n` row-major per mode.
struct Propagator {
    dt_bits: u64,
    matrices: Vec<Complex64>,
}

/// Integrator for one block system on one grid.
pub struct Simulator {
    system: BlockSystem,
    grid: Grid,
    nonlinear: bool,
    j0: DMatrix<f64>,
    f0: Vec<f64>,
    cache: Vec<Propagator>,
}

impl fmt::Debug for Simulator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Simulator")
            .field("system", &self.system)
            .field("grid", &self.grid)
            .field("nonlinear", &self.nonlinear)
            .finish()
    }
}

/// Settings of a [`Simulator::run`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunConfig {
    pub t_final: f64,
    pub dt: f64,
    pub record_every: usize,
    /// Weight exponent for the recorded weighted norms.
    pub alpha: f64,
    /// Initial center of the weight window along `z`.
    pub window_origin: f64,
    /// Keep a snapshot every this many records (`0` keeps none).
    pub snapshot_every: usize,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub series: NormSeries,
    pub snapshots: Vec<FieldState>,
    pub final_state: FieldState,
    pub warnings: Vec<String>,
    pub steps: usize,
    pub dt: f64,
}

/// Share of weighted mass allowed within 5% of either window edge.
pub const CONTAMINATION_LIMIT: f64 = 1e-8;

impl Simulator {
    pub fn new(system: BlockSystem, grid: Grid, nonlinear: bool) -> Self {
        let n = system.dim();
        let j0 = system.jacobian_at_rest();
        let mut f0 = vec![0.0; n];
        system.reaction.eval(&vec![0.0; n], &mut f0);
        Simulator {
            system,
            grid,
            nonlinear,
            j0,
            f0,
            cache: Vec::new(),
        }
    }

    pub fn combustion(params: &ModelParams, grid: Grid, nonlinear: bool) -> Self {
        Simulator::new(BlockSystem::combustion(params), grid, nonlinear)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn system(&self) -> &BlockSystem {
        &self.system
    }

    pub fn is_nonlinear(&self) -> bool {
        self.nonlinear
    }

    /// Drift speed of the moving frame; the weight window follows it.
    pub fn speed(&self) -> f64 {
        self.system.c
    }

    fn propagator(&mut self, dt: f64) -> usize {
        let bits = dt.to_bits();
        if let Some(i) = self.cache.iter().position(|p| p.dt_bits == bits) {
            return i;
        }
        let n = self.system.dim();
        let diffusion = self.system.diffusion();
        let c = self.system.c;
        let b = &self.j0;
        let triangular = n == 2 && b[(1, 0)] == 0.0;
        let grid = &self.grid;
        let matrices: Vec<Complex64> = (0..grid.len())
            .into_par_iter()
            .flat_map_iter(|idx| {
                let (k2, ka) = grid.mode(idx);
                let diag = |j: usize| Complex64::new(b[(j, j)] - diffusion[j] * k2, c * ka);
                if triangular {
                    let e = expm_triangular_2x2(diag(0), Complex64::new(b[(0, 1)], 0.0), diag(1), dt);
                    vec![e[0][0], e[0][1], e[1][0], e[1][1]]
                } else {
                    let mut s = b.map(|x| Complex64::new(x * dt, 0.0));
                    for j in 0..n {
                        s[(j, j)] = diag(j) * dt;
                    }
                    let e = s.exp();
                    let mut out = Vec::with_capacity(n * n);
                    for i in 0..n {
                        for j in 0..n {
                            out.push(e[(i, j)]);
                        }
                    }
                    out
                }
            })
            .collect();
        if self.cache.len() >= 4 {
            self.cache.remove(0);
        }
        self.cache.push(Propagator {
            dt_bits: bits,
            matrices,
        });
        self.cache.len() - 1
    }

    fn linear_stage(&mut self, components: &mut [Vec<f64>], dt: f64) {
        let n = self.system.dim();
        let slot = self.propagator(dt);
        let grid = &self.grid;
        let mut spectra: Vec<Vec<Complex64>> = components.par_iter().map(|c| grid.to_spectral(c)).collect();
        let p = &self.cache[slot].matrices;
        let mut tmp = vec![Complex64::new(0.0, 0.0); n];
        for idx in 0..grid.len() {
            let m = &p[idx * n * n..(idx + 1) * n * n];
            for (i, slot) in tmp.iter_mut().enumerate() {
                *slot = (0..n).map(|j| m[i * n + j] * spectra[j][idx]).sum();
            }
            for (j, s) in spectra.iter_mut().enumerate() {
                s[idx] = tmp[j];
            }
        }
        components.par_iter_mut().zip(spectra.par_iter_mut()).for_each(|(c, s)| {
            grid.ifft(s);
            for (dst, x) in c.iter_mut().zip(s.iter()) {
                *dst = x.re;
            }
        });
    }

    /// Advances the linear flow exactly by `dt`.
    pub fn apply_linear_exact(&mut self, state: &mut FieldState, dt: f64) -> Result<()> {
        if !(dt > 0.0) {
            return Err(Error::param("dt", format!("must be positive, got {dt}")));
        }
        self.linear_stage(&mut state.components, dt);
        state.t += dt;
        Ok(())
    }

    /// Remainder `f(v) − f(0) − ∂f(0) v` at one point.
    fn remainder_into(&self, v: &[f64], out: &mut [f64]) {
        self.system.reaction.eval(v, out);
        let n = v.len();
        for i in 0..n {
            let lin: f64 = (0..n).map(|j| self.j0[(i, j)] * v[j]).sum();
            out[i] -= self.f0[i] + lin;
        }
    }

    fn nonlinear_stage(&self, components: &mut [Vec<f64>], dt: f64) {
        let n = self.system.dim();
        let npts = self.grid.len();
        let mut packed = vec![0.0; npts * n];
        for (j, c) in components.iter().enumerate() {
            for (p, x) in c.iter().enumerate() {
                packed[p * n + j] = *x;
            }
        }
        packed.par_chunks_mut(n * 64).for_each(|chunk| {
            let mut k = vec![vec![0.0; n]; 4];
            let mut stage = vec![0.0; n];
            for v in chunk.chunks_mut(n) {
                self.remainder_into(v, &mut k[0]);
                for (s, (x, d)) in stage.iter_mut().zip(v.iter().zip(&k[0])) {
                    *s = x + 0.5 * dt * d;
                }
                let (head, tail) = k.split_at_mut(1);
                self.remainder_into(&stage, &mut tail[0]);
                for (s, (x, d)) in stage.iter_mut().zip(v.iter().zip(&tail[0])) {
                    *s = x + 0.5 * dt * d;
                }
                self.remainder_into(&stage, &mut tail[1]);
                for (s, (x, d)) in stage.iter_mut().zip(v.iter().zip(&tail[1])) {
                    *s = x + dt * d;
                }
                self.remainder_into(&stage, &mut tail[2]);
                for i in 0..n {
                    v[i] += dt / 6.0 * (head[0][i] + 2.0 * tail[0][i] + 2.0 * tail[1][i] + tail[2][i]);
                }
            }
        });
        for (j, c) in components.iter_mut().enumerate() {
            for (p, x) in c.iter_mut().enumerate() {
                *x = packed[p * n + j];
            }
        }
    }

    /// Explicit-stage bound `0.5 / max_x ‖∂f(v(x)) − ∂f(0)‖∞` (infinite when linear).
    pub fn dt_max(&self, state: &FieldState) -> f64 {
        if !self.nonlinear {
            return f64::INFINITY;
        }
        let n = self.system.dim();
        let worst = (0..self.grid.len())
            .into_par_iter()
            .map(|p| {
                let v: Vec<f64> = state.components.iter().map(|c| c[p]).collect();
                let d = self.system.reaction.jacobian(&v) - &self.j0;
                (0..n)
                    .map(|i| (0..n).map(|j| d[(i, j)].abs()).sum::<f64>())
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max);
        if worst > 0.0 {
            0.5 / worst
        } else {
            f64::INFINITY
        }
    }

    /// One Strang step `L(dt/2) N(dt) L(dt/2)`.
    pub fn step_imex(&mut self, state: &mut FieldState, dt: f64) -> Result<()> {
        if !(dt > 0.0) {
            return Err(Error::param("dt", format!("must be positive, got {dt}")));
        }
        let dt_max = self.dt_max(state);
        if dt > dt_max {
            return Err(Error::StepTooLarge { dt, dt_max });
        }
        self.linear_stage(&mut state.components, 0.5 * dt);
        if self.nonlinear {
            self.nonlinear_stage(&mut state.components, dt);
        }
        self.linear_stage(&mut state.components, 0.5 * dt);
        state.t += dt;
        if !state.is_finite() {
            return Err(Error::NonFinite { t: state.t });
        }
        Ok(())
    }

    /// Weight-window center at time `t`: it moves with the frame drift.
    pub fn window_center(&self, origin: f64, t: f64) -> f64 {
        origin - self.system.c * t
    }

    fn record(&self, state: &FieldState, cfg: &RunConfig) -> Result<(Vec<NormSample>, f64)> {
        let center = self.window_center(cfg.window_origin, state.t);
        let n1 = self.system.n1;
        let samples = [0, 1]
            .iter()
            .map(|&k| norms::sample(&self.grid, &state.components, n1, cfg.alpha, k, center, state.t))
            .collect::<Result<Vec<_>>>()?;
        let edge = norms::edge_mass_fraction(&self.grid, &state.components, cfg.alpha, center, 0.05);
        Ok((samples, edge))
    }

    /// Integrates from `initial` to `t_final`, recording norms every
    /// `record_every` steps and at the final time.
    pub fn run(&mut self, initial: &FieldState, cfg: &RunConfig) -> Result<RunOutput> {
        if !(cfg.t_final > 0.0) {
            return Err(Error::param("T", format!("must be positive, got {}", cfg.t_final)));
        }
        if !(cfg.dt > 0.0) {
            return Err(Error::param("dt", format!("must be positive, got {}", cfg.dt)));
        }
        if cfg.record_every == 0 {
            return Err(Error::param("record_every", "must be at least 1"));
        }
        if initial.components.len() != self.system.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.system.dim(),
                actual: initial.components.len(),
            });
        }
        let steps = (cfg.t_final / cfg.dt - 1e-9).ceil().max(1.0) as usize;
        let dt = cfg.t_final / steps as f64;
        let mut state = initial.clone();
        let mut series = NormSeries::default();
        let mut snapshots = Vec::new();
        let mut warnings = Vec::new();
        let mut contaminated = false;
        let mut records = 0usize;
        let mut push = |state: &FieldState,
                        series: &mut NormSeries,
                        snapshots: &mut Vec<FieldState>,
                        warnings: &mut Vec<String>,
                        sim: &Simulator|
         -> Result<()> {
            let (samples, edge) = sim.record(state, cfg)?;
            series.samples.extend(samples);
            if edge > CONTAMINATION_LIMIT && !contaminated {
                contaminated = true;
                warnings.push(format!(
                    "boundary contamination: weighted mass fraction {edge:.3e} within 5% of the window edge at t = {:.6}",
                    state.t
                ));
            }
            if cfg.snapshot_every > 0 && records.is_multiple_of(cfg.snapshot_every) {
                snapshots.push(state.clone());
            }
            records += 1;
            Ok(())
        };
        push(&state, &mut series, &mut snapshots, &mut warnings, self)?;
        for step in 1..=steps {
            self.step_imex(&mut state, dt)?;
            if step % cfg.record_every == 0 || step == steps {
                push(&state, &mut series, &mut snapshots, &mut warnings, self)?;
            }
        }
        Ok(RunOutput {
            series,
            snapshots,
            final_state: state,
            warnings,
            steps,
            dt,
        })
    }
}

#[derive(Serialize)]
struct SnapshotMeta<'a> {
    t: f64,
    half_length: &'a [f64],
    points: &'a [usize],
    components: usize,
    params: &'a serde_json::Value,
}

/// Writes `<stem>.csv` (coordinates then components) and `<stem>.json` metadata.
pub fn write_snapshot(dir: &Path, stem: &str, grid: &Grid, state: &FieldState, params: &serde_json::Value) -> Result<()> {
    let d = grid.space_dim();
    let mut header: Vec<String> = ["z", "y"][..d].iter().map(|s| s.to_string()).collect();
    header.extend((1..=state.components.len()).map(|j| format!("v{j}")));
    let rows = (0..grid.len()).map(|idx| {
        let ix = grid.unflatten(idx);
        let mut row: Vec<f64> = (0..d).map(|a| grid.coordinate(a, ix[a])).collect();
        row.extend(state.components.iter().map(|c| c[idx]));
        row
    });
    write_csv(&dir.join(format!("{stem}.csv")), &header, rows)?;
    let meta = SnapshotMeta {
        t: state.t,
        half_length: grid.half_length(),
        points: grid.points(),
        components: state.components.len(),
        params,
    };
    let json = serde_json::to_string_pretty(&meta).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    std::fs::write(dir.join(format!("{stem}.json")), json + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::SymbolMatrix;
    use approx::assert_relative_eq;

    fn params() -> ModelParams {
        ModelParams::new(0.5, 1.0, 1.0, 0.4).unwrap()
    }

    fn gaussian(center: f64, width: f64, amplitude: f64, mask: [bool; 2]) -> Perturbation {
        Perturbation {
            shape: Shape::Gaussian,
            amplitude,
            center: vec![center],
            widths: vec![width],
            mask: mask.to_vec(),
            target_e_norm: None,
        }
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(&[10.0], &[8]).is_err());
        assert!(Grid::new(&[10.0], &[48]).is_err());
        assert!(Grid::new(&[0.0], &[64]).is_err());
        assert!(Grid::new(&[1.0, 1.0, 1.0], &[16, 16, 16]).is_err());
        let g = Grid::new(&[10.0, 5.0], &[64, 32]).unwrap();
        assert_eq!(g.len(), 2048);
        assert_relative_eq!(g.spacing()[1], 10.0 / 32.0);
        assert_eq!(g.coordinate(0, 0), -10.0);
    }

    #[test]
    fn fft_round_trip_2d() {
        let g = Grid::new(&[3.0, 2.0], &[32, 16]).unwrap();
        let values: Vec<f64> = (0..g.len()).map(|i| ((i * 7919) % 101) as f64 / 101.0).collect();
        let mut buf = g.to_spectral(&values);
        g.ifft(&mut buf);
        for (a, b) in buf.iter().zip(&values) {
            assert!((a.re - b).abs() < 1e-13 && a.im.abs() < 1e-13);
        }
    }

    #[test]
    fn spectral_derivative_of_mode() {
        let g = Grid::new(&[std::f64::consts::PI, std::f64::consts::PI], &[32, 16]).unwrap();
        let values: Vec<f64> = (0..g.len())
            .map(|idx| {
                let [iz, iy] = g.unflatten(idx);
                (3.0 * g.coordinate(0, iz)).sin() * (2.0 * g.coordinate(1, iy)).cos()
            })
            .collect();
        let dz = g.derivative(&values, 0);
        let dy = g.derivative(&values, 1);
        for idx in 0..g.len() {
            let [iz, iy] = g.unflatten(idx);
            let (z, y) = (g.coordinate(0, iz), g.coordinate(1, iy));
            assert!((dz[idx] - 3.0 * (3.0 * z).cos() * (2.0 * y).cos()).abs() < 1e-12);
            assert!((dy[idx] + 2.0 * (3.0 * z).sin() * (2.0 * y).sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_field_stays_zero() {
        let g = Grid::new(&[20.0], &[128]).unwrap();
        let mut sim = Simulator::combustion(&params(), g.clone(), true);
        let mut s = FieldState::zeros(&g, 2);
        sim.apply_linear_exact(&mut s, 0.3).unwrap();
        for dt in [0.01, 0.5, 3.0] {
            sim.step_imex(&mut s, dt).unwrap();
        }
        assert_eq!(s.max_abs(), 0.0);
    }

    #[test]
    fn single_mode_decays_at_symbol_rate() {
        let p = params();
        let l = 8.0 * std::f64::consts::PI;
        let g = Grid::new(&[l], &[64]).unwrap();
        let mut sim = Simulator::combustion(&p, g.clone(), false);
        let xi = 3.0 * std::f64::consts::PI / l;
        let mut s = FieldState::zeros(&g, 2);
        for i in 0..g.len() {
            s.components[1][i] = (xi * g.coordinate(0, i)).cos();
        }
        let before = crate::norms::norm_unweighted(&g, &s.components[1..], 0);
        sim.apply_linear_exact(&mut s, 0.7).unwrap();
        let after = crate::norms::norm_unweighted(&g, &s.components[1..], 0);
        let lambda2 = -p.epsilon * xi * xi - p.reactant_rate();
        assert_relative_eq!(after / before, (0.7 * lambda2).exp(), epsilon = 1e-12);
    }

    #[test]
    fn modes_evolve_by_symbol_exponential() {
        let p = params();
        let l = 10.0;
        let g = Grid::new(&[l], &[32]).unwrap();
        let mut sim = Simulator::combustion(&p, g.clone(), false);
        let sym = SymbolMatrix::combustion(&p, 1, 0.0);
        let t = 0.9;
        for m in [1usize, 2, 5, 9] {
            let xi = std::f64::consts::PI * m as f64 / l;
            // complex mode e^{iξz} in both components, evolved through real and imaginary parts
            let mut re = FieldState::zeros(&g, 2);
            let mut im = FieldState::zeros(&g, 2);
            for i in 0..g.len() {
                let z = g.coordinate(0, i);
                re.components[0][i] = (xi * z).cos();
                im.components[0][i] = (xi * z).sin();
                re.components[1][i] = 0.5 * (xi * z).cos();
                im.components[1][i] = 0.5 * (xi * z).sin();
            }
            sim.apply_linear_exact(&mut re, t).unwrap();
            sim.apply_linear_exact(&mut im, t).unwrap();
            let e = (sym.eval(&[xi]).unwrap() * Complex64::new(t, 0.0)).exp();
            let v0 = [Complex64::new(1.0, 0.0), Complex64::new(0.5, 0.0)];
            for comp in 0..2 {
                let amp = e[(comp, 0)] * v0[0] + e[(comp, 1)] * v0[1];
                for i in 0..g.len() {
                    let wave = Complex64::new(0.0, xi * g.coordinate(0, i)).exp() * amp;
                    assert!((re.components[comp][i] - wave.re).abs() < 1e-10);
                    assert!((im.components[comp][i] - wave.im).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn half_steps_compose() {
        let g = Grid::new(&[20.0], &[256]).unwrap();
        let mut sim = Simulator::combustion(&params(), g.clone(), false);
        let init = build_perturbation(&g, &gaussian(0.0, 2.0, 1.0, [true, true]), 0.4).unwrap().state;
        let mut one = init.clone();
        sim.apply_linear_exact(&mut one, 0.8).unwrap();
        let mut two = init;
        sim.apply_linear_exact(&mut two, 0.4).unwrap();
        sim.apply_linear_exact(&mut two, 0.4).unwrap();
        assert!(one.max_diff(&two) < 1e-12);
    }

    #[test]
    fn reactant_block_ignores_temperature_block() {
        let g = Grid::new(&[20.0], &[128]).unwrap();
        let p = params();
        let base = build_perturbation(&g, &gaussian(1.0, 2.0, 1.0, [false, true]), 0.4).unwrap().state;
        let mut injected = base.clone();
        for (i, x) in injected.components[0].iter_mut().enumerate() {
            *x = ((i * 31) % 17) as f64 - 8.0;
        }
        let mut sim = Simulator::combustion(&p, g, false);
        let (mut a, mut b) = (base, injected);
        for _ in 0..10 {
            sim.step_imex(&mut a, 0.1).unwrap();
            sim.step_imex(&mut b, 0.1).unwrap();
        }
        let diff = a.components[1]
            .iter()
            .zip(&b.components[1])
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(diff <= 1e-14, "{diff}");
    }

    #[test]
    fn disabled_nonlinearity_matches_linear_flow() {
        let g = Grid::new(&[20.0], &[128]).unwrap();
        let mut sim = Simulator::combustion(&params(), g.clone(), false);
        let init = build_perturbation(&g, &gaussian(0.0, 2.0, 0.3, [true, true]), 0.4).unwrap().state;
        let mut a = init.clone();
        let mut b = init;
        sim.step_imex(&mut a, 0.25).unwrap();
        sim.apply_linear_exact(&mut b, 0.25).unwrap();
        assert!(a.max_diff(&b) < 1e-14);
    }

    #[test]
    fn general_system_path_matches_triangular_path() {
        let g = Grid::new(&[15.0], &[64]).unwrap();
        let p = params();
        let tri = BlockSystem::combustion(&p);
        // same system with a tiny lower entry forces the dense path; compare against zero entry
        let mut dense = Simulator::new(tri.clone(), g.clone(), false);
        dense.j0[(1, 0)] = 1e-300;
        let mut fast = Simulator::new(tri, g.clone(), false);
        let init = build_perturbation(&g, &gaussian(0.0, 2.0, 1.0, [true, true]), 0.4).unwrap().state;
        let (mut a, mut b) = (init.clone(), init);
        dense.apply_linear_exact(&mut a, 0.6).unwrap();
        fast.apply_linear_exact(&mut b, 0.6).unwrap();
        assert!(a.max_diff(&b) < 1e-12);
    }

    #[test]
    fn gaussian_norm_matches_integral() {
        let g = Grid::new(&[40.0], &[1024]).unwrap();
        for (w, a) in [(2.0, 1.0), (3.0, 0.5)] {
            let f = build_perturbation(&g, &gaussian(0.0, w, a, [true, false]), 0.4).unwrap();
            let exact = a * (std::f64::consts::PI * w * w / 2.0).powf(0.25);
            assert!((f.norm0 / exact - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn perturbation_rescale_and_errors() {
        let g = Grid::new(&[20.0], &[256]).unwrap();
        let mut pert = gaussian(0.0, 2.0, 1.0, [true, true]);
        pert.target_e_norm = Some(1e-3);
        let f = build_perturbation(&g, &pert, 0.4).unwrap();
        assert!((f.norm_e - 1e-3).abs() < 1e-15);
        pert.amplitude = 0.0;
        pert.target_e_norm = None;
        let z = build_perturbation(&g, &pert, 0.4).unwrap();
        assert_eq!((z.norm0, z.norm_alpha, z.norm_e), (0.0, 0.0, 0.0));
        let wide = gaussian(15.0, 2.0, 1.0, [true, false]);
        assert!(matches!(build_perturbation(&g, &wide, 0.4), Err(Error::SupportExceedsGrid { axis: 0 })));
        let mut bump = gaussian(0.0, 3.0, 1.0, [false, true]);
        bump.shape = Shape::Bump;
        let b = build_perturbation(&g, &bump, 0.4).unwrap();
        for i in 0..g.len() {
            if g.coordinate(0, i).abs() >= 3.0 {
                assert_eq!(b.state.components[1][i], 0.0);
            }
        }
    }

    #[test]
    fn oversized_step_is_rejected() {
        let g = Grid::new(&[20.0], &[128]).unwrap();
        let mut sim = Simulator::combustion(&params(), g.clone(), true);
        let mut s = build_perturbation(&g, &gaussian(0.0, 2.0, 3.0, [true, true]), 0.4).unwrap().state;
        let bound = sim.dt_max(&s);
        assert!(bound.is_finite());
        assert!(matches!(sim.step_imex(&mut s, 2.0 * bound), Err(Error::StepTooLarge { .. })));
    }
}
