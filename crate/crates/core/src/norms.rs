//! Discrete norms, decay fits and verdicts for end-state stability runs.
//!
//! `‖v‖₀` is the discrete `H^k` norm (`k ∈ {0, 1}`), `‖v‖_α = ‖e^(αz) v‖₀`
//! and `‖v‖_E = max(‖v‖₀, ‖v‖_α)`.
//!
//! On a periodic grid a field that has drifted across the boundary has no
//! single position. Weighted norms therefore take a window center `s`: each
//! sample is assigned the coordinate `ẑ ∈ [s − L, s + L)` congruent to its
//! grid coordinate, and the weight is `e^(αẑ)`. Runs move `s` with the frame
//! drift so the window stays centered on the advected perturbation.

use std::path::Path;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::output::{write_csv, Report};
use crate::sim::{build_perturbation, Grid, Perturbation, RunConfig, Simulator};

/// Largest admissible `αẑ` on the support of a weighted field.
pub const MAX_WEIGHT_EXPONENT: f64 = 700.0;

fn sum_squares(values: &[f64]) -> f64 {
    values.iter().map(|x| x * x).sum()
}

/// `Σ_x (|v|² + k |∇v|²)` for one component, without the cell volume.
fn component_energy(grid: &Grid, values: &[f64], k: usize) -> f64 {
    let mut s = sum_squares(values);
    if k >= 1 {
        for axis in 0..grid.space_dim() {
            s += sum_squares(&grid.derivative(values, axis));
        }
    }
    s
}

/// Discrete `H^k` norm (`k = 0` or `1`) over all given components.
pub fn norm_unweighted(grid: &Grid, components: &[Vec<f64>], k: usize) -> f64 {
    debug_assert!(k <= 1);
    let total: f64 = components.iter().map(|c| component_energy(grid, c, k)).sum();
    (total * grid.cell_volume()).sqrt()
}

/// Window coordinate `ẑ ∈ [s − L, s + L)` of grid index `iz`.
pub fn window_coordinate(grid: &Grid, iz: usize, center: f64) -> f64 {
    let z = grid.coordinate(0, iz);
    if center == 0.0 {
        return z;
    }
    let l = grid.half_length()[0];
    let left = center - l;
    left + (z - left).rem_euclid(2.0 * l)
}

/// Weighted `H^k` norm with the weight window centered at `0`.
pub fn norm_weighted(grid: &Grid, components: &[Vec<f64>], alpha: f64, k: usize) -> Result<f64> {
    norm_weighted_window(grid, components, alpha, k, 0.0)
}

/// `‖e^(αẑ) v‖` in `H^k`, with `ẑ` taken in the window centered at `center`.
///
/// For `k = 1` the gradient is `e^(αẑ)(∇v + α e_z v)`, so the weight never
/// passes through a transform.
pub fn norm_weighted_window(grid: &Grid, components: &[Vec<f64>], alpha: f64, k: usize, center: f64) -> Result<f64> {
    debug_assert!(k <= 1);
    if !(alpha >= 0.0) {
        return Err(Error::param("alpha", format!("need alpha >= 0, got {alpha}")));
    }
    if alpha == 0.0 {
        return Ok(norm_unweighted(grid, components, k));
    }
    let nz = grid.points()[0];
    let exponents: Vec<f64> = (0..nz).map(|iz| alpha * window_coordinate(grid, iz, center)).collect();
    let mut top = f64::NEG_INFINITY;
    for c in components {
        for (idx, x) in c.iter().enumerate() {
            if *x != 0.0 {
                top = top.max(exponents[idx % nz]);
            }
        }
    }
    if top == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if top > MAX_WEIGHT_EXPONENT {
        return Err(Error::WeightOverflow { max_exponent: top });
    }
    // factor e^top out so the squares cannot overflow
    let weights: Vec<f64> = exponents.iter().map(|e| (e - top).exp()).collect();
    let mut total = 0.0;
    for c in components {
        let grads: Vec<Vec<f64>> = if k >= 1 {
            (0..grid.space_dim()).map(|axis| grid.derivative(c, axis)).collect()
        } else {
            Vec::new()
        };
        for (idx, x) in c.iter().enumerate() {
            let w = weights[idx % nz];
            let mut e = x * x;
            for (axis, g) in grads.iter().enumerate() {
                let d = if axis == 0 { g[idx] + alpha * x } else { g[idx] };
                e += d * d;
            }
            total += w * w * e;
        }
    }
    Ok(top.exp() * (total * grid.cell_volume()).sqrt())
}

/// `max(‖v‖₀, ‖v‖_α)` with the window centered at `0`.
pub fn norm_e(grid: &Grid, components: &[Vec<f64>], alpha: f64, k: usize) -> Result<f64> {
    Ok(norm_unweighted(grid, components, k).max(norm_weighted(grid, components, alpha, k)?))
}

/// Share of `Σ e^(2αẑ)|v|²` carried by samples within `fraction` of either window edge.
pub fn edge_mass_fraction(grid: &Grid, components: &[Vec<f64>], alpha: f64, center: f64, fraction: f64) -> f64 {
    let nz = grid.points()[0];
    let l = grid.half_length()[0];
    let band = 2.0 * l * fraction;
    let zs: Vec<f64> = (0..nz).map(|iz| window_coordinate(grid, iz, center)).collect();
    let top = zs.iter().fold(f64::NEG_INFINITY, |m, z| m.max(alpha * z));
    let (mut edge, mut total) = (0.0, 0.0);
    for c in components {
        for (idx, x) in c.iter().enumerate() {
            let z = zs[idx % nz];
            let m = (2.0 * (alpha * z - top)).exp() * x * x;
            total += m;
            if z < center - l + band || z >= center + l - band {
                edge += m;
            }
        }
    }
    if total > 0.0 {
        edge / total
    } else {
        0.0
    }
}

/// One row of a norm table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormSample {
    pub t: f64,
    pub k: usize,
    pub norm0_v1: f64,
    pub norm0_v2: f64,
    pub norm0_v: f64,
    pub normalpha_v: f64,
    pub norm_e: f64,
}

pub(crate) fn sample(
    grid: &Grid,
    components: &[Vec<f64>],
    n1: usize,
    alpha: f64,
    k: usize,
    center: f64,
    t: f64,
) -> Result<NormSample> {
    let vol = grid.cell_volume();
    let e1: f64 = components[..n1].iter().map(|c| component_energy(grid, c, k)).sum();
    let e2: f64 = components[n1..].iter().map(|c| component_energy(grid, c, k)).sum();
    let norm0_v = ((e1 + e2) * vol).sqrt();
    let normalpha_v = norm_weighted_window(grid, components, alpha, k, center)?;
    Ok(NormSample {
        t,
        k,
        norm0_v1: (e1 * vol).sqrt(),
        norm0_v2: (e2 * vol).sqrt(),
        norm0_v,
        normalpha_v,
        norm_e: norm0_v.max(normalpha_v),
    })
}

/// Norm table of a run, rows ordered by time then `k`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NormSeries {
    pub samples: Vec<NormSample>,
}

impl NormSeries {
    pub const CSV_HEADER: [&'static str; 7] = ["t", "norm0_v1", "norm0_v2", "norm0_v", "normalpha_v", "normE_v", "k"];

    pub fn at_k(&self, k: usize) -> impl Iterator<Item = &NormSample> + '_ {
        self.samples.iter().filter(move |s| s.k == k)
    }

    pub fn column(&self, k: usize, pick: impl Fn(&NormSample) -> f64) -> (Vec<f64>, Vec<f64>) {
        self.at_k(k).map(|s| (s.t, pick(s))).unzip()
    }

    pub fn first(&self, k: usize) -> Option<&NormSample> {
        self.at_k(k).next()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let header: Vec<String> = Self::CSV_HEADER.iter().map(|s| s.to_string()).collect();
        let rows = self.samples.iter().map(|s| {
            [s.t, s.norm0_v1, s.norm0_v2, s.norm0_v, s.normalpha_v, s.norm_e, s.k as f64]
        });
        write_csv(path, &header, rows)
    }
}

/// Which samples a decay fit uses.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitWindow {
    /// Leading fraction of samples treated as transient.
    pub skip_fraction: f64,
    pub t_start: Option<f64>,
    pub t_end: Option<f64>,
}

impl Default for FitWindow {
    fn default() -> Self {
        FitWindow {
            skip_fraction: 0.1,
            t_start: None,
            t_end: None,
        }
    }
}

/// Least-squares fit `value ≈ K e^(−νt)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayFit {
    pub rate: f64,
    pub amplitude: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub samples: usize,
    /// Set when the fit could not be computed normally.
    pub note: Option<String>,
}

pub const MIN_FIT_SAMPLES: usize = 10;

/// Fits a line to `(t, ln value)` over the window.
///
/// Values that reached zero yield the `+∞` rate sentinel with a note
/// instead of an error.
pub fn fit_decay(times: &[f64], values: &[f64], window: &FitWindow) -> Result<DecayFit> {
    if times.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            actual: values.len(),
        });
    }
    let skip = (window.skip_fraction.clamp(0.0, 1.0) * times.len() as f64).floor() as usize;
    let picked: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .skip(skip)
        .filter(|(t, _)| window.t_start.is_none_or(|a| **t >= a) && window.t_end.is_none_or(|b| **t <= b))
        .map(|(t, v)| (*t, *v))
        .collect();
    if picked.len() < MIN_FIT_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_FIT_SAMPLES,
            got: picked.len(),
        });
    }
    let span = (picked[0].0, picked[picked.len() - 1].0);
    if let Some((t, v)) = picked.iter().find(|(_, v)| !(*v > 0.0)) {
        return Ok(DecayFit {
            rate: f64::INFINITY,
            amplitude: 0.0,
            r_squared: f64::NAN,
            window: span,
            samples: picked.len(),
            note: Some(format!("nonpositive value {v:e} at t = {t}: decayed to zero")),
        });
    }
    let n = picked.len() as f64;
    let mean_t = picked.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = picked.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for (t, v) in &picked {
        let (dt, dy) = (t - mean_t, v.ln() - mean_y);
        stt += dt * dt;
        sty += dt * dy;
        syy += dy * dy;
    }
    let slope = if picked.iter().all(|p| p.1 == picked[0].1) { 0.0 } else { sty / stt };
    let intercept = mean_y - slope * mean_t;
    let ss_res: f64 = picked
        .iter()
        .map(|(t, v)| (v.ln() - (intercept + slope * t)).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(DecayFit {
        rate: -slope,
        amplitude: intercept.exp(),
        r_squared,
        window: span,
        samples: picked.len(),
        note: None,
    })
}

/// Thresholds for the verdict items.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerifyTargets {
    /// Bound on `sup ‖v‖_E` (item 2).
    pub delta: f64,
    /// Fraction of the sharp rates a fitted rate must reach.
    pub rate_floor: f64,
    /// Sharp weighted rate `cα − α²` (item 3).
    pub weighted_rate: f64,
    /// Sharp reactant rate `κ e^(−κ)` (item 5).
    pub reactant_rate: f64,
    /// Allowed `sup ‖v1‖₀ / ‖v⁰‖_E` (item 4).
    pub v1_factor: f64,
    pub window: FitWindow,
}

impl VerifyTargets {
    pub fn for_params(params: &ModelParams, eta: f64) -> Self {
        VerifyTargets {
            delta: 10.0 * eta,
            rate_floor: 0.8,
            weighted_rate: params.weighted_rate(),
            reactant_rate: params.reactant_rate(),
            v1_factor: 10.0,
            window: FitWindow::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ItemVerdict {
    pub item: u8,
    pub name: &'static str,
    pub passed: bool,
    pub measured: Vec<(&'static str, f64)>,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub eta: f64,
    pub items: Vec<ItemVerdict>,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        self.items.iter().all(|i| i.passed)
    }

    pub fn item(&self, n: u8) -> Option<&ItemVerdict> {
        self.items.iter().find(|i| i.item == n)
    }

    pub fn report(&self) -> Report {
        let mut r = Report::new();
        r.push_f64("eta", self.eta);
        for it in &self.items {
            let key = format!("item{}_{}", it.item, it.name);
            r.push(format!("{key}.verdict"), if it.passed { "pass" } else { "fail" });
            for (k, v) in &it.measured {
                r.push_f64(format!("{key}.{k}"), *v);
            }
            if let Some(note) = &it.note {
                r.push(format!("{key}.note"), note);
            }
        }
        r.push("verdict", if self.passed() { "pass" } else { "fail" });
        r
    }
}

fn rate_item(
    item: u8,
    name: &'static str,
    times: &[f64],
    values: &[f64],
    sharp: f64,
    targets: &VerifyTargets,
) -> Result<(ItemVerdict, Option<DecayFit>)> {
    if values.first().is_none_or(|v| *v == 0.0) {
        return Ok((
            ItemVerdict {
                item,
                name,
                passed: true,
                measured: vec![("fitted_rate", 0.0), ("sharp_rate", sharp)],
                note: Some("zero initial data".into()),
            },
            None,
        ));
    }
    let fit = fit_decay(times, values, &targets.window)?;
    let floor = targets.rate_floor * sharp;
    Ok((
        ItemVerdict {
            item,
            name,
            passed: fit.rate >= floor,
            measured: vec![
                ("fitted_rate", fit.rate),
                ("sharp_rate", sharp),
                ("required_rate", floor),
                ("fit_amplitude", fit.amplitude),
                ("r_squared", fit.r_squared),
            ],
            note: fit.note.clone(),
        },
        Some(fit),
    ))
}

/// Evaluates the verdict items on the `k = 0` rows of a series.
pub fn verify(series: &NormSeries, eta: f64, targets: &VerifyTargets) -> Result<Verdict> {
    let (times, e) = series.column(0, |s| s.norm_e);
    let (_, weighted) = series.column(0, |s| s.normalpha_v);
    let (_, v1) = series.column(0, |s| s.norm0_v1);
    let (_, v2) = series.column(0, |s| s.norm0_v2);
    if times.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let sup = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    let e0 = e[0];
    let mut items = Vec::new();

    let sup_e = sup(&e);
    items.push(ItemVerdict {
        item: 2,
        name: "smallness",
        passed: sup_e <= targets.delta,
        measured: vec![("sup_norm_e", sup_e), ("delta", targets.delta)],
        note: None,
    });

    let (mut weighted_item, fit) = rate_item(3, "weighted_decay", &times, &weighted, targets.weighted_rate, targets)?;
    if let Some(fit) = fit.filter(|f| f.rate.is_finite()) {
        let c = times
            .iter()
            .zip(&weighted)
            .map(|(t, w)| w * (fit.rate * t).exp() / weighted[0])
            .fold(0.0, f64::max);
        weighted_item.measured.push(("decay_constant", c));
    }
    items.push(weighted_item);

    let ratio = if e0 > 0.0 { sup(&v1) / e0 } else { 0.0 };
    items.push(ItemVerdict {
        item: 4,
        name: "v1_bounded",
        passed: ratio <= targets.v1_factor,
        measured: vec![("sup_norm0_v1", sup(&v1)), ("ratio_to_initial_e", ratio)],
        note: None,
    });

    items.push(rate_item(5, "v2_decay", &times, &v2, targets.reactant_rate, targets)?.0);
    Ok(Verdict { eta, items })
}

/// [`verify`] with default thresholds, the reactant rate of `params` and
/// the weighted target rate `nu_expected`.
pub fn verify_theorem_2_1(series: &NormSeries, params: &ModelParams, eta: f64, delta: f64, nu_expected: f64) -> Result<Verdict> {
    let targets = VerifyTargets {
        delta,
        weighted_rate: nu_expected,
        ..VerifyTargets::for_params(params, eta)
    };
    verify(series, eta, &targets)
}

/// One amplitude of an instability scan.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanPoint {
    pub eta: f64,
    pub sup_norm_e: f64,
    pub bounded: bool,
}

/// Doubles `‖v⁰‖_E` from `eta0` until `sup ‖v‖_E ≤ delta` fails (or the run
/// blows up); returns the visited amplitudes and the last bounded one.
pub fn instability_scan(
    sim: &mut Simulator,
    perturbation: &Perturbation,
    cfg: &RunConfig,
    delta: f64,
    eta0: f64,
    max_doublings: usize,
) -> Result<(Vec<ScanPoint>, Option<f64>)> {
    let mut points = Vec::new();
    let mut last_ok = None;
    let mut eta = eta0;
    for _ in 0..=max_doublings {
        let pert = Perturbation {
            target_e_norm: Some(eta),
            ..perturbation.clone()
        };
        let init = build_perturbation(sim.grid(), &pert, cfg.alpha)?;
        let sup_e = match sim.run(&init.state, cfg) {
            Ok(out) => out.series.at_k(0).map(|s| s.norm_e).fold(0.0, f64::max),
            Err(Error::NonFinite { .. }) | Err(Error::StepTooLarge { .. }) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        let bounded = sup_e <= delta;
        points.push(ScanPoint {
            eta,
            sup_norm_e: sup_e,
            bounded,
        });
        if !bounded {
            break;
        }
        last_ok = Some(eta);
        eta *= 2.0;
    }
    Ok((points, last_ok))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid1(l: f64, n: usize) -> Grid {
        Grid::new(&[l], &[n]).unwrap()
    }

    fn bump(grid: &Grid, center: f64, width: f64) -> Vec<f64> {
        (0..grid.len())
            .map(|i| {
                let z = grid.coordinate(0, i);
                (-((z - center) / width).powi(2)).exp()
            })
            .collect()
    }

    #[test]
    fn zero_and_constant_fields() {
        let g = grid1(5.0, 64);
        assert_eq!(norm_unweighted(&g, &[vec![0.0; 64]], 0), 0.0);
        assert_eq!(norm_weighted(&g, &[vec![0.0; 64]], 0.3, 1).unwrap(), 0.0);
        let a = 1.7;
        assert_relative_eq!(norm_unweighted(&g, &[vec![a; 64]], 0), a * 10f64.sqrt(), epsilon = 1e-13);
        assert_relative_eq!(norm_unweighted(&g, &[vec![a; 64]], 1), a * 10f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn h1_norm_of_single_mode() {
        let l = std::f64::consts::PI;
        let g = grid1(l, 64);
        let xi = 3.0;
        let a = 0.8;
        let v: Vec<f64> = (0..64).map(|i| a * (xi * g.coordinate(0, i)).cos()).collect();
        let expected = a * (2.0 * l * (1.0 + xi * xi) / 2.0).sqrt();
        assert_relative_eq!(norm_unweighted(&g, &[v], 1), expected, epsilon = 1e-12);
    }

    #[test]
    fn weighted_norm_properties() {
        let g = grid1(30.0, 512);
        let v = bump(&g, -10.0, 2.0);
        let plain = norm_unweighted(&g, std::slice::from_ref(&v), 0);
        assert_eq!(norm_weighted(&g, std::slice::from_ref(&v), 0.0, 0).unwrap(), plain);
        for alpha in [0.1, 0.4, 1.0] {
            assert!(norm_weighted(&g, std::slice::from_ref(&v), alpha, 0).unwrap() <= plain);
            assert_eq!(norm_e(&g, std::slice::from_ref(&v), alpha, 0).unwrap(), plain);
        }
        let right = bump(&g, 10.0, 2.0);
        let w = norm_weighted(&g, std::slice::from_ref(&right), 0.4, 0).unwrap();
        assert_eq!(norm_e(&g, &[right], 0.4, 0).unwrap(), w);
        assert!(w > plain);
    }

    #[test]
    fn shift_multiplies_weighted_norm() {
        let g = grid1(30.0, 512);
        let h = g.spacing()[0];
        let shift = 40.0 * h;
        let a = bump(&g, -5.0, 2.0);
        let b = bump(&g, -5.0 + shift, 2.0);
        for k in [0, 1] {
            let na = norm_weighted(&g, std::slice::from_ref(&a), 0.3, k).unwrap();
            let nb = norm_weighted(&g, std::slice::from_ref(&b), 0.3, k).unwrap();
            assert_relative_eq!(nb / na, (0.3 * shift).exp(), epsilon = 1e-10);
        }
    }

    #[test]
    fn window_follows_wrapped_field() {
        let g = grid1(20.0, 256);
        // field centered at -25 lives at +15 on the grid
        let wrapped = bump(&g, 15.0, 1.0);
        let honest = norm_weighted_window(&g, std::slice::from_ref(&wrapped), 0.4, 0, -25.0).unwrap();
        let reference = norm_weighted(&g, &[bump(&g, 0.0, 1.0)], 0.4, 0).unwrap() * (-0.4f64 * 25.0).exp();
        assert_relative_eq!(honest, reference, epsilon = 1e-10);
        assert!(norm_weighted(&g, &[wrapped], 0.4, 0).unwrap() > 1e3 * honest);
    }

    #[test]
    fn overflow_guard() {
        let g = grid1(1000.0, 1024);
        let v = bump(&g, 900.0, 10.0);
        assert!(matches!(norm_weighted(&g, &[v], 1.0, 0), Err(Error::WeightOverflow { .. })));
    }

    #[test]
    fn fit_examples() {
        let t: Vec<f64> = (0..100).map(|i| i as f64 * 0.3).collect();
        let y: Vec<f64> = t.iter().map(|t| 3.0 * (-0.7 * t).exp()).collect();
        let fit = fit_decay(&t, &y, &FitWindow::default()).unwrap();
        assert_relative_eq!(fit.rate, 0.7, epsilon = 1e-12);
        assert_relative_eq!(fit.amplitude, 3.0, epsilon = 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);

        let t: Vec<f64> = (0..400).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().map(|t| (-t).exp() * (2.0 + t.cos())).collect();
        let fit = fit_decay(&t, &y, &FitWindow::default()).unwrap();
        assert!((fit.rate - 1.0).abs() < 0.1);

        let fit = fit_decay(&t, &vec![2.5; t.len()], &FitWindow::default()).unwrap();
        assert_eq!(fit.rate, 0.0);

        let mut z = vec![1.0; 20];
        z[15] = 0.0;
        let fit = fit_decay(&t[..20], &z, &FitWindow::default()).unwrap();
        assert_eq!(fit.rate, f64::INFINITY);
        assert!(fit.note.is_some());
        assert!(matches!(fit_decay(&t[..9], &z[..9], &FitWindow::default()), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn csv_header_matches_schema() {
        let series = NormSeries {
            samples: vec![NormSample {
                t: 0.0,
                k: 1,
                norm0_v1: 1.0,
                norm0_v2: 0.0,
                norm0_v: 1.0,
                normalpha_v: 0.5,
                norm_e: 1.0,
            }],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("norms.csv");
        series.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert!(text.starts_with("t,norm0_v1,norm0_v2,norm0_v,normalpha_v,normE_v,k\n"));
        assert!(text.trim_end().ends_with(",1.0000000000000000e0"));
    }

    #[test]
    fn zero_data_passes_with_zero_constants() {
        let params = ModelParams::new(0.5, 1.0, 1.0, 0.4).unwrap();
        let series = NormSeries {
            samples: (0..20)
                .map(|i| NormSample {
                    t: i as f64,
                    k: 0,
                    norm0_v1: 0.0,
                    norm0_v2: 0.0,
                    norm0_v: 0.0,
                    normalpha_v: 0.0,
                    norm_e: 0.0,
                })
                .collect(),
        };
        let v = verify_theorem_2_1(&series, &params, 0.0, 1e-2, params.weighted_rate()).unwrap();
        assert!(v.passed());
        assert_eq!(v.report().get("verdict"), Some("pass"));
    }

    #[test]
    fn scan_locates_threshold_and_verdict_reports_it() {
        let params = ModelParams::new(0.5, 1.0, 1.0, 0.4).unwrap();
        let grid = grid1(25.0, 256);
        let mut sim = Simulator::combustion(&params, grid.clone(), true);
        let pert = Perturbation {
            shape: crate::sim::Shape::Gaussian,
            amplitude: 1.0,
            center: vec![0.0],
            widths: vec![2.0],
            mask: vec![true, true],
            target_e_norm: None,
        };
        let cfg = RunConfig {
            t_final: 5.0,
            dt: 0.05,
            record_every: 2,
            alpha: 0.4,
            window_origin: 0.0,
            snapshot_every: 0,
        };
        let delta = 1e-2;
        let (points, threshold) = instability_scan(&mut sim, &pert, &cfg, delta, 1e-4, 12).unwrap();
        let threshold = threshold.unwrap();
        assert!(points.iter().filter(|p| p.bounded).all(|p| p.sup_norm_e <= delta));
        let above = points.last().unwrap();
        assert!(!above.bounded && above.eta == 2.0 * threshold);

        let init = build_perturbation(&grid, &Perturbation { target_e_norm: Some(above.eta), ..pert }, 0.4).unwrap();
        let out = sim.run(&init.state, &cfg).unwrap();
        let verdict = verify_theorem_2_1(&out.series, &params, above.eta, delta, params.weighted_rate()).unwrap();
        assert!(!verdict.item(2).unwrap().passed);
        assert_eq!(verdict.report().get("item2_smallness.verdict"), Some("fail"));
    }
}
