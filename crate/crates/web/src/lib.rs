//! Browser bindings for three frontlab operations.
//!
//! Every export returns a flat `Float64Array`; the layouts are documented
//! per function and decoded in `www/app.js`.

use wasm_bindgen::prelude::*;

use frontlab::front::{bracket_scan, find_bracket, shoot_speed, ShootOptions};
use frontlab::model::ModelParams;
use frontlab::norms::{fit_decay, FitWindow};
use frontlab::sim::{build_perturbation, Grid, Perturbation, RunConfig, Shape, Simulator};
use frontlab::spectral::{abscissa_unweighted, abscissa_weighted, sweep, SymbolMatrix};

fn to_js<T>(r: Result<T, String>) -> Result<T, JsError> {
    r.map_err(|e| JsError::new(&e))
}

fn err(e: frontlab::Error) -> String {
    e.to_string()
}

/// `[abscissa_unweighted, abscissa_weighted, m]` followed by `m` rows
/// `[ξ, re λ1, im λ1, re λ2, im λ2]` of the unweighted symbol, then `m` rows
/// of the weighted one.
pub fn spectrum_curves_impl(epsilon: f64, kappa: f64, c: f64, alpha: f64, samples: usize) -> Result<Vec<f64>, String> {
    let p = ModelParams::new(epsilon, kappa, c, alpha).map_err(err)?;
    let weighted = SymbolMatrix::combustion(&p, 1, alpha);
    let extent = weighted.auto_extent();
    let count = samples.clamp(3, 4001) | 1;
    let mut out = vec![abscissa_unweighted(&p), abscissa_weighted(&p), count as f64];
    for sym in [weighted.with_alpha(0.0), weighted] {
        let s = sweep(&sym, Some(extent), count).map_err(err)?;
        for i in 0..s.samples() {
            out.push(s.xi_at(i)[0]);
            for ev in &s.eigenvalues[i] {
                out.push(ev.re);
                out.push(ev.im);
            }
        }
    }
    Ok(out)
}

/// `[fitted weighted rate, sharp weighted rate, fitted v2 rate, sharp v2 rate]`
/// followed by rows `[t, ‖v1‖₀, ‖v2‖₀, ‖v‖_α, ‖v‖_E]`.
pub fn simulate_decay_impl(
    epsilon: f64,
    kappa: f64,
    c: f64,
    alpha: f64,
    eta: f64,
    t_final: f64,
    nonlinear: bool,
) -> Result<Vec<f64>, String> {
    let p = ModelParams::new(epsilon, kappa, c, alpha).map_err(err)?;
    let grid = Grid::new(&[50.0], &[512]).map_err(err)?;
    let mut sim = Simulator::combustion(&p, grid.clone(), nonlinear);
    let pert = Perturbation {
        shape: Shape::Gaussian,
        amplitude: 1.0,
        center: vec![0.0],
        widths: vec![2.0],
        mask: vec![true, true],
        target_e_norm: Some(eta),
    };
    let init = build_perturbation(&grid, &pert, alpha).map_err(err)?;
    let cfg = RunConfig {
        t_final,
        dt: 0.05,
        record_every: 4,
        alpha,
        window_origin: 0.0,
        snapshot_every: 0,
    };
    let run = sim.run(&init.state, &cfg).map_err(err)?;
    let rate = |pick: fn(&frontlab::norms::NormSample) -> f64| {
        let (t, v) = run.series.column(0, pick);
        fit_decay(&t, &v, &FitWindow::default()).map_or(f64::NAN, |f| f.rate)
    };
    let mut out = vec![
        rate(|s| s.normalpha_v),
        p.weighted_rate(),
        rate(|s| s.norm0_v2),
        p.reactant_rate(),
    ];
    for s in run.series.at_k(0) {
        out.extend([s.t, s.norm0_v1, s.norm0_v2, s.normalpha_v, s.norm_e]);
    }
    Ok(out)
}

/// `[c*, φ1(left)]` followed by at most `max_rows` rows `[z, φ1, φ2, φ3]`
/// of the `ε = 0` front.
pub fn front_profile_impl(kappa: f64, max_rows: usize) -> Result<Vec<f64>, String> {
    let p = ModelParams {
        epsilon: 0.0,
        kappa,
        c: 1.0,
        alpha: 0.0,
    };
    p.validate_base().map_err(err)?;
    let opts = ShootOptions::default();
    let speeds: Vec<f64> = (0..60).map(|i| 0.05 + 0.05 * i as f64).collect();
    let scan = bracket_scan(&p, &speeds, &opts).map_err(err)?;
    let bracket = find_bracket(&scan).ok_or_else(|| "no speed bracket found in [0.05, 3]".to_string())?;
    let res = shoot_speed(&p, bracket, 1e-6, &opts).map_err(err)?;
    let prof = &res.profile;
    let stride = prof.z.len().div_ceil(max_rows.max(2));
    let mut out = vec![res.c_star, prof.left().phi1];
    for (z, s) in prof.z.iter().zip(&prof.states).step_by(stride.max(1)) {
        out.extend([*z, s.phi1, s.phi2, s.phi3]);
    }
    Ok(out)
}

#[wasm_bindgen]
pub fn spectrum_curves(epsilon: f64, kappa: f64, c: f64, alpha: f64, samples: usize) -> Result<Vec<f64>, JsError> {
    to_js(spectrum_curves_impl(epsilon, kappa, c, alpha, samples))
}

#[wasm_bindgen]
pub fn simulate_decay(
    epsilon: f64,
    kappa: f64,
    c: f64,
    alpha: f64,
    eta: f64,
    t_final: f64,
    nonlinear: bool,
) -> Result<Vec<f64>, JsError> {
    to_js(simulate_decay_impl(epsilon, kappa, c, alpha, eta, t_final, nonlinear))
}

#[wasm_bindgen]
pub fn front_profile(kappa: f64, max_rows: usize) -> Result<Vec<f64>, JsError> {
    to_js(front_profile_impl(kappa, max_rows))
}
