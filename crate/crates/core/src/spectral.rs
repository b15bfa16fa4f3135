//! Fourier symbols of the linearized operators, spectral abscissas and exact
//! per-mode propagators.
//!
//! With diffusion `D`, drift `c` along `z` and zero-order matrix `B`, the
//! linearization in the weighted space `e^(αz)` has the symbol
//!
//! ```text
//! N(ξ) = −|ξ|² D + (icξ₁ − αc) I + (α² − 2iξ₁α) D + B
//! ```
//!
//! which reduces to the unweighted `M(ξ) = −|ξ|² D + icξ₁ I + B` at `α = 0`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{BlockSystem, ModelParams};
use crate::output::write_csv;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Symbol of `D Δ + c ∂z + B` conjugated by the weight `e^(αz)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolMatrix {
    pub space_dim: usize,
    /// Diagonal of `D`.
    pub diffusion: Vec<f64>,
    pub c: f64,
    /// `B = ∂f(u−)`.
    pub zero_order: DMatrix<f64>,
    pub alpha: f64,
}

impl SymbolMatrix {
    pub fn new(space_dim: usize, diffusion: Vec<f64>, c: f64, zero_order: DMatrix<f64>, alpha: f64) -> Result<Self> {
        if space_dim == 0 {
            return Err(Error::param("space_dim", "must be at least 1"));
        }
        let n = diffusion.len();
        if zero_order.nrows() != n || zero_order.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: zero_order.nrows(),
            });
        }
        Ok(SymbolMatrix {
            space_dim,
            diffusion,
            c,
            zero_order,
            alpha,
        })
    }

    /// Combustion linearization about the burned state.
    pub fn combustion(params: &ModelParams, space_dim: usize, alpha: f64) -> Self {
        let j = params.jacobian_at_burned();
        SymbolMatrix {
            space_dim: space_dim.max(1),
            diffusion: vec![1.0, params.epsilon],
            c: params.c,
            zero_order: DMatrix::from_row_slice(2, 2, &[j[0][0], j[0][1], j[1][0], j[1][1]]),
            alpha,
        }
    }

    pub fn from_block_system(sys: &BlockSystem, space_dim: usize, alpha: f64) -> Self {
        SymbolMatrix {
            space_dim: space_dim.max(1),
            diffusion: sys.diffusion(),
            c: sys.c,
            zero_order: sys.jacobian_at_rest(),
            alpha,
        }
    }

    pub fn dim(&self) -> usize {
        self.diffusion.len()
    }

    /// Same operator with a different weight exponent.
    pub fn with_alpha(&self, alpha: f64) -> Self {
        SymbolMatrix {
            alpha,
            ..self.clone()
        }
    }

    pub fn with_space_dim(&self, space_dim: usize) -> Self {
        SymbolMatrix {
            space_dim,
            ..self.clone()
        }
    }

    /// Upper triangular for every `ξ` exactly when `B` is.
    pub fn is_upper_triangular(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..i).all(|j| self.zero_order[(i, j)] == 0.0))
    }

    /// Diagonal entry `j` of the symbol at `ξ`.
    fn diagonal_entry(&self, j: usize, xi_sq: f64, xi1: f64) -> Complex64 {
        let d = self.diffusion[j];
        let a = self.alpha;
        Complex64::new(
            -xi_sq * d - a * self.c + a * a * d + self.zero_order[(j, j)],
            self.c * xi1 - 2.0 * xi1 * a * d,
        )
    }

    fn check_xi(&self, xi: &[f64]) -> Result<(f64, f64)> {
        if xi.len() != self.space_dim {
            return Err(Error::DimensionMismatch {
                expected: self.space_dim,
                actual: xi.len(),
            });
        }
        Ok((xi.iter().map(|x| x * x).sum(), xi[0]))
    }

    pub fn eval(&self, xi: &[f64]) -> Result<DMatrix<Complex64>> {
        let (xi_sq, xi1) = self.check_xi(xi)?;
        let n = self.dim();
        let mut m = self.zero_order.map(|b| Complex64::new(b, 0.0));
        for j in 0..n {
            m[(j, j)] = self.diagonal_entry(j, xi_sq, xi1);
        }
        Ok(m)
    }

    /// Eigenvalues sorted by descending real part (ties by descending imaginary part).
    ///
    /// Triangular symbols return their diagonal; anything else goes through a
    /// dense complex Schur decomposition.
    pub fn eigenvalues(&self, xi: &[f64]) -> Result<Vec<Complex64>> {
        let (xi_sq, xi1) = self.check_xi(xi)?;
        let mut ev: Vec<Complex64> = if self.is_upper_triangular() {
            (0..self.dim()).map(|j| self.diagonal_entry(j, xi_sq, xi1)).collect()
        } else {
            dense_eigenvalues(self.eval(xi)?).ok_or_else(|| Error::EigenNonConvergence { xi: xi.to_vec() })?
        };
        sort_eigenvalues(&mut ev);
        Ok(ev)
    }

    /// `max_j (D_j α² − cα + B_jj)` for triangular symbols, `None` otherwise.
    ///
    /// Each diagonal curve is a downward parabola in `|ξ|` with its vertex at
    /// `ξ = 0`.
    pub fn closed_form_abscissa(&self) -> Option<f64> {
        if !self.is_upper_triangular() {
            return None;
        }
        (0..self.dim())
            .map(|j| self.diagonal_entry(j, 0.0, 0.0).re)
            .reduce(f64::max)
    }

    /// Per-axis extent beyond which no eigenvalue can reach within `1e−9` of
    /// the value realized at `ξ = 0`.
    ///
    /// Uses Gershgorin discs: off-diagonal entries of the symbol do not depend
    /// on `ξ`, so row `i` is confined to real parts below
    /// `−D_i |ξ|² + Re N_ii(0) + Σ_j |B_ij|`. Falls back to 20 when some
    /// diffusion coefficient vanishes.
    pub fn auto_extent(&self) -> f64 {
        const FALLBACK: f64 = 20.0;
        let n = self.dim();
        let d_min = self.diffusion.iter().copied().fold(f64::INFINITY, f64::min);
        if !(d_min > 0.0) {
            return FALLBACK;
        }
        let zero = vec![0.0; self.space_dim];
        let at_zero = match self.eigenvalues(&zero) {
            Ok(ev) => ev[0].re,
            Err(_) => return FALLBACK,
        };
        let disc_top = (0..n)
            .map(|i| {
                let radius: f64 = (0..n).filter(|&j| j != i).map(|j| self.zero_order[(i, j)].abs()).sum();
                self.diagonal_entry(i, 0.0, 0.0).re + radius
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let gap = (disc_top - at_zero).max(0.0) + 1e-9;
        (gap / d_min).sqrt().max(4.0)
    }
}

fn dense_eigenvalues(m: DMatrix<Complex64>) -> Option<Vec<Complex64>> {
    let schur = m.try_schur(1e-14, 10_000)?;
    let (_, t) = schur.unpack();
    Some((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

fn sort_eigenvalues(ev: &mut [Complex64]) {
    ev.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
}

/// Spectral abscissa of the unweighted combustion linearization: `0`.
///
/// The diffusive curve `−|ξ|² + icξ₁` touches the imaginary axis at `ξ = 0`
/// and the reactant curve sits strictly to the left.
pub fn abscissa_unweighted(params: &ModelParams) -> f64 {
    0f64.max(-params.reactant_rate())
}

/// `max(α² − cα, εα² − cα − κe^(−κ))`, evaluated for any `α ≥ 0`.
pub fn abscissa_weighted(params: &ModelParams) -> f64 {
    let (a, c) = (params.alpha, params.c);
    (a * a - c * a).max(params.epsilon * a * a - c * a - params.reactant_rate())
}

/// Minimizer `α* = c/2` of `α² − cα` and the abscissa `−c²/4` it attains.
pub fn optimal_weight(c: f64) -> Result<(f64, f64)> {
    if !(c > 0.0) {
        return Err(Error::param("c", format!("need c > 0, got {c}")));
    }
    Ok((0.5 * c, -0.25 * c * c))
}

/// Abscissas of the temperature block (`0`) and the reactant block (`−κe^(−κ)`).
pub fn block_abscissas(params: &ModelParams) -> (f64, f64) {
    (0.0, -params.reactant_rate())
}

/// Sampled eigenvalue curves of a symbol over a tensor grid in `ξ`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumSweep {
    pub space_dim: usize,
    pub extent: f64,
    pub count: usize,
    /// Sample points, `space_dim` values per sample.
    pub xi: Vec<f64>,
    /// Eigenvalues per sample, sorted by descending real part.
    pub eigenvalues: Vec<Vec<Complex64>>,
    pub realized_abscissa: f64,
    pub closed_form_abscissa: Option<f64>,
    /// Grid spacing, the explicit uncertainty of a sweep-only abscissa.
    pub resolution: f64,
}

impl SpectrumSweep {
    pub fn samples(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn xi_at(&self, i: usize) -> &[f64] {
        &self.xi[i * self.space_dim..(i + 1) * self.space_dim]
    }

    pub fn csv_header(&self) -> Vec<String> {
        let n = self.eigenvalues.first().map_or(0, |e| e.len());
        let mut h: Vec<String> = (1..=self.space_dim).map(|j| format!("xi_{j}")).collect();
        for j in 1..=n {
            h.push(format!("re_lambda_{j}"));
            h.push(format!("im_lambda_{j}"));
        }
        h
    }

    pub fn rows(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.samples()).map(move |i| {
            let mut row = self.xi_at(i).to_vec();
            for ev in &self.eigenvalues[i] {
                row.push(ev.re);
                row.push(ev.im);
            }
            row
        })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_csv(path, &self.csv_header(), self.rows())
    }
}

/// Axis grid `ξ_j = R (2j/(m−1) − 1)`; odd `m` puts `ξ = 0` on the grid exactly.
pub fn axis_grid(extent: f64, count: usize) -> Vec<f64> {
    let half = (count - 1) as f64 / 2.0;
    (0..count)
        .map(|j| {
            let s = j as f64 - half;
            if s == 0.0 {
                0.0
            } else {
                extent * s / half
            }
        })
        .collect()
}

/// Samples the symbol on an `m^d` grid of extent `extent` (or [`SymbolMatrix::auto_extent`]).
pub fn sweep(sym: &SymbolMatrix, extent: Option<f64>, count: usize) -> Result<SpectrumSweep> {
    if count < 3 {
        return Err(Error::param("m", format!("need at least 3 samples per axis, got {count}")));
    }
    let extent = extent.unwrap_or_else(|| sym.auto_extent());
    if !(extent > 0.0) {
        return Err(Error::param("R", format!("need R > 0, got {extent}")));
    }
    let d = sym.space_dim;
    let axis = axis_grid(extent, count);
    let total = count
        .checked_pow(d as u32)
        .ok_or_else(|| Error::param("m", "grid too large"))?;
    let points: Vec<Vec<f64>> = (0..total)
        .map(|mut idx| {
            let mut p = vec![0.0; d];
            for slot in p.iter_mut() {
                *slot = axis[idx % count];
                idx /= count;
            }
            p
        })
        .collect();
    let eigenvalues = points
        .par_iter()
        .map(|p| sym.eigenvalues(p))
        .collect::<Result<Vec<_>>>()?;
    let realized_abscissa = eigenvalues
        .iter()
        .map(|ev| ev[0].re)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(SpectrumSweep {
        space_dim: d,
        extent,
        count,
        xi: points.concat(),
        eigenvalues,
        realized_abscissa,
        closed_form_abscissa: sym.closed_form_abscissa(),
        resolution: 2.0 * extent / (count - 1) as f64,
    })
}

/// Comparison of the `d = 2` weighted spectrum against its `d = 1` slice.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorSumReport {
    pub abscissa_1d: f64,
    pub abscissa_2d: f64,
    pub difference: f64,
    /// Largest deviation of `λ(ξ₁, η)` from `λ₁(ξ₁) − D_j η²` over the 2-D grid.
    pub additivity_error: f64,
    /// Largest deviation of the `η = 0` slice from the 1-D sweep.
    pub slice_error: f64,
    pub passed: bool,
}

/// Checks that transverse frequencies only shift the spectrum leftward.
pub fn tensor_sum_check(params: &ModelParams, extent: f64, count: usize) -> Result<TensorSumReport> {
    const TOL: f64 = 1e-10;
    let sym1 = SymbolMatrix::combustion(params, 1, params.alpha);
    let sym2 = sym1.with_space_dim(2);
    let s1 = sweep(&sym1, Some(extent), count)?;
    let s2 = sweep(&sym2, Some(extent), count)?;
    let mut additivity_error: f64 = 0.0;
    let mut slice_error: f64 = 0.0;
    for i in 0..s2.samples() {
        let p = s2.xi_at(i);
        let (ix, eta) = (i % count, p[1]);
        // triangular: compare diagonal entries by position rather than sorted order
        for j in 0..sym1.dim() {
            let base = sym1.diagonal_entry(j, p[0] * p[0], p[0]);
            let full = sym2.diagonal_entry(j, p[0] * p[0] + eta * eta, p[0]);
            let shift = Complex64::new(-sym1.diffusion[j] * eta * eta, 0.0);
            additivity_error = additivity_error.max((full - (base + shift)).norm());
        }
        if eta == 0.0 {
            for (a, b) in s2.eigenvalues[i].iter().zip(&s1.eigenvalues[ix]) {
                slice_error = slice_error.max((a - b).norm());
            }
        }
    }
    let difference = (s2.realized_abscissa - s1.realized_abscissa).abs();
    Ok(TensorSumReport {
        abscissa_1d: s1.realized_abscissa,
        abscissa_2d: s2.realized_abscissa,
        difference,
        additivity_error,
        slice_error,
        passed: difference <= TOL && slice_error == 0.0 && additivity_error <= TOL,
    })
}

/// `φ₁(z) = (e^z − 1)/z`, with `φ₁(0) = 1`.
///
/// A Taylor series is used for `|z| < 0.5`, where the direct quotient loses
/// digits to cancellation.
pub fn phi1(z: Complex64) -> Complex64 {
    if z.norm() < 0.5 {
        let mut term = ONE;
        let mut sum = ONE;
        for k in 2..=20 {
            term = term * z / k as f64;
            sum += term;
            if term.norm() < 1e-18 {
                break;
            }
        }
        sum
    } else {
        (z.exp() - ONE) / z
    }
}

/// `exp(t ((a, b), (0, d)))` in closed form.
///
/// The off-diagonal entry `b (e^(at) − e^(dt))/(a − d)` is written as
/// `b t e^(dt) φ₁((a − d) t)`, which is accurate through the confluent case
/// `a = d`.
pub fn expm_triangular_2x2(a: Complex64, b: Complex64, d: Complex64, t: f64) -> [[Complex64; 2]; 2] {
    let ea = (a * t).exp();
    let ed = (d * t).exp();
    let off = b * t * ed * phi1((a - d) * t);
    [[ea, off], [ZERO, ed]]
}

/// Largest singular value of a complex 2×2 matrix.
pub fn spectral_norm_2x2(m: &[[Complex64; 2]; 2]) -> f64 {
    let fro: f64 = m.iter().flatten().map(|x| x.norm_sqr()).sum();
    let det = (m[0][0] * m[1][1] - m[0][1] * m[1][0]).norm();
    let disc = (fro * fro - 4.0 * det * det).max(0.0);
    (0.5 * (fro + disc.sqrt())).sqrt()
}

/// Largest singular value of a dense complex matrix.
pub fn spectral_norm(m: &DMatrix<Complex64>) -> f64 {
    m.clone()
        .singular_values()
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// Fitted semigroup envelope `‖e^(tN(ξ))‖ ≤ K e^(−νt)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Envelope {
    pub k_est: f64,
    pub nu: f64,
}

pub const DEFAULT_ENVELOPE_CAP: f64 = 1e6;

/// `K_est = max e^(νt) ‖exp(t N(ξ))‖` over the sample grid with the sharp
/// `ν = −abscissa_weighted`.
pub fn semigroup_envelope(params: &ModelParams, t_grid: &[f64], xi_grid: &[f64], cap: f64) -> Result<Envelope> {
    let nu = -abscissa_weighted(params);
    if !(nu > 0.0) {
        return Err(Error::param("alpha", format!("decay rate nu = {nu} is not positive")));
    }
    let sym = SymbolMatrix::combustion(params, 1, params.alpha);
    semigroup_envelope_for(&sym, nu, t_grid, xi_grid, cap)
}

/// Envelope for an arbitrary symbol and prescribed `ν`.
///
/// Triangular 2×2 symbols use [`expm_triangular_2x2`]; other symbols use a
/// dense matrix exponential.
pub fn semigroup_envelope_for(
    sym: &SymbolMatrix,
    nu: f64,
    t_grid: &[f64],
    xi_grid: &[f64],
    cap: f64,
) -> Result<Envelope> {
    if t_grid.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::param("t_grid", "times must be nonnegative"));
    }
    let closed = sym.dim() == 2 && sym.is_upper_triangular();
    let per_xi = xi_grid
        .par_iter()
        .map(|&xi1| -> Result<f64> {
            let mut xi = vec![0.0; sym.space_dim];
            xi[0] = xi1;
            let m = sym.eval(&xi)?;
            let mut worst: f64 = 0.0;
            for &t in t_grid {
                let norm = if closed {
                    spectral_norm_2x2(&expm_triangular_2x2(m[(0, 0)], m[(0, 1)], m[(1, 1)], t))
                } else {
                    spectral_norm(&(m.clone() * Complex64::new(t, 0.0)).exp())
                };
                worst = worst.max((nu * t).exp() * norm);
            }
            Ok(worst)
        })
        .collect::<Result<Vec<_>>>()?;
    let k_est = per_xi.into_iter().fold(0.0, f64::max);
    if !(k_est <= cap) {
        return Err(Error::EnvelopeExceeded { k_est, cap });
    }
    Ok(Envelope { k_est, nu })
}

/// Applies a dense symbol exponential to a complex vector (general block systems).
pub fn expm_apply(m: &DMatrix<Complex64>, t: f64, v: &DVector<Complex64>) -> DVector<Complex64> {
    (m * Complex64::new(t, 0.0)).exp() * v
}
