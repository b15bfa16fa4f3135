//! Combustion model, the general triangular block system, and their
//! perturbation nonlinearities.
//!
//! The combustion model in the moving frame reads
//!
//! ```text
//! u1_t = Δu1 + c ∂z u1 + u2 g(u1)
//! u2_t = εΔu2 + c ∂z u2 − κ u2 g(u1),      g(u) = e^(−1/u) for u > 0, else 0
//! ```
//!
//! with end states `u− = (1/κ, 0)` (burned) and `u+ = (0, 1)` (unburned).
//! Perturbations `v = u − u−` obey `v_t = Lv + H(v)` where `H` is the
//! quadratic remainder of the reaction about `u−`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre_unit;

/// Default node count for the `N(v)v` quadrature.
pub const DEFAULT_QUAD_NODES: usize = 16;

/// Refinement budget of [`BlockSystem::remainder_quadrature`].
pub const MAX_QUAD_PANELS: usize = 512;

/// Ignition nonlinearity `g(u) = e^(−1/u)` for `u > 0`, `0` otherwise.
#[inline]
pub fn ignition_rate(u1: f64) -> f64 {
    if u1 > 0.0 {
        (-1.0 / u1).exp()
    } else {
        0.0
    }
}

/// Derivative of [`ignition_rate`]: `g(u)/u²` for `u > 0`.
#[inline]
pub fn ignition_rate_derivative(u1: f64) -> f64 {
    if u1 > 0.0 {
        (-1.0 / u1).exp() / (u1 * u1)
    } else {
        0.0
    }
}

/// Arrhenius-type rate `a·e^(−b/u)` with the same cutoff at `u ≤ 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arrhenius {
    pub a: f64,
    pub b: f64,
}

impl Arrhenius {
    #[inline]
    pub fn rate(&self, u: f64) -> f64 {
        if u > 0.0 {
            self.a * (-self.b / u).exp()
        } else {
            0.0
        }
    }

    #[inline]
    pub fn derivative(&self, u: f64) -> f64 {
        if u > 0.0 {
            self.a * self.b * (-self.b / u).exp() / (u * u)
        } else {
            0.0
        }
    }
}

/// Dimensionless constants of the combustion model plus the weight exponent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    /// Diffusion ratio of the reactant, `0 ≤ ε < 1`.
    pub epsilon: f64,
    /// Reaction stoichiometry, `κ > 0`.
    pub kappa: f64,
    /// Front speed, `c > 0`.
    pub c: f64,
    /// Weight exponent along `z`, `0 < α < c/2`.
    pub alpha: f64,
}

impl ModelParams {
    pub fn new(epsilon: f64, kappa: f64, c: f64, alpha: f64) -> Result<Self> {
        let p = ModelParams {
            epsilon,
            kappa,
            c,
            alpha,
        };
        p.validate()?;
        Ok(p)
    }

    /// Checks `ε`, `κ` and `c`, leaving the weight unconstrained.
    pub fn validate_base(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon < 1.0) {
            return Err(Error::param("epsilon", format!("need 0 <= epsilon < 1, got {}", self.epsilon)));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::param("kappa", format!("need kappa > 0, got {}", self.kappa)));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::param("c", format!("need c > 0, got {}", self.c)));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_base()?;
        if !(self.alpha > 0.0 && self.alpha < 0.5 * self.c) {
            return Err(Error::param(
                "alpha",
                format!("need 0 < alpha < c/2 = {}, got {}", 0.5 * self.c, self.alpha),
            ));
        }
        Ok(())
    }

    /// `κ e^(−κ)`, the decay rate of the reactant block about `u−`.
    #[inline]
    pub fn reactant_rate(&self) -> f64 {
        self.kappa * (-self.kappa).exp()
    }

    /// `cα − α²`, the sharp weighted decay rate.
    #[inline]
    pub fn weighted_rate(&self) -> f64 {
        self.c * self.alpha - self.alpha * self.alpha
    }

    /// Reaction term `f(u) = (u2 g(u1), −κ u2 g(u1))`.
    pub fn reaction(&self, u: [f64; 2]) -> [f64; 2] {
        let r = u[1] * ignition_rate(u[0]);
        [r, -self.kappa * r]
    }

    /// `∂f(u−) = ((0, e^(−κ)), (0, −κ e^(−κ)))`.
    pub fn jacobian_at_burned(&self) -> [[f64; 2]; 2] {
        let e = (-self.kappa).exp();
        [[0.0, e], [0.0, -self.kappa * e]]
    }

    /// Quadratic remainder `H(v) = (1, −κ)ᵀ (g(1/κ + v1) − g(1/κ)) v2`.
    pub fn remainder(&self, v: [f64; 2]) -> [f64; 2] {
        let inv = 1.0 / self.kappa;
        let h = (ignition_rate(inv + v[0]) - ignition_rate(inv)) * v[1];
        [h, -self.kappa * h]
    }

    /// Jacobian of [`ModelParams::remainder`] at `v`.
    pub fn remainder_jacobian(&self, v: [f64; 2]) -> [[f64; 2]; 2] {
        let inv = 1.0 / self.kappa;
        let d1 = v[1] * ignition_rate_derivative(inv + v[0]);
        let d2 = ignition_rate(inv + v[0]) - ignition_rate(inv);
        [[d1, d2], [-self.kappa * d1, -self.kappa * d2]]
    }

    pub fn end_states(&self) -> EndStatePair {
        EndStatePair {
            u_minus: vec![1.0 / self.kappa, 0.0],
            u_plus: vec![0.0, 1.0],
        }
    }
}

/// End states of a front: `u−` behind it (z → −∞) and `u+` ahead of it.
#[derive(Clone, Debug, PartialEq)]
pub struct EndStatePair {
    pub u_minus: Vec<f64>,
    pub u_plus: Vec<f64>,
}

/// Pointwise reaction term of a block system with an analytic Jacobian.
///
/// Implementations must be stateless (or internally synchronized); the
/// simulator evaluates them from several threads.
pub trait Reaction: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn eval(&self, u: &[f64], out: &mut [f64]);
    fn jacobian(&self, u: &[f64]) -> DMatrix<f64>;
}

/// Combustion reaction written about the burned state, `f̃(v) = f(u− + v)`.
#[derive(Clone, Copy, Debug)]
pub struct CombustionAboutBurned {
    pub kappa: f64,
}

impl Reaction for CombustionAboutBurned {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, u: &[f64], out: &mut [f64]) {
        let r = u[1] * ignition_rate(1.0 / self.kappa + u[0]);
        out[0] = r;
        out[1] = -self.kappa * r;
    }

    fn jacobian(&self, u: &[f64]) -> DMatrix<f64> {
        let x = 1.0 / self.kappa + u[0];
        let d1 = u[1] * ignition_rate_derivative(x);
        let d2 = ignition_rate(x);
        DMatrix::from_row_slice(2, 2, &[d1, d2, -self.kappa * d1, -self.kappa * d2])
    }
}

/// Exothermic–endothermic reaction on `(y1, y2, y3)`:
/// `(y2 f2(y1) − σ y3 f3(y1), −y2 f2(y1), −τ y3 f3(y1))`.
#[derive(Clone, Copy, Debug)]
pub struct ExoEndoReaction {
    pub sigma: f64,
    pub tau: f64,
    pub f2: Arrhenius,
    pub f3: Arrhenius,
}

impl Reaction for ExoEndoReaction {
    fn dim(&self) -> usize {
        3
    }

    fn eval(&self, u: &[f64], out: &mut [f64]) {
        let r2 = u[1] * self.f2.rate(u[0]);
        let r3 = u[2] * self.f3.rate(u[0]);
        out[0] = r2 - self.sigma * r3;
        out[1] = -r2;
        out[2] = -self.tau * r3;
    }

    fn jacobian(&self, u: &[f64]) -> DMatrix<f64> {
        let (g2, dg2) = (self.f2.rate(u[0]), self.f2.derivative(u[0]));
        let (g3, dg3) = (self.f3.rate(u[0]), self.f3.derivative(u[0]));
        DMatrix::from_row_slice(
            3,
            3,
            &[
                u[1] * dg2 - self.sigma * u[2] * dg3,
                g2,
                -self.sigma * g3,
                -u[1] * dg2,
                -g2,
                0.0,
                -self.tau * u[2] * dg3,
                0.0,
                -self.tau * g3,
            ],
        )
    }
}

/// Gasless combustion `(v g(u), −β v g(u))` on `(u, v)`.
#[derive(Clone, Copy, Debug)]
pub struct GaslessReaction {
    pub beta: f64,
}

impl Reaction for GaslessReaction {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, u: &[f64], out: &mut [f64]) {
        let r = u[1] * ignition_rate(u[0]);
        out[0] = r;
        out[1] = -self.beta * r;
    }

    fn jacobian(&self, u: &[f64]) -> DMatrix<f64> {
        let d1 = u[1] * ignition_rate_derivative(u[0]);
        let d2 = ignition_rate(u[0]);
        DMatrix::from_row_slice(2, 2, &[d1, d2, -self.beta * d1, -self.beta * d2])
    }
}

/// Central-difference Jacobian with step `1e−6·(1 + ‖u‖)`.
///
/// Only for cross-checking analytic Jacobians in tests; verification paths
/// always use [`Reaction::jacobian`].
pub fn fd_jacobian(reaction: &dyn Reaction, u: &[f64]) -> DMatrix<f64> {
    let n = reaction.dim();
    let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let h = 1e-6 * (1.0 + norm);
    let mut jac = DMatrix::zeros(n, n);
    let mut up = u.to_vec();
    let mut um = u.to_vec();
    let mut fp = vec![0.0; n];
    let mut fm = vec![0.0; n];
    for j in 0..n {
        up[j] = u[j] + h;
        um[j] = u[j] - h;
        reaction.eval(&up, &mut fp);
        reaction.eval(&um, &mut fm);
        for i in 0..n {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
        up[j] = u[j];
        um[j] = u[j];
    }
    jac
}

/// General triangular reaction–diffusion system about the rest state `u− = 0`.
///
/// The state splits as `u = (u1, u2)` with `u1 ∈ R^n1`, `u2 ∈ R^n2`, and the
/// reaction must satisfy `f(u1, 0) = (A1 u1, 0)`.
#[derive(Clone, Debug)]
pub struct BlockSystem {
    pub n1: usize,
    pub n2: usize,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub a1: DMatrix<f64>,
    pub reaction: Arc<dyn Reaction>,
    pub c: f64,
    pub alpha: f64,
}

impl BlockSystem {
    pub fn new(
        d1: Vec<f64>,
        d2: Vec<f64>,
        a1: DMatrix<f64>,
        reaction: Arc<dyn Reaction>,
        c: f64,
        alpha: f64,
    ) -> Result<Self> {
        let (n1, n2) = (d1.len(), d2.len());
        if n1 == 0 || n2 == 0 {
            return Err(Error::param("blocks", "both blocks must be non-empty"));
        }
        if a1.nrows() != n1 || a1.ncols() != n1 {
            return Err(Error::DimensionMismatch {
                expected: n1,
                actual: a1.nrows(),
            });
        }
        if reaction.dim() != n1 + n2 {
            return Err(Error::DimensionMismatch {
                expected: n1 + n2,
                actual: reaction.dim(),
            });
        }
        if d1.iter().chain(&d2).any(|d| !(*d >= 0.0)) {
            return Err(Error::param("diffusion", "diagonal entries must be nonnegative"));
        }
        if !(c > 0.0) {
            return Err(Error::param("c", format!("need c > 0, got {c}")));
        }
        if !(alpha >= 0.0) {
            return Err(Error::param("alpha", format!("need alpha >= 0, got {alpha}")));
        }
        Ok(BlockSystem {
            n1,
            n2,
            d1,
            d2,
            a1,
            reaction,
            c,
            alpha,
        })
    }

    /// The combustion model in perturbation coordinates about `u−`.
    pub fn combustion(params: &ModelParams) -> Self {
        BlockSystem {
            n1: 1,
            n2: 1,
            d1: vec![1.0],
            d2: vec![params.epsilon],
            a1: DMatrix::zeros(1, 1),
            reaction: Arc::new(CombustionAboutBurned {
                kappa: params.kappa,
            }),
            c: params.c,
            alpha: params.alpha,
        }
    }

    pub fn dim(&self) -> usize {
        self.n1 + self.n2
    }

    /// Concatenated diffusion diagonal `(D1, D2)`.
    pub fn diffusion(&self) -> Vec<f64> {
        self.d1.iter().chain(&self.d2).copied().collect()
    }

    /// True when some reactant does not diffuse (e.g. gasless combustion).
    pub fn has_degenerate_diffusion(&self) -> bool {
        self.d2.contains(&0.0)
    }

    pub fn eval(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.reaction.eval(u, &mut out);
        out
    }

    pub fn jacobian_at_rest(&self) -> DMatrix<f64> {
        self.reaction.jacobian(&vec![0.0; self.dim()])
    }

    /// `f(v) − f(0) − ∂f(0)v`, evaluated directly.
    pub fn remainder(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let zero = vec![0.0; n];
        let mut fv = vec![0.0; n];
        let mut f0 = vec![0.0; n];
        self.reaction.eval(v, &mut fv);
        self.reaction.eval(&zero, &mut f0);
        let lin = self.reaction.jacobian(&zero) * DVector::from_column_slice(v);
        (0..n).map(|i| fv[i] - f0[i] - lin[i]).collect()
    }

    /// `N(v)v` with `N(v) = ∫₀¹ (∂f(tv) − ∂f(0)) dt` by Gauss–Legendre quadrature.
    ///
    /// `quad_nodes` is the rule per panel; panels are bisected until two
    /// successive levels agree to `1e−14` of `∫|integrand|`, or until
    /// [`MAX_QUAD_PANELS`] panels are in use.
    pub fn remainder_quadrature(&self, v: &[f64], quad_nodes: usize) -> Result<Vec<f64>> {
        let n = self.dim();
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: v.len(),
            });
        }
        let rule = gauss_legendre_unit(quad_nodes)?;
        let vv = DVector::from_column_slice(v);
        let j0v = self.jacobian_at_rest() * &vv;
        // returns the panel integral and the integral of its magnitude
        let panel = |a: f64, b: f64| -> (DVector<f64>, f64) {
            let mut acc = DVector::zeros(n);
            let mut mag = 0.0;
            let mut point = vec![0.0; n];
            for (t, w) in rule.0.iter().zip(&rule.1) {
                let s = a + (b - a) * t;
                for (dst, x) in point.iter_mut().zip(v) {
                    *dst = s * x;
                }
                let f = self.reaction.jacobian(&point) * &vv - &j0v;
                mag += f.amax() * w * (b - a);
                acc += f * (w * (b - a));
            }
            (acc, mag)
        };
        let (whole, mag) = panel(0.0, 1.0);
        let tol = 1e-14 * mag;
        let mut budget = MAX_QUAD_PANELS;
        let mut stack = vec![(0.0, 1.0, whole)];
        let mut total = DVector::zeros(n);
        while let Some((a, b, coarse)) = stack.pop() {
            let m = 0.5 * (a + b);
            let (left, right) = (panel(a, m).0, panel(m, b).0);
            let fine = &left + &right;
            if (&fine - &coarse).amax() <= tol || budget < 2 {
                total += fine;
            } else {
                budget -= 2;
                stack.push((m, b, right));
                stack.push((a, m, left));
            }
        }
        Ok(total.iter().copied().collect())
    }

    /// Largest `‖f(u1, 0) − (A1 u1, 0)‖` over random `u1` with entries in `[−5, 5]`.
    pub fn block_structure_defect(&self, trials: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.dim();
        let mut u = vec![0.0; n];
        let mut out = vec![0.0; n];
        let mut worst: f64 = 0.0;
        for _ in 0..trials {
            for x in u.iter_mut().take(self.n1) {
                *x = rng.random_range(-5.0..5.0);
            }
            self.reaction.eval(&u, &mut out);
            let a1u = &self.a1 * DVector::from_column_slice(&u[..self.n1]);
            let mut err = 0.0;
            for i in 0..n {
                let target = if i < self.n1 { a1u[i] } else { 0.0 };
                err += (out[i] - target).powi(2);
            }
            worst = worst.max(err.sqrt());
        }
        worst
    }
}

/// Exothermic–endothermic system (temperature `y1`; reactants `y2`, `y3`).
pub fn exo_endo_system(
    d2: f64,
    d3: f64,
    sigma: f64,
    tau: f64,
    a: (f64, f64),
    b: (f64, f64),
) -> Result<BlockSystem> {
    for (name, v) in [
        ("sigma", sigma),
        ("tau", tau),
        ("a2", a.0),
        ("a3", a.1),
        ("b2", b.0),
        ("b3", b.1),
    ] {
        if !(v > 0.0) {
            return Err(Error::param(name, format!("must be positive, got {v}")));
        }
    }
    let reaction = ExoEndoReaction {
        sigma,
        tau,
        f2: Arrhenius { a: a.0, b: b.0 },
        f3: Arrhenius { a: a.1, b: b.1 },
    };
    BlockSystem::new(
        vec![1.0],
        vec![d2, d3],
        DMatrix::zeros(1, 1),
        Arc::new(reaction),
        1.0,
        0.0,
    )
}

/// Gasless combustion: the fuel block does not diffuse (`D2 = 0`).
pub fn gasless_system(beta: f64, c: f64, alpha: f64) -> Result<BlockSystem> {
    if !(beta > 0.0) {
        return Err(Error::param("beta", format!("must be positive, got {beta}")));
    }
    BlockSystem::new(
        vec![1.0],
        vec![0.0],
        DMatrix::zeros(1, 1),
        Arc::new(GaslessReaction { beta }),
        c,
        alpha,
    )
}

/// Samples a point uniformly in the Euclidean ball of radius `radius` in `R^n`.
pub(crate) fn sample_ball<R: Rng>(rng: &mut R, n: usize, radius: f64) -> Vec<f64> {
    let mut dir: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
    let r = radius * rng.random::<f64>().powf(1.0 / n as f64);
    for x in dir.iter_mut() {
        *x *= r / norm;
    }
    dir
}

/// Sampled local Lipschitz constant of `v ↦ N(v)v` on a ball.
///
/// Pairs are drawn uniformly (Gaussian direction, radius scaled by `U^(1/n)`);
/// the result is the largest observed difference quotient and is
/// reproducible for a fixed seed.
pub fn lipschitz_probe(sys: &BlockSystem, ball_radius: f64, trials: usize, seed: u64) -> Result<f64> {
    if !(ball_radius > 0.0) {
        return Err(Error::param("ball_radius", format!("must be positive, got {ball_radius}")));
    }
    let n = sys.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: f64 = 0.0;
    for _ in 0..trials {
        let v = sample_ball(&mut rng, n, ball_radius);
        let w = sample_ball(&mut rng, n, ball_radius);
        let nv = sys.remainder_quadrature(&v, DEFAULT_QUAD_NODES)?;
        let nw = sys.remainder_quadrature(&w, DEFAULT_QUAD_NODES)?;
        let num = nv.iter().zip(&nw).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let den = v.iter().zip(&w).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if den > 0.0 {
            best = best.max(num / den);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(kappa: f64) -> ModelParams {
        ModelParams::new(0.5, kappa, 1.0, 0.4).unwrap()
    }

    #[test]
    fn ignition_rate_values() {
        assert_eq!(ignition_rate(-3.0), 0.0);
        assert_eq!(ignition_rate(0.0), 0.0);
        assert_relative_eq!(ignition_rate(1.0), 0.367_879_441_2, epsilon = 1e-10);
        assert_relative_eq!(ignition_rate(0.5), 0.135_335_283_2, epsilon = 1e-10);
    }

    #[test]
    fn divided_differences_flatten_at_cutoff() {
        // j-th forward difference with step x/4, scaled by h^j
        let dd = |x: f64, order: usize| {
            let h = x / 4.0;
            let mut vals: Vec<f64> = (0..=order).map(|i| ignition_rate(x + i as f64 * h)).collect();
            for _ in 0..order {
                vals = vals.windows(2).map(|w| (w[1] - w[0]) / h).collect();
            }
            vals[0].abs()
        };
        for order in 1..=4 {
            let seq: Vec<f64> = (1..=6).map(|k| dd(10f64.powi(-k), order)).collect();
            assert!(seq.windows(2).all(|w| w[1] <= w[0]), "order {order}: {seq:?}");
            assert!(seq[5] < 1e-300);
        }
    }

    #[test]
    fn reaction_examples() {
        let p = params(1.0);
        assert_eq!(p.reaction([1.0, 0.0]), [0.0, 0.0]);
        assert_eq!(p.reaction([0.0, 1.0]), [0.0, 0.0]);
        let r = p.reaction([1.0, 2.0]);
        assert_relative_eq!(r[0], 0.735_758_9, epsilon = 1e-7);
        assert_relative_eq!(r[1], -0.735_758_9, epsilon = 1e-7);
    }

    #[test]
    fn jacobian_at_burned_examples() {
        let j = params(1.0).jacobian_at_burned();
        assert_relative_eq!(j[0][1], 0.367_879_4, epsilon = 1e-7);
        assert_relative_eq!(j[1][1], -0.367_879_4, epsilon = 1e-7);
        let j = params(2.0).jacobian_at_burned();
        assert_relative_eq!(j[0][1], 0.135_335_3, epsilon = 1e-7);
        assert_relative_eq!(j[1][1], -0.270_670_6, epsilon = 1e-7);
        assert_eq!(j[0][0], 0.0);
        assert_eq!(j[1][0], 0.0);
    }

    #[test]
    fn remainder_examples() {
        let p = params(1.0);
        assert_eq!(p.remainder([0.0, 0.0]), [0.0, 0.0]);
        assert_eq!(p.remainder([5.0, 0.0]), [0.0, 0.0]);
        let h = p.remainder([1.0, 1.0]);
        let expected = (-0.5f64).exp() - (-1.0f64).exp();
        assert_relative_eq!(h[0], expected, epsilon = 1e-15);
        assert_relative_eq!(h[0], 0.238_651_2, epsilon = 1e-7);
        assert_relative_eq!(h[1], -expected, epsilon = 1e-15);
    }

    #[test]
    fn remainder_is_reaction_minus_linearization() {
        let p = params(1.3);
        let sys = BlockSystem::combustion(&p);
        for v in [[0.3, -0.2], [-0.4, 0.7], [1.5, 2.0]] {
            let h = p.remainder(v);
            let direct = sys.remainder(&v);
            assert_relative_eq!(h[0], direct[0], epsilon = 1e-14);
            assert_relative_eq!(h[1], direct[1], epsilon = 1e-14);
        }
    }

    #[test]
    fn quadrature_matches_closed_form() {
        let p = params(1.0);
        let sys = BlockSystem::combustion(&p);
        let nv = sys.remainder_quadrature(&[1.0, 1.0], DEFAULT_QUAD_NODES).unwrap();
        let h = p.remainder([1.0, 1.0]);
        assert!((nv[0] - h[0]).abs() < 1e-10);
        assert!((nv[1] - h[1]).abs() < 1e-10);
        assert_eq!(sys.remainder_quadrature(&[0.0, 0.0], 16).unwrap(), vec![0.0, 0.0]);
        assert!(sys.remainder_quadrature(&[0.0, 0.0], 1).is_err());
    }

    #[derive(Debug)]
    struct Affine;
    impl Reaction for Affine {
        fn dim(&self) -> usize {
            2
        }
        fn eval(&self, u: &[f64], out: &mut [f64]) {
            out[0] = 2.0 * u[0] - u[1] + 0.5;
            out[1] = 3.0 * u[1];
        }
        fn jacobian(&self, _u: &[f64]) -> DMatrix<f64> {
            DMatrix::from_row_slice(2, 2, &[2.0, -1.0, 0.0, 3.0])
        }
    }

    #[test]
    fn affine_reaction_has_no_remainder() {
        let sys = BlockSystem::new(
            vec![1.0],
            vec![0.3],
            DMatrix::from_element(1, 1, 2.0),
            Arc::new(Affine),
            1.0,
            0.2,
        )
        .unwrap();
        let nv = sys.remainder_quadrature(&[0.7, -1.1], 16).unwrap();
        assert!(nv.iter().all(|x| x.abs() < 1e-14));
        assert_eq!(lipschitz_probe(&sys, 1.0, 200, 3).unwrap(), 0.0);
    }

    #[test]
    fn exo_endo_examples() {
        let sys = exo_endo_system(0.5, 0.4, 1.0, 1.0, (1.0, 1.0), (1.0, 1.0)).unwrap();
        assert_eq!((sys.n1, sys.n2), (1, 2));
        assert_eq!(sys.eval(&[2.5, 0.0, 0.0]), vec![0.0, 0.0, 0.0]);
        assert_eq!(sys.eval(&[0.0, 0.8, 1.3]), vec![0.0, 0.0, 0.0]);
        let f = sys.eval(&[1.0, 1.0, 1.0]);
        assert_eq!(f[0], 0.0);
        assert_relative_eq!(f[1], -0.367_879_4, epsilon = 1e-7);
        assert_relative_eq!(f[2], -0.367_879_4, epsilon = 1e-7);
        assert!(exo_endo_system(0.5, 0.4, 0.0, 1.0, (1.0, 1.0), (1.0, 1.0)).is_err());
        assert!(exo_endo_system(0.5, 0.4, 1.0, 1.0, (1.0, -1.0), (1.0, 1.0)).is_err());
        assert!(exo_endo_system(0.5, 0.4, 1.0, 1.0, (1.0, 1.0), (0.0, 1.0)).is_err());
    }

    #[test]
    fn constructed_systems_satisfy_block_structure() {
        let systems = [
            BlockSystem::combustion(&params(0.7)),
            exo_endo_system(0.5, 0.4, 2.0, 0.5, (1.5, 0.7), (1.0, 2.0)).unwrap(),
            gasless_system(1.5, 1.0, 0.3).unwrap(),
        ];
        for sys in &systems {
            assert!(sys.block_structure_defect(1000, 11) <= 1e-12);
        }
        assert!(systems[2].has_degenerate_diffusion());
        assert!(!systems[0].has_degenerate_diffusion());
    }

    #[test]
    fn analytic_jacobians_match_differences() {
        let cases: Vec<(Box<dyn Reaction>, Vec<f64>)> = vec![
            (Box::new(CombustionAboutBurned { kappa: 1.2 }), vec![0.3, 0.8]),
            (
                Box::new(ExoEndoReaction {
                    sigma: 0.6,
                    tau: 1.4,
                    f2: Arrhenius { a: 1.1, b: 0.9 },
                    f3: Arrhenius { a: 0.7, b: 1.3 },
                }),
                vec![0.9, 0.4, 0.6],
            ),
            (Box::new(GaslessReaction { beta: 2.0 }), vec![0.5, 1.2]),
        ];
        for (r, u) in &cases {
            let a = r.jacobian(u);
            let fd = fd_jacobian(r.as_ref(), u);
            assert!((a - fd).amax() < 1e-7);
        }
    }

    #[test]
    fn lipschitz_estimate_shrinks_with_ball() {
        let sys = BlockSystem::combustion(&params(1.0));
        let big = lipschitz_probe(&sys, 1.0, 2000, 1).unwrap();
        let small = lipschitz_probe(&sys, 1e-3, 2000, 1).unwrap();
        let tiny = lipschitz_probe(&sys, 1e-6, 2000, 1).unwrap();
        assert!(big > 0.0 && big.is_finite());
        assert!(small < 1e-2 * big);
        assert!(tiny < 1e-5 * big);
        assert!(lipschitz_probe(&sys, 0.0, 10, 1).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(1.0, 1.0, 1.0, 0.2).is_err());
        assert!(ModelParams::new(0.0, 0.0, 1.0, 0.2).is_err());
        assert!(ModelParams::new(0.0, 1.0, -1.0, 0.2).is_err());
        assert!(ModelParams::new(0.0, 1.0, 1.0, 0.5).is_err());
        assert!(ModelParams::new(0.0, 1.0, 1.0, 0.0).is_err());
        assert!(ModelParams::new(0.0, 1.0, 1.0, 0.49).is_ok());
    }

    #[test]
    fn end_states_are_rest_points() {
        let p = params(2.5);
        let ends = p.end_states();
        assert_eq!(ends.u_minus, vec![0.4, 0.0]);
        assert_eq!(p.reaction([ends.u_minus[0], ends.u_minus[1]]), [0.0, 0.0]);
        assert_eq!(p.reaction([ends.u_plus[0], ends.u_plus[1]]), [0.0, 0.0]);
    }
}
