//! Discretization of the weighted state space on a truncated halfline.
//!
//! The continuum state space is L² over (0, ∞) against the weight
//! ρ(ξ) = ξ^{1+θ} (or its capped variant ξ^{1+θ} ∧ 1). Computation
//! truncates to (0, ξ_max) with an artificial zero Dirichlet condition at
//! the far end; the boundary forcing kernel decays like exp(−ξ²/4t), so
//! the truncation error is negligible on the time scales of interest.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nodal values of a state x(ξ_i) on a [`SpatialGrid`].
pub type StateVector = DVector<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightVariant {
    /// ρ(ξ) = ξ^{1+θ}
    PowerWeight,
    /// ρ(ξ) = ξ^{1+θ} ∧ 1
    CappedWeight,
}

/// Weight defining the state-space inner product; θ ∈ (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub theta: f64,
    pub variant: WeightVariant,
}

impl WeightSpec {
    pub fn new(theta: f64, variant: WeightVariant) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::invalid(format!(
                "weight exponent theta must lie in (0,1), got {theta}"
            )));
        }
        Ok(WeightSpec { theta, variant })
    }

    /// Default weight used by the standard configuration.
    pub fn capped_default() -> Self {
        WeightSpec {
            theta: 0.5,
            variant: WeightVariant::CappedWeight,
        }
    }
}

/// Evaluate the weight ρ at ξ ≥ 0.
pub fn rho(xi: f64, spec: &WeightSpec) -> Result<f64> {
    if xi < 0.0 {
        return Err(Error::invalid(format!("rho requires xi >= 0, got {xi}")));
    }
    let p = xi.powf(1.0 + spec.theta);
    Ok(match spec.variant {
        WeightVariant::PowerWeight => p,
        WeightVariant::CappedWeight => p.min(1.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grading {
    Uniform,
    /// ξ_i = ξ_max (i/(n+1))², clustering nodes at the singular boundary.
    BoundaryGraded,
}

/// Interior nodes of the truncated halfline together with trapezoidal
/// quadrature weights and the state-space weight values.
///
/// Zero Dirichlet values are implied at ξ = 0 and ξ = ξ_max; only interior
/// nodes carry degrees of freedom.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    pub xi_max: f64,
    pub nodes: Vec<f64>,
    pub quad_weights: Vec<f64>,
    pub rho_values: Vec<f64>,
    pub weight_spec: WeightSpec,
    pub grading: Grading,
}

/// Build a grid with `n` interior nodes on (0, xi_max).
pub fn make_grid(
    xi_max: f64,
    n: usize,
    grading: Grading,
    weight_spec: WeightSpec,
) -> Result<SpatialGrid> {
    if xi_max <= 0.0 || !xi_max.is_finite() {
        return Err(Error::invalid(format!(
            "xi_max must be positive and finite, got {xi_max}"
        )));
    }
    if n < 1 {
        return Err(Error::invalid("grid needs at least one interior node"));
    }
    let m = (n + 1) as f64;
    let nodes: Vec<f64> = (1..=n)
        .map(|i| {
            let r = i as f64 / m;
            match grading {
                Grading::Uniform => xi_max * r,
                Grading::BoundaryGraded => xi_max * r * r,
            }
        })
        .collect();

    // Trapezoid weights of a function vanishing at both ends of the
    // partition 0 = ξ_0 < ξ_1 < … < ξ_{n+1} = xi_max: w_i = (ξ_{i+1} − ξ_{i−1})/2.
    let mut quad_weights = Vec::with_capacity(n);
    for i in 0..n {
        let left = if i == 0 { 0.0 } else { nodes[i - 1] };
        let right = if i + 1 == n { xi_max } else { nodes[i + 1] };
        quad_weights.push(0.5 * (right - left));
    }

    let rho_values = nodes
        .iter()
        .map(|&xi| rho(xi, &weight_spec))
        .collect::<Result<Vec<f64>>>()?;

    Ok(SpatialGrid {
        xi_max,
        nodes,
        quad_weights,
        rho_values,
        weight_spec,
        grading,
    })
}

impl SpatialGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Sample a function of ξ at the grid nodes.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> StateVector {
        StateVector::from_iterator(self.len(), self.nodes.iter().map(|&xi| f(xi)))
    }

    fn check_len(&self, v: &StateVector, what: &str) -> Result<()> {
        if v.len() != self.len() {
            return Err(Error::invalid(format!(
                "{what}: length {} does not match grid size {}",
                v.len(),
                self.len()
            )));
        }
        Ok(())
    }
}

/// Weighted inner product ⟨u, v⟩ = Σ u_i v_i ρ(ξ_i) w_i.
pub fn weighted_inner(u: &StateVector, v: &StateVector, grid: &SpatialGrid) -> Result<f64> {
    grid.check_len(u, "weighted_inner u")?;
    grid.check_len(v, "weighted_inner v")?;
    let mut acc = 0.0;
    for i in 0..grid.len() {
        acc += u[i] * v[i] * grid.rho_values[i] * grid.quad_weights[i];
    }
    Ok(acc)
}

/// Norm induced by [`weighted_inner`].
pub fn weighted_norm(v: &StateVector, grid: &SpatialGrid) -> Result<f64> {
    Ok(weighted_inner(v, v, grid)?.sqrt())
}

/// Unweighted (Lebesgue) quadrature Σ v_i w_i over the truncated domain.
pub fn lebesgue_quadrature(v: &StateVector, grid: &SpatialGrid) -> Result<f64> {
    grid.check_len(v, "lebesgue_quadrature")?;
    let mut acc = 0.0;
    for i in 0..grid.len() {
        acc += v[i] * grid.quad_weights[i];
    }
    Ok(acc)
}

/// Random function-like profile (a few steps plus Gaussian bumps), normalized
/// to unit weighted norm.
///
/// Diagnostics that probe operator estimates need generic elements of the
/// state space; white-noise nodal vectors are not discretizations of any
/// function in it and over-weight the top of the discrete spectrum.
pub fn random_profile(grid: &SpatialGrid, rng: &mut impl rand::Rng) -> Result<StateVector> {
    let n = grid.len();
    let l = grid.xi_max;
    let mut x = StateVector::zeros(n);
    let steps = rng.random_range(1..=3);
    for _ in 0..steps {
        let mut a = rng.random::<f64>() * l;
        let mut b = rng.random::<f64>() * l;
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        let amp = rng.random::<f64>() * 2.0 - 1.0;
        for i in 0..n {
            if grid.nodes[i] >= a && grid.nodes[i] < b {
                x[i] += amp;
            }
        }
    }
    let bumps = rng.random_range(1..=3);
    for _ in 0..bumps {
        let center = rng.random::<f64>() * l;
        let width = 0.2 + rng.random::<f64>() * 1.8;
        let amp = rng.random::<f64>() * 2.0 - 1.0;
        for i in 0..n {
            let z = (grid.nodes[i] - center) / width;
            x[i] += amp * (-z * z).exp();
        }
    }
    let norm = weighted_norm(&x, grid)?;
    if norm < 1e-10 {
        // Degenerate draw; fall back to a centered bump.
        let c = 0.5 * l;
        for i in 0..n {
            let z = (grid.nodes[i] - c) / (0.1 * l);
            x[i] = (-z * z).exp();
        }
        let norm = weighted_norm(&x, grid)?;
        return Ok(x / norm);
    }
    Ok(x / norm)
}
