//! Running/terminal costs, the Hamiltonian Ψ(s,x,z) = inf_u { z·u + L(s,x,u) }
//! and its deterministic argmin selection γ.
//!
//! Catalog costs are defined at the functional level: the state part is the
//! grid quadrature of its density, while the control penalty is the exact
//! closed form (no quadrature of an indicator), so state-independent
//! problems hit their closed-form values exactly. Custom densities go
//! through full quadrature.
//!
//! The selection γ is realized as a grid argmin with smallest-u tie-break,
//! plus golden-section polish when the cost is u-separable and the grid
//! argmin is a strict interior minimum. Custom densities are minimized on
//! the candidate grid only, in every code path, so the selection is
//! identical wherever it is evaluated.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::weighted_space::{SpatialGrid, StateVector};

/// Bounded closed control interval U = [u_min, u_max] with the candidate
/// grid used for minimization.
#[derive(Debug, Clone)]
pub struct ControlSet {
    pub u_min: f64,
    pub u_max: f64,
    pub n_grid: usize,
    pub refine: bool,
}

impl ControlSet {
    pub fn new(u_min: f64, u_max: f64, n_grid: usize, refine: bool) -> Result<Self> {
        if !(u_min <= u_max) {
            return Err(Error::invalid(format!("control interval [{u_min}, {u_max}] is empty")));
        }
        if n_grid == 0 {
            return Err(Error::invalid("control grid needs at least one candidate"));
        }
        Ok(ControlSet { u_min, u_max, n_grid, refine })
    }

    /// The singleton U = {0}.
    pub fn singleton_zero() -> Self {
        ControlSet { u_min: 0.0, u_max: 0.0, n_grid: 1, refine: false }
    }

    pub fn contains(&self, u: f64) -> bool {
        let tol = 1e-12 * (1.0 + self.u_min.abs().max(self.u_max.abs()));
        u >= self.u_min - tol && u <= self.u_max + tol
    }

    pub fn bound(&self) -> f64 {
        self.u_min.abs().max(self.u_max.abs())
    }

    pub fn candidates(&self) -> Vec<f64> {
        if self.u_min == self.u_max || self.n_grid == 1 {
            return vec![self.u_min];
        }
        let m = (self.n_grid - 1) as f64;
        (0..self.n_grid)
            .map(|j| self.u_min + (self.u_max - self.u_min) * j as f64 / m)
            .collect()
    }

    pub fn clamp(&self, u: f64) -> f64 {
        u.max(self.u_min).min(self.u_max)
    }
}

type DensityFn = dyn Fn(f64, f64, f64, f64) -> f64 + Send + Sync;
type TerminalDensityFn = dyn Fn(f64, f64) -> f64 + Send + Sync;

/// Running cost catalog.
#[derive(Clone)]
pub enum RunningCost {
    Zero,
    /// L(s,x,u) ≡ value.
    Constant { value: f64 },
    /// L = scale·∫ ρ(ξ)(x−target)² 1_{ξ≤cutoff} dξ + control_weight·u².
    QuadraticTracking { target: f64, cutoff: f64, control_weight: f64, scale: f64 },
    /// As above with the squared deviation saturated at `cap`, so that
    /// sup_x |Ψ(x,0)| is finite (infinite-horizon hypothesis).
    BoundedTracking { target: f64, cutoff: f64, cap: f64, control_weight: f64, scale: f64 },
    /// Density ell(s, ξ, y, u) integrated by the grid quadrature.
    Custom(Arc<DensityFn>),
}

impl fmt::Debug for RunningCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunningCost::Zero => write!(f, "Zero"),
            RunningCost::Constant { value } => write!(f, "Constant({value})"),
            RunningCost::QuadraticTracking { target, cutoff, control_weight, scale } => write!(
                f,
                "QuadraticTracking(target={target}, cutoff={cutoff}, cw={control_weight}, scale={scale})"
            ),
            RunningCost::BoundedTracking { target, cutoff, cap, control_weight, scale } => write!(
                f,
                "BoundedTracking(target={target}, cutoff={cutoff}, cap={cap}, cw={control_weight}, scale={scale})"
            ),
            RunningCost::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Terminal cost catalog.
#[derive(Clone)]
pub enum TerminalCost {
    Zero,
    /// Φ = scale·∫ ρ(ξ)(x−target)² 1_{ξ≤cutoff} dξ.
    QuadraticTracking { target: f64, cutoff: f64, scale: f64 },
    /// Φ(x) = Σ coeffs_i x_i; covers spectral-projection functionals.
    Linear { coeffs: StateVector },
    /// Density φ(ξ, y) integrated by the grid quadrature.
    Custom(Arc<TerminalDensityFn>),
}

impl fmt::Debug for TerminalCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TerminalCost::Zero => write!(f, "Zero"),
            TerminalCost::QuadraticTracking { target, cutoff, scale } => {
                write!(f, "QuadraticTracking(target={target}, cutoff={cutoff}, scale={scale})")
            }
            TerminalCost::Linear { .. } => write!(f, "Linear(..)"),
            TerminalCost::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Growth constants of the Lipschitz hypothesis on the densities.
#[derive(Debug, Clone, Copy)]
pub struct GrowthConstants {
    pub c1: f64,
    pub c2: f64,
    pub epsilon: f64,
}

impl Default for GrowthConstants {
    fn default() -> Self {
        GrowthConstants { c1: 4.0, c2: 1.5, epsilon: 0.5 }
    }
}

#[derive(Debug, Clone)]
pub struct CostSpec {
    pub running: RunningCost,
    pub terminal: TerminalCost,
    /// Discount rate, infinite-horizon problems only.
    pub mu: Option<f64>,
    pub growth: GrowthConstants,
}

impl CostSpec {
    pub fn new(running: RunningCost, terminal: TerminalCost) -> Self {
        CostSpec { running, terminal, mu: None, growth: GrowthConstants::default() }
    }

    pub fn with_discount(mut self, mu: f64) -> Result<Self> {
        if mu <= 0.0 {
            return Err(Error::invalid(format!("discount rate must be positive, got {mu}")));
        }
        self.mu = Some(mu);
        Ok(self)
    }

    /// Whether the running cost splits as Q(s,x) + R(u).
    pub fn is_separable(&self) -> bool {
        !matches!(self.running, RunningCost::Custom(_))
    }

    /// The state part Q(s,x) of a separable running cost.
    pub fn state_part(&self, grid: &SpatialGrid, _s: f64, x: &StateVector) -> Option<f64> {
        match &self.running {
            RunningCost::Zero => Some(0.0),
            RunningCost::Constant { value } => Some(*value),
            RunningCost::QuadraticTracking { target, cutoff, scale, .. } => {
                let mut acc = 0.0;
                for i in 0..grid.len() {
                    if grid.nodes[i] <= *cutoff {
                        let d = x[i] - target;
                        acc += grid.rho_values[i] * grid.quad_weights[i] * d * d;
                    }
                }
                Some(scale * acc)
            }
            RunningCost::BoundedTracking { target, cutoff, cap, scale, .. } => {
                let mut acc = 0.0;
                for i in 0..grid.len() {
                    if grid.nodes[i] <= *cutoff {
                        let d = x[i] - target;
                        acc += grid.rho_values[i] * grid.quad_weights[i] * cap * (d * d / cap).tanh();
                    }
                }
                Some(scale * acc)
            }
            RunningCost::Custom(_) => None,
        }
    }

    /// The control penalty R(u) of a separable running cost.
    pub fn control_part(&self, u: f64) -> f64 {
        match &self.running {
            RunningCost::Zero | RunningCost::Constant { .. } | RunningCost::Custom(_) => 0.0,
            RunningCost::QuadraticTracking { control_weight, scale, .. }
            | RunningCost::BoundedTracking { control_weight, scale, .. } => {
                scale * control_weight * u * u
            }
        }
    }

    /// Directional Gâteaux derivative of the state part, ∇_x Q(s,x)·d.
    pub fn state_part_gradient(
        &self,
        grid: &SpatialGrid,
        _s: f64,
        x: &StateVector,
        d: &StateVector,
    ) -> Result<f64> {
        match &self.running {
            RunningCost::Zero | RunningCost::Constant { .. } => Ok(0.0),
            RunningCost::QuadraticTracking { target, cutoff, scale, .. } => {
                let mut acc = 0.0;
                for i in 0..grid.len() {
                    if grid.nodes[i] <= *cutoff {
                        acc += grid.rho_values[i] * grid.quad_weights[i] * 2.0 * (x[i] - target) * d[i];
                    }
                }
                Ok(scale * acc)
            }
            RunningCost::BoundedTracking { target, cutoff, cap, scale, .. } => {
                let mut acc = 0.0;
                for i in 0..grid.len() {
                    if grid.nodes[i] <= *cutoff {
                        let dev = x[i] - target;
                        let sech2 = {
                            let t = (dev * dev / cap).tanh();
                            1.0 - t * t
                        };
                        acc += grid.rho_values[i] * grid.quad_weights[i] * sech2 * 2.0 * dev * d[i];
                    }
                }
                Ok(scale * acc)
            }
            RunningCost::Custom(_) => Err(Error::invalid(
                "state gradient of a custom running density is not available",
            )),
        }
    }

    /// Directional Gâteaux derivative of the terminal cost, ∇Φ(x)·d.
    pub fn terminal_gradient(&self, grid: &SpatialGrid, x: &StateVector, d: &StateVector) -> Result<f64> {
        match &self.terminal {
            TerminalCost::Zero => Ok(0.0),
            TerminalCost::QuadraticTracking { target, cutoff, scale } => {
                let mut acc = 0.0;
                for i in 0..grid.len() {
                    if grid.nodes[i] <= *cutoff {
                        acc += grid.rho_values[i] * grid.quad_weights[i] * 2.0 * (x[i] - target) * d[i];
                    }
                }
                Ok(scale * acc)
            }
            TerminalCost::Linear { coeffs } => Ok(coeffs.dot(d)),
            TerminalCost::Custom(_) => {
                Err(Error::invalid("terminal gradient of a custom density is not available"))
            }
        }
    }

    /// sup_x |Ψ(x, 0)| when finite (infinite-horizon hypothesis); None for
    /// costs unbounded in the state.
    pub fn m_psi(&self, grid: &SpatialGrid, ctrl: &ControlSet) -> Option<f64> {
        let min_r = ctrl
            .candidates()
            .iter()
            .map(|&u| self.control_part(u))
            .fold(f64::INFINITY, f64::min);
        match &self.running {
            RunningCost::Zero => Some(0.0),
            RunningCost::Constant { value } => Some((value + min_r).abs()),
            RunningCost::BoundedTracking { cutoff, cap, scale, .. } => {
                let mut q_max = 0.0;
                for i in 0..grid.len() {
                    if grid.nodes[i] <= *cutoff {
                        q_max += grid.rho_values[i] * grid.quad_weights[i] * cap;
                    }
                }
                Some((scale * q_max + min_r).max(min_r.abs()))
            }
            RunningCost::QuadraticTracking { .. } | RunningCost::Custom(_) => None,
        }
    }
}

/// Abstract running cost L(s,x,u).
pub fn running_cost_l(
    spec: &CostSpec,
    grid: &SpatialGrid,
    ctrl: &ControlSet,
    s: f64,
    x: &StateVector,
    u: f64,
) -> Result<f64> {
    if !ctrl.contains(u) {
        return Err(Error::invalid(format!(
            "control value {u} outside U = [{}, {}]",
            ctrl.u_min, ctrl.u_max
        )));
    }
    if x.len() != grid.len() {
        return Err(Error::invalid("state length does not match grid"));
    }
    match &spec.running {
        RunningCost::Custom(ell) => {
            let mut acc = 0.0;
            for i in 0..grid.len() {
                acc += ell(s, grid.nodes[i], x[i], u) * grid.quad_weights[i];
            }
            Ok(acc)
        }
        _ => Ok(spec.state_part(grid, s, x).expect("separable") + spec.control_part(u)),
    }
}

/// Abstract terminal cost Φ(x).
pub fn terminal_cost_phi(spec: &CostSpec, grid: &SpatialGrid, x: &StateVector) -> Result<f64> {
    if x.len() != grid.len() {
        return Err(Error::invalid("state length does not match grid"));
    }
    match &spec.terminal {
        TerminalCost::Zero => Ok(0.0),
        TerminalCost::QuadraticTracking { target, cutoff, scale } => {
            let mut acc = 0.0;
            for i in 0..grid.len() {
                if grid.nodes[i] <= *cutoff {
                    let d = x[i] - target;
                    acc += grid.rho_values[i] * grid.quad_weights[i] * d * d;
                }
            }
            Ok(scale * acc)
        }
        TerminalCost::Linear { coeffs } => {
            if coeffs.len() != x.len() {
                return Err(Error::invalid("linear terminal coefficients do not match grid"));
            }
            Ok(coeffs.dot(x))
        }
        TerminalCost::Custom(phi) => {
            let mut acc = 0.0;
            for i in 0..grid.len() {
                acc += phi(grid.nodes[i], x[i]) * grid.quad_weights[i];
            }
            Ok(acc)
        }
    }
}

/// Value and selected minimizer of the Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianValue {
    pub psi: f64,
    pub gamma_u: f64,
}

/// Grid argmin with smallest-index (= smallest-u) tie-break.
fn argmin_strict(values: &[f64]) -> usize {
    let mut best = 0;
    for j in 1..values.len() {
        if values[j] < values[best] {
            best = j;
        }
    }
    best
}

/// Golden-section minimization on [a, b]; deterministic fixed scheme.
fn golden_section(a: f64, b: f64, f: &dyn Fn(f64) -> f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if hi - lo < 1e-12 * (1.0 + lo.abs() + hi.abs()) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    let xm = 0.5 * (lo + hi);
    (xm, f(xm))
}

/// Minimize u ↦ z·u + extra(u) over the control set. Polish runs only on a
/// strict interior grid minimum, where the landscape is locally unimodal.
pub(crate) fn minimize_affine_plus(
    ctrl: &ControlSet,
    z: f64,
    extra: &dyn Fn(f64) -> f64,
    polish: bool,
) -> HamiltonianValue {
    let cands = ctrl.candidates();
    let values: Vec<f64> = cands.iter().map(|&u| z * u + extra(u)).collect();
    let j = argmin_strict(&values);
    let (mut best_u, mut best_v) = (cands[j], values[j]);
    if polish && ctrl.refine && j > 0 && j + 1 < cands.len() {
        let strict_interior = values[j] < values[j - 1] && values[j] < values[j + 1];
        if strict_interior {
            let obj = |u: f64| z * u + extra(u);
            let (u_g, v_g) = golden_section(cands[j - 1], cands[j + 1], &obj);
            if v_g < best_v {
                best_u = u_g;
                best_v = v_g;
            }
        }
    }
    HamiltonianValue { psi: best_v, gamma_u: best_u }
}

/// Hamiltonian fast path for separable costs given the state part Q(s,x).
pub(crate) fn psi_from_state_part(
    spec: &CostSpec,
    ctrl: &ControlSet,
    q: f64,
    z: f64,
) -> HamiltonianValue {
    let hv = minimize_affine_plus(ctrl, z, &|u| spec.control_part(u), true);
    HamiltonianValue { psi: hv.psi + q, gamma_u: hv.gamma_u }
}

/// Hamiltonian from a precomputed table of L(s,x,u_j) on the candidate grid.
pub(crate) fn psi_from_table(ctrl: &ControlSet, l_values: &[f64], z: f64) -> HamiltonianValue {
    let cands = ctrl.candidates();
    debug_assert_eq!(cands.len(), l_values.len());
    let values: Vec<f64> = cands.iter().zip(l_values).map(|(&u, &l)| z * u + l).collect();
    let j = argmin_strict(&values);
    HamiltonianValue { psi: values[j], gamma_u: cands[j] }
}

/// Ψ(s,x,z) = inf_{u∈U} { z·u + L(s,x,u) } with its selected minimizer.
pub fn hamiltonian(
    spec: &CostSpec,
    grid: &SpatialGrid,
    ctrl: &ControlSet,
    s: f64,
    x: &StateVector,
    z: f64,
) -> Result<HamiltonianValue> {
    if let Some(q) = spec.state_part(grid, s, x) {
        Ok(psi_from_state_part(spec, ctrl, q, z))
    } else {
        let cands = ctrl.candidates();
        let mut l_values = Vec::with_capacity(cands.len());
        for &u in &cands {
            l_values.push(running_cost_l(spec, grid, ctrl, s, x, u)?);
        }
        Ok(psi_from_table(ctrl, &l_values, z))
    }
}

/// Report of the empirical z-Lipschitz verification of Ψ.
#[derive(Debug, Clone)]
pub struct LipschitzReport {
    pub fitted_constant: f64,
    pub bound: f64,
    pub samples: usize,
}

/// Empirically verify |Ψ(s,x,z₁) − Ψ(s,x,z₂)| ≤ C_U |z₁ − z₂| on random
/// z-pairs; errors with a property failure when the fit exceeds the bound.
pub fn lipschitz_in_z_check(
    spec: &CostSpec,
    grid: &SpatialGrid,
    ctrl: &ControlSet,
    samples: usize,
    seed: u64,
) -> Result<LipschitzReport> {
    use rand::prelude::*;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let bound = ctrl.bound() + 1e-6;
    let mut fitted: f64 = 0.0;
    for _ in 0..samples {
        let x = StateVector::from_fn(grid.len(), |_, _| rng.random::<f64>() * 4.0 - 2.0);
        let s = rng.random::<f64>();
        let z1 = rng.random::<f64>() * 8.0 - 4.0;
        let z2 = rng.random::<f64>() * 8.0 - 4.0;
        if (z1 - z2).abs() < 1e-9 {
            continue;
        }
        let p1 = hamiltonian(spec, grid, ctrl, s, &x, z1)?;
        let p2 = hamiltonian(spec, grid, ctrl, s, &x, z2)?;
        fitted = fitted.max((p1.psi - p2.psi).abs() / (z1 - z2).abs());
    }
    if fitted > bound {
        return Err(Error::PropertyFailure(format!(
            "hamiltonian z-Lipschitz constant {fitted} exceeds C_U bound {bound}"
        )));
    }
    Ok(LipschitzReport { fitted_constant: fitted, bound, samples })
}

/// Density view of catalog running costs, used by the growth spot-check.
fn running_density(spec: &CostSpec, grid: &SpatialGrid, s: f64, xi: f64, y: f64, u: f64) -> f64 {
    let rho = crate::weighted_space::rho(xi, &grid.weight_spec).unwrap_or(0.0);
    match &spec.running {
        RunningCost::Zero => 0.0,
        RunningCost::Constant { value } => {
            if xi <= 1.0 {
                *value
            } else {
                0.0
            }
        }
        RunningCost::QuadraticTracking { target, cutoff, control_weight, scale } => {
            let state = if xi <= *cutoff { rho * (y - target) * (y - target) } else { 0.0 };
            let ctrl = if xi <= 1.0 { control_weight * u * u } else { 0.0 };
            scale * (state + ctrl)
        }
        RunningCost::BoundedTracking { target, cutoff, cap, control_weight, scale } => {
            let d = y - target;
            let state = if xi <= *cutoff { rho * cap * (d * d / cap).tanh() } else { 0.0 };
            let ctrl = if xi <= 1.0 { control_weight * u * u } else { 0.0 };
            scale * (state + ctrl)
        }
        RunningCost::Custom(ell) => ell(s, xi, y, u),
    }
}

/// Spot-check the Lipschitz growth hypothesis of the running density on
/// random (s, ξ, y₁, y₂, u) samples.
pub fn growth_spot_check(
    spec: &CostSpec,
    grid: &SpatialGrid,
    ctrl: &ControlSet,
    samples: usize,
    seed: u64,
) -> Result<()> {
    use rand::prelude::*;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let g = spec.growth;
    for k in 0..samples {
        let s = rng.random::<f64>();
        let xi = rng.random::<f64>() * grid.xi_max;
        let y1 = rng.random::<f64>() * 6.0 - 3.0;
        let y2 = rng.random::<f64>() * 6.0 - 3.0;
        let u = ctrl.clamp(rng.random::<f64>() * 2.0 - 1.0);
        let rho = crate::weighted_space::rho(xi, &grid.weight_spec)?;
        let lhs =
            (running_density(spec, grid, s, xi, y1, u) - running_density(spec, grid, s, xi, y2, u)).abs();
        let rhs = g.c1 * rho.sqrt() / (1.0 + xi).powf(0.5 + g.epsilon) * (y1 - y2).abs()
            + g.c2 * rho * (y1.abs() + y2.abs()) * (y1 - y2).abs();
        if lhs > rhs + 1e-9 {
            return Err(Error::PropertyFailure(format!(
                "running density violates growth hypothesis at sample {k}: |delta ell| = {lhs} > {rhs}"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weighted_space::{make_grid, weighted_inner, Grading, WeightSpec};
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize) -> SpatialGrid {
        make_grid(20.0, n, Grading::Uniform, WeightSpec::capped_default()).unwrap()
    }

    fn interval() -> ControlSet {
        ControlSet::new(-1.0, 1.0, 33, true).unwrap()
    }

    #[test]
    fn control_set_validation_and_candidates() {
        assert!(ControlSet::new(1.0, -1.0, 5, false).is_err());
        assert!(ControlSet::new(0.0, 1.0, 0, false).is_err());
        let singleton = ControlSet::singleton_zero();
        assert_eq!(singleton.candidates(), vec![0.0]);
        let c = interval().candidates();
        assert_eq!(c.len(), 33);
        assert_eq!(c[0], -1.0);
        assert_eq!(c[32], 1.0);
    }

    #[test]
    fn running_cost_zero_and_membership() {
        let g = grid(40);
        let ctrl = interval();
        let spec = CostSpec::new(RunningCost::Zero, TerminalCost::Zero);
        let x = StateVector::from_element(40, 0.7);
        assert_eq!(running_cost_l(&spec, &g, &ctrl, 0.3, &x, 0.5).unwrap(), 0.0);
        assert!(running_cost_l(&spec, &g, &ctrl, 0.3, &x, 1.5).is_err());
    }

    #[test]
    fn custom_density_matches_analytic_integral() {
        // ell = xi e^{-xi} (vanishes at the boundary, so the Dirichlet
        // trapezoid rule applies): integral over (0, xi_max) is
        // 1 - (1 + xi_max) e^{-xi_max}.
        let g = grid(400);
        let ctrl = interval();
        let spec = CostSpec::new(
            RunningCost::Custom(Arc::new(|_s, xi: f64, _y, _u| xi * (-xi).exp())),
            TerminalCost::Zero,
        );
        let x = StateVector::zeros(400);
        let l = running_cost_l(&spec, &g, &ctrl, 0.0, &x, 0.0).unwrap();
        assert_relative_eq!(l, 1.0 - 21.0 * (-20.0f64).exp(), max_relative = 5e-4);
    }

    #[test]
    fn masked_quadratic_density_reduces_to_weighted_inner() {
        let g = grid(150);
        let ctrl = interval();
        let weight = g.weight_spec;
        let spec = CostSpec::new(
            RunningCost::Custom(Arc::new(move |_s, xi: f64, y: f64, _u| {
                if xi <= 1.0 {
                    crate::weighted_space::rho(xi, &weight).unwrap() * y * y
                } else {
                    0.0
                }
            })),
            TerminalCost::Zero,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = StateVector::from_fn(150, |_, _| rng.random::<f64>() - 0.5);
        let masked = StateVector::from_fn(150, |i, _| if g.nodes[i] <= 1.0 { x[i] } else { 0.0 });
        let l = running_cost_l(&spec, &g, &ctrl, 0.0, &x, 0.0).unwrap();
        assert_relative_eq!(l, weighted_inner(&masked, &masked, &g).unwrap(), max_relative = 1e-12);
    }

    #[test]
    fn terminal_cost_variants() {
        let g = grid(80);
        let zero = CostSpec::new(RunningCost::Zero, TerminalCost::Zero);
        let x = StateVector::from_element(80, 1.0);
        assert_eq!(terminal_cost_phi(&zero, &g, &x).unwrap(), 0.0);

        let quad = CostSpec::new(
            RunningCost::Zero,
            TerminalCost::QuadraticTracking { target: 0.0, cutoff: 1.0, scale: 1.0 },
        );
        let masked = StateVector::from_fn(80, |i, _| if g.nodes[i] <= 1.0 { x[i] } else { 0.0 });
        assert_relative_eq!(
            terminal_cost_phi(&quad, &g, &x).unwrap(),
            weighted_inner(&masked, &masked, &g).unwrap(),
            max_relative = 1e-12
        );

        let lin = CostSpec::new(
            RunningCost::Zero,
            TerminalCost::Linear { coeffs: StateVector::from_element(80, 2.0) },
        );
        assert_relative_eq!(terminal_cost_phi(&lin, &g, &x).unwrap(), 160.0, max_relative = 1e-12);
    }

    #[test]
    fn terminal_lipschitz_growth_fitted_then_asserted() {
        let g = grid(60);
        let spec = CostSpec::new(
            RunningCost::Zero,
            TerminalCost::QuadraticTracking { target: 0.0, cutoff: 1.0, scale: 1.0 },
        );
        let ratio = |x1: &StateVector, x2: &StateVector| {
            let p1 = terminal_cost_phi(&spec, &g, x1).unwrap();
            let p2 = terminal_cost_phi(&spec, &g, x2).unwrap();
            let n1 = crate::weighted_space::weighted_norm(x1, &g).unwrap();
            let n2 = crate::weighted_space::weighted_norm(x2, &g).unwrap();
            let dn = crate::weighted_space::weighted_norm(&(x1 - x2), &g).unwrap();
            (p1 - p2).abs() / ((1.0 + n1 + n2) * dn)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut draw =
            |rng: &mut ChaCha8Rng| StateVector::from_fn(60, |_, _| rng.random::<f64>() * 4.0 - 2.0);
        let mut fitted: f64 = 0.0;
        for _ in 0..200 {
            let a = draw(&mut rng);
            let b = draw(&mut rng);
            fitted = fitted.max(ratio(&a, &b));
        }
        for _ in 0..200 {
            let a = draw(&mut rng);
            let b = draw(&mut rng);
            assert!(ratio(&a, &b) <= 1.2 * fitted);
        }
    }

    #[test]
    fn hamiltonian_bang_bang_closed_form() {
        let g = grid(20);
        let ctrl = interval();
        let spec = CostSpec::new(RunningCost::Zero, TerminalCost::Zero);
        let x = StateVector::zeros(20);
        for &z in &[-2.0, -0.3, 0.4, 3.0] {
            let hv = hamiltonian(&spec, &g, &ctrl, 0.0, &x, z).unwrap();
            assert_relative_eq!(hv.psi, -z.abs(), max_relative = 1e-14);
            assert_eq!(hv.gamma_u, -z.signum());
        }
        // Tie-break at z = 0 selects u_min.
        let hv = hamiltonian(&spec, &g, &ctrl, 0.0, &x, 0.0).unwrap();
        assert_eq!(hv.psi, 0.0);
        assert_eq!(hv.gamma_u, -1.0);
    }

    #[test]
    fn hamiltonian_quadratic_closed_form() {
        // L = u^2: psi(z) = -z^2/4 on |z| <= 2, clamped beyond; gamma = clamp(-z/2).
        let g = grid(20);
        let ctrl = interval();
        let spec = CostSpec::new(
            RunningCost::QuadraticTracking { target: 0.0, cutoff: 1.0, control_weight: 1.0, scale: 1.0 },
            TerminalCost::Zero,
        );
        let x = StateVector::zeros(20);
        for &z in &[-3.0, -1.7, -0.5, 0.0, 0.9, 2.0, 4.0] {
            let hv = hamiltonian(&spec, &g, &ctrl, 0.0, &x, z).unwrap();
            let u_star = ctrl.clamp(-z / 2.0);
            let psi_star = z * u_star + u_star * u_star;
            assert_relative_eq!(hv.psi, psi_star, epsilon = 1e-8);
            assert_relative_eq!(hv.gamma_u, u_star, epsilon = 1e-6);
        }
    }

    #[test]
    fn lipschitz_in_z_reports() {
        let g = grid(12);
        let ctrl = interval();
        for spec in [
            CostSpec::new(RunningCost::Zero, TerminalCost::Zero),
            CostSpec::new(RunningCost::Constant { value: 3.0 }, TerminalCost::Zero),
            CostSpec::new(
                RunningCost::QuadraticTracking {
                    target: 0.0,
                    cutoff: 1.0,
                    control_weight: 1.0,
                    scale: 1.0,
                },
                TerminalCost::Zero,
            ),
        ] {
            let rep = lipschitz_in_z_check(&spec, &g, &ctrl, 300, 17).unwrap();
            assert!(rep.fitted_constant <= 1.0 + 1e-6, "{spec:?}: {}", rep.fitted_constant);
        }
    }

    #[test]
    fn selection_attains_the_infimum() {
        let g = grid(30);
        let ctrl = interval();
        let spec = CostSpec::new(
            RunningCost::QuadraticTracking { target: 0.3, cutoff: 1.0, control_weight: 0.7, scale: 1.0 },
            TerminalCost::Zero,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let x = StateVector::from_fn(30, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let s = rng.random::<f64>();
            let z = rng.random::<f64>() * 6.0 - 3.0;
            let hv = hamiltonian(&spec, &g, &ctrl, s, &x, z).unwrap();
            let at_gamma = z * hv.gamma_u + running_cost_l(&spec, &g, &ctrl, s, &x, hv.gamma_u).unwrap();
            assert_relative_eq!(hv.psi, at_gamma, epsilon = 1e-10);
            let mut fresh_min = f64::INFINITY;
            for _ in 0..(10 * ctrl.n_grid) {
                let u = ctrl.u_min + rng.random::<f64>() * (ctrl.u_max - ctrl.u_min);
                fresh_min = fresh_min.min(z * u + running_cost_l(&spec, &g, &ctrl, s, &x, u).unwrap());
            }
            assert!(hv.psi <= fresh_min + 1e-3, "psi {} vs fresh {}", hv.psi, fresh_min);
        }
    }

    #[test]
    fn selection_is_deterministic_across_threads() {
        use rayon::prelude::*;
        let g = grid(25);
        let ctrl = interval();
        let spec = CostSpec::new(
            RunningCost::QuadraticTracking { target: 0.0, cutoff: 1.0, control_weight: 0.4, scale: 1.0 },
            TerminalCost::Zero,
        );
        let x = StateVector::from_fn(25, |i, _| (i as f64 * 0.37).sin());
        let baseline = hamiltonian(&spec, &g, &ctrl, 0.2, &x, 0.8).unwrap();
        let repeated: Vec<HamiltonianValue> = (0..64)
            .into_par_iter()
            .map(|_| hamiltonian(&spec, &g, &ctrl, 0.2, &x, 0.8).unwrap())
            .collect();
        for r in repeated {
            assert_eq!(r.psi.to_bits(), baseline.psi.to_bits());
            assert_eq!(r.gamma_u.to_bits(), baseline.gamma_u.to_bits());
        }
    }

    #[test]
    fn hamiltonian_is_midpoint_concave_in_z() {
        let g = grid(15);
        let ctrl = interval();
        let spec = CostSpec::new(
            RunningCost::QuadraticTracking { target: 0.0, cutoff: 1.0, control_weight: 0.5, scale: 1.0 },
            TerminalCost::Zero,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = StateVector::from_fn(15, |_, _| rng.random::<f64>() - 0.5);
        for _ in 0..300 {
            let z1 = rng.random::<f64>() * 8.0 - 4.0;
            let z2 = rng.random::<f64>() * 8.0 - 4.0;
            let pm = hamiltonian(&spec, &g, &ctrl, 0.0, &x, 0.5 * (z1 + z2)).unwrap().psi;
            let p1 = hamiltonian(&spec, &g, &ctrl, 0.0, &x, z1).unwrap().psi;
            let p2 = hamiltonian(&spec, &g, &ctrl, 0.0, &x, z2).unwrap().psi;
            assert!(pm >= 0.5 * (p1 + p2) - 1e-9);
        }
    }

    #[test]
    fn m_psi_finite_only_for_bounded_costs() {
        let g = grid(50);
        let ctrl = interval();
        let bounded = CostSpec::new(
            RunningCost::BoundedTracking {
                target: 0.0,
                cutoff: 1.0,
                cap: 2.0,
                control_weight: 0.25,
                scale: 1.0,
            },
            TerminalCost::Zero,
        );
        let m = bounded.m_psi(&g, &ctrl).unwrap();
        assert!(m > 0.0 && m.is_finite());
        // The state part never exceeds the cap mass.
        let mut mass = 0.0;
        for i in 0..g.len() {
            if g.nodes[i] <= 1.0 {
                mass += g.rho_values[i] * g.quad_weights[i] * 2.0;
            }
        }
        assert!(m <= mass + 1e-12);

        let quad = CostSpec::new(
            RunningCost::QuadraticTracking { target: 0.0, cutoff: 1.0, control_weight: 0.25, scale: 1.0 },
            TerminalCost::Zero,
        );
        assert!(quad.m_psi(&g, &ctrl).is_none());
    }

    #[test]
    fn growth_hypothesis_spot_checks_pass_for_catalog() {
        let g = grid(40);
        let ctrl = interval();
        for spec in [
            CostSpec::new(RunningCost::Zero, TerminalCost::Zero),
            CostSpec::new(
                RunningCost::QuadraticTracking { target: 0.0, cutoff: 1.0, control_weight: 0.1, scale: 1.0 },
                TerminalCost::Zero,
            ),
            CostSpec::new(
                RunningCost::BoundedTracking {
                    target: 0.0,
                    cutoff: 1.0,
                    cap: 1.0,
                    control_weight: 0.1,
                    scale: 1.0,
                },
                TerminalCost::Zero,
            ),
        ] {
            growth_spot_check(&spec, &g, &ctrl, 2000, 23).unwrap();
        }
    }
}
