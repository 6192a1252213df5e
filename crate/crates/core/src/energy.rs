//! Discrete Gagliardo energy for a single fractional r-Laplacian.
//!
//! With midpoint collocation and cell-constant interpolation the energy reads
//!
//! ```text
//! E(u) = sum_{i != j} |u_i - u_j|^r w_ij + sum_i |u_i|^r e_i
//! ```
//!
//! where `w_ij = h^2 / |x_i - x_j|^{1+sr}` and `e_i = 2 h k_i` carries the
//! interaction with the exterior, on which `u` vanishes.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::domain::{exterior_kernel_weight, FractionalParams, Grid, GridFunction};
use crate::error::{FracPqError, Result};

/// `|x|^r`, with the common integer exponents special-cased.
#[inline]
pub fn abs_pow(x: f64, r: f64) -> f64 {
    let a = x.abs();
    if r == 2.0 {
        a * a
    } else if r == 3.0 {
        a * a * a
    } else if a == 0.0 {
        0.0
    } else {
        a.powf(r)
    }
}

/// `|x|^{r-2} x`, with `|0|^{r-2} 0 = 0`.
#[inline]
pub fn signed_pow(x: f64, r: f64) -> f64 {
    if r == 2.0 {
        x
    } else if r == 3.0 {
        x.abs() * x
    } else if x == 0.0 {
        0.0
    } else {
        x.abs().powf(r - 2.0) * x
    }
}

/// Pairwise and exterior weights for one `(s, r)` operator on one grid.
#[derive(Debug, Clone)]
pub struct EnergyAssembly {
    grid: Arc<Grid>,
    params: FractionalParams,
    /// Row-major `n x n`, zero diagonal.
    pair_weights: Vec<f64>,
    exterior_weights: Vec<f64>,
}

/// Builds the weight tables.
pub fn assemble(grid: Arc<Grid>, params: FractionalParams) -> Result<EnergyAssembly> {
    let n = grid.n();
    let h = grid.h();
    let x = grid.nodes();
    let expo = 1.0 + params.sr();
    let mut pair_weights = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (x[j] - x[i]).powf(expo);
            let w = h * h / d;
            if !(d > 0.0 && w.is_finite()) {
                return Err(FracPqError::Overflow { i, j });
            }
            pair_weights[i * n + j] = w;
            pair_weights[j * n + i] = w;
        }
    }
    let exterior_weights =
        (0..n).map(|i| exterior_kernel_weight(&grid, i, params).map(|k| 2.0 * h * k)).collect::<Result<Vec<_>>>()?;
    Ok(EnergyAssembly { grid, params, pair_weights, exterior_weights })
}

impl EnergyAssembly {
    pub fn new(grid: Arc<Grid>, params: FractionalParams) -> Result<Self> {
        assemble(grid, params)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn params(&self) -> FractionalParams {
        self.params
    }

    pub fn r(&self) -> f64 {
        self.params.r()
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    #[inline]
    pub fn pair_weight(&self, i: usize, j: usize) -> f64 {
        self.pair_weights[i * self.n() + j]
    }

    pub fn exterior_weights(&self) -> &[f64] {
        &self.exterior_weights
    }

    fn check(&self, u: &GridFunction) -> Result<()> {
        u.check_same_grid(&self.grid)
    }

    /// `E(u)`.
    pub fn energy(&self, u: &GridFunction) -> Result<f64> {
        self.check(u)?;
        Ok(self.energy_raw(u.values()))
    }

    /// `E` on a bare value slice; callers guarantee the length.
    pub fn energy_raw(&self, u: &[f64]) -> f64 {
        let n = self.n();
        let r = self.r();
        let mut pairs = 0.0;
        for i in 0..n {
            let row = &self.pair_weights[i * n..(i + 1) * n];
            let ui = u[i];
            let mut acc = 0.0;
            for j in (i + 1)..n {
                acc += abs_pow(ui - u[j], r) * row[j];
            }
            pairs += acc;
        }
        let ext: f64 = u.iter().zip(&self.exterior_weights).map(|(v, e)| abs_pow(*v, r) * e).sum();
        2.0 * pairs + ext
    }

    /// Gradient of `E/r`.
    pub fn operator_apply(&self, u: &GridFunction) -> Result<GridFunction> {
        self.check(u)?;
        let g = self.operator_apply_raw(u.values());
        GridFunction::new(self.grid.clone(), g)
    }

    pub fn operator_apply_raw(&self, u: &[f64]) -> Vec<f64> {
        let n = self.n();
        let r = self.r();
        let mut g: Vec<f64> = u.iter().zip(&self.exterior_weights).map(|(v, e)| e * signed_pow(*v, r)).collect();
        for i in 0..n {
            let row = &self.pair_weights[i * n..(i + 1) * n];
            for j in (i + 1)..n {
                let t = 2.0 * row[j] * signed_pow(u[i] - u[j], r);
                g[i] += t;
                g[j] -= t;
            }
        }
        g
    }

    /// Hessian of `E/r`. For `r < 2` the factor `|d|^{r-2}` is evaluated at
    /// `max(|d|, floor)`, which keeps the matrix finite and positive definite.
    pub fn hessian_raw(&self, u: &[f64], floor: f64) -> DMatrix<f64> {
        let n = self.n();
        let r = self.r();
        let c = r - 1.0;
        let factor = |d: f64| -> f64 {
            if r == 2.0 {
                1.0
            } else if r > 2.0 {
                abs_pow(d, r - 2.0)
            } else {
                d.abs().max(floor).powf(r - 2.0)
            }
        };
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = c * self.exterior_weights[i] * factor(u[i]);
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let t = 2.0 * self.pair_weight(i, j) * c * factor(u[i] - u[j]);
                m[(i, j)] -= t;
                m[(j, i)] -= t;
                m[(i, i)] += t;
                m[(j, j)] += t;
            }
        }
        m
    }

    /// `sum_i |u_i|^gamma h`.
    pub fn lp_norm_pow(&self, u: &GridFunction, gamma: f64) -> Result<f64> {
        self.check(u)?;
        Ok(lp_norm_pow_raw(self.grid.h(), u.values(), gamma))
    }
}

/// `sum_i |u_i|^gamma h`.
pub fn lp_norm_pow(grid: &Grid, u: &GridFunction, gamma: f64) -> f64 {
    lp_norm_pow_raw(grid.h(), u.values(), gamma)
}

pub fn lp_norm_pow_raw(h: f64, u: &[f64], gamma: f64) -> f64 {
    u.iter().map(|v| abs_pow(*v, gamma)).sum::<f64>() * h
}

/// `sum_i (u_i^+)^gamma h`.
pub fn positive_part_norm_pow_raw(h: f64, u: &[f64], gamma: f64) -> f64 {
    u.iter().map(|v| abs_pow(v.max(0.0), gamma)).sum::<f64>() * h
}

/// Energy of the `(s, r)` operator at `u`, assembled on the fly.
pub fn energy(asm: &EnergyAssembly, u: &GridFunction) -> Result<f64> {
    asm.energy(u)
}

pub fn operator_apply(asm: &EnergyAssembly, u: &GridFunction) -> Result<GridFunction> {
    asm.operator_apply(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_grid, Interval};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(n: usize, s: f64, r: f64) -> EnergyAssembly {
        let g = Arc::new(build_grid(Interval::unit(), n).unwrap());
        assemble(g, FractionalParams::new(s, r).unwrap()).unwrap()
    }

    fn random_fn(asm: &EnergyAssembly, rng: &mut ChaCha8Rng) -> GridFunction {
        let v = (0..asm.n()).map(|_| rng.random_range(-2.0..2.0)).collect();
        GridFunction::new(asm.grid().clone(), v).unwrap()
    }

    #[test]
    fn single_cell() {
        // sr = 0.5: e_1 = 2 * 1 * 5.656854...
        let asm = setup(1, 0.25, 2.0);
        assert_eq!(asm.pair_weights.len(), 1);
        assert_eq!(asm.pair_weight(0, 0), 0.0);
        let u = GridFunction::constant(asm.grid().clone(), 1.0);
        let e = asm.energy(&u).unwrap();
        assert!((e - 11.313708498984761).abs() < 1e-12);
        // sr = 1: k = 4.
        let asm = setup(1, 0.5, 2.0);
        assert!((asm.energy(&u).unwrap() - 8.0).abs() < 1e-14);
        // sr = 1.5.
        let asm = setup(1, 0.5, 3.0);
        assert!((asm.energy(&u).unwrap() - 7.542472332656507).abs() < 1e-12);
    }

    #[test]
    fn two_cell_pair_weight() {
        let asm = setup(2, 0.25, 2.0);
        assert!((asm.pair_weight(0, 1) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-14);
        assert_eq!(asm.pair_weight(0, 1), asm.pair_weight(1, 0));
    }

    #[test]
    fn weights_symmetric_positive() {
        let asm = setup(17, 0.35, 2.7);
        for i in 0..17 {
            assert_eq!(asm.pair_weight(i, i), 0.0);
            assert!(asm.exterior_weights()[i] > 0.0);
            for j in 0..17 {
                assert_eq!(asm.pair_weight(i, j), asm.pair_weight(j, i));
                assert!(asm.pair_weight(i, j) >= 0.0);
            }
        }
    }

    #[test]
    fn zero_function() {
        let asm = setup(8, 0.4, 1.5);
        let z = GridFunction::zeros(asm.grid().clone());
        assert_eq!(asm.energy(&z).unwrap(), 0.0);
        assert!(asm.operator_apply(&z).unwrap().values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn homogeneity_and_pairing() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (s, r) in [(0.3, 1.5), (0.5, 2.0), (0.7, 3.0), (0.9, 4.5)] {
            let asm = setup(12, s, r);
            for _ in 0..100 {
                let u = random_fn(&asm, &mut rng);
                let c: f64 = rng.random_range(-3.0..3.0);
                let e = asm.energy(&u).unwrap();
                let ec = asm.energy(&u.scaled(c)).unwrap();
                assert!((ec - c.abs().powf(r) * e).abs() <= 1e-12 * ec.abs().max(1e-300));
                let g = asm.operator_apply(&u).unwrap();
                let pair: f64 = g.values().iter().zip(u.values()).map(|(a, b)| a * b).sum();
                assert!((pair - e).abs() <= 1e-10 * e);
                let gc = asm.operator_apply(&u.scaled(c)).unwrap();
                let k = c.abs().powf(r - 2.0) * c;
                for (a, b) in gc.values().iter().zip(g.values()) {
                    assert!((a - k * b).abs() <= 1e-10 * (1.0 + (k * b).abs()));
                }
            }
        }
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (s, r) in [(0.5, 2.0), (0.7, 3.0), (0.4, 2.5)] {
            let asm = setup(9, s, r);
            let u = random_fn(&asm, &mut rng);
            let hm = asm.hessian_raw(u.values(), 0.0);
            for k in 0..asm.n() {
                let step = 1e-6;
                let mut up = u.values().to_vec();
                let mut dn = up.clone();
                up[k] += step;
                dn[k] -= step;
                let gp = asm.operator_apply_raw(&up);
                let gm = asm.operator_apply_raw(&dn);
                for i in 0..asm.n() {
                    let fd = (gp[i] - gm[i]) / (2.0 * step);
                    assert!((fd - hm[(i, k)]).abs() <= 1e-5 * (1.0 + hm[(i, k)].abs()));
                }
            }
        }
    }

    #[test]
    fn norms() {
        let g = Arc::new(build_grid(Interval::unit(), 1).unwrap());
        let u = GridFunction::new(g.clone(), vec![2.0]).unwrap();
        assert_eq!(lp_norm_pow(&g, &u, 3.0), 8.0);
        assert_eq!(lp_norm_pow(&g, &GridFunction::zeros(g.clone()), 2.0), 0.0);
        let v = GridFunction::new(g.clone(), vec![-2.0]).unwrap();
        assert_eq!(positive_part_norm_pow_raw(1.0, v.values(), 3.0), 0.0);
    }

    #[test]
    fn grid_mismatch_rejected() {
        let asm = setup(4, 0.5, 2.0);
        let other = Arc::new(build_grid(Interval::unit(), 5).unwrap());
        let u = GridFunction::constant(other, 1.0);
        assert!(asm.energy(&u).is_err());
        assert!(asm.operator_apply(&u).is_err());
    }
}
