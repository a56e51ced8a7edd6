//! Method of moving asymptotes for box-bounded variables and one inequality
//! constraint `g(x) <= 0`.
//!
//! The convex separable subproblem is solved through its one-dimensional
//! dual; for a fixed multiplier every variable has a closed-form minimizer.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const RAA0: f64 = 1e-5;
const ALBEFA: f64 = 0.1;
const DUAL_CAP: f64 = 1e15;
/// Asymptote distance bounds, as fractions of the box width.
const MIN_GAP: f64 = 1e-5;
const MAX_GAP: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MmaSettings {
    /// Largest change of a variable per iteration, as a fraction of its box.
    pub move_limit: f64,
    pub asy_init: f64,
    pub asy_incr: f64,
    pub asy_decr: f64,
}

impl Default for MmaSettings {
    fn default() -> Self {
        Self {
            move_limit: 0.2,
            asy_init: 0.5,
            asy_incr: 1.2,
            asy_decr: 0.7,
        }
    }
}

impl MmaSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = self.move_limit > 0.0
            && self.move_limit <= 1.0
            && self.asy_init > 0.0
            && self.asy_incr >= 1.0
            && self.asy_decr > 0.0
            && self.asy_decr <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid MMA settings {self:?}")))
        }
    }
}

#[derive(Debug, Clone)]
pub struct MmaState {
    pub settings: MmaSettings,
    pub x_min: Vec<f64>,
    pub x_max: Vec<f64>,
    pub iteration: usize,
    pub x_old1: Vec<f64>,
    pub x_old2: Vec<f64>,
    pub low: Vec<f64>,
    pub upp: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MmaStep {
    pub x: Vec<f64>,
    /// Multiplier of the constraint in the subproblem.
    pub multiplier: f64,
    /// Subproblem objective at the new and at the previous point.
    pub approx_objective: (f64, f64),
}

/// Per-variable data of the convex approximation.
#[derive(Debug, Clone, Copy)]
struct Approx {
    low: f64,
    upp: f64,
    alpha: f64,
    beta: f64,
    p0: f64,
    q0: f64,
    p1: f64,
    q1: f64,
}

impl Approx {
    fn minimizer(&self, lambda: f64) -> f64 {
        let p = (self.p0 + lambda * self.p1).sqrt();
        let q = (self.q0 + lambda * self.q1).sqrt();
        let x = (p * self.low + q * self.upp) / (p + q);
        x.clamp(self.alpha, self.beta)
    }

    fn objective(&self, x: f64) -> f64 {
        self.p0 / (self.upp - x) + self.q0 / (x - self.low)
    }

    fn constraint(&self, x: f64) -> f64 {
        self.p1 / (self.upp - x) + self.q1 / (x - self.low)
    }
}

impl MmaState {
    pub fn new(x_min: Vec<f64>, x_max: Vec<f64>, settings: MmaSettings) -> Result<Self> {
        settings.validate()?;
        if x_min.len() != x_max.len() || x_min.iter().zip(&x_max).any(|(a, b)| !(a < b)) {
            return Err(Error::Config("MMA bounds must satisfy x_min < x_max".into()));
        }
        let n = x_min.len();
        Ok(Self {
            settings,
            x_min,
            x_max,
            iteration: 0,
            x_old1: vec![0.0; n],
            x_old2: vec![0.0; n],
            low: vec![0.0; n],
            upp: vec![0.0; n],
        })
    }

    pub fn unit_box(n: usize, settings: MmaSettings) -> Result<Self> {
        Self::new(vec![0.0; n], vec![1.0; n], settings)
    }

    /// Moves the asymptotes for the next subproblem around `x`.
    pub fn update_asymptotes(&mut self, x: &[f64]) {
        let s = self.settings;
        let first = self.iteration < 2;
        for j in 0..x.len() {
            let range = self.x_max[j] - self.x_min[j];
            if first {
                self.low[j] = x[j] - s.asy_init * range;
                self.upp[j] = x[j] + s.asy_init * range;
                continue;
            }
            let trend = (x[j] - self.x_old1[j]) * (self.x_old1[j] - self.x_old2[j]);
            let factor = if trend < 0.0 {
                s.asy_decr
            } else if trend > 0.0 {
                s.asy_incr
            } else {
                1.0
            };
            let low = x[j] - factor * (self.x_old1[j] - self.low[j]);
            let upp = x[j] + factor * (self.upp[j] - self.x_old1[j]);
            self.low[j] = low.clamp(x[j] - MAX_GAP * range, x[j] - MIN_GAP * range);
            self.upp[j] = upp.clamp(x[j] + MIN_GAP * range, x[j] + MAX_GAP * range);
        }
    }

    /// One outer iteration: returns the minimizer of the subproblem built at `x`.
    pub fn update(&mut self, x: &[f64], f0_grad: &[f64], g: f64, g_grad: &[f64]) -> Result<MmaStep> {
        let n = x.len();
        if f0_grad.len() != n || g_grad.len() != n || self.x_min.len() != n {
            return Err(Error::Optimizer("gradient length mismatch".into()));
        }
        if !g.is_finite() || f0_grad.iter().chain(g_grad).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("optimizer input".into()));
        }
        self.update_asymptotes(x);
        let move_limit = self.settings.move_limit;
        let approx: Vec<Approx> = (0..n)
            .into_par_iter()
            .map(|j| {
                let (low, upp) = (self.low[j], self.upp[j]);
                let range = self.x_max[j] - self.x_min[j];
                let alpha = (low + ALBEFA * (x[j] - low)).max(x[j] - move_limit * range).max(self.x_min[j]);
                let beta = (upp - ALBEFA * (upp - x[j])).min(x[j] + move_limit * range).min(self.x_max[j]);
                let ux2 = (upp - x[j]).powi(2);
                let xl2 = (x[j] - low).powi(2);
                let split = |d: f64, reg: f64| {
                    let (pos, neg) = (d.max(0.0), (-d).max(0.0));
                    let pq = 0.001 * (pos + neg) + reg / range;
                    ((pos + pq) * ux2, (neg + pq) * xl2)
                };
                let (p0, q0) = split(f0_grad[j], RAA0);
                let (p1, q1) = split(g_grad[j], RAA0);
                Approx {
                    low,
                    upp,
                    alpha,
                    beta,
                    p0,
                    q0,
                    p1,
                    q1,
                }
            })
            .collect();

        // Approximation of g equals g at x, so the subproblem asks for
        // sum_j constraint_j(x_new) <= rhs.
        let rhs = approx.iter().zip(x).map(|(a, &xj)| a.constraint(xj)).sum::<f64>() - g;
        let slack = |lambda: f64| -> f64 {
            rhs - approx
                .iter()
                .map(|a| a.constraint(a.minimizer(lambda)))
                .sum::<f64>()
        };

        let lambda = if slack(0.0) >= 0.0 {
            0.0
        } else {
            let mut lo = 0.0;
            let mut hi = 1.0;
            while slack(hi) < 0.0 {
                lo = hi;
                hi *= 2.0;
                if hi > DUAL_CAP {
                    break;
                }
            }
            if hi > DUAL_CAP {
                // The box holds no subproblem-feasible point; use the most feasible one.
                log::warn!("MMA subproblem infeasible within the move limits");
                hi
            } else {
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if slack(mid) < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                hi
            }
        };

        let x_new: Vec<f64> = approx.iter().map(|a| a.minimizer(lambda)).collect();
        if x_new.iter().any(|v| !v.is_finite()) {
            return Err(Error::Optimizer("subproblem produced a non-finite point".into()));
        }
        let value_new: f64 = approx.iter().zip(&x_new).map(|(a, &v)| a.objective(v)).sum();
        let value_old: f64 = approx.iter().zip(x).map(|(a, &v)| a.objective(v)).sum();

        self.x_old2 = std::mem::replace(&mut self.x_old1, x.to_vec());
        self.iteration += 1;
        Ok(MmaStep {
            x: x_new,
            multiplier: lambda,
            approx_objective: (value_new, value_old),
        })
    }
}
