//! Binary soft-margin SVM dual solved by sequential minimal optimization.
//!
//! Solves
//!
//! ```text
//! min_α  ½ αᵀQα − eᵀα   s.t.  0 ≤ αᵢ ≤ C,  yᵀα = 0,   Qᵢⱼ = yᵢyⱼK(xᵢ,xⱼ)
//! ```
//!
//! with the maximal-violating-pair / second-order working-set rule. The
//! iteration stops once m(α) − M(α) ≤ tol, where m is the largest −yᵢ∇ᵢ over
//! the "up" set and M the smallest over the "low" set.

use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-3,
            max_iter: 1_000_000,
        }
    }
}

/// Read access to the kernel values of the training subset.
pub trait KernelMatrix {
    fn size(&self) -> usize;
    fn k(&self, i: usize, j: usize) -> f64;
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    /// Decision function is Σ αᵢyᵢK(xᵢ,x) − rho.
    pub rho: f64,
    /// Dual objective in maximization form, Σα − ½αᵀQα.
    pub objective: f64,
    /// m(α) − M(α) at termination.
    pub kkt_gap: f64,
    pub iterations: usize,
}

pub fn solve(q: &dyn KernelMatrix, y: &[f64], c: f64, cfg: &SolverConfig) -> Result<DualSolution> {
    let n = q.size();
    assert_eq!(n, y.len());
    let mut alpha = vec![0.0; n];
    // ∇f(α) = Qα − e
    let mut grad = vec![-1.0; n];
    let diag: Vec<f64> = (0..n).map(|i| q.k(i, i)).collect();
    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);

    let mut iterations = 0;
    let kkt_gap = loop {
        // i: maximal −yₜ∇ₜ over the up set
        let mut g_max = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            if in_up(alpha[t], y[t]) {
                let v = -y[t] * grad[t];
                if v > g_max {
                    g_max = v;
                    i_sel = Some(t);
                }
            }
        }
        // j: second-order choice over the low set; also track M(α)
        let mut g_max2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut best = f64::INFINITY;
        if let Some(i) = i_sel {
            for t in 0..n {
                if !in_low(alpha[t], y[t]) {
                    continue;
                }
                let v = y[t] * grad[t];
                if v > g_max2 {
                    g_max2 = v;
                }
                let b = g_max + v;
                if b > 0.0 {
                    let a = diag[i] + diag[t] - 2.0 * q.k(i, t);
                    let obj = -(b * b) / if a > 0.0 { a } else { TAU };
                    if obj < best {
                        best = obj;
                        j_sel = Some(t);
                    }
                }
            }
        }
        let gap = g_max + g_max2;
        let (Some(i), Some(j)) = (i_sel, j_sel) else {
            break gap.max(0.0);
        };
        if gap <= cfg.tol {
            break gap;
        }
        if iterations >= cfg.max_iter {
            return Err(Error::NoConvergence {
                iterations,
                gap,
                tol: cfg.tol,
            });
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let kij = q.k(i, j);
        let quad = {
            let a = diag[i] + diag[j] - 2.0 * kij;
            if a > 0.0 {
                a
            } else {
                TAU
            }
        };
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let di = alpha[i] - old_i;
        let dj = alpha[j] - old_j;
        for (t, g) in grad.iter_mut().enumerate() {
            *g += y[t] * (y[i] * q.k(i, t) * di + y[j] * q.k(j, t) * dj);
        }
    };

    let rho = compute_rho(&alpha, &grad, y, c);
    let objective = alpha
        .iter()
        .zip(&grad)
        .map(|(a, g)| -0.5 * a * (g - 1.0))
        .sum();
    Ok(DualSolution {
        alpha,
        rho,
        objective,
        kkt_gap,
        iterations,
    })
}

fn compute_rho(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut free = 0usize;
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    if free > 0 {
        free_sum / free as f64
    } else {
        (ub + lb) / 2.0
    }
}

/// Dual objective Σα − ½ Σᵢⱼ αᵢαⱼyᵢyⱼKᵢⱼ evaluated directly.
pub fn dual_objective(q: &dyn KernelMatrix, y: &[f64], alpha: &[f64]) -> f64 {
    let n = q.size();
    let mut quad = 0.0;
    for i in 0..n {
        if alpha[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * q.k(i, j);
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// Largest KKT violation m(α) − M(α) of a feasible α (0 when optimal).
pub fn kkt_violation(q: &dyn KernelMatrix, y: &[f64], alpha: &[f64], c: f64) -> f64 {
    let n = q.size();
    let mut up = f64::NEG_INFINITY;
    let mut low = f64::INFINITY;
    for t in 0..n {
        let g: f64 = (0..n)
            .map(|s| y[t] * y[s] * q.k(t, s) * alpha[s])
            .sum::<f64>()
            - 1.0;
        let v = -y[t] * g;
        if (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0) {
            up = up.max(v);
        }
        if (y[t] > 0.0 && alpha[t] > 0.0) || (y[t] < 0.0 && alpha[t] < c) {
            low = low.min(v);
        }
    }
    (up - low).max(0.0)
}
