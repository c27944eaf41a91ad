//! Dynamic movement primitives with a linear forcing term.
//!
//! A rollout is affine in the weights: per dimension
//! `y(t) = y0 + s * (a(t) + R(t) w)` with `s = goal - start`, where `a` is the
//! unit attractor response and `R` holds the unit responses of each basis.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Point = Vec<f64>;
pub type Trajectory = Vec<Point>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DmpError {
    #[error("demonstration {0} has fewer than two points")]
    TooShort(usize),
    #[error("demonstration {0} has zero path length")]
    Degenerate(usize),
    #[error("demonstration {index} has dimension {got}, expected {expected}")]
    Dimension { index: usize, got: usize, expected: usize },
    #[error("no demonstrations")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DmpConfig {
    pub timesteps: usize,
    pub n_basis: usize,
    /// Stiffness and damping of the transformation system.
    pub gains: (f64, f64),
    /// Integration substeps between output samples.
    pub substeps: usize,
    pub ridge: f64,
}

impl Default for DmpConfig {
    fn default() -> Self {
        DmpConfig { timesteps: 50, n_basis: 25, gains: (2500.0, 100.0), substeps: 10, ridge: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmpSkillController {
    pub dims: usize,
    pub n_basis: usize,
    pub timesteps: usize,
    pub gains: (f64, f64),
    pub substeps: usize,
    /// One row of basis weights per dimension.
    pub weights: Vec<Vec<f64>>,
}

const PHASE_DECAY: f64 = 4.0;
/// Basis centres span `[0, FORCING_SPAN]` so the attractor settles afterwards.
const FORCING_SPAN: f64 = 0.8;

/// Unit attractor response and per-basis responses on the output grid.
/// Every basis response is zero at the final sample.
#[derive(Debug, Clone)]
pub struct Responses {
    pub attractor: Vec<f64>,
    pub basis: DMatrix<f64>,
}

impl DmpSkillController {
    pub fn zero(dims: usize, cfg: &DmpConfig) -> Self {
        DmpSkillController {
            dims,
            n_basis: cfg.n_basis,
            timesteps: cfg.timesteps,
            gains: cfg.gains,
            substeps: cfg.substeps,
            weights: vec![vec![0.0; cfg.n_basis]; dims],
        }
    }

    fn forcing(&self, t: f64) -> Vec<f64> {
        let n = self.n_basis;
        let spacing = FORCING_SPAN / (n.max(2) - 1) as f64;
        let width = 0.5 / (spacing * spacing);
        let psi: Vec<f64> = (0..n)
            .map(|k| {
                let c = k as f64 * spacing;
                (-width * (t - c).powi(2)).exp()
            })
            .collect();
        let sum: f64 = psi.iter().sum::<f64>().max(1e-300);
        let gate = (-(t - FORCING_SPAN).max(0.0).powi(2) * width).exp();
        let phase = (-PHASE_DECAY * t).exp();
        psi.into_iter().map(|p| self.gains.0 * phase * gate * p / sum).collect()
    }

    /// Integrate `ÿ = K(g - y) - D ẏ + f(t)` from rest.
    fn integrate(&self, goal: f64, force: impl Fn(f64) -> f64) -> Vec<f64> {
        let (k, d) = self.gains;
        let steps = (self.timesteps.max(2) - 1) * self.substeps;
        let dt = 1.0 / steps as f64;
        let (mut y, mut v) = (0.0, 0.0);
        let mut out = vec![0.0];
        for i in 0..steps {
            let t = i as f64 * dt;
            let acc = k * (goal - y) - d * v + force(t);
            v += acc * dt;
            y += v * dt;
            if (i + 1) % self.substeps == 0 {
                out.push(y);
            }
        }
        out
    }

    pub fn responses(&self) -> Responses {
        let attractor = self.integrate(1.0, |_| 0.0);
        let mut basis = DMatrix::zeros(self.timesteps, self.n_basis);
        let last = self.timesteps - 1;
        for j in 0..self.n_basis {
            let col = self.integrate(0.0, |t| self.forcing(t)[j]);
            // leftover displacement at the end is removed along the attractor
            let tail = col[last] / attractor[last];
            for (t, y) in col.into_iter().enumerate() {
                basis[(t, j)] = y - tail * attractor[t];
            }
        }
        Responses { attractor, basis }
    }

    pub fn rollout(&self, start: &[f64], goal: &[f64]) -> Trajectory {
        self.rollout_with(&self.responses(), start, goal)
    }

    pub fn rollout_with(&self, r: &Responses, start: &[f64], goal: &[f64]) -> Trajectory {
        let mut out = vec![vec![0.0; self.dims]; self.timesteps];
        for d in 0..self.dims {
            let s = goal[d] - start[d];
            let w = DVector::from_column_slice(&self.weights[d]);
            let shape = &r.basis * w;
            for t in 0..self.timesteps {
                out[t][d] = start[d] + s * (r.attractor[t] + shape[t]);
            }
        }
        out[0] = start.to_vec();
        out
    }
}

/// Resample a polyline to `n` points evenly spaced in index time.
pub fn resample(p: &[Point], n: usize) -> Trajectory {
    let m = p.len();
    (0..n)
        .map(|i| {
            let u = i as f64 * (m - 1) as f64 / (n - 1) as f64;
            let k = (u.floor() as usize).min(m - 2);
            let f = u - k as f64;
            p[k].iter().zip(&p[k + 1]).map(|(a, b)| a + f * (b - a)).collect()
        })
        .collect()
}

/// Least-squares weights reproducing the demonstrations from their own endpoints.
pub fn fit_dmp(demos: &[Trajectory], cfg: &DmpConfig) -> Result<DmpSkillController, DmpError> {
    let first = demos.first().ok_or(DmpError::Empty)?;
    let dims = first.first().map(|p| p.len()).unwrap_or(0);
    for (index, d) in demos.iter().enumerate() {
        if d.len() < 2 {
            return Err(DmpError::TooShort(index));
        }
        if let Some(p) = d.iter().find(|p| p.len() != dims) {
            return Err(DmpError::Dimension { index, got: p.len(), expected: dims });
        }
        let length: f64 = d.windows(2).map(|w| dist(&w[0], &w[1])).sum();
        if length == 0.0 {
            return Err(DmpError::Degenerate(index));
        }
    }
    let mut ctrl = DmpSkillController::zero(dims, cfg);
    let r = ctrl.responses();
    let n = cfg.n_basis;
    for d in 0..dims {
        let mut ata = DMatrix::<f64>::identity(n, n) * cfg.ridge;
        let mut atb = DVector::<f64>::zeros(n);
        for demo in demos {
            let demo = resample(demo, cfg.timesteps);
            let (y0, g) = (demo[0][d], demo[cfg.timesteps - 1][d]);
            let s = g - y0;
            if s.abs() < 1e-9 {
                continue;
            }
            let target =
                DVector::from_iterator(cfg.timesteps, (0..cfg.timesteps).map(|t| (demo[t][d] - y0) / s - r.attractor[t]));
            ata += r.basis.transpose() * &r.basis;
            atb += r.basis.transpose() * target;
        }
        let w = ata.cholesky().map(|c| c.solve(&atb)).unwrap_or_else(|| DVector::zeros(n));
        ctrl.weights[d] = w.iter().copied().collect();
    }
    Ok(ctrl)
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
