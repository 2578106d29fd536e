//! Dispersion-only baseline: place `m` points in a box to minimize the sum
//! of inverse squared pairwise distances, by coordinate descent with random
//! restarts.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, child_seed, streams};

/// `sum_{i<j} 1 / |p_i - p_j|^2`; `+inf` when two points coincide.
pub fn energy(points: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for (a, p) in points.iter().enumerate() {
        for q in &points[a + 1..] {
            let d2: f64 = p.iter().zip(q).map(|(x, y)| (x - y) * (x - y)).sum();
            if d2 == 0.0 {
                return f64::INFINITY;
            }
            total += 1.0 / d2;
        }
    }
    total
}

/// Energy terms involving point `p`.
fn point_energy(points: &[Vec<f64>], p: usize) -> f64 {
    let mut total = 0.0;
    for (q, other) in points.iter().enumerate() {
        if q == p {
            continue;
        }
        let d2: f64 = points[p].iter().zip(other).map(|(x, y)| (x - y) * (x - y)).sum();
        if d2 == 0.0 {
            return f64::INFINITY;
        }
        total += 1.0 / d2;
    }
    total
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnergyConfig {
    /// Number of points.
    pub m: usize,
    /// Per-axis lower bounds of the box; its length sets the dimension.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub restarts: usize,
    /// Evenly spaced values probed per line search before refinement.
    pub scan_points: usize,
    /// Golden-section interval width at which a line search stops.
    pub line_tol: f64,
    /// A sweep improving the energy by at most this ends the descent.
    pub tol: f64,
    pub max_sweeps: usize,
    pub seed: u64,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        EnergyConfig {
            m: 5,
            lower: vec![0.0, 0.0],
            upper: vec![1.0, 1.0],
            restarts: 10,
            scan_points: 65,
            line_tol: 1e-8,
            tol: 1e-8,
            max_sweeps: 1000,
            seed: 0,
        }
    }
}

impl EnergyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::Config(format!("energy baseline needs m >= 2, got {}", self.m)));
        }
        if self.restarts == 0 {
            return Err(Error::Config("energy baseline needs at least one restart".into()));
        }
        if self.lower.is_empty() || self.lower.len() != self.upper.len() {
            return Err(Error::Config("box bounds must be non-empty and of equal length".into()));
        }
        if self.lower.iter().zip(&self.upper).any(|(l, u)| !(l < u)) {
            return Err(Error::Config("each lower bound must lie below its upper bound".into()));
        }
        if self.scan_points < 2 || !(self.line_tol > 0.0) || !(self.tol >= 0.0) {
            return Err(Error::Config("line search needs at least 2 scan points and positive tolerances".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyRun {
    pub restart: usize,
    pub seed: u64,
    pub points: Vec<Vec<f64>>,
    pub energy: f64,
    pub initial_energy: f64,
    pub sweeps: usize,
}

/// Best value of coordinate `axis` of point `p` within `[lo, hi]`: a coarse
/// scan followed by golden-section refinement around the best probe. Returns
/// the new value and its point energy, only when it improves on the current.
fn line_search(points: &mut [Vec<f64>], p: usize, axis: usize, lo: f64, hi: f64, cfg: &EnergyConfig) -> Option<(f64, f64)> {
    let current = points[p][axis];
    let base = point_energy(points, p);
    let eval = |c: f64, pts: &mut [Vec<f64>]| {
        pts[p][axis] = c;
        point_energy(pts, p)
    };
    let step = (hi - lo) / (cfg.scan_points - 1) as f64;
    let (mut best_c, mut best_e) = (current, base);
    for s in 0..cfg.scan_points {
        let c = lo + step * s as f64;
        let e = eval(c, points);
        if e < best_e {
            best_c = c;
            best_e = e;
        }
    }
    let (mut a, mut b) = ((best_c - step).max(lo), (best_c + step).min(hi));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let mut f1 = eval(x1, points);
    let mut f2 = eval(x2, points);
    for (x, f) in [(x1, f1), (x2, f2)] {
        if f < best_e {
            best_c = x;
            best_e = f;
        }
    }
    while b - a > cfg.line_tol {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = eval(x1, points);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = eval(x2, points);
        }
        if f1 < best_e {
            best_c = x1;
            best_e = f1;
        }
        if f2 < best_e {
            best_c = x2;
            best_e = f2;
        }
    }
    points[p][axis] = current;
    (best_e < base).then_some((best_c, best_e - base))
}

fn descend(cfg: &EnergyConfig, restart: usize) -> EnergyRun {
    let seed = child_seed(cfg.seed, restart as u64);
    let mut rng = rng::stream(seed, streams::BASELINE);
    let dim = cfg.lower.len();
    let mut points: Vec<Vec<f64>> =
        (0..cfg.m).map(|_| (0..dim).map(|a| rng.random_range(cfg.lower[a]..cfg.upper[a])).collect()).collect();
    let initial_energy = energy(&points);
    let mut sweeps = 0;
    while sweeps < cfg.max_sweeps {
        sweeps += 1;
        let mut improvement = 0.0;
        for p in 0..cfg.m {
            for a in 0..dim {
                if let Some((c, delta)) = line_search(&mut points, p, a, cfg.lower[a], cfg.upper[a], cfg) {
                    points[p][a] = c;
                    improvement -= delta;
                }
            }
        }
        if improvement <= cfg.tol {
            break;
        }
    }
    EnergyRun { restart, seed, energy: energy(&points), points, initial_energy, sweeps }
}

/// Coordinate descent from `restarts` random starts, sorted by final energy.
pub fn minimize_energy(cfg: &EnergyConfig) -> Result<Vec<EnergyRun>> {
    cfg.validate()?;
    let mut runs: Vec<EnergyRun> = (0..cfg.restarts).into_par_iter().map(|r| descend(cfg, r)).collect();
    runs.sort_by(|a, b| a.energy.total_cmp(&b.energy).then(a.restart.cmp(&b.restart)));
    Ok(runs)
}
