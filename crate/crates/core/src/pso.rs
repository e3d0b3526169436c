//! Inertia-weight particle swarm optimizer over the unit box, and filter
//! tuning on top of it.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::Sequence;
use crate::error::{Error, Result};
use crate::filters::{
    run_filter, ComplementaryParams, EkfParams, FilterKind, FilterParams, InitialState, MadgwickParams,
    MahonyParams,
};
use crate::train::per_step_mse;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PsoConfig {
    pub w: f64,
    pub c1: f64,
    pub c2: f64,
    pub n_particles: usize,
    pub max_iters: usize,
    /// Added once per coordinate outside `[lower, upper]`.
    pub penalty: f64,
    pub lower: f64,
    pub upper: f64,
    /// Stop after this many iterations without a gbest gain above `tolerance`.
    pub stagnation_iters: usize,
    pub tolerance: f64,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            w: 0.8,
            c1: 0.15,
            c2: 0.05,
            n_particles: 100,
            max_iters: 300,
            penalty: 10.0,
            lower: 0.0,
            upper: 1.0,
            stagnation_iters: 50,
            tolerance: 1e-9,
        }
    }
}

impl PsoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.w >= 0.0 && self.c1 >= 0.0 && self.c2 >= 0.0 && self.penalty >= 0.0) {
            return Err(Error::InvalidConfig("PSO coefficients must be non-negative".into()));
        }
        if self.n_particles < 2 {
            return Err(Error::InvalidConfig("PSO needs at least two particles".into()));
        }
        if !(self.upper > self.lower) {
            return Err(Error::InvalidConfig("PSO box is empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub best_position: Vec<f64>,
    pub best_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsoIteration {
    pub iter: usize,
    pub gbest_cost: f64,
    pub gbest: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsoResult {
    pub best: Vec<f64>,
    pub best_cost: f64,
    /// One row per iteration, starting with the initial swarm as iteration 0.
    pub history: Vec<PsoIteration>,
}

/// `cost(clamp(x)) + penalty · #{coordinates outside the box}`. Non-finite
/// costs become `+∞` so a bad particle never wins.
pub fn penalized_cost(cost: &(impl Fn(&[f64]) -> f64 + ?Sized), x: &[f64], cfg: &PsoConfig) -> f64 {
    let outside = x.iter().filter(|v| !(cfg.lower..=cfg.upper).contains(*v)).count();
    let clamped: Vec<f64> = x
        .iter()
        .map(|v| if v.is_nan() { cfg.lower } else { v.clamp(cfg.lower, cfg.upper) })
        .collect();
    let c = cost(&clamped) + cfg.penalty * outside as f64;
    if c.is_finite() {
        c
    } else {
        f64::INFINITY
    }
}

fn evaluate<F>(cost: &F, xs: &[Vec<f64>], cfg: &PsoConfig) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    use rayon::prelude::*;
    xs.par_iter().map(|x| penalized_cost(cost, x, cfg)).collect()
}

/// Minimizes `cost` over `[lower, upper]^dim` from a uniform random swarm
/// with zero initial velocities.
pub fn pso_minimize<F>(cost: F, dim: usize, cfg: &PsoConfig, seed: u64) -> Result<PsoResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init: Vec<Vec<f64>> = (0..cfg.n_particles)
        .map(|_| (0..dim).map(|_| rng.random_range(cfg.lower..=cfg.upper)).collect())
        .collect();
    run_swarm(cost, init, cfg, &mut rng)
}

/// Like [`pso_minimize`] but from the given initial positions.
pub fn pso_minimize_from<F>(cost: F, init: Vec<Vec<f64>>, cfg: &PsoConfig, seed: u64) -> Result<PsoResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if init.is_empty() {
        return Err(Error::InvalidConfig("empty swarm".into()));
    }
    let dim = init[0].len();
    if let Some(bad) = init.iter().find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch {
            what: "particle position",
            expected: dim,
            found: bad.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    run_swarm(cost, init, cfg, &mut rng)
}

fn run_swarm<F>(cost: F, init: Vec<Vec<f64>>, cfg: &PsoConfig, rng: &mut ChaCha8Rng) -> Result<PsoResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let dim = init[0].len();
    let costs = evaluate(&cost, &init, cfg);
    let mut swarm: Vec<Particle> = init
        .into_iter()
        .zip(costs)
        .map(|(x, c)| Particle {
            velocity: vec![0.0; dim],
            best_position: x.clone(),
            position: x,
            best_cost: c,
        })
        .collect();

    // Ties go to the lowest index so the result is order-stable.
    let best_of = |swarm: &[Particle]| -> (Vec<f64>, f64) {
        let mut k = 0;
        for (i, p) in swarm.iter().enumerate() {
            if p.best_cost < swarm[k].best_cost {
                k = i;
            }
        }
        (swarm[k].best_position.clone(), swarm[k].best_cost)
    };
    let (mut gbest, mut gbest_cost) = best_of(&swarm);
    let mut history = vec![PsoIteration {
        iter: 0,
        gbest_cost,
        gbest: gbest.clone(),
    }];
    let mut stale = 0;

    for iter in 1..=cfg.max_iters {
        for p in &mut swarm {
            for d in 0..dim {
                let r1: f64 = rng.random();
                let r2: f64 = rng.random();
                p.velocity[d] = cfg.w * p.velocity[d]
                    + cfg.c1 * r1 * (p.best_position[d] - p.position[d])
                    + cfg.c2 * r2 * (gbest[d] - p.position[d]);
                p.position[d] += p.velocity[d];
            }
        }
        let positions: Vec<Vec<f64>> = swarm.iter().map(|p| p.position.clone()).collect();
        let costs = evaluate(&cost, &positions, cfg);
        for (p, c) in swarm.iter_mut().zip(costs) {
            if c < p.best_cost {
                p.best_cost = c;
                p.best_position = p.position.clone();
            }
        }
        let (cand, cand_cost) = best_of(&swarm);
        if cand_cost < gbest_cost {
            if gbest_cost - cand_cost > cfg.tolerance {
                stale = 0;
            } else {
                stale += 1;
            }
            gbest = cand;
            gbest_cost = cand_cost;
        } else {
            stale += 1;
        }
        history.push(PsoIteration {
            iter,
            gbest_cost,
            gbest: gbest.clone(),
        });
        if stale >= cfg.stagnation_iters {
            break;
        }
    }

    Ok(PsoResult {
        best: gbest,
        best_cost: gbest_cost,
        history,
    })
}

pub fn write_pso_report<W: Write>(history: &[PsoIteration], out: W) -> Result<()> {
    let dim = history.first().map_or(0, |h| h.gbest.len());
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let mut header = vec!["iter".to_string(), "gbest_cost".to_string()];
    header.extend((0..dim).map(|d| format!("param_{d}")));
    w.write_record(&header)?;
    for h in history {
        let mut row = vec![h.iter.to_string(), h.gbest_cost.to_string()];
        row.extend(h.gbest.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Noise scales of the EKF are searched on a log axis over this range.
pub const EKF_LOG_RANGE: (f64, f64) = (1e-6, 1e2);
pub const MAHONY_KP_MAX: f64 = 10.0;
pub const MAHONY_KI_MAX: f64 = 1.0;

pub fn unit_dims(kind: FilterKind) -> usize {
    match kind {
        FilterKind::Complementary | FilterKind::Madgwick => 1,
        FilterKind::Mahony | FilterKind::Ekf => 2,
    }
}

fn log_map(u: f64) -> f64 {
    let (lo, hi) = (EKF_LOG_RANGE.0.log10(), EKF_LOG_RANGE.1.log10());
    10f64.powf(lo + u * (hi - lo))
}

fn log_unmap(v: f64) -> f64 {
    let (lo, hi) = (EKF_LOG_RANGE.0.log10(), EKF_LOG_RANGE.1.log10());
    (v.log10() - lo) / (hi - lo)
}

/// Filter parameters for a point of the unit box.
pub fn params_from_unit(kind: FilterKind, x: &[f64]) -> FilterParams {
    match kind {
        FilterKind::Complementary => FilterParams::Complementary(ComplementaryParams::plain(x[0])),
        FilterKind::Mahony => FilterParams::Mahony(MahonyParams::new(MAHONY_KP_MAX * x[0], MAHONY_KI_MAX * x[1])),
        FilterKind::Madgwick => FilterParams::Madgwick(MadgwickParams { beta: x[0] }),
        FilterKind::Ekf => FilterParams::Ekf(EkfParams::new(log_map(x[0]), log_map(x[1]))),
    }
}

pub fn params_to_unit(p: &FilterParams) -> Vec<f64> {
    match p {
        FilterParams::Complementary(c) => vec![c.gamma],
        FilterParams::Mahony(m) => vec![m.k_p / MAHONY_KP_MAX, m.k_i / MAHONY_KI_MAX],
        FilterParams::Madgwick(m) => vec![m.beta],
        FilterParams::Ekf(e) => vec![log_unmap(e.q_proc), log_unmap(e.r_meas)],
    }
}

/// Mean over sequences of the per-step MSE (radians²) of a filter started
/// without knowledge of the initial attitude.
pub fn filter_cost(params: &FilterParams, sequences: &[Sequence]) -> Result<f64> {
    if sequences.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    for seq in sequences {
        let est = run_filter(params, seq, InitialState::Uninformed)?;
        total += per_step_mse(&est, seq.truth())?;
    }
    Ok(total / sequences.len() as f64)
}

#[derive(Debug, Clone)]
pub struct TuneResult {
    pub params: FilterParams,
    pub cost: f64,
    pub swarm: PsoResult,
}

pub fn tune_filter(kind: FilterKind, sequences: &[Sequence], cfg: &PsoConfig, seed: u64) -> Result<TuneResult> {
    if sequences.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let cost = |x: &[f64]| filter_cost(&params_from_unit(kind, x), sequences).unwrap_or(f64::INFINITY);
    let swarm = pso_minimize(cost, unit_dims(kind), cfg, seed)?;
    Ok(TuneResult {
        params: params_from_unit(kind, &swarm.best),
        cost: swarm.best_cost,
        swarm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bowl(x: &[f64]) -> f64 {
        x.iter().map(|v| (v - 0.3) * (v - 0.3)).sum()
    }

    #[test]
    fn finds_bowl_minimum() {
        let r = pso_minimize(bowl, 2, &PsoConfig::default(), 1).unwrap();
        assert!(r.history.len() <= 301);
        for v in &r.best {
            assert!((v - 0.3).abs() < 1e-3);
        }
    }

    #[test]
    fn gbest_is_monotone_and_seeded() {
        let cfg = PsoConfig {
            max_iters: 60,
            ..Default::default()
        };
        let a = pso_minimize(bowl, 3, &cfg, 5).unwrap();
        let b = pso_minimize(bowl, 3, &cfg, 5).unwrap();
        assert_eq!(a, b);
        for w in a.history.windows(2) {
            assert!(w[1].gbest_cost <= w[0].gbest_cost);
        }
    }

    #[test]
    fn particles_at_optimum_stay() {
        let cfg = PsoConfig {
            max_iters: 20,
            ..Default::default()
        };
        let r = pso_minimize_from(bowl, vec![vec![0.3, 0.3]; 2], &cfg, 0).unwrap();
        assert_eq!(r.best, vec![0.3, 0.3]);
        assert_eq!(r.best_cost, 0.0);
    }

    #[test]
    fn flat_cost_never_increases() {
        let r = pso_minimize(|_| 1.0, 2, &PsoConfig::default(), 3).unwrap();
        assert!(r.history.iter().all(|h| h.gbest_cost == 1.0));
        // Flat landscape stagnates immediately.
        assert_eq!(r.history.len(), 51);
    }

    #[test]
    fn penalty_counts_out_of_range_coordinates() {
        let cfg = PsoConfig::default();
        let c = |x: &[f64]| x[0];
        assert_eq!(penalized_cost(&c, &[1.3], &cfg), 1.0 + 10.0);
        assert_eq!(penalized_cost(&c, &[-0.2], &cfg), 10.0);
        assert_eq!(penalized_cost(&|_: &[f64]| f64::NAN, &[0.5], &cfg), f64::INFINITY);
    }

    #[test]
    fn unit_mapping_round_trips() {
        for kind in FilterKind::ALL {
            let x: Vec<f64> = (0..unit_dims(kind)).map(|d| 0.25 + 0.5 * d as f64).collect();
            let back = params_to_unit(&params_from_unit(kind, &x));
            for (a, b) in back.iter().zip(&x) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        let FilterParams::Ekf(e) = params_from_unit(FilterKind::Ekf, &[0.0, 1.0]) else {
            unreachable!()
        };
        assert!((e.q_proc - 1e-6).abs() < 1e-18 && (e.r_meas - 1e2).abs() < 1e-10);
    }

    #[test]
    fn report_csv() {
        let h = vec![PsoIteration {
            iter: 0,
            gbest_cost: 0.5,
            gbest: vec![0.1, 0.2],
        }];
        let mut buf = Vec::new();
        write_pso_report(&h, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "iter,gbest_cost,param_0,param_1\n0,0.5,0.1,0.2\n");
    }
}
