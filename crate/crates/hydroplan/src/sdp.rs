//! Backward induction over the enumerated state space, forward occupancy
//! propagation, and annual report assembly.
//!
//! Transitions are decision-independent, so the stage maximization
//! decouples: the optimal stage reward `R*_k(X)` comes from the allocation
//! solve alone, and values satisfy
//! `J_k(X) = R*_k(X) + sum_X' p_k(X'|X) J_{k+1}(X')` with `J_N` given.
//! Decisions exist for stages `1..N-1`; stage `N` carries only its
//! boundary value.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::allocation::{optimize_allocation, AllocationDecision, EconomicParams};
use crate::error::{Error, Result};
use crate::markov::{validate_distribution, StageTransitionModel};
use crate::state_space::StateSpace;

/// Value tables and optimal allocations for every stage and state.
#[derive(Debug, Clone)]
pub struct PolicySolution {
    /// `values[k-1][s-1]` is `J_k` for stage `k` in `1..N`; the last row
    /// equals the terminal values.
    pub values: Vec<Vec<f64>>,
    /// `policy[k-1][s-1]` for decision stages `k` in `1..N-1`.
    pub policy: Vec<Vec<AllocationDecision>>,
    /// `stage_rewards[k-1][s-1]` is the optimal stage reward `R*_k`.
    pub stage_rewards: Vec<Vec<f64>>,
    /// Terminal boundary `J_N` per state.
    pub terminal: Vec<f64>,
}

impl PolicySolution {
    /// Horizon length `N`.
    pub fn stages(&self) -> usize {
        self.values.len()
    }
}

/// Occupancy-weighted expected allocations and their per-user shares.
#[derive(Debug, Clone)]
pub struct OccupancyReport {
    /// `occupancy[k-1][s-1]` for stages `1..N`; each row sums to 1.
    pub occupancy: Vec<Vec<f64>>,
    /// Horizon-total expected allocation per (resource, user).
    pub expected_use: Vec<Vec<f64>>,
    /// Share of user `j`'s total coming from resource `i`; `None` when the
    /// user received nothing at all.
    pub ratios: Vec<Vec<Option<f64>>>,
    /// `monthly[k-1][j]`: expected stage-`k` total per user, decision stages only.
    pub monthly: Vec<Vec<f64>>,
}

/// Bellman recursion over abstract per-stage optimal rewards.
///
/// `stage_rewards[k-1][s-1]` covers decision stages `1..N-1`; the result
/// holds `J_k` for all stages `1..N`.
pub fn backward_induction(
    stage_rewards: &[Vec<f64>],
    models: &StageTransitionModel,
    terminal: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let l = models.state_count;
    let stages = models.stages();
    if terminal.len() != l {
        return Err(Error::Dimension {
            what: "terminal values",
            detail: format!("expected {l} entries, got {}", terminal.len()),
        });
    }
    if stage_rewards.len() != stages - 1 || stage_rewards.iter().any(|row| row.len() != l) {
        return Err(Error::Dimension {
            what: "stage rewards",
            detail: format!("expected {} stages of {l} entries", stages - 1),
        });
    }
    models.validate(1e-9)?;

    let mut values = vec![vec![0.0; l]; stages];
    values[stages - 1] = terminal.to_vec();
    for k in (1..stages).rev() {
        let matrix = models.matrix(k);
        let (head, tail) = values.split_at_mut(k);
        let next = &tail[0];
        for s in 0..l {
            let expectation: f64 = matrix[s]
                .iter()
                .zip(next.iter())
                .map(|(&p, &j)| p * j)
                .sum();
            head[k - 1][s] = stage_rewards[k - 1][s] + expectation;
        }
    }
    Ok(values)
}

/// Full backward solve: inner allocation optimum per (stage, state), then
/// the Bellman recursion on top of it.
pub fn solve_backward(
    space: &StateSpace,
    models: &StageTransitionModel,
    params: &EconomicParams,
    terminal: &[f64],
) -> Result<PolicySolution> {
    let l = space.len();
    if models.state_count != l {
        return Err(Error::Model {
            stage: 0,
            detail: format!(
                "model covers {} states but the space has {l}",
                models.state_count
            ),
        });
    }
    let stages = models.stages();
    if space.dims.stages != stages {
        return Err(Error::Dimension {
            what: "horizon",
            detail: format!(
                "dims expect {} stages but the model covers {stages}",
                space.dims.stages
            ),
        });
    }

    let mut stage_rewards = vec![vec![0.0; l]; stages - 1];
    let mut policy = vec![Vec::with_capacity(l); stages - 1];
    for k in 1..stages {
        for s in 1..=l {
            let (decision, reward) = optimize_allocation(space.state(s), k, params, &space.dims)?;
            stage_rewards[k - 1][s - 1] = reward;
            policy[k - 1].push(decision);
        }
    }
    let values = backward_induction(&stage_rewards, models, terminal)?;
    Ok(PolicySolution {
        values,
        policy,
        stage_rewards,
        terminal: terminal.to_vec(),
    })
}

/// Propagates the initial distribution through the chain and weighs the
/// policy's allocations into horizon totals and per-user shares.
pub fn simulate_forward(
    solution: &PolicySolution,
    models: &StageTransitionModel,
    initial: &[f64],
    resources: usize,
    users: usize,
) -> Result<OccupancyReport> {
    let l = models.state_count;
    validate_distribution(initial, l)?;
    let stages = solution.stages();
    if models.stages() != stages {
        return Err(Error::Model {
            stage: 0,
            detail: format!(
                "model covers {} stages but the solution has {stages}",
                models.stages()
            ),
        });
    }

    let mut occupancy = Vec::with_capacity(stages);
    occupancy.push(initial.to_vec());
    for k in 1..stages {
        let previous = &occupancy[k - 1];
        let matrix = models.matrix(k);
        let mut next = vec![0.0; l];
        for (s, &mass) in previous.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            for (t, &p) in matrix[s].iter().enumerate() {
                next[t] += mass * p;
            }
        }
        occupancy.push(next);
    }

    let mut expected_use = vec![vec![0.0; users]; resources];
    let mut monthly = vec![vec![0.0; users]; stages - 1];
    for (k0, stage_policy) in solution.policy.iter().enumerate() {
        for (s0, decision) in stage_policy.iter().enumerate() {
            let mass = occupancy[k0][s0];
            if mass == 0.0 {
                continue;
            }
            for i in 0..resources {
                for j in 0..users {
                    let weighted = mass * decision.amounts[i][j];
                    expected_use[i][j] += weighted;
                    monthly[k0][j] += weighted;
                }
            }
        }
    }

    Ok(OccupancyReport {
        occupancy,
        ratios: column_ratios(&expected_use),
        expected_use,
        monthly,
    })
}

/// Per-user resource shares: `amounts[i][j] / sum_i amounts[i][j]`.
pub fn column_ratios(amounts: &[Vec<f64>]) -> Vec<Vec<Option<f64>>> {
    let resources = amounts.len();
    let users = amounts.first().map_or(0, Vec::len);
    let mut ratios = vec![vec![None; users]; resources];
    for j in 0..users {
        let total: f64 = (0..resources).map(|i| amounts[i][j]).sum();
        if total > 0.0 {
            for (i, row) in ratios.iter_mut().enumerate() {
                row[j] = Some(amounts[i][j] / total);
            }
        }
    }
    ratios
}

/// Renders the annual report as CSV with one row per (resource, user):
/// amounts at 4 decimals, shares at 0.1% granularity, an em dash where a
/// user's total is zero.
pub fn render_report(
    report: &OccupancyReport,
    resource_names: &[String],
    user_names: &[String],
) -> String {
    let mut out = String::from("resource,user,amount,ratio\n");
    for (i, name) in resource_names.iter().enumerate() {
        for (j, user) in user_names.iter().enumerate() {
            let ratio = match report.ratios[i][j] {
                Some(r) => format!("{:.1}%", r * 100.0),
                None => "\u{2014}".to_string(),
            };
            out.push_str(&format!(
                "{name},{user},{:.4},{ratio}\n",
                report.expected_use[i][j]
            ));
        }
    }
    out
}

/// Monte-Carlo cross-check of the occupancy-weighted report: sample state
/// paths from the chain and average the policy's allocations.
pub fn rollout_expected_use(
    solution: &PolicySolution,
    models: &StageTransitionModel,
    initial: &[f64],
    resources: usize,
    users: usize,
    rollouts: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let l = models.state_count;
    validate_distribution(initial, l)?;
    let mut totals = vec![vec![0.0; users]; resources];
    for rollout in 0..rollouts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(rollout as u64);
        let mut state = sample_index(initial, rng.random::<f64>());
        for k in 1..solution.stages() {
            let decision = &solution.policy[k - 1][state];
            for i in 0..resources {
                for j in 0..users {
                    totals[i][j] += decision.amounts[i][j];
                }
            }
            state = sample_index(&models.matrix(k)[state], rng.random::<f64>());
        }
    }
    for row in totals.iter_mut() {
        for cell in row.iter_mut() {
            *cell /= rollouts as f64;
        }
    }
    Ok(totals)
}

fn sample_index(weights: &[f64], draw: f64) -> usize {
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (idx, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last_positive = idx;
        }
        acc += w;
        if draw < acc {
            return idx;
        }
    }
    last_positive
}
