//! Per-stage allocation: pick the amounts drawn from each resource by each
//! user so that stage reward is maximal under the assignment state.
//!
//! The stage reward over active cells is `sum (S_ij - C_ij * u_ij)` minus
//! a linear penalty on unmet demand. Since the serving rewards `S_ij` are
//! fixed once the state is fixed, maximizing reward is the same as
//! minimizing delivery cost plus shortfall penalty, which is a capacitated
//! transportation problem over the active cells.

use crate::error::{Error, Result};
use crate::state_space::{AssignmentState, ProblemDims};
use crate::transport::{self, TransportInstance};

/// Reward constants, costs, caps, demands, availabilities, and penalty.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct EconomicParams {
    /// `reward[i][j]`: utility for serving user `j` from resource `i`.
    pub reward: Vec<Vec<f64>>,
    /// `unit_cost[i][j]`: utility per volume unit delivered, nonnegative.
    pub unit_cost: Vec<Vec<f64>>,
    /// `cap[i][j]`: per-cell allocation cap; `None` is unbounded.
    pub cap: Vec<Vec<Option<f64>>>,
    /// `demand[j][k-1]`: volume wanted by user `j` at stage `k`.
    pub demand: Vec<Vec<f64>>,
    /// `availability[i][k-1]`: volume offered by resource `i` at stage `k`.
    pub availability: Vec<Vec<f64>>,
    /// Utility lost per volume unit of unmet demand.
    pub shortfall_penalty: f64,
    /// Optional strict-positivity floor per active cell; 0 disables it.
    #[serde(default)]
    pub min_active_allocation: f64,
}

impl EconomicParams {
    pub fn validate(&self, dims: &ProblemDims) -> Result<()> {
        let (m, n, stages) = (dims.resources, dims.users, dims.stages);
        check_shape("reward", &self.reward, m, n)?;
        check_shape("unit_cost", &self.unit_cost, m, n)?;
        if self.cap.len() != m || self.cap.iter().any(|row| row.len() != n) {
            return Err(Error::Dimension {
                what: "cap",
                detail: format!("expected {m}x{n}"),
            });
        }
        check_shape("demand", &self.demand, n, stages)?;
        check_shape("availability", &self.availability, m, stages)?;
        for row in &self.reward {
            for &s in row {
                if !s.is_finite() {
                    return Err(Error::Contract {
                        detail: "reward entries must be finite".to_string(),
                    });
                }
            }
        }
        for matrix in [&self.unit_cost, &self.demand, &self.availability] {
            for row in matrix.iter() {
                for &x in row {
                    if !x.is_finite() || x < 0.0 {
                        return Err(Error::Contract {
                            detail: format!("costs, demands and availabilities must be nonnegative, got {x}"),
                        });
                    }
                }
            }
        }
        for row in &self.cap {
            for &c in row {
                if let Some(c) = c {
                    if !c.is_finite() || c < 0.0 {
                        return Err(Error::Contract {
                            detail: format!("caps must be nonnegative, got {c}"),
                        });
                    }
                }
            }
        }
        if !self.shortfall_penalty.is_finite() || self.shortfall_penalty < 0.0 {
            return Err(Error::Contract {
                detail: format!(
                    "shortfall penalty must be nonnegative, got {}",
                    self.shortfall_penalty
                ),
            });
        }
        if !self.min_active_allocation.is_finite() || self.min_active_allocation < 0.0 {
            return Err(Error::Contract {
                detail: format!(
                    "minimum active allocation must be nonnegative, got {}",
                    self.min_active_allocation
                ),
            });
        }
        Ok(())
    }
}

fn check_shape(what: &'static str, matrix: &[Vec<f64>], rows: usize, cols: usize) -> Result<()> {
    if matrix.len() != rows || matrix.iter().any(|row| row.len() != cols) {
        return Err(Error::Dimension {
            what,
            detail: format!("expected {rows}x{cols}"),
        });
    }
    Ok(())
}

/// Chosen amounts plus the unmet demand they leave behind.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationDecision {
    /// `amounts[i][j]` in volume units; zero wherever the cell is inactive.
    pub amounts: Vec<Vec<f64>>,
    /// Unmet demand per user, in volume units.
    pub shortfall: Vec<f64>,
}

impl AllocationDecision {
    pub fn zero(resources: usize, users: usize) -> Self {
        Self {
            amounts: vec![vec![0.0; users]; resources],
            shortfall: vec![0.0; users],
        }
    }
}

/// Reward of one stage under a given state and decision.
///
/// Inactive cells contribute exactly zero; a positive amount on an
/// inactive cell violates the support coupling and is rejected.
pub fn stage_reward(
    state: &AssignmentState,
    decision: &AllocationDecision,
    params: &EconomicParams,
) -> Result<f64> {
    let m = state.bits.len();
    let n = state.bits[0].len();
    if decision.amounts.len() != m
        || decision.amounts.iter().any(|row| row.len() != n)
        || decision.shortfall.len() != n
    {
        return Err(Error::Dimension {
            what: "allocation decision",
            detail: format!("expected {m}x{n} amounts and {n} shortfalls"),
        });
    }
    let mut total = 0.0;
    for i in 0..m {
        for j in 0..n {
            let amount = decision.amounts[i][j];
            if amount < 0.0 {
                return Err(Error::Contract {
                    detail: format!("negative amount {amount} at cell ({}, {})", i + 1, j + 1),
                });
            }
            if state.bits[i][j] == 1 {
                total += params.reward[i][j] - params.unit_cost[i][j] * amount;
            } else if amount > 0.0 {
                return Err(Error::Contract {
                    detail: format!(
                        "amount {amount} on inactive cell ({}, {})",
                        i + 1,
                        j + 1
                    ),
                });
            }
        }
    }
    for (j, &short) in decision.shortfall.iter().enumerate() {
        if short < 0.0 {
            return Err(Error::Contract {
                detail: format!("negative shortfall {short} for user {}", j + 1),
            });
        }
        total -= params.shortfall_penalty * short;
    }
    Ok(total)
}

/// Maximizes stage reward over the allocation polytope for one state and
/// stage; returns the maximizer and its reward.
///
/// The optimum is exact at 1e-4 volume resolution. Equal-reward optima are
/// resolved to the lexicographically smallest row-major amounts vector.
pub fn optimize_allocation(
    state: &AssignmentState,
    stage: usize,
    params: &EconomicParams,
    dims: &ProblemDims,
) -> Result<(AllocationDecision, f64)> {
    params.validate(dims)?;
    if stage == 0 || stage > dims.stages {
        return Err(Error::Dimension {
            what: "stage",
            detail: format!("stage {stage} outside [1, {}]", dims.stages),
        });
    }
    let (m, n) = (dims.resources, dims.users);
    if state.bits.len() != m || state.bits[0].len() != n {
        return Err(Error::Dimension {
            what: "assignment state",
            detail: format!("expected {m}x{n}"),
        });
    }

    let cells = state.active_cells();
    let mut supply: Vec<i64> = (0..m)
        .map(|i| transport::quantize(params.availability[i][stage - 1], "availability"))
        .collect::<Result<_>>()?;
    let mut demand: Vec<i64> = (0..n)
        .map(|j| transport::quantize(params.demand[j][stage - 1], "demand"))
        .collect::<Result<_>>()?;
    let floor = transport::quantize(params.min_active_allocation, "minimum active allocation")?;

    // A positive floor pre-commits `floor` units on every active cell and
    // solves the reduced problem on what remains.
    let mut base = vec![0i64; cells.len()];
    if floor > 0 {
        for (rank, &(i, j)) in cells.iter().enumerate() {
            base[rank] = floor;
            supply[i] -= floor;
            demand[j] -= floor;
            if supply[i] < 0 || demand[j] < 0 {
                return Err(Error::Contract {
                    detail: format!(
                        "minimum active allocation {} is infeasible at stage {stage}",
                        params.min_active_allocation
                    ),
                });
            }
        }
    }

    let mut cell_capacity = Vec::with_capacity(cells.len());
    let mut cell_cost = Vec::with_capacity(cells.len());
    for &(i, j) in &cells {
        let cap = match params.cap[i][j] {
            Some(c) => {
                let scaled = transport::quantize(c, "cap")? - floor;
                if scaled < 0 {
                    return Err(Error::Contract {
                        detail: format!(
                            "cap at cell ({}, {}) is below the minimum active allocation",
                            i + 1,
                            j + 1
                        ),
                    });
                }
                scaled.min(demand[j])
            }
            None => demand[j],
        };
        cell_capacity.push(cap);
        cell_cost.push(params.unit_cost[i][j]);
    }

    let solution = transport::solve(&TransportInstance {
        resources: m,
        users: n,
        cells: cells.clone(),
        supply,
        demand,
        cell_capacity,
        cell_cost,
        shortfall_cost: params.shortfall_penalty,
    });

    let mut decision = AllocationDecision::zero(m, n);
    for (rank, &(i, j)) in cells.iter().enumerate() {
        decision.amounts[i][j] = transport::to_volume(base[rank] + solution.cell_flow[rank]);
    }
    for (j, &short) in solution.shortfall.iter().enumerate() {
        decision.shortfall[j] = transport::to_volume(short);
    }
    let reward = stage_reward(state, &decision, params)?;
    Ok((decision, reward))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state_space::{enumerate_states, ProblemDims, StateSpace};
    use crate::transport::VOLUME_SCALE;
    use proptest::prelude::*;

    fn dims_2x3(stages: usize) -> ProblemDims {
        ProblemDims::new(2, 3, stages).unwrap()
    }

    fn space_2x3() -> StateSpace {
        enumerate_states(dims_2x3(1))
    }

    fn params_2x3(
        unit_cost: Vec<Vec<f64>>,
        demand: Vec<f64>,
        availability: Vec<f64>,
        shortfall_penalty: f64,
    ) -> EconomicParams {
        EconomicParams {
            reward: vec![vec![1.0; 3]; 2],
            unit_cost,
            cap: vec![vec![None; 3]; 2],
            demand: demand.into_iter().map(|d| vec![d]).collect(),
            availability: availability.into_iter().map(|a| vec![a]).collect(),
            shortfall_penalty,
            min_active_allocation: 0.0,
        }
    }

    /// Exhaustive search over quarter-step allocations; the independent
    /// check for the transportation solve.
    fn grid_search_best(
        state: &AssignmentState,
        stage: usize,
        params: &EconomicParams,
    ) -> f64 {
        let cells = state.active_cells();
        let m = state.bits.len();
        let n = state.bits[0].len();
        let mut amounts = vec![vec![0.0f64; n]; m];
        let mut best = f64::NEG_INFINITY;
        let avail: Vec<f64> = (0..m).map(|i| params.availability[i][stage - 1]).collect();
        let want: Vec<f64> = (0..n).map(|j| params.demand[j][stage - 1]).collect();
        search(
            state, params, &cells, 0, &mut amounts, &avail, &want, &mut best,
        );
        best
    }

    #[allow(clippy::too_many_arguments)]
    fn search(
        state: &AssignmentState,
        params: &EconomicParams,
        cells: &[(usize, usize)],
        depth: usize,
        amounts: &mut Vec<Vec<f64>>,
        avail: &[f64],
        want: &[f64],
        best: &mut f64,
    ) {
        if depth == cells.len() {
            let n = want.len();
            let shortfall: Vec<f64> = (0..n)
                .map(|j| want[j] - (0..amounts.len()).map(|i| amounts[i][j]).sum::<f64>())
                .collect();
            let decision = AllocationDecision {
                amounts: amounts.clone(),
                shortfall,
            };
            let reward = stage_reward(state, &decision, params).unwrap();
            if reward > *best {
                *best = reward;
            }
            return;
        }
        let (i, j) = cells[depth];
        let row_used: f64 = amounts[i].iter().sum();
        let col_used: f64 = (0..amounts.len()).map(|r| amounts[r][j]).sum();
        let cap = params.cap[i][j].unwrap_or(f64::INFINITY);
        let limit = cap.min(avail[i] - row_used).min(want[j] - col_used);
        let steps = (limit / 0.25 + 1e-9).floor() as i64;
        for s in 0..=steps {
            amounts[i][j] = s as f64 * 0.25;
            search(state, params, cells, depth + 1, amounts, avail, want, best);
        }
        amounts[i][j] = 0.0;
    }

    #[test]
    fn inactive_cells_contribute_zero() {
        let space = space_2x3();
        let state = space.state_by_code(35).unwrap(); // 100;011
        let params = params_2x3(
            vec![vec![7.0; 3]; 2],
            vec![0.0, 0.0, 0.0],
            vec![1.0, 1.0],
            5.0,
        );
        let decision = AllocationDecision::zero(2, 3);
        // Three active cells each add reward 1; inactive cells add nothing.
        assert_eq!(stage_reward(state, &decision, &params).unwrap(), 3.0);
    }

    #[test]
    fn reward_arithmetic_on_a_single_cell() {
        let dims = ProblemDims::new(1, 1, 1).unwrap();
        let space = enumerate_states(dims);
        let state = space.state(1);
        let params = EconomicParams {
            reward: vec![vec![3.0]],
            unit_cost: vec![vec![3.0]],
            cap: vec![vec![None]],
            demand: vec![vec![0.5]],
            availability: vec![vec![1.0]],
            shortfall_penalty: 10.0,
            min_active_allocation: 0.0,
        };
        let half = AllocationDecision {
            amounts: vec![vec![0.5]],
            shortfall: vec![0.0],
        };
        assert_eq!(stage_reward(state, &half, &params).unwrap(), 1.5);
        let starved = AllocationDecision {
            amounts: vec![vec![0.0]],
            shortfall: vec![2.0],
        };
        assert_eq!(stage_reward(state, &starved, &params).unwrap(), -17.0);
    }

    #[test]
    fn support_violation_is_rejected() {
        let space = space_2x3();
        let state = space.state_by_code(35).unwrap(); // 100;011
        let params = params_2x3(
            vec![vec![1.0; 3]; 2],
            vec![1.0, 1.0, 1.0],
            vec![1.0, 1.0],
            5.0,
        );
        let mut decision = AllocationDecision::zero(2, 3);
        decision.amounts[0][1] = 0.5; // cell (1, 2) is inactive here
        assert!(matches!(
            stage_reward(state, &decision, &params),
            Err(Error::Contract { .. })
        ));
    }

    #[test]
    fn full_state_routes_each_user_to_its_cheap_resource() {
        let dims = dims_2x3(1);
        let space = space_2x3();
        let state = space.state_by_code(63).unwrap();
        let params = params_2x3(
            vec![vec![1.0, 2.0, 3.0], vec![2.0, 1.0, 1.0]],
            vec![2.0, 1.0, 1.0],
            vec![2.0, 3.0],
            100.0,
        );
        let (decision, reward) = optimize_allocation(state, 1, &params, &dims).unwrap();
        assert_eq!(
            decision.amounts,
            vec![vec![2.0, 0.0, 0.0], vec![0.0, 1.0, 1.0]]
        );
        assert_eq!(decision.shortfall, vec![0.0, 0.0, 0.0]);
        // Six serving rewards of 1 minus delivery cost 4.
        assert_eq!(reward, 2.0);
        assert_eq!(reward, grid_search_best(state, 1, &params));
    }

    #[test]
    fn availability_caps_leave_shortfall() {
        let dims = dims_2x3(1);
        let space = space_2x3();
        let state = space.state_by_code(35).unwrap(); // 100;011: user 1 only from resource 1
        let params = params_2x3(
            vec![vec![0.5; 3]; 2],
            vec![5.0, 1.0, 1.0],
            vec![2.0, 3.0],
            1.0,
        );
        let (decision, reward) = optimize_allocation(state, 1, &params, &dims).unwrap();
        assert_eq!(decision.amounts[0][0], 2.0);
        assert_eq!(decision.shortfall, vec![3.0, 0.0, 0.0]);
        assert_eq!(reward, grid_search_best(state, 1, &params));
    }

    #[test]
    fn zero_demand_allocates_nothing() {
        let dims = dims_2x3(1);
        let space = space_2x3();
        let state = space.state_by_code(63).unwrap();
        let params = params_2x3(
            vec![vec![1.0; 3]; 2],
            vec![0.0, 0.0, 0.0],
            vec![2.0, 3.0],
            10.0,
        );
        let (decision, reward) = optimize_allocation(state, 1, &params, &dims).unwrap();
        assert_eq!(decision, AllocationDecision::zero(2, 3));
        assert_eq!(reward, 6.0); // sum of serving rewards
    }

    #[test]
    fn positivity_floor_forces_active_cells() {
        let dims = dims_2x3(1);
        let space = space_2x3();
        let state = space.state_by_code(63).unwrap();
        let mut params = params_2x3(
            vec![vec![1.0, 2.0, 3.0], vec![2.0, 1.0, 1.0]],
            vec![2.0, 1.0, 1.0],
            vec![2.0, 3.0],
            100.0,
        );
        params.min_active_allocation = 0.25;
        let (decision, _) = optimize_allocation(state, 1, &params, &dims).unwrap();
        for (i, j) in state.active_cells() {
            assert!(decision.amounts[i][j] >= 0.25);
        }
        for j in 0..3 {
            let served: f64 = (0..2).map(|i| decision.amounts[i][j]).sum();
            assert!((served + decision.shortfall[j] - params.demand[j][0]).abs() < 1e-9);
        }
    }

    #[test]
    fn infeasible_floor_is_a_contract_error() {
        let dims = dims_2x3(1);
        let space = space_2x3();
        let state = space.state_by_code(63).unwrap();
        let mut params = params_2x3(
            vec![vec![1.0; 3]; 2],
            vec![0.0, 1.0, 1.0],
            vec![2.0, 3.0],
            10.0,
        );
        params.min_active_allocation = 0.5; // user 1 demands nothing
        assert!(matches!(
            optimize_allocation(state, 1, &params, &dims),
            Err(Error::Contract { .. })
        ));
    }

    #[test]
    fn negative_demand_is_rejected() {
        let dims = dims_2x3(1);
        let space = space_2x3();
        let state = space.state_by_code(63).unwrap();
        let params = params_2x3(
            vec![vec![1.0; 3]; 2],
            vec![-1.0, 1.0, 1.0],
            vec![2.0, 3.0],
            10.0,
        );
        assert!(matches!(
            optimize_allocation(state, 1, &params, &dims),
            Err(Error::Contract { .. })
        ));
    }

    fn quarter(v: i64) -> f64 {
        v as f64 * 0.25
    }

    fn random_quarter_params(seed: &mut u64) -> EconomicParams {
        let mut next = || {
            *seed = seed
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (*seed >> 33) as i64
        };
        let cost = |x: i64| quarter(x.rem_euclid(9)); // 0 .. 2.0
        let vol = |x: i64| quarter(x.rem_euclid(9)); // 0 .. 2.0
        EconomicParams {
            reward: vec![(0..3).map(|_| quarter(next().rem_euclid(13))).collect(), {
                (0..3).map(|_| quarter(next().rem_euclid(13))).collect()
            }],
            unit_cost: vec![
                (0..3).map(|_| cost(next())).collect(),
                (0..3).map(|_| cost(next())).collect(),
            ],
            cap: vec![
                (0..3)
                    .map(|_| {
                        if next() % 3 == 0 {
                            Some(quarter(next().rem_euclid(7)))
                        } else {
                            None
                        }
                    })
                    .collect(),
                (0..3)
                    .map(|_| {
                        if next() % 3 == 0 {
                            Some(quarter(next().rem_euclid(7)))
                        } else {
                            None
                        }
                    })
                    .collect(),
            ],
            demand: (0..3).map(|_| vec![vol(next())]).collect(),
            availability: (0..2).map(|_| vec![vol(next())]).collect(),
            shortfall_penalty: quarter(next().rem_euclid(21)),
            min_active_allocation: 0.0,
        }
    }

    #[test]
    fn optimizer_matches_grid_search_on_random_instances() {
        let dims = dims_2x3(1);
        let space = space_2x3();
        let mut seed = 0x5eed;
        for round in 0..25 {
            let params = random_quarter_params(&mut seed);
            let state = space.state((round % 25) + 1);
            let (_, reward) = optimize_allocation(state, 1, &params, &dims).unwrap();
            let best = grid_search_best(state, 1, &params);
            assert!(
                (reward - best).abs() < 1e-9,
                "round {round}: solver {reward} vs grid {best}"
            );
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        /// Doubling every cost and the penalty must not change the argmax.
        #[test]
        fn cost_scaling_preserves_the_argmax(seed in any::<u64>()) {
            let dims = dims_2x3(1);
            let space = space_2x3();
            let mut s = seed;
            let params = random_quarter_params(&mut s);
            let state = space.state((seed % 25) as usize + 1);
            let (base, _) = optimize_allocation(state, 1, &params, &dims).unwrap();
            let mut scaled = params.clone();
            for row in scaled.unit_cost.iter_mut() {
                for c in row.iter_mut() {
                    *c *= 2.0;
                }
            }
            scaled.shortfall_penalty *= 2.0;
            let (doubled, _) = optimize_allocation(state, 1, &scaled, &dims).unwrap();
            prop_assert_eq!(base, doubled);
        }

        /// More availability can never hurt.
        #[test]
        fn availability_is_monotone(seed in any::<u64>(), extra in 0u8..8) {
            let dims = dims_2x3(1);
            let space = space_2x3();
            let mut s = seed;
            let params = random_quarter_params(&mut s);
            let state = space.state((seed % 25) as usize + 1);
            let (_, reward) = optimize_allocation(state, 1, &params, &dims).unwrap();
            let mut richer = params.clone();
            richer.availability[(seed % 2) as usize][0] += f64::from(extra) * 0.25;
            let (_, better) = optimize_allocation(state, 1, &richer, &dims).unwrap();
            prop_assert!(better >= reward - 1e-12);
        }

        /// Positive amounts only ever appear on active cells.
        #[test]
        fn amounts_respect_support(seed in any::<u64>()) {
            let dims = dims_2x3(1);
            let space = space_2x3();
            let mut s = seed;
            let params = random_quarter_params(&mut s);
            let state = space.state((seed % 25) as usize + 1);
            let (decision, _) = optimize_allocation(state, 1, &params, &dims).unwrap();
            for i in 0..2 {
                for j in 0..3 {
                    if decision.amounts[i][j] > 0.0 {
                        prop_assert!(state.is_active(i, j));
                    }
                    // Amounts sit on the fixed-point grid.
                    let scaled = decision.amounts[i][j] * VOLUME_SCALE as f64;
                    prop_assert!((scaled - scaled.round()).abs() < 1e-6);
                }
            }
        }
    }
}
