//! Transition counting, smoothed maximum-likelihood estimation, and
//! synthetic observation generation for the stage availability chain.
//!
//! Historical observations arrive as per-trajectory stage sequences over
//! canonical state indices. Counting collects, for every stage `k`, the
//! number of consecutive-stage transitions `i -> j`; estimation turns the
//! counts into row-stochastic matrices with additive smoothing
//! `p_ij = (n_ij + alpha) / (n_i + alpha * l)`, so unseen transitions keep
//! nonzero mass. One matrix exists per stage `k` in `1..N-1`; a stationary
//! mode pools the counts across stages instead.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::state_space::StateSpace;

/// One observed stage of one historical trajectory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObsRecord {
    pub trajectory_id: String,
    /// Stage within the horizon, 1-based.
    pub stage: usize,
    /// Canonical state index, 1-based.
    pub state_index: usize,
}

/// A sequence of observation records, possibly interleaving trajectories.
/// Stages must strictly increase within each trajectory in file order.
#[derive(Debug, Clone, Default)]
pub struct ObservationLog {
    pub records: Vec<ObsRecord>,
}

/// Per-stage transition counts over canonical indices.
#[derive(Debug, Clone)]
pub struct TransitionCounts {
    pub state_count: usize,
    pub stages: usize,
    /// `counts[k-1][i-1][j-1]` is the number of observed `i -> j`
    /// transitions between stages `k` and `k+1`, for `k` in `1..N-1`.
    pub counts: Vec<Vec<Vec<u64>>>,
}

impl TransitionCounts {
    pub fn zero(state_count: usize, stages: usize) -> Self {
        Self {
            state_count,
            stages,
            counts: vec![vec![vec![0; state_count]; state_count]; stages - 1],
        }
    }

    /// Total departures from state `i` at stage `k` (both 1-based).
    pub fn row_total(&self, stage: usize, state_index: usize) -> u64 {
        self.counts[stage - 1][state_index - 1].iter().sum()
    }
}

/// Per-stage row-stochastic transition matrices with estimation provenance.
#[derive(Debug, Clone)]
pub struct StageTransitionModel {
    pub state_count: usize,
    /// `matrices[k-1]` carries stage `k`, for `k` in `1..N-1`.
    pub matrices: Vec<Vec<Vec<f64>>>,
    /// Additive smoothing strength used to build the model; absent on
    /// models loaded from files, which carry no estimation provenance.
    pub alpha: Option<f64>,
    /// True when the counts were pooled across stages.
    pub stationary: bool,
}

impl StageTransitionModel {
    /// Horizon length `N`; the model covers stages `1..N-1`.
    pub fn stages(&self) -> usize {
        self.matrices.len() + 1
    }

    /// Matrix for stage `k`, 1-based.
    pub fn matrix(&self, stage: usize) -> &Vec<Vec<f64>> {
        &self.matrices[stage - 1]
    }

    /// Checks shape, entry range, and row sums against `tolerance`.
    pub fn validate(&self, tolerance: f64) -> Result<()> {
        for (k0, matrix) in self.matrices.iter().enumerate() {
            if matrix.len() != self.state_count {
                return Err(Error::Model {
                    stage: k0 + 1,
                    detail: format!("expected {} rows, got {}", self.state_count, matrix.len()),
                });
            }
            for (i0, row) in matrix.iter().enumerate() {
                if row.len() != self.state_count {
                    return Err(Error::Model {
                        stage: k0 + 1,
                        detail: format!(
                            "row {} has {} entries, expected {}",
                            i0 + 1,
                            row.len(),
                            self.state_count
                        ),
                    });
                }
                let mut sum = 0.0;
                for &p in row {
                    if !(0.0..=1.0).contains(&p) {
                        return Err(Error::Model {
                            stage: k0 + 1,
                            detail: format!("row {} has entry {p} outside [0, 1]", i0 + 1),
                        });
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > tolerance {
                    return Err(Error::Model {
                        stage: k0 + 1,
                        detail: format!("row {} sums to {sum}, not 1", i0 + 1),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Counts consecutive-stage transitions; gaps in a trajectory contribute
/// nothing. Fails on out-of-range indices or non-increasing stages, naming
/// the offending 1-based record.
pub fn count_transitions(
    log: &ObservationLog,
    space: &StateSpace,
    stages: usize,
) -> Result<TransitionCounts> {
    if stages < 2 {
        return Err(Error::Dimension {
            what: "transition counting",
            detail: format!("needs at least 2 stages, got {stages}"),
        });
    }
    let l = space.len();
    let mut counts = TransitionCounts::zero(l, stages);
    // Last (stage, state) seen per trajectory, in encounter order.
    let mut last: std::collections::HashMap<&str, (usize, usize)> = std::collections::HashMap::new();
    for (pos, record) in log.records.iter().enumerate() {
        let record_no = pos + 1;
        if record.state_index == 0 || record.state_index > l {
            return Err(Error::Ingestion {
                record: record_no,
                detail: format!(
                    "state index {} outside [1, {l}] (trajectory {}, stage {})",
                    record.state_index, record.trajectory_id, record.stage
                ),
            });
        }
        if record.stage == 0 || record.stage > stages {
            return Err(Error::Ingestion {
                record: record_no,
                detail: format!(
                    "stage {} outside [1, {stages}] (trajectory {})",
                    record.stage, record.trajectory_id
                ),
            });
        }
        if let Some(&(prev_stage, prev_state)) = last.get(record.trajectory_id.as_str()) {
            if record.stage <= prev_stage {
                return Err(Error::Ingestion {
                    record: record_no,
                    detail: format!(
                        "stage {} does not increase past {} within trajectory {}",
                        record.stage, prev_stage, record.trajectory_id
                    ),
                });
            }
            if record.stage == prev_stage + 1 {
                counts.counts[prev_stage - 1][prev_state - 1][record.state_index - 1] += 1;
            }
        }
        last.insert(
            record.trajectory_id.as_str(),
            (record.stage, record.state_index),
        );
    }
    Ok(counts)
}

fn smooth_row(row: &[u64], alpha: f64, l: usize, stage: usize, state: usize) -> Result<Vec<f64>> {
    let total: u64 = row.iter().sum();
    if alpha == 0.0 {
        if total == 0 {
            return Err(Error::UnobservedRow {
                stage,
                state_index: state,
            });
        }
        return Ok(row.iter().map(|&n| n as f64 / total as f64).collect());
    }
    let denom = total as f64 + alpha * l as f64;
    Ok(row.iter().map(|&n| (n as f64 + alpha) / denom).collect())
}

/// Per-stage smoothed maximum-likelihood estimate of the transition model.
///
/// With `alpha == 0` this is the exact count-ratio estimator and every row
/// must have at least one observation.
pub fn estimate(counts: &TransitionCounts, alpha: f64) -> Result<StageTransitionModel> {
    check_alpha(alpha)?;
    let l = counts.state_count;
    let mut matrices = Vec::with_capacity(counts.stages - 1);
    for (k0, stage_counts) in counts.counts.iter().enumerate() {
        let mut matrix = Vec::with_capacity(l);
        for (i0, row) in stage_counts.iter().enumerate() {
            matrix.push(smooth_row(row, alpha, l, k0 + 1, i0 + 1)?);
        }
        matrices.push(matrix);
    }
    Ok(StageTransitionModel {
        state_count: l,
        matrices,
        alpha: Some(alpha),
        stationary: false,
    })
}

/// Stationary variant: pools counts across all stages into one matrix and
/// replicates it over the horizon. Unobserved-row errors report stage 0,
/// meaning the pooled row.
pub fn estimate_stationary(counts: &TransitionCounts, alpha: f64) -> Result<StageTransitionModel> {
    check_alpha(alpha)?;
    let l = counts.state_count;
    let mut pooled = vec![vec![0u64; l]; l];
    for stage_counts in &counts.counts {
        for (i, row) in stage_counts.iter().enumerate() {
            for (j, &n) in row.iter().enumerate() {
                pooled[i][j] += n;
            }
        }
    }
    let mut matrix = Vec::with_capacity(l);
    for (i0, row) in pooled.iter().enumerate() {
        matrix.push(smooth_row(row, alpha, l, 0, i0 + 1)?);
    }
    Ok(StageTransitionModel {
        state_count: l,
        matrices: vec![matrix; counts.stages - 1],
        alpha: Some(alpha),
        stationary: true,
    })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::Domain {
            what: "smoothing strength",
            detail: format!("must be finite and nonnegative, got {alpha}"),
        });
    }
    Ok(())
}

/// Samples `trajectories` horizon-length paths from a known chain.
///
/// Deterministic given the seed: trajectory `t` draws from ChaCha stream
/// `t` of the seed, so generation order cannot affect the output. The
/// initial state is drawn from `initial` when given, else uniformly.
pub fn synthesize_log(
    space: &StateSpace,
    truth: &StageTransitionModel,
    trajectories: usize,
    seed: u64,
    initial: Option<&[f64]>,
) -> Result<ObservationLog> {
    if truth.state_count != space.len() {
        return Err(Error::Dimension {
            what: "synthesis truth model",
            detail: format!(
                "model has {} states but the space has {}",
                truth.state_count,
                space.len()
            ),
        });
    }
    truth.validate(1e-9)?;
    if let Some(dist) = initial {
        validate_distribution(dist, space.len())?;
    }
    let stages = truth.stages();
    let l = space.len();
    let mut records = Vec::with_capacity(trajectories * stages);
    for t in 0..trajectories {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t as u64);
        let trajectory_id = format!("t{}", t + 1);
        let mut state = match initial {
            Some(dist) => sample_index(dist, rng.random::<f64>()),
            None => rng.random_range(0..l),
        };
        records.push(ObsRecord {
            trajectory_id: trajectory_id.clone(),
            stage: 1,
            state_index: state + 1,
        });
        for stage in 2..=stages {
            let row = &truth.matrices[stage - 2][state];
            state = sample_index(row, rng.random::<f64>());
            records.push(ObsRecord {
                trajectory_id: trajectory_id.clone(),
                stage,
                state_index: state + 1,
            });
        }
    }
    Ok(ObservationLog { records })
}

/// Inverse-CDF draw; falls back to the last positive entry when rounding
/// pushes the draw past the accumulated mass.
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

/// Stage-1 state frequencies of a log, or `None` when the log has no
/// stage-1 records (out-of-range indices are ignored here; counting
/// validates them properly).
pub fn empirical_stage1_distribution(log: &ObservationLog, l: usize) -> Option<Vec<f64>> {
    let mut counts = vec![0u64; l];
    let mut total = 0u64;
    for record in &log.records {
        if record.stage == 1 && record.state_index >= 1 && record.state_index <= l {
            counts[record.state_index - 1] += 1;
            total += 1;
        }
    }
    if total == 0 {
        return None;
    }
    Some(counts.iter().map(|&c| c as f64 / total as f64).collect())
}

pub(crate) fn validate_distribution(dist: &[f64], l: usize) -> Result<()> {
    if dist.len() != l {
        return Err(Error::Dimension {
            what: "distribution over states",
            detail: format!("has {} entries, expected {l}", dist.len()),
        });
    }
    if dist.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
        return Err(Error::Domain {
            what: "distribution over states",
            detail: "entries must lie in [0, 1]".to_string(),
        });
    }
    let sum: f64 = dist.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Domain {
            what: "distribution over states",
            detail: format!("sums to {sum}, not 1"),
        });
    }
    Ok(())
}
