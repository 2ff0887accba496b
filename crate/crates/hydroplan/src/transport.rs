//! Exact capacitated transportation solve on fixed-point volumes.
//!
//! Flow amounts are integers at 1e-4 volume-unit resolution, so the
//! optimum is exact on quantized data. Arc costs carry a secondary
//! lexicographic component, one slot per active cell in row-major order;
//! minimizing the combined cost picks, among all money-optimal flows, the
//! unique one whose allocation vector is lexicographically smallest.
//!
//! The network is: source -> resource (availability), resource -> user on
//! active cells (cell cap, unit cost), source -> user (shortfall arc at
//! the penalty rate), user -> sink (demand). Shipping the full demand is
//! always feasible because shortfall arcs alone can carry it.

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Integer volume units per volume unit; 1e-4 resolution.
pub const VOLUME_SCALE: i64 = 10_000;

/// Quantizes a nonnegative finite volume to scaled integer units.
pub fn quantize(value: f64, what: &str) -> Result<i64> {
    if !value.is_finite() || value < 0.0 {
        return Err(Error::Contract {
            detail: format!("{what} must be finite and nonnegative, got {value}"),
        });
    }
    if value > 1e12 {
        return Err(Error::Contract {
            detail: format!("{what} of {value} exceeds the supported volume range"),
        });
    }
    Ok((value * VOLUME_SCALE as f64).round() as i64)
}

pub fn to_volume(units: i64) -> f64 {
    units as f64 / VOLUME_SCALE as f64
}

/// Path cost ordered by money first, then by the per-cell flow vector.
/// Money comparisons are exact; inputs are validated finite so the order
/// is total.
#[derive(Debug, Clone)]
struct LexCost {
    money: f64,
    tie: Vec<i64>,
}

impl LexCost {
    fn zero(cells: usize) -> Self {
        Self {
            money: 0.0,
            tie: vec![0; cells],
        }
    }

    fn for_cell(money: f64, cell: usize, cells: usize) -> Self {
        let mut tie = vec![0; cells];
        tie[cell] = 1;
        Self { money, tie }
    }

    fn plain(money: f64, cells: usize) -> Self {
        Self {
            money,
            tie: vec![0; cells],
        }
    }

    fn add(&self, other: &Self) -> Self {
        Self {
            money: self.money + other.money,
            tie: self
                .tie
                .iter()
                .zip(&other.tie)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    fn sub(&self, other: &Self) -> Self {
        Self {
            money: self.money - other.money,
            tie: self
                .tie
                .iter()
                .zip(&other.tie)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    fn order(&self, other: &Self) -> Ordering {
        self.money
            .partial_cmp(&other.money)
            .expect("costs are finite")
            .then_with(|| self.tie.cmp(&other.tie))
    }
}

#[derive(Debug, Clone)]
struct Arc {
    from: usize,
    to: usize,
    capacity: i64,
    flow: i64,
    cost: LexCost,
}

/// One stage's allocation problem on scaled integer volumes.
#[derive(Debug, Clone)]
pub struct TransportInstance {
    pub resources: usize,
    pub users: usize,
    /// Active cells in row-major order; tie-break slots follow this order.
    pub cells: Vec<(usize, usize)>,
    pub supply: Vec<i64>,
    pub demand: Vec<i64>,
    /// Per active cell, already clamped to a finite bound.
    pub cell_capacity: Vec<i64>,
    /// Money per original volume unit, per active cell.
    pub cell_cost: Vec<f64>,
    /// Money per original volume unit of unmet demand.
    pub shortfall_cost: f64,
}

#[derive(Debug, Clone)]
pub struct TransportSolution {
    /// Flow per active cell, in scaled units.
    pub cell_flow: Vec<i64>,
    /// Unmet demand per user, in scaled units.
    pub shortfall: Vec<i64>,
}

/// Successive shortest augmenting paths with Bellman-Ford searches.
/// The lexicographic cost makes the optimum unique, so the result is
/// deterministic regardless of path tie handling.
pub fn solve(instance: &TransportInstance) -> TransportSolution {
    let m = instance.resources;
    let n = instance.users;
    let k = instance.cells.len();
    let source = 0;
    let sink = m + n + 1;
    let node_count = m + n + 2;
    let resource_node = |i: usize| 1 + i;
    let user_node = |j: usize| 1 + m + j;

    let mut arcs: Vec<Arc> = Vec::with_capacity(k + m + 2 * n);
    for (i, &supply) in instance.supply.iter().enumerate() {
        arcs.push(Arc {
            from: source,
            to: resource_node(i),
            capacity: supply,
            flow: 0,
            cost: LexCost::zero(k),
        });
    }
    let mut cell_arcs = Vec::with_capacity(k);
    for (rank, &(i, j)) in instance.cells.iter().enumerate() {
        cell_arcs.push(arcs.len());
        arcs.push(Arc {
            from: resource_node(i),
            to: user_node(j),
            capacity: instance.cell_capacity[rank],
            flow: 0,
            cost: LexCost::for_cell(instance.cell_cost[rank], rank, k),
        });
    }
    let mut shortfall_arcs = Vec::with_capacity(n);
    for (j, &demand) in instance.demand.iter().enumerate() {
        shortfall_arcs.push(arcs.len());
        arcs.push(Arc {
            from: source,
            to: user_node(j),
            capacity: demand,
            flow: 0,
            cost: LexCost::plain(instance.shortfall_cost, k),
        });
        arcs.push(Arc {
            from: user_node(j),
            to: sink,
            capacity: demand,
            flow: 0,
            cost: LexCost::zero(k),
        });
    }

    let required: i64 = instance.demand.iter().sum();
    let mut shipped = 0i64;
    while shipped < required {
        let (parent, reached) = shortest_paths(&arcs, node_count, source, sink);
        assert!(reached, "shortfall arcs keep the sink reachable");
        // Bottleneck along the augmenting path.
        let mut bottleneck = required - shipped;
        let mut node = sink;
        while node != source {
            let (arc_idx, forward) = parent[node].unwrap();
            let arc = &arcs[arc_idx];
            let residual = if forward { arc.capacity - arc.flow } else { arc.flow };
            bottleneck = bottleneck.min(residual);
            node = if forward { arc.from } else { arc.to };
        }
        let mut node = sink;
        while node != source {
            let (arc_idx, forward) = parent[node].unwrap();
            let arc = &mut arcs[arc_idx];
            if forward {
                arc.flow += bottleneck;
                node = arc.from;
            } else {
                arc.flow -= bottleneck;
                node = arc.to;
            }
        }
        shipped += bottleneck;
    }

    TransportSolution {
        cell_flow: cell_arcs.iter().map(|&idx| arcs[idx].flow).collect(),
        shortfall: shortfall_arcs.iter().map(|&idx| arcs[idx].flow).collect(),
    }
}

type Parent = Vec<Option<(usize, bool)>>;

/// Bellman-Ford over the residual graph; residual arcs of augmenting paths
/// can carry negative costs, which rules out plain Dijkstra.
fn shortest_paths(arcs: &[Arc], node_count: usize, source: usize, sink: usize) -> (Parent, bool) {
    let cells = arcs.first().map_or(0, |a| a.cost.tie.len());
    let mut dist: Vec<Option<LexCost>> = vec![None; node_count];
    let mut parent: Parent = vec![None; node_count];
    dist[source] = Some(LexCost::zero(cells));
    for _ in 0..node_count {
        let mut improved = false;
        for (arc_idx, arc) in arcs.iter().enumerate() {
            if arc.capacity > arc.flow {
                if let Some(from_dist) = dist[arc.from].clone() {
                    let candidate = from_dist.add(&arc.cost);
                    if dist[arc.to]
                        .as_ref()
                        .is_none_or(|d| candidate.order(d) == Ordering::Less)
                    {
                        dist[arc.to] = Some(candidate);
                        parent[arc.to] = Some((arc_idx, true));
                        improved = true;
                    }
                }
            }
            if arc.flow > 0 {
                if let Some(to_dist) = dist[arc.to].clone() {
                    let candidate = to_dist.sub(&arc.cost);
                    if dist[arc.from]
                        .as_ref()
                        .is_none_or(|d| candidate.order(d) == Ordering::Less)
                    {
                        dist[arc.from] = Some(candidate);
                        parent[arc.from] = Some((arc_idx, false));
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            break;
        }
    }
    let reached = dist[sink].is_some();
    (parent, reached)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn units(x: f64) -> i64 {
        (x * VOLUME_SCALE as f64).round() as i64
    }

    #[test]
    fn quantize_rejects_bad_volumes() {
        assert!(quantize(-0.5, "demand").is_err());
        assert!(quantize(f64::NAN, "demand").is_err());
        assert_eq!(quantize(0.25, "demand").unwrap(), 2500);
    }

    #[test]
    fn cheapest_supplier_wins() {
        let instance = TransportInstance {
            resources: 2,
            users: 1,
            cells: vec![(0, 0), (1, 0)],
            supply: vec![units(5.0), units(5.0)],
            demand: vec![units(1.0)],
            cell_capacity: vec![units(5.0), units(5.0)],
            cell_cost: vec![2.0, 1.0],
            shortfall_cost: 100.0,
        };
        let solution = solve(&instance);
        assert_eq!(solution.cell_flow, vec![0, units(1.0)]);
        assert_eq!(solution.shortfall, vec![0]);
    }

    #[test]
    fn equal_cost_flow_goes_to_the_later_cell() {
        // Both resources cost the same; the lexicographically smallest
        // allocation zeroes the earlier cell.
        let instance = TransportInstance {
            resources: 2,
            users: 1,
            cells: vec![(0, 0), (1, 0)],
            supply: vec![units(1.0), units(1.0)],
            demand: vec![units(1.0)],
            cell_capacity: vec![units(1.0), units(1.0)],
            cell_cost: vec![1.0, 1.0],
            shortfall_cost: 100.0,
        };
        let solution = solve(&instance);
        assert_eq!(solution.cell_flow, vec![0, units(1.0)]);
    }

    #[test]
    fn shortfall_wins_cost_ties() {
        let instance = TransportInstance {
            resources: 1,
            users: 1,
            cells: vec![(0, 0)],
            supply: vec![units(1.0)],
            demand: vec![units(1.0)],
            cell_capacity: vec![units(1.0)],
            cell_cost: vec![1.0],
            shortfall_cost: 1.0,
        };
        let solution = solve(&instance);
        assert_eq!(solution.cell_flow, vec![0]);
        assert_eq!(solution.shortfall, vec![units(1.0)]);
    }

    #[test]
    fn availability_caps_the_total() {
        let instance = TransportInstance {
            resources: 1,
            users: 2,
            cells: vec![(0, 0), (0, 1)],
            supply: vec![units(1.5)],
            demand: vec![units(1.0), units(1.0)],
            cell_capacity: vec![units(1.0), units(1.0)],
            cell_cost: vec![1.0, 2.0],
            shortfall_cost: 10.0,
        };
        let solution = solve(&instance);
        assert_eq!(solution.cell_flow, vec![units(1.0), units(0.5)]);
        assert_eq!(solution.shortfall, vec![0, units(0.5)]);
    }

    #[test]
    fn cell_caps_bind() {
        let instance = TransportInstance {
            resources: 2,
            users: 1,
            cells: vec![(0, 0), (1, 0)],
            supply: vec![units(5.0), units(5.0)],
            demand: vec![units(2.0)],
            cell_capacity: vec![units(0.75), units(5.0)],
            cell_cost: vec![1.0, 3.0],
            shortfall_cost: 10.0,
        };
        let solution = solve(&instance);
        assert_eq!(solution.cell_flow, vec![units(0.75), units(1.25)]);
        assert_eq!(solution.shortfall, vec![0]);
    }

    #[test]
    fn zero_demand_ships_nothing() {
        let instance = TransportInstance {
            resources: 1,
            users: 1,
            cells: vec![(0, 0)],
            supply: vec![units(3.0)],
            demand: vec![0],
            cell_capacity: vec![units(3.0)],
            cell_cost: vec![1.0],
            shortfall_cost: 10.0,
        };
        let solution = solve(&instance);
        assert_eq!(solution.cell_flow, vec![0]);
        assert_eq!(solution.shortfall, vec![0]);
    }
}
