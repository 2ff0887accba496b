//! Replicator dynamics of the two-group cooperation game: vector field,
//! Jacobian classification of the five equilibria, trajectory integration,
//! the separatrix polyline, and basin-of-attraction grids.
//!
//! The dynamics on the unit square are
//! `dp/dt = p(1-p)(uq - 1)` and `dq/dt = q(1-q)(vp - 1)` with payoffs
//! `u, v > 1`. The corners (0,0) and (1,1) are the attracting equilibria;
//! the saddle at (1/v, 1/u) sits between them and the polyline through
//! (0,1), (1/v, 1/u), (1,0) approximates the basin boundary.

use crate::error::{Error, Result};

/// Cooperation payoffs of the two groups; both must exceed 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameParams {
    pub payoff_a: f64,
    pub payoff_b: f64,
}

impl GameParams {
    pub fn new(payoff_a: f64, payoff_b: f64) -> Result<Self> {
        for (name, value) in [("u", payoff_a), ("v", payoff_b)] {
            if !value.is_finite() || value <= 1.0 {
                return Err(Error::Domain {
                    what: "game payoff",
                    detail: format!("{name} must be finite and greater than 1, got {value}"),
                });
            }
        }
        Ok(Self { payoff_a, payoff_b })
    }
}

/// Cooperating fractions of the two groups, inside the unit square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameState {
    pub p: f64,
    pub q: f64,
}

impl GameState {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&q) {
            return Err(Error::Domain {
                what: "game state",
                detail: format!("({p}, {q}) lies outside the unit square"),
            });
        }
        Ok(Self { p, q })
    }

    fn distance_to(&self, other: GameState) -> f64 {
        ((self.p - other.p).powi(2) + (self.q - other.q).powi(2)).sqrt()
    }
}

/// Local stability class by Jacobian determinant and trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityLabel {
    /// det > 0 and trace < 0: locally attracting.
    Ess,
    /// det > 0 and trace > 0: locally repelling.
    Unstable,
    /// det < 0.
    Saddle,
}

impl std::fmt::Display for StabilityLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StabilityLabel::Ess => write!(f, "ESS"),
            StabilityLabel::Unstable => write!(f, "Unstable"),
            StabilityLabel::Saddle => write!(f, "Saddle"),
        }
    }
}

/// An equilibrium with its Jacobian invariants and classification.
#[derive(Debug, Clone, Copy)]
pub struct EquilibriumReport {
    pub point: GameState,
    pub det: f64,
    pub trace: f64,
    pub label: StabilityLabel,
}

/// Right-hand side of the replicator dynamics.
pub fn rhs(state: GameState, params: GameParams) -> (f64, f64) {
    let GameState { p, q } = state;
    (
        p * (1.0 - p) * (params.payoff_a * q - 1.0),
        q * (1.0 - q) * (params.payoff_b * p - 1.0),
    )
}

/// Jacobian of the vector field at a point.
pub fn jacobian(state: GameState, params: GameParams) -> [[f64; 2]; 2] {
    let GameState { p, q } = state;
    let (u, v) = (params.payoff_a, params.payoff_b);
    [
        [(1.0 - 2.0 * p) * (u * q - 1.0), p * (1.0 - p) * u],
        [q * (1.0 - q) * v, (1.0 - 2.0 * q) * (v * p - 1.0)],
    ]
}

fn classify(det: f64, trace: f64) -> StabilityLabel {
    if det < 0.0 {
        StabilityLabel::Saddle
    } else if trace < 0.0 {
        StabilityLabel::Ess
    } else {
        StabilityLabel::Unstable
    }
}

/// The five equilibria in the order (0,0), (0,1), (1,0), (1,1), (1/v, 1/u).
pub fn equilibria(params: GameParams) -> Vec<EquilibriumReport> {
    let interior = GameState {
        p: 1.0 / params.payoff_b,
        q: 1.0 / params.payoff_a,
    };
    [
        GameState { p: 0.0, q: 0.0 },
        GameState { p: 0.0, q: 1.0 },
        GameState { p: 1.0, q: 0.0 },
        GameState { p: 1.0, q: 1.0 },
        interior,
    ]
    .into_iter()
    .map(|point| {
        let j = jacobian(point, params);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let trace = j[0][0] + j[1][1];
        EquilibriumReport {
            point,
            det,
            trace,
            label: classify(det, trace),
        }
    })
    .collect()
}

/// Limit classification of a trajectory endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasinLabel {
    /// Converged to (0,0), the overexploitation corner.
    Q1,
    /// Converged to (1,1), the sustainable corner.
    Q4,
    Undecided,
}

impl std::fmt::Display for BasinLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BasinLabel::Q1 => write!(f, "Q1"),
            BasinLabel::Q4 => write!(f, "Q4"),
            BasinLabel::Undecided => write!(f, "undecided"),
        }
    }
}

/// Distance under which an endpoint counts as having reached a corner.
pub const CONVERGENCE_RADIUS: f64 = 1e-4;

const Q1: GameState = GameState { p: 0.0, q: 0.0 };
const Q4: GameState = GameState { p: 1.0, q: 1.0 };

fn limit_label(state: GameState) -> BasinLabel {
    if state.distance_to(Q1) <= CONVERGENCE_RADIUS {
        BasinLabel::Q1
    } else if state.distance_to(Q4) <= CONVERGENCE_RADIUS {
        BasinLabel::Q4
    } else {
        BasinLabel::Undecided
    }
}

fn rk4_step(state: GameState, params: GameParams, h: f64) -> GameState {
    let f = |s: GameState| rhs(s, params);
    let at = |s: GameState, d: (f64, f64), scale: f64| GameState {
        p: s.p + scale * d.0,
        q: s.q + scale * d.1,
    };
    let k1 = f(state);
    let k2 = f(at(state, k1, h / 2.0));
    let k3 = f(at(state, k2, h / 2.0));
    let k4 = f(at(state, k3, h));
    // The edges are invariant; clamping only repairs roundoff drift.
    let p = (state.p + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0)).clamp(0.0, 1.0);
    let q = (state.q + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1)).clamp(0.0, 1.0);
    GameState { p, q }
}

/// Classical fourth-order Runge-Kutta path from `start` over `[0, horizon]`.
///
/// Returns the sampled path (including the start) and the limit label of
/// the endpoint.
pub fn integrate(
    start: GameState,
    params: GameParams,
    step: f64,
    horizon: f64,
) -> Result<(Vec<(f64, GameState)>, BasinLabel)> {
    if !(step > 0.0) || !(horizon > 0.0) {
        return Err(Error::Domain {
            what: "integration settings",
            detail: format!("step {step} and horizon {horizon} must be positive"),
        });
    }
    let steps = (horizon / step).ceil() as usize;
    let mut path = Vec::with_capacity(steps + 1);
    let mut state = start;
    path.push((0.0, state));
    for n in 1..=steps {
        state = rk4_step(state, params, step);
        if !state.p.is_finite() || !state.q.is_finite() {
            return Err(Error::Numerical {
                detail: format!("trajectory from ({}, {}) left the finite range", start.p, start.q),
            });
        }
        path.push((n as f64 * step, state));
    }
    let label = limit_label(state);
    Ok((path, label))
}

/// Storage-free variant for basin grids: stops as soon as the state enters
/// a convergence ball. Both corners attract componentwise inside the ball,
/// so an early exit and a full run produce the same label.
fn limit_of(start: GameState, params: GameParams, step: f64, horizon: f64) -> Result<BasinLabel> {
    let steps = (horizon / step).ceil() as usize;
    let mut state = start;
    for _ in 0..steps {
        state = rk4_step(state, params, step);
        if !state.p.is_finite() || !state.q.is_finite() {
            return Err(Error::Numerical {
                detail: format!("trajectory from ({}, {}) left the finite range", start.p, start.q),
            });
        }
        let label = limit_label(state);
        if label != BasinLabel::Undecided {
            return Ok(label);
        }
    }
    Ok(limit_label(state))
}

/// The polyline through the unstable equilibria, used as the predicted
/// basin boundary.
#[derive(Debug, Clone, Copy)]
pub struct Separatrix {
    /// Vertices (0,1), (1/v, 1/u), (1,0).
    pub vertices: [GameState; 3],
}

impl Separatrix {
    /// Predicted limit for a point: below the polyline falls to (0,0),
    /// above it climbs to (1,1), exactly on it stays undecided.
    pub fn predict(&self, state: GameState) -> BasinLabel {
        let [left, middle, right] = self.vertices;
        let boundary_q = if state.p <= middle.p {
            interpolate(left, middle, state.p)
        } else {
            interpolate(middle, right, state.p)
        };
        if state.q < boundary_q {
            BasinLabel::Q1
        } else if state.q > boundary_q {
            BasinLabel::Q4
        } else {
            BasinLabel::Undecided
        }
    }
}

fn interpolate(a: GameState, b: GameState, p: f64) -> f64 {
    a.q + (b.q - a.q) * (p - a.p) / (b.p - a.p)
}

pub fn separatrix_polyline(params: GameParams) -> Separatrix {
    Separatrix {
        vertices: [
            GameState { p: 0.0, q: 1.0 },
            GameState {
                p: 1.0 / params.payoff_b,
                q: 1.0 / params.payoff_a,
            },
            GameState { p: 1.0, q: 0.0 },
        ],
    }
}

/// Basin grid over cell centers plus the fraction of cells reaching (1,1).
#[derive(Debug, Clone)]
pub struct BasinGrid {
    pub resolution: usize,
    /// Row-major over `(i, j)`: cell center `((i+0.5)/R, (j+0.5)/R)`.
    pub cells: Vec<(GameState, BasinLabel)>,
    pub q4_fraction: f64,
}

/// Integrates from every cell center of an `R x R` interior lattice.
/// Integration failures mark their cell undecided rather than aborting.
pub fn basin_grid(
    params: GameParams,
    resolution: usize,
    step: f64,
    horizon: f64,
) -> Result<BasinGrid> {
    if resolution < 2 {
        return Err(Error::Domain {
            what: "basin grid",
            detail: format!("resolution must be at least 2, got {resolution}"),
        });
    }
    let mut cells = Vec::with_capacity(resolution * resolution);
    let mut q4 = 0usize;
    for i in 0..resolution {
        for j in 0..resolution {
            let center = GameState {
                p: (i as f64 + 0.5) / resolution as f64,
                q: (j as f64 + 0.5) / resolution as f64,
            };
            let label = limit_of(center, params, step, horizon).unwrap_or(BasinLabel::Undecided);
            if label == BasinLabel::Q4 {
                q4 += 1;
            }
            cells.push((center, label));
        }
    }
    Ok(BasinGrid {
        resolution,
        cells,
        q4_fraction: q4 as f64 / (resolution * resolution) as f64,
    })
}
