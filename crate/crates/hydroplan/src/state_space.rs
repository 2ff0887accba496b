//! Enumeration and indexing of feasible resource-user assignment states.
//!
//! An assignment state is an `m x n` 0/1 matrix saying which resource feeds
//! which user during one stage. A state is feasible when every resource row
//! and every user column contains at least one 1. States are identified by
//! their row-major binary code (top-left bit most significant) and indexed
//! 1-based in ascending code order.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Default cap on `m * n`; exhaustive enumeration scans `2^(m*n)` codes.
pub const MAX_STATE_BITS: usize = 20;

/// Published ordering of the 25 feasible 2x3 states, as `appendix_index,code`.
const APPENDIX_A_CSV: &str = include_str!("../data/appendix_a.csv");

/// Problem dimensions: resource count, user count, and stages per horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProblemDims {
    pub resources: usize,
    pub users: usize,
    pub stages: usize,
}

impl ProblemDims {
    pub fn new(resources: usize, users: usize, stages: usize) -> Result<Self> {
        Self::with_bit_cap(resources, users, stages, MAX_STATE_BITS)
    }

    /// Like [`ProblemDims::new`] but with an explicit enumeration cap.
    pub fn with_bit_cap(
        resources: usize,
        users: usize,
        stages: usize,
        max_bits: usize,
    ) -> Result<Self> {
        if resources == 0 || users == 0 || stages == 0 {
            return Err(Error::Dimension {
                what: "problem dims",
                detail: format!(
                    "resources, users and stages must all be positive, got {resources}x{users}, {stages} stages"
                ),
            });
        }
        let bits = resources * users;
        if bits > max_bits {
            return Err(Error::Capacity { bits, max_bits });
        }
        Ok(Self {
            resources,
            users,
            stages,
        })
    }

    pub fn cell_count(&self) -> usize {
        self.resources * self.users
    }
}

/// One feasible assignment matrix plus its canonical identifiers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignmentState {
    /// Row-major 0/1 entries; `bits[i][j]` is resource `i` feeding user `j`.
    pub bits: Vec<Vec<u8>>,
    /// 1-based rank of `code` in ascending order over the feasible states.
    pub index: usize,
    /// Row-major binary encoding, top-left bit most significant.
    pub code: u64,
}

impl AssignmentState {
    fn from_code(code: u64, resources: usize, users: usize) -> Self {
        let total = resources * users;
        let bits = (0..resources)
            .map(|i| {
                (0..users)
                    .map(|j| ((code >> (total - 1 - (i * users + j))) & 1) as u8)
                    .collect()
            })
            .collect();
        Self {
            bits,
            index: 0,
            code,
        }
    }

    pub fn is_active(&self, resource: usize, user: usize) -> bool {
        self.bits[resource][user] == 1
    }

    /// Active cells in row-major order.
    pub fn active_cells(&self) -> Vec<(usize, usize)> {
        let mut cells = Vec::new();
        for (i, row) in self.bits.iter().enumerate() {
            for (j, &b) in row.iter().enumerate() {
                if b == 1 {
                    cells.push((i, j));
                }
            }
        }
        cells
    }

    /// Rows joined by `;`, e.g. `001;110`.
    pub fn bits_string(&self) -> String {
        self.bits
            .iter()
            .map(|row| row.iter().map(|b| char::from(b'0' + b)).collect::<String>())
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// Whether every row and every column of the encoded matrix has a 1.
fn covers(code: u64, resources: usize, users: usize) -> bool {
    let total = resources * users;
    for i in 0..resources {
        let row_mask = ((1u64 << users) - 1) << (total - (i + 1) * users);
        if code & row_mask == 0 {
            return false;
        }
    }
    for j in 0..users {
        let mut col_mask = 0u64;
        for i in 0..resources {
            col_mask |= 1u64 << (total - 1 - (i * users + j));
        }
        if code & col_mask == 0 {
            return false;
        }
    }
    true
}

/// All feasible states of a problem, sorted ascending by code.
#[derive(Debug, Clone)]
pub struct StateSpace {
    pub dims: ProblemDims,
    pub states: Vec<AssignmentState>,
}

impl StateSpace {
    /// Number of feasible states, `l`.
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// State at 1-based canonical index.
    pub fn state(&self, index: usize) -> &AssignmentState {
        &self.states[index - 1]
    }

    /// Looks up the state whose row-major encoding equals `code`.
    pub fn state_by_code(&self, code: u64) -> Result<&AssignmentState> {
        self.states
            .binary_search_by_key(&code, |s| s.code)
            .map(|pos| &self.states[pos])
            .map_err(|_| Error::StateLookup { code })
    }
}

/// Enumerates every assignment matrix with full row and column coverage.
pub fn enumerate_states(dims: ProblemDims) -> StateSpace {
    let (m, n) = (dims.resources, dims.users);
    let total = m * n;
    let mut states = Vec::new();
    for code in 0..(1u64 << total) {
        if covers(code, m, n) {
            states.push(AssignmentState::from_code(code, m, n));
        }
    }
    for (pos, state) in states.iter_mut().enumerate() {
        state.index = pos + 1;
    }
    StateSpace { dims, states }
}

/// Closed-form count of feasible states by inclusion-exclusion over
/// all-zero rows: `sum_s (-1)^s C(m,s) (2^(m-s) - 1)^n`.
pub fn count_states(dims: ProblemDims) -> u64 {
    let (m, n) = (dims.resources as u32, dims.users as u32);
    let mut total: i128 = 0;
    for s in 0..=m {
        let choose = binomial(m, s);
        let per_column = (1i128 << (m - s)) - 1;
        let term = choose * per_column.pow(n);
        if s % 2 == 0 {
            total += term;
        } else {
            total -= term;
        }
    }
    total as u64
}

fn binomial(n: u32, k: u32) -> i128 {
    let k = k.min(n - k);
    let mut acc: i128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as i128 / (i + 1) as i128;
    }
    acc
}

/// Parses the shipped appendix fixture into `(appendix_index, code)` pairs.
pub fn appendix_fixture() -> Vec<(usize, u64)> {
    APPENDIX_A_CSV
        .lines()
        .skip(1)
        .filter(|line| !line.trim().is_empty())
        .map(|line| {
            let mut parts = line.split(',');
            let idx = parts.next().unwrap().trim().parse().unwrap();
            let code = parts.next().unwrap().trim().parse().unwrap();
            (idx, code)
        })
        .collect()
}

/// Bijection from the published 2x3 ordering onto canonical indices.
///
/// The published ordering is not monotone in code, so the map is driven by
/// the shipped fixture rather than by any guessed generation rule.
pub fn appendix_cross_map(space: &StateSpace) -> Result<BTreeMap<usize, usize>> {
    if space.dims.resources != 2 || space.dims.users != 3 {
        return Err(Error::AppendixUnsupported {
            m: space.dims.resources,
            n: space.dims.users,
        });
    }
    let mut map = BTreeMap::new();
    for (appendix_index, code) in appendix_fixture() {
        let state = space.state_by_code(code)?;
        map.insert(appendix_index, state.index);
    }
    Ok(map)
}
