//! Graph states and measurement patterns.
//!
//! A [`Computation`] pairs a [`GraphSpec`] (what the server is told) with a
//! [`Pattern`] (the client's secret target angles and correction
//! dependencies). [`run_pattern_direct`] executes it without any blinding and
//! [`output_distribution`] enumerates every branch of that execution exactly;
//! both are the reference every delegated protocol is compared against.
//!
//! Corrections follow the usual X/Z parity rule: a vertex with target angle φ
//! is measured at `(−1)^{sX}·φ + sZ·π`, where `sX` and `sZ` are the parities
//! of the recorded outcomes over its X and Z dependency sets. Output vertices
//! may carry dependency sets too; they name the Pauli byproduct left on the
//! output qubit, which the executor undoes.

mod graph;
mod pattern;

pub use graph::{brickwork_graph, linear_cluster, GraphSpec};
pub use pattern::{Computation, Pattern};

use std::collections::BTreeMap;
use thiserror::Error;

use crate::enumerate::{for_each_path, EnumerateError};
use crate::qsim::{self, plus_state, Angle, BasisSign, QsimError, Statevector};
use crate::sampling::{BranchSampler, RngSampler};
use crate::stats::{bits_to_string, Distribution};

/// Largest vertex count accepted by exact enumeration.
pub const ENUMERATION_MAX_VERTICES: usize = 12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MbqcError {
    #[error("graph needs at least one vertex")]
    Empty,
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("invalid pattern: {0}")]
    InvalidPattern(String),
    #[error("no state given for vertex {0}")]
    MissingVertexState(usize),
    #[error("vertex {0} has no recorded outcome yet")]
    MissingOutcome(usize),
    #[error("{vertices} vertices exceed the exact enumeration limit of {limit}")]
    TooLarge { vertices: usize, limit: usize },
    #[error(transparent)]
    Qsim(#[from] QsimError),
    #[error("malformed computation document: {0}")]
    Json(String),
}

/// Outcomes of the measured vertices and the corrected output state.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub outcomes: BTreeMap<usize, u8>,
    /// Qubit `j` is `outputs[j]`; Pauli byproducts already undone.
    pub output_state: Statevector,
}

/// Tensor product of the vertex states (vertex `v` is qubit `v`) with a
/// controlled-Z on every edge.
pub fn build_graph_state(
    g: &GraphSpec,
    vertex_states: &BTreeMap<usize, Statevector>,
) -> Result<Statevector, MbqcError> {
    let mut state: Option<Statevector> = None;
    for v in 0..g.num_vertices() {
        let s = vertex_states
            .get(&v)
            .ok_or(MbqcError::MissingVertexState(v))?;
        if s.num_qubits() != 1 {
            return Err(MbqcError::InvalidGraph(format!(
                "vertex {v} state is not a single qubit"
            )));
        }
        state = Some(match state {
            None => s.clone(),
            Some(acc) => acc.tensor(s),
        });
    }
    let mut state = state.ok_or(MbqcError::Empty)?;
    for &(i, j) in g.edges() {
        state.apply_cz(i, j)?;
    }
    Ok(state)
}

fn parity(
    outcomes: &BTreeMap<usize, u8>,
    deps: &std::collections::BTreeSet<usize>,
) -> Result<u8, MbqcError> {
    deps.iter().try_fold(0u8, |acc, v| {
        outcomes
            .get(v)
            .map(|b| acc ^ b)
            .ok_or(MbqcError::MissingOutcome(*v))
    })
}

/// `(−1)^{sX}·φ + sZ·π` over the recorded outcomes.
pub fn adapted_angle(
    phi: Angle,
    outcomes: &BTreeMap<usize, u8>,
    x_dep: &std::collections::BTreeSet<usize>,
    z_dep: &std::collections::BTreeSet<usize>,
) -> Result<Angle, MbqcError> {
    let sx = parity(outcomes, x_dep)?;
    let sz = parity(outcomes, z_dep)?;
    let signed = if sx == 1 { -phi } else { phi };
    Ok(signed.plus_pi(sz))
}

/// `θ + φ′ + r·π`.
pub fn delta_angle(theta_eff: Angle, phi_prime: Angle, r: u8) -> Angle {
    (theta_eff + phi_prime).plus_pi(r)
}

/// Pauli byproduct parities `(sX, sZ)` on an output vertex.
pub fn output_byproduct(
    p: &Pattern,
    outcomes: &BTreeMap<usize, u8>,
    v: usize,
) -> Result<(u8, u8), MbqcError> {
    Ok((
        parity(outcomes, p.x_deps(v))?,
        parity(outcomes, p.z_deps(v))?,
    ))
}

pub fn run_pattern_direct<R: rand::Rng>(
    comp: &Computation,
    rng: &mut R,
) -> Result<RunRecord, MbqcError> {
    run_pattern_direct_with(comp, &mut RngSampler(rng))
}

pub fn run_pattern_direct_with(
    comp: &Computation,
    sampler: &mut dyn BranchSampler,
) -> Result<RunRecord, MbqcError> {
    let g = comp.graph();
    let p = comp.pattern();
    let inputs = (0..g.num_vertices())
        .map(|v| (v, plus_state(Angle::ZERO)))
        .collect();
    let mut state = build_graph_state(g, &inputs)?;
    // vertex carried by each remaining qubit
    let mut alive: Vec<usize> = (0..g.num_vertices()).collect();
    let mut outcomes = BTreeMap::new();
    for &v in g.order() {
        let angle = adapted_angle(p.phi(v), &outcomes, p.x_deps(v), p.z_deps(v))?;
        let pos = alive.iter().position(|&a| a == v).expect("measured once");
        let (o, rest) = qsim::rotated_collapse(&state, pos, angle, BasisSign::Plus, sampler)?;
        state = rest;
        alive.remove(pos);
        outcomes.insert(v, o.bit);
    }
    let order: Vec<usize> = g
        .outputs()
        .iter()
        .map(|o| alive.iter().position(|a| a == o).expect("outputs survive"))
        .collect();
    let mut output_state = state.permuted(&order)?;
    for (q, &v) in g.outputs().iter().enumerate() {
        let (sx, sz) = output_byproduct(p, &outcomes, v)?;
        if sx == 1 {
            output_state.apply_x(q)?;
        }
        if sz == 1 {
            output_state.apply_z(q)?;
        }
    }
    Ok(RunRecord {
        outcomes,
        output_state,
    })
}

/// Computational-basis probabilities of a state, keyed by bitstring with
/// qubit 0 first.
pub fn z_distribution(state: &Statevector) -> Distribution {
    let n = state.num_qubits();
    let mut out = Distribution::new();
    for (idx, a) in state.amplitudes().iter().enumerate() {
        let p = a.norm_sqr();
        if p > 0.0 {
            let bits: Vec<u8> = (0..n).map(|q| ((idx >> q) & 1) as u8).collect();
            *out.entry(bits_to_string(&bits)).or_insert(0.0) += p;
        }
    }
    out
}

/// Measures every output qubit of a record in the computational basis.
pub fn sample_output_bits(
    record: &RunRecord,
    sampler: &mut dyn BranchSampler,
) -> Result<Vec<u8>, MbqcError> {
    let mut state = record.output_state.clone();
    let mut bits = Vec::with_capacity(state.num_qubits());
    while state.num_qubits() > 0 {
        let (o, rest) = qsim::z_collapse(&state, 0, sampler)?;
        bits.push(o.bit);
        state = rest;
    }
    Ok(bits)
}

/// Exact distribution of the corrected output bits, summing every
/// measurement branch weighted by its Born probability.
pub fn output_distribution(comp: &Computation) -> Result<Distribution, MbqcError> {
    let n = comp.graph().num_vertices();
    if n > ENUMERATION_MAX_VERTICES {
        return Err(MbqcError::TooLarge {
            vertices: n,
            limit: ENUMERATION_MAX_VERTICES,
        });
    }
    let mut dist = Distribution::new();
    for_each_path(
        1 << ENUMERATION_MAX_VERTICES,
        |tape| run_pattern_direct_with(comp, tape),
        |w, record| {
            for (bits, p) in z_distribution(&record.output_state) {
                *dist.entry(bits).or_insert(0.0) += w * p;
            }
        },
    )
    .map_err(|e| match e {
        EnumerateError::Body(e) => e,
        EnumerateError::BudgetExceeded { .. } => MbqcError::TooLarge {
            vertices: n,
            limit: ENUMERATION_MAX_VERTICES,
        },
    })?;
    dist.retain(|_, p| *p > 1e-15);
    Ok(dist)
}

/// Intermediate outcomes, branch probability and corrected output state.
pub type Branch = (BTreeMap<usize, u8>, f64, Statevector);

/// Per-branch output distributions, keyed by the intermediate outcomes.
pub fn branch_output_distributions(comp: &Computation) -> Result<Vec<Branch>, MbqcError> {
    let mut out = Vec::new();
    for_each_path(
        1 << ENUMERATION_MAX_VERTICES,
        |tape| run_pattern_direct_with(comp, tape),
        |w, r| out.push((r.outcomes, w, r.output_state)),
    )
    .map_err(|e| match e {
        EnumerateError::Body(e) => e,
        EnumerateError::BudgetExceeded { .. } => MbqcError::TooLarge {
            vertices: comp.graph().num_vertices(),
            limit: ENUMERATION_MAX_VERTICES,
        },
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests;
