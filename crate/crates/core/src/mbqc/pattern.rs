use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

use super::{GraphSpec, MbqcError};
use crate::qsim::Angle;

static NO_DEPS: BTreeSet<usize> = BTreeSet::new();

/// Secret part of a computation: target angles and correction dependencies.
/// Vertices without an entry have φ = 0 and no dependencies.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Pattern {
    phi: BTreeMap<usize, Angle>,
    x_deps: BTreeMap<usize, BTreeSet<usize>>,
    z_deps: BTreeMap<usize, BTreeSet<usize>>,
}

impl Pattern {
    pub fn new(
        phi: BTreeMap<usize, Angle>,
        x_deps: BTreeMap<usize, BTreeSet<usize>>,
        z_deps: BTreeMap<usize, BTreeSet<usize>>,
    ) -> Self {
        Self {
            phi,
            x_deps,
            z_deps,
        }
    }

    /// Standard flow of a linear cluster of `phis.len() + 1` vertices:
    /// vertex `i` depends on `i−1` for X and on `i−2` for Z; the output
    /// carries the same dependencies as byproducts.
    pub fn linear_flow(phis: &[Angle]) -> Self {
        let n = phis.len() + 1;
        let mut p = Pattern::default();
        for (v, &a) in phis.iter().enumerate() {
            p.phi.insert(v, a);
        }
        for v in 1..n {
            p.x_deps.insert(v, BTreeSet::from([v - 1]));
            if v >= 2 {
                p.z_deps.insert(v, BTreeSet::from([v - 2]));
            }
        }
        p
    }

    pub fn phi(&self, v: usize) -> Angle {
        self.phi.get(&v).copied().unwrap_or(Angle::ZERO)
    }

    pub fn x_deps(&self, v: usize) -> &BTreeSet<usize> {
        self.x_deps.get(&v).unwrap_or(&NO_DEPS)
    }

    pub fn z_deps(&self, v: usize) -> &BTreeSet<usize> {
        self.z_deps.get(&v).unwrap_or(&NO_DEPS)
    }

    pub fn with_phi(mut self, v: usize, a: Angle) -> Self {
        self.phi.insert(v, a);
        self
    }

    fn validate(&self, g: &GraphSpec) -> Result<(), MbqcError> {
        let rank: BTreeMap<usize, usize> =
            g.order().iter().enumerate().map(|(i, &v)| (v, i)).collect();
        for &v in self.phi.keys() {
            if !rank.contains_key(&v) {
                return Err(MbqcError::InvalidPattern(format!(
                    "angle given for unmeasured vertex {v}"
                )));
            }
        }
        for deps in [&self.x_deps, &self.z_deps] {
            for (&v, set) in deps {
                if v >= g.num_vertices() {
                    return Err(MbqcError::InvalidPattern(format!(
                        "dependency key {v} is not a vertex"
                    )));
                }
                for &d in set {
                    let Some(&rd) = rank.get(&d) else {
                        return Err(MbqcError::InvalidPattern(format!(
                            "vertex {v} depends on unmeasured vertex {d}"
                        )));
                    };
                    if let Some(&rv) = rank.get(&v) {
                        if rd >= rv {
                            return Err(MbqcError::InvalidPattern(format!(
                                "vertex {v} depends on {d}, which is not measured earlier"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// A graph together with a pattern consistent with it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ComputationDoc", into = "ComputationDoc")]
pub struct Computation {
    graph: GraphSpec,
    pattern: Pattern,
}

/// On-disk form: `{"vertices", "edges", "order", "outputs", "phi", "x_deps", "z_deps"}`.
#[derive(Serialize, Deserialize)]
struct ComputationDoc {
    vertices: usize,
    edges: Vec<[usize; 2]>,
    order: Vec<usize>,
    outputs: Vec<usize>,
    #[serde(default)]
    phi: BTreeMap<usize, Angle>,
    #[serde(default)]
    x_deps: BTreeMap<usize, BTreeSet<usize>>,
    #[serde(default)]
    z_deps: BTreeMap<usize, BTreeSet<usize>>,
}

impl TryFrom<ComputationDoc> for Computation {
    type Error = MbqcError;
    fn try_from(d: ComputationDoc) -> Result<Self, MbqcError> {
        let graph = GraphSpec::new(
            d.vertices,
            d.edges.into_iter().map(|[a, b]| (a, b)).collect(),
            d.order,
            d.outputs,
        )?;
        Computation::new(graph, Pattern::new(d.phi, d.x_deps, d.z_deps))
    }
}

impl From<Computation> for ComputationDoc {
    fn from(c: Computation) -> Self {
        let g = c.graph;
        ComputationDoc {
            vertices: g.num_vertices(),
            edges: g.edges().iter().map(|&(a, b)| [a, b]).collect(),
            order: g.order().to_vec(),
            outputs: g.outputs().to_vec(),
            phi: c.pattern.phi,
            x_deps: c.pattern.x_deps,
            z_deps: c.pattern.z_deps,
        }
    }
}

impl Computation {
    pub fn new(graph: GraphSpec, pattern: Pattern) -> Result<Self, MbqcError> {
        pattern.validate(&graph)?;
        Ok(Self { graph, pattern })
    }

    /// Linear cluster of `phis.len() + 1` vertices with the standard flow.
    pub fn linear(phis: &[Angle]) -> Result<Self, MbqcError> {
        Computation::new(
            super::linear_cluster(phis.len() + 1)?,
            Pattern::linear_flow(phis),
        )
    }

    pub fn graph(&self) -> &GraphSpec {
        &self.graph
    }

    pub fn pattern(&self) -> &Pattern {
        &self.pattern
    }

    pub fn from_json(text: &str) -> Result<Self, MbqcError> {
        serde_json::from_str(text).map_err(|e| MbqcError::Json(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("computation serializes")
    }
}
