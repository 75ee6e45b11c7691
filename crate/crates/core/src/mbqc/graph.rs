use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use super::MbqcError;

/// Graph of a measurement pattern: vertices `0..n`, undirected edges, the
/// order in which non-output vertices are measured and the output vertices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawGraph", into = "RawGraph")]
pub struct GraphSpec {
    num_vertices: usize,
    edges: Vec<(usize, usize)>,
    order: Vec<usize>,
    outputs: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct RawGraph {
    vertices: usize,
    edges: Vec<[usize; 2]>,
    order: Vec<usize>,
    outputs: Vec<usize>,
}

impl TryFrom<RawGraph> for GraphSpec {
    type Error = MbqcError;
    fn try_from(r: RawGraph) -> Result<Self, MbqcError> {
        GraphSpec::new(
            r.vertices,
            r.edges.into_iter().map(|[a, b]| (a, b)).collect(),
            r.order,
            r.outputs,
        )
    }
}

impl From<GraphSpec> for RawGraph {
    fn from(g: GraphSpec) -> RawGraph {
        RawGraph {
            vertices: g.num_vertices,
            edges: g.edges.into_iter().map(|(a, b)| [a, b]).collect(),
            order: g.order,
            outputs: g.outputs,
        }
    }
}

impl GraphSpec {
    pub fn new(
        num_vertices: usize,
        edges: Vec<(usize, usize)>,
        order: Vec<usize>,
        outputs: Vec<usize>,
    ) -> Result<Self, MbqcError> {
        if num_vertices == 0 {
            return Err(MbqcError::Empty);
        }
        let mut seen = BTreeSet::new();
        let mut normalized = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            if a == b {
                return Err(MbqcError::InvalidGraph(format!("self loop on vertex {a}")));
            }
            if a >= num_vertices || b >= num_vertices {
                return Err(MbqcError::InvalidGraph(format!(
                    "edge ({a},{b}) leaves the vertex range"
                )));
            }
            let e = (a.min(b), a.max(b));
            if !seen.insert(e) {
                return Err(MbqcError::InvalidGraph(format!(
                    "duplicate edge ({},{})",
                    e.0, e.1
                )));
            }
            normalized.push(e);
        }
        let mut covered = vec![false; num_vertices];
        for &v in order.iter().chain(&outputs) {
            match covered.get_mut(v) {
                None => return Err(MbqcError::InvalidGraph(format!("vertex {v} out of range"))),
                Some(true) => {
                    return Err(MbqcError::InvalidGraph(format!(
                        "vertex {v} listed twice in order/outputs"
                    )))
                }
                Some(c) => *c = true,
            }
        }
        if let Some(v) = covered.iter().position(|c| !c) {
            return Err(MbqcError::InvalidGraph(format!(
                "vertex {v} is neither measured nor an output"
            )));
        }
        Ok(Self {
            num_vertices,
            edges: normalized,
            order,
            outputs,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn outputs(&self) -> &[usize] {
        &self.outputs
    }

    pub fn is_output(&self, v: usize) -> bool {
        self.outputs.contains(&v)
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges
            .iter()
            .filter(|&&(a, b)| a == v || b == v)
            .count()
    }
}

/// Path graph on `n` vertices measured left to right; the last is the output.
pub fn linear_cluster(n: usize) -> Result<GraphSpec, MbqcError> {
    if n == 0 {
        return Err(MbqcError::Empty);
    }
    GraphSpec::new(
        n,
        (1..n).map(|i| (i - 1, i)).collect(),
        (0..n - 1).collect(),
        vec![n - 1],
    )
}

/// Brickwork layout with `rows` rows and `cols` columns; vertex `(r, c)` is
/// `r·cols + c`. Rows are chained horizontally; vertical bricks join rows
/// `(r, r+1)` at columns `c` and `c+2` where `c ≡ 2 (mod 8)` for even `r` and
/// `c ≡ 6 (mod 8)` for odd `r` (0-based). Bricks that do not fit inside the
/// grid are left out. Measurement order is row-major over all but the last
/// column, which holds the outputs.
pub fn brickwork_graph(rows: usize, cols: usize) -> Result<GraphSpec, MbqcError> {
    if rows == 0 || cols == 0 {
        return Err(MbqcError::InvalidGraph(format!(
            "brickwork needs positive dimensions, got {rows}x{cols}"
        )));
    }
    let id = |r: usize, c: usize| r * cols + c;
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 1..cols {
            edges.push((id(r, c - 1), id(r, c)));
        }
    }
    for r in 0..rows.saturating_sub(1) {
        let offset = if r % 2 == 0 { 2 } else { 6 };
        let mut c = offset;
        while c + 2 < cols {
            edges.push((id(r, c), id(r + 1, c)));
            edges.push((id(r, c + 2), id(r + 1, c + 2)));
            c += 8;
        }
    }
    let order = (0..rows)
        .flat_map(|r| (0..cols - 1).map(move |c| id(r, c)))
        .collect();
    let outputs = (0..rows).map(|r| id(r, cols - 1)).collect();
    GraphSpec::new(rows * cols, edges, order, outputs)
}
