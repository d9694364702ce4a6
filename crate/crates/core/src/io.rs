//! Edge-list ingestion, isolated-node pruning and the end-to-end
//! release → fit → interval pipeline.
//!
//! Edge lists hold one `i j w` line per present edge with 1-based node ids;
//! pairs that do not appear have weight 0. `#` starts a comment.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{single_ci, solve, FitResult, SingleCI, SolverOptions};
use crate::graph_model::WeightedGraph;
use crate::mechanism::{
    calibrate, release_degrees, DegreeRelease, MechanismKind, DEGREE_SENSITIVITY,
};

/// Parses an edge list. The node count is `n` when given, else the largest
/// id seen.
pub fn parse_edge_list_str(text: &str, q: usize, n: Option<usize>) -> Result<WeightedGraph> {
    let mut edges = Vec::new();
    let mut seen = HashSet::new();
    let mut max_id = 0usize;
    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { line: line_no, msg };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(err(format!(
                "expected 'i j w', found {} fields",
                fields.len()
            )));
        }
        let id = |s: &str| -> Result<usize> {
            match s.parse::<usize>() {
                Ok(v) if v >= 1 => Ok(v),
                _ => Err(err(format!(
                    "invalid node id '{s}' (ids are 1-based integers)"
                ))),
            }
        };
        let i = id(fields[0])?;
        let j = id(fields[1])?;
        let w: u32 = fields[2]
            .parse()
            .map_err(|_| err(format!("invalid weight '{}'", fields[2])))?;
        if i == j {
            return Err(err(format!("self-loop on node {i}")));
        }
        if w as usize >= q {
            return Err(err(format!(
                "weight {w} exceeds q-1 = {}",
                q.saturating_sub(1)
            )));
        }
        if !seen.insert((i.min(j), i.max(j))) {
            return Err(err(format!("duplicate pair ({i}, {j})")));
        }
        if let Some(n) = n {
            if i > n || j > n {
                return Err(err(format!("node id exceeds declared n = {n}")));
            }
        }
        max_id = max_id.max(i).max(j);
        edges.push((i - 1, j - 1, w));
    }
    let n = n.unwrap_or(max_id);
    let mut g = WeightedGraph::empty(n, q)?;
    for (i, j, w) in edges {
        g.set_weight(i, j, w)?;
    }
    Ok(g)
}

pub fn parse_edge_list(
    path: impl AsRef<Path>,
    q: usize,
    n: Option<usize>,
) -> Result<WeightedGraph> {
    let text = std::fs::read_to_string(path)?;
    parse_edge_list_str(&text, q, n)
}

/// Writes the non-zero pairs of `graph`, `i < j`, in row-major order.
pub fn write_edge_list(graph: &WeightedGraph) -> String {
    let mut out = format!("# n = {}, q = {}\n", graph.n(), graph.q());
    for i in 0..graph.n() {
        for j in (i + 1)..graph.n() {
            let w = graph.weight(i, j);
            if w > 0 {
                out.push_str(&format!("{} {} {}\n", i + 1, j + 1, w));
            }
        }
    }
    out
}

/// Graph restricted to its non-isolated nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct Pruned {
    pub graph: WeightedGraph,
    /// Original 1-based id of each remaining node, in order.
    pub ids: Vec<usize>,
    /// Original 1-based ids of removed nodes.
    pub removed: Vec<usize>,
}

pub fn prune_isolated(graph: &WeightedGraph) -> Result<Pruned> {
    let d = graph.degrees();
    let (keep, removed): (Vec<usize>, Vec<usize>) = (0..graph.n()).partition(|&i| d.d[i] > 0);
    if keep.is_empty() {
        return Err(Error::Graph("every node is isolated".into()));
    }
    if keep.len() < 2 {
        return Err(Error::Graph("fewer than two non-isolated nodes".into()));
    }
    Ok(Pruned {
        graph: graph.induced(&keep)?,
        ids: keep.iter().map(|i| i + 1).collect(),
        removed: removed.iter().map(|i| i + 1).collect(),
    })
}

impl Pruned {
    /// Identity mapping for an unpruned graph.
    pub fn identity(graph: &WeightedGraph) -> Self {
        Self {
            graph: graph.clone(),
            ids: (1..=graph.n()).collect(),
            removed: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineParams {
    pub q: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub level: f64,
    pub prune: bool,
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub ids: Vec<usize>,
    pub removed: Vec<usize>,
    pub release: DegreeRelease,
    pub fit: FitResult<f64>,
    /// Per-node intervals; empty when the fit did not converge.
    pub intervals: Vec<SingleCI<f64>>,
}

/// parse → prune → degrees → release → solve → per-node intervals.
pub fn pipeline_fit(path: impl AsRef<Path>, params: &PipelineParams) -> Result<PipelineOutput> {
    let graph = parse_edge_list(path, params.q, None)?;
    pipeline_fit_graph(&graph, params)
}

pub fn pipeline_fit_graph(
    graph: &WeightedGraph,
    params: &PipelineParams,
) -> Result<PipelineOutput> {
    if graph.q() != params.q {
        return Err(Error::Usage(format!(
            "graph has q = {} but q = {} was requested",
            graph.q(),
            params.q
        )));
    }
    let pruned = if params.prune {
        prune_isolated(graph)?
    } else {
        Pruned::identity(graph)
    };
    let mechanism = calibrate(
        params.epsilon,
        DEGREE_SENSITIVITY,
        MechanismKind::Symmetric,
        None,
    )?;
    let release = release_degrees(&pruned.graph.degrees(), params.q, &mechanism, params.seed);
    let fit = solve(&release.d_bar, params.q, &SolverOptions::<f64>::default())?;
    let intervals = if fit.converged() {
        (0..fit.n)
            .map(|i| single_ci(&fit, i, params.level))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    Ok(PipelineOutput {
        ids: pruned.ids,
        removed: pruned.removed,
        release,
        fit,
        intervals,
    })
}

impl PipelineOutput {
    pub const FIT_HEADER: &'static str = "vertex,alpha_hat,ci_lo,ci_hi,se,degree_noisy";

    /// Per-node table keyed by original vertex id.
    pub fn fit_table_csv(&self) -> String {
        fit_table_csv(&self.ids, &self.intervals, &self.release.d_bar)
    }

    /// `(d̄_i, α̂_i)` pairs.
    pub fn scatter_csv(&self) -> String {
        let mut out = String::from("vertex,degree_noisy,alpha_hat\n");
        for (k, id) in self.ids.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{}\n",
                id, self.release.d_bar[k], self.fit.alpha_hat[k]
            ));
        }
        out
    }

    /// Original ids of nodes whose noisy degree ruled out a solution.
    pub fn infeasible_ids(&self) -> Vec<usize> {
        self.fit.infeasible.iter().map(|&k| self.ids[k]).collect()
    }
}

pub fn fit_table_csv(ids: &[usize], intervals: &[SingleCI<f64>], d_bar: &[i64]) -> String {
    let mut out = String::from(PipelineOutput::FIT_HEADER);
    out.push('\n');
    for ci in intervals {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6},{}\n",
            ids[ci.i],
            ci.point,
            ci.lo(),
            ci.hi(),
            ci.se,
            d_bar[ci.i]
        ));
    }
    out
}
