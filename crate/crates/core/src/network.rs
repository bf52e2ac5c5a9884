//! Full-period sector correlation network and its minimum spanning trees.

use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::SectorReturnsPanel;
use crate::error::{Error, Result};
use crate::shifts::correlation_matrix;

/// Correlation over the whole panel and the chord distance
/// `D = sqrt(2 (1 - psi))` derived from it.
#[derive(Debug, Clone, PartialEq)]
pub struct FullPeriodCorrelation {
    pub sectors: Vec<String>,
    pub psi: DMatrix<f64>,
    pub dist: DMatrix<f64>,
}

pub fn chord_distance(psi: f64) -> f64 {
    (2.0 * (1.0 - psi.clamp(-1.0, 1.0))).sqrt()
}

pub fn full_correlation(returns: &SectorReturnsPanel) -> Result<FullPeriodCorrelation> {
    if returns.num_days() < 2 {
        return Err(Error::InvalidParameter(
            "full-period correlation needs at least two return days".into(),
        ));
    }
    let columns: Vec<&[f64]> = (0..returns.num_sectors())
        .map(|j| returns.window(j, 1, returns.num_days()))
        .collect();
    let corr = correlation_matrix(&columns);
    if let Some(&j) = corr.constant_sectors.first() {
        return Err(Error::ZeroVariance(returns.sectors()[j].clone()));
    }
    let dist = corr.psi.map(chord_distance);
    Ok(FullPeriodCorrelation {
        sectors: returns.sectors().to_vec(),
        psi: corr.psi,
        dist,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    Distance,
    Correlation,
}

impl Weighting {
    pub fn as_str(&self) -> &'static str {
        match self {
            Weighting::Distance => "distance",
            Weighting::Correlation => "correlation",
        }
    }
}

impl std::str::FromStr for Weighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "distance" => Ok(Weighting::Distance),
            "correlation" => Ok(Weighting::Correlation),
            other => Err(Error::InvalidParameter(format!("unknown weighting {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeEdge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// A spanning tree of the complete graph on `nodes`. Edges are kept in
/// `(weight, i, j)` order with `i < j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanningTree {
    pub nodes: Vec<String>,
    pub edges: Vec<TreeEdge>,
    pub weighting: Weighting,
}

impl SpanningTree {
    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.nodes.len()];
        for e in &self.edges {
            deg[e.i] += 1;
            deg[e.j] += 1;
        }
        deg
    }

    /// Sorted `(i, j)` pairs, for comparing topologies.
    pub fn edge_set(&self) -> Vec<(usize, usize)> {
        let mut set: Vec<(usize, usize)> = self.edges.iter().map(|e| (e.i, e.j)).collect();
        set.sort_unstable();
        set
    }

    /// The center if the tree is a star (one node incident to every edge).
    pub fn star_center(&self) -> Option<usize> {
        let n = self.nodes.len();
        self.degrees().iter().position(|&d| d == n - 1)
    }
}

/// Disjoint-set forest with path compression and union by rank.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    /// Merges the sets of `a` and `b`; false if they were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// Kruskal's algorithm on the complete graph whose edge weights are the upper
/// triangle of `weights`. Negative weights are fine. Ties break on the
/// smaller, then the larger endpoint index.
pub fn kruskal_mst(
    weights: &DMatrix<f64>,
    nodes: &[String],
    weighting: Weighting,
) -> Result<SpanningTree> {
    let n = weights.nrows();
    if weights.ncols() != n || nodes.len() != n {
        return Err(Error::InvalidParameter(format!(
            "weight matrix {}x{} does not match {} nodes",
            weights.nrows(),
            weights.ncols(),
            nodes.len()
        )));
    }
    if n < 2 {
        return Err(Error::InvalidParameter("spanning tree needs at least two nodes".into()));
    }
    let mut candidates = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let w = weights[(i, j)];
            if !w.is_finite() {
                return Err(Error::NonFinite(format!("edge weight ({i}, {j}) = {w}")));
            }
            if (w - weights[(j, i)]).abs() > 1e-12 * w.abs().max(1.0) {
                return Err(Error::InvalidParameter(format!(
                    "weight matrix not symmetric at ({i}, {j})"
                )));
            }
            candidates.push(TreeEdge { i, j, weight: w });
        }
    }
    candidates.sort_by(|a, b| {
        a.weight
            .total_cmp(&b.weight)
            .then(a.i.cmp(&b.i))
            .then(a.j.cmp(&b.j))
    });

    let mut uf = UnionFind::new(n);
    let mut edges = Vec::with_capacity(n - 1);
    for e in candidates {
        if uf.union(e.i, e.j) {
            edges.push(e);
            if edges.len() == n - 1 {
                break;
            }
        }
    }
    Ok(SpanningTree {
        nodes: nodes.to_vec(),
        edges,
        weighting,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphFormat {
    Dot,
    Csv,
}

impl std::str::FromStr for GraphFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dot" => Ok(GraphFormat::Dot),
            "csv" | "edge-csv" => Ok(GraphFormat::Csv),
            other => Err(Error::InvalidParameter(format!("unknown graph format {other:?}"))),
        }
    }
}

fn sorted_edges(tree: &SpanningTree) -> Vec<TreeEdge> {
    let mut edges = tree.edges.clone();
    edges.sort_by(|a, b| {
        a.weight
            .total_cmp(&b.weight)
            .then(a.i.cmp(&b.i))
            .then(a.j.cmp(&b.j))
    });
    edges
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

pub fn to_dot(tree: &SpanningTree) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "graph mst {{");
    let _ = writeln!(out, "  // weighting: {}", tree.weighting.as_str());
    for (idx, name) in tree.nodes.iter().enumerate() {
        let _ = writeln!(out, "  n{idx} [label=\"{}\"];", dot_escape(name));
    }
    for e in sorted_edges(tree) {
        let _ = writeln!(out, "  n{} -- n{} [label=\"{:.6}\"];", e.i, e.j, e.weight);
    }
    out.push_str("}\n");
    out
}

/// Edge list with header `i,j,source,target,weight,weighting`; weights at six
/// decimals.
pub fn to_edge_csv(tree: &SpanningTree) -> String {
    let mut wtr = csv::WriterBuilder::new().from_writer(Vec::new());
    wtr.write_record(["i", "j", "source", "target", "weight", "weighting"])
        .expect("write to memory");
    for e in sorted_edges(tree) {
        wtr.write_record([
            e.i.to_string(),
            e.j.to_string(),
            tree.nodes[e.i].clone(),
            tree.nodes[e.j].clone(),
            format!("{:.6}", e.weight),
            tree.weighting.as_str().to_owned(),
        ])
        .expect("write to memory");
    }
    String::from_utf8(wtr.into_inner().expect("flush to memory")).expect("csv is utf-8")
}

pub fn export_graph(tree: &SpanningTree, format: GraphFormat, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let body = match format {
        GraphFormat::Dot => to_dot(tree),
        GraphFormat::Csv => to_edge_csv(tree),
    };
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

/// Reads a tree written by [`to_edge_csv`].
pub fn read_edge_csv<R: Read>(reader: R) -> Result<SpanningTree> {
    #[derive(Deserialize)]
    struct Row {
        i: usize,
        j: usize,
        source: String,
        target: String,
        weight: f64,
        weighting: String,
    }
    let mut rdr = csv::Reader::from_reader(reader);
    let mut names: Vec<Option<String>> = Vec::new();
    let mut edges = Vec::new();
    let mut weighting = None;
    for row in rdr.deserialize() {
        let row: Row = row?;
        let w: Weighting = row.weighting.parse()?;
        if *weighting.get_or_insert(w) != w {
            return Err(Error::Malformed {
                line: 0,
                message: "mixed weightings in edge list".into(),
            });
        }
        let hi = row.i.max(row.j);
        if names.len() <= hi {
            names.resize(hi + 1, None);
        }
        for (idx, name) in [(row.i, row.source), (row.j, row.target)] {
            match &names[idx] {
                Some(existing) if *existing != name => {
                    return Err(Error::Malformed {
                        line: 0,
                        message: format!("node {idx} has two names"),
                    })
                }
                _ => names[idx] = Some(name),
            }
        }
        let (i, j) = (row.i.min(row.j), row.i.max(row.j));
        edges.push(TreeEdge {
            i,
            j,
            weight: row.weight,
        });
    }
    let nodes: Option<Vec<String>> = names.into_iter().collect();
    let nodes = nodes.ok_or_else(|| Error::Malformed {
        line: 0,
        message: "edge list does not cover every node".into(),
    })?;
    let weighting = weighting.ok_or_else(|| Error::Malformed {
        line: 0,
        message: "empty edge list".into(),
    })?;
    if edges.len() + 1 != nodes.len() {
        return Err(Error::Malformed {
            line: 0,
            message: format!("{} edges cannot span {} nodes", edges.len(), nodes.len()),
        });
    }
    let mut uf = UnionFind::new(nodes.len());
    if !edges.iter().all(|e| uf.union(e.i, e.j)) {
        return Err(Error::Malformed {
            line: 0,
            message: "edge list contains a cycle".into(),
        });
    }
    let mut tree = SpanningTree {
        nodes,
        edges,
        weighting,
    };
    tree.edges = sorted_edges(&tree);
    Ok(tree)
}
