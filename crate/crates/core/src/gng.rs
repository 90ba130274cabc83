//! Growing neural gas.
//!
//! Classic Fritzke GNG: a graph of prototype nodes that starts from two
//! samples, moves the winner and its topological neighbours toward each
//! sample, ages and prunes edges, and inserts a node every `lambda_insert`
//! steps next to the node with the largest accumulated error. Samples are
//! visited sequentially each epoch, so training is a pure function of the
//! data, the parameters and the seed.
//!
//! After training every sample is assigned to its nearest node to obtain
//! per-node Gaussian statistics.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GngParams {
    pub max_nodes: usize,
    pub lambda_insert: usize,
    pub eps_b: f64,
    pub eps_n: f64,
    pub max_age: u32,
    pub alpha: f64,
    pub d_decay: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for GngParams {
    fn default() -> Self {
        Self {
            max_nodes: 10,
            lambda_insert: 100,
            eps_b: 0.2,
            eps_n: 0.006,
            max_age: 50,
            alpha: 0.5,
            d_decay: 0.995,
            epochs: 5,
            seed: 0,
        }
    }
}

impl GngParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.to_string()));
        if !(0.0 < self.eps_n && self.eps_n < self.eps_b && self.eps_b < 1.0) {
            return bad("need 0 < eps_n < eps_b < 1");
        }
        if self.max_nodes < 2 {
            return bad("max_nodes must be at least 2");
        }
        if self.lambda_insert < 1 {
            return bad("lambda_insert must be at least 1");
        }
        if !(0.0 < self.alpha && self.alpha < 1.0) || !(0.0 < self.d_decay && self.d_decay < 1.0) {
            return bad("alpha and d_decay must lie in (0, 1)");
        }
        if self.epochs < 1 {
            return bad("epochs must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GngNode {
    pub id: usize,
    pub centroid: Vec<f64>,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GngEdge {
    pub a: usize,
    pub b: usize,
    pub age: u32,
}

/// Gaussian summary of the training samples nearest to one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeStats {
    pub count: usize,
    pub mean: Vec<f64>,
    /// Row-major, symmetric PSD.
    pub cov: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GngGraph {
    pub dim: usize,
    /// Ids are dense: `nodes[i].id == i`.
    pub nodes: Vec<GngNode>,
    pub edges: Vec<GngEdge>,
    pub node_stats: Vec<NodeStats>,
    pub params: GngParams,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl GngGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn centroid(&self, id: usize) -> &[f64] {
        &self.nodes[id].centroid
    }

    pub fn neighbors(&self, id: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter_map(|e| {
                if e.a == id {
                    Some(e.b)
                } else if e.b == id {
                    Some(e.a)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    pub fn cov_matrix(&self, id: usize) -> DMatrix<f64> {
        let c = &self.node_stats[id].cov;
        DMatrix::from_fn(self.dim, self.dim, |i, j| c[i][j])
    }

    /// Node covariance plus `1e-6 · (trace/dim) · I`, floored so that
    /// degenerate (zero-spread) nodes stay positive definite.
    pub fn regularized_cov(&self, id: usize) -> DMatrix<f64> {
        let c = self.cov_matrix(id);
        let d = self.dim.max(1) as f64;
        let ridge = (1e-6 * c.trace() / d).max(1e-12);
        c + DMatrix::identity(self.dim, self.dim) * ridge
    }
}

/// Nearest live node by squared Euclidean distance; ties go to the smaller id.
pub fn nearest_node(graph: &GngGraph, point: &[f64]) -> Result<(usize, f64)> {
    if point.len() != graph.dim {
        return Err(Error::DimensionMismatch {
            expected: graph.dim,
            found: point.len(),
        });
    }
    Ok(nearest_in(graph.nodes.iter().map(|n| (n.id, n.centroid.as_slice())), point))
}

fn nearest_in<'a>(nodes: impl Iterator<Item = (usize, &'a [f64])>, point: &[f64]) -> (usize, f64) {
    let mut best = (usize::MAX, f64::INFINITY);
    for (id, c) in nodes {
        let d = sq_dist(c, point);
        if d < best.1 || (d == best.1 && id < best.0) {
            best = (id, d);
        }
    }
    best
}

/// Mean nearest-node squared distance over `points`.
pub fn quantization_error(graph: &GngGraph, points: &[Vec<f64>]) -> Result<f64> {
    if points.is_empty() {
        return Ok(0.0);
    }
    let mut acc = 0.0;
    for p in points {
        acc += nearest_node(graph, p)?.1;
    }
    Ok(acc / points.len() as f64)
}

/// Mutable working graph; node slots are tombstoned on removal and
/// compacted once training ends.
struct Trainer {
    dim: usize,
    nodes: Vec<Option<(Vec<f64>, f64)>>,
    edges: Vec<GngEdge>,
}

impl Trainer {
    fn live(&self) -> impl Iterator<Item = (usize, &[f64])> {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| n.as_ref().map(|(c, _)| (i, c.as_slice())))
    }

    fn live_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_some()).count()
    }

    fn two_nearest(&self, x: &[f64]) -> (usize, f64, usize) {
        let mut first = (usize::MAX, f64::INFINITY);
        let mut second = (usize::MAX, f64::INFINITY);
        for (id, c) in self.live() {
            let d = sq_dist(c, x);
            if d < first.1 {
                second = first;
                first = (id, d);
            } else if d < second.1 {
                second = (id, d);
            }
        }
        (first.0, first.1, second.0)
    }

    fn edge_pos(&self, a: usize, b: usize) -> Option<usize> {
        self.edges
            .iter()
            .position(|e| (e.a == a && e.b == b) || (e.a == b && e.b == a))
    }

    fn connect(&mut self, a: usize, b: usize) {
        match self.edge_pos(a, b) {
            Some(i) => self.edges[i].age = 0,
            None => self.edges.push(GngEdge {
                a: a.min(b),
                b: a.max(b),
                age: 0,
            }),
        }
    }

    fn neighbors(&self, id: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|e| {
                if e.a == id {
                    Some(e.b)
                } else if e.b == id {
                    Some(e.a)
                } else {
                    None
                }
            })
            .collect()
    }

    fn step(&mut self, x: &[f64], params: &GngParams) {
        let (s1, d1, s2) = self.two_nearest(x);
        for e in self.edges.iter_mut() {
            if e.a == s1 || e.b == s1 {
                e.age += 1;
            }
        }
        {
            let (c, err) = self.nodes[s1].as_mut().expect("winner is live");
            *err += d1;
            for (ci, xi) in c.iter_mut().zip(x) {
                *ci += params.eps_b * (xi - *ci);
            }
        }
        for n in self.neighbors(s1) {
            let (c, _) = self.nodes[n].as_mut().expect("neighbor is live");
            for (ci, xi) in c.iter_mut().zip(x) {
                *ci += params.eps_n * (xi - *ci);
            }
        }
        self.connect(s1, s2);
        self.prune(params.max_age);
    }

    fn prune(&mut self, max_age: u32) {
        self.edges.retain(|e| e.age <= max_age);
        let isolated: Vec<usize> = self
            .live()
            .map(|(id, _)| id)
            .filter(|&id| !self.edges.iter().any(|e| e.a == id || e.b == id))
            .collect();
        for id in isolated {
            if self.live_count() <= 2 {
                break;
            }
            self.nodes[id] = None;
        }
    }

    fn insert(&mut self, params: &GngParams) {
        if self.live_count() >= params.max_nodes {
            return;
        }
        let q = self
            .nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| n.as_ref().map(|(_, e)| (i, *e)))
            .fold((usize::MAX, f64::NEG_INFINITY), |b, (i, e)| if e > b.1 { (i, e) } else { b })
            .0;
        let err_of = |i: usize| self.nodes[i].as_ref().map(|(_, e)| *e).unwrap_or(0.0);
        let f = {
            let nb = self.neighbors(q);
            if nb.is_empty() {
                let cq = self.nodes[q].as_ref().unwrap().0.clone();
                nearest_in(self.live().filter(|(i, _)| *i != q), &cq).0
            } else {
                let mut best = nb[0];
                for &n in &nb[1..] {
                    if err_of(n) > err_of(best) || (err_of(n) == err_of(best) && n < best) {
                        best = n;
                    }
                }
                best
            }
        };
        let cq = self.nodes[q].as_ref().unwrap().0.clone();
        let cf = self.nodes[f].as_ref().unwrap().0.clone();
        let centroid: Vec<f64> = cq.iter().zip(&cf).map(|(a, b)| 0.5 * (a + b)).collect();
        if let Some(i) = self.edge_pos(q, f) {
            self.edges.remove(i);
        }
        for id in [q, f] {
            self.nodes[id].as_mut().unwrap().1 *= params.alpha;
        }
        let r = self.nodes.len();
        let err_q = self.nodes[q].as_ref().unwrap().1;
        self.nodes.push(Some((centroid, err_q)));
        self.connect(q, r);
        self.connect(r, f);
    }

    fn decay(&mut self, d: f64) {
        for (_, e) in self.nodes.iter_mut().flatten() {
            *e *= d;
        }
    }

    fn finish(self, params: &GngParams) -> GngGraph {
        let mut remap = vec![usize::MAX; self.nodes.len()];
        let mut nodes = Vec::new();
        for (old, n) in self.nodes.into_iter().enumerate() {
            if let Some((centroid, error)) = n {
                remap[old] = nodes.len();
                nodes.push(GngNode {
                    id: nodes.len(),
                    centroid,
                    error,
                });
            }
        }
        let mut edges: Vec<GngEdge> = self
            .edges
            .into_iter()
            .map(|e| {
                let (a, b) = (remap[e.a], remap[e.b]);
                GngEdge {
                    a: a.min(b),
                    b: a.max(b),
                    age: e.age,
                }
            })
            .collect();
        edges.sort_by_key(|e| (e.a, e.b));
        GngGraph {
            dim: self.dim,
            nodes,
            edges,
            node_stats: Vec::new(),
            params: params.clone(),
        }
    }
}

/// Trains a GNG on `points` (one sample per row).
pub fn train_gng(points: &[Vec<f64>], params: &GngParams) -> Result<GngGraph> {
    params.validate()?;
    if points.len() < 2 {
        return Err(Error::TooFewSamples(points.len()));
    }
    let dim = points[0].len();
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: p.len(),
        });
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParams("non-finite training sample".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let a = rng.random_range(0..points.len());
    let distinct: Vec<usize> = (0..points.len()).filter(|&i| points[i] != points[a]).collect();
    let b = if distinct.is_empty() {
        (a + 1) % points.len()
    } else {
        distinct[rng.random_range(0..distinct.len())]
    };
    let mut tr = Trainer {
        dim,
        nodes: vec![Some((points[a].clone(), 0.0)), Some((points[b].clone(), 0.0))],
        edges: vec![GngEdge { a: 0, b: 1, age: 0 }],
    };

    let mut t = 0usize;
    for _ in 0..params.epochs {
        for x in points {
            t += 1;
            tr.step(x, params);
            if t % params.lambda_insert == 0 {
                tr.insert(params);
            }
            tr.decay(params.d_decay);
        }
    }

    let mut graph = tr.finish(params);
    graph.node_stats = node_statistics(&graph, points);
    Ok(graph)
}

fn node_statistics(graph: &GngGraph, points: &[Vec<f64>]) -> Vec<NodeStats> {
    let n = graph.len();
    let d = graph.dim;
    let mut members: Vec<Vec<&Vec<f64>>> = vec![Vec::new(); n];
    for p in points {
        let (id, _) = nearest_in(graph.nodes.iter().map(|n| (n.id, n.centroid.as_slice())), p);
        members[id].push(p);
    }
    let mut stats: Vec<NodeStats> = members
        .iter()
        .enumerate()
        .map(|(id, ms)| {
            if ms.is_empty() {
                return NodeStats {
                    count: 0,
                    mean: graph.nodes[id].centroid.clone(),
                    cov: vec![vec![0.0; d]; d],
                };
            }
            let m = ms.len() as f64;
            let mut mean = vec![0.0; d];
            for p in ms {
                for (a, v) in mean.iter_mut().zip(p.iter()) {
                    *a += v;
                }
            }
            mean.iter_mut().for_each(|a| *a /= m);
            let mut cov = vec![vec![0.0; d]; d];
            for p in ms {
                for i in 0..d {
                    let di = p[i] - mean[i];
                    for j in i..d {
                        cov[i][j] += di * (p[j] - mean[j]);
                    }
                }
            }
            for i in 0..d {
                for j in i..d {
                    cov[i][j] /= m;
                    cov[j][i] = cov[i][j];
                }
            }
            NodeStats {
                count: ms.len(),
                mean,
                cov,
            }
        })
        .collect();

    // Empty nodes borrow an isotropic covariance from their populated
    // neighbours (or from every populated node when they have none).
    let populated: Vec<usize> = (0..n).filter(|&i| stats[i].count > 0).collect();
    let iso_from = |ids: &[usize], stats: &[NodeStats]| -> Option<Vec<Vec<f64>>> {
        if ids.is_empty() {
            return None;
        }
        let tr: f64 = ids
            .iter()
            .map(|&i| (0..d).map(|k| stats[i].cov[k][k]).sum::<f64>())
            .sum::<f64>()
            / ids.len() as f64;
        let v = tr / d as f64;
        Some((0..d).map(|i| (0..d).map(|j| if i == j { v } else { 0.0 }).collect()).collect())
    };
    for id in 0..n {
        if stats[id].count > 0 {
            continue;
        }
        let nb: Vec<usize> = graph
            .neighbors(id)
            .into_iter()
            .filter(|&j| stats[j].count > 0)
            .collect();
        if let Some(c) = iso_from(&nb, &stats).or_else(|| iso_from(&populated, &stats)) {
            stats[id].cov = c;
        }
    }
    stats
}
