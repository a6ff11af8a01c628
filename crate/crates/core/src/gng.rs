//! Growing neural gas over a stream of joint embeddings.
//!
//! Each step moves the nearest node and its graph neighbours toward the
//! sample, ages the winner's edges, prunes stale edges and orphaned nodes,
//! and every `λ` steps inserts a node between the highest-error node and its
//! highest-error neighbour. The node positions are the mixture means.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::JointGaussian;
use crate::linalg::{factor_with_policy, symmetrize};
use crate::mixture::JointMixture;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GngConfig {
    /// Winner learning rate `ε_b`.
    pub epsilon_b: f64,
    /// Neighbour learning rate `ε_n`.
    pub epsilon_n: f64,
    /// Insertion interval `λ`.
    pub lambda_interval: u64,
    pub a_max: u32,
    /// Error decay applied to the two nodes around an insertion.
    pub alpha: f64,
    /// Error decay applied to every node after every step.
    pub beta: f64,
    pub k_max: usize,
}

impl Default for GngConfig {
    fn default() -> Self {
        Self { epsilon_b: 0.2, epsilon_n: 0.01, lambda_interval: 100, a_max: 50, alpha: 0.5, beta: 0.995, k_max: 25 }
    }
}

impl GngConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 < self.epsilon_n
            && self.epsilon_n <= self.epsilon_b
            && self.epsilon_b < 1.0
            && self.lambda_interval >= 1
            && self.a_max >= 1
            && 0.0 < self.alpha
            && self.alpha < 1.0
            && 0.0 < self.beta
            && self.beta < 1.0
            && self.k_max >= 2;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid GNG configuration {self:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GngNode {
    pub id: u64,
    pub position: Vec<f64>,
    pub error: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GngEdge {
    pub a: u64,
    pub b: u64,
    pub age: u32,
}

/// What one step did, for monitoring.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepInfo {
    pub winner: u64,
    pub runner_up: u64,
    /// `‖Z − μ_{s1}‖²` before the winner moved.
    pub quantization_error: f64,
    pub inserted: Option<u64>,
    pub removed_nodes: usize,
}

/// Nodes are kept sorted by id; edges are keyed by `(min id, max id)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphRaw", into = "GraphRaw")]
pub struct GngGraph {
    nodes: Vec<GngNode>,
    edges: BTreeMap<(u64, u64), u32>,
    step_counter: u64,
    next_id: u64,
    distance_evals: u64,
}

#[derive(Serialize, Deserialize)]
struct GraphRaw {
    nodes: Vec<GngNode>,
    edges: Vec<GngEdge>,
    step_counter: u64,
}

impl From<GngGraph> for GraphRaw {
    fn from(g: GngGraph) -> Self {
        let edges = g.edges().collect();
        GraphRaw { nodes: g.nodes, edges, step_counter: g.step_counter }
    }
}

impl TryFrom<GraphRaw> for GngGraph {
    type Error = Error;
    fn try_from(r: GraphRaw) -> Result<Self> {
        if r.nodes.is_empty() {
            return Err(Error::InvalidArgument("graph has no nodes".into()));
        }
        let d = r.nodes[0].position.len();
        if r.nodes.iter().any(|n| n.position.len() != d) {
            return Err(Error::DimensionMismatch("node positions differ in length".into()));
        }
        let mut nodes = r.nodes;
        nodes.sort_by_key(|n| n.id);
        let ids: BTreeSet<u64> = nodes.iter().map(|n| n.id).collect();
        if ids.len() != nodes.len() {
            return Err(Error::InvalidArgument("duplicate node ids".into()));
        }
        let mut edges = BTreeMap::new();
        for e in r.edges {
            if e.a == e.b || !ids.contains(&e.a) || !ids.contains(&e.b) {
                return Err(Error::InvalidArgument(format!("edge ({}, {}) is invalid", e.a, e.b)));
            }
            edges.insert(key(e.a, e.b), e.age);
        }
        let next_id = nodes.last().expect("nonempty").id + 1;
        Ok(Self { nodes, edges, step_counter: r.step_counter, next_id, distance_evals: 0 })
    }
}

fn key(a: u64, b: u64) -> (u64, u64) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl GngGraph {
    /// Two nodes at the seed points joined by one edge of age 0.
    pub fn init(a: &DVector<f64>, b: &DVector<f64>) -> Result<Self> {
        if a.len() != b.len() || a.is_empty() {
            return Err(Error::DimensionMismatch("seed points must share a nonzero dimension".into()));
        }
        if a == b {
            return Err(Error::DegenerateSeed);
        }
        let nodes = vec![
            GngNode { id: 0, position: a.as_slice().to_vec(), error: 0.0 },
            GngNode { id: 1, position: b.as_slice().to_vec(), error: 0.0 },
        ];
        let mut edges = BTreeMap::new();
        edges.insert((0, 1), 0);
        Ok(Self { nodes, edges, step_counter: 0, next_id: 2, distance_evals: 0 })
    }

    /// Seeds from two distinct rows of `data` drawn at random.
    pub fn init_from_data<R: Rng + ?Sized>(data: &DMatrix<f64>, rng: &mut R) -> Result<Self> {
        let n = data.nrows();
        if n < 2 {
            return Err(Error::DegenerateSeed);
        }
        let i = rng.random_range(0..n);
        let first = data.row(i).transpose();
        let others: Vec<usize> = (0..n).filter(|&j| data.row(j).transpose() != first).collect();
        if others.is_empty() {
            return Err(Error::DegenerateSeed);
        }
        let j = others[rng.random_range(0..others.len())];
        Self::init(&first, &data.row(j).transpose())
    }

    pub fn nodes(&self) -> &[GngNode] {
        &self.nodes
    }

    pub fn edges(&self) -> impl Iterator<Item = GngEdge> + '_ {
        self.edges.iter().map(|(&(a, b), &age)| GngEdge { a, b, age })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn dim(&self) -> usize {
        self.nodes[0].position.len()
    }

    pub fn steps(&self) -> u64 {
        self.step_counter
    }

    /// Distance evaluations performed by the nearest-pair search so far.
    pub fn distance_evals(&self) -> u64 {
        self.distance_evals
    }

    fn index(&self, id: u64) -> usize {
        self.nodes.binary_search_by_key(&id, |n| n.id).expect("edge endpoints are live nodes")
    }

    pub fn neighbors(&self, id: u64) -> Vec<u64> {
        self.edges
            .keys()
            .filter_map(|&(a, b)| {
                if a == id {
                    Some(b)
                } else if b == id {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }

    /// Winner and runner-up by squared distance; ties go to the lower id.
    fn nearest_two(&mut self, z: &[f64]) -> (usize, usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        let mut second = (usize::MAX, f64::INFINITY);
        for (i, node) in self.nodes.iter().enumerate() {
            let d = sq_dist(z, &node.position);
            if d < best.1 {
                second = best;
                best = (i, d);
            } else if d < second.1 {
                second = (i, d);
            }
        }
        self.distance_evals += self.nodes.len() as u64;
        (best.0, second.0, best.1)
    }

    /// One iteration of the growth loop on sample `z`.
    pub fn step(&mut self, z: &DVector<f64>, cfg: &GngConfig) -> Result<StepInfo> {
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!("sample has {} entries, nodes have {}", z.len(), self.dim())));
        }
        self.step_counter += 1;
        let z = z.as_slice();
        let (s1, s2, dist) = self.nearest_two(z);
        let (id1, id2) = (self.nodes[s1].id, self.nodes[s2].id);

        self.nodes[s1].error += dist;
        for (p, zi) in self.nodes[s1].position.iter_mut().zip(z) {
            *p += cfg.epsilon_b * (zi - *p);
        }
        for n in self.neighbors(id1) {
            let i = self.index(n);
            for (p, zi) in self.nodes[i].position.iter_mut().zip(z) {
                *p += cfg.epsilon_n * (zi - *p);
            }
        }

        self.edges.insert(key(id1, id2), 0);
        for (&(a, b), age) in self.edges.iter_mut() {
            if a == id1 || b == id1 {
                *age += 1;
            }
        }
        self.edges.retain(|_, age| *age <= cfg.a_max);
        let connected: BTreeSet<u64> = self.edges.keys().flat_map(|&(a, b)| [a, b]).collect();
        let before = self.nodes.len();
        self.nodes.retain(|n| connected.contains(&n.id));
        let removed_nodes = before - self.nodes.len();

        let mut inserted = None;
        if self.step_counter % cfg.lambda_interval == 0 && self.nodes.len() < cfg.k_max {
            inserted = Some(self.insert(cfg));
        }
        for n in &mut self.nodes {
            n.error *= cfg.beta;
        }
        Ok(StepInfo { winner: id1, runner_up: id2, quantization_error: dist, inserted, removed_nodes })
    }

    fn insert(&mut self, cfg: &GngConfig) -> u64 {
        let u = self
            .nodes
            .iter()
            .fold(None::<&GngNode>, |acc, n| match acc {
                Some(a) if a.error >= n.error => Some(a),
                _ => Some(n),
            })
            .expect("nonempty")
            .id;
        let v = self
            .neighbors(u)
            .into_iter()
            .map(|id| (id, self.nodes[self.index(id)].error))
            .fold(None::<(u64, f64)>, |acc, c| match acc {
                Some(a) if a.1 >= c.1 => Some(a),
                _ => Some(c),
            })
            .expect("pruning leaves no isolated nodes")
            .0;
        let (iu, iv) = (self.index(u), self.index(v));
        let position: Vec<f64> =
            self.nodes[iu].position.iter().zip(&self.nodes[iv].position).map(|(a, b)| 0.5 * (a + b)).collect();
        let w = self.next_id;
        self.next_id += 1;
        self.edges.remove(&key(u, v));
        self.edges.insert(key(u, w), 0);
        self.edges.insert(key(v, w), 0);
        self.nodes[iu].error *= cfg.alpha;
        self.nodes[iv].error *= cfg.alpha;
        // The new node inherits u's error after u has been decayed.
        let error = self.nodes[iu].error;
        self.nodes.push(GngNode { id: w, position, error });
        w
    }

    /// Node positions, one per row, in id order.
    pub fn extract_prototypes(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(self.nodes.len(), d, |i, j| self.nodes[i].position[j])
    }

    /// Connected components of the edge graph.
    pub fn components(&self) -> usize {
        let mut seen = BTreeSet::new();
        let mut count = 0;
        for n in &self.nodes {
            if !seen.insert(n.id) {
                continue;
            }
            count += 1;
            let mut queue = VecDeque::from([n.id]);
            while let Some(x) = queue.pop_front() {
                for y in self.neighbors(x) {
                    if seen.insert(y) {
                        queue.push_back(y);
                    }
                }
            }
        }
        count
    }

    /// Runs over the rows of `stream` in order and returns each step's quantization error.
    pub fn run(&mut self, stream: &DMatrix<f64>, cfg: &GngConfig) -> Result<Vec<f64>> {
        cfg.validate()?;
        let mut errs = Vec::with_capacity(stream.nrows());
        for row in stream.row_iter() {
            errs.push(self.step(&row.transpose(), cfg)?.quantization_error);
        }
        Ok(errs)
    }
}

/// Running mean of per-step quantization errors, `Ā_t = (1/t) Σ_{s≤t} e_s`.
pub fn stream_average(errors: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    errors
        .iter()
        .enumerate()
        .map(|(i, e)| {
            acc += e;
            acc / (i + 1) as f64
        })
        .collect()
}

pub fn gng_init(a: &DVector<f64>, b: &DVector<f64>) -> Result<GngGraph> {
    GngGraph::init(a, b)
}

pub fn gng_step(graph: &GngGraph, z: &DVector<f64>, cfg: &GngConfig) -> Result<GngGraph> {
    let mut g = graph.clone();
    g.step(z, cfg)?;
    Ok(g)
}

pub fn gng_extract_prototypes(graph: &GngGraph) -> DMatrix<f64> {
    graph.extract_prototypes()
}

pub fn gng_components(graph: &GngGraph) -> usize {
    graph.components()
}

/// Turns the prototypes into a joint mixture. Each row of `data` is assigned
/// to its nearest prototype; weights are the assignment shares and one
/// covariance is pooled from all residuals, with diagonal entries floored at
/// `var_floor`. Prototypes that win no rows keep weight zero.
pub fn gng_mixture(graph: &GngGraph, data: &DMatrix<f64>, d_c: usize, var_floor: f64) -> Result<JointMixture> {
    let protos = graph.extract_prototypes();
    let (n, d) = data.shape();
    if d != protos.ncols() {
        return Err(Error::DimensionMismatch(format!("data has {d} columns, prototypes have {}", protos.ncols())));
    }
    if n == 0 || d_c == 0 || d_c >= d {
        return Err(Error::InvalidArgument("need data rows and a proper context split".into()));
    }
    let k = protos.nrows();
    let mut counts = vec![0usize; k];
    let mut cov = DMatrix::zeros(d, d);
    for i in 0..n {
        let x = data.row(i);
        let best = (0..k)
            .map(|j| (j, (x - protos.row(j)).norm_squared()))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
            .0;
        counts[best] += 1;
        let r = (x - protos.row(best)).transpose();
        cov.ger(1.0, &r, &r, 1.0);
    }
    let mut cov = symmetrize(&(cov / n as f64));
    for a in 0..d {
        cov[(a, a)] = cov[(a, a)].max(var_floor);
    }
    factor_with_policy(&cov)?;
    let weights = DVector::from_iterator(k, counts.iter().map(|&c| c as f64 / n as f64));
    let components = (0..k)
        .map(|j| JointGaussian::from_full(&protos.row(j).transpose(), &cov, d_c))
        .collect::<Result<Vec<_>>>()?;
    JointMixture::new(weights, components)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seeded, standard_normal};
    use crate::synth::gen_dataset_a;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(x)
    }

    fn check_invariants(g: &GngGraph, cfg: &GngConfig) {
        assert!(g.node_count() >= 1 && g.node_count() <= cfg.k_max);
        let ids: BTreeSet<u64> = g.nodes().iter().map(|n| n.id).collect();
        let mut touched = BTreeSet::new();
        for e in g.edges() {
            assert!(e.a != e.b && ids.contains(&e.a) && ids.contains(&e.b));
            assert!(e.age <= cfg.a_max);
            touched.insert(e.a);
            touched.insert(e.b);
        }
        assert_eq!(touched, ids, "no isolated nodes");
    }

    #[test]
    fn init_examples() {
        let g = gng_init(&v(&[0.0, 0.0]), &v(&[1.0, 1.0])).unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (2, 1));
        assert_eq!(g.edges().next().unwrap().age, 0);
        assert!(g.nodes().iter().all(|n| n.error == 0.0));
        assert_eq!(g.components(), 1);
        assert_eq!(g.extract_prototypes(), DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 1.0]));
        assert!(matches!(gng_init(&v(&[1.0, 2.0]), &v(&[1.0, 2.0])), Err(Error::DegenerateSeed)));
        let data = standard_normal(&mut seeded(1), 50, 2);
        let a = GngGraph::init_from_data(&data, &mut seeded(9)).unwrap();
        let b = GngGraph::init_from_data(&data, &mut seeded(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn repeated_point_contracts_geometrically() {
        let cfg = GngConfig::default();
        let mut g = gng_init(&v(&[0.0, 0.0]), &v(&[5.0, 5.0])).unwrap();
        let z = v(&[1.0, 0.0]);
        let mut gap = 1.0;
        for _ in 0..40 {
            g.step(&z, &cfg).unwrap();
            let p = &g.nodes()[0].position;
            let new_gap = ((p[0] - 1.0).powi(2) + p[1].powi(2)).sqrt();
            assert!((new_gap - (1.0 - cfg.epsilon_b) * gap).abs() < 1e-12);
            gap = new_gap;
        }
        for _ in 0..3000 {
            g.step(&z, &cfg).unwrap();
        }
        assert!(g.nodes().iter().map(|n| n.error).sum::<f64>() < 1e-6);
    }

    #[test]
    fn one_insertion_per_interval() {
        let cfg = GngConfig::default();
        let mut rng = seeded(2);
        let mut g = gng_init(&v(&[-3.0, 0.0]), &v(&[3.0, 0.0])).unwrap();
        for round in 0..5 {
            let before = g.node_count();
            for _ in 0..cfg.lambda_interval {
                let c = if rng.random::<bool>() { -3.0 } else { 3.0 };
                let z = v(&[c + 0.3 * rng.random::<f64>(), 0.3 * rng.random::<f64>()]);
                g.step(&z, &cfg).unwrap();
            }
            assert_eq!(g.node_count(), before + 1, "round {round}");
        }
    }

    #[test]
    fn insertion_details() {
        let cfg = GngConfig { lambda_interval: 1, ..Default::default() };
        let mut g = gng_init(&v(&[0.0]), &v(&[4.0])).unwrap();
        let info = g.step(&v(&[1.0]), &cfg).unwrap();
        // Winner 0 accrues 1.0, halves to 0.5 on insertion, the new node copies 0.5,
        // then everything decays by β.
        assert_eq!(info.inserted, Some(2));
        let e: Vec<f64> = g.nodes().iter().map(|n| n.error).collect();
        assert!((e[0] - 0.5 * 0.995).abs() < 1e-15);
        assert!((e[2] - 0.5 * 0.995).abs() < 1e-15);
        assert!((g.nodes()[2].position[0] - (0.2 + 4.0 - 0.01 * 3.0) / 2.0).abs() < 1e-12);
        let edges: Vec<(u64, u64)> = g.edges().map(|e| (e.a, e.b)).collect();
        assert_eq!(edges, vec![(0, 2), (1, 2)]);
    }

    #[test]
    fn ties_go_to_the_lower_id() {
        let mut g = gng_init(&v(&[-1.0]), &v(&[1.0])).unwrap();
        let info = g.step(&v(&[0.0]), &GngConfig::default()).unwrap();
        assert_eq!((info.winner, info.runner_up), (0, 1));
    }

    #[test]
    fn stale_edges_and_orphans_are_pruned() {
        let cfg = GngConfig { a_max: 3, lambda_interval: 1_000_000, ..Default::default() };
        let mut g = gng_init(&v(&[0.0]), &v(&[1.0])).unwrap();
        // Build a third node manually through an insertion-style graph.
        let mut raw: GraphRaw = g.clone().into();
        raw.nodes.push(GngNode { id: 2, position: vec![10.0], error: 0.0 });
        raw.edges.push(GngEdge { a: 0, b: 2, age: 0 });
        g = GngGraph::try_from(raw).unwrap();
        for _ in 0..4 {
            g.step(&v(&[0.1]), &cfg).unwrap();
        }
        // Edge (0, 2) aged past a_max because 2 never won or ran up.
        assert_eq!(g.node_count(), 2);
        check_invariants(&g, &cfg);
    }

    #[test]
    fn k_max_is_respected_and_invariants_hold() {
        let cfg = GngConfig { k_max: 6, lambda_interval: 10, ..Default::default() };
        let mut rng = seeded(3);
        let data = standard_normal(&mut rng, 5000, 3);
        let mut g = GngGraph::init_from_data(&data, &mut rng).unwrap();
        for row in data.row_iter() {
            g.step(&row.transpose(), &cfg).unwrap();
            check_invariants(&g, &cfg);
        }
        assert_eq!(g.node_count(), 6);
        assert!(g.distance_evals() <= 5000 * 6);
    }

    #[test]
    fn ring_prototypes_sit_on_the_ring() {
        let cfg = GngConfig::default();
        let mut rng = seeded(4);
        let n = 20_000;
        let data = DMatrix::from_fn(n, 2, |_, _| 0.0);
        let mut data = data;
        for i in 0..n {
            let t = rng.random::<f64>() * std::f64::consts::TAU;
            let r = 2.0 + 0.02 * rng.random::<f64>();
            data[(i, 0)] = r * t.cos();
            data[(i, 1)] = r * t.sin();
        }
        let mut g = GngGraph::init_from_data(&data, &mut rng).unwrap();
        g.run(&data, &cfg).unwrap();
        for row in g.extract_prototypes().row_iter() {
            assert!((row.norm() / 2.01 - 1.0).abs() < 0.1, "radius {}", row.norm());
        }
    }

    #[test]
    fn separated_blobs_split_the_graph() {
        let cfg = GngConfig::default();
        let mut rng = seeded(5);
        let n = 30_000;
        let mut data = standard_normal(&mut rng, n, 2) * 0.1;
        for i in 0..n {
            if rng.random::<bool>() {
                data[(i, 0)] += 10.0;
            }
        }
        let mut g = GngGraph::init_from_data(&data, &mut rng).unwrap();
        g.run(&data, &cfg).unwrap();
        assert!(g.components() >= 2);
    }

    #[test]
    fn fully_connected_triangle_is_one_component() {
        let raw = GraphRaw {
            nodes: (0..3).map(|i| GngNode { id: i, position: vec![i as f64], error: 0.0 }).collect(),
            edges: vec![GngEdge { a: 0, b: 1, age: 0 }, GngEdge { a: 1, b: 2, age: 0 }, GngEdge { a: 0, b: 2, age: 0 }],
            step_counter: 0,
        };
        assert_eq!(GngGraph::try_from(raw).unwrap().components(), 1);
    }

    #[test]
    fn same_stream_same_graph_and_json_round_trip() {
        let mut rng = seeded(6);
        let ds = gen_dataset_a(3000, 0.05, &mut rng);
        let data = ds.joint_matrix();
        let cfg = GngConfig::default();
        let run = || {
            let mut g = GngGraph::init_from_data(&data, &mut seeded(7)).unwrap();
            g.run(&data, &cfg).unwrap();
            g
        };
        let (a, b) = (run(), run());
        assert_eq!(a, b);
        let s = serde_json::to_string(&a).unwrap();
        let back: GngGraph = serde_json::from_str(&s).unwrap();
        assert_eq!(back.nodes(), a.nodes());
        assert_eq!(back.edges().collect::<Vec<_>>(), a.edges().collect::<Vec<_>>());
    }

    #[test]
    fn mixture_from_prototypes() {
        let mut rng = seeded(8);
        let ds = gen_dataset_a(3000, 0.05, &mut rng);
        let data = ds.joint_matrix();
        let mut g = GngGraph::init_from_data(&data, &mut rng).unwrap();
        g.run(&data, &GngConfig::default()).unwrap();
        let mix = gng_mixture(&g, &data, 1, 1e-6).unwrap();
        assert_eq!(mix.k(), g.node_count());
        assert!((mix.weights().sum() - 1.0).abs() < 1e-12);
        assert!(mix.log_pdf(&data.row(0).transpose()).unwrap().is_finite());
    }

    #[test]
    fn stream_average_is_the_running_mean() {
        assert_eq!(stream_average(&[4.0, 2.0, 0.0]), vec![4.0, 3.0, 2.0]);
        assert!(stream_average(&[]).is_empty());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for cfg in [
            GngConfig { epsilon_n: 0.5, epsilon_b: 0.2, ..Default::default() },
            GngConfig { k_max: 1, ..Default::default() },
            GngConfig { beta: 1.0, ..Default::default() },
            GngConfig { lambda_interval: 0, ..Default::default() },
        ] {
            assert!(cfg.validate().is_err());
        }
        assert!(GngConfig::default().validate().is_ok());
    }
}
