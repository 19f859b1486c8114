//! Pose-graph backend over SE(3): odometry and loop edges, weighted robust
//! objective, Gauss-Newton optimization with vertex 0 gauge-fixed.
//!
//! The cost is `Σ_consecutive λ‖r‖² + Σ_loop ρ(‖r‖)` with the per-edge
//! residual `r = log(measured⁻¹ ∘ T_i⁻¹ ∘ T_j)` as a 6-vector. Right
//! perturbations with the log-map Jacobian taken as identity at convergence;
//! the adjoint factor on the `i` side is kept.

use crate::geometry::{se3_adjoint, se3_exp, se3_log, Pose};
use nalgebra::{DMatrix, DVector, Matrix6, UnitQuaternion, Vector3, Vector6};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PoseGraphError {
    #[error("bad edge endpoints ({i}, {j}): {reason}")]
    BadEndpoints { i: usize, j: usize, reason: String },
    #[error("graph is disconnected")]
    Disconnected,
    #[error("normal equations singular after {0} damped retries")]
    SingularNormalEquations(usize),
    #[error("graph has no vertices")]
    Empty,
    #[error("malformed graph file at line {line}: {reason}")]
    MalformedFile { line: usize, reason: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeKind {
    Consecutive,
    Loop,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Kernel {
    L2,
    Huber(f64),
}

impl Kernel {
    /// ρ(s) applied to the residual norm; Huber is `s²` inside δ and
    /// `2δs − δ²` outside, so δ → ∞ reproduces L2.
    fn rho(&self, s: f64) -> f64 {
        match *self {
            Kernel::L2 => s * s,
            Kernel::Huber(delta) => {
                if s <= delta {
                    s * s
                } else {
                    2.0 * delta * s - delta * delta
                }
            }
        }
    }

    /// IRLS weight ρ'(s) / (2s).
    fn weight(&self, s: f64) -> f64 {
        match *self {
            Kernel::L2 => 1.0,
            Kernel::Huber(delta) => {
                if s <= delta {
                    1.0
                } else {
                    delta / s
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub measured: Pose,
    pub weight: f64,
    pub kind: EdgeKind,
    pub kernel: Kernel,
}

#[derive(Clone, Debug, Default)]
pub struct PoseGraph {
    vertices: Vec<Pose>,
    edges: Vec<Edge>,
}

impl PoseGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_vertex(&mut self, pose: Pose) -> usize {
        self.vertices.push(pose);
        self.vertices.len() - 1
    }

    pub fn vertices(&self) -> &[Pose] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn add_edge(
        &mut self,
        i: usize,
        j: usize,
        measured: Pose,
        kind: EdgeKind,
        weight: f64,
    ) -> Result<(), PoseGraphError> {
        self.add_edge_with_kernel(i, j, measured, kind, weight, Kernel::L2)
    }

    pub fn add_edge_with_kernel(
        &mut self,
        i: usize,
        j: usize,
        measured: Pose,
        kind: EdgeKind,
        weight: f64,
        kernel: Kernel,
    ) -> Result<(), PoseGraphError> {
        if i >= j {
            return Err(PoseGraphError::BadEndpoints {
                i,
                j,
                reason: "requires i < j".into(),
            });
        }
        if j >= self.vertices.len() {
            return Err(PoseGraphError::BadEndpoints {
                i,
                j,
                reason: format!("graph has {} vertices", self.vertices.len()),
            });
        }
        if kind == EdgeKind::Consecutive && j != i + 1 {
            return Err(PoseGraphError::BadEndpoints {
                i,
                j,
                reason: "consecutive edges must satisfy j = i + 1".into(),
            });
        }
        self.edges.push(Edge {
            i,
            j,
            measured,
            weight,
            kind,
            kernel,
        });
        Ok(())
    }

    fn residual(&self, edge: &Edge) -> Vector6<f64> {
        let rel = edge
            .measured
            .inverse()
            .compose(&self.vertices[edge.i].inverse())
            .compose(&self.vertices[edge.j]);
        se3_log(&rel)
    }

    /// Total objective value, term-by-term per edge kind.
    pub fn cost(&self) -> f64 {
        self.edges
            .iter()
            .map(|e| {
                let s = self.residual(e).norm();
                match e.kind {
                    EdgeKind::Consecutive => e.weight * s * s,
                    EdgeKind::Loop => e.weight * e.kernel.rho(s),
                }
            })
            .sum()
    }

    fn connected(&self) -> bool {
        if self.vertices.is_empty() {
            return false;
        }
        let mut parent: Vec<usize> = (0..self.vertices.len()).collect();
        fn find(parent: &mut Vec<usize>, x: usize) -> usize {
            let mut root = x;
            while parent[root] != root {
                root = parent[root];
            }
            let mut cur = x;
            while parent[cur] != root {
                let next = parent[cur];
                parent[cur] = root;
                cur = next;
            }
            root
        }
        for e in &self.edges {
            let (a, b) = (find(&mut parent, e.i), find(&mut parent, e.j));
            if a != b {
                parent[a] = b;
            }
        }
        let root = find(&mut parent, 0);
        (0..self.vertices.len()).all(|v| find(&mut parent, v) == root)
    }

    /// Gauss-Newton with vertex 0 fixed. Returns the optimized graph and its
    /// final cost; the final cost never exceeds the initial one. Singular or
    /// cost-increasing steps retry with a Levenberg factor grown ×10 up to
    /// five times.
    pub fn optimize(&self, max_iters: usize, tol: f64) -> Result<(PoseGraph, f64), PoseGraphError> {
        if self.vertices.is_empty() {
            return Err(PoseGraphError::Empty);
        }
        if !self.connected() {
            return Err(PoseGraphError::Disconnected);
        }
        let mut graph = self.clone();
        if graph.vertices.len() == 1 {
            return Ok((graph.clone(), graph.cost()));
        }
        let free = graph.vertices.len() - 1;
        let dim = 6 * free;
        let mut cost = graph.cost();
        for _ in 0..max_iters {
            let mut h = DMatrix::<f64>::zeros(dim, dim);
            let mut b = DVector::<f64>::zeros(dim);
            for edge in &graph.edges {
                let r = graph.residual(edge);
                let s = r.norm();
                let w = edge.weight
                    * match edge.kind {
                        EdgeKind::Consecutive => 1.0,
                        EdgeKind::Loop => edge.kernel.weight(s),
                    };
                let jac_j = Matrix6::<f64>::identity();
                let rel_ji = graph.vertices[edge.j].inverse().compose(&graph.vertices[edge.i]);
                let jac_i = -se3_adjoint(&rel_ji);
                let blocks: [(usize, Matrix6<f64>); 2] = [(edge.i, jac_i), (edge.j, jac_j)];
                for (vi, ji) in &blocks {
                    if *vi == 0 {
                        continue;
                    }
                    let row = 6 * (vi - 1);
                    for (vj, jj) in &blocks {
                        if *vj == 0 {
                            continue;
                        }
                        let col = 6 * (vj - 1);
                        let block = ji.transpose() * *jj * w;
                        for a in 0..6 {
                            for c in 0..6 {
                                h[(row + a, col + c)] += block[(a, c)];
                            }
                        }
                    }
                    let grad = ji.transpose() * r * w;
                    for a in 0..6 {
                        b[row + a] -= grad[a];
                    }
                }
            }
            if b.norm() < tol {
                break;
            }
            // Solve, retrying with growing damping on failure or cost増.
            let mut lambda = 0.0;
            let mut accepted = false;
            for attempt in 0..=5 {
                let mut damped = h.clone();
                if lambda > 0.0 {
                    for d in 0..dim {
                        damped[(d, d)] += lambda;
                    }
                }
                let solution = damped.cholesky().map(|chol| chol.solve(&b));
                let Some(delta) = solution else {
                    if attempt == 5 {
                        return Err(PoseGraphError::SingularNormalEquations(attempt));
                    }
                    lambda = if lambda == 0.0 { 1e-6 } else { lambda * 10.0 };
                    continue;
                };
                let mut candidate = graph.clone();
                for v in 1..candidate.vertices.len() {
                    let xi = Vector6::from_row_slice(&delta.as_slice()[6 * (v - 1)..6 * v]);
                    candidate.vertices[v] = candidate.vertices[v].compose(&se3_exp(&xi));
                }
                let new_cost = candidate.cost();
                if new_cost <= cost {
                    graph = candidate;
                    cost = new_cost;
                    accepted = true;
                    break;
                }
                lambda = if lambda == 0.0 { 1e-6 } else { lambda * 10.0 };
            }
            if !accepted {
                break;
            }
        }
        Ok((graph, cost))
    }

    /// Text export: `VERTEX_SE3 id tx ty tz qx qy qz qw` and
    /// `EDGE_SE3 i j tx ty tz qx qy qz qw weight kind` lines.
    pub fn to_g2o(&self) -> String {
        let mut out = String::new();
        for (id, v) in self.vertices.iter().enumerate() {
            let q = UnitQuaternion::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(
                *v.rotation(),
            ));
            let t = v.translation();
            writeln!(
                out,
                "VERTEX_SE3 {id} {} {} {} {} {} {} {}",
                t.x, t.y, t.z, q.i, q.j, q.k, q.w
            )
            .unwrap();
        }
        for e in &self.edges {
            let q = UnitQuaternion::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(
                *e.measured.rotation(),
            ));
            let t = e.measured.translation();
            let kind = match e.kind {
                EdgeKind::Consecutive => "consecutive",
                EdgeKind::Loop => "loop",
            };
            writeln!(
                out,
                "EDGE_SE3 {} {} {} {} {} {} {} {} {} {} {kind}",
                e.i, e.j, t.x, t.y, t.z, q.i, q.j, q.k, q.w, e.weight
            )
            .unwrap();
        }
        out
    }

    pub fn from_g2o(text: &str) -> Result<Self, PoseGraphError> {
        let mut graph = PoseGraph::new();
        let mut pending_edges = Vec::new();
        for (line_no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace();
            let tag = fields.next().unwrap();
            let rest: Vec<&str> = fields.collect();
            let bad = |reason: &str| PoseGraphError::MalformedFile {
                line: line_no + 1,
                reason: reason.to_string(),
            };
            let parse_f = |s: &str| -> Result<f64, PoseGraphError> {
                s.parse::<f64>().map_err(|e| bad(&e.to_string()))
            };
            match tag {
                "VERTEX_SE3" => {
                    if rest.len() != 8 {
                        return Err(bad("expected: id tx ty tz qx qy qz qw"));
                    }
                    let id: usize = rest[0].parse().map_err(|_| bad("bad vertex id"))?;
                    if id != graph.vertices.len() {
                        return Err(bad("vertex ids must be dense and in order"));
                    }
                    let pose = pose_from_tq(&rest[1..], parse_f)?;
                    graph.add_vertex(pose);
                }
                "EDGE_SE3" => {
                    if rest.len() != 11 {
                        return Err(bad("expected: i j tx ty tz qx qy qz qw weight kind"));
                    }
                    let i: usize = rest[0].parse().map_err(|_| bad("bad endpoint"))?;
                    let j: usize = rest[1].parse().map_err(|_| bad("bad endpoint"))?;
                    let measured = pose_from_tq(&rest[2..9], parse_f)?;
                    let weight = parse_f(rest[9])?;
                    let kind = match rest[10] {
                        "consecutive" => EdgeKind::Consecutive,
                        "loop" => EdgeKind::Loop,
                        other => return Err(bad(&format!("unknown edge kind `{other}`"))),
                    };
                    pending_edges.push((i, j, measured, kind, weight, line_no + 1));
                }
                other => return Err(bad(&format!("unknown record `{other}`"))),
            }
        }
        for (i, j, measured, kind, weight, line) in pending_edges {
            graph
                .add_edge(i, j, measured, kind, weight)
                .map_err(|e| PoseGraphError::MalformedFile {
                    line,
                    reason: e.to_string(),
                })?;
        }
        Ok(graph)
    }
}

fn pose_from_tq(
    fields: &[&str],
    parse_f: impl Fn(&str) -> Result<f64, PoseGraphError>,
) -> Result<Pose, PoseGraphError> {
    let t = Vector3::new(parse_f(fields[0])?, parse_f(fields[1])?, parse_f(fields[2])?);
    let q = nalgebra::Quaternion::new(
        parse_f(fields[6])?,
        parse_f(fields[3])?,
        parse_f(fields[4])?,
        parse_f(fields[5])?,
    );
    let rotation = UnitQuaternion::from_quaternion(q).to_rotation_matrix();
    Ok(Pose::from_parts_unchecked(*rotation.matrix(), t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::so3_exp;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_pose(rng: &mut ChaCha8Rng, rot: f64, trans: f64) -> Pose {
        let axis = Vector3::new(
            rng.random::<f64>() - 0.5,
            rng.random::<f64>() - 0.5,
            rng.random::<f64>() - 0.5,
        )
        .normalize();
        let angle = (rng.random::<f64>() * 2.0 - 1.0) * rot;
        let t = Vector3::new(
            rng.random::<f64>() - 0.5,
            rng.random::<f64>() - 0.5,
            rng.random::<f64>() - 0.5,
        ) * (2.0 * trans);
        Pose::from_parts_unchecked(so3_exp(&(axis * angle)), t)
    }

    fn chain(n: usize) -> (PoseGraph, Vec<Pose>) {
        // Ground-truth poses marching along +x with a gentle turn.
        let mut truth = vec![Pose::identity()];
        for k in 1..n {
            let step = Pose::from_parts_unchecked(
                so3_exp(&Vector3::new(0.0, 0.0, 0.05)),
                Vector3::new(0.1, 0.005 * k as f64, 0.0),
            );
            let prev = truth[k - 1];
            truth.push(prev.compose(&step));
        }
        let mut g = PoseGraph::new();
        for pose in &truth {
            g.add_vertex(*pose);
        }
        (g, truth)
    }

    #[test]
    fn add_edge_contract() {
        let (mut g, _) = chain(10);
        g.add_edge(0, 1, Pose::identity(), EdgeKind::Consecutive, 2.0)
            .unwrap();
        g.add_edge(1, 2, Pose::identity(), EdgeKind::Consecutive, 2.0)
            .unwrap();
        g.add_edge(0, 9, Pose::identity(), EdgeKind::Loop, 1.0).unwrap();
        assert_eq!(g.edges().len(), 3);
        assert_eq!(g.edges()[2].kind, EdgeKind::Loop);
        assert!(matches!(
            g.add_edge(3, 3, Pose::identity(), EdgeKind::Loop, 1.0),
            Err(PoseGraphError::BadEndpoints { .. })
        ));
        assert!(matches!(
            g.add_edge(0, 5, Pose::identity(), EdgeKind::Consecutive, 1.0),
            Err(PoseGraphError::BadEndpoints { .. })
        ));
    }

    #[test]
    fn zero_residual_graph_is_left_alone() {
        let (mut g, truth) = chain(8);
        for k in 0..7 {
            let rel = truth[k].inverse().compose(&truth[k + 1]);
            g.add_edge(k, k + 1, rel, EdgeKind::Consecutive, 2.0).unwrap();
        }
        let rel_loop = truth[0].inverse().compose(&truth[7]);
        g.add_edge(0, 7, rel_loop, EdgeKind::Loop, 1.0).unwrap();
        let before = g.vertices().to_vec();
        let (optimized, cost) = g.optimize(20, 1e-12).unwrap();
        assert!(cost <= 1e-12);
        for (a, b) in before.iter().zip(optimized.vertices()) {
            assert!(a.translation_distance_to(b) < 1e-9);
            assert!(a.rotation_angle_to(b) < 1e-9);
        }
    }

    #[test]
    fn two_vertices_snap_to_measurement() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut g = PoseGraph::new();
        g.add_vertex(Pose::identity());
        g.add_vertex(small_pose(&mut rng, 0.3, 0.3));
        let measured = small_pose(&mut rng, 0.4, 0.5);
        g.add_edge(0, 1, measured, EdgeKind::Consecutive, 1.0).unwrap();
        let (optimized, cost) = g.optimize(50, 1e-14).unwrap();
        assert!(cost < 1e-18);
        let v1 = optimized.vertices()[1];
        assert!(v1.translation_distance_to(&measured) < 1e-9);
        assert!(v1.rotation_angle_to(&measured) < 1e-9);
    }

    #[test]
    fn disconnected_graph_is_rejected() {
        let (g, _) = chain(4);
        assert!(matches!(g.optimize(10, 1e-9), Err(PoseGraphError::Disconnected)));
    }

    /// Noisy odometry chain with one exact loop edge: optimization must cut
    /// the endpoint error by at least 10×, seed by seed.
    #[test]
    fn loop_closure_corrects_drift() {
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (_, truth) = chain(20);
            let mut g = PoseGraph::new();
            let mut noisy = vec![Pose::identity()];
            let mut noisy_edges = Vec::new();
            for k in 0..19 {
                let rel = truth[k].inverse().compose(&truth[k + 1]);
                let noise = small_pose(&mut rng, 0.5f64.to_radians(), 0.01);
                let measured = rel.compose(&noise);
                noisy_edges.push(measured);
                let prev = noisy[k];
                noisy.push(prev.compose(&measured));
            }
            for pose in &noisy {
                g.add_vertex(*pose);
            }
            for (k, measured) in noisy_edges.iter().enumerate() {
                g.add_edge(k, k + 1, *measured, EdgeKind::Consecutive, 2.0).unwrap();
            }
            let exact_loop = truth[0].inverse().compose(&truth[19]);
            g.add_edge(0, 19, exact_loop, EdgeKind::Loop, 1.0).unwrap();

            let raw_err = noisy[19].translation_distance_to(&truth[19]);
            let (optimized, final_cost) = g.optimize(50, 1e-10).unwrap();
            let initial_cost = g.cost();
            assert!(final_cost <= initial_cost);
            let fixed_err = optimized.vertices()[19].translation_distance_to(&truth[19]);
            assert!(
                fixed_err <= 0.1 * raw_err,
                "seed {seed}: {fixed_err} vs raw {raw_err}"
            );
        }
    }

    #[test]
    fn gauge_invariance_of_final_cost() {
        let rng = ChaCha8Rng::seed_from_u64(99);
        let (_, truth) = chain(12);
        let build = |transform: &Pose, rng: &mut ChaCha8Rng| {
            let mut g = PoseGraph::new();
            let mut vertices = Vec::new();
            for pose in &truth {
                vertices.push(transform.compose(pose));
            }
            for pose in &vertices {
                g.add_vertex(*pose);
            }
            let mut noise_rng = rng.clone();
            for k in 0..11 {
                let rel = truth[k].inverse().compose(&truth[k + 1]);
                let noise = small_pose(&mut noise_rng, 0.01, 0.01);
                g.add_edge(k, k + 1, rel.compose(&noise), EdgeKind::Consecutive, 2.0)
                    .unwrap();
            }
            g.add_edge(0, 11, truth[0].inverse().compose(&truth[11]), EdgeKind::Loop, 1.0)
                .unwrap();
            g
        };
        let g_id = build(&Pose::identity(), &mut rng.clone());
        let g_moved = build(&small_pose(&mut rng.clone(), 1.0, 2.0), &mut rng.clone());
        let (_, cost_a) = g_id.optimize(50, 1e-12).unwrap();
        let (_, cost_b) = g_moved.optimize(50, 1e-12).unwrap();
        assert!((cost_a - cost_b).abs() < 1e-9, "{cost_a} vs {cost_b}");
    }

    #[test]
    fn huber_with_huge_delta_matches_l2() {
        let rng = ChaCha8Rng::seed_from_u64(5);
        let (_, truth) = chain(10);
        let build = |kernel: Kernel| {
            let mut g = PoseGraph::new();
            let mut noise_rng = rng.clone();
            for pose in &truth {
                g.add_vertex(pose.compose(&small_pose(&mut noise_rng, 0.05, 0.05)));
            }
            for k in 0..9 {
                let rel = truth[k].inverse().compose(&truth[k + 1]);
                g.add_edge(k, k + 1, rel, EdgeKind::Consecutive, 2.0).unwrap();
            }
            g.add_edge_with_kernel(
                0,
                9,
                truth[0].inverse().compose(&truth[9]),
                EdgeKind::Loop,
                1.0,
                kernel,
            )
            .unwrap();
            g
        };
        let (opt_l2, cost_l2) = build(Kernel::L2).optimize(50, 1e-12).unwrap();
        let (opt_huber, cost_huber) = build(Kernel::Huber(1e12)).optimize(50, 1e-12).unwrap();
        assert!((cost_l2 - cost_huber).abs() < 1e-9);
        for (a, b) in opt_l2.vertices().iter().zip(opt_huber.vertices()) {
            assert!(a.translation_distance_to(b) < 1e-9);
        }
    }

    /// Term-by-term cost check against a hand-computed 3-edge instance with
    /// pure-translation residuals.
    #[test]
    fn cost_matches_hand_computed_instance() {
        let mut g = PoseGraph::new();
        g.add_vertex(Pose::identity());
        g.add_vertex(Pose::from_translation(Vector3::new(1.0, 0.0, 0.0)));
        g.add_vertex(Pose::from_translation(Vector3::new(2.0, 0.0, 0.0)));
        // Edge 0-1 measures 0.9 m: residual 0.1, λ=2 → 2·0.01 = 0.02.
        g.add_edge(
            0,
            1,
            Pose::from_translation(Vector3::new(0.9, 0.0, 0.0)),
            EdgeKind::Consecutive,
            2.0,
        )
        .unwrap();
        // Edge 1-2 measures 1.2 m: residual 0.2, λ=2 → 2·0.04 = 0.08.
        g.add_edge(
            1,
            2,
            Pose::from_translation(Vector3::new(1.2, 0.0, 0.0)),
            EdgeKind::Consecutive,
            2.0,
        )
        .unwrap();
        // Loop 0-2 measures 2.5 m: residual 0.5, L2 → 0.25.
        g.add_edge(
            0,
            2,
            Pose::from_translation(Vector3::new(2.5, 0.0, 0.0)),
            EdgeKind::Loop,
            1.0,
        )
        .unwrap();
        let expected = 2.0 * 0.01 + 2.0 * 0.04 + 0.25;
        assert!((g.cost() - expected).abs() < 1e-12);
    }

    #[test]
    fn g2o_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let (mut g, truth) = chain(6);
        for k in 0..5 {
            let rel = truth[k].inverse().compose(&truth[k + 1]);
            g.add_edge(k, k + 1, rel.compose(&small_pose(&mut rng, 0.02, 0.02)), EdgeKind::Consecutive, 2.0)
                .unwrap();
        }
        g.add_edge(0, 5, truth[0].inverse().compose(&truth[5]), EdgeKind::Loop, 1.0)
            .unwrap();
        let text = g.to_g2o();
        let parsed = PoseGraph::from_g2o(&text).unwrap();
        assert_eq!(parsed.vertices().len(), g.vertices().len());
        assert_eq!(parsed.edges().len(), g.edges().len());
        for (a, b) in g.vertices().iter().zip(parsed.vertices()) {
            assert!(a.translation_distance_to(b) < 1e-12);
            assert!(a.rotation_angle_to(b) < 1e-9);
        }
        assert!((g.cost() - parsed.cost()).abs() < 1e-9);
        assert!(PoseGraph::from_g2o("GARBAGE 1 2 3").is_err());
    }
}
