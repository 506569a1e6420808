//! Venue maps: landmark names with schematic 2D positions, the topological
//! graph built over them, and the landmark route the robot follows.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;
use crate::{Error, Result};

/// Route lengths are solved exactly up to this many landmarks.
pub const EXACT_TSP_LIMIT: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub name: String,
    pub map_pos: Vec2,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VenueMap {
    pub landmarks: Vec<Landmark>,
    pub map_units: String,
}

#[derive(Deserialize, Serialize)]
struct VenueMapDoc {
    #[serde(default = "default_units")]
    map_units: String,
    landmarks: Vec<LandmarkDoc>,
}

#[derive(Deserialize, Serialize)]
struct LandmarkDoc {
    name: String,
    x: f64,
    y: f64,
}

fn default_units() -> String {
    "px".to_string()
}

impl VenueMap {
    pub fn new(landmarks: Vec<Landmark>, map_units: impl Into<String>) -> Result<Self> {
        let vm = VenueMap {
            landmarks,
            map_units: map_units.into(),
        };
        vm.validate()?;
        Ok(vm)
    }

    /// Parse a venue-map JSON document. Landmark order is preserved.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: VenueMapDoc =
            serde_json::from_str(text).map_err(|e| Error::parse("venue map", e))?;
        let landmarks = doc
            .landmarks
            .into_iter()
            .map(|l| Landmark {
                name: l.name,
                map_pos: Vec2::new(l.x, l.y),
            })
            .collect();
        VenueMap::new(landmarks, doc.map_units)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        VenueMap::from_json(&text).map_err(|e| match e {
            Error::Parse { source, .. } => Error::parse(path.display().to_string(), source),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        let doc = VenueMapDoc {
            map_units: self.map_units.clone(),
            landmarks: self
                .landmarks
                .iter()
                .map(|l| LandmarkDoc {
                    name: l.name.clone(),
                    x: l.map_pos.x,
                    y: l.map_pos.y,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("venue map serializes")
    }

    fn validate(&self) -> Result<()> {
        if self.landmarks.is_empty() {
            return Err(Error::validation("venue map", "no landmarks"));
        }
        let mut seen = HashSet::new();
        for (i, l) in self.landmarks.iter().enumerate() {
            if l.name.trim().is_empty() {
                return Err(Error::validation(
                    "venue map",
                    format!("landmark {i} has an empty name"),
                ));
            }
            if !l.map_pos.is_finite() {
                return Err(Error::validation(
                    "venue map",
                    format!("landmark {:?} has a non-finite position", l.name),
                ));
            }
            if !seen.insert(l.name.as_str()) {
                return Err(Error::validation(
                    "venue map",
                    format!("duplicate landmark name {:?}", l.name),
                ));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.landmarks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.landmarks.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.landmarks.iter().position(|l| l.name == name)
    }
}

/// Undirected landmark graph with Euclidean map-distance edge weights.
#[derive(Clone, Debug, PartialEq)]
pub struct TopoGraph {
    positions: Vec<Vec2>,
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl TopoGraph {
    pub fn node_count(&self) -> usize {
        self.positions.len()
    }

    /// Edges as `(i, j, weight)` with `i < j`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out: Vec<_> = self
            .adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, nbrs)| {
                nbrs.iter()
                    .filter(move |(j, _)| i < *j)
                    .map(move |&(j, w)| (i, j, w))
            })
            .collect();
        out.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        out
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency
            .get(i)
            .is_some_and(|n| n.iter().any(|&(k, _)| k == j))
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[i].iter().map(|&(j, _)| j)
    }

    fn add_edge(&mut self, i: usize, j: usize) {
        let w = self.positions[i].distance(self.positions[j]);
        self.adjacency[i].push((j, w));
        self.adjacency[j].push((i, w));
    }

    /// Connected component label per node.
    pub fn components(&self) -> Vec<usize> {
        let n = self.node_count();
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        for s in 0..n {
            if label[s] != usize::MAX {
                continue;
            }
            let mut queue = VecDeque::from([s]);
            label[s] = next;
            while let Some(u) = queue.pop_front() {
                for v in self.neighbors(u).collect::<Vec<_>>() {
                    if label[v] == usize::MAX {
                        label[v] = next;
                        queue.push_back(v);
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn is_connected(&self) -> bool {
        self.components().iter().all(|&c| c == 0)
    }

    /// All-pairs shortest-path distances (Floyd-Warshall).
    pub fn shortest_paths(&self) -> Vec<Vec<f64>> {
        let n = self.node_count();
        let mut d = vec![vec![f64::INFINITY; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = 0.0;
            for &(j, w) in &self.adjacency[i] {
                row[j] = row[j].min(w);
            }
        }
        for k in 0..n {
            for i in 0..n {
                let dik = d[i][k];
                if !dik.is_finite() {
                    continue;
                }
                for j in 0..n {
                    let via = dik + d[k][j];
                    if via < d[i][j] {
                        d[i][j] = via;
                    }
                }
            }
        }
        d
    }

    /// Nodes within `h` hops of `center`, including `center` itself.
    pub fn h_hop_neighbors(&self, center: usize, h: usize) -> Result<BTreeSet<usize>> {
        let n = self.node_count();
        if center >= n {
            return Err(Error::InvalidLandmark { index: center, len: n });
        }
        let mut depth = vec![usize::MAX; n];
        depth[center] = 0;
        let mut queue = VecDeque::from([center]);
        let mut out = BTreeSet::from([center]);
        while let Some(u) = queue.pop_front() {
            if depth[u] == h {
                continue;
            }
            for v in self.neighbors(u).collect::<Vec<_>>() {
                if depth[v] == usize::MAX {
                    depth[v] = depth[u] + 1;
                    out.insert(v);
                    queue.push_back(v);
                }
            }
        }
        Ok(out)
    }
}

/// Connect landmarks closer than `gamma_map` (inclusive), then join isolated
/// components through their globally nearest node pair until one remains.
pub fn build_topo_graph(vm: &VenueMap, gamma_map: f64) -> TopoGraph {
    let positions: Vec<Vec2> = vm.landmarks.iter().map(|l| l.map_pos).collect();
    let n = positions.len();
    let mut g = TopoGraph {
        adjacency: vec![Vec::new(); n],
        positions,
    };
    for i in 0..n {
        for j in i + 1..n {
            if g.positions[i].distance(g.positions[j]) <= gamma_map {
                g.add_edge(i, j);
            }
        }
    }
    loop {
        let comp = g.components();
        if comp.iter().all(|&c| c == 0) {
            break;
        }
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..n {
            for j in i + 1..n {
                if comp[i] == comp[j] {
                    continue;
                }
                let d = g.positions[i].distance(g.positions[j]);
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, i, j));
                }
            }
        }
        let (_, i, j) = best.expect("disconnected graph has an inter-component pair");
        g.add_edge(i, j);
    }
    g
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subgoal {
    Landmark(usize),
    Done,
}

/// Open landmark tour and the position of the current subgoal in it.
#[derive(Clone, Debug, PartialEq)]
pub struct LandmarkRoute {
    pub order: Vec<usize>,
    pub cursor: usize,
    pub length: f64,
}

impl LandmarkRoute {
    pub fn current(&self) -> Subgoal {
        match self.order.get(self.cursor) {
            Some(&i) => Subgoal::Landmark(i),
            None => Subgoal::Done,
        }
    }

    pub fn is_exhausted(&self) -> bool {
        self.cursor >= self.order.len()
    }

    /// Consume the route up to and including `recognized` if it is the
    /// current or a later entry, and return the resulting subgoal.
    pub fn next_subgoal(&mut self, recognized: usize) -> Subgoal {
        if let Some(pos) = self.order[self.cursor.min(self.order.len())..]
            .iter()
            .position(|&l| l == recognized)
        {
            self.cursor += pos + 1;
        }
        self.current()
    }
}

/// Total shortest-path length of visiting `order` as an open path.
pub fn route_length(dist: &[Vec<f64>], order: &[usize]) -> f64 {
    order.windows(2).map(|w| dist[w[0]][w[1]]).sum()
}

/// Shortest open path from `start` visiting every landmark once, with edge
/// costs given by graph shortest-path distances.
pub fn solve_tsp_route(g: &TopoGraph, start: usize) -> Result<LandmarkRoute> {
    let n = g.node_count();
    if start >= n {
        return Err(Error::InvalidLandmark { index: start, len: n });
    }
    let dist = g.shortest_paths();
    let order = if n <= EXACT_TSP_LIMIT {
        exact_open_tour(&dist, start)
    } else {
        let mut order = nearest_neighbor_tour(&dist, start);
        two_opt(&dist, &mut order);
        order
    };
    let length = route_length(&dist, &order);
    Ok(LandmarkRoute {
        order,
        cursor: 0,
        length,
    })
}

fn exact_open_tour(dist: &[Vec<f64>], start: usize) -> Vec<usize> {
    struct Search<'a> {
        dist: &'a [Vec<f64>],
        path: Vec<usize>,
        used: Vec<bool>,
        best_len: f64,
        best: Vec<usize>,
    }

    impl Search<'_> {
        fn go(&mut self, len: f64) {
            if len >= self.best_len {
                return;
            }
            if self.path.len() == self.dist.len() {
                self.best_len = len;
                self.best = self.path.clone();
                return;
            }
            let last = *self.path.last().unwrap();
            for v in 0..self.dist.len() {
                if self.used[v] {
                    continue;
                }
                self.used[v] = true;
                self.path.push(v);
                self.go(len + self.dist[last][v]);
                self.path.pop();
                self.used[v] = false;
            }
        }
    }

    let n = dist.len();
    let mut s = Search {
        dist,
        path: vec![start],
        used: vec![false; n],
        best_len: f64::INFINITY,
        best: Vec::new(),
    };
    s.used[start] = true;
    s.go(0.0);
    s.best
}

fn nearest_neighbor_tour(dist: &[Vec<f64>], start: usize) -> Vec<usize> {
    let n = dist.len();
    let mut used = vec![false; n];
    let mut order = vec![start];
    used[start] = true;
    while order.len() < n {
        let last = *order.last().unwrap();
        let next = (0..n)
            .filter(|&v| !used[v])
            .min_by(|&a, &b| dist[last][a].total_cmp(&dist[last][b]))
            .unwrap();
        used[next] = true;
        order.push(next);
    }
    order
}

/// 2-opt for an open path with a fixed first node.
fn two_opt(dist: &[Vec<f64>], order: &mut [usize]) {
    let n = order.len();
    let mut improved = true;
    while improved {
        improved = false;
        for i in 1..n.saturating_sub(1) {
            for j in i + 1..n {
                // Reverse order[i..=j]; edges (i-1,i) and (j,j+1) change.
                let a = order[i - 1];
                let b = order[i];
                let c = order[j];
                let before = dist[a][b] + order.get(j + 1).map_or(0.0, |&d| dist[c][d]);
                let after = dist[a][c] + order.get(j + 1).map_or(0.0, |&d| dist[b][d]);
                if after + 1e-12 < before {
                    order[i..=j].reverse();
                    improved = true;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vm(points: &[(f64, f64)]) -> VenueMap {
        VenueMap::new(
            points
                .iter()
                .enumerate()
                .map(|(i, &(x, y))| Landmark {
                    name: format!("L{i}"),
                    map_pos: Vec2::new(x, y),
                })
                .collect(),
            "px",
        )
        .unwrap()
    }

    fn chain(n: usize) -> TopoGraph {
        let pts: Vec<_> = (0..n).map(|i| (i as f64 * 100.0, 0.0)).collect();
        build_topo_graph(&vm(&pts), 150.0)
    }

    #[test]
    fn loads_four_landmarks_in_order() {
        let doc = r#"{"map_units":"px","landmarks":[
            {"name":"Briketenia","x":0,"y":0},{"name":"喜茶","x":10,"y":0},
            {"name":"Muji","x":0,"y":10},{"name":"Uniqlo","x":10,"y":10}]}"#;
        let vm = VenueMap::from_json(doc).unwrap();
        assert_eq!(vm.len(), 4);
        assert_eq!(vm.landmarks[1].name, "喜茶");
        assert_eq!(vm.index_of("Uniqlo"), Some(3));
    }

    #[test]
    fn duplicate_name_is_rejected() {
        let doc = r#"{"landmarks":[{"name":"Briketenia","x":0,"y":0},
            {"name":"Briketenia","x":5,"y":0}]}"#;
        let err = VenueMap::from_json(doc).unwrap_err();
        assert!(matches!(err, Error::Validation { .. }), "{err}");
    }

    #[test]
    fn malformed_document_reports_position() {
        let err = VenueMap::from_json("{\"landmarks\": [ {\"name\": 3 } ]}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 1"), "{msg}");
    }

    #[test]
    fn empty_venue_map_is_rejected() {
        assert!(VenueMap::from_json(r#"{"landmarks":[]}"#).is_err());
    }

    #[test]
    fn threshold_edge_within_gamma() {
        let g = build_topo_graph(&vm(&[(0.0, 0.0), (100.0, 0.0)]), 150.0);
        assert_eq!(g.edges(), vec![(0, 1, 100.0)]);
    }

    #[test]
    fn merging_connects_distant_pair() {
        let g = build_topo_graph(&vm(&[(0.0, 0.0), (200.0, 0.0)]), 150.0);
        assert_eq!(g.edges().len(), 1);
        assert!(g.is_connected());
    }

    #[test]
    fn merging_uses_nearest_inter_component_pair() {
        let g = build_topo_graph(&vm(&[(0.0, 0.0), (100.0, 0.0), (300.0, 0.0)]), 150.0);
        assert!(g.has_edge(0, 1));
        assert!(g.has_edge(1, 2));
        assert!(!g.has_edge(0, 2));
    }

    #[test]
    fn threshold_is_inclusive() {
        let g = build_topo_graph(&vm(&[(0.0, 0.0), (150.0, 0.0), (400.0, 0.0)]), 150.0);
        assert!(g.has_edge(0, 1));
    }

    #[test]
    fn tsp_on_a_line() {
        let g = build_topo_graph(&vm(&[(0.0, 0.0), (1.0, 0.0), (3.0, 0.0)]), 150.0);
        let r = solve_tsp_route(&g, 0).unwrap();
        assert_eq!(r.order, vec![0, 1, 2]);
        assert!((r.length - 3.0).abs() < 1e-12);
    }

    #[test]
    fn tsp_single_landmark() {
        let g = build_topo_graph(&vm(&[(5.0, 5.0)]), 150.0);
        let r = solve_tsp_route(&g, 0).unwrap();
        assert_eq!(r.order, vec![0]);
        assert_eq!(r.length, 0.0);
    }

    #[test]
    fn tsp_square_from_corner() {
        let g = build_topo_graph(
            &vm(&[(0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (0.0, 10.0)]),
            150.0,
        );
        let r = solve_tsp_route(&g, 0).unwrap();
        // Three sides of the square.
        assert!((r.length - 30.0).abs() < 1e-9);
    }

    #[test]
    fn two_opt_beyond_exact_limit_visits_all() {
        let pts: Vec<_> = (0..14)
            .map(|i| ((i * 37 % 14) as f64 * 10.0, ((i * 5) % 7) as f64 * 10.0))
            .collect();
        let g = build_topo_graph(&vm(&pts), 150.0);
        let r = solve_tsp_route(&g, 3).unwrap();
        assert_eq!(r.order[0], 3);
        let mut sorted = r.order.clone();
        sorted.sort();
        assert_eq!(sorted, (0..14).collect::<Vec<_>>());
    }

    #[test]
    fn subgoal_advance_skip_and_done() {
        let mut r = LandmarkRoute {
            order: vec![0, 1, 2],
            cursor: 0,
            length: 0.0,
        };
        assert_eq!(r.clone().next_subgoal(0), Subgoal::Landmark(1));
        assert_eq!(r.next_subgoal(1), Subgoal::Landmark(2));
        // Already consumed entry leaves the route unchanged.
        assert_eq!(r.next_subgoal(0), Subgoal::Landmark(2));
        assert_eq!(r.next_subgoal(2), Subgoal::Done);

        let mut single = LandmarkRoute {
            order: vec![0],
            cursor: 0,
            length: 0.0,
        };
        assert_eq!(single.next_subgoal(0), Subgoal::Done);
    }

    #[test]
    fn h_hop_examples() {
        let g3 = chain(3);
        assert_eq!(g3.h_hop_neighbors(1, 1).unwrap(), BTreeSet::from([0, 1, 2]));
        assert_eq!(g3.h_hop_neighbors(2, 0).unwrap(), BTreeSet::from([2]));
        let g4 = chain(4);
        assert_eq!(g4.h_hop_neighbors(0, 2).unwrap(), BTreeSet::from([0, 1, 2]));
        assert!(g4.h_hop_neighbors(9, 1).is_err());
    }
}
