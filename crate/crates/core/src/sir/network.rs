//! Contact networks and stochastic-block-model generation.

use crate::error::{invalid, Error, Result};
use crate::randomness::{Label, Stream, StreamKey};

use super::geography::{Geography, SbmProbabilities};

/// Undirected simple graph whose nodes carry a district label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContactNetwork {
    district: Vec<u32>,
    adjacency: Vec<Vec<u32>>,
    edges: usize,
}

impl ContactNetwork {
    /// Builds a network from an edge list; duplicate edges are merged.
    pub fn from_edges(district: Vec<u32>, edges: &[(usize, usize)]) -> Result<Self> {
        let n = district.len();
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::UnknownNode {
                    node: a.max(b),
                    nodes: n,
                });
            }
            if a == b {
                return Err(invalid("edges", format!("self-loop at node {a}")));
            }
            adjacency[a].push(b as u32);
            adjacency[b].push(a as u32);
        }
        let mut count = 0;
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
            count += list.len();
        }
        Ok(Self {
            district,
            adjacency,
            edges: count / 2,
        })
    }

    /// Star graph: node 0 linked to `leaves` others, all in district 0.
    pub fn star(leaves: usize) -> Self {
        let edges: Vec<(usize, usize)> = (1..=leaves).map(|j| (0, j)).collect();
        Self::from_edges(vec![0; leaves + 1], &edges).expect("valid star")
    }

    pub fn node_count(&self) -> usize {
        self.district.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges
    }

    pub fn district_of(&self, node: usize) -> usize {
        self.district[node] as usize
    }

    pub fn districts(&self) -> &[u32] {
        &self.district
    }

    /// Sorted neighbor list.
    pub fn neighbors(&self, node: usize) -> &[u32] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].binary_search(&(b as u32)).is_ok()
    }

    /// Every undirected edge once, as `(low, high)` in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(a, list)| {
            list.iter()
                .map(|&b| b as usize)
                .filter(move |&b| b > a)
                .map(move |b| (a, b))
        })
    }

    pub fn check_node(&self, node: usize) -> Result<()> {
        if node < self.node_count() {
            Ok(())
        } else {
            Err(Error::UnknownNode {
                node,
                nodes: self.node_count(),
            })
        }
    }

    /// Nodes of each district as contiguous index ranges.
    pub fn district_ranges(&self, districts: usize) -> Vec<std::ops::Range<usize>> {
        let mut ranges = vec![0..0; districts];
        let mut start = 0;
        while start < self.district.len() {
            let d = self.district[start];
            let mut end = start;
            while end < self.district.len() && self.district[end] == d {
                end += 1;
            }
            ranges[d as usize] = start..end;
            start = end;
        }
        ranges
    }
}

/// Gaps between successes of Bernoulli(`p`) trials, by inversion.
fn geometric_skip(p: f64, stream: &mut Stream) -> u64 {
    if p >= 1.0 {
        return 0;
    }
    let skip = (stream.uniform().ln() / (-p).ln_1p()).floor();
    if skip >= u64::MAX as f64 {
        u64::MAX
    } else {
        skip as u64
    }
}

/// Visits the indices in `0..total` selected by independent Bernoulli(`p`)
/// trials.
fn bernoulli_indices(total: u64, p: f64, stream: &mut Stream, mut visit: impl FnMut(u64)) {
    if p <= 0.0 || total == 0 {
        return;
    }
    let mut pos = geometric_skip(p, stream);
    while pos < total {
        visit(pos);
        pos = pos.saturating_add(1).saturating_add(geometric_skip(p, stream));
    }
}

/// Samples a stochastic block model over the geography. Each district pair
/// draws from its own keyed stream.
pub fn generate_network(
    geography: &Geography,
    probs: &SbmProbabilities,
    stream: &mut Stream,
) -> Result<ContactNetwork> {
    generate_network_keyed(geography, probs, &stream.split_key())
}

pub fn generate_network_keyed(
    geography: &Geography,
    probs: &SbmProbabilities,
    key: &StreamKey,
) -> Result<ContactNetwork> {
    probs.validate()?;
    let counts = geography.node_allocation();
    let mut offsets = Vec::with_capacity(counts.len());
    let mut district = Vec::with_capacity(geography.total_nodes());
    for (d, &c) in counts.iter().enumerate() {
        offsets.push(district.len());
        district.extend(std::iter::repeat_n(d as u32, c));
    }
    let mut edges = Vec::new();
    let k = counts.len();
    for a in 0..k {
        for b in a..k {
            let p = probs.pair(geography, a, b);
            if p <= 0.0 {
                continue;
            }
            let mut s = key.child(Label::Block, a as u64).child(Label::Block, b as u64).stream();
            let (oa, ob) = (offsets[a], offsets[b]);
            let (na, nb) = (counts[a] as u64, counts[b] as u64);
            if a == b {
                // row-major upper triangle
                let total = na * na.saturating_sub(1) / 2;
                let (mut row, mut row_start) = (0u64, 0u64);
                bernoulli_indices(total, p, &mut s, |pos| {
                    while pos >= row_start + (na - 1 - row) {
                        row_start += na - 1 - row;
                        row += 1;
                    }
                    let col = row + 1 + (pos - row_start);
                    edges.push((oa + row as usize, oa + col as usize));
                });
            } else {
                bernoulli_indices(na * nb, p, &mut s, |pos| {
                    edges.push((oa + (pos / nb) as usize, ob + (pos % nb) as usize));
                });
            }
        }
    }
    ContactNetwork::from_edges(district, &edges)
}
