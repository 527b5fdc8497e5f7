//! Hop-wise feature precomputation: `X⁽⁰⁾ = X`, `X⁽ᵏ⁾ = Â X⁽ᵏ⁻¹⁾`, stacked
//! per node into a `(K+1) × d₀` block.
//!
//! Binary file layout (all integers little-endian):
//!
//! ```text
//! offset  size  field
//!      0     8  magic "HOGAHOPT"
//!      8     4  version (u32) = 1
//!     12     8  n, node count (u64)
//!     20     4  K, hop count (u32)
//!     24     4  d0, feature width (u32)
//!     28    32  SHA-256 graph checksum
//!     60     …  n·(K+1)·d0 f64 values, [node][hop][dim]
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::graph::{build_node_features, normalize_adjacency, AdjacencyMode, CircuitGraph, NodeFeatures, NormalizedAdjacency};
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"HOGAHOPT";
pub const VERSION: u32 = 1;
pub const HEADER_BYTES: usize = 60;

#[derive(Clone, Debug, PartialEq)]
pub struct HopTensor {
    num_nodes: usize,
    hops: usize,
    dim: usize,
    graph_checksum: [u8; 32],
    data: Vec<f64>,
}

impl HopTensor {
    pub fn new(num_nodes: usize, hops: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != num_nodes * (hops + 1) * dim {
            return Err(Error::shape(format!(
                "hop tensor {num_nodes}×{}×{dim} needs {} values, got {}",
                hops + 1,
                num_nodes * (hops + 1) * dim,
                data.len()
            )));
        }
        Ok(HopTensor { num_nodes, hops, dim, graph_checksum: [0; 32], data })
    }

    pub fn with_graph_checksum(mut self, checksum: [u8; 32]) -> Self {
        self.graph_checksum = checksum;
        self
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// `K`; each node has `K + 1` rows.
    pub fn hops(&self) -> usize {
        self.hops
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn graph_checksum(&self) -> &[u8; 32] {
        &self.graph_checksum
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    fn block_len(&self) -> usize {
        (self.hops + 1) * self.dim
    }

    /// The `(K+1) × d₀` block of `node`.
    pub fn node(&self, node: usize) -> &[f64] {
        let b = self.block_len();
        &self.data[node * b..(node + 1) * b]
    }

    pub fn get(&self, node: usize, hop: usize, dim: usize) -> f64 {
        self.data[node * self.block_len() + hop * self.dim + dim]
    }

    /// Row gather. The slice keeps this tensor's graph checksum.
    pub fn shard(&self, node_ids: &[usize]) -> Result<HopTensor> {
        let b = self.block_len();
        let mut data = Vec::with_capacity(node_ids.len() * b);
        for &i in node_ids {
            if i >= self.num_nodes {
                return Err(Error::InvalidArgument(format!("node {i} outside hop tensor of {} nodes", self.num_nodes)));
            }
            data.extend_from_slice(self.node(i));
        }
        Ok(HopTensor { num_nodes: node_ids.len(), hops: self.hops, dim: self.dim, graph_checksum: self.graph_checksum, data })
    }

    /// Stacks tensors with matching `K` and `d₀` along the node axis.
    pub fn concat(parts: &[HopTensor]) -> Result<HopTensor> {
        let first = parts.first().ok_or_else(|| Error::InvalidArgument("nothing to concatenate".into()))?;
        let mut data = Vec::new();
        let mut n = 0;
        for p in parts {
            if p.hops != first.hops || p.dim != first.dim {
                return Err(Error::shape("hop tensors differ in K or d0"));
            }
            data.extend_from_slice(&p.data);
            n += p.num_nodes;
        }
        Ok(HopTensor { num_nodes: n, hops: first.hops, dim: first.dim, graph_checksum: first.graph_checksum, data })
    }

    pub fn file_size(&self) -> usize {
        HEADER_BYTES + 8 * self.data.len()
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.num_nodes as u64).to_le_bytes())?;
        w.write_all(&(self.hops as u32).to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&self.graph_checksum)?;
        let mut buf = Vec::with_capacity(8 * self.data.len());
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    /// Reads a tensor; if `expected_checksum` is given it must match the
    /// stored graph checksum.
    pub fn read_from<R: Read>(mut r: R, expected_checksum: Option<&[u8; 32]>) -> Result<HopTensor> {
        let mut header = [0u8; HEADER_BYTES];
        r.read_exact(&mut header).map_err(|_| Error::Format("hop tensor file truncated in header".into()))?;
        if &header[0..8] != MAGIC {
            return Err(Error::Format("not a hop tensor file (bad magic)".into()));
        }
        let version = u32::from_le_bytes(header[8..12].try_into().unwrap());
        if version != VERSION {
            return Err(Error::Format(format!("unsupported hop tensor version {version}")));
        }
        let n = u64::from_le_bytes(header[12..20].try_into().unwrap()) as usize;
        let hops = u32::from_le_bytes(header[20..24].try_into().unwrap()) as usize;
        let dim = u32::from_le_bytes(header[24..28].try_into().unwrap()) as usize;
        let mut checksum = [0u8; 32];
        checksum.copy_from_slice(&header[28..60]);
        if let Some(expected) = expected_checksum {
            if expected != &checksum {
                return Err(Error::Format("graph checksum mismatch: hop tensor was built from a different graph".into()));
            }
        }
        let count = n
            .checked_mul(hops + 1)
            .and_then(|v| v.checked_mul(dim))
            .ok_or_else(|| Error::Format("hop tensor header overflows".into()))?;
        let mut body = Vec::new();
        r.read_to_end(&mut body)?;
        if body.len() != 8 * count {
            return Err(Error::Format(format!("hop tensor body has {} bytes, header implies {}", body.len(), 8 * count)));
        }
        let data = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(HopTensor { num_nodes: n, hops, dim, graph_checksum: checksum, data })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::with_capacity(self.file_size());
        self.write_to(&mut buf)?;
        fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>, expected_checksum: Option<&[u8; 32]>) -> Result<HopTensor> {
        let bytes = fs::read(path)?;
        HopTensor::read_from(bytes.as_slice(), expected_checksum)
    }
}

/// Stacks `X, ÂX, …, ÂᴷX`. The input features are not modified.
pub fn generate_hop_features(adj: &NormalizedAdjacency, x: &NodeFeatures, hops: usize) -> Result<HopTensor> {
    if hops == 0 {
        return Err(Error::InvalidArgument("hop count K must be at least 1".into()));
    }
    let n = x.num_nodes();
    if adj.num_nodes() != n {
        return Err(Error::shape(format!("adjacency has {} nodes, features {n}", adj.num_nodes())));
    }
    let d = x.dim();
    let mut levels = Vec::with_capacity(hops + 1);
    levels.push(x.data().to_vec());
    for k in 1..=hops {
        let next = adj.csr().spmm(&levels[k - 1], d);
        levels.push(next);
    }
    let mut data = Vec::with_capacity(n * (hops + 1) * d);
    for i in 0..n {
        for level in &levels {
            data.extend_from_slice(&level[i * d..(i + 1) * d]);
        }
    }
    HopTensor::new(n, hops, d, data)
}

/// Default featurization of a graph: 7-column node features, normalized
/// adjacency in `mode`, `K` hops, tagged with the graph checksum.
pub fn featurize(g: &CircuitGraph, mode: AdjacencyMode, hops: usize) -> Result<HopTensor> {
    let adj = normalize_adjacency(g, mode);
    let x = build_node_features(g);
    Ok(generate_hop_features(&adj, &x, hops)?.with_graph_checksum(g.checksum()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::parse_edge_list;

    fn one_dim(vals: &[f64]) -> NodeFeatures {
        NodeFeatures::new(vals.to_vec(), vals.len(), 1, vec!["x".into()])
    }

    #[test]
    fn path_swap() {
        let g = parse_edge_list("0 1").unwrap();
        let adj = normalize_adjacency(&g, AdjacencyMode::SymmetricUndirected);
        let t = generate_hop_features(&adj, &one_dim(&[1.0, 0.0]), 1).unwrap();
        assert_eq!(t.node(0), &[1.0, 0.0]);
        assert_eq!(t.node(1), &[0.0, 1.0]);
    }

    #[test]
    fn isolated_node_has_zero_hops() {
        // Node 2 is isolated: edge list 0-1 plus 3-4 leaves id 2 unused.
        let g = parse_edge_list("0 1\n3 4").unwrap();
        let adj = normalize_adjacency(&g, AdjacencyMode::SymmetricUndirected);
        let t = generate_hop_features(&adj, &one_dim(&[1.0, 2.0, 5.0, 3.0, 4.0]), 3).unwrap();
        assert_eq!(t.node(2), &[5.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn errors() {
        let g = parse_edge_list("0 1").unwrap();
        let adj = normalize_adjacency(&g, AdjacencyMode::SymmetricUndirected);
        assert!(generate_hop_features(&adj, &one_dim(&[1.0, 0.0]), 0).is_err());
        assert!(generate_hop_features(&adj, &one_dim(&[1.0, 0.0, 3.0]), 1).is_err());
        let t = generate_hop_features(&adj, &one_dim(&[1.0, 0.0]), 1).unwrap();
        assert!(t.shard(&[2]).is_err());
    }

    #[test]
    fn shard_examples() {
        let t = HopTensor::new(5, 2, 2, (0..30).map(|v| v as f64).collect()).unwrap();
        assert_eq!(t.shard(&[0, 1, 2, 3, 4]).unwrap(), t);
        let s = t.shard(&[3]).unwrap();
        assert_eq!(s.num_nodes(), 1);
        assert_eq!(s.data(), t.node(3));
        let parts = [t.shard(&[0, 1]).unwrap(), t.shard(&[2]).unwrap(), t.shard(&[3, 4]).unwrap()];
        assert_eq!(HopTensor::concat(&parts).unwrap(), t);
    }

    #[test]
    fn file_round_trip_and_checks() {
        let t = HopTensor::new(3, 1, 2, vec![0.1, -2.5, 3.0, 1e-300, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0, 13.0, f64::MIN_POSITIVE])
            .unwrap()
            .with_graph_checksum([7; 32]);
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), t.file_size());
        assert_eq!(buf.len(), HEADER_BYTES + 8 * 3 * 2 * 2);
        let back = HopTensor::read_from(buf.as_slice(), Some(&[7; 32])).unwrap();
        assert_eq!(back, t);
        assert!(HopTensor::read_from(buf.as_slice(), Some(&[8; 32])).is_err());
        assert!(HopTensor::read_from(&buf[..buf.len() - 3], None).is_err());
        assert!(HopTensor::read_from(&buf[..20], None).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(HopTensor::read_from(bad.as_slice(), None).is_err());
    }
}
