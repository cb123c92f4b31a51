//! Concentric-ring triangulation of the closed unit disk.

use std::collections::HashMap;
use std::io::Write;

use crate::error::{Error, Result};

/// Triangulated unit disk. Ring `k` (1 ≤ k ≤ R) carries `6k` nodes at radius `k/R`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub rings: usize,
    pub nodes: Vec<[f64; 2]>,
    pub boundary: Vec<bool>,
    /// Counterclockwise node triples.
    pub triangles: Vec<[usize; 3]>,
    /// Unique edges as sorted node pairs, numbered in order of first appearance.
    pub edges: Vec<[usize; 2]>,
    /// Edge ids of each triangle, local order (1-2, 2-3, 3-1).
    pub triangle_edges: Vec<[usize; 3]>,
    pub boundary_edge: Vec<bool>,
}

fn ring_start(k: usize) -> usize {
    if k == 0 {
        0
    } else {
        1 + 3 * k * (k - 1)
    }
}

/// Builds the ring triangulation with `1 + 3R(R+1)` nodes and `6R²` triangles.
pub fn triangulate_disk(rings: usize) -> Result<Mesh> {
    if rings == 0 {
        return Err(Error::InvalidParameter("rings must be at least 1".into()));
    }
    let mut nodes = vec![[0.0, 0.0]];
    let mut boundary = vec![false];
    for k in 1..=rings {
        let n = 6 * k;
        let rho = k as f64 / rings as f64;
        for j in 0..n {
            let t = std::f64::consts::TAU * j as f64 / n as f64;
            nodes.push([rho * t.cos(), rho * t.sin()]);
            boundary.push(k == rings);
        }
    }

    let mut triangles = Vec::with_capacity(6 * rings * rings);
    for j in 0..6 {
        triangles.push([0, 1 + j, 1 + (j + 1) % 6]);
    }
    for k in 2..=rings {
        let (n1, n2) = (6 * (k - 1), 6 * k);
        let (s1, s2) = (ring_start(k - 1), ring_start(k));
        let (mut i, mut j) = (0, 0);
        while i < n1 || j < n2 {
            let outer = i == n1 || (j < n2 && (j + 1) * n1 <= (i + 1) * n2);
            if outer {
                triangles.push([s1 + i % n1, s2 + j, s2 + (j + 1) % n2]);
                j += 1;
            } else {
                triangles.push([s1 + i, s2 + j % n2, s1 + (i + 1) % n1]);
                i += 1;
            }
        }
    }

    let mut edge_ids: HashMap<[usize; 2], usize> = HashMap::new();
    let mut edges = Vec::new();
    let mut counts = Vec::new();
    let mut triangle_edges = Vec::with_capacity(triangles.len());
    for t in &triangles {
        let mut te = [0; 3];
        for (l, slot) in te.iter_mut().enumerate() {
            let (a, b) = (t[l], t[(l + 1) % 3]);
            let key = [a.min(b), a.max(b)];
            let id = *edge_ids.entry(key).or_insert_with(|| {
                edges.push(key);
                counts.push(0usize);
                edges.len() - 1
            });
            counts[id] += 1;
            *slot = id;
        }
        triangle_edges.push(te);
    }
    let boundary_edge = counts.iter().map(|&c| c == 1).collect();

    Ok(Mesh {
        rings,
        nodes,
        boundary,
        triangles,
        edges,
        triangle_edges,
        boundary_edge,
    })
}

impl Mesh {
    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|i| self.nodes[i]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// `V - E + F`, which is 1 for a triangulated disk.
    pub fn euler_characteristic(&self) -> i64 {
        self.nodes.len() as i64 - self.edges.len() as i64 + self.triangles.len() as i64
    }

    /// Writes the text dump: a header line, one line per node, one per triangle.
    pub fn write_dump<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "nodes {} elements {}", self.nodes.len(), self.triangles.len())?;
        for (i, (p, b)) in self.nodes.iter().zip(&self.boundary).enumerate() {
            writeln!(out, "{} {:.16e} {:.16e} {}", i, p[0], p[1], u8::from(*b))?;
        }
        for (i, t) in self.triangles.iter().enumerate() {
            writeln!(out, "{} {} {} {}", i, t[0], t[1], t[2])?;
        }
        Ok(())
    }
}
