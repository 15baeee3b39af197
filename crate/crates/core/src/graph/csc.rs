use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boolean adjacency in compressed-sparse-column layout.
///
/// Columns are target (destination) vertices and rows are sources, so the
/// slice for column `v` is the in-neighbor list of `v`. Row indices inside a
/// column are strictly ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Csc {
    n_src: usize,
    n_dst: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<u32>,
}

impl Csc {
    pub fn empty(n_src: usize, n_dst: usize) -> Self {
        Self {
            n_src,
            n_dst,
            col_ptr: vec![0; n_dst + 1],
            row_idx: Vec::new(),
        }
    }

    /// Builds from `(src, dst)` pairs. Duplicates collapse; order is irrelevant.
    pub fn from_edges(n_src: usize, n_dst: usize, edges: &[(u32, u32)]) -> Result<Self> {
        for &(u, v) in edges {
            if u as usize >= n_src {
                return Err(Error::IndexOutOfRange {
                    what: "edge source".into(),
                    index: u as usize,
                    bound: n_src,
                });
            }
            if v as usize >= n_dst {
                return Err(Error::IndexOutOfRange {
                    what: "edge target".into(),
                    index: v as usize,
                    bound: n_dst,
                });
            }
        }
        let mut sorted: Vec<(u32, u32)> = edges.iter().map(|&(u, v)| (v, u)).collect();
        sorted.sort_unstable();
        sorted.dedup();
        let mut col_ptr = vec![0usize; n_dst + 1];
        for &(v, _) in &sorted {
            col_ptr[v as usize + 1] += 1;
        }
        for i in 0..n_dst {
            col_ptr[i + 1] += col_ptr[i];
        }
        let row_idx = sorted.into_iter().map(|(_, u)| u).collect();
        Ok(Self {
            n_src,
            n_dst,
            col_ptr,
            row_idx,
        })
    }

    /// Builds from raw CSC arrays, validating monotone pointers, index range
    /// and strictly ascending rows within each column.
    pub fn from_parts(
        n_src: usize,
        n_dst: usize,
        col_ptr: Vec<usize>,
        row_idx: Vec<u32>,
    ) -> Result<Self> {
        if col_ptr.len() != n_dst + 1 || col_ptr[0] != 0 || col_ptr[n_dst] != row_idx.len() {
            return Err(Error::shape("Csc::from_parts", "bad column pointer bounds"));
        }
        for v in 0..n_dst {
            if col_ptr[v] > col_ptr[v + 1] {
                return Err(Error::shape(
                    "Csc::from_parts",
                    format!("column pointers decrease at {v}"),
                ));
            }
            let col = &row_idx[col_ptr[v]..col_ptr[v + 1]];
            if col.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::shape(
                    "Csc::from_parts",
                    format!("column {v} rows not strictly ascending"),
                ));
            }
            if let Some(&u) = col.last() {
                if u as usize >= n_src {
                    return Err(Error::IndexOutOfRange {
                        what: "edge source".into(),
                        index: u as usize,
                        bound: n_src,
                    });
                }
            }
        }
        Ok(Self {
            n_src,
            n_dst,
            col_ptr,
            row_idx,
        })
    }

    #[inline]
    pub fn n_src(&self) -> usize {
        self.n_src
    }

    #[inline]
    pub fn n_dst(&self) -> usize {
        self.n_dst
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[u32] {
        &self.row_idx
    }

    #[inline]
    pub fn in_neighbors(&self, v: usize) -> &[u32] {
        &self.row_idx[self.col_ptr[v]..self.col_ptr[v + 1]]
    }

    #[inline]
    pub fn in_degree(&self, v: usize) -> usize {
        self.col_ptr[v + 1] - self.col_ptr[v]
    }

    /// Edges as `(src, dst)` in column-major order.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.n_dst).flat_map(move |v| {
            self.in_neighbors(v)
                .iter()
                .map(move |&u| (u, v as u32))
        })
    }

    /// Targets with at least one in-edge, ascending.
    pub fn targets(&self) -> Vec<u32> {
        (0..self.n_dst)
            .filter(|&v| self.in_degree(v) > 0)
            .map(|v| v as u32)
            .collect()
    }

    pub fn transpose(&self) -> Csc {
        let mut col_ptr = vec![0usize; self.n_src + 1];
        for &u in &self.row_idx {
            col_ptr[u as usize + 1] += 1;
        }
        for i in 0..self.n_src {
            col_ptr[i + 1] += col_ptr[i];
        }
        let mut next = col_ptr.clone();
        let mut row_idx = vec![0u32; self.nnz()];
        // Visiting columns in ascending order keeps each output column sorted.
        for (u, v) in self.edges() {
            let slot = &mut next[u as usize];
            row_idx[*slot] = v;
            *slot += 1;
        }
        Csc {
            n_src: self.n_dst,
            n_dst: self.n_src,
            col_ptr,
            row_idx,
        }
    }

    /// Boolean product: edge `(x, z)` exists iff some `y` has `(x, y)` in
    /// `self` and `(y, z)` in `next`.
    pub fn compose(&self, next: &Csc) -> Result<Csc> {
        if self.n_dst != next.n_src {
            return Err(Error::shape(
                "Csc::compose",
                format!("{} targets vs {} sources", self.n_dst, next.n_src),
            ));
        }
        let mut mark = vec![false; self.n_src];
        let mut touched: Vec<u32> = Vec::new();
        let mut col_ptr = Vec::with_capacity(next.n_dst + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for z in 0..next.n_dst {
            for &y in next.in_neighbors(z) {
                for &x in self.in_neighbors(y as usize) {
                    if !mark[x as usize] {
                        mark[x as usize] = true;
                        touched.push(x);
                    }
                }
            }
            touched.sort_unstable();
            for &x in &touched {
                mark[x as usize] = false;
            }
            row_idx.extend_from_slice(&touched);
            touched.clear();
            col_ptr.push(row_idx.len());
        }
        Ok(Csc {
            n_src: self.n_src,
            n_dst: next.n_dst,
            col_ptr,
            row_idx,
        })
    }
}
