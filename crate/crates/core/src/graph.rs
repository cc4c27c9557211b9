//! Sparse undirected graphs and the linear operators built on them.
//!
//! Every operator works on the self-looped adjacency `Ã = A + I` with the
//! symmetric normalization `Â = D̃^{-1/2} Ã D̃^{-1/2}`:
//!
//! * propagation `P = ½(I + Â)`, a lazy walk with spectrum in `[0, 1]`;
//! * Laplacian `L = I − Â = 2(I − P)`, spectrum in `[0, 2)`;
//! * augmented propagation `Bᵗ = Pᵗ − φφᵀ`, where `φφᵀ` is the converged
//!   projector of `P`.
//!
//! None of them materializes an `n × n` matrix. All applications are
//! sequential and walk rows in CSR order, so repeated calls on the same
//! input are bitwise identical.

use std::collections::VecDeque;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Largest graph [`dense_oracle`] will densify.
pub const DENSE_ORACLE_CAP: usize = 64;

/// Immutable undirected graph stored as CSR over `Ã = A + I`.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    m: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    /// `1 / sqrt((d_i + 1)(d_j + 1))` for each stored entry.
    norm: Vec<f64>,
    degrees: Vec<usize>,
}

impl Graph {
    /// Builds a graph from an edge list. Duplicate pairs, reversed
    /// duplicates and explicit self-loops are collapsed; every node gets
    /// exactly one self-loop entry.
    pub fn from_edges(edges: &[(usize, usize)], n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::NodeOutOfRange { u, v, n });
            }
            if u != v {
                adj[u].push(v);
                adj[v].push(u);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        let degrees: Vec<usize> = adj.iter().map(Vec::len).collect();
        let m = degrees.iter().sum::<usize>() / 2;

        let nnz = 2 * m + n;
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(nnz);
        let mut norm = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for (i, list) in adj.iter().enumerate() {
            let di = (degrees[i] + 1) as f64;
            // keep columns sorted with the self-loop in place
            let pos = list.partition_point(|&j| j < i);
            for &j in list[..pos]
                .iter()
                .chain(std::iter::once(&i))
                .chain(&list[pos..])
            {
                col_idx.push(j);
                norm.push(1.0 / (di * (degrees[j] + 1) as f64).sqrt());
            }
            row_ptr.push(col_idx.len());
        }

        Ok(Self {
            n,
            m,
            row_ptr,
            col_idx,
            norm,
            degrees,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of undirected edges, self-loops excluded.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Raw degrees, self-loops excluded.
    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    /// Columns of row `i` in `Ã`, including `i` itself.
    pub fn row(&self, i: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    /// Neighbors of `i`, excluding the self-loop.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(i).iter().copied().filter(move |&j| j != i)
    }

    /// Undirected edges `(u, v)` with `u < v`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |u| {
            self.row(u)
                .iter()
                .copied()
                .filter(move |&v| v > u)
                .map(move |v| (u, v))
        })
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.n && v < self.n && self.row(u).binary_search(&v).is_ok()
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for v in self.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == self.n
    }

    /// Returns a copy of the graph with node `i` renamed to `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::shape("permutation", self.n, perm.len()));
        }
        let edges: Vec<_> = self.edges().map(|(u, v)| (perm[u], perm[v])).collect();
        Self::from_edges(&edges, self.n)
    }

    fn check_rows(&self, rows: usize, context: &'static str) -> Result<()> {
        if rows != self.n {
            return Err(Error::shape(
                context,
                format!("{} rows", self.n),
                format!("{rows} rows"),
            ));
        }
        Ok(())
    }

    /// `Â·M` with `Â = D̃^{-1/2} Ã D̃^{-1/2}`.
    pub fn apply_normalized_adjacency(&self, m: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_rows(m.nrows(), "normalized adjacency")?;
        let cols = m.ncols();
        let src = m.as_standard_layout();
        let src = src.as_slice().expect("standard layout");
        let mut out = Array2::<f64>::zeros((self.n, cols));
        let dst = out.as_slice_mut().expect("fresh array");
        for i in 0..self.n {
            let row_out = &mut dst[i * cols..(i + 1) * cols];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let w = self.norm[k];
                let j = self.col_idx[k];
                let row_in = &src[j * cols..(j + 1) * cols];
                for (o, &x) in row_out.iter_mut().zip(row_in) {
                    *o += w * x;
                }
            }
        }
        Ok(out)
    }

    /// `P·M` with `P = ½(I + Â)`.
    pub fn apply_propagation(&self, m: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut out = self.apply_normalized_adjacency(m)?;
        out.zip_mut_with(&m, |o, &x| *o = 0.5 * (x + *o));
        Ok(out)
    }

    /// `L·M`, evaluated as `2(M − P·M)`.
    pub fn apply_laplacian(&self, m: ArrayView2<f64>) -> Result<Array2<f64>> {
        let pm = self.apply_propagation(m)?;
        let mut out = pm;
        out.zip_mut_with(&m, |o, &x| *o = 2.0 * (x - *o));
        Ok(out)
    }

    /// `L·x` for a single signal.
    pub fn apply_laplacian_vec(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        let col = x.insert_axis(Axis(1));
        Ok(self.apply_laplacian(col)?.remove_axis(Axis(1)))
    }
}

/// Rank-one factor `φ` of the converged propagation `P^∞ = φφᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergedProjector {
    phi: Array1<f64>,
    eps: f64,
}

impl ConvergedProjector {
    /// `φ_i = sqrt(d_i + 1) / sqrt(2m + n)`, with entries `≤ eps` zeroed.
    ///
    /// The global `2m + n` is used even on disconnected graphs, in which
    /// case `φφᵀ` is not the limit of `Pᵗ`.
    pub fn new(g: &Graph, eps: f64) -> Self {
        let total = (2 * g.m() + g.n()) as f64;
        let scale = total.sqrt();
        let phi = g
            .degrees()
            .iter()
            .map(|&d| {
                let v = ((d + 1) as f64).sqrt() / scale;
                if v <= eps {
                    0.0
                } else {
                    v
                }
            })
            .collect();
        Self { phi, eps }
    }

    pub fn phi(&self) -> ArrayView1<'_, f64> {
        self.phi.view()
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// `φ(φᵀM)`.
    pub fn apply(&self, m: ArrayView2<f64>) -> Result<Array2<f64>> {
        if m.nrows() != self.phi.len() {
            return Err(Error::shape(
                "converged projector",
                self.phi.len(),
                m.nrows(),
            ));
        }
        let coeff = self.phi.dot(&m);
        Ok(outer(&self.phi, &coeff))
    }
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    let mut out = Array2::zeros((a.len(), b.len()));
    for (mut row, &ai) in out.rows_mut().into_iter().zip(a) {
        row.zip_mut_with(b, |o, &bj| *o = ai * bj);
    }
    out
}

/// `(Pᵗ − φφᵀ)·M`. For `t = 0` this is `M − φ(φᵀM)`.
pub fn apply_augmented(
    g: &Graph,
    proj: &ConvergedProjector,
    m: ArrayView2<f64>,
    t: usize,
) -> Result<Array2<f64>> {
    let correction = proj.apply(m)?;
    let mut cur = m.to_owned();
    for _ in 0..t {
        cur = g.apply_propagation(cur.view())?;
    }
    cur -= &correction;
    Ok(cur)
}

/// Dense `Pᵗ − P^∞` (with `P^∞` from the unthresholded closed form),
/// built by explicit matrix products. Test oracle only.
pub fn dense_oracle(g: &Graph, t: usize) -> Result<Array2<f64>> {
    dense_oracle_with_cap(g, t, DENSE_ORACLE_CAP)
}

pub fn dense_oracle_with_cap(g: &Graph, t: usize, cap: usize) -> Result<Array2<f64>> {
    let n = g.n();
    if n > cap {
        return Err(Error::DenseCap { n, cap });
    }
    let p = dense_propagation(g);
    let mut pt = Array2::<f64>::eye(n);
    for _ in 0..t {
        pt = pt.dot(&p);
    }
    let total = (2 * g.m() + n) as f64;
    let d = g.degrees();
    for i in 0..n {
        for j in 0..n {
            pt[[i, j]] -= ((d[i] + 1) as f64).sqrt() * ((d[j] + 1) as f64).sqrt() / total;
        }
    }
    Ok(pt)
}

/// Dense `Ã` as 0/1 entries.
pub fn dense_adjacency(g: &Graph) -> Array2<f64> {
    let n = g.n();
    let mut a = Array2::zeros((n, n));
    for i in 0..n {
        for &j in g.row(i) {
            a[[i, j]] = 1.0;
        }
    }
    a
}

/// Dense `Â = D̃^{-1/2} Ã D̃^{-1/2}` from the degree vector.
pub fn dense_normalized_adjacency(g: &Graph) -> Array2<f64> {
    let mut a = dense_adjacency(g);
    let inv_sqrt: Vec<f64> = g
        .degrees()
        .iter()
        .map(|&d| 1.0 / ((d + 1) as f64).sqrt())
        .collect();
    for ((i, j), v) in a.indexed_iter_mut() {
        *v *= inv_sqrt[i] * inv_sqrt[j];
    }
    a
}

pub fn dense_propagation(g: &Graph) -> Array2<f64> {
    let a = dense_normalized_adjacency(g);
    (Array2::eye(g.n()) + a) * 0.5
}

pub fn dense_laplacian(g: &Graph) -> Array2<f64> {
    Array2::eye(g.n()) - dense_normalized_adjacency(g)
}

#[cfg(test)]
mod tests {
    use ndarray::array;

    use super::*;
    use crate::test_util::assert_close;

    fn two_node() -> Graph {
        Graph::from_edges(&[(0, 1)], 2).unwrap()
    }

    #[test]
    fn build_single_edge() {
        let g = two_node();
        assert_eq!((g.n(), g.m()), (2, 1));
        assert_eq!(g.degrees(), &[1, 1]);
    }

    #[test]
    fn build_collapses_duplicates_and_self_loops() {
        let g = Graph::from_edges(&[(0, 1), (1, 0), (0, 0)], 2).unwrap();
        assert_eq!(g, two_node());
        assert_eq!(g.row(0), &[0, 1]);
    }

    #[test]
    fn build_path() {
        let g = Graph::from_edges(&[(0, 1), (1, 2)], 3).unwrap();
        assert_eq!(g.m(), 2);
        assert_eq!(g.degrees(), &[1, 2, 1]);
        assert_eq!(g.row(1), &[0, 1, 2]);
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn build_errors() {
        assert!(matches!(Graph::from_edges(&[], 0), Err(Error::EmptyGraph)));
        let err = Graph::from_edges(&[(0, 1), (2, 5)], 3).unwrap_err();
        assert!(matches!(err, Error::NodeOutOfRange { u: 2, v: 5, n: 3 }));
        assert!(err.to_string().contains("(2, 5)"));
    }

    #[test]
    fn propagation_two_node() {
        let g = two_node();
        let out = g.apply_propagation(array![[1.0], [0.0]].view()).unwrap();
        assert_close(&out, &array![[0.75], [0.25]], 1e-15);
    }

    #[test]
    fn propagation_zero_and_single_node() {
        let g = Graph::from_edges(&[(0, 1), (1, 2)], 3).unwrap();
        let z = Array2::<f64>::zeros((3, 4));
        assert_eq!(g.apply_propagation(z.view()).unwrap(), z);
        let single = Graph::from_edges(&[], 1).unwrap();
        assert_close(
            &single.apply_propagation(array![[3.0]].view()).unwrap(),
            &array![[3.0]],
            0.0,
        );
    }

    #[test]
    fn row_mismatch_is_an_error() {
        let g = two_node();
        let m = Array2::<f64>::zeros((3, 1));
        assert!(matches!(
            g.apply_propagation(m.view()),
            Err(Error::ShapeMismatch { .. })
        ));
        assert!(g.apply_laplacian(m.view()).is_err());
        let proj = ConvergedProjector::new(&g, 0.0);
        assert!(apply_augmented(&g, &proj, m.view(), 2).is_err());
    }

    #[test]
    fn projector_values() {
        let g = two_node();
        let proj = ConvergedProjector::new(&g, 0.0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_close(&proj.phi().to_owned(), &array![h, h], 1e-15);
        let dense = proj.apply(Array2::eye(2).view()).unwrap();
        assert_close(&dense, &array![[0.5, 0.5], [0.5, 0.5]], 1e-15);

        let zeroed = ConvergedProjector::new(&g, 0.8);
        assert_eq!(zeroed.phi().to_vec(), vec![0.0, 0.0]);

        let single = Graph::from_edges(&[], 1).unwrap();
        assert_eq!(
            ConvergedProjector::new(&single, 0.0).phi().to_vec(),
            vec![1.0]
        );
    }

    #[test]
    fn augmented_two_node() {
        let g = two_node();
        let proj = ConvergedProjector::new(&g, 0.0);
        let eye = Array2::<f64>::eye(2);
        let b1 = apply_augmented(&g, &proj, eye.view(), 1).unwrap();
        assert_close(&b1, &array![[0.25, -0.25], [-0.25, 0.25]], 1e-15);
        let b2 = apply_augmented(&g, &proj, eye.view(), 2).unwrap();
        assert_close(&b2, &array![[0.125, -0.125], [-0.125, 0.125]], 1e-15);
        let b0 = apply_augmented(&g, &proj, eye.view(), 0).unwrap();
        assert_close(&b0, &array![[0.5, -0.5], [-0.5, 0.5]], 1e-15);
    }

    #[test]
    fn augmented_annihilates_phi() {
        let g = Graph::from_edges(&[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)], 4).unwrap();
        let proj = ConvergedProjector::new(&g, 0.0);
        let phi = proj.phi().to_owned();
        let m = ndarray::stack![Axis(1), phi, &phi * -2.5];
        for t in 0..6 {
            let out = apply_augmented(&g, &proj, m.view(), t).unwrap();
            assert!(out.iter().all(|v| v.abs() < 1e-14), "t={t}: {out:?}");
        }
    }

    #[test]
    fn laplacian_examples() {
        let g = two_node();
        let out = g.apply_laplacian(array![[1.0], [-1.0]].view()).unwrap();
        assert_close(&out, &array![[1.0], [-1.0]], 1e-15);

        let path = Graph::from_edges(&[(0, 1), (1, 2)], 3).unwrap();
        let null: Array1<f64> = path
            .degrees()
            .iter()
            .map(|&d| ((d + 1) as f64).sqrt())
            .collect();
        let out = path.apply_laplacian_vec(null.view()).unwrap();
        assert!(out.iter().all(|v| v.abs() < 1e-15));

        let single = Graph::from_edges(&[], 1).unwrap();
        assert_eq!(
            single.apply_laplacian(array![[5.0]].view()).unwrap(),
            array![[0.0]]
        );
    }

    #[test]
    fn dense_oracle_examples() {
        let g = two_node();
        assert_close(
            &dense_oracle(&g, 1).unwrap(),
            &array![[0.25, -0.25], [-0.25, 0.25]],
            1e-15,
        );

        let path = Graph::from_edges(&[(0, 1), (1, 2)], 3).unwrap();
        let p_inf = {
            let proj = ConvergedProjector::new(&path, 0.0);
            proj.apply(Array2::eye(3).view()).unwrap()
        };
        assert_close(
            &dense_oracle(&path, 0).unwrap(),
            &(Array2::<f64>::eye(3) - p_inf),
            1e-15,
        );

        // entrywise closed form of P − P^∞
        let d = path.degrees();
        let total = (2 * path.m() + path.n()) as f64;
        let b1 = dense_oracle(&path, 1).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let di = (d[i] + 1) as f64;
                let dj = (d[j] + 1) as f64;
                let a = if path.has_edge(i, j) || i == j {
                    1.0
                } else {
                    0.0
                };
                let diag = if i == j { 0.5 } else { 0.0 };
                let expected = diag + a / (2.0 * (di * dj).sqrt()) - (di * dj).sqrt() / total;
                assert!((b1[[i, j]] - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn dense_oracle_cap() {
        let edges: Vec<_> = (0..69).map(|i| (i, i + 1)).collect();
        let g = Graph::from_edges(&edges, 70).unwrap();
        assert!(matches!(
            dense_oracle(&g, 1),
            Err(Error::DenseCap { n: 70, cap: 64 })
        ));
    }

    #[test]
    fn connectivity() {
        assert!(two_node().is_connected());
        assert!(!Graph::from_edges(&[(0, 1)], 3).unwrap().is_connected());
    }
}
