use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Order in which a row's neighbour terms are added.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Summation {
    /// Ascending column index. Fast; results depend on node labelling in the last bits.
    Sequential,
    /// Terms sorted by value before adding, so the result is a function of the
    /// multiset of terms only and relabelling nodes permutes outputs bit-exactly.
    Canonical,
}

/// Compressed-row graph operator (normalised adjacency or incidence) applied
/// block-wise to a batch of stacked graph signals.
///
/// A batch of `B` signals over `cols` vertices is a `(B·cols) × f` matrix whose
/// consecutive `cols`-row blocks are the individual samples; the output is the
/// `(B·rows) × f` matrix of per-block products.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOp {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
    // transpose, kept for the backward pass
    t_ptr: Vec<usize>,
    t_idx: Vec<usize>,
    t_vals: Vec<f64>,
}

impl SparseOp {
    pub fn from_dense(m: &Matrix) -> Self {
        let (row_ptr, col_idx, vals) = compress(m);
        let (t_ptr, t_idx, t_vals) = compress(&m.transpose());
        Self {
            rows: m.rows(),
            cols: m.cols(),
            row_ptr,
            col_idx,
            vals,
            t_ptr,
            t_idx,
            t_vals,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.col_idx[p])] = self.vals[p];
            }
        }
        m
    }

    pub fn transposed(&self) -> SparseOp {
        SparseOp {
            rows: self.cols,
            cols: self.rows,
            row_ptr: self.t_ptr.clone(),
            col_idx: self.t_idx.clone(),
            vals: self.t_vals.clone(),
            t_ptr: self.row_ptr.clone(),
            t_idx: self.col_idx.clone(),
            t_vals: self.vals.clone(),
        }
    }

    /// Number of stacked samples in `x`, or a dimension error.
    pub fn batch_of(&self, x: &Matrix) -> Result<usize> {
        if self.cols == 0 || x.rows() % self.cols != 0 {
            return Err(Error::Dimension {
                op: "graph propagate",
                left: (self.rows, self.cols),
                right: x.shape(),
            });
        }
        Ok(x.rows() / self.cols)
    }

    pub fn apply(&self, x: &Matrix, order: Summation) -> Result<Matrix> {
        let batch = self.batch_of(x)?;
        let mut out = Matrix::zeros(batch * self.rows, x.cols());
        match order {
            Summation::Sequential => spmm(
                (&self.row_ptr, &self.col_idx, &self.vals),
                self.rows,
                self.cols,
                batch,
                x,
                &mut out,
            ),
            Summation::Canonical => self.apply_canonical(batch, x, &mut out),
        }
        Ok(out)
    }

    /// `dx += Sᵀ · dy` block-wise; `dy` is `(B·rows) × f`.
    pub(crate) fn apply_transpose_into(&self, dy: &Matrix, dx: &mut Matrix) {
        let batch = dy.rows() / self.rows.max(1);
        spmm(
            (&self.t_ptr, &self.t_idx, &self.t_vals),
            self.cols,
            self.rows,
            batch,
            dy,
            dx,
        );
    }

    fn apply_canonical(&self, batch: usize, x: &Matrix, out: &mut Matrix) {
        const SHORT: usize = 16;
        let f = x.cols();
        let src = x.as_slice();
        let mut long: Vec<f64> = Vec::new();
        for b in 0..batch {
            for i in 0..self.rows {
                let span = self.row_ptr[i]..self.row_ptr[i + 1];
                let dst = out.row_mut(b * self.rows + i);
                let term = |p: usize, c: usize| self.vals[p] * src[(b * self.cols + self.col_idx[p]) * f + c];
                match span.len() {
                    0 => {}
                    // one or two terms: addition is commutative, no ordering needed
                    1 => dst.iter_mut().enumerate().for_each(|(c, d)| *d = term(span.start, c)),
                    2 => dst
                        .iter_mut()
                        .enumerate()
                        .for_each(|(c, d)| *d = term(span.start, c) + term(span.start + 1, c)),
                    k if k <= SHORT => {
                        let mut buf = [0.0; SHORT];
                        for (c, d) in dst.iter_mut().enumerate() {
                            for (slot, p) in buf.iter_mut().zip(span.clone()) {
                                *slot = term(p, c);
                            }
                            insertion_sort(&mut buf[..k]);
                            *d = buf[..k].iter().fold(0.0, |acc, t| acc + t);
                        }
                    }
                    _ => {
                        for (c, d) in dst.iter_mut().enumerate() {
                            long.clear();
                            long.extend(span.clone().map(|p| term(p, c)));
                            long.sort_unstable_by(f64::total_cmp);
                            *d = long.iter().fold(0.0, |acc, t| acc + t);
                        }
                    }
                }
            }
        }
    }
}

fn insertion_sort(v: &mut [f64]) {
    for i in 1..v.len() {
        let x = v[i];
        let mut j = i;
        while j > 0 && v[j - 1].total_cmp(&x) == std::cmp::Ordering::Greater {
            v[j] = v[j - 1];
            j -= 1;
        }
        v[j] = x;
    }
}

type Csr = (Vec<usize>, Vec<usize>, Vec<f64>);

fn compress(m: &Matrix) -> Csr {
    let mut row_ptr = Vec::with_capacity(m.rows() + 1);
    let mut col_idx = Vec::new();
    let mut vals = Vec::new();
    row_ptr.push(0);
    for i in 0..m.rows() {
        for (j, &v) in m.row(i).iter().enumerate() {
            if v != 0.0 {
                col_idx.push(j);
                vals.push(v);
            }
        }
        row_ptr.push(vals.len());
    }
    (row_ptr, col_idx, vals)
}

const WIDE: usize = 16;
const NARROW: usize = 8;

/// Adds `Σ_p vals[p] · block[idx[p]]` over `span` into `out_row[c..c + W]`,
/// term by term in `span` order.
#[inline(always)]
fn spmm_chunk<const W: usize>(
    (idx, vals): (&[usize], &[f64]),
    span: std::ops::Range<usize>,
    block: &[f64],
    f: usize,
    c: usize,
    out_row: &mut [f64],
) {
    let d: &mut [f64; W] = (&mut out_row[c..c + W]).try_into().expect("lane chunk");
    let mut acc = *d;
    for p in span {
        let s = idx[p] * f + c;
        let v: &[f64; W] = block[s..s + W].try_into().expect("lane chunk");
        let w = vals[p];
        for l in 0..W {
            acc[l] += w * v[l];
        }
    }
    *d = acc;
}

fn spmm(
    (ptr, idx, vals): (&[usize], &[usize], &[f64]),
    rows: usize,
    cols: usize,
    batch: usize,
    x: &Matrix,
    out: &mut Matrix,
) {
    let f = x.cols();
    let src = x.as_slice();
    let dst = out.as_mut_slice();
    for b in 0..batch {
        let block = &src[b * cols * f..(b + 1) * cols * f];
        for i in 0..rows {
            let o = (b * rows + i) * f;
            let out_row = &mut dst[o..o + f];
            let span = ptr[i]..ptr[i + 1];
            let mut c = 0;
            while c + WIDE <= f {
                spmm_chunk::<WIDE>((idx, vals), span.clone(), block, f, c, out_row);
                c += WIDE;
            }
            if c + NARROW <= f {
                spmm_chunk::<NARROW>((idx, vals), span.clone(), block, f, c, out_row);
                c += NARROW;
            }
            for c in c..f {
                let mut acc = out_row[c];
                for p in span.clone() {
                    acc += vals[p] * block[idx[p] * f + c];
                }
                out_row[c] = acc;
            }
        }
    }
}
