//! Structured backend: the ring state is stored as an open matrix-product
//! chain whose first left leg and last right leg are seam bonds, glued by a
//! trace. All splits are rank-revealing at a fixed relative tolerance, so
//! bond dimensions stay exact (no lossy truncation ever happens).

use super::{LabelChainVector, StateError, PROB_FLOOR, RANK_TOL};
use crate::linalg::{dagger, qr_cp};
use crate::meas::MonomialOp;
use ndarray::{Array2, Array3, Axis};
use num_complex::Complex64 as C64;

fn czero() -> C64 {
    C64::new(0.0, 0.0)
}

fn cone() -> C64 {
    C64::new(1.0, 0.0)
}

/// Physical slice T[:, p, :] as an owned matrix.
fn pslice(t: &Array3<C64>, p: usize) -> Array2<C64> {
    t.index_axis(Axis(1), p).to_owned()
}

/// Logical-order reshape; safe for any memory layout, including the
/// transposed matrices `dagger` returns.
fn reshape2(m: Array2<C64>, shape: (usize, usize, usize)) -> Array3<C64> {
    Array3::from_shape_vec(shape, m.iter().copied().collect())
        .expect("reshape of freshly built matrix")
}

fn as_matrix(t: &Array3<C64>, rows: usize, cols: usize) -> Array2<C64> {
    Array2::from_shape_vec((rows, cols), t.iter().copied().collect())
        .expect("tensor unfolding")
}

/// Splits a matrix as Q·C at the exact-rank tolerance, guarding the rank-0
/// case (a zero state keeps bond dimension 1).
fn split(m: &Array2<C64>) -> (Array2<C64>, Array2<C64>) {
    let (q, c) = qr_cp(&m.view(), RANK_TOL);
    if q.ncols() == 0 {
        return (
            Array2::zeros((m.nrows(), 1)),
            Array2::zeros((1, m.ncols())),
        );
    }
    (q, c)
}

/// One KxK indicator matrix per seam-label pair (b_bra, b_ket).
fn seam_indicators(s_bra: usize, s_ket: usize) -> Vec<Array2<C64>> {
    let mut out = Vec::with_capacity(s_bra * s_ket);
    for b_bra in 0..s_bra {
        for b_ket in 0..s_ket {
            let mut m = Array2::zeros((s_bra, s_ket));
            m[[b_bra, b_ket]] = cone();
            out.push(m);
        }
    }
    out
}

/// Advances row environments one atom to the right:
/// V ← Σ_p phase(p) · B(img(p))† · V · A(p), with A the ket slices and B the
/// bra slices.
fn sweep_rows(
    rows: &mut [Array2<C64>],
    ket: &Array3<C64>,
    bra: &Array3<C64>,
    op: Option<&MonomialOp>,
) {
    let d = ket.shape()[1];
    assert_eq!(bra.shape()[1], d, "bra/ket physical dimension mismatch");
    let ket_slices: Vec<Array2<C64>> = (0..d).map(|p| pslice(ket, p)).collect();
    let bra_dag: Vec<Array2<C64>> = (0..d).map(|p| dagger(&bra.index_axis(Axis(1), p))).collect();
    let out_shape = (bra.shape()[2], ket.shape()[2]);
    for v in rows.iter_mut() {
        let mut w = Array2::<C64>::zeros(out_shape);
        for p in 0..d {
            let (img, phase) = match op {
                Some(o) => o.image(p),
                None => (p, cone()),
            };
            if phase == czero() {
                continue;
            }
            let term = bra_dag[img].dot(&v.dot(&ket_slices[p]));
            w.zip_mut_with(&term, |a, b| *a += phase * b);
        }
        *v = w;
    }
}

/// Advances column environments one atom to the left:
/// C ← Σ_p phase(p) · conj(B(img(p))) · C · A(p)ᵀ.
fn sweep_cols(
    cols: &mut [Array2<C64>],
    ket: &Array3<C64>,
    bra: &Array3<C64>,
    op: Option<&MonomialOp>,
) {
    let d = ket.shape()[1];
    assert_eq!(bra.shape()[1], d, "bra/ket physical dimension mismatch");
    let ket_t: Vec<Array2<C64>> = (0..d).map(|p| pslice(ket, p).reversed_axes()).collect();
    let bra_conj: Vec<Array2<C64>> = (0..d).map(|p| pslice(bra, p).mapv(|z| z.conj())).collect();
    let out_shape = (bra.shape()[0], ket.shape()[0]);
    for c in cols.iter_mut() {
        let mut w = Array2::<C64>::zeros(out_shape);
        for p in 0..d {
            let (img, phase) = match op {
                Some(o) => o.image(p),
                None => (p, cone()),
            };
            if phase == czero() {
                continue;
            }
            let term = bra_conj[img].dot(&c.dot(&ket_t[p]));
            w.zip_mut_with(&term, |a, b| *a += phase * b);
        }
        *c = w;
    }
}

fn close(rows: &[Array2<C64>], cols: &[Array2<C64>]) -> C64 {
    let mut total = czero();
    for (r, c) in rows.iter().zip(cols.iter()) {
        for (a, b) in r.iter().zip(c.iter()) {
            total += a * b;
        }
    }
    total
}

#[derive(Debug, Clone)]
pub struct MpsState {
    /// Site tensors [left bond, physical, right bond]. The first tensor's
    /// left leg and the last tensor's right leg are the seam.
    tensors: Vec<Array3<C64>>,
}

impl MpsState {
    /// See the module docs of [`super`] for the atom order.
    pub fn bell_pair_chain(dim: usize, n_sites: usize) -> Self {
        assert!(n_sites >= 1);
        let f = 1.0 / (dim as f64).sqrt();
        let mut left = Array3::zeros((dim, dim, 1));
        for p in 0..dim {
            left[[p, p, 0]] = cone();
        }
        let mut right = Array3::zeros((1, dim, dim));
        for p in 0..dim {
            right[[0, p, p]] = C64::new(f, 0.0);
        }
        let mut tensors = Vec::with_capacity(2 * n_sites);
        for _ in 0..n_sites {
            tensors.push(left.clone());
            tensors.push(right.clone());
        }
        Self { tensors }
    }

    /// See the module docs of [`super`] for the atom order.
    pub fn ghz_fiducial_chain(dim: usize, n_sites: usize) -> Self {
        assert!(n_sites >= 2, "fiducial chain needs at least two sites");
        let f = C64::new(1.0 / (dim as f64).sqrt(), 0.0);
        let mut head = Array3::zeros((dim, dim, 1));
        for p in 0..dim {
            head[[p, p, 0]] = f;
        }
        let mut open = Array3::zeros((1, dim, dim));
        for p in 0..dim {
            open[[0, p, p]] = f;
        }
        let mut mid = Array3::zeros((dim, dim, dim));
        for p in 0..dim {
            mid[[p, p, p]] = cone();
        }
        let mut shut = Array3::zeros((dim, dim, 1));
        for p in 0..dim {
            shut[[p, p, 0]] = cone();
        }
        let mut tail_open = Array3::zeros((1, dim, dim));
        for p in 0..dim {
            tail_open[[0, p, p]] = cone();
        }
        let mut tensors = Vec::with_capacity(3 * n_sites);
        tensors.push(head);
        for _ in 1..n_sites {
            tensors.push(open.clone());
            tensors.push(mid.clone());
            tensors.push(shut.clone());
        }
        tensors.push(tail_open);
        tensors.push(mid.clone());
        let state = Self { tensors };
        debug_assert_eq!(state.n_atoms(), 3 * n_sites);
        state
    }

    /// See the module docs of [`super`] for the atom order.
    pub fn ghz_fiducial_open(dim: usize, n_sites: usize) -> Self {
        assert!(n_sites >= 2, "fiducial chain needs at least two sites");
        let f = C64::new(1.0 / (dim as f64).sqrt(), 0.0);
        let mut open = Array3::zeros((1, dim, dim));
        for p in 0..dim {
            open[[0, p, p]] = f;
        }
        let mut mid = Array3::zeros((dim, dim, dim));
        for p in 0..dim {
            mid[[p, p, p]] = cone();
        }
        let mut shut = Array3::zeros((dim, dim, 1));
        for p in 0..dim {
            shut[[p, p, 0]] = cone();
        }
        let mut tensors = Vec::with_capacity(3 * n_sites - 2);
        tensors.push(open.clone());
        tensors.push(shut.clone());
        for _ in 1..n_sites - 1 {
            tensors.push(open.clone());
            tensors.push(mid.clone());
            tensors.push(shut.clone());
        }
        tensors.push(open);
        tensors.push(shut);
        let state = Self { tensors };
        debug_assert_eq!(state.n_atoms(), 3 * n_sites - 2);
        state
    }

    pub fn n_atoms(&self) -> usize {
        self.tensors.len()
    }

    pub fn atom_dims(&self) -> Vec<usize> {
        self.tensors.iter().map(|t| t.shape()[1]).collect()
    }

    fn seam(&self) -> usize {
        self.tensors
            .first()
            .map(|t| t.shape()[0])
            .unwrap_or(1)
    }

    pub fn max_bond(&self) -> usize {
        self.tensors
            .iter()
            .flat_map(|t| [t.shape()[0], t.shape()[2]])
            .max()
            .unwrap_or(0)
    }

    pub fn scale(&mut self, factor: f64) {
        if let Some(t) = self.tensors.first_mut() {
            t.mapv_inplace(|z| z * factor);
        }
    }

    pub fn overlap(&self, other: &MpsState) -> Result<C64, StateError> {
        if self.atom_dims() != other.atom_dims() {
            return Err(StateError::DimMismatch(
                "overlap of different atom layouts".into(),
            ));
        }
        let s_bra = self.seam();
        let s_ket = other.seam();
        let mut rows = seam_indicators(s_bra, s_ket);
        for i in 0..self.tensors.len() {
            sweep_rows(&mut rows, &other.tensors[i], &self.tensors[i], None);
        }
        let mut total = czero();
        for b_bra in 0..s_bra {
            for b_ket in 0..s_ket {
                total += rows[b_bra * s_ket + b_ket][[b_bra, b_ket]];
            }
        }
        Ok(total)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.overlap(self).expect("self overlap").re
    }

    pub fn apply_monomial(&mut self, pos: usize, op: &MonomialOp) {
        let t = &self.tensors[pos];
        let d = t.shape()[1];
        assert_eq!(op.dim(), d, "operator dimension mismatch");
        let mut out = Array3::zeros(t.raw_dim());
        for p in 0..d {
            let (img, phase) = op.image(p);
            let src = t.index_axis(Axis(1), p);
            out.index_axis_mut(Axis(1), img)
                .zip_mut_with(&src, |a, b| *a += phase * b);
        }
        self.tensors[pos] = out;
    }

    pub fn moment_batch(&self, start: usize, op_sets: &[Vec<MonomialOp>]) -> Vec<C64> {
        if op_sets.is_empty() {
            return Vec::new();
        }
        let len = op_sets[0].len();
        for set in op_sets {
            assert_eq!(set.len(), len, "ragged operator sets");
        }
        assert!(start + len <= self.tensors.len());
        let s = self.seam();
        let mut rows = seam_indicators(s, s);
        for i in 0..start {
            sweep_rows(&mut rows, &self.tensors[i], &self.tensors[i], None);
        }
        let mut cols = seam_indicators(s, s);
        for i in (start + len..self.tensors.len()).rev() {
            sweep_cols(&mut cols, &self.tensors[i], &self.tensors[i], None);
        }
        op_sets
            .iter()
            .map(|ops| {
                let mut r = rows.clone();
                for (t, op) in ops.iter().enumerate() {
                    let tensor = &self.tensors[start + t];
                    sweep_rows(&mut r, tensor, tensor, Some(op));
                }
                close(&r, &cols)
            })
            .collect()
    }

    fn apply_op_tensor(t: &Array3<C64>, op: &MonomialOp) -> Array3<C64> {
        let d = t.shape()[1];
        assert_eq!(op.dim(), d, "operator dimension mismatch");
        let mut out = Array3::zeros(t.raw_dim());
        for p in 0..d {
            let (img, phase) = op.image(p);
            let src = t.index_axis(Axis(1), p);
            out.index_axis_mut(Axis(1), img)
                .zip_mut_with(&src, |a, b| *a += phase * b);
        }
        out
    }

    pub fn apply_recipe(&mut self, start: usize, terms: &[(C64, Vec<MonomialOp>)]) {
        assert!(!terms.is_empty());
        let len = terms[0].1.len();
        for (_, ops) in terms {
            assert_eq!(ops.len(), len, "ragged recipe terms");
        }
        assert!(start + len <= self.tensors.len());
        let nt = terms.len();
        if len == 1 {
            let t = &self.tensors[start];
            let mut acc = Array3::zeros(t.raw_dim());
            for (coeff, ops) in terms {
                let applied = Self::apply_op_tensor(t, &ops[0]);
                acc.zip_mut_with(&applied, |a, b| *a += coeff * b);
            }
            self.tensors[start] = acc;
        } else {
            for j in 0..len {
                let t = self.tensors[start + j].clone();
                let (l, d, r) = (t.shape()[0], t.shape()[1], t.shape()[2]);
                let new = if j == 0 {
                    // Coefficients fold into the first block atom; terms are
                    // summed by the fattened bond.
                    let mut out = Array3::zeros((l, d, nt * r));
                    for (ti, (coeff, ops)) in terms.iter().enumerate() {
                        let a = Self::apply_op_tensor(&t, &ops[j]);
                        for li in 0..l {
                            for p in 0..d {
                                for ri in 0..r {
                                    out[[li, p, ti * r + ri]] = coeff * a[[li, p, ri]];
                                }
                            }
                        }
                    }
                    out
                } else if j == len - 1 {
                    let mut out = Array3::zeros((nt * l, d, r));
                    for (ti, (_, ops)) in terms.iter().enumerate() {
                        let a = Self::apply_op_tensor(&t, &ops[j]);
                        for li in 0..l {
                            for p in 0..d {
                                for ri in 0..r {
                                    out[[ti * l + li, p, ri]] = a[[li, p, ri]];
                                }
                            }
                        }
                    }
                    out
                } else {
                    let mut out = Array3::zeros((nt * l, d, nt * r));
                    for (ti, (_, ops)) in terms.iter().enumerate() {
                        let a = Self::apply_op_tensor(&t, &ops[j]);
                        for li in 0..l {
                            for p in 0..d {
                                for ri in 0..r {
                                    out[[ti * l + li, p, ti * r + ri]] = a[[li, p, ri]];
                                }
                            }
                        }
                    }
                    out
                };
                self.tensors[start + j] = new;
            }
        }
        self.compress();
    }

    /// Restores minimal bond dimensions by a left-to-right then
    /// right-to-left sweep of rank-revealing splits. Seam legs are fixed.
    pub fn compress(&mut self) {
        let k = self.tensors.len();
        if k <= 1 {
            return;
        }
        for i in 0..k - 1 {
            let (l, d, r) = {
                let s = self.tensors[i].shape();
                (s[0], s[1], s[2])
            };
            let mat = as_matrix(&self.tensors[i], l * d, r);
            let (q, c) = split(&mat);
            let rank = q.ncols();
            self.tensors[i] = reshape2(q, (l, d, rank));
            let next = &self.tensors[i + 1];
            let (nl, nd, nr) = (next.shape()[0], next.shape()[1], next.shape()[2]);
            let merged = c.dot(&as_matrix(next, nl, nd * nr));
            self.tensors[i + 1] = reshape2(merged, (rank, nd, nr));
        }
        for i in (1..k).rev() {
            let (l, d, r) = {
                let s = self.tensors[i].shape();
                (s[0], s[1], s[2])
            };
            let mat = as_matrix(&self.tensors[i], l, d * r);
            let md = dagger(&mat.view());
            let (q, c) = split(&md);
            let rank = q.ncols();
            self.tensors[i] = reshape2(dagger(&q.view()), (rank, d, r));
            let cd = dagger(&c.view());
            let prev = &self.tensors[i - 1];
            let (pl, pd, pr) = (prev.shape()[0], prev.shape()[1], prev.shape()[2]);
            let merged = as_matrix(prev, pl * pd, pr).dot(&cd);
            self.tensors[i - 1] = reshape2(merged, (pl, pd, rank));
        }
    }

    pub fn swap_adjacent(&mut self, pos: usize) {
        assert!(pos + 1 < self.tensors.len());
        let t1 = self.tensors[pos].clone();
        let t2 = self.tensors[pos + 1].clone();
        let (l, d1) = (t1.shape()[0], t1.shape()[1]);
        let (d2, r) = (t2.shape()[1], t2.shape()[2]);
        // theta[(l, p2), (p1, r)] with the physical legs already exchanged.
        let mut theta = Array2::zeros((l * d2, d1 * r));
        for p1 in 0..d1 {
            let m1 = t1.index_axis(Axis(1), p1);
            for p2 in 0..d2 {
                let m2 = t2.index_axis(Axis(1), p2);
                let prod = m1.dot(&m2);
                for li in 0..l {
                    for ri in 0..r {
                        theta[[li * d2 + p2, p1 * r + ri]] = prod[[li, ri]];
                    }
                }
            }
        }
        let (q, c) = split(&theta);
        let rank = q.ncols();
        self.tensors[pos] = reshape2(q, (l, d2, rank));
        self.tensors[pos + 1] = reshape2(c, (rank, d1, r));
    }

    pub fn pair_diagonal_distribution(&self, pos: usize) -> Array2<f64> {
        assert!(pos + 1 < self.tensors.len());
        let t1 = &self.tensors[pos];
        let t2 = &self.tensors[pos + 1];
        let (d1, d2) = (t1.shape()[1], t2.shape()[1]);
        let s = self.seam();
        let mut rows = seam_indicators(s, s);
        for i in 0..pos {
            sweep_rows(&mut rows, &self.tensors[i], &self.tensors[i], None);
        }
        let mut cols = seam_indicators(s, s);
        for i in (pos + 2..self.tensors.len()).rev() {
            sweep_cols(&mut cols, &self.tensors[i], &self.tensors[i], None);
        }
        let k1: Vec<Array2<C64>> = (0..d1).map(|p| pslice(t1, p)).collect();
        let b1: Vec<Array2<C64>> = (0..d1).map(|p| dagger(&t1.index_axis(Axis(1), p))).collect();
        let k2: Vec<Array2<C64>> = (0..d2).map(|p| pslice(t2, p)).collect();
        let b2: Vec<Array2<C64>> = (0..d2).map(|p| dagger(&t2.index_axis(Axis(1), p))).collect();
        let mut probs = Array2::<f64>::zeros((d1, d2));
        for (q, row) in rows.iter().enumerate() {
            for a in 0..d1 {
                let m = b1[a].dot(&row.dot(&k1[a]));
                for b in 0..d2 {
                    let x = b2[b].dot(&m.dot(&k2[b]));
                    let mut val = czero();
                    for (u, v) in x.iter().zip(cols[q].iter()) {
                        val += u * v;
                    }
                    probs[[a, b]] += val.re;
                }
            }
        }
        probs
    }

    pub fn project_pair_diagonal(&mut self, pos: usize, keep: &dyn Fn(usize, usize) -> bool) -> f64 {
        assert!(pos + 1 < self.tensors.len());
        let t1 = self.tensors[pos].clone();
        let t2 = self.tensors[pos + 1].clone();
        let (l, d1) = (t1.shape()[0], t1.shape()[1]);
        let (d2, r) = (t2.shape()[1], t2.shape()[2]);
        let mut theta = Array2::zeros((l * d1, d2 * r));
        for p1 in 0..d1 {
            let m1 = t1.index_axis(Axis(1), p1);
            for p2 in 0..d2 {
                if !keep(p1, p2) {
                    continue;
                }
                let m2 = t2.index_axis(Axis(1), p2);
                let prod = m1.dot(&m2);
                for li in 0..l {
                    for ri in 0..r {
                        theta[[li * d1 + p1, p2 * r + ri]] = prod[[li, ri]];
                    }
                }
            }
        }
        let (q, c) = split(&theta);
        let rank = q.ncols();
        self.tensors[pos] = reshape2(q, (l, d1, rank));
        self.tensors[pos + 1] = reshape2(c, (rank, d2, r));
        let prob = self.norm_sqr();
        if prob > PROB_FLOOR {
            self.scale(1.0 / prob.sqrt());
        }
        prob
    }

    /// Contracts a label-chain bra against a contiguous block and removes
    /// those atoms. Returns the outcome probability, plus the leftover
    /// scalar when the whole chain was consumed.
    pub fn collapse_block(
        &mut self,
        start: usize,
        bra: &LabelChainVector,
    ) -> Result<(f64, Option<C64>), StateError> {
        let len = bra.n_atoms();
        if start + len > self.tensors.len() {
            return Err(StateError::DimMismatch(
                "collapse block exceeds chain".into(),
            ));
        }
        for (t, map) in bra.maps.iter().enumerate() {
            let d = self.tensors[start + t].shape()[1];
            if map.iter().any(|&s| s >= d) {
                return Err(StateError::DimMismatch("bra label out of range".into()));
            }
        }
        let l0 = self.tensors[start].shape()[0];
        let r_end = self.tensors[start + len - 1].shape()[2];
        let mut kmat = Array2::<C64>::zeros((l0, r_end));
        for (x, &coeff) in bra.coeff.iter().enumerate() {
            let w = coeff.conj();
            if w == czero() {
                continue;
            }
            let mut m = pslice(&self.tensors[start], bra.maps[0][x]);
            for t in 1..len {
                m = m.dot(&self.tensors[start + t].index_axis(Axis(1), bra.maps[t][x]));
            }
            kmat.zip_mut_with(&m, |a, b| *a += w * b);
        }
        if len == self.tensors.len() {
            // Whole chain consumed: glue the seam legs of the connector.
            if kmat.nrows() != kmat.ncols() {
                return Err(StateError::Internal("seam legs of unequal size".into()));
            }
            let scalar: C64 = (0..kmat.nrows()).map(|i| kmat[[i, i]]).sum();
            let prob = scalar.norm_sqr();
            let value = if prob > PROB_FLOOR {
                scalar / prob.sqrt()
            } else {
                scalar
            };
            self.tensors.clear();
            return Ok((prob, Some(value)));
        }
        self.tensors.drain(start..start + len);
        if start == 0 {
            let next = &self.tensors[0];
            let (nl, nd, nr) = (next.shape()[0], next.shape()[1], next.shape()[2]);
            let merged = kmat.dot(&as_matrix(next, nl, nd * nr));
            self.tensors[0] = reshape2(merged, (l0, nd, nr));
        } else {
            let prev = &self.tensors[start - 1];
            let (pl, pd, pr) = (prev.shape()[0], prev.shape()[1], prev.shape()[2]);
            let merged = as_matrix(prev, pl * pd, pr).dot(&kmat);
            self.tensors[start - 1] = reshape2(merged, (pl, pd, r_end));
        }
        self.compress();
        let prob = self.norm_sqr();
        if prob > PROB_FLOOR {
            self.scale(1.0 / prob.sqrt());
        }
        Ok((prob, None))
    }

    /// Inserts a maximally entangled pair before `pos` (interior positions
    /// only, so the seam legs stay at the chain ends). The bond crossing the
    /// insertion point is threaded through the new tensors as a wire.
    pub fn insert_bell_pair(&mut self, pos: usize, dim: usize) {
        assert!(
            pos >= 1 && pos < self.tensors.len(),
            "pair insertion must be interior"
        );
        let wire = self.tensors[pos - 1].shape()[2];
        let f = C64::new(1.0 / (dim as f64).sqrt(), 0.0);
        let mut first = Array3::zeros((wire, dim, wire * dim));
        let mut second = Array3::zeros((wire * dim, dim, wire));
        for w in 0..wire {
            for p in 0..dim {
                first[[w, p, w * dim + p]] = f;
                second[[w * dim + p, p, w]] = cone();
            }
        }
        self.tensors.insert(pos, second);
        self.tensors.insert(pos, first);
    }

    pub fn to_dense(&self, cap: usize) -> Result<Vec<C64>, StateError> {
        let dims = self.atom_dims();
        let mut total = 1usize;
        for &d in &dims {
            total = total
                .checked_mul(d)
                .filter(|&t| t <= cap)
                .ok_or(StateError::DenseCap(usize::MAX))?;
        }
        if self.tensors.is_empty() {
            return Err(StateError::Internal("empty chain".into()));
        }
        let s = self.seam();
        let mut amps = vec![czero(); total];
        for b in 0..s {
            // Accumulated amplitudes [label prefix, current bond].
            let mut v = self.tensors[0].index_axis(Axis(0), b).to_owned();
            for t in self.tensors.iter().skip(1) {
                let (l, d, r) = (t.shape()[0], t.shape()[1], t.shape()[2]);
                let grown = v.dot(&as_matrix(t, l, d * r));
                let rows = grown.nrows() * d;
                v = Array2::from_shape_vec((rows, r), grown.iter().copied().collect())
                    .expect("amplitude growth reshape");
            }
            if v.ncols() <= b {
                return Err(StateError::Internal("seam leg mismatch".into()));
            }
            for (idx, amp) in v.column(b).iter().enumerate() {
                amps[idx] += *amp;
            }
        }
        Ok(amps)
    }
}
