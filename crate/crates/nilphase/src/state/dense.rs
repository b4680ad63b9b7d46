//! Dense amplitude-vector backend. Serves as the oracle the structured
//! backend is checked against; every operation is a direct index
//! manipulation on the full state vector.

use super::{LabelChainVector, StateError, DENSE_STATE_CAP, PROB_FLOOR};
use crate::meas::MonomialOp;
use ndarray::Array2;
use num_complex::Complex64 as C64;

#[derive(Debug, Clone)]
pub struct DenseState {
    dims: Vec<usize>,
    amps: Vec<C64>,
}

fn checked_len(dims: &[usize]) -> Result<usize, StateError> {
    let mut total: usize = 1;
    for &d in dims {
        total = total
            .checked_mul(d)
            .filter(|&t| t <= DENSE_STATE_CAP)
            .ok_or(StateError::DenseCap(usize::MAX))?;
    }
    Ok(total)
}

impl DenseState {
    pub fn scalar(value: C64) -> Self {
        Self {
            dims: Vec::new(),
            amps: vec![value],
        }
    }

    pub fn from_amplitudes(dims: Vec<usize>, amps: Vec<C64>) -> Result<Self, StateError> {
        let total = checked_len(&dims)?;
        if amps.len() != total {
            return Err(StateError::DimMismatch(format!(
                "{} amplitudes for dimension product {}",
                amps.len(),
                total
            )));
        }
        Ok(Self { dims, amps })
    }

    pub fn bell_pair_chain(dim: usize, n_sites: usize) -> Result<Self, StateError> {
        let dims = vec![dim; 2 * n_sites];
        let total = checked_len(&dims)?;
        let mut amps = vec![C64::new(0.0, 0.0); total];
        let amp = C64::new((1.0 / (dim as f64)).powf(n_sites as f64 / 2.0), 0.0);
        // Pair labels d_0..d_{N-1}: atom L_i = d_{i-1 mod N}, atom R_i = d_i.
        let mut labels = vec![0usize; n_sites];
        loop {
            let mut idx = 0usize;
            for site in 0..n_sites {
                let l = labels[(site + n_sites - 1) % n_sites];
                let r = labels[site];
                idx = (idx * dim + l) * dim + r;
            }
            amps[idx] = amp;
            // Odometer over pair labels.
            let mut k = n_sites;
            loop {
                if k == 0 {
                    return Self::from_amplitudes(dims, amps);
                }
                k -= 1;
                labels[k] += 1;
                if labels[k] < dim {
                    break;
                }
                labels[k] = 0;
            }
        }
    }

    pub fn ghz_fiducial_chain(dim: usize, n_sites: usize) -> Result<Self, StateError> {
        assert!(n_sites >= 2, "fiducial chain needs at least two sites");
        let n_atoms = 3 * n_sites;
        let dims = vec![dim; n_atoms];
        let total = checked_len(&dims)?;
        let mut amps = vec![C64::new(0.0, 0.0); total];
        let amp = C64::new((1.0 / (dim as f64)).powf(n_sites as f64 / 2.0), 0.0);
        // Atom order [R_1, L_2, P_2, R_2, ..., L_N, P_N, R_N, L_1, P_1].
        let mut labels = vec![0usize; n_sites];
        let mut atom_labels = vec![0usize; n_atoms];
        loop {
            atom_labels[0] = labels[0];
            for site in 1..n_sites {
                atom_labels[3 * site - 2] = labels[site];
                atom_labels[3 * site - 1] = labels[site];
                atom_labels[3 * site] = labels[site];
            }
            atom_labels[n_atoms - 2] = labels[0];
            atom_labels[n_atoms - 1] = labels[0];
            let mut idx = 0usize;
            for (a, &s) in atom_labels.iter().enumerate() {
                idx = idx * dims[a] + s;
            }
            amps[idx] = amp;
            let mut k = n_sites;
            loop {
                if k == 0 {
                    return Self::from_amplitudes(dims, amps);
                }
                k -= 1;
                labels[k] += 1;
                if labels[k] < dim {
                    break;
                }
                labels[k] = 0;
            }
        }
    }

    pub fn ghz_fiducial_open(dim: usize, n_sites: usize) -> Result<Self, StateError> {
        assert!(n_sites >= 2, "fiducial chain needs at least two sites");
        let n_atoms = 3 * n_sites - 2;
        let dims = vec![dim; n_atoms];
        let total = checked_len(&dims)?;
        let mut amps = vec![C64::new(0.0, 0.0); total];
        let amp = C64::new((1.0 / (dim as f64)).powf(n_sites as f64 / 2.0), 0.0);
        // Atom order [P_0, R_0, L_1, P_1, R_1, ..., L_{N-1}, P_{N-1}]; atom a
        // belongs to site (a + 1) / 3 and carries that site's label.
        let mut labels = vec![0usize; n_sites];
        loop {
            let mut idx = 0usize;
            for a in 0..n_atoms {
                idx = idx * dim + labels[(a + 1) / 3];
            }
            amps[idx] = amp;
            let mut k = n_sites;
            loop {
                if k == 0 {
                    return Self::from_amplitudes(dims, amps);
                }
                k -= 1;
                labels[k] += 1;
                if labels[k] < dim {
                    break;
                }
                labels[k] = 0;
            }
        }
    }

    pub fn n_atoms(&self) -> usize {
        self.dims.len()
    }

    pub fn atom_dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn scale(&mut self, factor: f64) {
        for a in &mut self.amps {
            *a *= factor;
        }
    }

    fn stride_after(&self, pos: usize) -> usize {
        self.dims[pos + 1..].iter().product()
    }

    pub fn apply_monomial(&mut self, pos: usize, op: &MonomialOp) {
        let d = self.dims[pos];
        assert_eq!(op.dim(), d, "operator dimension mismatch");
        let stride = self.stride_after(pos);
        let mut out = vec![C64::new(0.0, 0.0); self.amps.len()];
        let block = d * stride;
        for base in (0..self.amps.len()).step_by(block) {
            for s in 0..d {
                let (t, phase) = op.image(s);
                let src = base + s * stride;
                let dst = base + t * stride;
                for a in 0..stride {
                    out[dst + a] += phase * self.amps[src + a];
                }
            }
        }
        self.amps = out;
    }

    fn apply_ops_to(&self, start: usize, ops: &[MonomialOp], buf: &mut Vec<C64>) {
        buf.clear();
        buf.extend_from_slice(&self.amps);
        let mut tmp = vec![C64::new(0.0, 0.0); self.amps.len()];
        for (t, op) in ops.iter().enumerate() {
            let pos = start + t;
            let d = self.dims[pos];
            assert_eq!(op.dim(), d, "operator dimension mismatch");
            let stride = self.stride_after(pos);
            let block = d * stride;
            for x in tmp.iter_mut() {
                *x = C64::new(0.0, 0.0);
            }
            for base in (0..buf.len()).step_by(block) {
                for s in 0..d {
                    let (img, phase) = op.image(s);
                    let src = base + s * stride;
                    let dst = base + img * stride;
                    for a in 0..stride {
                        tmp[dst + a] += phase * buf[src + a];
                    }
                }
            }
            std::mem::swap(buf, &mut tmp);
        }
    }

    pub fn moment_batch(&self, start: usize, op_sets: &[Vec<MonomialOp>]) -> Vec<C64> {
        let mut buf = Vec::with_capacity(self.amps.len());
        op_sets
            .iter()
            .map(|ops| {
                self.apply_ops_to(start, ops, &mut buf);
                self.amps
                    .iter()
                    .zip(buf.iter())
                    .map(|(o, n)| o.conj() * n)
                    .sum()
            })
            .collect()
    }

    pub fn apply_recipe(&mut self, start: usize, terms: &[(C64, Vec<MonomialOp>)]) {
        let mut acc = vec![C64::new(0.0, 0.0); self.amps.len()];
        let mut buf = Vec::with_capacity(self.amps.len());
        for (coeff, ops) in terms {
            self.apply_ops_to(start, ops, &mut buf);
            for (dst, src) in acc.iter_mut().zip(buf.iter()) {
                *dst += coeff * src;
            }
        }
        self.amps = acc;
    }

    pub fn pair_diagonal_distribution(&self, pos: usize) -> Array2<f64> {
        let d1 = self.dims[pos];
        let d2 = self.dims[pos + 1];
        let stride2 = self.stride_after(pos + 1);
        let stride1 = d2 * stride2;
        let mut probs = Array2::<f64>::zeros((d1, d2));
        for (idx, amp) in self.amps.iter().enumerate() {
            let s1 = (idx / stride1) % d1;
            let s2 = (idx / stride2) % d2;
            probs[[s1, s2]] += amp.norm_sqr();
        }
        probs
    }

    pub fn project_pair_diagonal(&mut self, pos: usize, keep: &dyn Fn(usize, usize) -> bool) -> f64 {
        let d1 = self.dims[pos];
        let d2 = self.dims[pos + 1];
        let stride2 = self.stride_after(pos + 1);
        let stride1 = d2 * stride2;
        let mut prob = 0.0;
        for (idx, amp) in self.amps.iter_mut().enumerate() {
            let s1 = (idx / stride1) % d1;
            let s2 = (idx / stride2) % d2;
            if keep(s1, s2) {
                prob += amp.norm_sqr();
            } else {
                *amp = C64::new(0.0, 0.0);
            }
        }
        if prob > PROB_FLOOR {
            self.scale(1.0 / prob.sqrt());
        }
        prob
    }

    pub fn collapse_block(
        &mut self,
        start: usize,
        bra: &LabelChainVector,
    ) -> Result<f64, StateError> {
        let len = bra.n_atoms();
        if start + len > self.dims.len() {
            return Err(StateError::DimMismatch(
                "collapse block exceeds chain".into(),
            ));
        }
        let before: usize = self.dims[..start].iter().product();
        let block: usize = self.dims[start..start + len].iter().product();
        let after: usize = self.dims[start + len..].iter().product();
        // Offset of the block labels ⊗_t |maps[t][x]⟩ inside the block axes.
        let mut offsets = vec![0usize; bra.coeff.len()];
        for t in 0..len {
            let d = self.dims[start + t];
            for (x, off) in offsets.iter_mut().enumerate() {
                let s = bra.maps[t][x];
                assert!(s < d, "bra label out of range");
                *off = *off * d + s;
            }
        }
        let mut out = vec![C64::new(0.0, 0.0); before * after];
        for o in 0..before {
            for (x, &boff) in offsets.iter().enumerate() {
                let w = bra.coeff[x].conj();
                if w == C64::new(0.0, 0.0) {
                    continue;
                }
                let src = (o * block + boff) * after;
                let dst = o * after;
                for a in 0..after {
                    out[dst + a] += w * self.amps[src + a];
                }
            }
        }
        let prob: f64 = out.iter().map(|a| a.norm_sqr()).sum();
        if prob > PROB_FLOOR {
            let inv = 1.0 / prob.sqrt();
            for a in &mut out {
                *a *= inv;
            }
        }
        self.dims.drain(start..start + len);
        self.amps = out;
        Ok(prob)
    }

    pub fn insert_bell_pair(&mut self, pos: usize, dim: usize) -> Result<(), StateError> {
        let mut new_dims = self.dims.clone();
        new_dims.insert(pos, dim);
        new_dims.insert(pos, dim);
        let total = checked_len(&new_dims)?;
        let after: usize = self.dims[pos..].iter().product();
        let amp = 1.0 / (dim as f64).sqrt();
        let mut out = vec![C64::new(0.0, 0.0); total];
        for (idx, &v) in self.amps.iter().enumerate() {
            let o = idx / after;
            let a = idx % after;
            for x in 0..dim {
                out[((o * dim + x) * dim + x) * after + a] = v * amp;
            }
        }
        self.dims = new_dims;
        self.amps = out;
        Ok(())
    }

    pub fn swap_adjacent(&mut self, pos: usize) {
        let d1 = self.dims[pos];
        let d2 = self.dims[pos + 1];
        let after = self.stride_after(pos + 1);
        let block = d1 * d2 * after;
        let mut out = vec![C64::new(0.0, 0.0); self.amps.len()];
        for base in (0..self.amps.len()).step_by(block) {
            for s1 in 0..d1 {
                for s2 in 0..d2 {
                    let src = base + (s1 * d2 + s2) * after;
                    let dst = base + (s2 * d1 + s1) * after;
                    out[dst..dst + after].copy_from_slice(&self.amps[src..src + after]);
                }
            }
        }
        self.dims.swap(pos, pos + 1);
        self.amps = out;
    }
}
