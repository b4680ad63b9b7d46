//! Small dense complex linear algebra helpers.
//!
//! Everything here is self-contained (no BLAS/LAPACK linkage): the matrices
//! that arise are modest (class matrices up to the number of conjugacy
//! classes, tensor splits up to a few thousand rows) and the routines are
//! deterministic, which keeps every consumer byte-reproducible.

use ndarray::{Array1, Array2, ArrayView2};
use num_complex::Complex64 as C64;

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &ArrayView2<C64>, b: &ArrayView2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[[i, j]];
            if aij == C64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[[i * br + k, j * bc + l]] = aij * b[[k, l]];
                }
            }
        }
    }
    out
}

/// Identity matrix of size `n`.
pub fn eye(n: usize) -> Array2<C64> {
    Array2::from_diag(&Array1::from_elem(n, C64::new(1.0, 0.0)))
}

/// Conjugate transpose.
pub fn dagger(a: &ArrayView2<C64>) -> Array2<C64> {
    let mut out = a.t().to_owned();
    out.mapv_inplace(|z| z.conj());
    out
}

/// Largest elementwise absolute difference between two equal-shaped matrices.
pub fn max_abs_diff(a: &ArrayView2<C64>, b: &ArrayView2<C64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    let mut m = 0.0f64;
    for (x, y) in a.iter().zip(b.iter()) {
        m = m.max((x - y).norm());
    }
    m
}

/// Largest absolute entry.
pub fn max_abs(a: &ArrayView2<C64>) -> f64 {
    a.iter().fold(0.0f64, |m, z| m.max(z.norm()))
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi
/// rotations. Returns eigenvalues in descending order with matching
/// eigenvector columns. Accurate to ~1e-13 relative for the sizes used here.
pub fn herm_eig(a: &ArrayView2<C64>) -> Result<(Vec<f64>, Array2<C64>), String> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let mut m = a.to_owned();
    let mut v = eye(n);
    let scale = max_abs(&m.view()).max(1e-300);
    let tol = 1e-14 * scale;
    let max_sweeps = 80;
    for _ in 0..max_sweeps {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(m[[p, q]].norm());
            }
        }
        if off < tol {
            let mut pairs: Vec<(f64, usize)> =
                (0..n).map(|i| (m[[i, i]].re, i)).collect();
            pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
            let values: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let mut vectors = Array2::zeros((n, n));
            for (col, (_, idx)) in pairs.iter().enumerate() {
                for row in 0..n {
                    vectors[[row, col]] = v[[row, *idx]];
                }
            }
            return Ok((values, vectors));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                let r = apq.norm();
                if r < tol * 1e-2 {
                    continue;
                }
                let phase = apq / r;
                let app = m[[p, p]].re;
                let aqq = m[[q, q]].re;
                let tau = (aqq - app) / (2.0 * r);
                let t = if tau >= 0.0 {
                    -1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                // Unitary U = diag(1, phase^*) * [[c, -s], [s, c]] acting on
                // the (p, q) plane; update M <- U^† M U and V <- V U.
                let ph = phase.conj();
                let rowp = m.row(p).to_owned();
                let rowq = m.row(q).to_owned();
                for k in 0..n {
                    m[[p, k]] = c * rowp[k] + s * ph.conj() * rowq[k];
                    m[[q, k]] = -s * rowp[k] + c * ph.conj() * rowq[k];
                }
                let colp = m.column(p).to_owned();
                let colq = m.column(q).to_owned();
                for k in 0..n {
                    m[[k, p]] = c * colp[k] + s * ph * colq[k];
                    m[[k, q]] = -s * colp[k] + c * ph * colq[k];
                }
                let vp = v.column(p).to_owned();
                let vq = v.column(q).to_owned();
                for k in 0..n {
                    v[[k, p]] = c * vp[k] + s * ph * vq[k];
                    v[[k, q]] = -s * vp[k] + c * ph * vq[k];
                }
            }
        }
    }
    Err("Jacobi eigensolver did not converge".into())
}

/// Rank-revealing thin factorization `A = Q * C` via Householder QR with
/// column pivoting. `Q` has orthonormal columns (m x r), `C` is r x n, and
/// `r` is the numerical rank at relative tolerance `rel_tol` (column norms
/// below `rel_tol` times the largest initial pivot are treated as zero).
pub fn qr_cp(a: &ArrayView2<C64>, rel_tol: f64) -> (Array2<C64>, Array2<C64>) {
    let (m, n) = a.dim();
    let kmax = m.min(n);
    let mut work = a.to_owned();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut reflectors: Vec<(usize, Array1<C64>)> = Vec::new();
    let mut rank = 0usize;
    let mut pivot0 = 0.0f64;
    for k in 0..kmax {
        // Recompute trailing column norms (cheap at these sizes, avoids
        // downdating drift).
        let mut best = k;
        let mut best_norm = -1.0f64;
        for j in k..n {
            let nj: f64 = (k..m).map(|i| work[[i, j]].norm_sqr()).sum::<f64>().sqrt();
            if nj > best_norm {
                best_norm = nj;
                best = j;
            }
        }
        if k == 0 {
            pivot0 = best_norm;
        }
        if best_norm <= rel_tol * pivot0 || best_norm == 0.0 {
            break;
        }
        if best != k {
            for i in 0..m {
                work.swap([i, k], [i, best]);
            }
            perm.swap(k, best);
        }
        // Householder vector for column k below row k.
        let x0 = work[[k, k]];
        let xnorm = best_norm;
        let alpha = if x0.norm() > 0.0 {
            -(x0 / x0.norm()) * xnorm
        } else {
            C64::new(-xnorm, 0.0)
        };
        let mut vvec = Array1::zeros(m - k);
        for i in k..m {
            vvec[i - k] = work[[i, k]];
        }
        vvec[0] -= alpha;
        let vn2: f64 = vvec.iter().map(|z| z.norm_sqr()).sum();
        if vn2 > 0.0 {
            let beta = 2.0 / vn2;
            for j in k..n {
                let mut dot = C64::new(0.0, 0.0);
                for i in k..m {
                    dot += vvec[i - k].conj() * work[[i, j]];
                }
                let f = beta * dot;
                for i in k..m {
                    let sub = f * vvec[i - k];
                    work[[i, j]] -= sub;
                }
            }
        }
        work[[k, k]] = alpha;
        for i in (k + 1)..m {
            work[[i, k]] = C64::new(0.0, 0.0);
        }
        reflectors.push((k, vvec));
        rank = k + 1;
    }
    // Q = product of reflectors applied to the first `rank` identity columns.
    let mut q = Array2::zeros((m, rank));
    for j in 0..rank {
        q[[j, j]] = C64::new(1.0, 0.0);
    }
    for (k, vvec) in reflectors.iter().rev() {
        let k = *k;
        let vn2: f64 = vvec.iter().map(|z| z.norm_sqr()).sum();
        if vn2 == 0.0 {
            continue;
        }
        let beta = 2.0 / vn2;
        for j in 0..rank {
            let mut dot = C64::new(0.0, 0.0);
            for i in k..m {
                dot += vvec[i - k].conj() * q[[i, j]];
            }
            let f = beta * dot;
            for i in k..m {
                let sub = f * vvec[i - k];
                q[[i, j]] -= sub;
            }
        }
    }
    // C with columns restored to the original order: A[:, perm[j]] has
    // coefficients work[0..rank, j].
    let mut c = Array2::zeros((rank, n));
    for j in 0..n {
        for i in 0..rank {
            c[[i, perm[j]]] = work[[i, j]];
        }
    }
    (q, c)
}

/// Numerical rank of a Gram matrix spectrum: eigenvalues of `A† A` above
/// `rel_tol²` times the largest one.
pub fn gram_rank(a: &ArrayView2<C64>, rel_tol: f64) -> usize {
    let ad = dagger(a);
    let gram = ad.dot(a);
    let (vals, _) = herm_eig(&gram.view()).expect("gram eig");
    let top = vals.first().copied().unwrap_or(0.0).max(0.0);
    if top == 0.0 {
        return 0;
    }
    // Floor the squared tolerance at the eigensolver noise level.
    let thresh = top * (rel_tol * rel_tol).max(1e-12);
    vals.iter().filter(|&&v| v > thresh).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_matrix(rng: &mut ChaCha12Rng, m: usize, n: usize) -> Array2<C64> {
        Array2::from_shape_fn((m, n), |_| {
            C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        })
    }

    #[test]
    fn jacobi_reproduces_hermitian_matrix() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for n in [2usize, 3, 7, 12] {
            let b = random_matrix(&mut rng, n, n);
            let h = &b + &dagger(&b.view());
            let (vals, vecs) = herm_eig(&h.view()).unwrap();
            // V diag(vals) V† == H
            let mut d = Array2::<C64>::zeros((n, n));
            for i in 0..n {
                d[[i, i]] = C64::new(vals[i], 0.0);
            }
            let rebuilt = vecs.dot(&d).dot(&dagger(&vecs.view()));
            assert!(max_abs_diff(&rebuilt.view(), &h.view()) < 1e-10);
            let vtv = dagger(&vecs.view()).dot(&vecs);
            assert!(max_abs_diff(&vtv.view(), &eye(n).view()) < 1e-10);
            for i in 1..n {
                assert!(vals[i - 1] >= vals[i] - 1e-12);
            }
        }
    }

    #[test]
    fn qr_cp_reconstructs_and_detects_rank() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for (m, n, r) in [(6usize, 6usize, 3usize), (10, 4, 4), (5, 9, 2)] {
            let left = random_matrix(&mut rng, m, r);
            let right = random_matrix(&mut rng, r, n);
            let a = left.dot(&right);
            let (q, c) = qr_cp(&a.view(), 1e-11);
            assert_eq!(q.ncols(), r);
            let rebuilt = q.dot(&c);
            assert!(max_abs_diff(&rebuilt.view(), &a.view()) < 1e-10);
            let qtq = dagger(&q.view()).dot(&q);
            assert!(max_abs_diff(&qtq.view(), &eye(r).view()) < 1e-12);
        }
    }

    #[test]
    fn kron_matches_hand_example() {
        let a = array![
            [C64::new(1.0, 0.0), C64::new(0.0, 1.0)],
            [C64::new(0.0, 0.0), C64::new(2.0, 0.0)]
        ];
        let b = array![[C64::new(0.0, 0.0), C64::new(1.0, 0.0)]];
        let k = kron(&a.view(), &b.view());
        assert_eq!(k.dim(), (2, 4));
        assert_eq!(k[[0, 1]], C64::new(1.0, 0.0));
        assert_eq!(k[[0, 3]], C64::new(0.0, 1.0));
        assert_eq!(k[[1, 3]], C64::new(2.0, 0.0));
    }

    #[test]
    fn gram_rank_counts_independent_columns() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let left = random_matrix(&mut rng, 8, 3);
        let right = random_matrix(&mut rng, 3, 5);
        let a = left.dot(&right);
        assert_eq!(gram_rank(&a.view(), 1e-9), 3);
    }
}
