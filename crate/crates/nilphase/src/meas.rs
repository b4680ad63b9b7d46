//! Measurement operators: cocycles, (projective) regular representations,
//! class projectors in both their character-sum and scalar-phase forms,
//! clock/shift operators, and the rank-one abelian measurement basis.
//!
//! Every operator that acts on a group-valued atom is a monomial matrix
//! (one nonzero unit-modulus entry per column); the dense matrices built
//! here are for verification and small-block measurement, while the chain
//! backends consume the factorized [`MonomialOp`] form.

use crate::group::{GroupError, GroupTable};
use crate::linalg;
use crate::repr::{CharacterTable, ClassGroup, ReprError};
use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::path::Path;
use thiserror::Error;

/// Dense operators are materialized only up to this matrix dimension.
pub const DENSE_OP_CAP: usize = 4096;
/// Dense state vectors (and the abelian basis) are capped at this length.
pub const DENSE_VEC_CAP: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum MeasError {
    #[error("invalid cocycle: {0}")]
    InvalidCocycle(String),
    #[error("dense cap exceeded: dimension {0} (limit {1})")]
    DenseCap(usize, usize),
    #[error("unsupported construction: {0}")]
    Unsupported(String),
    #[error("projective matrices are not Hilbert-Schmidt orthogonal")]
    HsOrthogonality,
    #[error(transparent)]
    Repr(#[from] ReprError),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Which side of an entangled-pair site an atom sits on. The symmetry acts
/// on `Left` atoms with the conjugated projective matrices and on `Right`
/// atoms with the plain ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AtomKind {
    Left,
    Right,
}

impl AtomKind {
    /// Sign convention: +1 for `Right`, -1 for `Left` (the exponent carried
    /// by twisting phases).
    pub fn sign(self) -> i32 {
        match self {
            AtomKind::Left => -1,
            AtomKind::Right => 1,
        }
    }
}

// ---------------------------------------------------------------------------
// Cocycles

/// A 2-cocycle γ: G × G → U(1), stored as a flat table.
#[derive(Debug, Clone)]
pub struct Cocycle {
    order: usize,
    gamma: Vec<C64>,
    label: String,
}

/// JSON form: phases as rationals "p/q" meaning e^{2πi p/q}.
#[derive(Debug, Serialize, Deserialize)]
struct CocycleSpec {
    group: String,
    mu: String,
    gamma: Vec<Vec<String>>,
}

impl Cocycle {
    /// The trivial cocycle (all ones).
    pub fn trivial(group: &GroupTable) -> Self {
        let n = group.order();
        Self {
            order: n,
            gamma: vec![C64::new(1.0, 0.0); n * n],
            label: "trivial".into(),
        }
    }

    /// The sign cocycle on a dihedral group of order 2n with n even, read
    /// off the central order-doubling extension: lifting both factors to the
    /// dihedral group of order 4n and reducing the rotation exponent picks
    /// up a central sign exactly when the exponent sum wraps past n.
    pub fn dihedral_nontrivial(group: &GroupTable) -> Result<Self, MeasError> {
        let order = group.order();
        if !group.id().starts_with("dihedral:") || order % 4 != 0 {
            return Err(MeasError::Unsupported(format!(
                "nontrivial cocycle is built in only for dihedral groups of order divisible by 4, not {}",
                group.id()
            )));
        }
        let n = order / 2;
        let mut gamma = vec![C64::new(1.0, 0.0); order * order];
        for a1 in 0..2usize {
            for i1 in 0..n {
                for a2 in 0..2usize {
                    for i2 in 0..n {
                        let g = a1 * n + i1;
                        let h = a2 * n + i2;
                        let lifted = if a2 == 0 {
                            (i1 + i2) % (2 * n)
                        } else {
                            (2 * n - i1 + i2) % (2 * n)
                        };
                        if lifted >= n {
                            gamma[g * order + h] = C64::new(-1.0, 0.0);
                        }
                    }
                }
            }
        }
        let c = Self {
            order,
            gamma,
            label: "sign".into(),
        };
        c.validate(group)?;
        Ok(c)
    }

    /// Checks normalization, unit modulus, and the cocycle condition
    /// γ(g,h)γ(gh,k) = γ(h,k)γ(g,hk).
    pub fn validate(&self, group: &GroupTable) -> Result<(), MeasError> {
        let n = group.order();
        if self.order != n {
            return Err(MeasError::InvalidCocycle(format!(
                "table is {}x{} but the group has order {}",
                self.order, self.order, n
            )));
        }
        for g in 0..n {
            if (self.value(0, g) - 1.0).norm() > 1e-9 || (self.value(g, 0) - 1.0).norm() > 1e-9 {
                return Err(MeasError::InvalidCocycle("not normalized".into()));
            }
            for h in 0..n {
                if (self.value(g, h).norm() - 1.0).abs() > 1e-9 {
                    return Err(MeasError::InvalidCocycle("non-unimodular entry".into()));
                }
            }
        }
        for g in 0..n {
            for h in 0..n {
                for k in 0..n {
                    let lhs = self.value(g, h) * self.value(group.mul(g, h), k);
                    let rhs = self.value(h, k) * self.value(g, group.mul(h, k));
                    if (lhs - rhs).norm() > 1e-9 {
                        return Err(MeasError::InvalidCocycle(format!(
                            "cocycle condition fails at ({}, {}, {})",
                            g, h, k
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn value(&self, g: usize, h: usize) -> C64 {
        self.gamma[g * self.order + h]
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// A commuting pair (g, h) with γ(g,h) ≠ γ(h,g), witnessing that the
    /// cocycle is not a coboundary. One-sided: absence of a witness does
    /// not prove triviality.
    pub fn nontriviality_witness(&self, group: &GroupTable) -> Option<(usize, usize)> {
        let n = group.order();
        for g in 0..n {
            for h in 0..n {
                if group.mul(g, h) == group.mul(h, g)
                    && (self.value(g, h) - self.value(h, g)).norm() > 1e-9
                {
                    return Some((g, h));
                }
            }
        }
        None
    }

    /// Loads from the JSON form, validating against the given group.
    pub fn from_json_str(text: &str, group: &GroupTable) -> Result<Self, MeasError> {
        let spec: CocycleSpec = serde_json::from_str(text)?;
        let n = group.order();
        if spec.gamma.len() != n {
            return Err(MeasError::InvalidCocycle(format!(
                "{} rows for group order {}",
                spec.gamma.len(),
                n
            )));
        }
        let mut gamma = Vec::with_capacity(n * n);
        for row in &spec.gamma {
            if row.len() != n {
                return Err(MeasError::InvalidCocycle("ragged table".into()));
            }
            for cell in row {
                gamma.push(parse_phase(cell)?);
            }
        }
        let c = Self {
            order: n,
            gamma,
            label: spec.mu,
        };
        c.validate(group)?;
        Ok(c)
    }

    pub fn from_json_file(path: &Path, group: &GroupTable) -> Result<Self, MeasError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text, group)
    }

    /// Serializes to the JSON form. Each phase is written as the rational
    /// exponent p/q with the smallest q ≤ 64 that reproduces it.
    pub fn to_json_string(&self, group: &GroupTable) -> Result<String, MeasError> {
        let n = self.order;
        let mut rows = Vec::with_capacity(n);
        for g in 0..n {
            let mut row = Vec::with_capacity(n);
            for h in 0..n {
                row.push(format_phase(self.value(g, h))?);
            }
            rows.push(row);
        }
        let spec = CocycleSpec {
            group: group.id().to_string(),
            mu: self.label.clone(),
            gamma: rows,
        };
        Ok(serde_json::to_string_pretty(&spec)?)
    }
}

fn parse_phase(cell: &str) -> Result<C64, MeasError> {
    let cell = cell.trim();
    let (p, q) = match cell.split_once('/') {
        Some((p, q)) => {
            let p: i64 = p
                .trim()
                .parse()
                .map_err(|_| MeasError::InvalidCocycle(format!("bad phase '{}'", cell)))?;
            let q: i64 = q
                .trim()
                .parse()
                .map_err(|_| MeasError::InvalidCocycle(format!("bad phase '{}'", cell)))?;
            (p, q)
        }
        None => {
            let p: i64 = cell
                .parse()
                .map_err(|_| MeasError::InvalidCocycle(format!("bad phase '{}'", cell)))?;
            (p, 1)
        }
    };
    if q == 0 {
        return Err(MeasError::InvalidCocycle("zero denominator".into()));
    }
    Ok(C64::from_polar(1.0, TAU * p as f64 / q as f64))
}

fn format_phase(z: C64) -> Result<String, MeasError> {
    let angle = z.arg().rem_euclid(TAU) / TAU;
    for q in 1..=64i64 {
        let p = (angle * q as f64).round() as i64;
        let back = C64::from_polar(1.0, TAU * p as f64 / q as f64);
        if (back - z).norm() < 1e-9 {
            return Ok(if p % q == 0 {
                "0".to_string()
            } else {
                format!("{}/{}", p.rem_euclid(q), q)
            });
        }
    }
    Err(MeasError::InvalidCocycle(format!(
        "phase {} has no small rational exponent",
        z
    )))
}

// ---------------------------------------------------------------------------
// Monomial operators

/// A generalized permutation operator on one atom: |h⟩ ↦ phase[h] |perm[h]⟩.
#[derive(Debug, Clone, PartialEq)]
pub struct MonomialOp {
    pub perm: Vec<usize>,
    pub phase: Vec<C64>,
}

impl MonomialOp {
    pub fn identity(dim: usize) -> Self {
        Self {
            perm: (0..dim).collect(),
            phase: vec![C64::new(1.0, 0.0); dim],
        }
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize) -> (usize, C64)) -> Self {
        let mut perm = Vec::with_capacity(dim);
        let mut phase = Vec::with_capacity(dim);
        for h in 0..dim {
            let (p, c) = f(h);
            perm.push(p);
            phase.push(c);
        }
        Self { perm, phase }
    }

    /// Left-regular action |h⟩ ↦ |g∘h⟩.
    pub fn regular(group: &GroupTable, g: usize) -> Self {
        Self::from_fn(group.order(), |h| (group.mul(g, h), C64::new(1.0, 0.0)))
    }

    /// Projective left-regular action |h⟩ ↦ γ(g,h) |g∘h⟩.
    pub fn projective(group: &GroupTable, cocycle: &Cocycle, g: usize) -> Self {
        Self::from_fn(group.order(), |h| (group.mul(g, h), cocycle.value(g, h)))
    }

    /// Entrywise complex conjugate of the projective action.
    pub fn projective_conj(group: &GroupTable, cocycle: &Cocycle, g: usize) -> Self {
        Self::from_fn(group.order(), |h| {
            (group.mul(g, h), cocycle.value(g, h).conj())
        })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Image of basis label `s`: the target label and the attached phase.
    pub fn image(&self, s: usize) -> (usize, C64) {
        (self.perm[s], self.phase[s])
    }

    pub fn dense(&self) -> Array2<C64> {
        let d = self.dim();
        let mut m = Array2::zeros((d, d));
        for h in 0..d {
            m[[self.perm[h], h]] = self.phase[h];
        }
        m
    }

    /// Composition self ∘ other (apply `other` first).
    pub fn compose(&self, other: &MonomialOp) -> Self {
        Self::from_fn(self.dim(), |h| {
            let (p1, c1) = (other.perm[h], other.phase[h]);
            (self.perm[p1], self.phase[p1] * c1)
        })
    }

    pub fn adjoint(&self) -> Self {
        let d = self.dim();
        let mut perm = vec![0usize; d];
        let mut phase = vec![C64::new(0.0, 0.0); d];
        for h in 0..d {
            perm[self.perm[h]] = h;
            phase[self.perm[h]] = self.phase[h].conj();
        }
        Self { perm, phase }
    }
}

// ---------------------------------------------------------------------------
// Unitary representations

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RepKind {
    Regular,
    ProjectiveRegular,
    EffectiveDoubled,
    Explicit,
}

/// A family of unitary matrices indexed by group elements. Linear kinds
/// satisfy U_g U_h = U_{gh}; the projective kind picks up the cocycle.
#[derive(Debug, Clone)]
pub struct UnitaryRep {
    pub kind: RepKind,
    dim: usize,
    matrices: Vec<Array2<C64>>,
}

impl UnitaryRep {
    /// Left-regular permutation representation.
    pub fn regular(group: &GroupTable) -> Result<Self, MeasError> {
        let n = group.order();
        if n > 64 {
            return Err(MeasError::DenseCap(n, 64));
        }
        let matrices = (0..n)
            .map(|g| MonomialOp::regular(group, g).dense())
            .collect();
        Ok(Self {
            kind: RepKind::Regular,
            dim: n,
            matrices,
        })
    }

    /// Projective regular representation for the given cocycle. Verifies
    /// Hilbert-Schmidt orthogonality of the matrices.
    pub fn projective_regular(group: &GroupTable, cocycle: &Cocycle) -> Result<Self, MeasError> {
        let n = group.order();
        if n > 64 {
            return Err(MeasError::DenseCap(n, 64));
        }
        let matrices: Vec<Array2<C64>> = (0..n)
            .map(|g| MonomialOp::projective(group, cocycle, g).dense())
            .collect();
        for g in 0..n {
            for h in 0..n {
                let prod = linalg::dagger(&matrices[g].view()).dot(&matrices[h]);
                let tr: C64 = (0..n).map(|i| prod[[i, i]]).sum();
                let expect = if g == h { n as f64 } else { 0.0 };
                if (tr - expect).norm() > 1e-9 {
                    return Err(MeasError::HsOrthogonality);
                }
            }
        }
        Ok(Self {
            kind: RepKind::ProjectiveRegular,
            dim: n,
            matrices,
        })
    }

    /// The linear representation conj(ω_g) ⊗ ω_g acting on a (left, right)
    /// atom pair; the cocycle phases cancel. Verified linear.
    pub fn effective_doubled(group: &GroupTable, cocycle: &Cocycle) -> Result<Self, MeasError> {
        let n = group.order();
        if n * n > DENSE_OP_CAP {
            return Err(MeasError::DenseCap(n * n, DENSE_OP_CAP));
        }
        let matrices: Vec<Array2<C64>> = (0..n)
            .map(|g| {
                let w = MonomialOp::projective(group, cocycle, g).dense();
                let wc = w.mapv(|z| z.conj());
                linalg::kron(&wc.view(), &w.view())
            })
            .collect();
        let rep = Self {
            kind: RepKind::EffectiveDoubled,
            dim: n * n,
            matrices,
        };
        rep.verify_linear(group)?;
        Ok(rep)
    }

    /// Direct sum of explicit irrep blocks. Supports 1D irreps of any group
    /// and the 2D irreps of dihedral groups (rotation matrices matched to
    /// the character row).
    pub fn explicit_irrep_sum(
        group: &GroupTable,
        ct: &CharacterTable,
        irreps: &[usize],
    ) -> Result<Self, MeasError> {
        let n = group.order();
        let total: usize = irreps.iter().map(|&a| ct.dim(a)).sum();
        let mut matrices = Vec::with_capacity(n);
        for _ in 0..n {
            matrices.push(Array2::<C64>::zeros((total, total)));
        }
        let mut offset = 0usize;
        for &alpha in irreps {
            match ct.dim(alpha) {
                1 => {
                    for g in 0..n {
                        matrices[g][[offset, offset]] = ct.value_at(alpha, g);
                    }
                    offset += 1;
                }
                2 => {
                    let blocks = dihedral_2d_blocks(group, ct, alpha)?;
                    for g in 0..n {
                        for i in 0..2 {
                            for j in 0..2 {
                                matrices[g][[offset + i, offset + j]] = blocks[g][[i, j]];
                            }
                        }
                    }
                    offset += 2;
                }
                d => {
                    return Err(MeasError::Unsupported(format!(
                        "no explicit matrices for a {}-dimensional irrep",
                        d
                    )));
                }
            }
        }
        let rep = Self {
            kind: RepKind::Explicit,
            dim: total,
            matrices,
        };
        rep.verify_linear(group)?;
        Ok(rep)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self, g: usize) -> &Array2<C64> {
        &self.matrices[g]
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    /// Checks U_g U_h = U_{gh} and unitarity.
    pub fn verify_linear(&self, group: &GroupTable) -> Result<(), MeasError> {
        let n = group.order();
        for g in 0..n {
            let gd = linalg::dagger(&self.matrices[g].view()).dot(&self.matrices[g]);
            if linalg::max_abs_diff(&gd.view(), &linalg::eye(self.dim).view()) > 1e-9 {
                return Err(MeasError::Unsupported(format!(
                    "matrix {} is not unitary",
                    g
                )));
            }
            for h in 0..n {
                let prod = self.matrices[g].dot(&self.matrices[h]);
                let target = &self.matrices[group.mul(g, h)];
                if linalg::max_abs_diff(&prod.view(), &target.view()) > 1e-9 {
                    return Err(MeasError::Unsupported(format!(
                        "not a linear representation at pair ({}, {})",
                        g, h
                    )));
                }
            }
        }
        Ok(())
    }

    /// Checks ω_g ω_h = γ(g,h) ω_{gh}.
    pub fn verify_projective(&self, group: &GroupTable, cocycle: &Cocycle) -> Result<(), MeasError> {
        let n = group.order();
        for g in 0..n {
            for h in 0..n {
                let prod = self.matrices[g].dot(&self.matrices[h]);
                let target = self.matrices[group.mul(g, h)].mapv(|z| z * cocycle.value(g, h));
                if linalg::max_abs_diff(&prod.view(), &target.view()) > 1e-9 {
                    return Err(MeasError::Unsupported(format!(
                        "projectivity fails at pair ({}, {})",
                        g, h
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Explicit 2x2 blocks for a 2D irrep of a dihedral group: rotations map to
/// diagonal phase pairs, reflections to antidiagonal ones. The rotation
/// frequency is matched against the character row.
fn dihedral_2d_blocks(
    group: &GroupTable,
    ct: &CharacterTable,
    alpha: usize,
) -> Result<Vec<Array2<C64>>, MeasError> {
    if !group.id().starts_with("dihedral:") {
        return Err(MeasError::Unsupported(
            "explicit 2D blocks are available only for dihedral groups".into(),
        ));
    }
    let order = group.order();
    let n = order / 2;
    for k in 1..n {
        let chi_ok = (0..order).all(|g| {
            let (a, i) = (g / n, g % n);
            let tr = if a == 0 {
                2.0 * (TAU * (k * i) as f64 / n as f64).cos()
            } else {
                0.0
            };
            (ct.value_at(alpha, g) - tr).norm() < 1e-9
        });
        if !chi_ok {
            continue;
        }
        let omega = |j: usize| C64::from_polar(1.0, TAU * (k * j % n) as f64 / n as f64);
        let blocks = (0..order)
            .map(|g| {
                let (a, i) = (g / n, g % n);
                let mut m = Array2::<C64>::zeros((2, 2));
                if a == 0 {
                    m[[0, 0]] = omega(i);
                    m[[1, 1]] = omega(i).conj();
                } else {
                    m[[0, 1]] = omega(i).conj();
                    m[[1, 0]] = omega(i);
                }
                m
            })
            .collect();
        return Ok(blocks);
    }
    Err(MeasError::Unsupported(format!(
        "no rotation frequency matches the character row of irrep {}",
        alpha
    )))
}

// ---------------------------------------------------------------------------
// Class projectors

/// A class projector in factorized form: P = Σ_g coeff(g) · U_g^{⊗n}, valid
/// for any number of sites and any linear representation of the symmetry.
#[derive(Debug, Clone)]
pub struct ClassRecipe {
    pub level: usize,
    pub class: usize,
    /// (group element, coefficient); elements with zero coefficient omitted.
    pub terms: Vec<(usize, C64)>,
}

impl ClassRecipe {
    /// Character-sum form: coeff(g) = Σ_{α in class} d_α conj(χ^α(g)) / |G|,
    /// summed over the whole group.
    pub fn from_characters(ct: &CharacterTable, icg: &ClassGroup, class: usize) -> Self {
        let n = ct.group_order();
        let mut terms = Vec::new();
        for g in 0..n {
            let mut coeff = C64::new(0.0, 0.0);
            for &alpha in &icg.classes[class] {
                coeff += ct.value_at(alpha, g).conj() * (ct.dim(alpha) as f64);
            }
            coeff /= n as f64;
            if coeff.norm() > 1e-15 {
                terms.push((g, coeff));
            }
        }
        Self {
            level: icg.level,
            class,
            terms,
        }
    }

    /// Scalar-phase form: coeff(g) = conj(φ_[α]([g])) / |G_{m-1}|, summed
    /// over g ∈ G_{m-1} only. Must agree with the character-sum form as an
    /// operator on any linear representation.
    pub fn from_scalar_phases(icg: &ClassGroup, class: usize) -> Self {
        let size = icg.h_members.len() as f64;
        let terms = icg
            .h_members
            .iter()
            .map(|&g| {
                let phi = icg.phase_char(class, g).expect("member of G_{m-1}");
                (g, phi.conj() / size)
            })
            .collect();
        Self {
            level: icg.level,
            class,
            terms,
        }
    }

    /// Dense materialization on `n` sites of the given representation.
    pub fn materialize(&self, rep: &UnitaryRep, n_sites: usize) -> Result<ClassProjector, MeasError> {
        let dim = rep
            .dim()
            .checked_pow(n_sites as u32)
            .filter(|&d| d <= DENSE_OP_CAP)
            .ok_or(MeasError::DenseCap(usize::MAX, DENSE_OP_CAP))?;
        let mut matrix = Array2::<C64>::zeros((dim, dim));
        for &(g, coeff) in &self.terms {
            let mut term = rep.matrix(g).clone();
            for _ in 1..n_sites {
                term = linalg::kron(&term.view(), &rep.matrix(g).view());
            }
            matrix = matrix + term.mapv(|z| z * coeff);
        }
        Ok(ClassProjector {
            level: self.level,
            class: self.class,
            n_sites,
            site_dim: rep.dim(),
            matrix,
        })
    }
}

/// A dense class projector on a block of sites.
#[derive(Debug, Clone)]
pub struct ClassProjector {
    pub level: usize,
    pub class: usize,
    pub n_sites: usize,
    pub site_dim: usize,
    pub matrix: Array2<C64>,
}

impl ClassProjector {
    /// Checks idempotence, self-adjointness, and commutation with the
    /// diagonal symmetry action. Returns the worst deviation.
    pub fn verify(&self, rep: &UnitaryRep, group: &GroupTable) -> f64 {
        let p = &self.matrix;
        let mut worst = linalg::max_abs_diff(&p.dot(p).view(), &p.view());
        let pd = linalg::dagger(&p.view());
        worst = worst.max(linalg::max_abs_diff(&pd.view(), &p.view()));
        for g in 0..group.order() {
            let mut u = rep.matrix(g).clone();
            for _ in 1..self.n_sites {
                u = linalg::kron(&u.view(), &rep.matrix(g).view());
            }
            let lhs = p.dot(&u);
            let rhs = u.dot(p);
            worst = worst.max(linalg::max_abs_diff(&lhs.view(), &rhs.view()));
        }
        worst
    }

    /// Rank read off the trace (exact for projectors).
    pub fn rank(&self) -> usize {
        let tr: C64 = (0..self.matrix.nrows()).map(|i| self.matrix[[i, i]]).sum();
        tr.re.round() as usize
    }
}

/// Result of checking that the product of two class projectors is supported
/// inside the projector of the product class.
#[derive(Debug, Clone)]
pub struct ContainmentReport {
    pub contained: bool,
    pub equal: bool,
    pub max_violation: f64,
}

/// Checks (P_a ⊗ P_b) · P_prod = P_a ⊗ P_b, where `p_prod` must be the
/// projector of the product class on the combined block. Also reports
/// whether the containment is an equality.
pub fn verify_projector_containment(
    p_a: &ClassProjector,
    p_b: &ClassProjector,
    p_prod: &ClassProjector,
) -> ContainmentReport {
    let tensor = linalg::kron(&p_a.matrix.view(), &p_b.matrix.view());
    let projected = tensor.dot(&p_prod.matrix);
    let max_violation = linalg::max_abs_diff(&projected.view(), &tensor.view());
    let equal = linalg::max_abs_diff(&tensor.view(), &p_prod.matrix.view()) < 1e-9;
    ContainmentReport {
        contained: max_violation < 1e-9,
        equal,
        max_violation,
    }
}

// ---------------------------------------------------------------------------
// Clock and shift operators

/// Diagonal label operators Z^α (one per 1D irrep) and right-shift
/// operators X_g on one atom. They satisfy X_g X_h = X_{hg},
/// [U_g, X_h] = 0, and U_g Z^α = χ^α(g) Z^α U_g for the left-regular U.
#[derive(Debug, Clone)]
pub struct ClockShift {
    /// (irrep id, diagonal operator) for each 1D irrep.
    pub z_ops: Vec<(usize, Array2<C64>)>,
    /// x_ops[g]: |h⟩ ↦ |h∘g⟩.
    pub x_ops: Vec<Array2<C64>>,
}

/// One-atom monomial form of the right shift |h⟩ ↦ |h∘g⟩.
pub fn shift_op(group: &GroupTable, g: usize) -> MonomialOp {
    MonomialOp::from_fn(group.order(), |h| (group.mul(h, g), C64::new(1.0, 0.0)))
}

/// One-atom monomial form of Z^α = Σ_h χ^α(h⁻¹) |h⟩⟨h| for a 1D irrep.
pub fn clock_op(group: &GroupTable, ct: &CharacterTable, alpha: usize) -> MonomialOp {
    assert_eq!(ct.dim(alpha), 1);
    MonomialOp::from_fn(group.order(), |h| (h, ct.value_at(alpha, group.inv(h))))
}

pub fn clock_shift(group: &GroupTable, ct: &CharacterTable) -> Result<ClockShift, MeasError> {
    let n = group.order();
    if n > 64 {
        return Err(MeasError::DenseCap(n, 64));
    }
    let z_ops = (0..ct.num_irreps())
        .filter(|&a| ct.dim(a) == 1)
        .map(|a| (a, clock_op(group, ct, a).dense()))
        .collect();
    let x_ops = (0..n).map(|g| shift_op(group, g).dense()).collect();
    Ok(ClockShift { z_ops, x_ops })
}

// ---------------------------------------------------------------------------
// Abelian measurement basis

/// Label of an abelian-basis vector: a 1D irrep and the shift applied to
/// each atom after the first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbelianLabel {
    pub alpha: usize,
    pub shifts: Vec<usize>,
}

/// The orthonormal family (Z^α ⊗ X_{g_2} ⊗ … ⊗ X_{g_n}) applied to the
/// uniform group superposition Σ_x |x, x, …, x⟩, unit-normalized. Each
/// vector is an eigenvector of U_g^{⊗n} (left-regular U) with eigenvalue
/// χ^α(g); together they span the simultaneous eigenspaces with 1D-irrep
/// eigenvalue patterns.
pub fn abelian_basis(
    group: &GroupTable,
    ct: &CharacterTable,
    n_atoms: usize,
) -> Result<Vec<(AbelianLabel, Array1<C64>)>, MeasError> {
    let n = group.order();
    let dim = n
        .checked_pow(n_atoms as u32)
        .filter(|&d| d <= DENSE_VEC_CAP)
        .ok_or(MeasError::DenseCap(usize::MAX, DENSE_VEC_CAP))?;
    let one_dim: Vec<usize> = (0..ct.num_irreps()).filter(|&a| ct.dim(a) == 1).collect();
    let norm = 1.0 / (n as f64).sqrt();
    let mut out = Vec::new();
    let mut shifts = vec![0usize; n_atoms.saturating_sub(1)];
    loop {
        for &alpha in &one_dim {
            let mut v = Array1::<C64>::zeros(dim);
            for x in 0..n {
                let mut idx = x;
                for &s in &shifts {
                    idx = idx * n + group.mul(x, s);
                }
                v[idx] = ct.value_at(alpha, group.inv(x)) * norm;
            }
            out.push((
                AbelianLabel {
                    alpha,
                    shifts: shifts.clone(),
                },
                v,
            ));
        }
        // Advance the shift tuple odometer.
        let mut pos = shifts.len();
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            shifts[pos] += 1;
            if shifts[pos] < n {
                break;
            }
            shifts[pos] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::repr::StructureData;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn dihedral_cocycles_validate_with_witness() {
        for order in [8usize, 16, 32] {
            let g = GroupTable::dihedral(order);
            let c = Cocycle::dihedral_nontrivial(&g).unwrap();
            let (a, b) = c.nontriviality_witness(&g).expect("witness");
            assert_eq!(g.mul(a, b), g.mul(b, a));
            assert!((c.value(a, b) + c.value(b, a)).norm() < 1e-12);
            assert!(Cocycle::trivial(&g).nontriviality_witness(&g).is_none());
        }
        // Odd-n dihedral groups have no builtin nontrivial cocycle.
        assert!(Cocycle::dihedral_nontrivial(&GroupTable::dihedral(6)).is_err());
    }

    #[test]
    fn cocycle_json_round_trip() {
        let g = GroupTable::dihedral(8);
        let c = Cocycle::dihedral_nontrivial(&g).unwrap();
        let text = c.to_json_string(&g).unwrap();
        let back = Cocycle::from_json_str(&text, &g).unwrap();
        for x in 0..8 {
            for y in 0..8 {
                assert!((c.value(x, y) - back.value(x, y)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn regular_rep_basics() {
        let z2 = GroupTable::cyclic(2);
        let rep = UnitaryRep::regular(&z2).unwrap();
        let x = array![
            [C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
            [C64::new(1.0, 0.0), C64::new(0.0, 0.0)]
        ];
        assert!(linalg::max_abs_diff(&rep.matrix(1).view(), &x.view()) < 1e-12);

        let d8 = GroupTable::dihedral(8);
        let rep8 = UnitaryRep::regular(&d8).unwrap();
        rep8.verify_linear(&d8).unwrap();
        for g in 0..8 {
            let tr: C64 = (0..8).map(|i| rep8.matrix(g)[[i, i]]).sum();
            let expect = if g == 0 { 8.0 } else { 0.0 };
            assert!((tr - expect).norm() < 1e-12);
            if g != 0 {
                // Faithful: no non-identity element acts as the identity.
                assert!(
                    linalg::max_abs_diff(&rep8.matrix(g).view(), &linalg::eye(8).view()) > 0.5
                );
            }
        }
    }

    #[test]
    fn projective_rep_orthogonality_and_projectivity() {
        let d8 = GroupTable::dihedral(8);
        let c = Cocycle::dihedral_nontrivial(&d8).unwrap();
        let rep = UnitaryRep::projective_regular(&d8, &c).unwrap();
        rep.verify_projective(&d8, &c).unwrap();
        // Trivial cocycle reduces to the regular representation.
        let triv = UnitaryRep::projective_regular(&d8, &Cocycle::trivial(&d8)).unwrap();
        let reg = UnitaryRep::regular(&d8).unwrap();
        for g in 0..8 {
            assert!(linalg::max_abs_diff(&triv.matrix(g).view(), &reg.matrix(g).view()) < 1e-12);
        }
    }

    #[test]
    fn effective_doubled_is_linear() {
        let d8 = GroupTable::dihedral(8);
        let c = Cocycle::dihedral_nontrivial(&d8).unwrap();
        let rep = UnitaryRep::effective_doubled(&d8, &c).unwrap();
        assert_eq!(rep.dim(), 64);
        let proj = UnitaryRep::projective_regular(&d8, &c).unwrap();
        for g in 0..8 {
            let tr_u: C64 = (0..64).map(|i| rep.matrix(g)[[i, i]]).sum();
            let tr_w: C64 = (0..8).map(|i| proj.matrix(g)[[i, i]]).sum();
            assert!((tr_u - tr_w.norm_sqr()).norm() < 1e-9);
        }
    }

    fn check_projectors_for(group: GroupTable, n_sites_max: usize) {
        let data = StructureData::compute(group).unwrap();
        let rep = UnitaryRep::regular(&data.group).unwrap();
        for m in 1..=data.depth() {
            let icg = data.class_group(m);
            for class in 0..icg.num_classes() {
                let r1 = ClassRecipe::from_characters(&data.ct, icg, class);
                let r2 = ClassRecipe::from_scalar_phases(icg, class);
                for n_sites in 1..=n_sites_max {
                    if rep.dim().pow(n_sites as u32) > DENSE_OP_CAP {
                        continue;
                    }
                    let p1 = r1.materialize(&rep, n_sites).unwrap();
                    let p2 = r2.materialize(&rep, n_sites).unwrap();
                    assert!(
                        linalg::max_abs_diff(&p1.matrix.view(), &p2.matrix.view()) < 1e-9,
                        "construction mismatch at level {} class {} n {}",
                        m,
                        class,
                        n_sites
                    );
                    assert!(p1.verify(&rep, &data.group) < 1e-9);
                }
            }
        }
    }

    #[test]
    fn projector_constructions_agree_d8() {
        check_projectors_for(GroupTable::dihedral(8), 2);
    }

    #[test]
    fn projector_constructions_agree_d16() {
        check_projectors_for(GroupTable::dihedral(16), 2);
    }

    #[test]
    fn top_level_projectors_sum_to_identity() {
        let d8 = GroupTable::dihedral(8);
        let data = StructureData::compute(d8).unwrap();
        let rep = UnitaryRep::regular(&data.group).unwrap();
        let icg = data.class_group(data.depth());
        let mut sum = Array2::<C64>::zeros((8, 8));
        for class in 0..icg.num_classes() {
            let p = ClassRecipe::from_characters(&data.ct, icg, class)
                .materialize(&rep, 1)
                .unwrap();
            sum = sum + p.matrix;
        }
        assert!(linalg::max_abs_diff(&sum.view(), &linalg::eye(8).view()) < 1e-9);
    }

    #[test]
    fn containment_holds_for_all_d8_pairs() {
        let d8 = GroupTable::dihedral(8);
        let data = StructureData::compute(d8).unwrap();
        let rep = UnitaryRep::regular(&data.group).unwrap();
        for m in 1..=data.depth() {
            let icg = data.class_group(m);
            let projectors: Vec<ClassProjector> = (0..icg.num_classes())
                .map(|c| {
                    ClassRecipe::from_characters(&data.ct, icg, c)
                        .materialize(&rep, 1)
                        .unwrap()
                })
                .collect();
            let pairs2: Vec<Vec<ClassProjector>> = (0..icg.num_classes())
                .map(|c| {
                    vec![ClassRecipe::from_characters(&data.ct, icg, c)
                        .materialize(&rep, 2)
                        .unwrap()]
                })
                .collect();
            for a in 0..icg.num_classes() {
                for b in 0..icg.num_classes() {
                    let prod = icg.mul(a, b);
                    let report = verify_projector_containment(
                        &projectors[a],
                        &projectors[b],
                        &pairs2[prod][0],
                    );
                    assert!(report.contained, "level {} pair ({}, {})", m, a, b);
                }
            }
        }
    }

    #[test]
    fn explicit_sum_reproduces_strict_containment() {
        let d16 = GroupTable::dihedral(16);
        let data = StructureData::compute(d16).unwrap();
        // Trivial irrep plus the two faithful 2D irreps.
        let rep = UnitaryRep::explicit_irrep_sum(&data.group, &data.ct, &[0, 5, 6]).unwrap();
        assert_eq!(rep.dim(), 5);
        let icg = data.class_group(3);
        let p_id_1 = ClassRecipe::from_characters(&data.ct, icg, 0)
            .materialize(&rep, 1)
            .unwrap();
        let p_top_1 = ClassRecipe::from_characters(&data.ct, icg, 1)
            .materialize(&rep, 1)
            .unwrap();
        assert_eq!(p_id_1.rank(), 1);
        assert_eq!(p_top_1.rank(), 4);
        let p_id_2 = ClassRecipe::from_characters(&data.ct, icg, 0)
            .materialize(&rep, 2)
            .unwrap();
        let report = verify_projector_containment(&p_top_1, &p_top_1, &p_id_2);
        assert!(report.contained);
        assert!(!report.equal);
    }

    #[test]
    fn clock_shift_relations() {
        let z2 = GroupTable::cyclic(2);
        let ct2 = CharacterTable::compute(&z2).unwrap();
        let cs = clock_shift(&z2, &ct2).unwrap();
        assert_eq!(cs.z_ops.len(), 2);
        let z = &cs.z_ops[1].1;
        assert!((z[[0, 0]] - 1.0).norm() < 1e-12 && (z[[1, 1]] + 1.0).norm() < 1e-12);

        let d8 = GroupTable::dihedral(8);
        let ct8 = CharacterTable::compute(&d8).unwrap();
        let cs8 = clock_shift(&d8, &ct8).unwrap();
        assert_eq!(cs8.z_ops.len(), 4);
        // Mutual orthogonality of the diagonal label operators.
        for (i, (_, za)) in cs8.z_ops.iter().enumerate() {
            for (j, (_, zb)) in cs8.z_ops.iter().enumerate() {
                let prod = linalg::dagger(&za.view()).dot(zb);
                let tr: C64 = (0..8).map(|k| prod[[k, k]]).sum();
                let expect = if i == j { 8.0 } else { 0.0 };
                assert!((tr - expect).norm() < 1e-9);
            }
        }
        let reg = UnitaryRep::regular(&d8).unwrap();
        for g in 0..8 {
            for h in 0..8 {
                // X_g X_h = X_{hg}
                let lhs = cs8.x_ops[g].dot(&cs8.x_ops[h]);
                assert!(
                    linalg::max_abs_diff(&lhs.view(), &cs8.x_ops[d8.mul(h, g)].view()) < 1e-12
                );
                // [U_g, X_h] = 0
                let c1 = reg.matrix(g).dot(&cs8.x_ops[h]);
                let c2 = cs8.x_ops[h].dot(reg.matrix(g));
                assert!(linalg::max_abs_diff(&c1.view(), &c2.view()) < 1e-12);
            }
            // U_g Z^α = χ^α(g) Z^α U_g for a 1D irrep.
            for (alpha, z) in &cs8.z_ops {
                let lhs = reg.matrix(g).dot(z);
                let rhs = z.dot(reg.matrix(g)).mapv(|v| v * ct8.value_at(*alpha, g));
                assert!(linalg::max_abs_diff(&lhs.view(), &rhs.view()) < 1e-9);
            }
        }
    }

    #[test]
    fn abelian_basis_bell_family() {
        let z2 = GroupTable::cyclic(2);
        let ct = CharacterTable::compute(&z2).unwrap();
        let basis = abelian_basis(&z2, &ct, 2).unwrap();
        assert_eq!(basis.len(), 4);
        let s = 1.0 / 2.0f64.sqrt();
        for (label, v) in &basis {
            let expect: Vec<C64> = match (label.alpha, label.shifts[0]) {
                (0, 0) => vec![s.into(), 0.0.into(), 0.0.into(), s.into()],
                (1, 0) => vec![s.into(), 0.0.into(), 0.0.into(), (-s).into()],
                (0, 1) => vec![0.0.into(), s.into(), s.into(), 0.0.into()],
                (1, 1) => vec![0.0.into(), s.into(), (-s).into(), 0.0.into()],
                _ => panic!("unexpected label"),
            };
            for (a, b) in v.iter().zip(expect.iter()) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn abelian_basis_orthonormal_eigenvectors() {
        let d8 = GroupTable::dihedral(8);
        let data = StructureData::compute(d8).unwrap();
        let basis = abelian_basis(&data.group, &data.ct, 2).unwrap();
        assert_eq!(basis.len(), 4 * 8);
        // Orthonormality.
        for (i, (_, vi)) in basis.iter().enumerate() {
            for (j, (_, vj)) in basis.iter().enumerate() {
                let dot: C64 = vi.iter().zip(vj.iter()).map(|(a, b)| a.conj() * b).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).norm() < 1e-9);
            }
        }
        // Eigenvector property on random pairs.
        let reg = UnitaryRep::regular(&data.group).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..100 {
            let g = rng.gen_range(0..8);
            let (label, v) = &basis[rng.gen_range(0..basis.len())];
            let u2 = linalg::kron(&reg.matrix(g).view(), &reg.matrix(g).view());
            let uv = u2.dot(v);
            let scaled = v.mapv(|z| z * data.ct.value_at(label.alpha, g));
            let diff: f64 = uv
                .iter()
                .zip(scaled.iter())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(diff < 1e-9);
        }
    }

    #[test]
    fn abelian_basis_spans_projector_images() {
        let d8 = GroupTable::dihedral(8);
        let data = StructureData::compute(d8).unwrap();
        let rep = UnitaryRep::regular(&data.group).unwrap();
        let icg1 = data.class_group(1);
        let basis = abelian_basis(&data.group, &data.ct, 2).unwrap();
        for class in 0..icg1.num_classes() {
            let alpha = icg1.classes[class][0];
            let p = ClassRecipe::from_characters(&data.ct, icg1, class)
                .materialize(&rep, 2)
                .unwrap();
            let members: Vec<&Array1<C64>> = basis
                .iter()
                .filter(|(l, _)| l.alpha == alpha)
                .map(|(_, v)| v)
                .collect();
            assert_eq!(members.len(), p.rank());
            for v in members {
                let pv = p.matrix.dot(v);
                let diff: f64 = pv
                    .iter()
                    .zip(v.iter())
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max);
                assert!(diff < 1e-9);
            }
        }
    }
}
