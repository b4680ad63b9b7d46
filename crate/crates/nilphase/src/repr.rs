//! Character tables, the level structure of irreps induced by the lower
//! central series, and the abelian group formed by irrep equivalence classes
//! at each level.
//!
//! Level m collects the irreps whose kernel contains G_m. Two irreps of
//! level m are equivalent when one appears in the tensor product of the
//! other with a level-(m-1) irrep; the classes multiply through tensor
//! decomposition and form an abelian group isomorphic to G_{m-1}/G_m. This
//! module computes all of that exactly (up to float snapping) and can verify
//! the isomorphism by brute force.

use crate::group::{GroupError, GroupTable, LowerCentralSeries, QuotientGroup, Subgroup};
use crate::linalg;
use ndarray::Array2;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::collections::BTreeMap;
use std::f64::consts::TAU;
use thiserror::Error;

/// Tolerance for exact-value snapping of character entries.
const SNAP_TOL: f64 = 1e-9;
/// Tolerance for integer decisions (multiplicities, kernel membership).
const INT_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ReprError {
    #[error("character table computation failed to converge: {0}")]
    ConvergenceFailure(String),
    #[error("non-integer multiplicity {value} for irreps ({alpha}, {beta}) -> {gamma}")]
    NonIntegerMultiplicity {
        alpha: usize,
        beta: usize,
        gamma: usize,
        value: f64,
    },
    #[error("irrep lookup failed: {0}")]
    NotFound(String),
    #[error("inconsistent equivalence classes: {0}")]
    InconsistentClasses(String),
    #[error(transparent)]
    Group(#[from] GroupError),
}

/// Full complex character table of a finite group, rows in a canonical
/// order: by dimension, then descending lexicographically on the value
/// vector over the canonical conjugacy-class order. Row 0 is always the
/// trivial irrep.
#[derive(Debug, Clone)]
pub struct CharacterTable {
    group_order: usize,
    classes: Vec<Vec<usize>>,
    class_of: Vec<usize>,
    class_sizes: Vec<usize>,
    dims: Vec<usize>,
    /// values[(irrep, class)]
    values: Array2<C64>,
}

impl CharacterTable {
    /// Computes the table by simultaneous diagonalization of the class-sum
    /// algebra. The weighted class matrices form a commuting normal family;
    /// a random member of the family is split into commuting Hermitian
    /// parts and eigendecomposed, and character rows are read off the
    /// eigenvectors. Deterministic: the random coefficients come from a
    /// fixed seed sequence, retried on (rare) eigenvalue collisions.
    pub fn compute(group: &GroupTable) -> Result<Self, ReprError> {
        let n = group.order();
        let classes = group.conjugacy_classes();
        let k = classes.len();
        let mut class_of = vec![0usize; n];
        for (ci, cls) in classes.iter().enumerate() {
            for &g in cls {
                class_of[g] = ci;
            }
        }
        let class_sizes: Vec<usize> = classes.iter().map(|c| c.len()).collect();
        let reps: Vec<usize> = classes.iter().map(|c| c[0]).collect();
        let is_rep = {
            let mut v = vec![false; n];
            for &r in &reps {
                v[r] = true;
            }
            v
        };
        let roots = unit_roots(group.exponent());

        let mut last_err = String::new();
        for attempt in 0..20u64 {
            let mut rng = ChaCha12Rng::seed_from_u64(0xC0FFEE + attempt);
            let coeff: Vec<C64> = (0..k)
                .map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                .collect();
            // One member of the weighted class-sum family:
            // S[j][l] = sum_i coeff[i] * a_{ijl} * sqrt(|C_l| / |C_j|)
            // where a_{ijl} counts pairs (x in C_i, y in C_j) with x*y equal
            // to the fixed representative of C_l.
            let mut s = Array2::<C64>::zeros((k, k));
            for x in 0..n {
                let i = class_of[x];
                for y in 0..n {
                    let z = group.mul(x, y);
                    if is_rep[z] {
                        let j = class_of[y];
                        let l = class_of[z];
                        let w = (class_sizes[l] as f64 / class_sizes[j] as f64).sqrt();
                        s[[j, l]] += coeff[i] * w;
                    }
                }
            }
            let sd = linalg::dagger(&s.view());
            let h1 = (&s + &sd).mapv(|z| z * 0.5);
            let h2 = (&s - &sd).mapv(|z| z * C64::new(0.0, -0.5));
            let key = &h1 + &h2.mapv(|z| z * 2.0f64.sqrt());
            let (vals, vecs) = match linalg::herm_eig(&key.view()) {
                Ok(v) => v,
                Err(e) => {
                    last_err = e;
                    continue;
                }
            };
            let spread = vals
                .first()
                .copied()
                .unwrap_or(0.0)
                .max(1.0);
            let min_gap = vals
                .windows(2)
                .map(|w| (w[0] - w[1]).abs())
                .fold(f64::INFINITY, f64::min);
            if k > 1 && min_gap < 1e-8 * spread.abs().max(1.0) {
                last_err = format!("eigenvalue collision (gap {:.2e})", min_gap);
                continue;
            }
            match Self::rows_from_eigenvectors(
                group,
                &classes,
                &class_sizes,
                &class_of,
                &vecs,
                &roots,
            ) {
                Ok(table) => return Ok(table),
                Err(e) => {
                    last_err = e;
                    continue;
                }
            }
        }
        Err(ReprError::ConvergenceFailure(last_err))
    }

    fn rows_from_eigenvectors(
        group: &GroupTable,
        classes: &[Vec<usize>],
        class_sizes: &[usize],
        class_of: &[usize],
        vecs: &Array2<C64>,
        roots: &[C64],
    ) -> Result<Self, String> {
        let n = group.order();
        let k = classes.len();
        let mut rows: Vec<(usize, Vec<C64>)> = Vec::with_capacity(k);
        for t in 0..k {
            // Undo the weighting, normalize so the identity-class entry is 1.
            let mut omega: Vec<C64> = (0..k)
                .map(|j| vecs[[j, t]] * (class_sizes[j] as f64).sqrt())
                .collect();
            let w0 = omega[0];
            if w0.norm() < 1e-10 {
                return Err("eigenvector vanishes on the identity class".into());
            }
            for w in omega.iter_mut() {
                *w /= w0;
            }
            let denom: f64 = (0..k)
                .map(|j| omega[j].norm_sqr() / class_sizes[j] as f64)
                .sum();
            let dim_f = (n as f64 / denom).sqrt();
            let dim = dim_f.round();
            if (dim_f - dim).abs() > INT_TOL || dim < 1.0 {
                return Err(format!("non-integer irrep dimension {}", dim_f));
            }
            let chi: Vec<C64> = (0..k)
                .map(|j| snap(omega[j] * dim / class_sizes[j] as f64, roots))
                .collect();
            rows.push((dim as usize, chi));
        }
        // Canonical order: dimension ascending, then descending lexicographic
        // on the (re, im) pairs rounded to 1e-6.
        rows.sort_by(|a, b| {
            a.0.cmp(&b.0).then_with(|| {
                let ka: Vec<(i64, i64)> = a.1.iter().map(|z| round6(*z)).collect();
                let kb: Vec<(i64, i64)> = b.1.iter().map(|z| round6(*z)).collect();
                kb.cmp(&ka)
            })
        });
        let dims: Vec<usize> = rows.iter().map(|r| r.0).collect();
        if dims.iter().map(|d| d * d).sum::<usize>() != n {
            return Err("dimension sum rule violated".into());
        }
        let mut values = Array2::<C64>::zeros((k, k));
        for (t, (_, chi)) in rows.iter().enumerate() {
            for j in 0..k {
                values[[t, j]] = chi[j];
            }
        }
        let table = Self {
            group_order: n,
            classes: classes.to_vec(),
            class_of: class_of.to_vec(),
            class_sizes: class_sizes.to_vec(),
            dims,
            values,
        };
        // Row orthogonality over the group.
        for a in 0..k {
            for b in 0..k {
                let mut acc = C64::new(0.0, 0.0);
                for j in 0..k {
                    acc += table.values[[a, j]]
                        * table.values[[b, j]].conj()
                        * (table.class_sizes[j] as f64);
                }
                acc /= n as f64;
                let expect = if a == b { 1.0 } else { 0.0 };
                if (acc - expect).norm() > 1e-9 {
                    return Err(format!(
                        "row orthogonality fails for ({}, {}): {}",
                        a, b, acc
                    ));
                }
            }
        }
        if table.values.row(0).iter().any(|z| (z - 1.0).norm() > 1e-12) {
            return Err("row 0 is not the trivial irrep".into());
        }
        for t in 0..k {
            if (table.values[[t, 0]] - table.dims[t] as f64).norm() > 1e-9 {
                return Err("character at identity does not equal the dimension".into());
            }
        }
        Ok(table)
    }

    pub fn group_order(&self) -> usize {
        self.group_order
    }

    pub fn num_irreps(&self) -> usize {
        self.dims.len()
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn dim(&self, irrep: usize) -> usize {
        self.dims[irrep]
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn classes(&self) -> &[Vec<usize>] {
        &self.classes
    }

    pub fn class_sizes(&self) -> &[usize] {
        &self.class_sizes
    }

    pub fn class_of(&self, g: usize) -> usize {
        self.class_of[g]
    }

    /// χ^α on a conjugacy class.
    pub fn value(&self, irrep: usize, class: usize) -> C64 {
        self.values[[irrep, class]]
    }

    /// χ^α(g) for a group element.
    pub fn value_at(&self, irrep: usize, g: usize) -> C64 {
        self.values[[irrep, self.class_of[g]]]
    }

    /// Multiset of irreps (with multiplicities) in the decomposition of
    /// α ⊗ β, via the character inner product.
    pub fn fusion_decompose(
        &self,
        alpha: usize,
        beta: usize,
    ) -> Result<Vec<(usize, usize)>, ReprError> {
        let k = self.num_classes();
        let mut out = Vec::new();
        for gamma in 0..self.num_irreps() {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..k {
                acc += self.values[[alpha, j]]
                    * self.values[[beta, j]]
                    * self.values[[gamma, j]].conj()
                    * (self.class_sizes[j] as f64);
            }
            acc /= self.group_order as f64;
            let m = acc.re.round();
            if (acc.re - m).abs() > INT_TOL || acc.im.abs() > INT_TOL || m < 0.0 {
                return Err(ReprError::NonIntegerMultiplicity {
                    alpha,
                    beta,
                    gamma,
                    value: acc.re,
                });
            }
            if m > 0.0 {
                out.push((gamma, m as usize));
            }
        }
        Ok(out)
    }

    /// {g : χ^α(g) = χ^α(e)} as a validated subgroup.
    pub fn irrep_kernel(&self, group: &GroupTable, irrep: usize) -> Subgroup {
        let d = self.dims[irrep] as f64;
        let members: Vec<usize> = (0..group.order())
            .filter(|&g| (self.value_at(irrep, g) - d).norm() < INT_TOL)
            .collect();
        Subgroup::new(group, &members).expect("kernel is a subgroup")
    }

    /// The irrep with complex-conjugate characters.
    pub fn conjugate_irrep(&self, irrep: usize) -> Result<usize, ReprError> {
        let k = self.num_classes();
        for beta in 0..self.num_irreps() {
            let close = (0..k).all(|j| {
                (self.values[[beta, j]] - self.values[[irrep, j]].conj()).norm() < INT_TOL
            });
            if close {
                return Ok(beta);
            }
        }
        Err(ReprError::NotFound(format!(
            "no conjugate partner for irrep {}",
            irrep
        )))
    }
}

fn round6(z: C64) -> (i64, i64) {
    ((z.re * 1e6).round() as i64, (z.im * 1e6).round() as i64)
}

fn unit_roots(e: usize) -> Vec<C64> {
    (0..e)
        .map(|j| C64::from_polar(1.0, TAU * j as f64 / e as f64))
        .collect()
}

/// Snaps a character value to an exact form when within tolerance: a
/// Gaussian integer, a root of unity of the group exponent, or a sum of two
/// such roots (covers every 1D and 2D character value).
fn snap(z: C64, roots: &[C64]) -> C64 {
    let gauss = C64::new(z.re.round(), z.im.round());
    if (z - gauss).norm() < SNAP_TOL {
        return gauss;
    }
    for r in roots {
        if (z - r).norm() < SNAP_TOL {
            return *r;
        }
    }
    for (i, a) in roots.iter().enumerate() {
        for b in roots.iter().skip(i) {
            let c = a + b;
            if (z - c).norm() < SNAP_TOL {
                return c;
            }
        }
    }
    z
}

/// Full fusion table: decomposition multisets for every irrep pair.
#[derive(Debug, Clone)]
pub struct FusionTable {
    decomp: Vec<Vec<Vec<(usize, usize)>>>,
}

impl FusionTable {
    pub fn compute(ct: &CharacterTable) -> Result<Self, ReprError> {
        let k = ct.num_irreps();
        let mut decomp = Vec::with_capacity(k);
        for a in 0..k {
            let mut row = Vec::with_capacity(k);
            for b in 0..k {
                let entry = ct.fusion_decompose(a, b)?;
                // Dimension sum rule.
                let total: usize = entry.iter().map(|&(g, m)| m * ct.dim(g)).sum();
                if total != ct.dim(a) * ct.dim(b) {
                    return Err(ReprError::InconsistentClasses(format!(
                        "fusion of ({}, {}) carries dimension {} instead of {}",
                        a,
                        b,
                        total,
                        ct.dim(a) * ct.dim(b)
                    )));
                }
                row.push(entry);
            }
            decomp.push(row);
        }
        Ok(Self { decomp })
    }

    /// Multiset of (irrep, multiplicity) in α ⊗ β.
    pub fn entry(&self, alpha: usize, beta: usize) -> &[(usize, usize)] {
        &self.decomp[alpha][beta]
    }

    /// Just the support (irreps with multiplicity ≥ 1).
    pub fn support(&self, alpha: usize, beta: usize) -> Vec<usize> {
        self.decomp[alpha][beta].iter().map(|&(g, _)| g).collect()
    }
}

/// Nested irrep sets: level m holds the irreps whose kernel contains G_m.
/// Level 0 is the trivial irrep alone; level M is every irrep.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    levels: Vec<Vec<usize>>,
}

impl Hierarchy {
    pub fn compute(group: &GroupTable, ct: &CharacterTable, lcs: &LowerCentralSeries) -> Self {
        let mut levels = Vec::with_capacity(lcs.class() + 1);
        for m in 0..=lcs.class() {
            let gm = lcs.term(m);
            let level: Vec<usize> = (0..ct.num_irreps())
                .filter(|&a| {
                    let kernel = ct.irrep_kernel(group, a);
                    gm.is_subset_of(&kernel)
                })
                .collect();
            levels.push(level);
        }
        Self { levels }
    }

    /// Number of levels above 0 (the nilpotency class M).
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    /// Irreps at level m (sorted ascending).
    pub fn level(&self, m: usize) -> &[usize] {
        &self.levels[m]
    }

    pub fn levels(&self) -> &[Vec<usize>] {
        &self.levels
    }
}

/// The equivalence classes of level-m irreps together with their abelian
/// group structure and the 1D characters of G_{m-1}/G_m they induce.
#[derive(Debug, Clone)]
pub struct ClassGroup {
    pub level: usize,
    /// Partition of the level-m irreps; class 0 contains the trivial irrep
    /// and equals the level-(m-1) irrep set.
    pub classes: Vec<Vec<usize>>,
    /// Class index of each member irrep.
    pub class_of_irrep: BTreeMap<usize, usize>,
    /// Multiplication table of the classes (abelian).
    pub table: GroupTable,
    pub identity_class: usize,
    /// phase_chars[class][coset]: the scalar χ^α(g)/d^α on each coset of
    /// G_{m-1}/G_m, for any member α and any g in the coset.
    pub phase_chars: Vec<Vec<C64>>,
    /// The quotient G_{m-1}/G_m, in local indices of the G_{m-1} table.
    pub quotient: QuotientGroup,
    /// Map from local G_{m-1} indices to parent group elements.
    pub h_members: Vec<usize>,
}

impl ClassGroup {
    pub fn compute(
        group: &GroupTable,
        ct: &CharacterTable,
        fusion: &FusionTable,
        hier: &Hierarchy,
        lcs: &LowerCentralSeries,
        m: usize,
    ) -> Result<Self, ReprError> {
        assert!(m >= 1 && m <= hier.depth());
        let members = hier.level(m).to_vec();
        let prev: Vec<usize> = hier.level(m - 1).to_vec();
        let pos_of: BTreeMap<usize, usize> =
            members.iter().enumerate().map(|(i, &a)| (a, i)).collect();
        // Union-find over the relation: β ~ α when α appears in γ ⊗ β for
        // some γ of the previous level.
        let mut parent: Vec<usize> = (0..members.len()).collect();
        fn find(parent: &mut Vec<usize>, x: usize) -> usize {
            if parent[x] != x {
                let r = find(parent, parent[x]);
                parent[x] = r;
            }
            parent[x]
        }
        for &beta in &members {
            for &gamma in &prev {
                for alpha in fusion.support(gamma, beta) {
                    let (Some(&pa), Some(&pb)) = (pos_of.get(&alpha), pos_of.get(&beta)) else {
                        return Err(ReprError::InconsistentClasses(format!(
                            "product of level-{} members leaves the level: {} ⊗ {} ∋ {}",
                            m, gamma, beta, alpha
                        )));
                    };
                    let (ra, rb) = (find(&mut parent, pa), find(&mut parent, pb));
                    if ra != rb {
                        parent[ra] = rb;
                    }
                }
            }
        }
        let mut buckets: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, &a) in members.iter().enumerate() {
            buckets.entry(find(&mut parent, i)).or_default().push(a);
        }
        let mut classes: Vec<Vec<usize>> = buckets.into_values().collect();
        for c in classes.iter_mut() {
            c.sort_unstable();
        }
        classes.sort_by_key(|c| c[0]);
        let class_of_irrep: BTreeMap<usize, usize> = classes
            .iter()
            .enumerate()
            .flat_map(|(ci, c)| c.iter().map(move |&a| (a, ci)))
            .collect();
        // Identity class must be the previous level as a set.
        if classes[0] != prev {
            return Err(ReprError::InconsistentClasses(format!(
                "class of the trivial irrep at level {} is {:?}, expected the previous level {:?}",
                m, classes[0], prev
            )));
        }
        // Class multiplication through fusion; the support of any member
        // pair must land in a single class.
        let q = classes.len();
        let mut mult = vec![0usize; q * q];
        for c1 in 0..q {
            for c2 in 0..q {
                let mut target: Option<usize> = None;
                for &a in &classes[c1] {
                    for &b in &classes[c2] {
                        for g in fusion.support(a, b) {
                            let Some(&cg) = class_of_irrep.get(&g) else {
                                return Err(ReprError::InconsistentClasses(format!(
                                    "{} ⊗ {} leaves level {}",
                                    a, b, m
                                )));
                            };
                            match target {
                                None => target = Some(cg),
                                Some(t) if t == cg => {}
                                Some(t) => {
                                    return Err(ReprError::InconsistentClasses(format!(
                                        "fusion of classes {} and {} spans classes {} and {}",
                                        c1, c2, t, cg
                                    )));
                                }
                            }
                        }
                    }
                }
                mult[c1 * q + c2] = target.ok_or_else(|| {
                    ReprError::InconsistentClasses("empty fusion support".into())
                })?;
            }
        }
        let names: Vec<String> = classes
            .iter()
            .map(|c| {
                let inner: Vec<String> = c.iter().map(|a| a.to_string()).collect();
                format!("{{{}}}", inner.join(","))
            })
            .collect();
        let table = GroupTable::from_table(mult, names, &format!("classes:m{}", m))
            .map_err(|e| ReprError::InconsistentClasses(e.to_string()))?;
        if !table.is_abelian() {
            return Err(ReprError::InconsistentClasses(
                "class multiplication is not abelian".into(),
            ));
        }
        // Scalar characters on G_{m-1}/G_m.
        let h = lcs.term(m - 1);
        let k_sub = lcs.term(m);
        let quotient = group.quotient_in(h, k_sub)?;
        let (_, h_members) = group.subgroup_table(h);
        let mut phase_chars = Vec::with_capacity(q);
        for cls in &classes {
            let mut per_coset = Vec::with_capacity(quotient.order());
            for coset in &quotient.cosets {
                let mut val: Option<C64> = None;
                for &alpha in cls {
                    let d = ct.dim(alpha) as f64;
                    for &local in coset {
                        let g = h_members[local];
                        let v = ct.value_at(alpha, g) / d;
                        match val {
                            None => val = Some(v),
                            Some(prev_v) => {
                                if (prev_v - v).norm() > 1e-7 {
                                    return Err(ReprError::InconsistentClasses(format!(
                                        "scalar character not constant on a coset at level {}",
                                        m
                                    )));
                                }
                            }
                        }
                    }
                }
                per_coset.push(val.unwrap());
            }
            phase_chars.push(per_coset);
        }
        Ok(Self {
            level: m,
            classes,
            class_of_irrep,
            table,
            identity_class: 0,
            phase_chars,
            quotient,
            h_members,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_of(&self, irrep: usize) -> Option<usize> {
        self.class_of_irrep.get(&irrep).copied()
    }

    pub fn mul(&self, c1: usize, c2: usize) -> usize {
        self.table.mul(c1, c2)
    }

    /// Scalar character of a class on a parent-group element of G_{m-1}.
    pub fn phase_char(&self, class: usize, g: usize) -> Option<C64> {
        let local = self.h_members.binary_search(&g).ok()?;
        Some(self.phase_chars[class][self.quotient.project(local)])
    }
}

/// Outcome of the brute-force isomorphism check between a level's class
/// group and the corresponding quotient G_{m-1}/G_m.
#[derive(Debug, Clone)]
pub struct IsoReport {
    pub ok: bool,
    /// class index → irrep index of the quotient's character table.
    pub matching: Vec<(usize, usize)>,
    pub counterexample: Option<String>,
}

/// Matches every class to a 1D character of the quotient via its scalar
/// character, then brute-force checks bijectivity and the homomorphism
/// property. The quotient must be the one the class group was built on
/// (same coset indexing).
pub fn verify_class_iso(icg: &ClassGroup, q: &QuotientGroup) -> Result<IsoReport, ReprError> {
    let qn = q.order();
    let fail = |msg: String| IsoReport {
        ok: false,
        matching: Vec::new(),
        counterexample: Some(msg),
    };
    if icg.num_classes() != qn {
        return Ok(fail(format!(
            "{} classes but quotient order {}",
            icg.num_classes(),
            qn
        )));
    }
    let ct_q = CharacterTable::compute(&q.table)?;
    if ct_q.dims().iter().any(|&d| d != 1) {
        return Ok(fail("quotient is not abelian".into()));
    }
    let mut matching = Vec::with_capacity(icg.num_classes());
    let mut used = vec![false; qn];
    for (c, phases) in icg.phase_chars.iter().enumerate() {
        let mut found = None;
        for t in 0..qn {
            let close = (0..qn).all(|x| (ct_q.value_at(t, x) - phases[x]).norm() < INT_TOL);
            if close {
                found = Some(t);
                break;
            }
        }
        match found {
            Some(t) if !used[t] => {
                used[t] = true;
                matching.push((c, t));
            }
            Some(t) => {
                return Ok(fail(format!(
                    "classes {} and earlier both match quotient character {}",
                    c, t
                )));
            }
            None => {
                return Ok(fail(format!(
                    "class {} matches no 1D character of the quotient",
                    c
                )));
            }
        }
    }
    // Homomorphism property of the scalar characters themselves.
    for c1 in 0..icg.num_classes() {
        for c2 in 0..icg.num_classes() {
            let c12 = icg.mul(c1, c2);
            for x in 0..qn {
                let lhs = icg.phase_chars[c1][x] * icg.phase_chars[c2][x];
                let rhs = icg.phase_chars[c12][x];
                if (lhs - rhs).norm() > 1e-7 {
                    return Ok(fail(format!(
                        "classes ({}, {}) violate multiplicativity on coset {}",
                        c1, c2, x
                    )));
                }
            }
        }
    }
    Ok(IsoReport {
        ok: true,
        matching,
        counterexample: None,
    })
}

/// Everything structural about one group, computed once and shared.
#[derive(Debug, Clone)]
pub struct StructureData {
    pub group: GroupTable,
    pub lcs: LowerCentralSeries,
    pub ct: CharacterTable,
    pub fusion: FusionTable,
    pub hierarchy: Hierarchy,
    /// Class groups for m = 1..=M (index 0 is level 1).
    pub class_groups: Vec<ClassGroup>,
}

impl StructureData {
    pub fn compute(group: GroupTable) -> Result<Self, ReprError> {
        let lcs = group.lower_central_series()?;
        let ct = CharacterTable::compute(&group)?;
        let fusion = FusionTable::compute(&ct)?;
        let hierarchy = Hierarchy::compute(&group, &ct, &lcs);
        let mut class_groups = Vec::with_capacity(lcs.class());
        for m in 1..=lcs.class() {
            class_groups.push(ClassGroup::compute(
                &group, &ct, &fusion, &hierarchy, &lcs, m,
            )?);
        }
        Ok(Self {
            group,
            lcs,
            ct,
            fusion,
            hierarchy,
            class_groups,
        })
    }

    /// Class group at level m (1-based).
    pub fn class_group(&self, m: usize) -> &ClassGroup {
        &self.class_groups[m - 1]
    }

    /// Nilpotency class M.
    pub fn depth(&self) -> usize {
        self.lcs.class()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn set(v: &[usize]) -> BTreeSet<usize> {
        v.iter().copied().collect()
    }

    #[test]
    fn trivial_and_cyclic_tables() {
        let t = GroupTable::trivial();
        let ct = CharacterTable::compute(&t).unwrap();
        assert_eq!(ct.num_irreps(), 1);
        assert_eq!(ct.dim(0), 1);

        let z3 = GroupTable::cyclic(3);
        let ct3 = CharacterTable::compute(&z3).unwrap();
        assert_eq!(ct3.dims(), &[1, 1, 1]);
        // The two nontrivial irreps are conjugates of each other.
        let c1 = ct3.conjugate_irrep(1).unwrap();
        assert_ne!(c1, 1);
        assert_ne!(c1, 0);
        assert_eq!(ct3.conjugate_irrep(0).unwrap(), 0);
    }

    #[test]
    fn d8_table_and_fusion() {
        let d8 = GroupTable::dihedral(8);
        let ct = CharacterTable::compute(&d8).unwrap();
        assert_eq!(ct.dims(), &[1, 1, 1, 1, 2]);
        let sq = ct.fusion_decompose(4, 4).unwrap();
        assert_eq!(sq, vec![(0, 1), (1, 1), (2, 1), (3, 1)]);
        // Trivial acts as identity.
        for b in 0..5 {
            assert_eq!(ct.fusion_decompose(0, b).unwrap(), vec![(b, 1)]);
        }
    }

    #[test]
    fn d16_table_matches_known_values() {
        let d16 = GroupTable::dihedral(16);
        let ct = CharacterTable::compute(&d16).unwrap();
        assert_eq!(ct.dims(), &[1, 1, 1, 1, 2, 2, 2]);
        // Canonical class order: e, r^4, even reflections, odd reflections,
        // {r^2, r^6}, {r, r^7}, {r^3, r^5}.
        let sqrt2 = 2.0f64.sqrt();
        assert!((ct.value(5, 5).re - sqrt2).abs() < 1e-12);
        assert!((ct.value(5, 6).re + sqrt2).abs() < 1e-12);
        assert!((ct.value(6, 5).re + sqrt2).abs() < 1e-12);
        assert!((ct.value(4, 4).re + 2.0).abs() < 1e-12);
        assert!((ct.value(4, 1).re - 2.0).abs() < 1e-12);
        // Fusion of the two faithful 2D irreps.
        let f = ct.fusion_decompose(5, 6).unwrap();
        assert_eq!(f, vec![(1, 1), (2, 1), (4, 1)]);
    }

    #[test]
    fn d16_kernels() {
        let d16 = GroupTable::dihedral(16);
        let ct = CharacterTable::compute(&d16).unwrap();
        let k4 = ct.irrep_kernel(&d16, 4);
        assert_eq!(k4.members(), &[0, 4]);
        let k5 = ct.irrep_kernel(&d16, 5);
        assert_eq!(k5.members(), &[0]);
        let k0 = ct.irrep_kernel(&d16, 0);
        assert_eq!(k0.order(), 16);
    }

    #[test]
    fn d16_hierarchy_and_class_groups() {
        let d16 = GroupTable::dihedral(16);
        let data = StructureData::compute(d16).unwrap();
        assert_eq!(data.depth(), 3);
        assert_eq!(set(data.hierarchy.level(0)), set(&[0]));
        assert_eq!(set(data.hierarchy.level(1)), set(&[0, 1, 2, 3]));
        assert_eq!(set(data.hierarchy.level(2)), set(&[0, 1, 2, 3, 4]));
        assert_eq!(set(data.hierarchy.level(3)), set(&[0, 1, 2, 3, 4, 5, 6]));

        let cg3 = data.class_group(3);
        assert_eq!(cg3.classes.len(), 2);
        assert_eq!(set(&cg3.classes[0]), set(&[0, 1, 2, 3, 4]));
        assert_eq!(set(&cg3.classes[1]), set(&[5, 6]));
        assert_eq!(cg3.table.element_order(1), 2);

        let cg2 = data.class_group(2);
        assert_eq!(set(&cg2.classes[0]), set(&[0, 1, 2, 3]));
        assert_eq!(set(&cg2.classes[1]), set(&[4]));

        let cg1 = data.class_group(1);
        assert_eq!(cg1.classes.len(), 4);
        assert!(cg1.classes.iter().all(|c| c.len() == 1));
        // K4: every nontrivial class squares to the identity.
        assert!((1..4).all(|c| cg1.table.element_order(c) == 2));
    }

    #[test]
    fn d32_hierarchy() {
        let d32 = GroupTable::dihedral(32);
        let data = StructureData::compute(d32).unwrap();
        assert_eq!(data.depth(), 4);
        assert_eq!(data.ct.num_irreps(), 11);
        assert_eq!(data.hierarchy.level(1).len(), 4);
        assert_eq!(data.hierarchy.level(2).len(), 5);
        assert_eq!(data.hierarchy.level(3).len(), 7);
        assert_eq!(data.hierarchy.level(4).len(), 11);
        for m in 1..=4 {
            let cg = data.class_group(m);
            let expect = data.lcs.term(m - 1).order() / data.lcs.term(m).order();
            assert_eq!(cg.num_classes(), expect);
        }
    }

    #[test]
    fn class_iso_reports() {
        for id in ["d8", "dihedral:16", "dihedral:32", "z2xz4", "z6"] {
            let g = GroupTable::from_id(id).unwrap();
            let data = StructureData::compute(g).unwrap();
            for m in 1..=data.depth() {
                let cg = data.class_group(m);
                let report = verify_class_iso(cg, &cg.quotient).unwrap();
                assert!(report.ok, "iso fails for {} at level {}", id, m);
                assert_eq!(report.matching.len(), cg.num_classes());
            }
        }
    }

    #[test]
    fn corrupted_phase_chars_fail_verification() {
        let d16 = GroupTable::dihedral(16);
        let data = StructureData::compute(d16).unwrap();
        let mut cg = data.class_group(3).clone();
        // Corrupt one scalar character entry.
        cg.phase_chars[1][1] = C64::new(0.5, 0.5);
        let report = verify_class_iso(&cg, &cg.quotient).unwrap();
        assert!(!report.ok);
        assert!(report.counterexample.is_some());
    }

    #[test]
    fn hierarchy_closure_and_conjugate_inverse() {
        for id in ["d8", "dihedral:16", "dihedral:32"] {
            let g = GroupTable::from_id(id).unwrap();
            let data = StructureData::compute(g).unwrap();
            for m in 1..=data.depth() {
                let level = set(data.hierarchy.level(m));
                let cg = data.class_group(m);
                for &a in data.hierarchy.level(m) {
                    for &b in data.hierarchy.level(m) {
                        // Products stay inside the level...
                        let support = data.fusion.support(a, b);
                        assert!(support.iter().all(|s| level.contains(s)));
                        // ...and inside the product class.
                        let target = cg.mul(cg.class_of(a).unwrap(), cg.class_of(b).unwrap());
                        assert!(support
                            .iter()
                            .all(|s| cg.class_of(*s).unwrap() == target));
                    }
                    // Conjugate irrep lands in the inverse class.
                    let ac = data.ct.conjugate_irrep(a).unwrap();
                    let ca = cg.class_of(a).unwrap();
                    let cac = cg.class_of(ac).unwrap();
                    assert_eq!(cg.mul(ca, cac), cg.identity_class);
                }
            }
        }
    }

    #[test]
    fn phase_chars_on_elements() {
        let d16 = GroupTable::dihedral(16);
        let data = StructureData::compute(d16).unwrap();
        let cg = data.class_group(3);
        // G_2 = {e, r^4}; the nontrivial class must separate the two cosets
        // of G_2/G_3 = G_2.
        assert_eq!(cg.h_members, vec![0, 4]);
        let on_e = cg.phase_char(1, 0).unwrap();
        let on_r4 = cg.phase_char(1, 4).unwrap();
        assert!((on_e - 1.0).norm() < 1e-12);
        assert!((on_r4 + 1.0).norm() < 1e-12);
        // Elements outside G_2 have no scalar character at level 3.
        assert!(cg.phase_char(1, 1).is_none());
    }
}
