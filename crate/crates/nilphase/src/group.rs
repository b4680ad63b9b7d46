//! Finite groups as explicit multiplication tables, with the subgroup,
//! quotient, and lower-central-series machinery the rest of the crate
//! builds on.
//!
//! Elements are dense indices `0..|G|`, index 0 is the identity. Builtin
//! families use a fixed deterministic ordering (cyclic: powers of the
//! generator; dihedral: rotations then reflections) so tables, hashes, and
//! printed reports are reproducible.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use thiserror::Error;

/// Largest supported group order. Keeps exhaustive table validation and the
/// brute-force verification paths cheap.
pub const MAX_ORDER: usize = 256;

/// Errors produced by group construction and structure computations.
#[derive(Debug, Error)]
pub enum GroupError {
    #[error("invalid multiplication table: {0}")]
    InvalidTable(String),
    #[error("group order {0} exceeds the supported cap of {MAX_ORDER}")]
    OrderCap(usize),
    #[error("unknown group id '{0}' (expected e.g. 'cyclic:4', 'dihedral:16', products joined with 'x', or a path to a JSON table)")]
    UnknownId(String),
    #[error("lower central series stabilizes at a nontrivial subgroup of order {order} with members {{{}}}: the group is not nilpotent", members.join(", "))]
    NotNilpotent { order: usize, members: Vec<String> },
    #[error("the given element set is not a subgroup: {0}")]
    NotSubgroup(String),
    #[error("subgroup is not normal (conjugating {member} by {by} leaves the subgroup)")]
    NotNormal { member: String, by: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// JSON form of an explicit multiplication table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupSpec {
    pub order: usize,
    /// Row-major: `mult[g][h]` is the index of g∘h.
    pub mult: Vec<Vec<usize>>,
    /// Optional element names; defaults to `g0`, `g1`, ...
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub names: Option<Vec<String>>,
}

/// A finite group given by its full multiplication table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupTable {
    order: usize,
    mult: Vec<usize>,
    inv: Vec<usize>,
    names: Vec<String>,
    /// Human-readable id of where the table came from ("dihedral:16",
    /// "explicit", ...).
    id: String,
}

impl GroupTable {
    /// Builds from a flat row-major table, validating the group axioms.
    pub fn from_table(
        mult: Vec<usize>,
        names: Vec<String>,
        id: &str,
    ) -> Result<Self, GroupError> {
        let order2 = mult.len();
        let order = (order2 as f64).sqrt().round() as usize;
        if order * order != order2 || order == 0 {
            return Err(GroupError::InvalidTable(format!(
                "table has {} entries, not a positive square",
                order2
            )));
        }
        if order > MAX_ORDER {
            return Err(GroupError::OrderCap(order));
        }
        if names.len() != order {
            return Err(GroupError::InvalidTable(format!(
                "{} names for {} elements",
                names.len(),
                order
            )));
        }
        for (i, &v) in mult.iter().enumerate() {
            if v >= order {
                return Err(GroupError::InvalidTable(format!(
                    "entry {} of the table is {} >= order {}",
                    i, v, order
                )));
            }
        }
        // Identity must be element 0 (the format contract).
        for g in 0..order {
            if mult[0 * order + g] != g || mult[g * order + 0] != g {
                return Err(GroupError::InvalidTable(
                    "element 0 is not a two-sided identity".into(),
                ));
            }
        }
        // Inverses: each row and column must be a permutation.
        let mut inv = vec![usize::MAX; order];
        for g in 0..order {
            let mut seen_row = vec![false; order];
            let mut seen_col = vec![false; order];
            for h in 0..order {
                let gh = mult[g * order + h];
                let hg = mult[h * order + g];
                if seen_row[gh] {
                    return Err(GroupError::InvalidTable(format!(
                        "row {} is not a permutation",
                        g
                    )));
                }
                if seen_col[hg] {
                    return Err(GroupError::InvalidTable(format!(
                        "column {} is not a permutation",
                        g
                    )));
                }
                seen_row[gh] = true;
                seen_col[hg] = true;
                if gh == 0 {
                    inv[g] = h;
                }
            }
        }
        // Associativity: exhaustive for small orders, dense random sampling
        // above that (construction stays fast while still catching broken
        // tables with overwhelming probability).
        let assoc_ok = |a: usize, b: usize, c: usize| {
            mult[mult[a * order + b] * order + c] == mult[a * order + mult[b * order + c]]
        };
        if order <= 64 {
            for a in 0..order {
                for b in 0..order {
                    for c in 0..order {
                        if !assoc_ok(a, b, c) {
                            return Err(GroupError::InvalidTable(format!(
                                "associativity fails at ({}, {}, {})",
                                a, b, c
                            )));
                        }
                    }
                }
            }
        } else {
            let mut state = 0x9e3779b97f4a7c15u64;
            for _ in 0..200_000 {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let a = (state >> 33) as usize % order;
                let b = (state >> 17) as usize % order;
                let c = state as usize % order;
                if !assoc_ok(a, b, c) {
                    return Err(GroupError::InvalidTable(format!(
                        "associativity fails at ({}, {}, {})",
                        a, b, c
                    )));
                }
            }
        }
        Ok(Self {
            order,
            mult,
            inv,
            names,
            id: id.to_string(),
        })
    }

    /// Trivial group.
    pub fn trivial() -> Self {
        Self::cyclic(1)
    }

    /// Cyclic group of order `n`, elements `a^0..a^{n-1}`.
    pub fn cyclic(n: usize) -> Self {
        assert!(n >= 1 && n <= MAX_ORDER);
        let mut mult = vec![0usize; n * n];
        for i in 0..n {
            for j in 0..n {
                mult[i * n + j] = (i + j) % n;
            }
        }
        let names = (0..n)
            .map(|i| match i {
                0 => "e".to_string(),
                1 => "a".to_string(),
                _ => format!("a^{}", i),
            })
            .collect();
        Self::from_table(mult, names, &format!("cyclic:{}", n)).expect("cyclic table")
    }

    /// Dihedral group of order `order = 2n` (symmetries of the regular
    /// n-gon). Elements are indexed rotations-first: `r^i` at index `i`,
    /// reflections `s·r^i` at index `n + i`.
    pub fn dihedral(order: usize) -> Self {
        assert!(order >= 2 && order % 2 == 0 && order <= MAX_ORDER);
        let n = order / 2;
        let idx = |a: usize, i: usize| a * n + i;
        let mut mult = vec![0usize; order * order];
        for a1 in 0..2 {
            for i1 in 0..n {
                for a2 in 0..2 {
                    for i2 in 0..n {
                        // (s^a1 r^i1)(s^a2 r^i2) = s^(a1+a2) r^((-1)^a2 i1 + i2)
                        let a = (a1 + a2) % 2;
                        let i = if a2 == 0 {
                            (i1 + i2) % n
                        } else {
                            (n - i1 + i2) % n
                        };
                        mult[idx(a1, i1) * order + idx(a2, i2)] = idx(a, i);
                    }
                }
            }
        }
        let mut names = Vec::with_capacity(order);
        for i in 0..n {
            names.push(match i {
                0 => "e".to_string(),
                1 => "r".to_string(),
                _ => format!("r^{}", i),
            });
        }
        for i in 0..n {
            names.push(match i {
                0 => "s".to_string(),
                1 => "sr".to_string(),
                _ => format!("sr^{}", i),
            });
        }
        Self::from_table(mult, names, &format!("dihedral:{}", order)).expect("dihedral table")
    }

    /// Direct product; element `(x, y)` has index `x * |B| + y`.
    pub fn direct_product(a: &GroupTable, b: &GroupTable) -> Result<Self, GroupError> {
        let order = a.order * b.order;
        if order > MAX_ORDER {
            return Err(GroupError::OrderCap(order));
        }
        let mut mult = vec![0usize; order * order];
        let idx = |x: usize, y: usize| x * b.order + y;
        for x1 in 0..a.order {
            for y1 in 0..b.order {
                for x2 in 0..a.order {
                    for y2 in 0..b.order {
                        mult[idx(x1, y1) * order + idx(x2, y2)] =
                            idx(a.mul(x1, x2), b.mul(y1, y2));
                    }
                }
            }
        }
        let mut names = Vec::with_capacity(order);
        for x in 0..a.order {
            for y in 0..b.order {
                names.push(format!("({},{})", a.names[x], b.names[y]));
            }
        }
        Self::from_table(mult, names, &format!("{}x{}", a.id, b.id))
    }

    /// Parses a group id: `cyclic:n`, `zN`/`cN` shorthand, `dihedral:2n`,
    /// `dN` shorthand (N the order), products joined with `x`
    /// (`cyclic:2xdihedral:8`), or a filesystem path to a JSON table.
    pub fn from_id(id: &str) -> Result<Self, GroupError> {
        let id = id.trim();
        if id.contains('/') || id.ends_with(".json") {
            return Self::from_json_file(Path::new(id));
        }
        let parts: Vec<&str> = id.split('x').collect();
        let mut acc: Option<GroupTable> = None;
        for part in parts {
            let g = Self::from_atomic_id(part)?;
            acc = Some(match acc {
                None => g,
                Some(prev) => Self::direct_product(&prev, &g)?,
            });
        }
        acc.ok_or_else(|| GroupError::UnknownId(id.to_string()))
    }

    fn from_atomic_id(id: &str) -> Result<Self, GroupError> {
        let id = id.trim().to_ascii_lowercase();
        let parse_n = |s: &str| s.parse::<usize>().ok();
        if id == "trivial" {
            return Ok(Self::trivial());
        }
        if let Some(rest) = id.strip_prefix("cyclic:") {
            if let Some(n) = parse_n(rest) {
                if n >= 1 && n <= MAX_ORDER {
                    return Ok(Self::cyclic(n));
                }
            }
        }
        if let Some(rest) = id.strip_prefix("dihedral:") {
            if let Some(n) = parse_n(rest) {
                if n >= 2 && n % 2 == 0 && n <= MAX_ORDER {
                    return Ok(Self::dihedral(n));
                }
            }
        }
        if let Some(rest) = id.strip_prefix('z').or_else(|| id.strip_prefix('c')) {
            if let Some(n) = parse_n(rest) {
                if n >= 1 && n <= MAX_ORDER {
                    return Ok(Self::cyclic(n));
                }
            }
        }
        if let Some(rest) = id.strip_prefix('d') {
            if let Some(n) = parse_n(rest) {
                if n >= 2 && n % 2 == 0 && n <= MAX_ORDER {
                    return Ok(Self::dihedral(n));
                }
            }
        }
        Err(GroupError::UnknownId(id))
    }

    /// Loads an explicit table from a `GroupSpec` JSON file.
    pub fn from_json_file(path: &Path) -> Result<Self, GroupError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    /// Loads an explicit table from `GroupSpec` JSON text.
    pub fn from_json_str(text: &str) -> Result<Self, GroupError> {
        let spec: GroupSpec = serde_json::from_str(text)?;
        Self::from_spec(&spec)
    }

    /// Builds from a parsed `GroupSpec`.
    pub fn from_spec(spec: &GroupSpec) -> Result<Self, GroupError> {
        let n = spec.order;
        if spec.mult.len() != n {
            return Err(GroupError::InvalidTable(format!(
                "{} rows for order {}",
                spec.mult.len(),
                n
            )));
        }
        let mut flat = Vec::with_capacity(n * n);
        for row in &spec.mult {
            if row.len() != n {
                return Err(GroupError::InvalidTable(format!(
                    "row of length {} for order {}",
                    row.len(),
                    n
                )));
            }
            flat.extend_from_slice(row);
        }
        let names = spec
            .names
            .clone()
            .unwrap_or_else(|| (0..n).map(|i| format!("g{}", i)).collect());
        Self::from_table(flat, names, "explicit")
    }

    /// Serializes back to the JSON spec form.
    pub fn to_spec(&self) -> GroupSpec {
        let n = self.order;
        let mult = (0..n)
            .map(|g| (0..n).map(|h| self.mul(g, h)).collect())
            .collect();
        GroupSpec {
            order: n,
            mult,
            names: Some(self.names.clone()),
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    #[inline]
    pub fn mul(&self, g: usize, h: usize) -> usize {
        self.mult[g * self.order + h]
    }

    #[inline]
    pub fn inv(&self, g: usize) -> usize {
        self.inv[g]
    }

    pub fn identity(&self) -> usize {
        0
    }

    pub fn name(&self, g: usize) -> &str {
        &self.names[g]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// g^k for k ≥ 0.
    pub fn pow(&self, g: usize, k: usize) -> usize {
        let mut acc = 0;
        for _ in 0..k {
            acc = self.mul(acc, g);
        }
        acc
    }

    /// Smallest k ≥ 1 with g^k = e.
    pub fn element_order(&self, g: usize) -> usize {
        let mut acc = g;
        let mut k = 1;
        while acc != 0 {
            acc = self.mul(acc, g);
            k += 1;
        }
        k
    }

    /// Least common multiple of all element orders.
    pub fn exponent(&self) -> usize {
        fn gcd(a: usize, b: usize) -> usize {
            if b == 0 {
                a
            } else {
                gcd(b, a % b)
            }
        }
        (0..self.order).fold(1usize, |acc, g| {
            let o = self.element_order(g);
            acc / gcd(acc, o) * o
        })
    }

    /// h ∘ g ∘ h⁻¹.
    pub fn conjugate(&self, g: usize, h: usize) -> usize {
        self.mul(self.mul(h, g), self.inv(h))
    }

    /// a ∘ b ∘ a⁻¹ ∘ b⁻¹.
    pub fn commutator(&self, a: usize, b: usize) -> usize {
        self.mul(self.mul(a, b), self.mul(self.inv(a), self.inv(b)))
    }

    pub fn is_abelian(&self) -> bool {
        (0..self.order).all(|g| (0..self.order).all(|h| self.mul(g, h) == self.mul(h, g)))
    }

    /// Conjugacy classes, each sorted ascending, the list ordered by
    /// (element order, smallest member index). Puts {e} first and gives a
    /// stable, reproducible column order for character tables.
    pub fn conjugacy_classes(&self) -> Vec<Vec<usize>> {
        let mut assigned = vec![false; self.order];
        let mut classes: Vec<Vec<usize>> = Vec::new();
        for g in 0..self.order {
            if assigned[g] {
                continue;
            }
            let mut cls: BTreeSet<usize> = BTreeSet::new();
            for h in 0..self.order {
                cls.insert(self.conjugate(g, h));
            }
            for &x in &cls {
                assigned[x] = true;
            }
            classes.push(cls.into_iter().collect());
        }
        classes.sort_by_key(|cls| (self.element_order(cls[0]), cls[0]));
        classes
    }

    /// The subgroup generated by commutators [x, y] with x ∈ `sub`, y ∈ G.
    pub fn commutator_with_group(&self, sub: &Subgroup) -> Subgroup {
        let mut gens = BTreeSet::new();
        for &x in sub.members() {
            for y in 0..self.order {
                gens.insert(self.commutator(x, y));
            }
        }
        Subgroup::generated(self, gens.into_iter().collect::<Vec<_>>().as_slice())
    }

    /// Lower central series G = G_0 ⊵ G_1 ⊵ ... ⊵ G_M = {e} with
    /// G_{m+1} = [G_m, G]. Errors when the series stabilizes before reaching
    /// the trivial subgroup.
    pub fn lower_central_series(&self) -> Result<LowerCentralSeries, GroupError> {
        let mut subgroups = vec![Subgroup::full(self)];
        loop {
            let current = subgroups.last().unwrap();
            if current.order() == 1 {
                break;
            }
            let next = self.commutator_with_group(current);
            if next.members() == current.members() {
                return Err(GroupError::NotNilpotent {
                    order: current.order(),
                    members: current
                        .members()
                        .iter()
                        .map(|&g| self.names[g].clone())
                        .collect(),
                });
            }
            subgroups.push(next);
        }
        Ok(LowerCentralSeries {
            subgroups,
        })
    }

    /// Extracts `sub` as a standalone group. Returns the abstract table and
    /// the map from local indices to indices in `self`. Local index 0 is the
    /// identity because subgroup members are sorted and 0 ∈ sub.
    pub fn subgroup_table(&self, sub: &Subgroup) -> (GroupTable, Vec<usize>) {
        let members = sub.members().to_vec();
        let k = members.len();
        let local_of = {
            let mut m = vec![usize::MAX; self.order];
            for (i, &g) in members.iter().enumerate() {
                m[g] = i;
            }
            m
        };
        let mut mult = vec![0usize; k * k];
        for i in 0..k {
            for j in 0..k {
                mult[i * k + j] = local_of[self.mul(members[i], members[j])];
            }
        }
        let names = members.iter().map(|&g| self.names[g].clone()).collect();
        let table = GroupTable::from_table(mult, names, &format!("{}|sub{}", self.id, k))
            .expect("subgroup table");
        (table, members)
    }

    /// Quotient of the whole group by a normal subgroup.
    pub fn quotient(&self, normal: &Subgroup) -> Result<QuotientGroup, GroupError> {
        normal.check_normal(self)?;
        let n = self.order;
        let mut coset_of = vec![usize::MAX; n];
        let mut cosets: Vec<Vec<usize>> = Vec::new();
        for g in 0..n {
            if coset_of[g] != usize::MAX {
                continue;
            }
            let members: Vec<usize> = normal.members().iter().map(|&h| self.mul(g, h)).collect();
            let mut members: Vec<usize> = members;
            members.sort_unstable();
            cosets.push(members);
            let idx = cosets.len() - 1;
            for &x in cosets[idx].iter() {
                coset_of[x] = idx;
            }
        }
        // Order cosets by smallest member; identity coset contains 0 and
        // sorts first.
        let mut order_idx: Vec<usize> = (0..cosets.len()).collect();
        order_idx.sort_by_key(|&i| cosets[i][0]);
        let mut remap = vec![0usize; cosets.len()];
        for (new_i, &old_i) in order_idx.iter().enumerate() {
            remap[old_i] = new_i;
        }
        let cosets: Vec<Vec<usize>> = order_idx.iter().map(|&i| cosets[i].clone()).collect();
        for c in coset_of.iter_mut() {
            *c = remap[*c];
        }
        let q = cosets.len();
        let mut mult = vec![0usize; q * q];
        for i in 0..q {
            for j in 0..q {
                mult[i * q + j] = coset_of[self.mul(cosets[i][0], cosets[j][0])];
            }
        }
        let names = cosets
            .iter()
            .map(|c| format!("[{}]", self.names[c[0]]))
            .collect();
        let table = GroupTable::from_table(mult, names, &format!("{}/sub{}", self.id, normal.order()))
            .expect("quotient table");
        Ok(QuotientGroup {
            table,
            coset_of,
            reps: cosets.iter().map(|c| c[0]).collect(),
            cosets,
        })
    }

    /// Quotient H/K for subgroups K ⊆ H of this group with K normal in H.
    pub fn quotient_in(&self, h: &Subgroup, k: &Subgroup) -> Result<QuotientGroup, GroupError> {
        if !k.is_subset_of(h) {
            return Err(GroupError::NotSubgroup(
                "denominator is not contained in the numerator".into(),
            ));
        }
        let (h_table, h_members) = self.subgroup_table(h);
        let local_of = {
            let mut m = vec![usize::MAX; self.order];
            for (i, &g) in h_members.iter().enumerate() {
                m[g] = i;
            }
            m
        };
        let k_local: Vec<usize> = k.members().iter().map(|&g| local_of[g]).collect();
        let k_sub = Subgroup::new(&h_table, &k_local)?;
        h_table.quotient(&k_sub)
    }
}

impl fmt::Display for GroupTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (order {})", self.id, self.order)
    }
}

/// A subgroup, stored as a sorted member list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subgroup {
    members: Vec<usize>,
}

impl Subgroup {
    /// Validates closure, identity, and inverses of the member set.
    pub fn new(group: &GroupTable, members: &[usize]) -> Result<Self, GroupError> {
        let set: BTreeSet<usize> = members.iter().copied().collect();
        if !set.contains(&0) {
            return Err(GroupError::NotSubgroup("missing the identity".into()));
        }
        for &a in &set {
            if a >= group.order() {
                return Err(GroupError::NotSubgroup(format!(
                    "member {} out of range",
                    a
                )));
            }
            if !set.contains(&group.inv(a)) {
                return Err(GroupError::NotSubgroup(format!(
                    "missing the inverse of {}",
                    group.name(a)
                )));
            }
            for &b in &set {
                if !set.contains(&group.mul(a, b)) {
                    return Err(GroupError::NotSubgroup(format!(
                        "not closed: {}∘{} escapes",
                        group.name(a),
                        group.name(b)
                    )));
                }
            }
        }
        Ok(Self {
            members: set.into_iter().collect(),
        })
    }

    /// The whole group as a subgroup.
    pub fn full(group: &GroupTable) -> Self {
        Self {
            members: (0..group.order()).collect(),
        }
    }

    /// Trivial subgroup {e}.
    pub fn trivial() -> Self {
        Self { members: vec![0] }
    }

    /// Closure of a generating set.
    pub fn generated(group: &GroupTable, gens: &[usize]) -> Self {
        let mut set: BTreeSet<usize> = BTreeSet::new();
        set.insert(0);
        let mut frontier: Vec<usize> = vec![0];
        while let Some(x) = frontier.pop() {
            for &g in gens {
                for y in [group.mul(x, g), group.mul(x, group.inv(g))] {
                    if set.insert(y) {
                        frontier.push(y);
                    }
                }
            }
        }
        Self {
            members: set.into_iter().collect(),
        }
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn order(&self) -> usize {
        self.members.len()
    }

    pub fn contains(&self, g: usize) -> bool {
        self.members.binary_search(&g).is_ok()
    }

    pub fn is_subset_of(&self, other: &Subgroup) -> bool {
        self.members.iter().all(|&g| other.contains(g))
    }

    pub fn is_normal(&self, group: &GroupTable) -> bool {
        self.check_normal(group).is_ok()
    }

    fn check_normal(&self, group: &GroupTable) -> Result<(), GroupError> {
        for &m in &self.members {
            for h in 0..group.order() {
                let c = group.conjugate(m, h);
                if !self.contains(c) {
                    return Err(GroupError::NotNormal {
                        member: group.name(m).to_string(),
                        by: group.name(h).to_string(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// The chain G = G_0 ⊵ G_1 ⊵ ... ⊵ G_M = {e}.
#[derive(Debug, Clone)]
pub struct LowerCentralSeries {
    subgroups: Vec<Subgroup>,
}

impl LowerCentralSeries {
    /// Nilpotency class M (number of strict steps).
    pub fn class(&self) -> usize {
        self.subgroups.len() - 1
    }

    /// G_m for m = 0..=M.
    pub fn term(&self, m: usize) -> &Subgroup {
        &self.subgroups[m]
    }

    pub fn terms(&self) -> &[Subgroup] {
        &self.subgroups
    }

    pub fn orders(&self) -> Vec<usize> {
        self.subgroups.iter().map(|s| s.order()).collect()
    }
}

/// A quotient group together with the projection data.
#[derive(Debug, Clone)]
pub struct QuotientGroup {
    /// Abstract table of the quotient; element 0 is the identity coset.
    pub table: GroupTable,
    /// Coset index of each parent element.
    pub coset_of: Vec<usize>,
    /// Smallest parent element of each coset.
    pub reps: Vec<usize>,
    /// Sorted member list of each coset.
    pub cosets: Vec<Vec<usize>>,
}

impl QuotientGroup {
    pub fn order(&self) -> usize {
        self.table.order()
    }

    /// Coset of a parent element.
    pub fn project(&self, g: usize) -> usize {
        self.coset_of[g]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cyclic_and_trivial_tables() {
        let t = GroupTable::trivial();
        assert_eq!(t.order(), 1);
        let z4 = GroupTable::cyclic(4);
        assert_eq!(z4.mul(1, 3), 0);
        assert_eq!(z4.inv(1), 3);
        assert_eq!(z4.element_order(1), 4);
        assert_eq!(z4.element_order(2), 2);
        assert!(z4.is_abelian());
        assert_eq!(z4.exponent(), 4);
    }

    #[test]
    fn dihedral_convention() {
        let d8 = GroupTable::dihedral(8);
        assert_eq!(d8.order(), 8);
        // s r s = r^{-1}: indices r = 1, s = 4.
        let s = 4;
        let r = 1;
        assert_eq!(d8.conjugate(r, s), 3);
        assert!(!d8.is_abelian());
        assert_eq!(d8.element_order(s), 2);
        assert_eq!(d8.element_order(r), 4);
        assert_eq!(d8.name(5), "sr");
    }

    #[test]
    fn conjugacy_class_counts_and_order() {
        let d16 = GroupTable::dihedral(16);
        let classes = d16.conjugacy_classes();
        assert_eq!(classes.len(), 7);
        assert_eq!(classes[0], vec![0]);
        assert_eq!(classes[1], vec![4]); // r^4, central, order 2
        assert_eq!(classes[2], vec![8, 10, 12, 14]); // even reflections
        assert_eq!(classes[3], vec![9, 11, 13, 15]); // odd reflections
        assert_eq!(classes[4], vec![2, 6]); // r^2, order 4
        assert_eq!(classes[5], vec![1, 7]); // r, order 8
        assert_eq!(classes[6], vec![3, 5]); // r^3, order 8

        let d8 = GroupTable::dihedral(8);
        assert_eq!(d8.conjugacy_classes().len(), 5);
    }

    #[test]
    fn lower_central_series_examples() {
        let d16 = GroupTable::dihedral(16);
        let s = d16.lower_central_series().unwrap();
        assert_eq!(s.orders(), vec![16, 4, 2, 1]);
        assert_eq!(s.class(), 3);
        // G_1 = <r^2> (rotations by even powers).
        assert_eq!(s.term(1).members(), &[0, 2, 4, 6]);

        let d8 = GroupTable::dihedral(8);
        let s8 = d8.lower_central_series().unwrap();
        assert_eq!(s8.orders(), vec![8, 2, 1]);

        let d32 = GroupTable::dihedral(32);
        let s32 = d32.lower_central_series().unwrap();
        assert_eq!(s32.orders(), vec![32, 8, 4, 2, 1]);
        assert_eq!(s32.class(), 4);

        let z6 = GroupTable::cyclic(6);
        assert_eq!(z6.lower_central_series().unwrap().class(), 1);
    }

    #[test]
    fn s3_is_not_nilpotent() {
        // S3 is the dihedral group of order 6.
        let s3 = GroupTable::dihedral(6);
        match s3.lower_central_series() {
            Err(GroupError::NotNilpotent { order, members }) => {
                assert_eq!(order, 3);
                assert_eq!(members.len(), 3);
                assert!(members.contains(&"e".to_string()));
            }
            other => panic!("expected NotNilpotent, got {:?}", other.map(|s| s.orders())),
        }
    }

    #[test]
    fn abelianization_orders() {
        let d8 = GroupTable::dihedral(8);
        let s = d8.lower_central_series().unwrap();
        let q = d8.quotient(s.term(1)).unwrap();
        assert_eq!(q.order(), 4);
        // K4: every nontrivial coset has order 2.
        assert!(q.table.is_abelian());
        assert!((1..4).all(|c| q.table.element_order(c) == 2));

        let d16 = GroupTable::dihedral(16);
        let s16 = d16.lower_central_series().unwrap();
        let q16 = d16.quotient(s16.term(1)).unwrap();
        assert_eq!(q16.order(), 4);
        assert!((1..4).all(|c| q16.table.element_order(c) == 2));
        // D16 / G_2 has order 8.
        let q2 = d16.quotient(s16.term(2)).unwrap();
        assert_eq!(q2.order(), 8);
    }

    #[test]
    fn quotient_in_successive_terms() {
        let d16 = GroupTable::dihedral(16);
        let s = d16.lower_central_series().unwrap();
        // G_1/G_2 ≅ Z2, G_2/G_3 ≅ Z2.
        let q12 = d16.quotient_in(s.term(1), s.term(2)).unwrap();
        assert_eq!(q12.order(), 2);
        let q23 = d16.quotient_in(s.term(2), s.term(3)).unwrap();
        assert_eq!(q23.order(), 2);
    }

    #[test]
    fn id_parsing_and_products() {
        assert_eq!(GroupTable::from_id("z2").unwrap().order(), 2);
        assert_eq!(GroupTable::from_id("cyclic:12").unwrap().order(), 12);
        assert_eq!(GroupTable::from_id("dihedral:16").unwrap().order(), 16);
        assert_eq!(GroupTable::from_id("d8").unwrap().order(), 8);
        let p = GroupTable::from_id("z2xz4").unwrap();
        assert_eq!(p.order(), 8);
        assert!(p.is_abelian());
        assert_eq!(p.exponent(), 4);
        assert!(GroupTable::from_id("q8").is_err());
    }

    #[test]
    fn json_round_trip_and_validation() {
        let d8 = GroupTable::dihedral(8);
        let spec = d8.to_spec();
        let text = serde_json::to_string(&spec).unwrap();
        let back = GroupTable::from_json_str(&text).unwrap();
        assert_eq!(back.order(), 8);
        assert_eq!(back.mul(1, 5), d8.mul(1, 5));

        // Broken table: identity not at 0.
        let bad = GroupSpec {
            order: 2,
            mult: vec![vec![1, 0], vec![0, 1]],
            names: None,
        };
        assert!(GroupTable::from_spec(&bad).is_err());
    }

    #[test]
    fn subgroup_generation_and_normality() {
        let d8 = GroupTable::dihedral(8);
        let rot = Subgroup::generated(&d8, &[1]);
        assert_eq!(rot.order(), 4);
        assert!(rot.is_normal(&d8));
        let refl = Subgroup::generated(&d8, &[4]);
        assert_eq!(refl.order(), 2);
        assert!(!refl.is_normal(&d8));
        assert!(Subgroup::new(&d8, &[0, 1]).is_err());
        assert!(Subgroup::new(&d8, &[0, 2, 4, 6]).is_ok());
    }
}
