//! Finite groups stored as explicit Cayley tables.
//!
//! Element `0` is always the identity. Direct products flatten the pair
//! `(i, j)` to `i * |H| + j` (left factor major), so element indices of
//! nested products such as `C2xC2xC2` are stable across runs and files.

use std::collections::VecDeque;
use std::fmt;

use crate::error::{invalid, Error, Result};

/// Index of an element inside a [`FiniteGroup`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupElement(pub usize);

impl GroupElement {
    pub const IDENTITY: GroupElement = GroupElement(0);

    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// How a group was constructed. Character tables are generated from this.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum GroupKind {
    /// Cyclic group of order `n`.
    Cyclic(usize),
    /// Dihedral group of order `2n` (symmetries of the regular `n`-gon).
    Dihedral(usize),
    Product(Box<GroupKind>, Box<GroupKind>),
    /// Built from a raw Cayley table; no analytic character table.
    Generic,
}

impl GroupKind {
    fn factors(&self) -> Vec<&GroupKind> {
        match self {
            GroupKind::Product(a, b) => {
                let mut out = a.factors();
                out.extend(b.factors());
                out
            }
            other => vec![other],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteGroup {
    kind: GroupKind,
    order: usize,
    /// Row-major `order x order` table, `cayley[a * order + b] = a∘b`.
    cayley: Vec<usize>,
    inverse: Vec<usize>,
    generators: Vec<usize>,
    element_names: Vec<String>,
}

/// Which group axiom failed during [`FiniteGroup::check_axioms`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AxiomViolation {
    Closure { a: usize, b: usize },
    Identity { g: usize },
    Inverse { g: usize },
    Associativity { a: usize, b: usize, c: usize },
}

impl FiniteGroup {
    /// Cyclic group `C_n = <r | r^n = e>`; element `j` is `r^j`.
    pub fn cyclic(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("cyclic group order must be positive"));
        }
        let mut cayley = vec![0; n * n];
        for a in 0..n {
            for b in 0..n {
                cayley[a * n + b] = (a + b) % n;
            }
        }
        let names = (0..n).map(|j| power_name("r", j)).collect();
        let generators = if n > 1 { vec![1] } else { vec![] };
        Ok(Self::assemble(GroupKind::Cyclic(n), n, cayley, generators, names))
    }

    /// Dihedral group of order `2n`: elements `0..n` are the rotations `r^j`,
    /// elements `n..2n` are the reflections `s r^j`.
    pub fn dihedral(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("dihedral group parameter must be positive"));
        }
        let order = 2 * n;
        let split = |x: usize| if x < n { (false, x) } else { (true, x - n) };
        let mut cayley = vec![0; order * order];
        for x in 0..order {
            for y in 0..order {
                let (xs, a) = split(x);
                let (ys, b) = split(y);
                // r^a s = s r^-a
                let prod = match (xs, ys) {
                    (false, false) => (a + b) % n,
                    (false, true) => n + (b + n - a) % n,
                    (true, false) => n + (a + b) % n,
                    (true, true) => (b + n - a) % n,
                };
                cayley[x * order + y] = prod;
            }
        }
        let mut names: Vec<String> = (0..n).map(|j| power_name("r", j)).collect();
        names.extend((0..n).map(|j| match j {
            0 => "s".to_string(),
            1 => "sr".to_string(),
            _ => format!("sr^{j}"),
        }));
        let generators = if n > 1 { vec![1, n] } else { vec![n] };
        Ok(Self::assemble(
            GroupKind::Dihedral(n),
            order,
            cayley,
            generators,
            names,
        ))
    }

    /// Direct product `G x H` with componentwise composition.
    pub fn direct_product(g: &FiniteGroup, h: &FiniteGroup) -> Self {
        let (ng, nh) = (g.order, h.order);
        let order = ng * nh;
        let mut cayley = vec![0; order * order];
        for a in 0..order {
            let (a1, a2) = (a / nh, a % nh);
            for b in 0..order {
                let (b1, b2) = (b / nh, b % nh);
                cayley[a * order + b] = g.mul(a1, b1) * nh + h.mul(a2, b2);
            }
        }
        let mut generators: Vec<usize> = g.generators.iter().map(|&x| x * nh).collect();
        generators.extend(h.generators.iter().copied());
        let names = (0..order)
            .map(|x| {
                if x == 0 {
                    return "e".to_string();
                }
                let left = component_name(g, x / nh);
                let right = component_name(h, x % nh);
                format!("({left},{right})")
            })
            .collect();
        let kind = GroupKind::Product(Box::new(g.kind.clone()), Box::new(h.kind.clone()));
        Self::assemble(kind, order, cayley, generators, names)
    }

    /// Wraps a raw Cayley table (identity at index 0). All axioms are checked.
    pub fn from_cayley(
        table: Vec<Vec<usize>>,
        generators: Vec<usize>,
        element_names: Option<Vec<String>>,
    ) -> Result<Self> {
        let order = table.len();
        if order == 0 || table.iter().any(|row| row.len() != order) {
            return Err(invalid("Cayley table must be square and non-empty"));
        }
        if generators.iter().any(|&g| g >= order) {
            return Err(invalid("generator index out of range"));
        }
        let names = match element_names {
            Some(n) if n.len() == order => n,
            Some(_) => return Err(invalid("element name count differs from order")),
            None => (0..order)
                .map(|i| if i == 0 { "e".into() } else { format!("g{i}") })
                .collect(),
        };
        let flat: Vec<usize> = table.into_iter().flatten().collect();
        if flat.iter().any(|&x| x >= order) {
            return Err(invalid("Cayley table entry out of range"));
        }
        let group = Self::assemble(GroupKind::Generic, order, flat, generators, names);
        if let Err(v) = group.check_axioms() {
            return Err(invalid(format!("table violates group axioms: {v:?}")));
        }
        if group.closure(&group.generators).len() != order {
            return Err(invalid("generators do not generate the group"));
        }
        Ok(group)
    }

    fn assemble(
        kind: GroupKind,
        order: usize,
        cayley: Vec<usize>,
        generators: Vec<usize>,
        element_names: Vec<String>,
    ) -> Self {
        let inverse = (0..order)
            .map(|a| {
                (0..order)
                    .find(|&b| cayley[a * order + b] == 0)
                    .unwrap_or(usize::MAX)
            })
            .collect();
        FiniteGroup {
            kind,
            order,
            cayley,
            inverse,
            generators,
            element_names,
        }
    }

    /// Parses group literals such as `C2`, `C3`, `D6`, `C2xC2`, `K4`.
    ///
    /// `Dk` uses order notation: `D6` is the symmetry group of the triangle.
    pub fn parse(literal: &str) -> Result<Self> {
        let lower = literal.trim().to_ascii_lowercase();
        if lower.is_empty() {
            return Err(invalid("empty group literal"));
        }
        let mut acc: Option<FiniteGroup> = None;
        for token in lower.split('x') {
            let factor = parse_factor(token)
                .ok_or_else(|| invalid(format!("unrecognised group literal `{literal}`")))??;
            acc = Some(match acc {
                None => factor,
                Some(prev) => FiniteGroup::direct_product(&prev, &factor),
            });
        }
        Ok(acc.expect("at least one factor"))
    }

    /// Canonical literal for groups built from the supported constructors.
    pub fn name(&self) -> String {
        match &self.kind {
            GroupKind::Generic => format!("G{}", self.order),
            kind => kind
                .factors()
                .iter()
                .map(|f| match f {
                    GroupKind::Cyclic(n) => format!("C{n}"),
                    GroupKind::Dihedral(n) => format!("D{}", 2 * n),
                    _ => unreachable!("factors are never products"),
                })
                .collect::<Vec<_>>()
                .join("x"),
        }
    }

    pub fn kind(&self) -> &GroupKind {
        &self.kind
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement::IDENTITY
    }

    pub fn generators(&self) -> Vec<GroupElement> {
        self.generators.iter().map(|&g| GroupElement(g)).collect()
    }

    pub fn element_name(&self, g: GroupElement) -> &str {
        &self.element_names[g.0]
    }

    pub fn element_names(&self) -> &[String] {
        &self.element_names
    }

    pub fn elements(&self) -> impl Iterator<Item = GroupElement> {
        (0..self.order).map(GroupElement)
    }

    pub fn element(&self, index: usize) -> Result<GroupElement> {
        if index < self.order {
            Ok(GroupElement(index))
        } else {
            Err(invalid(format!(
                "element index {index} out of range for group of order {}",
                self.order
            )))
        }
    }

    pub fn compose(&self, a: GroupElement, b: GroupElement) -> Result<GroupElement> {
        self.element(a.0)?;
        self.element(b.0)?;
        Ok(GroupElement(self.mul(a.0, b.0)))
    }

    pub fn inverse(&self, a: GroupElement) -> Result<GroupElement> {
        self.element(a.0)?;
        Ok(GroupElement(self.inverse[a.0]))
    }

    /// Unchecked table lookup on raw indices.
    pub(crate) fn mul(&self, a: usize, b: usize) -> usize {
        self.cayley[a * self.order + b]
    }

    pub(crate) fn inv(&self, a: usize) -> usize {
        self.inverse[a]
    }

    /// Cayley table as nested rows.
    pub fn cayley_table(&self) -> Vec<Vec<usize>> {
        self.cayley.chunks(self.order).map(|r| r.to_vec()).collect()
    }

    /// Smallest `k >= 1` with `g^k = e`.
    pub fn element_order(&self, g: GroupElement) -> usize {
        let mut x = g.0;
        let mut k = 1;
        while x != 0 {
            x = self.mul(x, g.0);
            k += 1;
        }
        k
    }

    pub fn is_abelian(&self) -> bool {
        (0..self.order).all(|a| (0..self.order).all(|b| self.mul(a, b) == self.mul(b, a)))
    }

    /// Exhaustive check of closure, identity, inverses and associativity.
    pub fn check_axioms(&self) -> Result<(), AxiomViolation> {
        let n = self.order;
        for a in 0..n {
            for b in 0..n {
                if self.cayley[a * n + b] >= n {
                    return Err(AxiomViolation::Closure { a, b });
                }
            }
        }
        for g in 0..n {
            if self.mul(0, g) != g || self.mul(g, 0) != g {
                return Err(AxiomViolation::Identity { g });
            }
            let inv = self.inverse[g];
            if inv >= n || self.mul(g, inv) != 0 || self.mul(inv, g) != 0 {
                return Err(AxiomViolation::Inverse { g });
            }
        }
        for a in 0..n {
            for b in 0..n {
                let ab = self.mul(a, b);
                for c in 0..n {
                    if self.mul(ab, c) != self.mul(a, self.mul(b, c)) {
                        return Err(AxiomViolation::Associativity { a, b, c });
                    }
                }
            }
        }
        Ok(())
    }

    /// Sorted element indices of the subgroup generated by `elements`.
    pub fn closure(&self, elements: &[usize]) -> Vec<usize> {
        let mut seen = vec![false; self.order];
        seen[0] = true;
        let mut queue = VecDeque::from([0usize]);
        while let Some(x) = queue.pop_front() {
            for &g in elements {
                let y = self.mul(x, g);
                if !seen[y] {
                    seen[y] = true;
                    queue.push_back(y);
                }
            }
        }
        (0..self.order).filter(|&i| seen[i]).collect()
    }

    /// Breadth-first spanning tree over the generators: for every element
    /// `h != e`, `(parent, generator_slot)` with `h = parent ∘ generators[slot]`.
    /// Parents always precede children in the returned visiting order.
    pub(crate) fn generator_tree(&self) -> (Vec<usize>, Vec<Option<(usize, usize)>>) {
        let mut via = vec![None; self.order];
        let mut seen = vec![false; self.order];
        seen[0] = true;
        let mut order = vec![0];
        let mut queue = VecDeque::from([0usize]);
        while let Some(x) = queue.pop_front() {
            for (slot, &g) in self.generators.iter().enumerate() {
                let y = self.mul(x, g);
                if !seen[y] {
                    seen[y] = true;
                    via[y] = Some((x, slot));
                    order.push(y);
                    queue.push_back(y);
                }
            }
        }
        (order, via)
    }

    /// Returns `true` if `map` (indexed by elements of `self`) is a bijective
    /// homomorphism onto `other`.
    pub fn is_isomorphism(&self, other: &FiniteGroup, map: &[usize]) -> bool {
        if self.order != other.order || map.len() != self.order {
            return false;
        }
        let mut hit = vec![false; other.order];
        for &m in map {
            if m >= other.order || hit[m] {
                return false;
            }
            hit[m] = true;
        }
        (0..self.order).all(|a| {
            (0..self.order).all(|b| map[self.mul(a, b)] == other.mul(map[a], map[b]))
        })
    }

    /// Searches for an isomorphism `other -> self` by trying every image of
    /// `other`'s generators. Returns the element map indexed by `other`.
    pub fn find_isomorphism_from(&self, other: &FiniteGroup) -> Option<Vec<usize>> {
        if self.order != other.order {
            return None;
        }
        let gens = &other.generators;
        let wanted: Vec<usize> = gens
            .iter()
            .map(|&g| other.element_order(GroupElement(g)))
            .collect();
        let pools: Vec<Vec<usize>> = wanted
            .iter()
            .map(|&ord| {
                (0..self.order)
                    .filter(|&x| self.element_order(GroupElement(x)) == ord)
                    .collect()
            })
            .collect();
        let (visit, via) = other.generator_tree();
        if visit.len() != other.order {
            return None;
        }
        let mut choice = vec![0usize; gens.len()];
        loop {
            if pools.iter().any(|p| p.is_empty()) {
                return None;
            }
            let images: Vec<usize> = choice.iter().zip(&pools).map(|(&c, p)| p[c]).collect();
            let mut map = vec![0usize; other.order];
            for &h in visit.iter().skip(1) {
                let (parent, slot) = via[h].expect("non-identity elements have a parent");
                map[h] = self.mul(map[parent], images[slot]);
            }
            if other.is_isomorphism(self, &map) {
                return Some(map);
            }
            // odometer increment
            let mut k = 0;
            loop {
                if k == choice.len() {
                    return None;
                }
                choice[k] += 1;
                if choice[k] < pools[k].len() {
                    break;
                }
                choice[k] = 0;
                k += 1;
            }
        }
    }

    /// Named groups from the supported families with the given order, in
    /// preference order (fewest factors first, cyclic before dihedral).
    pub fn named_candidates(order: usize) -> Vec<FiniteGroup> {
        let mut out = Vec::new();
        let mut factorisations = Vec::new();
        factor_lists(order, 2, &mut Vec::new(), &mut factorisations);
        factorisations.sort_by_key(|f: &Vec<(char, usize)>| f.len());
        for f in factorisations {
            let mut acc: Option<FiniteGroup> = None;
            for (family, k) in f {
                let factor = if family == 'c' {
                    FiniteGroup::cyclic(k)
                } else {
                    FiniteGroup::dihedral(k / 2)
                }
                .expect("positive parameters");
                acc = Some(match acc {
                    None => factor,
                    Some(prev) => FiniteGroup::direct_product(&prev, &factor),
                });
            }
            if let Some(g) = acc {
                out.push(g);
            }
        }
        if order == 1 {
            out.push(FiniteGroup::cyclic(1).expect("order 1"));
        }
        out
    }

    /// Looks for a supported named group isomorphic to `self`.
    /// Returns the named group and the map `named -> self`.
    pub fn identify_named(&self) -> Option<(FiniteGroup, Vec<usize>)> {
        FiniteGroup::named_candidates(self.order)
            .into_iter()
            .find_map(|named| self.find_isomorphism_from(&named).map(|m| (named, m)))
    }
}

impl fmt::Display for FiniteGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (order {})", self.name(), self.order)
    }
}

fn power_name(base: &str, j: usize) -> String {
    match j {
        0 => "e".to_string(),
        1 => base.to_string(),
        _ => format!("{base}^{j}"),
    }
}

/// Name of a factor's element inside a product tuple; a product factor's
/// identity is spelled out componentwise.
fn component_name(group: &FiniteGroup, x: usize) -> String {
    if x == 0 {
        vec!["e"; leaf_count(&group.kind)].join(",")
    } else {
        strip_parens(&group.element_names[x]).to_string()
    }
}

fn leaf_count(kind: &GroupKind) -> usize {
    match kind {
        GroupKind::Product(a, b) => leaf_count(a) + leaf_count(b),
        _ => 1,
    }
}

fn strip_parens(s: &str) -> &str {
    s.strip_prefix('(')
        .and_then(|x| x.strip_suffix(')'))
        .unwrap_or(s)
}

fn parse_factor(token: &str) -> Option<Result<FiniteGroup>> {
    let mut chars = token.chars();
    let family = chars.next()?;
    let n: usize = chars.as_str().parse().ok()?;
    Some(match family {
        'c' => FiniteGroup::cyclic(n),
        'k' if n == 4 => FiniteGroup::parse("C2xC2"),
        'd' if n >= 2 && n.is_multiple_of(2) => FiniteGroup::dihedral(n / 2),
        'd' => Err(Error::InvalidArgument(format!(
            "dihedral literal D{n} must name an even order"
        ))),
        _ => return None,
    })
}

/// Non-decreasing factor lists of `(family, order)` whose orders multiply to
/// `remaining`. Dihedral factors start at order 6 since `D2 = C2` and
/// `D4 = C2xC2`.
fn factor_lists(
    remaining: usize,
    min: usize,
    current: &mut Vec<(char, usize)>,
    out: &mut Vec<Vec<(char, usize)>>,
) {
    if remaining == 1 {
        if !current.is_empty() {
            out.push(current.clone());
        }
        return;
    }
    for k in min..=remaining {
        if !remaining.is_multiple_of(k) {
            continue;
        }
        for family in ['c', 'd'] {
            if family == 'd' && (k < 6 || k % 2 != 0) {
                continue;
            }
            current.push((family, k));
            factor_lists(remaining / k, k, current, out);
            current.pop();
        }
    }
}
