//! Homomorphism testing over finite abelian p-groups.
//!
//! A map phi: G -> H is probed three ways: its exact (or sampled) BLR
//! agreement Pr_{x,y}(phi(x) + phi(y) = phi(x+y)), an exhaustive search
//! for the homomorphism agreeing with it most often, and a constructive
//! correction: given a homomorphism psi and a shift h with phi = psi + h
//! on some set E, a single generator image of psi is adjusted so the
//! result matches phi outright on an explicit slice of E.
//!
//! Domains are products of cyclic p-power factors; codomains are
//! restricted to elementary groups (every factor Z_p, same p). That
//! restriction is what makes homomorphisms easy to enumerate: every
//! element of the codomain has order 1 or p, which divides every
//! generator order p^k_i, so each of the |H|^m generator-image
//! assignments extends to a homomorphism and there are no others.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{gen_below, stream_rng};
use crate::testers::TestReport;

/// Cap on the group order |G|.
pub const MAX_GROUP_ORDER: u32 = 1 << 16;
/// Budget for the exact pair enumeration: |G|^2 table reads.
pub const EXACT_AGREEMENT_BUDGET: u128 = 1 << 26;
/// Budget on the number of homomorphisms searched or enumerated.
pub const HOM_ENUMERATION_BUDGET: u128 = 1 << 20;
/// Budget on materialized tables (homomorphism count times |G|) when the
/// whole homomorphism list is requested at once.
pub const HOM_TABLE_BUDGET: u128 = 1 << 24;

fn is_prime(p: u32) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u32;
    while (d as u64) * (d as u64) <= p as u64 {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// g^(-1) mod m, for gcd(g, m) = 1, by the extended Euclid algorithm.
fn mod_inverse(g: u64, m: u64) -> u64 {
    let (mut r0, mut r1) = (m as i64, g as i64);
    let (mut t0, mut t1) = (0i64, 1i64);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    debug_assert_eq!(r0, 1, "inverse of a non-unit");
    t0.rem_euclid(m as i64) as u64
}

/// A finite abelian p-group presented as Z_(p^k_1) x ... x Z_(p^k_m).
///
/// Elements are the indices 0..|G| in mixed radix with coordinate 0 the
/// least significant digit: the tuple (a_1, ..., a_m) has index
/// a_1 + a_2 * p^k_1 + a_3 * p^(k_1 + k_2) + .... Addition is
/// coordinate-wise modulo p^k_i.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteAbelianPGroup {
    p: u32,
    orders: Vec<u32>,
    sizes: Vec<u32>,
    strides: Vec<u32>,
    order: u32,
}

impl FiniteAbelianPGroup {
    /// Builds the group from the prime and the factor exponents k_i;
    /// the total order must stay within 2^16.
    pub fn new(p: u32, orders: Vec<u32>) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::input(format!("p must be prime, got {p}")));
        }
        if orders.is_empty() {
            return Err(Error::input("a group needs at least one cyclic factor"));
        }
        let mut sizes = Vec::with_capacity(orders.len());
        let mut strides = Vec::with_capacity(orders.len());
        let mut total: u128 = 1;
        for (idx, &k) in orders.iter().enumerate() {
            if k == 0 {
                return Err(Error::input(format!(
                    "factor {}: the exponent must be at least 1",
                    idx + 1
                )));
            }
            let mut size: u128 = 1;
            for _ in 0..k {
                size *= p as u128;
                if size > MAX_GROUP_ORDER as u128 {
                    return Err(Error::input(format!(
                        "factor {}: {p}^{k} already exceeds the 2^16 order cap",
                        idx + 1
                    )));
                }
            }
            strides.push(total as u32);
            total *= size;
            if total > MAX_GROUP_ORDER as u128 {
                return Err(Error::input(format!(
                    "group order exceeds the cap of {MAX_GROUP_ORDER}"
                )));
            }
            sizes.push(size as u32);
        }
        Ok(FiniteAbelianPGroup {
            p,
            orders,
            sizes,
            strides,
            order: total as u32,
        })
    }

    /// Parses the factor-list format `p^k1 x p^k2 x ...` (a bare `p`
    /// reads as `p^1`), e.g. `2^2 x 2^1` for Z_4 x Z_2.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut p: Option<u32> = None;
        let mut orders = Vec::new();
        for (idx, token) in spec.split('x').enumerate() {
            let token = token.trim();
            if token.is_empty() {
                return Err(Error::input(format!("factor {} is empty", idx + 1)));
            }
            let (base_s, exp_s) = match token.split_once('^') {
                Some((b, e)) => (b.trim(), Some(e.trim())),
                None => (token, None),
            };
            let base: u32 = base_s.parse().map_err(|_| {
                Error::input(format!("factor {}: '{base_s}' is not a number", idx + 1))
            })?;
            let exp: u32 = match exp_s {
                Some(e) => e.parse().map_err(|_| {
                    Error::input(format!("factor {}: '{e}' is not an exponent", idx + 1))
                })?,
                None => 1,
            };
            match p {
                None => p = Some(base),
                Some(q) if q != base => {
                    return Err(Error::input(format!(
                        "factors mix {q} and {base}; a p-group has a single prime"
                    )));
                }
                _ => {}
            }
            orders.push(exp);
        }
        Self::new(p.expect("at least one factor was parsed"), orders)
    }

    /// The canonical spec string, `p^k1 x p^k2 x ...`.
    pub fn to_spec_string(&self) -> String {
        let parts: Vec<String> = self.orders.iter().map(|k| format!("{}^{k}", self.p)).collect();
        parts.join(" x ")
    }

    #[inline]
    pub fn p(&self) -> u32 {
        self.p
    }

    /// The factor exponents k_i.
    #[inline]
    pub fn orders(&self) -> &[u32] {
        &self.orders
    }

    /// Number of cyclic factors m.
    #[inline]
    pub fn factor_count(&self) -> usize {
        self.orders.len()
    }

    /// |G|.
    #[inline]
    pub fn order(&self) -> usize {
        self.order as usize
    }

    /// The per-coordinate moduli p^k_i.
    #[inline]
    pub fn coordinate_sizes(&self) -> &[u32] {
        &self.sizes
    }

    /// The group exponent, i.e. the largest element order p^max(k_i).
    pub fn exponent(&self) -> u32 {
        *self.sizes.iter().max().expect("at least one factor")
    }

    /// True when every factor is Z_p itself (all exponents 1) -- the only
    /// codomain shape the testing operations accept.
    pub fn is_elementary(&self) -> bool {
        self.orders.iter().all(|&k| k == 1)
    }

    /// The index of the generator e_i (1 in coordinate i, 0 elsewhere).
    #[inline]
    pub fn generator(&self, i: usize) -> u32 {
        self.strides[i]
    }

    /// Coordinate i of the element with index x.
    #[inline]
    pub fn coordinate(&self, x: u32, i: usize) -> u32 {
        (x / self.strides[i]) % self.sizes[i]
    }

    /// x + y, coordinate-wise modulo p^k_i.
    pub fn add(&self, x: u32, y: u32) -> u32 {
        debug_assert!(x < self.order && y < self.order);
        let mut out = 0u32;
        for i in 0..self.sizes.len() {
            let c = (self.coordinate(x, i) + self.coordinate(y, i)) % self.sizes[i];
            out += c * self.strides[i];
        }
        out
    }

    /// -x.
    pub fn neg(&self, x: u32) -> u32 {
        debug_assert!(x < self.order);
        let mut out = 0u32;
        for i in 0..self.sizes.len() {
            let c = (self.sizes[i] - self.coordinate(x, i)) % self.sizes[i];
            out += c * self.strides[i];
        }
        out
    }

    /// c * x (the c-fold sum of x).
    pub fn scalar_mul(&self, c: u64, x: u32) -> u32 {
        debug_assert!(x < self.order);
        let mut out = 0u32;
        for i in 0..self.sizes.len() {
            let m = self.sizes[i] as u64;
            let coord = ((c % m) * (self.coordinate(x, i) as u64)) % m;
            out += coord as u32 * self.strides[i];
        }
        out
    }

    /// The coordinate tuple of the element with index x.
    pub fn to_tuple(&self, x: u32) -> Vec<u32> {
        (0..self.sizes.len()).map(|i| self.coordinate(x, i)).collect()
    }

    /// The index of a coordinate tuple; entries must respect the moduli.
    pub fn from_tuple(&self, tuple: &[u32]) -> Result<u32> {
        if tuple.len() != self.sizes.len() {
            return Err(Error::input(format!(
                "expected {} coordinates, got {}",
                self.sizes.len(),
                tuple.len()
            )));
        }
        let mut out = 0u32;
        for (i, &c) in tuple.iter().enumerate() {
            if c >= self.sizes[i] {
                return Err(Error::input(format!(
                    "coordinate {} is {c}, must be below {}",
                    i + 1,
                    self.sizes[i]
                )));
            }
            out += c * self.strides[i];
        }
        Ok(out)
    }

    /// The element as a comma-separated tuple, e.g. `1,0`.
    pub fn tuple_string(&self, x: u32) -> String {
        let parts: Vec<String> = self.to_tuple(x).iter().map(u32::to_string).collect();
        parts.join(",")
    }

    /// Parses a comma-separated coordinate tuple back to an index.
    pub fn parse_tuple(&self, text: &str) -> Result<u32> {
        let mut tuple = Vec::with_capacity(self.sizes.len());
        for (i, part) in text.split(',').enumerate() {
            let part = part.trim();
            let c: u32 = part.parse().map_err(|_| {
                Error::input(format!("coordinate {}: '{part}' is not a number", i + 1))
            })?;
            tuple.push(c);
        }
        self.from_tuple(&tuple)
    }
}

/// A table-backed map phi: G -> H from a p-group to an elementary group
/// over the same prime.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupMap {
    domain: FiniteAbelianPGroup,
    codomain: FiniteAbelianPGroup,
    table: Vec<u32>,
}

impl GroupMap {
    /// Wraps a value table after checking the codomain shape (elementary,
    /// same prime as the domain), the table length, and the entry range.
    pub fn new(
        domain: FiniteAbelianPGroup,
        codomain: FiniteAbelianPGroup,
        table: Vec<u32>,
    ) -> Result<Self> {
        if codomain.p() != domain.p() {
            return Err(Error::input(format!(
                "domain is a {}-group but the codomain is a {}-group",
                domain.p(),
                codomain.p()
            )));
        }
        if !codomain.is_elementary() {
            return Err(Error::input(
                "the codomain must be elementary (every factor exponent 1)",
            ));
        }
        if table.len() != domain.order() {
            return Err(Error::input(format!(
                "table holds {} values, the domain has {} elements",
                table.len(),
                domain.order()
            )));
        }
        if let Some(pos) = table.iter().position(|&v| v as usize >= codomain.order()) {
            return Err(Error::input(format!(
                "table entry {pos} is {}, outside the codomain of order {}",
                table[pos],
                codomain.order()
            )));
        }
        Ok(GroupMap {
            domain,
            codomain,
            table,
        })
    }

    /// Builds the table by evaluating `f` on every element index.
    pub fn from_fn(
        domain: FiniteAbelianPGroup,
        codomain: FiniteAbelianPGroup,
        mut f: impl FnMut(u32) -> u32,
    ) -> Result<Self> {
        let table: Vec<u32> = (0..domain.order() as u32).map(&mut f).collect();
        Self::new(domain, codomain, table)
    }

    #[inline]
    pub fn domain(&self) -> &FiniteAbelianPGroup {
        &self.domain
    }

    #[inline]
    pub fn codomain(&self) -> &FiniteAbelianPGroup {
        &self.codomain
    }

    #[inline]
    pub fn value(&self, x: u32) -> u32 {
        self.table[x as usize]
    }

    #[inline]
    pub fn table(&self) -> &[u32] {
        &self.table
    }

    /// True when phi(x + e_i) = phi(x) + phi(e_i) for every x and every
    /// generator e_i; by induction on coordinates that pins
    /// phi(x + y) = phi(x) + phi(y) everywhere (and phi(0) = 0 follows by
    /// cancellation).
    pub fn is_homomorphism(&self) -> bool {
        for i in 0..self.domain.factor_count() {
            let e = self.domain.generator(i);
            let img = self.table[e as usize];
            for x in 0..self.domain.order() as u32 {
                let lhs = self.table[self.domain.add(x, e) as usize];
                if lhs != self.codomain.add(self.table[x as usize], img) {
                    return false;
                }
            }
        }
        true
    }

    /// Parses the map file format: one codomain tuple per line, line x+1
    /// holding the value at the element with index x, |G| lines in total.
    pub fn parse(
        domain: FiniteAbelianPGroup,
        codomain: FiniteAbelianPGroup,
        text: &str,
    ) -> Result<Self> {
        let mut table = Vec::with_capacity(domain.order());
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                return Err(Error::input(format!("line {}: empty line", idx + 1)));
            }
            let value = codomain.parse_tuple(line).map_err(|e| match e {
                Error::Input(msg) => Error::input(format!("line {}: {msg}", idx + 1)),
                other => other,
            })?;
            table.push(value);
        }
        if table.len() != domain.order() {
            return Err(Error::input(format!(
                "expected {} lines, found {}",
                domain.order(),
                table.len()
            )));
        }
        Self::new(domain, codomain, table)
    }

    /// The map file text: one codomain tuple per line.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for &v in &self.table {
            out.push_str(&self.codomain.tuple_string(v));
            out.push('\n');
        }
        out
    }
}

/// Exact BLR agreement Pr_{x,y in G}(phi(x) + phi(y) = phi(x+y)) over all
/// ordered pairs: |G|^2 table reads, refused beyond the 2^26 budget.
pub fn blr_agreement(phi: &GroupMap) -> Result<f64> {
    let g = phi.domain().order() as u64;
    let required = (g as u128) * (g as u128);
    if required > EXACT_AGREEMENT_BUDGET {
        return Err(Error::budget(
            required,
            EXACT_AGREEMENT_BUDGET,
            "use blr_agreement_estimate for a Monte-Carlo value",
        ));
    }
    let hits: u64 = (0..g as u32)
        .into_par_iter()
        .map(|x| {
            let mut row = 0u64;
            for y in 0..g as u32 {
                let sum = phi.codomain().add(phi.value(x), phi.value(y));
                if sum == phi.value(phi.domain().add(x, y)) {
                    row += 1;
                }
            }
            row
        })
        .sum();
    Ok(hits as f64 / (g * g) as f64)
}

/// Monte-Carlo BLR agreement over `trials` independent pairs, three table
/// reads per trial, one RNG stream per trial.
pub fn blr_agreement_estimate(phi: &GroupMap, trials: u64, seed: u64) -> Result<TestReport> {
    if trials < 1 {
        return Err(Error::input("at least one trial is required"));
    }
    let g = phi.domain().order() as u64;
    let accepts: u64 = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = stream_rng(seed, trial);
            let x = gen_below(&mut rng, g) as u32;
            let y = gen_below(&mut rng, g) as u32;
            let sum = phi.codomain().add(phi.value(x), phi.value(y));
            (sum == phi.value(phi.domain().add(x, y))) as u64
        })
        .sum();
    Ok(TestReport::from_counts(trials, accepts, seed, 3))
}

/// phi applied to x when phi is given by its generator images.
fn apply_images(
    domain: &FiniteAbelianPGroup,
    codomain: &FiniteAbelianPGroup,
    images: &[u32],
    x: u32,
) -> u32 {
    let mut acc = 0u32;
    for (i, &img) in images.iter().enumerate() {
        let xi = domain.coordinate(x, i);
        acc = codomain.add(acc, codomain.scalar_mul(xi as u64, img));
    }
    acc
}

/// The homomorphism sending generator e_i to `images[i]`. Every image
/// assignment is valid: elements of an elementary codomain have order 1
/// or p, which divides every generator order p^k_i.
pub fn homomorphism_from_images(
    domain: &FiniteAbelianPGroup,
    codomain: &FiniteAbelianPGroup,
    images: &[u32],
) -> Result<GroupMap> {
    if images.len() != domain.factor_count() {
        return Err(Error::input(format!(
            "expected {} generator images, got {}",
            domain.factor_count(),
            images.len()
        )));
    }
    if let Some(pos) = images.iter().position(|&v| v as usize >= codomain.order()) {
        return Err(Error::input(format!(
            "image {pos} is {}, outside the codomain of order {}",
            images[pos],
            codomain.order()
        )));
    }
    GroupMap::from_fn(domain.clone(), codomain.clone(), |x| {
        apply_images(domain, codomain, images, x)
    })
}

/// |Hom(G, H)| = |H|^m for an elementary codomain.
pub fn homomorphism_count(domain: &FiniteAbelianPGroup, codomain: &FiniteAbelianPGroup) -> u128 {
    let mut count: u128 = 1;
    for _ in 0..domain.factor_count() {
        count = count.saturating_mul(codomain.order() as u128);
    }
    count
}

/// Generator images of the homomorphism with the given enumeration code
/// (image of e_0 in the least significant digit).
fn images_of_code(code: u64, h_order: u64, m: usize) -> Vec<u32> {
    (0..m).map(|i| ((code / h_order.pow(i as u32)) % h_order) as u32).collect()
}

/// Every homomorphism G -> H as a materialized table, in enumeration code
/// order (image of the first generator varying fastest).
pub fn enumerate_homomorphisms(
    domain: &FiniteAbelianPGroup,
    codomain: &FiniteAbelianPGroup,
) -> Result<Vec<GroupMap>> {
    let count = homomorphism_count(domain, codomain);
    if count > HOM_ENUMERATION_BUDGET {
        return Err(Error::budget(
            count,
            HOM_ENUMERATION_BUDGET,
            "the homomorphism space is too large to enumerate",
        ));
    }
    let tables = count.saturating_mul(domain.order() as u128);
    if tables > HOM_TABLE_BUDGET {
        return Err(Error::budget(
            tables,
            HOM_TABLE_BUDGET,
            "materializing every table is too large; use best_homomorphism",
        ));
    }
    let h_order = codomain.order() as u64;
    let m = domain.factor_count();
    (0..count as u64)
        .map(|code| homomorphism_from_images(domain, codomain, &images_of_code(code, h_order, m)))
        .collect()
}

/// Fraction of elements where the two maps agree.
pub fn map_agreement(a: &GroupMap, b: &GroupMap) -> Result<f64> {
    if a.domain() != b.domain() || a.codomain() != b.codomain() {
        return Err(Error::input("the two maps must share domain and codomain"));
    }
    let hits = a
        .table()
        .iter()
        .zip(b.table())
        .filter(|(x, y)| x == y)
        .count();
    Ok(hits as f64 / a.domain().order() as f64)
}

/// The homomorphism agreeing with phi on the most elements, found by
/// exhaustive search over all |H|^m of them, with its agreement fraction.
/// Ties keep the smallest enumeration code, so the result is
/// deterministic.
pub fn best_homomorphism(phi: &GroupMap) -> Result<(GroupMap, f64)> {
    let domain = phi.domain();
    let codomain = phi.codomain();
    let count = homomorphism_count(domain, codomain);
    if count > HOM_ENUMERATION_BUDGET {
        return Err(Error::budget(
            count,
            HOM_ENUMERATION_BUDGET,
            "the homomorphism space is too large to search",
        ));
    }
    let h_order = codomain.order() as u64;
    let m = domain.factor_count();
    let g_order = domain.order() as u32;
    let best = (0..count as u64)
        .into_par_iter()
        .map(|code| {
            let images = images_of_code(code, h_order, m);
            let hits = (0..g_order)
                .filter(|&x| apply_images(domain, codomain, &images, x) == phi.value(x))
                .count() as u64;
            (hits, code)
        })
        .reduce_with(|a, b| {
            if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                b
            } else {
                a
            }
        })
        .expect("the zero map is always a candidate");
    let psi = homomorphism_from_images(domain, codomain, &images_of_code(best.1, h_order, m))?;
    Ok((psi, best.0 as f64 / g_order as f64))
}

/// Corrects a homomorphism toward phi using a shift witness.
///
/// E = {x : phi(x) = psi(x) + h} is where phi looks like psi shifted by
/// h. The correction scans every coordinate i and every unit g of
/// Z_(p^k_i) for the largest slice E' = {x in E : x_i = g} (smallest
/// (i, g) on ties) and returns the homomorphism that matches psi on every
/// generator except e_i, where the image becomes psi(e_i) + g^(-1) h
/// (inverse taken modulo p^k_i). For x in E' the new map evaluates to
/// psi(x) + x_i g^(-1) h = psi(x) + h = phi(x), so it agrees with phi on
/// all of E' and its agreement is at least |E'|/|G|. When every slice is
/// empty (E contains only elements with no unit coordinate, e.g.
/// E = {0}), psi is returned unchanged and the guarantee is vacuous.
pub fn shift_correction(phi: &GroupMap, psi: &GroupMap, h: u32) -> Result<GroupMap> {
    if phi.domain() != psi.domain() || phi.codomain() != psi.codomain() {
        return Err(Error::input("the two maps must share domain and codomain"));
    }
    let domain = phi.domain();
    let codomain = phi.codomain();
    if h as usize >= codomain.order() {
        return Err(Error::input(format!(
            "shift {h} is outside the codomain of order {}",
            codomain.order()
        )));
    }
    if !psi.is_homomorphism() {
        return Err(Error::input("the map to correct must be a homomorphism"));
    }
    let shifted_set: Vec<u32> = (0..domain.order() as u32)
        .filter(|&x| phi.value(x) == codomain.add(psi.value(x), h))
        .collect();
    if shifted_set.is_empty() {
        return Err(Error::input(
            "phi never equals psi + h; there is nothing to anchor a correction on",
        ));
    }
    let p = domain.p();
    let mut best: Option<(usize, u32, usize)> = None;
    for i in 0..domain.factor_count() {
        let size = domain.coordinate_sizes()[i];
        for g in 1..size {
            if g % p == 0 {
                continue; // not a unit: g generates a proper subgroup
            }
            let count = shifted_set
                .iter()
                .filter(|&&x| domain.coordinate(x, i) == g)
                .count();
            if best.map_or(true, |(_, _, c)| count > c) {
                best = Some((i, g, count));
            }
        }
    }
    let (i, g, count) = best.expect("every coordinate admits the unit 1");
    if count == 0 {
        return Ok(psi.clone());
    }
    let inv = mod_inverse(g as u64, domain.coordinate_sizes()[i] as u64);
    let mut images: Vec<u32> = (0..domain.factor_count())
        .map(|j| psi.value(domain.generator(j)))
        .collect();
    images[i] = codomain.add(images[i], codomain.scalar_mul(inv, h));
    homomorphism_from_images(domain, codomain, &images)
}
