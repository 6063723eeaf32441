//! Discrete quantum noises on a finite atom chain, and the Ito table of the
//! limit gauge noises as exact integer structure constants.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Mul;

use crate::bath::discrete_noise;
use crate::error::{Error, Result};
use crate::matrix::{kron, ComplexMatrix, C64};

/// A basis vector `e_σ` of a chain of `m` sites, each with `levels`
/// excitation indices. Sites absent from the assignment carry `Ω = e_0`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChainBasisElement {
    levels: usize,
    // sites[k - 1] = excitation index at site k, 0 for Ω
    sites: Vec<usize>,
}

impl ChainBasisElement {
    pub fn vacuum(levels: usize, m: usize) -> Self {
        Self {
            levels,
            sites: vec![0; m],
        }
    }

    /// From `(site, index)` pairs; at most one index per site.
    pub fn new(levels: usize, m: usize, assignment: &[(usize, usize)]) -> Result<Self> {
        let mut e = Self::vacuum(levels, m);
        for &(k, i) in assignment {
            if k == 0 || k > m {
                return Err(Error::IndexOutOfRange(format!("site {k} of {m}")));
            }
            if i == 0 || i > levels {
                return Err(Error::IndexOutOfRange(format!("excitation {i} with {levels} levels")));
            }
            if e.sites[k - 1] != 0 {
                return Err(Error::invalid("assignment", format!("site {k} is assigned twice")));
            }
            e.sites[k - 1] = i;
        }
        Ok(e)
    }

    /// Every basis element, in index order.
    pub fn all(levels: usize, m: usize) -> Vec<Self> {
        let dim = (levels + 1).pow(m as u32);
        (0..dim).map(|idx| Self::from_index(levels, m, idx)).collect()
    }

    /// Site 1 is the most significant digit.
    pub fn from_index(levels: usize, m: usize, mut idx: usize) -> Self {
        let mut sites = vec![0; m];
        for k in (0..m).rev() {
            sites[k] = idx % (levels + 1);
            idx /= levels + 1;
        }
        Self { levels, sites }
    }

    pub fn index(&self) -> usize {
        self.sites.iter().fold(0, |acc, &i| acc * (self.levels + 1) + i)
    }

    pub fn m(&self) -> usize {
        self.sites.len()
    }

    /// Excitation index at site `k`, if any.
    pub fn at(&self, k: usize) -> Option<usize> {
        match self.sites[k - 1] {
            0 => None,
            i => Some(i),
        }
    }

    /// The `(site, index)` pairs of `σ`.
    pub fn assignment(&self) -> Vec<(usize, usize)> {
        self.sites
            .iter()
            .enumerate()
            .filter(|(_, i)| **i != 0)
            .map(|(k, i)| (k + 1, *i))
            .collect()
    }

    fn with_site(&self, k: usize, i: usize) -> Self {
        let mut out = self.clone();
        out.sites[k - 1] = i;
        out
    }
}

/// `a^i_j(k)` on `m` sites: `a^i_j = |e_j⟩⟨e_i|` at site `k`, identity
/// elsewhere.
pub fn chain_noise_operator(levels: usize, m: usize, k: usize, i: usize, j: usize) -> Result<ComplexMatrix> {
    if k == 0 || k > m {
        return Err(Error::IndexOutOfRange(format!("site {k} of {m}")));
    }
    let local = discrete_noise(levels, i, j)?;
    let id = ComplexMatrix::identity(levels + 1);
    let mut out = ComplexMatrix::identity(1);
    for site in 1..=m {
        out = kron(&out, if site == k { &local } else { &id });
    }
    Ok(out)
}

/// The combinatorial action of `a^i_j(k)` on `e_σ`; `None` is the zero
/// vector.
pub fn chain_action(e: &ChainBasisElement, k: usize, i: usize, j: usize) -> Option<ChainBasisElement> {
    let here = e.at(k);
    match (i, j) {
        (0, 0) => here.is_none().then(|| e.clone()),
        (0, j) => here.is_none().then(|| e.with_site(k, j)),
        (i, 0) => (here == Some(i)).then(|| e.with_site(k, 0)),
        (i, j) => (here == Some(i)).then(|| e.with_site(k, j)),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionMismatch {
    pub site: usize,
    pub i: usize,
    pub j: usize,
    pub basis: ChainBasisElement,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainActionReport {
    pub levels: usize,
    pub m: usize,
    pub operators_checked: usize,
    pub vectors_checked: usize,
    pub mismatches: Vec<ActionMismatch>,
    /// Noises at different sites commute exactly.
    pub distinct_sites_commute: bool,
    /// `Σ_i a^i_i(k) = I` exactly at every site.
    pub completeness: bool,
}

impl ChainActionReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty() && self.distinct_sites_commute && self.completeness
    }
}

/// Compares every column of every `a^i_j(k)` with [`chain_action`],
/// exactly.
pub fn verify_chain_actions(levels: usize, m: usize) -> Result<ChainActionReport> {
    if m == 0 {
        return Err(Error::invalid("m", "the chain needs at least one site"));
    }
    let basis = ChainBasisElement::all(levels, m);
    let dim = basis.len();
    let one = C64::new(1.0, 0.0);
    let mut mismatches = Vec::new();
    let mut ops = BTreeMap::new();
    for k in 1..=m {
        for i in 0..=levels {
            for j in 0..=levels {
                let op = chain_noise_operator(levels, m, k, i, j)?;
                for e in &basis {
                    let col = e.index();
                    let expected = chain_action(e, k, i, j).map(|x| x.index());
                    let ok = (0..dim).all(|r| {
                        let want = if Some(r) == expected { one } else { C64::new(0.0, 0.0) };
                        op[(r, col)] == want
                    });
                    if !ok {
                        mismatches.push(ActionMismatch {
                            site: k,
                            i,
                            j,
                            basis: e.clone(),
                        });
                    }
                }
                ops.insert((k, i, j), op);
            }
        }
    }

    let mut distinct_sites_commute = true;
    for (&(k, ..), a) in &ops {
        for (&(k2, ..), b) in &ops {
            if k2 > k {
                distinct_sites_commute &= &(a * b) - &(b * a) == ComplexMatrix::zeros(dim, dim);
            }
        }
    }
    let completeness = (1..=m).all(|k| {
        let mut acc = ComplexMatrix::zeros(dim, dim);
        for i in 0..=levels {
            acc += &ops[&(k, i, i)];
        }
        acc == ComplexMatrix::identity(dim)
    });

    Ok(ChainActionReport {
        levels,
        m,
        operators_checked: ops.len(),
        vectors_checked: dim,
        mismatches,
        distinct_sites_commute,
        completeness,
    })
}

/// A non-vacuum pair `(i, j)` labelling the multiplicity space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiplicityIndex {
    pub i: usize,
    pub j: usize,
}

impl MultiplicityIndex {
    pub fn new(i: usize, j: usize) -> Result<Self> {
        if (i, j) == (0, 0) {
            return Err(Error::invalid("multiplicity index", "(0, 0) is the vacuum pair"));
        }
        Ok(Self { i, j })
    }

    /// All indices for `n` excited levels, lexicographic.
    pub fn all(n: usize) -> Vec<Self> {
        let m = n + 1;
        (1..m * m).map(|p| Self { i: p / m, j: p % m }).collect()
    }

    /// Position in [`MultiplicityIndex::all`].
    pub fn position(&self, n: usize) -> usize {
        self.i * (n + 1) + self.j - 1
    }
}

impl fmt::Display for MultiplicityIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.i, self.j)
    }
}

/// `da^upper_lower(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NoiseDifferential {
    pub upper: MultiplicityIndex,
    pub lower: MultiplicityIndex,
}

/// `da^a_b · da^c_d = δ_{a,d} da^c_b`.
pub fn ito_product(
    a: MultiplicityIndex,
    b: MultiplicityIndex,
    c: MultiplicityIndex,
    d: MultiplicityIndex,
) -> Option<NoiseDifferential> {
    (a == d).then_some(NoiseDifferential { upper: c, lower: b })
}

/// Square integer matrix with sparse storage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntMatrix {
    dim: usize,
    entries: BTreeMap<(usize, usize), i64>,
}

impl IntMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: BTreeMap::new(),
        }
    }

    /// `E_{r,c}`.
    pub fn unit(dim: usize, r: usize, c: usize) -> Self {
        let mut m = Self::zeros(dim);
        m.add_at(r, c, 1);
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, r: usize, c: usize) -> i64 {
        self.entries.get(&(r, c)).copied().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn nonzeros(&self) -> impl Iterator<Item = (usize, usize, i64)> + '_ {
        self.entries.iter().map(|(&(r, c), &v)| (r, c, v))
    }

    fn add_at(&mut self, r: usize, c: usize, v: i64) {
        assert!(r < self.dim && c < self.dim, "entry ({r}, {c}) outside {}", self.dim);
        let e = self.entries.entry((r, c)).or_insert(0);
        *e += v;
        if *e == 0 {
            self.entries.remove(&(r, c));
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (r, c, v) in other.nonzeros() {
            out.add_at(r, c, v);
        }
        out
    }
}

impl Mul for &IntMatrix {
    type Output = IntMatrix;

    fn mul(self, rhs: &IntMatrix) -> IntMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in IntMatrix product");
        let mut by_row: BTreeMap<usize, Vec<(usize, i64)>> = BTreeMap::new();
        for (r, c, v) in rhs.nonzeros() {
            by_row.entry(r).or_default().push((c, v));
        }
        let mut out = IntMatrix::zeros(self.dim);
        for (r, k, a) in self.nonzeros() {
            if let Some(row) = by_row.get(&k) {
                for &(c, b) in row {
                    out.add_at(r, c, a * b);
                }
            }
        }
        out
    }
}

/// `da^a_b ↦ E_{b,a}` on the multiplicity space of `n` excited levels.
pub fn noise_matrix(n: usize, dn: &NoiseDifferential) -> IntMatrix {
    let dim = (n + 1) * (n + 1) - 1;
    IntMatrix::unit(dim, dn.lower.position(n), dn.upper.position(n))
}

/// Checks that `da ↦ E` turns every [`ito_product`] into the matrix
/// product, over all `((n+1)²−1)^4` quadruples. Returns the number of
/// products checked and the failures.
pub fn verify_homomorphism(n: usize) -> (usize, Vec<[MultiplicityIndex; 4]>) {
    let idx = MultiplicityIndex::all(n);
    let dim = idx.len();
    let mut failures = Vec::new();
    let mut checked = 0;
    for &a in &idx {
        for &b in &idx {
            let left = noise_matrix(n, &NoiseDifferential { upper: a, lower: b });
            for &c in &idx {
                for &d in &idx {
                    let right = noise_matrix(n, &NoiseDifferential { upper: c, lower: d });
                    let product = &left * &right;
                    let expected = match ito_product(a, b, c, d) {
                        Some(dn) => noise_matrix(n, &dn),
                        None => IntMatrix::zeros(dim),
                    };
                    checked += 1;
                    if product != expected {
                        failures.push([a, b, c, d]);
                    }
                }
            }
        }
    }
    (checked, failures)
}

/// Which copies `i` enter `A^j_k = Σ_i da^{(i,j)}_{(i,k)}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggregationRange {
    /// `i = 0..=n`, every copy carrying the scattering.
    WithGround,
    /// `i = 1..=n`.
    Excited,
}

impl AggregationRange {
    fn copies(&self, n: usize) -> std::ops::RangeInclusive<usize> {
        match self {
            AggregationRange::WithGround => 0..=n,
            AggregationRange::Excited => 1..=n,
        }
    }
}

/// `A^j_k` as a sum of matrix units `E_{(i,k),(i,j)}`.
pub fn aggregated_noise(n: usize, j: usize, k: usize, range: AggregationRange) -> Result<IntMatrix> {
    if j == 0 || k == 0 || j > n || k > n {
        return Err(Error::IndexOutOfRange(format!("A^{j}_{k} with n = {n}")));
    }
    let dim = (n + 1) * (n + 1) - 1;
    let mut out = IntMatrix::zeros(dim);
    for i in range.copies(n) {
        let dn = NoiseDifferential {
            upper: MultiplicityIndex::new(i, j)?,
            lower: MultiplicityIndex::new(i, k)?,
        };
        out = out.add(&noise_matrix(n, &dn));
    }
    Ok(out)
}

/// A product decoded back into the aggregated basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProductForm {
    Zero,
    /// `A^upper_lower`.
    Aggregate { upper: usize, lower: usize },
    Other,
}

impl fmt::Display for ProductForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProductForm::Zero => write!(f, "0"),
            ProductForm::Aggregate { upper, lower } => write!(f, "A^{upper}_{lower}"),
            ProductForm::Other => write!(f, "other"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ItoRow {
    pub j: usize,
    pub k: usize,
    pub l: usize,
    pub m: usize,
    pub expected: ProductForm,
    pub actual: ProductForm,
}

impl ItoRow {
    pub fn matches(&self) -> bool {
        self.expected == self.actual
    }
}

#[derive(Debug, Clone)]
pub struct ItoReport {
    pub n: usize,
    pub range: AggregationRange,
    pub rows: Vec<ItoRow>,
}

impl ItoReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(ItoRow::matches)
    }
}

/// Verifies `dA^j_k dA^m_l = δ_{jl} dA^m_k` for all `j, k, l, m` in
/// `1..=n`.
pub fn aggregated_ito_check(n: usize, range: AggregationRange) -> Result<ItoReport> {
    if n == 0 {
        return Err(Error::invalid("n", "needs at least one excited level"));
    }
    let mut table = Vec::with_capacity(n * n);
    for j in 1..=n {
        for k in 1..=n {
            table.push(((j, k), aggregated_noise(n, j, k, range)?));
        }
    }
    let decode = |p: &IntMatrix| {
        if p.is_zero() {
            return ProductForm::Zero;
        }
        table
            .iter()
            .find(|(_, a)| a == p)
            .map_or(ProductForm::Other, |&((upper, lower), _)| ProductForm::Aggregate { upper, lower })
    };
    let mut rows = Vec::with_capacity(n.pow(4));
    for j in 1..=n {
        for k in 1..=n {
            for l in 1..=n {
                for m in 1..=n {
                    let left = aggregated_noise(n, j, k, range)?;
                    let right = aggregated_noise(n, m, l, range)?;
                    let expected = if j == l {
                        ProductForm::Aggregate { upper: m, lower: k }
                    } else {
                        ProductForm::Zero
                    };
                    rows.push(ItoRow {
                        j,
                        k,
                        l,
                        m,
                        expected,
                        actual: decode(&(&left * &right)),
                    });
                }
            }
        }
    }
    Ok(ItoReport { n, range, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mi(i: usize, j: usize) -> MultiplicityIndex {
        MultiplicityIndex::new(i, j).unwrap()
    }

    #[test]
    fn single_site_is_the_local_noise() {
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(
                    chain_noise_operator(2, 1, 1, i, j).unwrap(),
                    discrete_noise(2, i, j).unwrap()
                );
            }
        }
        assert!(chain_noise_operator(2, 2, 3, 0, 0).is_err());
        assert!(chain_noise_operator(2, 2, 1, 3, 0).is_err());
    }

    #[test]
    fn basis_indexing_round_trips() {
        let all = ChainBasisElement::all(2, 3);
        assert_eq!(all.len(), 27);
        for (idx, e) in all.iter().enumerate() {
            assert_eq!(e.index(), idx);
        }
        let e = ChainBasisElement::new(2, 3, &[(1, 2), (3, 1)]).unwrap();
        assert_eq!(e.index(), 2 * 9 + 1);
        assert_eq!(e.assignment(), vec![(1, 2), (3, 1)]);
        assert!(ChainBasisElement::new(2, 3, &[(1, 2), (1, 1)]).is_err());
        assert!(ChainBasisElement::new(2, 3, &[(4, 1)]).is_err());
    }

    #[test]
    fn smallest_chain() {
        let r = verify_chain_actions(1, 1).unwrap();
        assert_eq!(r.operators_checked, 4);
        assert_eq!(r.vectors_checked, 2);
        assert!(r.passed());
    }

    #[test]
    fn exhaustive_small_chains() {
        for levels in 1..=2 {
            for m in 1..=3 {
                let r = verify_chain_actions(levels, m).unwrap();
                assert!(r.passed(), "levels {levels}, m {m}: {:?}", r.mismatches);
            }
        }
    }

    #[test]
    fn vacuum_counting() {
        let e = ChainBasisElement::new(2, 3, &[(2, 1)]).unwrap();
        assert_eq!(chain_action(&e, 1, 0, 0), Some(e.clone()));
        assert_eq!(chain_action(&e, 2, 0, 0), None);
        assert_eq!(chain_action(&e, 2, 1, 0), Some(ChainBasisElement::vacuum(2, 3)));
        assert_eq!(chain_action(&e, 2, 2, 0), None);
        assert_eq!(
            chain_action(&e, 2, 1, 2),
            Some(ChainBasisElement::new(2, 3, &[(2, 2)]).unwrap())
        );
    }

    #[test]
    fn ito_product_cases() {
        assert_eq!(
            ito_product(mi(1, 2), mi(1, 3), mi(1, 4), mi(1, 2)),
            Some(NoiseDifferential {
                upper: mi(1, 4),
                lower: mi(1, 3)
            })
        );
        assert_eq!(ito_product(mi(1, 2), mi(1, 3), mi(1, 4), mi(1, 5)), None);
        assert!(MultiplicityIndex::new(0, 0).is_err());
    }

    #[test]
    fn homomorphism_small_n() {
        for n in 1..=3 {
            let (checked, failures) = verify_homomorphism(n);
            assert_eq!(checked, ((n + 1) * (n + 1) - 1).pow(4));
            assert!(failures.is_empty());
        }
    }

    #[test]
    fn aggregated_table() {
        for range in [AggregationRange::WithGround, AggregationRange::Excited] {
            let r = aggregated_ito_check(1, range).unwrap();
            assert_eq!(r.rows.len(), 1);
            assert_eq!(r.rows[0].actual, ProductForm::Aggregate { upper: 1, lower: 1 });
            let r = aggregated_ito_check(2, range).unwrap();
            assert_eq!(r.rows.len(), 16);
            assert!(r.passed());
            for row in r.rows.iter().filter(|row| row.j != row.l) {
                assert_eq!(row.actual, ProductForm::Zero);
            }
        }
        assert!(aggregated_ito_check(0, AggregationRange::Excited).is_err());
    }

    #[test]
    fn int_matrix_products() {
        let a = IntMatrix::unit(3, 0, 1);
        let b = IntMatrix::unit(3, 1, 2);
        assert_eq!(&a * &b, IntMatrix::unit(3, 0, 2));
        assert!((&b * &a).is_zero());
        let s = a.add(&a);
        assert_eq!(s.get(0, 1), 2);
        assert_eq!(ProductForm::Aggregate { upper: 2, lower: 1 }.to_string(), "A^2_1");
    }
}
