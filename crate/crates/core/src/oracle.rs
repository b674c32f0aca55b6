//! Exhaustive check of the orbit-sum decomposition on finite domains.
//!
//! An assignment gives every element of a finite set `X` one of `|F|` values.
//! The group acts by permuting elements within each orbit, so two assignments
//! are equivalent exactly when every orbit holds the same multiset of values.
//!
//! Values are coded `c(v) = v + 1` and each orbit is encoded as the product of
//! primes `∏ p_{c(x)}`, an exact integer whose factorization recovers the
//! orbit's value multiset. A dictionary indexes every `(orbit, encoding)` pair
//! met during enumeration, and the whole assignment is encoded as the product
//! of the primes at those indices. [`verify_expressivity`] checks that this
//! composite code is invariant and injective on equivalence classes, so any
//! invariant function factors through it via a lookup table.
//!
//! All arithmetic is on arbitrary-precision integers; logarithms are only for
//! display.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// The `i`-th prime, 1-based (`nth_prime(1) = 2`).
pub fn nth_prime(i: usize) -> u64 {
    assert!(i >= 1, "primes are indexed from 1");
    let mut found = 0;
    let mut candidate = 1u64;
    while found < i {
        candidate += 1;
        if (2..).take_while(|d: &u64| d * d <= candidate).all(|d| !candidate.is_multiple_of(d)) {
            found += 1;
        }
    }
    candidate
}

fn primes_up_to_index(n: usize) -> Vec<u64> {
    let mut out: Vec<u64> = Vec::with_capacity(n);
    let mut candidate = 1u64;
    while out.len() < n {
        candidate += 1;
        if out.iter().take_while(|p| *p * *p <= candidate).all(|p| !candidate.is_multiple_of(*p)) {
            out.push(candidate);
        }
    }
    out
}

/// An exact prime-product code.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Encoding(pub BigUint);

impl Encoding {
    pub fn one() -> Self {
        Encoding(BigUint::one())
    }

    /// Natural logarithm, for display.
    pub fn ln(&self) -> f64 {
        match self.0.to_f64() {
            Some(x) if x.is_finite() => x.ln(),
            _ => {
                let bits = self.0.bits();
                let shift = bits.saturating_sub(60);
                let top = (&self.0 >> shift).to_f64().unwrap();
                top.ln() + shift as f64 * std::f64::consts::LN_2
            }
        }
    }

    /// Prime indices of the factorization, ascending with multiplicity.
    pub fn prime_indices(&self) -> Vec<usize> {
        let mut rest = self.0.clone();
        let mut out = Vec::new();
        let mut idx = 0;
        let mut p = 1u64;
        while !rest.is_one() && !rest.is_zero() {
            p += 1;
            if !(2..).take_while(|d: &u64| d * d <= p).all(|d| !p.is_multiple_of(d)) {
                continue;
            }
            idx += 1;
            let bp = BigUint::from(p);
            while (&rest % &bp).is_zero() {
                rest /= &bp;
                out.push(idx);
            }
        }
        out
    }
}

impl std::fmt::Display for Encoding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// `∏ p_i` over the given 1-based prime indices. Order-free; empty → 1.
pub fn prime_product(indices: &[usize]) -> Encoding {
    let max = indices.iter().copied().max().unwrap_or(0);
    let primes = primes_up_to_index(max);
    let mut acc = BigUint::one();
    for &i in indices {
        assert!(i >= 1, "prime indices start at 1");
        acc *= primes[i - 1];
    }
    Encoding(acc)
}

/// Encodes one orbit's multiset of value codes.
pub fn psi_encode(codes: &[usize]) -> Encoding {
    prime_product(codes)
}

/// A finite set of elements, a finite set of values, and an orbit partition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteDomain {
    pub n_elements: usize,
    pub n_values: usize,
    pub orbits: Vec<Vec<usize>>,
}

/// Value index of every element, i.e. one member of `F^X`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Assignment(pub Vec<usize>);

impl FiniteDomain {
    pub fn new(n_elements: usize, n_values: usize, orbits: Vec<Vec<usize>>) -> Result<Self> {
        if n_elements == 0 || n_values == 0 || orbits.is_empty() || orbits.iter().any(|o| o.is_empty()) {
            return Err(Error::InvalidArgument("domain sets and orbits must be nonempty".into()));
        }
        let mut seen = vec![false; n_elements];
        for &x in orbits.iter().flatten() {
            if x >= n_elements || seen[x] {
                return Err(Error::InvalidArgument(format!("element {x} is out of range or in two orbits")));
            }
            seen[x] = true;
        }
        if !seen.iter().all(|s| *s) {
            return Err(Error::InvalidArgument("orbits do not cover every element".into()));
        }
        Ok(Self { n_elements, n_values, orbits })
    }

    pub fn assignment_count(&self) -> usize {
        self.n_values.pow(self.n_elements as u32)
    }

    /// The assignment with mixed-radix index `idx` (element 0 least significant).
    pub fn assignment(&self, mut idx: usize) -> Assignment {
        let mut vals = Vec::with_capacity(self.n_elements);
        for _ in 0..self.n_elements {
            vals.push(idx % self.n_values);
            idx /= self.n_values;
        }
        Assignment(vals)
    }

    pub fn index_of(&self, a: &Assignment) -> usize {
        a.0.iter().rev().fold(0, |acc, v| acc * self.n_values + v)
    }

    pub fn assignments(&self) -> impl Iterator<Item = Assignment> + '_ {
        (0..self.assignment_count()).map(|i| self.assignment(i))
    }

    /// Per-orbit sorted values: identical exactly for equivalent assignments.
    pub fn class_key(&self, a: &Assignment) -> Vec<Vec<usize>> {
        self.orbits
            .iter()
            .map(|orbit| {
                let mut v: Vec<usize> = orbit.iter().map(|&x| a.0[x]).collect();
                v.sort_unstable();
                v
            })
            .collect()
    }
}

/// Value codes `c(v) = v + 1`, in value order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValueCodes(Vec<usize>);

impl ValueCodes {
    pub fn code(&self, value: usize) -> usize {
        self.0[value]
    }

    pub fn codes(&self) -> &[usize] {
        &self.0
    }
}

pub fn enumerate_value_codes(domain: &FiniteDomain) -> ValueCodes {
    ValueCodes((1..=domain.n_values).collect())
}

/// The value codes one orbit witnesses under an assignment.
fn orbit_codes(orbit: &[usize], codes: &ValueCodes, a: &Assignment) -> Vec<usize> {
    orbit.iter().map(|&x| codes.code(a.0[x])).collect()
}

/// 1-based indices for every `(orbit, encoding)` pair the domain can produce.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrbitDictionary {
    index: BTreeMap<(usize, Encoding), usize>,
}

impl OrbitDictionary {
    /// Enumerates every assignment of the domain.
    pub fn build(domain: &FiniteDomain, codes: &ValueCodes) -> Self {
        let mut keys = std::collections::BTreeSet::new();
        for a in domain.assignments() {
            for (q, orbit) in domain.orbits.iter().enumerate() {
                keys.insert((q, psi_encode(&orbit_codes(orbit, codes, &a))));
            }
        }
        Self { index: keys.into_iter().enumerate().map(|(i, k)| (k, i + 1)).collect() }
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn index(&self, orbit: usize, enc: &Encoding) -> Option<usize> {
        self.index.get(&(orbit, enc.clone())).copied()
    }
}

/// Encodes the multiset of per-orbit encodings, each tagged with its orbit.
pub fn phi_encode(orbit_encodings: &[(usize, Encoding)], dict: &OrbitDictionary) -> Result<Encoding> {
    let indices = orbit_encodings
        .iter()
        .map(|(q, e)| dict.index(*q, e).ok_or_else(|| Error::UnseenEncoding(format!("orbit {q}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(prime_product(&indices))
}

/// The composite invariant code of one assignment.
pub fn encode_assignment(domain: &FiniteDomain, codes: &ValueCodes, dict: &OrbitDictionary, a: &Assignment) -> Result<Encoding> {
    let per_orbit: Vec<(usize, Encoding)> =
        domain.orbits.iter().enumerate().map(|(q, orbit)| (q, psi_encode(&orbit_codes(orbit, codes, a)))).collect();
    phi_encode(&per_orbit, dict)
}

/// Values of `f` at every assignment, in [`FiniteDomain::assignment`] order.
pub fn tabulate(domain: &FiniteDomain, f: impl Fn(&Assignment) -> i64) -> Vec<i64> {
    domain.assignments().map(|a| f(&a)).collect()
}

/// An invariant function with an independent random value on every class.
pub fn random_invariant_table(domain: &FiniteDomain, seed: u64, range: i64) -> Vec<i64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut per_class: BTreeMap<Vec<Vec<usize>>, i64> = BTreeMap::new();
    domain.assignments().map(|a| *per_class.entry(domain.class_key(&a)).or_insert_with(|| rng.random_range(0..range.max(1)))).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpressivityReport {
    pub assignments: usize,
    pub classes: usize,
    pub dictionary_size: usize,
    /// Pairs of inequivalent assignments sharing one code.
    pub collisions: Vec<(Assignment, Assignment)>,
    /// Pairs of equivalent assignments with different codes.
    pub invariance_violations: Vec<(Assignment, Assignment)>,
    /// Equivalent assignments on which the tabulated function differs.
    pub non_invariant_witness: Option<(Assignment, Assignment)>,
    /// Size of the lookup table realizing the function from the code.
    pub lookup_entries: usize,
    /// Largest code, as its natural log.
    pub max_code_ln: f64,
}

impl ExpressivityReport {
    pub fn passed(&self) -> bool {
        self.collisions.is_empty() && self.invariance_violations.is_empty() && self.non_invariant_witness.is_none()
    }

    /// `key=value` lines for machine consumption.
    pub fn to_key_values(&self) -> String {
        format!(
            "passed={}\nassignments={}\nclasses={}\ndictionary_size={}\ncollisions={}\ninvariance_violations={}\nnon_invariant={}\nlookup_entries={}\nmax_code_ln={:.6}\n",
            self.passed(),
            self.assignments,
            self.classes,
            self.dictionary_size,
            self.collisions.len(),
            self.invariance_violations.len(),
            self.non_invariant_witness.is_some(),
            self.lookup_entries,
            self.max_code_ln,
        )
    }
}

/// Checks that the composite code is invariant and separates equivalence
/// classes, and that `table` (values of `f` per assignment) factors through it.
pub fn verify_expressivity(domain: &FiniteDomain, table: &[i64]) -> Result<ExpressivityReport> {
    if table.len() != domain.assignment_count() {
        return Err(Error::DimensionMismatch { expected: domain.assignment_count(), actual: table.len() });
    }
    let codes = enumerate_value_codes(domain);
    let dict = OrbitDictionary::build(domain, &codes);

    // first assignment, its code and its f value, per class
    let mut classes: BTreeMap<Vec<Vec<usize>>, (Assignment, Encoding, i64)> = BTreeMap::new();
    let mut code_owner: BTreeMap<Encoding, (Vec<Vec<usize>>, Assignment)> = BTreeMap::new();
    let mut collisions = Vec::new();
    let mut invariance_violations = Vec::new();
    let mut non_invariant_witness = None;
    let mut max_code_ln: f64 = 0.0;

    for (i, a) in domain.assignments().enumerate() {
        let key = domain.class_key(&a);
        let code = encode_assignment(domain, &codes, &dict, &a)?;
        max_code_ln = max_code_ln.max(code.ln());
        match classes.get(&key) {
            Some((rep, rep_code, rep_f)) => {
                if *rep_code != code {
                    invariance_violations.push((rep.clone(), a.clone()));
                }
                if *rep_f != table[i] && non_invariant_witness.is_none() {
                    non_invariant_witness = Some((rep.clone(), a.clone()));
                }
            }
            None => {
                classes.insert(key.clone(), (a.clone(), code.clone(), table[i]));
            }
        }
        match code_owner.get(&code) {
            Some((owner_key, owner)) if *owner_key != key => collisions.push((owner.clone(), a.clone())),
            Some(_) => {}
            None => {
                code_owner.insert(code, (key, a));
            }
        }
    }

    // the lookup table ρ: code → f, and a check that f = ρ ∘ code everywhere
    let rho: BTreeMap<&Encoding, i64> = classes.values().map(|(_, c, f)| (c, *f)).collect();
    if non_invariant_witness.is_none() && collisions.is_empty() {
        for (i, a) in domain.assignments().enumerate() {
            let code = encode_assignment(domain, &codes, &dict, &a)?;
            if rho.get(&code) != Some(&table[i]) {
                let rep = classes[&domain.class_key(&a)].0.clone();
                non_invariant_witness = Some((rep, a));
                break;
            }
        }
    }

    Ok(ExpressivityReport {
        assignments: domain.assignment_count(),
        classes: classes.len(),
        dictionary_size: dict.len(),
        collisions,
        invariance_violations,
        non_invariant_witness,
        lookup_entries: rho.len(),
        max_code_ln,
    })
}

/// Every partition of `0..n` into at most `max_blocks` nonempty blocks.
pub fn set_partitions(n: usize, max_blocks: usize) -> Vec<Vec<Vec<usize>>> {
    fn rec(i: usize, n: usize, max_blocks: usize, labels: &mut Vec<usize>, used: usize, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == n {
            let mut blocks = vec![Vec::new(); used];
            for (x, &b) in labels.iter().enumerate() {
                blocks[b].push(x);
            }
            out.push(blocks);
            return;
        }
        for b in 0..(used + 1).min(max_blocks) {
            labels.push(b);
            rec(i + 1, n, max_blocks, labels, used.max(b + 1), out);
            labels.pop();
        }
    }
    let mut out = Vec::new();
    if n > 0 && max_blocks > 0 {
        rec(0, n, max_blocks, &mut Vec::with_capacity(n), 0, &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primes() {
        assert_eq!((1..=6).map(nth_prime).collect::<Vec<_>>(), vec![2, 3, 5, 7, 11, 13]);
        assert_eq!(primes_up_to_index(6), vec![2, 3, 5, 7, 11, 13]);
    }

    #[test]
    fn psi_examples() {
        let e = psi_encode(&[1, 2]);
        assert_eq!(e.0, BigUint::from(6u32));
        assert!((e.ln() - 6f64.ln()).abs() < 1e-12);
        assert_eq!(psi_encode(&[2, 1]), e);
        assert_eq!(psi_encode(&[]), Encoding::one());
        assert_eq!(psi_encode(&[]).ln(), 0.0);
        let e = psi_encode(&[1, 1, 2]);
        assert_eq!(e.0, BigUint::from(12u32));
        assert_eq!(e.prime_indices(), vec![1, 1, 2]);
    }

    #[test]
    fn value_codes_follow_value_order() {
        let d = FiniteDomain::new(3, 2, vec![vec![0, 1, 2]]).unwrap();
        assert_eq!(enumerate_value_codes(&d).codes(), &[1, 2]);
        assert_eq!(enumerate_value_codes(&d), enumerate_value_codes(&d));
    }

    #[test]
    fn phi_examples() {
        let d = FiniteDomain::new(2, 1, vec![vec![0], vec![1]]).unwrap();
        let codes = enumerate_value_codes(&d);
        let dict = OrbitDictionary::build(&d, &codes);
        // one value: orbit 0 sees {1} → 2, orbit 1 sees {1} → 2; indices 1 and 2
        let two = psi_encode(&[1]);
        assert_eq!(phi_encode(&[(0, two.clone())], &dict).unwrap().0, BigUint::from(2u32));
        assert_eq!(phi_encode(&[(0, two.clone()), (1, two.clone())], &dict).unwrap().0, BigUint::from(6u32));
        assert!(matches!(phi_encode(&[(0, psi_encode(&[5]))], &dict), Err(Error::UnseenEncoding(_))));
    }

    #[test]
    fn huge_codes_have_finite_logs() {
        let e = prime_product(&vec![200; 200]);
        let expected = 200.0 * (nth_prime(200) as f64).ln();
        assert!((e.ln() - expected).abs() / expected < 1e-12);
    }

    #[test]
    fn partitions_are_counted_by_stirling_numbers() {
        assert_eq!(set_partitions(4, 4).len(), 15);
        assert_eq!(set_partitions(6, 3).len(), 1 + 31 + 90);
        assert_eq!(set_partitions(3, 1), vec![vec![vec![0, 1, 2]]]);
    }

    #[test]
    fn bad_domains_are_rejected() {
        assert!(FiniteDomain::new(3, 2, vec![vec![0, 1]]).is_err());
        assert!(FiniteDomain::new(2, 2, vec![vec![0, 1], vec![1]]).is_err());
        assert!(FiniteDomain::new(2, 0, vec![vec![0, 1]]).is_err());
    }

    #[test]
    fn non_invariant_function_is_rejected_with_witness() {
        let d = FiniteDomain::new(4, 2, vec![vec![0, 1], vec![2, 3]]).unwrap();
        let table = tabulate(&d, |a| a.0[0] as i64);
        let report = verify_expressivity(&d, &table).unwrap();
        assert!(!report.passed());
        let (x, y) = report.non_invariant_witness.unwrap();
        assert_eq!(d.class_key(&x), d.class_key(&y));
        assert_ne!(table[d.index_of(&x)], table[d.index_of(&y)]);
    }
}
