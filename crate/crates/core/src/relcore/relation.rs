use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::error::{Error, Result};

/// A domain value. String domains are dictionary-encoded before they get here.
pub type Value = u64;

/// Interned attribute id. Display names live in a [`Catalog`].
#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Attr(pub u32);

impl fmt::Debug for Attr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Registry mapping attribute display names to ids and back.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Catalog {
    names: Vec<String>,
    index: HashMap<String, Attr>,
}

impl Catalog {
    pub fn new() -> Self {
        Self::default()
    }

    /// A catalog with `n` attributes named `A`, `B`, `C`, ... (then `A1`, ...).
    pub fn letters(n: usize) -> Self {
        let mut c = Catalog::new();
        for i in 0..n {
            let letter = (b'A' + (i % 26) as u8) as char;
            let name = if i < 26 {
                letter.to_string()
            } else {
                format!("{letter}{}", i / 26)
            };
            c.intern(&name);
        }
        c
    }

    pub fn intern(&mut self, name: &str) -> Attr {
        if let Some(&a) = self.index.get(name) {
            return a;
        }
        let a = Attr(self.names.len() as u32);
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), a);
        a
    }

    pub fn lookup(&self, name: &str) -> Option<Attr> {
        self.index.get(name).copied()
    }

    pub fn name(&self, attr: Attr) -> String {
        self.names
            .get(attr.0 as usize)
            .cloned()
            .unwrap_or_else(|| format!("#{}", attr.0))
    }

    pub fn names_of(&self, attrs: &[Attr]) -> Vec<String> {
        attrs.iter().map(|&a| self.name(a)).collect()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

fn sorted_unique(attrs: &[Attr]) -> Result<Vec<Attr>> {
    let mut s = attrs.to_vec();
    s.sort_unstable();
    if s.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::domain(format!("scheme {attrs:?} repeats an attribute")));
    }
    Ok(s)
}

/// A tuple over a set of attributes; the scheme is kept sorted.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tuple {
    scheme: Vec<Attr>,
    values: Vec<Value>,
}

impl Tuple {
    pub fn empty() -> Self {
        Tuple {
            scheme: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn new(pairs: impl IntoIterator<Item = (Attr, Value)>) -> Result<Self> {
        let mut pairs: Vec<_> = pairs.into_iter().collect();
        pairs.sort_unstable_by_key(|p| p.0);
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::domain("tuple repeats an attribute"));
        }
        Ok(Tuple {
            scheme: pairs.iter().map(|p| p.0).collect(),
            values: pairs.iter().map(|p| p.1).collect(),
        })
    }

    /// Builds a tuple from a sorted scheme and aligned values.
    pub(crate) fn from_sorted(scheme: Vec<Attr>, values: Vec<Value>) -> Self {
        debug_assert_eq!(scheme.len(), values.len());
        debug_assert!(scheme.windows(2).all(|w| w[0] < w[1]));
        Tuple { scheme, values }
    }

    pub fn scheme(&self) -> &[Attr] {
        &self.scheme
    }

    pub fn values(&self) -> &[Value] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, attr: Attr) -> Option<Value> {
        self.scheme
            .binary_search(&attr)
            .ok()
            .map(|i| self.values[i])
    }

    /// `u[V]`: the projection onto `attrs`, which must be a subset of the scheme.
    pub fn project(&self, attrs: &[Attr]) -> Result<Tuple> {
        let scheme = sorted_unique(attrs)?;
        let values = scheme
            .iter()
            .map(|&a| self.get(a).ok_or(Error::UnknownAttribute(a)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Tuple { scheme, values })
    }

    /// Concatenates two tuples over disjoint schemes.
    pub fn merge(&self, other: &Tuple) -> Result<Tuple> {
        Tuple::new(
            self.scheme
                .iter()
                .copied()
                .zip(self.values.iter().copied())
                .chain(other.scheme.iter().copied().zip(other.values.iter().copied())),
        )
    }
}

/// A duplicate-free set of tuples over one scheme.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Relation {
    scheme: Vec<Attr>,
    rows: Vec<Vec<Value>>,
}

impl Relation {
    /// Builds a relation; `scheme` may be in any order and rows are aligned to
    /// it. Duplicate rows collapse.
    pub fn new(scheme: Vec<Attr>, rows: impl IntoIterator<Item = Vec<Value>>) -> Result<Self> {
        let sorted = sorted_unique(&scheme)?;
        let perm: Vec<usize> = sorted
            .iter()
            .map(|a| scheme.iter().position(|b| b == a).unwrap())
            .collect();
        let identity = perm.iter().enumerate().all(|(i, &j)| i == j);
        let mut out = Vec::new();
        for row in rows {
            if row.len() != scheme.len() {
                return Err(Error::domain(format!(
                    "row of length {} does not fit scheme of arity {}",
                    row.len(),
                    scheme.len()
                )));
            }
            out.push(if identity {
                row
            } else {
                perm.iter().map(|&j| row[j]).collect()
            });
        }
        Ok(Self::from_rows(sorted, out))
    }

    /// Rows must already be aligned to the sorted scheme.
    pub(crate) fn from_rows(scheme: Vec<Attr>, mut rows: Vec<Vec<Value>>) -> Self {
        rows.sort_unstable();
        rows.dedup();
        Relation { scheme, rows }
    }

    pub fn empty(scheme: Vec<Attr>) -> Result<Self> {
        Self::new(scheme, std::iter::empty())
    }

    pub fn unary(attr: Attr, values: impl IntoIterator<Item = Value>) -> Self {
        Self::from_rows(vec![attr], values.into_iter().map(|v| vec![v]).collect())
    }

    /// Binary relation; pairs are given in `(a, b)` order.
    pub fn binary(
        a: Attr,
        b: Attr,
        pairs: impl IntoIterator<Item = (Value, Value)>,
    ) -> Result<Self> {
        Self::new(vec![a, b], pairs.into_iter().map(|(x, y)| vec![x, y]))
    }

    pub fn from_tuples(scheme: Vec<Attr>, tuples: impl IntoIterator<Item = Tuple>) -> Result<Self> {
        let sorted = sorted_unique(&scheme)?;
        let mut rows = Vec::new();
        for t in tuples {
            if t.scheme != sorted {
                return Err(Error::domain("tuple scheme differs from relation scheme"));
            }
            rows.push(t.values);
        }
        Ok(Self::from_rows(sorted, rows))
    }

    pub fn scheme(&self) -> &[Attr] {
        &self.scheme
    }

    pub fn arity(&self) -> usize {
        self.scheme.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows aligned to [`Relation::scheme`], in canonical sorted order.
    pub fn rows(&self) -> &[Vec<Value>] {
        &self.rows
    }

    pub fn tuples(&self) -> impl Iterator<Item = Tuple> + '_ {
        self.rows
            .iter()
            .map(|r| Tuple::from_sorted(self.scheme.clone(), r.clone()))
    }

    pub fn column(&self, attr: Attr) -> Option<usize> {
        self.scheme.binary_search(&attr).ok()
    }

    pub fn contains_row(&self, row: &[Value]) -> bool {
        self.rows.binary_search_by(|r| r.as_slice().cmp(row)).is_ok()
    }

    pub fn contains(&self, t: &Tuple) -> bool {
        t.scheme == self.scheme && self.contains_row(&t.values)
    }

    /// Number of tuples carrying each value on `attr`.
    pub fn frequencies(&self, attr: Attr) -> Result<BTreeMap<Value, usize>> {
        let c = self.column(attr).ok_or(Error::UnknownAttribute(attr))?;
        let mut f = BTreeMap::new();
        for r in &self.rows {
            *f.entry(r[c]).or_insert(0) += 1;
        }
        Ok(f)
    }

    pub fn values_on(&self, attr: Attr) -> Result<BTreeSet<Value>> {
        let c = self.column(attr).ok_or(Error::UnknownAttribute(attr))?;
        Ok(self.rows.iter().map(|r| r[c]).collect())
    }

    /// Set-semantics projection.
    pub fn project(&self, attrs: &[Attr]) -> Result<Relation> {
        let scheme = sorted_unique(attrs)?;
        let cols = scheme
            .iter()
            .map(|&a| self.column(a).ok_or(Error::UnknownAttribute(a)))
            .collect::<Result<Vec<_>>>()?;
        let rows = self
            .rows
            .iter()
            .map(|r| cols.iter().map(|&c| r[c]).collect())
            .collect();
        Ok(Self::from_rows(scheme, rows))
    }

    pub fn filter(&self, mut keep: impl FnMut(&[Value]) -> bool) -> Relation {
        Relation {
            scheme: self.scheme.clone(),
            rows: self.rows.iter().filter(|r| keep(r)).cloned().collect(),
        }
    }

    /// Total words needed to ship every tuple.
    pub fn words(&self) -> usize {
        self.rows.len() * self.scheme.len()
    }
}

/// A set of relations to be joined. Always simple: no two relations share a
/// scheme.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JoinQuery {
    relations: Vec<Relation>,
}

impl JoinQuery {
    pub fn new(relations: Vec<Relation>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for r in &relations {
            if !seen.insert(r.scheme().to_vec()) {
                return Err(Error::NotSimple(format!("{:?}", r.scheme())));
            }
        }
        Ok(JoinQuery { relations })
    }

    /// Like [`JoinQuery::new`] but additionally insists on binary relations.
    pub fn binary(relations: Vec<Relation>) -> Result<Self> {
        let q = Self::new(relations)?;
        q.require_binary()?;
        Ok(q)
    }

    pub fn require_binary(&self) -> Result<()> {
        match self.relations.iter().find(|r| r.arity() != 2) {
            Some(r) => Err(Error::NotBinary(format!("{:?}", r.scheme()), r.arity())),
            None => Ok(()),
        }
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    pub fn is_binary(&self) -> bool {
        self.relations.iter().all(|r| r.arity() == 2)
    }

    /// `attset(Q)`, sorted.
    pub fn attset(&self) -> Vec<Attr> {
        let s: BTreeSet<Attr> = self
            .relations
            .iter()
            .flat_map(|r| r.scheme().iter().copied())
            .collect();
        s.into_iter().collect()
    }

    /// Input size `m`: the total number of tuples.
    pub fn input_size(&self) -> usize {
        self.relations.iter().map(Relation::len).sum()
    }

    pub fn relation_on(&self, scheme: &[Attr]) -> Option<&Relation> {
        let mut s = scheme.to_vec();
        s.sort_unstable();
        self.relations.iter().find(|r| r.scheme() == s.as_slice())
    }

    pub fn position_of(&self, scheme: &[Attr]) -> Option<usize> {
        let mut s = scheme.to_vec();
        s.sort_unstable();
        self.relations.iter().position(|r| r.scheme() == s.as_slice())
    }
}
