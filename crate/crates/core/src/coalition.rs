//! Coalitions (sets of provider ids) and partitions of the provider set.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::domain::ProviderId;
use crate::error::{Error, Result};

/// Largest provider id a [`Coalition`] can hold.
pub const MAX_PROVIDER_ID: ProviderId = 64;

/// A set of provider ids, stored as a bit mask (bit `i - 1` for provider `i`).
///
/// Ordering is lexicographic on the sorted member sequence, so
/// `{1} < {1,2} < {1,2,3} < {1,3} < {2}`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Coalition(u64);

impl Coalition {
    pub const EMPTY: Coalition = Coalition(0);

    pub fn new<I: IntoIterator<Item = ProviderId>>(members: I) -> Result<Self> {
        let mut mask = 0u64;
        for id in members {
            if id == 0 || id > MAX_PROVIDER_ID {
                return Err(Error::Domain(format!(
                    "provider id {id} outside 1..={MAX_PROVIDER_ID}"
                )));
            }
            mask |= 1 << (id - 1);
        }
        Ok(Coalition(mask))
    }

    /// Panics on ids outside `1..=64`; meant for literals in fixtures and tests.
    pub fn of(members: &[ProviderId]) -> Self {
        Self::new(members.iter().copied()).expect("valid provider ids")
    }

    pub fn singleton(id: ProviderId) -> Self {
        Self::of(&[id])
    }

    /// `{1, ..., n}`.
    pub fn grand(n: usize) -> Self {
        assert!(n <= MAX_PROVIDER_ID as usize);
        if n == 64 {
            Coalition(u64::MAX)
        } else {
            Coalition((1u64 << n) - 1)
        }
    }

    pub fn from_mask(mask: u64) -> Self {
        Coalition(mask)
    }

    pub fn mask(self) -> u64 {
        self.0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn contains(self, id: ProviderId) -> bool {
        (1..=MAX_PROVIDER_ID).contains(&id) && self.0 & (1 << (id - 1)) != 0
    }

    pub fn with(self, id: ProviderId) -> Self {
        self.union(Self::singleton(id))
    }

    pub fn without(self, id: ProviderId) -> Self {
        Coalition(self.0 & !Self::singleton(id).0)
    }

    pub fn union(self, other: Self) -> Self {
        Coalition(self.0 | other.0)
    }

    pub fn intersection(self, other: Self) -> Self {
        Coalition(self.0 & other.0)
    }

    pub fn difference(self, other: Self) -> Self {
        Coalition(self.0 & !other.0)
    }

    pub fn is_subset(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_disjoint(self, other: Self) -> bool {
        self.0 & other.0 == 0
    }

    /// Members in increasing order.
    pub fn members(self) -> Members {
        Members(self.0)
    }

    pub fn to_vec(self) -> Vec<ProviderId> {
        self.members().collect()
    }

    /// All subsets of `self`, including the empty set and `self`.
    pub fn subsets(self) -> Subsets {
        Subsets {
            full: self.0,
            next: Some(0),
        }
    }

    /// Nonempty subsets of `self`.
    pub fn nonempty_subsets(self) -> impl Iterator<Item = Coalition> {
        self.subsets().filter(|s| !s.is_empty())
    }
}

pub struct Members(u64);

impl Iterator for Members {
    type Item = ProviderId;

    fn next(&mut self) -> Option<ProviderId> {
        if self.0 == 0 {
            return None;
        }
        let bit = self.0.trailing_zeros();
        self.0 &= self.0 - 1;
        Some(bit + 1)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.0.count_ones() as usize;
        (n, Some(n))
    }
}

/// Enumerates the subsets of a mask in increasing numeric order.
pub struct Subsets {
    full: u64,
    next: Option<u64>,
}

impl Iterator for Subsets {
    type Item = Coalition;

    fn next(&mut self) -> Option<Coalition> {
        let cur = self.next?;
        self.next = if cur == self.full {
            None
        } else {
            Some((cur.wrapping_sub(self.full)) & self.full)
        };
        Some(Coalition(cur))
    }
}

impl Ord for Coalition {
    fn cmp(&self, other: &Self) -> Ordering {
        self.members().cmp(other.members())
    }
}

impl PartialOrd for Coalition {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, id) in self.members().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{id}")?;
        }
        write!(f, "}}")
    }
}

impl fmt::Debug for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Accepts `{1,3}`, `1,3`, `{}` and surrounding whitespace.
impl FromStr for Coalition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let inner = t
            .strip_prefix('{')
            .and_then(|r| r.strip_suffix('}'))
            .unwrap_or(t)
            .trim();
        if inner.is_empty() {
            return Ok(Coalition::EMPTY);
        }
        let mut ids = Vec::new();
        for tok in inner.split(',') {
            let id: ProviderId = tok
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad provider id {tok:?} in {s:?}")))?;
            ids.push(id);
        }
        Coalition::new(ids)
    }
}

impl Serialize for Coalition {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.members())
    }
}

impl<'de> Deserialize<'de> for Coalition {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let ids = Vec::<ProviderId>::deserialize(deserializer)?;
        Coalition::new(ids).map_err(serde::de::Error::custom)
    }
}

/// A set of pairwise disjoint, nonempty coalitions. Blocks are kept sorted so
/// equal partitions compare and print identically.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<Coalition>", into = "Vec<Coalition>")]
pub struct Partition {
    blocks: Vec<Coalition>,
}

impl Partition {
    pub fn new(mut blocks: Vec<Coalition>) -> Result<Self> {
        let mut seen = Coalition::EMPTY;
        for b in &blocks {
            if b.is_empty() {
                return Err(Error::Domain("partition contains an empty block".into()));
            }
            if !b.is_disjoint(seen) {
                return Err(Error::Domain(format!("block {b} overlaps another block")));
            }
            seen = seen.union(*b);
        }
        blocks.sort();
        Ok(Partition { blocks })
    }

    /// `{{1},{2},...,{n}}`.
    pub fn singletons(n: usize) -> Self {
        Partition {
            blocks: (1..=n as ProviderId).map(Coalition::singleton).collect(),
        }
    }

    pub fn grand(n: usize) -> Self {
        Partition {
            blocks: vec![Coalition::grand(n)],
        }
    }

    pub fn blocks(&self) -> &[Coalition] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Union of all blocks.
    pub fn ground_set(&self) -> Coalition {
        self.blocks.iter().fold(Coalition::EMPTY, |acc, b| acc.union(*b))
    }

    /// Whether the blocks cover exactly `{1..n}`.
    pub fn covers(&self, n: usize) -> bool {
        self.ground_set() == Coalition::grand(n)
    }

    /// The block holding provider `i`.
    pub fn block_of(&self, i: ProviderId) -> Option<Coalition> {
        self.blocks.iter().copied().find(|b| b.contains(i))
    }

    pub fn contains_block(&self, c: Coalition) -> bool {
        self.blocks.contains(&c)
    }
}

impl TryFrom<Vec<Coalition>> for Partition {
    type Error = Error;

    fn try_from(blocks: Vec<Coalition>) -> Result<Self> {
        Partition::new(blocks)
    }
}

impl From<Partition> for Vec<Coalition> {
    fn from(p: Partition) -> Self {
        p.blocks
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.blocks {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Parses the block syntax `{1,3}{2,4}`.
impl FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut blocks = Vec::new();
        let mut rest = s.trim();
        while !rest.is_empty() {
            let open = rest
                .strip_prefix('{')
                .ok_or_else(|| Error::Parse(format!("expected '{{' in partition {s:?}")))?;
            let close = open
                .find('}')
                .ok_or_else(|| Error::Parse(format!("unterminated block in partition {s:?}")))?;
            let block: Coalition = open[..close].parse()?;
            if block.is_empty() {
                return Err(Error::Parse(format!("empty block in partition {s:?}")));
            }
            blocks.push(block);
            rest = open[close + 1..].trim_start_matches([' ', ',']).trim();
        }
        Partition::new(blocks)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_is_lexicographic_on_members() {
        let mut v = [
            Coalition::of(&[2]),
            Coalition::of(&[1, 3]),
            Coalition::of(&[1, 2, 3]),
            Coalition::of(&[1]),
            Coalition::of(&[2, 4]),
        ];
        v.sort();
        let shown: Vec<String> = v.iter().map(|c| c.to_string()).collect();
        assert_eq!(shown, ["{1}", "{1,2,3}", "{1,3}", "{2}", "{2,4}"]);
    }

    #[test]
    fn subsets_enumerate_power_set() {
        let s = Coalition::of(&[1, 3, 4]);
        let subs: Vec<Coalition> = s.subsets().collect();
        assert_eq!(subs.len(), 8);
        assert!(subs.iter().all(|t| t.is_subset(s)));
        assert_eq!(subs[0], Coalition::EMPTY);
        assert_eq!(Coalition::EMPTY.subsets().count(), 1);
    }

    #[test]
    fn parse_and_display() {
        let p: Partition = "{2,4} {1,3}".parse().unwrap();
        assert_eq!(p.to_string(), "{1,3}{2,4}");
        assert!(p.covers(4));
        assert_eq!(p.block_of(4), Some(Coalition::of(&[2, 4])));
        assert!("{1,2}{2}".parse::<Partition>().is_err());
        assert!("{1}{}".parse::<Partition>().is_err());
        assert_eq!("1,2".parse::<Coalition>().unwrap(), Coalition::of(&[1, 2]));
    }

    #[test]
    fn serde_round_trip() {
        let p: Partition = "{1,3}{2,4}".parse().unwrap();
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(json, "[[1,3],[2,4]]");
        let back: Partition = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
    }
}
