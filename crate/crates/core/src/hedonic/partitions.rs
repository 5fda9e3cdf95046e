use crate::coalition::{Coalition, Partition};
use crate::domain::ProviderId;
use crate::error::{Error, Result};

/// Largest ground set `enumerate_partitions` accepts.
pub const PARTITION_CAP: usize = 13;

pub fn bell_number(n: usize) -> u64 {
    // Bell triangle
    let mut row = vec![1u64];
    for _ in 0..n {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(*row.last().expect("nonempty row"));
        for &x in &row {
            let last = *next.last().expect("nonempty row");
            next.push(last + x);
        }
        row = next;
    }
    row[0]
}

/// Every set partition of `{1..n}` exactly once, in restricted-growth-string
/// order (the grand coalition first, singletons last).
pub fn enumerate_partitions(n: usize) -> Result<PartitionIter> {
    if n > PARTITION_CAP {
        return Err(Error::SizeCap {
            what: "partition ground set",
            size: n,
            cap: PARTITION_CAP,
        });
    }
    Ok(PartitionIter {
        rgs: vec![0; n],
        done: false,
    })
}

pub struct PartitionIter {
    rgs: Vec<usize>,
    done: bool,
}

impl PartitionIter {
    fn current(&self) -> Partition {
        let blocks = self.rgs.iter().copied().max().map_or(0, |m| m + 1);
        let mut masks = vec![Coalition::EMPTY; blocks];
        for (k, &b) in self.rgs.iter().enumerate() {
            masks[b] = masks[b].with(k as ProviderId + 1);
        }
        Partition::new(masks).expect("restricted growth strings give partitions")
    }

    fn advance(&mut self) {
        let n = self.rgs.len();
        for k in (1..n).rev() {
            let prefix_max = self.rgs[..k].iter().copied().max().unwrap_or(0);
            if self.rgs[k] <= prefix_max {
                self.rgs[k] += 1;
                for x in &mut self.rgs[k + 1..] {
                    *x = 0;
                }
                return;
            }
        }
        self.done = true;
    }
}

impl Iterator for PartitionIter {
    type Item = Partition;

    fn next(&mut self) -> Option<Partition> {
        if self.done {
            return None;
        }
        let p = self.current();
        self.advance();
        Some(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn counts_match_bell_numbers() {
        assert_eq!(enumerate_partitions(0).unwrap().count(), 1);
        assert_eq!(enumerate_partitions(1).unwrap().count(), 1);
        assert_eq!(enumerate_partitions(3).unwrap().count(), 5);
        assert_eq!(enumerate_partitions(4).unwrap().count(), 15);
        for n in 0..=8 {
            assert_eq!(enumerate_partitions(n).unwrap().count() as u64, bell_number(n));
        }
        assert_eq!(bell_number(13), 27_644_437);
    }

    #[test]
    fn partitions_are_distinct_and_cover() {
        let all: Vec<Partition> = enumerate_partitions(5).unwrap().collect();
        let set: HashSet<String> = all.iter().map(|p| p.to_string()).collect();
        assert_eq!(set.len(), all.len());
        assert!(all.iter().all(|p| p.covers(5)));
        assert_eq!(all[0], Partition::grand(5));
        assert_eq!(*all.last().unwrap(), Partition::singletons(5));
    }

    #[test]
    fn cap() {
        assert!(enumerate_partitions(14).is_err());
    }
}
