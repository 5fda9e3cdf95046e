//! Core of a TU game in exact rational arithmetic.
//!
//! The core (with nonnegative payoffs) is nonempty iff
//!
//! ```text
//! z* = min { sum_i x_i : sum_{i in S} x_i >= w(S) for all S != N,  x >= 0 }  <=  v(N)
//! ```
//!
//! with `w(S) = v(S)`, except `w({i}) = max(v({i}), 0)`. We solve the dual
//! `max sum_S lambda_S w(S)` subject to `sum_{S containing i} lambda_S <= 1`,
//! whose optimal prices are the minimising `x`. When `z* > v(N)` the optimal
//! `lambda`, topped up on singletons to make every player's total exactly 1,
//! is a balanced family violating the Bondareva-Shapley condition.

mod simplex;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use crate::coalition::Coalition;
use crate::coalitional::Game;
use crate::domain::ProviderId;
use crate::error::{Error, Result};

pub use simplex::{maximize, RationalOptimum, RationalOutcome};

/// Largest player count `check_core` accepts.
pub const CORE_CAP: usize = 10;

/// Exact characteristic function over players `1..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoreProblem {
    pub n: usize,
    pub values: BTreeMap<Coalition, BigRational>,
}

impl CoreProblem {
    /// Every nonempty subset of `{1..n}` must be present.
    pub fn new(n: usize, values: BTreeMap<Coalition, BigRational>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("a game needs at least one player".into()));
        }
        if n > CORE_CAP {
            return Err(Error::SizeCap {
                what: "core player count",
                size: n,
                cap: CORE_CAP,
            });
        }
        let grand = Coalition::grand(n);
        if let Some(s) = grand.nonempty_subsets().find(|s| !values.contains_key(s)) {
            return Err(Error::Domain(format!("missing value for coalition {s}")));
        }
        if let Some(s) = values.keys().find(|s| !s.is_subset(grand) || s.is_empty()) {
            return Err(Error::Domain(format!("coalition {s} is outside players 1..={n}")));
        }
        Ok(CoreProblem { n, values })
    }

    /// Takes the floating-point values of `game` exactly as stored.
    pub fn from_game<G: Game + ?Sized>(game: &G) -> Result<Self> {
        let n = game.players();
        let mut values = BTreeMap::new();
        for s in Coalition::grand(n).nonempty_subsets() {
            let v = game.value(s)?;
            let r = BigRational::from_float(v)
                .ok_or_else(|| Error::Domain(format!("value of {s} is not finite")))?;
            values.insert(s, r);
        }
        Self::new(n, values)
    }

    /// From exact decimal strings such as `"0.623"`.
    pub fn from_decimals(n: usize, values: &[(Coalition, &str)]) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (s, text) in values {
            map.insert(*s, parse_decimal(text)?);
        }
        Self::new(n, map)
    }

    pub fn value(&self, s: Coalition) -> &BigRational {
        &self.values[&s]
    }

    pub fn grand_value(&self) -> &BigRational {
        self.value(Coalition::grand(self.n))
    }
}

/// Parses a decimal such as `-12.080`, `0.623` or `1e-3` exactly.
pub fn parse_decimal(text: &str) -> Result<BigRational> {
    let bad = || Error::Parse(format!("not a decimal number: {text:?}"));
    let t = text.trim();
    let (mantissa, exponent) = match t.find(['e', 'E']) {
        Some(k) => (&t[..k], t[k + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (t, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty()
        || !int_part
            .chars()
            .chain(frac_part.chars())
            .all(|c| c.is_ascii_digit())
    {
        return Err(bad());
    }
    let all = format!("{int_part}{frac_part}");
    let numer: BigInt = all.parse().map_err(|_| bad())?;
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut r = BigRational::from_integer(numer);
    if scale >= 0 {
        r *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        r /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Ok(if negative { -r } else { r })
}

/// Reads lines of the form `{1,2} 12.08` (or `1,2 12.08`); `#` starts a comment.
pub fn parse_values(text: &str) -> Result<CoreProblem> {
    let mut values = BTreeMap::new();
    let mut n = 0;
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (coalition, value) = line
            .rsplit_once(|c: char| c.is_whitespace() || c == '=' || c == ':')
            .ok_or_else(|| Error::Parse(format!("line {}: expected `<coalition> <value>`", k + 1)))?;
        let coalition: Coalition = coalition
            .trim()
            .trim_end_matches(['=', ':'])
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("line {}: {e}", k + 1)))?;
        if coalition.is_empty() {
            return Err(Error::Parse(format!("line {}: empty coalition", k + 1)));
        }
        let v = parse_decimal(value).map_err(|e| Error::Parse(format!("line {}: {e}", k + 1)))?;
        n = n.max(coalition.members().max().unwrap_or(0) as usize);
        if values.insert(coalition, v).is_some() {
            return Err(Error::Parse(format!(
                "line {}: duplicate coalition {coalition}",
                k + 1
            )));
        }
    }
    CoreProblem::new(n, values)
}

pub fn load_values(path: &Path) -> Result<CoreProblem> {
    parse_values(&std::fs::read_to_string(path)?)
}

/// Exact rational rendered as a decimal with `digits` places.
pub fn decimal_string(r: &BigRational, digits: usize) -> String {
    let scale = num_traits::pow(BigInt::from(10), digits);
    let scaled = r * BigRational::from_integer(scale.clone());
    let rounded = scaled.round().to_integer();
    let negative = rounded.is_negative();
    let abs = rounded.abs();
    let int = &abs / &scale;
    let frac = &abs % &scale;
    let sign = if negative { "-" } else { "" };
    if digits == 0 {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{:0>width$}", frac.to_string(), width = digits)
    }
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

fn ser_rational<S: Serializer>(r: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

fn ser_rationals<S: Serializer>(rs: &[BigRational], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(rs.iter().map(|r| r.to_string()))
}

fn ser_weights<S: Serializer>(
    w: &BTreeMap<Coalition, BigRational>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.collect_map(w.iter().map(|(c, r)| (c.to_string(), r.to_string())))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status")]
pub enum CoreResult {
    NonEmpty {
        /// `x_1 .. x_n`.
        #[serde(serialize_with = "ser_rationals")]
        imputation: Vec<BigRational>,
    },
    Empty {
        /// Balanced weights over coalitions other than `N`.
        #[serde(serialize_with = "ser_weights")]
        certificate: BTreeMap<Coalition, BigRational>,
        /// `sum alpha(S) w(S)`, strictly above `v(N)`.
        #[serde(serialize_with = "ser_rational")]
        weighted_sum: BigRational,
        #[serde(serialize_with = "ser_rational")]
        grand_value: BigRational,
    },
}

impl CoreResult {
    pub fn is_empty(&self) -> bool {
        matches!(self, CoreResult::Empty { .. })
    }
}

impl fmt::Display for CoreResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreResult::NonEmpty { imputation } => {
                writeln!(f, "core: nonempty")?;
                for (k, x) in imputation.iter().enumerate() {
                    writeln!(f, "  x_{} = {} ({})", k + 1, decimal_string(x, 6), x)?;
                }
                Ok(())
            }
            CoreResult::Empty {
                certificate,
                weighted_sum,
                grand_value,
            } => {
                writeln!(f, "core: empty")?;
                writeln!(f, "  balanced weights:")?;
                for (s, a) in certificate {
                    writeln!(f, "    {s}: {a}")?;
                }
                writeln!(
                    f,
                    "  sum alpha(S) v(S) = {} > v(N) = {}",
                    decimal_string(weighted_sum, 6),
                    decimal_string(grand_value, 6)
                )
            }
        }
    }
}

/// Value used in the core constraints: singletons are floored at 0, which
/// encodes `x >= 0`.
fn effective_value(problem: &CoreProblem, s: Coalition) -> BigRational {
    let v = problem.value(s).clone();
    if s.len() == 1 && v.is_negative() {
        BigRational::zero()
    } else {
        v
    }
}

/// Decides whether the core (with nonnegative payoffs) is empty.
pub fn check_core(problem: &CoreProblem) -> Result<CoreResult> {
    let n = problem.n;
    let grand = Coalition::grand(n);
    let vn = problem.grand_value().clone();
    let proper: Vec<Coalition> = grand.nonempty_subsets().filter(|&s| s != grand).collect();

    let (x, z) = if proper.is_empty() {
        (vec![BigRational::zero(); n], BigRational::zero())
    } else {
        let c: Vec<BigRational> = proper.iter().map(|&s| effective_value(problem, s)).collect();
        let a: Vec<Vec<BigRational>> = (1..=n as ProviderId)
            .map(|i| {
                proper
                    .iter()
                    .map(|s| {
                        if s.contains(i) {
                            BigRational::one()
                        } else {
                            BigRational::zero()
                        }
                    })
                    .collect()
            })
            .collect();
        let b = vec![BigRational::one(); n];
        let opt = match maximize(&c, &a, &b) {
            RationalOutcome::Optimal(o) => o,
            RationalOutcome::Unbounded => {
                unreachable!("weights are bounded by the per-player rows")
            }
        };
        if opt.objective > vn {
            let mut certificate = BTreeMap::new();
            for (s, w) in proper.iter().zip(&opt.x) {
                if w.is_positive() {
                    certificate.insert(*s, w.clone());
                }
            }
            pad_singletons(n, &mut certificate);
            let weighted_sum = certificate
                .iter()
                .map(|(s, w)| w * effective_value(problem, *s))
                .sum();
            return Ok(CoreResult::Empty {
                certificate,
                weighted_sum,
                grand_value: vn,
            });
        }
        (opt.duals, opt.objective)
    };

    if n == 1 && vn.is_negative() {
        return Ok(CoreResult::Empty {
            certificate: BTreeMap::new(),
            weighted_sum: BigRational::zero(),
            grand_value: vn,
        });
    }
    let mut imputation = x;
    imputation[0] += &vn - &z;
    debug_assert!(in_core(problem, &imputation));
    Ok(CoreResult::NonEmpty { imputation })
}

fn pad_singletons(n: usize, weights: &mut BTreeMap<Coalition, BigRational>) {
    for i in 1..=n as ProviderId {
        let total: BigRational = weights
            .iter()
            .filter(|(s, _)| s.contains(i))
            .map(|(_, w)| w.clone())
            .sum();
        let gap = BigRational::one() - total;
        if gap.is_positive() {
            *weights
                .entry(Coalition::singleton(i))
                .or_insert_with(BigRational::zero) += gap;
        }
    }
}

/// Whether `x` is efficient, nonnegative and coalitionally rational.
pub fn in_core(problem: &CoreProblem, x: &[BigRational]) -> bool {
    let grand = Coalition::grand(problem.n);
    if x.len() != problem.n || x.iter().any(|v| v.is_negative()) {
        return false;
    }
    let total: BigRational = x.iter().cloned().sum();
    if total != *problem.grand_value() {
        return false;
    }
    grand.nonempty_subsets().all(|s| {
        let sum: BigRational = s.members().map(|i| x[i as usize - 1].clone()).sum();
        sum >= *problem.value(s)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BondarevaReport {
    #[serde(serialize_with = "ser_rational")]
    pub weighted_sum: BigRational,
    #[serde(serialize_with = "ser_rational")]
    pub grand_value: BigRational,
    /// `weighted_sum > grand_value`.
    pub violated: bool,
}

impl fmt::Display for BondarevaReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rel = if self.violated { ">" } else { "<=" };
        write!(
            f,
            "sum alpha(S) v(S) = {} {rel} v(N) = {}: {}",
            decimal_string(&self.weighted_sum, 6),
            decimal_string(&self.grand_value, 6),
            if self.violated { "violated" } else { "holds" }
        )
    }
}

/// Compares `sum alpha(S) v(S)` with `v(N)` for balanced weights `alpha`.
pub fn bondareva_violation(
    problem: &CoreProblem,
    alpha: &BTreeMap<Coalition, BigRational>,
) -> Result<BondarevaReport> {
    let grand = Coalition::grand(problem.n);
    for (s, w) in alpha {
        if s.is_empty() || !s.is_subset(grand) {
            return Err(Error::Domain(format!("weight on coalition {s} outside the game")));
        }
        if w.is_negative() {
            return Err(Error::Domain(format!("negative weight on {s}")));
        }
    }
    for i in 1..=problem.n as ProviderId {
        let total: BigRational = alpha
            .iter()
            .filter(|(s, _)| s.contains(i))
            .map(|(_, w)| w.clone())
            .sum();
        if !total.is_one() {
            return Err(Error::Unbalanced {
                player: i,
                total: total.to_string(),
            });
        }
    }
    let weighted_sum: BigRational = alpha.iter().map(|(s, w)| w * problem.value(*s)).sum();
    let grand_value = problem.grand_value().clone();
    Ok(BondarevaReport {
        violated: weighted_sum > grand_value,
        weighted_sum,
        grand_value,
    })
}

/// `alpha = 1/2` on every pair of a three-player game.
pub fn half_on_pairs() -> BTreeMap<Coalition, BigRational> {
    let half = BigRational::new(1.into(), 2.into());
    [[1, 2], [1, 3], [2, 3]]
        .iter()
        .map(|p| (Coalition::of(p), half.clone()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dec(s: &str) -> BigRational {
        parse_decimal(s).unwrap()
    }

    pub(crate) fn appendix_printed() -> CoreProblem {
        parse_values(
            "{1} 0.345\n{2} 0.095\n{3} 0.095\n{1,2} 0.513\n{1,3} 0.513\n{2,3} 0.225\n{1,2,3} 0.623\n",
        )
        .unwrap()
    }

    fn scenario2_printed() -> CoreProblem {
        parse_values(
            "# Scenario 2\n{1} 6.21\n{2} 4.15\n{3} 4.15\n{1,2} 12.08\n{1,3} 12.08\n{2,3} 8.49\n{1,2,3} 16.27\n",
        )
        .unwrap()
    }

    #[test]
    fn decimals_are_exact() {
        assert_eq!(dec("0.623"), BigRational::new(623.into(), 1000.into()));
        assert_eq!(dec("-12.08"), BigRational::new((-1208).into(), 100.into()));
        assert_eq!(dec("3"), BigRational::from_integer(3.into()));
        assert_eq!(dec("1e-3"), BigRational::new(1.into(), 1000.into()));
        assert_eq!(dec(".5"), BigRational::new(1.into(), 2.into()));
        assert!(parse_decimal("abc").is_err());
        assert!(parse_decimal("1.2.3").is_err());
        assert_eq!(decimal_string(&dec("0.6225"), 3), "0.623");
        assert_eq!(decimal_string(&dec("-1.5"), 2), "-1.50");
    }

    #[test]
    fn appendix_pairs_violate() {
        let r = bondareva_violation(&appendix_printed(), &half_on_pairs()).unwrap();
        assert_eq!(r.weighted_sum, dec("0.6255"));
        assert_eq!(r.grand_value, dec("0.623"));
        assert!(r.violated);
    }

    #[test]
    fn grand_alone_is_the_equality_case() {
        let p = scenario2_printed();
        let alpha = BTreeMap::from([(Coalition::grand(3), BigRational::one())]);
        let r = bondareva_violation(&p, &alpha).unwrap();
        assert_eq!(r.weighted_sum, r.grand_value);
        assert!(!r.violated);
    }

    #[test]
    fn unbalanced_weights_name_the_player() {
        let p = scenario2_printed();
        let alpha = BTreeMap::from([(Coalition::of(&[1, 2]), BigRational::one())]);
        assert!(matches!(
            bondareva_violation(&p, &alpha),
            Err(Error::Unbalanced { player: 3, .. })
        ));
    }

    #[test]
    fn scenario2_core_is_empty() {
        let p = scenario2_printed();
        let r = bondareva_violation(&p, &half_on_pairs()).unwrap();
        assert_eq!(r.weighted_sum, dec("16.325"));
        match check_core(&p).unwrap() {
            CoreResult::Empty { certificate, .. } => {
                let r = bondareva_violation(&p, &certificate).unwrap();
                assert!(r.violated);
            }
            other => panic!("expected empty core, got {other:?}"),
        }
        assert!(check_core(&appendix_printed()).unwrap().is_empty());
    }

    #[test]
    fn additive_game_core_is_the_singletons() {
        let mut values = BTreeMap::new();
        for s in Coalition::grand(3).nonempty_subsets() {
            values.insert(s, s.members().map(|i| BigRational::from_integer(i.into())).sum());
        }
        let p = CoreProblem::new(3, values).unwrap();
        match check_core(&p).unwrap() {
            CoreResult::NonEmpty { imputation } => {
                let expect: Vec<BigRational> = (1..=3).map(|i| BigRational::from_integer(i.into())).collect();
                assert_eq!(imputation, expect);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn single_player() {
        let p = parse_values("{1} 2").unwrap();
        assert!(!check_core(&p).unwrap().is_empty());
        let p = parse_values("{1} -2").unwrap();
        assert!(check_core(&p).unwrap().is_empty());
    }

    #[test]
    fn values_file_errors() {
        assert!(parse_values("{1} 1\n{2} 1\n").is_err());
        assert!(parse_values("{1} x\n").is_err());
        assert!(parse_values("{1} 1\n{1} 2\n").is_err());
    }

    /// Brute force for three players: the core polytope is bounded, so it is
    /// nonempty iff some vertex (efficiency plus two tight inequalities) is
    /// feasible.
    fn vertex_oracle(p: &CoreProblem) -> bool {
        let grand = Coalition::grand(3);
        let proper: Vec<Coalition> = grand.nonempty_subsets().filter(|&s| s != grand).collect();
        let row = |s: Coalition| -> Vec<BigRational> {
            (1..=3)
                .map(|i| {
                    if s.contains(i) {
                        BigRational::one()
                    } else {
                        BigRational::zero()
                    }
                })
                .collect()
        };
        let eff = |s: Coalition| effective_value(p, s);
        for a in 0..proper.len() {
            for b in a + 1..proper.len() {
                let m = [row(grand), row(proper[a]), row(proper[b])];
                let rhs = [p.grand_value().clone(), eff(proper[a]), eff(proper[b])];
                if let Some(x) = solve3(&m, &rhs) {
                    let ok = x.iter().all(|v| !v.is_negative())
                        && proper.iter().all(|&s| {
                            s.members()
                                .map(|i| x[i as usize - 1].clone())
                                .sum::<BigRational>()
                                >= eff(s)
                        });
                    if ok {
                        return true;
                    }
                }
            }
        }
        false
    }

    fn solve3(m: &[Vec<BigRational>; 3], rhs: &[BigRational; 3]) -> Option<Vec<BigRational>> {
        let det = |m: &[Vec<BigRational>; 3]| {
            &m[0][0] * (&m[1][1] * &m[2][2] - &m[1][2] * &m[2][1])
                - &m[0][1] * (&m[1][0] * &m[2][2] - &m[1][2] * &m[2][0])
                + &m[0][2] * (&m[1][0] * &m[2][1] - &m[1][1] * &m[2][0])
        };
        let d = det(m);
        if d.is_zero() {
            return None;
        }
        Some(
            (0..3)
                .map(|c| {
                    let mut mc = m.clone();
                    for r in 0..3 {
                        mc[r][c] = rhs[r].clone();
                    }
                    det(&mc) / &d
                })
                .collect(),
        )
    }

    proptest! {
        #[test]
        fn matches_vertex_enumeration(vals in prop::collection::vec(-3i64..12, 7)) {
            let mut values = BTreeMap::new();
            for (s, v) in Coalition::grand(3).nonempty_subsets().zip(&vals) {
                values.insert(s, BigRational::from_integer((*v).into()));
            }
            let p = CoreProblem::new(3, values).unwrap();
            let result = check_core(&p).unwrap();
            prop_assert_eq!(!result.is_empty(), vertex_oracle(&p));
            match result {
                CoreResult::NonEmpty { imputation } => prop_assert!(in_core(&p, &imputation)),
                CoreResult::Empty { certificate, weighted_sum, grand_value } => {
                    prop_assert!(weighted_sum > grand_value);
                    // balanced exactly
                    for i in 1..=3u32 {
                        let t: BigRational = certificate.iter()
                            .filter(|(s, _)| s.contains(i)).map(|(_, w)| w.clone()).sum();
                        prop_assert!(t.is_one());
                    }
                }
            }
        }
    }
}
