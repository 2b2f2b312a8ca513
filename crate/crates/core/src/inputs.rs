//! Text formats accepted by the command line: feature lists, numeric vectors
//! and similarity tables. Blank lines and `#` comments are ignored.

use std::str::FromStr;

use num_bigint::BigUint;

use crate::auth::SimilarityTable;
use crate::error::{Error, Result};
use crate::profile::{encode_numeric, hash_feature, FeatureSet, FeatureValue, Mode};

/// How a textual token becomes a feature value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TokenEncoding {
    /// SHA-256 of the token, truncated to 128 bits.
    #[default]
    Hashed,
    /// The token is a decimal integer in `[1, 2^128]`.
    Integer,
}

impl TokenEncoding {
    pub fn value(self, token: &str) -> Result<FeatureValue> {
        match self {
            TokenEncoding::Hashed => hash_feature(token.as_bytes()),
            TokenEncoding::Integer => {
                let v = BigUint::from_str(token).map_err(|_| Error::InvalidInput(format!("not an integer: {token:?}")))?;
                FeatureValue::new(v)
            }
        }
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.split('#').next().unwrap_or("").trim();
        (!line.is_empty()).then_some((i + 1, line))
    })
}

/// One feature per line. Repeated features collapse to one.
pub fn parse_features(text: &str, mode: Mode, encoding: TokenEncoding) -> Result<FeatureSet> {
    let mut values: Vec<FeatureValue> = Vec::new();
    for (_, line) in content_lines(text) {
        let v = encoding.value(line)?;
        if !values.contains(&v) {
            values.push(v);
        }
    }
    FeatureSet::new(mode, values)
}

/// Non-negative integers separated by whitespace or commas.
pub fn parse_vector(text: &str) -> Result<Vec<u64>> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.split(|c: char| c == ',' || c.is_whitespace()))
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<u64>().map_err(|_| Error::InvalidInput(format!("not a non-negative integer: {t:?}"))))
        .collect()
}

/// A numeric vector file, pair-encoded with per-feature cap `cap`.
pub fn parse_numeric_features(text: &str, cap: u64) -> Result<FeatureSet> {
    encode_numeric(&parse_vector(text)?, cap)
}

/// Lines of `y z weight`: the sample value `y` is similar to `z` with the
/// given integer weight.
pub fn parse_similarity(text: &str, encoding: TokenEncoding) -> Result<SimilarityTable> {
    let mut table = SimilarityTable::new();
    for (lineno, line) in content_lines(text) {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [y, z, w] = fields[..] else {
            return Err(Error::InvalidInput(format!("line {lineno}: expected `y z weight`")));
        };
        let weight = w
            .parse::<u64>()
            .map_err(|_| Error::InvalidInput(format!("line {lineno}: bad weight {w:?}")))?;
        table.insert(encoding.value(y)?, encoding.value(z)?, weight);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn features_skip_comments_and_dedup() {
        let set = parse_features("# towers\n17\n\n23 # home\n17\n", Mode::CaseA, TokenEncoding::Integer).unwrap();
        let vs: Vec<String> = set.values().iter().map(|v| v.to_string()).collect();
        assert_eq!(vs, ["17", "23"]);
        let hashed = parse_features("alpha\nbeta\n", Mode::CaseA, TokenEncoding::Hashed).unwrap();
        assert_eq!(hashed.values()[0], hash_feature(b"alpha").unwrap());
        assert!(parse_features("0\n", Mode::CaseA, TokenEncoding::Integer).is_err());
    }

    #[test]
    fn vectors() {
        assert_eq!(parse_vector("3, 0 2\n1").unwrap(), vec![3, 0, 2, 1]);
        assert!(parse_vector("1 -2").is_err());
        let set = parse_numeric_features("2 1", 4).unwrap();
        assert_eq!(set.mode(), Mode::CaseC { features: 2, cap: 4 });
        assert_eq!(set.len(), 3);
    }

    #[test]
    fn similarity() {
        let t = parse_similarity("5 4 1\n5 5 2\n5 6 1\n", TokenEncoding::Integer).unwrap();
        let fv = |v| FeatureValue::from_u128(v).unwrap();
        assert_eq!(t.weight(&fv(5), &fv(5)), 2);
        assert_eq!(t.weight(&fv(4), &fv(5)), 1);
        assert_eq!(t.weight(&fv(7), &fv(5)), 0);
        assert!(parse_similarity("5 4\n", TokenEncoding::Integer).is_err());
    }
}
