//! Plaintext reference scores. These deliberately share no code with the
//! protocol so they can serve as independent checks of it.

use num_bigint::BigUint;

use crate::error::{Error, Result};

/// `|X ∩ Y|` by exhaustive comparison.
pub fn oracle_intersection<T: PartialEq>(x: &[T], y: &[T]) -> u64 {
    y.iter().filter(|b| x.iter().any(|a| a == *b)).count() as u64
}

/// `|X ∩ Y|` by sorting both sides and merging; a second, structurally
/// different computation to cross-check the first.
pub fn oracle_intersection_sorted<T: Ord + Clone>(x: &[T], y: &[T]) -> u64 {
    let mut x = x.to_vec();
    let mut y = y.to_vec();
    x.sort();
    x.dedup();
    y.sort();
    y.dedup();
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < x.len() && j < y.len() {
        match x[i].cmp(&y[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

/// `sum_{z in X} sum_{y in Y} l(z, y)`.
pub fn oracle_weighted<T>(x: &[T], y: &[T], l: impl Fn(&T, &T) -> u64) -> u64 {
    x.iter().map(|z| y.iter().map(|b| l(z, b)).sum::<u64>()).sum()
}

/// `sum_i |u_i - v_i|`.
pub fn oracle_l1(u: &[u64], v: &[u64]) -> Result<u64> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch(u.len(), v.len()));
    }
    Ok(u.iter().zip(v).map(|(a, b)| a.abs_diff(*b)).sum())
}

/// Checks `r'_0 * prod_k r'_k^(a^k) = R' (mod n^2)` at every root `a`,
/// computing each power `a^k` in full before exponentiating.
pub fn oracle_blinding_system(r_primes: &[BigUint], roots: &[BigUint], r_prime: &BigUint, n_squared: &BigUint) -> bool {
    roots.iter().all(|a| {
        let lhs = r_primes
            .iter()
            .enumerate()
            .fold(BigUint::from(1u8), |acc, (k, rk)| acc * rk.modpow(&a.pow(k as u32), n_squared) % n_squared);
        &lhs == r_prime
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intersection() {
        assert_eq!(oracle_intersection(&[1, 2, 3], &[2, 3, 4]), 2);
        assert_eq!(oracle_intersection_sorted(&[3, 1, 2], &[4, 3, 2]), 2);
        assert_eq!(oracle_intersection::<u8>(&[], &[1]), 0);
    }

    #[test]
    fn weighted_tent() {
        let tent = |z: &i64, y: &i64| (2 - (z - y).abs()).max(0) as u64;
        assert_eq!(oracle_weighted(&[4], &[5], tent), 1);
        assert_eq!(oracle_weighted(&[4, 5, 9], &[5], tent), 1 + 2);
        let eq = |z: &i64, y: &i64| u64::from(z == y);
        assert_eq!(oracle_weighted(&[1, 2, 3], &[2, 3, 4], eq), oracle_intersection(&[1, 2, 3], &[2, 3, 4]));
    }

    #[test]
    fn l1() {
        assert_eq!(oracle_l1(&[2, 0, 3], &[1, 1, 3]).unwrap(), 2);
        assert_eq!(oracle_l1(&[3, 0, 2], &[3, 0, 2]).unwrap(), 0);
        assert!(oracle_l1(&[1], &[1, 2]).is_err());
    }

    #[test]
    fn blinding_system_tiny() {
        // mod 7^2: r'_0 = 1, r'_1 = 3 at root 2 gives 9.
        let m = BigUint::from(49u8);
        let rs = [BigUint::from(1u8), BigUint::from(3u8)];
        assert!(oracle_blinding_system(&rs, &[BigUint::from(2u8)], &BigUint::from(9u8), &m));
        assert!(!oracle_blinding_system(&rs, &[BigUint::from(3u8)], &BigUint::from(9u8), &m));
    }
}
