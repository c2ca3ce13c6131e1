//! Small integer helpers shared by the other modules.

/// Prime factorization by trial division, primes ascending.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            let mut a = 0;
            while n % d == 0 {
                n /= d;
                a += 1;
            }
            out.push((d, a));
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

/// Prime factors with multiplicity, ascending.
pub fn prime_factors(n: u64) -> Vec<u64> {
    factorize(n)
        .into_iter()
        .flat_map(|(p, a)| std::iter::repeat_n(p, a as usize))
        .collect()
}

pub fn is_prime(n: u64) -> bool {
    n >= 2 && factorize(n) == vec![(n, 1)]
}

pub fn divisors(n: u64) -> Vec<u64> {
    let mut ds = vec![1u64];
    for (p, a) in factorize(n) {
        let cur = ds.clone();
        let mut pk = 1;
        for _ in 0..a {
            pk *= p;
            ds.extend(cur.iter().map(|d| d * pk));
        }
    }
    ds.sort_unstable();
    ds
}

pub fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 { a } else { gcd(b, a % b) }
}

pub fn checked_pow(b: u64, e: u32) -> Option<u64> {
    b.checked_pow(e)
}

/// Decompose `n` as p^e with p prime.
pub fn prime_power(n: u64) -> Option<(u64, u32)> {
    match factorize(n).as_slice() {
        [(p, e)] => Some((*p, *e)),
        _ => None,
    }
}

pub fn mod_pow(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % m;
        }
        b = b * b % m;
        e >>= 1;
    }
    r
}

pub fn mod_inv(a: u64, p: u64) -> u64 {
    mod_pow(a, p - 2, p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_small() {
        assert_eq!(factorize(1440), vec![(2, 5), (3, 2), (5, 1)]);
        assert_eq!(factorize(1), vec![]);
        assert_eq!(prime_factors(12), vec![2, 2, 3]);
        assert_eq!(divisors(12), vec![1, 2, 3, 4, 6, 12]);
        assert!(is_prime(13) && !is_prime(9) && !is_prime(1));
        assert_eq!(prime_power(81), Some((3, 4)));
        assert_eq!(prime_power(12), None);
    }
}
