//! Sign-test p-values against exact rational arithmetic.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use xplmark_core::stats::{sign_test, sign_test_p};

fn binomial(n: u64, k: u64) -> BigUint {
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// `min(1, 2·Σ_{j ≥ max(a,b)} C(n, j) / 2^n)` as an exactly rounded f64.
fn exact_p(a: u64, b: u64) -> f64 {
    let n = a + b;
    let k = a.max(b);
    let mut tail = BigUint::zero();
    for j in k..=n {
        tail += binomial(n, j);
    }
    let num = tail * 2u32;
    let den = BigUint::one() << n;
    if num >= den {
        return 1.0;
    }
    // scale to keep 60 significant bits before converting
    let shift = den.bits().saturating_sub(num.bits()) + 60;
    let scaled = (num << shift) / den;
    scaled.to_f64().unwrap() / 2f64.powi(shift as i32)
}

#[test]
fn matches_exact_rationals() {
    let mut worst = 0.0f64;
    for n in 1..=120u64 {
        for a in 0..=n {
            let p = sign_test_p(a, n - a).unwrap();
            let q = exact_p(a, n - a);
            worst = worst.max((p - q).abs() / q);
        }
    }
    assert!(worst < 1e-12, "worst relative error {worst:e}");
}

#[test]
fn published_pairs_against_exact() {
    for (a, b) in [(212, 176), (210, 154), (212, 128), (178, 154), (177, 129), (156, 128)] {
        let p = sign_test_p(a, b).unwrap();
        let q = exact_p(a, b);
        assert!((p - q).abs() / q < 1e-12, "{a}/{b}: {p} vs {q}");
    }
}

#[test]
fn small_examples() {
    assert!((sign_test_p(8, 2).unwrap() - 0.109375).abs() < 1e-15);
    assert_eq!(sign_test_p(5, 5).unwrap(), 1.0);
    assert_eq!(sign_test_p(1, 0).unwrap(), 1.0);
    assert_eq!(sign_test_p(10, 0).unwrap(), exact_p(10, 0));
    assert!(sign_test(0, 0, 0.05, 1).is_err());
}
