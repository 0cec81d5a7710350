//! Integer-oracle checks of the NAND circuits on the clear backend.

use fhecnn::fhe::{Client, Evaluator};
use fhecnn::gates::{self, BitVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bv(_ev: &Evaluator, v: i64, w: usize) -> BitVector {
    BitVector::encrypt(&Client::Clear, v, w, 0).unwrap()
}

fn val(x: &BitVector) -> i64 {
    x.clear_signed().unwrap()
}

fn wrap(v: i128, w: usize) -> i64 {
    let m = v.rem_euclid(1i128 << w);
    (if m >= 1i128 << (w - 1) { m - (1i128 << w) } else { m }) as i64
}

#[test]
fn add_sub_compare_exhaustive_width_6() {
    let ev = Evaluator::clear();
    let w = 6;
    let range = -(1i64 << (w - 1))..(1i64 << (w - 1));
    for a in range.clone() {
        for b in range.clone() {
            let (x, y) = (bv(&ev, a, w), bv(&ev, b, w));
            assert_eq!(
                val(&gates::add(&ev, &x, &y).unwrap()),
                wrap((a + b) as i128, w),
                "{a}+{b}"
            );
            assert_eq!(
                val(&gates::sub(&ev, &x, &y).unwrap()),
                wrap((a - b) as i128, w),
                "{a}-{b}"
            );
            let c = gates::compare(&ev, &x, &y).unwrap();
            assert_eq!(c.is_negative.clear_value(), Some(a < b), "{a}<{b}");
            assert_eq!(gates::less_than(&ev, &x, &y).unwrap().clear_value(), Some(a < b));
            assert_eq!(c.is_zero.clear_value(), Some(a == b));
        }
    }
}

#[test]
fn mul_wallace_matches_schoolbook_and_integers() {
    let ev = Evaluator::clear();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for w in [16usize, 32] {
        let lo = -(1i64 << (w - 1));
        let hi = (1i64 << (w - 1)) - 1;
        for i in 0..2_000 {
            let (a, b) = match i {
                0 => (lo, lo),
                1 => (lo, hi),
                2 => (hi, hi),
                3 => (-1, lo),
                _ => (rng.random_range(lo..=hi), rng.random_range(lo..=hi)),
            };
            let (x, y) = (bv(&ev, a, w), bv(&ev, b, w));
            let wal = gates::mul_wallace(&ev, &x, &y).unwrap();
            let sch = gates::mul_schoolbook(&ev, &x, &y).unwrap();
            let bits = |v: &BitVector| v.bits().iter().map(|b| b.clear_value().unwrap()).collect::<Vec<_>>();
            assert_eq!(bits(&wal), bits(&sch), "{a}*{b} w={w}");
            assert_eq!(val(&wal) as i128, a as i128 * b as i128);
        }
    }
}

#[test]
fn gate_counts_do_not_depend_on_data() {
    let mut counts = Vec::new();
    for (a, b) in [(0i64, 0i64), (-128, 127), (37, -5), (-1, -1)] {
        let ev = Evaluator::clear();
        let (x, y) = (bv(&ev, a, 8), bv(&ev, b, 8));
        gates::add(&ev, &x, &y).unwrap();
        gates::mul_wallace(&ev, &x, &y).unwrap();
        gates::compare(&ev, &x, &y).unwrap();
        let s = gates::less_than(&ev, &x, &y).unwrap();
        gates::mux(&ev, &s, &x, &y).unwrap();
        counts.push(ev.stats().nand_count);
    }
    assert!(counts.windows(2).all(|p| p[0] == p[1]), "{counts:?}");
}

proptest! {
    #[test]
    fn add_then_sub_is_identity(a in any::<i32>(), b in any::<i32>()) {
        let ev = Evaluator::clear();
        let (x, y) = (bv(&ev, a as i64, 32), bv(&ev, b as i64, 32));
        let s = gates::add(&ev, &x, &y).unwrap();
        prop_assert_eq!(val(&gates::sub(&ev, &s, &y).unwrap()), a as i64);
    }

    #[test]
    fn add_commutes(a in any::<i16>(), b in any::<i16>()) {
        let ev = Evaluator::clear();
        let (x, y) = (bv(&ev, a as i64, 16), bv(&ev, b as i64, 16));
        prop_assert_eq!(val(&gates::add(&ev, &x, &y).unwrap()), val(&gates::add(&ev, &y, &x).unwrap()));
        prop_assert_eq!(val(&gates::add(&ev, &x, &y).unwrap()), wrap(a as i128 + b as i128, 16));
    }

    #[test]
    fn negate_is_twos_complement(a in any::<i16>()) {
        let ev = Evaluator::clear();
        prop_assert_eq!(val(&gates::negate(&ev, &bv(&ev, a as i64, 16)).unwrap()), wrap(-(a as i128), 16));
    }

    #[test]
    fn mux_selects(sel: bool, a in any::<i16>(), b in any::<i16>()) {
        let ev = Evaluator::clear();
        let s = Client::Clear.encrypt_bit(sel, 0).unwrap();
        let out = gates::mux(&ev, &s, &bv(&ev, a as i64, 16), &bv(&ev, b as i64, 16)).unwrap();
        prop_assert_eq!(val(&out), if sel { a as i64 } else { b as i64 });
    }

    #[test]
    fn mul_is_commutative_and_exact(a in any::<i32>(), b in any::<i32>()) {
        let ev = Evaluator::clear();
        let (x, y) = (bv(&ev, a as i64, 32), bv(&ev, b as i64, 32));
        let ab = val(&gates::mul_wallace(&ev, &x, &y).unwrap());
        prop_assert_eq!(ab, val(&gates::mul_wallace(&ev, &y, &x).unwrap()));
        prop_assert_eq!(ab, a as i64 * b as i64);
    }

    #[test]
    fn sum_columns_matches_weighted_sum(cols in prop::collection::vec(prop::collection::vec(any::<bool>(), 0..7), 1..12)) {
        let ev = Evaluator::clear();
        let w = cols.len();
        let expect: i128 = cols.iter().enumerate()
            .map(|(k, c)| c.iter().filter(|&&b| b).count() as i128 * (1i128 << k))
            .sum();
        let columns = cols.iter().map(|c| c.iter().map(|&b| Client::Clear.encrypt_bit(b, 0).unwrap()).collect()).collect();
        let (out, _) = gates::sum_columns(&ev, columns).unwrap();
        let bits: Vec<bool> = out.bits().iter().map(|b| b.clear_value().unwrap()).collect();
        let got: i128 = bits.iter().enumerate().map(|(k, &b)| (b as i128) << k).sum();
        prop_assert_eq!(got, expect.rem_euclid(1i128 << w));
    }
}
