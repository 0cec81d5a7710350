//! Boolean circuits composed solely from [`Evaluator::nand`] and public constants.
//!
//! Bit vectors are little-endian (index 0 is the least significant bit) and
//! interpreted as two's complement. Every circuit here is data-oblivious: the
//! sequence of gates depends only on operand widths.

use crate::error::{Error, Result};
use crate::fhe::{Client, EncBit, Evaluator};

#[derive(Clone, Debug)]
pub struct BitVector {
    bits: Vec<EncBit>,
}

impl BitVector {
    pub fn from_bits(bits: Vec<EncBit>) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::Usage("bit vector must have positive width".into()));
        }
        let kind = bits[0].backend();
        if bits.iter().any(|b| b.backend() != kind) {
            return Err(Error::Usage("bit vector mixes backends".into()));
        }
        Ok(BitVector { bits })
    }

    /// Public constant `value mod 2^width`.
    pub fn constant(ev: &Evaluator, value: i64, width: usize) -> Self {
        BitVector {
            bits: (0..width).map(|i| ev.trivial_const(bit_of(value, i))).collect(),
        }
    }

    /// Encrypts `value mod 2^width`; bit `i` uses nonce `nonce * 64 + i`.
    pub fn encrypt(client: &Client, value: i64, width: usize, nonce: u64) -> Result<Self> {
        let bits = (0..width)
            .map(|i| client.encrypt_bit(bit_of(value, i), nonce.wrapping_mul(64).wrapping_add(i as u64)))
            .collect::<Result<Vec<_>>>()?;
        BitVector::from_bits(bits)
    }

    pub fn width(&self) -> usize {
        self.bits.len()
    }

    pub fn bits(&self) -> &[EncBit] {
        &self.bits
    }

    pub fn into_bits(self) -> Vec<EncBit> {
        self.bits
    }

    pub fn sign_bit(&self) -> &EncBit {
        self.bits.last().expect("nonempty")
    }

    /// Bits `[lo, lo + width)`.
    pub fn slice(&self, lo: usize, width: usize) -> BitVector {
        BitVector {
            bits: self.bits[lo..lo + width].to_vec(),
        }
    }

    pub fn decrypt_signed(&self, client: &Client) -> Result<i64> {
        let bits = self
            .bits
            .iter()
            .map(|b| client.decrypt_bit(b))
            .collect::<Result<Vec<_>>>()?;
        Ok(signed_from_bools(&bits))
    }

    /// Signed value when every bit is a plaintext-oracle bit.
    pub fn clear_signed(&self) -> Option<i64> {
        let bits = self.bits.iter().map(EncBit::clear_value).collect::<Option<Vec<_>>>()?;
        Some(signed_from_bools(&bits))
    }
}

fn bit_of(value: i64, i: usize) -> bool {
    if i >= 64 {
        value < 0
    } else {
        (value >> i) & 1 == 1
    }
}

fn signed_from_bools(bits: &[bool]) -> i64 {
    let w = bits.len();
    assert!(w <= 64, "width above 64 bits");
    let mut v: i64 = 0;
    for (i, &b) in bits.iter().enumerate() {
        if b {
            v |= 1i64 << i;
        }
    }
    if w < 64 && bits[w - 1] {
        v -= 1i64 << w;
    }
    v
}

fn same_width(a: &BitVector, b: &BitVector) -> Result<usize> {
    if a.width() != b.width() {
        return Err(Error::WidthMismatch {
            left: a.width(),
            right: b.width(),
        });
    }
    Ok(a.width())
}

pub fn not_gate(ev: &Evaluator, a: &EncBit) -> Result<EncBit> {
    ev.nand(a, a)
}

pub fn and_gate(ev: &Evaluator, a: &EncBit, b: &EncBit) -> Result<EncBit> {
    let t = ev.nand(a, b)?;
    ev.nand(&t, &t)
}

pub fn or_gate(ev: &Evaluator, a: &EncBit, b: &EncBit) -> Result<EncBit> {
    let na = ev.nand(a, a)?;
    let nb = ev.nand(b, b)?;
    ev.nand(&na, &nb)
}

pub fn xor_gate(ev: &Evaluator, a: &EncBit, b: &EncBit) -> Result<EncBit> {
    let t = ev.nand(a, b)?;
    let u = ev.nand(a, &t)?;
    let v = ev.nand(b, &t)?;
    ev.nand(&u, &v)
}

/// Returns `(sum, carry)`; five NANDs.
pub fn half_adder(ev: &Evaluator, a: &EncBit, b: &EncBit) -> Result<(EncBit, EncBit)> {
    let t = ev.nand(a, b)?;
    let u = ev.nand(a, &t)?;
    let v = ev.nand(b, &t)?;
    Ok((ev.nand(&u, &v)?, ev.nand(&t, &t)?))
}

/// Returns `(sum, carry)`; the nine-NAND construction.
pub fn full_adder(ev: &Evaluator, a: &EncBit, b: &EncBit, cin: &EncBit) -> Result<(EncBit, EncBit)> {
    let t1 = ev.nand(a, b)?;
    let t2 = ev.nand(a, &t1)?;
    let t3 = ev.nand(b, &t1)?;
    let ab = ev.nand(&t2, &t3)?;
    let t4 = ev.nand(&ab, cin)?;
    let t5 = ev.nand(&ab, &t4)?;
    let t6 = ev.nand(cin, &t4)?;
    let sum = ev.nand(&t5, &t6)?;
    let cout = ev.nand(&t4, &t1)?;
    Ok((sum, cout))
}

fn ripple(ev: &Evaluator, a: &[EncBit], b: &[EncBit], carry_in: bool, invert_b: bool) -> Result<BitVector> {
    let mut carry = ev.trivial_const(carry_in);
    let mut out = Vec::with_capacity(a.len());
    let last = a.len() - 1;
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        let y = if invert_b { not_gate(ev, y)? } else { y.clone() };
        if i == last {
            // the carry out of the top bit is discarded (wraparound)
            out.push(xor_gate(ev, &xor_gate(ev, x, &y)?, &carry)?);
        } else {
            let (s, c) = full_adder(ev, x, &y, &carry)?;
            out.push(s);
            carry = c;
        }
    }
    Ok(BitVector { bits: out })
}

/// Ripple-carry sum modulo `2^width`.
pub fn add(ev: &Evaluator, a: &BitVector, b: &BitVector) -> Result<BitVector> {
    same_width(a, b)?;
    ripple(ev, &a.bits, &b.bits, false, false)
}

/// `a + !b + 1` modulo `2^width`.
pub fn sub(ev: &Evaluator, a: &BitVector, b: &BitVector) -> Result<BitVector> {
    same_width(a, b)?;
    ripple(ev, &a.bits, &b.bits, true, true)
}

pub fn negate(ev: &Evaluator, a: &BitVector) -> Result<BitVector> {
    let zero = BitVector::constant(ev, 0, a.width());
    sub(ev, &zero, a)
}

/// Two rows produced by Wallace reduction plus the number of 3:2 levels used.
struct Reduced {
    columns: Vec<Vec<EncBit>>,
    levels: usize,
}

/// Stage height targets 2, 3, 4, 6, 9, ... up to (excluding) `max_height`.
fn stage_targets(max_height: usize) -> Vec<usize> {
    let mut d = vec![2];
    while *d.last().unwrap() < max_height {
        let last = *d.last().unwrap();
        d.push(last * 3 / 2);
    }
    d.pop();
    d.reverse();
    d
}

/// Full and half adders per column for one stage that brings every column
/// down to at most `target`, counting carries arriving from the column below.
fn plan_stage(heights: &[usize], target: usize) -> Vec<(usize, usize)> {
    let mut plan = Vec::with_capacity(heights.len());
    let mut carries_in = 0;
    for &h in heights {
        let mut h = h + carries_in;
        let (mut fa, mut ha) = (0, 0);
        while h > target {
            if h - target >= 2 {
                fa += 1;
                h -= 2;
            } else {
                ha += 1;
                h -= 1;
            }
        }
        carries_in = fa + ha;
        plan.push((fa, ha));
    }
    plan
}

fn apply_plan(heights: &[usize], plan: &[(usize, usize)]) -> Vec<usize> {
    let mut next: Vec<usize> = heights
        .iter()
        .zip(plan)
        .map(|(&h, &(fa, ha))| h - 2 * fa - ha)
        .collect();
    for k in 1..next.len() {
        next[k] += plan[k - 1].0 + plan[k - 1].1;
    }
    next
}

/// Reduces bit columns (column `k` holds bits of weight `2^k`) with stages of
/// full- and half-adder compressors until no column holds more than two bits.
/// Carries out of the top column are dropped.
fn wallace_reduce(ev: &Evaluator, mut columns: Vec<Vec<EncBit>>) -> Result<Reduced> {
    let width = columns.len();
    let max = columns.iter().map(Vec::len).max().unwrap_or(0);
    let targets = stage_targets(max);
    for &target in &targets {
        let heights: Vec<usize> = columns.iter().map(Vec::len).collect();
        let plan = plan_stage(&heights, target);
        let mut next: Vec<Vec<EncBit>> = vec![Vec::new(); width];
        for (k, (col, &(fa, ha))) in columns.into_iter().zip(&plan).enumerate() {
            let top = k + 1 == width;
            let mut it = col.into_iter();
            for _ in 0..fa {
                let (a, b, c) = (it.next().unwrap(), it.next().unwrap(), it.next().unwrap());
                if top {
                    next[k].push(xor_gate(ev, &xor_gate(ev, &a, &b)?, &c)?);
                } else {
                    let (s, carry) = full_adder(ev, &a, &b, &c)?;
                    next[k].push(s);
                    next[k + 1].push(carry);
                }
            }
            for _ in 0..ha {
                let (a, b) = (it.next().unwrap(), it.next().unwrap());
                if top {
                    next[k].push(xor_gate(ev, &a, &b)?);
                } else {
                    let (s, carry) = half_adder(ev, &a, &b)?;
                    next[k].push(s);
                    next[k + 1].push(carry);
                }
            }
            next[k].extend(it);
        }
        columns = next;
    }
    Ok(Reduced {
        columns,
        levels: targets.len(),
    })
}

/// Final carry-propagate addition over columns of height at most two.
fn resolve_columns(ev: &Evaluator, columns: Vec<Vec<EncBit>>) -> Result<BitVector> {
    let width = columns.len();
    let mut out = Vec::with_capacity(width);
    let mut carry: Option<EncBit> = None;
    for (k, mut col) in columns.into_iter().enumerate() {
        col.extend(carry.take());
        let top = k + 1 == width;
        let bit = match col.len() {
            0 => ev.trivial_const(false),
            1 => col.pop().unwrap(),
            2 if top => xor_gate(ev, &col[0], &col[1])?,
            2 => {
                let (s, c) = half_adder(ev, &col[0], &col[1])?;
                carry = Some(c);
                s
            }
            3 if top => xor_gate(ev, &xor_gate(ev, &col[0], &col[1])?, &col[2])?,
            3 => {
                let (s, c) = full_adder(ev, &col[0], &col[1], &col[2])?;
                carry = Some(c);
                s
            }
            _ => unreachable!("column height bounded by reduction"),
        };
        out.push(bit);
    }
    Ok(BitVector { bits: out })
}

/// Sums arbitrary bit columns modulo `2^columns.len()` with a Wallace tree and
/// a final ripple addition. Absent bits are known zeros and cost nothing.
pub fn sum_columns(ev: &Evaluator, columns: Vec<Vec<EncBit>>) -> Result<(BitVector, usize)> {
    if columns.is_empty() {
        return Err(Error::Usage("cannot sum zero columns".into()));
    }
    let reduced = wallace_reduce(ev, columns)?;
    Ok((resolve_columns(ev, reduced.columns)?, reduced.levels))
}

/// Sign-extended partial products of `a·b` arranged by column, width `2w`.
fn partial_product_columns(ev: &Evaluator, a: &BitVector, b: &BitVector) -> Result<Vec<Vec<EncBit>>> {
    let w = a.width();
    // and[i][j] = a_i ∧ b_j; sign extension reuses the top row/column
    let mut ands = Vec::with_capacity(w * w);
    for i in 0..w {
        for j in 0..w {
            ands.push(and_gate(ev, &a.bits[i], &b.bits[j])?);
        }
    }
    let mut columns = vec![Vec::new(); 2 * w];
    for (k, col) in columns.iter_mut().enumerate() {
        for i in 0..=k {
            let j = k - i;
            col.push(ands[i.min(w - 1) * w + j.min(w - 1)].clone());
        }
    }
    Ok(columns)
}

/// Full `2w`-bit signed product via a Wallace tree of 3:2 compressors.
pub fn mul_wallace(ev: &Evaluator, a: &BitVector, b: &BitVector) -> Result<BitVector> {
    Ok(mul_wallace_with_levels(ev, a, b)?.0)
}

/// Like [`mul_wallace`], also returning the number of compression levels.
pub fn mul_wallace_with_levels(ev: &Evaluator, a: &BitVector, b: &BitVector) -> Result<(BitVector, usize)> {
    same_width(a, b)?;
    let columns = partial_product_columns(ev, a, b)?;
    sum_columns(ev, columns)
}

/// Compression levels a Wallace tree needs for the given column heights.
pub fn wallace_levels(heights: Vec<usize>) -> usize {
    let targets = stage_targets(heights.iter().copied().max().unwrap_or(0));
    let mut h = heights;
    for &t in &targets {
        let plan = plan_stage(&h, t);
        h = apply_plan(&h, &plan);
    }
    debug_assert!(h.iter().all(|&x| x <= 2));
    targets.len()
}

/// Shift-and-add multiplier over the same sign-extended partial products,
/// accumulated with ripple adders. Kept as an independent route to check
/// [`mul_wallace`] against.
pub fn mul_schoolbook(ev: &Evaluator, a: &BitVector, b: &BitVector) -> Result<BitVector> {
    let w = same_width(a, b)?;
    let ext = |v: &BitVector, i: usize| v.bits[i.min(w - 1)].clone();
    let mut acc = BitVector::constant(ev, 0, 2 * w);
    for j in 0..2 * w {
        let bj = ext(b, j);
        let mut row = Vec::with_capacity(2 * w);
        for k in 0..2 * w {
            if k < j {
                row.push(ev.trivial_const(false));
            } else {
                row.push(and_gate(ev, &ext(a, k - j), &bj)?);
            }
        }
        acc = add(ev, &acc, &BitVector { bits: row })?;
    }
    Ok(acc)
}

#[derive(Clone, Debug)]
pub struct CompareResult {
    /// Set iff `a < b`.
    pub is_negative: EncBit,
    /// Set iff `a == b`.
    pub is_zero: EncBit,
}

/// Difference of `a` and `b` sign-extended by one bit, so it never wraps.
fn wide_difference(ev: &Evaluator, a: &BitVector, b: &BitVector) -> Result<Vec<EncBit>> {
    same_width(a, b)?;
    let widen = |v: &BitVector| {
        let mut bits = v.bits.clone();
        bits.push(v.sign_bit().clone());
        bits
    };
    Ok(ripple(ev, &widen(a), &widen(b), true, true)?.bits)
}

/// Exact for every pair of `w`-bit operands.
pub fn compare(ev: &Evaluator, a: &BitVector, b: &BitVector) -> Result<CompareResult> {
    let d = wide_difference(ev, a, b)?;
    let w = a.width();
    let mut any = d[0].clone();
    for bit in &d[1..w] {
        any = or_gate(ev, &any, bit)?;
    }
    Ok(CompareResult {
        is_negative: d[w].clone(),
        is_zero: not_gate(ev, &any)?,
    })
}

/// `a < b` alone; the cheap half of [`compare`].
pub fn less_than(ev: &Evaluator, a: &BitVector, b: &BitVector) -> Result<EncBit> {
    let d = wide_difference(ev, a, b)?;
    Ok(d[a.width()].clone())
}

/// Per bit `(sel ∧ t) ∨ (¬sel ∧ f)`; `3w + 1` NANDs.
pub fn mux(ev: &Evaluator, sel: &EncBit, on_true: &BitVector, on_false: &BitVector) -> Result<BitVector> {
    same_width(on_true, on_false)?;
    let nsel = not_gate(ev, sel)?;
    let bits = on_true
        .bits
        .iter()
        .zip(&on_false.bits)
        .map(|(t, f)| {
            let x = ev.nand(sel, t)?;
            let y = ev.nand(&nsel, f)?;
            ev.nand(&x, &y)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BitVector { bits })
}
