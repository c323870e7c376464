//! Naive signed-integer reference implementations used as oracles.
#![allow(dead_code)]

use std::path::PathBuf;

use hdmtl::{HyperVector, SeededRng};

pub type Bipolar = Vec<i8>;

pub fn random_bipolar(dim: usize, rng: &mut SeededRng) -> Bipolar {
    (0..dim)
        .map(|_| if rng.below(2) == 0 { 1 } else { -1 })
        .collect()
}

pub fn bind(a: &[i8], b: &[i8]) -> Bipolar {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

pub fn sum(vs: &[Bipolar], dim: usize) -> Vec<i32> {
    let mut out = vec![0i32; dim];
    for v in vs {
        for (o, &x) in out.iter_mut().zip(v) {
            *o += i32::from(x);
        }
    }
    out
}

pub fn sign(counts: &[i32], tiebreak: &[i8]) -> Bipolar {
    counts
        .iter()
        .zip(tiebreak)
        .map(|(&c, &t)| match c.signum() {
            0 => t,
            s => s as i8,
        })
        .collect()
}

pub fn distance(a: &[i8], b: &[i8]) -> u32 {
    a.iter().zip(b).filter(|(x, y)| x != y).count() as u32
}

/// Padding bits beyond `dim` in the last storage word.
pub fn padding_is_zero(v: &HyperVector) -> bool {
    let rem = v.dim() % 64;
    rem == 0 || v.words().last().is_none_or(|w| w >> rem == 0)
}

/// Probability that the sign of `s` independent fair ±1 values plus a fair
/// tie-break differs from one fixed operand, by enumerating every outcome.
pub fn majority_error(s: usize) -> f64 {
    let mut wrong = 0.0;
    for mask in 0u32..(1 << s) {
        // Operand 0 is +1; the other bits of `mask` pick the rest.
        let minus = (mask & !1).count_ones() as i32;
        let total = s as i32 - 2 * minus;
        let p = 1.0 / f64::from(1u32 << (s - 1));
        if mask & 1 != 0 {
            continue;
        }
        match total.signum() {
            -1 => wrong += p,
            0 => wrong += p / 2.0,
            _ => {}
        }
    }
    wrong
}

/// MNIST directory from `HDMTL_MNIST_DIR`, falling back to the workspace
/// `data/mnist`.
pub fn mnist_dir() -> PathBuf {
    std::env::var_os("HDMTL_MNIST_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"))
}
