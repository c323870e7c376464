//! Fibonacci linear feedback shift register.
//!
//! The register holds `width` bits `s_0 .. s_{width-1}`. Each clock emits
//! `s_0`, shifts right and inserts the parity of the tapped bits at the top.
//! A feedback polynomial `x^w + x^a + ... + 1` taps bit 0 (the constant term)
//! and bit `e` for every listed exponent `e < w`, which realises the
//! recurrence `s_{n+w} = s_{n+a} + ... + s_n (mod 2)`.

use crate::error::{Error, Result};

/// `x^32 + x^22 + x^2 + x + 1`, primitive over GF(2).
pub const DEFAULT_POLYNOMIAL: [u32; 4] = [32, 22, 2, 1];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LfsrStream {
    width: u32,
    feedback: u64,
    initial: u64,
    state: u64,
}

impl LfsrStream {
    /// `polynomial` lists the nonzero exponents of the feedback polynomial,
    /// highest first or in any order; the constant term is implied. The
    /// highest exponent is the register width.
    pub fn new(polynomial: &[u32], state: u64) -> Result<Self> {
        let width = polynomial
            .iter()
            .copied()
            .max()
            .ok_or_else(|| Error::InvalidLfsr("empty feedback polynomial".into()))?;
        if !(2..=64).contains(&width) {
            return Err(Error::InvalidLfsr(format!(
                "register width {width} outside 2..=64"
            )));
        }
        let mut feedback = 1u64;
        for &e in polynomial {
            if e == 0 {
                return Err(Error::InvalidLfsr(
                    "exponent 0 is implicit and must not be listed".into(),
                ));
            }
            if e < width {
                feedback |= 1 << e;
            }
        }
        let state = state & mask(width);
        if state == 0 {
            return Err(Error::DegenerateLfsrState { width });
        }
        Ok(Self {
            width,
            feedback,
            initial: state,
            state,
        })
    }

    /// 32-bit register with [`DEFAULT_POLYNOMIAL`].
    pub fn default_with_state(state: u32) -> Result<Self> {
        Self::new(&DEFAULT_POLYNOMIAL, u64::from(state))
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn state(&self) -> u64 {
        self.state
    }

    pub fn initial_state(&self) -> u64 {
        self.initial
    }

    /// Feedback tap mask; bit `i` set means `s_i` enters the parity.
    pub fn feedback_mask(&self) -> u64 {
        self.feedback
    }

    pub fn reset(&mut self) {
        self.state = self.initial;
    }

    pub fn next_bit(&mut self) -> bool {
        let out = self.state & 1 == 1;
        let fb = u64::from((self.state & self.feedback).count_ones() & 1);
        self.state = (self.state >> 1) | (fb << (self.width - 1));
        out
    }

    /// Next `n <= 64` output bits, the first in bit 0.
    pub fn next_bits(&mut self, n: u32) -> u64 {
        debug_assert!(n <= 64);
        let mut word = 0u64;
        for i in 0..n {
            word |= u64::from(self.next_bit()) << i;
        }
        word
    }
}

impl Iterator for LfsrStream {
    type Item = bool;

    fn next(&mut self) -> Option<bool> {
        Some(self.next_bit())
    }
}

fn mask(width: u32) -> u64 {
    if width == 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}
