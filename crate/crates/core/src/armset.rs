//! Small fixed-capacity arm sets backed by a u64 bitmask.
//!
//! Arm indices are 0-based and capped at 64, far above any simulation size
//! this library targets. Sets are `Copy`, so the replay machinery can save
//! and restore them without allocation.

/// Set of arm indices in `0..64`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct ArmSet {
    bits: u64,
}

impl ArmSet {
    pub const MAX_ARMS: usize = 64;

    /// The full set `{0, .., k-1}`.
    pub fn full(k: usize) -> Self {
        assert!(k >= 1 && k <= Self::MAX_ARMS, "arm count out of range");
        let bits = if k == 64 { u64::MAX } else { (1u64 << k) - 1 };
        ArmSet { bits }
    }

    pub fn empty() -> Self {
        ArmSet { bits: 0 }
    }

    pub fn contains(self, arm: usize) -> bool {
        arm < Self::MAX_ARMS && self.bits & (1u64 << arm) != 0
    }

    pub fn insert(&mut self, arm: usize) {
        assert!(arm < Self::MAX_ARMS);
        self.bits |= 1u64 << arm;
    }

    pub fn remove(&mut self, arm: usize) {
        assert!(arm < Self::MAX_ARMS);
        self.bits &= !(1u64 << arm);
    }

    pub fn len(self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.bits == 0
    }

    /// The `i`-th smallest member. Panics if `i >= len`.
    pub fn nth(self, i: usize) -> usize {
        let mut bits = self.bits;
        let mut seen = 0;
        while bits != 0 {
            let arm = bits.trailing_zeros() as usize;
            if seen == i {
                return arm;
            }
            seen += 1;
            bits &= bits - 1;
        }
        panic!("ArmSet::nth index {i} out of bounds for set of len {}", self.len());
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.bits;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let arm = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(arm)
            }
        })
    }
}

impl std::fmt::Debug for ArmSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}
