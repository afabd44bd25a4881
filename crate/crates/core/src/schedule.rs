//! Step-size schedules and batch sequences.
//!
//! Batches are counter-based: `S_t` is drawn from a ChaCha8 stream keyed by
//! `(seed, t)`, so any `S_t` can be regenerated without replaying
//! `S_1..S_{t-1}` and the result does not depend on query order.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule<T> {
    Constant {
        alpha: T,
    },
    /// `alpha0` for `t ∈ [1, T₀]`, `alpha0/2` for the next `2T₀` steps,
    /// `alpha0/4` for the next `4T₀`, and so on.
    EpochDoubling {
        alpha0: T,
        epoch_length: usize,
    },
}

impl<T: Real> StepSchedule<T> {
    pub fn constant(alpha: T) -> Result<Self> {
        if !(alpha > T::zero()) || !alpha.is_finite() {
            return Err(Error::InvalidArgument(format!("step size {alpha} must be positive")));
        }
        Ok(StepSchedule::Constant { alpha })
    }

    pub fn epoch_doubling(alpha0: T, epoch_length: usize) -> Result<Self> {
        if !(alpha0 > T::zero()) || !alpha0.is_finite() {
            return Err(Error::InvalidArgument(format!("step size {alpha0} must be positive")));
        }
        if epoch_length == 0 {
            return Err(Error::InvalidArgument("epoch length must be ≥ 1".into()));
        }
        Ok(StepSchedule::EpochDoubling { alpha0, epoch_length })
    }

    pub fn step_at(&self, t: usize) -> Result<T> {
        if t == 0 {
            return Err(Error::InvalidArgument("step index starts at t = 1".into()));
        }
        Ok(match *self {
            StepSchedule::Constant { alpha } => alpha,
            StepSchedule::EpochDoubling { alpha0, epoch_length } => {
                // epoch k covers ((2^k − 1)T₀, (2^{k+1} − 1)T₀]
                let mut end = epoch_length;
                let mut len = epoch_length;
                let mut alpha = alpha0;
                while t > end {
                    len *= 2;
                    end += len;
                    alpha /= T::lit(2.0);
                }
                alpha
            }
        })
    }

    /// Largest step the schedule ever takes.
    pub fn max_step(&self) -> T {
        match *self {
            StepSchedule::Constant { alpha } => alpha,
            StepSchedule::EpochDoubling { alpha0, .. } => alpha0,
        }
    }
}

/// A batch `S_t ⊆ {0..n-1}`, sorted, with O(1) membership.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSet {
    indices: Vec<usize>,
    member: Vec<bool>,
}

impl IndexSet {
    pub fn full(n: usize) -> Self {
        Self { indices: (0..n).collect(), member: vec![true; n] }
    }

    pub fn from_indices(n: usize, mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        let mut member = vec![false; n];
        for &i in &indices {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, n });
            }
            member[i] = true;
        }
        Ok(Self { indices, member })
    }

    pub fn universe(&self) -> usize {
        self.member.len()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.indices.len() == self.member.len()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.member.get(i).copied().unwrap_or(false)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.indices
    }

    /// `self ∖ {i}` as a fresh index list.
    pub fn without(&self, i: usize) -> Vec<usize> {
        self.indices.iter().copied().filter(|&j| j != i).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchKind {
    Full,
    /// Each index enters `S_t` independently with probability `K/n`.
    Bernoulli {
        k: usize,
    },
    /// Uniform subset of exactly `K` indices without replacement.
    FixedSize {
        k: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchSchedule {
    n: usize,
    kind: BatchKind,
    seed: u64,
}

impl BatchSchedule {
    pub fn full(n: usize) -> Self {
        Self { n, kind: BatchKind::Full, seed: 0 }
    }

    pub fn bernoulli(n: usize, k: usize, seed: u64) -> Result<Self> {
        if k > n {
            return Err(Error::InvalidArgument(format!("expected batch size {k} exceeds n = {n}")));
        }
        Ok(Self { n, kind: BatchKind::Bernoulli { k }, seed })
    }

    pub fn fixed_size(n: usize, k: usize, seed: u64) -> Result<Self> {
        if k > n {
            return Err(Error::InvalidArgument(format!("batch size {k} exceeds n = {n}")));
        }
        Ok(Self { n, kind: BatchKind::FixedSize { k }, seed })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> BatchKind {
        self.kind
    }

    pub fn is_full(&self) -> bool {
        matches!(self.kind, BatchKind::Full)
    }

    /// Nominal batch size `K` (`n` for full batches).
    pub fn nominal_size(&self) -> usize {
        match self.kind {
            BatchKind::Full => self.n,
            BatchKind::Bernoulli { k } | BatchKind::FixedSize { k } => k,
        }
    }

    fn rng_for(&self, t: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(t as u64);
        rng
    }

    pub fn batch_at(&self, t: usize) -> Result<IndexSet> {
        if t == 0 {
            return Err(Error::InvalidArgument("batch index starts at t = 1".into()));
        }
        match self.kind {
            BatchKind::Full => Ok(IndexSet::full(self.n)),
            BatchKind::Bernoulli { k } => {
                if k == self.n {
                    return Ok(IndexSet::full(self.n));
                }
                let prob = k as f64 / self.n as f64;
                let mut rng = self.rng_for(t);
                let picked = (0..self.n).filter(|_| rng.random::<f64>() < prob).collect();
                IndexSet::from_indices(self.n, picked)
            }
            BatchKind::FixedSize { k } => {
                let mut rng = self.rng_for(t);
                let picked = index::sample(&mut rng, self.n, k).into_vec();
                IndexSet::from_indices(self.n, picked)
            }
        }
    }
}
