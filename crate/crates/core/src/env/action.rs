//! k-subsets of channels and their lexicographic ranking.

use serde::{Deserialize, Serialize};

use super::{EnvError, Result};

/// `C(n, k)`; zero when `k > n`.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    u64::try_from(acc).expect("binomial overflows u64")
}

/// A sorted set of distinct channel indices accessed in one slot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChannelAction {
    channels: Vec<usize>,
}

impl ChannelAction {
    pub fn new(mut channels: Vec<usize>, num_channels: usize) -> Result<Self> {
        channels.sort_unstable();
        if channels.is_empty() {
            return Err(EnvError::Action("no channels selected".into()));
        }
        if channels.windows(2).any(|w| w[0] == w[1]) {
            return Err(EnvError::Action(format!("duplicate channel in {channels:?}")));
        }
        if channels.len() >= num_channels {
            return Err(EnvError::Action(format!(
                "{} channels selected out of {num_channels} (need k < N)",
                channels.len()
            )));
        }
        if let Some(&c) = channels.last().filter(|&&c| c >= num_channels) {
            return Err(EnvError::Action(format!("channel {c} out of range for {num_channels}")));
        }
        Ok(Self { channels })
    }

    pub fn single(channel: usize, num_channels: usize) -> Result<Self> {
        Self::new(vec![channel], num_channels)
    }

    pub fn channels(&self) -> &[usize] {
        &self.channels
    }

    pub fn k(&self) -> usize {
        self.channels.len()
    }

    pub fn contains(&self, channel: usize) -> bool {
        self.channels.binary_search(&channel).is_ok()
    }
}

/// The `C(n, k)` actions of a user that accesses `k` of `n` channels, indexed
/// in lexicographic order of the sorted channel lists.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionSpace {
    n: usize,
    k: usize,
    size: usize,
}

impl ActionSpace {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if k == 0 || k >= n {
            return Err(EnvError::ActionSpace { n, k });
        }
        let size = usize::try_from(binomial(n, k)).map_err(|_| EnvError::ActionSpace { n, k })?;
        Ok(Self { n, k, size })
    }

    pub fn num_channels(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn rank(&self, action: &ChannelAction) -> Result<usize> {
        if action.k() != self.k || action.channels.last().is_some_and(|&c| c >= self.n) {
            return Err(EnvError::Action(format!(
                "{:?} is not a {}-subset of {} channels",
                action.channels, self.k, self.n
            )));
        }
        let mut rank = 0u64;
        let mut next = 0;
        for (i, &c) in action.channels.iter().enumerate() {
            let remaining = self.k - 1 - i;
            for skipped in next..c {
                rank += binomial(self.n - 1 - skipped, remaining);
            }
            next = c + 1;
        }
        Ok(rank as usize)
    }

    pub fn unrank(&self, index: usize) -> Result<ChannelAction> {
        if index >= self.size {
            return Err(EnvError::ActionIndex {
                index,
                size: self.size,
            });
        }
        let mut rest = index as u64;
        let mut channels = Vec::with_capacity(self.k);
        let mut c = 0;
        for i in 0..self.k {
            let remaining = self.k - 1 - i;
            loop {
                let block = binomial(self.n - 1 - c, remaining);
                if rest < block {
                    break;
                }
                rest -= block;
                c += 1;
            }
            channels.push(c);
            c += 1;
        }
        Ok(ChannelAction { channels })
    }
}
