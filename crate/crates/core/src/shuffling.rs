//! Client and data permutations, cohort schedules and the double-shuffling
//! index map.
//!
//! Cohorts are drawn by permuting all `M` client ids and cutting the result
//! into `R = M / C` consecutive blocks of `C`. Read column-wise, the same
//! `R x C` grid gives the `C` equisized client groups of the minibatch form of
//! double shuffling: group `o` holds the `o`-th member of every cohort, in
//! round order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Stream};

/// Uniform permutation of `0..n` (Durstenfeld's in-place Fisher-Yates).
pub fn fisher_yates(n: usize, stream: &mut Stream) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng::below(stream, i + 1);
        p.swap(i, j);
    }
    p
}

pub fn is_permutation(p: &[usize], n: usize) -> bool {
    if p.len() != n {
        return false;
    }
    let mut seen = vec![false; n];
    for &i in p {
        if i >= n || seen[i] {
            return false;
        }
        seen[i] = true;
    }
    true
}

/// User-provided cohorts, one list of client ids per round.
///
/// Deserializes from either a 2-D JSON array (`rounds x clients`, reused
/// every meta-epoch) or a 3-D one (`epochs x rounds x clients`, cycled).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FixedSchedule {
    PerEpoch(Vec<Vec<Vec<usize>>>),
    Repeating(Vec<Vec<usize>>),
}

impl FixedSchedule {
    fn epoch(&self, t: usize) -> &[Vec<usize>] {
        match self {
            FixedSchedule::Repeating(rounds) => rounds,
            FixedSchedule::PerEpoch(epochs) => &epochs[t % epochs.len()],
        }
    }

    pub fn validate(&self, clients: usize, cohort: usize) -> Result<()> {
        let epochs: Vec<&[Vec<usize>]> = match self {
            FixedSchedule::Repeating(r) => vec![r.as_slice()],
            FixedSchedule::PerEpoch(e) if e.is_empty() => {
                return Err(Error::InvalidArgument("empty fixed schedule".into()))
            }
            FixedSchedule::PerEpoch(e) => e.iter().map(|r| r.as_slice()).collect(),
        };
        for (t, rounds) in epochs.iter().enumerate() {
            if rounds.iter().any(|c| c.len() != cohort) {
                return Err(Error::InvalidArgument(format!(
                    "fixed schedule epoch {t}: every cohort must have {cohort} clients"
                )));
            }
            let flat: Vec<usize> = rounds.iter().flatten().copied().collect();
            if !is_permutation(&flat, clients) {
                return Err(Error::InvalidArgument(format!(
                    "fixed schedule epoch {t} is not a partition of the {clients} clients"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ClientMode {
    ShuffleOnce,
    #[default]
    Reshuffling,
    Fixed(FixedSchedule),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DataMode {
    ShuffleOnce,
    #[default]
    Reshuffling,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ShuffleMode {
    #[serde(default)]
    pub client: ClientMode,
    #[serde(default)]
    pub data: DataMode,
}

impl ShuffleMode {
    pub fn shuffle_once() -> Self {
        Self {
            client: ClientMode::ShuffleOnce,
            data: DataMode::ShuffleOnce,
        }
    }

    pub fn reshuffling() -> Self {
        Self {
            client: ClientMode::Reshuffling,
            data: DataMode::Reshuffling,
        }
    }
}

/// The `R` disjoint cohorts of one meta-epoch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CohortSchedule {
    pub rounds: usize,
    pub cohort_size: usize,
    pub cohorts: Vec<Vec<usize>>,
}

impl CohortSchedule {
    /// Column view of the round grid: group `o` lists the `o`-th member of
    /// every cohort.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        (0..self.cohort_size)
            .map(|o| self.cohorts.iter().map(|c| c[o]).collect())
            .collect()
    }

    /// Client order of the whole meta-epoch, round by round.
    pub fn client_order(&self) -> Vec<usize> {
        self.cohorts.iter().flatten().copied().collect()
    }
}

pub fn rounds_per_epoch(clients: usize, cohort: usize) -> Result<usize> {
    if cohort == 0 || cohort > clients {
        return Err(Error::InvalidArgument(format!(
            "cohort size {cohort} must be in 1..={clients}"
        )));
    }
    if !clients.is_multiple_of(cohort) {
        return Err(Error::InvalidArgument(format!(
            "{clients} clients are not divisible into cohorts of {cohort}"
        )));
    }
    Ok(clients / cohort)
}

/// Cohorts for meta-epoch `t`. Shuffle-once reuses the epoch-0 draw.
pub fn build_cohort_schedule(
    clients: usize,
    cohort: usize,
    mode: &ClientMode,
    t: usize,
    seed: u64,
) -> Result<CohortSchedule> {
    let rounds = rounds_per_epoch(clients, cohort)?;
    let cohorts = match mode {
        ClientMode::Fixed(schedule) => {
            schedule.validate(clients, cohort)?;
            schedule.epoch(t).to_vec()
        }
        ClientMode::ShuffleOnce | ClientMode::Reshuffling => {
            let epoch = if matches!(mode, ClientMode::ShuffleOnce) { 0 } else { t };
            let mut stream = rng::derive_stream(seed, "client_perm", &[epoch as u64]);
            fisher_yates(clients, &mut stream)
                .chunks(cohort)
                .map(|c| c.to_vec())
                .collect()
        }
    };
    Ok(CohortSchedule {
        rounds,
        cohort_size: cohort,
        cohorts,
    })
}

/// Local data order of client `m` in meta-epoch `t`.
pub fn data_permutation(n: usize, m: usize, mode: DataMode, t: usize, seed: u64) -> Vec<usize> {
    let epoch = match mode {
        DataMode::ShuffleOnce => 0,
        DataMode::Reshuffling => t,
    };
    let mut stream = rng::derive_stream(seed, "data_perm", &[epoch as u64, m as u64]);
    fisher_yates(n, &mut stream)
}

pub fn draw_data_permutations(
    clients: usize,
    n: usize,
    mode: DataMode,
    t: usize,
    seed: u64,
) -> Vec<Vec<usize>> {
    (0..clients)
        .map(|m| data_permutation(n, m, mode, t, seed))
        .collect()
}

/// Maps step `k` of a double-shuffled sweep to `(client, data index)`.
///
/// `client_perm` is the outer permutation of clients and `local_perms[m]` the
/// inner permutation of client `m`'s data.
pub fn double_shuffle_index(
    k: usize,
    n: usize,
    client_perm: &[usize],
    local_perms: &[Vec<usize>],
) -> Result<(usize, usize)> {
    let total = client_perm.len() * n;
    if k >= total {
        return Err(Error::IndexOutOfRange {
            what: "double-shuffle step",
            index: k,
            bound: total,
        });
    }
    let block = k / n;
    let offset = k - block * n;
    let m = client_perm[block];
    Ok((m, local_perms[m][offset]))
}

/// One draw of the double-shuffling procedure for `M = C * R`: the round
/// grid (which fixes both the client permutation and the `C` groups) plus
/// one local permutation per client.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DoubleShuffle {
    pub schedule: CohortSchedule,
    pub local_perms: Vec<Vec<usize>>,
}

impl DoubleShuffle {
    pub fn draw(
        clients: usize,
        n: usize,
        cohort: usize,
        mode: &ShuffleMode,
        t: usize,
        seed: u64,
    ) -> Result<Self> {
        Ok(Self {
            schedule: build_cohort_schedule(clients, cohort, &mode.client, t, seed)?,
            local_perms: draw_data_permutations(clients, n, mode.data, t, seed),
        })
    }

    pub fn client_perm(&self) -> Vec<usize> {
        self.schedule.client_order()
    }
}
