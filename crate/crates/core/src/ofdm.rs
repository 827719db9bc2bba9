//! Frequency-selective virtual channels and combined frequency/spatial
//! division multiplexing (CFSDM).
//!
//! Tap `l` sits at delay `l / B`, so the frequency response on subcarrier `q`
//! of `Q` is `H^(q) = sum_l H_l exp(-j 2 pi q l / Q)`: the first `L` rows of the
//! order-`Q` DFT. With this convention `sum_q ||H^(q)||_F^2 = Q sum_l ||H_l||_F^2`.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::channel::FsChannel;
use crate::error::{Error, Result};
use crate::linalg::{cis, select_rows, singular_values, CMat};
use crate::mi::EffectiveChannel;
use crate::vcm::{project_vcm, DftBasis, SupportSet};

/// `sum_l taps[l] exp(-j 2 pi q l / Q)`.
pub fn frequency_response(taps: &[CMat], q: usize, q_count: usize) -> CMat {
    let (r, c) = taps.first().map_or((0, 0), |t| t.shape());
    let mut out = CMat::zeros(r, c);
    for (l, tap) in taps.iter().enumerate() {
        let phase = -2.0 * std::f64::consts::PI * ((q * l) % q_count) as f64 / q_count as f64;
        out += tap * cis(phase);
    }
    out
}

/// One subcarrier of one group, restricted to the group's support.
#[derive(Debug, Clone)]
pub struct SubcarrierChannel {
    pub q: usize,
    pub q_count: usize,
    /// Group downlink `(S^t F^h H^(q))^h`, `N_{d,g} x |S|`; rows are user-major.
    pub downlink: CMat,
    pub users: Vec<usize>,
}

impl SubcarrierChannel {
    /// Rows owned by user `k`: its virtual downlink `N_{d,k} x |S|`.
    pub fn user_downlink(&self, k: usize) -> Result<CMat> {
        if k >= self.users.len() {
            return Err(Error::InvalidArgument(format!(
                "user {k} out of range ({} users)",
                self.users.len()
            )));
        }
        let start: usize = self.users[..k].iter().sum();
        let rows: Vec<usize> = (start..start + self.users[k]).collect();
        Ok(select_rows(&self.downlink, &rows))
    }
}

pub fn per_subcarrier_channels(
    channel: &FsChannel,
    basis: &DftBasis,
    support: &SupportSet,
    q_count: usize,
) -> Result<Vec<SubcarrierChannel>> {
    let l = channel.taps.len();
    if q_count < l || l == 0 {
        return Err(Error::InvalidArgument(format!(
            "need Q >= L >= 1, got Q={q_count}, L={l}"
        )));
    }
    // project each tap once; the DFT over taps commutes with the angular projection
    let virtual_taps = channel
        .taps
        .iter()
        .map(|t| Ok(select_rows(&project_vcm(t, basis)?, &support.indices)))
        .collect::<Result<Vec<_>>>()?;
    Ok((0..q_count)
        .map(|q| SubcarrierChannel {
            q,
            q_count,
            downlink: frequency_response(&virtual_taps, q, q_count).adjoint(),
            users: channel.users.clone(),
        })
        .collect())
}

/// `max_i |s_i(q) - s_i(q')| / s_max(q)` for user `user` (or the whole group
/// when `None`).
pub fn lemma4_check(
    channels: &[SubcarrierChannel],
    q: usize,
    q2: usize,
    user: Option<usize>,
) -> Result<f64> {
    let pick = |idx: usize| -> Result<CMat> {
        let ch = channels
            .iter()
            .find(|c| c.q == idx)
            .ok_or_else(|| Error::InvalidArgument(format!("subcarrier {idx} not present")))?;
        match user {
            Some(k) => ch.user_downlink(k),
            None => Ok(ch.downlink.clone()),
        }
    };
    let a = singular_values(&pick(q)?);
    let b = singular_values(&pick(q2)?);
    let smax = a.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return Ok(0.0);
    }
    Ok(a.iter()
        .zip(&b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
        / smax)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AssignmentRow {
    pub group: usize,
    pub user: usize,
    pub subcarrier: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CfsdmAssignment {
    /// Contiguous subcarrier block per group id.
    pub groups: BTreeMap<usize, Vec<usize>>,
    pub rows: Vec<AssignmentRow>,
    /// Conflict edges (group ids, smaller first).
    pub conflicts: Vec<(usize, usize)>,
    /// Number of distinct subcarriers used.
    pub used: usize,
}

impl CfsdmAssignment {
    pub fn subcarrier(&self, group: usize, user: usize) -> Option<usize> {
        self.rows
            .iter()
            .find(|r| r.group == group && r.user == user)
            .map(|r| r.subcarrier)
    }

    /// Conflicting groups share no subcarrier; within a group subcarriers are
    /// distinct and contiguous.
    pub fn is_valid(&self) -> bool {
        let disjoint = self.conflicts.iter().all(|(a, b)| {
            let sa: BTreeSet<_> = self.groups[a].iter().collect();
            self.groups[b].iter().all(|q| !sa.contains(q))
        });
        let contiguous = self
            .groups
            .values()
            .all(|qs| qs.windows(2).all(|w| w[1] == w[0] + 1));
        disjoint && contiguous
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.rows)?)
    }
}

/// Greedy coloring of the support-conflict graph with contiguous blocks of
/// `users_per_group[g]` subcarriers. Groups are placed in descending-degree
/// order (ties by id), each at the lowest start clear of its placed neighbours.
pub fn cfsdm_assign(
    groups: &[usize],
    supports: &[Vec<usize>],
    users_per_group: &[usize],
    q_count: usize,
) -> Result<CfsdmAssignment> {
    let g = groups.len();
    if supports.len() != g || users_per_group.len() != g {
        return Err(Error::Dimension(
            "need one support and one user count per group".into(),
        ));
    }
    let sets: Vec<BTreeSet<usize>> = supports
        .iter()
        .map(|s| s.iter().copied().collect())
        .collect();
    let mut adj = vec![Vec::new(); g];
    let mut conflicts = Vec::new();
    for a in 0..g {
        for b in a + 1..g {
            if !sets[a].is_disjoint(&sets[b]) {
                adj[a].push(b);
                adj[b].push(a);
                conflicts.push((groups[a].min(groups[b]), groups[a].max(groups[b])));
            }
        }
    }
    let mut order: Vec<usize> = (0..g).collect();
    order.sort_by(|&a, &b| {
        adj[b]
            .len()
            .cmp(&adj[a].len())
            .then(groups[a].cmp(&groups[b]))
    });

    let mut blocks: Vec<Option<std::ops::Range<usize>>> = vec![None; g];
    for &v in &order {
        let need = users_per_group[v];
        let mut start = 0;
        // slide past any overlapping neighbour block until clear
        loop {
            let hit = adj[v]
                .iter()
                .filter_map(|&u| blocks[u].as_ref())
                .filter(|r| r.start < start + need && start < r.end)
                .map(|r| r.end)
                .max();
            match hit {
                Some(end) => start = end,
                None => break,
            }
        }
        blocks[v] = Some(start..start + need);
    }
    let needed = blocks.iter().flatten().map(|r| r.end).max().unwrap_or(0);
    if needed > q_count {
        return Err(Error::Capacity {
            needed,
            available: q_count,
        });
    }
    let mut map = BTreeMap::new();
    let mut rows = Vec::new();
    let mut used = BTreeSet::new();
    for (v, block) in blocks.iter().enumerate() {
        let block = block.clone().expect("every group placed");
        for (user, q) in block.clone().enumerate() {
            rows.push(AssignmentRow {
                group: groups[v],
                user,
                subcarrier: q,
            });
            used.insert(q);
        }
        map.insert(groups[v], block.collect());
    }
    rows.sort_by_key(|r| (r.group, r.user));
    conflicts.sort_unstable();
    Ok(CfsdmAssignment {
        groups: map,
        rows,
        conflicts,
        used: used.len(),
    })
}

/// `y = (H_{u,k}^(q))^h P c + n` for user `user` on this subcarrier.
pub fn per_user_receiver_model(
    channel_q: &SubcarrierChannel,
    user: usize,
    precoder: &CMat,
    noise_var: f64,
) -> Result<EffectiveChannel> {
    let h = channel_q.user_downlink(user)?;
    if h.ncols() != precoder.nrows() {
        return Err(Error::Dimension(format!(
            "user channel has {} beams, precoder {} rows",
            h.ncols(),
            precoder.nrows()
        )));
    }
    EffectiveChannel::new(h * precoder, noise_var)
}
