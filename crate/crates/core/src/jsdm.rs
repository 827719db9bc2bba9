//! Two-stage JSDM downlink: DFT-column pre-beamformers per group followed by
//! per-group precoders on the reduced virtual channels.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{frobenius_sq, singular_values, CMat};
use crate::vcm::{DftBasis, SupportSet, VirtualChannel};

/// Stacked pre-beamformer `B = [F_{S_1} ... F_{S_G}]`.
#[derive(Debug, Clone)]
pub struct PreBeamformer {
    pub blocks: Vec<CMat>,
    pub supports: Vec<Vec<usize>>,
    /// Bins claimed by more than one group, with the claimants.
    pub overlaps: BTreeMap<usize, Vec<usize>>,
}

impl PreBeamformer {
    pub fn stacked(&self) -> CMat {
        let rows = self.blocks.first().map_or(0, |b| b.nrows());
        let cols: usize = self.blocks.iter().map(|b| b.ncols()).sum();
        let mut out = CMat::zeros(rows, cols);
        let mut c0 = 0;
        for b in &self.blocks {
            out.view_mut((0, c0), (rows, b.ncols())).copy_from(b);
            c0 += b.ncols();
        }
        out
    }

    pub fn gram(&self) -> CMat {
        let b = self.stacked();
        b.adjoint() * b
    }

    pub fn is_disjoint(&self) -> bool {
        self.overlaps.is_empty()
    }
}

/// Bins shared by at least two of `sets`, mapped to the sharing set positions.
pub fn shared_bins(sets: &[Vec<usize>]) -> BTreeMap<usize, Vec<usize>> {
    let mut owners: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (g, s) in sets.iter().enumerate() {
        for &p in s.iter().collect::<BTreeSet<_>>() {
            owners.entry(p).or_default().push(g);
        }
    }
    owners.retain(|_, v| v.len() > 1);
    owners
}

/// Overlapping supports are recorded in `overlaps`, not rejected; resolve them
/// with [`resolve_overlap_release`] or CFSDM.
pub fn build_prebeamformers(supports: &[SupportSet], basis: &DftBasis) -> Result<PreBeamformer> {
    let sets: Vec<Vec<usize>> = supports.iter().map(|s| s.indices.clone()).collect();
    for s in &sets {
        if let Some(&bad) = s.iter().find(|&&p| p >= basis.order()) {
            return Err(Error::Dimension(format!(
                "bin {bad} outside basis of order {}",
                basis.order()
            )));
        }
    }
    Ok(PreBeamformer {
        blocks: sets.iter().map(|s| basis.columns(s)).collect(),
        overlaps: shared_bins(&sets),
        supports: sets,
    })
}

/// Per-group downlink `y_g = H_v^h P_g x_g + n_g`.
#[derive(Debug, Clone)]
pub struct GroupDownlinkModel {
    pub group: usize,
    /// `H_v^h`, `N_{d,g} x |S_g|`.
    pub channel: CMat,
    pub noise_var: f64,
    /// `tr(P P^h)`, equal to the group's antenna count.
    pub budget: f64,
    pub support: SupportSet,
}

impl GroupDownlinkModel {
    /// Number of data streams carried: `min(N_{d,g}, |S_g|)`.
    pub fn streams(&self) -> usize {
        self.channel.nrows().min(self.channel.ncols())
    }
}

pub fn snr_db_to_noise_var(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// Downlink models for every group, using TDD reciprocity (`H_d = H_v^h`).
pub fn assemble_downlink(groups: &[VirtualChannel], snr_s_db: f64) -> Vec<GroupDownlinkModel> {
    let noise_var = snr_db_to_noise_var(snr_s_db);
    groups
        .iter()
        .map(|vc| GroupDownlinkModel {
            group: vc.support.group,
            channel: vc.matrix.adjoint(),
            noise_var,
            budget: vc.matrix.ncols() as f64,
            support: vc.support.clone(),
        })
        .collect()
}

/// Comparison of the full pre-beamformed cascade against the reduced
/// per-group model, for one group.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CascadeReport {
    /// `||H_g^h B blkdiag(P) - [0 .. H_v^h P_g .. 0]||_F^2`.
    pub deviation_sq: f64,
    /// `||H_g^h B blkdiag(P)||_F^2`.
    pub full_sq: f64,
    /// Own-group received power `||H_v^h P_g||_F^2`.
    pub signal: f64,
    /// Power leaking in from other groups' beams.
    pub interference: f64,
}

/// Run the full cascade for every group. `uplinks[g]` is `H_g` (`N_u x N_{d,g}`)
/// and `precoders[g]` is `P_g` (`|S_g| x N_{s,g}`).
pub fn cascade_analysis(
    uplinks: &[CMat],
    prebeam: &PreBeamformer,
    precoders: &[CMat],
) -> Result<Vec<CascadeReport>> {
    if uplinks.len() != prebeam.blocks.len() || precoders.len() != prebeam.blocks.len() {
        return Err(Error::Dimension(
            "need one uplink and one precoder per group".into(),
        ));
    }
    let mut out = Vec::with_capacity(uplinks.len());
    for (g, h) in uplinks.iter().enumerate() {
        let dl = h.adjoint();
        let mut signal = 0.0;
        let mut interference = 0.0;
        let mut deviation_sq = 0.0;
        for (m, (block, p)) in prebeam.blocks.iter().zip(precoders).enumerate() {
            if block.ncols() != p.nrows() {
                return Err(Error::Dimension(format!(
                    "group {m}: precoder rows != beam count"
                )));
            }
            let full = &dl * block * p;
            let power = frobenius_sq(&full);
            if m == g {
                // reduced model: H_v^h P_g with H_v = F_S^h H_g
                let reduced = (block.adjoint() * h).adjoint() * p;
                deviation_sq += frobenius_sq(&(&full - &reduced));
                signal += power;
            } else {
                deviation_sq += power;
                interference += power;
            }
        }
        out.push(CascadeReport {
            deviation_sq,
            full_sq: signal + interference,
            signal,
            interference,
        });
    }
    Ok(out)
}

/// Largest absolute deviation between the singular values of `H_v^h F_S^h`
/// and those of `H_v^h`.
pub fn prebeamformer_sv_gap(virtual_dl: &CMat, block: &CMat) -> f64 {
    let a = singular_values(virtual_dl);
    let b = singular_values(&(virtual_dl * block.adjoint()));
    a.iter()
        .zip(&b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReleaseOutcome {
    pub sets: Vec<Vec<usize>>,
    /// Positions of sets that became empty.
    pub emptied: Vec<usize>,
}

/// Drop every bin claimed by two or more groups from all of its claimants.
pub fn resolve_overlap_release(sets: &[Vec<usize>]) -> ReleaseOutcome {
    let shared = shared_bins(sets);
    let pruned: Vec<Vec<usize>> = sets
        .iter()
        .map(|s| {
            let mut v: Vec<usize> = s
                .iter()
                .copied()
                .filter(|p| !shared.contains_key(p))
                .collect();
            v.sort_unstable();
            v.dedup();
            v
        })
        .collect();
    let emptied = pruned
        .iter()
        .enumerate()
        .filter(|(g, s)| s.is_empty() && !sets[*g].is_empty())
        .map(|(g, _)| g)
        .collect();
    ReleaseOutcome {
        sets: pruned,
        emptied,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;

    fn set(group: usize, idx: &[usize]) -> SupportSet {
        SupportSet {
            group,
            indices: idx.to_vec(),
            captured: 1.0,
        }
    }

    #[test]
    fn single_bin_prebeamformer_is_first_column() {
        let basis = DftBasis::ula(8);
        let pb = build_prebeamformers(&[set(0, &[0])], &basis).unwrap();
        assert!(max_abs_diff(&pb.stacked(), &basis.columns(&[0])) < 1e-15);
    }

    #[test]
    fn overlapping_blocks_couple_on_shared_bins_only() {
        let basis = DftBasis::ula(16);
        let pb = build_prebeamformers(&[set(0, &[1, 2, 3]), set(1, &[3, 4])], &basis).unwrap();
        assert_eq!(pb.overlaps.keys().copied().collect::<Vec<_>>(), vec![3]);
        let gram = pb.gram();
        // columns: 1 2 3 | 3 4 -> only (2,3) and (3,2) off-block entries are 1
        for r in 0..5 {
            for c in 0..5 {
                let same_block = (r < 3) == (c < 3);
                let want = if r == c || (!same_block && ((r, c) == (2, 3) || (r, c) == (3, 2))) {
                    1.0
                } else {
                    0.0
                };
                assert!((gram[(r, c)].re - want).abs() < 1e-12 && gram[(r, c)].im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn release_examples() {
        let disjoint = vec![vec![1, 2], vec![5]];
        assert_eq!(resolve_overlap_release(&disjoint).sets, disjoint);
        let twins = resolve_overlap_release(&[vec![3, 4], vec![4, 3]]);
        assert_eq!(twins.sets, vec![Vec::<usize>::new(), vec![]]);
        assert_eq!(twins.emptied, vec![0, 1]);
    }

    #[test]
    fn prebeamforming_keeps_singular_values() {
        let basis = DftBasis::ula(10);
        let block = basis.columns(&[2, 3, 4]);
        let hv_dl = CMat::from_fn(2, 3, |r, c| {
            num_complex::Complex64::new(r as f64 + 1.0, c as f64 - r as f64)
        });
        assert!(prebeamformer_sv_gap(&hv_dl, &block) < 1e-12);
    }
}
