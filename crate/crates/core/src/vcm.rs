//! Virtual channel model: projection onto the DFT angular basis, sparse
//! support detection and the closed-form support predictions for linear and
//! planar arrays.
//!
//! The basis is the *unitary* DFT (`1/sqrt(N)` scaling). A column with energy
//! `N_u` therefore spreads an average power of 1 per angular bin, which is what
//! the default detection threshold of 1.0 compares against.
//!
//! Indices are 0-based here; reports convert to 1-based via
//! [`SupportSet::one_based`].

use serde::{Deserialize, Serialize};

use crate::channel::{ArrayGeometry, ArrayKind};
use crate::error::{Error, Result};
use crate::linalg::{dft_matrix, frobenius_sq, select_columns, select_rows, CMat};

pub const DEFAULT_THRESHOLD: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct DftBasis {
    pub outer: usize,
    pub inner: usize,
    pub matrix: CMat,
}

impl DftBasis {
    pub fn ula(n: usize) -> Self {
        Self {
            outer: n,
            inner: 1,
            matrix: dft_matrix(n),
        }
    }

    /// `F_outer ⊗ F_inner`, matching the inner-fastest array vectorization.
    pub fn kronecker(outer: usize, inner: usize) -> Self {
        Self {
            outer,
            inner,
            matrix: dft_matrix(outer).kronecker(&dft_matrix(inner)),
        }
    }

    pub fn for_geometry(g: &ArrayGeometry) -> Self {
        match g.kind {
            ArrayKind::UlaZ => Self::ula(g.outer),
            ArrayKind::UpaZx | ArrayKind::UpaXy => Self::kronecker(g.outer, g.inner),
        }
    }

    pub fn order(&self) -> usize {
        self.outer * self.inner
    }

    /// Basis columns selected by `indices` (the pre-beamformer block `F_S`).
    pub fn columns(&self, indices: &[usize]) -> CMat {
        select_columns(&self.matrix, indices)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportSet {
    pub group: usize,
    /// Sorted, unique, 0-based angular bins.
    pub indices: Vec<usize>,
    /// Fraction of the group's channel power captured on `indices`.
    pub captured: f64,
}

impl SupportSet {
    pub fn one_based(&self) -> Vec<usize> {
        self.indices.iter().map(|i| i + 1).collect()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// A group's sparse angular-domain channel: `H_v = S^t F^h H`.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualChannel {
    pub support: SupportSet,
    /// `|S| x N_{d,g}`.
    pub matrix: CMat,
}

/// `F^h H`.
pub fn project_vcm(h: &CMat, basis: &DftBasis) -> Result<CMat> {
    if h.nrows() != basis.order() {
        return Err(Error::Dimension(format!(
            "channel has {} rows but the basis has order {}",
            h.nrows(),
            basis.order()
        )));
    }
    Ok(basis.matrix.adjoint() * h)
}

/// Mean squared magnitude of each row, pooled over all group columns.
pub fn row_power(h_tilde: &CMat) -> Vec<f64> {
    let cols = h_tilde.ncols().max(1) as f64;
    h_tilde
        .row_iter()
        .map(|r| r.iter().map(|z| z.norm_sqr()).sum::<f64>() / cols)
        .collect()
}

/// Bins whose pooled power exceeds `threshold`. An all-zero input yields an
/// empty set with zero captured power.
pub fn detect_support(h_tilde: &CMat, threshold: f64, group: usize) -> Result<SupportSet> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold must be positive, got {threshold}"
        )));
    }
    let power = row_power(h_tilde);
    let total: f64 = power.iter().sum();
    let indices: Vec<usize> = (0..power.len()).filter(|&p| power[p] > threshold).collect();
    let kept: f64 = indices.iter().map(|&p| power[p]).sum();
    let captured = if total > 0.0 { kept / total } else { 0.0 };
    Ok(SupportSet {
        group,
        indices,
        captured,
    })
}

/// Fraction of `h_tilde`'s power on the bins in `set`.
pub fn power_fraction(h_tilde: &CMat, set: &[usize]) -> f64 {
    let power = row_power(h_tilde);
    let total: f64 = power.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    set.iter().map(|&p| power[p]).sum::<f64>() / total
}

fn wrap_sorted(raw: impl IntoIterator<Item = i64>, n: usize) -> Vec<usize> {
    let mut v: Vec<usize> = raw
        .into_iter()
        .map(|p| p.rem_euclid(n as i64) as usize)
        .collect();
    v.sort_unstable();
    v.dedup();
    v
}

/// Elevation cluster as a clamped radian interval.
fn elevation_range(theta: f64, spread: f64) -> (f64, f64) {
    (
        (theta - spread).max(0.0),
        (theta + spread).min(std::f64::consts::PI),
    )
}

/// Main-lobe bins of a ULA cluster: every `p` with
/// `|cos(t) - p / (D N)| <= 1 / (D N)` for some `t` in `[theta - spread, theta + spread]`.
/// Negative bins wrap to `N + p`. Angles in radians.
// The inclusive edge test must survive cos(pi/2) != 0 in floating point.
const BIN_EPS: f64 = 1e-9;

pub fn predicted_support_ula(theta: f64, spread: f64, spacing: f64, n: usize) -> Vec<usize> {
    let (lo, hi) = elevation_range(theta, spread);
    let dn = spacing * n as f64;
    // cos is decreasing on [0, pi]
    let first = (dn * hi.cos() - 1.0 - BIN_EPS).ceil() as i64;
    let last = (dn * lo.cos() + 1.0 + BIN_EPS).floor() as i64;
    wrap_sorted(first..=last, n)
}

/// Closed-form support size bound `3 + 2 D N |sin(theta)| spread` (spread in radians).
pub fn support_bound(theta: f64, spread: f64, spacing: f64, n: usize) -> f64 {
    3.0 + 2.0 * spacing * n as f64 * theta.sin().abs() * spread
}

/// Sufficient condition for two ULA clusters with a common spread to have
/// disjoint predicted supports.
///
/// With `a` the larger elevation: `cos(a - spread) < cos(b + spread) - 2 / (D N)`.
/// The bin axis is circular, so clusters near opposite endfire directions can
/// alias onto the same bins; that case is also reported as overlapping.
pub fn lemma2_disjoint(theta_g: f64, theta_h: f64, spread: f64, spacing: f64, n: usize) -> bool {
    if theta_g == theta_h {
        return false;
    }
    let (large, small) = if theta_g > theta_h {
        (theta_g, theta_h)
    } else {
        (theta_h, theta_g)
    };
    let dn = spacing * n as f64;
    let (l_lo, l_hi) = elevation_range(large, spread);
    let (s_lo, s_hi) = elevation_range(small, spread);
    let separated = l_lo.cos() < s_hi.cos() - 2.0 / dn;
    // lowest bin of the larger-angle cluster, shifted by one period, must stay
    // above the highest bin of the smaller-angle cluster
    let no_alias = dn * l_hi.cos() - 1.0 + n as f64 > dn * s_lo.cos() + 1.0;
    separated && no_alias
}

/// Range of `f` over the rectangle `[t0, t1] x [p0, p1]`, checking corners and
/// the interior critical lines of sin/cos.
fn range_over(
    f: impl Fn(f64, f64) -> f64,
    (t0, t1): (f64, f64),
    (p0, p1): (f64, f64),
) -> (f64, f64) {
    use std::f64::consts::{FRAC_PI_2, PI};
    let crit = |a: f64, b: f64, extra: &[f64]| {
        let mut v = vec![a, b];
        for &c in extra {
            for k in -2..=2 {
                let x = c + k as f64 * PI;
                if x > a && x < b {
                    v.push(x);
                }
            }
        }
        v
    };
    let ts = crit(t0, t1, &[0.0, FRAC_PI_2]);
    let ps = crit(p0, p1, &[0.0, FRAC_PI_2]);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &t in &ts {
        for &p in &ps {
            let v = f(t, p);
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    (lo, hi)
}

/// Bins `p` of one axis with `|c - p / (D N)| < 1 / (D N)` for some `c` in `[c_lo, c_hi]`.
fn axis_bins(c_lo: f64, c_hi: f64, spacing: f64, n: usize) -> Vec<usize> {
    let dn = spacing * n as f64;
    let lo = dn * c_lo - 1.0;
    let hi = dn * c_hi + 1.0;
    let first = lo.floor() as i64;
    let last = hi.ceil() as i64;
    wrap_sorted(
        (first..=last).filter(|&p| (p as f64) > lo && (p as f64) < hi),
        n,
    )
}

/// Planar-array support prediction: the Cartesian product of per-axis
/// main-lobe bins, vectorized as `outer_bin * n_inner + inner_bin`.
/// Angles in radians.
pub fn predicted_support_upa(
    theta: f64,
    theta_spread: f64,
    phi: f64,
    phi_spread: f64,
    geometry: &ArrayGeometry,
) -> Result<Vec<usize>> {
    if !geometry.is_planar() {
        return Err(Error::Precondition(
            "planar support prediction needs a UPA geometry".into(),
        ));
    }
    let t = elevation_range(theta, theta_spread);
    let p = (phi - phi_spread, phi + phi_spread);
    let outer_cos = |a: f64, b: f64| geometry.axis_cosines(a, b).0;
    let inner_cos = |a: f64, b: f64| geometry.axis_cosines(a, b).1;
    let (o_lo, o_hi) = range_over(outer_cos, t, p);
    let (i_lo, i_hi) = range_over(inner_cos, t, p);
    let outer = axis_bins(o_lo, o_hi, geometry.spacing, geometry.outer);
    let inner = axis_bins(i_lo, i_hi, geometry.spacing, geometry.inner);
    let mut out: Vec<usize> = outer
        .iter()
        .flat_map(|&o| inner.iter().map(move |&i| o * geometry.inner + i))
        .collect();
    out.sort_unstable();
    Ok(out)
}

/// Restrict a group channel to its support: `H_v = S^t F^h H`. The captured
/// fraction is `||F_S H_v||^2 / ||H||^2`.
pub fn effective_virtual_channel(
    h: &CMat,
    basis: &DftBasis,
    support: &[usize],
    group: usize,
) -> Result<VirtualChannel> {
    let h_tilde = project_vcm(h, basis)?;
    if let Some(&bad) = support.iter().find(|&&p| p >= basis.order()) {
        return Err(Error::Dimension(format!(
            "support index {bad} out of range {}",
            basis.order()
        )));
    }
    let matrix = select_rows(&h_tilde, support);
    let total = frobenius_sq(h);
    let captured = if total > 0.0 {
        frobenius_sq(&matrix) / total
    } else {
        0.0
    };
    Ok(VirtualChannel {
        support: SupportSet {
            group,
            indices: support.to_vec(),
            captured,
        },
        matrix,
    })
}

/// Jaccard similarity of two index sets.
pub fn jaccard(a: &[usize], b: &[usize]) -> f64 {
    use std::collections::BTreeSet;
    let a: BTreeSet<_> = a.iter().collect();
    let b: BTreeSet<_> = b.iter().collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}
