use std::f64::consts::{LN_2, LOG2_E};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::constellation::Constellation;
use super::quadrature::QuadratureGrid;
use crate::error::{Error, Result};
use crate::linalg::{compensated_sum, gram_factor, CMat, ZERO};
use crate::par;
use crate::rng::substream;

/// Largest alphabet-vector count `M^N_t` evaluated without an explicit override.
pub const GUARD_LIMIT: u64 = 1 << 20;

/// Composite channel `G` (`N_r x N_t`) seen by the receiver, with its noise variance.
#[derive(Debug, Clone)]
pub struct EffectiveChannel {
    pub g: CMat,
    pub noise_var: f64,
}

impl EffectiveChannel {
    pub fn new(g: CMat, noise_var: f64) -> Result<Self> {
        if !(noise_var > 0.0 && noise_var.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise variance must be positive, got {noise_var}"
            )));
        }
        if g.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument(
                "channel has non-finite entries".into(),
            ));
        }
        Ok(Self { g, noise_var })
    }

    pub fn from_snr_db(g: CMat, snr_db: f64) -> Result<Self> {
        Self::new(g, 10f64.powf(-snr_db / 10.0))
    }

    pub fn n_r(&self) -> usize {
        self.g.nrows()
    }

    pub fn n_t(&self) -> usize {
        self.g.ncols()
    }
}

/// `M^N_t` as a float, for guard messages and cost estimates.
pub fn alphabet_size(order: usize, n_t: usize) -> f64 {
    (order as f64).powi(n_t as i32)
}

/// Refuse `M^N_t > 2^20` unless `allow_override` is set.
pub fn check_guard(order: usize, n_t: usize, allow_override: bool) -> Result<()> {
    let k = alphabet_size(order, n_t);
    if k > GUARD_LIMIT as f64 && !allow_override {
        return Err(Error::Guard(format!(
            "M^N_t = {order}^{n_t} = {k:.3e} exceeds the mutual-information guard M^N_t <= 2^20; \
             reduce the stream count, use PGP, or set the override"
        )));
    }
    Ok(())
}

/// Work of one quadrature evaluation: `K^2` symbol pairs times the node count.
pub fn gh_cost(order: usize, n_t: usize, rank: usize, per_axis: usize) -> f64 {
    alphabet_size(order, n_t).powi(2) * (per_axis as f64).powi(2 * rank as i32)
}

/// Channel reduced to its informative part: exactly-zero columns carry no
/// information and are dropped, and rows are replaced by the canonical Gram
/// factor (the noise is isotropic, so only `G^h G` matters).
struct Reduced {
    active: Vec<usize>,
    rows: usize,
    /// `R x_m` for every alphabet vector, `[re, im]` interleaved.
    rx: Vec<f64>,
    /// Alphabet vectors, `K x active` row-major.
    xs: Vec<Complex64>,
    k: usize,
}

fn reduce(g: &CMat, cons: &Constellation) -> Reduced {
    let active: Vec<usize> = (0..g.ncols())
        .filter(|&c| g.column(c).iter().any(|z| z.norm_sqr() > 0.0))
        .collect();
    let sub = CMat::from_fn(g.nrows(), active.len(), |r, c| g[(r, active[c])]);
    let r = gram_factor(&sub);
    let rows = r.nrows();
    let n = active.len();
    let m = cons.order();
    let k = m.pow(n as u32);
    let pts = cons.points();
    let mut xs = Vec::with_capacity(k * n);
    let mut rx = vec![0.0; k * 2 * rows];
    for idx in 0..k {
        let mut rest = idx;
        for _ in 0..n {
            xs.push(pts[rest % m]);
            rest /= m;
        }
        let x = &xs[idx * n..(idx + 1) * n];
        for row in 0..rows {
            let mut acc = ZERO;
            for (c, xc) in x.iter().enumerate() {
                acc += r[(row, c)] * xc;
            }
            rx[idx * 2 * rows + 2 * row] = acc.re;
            rx[idx * 2 * rows + 2 * row + 1] = acc.im;
        }
    }
    Reduced {
        active,
        rows,
        rx,
        xs,
        k,
    }
}

/// Terms this far (in nats) below the largest exponent are dropped; their
/// total relative weight is below `K e^-40`.
const LSE_CUTOFF: f64 = 40.0;

/// `ln sum_m exp(v_m)`, overwriting `v` with `exp(v_m - max)` (zero for
/// dropped terms).
#[inline]
fn log_sum_exp_in_place(v: &mut [f64]) -> f64 {
    let vmax = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for slot in v.iter_mut() {
        let x = *slot - vmax;
        *slot = if x > -LSE_CUTOFF { x.exp() } else { 0.0 };
        s += *slot;
    }
    vmax + s.ln()
}

/// Alphabet-vector indices to evaluate, with multiplicities.
///
/// When the alphabet is closed under multiplication by `j` (square QAM), the
/// vectors `x`, `jx`, `-x`, `-jx` give identical quadrature terms: the tensor
/// grid is invariant under the matching rotation of every noise coordinate.
/// One representative per orbit is then enough.
fn orbit_representatives(cons: &Constellation, n: usize, k: usize) -> Vec<(usize, f64)> {
    let pts = cons.points();
    let m = pts.len();
    let rot: Option<Vec<usize>> = pts
        .iter()
        .map(|p| {
            let q = p * Complex64::new(0.0, 1.0);
            pts.iter().position(|r| (r - q).norm() < 1e-12)
        })
        .collect();
    let Some(rot) = rot.filter(|_| n > 0) else {
        return (0..k).map(|i| (i, 1.0)).collect();
    };
    let rotate = |mut idx: usize| {
        let mut out = 0;
        let mut place = 1;
        for _ in 0..n {
            out += rot[idx % m] * place;
            idx /= m;
            place *= m;
        }
        out
    };
    (0..k)
        .filter_map(|i| {
            let mut orbit = [i; 4];
            for t in 1..4 {
                orbit[t] = rotate(orbit[t - 1]);
            }
            // the smallest index represents the orbit; a zero point could shrink it
            let size = orbit
                .iter()
                .collect::<std::collections::BTreeSet<_>>()
                .len();
            orbit.iter().all(|&o| o >= i).then_some((i, size as f64))
        })
        .collect()
}

/// `ln sum_m exp(-(||R(x_k - x_m) + n||^2 - ||n||^2) / sigma^2)`; posterior
/// weights (unnormalized) are left in `scratch`.
fn log_partition(red: &Reduced, k: usize, noise: &[f64], inv_var: f64, scratch: &mut [f64]) -> f64 {
    let d2 = 2 * red.rows;
    let rk = &red.rx[k * d2..(k + 1) * d2];
    for (m, slot) in scratch.iter_mut().enumerate() {
        let rm = &red.rx[m * d2..(m + 1) * d2];
        let mut d = 0.0;
        for t in 0..d2 {
            let a = rk[t] - rm[t];
            d += a * (a + 2.0 * noise[t]);
        }
        *slot = -d * inv_var;
    }
    log_sum_exp_in_place(scratch)
}

/// Differences `R(x_k - x_m)` for one `k`, reused across quadrature nodes.
struct Differences {
    d2: usize,
    diff: Vec<f64>,
    norm: Vec<f64>,
}

impl Differences {
    fn new(red: &Reduced, k: usize) -> Self {
        let d2 = 2 * red.rows;
        let rk = &red.rx[k * d2..(k + 1) * d2];
        let mut diff = Vec::with_capacity(red.k * d2);
        let mut norm = Vec::with_capacity(red.k);
        for m in 0..red.k {
            let rm = &red.rx[m * d2..(m + 1) * d2];
            let mut nn = 0.0;
            for t in 0..d2 {
                let a = rk[t] - rm[t];
                diff.push(a);
                nn += a * a;
            }
            norm.push(nn);
        }
        Self { d2, diff, norm }
    }

    #[inline]
    fn log_partition(&self, noise: &[f64], inv_var: f64, scratch: &mut [f64]) -> f64 {
        let twice: Vec<f64> = noise.iter().map(|x| 2.0 * x).collect();
        for ((slot, a), nn) in scratch
            .iter_mut()
            .zip(self.diff.chunks_exact(self.d2))
            .zip(&self.norm)
        {
            let mut d = *nn;
            for (at, nt) in a.iter().zip(&twice) {
                d += at * nt;
            }
            *slot = -d * inv_var;
        }
        log_sum_exp_in_place(scratch)
    }
}

/// Quadrature evaluation of the mutual information and, optionally, the MMSE matrix.
#[derive(Debug, Clone)]
pub struct GhEvaluation {
    /// Clamped to `[0, N_t log2 M]`.
    pub bits: f64,
    /// Before clamping.
    pub raw_bits: f64,
    pub mmse: Option<CMat>,
}

pub fn evaluate_gh(
    ch: &EffectiveChannel,
    cons: &Constellation,
    grid: &QuadratureGrid,
    want_mmse: bool,
) -> Result<GhEvaluation> {
    evaluate_gh_impl(ch, cons, grid, want_mmse, true)
}

fn evaluate_gh_impl(
    ch: &EffectiveChannel,
    cons: &Constellation,
    grid: &QuadratureGrid,
    want_mmse: bool,
    use_symmetry: bool,
) -> Result<GhEvaluation> {
    if grid.complex_dims() != ch.n_r() {
        return Err(Error::Dimension(format!(
            "quadrature grid covers {} receive dimensions, channel has {}",
            grid.complex_dims(),
            ch.n_r()
        )));
    }
    let n_t = ch.n_t();
    let red = reduce(&ch.g, cons);
    let n = red.active.len();
    let mut mmse_full = want_mmse.then(|| CMat::identity(n_t, n_t));
    if red.rows == 0 {
        return Ok(GhEvaluation {
            bits: 0.0,
            raw_bits: 0.0,
            mmse: mmse_full,
        });
    }
    let (coords, weights) = grid.with_dims(red.rows).noise_points(ch.noise_var);
    let d2 = 2 * red.rows;
    let inv_var = 1.0 / ch.noise_var;

    let reps = if use_symmetry {
        orbit_representatives(cons, n, red.k)
    } else {
        (0..red.k).map(|i| (i, 1.0)).collect()
    };
    let per_k: Vec<(f64, Option<Vec<Complex64>>)> = par::map_range(reps.len(), |r| {
        let (k, mult) = reps[r];
        let mut scratch = vec![0.0; red.k];
        let mut lse_terms = Vec::with_capacity(weights.len());
        let mut err_acc = want_mmse.then(|| vec![ZERO; n * n]);
        let xk = &red.xs[k * n..(k + 1) * n];
        let mut e = vec![ZERO; n];
        let diffs = Differences::new(&red, k);
        for (j, &w) in weights.iter().enumerate() {
            let noise = &coords[j * d2..(j + 1) * d2];
            let lse = diffs.log_partition(noise, inv_var, &mut scratch);
            lse_terms.push(mult * w * lse);
            if let Some(acc) = err_acc.as_mut() {
                let z: f64 = scratch.iter().sum();
                e.copy_from_slice(xk);
                for (m, &p) in scratch.iter().enumerate() {
                    if p > 0.0 {
                        let pm = p / z;
                        for (ei, xm) in e.iter_mut().zip(&red.xs[m * n..(m + 1) * n]) {
                            *ei -= xm * pm;
                        }
                    }
                }
                for a in 0..n {
                    for b in 0..n {
                        acc[a * n + b] += e[a] * e[b].conj() * (mult * w);
                    }
                }
            }
        }
        (compensated_sum(lse_terms), err_acc)
    });

    let mean_lse = compensated_sum(per_k.iter().map(|(v, _)| *v)) / red.k as f64;
    let max_bits = n as f64 * cons.bits_per_symbol();
    let raw_bits = max_bits - mean_lse * LOG2_E;
    if let Some(full) = mmse_full.as_mut() {
        let inv_k = 1.0 / red.k as f64;
        for a in 0..n {
            for b in 0..n {
                let re = compensated_sum(
                    per_k
                        .iter()
                        .map(|(_, acc)| acc.as_ref().unwrap()[a * n + b].re),
                );
                let im = compensated_sum(
                    per_k
                        .iter()
                        .map(|(_, acc)| acc.as_ref().unwrap()[a * n + b].im),
                );
                full[(red.active[a], red.active[b])] = Complex64::new(re, im) * inv_k;
            }
        }
        // exact Hermitian symmetry
        let sym = (full.clone() + full.adjoint()) * Complex64::new(0.5, 0.0);
        *full = sym;
    }
    Ok(GhEvaluation {
        bits: raw_bits.clamp(0.0, max_bits),
        raw_bits,
        mmse: mmse_full,
    })
}

/// Mutual information in bits per channel use by Gauss-Hermite quadrature.
pub fn mutual_information_gh(
    ch: &EffectiveChannel,
    cons: &Constellation,
    grid: &QuadratureGrid,
) -> Result<f64> {
    Ok(evaluate_gh(ch, cons, grid, false)?.bits)
}

/// `E[(x - x_hat)(x - x_hat)^h]` for the conditional-mean estimator.
pub fn mmse_matrix(
    ch: &EffectiveChannel,
    cons: &Constellation,
    grid: &QuadratureGrid,
) -> Result<CMat> {
    Ok(evaluate_gh(ch, cons, grid, true)?.mmse.expect("requested"))
}

/// `dI/dP* = (log2 e / sigma^2) H^h H P E` in bits, with `E` the MMSE matrix of
/// `G = H P`. `h` carries `H` and the noise variance.
pub fn mi_gradient(
    h: &EffectiveChannel,
    p: &CMat,
    cons: &Constellation,
    grid: &QuadratureGrid,
) -> Result<CMat> {
    if h.n_t() != p.nrows() {
        return Err(Error::Dimension(format!(
            "channel has {} inputs, precoder {} rows",
            h.n_t(),
            p.nrows()
        )));
    }
    let g = EffectiveChannel::new(&h.g * p, h.noise_var)?;
    let e = mmse_matrix(&g, cons, grid)?;
    Ok(gradient_from_mmse(h, p, &e))
}

pub fn gradient_from_mmse(h: &EffectiveChannel, p: &CMat, e: &CMat) -> CMat {
    let scale = Complex64::new(LOG2_E / h.noise_var, 0.0);
    (h.g.adjoint() * &h.g * p * e) * scale
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct McEstimate {
    pub bits: f64,
    pub std_error: f64,
}

const MC_CHUNK: usize = 1024;
const MC_TAG: u64 = 0x6d63;

/// Monte-Carlo oracle. Sample `i` uses alphabet vector `i mod K` and noise from
/// a per-chunk substream, so the estimate does not depend on the thread count.
pub fn mutual_information_mc(
    ch: &EffectiveChannel,
    cons: &Constellation,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    if n_samples < 10_000 {
        return Err(Error::InvalidArgument(format!(
            "Monte-Carlo needs at least 10^4 samples, got {n_samples}"
        )));
    }
    let red = reduce(&ch.g, cons);
    if red.rows == 0 {
        return Ok(McEstimate {
            bits: 0.0,
            std_error: 0.0,
        });
    }
    let d2 = 2 * red.rows;
    let inv_var = 1.0 / ch.noise_var;
    let sd = (ch.noise_var / 2.0).sqrt();
    let chunks = n_samples.div_ceil(MC_CHUNK);
    let sums: Vec<(f64, f64)> = par::map_range(chunks, |c| {
        let mut rng = substream(seed, &[MC_TAG, c as u64]);
        let mut scratch = vec![0.0; red.k];
        let mut noise = vec![0.0; d2];
        let start = c * MC_CHUNK;
        let end = (start + MC_CHUNK).min(n_samples);
        let mut vals = Vec::with_capacity(end - start);
        for i in start..end {
            for v in noise.iter_mut() {
                *v = sd * rng.sample::<f64, _>(StandardNormal);
            }
            vals.push(log_partition(
                &red,
                i % red.k,
                &noise,
                inv_var,
                &mut scratch,
            ));
        }
        let sq: Vec<f64> = vals.iter().map(|v| v * v).collect();
        (compensated_sum(vals), compensated_sum(sq))
    });
    let n = n_samples as f64;
    let mean = compensated_sum(sums.iter().map(|s| s.0)) / n;
    let mean_sq = compensated_sum(sums.iter().map(|s| s.1)) / n;
    let var = (mean_sq - mean * mean).max(0.0) * n / (n - 1.0);
    let max_bits = red.active.len() as f64 * cons.bits_per_symbol();
    let bits = max_bits - mean / LN_2;
    Ok(McEstimate {
        bits: bits.clamp(0.0, max_bits),
        std_error: (var / n).sqrt() / LN_2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimateMethod {
    Gh,
    Mc,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MiEstimate {
    pub bits: f64,
    pub std_error: f64,
    pub method: EstimateMethod,
}

/// Quadrature when its cost fits `gh_budget`, Monte Carlo otherwise.
#[derive(Debug, Clone)]
pub struct MiEstimator {
    pub per_axis: usize,
    pub gh_budget: f64,
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for MiEstimator {
    fn default() -> Self {
        Self {
            per_axis: 3,
            gh_budget: 5e8,
            mc_samples: 20_000,
            seed: 0,
        }
    }
}

impl MiEstimator {
    pub fn estimate(&self, ch: &EffectiveChannel, cons: &Constellation) -> Result<MiEstimate> {
        let active = (0..ch.n_t())
            .filter(|&c| ch.g.column(c).iter().any(|z| z.norm_sqr() > 0.0))
            .count();
        let rank = active.min(ch.n_r());
        if gh_cost(cons.order(), active, rank, self.per_axis) <= self.gh_budget {
            let grid = QuadratureGrid::new(self.per_axis, ch.n_r())?;
            let bits = mutual_information_gh(ch, cons, &grid)?;
            Ok(MiEstimate {
                bits,
                std_error: 0.0,
                method: EstimateMethod::Gh,
            })
        } else {
            let mc = mutual_information_mc(ch, cons, self.mc_samples, self.seed)?;
            Ok(MiEstimate {
                bits: mc.bits,
                std_error: mc.std_error,
                method: EstimateMethod::Mc,
            })
        }
    }
}
