//! Per-group precoder design on the reduced downlink `y = H P x + n`.
//!
//! With the thin SVD `H = U S V^h` and `P = V diag(d) W`, the received signal
//! is `U S diag(d) W x + n`, and `U` drops out of the mutual information. All
//! optimization therefore runs on the square diagonal model `S diag(d) W`.

use std::f64::consts::LOG2_E;
use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{frobenius_sq, max_abs_diff, polar_unitary, real_diag, svd_sorted, CMat};
use crate::mi::{
    check_guard, evaluate_gh, mutual_information_gh, Constellation, EffectiveChannel,
    QuadratureGrid,
};
use crate::rng::substream;

/// Relative singular-value floor below which a direction counts as null.
pub const SV_EPS: f64 = 1e-8;

/// `P = V diag(d) W`.
#[derive(Debug, Clone)]
pub struct PrecoderParam {
    /// Right singular vectors of the downlink channel, `|S| x N_s`.
    pub v: CMat,
    /// Singular values, descending, length `N_s`.
    pub singular: Vec<f64>,
    pub d: Vec<f64>,
    pub w: CMat,
    pub budget: f64,
}

impl PrecoderParam {
    pub fn precoder(&self) -> CMat {
        &self.v * real_diag(&self.d) * &self.w
    }

    pub fn streams(&self) -> usize {
        self.singular.len()
    }

    /// `S diag(d) W`.
    pub fn diagonal_channel(&self) -> CMat {
        diagonal_model(&self.singular, &self.d, &self.w)
    }

    pub fn power_error(&self) -> f64 {
        (self.d.iter().map(|x| x * x).sum::<f64>() - self.budget).abs()
    }

    pub fn unitarity_error(&self) -> f64 {
        let n = self.w.nrows();
        max_abs_diff(&(self.w.adjoint() * &self.w), &CMat::identity(n, n))
    }
}

fn diagonal_model(s: &[f64], d: &[f64], w: &CMat) -> CMat {
    let sd: Vec<f64> = s.iter().zip(d).map(|(a, b)| a * b).collect();
    real_diag(&sd) * w
}

fn rank_of(s: &[f64]) -> usize {
    let smax = s.first().copied().unwrap_or(0.0);
    s.iter()
        .filter(|&&x| smax > 0.0 && x > SV_EPS * smax)
        .count()
}

fn uniform_power(n_on: usize, total: usize, budget: f64) -> Vec<f64> {
    let level = if n_on > 0 {
        (budget / n_on as f64).sqrt()
    } else {
        0.0
    };
    (0..total)
        .map(|i| if i < n_on { level } else { 0.0 })
        .collect()
}

/// SVD of the downlink channel with uniform power over the nonzero singular
/// directions and `W = I`.
pub fn svd_parametrize(h_dl: &CMat, budget: f64) -> Result<PrecoderParam> {
    if h_dl.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidArgument(
            "downlink channel has non-finite entries".into(),
        ));
    }
    if !(budget > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "power budget must be positive, got {budget}"
        )));
    }
    let (s, _u, v) = svd_sorted(h_dl);
    let r = rank_of(&s);
    if r == 0 {
        return Err(Error::RankZero);
    }
    let n = s.len();
    Ok(PrecoderParam {
        v,
        d: uniform_power(r, n, budget),
        w: CMat::identity(n, n),
        singular: s,
        budget,
    })
}

#[derive(Debug, Clone)]
pub struct OptimizerOptions {
    pub max_iters: usize,
    pub rel_tol: f64,
    pub initial_step: f64,
    pub shrink: f64,
    pub slope: f64,
    pub max_halvings: usize,
    /// Lift the `M^N_t` guard.
    pub allow_override: bool,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            max_iters: 50,
            rel_tol: 1e-4,
            initial_step: 1.0,
            shrink: 0.5,
            slope: 1e-4,
            max_halvings: 30,
            allow_override: false,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub objective_bits: f64,
    /// Accepted step on the power vector (0 when the search failed).
    pub step_d: f64,
    /// Accepted step on the rotation.
    pub step_w: f64,
    pub power_error: f64,
    pub unitarity_error: f64,
}

#[derive(Debug, Clone)]
pub struct OptimizeOutcome {
    pub param: PrecoderParam,
    pub trace: Vec<TraceRow>,
    pub mi_bits: f64,
    pub iterations: usize,
    /// Stopped on the tolerance or on two failed line searches rather than the
    /// iteration cap.
    pub converged: bool,
}

pub fn write_trace_csv<W: Write>(trace: &[TraceRow], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    for row in trace {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}

struct DiagonalProblem<'a> {
    s: &'a [f64],
    noise_var: f64,
    cons: &'a Constellation,
    grid: QuadratureGrid,
}

impl DiagonalProblem<'_> {
    fn channel(&self, d: &[f64], w: &CMat) -> Result<EffectiveChannel> {
        EffectiveChannel::new(diagonal_model(self.s, d, w), self.noise_var)
    }

    fn objective(&self, d: &[f64], w: &CMat) -> Result<f64> {
        mutual_information_gh(&self.channel(d, w)?, self.cons, &self.grid)
    }

    /// `c S^2 diag(d) W E` with `c = log2 e / sigma^2`: gradient in `diag(d) W`.
    fn inner_gradient(&self, d: &[f64], w: &CMat) -> Result<(f64, CMat)> {
        let ev = evaluate_gh(&self.channel(d, w)?, self.cons, &self.grid, true)?;
        let e = ev.mmse.expect("requested");
        let s2: Vec<f64> = self.s.iter().zip(d).map(|(s, d)| s * s * d).collect();
        let g = real_diag(&s2) * w * e * Complex64::new(LOG2_E / self.noise_var, 0.0);
        Ok((ev.bits, g))
    }
}

/// Re-scale `d` onto the sphere `||d||^2 = budget`, signs folded into `W`.
fn project_power(d: &mut [f64], budget: f64) {
    for x in d.iter_mut() {
        *x = x.abs();
    }
    let norm_sq: f64 = d.iter().map(|x| x * x).sum();
    if norm_sq > 0.0 {
        let scale = (budget / norm_sq).sqrt();
        for x in d.iter_mut() {
            *x *= scale;
        }
    }
}

fn skew(m: &CMat) -> CMat {
    (m - m.adjoint()) * Complex64::new(0.5, 0.0)
}

fn inner(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

struct Ascent {
    d: Vec<f64>,
    w: CMat,
    trace: Vec<TraceRow>,
    converged: bool,
}

impl Ascent {
    fn bits(&self) -> f64 {
        self.trace.last().map_or(0.0, |r| r.objective_bits)
    }
}

/// Armijo search from `t0`: halve until `f(t) - f >= slope * ascent(t)`.
/// When `t0` itself is accepted, keep doubling while the condition holds and
/// the objective still rises. `eval` returns `None` for a non-ascent trial.
fn line_search<T>(
    t0: f64,
    f: f64,
    opts: &OptimizerOptions,
    mut eval: impl FnMut(f64) -> Result<Option<(T, f64, f64)>>,
) -> Result<Option<(T, f64, f64)>> {
    let accepts = |trial: &Option<(T, f64, f64)>| matches!(trial, Some((_, fc, a)) if fc - f >= opts.slope * a);
    let mut t = t0;
    for k in 0..=opts.max_halvings {
        let trial = eval(t)?;
        if accepts(&trial) {
            let (mut best, mut best_f) = trial.map(|(c, fc, _)| (c, fc)).expect("accepted");
            if k == 0 {
                for _ in 0..MAX_EXPANSIONS {
                    let longer = eval(2.0 * t)?;
                    match longer {
                        Some((c, fc, a)) if fc - f >= opts.slope * a && fc > best_f => {
                            best = c;
                            best_f = fc;
                            t *= 2.0;
                        }
                        _ => break,
                    }
                }
            }
            return Ok(Some((best, best_f, t)));
        }
        t *= opts.shrink;
    }
    Ok(None)
}

const MAX_EXPANSIONS: usize = 8;

/// Block-coordinate Armijo ascent on `S diag(d) W` from `(d0, w0)`.
fn ascend(
    problem: &DiagonalProblem,
    d0: Vec<f64>,
    w0: CMat,
    budget: f64,
    opts: &OptimizerOptions,
) -> Result<Ascent> {
    let n = problem.s.len();
    let mut d = d0;
    let mut w = w0;
    let power_err = |d: &[f64]| (d.iter().map(|x| x * x).sum::<f64>() - budget).abs();
    let unit_err = |w: &CMat| max_abs_diff(&(w.adjoint() * w), &CMat::identity(n, n));
    let mut f = problem.objective(&d, &w)?;
    let mut trace = vec![TraceRow {
        iteration: 0,
        objective_bits: f,
        step_d: 0.0,
        step_w: 0.0,
        power_error: power_err(&d),
        unitarity_error: unit_err(&w),
    }];
    let mut converged = false;
    // each block starts its search from its last accepted step
    let (mut t_d, mut t_w) = (opts.initial_step, opts.initial_step);
    for it in 1..=opts.max_iters {
        let f_start = f;

        // power block: dI/dd_i = 2 Re[c S^2 diag(d) W E W^h]_ii
        let (_, g) = problem.inner_gradient(&d, &w)?;
        let gw = &g * w.adjoint();
        let grad_d: Vec<f64> = (0..n).map(|i| 2.0 * gw[(i, i)].re).collect();
        let found = line_search(t_d, f, opts, |t| {
            let mut cand: Vec<f64> = d.iter().zip(&grad_d).map(|(x, gx)| x + t * gx).collect();
            project_power(&mut cand, budget);
            let ascent: f64 = grad_d
                .iter()
                .zip(cand.iter().zip(&d))
                .map(|(gx, (c, x))| gx * (c - x))
                .sum();
            if ascent <= 0.0 {
                return Ok(None);
            }
            let fc = problem.objective(&cand, &w)?;
            Ok(Some((cand, fc, ascent)))
        })?;
        let step_d = match found {
            Some((cand, fc, t)) => {
                d = cand;
                f = fc;
                t_d = t;
                t
            }
            None => {
                t_d = opts.initial_step;
                0.0
            }
        };

        // rotation block: Riemannian ascent direction W skew(W^h dI/dW*)
        let (_, g) = problem.inner_gradient(&d, &w)?;
        let s_d = real_diag(&d);
        let euclid = &s_d * g;
        let direction = &w * skew(&(w.adjoint() * &euclid));
        let found = if frobenius_sq(&direction) > 0.0 {
            line_search(t_w, f, opts, |t| {
                let cand = polar_unitary(&(&w + &direction * Complex64::new(t, 0.0)))?;
                let ascent = 2.0 * inner(&euclid, &(&cand - &w));
                if ascent <= 0.0 {
                    return Ok(None);
                }
                let fc = problem.objective(&d, &cand)?;
                Ok(Some((cand, fc, ascent)))
            })?
        } else {
            None
        };
        let step_w = match found {
            Some((cand, fc, t)) => {
                w = cand;
                f = fc;
                t_w = t;
                t
            }
            None => {
                t_w = opts.initial_step;
                0.0
            }
        };

        trace.push(TraceRow {
            iteration: it,
            objective_bits: f,
            step_d,
            step_w,
            power_error: power_err(&d),
            unitarity_error: unit_err(&w),
        });
        if step_d == 0.0 && step_w == 0.0 {
            converged = true;
            break;
        }
        if f - f_start <= opts.rel_tol * f_start.abs().max(1e-12) {
            converged = true;
            break;
        }
    }
    Ok(Ascent {
        d,
        w,
        trace,
        converged,
    })
}

/// Fixed, seed-derived unitary with no structure the objective could be
/// symmetric under.
pub fn generic_unitary(n: usize) -> CMat {
    let mut rng = substream(GENERIC_SEED, &[n as u64]);
    let mut draw = || rng.sample::<f64, _>(StandardNormal);
    let m = CMat::from_fn(n, n, |_, _| Complex64::new(draw(), draw()));
    polar_unitary(&m).expect("square")
}

const GENERIC_SEED: u64 = 0x5eed_0f_4a11;

/// `W = I` is a stationary point of the rotation block (independent streams
/// give a diagonal MMSE matrix); so are symmetric mixers such as the DFT at
/// equal power. A second ascent therefore starts from [`generic_unitary`].
/// The better end point wins; ties keep `W = I`.
fn optimize_diagonal(
    problem: &DiagonalProblem,
    d0: Vec<f64>,
    budget: f64,
    opts: &OptimizerOptions,
) -> Result<Ascent> {
    let n = problem.s.len();
    let plain = ascend(problem, d0.clone(), CMat::identity(n, n), budget, opts)?;
    if n < 2 {
        return Ok(plain);
    }
    let mixed = ascend(problem, d0, generic_unitary(n), budget, opts)?;
    Ok(if mixed.bits() > plain.bits() {
        mixed
    } else {
        plain
    })
}

fn check_grid(grid: &QuadratureGrid, h_dl: &CMat) -> Result<()> {
    if grid.complex_dims() != h_dl.nrows() {
        return Err(Error::Dimension(format!(
            "quadrature grid covers {} receive dimensions, channel has {}",
            grid.complex_dims(),
            h_dl.nrows()
        )));
    }
    Ok(())
}

/// Maximize `I(x; H P x + n)` subject to `tr(P P^h) = budget`.
pub fn optimize_precoder(
    h_dl: &CMat,
    cons: &Constellation,
    grid: &QuadratureGrid,
    budget: f64,
    noise_var: f64,
    opts: &OptimizerOptions,
) -> Result<OptimizeOutcome> {
    check_grid(grid, h_dl)?;
    let init = svd_parametrize(h_dl, budget)?;
    check_guard(cons.order(), rank_of(&init.singular), opts.allow_override)?;
    let problem = DiagonalProblem {
        s: &init.singular,
        noise_var,
        cons,
        grid: grid.with_dims(init.streams()),
    };
    let best = optimize_diagonal(&problem, init.d.clone(), budget, opts)?;
    let mi_bits = best.bits();
    let iterations = best.trace.len() - 1;
    Ok(OptimizeOutcome {
        param: PrecoderParam {
            d: best.d,
            w: best.w,
            ..init
        },
        trace: best.trace,
        mi_bits,
        iterations,
        converged: best.converged,
    })
}

/// Stream-to-subgroup assignment for per-group processing.
#[derive(Debug, Clone, Serialize)]
pub struct PgpPlan {
    pub n_p: usize,
    /// Stream indices (descending singular value) per subgroup; `None` marks a
    /// fictitious zero-gain input.
    pub subgroups: Vec<Vec<Option<usize>>>,
    pub fictitious: usize,
    pub budgets: Vec<f64>,
}

/// How singular-value-ordered streams are dealt into PGP subgroups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PgpPairing {
    /// Consecutive chunks: `{s1, s2}, {s3, s4}, ...`.
    #[default]
    Chunked,
    /// Snake order, strongest with weakest: `{s1, s4}, {s2, s3}` for four
    /// streams in pairs. Lets a subgroup carry a null direction's symbol on
    /// its active one.
    Folded,
}

fn subgroup_members(n: usize, n_p: usize, pairing: PgpPairing) -> Vec<Vec<Option<usize>>> {
    let groups = n.div_ceil(n_p);
    match pairing {
        PgpPairing::Chunked => (0..groups)
            .map(|b| {
                (0..n_p)
                    .map(|i| b * n_p + i)
                    .map(|i| (i < n).then_some(i))
                    .collect()
            })
            .collect(),
        PgpPairing::Folded => {
            let mut out = vec![Vec::with_capacity(n_p); groups];
            for i in 0..n {
                let (round, pos) = (i / groups, i % groups);
                let b = if round % 2 == 0 {
                    pos
                } else {
                    groups - 1 - pos
                };
                out[b].push(Some(i));
            }
            for m in &mut out {
                m.resize(n_p, None);
            }
            out
        }
    }
}

/// Chunk the singular-value-ordered streams into subgroups of `n_p`, padding
/// the last one with fictitious inputs. Each subgroup's budget is proportional
/// to its count of active streams (singular value above `SV_EPS * s_max`), so
/// null directions get no power. The returned channels are `diag(s_i)` blocks.
pub fn pgp_partition(
    param: &PrecoderParam,
    n_p: usize,
    noise_var: f64,
) -> Result<(PgpPlan, Vec<EffectiveChannel>)> {
    pgp_partition_with(param, n_p, PgpPairing::Chunked, noise_var)
}

pub fn pgp_partition_with(
    param: &PrecoderParam,
    n_p: usize,
    pairing: PgpPairing,
    noise_var: f64,
) -> Result<(PgpPlan, Vec<EffectiveChannel>)> {
    if n_p == 0 {
        return Err(Error::InvalidArgument(
            "PGP subgroup size must be at least 1".into(),
        ));
    }
    let n = param.streams();
    let rank = rank_of(&param.singular);
    if rank == 0 {
        return Err(Error::RankZero);
    }
    let subgroups = subgroup_members(n, n_p, pairing);
    let mut channels = Vec::with_capacity(subgroups.len());
    let mut budgets = Vec::with_capacity(subgroups.len());
    for members in &subgroups {
        let s: Vec<f64> = members
            .iter()
            .map(|m| m.map_or(0.0, |i| param.singular[i]))
            .collect();
        let active = members.iter().flatten().filter(|&&i| i < rank).count();
        channels.push(EffectiveChannel::new(real_diag(&s), noise_var)?);
        budgets.push(param.budget * active as f64 / rank as f64);
    }
    let fictitious = subgroups.len() * n_p - n;
    Ok((
        PgpPlan {
            n_p,
            subgroups,
            fictitious,
            budgets,
        },
        channels,
    ))
}

#[derive(Debug, Clone)]
pub struct PgpOutcome {
    pub plan: PgpPlan,
    /// Composite `|S| x N_s` precoder (fictitious inputs removed).
    pub precoder: CMat,
    pub subgroup_bits: Vec<f64>,
    /// Sum over subgroups; exact because the blocks decouple after `U^h`.
    pub mi_bits: f64,
    pub iterations: Vec<usize>,
    pub traces: Vec<Vec<TraceRow>>,
}

/// Optimize every PGP subgroup independently.
pub fn optimize_pgp(
    h_dl: &CMat,
    cons: &Constellation,
    per_axis: usize,
    budget: f64,
    noise_var: f64,
    n_p: usize,
    opts: &OptimizerOptions,
) -> Result<PgpOutcome> {
    optimize_pgp_with(
        h_dl,
        cons,
        per_axis,
        budget,
        noise_var,
        n_p,
        PgpPairing::Chunked,
        opts,
    )
}

#[allow(clippy::too_many_arguments)]
pub fn optimize_pgp_with(
    h_dl: &CMat,
    cons: &Constellation,
    per_axis: usize,
    budget: f64,
    noise_var: f64,
    n_p: usize,
    pairing: PgpPairing,
    opts: &OptimizerOptions,
) -> Result<PgpOutcome> {
    let param = svd_parametrize(h_dl, budget)?;
    check_guard(cons.order(), n_p.min(param.streams()), opts.allow_override)?;
    let (plan, channels) = pgp_partition_with(&param, n_p, pairing, noise_var)?;
    let n = param.streams();
    let mut w_full = CMat::zeros(n, n);
    let mut subgroup_bits = Vec::new();
    let mut iterations = Vec::new();
    let mut traces = Vec::new();
    for ((members, ch), &b_budget) in plan.subgroups.iter().zip(&channels).zip(&plan.budgets) {
        // fictitious slots carry no symbol, so the problem spans real members only
        let real: Vec<(usize, usize)> = members
            .iter()
            .enumerate()
            .filter_map(|(a, m)| m.map(|i| (a, i)))
            .collect();
        let k = real.len();
        let s: Vec<f64> = real.iter().map(|&(a, _)| ch.g[(a, a)].re).collect();
        let (d, w, trace) = if k == 0 || rank_of(&s) == 0 || b_budget == 0.0 {
            (vec![0.0; k], CMat::identity(k, k), vec![])
        } else {
            let problem = DiagonalProblem {
                s: &s,
                noise_var,
                cons,
                grid: QuadratureGrid::new(per_axis, k)?,
            };
            let d0 = uniform_power(rank_of(&s), k, b_budget);
            let best = optimize_diagonal(&problem, d0, b_budget, opts)?;
            (best.d, best.w, best.trace)
        };
        subgroup_bits.push(trace.last().map_or(0.0, |r| r.objective_bits));
        iterations.push(trace.len().saturating_sub(1));
        for (a, &(_, ia)) in real.iter().enumerate() {
            for (b, &(_, ib)) in real.iter().enumerate() {
                w_full[(ia, ib)] = w[(a, b)] * d[a];
            }
        }
        traces.push(trace);
    }
    // columns of the block precoder: V diag(d_b) W_b per subgroup, fictitious removed
    let precoder = &param.v * &w_full;
    let mi_bits = subgroup_bits.iter().sum();
    Ok(PgpOutcome {
        plan,
        precoder,
        subgroup_bits,
        mi_bits,
        iterations,
        traces,
    })
}

/// Scaled identity on the first `min(N_d, |S|)` inputs.
pub fn baseline_no_precoding(h_dl: &CMat, budget: f64) -> CMat {
    let n = h_dl.nrows().min(h_dl.ncols());
    let scale = (budget / n as f64).sqrt();
    CMat::from_fn(h_dl.ncols(), n, |r, c| {
        if r == c {
            Complex64::new(scale, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// `V diag(uniform)` over all `min(N_d, |S|)` directions.
pub fn baseline_plain_beamforming(h_dl: &CMat, budget: f64) -> Result<PrecoderParam> {
    let mut p = svd_parametrize(h_dl, budget)?;
    let n = p.streams();
    p.d = uniform_power(n, n, budget);
    Ok(p)
}

/// Uniform power restricted to directions with singular value above
/// `SV_EPS * s_max`.
pub fn baseline_svapb(h_dl: &CMat, budget: f64) -> Result<PrecoderParam> {
    svd_parametrize(h_dl, budget)
}

/// MI of a parametrized precoder with `W = I`: a sum of scalar stream MIs.
pub fn diagonal_mi(
    param: &PrecoderParam,
    cons: &Constellation,
    per_axis: usize,
    noise_var: f64,
) -> Result<f64> {
    let grid = QuadratureGrid::new(per_axis, 1)?;
    let mut bits = 0.0;
    for (s, d) in param.singular.iter().zip(&param.d) {
        let ch = EffectiveChannel::new(
            CMat::from_element(1, 1, Complex64::new(s * d, 0.0)),
            noise_var,
        )?;
        bits += mutual_information_gh(&ch, cons, &grid)?;
    }
    Ok(bits)
}
