//! Scenario execution: channel synthesis, support detection, per-cell method
//! comparison and report artifacts.
//!
//! A cell is one (group, user, SNR) triple; under CFSDM every user is its own
//! unit on its assigned subcarrier, otherwise the whole group is detected
//! jointly. Cells run in parallel and are gathered in index order, so the CSV
//! depends only on the config and seed.

mod config;
pub mod plot;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

pub use config::{
    validate_config, GeometryConfig, GeometryKind, Method, OfdmConfig, OverlapPolicy, ScenarioRun,
};

use crate::channel::{synth_fs_channel, FsChannel};
use crate::error::{Error, Result};
use crate::jsdm::{resolve_overlap_release, shared_bins, snr_db_to_noise_var};
use crate::linalg::{select_columns, select_rows, singular_values, CMat};
use crate::mi::{
    check_guard, gh_cost, Constellation, EffectiveChannel, MiEstimator, QuadratureGrid,
};
use crate::ofdm::{cfsdm_assign, frequency_response, per_subcarrier_channels, CfsdmAssignment};
use crate::par::map_range;
use crate::precoder::{
    baseline_no_precoding, baseline_plain_beamforming, baseline_svapb, diagonal_mi,
    optimize_pgp_with, optimize_precoder, OptimizerOptions, SV_EPS,
};
use crate::rng::derive_seed;
use crate::vcm::{detect_support, power_fraction, project_vcm, DftBasis};

/// `SNR_b = SNR_s - 10 log10(log2 M)`.
pub fn snr_b_db(snr_s_db: f64, order: usize) -> f64 {
    snr_s_db - 10.0 * (order as f64).log2().log10()
}

/// One CSV line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub group: usize,
    pub user: Option<usize>,
    pub method: Method,
    pub snr_s_db: f64,
    pub snr_b_db: f64,
    pub mi_bits: f64,
    pub iters: usize,
    pub rho: f64,
    pub support_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellFailure {
    pub group: usize,
    pub user: Option<usize>,
    pub method: Method,
    pub snr_s_db: f64,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupSummary {
    pub group: usize,
    pub users: Vec<usize>,
    /// 1-based bins above threshold, before any release.
    pub detected_support: Vec<usize>,
    /// 1-based bins actually used.
    pub support: Vec<usize>,
    pub released: Vec<usize>,
    pub rho: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub name: String,
    pub seed: u64,
    pub constellation: usize,
    pub methods: Vec<Method>,
    pub snr_db: Vec<f64>,
    pub groups: Vec<GroupSummary>,
    /// True when no bin is used by two groups on the same resource.
    pub disjoint: bool,
    pub assignment: Option<CfsdmAssignment>,
    pub rows: Vec<ResultRow>,
    pub failures: Vec<CellFailure>,
    pub wall_seconds: f64,
}

impl RunReport {
    /// Cells requested by the config: units x methods x SNR points.
    pub fn expected_cells(&self) -> usize {
        let units: usize = if self.assignment.is_some() {
            self.groups.iter().map(|g| g.users.len()).sum()
        } else {
            self.groups.len()
        };
        units * self.methods.len() * self.snr_db.len()
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        if self.rows.is_empty() {
            w.write_record([
                "group",
                "user",
                "method",
                "snr_s_db",
                "snr_b_db",
                "mi_bits",
                "iters",
                "rho",
                "support_size",
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// One SVG per unit: MI against `SNR_b`, one series per method.
    pub fn plots(&self) -> Vec<(String, String)> {
        let mut units: Vec<(usize, Option<usize>)> =
            self.rows.iter().map(|r| (r.group, r.user)).collect();
        units.dedup();
        units
            .into_iter()
            .map(|(g, u)| {
                let series = self
                    .methods
                    .iter()
                    .map(|m| plot::Series {
                        label: m.to_string(),
                        points: self
                            .rows
                            .iter()
                            .filter(|r| r.group == g && r.user == u && r.method == *m)
                            .map(|r| (r.snr_b_db, r.mi_bits))
                            .collect(),
                    })
                    .filter(|s| !s.points.is_empty())
                    .collect::<Vec<_>>();
                let (file, title) = match u {
                    Some(k) => (
                        format!("group{g}_user{k}.svg"),
                        format!("group {g}, user {k}, {}-QAM", self.constellation),
                    ),
                    None => (
                        format!("group{g}.svg"),
                        format!("group {g}, {}-QAM", self.constellation),
                    ),
                };
                (
                    file,
                    plot::line_plot(&title, "SNR_b (dB)", "I(x;y) (bits/channel use)", &series),
                )
            })
            .collect()
    }

    /// `results.csv`, `report.json`, optional `cfsdm.json` and plots.
    pub fn write_artifacts(&self, dir: &Path, plots: bool) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let csv_path = dir.join("results.csv");
        self.write_csv(std::fs::File::create(&csv_path)?)?;
        written.push(csv_path);
        let json_path = dir.join("report.json");
        std::fs::write(&json_path, serde_json::to_string_pretty(self)?)?;
        written.push(json_path);
        if let Some(a) = &self.assignment {
            let p = dir.join("cfsdm.json");
            std::fs::write(&p, a.to_json()?)?;
            written.push(p);
        }
        if plots {
            for (name, svg) in self.plots() {
                let p = dir.join(name);
                std::fs::write(&p, svg)?;
                written.push(p);
            }
        }
        Ok(written)
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub plots: bool,
}

/// Load, validate, execute and write artifacts. Returns the report and the
/// output directory.
pub fn run_scenario(path: &Path, opts: &RunOptions) -> Result<(RunReport, PathBuf)> {
    let mut cfg = validate_config(path)?;
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    let report = execute(&cfg)?;
    let dir = opts
        .out_dir
        .clone()
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    report.write_artifacts(&dir, opts.plots)?;
    Ok((report, dir))
}

struct GroupChannel {
    fs: FsChannel,
    /// Frequency-pooled virtual power carrier, `sqrt(L) [F^h H_0 ... F^h H_{L-1}]`.
    pooled: CMat,
}

/// Evaluation unit: one group or one user with its virtual downlink.
struct Unit {
    gidx: usize,
    user: Option<usize>,
    downlink: CMat,
}

struct Ctx<'a> {
    cfg: &'a ScenarioRun,
    cons: Constellation,
    opts: OptimizerOptions,
}

/// Run a validated scenario without touching the filesystem.
pub fn execute(cfg: &ScenarioRun) -> Result<RunReport> {
    let start = Instant::now();
    cfg.validate()?;
    let geom = cfg.geometry.build().map_err(|e| Error::Config(vec![e]))?;
    let basis = DftBasis::for_geometry(&geom);
    let taps = cfg.ofdm.as_ref().map_or(1, |o| o.taps);

    let channels = map_range(cfg.groups.len(), |i| -> Result<GroupChannel> {
        let fs = synth_fs_channel(&cfg.groups[i], &geom, cfg.seed, taps)?;
        let projected = fs
            .taps
            .iter()
            .map(|t| project_vcm(t, &basis))
            .collect::<Result<Vec<_>>>()?;
        let cols = fs.taps[0].ncols();
        let scale = (taps as f64).sqrt();
        let pooled = CMat::from_fn(basis.order(), cols * taps, |r, c| {
            projected[c / cols][(r, c % cols)] * scale
        });
        Ok(GroupChannel { fs, pooled })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let detected = channels
        .iter()
        .zip(&cfg.groups)
        .map(|(ch, g)| detect_support(&ch.pooled, cfg.threshold, g.id))
        .collect::<Result<Vec<_>>>()?;
    let detected_sets: Vec<Vec<usize>> = detected.iter().map(|s| s.indices.clone()).collect();

    let cfsdm = cfg.cfsdm();
    let supports = if !cfsdm && cfg.overlap == OverlapPolicy::Release {
        resolve_overlap_release(&detected_sets).sets
    } else {
        detected_sets.clone()
    };
    let disjoint = cfsdm || shared_bins(&supports).is_empty();

    let ids: Vec<usize> = cfg.groups.iter().map(|g| g.id).collect();
    let assignment = match (&cfg.ofdm, cfsdm) {
        (Some(o), true) => {
            let users: Vec<usize> = cfg.groups.iter().map(|g| g.users.len()).collect();
            Some(cfsdm_assign(&ids, &supports, &users, o.subcarriers)?)
        }
        _ => None,
    };

    let rho: Vec<f64> = channels
        .iter()
        .zip(&supports)
        .map(|(c, s)| power_fraction(&c.pooled, s))
        .collect();
    let groups: Vec<GroupSummary> = cfg
        .groups
        .iter()
        .enumerate()
        .map(|(i, g)| GroupSummary {
            group: g.id,
            users: g.users.clone(),
            detected_support: detected_sets[i].iter().map(|p| p + 1).collect(),
            support: supports[i].iter().map(|p| p + 1).collect(),
            released: detected_sets[i]
                .iter()
                .filter(|p| !supports[i].contains(p))
                .map(|p| p + 1)
                .collect(),
            rho: rho[i],
        })
        .collect();

    let mut units = Vec::new();
    for (i, (ch, g)) in channels.iter().zip(&cfg.groups).enumerate() {
        let support = crate::vcm::SupportSet {
            group: g.id,
            indices: supports[i].clone(),
            captured: rho[i],
        };
        match (&cfg.ofdm, &assignment) {
            (Some(o), Some(a)) => {
                let per_q = per_subcarrier_channels(&ch.fs, &basis, &support, o.subcarriers)?;
                for k in 0..g.users.len() {
                    let q = a.subcarrier(g.id, k).expect("every user assigned");
                    units.push(Unit {
                        gidx: i,
                        user: Some(k),
                        downlink: per_q[q].user_downlink(k)?,
                    });
                }
            }
            _ => {
                // narrowband, or OFDM without CFSDM evaluated on subcarrier 0
                let virtual_taps: Vec<CMat> = ch
                    .fs
                    .taps
                    .iter()
                    .map(|t| Ok(select_rows(&project_vcm(t, &basis)?, &support.indices)))
                    .collect::<Result<_>>()?;
                let q_count = cfg.ofdm.as_ref().map_or(1, |o| o.subcarriers);
                let downlink = frequency_response(&virtual_taps, 0, q_count).adjoint();
                units.push(Unit {
                    gidx: i,
                    user: None,
                    downlink,
                });
            }
        }
    }

    let ctx = Ctx {
        cfg,
        cons: Constellation::qam(cfg.constellation)?,
        opts: OptimizerOptions {
            max_iters: cfg.max_iters,
            allow_override: cfg.guard_override,
            ..Default::default()
        },
    };
    let n_snr = cfg.snr_db.len();
    let cells = map_range(units.len() * n_snr, |c| {
        let unit = &units[c / n_snr];
        let s = c % n_snr;
        cfg.methods
            .iter()
            .map(|&m| evaluate_cell(&ctx, unit, m, s))
            .collect::<Vec<_>>()
    });

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (u, unit) in units.iter().enumerate() {
        for (mi, &method) in cfg.methods.iter().enumerate() {
            for (s, &snr) in cfg.snr_db.iter().enumerate() {
                let group = cfg.groups[unit.gidx].id;
                match &cells[u * n_snr + s][mi] {
                    Ok((bits, iters)) => rows.push(ResultRow {
                        group,
                        user: unit.user,
                        method,
                        snr_s_db: snr,
                        snr_b_db: snr_b_db(snr, cfg.constellation),
                        mi_bits: *bits,
                        iters: *iters,
                        rho: rho[unit.gidx],
                        support_size: supports[unit.gidx].len(),
                    }),
                    Err(reason) => failures.push(CellFailure {
                        group,
                        user: unit.user,
                        method,
                        snr_s_db: snr,
                        reason: reason.clone(),
                    }),
                }
            }
        }
    }

    Ok(RunReport {
        name: cfg.name.clone(),
        seed: cfg.seed,
        constellation: cfg.constellation,
        methods: cfg.methods.clone(),
        snr_db: cfg.snr_db.clone(),
        groups,
        disjoint,
        assignment,
        rows,
        failures,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

fn method_tag(m: Method) -> u64 {
    match m {
        Method::Optimized => 1,
        Method::Pgp(n) => 0x100 + n as u64,
        Method::Plain => 2,
        Method::Svapb => 3,
        Method::None => 4,
    }
}

fn evaluate_cell(
    ctx: &Ctx,
    unit: &Unit,
    method: Method,
    s: usize,
) -> std::result::Result<(f64, usize), String> {
    let cfg = ctx.cfg;
    let h = &unit.downlink;
    if h.ncols() == 0 {
        return Err(
            "empty support: every bin of this group was released or fell below threshold".into(),
        );
    }
    let noise_var = snr_db_to_noise_var(cfg.snr_db[s]);
    let budget = h.nrows() as f64;
    let group = cfg.groups[unit.gidx].id as u64;
    let user = unit.user.map_or(0, |k| k as u64 + 1);
    let estimator = MiEstimator {
        per_axis: cfg.evaluation_nodes,
        mc_samples: cfg.mc_samples,
        seed: derive_seed(cfg.seed, &[group, user, s as u64, method_tag(method)]),
        ..Default::default()
    };
    let estimate = |g: CMat| -> Result<f64> {
        let ch = EffectiveChannel::new(g, noise_var)?;
        Ok(estimator.estimate(&ch, &ctx.cons)?.bits)
    };
    let order = cfg.constellation;
    let cost_check = |streams: usize| -> Result<()> {
        let cost = gh_cost(order, streams, streams, cfg.quadrature_nodes);
        if cost > cfg.max_quadrature_cost {
            return Err(Error::Guard(format!(
                "quadrature cost {cost:.3e} for {streams} streams exceeds max_quadrature_cost = {:.3e}",
                cfg.max_quadrature_cost
            )));
        }
        Ok(())
    };
    let run = || -> Result<(f64, usize)> {
        match method {
            Method::None => {
                let p = baseline_no_precoding(h, budget);
                check_guard(order, p.ncols(), cfg.guard_override)?;
                Ok((estimate(h * p)?, 0))
            }
            Method::Plain => {
                let param = baseline_plain_beamforming(h, budget)?;
                Ok((
                    diagonal_mi(&param, &ctx.cons, cfg.evaluation_nodes, noise_var)?,
                    0,
                ))
            }
            Method::Svapb => {
                let param = baseline_svapb(h, budget)?;
                Ok((
                    diagonal_mi(&param, &ctx.cons, cfg.evaluation_nodes, noise_var)?,
                    0,
                ))
            }
            Method::Optimized => {
                let sv = singular_values(h);
                let smax = sv.first().copied().unwrap_or(0.0);
                let rank = sv
                    .iter()
                    .filter(|&&v| smax > 0.0 && v > SV_EPS * smax)
                    .count();
                check_guard(order, rank, cfg.guard_override)?;
                cost_check(rank)?;
                let grid = QuadratureGrid::new(cfg.quadrature_nodes, h.nrows())?;
                let out = optimize_precoder(h, &ctx.cons, &grid, budget, noise_var, &ctx.opts)?;
                let bits = if cfg.evaluation_nodes == cfg.quadrature_nodes {
                    out.mi_bits
                } else {
                    estimate(h * out.param.precoder())?
                };
                Ok((bits, out.iterations))
            }
            Method::Pgp(n_p) => {
                cost_check(n_p)?;
                let out = optimize_pgp_with(
                    h,
                    &ctx.cons,
                    cfg.quadrature_nodes,
                    budget,
                    noise_var,
                    n_p,
                    cfg.pgp_pairing,
                    &ctx.opts,
                )?;
                let bits = if cfg.evaluation_nodes == cfg.quadrature_nodes {
                    out.mi_bits
                } else {
                    // subgroups occupy orthogonal left singular directions, so MI adds up
                    let mut total = 0.0;
                    for members in &out.plan.subgroups {
                        let cols: Vec<usize> = members.iter().flatten().copied().collect();
                        let p = select_columns(&out.precoder, &cols);
                        if p.iter().any(|z| z.norm_sqr() > 0.0) {
                            total += estimate(h * p)?;
                        }
                    }
                    total
                };
                Ok((bits, out.iterations.iter().copied().max().unwrap_or(0)))
            }
        }
    };
    run().map_err(|e| e.to_string())
}
