//! Random multipath uplink channels for linear and planar base-station arrays.
//!
//! Each user antenna column is `(1/sqrt(L)) * sum_l beta_l * a(theta_l, phi_l)`
//! with unit-variance circular Gaussian gains and angles drawn uniformly inside
//! the group's angular cluster.
//!
//! Vectorization order of planar arrays: the inner (x) axis index runs fastest,
//! so element `(o, i)` sits at `o * n_inner + i`. This matches
//! `a_outer ⊗ a_x` and the Kronecker DFT basis in [`crate::vcm`].

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{cis, CMat, CVec};
use crate::rng::substream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrayKind {
    /// Linear array along z.
    UlaZ,
    /// Planar array in the z-x plane.
    UpaZx,
    /// Planar array in the x-y plane.
    UpaXy,
}

/// Antenna layout. For a ULA `inner == 1` and `outer` is the element count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub kind: ArrayKind,
    /// Elements along z (ULA, UPA z-x) or y (UPA x-y).
    pub outer: usize,
    /// Elements along x; 1 for a ULA.
    pub inner: usize,
    /// Element spacing in wavelengths, `d / lambda`.
    pub spacing: f64,
}

impl ArrayGeometry {
    pub fn ula(n: usize, spacing: f64) -> Self {
        Self {
            kind: ArrayKind::UlaZ,
            outer: n,
            inner: 1,
            spacing,
        }
    }

    pub fn upa_zx(n_z: usize, n_x: usize, spacing: f64) -> Self {
        Self {
            kind: ArrayKind::UpaZx,
            outer: n_z,
            inner: n_x,
            spacing,
        }
    }

    pub fn upa_xy(n_y: usize, n_x: usize, spacing: f64) -> Self {
        Self {
            kind: ArrayKind::UpaXy,
            outer: n_y,
            inner: n_x,
            spacing,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.outer == 0 || self.inner == 0 {
            return Err(Error::InvalidArgument(
                "array element counts must be positive".into(),
            ));
        }
        if self.kind == ArrayKind::UlaZ && self.inner != 1 {
            return Err(Error::InvalidArgument(
                "a ULA has a single inner element".into(),
            ));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "element spacing must be positive, got {}",
                self.spacing
            )));
        }
        Ok(())
    }

    pub fn elements(&self) -> usize {
        self.outer * self.inner
    }

    pub fn is_planar(&self) -> bool {
        self.kind != ArrayKind::UlaZ
    }

    /// Direction cosines seen by the outer and inner axes.
    pub fn axis_cosines(&self, theta: f64, phi: f64) -> (f64, f64) {
        match self.kind {
            ArrayKind::UlaZ => (theta.cos(), 0.0),
            ArrayKind::UpaZx => (theta.cos(), theta.sin() * phi.cos()),
            ArrayKind::UpaXy => (theta.sin() * phi.sin(), theta.sin() * phi.cos()),
        }
    }

    /// Array response for any geometry kind.
    pub fn steering(&self, theta: f64, phi: f64) -> CVec {
        let (c_outer, c_inner) = self.axis_cosines(theta, phi);
        let outer = axis_response(c_outer, self.outer, self.spacing);
        if self.inner == 1 {
            return outer;
        }
        outer.kronecker(&axis_response(c_inner, self.inner, self.spacing))
    }
}

/// `[1, e^{-j 2 pi D c}, ..., e^{-j 2 pi D (n-1) c}]`.
pub fn axis_response(direction_cosine: f64, n: usize, spacing: f64) -> CVec {
    CVec::from_iterator(
        n,
        (0..n).map(|m| cis(-2.0 * PI * spacing * m as f64 * direction_cosine)),
    )
}

/// ULA response along z at elevation `theta` (radians).
pub fn steering_ula(theta: f64, n: usize, spacing: f64) -> CVec {
    axis_response(theta.cos(), n, spacing)
}

/// Planar-array response; `a_z ⊗ a_x` for z-x arrays and `a_y ⊗ a_x` for x-y arrays.
pub fn steering_upa(theta: f64, phi: f64, geometry: &ArrayGeometry) -> Result<CVec> {
    if !geometry.is_planar() {
        return Err(Error::Precondition(
            "steering_upa needs a planar array geometry".into(),
        ));
    }
    Ok(geometry.steering(theta, phi))
}

/// One user group's angular cluster and antenna population. Angles in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupScenario {
    pub id: usize,
    pub theta_deg: f64,
    pub theta_spread_deg: f64,
    #[serde(default)]
    pub phi_deg: f64,
    #[serde(default)]
    pub phi_spread_deg: f64,
    pub paths: usize,
    /// Antenna count of each user.
    pub users: Vec<usize>,
}

impl GroupScenario {
    pub fn ula(
        id: usize,
        theta_deg: f64,
        spread_deg: f64,
        paths: usize,
        users: Vec<usize>,
    ) -> Self {
        Self {
            id,
            theta_deg,
            theta_spread_deg: spread_deg,
            phi_deg: 0.0,
            phi_spread_deg: 0.0,
            paths,
            users,
        }
    }

    pub fn antennas(&self) -> usize {
        self.users.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        let lo = self.theta_deg - self.theta_spread_deg;
        let hi = self.theta_deg + self.theta_spread_deg;
        if self.theta_spread_deg < 0.0 || self.phi_spread_deg < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "group {}: negative angular spread",
                self.id
            )));
        }
        if lo < 0.0 || hi > 180.0 {
            return Err(Error::InvalidArgument(format!(
                "group {}: elevation cluster [{lo}, {hi}] leaves [0, 180] degrees",
                self.id
            )));
        }
        if self.paths == 0 {
            return Err(Error::InvalidArgument(format!(
                "group {}: needs at least one path",
                self.id
            )));
        }
        if self.users.is_empty() || self.users.contains(&0) || self.antennas() == 0 {
            return Err(Error::InvalidArgument(format!(
                "group {}: every user needs at least one antenna",
                self.id
            )));
        }
        Ok(())
    }
}

/// Test hooks for channel synthesis.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SynthOptions {
    /// Force every path gain to 1.
    pub unit_gains: bool,
    /// Draw the path angles once per group and reuse them for every antenna.
    /// The group channel then has rank at most `paths * taps`.
    pub shared_angles: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathDraw {
    pub gain: num_complex::Complex64,
    pub theta: f64,
    pub phi: f64,
}

/// Per-column path draws: `paths[tap][path]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRealization {
    pub user: usize,
    pub antenna: usize,
    pub paths: Vec<Vec<PathDraw>>,
}

/// Uplink channel of one group: `N_u x N_{d,g}`, columns ordered user-major.
#[derive(Debug, Clone, PartialEq)]
pub struct UplinkChannel {
    pub matrix: CMat,
    pub users: Vec<usize>,
}

impl UplinkChannel {
    /// Column range owned by user `k`.
    pub fn user_columns(&self, k: usize) -> std::ops::Range<usize> {
        let start: usize = self.users[..k].iter().sum();
        start..start + self.users[k]
    }
}

/// Tap-delay-line channel: tap `l` is the uplink matrix at delay `l / B`.
#[derive(Debug, Clone, PartialEq)]
pub struct FsChannel {
    pub taps: Vec<CMat>,
    pub users: Vec<usize>,
}

const GAIN_STREAM: u64 = 0x6761_696e;
const SHARED_STREAM: u64 = 0x7368_6172;

fn uniform_in(rng: &mut ChaCha8Rng, center_deg: f64, spread_deg: f64) -> f64 {
    let u: f64 = rng.random();
    (center_deg + spread_deg * (2.0 * u - 1.0)).to_radians()
}

fn draw_angles(rng: &mut ChaCha8Rng, scenario: &GroupScenario) -> (f64, f64) {
    let theta = uniform_in(rng, scenario.theta_deg, scenario.theta_spread_deg);
    let phi = uniform_in(rng, scenario.phi_deg, scenario.phi_spread_deg);
    (theta, phi)
}

fn draw_gain(rng: &mut ChaCha8Rng) -> num_complex::Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    num_complex::Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Draw angles and gains for every column of a group.
///
/// Each (group, user, antenna) triple owns its own substream, so a group's
/// channel does not depend on which other groups exist.
pub fn draw_paths(
    scenario: &GroupScenario,
    seed: u64,
    taps: usize,
    opts: SynthOptions,
) -> Vec<PathRealization> {
    let shared: Option<Vec<Vec<(f64, f64)>>> = opts.shared_angles.then(|| {
        let mut rng = substream(seed, &[scenario.id as u64, SHARED_STREAM]);
        (0..taps)
            .map(|_| {
                (0..scenario.paths)
                    .map(|_| draw_angles(&mut rng, scenario))
                    .collect()
            })
            .collect()
    });

    let mut out = Vec::with_capacity(scenario.antennas());
    for (user, &n_ant) in scenario.users.iter().enumerate() {
        for antenna in 0..n_ant {
            let mut rng = substream(
                seed,
                &[scenario.id as u64, GAIN_STREAM, user as u64, antenna as u64],
            );
            let paths = (0..taps)
                .map(|tap| {
                    (0..scenario.paths)
                        .map(|p| {
                            let (theta, phi) = draw_angles(&mut rng, scenario);
                            let (theta, phi) = match &shared {
                                Some(s) => s[tap][p],
                                None => (theta, phi),
                            };
                            let gain = draw_gain(&mut rng);
                            let gain = if opts.unit_gains {
                                crate::linalg::ONE
                            } else {
                                gain
                            };
                            PathDraw { gain, theta, phi }
                        })
                        .collect()
                })
                .collect();
            out.push(PathRealization {
                user,
                antenna,
                paths,
            });
        }
    }
    out
}

fn tap_matrices(
    scenario: &GroupScenario,
    geometry: &ArrayGeometry,
    seed: u64,
    taps: usize,
    opts: SynthOptions,
) -> Result<Vec<CMat>> {
    geometry.validate()?;
    scenario.validate()?;
    if taps == 0 {
        return Err(Error::InvalidArgument("need at least one tap".into()));
    }
    let n = geometry.elements();
    let realizations = draw_paths(scenario, seed, taps, opts);
    let norm = 1.0 / ((scenario.paths * taps) as f64).sqrt();
    let mut out = vec![CMat::zeros(n, realizations.len()); taps];
    for (col, real) in realizations.iter().enumerate() {
        for (tap, paths) in real.paths.iter().enumerate() {
            let mut acc = CVec::zeros(n);
            for p in paths {
                acc += geometry.steering(p.theta, p.phi) * p.gain;
            }
            out[tap].set_column(col, &(acc * num_complex::Complex64::new(norm, 0.0)));
        }
    }
    Ok(out)
}

pub fn synth_group_channel(
    scenario: &GroupScenario,
    geometry: &ArrayGeometry,
    seed: u64,
) -> Result<UplinkChannel> {
    synth_group_channel_with(scenario, geometry, seed, SynthOptions::default())
}

pub fn synth_group_channel_with(
    scenario: &GroupScenario,
    geometry: &ArrayGeometry,
    seed: u64,
    opts: SynthOptions,
) -> Result<UplinkChannel> {
    let mut taps = tap_matrices(scenario, geometry, seed, 1, opts)?;
    Ok(UplinkChannel {
        matrix: taps.remove(0),
        users: scenario.users.clone(),
    })
}

/// Frequency-selective channel with `taps` delay taps, each carrying
/// `scenario.paths` clustered paths. Power is split evenly over all
/// `paths * taps` components, so the expected column energy stays `N_u`.
/// With `taps == 1` this is exactly [`synth_group_channel`].
pub fn synth_fs_channel(
    scenario: &GroupScenario,
    geometry: &ArrayGeometry,
    seed: u64,
    taps: usize,
) -> Result<FsChannel> {
    synth_fs_channel_with(scenario, geometry, seed, taps, SynthOptions::default())
}

pub fn synth_fs_channel_with(
    scenario: &GroupScenario,
    geometry: &ArrayGeometry,
    seed: u64,
    taps: usize,
    opts: SynthOptions,
) -> Result<FsChannel> {
    Ok(FsChannel {
        taps: tap_matrices(scenario, geometry, seed, taps, opts)?,
        users: scenario.users.clone(),
    })
}
