//! Browser bindings. Each export returns a JSON string; the plain Rust
//! functions underneath are what the native tests exercise.

use num_complex::Complex64;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use vcm_core::channel::{synth_group_channel, ArrayGeometry, GroupScenario};
use vcm_core::linalg::CMat;
use vcm_core::mi::{mutual_information_gh, Constellation, EffectiveChannel, QuadratureGrid};
use vcm_core::precoder::{baseline_svapb, diagonal_mi, optimize_precoder, OptimizerOptions};
use vcm_core::vcm::{detect_support, project_vcm, row_power, DftBasis};

#[derive(Debug, Clone, Serialize)]
pub struct Spectrum {
    /// Pooled beam power per virtual beam.
    pub power: Vec<f64>,
    /// 1-based beams above threshold.
    pub support: Vec<usize>,
    pub rho: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SupportMap {
    pub outer: usize,
    pub inner: usize,
    /// Row-major `outer x inner` beam power.
    pub power: Vec<f64>,
    pub support: Vec<usize>,
    pub rho: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Curves {
    pub snr_db: Vec<f64>,
    pub none: Vec<f64>,
    pub svapb: Vec<f64>,
    pub optimized: Vec<f64>,
    pub iterations: Vec<usize>,
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

#[allow(clippy::too_many_arguments)]
pub fn ula_spectrum(
    elements: usize,
    spacing: f64,
    theta_deg: f64,
    spread_deg: f64,
    paths: usize,
    antennas: usize,
    threshold: f64,
    seed: u64,
) -> Result<Spectrum, String> {
    let geom = ArrayGeometry::ula(elements, spacing);
    geom.validate().map_err(err)?;
    let group = GroupScenario::ula(0, theta_deg, spread_deg, paths, vec![antennas]);
    let h = synth_group_channel(&group, &geom, seed).map_err(err)?;
    let ht = project_vcm(&h.matrix, &DftBasis::for_geometry(&geom)).map_err(err)?;
    let s = detect_support(&ht, threshold, 0).map_err(err)?;
    Ok(Spectrum {
        power: row_power(&ht),
        support: s.one_based(),
        rho: s.captured,
    })
}

#[allow(clippy::too_many_arguments)]
pub fn upa_support_map(
    n: usize,
    spacing: f64,
    theta_deg: f64,
    phi_deg: f64,
    spread_deg: f64,
    paths: usize,
    threshold: f64,
    seed: u64,
) -> Result<SupportMap, String> {
    let geom = ArrayGeometry::upa_xy(n, n, spacing);
    geom.validate().map_err(err)?;
    let group = GroupScenario {
        id: 0,
        theta_deg,
        theta_spread_deg: spread_deg,
        phi_deg,
        phi_spread_deg: spread_deg,
        paths,
        users: vec![2],
    };
    group.validate().map_err(err)?;
    let h = synth_group_channel(&group, &geom, seed).map_err(err)?;
    let ht = project_vcm(&h.matrix, &DftBasis::for_geometry(&geom)).map_err(err)?;
    let s = detect_support(&ht, threshold, 0).map_err(err)?;
    Ok(SupportMap {
        outer: n,
        inner: n,
        power: row_power(&ht),
        support: s.one_based(),
        rho: s.captured,
    })
}

/// `H = diag(s1, s2) R(angle)`: a 2x2 channel whose right singular vectors
/// are rotated away from the identity, so no precoding is not beamforming.
pub fn demo_channel(s1: f64, s2: f64, angle_deg: f64) -> CMat {
    let (sn, cs) = angle_deg.to_radians().sin_cos();
    let r = |a: f64| Complex64::new(a, 0.0);
    CMat::from_row_slice(2, 2, &[r(s1 * cs), r(-s1 * sn), r(s2 * sn), r(s2 * cs)])
}

pub fn mi_curves(
    s1: f64,
    s2: f64,
    angle_deg: f64,
    order: usize,
    snr_db: &[f64],
) -> Result<Curves, String> {
    let cons = Constellation::qam(order).map_err(err)?;
    let h = demo_channel(s1, s2, angle_deg);
    let budget = 2.0;
    let grid = QuadratureGrid::new(3, 2).map_err(err)?;
    let opts = OptimizerOptions::default();
    let mut out = Curves {
        snr_db: snr_db.to_vec(),
        none: vec![],
        svapb: vec![],
        optimized: vec![],
        iterations: vec![],
    };
    for &snr in snr_db {
        let nv = 10f64.powf(-snr / 10.0);
        let ch = EffectiveChannel::new(h.clone(), nv).map_err(err)?;
        out.none
            .push(mutual_information_gh(&ch, &cons, &grid).map_err(err)?);
        let sv = baseline_svapb(&h, budget).map_err(err)?;
        out.svapb.push(diagonal_mi(&sv, &cons, 3, nv).map_err(err)?);
        let opt = optimize_precoder(&h, &cons, &grid, budget, nv, &opts).map_err(err)?;
        out.optimized.push(opt.mi_bits);
        out.iterations.push(opt.iterations);
    }
    Ok(out)
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

/// Beam power of one ULA group as JSON `{power, support, rho}`.
#[wasm_bindgen(js_name = ulaSpectrum)]
#[allow(clippy::too_many_arguments)]
pub fn ula_spectrum_js(
    elements: usize,
    spacing: f64,
    theta_deg: f64,
    spread_deg: f64,
    paths: usize,
    antennas: usize,
    threshold: f64,
    seed: u32,
) -> Result<String, JsError> {
    to_js(ula_spectrum(
        elements,
        spacing,
        theta_deg,
        spread_deg,
        paths,
        antennas,
        threshold,
        seed as u64,
    ))
}

#[wasm_bindgen(js_name = upaSupportMap)]
#[allow(clippy::too_many_arguments)]
pub fn upa_support_map_js(
    n: usize,
    spacing: f64,
    theta_deg: f64,
    phi_deg: f64,
    spread_deg: f64,
    paths: usize,
    threshold: f64,
    seed: u32,
) -> Result<String, JsError> {
    to_js(upa_support_map(
        n,
        spacing,
        theta_deg,
        phi_deg,
        spread_deg,
        paths,
        threshold,
        seed as u64,
    ))
}

#[wasm_bindgen(js_name = miCurves)]
pub fn mi_curves_js(
    s1: f64,
    s2: f64,
    angle_deg: f64,
    order: usize,
    snr_db: Vec<f64>,
) -> Result<String, JsError> {
    to_js(mi_curves(s1, s2, angle_deg, order, &snr_db))
}
