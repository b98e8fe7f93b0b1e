//! Monte Carlo BER engine, scenario presets, config parsing, and result
//! emission.
//!
//! Everything is reproducible: a master seed plus the scenario identifier
//! and SNR index derive one seed per measured point, and each frame gets an
//! independent ChaCha stream derived from the point seed, so results are
//! bit-identical for a fixed seed regardless of worker count.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{ber_union_bound, BoundConfig};
use crate::channel::{channel_stats, sample_channel, standard_complex_gaussian, ChannelParams, Geometry};
use crate::codebook::{build_no_alamouti_codebook, enumerate_codebook, Codebook, CodebookConfig};
use crate::error::{Error, Result};
use crate::link::{ebn0_to_n0, FastCodebook};

/// Transmission scheme simulated for one curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Differential scheme with Alamouti subblocks and position index
    /// modulation.
    DsmPa,
    /// Same rate and index modulation, diagonal subblocks.
    DsmPaNoAlamouti,
    /// Non-differential transmission of the same codebook with perfect CSI.
    CoherentSmPa,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::DsmPa => "dsm_pa",
            Scheme::DsmPaNoAlamouti => "dsm_pa_no_alamouti",
            Scheme::CoherentSmPa => "coherent_sm_pa",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "dsm_pa" => Ok(Scheme::DsmPa),
            "dsm_pa_no_alamouti" => Ok(Scheme::DsmPaNoAlamouti),
            "coherent_sm_pa" => Ok(Scheme::CoherentSmPa),
            other => Err(Error::Config(format!("unknown scheme \"{other}\""))),
        }
    }

    fn is_differential(&self) -> bool {
        !matches!(self, Scheme::CoherentSmPa)
    }
}

/// Inclusive SNR grid in dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrGrid {
    pub min_db: f64,
    pub max_db: f64,
    pub step_db: f64,
}

impl SnrGrid {
    pub fn new(min_db: f64, max_db: f64, step_db: f64) -> Self {
        Self { min_db, max_db, step_db }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_db > 0.0) || !(self.max_db >= self.min_db) {
            return Err(Error::Config(format!(
                "SNR grid must increase: min {} max {} step {}",
                self.min_db, self.max_db, self.step_db
            )));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        let n = ((self.max_db - self.min_db) / self.step_db).round() as usize;
        (0..=n)
            .map(|k| self.min_db + k as f64 * self.step_db)
            .filter(|&v| v <= self.max_db + 1e-9)
            .collect()
    }
}

/// Full description of one simulated curve.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// Identifier written to the output rows (e.g. `fig5-close`).
    pub id: String,
    pub scheme: Scheme,
    pub codebook: CodebookConfig,
    pub geometry: Geometry,
    pub channel: ChannelParams,
    pub snr: SnrGrid,
    /// Stop a point once this many bit errors are seen ...
    pub min_bit_errors: u64,
    /// ... or once this many bits were simulated, whichever comes first.
    pub max_bits: u64,
    /// Data blocks per channel draw (the reference block is extra and
    /// carries no bits).
    pub blocks_per_frame: usize,
    pub seed: u64,
    /// Evaluate the union bound alongside the simulation when present.
    pub bound: Option<BoundConfig>,
}

pub const DEFAULT_MIN_BIT_ERRORS: u64 = 200;
pub const DEFAULT_MAX_BITS: u64 = 20_000_000;
pub const DEFAULT_BLOCKS_PER_FRAME: usize = 50;

/// Position sets of the three studied deployments.
pub const DEPLOYMENT_CLOSE: [f64; 3] = [9.0, 10.0, 11.0];
pub const DEPLOYMENT_EQUAL: [f64; 3] = [2.0, 10.0, 18.0];
pub const DEPLOYMENT_NONUNIFORM: [f64; 3] = [1.5, 7.5, 18.5];

impl ScenarioConfig {
    /// Differential BPSK over the nonuniform deployment with default
    /// stopping rules; the base most presets specialize.
    pub fn base(id: &str, seed: u64) -> Self {
        Self {
            id: id.to_string(),
            scheme: Scheme::DsmPa,
            codebook: CodebookConfig::new(2, 3).expect("valid default"),
            geometry: Geometry::default_deployment(DEPLOYMENT_NONUNIFORM.to_vec()),
            channel: ChannelParams::default(),
            snr: SnrGrid::new(0.0, 40.0, 2.0),
            min_bit_errors: DEFAULT_MIN_BIT_ERRORS,
            max_bits: DEFAULT_MAX_BITS,
            blocks_per_frame: DEFAULT_BLOCKS_PER_FRAME,
            seed,
            bound: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.snr.validate()?;
        self.geometry.validate()?;
        self.channel.validate()?;
        if self.geometry.num_positions() != self.codebook.num_positions() {
            return Err(Error::Config(format!(
                "geometry has {} positions but the codebook expects {}",
                self.geometry.num_positions(),
                self.codebook.num_positions()
            )));
        }
        if self.blocks_per_frame == 0 {
            return Err(Error::Config("need at least one data block per frame".into()));
        }
        if self.min_bit_errors == 0 || self.max_bits == 0 {
            return Err(Error::Config("stopping rule must allow at least one bit".into()));
        }
        if let Some(bound) = &self.bound {
            bound.validate()?;
            if !self.scheme.is_differential() {
                return Err(Error::Config(
                    "the union bound applies to the differential schemes only".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn build_codebook(&self) -> Result<Codebook> {
        match self.scheme {
            Scheme::DsmPaNoAlamouti => build_no_alamouti_codebook(&self.codebook),
            _ => enumerate_codebook(&self.codebook),
        }
    }
}

/// One measured SNR point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BerPoint {
    pub ebn0_db: f64,
    pub bits_sent: u64,
    pub bit_errors: u64,
    pub ber_sim: f64,
    pub ber_bound: Option<f64>,
    /// Derived seed that fully determines this point.
    pub seed: u64,
    pub wallclock_s: f64,
}

/// One scheme/modulation/deployment curve over the SNR grid.
#[derive(Debug, Clone, Serialize)]
pub struct BerCurve {
    pub scenario: String,
    pub scheme: Scheme,
    pub modulation: usize,
    pub points: Vec<BerPoint>,
}

impl BerCurve {
    /// `(ebn0_db, ber_sim)` pairs, for slope fitting and interpolation.
    pub fn sim_points(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| (p.ebn0_db, p.ber_sim)).collect()
    }

    /// Log-linear interpolated Eb/N0 at which the curve crosses `target`
    /// BER, or `None` when the curve never brackets it.
    pub fn snr_at_ber(&self, target: f64) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .points
            .iter()
            .filter(|p| p.ber_sim > 0.0)
            .map(|p| (p.ebn0_db, p.ber_sim))
            .collect();
        for w in pts.windows(2) {
            let (x0, b0) = w[0];
            let (x1, b1) = w[1];
            if (b0 >= target && b1 <= target) && b0 != b1 {
                let t = (b0.log10() - target.log10()) / (b0.log10() - b1.log10());
                return Some(x0 + t * (x1 - x0));
            }
        }
        None
    }
}

// --- seeding -----------------------------------------------------------

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix(a: u64, b: u64) -> u64 {
    let mut state = a ^ 0x6A09_E667_F3BC_C909u64.wrapping_add(b);
    let first = splitmix64(&mut state);
    state ^= b;
    first ^ splitmix64(&mut state)
}

/// Seed of one measured point: master seed, scenario id, and grid index.
pub fn derive_point_seed(master: u64, scenario_id: &str, snr_index: usize) -> u64 {
    let mut h = master ^ 0xcbf2_9ce4_8422_2325;
    for &byte in scenario_id.as_bytes() {
        h ^= u64::from(byte);
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    mix(h, snr_index as u64)
}

fn chacha_from(seed: u64) -> ChaCha8Rng {
    let mut state = seed;
    let mut bytes = [0u8; 32];
    for chunk in bytes.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}

// --- Monte Carlo engine -------------------------------------------------

/// Frames simulated between stopping-rule checks; fixed so the set of
/// simulated frames never depends on the worker count.
const FRAMES_PER_BATCH: u64 = 64;

struct FrameWorker {
    fast: FastCodebook,
    z_prev: Vec<Complex64>,
    z: Vec<Complex64>,
    y_prev: Vec<Complex64>,
    y: Vec<Complex64>,
}

impl FrameWorker {
    fn new(codebook: &Codebook) -> Self {
        let t = codebook.config().block_len();
        Self {
            fast: FastCodebook::new(codebook),
            z_prev: vec![Complex64::new(0.0, 0.0); t],
            z: vec![Complex64::new(0.0, 0.0); t],
            y_prev: vec![Complex64::new(0.0, 0.0); t],
            y: vec![Complex64::new(0.0, 0.0); t],
        }
    }

    /// Simulates one frame and returns its bit-error count.
    fn run(
        &mut self,
        scheme: Scheme,
        stats: &crate::channel::ChannelStats,
        n0: f64,
        blocks: usize,
        label_count: u64,
        rng: &mut ChaCha8Rng,
    ) -> u64 {
        let h = sample_channel(stats, rng);
        let sigma = n0.sqrt();
        let t = h.dim();
        let mut errors = 0u64;
        if scheme.is_differential() {
            self.z_prev.copy_from_slice(h.coefficients());
            for i in 0..t {
                self.y_prev[i] = self.z_prev[i] + sigma * standard_complex_gaussian(rng);
            }
            for _ in 0..blocks {
                let label = rng.random_range(0..label_count);
                self.fast.apply_codeword(label, &self.z_prev, &mut self.z);
                for i in 0..t {
                    self.y[i] = self.z[i] + sigma * standard_complex_gaussian(rng);
                }
                let decision = self.fast.detect(&self.y, &self.y_prev);
                errors += u64::from(decision.bit_errors(label));
                std::mem::swap(&mut self.z_prev, &mut self.z);
                std::mem::swap(&mut self.y_prev, &mut self.y);
            }
            // the state stays unitary-rotated; catch silent energy drift
            let e_in: f64 = h.coefficients().iter().map(|c| c.norm_sqr()).sum();
            let e_out: f64 = self.z_prev.iter().map(|c| c.norm_sqr()).sum();
            debug_assert!((e_out / e_in - 1.0).abs() < 1e-6);
        } else {
            for _ in 0..blocks {
                let label = rng.random_range(0..label_count);
                self.fast.apply_codeword(label, h.coefficients(), &mut self.z);
                for i in 0..t {
                    self.y[i] = self.z[i] + sigma * standard_complex_gaussian(rng);
                }
                let decision = self.fast.detect(&self.y, h.coefficients());
                errors += u64::from(decision.bit_errors(label));
            }
        }
        errors
    }
}

/// Measures one BER point: frames with fresh channel draws are simulated in
/// deterministic batches until the stopping rule fires.
pub fn monte_carlo_ber(scenario: &ScenarioConfig, ebn0_db: f64, seed: u64) -> Result<BerPoint> {
    let start = Instant::now();
    scenario.validate()?;
    let codebook = scenario.build_codebook()?;
    let stats = channel_stats(&scenario.geometry, &scenario.channel)?;
    let n0 = ebn0_to_n0(ebn0_db, &scenario.codebook);
    let bits_per_block = scenario.codebook.total_bits() as u64;
    let bits_per_frame = bits_per_block * scenario.blocks_per_frame as u64;
    let label_count = codebook.len() as u64;

    let mut bits_sent = 0u64;
    let mut bit_errors = 0u64;
    let mut next_frame = 0u64;
    while bit_errors < scenario.min_bit_errors && bits_sent < scenario.max_bits {
        let batch: Vec<u64> = (next_frame..next_frame + FRAMES_PER_BATCH).collect();
        next_frame += FRAMES_PER_BATCH;
        let errs: u64 = batch
            .par_iter()
            .map_init(
                || FrameWorker::new(&codebook),
                |worker, &frame| {
                    let mut rng = chacha_from(mix(seed, frame));
                    worker.run(
                        scenario.scheme,
                        &stats,
                        n0,
                        scenario.blocks_per_frame,
                        label_count,
                        &mut rng,
                    )
                },
            )
            .sum();
        bit_errors += errs;
        bits_sent += bits_per_frame * FRAMES_PER_BATCH;
    }
    if bits_sent == 0 {
        return Err(Error::Domain("no bits simulated; check the stopping rule".into()));
    }
    Ok(BerPoint {
        ebn0_db,
        bits_sent,
        bit_errors,
        ber_sim: bit_errors as f64 / bits_sent as f64,
        ber_bound: None,
        seed,
        wallclock_s: start.elapsed().as_secs_f64(),
    })
}

/// Runs the Monte Carlo sweep over the scenario's SNR grid, attaching union
/// bound values when the scenario carries a bound config.
pub fn run_ber_sweep(scenario: &ScenarioConfig) -> Result<BerCurve> {
    scenario.validate()?;
    let mut points = Vec::new();
    for (k, ebn0_db) in scenario.snr.points().into_iter().enumerate() {
        let seed = derive_point_seed(scenario.seed, &scenario.id, k);
        let mut point = monte_carlo_ber(scenario, ebn0_db, seed)?;
        if let Some(bound_cfg) = &scenario.bound {
            point.ber_bound = Some(evaluate_bound(scenario, bound_cfg, ebn0_db, seed)?);
            point.wallclock_s = point.wallclock_s.max(0.0);
        }
        eprintln!(
            "{} {} {:>5.1} dB: ber {:.3e} ({}/{} bits{}) [{:.1}s]",
            scenario.id,
            scenario.scheme.as_str(),
            ebn0_db,
            point.ber_sim,
            point.bit_errors,
            point.bits_sent,
            point
                .ber_bound
                .map(|b| format!(", bound {b:.3e}"))
                .unwrap_or_default(),
            point.wallclock_s,
        );
        points.push(point);
    }
    Ok(BerCurve {
        scenario: scenario.id.clone(),
        scheme: scenario.scheme,
        modulation: scenario.codebook.modulation_order(),
        points,
    })
}

/// Evaluates only the union bound over the grid; simulated fields stay
/// empty (`ber_sim` is NaN and is omitted from CSV output).
pub fn run_theory_sweep(scenario: &ScenarioConfig) -> Result<BerCurve> {
    scenario.validate()?;
    let bound_cfg = scenario
        .bound
        .as_ref()
        .ok_or_else(|| Error::Config("theory sweep needs a bound config".into()))?;
    let mut points = Vec::new();
    for (k, ebn0_db) in scenario.snr.points().into_iter().enumerate() {
        let seed = derive_point_seed(scenario.seed, &scenario.id, k);
        let start = Instant::now();
        let bound = evaluate_bound(scenario, bound_cfg, ebn0_db, seed)?;
        points.push(BerPoint {
            ebn0_db,
            bits_sent: 0,
            bit_errors: 0,
            ber_sim: f64::NAN,
            ber_bound: Some(bound),
            seed,
            wallclock_s: start.elapsed().as_secs_f64(),
        });
    }
    Ok(BerCurve {
        scenario: scenario.id.clone(),
        scheme: scenario.scheme,
        modulation: scenario.codebook.modulation_order(),
        points,
    })
}

fn evaluate_bound(
    scenario: &ScenarioConfig,
    cfg: &BoundConfig,
    ebn0_db: f64,
    point_seed: u64,
) -> Result<f64> {
    let codebook = scenario.build_codebook()?;
    let stats = channel_stats(&scenario.geometry, &scenario.channel)?;
    let n0 = ebn0_to_n0(ebn0_db, &scenario.codebook);
    let mut rng = chacha_from(mix(point_seed, 0xB0BD));
    ber_union_bound(&codebook, &stats, n0, cfg, &mut rng)
}

// --- presets ------------------------------------------------------------

/// Builds the curve set of a named preset.
///
/// * `fig3`: differential scheme, BPSK and QPSK, bound available.
/// * `fig4`: BPSK comparison of the three schemes.
/// * `fig5`: BPSK differential scheme over three deployments.
pub fn preset_curves(name: &str, seed: u64, theory: bool) -> Result<Vec<ScenarioConfig>> {
    match name {
        "fig3" => {
            let mut bpsk = ScenarioConfig::base("fig3", seed);
            let mut qpsk = ScenarioConfig::base("fig3", seed);
            qpsk.codebook = CodebookConfig::new(4, 3)?;
            if theory {
                bpsk.bound = Some(BoundConfig::default());
                qpsk.bound = Some(BoundConfig {
                    pair_subsample: Some(200_000),
                    ..BoundConfig::default()
                });
            }
            Ok(vec![bpsk, qpsk])
        }
        "fig4" => {
            let mut proposed = ScenarioConfig::base("fig4", seed);
            if theory {
                proposed.bound = Some(BoundConfig::default());
            }
            let mut no_alamouti = ScenarioConfig::base("fig4", seed);
            no_alamouti.scheme = Scheme::DsmPaNoAlamouti;
            let mut coherent = ScenarioConfig::base("fig4", seed);
            coherent.scheme = Scheme::CoherentSmPa;
            Ok(vec![proposed, no_alamouti, coherent])
        }
        "fig5" => {
            let deployments: [(&str, [f64; 3]); 3] = [
                ("fig5-close", DEPLOYMENT_CLOSE),
                ("fig5-equal", DEPLOYMENT_EQUAL),
                ("fig5-nonuniform", DEPLOYMENT_NONUNIFORM),
            ];
            Ok(deployments
                .iter()
                .map(|(id, positions)| {
                    let mut cfg = ScenarioConfig::base(id, seed);
                    cfg.geometry = Geometry::default_deployment(positions.to_vec());
                    cfg
                })
                .collect())
        }
        "custom" => Ok(vec![ScenarioConfig::base("custom", seed)]),
        other => Err(Error::Config(format!(
            "unknown scenario \"{other}\" (expected fig3, fig4, fig5, or custom)"
        ))),
    }
}

// --- config file --------------------------------------------------------

/// Flat key/value overrides applied on top of a preset. Unknown keys are
/// rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub scheme: Option<String>,
    pub modulation_order: Option<usize>,
    pub num_positions: Option<usize>,
    pub position_x: Option<Vec<f64>>,
    pub waveguide_y: Option<[f64; 2]>,
    pub waveguide_height: Option<f64>,
    pub region_side: Option<f64>,
    pub carrier_freq: Option<f64>,
    pub receiver: Option<[f64; 3]>,
    pub path_loss_exponent: Option<f64>,
    pub rician_factor: Option<f64>,
    pub snr_min_db: Option<f64>,
    pub snr_max_db: Option<f64>,
    pub snr_step_db: Option<f64>,
    pub min_bit_errors: Option<u64>,
    pub max_bits: Option<u64>,
    pub blocks_per_frame: Option<usize>,
    pub seed: Option<u64>,
    pub theory: Option<bool>,
    pub quad_nodes: Option<usize>,
    pub past_samples: Option<usize>,
    pub past_depth: Option<usize>,
    pub pair_subsample: Option<usize>,
}

impl ConfigOverrides {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config file: {e}")))
    }

    /// Applies every present field to one curve config.
    pub fn apply(&self, cfg: &mut ScenarioConfig) -> Result<()> {
        if let Some(s) = &self.scheme {
            cfg.scheme = Scheme::parse(s)?;
        }
        let m = self.modulation_order.unwrap_or(cfg.codebook.modulation_order());
        let np = self.num_positions.unwrap_or(cfg.codebook.num_positions());
        cfg.codebook = CodebookConfig::new(m, np)?;
        if let Some(x) = &self.position_x {
            cfg.geometry.position_x = x.clone();
        } else if cfg.geometry.position_x.len() != np {
            return Err(Error::Config(format!(
                "num_positions = {np} needs a matching position_x list"
            )));
        }
        if let Some(y) = self.waveguide_y {
            cfg.geometry.waveguide_y = y;
        }
        if let Some(h) = self.waveguide_height {
            cfg.geometry.waveguide_height = h;
        }
        if let Some(d) = self.region_side {
            cfg.geometry.region_side = d;
        }
        if let Some(f) = self.carrier_freq {
            cfg.geometry.carrier_freq = f;
        }
        if let Some(r) = self.receiver {
            cfg.geometry.receiver = r;
        }
        if let Some(a) = self.path_loss_exponent {
            cfg.channel.path_loss_exponent = a;
        }
        if let Some(k) = self.rician_factor {
            cfg.channel.rician_factor = k;
        }
        if let Some(v) = self.snr_min_db {
            cfg.snr.min_db = v;
        }
        if let Some(v) = self.snr_max_db {
            cfg.snr.max_db = v;
        }
        if let Some(v) = self.snr_step_db {
            cfg.snr.step_db = v;
        }
        if let Some(v) = self.min_bit_errors {
            cfg.min_bit_errors = v;
        }
        if let Some(v) = self.max_bits {
            cfg.max_bits = v;
        }
        if let Some(v) = self.blocks_per_frame {
            cfg.blocks_per_frame = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        let wants_theory = self.theory.unwrap_or(cfg.bound.is_some());
        if wants_theory && cfg.scheme.is_differential() {
            let mut bound = cfg.bound.unwrap_or_default();
            if let Some(v) = self.quad_nodes {
                bound.quad_nodes = v;
            }
            if let Some(v) = self.past_samples {
                bound.num_past_states = v;
            }
            if let Some(v) = self.past_depth {
                bound.past_depth = v;
            }
            if let Some(v) = self.pair_subsample {
                bound.pair_subsample = Some(v);
            }
            cfg.bound = Some(bound);
        } else if self.theory == Some(false) {
            cfg.bound = None;
        }
        cfg.validate()
    }
}

// --- output -------------------------------------------------------------

/// CSV header, fixed byte-for-byte.
pub const CSV_HEADER: &str =
    "scenario,scheme,modulation,ebn0_db,bits_sent,bit_errors,ber_sim,ber_bound,seed";

fn format_ber(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.5e}")
    } else {
        String::new()
    }
}

/// Writes curves as CSV rows sorted by (scheme, ebn0_db), LF newlines.
pub fn write_csv<W: Write>(mut w: W, curves: &[BerCurve]) -> Result<()> {
    let mut rows: Vec<(&BerCurve, &BerPoint)> = curves
        .iter()
        .flat_map(|c| c.points.iter().map(move |p| (c, p)))
        .collect();
    rows.sort_by(|a, b| {
        a.0.scheme
            .as_str()
            .cmp(b.0.scheme.as_str())
            .then(a.1.ebn0_db.partial_cmp(&b.1.ebn0_db).expect("finite SNR"))
    });
    writeln!(w, "{CSV_HEADER}")?;
    for (curve, p) in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            curve.scenario,
            curve.scheme.as_str(),
            curve.modulation,
            p.ebn0_db,
            p.bits_sent,
            p.bit_errors,
            format_ber(p.ber_sim),
            p.ber_bound.map(format_ber).unwrap_or_default(),
            p.seed,
        )?;
    }
    Ok(())
}

/// Writes curves as a JSON array.
pub fn write_json<W: Write>(w: W, curves: &[BerCurve]) -> Result<()> {
    serde_json::to_writer_pretty(w, curves)
        .map_err(|e| Error::Io(std::io::Error::other(e)))
}

// --- CLI ----------------------------------------------------------------

use clap::{Parser, ValueEnum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

/// BER simulator and bound evaluator for differential spatial modulation
/// over pinching antennas.
#[derive(Debug, Parser)]
#[command(name = "dsm-pa", version, about)]
struct Cli {
    /// Scenario preset to run.
    #[arg(long, value_parser = ["fig3", "fig4", "fig5", "custom"])]
    scenario: String,

    /// Flat key/value config file overriding preset fields.
    #[arg(long)]
    config: Option<std::path::PathBuf>,

    /// Override the grid start (dB).
    #[arg(long)]
    snr_min: Option<f64>,

    /// Override the grid end (dB).
    #[arg(long)]
    snr_max: Option<f64>,

    /// Override the grid step (dB).
    #[arg(long)]
    snr_step: Option<f64>,

    /// Bit budget per SNR point.
    #[arg(long)]
    trials_max_bits: Option<u64>,

    /// Bit-error target per SNR point.
    #[arg(long)]
    min_errors: Option<u64>,

    /// Master seed; output is a pure function of (config, seed).
    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// Output path.
    #[arg(long)]
    out: std::path::PathBuf,

    /// Output format.
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,

    /// Also evaluate the semi-analytical union bound where applicable.
    #[arg(long)]
    theory: bool,

    /// Gauss-Legendre nodes for the bound.
    #[arg(long)]
    quad_nodes: Option<usize>,

    /// Differential-state samples for the bound.
    #[arg(long)]
    past_samples: Option<usize>,

    /// Codeword factors per sampled state.
    #[arg(long)]
    past_depth: Option<usize>,
}

/// Runs the command line and returns the process exit code.
pub fn cli_main<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own usage text; --help/--version land here too
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run_cli(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn run_cli(cli: Cli) -> Result<()> {
    let mut curves_cfg = preset_curves(&cli.scenario, cli.seed, cli.theory)?;
    let overrides = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            Some(ConfigOverrides::from_toml(&text)?)
        }
        None => None,
    };
    for cfg in &mut curves_cfg {
        cfg.seed = cli.seed;
        if let Some(o) = &overrides {
            o.apply(cfg)?;
        }
        if let Some(v) = cli.snr_min {
            cfg.snr.min_db = v;
        }
        if let Some(v) = cli.snr_max {
            cfg.snr.max_db = v;
        }
        if let Some(v) = cli.snr_step {
            cfg.snr.step_db = v;
        }
        if let Some(v) = cli.trials_max_bits {
            cfg.max_bits = v;
        }
        if let Some(v) = cli.min_errors {
            cfg.min_bit_errors = v;
        }
        if let Some(bound) = &mut cfg.bound {
            if let Some(v) = cli.quad_nodes {
                bound.quad_nodes = v;
            }
            if let Some(v) = cli.past_samples {
                bound.num_past_states = v;
            }
            if let Some(v) = cli.past_depth {
                bound.past_depth = v;
            }
        }
        cfg.validate()?;
    }

    let mut curves = Vec::with_capacity(curves_cfg.len());
    for cfg in &curves_cfg {
        curves.push(run_ber_sweep(cfg)?);
    }

    write_output(&cli.out, cli.format, &curves)?;
    eprintln!("wrote {} curve(s) to {}", curves.len(), cli.out.display());
    Ok(())
}

fn write_output(path: &Path, format: OutputFormat, curves: &[BerCurve]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let writer = std::io::BufWriter::new(file);
    match format {
        OutputFormat::Csv => write_csv(writer, curves),
        OutputFormat::Json => write_json(writer, curves),
    }
}
