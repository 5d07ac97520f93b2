//! Experiment configuration (TOML).
//!
//! ```toml
//! [system]                 # or [identification]
//! m = 1.0
//! c = 1.0
//! k1 = 10.0
//! k2 = 20.0
//! k3 = 20.0
//!
//! [basis]
//! order = 3                # series order N
//! a = 2.0                  # one value, or one per order
//! r = 24                   # highest Laguerre index, one value or one per order
//!
//! [excitation]
//! kind = "sinusoid"        # sinusoid | multitone | whitenoise | csv
//! amplitude = 1.0
//! omega = 3.141592653589793
//!
//! [grids]                  # optional; per-order lists
//! dw = [0.1, 0.1, 0.4]
//! cutoff = [102.4, 102.4, 51.2]
//!
//! [output]
//! dt = 0.01
//! horizon = 20.0
//! ```

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use poleres::frf::{GridSpec, OscillatorParams};
use poleres::identify::NoiseRecordConfig;
use poleres::LaguerreBasis;

/// Largest third-order Laguerre index under the desk profile.
pub const DESK_R3: usize = 12;
/// Largest third-order grid half-width under the desk profile.
pub const DESK_M3: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Paper,
    Desk,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn expand(&self, n: usize, key: &str) -> Result<Vec<T>> {
        match self {
            OneOrMany::One(v) => Ok(vec![v.clone(); n]),
            OneOrMany::Many(v) if v.len() == n => Ok(v.clone()),
            OneOrMany::Many(v) => bail!("{key}: expected 1 or {n} values, found {}", v.len()),
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub system: Option<SystemBlock>,
    pub identification: Option<IdentificationBlock>,
    pub basis: BasisBlock,
    pub excitation: ExcitationBlock,
    #[serde(default)]
    pub grids: GridsBlock,
    #[serde(default)]
    pub output: OutputBlock,
    #[serde(default)]
    pub verify: VerifyBlock,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SystemBlock {
    pub m: f64,
    pub c: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

impl From<SystemBlock> for OscillatorParams {
    fn from(s: SystemBlock) -> Self {
        OscillatorParams {
            m: s.m,
            c: s.c,
            k1: s.k1,
            k2: s.k2,
            k3: s.k3,
        }
    }
}

/// Kernel identification from an input/output record. The first-order basis
/// is used for both fitted orders.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct IdentificationBlock {
    /// Input/output record `t,f,y`. Relative paths resolve against the config file.
    pub record: Option<PathBuf>,
    /// Generates a white-noise record from a reference oscillator instead.
    pub generate: Option<GenerateBlock>,
    /// Coefficients from an earlier `identify` run, used by `predict`.
    pub coefficients: Option<PathBuf>,
    #[serde(default)]
    pub ridge: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateBlock {
    pub system: SystemBlock,
    #[serde(default = "default_s0")]
    pub s0: f64,
    #[serde(default = "default_record_dt")]
    pub dt: f64,
    #[serde(default = "default_duration")]
    pub duration: f64,
    #[serde(default = "default_record_step")]
    pub integrator_dt: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_s0() -> f64 {
    NoiseRecordConfig::default().s0
}
fn default_record_dt() -> f64 {
    NoiseRecordConfig::default().dt
}
fn default_duration() -> f64 {
    NoiseRecordConfig::default().duration
}
fn default_record_step() -> f64 {
    NoiseRecordConfig::default().integrator_dt
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BasisBlock {
    pub order: usize,
    pub a: OneOrMany<f64>,
    pub r: OneOrMany<usize>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ExcitationBlock {
    Sinusoid {
        amplitude: f64,
        omega: f64,
    },
    Multitone {
        amplitude: f64,
        /// Explicit frequencies, or `omega_start/omega_step/omega_stop`.
        omegas: Option<Vec<f64>>,
        omega_start: Option<f64>,
        omega_step: Option<f64>,
        omega_stop: Option<f64>,
        /// Explicit phases; drawn uniformly from the seed otherwise.
        phases: Option<Vec<f64>>,
        #[serde(default)]
        seed: u64,
        /// Decompose the sampled record by Prony-SS at this rank instead of
        /// using the exact tones.
        rank: Option<usize>,
    },
    Whitenoise {
        s0: f64,
        #[serde(default)]
        seed: u64,
        rank: Option<usize>,
        rank_threshold: Option<f64>,
    },
    Csv {
        path: PathBuf,
        rank: Option<usize>,
        rank_threshold: Option<f64>,
    },
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridsBlock {
    pub dw: Option<OneOrMany<f64>>,
    pub cutoff: Option<OneOrMany<f64>>,
    /// Re-project on a refined grid and report the largest relative change.
    #[serde(default)]
    pub convergence_check: bool,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub dt: f64,
    pub horizon: f64,
    /// RK4 step of the `oracle` and `verify` references.
    pub integrator_dt: f64,
    /// Also write the expanded symbolic response (large at order 3).
    pub symbolic: bool,
    /// Response lengths timed by `benchmark`.
    pub bench_lengths: Vec<f64>,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock {
            dt: 0.01,
            horizon: 20.0,
            integrator_dt: 1e-4,
            symbolic: false,
            bench_lengths: vec![10.0, 50.0, 100.0, 200.0, 400.0],
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyBlock {
    /// Relative RMS allowed between the closed form and RK4.
    pub response_tolerance: f64,
}

impl Default for VerifyBlock {
    fn default() -> Self {
        VerifyBlock {
            response_tolerance: 0.05,
        }
    }
}

/// A parsed configuration with its source text and directory.
pub struct Loaded {
    pub config: Config,
    pub text: String,
    pub dir: PathBuf,
}

pub fn load(path: &Path) -> Result<Loaded> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let config: Config =
        toml::from_str(&text).map_err(|e| anyhow!("config {}: {e}", path.display()))?;
    config.validate()?;
    Ok(Loaded {
        config,
        text,
        dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
    })
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        match (&self.system, &self.identification) {
            (Some(_), Some(_)) => bail!("config: give either [system] or [identification], not both"),
            (None, None) => bail!("config: one of [system] or [identification] is required"),
            _ => {}
        }
        let n = self.basis.order;
        if !(1..=3).contains(&n) {
            bail!("basis.order: must be 1, 2 or 3, got {n}");
        }
        if self.identification.is_some() && n > 2 {
            bail!("basis.order: identification supports orders 1 and 2, got {n}");
        }
        for a in self.basis.a.expand(n, "basis.a")? {
            if !(a > 0.0 && a.is_finite()) {
                bail!("basis.a: rates must be positive, got {a}");
            }
        }
        self.basis.r.expand(n, "basis.r")?;
        if let Some(s) = &self.system {
            OscillatorParams::from(*s)
                .validate()
                .map_err(|e| anyhow!("system: {e}"))?;
        }
        if let Some(id) = &self.identification {
            if id.record.is_none() && id.generate.is_none() && id.coefficients.is_none() {
                bail!("identification: needs one of record, generate or coefficients");
            }
            if id.record.is_some() && id.generate.is_some() {
                bail!("identification: record and generate are mutually exclusive");
            }
            if !(id.ridge >= 0.0) {
                bail!("identification.ridge: must be non-negative, got {}", id.ridge);
            }
        }
        if let ExcitationBlock::Multitone {
            omegas,
            omega_start,
            omega_step,
            omega_stop,
            phases,
            ..
        } = &self.excitation
        {
            let ranged = omega_start.is_some() || omega_step.is_some() || omega_stop.is_some();
            match (omegas, ranged) {
                (Some(_), true) => bail!("excitation.omegas: give a list or a range, not both"),
                (None, false) => bail!("excitation.omegas: missing (or omega_start/omega_step/omega_stop)"),
                (None, true) if omega_start.is_none() || omega_step.is_none() || omega_stop.is_none() => {
                    bail!("excitation.omega_step: a range needs omega_start, omega_step and omega_stop")
                }
                _ => {}
            }
            if let Some(step) = omega_step {
                if !(*step > 0.0) {
                    bail!("excitation.omega_step: must be positive, got {step}");
                }
            }
            if let (Some(p), Ok(w)) = (phases, self.tone_frequencies()) {
                if p.len() != w.len() {
                    bail!("excitation.phases: {} phases for {} tones", p.len(), w.len());
                }
            }
        }
        if let Some(dw) = &self.grids.dw {
            dw.expand(n, "grids.dw")?;
        }
        if let Some(c) = &self.grids.cutoff {
            c.expand(n, "grids.cutoff")?;
        }
        let o = &self.output;
        if !(o.dt > 0.0 && o.horizon > 0.0 && o.integrator_dt > 0.0) {
            bail!("output.dt, output.horizon and output.integrator_dt must be positive");
        }
        if o.bench_lengths.iter().any(|l| !(*l > 0.0)) {
            bail!("output.bench_lengths: lengths must be positive");
        }
        Ok(())
    }

    /// Frequencies of a multitone excitation.
    pub fn tone_frequencies(&self) -> Result<Vec<f64>> {
        match &self.excitation {
            ExcitationBlock::Multitone {
                omegas: Some(w), ..
            } => Ok(w.clone()),
            ExcitationBlock::Multitone {
                omega_start: Some(a),
                omega_step: Some(s),
                omega_stop: Some(b),
                ..
            } => {
                let n = ((b - a) / s + 1e-9).floor() as usize;
                Ok((0..=n).map(|k| a + k as f64 * s).collect())
            }
            _ => bail!("excitation: not a multitone"),
        }
    }

    /// Per-order Laguerre bases, with the desk profile capping order 3.
    pub fn bases(&self, profile: Profile) -> Result<Vec<LaguerreBasis>> {
        let n = self.basis.order;
        let a = self.basis.a.expand(n, "basis.a")?;
        let r = self.basis.r.expand(n, "basis.r")?;
        (0..n)
            .map(|i| {
                let mut ri = r[i];
                if i == 2 && profile == Profile::Desk {
                    ri = ri.min(DESK_R3);
                }
                LaguerreBasis::new(a[i], ri).map_err(|e| anyhow!("basis: {e}"))
            })
            .collect()
    }

    /// Per-order frequency grids, with the desk profile narrowing order 3.
    pub fn grids(&self, profile: Profile) -> Result<Vec<GridSpec>> {
        let n = self.basis.order;
        let defaults = [GridSpec::LOW_ORDER, GridSpec::LOW_ORDER, GridSpec::THIRD_ORDER];
        let dw = match &self.grids.dw {
            Some(v) => v.expand(n, "grids.dw")?,
            None => defaults[..n].iter().map(|g| g.dw).collect(),
        };
        let cut = match &self.grids.cutoff {
            Some(v) => v.expand(n, "grids.cutoff")?,
            None => (0..n).map(|i| defaults[i].cutoff().max(dw[i])).collect(),
        };
        (0..n)
            .map(|i| {
                let mut g = GridSpec::from_cutoff(dw[i], cut[i]).map_err(|e| anyhow!("grids: {e}"))?;
                if i == 2 && profile == Profile::Desk {
                    g.half_width = g.half_width.min(DESK_M3);
                }
                Ok(g)
            })
            .collect()
    }

    pub fn params(&self) -> Option<OscillatorParams> {
        self.system.map(OscillatorParams::from)
    }

    /// Applies a command-line seed to every seeded block.
    pub fn override_seed(&mut self, seed: u64) {
        match &mut self.excitation {
            ExcitationBlock::Multitone { seed: s, .. } | ExcitationBlock::Whitenoise { seed: s, .. } => {
                *s = seed
            }
            _ => {}
        }
        if let Some(g) = self.identification.as_mut().and_then(|i| i.generate.as_mut()) {
            g.seed = seed;
        }
    }
}
