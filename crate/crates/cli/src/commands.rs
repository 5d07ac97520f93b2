use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;

use poleres::engine::{assemble_response, evaluate_response, ResponseSeries};
use poleres::excitation::{
    multitone, prony_ss, random_phase_tones, sinusoid_poles, white_noise, ExponentialSignal, PronyFit,
    RankSelection, SampledSignal, Tone,
};
use poleres::frf::{
    convergence_check, frf1, frf2, frf3_diagonal, kernel3_diagonal, kernel_time, project_coefficients,
    KernelCoefficients, OscillatorParams, Projection,
};
use poleres::identify::{fit, simulate_noise_record, FitOptions, FitResult, IoRecord, NoiseRecordConfig};
use poleres::numeric::relative_rms;
use poleres::oracle::{benchmark, integrate, integrate_orders, write_benchmark, BenchConfig, IntegratorConfig};

use crate::config::{Config, ExcitationBlock, Loaded, Profile};
use crate::manifest::Manifest;

/// Largest Gram-matrix deviation accepted by `verify`.
const GRAM_TOL: f64 = 1e-5;
const PRONY_TOL: f64 = 1e-6;
const CONVERGENCE_RTOL: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::Subcommand)]
pub enum Command {
    /// Sample the frequency response functions on their grids.
    Frf,
    /// Inverse-transform the FRFs into time-domain kernels.
    Kernels,
    /// Project the FRFs onto the Laguerre basis.
    Project,
    /// Decompose the excitation into complex exponentials.
    Prony,
    /// Closed-form response with natural/cross/forced components.
    Simulate,
    /// Fit kernel coefficients to an input/output record.
    Identify,
    /// Closed-form response of identified (or projected) coefficients.
    Predict,
    /// RK4 reference trajectory and perturbation orders.
    Oracle,
    /// Timing table of closed form, RK4 and discrete convolution.
    Benchmark,
    /// Check this configuration end to end.
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Frf => "frf",
            Command::Kernels => "kernels",
            Command::Project => "project",
            Command::Prony => "prony",
            Command::Simulate => "simulate",
            Command::Identify => "identify",
            Command::Predict => "predict",
            Command::Oracle => "oracle",
            Command::Benchmark => "benchmark",
            Command::Verify => "verify",
        }
    }
}

/// The forcing as a function of time, for the integrator.
enum Forcing {
    Sine { amplitude: f64, omega: f64 },
    Tones(Vec<Tone>),
    Sampled(SampledSignal),
}

impl Forcing {
    fn at(&self, t: f64) -> f64 {
        match self {
            Forcing::Sine { amplitude, omega } => amplitude * (omega * t).sin(),
            Forcing::Tones(tones) => tones.iter().map(|x| x.amplitude * (x.omega * t + x.phase).cos()).sum(),
            Forcing::Sampled(s) => s.interpolate(t),
        }
    }
}

struct Input {
    signal: ExponentialSignal,
    forcing: Forcing,
    prony: Option<PronyFit>,
}

#[derive(Serialize)]
struct PronyReport {
    requested_rank: Option<usize>,
    effective_rank: usize,
    fit_rms: f64,
    relative_fit_rms: f64,
    nyquist_fraction: f64,
    near_nyquist: bool,
    singular_values: Vec<f64>,
}

impl From<&PronyFit> for PronyReport {
    fn from(f: &PronyFit) -> Self {
        PronyReport {
            requested_rank: f.requested_rank,
            effective_rank: f.effective_rank,
            fit_rms: f.fit_rms,
            relative_fit_rms: f.relative_fit_rms,
            nyquist_fraction: f.nyquist_fraction,
            near_nyquist: f.near_nyquist(),
            singular_values: f.singular_values.clone(),
        }
    }
}

#[derive(Serialize)]
struct CoefficientReport {
    order: usize,
    a: f64,
    r: usize,
    max_abs: f64,
    norm: f64,
    max_asymmetry: f64,
    imag_ratio: f64,
    convergence: Option<ConvergenceSummary>,
}

#[derive(Serialize)]
struct ConvergenceSummary {
    max_relative_change: f64,
    converged: bool,
}

#[derive(Serialize)]
struct FitReport {
    order: usize,
    samples: usize,
    residual_rms: f64,
    relative_residual: f64,
    /// Relative Frobenius error against the projected reference system, per order.
    coefficient_errors: Option<Vec<f64>>,
}

pub struct Run {
    cfg: Config,
    dir: PathBuf,
    out: PathBuf,
    profile: Profile,
    pub manifest: Manifest,
}

impl Run {
    pub fn new(loaded: Loaded, config_path: &Path, out: PathBuf, profile: Profile, seed: Option<u64>, command: Command) -> Result<Self> {
        let Loaded { mut config, text, dir } = loaded;
        if let Some(s) = seed {
            config.override_seed(s);
        }
        std::fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
        let manifest = Manifest::new(command.name(), config_path, &text, profile, seed);
        Ok(Run {
            cfg: config,
            dir,
            out,
            profile,
            manifest,
        })
    }

    /// Runs `command`; `Ok(false)` means a `verify` check failed.
    pub fn execute(&mut self, command: Command) -> Result<bool> {
        let ok = match command {
            Command::Frf => self.frf().map(|_| true),
            Command::Kernels => self.kernels().map(|_| true),
            Command::Project => self.project().map(|_| true),
            Command::Prony => self.prony().map(|_| true),
            Command::Simulate => self.simulate().map(|_| true),
            Command::Identify => self.identify().map(|_| true),
            Command::Predict => self.predict().map(|_| true),
            Command::Oracle => self.oracle().map(|_| true),
            Command::Benchmark => self.benchmark().map(|_| true),
            Command::Verify => self.verify(),
        }?;
        self.manifest.write(&self.out)?;
        Ok(ok)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.dir.join(p)
        }
    }

    fn emit(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        let path = self.out.join(name);
        let file = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
        let mut w = BufWriter::new(file);
        f(&mut w)?;
        w.flush()?;
        self.manifest.output(&path);
        Ok(())
    }

    fn emit_json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let text = serde_json::to_string_pretty(value)?;
        self.emit(name, |w| Ok(writeln!(w, "{text}")?))
    }

    fn order(&self) -> usize {
        self.cfg.basis.order
    }

    fn times(&self) -> Vec<f64> {
        let o = &self.cfg.output;
        let n = (o.horizon / o.dt - 1e-9).ceil() as usize;
        (0..n).map(|k| k as f64 * o.dt).collect()
    }

    /// The simulated system, or the reference system of a generated record.
    fn params(&self) -> Result<OscillatorParams> {
        if let Some(p) = self.cfg.params() {
            return Ok(p);
        }
        self.cfg
            .identification
            .as_ref()
            .and_then(|i| i.generate.as_ref())
            .map(|g| g.system.into())
            .ok_or_else(|| anyhow!("this command needs [system] or identification.generate.system"))
    }

    fn rank_selection(&self) -> RankSelection {
        match &self.cfg.excitation {
            ExcitationBlock::Multitone { rank: Some(r), .. }
            | ExcitationBlock::Whitenoise { rank: Some(r), .. }
            | ExcitationBlock::Csv { rank: Some(r), .. } => RankSelection::Fixed(*r),
            ExcitationBlock::Whitenoise {
                rank_threshold: Some(t),
                ..
            }
            | ExcitationBlock::Csv {
                rank_threshold: Some(t),
                ..
            } => RankSelection::Threshold(*t),
            _ => RankSelection::default(),
        }
    }

    fn decompose(&mut self, x: &SampledSignal) -> Result<PronyFit> {
        let rank = self.rank_selection();
        let fit = self.manifest.time("prony", || prony_ss(x, rank))?;
        if fit.near_nyquist() {
            log::warn!(
                "recovered frequencies reach {:.0}% of the Nyquist limit; refine the sampling",
                100.0 * fit.nyquist_fraction
            );
        }
        Ok(fit)
    }

    fn input(&mut self) -> Result<Input> {
        let o = self.cfg.output.clone();
        let n = self.times().len();
        match self.cfg.excitation.clone() {
            ExcitationBlock::Sinusoid { amplitude, omega } => Ok(Input {
                signal: sinusoid_poles(amplitude, omega, o.horizon)?,
                forcing: Forcing::Sine { amplitude, omega },
                prony: None,
            }),
            ExcitationBlock::Multitone {
                amplitude,
                phases,
                seed,
                rank,
                ..
            } => {
                let omegas = self.cfg.tone_frequencies()?;
                let tones = match phases {
                    Some(ph) => omegas
                        .iter()
                        .zip(ph)
                        .map(|(&omega, phase)| Tone {
                            amplitude,
                            omega,
                            phase,
                        })
                        .collect(),
                    None => random_phase_tones(amplitude, &omegas, seed),
                };
                let (sampled, exact) = multitone(&tones, n, o.dt)?;
                let prony = match rank {
                    Some(_) => Some(self.decompose(&sampled)?),
                    None => None,
                };
                Ok(Input {
                    signal: prony.as_ref().map(|p| p.signal.clone()).unwrap_or(exact),
                    forcing: Forcing::Tones(tones),
                    prony,
                })
            }
            ExcitationBlock::Whitenoise { s0, seed, .. } => {
                let sampled = white_noise(s0, o.dt, n, seed)?;
                self.sampled_input(sampled)
            }
            ExcitationBlock::Csv { path, .. } => {
                let path = self.resolve(&path);
                let file = File::open(&path).with_context(|| format!("excitation.path: cannot open {}", path.display()))?;
                let sampled = SampledSignal::read_csv(BufReader::new(file))
                    .map_err(|e| anyhow!("excitation.path {}: {e}", path.display()))?;
                self.sampled_input(sampled)
            }
        }
    }

    fn sampled_input(&mut self, sampled: SampledSignal) -> Result<Input> {
        let fit = self.decompose(&sampled)?;
        Ok(Input {
            signal: fit.signal.clone(),
            forcing: Forcing::Sampled(sampled),
            prony: Some(fit),
        })
    }

    fn project_all(&mut self, p: &OscillatorParams) -> Result<Vec<Projection>> {
        let bases = self.cfg.bases(self.profile)?;
        let grids = self.cfg.grids(self.profile)?;
        (0..self.order())
            .map(|i| {
                let b = vec![bases[i]; i + 1];
                self.manifest
                    .time(&format!("project_order{}", i + 1), || project_coefficients(p, grids[i], &b))
                    .map_err(Into::into)
            })
            .collect()
    }

    fn load_coefficients(&mut self, dir: &Path) -> Result<Vec<KernelCoefficients>> {
        let dir = self.resolve(dir);
        (1..=self.order())
            .map(|n| {
                let path = dir.join(format!("c{n}.bin"));
                let file = File::open(&path)
                    .with_context(|| format!("identification.coefficients: cannot open {}", path.display()))?;
                let c = KernelCoefficients::read_binary(BufReader::new(file))
                    .map_err(|e| anyhow!("{}: {e}", path.display()))?;
                if c.order != n {
                    bail!("{}: holds order {}, expected {n}", path.display(), c.order);
                }
                Ok(c)
            })
            .collect()
    }

    fn coefficients(&mut self) -> Result<Vec<KernelCoefficients>> {
        if let Some(id) = self.cfg.identification.clone() {
            if let Some(dir) = &id.coefficients {
                return self.load_coefficients(dir);
            }
            return Ok(self.fit_record()?.0.coeffs);
        }
        let p = self.params()?;
        Ok(self.project_all(&p)?.into_iter().map(|x| x.coeffs).collect())
    }

    /// Reads or generates the record and fits it. Returns the reference
    /// system when the record was generated.
    fn fit_record(&mut self) -> Result<(FitResult, IoRecord, Option<OscillatorParams>)> {
        let id = self
            .cfg
            .identification
            .clone()
            .ok_or_else(|| anyhow!("this command needs an [identification] block"))?;
        let (record, truth) = match (&id.record, &id.generate) {
            (Some(path), _) => {
                let path = self.resolve(path);
                let file =
                    File::open(&path).with_context(|| format!("identification.record: cannot open {}", path.display()))?;
                let r = IoRecord::read_csv(BufReader::new(file))
                    .map_err(|e| anyhow!("identification.record {}: {e}", path.display()))?;
                (r, None)
            }
            (None, Some(g)) => {
                let p: OscillatorParams = g.system.into();
                let cfg = NoiseRecordConfig {
                    s0: g.s0,
                    dt: g.dt,
                    duration: g.duration,
                    seed: g.seed,
                    integrator_dt: g.integrator_dt,
                };
                let r = self.manifest.time("generate_record", || simulate_noise_record(&p, &cfg))?;
                self.emit("record.csv", |w| Ok(r.write_csv(w)?))?;
                (r, Some(p))
            }
            (None, None) => bail!("identification: needs record or generate to fit"),
        };
        let basis = self.cfg.bases(self.profile)?[0];
        let opts = FitOptions {
            order: self.order(),
            ridge: id.ridge,
            ..FitOptions::default()
        };
        let result = self.manifest.time("fit", || fit(&record, &basis, opts))?;
        Ok((result, record, truth))
    }

    fn write_response(&mut self, name: &str, r: &ResponseSeries) -> Result<()> {
        self.emit(name, |w| Ok(r.write_csv(w)?))
    }

    fn frf(&mut self) -> Result<()> {
        let p = self.params()?;
        let grids = self.cfg.grids(self.profile)?;
        let g1 = self.manifest.time("frf1", || frf1(&p, grids[0]));
        self.emit("frf1.bin", |w| Ok(g1.write_binary(w)?))?;
        self.emit("frf1.csv", |w| {
            writeln!(w, "omega,re,im")?;
            for (om, h) in grids[0].omegas().iter().zip(&g1.values) {
                writeln!(w, "{om:.17e},{:.17e},{:.17e}", h.re, h.im)?;
            }
            Ok(())
        })?;
        if self.order() >= 2 {
            let g2 = self.manifest.time("frf2", || frf2(&p, grids[1]));
            self.emit("frf2.bin", |w| Ok(g2.write_binary(w)?))?;
        }
        if self.order() >= 3 {
            // the dense order-3 grid is only ever streamed
            let omegas = grids[2].omegas();
            let d = self.manifest.time("frf3_diagonal", || frf3_diagonal(&p, &omegas));
            self.emit("frf3_diagonal.csv", |w| {
                writeln!(w, "omega,re,im")?;
                for (om, h) in omegas.iter().zip(&d) {
                    writeln!(w, "{om:.17e},{:.17e},{:.17e}", h.re, h.im)?;
                }
                Ok(())
            })?;
        }
        Ok(())
    }

    fn kernels(&mut self) -> Result<()> {
        let p = self.params()?;
        let grids = self.cfg.grids(self.profile)?;
        let h1 = self.manifest.time("kernel1", || kernel_time(&frf1(&p, grids[0])))?;
        self.emit("h1.csv", |w| {
            writeln!(w, "t,h1")?;
            for (t, h) in h1.times().iter().zip(&h1.values) {
                writeln!(w, "{t:.17e},{h:.17e}")?;
            }
            Ok(())
        })?;
        if self.order() >= 2 {
            let h2 = self.manifest.time("kernel2", || kernel_time(&frf2(&p, grids[1])))?;
            self.emit("h2.bin", |w| Ok(h2.write_binary(w)?))?;
        }
        if self.order() >= 3 {
            let times = self.times();
            let h3 = self.manifest.time("kernel3_diagonal", || kernel3_diagonal(&p, grids[2], &times))?;
            self.emit("h3_diagonal.csv", |w| {
                writeln!(w, "t,h3")?;
                for (t, h) in times.iter().zip(&h3) {
                    writeln!(w, "{t:.17e},{h:.17e}")?;
                }
                Ok(())
            })?;
        }
        Ok(())
    }

    fn project(&mut self) -> Result<()> {
        let p = self.params()?;
        let grids = self.cfg.grids(self.profile)?;
        let proj = self.project_all(&p)?;
        let mut reports = Vec::new();
        for (i, pr) in proj.iter().enumerate() {
            let c = &pr.coeffs;
            self.emit(&format!("c{}.bin", i + 1), |w| Ok(c.write_binary(w)?))?;
            let convergence = if self.cfg.grids.convergence_check {
                let r = c.bases[0].order;
                let spots: Vec<Vec<usize>> = [0, 1, r / 2].iter().map(|&k| vec![k; i + 1]).collect();
                let rep = self.manifest.time(&format!("convergence_order{}", i + 1), || {
                    convergence_check(&p, grids[i], c, &spots, CONVERGENCE_RTOL)
                })?;
                Some(ConvergenceSummary {
                    max_relative_change: rep.max_relative_change,
                    converged: rep.converged,
                })
            } else {
                None
            };
            reports.push(CoefficientReport {
                order: i + 1,
                a: c.bases[0].a,
                r: c.bases[0].order,
                max_abs: c.max_abs(),
                norm: c.norm(),
                max_asymmetry: c.max_asymmetry(),
                imag_ratio: pr.imag_ratio,
                convergence,
            });
        }
        self.emit_json("coefficients.json", &reports)?;
        Ok(())
    }

    fn prony(&mut self) -> Result<()> {
        let input = self.input()?;
        let fit = match input.prony {
            Some(f) => f,
            None => {
                // exact excitations are sampled and decomposed anyway
                let dt = self.cfg.output.dt;
                let x = SampledSignal::from_fn(self.times().len(), dt, |t| input.forcing.at(t))?;
                self.decompose(&x)?
            }
        };
        self.manifest.note("effective_rank", fit.effective_rank);
        self.manifest.note("relative_fit_rms", fit.relative_fit_rms);
        println!(
            "rank {} (requested {}), fit RMS {:.3e}, relative {:.3e}",
            fit.effective_rank,
            fit.requested_rank.map_or("auto".to_string(), |r| r.to_string()),
            fit.fit_rms,
            fit.relative_fit_rms
        );
        self.emit("excitation.csv", |w| Ok(fit.signal.write_csv(w)?))?;
        self.emit_json("prony.json", &PronyReport::from(&fit))?;
        Ok(())
    }

    fn response(&mut self, coeffs: &[KernelCoefficients]) -> Result<ExponentialSignal> {
        let input = self.input()?;
        if let Some(f) = &input.prony {
            self.manifest.note("prony_rank", f.effective_rank);
            self.manifest.note("prony_relative_fit_rms", f.relative_fit_rms);
        }
        let times = self.times();
        let order = self.order();
        let r = self
            .manifest
            .time("evaluate", || evaluate_response(coeffs, &input.signal, order, &times))?;
        self.write_response("response.csv", &r)?;
        Ok(input.signal)
    }

    fn simulate(&mut self) -> Result<()> {
        let coeffs = self.coefficients()?;
        let signal = self.response(&coeffs)?;
        if self.cfg.output.symbolic {
            let order = self.order();
            let s = self.manifest.time("assemble", || assemble_response(&coeffs, &signal, order))?;
            for (i, y) in s.orders.iter().enumerate() {
                let text = y.to_json()?;
                self.emit(&format!("y{}.json", i + 1), |w| Ok(writeln!(w, "{text}")?))?;
            }
            let text = s.total.to_json()?;
            self.emit("total.json", |w| Ok(writeln!(w, "{text}")?))?;
        }
        Ok(())
    }

    fn identify(&mut self) -> Result<()> {
        let (result, record, truth) = self.fit_record()?;
        for (i, c) in result.coeffs.iter().enumerate() {
            self.emit(&format!("c{}.bin", i + 1), |w| Ok(c.write_binary(w)?))?;
        }
        let coefficient_errors = match truth {
            Some(p) => {
                let basis = self.cfg.bases(self.profile)?[0];
                let grids = self.cfg.grids(self.profile)?;
                let mut errs = Vec::new();
                for (i, c) in result.coeffs.iter().enumerate() {
                    let reference = project_coefficients(&p, grids[i], &vec![basis; i + 1])?.coeffs;
                    let diff: f64 = c
                        .data
                        .iter()
                        .zip(&reference.data)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt();
                    errs.push(diff / reference.norm());
                }
                Some(errs)
            }
            None => None,
        };
        let report = FitReport {
            order: self.order(),
            samples: record.len(),
            residual_rms: result.residual_rms,
            relative_residual: result.relative_residual,
            coefficient_errors,
        };
        self.manifest.note("relative_residual", report.relative_residual);
        self.emit_json("fit.json", &report)?;
        Ok(())
    }

    fn predict(&mut self) -> Result<()> {
        let coeffs = self.coefficients()?;
        self.response(&coeffs)?;
        Ok(())
    }

    fn oracle(&mut self) -> Result<()> {
        let p = self.params()?;
        let input = self.input()?;
        let o = self.cfg.output.clone();
        let cfg = IntegratorConfig::rk4(o.integrator_dt, o.horizon, o.dt);
        let traj = self
            .manifest
            .time("rk4", || integrate(&p, |t| input.forcing.at(t), &cfg))?;
        self.emit("trajectory.csv", |w| Ok(traj.write_csv(w)?))?;
        let (times, ys) = self.manifest.time("rk4_orders", || {
            integrate_orders(&p, |t| input.forcing.at(t), o.integrator_dt, o.horizon, o.dt)
        })?;
        self.emit("orders.csv", |w| {
            writeln!(w, "t,y1,y2,y3")?;
            for k in 0..times.len() {
                writeln!(w, "{:.17e},{:.17e},{:.17e},{:.17e}", times[k], ys[0][k], ys[1][k], ys[2][k])?;
            }
            Ok(())
        })?;
        Ok(())
    }

    fn benchmark(&mut self) -> Result<()> {
        let ExcitationBlock::Sinusoid { amplitude, omega } = self.cfg.excitation else {
            bail!("excitation.kind: benchmark needs a sinusoid");
        };
        let p = self.params()?;
        let coeffs = self.coefficients()?;
        let o = &self.cfg.output;
        let cfg = BenchConfig {
            lengths: o.bench_lengths.clone(),
            output_dt: o.dt,
            rk4_dt: o.integrator_dt,
            order: self.order(),
            ..BenchConfig::default()
        };
        let rows = self.manifest.time("benchmark", || benchmark(&p, &coeffs, amplitude, omega, &cfg))?;
        self.emit("bench.csv", |w| Ok(write_benchmark(&rows, w)?))?;
        Ok(())
    }

    fn verify(&mut self) -> Result<bool> {
        let mut checks: Vec<(String, bool, String)> = Vec::new();
        for (i, b) in self.cfg.bases(self.profile)?.iter().enumerate() {
            let g = self.manifest.time(&format!("gram_order{}", i + 1), || b.gram_matrix(1e-3))?;
            let mut dev = 0.0f64;
            for ((r, c), v) in g.row_iter().enumerate().flat_map(|(r, row)| {
                row.iter().copied().enumerate().map(move |(c, v)| ((r, c), v)).collect::<Vec<_>>()
            }) {
                dev = dev.max((v - if r == c { 1.0 } else { 0.0 }).abs());
            }
            checks.push((
                format!("basis order {} orthonormal", i + 1),
                dev <= GRAM_TOL,
                format!("max |G - I| {dev:.2e} (tol {GRAM_TOL:.0e})"),
            ));
        }

        let coeffs = self.coefficients()?;
        let finite = coeffs.iter().all(|c| c.data.iter().all(|v| v.is_finite()));
        checks.push((
            "coefficients finite".into(),
            finite,
            format!("{} kernel tensors", coeffs.len()),
        ));

        let input = self.input()?;
        if let Some(f) = &input.prony {
            checks.push((
                "excitation decomposition".into(),
                f.relative_fit_rms <= PRONY_TOL,
                format!(
                    "rank {} relative fit {:.2e} (tol {PRONY_TOL:.0e})",
                    f.effective_rank, f.relative_fit_rms
                ),
            ));
        }

        let times = self.times();
        let order = self.order();
        let zero = input.signal.scaled(0.0);
        let z = evaluate_response(&coeffs, &zero, order, &times)?;
        let zmax = z.total().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        checks.push(("zero excitation".into(), zmax == 0.0, format!("max |y| {zmax:e}")));

        if let Ok(p) = self.params() {
            let r = self
                .manifest
                .time("evaluate", || evaluate_response(&coeffs, &input.signal, order, &times))?;
            let o = self.cfg.output.clone();
            let traj = self.manifest.time("rk4", || {
                integrate(&p, |t| input.forcing.at(t), &IntegratorConfig::rk4(o.integrator_dt, o.horizon, o.dt))
            })?;
            let e = relative_rms(&r.total(), &traj.y);
            let tol = self.cfg.verify.response_tolerance;
            checks.push((
                "closed form against RK4".into(),
                e <= tol,
                format!("relative RMS {:.2}% (tol {:.2}%)", 100.0 * e, 100.0 * tol),
            ));
        }

        let mut pass = true;
        let mut lines = Vec::new();
        for (name, ok, detail) in &checks {
            pass &= ok;
            let line = format!("{} {name}: {detail}", if *ok { "PASS" } else { "FAIL" });
            println!("{line}");
            lines.push(line);
        }
        self.manifest.note("passed", pass);
        self.emit("verify.txt", |w| {
            for l in &lines {
                writeln!(w, "{l}")?;
            }
            Ok(())
        })?;
        Ok(pass)
    }
}
