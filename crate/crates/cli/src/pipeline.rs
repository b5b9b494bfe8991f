use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;
use wavechain_core::chain::{
    self, chaos_defect, evolve_ensemble, sample_ensemble, summarize, BinSpec, ChainEnsemble, ChainForce,
    FractionalParams,
};
use wavechain_core::kinetic::{
    compare_spectra, default_omega_floor, energy_moment, write_spectrum, CollisionOperator, KineticScheme,
    KineticSolver, Profile, ResonanceRule, Spectrum, TorusGrid,
};
use wavechain_core::vlasov::{self, meanfield_distance, MeanFieldReport, PhaseDensity, VlasovGrid, VlasovSolver};
use wavechain_core::wave::{
    self, empirical_spectrum, integrate_ensemble, sample_initial, AmplitudeState, ModelParams, Scheme, WaveModel,
};
use wavechain_core::LatticeSpec;

use crate::config::{Pipeline, RunConfig, SpectrumProfile};
use crate::manifest::{collect_files, RunManifest, Versions};
use crate::{oracle, HarnessError};

/// Named pass/fail assertion evaluated at the end of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Check {
            name: name.into(),
            passed,
            detail,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    /// The pipeline's designated scalar, as aggregated by sweeps.
    pub metric: f64,
}

impl RunOutcome {
    pub fn failed_checks(&self) -> Vec<&Check> {
        self.manifest.checks.iter().filter(|c| !c.passed).collect()
    }
}

struct PipelineResult {
    metric: f64,
    metrics: serde_json::Value,
    checks: Vec<Check>,
}

/// Executes the configured pipeline into `out`, then writes the manifest.
pub fn run(cfg: &RunConfig, out: &Path) -> Result<RunOutcome, HarnessError> {
    cfg.validate()?;
    std::fs::create_dir_all(out).map_err(|e| HarnessError::io(out.display(), e))?;
    let started = chrono::Utc::now().to_rfc3339();
    log::info!("{} -> {}", cfg.pipeline.name(), out.display());
    let result = match cfg.pipeline {
        Pipeline::WtSim => wt_sim(cfg, out)?,
        Pipeline::WtKinetic => wt_kinetic(cfg, out)?,
        Pipeline::WtCompare => wt_compare(cfg, out)?,
        Pipeline::ChainSim => chain_sim(cfg, out)?,
        Pipeline::Vlasov => vlasov_run(cfg, out)?,
        Pipeline::MfCompare => mf_compare(cfg, out)?,
        Pipeline::OracleSuite => oracle_suite(cfg, out)?,
    };
    let mut metrics = result.metrics;
    metrics["metric"] = json!(result.metric);
    let manifest = RunManifest {
        pipeline: cfg.pipeline.name().into(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        started,
        finished: chrono::Utc::now().to_rfc3339(),
        versions: Versions::current(),
        files: collect_files(out)?,
        metrics,
        checks: result.checks,
    };
    manifest.write(out)?;
    Ok(RunOutcome {
        dir: out.to_path_buf(),
        manifest,
        metric: result.metric,
    })
}

struct Csv {
    path: PathBuf,
    w: std::io::BufWriter<std::fs::File>,
}

impl Csv {
    fn create(path: PathBuf, comments: &[&str], header: &str) -> Result<Self, HarnessError> {
        let file = std::fs::File::create(&path).map_err(|e| HarnessError::io(path.display(), e))?;
        let mut csv = Csv {
            w: std::io::BufWriter::new(file),
            path,
        };
        for c in comments {
            csv.line(&format!("# {c}"))?;
        }
        csv.line(header)?;
        Ok(csv)
    }

    fn line(&mut self, text: &str) -> Result<(), HarnessError> {
        writeln!(self.w, "{text}").map_err(|e| HarnessError::io(self.path.display(), e))
    }

    fn row(&mut self, fields: &[f64]) -> Result<(), HarnessError> {
        let text: Vec<String> = fields.iter().map(|v| format!("{v:e}")).collect();
        self.line(&text.join(","))
    }

    fn finish(mut self) -> Result<(), HarnessError> {
        self.w.flush().map_err(|e| HarnessError::io(self.path.display(), e))
    }
}

fn write_json(path: PathBuf, value: &impl Serialize) -> Result<(), HarnessError> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    std::fs::write(&path, text + "\n").map_err(|e| HarnessError::io(path.display(), e))
}

fn numerical(e: wavechain_core::Error, last_good: Option<PathBuf>) -> HarnessError {
    match HarnessError::from(e) {
        HarnessError::Numerical { source, .. } => HarnessError::Numerical { source, last_good },
        other => other,
    }
}

/// Torus representative of `kappa` in `[−1/2, 1/2)`, so profiles see the
/// same argument whether a node is stored as `hk` or as `(k mod N)/N`.
fn centred(kappa: &[f64]) -> Vec<f64> {
    kappa.iter().map(|k| k - (k + 0.5).floor()).collect()
}

fn profile_fn(p: &SpectrumProfile, floor: f64) -> impl Fn(&[f64]) -> f64 + '_ {
    move |k: &[f64]| p.eval(&centred(k), floor)
}

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum::<f64>() / v.len() as f64
}

fn wave_setup(cfg: &RunConfig) -> Result<(LatticeSpec, ModelParams, Vec<AmplitudeState>), HarnessError> {
    let w = cfg.wave()?;
    let spec = LatticeSpec::new(w.dim, w.half_width)?;
    let params = ModelParams::new(spec, w.lambda)?;
    let floor = default_omega_floor();
    let ens = wave::EnsembleSpec::from_profile(&spec, w.replicas, cfg.seed, profile_fn(&w.initial, floor));
    let states = sample_initial(&ens, &spec)?;
    Ok((spec, params, states))
}

/// Integrates the ensemble `steps` steps of size `dt` in chunks of
/// `every`, calling `record` after each chunk. On failure the last good
/// replica-0 state is written to `dir` and its path reported.
fn drive_wave(
    dir: &Path,
    seed: u64,
    params: &ModelParams,
    mut states: Vec<AmplitudeState>,
    (dt, steps, every): (f64, usize, usize),
    scheme: Scheme,
    mut record: impl FnMut(&[AmplitudeState]) -> Result<(), HarnessError>,
) -> Result<Vec<AmplitudeState>, HarnessError> {
    record(&states)?;
    let mut done = 0;
    while done < steps {
        let chunk = every.min(steps - done);
        match integrate_ensemble(&states, params, dt, chunk, scheme) {
            Ok(next) => states = next,
            Err(e) => {
                let path = dir.join("last_good_replica0.csv");
                wave::write_snapshot(&path, &states[0], params, seed)?;
                let e = match e {
                    wavechain_core::Error::NonFinite { step, time } => {
                        wavechain_core::Error::NonFinite { step: step + done, time }
                    }
                    other => other,
                };
                return Err(numerical(e, Some(path)));
            }
        }
        done += chunk;
        record(&states)?;
    }
    Ok(states)
}

fn spectrum_csv(dir: &Path, spec: &LatticeSpec) -> Result<Csv, HarnessError> {
    let ks: Vec<String> = (0..spec.dim()).map(|j| format!("k{j}")).collect();
    Csv::create(
        dir.join("spectrum.csv"),
        &[
            "ensemble mean of |a(k,+1)|^2 per recorded time",
            "t: time units of the lattice equation; k: integer wavenumber",
        ],
        &format!("t,{},n", ks.join(",")),
    )
}

fn wt_sim(cfg: &RunConfig, dir: &Path) -> Result<PipelineResult, HarnessError> {
    let w = cfg.wave()?;
    let (spec, params, states) = wave_setup(cfg)?;
    let steps = w.steps.expect("validated");
    let every = w.record_every.unwrap_or(steps.max(1));
    let mut spectra = spectrum_csv(dir, &spec)?;
    let mut energy = Csv::create(
        dir.join("energy.csv"),
        &["replica means; invariant = H1 + (lambda/3) Re H2 is conserved by the flow"],
        "t,h1,re_h2,invariant",
    )?;
    let mut model = WaveModel::new(params);
    let mut series: Vec<Vec<f64>> = Vec::new();
    let mut invariants = Vec::new();
    let scheme = w.scheme.unwrap_or(Scheme::ExponentialRk4);
    let last = drive_wave(dir, cfg.seed, &params, states, (w.dt, steps, every), scheme, |states| {
        let emp = empirical_spectrum(states, &spec)?;
        let t = states[0].t;
        for i in 0..spec.len() {
            let k = spec.wavenumber(i);
            let node = emp.grid().node_of_wavenumber(&k);
            let mut row = vec![t];
            row.extend(k.iter().map(|&c| c as f64));
            row.push(emp.values()[node]);
            spectra.row(&row)?;
        }
        series.push(emp.values().to_vec());
        let (mut h1, mut h2) = (0.0, 0.0);
        for s in states {
            let (a, b) = model.energy_terms(s)?;
            h1 += a;
            h2 += b;
        }
        let n = states.len() as f64;
        let inv = h1 / n + params.lambda() / 3.0 * h2 / n;
        invariants.push(inv);
        energy.row(&[t, h1 / n, h2 / n, inv])
    })?;
    spectra.finish()?;
    energy.finish()?;
    wave::write_snapshot(&dir.join("final_replica0.csv"), &last[0], &params, cfg.seed)?;
    let first = &series[0];
    let change = series
        .iter()
        .map(|s| s.iter().zip(first).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    let scale = first.iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let inv_drift = invariants
        .iter()
        .map(|v| (v - invariants[0]).abs())
        .fold(0.0, f64::max)
        / invariants[0].abs().max(f64::MIN_POSITIVE);
    let mut checks = vec![Check::new(
        "invariant-drift",
        inv_drift < 1e-6,
        format!("max relative drift {inv_drift:e}"),
    )];
    if params.lambda() == 0.0 {
        checks.push(Check::new(
            "linear-spectrum-constant",
            change <= 1e-12 * scale,
            format!("max |n(t) - n(0)| = {change:e}"),
        ));
    }
    Ok(PipelineResult {
        metric: change,
        metrics: json!({"max_spectrum_change": change, "invariant_drift": inv_drift, "t_final": last[0].t}),
        checks,
    })
}

fn kinetic_rule(cfg: &RunConfig) -> Result<ResonanceRule, HarnessError> {
    let k = cfg.kinetic()?;
    let profile = k.profile.unwrap_or(Profile::Gaussian);
    Ok(match k.omega_floor {
        Some(floor) => ResonanceRule::with_floor(k.epsilon, profile, floor)?,
        None => ResonanceRule::new(k.epsilon, profile)?,
    })
}

/// Evolves `f0` to `kinetic.tau`, writing a per-step energy table. On
/// blow-up the last good spectrum is written and its path reported.
fn drive_kinetic(cfg: &RunConfig, dir: &Path, f0: &Spectrum) -> Result<(Spectrum, f64, KineticSolver), HarnessError> {
    let k = cfg.kinetic()?;
    let op = CollisionOperator::new(*f0.grid(), kinetic_rule(cfg)?);
    let solver = KineticSolver::new(op, k.scheme.unwrap_or(KineticScheme::Rk4), k.bound)?;
    let mut table = Csv::create(
        dir.join("kinetic_energy.csv"),
        &["energy = M^-d sum omega f; clipped = mass removed by positivity clipping"],
        "tau,energy,clipped",
    )?;
    let mut f = f0.clone();
    let mut clipped = 0.0;
    table.row(&[0.0, energy_moment(&f), 0.0])?;
    if k.tau > 0.0 {
        let dtau = k.tau / k.steps as f64;
        for _ in 0..k.steps {
            match solver.step(&f, dtau) {
                Ok((next, report)) => {
                    clipped += report.clipped_mass;
                    f = next;
                }
                Err(e) => {
                    let path = dir.join("last_good_kinetic.csv");
                    write_spectrum(&path, &f, &json!({"reason": "last state before failure"}))?;
                    table.finish()?;
                    return Err(numerical(e, Some(path)));
                }
            }
            table.row(&[f.tau(), energy_moment(&f), clipped])?;
        }
    }
    table.finish()?;
    Ok((f, clipped, solver))
}

fn wt_kinetic(cfg: &RunConfig, dir: &Path) -> Result<PipelineResult, HarnessError> {
    let k = cfg.kinetic()?;
    let grid = TorusGrid::new(k.dim, k.points.expect("validated"))?;
    let rule = kinetic_rule(cfg)?;
    let init = k.initial.as_ref().expect("validated");
    let f0 = Spectrum::from_fn(grid, 0.0, profile_fn(init, rule.omega_floor()))?;
    let meta = json!({"epsilon": k.epsilon, "seed": cfg.seed});
    write_spectrum(&dir.join("kinetic_initial.csv"), &f0, &meta)?;
    let (f, clipped, solver) = drive_kinetic(cfg, dir, &f0)?;
    let op = solver.operator();
    write_spectrum(&dir.join("kinetic_final.csv"), &f, &meta)?;
    let residual = l1(&op.apply(&f)?);
    let initial_residual = l1(&op.apply(&f0)?);
    let e0 = energy_moment(&f0);
    let drift = (energy_moment(&f) - e0).abs() / e0.abs().max(f64::MIN_POSITIVE);
    Ok(PipelineResult {
        metric: residual,
        metrics: json!({
            "collision_l1_initial": initial_residual,
            "collision_l1_final": residual,
            "energy_relative_drift": drift,
            "clipped_mass": clipped,
        }),
        checks: vec![Check::new("no-clipping", clipped == 0.0, format!("clipped mass {clipped:e}"))],
    })
}

fn wt_compare(cfg: &RunConfig, dir: &Path) -> Result<PipelineResult, HarnessError> {
    let w = cfg.wave()?;
    let k = cfg.kinetic()?;
    let (spec, params, states) = wave_setup(cfg)?;
    let t_final = k.tau / (w.lambda * w.lambda);
    let steps = (t_final / w.dt).ceil().max(1.0) as usize;
    let dt = t_final / steps as f64;
    let every = w.record_every.unwrap_or(steps);
    let mut spectra = spectrum_csv(dir, &spec)?;
    let last = drive_wave(
        dir,
        cfg.seed,
        &params,
        states,
        (dt, steps, every),
        w.scheme.unwrap_or(Scheme::ExponentialRk4),
        |states| {
            let emp = empirical_spectrum(states, &spec)?;
            for i in 0..spec.len() {
                let kv = spec.wavenumber(i);
                let mut row = vec![states[0].t];
                row.extend(kv.iter().map(|&c| c as f64));
                row.push(emp.values()[emp.grid().node_of_wavenumber(&kv)]);
                spectra.row(&row)?;
            }
            Ok(())
        },
    )?;
    spectra.finish()?;
    let empirical = empirical_spectrum(&last, &spec)?.with_tau(k.tau);
    let rule = kinetic_rule(cfg)?;
    let grid = TorusGrid::new(spec.dim(), k.points.unwrap_or(spec.points()))?;
    let f0 = Spectrum::from_fn(grid, 0.0, profile_fn(&w.initial, rule.omega_floor()))?;
    let (fk, clipped, _) = drive_kinetic(cfg, dir, &f0)?;
    let meta = json!({"lambda": w.lambda, "t": t_final, "tau": k.tau, "seed": cfg.seed});
    write_spectrum(&dir.join("empirical.csv"), &empirical, &meta)?;
    write_spectrum(&dir.join("kinetic.csv"), &fk, &meta)?;
    let report = compare_spectra(&fk, &empirical)?;
    let mut table = Csv::create(
        dir.join("distance.csv"),
        &["per-node comparison on the kinetic grid; diff = empirical - kinetic"],
        &format!(
            "{},kinetic,empirical,diff",
            (0..spec.dim()).map(|j| format!("node{j}")).collect::<Vec<_>>().join(",")
        ),
    )?;
    for m in &report.modes {
        let mut row = m.node.clone();
        row.extend([m.reference, m.other, m.diff]);
        table.row(&row)?;
    }
    table.finish()?;
    let initial = compare_spectra(&f0, &empirical)?;
    let summary = json!({
        "l1": report.l1, "l2": report.l2, "linf": report.linf,
        "l1_vs_initial": initial.l1,
        "lambda": w.lambda, "t": t_final, "tau": k.tau, "clipped_mass": clipped,
    });
    write_json(dir.join("distance.json"), &summary)?;
    Ok(PipelineResult {
        metric: report.l1,
        metrics: summary,
        checks: vec![],
    })
}

fn chain_spec(cfg: &RunConfig) -> Result<(LatticeSpec, FractionalParams), HarnessError> {
    let c = cfg.chain()?;
    Ok((LatticeSpec::with_points(c.dim, c.points)?, FractionalParams::new(c.dim, c.alpha)?))
}

fn chain_ensemble(cfg: &RunConfig, spec: &LatticeSpec) -> Result<ChainEnsemble, HarnessError> {
    let c = cfg.chain()?;
    let ens = chain::EnsembleSpec {
        replicas: c.replicas,
        seed: cfg.seed,
        law: c.law.clone(),
    };
    Ok(sample_ensemble(&ens, spec)?)
}

fn chain_sim(cfg: &RunConfig, dir: &Path) -> Result<PipelineResult, HarnessError> {
    let c = cfg.chain()?;
    let (spec, fp) = chain_spec(cfg)?;
    let mut ens = chain_ensemble(cfg, &spec)?;
    let initial = ens.clone();
    let every = c.record_every.unwrap_or(c.steps.max(1));
    let mut force = ChainForce::new(spec, &fp, c.method)?;
    let mut table = Csv::create(
        dir.join("energy.csv"),
        &["energy: replica mean of sum v^2/2 - sum r F/2; momentum: max over replicas of |sum v|"],
        "t,energy,momentum",
    )?;
    let mut times = Vec::new();
    let mut energies = Vec::new();
    let mut momenta = Vec::new();
    let mut record = |ens: &ChainEnsemble, table: &mut Csv| -> Result<(), HarnessError> {
        let mut e = 0.0;
        for s in &ens.states {
            e += force.energy(s)?;
        }
        e /= ens.states.len() as f64;
        let p = ens.states.iter().map(|s| s.total_momentum().abs()).fold(0.0, f64::max);
        let t = ens.states[0].t;
        times.push(t);
        energies.push(e);
        momenta.push(p);
        table.row(&[t, e, p])
    };
    record(&ens, &mut table)?;
    let mut done = 0;
    while done < c.steps {
        let chunk = every.min(c.steps - done);
        ens = evolve_ensemble(&ens, &fp, c.method, c.dt, chunk)?;
        done += chunk;
        record(&ens, &mut table)?;
    }
    table.finish()?;
    chain::write_snapshot(&dir.join("final_replica0.csv"), &ens.states[0], &spec)?;
    let e0 = energies[0];
    let scale = e0.abs().max(f64::MIN_POSITIVE);
    let excursion = energies.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max) / scale;
    let drift = secular_drift(&times, &energies) / scale;
    let momentum_drift = momenta.iter().map(|p| (p - momenta[0]).abs()).fold(0.0, f64::max);
    let mut metrics = json!({
        "energy_secular_drift": drift,
        "energy_max_excursion": excursion,
        "momentum_drift": momentum_drift,
        "summary_initial": summarize(&initial)?,
        "summary_final": summarize(&ens)?,
    });
    if let Some(ch) = &c.chaos {
        let bins = BinSpec {
            cells: spec.points(),
            r_range: ch.r_range,
            r_bins: ch.r_bins,
            v_range: ch.v_range,
            v_bins: ch.v_bins,
        };
        let d0 = chaos_defect(&initial, ch.sites.0, ch.sites.1, &bins)?;
        let d1 = chaos_defect(&ens, ch.sites.0, ch.sites.1, &bins)?;
        metrics["chaos_defect_initial"] = json!(d0);
        metrics["chaos_defect_final"] = json!(d1);
    }
    write_json(dir.join("summary.json"), &metrics)?;
    Ok(PipelineResult {
        metric: drift,
        metrics,
        checks: vec![
            Check::new("energy-secular-drift", drift < 1e-6, format!("{drift:e}")),
            Check::new("momentum-drift", momentum_drift < 1e-10, format!("{momentum_drift:e}")),
        ],
    })
}

/// `|slope| · (t_end − t_0)` of the least-squares line through `(t, e)`.
pub fn secular_drift(t: &[f64], e: &[f64]) -> f64 {
    let n = t.len() as f64;
    if t.len() < 2 {
        return 0.0;
    }
    let tm = t.iter().sum::<f64>() / n;
    let em = e.iter().sum::<f64>() / n;
    let sxy: f64 = t.iter().zip(e).map(|(a, b)| (a - tm) * (b - em)).sum();
    let sxx: f64 = t.iter().map(|a| (a - tm).powi(2)).sum();
    (sxy / sxx).abs() * (t[t.len() - 1] - t[0])
}

fn vlasov_grid(cfg: &RunConfig, dim: usize) -> Result<VlasovGrid, HarnessError> {
    let v = cfg.vlasov()?;
    Ok(VlasovGrid::new(dim, v.x_points, (v.r_max, v.r_points), (v.v_max, v.v_points))?)
}

/// Runs the solver, writing per-step diagnostics; returns the final density
/// and the relative mass drift (escaped mass counted as retained).
fn drive_vlasov(cfg: &RunConfig, dir: &Path, g: &mut PhaseDensity, fp: FractionalParams) -> Result<(f64, f64), HarnessError> {
    let v = cfg.vlasov()?;
    let mut solver = VlasovSolver::new(g.grid, fp)?;
    let mut table = Csv::create(
        dir.join("vlasov_diagnostics.csv"),
        &["mass = integral of g; escaped = cumulative mass through the (r, v) box edges"],
        "t,mass,escaped,max,courant_r,courant_v",
    )?;
    let m0 = g.mass();
    let mut escaped = 0.0;
    table.row(&[g.t, m0, 0.0, g.max(), 0.0, 0.0])?;
    for _ in 0..v.steps {
        let d = solver.step(g, v.dt)?;
        escaped += d.escaped_mass;
        table.row(&[g.t, d.mass_after, escaped, d.max_after, d.courant_r, d.courant_v])?;
    }
    table.finish()?;
    Ok(((g.mass() + escaped - m0).abs() / m0.max(f64::MIN_POSITIVE), escaped))
}

fn vlasov_run(cfg: &RunConfig, dir: &Path) -> Result<PipelineResult, HarnessError> {
    let v = cfg.vlasov()?;
    let alpha = v.alpha.expect("validated");
    let law = v.law.as_ref().expect("validated");
    let fp = FractionalParams::new(1, alpha)?;
    let grid = vlasov_grid(cfg, 1)?;
    let mut g = PhaseDensity::from_law(grid, law)?;
    let g0_min_ok = g.values.iter().all(|&x| x >= 0.0);
    let (drift, escaped) = drive_vlasov(cfg, dir, &mut g, fp)?;
    vlasov::write_density(&dir.join("density.bin"), &g, alpha)?;
    vlasov::write_moments(&dir.join("moments.csv"), &g)?;
    let allowed = 1e-8 * (v.steps as f64 / 100.0).max(1.0);
    let positive = g0_min_ok && g.values.iter().all(|&x| x >= 0.0);
    Ok(PipelineResult {
        metric: drift,
        metrics: json!({"mass_drift": drift, "escaped_mass": escaped, "t_final": g.t}),
        checks: vec![
            Check::new("mass-drift", drift < allowed, format!("{drift:e} (allowed {allowed:e})")),
            Check::new("positivity", positive, String::new()),
        ],
    })
}

fn observables_csv(path: PathBuf, report: &MeanFieldReport) -> Result<(), HarnessError> {
    let names = vlasov::OBSERVABLES;
    let header: Vec<String> = names
        .iter()
        .map(|n| format!("chain_{n}"))
        .chain(names.iter().map(|n| format!("vlasov_{n}")))
        .collect();
    let mut csv = Csv::create(
        path,
        &["per x-cell means of r, v, r^2, v^2, r v; chain = ensemble, vlasov = density"],
        &format!("cell,{}", header.join(",")),
    )?;
    for (c, (a, b)) in report.ensemble.iter().zip(&report.density).enumerate() {
        let mut row = vec![c as f64];
        row.extend(a);
        row.extend(b);
        csv.row(&row)?;
    }
    csv.finish()
}

fn mf_compare(cfg: &RunConfig, dir: &Path) -> Result<PipelineResult, HarnessError> {
    let c = cfg.chain()?;
    let (spec, fp) = chain_spec(cfg)?;
    let ens0 = chain_ensemble(cfg, &spec)?;
    let grid = vlasov_grid(cfg, c.dim)?;
    let law = cfg.vlasov()?.law.clone().unwrap_or_else(|| c.law.clone());
    let mut g = PhaseDensity::from_law(grid, &law)?;
    let initial = meanfield_distance(&g, &ens0)?;
    observables_csv(dir.join("observables_initial.csv"), &initial)?;
    let ens = evolve_ensemble(&ens0, &fp, c.method, c.dt, c.steps)?;
    let (drift, escaped) = drive_vlasov(cfg, dir, &mut g, fp)?;
    g.t = ens.states[0].t;
    let report = meanfield_distance(&g, &ens)?;
    observables_csv(dir.join("observables_final.csv"), &report)?;
    let summary = json!({
        "points": spec.points(),
        "replicas": c.replicas,
        "t": g.t,
        "combined_l2": report.combined_l2,
        "combined_l2_initial": initial.combined_l2,
        "observables": report.observables,
        "observables_initial": initial.observables,
        "vlasov_mass_drift": drift,
        "vlasov_escaped_mass": escaped,
    });
    write_json(dir.join("distance.json"), &summary)?;
    Ok(PipelineResult {
        metric: report.combined_l2,
        metrics: summary,
        checks: vec![],
    })
}

fn oracle_suite(cfg: &RunConfig, dir: &Path) -> Result<PipelineResult, HarnessError> {
    let results = oracle::run_all(cfg.seed)?;
    let mut csv = Csv::create(
        dir.join("oracles.csv"),
        &["fast path vs direct summation on seeded random inputs; error relative to max |reference|"],
        "name,relative_error,tolerance,passed",
    )?;
    for r in &results {
        csv.line(&format!("{},{:e},{:e},{}", r.name, r.relative_error, r.tolerance, r.passed))?;
    }
    csv.finish()?;
    let worst = results.iter().map(|r| r.relative_error).fold(0.0, f64::max);
    Ok(PipelineResult {
        metric: worst,
        metrics: json!({"max_relative_error": worst, "oracles": results}),
        checks: results
            .iter()
            .map(|r| Check::new(&r.name, r.passed, format!("{:e} <= {:e}", r.relative_error, r.tolerance)))
            .collect(),
    })
}
