//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Exits non-zero only when a criterion cannot be evaluated (panic or
//! harness error), or on any FAIL when `ACCEPTANCE_STRICT` is set.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wavechain_cli::{run, run_sweep, with_workers, RunConfig};
use wavechain_core::chain::{
    chaos_defect, evolve_ensemble, sample_ensemble, BinSpec, ChainEnsemble, ChainForce, ChainState, EnsembleSpec,
    ForceMethod, FractionalParams, PhaseLaw, VerletIntegrator,
};
use wavechain_core::kinetic::{collision, default_omega_floor, Profile, ResonanceRule, Spectrum, TorusGrid};
use wavechain_core::lattice::{dft, inverse_dft, GridField};
use wavechain_core::vlasov::{sigma_field, PhaseDensity, VlasovGrid, VlasovSolver};
use wavechain_core::wave::{integrate, rhs, AmplitudeState, ModelParams, Scheme, WaveModel};
use wavechain_core::LatticeSpec;

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;

const I: Complex64 = Complex64::new(0.0, 1.0);

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn crand(r: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5)
}

fn rel_err(a: &[Complex64], b: &[Complex64]) -> f64 {
    let scale = b.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale
}

fn omega_bar(k: &[i64], n: usize) -> f64 {
    k.iter().map(|&kj| (2.0 * PI * kj as f64 / n as f64).sin().powi(2)).sum()
}

fn omega(kappa: &[f64]) -> f64 {
    kappa.iter().map(|&k| (2.0 * PI * k).sin().powi(2)).sum()
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

// 1

fn fourier_fidelity() -> Outcome {
    let mut r = rng(1);
    let (mut fwd, mut back, mut pars) = (0.0f64, 0.0f64, 0.0f64);
    for dim in [1usize, 2] {
        for half in 1..=8 {
            let spec = LatticeSpec::new(dim, half)?;
            let n = spec.points();
            let h = 1.0 / n as f64;
            let f = GridField {
                values: (0..spec.len()).map(|_| crand(&mut r)).collect(),
            };
            let fast = dft(&spec, &f)?;
            let direct: Vec<Complex64> = (0..spec.len())
                .map(|ki| {
                    let k = spec.wavenumber(ki);
                    let mut s = Complex64::default();
                    for xi in 0..spec.len() {
                        let x = spec.site_coords(xi);
                        let phase: f64 = k.iter().zip(&x).map(|(&a, &b)| a as f64 * b as f64 * h).sum();
                        s += f.values[xi] * Complex64::from_polar(1.0, -2.0 * PI * phase);
                    }
                    s * h.powi(dim as i32)
                })
                .collect();
            fwd = fwd.max(rel_err(&fast.values, &direct));
            back = back.max(rel_err(&inverse_dft(&spec, &fast)?.values, &f.values));
            let lhs: f64 = fast.values.iter().map(|z| z.norm_sqr()).sum();
            let rhs: f64 = h.powi(dim as i32) * f.values.iter().map(|z| z.norm_sqr()).sum::<f64>();
            pars = pars.max((lhs - rhs).abs() / rhs);
        }
    }
    let worst = fwd.max(back).max(pars);
    Ok((
        worst <= 1e-12,
        format!("d in {{1,2}}, D<=8: forward {fwd:.1e}, round trip {back:.1e}, Parseval {pars:.1e} (tol 1e-12)"),
    ))
}

// 2

fn linear_exactness() -> Outcome {
    let mut r = rng(2);
    let (t, steps) = (10.0, 1000);
    let mut modulus = 0.0f64;
    let mut phase = 0.0f64;
    for (dim, half) in [(1, 8), (2, 4)] {
        let spec = LatticeSpec::new(dim, half)?;
        let params = ModelParams::new(spec, 0.0)?;
        let zero = spec.zero_index();
        let mut s = AmplitudeState::zeros(&spec);
        for i in (0..spec.len()).filter(|&i| i != zero) {
            s.plus[i] = crand(&mut r);
            s.minus[i] = crand(&mut r);
        }
        let out = integrate(&s, &params, t / steps as f64, steps, Scheme::ExponentialRk4)?;
        for i in 0..spec.len() {
            modulus = modulus
                .max((out.plus[i].norm() - s.plus[i].norm()).abs())
                .max((out.minus[i].norm() - s.minus[i].norm()).abs());
        }
        for i in (0..spec.len()).filter(|&i| i != zero) {
            let mut single = AmplitudeState::zeros(&spec);
            single.plus[i] = Complex64::new(1.0, 0.0);
            let out = integrate(&single, &params, t / steps as f64, steps, Scheme::ExponentialRk4)?;
            let w = omega_bar(&spec.wavenumber(i), spec.points());
            phase = phase.max((out.plus[i] - Complex64::from_polar(1.0, -w * t)).norm());
        }
    }
    Ok((
        modulus <= 1e-14 && phase <= 1e-12,
        format!("t=10: max | |a(t)| - |a(0)| | = {modulus:.1e} (tol 1e-14), single-mode phase error {phase:.1e}"),
    ))
}

// 3

fn brute_rhs(s: &AmplitudeState, spec: &LatticeSpec, lambda: f64) -> AmplitudeState {
    let n = spec.points() as i64;
    let len = spec.len();
    let zero = spec.zero_index();
    let w: Vec<f64> = (0..len).map(|i| omega_bar(&spec.wavenumber(i), spec.points())).collect();
    let amp = |i: usize, sg: i64| if sg > 0 { s.plus[i] } else { s.minus[i] };
    let mut out = AmplitudeState::zeros(spec);
    for k in (0..len).filter(|&k| k != zero) {
        let kv = spec.wavenumber(k);
        for sg in [1i64, -1] {
            let mut acc = Complex64::default();
            for s1 in [1i64, -1] {
                for s2 in [1i64, -1] {
                    for k1 in (0..len).filter(|&i| i != zero) {
                        for k2 in (0..len).filter(|&i| i != zero) {
                            let (a, b) = (spec.wavenumber(k1), spec.wavenumber(k2));
                            if (0..kv.len()).all(|j| (sg * kv[j] - s1 * a[j] - s2 * b[j]).rem_euclid(n) == 0) {
                                acc += amp(k1, s1) * amp(k2, s2) / (8.0 * w[k] * w[k1] * w[k2]);
                            }
                        }
                    }
                }
            }
            let h_d = (1.0 / n as f64).powi(kv.len() as i32);
            let v = -I * sg as f64 * (w[k] * amp(k, sg) + lambda * h_d * acc);
            if sg > 0 {
                out.plus[k] = v
            } else {
                out.minus[k] = v
            }
        }
    }
    out
}

fn rhs_equivalence() -> Outcome {
    let mut r = rng(3);
    let mut worst = 0.0f64;
    for (dim, half) in [(1, 1), (1, 2), (1, 3), (2, 1), (2, 2), (2, 3)] {
        let spec = LatticeSpec::new(dim, half)?;
        let params = ModelParams::new(spec, 0.37)?;
        let zero = spec.zero_index();
        let mut s = AmplitudeState::zeros(&spec);
        for i in (0..spec.len()).filter(|&i| i != zero) {
            s.plus[i] = crand(&mut r);
            s.minus[i] = crand(&mut r);
        }
        let fast = rhs(&s, &params)?;
        let slow = brute_rhs(&s, &spec, 0.37);
        let join = |a: &AmplitudeState| [a.plus.clone(), a.minus.clone()].concat();
        worst = worst.max(rel_err(&join(&fast), &join(&slow)));
    }
    // A single edge mode on N=7 may only feed the wavenumbers its square wraps to.
    let spec = LatticeSpec::new(1, 3)?;
    let mut s = AmplitudeState::zeros(&spec);
    s.plus[spec.wavenumber_index(&[3])] = Complex64::new(0.3, -0.7);
    let nl = WaveModel::new(ModelParams::new(spec, 0.5)?).nonlinear_rhs(&s)?;
    let slow = brute_rhs(&s, &spec, 0.5);
    let mut leak = 0.0f64;
    let mut umklapp = 0.0f64;
    for i in 0..spec.len() {
        let k = spec.wavenumber(i)[0];
        let lin = -I * omega_bar(&[k], 7) * s.plus[i];
        let expected_plus = slow.plus[i] - lin;
        let expected_minus = slow.minus[i] + I * omega_bar(&[k], 7) * s.minus[i];
        if k == -1 {
            umklapp = umklapp.max((nl.plus[i] - expected_plus).norm());
        } else {
            leak = leak.max(nl.plus[i].norm());
        }
        if k == 1 {
            umklapp = umklapp.max((nl.minus[i] - expected_minus).norm());
        } else {
            leak = leak.max(nl.minus[i].norm());
        }
    }
    let fed = nl.plus[spec.wavenumber_index(&[-1])].norm();
    Ok((
        worst <= 1e-12 && leak <= 1e-15 && umklapp <= 1e-15 && fed > 0.0,
        format!(
            "D<=3, d in {{1,2}}: max rel {worst:.1e} (tol 1e-12); edge mode k=3 on N=7 feeds k=-1 ({fed:.2e}), leak elsewhere {leak:.1e}"
        ),
    ))
}

// 4, 5

fn brute_collision(f: &Spectrum, rule: &ResonanceRule) -> Vec<f64> {
    let g = *f.grid();
    assert_eq!(g.dim(), 1);
    let m = g.points();
    let w: Vec<f64> = (0..m).map(|j| omega(&[j as f64 / m as f64])).collect();
    let floor = rule.omega_floor();
    let v = f.values();
    (0..m)
        .map(|k| {
            if w[k] < floor {
                return 0.0;
            }
            let mut total = 0.0;
            for k1 in (0..m).filter(|&j| w[j] >= floor) {
                let k2 = (k + m - k1) % m;
                if w[k2] >= floor {
                    total += rule.delta(w[k] - w[k1] - w[k2]) / (8.0 * w[k] * w[k1] * w[k2])
                        * (v[k1] * v[k2] - v[k] * v[k1] - v[k] * v[k2]);
                }
                let k2 = (k1 + m - k) % m;
                if w[k2] >= floor {
                    total -= 2.0 * rule.delta(w[k1] - w[k] - w[k2]) / (8.0 * w[k] * w[k1] * w[k2])
                        * (v[k2] * v[k] - v[k] * v[k1] - v[k1] * v[k2]);
                }
            }
            total / m as f64
        })
        .collect()
}

fn rayleigh_jeans() -> Outcome {
    let grid = TorusGrid::new(1, 32)?;
    let floor = default_omega_floor();
    let f = Spectrum::from_fn(grid, 0.0, |k| {
        let w = omega(k);
        if w < floor {
            0.0
        } else {
            1.0 / w
        }
    })?;
    let mut norms = vec![];
    for eps in [0.04, 0.02, 0.01, 0.005] {
        let c = collision(&f, &ResonanceRule::new(eps, Profile::Gaussian)?)?;
        norms.push(c.iter().map(|x| x.abs()).sum::<f64>() / 32.0);
    }
    // the residual is near round-off, so the operator is checked on generic data
    let mut r = rng(4);
    let generic = Spectrum::new(grid, (0..32).map(|_| r.random::<f64>()).collect(), 0.0)?;
    let rule = ResonanceRule::new(0.04, Profile::Gaussian)?;
    let fast = collision(&generic, &rule)?;
    let slow = brute_collision(&generic, &rule);
    let scale = slow.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let oracle = fast.iter().zip(&slow).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;
    let monotone = norms.windows(2).all(|w| w[1] < w[0]);
    Ok((
        monotone && oracle <= 1e-12,
        format!("M=32, eps 0.04..0.005: |C[T/w]|_1 = {}; operator vs pair loop {oracle:.1e}", sci(&norms)),
    ))
}

fn energy_moment_refinement() -> Outcome {
    let mut rel = vec![];
    for (eps, m) in [(0.2, 16), (0.1, 32), (0.05, 64), (0.025, 128)] {
        let grid = TorusGrid::new(1, m)?;
        let f = Spectrum::from_fn(grid, 0.0, |k| omega(k).powi(2))?;
        let c = collision(&f, &ResonanceRule::new(eps, Profile::Gaussian)?)?;
        let w: Vec<f64> = (0..m).map(|j| omega(&[j as f64 / m as f64])).collect();
        let num: f64 = w.iter().zip(&c).map(|(a, b)| a * b).sum();
        let den: f64 = w.iter().zip(f.values()).map(|(a, b)| a * b).sum();
        rel.push(num.abs() / den);
    }
    let monotone = rel.windows(2).all(|w| w[1] < w[0]);
    Ok((
        monotone,
        format!("f=w^2, (eps,M) = (0.2,16)..(0.025,128): |sum w C| / sum w f = {}", sci(&rel)),
    ))
}

// 6

fn kinetic_limit(scratch: &Path) -> Outcome {
    let cfg = RunConfig::from_json(
        r#"{
        "pipeline": "wt-compare", "seed": 0,
        "wave": {"half_width": 16, "lambda": 0.1, "dt": 0.1, "replicas": 200,
                 "initial": {"kind": "power", "amplitude": 1e-6, "exponent": 2}},
        "kinetic": {"epsilon": 0.05, "tau": 0.5, "steps": 100},
        "sweep": {"axis": "wave.lambda", "values": [0.1, 0.05, 0.025], "seeds": [0, 1, 2, 3, 4],
                  "expect": "non-increasing"}
    }"#,
    )?;
    let (report, _) = run_sweep(&cfg, &scratch.join("kinetic-limit"))?;
    let medians: Vec<String> = report
        .values
        .iter()
        .zip(&report.medians)
        .map(|(v, m)| format!("lambda={v}: {}", m.map_or("n/a".into(), |m| format!("{m:.3e}"))))
        .collect();
    Ok((
        report.verdict == Some(true) && !report.partial,
        format!("D=16, 200 replicas x 5 seeds, median L1 distance at tau=0.5: {}", medians.join(", ")),
    ))
}

// 7

fn chain_energy(s: &ChainState, alpha: f64) -> f64 {
    let n = s.r.len();
    let h = 1.0 / n as f64;
    let mut u = 0.0;
    for x in 0..n {
        for y in (0..n).filter(|&y| y != x) {
            let d = (x as f64 - y as f64).abs() * h;
            let d = d.min(1.0 - d);
            u += (s.r[x] - s.r[y]).powi(2) / d.powf(1.0 + 2.0 * alpha);
        }
    }
    0.5 * s.v.iter().map(|v| v * v).sum::<f64>() + 0.25 * h * u
}

fn two_site_period_error(alpha: f64, dt: f64) -> Result<f64, Box<dyn std::error::Error>> {
    let spec = LatticeSpec::with_points(1, 2)?;
    let fp = FractionalParams::new(1, alpha)?;
    // d'' = -2 h d / (1/2)^(1+2a) with h = 1/2
    let w = 2f64.powf(1.0 + 2.0 * alpha).sqrt();
    let period = 2.0 * PI / w;
    let s = ChainState {
        r: vec![-0.5, 0.5],
        v: vec![0.0, 0.0],
        t: 0.0,
    };
    let mut integ = VerletIntegrator::new(ChainForce::new(spec, &fp, ForceMethod::Direct)?);
    let mut prev = (0.0, 1.0);
    let mut crossings = vec![];
    integ.run_with(&s, dt, (3.0 * period / dt) as usize, |_, st| {
        let d = st.r[1] - st.r[0];
        if prev.1 > 0.0 && d <= 0.0 {
            crossings.push(prev.0 + dt * prev.1 / (prev.1 - d));
        }
        prev = (st.t, d);
    })?;
    Ok(((crossings[2] - crossings[0]) / 2.0 - period).abs())
}

fn chain_conservation() -> Outcome {
    let n = 128;
    let alpha = 0.5;
    let spec = LatticeSpec::with_points(1, n)?;
    let fp = FractionalParams::new(1, alpha)?;
    let s = ChainState {
        r: (0..n)
            .map(|i| {
                let x = i as f64 / n as f64;
                (2.0 * PI * x).cos() + 0.5 * (4.0 * PI * x).sin()
            })
            .collect(),
        v: (0..n).map(|i| 0.3 * (6.0 * PI * i as f64 / n as f64).sin()).collect(),
        t: 0.0,
    };
    let e0 = chain_energy(&s, alpha);
    let p0: f64 = s.v.iter().sum();
    let mut samples = vec![(0.0, e0)];
    let mut dp = 0.0f64;
    let mut integ = VerletIntegrator::new(ChainForce::new(spec, &fp, ForceMethod::Auto)?);
    integ.run_with(&s, 1e-3, 10_000, |step, st| {
        dp = dp.max((st.v.iter().sum::<f64>() - p0).abs());
        if (step + 1) % 10 == 0 {
            samples.push((st.t, chain_energy(st, alpha)));
        }
    })?;
    let m = samples.len() as f64;
    let tm = samples.iter().map(|p| p.0).sum::<f64>() / m;
    let em = samples.iter().map(|p| p.1).sum::<f64>() / m;
    let slope = samples.iter().map(|p| (p.0 - tm) * (p.1 - em)).sum::<f64>()
        / samples.iter().map(|p| (p.0 - tm).powi(2)).sum::<f64>();
    let drift = (slope * 10.0 / e0).abs();
    let excursion = samples.iter().map(|p| ((p.1 - e0) / e0).abs()).fold(0.0, f64::max);
    let e1 = two_site_period_error(alpha, 1e-2)?;
    let e2 = two_site_period_error(alpha, 5e-3)?;
    let ratio = e1 / e2;
    Ok((
        drift < 1e-6 && dp < 1e-10 && (3.5..4.5).contains(&ratio),
        format!(
            "N=128, t=10, dt=1e-3: secular energy drift {drift:.1e} (max excursion {excursion:.1e}), momentum {dp:.1e}; two-site period error ratio {ratio:.2} under dt halving"
        ),
    ))
}

// 8

fn mean_field(scratch: &Path) -> Outcome {
    let (amp, sr, sv, replicas, cells): (f64, f64, f64, f64, f64) = (0.3, 0.12, 0.1, 50.0, 32.0);
    let cfg = RunConfig::from_json(
        r#"{
        "pipeline": "mf-compare", "seed": 0,
        "chain": {"points": 64, "alpha": 0.4, "dt": 0.001, "steps": 1000, "replicas": 50,
                  "law": {"kind": "modulated-gaussian", "amplitude": 0.3, "mode": 1, "sigma_r": 0.12, "sigma_v": 0.1}},
        "vlasov": {"x_points": 32, "r_max": 1.5, "r_points": 120, "v_max": 2.0, "v_points": 160, "dt": 0.01, "steps": 100},
        "sweep": {"axis": "chain.points", "values": [64, 128, 256], "seeds": [0, 1, 2, 3, 4], "expect": "non-increasing"}
    }"#,
    )?;
    let out = scratch.join("mean-field");
    let (report, _) = run_sweep(&cfg, &out)?;
    // per-sample variances of r, v, r^2, v^2, rv averaged over the cosine mean
    let mu2 = amp * amp / 2.0;
    let var = [
        sr * sr,
        sv * sv,
        2.0 * sr.powi(4) + 4.0 * mu2 * sr * sr,
        2.0 * sv.powi(4),
        (mu2 + sr * sr) * sv * sv,
    ];
    let mean_var = var.iter().sum::<f64>() / 5.0;
    let mut band_ratios = vec![];
    for (i, &n) in report.values.iter().enumerate() {
        let mut ratios = vec![];
        for c in report.children.iter().filter(|c| c.dir.starts_with(&format!("child-{i:02}-"))) {
            let text = std::fs::read_to_string(out.join(&c.dir).join("distance.json"))?;
            let d: serde_json::Value = serde_json::from_str(&text)?;
            let initial = d["combined_l2_initial"].as_f64().ok_or("missing combined_l2_initial")?;
            ratios.push(initial / (mean_var * cells / (replicas * n)).sqrt());
        }
        band_ratios.push(median(ratios));
    }
    let band_ok = band_ratios.iter().all(|r| (0.5..2.0).contains(r));
    let medians: Vec<String> = report
        .values
        .iter()
        .zip(&report.medians)
        .map(|(v, m)| format!("N={v}: {}", m.map_or("n/a".into(), |m| format!("{m:.3}"))))
        .collect();
    Ok((
        report.verdict == Some(true) && !report.partial && band_ok,
        format!(
            "M=50 x 5 seeds, t=1: median distance {}; t=0 distance / (MN)^-1/2 band = {band_ratios:.2?}",
            medians.join(", ")
        ),
    ))
}

// 9

fn defect_oracle(ens: &ChainEnsemble, x: usize, y: usize, bins: &BinSpec) -> f64 {
    let k = bins.r_bins * bins.v_bins + 1;
    let slot = |r: f64, v: f64| {
        let i = ((r - bins.r_range.0) / bins.dr()).floor();
        let j = ((v - bins.v_range.0) / bins.dv()).floor();
        if i >= 0.0 && j >= 0.0 && (i as usize) < bins.r_bins && (j as usize) < bins.v_bins {
            i as usize * bins.v_bins + j as usize
        } else {
            k - 1
        }
    };
    let m = ens.states.len() as f64;
    let mut joint = vec![0.0; k * k];
    let (mut px, mut py) = (vec![0.0; k], vec![0.0; k]);
    for s in &ens.states {
        let (a, b) = (slot(s.r[x], s.v[x]), slot(s.r[y], s.v[y]));
        joint[a * k + b] += 1.0 / m;
        px[a] += 1.0 / m;
        py[b] += 1.0 / m;
    }
    let mut d = 0.0;
    for a in 0..k {
        for b in 0..k {
            d += (joint[a * k + b] - px[a] * py[b]).abs();
        }
    }
    d
}

fn molecular_chaos() -> Outcome {
    let spec = LatticeSpec::with_points(1, 64)?;
    let bins = BinSpec {
        cells: 1,
        r_range: (-1.0, 1.0),
        r_bins: 2,
        v_range: (-1.0, 1.0),
        v_bins: 2,
    };
    let law = PhaseLaw::Gaussian {
        mean_r: 0.0,
        mean_v: 0.0,
        sigma_r: 1.0,
        sigma_v: 1.0,
    };
    let mut points = vec![];
    let mut oracle = 0.0f64;
    let mut defects = vec![];
    for m in [100usize, 1000, 10_000] {
        let ens = sample_ensemble(&EnsembleSpec { replicas: m, seed: 21, law: law.clone() }, &spec)?;
        let mut total = 0.0;
        for x in 0..32 {
            let d = chaos_defect(&ens, x, x + 32, &bins)?;
            oracle = oracle.max((d - defect_oracle(&ens, x, x + 32, &bins)).abs());
            total += d;
        }
        defects.push(total / 32.0);
        points.push(((m as f64).ln(), (total / 32.0).ln()));
    }
    let slope = (points[2].1 - points[0].1) / (points[2].0 - points[0].0);
    let ens = sample_ensemble(&EnsembleSpec { replicas: 1000, seed: 22, law }, &spec)?;
    let fp = FractionalParams::new(1, 0.5)?;
    let later = evolve_ensemble(&ens, &fp, ForceMethod::Auto, 0.01, 100)?;
    let moved: f64 = (0..32).map(|x| chaos_defect(&later, x, x + 32, &bins)).sum::<Result<f64, _>>()? / 32.0;
    let still: f64 = (0..32).map(|x| chaos_defect(&ens, x, x + 32, &bins)).sum::<Result<f64, _>>()? / 32.0;
    Ok((
        (slope + 0.5).abs() <= 0.15 && oracle <= 1e-12,
        format!(
            "t=0 defect {} for M=1e2,1e3,1e4, log-log slope {slope:.3} (target -0.5 +- 0.15); M=1e3 at t=1: {moved:.3e} (t=0: {still:.3e}, reported only)",
            sci(&defects)
        ),
    ))
}

// 10

fn frac_lap_kernel(field: &[f64], alpha: f64) -> Vec<f64> {
    let n = field.len();
    let ks: Vec<i64> = (0..n as i64).map(|j| if 2 * j <= n as i64 { j } else { j - n as i64 }).collect();
    (0..n)
        .map(|x| {
            let mut out = 0.0;
            for (y, f) in field.iter().enumerate() {
                let mut k_sum = 0.0;
                for &k in &ks {
                    let arg = 2.0 * PI * k as f64 * (x as f64 - y as f64) / n as f64;
                    k_sum += (2.0 * PI * k.abs() as f64).powf(2.0 * alpha) * arg.cos();
                }
                out += f * k_sum;
            }
            out / n as f64
        })
        .collect()
}

fn vlasov_solver() -> Outcome {
    // mass and positivity
    let grid = VlasovGrid::new(1, 32, (2.0, 128), (2.0, 128))?;
    let fp = FractionalParams::new(1, 0.5)?;
    let mut g = PhaseDensity::from_fn(grid, |x, r, v| {
        let mean = 0.2 * (2.0 * PI * x[0]).cos();
        (-(r - mean).powi(2) / (2.0 * 0.15f64.powi(2)) - v * v / (2.0 * 0.15f64.powi(2))).exp()
    })?;
    let m0 = g.mass();
    let mut solver = VlasovSolver::new(grid, fp)?;
    let mut min = f64::INFINITY;
    let mut escaped = 0.0;
    for _ in 0..100 {
        escaped += solver.step(&mut g, 0.01)?.escaped_mass;
        min = min.min(g.values.iter().copied().fold(f64::INFINITY, f64::min));
    }
    let drift = (g.mass() - m0).abs() / m0;

    // free streaming of an x-homogeneous density
    let g0 = |r: f64, v: f64| (-r * r / (2.0 * 0.2f64.powi(2)) - v * v / (2.0 * 0.3f64.powi(2))).exp();
    let t = 0.5;
    let mut stream_err = vec![];
    for n in [48, 96, 192] {
        let grid = VlasovGrid::new(1, 4, (2.0, n), (1.0, n))?;
        let mut g = PhaseDensity::from_fn(grid, |_, r, v| g0(r, v))?;
        let steps = n / 4;
        let mut solver = VlasovSolver::new(grid, fp)?;
        solver.evolve(&mut g, t / steps as f64, steps)?;
        let mut err = 0.0;
        for c in 0..grid.x_cells() {
            for i in 0..grid.r_points {
                for j in 0..grid.v_points {
                    let (r, v) = (grid.r_center(i), grid.v_center(j));
                    err += (g.values[grid.index(c, i, j)] - g0(r - v * t, v)).abs() * grid.dr() * grid.dv();
                }
            }
        }
        stream_err.push(err / grid.x_cells() as f64);
    }
    let refining = stream_err.windows(2).all(|w| w[0] / w[1] > 2.5);

    // factorized sigma against the unfactorized sum
    let mut r = rng(10);
    let mut sigma_err = 0.0f64;
    for x_points in [8, 9] {
        let grid = VlasovGrid::new(1, x_points, (1.0, 6), (1.0, 5))?;
        let g = PhaseDensity::new(grid, (0..grid.len()).map(|_| r.random::<f64>()).collect(), 0.0)?;
        let fast = sigma_field(&g, &FractionalParams::new(1, 0.4)?)?;
        let w = grid.dr() * grid.dv();
        let mut slow = vec![0.0; x_points * grid.r_points];
        for i in 0..grid.r_points {
            for ii in 0..grid.r_points {
                for jj in 0..grid.v_points {
                    let col: Vec<f64> = (0..x_points)
                        .map(|c| (grid.r_center(i) - grid.r_center(ii)) * g.values[grid.index(c, ii, jj)] * w)
                        .collect();
                    for (c, l) in frac_lap_kernel(&col, 0.4).into_iter().enumerate() {
                        slow[c * grid.r_points + i] += l;
                    }
                }
            }
        }
        let scale = slow.iter().map(|x| x.abs()).fold(0.0, f64::max);
        sigma_err = sigma_err.max(fast.iter().zip(&slow).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale);
    }
    Ok((
        drift < 1e-8 && min >= 0.0 && refining && sigma_err <= 1e-12,
        format!(
            "100 steps: mass drift {drift:.1e} (escaped {escaped:.1e}), min g {min:.1e}; free streaming L1 {}; sigma vs unfactorized {sigma_err:.1e}",
            sci(&stream_err)
        ),
    ))
}

// 11

fn determinism(scratch: &Path) -> Outcome {
    let configs = [
        r#"{"pipeline": "wt-sim", "seed": 5,
            "wave": {"half_width": 8, "lambda": 0.1, "dt": 0.1, "steps": 100, "replicas": 16, "record_every": 25,
                     "initial": {"kind": "power", "amplitude": 1e-6, "exponent": 2}}}"#,
        r#"{"pipeline": "wt-compare", "seed": 5,
            "wave": {"half_width": 8, "lambda": 0.2, "dt": 0.1, "replicas": 16,
                     "initial": {"kind": "power", "amplitude": 1e-6, "exponent": 2}},
            "kinetic": {"epsilon": 0.05, "tau": 0.5, "steps": 20}}"#,
        r#"{"pipeline": "chain-sim", "seed": 5,
            "chain": {"points": 32, "alpha": 0.5, "dt": 0.01, "steps": 200, "replicas": 12, "record_every": 10,
                      "law": {"kind": "gaussian", "mean_r": 0.0, "mean_v": 0.0, "sigma_r": 0.1, "sigma_v": 0.1},
                      "chaos": {"r_range": [-0.5, 0.5], "r_bins": 3, "v_range": [-0.5, 0.5], "v_bins": 3, "sites": [0, 16]}}}"#,
        r#"{"pipeline": "mf-compare", "seed": 5,
            "chain": {"points": 32, "alpha": 0.4, "dt": 0.01, "steps": 20, "replicas": 12,
                      "law": {"kind": "modulated-gaussian", "amplitude": 0.2, "mode": 1, "sigma_r": 0.1, "sigma_v": 0.1}},
            "vlasov": {"x_points": 8, "r_max": 1.2, "r_points": 40, "v_max": 1.2, "v_points": 40, "dt": 0.01, "steps": 20}}"#,
    ];
    let mut compared = 0;
    let mut mismatches = vec![];
    for text in configs {
        let cfg = RunConfig::from_json(text)?;
        let name = cfg.pipeline.name();
        let mut listings = vec![];
        for (tag, workers) in [("a", 1), ("b", 1), ("c", 4)] {
            let dir = scratch.join(format!("det-{name}-{tag}"));
            let outcome = with_workers(workers, || run(&cfg, &dir))??;
            let files: Vec<(String, String)> =
                outcome.manifest.files.iter().map(|f| (f.path.clone(), f.sha256.clone())).collect();
            listings.push(files);
        }
        compared += listings[0].len();
        if listings.iter().any(|l| l != &listings[0]) {
            mismatches.push(name);
        }
    }
    Ok((
        mismatches.is_empty(),
        format!("4 pipelines, 2 runs on 1 worker + 1 on 4 workers, {compared} files per run set compared; mismatching: {mismatches:?}"),
    ))
}

fn main() {
    let strict = std::env::var_os("ACCEPTANCE_STRICT").is_some();
    let scratch = tempfile::tempdir().expect("scratch directory");
    let dir = scratch.path();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("Fourier fidelity", Box::new(fourier_fidelity)),
        ("Linear exactness", Box::new(linear_exactness)),
        ("Nonlinear rhs equivalence", Box::new(rhs_equivalence)),
        ("Rayleigh-Jeans stationarity", Box::new(rayleigh_jeans)),
        ("Kinetic energy moment", Box::new(energy_moment_refinement)),
        ("Kinetic-limit trend", Box::new(|| kinetic_limit(dir))),
        ("Chain conservation", Box::new(chain_conservation)),
        ("Mean-field trend", Box::new(|| mean_field(dir))),
        ("Molecular chaos", Box::new(molecular_chaos)),
        ("Vlasov solver", Box::new(vlasov_solver)),
        ("Determinism", Box::new(|| determinism(dir))),
    ];
    let (mut passed, mut failed, mut broken) = (0, 0, 0);
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = std::time::Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(Ok((true, detail))) => {
                passed += 1;
                println!("PASS {:>2} {name}: {detail} [{secs:.1}s]", i + 1);
            }
            Ok(Ok((false, detail))) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} [{secs:.1}s]", i + 1);
            }
            Ok(Err(e)) => {
                broken += 1;
                println!("FAIL {:>2} {name}: error: {e}", i + 1);
            }
            Err(_) => {
                broken += 1;
                println!("FAIL {:>2} {name}: panicked", i + 1);
            }
        }
    }
    println!("acceptance: {passed} passed, {failed} failed, {broken} could not be evaluated");
    if broken > 0 || (strict && failed > 0) {
        std::process::exit(1);
    }
}
