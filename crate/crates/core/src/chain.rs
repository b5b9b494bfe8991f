//! Long-range harmonic chain on the periodic lattice.
//!
//! ```text
//! ∂_t r_x = v_x,   ∂_t v_x = h^d Σ_{y≠x} (r_y − r_x) / |y − x|^{d+2α}
//! ```
//!
//! `|y − x|` is the minimal-image distance on the unit torus. The force is a
//! circulant convolution minus a diagonal term, so besides the direct
//! `O(N^{2d})` sum it can be evaluated with FFTs.

use std::f64::consts::PI;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::NdFft;
use crate::lattice::LatticeSpec;

/// Fractional order `α ∈ (0,1)`, dimension, and
/// `C_{d,α} = 4^α Γ(d/2+α) / (π^{d/2} |Γ(−α)|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractionalParams {
    alpha: f64,
    dim: usize,
    normalization: f64,
}

impl FractionalParams {
    pub fn new(dim: usize, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid("alpha", format!("must lie in (0,1), got {alpha}")));
        }
        if dim == 0 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        use statrs::function::gamma::gamma;
        let d = dim as f64;
        let c = 4f64.powf(alpha) * gamma(d / 2.0 + alpha) / (PI.powf(d / 2.0) * gamma(-alpha).abs());
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::invalid("alpha", "normalization constant is not finite"));
        }
        Ok(FractionalParams {
            alpha,
            dim,
            normalization: c,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `C_{d,α}`. Not applied to the chain force.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub r: Vec<f64>,
    pub v: Vec<f64>,
    pub t: f64,
}

impl ChainState {
    pub fn zeros(spec: &LatticeSpec) -> Self {
        ChainState {
            r: vec![0.0; spec.len()],
            v: vec![0.0; spec.len()],
            t: 0.0,
        }
    }

    pub fn total_momentum(&self) -> f64 {
        self.v.iter().sum()
    }

    pub fn mean_displacement(&self) -> f64 {
        self.r.iter().sum::<f64>() / self.r.len() as f64
    }
}

/// Force evaluation strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForceMethod {
    Direct,
    Spectral,
    /// Spectral above 512 sites, direct otherwise.
    Auto,
}

fn check_state(spec: &LatticeSpec, state: &ChainState) -> Result<()> {
    for found in [state.r.len(), state.v.len()] {
        if found != spec.len() {
            return Err(Error::SizeMismatch {
                expected: spec.len(),
                found,
            });
        }
    }
    Ok(())
}

/// Precomputed pair kernel `h^d / |z|^{d+2α}` indexed by site offset `z`.
pub struct ChainForce {
    spec: LatticeSpec,
    kernel: Vec<f64>,
    diagonal: f64,
    coords: Vec<Vec<usize>>,
    spectral: Option<(NdFft, Vec<Complex64>, Vec<Complex64>)>,
}

impl ChainForce {
    pub fn new(spec: LatticeSpec, fp: &FractionalParams, method: ForceMethod) -> Result<Self> {
        if spec.dim() != fp.dim {
            return Err(Error::DimensionMismatch(format!(
                "lattice has d={} but fractional parameters have d={}",
                spec.dim(),
                fp.dim
            )));
        }
        if spec.points() < 2 {
            return Err(Error::invalid("points", "chain needs at least 2 sites per axis"));
        }
        let n = spec.points();
        let exponent = spec.dim() as f64 + 2.0 * fp.alpha;
        let kernel: Vec<f64> = (0..spec.len())
            .map(|o| {
                let c = spec.site_coords(o);
                if c.iter().all(|&j| j == 0) {
                    return 0.0;
                }
                let dist2: f64 = c
                    .iter()
                    .map(|&j| {
                        let m = j.min(n - j) as f64 / n as f64;
                        m * m
                    })
                    .sum();
                spec.cell_volume() / dist2.powf(exponent / 2.0)
            })
            .collect();
        let diagonal = kernel.iter().sum();
        let spectral = match method {
            ForceMethod::Direct => false,
            ForceMethod::Spectral => true,
            ForceMethod::Auto => spec.len() > 512,
        };
        let spectral = spectral.then(|| {
            let mut fft = NdFft::new(n, spec.dim());
            let mut hat: Vec<Complex64> = kernel.iter().map(|&k| Complex64::new(k, 0.0)).collect();
            fft.forward(&mut hat);
            let scale = 1.0 / spec.len() as f64;
            hat.iter_mut().for_each(|z| *z *= scale);
            (fft, hat, vec![Complex64::default(); spec.len()])
        });
        Ok(ChainForce {
            coords: (0..spec.len()).map(|i| spec.site_coords(i)).collect(),
            spec,
            kernel,
            diagonal,
            spectral,
        })
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn is_spectral(&self) -> bool {
        self.spectral.is_some()
    }

    /// Kernel value for site offset index `offset`; zero at the origin.
    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    pub fn apply_into(&mut self, r: &[f64], out: &mut [f64]) {
        let spec = self.spec;
        match &mut self.spectral {
            Some((fft, hat, buf)) => {
                for (b, &x) in buf.iter_mut().zip(r) {
                    *b = Complex64::new(x, 0.0);
                }
                fft.forward(buf);
                for (b, k) in buf.iter_mut().zip(hat.iter()) {
                    *b *= k;
                }
                fft.inverse(buf);
                for ((o, b), &x) in out.iter_mut().zip(buf.iter()).zip(r) {
                    *o = b.re - self.diagonal * x;
                }
            }
            None => {
                let coords = &self.coords;
                let n = spec.points();
                let mut offset = vec![0; spec.dim()];
                for (x, o) in out.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for y in 0..spec.len() {
                        if y == x {
                            continue;
                        }
                        for j in 0..spec.dim() {
                            offset[j] = (coords[y][j] + n - coords[x][j]) % n;
                        }
                        acc += self.kernel[spec.site_index(&offset)] * (r[y] - r[x]);
                    }
                    *o = acc;
                }
            }
        }
    }

    pub fn apply(&mut self, r: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; r.len()];
        self.apply_into(r, &mut out);
        out
    }

    /// `E = Σ v²/2 + (h^d/4) Σ_x Σ_{y≠x} (r_y − r_x)² / |y−x|^{d+2α}`,
    /// evaluated as `Σ v²/2 − Σ r_x F_x / 2`.
    pub fn energy(&mut self, state: &ChainState) -> Result<f64> {
        check_state(&self.spec, state)?;
        let f = self.apply(&state.r);
        let kinetic: f64 = state.v.iter().map(|v| 0.5 * v * v).sum();
        let potential: f64 = -0.5 * state.r.iter().zip(&f).map(|(r, f)| r * f).sum::<f64>();
        Ok(kinetic + potential)
    }
}

pub fn force(state: &ChainState, spec: &LatticeSpec, fp: &FractionalParams) -> Result<Vec<f64>> {
    check_state(spec, state)?;
    Ok(ChainForce::new(*spec, fp, ForceMethod::Auto)?.apply(&state.r))
}

pub fn chain_energy(state: &ChainState, spec: &LatticeSpec, fp: &FractionalParams) -> Result<f64> {
    ChainForce::new(*spec, fp, ForceMethod::Auto)?.energy(state)
}

/// Velocity Verlet integrator that caches the force at the current positions.
pub struct VerletIntegrator {
    force: ChainForce,
    cached: Option<Vec<f64>>,
    scratch: Vec<f64>,
}

impl VerletIntegrator {
    pub fn new(force: ChainForce) -> Self {
        let len = force.spec.len();
        VerletIntegrator {
            force,
            cached: None,
            scratch: vec![0.0; len],
        }
    }

    pub fn force(&mut self) -> &mut ChainForce {
        &mut self.force
    }

    /// Advances `state` in place by one step.
    pub fn step(&mut self, state: &mut ChainState, dt: f64) -> Result<()> {
        let mut acc = match self.cached.take() {
            Some(a) => a,
            None => self.force.apply(&state.r),
        };
        for i in 0..state.r.len() {
            state.v[i] += 0.5 * dt * acc[i];
            state.r[i] += dt * state.v[i];
        }
        self.force.apply_into(&state.r, &mut self.scratch);
        std::mem::swap(&mut acc, &mut self.scratch);
        for i in 0..state.v.len() {
            state.v[i] += 0.5 * dt * acc[i];
        }
        state.t += dt;
        self.cached = Some(acc);
        Ok(())
    }

    /// Takes `n_steps` steps, failing with the step index on a non-finite value.
    pub fn run(&mut self, state: &ChainState, dt: f64, n_steps: usize) -> Result<ChainState> {
        self.run_with(state, dt, n_steps, |_, _| {})
    }

    pub fn run_with(
        &mut self,
        state: &ChainState,
        dt: f64,
        n_steps: usize,
        mut observe: impl FnMut(usize, &ChainState),
    ) -> Result<ChainState> {
        check_state(&self.force.spec, state)?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
        }
        self.cached = None;
        let mut s = state.clone();
        for step in 1..=n_steps {
            self.step(&mut s, dt)?;
            if !s.r.iter().chain(&s.v).all(|x| x.is_finite()) {
                return Err(Error::NonFinite { step, time: s.t });
            }
            observe(step, &s);
        }
        Ok(s)
    }
}

pub fn verlet_step(
    state: &ChainState,
    spec: &LatticeSpec,
    fp: &FractionalParams,
    dt: f64,
) -> Result<ChainState> {
    let force = ChainForce::new(*spec, fp, ForceMethod::Auto)?;
    VerletIntegrator::new(force).run(state, dt, 1)
}

/// Angular frequency of the difference coordinate for two sites on a
/// 1-d lattice (`h = 1/2`, separation `1/2`).
pub fn two_site_frequency(fp: &FractionalParams) -> f64 {
    let h = 0.5;
    (2.0 * h / 0.5f64.powf(1.0 + 2.0 * fp.alpha)).sqrt()
}

/// Tabulated density on a uniform `(r, v)` cell grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTable {
    pub r_range: (f64, f64),
    pub v_range: (f64, f64),
    pub r_cells: usize,
    pub v_cells: usize,
    /// Row-major over `(r, v)` cells.
    pub density: Vec<f64>,
}

impl PhaseTable {
    fn cell_area(&self) -> f64 {
        (self.r_range.1 - self.r_range.0) / self.r_cells as f64 * (self.v_range.1 - self.v_range.0)
            / self.v_cells as f64
    }

    fn validate(&self) -> Result<()> {
        if self.r_cells == 0
            || self.v_cells == 0
            || !(self.r_range.1 > self.r_range.0)
            || !(self.v_range.1 > self.v_range.0)
        {
            return Err(Error::invalid("table", "empty or inverted cell grid"));
        }
        if self.density.len() != self.r_cells * self.v_cells {
            return Err(Error::SizeMismatch {
                expected: self.r_cells * self.v_cells,
                found: self.density.len(),
            });
        }
        if self.density.iter().any(|&p| !(p.is_finite() && p >= 0.0)) {
            return Err(Error::invalid("table", "density must be finite and >= 0"));
        }
        let mass = self.density.iter().sum::<f64>() * self.cell_area();
        if (mass - 1.0).abs() > 1e-6 {
            return Err(Error::Unnormalized { mass });
        }
        Ok(())
    }
}

/// Single-site law of `(r, v)`, optionally depending on the site position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PhaseLaw {
    PointMass {
        r: f64,
        v: f64,
    },
    /// Independent normals in `r` and `v`.
    Gaussian {
        mean_r: f64,
        mean_v: f64,
        sigma_r: f64,
        sigma_v: f64,
    },
    /// Gaussian whose `r`-mean is `amplitude · cos(2π mode x₀)` at the site's
    /// first coordinate `x₀`; `v` has mean 0.
    ModulatedGaussian {
        amplitude: f64,
        mode: u32,
        sigma_r: f64,
        sigma_v: f64,
    },
    Tabulated(PhaseTable),
}

fn normal_pdf(x: f64, mean: f64, sigma: f64) -> f64 {
    (-0.5 * ((x - mean) / sigma).powi(2)).exp() / (sigma * (2.0 * PI).sqrt())
}

impl PhaseLaw {
    pub fn validate(&self) -> Result<()> {
        let positive = |name, s: f64| {
            if s.is_finite() && s > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be positive, got {s}")))
            }
        };
        match self {
            PhaseLaw::PointMass { r, v } => {
                if !(r.is_finite() && v.is_finite()) {
                    return Err(Error::invalid("point", "must be finite"));
                }
                Ok(())
            }
            PhaseLaw::Gaussian { sigma_r, sigma_v, .. }
            | PhaseLaw::ModulatedGaussian { sigma_r, sigma_v, .. } => {
                positive("sigma_r", *sigma_r)?;
                positive("sigma_v", *sigma_v)
            }
            PhaseLaw::Tabulated(t) => t.validate(),
        }
    }

    /// Density at `(x, r, v)`. The point mass has no density and returns 0.
    pub fn density(&self, x: &[f64], r: f64, v: f64) -> f64 {
        match self {
            PhaseLaw::PointMass { .. } => 0.0,
            PhaseLaw::Gaussian {
                mean_r,
                mean_v,
                sigma_r,
                sigma_v,
            } => normal_pdf(r, *mean_r, *sigma_r) * normal_pdf(v, *mean_v, *sigma_v),
            PhaseLaw::ModulatedGaussian {
                amplitude,
                mode,
                sigma_r,
                sigma_v,
            } => {
                let mean = amplitude * (2.0 * PI * *mode as f64 * x[0]).cos();
                normal_pdf(r, mean, *sigma_r) * normal_pdf(v, 0.0, *sigma_v)
            }
            PhaseLaw::Tabulated(t) => {
                let dr = (t.r_range.1 - t.r_range.0) / t.r_cells as f64;
                let dv = (t.v_range.1 - t.v_range.0) / t.v_cells as f64;
                let i = ((r - t.r_range.0) / dr).floor();
                let j = ((v - t.v_range.0) / dv).floor();
                if i < 0.0 || j < 0.0 || i >= t.r_cells as f64 || j >= t.v_cells as f64 {
                    0.0
                } else {
                    t.density[i as usize * t.v_cells + j as usize]
                }
            }
        }
    }

    fn sample(&self, x: &[f64], rng: &mut ChaCha8Rng, cdf: Option<&[f64]>) -> (f64, f64) {
        match self {
            PhaseLaw::PointMass { r, v } => (*r, *v),
            PhaseLaw::Gaussian {
                mean_r,
                mean_v,
                sigma_r,
                sigma_v,
            } => {
                let zr: f64 = rng.sample(StandardNormal);
                let zv: f64 = rng.sample(StandardNormal);
                (mean_r + sigma_r * zr, mean_v + sigma_v * zv)
            }
            PhaseLaw::ModulatedGaussian {
                amplitude,
                mode,
                sigma_r,
                sigma_v,
            } => {
                let zr: f64 = rng.sample(StandardNormal);
                let zv: f64 = rng.sample(StandardNormal);
                let mean = amplitude * (2.0 * PI * *mode as f64 * x[0]).cos();
                (mean + sigma_r * zr, sigma_v * zv)
            }
            PhaseLaw::Tabulated(t) => {
                let cdf = cdf.expect("tabulated law sampled without its cdf");
                let u: f64 = rng.random::<f64>() * cdf[cdf.len() - 1];
                let cell = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
                let (i, j) = (cell / t.v_cells, cell % t.v_cells);
                let dr = (t.r_range.1 - t.r_range.0) / t.r_cells as f64;
                let dv = (t.v_range.1 - t.v_range.0) / t.v_cells as f64;
                let r = t.r_range.0 + (i as f64 + rng.random::<f64>()) * dr;
                let v = t.v_range.0 + (j as f64 + rng.random::<f64>()) * dv;
                (r, v)
            }
        }
    }
}

/// Recipe for an ensemble: replica count, seed and single-site law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub replicas: usize,
    pub seed: u64,
    pub law: PhaseLaw,
}

/// Independent chain replicas on one lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainEnsemble {
    pub spec: LatticeSpec,
    pub states: Vec<ChainState>,
}

/// Draws every site of every replica independently from `ens.law`. Replica
/// `i` uses its own ChaCha stream of `ens.seed`.
pub fn sample_ensemble(ens: &EnsembleSpec, spec: &LatticeSpec) -> Result<ChainEnsemble> {
    if ens.replicas == 0 {
        return Err(Error::invalid("replicas", "must be at least 1"));
    }
    ens.law.validate()?;
    let cdf: Option<Vec<f64>> = match &ens.law {
        PhaseLaw::Tabulated(t) => Some(
            t.density
                .iter()
                .scan(0.0, |acc, &p| {
                    *acc += p;
                    Some(*acc)
                })
                .collect(),
        ),
        _ => None,
    };
    let positions: Vec<Vec<f64>> = (0..spec.len()).map(|i| spec.site_position(i)).collect();
    let states = (0..ens.replicas)
        .map(|replica| {
            let mut rng = ChaCha8Rng::seed_from_u64(ens.seed);
            rng.set_stream(replica as u64);
            let mut s = ChainState::zeros(spec);
            for (i, x) in positions.iter().enumerate() {
                let (r, v) = ens.law.sample(x, &mut rng, cdf.as_deref());
                s.r[i] = r;
                s.v[i] = v;
            }
            s
        })
        .collect();
    Ok(ChainEnsemble {
        spec: *spec,
        states,
    })
}

/// Integrates each replica independently; output order matches input order.
pub fn evolve_ensemble(
    ens: &ChainEnsemble,
    fp: &FractionalParams,
    method: ForceMethod,
    dt: f64,
    n_steps: usize,
) -> Result<ChainEnsemble> {
    let spec = ens.spec;
    ChainForce::new(spec, fp, method)?;
    let states = ens
        .states
        .par_iter()
        .map_init(
            || VerletIntegrator::new(ChainForce::new(spec, fp, method).expect("validated above")),
            |integrator, s| integrator.run(s, dt, n_steps),
        )
        .collect::<Result<Vec<_>>>()?;
    Ok(ChainEnsemble { spec, states })
}

/// x-cell of a site on a grid with `cells` nodes `j/cells` per axis; each
/// site goes to its nearest node (periodically).
pub fn site_cell(spec: &LatticeSpec, site: usize, cells: usize) -> usize {
    let n = spec.points();
    spec.site_coords(site)
        .into_iter()
        .fold(0, |acc, i| acc * cells + ((2 * i * cells + n) / (2 * n)) % cells)
}

/// Histogram layout: `cells` x-cells per axis and uniform `(r, v)` bins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    pub cells: usize,
    pub r_range: (f64, f64),
    pub r_bins: usize,
    pub v_range: (f64, f64),
    pub v_bins: usize,
}

impl BinSpec {
    fn validate(&self) -> Result<()> {
        if self.cells == 0 || self.r_bins == 0 || self.v_bins == 0 {
            return Err(Error::DegenerateBins("bin counts must be positive".into()));
        }
        let ok = |(a, b): (f64, f64)| a.is_finite() && b.is_finite() && b > a;
        if !ok(self.r_range) || !ok(self.v_range) {
            return Err(Error::DegenerateBins("bin ranges must be finite and non-empty".into()));
        }
        Ok(())
    }

    pub fn dr(&self) -> f64 {
        (self.r_range.1 - self.r_range.0) / self.r_bins as f64
    }

    pub fn dv(&self) -> f64 {
        (self.v_range.1 - self.v_range.0) / self.v_bins as f64
    }

    /// Phase bin of `(r, v)`, or `None` outside the ranges.
    pub fn bin(&self, r: f64, v: f64) -> Option<usize> {
        let i = ((r - self.r_range.0) / self.dr()).floor();
        let j = ((v - self.v_range.0) / self.dv()).floor();
        if i >= 0.0 && j >= 0.0 && i < self.r_bins as f64 && j < self.v_bins as f64 {
            Some(i as usize * self.v_bins + j as usize)
        } else {
            None
        }
    }
}

/// Per x-cell density estimate on the `(r, v)` bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDensity {
    pub bins: BinSpec,
    /// Indexed `[cell][r_bin][v_bin]`, row-major.
    pub values: Vec<f64>,
    /// Fraction of samples outside the `(r, v)` ranges.
    pub out_of_range: f64,
}

pub fn empirical_density(ens: &ChainEnsemble, bins: &BinSpec) -> Result<EmpiricalDensity> {
    bins.validate()?;
    if ens.states.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let spec = ens.spec;
    let cells = bins.cells.pow(spec.dim() as u32);
    let phase = bins.r_bins * bins.v_bins;
    let mut counts = vec![0.0; cells * phase];
    let mut per_cell = vec![0.0; cells];
    let mut escaped = 0usize;
    let cell_of: Vec<usize> = (0..spec.len()).map(|i| site_cell(&spec, i, bins.cells)).collect();
    for s in &ens.states {
        for (i, &c) in cell_of.iter().enumerate() {
            per_cell[c] += 1.0;
            match bins.bin(s.r[i], s.v[i]) {
                Some(b) => counts[c * phase + b] += 1.0,
                None => escaped += 1,
            }
        }
    }
    let area = bins.dr() * bins.dv();
    for (c, &n) in per_cell.iter().enumerate() {
        if n > 0.0 {
            counts[c * phase..(c + 1) * phase]
                .iter_mut()
                .for_each(|x| *x /= n * area);
        }
    }
    let out_of_range = escaped as f64 / (ens.states.len() * spec.len()) as f64;
    if escaped > 0 {
        log::info!("empirical_density: {:.3e} of the samples fall outside the bins", out_of_range);
    }
    Ok(EmpiricalDensity {
        bins: *bins,
        values: counts,
        out_of_range,
    })
}

/// `Σ_{a,b} |p_xy(a,b) − p_x(a) p_y(b)|` over the `(r, v)` bins of sites `x`
/// and `y`, with one extra bin collecting everything outside the ranges.
///
/// Zero exactly when the empirical joint law of the pair factorizes on the
/// bins. An ensemble of identical replicas is a point mass, which factorizes.
pub fn chaos_defect(ens: &ChainEnsemble, x: usize, y: usize, bins: &BinSpec) -> Result<f64> {
    bins.validate()?;
    if x == y {
        return Err(Error::invalid("sites", "chaos defect needs two distinct sites"));
    }
    if ens.states.len() < 2 {
        return Err(Error::invalid("replicas", "chaos defect needs at least 2 replicas"));
    }
    let len = ens.spec.len();
    if x >= len || y >= len {
        return Err(Error::invalid("sites", format!("site index out of range 0..{len}")));
    }
    let k = bins.r_bins * bins.v_bins + 1;
    let slot = |s: &ChainState, i: usize| bins.bin(s.r[i], s.v[i]).unwrap_or(k - 1);
    let mut joint = vec![0u64; k * k];
    let mut px = vec![0u64; k];
    let mut py = vec![0u64; k];
    for s in &ens.states {
        let (a, b) = (slot(s, x), slot(s, y));
        joint[a * k + b] += 1;
        px[a] += 1;
        py[b] += 1;
    }
    // m·joint − px·py in integers, so exact factorization gives exactly 0
    let m = ens.states.len() as u64;
    let mut defect = 0.0;
    for a in 0..k {
        for b in 0..k {
            defect += (m * joint[a * k + b]).abs_diff(px[a] * py[b]) as f64;
        }
    }
    Ok(defect / (m * m) as f64)
}

/// Per x-cell means of `r, v, r², v², rv` over replicas and the sites of the
/// cell, indexed `[cell][observable]`.
pub fn cell_observables(ens: &ChainEnsemble, cells: usize) -> Result<Vec<[f64; 5]>> {
    if ens.states.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    if cells == 0 {
        return Err(Error::invalid("cells", "must be positive"));
    }
    let spec = ens.spec;
    let total = cells.pow(spec.dim() as u32);
    let mut sums = vec![[0.0; 5]; total];
    let mut counts = vec![0usize; total];
    for i in 0..spec.len() {
        let c = site_cell(&spec, i, cells);
        counts[c] += ens.states.len();
        for s in &ens.states {
            let (r, v) = (s.r[i], s.v[i]);
            let acc = &mut sums[c];
            acc[0] += r;
            acc[1] += v;
            acc[2] += r * r;
            acc[3] += v * v;
            acc[4] += r * v;
        }
    }
    for (acc, &n) in sums.iter_mut().zip(&counts) {
        if n > 0 {
            acc.iter_mut().for_each(|a| *a /= n as f64);
        } else {
            acc.iter_mut().for_each(|a| *a = f64::NAN);
        }
    }
    Ok(sums)
}

/// Site-averaged ensemble statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub replicas: usize,
    pub sites: usize,
    pub t: f64,
    pub mean_r: f64,
    pub mean_v: f64,
    pub var_r: f64,
    pub var_v: f64,
}

pub fn summarize(ens: &ChainEnsemble) -> Result<EnsembleSummary> {
    let first = ens.states.first().ok_or(Error::EmptyEnsemble)?;
    let n = (ens.states.len() * ens.spec.len()) as f64;
    let mean = |f: &dyn Fn(&ChainState) -> &[f64]| {
        ens.states.iter().map(|s| f(s).iter().sum::<f64>()).sum::<f64>() / n
    };
    let mean_r = mean(&|s| &s.r);
    let mean_v = mean(&|s| &s.v);
    let var = |f: &dyn Fn(&ChainState) -> &[f64], m: f64| {
        ens.states
            .iter()
            .map(|s| f(s).iter().map(|x| (x - m).powi(2)).sum::<f64>())
            .sum::<f64>()
            / n
    };
    Ok(EnsembleSummary {
        replicas: ens.states.len(),
        sites: ens.spec.len(),
        t: first.t,
        mean_r,
        mean_v,
        var_r: var(&|s| &s.r, mean_r),
        var_v: var(&|s| &s.v, mean_v),
    })
}

/// Writes `site,x0..,r,v` rows for one state.
pub fn write_snapshot(path: &Path, state: &ChainState, spec: &LatticeSpec) -> Result<()> {
    check_state(spec, state)?;
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        writeln!(w, "# t={:e}", state.t)?;
        let xs: Vec<String> = (0..spec.dim()).map(|j| format!("x{j}")).collect();
        writeln!(w, "site,{},r,v", xs.join(","))?;
        for i in 0..spec.len() {
            let x: Vec<String> = spec.site_position(i).iter().map(|p| format!("{p:e}")).collect();
            writeln!(w, "{i},{},{:e},{:e}", x.join(","), state.r[i], state.v[i])?;
        }
        w.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_constant() {
        let fp = FractionalParams::new(1, 0.5).unwrap();
        assert!((fp.normalization() - 1.0 / PI).abs() < 1e-14);
        assert!(FractionalParams::new(1, 0.0).is_err());
        assert!(FractionalParams::new(1, 1.0).is_err());
        assert!(FractionalParams::new(2, 0.3).unwrap().normalization() > 0.0);
    }

    #[test]
    fn constant_displacement_has_no_force() {
        let spec = LatticeSpec::with_points(2, 6).unwrap();
        let fp = FractionalParams::new(2, 0.4).unwrap();
        for method in [ForceMethod::Direct, ForceMethod::Spectral] {
            let mut f = ChainForce::new(spec, &fp, method).unwrap();
            let out = f.apply(&vec![2.5; spec.len()]);
            assert!(out.iter().all(|x| x.abs() < 1e-11), "{method:?}");
        }
    }

    #[test]
    fn two_site_force() {
        let spec = LatticeSpec::with_points(1, 2).unwrap();
        let fp = FractionalParams::new(1, 0.3).unwrap();
        let s = ChainState {
            r: vec![0.2, 1.0],
            v: vec![0.0, 0.0],
            t: 0.0,
        };
        let f = force(&s, &spec, &fp).unwrap();
        let expected = 0.5 * 0.8 / 0.5f64.powf(1.6);
        assert!((f[0] - expected).abs() < 1e-15);
        assert!((f[1] + expected).abs() < 1e-15);
    }

    #[test]
    fn fixed_point_is_preserved() {
        let spec = LatticeSpec::with_points(1, 8).unwrap();
        let fp = FractionalParams::new(1, 0.5).unwrap();
        let s = ChainState {
            r: vec![0.7; 8],
            v: vec![0.0; 8],
            t: 0.0,
        };
        let next = verlet_step(&s, &spec, &fp, 0.01).unwrap();
        assert_eq!(next.r, s.r);
        assert_eq!(next.v, s.v);
        assert_eq!(chain_energy(&ChainState::zeros(&spec), &spec, &fp).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let spec = LatticeSpec::with_points(2, 4).unwrap();
        let fp = FractionalParams::new(1, 0.5).unwrap();
        assert!(ChainForce::new(spec, &fp, ForceMethod::Direct).is_err());
    }

    #[test]
    fn site_cells_are_nearest_nodes() {
        let spec = LatticeSpec::with_points(1, 8).unwrap();
        let cells: Vec<usize> = (0..8).map(|i| site_cell(&spec, i, 4)).collect();
        assert_eq!(cells, vec![0, 1, 1, 2, 2, 3, 3, 0]);
        let same: Vec<usize> = (0..8).map(|i| site_cell(&spec, i, 8)).collect();
        assert_eq!(same, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn bins_validation() {
        let good = BinSpec {
            cells: 1,
            r_range: (-1.0, 1.0),
            r_bins: 2,
            v_range: (-1.0, 1.0),
            v_bins: 2,
        };
        assert_eq!(good.bin(-0.5, 0.5), Some(1));
        assert_eq!(good.bin(1.5, 0.0), None);
        let mut bad = good;
        bad.r_range = (1.0, 1.0);
        assert!(matches!(bad.validate(), Err(Error::DegenerateBins(_))));
        bad = good;
        bad.v_bins = 0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn unnormalized_table_is_rejected() {
        let law = PhaseLaw::Tabulated(PhaseTable {
            r_range: (0.0, 1.0),
            v_range: (0.0, 1.0),
            r_cells: 2,
            v_cells: 2,
            density: vec![1.0; 4],
        });
        assert!(law.validate().is_ok());
        let half = PhaseLaw::Tabulated(PhaseTable {
            r_range: (0.0, 1.0),
            v_range: (0.0, 1.0),
            r_cells: 2,
            v_cells: 2,
            density: vec![0.5; 4],
        });
        match half.validate() {
            Err(Error::Unnormalized { mass }) => assert!((mass - 0.5).abs() < 1e-15),
            other => panic!("expected unnormalized error, got {other:?}"),
        }
    }
}
