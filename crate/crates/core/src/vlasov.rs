//! Vlasov equation with a fractional mean field:
//!
//! ```text
//! ∂_t g + v ∂_r g + C_{d,α}^{-1} Σ_g ∂_v g = 0
//! Σ_g(x,r) = (−Δ_x)^α ∫ (r − r̃) g(x,r̃,ṽ) dr̃ dṽ = r·(−Δ_x)^α ρ − (−Δ_x)^α m
//! ```
//!
//! `(−Δ_x)^α` is the Fourier multiplier `|2πk|^{2α}` on the torus. Time
//! stepping is Strang splitting (half step in `v`, full step in `r`, half step
//! in `v`). Each substep is a constant-speed translation along grid lines,
//! done with the positive flux conservative (PFC) scheme, which is
//! conservative and keeps `0 ≤ g ≤ max g`. Mass leaving `[−R,R]×[−V,V]` is
//! counted and dropped; nothing flows in.

use std::f64::consts::PI;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{cell_observables, site_cell, ChainEnsemble, FractionalParams, PhaseLaw};
use crate::error::{Error, Result};
use crate::fft::{natural_wavenumber, NdFft};

/// Phase-space grid: `x_points` nodes `j/x_points` per x-axis, cell-centred
/// `r` and `v` grids on `[−r_max, r_max]` and `[−v_max, v_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VlasovGrid {
    pub dim: usize,
    pub x_points: usize,
    pub r_max: f64,
    pub r_points: usize,
    pub v_max: f64,
    pub v_points: usize,
}

impl VlasovGrid {
    pub fn new(
        dim: usize,
        x_points: usize,
        (r_max, r_points): (f64, usize),
        (v_max, v_points): (f64, usize),
    ) -> Result<Self> {
        let g = VlasovGrid {
            dim,
            x_points,
            r_max,
            r_points,
            v_max,
            v_points,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        if self.x_points < 2 {
            return Err(Error::invalid("x_points", "need at least 2"));
        }
        if self.r_points < 3 || self.v_points < 3 {
            return Err(Error::invalid("r_points/v_points", "need at least 3 cells"));
        }
        if !(self.r_max.is_finite() && self.r_max > 0.0 && self.v_max.is_finite() && self.v_max > 0.0) {
            return Err(Error::invalid("r_max/v_max", "must be positive"));
        }
        Ok(())
    }

    pub fn x_cells(&self) -> usize {
        self.x_points.pow(self.dim as u32)
    }

    pub fn len(&self) -> usize {
        self.x_cells() * self.r_points * self.v_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.x_cells() as f64
    }

    pub fn dr(&self) -> f64 {
        2.0 * self.r_max / self.r_points as f64
    }

    pub fn dv(&self) -> f64 {
        2.0 * self.v_max / self.v_points as f64
    }

    pub fn r_center(&self, i: usize) -> f64 {
        -self.r_max + (i as f64 + 0.5) * self.dr()
    }

    pub fn v_center(&self, j: usize) -> f64 {
        -self.v_max + (j as f64 + 0.5) * self.dv()
    }

    pub fn x_node(&self, cell: usize) -> Vec<f64> {
        let mut c = vec![0.0; self.dim];
        let mut rest = cell;
        for slot in c.iter_mut().rev() {
            *slot = (rest % self.x_points) as f64 / self.x_points as f64;
            rest /= self.x_points;
        }
        c
    }

    pub fn index(&self, cell: usize, i: usize, j: usize) -> usize {
        (cell * self.r_points + i) * self.v_points + j
    }
}

/// Nonnegative phase-space density on a [`VlasovGrid`] at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDensity {
    pub grid: VlasovGrid,
    pub values: Vec<f64>,
    pub t: f64,
}

impl PhaseDensity {
    pub fn new(grid: VlasovGrid, values: Vec<f64>, t: f64) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.len() {
            return Err(Error::SizeMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        if values.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::invalid("g", "density must be finite and >= 0"));
        }
        Ok(PhaseDensity { grid, values, t })
    }

    /// Samples `law.density(x, r, v)` at every node and cell centre.
    pub fn from_law(grid: VlasovGrid, law: &PhaseLaw) -> Result<Self> {
        law.validate()?;
        if matches!(law, PhaseLaw::PointMass { .. }) {
            return Err(Error::invalid("law", "a point mass has no density on the grid"));
        }
        let mut values = vec![0.0; grid.len()];
        for c in 0..grid.x_cells() {
            let x = grid.x_node(c);
            for i in 0..grid.r_points {
                for j in 0..grid.v_points {
                    values[grid.index(c, i, j)] = law.density(&x, grid.r_center(i), grid.v_center(j));
                }
            }
        }
        PhaseDensity::new(grid, values, 0.0)
    }

    pub fn from_fn(grid: VlasovGrid, f: impl Fn(&[f64], f64, f64) -> f64) -> Result<Self> {
        let mut values = vec![0.0; grid.len()];
        for c in 0..grid.x_cells() {
            let x = grid.x_node(c);
            for i in 0..grid.r_points {
                for j in 0..grid.v_points {
                    values[grid.index(c, i, j)] = f(&x, grid.r_center(i), grid.v_center(j));
                }
            }
        }
        PhaseDensity::new(grid, values, 0.0)
    }

    /// `∫ g dx dr dv` by the midpoint rule.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.dx() * self.grid.dr() * self.grid.dv()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    fn block(&self, cell: usize) -> &[f64] {
        let n = self.grid.r_points * self.grid.v_points;
        &self.values[cell * n..(cell + 1) * n]
    }
}

/// `ρ = ∫ g dr dv` and `m = ∫ r g dr dv` per x-node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub rho: Vec<f64>,
    pub m: Vec<f64>,
}

/// Midpoint quadrature of `ρ` and `m` over the `(r, v)` cells.
pub fn moments(g: &PhaseDensity) -> Moments {
    let grid = g.grid;
    let w = grid.dr() * grid.dv();
    let (rho, m) = (0..grid.x_cells())
        .map(|c| {
            let block = g.block(c);
            let mut rho = 0.0;
            let mut m = 0.0;
            for i in 0..grid.r_points {
                let row: f64 = block[i * grid.v_points..(i + 1) * grid.v_points].iter().sum();
                rho += row;
                m += grid.r_center(i) * row;
            }
            (rho * w, m * w)
        })
        .unzip();
    Moments { rho, m }
}

/// Conditional means of `r, v, r², v², rv` given `x`, per x-node. Nodes with
/// no mass give NaN.
pub fn local_observables(g: &PhaseDensity) -> Vec<[f64; 5]> {
    let grid = g.grid;
    (0..grid.x_cells())
        .map(|c| {
            let block = g.block(c);
            let mut acc = [0.0; 5];
            let mut mass = 0.0;
            for i in 0..grid.r_points {
                let r = grid.r_center(i);
                for j in 0..grid.v_points {
                    let v = grid.v_center(j);
                    let p = block[i * grid.v_points + j];
                    mass += p;
                    acc[0] += p * r;
                    acc[1] += p * v;
                    acc[2] += p * r * r;
                    acc[3] += p * v * v;
                    acc[4] += p * r * v;
                }
            }
            acc.map(|a| a / mass)
        })
        .collect()
}

/// `|2πk|^{2α}` for every natural-order FFT slot on `points^dim` nodes.
fn multiplier(points: usize, dim: usize, alpha: f64) -> Vec<f64> {
    let len = points.pow(dim as u32);
    (0..len)
        .map(|idx| {
            let mut rest = idx;
            let mut k2 = 0.0;
            for _ in 0..dim {
                let k = natural_wavenumber(rest % points, points) as f64;
                k2 += k * k;
                rest /= points;
            }
            (4.0 * PI * PI * k2).powf(alpha)
        })
        .collect()
}

/// Fractional Laplacian `(−Δ)^α` of a field sampled at the nodes `j/points`
/// (row-major over `dim` axes), realized as the multiplier `|2πk|^{2α}`.
pub fn frac_laplacian_torus(field: &[f64], points: usize, dim: usize, alpha: f64) -> Result<Vec<f64>> {
    FracLaplacian::new(points, dim, alpha)?.apply(field)
}

/// Planned [`frac_laplacian_torus`].
pub struct FracLaplacian {
    points: usize,
    dim: usize,
    fft: NdFft,
    symbol: Vec<f64>,
}

impl FracLaplacian {
    pub fn new(points: usize, dim: usize, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid("alpha", format!("must lie in (0,1), got {alpha}")));
        }
        if points == 0 || dim == 0 {
            return Err(Error::invalid("points", "grid must be non-empty"));
        }
        Ok(FracLaplacian {
            points,
            dim,
            fft: NdFft::new(points, dim),
            symbol: multiplier(points, dim, alpha),
        })
    }

    pub fn apply(&mut self, field: &[f64]) -> Result<Vec<f64>> {
        let len = self.points.pow(self.dim as u32);
        if field.len() != len {
            return Err(Error::SizeMismatch {
                expected: len,
                found: field.len(),
            });
        }
        let mut buf: Vec<Complex64> = field.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.fft.forward(&mut buf);
        let scale = 1.0 / len as f64;
        for (b, s) in buf.iter_mut().zip(&self.symbol) {
            *b *= s * scale;
        }
        self.fft.inverse(&mut buf);
        Ok(buf.into_iter().map(|z| z.re).collect())
    }
}

/// `Σ_g(x, r_i)` indexed `[cell][r_index]`, using the factorization through
/// `ρ` and `m`.
pub fn sigma_field(g: &PhaseDensity, fp: &FractionalParams) -> Result<Vec<f64>> {
    let mut lap = FracLaplacian::new(g.grid.x_points, g.grid.dim, fp.alpha())?;
    sigma_with(&mut lap, g)
}

fn sigma_with(lap: &mut FracLaplacian, g: &PhaseDensity) -> Result<Vec<f64>> {
    let grid = g.grid;
    let mo = moments(g);
    let lrho = lap.apply(&mo.rho)?;
    let lm = lap.apply(&mo.m)?;
    let mut out = vec![0.0; grid.x_cells() * grid.r_points];
    for c in 0..grid.x_cells() {
        for i in 0..grid.r_points {
            out[c * grid.r_points + i] = grid.r_center(i) * lrho[c] - lm[c];
        }
    }
    Ok(out)
}

/// Translates one line of cell averages by `shift` cells (positive means
/// towards higher index) with the PFC scheme and zero inflow. `fmax` is the
/// upper bound the limiter preserves; it must be at least the line maximum.
/// Returns the mass, in cell-value units, that left the line.
pub fn pfc_translate(line: &mut [f64], shift: f64, fmax: f64, scratch: &mut Vec<f64>) -> f64 {
    if shift == 0.0 {
        return 0.0;
    }
    if shift < 0.0 {
        line.reverse();
        let out = pfc_translate(line, -shift, fmax, scratch);
        line.reverse();
        return out;
    }
    let n = line.len();
    let whole = shift.floor();
    let theta = shift - whole;
    let whole = whole as usize;
    let at = |i: isize| -> f64 {
        if i < 0 || i as usize >= n {
            0.0
        } else {
            line[i as usize]
        }
    };
    // flux[j] is the mass through the right face of cell j - 1, j = 0..=n
    scratch.clear();
    scratch.resize(n + 1, 0.0);
    for face in 0..=n {
        let right_of = face as isize - 1;
        let mut flux = 0.0;
        for l in 0..whole {
            flux += at(right_of - l as isize);
        }
        if theta > 0.0 {
            let i = right_of - whole as isize;
            let (fm, f0, fp) = (at(i - 1), at(i), at(i + 1));
            let eps_plus = if fp > f0 {
                (2.0 * f0 / (fp - f0)).min(1.0)
            } else if fp < f0 {
                (-2.0 * (fmax - f0) / (fp - f0)).min(1.0)
            } else {
                1.0
            };
            let eps_minus = if f0 > fm {
                (2.0 * (fmax - f0) / (f0 - fm)).min(1.0)
            } else if f0 < fm {
                (-2.0 * f0 / (f0 - fm)).min(1.0)
            } else {
                1.0
            };
            flux += theta
                * (f0
                    + eps_plus / 6.0 * (1.0 - theta) * (2.0 - theta) * (fp - f0)
                    + eps_minus / 6.0 * (1.0 - theta) * (1.0 + theta) * (f0 - fm));
        }
        scratch[face] = flux;
    }
    for j in 0..n {
        line[j] = (line[j] - (scratch[j + 1] - scratch[j])).max(0.0);
    }
    scratch[n]
}

/// Per-step bookkeeping of [`VlasovSolver::step`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub mass_before: f64,
    pub mass_after: f64,
    pub escaped_mass: f64,
    pub max_before: f64,
    pub max_after: f64,
    /// `max|v| dt / dr`.
    pub courant_r: f64,
    /// `max|Σ/C| dt / dv` over both half steps.
    pub courant_v: f64,
}

/// Strang-split PFC solver for one grid and fractional order.
pub struct VlasovSolver {
    grid: VlasovGrid,
    fp: FractionalParams,
    lap: FracLaplacian,
    /// Courant number above which a warning is logged.
    pub courant_warning: f64,
    warned_escape: bool,
    warned_courant: bool,
}

impl VlasovSolver {
    pub fn new(grid: VlasovGrid, fp: FractionalParams) -> Result<Self> {
        grid.validate()?;
        if grid.dim != fp.dim() {
            return Err(Error::DimensionMismatch(format!(
                "grid has d={} but fractional parameters have d={}",
                grid.dim,
                fp.dim()
            )));
        }
        Ok(VlasovSolver {
            lap: FracLaplacian::new(grid.x_points, grid.dim, fp.alpha())?,
            grid,
            fp,
            courant_warning: 1.0,
            warned_escape: false,
            warned_courant: false,
        })
    }

    pub fn grid(&self) -> &VlasovGrid {
        &self.grid
    }

    /// `C^{-1} Σ_g` indexed `[cell][r_index]`.
    pub fn acceleration(&mut self, g: &PhaseDensity) -> Result<Vec<f64>> {
        let c = self.fp.normalization();
        Ok(sigma_with(&mut self.lap, g)?.into_iter().map(|s| s / c).collect())
    }

    fn v_sweep(&mut self, g: &mut PhaseDensity, dt: f64) -> Result<(f64, f64)> {
        let grid = self.grid;
        let acc = self.acceleration(g)?;
        let dv = grid.dv();
        let courant = acc.iter().map(|a| (a * dt / dv).abs()).fold(0.0, f64::max);
        let fmax = g.max();
        let escaped: f64 = g
            .values
            .par_chunks_mut(grid.v_points)
            .zip(acc.par_iter())
            .map_init(Vec::new, |scratch, (line, a)| pfc_translate(line, a * dt / dv, fmax, scratch))
            .collect::<Vec<f64>>()
            .iter()
            .sum();
        Ok((escaped * grid.dx() * grid.dr() * dv, courant))
    }

    fn r_sweep(&self, g: &mut PhaseDensity, dt: f64) -> f64 {
        let grid = self.grid;
        let block = grid.r_points * grid.v_points;
        let dr = grid.dr();
        let fmax = g.max();
        let escaped: f64 = g
            .values
            .par_chunks_mut(block)
            .map(|cell| {
                let mut line = vec![0.0; grid.r_points];
                let mut scratch = Vec::new();
                let mut out = 0.0;
                for j in 0..grid.v_points {
                    for i in 0..grid.r_points {
                        line[i] = cell[i * grid.v_points + j];
                    }
                    out += pfc_translate(&mut line, grid.v_center(j) * dt / dr, fmax, &mut scratch);
                    for i in 0..grid.r_points {
                        cell[i * grid.v_points + j] = line[i];
                    }
                }
                out
            })
            .collect::<Vec<f64>>()
            .iter()
            .sum();
        escaped * grid.dx() * dr * grid.dv()
    }

    pub fn step(&mut self, g: &mut PhaseDensity, dt: f64) -> Result<StepDiagnostics> {
        if g.grid != self.grid {
            return Err(Error::DimensionMismatch("density grid differs from solver grid".into()));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
        }
        let mut d = StepDiagnostics {
            mass_before: g.mass(),
            max_before: g.max(),
            courant_r: self.grid.v_max * dt / self.grid.dr(),
            ..Default::default()
        };
        let (e1, c1) = self.v_sweep(g, dt / 2.0)?;
        let e2 = self.r_sweep(g, dt);
        let (e3, c3) = self.v_sweep(g, dt / 2.0)?;
        g.t += dt;
        d.escaped_mass = e1 + e2 + e3;
        d.courant_v = c1.max(c3);
        d.mass_after = g.mass();
        d.max_after = g.max();
        if d.escaped_mass > 1e-12 * d.mass_before.max(f64::MIN_POSITIVE) {
            let level = if self.warned_escape { log::Level::Debug } else { log::Level::Warn };
            self.warned_escape = true;
            log::log!(
                level,
                "t={}: mass {:e} left the (r, v) box; widen r_max/v_max",
                g.t,
                d.escaped_mass
            );
        }
        if d.courant_r.max(d.courant_v) > self.courant_warning {
            let level = if self.warned_courant { log::Level::Debug } else { log::Level::Warn };
            self.warned_courant = true;
            log::log!(
                level,
                "t={}: Courant numbers r={:.3} v={:.3} exceed {}",
                g.t,
                d.courant_r,
                d.courant_v,
                self.courant_warning
            );
        }
        Ok(d)
    }

    /// Takes `n_steps` steps; returns the summed escaped mass.
    pub fn evolve(&mut self, g: &mut PhaseDensity, dt: f64, n_steps: usize) -> Result<f64> {
        let mut escaped = 0.0;
        for _ in 0..n_steps {
            escaped += self.step(g, dt)?.escaped_mass;
        }
        Ok(escaped)
    }
}

pub fn vlasov_step(g: &PhaseDensity, fp: &FractionalParams, dt: f64) -> Result<PhaseDensity> {
    let mut next = g.clone();
    VlasovSolver::new(g.grid, *fp)?.step(&mut next, dt)?;
    Ok(next)
}

/// Names of the compared observables, in report order.
pub const OBSERVABLES: [&str; 5] = ["r", "v", "r2", "v2", "rv"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableDistance {
    pub name: String,
    pub sup: f64,
    /// Root mean square over x-cells.
    pub l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldReport {
    pub observables: Vec<ObservableDistance>,
    /// Root mean square of the per-observable `l2` values.
    pub combined_l2: f64,
    /// Per x-cell values `[cell][observable]` from the ensemble.
    pub ensemble: Vec<[f64; 5]>,
    /// Per x-cell values from the density, averaged over the cell's sites.
    pub density: Vec<[f64; 5]>,
}

/// Trigonometric interpolant of node values `values` (on `points^dim`
/// nodes) evaluated at `x`.
fn trig_interpolate(coeffs: &[Complex64], points: usize, dim: usize, x: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (idx, c) in coeffs.iter().enumerate() {
        let mut rest = idx;
        let mut phase = 0.0;
        for axis in (0..dim).rev() {
            let k = natural_wavenumber(rest % points, points) as f64;
            phase += k * x[axis];
            rest /= points;
        }
        acc += (c * Complex64::from_polar(1.0, 2.0 * PI * phase)).re;
    }
    acc
}

/// Compares per x-cell means of `r, v, r², v², rv` between the ensemble and
/// the density. Each lattice site is assigned to its nearest x-node; the
/// density's value for a cell is the trigonometric interpolant of its node
/// observables averaged over the positions of the cell's sites.
pub fn meanfield_distance(g: &PhaseDensity, ens: &ChainEnsemble) -> Result<MeanFieldReport> {
    let grid = g.grid;
    let spec = ens.spec;
    if spec.dim() != grid.dim {
        return Err(Error::DimensionMismatch(format!(
            "ensemble has d={} but density has d={}",
            spec.dim(),
            grid.dim
        )));
    }
    let first = ens.states.first().ok_or(Error::EmptyEnsemble)?;
    if (first.t - g.t).abs() > 1e-9 * g.t.abs().max(1.0) {
        return Err(Error::invalid(
            "t",
            format!("ensemble time {} differs from density time {}", first.t, g.t),
        ));
    }
    let chain = cell_observables(ens, grid.x_points)?;
    let nodes = local_observables(g);
    let cells = grid.x_cells();
    let mut fft = NdFft::new(grid.x_points, grid.dim);
    let coeffs: Vec<Vec<Complex64>> = (0..5)
        .map(|o| {
            let mut buf: Vec<Complex64> = nodes.iter().map(|n| Complex64::new(n[o], 0.0)).collect();
            fft.forward(&mut buf);
            buf.iter_mut().for_each(|z| *z /= cells as f64);
            buf
        })
        .collect();
    let mut density = vec![[0.0; 5]; cells];
    let mut counts = vec![0usize; cells];
    for site in 0..spec.len() {
        let c = site_cell(&spec, site, grid.x_points);
        let x = spec.site_position(site);
        counts[c] += 1;
        for o in 0..5 {
            density[c][o] += trig_interpolate(&coeffs[o], grid.x_points, grid.dim, &x);
        }
    }
    for (d, &n) in density.iter_mut().zip(&counts) {
        d.iter_mut().for_each(|v| *v /= n as f64);
    }
    let populated: Vec<usize> = (0..cells).filter(|&c| counts[c] > 0).collect();
    if populated.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let observables: Vec<ObservableDistance> = OBSERVABLES
        .iter()
        .enumerate()
        .map(|(o, name)| {
            let diffs: Vec<f64> = populated.iter().map(|&c| chain[c][o] - density[c][o]).collect();
            ObservableDistance {
                name: name.to_string(),
                sup: diffs.iter().map(|d| d.abs()).fold(0.0, f64::max),
                l2: (diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64).sqrt(),
            }
        })
        .collect();
    let combined_l2 = (observables.iter().map(|o| o.l2 * o.l2).sum::<f64>() / 5.0).sqrt();
    Ok(MeanFieldReport {
        observables,
        combined_l2,
        ensemble: chain,
        density,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DensityHeader {
    grid: VlasovGrid,
    t: f64,
    alpha: f64,
    layout: String,
}

/// Header path used by [`write_density`]: same stem, `.json` extension.
pub fn header_path(bin: &Path) -> PathBuf {
    bin.with_extension("json")
}

/// Writes the values as little-endian `f64` to `path` and a JSON header
/// (grid, time, `alpha`) next to it.
pub fn write_density(path: &Path, g: &PhaseDensity, alpha: f64) -> Result<()> {
    let mut bytes = Vec::with_capacity(8 * g.values.len());
    for v in &g.values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let header = DensityHeader {
        grid: g.grid,
        t: g.t,
        alpha,
        layout: "f64-le, row-major [x][r][v]".into(),
    };
    let hp = header_path(path);
    let text = serde_json::to_string_pretty(&header).expect("header serializes");
    std::fs::write(&hp, text).map_err(|e| Error::io(&hp, e))
}

/// Reads a density written by [`write_density`]; returns it with `alpha`.
pub fn read_density(path: &Path) -> Result<(PhaseDensity, f64)> {
    let hp = header_path(path);
    let text = std::fs::read_to_string(&hp).map_err(|e| Error::io(&hp, e))?;
    let header: DensityHeader = serde_json::from_str(&text).map_err(|e| Error::Format {
        path: hp.clone(),
        reason: e.to_string(),
    })?;
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != 8 * header.grid.len() {
        return Err(Error::Format {
            path: path.to_path_buf(),
            reason: format!("expected {} bytes, found {}", 8 * header.grid.len(), bytes.len()),
        });
    }
    let values = bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("chunk of 8")))
        .collect();
    Ok((PhaseDensity::new(header.grid, values, header.t)?, header.alpha))
}

/// Writes `x0..,rho,m` rows, one per x-node.
pub fn write_moments(path: &Path, g: &PhaseDensity) -> Result<()> {
    let mo = moments(g);
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        writeln!(w, "# t={:e}; rho = ∫g dr dv, m = ∫r g dr dv", g.t)?;
        let xs: Vec<String> = (0..g.grid.dim).map(|j| format!("x{j}")).collect();
        writeln!(w, "{},rho,m", xs.join(","))?;
        for c in 0..g.grid.x_cells() {
            let x: Vec<String> = g.grid.x_node(c).iter().map(|v| format!("{v:e}")).collect();
            writeln!(w, "{},{:e},{:e}", x.join(","), mo.rho[c], mo.m[c])?;
        }
        w.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

/// Reads `(rho, m)` columns written by [`write_moments`].
pub fn read_moments(path: &Path) -> Result<Moments> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut mo = Moments {
        rho: vec![],
        m: vec![],
    };
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.starts_with('#') || line.starts_with('x') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|e| Error::Format {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })
        };
        mo.rho.push(parse(cols[cols.len() - 2])?);
        mo.m.push(parse(cols[cols.len() - 1])?);
    }
    Ok(mo)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> VlasovGrid {
        VlasovGrid::new(1, 8, (2.0, 20), (2.0, 20)).unwrap()
    }

    #[test]
    fn constant_field_is_annihilated() {
        let out = frac_laplacian_torus(&[3.0; 16], 16, 1, 0.4).unwrap();
        assert!(out.iter().all(|x| x.abs() < 1e-13));
    }

    #[test]
    fn cosine_is_an_eigenfunction() {
        for points in [16, 17] {
            let alpha = 0.35;
            let f: Vec<f64> = (0..points).map(|j| (2.0 * PI * j as f64 / points as f64).cos()).collect();
            let out = frac_laplacian_torus(&f, points, 1, alpha).unwrap();
            let lam = (2.0 * PI).powf(2.0 * alpha);
            for (a, b) in out.iter().zip(&f) {
                assert!((a - lam * b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn moments_of_cell_indicator() {
        let g0 = grid();
        let mut values = vec![0.0; g0.len()];
        values[g0.index(3, 5, 7)] = 1.0 / (g0.dr() * g0.dv());
        let g = PhaseDensity::new(g0, values, 0.0).unwrap();
        let mo = moments(&g);
        assert!((mo.rho[3] - 1.0).abs() < 1e-14);
        assert!((mo.m[3] - g0.r_center(5)).abs() < 1e-14);
        assert!(mo.rho.iter().enumerate().all(|(c, &r)| c == 3 || r == 0.0));
        let zero = moments(&PhaseDensity::new(g0, vec![0.0; g0.len()], 0.0).unwrap());
        assert!(zero.rho.iter().chain(&zero.m).all(|&x| x == 0.0));
    }

    #[test]
    fn pfc_whole_cell_shift_is_exact() {
        let mut line = vec![0.0, 1.0, 2.0, 3.0, 0.0, 0.0];
        let mut scratch = Vec::new();
        let out = pfc_translate(&mut line, 2.0, 3.0, &mut scratch);
        assert_eq!(line, vec![0.0, 0.0, 0.0, 1.0, 2.0, 3.0]);
        assert_eq!(out, 0.0);
        let out = pfc_translate(&mut line, -1.0, 3.0, &mut scratch);
        assert_eq!(line, vec![0.0, 0.0, 1.0, 2.0, 3.0, 0.0]);
        assert_eq!(out, 0.0);
        let out = pfc_translate(&mut line, 2.0, 3.0, &mut scratch);
        assert_eq!(out, 3.0);
    }

    #[test]
    fn pfc_conserves_and_stays_positive() {
        let mut line: Vec<f64> = (0..40).map(|i| if (10..20).contains(&i) { 1.0 } else { 0.0 }).collect();
        let mut scratch = Vec::new();
        let mut escaped = 0.0;
        for _ in 0..30 {
            escaped += pfc_translate(&mut line, 0.37, 1.0, &mut scratch);
            assert!(line.iter().all(|&x| (0.0..=1.0 + 1e-15).contains(&x)));
        }
        let total: f64 = line.iter().sum();
        assert!(escaped > 0.0);
        assert!((total + escaped - 10.0).abs() < 1e-12, "{total} + {escaped}");
    }

    #[test]
    fn pfc_is_exact_for_linear_interior_data() {
        let mut line: Vec<f64> = (0..20).map(|i| 1.0 + 0.1 * i as f64).collect();
        let before = line.clone();
        let mut scratch = Vec::new();
        pfc_translate(&mut line, 0.3, 10.0, &mut scratch);
        for i in 3..19 {
            assert!((line[i] - (before[i] - 0.03)).abs() < 1e-14, "cell {i}");
        }
    }

    #[test]
    fn homogeneous_density_has_no_field() {
        let g = PhaseDensity::from_fn(grid(), |_, r, v| (-(r * r + v * v)).exp()).unwrap();
        let fp = FractionalParams::new(1, 0.5).unwrap();
        assert!(sigma_field(&g, &fp).unwrap().iter().all(|s| s.abs() < 1e-12));
    }

    #[test]
    fn density_io_round_trip() {
        let g = PhaseDensity::from_fn(grid(), |x, r, v| (1.0 + x[0]) * (-(r * r + v * v)).exp())
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.bin");
        write_density(&path, &g, 0.4).unwrap();
        let (back, alpha) = read_density(&path).unwrap();
        assert_eq!(back, g);
        assert_eq!(alpha, 0.4);
        let mpath = dir.path().join("m.csv");
        write_moments(&mpath, &g).unwrap();
        let mo = read_moments(&mpath).unwrap();
        let direct = moments(&g);
        for (a, b) in mo.rho.iter().zip(&direct.rho) {
            assert!((a - b).abs() <= 1e-15 * b.abs().max(1.0));
        }
    }
}
