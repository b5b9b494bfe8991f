//! Discrete 3-wave kinetic equation on the torus.
//!
//! ```text
//! ∂_τ f(k) = C[f](k)
//! C[f](k) = ∫ K δ(k−k1−k2) δ(ω−ω1−ω2) [f1f2 − ff1 − ff2]
//!         − 2 ∫ K δ(k1−k−k2) δ(ω1−ω−ω2) [f2f − ff1 − f1f2]
//! K = [8 ω ω1 ω2]^{-1},  ω(k) = Σ_j sin²(2πk_j)
//! ```
//!
//! Quadrature uses uniform weights `M^{-d}` on the grid nodes `j/M`; the
//! momentum delta is enforced exactly by the grid's modular addition, the
//! frequency delta is replaced by a normalized broadening profile. Nodes with
//! `ω` below a floor are masked: they take no part in any interaction and
//! their value is held fixed.

use std::f64::consts::PI;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::dispersion;

/// Uniform periodic grid with `points` nodes `j/points` per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusGrid {
    dim: usize,
    points: usize,
}

impl TorusGrid {
    pub fn new(dim: usize, points: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        if points < 4 {
            return Err(Error::invalid("points", format!("need at least 4 per axis, got {points}")));
        }
        points
            .checked_pow(dim as u32)
            .ok_or_else(|| Error::invalid("points", "grid too large"))?;
        Ok(TorusGrid { dim, points })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight of one node, `M^{-d}`.
    pub fn weight(&self) -> f64 {
        1.0 / self.len() as f64
    }

    pub fn coords(&self, index: usize) -> Vec<usize> {
        let mut c = vec![0; self.dim];
        let mut rest = index;
        for slot in c.iter_mut().rev() {
            *slot = rest % self.points;
            rest /= self.points;
        }
        c
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords.iter().fold(0, |acc, &c| acc * self.points + c % self.points)
    }

    /// Node position `j/M` in `[0,1)^d`.
    pub fn node(&self, index: usize) -> Vec<f64> {
        let m = self.points as f64;
        self.coords(index).into_iter().map(|j| j as f64 / m).collect()
    }

    /// Node carrying integer wavenumber `k`, i.e. `k mod M` per axis.
    pub fn node_of_wavenumber(&self, k: &[i64]) -> usize {
        let m = self.points as i64;
        k.iter()
            .fold(0, |acc, &kj| acc * self.points + kj.rem_euclid(m) as usize)
    }

    /// Node of `k_a + k_b (mod 1)`.
    pub fn add(&self, a: usize, b: usize) -> usize {
        self.combine(a, b, |x, y, m| (x + y) % m)
    }

    /// Node of `k_a − k_b (mod 1)`.
    pub fn sub(&self, a: usize, b: usize) -> usize {
        self.combine(a, b, |x, y, m| (x + m - y) % m)
    }

    fn combine(&self, a: usize, b: usize, op: impl Fn(usize, usize, usize) -> usize) -> usize {
        let (ca, cb) = (self.coords(a), self.coords(b));
        let c: Vec<usize> = ca.iter().zip(&cb).map(|(&x, &y)| op(x, y, self.points)).collect();
        self.index(&c)
    }

    /// Node of `−k (mod 1)`.
    pub fn negate(&self, a: usize) -> usize {
        self.sub(0, a)
    }

    /// `ω` at every node.
    pub fn omega(&self) -> Vec<f64> {
        (0..self.len()).map(|i| dispersion(&self.node(i))).collect()
    }
}

/// Nonnegative values on a [`TorusGrid`] at kinetic time `tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    grid: TorusGrid,
    values: Vec<f64>,
    tau: f64,
}

impl Spectrum {
    pub fn new(grid: TorusGrid, values: Vec<f64>, tau: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::SizeMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        if let Some((i, &v)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::NegativeSpectrum {
                wavenumber: grid.coords(i).into_iter().map(|c| c as i64).collect(),
                value: v,
            });
        }
        Ok(Spectrum { grid, values, tau })
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Spectrum {
            values: vec![0.0; grid.len()],
            grid,
            tau: 0.0,
        }
    }

    /// Tabulates `f` at the nodes.
    pub fn from_fn(grid: TorusGrid, tau: f64, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(&grid.node(i))).collect();
        Spectrum::new(grid, values, tau)
    }

    /// `f = T/ω` on unmasked nodes and 0 where `ω < omega_floor`.
    pub fn rayleigh_jeans(grid: TorusGrid, temperature: f64, omega_floor: f64) -> Result<Self> {
        let values = grid
            .omega()
            .into_iter()
            .map(|w| if w < omega_floor { 0.0 } else { temperature / w })
            .collect();
        Spectrum::new(grid, values, 0.0)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    /// Periodic multilinear interpolation at `point ∈ T^d`.
    pub fn interpolate(&self, point: &[f64]) -> f64 {
        let m = self.grid.points;
        let d = self.grid.dim;
        let mut base = vec![0usize; d];
        let mut frac = vec![0.0; d];
        for j in 0..d {
            let s = point[j].rem_euclid(1.0) * m as f64;
            let fl = s.floor();
            base[j] = (fl as usize) % m;
            frac[j] = s - fl;
        }
        let mut acc = 0.0;
        let mut corner = vec![0usize; d];
        for mask in 0..(1usize << d) {
            let mut w = 1.0;
            for j in 0..d {
                let up = (mask >> j) & 1 == 1;
                corner[j] = if up { (base[j] + 1) % m } else { base[j] };
                w *= if up { frac[j] } else { 1.0 - frac[j] };
            }
            if w != 0.0 {
                acc += w * self.values[self.grid.index(&corner)];
            }
        }
        acc
    }

    /// Resamples onto `grid` by periodic multilinear interpolation.
    pub fn resample(&self, grid: TorusGrid) -> Result<Spectrum> {
        if grid.dim != self.grid.dim {
            return Err(Error::DimensionMismatch(format!(
                "cannot resample a {}-d spectrum onto a {}-d grid",
                self.grid.dim, grid.dim
            )));
        }
        if grid == self.grid {
            return Ok(self.clone());
        }
        let values = (0..grid.len()).map(|i| self.interpolate(&grid.node(i))).collect();
        Ok(Spectrum {
            grid,
            values,
            tau: self.tau,
        })
    }
}

/// Shape of the broadened frequency delta.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Gaussian,
    Lorentzian,
}

/// Default mask threshold for `ω`.
pub fn default_omega_floor() -> f64 {
    10.0 * f64::EPSILON.sqrt()
}

/// Broadened realization of `δ(ω−ω1−ω2)` and the mask threshold for `ω = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonanceRule {
    epsilon: f64,
    profile: Profile,
    omega_floor: f64,
}

impl ResonanceRule {
    pub fn new(epsilon: f64, profile: Profile) -> Result<Self> {
        Self::with_floor(epsilon, profile, default_omega_floor())
    }

    pub fn with_floor(epsilon: f64, profile: Profile, omega_floor: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::invalid("epsilon", format!("must be positive, got {epsilon}")));
        }
        if !(omega_floor.is_finite() && omega_floor >= 0.0) {
            return Err(Error::invalid("omega_floor", "must be finite and >= 0"));
        }
        Ok(ResonanceRule {
            epsilon,
            profile,
            omega_floor,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn profile(&self) -> Profile {
        self.profile
    }

    pub fn omega_floor(&self) -> f64 {
        self.omega_floor
    }

    /// Unit-integral profile evaluated at frequency mismatch `x`.
    pub fn delta(&self, x: f64) -> f64 {
        let e = self.epsilon;
        match self.profile {
            Profile::Gaussian => (-0.5 * (x / e).powi(2)).exp() / (e * (2.0 * PI).sqrt()),
            Profile::Lorentzian => e / (PI * (x * x + e * e)),
        }
    }
}

/// Collision operator with all kernel and resonance weights precomputed.
///
/// For each output node `k` it stores the gain weights
/// `M^{-d} K(k,k1,k−k1) Δ(ω−ω1−ω2)` over `k1` and the loss weights
/// `2 M^{-d} K(k,k+k2,k2) Δ(ω1−ω−ω2)` over `k2`, skipping masked triads
/// and weights that underflow to zero.
pub struct CollisionOperator {
    grid: TorusGrid,
    rule: ResonanceRule,
    omega: Vec<f64>,
    masked: Vec<bool>,
    gain: Vec<Vec<(u32, u32, f64)>>,
    loss: Vec<Vec<(u32, u32, f64)>>,
}

impl CollisionOperator {
    pub fn new(grid: TorusGrid, rule: ResonanceRule) -> Self {
        let omega = grid.omega();
        let masked: Vec<bool> = omega.iter().map(|&w| w < rule.omega_floor).collect();
        let weight = grid.weight();
        let n = grid.len();
        let rows: Vec<_> = (0..n)
            .into_par_iter()
            .map(|k| {
                let mut gain = Vec::new();
                let mut loss = Vec::new();
                if masked[k] {
                    return (gain, loss);
                }
                let w = omega[k];
                for k1 in 0..n {
                    let k2 = grid.sub(k, k1);
                    if !masked[k1] && !masked[k2] {
                        let (w1, w2) = (omega[k1], omega[k2]);
                        let c = weight * rule.delta(w - w1 - w2) / (8.0 * w * w1 * w2);
                        if c != 0.0 {
                            gain.push((k1 as u32, k2 as u32, c));
                        }
                    }
                }
                for k2 in 0..n {
                    let k1 = grid.add(k, k2);
                    if !masked[k1] && !masked[k2] {
                        let (w1, w2) = (omega[k1], omega[k2]);
                        let c = 2.0 * weight * rule.delta(w1 - w - w2) / (8.0 * w * w1 * w2);
                        if c != 0.0 {
                            loss.push((k1 as u32, k2 as u32, c));
                        }
                    }
                }
                (gain, loss)
            })
            .collect();
        let (gain, loss) = rows.into_iter().unzip();
        CollisionOperator {
            grid,
            rule,
            omega,
            masked,
            gain,
            loss,
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn rule(&self) -> &ResonanceRule {
        &self.rule
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn masked(&self) -> &[bool] {
        &self.masked
    }

    fn rate(&self, f: &[f64]) -> Vec<f64> {
        (0..f.len())
            .into_par_iter()
            .map(|k| {
                let fk = f[k];
                let mut gain = 0.0;
                for &(k1, k2, c) in &self.gain[k] {
                    let (f1, f2) = (f[k1 as usize], f[k2 as usize]);
                    gain += c * (f1 * f2 - fk * f1 - fk * f2);
                }
                let mut loss = 0.0;
                for &(k1, k2, c) in &self.loss[k] {
                    let (f1, f2) = (f[k1 as usize], f[k2 as usize]);
                    loss += c * (f2 * fk - fk * f1 - f1 * f2);
                }
                gain - loss
            })
            .collect()
    }

    /// `C[f]` at every node; zero on masked nodes.
    pub fn apply(&self, f: &Spectrum) -> Result<Vec<f64>> {
        if f.grid != self.grid {
            return Err(Error::DimensionMismatch(format!(
                "spectrum grid {:?} differs from operator grid {:?}",
                f.grid, self.grid
            )));
        }
        Ok(self.rate(&f.values))
    }

    /// `M^{-d} Σ ω C[f]`, the rate of change of [`energy_moment`].
    pub fn energy_rate(&self, f: &Spectrum) -> Result<f64> {
        let c = self.apply(f)?;
        Ok(self.grid.weight() * c.iter().zip(&self.omega).map(|(c, w)| c * w).sum::<f64>())
    }
}

/// `C[f]` at every node.
pub fn collision(f: &Spectrum, rule: &ResonanceRule) -> Result<Vec<f64>> {
    CollisionOperator::new(f.grid, *rule).apply(f)
}

/// `M^{-d} Σ_k ω(k) f(k)`.
pub fn energy_moment(f: &Spectrum) -> f64 {
    let g = f.grid;
    g.weight()
        * (0..g.len())
            .map(|i| dispersion(&g.node(i)) * f.values[i])
            .sum::<f64>()
}

/// Explicit time-stepping scheme for the kinetic equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KineticScheme {
    Rk4,
    Euler,
}

/// What one step did besides advancing the spectrum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    /// `M^{-d}` times the total magnitude of negative values set to zero.
    pub clipped_mass: f64,
    pub clipped_nodes: usize,
    pub max_value: f64,
}

/// Kinetic integrator: operator, scheme and blow-up bound.
pub struct KineticSolver {
    op: CollisionOperator,
    scheme: KineticScheme,
    bound: f64,
}

impl KineticSolver {
    pub fn new(op: CollisionOperator, scheme: KineticScheme, bound: f64) -> Result<Self> {
        if !(bound > 0.0) {
            return Err(Error::invalid("bound", "blow-up bound must be positive"));
        }
        Ok(KineticSolver { op, scheme, bound })
    }

    pub fn operator(&self) -> &CollisionOperator {
        &self.op
    }

    pub fn step(&self, f: &Spectrum, dtau: f64) -> Result<(Spectrum, StepReport)> {
        if !(dtau.is_finite() && dtau > 0.0) {
            return Err(Error::invalid("dtau", format!("must be positive, got {dtau}")));
        }
        if f.grid != self.op.grid {
            return Err(Error::DimensionMismatch("spectrum grid differs from operator grid".into()));
        }
        let y = &f.values;
        let mut next = match self.scheme {
            KineticScheme::Euler => {
                let k1 = self.op.rate(y);
                y.iter().zip(&k1).map(|(a, b)| a + dtau * b).collect::<Vec<_>>()
            }
            KineticScheme::Rk4 => {
                let shift = |k: &[f64], s: f64| -> Vec<f64> {
                    y.iter().zip(k).map(|(a, b)| a + s * b).collect()
                };
                let k1 = self.op.rate(y);
                let k2 = self.op.rate(&shift(&k1, dtau / 2.0));
                let k3 = self.op.rate(&shift(&k2, dtau / 2.0));
                let k4 = self.op.rate(&shift(&k3, dtau));
                (0..y.len())
                    .map(|i| y[i] + dtau / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]))
                    .collect()
            }
        };
        let tau = f.tau + dtau;
        let mut report = StepReport::default();
        for v in next.iter_mut() {
            if !v.is_finite() {
                return Err(Error::BlowUp {
                    tau,
                    max: f64::INFINITY,
                    bound: self.bound,
                });
            }
            if *v < 0.0 {
                report.clipped_mass -= *v;
                report.clipped_nodes += 1;
                *v = 0.0;
            }
            report.max_value = report.max_value.max(*v);
        }
        report.clipped_mass *= self.op.grid.weight();
        if report.clipped_nodes > 0 {
            log::warn!(
                "tau={tau}: clipped {} negative nodes, mass {:e}",
                report.clipped_nodes,
                report.clipped_mass
            );
        }
        if report.max_value > self.bound {
            return Err(Error::BlowUp {
                tau,
                max: report.max_value,
                bound: self.bound,
            });
        }
        Ok((
            Spectrum {
                grid: f.grid,
                values: next,
                tau,
            },
            report,
        ))
    }

    /// Takes `n_steps` steps, returning the final spectrum and the summed
    /// clipped mass.
    pub fn evolve(&self, f: &Spectrum, dtau: f64, n_steps: usize) -> Result<(Spectrum, f64)> {
        let mut cur = f.clone();
        let mut clipped = 0.0;
        for _ in 0..n_steps {
            let (next, report) = self.step(&cur, dtau)?;
            clipped += report.clipped_mass;
            cur = next;
        }
        Ok((cur, clipped))
    }
}

/// One step of size `dtau`, with no blow-up bound.
pub fn step(
    f: &Spectrum,
    rule: &ResonanceRule,
    dtau: f64,
    scheme: KineticScheme,
) -> Result<Spectrum> {
    let solver = KineticSolver::new(CollisionOperator::new(f.grid, *rule), scheme, f64::INFINITY)?;
    Ok(solver.step(f, dtau)?.0)
}

/// Per-node entry of a [`DistanceReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeDistance {
    pub node: Vec<f64>,
    pub reference: f64,
    pub other: f64,
    pub diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
    pub modes: Vec<ModeDistance>,
}

/// Distances between two spectra, measured on the grid of `reference`.
/// `other` is resampled by periodic multilinear interpolation when its grid
/// differs. `l1` and `l2` carry the quadrature weight `M^{-d}`.
pub fn compare_spectra(reference: &Spectrum, other: &Spectrum) -> Result<DistanceReport> {
    let other = other.resample(reference.grid)?;
    let g = reference.grid;
    let mut report = DistanceReport {
        l1: 0.0,
        l2: 0.0,
        linf: 0.0,
        modes: Vec::with_capacity(g.len()),
    };
    for i in 0..g.len() {
        let (a, b) = (reference.values[i], other.values[i]);
        let diff = b - a;
        report.l1 += diff.abs();
        report.l2 += diff * diff;
        report.linf = report.linf.max(diff.abs());
        report.modes.push(ModeDistance {
            node: g.node(i),
            reference: a,
            other: b,
            diff,
        });
    }
    report.l1 *= g.weight();
    report.l2 = (report.l2 * g.weight()).sqrt();
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SpectrumSidecar {
    grid: TorusGrid,
    tau: f64,
    #[serde(default)]
    meta: serde_json::Value,
}

/// Sidecar path used by [`write_spectrum`]: same stem, `.json` extension.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// Writes `k0..,f` rows to `path` and `{grid, tau, meta}` to the sidecar.
pub fn write_spectrum(path: &Path, f: &Spectrum, meta: &serde_json::Value) -> Result<()> {
    let g = f.grid;
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        writeln!(w, "# k in torus units [0,1), f dimensionless")?;
        let cols: Vec<String> = (0..g.dim).map(|j| format!("k{j}")).collect();
        writeln!(w, "{},f", cols.join(","))?;
        for i in 0..g.len() {
            let node: Vec<String> = g.node(i).iter().map(|x| format!("{x:e}")).collect();
            writeln!(w, "{},{:e}", node.join(","), f.values[i])?;
        }
        w.flush()
    };
    write().map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    let sidecar = SpectrumSidecar {
        grid: g,
        tau: f.tau,
        meta: meta.clone(),
    };
    let text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    std::fs::write(&side, text).map_err(|e| Error::io(&side, e))
}

/// Reads a spectrum written by [`write_spectrum`], returning it with the
/// sidecar metadata.
pub fn read_spectrum(path: &Path) -> Result<(Spectrum, serde_json::Value)> {
    let side = sidecar_path(path);
    let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let sidecar: SpectrumSidecar = serde_json::from_str(&text).map_err(|e| Error::Format {
        path: side.clone(),
        reason: e.to_string(),
    })?;
    let bad = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut values = Vec::with_capacity(sidecar.grid.len());
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.starts_with('#') || line.starts_with('k') {
            continue;
        }
        let last = line.rsplit(',').next().unwrap_or("");
        values.push(last.parse::<f64>().map_err(|e| bad(format!("{e}: {line}")))?);
    }
    let f = Spectrum::new(sidecar.grid, values, sidecar.tau)?;
    Ok((f, sidecar.meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(dim: usize, m: usize) -> TorusGrid {
        TorusGrid::new(dim, m).unwrap()
    }

    #[test]
    fn grid_validation_and_arithmetic() {
        assert!(TorusGrid::new(1, 3).is_err());
        assert!(TorusGrid::new(0, 8).is_err());
        let g = grid(2, 5);
        assert_eq!(g.len(), 25);
        let a = g.index(&[4, 1]);
        let b = g.index(&[2, 3]);
        assert_eq!(g.coords(g.add(a, b)), vec![1, 4]);
        assert_eq!(g.coords(g.sub(a, b)), vec![2, 3]);
        assert_eq!(g.coords(g.negate(a)), vec![1, 4]);
        assert_eq!(g.node_of_wavenumber(&[-1, 7]), g.index(&[4, 2]));
    }

    #[test]
    fn spectrum_rejects_negative_and_wrong_length() {
        let g = grid(1, 8);
        assert!(matches!(
            Spectrum::new(g, vec![1.0; 7], 0.0),
            Err(Error::SizeMismatch { .. })
        ));
        let mut v = vec![1.0; 8];
        v[3] = -0.5;
        assert!(matches!(Spectrum::new(g, v, 0.0), Err(Error::NegativeSpectrum { .. })));
    }

    #[test]
    fn profiles_have_unit_mass() {
        for profile in [Profile::Gaussian, Profile::Lorentzian] {
            let rule = ResonanceRule::new(0.05, profile).unwrap();
            let dx = 1e-4;
            let mass: f64 = (-400_000..=400_000).map(|i| rule.delta(i as f64 * dx) * dx).sum();
            let tol = if profile == Profile::Gaussian { 1e-10 } else { 2e-3 };
            assert!((mass - 1.0).abs() < tol, "{profile:?}: {mass}");
        }
        assert!(ResonanceRule::new(0.0, Profile::Gaussian).is_err());
    }

    #[test]
    fn zero_spectrum_has_zero_rate() {
        let g = grid(1, 8);
        let rule = ResonanceRule::new(0.1, Profile::Gaussian).unwrap();
        let c = collision(&Spectrum::zeros(g), &rule).unwrap();
        assert!(c.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn energy_moment_of_constant() {
        assert_eq!(energy_moment(&Spectrum::zeros(grid(1, 16))), 0.0);
        for m in [4, 7, 16] {
            let f = Spectrum::from_fn(grid(1, m), 0.0, |_| 1.0).unwrap();
            assert!((energy_moment(&f) - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn masked_nodes_are_frozen() {
        let g = grid(1, 8);
        let rule = ResonanceRule::new(0.2, Profile::Gaussian).unwrap();
        let mut f = Spectrum::from_fn(g, 0.0, |k| 1.0 + k[0]).unwrap();
        f.values[0] = 3.0;
        let c = collision(&f, &rule).unwrap();
        assert_eq!(c[0], 0.0);
        let next = step(&f, &rule, 0.1, KineticScheme::Rk4).unwrap();
        assert_eq!(next.values[0], 3.0);
        assert!((next.tau - 0.1).abs() < 1e-15);
    }

    #[test]
    fn zero_spectrum_is_fixed_by_step() {
        let g = grid(2, 4);
        let rule = ResonanceRule::new(0.2, Profile::Lorentzian).unwrap();
        let f = Spectrum::zeros(g);
        let next = step(&f, &rule, 0.5, KineticScheme::Rk4).unwrap();
        assert_eq!(next.values, f.values);
    }

    #[test]
    fn blow_up_is_detected() {
        let g = grid(1, 8);
        let rule = ResonanceRule::new(0.3, Profile::Gaussian).unwrap();
        let f = Spectrum::from_fn(g, 0.0, |k| 1.0 + 0.5 * (2.0 * PI * k[0]).cos()).unwrap();
        let solver =
            KineticSolver::new(CollisionOperator::new(g, rule), KineticScheme::Rk4, 1e-3).unwrap();
        assert!(matches!(solver.step(&f, 0.01), Err(Error::BlowUp { .. })));
    }

    #[test]
    fn compare_identical_and_shifted() {
        let g = grid(2, 6);
        let a = Spectrum::from_fn(g, 0.0, |k| 1.0 + k[0] * k[1]).unwrap();
        let r = compare_spectra(&a, &a).unwrap();
        assert_eq!((r.l1, r.l2, r.linf), (0.0, 0.0, 0.0));
        let b = Spectrum::from_fn(g, 0.0, |k| 1.25 + k[0] * k[1]).unwrap();
        let r = compare_spectra(&a, &b).unwrap();
        assert!((r.linf - 0.25).abs() < 1e-15);
        assert!((r.l1 - 0.25).abs() < 1e-14);
        assert!((r.l2 - 0.25).abs() < 1e-14);
        assert_eq!(r.modes.len(), g.len());
        let c = Spectrum::zeros(grid(1, 6));
        assert!(matches!(compare_spectra(&a, &c), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn interpolation_reproduces_nodes_and_linear_data() {
        let coarse = grid(1, 8);
        let f = Spectrum::from_fn(coarse, 0.0, |k| 2.0 + (2.0 * PI * k[0]).sin()).unwrap();
        for i in 0..coarse.len() {
            assert!((f.interpolate(&coarse.node(i)) - f.values[i]).abs() < 1e-15);
        }
        let mid = f.interpolate(&[1.5 / 8.0]);
        assert!((mid - 0.5 * (f.values[1] + f.values[2])).abs() < 1e-15);
        let wrap = f.interpolate(&[7.5 / 8.0]);
        assert!((wrap - 0.5 * (f.values[7] + f.values[0])).abs() < 1e-15);
    }

    #[test]
    fn spectrum_io_round_trip() {
        let g = grid(2, 5);
        let f = Spectrum::from_fn(g, 0.75, |k| 0.1 + k[0] + 3.0 * k[1]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let meta = serde_json::json!({"seed": 4});
        write_spectrum(&path, &f, &meta).unwrap();
        let (back, m) = read_spectrum(&path).unwrap();
        assert_eq!(back, f);
        assert_eq!(m, meta);
    }

    proptest! {
        #[test]
        fn even_input_gives_even_rate(vals in proptest::collection::vec(0.0f64..2.0, 8)) {
            let g = grid(1, 8);
            let mut v = vals;
            for i in 1..8 {
                v[8 - i] = v[i.min(8 - i)];
            }
            let f = Spectrum::new(g, v, 0.0).unwrap();
            let rule = ResonanceRule::new(0.15, Profile::Gaussian).unwrap();
            let c = collision(&f, &rule).unwrap();
            for i in 0..8 {
                let scale = 1.0 + c[i].abs();
                prop_assert!((c[i] - c[g.negate(i)]).abs() <= 1e-12 * scale);
            }
        }
    }
}
