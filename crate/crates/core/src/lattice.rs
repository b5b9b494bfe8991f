//! Periodic lattices, their wavenumber grids, and the discrete Fourier pair.
//!
//! Sites of a lattice with `N` points per axis are the integer tuples
//! `{0..N−1}^d` at physical positions `x = h·index` with `h = 1/N`. Site
//! fields are stored row-major over the index tuple (last axis fastest).
//!
//! Wavenumbers are the integer tuples in `{−⌊N/2⌋ ..= ⌈N/2⌉−1}^d`, which is
//! `{−D..D}^d` for the odd case `N = 2D+1`. Spectral fields are stored
//! row-major in *centered* order: axis slot `m` holds wavenumber
//! `m − ⌊N/2⌋`, so slot `0` is the most negative wavenumber.
//!
//! The transform pair is asymmetric:
//!
//! ```text
//! f̂(k) = h^d Σ_x f(x) e^{−2πi k·x}        f(x) = Σ_k f̂(k) e^{2πi k·x}
//! ```

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{natural_wavenumber, NdFft};

/// A cubic periodic lattice of `points^dim` sites on the unit torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeSpec {
    dim: usize,
    points: usize,
}

impl LatticeSpec {
    /// The lattice `Λ(D)` with `N = 2D+1` points per axis.
    pub fn new(dim: usize, half_width: usize) -> Result<Self> {
        if half_width == 0 {
            return Err(Error::invalid("half_width", "must be positive"));
        }
        Self::with_points(dim, 2 * half_width + 1)
    }

    /// A lattice with an arbitrary number of points per axis.
    pub fn with_points(dim: usize, points: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be positive"));
        }
        if points < 2 {
            return Err(Error::invalid("points", "need at least two points per axis"));
        }
        let total = (points as u128).checked_pow(dim as u32);
        if total.map_or(true, |t| t > u32::MAX as u128) {
            return Err(Error::invalid("points", "lattice too large"));
        }
        Ok(LatticeSpec { dim, points })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per axis, `N`.
    pub fn points(&self) -> usize {
        self.points
    }

    /// `D` such that `N = 2D+1`, if `N` is odd.
    pub fn half_width(&self) -> Option<usize> {
        (self.points % 2 == 1).then_some(self.points / 2)
    }

    /// Mesh size `h = 1/N`.
    pub fn mesh(&self) -> f64 {
        1.0 / self.points as f64
    }

    /// `h^d`, the quadrature weight of one site.
    pub fn cell_volume(&self) -> f64 {
        self.mesh().powi(self.dim as i32)
    }

    /// Number of sites, `N^d` (also the number of wavenumbers).
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min_wavenumber(&self) -> i64 {
        -((self.points / 2) as i64)
    }

    pub fn max_wavenumber(&self) -> i64 {
        self.min_wavenumber() + self.points as i64 - 1
    }

    pub fn site_coords(&self, index: usize) -> Vec<usize> {
        let mut coords = vec![0; self.dim];
        let mut rest = index;
        for c in coords.iter_mut().rev() {
            *c = rest % self.points;
            rest /= self.points;
        }
        coords
    }

    pub fn site_index(&self, coords: &[usize]) -> usize {
        debug_assert_eq!(coords.len(), self.dim);
        coords
            .iter()
            .fold(0, |acc, &c| acc * self.points + (c % self.points))
    }

    /// Physical position `h·index` of a site.
    pub fn site_position(&self, index: usize) -> Vec<f64> {
        let h = self.mesh();
        self.site_coords(index)
            .into_iter()
            .map(|c| c as f64 * h)
            .collect()
    }

    /// Wavenumber stored at centered slot `index`.
    pub fn wavenumber(&self, index: usize) -> Vec<i64> {
        let kmin = self.min_wavenumber();
        self.site_coords(index)
            .into_iter()
            .map(|m| m as i64 + kmin)
            .collect()
    }

    /// Centered slot of `k`, reducing each component modulo `N` first.
    pub fn wavenumber_index(&self, k: &[i64]) -> usize {
        debug_assert_eq!(k.len(), self.dim);
        let n = self.points as i64;
        let kmin = self.min_wavenumber();
        k.iter().fold(0, |acc, &kj| {
            let slot = (kj - kmin).rem_euclid(n) as usize;
            acc * self.points + slot
        })
    }

    /// Centered slot of `−k` for the wavenumber at `index`.
    pub fn negated_index(&self, index: usize) -> usize {
        let k: Vec<i64> = self.wavenumber(index).into_iter().map(|kj| -kj).collect();
        self.wavenumber_index(&k)
    }

    /// Centered slot of the zero wavenumber.
    pub fn zero_index(&self) -> usize {
        self.wavenumber_index(&vec![0; self.dim])
    }

    /// Permutation taking natural FFT order to centered order:
    /// `centered[map[j]] = natural[j]`.
    pub(crate) fn natural_to_centered(&self) -> Vec<usize> {
        let n = self.points;
        let kmin = self.min_wavenumber();
        (0..self.len())
            .map(|j| {
                self.site_coords(j).into_iter().fold(0, |acc, jj| {
                    let slot = (natural_wavenumber(jj, n) - kmin) as usize;
                    acc * n + slot
                })
            })
            .collect()
    }
}

/// A complex field on the sites of a lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    pub values: Vec<Complex64>,
}

/// A complex field on the wavenumbers of a lattice, in centered order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralField {
    pub values: Vec<Complex64>,
}

impl GridField {
    pub fn zeros(spec: &LatticeSpec) -> Self {
        GridField {
            values: vec![Complex64::default(); spec.len()],
        }
    }

    pub fn from_fn(spec: &LatticeSpec, f: impl Fn(&[f64]) -> Complex64) -> Self {
        GridField {
            values: (0..spec.len()).map(|i| f(&spec.site_position(i))).collect(),
        }
    }
}

impl SpectralField {
    pub fn zeros(spec: &LatticeSpec) -> Self {
        SpectralField {
            values: vec![Complex64::default(); spec.len()],
        }
    }

    pub fn from_fn(spec: &LatticeSpec, f: impl Fn(&[i64]) -> Complex64) -> Self {
        SpectralField {
            values: (0..spec.len()).map(|i| f(&spec.wavenumber(i))).collect(),
        }
    }

    /// Value at wavenumber `k` (reduced modulo `N`).
    pub fn at(&self, spec: &LatticeSpec, k: &[i64]) -> Complex64 {
        self.values[spec.wavenumber_index(k)]
    }
}

pub(crate) fn check_len(spec: &LatticeSpec, found: usize) -> Result<()> {
    if found != spec.len() {
        return Err(Error::SizeMismatch {
            expected: spec.len(),
            found,
        });
    }
    Ok(())
}

/// A planned transform pair for repeated use on one lattice.
pub struct Fourier {
    spec: LatticeSpec,
    fft: NdFft,
    to_centered: Vec<usize>,
    buffer: Vec<Complex64>,
}

impl Fourier {
    pub fn new(spec: LatticeSpec) -> Self {
        Fourier {
            fft: NdFft::new(spec.points(), spec.dim()),
            to_centered: spec.natural_to_centered(),
            buffer: vec![Complex64::default(); spec.len()],
            spec,
        }
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn dft(&mut self, f: &GridField) -> Result<SpectralField> {
        check_len(&self.spec, f.values.len())?;
        self.buffer.copy_from_slice(&f.values);
        self.fft.forward(&mut self.buffer);
        let scale = self.spec.cell_volume();
        let mut out = vec![Complex64::default(); self.spec.len()];
        for (j, value) in self.buffer.iter().enumerate() {
            out[self.to_centered[j]] = value * scale;
        }
        Ok(SpectralField { values: out })
    }

    pub fn inverse_dft(&mut self, fhat: &SpectralField) -> Result<GridField> {
        check_len(&self.spec, fhat.values.len())?;
        for (j, slot) in self.buffer.iter_mut().enumerate() {
            *slot = fhat.values[self.to_centered[j]];
        }
        self.fft.inverse(&mut self.buffer);
        Ok(GridField {
            values: self.buffer.clone(),
        })
    }
}

/// `f̂(k) = h^d Σ_x f(x) e^{−2πi k·x}` on every wavenumber of the lattice.
pub fn dft(spec: &LatticeSpec, f: &GridField) -> Result<SpectralField> {
    Fourier::new(*spec).dft(f)
}

/// `f(x) = Σ_k f̂(k) e^{2πi k·x}` on every site of the lattice.
pub fn inverse_dft(spec: &LatticeSpec, fhat: &SpectralField) -> Result<GridField> {
    Fourier::new(*spec).inverse_dft(fhat)
}

/// Lattice delta: `N^d` when every component of `k` is divisible by `N`
/// (including umklapp wraps), zero otherwise.
pub fn delta_mod(spec: &LatticeSpec, k: &[i64]) -> f64 {
    let n = spec.points() as i64;
    if k.iter().all(|kj| kj.rem_euclid(n) == 0) {
        spec.len() as f64
    } else {
        0.0
    }
}

/// Beam dispersion on integer wavenumbers, `ω̄(k) = Σ_j sin²(2π h k_j)`.
pub fn dispersion_bar(spec: &LatticeSpec, k: &[i64]) -> f64 {
    let h = spec.mesh();
    k.iter()
        .map(|&kj| {
            let s = (2.0 * PI * (kj as f64 * h)).sin();
            s * s
        })
        .sum()
}

/// Rescaled beam dispersion on the torus, `ω(k) = Σ_j sin²(2π k_j)`.
pub fn dispersion(k: &[f64]) -> f64 {
    k.iter()
        .map(|&kj| {
            let s = (2.0 * PI * kj).sin();
            s * s
        })
        .sum()
}

/// Weighted inner product `⟨f,g⟩ = h^d Σ_x f(x)* g(x)`.
pub fn weighted_inner(spec: &LatticeSpec, f: &GridField, g: &GridField) -> Result<Complex64> {
    check_len(spec, f.values.len())?;
    check_len(spec, g.values.len())?;
    let sum: Complex64 = f
        .values
        .iter()
        .zip(&g.values)
        .map(|(a, b)| a.conj() * b)
        .sum();
    Ok(sum * spec.cell_volume())
}
