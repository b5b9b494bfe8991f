//! Amplitude dynamics of the quadratic beam lattice, random-phase ensembles,
//! and the empirical wave spectrum.
//!
//! The state is `â(k,σ)` for `k ∈ Λ*`, `σ = ±1`, evolving under
//!
//! ```text
//! ∂_t â(k,σ) = −iσ ω̄(k) â(k,σ)
//!              − iσ λ h^d Σ_{σ1,σ2} Σ_{σk ≡ σ1k1+σ2k2 (mod N)} M(k,k1,k2) â(k1,σ1) â(k2,σ2)
//! M(k,k1,k2) = [8 ω̄(k) ω̄(k1) ω̄(k2)]^{-1}
//! ```
//!
//! The zero wavenumber has `ω̄ = 0` and is masked: it is held at zero and
//! excluded from every sum. Because `M` factorizes, the double sum equals
//! `w(σk) / 8ω̄(k)` where `w = u ⊛ u` is the cyclic self-convolution of
//! `u(k) = [â(k,+1) + â(−k,−1)] / ω̄(k)`; it is evaluated with FFTs as a
//! pointwise square on the site grid.

use std::f64::consts::PI;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::NdFft;
use crate::kinetic::{Spectrum, TorusGrid};
use crate::lattice::{check_len, dispersion_bar, LatticeSpec, SpectralField};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Nonlinearity strength and the lattice it acts on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    lambda: f64,
    lattice: LatticeSpec,
}

impl ModelParams {
    pub fn new(lattice: LatticeSpec, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::invalid("lambda", format!("must be finite and >= 0, got {lambda}")));
        }
        if lattice.half_width().is_none() {
            return Err(Error::invalid(
                "points",
                "amplitude dynamics needs an odd number of points per axis",
            ));
        }
        Ok(ModelParams { lambda, lattice })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }
}

/// Sign index `σ` of an amplitude component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sigma {
    Plus,
    Minus,
}

impl Sigma {
    pub fn value(self) -> f64 {
        match self {
            Sigma::Plus => 1.0,
            Sigma::Minus => -1.0,
        }
    }
}

/// `â(k,+1)` and `â(k,−1)` on the centered wavenumber layout, plus the time.
///
/// States built from a single amplitude `a_k` carry `â(k,−1) = a_k*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeState {
    pub plus: Vec<Complex64>,
    pub minus: Vec<Complex64>,
    pub t: f64,
}

impl AmplitudeState {
    pub fn zeros(spec: &LatticeSpec) -> Self {
        AmplitudeState {
            plus: vec![Complex64::default(); spec.len()],
            minus: vec![Complex64::default(); spec.len()],
            t: 0.0,
        }
    }

    /// State with `â(k,+1) = a_k` and `â(k,−1) = a_k*`.
    pub fn from_amplitude(a: Vec<Complex64>, t: f64) -> Self {
        let minus = a.iter().map(|z| z.conj()).collect();
        AmplitudeState { plus: a, minus, t }
    }

    pub fn get(&self, spec: &LatticeSpec, k: &[i64], sigma: Sigma) -> Complex64 {
        let i = spec.wavenumber_index(k);
        match sigma {
            Sigma::Plus => self.plus[i],
            Sigma::Minus => self.minus[i],
        }
    }

    /// `max_k |â(k,−1) − â(k,+1)*|`.
    pub fn conjugation_defect(&self) -> f64 {
        self.plus
            .iter()
            .zip(&self.minus)
            .map(|(p, m)| (m - p.conj()).norm())
            .fold(0.0, f64::max)
    }

    /// `max_k |â(k,−1) − â(−k,+1)*|`.
    pub fn mirrored_conjugation_defect(&self, spec: &LatticeSpec) -> f64 {
        (0..spec.len())
            .map(|i| (self.minus[i] - self.plus[spec.negated_index(i)].conj()).norm())
            .fold(0.0, f64::max)
    }

    fn is_finite(&self) -> bool {
        self.plus.iter().chain(&self.minus).all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Fourier components of position and momentum, `q(k)` and `p(k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePair {
    pub q: SpectralField,
    pub p: SpectralField,
}

impl PhasePair {
    /// True when `q(−k) = q(k)*` and `p(−k) = p(k)*` within `tol`, i.e. the
    /// pair is the transform of real fields.
    pub fn is_real(&self, spec: &LatticeSpec, tol: f64) -> bool {
        (0..spec.len()).all(|i| {
            let j = spec.negated_index(i);
            (self.q.values[j] - self.q.values[i].conj()).norm() <= tol
                && (self.p.values[j] - self.p.values[i].conj()).norm() <= tol
        })
    }

    /// Zero the `k = 0` components, which the amplitude variables cannot carry.
    pub fn mask_zero_mode(&mut self, spec: &LatticeSpec) {
        let z = spec.zero_index();
        self.q.values[z] = Complex64::default();
        self.p.values[z] = Complex64::default();
    }
}

fn omega_table(spec: &LatticeSpec) -> Vec<f64> {
    (0..spec.len())
        .map(|i| dispersion_bar(spec, &spec.wavenumber(i)))
        .collect()
}

/// `a(k) = ω̄(k) q(k) + (i/ω̄(k)) p(k)`, with `â(k,−1) = a(k)*`.
pub fn to_amplitudes(pair: &PhasePair, spec: &LatticeSpec) -> Result<AmplitudeState> {
    check_len(spec, pair.q.values.len())?;
    check_len(spec, pair.p.values.len())?;
    let z = spec.zero_index();
    if pair.q.values[z] != Complex64::default() || pair.p.values[z] != Complex64::default() {
        return Err(Error::SingularMode {
            wavenumber: spec.wavenumber(z),
        });
    }
    let omega = omega_table(spec);
    let a = (0..spec.len())
        .map(|i| {
            if i == z {
                Complex64::default()
            } else {
                pair.q.values[i] * omega[i] + I * pair.p.values[i] / omega[i]
            }
        })
        .collect();
    Ok(AmplitudeState::from_amplitude(a, 0.0))
}

/// `q = [a(k) + a*(−k)] / 2ω̄`, `p = iω̄ [−a(k) + a*(−k)] / 2`, reading `a`
/// from `â(·,+1)`.
pub fn from_amplitudes(state: &AmplitudeState, spec: &LatticeSpec) -> Result<PhasePair> {
    check_len(spec, state.plus.len())?;
    check_len(spec, state.minus.len())?;
    let z = spec.zero_index();
    if state.plus[z] != Complex64::default() || state.minus[z] != Complex64::default() {
        return Err(Error::SingularMode {
            wavenumber: spec.wavenumber(z),
        });
    }
    let omega = omega_table(spec);
    let mut q = SpectralField::zeros(spec);
    let mut p = SpectralField::zeros(spec);
    for i in 0..spec.len() {
        if i == z {
            continue;
        }
        let a = state.plus[i];
        let a_neg_conj = state.plus[spec.negated_index(i)].conj();
        q.values[i] = (a + a_neg_conj) / (2.0 * omega[i]);
        p.values[i] = I * omega[i] * (a_neg_conj - a) / 2.0;
    }
    Ok(PhasePair { q, p })
}

/// Time-stepping scheme for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Integrating-factor RK4: the linear rotation is applied exactly and
    /// classical RK4 acts on the nonlinear remainder.
    ExponentialRk4,
    /// Classical RK4 on the full right-hand side.
    Rk4,
}

/// Precomputed tables and FFT plans for evaluating the dynamics on one lattice.
///
/// Internally the state is one vector of length `2|Λ*|`: the `σ = +1`
/// block followed by the `σ = −1` block.
pub struct WaveModel {
    params: ModelParams,
    omega: Vec<f64>,
    inv_omega: Vec<f64>,
    neg: Vec<usize>,
    zero: usize,
    to_centered: Vec<usize>,
    fft: NdFft,
    conv: Vec<Complex64>,
    stages: [Vec<Complex64>; 5],
    half_phase: Option<(f64, Vec<Complex64>)>,
}

impl WaveModel {
    pub fn new(params: ModelParams) -> Self {
        let spec = params.lattice;
        let omega = omega_table(&spec);
        let zero = spec.zero_index();
        let inv_omega = omega
            .iter()
            .enumerate()
            .map(|(i, w)| if i == zero { 0.0 } else { 1.0 / w })
            .collect();
        let len = spec.len();
        WaveModel {
            omega,
            inv_omega,
            neg: (0..len).map(|i| spec.negated_index(i)).collect(),
            zero,
            to_centered: spec.natural_to_centered(),
            fft: NdFft::new(spec.points(), spec.dim()),
            conv: vec![Complex64::default(); len],
            stages: std::array::from_fn(|_| vec![Complex64::default(); 2 * len]),
            half_phase: None,
            params,
        }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// `ω̄(k)` on the centered layout.
    pub fn omega_bar(&self) -> &[f64] {
        &self.omega
    }

    /// Fills `self.conv` (centered layout) with `w(k) = Σ_{k1+k2≡k} u(k1) u(k2)`.
    fn self_convolution(&mut self, plus: &[Complex64], minus: &[Complex64]) {
        let len = self.params.lattice.len();
        // natural-order buffer lives in `conv` during the transform
        for j in 0..len {
            let c = self.to_centered[j];
            self.conv[j] = (plus[c] + minus[self.neg[c]]) * self.inv_omega[c];
        }
        self.fft.inverse(&mut self.conv);
        for v in self.conv.iter_mut() {
            *v = *v * *v;
        }
        self.fft.forward(&mut self.conv);
        let scale = self.params.lattice.cell_volume();
        let natural = std::mem::replace(&mut self.conv, vec![Complex64::default(); len]);
        for (j, v) in natural.into_iter().enumerate() {
            self.conv[self.to_centered[j]] = v * scale;
        }
    }

    /// Nonlinear part of the right-hand side for a stacked state.
    fn nonlinear_into(&mut self, a: &[Complex64], out: &mut [Complex64]) {
        let len = self.params.lattice.len();
        let lambda = self.params.lambda;
        if lambda == 0.0 {
            out.fill(Complex64::default());
            return;
        }
        let (plus, minus) = a.split_at(len);
        self.self_convolution(plus, minus);
        let coupling = lambda * self.params.lattice.cell_volume() / 8.0;
        let (out_plus, out_minus) = out.split_at_mut(len);
        for i in 0..len {
            if i == self.zero {
                out_plus[i] = Complex64::default();
                out_minus[i] = Complex64::default();
                continue;
            }
            let c = coupling * self.inv_omega[i];
            out_plus[i] = -I * c * self.conv[i];
            out_minus[i] = I * c * self.conv[self.neg[i]];
        }
    }

    fn full_rhs_into(&mut self, a: &[Complex64], out: &mut [Complex64]) {
        self.nonlinear_into(a, out);
        let len = self.params.lattice.len();
        for i in 0..len {
            out[i] += -I * self.omega[i] * a[i];
            out[len + i] += I * self.omega[i] * a[len + i];
        }
    }

    /// Time derivative of `state`, returned in the same layout.
    pub fn rhs(&mut self, state: &AmplitudeState) -> Result<AmplitudeState> {
        self.check_state(state)?;
        let stacked = stack(state);
        let mut out = vec![Complex64::default(); stacked.len()];
        self.full_rhs_into(&stacked, &mut out);
        Ok(unstack(&out, state.t))
    }

    /// The nonlinear part of [`WaveModel::rhs`] alone.
    pub fn nonlinear_rhs(&mut self, state: &AmplitudeState) -> Result<AmplitudeState> {
        self.check_state(state)?;
        let stacked = stack(state);
        let mut out = vec![Complex64::default(); stacked.len()];
        self.nonlinear_into(&stacked, &mut out);
        Ok(unstack(&out, state.t))
    }

    fn check_state(&self, state: &AmplitudeState) -> Result<()> {
        check_len(&self.params.lattice, state.plus.len())?;
        check_len(&self.params.lattice, state.minus.len())
    }

    /// `(H₁, Re H₂)` with `H₁ = Σ ½ ω̄|a_k|²` and
    /// `H₂ = h^d Σ_{k,k1,k2} M δ(k−k1−k2) [a1 + a*(−k1)][a2 + a*(−k2)] a_k*`.
    pub fn energy_terms(&mut self, state: &AmplitudeState) -> Result<(f64, f64)> {
        self.check_state(state)?;
        let h1: f64 = state
            .plus
            .iter()
            .zip(&self.omega)
            .map(|(a, w)| 0.5 * w * a.norm_sqr())
            .sum();
        self.self_convolution(&state.plus, &state.minus);
        let scale = self.params.lattice.cell_volume() / 8.0;
        let h2: f64 = (0..state.plus.len())
            .filter(|&i| i != self.zero)
            .map(|i| (state.plus[i].conj() * self.conv[i]).re * self.inv_omega[i])
            .sum::<f64>()
            * scale;
        Ok((h1, h2))
    }

    /// `H = H₁ + λ Re H₂`.
    pub fn hamiltonian(&mut self, state: &AmplitudeState) -> Result<f64> {
        let (h1, h2) = self.energy_terms(state)?;
        Ok(h1 + self.params.lambda * h2)
    }

    /// `H₁ + (λ/3) Re H₂`, which the flow conserves exactly for states with
    /// `â(k,−1) = â(k,+1)*`.
    pub fn flow_invariant(&mut self, state: &AmplitudeState) -> Result<f64> {
        let (h1, h2) = self.energy_terms(state)?;
        Ok(h1 + self.params.lambda * h2 / 3.0)
    }

    fn half_phases(&mut self, dt: f64) -> Vec<Complex64> {
        if let Some((cached, phases)) = &self.half_phase {
            if *cached == dt {
                return phases.clone();
            }
        }
        let len = self.omega.len();
        let mut phases = vec![Complex64::default(); 2 * len];
        for (i, w) in self.omega.iter().enumerate() {
            phases[i] = Complex64::from_polar(1.0, -w * dt / 2.0);
            phases[len + i] = Complex64::from_polar(1.0, w * dt / 2.0);
        }
        self.half_phase = Some((dt, phases.clone()));
        phases
    }

    fn step_stacked(&mut self, a: &mut [Complex64], dt: f64, scheme: Scheme) {
        let [mut k1, mut k2, mut k3, mut k4, mut tmp] = std::mem::take(&mut self.stages);
        match scheme {
            Scheme::Rk4 => {
                self.full_rhs_into(a, &mut k1);
                axpy_into(&mut tmp, a, dt / 2.0, &k1);
                self.full_rhs_into(&tmp, &mut k2);
                axpy_into(&mut tmp, a, dt / 2.0, &k2);
                self.full_rhs_into(&tmp, &mut k3);
                axpy_into(&mut tmp, a, dt, &k3);
                self.full_rhs_into(&tmp, &mut k4);
                for i in 0..a.len() {
                    a[i] += (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]) * (dt / 6.0);
                }
            }
            Scheme::ExponentialRk4 => {
                let e = self.half_phases(dt);
                if self.params.lambda == 0.0 {
                    for (ai, ei) in a.iter_mut().zip(&e) {
                        *ai *= ei * ei;
                    }
                } else {
                    self.nonlinear_into(a, &mut k1);
                    for i in 0..a.len() {
                        tmp[i] = e[i] * (a[i] + k1[i] * (dt / 2.0));
                    }
                    self.nonlinear_into(&tmp, &mut k2);
                    for i in 0..a.len() {
                        tmp[i] = e[i] * a[i] + k2[i] * (dt / 2.0);
                    }
                    self.nonlinear_into(&tmp, &mut k3);
                    for i in 0..a.len() {
                        tmp[i] = e[i] * (e[i] * a[i] + k3[i] * dt);
                    }
                    self.nonlinear_into(&tmp, &mut k4);
                    for i in 0..a.len() {
                        let e2 = e[i] * e[i];
                        a[i] = e2 * a[i]
                            + (e2 * k1[i] + 2.0 * e[i] * (k2[i] + k3[i]) + k4[i]) * (dt / 6.0);
                    }
                }
            }
        }
        self.stages = [k1, k2, k3, k4, tmp];
    }

    /// Advances `state` by `n_steps` steps of size `dt`, calling `observe`
    /// after every step with the step count so far.
    pub fn integrate_with(
        &mut self,
        state: &AmplitudeState,
        dt: f64,
        n_steps: usize,
        scheme: Scheme,
        mut observe: impl FnMut(usize, &AmplitudeState),
    ) -> Result<AmplitudeState> {
        self.check_state(state)?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
        }
        let len = state.plus.len();
        let start = stack(state);
        let mut a = start.clone();
        let mut current = state.clone();
        // Without coupling the exponential scheme is the exact rotation; it is
        // taken from the initial data so phase rounding does not accumulate.
        let exact_linear = self.params.lambda == 0.0 && scheme == Scheme::ExponentialRk4;
        for step in 1..=n_steps {
            if exact_linear {
                let elapsed = step as f64 * dt;
                for i in 0..len {
                    let w = self.omega[i];
                    a[i] = start[i] * Complex64::from_polar(1.0, -w * elapsed);
                    a[len + i] = start[len + i] * Complex64::from_polar(1.0, w * elapsed);
                }
            } else {
                self.step_stacked(&mut a, dt, scheme);
            }
            current.plus.copy_from_slice(&a[..len]);
            current.minus.copy_from_slice(&a[len..]);
            current.t = state.t + step as f64 * dt;
            if !current.is_finite() {
                return Err(Error::NonFinite {
                    step,
                    time: current.t,
                });
            }
            observe(step, &current);
        }
        Ok(current)
    }

    pub fn integrate(
        &mut self,
        state: &AmplitudeState,
        dt: f64,
        n_steps: usize,
        scheme: Scheme,
    ) -> Result<AmplitudeState> {
        self.integrate_with(state, dt, n_steps, scheme, |_, _| {})
    }
}

fn stack(state: &AmplitudeState) -> Vec<Complex64> {
    let mut a = Vec::with_capacity(2 * state.plus.len());
    a.extend_from_slice(&state.plus);
    a.extend_from_slice(&state.minus);
    a
}

fn unstack(a: &[Complex64], t: f64) -> AmplitudeState {
    let len = a.len() / 2;
    AmplitudeState {
        plus: a[..len].to_vec(),
        minus: a[len..].to_vec(),
        t,
    }
}

fn axpy_into(out: &mut [Complex64], x: &[Complex64], alpha: f64, y: &[Complex64]) {
    for ((o, xi), yi) in out.iter_mut().zip(x).zip(y) {
        *o = xi + yi * alpha;
    }
}

/// Time derivative of `state` under the model.
pub fn rhs(state: &AmplitudeState, params: &ModelParams) -> Result<AmplitudeState> {
    WaveModel::new(*params).rhs(state)
}

/// `H = H₁ + λ Re H₂` (see [`WaveModel::energy_terms`]).
pub fn hamiltonian(state: &AmplitudeState, params: &ModelParams) -> Result<f64> {
    WaveModel::new(*params).hamiltonian(state)
}

pub fn integrate(
    state: &AmplitudeState,
    params: &ModelParams,
    dt: f64,
    n_steps: usize,
    scheme: Scheme,
) -> Result<AmplitudeState> {
    WaveModel::new(*params).integrate(state, dt, n_steps, scheme)
}

/// Integrates every replica independently. Results keep replica order, so
/// the output does not depend on the number of worker threads.
pub fn integrate_ensemble(
    states: &[AmplitudeState],
    params: &ModelParams,
    dt: f64,
    n_steps: usize,
    scheme: Scheme,
) -> Result<Vec<AmplitudeState>> {
    states
        .par_iter()
        .map_init(
            || WaveModel::new(*params),
            |model, s| model.integrate(s, dt, n_steps, scheme),
        )
        .collect()
}

/// Random-phase ensemble description: `replicas` draws with
/// `â(k,+1) = √n0(k) e^{iθ_k}`, `θ_k` i.i.d. uniform on `[0, 2π)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub replicas: usize,
    pub seed: u64,
    /// Initial spectrum on the centered wavenumber layout.
    pub n0: Vec<f64>,
}

impl EnsembleSpec {
    /// Tabulates `n0(hk)` from a profile on the torus; the zero mode is set to 0.
    pub fn from_profile(
        spec: &LatticeSpec,
        replicas: usize,
        seed: u64,
        profile: impl Fn(&[f64]) -> f64,
    ) -> Self {
        let h = spec.mesh();
        let zero = spec.zero_index();
        let n0 = (0..spec.len())
            .map(|i| {
                if i == zero {
                    return 0.0;
                }
                let kappa: Vec<f64> = spec.wavenumber(i).iter().map(|&k| k as f64 * h).collect();
                profile(&kappa)
            })
            .collect();
        EnsembleSpec { replicas, seed, n0 }
    }
}

/// Generator for replica `replica` of a run seeded with `seed`. Each replica
/// owns an independent ChaCha stream, so draws do not depend on scheduling.
pub fn replica_rng(seed: u64, replica: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica as u64);
    rng
}

pub fn sample_initial(ens: &EnsembleSpec, spec: &LatticeSpec) -> Result<Vec<AmplitudeState>> {
    check_len(spec, ens.n0.len())?;
    if ens.replicas == 0 {
        return Err(Error::invalid("replicas", "must be at least 1"));
    }
    for (i, &n) in ens.n0.iter().enumerate() {
        if !n.is_finite() || n < 0.0 {
            return Err(Error::NegativeSpectrum {
                wavenumber: spec.wavenumber(i),
                value: n,
            });
        }
    }
    let zero = spec.zero_index();
    if ens.n0[zero] != 0.0 {
        return Err(Error::SingularMode {
            wavenumber: spec.wavenumber(zero),
        });
    }
    let amplitude: Vec<f64> = ens.n0.iter().map(|n| n.sqrt()).collect();
    Ok((0..ens.replicas)
        .map(|r| {
            let mut rng = replica_rng(ens.seed, r);
            let a = amplitude
                .iter()
                .enumerate()
                .map(|(i, &amp)| {
                    let theta = 2.0 * PI * rng.random::<f64>();
                    if i == zero {
                        Complex64::default()
                    } else {
                        Complex64::from_polar(amp, theta)
                    }
                })
                .collect();
            AmplitudeState::from_amplitude(a, 0.0)
        })
        .collect())
}

/// Ensemble average of `â(k,−1) â(k,+1)`, reported on the rescaled nodes
/// `hk` of the torus grid with `N` points per axis.
pub fn empirical_spectrum(ensemble: &[AmplitudeState], spec: &LatticeSpec) -> Result<Spectrum> {
    let first = ensemble.first().ok_or(Error::EmptyEnsemble)?;
    let grid = TorusGrid::new(spec.dim(), spec.points())?;
    let mut sum = vec![0.0; spec.len()];
    for state in ensemble {
        check_len(spec, state.plus.len())?;
        check_len(spec, state.minus.len())?;
        for (acc, (p, m)) in sum.iter_mut().zip(state.plus.iter().zip(&state.minus)) {
            *acc += (m * p).re;
        }
    }
    let count = ensemble.len() as f64;
    let mut values = vec![0.0; spec.len()];
    for (i, s) in sum.into_iter().enumerate() {
        values[grid.node_of_wavenumber(&spec.wavenumber(i))] = (s / count).max(0.0);
    }
    Spectrum::new(grid, values, first.t)
}

/// Header written as the first line of a snapshot CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub lattice: LatticeSpec,
    pub lambda: f64,
    pub t: f64,
    pub seed: u64,
}

/// Writes one state as CSV rows `sigma,k0..,re,im`, preceded by a `# {json}`
/// header line.
pub fn write_snapshot(
    path: &Path,
    state: &AmplitudeState,
    params: &ModelParams,
    seed: u64,
) -> Result<()> {
    let spec = params.lattice;
    let header = SnapshotHeader {
        lattice: spec,
        lambda: params.lambda,
        t: state.t,
        seed,
    };
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        writeln!(w, "# {}", serde_json::to_string(&header).expect("header serializes"))?;
        let kcols: Vec<String> = (0..spec.dim()).map(|j| format!("k{j}")).collect();
        writeln!(w, "sigma,{},re,im", kcols.join(","))?;
        for (sigma, values) in [(1, &state.plus), (-1, &state.minus)] {
            for (i, z) in values.iter().enumerate() {
                let k: Vec<String> = spec.wavenumber(i).iter().map(|v| v.to_string()).collect();
                writeln!(w, "{sigma},{},{:e},{:e}", k.join(","), z.re, z.im)?;
            }
        }
        w.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

pub fn read_snapshot(path: &Path) -> Result<(SnapshotHeader, AmplitudeState)> {
    let bad = |reason: &str| Error::Format {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let mut next = || -> Result<String> {
        lines
            .next()
            .ok_or_else(|| bad("unexpected end of file"))?
            .map_err(|e| Error::io(path, e))
    };
    let first = next()?;
    let json = first.strip_prefix("# ").ok_or_else(|| bad("missing header line"))?;
    let header: SnapshotHeader =
        serde_json::from_str(json).map_err(|e| bad(&format!("header: {e}")))?;
    let spec = header.lattice;
    next()?;
    let mut state = AmplitudeState::zeros(&spec);
    state.t = header.t;
    for _ in 0..2 * spec.len() {
        let line = next()?;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != spec.dim() + 3 {
            return Err(bad("wrong column count"));
        }
        let parse_i = |s: &str| s.parse::<i64>().map_err(|_| bad("bad integer"));
        let parse_f = |s: &str| s.parse::<f64>().map_err(|_| bad("bad float"));
        let sigma = parse_i(fields[0])?;
        let k = fields[1..=spec.dim()]
            .iter()
            .map(|s| parse_i(s))
            .collect::<Result<Vec<_>>>()?;
        let z = Complex64::new(
            parse_f(fields[spec.dim() + 1])?,
            parse_f(fields[spec.dim() + 2])?,
        );
        let i = spec.wavenumber_index(&k);
        match sigma {
            1 => state.plus[i] = z,
            -1 => state.minus[i] = z,
            _ => return Err(bad("sigma must be 1 or -1")),
        }
    }
    Ok((header, state))
}
