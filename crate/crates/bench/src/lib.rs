//! Seeded inputs shared by the benchmarks.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wavechain_core::kinetic::{Spectrum, TorusGrid};
use wavechain_core::vlasov::{PhaseDensity, VlasovGrid};
use wavechain_core::wave::AmplitudeState;
use wavechain_core::{GridField, LatticeSpec};

pub fn field(spec: &LatticeSpec, seed: u64) -> GridField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    GridField {
        values: (0..spec.len())
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect(),
    }
}

/// Small random amplitudes with the zero mode left empty.
pub fn amplitudes(spec: &LatticeSpec, seed: u64) -> AmplitudeState {
    let f = field(spec, seed);
    let mut s = AmplitudeState::from_amplitude(f.values.iter().map(|z| z * 1e-3).collect(), 0.0);
    let zero = spec.zero_index();
    s.plus[zero] = Complex64::default();
    s.minus[zero] = Complex64::default();
    s
}

pub fn spectrum(grid: TorusGrid, seed: u64) -> Spectrum {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Spectrum::new(grid, (0..grid.len()).map(|_| rng.random::<f64>()).collect(), 0.0).expect("valid spectrum")
}

pub fn displacements(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random::<f64>() - 0.5).collect()
}

pub fn density(grid: VlasovGrid) -> PhaseDensity {
    PhaseDensity::from_fn(grid, |x, r, v| {
        let m = 0.2 * (2.0 * std::f64::consts::PI * x[0]).cos();
        (-((r - m) / 0.2).powi(2) / 2.0 - (v / 0.2).powi(2) / 2.0).exp()
    })
    .expect("valid density")
}
