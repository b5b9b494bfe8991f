//! Fast operators against the direct sums in `wavechain_core::reference`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use wavechain_core::chain::{ChainForce, FractionalParams, ForceMethod};
use wavechain_core::kinetic::{collision, Profile, ResonanceRule, Spectrum, TorusGrid};
use wavechain_core::lattice::{dft, GridField};
use wavechain_core::vlasov::{frac_laplacian_torus, sigma_field, PhaseDensity, VlasovGrid};
use wavechain_core::wave::{rhs, AmplitudeState, ModelParams};
use wavechain_core::{reference, LatticeSpec};

use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub name: String,
    pub relative_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

fn result(name: String, fast: &[f64], slow: &[f64], tolerance: f64) -> OracleResult {
    let scale = slow.iter().map(|x| x.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let err = fast.iter().zip(slow).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;
    OracleResult {
        name,
        relative_error: err,
        tolerance,
        passed: err <= tolerance && fast.len() == slow.len(),
    }
}

fn flatten(z: &[Complex64]) -> Vec<f64> {
    z.iter().flat_map(|c| [c.re, c.im]).collect()
}

const TOL: f64 = 1e-12;

pub fn run_all(seed: u64) -> Result<Vec<OracleResult>, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    for (dim, half) in [(1, 8), (2, 4)] {
        let spec = LatticeSpec::new(dim, half)?;
        let f = GridField {
            values: (0..spec.len())
                .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                .collect(),
        };
        let fast = dft(&spec, &f)?;
        let slow = reference::dft(&spec, &f)?;
        out.push(result(format!("dft-d{dim}-D{half}"), &flatten(&fast.values), &flatten(&slow.values), TOL));
    }

    for (dim, half) in [(1, 3), (2, 2)] {
        let spec = LatticeSpec::new(dim, half)?;
        let params = ModelParams::new(spec, 0.7)?;
        let mut state = AmplitudeState::zeros(&spec);
        let zero = spec.zero_index();
        for i in (0..spec.len()).filter(|&i| i != zero) {
            state.plus[i] = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            state.minus[i] = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        }
        let fast = rhs(&state, &params)?;
        let slow = reference::wave_rhs(&state, &spec, 0.7);
        let join = |s: &AmplitudeState| {
            let mut v = flatten(&s.plus);
            v.extend(flatten(&s.minus));
            v
        };
        out.push(result(format!("wave-rhs-d{dim}-D{half}"), &join(&fast), &join(&slow), TOL));
    }

    for (dim, m) in [(1, 12), (2, 6)] {
        let grid = TorusGrid::new(dim, m)?;
        let f = Spectrum::new(grid, (0..grid.len()).map(|_| rng.random::<f64>()).collect(), 0.0)?;
        for profile in [Profile::Gaussian, Profile::Lorentzian] {
            let rule = ResonanceRule::new(0.1, profile)?;
            let fast = collision(&f, &rule)?;
            let slow = reference::collision(&f, &rule);
            out.push(result(format!("collision-d{dim}-M{m}-{profile:?}").to_lowercase(), &fast, &slow, TOL));
        }
    }

    for (dim, points, alpha) in [(1, 40, 0.5), (1, 33, 0.3), (2, 8, 0.7)] {
        let spec = LatticeSpec::with_points(dim, points)?;
        let fp = FractionalParams::new(dim, alpha)?;
        let r: Vec<f64> = (0..spec.len()).map(|_| rng.random::<f64>() - 0.5).collect();
        let slow = reference::chain_force(&r, &spec, &fp)?;
        for method in [ForceMethod::Direct, ForceMethod::Spectral] {
            let fast = ChainForce::new(spec, &fp, method)?.apply(&r);
            out.push(result(
                format!("chain-force-d{dim}-N{points}-{method:?}").to_lowercase(),
                &fast,
                &slow,
                TOL,
            ));
        }
    }

    for n in [16, 17] {
        let field: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let fast = frac_laplacian_torus(&field, n, 1, 0.35)?;
        let slow = reference::frac_laplacian_1d(&field, 0.35);
        out.push(result(format!("frac-laplacian-n{n}"), &fast, &slow, TOL));
    }

    for x_points in [8, 9] {
        let grid = VlasovGrid::new(1, x_points, (1.0, 6), (1.0, 5))?;
        let g = PhaseDensity::new(grid, (0..grid.len()).map(|_| rng.random::<f64>()).collect(), 0.0)?;
        let fast = sigma_field(&g, &FractionalParams::new(1, 0.4)?)?;
        let slow = reference::sigma_1d(&g, 0.4);
        out.push(result(format!("sigma-field-m{x_points}"), &fast, &slow, TOL));
    }
    Ok(out)
}
