//! Slow direct evaluations of the fast operators, for cross-checking.
//! Every function here is a literal sum with no transforms or caching.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::chain::FractionalParams;
use crate::error::Result;
use crate::kinetic::{ResonanceRule, Spectrum};
use crate::lattice::{check_len, dispersion, dispersion_bar, GridField, LatticeSpec, SpectralField};
use crate::vlasov::PhaseDensity;
use crate::wave::AmplitudeState;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// `h^d Σ_x f(x) e^{−2πi k·x}` by direct summation.
pub fn dft(spec: &LatticeSpec, f: &GridField) -> Result<SpectralField> {
    check_len(spec, f.values.len())?;
    let values = (0..spec.len())
        .map(|ki| {
            let k = spec.wavenumber(ki);
            let sum: Complex64 = (0..spec.len())
                .map(|xi| {
                    let x = spec.site_position(xi);
                    let phase: f64 = k.iter().zip(&x).map(|(&kj, xj)| kj as f64 * xj).sum();
                    f.values[xi] * Complex64::from_polar(1.0, -2.0 * PI * phase)
                })
                .sum();
            sum * spec.cell_volume()
        })
        .collect();
    Ok(SpectralField { values })
}

/// Wave right-hand side from the quadruple sum over signs and wavenumber pairs.
pub fn wave_rhs(state: &AmplitudeState, spec: &LatticeSpec, lambda: f64) -> AmplitudeState {
    let n = spec.points() as i64;
    let len = spec.len();
    let omega: Vec<f64> = (0..len).map(|i| dispersion_bar(spec, &spec.wavenumber(i))).collect();
    let zero = spec.zero_index();
    let value = |i: usize, s: i64| if s == 1 { state.plus[i] } else { state.minus[i] };
    let mut out = AmplitudeState::zeros(spec);
    out.t = state.t;
    for k in 0..len {
        if k == zero {
            continue;
        }
        let kv = spec.wavenumber(k);
        for s in [1i64, -1] {
            let mut acc = Complex64::default();
            for s1 in [1i64, -1] {
                for s2 in [1i64, -1] {
                    for k1 in (0..len).filter(|&i| i != zero) {
                        let k1v = spec.wavenumber(k1);
                        for k2 in (0..len).filter(|&i| i != zero) {
                            let k2v = spec.wavenumber(k2);
                            let hit = (0..spec.dim())
                                .all(|j| (s * kv[j] - s1 * k1v[j] - s2 * k2v[j]).rem_euclid(n) == 0);
                            if hit {
                                acc += value(k1, s1) * value(k2, s2)
                                    / (8.0 * omega[k] * omega[k1] * omega[k2]);
                            }
                        }
                    }
                }
            }
            let sf = s as f64;
            let d = -I * sf * omega[k] * value(k, s) - I * sf * lambda * spec.cell_volume() * acc;
            if s == 1 {
                out.plus[k] = d;
            } else {
                out.minus[k] = d;
            }
        }
    }
    out
}

/// Collision rate from the double loop over node pairs.
pub fn collision(f: &Spectrum, rule: &ResonanceRule) -> Vec<f64> {
    let g = *f.grid();
    let m = g.points() as i64;
    let n = g.len();
    let nodes: Vec<Vec<usize>> = (0..n).map(|i| g.coords(i)).collect();
    let omega: Vec<f64> = (0..n).map(|i| dispersion(&g.node(i))).collect();
    let live = |i: usize| omega[i] >= rule.omega_floor();
    let v = f.values();
    let w = 1.0 / n as f64;
    let sums_to = |a: usize, b: usize, c: usize| {
        (0..g.dim()).all(|j| (nodes[a][j] as i64 - nodes[b][j] as i64 - nodes[c][j] as i64).rem_euclid(m) == 0)
    };
    (0..n)
        .map(|k| {
            if !live(k) {
                return 0.0;
            }
            let mut total = 0.0;
            for k1 in (0..n).filter(|&i| live(i)) {
                for k2 in (0..n).filter(|&i| live(i)) {
                    let kern = w / (8.0 * omega[k] * omega[k1] * omega[k2]);
                    if sums_to(k, k1, k2) {
                        total += kern
                            * rule.delta(omega[k] - omega[k1] - omega[k2])
                            * (v[k1] * v[k2] - v[k] * v[k1] - v[k] * v[k2]);
                    }
                    if sums_to(k1, k, k2) {
                        total -= 2.0
                            * kern
                            * rule.delta(omega[k1] - omega[k] - omega[k2])
                            * (v[k2] * v[k] - v[k] * v[k1] - v[k1] * v[k2]);
                    }
                }
            }
            total
        })
        .collect()
}

/// Chain force `h^d Σ_{y≠x} (r_y − r_x)/|y−x|^{d+2α}` with minimal-image
/// distances, by the double loop.
pub fn chain_force(r: &[f64], spec: &LatticeSpec, fp: &FractionalParams) -> Result<Vec<f64>> {
    check_len(spec, r.len())?;
    let expo = spec.dim() as f64 + 2.0 * fp.alpha();
    let pos: Vec<Vec<f64>> = (0..spec.len()).map(|i| spec.site_position(i)).collect();
    Ok((0..spec.len())
        .map(|x| {
            let mut f = 0.0;
            for y in (0..spec.len()).filter(|&y| y != x) {
                let d2: f64 = pos[x]
                    .iter()
                    .zip(&pos[y])
                    .map(|(a, b)| {
                        let d = (a - b).abs();
                        let d = d.min(1.0 - d);
                        d * d
                    })
                    .sum();
                f += (r[y] - r[x]) / d2.sqrt().powf(expo);
            }
            f * spec.cell_volume()
        })
        .collect())
}

/// `(−Δ)^α` on `points` nodes of the unit circle by the per-mode loop.
pub fn frac_laplacian_1d(field: &[f64], alpha: f64) -> Vec<f64> {
    let n = field.len();
    let wavenumbers: Vec<f64> = (0..n)
        .map(|j| if 2 * j <= n { j as f64 } else { j as f64 - n as f64 })
        .collect();
    (0..n)
        .map(|x| {
            let mut out = 0.0;
            for &k in &wavenumbers {
                let mut c = Complex64::default();
                for (y, f) in field.iter().enumerate() {
                    c += f * Complex64::from_polar(1.0, -2.0 * PI * k * y as f64 / n as f64);
                }
                let e = Complex64::from_polar(1.0, 2.0 * PI * k * x as f64 / n as f64);
                out += (2.0 * PI * k.abs()).powf(2.0 * alpha) * (c * e).re / n as f64;
            }
            out
        })
        .collect()
}

/// `Σ_g(x, r_i)` for a one-dimensional `x` grid with `(−Δ)^α` applied
/// inside the `(r̃, ṽ)` quadrature loop.
pub fn sigma_1d(g: &PhaseDensity, alpha: f64) -> Vec<f64> {
    let grid = g.grid;
    let n = grid.x_points;
    let w = grid.dr() * grid.dv();
    let mut out = vec![0.0; n * grid.r_points];
    for i in 0..grid.r_points {
        let r = grid.r_center(i);
        let mut total = vec![0.0; n];
        for ii in 0..grid.r_points {
            for jj in 0..grid.v_points {
                let column: Vec<f64> = (0..n)
                    .map(|c| (r - grid.r_center(ii)) * g.values[grid.index(c, ii, jj)] * w)
                    .collect();
                for (t, l) in total.iter_mut().zip(frac_laplacian_1d(&column, alpha)) {
                    *t += l;
                }
            }
        }
        for c in 0..n {
            out[c * grid.r_points + i] = total[c];
        }
    }
    out
}
