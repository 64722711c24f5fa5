//! Dilation-and-projection engine on R^d / Gamma: the exact finite
//! Fourier-series discrepancy, a Monte Carlo oracle for it, decay tests along
//! integral rays, equidistribution rate fits, and the lifted-circle
//! discrepancy on T^3.
//!
//! For h_t(x) = t A_t (x - x0) + x0 + b_t and a trigonometric polynomial f on
//! R^d/Gamma with coefficients f^(eta) on the dual lattice, the discrepancy
//! int f dm_t - int f dm is the finite sum over eta != 0 of
//!   f^(eta) e^{2 pi i (eta.(x0 + b_t) - t (A_t^{-1} eta).x0)} mu^(-t A_t^{-1} eta).

use crate::error::{CoreError, Result};
use crate::fit::{self, AsymptoticFit, FitScale};
use crate::measures::{fourier_natural, sample, Measure};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Lattice Gamma in R^d given by a basis matrix (columns generate Gamma),
/// with the dual basis B^{-T} precomputed.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TorusLattice {
    basis: Vec<Vec<f64>>,
    #[serde(skip)]
    dual: Vec<Vec<f64>>,
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

fn invert(m: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap()
        })?;
        if a[pivot][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let p = a[col][col];
        for j in 0..n {
            a[col][j] /= p;
            inv[col][j] /= p;
        }
        for i in 0..n {
            if i != col {
                let f = a[i][col];
                for j in 0..n {
                    a[i][j] -= f * a[col][j];
                    inv[i][j] -= f * inv[col][j];
                }
            }
        }
    }
    Some(inv)
}

impl TorusLattice {
    pub fn new(basis: Vec<Vec<f64>>) -> Result<Self> {
        let n = basis.len();
        if n == 0 || basis.iter().any(|r| r.len() != n) {
            return Err(CoreError::InvalidInput("lattice basis must be square".into()));
        }
        let inv = invert(&basis)
            .ok_or_else(|| CoreError::InvalidInput("lattice basis is singular".into()))?;
        // B B^{-1} = I to 1e-12
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += basis[i][k] * inv[k][j];
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                if (acc - expect).abs() > 1e-12 {
                    return Err(CoreError::InvalidInput("basis inversion drift exceeds 1e-12".into()));
                }
            }
        }
        // dual basis = B^{-T}: dual[i][j] = inv[j][i]
        let dual: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| inv[j][i]).collect()).collect();
        // dual pairing is integral on basis vectors
        for i in 0..n {
            for j in 0..n {
                let gamma: Vec<f64> = (0..n).map(|k| basis[k][j]).collect();
                let eta: Vec<f64> = (0..n).map(|k| dual[k][i]).collect();
                let pair: f64 = gamma.iter().zip(&eta).map(|(a, b)| a * b).sum();
                if (pair - pair.round()).abs() > 1e-10 {
                    return Err(CoreError::InvalidInput("dual pairing is not integral".into()));
                }
            }
        }
        Ok(TorusLattice { basis, dual })
    }

    pub fn standard(d: usize) -> Self {
        let basis: Vec<Vec<f64>> = (0..d)
            .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        TorusLattice::new(basis).expect("identity basis")
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// The dual-lattice vector with integer coordinates `m`: eta = B^{-T} m.
    pub fn dual_vector(&self, m: &[i64]) -> Vec<f64> {
        let mf: Vec<f64> = m.iter().map(|&x| x as f64).collect();
        mat_vec(&self.dual, &mf)
    }

    /// Projection to the fundamental domain by coordinate reduction:
    /// B frac(B^{-1} x).
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let inv = invert(&self.basis).expect("validated at construction");
        let coords = mat_vec(&inv, x);
        let frac: Vec<f64> = coords.iter().map(|c| c - c.floor()).collect();
        mat_vec(&self.basis, &frac)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RotationPath {
    Identity,
    /// Constant orthogonal matrix.
    Fixed { matrix: Vec<Vec<f64>> },
    /// t-parametrized rotation: angle omega * t in the plane (d = 2) or about
    /// `axis` (d = 3).
    Spinning { omega: f64, #[serde(default, skip_serializing_if = "Option::is_none")] axis: Option<Vec<f64>> },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum OffsetPath {
    Zero,
    /// b_t = base + t * rate.
    Affine { base: Vec<f64>, rate: Vec<f64> },
}

/// The homothety family h_t(x) = t A_t (x - x0) + x0 + b_t.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DilationFamily {
    pub center: Vec<f64>,
    pub rotation: RotationPath,
    pub offset: OffsetPath,
}

impl DilationFamily {
    pub fn linear(d: usize) -> Self {
        DilationFamily {
            center: vec![0.0; d],
            rotation: RotationPath::Identity,
            offset: OffsetPath::Zero,
        }
    }

    pub fn centered(center: Vec<f64>) -> Self {
        DilationFamily { center, rotation: RotationPath::Identity, offset: OffsetPath::Zero }
    }

    /// A_t, orthogonality-checked to 1e-12.
    pub fn rotation_at(&self, t: f64, d: usize) -> Result<Vec<Vec<f64>>> {
        let m = match &self.rotation {
            RotationPath::Identity => {
                return Ok((0..d)
                    .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                    .collect())
            }
            RotationPath::Fixed { matrix } => matrix.clone(),
            RotationPath::Spinning { omega, axis } => {
                let ang = omega * t;
                match d {
                    2 => vec![
                        vec![ang.cos(), -ang.sin()],
                        vec![ang.sin(), ang.cos()],
                    ],
                    3 => {
                        let ax = axis.clone().unwrap_or_else(|| vec![0.0, 0.0, 1.0]);
                        let n = ax.iter().map(|x| x * x).sum::<f64>().sqrt();
                        let u: Vec<f64> = ax.iter().map(|x| x / n).collect();
                        let (c, s) = (ang.cos(), ang.sin());
                        let mut m = vec![vec![0.0; 3]; 3];
                        for i in 0..3 {
                            for j in 0..3 {
                                m[i][j] = c * f64::from(u8::from(i == j))
                                    + (1.0 - c) * u[i] * u[j];
                            }
                        }
                        m[0][1] -= s * u[2];
                        m[1][0] += s * u[2];
                        m[0][2] += s * u[1];
                        m[2][0] -= s * u[1];
                        m[1][2] -= s * u[0];
                        m[2][1] += s * u[0];
                        m
                    }
                    _ => {
                        return Err(CoreError::InvalidInput(
                            "spinning rotations support d = 2, 3".into(),
                        ))
                    }
                }
            }
        };
        for i in 0..d {
            for j in 0..d {
                let mut acc = 0.0;
                for k in 0..d {
                    acc += m[k][i] * m[k][j];
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                if (acc - expect).abs() > 1e-12 {
                    return Err(CoreError::InvalidInput("A_t is not orthogonal to 1e-12".into()));
                }
            }
        }
        Ok(m)
    }

    pub fn offset_at(&self, t: f64) -> Vec<f64> {
        match &self.offset {
            OffsetPath::Zero => vec![0.0; self.center.len()],
            OffsetPath::Affine { base, rate } => {
                base.iter().zip(rate).map(|(b, r)| b + t * r).collect()
            }
        }
    }

    pub fn apply(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let d = x.len();
        let a = self.rotation_at(t, d)?;
        let shifted: Vec<f64> = x.iter().zip(&self.center).map(|(xi, ci)| xi - ci).collect();
        let rotated = mat_vec(&a, &shifted);
        let b = self.offset_at(t);
        Ok((0..d).map(|i| t * rotated[i] + self.center[i] + b[i]).collect())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ObservableTerm {
    pub freq: Vec<i64>,
    pub re: f64,
    pub im: f64,
}

/// Finitely supported Fourier coefficients on the dual lattice: integer
/// coordinates with respect to the dual basis, complex coefficients.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TorusObservable {
    pub terms: Vec<ObservableTerm>,
}

impl TorusObservable {
    pub fn character(freq: Vec<i64>) -> Self {
        TorusObservable { terms: vec![ObservableTerm { freq, re: 1.0, im: 0.0 }] }
    }

    /// Real-valued observable with conjugate-symmetric coefficients: each
    /// listed (freq, coeff) is paired with (-freq, conj coeff).
    pub fn real_from_half(half: &[(Vec<i64>, Complex64)]) -> Self {
        let mut terms = Vec::new();
        for (freq, c) in half {
            terms.push(ObservableTerm { freq: freq.clone(), re: c.re, im: c.im });
            terms.push(ObservableTerm {
                freq: freq.iter().map(|x| -x).collect(),
                re: c.re,
                im: -c.im,
            });
        }
        TorusObservable { terms }
    }

    pub fn coeff(&self, term: &ObservableTerm) -> Complex64 {
        Complex64::new(term.re, term.im)
    }

    pub fn ell1(&self) -> f64 {
        self.terms.iter().map(|t| Complex64::new(t.re, t.im).norm()).sum()
    }

    pub fn zero_coeff(&self) -> Complex64 {
        self.terms
            .iter()
            .filter(|t| t.freq.iter().all(|&x| x == 0))
            .map(|t| Complex64::new(t.re, t.im))
            .sum()
    }

    pub fn has_nonzero_freq(&self) -> bool {
        self.terms.iter().any(|t| t.freq.iter().any(|&x| x != 0))
    }

    /// Conjugate symmetry check for observables flagged real-valued.
    pub fn is_conjugate_symmetric(&self, tol: f64) -> bool {
        self.terms.iter().all(|t| {
            let neg: Vec<i64> = t.freq.iter().map(|x| -x).collect();
            let c: Complex64 = self
                .terms
                .iter()
                .filter(|s| s.freq == neg)
                .map(|s| Complex64::new(s.re, s.im))
                .sum();
            (c - Complex64::new(t.re, t.im).conj()).norm() <= tol
        })
    }

    /// Evaluate f(y) = sum c_eta e^{2 pi i eta.y}.
    pub fn eval(&self, lat: &TorusLattice, y: &[f64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for term in &self.terms {
            let eta = lat.dual_vector(&term.freq);
            let ph: f64 = eta.iter().zip(y).map(|(a, b)| a * b).sum();
            acc += Complex64::new(term.re, term.im) * Complex64::new(0.0, TAU * ph).exp();
        }
        acc
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One term's frequency/phase data for the expansion.
fn term_phase_and_freq(
    lat: &TorusLattice,
    dil: &DilationFamily,
    t: f64,
    freq: &[i64],
) -> Result<(Complex64, Vec<f64>)> {
    let d = lat.dim();
    let eta = lat.dual_vector(freq);
    let a = dil.rotation_at(t, d)?;
    // A_t^{-1} = A_t^T for orthogonal A_t
    let mut eta_rot = vec![0.0; d];
    for i in 0..d {
        for j in 0..d {
            eta_rot[i] += a[j][i] * eta[j];
        }
    }
    let b = dil.offset_at(t);
    let ph = dot(&eta, &dil.center) + dot(&eta, &b) - t * dot(&eta_rot, &dil.center);
    let phase = Complex64::new(0.0, TAU * ph).exp();
    let xi: Vec<f64> = eta_rot.iter().map(|x| -t * x).collect();
    Ok((phase, xi))
}

/// Exact finite-sum discrepancy: sum over nonzero frequencies of
/// f^(eta) * phase * mu^(-t A_t^{-1} eta).
pub fn discrepancy_series(
    m: &Measure,
    lat: &TorusLattice,
    dil: &DilationFamily,
    f: &TorusObservable,
    t: f64,
) -> Result<Complex64> {
    if t <= 0.0 {
        return Err(CoreError::InvalidInput("dilation parameter t must be positive".into()));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for term in &f.terms {
        if term.freq.iter().all(|&x| x == 0) {
            continue;
        }
        let (phase, xi) = term_phase_and_freq(lat, dil, t, &term.freq)?;
        let mu = fourier_natural(m, &xi)?;
        acc += f.coeff(term) * phase * mu;
    }
    Ok(acc)
}

/// Monte Carlo oracle: (1/n) sum f(pi(h_t(x_i))) - f^(0), with the CLT
/// standard error of the mean.
pub fn discrepancy_monte_carlo(
    m: &Measure,
    lat: &TorusLattice,
    dil: &DilationFamily,
    f: &TorusObservable,
    t: f64,
    n: usize,
    seed: u64,
) -> Result<(Complex64, f64)> {
    if n < 1000 {
        return Err(CoreError::InvalidInput("monte carlo needs n >= 1000".into()));
    }
    let pts = sample(m, n, seed)?;
    let mut vals = Vec::with_capacity(n);
    for x in &pts {
        let hx = dil.apply(t, x)?;
        let y = lat.project(&hx);
        vals.push(f.eval(lat, &y));
    }
    let mean = vals.iter().sum::<Complex64>() / n as f64;
    let var = vals.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / (n - 1) as f64;
    Ok((mean - f.zero_coeff(), (var / n as f64).sqrt()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RayVerdict {
    Decays,
    Stalls,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RayReport {
    pub ray: Vec<i64>,
    pub verdict: RayVerdict,
    pub magnitudes: Vec<f64>,
}

/// Decision thresholds for the ray test; the paper only supplies limits, so
/// the cutoffs are an operational choice and stay configurable.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RayTestConfig {
    pub stall_threshold: f64,
    pub decay_ratio: f64,
}

impl Default for RayTestConfig {
    fn default() -> Self {
        RayTestConfig { stall_threshold: 0.1, decay_ratio: 0.1 }
    }
}

/// Decay-along-integral-rays test: "stalls" when the minimum of |mu^(t eta)|
/// over the last decade stays above the stall threshold, "decays" when the
/// last-decade maximum falls below decay_ratio times the first-decade maximum.
pub fn integral_ray_decay_test(
    m: &Measure,
    lat: &TorusLattice,
    rays: &[Vec<i64>],
    t_grid: &[f64],
    cfg: RayTestConfig,
) -> Result<Vec<RayReport>> {
    let (t0, t1) = (t_grid[0], t_grid[t_grid.len() - 1]);
    if t_grid.len() < 8 || t1 / t0 < 99.0 {
        return Err(CoreError::InvalidInput("ray test grid must span >= 2 decades".into()));
    }
    rays.iter()
        .map(|ray| {
            if ray.iter().all(|&x| x == 0) {
                return Err(CoreError::InvalidInput("rays must be nonzero".into()));
            }
            let eta = lat.dual_vector(ray);
            let mags = t_grid
                .iter()
                .map(|t| {
                    let xi: Vec<f64> = eta.iter().map(|x| t * x).collect();
                    fourier_natural(m, &xi).map(|v| v.norm())
                })
                .collect::<Result<Vec<f64>>>()?;
            let last: Vec<f64> = t_grid
                .iter()
                .zip(&mags)
                .filter(|(t, _)| **t >= t1 / 10.0)
                .map(|(_, m)| *m)
                .collect();
            let first: Vec<f64> = t_grid
                .iter()
                .zip(&mags)
                .filter(|(t, _)| **t <= t0 * 10.0)
                .map(|(_, m)| *m)
                .collect();
            let last_min = last.iter().cloned().fold(f64::MAX, f64::min);
            let last_max = last.iter().cloned().fold(f64::MIN, f64::max);
            let first_max = first.iter().cloned().fold(f64::MIN, f64::max);
            let verdict = if last_min > cfg.stall_threshold {
                RayVerdict::Stalls
            } else if last_max < cfg.decay_ratio * first_max {
                RayVerdict::Decays
            } else {
                RayVerdict::Inconclusive
            };
            Ok(RayReport { ray: ray.clone(), verdict, magnitudes: mags })
        })
        .collect()
}

/// The discrepancy magnitude series over a grid (parallel over t).
pub fn discrepancy_curve(
    m: &Measure,
    lat: &TorusLattice,
    dil: &DilationFamily,
    f: &TorusObservable,
    t_grid: &[f64],
) -> Result<Vec<(f64, Complex64)>> {
    t_grid
        .par_iter()
        .map(|&t| discrepancy_series(m, lat, dil, f, t).map(|v| (t, v)))
        .collect()
}

/// Envelope log-log fit of |discrepancy| against t. Metadata records the l1
/// norm of f^ and the empirical constant max |disc| t^{s/2} / ||f^||_1 at the
/// fitted exponent s = -2 slope.
pub fn equidistribution_rate_fit(
    m: &Measure,
    lat: &TorusLattice,
    dil: &DilationFamily,
    f: &TorusObservable,
    t_grid: &[f64],
) -> Result<AsymptoticFit> {
    if !f.has_nonzero_freq() {
        return Err(CoreError::InvalidInput("observable must be nonconstant".into()));
    }
    if t_grid.len() < 8 || t_grid[t_grid.len() - 1] / t_grid[0] < 99.0 {
        return Err(CoreError::InvalidInput("rate fit grid must span >= 2 decades".into()));
    }
    let curve = discrepancy_curve(m, lat, dil, f, t_grid)?;
    let mags: Vec<f64> = curve.iter().map(|(_, v)| v.norm()).collect();
    let mut fit = fit::envelope_fit(t_grid, &mags, 5, FitScale::LogLog)?;
    let ell1 = f.ell1();
    let s_half = -fit.slope;
    let c_emp = curve
        .iter()
        .map(|(t, v)| v.norm() * t.powf(s_half) / ell1)
        .fold(0.0, f64::max);
    fit.window.ell1_norm = Some(ell1);
    fit.window.empirical_constant = Some(c_emp);
    Ok(fit)
}

/// Empirical constant sup_t |disc(t)| t^{s/2} / ||f^||_1 at a prescribed s/2.
pub fn empirical_constant(curve: &[(f64, Complex64)], s_half: f64, ell1: f64) -> f64 {
    curve
        .iter()
        .map(|(t, v)| v.norm() * t.powf(s_half) / ell1)
        .fold(0.0, f64::max)
}

/// Discrepancy for the canonical lift of the expanding circle to T^3:
/// sum over N with (N1, N2) != (0, 0) of f^(N) nu^(-t N1, -t N2, -N3); the
/// (0,0,N3 != 0) terms vanish by orthogonality of characters and are skipped.
pub fn lifted_circle_discrepancy(f: &TorusObservable, t: f64) -> Result<Complex64> {
    let nu = Measure::LiftedCircle;
    let mut acc = Complex64::new(0.0, 0.0);
    for term in &f.terms {
        if term.freq.len() != 3 {
            return Err(CoreError::InvalidInput("lifted-circle observables live on Z^3".into()));
        }
        if term.freq[0] == 0 && term.freq[1] == 0 {
            continue;
        }
        let xi = vec![
            -t * term.freq[0] as f64,
            -t * term.freq[1] as f64,
            -(term.freq[2] as f64),
        ];
        acc += f.coeff(term) * fourier_natural(&nu, &xi)?;
    }
    Ok(acc)
}

/// Rate fit for the lifted-circle discrepancy.
pub fn lifted_circle_rate_fit(f: &TorusObservable, t_grid: &[f64]) -> Result<AsymptoticFit> {
    let series: Vec<(f64, Complex64)> = t_grid
        .par_iter()
        .map(|&t| lifted_circle_discrepancy(f, t).map(|v| (t, v)))
        .collect::<Result<Vec<_>>>()?;
    let mags: Vec<f64> = series.iter().map(|(_, v)| v.norm()).collect();
    let mut fit = fit::envelope_fit(t_grid, &mags, 5, FitScale::LogLog)?;
    fit.window.ell1_norm = Some(f.ell1());
    fit.window.empirical_constant = Some(empirical_constant(&series, -fit.slope, f.ell1()));
    Ok(fit)
}
