use std::f64::consts::PI;

use log::warn;
use nalgebra::DMatrix;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::percentile;
use crate::error::{Error, Result};

/// Bins used by the bandwidth functionals.
const BINS: usize = 4096;
/// Kernel support in bandwidths.
const CUTOFF: f64 = 8.0;
const BISECTION_STEPS: usize = 60;

/// How a bandwidth was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthMethod {
    SolveTheEquation,
    Silverman,
    /// Degenerate data: one grid step.
    Fallback,
}

/// Gaussian-kernel density on a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: Vec<f64>,
    pub method: BandwidthMethod,
    /// Factor applied to make the trapezoidal integral one.
    pub normalization: f64,
    /// Share of negative mass clamped to zero by the multi-level combination.
    pub clamped_fraction: f64,
}

impl DensityEstimate {
    pub fn integral(&self) -> f64 {
        trapezoid(&self.grid, &self.density)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,density\n");
        for (x, d) in self.grid.iter().zip(&self.density) {
            s.push_str(&format!("{x},{d}\n"));
        }
        s
    }
}

/// Product-kernel density on a tensor grid; `density[j][i]` belongs to `(x[i], y[j])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointDensity {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub density: Vec<Vec<f64>>,
    pub bandwidth: [f64; 2],
    pub normalization: f64,
}

impl JointDensity {
    pub fn integral(&self) -> f64 {
        let rows: Vec<f64> = self.density.iter().map(|r| trapezoid(&self.x, r)).collect();
        trapezoid(&self.y, &rows)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y,density\n");
        for (j, row) in self.density.iter().enumerate() {
            for (i, d) in row.iter().enumerate() {
                s.push_str(&format!("{},{},{d}\n", self.x[i], self.y[j]));
            }
        }
        s
    }
}

/// Trapezoidal integral of `y` over the abscissae `x`.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

/// `n` equispaced points over `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

/// Grid covering the samples with a margin of four bandwidths.
pub fn density_grid(samples: &[f64], bandwidth: f64, points: usize) -> Vec<f64> {
    let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let margin = 4.0 * bandwidth.max(1e-12);
    linspace(lo - margin, hi + margin, points.max(2))
}

/// Weighted standard deviation.
fn spread(x: &[f64], w: &[f64]) -> f64 {
    let sw: f64 = w.iter().sum();
    let mean = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    (x.iter().zip(w).map(|(a, b)| b * (a - mean).powi(2)).sum::<f64>() / sw).sqrt()
}

fn effective_size(w: &[f64]) -> f64 {
    let s: f64 = w.iter().sum();
    let s2: f64 = w.iter().map(|v| v * v).sum();
    s * s / s2
}

/// Linear binning of weighted samples, normalized to unit mass, and the
/// autocorrelation of the bin masses by lag.
struct Binned {
    delta: f64,
    autocorr: Vec<f64>,
}

impl Binned {
    fn new(x: &[f64], w: &[f64]) -> Self {
        let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let delta = (hi - lo) / (BINS - 1) as f64;
        let sw: f64 = w.iter().sum();
        let mut c = vec![0.0; BINS];
        for (xi, wi) in x.iter().zip(w) {
            let pos = (xi - lo) / delta;
            let k = (pos.floor() as usize).min(BINS - 2);
            let f = pos - k as f64;
            c[k] += wi / sw * (1.0 - f);
            c[k + 1] += wi / sw * f;
        }
        // linear autocorrelation through a zero-padded transform
        let m = 2 * BINS;
        let mut buf: Vec<Complex<f64>> = c.iter().map(|&v| Complex::new(v, 0.0)).collect();
        buf.resize(m, Complex::new(0.0, 0.0));
        let mut planner = FftPlanner::new();
        planner.plan_fft_forward(m).process(&mut buf);
        for v in buf.iter_mut() {
            *v = Complex::new(v.norm_sqr(), 0.0);
        }
        planner.plan_fft_inverse(m).process(&mut buf);
        let autocorr = buf[..BINS].iter().map(|v| v.re / m as f64).collect();
        Self { delta, autocorr }
    }

    /// `psi_r(g) = sum_ij w_i w_j phi^(r)((x_i - x_j) / g) / g^(r+1)` for even `r`.
    fn psi(&self, r: usize, g: f64) -> f64 {
        let mut total = self.autocorr[0] * gaussian_derivative(r, 0.0);
        for (d, a) in self.autocorr.iter().enumerate().skip(1) {
            let u = d as f64 * self.delta / g;
            if u > 12.0 {
                break;
            }
            total += 2.0 * a * gaussian_derivative(r, u);
        }
        total / g.powi(r as i32 + 1)
    }
}

/// Derivatives of the standard normal density for `r` in {0, 4, 6}.
fn gaussian_derivative(r: usize, u: f64) -> f64 {
    let phi = (-0.5 * u * u).exp() / (2.0 * PI).sqrt();
    let u2 = u * u;
    match r {
        0 => phi,
        4 => (u2 * u2 - 6.0 * u2 + 3.0) * phi,
        6 => (u2 * u2 * u2 - 15.0 * u2 * u2 + 45.0 * u2 - 15.0) * phi,
        _ => unreachable!("unsupported derivative order {r}"),
    }
}

/// Silverman's rule of thumb.
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let w = vec![1.0; samples.len()];
    silverman(samples, &w)
}

fn silverman(x: &[f64], w: &[f64]) -> f64 {
    let sd = spread(x, w);
    let iqr = robust_iqr(x);
    let scale = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * scale * effective_size(w).powf(-0.2)
}

fn robust_iqr(x: &[f64]) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    percentile(&s, 75.0) - percentile(&s, 25.0)
}

/// Solve-the-equation bandwidth of Sheather and Jones.
///
/// Solves `h = [R(K) / (n psi_4(g(h)))]^(1/5)` with the pilot
/// `g(h) = 1.357 [psi_4(a) / -psi_6(b)]^(1/7) h^(5/7)` by bisection over
/// `[1e-3, 1e3]` standard deviations. Falls back to Silverman's rule when
/// the functionals are not usable or no sign change is bracketed, and to
/// `None` for fewer than three distinct values or zero spread.
pub fn solve_the_equation_bandwidth(samples: &[f64], weights: Option<&[f64]>) -> Option<(f64, BandwidthMethod)> {
    let ones;
    let w = match weights {
        Some(w) => w,
        None => {
            ones = vec![1.0; samples.len()];
            &ones
        }
    };
    let mut distinct = samples.to_vec();
    distinct.sort_by(|a, b| a.total_cmp(b));
    distinct.dedup();
    let sd = spread(samples, w);
    if distinct.len() < 3 || !(sd > 0.0) {
        return None;
    }
    let n = effective_size(w);
    let silverman_h = silverman(samples, w);
    let iqr = robust_iqr(samples);
    let scale = if iqr > 0.0 { iqr } else { 1.349 * sd };
    let binned = Binned::new(samples, w);
    let a = 0.920 * scale * n.powf(-1.0 / 7.0);
    let b = 0.912 * scale * n.powf(-1.0 / 9.0);
    let psi4_a = binned.psi(4, a);
    let psi6_b = binned.psi(6, b);
    if !(psi4_a > 0.0) || !(psi6_b < 0.0) {
        return Some((silverman_h, BandwidthMethod::Silverman));
    }
    let pilot = 1.357 * (psi4_a / -psi6_b).powf(1.0 / 7.0);
    let rk = 1.0 / (2.0 * PI.sqrt());
    let f = |h: f64| -> f64 {
        let psi4 = binned.psi(4, pilot * h.powf(5.0 / 7.0));
        if !(psi4 > 0.0) {
            return f64::NAN;
        }
        h - (rk / (n * psi4)).powf(0.2)
    };
    let (mut lo, mut hi) = (1e-3 * sd, 1e3 * sd);
    let flo = f(lo);
    let fhi = f(hi);
    if !(flo.is_finite() && fhi.is_finite()) || flo.signum() == fhi.signum() {
        return Some((silverman_h, BandwidthMethod::Silverman));
    }
    for _ in 0..BISECTION_STEPS {
        let mid = (lo * hi).sqrt();
        let fm = f(mid);
        if !fm.is_finite() {
            return Some((silverman_h, BandwidthMethod::Silverman));
        }
        if fm.signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(((lo * hi).sqrt(), BandwidthMethod::SolveTheEquation))
}

fn grid_step(grid: &[f64]) -> f64 {
    if grid.len() < 2 {
        1.0
    } else {
        (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 || grid.windows(2).any(|p| !(p[1] > p[0])) {
        return Err(Error::InvalidArgument(
            "density grid must be strictly increasing with two or more points".into(),
        ));
    }
    Ok(())
}

fn bandwidth_for(samples: &[f64], weights: Option<&[f64]>, grid: &[f64]) -> (f64, BandwidthMethod) {
    match solve_the_equation_bandwidth(samples, weights) {
        Some(hm) => hm,
        None => {
            if samples.len() > 1 {
                warn!("density samples have no spread; using a one-grid-step kernel");
            }
            (grid_step(grid), BandwidthMethod::Fallback)
        }
    }
}

/// Unnormalized kernel sum `sum_i w_i K_h(x - x_i)` on `grid`, samples sorted.
fn kernel_sum(sorted: &[(f64, f64)], h: f64, grid: &[f64]) -> Vec<f64> {
    let norm = 1.0 / (h * (2.0 * PI).sqrt());
    grid.iter()
        .map(|&x| {
            let lo = sorted.partition_point(|(v, _)| *v < x - CUTOFF * h);
            let hi = sorted.partition_point(|(v, _)| *v <= x + CUTOFF * h);
            sorted[lo..hi]
                .iter()
                .map(|(v, w)| {
                    let u = (x - v) / h;
                    w * (-0.5 * u * u).exp()
                })
                .sum::<f64>()
                * norm
        })
        .collect()
}

fn sorted_pairs(samples: &[f64], weights: Option<&[f64]>) -> Vec<(f64, f64)> {
    let total = match weights {
        Some(w) => w.iter().sum::<f64>(),
        None => samples.len() as f64,
    };
    let mut v: Vec<(f64, f64)> = samples
        .iter()
        .enumerate()
        .map(|(i, &x)| (x, weights.map_or(1.0, |w| w[i]) / total))
        .collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    v
}

fn validate_samples(samples: &[f64], weights: Option<&[f64]>) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument(
            "density estimation needs at least one sample".into(),
        ));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("density samples must be finite".into()));
    }
    if let Some(w) = weights {
        if w.len() != samples.len() || w.iter().any(|v| !(*v >= 0.0)) || !(w.iter().sum::<f64>() > 0.0) {
            return Err(Error::InvalidArgument(
                "weights must be non-negative, match the samples and not all vanish".into(),
            ));
        }
    }
    Ok(())
}

fn renormalize(grid: &[f64], density: &mut [f64]) -> Result<f64> {
    let mass = trapezoid(grid, density);
    if !(mass > 0.0) {
        return Err(Error::Numerical("density has no mass on the grid".into()));
    }
    for d in density.iter_mut() {
        *d /= mass;
    }
    Ok(1.0 / mass)
}

/// Weighted Gaussian kernel density on `grid`, renormalized to unit integral.
pub fn kde_1d(samples: &[f64], weights: Option<&[f64]>, grid: &[f64]) -> Result<DensityEstimate> {
    validate_samples(samples, weights)?;
    check_grid(grid)?;
    let (h, method) = bandwidth_for(samples, weights, grid);
    let mut density = kernel_sum(&sorted_pairs(samples, weights), h, grid);
    let normalization = renormalize(grid, &mut density)?;
    Ok(DensityEstimate {
        grid: grid.to_vec(),
        density,
        bandwidth: vec![h],
        method,
        normalization,
        clamped_fraction: 0.0,
    })
}

/// Product-Gaussian joint density on the tensor grid `x_grid` by `y_grid`.
pub fn kde_2d(x: &[f64], y: &[f64], x_grid: &[f64], y_grid: &[f64]) -> Result<JointDensity> {
    validate_samples(x, None)?;
    validate_samples(y, None)?;
    if x.len() != y.len() {
        return Err(Error::InvalidArgument("joint samples differ in length".into()));
    }
    check_grid(x_grid)?;
    check_grid(y_grid)?;
    let (hx, _) = bandwidth_for(x, None, x_grid);
    let (hy, _) = bandwidth_for(y, None, y_grid);
    let n = x.len();
    let kernel = |grid: &[f64], s: &[f64], h: f64| {
        let c = 1.0 / (h * (2.0 * PI).sqrt());
        DMatrix::from_fn(grid.len(), n, |i, k| {
            let u = (grid[i] - s[k]) / h;
            if u.abs() > CUTOFF {
                0.0
            } else {
                c * (-0.5 * u * u).exp()
            }
        })
    };
    let kx = kernel(x_grid, x, hx);
    let ky = kernel(y_grid, y, hy);
    let d = ky * kx.transpose() / n as f64;
    let mut density: Vec<Vec<f64>> = (0..y_grid.len()).map(|j| d.row(j).iter().cloned().collect()).collect();
    let rows: Vec<f64> = density.iter().map(|r| trapezoid(x_grid, r)).collect();
    let mass = trapezoid(y_grid, &rows);
    if !(mass > 0.0) {
        return Err(Error::Numerical("joint density has no mass on the grid".into()));
    }
    for row in density.iter_mut() {
        for v in row.iter_mut() {
            *v /= mass;
        }
    }
    Ok(JointDensity {
        x: x_grid.to_vec(),
        y: y_grid.to_vec(),
        density,
        bandwidth: [hx, hy],
        normalization: 1.0 / mass,
    })
}

/// Values of one telescoping term for the multi-level density: level-0
/// values, or the coupled fine and coarse values of a difference term.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DensityTerm {
    pub fine: Vec<f64>,
    pub coarse: Vec<f64>,
}

/// Multi-level density
/// `alpha_0 f[q_0] + sum_l (alpha_l f[q_l] - alpha_{l-1} f[q_{l-1}])`,
/// each term a kernel estimate from that term's samples with one bandwidth
/// for both sides. Negative values are clamped to zero and the result
/// renormalized; the clamped share of mass is recorded.
pub fn multilevel_density(terms: &[DensityTerm], alpha: &[f64], grid: &[f64]) -> Result<DensityEstimate> {
    if terms.is_empty() || terms.len() != alpha.len() {
        return Err(Error::InvalidArgument(format!(
            "{} terms for {} coefficients",
            terms.len(),
            alpha.len()
        )));
    }
    check_grid(grid)?;
    let mut total = vec![0.0; grid.len()];
    let mut bandwidth = Vec::with_capacity(terms.len());
    let mut method = BandwidthMethod::SolveTheEquation;
    for (l, t) in terms.iter().enumerate() {
        validate_samples(&t.fine, None)?;
        if l > 0 && t.coarse.len() != t.fine.len() {
            return Err(Error::InvalidArgument(format!(
                "term {l}: fine and coarse sample counts differ"
            )));
        }
        let (h, m) = bandwidth_for(&t.fine, None, grid);
        if m != BandwidthMethod::SolveTheEquation {
            method = m;
        }
        bandwidth.push(h);
        let fine = kernel_sum(&sorted_pairs(&t.fine, None), h, grid);
        for (acc, f) in total.iter_mut().zip(&fine) {
            *acc += alpha[l] * f;
        }
        if l > 0 {
            let coarse = kernel_sum(&sorted_pairs(&t.coarse, None), h, grid);
            for (acc, c) in total.iter_mut().zip(&coarse) {
                *acc -= alpha[l - 1] * c;
            }
        }
    }
    let negative: Vec<f64> = total.iter().map(|v| (-v).max(0.0)).collect();
    let positive: Vec<f64> = total.iter().map(|v| v.max(0.0)).collect();
    let neg_mass = trapezoid(grid, &negative);
    let pos_mass = trapezoid(grid, &positive);
    let clamped_fraction = if pos_mass > 0.0 { neg_mass / pos_mass } else { 1.0 };
    let mut density = positive;
    let normalization = renormalize(grid, &mut density)?;
    Ok(DensityEstimate {
        grid: grid.to_vec(),
        density,
        bandwidth,
        method,
        normalization,
        clamped_fraction,
    })
}
