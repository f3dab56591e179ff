use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Circular convolution of a uniform series with a Gaussian of standard
/// deviation `width` grid points, through the discrete Fourier transform.
///
/// The kernel is sampled at circular distances and normalized to unit sum,
/// so the mean of the series is preserved. `width = 0` is the identity.
pub fn gaussian_smooth(series: &[f64], width: f64) -> Vec<f64> {
    let n = series.len();
    if n == 0 || !(width > 0.0) {
        return series.to_vec();
    }
    let kernel: Vec<f64> = (0..n)
        .map(|k| {
            let d = k.min(n - k) as f64;
            (-0.5 * (d / width).powi(2)).exp()
        })
        .collect();
    let total: f64 = kernel.iter().sum();
    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);
    let mut a: Vec<Complex<f64>> = series.iter().map(|&v| Complex::new(v, 0.0)).collect();
    let mut b: Vec<Complex<f64>> = kernel.iter().map(|&v| Complex::new(v / total, 0.0)).collect();
    forward.process(&mut a);
    forward.process(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    inverse.process(&mut a);
    a.iter().map(|v| v.re / n as f64).collect()
}
