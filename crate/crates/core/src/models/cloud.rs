use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SampleStream;

/// Parameters of the random cavity cloud. Lengths in millimetres.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CloudParams {
    pub count: usize,
    pub center: [f64; 3],
    pub cloud_radius: f64,
    pub r_min: f64,
    pub r_max: f64,
    /// Location of the log-normal radius distribution, `ln(mm)`.
    pub mu: f64,
    /// Shape of the log-normal radius distribution.
    pub sigma: f64,
    /// Placement attempts per cavity before giving up.
    pub max_attempts: usize,
}

impl Default for CloudParams {
    fn default() -> Self {
        Self {
            count: 500,
            center: [50.0; 3],
            cloud_radius: 20.0,
            r_min: 0.8,
            r_max: 1.2,
            mu: 0.0,
            sigma: 0.1,
            max_attempts: 10_000,
        }
    }
}

impl CloudParams {
    fn validate(&self) -> Result<()> {
        if !(self.r_min > 0.0 && self.r_min <= self.r_max) {
            return Err(Error::InvalidArgument(format!(
                "radius bounds [{}, {}] are invalid",
                self.r_min, self.r_max
            )));
        }
        if !(self.cloud_radius > self.r_max) {
            return Err(Error::InvalidArgument(
                "cloud radius must exceed the largest cavity radius".into(),
            ));
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "log-normal sigma must be non-negative, got {}",
                self.sigma
            )));
        }
        // random close packing of spheres tops out near 64 %
        let fill = self.count as f64 * self.r_min.powi(3) / self.cloud_radius.powi(3);
        if fill > 0.5 {
            return Err(Error::Generation(format!(
                "requested packing fraction {fill:.2} is infeasible"
            )));
        }
        Ok(())
    }
}

/// One realization of the cavity cloud with derived descriptors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CloudConfiguration {
    pub center: [f64; 3],
    pub cloud_radius: f64,
    pub positions: Vec<[f64; 3]>,
    pub radii: Vec<f64>,
    /// Cavity volume over cloud volume.
    pub gas_fraction: f64,
    pub mean_radius: f64,
    /// `gas_fraction * (cloud_radius / mean_radius)^2`.
    pub beta: f64,
    /// Per-axis centered third moment of cavity positions about the center.
    pub skewness: [f64; 3],
    /// Distance of the cavity closest to the center.
    pub central_distance: f64,
}

impl CloudConfiguration {
    /// Build a configuration from explicit cavities and compute its descriptors.
    pub fn from_cavities(
        center: [f64; 3],
        cloud_radius: f64,
        positions: Vec<[f64; 3]>,
        radii: Vec<f64>,
    ) -> Result<Self> {
        if positions.is_empty() || positions.len() != radii.len() {
            return Err(Error::InvalidArgument(format!(
                "{} positions for {} radii",
                positions.len(),
                radii.len()
            )));
        }
        let n = radii.len() as f64;
        let gas_fraction = radii.iter().map(|r| r.powi(3)).sum::<f64>() / cloud_radius.powi(3);
        let mean_radius = radii.iter().sum::<f64>() / n;
        let mut skewness = [0.0; 3];
        for p in &positions {
            for a in 0..3 {
                skewness[a] += (p[a] - center[a]).powi(3) / n;
            }
        }
        let central_distance = positions
            .iter()
            .map(|p| distance(p, &center))
            .fold(f64::INFINITY, f64::min);
        Ok(Self {
            center,
            cloud_radius,
            beta: gas_fraction * (cloud_radius / mean_radius).powi(2),
            positions,
            radii,
            gas_fraction,
            mean_radius,
            skewness,
            central_distance,
        })
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    /// Indices of cavities violating containment, radius bounds or overlap.
    pub fn violations(&self, r_min: f64, r_max: f64) -> Vec<usize> {
        let tol = 1e-9;
        let mut bad = Vec::new();
        for i in 0..self.len() {
            let r = self.radii[i];
            let outside = distance(&self.positions[i], &self.center) + r > self.cloud_radius + tol;
            let bounds = r < r_min - tol || r > r_max + tol;
            let overlap = (0..i).any(|j| distance(&self.positions[i], &self.positions[j]) < r + self.radii[j] - tol);
            if outside || bounds || overlap {
                bad.push(i);
            }
        }
        bad
    }

    /// `x,y,z,r` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,z,r\n");
        for (p, r) in self.positions.iter().zip(&self.radii) {
            let _ = writeln!(out, "{},{},{},{}", p[0], p[1], p[2], r);
        }
        out
    }
}

pub(crate) fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Draw a cloud of non-overlapping cavities.
///
/// Cavities are placed one after another. Each draws a log-normal radius,
/// rejected outside `[r_min, r_max]`, then a uniform position in the ball that
/// keeps it inside the cloud, rejected when it overlaps an earlier cavity.
/// Radii and positions come from separate sub-streams in a fixed order, so
/// the cloud is a pure function of `stream`.
pub fn generate_cloud(stream: &SampleStream, params: &CloudParams) -> Result<CloudConfiguration> {
    params.validate()?;
    if params.count == 0 {
        return Err(Error::InvalidArgument("cloud needs at least one cavity".into()));
    }
    let lognormal = LogNormal::new(params.mu, params.sigma)
        .map_err(|e| Error::InvalidArgument(format!("log-normal parameters: {e}")))?;
    let mut radius_rng = stream.derive_named("cloud-radius");
    let mut position_rng = stream.derive_named("cloud-position");
    let mut grid = SpatialHash::new(params.center, params.cloud_radius, 2.0 * params.r_max);
    let mut positions = Vec::with_capacity(params.count);
    let mut radii = Vec::with_capacity(params.count);

    for k in 0..params.count {
        let r = if params.r_min == params.r_max {
            params.r_min
        } else {
            let mut attempts = 0;
            loop {
                let r: f64 = lognormal.sample(&mut radius_rng);
                if (params.r_min..=params.r_max).contains(&r) {
                    break r;
                }
                attempts += 1;
                if attempts >= params.max_attempts {
                    return Err(Error::Generation(format!(
                        "no radius within [{}, {}] after {} draws",
                        params.r_min, params.r_max, attempts
                    )));
                }
            }
        };
        let reach = params.cloud_radius - r;
        let mut placed = false;
        for _ in 0..params.max_attempts {
            let offset = uniform_in_ball(&mut position_rng, reach);
            let p = [
                params.center[0] + offset[0],
                params.center[1] + offset[1],
                params.center[2] + offset[2],
            ];
            if !grid.overlaps(&p, r, &positions, &radii) {
                grid.insert(&p, positions.len());
                positions.push(p);
                radii.push(r);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::Generation(format!(
                "could not place cavity {k} without overlap after {} attempts",
                params.max_attempts
            )));
        }
    }
    CloudConfiguration::from_cavities(params.center, params.cloud_radius, positions, radii)
}

fn uniform_in_ball<R: Rng>(rng: &mut R, radius: f64) -> [f64; 3] {
    loop {
        let v = [
            2.0 * rng.random::<f64>() - 1.0,
            2.0 * rng.random::<f64>() - 1.0,
            2.0 * rng.random::<f64>() - 1.0,
        ];
        if v[0] * v[0] + v[1] * v[1] + v[2] * v[2] <= 1.0 {
            return [v[0] * radius, v[1] * radius, v[2] * radius];
        }
    }
}

/// Uniform bucket grid for overlap queries.
struct SpatialHash {
    origin: [f64; 3],
    cell: f64,
    dim: usize,
    buckets: Vec<Vec<usize>>,
}

impl SpatialHash {
    fn new(center: [f64; 3], radius: f64, cell: f64) -> Self {
        let dim = ((2.0 * radius / cell).ceil() as usize).max(1);
        Self {
            origin: [center[0] - radius, center[1] - radius, center[2] - radius],
            cell,
            dim,
            buckets: vec![Vec::new(); dim * dim * dim],
        }
    }

    fn coords(&self, p: &[f64; 3]) -> [usize; 3] {
        let mut c = [0; 3];
        for a in 0..3 {
            c[a] = (((p[a] - self.origin[a]) / self.cell).floor().max(0.0) as usize).min(self.dim - 1);
        }
        c
    }

    fn insert(&mut self, p: &[f64; 3], index: usize) {
        let c = self.coords(p);
        let k = (c[0] * self.dim + c[1]) * self.dim + c[2];
        self.buckets[k].push(index);
    }

    fn overlaps(&self, p: &[f64; 3], r: f64, positions: &[[f64; 3]], radii: &[f64]) -> bool {
        let c = self.coords(p);
        let lo = |x: usize| x.saturating_sub(1);
        let hi = |x: usize| (x + 1).min(self.dim - 1);
        for i in lo(c[0])..=hi(c[0]) {
            for j in lo(c[1])..=hi(c[1]) {
                for k in lo(c[2])..=hi(c[2]) {
                    for &q in &self.buckets[(i * self.dim + j) * self.dim + k] {
                        if distance(p, &positions[q]) < r + radii[q] {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_radii_give_closed_form_fraction() {
        let params = CloudParams {
            r_min: 1.0,
            r_max: 1.0,
            ..Default::default()
        };
        let c = generate_cloud(&SampleStream::new(4), &params).unwrap();
        assert!((c.gas_fraction - 0.0625).abs() < 1e-12);
        assert!(c.violations(1.0, 1.0).is_empty());
        assert!((c.beta - 0.0625 * 400.0).abs() < 1e-9);
    }

    #[test]
    fn single_cavity_at_center() {
        let c = CloudConfiguration::from_cavities([50.0; 3], 20.0, vec![[50.0; 3]], vec![1.0]).unwrap();
        assert_eq!(c.skewness, [0.0; 3]);
        assert_eq!(c.central_distance, 0.0);
    }

    #[test]
    fn default_clouds_are_valid() {
        let p = CloudParams::default();
        for seed in 0..5 {
            let c = generate_cloud(&SampleStream::for_sample(seed, 0, 0), &p).unwrap();
            assert_eq!(c.len(), 500);
            assert!(c.violations(p.r_min, p.r_max).is_empty());
            assert!((0.04..=0.07).contains(&c.gas_fraction), "fraction {}", c.gas_fraction);
        }
    }

    #[test]
    fn same_stream_same_cloud() {
        let p = CloudParams::default();
        let s = SampleStream::for_sample(9, 1, 3);
        assert_eq!(generate_cloud(&s, &p).unwrap(), generate_cloud(&s, &p).unwrap());
    }

    #[test]
    fn infeasible_packing_is_rejected() {
        let p = CloudParams {
            count: 10_000,
            ..Default::default()
        };
        assert!(matches!(
            generate_cloud(&SampleStream::new(1), &p),
            Err(Error::Generation(_))
        ));
    }

    #[test]
    fn csv_has_one_row_per_cavity() {
        let p = CloudParams {
            count: 7,
            ..Default::default()
        };
        let c = generate_cloud(&SampleStream::new(2), &p).unwrap();
        assert_eq!(c.to_csv().lines().count(), 8);
    }
}
