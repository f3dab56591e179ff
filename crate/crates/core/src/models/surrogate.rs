use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::cloud::{distance, generate_cloud, CloudConfiguration, CloudParams};
use super::{Model, ModelSample, TimeSeries};
use crate::error::{Error, Result};
use crate::rng::SampleStream;

const MM: f64 = 1e-3;
const MPA: f64 = 1e6;
const US: f64 = 1e-6;

/// Physical and numerical parameters of the interacting-bubble surrogate.
///
/// Pressures in Pa, density in kg/m^3, times in s. Cloud geometry uses the
/// millimetre units of [`CloudParams`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateParams {
    pub cloud: CloudParams,
    pub density: f64,
    pub gas_pressure: f64,
    pub ambient_pressure: f64,
    pub gamma: f64,
    /// Liquid sound speed of the radiation damping term, m/s; zero disables it.
    pub sound_speed: f64,
    /// Duration of the smooth rise of the far-field pressure.
    pub ramp_time: f64,
    /// Time step on resolution 0.
    pub dt0: f64,
    /// Number of steps on resolution 0; resolution `r` takes `steps0 * 2^r`.
    pub steps0: usize,
    /// Resolution-0 steps between output points of the time series.
    pub output_stride: usize,
    /// Smallest radius as a fraction of the initial radius.
    pub radius_floor: f64,
}

impl Default for SurrogateParams {
    fn default() -> Self {
        Self {
            cloud: CloudParams {
                count: 32,
                cloud_radius: 8.0,
                ..CloudParams::default()
            },
            density: 1000.0,
            gas_pressure: 0.5e6,
            ambient_pressure: 10e6,
            gamma: 1.4,
            sound_speed: 1500.0,
            ramp_time: 1e-6,
            dt0: 2e-8,
            steps0: 1500,
            output_stride: 10,
            radius_floor: 1e-3,
        }
    }
}

impl SurrogateParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("density", self.density),
            ("gas_pressure", self.gas_pressure),
            ("ambient_pressure", self.ambient_pressure),
            ("gamma", self.gamma),
            ("dt0", self.dt0),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "surrogate `{name}` must be positive, got {v}"
                )));
            }
        }
        if self.steps0 == 0 || self.output_stride == 0 {
            return Err(Error::InvalidArgument("surrogate step counts must be positive".into()));
        }
        if !(self.sound_speed >= 0.0) || !self.sound_speed.is_finite() {
            return Err(Error::InvalidArgument(
                "sound_speed must be non-negative and finite".into(),
            ));
        }
        if !(self.ramp_time >= 0.0) {
            return Err(Error::InvalidArgument("ramp_time must be non-negative".into()));
        }
        Ok(())
    }

    /// Far-field pressure, rising smoothly from the gas pressure.
    pub fn far_field(&self, t: f64) -> f64 {
        let s = if self.ramp_time == 0.0 {
            1.0
        } else {
            let x = (t / self.ramp_time).clamp(0.0, 1.0);
            x * x * (3.0 - 2.0 * x)
        };
        self.gas_pressure + (self.ambient_pressure - self.gas_pressure) * s
    }

    pub fn end_time(&self) -> f64 {
        self.dt0 * self.steps0 as f64
    }
}

/// Result of integrating one bubble system at one resolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: usize,
    /// Output grid spacing, s.
    pub output_step: f64,
    /// Pressure at the sensor, Pa, on the output grid.
    pub sensor: Vec<f64>,
    /// Total gas volume, m^3, on the output grid.
    pub gas_volume: Vec<f64>,
    /// Smallest radius reached by each bubble, m.
    pub min_radius: Vec<f64>,
    /// Largest gas pressure reached by any bubble, Pa.
    pub peak_pressure: f64,
    pub peak_bubble: usize,
    /// Time of the sensor maximum, s.
    pub collapse_time: f64,
    /// Sensor maximum, Pa.
    pub sensor_peak: f64,
    /// Radius history of bubble 0 on the output grid, m.
    pub first_radius: Vec<f64>,
}

/// Coupled Rayleigh-Plesset system for a fixed set of bubbles.
///
/// Each bubble obeys
/// `R_i R_i'' + 3/2 R_i'^2 = (p_b,i - p_inf(t)) / rho - sum_j (R_j^2 R_j'' + 2 R_j R_j'^2) / d_ij`
/// with polytropic gas pressure `p_b,i = p_gas (R_0,i / R_i)^(3 gamma)`, plus
/// the acoustic radiation term `R_i p_b,i' / (rho c)` on the right-hand side
/// when a sound speed `c` is set. The accelerations of all bubbles are solved together at every stage.
#[derive(Clone, Debug)]
pub struct BubbleSystem {
    params: SurrogateParams,
    positions: Vec<[f64; 3]>,
    r0: Vec<f64>,
    sensor: [f64; 3],
    inv_distance: DMatrix<f64>,
}

struct Scratch {
    matrix: DMatrix<f64>,
    rhs: DVector<f64>,
}

impl BubbleSystem {
    /// Bubbles at `positions` (m) with initial radii `r0` (m), sensor at `sensor` (m).
    pub fn new(params: SurrogateParams, positions: Vec<[f64; 3]>, r0: Vec<f64>, sensor: [f64; 3]) -> Result<Self> {
        params.validate()?;
        let n = r0.len();
        if n == 0 || positions.len() != n {
            return Err(Error::InvalidArgument(
                "bubble system needs matching positions and radii".into(),
            ));
        }
        if r0.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::InvalidArgument("initial radii must be positive".into()));
        }
        let mut inv_distance = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let d = distance(&positions[i], &positions[j]);
                    if !(d > 0.0) {
                        return Err(Error::InvalidArgument(format!("bubbles {i} and {j} coincide")));
                    }
                    inv_distance[(i, j)] = 1.0 / d;
                }
            }
        }
        Ok(Self {
            params,
            positions,
            r0,
            sensor,
            inv_distance,
        })
    }

    /// System for a cloud given in millimetres, sensor at the cloud center.
    pub fn from_cloud(params: SurrogateParams, cloud: &CloudConfiguration) -> Result<Self> {
        let positions = cloud
            .positions
            .iter()
            .map(|p| [p[0] * MM, p[1] * MM, p[2] * MM])
            .collect();
        let r0 = cloud.radii.iter().map(|r| r * MM).collect();
        let c = cloud.center;
        Self::new(params, positions, r0, [c[0] * MM, c[1] * MM, c[2] * MM])
    }

    pub fn len(&self) -> usize {
        self.r0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r0.is_empty()
    }

    pub fn params(&self) -> &SurrogateParams {
        &self.params
    }

    fn gas_pressure(&self, i: usize, r: f64) -> f64 {
        self.params.gas_pressure * (self.r0[i] / r).powf(3.0 * self.params.gamma)
    }

    /// Accelerations for radii `r` and velocities `v` at time `t`.
    fn accelerations(&self, t: f64, r: &[f64], v: &[f64], scratch: &mut Scratch, out: &mut [f64]) -> Result<()> {
        let n = r.len();
        let rho = self.params.density;
        let p_inf = self.params.far_field(t);
        let radiation = if self.params.sound_speed > 0.0 {
            3.0 * self.params.gamma / (rho * self.params.sound_speed)
        } else {
            0.0
        };
        scratch.matrix.copy_from(&self.inv_distance);
        for i in 0..n {
            scratch.matrix[(i, i)] = 1.0 / r[i];
            let mut coupling = 0.0;
            for j in 0..n {
                if j != i {
                    coupling += 2.0 * r[j] * v[j] * v[j] * self.inv_distance[(i, j)];
                }
            }
            let pb = self.gas_pressure(i, r[i]);
            scratch.rhs[i] = (pb - p_inf) / rho - 1.5 * v[i] * v[i] - coupling - radiation * pb * v[i];
        }
        if n == 1 {
            scratch.rhs[0] *= r[0];
        } else {
            match scratch.matrix.clone().cholesky() {
                Some(ch) => ch.solve_mut(&mut scratch.rhs),
                None => {
                    if !scratch.matrix.clone().lu().solve_mut(&mut scratch.rhs) {
                        return Err(Error::Model("singular bubble interaction matrix".into()));
                    }
                }
            }
        }
        for i in 0..n {
            out[i] = scratch.rhs[i] / (r[i] * r[i]);
        }
        if out.iter().any(|a| !a.is_finite()) {
            return Err(Error::Model(format!("non-finite acceleration at t = {t:.3e} s")));
        }
        Ok(())
    }

    fn sensor_pressure(&self, t: f64, r: &[f64], v: &[f64], a: &[f64]) -> f64 {
        let rho = self.params.density;
        let mut p = self.params.far_field(t);
        for j in 0..r.len() {
            let d = distance(&self.positions[j], &self.sensor).max(r[j]);
            p += rho * (r[j] * r[j] * a[j] + 2.0 * r[j] * v[j] * v[j]) / d;
        }
        p
    }

    /// Integrate with the classical fourth-order Runge-Kutta scheme at
    /// `dt0 * 2^-resolution` up to the fixed end time.
    pub fn integrate(&self, resolution: i32) -> Result<Trajectory> {
        let n = self.len();
        let p = &self.params;
        let refine = (resolution as f64).exp2();
        let steps_f = p.steps0 as f64 * refine;
        let stride_f = p.output_stride as f64 * refine;
        if steps_f < 1.0 || stride_f < 1.0 || stride_f.fract() != 0.0 {
            return Err(Error::InvalidArgument(format!(
                "resolution {resolution} does not divide the output grid"
            )));
        }
        let steps = steps_f as usize;
        let stride = stride_f as usize;
        let dt = p.dt0 / refine;
        let floor: Vec<f64> = self.r0.iter().map(|r| r * p.radius_floor).collect();

        let mut scratch = Scratch {
            matrix: DMatrix::zeros(n, n),
            rhs: DVector::zeros(n),
        };
        let mut r = self.r0.clone();
        let mut v = vec![0.0; n];
        let (mut a1, mut a2, mut a3, mut a4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let (mut rs, mut vs) = (vec![0.0; n], vec![0.0; n]);
        let mut min_radius = self.r0.clone();

        let mut sensor = Vec::with_capacity(steps / stride + 1);
        let mut gas_volume = Vec::with_capacity(steps / stride + 1);
        let mut first_radius = Vec::with_capacity(steps / stride + 1);
        // last three sensor samples for parabolic peak refinement
        let mut best = (f64::NEG_INFINITY, 0.0);
        let mut window = [f64::NAN; 3];

        let volume = |r: &[f64]| {
            r.iter()
                .map(|x| 4.0 / 3.0 * std::f64::consts::PI * x.powi(3))
                .sum::<f64>()
        };

        for step in 0..=steps {
            let t = step as f64 * dt;
            // the first stage doubles as the acceleration for the sensor at time t
            self.accelerations(t, &r, &v, &mut scratch, &mut a1)?;
            let ps = self.sensor_pressure(t, &r, &v, &a1);
            window = [window[1], window[2], ps];
            if step >= 1 && window[1] > best.0 && window[1] >= window[0] && window[1] >= window[2] {
                let (tp, pp) = parabolic_peak(window, t - dt, dt);
                best = (pp, tp);
            }
            if step % stride == 0 {
                sensor.push(ps);
                gas_volume.push(volume(&r));
                first_radius.push(r[0]);
            }
            if step == steps {
                if ps > best.0 {
                    best = (ps, t);
                }
                break;
            }

            for i in 0..n {
                rs[i] = r[i] + 0.5 * dt * v[i];
                vs[i] = v[i] + 0.5 * dt * a1[i];
            }
            let v2 = vs.clone();
            self.accelerations(t + 0.5 * dt, &rs, &vs, &mut scratch, &mut a2)?;
            for i in 0..n {
                rs[i] = r[i] + 0.5 * dt * v2[i];
                vs[i] = v[i] + 0.5 * dt * a2[i];
            }
            let v3 = vs.clone();
            self.accelerations(t + 0.5 * dt, &rs, &vs, &mut scratch, &mut a3)?;
            for i in 0..n {
                rs[i] = r[i] + dt * v3[i];
                vs[i] = v[i] + dt * a3[i];
            }
            let v4 = vs.clone();
            self.accelerations(t + dt, &rs, &vs, &mut scratch, &mut a4)?;

            for i in 0..n {
                let r_old = r[i];
                let v_old = v[i];
                r[i] += dt / 6.0 * (v_old + 2.0 * v2[i] + 2.0 * v3[i] + v4[i]);
                v[i] += dt / 6.0 * (a1[i] + 2.0 * a2[i] + 2.0 * a3[i] + a4[i]);
                if r[i] < floor[i] || !r[i].is_finite() {
                    r[i] = floor[i];
                    v[i] = 0.0;
                }
                let m = hermite_min(r_old, v_old, r[i], v[i], dt).max(floor[i]);
                if m < min_radius[i] {
                    min_radius[i] = m;
                }
            }
            if r.iter().chain(&v).any(|x| !x.is_finite()) {
                return Err(Error::Model(format!("integration blew up at t = {t:.3e} s")));
            }
        }

        let (peak_bubble, peak_pressure) = min_radius
            .iter()
            .enumerate()
            .map(|(i, &m)| (i, self.gas_pressure(i, m)))
            .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });

        Ok(Trajectory {
            steps,
            output_step: dt * stride as f64,
            sensor,
            gas_volume,
            min_radius,
            peak_pressure,
            peak_bubble,
            collapse_time: best.1,
            sensor_peak: best.0,
            first_radius,
        })
    }

    pub fn distance_to_sensor(&self, bubble: usize) -> f64 {
        distance(&self.positions[bubble], &self.sensor)
    }
}

/// Vertex of the parabola through three equally spaced samples centred at `t_mid`.
fn parabolic_peak(w: [f64; 3], t_mid: f64, dt: f64) -> (f64, f64) {
    let denom = w[0] - 2.0 * w[1] + w[2];
    if !(denom < 0.0) {
        return (t_mid, w[1]);
    }
    let shift = (0.5 * (w[0] - w[2]) / denom).clamp(-1.0, 1.0);
    let value = w[1] - 0.25 * (w[0] - w[2]) * shift;
    (t_mid + shift * dt, value)
}

/// Minimum over one step of the cubic Hermite interpolant of the radius.
fn hermite_min(r0: f64, v0: f64, r1: f64, v1: f64, h: f64) -> f64 {
    let mut best = r0.min(r1);
    if !(v0 < 0.0 && v1 > 0.0) {
        return best;
    }
    // R(s) = h00 r0 + h10 h v0 + h01 r1 + h11 h v1, s in [0, 1]
    let (m0, m1) = (h * v0, h * v1);
    let a = 6.0 * r0 + 3.0 * m0 - 6.0 * r1 + 3.0 * m1;
    let b = -6.0 * r0 - 4.0 * m0 + 6.0 * r1 - 2.0 * m1;
    let c = m0;
    let eval = |s: f64| {
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * r0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * r1 + (s3 - s2) * m1
    };
    let mut roots = Vec::with_capacity(2);
    if a.abs() < 1e-300 {
        if b != 0.0 {
            roots.push(-c / b);
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            roots.push((-b + sq) / (2.0 * a));
            roots.push((-b - sq) / (2.0 * a));
        }
    }
    for s in roots {
        if (0.0..=1.0).contains(&s) {
            best = best.min(eval(s));
        }
    }
    best
}

/// Interacting-bubble collapse of a random cloud.
///
/// The cloud is drawn from the sample stream, so both sides of a coupled pair
/// integrate the same bubbles. Scalar outputs are `peak_pressure` (MPa),
/// `collapse_time` (us), `sensor_pressure` (MPa, sensor maximum),
/// `peak_location_distance` (mm), and the cloud descriptors `gas_fraction`,
/// `beta`, `skewness_x`, `skewness_y`, `skewness_z` and `central_distance`.
/// Time series `sensor_pressure` (MPa) and `gas_volume` (mm^3) are sampled on
/// a grid in microseconds shared by all resolutions.
#[derive(Clone, Debug, Default)]
pub struct SurrogateModel {
    pub params: SurrogateParams,
}

impl SurrogateModel {
    pub fn new(params: SurrogateParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }

    pub fn cloud(&self, stream: &SampleStream) -> Result<CloudConfiguration> {
        generate_cloud(&stream.derive_named("cloud"), &self.params.cloud)
    }

    /// Work of one evaluation at `resolution`: time steps times bubbles.
    pub fn work(&self, resolution: i32) -> f64 {
        self.params.steps0 as f64 * (resolution as f64).exp2() * self.params.cloud.count as f64
    }
}

impl Model for SurrogateModel {
    fn name(&self) -> &str {
        "surrogate"
    }

    fn qoi_names(&self) -> Vec<String> {
        [
            "peak_pressure",
            "collapse_time",
            "sensor_pressure",
            "peak_location_distance",
            "gas_fraction",
            "beta",
            "skewness_x",
            "skewness_y",
            "skewness_z",
            "central_distance",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect()
    }

    fn evaluate(&self, stream: &SampleStream, resolution: i32) -> Result<ModelSample> {
        let cloud = self.cloud(stream)?;
        let system = BubbleSystem::from_cloud(self.params.clone(), &cloud)?;
        let tr = system.integrate(resolution)?;
        let step_us = tr.output_step / US;
        let sensor = tr.sensor.iter().map(|p| p / MPA).collect();
        let volume = tr.gas_volume.iter().map(|v| v / (MM * MM * MM)).collect();
        Ok(ModelSample::new(tr.steps as f64 * system.len() as f64)
            .with_qoi("peak_pressure", tr.peak_pressure / MPA)
            .with_qoi("collapse_time", tr.collapse_time / US)
            .with_qoi("sensor_pressure", tr.sensor_peak / MPA)
            .with_qoi("peak_location_distance", system.distance_to_sensor(tr.peak_bubble) / MM)
            .with_qoi("gas_fraction", cloud.gas_fraction)
            .with_qoi("beta", cloud.beta)
            .with_qoi("skewness_x", cloud.skewness[0])
            .with_qoi("skewness_y", cloud.skewness[1])
            .with_qoi("skewness_z", cloud.skewness[2])
            .with_qoi("central_distance", cloud.central_distance)
            .with_series("sensor_pressure", TimeSeries::new(0.0, step_us, sensor)?)
            .with_series("gas_volume", TimeSeries::new(0.0, step_us, volume)?))
    }

    fn nominal_work(&self, resolution: i32) -> Option<f64> {
        Some(self.work(resolution))
    }
}
