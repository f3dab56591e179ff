use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar field on a uniform Cartesian grid of cells. Cell `(i, j, k)` has
/// centre `origin + (i + 1/2, j + 1/2, k + 1/2) * spacing` and value
/// `values[(k * ny + j) * nx + i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Field3 {
    pub dims: [usize; 3],
    pub origin: [f64; 3],
    pub spacing: f64,
    pub values: Vec<f64>,
}

impl Field3 {
    pub fn new(dims: [usize; 3], origin: [f64; 3], spacing: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != dims[0] * dims[1] * dims[2] {
            return Err(Error::InvalidArgument(format!(
                "field of {:?} cells needs {} values",
                dims,
                dims[0] * dims[1] * dims[2]
            )));
        }
        if !(spacing > 0.0) {
            return Err(Error::InvalidArgument("grid spacing must be positive".into()));
        }
        Ok(Self {
            dims,
            origin,
            spacing,
            values,
        })
    }

    /// Field sampled from `f` at the cell centres.
    pub fn from_fn(dims: [usize; 3], origin: [f64; 3], spacing: f64, f: impl Fn([f64; 3]) -> f64) -> Self {
        let mut values = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    values.push(f(Self::centre_of(origin, spacing, [i, j, k])));
                }
            }
        }
        Self {
            dims,
            origin,
            spacing,
            values,
        }
    }

    fn centre_of(origin: [f64; 3], h: f64, idx: [usize; 3]) -> [f64; 3] {
        [0, 1, 2].map(|a| origin[a] + (idx[a] as f64 + 0.5) * h)
    }

    pub fn centre(&self, idx: [usize; 3]) -> [f64; 3] {
        Self::centre_of(self.origin, self.spacing, idx)
    }
}

/// Mean of the cells whose centre lies within distance `radius` of `center`.
pub fn sphere_average(field: &Field3, center: [f64; 3], radius: f64) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sphere radius must be positive, got {radius}"
        )));
    }
    let h = field.spacing;
    let mut range = [(0usize, 0usize); 3];
    for a in 0..3 {
        let lo = ((center[a] - radius - field.origin[a]) / h - 0.5).floor().max(0.0) as usize;
        let hi = (((center[a] + radius - field.origin[a]) / h - 0.5).ceil().max(-1.0) + 1.0) as usize;
        range[a] = (lo, hi.min(field.dims[a]));
    }
    let (mut sum, mut count) = (0.0, 0usize);
    let r2 = radius * radius;
    for k in range[2].0..range[2].1 {
        for j in range[1].0..range[1].1 {
            for i in range[0].0..range[0].1 {
                let c = field.centre([i, j, k]);
                let d2: f64 = (0..3).map(|a| (c[a] - center[a]).powi(2)).sum();
                if d2 <= r2 {
                    sum += field.values[(k * field.dims[1] + j) * field.dims[0] + i];
                    count += 1;
                }
            }
        }
    }
    if count == 0 {
        return Err(Error::InvalidArgument("sphere contains no grid cell".into()));
    }
    Ok(sum / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_field() {
        let f = Field3::from_fn([10, 10, 10], [0.0; 3], 0.1, |_| 4.5);
        assert_eq!(sphere_average(&f, [0.5; 3], 0.3).unwrap(), 4.5);
    }

    #[test]
    fn distance_field_gives_three_quarters_radius() {
        let c = [1.0; 3];
        let r = 0.25;
        let f = Field3::from_fn([200, 200, 200], [0.0; 3], 0.01, |x| {
            ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2) + (x[2] - c[2]).powi(2)).sqrt()
        });
        let avg = sphere_average(&f, c, r).unwrap();
        assert!((avg - 0.75 * r).abs() < 0.01 * r, "avg {avg}");
    }

    #[test]
    fn single_cell_and_empty_sphere() {
        let f = Field3::from_fn([4, 4, 4], [0.0; 3], 1.0, |x| x[0] + 10.0 * x[1] + 100.0 * x[2]);
        let v = sphere_average(&f, [1.5, 2.5, 0.5], 0.1).unwrap();
        assert_eq!(v, 1.5 + 25.0 + 50.0);
        assert!(sphere_average(&f, [1.0, 1.0, 1.0], 0.1).is_err());
        assert!(sphere_average(&f, [1.5, 1.5, 1.5], 0.0).is_err());
    }
}
