use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a [`DirectionGrid`] was generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridMethod {
    /// Equally spaced angles on the circle.
    Circle,
    /// Golden-angle spiral on the 2-sphere.
    Fibonacci,
    /// Radially projected Halton points, for n >= 4.
    Halton,
}

/// A deterministic set of unit directions in the dual space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionGrid {
    dim: usize,
    method: GridMethod,
    /// Flat storage, `count * dim` entries.
    data: Vec<f64>,
}

const PRIMES: [u32; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut out = 0.0;
    let mut f = inv;
    while i > 0 {
        out += (i % b) as f64 * f;
        i /= b;
        f *= inv;
    }
    out
}

impl DirectionGrid {
    /// Builds the grid for dimension `dim` with `count` directions.
    pub fn new(dim: usize, count: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invalid("grid dimension must be positive".into()));
        }
        if count < 2 * dim {
            return Err(Error::GridTooSmall(format!(
                "{count} directions in dimension {dim}; need at least {}",
                2 * dim
            )));
        }
        if dim > PRIMES.len() {
            return Err(Error::Invalid(format!("grid dimension {dim} unsupported")));
        }
        let (method, data) = match dim {
            1 => (GridMethod::Circle, (0..count).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect()),
            2 => {
                let mut data = Vec::with_capacity(2 * count);
                for k in 0..count {
                    let th = std::f64::consts::TAU * k as f64 / count as f64;
                    data.push(th.cos());
                    data.push(th.sin());
                }
                (GridMethod::Circle, data)
            }
            3 => {
                let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
                let mut data = Vec::with_capacity(3 * count);
                for k in 0..count {
                    let z = 1.0 - (2 * k + 1) as f64 / count as f64;
                    let r = (1.0 - z * z).max(0.0).sqrt();
                    let phi = golden * k as f64;
                    data.extend_from_slice(&[r * phi.cos(), r * phi.sin(), z]);
                }
                (GridMethod::Fibonacci, data)
            }
            _ => {
                let mut data = Vec::with_capacity(dim * count);
                let mut i = 1u64;
                while data.len() < dim * count {
                    let p: Vec<f64> =
                        (0..dim).map(|d| 2.0 * radical_inverse(i, PRIMES[d]) - 1.0).collect();
                    i += 1;
                    let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if norm < 0.05 {
                        continue;
                    }
                    data.extend(p.iter().map(|v| v / norm));
                }
                (GridMethod::Halton, data)
            }
        };
        let mut grid = Self { dim, method, data };
        for k in 0..grid.len() {
            let d = &mut grid.data[k * dim..(k + 1) * dim];
            let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            d.iter_mut().for_each(|v| *v /= norm);
        }
        Ok(grid)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn method(&self) -> GridMethod {
        self.method
    }

    pub fn direction(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    /// Cache key: grids are fully determined by dimension and count.
    pub fn key(&self) -> (usize, usize) {
        (self.dim, self.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_norm_and_deterministic() {
        for (n, c) in [(2, 8), (3, 100), (4, 64)] {
            let g = DirectionGrid::new(n, c).unwrap();
            assert_eq!(g.len(), c);
            for d in g.iter() {
                let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!((norm - 1.0).abs() < 1e-12);
            }
            assert_eq!(g, DirectionGrid::new(n, c).unwrap());
        }
    }

    #[test]
    fn too_few_directions_rejected() {
        assert!(matches!(DirectionGrid::new(3, 5), Err(Error::GridTooSmall(_))));
    }

    #[test]
    fn circle_grid_contains_axes() {
        let g = DirectionGrid::new(2, 8).unwrap();
        assert!((g.direction(0)[0] - 1.0).abs() < 1e-15);
        assert!((g.direction(2)[1] - 1.0).abs() < 1e-15);
    }
}
