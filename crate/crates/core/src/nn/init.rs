//! Seeded parameter initializers.

use rand::Rng;

use super::Matrix;

/// Glorot/Xavier uniform over `fan_in = rows`, `fan_out = cols`.
pub fn xavier_uniform<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Matrix::from_shape_fn((rows, cols), |_| rng.gen_range(-limit..limit))
}

/// Uniform in `[-bound, bound)`.
pub fn uniform<R: Rng>(rows: usize, cols: usize, bound: f64, rng: &mut R) -> Matrix {
    Matrix::from_shape_fn((rows, cols), |_| rng.gen_range(-bound..bound))
}

/// Normal(0, std) via Box-Muller.
pub fn normal<R: Rng>(rows: usize, cols: usize, std: f64, rng: &mut R) -> Matrix {
    Matrix::from_shape_fn((rows, cols), |_| {
        let u1: f64 = 1.0 - rng.gen::<f64>();
        let u2: f64 = rng.gen();
        std * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    })
}

pub fn zeros(rows: usize, cols: usize) -> Matrix {
    Matrix::zeros((rows, cols))
}

pub fn ones(rows: usize, cols: usize) -> Matrix {
    Matrix::ones((rows, cols))
}
