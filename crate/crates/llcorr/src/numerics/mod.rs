//! Quadrature, contours, Nyström linear algebra and the generic iteration drivers.

mod cauchy;
mod contour;
mod linalg;
mod quad;
mod solvers;

pub use cauchy::{cauchy_transform, count_zeros, count_zeros_logderiv, count_zeros_polygon};
pub use contour::{segment_distance, unwrap_imag, Contour, Panel, PanelRule};
pub use linalg::{nystrom_det, nystrom_matrix, nystrom_solve};
pub use quad::{gauss_legendre, make_real_grid, QuadGrid};
pub use solvers::{fixed_point, newton_complex, numeric_derivative, sup_distance, FixedPointOptions, SolverReport};

use num_complex::Complex64;

/// Overflow-safe `log(1 + e^x)` on the principal branch.
pub fn log1p_exp(x: Complex64) -> Complex64 {
    if x.re > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

trait Ln1p {
    fn ln_1p(self) -> Complex64;
}

impl Ln1p for Complex64 {
    fn ln_1p(self) -> Complex64 {
        if self.norm() < 1e-5 {
            // series keeps relative accuracy for tiny arguments
            self - self * self * 0.5 + self * self * self / 3.0
        } else {
            (1.0 + self).ln()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log1p_exp_is_overflow_safe() {
        let big = Complex64::new(800.0, 0.3);
        assert!((log1p_exp(big) - big).norm() < 1e-12);
        let small = Complex64::new(-40.0, 0.0);
        assert!((log1p_exp(small).re - (-40f64).exp()).abs() < 1e-30);
        let z = Complex64::new(0.3, -1.2);
        assert!((log1p_exp(z) - (1.0 + z.exp()).ln()).norm() < 1e-15);
    }
}
