use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

type C64 = Complex64;

/// Matrix `δ_jk + w_k·kernel(x_j, x_k)`.
pub fn nystrom_matrix<K>(nodes: &[C64], weights: &[C64], mut kernel: K) -> Result<DMatrix<C64>>
where
    K: FnMut(usize, usize) -> C64,
{
    let n = nodes.len();
    let mut m = DMatrix::<C64>::identity(n, n);
    for k in 0..n {
        for j in 0..n {
            let v = kernel(j, k);
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("kernel at ({}, {})", nodes[j], nodes[k])));
            }
            m[(j, k)] += weights[k] * v;
        }
    }
    Ok(m)
}

/// Fredholm determinant det(I + K) by Nyström discretization. The kernel gets node indices.
pub fn nystrom_det<K>(nodes: &[C64], weights: &[C64], kernel: K) -> Result<C64>
where
    K: FnMut(usize, usize) -> C64,
{
    if nodes.is_empty() {
        return Ok(C64::new(1.0, 0.0));
    }
    Ok(nystrom_matrix(nodes, weights, kernel)?.lu().determinant())
}

/// Solves (I + K) v = rhs on the nodes; returns v and the sup-norm residual.
pub fn nystrom_solve<K>(nodes: &[C64], weights: &[C64], kernel: K, rhs: &[C64]) -> Result<(Vec<C64>, f64)>
where
    K: FnMut(usize, usize) -> C64,
{
    let m = nystrom_matrix(nodes, weights, kernel)?;
    let b = DVector::from_column_slice(rhs);
    let x = m.clone().lu().solve(&b).ok_or(Error::Singular)?;
    let res = (&m * &x - &b).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if !res.is_finite() {
        return Err(Error::Singular);
    }
    Ok((x.iter().copied().collect(), res))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::contour::Contour;
    use crate::numerics::quad::make_real_grid;

    fn line() -> Contour {
        Contour::real_line(&make_real_grid(3.0, 6, 12).unwrap())
    }

    #[test]
    fn zero_kernel() {
        let k = line();
        let d = nystrom_det(&k.nodes, &k.weights, |_, _| C64::new(0.0, 0.0)).unwrap();
        assert_eq!(d, C64::new(1.0, 0.0));
        let rhs = vec![C64::new(0.5 / std::f64::consts::PI, 0.0); k.len()];
        let (v, res) = nystrom_solve(&k.nodes, &k.weights, |_, _| C64::new(0.0, 0.0), &rhs).unwrap();
        assert!(res < 1e-15 && v == rhs);
    }

    #[test]
    fn rank_one_identity() {
        let k = line();
        let a: Vec<C64> = k.nodes.iter().map(|x| (-x * x).exp() * C64::new(0.3, 0.1)).collect();
        let b: Vec<C64> = k.nodes.iter().map(|x| (x * 0.5).cos()).collect();
        let d = nystrom_det(&k.nodes, &k.weights, |j, l| a[j] * b[l]).unwrap();
        let ab: C64 = (0..k.len()).map(|j| k.weights[j] * a[j] * b[j]).sum();
        assert!((d - (1.0 + ab)).norm() < 1e-13);
    }

    #[test]
    fn rank_two_product_of_factors() {
        // separable kernel with orthogonal pieces: det = (1+λ1)(1+λ2)
        let k = Contour::real_line(&make_real_grid(std::f64::consts::PI, 8, 16).unwrap());
        let s: Vec<C64> = k.nodes.iter().map(|x| x.sin()).collect();
        let c: Vec<C64> = k.nodes.iter().map(|x| x.cos()).collect();
        let d = nystrom_det(&k.nodes, &k.weights, |j, l| s[j] * s[l] * 0.2 + c[j] * c[l] * 0.1).unwrap();
        let pi = std::f64::consts::PI;
        let expect = (1.0 + 0.2 * pi) * (1.0 + 0.1 * pi);
        assert!((d - expect).norm() < 1e-12);
    }
}
