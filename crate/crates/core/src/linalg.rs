//! Dense Gaussian elimination over any [`Scalar`], exact or floating.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub n: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> &T {
        &self.data[r * self.n + c]
    }

    #[inline]
    pub fn get_mut(&mut self, r: usize, c: usize) -> &mut T {
        &mut self.data[r * self.n + c]
    }

    pub fn matmul(&self, other: &Self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let v = a.clone() * other.get(k, j).clone();
                    let slot = out.get_mut(i, j);
                    *slot = slot.clone() + v;
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                *out.get_mut(j, i) = self.get(i, j).clone();
            }
        }
        out
    }
}

/// Solves `A X = B` for `X` (B has `rhs_cols` columns, row-major, `n × rhs_cols`).
/// Partial pivoting by magnitude; exact types get exact answers.
pub fn solve<T: Scalar>(a: &Dense<T>, b: &[T], rhs_cols: usize) -> Result<Vec<T>> {
    let n = a.n;
    assert_eq!(b.len(), n * rhs_cols, "rhs shape");
    let mut m = a.data.clone();
    let mut x = b.to_vec();
    for col in 0..n {
        let mut piv = col;
        let mut best = m[col * n + col].magnitude();
        for r in col + 1..n {
            let v = m[r * n + col].magnitude();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best.is_zero() {
            return Err(Error::Singular);
        }
        if piv != col {
            for c in 0..n {
                m.swap(col * n + c, piv * n + c);
            }
            for c in 0..rhs_cols {
                x.swap(col * rhs_cols + c, piv * rhs_cols + c);
            }
        }
        let p = m[col * n + col].clone();
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = m[r * n + col].clone() / p.clone();
            if f.is_zero() {
                continue;
            }
            for c in col..n {
                let v = f.clone() * m[col * n + c].clone();
                m[r * n + c] = m[r * n + c].clone() - v;
            }
            for c in 0..rhs_cols {
                let v = f.clone() * x[col * rhs_cols + c].clone();
                x[r * rhs_cols + c] = x[r * rhs_cols + c].clone() - v;
            }
        }
    }
    for r in 0..n {
        let p = m[r * n + r].clone();
        for c in 0..rhs_cols {
            x[r * rhs_cols + c] = x[r * rhs_cols + c].clone() / p.clone();
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    #[test]
    fn solves_small_system() {
        let a = Dense {
            n: 2,
            data: vec![2.0f64, 1.0, 1.0, 3.0],
        };
        let x = solve(&a, &[3.0, 5.0], 1).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-15 && (x[1] - 1.4).abs() < 1e-15);
    }

    #[test]
    fn exact_inverse() {
        let r = |v: f64| BigRational::lit(v);
        let a = Dense {
            n: 2,
            data: vec![r(4.0), r(-1.0), r(-1.0), r(3.0)],
        };
        let inv = solve(&a, &Dense::identity(2).data, 2).unwrap();
        let eleven = r(11.0);
        assert_eq!(inv[0], r(3.0) / eleven.clone());
        assert_eq!(inv[1], r(1.0) / eleven.clone());
        assert_eq!(inv[3], r(4.0) / eleven);
    }

    #[test]
    fn singular_reported() {
        let a = Dense {
            n: 2,
            data: vec![1.0, 2.0, 2.0, 4.0],
        };
        assert!(matches!(solve(&a, &[1.0, 1.0], 1), Err(Error::Singular)));
    }
}
