//! Small dense symmetric eigensolver.
//!
//! Cyclic Jacobi rotations. For the fixed 9×9 covariance matrices used here
//! it converges in a handful of sweeps and gives eigenvectors orthonormal to
//! machine precision.

pub type Matrix<const N: usize> = [[f64; N]; N];

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen<const N: usize> {
    /// Unsorted eigenvalues.
    pub values: [f64; N],
    /// `vectors[k]` is the unit eigenvector for `values[k]`.
    pub vectors: Matrix<N>,
    pub sweeps: usize,
}

const MAX_SWEEPS: usize = 100;

fn off_diagonal_sq<const N: usize>(a: &Matrix<N>) -> f64 {
    let mut s = 0.0;
    for (p, row) in a.iter().enumerate() {
        for &x in &row[p + 1..] {
            s += x * x;
        }
    }
    s
}

/// Decomposes `a` (only the upper triangle is read; it is assumed symmetric).
pub fn symmetric_eigen<const N: usize>(a: &Matrix<N>) -> SymmetricEigen<N> {
    let mut m = [[0.0; N]; N];
    for p in 0..N {
        for q in p..N {
            m[p][q] = a[p][q];
            m[q][p] = a[p][q];
        }
    }
    // v accumulates rotations; column k ends up as eigenvector k
    let mut v = [[0.0; N]; N];
    for (k, row) in v.iter_mut().enumerate() {
        row[k] = 1.0;
    }
    let scale: f64 = (0..N).map(|k| m[k][k] * m[k][k]).sum::<f64>() + 2.0 * off_diagonal_sq(&m);

    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        let off = off_diagonal_sq(&m);
        if off == 0.0 || off <= scale * f64::EPSILON * f64::EPSILON * 1e-4 {
            break;
        }
        sweeps += 1;
        for p in 0..N {
            for q in p + 1..N {
                let apq = m[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * apq);
                let t = {
                    let t = 1.0 / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                    if theta < 0.0 { -t } else { t }
                };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                let tau = s / (1.0 + c);

                m[p][p] -= t * apq;
                m[q][q] += t * apq;
                m[p][q] = 0.0;
                m[q][p] = 0.0;
                for r in 0..N {
                    if r != p && r != q {
                        let arp = m[r][p];
                        let arq = m[r][q];
                        let new_rp = arp - s * (arq + tau * arp);
                        let new_rq = arq + s * (arp - tau * arq);
                        m[r][p] = new_rp;
                        m[p][r] = new_rp;
                        m[r][q] = new_rq;
                        m[q][r] = new_rq;
                    }
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = vp - s * (vq + tau * vp);
                    row[q] = vq + s * (vp - tau * vq);
                }
            }
        }
    }

    let mut values = [0.0; N];
    let mut vectors = [[0.0; N]; N];
    for k in 0..N {
        values[k] = m[k][k];
        for r in 0..N {
            vectors[k][r] = v[r][k];
        }
    }
    SymmetricEigen {
        values,
        vectors,
        sweeps,
    }
}

pub fn dot<const N: usize>(a: &[f64; N], b: &[f64; N]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
