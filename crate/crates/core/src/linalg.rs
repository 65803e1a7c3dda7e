//! Small dense 3x3 linear algebra: products, inverse, Cholesky, and a cyclic
//! Jacobi eigensolver for symmetric matrices with the matrix square roots built
//! on it.

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

pub const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

#[inline]
pub fn mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

#[inline]
pub fn mul_vec(a: &Mat3, v: Vec3) -> Vec3 {
    [
        a[0][0] * v[0] + a[0][1] * v[1] + a[0][2] * v[2],
        a[1][0] * v[0] + a[1][1] * v[1] + a[1][2] * v[2],
        a[2][0] * v[0] + a[2][1] * v[1] + a[2][2] * v[2],
    ]
}

#[inline]
pub fn transpose(a: &Mat3) -> Mat3 {
    let mut t = [[0.0; 3]; 3];
    for (i, row) in a.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            t[j][i] = *v;
        }
    }
    t
}

pub fn det(a: &Mat3) -> f64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

/// Inverse by the adjugate; `None` when the determinant vanishes.
pub fn inverse(a: &Mat3) -> Option<Mat3> {
    let d = det(a);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    let c = |r0: usize, r1: usize, c0: usize, c1: usize| a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0];
    let adj = [
        [c(1, 2, 1, 2), -c(0, 2, 1, 2), c(0, 1, 1, 2)],
        [-c(1, 2, 0, 2), c(0, 2, 0, 2), -c(0, 1, 0, 2)],
        [c(1, 2, 0, 1), -c(0, 2, 0, 1), c(0, 1, 0, 1)],
    ];
    Some(adj.map(|row| row.map(|v| v / d)))
}

pub fn add_diagonal(a: &Mat3, s: f64) -> Mat3 {
    let mut out = *a;
    for (i, row) in out.iter_mut().enumerate() {
        row[i] += s;
    }
    out
}

pub fn frobenius(a: &Mat3) -> f64 {
    a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn sub(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = *a;
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] -= b[i][j];
        }
    }
    out
}

/// Largest absolute difference between `a` and its transpose.
pub fn asymmetry(a: &Mat3) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        for j in (i + 1)..3 {
            worst = worst.max((a[i][j] - a[j][i]).abs());
        }
    }
    worst
}

pub fn symmetrize(a: &Mat3) -> Mat3 {
    let mut out = *a;
    for i in 0..3 {
        for j in (i + 1)..3 {
            let m = 0.5 * (a[i][j] + a[j][i]);
            out[i][j] = m;
            out[j][i] = m;
        }
    }
    out
}

/// Eigendecomposition `a = V diag(values) V^T` of a symmetric matrix.
/// Columns of `vectors` are the eigenvectors; values are sorted descending.
#[derive(Debug, Clone, Copy)]
pub struct SymEigen {
    pub values: Vec3,
    pub vectors: Mat3,
}

impl SymEigen {
    pub fn new(a: &Mat3) -> Self {
        let mut m = symmetrize(a);
        let mut v = IDENTITY;
        let scale = frobenius(&m);
        for _sweep in 0..64 {
            let off = m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2];
            if off.sqrt() <= 1e-17 * scale || off == 0.0 {
                break;
            }
            for (p, q) in [(0, 1), (0, 2), (1, 2)] {
                if m[p][q] == 0.0 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // m <- J^T m J with the Givens rotation J in the (p, q) plane
                for k in 0..3 {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..3 {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
        let mut order = [0usize, 1, 2];
        order.sort_by(|&i, &j| m[j][j].total_cmp(&m[i][i]));
        let values = order.map(|i| m[i][i]);
        let mut vectors = [[0.0; 3]; 3];
        for (col, &src) in order.iter().enumerate() {
            for row in 0..3 {
                vectors[row][col] = v[row][src];
            }
        }
        Self { values, vectors }
    }

    pub fn min_value(&self) -> f64 {
        self.values[2]
    }

    /// `V diag(f(values)) V^T`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> Mat3 {
        let d = self.values.map(f);
        let v = &self.vectors;
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, o) in row.iter_mut().enumerate() {
                *o = (0..3).map(|k| v[i][k] * d[k] * v[j][k]).sum();
            }
        }
        symmetrize(&out)
    }
}

/// Principal square root of a symmetric positive semi-definite matrix.
/// Slightly negative eigenvalues from rounding are treated as zero.
pub fn sqrt_spd(a: &Mat3) -> Mat3 {
    SymEigen::new(a).apply(|l| l.max(0.0).sqrt())
}

/// Inverse principal square root; `None` if any eigenvalue is not positive.
pub fn inv_sqrt_spd(a: &Mat3) -> Option<Mat3> {
    let e = SymEigen::new(a);
    if e.min_value() <= 0.0 {
        return None;
    }
    Some(e.apply(|l| 1.0 / l.sqrt()))
}

/// Lower-triangular `L` with `a = L L^T`; `None` if `a` is not positive definite.
pub fn cholesky(a: &Mat3) -> Option<Mat3> {
    let mut l = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if d <= 0.0 || !d.is_finite() {
                    return None;
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

/// Inverse of a lower-triangular matrix by forward substitution.
pub fn inverse_lower(l: &Mat3) -> Option<Mat3> {
    let mut inv = [[0.0; 3]; 3];
    for col in 0..3 {
        for i in 0..3 {
            if l[i][i] == 0.0 {
                return None;
            }
            let rhs = if i == col { 1.0 } else { 0.0 };
            let s: f64 = (0..i).map(|k| l[i][k] * inv[k][col]).sum();
            inv[i][col] = (rhs - s) / l[i][i];
        }
    }
    Some(inv)
}
