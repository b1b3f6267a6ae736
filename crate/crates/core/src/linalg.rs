//! Dense complex linear-algebra helpers shared across the crate: conjugate
//! transpose, column-stacking vectorization, LU solves, eigendecomposition,
//! a Padé scaling-and-squaring matrix exponential, and an adaptive
//! Dormand-Prince 5(4) integrator for linear systems.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eig, Solve, SVD};

use crate::error::{Error, Result};

pub use num_complex::Complex64 as C64;

/// Shorthand for a purely real complex number.
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Shorthand for a purely imaginary complex number.
pub fn im(x: f64) -> C64 {
    C64::new(0.0, x)
}

/// Conjugate transpose.
pub fn dagger(m: &Array2<C64>) -> Array2<C64> {
    m.t().mapv(|z| z.conj())
}

/// Column-stacking vectorization: vec(rho)[c*d + r] = rho[r, c].
///
/// With this convention vec(A rho B) = (B^T kron A) vec(rho), which is how
/// the superoperator matrices in this crate are assembled.
pub fn vec_density(rho: &Array2<C64>) -> Array1<C64> {
    let d = rho.nrows();
    Array1::from_shape_fn(d * d, |v| rho[(v % d, v / d)])
}

/// Inverse of [`vec_density`].
pub fn unvec_density(v: &Array1<C64>, d: usize) -> Array2<C64> {
    Array2::from_shape_fn((d, d), |(r, c)| v[c * d + r])
}

/// LU solve of a x = b, mapping backend failures onto [`Error::SingularSystem`].
pub fn lu_solve(a: &Array2<C64>, b: &Array1<C64>) -> Result<Array1<C64>> {
    a.solve(b).map_err(|_| Error::SingularSystem)
}

/// Eigendecomposition of a general complex matrix: m = V diag(vals) V^-1.
///
/// Returns (vals, V) and leaves inversion of V to the caller.
pub fn eig(m: &Array2<C64>) -> Result<(Array1<C64>, Array2<C64>)> {
    m.eig().map_err(|e| Error::Backend(e.to_string()))
}

/// Number of singular values below `tol` times the largest one.
pub fn null_space_dim(m: &Array2<C64>, tol: f64) -> Result<usize> {
    let (_, sv, _) = m
        .svd(false, false)
        .map_err(|e| Error::Backend(e.to_string()))?;
    let top = sv.iter().cloned().fold(0.0_f64, f64::max);
    if top == 0.0 {
        return Ok(m.nrows());
    }
    Ok(sv.iter().filter(|&&s| s < tol * top).count())
}

/// Max-norm of a matrix.
pub fn max_abs(m: &Array2<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// 1-norm (maximum absolute column sum), the norm the exponential scaling
/// heuristic is calibrated against.
fn one_norm(m: &Array2<C64>) -> f64 {
    let mut best = 0.0_f64;
    for c in m.columns() {
        let s: f64 = c.iter().map(|z| z.norm()).sum();
        best = best.max(s);
    }
    best
}

/// Matrix exponential by degree-13 Padé approximation with scaling and
/// squaring. Accurate to machine precision for the modest dimensions
/// (<= a few hundred) used in this crate.
pub fn expm(a: &Array2<C64>) -> Result<Array2<C64>> {
    // Degree-13 Padé coefficients.
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    // theta_13 from the standard backward-error analysis of the degree-13
    // approximant: below this 1-norm no scaling is required.
    const THETA_13: f64 = 5.371920351148152;

    let d = a.nrows();
    if a.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: a.ncols(),
        });
    }
    let norm = one_norm(a);
    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a.mapv(|z| z / re(2.0_f64.powi(s as i32)));

    let id = Array2::<C64>::eye(d);
    let a2 = scaled.dot(&scaled);
    let a4 = a2.dot(&a2);
    let a6 = a2.dot(&a4);

    let u_inner = a6.mapv(|z| z * re(B[13])) + a4.mapv(|z| z * re(B[11])) + a2.mapv(|z| z * re(B[9]));
    let u = scaled.dot(
        &(a6.dot(&u_inner)
            + a6.mapv(|z| z * re(B[7]))
            + a4.mapv(|z| z * re(B[5]))
            + a2.mapv(|z| z * re(B[3]))
            + id.mapv(|z| z * re(B[1]))),
    );
    let v_inner = a6.mapv(|z| z * re(B[12])) + a4.mapv(|z| z * re(B[10])) + a2.mapv(|z| z * re(B[8]));
    let v = a6.dot(&v_inner)
        + a6.mapv(|z| z * re(B[6]))
        + a4.mapv(|z| z * re(B[4]))
        + a2.mapv(|z| z * re(B[2]))
        + id.mapv(|z| z * re(B[0]));

    // (V - U) X = (V + U), then square s times.
    let lhs = &v - &u;
    let rhs = &v + &u;
    let mut result = Array2::<C64>::zeros((d, d));
    for (j, col) in rhs.columns().into_iter().enumerate() {
        let x = lu_solve(&lhs, &col.to_owned())?;
        result.column_mut(j).assign(&x);
    }
    for _ in 0..s {
        result = result.dot(&result);
    }
    Ok(result)
}

/// Dormand-Prince 5(4) nodes and weights.
const DP_A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrate y' = m y from 0 to t with adaptive Dormand-Prince 5(4) steps.
///
/// `rtol` is the local relative tolerance; the absolute floor is tied to the
/// largest component of the initial state so that small density-matrix
/// entries are not over-resolved.
pub fn integrate_linear(
    m: &Array2<C64>,
    y0: &Array1<C64>,
    t: f64,
    rtol: f64,
) -> Result<Array1<C64>> {
    let dim = y0.len();
    if m.nrows() != dim || m.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: m.nrows(),
        });
    }
    if t == 0.0 {
        return Ok(y0.clone());
    }
    let scale0 = y0.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let atol = rtol * scale0.max(1e-300);

    let mut y = y0.clone();
    let mut time = 0.0_f64;
    // Initial step: conservative fraction of the fastest rate in m.
    let rate = one_norm(m).max(1e-300);
    let mut h = (0.1 / rate).min(t);
    let mut k1 = m.dot(&y); // FSAL slot

    let h_min = t * 1e-15;
    while time < t {
        if h < h_min {
            return Err(Error::IntegrationFailure { t: time });
        }
        h = h.min(t - time);

        let mut k = Vec::with_capacity(7);
        k.push(k1.clone());
        for stage in 0..6 {
            let mut arg = y.clone();
            for (j, kj) in k.iter().enumerate() {
                let w = DP_A[stage][j];
                if w != 0.0 {
                    arg.scaled_add(re(h * w), kj);
                }
            }
            k.push(m.dot(&arg));
        }

        let mut y5 = y.clone();
        let mut err = Array1::<C64>::zeros(dim);
        for (j, kj) in k.iter().enumerate() {
            if DP_B5[j] != 0.0 {
                y5.scaled_add(re(h * DP_B5[j]), kj);
            }
            let dw = DP_B5[j] - DP_B4[j];
            if dw != 0.0 {
                err.scaled_add(re(h * dw), kj);
            }
        }

        let mut err_norm = 0.0_f64;
        for i in 0..dim {
            let tol = atol + rtol * y[i].norm().max(y5[i].norm());
            err_norm = err_norm.max(err[i].norm() / tol);
        }

        if err_norm <= 1.0 {
            time += h;
            y = y5;
            k1 = k.pop().expect("seven stages"); // FSAL: k7 = f(y5)
        }
        let factor = if err_norm > 0.0 {
            (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        h *= factor;
    }
    Ok(y)
}

/// Least-squares straight line through (x, y): returns (slope, intercept).
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    (slope, (sy - slope * sx) / n)
}
