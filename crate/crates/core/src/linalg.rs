//! Dense kernels used by the moment formulas.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

const MAX_POWER_ITERATIONS: usize = 10_000;
const POWER_TOLERANCE: f64 = 1e-12;
const PIVOT_TOLERANCE: f64 = 1e-13;

fn ensure_square(a: &Matrix) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(Error::NonSquare { rows: a.nrows(), cols: a.ncols() });
    }
    Ok(a.nrows())
}

fn ensure_finite(a: &Matrix, what: &str) -> Result<()> {
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Precondition(format!("{what} has non-finite entries")))
    }
}

/// Maximum absolute column sum.
pub fn norm1(a: &Matrix) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Maximum absolute row sum.
pub fn norm_inf(a: &Matrix) -> f64 {
    a.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn ones(n: usize) -> Vector {
    Vector::from_element(n, 1.0)
}

pub fn unit(n: usize, j: usize) -> Vector {
    let mut v = Vector::zeros(n);
    v[j] = 1.0;
    v
}

// (degree, theta_m) from Higham (2005), Table 2.3.
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA_13: f64 = 5.371920351148152e0;

fn pade_coefficients(m: usize) -> &'static [f64] {
    match m {
        3 => &[120.0, 60.0, 12.0, 1.0],
        5 => &[30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0],
        7 => &[17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0],
        9 => &[
            17643225600.0,
            8821612800.0,
            2075673600.0,
            302702400.0,
            30270240.0,
            2162160.0,
            110880.0,
            3960.0,
            90.0,
            1.0,
        ],
        _ => &[
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
        ],
    }
}

fn pade_low(a: &Matrix, m: usize) -> Result<Matrix> {
    let n = a.nrows();
    let b = pade_coefficients(m);
    let a2 = a * a;
    let mut power = Matrix::identity(n, n);
    let mut odd = Matrix::zeros(n, n);
    let mut even = Matrix::zeros(n, n);
    for k in 0..=(m / 2) {
        odd += &power * b[2 * k + 1];
        even += &power * b[2 * k];
        power = &power * &a2;
    }
    let u = a * odd;
    pade_ratio(&u, &even)
}

fn pade_13(a: &Matrix) -> Result<Matrix> {
    let n = a.nrows();
    let b = pade_coefficients(13);
    let id = Matrix::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]);
    let u = a * (inner_u + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1]);
    let inner_v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]);
    let v = inner_v + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
    pade_ratio(&u, &v)
}

fn pade_ratio(u: &Matrix, v: &Matrix) -> Result<Matrix> {
    let p = v + u;
    let q = v - u;
    solve(&q, &p)
}

/// Matrix exponential `e^{a t}` by scaling and squaring with Padé approximants.
pub fn expm(a: &Matrix, t: f64) -> Result<Matrix> {
    let n = ensure_square(a)?;
    let at = a * t;
    ensure_finite(&at, "expm argument")?;
    if n == 0 {
        return Ok(at);
    }
    let nrm = norm1(&at);
    if nrm == 0.0 {
        return Ok(Matrix::identity(n, n));
    }
    for (m, theta) in THETA {
        if nrm <= theta {
            return pade_low(&at, m);
        }
    }
    let s = ((nrm / THETA_13).log2().ceil()).max(0.0) as i32;
    let scaled = at * 2f64.powi(-s);
    let mut r = pade_13(&scaled)?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

struct Factorization {
    lu: Matrix,
    perm: Vec<usize>,
    sign: f64,
    min_pivot: f64,
}

fn factor(a: &Matrix) -> Factorization {
    let n = a.nrows();
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sign = 1.0;
    let mut min_pivot = f64::INFINITY;
    for k in 0..n {
        let mut p = k;
        let mut best = lu[(k, k)].abs();
        for i in (k + 1)..n {
            let v = lu[(i, k)].abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        min_pivot = min_pivot.min(best);
        if p != k {
            lu.swap_rows(p, k);
            perm.swap(p, k);
            sign = -sign;
        }
        let pivot = lu[(k, k)];
        if pivot == 0.0 {
            continue;
        }
        for i in (k + 1)..n {
            let f = lu[(i, k)] / pivot;
            lu[(i, k)] = f;
            if f != 0.0 {
                for j in (k + 1)..n {
                    let v = lu[(k, j)];
                    lu[(i, j)] -= f * v;
                }
            }
        }
    }
    Factorization { lu, perm, sign, min_pivot }
}

fn substitute(f: &Factorization, b: &Matrix) -> Matrix {
    let n = f.lu.nrows();
    let mut x = Matrix::zeros(n, b.ncols());
    for (i, &p) in f.perm.iter().enumerate() {
        x.set_row(i, &b.row(p));
    }
    for c in 0..b.ncols() {
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= f.lu[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for k in (i + 1)..n {
                s -= f.lu[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / f.lu[(i, i)];
        }
    }
    x
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = ensure_square(a)?;
    if b.nrows() != n {
        return Err(Error::Dimension(format!(
            "right-hand side has {} rows, matrix has {}",
            b.nrows(),
            n
        )));
    }
    ensure_finite(a, "system matrix")?;
    ensure_finite(b, "right-hand side")?;
    if n == 0 {
        return Ok(b.clone());
    }
    let scale = a.amax();
    let f = factor(a);
    if scale == 0.0 || f.min_pivot < PIVOT_TOLERANCE * scale {
        return Err(Error::SingularMatrix(format!(
            "pivot {:e} below tolerance relative to scale {:e}",
            f.min_pivot, scale
        )));
    }
    let mut x = substitute(&f, b);
    // one step of iterative refinement
    let r = b - a * &x;
    x += substitute(&f, &r);
    let resid = norm_inf(&(a * &x - b));
    let bnorm = norm_inf(b);
    if resid > 1e-9 * bnorm {
        return Err(Error::SingularMatrix(format!(
            "residual {resid:e} exceeds tolerance for right-hand side norm {bnorm:e}"
        )));
    }
    Ok(x)
}

pub fn solve_vector(a: &Matrix, b: &Vector) -> Result<Vector> {
    let bm = Matrix::from_column_slice(b.len(), 1, b.as_slice());
    let x = solve(a, &bm)?;
    Ok(x.column(0).into_owned())
}

/// Determinant via LU; exact zero pivots give 0.
pub fn det(a: &Matrix) -> Result<f64> {
    let n = ensure_square(a)?;
    ensure_finite(a, "determinant argument")?;
    if n == 0 {
        return Ok(1.0);
    }
    let f = factor(a);
    let d = (0..n).map(|i| f.lu[(i, i)]).product::<f64>();
    Ok(f.sign * d)
}

/// `∫ e^{A_1(t-s_1)} B_1 e^{A_2(s_1-s_2)} B_2 ... e^{A_n s_{n-1}}` over the
/// simplex `t ≥ s_1 ≥ ... ≥ 0`, read off the top-right block of the block
/// upper-bidiagonal exponential.
pub fn van_loan_integral(diagonals: &[Matrix], supers: &[Matrix], t: f64) -> Result<Matrix> {
    if diagonals.len() < 2 || diagonals.len() > 3 {
        return Err(Error::Dimension(format!(
            "expected 2 or 3 diagonal blocks, got {}",
            diagonals.len()
        )));
    }
    if supers.len() + 1 != diagonals.len() {
        return Err(Error::Dimension(format!(
            "{} diagonal blocks need {} coupling blocks, got {}",
            diagonals.len(),
            diagonals.len() - 1,
            supers.len()
        )));
    }
    let n = ensure_square(&diagonals[0])?;
    for m in diagonals.iter().chain(supers.iter()) {
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::Dimension(format!(
                "block of shape {}x{} does not match {n}x{n}",
                m.nrows(),
                m.ncols()
            )));
        }
    }
    let k = diagonals.len();
    let mut big = Matrix::zeros(k * n, k * n);
    for (b, d) in diagonals.iter().enumerate() {
        big.view_mut((b * n, b * n), (n, n)).copy_from(d);
    }
    for (b, s) in supers.iter().enumerate() {
        big.view_mut((b * n, (b + 1) * n), (n, n)).copy_from(s);
    }
    let e = expm(&big, t)?;
    Ok(e.view((0, (k - 1) * n), (n, n)).into_owned())
}

/// The eigenvalue of maximal real part of a matrix with nonnegative
/// off-diagonal entries, by power iteration on a normalized exponential.
pub fn leading_eigenvalue(a: &Matrix) -> Result<f64> {
    let n = ensure_square(a)?;
    ensure_finite(a, "eigenvalue argument")?;
    match n {
        0 => return Err(Error::Dimension("empty matrix has no eigenvalue".into())),
        1 => return Ok(a[(0, 0)]),
        _ => {}
    }
    let shift = (0..n).map(|i| a[(i, i)]).fold(f64::NEG_INFINITY, f64::max);
    let b = a - Matrix::identity(n, n) * shift;
    let c = norm1(&b);
    if c == 0.0 {
        return Ok(shift);
    }
    let mut p = expm(&b, 1.0 / c)?;
    let mut v = Vector::from_element(n, 1.0 / n as f64);
    let mut u = v.clone();
    let mut converged = false;
    for it in 0..MAX_POWER_ITERATIONS {
        let nv = normalize(&p * &v);
        let nu = normalize(p.tr_mul(&u));
        let dv = (&nv - &v).amax() / nv.amax();
        let du = (&nu - &u).amax() / nu.amax();
        v = nv;
        u = nu;
        if dv < POWER_TOLERANCE && du < POWER_TOLERANCE {
            converged = true;
            break;
        }
        if it % 8 == 7 {
            p = &p * &p;
            let s = p.amax();
            if s > 0.0 {
                p /= s;
            }
        }
    }
    if !converged {
        return Err(Error::Convergence(format!(
            "power iteration did not reach relative tolerance {POWER_TOLERANCE:e} in {MAX_POWER_ITERATIONS} iterations"
        )));
    }
    let av = a * &v;
    let den = u.dot(&v);
    if den.abs() > 1e-10 * u.norm() * v.norm() {
        Ok(u.dot(&av) / den)
    } else {
        Ok(v.dot(&av) / v.dot(&v))
    }
}

fn normalize(v: Vector) -> Vector {
    let s: f64 = v.iter().map(|x| x.abs()).sum();
    if s > 0.0 {
        v / s
    } else {
        v
    }
}

/// Spectral radius of a square matrix via norms of repeated squares.
pub fn spectral_radius(a: &Matrix) -> Result<f64> {
    ensure_square(a)?;
    ensure_finite(a, "spectral radius argument")?;
    let mut b = a.clone();
    let mut log_scale = 0.0;
    let mut power = 1.0;
    for _ in 0..60 {
        let s = norm1(&b);
        if s == 0.0 {
            return Ok(0.0);
        }
        b /= s;
        log_scale += s.ln();
        b = &b * &b;
        log_scale *= 2.0;
        power *= 2.0;
    }
    let s = norm1(&b);
    if s == 0.0 {
        return Ok(0.0);
    }
    Ok(((log_scale + s.ln()) / power).exp())
}
