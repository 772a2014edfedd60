//! Small dense complex helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub fn frob_norm(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Real inner product `Re tr(A^H B)`.
pub fn real_inner(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

/// `‖A^H A − I‖_F`.
pub fn gram_residual(a: &CMat) -> f64 {
    let mut g = a.adjoint() * a;
    for i in 0..g.nrows() {
        g[(i, i)] -= C64::new(1.0, 0.0);
    }
    frob_norm(&g)
}

/// Polar factor `U = A (A^H A)^{-1/2}` via the thin SVD `A = W S V^H`, `U = W V^H`.
///
/// Fails when the smallest singular value is negligible relative to the largest.
pub fn polar_factor(a: &CMat, block: usize) -> Result<CMat> {
    if a.nrows() < a.ncols() || a.ncols() == 0 {
        return Err(Error::Shape("polar factor needs a tall or square block"));
    }
    if a.ncols() == 1 {
        let n = a.column(0).norm();
        if !(n > f64::MIN_POSITIVE) || !n.is_finite() {
            return Err(Error::RankDeficient { block });
        }
        return Ok(a.unscale(n));
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax.is_finite()) || smin <= smax * 1e-13 || smax == 0.0 {
        return Err(Error::RankDeficient { block });
    }
    let (Some(w), Some(v_t)) = (svd.u, svd.v_t) else {
        return Err(Error::Numerical("svd did not return singular vectors"));
    };
    let u = w * v_t;
    // One Newton–Schulz sweep tightens orthonormality to round-off.
    Ok(newton_schulz(&u))
}

fn newton_schulz(u: &CMat) -> CMat {
    let n = u.ncols();
    let g = u.adjoint() * u;
    let mut t = CMat::identity(n, n) * C64::new(1.5, 0.0);
    t -= g * C64::new(0.5, 0.0);
    u * t
}

/// Orthonormalizes the columns of a tall matrix (modified Gram–Schmidt, applied twice).
pub fn orthonormalize_columns(a: &CMat) -> Result<CMat> {
    let mut q = a.clone();
    for _ in 0..2 {
        for j in 0..q.ncols() {
            for i in 0..j {
                let proj: C64 = q.column(i).dotc(&q.column(j));
                let qi = q.column(i).clone_owned();
                q.column_mut(j).axpy(-proj, &qi, C64::new(1.0, 0.0));
            }
            let n = q.column(j).norm();
            if !(n > 1e-300) {
                return Err(Error::RankDeficient { block: 0 });
            }
            q.column_mut(j).unscale_mut(n);
        }
    }
    Ok(q)
}

/// Cayley transform applied to `x`: `(I − s A)^{-1} (I + s A) x`.
pub fn cayley_apply(a: &CMat, s: f64, x: &CMat) -> Result<CMat> {
    let n = a.nrows();
    let sa = a * C64::new(s, 0.0);
    let lhs = CMat::identity(n, n) - &sa;
    let rhs = x + &sa * x;
    lhs.lu().solve(&rhs).ok_or(Error::Numerical("singular Cayley system"))
}
