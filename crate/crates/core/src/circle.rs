//! Algebraic circle fitting in the complex plane (Taubin's method).
//!
//! Follows Chernov's Newton-iteration formulation: moments are taken about the
//! centroid, and the smallest root of the characteristic cubic is found by
//! Newton's method starting from zero.

use num_complex::Complex;

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle<T> {
    pub center: Complex<T>,
    pub radius: T,
}

impl<T: Real> Circle<T> {
    pub fn diameter(&self) -> T {
        self.radius + self.radius
    }

    /// Largest `| |z - c| - r |` over the points.
    pub fn max_radial_residual(&self, points: &[Complex<T>]) -> T {
        points
            .iter()
            .map(|z| ((z - self.center).norm() - self.radius).abs())
            .fold(T::zero(), T::max)
    }
}

/// Taubin fit. Returns `None` for fewer than three points or when the points
/// are degenerate (coincident or collinear to working precision).
pub fn fit_circle<T: Real>(points: &[Complex<T>]) -> Option<Circle<T>> {
    if points.len() < 3 {
        return None;
    }
    let n = T::from_count(points.len());
    let centroid = points.iter().fold(Complex::new(T::zero(), T::zero()), |a, b| a + b) / n;

    let (mut mxx, mut myy, mut mxy, mut mxz, mut myz, mut mzz) =
        (T::zero(), T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
    for p in points {
        let x = p.re - centroid.re;
        let y = p.im - centroid.im;
        let z = x * x + y * y;
        mxx += x * x;
        myy += y * y;
        mxy += x * y;
        mxz += x * z;
        myz += y * z;
        mzz += z * z;
    }
    mxx /= n;
    myy /= n;
    mxy /= n;
    mxz /= n;
    myz /= n;
    mzz /= n;

    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let four = T::lit(4.0);
    let mz = mxx + myy;
    let cov_xy = mxx * myy - mxy * mxy;
    let var_z = mzz - mz * mz;
    let a3 = four * mz;
    let a2 = -three * mz * mz - mzz;
    let a1 = var_z * mz + four * cov_xy * mz - mxz * mxz - myz * myz;
    let a0 = mxz * (mxz * myy - myz * mxy) + myz * (myz * mxx - mxz * mxy) - var_z * cov_xy;
    let a22 = a2 + a2;
    let a33 = a3 + a3 + a3;

    let mut x = T::zero();
    let mut y = a0;
    for _ in 0..100 {
        let dy = a1 + x * (a22 + a33 * x);
        let xnew = x - y / dy;
        if xnew == x || !xnew.is_finite() {
            break;
        }
        let ynew = a0 + xnew * (a1 + xnew * (a2 + xnew * a3));
        if ynew.abs() >= y.abs() {
            break;
        }
        x = xnew;
        y = ynew;
    }

    let det = x * x - x * mz + cov_xy;
    let xc = (mxz * (myy - x) - myz * mxy) / det / two;
    let yc = (myz * (mxx - x) - mxz * mxy) / det / two;
    let radius = (xc * xc + yc * yc + mz).sqrt();
    let circle = Circle { center: Complex::new(xc + centroid.re, yc + centroid.im), radius };
    (circle.center.re.is_finite() && circle.center.im.is_finite() && radius.is_finite()).then_some(circle)
}
