//! Small numeric kernels shared across the crate: bracketed bisection,
//! golden-section maximization, the principal Lambert W branch, and
//! monotone (Fritsch–Carlson) cubic interpolation.

use crate::scalar::Scalar;

/// Bisection on a bracketing interval. `f(lo)` and `f(hi)` must have
/// opposite signs (a zero endpoint is returned as-is). Runs until the
/// bracket can no longer shrink in the scalar type, i.e. to machine
/// precision on the argument.
pub fn bisect_root<F: Scalar>(mut lo: F, mut hi: F, f: impl Fn(F) -> F) -> F {
    let mut flo = f(lo);
    if flo == F::zero() {
        return lo;
    }
    let fhi = f(hi);
    if fhi == F::zero() {
        return hi;
    }
    debug_assert!(
        (flo < F::zero()) != (fhi < F::zero()),
        "bisect_root: no sign change over the bracket"
    );
    let half = F::from_f64_lossy(0.5);
    for _ in 0..2048 {
        let mid = (lo + hi) * half;
        if mid == lo || mid == hi {
            return mid;
        }
        let fm = f(mid);
        if fm == F::zero() {
            return mid;
        }
        if (fm < F::zero()) == (flo < F::zero()) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    (lo + hi) * half
}

/// Golden-section search for a maximum of a unimodal function on `[a, b]`.
/// Returns the located argument and value.
pub fn golden_max<F: Scalar>(mut a: F, mut b: F, f: impl Fn(F) -> F, iters: usize) -> (F, F) {
    let inv_phi = F::from_f64_lossy(0.618_033_988_749_894_8);
    let mut c = b - (b - a) * inv_phi;
    let mut d = a + (b - a) * inv_phi;
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * inv_phi;
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * inv_phi;
            fd = f(d);
        }
        if b - a <= (a.abs() + b.abs()) * F::epsilon() {
            break;
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Principal branch `W0` of the Lambert W function for `z >= -1/e`.
///
/// Seeds with the branch-point series (near `-1/e`) or a log-based guess,
/// then polishes with Halley iterations to machine residual.
pub fn lambert_w0<F: Scalar>(z: F) -> F {
    let one = F::one();
    let two = F::from_f64_lossy(2.0);
    let e = F::from_f64_lossy(core::f64::consts::E);
    let neg_inv_e = -one / e;
    if z <= neg_inv_e {
        // At (or a rounding error below) the branch point.
        return -one;
    }
    if z == F::zero() {
        return F::zero();
    }

    let mut w = if z < F::from_f64_lossy(-0.25) {
        // Series around the branch point in p = sqrt(2 (1 + e z)).
        let p = (two * (one + e * z)).sqrt();
        let p2 = p * p;
        -one + p - p2 / F::from_f64_lossy(3.0)
            + F::from_f64_lossy(11.0 / 72.0) * p2 * p
    } else if z < e {
        // W0(z) ~ z for small |z|; good enough as a Halley seed here.
        z / (one + z)
    } else {
        let l = z.ln();
        l - l.ln()
    };

    for _ in 0..50 {
        let ew = w.exp();
        let f = w * ew - z;
        let w1 = w + one;
        if w1 == F::zero() {
            break;
        }
        let denom = ew * w1 - (w + two) * f / (two * w1);
        if denom == F::zero() {
            break;
        }
        let step = f / denom;
        w = w - step;
        if step.abs() <= F::epsilon() * (one + w.abs()) {
            break;
        }
    }
    w
}

/// Monotone piecewise-cubic interpolant (Fritsch–Carlson slopes).
///
/// Built from strictly increasing abscissae; preserves monotone data.
#[derive(Debug, Clone)]
pub struct MonotoneCubic<F> {
    xs: Vec<F>,
    ys: Vec<F>,
    slopes: Vec<F>,
}

impl<F: Scalar> MonotoneCubic<F> {
    pub fn new(xs: Vec<F>, ys: Vec<F>) -> Result<Self, &'static str> {
        if xs.len() != ys.len() {
            return Err("abscissae and ordinates must have equal length");
        }
        if xs.len() < 2 {
            return Err("need at least two knots");
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err("abscissae must be strictly increasing");
        }
        let n = xs.len();
        let h: Vec<F> = (0..n - 1).map(|i| xs[i + 1] - xs[i]).collect();
        let delta: Vec<F> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();

        let mut slopes = vec![F::zero(); n];
        slopes[0] = delta[0];
        slopes[n - 1] = delta[n - 2];
        let two = F::from_f64_lossy(2.0);
        for i in 1..n - 1 {
            if delta[i - 1] * delta[i] <= F::zero() {
                slopes[i] = F::zero();
            } else {
                let w1 = two * h[i] + h[i - 1];
                let w2 = h[i] + two * h[i - 1];
                slopes[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
            }
        }
        Ok(Self { xs, ys, slopes })
    }

    pub fn x_range(&self) -> (F, F) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    /// Hermite evaluation; clamps the argument to the knot range.
    pub fn eval(&self, x: F) -> F {
        let n = self.xs.len();
        let x = x.max(self.xs[0]).min(self.xs[n - 1]);
        let i = match self.xs.iter().rposition(|&k| k <= x) {
            Some(i) if i >= n - 1 => n - 2,
            Some(i) => i,
            None => 0,
        };
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let one = F::one();
        let two = F::from_f64_lossy(2.0);
        let three = F::from_f64_lossy(3.0);
        let h00 = two * t3 - three * t2 + one;
        let h10 = t3 - two * t2 + t;
        let h01 = -two * t3 + three * t2;
        let h11 = t3 - t2;
        h00 * self.ys[i] + h10 * h * self.slopes[i] + h01 * self.ys[i + 1] + h11 * h * self.slopes[i + 1]
    }
}
