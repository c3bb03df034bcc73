//! Monotone piecewise-cubic Hermite interpolation (Fritsch–Carlson) on a
//! uniform mesh starting at the origin, for even radial profiles.

/// Interpolant through `(i·h, y[i])`, `i = 0..y.len()`. The slope at the
/// origin is zero (even extension); values beyond the last node are zero.
pub(crate) struct MonotoneCubic<'a> {
    h: f64,
    y: &'a [f64],
    slopes: Vec<f64>,
}

impl<'a> MonotoneCubic<'a> {
    pub(crate) fn new(h: f64, y: &'a [f64]) -> Self {
        let n = y.len();
        let secants: Vec<f64> = y.windows(2).map(|w| (w[1] - w[0]) / h).collect();
        let mut slopes = vec![0.0; n];
        for k in 1..n - 1 {
            let (a, b) = (secants[k - 1], secants[k]);
            slopes[k] = if a * b <= 0.0 { 0.0 } else { 0.5 * (a + b) };
        }
        // one-sided three-point estimate at the outer end, clipped to the secant sign
        let last = n - 1;
        let d = 1.5 * secants[last - 1] - 0.5 * secants[last - 2];
        slopes[last] = if d * secants[last - 1] <= 0.0 { 0.0 } else { d };
        for k in 0..n - 1 {
            let delta = secants[k];
            if delta == 0.0 {
                slopes[k] = 0.0;
                slopes[k + 1] = 0.0;
                continue;
            }
            let alpha = slopes[k] / delta;
            let beta = slopes[k + 1] / delta;
            let norm2 = alpha * alpha + beta * beta;
            if norm2 > 9.0 {
                let tau = 3.0 / norm2.sqrt();
                slopes[k] = tau * alpha * delta;
                slopes[k + 1] = tau * beta * delta;
            }
        }
        Self { h, y, slopes }
    }

    pub(crate) fn eval(&self, x: f64) -> f64 {
        let x = x.abs();
        let n = self.y.len();
        let pos = x / self.h;
        if pos > (n - 1) as f64 {
            return 0.0;
        }
        let k = (pos.floor() as usize).min(n - 2);
        let t = pos - k as f64;
        let (y0, y1) = (self.y[k], self.y[k + 1]);
        let (d0, d1) = (self.slopes[k] * self.h, self.slopes[k + 1] * self.h);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * d0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * d1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_nodes() {
        let y: Vec<f64> = (0..50).map(|i| (-(i as f64 * 0.1).powi(2)).exp()).collect();
        let p = MonotoneCubic::new(0.1, &y);
        for (i, &v) in y.iter().enumerate() {
            assert!((p.eval(i as f64 * 0.1) - v).abs() < 1e-15);
        }
        assert_eq!(p.eval(10.0), 0.0);
    }

    #[test]
    fn preserves_monotonicity_of_step_data() {
        let y: Vec<f64> = (0..40).map(|i| if i < 20 { 1.0 } else { 0.0 }).collect();
        let p = MonotoneCubic::new(1.0, &y);
        let mut prev = p.eval(0.0);
        for k in 1..3900 {
            let v = p.eval(k as f64 * 0.01);
            assert!(v <= prev + 1e-15);
            assert!((-1e-15..=1.0 + 1e-15).contains(&v));
            prev = v;
        }
    }

    #[test]
    fn third_order_on_smooth_data() {
        let err = |n: usize| {
            let h = 4.0 / (n - 1) as f64;
            let y: Vec<f64> = (0..n).map(|i| (-(i as f64 * h).powi(2)).exp()).collect();
            let p = MonotoneCubic::new(h, &y);
            (0..1000)
                .map(|k| {
                    let x = 0.3 + 2.5 * k as f64 / 1000.0;
                    (p.eval(x) - (-x * x).exp()).abs()
                })
                .fold(0.0, f64::max)
        };
        let ratio = err(201) / err(401);
        assert!(ratio > 6.0, "ratio {ratio}");
    }
}
