//! Small numeric helpers: compensated summation and scaled complex sums.

use num_complex::Complex64;

/// Neumaier compensated accumulator for `f64`.
///
/// Tracks a running sum plus a correction term so that long sums of mixed
/// magnitude lose far less precision than naive accumulation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Compensated {
    sum: f64,
    comp: f64,
}

impl Compensated {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated accumulator for complex values (independent real/imag parts).
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedC {
    re: Compensated,
    im: Compensated,
}

impl CompensatedC {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    #[inline]
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

/// Compensated sum of an iterator of `f64`.
pub fn sum_f64<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut acc = Compensated::new();
    for x in it {
        acc.add(x);
    }
    acc.value()
}

/// Compensated sum of an iterator of complex values.
pub fn sum_c64<I: IntoIterator<Item = Complex64>>(it: I) -> Complex64 {
    let mut acc = CompensatedC::new();
    for z in it {
        acc.add(z);
    }
    acc.value()
}

/// Sum of terms given as `(log_magnitude, phase)` pairs, returned as a plain
/// complex number scaled by the dominant magnitude to avoid overflow:
/// result = `exp(log_scale) * value`.
pub fn sum_scaled_exp(terms: &[(f64, f64)]) -> (f64, Complex64) {
    let log_scale = terms
        .iter()
        .map(|t| t.0)
        .fold(f64::NEG_INFINITY, f64::max);
    if !log_scale.is_finite() {
        return (0.0, Complex64::new(0.0, 0.0));
    }
    let mut acc = CompensatedC::new();
    for &(lm, ph) in terms {
        acc.add(Complex64::from_polar((lm - log_scale).exp(), ph));
    }
    (log_scale, acc.value())
}

/// Complex log of a sum of two numbers given in log form:
/// returns `log(exp(a) + exp(b))` where `a`, `b` are complex logs.
pub fn log_add_exp(a: Complex64, b: Complex64) -> Complex64 {
    let (big, small) = if a.re >= b.re { (a, b) } else { (b, a) };
    big + (Complex64::new(1.0, 0.0) + (small - big).exp()).ln()
}

/// Complex division that stays finite for denominators whose squared modulus
/// under- or overflows: divides by `|den|` twice instead of by `|den|^2`.
#[inline]
pub fn div_robust(num: Complex64, den: Complex64) -> Complex64 {
    let m = den.norm();
    Complex64::new(num.re / m, num.im / m) * Complex64::new(den.re / m, -den.im / m)
}

/// Relative difference `|a - b| / max(|a|, |b|, floor)`.
pub fn rel_diff_c(a: Complex64, b: Complex64, floor: f64) -> f64 {
    let scale = a.norm().max(b.norm()).max(floor);
    (a - b).norm() / scale
}

/// Relative difference for reals with a magnitude floor.
pub fn rel_diff(a: f64, b: f64, floor: f64) -> f64 {
    let scale = a.abs().max(b.abs()).max(floor);
    (a - b).abs() / scale
}
