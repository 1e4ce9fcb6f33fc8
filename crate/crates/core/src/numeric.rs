//! Small numeric kernels: compensated summation, log-domain helpers and the
//! regularized incomplete gamma function used for chi-square p-values.

use core::f64::consts::{LN_2, LOG2_E};

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if libm::fabs(self.sum) >= libm::fabs(x) {
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

impl core::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// `2^x`, flushing to zero below the subnormal range instead of erroring.
#[inline]
pub fn exp2(x: f64) -> f64 {
    libm::exp2(x)
}

#[inline]
pub fn log2(x: f64) -> f64 {
    libm::log2(x)
}

/// `log2(1 - 2^x)` for `x < 0`, accurate when `2^x` is tiny.
pub fn log2_one_minus_exp2(x: f64) -> f64 {
    debug_assert!(x < 0.0);
    let p = libm::exp2(x);
    if p > 0.5 {
        // 1 - 2^x = -(2^x - 1) = -expm1(x ln 2)
        libm::log2(-libm::expm1(x * LN_2))
    } else {
        libm::log1p(-p) * LOG2_E
    }
}

/// `log^{(k)}(x)`: k-fold iterated natural logarithm. NaN once an argument
/// drops to zero or below.
pub fn iterated_ln(x: f64, k: u32) -> f64 {
    let mut v = x;
    for _ in 0..k {
        if !(v > 0.0) {
            return f64::NAN;
        }
        v = libm::log(v);
    }
    v
}

/// `exp^{(k)}(x)`, saturating at +inf.
pub fn iterated_exp(x: f64, k: u32) -> f64 {
    let mut v = x;
    for _ in 0..k {
        v = libm::exp(v);
        if v.is_infinite() {
            break;
        }
    }
    v
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = core::f64::consts::PI;
        return libm::log(pi / libm::fabs(libm::sin(pi * x))) - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * libm::log(2.0 * core::f64::consts::PI) + (x + 0.5) * libm::log(t) - t + libm::log(a)
}

const GAMMA_MAX_ITER: usize = 1000;
const GAMMA_EPS: f64 = 1e-15;

/// Regularized lower and upper incomplete gamma `(P(a, x), Q(a, x))`.
///
/// Series for `x < a + 1`, Lentz continued fraction otherwise.
pub fn gamma_pq(a: f64, x: f64) -> (f64, f64) {
    assert!(a > 0.0 && x >= 0.0, "gamma_pq domain: a > 0, x >= 0");
    if x == 0.0 {
        return (0.0, 1.0);
    }
    let log_prefactor = -x + a * libm::log(x) - ln_gamma(a);
    if x < a + 1.0 {
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..GAMMA_MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if libm::fabs(term) < libm::fabs(sum) * GAMMA_EPS {
                break;
            }
        }
        let p = libm::exp(log_prefactor) * sum;
        (p, 1.0 - p)
    } else {
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..GAMMA_MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if libm::fabs(d) < tiny {
                d = tiny;
            }
            c = b + an / c;
            if libm::fabs(c) < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if libm::fabs(delta - 1.0) < GAMMA_EPS {
                break;
            }
        }
        let q = libm::exp(log_prefactor) * h;
        (1.0 - q, q)
    }
}

/// Upper-tail probability of a chi-square variable with `df` degrees of freedom.
pub fn chi_square_sf(stat: f64, df: f64) -> f64 {
    if df <= 0.0 {
        return 1.0;
    }
    if stat <= 0.0 {
        return 1.0;
    }
    gamma_pq(df / 2.0, stat / 2.0).1
}

/// `log2(n!)` by direct summation for small n, Stirling-free.
pub fn log2_factorial(n: u64) -> f64 {
    if n < 256 {
        (2..=n).map(|j| libm::log2(j as f64)).collect::<CompensatedSum>().value()
    } else {
        ln_gamma(n as f64 + 1.0) * LOG2_E
    }
}
