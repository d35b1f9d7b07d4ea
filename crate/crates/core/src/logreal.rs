//! Nonnegative reals stored by their natural logarithm.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct LogReal {
    /// Natural log of the value; `-inf` encodes zero.
    pub ln: f64,
}

impl LogReal {
    pub const ZERO: LogReal = LogReal { ln: f64::NEG_INFINITY };
    pub const ONE: LogReal = LogReal { ln: 0.0 };

    pub fn from_ln(ln: f64) -> Self {
        LogReal { ln }
    }

    pub fn new(x: f64) -> Self {
        assert!(x >= 0.0, "LogReal requires a nonnegative value");
        LogReal { ln: x.ln() }
    }

    /// The value as `f64`; `inf` when it is not representable.
    pub fn value(self) -> f64 {
        self.ln.exp()
    }

    pub fn is_representable(self) -> bool {
        self.ln < f64::MAX.ln()
    }

    pub fn mul(self, o: LogReal) -> Self {
        LogReal { ln: self.ln + o.ln }
    }

    pub fn div(self, o: LogReal) -> Self {
        LogReal { ln: self.ln - o.ln }
    }

    pub fn powf(self, p: f64) -> Self {
        if self.ln == f64::NEG_INFINITY {
            return if p == 0.0 { LogReal::ONE } else { LogReal::ZERO };
        }
        LogReal { ln: self.ln * p }
    }

    pub fn add(self, o: LogReal) -> Self {
        let (a, b) = if self.ln >= o.ln { (self.ln, o.ln) } else { (o.ln, self.ln) };
        if a == f64::NEG_INFINITY {
            return LogReal::ZERO;
        }
        LogReal { ln: a + (b - a).exp().ln_1p() }
    }
}

/// `ln(n!)` via the log-gamma function; exact summation for small `n`.
pub fn ln_factorial(n: u64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    if n <= 170 {
        return (2..=n).map(|k| (k as f64).ln()).sum();
    }
    libm::lgamma(n as f64 + 1.0)
}

/// `ln(n!!)` with `0!! = (-1)!! = 1`; log-space product beyond n = 150.
pub fn ln_double_factorial(n: u64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    if n <= 150 {
        let mut s = 0.0;
        let mut k = n;
        while k > 1 {
            s += (k as f64).ln();
            k -= 2;
        }
        return s;
    }
    // n!! = 2^{n/2} (n/2)!  (n even),  n!! = n! / (2^{(n-1)/2} ((n-1)/2)!)  (n odd)
    if n % 2 == 0 {
        let h = n / 2;
        h as f64 * std::f64::consts::LN_2 + libm::lgamma(h as f64 + 1.0)
    } else {
        let h = (n - 1) / 2;
        libm::lgamma(n as f64 + 1.0) - h as f64 * std::f64::consts::LN_2 - libm::lgamma(h as f64 + 1.0)
    }
}
