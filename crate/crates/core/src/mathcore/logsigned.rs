use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::ops::{Div, Mul, Neg};

/// A real number stored as sign and log-magnitude.
///
/// Zero is `sign == 0` with `log_abs == -inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogSigned {
    pub sign: i8,
    pub log_abs: f64,
}

impl LogSigned {
    pub const ZERO: LogSigned = LogSigned { sign: 0, log_abs: f64::NEG_INFINITY };
    pub const ONE: LogSigned = LogSigned { sign: 1, log_abs: 0.0 };

    pub fn new(sign: i8, log_abs: f64) -> Self {
        if sign == 0 || log_abs == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            LogSigned { sign: sign.signum(), log_abs }
        }
    }

    pub fn from_f64(v: f64) -> Self {
        if v == 0.0 {
            Self::ZERO
        } else {
            LogSigned { sign: if v > 0.0 { 1 } else { -1 }, log_abs: v.abs().ln() }
        }
    }

    /// exp(log_value) with a positive sign.
    pub fn from_log(log_value: f64) -> Self {
        Self::new(1, log_value)
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    pub fn value(&self) -> f64 {
        match self.sign {
            0 => 0.0,
            s => f64::from(s) * self.log_abs.exp(),
        }
    }

    pub fn abs(self) -> Self {
        if self.sign == 0 {
            self
        } else {
            LogSigned { sign: 1, log_abs: self.log_abs }
        }
    }

    pub fn powi(self, k: i32) -> Self {
        if k == 0 {
            return Self::ONE;
        }
        if self.sign == 0 {
            return Self::ZERO;
        }
        let sign = if self.sign < 0 && k % 2 != 0 { -1 } else { 1 };
        LogSigned { sign, log_abs: self.log_abs * f64::from(k) }
    }

    /// Sum using the log-sum-exp trick.
    pub fn add(self, other: Self) -> Self {
        if self.sign == 0 {
            return other;
        }
        if other.sign == 0 {
            return self;
        }
        let (big, small) = if self.log_abs >= other.log_abs { (self, other) } else { (other, self) };
        let r = (small.log_abs - big.log_abs).exp();
        if big.sign == small.sign {
            LogSigned { sign: big.sign, log_abs: big.log_abs + r.ln_1p() }
        } else if r == 1.0 {
            Self::ZERO
        } else {
            LogSigned { sign: big.sign, log_abs: big.log_abs + (-r).ln_1p() }
        }
    }

    pub fn sub(self, other: Self) -> Self {
        self.add(-other)
    }

    pub fn sum<I: IntoIterator<Item = LogSigned>>(items: I) -> Self {
        items.into_iter().fold(Self::ZERO, LogSigned::add)
    }

    /// Compare magnitudes only.
    pub fn cmp_abs(&self, other: &Self) -> Ordering {
        self.log_abs.total_cmp(&other.log_abs)
    }
}

impl Mul for LogSigned {
    type Output = LogSigned;
    fn mul(self, rhs: LogSigned) -> LogSigned {
        if self.sign == 0 || rhs.sign == 0 {
            return Self::ZERO;
        }
        LogSigned { sign: self.sign * rhs.sign, log_abs: self.log_abs + rhs.log_abs }
    }
}

impl Div for LogSigned {
    type Output = LogSigned;
    fn div(self, rhs: LogSigned) -> LogSigned {
        if rhs.sign == 0 {
            return LogSigned { sign: self.sign.max(1), log_abs: f64::INFINITY };
        }
        if self.sign == 0 {
            return Self::ZERO;
        }
        LogSigned { sign: self.sign * rhs.sign, log_abs: self.log_abs - rhs.log_abs }
    }
}

impl Neg for LogSigned {
    type Output = LogSigned;
    fn neg(self) -> LogSigned {
        LogSigned { sign: -self.sign, log_abs: self.log_abs }
    }
}

impl From<f64> for LogSigned {
    fn from(v: f64) -> Self {
        LogSigned::from_f64(v)
    }
}
