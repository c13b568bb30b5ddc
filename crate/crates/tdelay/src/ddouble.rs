//! Double-double accumulator for cancelling sums.

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DoubleDouble {
    hi: f64,
    lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl DoubleDouble {
    pub const ZERO: Self = Self { hi: 0.0, lo: 0.0 };

    pub fn from_f64(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    pub fn add(self, o: Self) -> Self {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = two_sum(s, e + t);
        let (hi, lo) = two_sum(s, e + f);
        Self { hi, lo }
    }

    pub fn add_f64(self, x: f64) -> Self {
        self.add(Self::from_f64(x))
    }

    /// Adds the exact product `a * b`.
    pub fn add_product(self, a: f64, b: f64) -> Self {
        let (p, e) = two_prod(a, b);
        self.add(Self { hi: p, lo: e })
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

/// Running sum with the cancellation ratio `sum |terms| / |sum|`.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: DoubleDouble,
    abs: f64,
}

impl CompensatedSum {
    pub fn push_product(&mut self, a: f64, b: f64) {
        self.sum = self.sum.add_product(a, b);
        self.abs += (a * b).abs();
    }

    pub fn push(&mut self, x: f64) {
        self.sum = self.sum.add_f64(x);
        self.abs += x.abs();
    }

    pub fn value(&self) -> f64 {
        self.sum.to_f64()
    }

    pub fn cancellation(&self) -> f64 {
        let v = self.value().abs();
        if v == 0.0 {
            if self.abs == 0.0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            self.abs / v
        }
    }
}
