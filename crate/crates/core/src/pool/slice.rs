//! Univariate slice sampling with stepping out and shrinkage.

use rand::Rng as _;

use crate::num::Real;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy)]
pub struct SliceSampler<T> {
    pub width: T,
    pub max_steps: usize,
    /// Hard support bounds; the target is treated as −∞ outside.
    pub lower: T,
    pub upper: T,
}

impl<T: Real> Default for SliceSampler<T> {
    fn default() -> Self {
        Self { width: T::one(), max_steps: 64, lower: T::lit(-50.0), upper: T::lit(50.0) }
    }
}

impl<T: Real> SliceSampler<T> {
    /// One transition from `x` for the unnormalized log density `log_f`.
    pub fn step<F: FnMut(T) -> T>(&self, x: T, mut log_f: F, rng: &mut Rng) -> T {
        let mut eval = |v: T| if v <= self.lower || v >= self.upper { T::neg_infinity() } else { log_f(v) };
        let unif = |rng: &mut Rng| T::lit(rng.random::<f64>());
        let fx = eval(x);
        let level = fx + (T::one() - unif(rng)).ln();

        let mut left = x - self.width * unif(rng);
        let mut right = left + self.width;
        let mut j = rng.random_range(0..self.max_steps);
        let mut k = self.max_steps - 1 - j;
        while j > 0 && eval(left) > level {
            left = left - self.width;
            j -= 1;
        }
        while k > 0 && eval(right) > level {
            right = right + self.width;
            k -= 1;
        }
        loop {
            let cand = left + unif(rng) * (right - left);
            if eval(cand) > level {
                return cand;
            }
            if cand < x {
                left = cand;
            } else {
                right = cand;
            }
            if right - left <= T::epsilon() * (T::one() + x.abs()) {
                return x;
            }
        }
    }
}
