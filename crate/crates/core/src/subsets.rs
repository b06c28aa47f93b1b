//! Enumeration and sampling of fixed-size index subsets.
//!
//! [`RevolvingDoor`] walks all `C(n, t)` subsets so that consecutive subsets
//! differ by exactly one swapped element, which lets subset sums be updated
//! with one addition and one subtraction per step. Every exact subset-mean
//! computation in the crate goes through [`subset_means`].

use rand::Rng;

use crate::error::{Error, Result};
use crate::sum::CompensatedSum;

/// Default cap on the number of subsets an exact enumeration may visit.
pub const SUBSET_CAP: u128 = 50_000_000;

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        let num = (n - i) as u128;
        let g = gcd(acc, (i + 1) as u128);
        let (a, d) = (acc / g, (i + 1) as u128 / g);
        let num = num / d;
        acc = match a.checked_mul(num) {
            Some(v) => v,
            None => return u128::MAX,
        };
    }
    acc
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

/// `C(n, k)` as a float, via log-gamma free multiplicative form.
pub fn binomial_f64(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Checks `C(n, k) <= cap` and returns the count.
pub fn check_cap(n: usize, k: usize, cap: u128) -> Result<u128> {
    let count = binomial(n as u64, k as u64);
    if count > cap {
        return Err(Error::CapExceeded {
            required: count,
            cap,
        });
    }
    Ok(count)
}

/// Advances `idx` (strictly increasing, values `< n`) to the next subset in
/// lexicographic order. Returns `false` after the last subset.
pub fn next_lex(idx: &mut [usize], n: usize) -> bool {
    let t = idx.len();
    let mut i = t;
    while i > 0 {
        i -= 1;
        if idx[i] < n - t + i {
            idx[i] += 1;
            for j in i + 1..t {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Revolving-door (minimal change) enumeration of the `t`-subsets of `0..n`.
///
/// Starts at `{0, .., t-1}`; each [`RevolvingDoor::step`] reports the element
/// leaving and the element entering the current subset.
#[derive(Clone, Debug)]
pub struct RevolvingDoor {
    n: usize,
    t: usize,
    // 1-based, c[t + 1] = n
    c: Vec<usize>,
    done: bool,
}

impl RevolvingDoor {
    pub fn new(n: usize, t: usize) -> Self {
        assert!(t >= 1 && t <= n, "need 1 <= t <= n");
        let mut c = vec![0; t + 2];
        for (j, cj) in c.iter_mut().enumerate().take(t + 1).skip(1) {
            *cj = j - 1;
        }
        c[t + 1] = n;
        Self {
            n,
            t,
            c,
            done: false,
        }
    }

    /// Current subset, in no particular order.
    pub fn current(&self) -> &[usize] {
        &self.c[1..=self.t]
    }

    /// Moves to the next subset, returning `(leaving, entering)`.
    pub fn step(&mut self) -> Option<(usize, usize)> {
        if self.done {
            return None;
        }
        let t = self.t;
        if t == self.n {
            self.done = true;
            return None;
        }
        let c = &mut self.c;
        if t == 1 {
            if c[1] + 1 < self.n {
                c[1] += 1;
                return Some((c[1] - 1, c[1]));
            }
            self.done = true;
            return None;
        }

        enum State {
            Decrease,
            Increase,
        }
        let mut j = 2;
        let mut state;
        if t % 2 == 1 {
            if c[1] + 1 < c[2] {
                c[1] += 1;
                return Some((c[1] - 1, c[1]));
            }
            state = State::Decrease;
        } else {
            if c[1] > 0 {
                c[1] -= 1;
                return Some((c[1] + 1, c[1]));
            }
            state = State::Increase;
        }
        loop {
            match state {
                State::Decrease => {
                    // c[j] == c[j - 1] + 1
                    if c[j] >= j {
                        let leaving = c[j];
                        c[j] = c[j - 1];
                        c[j - 1] = j - 2;
                        return Some((leaving, j - 2));
                    }
                    j += 1;
                    state = State::Increase;
                }
                State::Increase => {
                    // c[j - 1] == j - 2
                    if j > t {
                        self.done = true;
                        return None;
                    }
                    if c[j] + 1 < c[j + 1] {
                        let leaving = c[j - 1];
                        c[j - 1] = c[j];
                        c[j] += 1;
                        return Some((leaving, c[j]));
                    }
                    j += 1;
                    if j > t {
                        self.done = true;
                        return None;
                    }
                    state = State::Decrease;
                }
            }
        }
    }
}

/// Calls `f` with the mean of every `m`-subset of `sample`.
///
/// Means are maintained by one compensated add and one subtract per subset.
pub fn for_each_subset_mean(sample: &[f64], m: usize, mut f: impl FnMut(f64)) {
    let n = sample.len();
    assert!(m >= 1 && m <= n, "need 1 <= m <= n");
    let inv_m = 1.0 / m as f64;
    let mut door = RevolvingDoor::new(n, m);
    let mut acc = CompensatedSum::new();
    for &i in door.current() {
        acc.add(sample[i]);
    }
    f(acc.value() * inv_m);
    while let Some((out, inc)) = door.step() {
        acc.add(-sample[out]);
        acc.add(sample[inc]);
        f(acc.value() * inv_m);
    }
}

/// All `C(n, m)` subset means, subject to `cap`.
pub fn subset_means(sample: &[f64], m: usize, cap: u128) -> Result<Vec<f64>> {
    if m == 0 || m > sample.len() {
        return Err(Error::invalid(format!(
            "subset size m={m} must satisfy 1 <= m <= N={}",
            sample.len()
        )));
    }
    let count = check_cap(sample.len(), m, cap)?;
    let mut out = Vec::with_capacity(count as usize);
    for_each_subset_mean(sample, m, |x| out.push(x));
    Ok(out)
}

/// Draws uniformly random `m`-subsets of `0..n` by partial Fisher–Yates,
/// restoring its scratch permutation after every draw.
#[derive(Clone, Debug)]
pub struct SubsetSampler {
    perm: Vec<u32>,
    swaps: Vec<u32>,
    // stamps[i] == epoch marks i as taken in the current draw
    stamps: Vec<u32>,
    epoch: u32,
}

impl SubsetSampler {
    pub fn new(n: usize) -> Self {
        assert!(n <= u32::MAX as usize);
        Self {
            perm: (0..n as u32).collect(),
            swaps: Vec::new(),
            stamps: vec![0; n],
            epoch: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// Writes `m` distinct uniform indices into `out`, in draw order.
    pub fn draw<R: Rng + ?Sized>(&mut self, m: usize, rng: &mut R, out: &mut Vec<u32>) {
        out.clear();
        self.draw_each(m, rng, |j| out.push(j));
    }

    /// Draws `m` distinct uniform indices, passing each to `visit` in draw order.
    ///
    /// Small subsets are drawn by rejection against per-index stamps, larger
    /// ones by a partial Fisher–Yates shuffle that is undone afterwards.
    pub fn draw_each<R: Rng + ?Sized>(&mut self, m: usize, rng: &mut R, mut visit: impl FnMut(u32)) {
        let n = self.perm.len() as u32;
        assert!(m <= n as usize);
        if m * 8 <= n as usize {
            self.epoch = self.epoch.wrapping_add(1);
            if self.epoch == 0 {
                self.stamps.fill(0);
                self.epoch = 1;
            }
            let mut taken = 0;
            while taken < m {
                let j = rng.random_range(0..n);
                let stamp = &mut self.stamps[j as usize];
                if *stamp != self.epoch {
                    *stamp = self.epoch;
                    visit(j);
                    taken += 1;
                }
            }
            return;
        }
        self.swaps.clear();
        for i in 0..m as u32 {
            let j = rng.random_range(i..n);
            self.perm.swap(i as usize, j as usize);
            visit(self.perm[i as usize]);
            self.swaps.push(j);
        }
        for (i, &j) in self.swaps.iter().enumerate().rev() {
            self.perm.swap(i, j as usize);
        }
    }
}
