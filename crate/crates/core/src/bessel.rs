//! Bessel functions of the first kind, orders 0 and 1, and the positive
//! roots of `J0`.
//!
//! Three regimes are used:
//!
//! * `x < 8`: the ascending power series. The largest term is about 113, so
//!   cancellation costs at most two digits.
//! * `8 <= x < 25`: Miller's backward recurrence normalised with
//!   `J0 + 2 * sum J_2k = 1`.
//! * `x >= 25`: Hankel's asymptotic expansion, summed until the terms stop
//!   decreasing. At `x = 25` the smallest term is far below `1e-16`.

use std::f64::consts::PI;

const SERIES_LIMIT: f64 = 8.0;
const ASYMPTOTIC_LIMIT: f64 = 25.0;

/// `J_order(x)` for `order` in {0, 1} and `x >= 0`.
///
/// # Panics
/// If `order > 1`.
pub fn bessel_j(order: u32, x: f64) -> f64 {
    match order {
        0 => j0(x),
        1 => j1(x),
        _ => panic!("bessel_j: only orders 0 and 1 are supported, got {order}"),
    }
}

pub fn j0(x: f64) -> f64 {
    let x = x.abs();
    if x < SERIES_LIMIT {
        series(0, x)
    } else if x < ASYMPTOTIC_LIMIT {
        miller(x).0
    } else {
        hankel(0, x)
    }
}

pub fn j1(x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax < SERIES_LIMIT {
        series(1, ax)
    } else if ax < ASYMPTOTIC_LIMIT {
        miller(ax).1
    } else {
        hankel(1, ax)
    };
    if x < 0.0 {
        -v
    } else {
        v
    }
}

fn series(order: u32, x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = if order == 0 { 1.0 } else { 0.5 * x };
    let mut sum = term;
    let n = order as f64;
    for k in 1..200 {
        let k = k as f64;
        term *= q / (k * (k + n));
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// Returns `(J0(x), J1(x))`.
fn miller(x: f64) -> (f64, f64) {
    let start = (x + 40.0 + 10.0 * x.sqrt()) as usize;
    let start = start + (start & 1);
    let mut next = 0.0_f64; // J_{k+1}
    let mut cur = 1e-30_f64; // J_k
    let mut norm = 0.0;
    let mut j1 = 0.0;
    let mut k = start;
    while k > 0 {
        let prev = 2.0 * k as f64 / x * cur - next;
        next = cur;
        cur = prev;
        k -= 1;
        if k.is_multiple_of(2) && k > 0 {
            norm += 2.0 * cur;
        }
        if k == 1 {
            j1 = cur;
        }
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
            j1 *= 1e-250;
        }
    }
    norm += cur;
    (cur / norm, j1 / norm)
}

fn hankel(order: u32, x: f64) -> f64 {
    let mu = 4.0 * (order * order) as f64;
    let chi = x - (order as f64 * 0.5 + 0.25) * PI;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0_f64;
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        if term.abs() >= last || term == 0.0 {
            break;
        }
        last = term.abs();
        // k = 1,2,3,4,... contributes to Q(+), P(-), Q(-), P(+), ...
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        if last < 1e-18 {
            break;
        }
    }
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// Ordered positive zeros of `J0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BesselRootTable {
    roots: Vec<f64>,
}

impl BesselRootTable {
    /// First `count` positive roots, located by sign changes on a 0.25 grid
    /// (root spacing exceeds pi) and refined by bisection.
    pub fn new(count: usize) -> Self {
        let mut roots = Vec::with_capacity(count);
        let step = 0.25;
        let mut a = step;
        let mut fa = j0(a);
        while roots.len() < count {
            let b = a + step;
            let fb = j0(b);
            if fa == 0.0 {
                roots.push(a);
            } else if fa.signum() != fb.signum() {
                roots.push(bisect(j0, a, b, fa));
            }
            a = b;
            fa = fb;
        }
        Self { roots }
    }

    pub fn roots(&self) -> &[f64] {
        &self.roots
    }

    /// The `k`-th root, 1-based.
    pub fn root(&self, k: usize) -> f64 {
        self.roots[k - 1]
    }

    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }
}

fn bisect(f: fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    while b - a > 1e-14 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// McMahon's leading-order guess for the k-th zero of J0.
pub fn mcmahon_j0_root(k: usize) -> f64 {
    let beta = (k as f64 - 0.25) * PI;
    beta + 1.0 / (8.0 * beta)
}
