//! Clebsch-Gordan coefficients for coupling two copies of spin `j` to rank `k`,
//! and the spherical tensor operators built from them.
//!
//! The production path runs the Schulten-Gordon three-term recursion in the
//! coupled rank for every pair `(m1, m2)`, from both ends of the allowed range,
//! and joins the two sweeps where the coefficients are largest. Each column is
//! normalized with the completeness relation `sum_k <j m1 j m2|k q>^2 = 1` and its
//! sign fixed by the stretched coefficient `<j m1 j m2|2j q> > 0`.
//!
//! [`clebsch_gordan_exact`] evaluates the Racah sum in exact rational
//! arithmetic and is the reference the recursion is checked against.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Angular momenta are passed as twice their value so half-integers are exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TwiceSpin(pub i64);

fn factorials(n: usize) -> Vec<BigInt> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(BigInt::one());
    for i in 1..=n {
        let next = &out[i - 1] * BigInt::from(i);
        out.push(next);
    }
    out
}

/// `<j1 m1; j2 m2 | J M>` from the Racah formula in exact rational arithmetic.
///
/// All six arguments are twice the physical value. Returns zero when the
/// selection rules are violated.
pub fn clebsch_gordan_exact(
    j1: TwiceSpin,
    m1: TwiceSpin,
    j2: TwiceSpin,
    m2: TwiceSpin,
    jj: TwiceSpin,
    mm: TwiceSpin,
) -> f64 {
    let (j1, m1, j2, m2, jj, mm) = (j1.0, m1.0, j2.0, m2.0, jj.0, mm.0);
    if m1 + m2 != mm
        || m1.abs() > j1
        || m2.abs() > j2
        || mm.abs() > jj
        || jj < (j1 - j2).abs()
        || jj > j1 + j2
        || (j1 + j2 + jj) % 2 != 0
        || (j1 + m1) % 2 != 0
        || (j2 + m2) % 2 != 0
        || (jj + mm) % 2 != 0
    {
        return 0.0;
    }
    // integer combinations (each is half of an even twice-value)
    let h = |x: i64| -> i64 { x / 2 };
    let a = h(jj + j1 - j2);
    let b = h(jj - j1 + j2);
    let c = h(j1 + j2 - jj);
    let d = h(j1 + j2 + jj) + 1;
    let fact = factorials((d + 1) as usize);
    let f = |x: i64| -> &BigInt { &fact[x as usize] };

    let prefactor_num: BigInt = BigInt::from(jj + 1)
        * f(a)
        * f(b)
        * f(c)
        * f(h(jj + mm))
        * f(h(jj - mm))
        * f(h(j1 - m1))
        * f(h(j1 + m1))
        * f(h(j2 - m2))
        * f(h(j2 + m2));
    let prefactor = BigRational::new(prefactor_num, f(d).clone());

    let e1 = h(j1 + j2 - jj);
    let e2 = h(j1 - m1);
    let e3 = h(j2 + m2);
    let e4 = h(jj - j2 + m1);
    let e5 = h(jj - j1 - m2);
    let z_min = 0.max(-e4).max(-e5);
    let z_max = e1.min(e2).min(e3);
    let mut sum = BigRational::zero();
    for z in z_min..=z_max {
        let denom = f(z) * f(e1 - z) * f(e2 - z) * f(e3 - z) * f(e4 + z) * f(e5 + z);
        let term = BigRational::new(BigInt::one(), denom);
        if z % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    if sum.is_zero() {
        return 0.0;
    }
    let squared = &prefactor * &sum * &sum;
    let magnitude = squared.to_f64().unwrap_or(f64::NAN).sqrt();
    if sum.is_negative() {
        -magnitude
    } else {
        magnitude
    }
}

/// Clebsch-Gordan table for `j (x) j -> k`, `j = N/2`.
///
/// Entry `(a, b, k)` stores `<j m_a; j m_b | k, m_a + m_b>` with `m_a = a - j`.
#[derive(Debug, Clone)]
pub struct CouplingTable {
    n_particles: usize,
    /// `values[a * dim + b]` holds coefficients for `k = |q| ..= 2j`.
    values: Vec<Vec<f64>>,
}

impl CouplingTable {
    pub fn new(n_particles: usize) -> Self {
        let dim = n_particles + 1;
        let mut values = Vec::with_capacity(dim * dim);
        for a in 0..dim {
            for b in 0..dim {
                values.push(coupled_column(n_particles as i64, a as i64, b as i64));
            }
        }
        Self {
            n_particles,
            values,
        }
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    /// `<j m_a; j m_b | k, m_a + m_b>` for basis indices `a`, `b`.
    pub fn get(&self, a: usize, b: usize, k: usize) -> f64 {
        let dim = self.n_particles + 1;
        let q = (a + b) as i64 - self.n_particles as i64;
        let k_min = q.unsigned_abs() as usize;
        if k < k_min || k > self.n_particles {
            return 0.0;
        }
        self.values[a * dim + b][k - k_min]
    }

    /// Matrix element `<m_a| T_kq |m_b>` with `q = m_a - m_b`:
    /// `(-1)^(j - m_b) <j m_a; j -m_b | k q>`.
    pub fn tensor_element(&self, a: usize, b: usize, k: usize) -> f64 {
        let n = self.n_particles;
        // j - m_b = n - b; -m_b has index n - b
        let sign = if (n - b) % 2 == 0 { 1.0 } else { -1.0 };
        sign * self.get(a, n - b, k)
    }
}

/// All coefficients `<j m1; j m2 | k q>` for `k = |q| ..= 2j`, from basis
/// indices `a = j + m1`, `b = j + m2`. Spins are handled as twice-values
/// (`n = 2j`), so every quantity below stays integral until the square roots.
fn coupled_column(n: i64, a: i64, b: i64) -> Vec<f64> {
    // twice-values of m1, m2, q
    let m1x2 = 2 * a - n;
    let m2x2 = 2 * b - n;
    let qx2 = m1x2 + m2x2;
    let q = qx2 / 2;
    let k_min = q.abs();
    let k_max = n;
    let len = (k_max - k_min + 1) as usize;
    if len == 1 {
        return vec![1.0];
    }

    // Recursion for f(k) = (k j j; -q m1 m2):
    //   k A(k+1) f(k+1) + B(k) f(k) + (k+1) A(k) f(k-1) = 0
    //   A(k) = sqrt(k^2 ((2j+1)^2 - k^2) (k^2 - q^2))
    //   B(k) = (2k+1) k (k+1) (m2 - m1)
    let two_j_plus_one = (n + 1) as f64;
    let dm = (m2x2 - m1x2) as f64 / 2.0;
    let qf = q as f64;
    let a_coef = |k: f64| -> f64 {
        (k * k * (two_j_plus_one * two_j_plus_one - k * k) * (k * k - qf * qf))
            .max(0.0)
            .sqrt()
    };
    let b_coef = |k: f64| -> f64 { (2.0 * k + 1.0) * k * (k + 1.0) * dm };

    // downward sweep from the stretched end
    let mut down = vec![0.0; len];
    down[len - 1] = 1.0;
    for idx in (1..len).rev() {
        let k = (k_min + idx as i64) as f64;
        let upper = if idx + 1 < len { down[idx + 1] } else { 0.0 };
        let value = -(k * a_coef(k + 1.0) * upper + b_coef(k) * down[idx])
            / ((k + 1.0) * a_coef(k));
        down[idx - 1] = value;
        rescale_if_large(&mut down[idx - 1..]);
    }

    // upward sweep from the lowest rank
    let mut up = vec![0.0; len];
    up[0] = 1.0;
    if k_min == 0 {
        // f(1)/f(0) from the closed forms of <j m; j -m|0 0> and <j m; j -m|1 0>:
        // c(1)/c(0) = m1 sqrt(3 (2j+1)) / sqrt(j(j+1)(2j+1)) and c = sqrt(2k+1) f
        let j = n as f64 / 2.0;
        let m1 = m1x2 as f64 / 2.0;
        let ratio_c = m1 * 3f64.sqrt() / (j * (j + 1.0)).sqrt();
        up[1] = ratio_c / 3f64.sqrt();
        for idx in 1..len - 1 {
            let k = idx as f64;
            up[idx + 1] = -(b_coef(k) * up[idx] + (k + 1.0) * a_coef(k) * up[idx - 1])
                / (k * a_coef(k + 1.0));
            rescale_if_large(&mut up[..=idx + 1]);
        }
    } else {
        for idx in 0..len - 1 {
            let k = (k_min + idx as i64) as f64;
            let lower = if idx > 0 { up[idx - 1] } else { 0.0 };
            up[idx + 1] = -(b_coef(k) * up[idx] + (k + 1.0) * a_coef(k) * lower)
                / (k * a_coef(k + 1.0));
            rescale_if_large(&mut up[..=idx + 1]);
        }
    }

    // Join at the rank where the downward sweep peaks: both sweeps are
    // accurate across the oscillatory middle and each degrades only in the
    // region it enters by decay.
    let join = peak_index(&up, &down);
    let scale = if up[join] != 0.0 { down[join] / up[join] } else { 0.0 };
    let mut f: Vec<f64> = (0..len)
        .map(|idx| if idx < join { up[idx] * scale } else { down[idx] })
        .collect();

    for (idx, value) in f.iter_mut().enumerate() {
        let k = (k_min + idx as i64) as f64;
        *value *= (2.0 * k + 1.0).sqrt();
    }
    let norm = f.iter().map(|x| x * x).sum::<f64>().sqrt();
    let sign = if f[len - 1] < 0.0 { -1.0 } else { 1.0 };
    f.iter_mut().for_each(|x| *x *= sign / norm);
    f
}

fn rescale_if_large(values: &mut [f64]) {
    let max = values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if max > 1e150 {
        values.iter_mut().for_each(|v| *v /= max);
    }
}

/// Index where the two sweeps are jointly trustworthy: the largest entry of the
/// downward sweep among ranks where the upward sweep is also non-negligible.
fn peak_index(up: &[f64], down: &[f64]) -> usize {
    let up_max = up.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let down_max = down.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let mut best = down.len() - 1;
    let mut best_value = -1.0;
    for idx in 0..down.len() {
        let score = (down[idx].abs() / down_max).min(up[idx].abs() / up_max);
        if score > best_value {
            best_value = score;
            best = idx;
        }
    }
    best
}
