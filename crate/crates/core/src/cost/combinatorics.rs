//! Log-domain combinatorics for the cost criterion. All logs are natural.

use std::sync::{Arc, OnceLock, RwLock};

use rustc_hash::FxHashMap;

use crate::error::{Error, Result};

/// Below this, log n! is the running sum of logs; above it, the Stirling series.
const EXACT_LIMIT: usize = 1024;

fn exact_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(EXACT_LIMIT);
        let mut acc = 0.0f64;
        t.push(0.0);
        for i in 1..EXACT_LIMIT {
            acc += (i as f64).ln();
            t.push(acc);
        }
        t
    })
}

/// Stirling-series remainder of ln Γ(z), accurate to ~1e-20 for z >= 64.
fn stirling_tail(z: f64) -> f64 {
    let z2 = z * z;
    (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - 1.0 / (1680.0 * z2)) / z2) / z2) / z
}

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// ln Γ(x) for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x < 64.0 {
        // shift up so the series converges, then divide back down
        let mut shift = 0.0;
        let mut z = x;
        while z < 64.0 {
            shift += z.ln();
            z += 1.0;
        }
        return ln_gamma(z) - shift;
    }
    (x - 0.5) * x.ln() - x + HALF_LN_2PI + stirling_tail(x)
}

/// ln Γ(x + n) − ln Γ(x), without cancellation when x ≫ n.
pub fn ln_gamma_shift(x: f64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    if x < 64.0 {
        return ln_gamma(x + nf) - ln_gamma(x);
    }
    (x - 0.5) * (nf / x).ln_1p() + nf * (x + nf).ln() - nf + stirling_tail(x + nf) - stirling_tail(x)
}

/// log n!
pub fn log_factorial(n: u64) -> f64 {
    if (n as usize) < EXACT_LIMIT {
        exact_table()[n as usize]
    } else {
        ln_gamma(n as f64 + 1.0)
    }
}

/// log C(n, k).
pub fn log_binomial(n: u64, k: u64) -> Result<f64> {
    if k > n {
        return Err(Error::InvalidArgument(format!("binomial({n}, {k}) with k > n")));
    }
    Ok(log_factorial(n) - log_factorial(k) - log_factorial(n - k))
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `out[j] = log B(v, j)` for `j in 1..=jmax` (entry 0 is unused), where
/// B(v, j) = Σ_{i<=j} S(v, i) counts the partitions of v values into at most
/// j groups. Stirling numbers follow S(n, j) = j S(n-1, j) + S(n-1, j-1).
fn log_b_prefix(v: u64, jmax: usize) -> Vec<f64> {
    let jmax = jmax.min(v as usize).max(1);
    let mut row = vec![f64::NEG_INFINITY; jmax + 1];
    row[0] = 0.0; // S(0, 0) = 1
    for n in 1..=v as usize {
        let top = n.min(jmax);
        for j in (1..=top).rev() {
            row[j] = log_add((j as f64).ln() + row[j], row[j - 1]);
        }
        row[0] = f64::NEG_INFINITY;
    }
    let mut out = vec![f64::NEG_INFINITY; jmax + 1];
    let mut acc = f64::NEG_INFINITY;
    for j in 1..=jmax {
        acc = log_add(acc, row[j]);
        out[j] = acc;
    }
    out[1] = 0.0;
    out
}

/// log B(v, j); j is clamped to [1, v].
pub fn log_b(v: u64, j: u64) -> f64 {
    let j = j.clamp(1, v.max(1));
    log_b_prefix(v, j as usize)[j as usize]
}

/// Pre-sized log-factorial table plus a shared cache of log B rows.
#[derive(Debug)]
pub struct Combinatorics {
    log_fact: Vec<f64>,
    log_b_rows: RwLock<FxHashMap<u64, Arc<Vec<f64>>>>,
}

impl Combinatorics {
    pub fn with_capacity(n: usize) -> Self {
        let n = n.max(EXACT_LIMIT);
        let exact = exact_table();
        let log_fact = (0..n)
            .map(|i| {
                if i < EXACT_LIMIT {
                    exact[i]
                } else {
                    ln_gamma(i as f64 + 1.0)
                }
            })
            .collect();
        Combinatorics {
            log_fact,
            log_b_rows: RwLock::new(FxHashMap::default()),
        }
    }

    #[inline]
    pub fn log_factorial(&self, n: u64) -> f64 {
        match self.log_fact.get(n as usize) {
            Some(&v) => v,
            None => log_factorial(n),
        }
    }

    #[inline]
    pub fn log_binomial(&self, n: u64, k: u64) -> f64 {
        debug_assert!(k <= n);
        self.log_factorial(n) - self.log_factorial(k) - self.log_factorial(n - k)
    }

    /// log C(n + g - 1, g - 1): the prior on distributing n points over g cells.
    pub fn log_cell_prior(&self, n: u64, g: f64) -> f64 {
        debug_assert!(g >= 1.0);
        let top = g - 1.0 + n as f64;
        if top < self.log_fact.len() as f64 {
            let g1 = g as u64 - 1;
            return self.log_factorial(g1 + n) - self.log_factorial(g1) - self.log_factorial(n);
        }
        ln_gamma_shift(g, n) - self.log_factorial(n)
    }

    /// log C(total + m - 1, m - 1): the prior on distributing a group's
    /// points over its m values.
    #[inline]
    pub fn log_group_prior(&self, total: u64, m: u64) -> f64 {
        if m == 0 {
            return 0.0;
        }
        self.log_binomial(total + m - 1, m - 1)
    }

    /// log B(v, j), cached per v; j is clamped to [1, v].
    pub fn log_b(&self, v: u64, j: u64) -> f64 {
        let j = j.clamp(1, v.max(1));
        if let Some(row) = self.log_b_rows.read().expect("poisoned").get(&v) {
            if let Some(&x) = row.get(j as usize) {
                return x;
            }
        }
        let mut rows = self.log_b_rows.write().expect("poisoned");
        let have = rows.get(&v).map(|r| r.len() - 1).unwrap_or(0);
        if have < j as usize {
            let want = (j as usize).max(have * 2).min(v as usize);
            rows.insert(v, Arc::new(log_b_prefix(v, want)));
        }
        rows[&v][j as usize]
    }
}
