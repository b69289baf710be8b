use std::sync::OnceLock;

const TABLE_LEN: usize = 256;

fn ln_factorial_table() -> &'static [f64; TABLE_LEN] {
    static TABLE: OnceLock<[f64; TABLE_LEN]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [0.0; TABLE_LEN];
        for k in 1..TABLE_LEN {
            t[k] = t[k - 1] + (k as f64).ln();
        }
        t
    })
}

/// `ln(n!) - (n ln n - n + ln(2 pi n) / 2)`, the Stirling remainder.
fn stirling_remainder(n: f64) -> f64 {
    let inv = 1.0 / n;
    let inv2 = inv * inv;
    inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)))
}

/// `ln(n!)`, i.e. log-gamma at `n + 1`.
pub fn ln_factorial(n: u64) -> f64 {
    if (n as usize) < TABLE_LEN {
        return ln_factorial_table()[n as usize];
    }
    let x = n as f64;
    x * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI * x).ln() + stirling_remainder(x)
}

/// `ln(n^n e^-n / n!)`: the log of the largest value a Poisson pmf can take
/// at count `n`, reached when the mean equals `n`. `0^0 = 1`.
pub fn ln_poisson_peak(n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    if (n as usize) < TABLE_LEN {
        let x = n as f64;
        return x * x.ln() - ln_factorial_table()[n as usize] - x;
    }
    let x = n as f64;
    -0.5 * (2.0 * std::f64::consts::PI * x).ln() - stirling_remainder(x)
}

/// `ln Poisson(k; mean)`; `-inf` for impossible counts.
pub fn ln_poisson_pmf(k: u64, mean: f64) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    k as f64 * mean.ln() - mean - ln_factorial(k)
}

/// Upper bound on `p(n_S, n_I)` for any photocount distribution generated by
/// a classical field:
/// `(n_S^n_S / n_S!) e^-n_S * (n_I^n_I / n_I!) e^-n_I`.
pub fn classicality_bound(n_s: u64, n_i: u64) -> f64 {
    (ln_poisson_peak(n_s) + ln_poisson_peak(n_i)).exp()
}
