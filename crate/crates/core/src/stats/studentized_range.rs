//! Distribution of the studentized range, by numerical integration.
//!
//! `P(Q <= q; k, df) = ∫ f_S(s) · P(R_k <= q s) ds`, where `R_k` is the range
//! of `k` standard normals and `S = sqrt(χ²_df / df)`.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use super::quadrature::integrate;

fn phi(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn big_phi(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// CDF of the range of `k` iid standard normals.
pub fn normal_range_cdf(w: f64, k: usize) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    let km1 = (k - 1) as i32;
    let v = k as f64 * integrate(|z| phi(z) * (big_phi(z) - big_phi(z - w)).powi(km1), -8.5, 8.5, 24);
    v.clamp(0.0, 1.0)
}

/// Degrees of freedom beyond which `S` is treated as the constant 1.
const DF_INFINITE: f64 = 1e5;

pub fn ptukey(q: f64, k: usize, df: f64) -> f64 {
    assert!(k >= 2, "studentized range needs at least two groups");
    if q <= 0.0 {
        return 0.0;
    }
    if df >= DF_INFINITE {
        return normal_range_cdf(q, k);
    }
    let chi = ChiSquared::new(df).expect("df > 0");
    let s_lo = (chi.inverse_cdf(1e-12) / df).sqrt();
    let s_hi = (chi.inverse_cdf(1.0 - 1e-12) / df).sqrt();
    let half = df / 2.0;
    let log_norm = half * df.ln() - ln_gamma(half) - (half - 1.0) * std::f64::consts::LN_2;
    let density = |s: f64| {
        if s <= 0.0 {
            0.0
        } else {
            (log_norm + (df - 1.0) * s.ln() - df * s * s / 2.0).exp()
        }
    };
    integrate(|s| density(s) * normal_range_cdf(q * s, k), s_lo, s_hi, 24).clamp(0.0, 1.0)
}

type QuantileCache = Mutex<HashMap<(usize, u64, u64), f64>>;

fn cache() -> &'static QuantileCache {
    static CACHE: OnceLock<QuantileCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Quantile of the studentized range (memoised; each call integrates).
pub fn qtukey(p: f64, k: usize, df: f64) -> f64 {
    assert!((0.0..1.0).contains(&p) && p > 0.0, "probability in (0,1)");
    let key = (k, df.to_bits(), p.to_bits());
    if let Some(&q) = cache().lock().unwrap().get(&key) {
        return q;
    }
    let f = |q: f64| ptukey(q, k, df) - p;
    let (mut a, mut b) = (0.0, 4.0);
    let (mut fa, mut fb) = (-p, f(b));
    while fb < 0.0 {
        a = b;
        fa = fb;
        b *= 2.0;
        fb = f(b);
    }
    // Illinois regula falsi
    let mut side = 0;
    for _ in 0..200 {
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = f(c);
        if fc.abs() < 1e-13 || (b - a).abs() < 1e-10 * c.abs().max(1.0) {
            a = c;
            b = c;
            break;
        }
        if fc * fb > 0.0 {
            b = c;
            fb = fc;
            if side == -1 {
                fa /= 2.0;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb /= 2.0;
            }
            side = 1;
        }
    }
    let q = 0.5 * (a + b);
    cache().lock().unwrap().insert(key, q);
    q
}
