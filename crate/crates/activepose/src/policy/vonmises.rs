//! Von Mises circular distribution: density, log-density, Best-Fisher
//! sampling and the truncated-support normalizer used for elevation angles.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Zeroth-order modified Bessel function of the first kind, by power
/// series. Relative accuracy well below 1e-10 for the m range used here.
pub fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..500 {
        let f = half / k as f64;
        term *= f * f;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Von Mises density on [-pi, pi].
pub fn von_mises_density(theta: f64, mean: f64, m: f64) -> f64 {
    (m * (theta - mean).cos()).exp() / (2.0 * PI * bessel_i0(m))
}

pub fn von_mises_log_density(theta: f64, mean: f64, m: f64) -> f64 {
    m * (theta - mean).cos() - (2.0 * PI * bessel_i0(m)).ln()
}

fn legendre_nodes(n: usize) -> Vec<(f64, f64)> {
    // Newton iteration on P_n; standard Golub-Welsch-free construction.
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0f64, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0f64, x);
        for k in 2..=n {
            let kf = k as f64;
            let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

fn gl32() -> &'static [(f64, f64)] {
    static NODES: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    NODES.get_or_init(|| legendre_nodes(32))
}

/// Panelled Gauss-Legendre quadrature of `f` over [a, b].
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let nodes = gl32();
    let mut total = 0.0;
    let w = (b - a) / panels as f64;
    for p in 0..panels {
        let lo = a + w * p as f64;
        let mid = lo + 0.5 * w;
        let half = 0.5 * w;
        for &(x, wt) in nodes {
            total += wt * f(mid + half * x);
        }
    }
    total * (b - a) / (2.0 * panels as f64)
}

/// Normalizer of the von Mises restricted to [-kappa, kappa].
pub fn truncated_normalizer(mean: f64, m: f64, kappa: f64) -> f64 {
    integrate(|t| (m * (t - mean).cos()).exp(), -kappa, kappa, 8)
}

/// d/dmean of the truncated normalizer, in closed form.
pub fn truncated_normalizer_dmean(mean: f64, m: f64, kappa: f64) -> f64 {
    (m * (kappa + mean).cos()).exp() - (m * (kappa - mean).cos()).exp()
}

/// Log-density of the von Mises renormalized over [-kappa, kappa].
pub fn truncated_log_density(theta: f64, mean: f64, m: f64, kappa: f64) -> f64 {
    m * (theta - mean).cos() - truncated_normalizer(mean, m, kappa).ln()
}

/// Draw from the von Mises (Best & Fisher envelope rejection).
pub fn sample_von_mises(mean: f64, m: f64, rng: &mut ChaCha8Rng) -> f64 {
    if m < 1e-8 {
        return rng.random_range(-PI..PI);
    }
    let tau = 1.0 + (1.0 + 4.0 * m * m).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * m);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1: f64 = rng.random_range(0.0..1.0);
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = m * (r - f);
        let u2: f64 = rng.random_range(f64::EPSILON..1.0);
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let u3: f64 = rng.random_range(0.0..1.0);
            let theta = if u3 < 0.5 { -f.acos() } else { f.acos() };
            return crate::dome::wrap_angle(mean + theta);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand_chacha::rand_core::SeedableRng;

    #[test]
    fn i0_matches_power_series_oracle() {
        // 50-term oracle written independently of bessel_i0's loop shape
        let oracle = |x: f64| {
            let mut s = 0.0;
            for k in 0..50 {
                let mut fact = 1.0;
                for i in 1..=k {
                    fact *= i as f64;
                }
                s += (x / 2.0).powi(2 * k as i32) / (fact * fact);
            }
            s
        };
        for &x in &[0.0, 0.5, 1.0, 5.0, 10.0, 25.0] {
            let rel = (bessel_i0(x) - oracle(x)).abs() / oracle(x);
            assert!(rel < 1e-10, "x={x} rel={rel}");
        }
        assert_eq!(bessel_i0(0.0), 1.0);
    }

    #[test]
    fn density_uniform_limit() {
        for theta in [-3.0, 0.0, 1.5] {
            assert_abs_diff_eq!(
                von_mises_density(theta, 0.7, 0.0),
                1.0 / (2.0 * PI),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn density_peak_value() {
        let v = von_mises_density(0.3, 0.3, 1.0);
        let want = 1.0f64.exp() / (2.0 * PI * bessel_i0(1.0));
        assert_abs_diff_eq!(v, want, epsilon = 1e-12);
    }

    #[test]
    fn density_integrates_to_one() {
        for &m in &[1.0, 10.0, 25.0, 50.0] {
            let total = integrate(|t| von_mises_density(t, 0.4, m), -PI, PI, 16);
            assert!((total - 1.0).abs() < 1e-6, "m={m} total={total}");
        }
    }

    #[test]
    fn truncated_density_integrates_to_one() {
        let kappa = 1.0;
        for &m in &[1.0, 10.0, 25.0, 50.0] {
            for &mean in &[0.0, -0.6, 0.9] {
                let total = integrate(
                    |t| truncated_log_density(t, mean, m, kappa).exp(),
                    -kappa,
                    kappa,
                    16,
                );
                assert!((total - 1.0).abs() < 1e-6, "m={m} mean={mean} total={total}");
            }
        }
    }

    #[test]
    fn normalizer_dmean_matches_finite_differences() {
        // Checked in log space: Z reaches e^50 at the top precision, where a
        // raw difference quotient is pure cancellation noise.
        let kappa = 1.0;
        for &m in &[1.0, 10.0, 50.0] {
            for &mean in &[-0.8, 0.0, 0.3] {
                let h = 1e-6;
                let fd = (truncated_normalizer(mean + h, m, kappa).ln()
                    - truncated_normalizer(mean - h, m, kappa).ln())
                    / (2.0 * h);
                let an = truncated_normalizer_dmean(mean, m, kappa)
                    / truncated_normalizer(mean, m, kappa);
                assert!(
                    (fd - an).abs() <= 1e-5 * (1.0 + an.abs()),
                    "m={m} mean={mean} fd={fd} an={an}"
                );
            }
        }
    }

    #[test]
    fn sampler_circular_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mean = 1.1;
        let m = 25.0;
        let n = 100_000;
        let (mut s, mut c) = (0.0, 0.0);
        for _ in 0..n {
            let t = sample_von_mises(mean, m, &mut rng);
            s += t.sin();
            c += t.cos();
        }
        let circ_mean = s.atan2(c);
        assert!((circ_mean - mean).abs() < 0.02, "circ mean {circ_mean}");
    }

    #[test]
    fn sampler_uniform_at_zero_precision() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let bins = 36;
        let n = 72_000;
        let mut hist = vec![0usize; bins];
        for _ in 0..n {
            let t = sample_von_mises(0.3, 0.0, &mut rng);
            let b = (((t + PI) / (2.0 * PI)) * bins as f64) as usize;
            hist[b.min(bins - 1)] += 1;
        }
        // 3-sigma multinomial bound per bin
        let p = 1.0 / bins as f64;
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        for (b, &h) in hist.iter().enumerate() {
            let dev = (h as f64 - n as f64 * p).abs();
            assert!(dev < 3.0 * sd, "bin {b}: {h}");
        }
    }
}
