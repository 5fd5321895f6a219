//! Special functions backing the p-value computations: log-gamma,
//! regularized incomplete gamma ratios, erfc, and the normal CDF.
//! Classic series / continued-fraction evaluations, accurate to well
//! under 1e-10 relative error over the ranges the tests use.

/// Lanczos approximation, g = 607/128, 15 coefficients.
const LANCZOS: [f64; 14] = [
    57.156_235_665_862_923_5,
    -59.597_960_355_475_491_2,
    14.136_097_974_741_747_1,
    -0.491_913_816_097_620_199,
    3.399_464_998_481_188_87e-5,
    4.652_362_892_704_857_56e-5,
    -9.837_447_530_487_956_46e-5,
    1.580_887_032_249_124_94e-4,
    -2.102_644_417_241_048_83e-4,
    2.174_396_181_152_126_43e-4,
    -1.643_181_065_367_638_9e-4,
    8.441_822_398_385_274_33e-5,
    -2.619_083_840_158_140_87e-5,
    3.689_918_265_953_162_34e-6,
];

/// Natural log of the gamma function for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let tmp = x + 5.242_187_5; // x + g + 1/2, g = 607/128
    let tmp = (x + 0.5) * tmp.ln() - tmp;
    let mut ser = 0.999_999_999_999_997_09;
    let mut y = x;
    for &c in &LANCZOS {
        y += 1.0;
        ser += c / y;
    }
    tmp + (2.506_628_274_631_000_5 * ser / x).ln()
}

const EPS: f64 = 1e-16;
const FPMIN: f64 = f64::MIN_POSITIVE / EPS;
const MAX_ITER: usize = 2_000_000;

/// Regularized lower incomplete gamma P(a, x) by series expansion.
fn igam_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut sum = 1.0 / a;
    let mut del = sum;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

/// Regularized upper incomplete gamma Q(a, x) by continued fraction
/// (modified Lentz).
fn igamc_cf(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / FPMIN;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = b + an / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h * (-x + a * x.ln() - ln_gamma(a)).exp()
}

/// Regularized upper incomplete gamma ratio Q(a, x) = Γ(a, x) / Γ(a),
/// for a > 0, x >= 0.
pub fn igamc(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        (1.0 - igam_series(a, x)).clamp(0.0, 1.0)
    } else {
        igamc_cf(a, x).clamp(0.0, 1.0)
    }
}

/// Regularized lower incomplete gamma ratio P(a, x).
pub fn igam(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        igam_series(a, x).clamp(0.0, 1.0)
    } else {
        (1.0 - igamc_cf(a, x)).clamp(0.0, 1.0)
    }
}

/// Complementary error function via the incomplete gamma relation
/// erfc(x) = Q(1/2, x^2) for x >= 0.
pub fn erfc(x: f64) -> f64 {
    if x >= 0.0 {
        igamc(0.5, x * x)
    } else {
        2.0 - igamc(0.5, x * x)
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_integers() {
        // ln((n-1)!) for small n
        let mut fact = 1.0f64;
        for n in 1..12u32 {
            if n > 1 {
                fact *= (n - 1) as f64;
            }
            assert!(
                (ln_gamma(n as f64) - fact.ln()).abs() < 1e-12,
                "n = {n}"
            );
        }
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-13);
    }

    #[test]
    fn erfc_matches_oracle_grid() {
        // 50-point grid, relative error <= 1e-10 against statrs
        for i in 0..50 {
            let x = -4.0 + 8.0 * i as f64 / 49.0;
            let mine = erfc(x);
            let oracle = statrs::function::erf::erfc(x);
            let denom = oracle.abs().max(1e-300);
            assert!(
                ((mine - oracle) / denom).abs() < 1e-10,
                "x = {x}: {mine} vs {oracle}"
            );
        }
    }

    #[test]
    fn igamc_matches_oracle_grid() {
        // mix of small and large shape parameters, including chi-square
        // halves the suite actually uses (N/2 up to 2^14)
        let shapes = [0.5, 1.0, 1.5, 2.0, 3.0, 8.0, 64.0, 781.0, 8192.0, 16384.0];
        let mut points = 0;
        for &a in &shapes {
            for j in 1..=5 {
                let x = a * (0.2 + 0.4 * j as f64); // spans below and above the mean
                let mine = igamc(a, x);
                let oracle = statrs::function::gamma::gamma_ur(a, x);
                let denom = oracle.abs().max(1e-300);
                assert!(
                    ((mine - oracle) / denom).abs() < 1e-10,
                    "a = {a}, x = {x}: {mine} vs {oracle}"
                );
                points += 1;
            }
        }
        assert_eq!(points, 50);
    }

    #[test]
    fn igam_complements_igamc() {
        for &(a, x) in &[(0.5, 0.3), (2.0, 5.0), (10.0, 9.0), (100.0, 110.0)] {
            assert!((igam(a, x) + igamc(a, x) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn normal_cdf_symmetry() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        for &x in &[0.5, 1.0, 2.33, 4.0] {
            assert!((normal_cdf(x) + normal_cdf(-x) - 1.0).abs() < 1e-13);
        }
    }
}
