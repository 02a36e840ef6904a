//! Associated Legendre functions, spherical Bessel functions and spherical
//! harmonics in the normalization used throughout the corner analysis.
//!
//! Positive orders carry the Condon-Shortley phase; negative orders follow
//! P_n^{-m} = (-1)^m (n-m)!/(n+m)! P_n^m, so that P_n^{-1}(1) = -P_n^1(1)/(n(n+1)).

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SpecFunError {
    #[error("order |m| = {m} exceeds degree n = {n}")]
    OrderOutOfRange { n: u32, m: i32 },
    #[error("argument x = {0} outside [-1, 1]")]
    ArgumentOutOfRange(f64),
    #[error("m = 0 not allowed: P_n^0/sin(theta) is singular")]
    ZeroOrderRatio,
    #[error("quadrature did not converge: achieved error estimate {achieved:e}")]
    QuadratureNonConvergence { achieved: f64 },
}

/// ln(n!)
pub fn ln_factorial(n: u32) -> f64 {
    (2..=n as u64).map(|i| (i as f64).ln()).sum()
}

/// n! as f64 (overflows to inf beyond 170, callers use ln_factorial there)
pub fn factorial(n: u32) -> f64 {
    (2..=n as u64).map(|i| i as f64).product()
}

/// (2n+1)!! Switches to log-space accumulation for large n to avoid overflow
/// in intermediate products.
pub fn double_factorial_odd(n: u32) -> f64 {
    if n <= 150 {
        (0..=n as u64).map(|i| (2 * i + 1) as f64).product()
    } else {
        ln_double_factorial_odd(n).exp()
    }
}

/// ln((2n+1)!!)
pub fn ln_double_factorial_odd(n: u32) -> f64 {
    (0..=n as u64).map(|i| ((2 * i + 1) as f64).ln()).sum()
}

/// Plain Legendre polynomial P_n(x) by the three-term recurrence.
pub fn legendre_p(n: u32, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let (mut pm1, mut p) = (1.0, x);
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * p - kf * pm1) / (kf + 1.0);
        pm1 = p;
        p = next;
    }
    p
}

/// Associated Legendre function P_n^m(x), |m| <= n, |x| <= 1.
///
/// Upward recurrence in n from the closed-form diagonal P_m^m.
pub fn assoc_legendre(n: u32, m: i32, x: f64) -> Result<f64, SpecFunError> {
    if m.unsigned_abs() > n {
        return Err(SpecFunError::OrderOutOfRange { n, m });
    }
    if !(-1.0..=1.0).contains(&x) {
        return Err(SpecFunError::ArgumentOutOfRange(x));
    }
    let ma = m.unsigned_abs();
    let p = assoc_legendre_pos(n, ma, x);
    if m >= 0 {
        Ok(p)
    } else {
        let sign = if ma % 2 == 0 { 1.0 } else { -1.0 };
        let ratio = (ln_factorial(n - ma) - ln_factorial(n + ma)).exp();
        Ok(sign * ratio * p)
    }
}

fn assoc_legendre_pos(n: u32, m: u32, x: f64) -> f64 {
    debug_assert!(m <= n);
    // P_m^m = (-1)^m (2m-1)!! (1-x^2)^{m/2}
    let s2 = (1.0 - x) * (1.0 + x);
    let mut pmm = 1.0;
    if m > 0 {
        let s = s2.max(0.0).sqrt();
        for k in 1..=m as u64 {
            pmm *= -((2 * k - 1) as f64) * s;
        }
    }
    if n == m {
        return pmm;
    }
    let mut pm1 = pmm;
    let mut p = x * (2 * m + 1) as f64 * pmm;
    for l in (m + 2)..=n {
        let lf = l as f64;
        let mf = m as f64;
        let next = ((2.0 * lf - 1.0) * x * p - (lf + mf - 1.0) * pm1) / (lf - mf);
        pm1 = p;
        p = next;
    }
    p
}

/// d/dtheta P_n^m(cos theta), 0 <= m <= n, via the stable order-shift
/// recurrence (no division by sin theta).
pub fn legendre_theta_derivative(n: u32, m: u32, theta: f64) -> Result<f64, SpecFunError> {
    if m > n {
        return Err(SpecFunError::OrderOutOfRange { n, m: m as i32 });
    }
    if n == 0 {
        return Ok(0.0);
    }
    let x = theta.cos();
    let upper = if m + 1 <= n {
        assoc_legendre(n, m as i32 + 1, x)?
    } else {
        0.0
    };
    let lower = assoc_legendre(n, m as i32 - 1, x)?;
    let nf = n as f64;
    let mf = m as f64;
    Ok(0.5 * (upper - (nf + mf) * (nf - mf + 1.0) * lower))
}

/// P_n^m(cos theta)/sin theta for m >= 1, evaluated through the degree-(n-1)
/// recurrence. Finite at theta = 0 and pi.
pub fn legendre_over_sin(n: u32, m: u32, theta: f64) -> Result<f64, SpecFunError> {
    legendre_over_sin_lower(n, m, theta)
}

/// Degree-(n-1) variant of the sin-theta ratio recurrence.
pub fn legendre_over_sin_lower(n: u32, m: u32, theta: f64) -> Result<f64, SpecFunError> {
    if m == 0 {
        return Err(SpecFunError::ZeroOrderRatio);
    }
    if m > n {
        return Err(SpecFunError::OrderOutOfRange { n, m: m as i32 });
    }
    let x = theta.cos();
    let upper = if n >= 1 && m + 1 <= n - 1 {
        assoc_legendre(n - 1, m as i32 + 1, x)?
    } else {
        0.0
    };
    let lower = if m - 1 <= n - 1 {
        assoc_legendre(n - 1, m as i32 - 1, x)?
    } else {
        0.0
    };
    let nf = n as f64;
    let mf = m as f64;
    Ok(-(upper + (nf + mf - 1.0) * (nf + mf) * lower) / (2.0 * mf))
}

/// Degree-(n+1) variant of the sin-theta ratio recurrence.
pub fn legendre_over_sin_upper(n: u32, m: u32, theta: f64) -> Result<f64, SpecFunError> {
    if m == 0 {
        return Err(SpecFunError::ZeroOrderRatio);
    }
    if m > n {
        return Err(SpecFunError::OrderOutOfRange { n, m: m as i32 });
    }
    let x = theta.cos();
    let upper = assoc_legendre(n + 1, m as i32 + 1, x)?;
    let lower = assoc_legendre(n + 1, m as i32 - 1, x)?;
    let nf = n as f64;
    let mf = m as f64;
    Ok(-(upper + (nf - mf + 1.0) * (nf - mf + 2.0) * lower) / (2.0 * mf))
}

/// Spherical Bessel function of the first kind j_n(x), x >= 0.
///
/// Small arguments use the ascending series with leading term x^n/(2n+1)!!;
/// x < n uses Miller's downward recurrence, otherwise upward recurrence.
pub fn spherical_bessel_j(n: u32, x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    // series region: x^2/2 small relative to first correction scale
    if x < 0.1 || (x as f64) < 0.5 * (n as f64).sqrt() {
        return spherical_bessel_j_series(n, x);
    }
    let j0 = x.sin() / x;
    if n == 0 {
        return j0;
    }
    let j1 = x.sin() / (x * x) - x.cos() / x;
    if n == 1 {
        return j1;
    }
    if x >= n as f64 {
        // upward recurrence is stable here
        let (mut jm1, mut j) = (j0, j1);
        for k in 1..n {
            let next = (2 * k + 1) as f64 / x * j - jm1;
            jm1 = j;
            j = next;
        }
        j
    } else {
        // Miller downward recurrence, normalized against j_0
        let start = n + (((n as f64).max(x)).sqrt() as u32) * 4 + 20;
        let mut jp1 = 0.0_f64;
        let mut jk = 1e-30_f64;
        let mut target = if n == start { jk } else { 0.0 };
        let mut k = start;
        while k > 0 {
            let jm1 = (2 * k + 1) as f64 / x * jk - jp1;
            jp1 = jk;
            jk = jm1;
            k -= 1;
            if k == n {
                target = jk;
            }
            // rescale to avoid overflow
            if jk.abs() > 1e200 {
                jp1 /= 1e200;
                jk /= 1e200;
                target /= 1e200;
            }
        }
        target * j0 / jk
    }
}

fn spherical_bessel_j_series(n: u32, x: f64) -> f64 {
    // j_n(x) = x^n/(2n+1)!! * sum_k (-x^2/2)^k / (k! (2n+2k+1)!!/(2n+1)!!)
    let mut term = 1.0;
    let mut sum = 1.0;
    let x2 = x * x;
    for k in 1..40u64 {
        term *= -x2 / (2.0 * k as f64 * (2 * (n as u64 + k) + 1) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    let ln_lead = (n as f64) * x.ln() - ln_double_factorial_odd(n);
    if ln_lead < -700.0 {
        0.0
    } else {
        ln_lead.exp() * sum
    }
}

/// Spherical Bessel function of the second kind y_n(x), x > 0 (upward
/// recurrence is stable for y_n).
pub fn spherical_bessel_y(n: u32, x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let y0 = -x.cos() / x;
    if n == 0 {
        return y0;
    }
    let y1 = -x.cos() / (x * x) - x.sin() / x;
    if n == 1 {
        return y1;
    }
    let (mut ym1, mut y) = (y0, y1);
    for k in 1..n {
        let next = (2 * k + 1) as f64 / x * y - ym1;
        ym1 = y;
        y = next;
    }
    y
}

/// Outgoing spherical Hankel function h_n^{(1)}(x) = j_n(x) + i y_n(x).
pub fn spherical_hankel1(n: u32, x: f64) -> Complex64 {
    Complex64::new(spherical_bessel_j(n, x), spherical_bessel_y(n, x))
}

/// Derivative j_n'(x) from j_{n-1} - (n+1)/x j_n.
pub fn spherical_bessel_j_prime(n: u32, x: f64) -> f64 {
    if n == 0 {
        return -spherical_bessel_j(1, x);
    }
    spherical_bessel_j(n - 1, x) - (n + 1) as f64 / x * spherical_bessel_j(n, x)
}

/// Derivative h_n^{(1)}'(x).
pub fn spherical_hankel1_prime(n: u32, x: f64) -> Complex64 {
    if n == 0 {
        return -spherical_hankel1(1, x);
    }
    spherical_hankel1(n - 1, x) - spherical_hankel1(n, x) * ((n + 1) as f64 / x)
}

/// Spherical harmonic in the |m| normalization
/// Y_n^m = sqrt((2n+1)/(4 pi) (n-|m|)!/(n+|m|)!) P_n^{|m|}(cos theta) e^{i m phi}.
pub fn spherical_harmonic(n: u32, m: i32, theta: f64, phi: f64) -> Result<Complex64, SpecFunError> {
    let ma = m.unsigned_abs();
    if ma > n {
        return Err(SpecFunError::OrderOutOfRange { n, m });
    }
    let norm = ((2 * n + 1) as f64 / (4.0 * std::f64::consts::PI)).sqrt()
        * (0.5 * (ln_factorial(n - ma) - ln_factorial(n + ma))).exp();
    let p = assoc_legendre(n, ma as i32, theta.cos())?;
    Ok(Complex64::from_polar(1.0, m as f64 * phi) * norm * p)
}

/// Normalization constant of `spherical_harmonic` without the Legendre and
/// azimuthal factors.
pub fn harmonic_norm(n: u32, m: i32) -> f64 {
    let ma = m.unsigned_abs();
    ((2 * n + 1) as f64 / (4.0 * std::f64::consts::PI)).sqrt()
        * (0.5 * (ln_factorial(n - ma) - ln_factorial(n + ma))).exp()
}

/// Integral over (0, pi) of P_n^m(cos t) P_n^l(cos t)/sin t dt by adaptive
/// quadrature. Equals 0 for l != m and (n+m)!/(m (n-m)!) for l = m.
pub fn legendre_orthogonality_integral(n: u32, m: u32, l: u32) -> Result<f64, SpecFunError> {
    if m == 0 || l == 0 {
        return Err(SpecFunError::ZeroOrderRatio);
    }
    if m > n || l > n {
        return Err(SpecFunError::OrderOutOfRange {
            n,
            m: m.max(l) as i32,
        });
    }
    let f = |theta: f64| {
        legendre_over_sin(n, m, theta).unwrap() * assoc_legendre(n, l as i32, theta.cos()).unwrap()
    };
    let tol = 1e-10 * (ln_factorial(n + m) - ln_factorial(n - m)).exp().max(1.0);
    crate::quadrature::adaptive_simpson(&f, 0.0, std::f64::consts::PI, tol, 30)
        .map_err(|achieved| SpecFunError::QuadratureNonConvergence { achieved })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    // brute-force oracle: P_n^m from the Rodrigues-style derivative of P_n,
    // evaluated by repeated differentiation of the explicit polynomial
    fn oracle_assoc_legendre(n: u32, m: u32, x: f64) -> f64 {
        // coefficients of P_n as a polynomial
        let mut coeffs = vec![vec![1.0], vec![0.0, 1.0]];
        for k in 1..n.max(1) {
            let kf = k as f64;
            let prev = &coeffs[k as usize];
            let prev2 = &coeffs[k as usize - 1];
            let mut next = vec![0.0; k as usize + 2];
            for (i, c) in prev.iter().enumerate() {
                next[i + 1] += (2.0 * kf + 1.0) * c / (kf + 1.0);
            }
            for (i, c) in prev2.iter().enumerate() {
                next[i] -= kf * c / (kf + 1.0);
            }
            coeffs.push(next);
        }
        let mut poly = coeffs[n as usize].clone();
        for _ in 0..m {
            let mut d = vec![0.0; poly.len().saturating_sub(1).max(1)];
            for (i, c) in poly.iter().enumerate().skip(1) {
                d[i - 1] = i as f64 * c;
            }
            poly = d;
        }
        let val: f64 = poly
            .iter()
            .enumerate()
            .map(|(i, c)| c * x.powi(i as i32))
            .sum();
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        sign * (1.0 - x * x).powf(m as f64 / 2.0) * val
    }

    #[test]
    fn assoc_legendre_paper_endpoint_values() {
        assert_eq!(assoc_legendre(3, 0, 1.0).unwrap(), 1.0);
        assert_eq!(assoc_legendre(2, 1, 1.0).unwrap(), 0.0);
        assert!((assoc_legendre(2, 2, 0.0).unwrap() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn assoc_legendre_against_polynomial_oracle() {
        for n in 0..=10u32 {
            for m in 0..=n {
                for i in 0..21 {
                    let x = -1.0 + 0.1 * i as f64;
                    let a = assoc_legendre(n, m as i32, x).unwrap();
                    let b = oracle_assoc_legendre(n, m, x);
                    assert!(
                        (a - b).abs() <= 1e-8 * b.abs().max(1.0),
                        "n={n} m={m} x={x}: {a} vs {b}"
                    );
                }
            }
        }
    }

    #[test]
    fn negative_order_relation() {
        // P_n^{-1}(1) = -P_n^1(1)/(n(n+1)) and generally the factorial ratio
        for n in 1..=8u32 {
            for m in 1..=n {
                let x = 0.37;
                let pos = assoc_legendre(n, m as i32, x).unwrap();
                let neg = assoc_legendre(n, -(m as i32), x).unwrap();
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                let ratio = factorial(n - m) / factorial(n + m);
                assert!((neg - sign * ratio * pos).abs() < 1e-12 * pos.abs().max(1.0));
            }
        }
    }

    #[test]
    fn domain_errors() {
        assert!(assoc_legendre(2, 3, 0.5).is_err());
        assert!(assoc_legendre(2, 1, 1.5).is_err());
        assert!(legendre_theta_derivative(1, 2, 0.5).is_err());
        assert!(legendre_over_sin(3, 0, 0.5).is_err());
    }

    #[test]
    fn theta_derivative_matches_finite_differences() {
        let h = 1e-5;
        for n in 0..=15u32 {
            for m in 0..=n {
                for i in 1..20 {
                    let theta = PI * i as f64 / 20.0;
                    let d = legendre_theta_derivative(n, m, theta).unwrap();
                    let fp = assoc_legendre(n, m as i32, (theta + h).cos()).unwrap();
                    let fm = assoc_legendre(n, m as i32, (theta - h).cos()).unwrap();
                    let fd = (fp - fm) / (2.0 * h);
                    // error scales with the function magnitude, which grows
                    // like (2m-1)!! for high orders
                    let scale = assoc_legendre(n, m as i32, theta.cos())
                        .unwrap()
                        .abs()
                        .max(fd.abs())
                        .max(1.0);
                    assert!(
                        (d - fd).abs() < 1e-6 * scale,
                        "n={n} m={m} theta={theta}: {d} vs {fd}"
                    );
                }
            }
        }
    }

    #[test]
    fn theta_derivative_spot_check() {
        // d/dtheta P_4^2(cos theta) at pi/3 against finite differences at 1e-8
        let theta = PI / 3.0;
        let d = legendre_theta_derivative(4, 2, theta).unwrap();
        let h = 1e-6;
        let fd = (assoc_legendre(4, 2, (theta + h).cos()).unwrap()
            - assoc_legendre(4, 2, (theta - h).cos()).unwrap())
            / (2.0 * h);
        assert!((d - fd).abs() < 1e-7 * fd.abs().max(1.0));
    }

    #[test]
    fn over_sin_direct_quotient() {
        assert!((legendre_over_sin(1, 1, PI / 2.0).unwrap() - (-1.0)).abs() < 1e-14);
        let theta = 0.7_f64;
        let direct = assoc_legendre(3, 2, theta.cos()).unwrap() / theta.sin();
        assert!((legendre_over_sin(3, 2, theta).unwrap() - direct).abs() < 1e-10);
    }

    #[test]
    fn over_sin_variants_agree() {
        for n in 1..=15u32 {
            for m in 1..=n {
                for i in 0..30 {
                    let theta = 0.05 + (PI - 0.1) * i as f64 / 29.0;
                    let a = legendre_over_sin_lower(n, m, theta).unwrap();
                    let b = legendre_over_sin_upper(n, m, theta).unwrap();
                    assert!(
                        (a - b).abs() < 1e-10 * a.abs().max(1.0),
                        "n={n} m={m} theta={theta}: {a} vs {b}"
                    );
                }
            }
        }
    }

    #[test]
    fn over_sin_endpoint_limit() {
        // limit at theta -> 0+ equals the recurrence value at theta = 0
        let at_zero = legendre_over_sin(2, 1, 0.0).unwrap();
        // direct quotient at small theta (1 - cos(theta) loses precision much
        // below 1e-4, so probe there rather than closer to zero)
        let near_zero = assoc_legendre(2, 1, (1e-4_f64).cos()).unwrap() / (1e-4_f64).sin();
        assert!((at_zero - near_zero).abs() < 1e-6);
        // closed form: -n(n+1)/2 for m = 1
        assert!((at_zero - (-3.0)).abs() < 1e-12);
    }

    #[test]
    fn bessel_j_basics() {
        assert!((spherical_bessel_j(0, PI)).abs() < 1e-14);
        let lhs = spherical_bessel_j(1, 1.0);
        let rhs = (spherical_bessel_j(0, 1.0) + spherical_bessel_j(2, 1.0)) / 3.0;
        assert!((lhs - rhs).abs() < 1e-12);
        // leading series term x^5/10395 at x = 1e-4
        let x = 1e-4_f64;
        let expect = x.powi(5) / 10395.0;
        assert!((spherical_bessel_j(5, x) - expect).abs() < 1e-8 * expect);
    }

    #[test]
    fn bessel_recursion_closure() {
        for n in 1..=30u32 {
            for i in 0..101 {
                let x = i as f64 / 101.0;
                if x <= 1e-3 {
                    continue;
                }
                let lhs = spherical_bessel_j(n, x) / x;
                let rhs = (spherical_bessel_j(n - 1, x) + spherical_bessel_j(n + 1, x))
                    / (2 * n + 1) as f64;
                assert!((lhs - rhs).abs() < 1e-10, "n={n} x={x}");
            }
        }
    }

    #[test]
    fn bessel_y_and_hankel() {
        let x = 2.3_f64;
        assert!((spherical_bessel_y(0, x) + x.cos() / x).abs() < 1e-15);
        // wronskian j_n y_n' - j_n' y_n = 1/x^2
        for n in 0..8u32 {
            let j = spherical_bessel_j(n, x);
            let y = spherical_bessel_y(n, x);
            let jp = spherical_bessel_j_prime(n, x);
            let yp = if n == 0 {
                -spherical_bessel_y(1, x)
            } else {
                spherical_bessel_y(n - 1, x) - (n + 1) as f64 / x * y
            };
            assert!((j * yp - jp * y - 1.0 / (x * x)).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn endpoint_facts() {
        for n in 1..=20u32 {
            assert_eq!(assoc_legendre(n, 0, 1.0).unwrap(), 1.0);
            for m in 1..=n {
                assert_eq!(assoc_legendre(n, m as i32, 1.0).unwrap(), 0.0);
                assert_eq!(assoc_legendre(n, m as i32, -1.0).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn harmonic_values() {
        let y00 = spherical_harmonic(0, 0, 0.3, 0.7).unwrap();
        assert!((y00.re - 1.0 / (4.0 * PI).sqrt()).abs() < 1e-15);
        assert!(y00.im.abs() < 1e-15);
        let y10 = spherical_harmonic(1, 0, 0.0, 0.0).unwrap();
        assert!((y10.re - (3.0 / (4.0 * PI)).sqrt()).abs() < 1e-15);
        // |m| convention: Y_n^{-m}(theta, phi) = Y_n^m(theta, -phi)
        let a = spherical_harmonic(2, -1, PI / 3.0, 1.1).unwrap();
        let b = spherical_harmonic(2, 1, PI / 3.0, -1.1).unwrap();
        assert!((a - b).norm() < 1e-15);
    }

    #[test]
    fn orthogonality_integral_values() {
        let z = legendre_orthogonality_integral(2, 1, 2).unwrap();
        assert!(z.abs() < 1e-8, "off-diagonal: {z}");
        let d = legendre_orthogonality_integral(2, 1, 1).unwrap();
        assert!((d - 6.0).abs() < 1e-8, "diagonal: {d}");
        let big = legendre_orthogonality_integral(5, 3, 3).unwrap();
        assert!((big - 6720.0).abs() < 1e-8 * 6720.0, "n=5 m=3: {big}");
    }

    #[test]
    fn double_factorial_log_space() {
        assert_eq!(double_factorial_odd(0), 1.0);
        assert_eq!(double_factorial_odd(2), 15.0);
        let a = ln_double_factorial_odd(200);
        let direct: f64 = (0..=200u64).map(|i| ((2 * i + 1) as f64).ln()).sum();
        assert!((a - direct).abs() < 1e-9);
        assert!(double_factorial_odd(140).is_finite());
        // beyond the f64 range only the log form is meaningful
        assert!(ln_double_factorial_odd(500).is_finite());
    }
}
