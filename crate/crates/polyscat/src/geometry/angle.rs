//! Rationality classification of corner angles alpha = phi_0 / pi.

/// Outcome of classifying alpha against rationals with bounded denominator.
#[derive(Debug, Clone, PartialEq)]
pub enum AngleClass {
    /// alpha = q/p in lowest terms; p is the degree
    Rational { p: u32, q: u32 },
    /// best approximant q/p with p <= max_denominator and its error
    Irrational { best_p: u32, best_q: u32, error: f64 },
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Best rational approximation q/p to x in (0,1) with p <= max_denominator,
/// via continued-fraction convergents and semiconvergents.
fn best_rational(x: f64, max_denominator: u64) -> (u64, u64) {
    // convergents p_k = a_k p_{k-1} + p_{k-2} (here (num, den) pairs)
    let (mut p0, mut q0) = (0u64, 1u64); // numerator, denominator of h_{-1}/k_{-1}
    let (mut p1, mut q1) = (1u64, 0u64);
    let mut frac = x;
    let mut best = (0u64, 1u64);
    let mut best_err = x.abs();
    let consider = |num: u64, den: u64, best: &mut (u64, u64), best_err: &mut f64| {
        if den == 0 || den > max_denominator {
            return;
        }
        let err = (x - num as f64 / den as f64).abs();
        if err < *best_err {
            *best_err = err;
            *best = (num, den);
        }
    };
    for _ in 0..64 {
        let a = frac.floor();
        if !a.is_finite() || a < 0.0 || a > max_denominator as f64 * 2.0 {
            break;
        }
        let ai = a as u64;
        let p2 = ai.saturating_mul(p1).saturating_add(p0);
        let q2 = ai.saturating_mul(q1).saturating_add(q0);
        if q2 > max_denominator {
            // largest semiconvergent still within the denominator bound
            if q1 > 0 {
                let t = (max_denominator - q0) / q1;
                consider(t * p1 + p0, t * q1 + q0, &mut best, &mut best_err);
            }
            break;
        }
        consider(p2, q2, &mut best, &mut best_err);
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
        let rem = frac - a;
        if rem < 1e-18 {
            break;
        }
        frac = 1.0 / rem;
    }
    let g = gcd(best.0, best.1).max(1);
    (best.0 / g, best.1 / g)
}

/// Classifies alpha in (0,1) as Rational(q/p) if the best bounded-denominator
/// rational lies within `tol`, else Irrational with the best approximant.
pub fn classify_angle(alpha: f64, max_denominator: u32, tol: f64) -> AngleClass {
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0,1)");
    let (q, p) = best_rational(alpha, max_denominator as u64);
    let error = (alpha - q as f64 / p as f64).abs();
    if error <= tol {
        AngleClass::Rational { p: p as u32, q: q as u32 }
    } else {
        AngleClass::Irrational { best_p: p as u32, best_q: q as u32, error }
    }
}
