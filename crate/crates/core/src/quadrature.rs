//! Fixed Gauss rules on segments and triangles, plus an adaptive composite
//! Gauss integrator.

/// 5-point Gauss-Legendre nodes on `[0, 1]` with weights summing to 1.
pub const GAUSS5: [(f64, f64); 5] = [
    (0.046_910_077_030_668, 0.118_463_442_528_094_5),
    (0.230_765_344_947_158_5, 0.239_314_335_249_683_2),
    (0.5, 0.284_444_444_444_444_4),
    (0.769_234_655_052_841_5, 0.239_314_335_249_683_2),
    (0.953_089_922_969_332, 0.118_463_442_528_094_5),
];

/// Degree-5 seven-point rule on a triangle: barycentric coordinates and
/// weights summing to 1.
pub const TRIANGLE7: [([f64; 3], f64); 7] = {
    const A1: f64 = 0.059_715_871_789_770;
    const B1: f64 = 0.470_142_064_105_115;
    const A2: f64 = 0.797_426_985_353_087;
    const B2: f64 = 0.101_286_507_323_456;
    const W1: f64 = 0.132_394_152_788_506;
    const W2: f64 = 0.125_939_180_544_827;
    [
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
        ([A1, B1, B1], W1),
        ([B1, A1, B1], W1),
        ([B1, B1, A1], W1),
        ([A2, B2, B2], W2),
        ([B2, A2, B2], W2),
        ([B2, B2, A2], W2),
    ]
};

/// 5-point Gauss on `[a, b]`.
pub fn gauss5<F: Fn(f64) -> f64>(a: f64, b: f64, f: F) -> f64 {
    let h = b - a;
    GAUSS5.iter().map(|&(t, w)| w * f(a + h * t)).sum::<f64>() * h
}

/// Composite 5-point Gauss with bisection until the two-half estimate agrees
/// with the whole-panel estimate to `rel_tol` (relative to the running
/// total) or `max_depth` is reached.
pub fn adaptive_gauss<F: Fn(f64) -> f64>(a: f64, b: f64, rel_tol: f64, f: &F) -> f64 {
    let whole = gauss5(a, b, f);
    let scale = whole.abs().max(f64::MIN_POSITIVE);
    adaptive_step(a, b, whole, rel_tol * scale, 0, f)
}

fn adaptive_step<F: Fn(f64) -> f64>(a: f64, b: f64, whole: f64, tol: f64, depth: u32, f: &F) -> f64 {
    let m = 0.5 * (a + b);
    let left = gauss5(a, m, f);
    let right = gauss5(m, b, f);
    let halves = left + right;
    if (halves - whole).abs() <= tol || depth >= 48 || m <= a || m >= b {
        return halves;
    }
    adaptive_step(a, m, left, 0.5 * tol, depth + 1, f) + adaptive_step(m, b, right, 0.5 * tol, depth + 1, f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gauss5_is_exact_to_degree_nine() {
        for k in 0..=9 {
            let exact = 1.0 / (k as f64 + 1.0);
            assert_abs_diff_eq!(gauss5(0.0, 1.0, |t| t.powi(k)), exact, epsilon = 1e-15);
        }
        assert!((gauss5(0.0, 1.0, |t| t.powi(10)) - 1.0 / 11.0).abs() > 1e-10);
    }

    #[test]
    fn triangle_rule_is_exact_to_degree_five() {
        // integral of l1^a l2^b l3^c over the reference triangle (area 1/2)
        // is a! b! c! 2! / (a + b + c + 2)! * area
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        for a in 0..=5u32 {
            for b in 0..=(5 - a) {
                let c = 5 - a - b;
                let exact = fact(a) * fact(b) * fact(c) * 2.0 / fact(a + b + c + 2);
                let q: f64 = TRIANGLE7
                    .iter()
                    .map(|(l, w)| w * l[0].powi(a as i32) * l[1].powi(b as i32) * l[2].powi(c as i32))
                    .sum();
                assert_abs_diff_eq!(q, exact, epsilon = 1e-14);
            }
        }
        let total: f64 = TRIANGLE7.iter().map(|(_, w)| w).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn adaptive_handles_near_singular_integrands() {
        // int_0^1 (t + 1e-6)^(-1/2) dt = 2 (sqrt(1 + 1e-6) - sqrt(1e-6))
        let exact = 2.0 * ((1.0f64 + 1e-6).sqrt() - 1e-3);
        let q = adaptive_gauss(0.0, 1.0, 1e-13, &|t| (t + 1e-6).powf(-0.5));
        assert_abs_diff_eq!(q, exact, epsilon = 1e-11);
    }
}
