//! Real roots of a cubic via the depressed-cubic trigonometric form, with
//! Newton polishing against the original coefficients.

use std::f64::consts::PI;

/// Evaluate `c[0] + c[1] x + c[2] x² + c[3] x³` and its derivative.
#[inline]
pub fn eval(c: &[f64; 4], x: f64) -> (f64, f64) {
    let f = ((c[3] * x + c[2]) * x + c[1]) * x + c[0];
    let df = (3.0 * c[3] * x + 2.0 * c[2]) * x + c[1];
    (f, df)
}

/// Sum of the magnitudes of the individual terms at `x`; the natural scale for
/// a relative residual.
#[inline]
pub fn term_scale(c: &[f64; 4], x: f64) -> f64 {
    c[0].abs() + (c[1] * x).abs() + (c[2] * x * x).abs() + (c[3] * x * x * x).abs()
}

/// Discriminant of `c[3] x³ + c[2] x² + c[1] x + c[0]`: positive for three
/// distinct real roots, negative for one real root and a complex pair.
pub fn discriminant(c: &[f64; 4]) -> f64 {
    let (a, b, cc, d) = (c[3], c[2], c[1], c[0]);
    18.0 * a * b * cc * d - 4.0 * b * b * b * d + b * b * cc * cc
        - 4.0 * a * cc * cc * cc
        - 27.0 * a * a * d * d
}

/// Newton-polish `x` on the cubic, keeping an iterate only while it reduces
/// the residual.
pub fn polish(c: &[f64; 4], mut x: f64) -> f64 {
    let (mut f, mut df) = eval(c, x);
    for _ in 0..8 {
        if f == 0.0 || df == 0.0 {
            break;
        }
        let next = x - f / df;
        let (fn_, dfn) = eval(c, next);
        if fn_.abs() < f.abs() {
            x = next;
            f = fn_;
            df = dfn;
        } else {
            break;
        }
    }
    x
}

/// All real roots of a cubic with `c[3] != 0`, ascending, each Newton-polished.
/// Coincident roots are returned with multiplicity (the caller decides how to
/// merge them).
pub fn real_roots(c: &[f64; 4]) -> Vec<f64> {
    debug_assert!(c[3] != 0.0);
    let a = c[2] / c[3];
    let b = c[1] / c[3];
    let d = c[0] / c[3];
    // t = x + a/3 gives t³ + p t + q = 0.
    let shift = a / 3.0;
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + d;

    let mut roots: Vec<f64> = if p == 0.0 {
        vec![(-q).cbrt()]
    } else {
        let half_q = q / 2.0;
        let third_p = p / 3.0;
        let disc = half_q * half_q + third_p * third_p * third_p;
        if disc < 0.0 {
            // three real roots; p < 0 here
            let r = 2.0 * (-third_p).sqrt();
            let arg = (3.0 * q / (2.0 * p) * (-3.0 / p).sqrt()).clamp(-1.0, 1.0);
            let phi = arg.acos() / 3.0;
            (0..3).map(|k| r * (phi - 2.0 * PI * k as f64 / 3.0).cos()).collect()
        } else {
            let s = disc.sqrt();
            let big = -(half_q.signum()) * (half_q.abs() + s).cbrt();
            let big = if half_q == 0.0 { s.cbrt() } else { big };
            let t = if big != 0.0 { big - third_p / big } else { 0.0 };
            vec![t]
        }
    };
    for r in roots.iter_mut() {
        *r = polish(c, *r - shift);
    }
    roots.sort_by(|x, y| x.total_cmp(y));
    roots
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn from_roots(r: [f64; 3]) -> [f64; 4] {
        // (x-r0)(x-r1)(x-r2)
        let s1 = r[0] + r[1] + r[2];
        let s2 = r[0] * r[1] + r[0] * r[2] + r[1] * r[2];
        let s3 = r[0] * r[1] * r[2];
        [-s3, s2, -s1, 1.0]
    }

    #[test]
    fn known_roots() {
        let r = real_roots(&from_roots([1.0, 2.0, 3.0]));
        assert_eq!(r.len(), 3);
        for (x, e) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert!((x - e).abs() < 1e-12);
        }
        // x³ + x + 1 has one real root near -0.6823278
        let r = real_roots(&[1.0, 1.0, 0.0, 1.0]);
        assert_eq!(r.len(), 1);
        assert!((r[0] + 0.682_327_803_828_019_3).abs() < 1e-14);
        // x³ = 8
        let r = real_roots(&[-8.0, 0.0, 0.0, 1.0]);
        assert!((r[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn discriminant_sign() {
        assert!(discriminant(&from_roots([1.0, 2.0, 3.0])) > 0.0);
        assert!(discriminant(&[1.0, 1.0, 0.0, 1.0]) < 0.0);
    }

    proptest! {
        #[test]
        fn recovers_separated_roots(a in -10.0f64..10.0, d1 in 0.1f64..5.0, d2 in 0.1f64..5.0) {
            let r = [a, a + d1, a + d1 + d2];
            let got = real_roots(&from_roots(r));
            prop_assert_eq!(got.len(), 3);
            for (x, e) in got.iter().zip(r) {
                prop_assert!((x - e).abs() < 1e-9 * (1.0 + e.abs()));
            }
        }

        #[test]
        fn residual_small(c0 in -1e3f64..1e3, c1 in -1e3f64..1e3, c2 in -1e3f64..1e3, c3 in 0.01f64..10.0) {
            let c = [c0, c1, c2, c3];
            for x in real_roots(&c) {
                let (f, _) = eval(&c, x);
                prop_assert!(f.abs() <= 1e-12 * term_scale(&c, x).max(1e-300));
            }
        }
    }
}
