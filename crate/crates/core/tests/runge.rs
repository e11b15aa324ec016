mod common;

use common::{oracle_error, q};
use dense_orbits::exact::{complex, complex_zero, int, ratio};
use dense_orbits::runge::{
    birkhoff_pair, fit_polynomial, separating_polynomial, ComplexPolynomial, FitOptions, Piece,
    PiecewiseTarget, Region,
};
use proptest::prelude::*;

fn unit_square(cx: i64, cy: i64) -> Region {
    Region::square(&complex(int(cx), int(cy)), &ratio(1, 2)).unwrap()
}

#[test]
fn two_constant_pieces_fit_exactly() {
    let c = ComplexPolynomial::constant_f64(2.0, -1.0);
    let t = PiecewiseTarget::new(vec![
        Piece::new(unit_square(0, 0), c.clone()),
        Piece::new(unit_square(3, 0), c.clone()),
    ])
    .unwrap();
    let (p, rep) = fit_polynomial(&t, &q(1, 10), &FitOptions::default()).unwrap();
    assert_eq!(p, c);
    assert_eq!(rep.achieved_eps, 0.0);
}

#[test]
fn zero_one_squares_pass_oracle_grid() {
    let (p, rep) = separating_polynomial(
        &[unit_square(0, 0)],
        &[unit_square(3, 0)],
        &q(1, 10),
        &FitOptions::default(),
    )
    .unwrap();
    let n = 10 * rep.validation_density;
    let e0 = oracle_error(&p, &ComplexPolynomial::zero(), (0.0, 0.0), &unit_square(0, 0), n, 120);
    let e1 = oracle_error(&p, &ComplexPolynomial::constant_f64(1.0, 0.0), (0.0, 0.0), &unit_square(3, 0), n, 120);
    assert!(e0 < 0.1 && e1 < 0.1, "{e0} {e1}");
}

#[test]
fn separator_bound_one_third_is_affine_scale() {
    let (p, rep) = separating_polynomial(
        &[unit_square(0, 0)],
        &[unit_square(3, 0)],
        &q(1, 3),
        &FitOptions::default(),
    )
    .unwrap();
    assert!(rep.degree <= 2, "degree {}", rep.degree);
    assert!(rep.achieved_eps < 0.3);
    let e = oracle_error(&p, &ComplexPolynomial::zero(), (0.0, 0.0), &unit_square(0, 0), 2000, 100);
    assert!(e < 1.0 / 3.0);
}

#[test]
fn birkhoff_constant_is_exact() {
    let c = ComplexPolynomial::constant_f64(0.5, 0.5);
    let (p, rep) = birkhoff_pair(&c, &c, &int(1), &q(1, 10), &FitOptions::default()).unwrap();
    assert_eq!(p, c);
    assert_eq!(rep.piece_errors, vec![0.0, 0.0]);
}

#[test]
fn birkhoff_zero_one_translated_check() {
    let zero = ComplexPolynomial::zero();
    let one = ComplexPolynomial::constant_f64(1.0, 0.0);
    let (p, rep) = birkhoff_pair(&zero, &one, &int(1), &q(1, 10), &FitOptions::default()).unwrap();
    let d0 = Region::disk(complex_zero(), int(1)).unwrap();
    let n = 10 * rep.validation_density;
    let e0 = oracle_error(&p, &zero, (0.0, 0.0), &d0, n, 200);
    let shifted = p.shifted(&complex(int(-3), int(0)));
    let e1 = oracle_error(&shifted, &one, (0.0, 0.0), &d0, n, 200);
    assert!(e0 < 0.1 && e1 < 0.1, "{e0} {e1}");
}

#[test]
fn translation_equivariance() {
    let p1 = ComplexPolynomial::from_monomials(&[complex(int(0), int(0)), complex(int(1), int(0))]);
    let t = PiecewiseTarget::new(vec![
        Piece::new(unit_square(0, 0), ComplexPolynomial::zero()),
        Piece::new(unit_square(3, 0), p1),
    ])
    .unwrap();
    let w = complex(ratio(5, 2), ratio(-7, 3));
    let opts = FitOptions::default();
    let (a, ra) = fit_polynomial(&t, &q(1, 10), &opts).unwrap();
    let (b, rb) = fit_polynomial(&t.translated(&w), &q(1, 10), &opts).unwrap();
    assert_eq!(ra.degree, rb.degree);
    assert_eq!(b.center(), &(a.center() + &w));
    let shifted = a.shifted(&w);
    for (x, y) in [(2.5, -2.3), (5.4, -1.9), (3.0, -2.0)] {
        assert!((shifted.eval_f64(x, y) - b.eval_f64(x, y)).norm() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn global_polynomial_is_idempotent(
        c0 in -5i64..5, c1 in -5i64..5, c2 in -5i64..5,
        sx in -4i64..4, sy in -4i64..4,
    ) {
        let p = ComplexPolynomial::from_monomials(&[
            complex(int(c0), int(1)),
            complex(int(c1), int(0)),
            complex(int(0), int(c2)),
        ]);
        let shift = complex(int(sx), int(sy));
        let base = p.shifted(&complex(-int(sx), -int(sy)));
        let t = PiecewiseTarget::new(vec![
            Piece::new(unit_square(0, 0), p.clone()),
            Piece::with_shift(unit_square(4, 1), base, shift),
        ]).unwrap();
        let (f, rep) = fit_polynomial(&t, &q(1, 100), &FitOptions::default()).unwrap();
        prop_assert_eq!(rep.achieved_eps, 0.0);
        prop_assert_eq!(f, p);
    }

    #[test]
    fn certified_error_holds_on_oracle(cx in 3i64..6, cy in -2i64..3) {
        let b = unit_square(cx, cy);
        let (p, rep) = separating_polynomial(&[unit_square(0, 0)], &[b.clone()], &q(1, 5), &FitOptions::default()).unwrap();
        let e = oracle_error(&p, &ComplexPolynomial::constant_f64(1.0, 0.0), (0.0, 0.0), &b, 10 * rep.validation_density, 80);
        prop_assert!(e < 0.2);
    }
}
