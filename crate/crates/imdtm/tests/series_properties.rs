//! Property tests over the series algebra: ring identities to truncation,
//! inverse-pair round trips, and trigonometric structure.
//!
//! Identities hold exactly in real arithmetic; in f64 the residual is
//! bounded by rounding of the convolution sums, so every tolerance is taken
//! relative to the accumulated term magnitude (the "mass") of the
//! expressions being compared, not just the entry values. For ordinary
//! tables the mass is O(1) and the checks are effectively absolute.

use imdtm::series::Series2;
use proptest::prelude::*;

fn small_table(k_max: usize, h_max: usize) -> impl Strategy<Value = Series2> {
    prop::collection::vec(-2.0f64..2.0, (k_max + 1) * (h_max + 1)).prop_map(move |v| {
        let mut t = Series2::zeros(k_max, h_max);
        for k in 0..=k_max {
            for h in 0..=h_max {
                t.set(k, h, v[k * (h_max + 1) + h]);
            }
        }
        t
    })
}

/// Same table, but with the leading coefficient pushed away from zero so
/// division/logarithm recurrences stay well-conditioned.
fn unit_lead_table(k_max: usize, h_max: usize) -> impl Strategy<Value = Series2> {
    (small_table(k_max, h_max), 0.5f64..2.0).prop_map(|(mut t, lead)| {
        t.set(0, 0, lead);
        t
    })
}

fn max_abs(t: &Series2) -> f64 {
    let mut m = 0.0f64;
    for k in 0..=t.k_max() {
        for h in 0..=t.h_max() {
            m = m.max(t.get(k, h).abs());
        }
    }
    m
}

/// Upper bound on the term mass of any convolution entry of the pair:
/// `|Σ a_i b_{k-i}| ≤ Σ|a| · max|b|`.
fn conv_mass(a: &Series2, b: &Series2) -> f64 {
    let sum_a: f64 = (0..=a.k_max())
        .flat_map(|k| (0..=a.h_max()).map(move |h| (k, h)))
        .map(|(k, h)| a.get(k, h).abs())
        .sum();
    sum_a * max_abs(b)
}

fn assert_tables_close(a: &Series2, b: &Series2, tol: f64, mass: f64) {
    let scale = mass.max(1.0);
    for k in 0..=a.k_max() {
        for h in 0..=a.h_max() {
            let (x, y) = (a.get(k, h), b.get(k, h));
            assert!(
                (x - y).abs() <= tol * scale.max(x.abs()).max(y.abs()),
                "({k},{h}): {x} vs {y} (mass {mass:.2e})"
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn multiplication_commutes(a in small_table(3, 4), b in small_table(3, 4)) {
        let mass = conv_mass(&a, &b);
        assert_tables_close(&a.mul(&b).unwrap(), &b.mul(&a).unwrap(), 1e-13, mass);
    }

    #[test]
    fn multiplication_associates(
        a in small_table(2, 3),
        b in small_table(2, 3),
        c in small_table(2, 3),
    ) {
        let left = a.mul(&b).unwrap().mul(&c).unwrap();
        let right = a.mul(&b.mul(&c).unwrap()).unwrap();
        let mass = conv_mass(&a.mul(&b).unwrap(), &c) + conv_mass(&a, &b.mul(&c).unwrap());
        assert_tables_close(&left, &right, 1e-13, mass);
    }

    #[test]
    fn multiplication_distributes(
        a in small_table(2, 3),
        b in small_table(2, 3),
        c in small_table(2, 3),
    ) {
        let left = a.mul(&b.add(&c).unwrap()).unwrap();
        let right = a.mul(&b).unwrap().add(&a.mul(&c).unwrap()).unwrap();
        let mass = conv_mass(&a, &b) + conv_mass(&a, &c);
        assert_tables_close(&left, &right, 1e-13, mass);
    }

    #[test]
    fn derivative_obeys_product_rule(a in small_table(2, 4), b in small_table(2, 4)) {
        // ∂x(a·b) = ∂x(a)·b + a·∂x(b), compared on the shrunken bounds
        let lhs = a.mul(&b).unwrap().shift_deriv(0, 1).unwrap();
        let (ka, ha) = (lhs.k_max(), lhs.h_max());
        let da = a.shift_deriv(0, 1).unwrap();
        let db = b.shift_deriv(0, 1).unwrap();
        let rhs = da
            .mul(&b.truncated(ka, ha))
            .unwrap()
            .add(&a.truncated(ka, ha).mul(&db).unwrap())
            .unwrap();
        // the shift multiplies entries by at most h_max
        let mass = conv_mass(&a, &b) * (a.h_max() as f64 + 1.0);
        assert_tables_close(&lhs, &rhs, 1e-13, mass);
    }

    #[test]
    fn division_round_trips(a in small_table(3, 3), b in unit_lead_table(3, 3)) {
        let q = a.div(&b).unwrap();
        let mass = conv_mass(&q, &b);
        assert_tables_close(&q.mul(&b).unwrap(), &a, 1e-12, mass);
    }

    #[test]
    fn log_inverts_exp(a in small_table(3, 3)) {
        let e = a.exp();
        let mass = conv_mass(&e, &e);
        assert_tables_close(&e.ln().unwrap(), &a, 1e-12, mass);
    }

    #[test]
    fn square_root_squares_back(a in unit_lead_table(3, 3)) {
        let r = a.sqrt().unwrap();
        let mass = conv_mass(&r, &r);
        assert_tables_close(&r.mul(&r).unwrap(), &a, 1e-12, mass);
    }

    #[test]
    fn integer_power_matches_self_product(a in unit_lead_table(3, 3)) {
        let mass = conv_mass(&a, &a);
        assert_tables_close(&a.powf(2.0).unwrap(), &a.mul(&a).unwrap(), 1e-12, mass);
    }

    #[test]
    fn sin_cos_pythagorean_identity(a in small_table(4, 4)) {
        let (s, c) = a.sin_cos();
        let sum = s.mul(&s).unwrap().add(&c.mul(&c).unwrap()).unwrap();
        let mass = (conv_mass(&s, &s) + conv_mass(&c, &c)).max(1.0);
        for k in 0..=sum.k_max() {
            for h in 0..=sum.h_max() {
                let expect = if k == 0 && h == 0 { 1.0 } else { 0.0 };
                prop_assert!((sum.get(k, h) - expect).abs() <= 1e-13 * mass,
                    "sin²+cos² at ({k},{h}) = {} (mass {mass:.2e})", sum.get(k, h));
            }
        }
    }
}
