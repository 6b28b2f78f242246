use elasticrank::fairness::{
    classify_groups, ef_metric, entropy_fairness, fairness_general, rich_poor_threshold, transfer_ratio,
    EfConfig, FairnessParams, Side, Wealth,
};
use elasticrank::rerank::curve_distance;
use elasticrank::UtilityVector;
use proptest::prelude::*;

fn utilities(max_groups: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..10.0, 2..=max_groups)
}

fn tax_base() -> impl Strategy<Value = f64> {
    prop_oneof![-4.0f64..-0.05, 0.05f64..0.95, 1.05f64..4.0]
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #[test]
    fn scale_invariant(v in utilities(8), t in tax_base(), c in 1e-3f64..1e3) {
        let p = FairnessParams::new(t);
        let a = fairness_general(&UtilityVector::new(v.clone()), &p).unwrap();
        let b = fairness_general(&UtilityVector::new(v).scaled(c), &p).unwrap();
        prop_assert!(rel_close(a, b, 1e-12));
    }

    #[test]
    fn permutation_symmetric(mut v in utilities(8), t in tax_base()) {
        let p = FairnessParams::new(t);
        let a = fairness_general(&UtilityVector::new(v.clone()), &p).unwrap();
        v.reverse();
        let b = fairness_general(&UtilityVector::new(v), &p).unwrap();
        prop_assert!(rel_close(a, b, 1e-12));
    }

    #[test]
    fn uniform_is_the_optimum(v in utilities(8), t in tax_base()) {
        // |G| on the left branch, -|G| on the right; any spread does worse.
        let g = v.len() as f64;
        let f = fairness_general(&UtilityVector::new(v), &FairnessParams::new(t)).unwrap();
        if t < 1.0 {
            prop_assert!(f > 0.0 && f <= g * (1.0 + 1e-12));
        } else {
            prop_assert!(f <= -g * (1.0 - 1e-12));
        }
    }

    #[test]
    fn one_sided_limits_match_nearby_values(v in utilities(6)) {
        let uv = UtilityVector::new(v);
        let below = fairness_general(&uv, &FairnessParams::one_sided(1.0, Side::Below)).unwrap();
        let above = fairness_general(&uv, &FairnessParams::one_sided(1.0, Side::Above)).unwrap();
        let near_below = fairness_general(&uv, &FairnessParams::new(1.0 - 1e-9)).unwrap();
        let near_above = fairness_general(&uv, &FairnessParams::new(1.0 + 1e-9)).unwrap();
        prop_assert!((below - near_below).abs() < 1e-6 * below.abs());
        prop_assert!((above - near_above).abs() < 1e-6 * above.abs());
    }

    #[test]
    fn entropy_limit_from_both_sides(v in utilities(8)) {
        let uv = UtilityVector::new(v);
        let e = entropy_fairness(&uv).unwrap().exp();
        for t in [-1e-6, 1e-6] {
            let f = fairness_general(&uv, &FairnessParams::new(t)).unwrap();
            prop_assert!((f - e).abs() < 1e-5);
        }
    }

    #[test]
    fn gamma_forms_agree(v in utilities(10), t in 0.1f64..4.0) {
        let d = transfer_ratio(&UtilityVector::new(v), &FairnessParams::new(t)).unwrap();
        prop_assert!((d.gamma - d.gamma_closed_form).abs() < 1e-12);
        prop_assert!(d.gamma > 0.0 && d.gamma < 1.0);
    }

    #[test]
    fn threshold_separates_derivative_sign(v in utilities(6), t in tax_base()) {
        let uv = UtilityVector::new(v.clone());
        let p = FairnessParams::new(t);
        let theta = rich_poor_threshold(&uv, &p).unwrap();
        let classes = classify_groups(&uv, &p).unwrap();
        for g in 0..v.len() {
            // skip groups sitting too close to the threshold for a finite difference
            if (v[g] - theta).abs() < 1e-3 * theta {
                continue;
            }
            let h = 1e-6 * v[g];
            let mut up = v.clone();
            up[g] += h;
            let mut down = v.clone();
            down[g] -= h;
            let slope = fairness_general(&UtilityVector::new(up), &p).unwrap()
                - fairness_general(&UtilityVector::new(down), &p).unwrap();
            match classes[g] {
                Wealth::Rich => prop_assert!(slope < 0.0, "g={g} slope={slope}"),
                Wealth::Poor => prop_assert!(slope > 0.0, "g={g} slope={slope}"),
            }
        }
    }

    #[test]
    fn distance_sign_and_pressure(v_g in 0.05f64..10.0, v_a in 0.05f64..10.0, t in tax_base()) {
        let d = curve_distance(v_g, v_a, t).unwrap();
        if (v_g - v_a).abs() > 1e-9 {
            prop_assert_eq!(d > 0.0, v_g < v_a);
        }
        if t > 1.0 && v_g < v_a * (1.0 - 1e-3) {
            // more utility for a poor group lowers its boost
            let h = 1e-6 * v_g;
            let slope = curve_distance(v_g + h, v_a, t).unwrap() - curve_distance(v_g - h, v_a, t).unwrap();
            prop_assert!(slope < 0.0);
        }
    }
}

#[test]
fn more_skew_lowers_ef() {
    let cfg = EfConfig::default();
    let mut last = f64::INFINITY;
    for share in [0.5, 0.6, 0.7, 0.8, 0.9, 0.97] {
        let ef = ef_metric(&UtilityVector::new(vec![share, 1.0 - share]), &cfg).unwrap();
        assert!(ef < last, "share {share}: {ef} >= {last}");
        last = ef;
    }
}
