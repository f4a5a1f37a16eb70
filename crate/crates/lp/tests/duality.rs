use proptest::prelude::*;
use smoothmech_lp::{LinearProgram, Relation, Sense, Solution};

fn packing(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> LinearProgram {
    let mut lp = LinearProgram::new(c.len(), Sense::Maximize);
    lp.objective = c.to_vec();
    for (row, rhs) in a.iter().zip(b) {
        lp.add_dense_row(row, Relation::Le, *rhs);
    }
    lp
}

fn covering_dual(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> LinearProgram {
    let mut lp = LinearProgram::new(b.len(), Sense::Minimize);
    lp.objective = b.to_vec();
    for (j, cj) in c.iter().enumerate() {
        let col: Vec<f64> = a.iter().map(|row| row[j]).collect();
        lp.add_dense_row(&col, Relation::Ge, *cj);
    }
    lp
}

fn instance() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>, Vec<f64>)> {
    (1usize..6, 1usize..6).prop_flat_map(|(m, n)| {
        (
            proptest::collection::vec(proptest::collection::vec(0.05f64..3.0, n), m),
            proptest::collection::vec(0.1f64..5.0, m),
            proptest::collection::vec(-1.0f64..3.0, n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn dual_point_bounds_primal((a, b, c) in instance()) {
        let primal = packing(&a, &b, &c).solve().unwrap();
        let dual = covering_dual(&a, &b, &c).solve().unwrap();
        let (Solution::Optimal { value: pv, point: x }, Solution::Optimal { value: dv, point: y }) = (primal, dual) else {
            panic!("positive packing LPs are bounded and feasible");
        };
        // weak duality through the explicit points: c.x <= y^T A x <= y.b
        let yax: f64 = a.iter().zip(&y).map(|(row, yi)| yi * row.iter().zip(&x).map(|(r, xj)| r * xj).sum::<f64>()).sum();
        prop_assert!(pv <= yax + 1e-6);
        prop_assert!(yax <= dv + 1e-6);
        prop_assert!((pv - dv).abs() < 1e-6);
    }

    #[test]
    fn equality_form_matches_slack_form((a, b, c) in instance()) {
        let base = packing(&a, &b, &c).solve().unwrap().value().unwrap();
        let n = c.len();
        let m = b.len();
        let mut lp = LinearProgram::new(n + m, Sense::Maximize);
        lp.objective[..n].copy_from_slice(&c);
        for (r, row) in a.iter().enumerate() {
            let mut coeffs: Vec<(usize, f64)> = row.iter().enumerate().map(|(j, v)| (j, *v)).collect();
            coeffs.push((n + r, 1.0));
            lp.add_row(coeffs, Relation::Eq, b[r]);
        }
        let v = lp.solve().unwrap().value().unwrap();
        prop_assert!((v - base).abs() < 1e-7);
    }
}
