//! The float simplex must reach the same status and objective as the exact
//! rational one on random bounded programs, including warm re-solves after
//! bound changes and appended rows.

use milp::{BigRational, DualSimplex, LinearProgram, LpScalar, LpStatus, Sense, VarId, VarKind};
use proptest::prelude::*;

#[derive(Clone, Debug)]
struct Spec {
    costs: Vec<i64>,
    uppers: Vec<i64>,
    rows: Vec<(Vec<i64>, u8, i64)>,
}

fn spec() -> impl Strategy<Value = Spec> {
    (2usize..6).prop_flat_map(|n| {
        (
            prop::collection::vec(-5i64..6, n),
            prop::collection::vec(1i64..5, n),
            prop::collection::vec((prop::collection::vec(-3i64..4, n), 0u8..3, -4i64..9), 1..6),
        )
            .prop_map(|(costs, uppers, rows)| Spec { costs, uppers, rows })
    })
}

fn build<T: LpScalar>(s: &Spec) -> LinearProgram<T> {
    let mut lp = LinearProgram::new();
    let vars: Vec<VarId> = s
        .costs
        .iter()
        .zip(&s.uppers)
        .enumerate()
        .map(|(i, (c, u))| {
            lp.add_var(
                format!("x{i}"),
                T::zero(),
                Some(T::from_i64_lossless(*u)),
                T::from_i64_lossless(*c),
                VarKind::Continuous,
            )
        })
        .collect();
    for (k, (coefs, sense, rhs)) in s.rows.iter().enumerate() {
        let sense = [Sense::Le, Sense::Ge, Sense::Eq][*sense as usize];
        lp.add_row(
            format!("r{k}"),
            vars.iter().zip(coefs).map(|(v, a)| (*v, T::from_i64_lossless(*a))).collect(),
            sense,
            T::from_i64_lossless(*rhs),
        );
    }
    lp
}

fn agree(float: &mut DualSimplex<f64>, exact: &mut DualSimplex<BigRational>) -> Result<(), TestCaseError> {
    let fs = float.solve();
    let es = exact.solve();
    prop_assert_eq!(fs, es);
    if fs == LpStatus::Optimal {
        let fo = float.objective();
        let eo = LpScalar::to_f64(&exact.objective());
        prop_assert!((fo - eo).abs() < 1e-7, "{} vs {}", fo, eo);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn statuses_and_objectives_agree(s in spec(), fix in 0usize..6, extra in prop::collection::vec(-2i64..3, 6)) {
        let lpf = build::<f64>(&s);
        let lpe = build::<BigRational>(&s);
        let mut float = DualSimplex::new(&lpf);
        let mut exact = DualSimplex::new(&lpe);
        agree(&mut float, &mut exact)?;

        let j = VarId(fix % s.costs.len());
        float.set_bounds(j, 0.0, Some(0.0));
        exact.set_bounds(j, BigRational::from_integer(0.into()), Some(BigRational::from_integer(0.into())));
        agree(&mut float, &mut exact)?;

        let n = s.costs.len();
        let terms_f: Vec<(VarId, f64)> = (0..n).map(|i| (VarId(i), extra[i] as f64)).collect();
        let terms_e: Vec<(VarId, BigRational)> = (0..n).map(|i| (VarId(i), BigRational::from_integer(extra[i].into()))).collect();
        float.add_row(&terms_f, Sense::Le, 1.0);
        exact.add_row(&terms_e, Sense::Le, BigRational::from_integer(1.into()));
        agree(&mut float, &mut exact)?;

        float.set_bounds(j, 0.0, Some(s.uppers[j.0] as f64));
        exact.set_bounds(j, BigRational::from_integer(0.into()), Some(BigRational::from_integer(s.uppers[j.0].into())));
        agree(&mut float, &mut exact)?;
        if float.solve() == LpStatus::Optimal {
            let x = float.primal_values();
            for (v, u) in x.iter().zip(&s.uppers) {
                prop_assert!(*v >= -1e-8 && *v <= *u as f64 + 1e-8);
            }
            for row in &lpf.rows {
                prop_assert!(row.violation(&x) < 1e-7);
            }
        }
    }
}
