mod common;

use std::collections::HashMap;

use proptest::prelude::*;

use wmdgcn::corpus::Label;
use wmdgcn::metrics::{confusion, prf1, roc_auc};

use common::mann_whitney_auc;

fn maps(cases: &[(u8, bool)]) -> (Vec<String>, HashMap<String, f64>, HashMap<String, Label>) {
    let ids: Vec<String> = (0..cases.len()).map(|i| format!("d{i}")).collect();
    let scores = ids.iter().zip(cases).map(|(id, c)| (id.clone(), c.0 as f64 / 10.0)).collect();
    let truth = ids
        .iter()
        .zip(cases)
        .map(|(id, c)| (id.clone(), if c.1 { Label::Fake } else { Label::Real }))
        .collect();
    (ids, scores, truth)
}

proptest! {
    #[test]
    fn auc_equals_mann_whitney(cases in prop::collection::vec((0u8..=10, any::<bool>()), 2..60)) {
        prop_assume!(cases.iter().any(|c| c.1) && cases.iter().any(|c| !c.1));
        let (ids, scores, truth) = maps(&cases);
        let roc = roc_auc(&scores, &truth, &ids).unwrap();
        let pos: Vec<f64> = cases.iter().filter(|c| c.1).map(|c| c.0 as f64 / 10.0).collect();
        let neg: Vec<f64> = cases.iter().filter(|c| !c.1).map(|c| c.0 as f64 / 10.0).collect();
        prop_assert!((roc.auc - mann_whitney_auc(&pos, &neg)).abs() <= 1e-12);
        prop_assert_eq!(roc.points.first(), Some(&(0.0, 0.0)));
        prop_assert_eq!(roc.points.last(), Some(&(1.0, 1.0)));
        prop_assert!(roc.points.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1));
    }

    #[test]
    fn scores_are_consistent_with_counts(cases in prop::collection::vec((any::<bool>(), any::<bool>()), 1..80)) {
        let ids: Vec<String> = (0..cases.len()).map(|i| format!("d{i}")).collect();
        let lab = |b: bool| if b { Label::Fake } else { Label::Real };
        let preds = ids.iter().zip(&cases).map(|(id, c)| (id.clone(), lab(c.0))).collect();
        let truth = ids.iter().zip(&cases).map(|(id, c)| (id.clone(), lab(c.1))).collect();
        let counts = confusion(&preds, &truth, &ids).unwrap();
        prop_assert_eq!(counts.total(), cases.len());
        let s = prf1(&counts);
        let hits = cases.iter().filter(|c| c.0 == c.1).count();
        prop_assert!((s.accuracy - hits as f64 / cases.len() as f64).abs() <= 1e-15);
        for v in [s.precision, s.recall, s.f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        // With no true positives F1 is 0/0 even when precision and recall exist.
        prop_assert_eq!(s.zero_division, counts.tp == 0);
    }
}
