use std::collections::BTreeSet;

use euc_core::integrity::{check_inconsistent_formulas, Severity};
use euc_testkit::grid::{inconsistency_oracle, planted_grid, RunOrientation};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn inconsistent_formula_cells_match_oracle(seed in any::<u64>(), deviants in 0usize..=3) {
        let grid = planted_grid(seed, deviants);
        let expected = inconsistency_oracle(&grid);
        let findings = check_inconsistent_formulas(&grid.workbook);

        let flagged: BTreeSet<_> = findings
            .iter()
            .filter(|f| f.severity == Severity::High)
            .map(|f| f.addr.unwrap())
            .collect();
        prop_assert_eq!(&flagged, &expected.flagged);
        let high = findings.iter().filter(|f| f.severity == Severity::High).count();
        prop_assert_eq!(high, flagged.len(), "one finding per deviant cell");

        let info: BTreeSet<String> = findings
            .iter()
            .filter(|f| f.severity == Severity::Info)
            .map(|f| f.message.clone())
            .collect();
        let expected_info: BTreeSet<String> = expected
            .heterogeneous
            .iter()
            .map(|(orientation, first, last)| {
                let n = match orientation {
                    RunOrientation::Row => last.col - first.col + 1,
                    RunOrientation::Column => last.row - first.row + 1,
                };
                format!(
                    "heterogeneous {} region {first}:{last} ({n} cells, no majority formula)",
                    orientation.label()
                )
            })
            .collect();
        prop_assert_eq!(info, expected_info);
    }
}

#[test]
fn clean_grids_have_no_high_findings() {
    for seed in 0..200 {
        let grid = planted_grid(seed, 0);
        assert!(check_inconsistent_formulas(&grid.workbook)
            .iter()
            .all(|f| f.severity != Severity::High));
    }
}

#[test]
fn generator_exercises_both_verdicts() {
    let (mut flagged, mut heterogeneous) = (0, 0);
    for seed in 0..300 {
        let verdict = inconsistency_oracle(&planted_grid(seed, 2));
        flagged += usize::from(!verdict.flagged.is_empty());
        heterogeneous += usize::from(!verdict.heterogeneous.is_empty());
    }
    assert!(flagged > 100, "{flagged}");
    assert!(heterogeneous > 5, "{heterogeneous}");
}
