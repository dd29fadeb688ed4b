use anyonrng_core::bound::sdp::SdpOptions;
use anyonrng_core::bound::{
    build_fcurve, build_moment_problem, f_of_l, guessing_probability, nosignalling_max, FCurveTable, HierarchyLevel,
    NpaOptions, NsScenario,
};
use anyonrng_core::Error;

fn p_star(level: HierarchyLevel, l: f64, abc: [u8; 3], xyz: [u8; 3]) -> f64 {
    build_moment_problem(level, l, abc, xyz).unwrap().solve(&SdpOptions::default()).unwrap().p_star
}

#[test]
fn hierarchy_levels_tighten() {
    for (l, abc, xyz) in [(3.5, [0, 0, 0], [0, 0, 0]), (3.0, [1, 0, 1], [0, 1, 1]), (3.9, [0, 1, 1], [1, 1, 0])] {
        let ab = p_star(HierarchyLevel::OnePlusAb, l, abc, xyz);
        let pairs = p_star(HierarchyLevel::OnePlusPairs, l, abc, xyz);
        let two = p_star(HierarchyLevel::Two, l, abc, xyz);
        assert!(two <= pairs + 1e-6 && pairs <= ab + 1e-6, "L = {l}: {two} {pairs} {ab}");
    }
}

#[test]
fn relaxation_contains_the_ghz_behaviour() {
    // GHZ with X/Y readout puts 1/4 on each parity-allowed outcome of a
    // MABK setting, so the bound cannot fall below 1/4 at L = 4.
    for level in [HierarchyLevel::OnePlusAb, HierarchyLevel::OnePlusPairs, HierarchyLevel::Two] {
        assert!(p_star(level, 4.0, [0, 0, 0], [0, 0, 0]) >= 0.25 - 1e-6);
    }
}

#[test]
fn classical_value_allows_certainty() {
    let g = guessing_probability(2.0, &NpaOptions::default()).unwrap();
    assert!((g.p_star - 1.0).abs() < 1e-5);
    assert_eq!(f_of_l(2.0, &NpaOptions::default()).unwrap(), 0.0);
    assert_eq!(f_of_l(1.0, &NpaOptions::default()).unwrap(), 0.0);
}

#[test]
fn beyond_quantum_maximum_is_infeasible() {
    assert!(matches!(guessing_probability(4.5, &NpaOptions::default()), Err(Error::Solver(_))));
    assert!(nosignalling_max(4.5, NsScenario::MabkSettings).is_err());
}

#[test]
fn nosignalling_dominates_quantum() {
    for l in [2.5, 3.0, 3.5, 4.0] {
        let ns = nosignalling_max(l, NsScenario::MabkSettings).unwrap().value;
        let q = guessing_probability(l, &NpaOptions::default()).unwrap().p_star;
        assert!(ns >= q - 1e-6, "L = {l}: NS {ns} < NPA {q}");
    }
    let all = nosignalling_max(4.0, NsScenario::AllInputs).unwrap();
    assert!((all.value - 0.5).abs() < 1e-9);
}

#[test]
fn deduplication_matches_full_sweep() {
    for level in [HierarchyLevel::OnePlusAb, HierarchyLevel::OnePlusPairs] {
        for l in [2.7, 3.6] {
            let full = guessing_probability(l, &NpaOptions { level, ..NpaOptions::default() }).unwrap();
            let dedup = guessing_probability(l, &NpaOptions { level, deduplicate: true, ..NpaOptions::default() }).unwrap();
            assert!((full.p_star - dedup.p_star).abs() < 1e-6);
            for (a, b) in full.values.iter().zip(&dedup.values) {
                assert!((a.p_star - b.p_star).abs() < 1e-5, "{level} L = {l}: {a:?} vs {b:?}");
            }
        }
    }
}

#[test]
fn fcurve_is_monotone_and_reproducible() {
    let opts = NpaOptions { deduplicate: true, ..NpaOptions::default() };
    let a = build_fcurve(11, &opts).unwrap();
    let b = build_fcurve(11, &opts).unwrap();
    assert_eq!(a, b);
    assert!(a.values().windows(2).all(|w| w[0] <= w[1]));
    assert!(a.max_adjustment < 1e-4);
    let back = FCurveTable::from_csv(&a.to_csv(), a.level).unwrap();
    assert_eq!(back.values(), a.values());
    let json = serde_json::to_string(&a).unwrap();
    assert_eq!(serde_json::from_str::<FCurveTable>(&json).unwrap(), a);
}
