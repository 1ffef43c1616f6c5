use paracut_core::decompose::{decompose_grid, validate, ChainDecomposition};
use paracut_core::generate::random_grid;
use paracut_core::graph::Connectivity;
use paracut_core::tv1d::Chain;
use proptest::prelude::*;

proptest! {
    #[test]
    fn grid_decompositions_are_valid(
        conn in prop_oneof![Just(Connectivity::Grid2D4), Just(Connectivity::Grid2D8), Just(Connectivity::Grid3D6)],
        a in 1usize..7, b in 1usize..7, c in 1usize..4,
        seed in any::<u64>(),
    ) {
        let dims = if conn.ndim() == 2 { vec![a, b] } else { vec![a.min(4), b.min(4), c] };
        let g = random_grid(&dims, conn, seed).unwrap();
        let dec = decompose_grid(&g).unwrap();
        let report = validate(&dec, g.cut());
        prop_assert!(report.is_valid(), "{:?}", report.diagnostics);
        let expected_r = match conn { Connectivity::Grid2D4 => 2, Connectivity::Grid2D8 => 4, Connectivity::Grid3D6 => 3 };
        prop_assert_eq!(dec.r(), expected_r);
        let x: Vec<f64> = (0..g.n()).map(|i| ((i * 7919 + seed as usize) % 13) as f64 - 6.0).collect();
        let direct = g.tv_value(&x).unwrap();
        prop_assert!((dec.tv_value(&x) - direct).abs() <= 1e-10 * direct.abs().max(1.0));
    }
}

#[test]
fn missing_edge_is_reported() {
    let g = random_grid(&[3, 3], Connectivity::Grid2D4, 1).unwrap();
    let dec = decompose_grid(&g).unwrap();
    let mut classes = dec.to_chains();
    let victim = classes[0].remove(0);
    assert!(victim.len() >= 2);
    let broken = ChainDecomposition::from_chains(9, classes).unwrap();
    assert!(!validate(&broken, g.cut()).is_valid());
}

#[test]
fn wrong_weight_is_reported() {
    let g = random_grid(&[3, 3], Connectivity::Grid2D4, 2).unwrap();
    let dec = decompose_grid(&g).unwrap();
    let mut classes = dec.to_chains();
    let c = &classes[1][0];
    let mut weights = c.weights.clone();
    weights[0] += 0.5;
    classes[1][0] = Chain::new(c.nodes.clone(), weights).unwrap();
    let broken = ChainDecomposition::from_chains(9, classes).unwrap();
    assert!(!validate(&broken, g.cut()).is_valid());
}
