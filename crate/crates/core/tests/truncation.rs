use gerbe_index::atlas::Atlas;
use gerbe_index::family::FamilySpec;
use gerbe_index::index_theorem::{analytic_side, degree_integral};

#[test]
fn index_is_stable_under_truncation() {
    let atlas = Atlas::sphere_two_patch(24);
    let degrees: Vec<(usize, i64, f64)> = [12, 20]
        .iter()
        .map(|&k| {
            let side = analytic_side(&FamilySpec::toeplitz_clutching(&atlas, k, 1, false), &atlas).unwrap();
            (side.index.stabilizer.rank, side.index.virtual_rank(), degree_integral(&side.chern, &atlas, 2).unwrap())
        })
        .collect();
    assert_eq!(degrees[0].0, degrees[1].0);
    assert_eq!(degrees[0].1, -1);
    assert_eq!(degrees[0].1, degrees[1].1);
    assert!((degrees[0].2 - degrees[1].2).abs() < 1e-8, "{degrees:?}");
    assert!((degrees[0].2 - 1.0).abs() < 1e-2, "{degrees:?}");
}
