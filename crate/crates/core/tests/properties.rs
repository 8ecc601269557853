mod common;

use gerbe_index::atlas::Atlas;
use gerbe_index::bundle::{BundleTolerances, OverlapSamples, ProjectiveBundleData, Transition};
use gerbe_index::cohomology::{library, smith_normal_form, IntegerMatrix, SimplicialComplex};
use gerbe_index::family::FamilySpec;
use gerbe_index::gerbe::fixtures::suspended_rp2_theta;
use gerbe_index::gerbe::{dd_class, dd_cocycle, gauge_transform, CombinatorialCover, GerbeTolerances, PULift};
use gerbe_index::index_theorem::{degree_integral, perturb_symbol, symbol_class, topological_index_chern};
use gerbe_index::linalg::{self, c, CMat};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, Zero};
use proptest::prelude::*;
use rand_chacha::ChaCha8Rng;

fn same(a: &IntegerMatrix, b: &IntegerMatrix) -> bool {
    a.rows() == b.rows() && a.cols() == b.cols() && (0..a.rows()).all(|i| (0..a.cols()).all(|j| a[(i, j)] == b[(i, j)]))
}

fn gcd_all(xs: impl IntoIterator<Item = BigInt>) -> BigInt {
    xs.into_iter().fold(BigInt::zero(), |g, x| g.gcd(&x))
}

/// gcd of all `k x k` minors, computed by cofactor expansion.
fn determinantal_divisor(m: &IntegerMatrix, k: usize) -> BigInt {
    fn det(m: &IntegerMatrix, rows: &[usize], cols: &[usize]) -> BigInt {
        if rows.len() == 1 {
            return m[(rows[0], cols[0])].clone();
        }
        let mut total = BigInt::zero();
        for (j, _) in cols.iter().enumerate() {
            let sub_cols: Vec<usize> = cols.iter().enumerate().filter(|&(i, _)| i != j).map(|(_, &c)| c).collect();
            let term = &m[(rows[0], cols[j])] * det(m, &rows[1..], &sub_cols);
            total += if j % 2 == 0 { term } else { -term };
        }
        total
    }
    fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return vec![vec![]];
        }
        (k - 1..n)
            .flat_map(|last| {
                subsets(last, k - 1).into_iter().map(move |mut s| {
                    s.push(last);
                    s
                })
            })
            .collect()
    }
    let mut minors = Vec::new();
    for r in subsets(m.rows(), k) {
        for cs in subsets(m.cols(), k) {
            minors.push(det(m, &r, &cs));
        }
    }
    gcd_all(minors)
}

fn matrices() -> impl Strategy<Value = IntegerMatrix> {
    (1usize..=4, 1usize..=4).prop_flat_map(|(r, c)| {
        proptest::collection::vec(-6i64..=6, r * c).prop_map(move |v| IntegerMatrix::from_i64(r, c, &v))
    })
}

fn complexes() -> Vec<SimplicialComplex> {
    vec![
        library::simplex(3),
        library::sphere_s2(),
        library::projective_plane(),
        library::suspended_projective_plane(),
        library::projective_plane().suspension().suspension(),
    ]
}

fn seeded() -> impl Strategy<Value = ChaCha8Rng> {
    any::<u64>().prop_map(common::rng)
}

/// Random projective data on `cover` with the prescribed central phases `mu`.
fn projective_with(
    cover: &CombinatorialCover,
    rank: usize,
    n: u64,
    mu: &[u64],
    rng: &mut ChaCha8Rng,
) -> ProjectiveBundleData {
    let g: Vec<CMat> = (0..cover.set_count()).map(|_| common::random_unitary(rank, rng)).collect();
    let mut e = ProjectiveBundleData::trivial(cover, rank, n);
    for edge in cover.edges() {
        e.set(edge[0], edge[1], Transition::Constant(&g[edge[0]] * g[edge[1]].adjoint()));
    }
    e.rescale_central(mu)
}

fn special_unitary(n: usize, rng: &mut ChaCha8Rng) -> CMat {
    let u = common::random_unitary(n, rng);
    let d = u.determinant();
    u / linalg::C64::from_polar(1.0, d.arg() / n as f64)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn smith_form_factorises_and_matches_minors(m in matrices()) {
        let s = smith_normal_form(&m);
        prop_assert!(same(&(&(&s.u * &s.d) * &s.v), &m));
        prop_assert!(same(&(&s.u * &s.u_inv), &IntegerMatrix::identity(m.rows())));
        prop_assert!(same(&(&s.v * &s.v_inv), &IntegerMatrix::identity(m.cols())));
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                prop_assert!(i == j || s.d[(i, j)].is_zero());
            }
        }
        let f = s.invariant_factors();
        for w in f.windows(2) {
            prop_assert!(w[0].is_positive() && w[1].is_multiple_of(&w[0]));
        }
        let mut prefix = BigInt::from(1);
        for k in 1..=m.rows().min(m.cols()) {
            let dk = determinantal_divisor(&m, k);
            if k <= f.len() {
                prefix *= &f[k - 1];
                prop_assert_eq!(dk, prefix.clone());
            } else {
                prop_assert!(dk.is_zero());
            }
        }
    }

    #[test]
    fn coboundary_squares_to_zero(which in 0usize..5, k in 0usize..3, seed in any::<u64>()) {
        let x = &complexes()[which];
        prop_assume!(x.count(k + 2) > 0);
        let mut rng = common::rng(seed);
        let cochain: Vec<BigInt> = (0..x.count(k)).map(|_| BigInt::from(rand::Rng::gen_range(&mut rng, -9i64..=9))).collect();
        let dd = x.coboundary(k + 1, &x.coboundary(k, &cochain));
        prop_assert!(dd.iter().all(Zero::is_zero));
    }

    #[test]
    fn dd_class_is_gauge_invariant(multiple in 0u64..4, seed in any::<u64>()) {
        let (cover, theta) = suspended_rp2_theta();
        let mut rng = common::rng(seed);
        let scaled = gerbe_index::gerbe::GerbeCocycle {
            n: theta.n,
            values: theta.values.iter().map(|v| (v * multiple) % theta.n).collect(),
        };
        let mu: Vec<u64> = cover.edges().iter().map(|_| rand::Rng::gen_range(&mut rng, 0..theta.n)).collect();
        let before = dd_class(&cover, &scaled).unwrap();
        let after = dd_class(&cover, &gauge_transform(&cover, &scaled, &mu)).unwrap();
        prop_assert_eq!(&before.coordinates.torsion, &after.coordinates.torsion);
        prop_assert_eq!(before.is_zero(), multiple % 2 == 0);
    }

    #[test]
    fn global_lifts_give_the_zero_class(n in 2usize..4, seed in any::<u64>()) {
        let cover = CombinatorialCover::new(library::suspended_projective_plane());
        let mut rng = common::rng(seed);
        let g: Vec<CMat> = (0..cover.set_count()).map(|_| special_unitary(n, &mut rng)).collect();
        let mut lift = PULift::new(n);
        for e in cover.edges() {
            lift.set(e[0], e[1], &g[e[0]] * g[e[1]].adjoint());
        }
        let mu: Vec<u64> = cover.edges().iter().map(|_| rand::Rng::gen_range(&mut rng, 0..n as u64)).collect();
        let theta = dd_cocycle(&cover, &lift.rescale_central(&cover, &mu), &GerbeTolerances::default()).unwrap();
        prop_assert!(dd_class(&cover, &theta).unwrap().is_zero());
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn sums_and_powers_of_random_data_validate(which in 0usize..4, n in 2u64..5, r1 in 1usize..3, r2 in 1usize..3, mut rng in seeded()) {
        let cover = &common::covers()[which];
        let (samples, tol) = (OverlapSamples::none(), BundleTolerances::default());
        let mu: Vec<u64> = cover.edges().iter().map(|_| rand::Rng::gen_range(&mut rng, 0..n)).collect();
        let e = projective_with(cover, r1, n, &mu, &mut rng);
        let f = projective_with(cover, r2, n, &mu, &mut rng);
        let sum = e.direct_sum(&f).unwrap();
        prop_assert_eq!(sum.rank, r1 + r2);
        prop_assert_eq!(&sum.twist, &e.twist);
        sum.validate(&samples, &tol).unwrap();
        let d = e.tensor_power_descend(n, &samples, &tol).unwrap();
        prop_assert!(d.0.twist.is_zero());
        prop_assert_eq!(d.0.rank, r1.pow(n as u32));
        d.validate(&samples, &tol).unwrap();
    }

    #[test]
    fn conjugated_data_is_witness_equivalent(which in 0usize..4, rank in 1usize..4, mut rng in seeded()) {
        let cover = &common::covers()[which];
        let (samples, tol) = (OverlapSamples::none(), BundleTolerances::default());
        let e = common::random_projective(cover, rank, 3, &mut rng);
        let h: Vec<CMat> = (0..cover.set_count()).map(|_| common::random_unitary(rank, &mut rng)).collect();
        let mut f = e.clone();
        for edge in cover.edges() {
            let (a, b) = (edge[0], edge[1]);
            let Transition::Constant(q) = e.transition(a, b).unwrap() else { unreachable!() };
            f.set(a, b, Transition::Constant(&h[a] * q * h[b].adjoint()));
        }
        f.validate(&samples, &tol).unwrap();
        let witness: Vec<Transition> = h.iter().cloned().map(Transition::Constant).collect();
        prop_assert!(e.check_equivalence_witness(&f, &witness, &samples, &tol).unwrap());
        let mut wrong = witness.clone();
        let Transition::Constant(w0) = &witness[0] else { unreachable!() };
        wrong[0] = Transition::Constant(w0 * linalg::C64::from_polar(1.0, 0.3) + linalg::identity(rank) * c(0.05, 0.0));
        prop_assert!(!e.check_equivalence_witness(&f, &wrong, &samples, &tol).unwrap());
    }
}

fn topological_degree(spec: &FamilySpec, atlas: &Atlas) -> f64 {
    let topo = topological_index_chern(&symbol_class(spec, atlas).unwrap(), atlas).unwrap();
    degree_integral(&topo, atlas, 2).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn adjoint_negates_the_index(winding in 1usize..3) {
        let atlas = Atlas::sphere_two_patch(24);
        let spec = FamilySpec::toeplitz_clutching(&atlas, 6, winding, false);
        let a = topological_degree(&spec, &atlas);
        let b = topological_degree(&spec.adjoint(), &atlas);
        prop_assert!((a + b).abs() < 1e-6, "{} vs {}", a, b);
        prop_assert!((a.abs() - winding as f64).abs() < 5e-3, "{}", a);
    }

    #[test]
    fn small_symbol_deformations_keep_the_index(eps in 0.0f64..0.3, re in -1.0f64..1.0, im in -1.0f64..1.0) {
        let atlas = Atlas::sphere_two_patch(24);
        let spec = FamilySpec::toeplitz_clutching(&atlas, 6, 1, false);
        let delta = CMat::from_fn(2, 2, |i, j| if i == j { c(re, im) } else { c(im, -re) * 0.5 });
        let base = topological_degree(&spec, &atlas);
        let moved = topological_degree(&perturb_symbol(&spec, eps, delta), &atlas);
        prop_assert!((base - moved).abs() < 5e-3, "{} vs {}", base, moved);
    }
}
