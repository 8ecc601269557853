#![allow(dead_code)]

use gerbe_index::bundle::{ProjectiveBundleData, Transition};
use gerbe_index::cohomology::library;
use gerbe_index::gerbe::CombinatorialCover;
use gerbe_index::linalg::{self, c, CMat};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

/// Haar-ish unitary from the QR factor of a complex Gaussian matrix.
pub fn random_unitary(r: usize, rng: &mut impl Rng) -> CMat {
    let g = CMat::from_fn(r, r, |_, _| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
    g.qr().q()
}

pub fn covers() -> Vec<CombinatorialCover> {
    vec![
        CombinatorialCover::new(library::simplex(2)),
        CombinatorialCover::new(library::simplex(3)),
        CombinatorialCover::new(library::sphere_s2()),
        CombinatorialCover::new(library::suspended_projective_plane()),
    ]
}

/// `Q_ab = zeta_n^{mu_ab} g_a g_b^{-1}`: valid data with twist `delta mu`.
pub fn random_projective(cover: &CombinatorialCover, rank: usize, n: u64, rng: &mut impl Rng) -> ProjectiveBundleData {
    let g: Vec<CMat> = (0..cover.set_count()).map(|_| random_unitary(rank, rng)).collect();
    let mut e = ProjectiveBundleData::trivial(cover, rank, n);
    for edge in cover.edges() {
        let (a, b) = (edge[0], edge[1]);
        e.set(a, b, Transition::Constant(&g[a] * g[b].adjoint()));
    }
    let mu: Vec<u64> = cover.edges().iter().map(|_| rng.gen_range(0..n)).collect();
    e.rescale_central(&mu)
}

/// Adds `delta` to one entry of one transition.
pub fn perturb(e: &ProjectiveBundleData, rng: &mut impl Rng) -> (ProjectiveBundleData, f64) {
    let edges = e.cover.edges();
    let edge = &edges[rng.gen_range(0..edges.len())];
    let mut out = e.clone();
    let Transition::Constant(mut m) = e.transition(edge[0], edge[1]).unwrap() else { unreachable!() };
    let size = 10f64.powf(rng.gen_range(-3.0..-1.0));
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let (i, j) = (rng.gen_range(0..e.rank), rng.gen_range(0..e.rank));
    m[(i, j)] += linalg::C64::from_polar(size, phase);
    out.set(edge[0], edge[1], Transition::Constant(m));
    (out, size)
}
