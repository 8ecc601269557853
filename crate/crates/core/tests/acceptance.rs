//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines always reach the output.

mod common;

use std::process::Command;
use std::time::{Duration, Instant};

use gerbe_index::atlas::Atlas;
use gerbe_index::bundle::{BundleTolerances, OverlapSamples};
use gerbe_index::chern_weil::{chern_character_form, curvature, integrate_top, monopole, twisted_monopole};
use gerbe_index::cohomology::{bockstein, cohomology_group, library};
use gerbe_index::family::{analytic_index, fixture_unitaries, mixed_stabilizer, untwisting_witness, FamilySpec};
use gerbe_index::gerbe::fixtures::suspended_rp2_theta;
use gerbe_index::index_theorem::{analytic_side, degree_integral, verify_index_theorem, VerificationReport};
use gerbe_index::scenario::{RunOptions, Scenario, BUNDLED};
use gerbe_index::thom::{thom_rr_check, ThomScenario, LEAK_TOLERANCE};
use num_bigint::BigInt;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn torsion_pipeline() -> Outcome {
    let (res, dt) = timed(|| -> Result<String, String> {
        let x = library::suspended_projective_plane();
        let h3 = cohomology_group(&x, 3).map_err(|e| e.to_string())?;
        ensure(h3.torsion == vec![BigInt::from(2)] && h3.free_rank == 0, format!("H^3 = {}", h3.describe()))?;
        let (cover, theta) = suspended_rp2_theta();
        let b = bockstein(&cover.base, &theta.values, theta.n).map_err(|e| e.to_string())?;
        let coords = &b.coordinates.torsion;
        ensure(
            coords.len() == 1 && coords[0] == (BigInt::from(1), BigInt::from(2)),
            format!("bockstein coordinates {coords:?}"),
        )?;
        Ok(format!("H^3 = {}, bockstein = generator", h3.describe()))
    });
    let detail = res?;
    ensure(dt < Duration::from_secs(1), format!("runtime {dt:?}"))?;
    Ok(format!("{detail}, {:.0} ms", dt.as_secs_f64() * 1e3))
}

fn weak_cocycle_law() -> Outcome {
    let (res, dt) = timed(|| -> Result<(usize, usize), String> {
        let mut rng = common::rng(2);
        let covers = common::covers();
        let (samples, tol) = (OverlapSamples::none(), BundleTolerances::default());
        let (mut valid, mut caught) = (0, 0);
        for i in 0..1000 {
            let cover = &covers[i % covers.len()];
            let rank = 1 + i % 3;
            let n = 2 + (i as u64 / 4) % 4;
            let e = common::random_projective(cover, rank, n, &mut rng);
            if e.validate(&samples, &tol).is_ok() {
                valid += 1;
            }
            let (bad, _) = common::perturb(&e, &mut rng);
            if bad.validate(&samples, &tol).is_err() {
                caught += 1;
            }
        }
        Ok((valid, caught))
    });
    let (valid, caught) = res?;
    ensure(valid == 1000 && caught == 1000, format!("{valid}/1000 valid, {caught}/1000 perturbations caught"))?;
    ensure(dt < Duration::from_secs(10), format!("runtime {dt:?}"))?;
    Ok(format!("1000/1000 valid, 1000/1000 perturbations rejected, {:.2} s", dt.as_secs_f64()))
}

fn tensor_power_descent() -> Outcome {
    let mut rng = common::rng(3);
    let (samples, tol) = (OverlapSamples::none(), BundleTolerances::default());
    for (i, cover) in common::covers().iter().enumerate() {
        for n in [2u64, 3] {
            let e = common::random_projective(cover, 2, n, &mut rng);
            let d = e.tensor_power_descend(n, &samples, &tol).map_err(|e| e.to_string())?;
            ensure(d.0.twist.is_zero(), "descended twist nonzero")?;
            d.validate(&samples, &tol).map_err(|e| format!("random fixture {i}, n = {n}: {e}"))?;
        }
    }
    let atlas = Atlas::sphere_three_patch(64);
    let atlas_samples = atlas.overlap_samples();
    let (e, conn) = twisted_monopole(1, &atlas, 2, &[1, 0, 0]);
    ensure(!e.twist.is_zero(), "twisted monopole fixture is untwisted")?;
    let d = e.tensor_power_descend(2, &atlas_samples, &tol).map_err(|e| e.to_string())?;
    d.validate(&atlas_samples, &tol).map_err(|e| e.to_string())?;
    let (plain, _) = monopole(1, &atlas, 1);
    plain.tensor_power_descend(2, &atlas_samples, &tol).map_err(|e| e.to_string())?;
    let descended = integrate_top(
        &chern_character_form(&curvature(&conn.tensor_power(2), &atlas).map_err(|e| e.to_string())?),
        &atlas,
    )
    .map_err(|e| e.to_string())?;
    let power =
        integrate_top(&chern_character_form(&curvature(&conn, &atlas).map_err(|e| e.to_string())?).power(2), &atlas)
            .map_err(|e| e.to_string())?;
    let diff = (descended - power).abs();
    ensure(diff < 1e-4, format!("descended {descended} vs power {power}"))?;
    Ok(format!("strict cocycle on all descents; |Ch(E^2) - Ch(E)^2| = {diff:.2e}"))
}

fn chern_weil_floor() -> Outcome {
    let (res, dt) = timed(|| -> Result<(f64, f64, f64), String> {
        let c1 = |res: usize, analytic: bool| -> Result<f64, String> {
            let atlas = Atlas::sphere_two_patch(res);
            let (_, conn) = monopole(1, &atlas, 1);
            let conn = if analytic { conn } else { conn.without_override() };
            let f = curvature(&conn, &atlas).map_err(|e| e.to_string())?;
            integrate_top(&chern_character_form(&f), &atlas).map_err(|e| e.to_string())
        };
        let exact = c1(64, true)?;
        let e64 = (c1(64, false)? - 1.0).abs();
        let e128 = (c1(128, false)? - 1.0).abs();
        Ok(((exact - 1.0).abs(), e64, e128))
    });
    let (floor, e64, e128) = res?;
    let ratio = e64 / e128;
    ensure(floor < 1e-6, format!("|c1 - 1| = {floor:.2e}"))?;
    ensure((3.5..=4.5).contains(&ratio), format!("error ratio {ratio:.3}"))?;
    ensure(dt < Duration::from_secs(5), format!("runtime {dt:?}"))?;
    Ok(format!("|c1 - 1| = {floor:.2e}, FD error ratio 64/128 = {ratio:.3}, {:.2} s", dt.as_secs_f64()))
}

fn riemann_roch() -> Outcome {
    let mut worst: (f64, f64) = (0.0, 0.0);
    for (k, l) in [(0, 0), (1, 0), (2, 1)] {
        let r = thom_rr_check(&ThomScenario::monopoles(k, l, 32)).map_err(|e| e.to_string())?;
        let oracle = ThomScenario::monopole_oracle(k, l);
        let total = r.total_degree_zero + r.total_top;
        ensure(r.residual < 1e-3, format!("({k},{l}) residual {:.2e}", r.residual))?;
        ensure(r.support_leak < LEAK_TOLERANCE, format!("({k},{l}) leak {:.2e}", r.support_leak))?;
        ensure((total - oracle).abs() < 1e-3, format!("({k},{l}) total {total} vs closed form {oracle}"))?;
        worst = (worst.0.max(r.residual), worst.1.max(r.support_leak));
    }
    Ok(format!("max residual {:.2e}, max support leak {:.2e}", worst.0, worst.1))
}

struct IndexRuns {
    untwisted: Vec<VerificationReport>,
    twisted: Vec<VerificationReport>,
}

fn degree_two(r: &VerificationReport) -> (f64, f64, f64) {
    let d = r.degrees.iter().find(|d| d.degree == 2).expect("degree 2");
    (d.analytic, d.topological, d.residual)
}

fn index_bounds(reports: &[VerificationReport]) -> Result<String, String> {
    let (a, t, r64) = degree_two(&reports[0]);
    let (_, _, r128) = degree_two(&reports[1]);
    ensure(r64 <= 1e-3, format!("64^2 residual {r64:.2e}"))?;
    ensure(r128 < 2.5e-4, format!("128^2 residual {r128:.2e}"))?;
    ensure((a.abs() - 1.0).abs() < 1e-3 && (t.abs() - 1.0).abs() < 1e-3, format!("degrees {a}, {t}"))?;
    Ok(format!("analytic {a:.6}, topological {t:.6}, residual {r64:.2e} (64^2) / {r128:.2e} (128^2)"))
}

fn run_index(spec: impl Fn(&Atlas) -> FamilySpec, sphere3: bool) -> Result<Vec<VerificationReport>, String> {
    [64, 128]
        .iter()
        .map(|&res| {
            let atlas = if sphere3 { Atlas::sphere_three_patch(res) } else { Atlas::sphere_two_patch(res) };
            verify_index_theorem("acceptance", &spec(&atlas), &atlas, 1e-3).map_err(|e| e.to_string())
        })
        .collect()
}

fn index_untwisted(runs: &mut IndexRuns) -> Outcome {
    let (reports, dt) = timed(|| run_index(|a| FamilySpec::toeplitz_clutching(a, 16, 1, false), false));
    runs.untwisted = reports?;
    let detail = index_bounds(&runs.untwisted)?;
    ensure(dt < Duration::from_secs(60), format!("runtime {dt:?}"))?;
    Ok(format!("{detail}, {:.1} s", dt.as_secs_f64()))
}

fn index_twisted(runs: &mut IndexRuns) -> Outcome {
    let mu = [1, 2, 0];
    runs.twisted = run_index(|a| FamilySpec::twisted_bott_toeplitz(a, 16, 3, &mu).0, true)?;
    let detail = index_bounds(&runs.twisted)?;
    let atlas = Atlas::sphere_three_patch(64);
    let samples = atlas.overlap_samples();
    let tol = BundleTolerances::default();
    let (tw, unitaries) = FamilySpec::twisted_bott_toeplitz(&atlas, 16, 3, &mu);
    ensure(!tw.twist().is_zero(), "fixture twist vanishes")?;
    let untw = FamilySpec::toeplitz_clutching(&atlas, 16, 1, false).rescale_central(3, &[0, 0, 0]);
    let it = analytic_index(&tw, &atlas).map_err(|e| e.to_string())?;
    let iu = analytic_index(&untw, &atlas).map_err(|e| e.to_string())?;
    let minus_mu: Vec<u64> = mu.iter().map(|m| (3 - m) % 3).collect();
    let gauged = it.class.plus.rescale_central(&minus_mu);
    let witness = untwisting_witness(&it, &iu, &unitaries, tw.domain_dim, 2);
    let equal =
        gauged.check_equivalence_witness(&iu.class.plus, &witness, &samples, &tol).map_err(|e| e.to_string())?;
    ensure(equal, "gauge witness does not identify the twisted and untwisted index")?;
    let wrong = untwisting_witness(&it, &iu, &fixture_unitaries(4)[1..], tw.domain_dim, 2);
    let fooled = gauged.check_equivalence_witness(&iu.class.plus, &wrong, &samples, &tol).map_err(|e| e.to_string())?;
    ensure(!fooled, "a wrong witness was accepted")?;
    ensure(it.class.minus.rank == iu.class.minus.rank, "stabiliser ranks differ")?;
    Ok(format!("{detail}; witness-equal to the untwisted index"))
}

fn determinant_line(runs: &IndexRuns) -> Outcome {
    let mut worst: f64 = 0.0;
    for (name, reports) in [("untwisted", &runs.untwisted), ("twisted", &runs.twisted)] {
        let r = reports.first().ok_or(format!("{name} index run missing"))?;
        let (_, topo, _) = degree_two(r);
        let diff = (r.det_line.analytic - topo).abs();
        ensure(diff < 1e-3, format!("{name}: c1(det) {} vs {topo}", r.det_line.analytic))?;
        worst = worst.max(diff);
    }
    Ok(format!("max |c1(det) - topological degree 2| = {worst:.2e}"))
}

fn stabilization_independence() -> Outcome {
    let atlas = Atlas::sphere_two_patch(64);
    let spec = FamilySpec::toeplitz_clutching(&atlas, 16, 1, false);
    let first = analytic_side(&spec, &atlas).map_err(|e| e.to_string())?;
    let n = first.index.stabilizer.rank;
    let other = mixed_stabilizer(&spec, n, 0.75);
    let second = analytic_side(&other, &atlas).map_err(|e| e.to_string())?;
    ensure(second.index.stabilizer.rank == n, "second stabiliser has a different rank")?;
    let a = degree_integral(&first.chern, &atlas, 2).map_err(|e| e.to_string())?;
    let b = degree_integral(&second.chern, &atlas, 2).map_err(|e| e.to_string())?;
    ensure((a - b).abs() < 1e-4, format!("c1 {a} vs {b}"))?;
    Ok(format!("c1 = {a:.8} and {b:.8}, difference {:.2e}", (a - b).abs()))
}

/// Reduced sizes for the runs repeated in criteria 10 and 11.
fn light_options(name: &str) -> RunOptions {
    match name {
        "bott-toeplitz" | "bott-toeplitz-twisted" => {
            RunOptions { resolution: Some(16), truncation: Some(8), tolerance: None }
        }
        _ => RunOptions::default(),
    }
}

fn gauge_invariance() -> Outcome {
    let mut rng = common::rng(10);
    let mut compared = 0;
    let mut worst: f64 = 0.0;
    for (name, _) in BUNDLED {
        let s = Scenario::bundled(name).expect("bundled");
        let opts = light_options(name);
        let built = s.build(&opts).map_err(|e| e.to_string())?;
        let cover = built.cover.as_ref().ok_or("no cover")?;
        let n = s
            .gerbe
            .as_ref()
            .map(|g| g.n)
            .or(s.bundle.as_ref().map(|b| b.n))
            .or(s.family.as_ref().map(|f| f.n))
            .unwrap_or(2)
            .max(2);
        let mu: Vec<u64> = cover.edges().iter().map(|_| rand::Rng::gen_range(&mut rng, 1..n)).collect();
        let base = s.verify(&opts).map_err(|e| format!("{name}: {e}"))?;
        let shifted = s.gauge_shifted(&mu).verify(&opts).map_err(|e| format!("{name} (gauged): {e}"))?;
        ensure(base.integrals.len() == shifted.integrals.len(), format!("{name}: integral lists differ"))?;
        for (a, b) in base.integrals.iter().zip(&shifted.integrals) {
            let d = (a.value - b.value).abs();
            ensure(a.name == b.name && d <= 1e-8, format!("{name}: {} moved by {d:.2e}", a.name))?;
            worst = worst.max(d);
            compared += 1;
        }
    }
    Ok(format!("{compared} integrals over {} scenarios, max change {worst:.2e}", BUNDLED.len()))
}

fn determinism() -> Outcome {
    let exe = env!("CARGO_BIN_EXE_gerbe-index");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for (name, _) in BUNDLED {
        let mut outputs = Vec::new();
        for run in 0..2 {
            let report = dir.path().join(format!("{name}-{run}.json"));
            let mut cmd = Command::new(exe);
            cmd.args(["verify", name, "--threads", "1", "--report"]).arg(&report);
            let opts = light_options(name);
            if let Some(r) = opts.resolution {
                cmd.args(["--resolution", &r.to_string()]);
            }
            if let Some(k) = opts.truncation {
                cmd.args(["--truncation", &k.to_string()]);
            }
            let out = cmd.output().map_err(|e| e.to_string())?;
            let code = out.status.code();
            ensure(matches!(code, Some(0) | Some(1)), format!("{name}: exit {code:?}"))?;
            let json = std::fs::read(&report).map_err(|e| e.to_string())?;
            outputs.push((out.stdout, json));
        }
        ensure(outputs[0] == outputs[1], format!("{name}: runs differ"))?;
    }
    Ok(format!("{} fixtures byte-identical across two runs", BUNDLED.len()))
}

fn main() {
    let mut runs = IndexRuns { untwisted: Vec::new(), twisted: Vec::new() };
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut record = |i: usize, title: &'static str, o: Outcome| {
        let (status, detail) = match &o {
            Ok(d) => ("PASS", d.clone()),
            Err(d) => ("FAIL", d.clone()),
        };
        println!("criterion {i:>2} {title:<36} {status}  {detail}");
        results.push((i, title, o));
    };
    record(1, "torsion pipeline", torsion_pipeline());
    record(2, "weak cocycle law", weak_cocycle_law());
    record(3, "tensor-power descent", tensor_power_descent());
    record(4, "Chern-Weil floor", chern_weil_floor());
    record(5, "Riemann-Roch form identity", riemann_roch());
    record(6, "index theorem, untwisted", index_untwisted(&mut runs));
    record(7, "index theorem, twisted by coboundary", index_twisted(&mut runs));
    record(8, "determinant line", determinant_line(&runs));
    record(9, "stabilization independence", stabilization_independence());
    record(10, "gauge/central invariance", gauge_invariance());
    record(11, "determinism", determinism());
    let failed = results.iter().filter(|(_, _, o)| o.is_err()).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
