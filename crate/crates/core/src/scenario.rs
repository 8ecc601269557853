//! Versioned scenario files and the checks run on them.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::atlas::Atlas;
use crate::bundle::{BundleTolerances, ProjectiveBundleData};
use crate::chern_weil::{
    chern_character_form, compatibility_residual, curvature, integrate_top, monopole, twisted_monopole, ConnectionData,
};
use crate::cohomology::{self, library, SimplicialComplex};
use crate::family::{check_elliptic, check_projective_compat, FamilySpec};
use crate::gerbe::{self, dd_class, fixtures, CombinatorialCover, DDClass, GerbeCocycle};
use crate::index_theorem::{
    analytic_side, degree_integral, symbol_class, topological_index_chern, verify_index_theorem, VerificationReport,
};
use crate::thom::{thom_rr_check, ThomScenario, LEAK_TOLERANCE};

pub const VERSION: &str = "gerbe-index/1";

/// Bundled fixtures, by name.
pub const BUNDLED: [(&str, &str); 5] = [
    ("monopole", include_str!("../fixtures/monopole.toml")),
    ("bott-toeplitz", include_str!("../fixtures/bott-toeplitz.toml")),
    ("bott-toeplitz-twisted", include_str!("../fixtures/bott-toeplitz-twisted.toml")),
    ("suspended-rp2-gerbe", include_str!("../fixtures/suspended-rp2-gerbe.toml")),
    ("thom-rr-line", include_str!("../fixtures/thom-rr-line.toml")),
];

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unsupported scenario version {found:?} (expected {VERSION:?})")]
    UnsupportedVersion { found: String },
    #[error("invalid field `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("[{module}] {operation} failed: {message}")]
    Module { module: &'static str, operation: &'static str, message: String },
}

impl ScenarioError {
    /// `2` for input problems, `1` for failures inside a module.
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Module { .. } => 1,
            _ => 2,
        }
    }

    fn invalid(field: &str, message: impl Into<String>) -> Self {
        ScenarioError::Invalid { field: field.into(), message: message.into() }
    }
}

fn module<E: std::fmt::Display>(module: &'static str, operation: &'static str) -> impl FnOnce(E) -> ScenarioError {
    move |e| ScenarioError::Module { module, operation, message: e.to_string() }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: String,
    pub name: String,
    #[serde(default)]
    pub description: Option<String>,
    /// Central gauge parameters `mu` (one `Z_n` value per cover edge) applied
    /// to every twisted datum: `theta -> theta + delta mu`, `Q_ab -> zeta^mu_ab Q_ab`.
    #[serde(default)]
    pub gauge: Option<Vec<u64>>,
    pub complex: Option<ComplexSection>,
    pub gerbe: Option<GerbeSection>,
    pub atlas: Option<AtlasSection>,
    pub bundle: Option<BundleSection>,
    pub family: Option<FamilySection>,
    pub thom: Option<ThomSection>,
    #[serde(default)]
    pub verification: VerificationSection,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexSection {
    pub preset: Option<String>,
    pub vertex_count: Option<usize>,
    pub maximal: Option<Vec<Vec<usize>>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GerbeSection {
    pub n: u64,
    /// `suspension-generator` or `zero`.
    pub preset: Option<String>,
    /// Explicit residues, one per 2-simplex in sorted order.
    pub values: Option<Vec<u64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtlasSection {
    pub preset: String,
    pub resolution: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleSection {
    /// `monopole`, `twisted-monopole` or `flat`.
    pub kind: String,
    #[serde(default = "one_i64")]
    pub degree: i64,
    #[serde(default = "one_u64")]
    pub n: u64,
    pub mu: Option<Vec<u64>>,
    #[serde(default = "one_usize")]
    pub rank: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySection {
    /// `bott-toeplitz`, `bott-toeplitz-twisted`, `scalar-winding` or `invertible`.
    pub kind: String,
    pub truncation: usize,
    #[serde(default = "one_usize")]
    pub winding: usize,
    #[serde(default = "one_u64")]
    pub n: u64,
    pub mu: Option<Vec<u64>>,
    #[serde(default)]
    pub adjoint: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThomSection {
    /// `(k, l)`: `E` is the degree-`k` monopole, `F` the degree-`l` one.
    pub fixtures: Vec<[i64; 2]>,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_fibre_nodes")]
    pub fibre_nodes: usize,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerificationSection {
    pub tolerance: Option<f64>,
    /// Rerun the numerical checks at doubled resolution.
    #[serde(default)]
    pub convergence: bool,
    pub convergence_tolerance: Option<f64>,
    pub expect_dd_order: Option<u64>,
}

fn one_i64() -> i64 {
    1
}
fn one_u64() -> u64 {
    1
}
fn one_usize() -> usize {
    1
}
fn default_sigma() -> f64 {
    0.25
}
fn default_fibre_nodes() -> usize {
    20
}

/// Command-line overrides.
#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    pub resolution: Option<usize>,
    pub truncation: Option<usize>,
    pub tolerance: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: String,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Integral {
    pub name: String,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ScenarioReport {
    pub version: String,
    pub scenario: String,
    pub command: String,
    pub threads: usize,
    pub notes: Vec<String>,
    pub checks: Vec<Check>,
    pub integrals: Vec<Integral>,
    pub index: Vec<VerificationReport>,
    pub passed: bool,
}

impl ScenarioReport {
    fn new(s: &Scenario, command: &str) -> Self {
        Self {
            version: VERSION.into(),
            scenario: s.name.clone(),
            command: command.into(),
            threads: rayon::current_num_threads(),
            notes: Vec::new(),
            checks: Vec::new(),
            integrals: Vec::new(),
            index: Vec::new(),
            passed: true,
        }
    }

    fn at_most(&mut self, name: impl Into<String>, value: f64, limit: f64) {
        let passed = value.is_finite() && value <= limit;
        self.push(name, value, format!("<= {limit:.1e}"), passed);
    }

    fn within(&mut self, name: impl Into<String>, value: f64, lo: f64, hi: f64) {
        let passed = value >= lo && value <= hi;
        self.push(name, value, format!("in [{lo}, {hi}]"), passed);
    }

    fn push(&mut self, name: impl Into<String>, value: f64, limit: String, passed: bool) {
        self.passed &= passed;
        self.checks.push(Check { name: name.into(), value, limit, passed });
    }

    fn integral(&mut self, name: impl Into<String>, value: f64) {
        self.integrals.push(Integral { name: name.into(), value });
    }

    /// Fixed-format text rendering.
    pub fn render(&self) -> String {
        let mut out = format!("{} {} [{}] threads {}\n", self.command, self.scenario, self.version, self.threads);
        for n in &self.notes {
            out.push_str(&format!("  {n}\n"));
        }
        for c in &self.checks {
            out.push_str(&format!(
                "  {:<44} {:>22.12e}  {:<12} {}\n",
                c.name,
                c.value,
                c.limit,
                if c.passed { "ok" } else { "FAIL" }
            ));
        }
        for i in &self.integrals {
            out.push_str(&format!("  integral {:<35} {:>22.12e}\n", i.name, i.value));
        }
        for r in &self.index {
            for line in r.summary().lines() {
                out.push_str(&format!("  | {line}\n"));
            }
        }
        out.push_str(if self.passed { "PASS\n" } else { "FAIL\n" });
        out
    }
}

/// Constructed data of a scenario.
pub struct Built {
    pub cover: Option<CombinatorialCover>,
    pub theta: Option<GerbeCocycle>,
    pub atlas: Option<Atlas>,
    pub bundle: Option<(ProjectiveBundleData, ConnectionData)>,
    pub family: Option<FamilySpec>,
    pub thom: Vec<(i64, i64, ThomScenario)>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let raw: toml::Value = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        let version = raw.get("version").and_then(|v| v.as_str()).unwrap_or("<missing>");
        if version != VERSION {
            return Err(ScenarioError::UnsupportedVersion { found: version.to_string() });
        }
        toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))
    }

    pub fn bundled(name: &str) -> Option<Self> {
        BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, text)| Self::parse(text).expect("bundled fixtures parse"))
    }

    /// A file path, or the name of a bundled fixture when no such file exists.
    pub fn load(path: &str) -> Result<Self, ScenarioError> {
        if !Path::new(path).exists() {
            if let Some(s) = Self::bundled(path) {
                return Ok(s);
            }
        }
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScenarioError::Io { path: path.to_string(), message: e.to_string() })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serialises")
    }

    /// The same scenario with central gauge parameters `mu` applied.
    pub fn gauge_shifted(&self, mu: &[u64]) -> Self {
        let mut out = self.clone();
        out.gauge = Some(mu.to_vec());
        out
    }

    fn tolerance(&self, opts: &RunOptions, default: f64) -> f64 {
        opts.tolerance.or(self.verification.tolerance).unwrap_or(default)
    }

    fn atlas(&self, opts: &RunOptions, scale: usize) -> Result<Option<Atlas>, ScenarioError> {
        let Some(a) = &self.atlas else { return Ok(None) };
        let res = opts.resolution.unwrap_or(a.resolution) * scale;
        Atlas::by_name(&a.preset, res)
            .map(Some)
            .ok_or_else(|| ScenarioError::invalid("atlas.preset", format!("unknown atlas {:?}", a.preset)))
    }

    fn complex(&self) -> Result<Option<SimplicialComplex>, ScenarioError> {
        let Some(c) = &self.complex else { return Ok(None) };
        if let Some(p) = &c.preset {
            return match p.as_str() {
                "suspended-projective-plane" => Ok(Some(library::suspended_projective_plane())),
                "projective-plane" => Ok(Some(library::projective_plane())),
                "sphere" => Ok(Some(library::sphere_s2())),
                "triangle" => Ok(Some(library::simplex(2))),
                _ => Err(ScenarioError::invalid("complex.preset", format!("unknown complex {p:?}"))),
            };
        }
        match (c.vertex_count, &c.maximal) {
            (Some(n), Some(m)) => SimplicialComplex::from_maximal(n, m)
                .map(Some)
                .map_err(|e| ScenarioError::invalid("complex.maximal", e.to_string())),
            _ => Err(ScenarioError::invalid("complex", "needs a preset or vertex_count and maximal")),
        }
    }

    fn gauge_for(&self, cover: &CombinatorialCover) -> Result<Option<Vec<u64>>, ScenarioError> {
        match &self.gauge {
            Some(mu) if mu.len() != cover.edges().len() => Err(ScenarioError::invalid(
                "gauge",
                format!("{} values for {} cover edges", mu.len(), cover.edges().len()),
            )),
            g => Ok(g.clone()),
        }
    }

    pub fn build(&self, opts: &RunOptions) -> Result<Built, ScenarioError> {
        self.build_at(opts, 1)
    }

    fn build_at(&self, opts: &RunOptions, scale: usize) -> Result<Built, ScenarioError> {
        let atlas = self.atlas(opts, scale)?;
        let mut cover = match self.complex()? {
            Some(x) => Some(CombinatorialCover::new(x)),
            None => atlas.as_ref().map(Atlas::cover),
        };
        let mut theta = None;
        if let Some(g) = &self.gerbe {
            let c = cover.clone().ok_or_else(|| ScenarioError::invalid("gerbe", "needs a complex or an atlas"))?;
            let t = match (&g.preset, &g.values) {
                (Some(p), _) if p == "suspension-generator" => {
                    let (fc, t) = fixtures::suspended_rp2_theta();
                    if fc != c {
                        return Err(ScenarioError::invalid("gerbe.preset", "requires the suspended projective plane"));
                    }
                    GerbeCocycle { n: g.n, values: t.values }
                }
                (Some(p), _) if p == "zero" => GerbeCocycle::zero(&c, g.n),
                (Some(p), _) => return Err(ScenarioError::invalid("gerbe.preset", format!("unknown gerbe {p:?}"))),
                (None, Some(v)) => GerbeCocycle { n: g.n, values: v.clone() },
                (None, None) => return Err(ScenarioError::invalid("gerbe", "needs a preset or values")),
            };
            if g.n == 0 {
                return Err(ScenarioError::invalid("gerbe.n", "modulus must be positive"));
            }
            let t = match self.gauge_for(&c)? {
                Some(mu) => gerbe::gauge_transform(&c, &t, &mu),
                None => t,
            };
            theta = Some(t);
        }
        let mut bundle = None;
        if let Some(b) = &self.bundle {
            let a = atlas.as_ref().ok_or_else(|| ScenarioError::invalid("bundle", "needs an atlas"))?;
            let edges = a.cover().edges().len();
            let (data, conn) = match b.kind.as_str() {
                "monopole" => monopole(b.degree, a, b.n),
                "twisted-monopole" => {
                    let mu = b.mu.clone().unwrap_or_else(|| vec![0; edges]);
                    if mu.len() != edges {
                        return Err(ScenarioError::invalid("bundle.mu", format!("expected {edges} values")));
                    }
                    twisted_monopole(b.degree, a, b.n, &mu)
                }
                "flat" => (ProjectiveBundleData::trivial(&a.cover(), b.rank, b.n), ConnectionData::flat(b.rank, a)),
                k => return Err(ScenarioError::invalid("bundle.kind", format!("unknown bundle {k:?}"))),
            };
            let data = match self.gauge_for(&a.cover())? {
                Some(mu) => data.rescale_central(&mu),
                None => data,
            };
            bundle = Some((data, conn));
        }
        let mut family = None;
        if let Some(f) = &self.family {
            let a = atlas.as_ref().ok_or_else(|| ScenarioError::invalid("family", "needs an atlas"))?;
            let k = opts.truncation.unwrap_or(f.truncation);
            if k == 0 {
                return Err(ScenarioError::invalid("family.truncation", "must be positive"));
            }
            let edges = a.cover().edges().len();
            let spec = match f.kind.as_str() {
                "bott-toeplitz" => FamilySpec::toeplitz_clutching(a, k, f.winding, f.adjoint),
                "bott-toeplitz-twisted" => {
                    let mu = f.mu.clone().ok_or_else(|| ScenarioError::invalid("family.mu", "required"))?;
                    if mu.len() != edges {
                        return Err(ScenarioError::invalid("family.mu", format!("expected {edges} values")));
                    }
                    FamilySpec::twisted_bott_toeplitz(a, k, f.n, &mu).0
                }
                "scalar-winding" => FamilySpec::scalar_winding(a, k, f.winding),
                "invertible" => FamilySpec::invertible(a, k, 2),
                other => return Err(ScenarioError::invalid("family.kind", format!("unknown family {other:?}"))),
            };
            let spec = match self.gauge_for(&a.cover())? {
                Some(mu) => spec.rescale_central(f.n, &mu),
                None => spec,
            };
            if theta.is_none() && f.n > 1 {
                theta = Some(spec.twist().clone());
            }
            family = Some(spec);
        }
        let mut thom = Vec::new();
        if let Some(t) = &self.thom {
            let a = atlas.as_ref().ok_or_else(|| ScenarioError::invalid("thom", "needs an atlas"))?;
            for &[k, l] in &t.fixtures {
                let mut s = ThomScenario::monopoles(k, l, a.resolution());
                s.sigma = t.sigma;
                s.radius = 4.0 * t.sigma;
                s.fibre_nodes = t.fibre_nodes;
                thom.push((k, l, s));
            }
        }
        if cover.is_none() {
            cover = atlas.as_ref().map(Atlas::cover);
        }
        Ok(Built { cover, theta, atlas, bundle, family, thom })
    }

    /// Structural checks only: cocycle laws, partition of unity, ellipticity.
    pub fn validate(&self, opts: &RunOptions) -> Result<ScenarioReport, ScenarioError> {
        let b = self.build(opts)?;
        let mut r = ScenarioReport::new(self, "validate");
        if let (Some(c), Some(t)) = (&b.cover, &b.theta) {
            t.check_cocycle(c).map_err(module("cech-gerbe", "check_cocycle"))?;
            r.push("theta is a cocycle", 0.0, "exact".into(), true);
        }
        if let Some(a) = &b.atlas {
            r.at_most("partition of unity defect", a.pou_defect(), 1e-10);
        }
        if let (Some((data, _)), Some(a)) = (&b.bundle, &b.atlas) {
            let v = data
                .validate(&a.overlap_samples(), &BundleTolerances::default())
                .map_err(module("projective-bundle", "validate"))?;
            r.at_most("weak cocycle residual", v.max_residual, BundleTolerances::default().cocycle_sampled);
        }
        if let (Some(spec), Some(a)) = (&b.family, &b.atlas) {
            let e = check_elliptic(spec, a).map_err(module("elliptic-family", "check_elliptic"))?;
            r.push(
                "symbol condition number",
                e.worst_condition,
                format!("<= {:.0e}", crate::family::KAPPA_MAX),
                e.elliptic,
            );
            let p = check_projective_compat(spec, a).map_err(module("elliptic-family", "check_projective_compat"))?;
            r.at_most("family projective compatibility", p, 1e-8);
        }
        Ok(r)
    }

    pub fn dd_class(&self) -> Result<DDClass, ScenarioError> {
        let b = self.build(&RunOptions::default())?;
        let cover = b.cover.ok_or_else(|| ScenarioError::invalid("gerbe", "scenario has no cover"))?;
        let theta = b.theta.unwrap_or_else(|| GerbeCocycle::zero(&cover, 1));
        dd_class(&cover, &theta).map_err(module("cech-gerbe", "dd_class"))
    }

    /// Chern character integrals of the bundle section, or the Thom check.
    pub fn chern(&self, opts: &RunOptions) -> Result<ScenarioReport, ScenarioError> {
        let b = self.build(opts)?;
        let mut r = ScenarioReport::new(self, "chern");
        if b.bundle.is_none() && b.thom.is_empty() {
            return Err(ScenarioError::invalid("bundle", "scenario has no bundle or thom section"));
        }
        self.bundle_checks(&b, &mut r, opts, false)?;
        self.thom_checks(&b, &mut r, opts)?;
        Ok(r)
    }

    pub fn index_analytic(&self, opts: &RunOptions) -> Result<ScenarioReport, ScenarioError> {
        let b = self.build(opts)?;
        let (spec, atlas) = family_of(&b)?;
        let mut r = ScenarioReport::new(self, "index-analytic");
        let side = analytic_side(spec, atlas).map_err(module("index-theorem", "analytic_index"))?;
        r.notes.push(format!(
            "kernel rank {}, stabiliser rank {}, virtual rank {}",
            side.index.kernel_rank,
            side.index.stabilizer.rank,
            side.index.virtual_rank()
        ));
        r.at_most("index connection compatibility", side.connection_compat_residual, 1e-6);
        for k in (0..=atlas.dim()).step_by(2) {
            let v = degree_integral(&side.chern, atlas, k).map_err(module("chern-weil", "integrate"))?;
            r.integral(format!("analytic degree {k}"), v);
        }
        Ok(r)
    }

    pub fn index_topological(&self, opts: &RunOptions) -> Result<ScenarioReport, ScenarioError> {
        let b = self.build(opts)?;
        let (spec, atlas) = family_of(&b)?;
        let mut r = ScenarioReport::new(self, "index-topological");
        let s = symbol_class(spec, atlas).map_err(module("index-theorem", "symbol_class"))?;
        r.at_most("symbol compatibility", s.compat_residual, crate::index_theorem::SYMBOL_COMPAT_TOLERANCE);
        let topo = topological_index_chern(&s, atlas).map_err(module("index-theorem", "topological_index_chern"))?;
        for k in (0..=atlas.dim()).step_by(2) {
            let v = degree_integral(&topo, atlas, k).map_err(module("chern-weil", "integrate"))?;
            r.integral(format!("topological degree {k}"), v);
        }
        Ok(r)
    }

    /// Every check the scenario enables.
    pub fn verify(&self, opts: &RunOptions) -> Result<ScenarioReport, ScenarioError> {
        let mut r = self.validate(opts)?;
        r.command = "verify".into();
        let b = self.build(opts)?;
        if let (Some(c), Some(t)) = (&b.cover, &b.theta) {
            let class = dd_class(c, t).map_err(module("cech-gerbe", "dd_class"))?;
            r.notes.push(format!("Dixmier-Douady: {}", class.summary()));
            for (i, (res, _)) in class.coordinates.torsion.iter().enumerate() {
                r.integral(format!("dd torsion coordinate {i}"), res.to_string().parse().unwrap_or(f64::NAN));
            }
            if let Some(order) = self.verification.expect_dd_order {
                let found = class.order.clone().unwrap_or_else(|| "inf".into());
                let h3 = cohomology::cohomology_group(&c.base, 3)
                    .map_err(module("simplicial-cohomology", "cohomology_group"))?;
                r.notes.push(format!("H^3 = {}", h3.describe()));
                r.push(
                    "dd class order",
                    found.parse().unwrap_or(f64::NAN),
                    format!("= {order}"),
                    found == order.to_string(),
                );
            }
        }
        self.bundle_checks(&b, &mut r, opts, true)?;
        self.thom_checks(&b, &mut r, opts)?;
        if let (Some(spec), Some(atlas)) = (&b.family, &b.atlas) {
            let tol = self.tolerance(opts, 1e-3);
            let rep = verify_index_theorem(&self.name, spec, atlas, tol)
                .map_err(module("index-theorem", "verify_index_theorem"))?;
            record_index(&mut r, &rep, "");
            r.at_most("index connection compatibility", rep.connection_compat_residual, 1e-6);
            r.at_most("index residual", rep.max_residual(), tol);
            r.index.push(rep);
            if self.verification.convergence {
                let fine = self.build_at(opts, 2)?;
                let (spec, atlas) = family_of(&fine)?;
                let ctol = self.verification.convergence_tolerance.unwrap_or(tol / 4.0);
                let rep = verify_index_theorem(&self.name, spec, atlas, ctol)
                    .map_err(module("index-theorem", "verify_index_theorem"))?;
                record_index(&mut r, &rep, " (doubled)");
                r.at_most("index residual at doubled resolution", rep.max_residual(), ctol);
                r.index.push(rep);
            }
        }
        Ok(r)
    }

    fn bundle_checks(
        &self,
        b: &Built,
        r: &mut ScenarioReport,
        opts: &RunOptions,
        full: bool,
    ) -> Result<(), ScenarioError> {
        let (Some((data, conn)), Some(atlas)) = (&b.bundle, &b.atlas) else { return Ok(()) };
        let spec = self.bundle.as_ref().expect("bundle section");
        let tol = self.tolerance(opts, 1e-6);
        let f = curvature(conn, atlas).map_err(module("chern-weil", "curvature"))?;
        let ch = chern_character_form(&f);
        let c1 = integrate_top(&ch, atlas).map_err(module("chern-weil", "integrate"))?;
        let expected = spec.degree as f64 * conn.rank as f64;
        let expected = if spec.kind == "flat" { 0.0 } else { expected };
        r.integral("c1", c1);
        r.at_most("c1 against closed form", (c1 - expected).abs(), tol);
        if !full {
            return Ok(());
        }
        let compat =
            compatibility_residual(conn, data, atlas).map_err(module("chern-weil", "compatibility_residual"))?;
        r.at_most("connection compatibility", compat, 1e-6);
        // tensor-power descent
        let order = data.twist_order();
        let n = if 2 % order == 0 { 2 } else { order };
        let tol_b = BundleTolerances::default();
        let samples = atlas.overlap_samples();
        let descended = data
            .tensor_power_descend(n, &samples, &tol_b)
            .map_err(module("projective-bundle", "tensor_power_descend"))?;
        let v = descended.validate(&samples, &tol_b).map_err(module("projective-bundle", "validate"))?;
        r.at_most(format!("descended E^{n} strict cocycle residual"), v.max_residual, tol_b.cocycle_sampled);
        let fd = curvature(&conn.tensor_power(n as usize), atlas).map_err(module("chern-weil", "curvature"))?;
        let desc = integrate_top(&chern_character_form(&fd), atlas).map_err(module("chern-weil", "integrate"))?;
        let power = integrate_top(&ch.power(n as usize), atlas).map_err(module("chern-weil", "integrate"))?;
        r.integral(format!("Ch(E^{n}) descended"), desc);
        r.integral(format!("Ch(E)^{n} pointwise"), power);
        r.at_most("descent vs pointwise power", (desc - power).abs(), 1e-4);
        if self.verification.convergence && spec.kind != "flat" {
            let fine = self.build_at(opts, 2)?;
            let (_, fconn) = fine.bundle.as_ref().expect("bundle");
            let fatlas = fine.atlas.as_ref().expect("atlas");
            let coarse = fd_error(conn, atlas, expected)?;
            let finer = fd_error(fconn, fatlas, expected)?;
            r.integral("c1 finite-difference error", coarse);
            r.integral("c1 finite-difference error (doubled)", finer);
            r.within("finite-difference error ratio", coarse / finer, 3.5, 4.5);
        }
        Ok(())
    }

    fn thom_checks(&self, b: &Built, r: &mut ScenarioReport, opts: &RunOptions) -> Result<(), ScenarioError> {
        let tol = self.tolerance(opts, 1e-3);
        for (k, l, s) in &b.thom {
            let rep = thom_rr_check(s).map_err(module("chern-weil", "thom_rr_check"))?;
            r.integral(format!("thom({k},{l}) total space"), rep.total_degree_zero + rep.total_top);
            r.integral(format!("thom({k},{l}) base"), rep.base_degree_zero + rep.base_top);
            r.at_most(format!("thom({k},{l}) residual"), rep.residual, tol);
            r.at_most(format!("thom({k},{l}) support leak"), rep.support_leak, LEAK_TOLERANCE);
            let oracle = ThomScenario::monopole_oracle(*k, *l);
            r.at_most(
                format!("thom({k},{l}) base vs closed form"),
                (rep.base_degree_zero + rep.base_top - oracle).abs(),
                tol,
            );
        }
        Ok(())
    }
}

fn record_index(r: &mut ScenarioReport, rep: &VerificationReport, suffix: &str) {
    for d in &rep.degrees {
        r.integral(format!("analytic degree {}{suffix}", d.degree), d.analytic);
        r.integral(format!("topological degree {}{suffix}", d.degree), d.topological);
    }
    r.integral(format!("c1(det index){suffix}"), rep.det_line.analytic);
}

fn family_of(b: &Built) -> Result<(&FamilySpec, &Atlas), ScenarioError> {
    match (&b.family, &b.atlas) {
        (Some(s), Some(a)) => Ok((s, a)),
        _ => Err(ScenarioError::invalid("family", "scenario has no family section")),
    }
}

fn fd_error(conn: &ConnectionData, atlas: &Atlas, expected: f64) -> Result<f64, ScenarioError> {
    let f = curvature(&conn.without_override(), atlas).map_err(module("chern-weil", "curvature"))?;
    let v = integrate_top(&chern_character_form(&f), atlas).map_err(module("chern-weil", "integrate"))?;
    Ok((v - expected).abs())
}
