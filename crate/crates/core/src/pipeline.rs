//! Experiment configuration and the full rigidity pipeline: induction,
//! splitting, shadow extraction, affine model, convergence series, towers,
//! cohomological equation and conjugacy verification.

use crate::affine::{closing_slopes, cone_limit_mp, construct_affine_model, AffineModel, ModelOptions};
use crate::circle::{break_equivalent, cut_log_ratio, stable_adjustment, Break, CircleMapWithBreaks, StableAdjustment};
use crate::combinat::Permutation;
use crate::conjugacy::{
    birkhoff_bound, solve_cohomological, special_sums, verify, AffineMap64, BaseMap, BirkhoffBound, ConjugacyReport,
    SemiConjugacy, TowerPartition,
};
use crate::error::{Error, Result};
use crate::fit::{fit_decay, fit_range, DecayFit};
use crate::giet::{d_c1, renormalize, Chain, Giet, GietSpec, Prim, PrimSpec, RenormOptions, RenormState};
use crate::oseledets::{estimate_splitting, HeightSeq, SplittingEstimate};
use crate::rauzy::{accelerate, default_gamma, CocycleWindow, Iet, RauzyPath, Schedule};
use crate::real::{Mp, Real};
use crate::shadow::{extract_omega, interval_ratio_report, IntervalReport, ShadowReport, NOISE_FLOOR};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Giet,
    Circle,
}

/// Permutation given by its two rows of letters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PermRows {
    pub top: String,
    pub bottom: String,
}

impl PermRows {
    pub fn build(&self) -> Result<Permutation> {
        Permutation::from_rows(&self.top, &self.bottom)
    }
}

/// Source of the reference Rauzy path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReferenceSource {
    /// Repetitions of a loop; the loop defaults to the shortest positive one.
    Periodic {
        perm: PermRows,
        #[serde(default)]
        cycle: Option<Vec<u8>>,
        #[serde(default)]
        reps: Option<usize>,
    },
    /// Path of the IET with the given lengths.
    Lengths {
        perm: PermRows,
        lengths: Vec<f64>,
        steps: usize,
    },
    /// Path recorded by `induce`.
    File { path: PathBuf },
}

/// Serialized path as written by `induce`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathFile {
    pub perm: PermRows,
    pub types: Vec<u8>,
}

/// One input map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapSource {
    /// Explicit GIET.
    Giet { spec: GietSpec },
    /// `h^{-1} o S o h` with `S` the affine map with log-slope `omega`
    /// following the reference path (`h` empty gives `S` itself).
    Conjugate {
        omega: Vec<f64>,
        #[serde(default)]
        h: Vec<PrimSpec>,
        /// Add the stable vector removing the break at the preimage of 0.
        #[serde(default)]
        stable_adjust: bool,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub min_r2: f64,
    pub conj_residual: f64,
    pub cohom_residual: f64,
    pub omega_pair: f64,
    pub break_sigma: f64,
    pub break_ratio: f64,
    /// Recovered `omega` must lie within this multiple of the claimed tolerance.
    pub shadow_factor: f64,
    pub psi_gap: f64,
    pub dh_gap: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            min_r2: 0.9,
            conj_residual: 1e-5,
            cohom_residual: 1e-6,
            omega_pair: 1e-6,
            break_sigma: 1e-8,
            break_ratio: 1e-8,
            shadow_factor: 10.0,
            psi_gap: 1e-4,
            dh_gap: 1e-3,
        }
    }
}

fn default_depth() -> usize {
    12
}
fn default_fit_lo() -> usize {
    2
}
fn default_grid() -> usize {
    10_000
}
fn default_dc1_grid() -> usize {
    64
}
fn default_split_depth() -> usize {
    30
}
fn default_floors() -> u64 {
    1_000_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub mode: Mode,
    /// Expected rotation shift in circle mode.
    #[serde(default)]
    pub k: Option<usize>,
    pub maps: Vec<MapSource>,
    pub reference: ReferenceSource,
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default = "default_fit_lo")]
    pub fit_lo: usize,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_dc1_grid")]
    pub dc1_grid: usize,
    #[serde(default = "default_split_depth")]
    pub splitting_depth: usize,
    /// Level of the towers used for the conjugacy; by default the deepest
    /// level with at most `max_floors` floors.
    #[serde(default)]
    pub conj_level: Option<usize>,
    #[serde(default = "default_floors")]
    pub max_floors: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::InvalidData(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidData(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| Error::InvalidData(format!("config: {e}")))?;
        if let ReferenceSource::File { path: p } = &mut cfg.reference {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth < 1 {
            return Err(Error::InvalidData("depth must be at least 1".into()));
        }
        if self.maps.is_empty() || self.maps.len() > 2 {
            return Err(Error::InvalidData("one or two maps required".into()));
        }
        if self.grid == 0 || self.dc1_grid < 2 {
            return Err(Error::InvalidData("grids must be nonempty".into()));
        }
        let t = &self.tolerances;
        let all = [
            t.min_r2,
            t.conj_residual,
            t.cohom_residual,
            t.omega_pair,
            t.break_sigma,
            t.break_ratio,
            t.shadow_factor,
            t.psi_gap,
            t.dh_gap,
        ];
        if all.iter().any(|x| !(*x > 0.0)) {
            return Err(Error::InvalidData("tolerances must be positive".into()));
        }
        if let ReferenceSource::File { path } = &self.reference {
            if !path.exists() {
                return Err(Error::InvalidData(format!("reference file {} not found", path.display())));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

/// Reference path, its accelerated schedule, windows and splittings.
pub struct Reference {
    pub path: RauzyPath,
    pub schedule: Schedule,
    pub windows: Vec<CocycleWindow>,
    /// Lengths of the translation exchange with this path.
    pub lambda: Vec<f64>,
    pub lambda_mp: Vec<Mp>,
    /// Splitting at every accelerated level.
    pub splits: Vec<SplittingEstimate>,
    pub periodic: bool,
}

impl Reference {
    pub fn perms(&self) -> Vec<Permutation> {
        let all = self.path.perms();
        self.schedule.rv_index.iter().map(|&k| all[k].clone()).collect()
    }
}

/// Windows needed beyond the report depth by the cone limits.
const EXTRA_WINDOWS: usize = 60;

pub fn build_reference(src: &ReferenceSource, depth: usize, split_depth: usize) -> Result<Reference> {
    let (path, gamma) = match src {
        ReferenceSource::Periodic { perm, cycle, reps } => {
            let p = perm.build()?;
            let cycle = match cycle {
                Some(c) => c.clone(),
                None => default_gamma(&p, 16)?.types,
            };
            let mut gamma = RauzyPath::periodic(p.clone(), &cycle, 1)?;
            let mut j = 1;
            while !gamma.matrix().is_positive() {
                j += 1;
                if j > 64 {
                    return Err(Error::InvalidData("cycle never becomes positive".into()));
                }
                gamma = RauzyPath::periodic(p.clone(), &cycle, j)?;
            }
            let need = (depth + EXTRA_WINDOWS + 2) * j;
            let path = RauzyPath::periodic(p, &cycle, reps.unwrap_or(need).max(need))?;
            (path, gamma)
        }
        ReferenceSource::Lengths { perm, lengths, steps } => {
            let p = perm.build()?;
            let mut iet = Iet::new(lengths.iter().map(|&x| Mp::new(x)).collect::<Vec<_>>(), p.clone())?;
            let mut types = Vec::with_capacity(*steps);
            for _ in 0..*steps {
                let (next, rec) = iet.rv_step()?;
                types.push(rec.epsilon);
                iet = next;
            }
            let gamma = default_gamma(&p, 16)?;
            (RauzyPath::new(p, types), gamma)
        }
        ReferenceSource::File { path } => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::InvalidData(format!("cannot read {}: {e}", path.display())))?;
            let pf: PathFile = serde_json::from_str(&text).map_err(|e| Error::InvalidData(format!("path file: {e}")))?;
            let p = pf.perm.build()?;
            let gamma = default_gamma(&p, 16)?;
            (RauzyPath::new(p, pf.types), gamma)
        }
    };
    let schedule = accelerate(&path, &gamma)?;
    if schedule.levels() < depth + 2 {
        return Err(Error::OutOfRange(format!(
            "reference path has {} accelerated levels, {} needed",
            schedule.levels(),
            depth + 2
        )));
    }
    let windows = schedule.windows(&path)?;
    let perms: Vec<Permutation> = {
        let all = path.perms();
        schedule.rv_index.iter().map(|&k| all[k].clone()).collect()
    };
    // a path made of one repeated window is extended periodically into the past
    let periodic = windows.iter().all(|w| w.matrix == windows[0].matrix) && perms.iter().all(|p| *p == perms[0]);
    let splits = reference_splits(&windows, &perms, periodic, split_depth)?;
    let zero = vec![Mp::new(0.0); path.d()];
    let (lambda_mp, _, _) = cone_limit_mp(&path, &schedule.rv_index, &zero, 1e-32)?;
    Ok(Reference {
        path,
        schedule,
        windows,
        lambda: lambda_mp.iter().map(|x| x.to_f64()).collect(),
        lambda_mp,
        splits,
        periodic,
    })
}

fn reference_splits(
    windows: &[CocycleWindow],
    perms: &[Permutation],
    periodic: bool,
    depth: usize,
) -> Result<Vec<SplittingEstimate>> {
    let n = windows.len();
    if periodic {
        let seq = HeightSeq::from_windows(&windows[..1], true)?;
        let s = estimate_splitting(&seq, &perms[0], 0, depth)?;
        return Ok((0..=n)
            .map(|k| SplittingEstimate { at: k, ..s.clone() })
            .collect());
    }
    let seq = HeightSeq::from_windows(windows, false)?;
    let mut out: Vec<Option<SplittingEstimate>> = (0..=n)
        .map(|k| estimate_splitting(&seq, &perms[k], k, depth).ok())
        .collect();
    let first = out
        .iter()
        .position(|s| s.is_some())
        .ok_or_else(|| Error::Diagnostic {
            module: "oseledets",
            level: 0,
            cause: "no level has enough windows for a splitting".into(),
        })?;
    for k in (0..first).rev() {
        let inv = seq.get_inverse(k as isize).expect("window exists");
        out[k] = Some(out[k + 1].as_ref().expect("filled").pull_back(inv));
    }
    for k in first + 1..=n {
        if out[k].is_none() {
            out[k] = out[k - 1].clone();
        }
    }
    Ok(out.into_iter().map(|s| s.expect("filled")).collect())
}

/// A constructed input map with its ground truth when known.
pub struct BuiltMap {
    pub giet: Giet,
    /// `h` with `f = h^{-1} S h`.
    pub truth_h: Option<Chain>,
    pub truth_omega: Option<Vec<f64>>,
    pub adjustment: Option<StableAdjustment>,
}

pub fn build_map(src: &MapSource, reference: &Reference) -> Result<BuiltMap> {
    match src {
        MapSource::Giet { spec } => Ok(BuiltMap {
            giet: spec.build()?,
            truth_h: None,
            truth_omega: None,
            adjustment: None,
        }),
        MapSource::Conjugate { omega, h, stable_adjust } => {
            let perm = &reference.path.start;
            if omega.len() != perm.d() {
                return Err(Error::InvalidData("omega has wrong size".into()));
            }
            let adjustment = if *stable_adjust {
                Some(stable_adjustment(&reference.lambda, perm, omega)?)
            } else {
                None
            };
            let om_mp: Vec<Mp> = if *stable_adjust {
                stable_adjustment_mp(&reference.lambda_mp, perm, omega)?
            } else {
                omega.iter().map(|&x| Mp::new(x)).collect()
            };
            let om: Vec<f64> = om_mp.iter().map(|x| x.to_f64()).collect();
            let (lam, _, inc) = cone_limit_mp(&reference.path, &reference.schedule.rv_index, &om_mp, 1e-32)?;
            if inc > 1e-25 {
                return Err(Error::Diagnostic {
                    module: "affine",
                    level: 0,
                    cause: format!("ground-truth cone limit stalled at {inc:e}"),
                });
            }
            let s = Giet::affine(perm.clone(), &lam, &om_mp)?;
            let chain = Chain::new(h.iter().map(Prim::from_spec).collect());
            let giet = if h.is_empty() { s } else { Giet::conjugate(&s, &chain)? };
            Ok(BuiltMap {
                giet,
                truth_h: Some(chain),
                truth_omega: Some(om),
                adjustment,
            })
        }
    }
}

/// Extended-precision `omega + v` of the stable adjustment, so that the
/// ground truth carries no unstable round-off.
fn stable_adjustment_mp(lambda: &[Mp], perm: &Permutation, omega: &[f64]) -> Result<Vec<Mp>> {
    let k = perm.rotation_type().ok_or(Error::NotRotationType)?;
    let d = perm.d();
    let cut = d - k - 1;
    let block = |a: usize| perm.pos(0, a) <= cut;
    let first: Mp = (0..d).filter(|&a| block(a)).map(|a| lambda[a].clone()).sum();
    let second: Mp = (0..d).filter(|&a| !block(a)).map(|a| lambda[a].clone()).sum();
    let t = -(first / second);
    let om: Vec<Mp> = omega.iter().map(|&x| Mp::new(x)).collect();
    let rho = om[perm.letter_at(0, cut)].clone() - om[perm.letter_at(0, cut + 1)].clone();
    let a = rho / (t.clone() - Mp::new(1.0));
    Ok((0..d)
        .map(|b| {
            let v = if block(b) { a.clone() } else { a.clone() * t.clone() };
            om[b].clone() + v
        })
        .collect())
}

/// One CSV row.
#[derive(Clone, Debug, Serialize)]
pub struct SeriesRow {
    pub n: usize,
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    pub distortion: f64,
    pub r_n: f64,
    pub shadow_err: f64,
    pub interval_gap: f64,
    pub image_gap: f64,
    pub d_p: f64,
    #[serde(rename = "dC1")]
    pub dc1: f64,
    pub cohom_residual: f64,
    pub conj_residual: f64,
    pub dh_gap: f64,
}

pub const CSV_HEADER: &str =
    "n,e1,e2,e3,distortion,r_n,shadow_err,interval_gap,image_gap,d_p,dC1,cohom_residual,conj_residual,dh_gap";

impl SeriesRow {
    fn csv(&self) -> String {
        let f = |x: f64| {
            if x.is_nan() {
                "nan".to_string()
            } else {
                format!("{x:.9e}")
            }
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.n,
            f(self.e1),
            f(self.e2),
            f(self.e3),
            f(self.distortion),
            f(self.r_n),
            f(self.shadow_err),
            f(self.interval_gap),
            f(self.image_gap),
            f(self.d_p),
            f(self.dc1),
            f(self.cohom_residual),
            f(self.conj_residual),
            f(self.dh_gap)
        )
    }
}

pub fn series_csv(rows: &[SeriesRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.csv());
        s.push('\n');
    }
    s
}

#[derive(Clone, Debug, Serialize)]
pub struct TruthReport {
    /// Distance to the true slope; taken modulo the level-0 stable space
    /// when the reference has no known past.
    pub omega_error: f64,
    pub modulo_stable: bool,
    /// Stable component of the slope difference.
    pub stable_offset: f64,
    /// Whether the model is the true one, so that `h` can be compared.
    pub comparable: bool,
    /// `sup |psi - log Dh_0 - const|`.
    pub psi_gap: f64,
    /// `sup |C e^psi - Dh_0|`.
    pub dh_gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CircleReport {
    pub k: usize,
    pub jump_ratios: Vec<Break>,
    pub breaks: usize,
    pub product_defect: f64,
    /// `max |B - B from jumps|`.
    pub dictionary_gap: f64,
    pub in_break_class: bool,
    pub adjustment: StableAdjustment,
    /// `|sigma - 1|` of the adjusted model at the preimage of `0`.
    pub model_sigma_gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelConjugacy {
    pub n: usize,
    pub report: ConjugacyReport,
    /// Largest mismatch with the previous level at shared endpoints.
    pub refinement_gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MapReport {
    pub index: usize,
    pub omega: Vec<f64>,
    pub omega_f: Vec<f64>,
    /// Slope of the model actually used (after any stable adjustment).
    pub model_omega: Vec<f64>,
    pub shadow_tolerance: f64,
    pub cauchy_tail: f64,
    pub splitting_residual: f64,
    pub fits: BTreeMap<String, DecayFit>,
    /// EC fits against the Rauzy–Veech clock.
    pub ec_rv_clock: BTreeMap<String, DecayFit>,
    pub interval_ratio_limit: f64,
    pub certified_depth: usize,
    pub conj_level: usize,
    pub conjugacy: Option<ConjugacyReport>,
    pub levels: Vec<LevelConjugacy>,
    pub birkhoff: BirkhoffBound,
    #[serde(rename = "C")]
    pub c: f64,
    pub truth: Option<TruthReport>,
    pub circle: Option<CircleReport>,
    #[serde(skip)]
    pub rows: Vec<SeriesRow>,
    #[serde(skip)]
    pub matching: Option<SemiConjugacy>,
    #[serde(skip)]
    pub breaks: Vec<Break>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PairReport {
    pub omega_gap: f64,
    pub break_equivalent: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PipelineReport {
    pub config_hash: String,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub mode: Mode,
    pub depth: usize,
    pub maps: Vec<MapReport>,
    pub pair: Option<PairReport>,
    pub errors: Vec<String>,
    pub checks: BTreeMap<String, bool>,
    pub passed: bool,
}

/// Series within round-off count as decaying.
pub fn series_decays(fit: &DecayFit, series: &[f64], lo: usize, min_r2: f64) -> bool {
    let tail = series.iter().skip(lo).filter(|x| x.is_finite()).fold(0.0f64, |a, &b| a.max(b));
    tail <= NOISE_FLOOR || fit.decays(min_r2)
}

fn model_towers(model: &AffineModel, smap: &AffineMap64, state: &RenormState, n: usize) -> Result<TowerPartition> {
    let perm = &model.perms[n];
    let scale = model.scales[n] * smap.total();
    let mut bases = vec![(0.0, 0.0); perm.d()];
    let mut x = 0.0;
    for a in perm.row(0) {
        let len = model.lengths[n][a] * scale;
        bases[a] = (x, x + len);
        x += len;
    }
    TowerPartition::build(smap, &bases, state.level(n).words(), n)
}

fn floors_at(state: &RenormState, n: usize) -> u64 {
    state.level(n).heights().iter().sum()
}

/// Runs every stage for one map.
pub fn run_map(index: usize, built: &BuiltMap, reference: &Reference, cfg: &ExperimentConfig) -> Result<MapReport> {
    let f = &built.giet;
    let depth = cfg.depth;
    let perms = reference.perms();
    if f.perm() != &perms[0] {
        return Err(Error::InvalidData("map permutation differs from the reference start".into()));
    }
    let circle_map = match cfg.mode {
        Mode::Circle => {
            let c = CircleMapWithBreaks::from_giet(f.clone())?;
            if let Some(k) = cfg.k {
                if k != c.k() {
                    return Err(Error::InvalidData(format!("rotation shift {} differs from configured {k}", c.k())));
                }
            }
            Some(c)
        }
        Mode::Giet => None,
    };
    let rv = &reference.schedule.rv_index;
    let opts = RenormOptions {
        height_cap: u64::MAX,
        ..Default::default()
    };
    let state = renormalize(f, Some(&reference.path), &rv[..=depth], &opts)?;
    let slopes: Vec<Vec<f64>> = state.levels.iter().map(|l| l.avg_log_slope()).collect();
    let shadow: ShadowReport = extract_omega(&perms, &slopes, &reference.windows, &reference.splits, cfg.fit_lo)?;

    let adjustment = match &circle_map {
        Some(_) => Some(stable_adjustment(&reference.lambda, &perms[0], &shadow.omega)?),
        None => None,
    };
    let model_omega = adjustment.as_ref().map(|a| a.omega.clone()).unwrap_or_else(|| shadow.omega.clone());
    let splits = &reference.splits;
    let project = |n: usize, x: &[f64]| -> Vec<f64> {
        splits
            .get(n)
            .and_then(|s| s.drop_unstable(x).ok())
            .unwrap_or_else(|| x.to_vec())
    };
    let model = construct_affine_model(&reference.path, rv, &model_omega, depth, &ModelOptions::default(), Some(&project))?;
    let s_total = f.total().to_f64();
    let intervals: IntervalReport = interval_ratio_report(&state.levels, &model, s_total, cfg.fit_lo)?;
    let dc1: Vec<f64> = (0..=depth)
        .map(|n| d_c1(&state.level(n).normalized(), &model.level(n, state.level(n).words().to_vec()), cfg.dc1_grid))
        .collect::<Result<_>>()?;

    // Birkhoff sums of phi = log DS o h - log Df
    let model_slopes: Vec<Vec<f64>> = (0..=depth).map(|n| closing_slopes(&model.lengths[n], &model.omegas[n])).collect();
    let special = special_sums(&state.levels, &model_slopes, cfg.dc1_grid);
    let norms: Vec<f64> = reference.windows[..=depth]
        .iter()
        .map(|w| w.height_cocycle().norm_inf_f64())
        .collect();
    let birkhoff = birkhoff_bound(&special, &norms);
    let special_fit = fit_range(&special, cfg.fit_lo, depth);
    if !series_decays(&special_fit, &special, cfg.fit_lo, cfg.tolerances.min_r2) {
        return Err(Error::Diagnostic {
            module: "conjugacy",
            level: depth,
            cause: "special Birkhoff sums do not decay".into(),
        });
    }

    // towers, matching, cohomological equation
    let base = model.base()?;
    let base = crate::affine::Aiet::closed(
        base.perm.clone(),
        base.lambda.iter().map(|l| l * s_total).collect(),
        base.omega.clone(),
    )?;
    let smap = AffineMap64::new(&base);
    let conj_level = cfg
        .conj_level
        .unwrap_or_else(|| (1..=depth).rev().find(|&n| floors_at(&state, n) <= cfg.max_floors).unwrap_or(1))
        .min(depth);
    let mut levels: Vec<LevelConjugacy> = Vec::new();
    let mut prev: Option<SemiConjugacy> = None;
    let mut final_psi = None;
    for n in 1..=conj_level {
        let ft = TowerPartition::of_level(f, state.level(n), n)?;
        let st = model_towers(&model, &smap, &state, n)?;
        let sc = SemiConjugacy::new(ft, st)?;
        let psi = solve_cohomological(&sc, smap.log_slopes(), smap.total())?;
        let report = verify(f, &smap, &sc, &psi, smap.log_slopes(), cfg.grid);
        let refinement_gap = prev.as_ref().map(|p| sc.refinement_gap(p)).unwrap_or(0.0);
        levels.push(LevelConjugacy { n, report, refinement_gap });
        if n == conj_level {
            final_psi = Some(psi);
        }
        prev = Some(sc);
    }
    let matching = prev;
    let conjugacy = levels.last().map(|l| l.report.clone());

    let truth = match (&built.truth_h, &built.truth_omega, &matching, &final_psi) {
        (Some(h), Some(om), Some(sc), Some(psi)) => {
            let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let diff: Vec<f64> = model_omega.iter().zip(om).map(|(a, b)| a - b).collect();
            let (ds, _, _) = reference.splits[0].decompose(&diff)?;
            let stable_offset = norm(&ds);
            let modulo_stable = !reference.periodic;
            let omega_error = if modulo_stable {
                norm(&diff.iter().zip(&ds).map(|(a, b)| a - b).collect::<Vec<_>>())
            } else {
                norm(&diff)
            };
            let claimed = cfg.tolerances.shadow_factor * shadow.tolerance.max(f64::EPSILON);
            let mut diffs = Vec::with_capacity(cfg.grid);
            let mut dh_gap = 0.0f64;
            for k in 0..cfg.grid {
                let x = (k as f64 + 0.5) / cfg.grid as f64 * s_total;
                let (_, dh0, _) = h.jet64(x);
                diffs.push(psi.eval(&sc.f, x) - dh0.ln());
                dh_gap = dh_gap.max((psi.dh(&sc.f, x) - dh0).abs());
            }
            let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
            Some(TruthReport {
                omega_error,
                modulo_stable,
                stable_offset,
                comparable: stable_offset <= claimed,
                psi_gap: diffs.iter().map(|d| (d - mean).abs()).fold(0.0, f64::max),
                dh_gap,
            })
        }
        _ => None,
    };

    let circle = match (&circle_map, adjustment) {
        (Some(c), Some(adjustment)) => {
            let jumps = c.jump_ratios()?;
            let b = f.boundary()?;
            let bj = c.boundary_from_jumps()?;
            let sigma = cut_log_ratio(&perms[0], &base.omega)?;
            Some(CircleReport {
                k: c.k(),
                breaks: c.breaks()?.len(),
                product_defect: c.product_defect()?,
                dictionary_gap: b.iter().zip(&bj).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max),
                in_break_class: c.in_break_class()?,
                jump_ratios: jumps,
                adjustment,
                model_sigma_gap: sigma.exp_m1().abs(),
            })
        }
        _ => None,
    };
    let breaks = match &circle_map {
        Some(c) => c.breaks()?,
        None => Vec::new(),
    };

    let rows: Vec<SeriesRow> = (0..=depth)
        .map(|n| {
            let sl = &shadow.levels[n];
            let il = &intervals.levels[n];
            let lv = state.level(n);
            let conj = levels.iter().find(|l| l.n == n).map(|l| &l.report);
            SeriesRow {
                n,
                e1: lv.e1(cfg.dc1_grid),
                e2: sl.e2,
                e3: sl.e3,
                distortion: lv.distortion(cfg.dc1_grid),
                r_n: sl.residual,
                shadow_err: sl.shadow_err,
                interval_gap: il.interval_gap,
                image_gap: il.image_gap,
                d_p: il.d_p,
                dc1: dc1[n],
                cohom_residual: conj.map(|c| c.cohom_residual).unwrap_or(f64::NAN),
                conj_residual: conj.map(|c| c.conj_residual).unwrap_or(f64::NAN),
                dh_gap: conj.map(|c| c.dh_gap).unwrap_or(f64::NAN),
            }
        })
        .collect();

    let col = |g: &dyn Fn(&SeriesRow) -> f64| -> Vec<f64> { rows.iter().map(g).collect() };
    let mut fits = BTreeMap::new();
    let lo = cfg.fit_lo;
    fits.insert("e1".into(), fit_range(&col(&|r| r.e1), lo, depth));
    fits.insert("e2".into(), shadow.fits.e2);
    fits.insert("e3".into(), shadow.fits.e3);
    fits.insert("r_n".into(), shadow.fits.residual);
    fits.insert("shadow_err".into(), shadow.fits.shadow_err);
    fits.insert("increment".into(), shadow.fits.increment);
    fits.insert("distortion".into(), fit_range(&col(&|r| r.distortion), lo, depth));
    fits.insert("interval_gap".into(), intervals.interval_fit);
    fits.insert("image_gap".into(), intervals.image_fit);
    fits.insert("d_p".into(), intervals.d_p_fit);
    fits.insert("ratio_gap".into(), intervals.ratio_fit);
    fits.insert("dC1".into(), fit_range(&dc1, lo, depth));
    fits.insert("special_sums".into(), special_fit);
    let rv_clock: Vec<usize> = rv[lo..=depth].to_vec();
    let mut ec_rv_clock = BTreeMap::new();
    for (name, series) in [("e1", col(&|r| r.e1)), ("e2", col(&|r| r.e2)), ("e3", col(&|r| r.e3))] {
        ec_rv_clock.insert(name.to_string(), fit_decay(&rv_clock, &series[lo..=depth]));
    }

    Ok(MapReport {
        index,
        omega: shadow.omega.clone(),
        omega_f: shadow.omega_f.clone(),
        model_omega,
        shadow_tolerance: shadow.tolerance,
        cauchy_tail: shadow.cauchy_tail,
        splitting_residual: shadow.splitting_residual,
        fits,
        ec_rv_clock,
        interval_ratio_limit: intervals.limit,
        certified_depth: model.certified_depth,
        conj_level,
        c: conjugacy.as_ref().map(|c| c.c).unwrap_or(f64::NAN),
        conjugacy,
        levels,
        birkhoff,
        truth,
        circle,
        rows,
        matching,
        breaks,
    })
}

const DECAY_SERIES: [&str; 7] = ["e1", "e2", "e3", "r_n", "interval_gap", "image_gap", "dC1"];

fn map_checks(m: &MapReport, cfg: &ExperimentConfig, checks: &mut BTreeMap<String, bool>) {
    let t = &cfg.tolerances;
    let p = format!("map{}.", m.index);
    for name in DECAY_SERIES {
        let series: Vec<f64> = m
            .rows
            .iter()
            .map(|r| match name {
                "e1" => r.e1,
                "e2" => r.e2,
                "e3" => r.e3,
                "r_n" => r.r_n,
                "interval_gap" => r.interval_gap,
                "image_gap" => r.image_gap,
                _ => r.dc1,
            })
            .collect();
        let hi = if name == "r_n" { series.len() - 1 } else { series.len() };
        let ok = series_decays(&m.fits[name], &series[..hi], cfg.fit_lo, t.min_r2);
        checks.insert(format!("{p}decay.{name}"), ok);
    }
    if let Some(c) = &m.conjugacy {
        checks.insert(format!("{p}conj_residual"), c.conj_residual <= t.conj_residual);
        checks.insert(format!("{p}cohom_residual"), c.cohom_residual <= t.cohom_residual);
    }
    if let Some(tr) = &m.truth {
        let claimed = t.shadow_factor * m.shadow_tolerance.max(f64::EPSILON);
        checks.insert(format!("{p}truth.omega"), tr.omega_error <= claimed);
        if tr.comparable {
            checks.insert(format!("{p}truth.psi"), tr.psi_gap <= t.psi_gap);
            checks.insert(format!("{p}truth.dh"), tr.dh_gap <= t.dh_gap);
        }
    }
    if let Some(c) = &m.circle {
        checks.insert(format!("{p}circle.product"), c.product_defect.abs() <= crate::circle::PRODUCT_TOL);
        checks.insert(format!("{p}circle.model_sigma"), c.model_sigma_gap <= t.break_sigma);
    }
}

/// Runs the whole pipeline; diagnostic failures are collected in the report.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<PipelineReport> {
    cfg.validate()?;
    let mut errors = Vec::new();
    let mut maps = Vec::new();
    match build_reference(&cfg.reference, cfg.depth, cfg.splitting_depth) {
        Ok(reference) => {
            for (i, src) in cfg.maps.iter().enumerate() {
                match build_map(src, &reference).and_then(|b| run_map(i, &b, &reference, cfg)) {
                    Ok(m) => maps.push(m),
                    Err(e) => errors.push(format!("map {i}: {e}")),
                }
            }
        }
        Err(e) => errors.push(format!("reference: {e}")),
    }
    let mut checks = BTreeMap::new();
    for m in &maps {
        map_checks(m, cfg, &mut checks);
    }
    let pair = if maps.len() == 2 {
        let (a, b) = (&maps[0], &maps[1]);
        let omega_gap = a
            .omega
            .iter()
            .zip(&b.omega)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt();
        checks.insert("pair.omega".into(), omega_gap <= cfg.tolerances.omega_pair);
        let be = match (cfg.mode, &a.matching, &b.matching) {
            (Mode::Circle, Some(ha), Some(hb)) => {
                let hb_inv = hb.inverse();
                let resolution = ha.resolution().max(hb.resolution());
                let map = |x: f64| hb_inv.eval(ha.eval(x));
                let ok = break_equivalent(&a.breaks, &b.breaks, &map, resolution, cfg.tolerances.break_ratio);
                checks.insert("pair.break_equivalent".into(), ok);
                Some(ok)
            }
            _ => None,
        };
        Some(PairReport {
            omega_gap,
            break_equivalent: be,
        })
    } else {
        None
    };
    let passed = errors.is_empty() && checks.values().all(|&b| b);
    Ok(PipelineReport {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        tolerances: cfg.tolerances.clone(),
        mode: cfg.mode,
        depth: cfg.depth,
        maps,
        pair,
        errors,
        checks,
        passed,
    })
}

/// Writes `series_<i>.csv` per map and `report.json`.
pub fn write_report(report: &PipelineReport, dir: &Path) -> Result<()> {
    let io = |e: std::io::Error| Error::InvalidData(format!("cannot write to {}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    for m in &report.maps {
        std::fs::write(dir.join(format!("series_{}.csv", m.index)), series_csv(&m.rows)).map_err(io)?;
    }
    let json = serde_json::to_string_pretty(report).map_err(|e| Error::InvalidData(e.to_string()))?;
    std::fs::write(dir.join("report.json"), json).map_err(io)?;
    Ok(())
}
