//! CP-chain simulation: Markov dynamics on (measure, box) pairs where a
//! child box is drawn with probability equal to its mass and the measure is
//! conditioned on it and re-scaled. States carry one of three measure
//! representations behind a common trait: exact digit measures on cubes,
//! exact two-component products on ×2/×3 rectangles, and grid histograms as
//! a generic fallback.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::{Arc, Mutex};

use rand::Rng;
use rand_pcg::Pcg64;

use crate::error::{Error, Result};
use crate::geometry::{normalize_box, w_of_box, AxisBox, PartitionOperator, LOG3};
use crate::grid::GridMeasure;
use crate::measures::{geo_digit_measure, GeoDigitMeasure, MeasureSpec};
use crate::project::Projection;
use crate::rng::rng_from_seed;
use crate::tree::mean_stderr;

pub const TRANSITION_TOL: f64 = 1e-9;

/// Mean and standard error of a batch of values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateWithError {
    pub mean: f64,
    pub stderr: f64,
}

/// The measure component of a CP-chain state, supported on the normalized
/// version of the state's box.
pub trait CpMeasure: Send + Sync {
    /// Masses of the children in the order produced by the partition
    /// operator; must sum to 1 within `TRANSITION_TOL`.
    fn child_masses(&self, children: &[AxisBox]) -> Result<Vec<f64>>;

    /// Conditional measure on `children[idx]`, re-scaled to its normalized
    /// box.
    fn condition(&self, children: &[AxisBox], idx: usize) -> Result<Box<dyn CpMeasure>>;

    /// Partition entropy of the projected measure at resolution
    /// `entropy_base`^{-level}.
    fn projected_entropy(&self, proj: &Projection, level: u32) -> Result<f64>;

    /// Batched variant; implementations may share work across projections.
    fn projected_entropies(&self, projs: &[Projection], level: u32) -> Result<Vec<f64>> {
        projs.iter().map(|p| self.projected_entropy(p, level)).collect()
    }

    /// Base whose powers set the entropy resolution (the operator's 1/ρ).
    fn entropy_base(&self) -> u32;

    /// Histogram of the projected measure, for export.
    fn projected_histogram(&self, proj: &Projection, level: u32) -> Result<GridMeasure>;
}

/// One state (μ_n, B_n) of a chain; `w` tracks the eccentricity parameter
/// under the ×2/×3 operator.
pub struct CpState {
    pub measure: Box<dyn CpMeasure>,
    pub boxx: AxisBox,
    pub w: Option<f64>,
}

/// Per-step record of a chain trajectory.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub chosen_child: usize,
    pub log_mass: f64,
    pub functionals: Vec<f64>,
}

/// A recorded trajectory with functional averages.
pub struct ChainRun {
    pub steps: Vec<StepRecord>,
    pub functional_names: Vec<String>,
    pub seed: u64,
}

impl ChainRun {
    pub fn functional_average(&self, idx: usize) -> EstimateWithError {
        let vals: Vec<f64> = self.steps.iter().map(|s| s.functionals[idx]).collect();
        let (mean, stderr) = mean_stderr(&vals);
        EstimateWithError { mean, stderr }
    }

    /// CSV export: step, chosen_child, log_mass, then one column per
    /// registered functional.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,chosen_child,log_mass");
        for name in &self.functional_names {
            let _ = write!(out, ",{name}");
        }
        out.push('\n');
        for (i, s) in self.steps.iter().enumerate() {
            let _ = write!(out, "{},{},{:.12e}", i + 1, s.chosen_child, s.log_mass);
            for v in &s.functionals {
                let _ = write!(out, ",{v:.12e}");
            }
            out.push('\n');
        }
        out
    }
}

/// A named functional of the chain state, averaged along trajectories.
pub struct ChainFunctional {
    pub name: String,
    pub eval: Box<dyn Fn(&CpState) -> Result<f64> + Send + Sync>,
}

impl ChainFunctional {
    pub fn new(
        name: impl Into<String>,
        eval: impl Fn(&CpState) -> Result<f64> + Send + Sync + 'static,
    ) -> Self {
        ChainFunctional { name: name.into(), eval: Box::new(eval) }
    }

    /// The functional w ↦ eccentricity parameter of the current box.
    pub fn eccentricity() -> Self {
        ChainFunctional::new("w", |s: &CpState| {
            s.w.ok_or_else(|| Error::invalid("state carries no eccentricity parameter"))
        })
    }
}

/// One transition of Definition-style CP dynamics. Returns the new state and
/// the (child index, log mass) of the move.
pub fn cp_step<R: Rng>(
    state: &CpState,
    op: &dyn PartitionOperator,
    rng: &mut R,
) -> Result<(CpState, usize, f64)> {
    let (bstar, _) = normalize_box(&state.boxx)?;
    let children = op.children(&bstar)?;
    let masses = state.measure.child_masses(&children)?;
    let total: f64 = masses.iter().sum();
    if (total - 1.0).abs() > TRANSITION_TOL {
        return Err(Error::MassDeficit { sum: total });
    }
    let u: f64 = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut idx = masses.len() - 1;
    for (i, m) in masses.iter().enumerate() {
        acc += m;
        if u < acc {
            idx = i;
            break;
        }
    }
    // never descend into a zero-mass child on rounding
    if masses[idx] <= 0.0 {
        idx = masses
            .iter()
            .enumerate()
            .filter(|(_, m)| **m > 0.0)
            .map(|(i, _)| i)
            .next_back()
            .ok_or(Error::MassDeficit { sum: total })?;
    }
    let measure = state.measure.condition(&children, idx)?;
    let next_box = children[idx].clone();
    let w = if state.w.is_some() { Some(w_of_box(&next_box)?) } else { None };
    Ok((CpState { measure, boxx: next_box, w }, idx, masses[idx].ln()))
}

/// The scenery of the state measure along a prescribed branch of the
/// filtration: condition on each chosen child in turn and re-scale to its
/// normalized box.
pub fn scenery_along(state: CpState, op: &dyn PartitionOperator, child_indices: &[usize]) -> Result<CpState> {
    let mut cur = state;
    for &idx in child_indices {
        let (bstar, _) = normalize_box(&cur.boxx)?;
        let children = op.children(&bstar)?;
        if idx >= children.len() {
            return Err(Error::invalid(format!("child index {idx} out of range")));
        }
        let measure = cur.measure.condition(&children, idx)?;
        let next_box = children[idx].clone();
        let w = if cur.w.is_some() { Some(w_of_box(&next_box)?) } else { None };
        cur = CpState { measure, boxx: next_box, w };
    }
    Ok(cur)
}

/// Run a chain for `steps` transitions, recording the chosen child, the
/// transition log-mass, and every registered functional at each state.
pub fn cp_run(
    initial: CpState,
    steps: usize,
    op: &dyn PartitionOperator,
    functionals: &[ChainFunctional],
    seed: u64,
) -> Result<ChainRun> {
    if steps == 0 {
        return Err(Error::invalid("steps must be positive"));
    }
    let mut rng = rng_from_seed(seed);
    let mut state = initial;
    let mut records = Vec::with_capacity(steps);
    for _ in 0..steps {
        let (next, idx, log_mass) = cp_step(&state, op, &mut rng)?;
        state = next;
        let mut values = Vec::with_capacity(functionals.len());
        for f in functionals {
            values.push((f.eval)(&state)?);
        }
        records.push(StepRecord { chosen_child: idx, log_mass, functionals: values });
    }
    Ok(ChainRun {
        steps: records,
        functional_names: functionals.iter().map(|f| f.name.clone()).collect(),
        seed,
    })
}

/// Dimension of the chain from a trajectory: mean(−log μ_n(B_{n+1})) over
/// log(1/ρ), with the naive standard error of the step values.
pub fn chain_dimension(run: &ChainRun, rho: f64) -> EstimateWithError {
    let log_inv_rho = -rho.ln();
    let vals: Vec<f64> = run.steps.iter().map(|s| -s.log_mass / log_inv_rho).collect();
    let (mean, stderr) = mean_stderr(&vals);
    EstimateWithError { mean, stderr }
}

// ---------------------------------------------------------------------------
// Shared caches
// ---------------------------------------------------------------------------

/// Cache of projected entropies keyed by (measure state, projection, level);
/// only populated for measures with finitely many restriction states.
#[derive(Default)]
pub struct EntropyCache {
    map: Mutex<HashMap<(u64, u64, u32), f64>>,
}

fn proj_key(proj: &Projection) -> u64 {
    match proj {
        Projection::AxisX => 1,
        Projection::AxisY => 2,
        Projection::Slope(s) => s.to_bits() | 0x8000_0000_0000_0000,
    }
}

/// Cache of fine marginal histograms (sparse, sorted by cell index) keyed by
/// (component tag, measure state, depth).
#[derive(Default)]
pub struct MarginalCache {
    map: Mutex<HashMap<(u8, u64, u32), Arc<Vec<(u32, f64)>>>>,
}

/// Shareable handle to a marginal cache.
pub type MarginalCacheHandle = Arc<MarginalCache>;

/// Dense positive-mass cells of a one-dimensional digit measure at the given
/// digit depth, as (cell index, mass) sorted by index.
fn fine_marginal(geo: &GeoDigitMeasure, depth: u32) -> Result<Vec<(u32, f64)>> {
    let base = geo.base;
    let mut acc: Vec<(u32, f64)> = Vec::new();
    crate::tree::for_each_positive_leaf(geo.measure.as_ref(), depth as usize, &mut |word, mass| {
        let mut cell = 0u32;
        for s in word {
            cell = cell * base + u32::from(geo.digit_coords[*s as usize][0]);
        }
        acc.push((cell, mass));
    })?;
    acc.sort_unstable_by_key(|(c, _)| *c);
    Ok(acc)
}

fn cached_marginal(
    cache: &MarginalCache,
    tag: u8,
    geo: &GeoDigitMeasure,
    depth: u32,
) -> Result<Arc<Vec<(u32, f64)>>> {
    if let Some(key) = geo.measure.state_key() {
        if let Some(hit) = cache.map.lock().unwrap().get(&(tag, key, depth)) {
            return Ok(hit.clone());
        }
        let fresh = Arc::new(fine_marginal(geo, depth)?);
        cache.map.lock().unwrap().insert((tag, key, depth), fresh.clone());
        Ok(fresh)
    } else {
        Ok(Arc::new(fine_marginal(geo, depth)?))
    }
}

// ---------------------------------------------------------------------------
// Cube states (base-b operator)
// ---------------------------------------------------------------------------

/// Exact digit measure on [0,1]^d driven by the base-b cube operator.
pub struct CubeDigitState {
    pub geo: GeoDigitMeasure,
    cache: Arc<EntropyCache>,
}

impl CubeDigitState {
    pub fn new(geo: GeoDigitMeasure) -> CubeDigitState {
        CubeDigitState { geo, cache: Arc::new(EntropyCache::default()) }
    }

    /// Share an entropy cache across states, e.g. across the independent
    /// chains of one estimator run.
    pub fn new_shared(geo: GeoDigitMeasure, cache: Arc<EntropyCache>) -> CubeDigitState {
        CubeDigitState { geo, cache }
    }

    /// Cell index (axis 0 fastest) of each alphabet symbol.
    fn symbol_cells(&self) -> Vec<usize> {
        let b = self.geo.base as usize;
        self.geo
            .digit_coords
            .iter()
            .map(|c| {
                let mut idx = c[0] as usize;
                if self.geo.dim == 2 {
                    idx += b * c[1] as usize;
                }
                idx
            })
            .collect()
    }

    fn entropy_uncached(&self, proj: &Projection, level: u32) -> Result<f64> {
        // midpoint rule: refine until cell images are well inside one bin
        let b = f64::from(self.geo.base);
        let stretch = match proj {
            Projection::Slope(s) => 1.0 + s.abs(),
            _ => 1.0,
        };
        let extra = ((4.0 * stretch).ln() / b.ln()).ceil().max(1.0) as u32;
        let depth = level + extra;
        let alphabet = self.geo.measure.alphabet_size() as f64;
        if alphabet.powi(depth as i32) > 3e7 {
            return Err(Error::invalid(format!(
                "projected entropy would expand {alphabet}^{depth} cylinders"
            )));
        }
        let res = b.powi(-(level as i32));
        let mut bins: HashMap<i64, f64> = HashMap::new();
        let geo = &self.geo;
        crate::tree::for_each_positive_leaf(geo.measure.as_ref(), depth as usize, &mut |word, mass| {
            let corner = geo.cell_corner(word);
            let half = geo.cell_side(word.len()) / 2.0;
            let mid = [corner[0] + half, corner[1] + half];
            let v = proj.apply(&mid);
            *bins.entry((v / res).floor() as i64).or_insert(0.0) += mass;
        })?;
        Ok(-bins.values().filter(|m| **m > 0.0).map(|m| m * m.ln()).sum::<f64>())
    }
}

impl CpMeasure for CubeDigitState {
    fn child_masses(&self, children: &[AxisBox]) -> Result<Vec<f64>> {
        let expected = (self.geo.base as usize).pow(self.geo.dim as u32);
        if children.len() != expected {
            return Err(Error::invalid(format!(
                "operator produced {} children, digit cube expects {expected}",
                children.len()
            )));
        }
        let probs = self.geo.measure.child_probs(&[])?;
        let mut masses = vec![0.0; expected];
        for (sym, cell) in self.symbol_cells().iter().enumerate() {
            masses[*cell] += probs[sym];
        }
        Ok(masses)
    }

    fn condition(&self, children: &[AxisBox], idx: usize) -> Result<Box<dyn CpMeasure>> {
        let _ = children;
        let sym = self
            .symbol_cells()
            .iter()
            .position(|c| *c == idx)
            .ok_or_else(|| Error::UndefinedConditional { word: format!("cell {idx}") })?;
        Ok(Box::new(CubeDigitState::new_shared(
            self.geo.restrict(&[sym as u8])?,
            self.cache.clone(),
        )))
    }

    fn projected_entropy(&self, proj: &Projection, level: u32) -> Result<f64> {
        if let Some(key) = self.geo.measure.state_key() {
            let ck = (key, proj_key(proj), level);
            if let Some(hit) = self.cache.map.lock().unwrap().get(&ck) {
                return Ok(*hit);
            }
            let h = self.entropy_uncached(proj, level)?;
            self.cache.map.lock().unwrap().insert(ck, h);
            Ok(h)
        } else {
            self.entropy_uncached(proj, level)
        }
    }

    fn entropy_base(&self) -> u32 {
        self.geo.base
    }

    fn projected_histogram(&self, proj: &Projection, level: u32) -> Result<GridMeasure> {
        crate::project::push_grid_exact(&self.geo, proj, level, self.geo.base).map(|(g, _)| g)
    }
}

// ---------------------------------------------------------------------------
// ×2/×3 product states (R_w operator)
// ---------------------------------------------------------------------------

/// Exact product S_w(μ' × ν') of a base-2 and a base-3 digit measure on the
/// normalized rectangle R_w^*; the chain state of the ×2/×3 construction.
pub struct RectProductState {
    pub x: GeoDigitMeasure,
    pub y: GeoDigitMeasure,
    pub w: f64,
    cache: Arc<MarginalCache>,
}

impl RectProductState {
    pub fn new(x: GeoDigitMeasure, y: GeoDigitMeasure, w: f64) -> Result<RectProductState> {
        if x.base != 2 || x.dim != 1 || y.base != 3 || y.dim != 1 {
            return Err(Error::invalid(
                "rect product states take a base-2 and a base-3 digit measure on [0,1]",
            ));
        }
        if !(0.0..LOG3).contains(&w) {
            return Err(Error::WOutOfRange { w });
        }
        Ok(RectProductState { x, y, w, cache: Arc::new(MarginalCache::default()) })
    }

    fn sixfold(&self) -> bool {
        self.w >= LOG3 - crate::geometry::LOG2
    }

    /// Probability of each digit value under a one-dimensional digit measure.
    fn value_probs(geo: &GeoDigitMeasure) -> Result<Vec<f64>> {
        let probs = geo.measure.child_probs(&[])?;
        let mut by_value = vec![0.0; geo.base as usize];
        for (sym, p) in probs.iter().enumerate() {
            by_value[geo.digit_coords[sym][0] as usize] += p;
        }
        Ok(by_value)
    }

    fn restrict_value(geo: &GeoDigitMeasure, value: u8) -> Result<GeoDigitMeasure> {
        let sym = geo
            .digit_coords
            .iter()
            .position(|c| c[0] == value)
            .ok_or_else(|| Error::UndefinedConditional { word: format!("digit {value}") })?;
        geo.restrict(&[sym as u8])
    }

    /// Projected entropies at resolution 2^{-level}, sharing the fine
    /// marginals and the x-side re-binning across projections.
    fn entropies(&self, projs: &[Projection], level: u32) -> Result<Vec<f64>> {
        let h = 2f64.powi(-(level as i32));
        let quarter = h / 4.0;
        let ax = (-self.w / 2.0).exp();
        let by_scale = (self.w / 2.0).exp();

        // fine marginals in the unit frame
        let dx = level + 3;
        let xs = cached_marginal(&self.cache, 0, &self.x, dx)?;
        let x_cell = 2f64.powi(-(dx as i32));

        // x side re-binned to quarter-bins once (independent of the slope),
        // with prefix sums for windowed convolution
        let mut x_quarter: Vec<f64> = Vec::new();
        let mut x_prefix: Vec<f64> = Vec::new();
        if projs.iter().any(|p| !matches!(p, Projection::AxisY)) {
            let n = (ax / quarter).ceil() as usize + 2;
            x_quarter = vec![0.0; n];
            for (c, m) in xs.iter() {
                let v = ax * ((*c as f64 + 0.5) * x_cell);
                let j = ((v / quarter) as usize).min(n - 1);
                x_quarter[j] += m;
            }
            x_prefix = Vec::with_capacity(n + 1);
            x_prefix.push(0.0);
            let mut acc = 0.0;
            for m in &x_quarter {
                acc += m;
                x_prefix.push(acc);
            }
        }

        let mut out = Vec::with_capacity(projs.len());
        for proj in projs {
            match proj {
                Projection::AxisX => {
                    // entropy of the width-h histogram of a_x · X
                    let mut bins: HashMap<i64, f64> = HashMap::new();
                    for (c, m) in xs.iter() {
                        let v = ax * ((*c as f64 + 0.5) * x_cell);
                        *bins.entry((v / h).floor() as i64).or_insert(0.0) += m;
                    }
                    out.push(entropy_of(bins.values()));
                }
                Projection::AxisY => {
                    let dy = marginal_depth(by_scale, level);
                    let ys = cached_marginal(&self.cache, 1, &self.y, dy)?;
                    let y_cell = 3f64.powi(-(dy as i32));
                    let mut bins: HashMap<i64, f64> = HashMap::new();
                    for (c, m) in ys.iter() {
                        let v = by_scale * ((*c as f64 + 0.5) * y_cell);
                        *bins.entry((v / h).floor() as i64).or_insert(0.0) += m;
                    }
                    out.push(entropy_of(bins.values()));
                }
                Projection::Slope(s) => {
                    let by = s * by_scale;
                    let dy = marginal_depth(by.abs().max(1e-9), level);
                    let ys = cached_marginal(&self.cache, 1, &self.y, dy)?;
                    let y_cell = 3f64.powi(-(dy as i32));
                    // y side re-binned to quarter-bins (signed indices)
                    let mut y_quarter: HashMap<i64, f64> = HashMap::new();
                    for (c, m) in ys.iter() {
                        let v = by * ((*c as f64 + 0.5) * y_cell);
                        *y_quarter.entry((v / quarter).floor() as i64).or_insert(0.0) += m;
                    }
                    let y_list: Vec<(i64, f64)> = y_quarter.into_iter().collect();
                    let full = quarter_convolve(&x_quarter, &x_prefix, &y_list);
                    out.push(entropy_of(full.iter()));
                }
            }
        }
        Ok(out)
    }
}

/// Width-h histogram of the sum of two independent quarter-bin (width h/4)
/// histograms, by midpoint algebra: a pair of quarter-bin midpoints sums to
/// quarter-index t = jx + jy + 1, which is interior to full bin ⌊t/4⌋ unless
/// t ≡ 0 mod 4, a bin boundary whose mass is split evenly. Windowed with
/// prefix sums over the x side: bin b collects x-indices 4b−t0 … 4b+3−t0 for
/// each y-index jy (t0 = jy + 1), with half of each boundary element moved
/// down one bin.
fn quarter_convolve(
    x_quarter: &[f64],
    x_prefix: &[f64],
    y_list: &[(i64, f64)],
) -> Vec<f64> {
    let nx = x_quarter.len() as i64;
    if nx == 0 || y_list.is_empty() {
        return Vec::new();
    }
    let jmin = y_list.iter().map(|(j, _)| *j).min().unwrap();
    let jmax = y_list.iter().map(|(j, _)| *j).max().unwrap();
    let bin_off = (jmin + 1).div_euclid(4) - 1;
    let nbins = ((jmax + nx).div_euclid(4) - bin_off + 1) as usize;
    let mut full = vec![0.0f64; nbins];
    let xq = |j: i64| -> f64 {
        if (0..nx).contains(&j) {
            x_quarter[j as usize]
        } else {
            0.0
        }
    };
    let window = |a: i64, b: i64| -> f64 {
        let lo = a.clamp(0, nx) as usize;
        let hi = (b + 1).clamp(0, nx) as usize;
        if hi > lo {
            x_prefix[hi] - x_prefix[lo]
        } else {
            0.0
        }
    };
    for (jy, my) in y_list {
        if *my == 0.0 {
            continue;
        }
        let t0 = jy + 1;
        let bmin = t0.div_euclid(4) - 1;
        let bmax = (t0 + nx - 1).div_euclid(4);
        for b in bmin..=bmax {
            let jx0 = 4 * b - t0;
            let s = window(jx0, jx0 + 3) - 0.5 * xq(jx0) + 0.5 * xq(jx0 + 4);
            if s != 0.0 {
                full[(b - bin_off) as usize] += my * s;
            }
        }
    }
    full
}

fn marginal_depth(scale: f64, level: u32) -> u32 {
    // 3-adic depth with cells at most 1/8 of the output bin
    (((8.0 * scale).ln() + f64::from(level) * crate::geometry::LOG2) / LOG3)
        .ceil()
        .clamp(1.0, 17.0) as u32
}

fn entropy_of<'a>(masses: impl Iterator<Item = &'a f64>) -> f64 {
    -masses.filter(|m| **m > 0.0).map(|m| m * m.ln()).sum::<f64>()
}

impl CpMeasure for RectProductState {
    fn child_masses(&self, children: &[AxisBox]) -> Result<Vec<f64>> {
        let px = Self::value_probs(&self.x)?;
        if self.sixfold() {
            if children.len() != 6 {
                return Err(Error::invalid("sixfold split expected"));
            }
            let py = Self::value_probs(&self.y)?;
            let mut masses = Vec::with_capacity(6);
            for half in 0..2 {
                for third in 0..3 {
                    masses.push(px[half] * py[third]);
                }
            }
            Ok(masses)
        } else {
            if children.len() != 2 {
                return Err(Error::invalid("twofold split expected"));
            }
            Ok(px.clone())
        }
    }

    fn condition(&self, children: &[AxisBox], idx: usize) -> Result<Box<dyn CpMeasure>> {
        let w_next = w_of_box(&children[idx])?;
        let (x, y) = if self.sixfold() {
            (
                Self::restrict_value(&self.x, (idx / 3) as u8)?,
                Self::restrict_value(&self.y, (idx % 3) as u8)?,
            )
        } else {
            (Self::restrict_value(&self.x, idx as u8)?, self.y.clone())
        };
        Ok(Box::new(RectProductState { x, y, w: w_next, cache: self.cache.clone() }))
    }

    fn projected_entropy(&self, proj: &Projection, level: u32) -> Result<f64> {
        Ok(self.entropies(std::slice::from_ref(proj), level)?[0])
    }

    fn projected_entropies(&self, projs: &[Projection], level: u32) -> Result<Vec<f64>> {
        self.entropies(projs, level)
    }

    fn entropy_base(&self) -> u32 {
        2
    }

    fn projected_histogram(&self, proj: &Projection, level: u32) -> Result<GridMeasure> {
        // export path: reuse the shared kernel through a one-slot histogram
        let h = 2f64.powi(-(level as i32));
        let ax = (-self.w / 2.0).exp();
        let by_scale = (self.w / 2.0).exp();
        let dx = level + 3;
        let xs = cached_marginal(&self.cache, 0, &self.x, dx)?;
        let x_cell = 2f64.powi(-(dx as i32));
        let dy = marginal_depth(by_scale, level);
        let ys = cached_marginal(&self.cache, 1, &self.y, dy)?;
        let y_cell = 3f64.powi(-(dy as i32));
        let mut g = GridMeasure::new(1, 2, level);
        match proj {
            Projection::AxisX => {
                for (c, m) in xs.iter() {
                    g.add([((ax * (*c as f64 + 0.5) * x_cell) / h).floor() as i64, 0], *m);
                }
            }
            Projection::AxisY => {
                for (c, m) in ys.iter() {
                    g.add([((by_scale * (*c as f64 + 0.5) * y_cell) / h).floor() as i64, 0], *m);
                }
            }
            Projection::Slope(s) => {
                for (cx, mx) in xs.iter() {
                    let vx = ax * (*cx as f64 + 0.5) * x_cell;
                    for (cy, my) in ys.iter() {
                        let v = vx + s * by_scale * (*cy as f64 + 0.5) * y_cell;
                        g.add([(v / h).floor() as i64, 0], mx * my);
                    }
                }
            }
        }
        Ok(g)
    }
}

// ---------------------------------------------------------------------------
// Grid states (generic fallback)
// ---------------------------------------------------------------------------

/// Histogram-backed state at resolution 2^{-k_res} per axis in the
/// normalized frame. Conditioning re-bins cell centers; exactness degrades
/// with coarse grids, so this is the fallback for measures with no exact
/// representation.
pub struct GridState {
    pub grid: GridMeasure,
}

impl GridState {
    pub fn new(grid: GridMeasure) -> GridState {
        GridState { grid }
    }

    pub fn from_points(points: &[[f64; 2]], dim: usize, k_res: u32) -> GridState {
        let mut grid = GridMeasure::new(dim, 2, k_res);
        let w = 1.0 / points.len() as f64;
        for p in points {
            grid.add_point(&p[..dim], w);
        }
        GridState { grid }
    }

    fn center(&self, cell: &[i64; 2]) -> [f64; 2] {
        let r = self.grid.resolution();
        [
            (cell[0] as f64 + 0.5) * r,
            (cell[1] as f64 + 0.5) * r,
        ]
    }
}

impl CpMeasure for GridState {
    fn child_masses(&self, children: &[AxisBox]) -> Result<Vec<f64>> {
        let mut masses = vec![0.0; children.len()];
        for (cell, m) in self.grid.cells() {
            let c = self.center(cell);
            if let Some(i) = children.iter().position(|b| b.contains(&c[..self.grid.dim])) {
                masses[i] += m;
            }
        }
        // cells straddling the frame boundary can leak mass; renormalize the
        // deficit when it is within tolerance, otherwise report it
        let total: f64 = masses.iter().sum();
        if total <= 0.0 {
            return Err(Error::MassDeficit { sum: total });
        }
        for m in &mut masses {
            *m /= total;
        }
        Ok(masses)
    }

    fn condition(&self, children: &[AxisBox], idx: usize) -> Result<Box<dyn CpMeasure>> {
        let child = &children[idx];
        let (_, t) = normalize_box(child)?;
        let mut grid = GridMeasure::new(self.grid.dim, 2, self.grid.level);
        for (cell, m) in self.grid.cells() {
            let c = self.center(cell);
            if child.contains(&c[..self.grid.dim]) {
                let mapped = t.apply(&c[..self.grid.dim]);
                grid.add_point(&mapped[..self.grid.dim], *m);
            }
        }
        if grid.total_mass() <= 0.0 {
            return Err(Error::UndefinedConditional { word: format!("grid child {idx}") });
        }
        grid.normalize();
        Ok(Box::new(GridState { grid }))
    }

    fn projected_entropy(&self, proj: &Projection, level: u32) -> Result<f64> {
        Ok(self.projected_histogram(proj, level)?.h_partition())
    }

    fn entropy_base(&self) -> u32 {
        2
    }

    fn projected_histogram(&self, proj: &Projection, level: u32) -> Result<GridMeasure> {
        if level > self.grid.level {
            return Err(Error::InsufficientResolution { have: self.grid.level, need: level });
        }
        let mut g = GridMeasure::new(1, 2, level);
        for (cell, m) in self.grid.cells() {
            let c = self.center(cell);
            let v = if self.grid.dim == 1 { c[0] } else { proj.apply(&c) };
            g.add_point(&[v], *m);
        }
        Ok(g)
    }
}

// ---------------------------------------------------------------------------
// Initial states
// ---------------------------------------------------------------------------

/// Initial state of the base-b cube chain for a digit-aligned spec.
pub fn cube_initial(spec: &MeasureSpec) -> Result<CpState> {
    let geo = geo_digit_measure(spec)?;
    let boxx = AxisBox::unit_cube(geo.dim);
    Ok(CpState { measure: Box::new(CubeDigitState::new(geo)), boxx, w: None })
}

/// Initial state τ = S_w(μ^x × ν^y) of the ×2/×3 chain. Pasts enter through
/// the component start states: product measures need none, Markov components
/// draw their start symbol from the stationary law. `w0` defaults to a
/// uniform draw from [0, log 3).
pub fn x2x3_initial(
    mu_spec: &MeasureSpec,
    nu_spec: &MeasureSpec,
    w0: Option<f64>,
    rng: &mut Pcg64,
) -> Result<CpState> {
    x2x3_initial_cached(mu_spec, nu_spec, w0, rng, Arc::new(MarginalCache::default()))
}

/// As `x2x3_initial`, sharing a marginal-histogram cache across states.
pub fn x2x3_initial_cached(
    mu_spec: &MeasureSpec,
    nu_spec: &MeasureSpec,
    w0: Option<f64>,
    rng: &mut Pcg64,
    cache: MarginalCacheHandle,
) -> Result<CpState> {
    let mu = past_conditioned(mu_spec, 2, rng)?;
    let nu = past_conditioned(nu_spec, 3, rng)?;
    let w = match w0 {
        Some(w) => {
            if !(0.0..LOG3).contains(&w) {
                return Err(Error::WOutOfRange { w });
            }
            w
        }
        None => rng.gen::<f64>() * LOG3,
    };
    let boxx = AxisBox::rect([0.0, 0.0], [1.0, w.exp()])?;
    let mut state = RectProductState::new(mu, nu, w)?;
    state.cache = cache;
    Ok(CpState { measure: Box::new(state), boxx, w: Some(w) })
}

fn past_conditioned(spec: &MeasureSpec, base: u32, rng: &mut Pcg64) -> Result<GeoDigitMeasure> {
    let geo = geo_digit_measure(spec)?;
    if geo.base != base || geo.dim != 1 {
        return Err(Error::invalid(format!(
            "component must be a one-dimensional base-{base} digit measure"
        )));
    }
    match spec {
        MeasureSpec::BernoulliDigits { .. } => Ok(geo),
        MeasureSpec::MarkovDigits { transition, initial, .. } => {
            let m = crate::measures::MarkovDigitMeasure {
                transition: transition.clone(),
                initial: initial.clone(),
                start: None,
            };
            let pi = m.stationary();
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut start = pi.len() - 1;
            for (i, p) in pi.iter().enumerate() {
                acc += p;
                if u < acc {
                    start = i;
                    break;
                }
            }
            Ok(GeoDigitMeasure {
                measure: Arc::new(crate::measures::MarkovDigitMeasure {
                    transition: transition.clone(),
                    initial: initial.clone(),
                    start: Some(start),
                }),
                base: geo.base,
                dim: 1,
                digit_coords: geo.digit_coords.clone(),
            })
        }
        _ => Err(Error::invalid(
            "×2/×3 chain components must be Bernoulli or Markov digit measures",
        )),
    }
}
