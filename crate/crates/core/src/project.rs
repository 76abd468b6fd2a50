//! Projections, pushforward histograms, the normalized finite-scale
//! entropies e_q, and the scenery-average estimators that lower-bound the
//! dimension of projected measures, including slope scans.

use std::sync::Arc;

use rayon::prelude::*;

use crate::chain::{
    cp_run, cp_step, ChainRun, CpState, CubeDigitState, EntropyCache, EstimateWithError,
    GridState, MarginalCacheHandle,
};
use crate::error::{Error, Result};
use crate::geometry::{
    operator_by_name, AxisBox, BaseBOperator, PartitionOperator, PartitionOperatorId, RwOperator,
    LOG3,
};
use crate::grid::GridMeasure;
use crate::measures::{geo_digit_measure, sample_point, GeoDigitMeasure, MeasureSpec};
use crate::rng::{rng_from_seed, split_seed};
use crate::tree::mean_stderr;

/// A linear map R² → R (or the identity on R). `Slope(s)` is
/// π_s(x, y) = x + s·y; the coordinate projections carry their own tags and
/// are never encoded as extreme slopes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    Slope(f64),
    AxisX,
    AxisY,
}

impl Projection {
    pub fn slope(s: f64) -> Result<Projection> {
        if !s.is_finite() {
            return Err(Error::invalid("slope must be finite"));
        }
        Ok(Projection::Slope(s))
    }

    pub fn apply(&self, p: &[f64]) -> f64 {
        match self {
            Projection::Slope(s) => p[0] + s * p.get(1).copied().unwrap_or(0.0),
            Projection::AxisX => p[0],
            Projection::AxisY => p.get(1).copied().unwrap_or(p[0]),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Projection::Slope(s) => format!("{s}"),
            Projection::AxisX => "axis-x".into(),
            Projection::AxisY => "axis-y".into(),
        }
    }
}

/// Exact pushforward histogram of a digit measure: cylinders are refined one
/// extra level past the point where their projected image fits well inside a
/// bin, then midpoint-assigned. Returns the histogram and the worst
/// image-diameter-to-bin ratio of the refinement (the recorded midpoint
/// slack).
pub fn push_grid_exact(
    geo: &GeoDigitMeasure,
    proj: &Projection,
    level: u32,
    base: u32,
) -> Result<(GridMeasure, f64)> {
    let bin = f64::from(base).powi(-(level as i32));
    let stretch = match proj {
        Projection::Slope(s) => 1.0 + s.abs(),
        _ => 1.0,
    };
    // depth with image diameter <= bin/4
    let gb = f64::from(geo.base);
    let mut depth = 1u32;
    while stretch * gb.powi(-(depth as i32)) > bin / 4.0 {
        depth += 1;
        if depth > 40 {
            return Err(Error::invalid("pushforward refinement too deep"));
        }
    }
    let alphabet = geo.measure.alphabet_size() as f64;
    if alphabet.powi(depth as i32) > 3e7 {
        return Err(Error::invalid(format!(
            "exact pushforward would expand {alphabet}^{depth} cylinders"
        )));
    }
    let slack = stretch * gb.powi(-(depth as i32)) / bin;
    let mut grid = GridMeasure::new(1, base, level);
    crate::tree::for_each_positive_leaf(geo.measure.as_ref(), depth as usize, &mut |word, mass| {
        let corner = geo.cell_corner(word);
        let half = geo.cell_side(word.len()) / 2.0;
        let mid = [corner[0] + half, corner[1] + half];
        grid.add_point(&[proj.apply(&mid[..geo.dim.max(1)])], mass);
    })?;
    Ok((grid, slack))
}

/// Monte-Carlo pushforward histogram from a point sampler.
pub fn push_grid_sampler(
    spec: &MeasureSpec,
    proj: &Projection,
    level: u32,
    base: u32,
    n_samples: usize,
    seed: u64,
) -> Result<GridMeasure> {
    let mut rng = rng_from_seed(seed);
    let mut grid = GridMeasure::new(1, base, level);
    let precision = level + 4;
    let w = 1.0 / n_samples as f64;
    for _ in 0..n_samples {
        let p = sample_point(spec, &mut rng, precision)?;
        grid.add_point(&[proj.apply(&p)], w);
    }
    Ok(grid)
}

/// Histogram of `map` over explicit points; for stability experiments with
/// perturbed projections.
pub fn push_grid_map(
    points: &[[f64; 2]],
    map: impl Fn(&[f64; 2]) -> f64,
    level: u32,
    base: u32,
) -> GridMeasure {
    let mut grid = GridMeasure::new(1, base, level);
    let w = 1.0 / points.len() as f64;
    for p in points {
        grid.add_point(&[map(p)], w);
    }
    grid
}

/// e_q of an already-projected histogram: H(partition at level q)/(q·log b).
/// The grid must resolve at least level q; finer grids are coarsened.
pub fn e_q_grid(projected: &GridMeasure, q: u32) -> Result<f64> {
    if q == 0 {
        return Err(Error::invalid("q must be positive"));
    }
    if projected.level < q {
        return Err(Error::InsufficientResolution { have: projected.level, need: q });
    }
    let at_q = projected.coarsen(projected.level - q);
    Ok(at_q.h_partition() / (f64::from(q) * f64::from(projected.base).ln()))
}

// ---------------------------------------------------------------------------
// Chain factories
// ---------------------------------------------------------------------------

/// Produces independent chain starting states for the scenery estimators;
/// the operator travels with the factory.
pub trait ChainFactory: Send + Sync {
    fn initial(&self, seed: u64) -> Result<CpState>;
    fn operator(&self) -> &dyn PartitionOperator;
}

/// Base-b cube chain over a digit-aligned spec.
pub struct CubeChainFactory {
    geo: GeoDigitMeasure,
    op: BaseBOperator,
    cache: Arc<EntropyCache>,
}

impl CubeChainFactory {
    pub fn new(spec: &MeasureSpec) -> Result<CubeChainFactory> {
        let geo = geo_digit_measure(spec)?;
        let op = BaseBOperator { base: geo.base };
        Ok(CubeChainFactory { geo, op, cache: Arc::new(EntropyCache::default()) })
    }
}

impl ChainFactory for CubeChainFactory {
    fn initial(&self, _seed: u64) -> Result<CpState> {
        Ok(CpState {
            measure: Box::new(CubeDigitState::new_shared(self.geo.clone(), self.cache.clone())),
            boxx: AxisBox::unit_cube(self.geo.dim),
            w: None,
        })
    }

    fn operator(&self) -> &dyn PartitionOperator {
        &self.op
    }
}

/// ×2/×3 product chain; pasts and the initial eccentricity are drawn fresh
/// per sample.
pub struct X2x3ChainFactory {
    mu: MeasureSpec,
    nu: MeasureSpec,
    w0: Option<f64>,
    op: RwOperator,
    cache: MarginalCacheHandle,
}

impl X2x3ChainFactory {
    pub fn new(mu: MeasureSpec, nu: MeasureSpec, w0: Option<f64>) -> Result<X2x3ChainFactory> {
        // validate components once up front
        let mg = geo_digit_measure(&mu)?;
        let ng = geo_digit_measure(&nu)?;
        if mg.base != 2 || ng.base != 3 || mg.dim != 1 || ng.dim != 1 {
            return Err(Error::invalid(
                "×2/×3 chain needs a base-2 and a base-3 digit measure on [0,1]",
            ));
        }
        Ok(X2x3ChainFactory {
            mu,
            nu,
            w0,
            op: RwOperator,
            cache: MarginalCacheHandle::default(),
        })
    }
}

impl ChainFactory for X2x3ChainFactory {
    fn initial(&self, seed: u64) -> Result<CpState> {
        let mut rng = rng_from_seed(split_seed(seed, 0x696e6974));
        let state = crate::chain::x2x3_initial_cached(
            &self.mu,
            &self.nu,
            self.w0,
            &mut rng,
            self.cache.clone(),
        )?;
        Ok(state)
    }

    fn operator(&self) -> &dyn PartitionOperator {
        &self.op
    }
}

/// Grid-histogram chain over an arbitrary point-sampled measure: the
/// fallback when no exact representation exists.
pub struct GridChainFactory {
    spec: MeasureSpec,
    op_id: PartitionOperatorId,
    pub n_points: usize,
    pub k_res: u32,
    op: Box<dyn PartitionOperator>,
}

impl GridChainFactory {
    pub fn new(
        spec: MeasureSpec,
        op_id: PartitionOperatorId,
        n_points: usize,
        k_res: u32,
    ) -> Result<GridChainFactory> {
        spec.validate()?;
        let op = match op_id {
            PartitionOperatorId::BaseB(b) => operator_by_name(&format!("base-{b}")),
            PartitionOperatorId::Rw => operator_by_name("rw"),
        }
        .ok_or_else(|| Error::invalid("unknown operator"))?;
        Ok(GridChainFactory { spec, op_id, n_points, k_res, op })
    }
}

impl ChainFactory for GridChainFactory {
    fn initial(&self, seed: u64) -> Result<CpState> {
        let mut rng = rng_from_seed(split_seed(seed, 0x67726964));
        let dim = self.spec.dim()?;
        let w0 = match self.op_id {
            PartitionOperatorId::Rw => Some(rng.gen_range(0.0..LOG3)),
            PartitionOperatorId::BaseB(_) => None,
        };
        let mut points = Vec::with_capacity(self.n_points);
        for _ in 0..self.n_points {
            let p = sample_point(&self.spec, &mut rng, self.k_res + 4)?;
            let mut q = [p[0], *p.get(1).unwrap_or(&0.0)];
            if let Some(w) = w0 {
                // move the sample into the normalized frame of R_w
                q = [(-w / 2.0).exp() * q[0], (w / 2.0).exp() * q[1]];
            }
            points.push(q);
        }
        let state = GridState::from_points(&points, dim, self.k_res);
        let boxx = match w0 {
            Some(w) => AxisBox::rect([0.0, 0.0], [1.0, w.exp()])?,
            None => AxisBox::unit_cube(dim),
        };
        Ok(CpState { measure: Box::new(state), boxx, w: w0 })
    }

    fn operator(&self) -> &dyn PartitionOperator {
        self.op.as_ref()
    }
}

use rand::Rng as _;

/// Pick the natural chain for a spec and operator: exact product states for
/// base-2 × base-3 products under the ×2/×3 operator, exact cube states for
/// digit-aligned specs under base-b, and grid states otherwise.
pub fn chain_factory(
    spec: &MeasureSpec,
    op_id: PartitionOperatorId,
    grid_points: usize,
    grid_res: u32,
) -> Result<Box<dyn ChainFactory>> {
    match op_id {
        PartitionOperatorId::Rw => {
            if let MeasureSpec::Product { left, right } = spec {
                if let Ok(f) = X2x3ChainFactory::new((**left).clone(), (**right).clone(), None) {
                    return Ok(Box::new(f));
                }
            }
            Ok(Box::new(GridChainFactory::new(spec.clone(), op_id, grid_points, grid_res)?))
        }
        PartitionOperatorId::BaseB(b) => {
            match geo_digit_measure(spec) {
                Ok(geo) if geo.base == b => Ok(Box::new(CubeChainFactory::new(spec)?)),
                _ => Ok(Box::new(GridChainFactory::new(spec.clone(), op_id, grid_points, grid_res)?)),
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Scenery-average estimators
// ---------------------------------------------------------------------------

/// Raw lower-bound estimate for the dimension of a projected measure;
/// the O(1/q) correction of the underlying bound is not subtracted, `q` and
/// the scale base are reported alongside.
#[derive(Debug, Clone, Copy)]
pub struct ProjDimEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub q: u32,
    pub entropy_base: u32,
    pub steps: usize,
    pub n_samples: usize,
}

/// Per-slope scan output.
#[derive(Debug, Clone)]
pub struct ScanRow {
    pub proj: Projection,
    pub estimate: f64,
    pub stderr: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone)]
pub struct ScanResult {
    pub rows: Vec<ScanRow>,
    pub q: u32,
    pub steps: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub epsilon: f64,
}

fn chain_means(
    factory: &dyn ChainFactory,
    projs: &[Projection],
    q: u32,
    steps: usize,
    sample_seed: u64,
) -> Result<Vec<f64>> {
    let op = factory.operator();
    let mut state = factory.initial(sample_seed)?;
    let mut rng = rng_from_seed(split_seed(sample_seed, 0x73746570));
    let mut sums = vec![0.0f64; projs.len()];
    for _ in 0..steps {
        let (next, _, _) = cp_step(&state, op, &mut rng)?;
        state = next;
        let base = f64::from(state.measure.entropy_base());
        let hs = state.measure.projected_entropies(projs, q)?;
        for (acc, h) in sums.iter_mut().zip(hs) {
            *acc += h / (f64::from(q) * base.ln());
        }
    }
    for acc in &mut sums {
        *acc /= steps as f64;
    }
    Ok(sums)
}

/// Monte-Carlo estimate of the mean scenery entropy average
/// (1/N) Σ_n e_q(π μ^{x,n}) over independent chains.
pub fn projection_dim_lower(
    factory: &dyn ChainFactory,
    proj: &Projection,
    q: u32,
    steps: usize,
    n_samples: usize,
    seed: u64,
) -> Result<ProjDimEstimate> {
    let scan = scan_projections(factory, &[*proj], q, steps, n_samples, seed, f64::INFINITY)?;
    let row = &scan.rows[0];
    Ok(ProjDimEstimate {
        estimate: row.estimate,
        stderr: row.stderr,
        q,
        entropy_base: factory.initial(seed)?.measure.entropy_base(),
        steps,
        n_samples,
    })
}

/// The per-slope estimator over a shared family of sampled trajectories.
/// Rows whose estimate falls below (max over rows) − epsilon are flagged.
pub fn scan_projections(
    factory: &dyn ChainFactory,
    projs: &[Projection],
    q: u32,
    steps: usize,
    n_samples: usize,
    seed: u64,
    epsilon: f64,
) -> Result<ScanResult> {
    if steps == 0 || n_samples == 0 || projs.is_empty() {
        return Err(Error::invalid("steps, samples and projections must be nonempty"));
    }
    let per_sample: Result<Vec<Vec<f64>>> = (0..n_samples)
        .into_par_iter()
        .map(|i| chain_means(factory, projs, q, steps, split_seed(seed, i as u64)))
        .collect();
    let per_sample = per_sample?;
    let mut rows = Vec::with_capacity(projs.len());
    for (j, proj) in projs.iter().enumerate() {
        let vals: Vec<f64> = per_sample.iter().map(|v| v[j]).collect();
        let (mean, stderr) = mean_stderr(&vals);
        rows.push(ScanRow { proj: *proj, estimate: mean, stderr, flagged: false });
    }
    let max = rows.iter().map(|r| r.estimate).fold(f64::NEG_INFINITY, f64::max);
    for r in &mut rows {
        r.flagged = r.estimate < max - epsilon;
    }
    Ok(ScanResult { rows, q, steps, n_samples, seed, epsilon })
}

/// Convenience wrapper: run one chain and return it together with its
/// dimension estimate.
pub fn run_chain_with_dimension(
    factory: &dyn ChainFactory,
    steps: usize,
    functionals: &[crate::chain::ChainFunctional],
    seed: u64,
) -> Result<(ChainRun, EstimateWithError)> {
    let initial = factory.initial(seed)?;
    let run = cp_run(initial, steps, factory.operator(), functionals, split_seed(seed, 0x72756e))?;
    let rho = factory.operator().rho();
    let dim = crate::chain::chain_dimension(&run, rho);
    Ok((run, dim))
}
