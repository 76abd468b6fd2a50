//! The experiment registry: each experiment variant implements a common
//! trait, is registered by name, and is selected at runtime from the config
//! tag.

use serde_json::json;

use fracdim_core::chain::{cp_run, chain_dimension, ChainFunctional};
use fracdim_core::geometry::PartitionOperatorId;
use fracdim_core::grid::{circle_convolve, dimension_slope};
use fracdim_core::lift::{
    entropy_defect, faithfulness_check, half_sum_map, identity_map, lift, verify_lift,
    LiftedCubes,
};
use fracdim_core::measures::{
    analytic_summary, bc_block_entropy, bc_dimension_slope, build_tree_float, geo_digit_measure,
    ks_statistic_vs_uniform, sample_point, MeasureSpec,
};
use fracdim_core::project::{
    chain_factory, push_grid_exact, scan_projections, Projection,
};
use fracdim_core::rng::{rng_from_seed, split_seed};

use crate::config::{ExperimentConfig, SlopeGrid};
use crate::output::{fmt_g6, CsvTable};

/// What an experiment hands back: the rendered CSV plus a free-form
/// summary that goes into the manifest.
pub struct RunOutput {
    pub csv: String,
    pub summary: serde_json::Value,
}

pub enum RunFailure {
    /// Configuration is invalid (exit code 2).
    Config(String),
    /// A module failed at runtime (exit code 3).
    Runtime(String),
}

pub trait Experiment: Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    /// A complete example configuration for `schema`.
    fn example(&self) -> serde_json::Value;
    fn validate(&self, cfg: &ExperimentConfig) -> Result<(), String>;
    fn run(&self, cfg: &ExperimentConfig) -> Result<RunOutput, RunFailure>;
}

pub fn registry() -> Vec<Box<dyn Experiment>> {
    vec![
        Box::new(DimExperiment),
        Box::new(ScanExperiment),
        Box::new(CpChainExperiment),
        Box::new(BcGridExperiment),
        Box::new(ConvolveExperiment),
        Box::new(LiftCheckExperiment),
    ]
}

pub fn find(name: &str) -> Option<Box<dyn Experiment>> {
    registry().into_iter().find(|e| e.name() == name)
}

fn runtime(e: fracdim_core::Error) -> RunFailure {
    RunFailure::Runtime(e.to_string())
}

fn need_measure(cfg: &ExperimentConfig) -> Result<MeasureSpec, String> {
    let spec = cfg
        .measure
        .as_ref()
        .ok_or_else(|| "field `measure` is required".to_string())?
        .to_spec();
    spec.validate().map_err(|e| e.to_string())?;
    Ok(spec)
}

fn base_comments(table: &mut CsvTable, cfg: &ExperimentConfig) {
    table.comment("experiment", cfg.experiment.clone());
    table.comment("seed", cfg.seed.to_string());
}

// ---------------------------------------------------------------------------
// dim
// ---------------------------------------------------------------------------

struct DimExperiment;

impl Experiment for DimExperiment {
    fn name(&self) -> &'static str {
        "dim"
    }

    fn description(&self) -> &'static str {
        "Monte-Carlo dimension lower bound from local entropy averages on the \
         exact tree of a digit-aligned measure, next to its closed-form dimension."
    }

    fn example(&self) -> serde_json::Value {
        json!({
            "experiment": "dim",
            "seed": 1,
            "output": "out/dim.csv",
            "measure": {"type": "bernoulli-digits", "base": 3, "digits": [0, 2], "probs": [0.5, 0.5]},
            "params": {"depth": 15, "samples": 500}
        })
    }

    fn validate(&self, cfg: &ExperimentConfig) -> Result<(), String> {
        let spec = need_measure(cfg)?;
        geo_digit_measure(&spec).map_err(|e| e.to_string())?;
        let depth = cfg.params.depth.unwrap_or(15);
        if !(1..=30).contains(&depth) {
            return Err("depth must lie in 1..=30".into());
        }
        if cfg.params.samples.unwrap_or(500) == 0 {
            return Err("samples must be positive".into());
        }
        Ok(())
    }

    fn run(&self, cfg: &ExperimentConfig) -> Result<RunOutput, RunFailure> {
        let spec = need_measure(cfg).map_err(RunFailure::Config)?;
        let depth = cfg.params.depth.unwrap_or(15);
        let samples = cfg.params.samples.unwrap_or(500);
        let tm = build_tree_float(&spec, depth).map_err(runtime)?;
        let est = tm.dim_lower_estimate(samples, depth, cfg.seed).map_err(runtime)?;
        let analytic = analytic_summary(&spec).ok();
        let mut table = CsvTable::new(&[
            "estimate",
            "stderr",
            "martingale_diagnostic",
            "analytic_dimension",
            "depth",
            "samples",
        ]);
        base_comments(&mut table, cfg);
        table.comment("depth", depth.to_string());
        table.comment("samples", samples.to_string());
        table.row(vec![
            fmt_g6(est.mean),
            fmt_g6(est.stderr),
            fmt_g6(est.martingale_diagnostic),
            analytic.map_or("nan".into(), |a| fmt_g6(a.analytic_dimension)),
            depth.to_string(),
            samples.to_string(),
        ]);
        Ok(RunOutput {
            csv: table.render(),
            summary: json!({"estimate": est.mean, "stderr": est.stderr}),
        })
    }
}

// ---------------------------------------------------------------------------
// scan
// ---------------------------------------------------------------------------

struct ScanExperiment;

fn scan_projections_list(grid: &SlopeGrid) -> Vec<Projection> {
    let mut projs = Vec::new();
    if grid.include_axes {
        projs.push(Projection::AxisX);
        projs.push(Projection::AxisY);
    }
    for s in grid.values() {
        projs.push(Projection::Slope(s));
        if grid.two_sided {
            projs.push(Projection::Slope(-s));
        }
    }
    projs
}

impl Experiment for ScanExperiment {
    fn name(&self) -> &'static str {
        "scan"
    }

    fn description(&self) -> &'static str {
        "Projected-dimension lower bounds over a slope grid: scenery averages \
         of the normalized scale-2^-q entropies along CP-chain trajectories."
    }

    fn example(&self) -> serde_json::Value {
        json!({
            "experiment": "scan",
            "seed": 7,
            "output": "out/scan.csv",
            "measure": {"type": "product",
                "left": {"type": "bernoulli-digits", "base": 2, "digits": [0, 1], "probs": [0.9, 0.1]},
                "right": {"type": "bernoulli-digits", "base": 3, "digits": [0, 2], "probs": [0.9, 0.1]}},
            "params": {"operator": "rw", "q": 8, "steps": 400, "samples": 200,
                        "slopes": {"from": 0.1, "to": 2.0, "count": 10, "two_sided": true, "include_axes": true},
                        "epsilon": 0.05}
        })
    }

    fn validate(&self, cfg: &ExperimentConfig) -> Result<(), String> {
        let spec = need_measure(cfg)?;
        let op_name = cfg.params.operator.clone().unwrap_or_else(|| "rw".into());
        let op = PartitionOperatorId::parse(&op_name)
            .ok_or_else(|| format!("unknown operator `{op_name}`"))?;
        chain_factory(&spec, op, 1000, 8).map_err(|e| e.to_string())?;
        let slopes = cfg
            .params
            .slopes
            .as_ref()
            .ok_or_else(|| "field `params.slopes` is required".to_string())?;
        if slopes.count == 0 {
            return Err("slope grid must be nonempty".into());
        }
        if cfg.params.steps.unwrap_or(400) == 0 || cfg.params.samples.unwrap_or(200) == 0 {
            return Err("steps and samples must be positive".into());
        }
        Ok(())
    }

    fn run(&self, cfg: &ExperimentConfig) -> Result<RunOutput, RunFailure> {
        let spec = need_measure(cfg).map_err(RunFailure::Config)?;
        let op_name = cfg.params.operator.clone().unwrap_or_else(|| "rw".into());
        let op = PartitionOperatorId::parse(&op_name)
            .ok_or_else(|| RunFailure::Config(format!("unknown operator `{op_name}`")))?;
        let q = cfg.params.q.unwrap_or(8);
        let steps = cfg.params.steps.unwrap_or(400);
        let samples = cfg.params.samples.unwrap_or(200);
        let epsilon = cfg.params.epsilon.unwrap_or(0.05);
        let grid_points = cfg.params.grid_points.unwrap_or(100_000);
        let resolution = cfg.params.resolution.unwrap_or(12);
        let slopes = cfg.params.slopes.clone().unwrap();
        let projs = scan_projections_list(&slopes);

        let factory = chain_factory(&spec, op, grid_points, resolution).map_err(runtime)?;
        let scan = scan_projections(factory.as_ref(), &projs, q, steps, samples, cfg.seed, epsilon)
            .map_err(runtime)?;

        let mut table =
            CsvTable::new(&["slope", "estimate", "stderr", "q", "steps", "samples", "seed", "flagged"]);
        base_comments(&mut table, cfg);
        table.comment("operator", op_name);
        table.comment("q", q.to_string());
        table.comment("steps", steps.to_string());
        table.comment("samples", samples.to_string());
        table.comment("epsilon", fmt_g6(epsilon));
        for row in &scan.rows {
            table.row(vec![
                row.proj.label(),
                fmt_g6(row.estimate),
                fmt_g6(row.stderr),
                q.to_string(),
                steps.to_string(),
                samples.to_string(),
                cfg.seed.to_string(),
                (row.flagged as u8).to_string(),
            ]);
        }
        let max = scan.rows.iter().map(|r| r.estimate).fold(f64::NEG_INFINITY, f64::max);
        Ok(RunOutput {
            csv: table.render(),
            summary: json!({"max_estimate": max, "rows": scan.rows.len()}),
        })
    }
}

// ---------------------------------------------------------------------------
// cpchain
// ---------------------------------------------------------------------------

struct CpChainExperiment;

impl Experiment for CpChainExperiment {
    fn name(&self) -> &'static str {
        "cpchain"
    }

    fn description(&self) -> &'static str {
        "One CP-chain trajectory: per-step child choices, transition \
         log-masses and functional values, with the chain dimension in the \
         manifest."
    }

    fn example(&self) -> serde_json::Value {
        json!({
            "experiment": "cpchain",
            "seed": 11,
            "output": "out/chain.csv",
            "measure": {"type": "bernoulli-digits", "base": 3, "digits": [0, 2], "probs": [0.5, 0.5]},
            "params": {"operator": "base-3", "steps": 10000}
        })
    }

    fn validate(&self, cfg: &ExperimentConfig) -> Result<(), String> {
        let spec = need_measure(cfg)?;
        let op_name = cfg.params.operator.clone().unwrap_or_else(|| "base-2".into());
        let op = PartitionOperatorId::parse(&op_name)
            .ok_or_else(|| format!("unknown operator `{op_name}`"))?;
        chain_factory(&spec, op, 1000, 8).map_err(|e| e.to_string())?;
        if cfg.params.steps.unwrap_or(1000) == 0 {
            return Err("steps must be positive".into());
        }
        Ok(())
    }

    fn run(&self, cfg: &ExperimentConfig) -> Result<RunOutput, RunFailure> {
        let spec = need_measure(cfg).map_err(RunFailure::Config)?;
        let op_name = cfg.params.operator.clone().unwrap_or_else(|| "base-2".into());
        let op_id = PartitionOperatorId::parse(&op_name)
            .ok_or_else(|| RunFailure::Config(format!("unknown operator `{op_name}`")))?;
        let steps = cfg.params.steps.unwrap_or(1000);
        let grid_points = cfg.params.grid_points.unwrap_or(100_000);
        let resolution = cfg.params.resolution.unwrap_or(12);
        let factory = chain_factory(&spec, op_id, grid_points, resolution).map_err(runtime)?;

        let mut functionals = Vec::new();
        if matches!(op_id, PartitionOperatorId::Rw) {
            functionals.push(ChainFunctional::eccentricity());
        }
        let initial = factory.initial(cfg.seed).map_err(runtime)?;
        let run = cp_run(
            initial,
            steps,
            factory.operator(),
            &functionals,
            split_seed(cfg.seed, 0x636861696e),
        )
        .map_err(runtime)?;
        let dim = chain_dimension(&run, factory.operator().rho());

        // the trajectory CSV is the artifact; prepend the knob comments
        let mut csv = String::new();
        csv.push_str(&format!("# experiment={}\n# seed={}\n", cfg.experiment, cfg.seed));
        csv.push_str(&format!("# operator={op_name}\n# steps={steps}\n"));
        csv.push_str(&format!(
            "# dimension_estimate={}\n# dimension_stderr={}\n",
            fmt_g6(dim.mean),
            fmt_g6(dim.stderr)
        ));
        csv.push_str(&run.to_csv());

        Ok(RunOutput {
            csv,
            summary: json!({"dimension": dim.mean, "stderr": dim.stderr, "steps": steps}),
        })
    }
}

// ---------------------------------------------------------------------------
// bc-grid
// ---------------------------------------------------------------------------

struct BcGridExperiment;

impl Experiment for BcGridExperiment {
    fn name(&self) -> &'static str {
        "bc-grid"
    }

    fn description(&self) -> &'static str {
        "Bernoulli convolutions over a contraction grid: exact block-scale \
         entropies, entropy-slope dimension estimates, and the KS statistic \
         of samples against the uniform law."
    }

    fn example(&self) -> serde_json::Value {
        json!({
            "experiment": "bc-grid",
            "seed": 5,
            "output": "out/bc.csv",
            "params": {"t_grid": [0.30, 0.35, 0.40, 0.45, 0.50], "weight": 0.5,
                        "block_lengths": [4, 8, 12], "samples": 100000}
        })
    }

    fn validate(&self, cfg: &ExperimentConfig) -> Result<(), String> {
        let ts = cfg
            .params
            .t_grid
            .clone()
            .unwrap_or_else(|| vec![0.30, 0.35, 0.40, 0.45, 0.50]);
        if ts.iter().any(|t| !(*t > 0.0 && *t <= 0.5)) {
            return Err("bc-grid contractions must lie in (0, 0.5] for exact enumeration".into());
        }
        let w = cfg.params.weight.unwrap_or(0.5);
        if !(w > 0.0 && w < 1.0) {
            return Err("weight must lie in (0,1)".into());
        }
        if cfg.params.block_lengths.clone().unwrap_or_else(|| vec![4, 8, 12]).is_empty() {
            return Err("block_lengths must be nonempty".into());
        }
        Ok(())
    }

    fn run(&self, cfg: &ExperimentConfig) -> Result<RunOutput, RunFailure> {
        let ts = cfg
            .params
            .t_grid
            .clone()
            .unwrap_or_else(|| vec![0.30, 0.35, 0.40, 0.45, 0.50]);
        let weight = cfg.params.weight.unwrap_or(0.5);
        let blocks = cfg.params.block_lengths.clone().unwrap_or_else(|| vec![4, 8, 12]);
        let n_samples = cfg.params.samples.unwrap_or(100_000);

        let mut table = CsvTable::new(&[
            "t",
            "p",
            "n_block",
            "h_block",
            "h_per_symbol",
            "dim_slope",
            "ks_vs_uniform",
        ]);
        base_comments(&mut table, cfg);
        table.comment("weight", fmt_g6(weight));
        table.comment("samples", n_samples.to_string());

        let mut dim_at_half: Option<f64> = None;
        for (bi, n_block) in blocks.iter().enumerate() {
            for (ti, t) in ts.iter().enumerate() {
                let h = bc_block_entropy(*t, weight, *n_block).map_err(runtime)?;
                let dim = bc_dimension_slope(*t, weight, *n_block, 4).map_err(runtime)?;
                if (*t - 0.5).abs() < 1e-12 {
                    dim_at_half = Some(dim);
                }
                let spec = MeasureSpec::BernoulliConvolution {
                    contraction: *t,
                    weight,
                    block_len: *n_block,
                };
                let mut rng =
                    rng_from_seed(split_seed(cfg.seed, (bi * ts.len() + ti) as u64));
                let mut xs: Vec<f64> = (0..n_samples)
                    .map(|_| sample_point(&spec, &mut rng, 6).map(|p| p[0]))
                    .collect::<Result<_, _>>()
                    .map_err(runtime)?;
                let span = 1.0 / (1.0 - t);
                let ks = ks_statistic_vs_uniform(&mut xs, -span, span);
                table.row(vec![
                    fmt_g6(*t),
                    fmt_g6(weight),
                    n_block.to_string(),
                    fmt_g6(h),
                    fmt_g6(h / *n_block as f64),
                    fmt_g6(dim),
                    fmt_g6(ks),
                ]);
            }
        }
        Ok(RunOutput {
            csv: table.render(),
            summary: json!({"dim_at_t_half": dim_at_half}),
        })
    }
}

// ---------------------------------------------------------------------------
// convolve
// ---------------------------------------------------------------------------

struct ConvolveExperiment;

impl Experiment for ConvolveExperiment {
    fn name(&self) -> &'static str {
        "convolve"
    }

    fn description(&self) -> &'static str {
        "Iterated circle self-convolution of a digit measure with per-power \
         entropies and entropy-slope dimension estimates."
    }

    fn example(&self) -> serde_json::Value {
        json!({
            "experiment": "convolve",
            "seed": 3,
            "output": "out/convolve.csv",
            "measure": {"type": "bernoulli-digits", "base": 3, "digits": [0, 2], "probs": [0.5, 0.5]},
            "params": {"iterations": 2, "level": 8}
        })
    }

    fn validate(&self, cfg: &ExperimentConfig) -> Result<(), String> {
        let spec = need_measure(cfg)?;
        geo_digit_measure(&spec).map_err(|e| e.to_string())?;
        let level = cfg.params.level.unwrap_or(8);
        if !(2..=12).contains(&level) {
            return Err("level must lie in 2..=12".into());
        }
        Ok(())
    }

    fn run(&self, cfg: &ExperimentConfig) -> Result<RunOutput, RunFailure> {
        let spec = need_measure(cfg).map_err(RunFailure::Config)?;
        let level = cfg.params.level.unwrap_or(8);
        let iterations = cfg.params.iterations.unwrap_or(2);
        let geo = geo_digit_measure(&spec).map_err(runtime)?;
        let (grid, _) =
            push_grid_exact(&geo, &Projection::AxisX, level, geo.base).map_err(runtime)?;

        let mut table =
            CsvTable::new(&["power", "cells", "h_partition", "h_ball", "dim_slope"]);
        base_comments(&mut table, cfg);
        table.comment("level", level.to_string());
        table.comment("base", geo.base.to_string());

        let mut cur = grid;
        for k in 0..=iterations {
            table.row(vec![
                (1usize << k).to_string(),
                cur.n_cells().to_string(),
                fmt_g6(cur.h_partition()),
                fmt_g6(cur.h_ball()),
                fmt_g6(dimension_slope(&cur, 4.min(level))),
            ]);
            if k < iterations {
                cur = circle_convolve(&cur, &cur).map_err(runtime)?;
            }
        }
        Ok(RunOutput { csv: table.render(), summary: json!({"iterations": iterations}) })
    }
}

// ---------------------------------------------------------------------------
// lift-check
// ---------------------------------------------------------------------------

struct LiftCheckExperiment;

impl Experiment for LiftCheckExperiment {
    fn name(&self) -> &'static str {
        "lift-check"
    }

    fn description(&self) -> &'static str {
        "Lift a Lipschitz cylinder map to a tree morphism through a faithful \
         cube assignment and verify containment, multiplicity, decay and the \
         entropy defect per level."
    }

    fn example(&self) -> serde_json::Value {
        json!({
            "experiment": "lift-check",
            "seed": 1,
            "output": "out/lift.csv",
            "measure": {"type": "product",
                "left": {"type": "bernoulli-digits", "base": 3, "digits": [0, 2], "probs": [0.5, 0.5]},
                "right": {"type": "bernoulli-digits", "base": 3, "digits": [0, 2], "probs": [0.5, 0.5]}},
            "params": {"map": "half-sum", "depth": 8}
        })
    }

    fn validate(&self, cfg: &ExperimentConfig) -> Result<(), String> {
        let map = cfg.params.map.clone().unwrap_or_else(|| "identity".into());
        if !["identity", "half-sum"].contains(&map.as_str()) {
            return Err(format!("unknown map `{map}`; use identity or half-sum"));
        }
        let depth = cfg.params.depth.unwrap_or(8);
        if !(1..=10).contains(&depth) {
            return Err("depth must lie in 1..=10".into());
        }
        if map == "half-sum" {
            let spec = need_measure(cfg)?;
            let geo = geo_digit_measure(&spec).map_err(|e| e.to_string())?;
            if geo.dim != 2 {
                return Err("half-sum needs a two-dimensional digit measure".into());
            }
        } else if cfg.measure.is_some() {
            let spec = need_measure(cfg)?;
            let geo = geo_digit_measure(&spec).map_err(|e| e.to_string())?;
            if geo.dim != 1 {
                return Err("identity needs a one-dimensional digit measure".into());
            }
        }
        Ok(())
    }

    fn run(&self, cfg: &ExperimentConfig) -> Result<RunOutput, RunFailure> {
        let map_name = cfg.params.map.clone().unwrap_or_else(|| "identity".into());
        let depth = cfg.params.depth.unwrap_or(8);
        let (map, geo) = match map_name.as_str() {
            "half-sum" => {
                let spec = need_measure(cfg).map_err(RunFailure::Config)?;
                let geo = geo_digit_measure(&spec).map_err(runtime)?;
                (half_sum_map(geo.base, geo.digit_coords.clone()), Some(geo))
            }
            _ => {
                let base = cfg.params.base.unwrap_or(2);
                let geo = match &cfg.measure {
                    Some(m) => Some(geo_digit_measure(&m.to_spec()).map_err(runtime)?),
                    None => None,
                };
                let map = match &geo {
                    Some(g) => fracdim_core::lift::LinearDigitMap {
                        base: g.base,
                        dim: 1,
                        digit_coords: g.digit_coords.clone(),
                        coeff: [fracdim_core::lift::rat(1, 1), fracdim_core::lift::rat(0, 1)],
                        offset: fracdim_core::lift::rat(0, 1),
                    },
                    None => identity_map(base),
                };
                (map, geo)
            }
        };
        let sys = lift(&map, depth).map_err(runtime)?;
        let verification = verify_lift(&sys, depth).map_err(runtime)?;
        let faith = faithfulness_check(&LiftedCubes(&sys), depth).map_err(runtime)?;
        let defect = match &geo {
            Some(g) => Some(entropy_defect(&sys, g, depth).map_err(runtime)?),
            None => None,
        };

        let mut table = CsvTable::new(&[
            "level",
            "branching",
            "multiplicity",
            "decay_constant",
            "defect_max",
        ]);
        base_comments(&mut table, cfg);
        table.comment("map", map_name.clone());
        table.comment("depth", depth.to_string());
        table.comment("containment_ok", verification.containment_ok.to_string());
        table.comment("morphism_ok", verification.morphism_ok.to_string());
        table.comment("faithful_ok", faith.ok.to_string());
        for level in 0..depth {
            table.row(vec![
                (level + 1).to_string(),
                (2 * sys.n_seq[level]).to_string(),
                faith.per_level_mult[level].to_string(),
                fmt_g6(faith.per_level_decay[level]),
                defect
                    .as_ref()
                    .map_or("nan".into(), |d| fmt_g6(d.per_level_max[level])),
            ]);
        }
        Ok(RunOutput {
            csv: table.render(),
            summary: json!({
                "containment_ok": verification.containment_ok,
                "morphism_ok": verification.morphism_ok,
                "words_checked": verification.words_checked,
                "c_mult": faith.c_mult,
                "c_decay": faith.c_decay,
                "max_defect": defect.as_ref().map(|d| d.max_defect),
            }),
        })
    }
}
