//! Estimator validation against closed-form oracles: dimension estimates on
//! digit measures, sampler histograms against exact cylinder masses, and the
//! finite-scale entropy stability bounds.

use fracdim_core::measures::{
    analytic_summary, build_tree_float, geo_digit_measure, sample_point, MeasureSpec, Similarity,
};
use fracdim_core::project::{
    push_grid_exact, push_grid_map, scan_projections, CubeChainFactory, Projection,
};
use fracdim_core::rng::rng_from_seed;

fn bernoulli(base: u32, digits: Vec<Vec<u8>>, probs: Vec<f64>) -> MeasureSpec {
    MeasureSpec::BernoulliDigits { base, digits, probs }
}

fn digit_fixtures() -> Vec<(&'static str, MeasureSpec)> {
    vec![
        ("cantor3", bernoulli(3, vec![vec![0], vec![2]], vec![0.5, 0.5])),
        ("bern-91", bernoulli(2, vec![vec![0], vec![1]], vec![0.9, 0.1])),
        ("bern-73", bernoulli(2, vec![vec![0], vec![1]], vec![0.7, 0.3])),
        (
            "markov-2",
            MeasureSpec::MarkovDigits {
                base: 2,
                digits: vec![0, 1],
                transition: vec![vec![0.8, 0.2], vec![0.3, 0.7]],
                initial: vec![0.5, 0.5],
            },
        ),
        (
            "markov-3",
            MeasureSpec::MarkovDigits {
                base: 3,
                digits: vec![0, 1, 2],
                transition: vec![
                    vec![0.5, 0.25, 0.25],
                    vec![0.1, 0.6, 0.3],
                    vec![0.4, 0.4, 0.2],
                ],
                initial: vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            },
        ),
    ]
}

#[test]
fn dim_estimate_matches_analytic_dimension() {
    // Monte-Carlo local entropy averages against the closed-form entropy
    // rate, for every Bernoulli and Markov fixture; full-support base-3
    // trees are materialized at depth 12 to keep the node count sane
    for (name, spec) in digit_fixtures() {
        let depth = if name == "markov-3" { 12 } else { 15 };
        let tm = build_tree_float(&spec, depth).unwrap();
        let est = tm.dim_lower_estimate(500, depth, 0xd1).unwrap();
        let analytic = analytic_summary(&spec).unwrap().analytic_dimension;
        assert!(
            (est.mean - analytic).abs() < 0.02,
            "{name}: estimate {} vs analytic {analytic}",
            est.mean
        );
    }
}

#[test]
fn sampler_histogram_matches_exact_masses_level8() {
    // empirical histogram at resolution 3^-8 against exact cylinder masses,
    // within 3 sigma of the multinomial error per cell (seeded run)
    let spec = bernoulli(3, vec![vec![0], vec![2]], vec![0.5, 0.5]);
    let geo = geo_digit_measure(&spec).unwrap();
    let (exact, _) = push_grid_exact(&geo, &Projection::AxisX, 8, 3).unwrap();
    let n = 200_000usize;
    let mut rng = rng_from_seed(0xace);
    let mut counts: std::collections::HashMap<i64, usize> = std::collections::HashMap::new();
    for _ in 0..n {
        let p = sample_point(&spec, &mut rng, 10).unwrap()[0];
        *counts.entry((p * 3f64.powi(8)).floor() as i64).or_insert(0) += 1;
    }
    for (cell, mass) in exact.cells() {
        let expect = mass * n as f64;
        let sigma = (n as f64 * mass * (1.0 - mass)).sqrt();
        let got = counts.get(&cell[0]).copied().unwrap_or(0) as f64;
        assert!(
            (got - expect).abs() <= 3.0 * sigma,
            "cell {cell:?}: {got} vs {expect} (sigma {sigma})"
        );
    }
    // no mass outside the support
    let support: f64 = exact.cells().map(|(_, m)| m).sum();
    assert!((support - 1.0).abs() < 1e-9);
}

#[test]
fn perturbed_projection_entropy_stays_comparable() {
    // quadratic perturbations with derivative gap below the scale leave the
    // finite-scale entropy within an O(1) band, uniformly over levels
    let spec = MeasureSpec::Product {
        left: Box::new(bernoulli(3, vec![vec![0], vec![2]], vec![0.5, 0.5])),
        right: Box::new(bernoulli(3, vec![vec![0], vec![2]], vec![0.5, 0.5])),
    };
    let mut rng = rng_from_seed(0xbeef);
    let points: Vec<[f64; 2]> = (0..60_000)
        .map(|_| {
            let p = sample_point(&spec, &mut rng, 8).unwrap();
            [p[0], p[1]]
        })
        .collect();
    let s = 0.7;
    let mut gaps = Vec::new();
    for level in 4..=10u32 {
        let r = 2f64.powi(-(level as i32));
        // sup |Dg - pi_s| = eps * sup|2x, 1| <= r/2 on the unit square
        let eps = r / 4.0;
        let h_lin = push_grid_map(&points, |p| p[0] + s * p[1], level, 2).h_partition();
        let h_quad =
            push_grid_map(&points, |p| p[0] + s * p[1] + eps * p[0] * p[0], level, 2).h_partition();
        gaps.push((h_lin - h_quad).abs());
    }
    let max_gap = gaps.iter().copied().fold(0.0f64, f64::max);
    assert!(
        max_gap < 0.2,
        "perturbed-entropy gap should stay O(1) small across levels: {gaps:?}"
    );
}

#[test]
fn equal_base_product_scan_is_exploratory() {
    // equal-base products are outside the mixed-base guarantee; the scan is run
    // and recorded without asserting the dip structure
    let c3 = bernoulli(3, vec![vec![0], vec![2]], vec![0.5, 0.5]);
    let square = MeasureSpec::Product { left: Box::new(c3.clone()), right: Box::new(c3) };
    let factory = CubeChainFactory::new(&square).unwrap();
    let projs = vec![Projection::Slope(1.0), Projection::Slope(1.0 / 3.0)];
    let scan = scan_projections(&factory, &projs, 8, 60, 10, 3, 0.05).unwrap();
    for row in &scan.rows {
        assert!(row.estimate.is_finite() && row.estimate >= 0.0);
    }
    // the expected-dimension band min(1, 2 log2/log3) - 0.05 from the scan
    let floor = 1.0f64.min(2.0 * 2f64.ln() / 3f64.ln()) - 0.05;
    let passing = scan.rows.iter().filter(|r| r.estimate >= floor).count();
    // record, do not assert structure: at least the s = 1 direction clears it
    assert!(passing >= 1, "scan rows: {:?}", scan.rows);
}

#[test]
fn non_aligned_ifs_summary_uses_separation() {
    let spec = MeasureSpec::LinearIfs {
        maps: vec![
            Similarity { ratio: 0.25, rotation: 0.0, reflect: false, translation: vec![0.0] },
            Similarity { ratio: 0.25, rotation: 0.0, reflect: false, translation: vec![0.75] },
        ],
        weights: vec![0.5, 0.5],
    };
    let s = analytic_summary(&spec).unwrap();
    assert!((s.analytic_dimension - 0.5).abs() < 1e-12);
}
