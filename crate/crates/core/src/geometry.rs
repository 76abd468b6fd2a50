//! Boxes, the normalization homothety, and partition operators. Operators
//! implement a common trait and are selected by name at runtime; two are
//! provided: the base-b cube operator and the ×2/×3 rectangle operator whose
//! eccentricity parameter rotates by log 2 modulo log 3.

use crate::error::{Error, Result};

pub const LOG2: f64 = std::f64::consts::LN_2;
pub const LOG3: f64 = 1.0986122886681098f64;

/// Axis-parallel box in R^d, d ∈ {1,2}. Cells are half-open [lo, hi) unless
/// the per-axis flag closes the upper face.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisBox {
    pub dim: usize,
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub hi_closed: [bool; 2],
}

impl AxisBox {
    pub fn new(dim: usize, lo: [f64; 2], hi: [f64; 2]) -> Result<AxisBox> {
        let b = AxisBox { dim, lo, hi, hi_closed: [false; 2] };
        for axis in 0..dim {
            if !(b.side(axis) > 0.0) {
                return Err(Error::DegenerateBox { axis, side: b.side(axis) });
            }
        }
        Ok(b)
    }

    pub fn interval(lo: f64, hi: f64) -> Result<AxisBox> {
        AxisBox::new(1, [lo, 0.0], [hi, 0.0])
    }

    pub fn rect(lo: [f64; 2], hi: [f64; 2]) -> Result<AxisBox> {
        AxisBox::new(2, lo, hi)
    }

    pub fn unit_cube(dim: usize) -> AxisBox {
        AxisBox { dim, lo: [0.0; 2], hi: [1.0, 1.0], hi_closed: [false; 2] }
    }

    pub fn side(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim).map(|a| self.side(a)).product()
    }

    pub fn min_side(&self) -> f64 {
        (0..self.dim).map(|a| self.side(a)).fold(f64::INFINITY, f64::min)
    }

    pub fn max_side(&self) -> f64 {
        (0..self.dim).map(|a| self.side(a)).fold(0.0, f64::max)
    }

    /// Ratio of longest to shortest side; 1 for intervals.
    pub fn eccentricity(&self) -> f64 {
        self.max_side() / self.min_side()
    }

    pub fn is_cube(&self, tol: f64) -> bool {
        self.eccentricity() <= 1.0 + tol
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        (0..self.dim).all(|a| {
            p[a] >= self.lo[a]
                && (p[a] < self.hi[a] || (self.hi_closed[a] && p[a] <= self.hi[a]))
        })
    }

    pub fn center(&self) -> [f64; 2] {
        [
            (self.lo[0] + self.hi[0]) / 2.0,
            (self.lo[1] + self.hi[1]) / 2.0,
        ]
    }
}

/// The homothety-plus-translation T_B sending a box to its normalized copy:
/// volume 1 with lexicographically minimal corner at the origin. The ratio is
/// vol(B)^{−1/d}, which preserves the side-length proportions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationMap {
    pub ratio: f64,
    pub offset: [f64; 2],
    pub dim: usize,
}

impl NormalizationMap {
    pub fn apply(&self, p: &[f64]) -> [f64; 2] {
        let mut out = [0.0; 2];
        for a in 0..self.dim {
            out[a] = self.ratio * p[a] + self.offset[a];
        }
        out
    }

    pub fn apply_box(&self, b: &AxisBox) -> AxisBox {
        let lo = self.apply(&b.lo);
        let hi = self.apply(&b.hi);
        AxisBox { dim: b.dim, lo, hi, hi_closed: b.hi_closed }
    }
}

/// Normalize a box: returns (B*, T_B).
pub fn normalize_box(b: &AxisBox) -> Result<(AxisBox, NormalizationMap)> {
    for axis in 0..b.dim {
        if !(b.side(axis) > 0.0) || !b.side(axis).is_finite() {
            return Err(Error::DegenerateBox { axis, side: b.side(axis) });
        }
    }
    let ratio = b.volume().powf(-1.0 / b.dim as f64);
    let offset = [-ratio * b.lo[0], -ratio * b.lo[1]];
    let map = NormalizationMap { ratio, offset, dim: b.dim };
    Ok((map.apply_box(b), map))
}

/// Identifier of a partition operator, as read from configs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PartitionOperatorId {
    BaseB(u32),
    Rw,
}

impl PartitionOperatorId {
    pub fn parse(name: &str) -> Option<PartitionOperatorId> {
        if name == "rw" {
            return Some(PartitionOperatorId::Rw);
        }
        let b = name.strip_prefix("base-")?.parse::<u32>().ok()?;
        (b >= 2).then_some(PartitionOperatorId::BaseB(b))
    }
}

/// A translation- and scale-invariant subdivision rule on a family of boxes.
pub trait PartitionOperator: Send + Sync {
    fn name(&self) -> String;

    /// Contraction ratio of one subdivision level.
    fn rho(&self) -> f64;

    /// Regularity constant the operator guarantees for its iterated cells
    /// (side-length witness: ρⁿ/C ≤ min side, max side ≤ C·ρⁿ).
    fn regularity_bound(&self) -> f64;

    /// Children tiling `b`, in the operator's canonical order.
    fn children(&self, b: &AxisBox) -> Result<Vec<AxisBox>>;
}

/// Select an operator by name: `base-<b>` or `rw`.
pub fn operator_by_name(name: &str) -> Option<Box<dyn PartitionOperator>> {
    match PartitionOperatorId::parse(name)? {
        PartitionOperatorId::BaseB(b) => Some(Box::new(BaseBOperator { base: b })),
        PartitionOperatorId::Rw => Some(Box::new(RwOperator)),
    }
}

/// Splits a cube into b^d congruent half-open sub-cubes. Canonical order:
/// index = i_x + b·i_y (axis 0 fastest).
#[derive(Debug, Clone, Copy)]
pub struct BaseBOperator {
    pub base: u32,
}

impl PartitionOperator for BaseBOperator {
    fn name(&self) -> String {
        format!("base-{}", self.base)
    }

    fn rho(&self) -> f64 {
        1.0 / f64::from(self.base)
    }

    fn regularity_bound(&self) -> f64 {
        1.0
    }

    fn children(&self, b: &AxisBox) -> Result<Vec<AxisBox>> {
        if !b.is_cube(1e-9) {
            return Err(Error::NonCube {
                op: "base-b",
                sides: (0..b.dim).map(|a| b.side(a)).collect(),
            });
        }
        Ok(base_b_children(b, self.base))
    }
}

/// The b^d sub-cubes of a cube, ordered with axis 0 fastest.
pub fn base_b_children(b: &AxisBox, base: u32) -> Vec<AxisBox> {
    let n = base as usize;
    let count = n.pow(b.dim as u32);
    let mut out = Vec::with_capacity(count);
    for idx in 0..count {
        let mut lo = b.lo;
        let mut hi = b.hi;
        let mut rem = idx;
        for axis in 0..b.dim {
            let i = rem % n;
            rem /= n;
            let step = b.side(axis) / n as f64;
            lo[axis] = b.lo[axis] + i as f64 * step;
            hi[axis] = lo[axis] + step;
        }
        out.push(AxisBox { dim: b.dim, lo, hi, hi_closed: [false; 2] });
    }
    out
}

/// One subdivision step of the rectangle R_w = [0,1] × [0, e^w]: always halve
/// the base; when w ≥ log 3 − log 2, also cut the height in thirds. Children
/// are returned relative to R_w, ordered left-to-right then bottom-to-top
/// within a half (index = half·3 + third in the six-child case).
pub struct RwSplit {
    pub children: Vec<AxisBox>,
    pub w_next: f64,
    pub count: usize,
}

pub fn rw_children(w: f64) -> Result<RwSplit> {
    if !(0.0..LOG3).contains(&w) {
        return Err(Error::WOutOfRange { w });
    }
    let height = w.exp();
    let sixfold = w >= LOG3 - LOG2;
    let w_next = if sixfold { w + LOG2 - LOG3 } else { w + LOG2 };
    let mut children = Vec::new();
    for half in 0..2 {
        let lo_x = 0.5 * half as f64;
        if sixfold {
            for third in 0..3 {
                children.push(AxisBox {
                    dim: 2,
                    lo: [lo_x, height * third as f64 / 3.0],
                    hi: [lo_x + 0.5, height * (third as f64 + 1.0) / 3.0],
                    hi_closed: [false; 2],
                });
            }
        } else {
            children.push(AxisBox {
                dim: 2,
                lo: [lo_x, 0.0],
                hi: [lo_x + 0.5, height],
                hi_closed: [false; 2],
            });
        }
    }
    Ok(RwSplit { count: children.len(), children, w_next })
}

/// Eccentricity parameter of a box from the R_w family (height/width = e^w).
pub fn w_of_box(b: &AxisBox) -> Result<f64> {
    if b.dim != 2 {
        return Err(Error::invalid("R_w boxes are two-dimensional"));
    }
    let w = (b.side(1) / b.side(0)).ln();
    if !(-1e-12..LOG3 + 1e-12).contains(&w) {
        return Err(Error::WOutOfRange { w });
    }
    Ok(w.clamp(0.0, LOG3))
}

/// The ×2/×3 operator on rectangles similar to some R_w, w ∈ [0, log 3).
#[derive(Debug, Clone, Copy)]
pub struct RwOperator;

impl PartitionOperator for RwOperator {
    fn name(&self) -> String {
        "rw".into()
    }

    fn rho(&self) -> f64 {
        0.5
    }

    fn regularity_bound(&self) -> f64 {
        3.0
    }

    fn children(&self, b: &AxisBox) -> Result<Vec<AxisBox>> {
        let w = w_of_box(b)?;
        let split = rw_children(w)?;
        // map from R_w coordinates into b by the similarity x ↦ lo + side_x·x
        let s = b.side(0);
        Ok(split
            .children
            .into_iter()
            .map(|c| AxisBox {
                dim: 2,
                lo: [b.lo[0] + s * c.lo[0], b.lo[1] + s * c.lo[1]],
                hi: [b.lo[0] + s * c.hi[0], b.lo[1] + s * c.hi[1]],
                hi_closed: [false; 2],
            })
            .collect())
    }
}

/// Per-level regularity witnesses for an operator started at `start`.
#[derive(Debug, Clone)]
pub struct RegularityReport {
    pub c: f64,
    pub ok: bool,
    pub per_level: Vec<f64>,
}

/// Smallest side-length constant C with ρⁿ/C ≤ min side and max side ≤ C·ρⁿ
/// over all cells to depth `n_levels`; `ok` confirms it stays within the
/// operator's declared bound. Cells at one level are congruent for both
/// operators, so one representative per level suffices; congruence is spot
/// checked against a breadth-first expansion at shallow depth.
pub fn check_regularity(
    op: &dyn PartitionOperator,
    start: &AxisBox,
    n_levels: usize,
) -> Result<RegularityReport> {
    if n_levels == 0 {
        return Err(Error::invalid("n_levels must be positive"));
    }
    // spot check congruence on two full levels
    let mut level: Vec<AxisBox> = vec![start.clone()];
    for _ in 0..2.min(n_levels) {
        let mut next = Vec::new();
        for b in &level {
            next.extend(op.children(b)?);
        }
        for b in &next {
            for axis in 0..b.dim {
                if (b.side(axis) - next[0].side(axis)).abs() > 1e-12 {
                    return Err(Error::invalid("cells at one level are not congruent"));
                }
            }
        }
        level = next;
    }

    let rho = op.rho();
    let (start_norm, _) = normalize_box(start)?;
    let mut rep = start_norm;
    let mut per_level = Vec::with_capacity(n_levels);
    for n in 1..=n_levels {
        rep = op.children(&rep)?.swap_remove(0);
        let rn = rho.powi(n as i32);
        let c = (rn / rep.min_side()).max(rep.max_side() / rn);
        per_level.push(c);
    }
    let c = per_level.iter().fold(0.0f64, |a, b| a.max(*b));
    let ok = c <= op.regularity_bound() + 1e-9;
    Ok(RegularityReport { c, ok, per_level })
}

/// The eccentricity orbit w_0, w_1, …, w_{n-1} of the ×2/×3 operator.
pub fn rw_orbit(w0: f64, n: usize) -> Result<Vec<f64>> {
    let mut orbit = Vec::with_capacity(n);
    let mut w = w0;
    for _ in 0..n {
        orbit.push(w);
        w = rw_children(w)?.w_next;
    }
    Ok(orbit)
}

/// Star discrepancy of a point set against the uniform law on [0,1).
pub fn star_discrepancy(points: &mut [f64]) -> f64 {
    points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = points.len() as f64;
    let mut d = 0.0f64;
    for (i, x) in points.iter().enumerate() {
        d = d.max((x - i as f64 / n).abs());
        d = d.max((x - (i as f64 + 1.0) / n).abs());
    }
    d
}
