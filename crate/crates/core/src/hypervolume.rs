//! Pareto dominance and grid-based dominated hypervolume.
//!
//! Everything here maximises: `a` dominates-or-equals `b` when `a_i >= b_i`
//! for every objective. Hypervolume is measured above a reference point `z`
//! by sorting the point coordinates along each axis into a grid of cells and
//! summing the volume of the cells whose upper ("dominant") corner is
//! dominated by some point.

use crate::error::{Error, Result};

/// `a ⪰ b`: every component of `a` is at least the matching one of `b`.
pub fn weakly_dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y)
}

/// `a ≻ b`: weakly dominates and differs.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    weakly_dominates(a, b) && a != b
}

fn strictly_above(y: &[f64], z: &[f64]) -> bool {
    y.iter().zip(z).all(|(a, b)| a > b)
}

/// Indices of the non-dominated points; among duplicates only the first is kept.
pub fn dominant_indices<P: AsRef<[f64]>>(points: &[P]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| {
            let p = points[i].as_ref();
            points.iter().enumerate().all(|(j, q)| {
                let q = q.as_ref();
                if j == i {
                    true
                } else if q == p {
                    j > i
                } else {
                    !dominates(q, p)
                }
            })
        })
        .collect()
}

/// The non-dominated subset, duplicates collapsed.
pub fn dominant_subset<P: AsRef<[f64]>>(points: &[P]) -> Vec<Vec<f64>> {
    dominant_indices(points)
        .into_iter()
        .map(|i| points[i].as_ref().to_vec())
        .collect()
}

/// Reference point below the observed values: the componentwise minimum
/// minus ten percent of the observed range.
pub fn default_reference<P: AsRef<[f64]>>(points: &[P]) -> Vec<f64> {
    let m = points.first().map_or(0, |p| p.as_ref().len());
    (0..m)
        .map(|i| {
            let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                let v = p.as_ref()[i];
                (lo.min(v), hi.max(v))
            });
            let range = hi - lo;
            let margin = if range > 0.0 { 0.1 * range } else { 0.1 * lo.abs().max(1.0) };
            lo - margin
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub lower: Vec<f64>,
    /// Dominant corner.
    pub upper: Vec<f64>,
    pub volume: f64,
}

/// Tiling of `[z, max(points)]` by the sorted point coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct CellGrid {
    /// Per axis: `z_i` followed by the distinct point coordinates above it.
    pub coords: Vec<Vec<f64>>,
    pub cells: Vec<Cell>,
    /// Points ignored because they do not strictly dominate `z`.
    pub excluded: usize,
}

fn axis_coords<'a>(points: impl Iterator<Item = &'a [f64]> + Clone, z: &[f64]) -> Vec<Vec<f64>> {
    (0..z.len())
        .map(|i| {
            let mut c: Vec<f64> = points.clone().map(|p| p[i]).collect();
            c.push(z[i]);
            c.sort_by(f64::total_cmp);
            c.dedup();
            c
        })
        .collect()
}

/// Calls `f(index)` for every multi-index in the box `shape`, last axis fastest.
fn for_each_index(shape: &[usize], mut f: impl FnMut(&[usize])) {
    if shape.contains(&0) {
        return;
    }
    let mut idx = vec![0; shape.len()];
    loop {
        f(&idx);
        let mut axis = shape.len();
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < shape[axis] {
                break;
            }
            idx[axis] = 0;
        }
    }
}

fn check_dims<P: AsRef<[f64]>>(points: &[P], z: &[f64]) -> Result<()> {
    if z.is_empty() {
        return Err(Error::InvalidData("reference point is empty".into()));
    }
    if let Some(p) = points.iter().find(|p| p.as_ref().len() != z.len()) {
        return Err(Error::InvalidData(format!(
            "point has {} objectives, reference has {}",
            p.as_ref().len(),
            z.len()
        )));
    }
    Ok(())
}

/// Builds the cell grid for the points that strictly dominate `z`.
pub fn build_cells<P: AsRef<[f64]>>(points: &[P], z: &[f64]) -> Result<CellGrid> {
    check_dims(points, z)?;
    let kept: Vec<&[f64]> = points
        .iter()
        .map(|p| p.as_ref())
        .filter(|p| strictly_above(p, z))
        .collect();
    let excluded = points.len() - kept.len();
    if kept.is_empty() {
        return Ok(CellGrid {
            coords: z.iter().map(|v| vec![*v]).collect(),
            cells: Vec::new(),
            excluded,
        });
    }
    let coords = axis_coords(kept.iter().copied(), z);
    let shape: Vec<usize> = coords.iter().map(|c| c.len() - 1).collect();
    let mut cells = Vec::with_capacity(shape.iter().product());
    for_each_index(&shape, |k| {
        let lower: Vec<f64> = k.iter().enumerate().map(|(i, &ki)| coords[i][ki]).collect();
        let upper: Vec<f64> = k.iter().enumerate().map(|(i, &ki)| coords[i][ki + 1]).collect();
        let volume = lower.iter().zip(&upper).map(|(l, u)| u - l).product();
        cells.push(Cell { lower, upper, volume });
    });
    Ok(CellGrid {
        coords,
        cells,
        excluded,
    })
}

/// Dominated hypervolume above `z`.
pub fn hypervolume<P: AsRef<[f64]>>(points: &[P], z: &[f64]) -> Result<f64> {
    let front = dominant_subset(points);
    let grid = build_cells(&front, z)?;
    Ok(grid
        .cells
        .iter()
        .filter(|c| front.iter().any(|p| weakly_dominates(p, &c.upper)))
        .map(|c| c.volume)
        .sum())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArchivePoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Probability that the point satisfies the preference constraints.
    pub prob: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParetoArchive {
    pub points: Vec<ArchivePoint>,
    pub reference: Vec<f64>,
}

/// Expected hypervolume when each point independently counts with its
/// probability: `Σ_k vol(c_k) (1 - Π_{y_j ⪰ corner_k} (1 - p_j))`.
pub fn weighted_expected_hv(archive: &ParetoArchive) -> Result<f64> {
    let probs = archive
        .points
        .iter()
        .map(|p| match p.prob {
            Some(v) if (0.0..=1.0).contains(&v) => Ok(v),
            Some(v) => Err(Error::Contract(format!("probability {v} outside [0, 1]"))),
            None => Err(Error::Contract("archive point without probability".into())),
        })
        .collect::<Result<Vec<f64>>>()?;
    let ys: Vec<&[f64]> = archive.points.iter().map(|p| p.y.as_slice()).collect();
    let grid = build_cells(&ys, &archive.reference)?;
    Ok(grid
        .cells
        .iter()
        .map(|c| {
            let miss: f64 = ys
                .iter()
                .zip(&probs)
                .filter(|(y, _)| weakly_dominates(y, &c.upper))
                .map(|(_, p)| 1.0 - p)
                .product();
            c.volume * (1.0 - miss)
        })
        .sum())
}

/// Weighted improvement by cell rebuild: builds the grid of `points ∪ {y}`
/// and returns `Σ_{k : y ⪰ corner_k} vol(c_k) Π_{j : y_j ⪰ corner_k} w_j`.
///
/// With `w_j = 1 - s_j` this is one Monte-Carlo term of the
/// preference-weighted acquisition; with all `w_j = 0` it is the plain
/// hypervolume improvement `S(D ∪ {y}) - S(D)`.
pub fn improvement_by_rebuild<P: AsRef<[f64]>>(points: &[P], weights: &[f64], z: &[f64], y: &[f64]) -> Result<f64> {
    check_dims(points, z)?;
    if weights.len() != points.len() {
        return Err(Error::Contract("one weight per point is required".into()));
    }
    if !strictly_above(y, z) {
        return Ok(0.0);
    }
    let mut all: Vec<&[f64]> = points.iter().map(|p| p.as_ref()).collect();
    all.push(y);
    let grid = build_cells(&all, z)?;
    Ok(grid
        .cells
        .iter()
        .filter(|c| weakly_dominates(y, &c.upper))
        .map(|c| {
            let w: f64 = points
                .iter()
                .zip(weights)
                .filter(|(p, _)| weakly_dominates(p.as_ref(), &c.upper))
                .map(|(_, w)| *w)
                .product();
            c.volume * w
        })
        .sum())
}

/// Precomputed form of [`improvement_by_rebuild`] for a fixed point set.
///
/// The weight of a cell of the `points ∪ {y}` grid only depends on which
/// cell of the `points` grid contains it, so the improvement is the integral
/// of a piecewise-constant field over the box `[z, y]`. Partial sums of that
/// field are tabulated once for every subset of axes; a query then costs a
/// binary search per axis plus `2^m` table lookups.
#[derive(Clone, Debug)]
pub struct ImprovementGrid {
    reference: Vec<f64>,
    coords: Vec<Vec<f64>>,
    strides: Vec<usize>,
    tables: Vec<Vec<f64>>,
}

/// Largest table (entries per axis subset) built before falling back to
/// cell rebuilds.
pub const MAX_TABLE_ENTRIES: usize = 1 << 22;

impl ImprovementGrid {
    /// Returns `None` when the tables would exceed [`MAX_TABLE_ENTRIES`].
    pub fn new<P: AsRef<[f64]>>(points: &[P], weights: &[f64], z: &[f64]) -> Result<Option<Self>> {
        check_dims(points, z)?;
        if weights.len() != points.len() {
            return Err(Error::Contract("one weight per point is required".into()));
        }
        let m = z.len();
        let kept: Vec<(&[f64], f64)> = points
            .iter()
            .map(|p| p.as_ref())
            .zip(weights.iter().copied())
            .filter(|(p, _)| strictly_above(p, z))
            .collect();
        let coords = axis_coords(kept.iter().map(|(p, _)| *p), z);
        // interval k of axis i spans [coords[k], coords[k + 1]]; the last one is unbounded
        let shape: Vec<usize> = coords.iter().map(|c| c.len()).collect();
        let size = shape.iter().try_fold(1usize, |acc, &s| acc.checked_mul(s));
        let size = match size {
            Some(s) if s <= MAX_TABLE_ENTRIES => s,
            _ => return Ok(None),
        };
        let mut strides = vec![1; m];
        for i in (0..m.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * shape[i + 1];
        }

        let mut weight = vec![0.0; size];
        let mut flat = 0;
        let mut upper = vec![0.0; m];
        for_each_index(&shape, |k| {
            for i in 0..m {
                upper[i] = coords[i].get(k[i] + 1).copied().unwrap_or(f64::INFINITY);
            }
            weight[flat] = kept
                .iter()
                .filter(|(p, _)| weakly_dominates(p, &upper))
                .map(|(_, w)| *w)
                .product();
            flat += 1;
        });

        let width = |i: usize, k: usize| -> f64 {
            match coords[i].get(k + 1) {
                Some(hi) => hi - coords[i][k],
                None => 0.0,
            }
        };
        let mut tables = Vec::with_capacity(1 << m);
        for mask in 0..(1usize << m) {
            let mut table = weight.clone();
            let mut flat = 0;
            for_each_index(&shape, |k| {
                for i in (0..m).filter(|i| mask & (1 << i) == 0) {
                    table[flat] *= width(i, k[i]);
                }
                flat += 1;
            });
            for i in (0..m).filter(|i| mask & (1 << i) == 0) {
                exclusive_prefix_along(&mut table, &shape, &strides, i);
            }
            tables.push(table);
        }
        Ok(Some(Self {
            reference: z.to_vec(),
            coords,
            strides,
            tables,
        }))
    }

    /// `∫_{[z, y]} w(u) du` where `w` is the product of the weights of the
    /// points dominating `u` (one when none does).
    pub fn improvement(&self, y: &[f64]) -> f64 {
        if !strictly_above(y, &self.reference) {
            return 0.0;
        }
        let m = y.len();
        let mut offset = 0;
        let mut partial = [0.0f64; 16];
        let mut partial_vec;
        let t: &mut [f64] = if m <= 16 {
            &mut partial[..m]
        } else {
            partial_vec = vec![0.0; m];
            &mut partial_vec
        };
        for i in 0..m {
            let a = self.coords[i].partition_point(|g| *g < y[i]) - 1;
            t[i] = y[i] - self.coords[i][a];
            offset += a * self.strides[i];
        }
        self.tables
            .iter()
            .enumerate()
            .map(|(mask, table)| {
                let scale: f64 = (0..m).filter(|i| mask & (1 << i) != 0).map(|i| t[i]).product();
                table[offset] * scale
            })
            .sum()
    }
}

fn exclusive_prefix_along(table: &mut [f64], shape: &[usize], strides: &[usize], axis: usize) {
    let len = shape[axis];
    let stride = strides[axis];
    let mut outer = shape.to_vec();
    outer[axis] = 1;
    for_each_index(&outer, |k| {
        let base: usize = k.iter().zip(strides).map(|(a, s)| a * s).sum();
        let mut acc = 0.0;
        for step in 0..len {
            let idx = base + step * stride;
            let v = table[idx];
            table[idx] = acc;
            acc += v;
        }
    });
}
