use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimation::{EstimatorState, ModelParams, ParameterSpace};
use crate::simulation::simulate_noise;

use super::{Case, MarketConfig};

/// Nearest-neighbour index over points of the parameter rectangle.
///
/// Coordinates are normalised by the rectangle widths (a zero-width axis is
/// ignored). Ties go to the lowest insertion index.
#[derive(Clone, Debug)]
pub struct NearestIndex {
    coords: Vec<[f64; 2]>,
    tree: Vec<KdNode>,
    root: u32,
    origin: [f64; 2],
    inv_width: [f64; 2],
}

const NONE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug)]
struct KdNode {
    coord: [f64; 2],
    point: u32,
    axis: u32,
    left: u32,
    right: u32,
}

impl NearestIndex {
    pub fn new(points: &[ModelParams], space: &ParameterSpace) -> Self {
        let inv = |w: f64| if w > 0.0 { 1.0 / w } else { 0.0 };
        let origin = [space.mu_lo, space.var_lo];
        let inv_width = [inv(space.mu_width()), inv(space.var_width())];
        let coords: Vec<[f64; 2]> = points
            .iter()
            .map(|p| [(p.mu - origin[0]) * inv_width[0], (p.var - origin[1]) * inv_width[1]])
            .collect();
        let mut index = Self { coords, tree: Vec::with_capacity(points.len()), root: NONE, origin, inv_width };
        let mut order: Vec<usize> = (0..points.len()).collect();
        index.root = index.build(&mut order, 0);
        index
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    fn build(&mut self, order: &mut [usize], depth: usize) -> u32 {
        if order.is_empty() {
            return NONE;
        }
        let axis = if self.inv_width[0] == 0.0 {
            1
        } else if self.inv_width[1] == 0.0 {
            0
        } else {
            depth % 2
        };
        let coords = &self.coords;
        order.sort_by(|&a, &b| coords[a][axis].total_cmp(&coords[b][axis]).then(a.cmp(&b)));
        let mid = order.len() / 2;
        let point = order[mid];
        let slot = self.tree.len();
        self.tree.push(KdNode { coord: coords[point], point: point as u32, axis: axis as u32, left: NONE, right: NONE });
        let (lo, rest) = order.split_at_mut(mid);
        let left = self.build(lo, depth + 1);
        let right = self.build(&mut rest[1..], depth + 1);
        self.tree[slot].left = left;
        self.tree[slot].right = right;
        slot as u32
    }

    /// Index of the nearest stored point; `None` only when empty.
    pub fn nearest(&self, p: &ModelParams) -> Option<usize> {
        let q = [(p.mu - self.origin[0]) * self.inv_width[0], (p.var - self.origin[1]) * self.inv_width[1]];
        let mut best = (f64::INFINITY, u32::MAX);
        // Pending far branches with the squared distance to their splitting plane.
        // Balanced tree: at most one entry per level.
        let mut stack = [(NONE, 0.0f64); 64];
        let mut len = 0;
        let mut node = self.root;
        loop {
            while node != NONE {
                let n = &self.tree[node as usize];
                let d = (n.coord[0] - q[0]).powi(2) + (n.coord[1] - q[1]).powi(2);
                if d < best.0 || (d == best.0 && n.point < best.1) {
                    best = (d, n.point);
                }
                let axis = n.axis as usize;
                let diff = q[axis] - n.coord[axis];
                let (near, far) = if diff < 0.0 { (n.left, n.right) } else { (n.right, n.left) };
                if far != NONE {
                    stack[len] = (far, diff * diff);
                    len += 1;
                }
                node = near;
            }
            if len == 0 {
                break;
            }
            len -= 1;
            let (far, plane) = stack[len];
            if plane <= best.0 {
                node = far;
            }
        }
        (best.1 != u32::MAX).then_some(best.1 as usize)
    }
}

/// Per-time-step sets of estimator states on which the adaptive robust
/// recursion is solved. Slice `t` holds states that have absorbed `t`
/// observations; slice 0 is the common initial guess.
#[derive(Clone, Debug)]
pub struct StateGrid {
    case: Case,
    space: ParameterSpace,
    slices: Vec<Vec<EstimatorState>>,
    indexes: Vec<NearestIndex>,
}

impl StateGrid {
    /// Builds a grid from explicit slices. States are sorted by
    /// `(mean, var)` and exact duplicates dropped.
    pub fn from_slices(case: Case, space: ParameterSpace, slices: Vec<Vec<EstimatorState>>) -> Result<Self> {
        let mut clean = Vec::with_capacity(slices.len());
        for (t, mut slice) in slices.into_iter().enumerate() {
            if slice.is_empty() {
                return Err(Error::Structure(format!("state grid is empty at t={t}")));
            }
            if let Some(bad) = slice.iter().find(|s| !space.contains(&s.params())) {
                return Err(Error::Structure(format!(
                    "state grid point ({}, {}) at t={t} lies outside the parameter space",
                    bad.mean, bad.var
                )));
            }
            slice.sort_by(|a, b| a.mean.total_cmp(&b.mean).then(a.var.total_cmp(&b.var)));
            slice.dedup_by(|a, b| a.mean == b.mean && a.var == b.var);
            clean.push(slice);
        }
        if clean.is_empty() {
            return Err(Error::Structure("state grid has no time steps".into()));
        }
        let indexes = clean
            .iter()
            .map(|s| NearestIndex::new(&s.iter().map(EstimatorState::params).collect::<Vec<_>>(), &space))
            .collect();
        Ok(Self { case, space, slices: clean, indexes })
    }

    pub fn case(&self) -> Case {
        self.case
    }

    pub fn space(&self) -> &ParameterSpace {
        &self.space
    }

    /// Number of decision steps covered (slices minus one).
    pub fn horizon(&self) -> usize {
        self.slices.len() - 1
    }

    pub fn slice(&self, t: usize) -> &[EstimatorState] {
        &self.slices[t]
    }

    pub fn nearest(&self, t: usize, state: &EstimatorState) -> usize {
        self.indexes[t].nearest(&state.params()).expect("grid slices are non-empty")
    }

    /// Total number of stored states over all steps.
    pub fn size(&self) -> usize {
        self.slices.iter().map(Vec::len).sum()
    }
}

/// Simulates `n_paths` estimator trajectories under the true parameters
/// and records the visited states at each step.
pub fn build_state_grid(cfg: &MarketConfig, n_paths: usize, seed: u64, case: Case) -> Result<StateGrid> {
    if n_paths == 0 {
        return Err(Error::InvalidConfig("state grid needs at least one path".into()));
    }
    cfg.validate()?;
    let steps = cfg.horizon_steps;
    let noise = simulate_noise(&cfg.true_params, n_paths, steps, seed);
    let paths: Vec<Vec<EstimatorState>> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut state = cfg.initial;
            let mut visited = Vec::with_capacity(steps + 1);
            visited.push(state);
            for &z in noise.path(p) {
                state = case.update(&state, z, &cfg.space);
                visited.push(state);
            }
            visited
        })
        .collect();
    let slices = (0..=steps).map(|t| paths.iter().map(|path| path[t]).collect()).collect();
    StateGrid::from_slices(case, cfg.space, slices)
}
