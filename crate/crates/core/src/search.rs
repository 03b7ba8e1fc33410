//! Uniform grids and brute-force minimization shared by the comparators and
//! the offline oracle.

use std::sync::{Arc, Mutex};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SearchError {
    #[error("grid needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("grid bounds must satisfy lower < upper (got {0} and {1})")]
    EmptyInterval(f64, f64),
    #[error("non-finite objective value at x = {0:?}")]
    NonFinite(Vec<f64>),
}

/// `cos(freq·x)` and `sin(freq·x)` tabulated on a grid.
#[derive(Debug)]
pub struct TrigTable {
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

/// Evenly spaced points on `[lower, upper]`, both ends included.
#[derive(Debug)]
pub struct UniformGrid {
    lower: f64,
    upper: f64,
    points: usize,
    trig: Mutex<Vec<(u64, Arc<TrigTable>)>>,
}

impl Clone for UniformGrid {
    fn clone(&self) -> Self {
        UniformGrid {
            lower: self.lower,
            upper: self.upper,
            points: self.points,
            trig: Mutex::new(Vec::new()),
        }
    }
}

impl UniformGrid {
    pub fn new(lower: f64, upper: f64, points: usize) -> Result<UniformGrid, SearchError> {
        if points < 2 {
            return Err(SearchError::TooFewPoints(points));
        }
        if !(lower < upper) {
            return Err(SearchError::EmptyInterval(lower, upper));
        }
        Ok(UniformGrid {
            lower,
            upper,
            points,
            trig: Mutex::new(Vec::new()),
        })
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        (self.upper - self.lower) / (self.points - 1) as f64
    }

    pub fn point(&self, idx: usize) -> f64 {
        if idx + 1 == self.points {
            self.upper
        } else {
            self.lower + (self.upper - self.lower) * idx as f64 / (self.points - 1) as f64
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.points).map(|i| self.point(i))
    }

    /// Cached `cos/sin(freq·x)` over the grid.
    pub fn trig_table(&self, freq: f64) -> Arc<TrigTable> {
        let key = freq.to_bits();
        let mut cache = self.trig.lock().expect("trig cache poisoned");
        if let Some((_, table)) = cache.iter().find(|(k, _)| *k == key) {
            return Arc::clone(table);
        }
        let (sin, cos): (Vec<f64>, Vec<f64>) = self.iter().map(|x| (freq * x).sin_cos()).unzip();
        let table = Arc::new(TrigTable { cos, sin });
        cache.push((key, Arc::clone(&table)));
        table
    }
}

/// Result of a grid search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridMin {
    pub index: usize,
    pub x: f64,
    pub value: f64,
}

/// First index attaining the minimum; ties go to the smallest point.
pub fn argmin_values(values: &[f64], grid: &UniformGrid) -> Result<GridMin, SearchError> {
    let mut best = GridMin {
        index: 0,
        x: grid.point(0),
        value: f64::INFINITY,
    };
    for (idx, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(SearchError::NonFinite(vec![grid.point(idx)]));
        }
        if v < best.value {
            best = GridMin {
                index: idx,
                x: grid.point(idx),
                value: v,
            };
        }
    }
    Ok(best)
}

pub fn argmin_1d(f: impl Fn(f64) -> f64, grid: &UniformGrid) -> Result<GridMin, SearchError> {
    let values: Vec<f64> = grid.iter().map(&f).collect();
    argmin_values(&values, grid)
}

const GOLDEN_ITERATIONS: usize = 64;

/// One golden-section pass on `[x − h, x + h] ∩ [lower, upper]`. The refined
/// point is only taken when it strictly improves on `value`.
pub fn golden_refine(
    f: impl Fn(f64) -> f64,
    x: f64,
    value: f64,
    grid: &UniformGrid,
) -> (f64, f64) {
    let h = grid.spacing();
    let mut a = (x - h).max(grid.lower());
    let mut b = (x + h).min(grid.upper());
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..GOLDEN_ITERATIONS {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    let candidate = if fc <= fd { (c, fc) } else { (d, fd) };
    if candidate.1.is_finite() && candidate.1 < value {
        candidate
    } else {
        (x, value)
    }
}

/// Grid search plus golden refinement on one axis.
pub fn minimize_1d(
    f: impl Fn(f64) -> f64,
    grid: &UniformGrid,
) -> Result<(f64, f64), SearchError> {
    let coarse = argmin_1d(&f, grid)?;
    Ok(golden_refine(&f, coarse.x, coarse.value, grid))
}

/// Product-grid search in two dimensions, scanning the first coordinate
/// slowest so ties resolve lexicographically, then one golden pass per axis.
pub fn minimize_2d(
    f: impl Fn(&[f64]) -> f64,
    grids: [&UniformGrid; 2],
) -> Result<(Vec<f64>, f64), SearchError> {
    let mut best = (vec![grids[0].point(0), grids[1].point(0)], f64::INFINITY);
    let mut probe = vec![0.0; 2];
    for x0 in grids[0].iter() {
        probe[0] = x0;
        for x1 in grids[1].iter() {
            probe[1] = x1;
            let v = f(&probe);
            if !v.is_finite() {
                return Err(SearchError::NonFinite(probe.clone()));
            }
            if v < best.1 {
                best = (probe.clone(), v);
            }
        }
    }
    let (mut point, mut value) = best;
    for axis in 0..2 {
        let frozen = point.clone();
        let along = |t: f64| {
            let mut p = frozen.clone();
            p[axis] = t;
            f(&p)
        };
        let (t, v) = golden_refine(along, point[axis], value, grids[axis]);
        point[axis] = t;
        value = v;
    }
    Ok((point, value))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints_are_exact() {
        let g = UniformGrid::new(-1.0, 1.0, 10_001).unwrap();
        assert_eq!(g.point(0), -1.0);
        assert_eq!(g.point(10_000), 1.0);
        assert_eq!(g.point(5_000), 0.0);
        assert!((g.spacing() - 2e-4).abs() < 1e-18);
    }

    #[test]
    fn ties_go_to_smallest_point() {
        let g = UniformGrid::new(-1.0, 1.0, 11).unwrap();
        let m = argmin_1d(|_| 0.0, &g).unwrap();
        assert_eq!(m.x, -1.0);
        let (x, _) = minimize_1d(|_| 0.0, &g).unwrap();
        assert_eq!(x, -1.0);
        let (p, _) = minimize_2d(|_| 1.0, [&g, &g]).unwrap();
        assert_eq!(p, vec![-1.0, -1.0]);
    }

    #[test]
    fn refinement_beats_grid() {
        let g = UniformGrid::new(-1.0, 1.0, 11).unwrap();
        let (x, v) = minimize_1d(|x| (x - 0.333).powi(2), &g).unwrap();
        assert!((x - 0.333).abs() < 1e-7, "{x}");
        assert!(v < 1e-14);
    }

    #[test]
    fn non_finite_values_are_reported() {
        let g = UniformGrid::new(-1.0, 1.0, 3).unwrap();
        let err = argmin_1d(|x| if x == 0.0 { f64::NAN } else { x }, &g).unwrap_err();
        assert_eq!(err, SearchError::NonFinite(vec![0.0]));
    }

    #[test]
    fn bad_grids() {
        assert_eq!(
            UniformGrid::new(0.0, 1.0, 1).unwrap_err(),
            SearchError::TooFewPoints(1)
        );
        assert!(UniformGrid::new(1.0, 1.0, 5).is_err());
    }

    #[test]
    fn two_dimensional_minimum() {
        let g = UniformGrid::new(-1.0, 1.0, 201).unwrap();
        let (p, _) = minimize_2d(|p| (p[0] - 0.25).powi(2) + (p[1] + 0.5).powi(2), [&g, &g]).unwrap();
        assert!((p[0] - 0.25).abs() < 1e-7 && (p[1] + 0.5).abs() < 1e-7);
    }

    #[test]
    fn trig_table_is_cached() {
        let g = UniformGrid::new(-1.0, 1.0, 5).unwrap();
        let a = g.trig_table(6.0);
        let b = g.trig_table(6.0);
        assert!(Arc::ptr_eq(&a, &b));
        assert!((a.cos[0] - (-6.0f64).cos()).abs() < 1e-15);
    }
}
