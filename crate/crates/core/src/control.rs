//! Finite discretization of the compact control set.

use crate::error::{Error, Result};

/// Index of a point in a [`ControlGrid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ControlId(pub usize);

/// A finite, ordered set of control points inside an axis-aligned box.
///
/// Grid order is lexicographic with the first axis varying slowest. Taking a
/// supremum over the grid approximates the supremum over the box from below.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlGrid {
    axes: usize,
    points: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    resolution: usize,
}

impl ControlGrid {
    /// Uniform tensor grid with `resolution` points per axis. A resolution of
    /// one places the single point at the lower corner.
    pub fn uniform(lower: &[f64], upper: &[f64], resolution: usize) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::InvalidControlGrid(
                "box bounds must be nonempty and of equal length".into(),
            ));
        }
        if resolution == 0 {
            return Err(Error::EmptyControlGrid);
        }
        if lower.iter().zip(upper).any(|(l, u)| !(l <= u) || !l.is_finite() || !u.is_finite()) {
            return Err(Error::InvalidControlGrid("box bounds must be finite with lower <= upper".into()));
        }
        let axes = lower.len();
        let total = resolution.pow(axes as u32);
        let mut points = Vec::with_capacity(total * axes);
        for flat in 0..total {
            let mut rem = flat;
            let mut coords = vec![0.0; axes];
            for axis in (0..axes).rev() {
                let k = rem % resolution;
                rem /= resolution;
                coords[axis] = if resolution == 1 {
                    lower[axis]
                } else {
                    lower[axis] + (upper[axis] - lower[axis]) * k as f64 / (resolution - 1) as f64
                };
            }
            points.extend(coords);
        }
        let grid = Self {
            axes,
            points,
            lower: lower.to_vec(),
            upper: upper.to_vec(),
            resolution,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Explicit list of points, kept in the given order.
    pub fn from_points(points: &[Vec<f64>], lower: &[f64], upper: &[f64]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyControlGrid);
        }
        let axes = lower.len();
        if upper.len() != axes || points.iter().any(|p| p.len() != axes) {
            return Err(Error::InvalidControlGrid("inconsistent control dimension".into()));
        }
        let grid = Self {
            axes,
            points: points.iter().flatten().copied().collect(),
            lower: lower.to_vec(),
            upper: upper.to_vec(),
            resolution: points.len(),
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Single control point; the box is the point itself.
    pub fn singleton(point: &[f64]) -> Result<Self> {
        Self::from_points(&[point.to_vec()], point, point)
    }

    fn validate(&self) -> Result<()> {
        let n = self.len();
        for i in 0..n {
            let p = self.point(ControlId(i));
            let inside = p
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| v >= l && v <= u);
            if !inside {
                return Err(Error::InvalidControlGrid(format!("point {p:?} lies outside the box")));
            }
            for j in 0..i {
                if self.point(ControlId(j)) == p {
                    return Err(Error::InvalidControlGrid(format!("duplicate point {p:?}")));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.axes
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn axes(&self) -> usize {
        self.axes
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn point(&self, id: ControlId) -> &[f64] {
        &self.points[id.0 * self.axes..(id.0 + 1) * self.axes]
    }

    pub fn ids(&self) -> impl Iterator<Item = ControlId> + '_ {
        (0..self.len()).map(ControlId)
    }

    pub fn contains(&self, id: ControlId) -> bool {
        id.0 < self.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid_is_lexicographic() {
        let g = ControlGrid::uniform(&[0.0, 0.0], &[1.0, 2.0], 3).unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g.point(ControlId(0)), &[0.0, 0.0]);
        assert_eq!(g.point(ControlId(1)), &[0.0, 1.0]);
        assert_eq!(g.point(ControlId(3)), &[0.5, 0.0]);
        assert_eq!(g.point(ControlId(8)), &[1.0, 2.0]);
    }

    #[test]
    fn rejects_empty_and_duplicates() {
        assert_eq!(ControlGrid::uniform(&[0.0], &[1.0], 0), Err(Error::EmptyControlGrid));
        assert_eq!(ControlGrid::from_points(&[], &[0.0], &[1.0]), Err(Error::EmptyControlGrid));
        assert!(ControlGrid::from_points(&[vec![0.5], vec![0.5]], &[0.0], &[1.0]).is_err());
        assert!(ControlGrid::from_points(&[vec![1.5]], &[0.0], &[1.0]).is_err());
        // a degenerate box collapses all points onto one
        assert!(ControlGrid::uniform(&[0.0], &[0.0], 2).is_err());
    }

    #[test]
    fn singleton_grid() {
        let g = ControlGrid::singleton(&[0.25, 0.5]).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.axes(), 2);
    }
}
