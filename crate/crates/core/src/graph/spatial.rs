use crate::geo::PlanePoint;
use std::collections::HashMap;

/// Uniform grid over planar points for radius and nearest-point queries.
#[derive(Debug, Clone)]
pub struct SpatialGrid {
    points: Vec<PlanePoint>,
    cell: f64,
    cells: HashMap<(i64, i64), Vec<usize>>,
    bounds: Option<((i64, i64), (i64, i64))>,
}

impl SpatialGrid {
    pub fn new(points: Vec<PlanePoint>, cell: f64) -> Self {
        assert!(cell > 0.0, "cell size must be positive");
        let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        let mut bounds: Option<((i64, i64), (i64, i64))> = None;
        for (i, p) in points.iter().enumerate() {
            let k = Self::key(cell, p);
            cells.entry(k).or_default().push(i);
            bounds = Some(match bounds {
                None => (k, k),
                Some((lo, hi)) => ((lo.0.min(k.0), lo.1.min(k.1)), (hi.0.max(k.0), hi.1.max(k.1))),
            });
        }
        Self { points, cell, cells, bounds }
    }

    fn key(cell: f64, p: &PlanePoint) -> (i64, i64) {
        ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Indices of points within `radius` (planar), ascending.
    pub fn within(&self, center: PlanePoint, radius: f64) -> Vec<usize> {
        let lo = Self::key(self.cell, &PlanePoint { x: center.x - radius, y: center.y - radius });
        let hi = Self::key(self.cell, &PlanePoint { x: center.x + radius, y: center.y + radius });
        let mut out = Vec::new();
        for cx in lo.0..=hi.0 {
            for cy in lo.1..=hi.1 {
                if let Some(ids) = self.cells.get(&(cx, cy)) {
                    out.extend(ids.iter().copied().filter(|&i| self.points[i].distance(&center) <= radius));
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Closest point by planar distance; ties go to the lowest index.
    pub fn nearest(&self, center: PlanePoint) -> Option<(usize, f64)> {
        let ((x0, y0), (x1, y1)) = self.bounds?;
        let c = Self::key(self.cell, &center);
        let max_ring = [c.0 - x0, x1 - c.0, c.1 - y0, y1 - c.1].into_iter().map(i64::abs).max().unwrap_or(0)
            + 1;
        let mut best: Option<(usize, f64)> = None;
        for ring in 0..=max_ring {
            if let Some((_, d)) = best {
                // every point in ring r is at least (r - 1) * cell away
                if (ring - 1) as f64 * self.cell > d {
                    break;
                }
            }
            for cx in c.0 - ring..=c.0 + ring {
                for cy in c.1 - ring..=c.1 + ring {
                    if (cx - c.0).abs() != ring && (cy - c.1).abs() != ring {
                        continue;
                    }
                    let Some(ids) = self.cells.get(&(cx, cy)) else { continue };
                    for &i in ids {
                        let d = self.points[i].distance(&center);
                        let better = match best {
                            None => true,
                            Some((bi, bd)) => d < bd || (d == bd && i < bi),
                        };
                        if better {
                            best = Some((i, d));
                        }
                    }
                }
            }
        }
        best
    }
}
