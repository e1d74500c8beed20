//! Convex hulls of small point clouds (affine dimension at most 3) and
//! distances to their relative boundary.

use nalgebra::{DMatrix, SymmetricEigen};

/// Half-space `⟨normal, y⟩ ≤ offset` in the reduced coordinates of a hull.
#[derive(Clone, Debug, PartialEq)]
struct Facet {
    normal: Vec<f64>,
    offset: f64,
}

/// Convex hull of a finite point set, described inside its affine span.
#[derive(Clone, Debug)]
pub struct ConvexHull {
    origin: Vec<f64>,
    basis: Vec<Vec<f64>>,
    vertices: Vec<Vec<f64>>,
    facets: Vec<Facet>,
    exact: bool,
    tol: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn cross(a: &[f64], b: &[f64]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

impl ConvexHull {
    /// Builds the hull. Directions along which the points spread less than
    /// `tol · max(1, largest spread)` are treated as degenerate.
    ///
    /// Panics if `points` is empty or the points have mixed lengths.
    pub fn new(points: &[Vec<f64>], tol: f64) -> Self {
        assert!(!points.is_empty(), "hull of an empty point set");
        let d = points[0].len();
        assert!(points.iter().all(|p| p.len() == d), "mixed point dimensions");
        let n = points.len() as f64;
        let origin: Vec<f64> = (0..d)
            .map(|i| points.iter().map(|p| p[i]).sum::<f64>() / n)
            .collect();

        let mut cov = DMatrix::<f64>::zeros(d, d);
        for p in points {
            let z = sub(p, &origin);
            for i in 0..d {
                for j in 0..d {
                    cov[(i, j)] += z[i] * z[j];
                }
            }
        }
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        // eigenvalues carry rounding of the largest one, so measure the
        // spread along each axis directly
        let axes: Vec<(Vec<f64>, f64)> = order
            .iter()
            .map(|&i| {
                let e: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
                let spread = points
                    .iter()
                    .map(|p| dot(&e, &sub(p, &origin)).abs())
                    .fold(0.0, f64::max);
                (e, spread)
            })
            .collect();
        let scale = axes.iter().map(|a| a.1).fold(1.0, f64::max);
        let basis: Vec<Vec<f64>> = axes
            .into_iter()
            .filter(|(_, spread)| *spread > tol * scale)
            .map(|(e, _)| e)
            .collect();

        let mut hull = Self {
            origin,
            basis,
            vertices: Vec::new(),
            facets: Vec::new(),
            exact: true,
            tol,
        };
        let reduced: Vec<Vec<f64>> = points.iter().map(|p| hull.reduce(p).0).collect();
        let vertex_ids = match hull.basis.len() {
            0 => vec![0],
            1 => hull.build_1d(&reduced),
            2 => hull.build_2d(&reduced),
            3 => hull.build_3d(&reduced),
            _ => {
                hull.exact = false;
                (0..points.len()).collect()
            }
        };
        hull.vertices = vertex_ids.iter().map(|&i| points[i].clone()).collect();
        hull
    }

    /// Reduced coordinates and the length of the component off the span.
    fn reduce(&self, x: &[f64]) -> (Vec<f64>, f64) {
        let z = sub(x, &self.origin);
        let y: Vec<f64> = self.basis.iter().map(|b| dot(b, &z)).collect();
        let mut r = z.clone();
        for (coef, b) in y.iter().zip(&self.basis) {
            for (ri, bi) in r.iter_mut().zip(b) {
                *ri -= coef * bi;
            }
        }
        (y, norm(&r))
    }

    fn build_1d(&mut self, pts: &[Vec<f64>]) -> Vec<usize> {
        let (mut lo, mut hi) = (0, 0);
        for (i, p) in pts.iter().enumerate() {
            if p[0] < pts[lo][0] {
                lo = i;
            }
            if p[0] > pts[hi][0] {
                hi = i;
            }
        }
        self.facets = vec![
            Facet { normal: vec![1.0], offset: pts[hi][0] },
            Facet { normal: vec![-1.0], offset: -pts[lo][0] },
        ];
        vec![lo, hi]
    }

    fn build_2d(&mut self, pts: &[Vec<f64>]) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..pts.len()).collect();
        idx.sort_by(|&a, &b| {
            pts[a][0]
                .total_cmp(&pts[b][0])
                .then(pts[a][1].total_cmp(&pts[b][1]))
        });
        let turn = |o: usize, a: usize, b: usize| {
            (pts[a][0] - pts[o][0]) * (pts[b][1] - pts[o][1])
                - (pts[a][1] - pts[o][1]) * (pts[b][0] - pts[o][0])
        };
        let eps = self.tol * self.tol;
        let mut chain: Vec<usize> = Vec::with_capacity(2 * idx.len());
        for pass in 0..2 {
            let start = chain.len();
            let iter: Box<dyn Iterator<Item = &usize>> = if pass == 0 {
                Box::new(idx.iter())
            } else {
                Box::new(idx.iter().rev())
            };
            for &i in iter {
                while chain.len() >= start + 2
                    && turn(chain[chain.len() - 2], chain[chain.len() - 1], i) <= eps
                {
                    chain.pop();
                }
                chain.push(i);
            }
            chain.pop();
        }
        // counter-clockwise; outward normal of edge a→b is (dy, -dx)
        self.facets = (0..chain.len())
            .filter_map(|e| {
                let a = &pts[chain[e]];
                let b = &pts[chain[(e + 1) % chain.len()]];
                let nrm = [b[1] - a[1], -(b[0] - a[0])];
                let len = norm(&nrm);
                (len > 0.0).then(|| {
                    let normal = vec![nrm[0] / len, nrm[1] / len];
                    let offset = dot(&normal, a);
                    Facet { normal, offset }
                })
            })
            .collect();
        chain
    }

    fn build_3d(&mut self, pts: &[Vec<f64>]) -> Vec<usize> {
        let eps = self.tol * 1e-3;
        let plane = |a: usize, b: usize, c: usize| -> Option<Facet> {
            let n = cross(&sub(&pts[b], &pts[a]), &sub(&pts[c], &pts[a]));
            let len = norm(&n);
            (len > 0.0).then(|| {
                let normal = vec![n[0] / len, n[1] / len, n[2] / len];
                let offset = dot(&normal, &pts[a]);
                Facet { normal, offset }
            })
        };

        // initial tetrahedron from extreme points
        let i0 = (0..pts.len()).min_by(|&a, &b| pts[a][0].total_cmp(&pts[b][0])).unwrap();
        let i1 = (0..pts.len())
            .max_by(|&a, &b| norm(&sub(&pts[a], &pts[i0])).total_cmp(&norm(&sub(&pts[b], &pts[i0]))))
            .unwrap();
        let line = sub(&pts[i1], &pts[i0]);
        let dist_line = |p: &Vec<f64>| norm(&cross(&line, &sub(p, &pts[i0])));
        let i2 = (0..pts.len())
            .max_by(|&a, &b| dist_line(&pts[a]).total_cmp(&dist_line(&pts[b])))
            .unwrap();
        let base = plane(i0, i1, i2).expect("rank-3 cloud has a non-degenerate triangle");
        let i3 = (0..pts.len())
            .max_by(|&a, &b| {
                (dot(&base.normal, &pts[a]) - base.offset)
                    .abs()
                    .total_cmp(&(dot(&base.normal, &pts[b]) - base.offset).abs())
            })
            .unwrap();

        let mut faces: Vec<[usize; 3]> = Vec::new();
        let mut planes: Vec<Facet> = Vec::new();
        let tet = [i0, i1, i2, i3];
        for (skip, &opposite) in tet.iter().enumerate() {
            let mut f: Vec<usize> = tet
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != skip)
                .map(|(_, &v)| v)
                .collect();
            let mut pl = plane(f[0], f[1], f[2]).expect("non-degenerate tetrahedron");
            if dot(&pl.normal, &pts[opposite]) - pl.offset > 0.0 {
                f.swap(1, 2);
                pl = plane(f[0], f[1], f[2]).expect("non-degenerate tetrahedron");
            }
            faces.push([f[0], f[1], f[2]]);
            planes.push(pl);
        }

        for (p, point) in pts.iter().enumerate() {
            if tet.contains(&p) {
                continue;
            }
            let visible: Vec<bool> = planes
                .iter()
                .map(|pl| dot(&pl.normal, point) - pl.offset > eps)
                .collect();
            if !visible.iter().any(|&v| v) {
                continue;
            }
            let mut edges = std::collections::HashSet::new();
            for (f, vis) in faces.iter().zip(&visible) {
                if *vis {
                    edges.insert((f[0], f[1]));
                    edges.insert((f[1], f[2]));
                    edges.insert((f[2], f[0]));
                }
            }
            let mut horizon: Vec<(usize, usize)> = edges
                .iter()
                .filter(|(a, b)| !edges.contains(&(*b, *a)))
                .copied()
                .collect();
            horizon.sort_unstable();
            let mut keep_faces = Vec::with_capacity(faces.len());
            let mut keep_planes = Vec::with_capacity(planes.len());
            for ((f, pl), vis) in faces.into_iter().zip(planes).zip(&visible) {
                if !vis {
                    keep_faces.push(f);
                    keep_planes.push(pl);
                }
            }
            faces = keep_faces;
            planes = keep_planes;
            for (a, b) in horizon {
                if let Some(pl) = plane(a, b, p) {
                    faces.push([a, b, p]);
                    planes.push(pl);
                }
            }
        }

        self.facets = planes;
        let mut ids: Vec<usize> = faces.iter().flatten().copied().collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Dimension of the affine span of the input points.
    pub fn affine_dim(&self) -> usize {
        self.basis.len()
    }

    /// Hull vertices in the original coordinates. When the affine dimension
    /// exceeds 3 this is the raw point set.
    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    /// `false` when the hull was not built (affine dimension above 3).
    pub fn is_exact(&self) -> bool {
        self.exact
    }

    /// `max_v ⟨u, v⟩` over the vertices.
    pub fn support(&self, u: &[f64]) -> f64 {
        self.vertices
            .iter()
            .map(|v| dot(u, v))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Distance from `x` to the relative boundary: positive inside the
    /// relative interior, negative outside (including off the affine span).
    /// `None` when the hull is not exact.
    pub fn boundary_distance(&self, x: &[f64]) -> Option<f64> {
        if !self.exact {
            return None;
        }
        let (y, off_span) = self.reduce(x);
        if self.basis.is_empty() {
            return Some(-off_span);
        }
        let inner = self
            .facets
            .iter()
            .map(|f| f.offset - dot(&f.normal, &y))
            .fold(f64::INFINITY, f64::min);
        if off_span > self.tol {
            let outside = (-inner).max(0.0);
            return Some(-(off_span * off_span + outside * outside).sqrt());
        }
        Some(inner)
    }

    pub fn contains(&self, x: &[f64], slack: f64) -> Option<bool> {
        self.boundary_distance(x).map(|d| d >= -slack)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point() {
        let h = ConvexHull::new(&[vec![1.0, 2.0], vec![1.0, 2.0]], 1e-12);
        assert_eq!(h.affine_dim(), 0);
        assert_eq!(h.vertices().len(), 1);
        assert_eq!(h.boundary_distance(&[1.0, 2.0]), Some(0.0));
        assert!(h.boundary_distance(&[2.0, 2.0]).unwrap() < -0.99);
    }

    #[test]
    fn segment_in_plane() {
        let pts: Vec<Vec<f64>> = (0..=10).map(|i| vec![i as f64 * 0.1, 1.0 - i as f64 * 0.1]).collect();
        let h = ConvexHull::new(&pts, 1e-12);
        assert_eq!(h.affine_dim(), 1);
        let mut v = h.vertices().to_vec();
        v.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert!((v[0][0] - 0.0).abs() < 1e-15 && (v[1][0] - 1.0).abs() < 1e-15);
        let d = h.boundary_distance(&[0.5, 0.5]).unwrap();
        assert!((d - 0.5 * 2f64.sqrt()).abs() < 1e-12);
        assert!(h.boundary_distance(&[0.5, 0.6]).unwrap() < 0.0);
    }

    #[test]
    fn square_with_interior_points() {
        let mut pts = vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![2.0, 2.0], vec![0.0, 2.0]];
        pts.push(vec![1.0, 1.0]);
        pts.push(vec![1.0, 0.0]);
        let h = ConvexHull::new(&pts, 1e-12);
        assert_eq!(h.affine_dim(), 2);
        assert_eq!(h.vertices().len(), 4);
        assert!((h.boundary_distance(&[1.0, 1.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((h.boundary_distance(&[0.5, 1.0]).unwrap() - 0.5).abs() < 1e-12);
        assert!((h.boundary_distance(&[3.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn cube_in_three_dimensions() {
        let mut pts = Vec::new();
        for x in [0.0, 1.0] {
            for y in [0.0, 1.0] {
                for z in [0.0, 1.0] {
                    pts.push(vec![x, y, z]);
                }
            }
        }
        pts.push(vec![0.5, 0.5, 0.5]);
        pts.push(vec![0.2, 0.7, 0.4]);
        let h = ConvexHull::new(&pts, 1e-12);
        assert_eq!(h.affine_dim(), 3);
        assert_eq!(h.vertices().len(), 8);
        assert!((h.boundary_distance(&[0.5, 0.5, 0.5]).unwrap() - 0.5).abs() < 1e-12);
        assert!((h.boundary_distance(&[0.5, 0.5, 0.9]).unwrap() - 0.1).abs() < 1e-12);
        assert!(h.boundary_distance(&[0.5, 0.5, 1.5]).unwrap() < -0.49);
    }

    #[test]
    fn random_cloud_contains_its_points() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<Vec<f64>> = (0..300)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let h = ConvexHull::new(&pts, 1e-12);
        for p in &pts {
            assert!(h.boundary_distance(p).unwrap() >= -1e-9);
        }
        assert!(h.vertices().len() < pts.len());
        let u = [0.3, -0.4, 0.2];
        let direct = pts.iter().map(|p| dot(&u, p)).fold(f64::NEG_INFINITY, f64::max);
        assert!((h.support(&u) - direct).abs() < 1e-12);
    }

    #[test]
    fn four_dimensional_cloud_is_raw() {
        let pts: Vec<Vec<f64>> = (0..5)
            .map(|i| (0..4).map(|j| if i == j + 1 { 1.0 } else { 0.0 }).collect())
            .collect();
        let h = ConvexHull::new(&pts, 1e-12);
        assert!(!h.is_exact());
        assert_eq!(h.vertices().len(), 5);
        assert_eq!(h.boundary_distance(&[0.1; 4]), None);
    }
}
