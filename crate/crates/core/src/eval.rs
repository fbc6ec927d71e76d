//! Accuracy metrics: mean absolute relative depth error and
//! distance-to-plane inlier curves.

use nalgebra::{Matrix3, Point3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::depth::DepthMap;
use crate::error::{Error, Result};

/// Mean of `|z − z_gt| / z_gt` over pixels valid in both maps.
pub fn absrel(z: &DepthMap, z_gt: &DepthMap) -> Result<f64> {
    if z.dims() != z_gt.dims() {
        return Err(Error::DimensionMismatch {
            expected: z_gt.dims(),
            actual: z.dims(),
        });
    }
    let (sum, m) = z
        .iter_valid()
        .filter_map(|(i, v)| z_gt.depth(i).map(|g| (v - g).abs() / g))
        .fold((0.0, 0usize), |(s, m), e| (s + e, m + 1));
    if m == 0 {
        return Err(Error::Undefined("AbsRel over zero co-valid pixels".into()));
    }
    Ok(sum / m as f64)
}

/// Plane `n·p = d` with unit `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub normal: [f64; 3],
    pub offset: f64,
}

impl Plane {
    pub fn new(normal: Vector3<f64>, point: Point3<f64>) -> Result<Self> {
        let n = normal
            .try_normalize(1e-300)
            .ok_or_else(|| Error::invalid("plane normal has zero length"))?;
        Ok(Plane {
            normal: n.into(),
            offset: n.dot(&point.coords),
        })
    }

    pub fn distance(&self, p: &Point3<f64>) -> f64 {
        (Vector3::from(self.normal).dot(&p.coords) - self.offset).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    /// Meters.
    pub threshold: f64,
    pub inlier_fraction: f64,
}

/// Inlier fractions of one labeled point set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlaneCurve {
    pub label: usize,
    pub points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plane: Option<Plane>,
    /// Sorted by threshold.
    pub curve: Vec<CurvePoint>,
    /// Why no plane could be fitted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Reweighting rounds after the initial least-squares fit.
const REWEIGHT_ROUNDS: usize = 3;
/// Tukey cutoff in units of the median absolute residual.
const TUKEY_CUTOFF: f64 = 3.0;

/// Fits a robust plane per label and reports, for each threshold, the
/// fraction of that label's points within it. Labels are reported in
/// ascending order; `None` labels are ignored.
pub fn plane_accuracy(points: &[Point3<f64>], labels: &[Option<usize>], thresholds: &[f64]) -> Result<Vec<PlaneCurve>> {
    curves(points, labels, thresholds, fit_plane)
}

/// Like [`plane_accuracy`] but measures distances to known planes;
/// `planes[label]` is the plane of that label.
pub fn plane_accuracy_against(
    points: &[Point3<f64>],
    labels: &[Option<usize>],
    planes: &[Option<Plane>],
    thresholds: &[f64],
) -> Result<Vec<PlaneCurve>> {
    let mut out = Vec::new();
    let grouped = group(points, labels)?;
    let sorted = sorted_thresholds(thresholds)?;
    for (label, pts) in grouped {
        let entry = match planes.get(label).copied().flatten() {
            Some(plane) => curve_for(label, &pts, plane, &sorted),
            None => PlaneCurve {
                label,
                points: pts.len(),
                plane: None,
                curve: Vec::new(),
                error: Some("no reference plane for this label".into()),
            },
        };
        out.push(entry);
    }
    Ok(out)
}

fn group(points: &[Point3<f64>], labels: &[Option<usize>]) -> Result<Vec<(usize, Vec<Point3<f64>>)>> {
    if points.len() != labels.len() {
        return Err(Error::invalid("one label per point required"));
    }
    let mut map = std::collections::BTreeMap::<usize, Vec<Point3<f64>>>::new();
    for (p, l) in points.iter().zip(labels) {
        if let Some(l) = l {
            map.entry(*l).or_default().push(*p);
        }
    }
    Ok(map.into_iter().collect())
}

fn sorted_thresholds(thresholds: &[f64]) -> Result<Vec<f64>> {
    if !thresholds.iter().all(|t| *t >= 0.0 && t.is_finite()) {
        return Err(Error::invalid("thresholds must be finite and non-negative"));
    }
    let mut t = thresholds.to_vec();
    t.sort_by(f64::total_cmp);
    Ok(t)
}

fn curve_for(label: usize, pts: &[Point3<f64>], plane: Plane, thresholds: &[f64]) -> PlaneCurve {
    let mut d: Vec<f64> = pts.iter().map(|p| plane.distance(p)).collect();
    d.sort_by(f64::total_cmp);
    let curve: Vec<CurvePoint> = thresholds
        .iter()
        .map(|&t| CurvePoint {
            threshold: t,
            inlier_fraction: d.partition_point(|&x| x <= t) as f64 / d.len() as f64,
        })
        .collect();
    debug_assert!(curve.windows(2).all(|w| w[0].inlier_fraction <= w[1].inlier_fraction));
    PlaneCurve {
        label,
        points: pts.len(),
        plane: Some(plane),
        curve,
        error: None,
    }
}

fn curves(
    points: &[Point3<f64>],
    labels: &[Option<usize>],
    thresholds: &[f64],
    fit: impl Fn(&[Point3<f64>]) -> Result<Plane>,
) -> Result<Vec<PlaneCurve>> {
    let sorted = sorted_thresholds(thresholds)?;
    Ok(group(points, labels)?
        .into_iter()
        .map(|(label, pts)| match fit(&pts) {
            Ok(plane) => curve_for(label, &pts, plane, &sorted),
            Err(e) => PlaneCurve {
                label,
                points: pts.len(),
                plane: None,
                curve: Vec::new(),
                error: Some(e.to_string()),
            },
        })
        .collect())
}

/// Weighted total least-squares plane, refined by Tukey-biweight
/// reweighting.
pub fn fit_plane(points: &[Point3<f64>]) -> Result<Plane> {
    if points.len() < 3 {
        return Err(Error::Degenerate(format!(
            "plane fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    let mut weights = vec![1.0; points.len()];
    let mut plane = weighted_fit(points, &weights)?;
    for _ in 0..REWEIGHT_ROUNDS {
        let residuals: Vec<f64> = points.iter().map(|p| plane.distance(p)).collect();
        let mut sorted = residuals.clone();
        sorted.sort_by(f64::total_cmp);
        let cutoff = TUKEY_CUTOFF * sorted[sorted.len() / 2];
        if cutoff == 0.0 {
            break;
        }
        for (w, r) in weights.iter_mut().zip(&residuals) {
            let u = r / cutoff;
            *w = if u < 1.0 { (1.0 - u * u).powi(2) } else { 0.0 };
        }
        plane = weighted_fit(points, &weights)?;
    }
    Ok(plane)
}

fn weighted_fit(points: &[Point3<f64>], weights: &[f64]) -> Result<Plane> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate("all points rejected by the robust weights".into()));
    }
    let centroid = points
        .iter()
        .zip(weights)
        .fold(Vector3::zeros(), |acc, (p, w)| acc + p.coords * *w)
        / total;
    let cov = points.iter().zip(weights).fold(Matrix3::zeros(), |acc, (p, w)| {
        let d = p.coords - centroid;
        acc + d * d.transpose() * *w
    });
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (mid, big) = (eig.eigenvalues[order[1]], eig.eigenvalues[order[2]]);
    if !(mid > 1e-12 * big.max(f64::MIN_POSITIVE)) {
        return Err(Error::Degenerate("points are collinear".into()));
    }
    Plane::new(eig.eigenvectors.column(order[0]).into_owned(), Point3::from(centroid))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub absrel: Option<f64>,
}

/// Summary of one reconstruction against ground truth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub absrel: f64,
    pub valid_count: usize,
    pub depth_range: (f64, f64),
    /// Per outer iteration, from the densification statistics.
    pub trace: Vec<TracePoint>,
    pub plane_curves: Vec<PlaneCurve>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depth::DepthRange;

    fn map(values: Vec<f64>) -> DepthMap {
        DepthMap::from_values(2, 2, values, DepthRange::new(0.1, 10.0).unwrap()).unwrap()
    }

    #[test]
    fn absrel_identity_and_uniform_error() {
        let gt = map(vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(absrel(&gt, &gt).unwrap(), 0.0);
        let z = map(vec![1.1, 2.2, 3.3, 4.4]);
        assert!((absrel(&z, &gt).unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn absrel_needs_overlap() {
        let a = map(vec![1.0, 0.0, 0.0, 0.0]);
        let b = map(vec![0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(absrel(&a, &b), Err(Error::Undefined(_))));
    }

    fn grid_on_plane() -> Vec<Point3<f64>> {
        let mut v = Vec::new();
        for i in 0..10 {
            for j in 0..10 {
                let (x, y) = (i as f64 * 0.1, j as f64 * 0.1);
                v.push(Point3::new(x, y, 2.0 + 0.3 * x - 0.2 * y));
            }
        }
        v
    }

    #[test]
    fn exact_plane_is_fully_inlying() {
        let pts = grid_on_plane();
        let labels = vec![Some(0); pts.len()];
        let c = plane_accuracy(&pts, &labels, &[1e-6, 0.01]).unwrap();
        assert!(c[0].curve.iter().all(|p| p.inlier_fraction == 1.0));
    }

    #[test]
    fn one_outlier() {
        let mut pts = grid_on_plane();
        let t0 = 0.01;
        let n = Vector3::new(-0.3, 0.2, 1.0).normalize();
        pts.push(Point3::new(0.45, 0.45, 2.0 + 0.3 * 0.45 - 0.2 * 0.45) + n * 2.0 * t0);
        let labels = vec![Some(0); pts.len()];
        let c = plane_accuracy(&pts, &labels, &[3.0 * t0, t0]).unwrap();
        let n_pts = pts.len() as f64;
        assert_eq!(c[0].curve[0].threshold, t0);
        assert!((c[0].curve[0].inlier_fraction - (n_pts - 1.0) / n_pts).abs() < 1e-12);
        assert_eq!(c[0].curve[1].inlier_fraction, 1.0);
    }

    #[test]
    fn collinear_label_errors_but_others_report() {
        let mut pts = grid_on_plane();
        let mut labels = vec![Some(0); pts.len()];
        for k in 0..5 {
            pts.push(Point3::new(k as f64, 0.0, 1.0));
            labels.push(Some(1));
        }
        let c = plane_accuracy(&pts, &labels, &[0.01]).unwrap();
        assert!(c[0].error.is_none());
        assert!(c[1].error.is_some());
    }
}
