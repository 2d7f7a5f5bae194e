//! Per-frame data association of predicted tracklet boxes with detected boxes.

use crate::hungarian::hungarian;
use crate::scalar::Real;
use crate::types::BBox;

/// Intersection over union, in `[0, 1]`.
pub fn iou<T: Real>(a: &BBox<T>, b: &BBox<T>) -> T {
    let inter = a.intersection_area(b);
    if inter <= T::zero() {
        return T::zero();
    }
    let union = a.area() + b.area() - inter;
    (inter / union).min(T::one())
}

/// Outcome of matching `K` predictions against `N` detections.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assignment {
    /// `(prediction index, detection index)`, sorted by prediction index.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_tracklets: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

/// Matches predicted boxes to detected boxes.
///
/// The optimal assignment is computed on `1 - IOU`; any resulting pair whose
/// IOU falls below `lambda_iou` is then split back into an unmatched
/// prediction and an unmatched detection.
pub fn associate<T: Real>(predicted: &[BBox<T>], detected: &[BBox<T>], lambda_iou: T) -> Assignment {
    let ious: Vec<Vec<T>> = predicted
        .iter()
        .map(|p| detected.iter().map(|d| iou(p, d)).collect())
        .collect();
    let cost: Vec<Vec<T>> = ious
        .iter()
        .map(|row| row.iter().map(|&v| T::one() - v).collect())
        .collect();
    // 1 - IOU is always finite and the matrix rectangular
    let solved = hungarian(&cost).expect("IOU cost matrix is well formed");

    let mut track_used = vec![false; predicted.len()];
    let mut det_used = vec![false; detected.len()];
    let mut pairs = Vec::with_capacity(solved.len());
    for (i, j) in solved {
        if ious[i][j] >= lambda_iou {
            track_used[i] = true;
            det_used[j] = true;
            pairs.push((i, j));
        }
    }
    Assignment {
        pairs,
        unmatched_tracklets: (0..predicted.len()).filter(|&i| !track_used[i]).collect(),
        unmatched_detections: (0..detected.len()).filter(|&j| !det_used[j]).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn b(x: f64, y: f64, w: f64, h: f64) -> BBox<f64> {
        BBox::new(x, y, w, h).unwrap()
    }

    #[test]
    fn iou_examples() {
        assert_eq!(iou(&b(1.0, 2.0, 3.0, 4.0), &b(1.0, 2.0, 3.0, 4.0)), 1.0);
        assert_eq!(iou(&b(0.0, 0.0, 1.0, 1.0), &b(5.0, 5.0, 1.0, 1.0)), 0.0);
        // touching edges do not overlap
        assert_eq!(iou(&b(0.0, 0.0, 1.0, 1.0), &b(1.0, 0.0, 1.0, 1.0)), 0.0);
        // 5*10 / (200 - 50)
        let v = iou(&b(0.0, 0.0, 10.0, 10.0), &b(5.0, 0.0, 10.0, 10.0));
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn exact_overlap_matches() {
        let a = associate(&[b(0.0, 0.0, 10.0, 10.0)], &[b(0.0, 0.0, 10.0, 10.0)], 0.25);
        assert_eq!(a.pairs, vec![(0, 0)]);
        assert!(a.unmatched_tracklets.is_empty() && a.unmatched_detections.is_empty());
    }

    #[test]
    fn below_threshold_is_demoted() {
        // overlap 2x10 → IOU = 20 / 180 ... choose offsets for IOU exactly 0.2:
        // widths 12, shift s: inter = (12 - s)*10, union = 240 - inter → 0.2 ⇒ inter = 40 ⇒ s = 8
        let p = b(0.0, 0.0, 12.0, 10.0);
        let d = b(8.0, 0.0, 12.0, 10.0);
        assert!((iou(&p, &d) - 0.2).abs() < 1e-12);
        let a = associate(&[p], &[d], 0.25);
        assert!(a.pairs.is_empty());
        assert_eq!(a.unmatched_tracklets, vec![0]);
        assert_eq!(a.unmatched_detections, vec![0]);
    }

    // Best thresholded assignment over all injective maps, by total IOU.
    fn exhaustive(ious: &[Vec<f64>], lambda: f64) -> (f64, Vec<(usize, usize)>) {
        let k = ious.len();
        let n = ious[0].len();
        let mut best = (f64::INFINITY, Vec::new());
        // enumerate maps from tracklets to Option<det> of maximal size min(k, n)
        fn rec(
            ious: &[Vec<f64>],
            i: usize,
            used: &mut Vec<bool>,
            cur: &mut Vec<(usize, usize)>,
            best: &mut (f64, Vec<(usize, usize)>),
            need: usize,
        ) {
            if i == ious.len() {
                if cur.len() == need {
                    let cost: f64 = cur.iter().map(|&(a, b)| 1.0 - ious[a][b]).sum();
                    if cost < best.0 - 1e-12 {
                        *best = (cost, cur.clone());
                    }
                }
                return;
            }
            for j in 0..ious[0].len() {
                if !used[j] {
                    used[j] = true;
                    cur.push((i, j));
                    rec(ious, i + 1, used, cur, best, need);
                    cur.pop();
                    used[j] = false;
                }
            }
            rec(ious, i + 1, used, cur, best, need);
        }
        rec(ious, 0, &mut vec![false; n], &mut Vec::new(), &mut best, k.min(n));
        let kept = best.1.into_iter().filter(|&(a, b)| ious[a][b] >= lambda).collect();
        (best.0, kept)
    }

    #[test]
    fn three_tracklets_two_detections() {
        let preds = [b(0.0, 0.0, 10.0, 10.0), b(4.0, 0.0, 10.0, 10.0), b(40.0, 40.0, 10.0, 10.0)];
        let dets = [b(3.0, 0.0, 10.0, 10.0), b(41.0, 41.0, 10.0, 10.0)];
        let ious: Vec<Vec<f64>> = preds.iter().map(|p| dets.iter().map(|d| iou(p, d)).collect()).collect();
        let (_, expected) = exhaustive(&ious, 0.25);
        let a = associate(&preds, &dets, 0.25);
        assert_eq!(a.pairs, expected);
        assert_eq!(a.pairs, vec![(1, 0), (2, 1)]);
        assert_eq!(a.unmatched_tracklets, vec![0]);
        assert!(a.unmatched_detections.is_empty());
    }

    fn arb_box() -> impl Strategy<Value = BBox<f64>> {
        (0.0..50.0f64, 0.0..50.0f64, 1.0..30.0f64, 1.0..30.0f64).prop_map(|(x, y, w, h)| b(x, y, w, h))
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_bounded(a in arb_box(), c in arb_box()) {
            let v = iou(&a, &c);
            prop_assert!((v - iou(&c, &a)).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert!((iou(&a, &a) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn assignment_partitions_and_respects_threshold(
            preds in prop::collection::vec(arb_box(), 0..6),
            dets in prop::collection::vec(arb_box(), 0..6),
            lambda in 0.0..0.9f64,
        ) {
            let a = associate(&preds, &dets, lambda);
            let mut tseen = vec![0; preds.len()];
            let mut dseen = vec![0; dets.len()];
            for &(i, j) in &a.pairs {
                prop_assert!(iou(&preds[i], &dets[j]) >= lambda);
                tseen[i] += 1;
                dseen[j] += 1;
            }
            for &i in &a.unmatched_tracklets { tseen[i] += 1; }
            for &j in &a.unmatched_detections { dseen[j] += 1; }
            prop_assert!(tseen.iter().all(|&c| c == 1));
            prop_assert!(dseen.iter().all(|&c| c == 1));
            if !preds.is_empty() && !dets.is_empty() {
                let ious: Vec<Vec<f64>> = preds.iter().map(|p| dets.iter().map(|d| iou(p, d)).collect()).collect();
                let (best, _) = exhaustive(&ious, lambda);
                let solved = hungarian(&ious.iter().map(|r| r.iter().map(|v| 1.0 - v).collect()).collect::<Vec<Vec<f64>>>()).unwrap();
                let got: f64 = solved.iter().map(|&(i, j)| 1.0 - ious[i][j]).sum();
                prop_assert!((got - best).abs() < 1e-9);
            }
        }
    }
}
