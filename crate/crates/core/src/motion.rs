//! Box-state predictors that fill gaps where the detector misses a face.
//!
//! The Kalman variant follows the SORT state layout (center x, center y, area,
//! aspect ratio, plus velocities on center and area). With SORT's diagonal
//! noise matrices the seven-dimensional filter decouples into three
//! position/velocity pairs and one static aspect channel, which is how it is
//! implemented here.

use crate::config::PredictorKind;
use crate::scalar::Real;
use crate::types::BBox;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction<T> {
    pub bbox: BBox<T>,
    /// Width or height collapsed and was clamped to one pixel.
    pub clamped: bool,
}

pub trait BoxPredictor<T: Real> {
    /// Advances the state by one frame and returns the projected box.
    fn predict(&mut self) -> Prediction<T>;
    /// Folds an observed box into the state.
    fn correct(&mut self, observed: &BBox<T>);
    /// Current state projected to a box, without advancing.
    fn estimate(&self) -> BBox<T>;
}

fn clamped_box<T: Real>(cx: T, cy: T, w: T, h: T) -> Prediction<T> {
    let one = T::one();
    let bad = |v: T| !(v > T::zero()) || !v.is_finite();
    let clamped = bad(w) || bad(h);
    let w = if bad(w) { one } else { w };
    let h = if bad(h) { one } else { h };
    let cx = if cx.is_finite() { cx } else { T::zero() };
    let cy = if cy.is_finite() { cy } else { T::zero() };
    Prediction {
        bbox: BBox::from_center(cx, cy, w, h).expect("clamped box is valid"),
        clamped,
    }
}

/// Holds the last observed box.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticPredictor<T> {
    last: BBox<T>,
}

impl<T: Real> StaticPredictor<T> {
    pub fn new(init: BBox<T>) -> Self {
        Self { last: init }
    }
}

impl<T: Real> BoxPredictor<T> for StaticPredictor<T> {
    fn predict(&mut self) -> Prediction<T> {
        Prediction {
            bbox: self.last,
            clamped: false,
        }
    }

    fn correct(&mut self, observed: &BBox<T>) {
        self.last = *observed;
    }

    fn estimate(&self) -> BBox<T> {
        self.last
    }
}

/// Extrapolates the center by the velocity between the last two observations; size is held.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantVelocityPredictor<T> {
    last_center: (T, T),
    size: (T, T),
    velocity: (T, T),
    center: (T, T),
    frames_since_obs: u32,
}

impl<T: Real> ConstantVelocityPredictor<T> {
    pub fn new(init: BBox<T>) -> Self {
        let c = init.center();
        Self {
            last_center: c,
            size: (init.w, init.h),
            velocity: (T::zero(), T::zero()),
            center: c,
            frames_since_obs: 0,
        }
    }
}

impl<T: Real> BoxPredictor<T> for ConstantVelocityPredictor<T> {
    fn predict(&mut self) -> Prediction<T> {
        self.frames_since_obs += 1;
        self.center = (self.center.0 + self.velocity.0, self.center.1 + self.velocity.1);
        clamped_box(self.center.0, self.center.1, self.size.0, self.size.1)
    }

    fn correct(&mut self, observed: &BBox<T>) {
        let c = observed.center();
        let gap = T::lit(f64::from(self.frames_since_obs.max(1)));
        self.velocity = ((c.0 - self.last_center.0) / gap, (c.1 - self.last_center.1) / gap);
        self.last_center = c;
        self.center = c;
        self.size = (observed.w, observed.h);
        self.frames_since_obs = 0;
    }

    fn estimate(&self) -> BBox<T> {
        clamped_box(self.center.0, self.center.1, self.size.0, self.size.1).bbox
    }
}

/// Noise scales applied on top of the SORT defaults. Zero gives a noiseless filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanParams<T> {
    pub process_noise: T,
    pub measurement_noise: T,
}

impl<T: Real> Default for KalmanParams<T> {
    fn default() -> Self {
        Self {
            process_noise: T::one(),
            measurement_noise: T::one(),
        }
    }
}

/// Position/velocity pair with its 2x2 covariance `[[pp, pv], [pv, vv]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct CvAxis<T> {
    pos: T,
    vel: T,
    pp: T,
    pv: T,
    vv: T,
    q_pos: T,
    q_vel: T,
    r: T,
}

impl<T: Real> CvAxis<T> {
    fn new(pos: T, p0_pos: T, p0_vel: T, q_pos: T, q_vel: T, r: T) -> Self {
        Self {
            pos,
            vel: T::zero(),
            pp: p0_pos,
            pv: T::zero(),
            vv: p0_vel,
            q_pos,
            q_vel,
            r,
        }
    }

    fn predict(&mut self) {
        self.pos = self.pos + self.vel;
        let two = T::lit(2.0);
        self.pp = self.pp + two * self.pv + self.vv + self.q_pos;
        self.pv = self.pv + self.vv;
        self.vv = self.vv + self.q_vel;
    }

    fn update(&mut self, z: T) {
        let s = self.pp + self.r;
        if s <= T::zero() {
            // fully certain state, nothing to fold in
            return;
        }
        let k_pos = self.pp / s;
        let k_vel = self.pv / s;
        let innov = z - self.pos;
        self.pos = self.pos + k_pos * innov;
        self.vel = self.vel + k_vel * innov;
        let (pp, pv, vv) = (self.pp, self.pv, self.vv);
        self.pp = pp - k_pos * pp;
        self.pv = pv - k_pos * pv;
        self.vv = vv - k_vel * pv;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct StaticAxis<T> {
    val: T,
    var: T,
    q: T,
    r: T,
}

impl<T: Real> StaticAxis<T> {
    fn predict(&mut self) {
        self.var = self.var + self.q;
    }

    fn update(&mut self, z: T) {
        let s = self.var + self.r;
        if s <= T::zero() {
            return;
        }
        let k = self.var / s;
        self.val = self.val + k * (z - self.val);
        self.var = self.var - k * self.var;
    }
}

/// SORT-style constant-velocity Kalman filter over (cx, cy, area, aspect).
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanCvPredictor<T> {
    cx: CvAxis<T>,
    cy: CvAxis<T>,
    area: CvAxis<T>,
    aspect: StaticAxis<T>,
}

impl<T: Real> KalmanCvPredictor<T> {
    pub fn new(init: BBox<T>, params: KalmanParams<T>) -> Self {
        let l = T::lit;
        let q = params.process_noise;
        let r = params.measurement_noise;
        let (cx, cy) = init.center();
        Self {
            cx: CvAxis::new(cx, l(10.0), l(1e4), q, l(0.01) * q, r),
            cy: CvAxis::new(cy, l(10.0), l(1e4), q, l(0.01) * q, r),
            area: CvAxis::new(init.area(), l(10.0), l(1e4), q, l(1e-4) * q, l(10.0) * r),
            aspect: StaticAxis {
                val: init.w / init.h,
                var: l(10.0),
                q,
                r: l(10.0) * r,
            },
        }
    }

    /// Center velocity in pixels per frame.
    pub fn velocity(&self) -> (T, T) {
        (self.cx.vel, self.cy.vel)
    }

    fn project(&self) -> Prediction<T> {
        let s = self.area.pos;
        let r = self.aspect.val;
        if s > T::zero() && r > T::zero() {
            let w = (s * r).sqrt();
            clamped_box(self.cx.pos, self.cy.pos, w, s / w)
        } else {
            clamped_box(self.cx.pos, self.cy.pos, T::zero(), T::zero())
        }
    }
}

impl<T: Real> BoxPredictor<T> for KalmanCvPredictor<T> {
    fn predict(&mut self) -> Prediction<T> {
        if self.area.pos + self.area.vel <= T::zero() {
            self.area.vel = T::zero();
        }
        self.cx.predict();
        self.cy.predict();
        self.area.predict();
        self.aspect.predict();
        self.project()
    }

    fn correct(&mut self, observed: &BBox<T>) {
        let (cx, cy) = observed.center();
        self.cx.update(cx);
        self.cy.update(cy);
        self.area.update(observed.area());
        self.aspect.update(observed.w / observed.h);
    }

    fn estimate(&self) -> BBox<T> {
        self.project().bbox
    }
}

/// Closed set of predictors a tracklet can carry.
#[derive(Debug, Clone, PartialEq)]
pub enum Predictor<T> {
    Static(StaticPredictor<T>),
    ConstantVelocity(ConstantVelocityPredictor<T>),
    KalmanCv(KalmanCvPredictor<T>),
}

impl<T: Real> Predictor<T> {
    pub fn new(kind: PredictorKind, init: BBox<T>) -> Self {
        Self::with_params(kind, init, KalmanParams::default())
    }

    pub fn with_params(kind: PredictorKind, init: BBox<T>, params: KalmanParams<T>) -> Self {
        match kind {
            PredictorKind::Static => Predictor::Static(StaticPredictor::new(init)),
            PredictorKind::ConstantVelocity => {
                Predictor::ConstantVelocity(ConstantVelocityPredictor::new(init))
            }
            PredictorKind::KalmanCv => Predictor::KalmanCv(KalmanCvPredictor::new(init, params)),
        }
    }
}

impl<T: Real> BoxPredictor<T> for Predictor<T> {
    fn predict(&mut self) -> Prediction<T> {
        match self {
            Predictor::Static(p) => p.predict(),
            Predictor::ConstantVelocity(p) => p.predict(),
            Predictor::KalmanCv(p) => p.predict(),
        }
    }

    fn correct(&mut self, observed: &BBox<T>) {
        match self {
            Predictor::Static(p) => p.correct(observed),
            Predictor::ConstantVelocity(p) => p.correct(observed),
            Predictor::KalmanCv(p) => p.correct(observed),
        }
    }

    fn estimate(&self) -> BBox<T> {
        match self {
            Predictor::Static(p) => p.estimate(),
            Predictor::ConstantVelocity(p) => p.estimate(),
            Predictor::KalmanCv(p) => p.estimate(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(x: f64, y: f64, w: f64, h: f64) -> BBox<f64> {
        BBox::new(x, y, w, h).unwrap()
    }

    fn close(a: &BBox<f64>, e: &BBox<f64>, tol: f64) -> bool {
        a.to_array().iter().zip(e.to_array()).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn stationary_history_predicts_last_box() {
        let bx = b(10.0, 20.0, 30.0, 40.0);
        for kind in [PredictorKind::Static, PredictorKind::ConstantVelocity, PredictorKind::KalmanCv] {
            let mut p = Predictor::new(kind, bx);
            for _ in 0..5 {
                p.predict();
                p.correct(&bx);
            }
            let pred = p.predict();
            assert!(close(&pred.bbox, &bx, 1e-9), "{kind:?}: {:?}", pred.bbox);
            assert!(!pred.clamped);
        }
    }

    #[test]
    fn constant_velocity_extrapolates() {
        let mut p = Predictor::new(PredictorKind::ConstantVelocity, BBox::from_center(0.0, 0.0, 4.0, 4.0).unwrap());
        p.predict();
        p.correct(&BBox::from_center(2.0, 0.0, 4.0, 4.0).unwrap());
        let next = p.predict().bbox;
        assert_eq!(next.center(), (4.0, 0.0));
        assert_eq!((next.w, next.h), (4.0, 4.0));
    }

    #[test]
    fn constant_velocity_spreads_over_gap() {
        let mut p = ConstantVelocityPredictor::new(BBox::from_center(0.0, 0.0, 4.0, 4.0).unwrap());
        p.predict();
        p.predict();
        p.predict();
        p.correct(&BBox::from_center(6.0, 3.0, 4.0, 4.0).unwrap());
        assert_eq!(p.predict().bbox.center(), (8.0, 4.0));
    }

    #[test]
    fn static_correct_then_predict() {
        let mut p = Predictor::new(PredictorKind::Static, b(0.0, 0.0, 5.0, 5.0));
        let obs = b(3.0, 4.0, 6.0, 7.0);
        p.correct(&obs);
        assert_eq!(p.predict().bbox, obs);
    }

    #[test]
    fn noiseless_kalman_is_exact_extrapolation() {
        let params = KalmanParams {
            process_noise: 0.0,
            measurement_noise: 0.0,
        };
        let step = |k: f64| BBox::from_center(100.0 + 3.0 * k, 50.0 - 2.0 * k, 20.0, 30.0).unwrap();
        let mut p = KalmanCvPredictor::new(step(0.0), params);
        for k in 1..6 {
            p.predict();
            p.correct(&step(k as f64));
        }
        for k in 6..12 {
            let pred = p.predict().bbox;
            assert!(close(&pred, &step(k as f64), 1e-6), "frame {k}: {pred:?}");
        }
    }

    #[test]
    fn kalman_posterior_between_prior_and_observation() {
        let mut p = KalmanCvPredictor::new(BBox::from_center(0.0, 0.0, 10.0, 10.0).unwrap(), KalmanParams::default());
        for _ in 0..10 {
            p.predict();
            p.correct(&BBox::from_center(0.0, 0.0, 10.0, 10.0).unwrap());
        }
        let prior = p.predict().bbox.center();
        let obs = BBox::from_center(8.0, -6.0, 10.0, 10.0).unwrap();
        p.correct(&obs);
        let post = p.estimate().center();
        assert!(post.0 > prior.0 && post.0 < 8.0, "{post:?}");
        assert!(post.1 < prior.1 && post.1 > -6.0, "{post:?}");
    }

    #[test]
    fn kalman_velocity_decays_under_repeated_identical_box() {
        let mut p = KalmanCvPredictor::new(BBox::from_center(0.0, 0.0, 10.0, 10.0).unwrap(), KalmanParams::default());
        for k in 1..=10 {
            p.predict();
            p.correct(&BBox::from_center(5.0 * k as f64, 0.0, 10.0, 10.0).unwrap());
        }
        let v0 = p.velocity().0;
        assert!(v0 > 3.0);
        let mut last = v0;
        for _ in 0..40 {
            p.predict();
            p.correct(&BBox::from_center(50.0, 0.0, 10.0, 10.0).unwrap());
            let v = p.velocity().0.abs();
            assert!(v <= last.abs() + 1e-9 || v < 0.5);
            last = v;
        }
        assert!(last.abs() < 0.1, "{last}");
    }

    #[test]
    fn collapsing_area_is_clamped() {
        let mut p = KalmanCvPredictor::new(BBox::from_center(0.0, 0.0, 10.0, 10.0).unwrap(), KalmanParams::default());
        // force a shrinking trend on the area
        p.area.vel = -1000.0;
        p.area.pos = 50.0;
        let pred = p.predict();
        assert!(pred.bbox.w > 0.0 && pred.bbox.h > 0.0);
        // SORT zeroes the area velocity instead of going negative
        assert!(!pred.clamped);
        p.area.pos = -1.0;
        let pred = p.project();
        assert!(pred.clamped);
        assert_eq!((pred.bbox.w, pred.bbox.h), (1.0, 1.0));
    }

    #[test]
    fn predictions_are_deterministic() {
        let mk = || {
            let mut p = Predictor::new(PredictorKind::KalmanCv, b(0.0, 0.0, 10.0, 12.0));
            let mut out = Vec::new();
            for k in 0..20 {
                out.push(p.predict().bbox);
                if k % 3 != 0 {
                    p.correct(&b(k as f64 * 1.5, 0.5 * k as f64, 10.0, 12.0));
                }
            }
            out
        };
        assert_eq!(mk(), mk());
    }

    #[test]
    fn works_in_f32() {
        let mut p = Predictor::new(PredictorKind::KalmanCv, BBox::<f32>::new(0.0, 0.0, 8.0, 8.0).unwrap());
        p.predict();
        p.correct(&BBox::new(1.0, 0.0, 8.0, 8.0).unwrap());
        assert!(p.predict().bbox.x > 0.0);
    }
}
