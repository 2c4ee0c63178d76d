//! Constant-velocity Kalman filter over box center, area and aspect ratio.
//!
//! State `[u, v, s, r, du, dv, ds]`: center `(u, v)`, area `s`, aspect ratio
//! `r = w / h` (held constant) and the velocities of the first three.
//! Measurement `[u, v, s, r]`.

use nalgebra::{SMatrix, SVector};

use crate::error::{Error, Result};
use crate::stream::BBox;

pub type StateVec = SVector<f64, 7>;
pub type StateCov = SMatrix<f64, 7, 7>;
pub type MeasVec = SVector<f64, 4>;
type MeasCov = SMatrix<f64, 4, 4>;
type MeasMap = SMatrix<f64, 4, 7>;

/// Floor applied to area and aspect ratio when the filter drives them non-positive.
pub const MIN_POSITIVE: f64 = 1e-6;

/// Allowed asymmetry of the covariance, `max |P - P^T|`.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub mean: StateVec,
    pub covariance: StateCov,
}

/// Convert a box to the measurement vector `[u, v, s, r]`.
pub fn bbox_to_measurement(b: &BBox) -> MeasVec {
    let c = b.centroid();
    MeasVec::new(c.x, c.y, b.area(), b.width() / b.height())
}

/// Box described by a state mean. `None` if area or aspect ratio is not
/// positive, or the box lies entirely outside the non-negative quadrant.
pub fn state_to_bbox(mean: &StateVec) -> Option<BBox> {
    let (s, r) = (mean[2], mean[3]);
    if !(s > 0.0 && r > 0.0) {
        return None;
    }
    let w = (s * r).sqrt();
    let h = s / w;
    BBox::from_center(mean[0], mean[1], w, h)
}

/// Fixed matrices of the filter, scaled by the configured noise levels.
#[derive(Debug, Clone)]
pub struct KalmanModel {
    transition: StateCov,
    observation: MeasMap,
    process_noise: StateCov,
    measurement_noise: MeasCov,
    initial_covariance: StateCov,
}

impl KalmanModel {
    /// `process_scale` multiplies Q and `measurement_scale` multiplies R.
    pub fn new(process_scale: f64, measurement_scale: f64) -> Self {
        let mut transition = StateCov::identity();
        for i in 0..3 {
            transition[(i, i + 4)] = 1.0;
        }
        let mut observation = MeasMap::zeros();
        for i in 0..4 {
            observation[(i, i)] = 1.0;
        }
        let measurement_noise =
            MeasCov::from_diagonal(&SVector::<f64, 4>::new(1.0, 1.0, 10.0, 10.0))
                * measurement_scale;
        let process_noise = StateCov::from_diagonal(&StateVec::from_column_slice(&[
            1.0, 1.0, 1.0, 1.0, 0.01, 0.01, 0.0001,
        ])) * process_scale;
        // unobserved velocities start with high uncertainty
        let initial_covariance = StateCov::from_diagonal(&StateVec::from_column_slice(&[
            10.0, 10.0, 10.0, 10.0, 10_000.0, 10_000.0, 10_000.0,
        ]));
        Self {
            transition,
            observation,
            process_noise,
            measurement_noise,
            initial_covariance,
        }
    }

    pub fn initiate(&self, b: &BBox) -> KalmanState {
        let z = bbox_to_measurement(b);
        let mut mean = StateVec::zeros();
        mean.fixed_rows_mut::<4>(0).copy_from(&z);
        KalmanState {
            mean,
            covariance: self.initial_covariance,
        }
    }

    /// One constant-velocity step. Returns `true` if the predicted area had
    /// to be clamped to stay positive.
    pub fn predict(&self, state: &mut KalmanState) -> bool {
        let f = &self.transition;
        state.mean = f * state.mean;
        state.covariance = f * state.covariance * f.transpose() + self.process_noise;
        symmetrize(&mut state.covariance);
        clamp_positive(&mut state.mean)
    }

    /// Measurement update in Joseph form. Returns `true` if the posterior
    /// area or aspect ratio had to be clamped.
    pub fn update(&self, state: &mut KalmanState, b: &BBox) -> Result<bool> {
        let h = &self.observation;
        let z = bbox_to_measurement(b);
        let innovation = z - h * state.mean;
        let s = h * state.covariance * h.transpose() + self.measurement_noise;
        let s_inv = s
            .cholesky()
            .ok_or_else(|| Error::Numerical("singular innovation covariance".into()))?
            .inverse();
        let gain = state.covariance * h.transpose() * s_inv;
        let mean = state.mean + gain * innovation;
        let i_kh = StateCov::identity() - gain * h;
        let mut cov = i_kh * state.covariance * i_kh.transpose()
            + gain * self.measurement_noise * gain.transpose();
        symmetrize(&mut cov);
        if mean.iter().any(|v| !v.is_finite()) || cov.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite Kalman posterior".into()));
        }
        state.mean = mean;
        state.covariance = cov;
        Ok(clamp_positive(&mut state.mean))
    }
}

fn symmetrize(p: &mut StateCov) {
    *p = (*p + p.transpose()) * 0.5;
}

fn clamp_positive(mean: &mut StateVec) -> bool {
    let mut clamped = false;
    if !(mean[2] > 0.0) {
        mean[2] = MIN_POSITIVE;
        mean[6] = 0.0;
        clamped = true;
    }
    if !(mean[3] > 0.0) {
        mean[3] = MIN_POSITIVE;
        clamped = true;
    }
    clamped
}

/// Largest absolute entry of `P - P^T`.
pub fn asymmetry(p: &StateCov) -> f64 {
    (p - p.transpose()).abs().max()
}

/// True if `p` is symmetric within [`SYMMETRY_TOLERANCE`] and has no
/// eigenvalue below `-1e-9 * max(1, |P|)`.
pub fn is_symmetric_psd(p: &StateCov) -> bool {
    if asymmetry(p) > SYMMETRY_TOLERANCE {
        return false;
    }
    let scale = p.abs().max().max(1.0);
    p.symmetric_eigenvalues().min() >= -1e-9 * scale
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> KalmanModel {
        KalmanModel::new(1.0, 1.0)
    }

    fn bx(cx: f64, cy: f64, w: f64, h: f64) -> BBox {
        BBox::from_center(cx, cy, w, h).unwrap()
    }

    #[test]
    fn bbox_measurement_round_trip() {
        let b = BBox::new(10.0, 20.0, 70.0, 60.0).unwrap();
        let z = bbox_to_measurement(&b);
        let mut m = StateVec::zeros();
        m.fixed_rows_mut::<4>(0).copy_from(&z);
        let back = state_to_bbox(&m).unwrap();
        for (a, e) in back.as_array().iter().zip(b.as_array()) {
            assert!((a - e).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_velocity_predict_keeps_box_grows_covariance() {
        let km = model();
        let b = bx(100.0, 100.0, 40.0, 50.0);
        let mut st = km.initiate(&b);
        let trace0 = st.covariance.trace();
        let clamped = km.predict(&mut st);
        assert!(!clamped);
        let pb = state_to_bbox(&st.mean).unwrap();
        for (a, e) in pb.as_array().iter().zip(b.as_array()) {
            assert!((a - e).abs() < 1e-9);
        }
        assert!(st.covariance.trace() > trace0);
    }

    #[test]
    fn velocity_advances_center() {
        let km = model();
        let mut st = km.initiate(&bx(100.0, 100.0, 40.0, 40.0));
        st.mean[4] = 2.0;
        km.predict(&mut st);
        assert!((st.mean[0] - 102.0).abs() < 1e-12);
        assert_eq!(st.mean[1], 100.0);
    }

    #[test]
    fn ten_step_prediction_is_straight_line() {
        let km = model();
        let mut st = km.initiate(&bx(200.0, 150.0, 40.0, 40.0));
        st.mean[4] = 1.5;
        st.mean[5] = -0.75;
        st.mean[6] = 3.0;
        let start = st.mean;
        for k in 1..=10 {
            km.predict(&mut st);
            let kf = k as f64;
            assert!((st.mean[0] - (start[0] + kf * 1.5)).abs() < 1e-9);
            assert!((st.mean[1] - (start[1] - kf * 0.75)).abs() < 1e-9);
            assert!((st.mean[2] - (start[2] + kf * 3.0)).abs() < 1e-9);
            assert_eq!(st.mean[3], start[3]);
        }
    }

    #[test]
    fn update_at_prediction_keeps_mean_shrinks_covariance() {
        let km = model();
        let b = bx(100.0, 100.0, 40.0, 50.0);
        let mut st = km.initiate(&b);
        km.predict(&mut st);
        let mean0 = st.mean;
        let trace0 = st.covariance.trace();
        let predicted = state_to_bbox(&st.mean).unwrap();
        km.update(&mut st, &predicted).unwrap();
        assert!((st.mean - mean0).abs().max() < 1e-9);
        assert!(st.covariance.trace() < trace0);
        assert!(is_symmetric_psd(&st.covariance));
    }

    #[test]
    fn repeated_measurement_converges() {
        let km = model();
        let mut st = km.initiate(&bx(100.0, 100.0, 40.0, 40.0));
        let target = bx(130.0, 90.0, 50.0, 44.0);
        let z = bbox_to_measurement(&target);
        // fixed point of predict+update with a constant measurement is z with zero velocity
        // the area component has tiny process noise against large measurement
        // noise, so it converges slowly
        let mut err = f64::INFINITY;
        let mut iters = 0;
        while err > 1e-7 && iters < 50_000 {
            km.predict(&mut st);
            km.update(&mut st, &target).unwrap();
            err = (st.mean.fixed_rows::<4>(0) - z).abs().max();
            iters += 1;
        }
        assert!(is_symmetric_psd(&st.covariance));
        assert!(err < 1e-6, "{err} after {iters}");
        assert!(st.mean.fixed_rows::<3>(4).abs().max() < 1e-6);
    }

    #[test]
    fn negative_area_is_clamped() {
        let km = model();
        let mut st = km.initiate(&bx(100.0, 100.0, 4.0, 4.0));
        st.mean[6] = -100.0;
        assert!(km.predict(&mut st));
        assert!(st.mean[2] > 0.0);
        assert_eq!(st.mean[6], 0.0);
    }
}
