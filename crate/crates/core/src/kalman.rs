//! Constant-velocity Kalman filter over `(cx, cy, aspect, height)`.
//!
//! Noise standard deviations scale with the current box height, so the filter behaves
//! the same for near and far targets.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{from_xyah, to_xyah, BBox};

pub type StateVec = SVector<f64, 8>;
pub type StateCov = SMatrix<f64, 8, 8>;
type MeasVec = SVector<f64, 4>;
type MeasCov = SMatrix<f64, 4, 4>;

/// Height-proportional noise weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KalmanNoise {
    pub std_weight_position: f64,
    pub std_weight_velocity: f64,
}

impl Default for KalmanNoise {
    fn default() -> Self {
        Self {
            std_weight_position: 1.0 / 20.0,
            std_weight_velocity: 1.0 / 160.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub mean: StateVec,
    pub covariance: StateCov,
}

impl KalmanState {
    pub fn bbox(&self) -> BBox {
        from_xyah(&[self.mean[0], self.mean[1], self.mean[2], self.mean[3]])
    }

    pub fn velocity(&self) -> [f64; 4] {
        [self.mean[4], self.mean[5], self.mean[6], self.mean[7]]
    }

    /// Symmetric to `tol` and no eigenvalue below `-tol`.
    pub fn is_covariance_psd(&self, tol: f64) -> bool {
        let p = &self.covariance;
        if (p - p.transpose()).abs().max() > tol {
            return false;
        }
        let sym = (p + p.transpose()) * 0.5;
        sym.symmetric_eigenvalues().iter().all(|&e| e >= -tol)
    }
}

fn motion_matrix() -> StateCov {
    let mut f = StateCov::identity();
    for i in 0..4 {
        f[(i, i + 4)] = 1.0;
    }
    f
}

fn projection_matrix() -> SMatrix<f64, 4, 8> {
    let mut h = SMatrix::<f64, 4, 8>::zeros();
    for i in 0..4 {
        h[(i, i)] = 1.0;
    }
    h
}

impl KalmanNoise {
    pub fn initiate(&self, measurement: &BBox) -> Result<KalmanState> {
        let z = to_xyah(measurement)?;
        let mut mean = StateVec::zeros();
        for i in 0..4 {
            mean[i] = z[i];
        }
        let h = z[3];
        let (wp, wv) = (self.std_weight_position, self.std_weight_velocity);
        let std = [
            2.0 * wp * h,
            2.0 * wp * h,
            1e-2,
            2.0 * wp * h,
            10.0 * wv * h,
            10.0 * wv * h,
            1e-5,
            10.0 * wv * h,
        ];
        let covariance = StateCov::from_diagonal(&StateVec::from_iterator(std.iter().map(|s| s * s)));
        Ok(KalmanState { mean, covariance })
    }

    pub fn predict(&self, s: &KalmanState) -> KalmanState {
        let h = s.mean[3];
        let (wp, wv) = (self.std_weight_position, self.std_weight_velocity);
        let std = [wp * h, wp * h, 1e-2, wp * h, wv * h, wv * h, 1e-5, wv * h];
        let q = StateCov::from_diagonal(&StateVec::from_iterator(std.iter().map(|s| s * s)));
        let f = motion_matrix();
        let covariance = f * s.covariance * f.transpose() + q;
        KalmanState {
            mean: f * s.mean,
            covariance: symmetrize(covariance),
        }
    }

    pub fn update(&self, s: &KalmanState, z: &BBox) -> Result<KalmanState> {
        let z = to_xyah(z)?;
        let z = MeasVec::from_column_slice(&z);
        let hm = projection_matrix();
        let h = s.mean[3];
        let wp = self.std_weight_position;
        let r_std = [wp * h, wp * h, 1e-1, wp * h];
        let r = MeasCov::from_diagonal(&MeasVec::from_iterator(r_std.iter().map(|s| s * s)));

        let projected_mean = hm * s.mean;
        let projected_cov = hm * s.covariance * hm.transpose() + r;
        let chol = projected_cov
            .cholesky()
            .ok_or_else(|| Error::InvalidConfig("innovation covariance not positive definite".into()))?;
        // K = P H^T S^-1, computed as (S^-1 H P)^T.
        let gain = chol.solve(&(hm * s.covariance)).transpose();
        let innovation = z - projected_mean;
        let mean = s.mean + gain * innovation;
        let covariance = s.covariance - gain * projected_cov * gain.transpose();
        if !(mean[3] > 0.0) {
            return Err(Error::ZeroHeight(mean[3]));
        }
        Ok(KalmanState {
            mean,
            covariance: symmetrize(covariance),
        })
    }
}

fn symmetrize(p: StateCov) -> StateCov {
    (p + p.transpose()) * 0.5
}

pub fn kf_initiate(measurement: &BBox) -> Result<KalmanState> {
    KalmanNoise::default().initiate(measurement)
}

pub fn kf_predict(s: &KalmanState) -> KalmanState {
    KalmanNoise::default().predict(s)
}

pub fn kf_update(s: &KalmanState, z: &BBox) -> Result<KalmanState> {
    KalmanNoise::default().update(s, z)
}
