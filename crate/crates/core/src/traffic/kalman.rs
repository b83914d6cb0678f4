use nalgebra::{Cholesky, SMatrix, SVector};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KalmanError {
    #[error("state or covariance became non-finite")]
    NonFiniteState,
    #[error("innovation covariance is not positive definite")]
    SingularInnovation,
}

/// Linear Kalman filter with `S` states and `M` measured quantities.
/// Covariance updates use the Joseph form and are re-symmetrized after
/// every step.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearKalman<const S: usize, const M: usize> {
    pub x: SVector<f64, S>,
    pub p: SMatrix<f64, S, S>,
    pub f: SMatrix<f64, S, S>,
    pub q: SMatrix<f64, S, S>,
    pub h: SMatrix<f64, M, S>,
    pub r: SMatrix<f64, M, M>,
}

impl<const S: usize, const M: usize> LinearKalman<S, M> {
    pub fn predict(&mut self) -> Result<(), KalmanError> {
        self.x = self.f * self.x;
        self.p = self.f * self.p * self.f.transpose() + self.q;
        self.finish()
    }

    pub fn update(&mut self, z: &SVector<f64, M>) -> Result<(), KalmanError> {
        let innovation = z - self.h * self.x;
        let s = self.h * self.p * self.h.transpose() + self.r;
        let chol = Cholesky::new(s).ok_or(KalmanError::SingularInnovation)?;
        // K = P Hᵀ S⁻¹ = (S⁻¹ H P)ᵀ since P and S are symmetric
        let k: SMatrix<f64, S, M> = chol.solve(&(self.h * self.p)).transpose();
        self.x += k * innovation;
        let i_kh = SMatrix::<f64, S, S>::identity() - k * self.h;
        self.p = i_kh * self.p * i_kh.transpose() + k * self.r * k.transpose();
        self.finish()
    }

    fn finish(&mut self) -> Result<(), KalmanError> {
        self.p = (self.p + self.p.transpose()) * 0.5;
        if self.x.iter().chain(self.p.iter()).all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(KalmanError::NonFiniteState)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxKalmanParams {
    /// Diagonal of R over `(cx, cy, area, aspect)`.
    pub measurement_noise: [f64; 4],
    /// Diagonal of Q over the seven states.
    pub process_noise: [f64; 7],
    /// Diagonal of the covariance a new track starts with.
    pub initial_covariance: [f64; 7],
}

impl Default for BoxKalmanParams {
    fn default() -> Self {
        Self {
            measurement_noise: [1.0, 1.0, 10.0, 10.0],
            process_noise: [1.0, 1.0, 1.0, 1.0, 0.01, 0.01, 1e-4],
            initial_covariance: [10.0, 10.0, 10.0, 10.0, 1e4, 1e4, 1e4],
        }
    }
}

/// Constant-velocity box filter over `(cx, cy, area, aspect, vcx, vcy,
/// varea)`; aspect is assumed constant.
pub type BoxKalman = LinearKalman<7, 4>;

pub fn box_kalman(measurement: [f64; 4], params: &BoxKalmanParams) -> BoxKalman {
    let mut f = SMatrix::<f64, 7, 7>::identity();
    f[(0, 4)] = 1.0;
    f[(1, 5)] = 1.0;
    f[(2, 6)] = 1.0;
    let mut h = SMatrix::<f64, 4, 7>::zeros();
    for i in 0..4 {
        h[(i, i)] = 1.0;
    }
    let mut x = SVector::<f64, 7>::zeros();
    x.fixed_rows_mut::<4>(0).copy_from_slice(&measurement);
    LinearKalman {
        x,
        p: SMatrix::from_diagonal(&SVector::from(params.initial_covariance)),
        f,
        q: SMatrix::from_diagonal(&SVector::from(params.process_noise)),
        h,
        r: SMatrix::from_diagonal(&SVector::from(params.measurement_noise)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn assert_symmetric_psd<const S: usize>(p: &SMatrix<f64, S, S>) {
        assert_eq!(*p, p.transpose());
        let eig = SymmetricEigen::new(nalgebra::DMatrix::from_column_slice(S, S, p.as_slice()));
        assert!(
            eig.eigenvalues.iter().all(|&l| l >= -1e-9),
            "{:?}",
            eig.eigenvalues
        );
    }

    #[test]
    fn scalar_two_step_by_hand() {
        // random walk: F=1, Q=1, H=1, R=2, x0=0, P0=1; measurements 1 then 2
        let mut kf = LinearKalman::<1, 1> {
            x: SVector::from([0.0]),
            p: SMatrix::from([[1.0]]),
            f: SMatrix::from([[1.0]]),
            q: SMatrix::from([[1.0]]),
            h: SMatrix::from([[1.0]]),
            r: SMatrix::from([[2.0]]),
        };
        // step 1: P⁻=2, K=2/4=1/2, x=1/2, P=1
        kf.predict().unwrap();
        kf.update(&SVector::from([1.0])).unwrap();
        assert!((kf.x[0] - 0.5).abs() <= 1e-12);
        assert!((kf.p[(0, 0)] - 1.0).abs() <= 1e-12);
        // step 2: P⁻=2, K=1/2, x=1/2+(2-1/2)/2=5/4, P=1
        kf.predict().unwrap();
        kf.update(&SVector::from([2.0])).unwrap();
        assert!((kf.x[0] - 1.25).abs() <= 1e-12);
        assert!((kf.p[(0, 0)] - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn scalar_constant_velocity_by_hand() {
        // position/velocity, Q=0, measure position with R=1
        let mut kf = LinearKalman::<2, 1> {
            x: SVector::from([0.0, 0.0]),
            p: SMatrix::from_diagonal(&SVector::from([1.0, 1.0])),
            f: SMatrix::from([[1.0, 0.0], [1.0, 1.0]]), // column-major: [[1,1],[0,1]]
            q: SMatrix::zeros(),
            h: SMatrix::from([[1.0], [0.0]]),
            r: SMatrix::from([[1.0]]),
        };
        // P⁻ = [[2,1],[1,1]], S=3, K=[2/3,1/3]; z=1 → x=[2/3,1/3]
        // P = [[2/3,1/3],[1/3,2/3]]
        kf.predict().unwrap();
        kf.update(&SVector::from([1.0])).unwrap();
        assert!((kf.x[0] - 2.0 / 3.0).abs() <= 1e-12);
        assert!((kf.x[1] - 1.0 / 3.0).abs() <= 1e-12);
        // P⁻ = [[2,1],[1,2/3]], S=3, K=[2/3,1/3]; predicted pos 1, z=2
        // x = [5/3, 2/3], P = [[2/3,1/3],[1/3,1/3]]
        kf.predict().unwrap();
        kf.update(&SVector::from([2.0])).unwrap();
        assert!((kf.x[0] - 5.0 / 3.0).abs() <= 1e-12);
        assert!((kf.x[1] - 2.0 / 3.0).abs() <= 1e-12);
        assert!((kf.p[(0, 0)] - 2.0 / 3.0).abs() <= 1e-12);
        assert!((kf.p[(0, 1)] - 1.0 / 3.0).abs() <= 1e-12);
        assert!((kf.p[(1, 1)] - 1.0 / 3.0).abs() <= 1e-12);
    }

    #[test]
    fn zero_velocity_zero_noise_predict_is_identity() {
        let params = BoxKalmanParams {
            process_noise: [0.0; 7],
            ..Default::default()
        };
        let mut kf = box_kalman([40.0, 30.0, 200.0, 2.0], &params);
        let before = kf.x;
        kf.predict().unwrap();
        assert_eq!(kf.x, before);
    }

    #[test]
    fn zero_innovation_keeps_the_mean() {
        let mut kf = box_kalman([40.0, 30.0, 200.0, 2.0], &BoxKalmanParams::default());
        kf.x[4] = 3.0;
        kf.predict().unwrap();
        let before = kf.x;
        let z = kf.h * kf.x;
        kf.update(&z).unwrap();
        for (a, b) in kf.x.iter().zip(before.iter()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn covariance_stays_symmetric_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut kf = box_kalman([100.0, 50.0, 400.0, 1.5], &BoxKalmanParams::default());
        for _ in 0..1000 {
            kf.predict().unwrap();
            assert_symmetric_psd(&kf.p);
            if rng.random_bool(0.8) {
                let z = SVector::from([
                    kf.x[0] + rng.random_range(-5.0..5.0),
                    kf.x[1] + rng.random_range(-5.0..5.0),
                    (kf.x[2] + rng.random_range(-50.0..50.0)).max(1.0),
                    1.5 + rng.random_range(-0.2..0.2),
                ]);
                kf.update(&z).unwrap();
                assert_symmetric_psd(&kf.p);
            }
        }
    }

    #[test]
    fn non_finite_is_reported() {
        let mut kf = box_kalman([1.0, 1.0, 1.0, 1.0], &BoxKalmanParams::default());
        assert_eq!(
            kf.update(&SVector::from([f64::NAN, 0.0, 0.0, 0.0])),
            Err(KalmanError::NonFiniteState)
        );
    }
}
