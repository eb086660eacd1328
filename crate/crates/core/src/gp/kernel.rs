//! Matérn ν=3/2 covariance and its hyperparameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Isotropic or per-dimension (ARD) length-scale, in unit-cube units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthScale {
    Isotropic(f64),
    Ard(Vec<f64>),
}

impl LengthScale {
    pub fn len(&self) -> usize {
        match self {
            LengthScale::Isotropic(_) => 1,
            LengthScale::Ard(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_ard(&self) -> bool {
        matches!(self, LengthScale::Ard(_))
    }

    pub fn values(&self) -> &[f64] {
        match self {
            LengthScale::Isotropic(l) => std::slice::from_ref(l),
            LengthScale::Ard(v) => v,
        }
    }
}

/// GP hyperparameters: noise variance, kernel amplitude (so that
/// `k(x, x) = amplitude`), length-scale(s) and constant prior mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaternHyperparams {
    pub noise_var: f64,
    pub amplitude: f64,
    pub length_scale: LengthScale,
    pub mean: f64,
}

impl MaternHyperparams {
    /// Builds a validated isotropic parameter set.
    ///
    /// `noise_var` may be zero (noiseless interpolation); every other scale
    /// must be strictly positive.
    pub fn isotropic(noise_var: f64, amplitude: f64, length_scale: f64, mean: f64) -> Result<Self> {
        let h = MaternHyperparams {
            noise_var,
            amplitude,
            length_scale: LengthScale::Isotropic(length_scale),
            mean,
        };
        h.validate(None)?;
        Ok(h)
    }

    pub fn ard(noise_var: f64, amplitude: f64, length_scales: Vec<f64>, mean: f64) -> Result<Self> {
        let h = MaternHyperparams {
            noise_var,
            amplitude,
            length_scale: LengthScale::Ard(length_scales),
            mean,
        };
        h.validate(None)?;
        Ok(h)
    }

    pub fn validate(&self, dims: Option<usize>) -> Result<()> {
        if !(self.noise_var >= 0.0 && self.noise_var.is_finite()) {
            return Err(Error::arg(format!("noise variance {} must be >= 0", self.noise_var)));
        }
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(Error::arg(format!("amplitude {} must be > 0", self.amplitude)));
        }
        if !self.mean.is_finite() {
            return Err(Error::arg("prior mean must be finite"));
        }
        let ls = self.length_scale.values();
        if ls.is_empty() || ls.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::arg(format!("length-scales {ls:?} must be > 0")));
        }
        if let (Some(d), LengthScale::Ard(v)) = (dims, &self.length_scale) {
            if v.len() != d {
                return Err(Error::arg(format!(
                    "ARD length-scale has {} entries for {d} dimensions",
                    v.len()
                )));
            }
        }
        Ok(())
    }

    /// Number of entries in the log-parameter vector.
    pub fn param_count(&self) -> usize {
        3 + self.length_scale.len()
    }

    /// `[ln σn², ln σ0, ln ℓ.., μ0]`.
    pub fn to_log_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.param_count());
        v.push(self.noise_var.ln());
        v.push(self.amplitude.ln());
        v.extend(self.length_scale.values().iter().map(|l| l.ln()));
        v.push(self.mean);
        v
    }

    /// Inverse of [`to_log_vector`](Self::to_log_vector); `ard` selects the
    /// length-scale layout.
    pub fn from_log_vector(v: &[f64], ard: bool) -> Result<Self> {
        if v.len() < 4 || (!ard && v.len() != 4) {
            return Err(Error::arg(format!("log-parameter vector of length {}", v.len())));
        }
        let ls: Vec<f64> = v[2..v.len() - 1].iter().map(|x| x.exp()).collect();
        let h = MaternHyperparams {
            noise_var: v[0].exp(),
            amplitude: v[1].exp(),
            length_scale: if ard {
                LengthScale::Ard(ls)
            } else {
                LengthScale::Isotropic(ls[0])
            },
            mean: v[v.len() - 1],
        };
        h.validate(None)?;
        Ok(h)
    }

    /// Names matching the log-parameter layout, for history headers.
    pub fn param_names(&self) -> Vec<String> {
        Self::param_names_for(self.length_scale.len(), self.length_scale.is_ard())
    }

    /// Parameter names for `dims` inputs without building a parameter set.
    pub fn param_names_for(dims: usize, ard: bool) -> Vec<String> {
        let mut names = vec!["log_noise_var".to_string(), "log_amplitude".to_string()];
        if ard {
            names.extend((0..dims).map(|i| format!("log_length_scale_{}", i + 1)));
        } else {
            names.push("log_length_scale".into());
        }
        names.push("mean".into());
        names
    }
}

/// `√3 r / ℓ` with ARD scaling applied per coordinate.
#[inline]
pub(crate) fn scaled_distance(a: &[f64], b: &[f64], ls: &LengthScale) -> f64 {
    match ls {
        LengthScale::Isotropic(l) => {
            let r2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            SQRT3 * r2.sqrt() / l
        }
        LengthScale::Ard(v) => {
            let r2: f64 = a
                .iter()
                .zip(b)
                .zip(v)
                .map(|((x, y), l)| {
                    let u = (x - y) / l;
                    u * u
                })
                .sum();
            SQRT3 * r2.sqrt()
        }
    }
}

#[inline]
pub(crate) fn matern_from_scaled(amplitude: f64, s: f64) -> f64 {
    amplitude * (1.0 + s) * (-s).exp()
}

/// `σ0 (1 + √3 r/ℓ) exp(−√3 r/ℓ)`.
pub fn kernel(xi: &[f64], xj: &[f64], hyper: &MaternHyperparams) -> Result<f64> {
    if xi.len() != xj.len() {
        return Err(Error::arg(format!(
            "kernel arguments have {} and {} coordinates",
            xi.len(),
            xj.len()
        )));
    }
    if let LengthScale::Ard(v) = &hyper.length_scale {
        if v.len() != xi.len() {
            return Err(Error::arg("ARD length-scale dimension mismatch"));
        }
    }
    Ok(matern_from_scaled(
        hyper.amplitude,
        scaled_distance(xi, xj, &hyper.length_scale),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_distance_gives_amplitude() {
        let h = MaternHyperparams::isotropic(0.1, 2.0, 0.7, 0.0).unwrap();
        assert_eq!(kernel(&[0.3, 0.4], &[0.3, 0.4], &h).unwrap(), 2.0);
    }

    #[test]
    fn known_value_at_unit_scaled_distance() {
        let h = MaternHyperparams::isotropic(0.0, 1.0, 1.0, 0.0).unwrap();
        let r = 1.0 / 3f64.sqrt();
        let k = kernel(&[0.0], &[r], &h).unwrap();
        assert!((k - 2.0 * (-1.0f64).exp()).abs() < 1e-12);
        assert!((k - 0.73576).abs() < 1e-5);
    }

    #[test]
    fn ard_with_equal_scales_matches_isotropic() {
        let iso = MaternHyperparams::isotropic(0.0, 1.3, 0.4, 0.0).unwrap();
        let ard = MaternHyperparams::ard(0.0, 1.3, vec![0.4; 3], 0.0).unwrap();
        let (a, b) = ([0.1, 0.5, 0.9], [0.7, 0.2, 0.35]);
        let ki = kernel(&a, &b, &iso).unwrap();
        let ka = kernel(&a, &b, &ard).unwrap();
        assert!((ki - ka).abs() < 1e-14);
    }

    #[test]
    fn symmetric_and_bounded() {
        use rand::Rng;
        let mut rng = crate::rng::stream(11, &[]);
        let h = MaternHyperparams::ard(0.0, 1.7, vec![0.2, 0.9], 0.0).unwrap();
        for _ in 0..100 {
            let a: Vec<f64> = (0..2).map(|_| rng.random()).collect();
            let b: Vec<f64> = (0..2).map(|_| rng.random()).collect();
            let kab = kernel(&a, &b, &h).unwrap();
            assert_eq!(kab, kernel(&b, &a, &h).unwrap());
            assert!(kab > 0.0 && kab <= 1.7);
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let h = MaternHyperparams::isotropic(0.0, 1.0, 1.0, 0.0).unwrap();
        assert!(kernel(&[0.0, 1.0], &[0.0], &h).is_err());
    }

    #[test]
    fn log_vector_round_trip() {
        let h = MaternHyperparams::ard(0.25, 3.0, vec![0.1, 2.0], -4.0).unwrap();
        let v = h.to_log_vector();
        assert_eq!(v.len(), 5);
        let back = MaternHyperparams::from_log_vector(&v, true).unwrap();
        assert!((back.noise_var - 0.25).abs() < 1e-15);
        assert_eq!(back.mean, -4.0);
        assert_eq!(h.param_names().len(), 5);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(MaternHyperparams::isotropic(-1.0, 1.0, 1.0, 0.0).is_err());
        assert!(MaternHyperparams::isotropic(0.1, 0.0, 1.0, 0.0).is_err());
        assert!(MaternHyperparams::isotropic(0.1, 1.0, -2.0, 0.0).is_err());
        let h = MaternHyperparams::ard(0.1, 1.0, vec![1.0, 1.0], 0.0).unwrap();
        assert!(h.validate(Some(3)).is_err());
    }
}
