//! Synthetic functional linear models in coordinate form: slope functions
//! with a prescribed source condition and seeded samplers for `(x_t, y_t)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, CompensatedSum};
use crate::spectral::SpectralModel;

/// Which source condition a slope is built to satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlopeTarget {
    /// `L_C^{1/2} beta = (L_C^{1/2} L_K L_C^{1/2})^r g`.
    Prediction,
    /// `beta = L_K^{1/2} (L_K^{1/2} L_C L_K^{1/2})^r g`.
    Estimation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlopeTag {
    Built {
        target: SlopeTarget,
        r: f64,
        source: Vec<f64>,
    },
    Explicit,
}

/// Realized norms of a built slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeNorms {
    /// `||g||_2` of the source element, when the slope was built from one.
    pub source_l2: Option<f64>,
    pub beta_l2: f64,
    /// `||beta||_K`, finite whenever every kernel eigenvalue is positive.
    pub beta_rkhs: f64,
}

/// True slope `beta*` in the shared basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeCoefficients {
    pub coeffs: Vec<f64>,
    pub tag: SlopeTag,
    pub norms: SlopeNorms,
}

impl SlopeCoefficients {
    pub fn explicit(model: &SpectralModel, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != model.dim() {
            return Err(Error::Validation(format!(
                "slope has {} coefficients, model has {}",
                coeffs.len(),
                model.dim()
            )));
        }
        let norms = norms_of(model, &coeffs, None);
        Ok(Self {
            coeffs,
            tag: SlopeTag::Explicit,
            norms,
        })
    }

    /// `c * beta*`, keeping the tag's source scaled accordingly.
    pub fn scaled(&self, model: &SpectralModel, c: f64) -> Self {
        let coeffs: Vec<f64> = self.coeffs.iter().map(|b| c * b).collect();
        let tag = match &self.tag {
            SlopeTag::Built { target, r, source } => SlopeTag::Built {
                target: *target,
                r: *r,
                source: source.iter().map(|g| c * g).collect(),
            },
            SlopeTag::Explicit => SlopeTag::Explicit,
        };
        let source = match &tag {
            SlopeTag::Built { source, .. } => Some(source.as_slice()),
            SlopeTag::Explicit => None,
        };
        let norms = norms_of(model, &coeffs, source);
        Self { coeffs, tag, norms }
    }

    pub fn r(&self) -> Option<f64> {
        match self.tag {
            SlopeTag::Built { r, .. } => Some(r),
            SlopeTag::Explicit => None,
        }
    }
}

fn norms_of(model: &SpectralModel, beta: &[f64], source: Option<&[f64]>) -> SlopeNorms {
    SlopeNorms {
        source_l2: source.map(|g| compensated_sum(g.iter().map(|v| v * v)).sqrt()),
        beta_l2: compensated_sum(beta.iter().map(|v| v * v)).sqrt(),
        beta_rkhs: compensated_sum(
            beta.iter()
                .zip(model.kernel_eigs())
                .map(|(b, k)| b * b / k),
        )
        .sqrt(),
    }
}

/// Default square-summable source element `g_i = 1 / i`.
pub fn default_source(m: usize) -> Vec<f64> {
    (1..=m).map(|i| 1.0 / i as f64).collect()
}

/// Build `beta*` satisfying the requested source condition with exponent `r`.
///
/// Coordinatewise, with `mu_i = lambda_{K,i} lambda_{C,i}`:
/// prediction slopes are `lambda_{C,i}^{-1/2} mu_i^r g_i`, estimation slopes
/// are `lambda_{K,i}^{1/2} mu_i^r g_i`.
pub fn build_slope(
    model: &SpectralModel,
    r: f64,
    target: SlopeTarget,
    source: Option<&[f64]>,
) -> Result<SlopeCoefficients> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::domain("r", r, "> 0"));
    }
    let m = model.dim();
    let source: Vec<f64> = match source {
        Some(g) => {
            if g.len() != m {
                return Err(Error::Validation(format!(
                    "source has {} coefficients, model has {m}",
                    g.len()
                )));
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation("source coefficients must be finite".into()));
            }
            g.to_vec()
        }
        None => default_source(m),
    };
    let kernel = model.kernel_eigs();
    let cov = model.covariance_eigs();
    let mut coeffs = Vec::with_capacity(m);
    for i in 0..m {
        let mu = kernel[i] * cov[i];
        let b = match target {
            SlopeTarget::Prediction => {
                if cov[i] == 0.0 && source[i] != 0.0 {
                    return Err(Error::IllPosed(format!(
                        "covariance eigenvalue {i} vanishes with a nonzero source coefficient"
                    )));
                }
                mu.powf(r) * source[i] / cov[i].sqrt()
            }
            SlopeTarget::Estimation => kernel[i].sqrt() * mu.powf(r) * source[i],
        };
        if !b.is_finite() {
            return Err(Error::IllPosed(format!("slope coefficient {i} is not finite")));
        }
        coeffs.push(b);
    }
    let norms = norms_of(model, &coeffs, Some(&source));
    Ok(SlopeCoefficients {
        coeffs,
        tag: SlopeTag::Built { target, r, source },
        norms,
    })
}

/// Law of the standardized Karhunen-Loeve coordinates of `X`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientLaw {
    Gaussian,
    Rademacher,
}

/// How covariates and noise are generated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessSpec {
    pub law: CoefficientLaw,
    /// Rescale every draw onto the unit sphere of `L^2`.
    pub normalize: bool,
    /// Noise standard deviation.
    pub sigma: f64,
    pub seed: u64,
}

impl ProcessSpec {
    pub fn gaussian(sigma: f64, seed: u64) -> Self {
        Self {
            law: CoefficientLaw::Gaussian,
            normalize: false,
            sigma,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::domain("sigma", self.sigma, ">= 0"));
        }
        Ok(())
    }

    /// Whether the fourth moments close in the Gaussian (Isserlis) form.
    pub fn is_unnormalized_gaussian(&self) -> bool {
        self.law == CoefficientLaw::Gaussian && !self.normalize
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 256-bit ChaCha key for replication `replication` of a run seeded with `seed`.
pub fn stream_key(seed: u64, replication: u64) -> [u8; 32] {
    let mut state = splitmix64(seed) ^ splitmix64(replication.wrapping_add(0xA076_1D64_78BD_642F));
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    key
}

/// Seeded sampler of `(x, y)` pairs for one replication.
///
/// Draw `n` of replication `k` uses its own ChaCha stream, so any draw can be
/// regenerated from `(seed, k, n)` alone and replications never share state.
#[derive(Debug, Clone)]
pub struct Sampler {
    sqrt_cov: Vec<f64>,
    slope: Vec<f64>,
    spec: ProcessSpec,
    key: [u8; 32],
    next_draw: u64,
}

impl Sampler {
    pub fn new(
        model: &SpectralModel,
        slope: &SlopeCoefficients,
        spec: ProcessSpec,
        replication: u64,
    ) -> Result<Self> {
        spec.validate()?;
        if slope.coeffs.len() != model.dim() {
            return Err(Error::Validation(format!(
                "slope has {} coefficients, model has {}",
                slope.coeffs.len(),
                model.dim()
            )));
        }
        Ok(Self {
            sqrt_cov: model.covariance_eigs().iter().map(|c| c.sqrt()).collect(),
            slope: slope.coeffs.clone(),
            spec,
            key: stream_key(spec.seed, replication),
            next_draw: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.sqrt_cov.len()
    }

    /// Index of the next draw returned by [`Sampler::next_into`].
    pub fn position(&self) -> u64 {
        self.next_draw
    }

    /// Write draw number `index` into `x` and return the response.
    pub fn sample_at(&self, index: u64, x: &mut [f64]) -> f64 {
        debug_assert_eq!(x.len(), self.sqrt_cov.len());
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(index);
        match self.spec.law {
            CoefficientLaw::Gaussian => {
                for (xi, sc) in x.iter_mut().zip(&self.sqrt_cov) {
                    let z: f64 = rng.sample(StandardNormal);
                    *xi = z * sc;
                }
            }
            CoefficientLaw::Rademacher => {
                for (xi, sc) in x.iter_mut().zip(&self.sqrt_cov) {
                    *xi = if rng.random::<bool>() { *sc } else { -*sc };
                }
            }
        }
        if self.spec.normalize {
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                x.iter_mut().for_each(|v| *v /= norm);
            }
        }
        let noise: f64 = if self.spec.sigma > 0.0 {
            let z: f64 = rng.sample(StandardNormal);
            self.spec.sigma * z
        } else {
            0.0
        };
        dot(&self.slope, x) + noise
    }

    /// Next draw in sequence.
    pub fn next_into(&mut self, x: &mut [f64]) -> f64 {
        let y = self.sample_at(self.next_draw, x);
        self.next_draw += 1;
        y
    }
}

/// Compensated inner product; the sampler and the SGD residual share it so a
/// noiseless draw at the true slope has residual exactly zero.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = CompensatedSum::new();
    for (u, v) in a.iter().zip(b) {
        acc.add(u * v);
    }
    acc.value()
}

/// Draw `index` of replication `replication`.
pub fn sample_pair(
    model: &SpectralModel,
    slope: &SlopeCoefficients,
    spec: ProcessSpec,
    replication: u64,
    index: u64,
) -> Result<(Vec<f64>, f64)> {
    let sampler = Sampler::new(model, slope, spec, replication)?;
    let mut x = vec![0.0; model.dim()];
    let y = sampler.sample_at(index, &mut x);
    Ok((x, y))
}

/// Monte Carlo moment ratio `E<X,f>^4 / (E<X,f>^2)^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentRatio {
    pub second: f64,
    pub fourth: f64,
    /// `None` when the probe is orthogonal to every draw.
    pub ratio: Option<f64>,
}

/// Estimate the fourth-to-second moment ratio of `<X, probe>` from `n_draws`
/// covariate draws.
pub fn verify_moment_condition(
    model: &SpectralModel,
    spec: ProcessSpec,
    probe: &[f64],
    n_draws: u64,
) -> Result<MomentRatio> {
    if n_draws < 10_000 {
        return Err(Error::Validation(format!(
            "moment check needs at least 10^4 draws, got {n_draws}"
        )));
    }
    if probe.len() != model.dim() {
        return Err(Error::Validation(format!(
            "probe has {} coefficients, model has {}",
            probe.len(),
            model.dim()
        )));
    }
    let zero = SlopeCoefficients::explicit(model, vec![0.0; model.dim()])?;
    let spec = ProcessSpec { sigma: 0.0, ..spec };
    let sampler = Sampler::new(model, &zero, spec, 0)?;
    let mut x = vec![0.0; model.dim()];
    let mut m2 = CompensatedSum::new();
    let mut m4 = CompensatedSum::new();
    for n in 0..n_draws {
        sampler.sample_at(n, &mut x);
        let p = dot(&x, probe);
        let p2 = p * p;
        m2.add(p2);
        m4.add(p2 * p2);
    }
    let second = m2.value() / n_draws as f64;
    let fourth = m4.value() / n_draws as f64;
    let ratio = (second > 0.0).then(|| fourth / (second * second));
    Ok(MomentRatio {
        second,
        fourth,
        ratio,
    })
}

/// Empirical diagonal second moments `E[x_i^2]` over `n_draws` draws. In the
/// normalized mode these differ from the covariance eigenvalues.
pub fn empirical_second_moments(model: &SpectralModel, spec: ProcessSpec, n_draws: u64) -> Result<Vec<f64>> {
    let zero = SlopeCoefficients::explicit(model, vec![0.0; model.dim()])?;
    let sampler = Sampler::new(model, &zero, ProcessSpec { sigma: 0.0, ..spec }, 0)?;
    let mut x = vec![0.0; model.dim()];
    let mut acc = vec![CompensatedSum::new(); model.dim()];
    for n in 0..n_draws {
        sampler.sample_at(n, &mut x);
        for (a, v) in acc.iter_mut().zip(&x) {
            a.add(v * v);
        }
    }
    Ok(acc.iter().map(|a| a.value() / n_draws as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::EigenDecay;

    fn model(k: Vec<f64>, c: Vec<f64>) -> SpectralModel {
        SpectralModel::from_coordinates(k, c).unwrap()
    }

    #[test]
    fn identity_spectra_return_source() {
        let m = model(vec![1.0, 1.0], vec![1.0, 1.0]);
        let s = build_slope(&m, 1.0, SlopeTarget::Prediction, Some(&[1.0, 1.0])).unwrap();
        assert_eq!(s.coeffs, vec![1.0, 1.0]);
    }

    #[test]
    fn estimation_slope_coordinates() {
        let m = model(vec![1.0, 0.25], vec![1.0, 0.25]);
        let s = build_slope(&m, 0.5, SlopeTarget::Estimation, Some(&[1.0, 1.0])).unwrap();
        assert_eq!(s.coeffs[0], 1.0);
        assert!((s.coeffs[1] - 0.125).abs() < 1e-15);
        // ||beta||_K^2 = 1 + 0.125^2 / 0.25
        assert!((s.norms.beta_rkhs.powi(2) - (1.0 + 0.0625)).abs() < 1e-14);
    }

    #[test]
    fn prediction_slope_scalar() {
        let m = model(vec![4.0], vec![1.0]);
        let s = build_slope(&m, 1.0, SlopeTarget::Prediction, Some(&[1.0])).unwrap();
        assert_eq!(s.coeffs, vec![4.0]);
    }

    #[test]
    fn slope_errors() {
        let m = model(vec![1.0], vec![1.0]);
        assert!(matches!(
            build_slope(&m, 0.0, SlopeTarget::Prediction, None),
            Err(Error::Domain { .. })
        ));
        assert!(build_slope(&m, 1.0, SlopeTarget::Prediction, Some(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn prediction_slope_round_trips_to_source() {
        let m = SpectralModel::new(&EigenDecay::power(2.0, 1.0, 60), &EigenDecay::power(1.5, 0.8, 60)).unwrap();
        let r = 0.7;
        let s = build_slope(&m, r, SlopeTarget::Prediction, None).unwrap();
        let g = default_source(60);
        for i in 0..60 {
            let mu = m.kernel_eigs()[i] * m.covariance_eigs()[i];
            let back = s.coeffs[i] * m.covariance_eigs()[i].sqrt() / mu.powf(r);
            assert!((back - g[i]).abs() <= 1e-12 * g[i].abs());
        }
    }

    #[test]
    fn zero_slope_noiseless_response_is_zero() {
        let m = model(vec![1.0, 0.5], vec![1.0, 0.5]);
        let s = SlopeCoefficients::explicit(&m, vec![0.0, 0.0]).unwrap();
        for n in 0..20 {
            let (_, y) = sample_pair(&m, &s, ProcessSpec::gaussian(0.0, 3), 0, n).unwrap();
            assert_eq!(y, 0.0);
        }
    }

    #[test]
    fn deterministic_ratio_in_one_dimension() {
        let m = model(vec![1.0], vec![1.0]);
        let s = SlopeCoefficients::explicit(&m, vec![2.0]).unwrap();
        for n in 0..50 {
            let (x, y) = sample_pair(&m, &s, ProcessSpec::gaussian(0.0, 11), 2, n).unwrap();
            assert_eq!(y, 2.0 * x[0]);
        }
    }

    #[test]
    fn seed_determinism_is_bitwise() {
        let m = SpectralModel::new(&EigenDecay::power(2.0, 1.0, 8), &EigenDecay::power(2.0, 1.0, 8)).unwrap();
        let s = build_slope(&m, 0.5, SlopeTarget::Prediction, None).unwrap();
        let spec = ProcessSpec::gaussian(0.3, 77);
        let a = sample_pair(&m, &s, spec, 5, 123).unwrap();
        let b = sample_pair(&m, &s, spec, 5, 123).unwrap();
        assert_eq!(a.0.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.0.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert_eq!(a.1.to_bits(), b.1.to_bits());
        let mut seq = Sampler::new(&m, &s, spec, 5).unwrap();
        let mut x = vec![0.0; 8];
        for _ in 0..123 {
            seq.next_into(&mut x);
        }
        assert_eq!(seq.next_into(&mut x).to_bits(), a.1.to_bits());
        let c = sample_pair(&m, &s, spec, 6, 123).unwrap();
        assert_ne!(a.1, c.1);
    }

    #[test]
    fn normalized_draws_lie_on_unit_sphere() {
        let m = SpectralModel::new(&EigenDecay::power(2.0, 1.0, 10), &EigenDecay::power(2.0, 1.0, 10)).unwrap();
        let s = SlopeCoefficients::explicit(&m, vec![0.0; 10]).unwrap();
        let spec = ProcessSpec {
            normalize: true,
            ..ProcessSpec::gaussian(0.0, 1)
        };
        for n in 0..100 {
            let (x, _) = sample_pair(&m, &s, spec, 0, n).unwrap();
            let norm: f64 = x.iter().map(|v| v * v).sum();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rademacher_moment_ratio_is_one() {
        let m = model(vec![1.0], vec![1.0]);
        let spec = ProcessSpec {
            law: CoefficientLaw::Rademacher,
            ..ProcessSpec::gaussian(0.0, 9)
        };
        let r = verify_moment_condition(&m, spec, &[1.0], 10_000).unwrap();
        assert_eq!(r.ratio, Some(1.0));
    }

    #[test]
    fn degenerate_probe_has_no_ratio() {
        let m = model(vec![1.0, 1.0], vec![1.0, 1.0]);
        let r = verify_moment_condition(&m, ProcessSpec::gaussian(0.0, 9), &[0.0, 0.0], 10_000).unwrap();
        assert_eq!(r.ratio, None);
        assert!(verify_moment_condition(&m, ProcessSpec::gaussian(0.0, 9), &[1.0, 0.0], 100).is_err());
    }

    #[test]
    fn gaussian_moment_ratio_near_three() {
        let m = SpectralModel::new(&EigenDecay::power(2.0, 1.0, 10), &EigenDecay::power(2.0, 1.0, 10)).unwrap();
        let mut probe = vec![0.0; 10];
        probe[2] = 1.0;
        let r = verify_moment_condition(&m, ProcessSpec::gaussian(0.0, 2024), &probe, 1_000_000).unwrap();
        let ratio = r.ratio.unwrap();
        assert!((ratio - 3.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn first_coordinate_variance_matches_covariance() {
        let m = SpectralModel::new(&EigenDecay::power(2.0, 1.0, 50), &EigenDecay::power(2.0, 1.0, 50)).unwrap();
        let n = 100_000u64;
        let second = empirical_second_moments(&m, ProcessSpec::gaussian(0.0, 4), n).unwrap();
        assert!((second[0] - 1.0).abs() < 0.02, "{}", second[0]);
        // Every coordinate within five standard errors: Var(x_i^2) = 2 lambda_i^2.
        for (i, (&e, &c)) in second.iter().zip(m.covariance_eigs()).enumerate() {
            let se = (2.0 * c * c / n as f64).sqrt();
            assert!((e - c).abs() <= 5.0 * se, "coordinate {i}: {e} vs {c}");
        }
    }
}
