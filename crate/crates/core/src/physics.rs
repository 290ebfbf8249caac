//! Salt-ablation material balance and the cubic one-feature baseline.
//! The synthetic core-sample generator lives here as well because it is built
//! on the same material balance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Deserialize;

use crate::dataset::{CategoryLabels, CoreSample, Dataset};
use crate::error::{Error, Result};
use crate::linear::fit_plain;

/// Halite density in g/cc, an external handbook constant.
pub const HALITE_DENSITY: f64 = 2.165;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicsParams {
    /// Density of the dissolved salt, g/cc.
    pub salt_density: f64,
}

impl Default for PhysicsParams {
    fn default() -> Self {
        Self {
            salt_density: HALITE_DENSITY,
        }
    }
}

impl PhysicsParams {
    pub fn new(salt_density: f64) -> Result<Self> {
        if !(salt_density > 0.0 && salt_density.is_finite()) {
            return Err(Error::Physics(format!(
                "salt density must be positive, got {salt_density}"
            )));
        }
        Ok(Self { salt_density })
    }
}

/// Porosity (percent) once all salt has dissolved: the pore volume grows by the
/// salt volume `ρ_rock·C/ρ_salt` per unit bulk volume.
pub fn porosity_after_desalination(
    phi0_pct: f64,
    rho_rock: f64,
    c_salt: f64,
    params: &PhysicsParams,
) -> Result<f64> {
    if !(params.salt_density > 0.0) {
        return Err(Error::Physics("salt density must be positive".into()));
    }
    if !(0.0..=100.0).contains(&phi0_pct) {
        return Err(Error::Physics(format!(
            "initial porosity {phi0_pct}% outside [0, 100]"
        )));
    }
    if !(rho_rock > 0.0) {
        return Err(Error::Physics(format!(
            "rock density must be positive, got {rho_rock}"
        )));
    }
    if !(0.0..1.0).contains(&c_salt) {
        return Err(Error::Physics(format!(
            "salt concentration {c_salt} outside [0, 1)"
        )));
    }
    let phi = phi0_pct + rho_rock / params.salt_density * c_salt * 100.0;
    if phi > 100.0 {
        return Err(Error::Physics(format!(
            "porosity after desalination {phi}% exceeds 100%"
        )));
    }
    if phi < phi0_pct {
        return Err(Error::Physics(format!(
            "porosity after desalination {phi}% below the initial {phi0_pct}%"
        )));
    }
    Ok(phi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CubicTarget {
    PorosityDelta,
    PermeabilityDelta,
}

/// `Δ = c0 + c1·C + c2·C² + c3·C³`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicBaseline {
    pub coefficients: [f64; 4],
    pub target: CubicTarget,
}

impl CubicBaseline {
    pub fn eval(&self, c: f64) -> f64 {
        let [c0, c1, c2, c3] = self.coefficients;
        c0 + c * (c1 + c * (c2 + c * c3))
    }
}

/// Least-squares cubic in the salt concentration.
pub fn fit_cubic_baseline(
    c_salt: &[f64],
    delta: &[f64],
    target: CubicTarget,
) -> Result<CubicBaseline> {
    if c_salt.len() != delta.len() {
        return Err(Error::LengthMismatch {
            left: c_salt.len(),
            right: delta.len(),
        });
    }
    let mut distinct: Vec<f64> = c_salt.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 4 {
        return Err(Error::invalid(format!(
            "cubic fit needs at least 4 distinct salt concentrations, got {}",
            distinct.len()
        )));
    }
    let design =
        ndarray::Array2::from_shape_fn((c_salt.len(), 3), |(i, j)| c_salt[i].powi(j as i32 + 1));
    let model = fit_plain(design.view(), ndarray::ArrayView1::from(delta))?;
    let w = &model.weights;
    Ok(CubicBaseline {
        coefficients: [model.intercept, w[0], w[1], w[2]],
        target,
    })
}

/// `initial + Δ(C)` elementwise.
pub fn predict_cubic(b: &CubicBaseline, c_salt: &[f64], initial: &[f64]) -> Result<Vec<f64>> {
    if c_salt.len() != initial.len() {
        return Err(Error::LengthMismatch {
            left: c_salt.len(),
            right: initial.len(),
        });
    }
    Ok(c_salt
        .iter()
        .zip(initial)
        .map(|(&c, &v0)| v0 + b.eval(c))
        .collect())
}

/// Generator settings; every field has a default, so a config file only needs
/// the keys it changes.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_samples: usize,
    /// Relative standard deviation of the multiplicative target noise.
    pub noise_rel: f64,
    pub seed: u64,
    /// Formation top depth, m.
    pub top_depth_m: [f64; 2],
    /// Formation thickness, m.
    pub thickness_m: [f64; 2],
    pub porosity_initial_pct: [f64; 2],
    pub density_gcc: [f64; 2],
    /// Grain size drawn log-uniformly, mm.
    pub grain_size_mm: [f64; 2],
    pub salt_concentration: [f64; 2],
    /// Weight in [0, 1] of grain size in the salt draw; 0 means independent.
    pub salt_grain_correlation: f64,
    /// Multiplier turning `φ³/(1−φ)²` (fractional φ) into millidarcy.
    pub permeability_scale_md: f64,
    /// Log-normal scatter of the initial permeability around the power law.
    pub permeability_log_sd: f64,
    pub max_permeability_ratio: f64,
    /// Optional upper bound on φ/φ0; samples above it are redrawn.
    pub max_porosity_ratio: Option<f64>,
    pub salt_density: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_samples: 102,
            noise_rel: 0.0,
            seed: 42,
            top_depth_m: [1600.0, 1700.0],
            thickness_m: [10.0, 40.0],
            porosity_initial_pct: [1.0, 8.0],
            density_gcc: [2.35, 2.45],
            grain_size_mm: [0.01, 0.5],
            salt_concentration: [0.04, 0.30],
            salt_grain_correlation: 0.6,
            permeability_scale_md: 1.0e4,
            permeability_log_sd: 0.3,
            max_permeability_ratio: 60.0,
            max_porosity_ratio: None,
            salt_density: HALITE_DENSITY,
        }
    }
}

const MAX_DRAWS_PER_SAMPLE: usize = 10_000;

fn check_range(name: &str, r: [f64; 2], lo: f64, hi: f64) -> Result<()> {
    if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1] && r[0] >= lo && r[1] <= hi) {
        return Err(Error::invalid(format!(
            "{name} range [{}, {}] must be ordered and within [{lo}, {hi}]",
            r[0], r[1]
        )));
    }
    Ok(())
}

impl SynthConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::invalid(format!("synthetic config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::invalid("n_samples must be positive"));
        }
        if !(self.noise_rel >= 0.0 && self.noise_rel.is_finite()) {
            return Err(Error::invalid(format!(
                "noise_rel must be a non-negative number, got {}",
                self.noise_rel
            )));
        }
        check_range("top_depth_m", self.top_depth_m, f64::MIN, f64::MAX)?;
        check_range("thickness_m", self.thickness_m, 0.0, f64::MAX)?;
        check_range(
            "porosity_initial_pct",
            self.porosity_initial_pct,
            0.0,
            100.0,
        )?;
        if self.porosity_initial_pct[1] >= 100.0 || self.porosity_initial_pct[0] <= 0.0 {
            return Err(Error::invalid(
                "porosity_initial_pct must lie strictly inside (0, 100)",
            ));
        }
        check_range("density_gcc", self.density_gcc, f64::MIN_POSITIVE, f64::MAX)?;
        check_range(
            "grain_size_mm",
            self.grain_size_mm,
            crate::dataset::GRAIN_SIZE_MIN_MM,
            crate::dataset::GRAIN_SIZE_MAX_MM,
        )?;
        check_range("salt_concentration", self.salt_concentration, 0.0, 1.0)?;
        if self.salt_concentration[1] >= 1.0 {
            return Err(Error::invalid("salt_concentration must stay below 1"));
        }
        if !(0.0..=1.0).contains(&self.salt_grain_correlation) {
            return Err(Error::invalid("salt_grain_correlation must lie in [0, 1]"));
        }
        if !(self.permeability_scale_md > 0.0) || !(self.permeability_log_sd >= 0.0) {
            return Err(Error::invalid(
                "permeability_scale_md must be positive and permeability_log_sd non-negative",
            ));
        }
        if !(self.max_permeability_ratio >= 1.0) {
            return Err(Error::invalid("max_permeability_ratio must be at least 1"));
        }
        if let Some(r) = self.max_porosity_ratio {
            if !(r >= 1.0) {
                return Err(Error::invalid("max_porosity_ratio must be at least 1"));
            }
        }
        PhysicsParams::new(self.salt_density)?;
        Ok(())
    }
}

/// `φ³/(1−φ)²` for fractional porosity.
pub fn kozeny_carman(phi_fraction: f64) -> f64 {
    phi_fraction.powi(3) / (1.0 - phi_fraction).powi(2)
}

fn uniform(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..=r[1])
    }
}

fn draw_sample(
    rng: &mut ChaCha8Rng,
    cfg: &SynthConfig,
    params: &PhysicsParams,
    labels: &CategoryLabels,
    id: String,
) -> Result<CoreSample> {
    let top = uniform(rng, cfg.top_depth_m);
    let bottom = top + uniform(rng, cfg.thickness_m);
    let depth = uniform(rng, [top, bottom]);
    let phi0 = uniform(rng, cfg.porosity_initial_pct);
    let density = uniform(rng, cfg.density_gcc);
    let [g_lo, g_hi] = cfg.grain_size_mm.map(f64::ln);
    let g_pos: f64 = rng.random();
    let grain = (g_lo + g_pos * (g_hi - g_lo))
        .exp()
        .clamp(cfg.grain_size_mm[0], cfg.grain_size_mm[1]);
    let mix = cfg.salt_grain_correlation * g_pos
        + (1.0 - cfg.salt_grain_correlation) * rng.random::<f64>();
    let [c_lo, c_hi] = cfg.salt_concentration;
    let salt = c_lo + mix * (c_hi - c_lo);
    let color = labels.colors[rng.random_range(0..labels.colors.len())].clone();
    let horizon = labels.horizons[rng.random_range(0..labels.horizons.len())].clone();

    let scatter: f64 = StandardNormal.sample(rng);
    let k0 = cfg.permeability_scale_md
        * kozeny_carman(phi0 / 100.0)
        * (cfg.permeability_log_sd * scatter).exp();
    let phi = porosity_after_desalination(phi0, density, salt, params)?;
    let ratio =
        (kozeny_carman(phi / 100.0) / kozeny_carman(phi0 / 100.0)).min(cfg.max_permeability_ratio);
    let k = k0 * ratio;

    let mut noisy = |v: f64| {
        if cfg.noise_rel == 0.0 {
            v
        } else {
            let z: f64 = StandardNormal.sample(rng);
            v * (1.0 + cfg.noise_rel * z)
        }
    };
    let (phi_obs, k_obs, c_obs) = (noisy(phi), noisy(k), noisy(salt));

    Ok(CoreSample {
        sample_id: id,
        sample_depth: depth,
        formation_top_depth: top,
        formation_bottom_depth: bottom,
        porosity_initial: phi0,
        permeability_initial: k0,
        density_initial: density,
        grain_size: grain,
        color,
        horizon,
        salt_concentration: Some(c_obs),
        porosity_after: Some(phi_obs),
        permeability_after: Some(k_obs),
    })
}

/// Draws `cfg.n_samples` samples from one seeded stream. Samples that break a
/// sample invariant (after noise) or the optional porosity-ratio bound are redrawn.
pub fn generate_synthetic(cfg: &SynthConfig, params: &PhysicsParams) -> Result<Dataset> {
    cfg.validate()?;
    let labels = CategoryLabels::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let width = cfg.n_samples.to_string().len().max(3);
    let mut samples = Vec::with_capacity(cfg.n_samples);
    for i in 0..cfg.n_samples {
        let id = format!("S{:0width$}", i + 1);
        let mut last_reason = String::new();
        let mut accepted = None;
        for _ in 0..MAX_DRAWS_PER_SAMPLE {
            let s = match draw_sample(&mut rng, cfg, params, &labels, id.clone()) {
                Ok(s) => s,
                Err(e) => {
                    last_reason = e.to_string();
                    continue;
                }
            };
            if let Err(reason) = s.validate() {
                last_reason = reason;
                continue;
            }
            if let (Some(limit), Some(phi)) = (cfg.max_porosity_ratio, s.porosity_after) {
                if phi / s.porosity_initial > limit {
                    last_reason = format!("porosity ratio above {limit}");
                    continue;
                }
            }
            accepted = Some(s);
            break;
        }
        let s = accepted.ok_or_else(|| {
            Error::invalid(format!(
                "configuration cannot produce a valid sample after {MAX_DRAWS_PER_SAMPLE} draws (last: {last_reason})"
            ))
        })?;
        samples.push(s);
    }
    Dataset::new(
        samples,
        format!(
            "synthetic(seed={}, n={}, noise={})",
            cfg.seed, cfg.n_samples, cfg.noise_rel
        ),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn material_balance_examples() {
        let p = PhysicsParams::default();
        assert_eq!(porosity_after_desalination(5.0, 2.4, 0.0, &p).unwrap(), 5.0);
        let v = porosity_after_desalination(5.0, 2.4, 0.1, &p).unwrap();
        assert!((v - (5.0 + 2.4 / 2.165 * 10.0)).abs() < 1e-12);
        assert!((v - 16.085450346420323).abs() < 1e-12);
        let unit = porosity_after_desalination(7.0, 2.165, 0.02, &p).unwrap();
        assert!((unit - 9.0).abs() < 1e-12);
        assert!(porosity_after_desalination(90.0, 3.0, 0.9, &p).is_err());
        assert!(porosity_after_desalination(5.0, 2.4, -0.1, &p).is_err());
        assert!(PhysicsParams::new(0.0).is_err());
    }

    #[test]
    fn cubic_examples() {
        let c = [0.0, 0.5, 1.0, 1.5, 2.0, 3.0];
        let cube: Vec<f64> = c.iter().map(|v: &f64| v.powi(3)).collect();
        let b = fit_cubic_baseline(&c, &cube, CubicTarget::PorosityDelta).unwrap();
        for (got, want) in b.coefficients.iter().zip([0.0, 0.0, 0.0, 1.0]) {
            assert!((got - want).abs() < 1e-8, "{:?}", b.coefficients);
        }
        let b = fit_cubic_baseline(&c, &[5.0; 6], CubicTarget::PorosityDelta).unwrap();
        for (got, want) in b.coefficients.iter().zip([5.0, 0.0, 0.0, 0.0]) {
            assert!((got - want).abs() < 1e-8);
        }
        assert!(
            fit_cubic_baseline(&[1.0, 1.0, 2.0, 3.0], &[0.0; 4], CubicTarget::PorosityDelta)
                .is_err()
        );

        let zero = CubicBaseline {
            coefficients: [0.0; 4],
            target: CubicTarget::PermeabilityDelta,
        };
        assert_eq!(
            predict_cubic(&zero, &[0.1, 0.2], &[3.0, 4.0]).unwrap(),
            vec![3.0, 4.0]
        );
        let cube = CubicBaseline {
            coefficients: [0.0, 0.0, 0.0, 1.0],
            target: CubicTarget::PermeabilityDelta,
        };
        assert_eq!(predict_cubic(&cube, &[2.0], &[1.0]).unwrap(), vec![9.0]);
        assert!(predict_cubic(&cube, &[2.0], &[]).is_err());
    }

    #[test]
    fn noise_free_generator_obeys_material_balance() {
        let cfg = SynthConfig::default();
        let p = PhysicsParams::default();
        let ds = generate_synthetic(&cfg, &p).unwrap();
        assert_eq!(ds.len(), 102);
        for s in &ds.samples {
            let c = s.salt_concentration.unwrap();
            assert!((0.04..=0.30).contains(&c));
            assert!((1.0..=8.0).contains(&s.porosity_initial));
            let phi =
                porosity_after_desalination(s.porosity_initial, s.density_initial, c, &p).unwrap();
            assert!((s.porosity_after.unwrap() - phi).abs() < 1e-12);
            let k = s.permeability_after.unwrap();
            assert!(k >= s.permeability_initial);
            assert!(k / s.permeability_initial <= 60.0 * (1.0 + 1e-12));
        }
        assert_eq!(ds, generate_synthetic(&cfg, &p).unwrap());
    }

    #[test]
    fn salt_correlates_with_grain_size() {
        let cfg = SynthConfig {
            n_samples: 500,
            ..Default::default()
        };
        let ds = generate_synthetic(&cfg, &PhysicsParams::default()).unwrap();
        let g: Vec<f64> = ds.samples.iter().map(|s| s.grain_size.ln()).collect();
        let c: Vec<f64> = ds
            .samples
            .iter()
            .map(|s| s.salt_concentration.unwrap())
            .collect();
        let (mg, mc) = (g.iter().sum::<f64>() / 500.0, c.iter().sum::<f64>() / 500.0);
        let cov: f64 = g.iter().zip(&c).map(|(a, b)| (a - mg) * (b - mc)).sum();
        assert!(cov > 0.0);
    }

    #[test]
    fn porosity_ratio_bound_is_enforced_or_reported() {
        let cfg = SynthConfig {
            n_samples: 20,
            max_porosity_ratio: Some(2.5),
            porosity_initial_pct: [6.0, 8.0],
            salt_concentration: [0.04, 0.08],
            ..Default::default()
        };
        let ds = generate_synthetic(&cfg, &PhysicsParams::default()).unwrap();
        for s in &ds.samples {
            assert!(s.porosity_after.unwrap() / s.porosity_initial <= 2.5);
        }
        let impossible = SynthConfig {
            n_samples: 1,
            max_porosity_ratio: Some(1.01),
            ..Default::default()
        };
        assert!(generate_synthetic(&impossible, &PhysicsParams::default()).is_err());
    }

    #[test]
    fn config_file_and_validation() {
        let cfg = SynthConfig::from_toml_str(
            "n_samples = 10\nnoise_rel = 0.05\ndensity_gcc = [2.3, 2.5]\n",
        )
        .unwrap();
        assert_eq!(cfg.n_samples, 10);
        assert_eq!(cfg.density_gcc, [2.3, 2.5]);
        assert_eq!(cfg.seed, 42);
        assert!(SynthConfig::from_toml_str("bogus = 1").is_err());
        let bad = SynthConfig {
            salt_concentration: [0.3, 0.1],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
