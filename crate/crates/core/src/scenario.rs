//! Subnetwork topologies, fading channels and imperfect-CSI estimates.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Reference distance of the log-distance path-loss model, meters.
pub const REFERENCE_DISTANCE_M: f64 = 1.0;

/// Distances below this are clamped before evaluating path loss, meters.
pub const MIN_DISTANCE_M: f64 = 0.1;

/// Channel-state knowledge at the scheduler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CsiMode {
    Perfect,
    Imperfect,
}

impl CsiMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CsiMode::Perfect => "perfect",
            CsiMode::Imperfect => "imperfect",
        }
    }
}

/// Physical and protocol parameters of one subnetwork scenario.
///
/// Fields are kept in the units of the configuration file (dBm, MHz, bytes, ...) so that
/// a rendered configuration parses back bit-identically; the SI accessors below perform
/// the conversions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Side of the square deployment area, meters.
    pub area_m: f64,
    pub n_devices: usize,
    /// Number of secondary APs (relay deployments) or RISs (RIS deployments).
    pub n_helpers: usize,
    /// Reflecting elements per RIS; zero selects a relay deployment.
    pub ris_elements: usize,
    pub payload_bytes: u32,
    pub cycle_ms: f64,
    pub bandwidth_mhz: f64,
    pub carrier_ghz: f64,
    pub pmax_dbm: f64,
    pub noise_psd_dbm_hz: f64,
    pub shadow_std_db: f64,
    /// Linear Rician K-factor of the sAP to pAP links.
    pub rician_k: f64,
    /// Rate discount applied to estimated rates.
    pub theta: f64,
    /// Training symbols per device (relay) or per device and RIS (RIS deployments).
    pub pilots: u32,
    pub csi: CsiMode,
    pub seed: u64,
    pub path_loss_exponent: f64,
    /// Per-element reflection gain applied to every cascaded RIS channel, dB.
    pub ris_gain_db: f64,
    /// Fraction of the cycle reserved for relay processing in FDMA decode-and-forward.
    pub processing_fraction: f64,
    /// Relay processing time per two-hop device, microseconds.
    pub processing_time_us: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            area_m: 3.0,
            n_devices: 10,
            n_helpers: 1,
            ris_elements: 0,
            payload_bytes: 32,
            cycle_ms: 0.1,
            bandwidth_mhz: 100.0,
            carrier_ghz: 10.0,
            pmax_dbm: 30.0,
            noise_psd_dbm_hz: -174.0,
            shadow_std_db: 7.0,
            rician_k: 6.0,
            theta: 1.0,
            pilots: 4,
            csi: CsiMode::Perfect,
            seed: 1,
            path_loss_exponent: 2.6,
            ris_gain_db: 20.0,
            processing_fraction: 0.05,
            processing_time_us: 0.0,
        }
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * (watts * 1e3).log10()
}

impl ScenarioConfig {
    pub fn payload_bits(&self) -> f64 {
        f64::from(self.payload_bytes) * 8.0
    }

    pub fn cycle_s(&self) -> f64 {
        self.cycle_ms * 1e-3
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.bandwidth_mhz * 1e6
    }

    pub fn carrier_hz(&self) -> f64 {
        self.carrier_ghz * 1e9
    }

    pub fn p_max_w(&self) -> f64 {
        dbm_to_watts(self.pmax_dbm)
    }

    /// Noise power over the full band, `σ_0 = N_0 · W`, watts.
    pub fn noise_power_w(&self) -> f64 {
        dbm_to_watts(self.noise_psd_dbm_hz) * self.bandwidth_hz()
    }

    pub fn processing_time_s(&self) -> f64 {
        self.processing_time_us * 1e-6
    }

    pub fn ris_gain(&self) -> f64 {
        10f64.powf(self.ris_gain_db / 10.0)
    }

    pub fn is_ris(&self) -> bool {
        self.ris_elements > 0
    }

    /// Discount actually applied: forced to one under perfect CSI.
    pub fn effective_theta(&self) -> f64 {
        match self.csi {
            CsiMode::Perfect => 1.0,
            CsiMode::Imperfect => self.theta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        fn range(key: &str, ok: bool, reason: &str) -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::OutOfRange { key: key.into(), reason: reason.into() })
            }
        }
        range("area_m", self.area_m.is_finite() && self.area_m > 0.0, "must be > 0")?;
        range("n_devices", self.n_devices >= 1, "must be >= 1")?;
        range("cycle_ms", self.cycle_ms.is_finite() && self.cycle_ms > 0.0, "must be > 0")?;
        range("bandwidth_mhz", self.bandwidth_mhz.is_finite() && self.bandwidth_mhz > 0.0, "must be > 0")?;
        range("carrier_ghz", self.carrier_ghz.is_finite() && self.carrier_ghz > 0.0, "must be > 0")?;
        range("pmax_dbm", self.pmax_dbm.is_finite(), "must be finite")?;
        range("noise_psd_dbm_hz", self.noise_psd_dbm_hz.is_finite(), "must be finite")?;
        range("shadow_std_db", self.shadow_std_db.is_finite() && self.shadow_std_db >= 0.0, "must be >= 0")?;
        range("rician_k", self.rician_k >= 0.0, "must be >= 0")?;
        range("theta", self.theta > 0.0 && self.theta <= 1.0, "must lie in (0, 1]")?;
        range(
            "path_loss_exponent",
            self.path_loss_exponent.is_finite() && self.path_loss_exponent > 0.0,
            "must be > 0",
        )?;
        range("ris_gain_db", self.ris_gain_db.is_finite(), "must be finite")?;
        // Configuration files store the seed as a (signed) TOML integer.
        range("seed", self.seed <= i64::MAX as u64, "must be below 2^63")?;
        range(
            "processing_fraction",
            (0.0..1.0).contains(&self.processing_fraction),
            "must lie in [0, 1)",
        )?;
        range(
            "processing_time_us",
            self.processing_time_us.is_finite() && self.processing_time_us >= 0.0,
            "must be >= 0",
        )?;
        if self.is_ris() && self.csi == CsiMode::Imperfect {
            range(
                "pilots",
                self.pilots as usize > self.ris_elements,
                "RIS channel estimation needs at least ris_elements + 1 pilots",
            )?;
        }
        let budget = training_budget(self)?;
        range(
            "processing_time_us",
            self.processing_time_s() <= self.processing_fraction * budget.t_prime,
            "processing time must fit in processing_fraction of the usable cycle",
        )?;
        Ok(())
    }
}

/// Node positions of one subnetwork realization, meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub pap: [f64; 2],
    pub helpers: Vec<[f64; 2]>,
    pub devices: Vec<[f64; 2]>,
}

fn uniform_point(rng: &mut ChaCha8Rng, side: f64) -> [f64; 2] {
    [rng.random::<f64>() * side, rng.random::<f64>() * side]
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Uniform positions for the pAP, all helpers and all devices.
pub fn sample_topology(config: &ScenarioConfig, trial: u64) -> Topology {
    let seed = config.seed;
    let side = config.area_m;
    let pap = uniform_point(&mut stream_rng(seed, trial, Stream::PapPosition, 0, 0), side);
    let helpers = (0..config.n_helpers)
        .map(|k| uniform_point(&mut stream_rng(seed, trial, Stream::HelperPosition, k as u64, 0), side))
        .collect();
    let devices = (0..config.n_devices)
        .map(|n| uniform_point(&mut stream_rng(seed, trial, Stream::DevicePosition, n as u64, 0), side))
        .collect();
    Topology { pap, helpers, devices }
}

/// Log-distance path loss anchored at free-space loss at one meter.
pub fn path_loss_db(distance_m: f64, carrier_hz: f64, exponent: f64) -> f64 {
    let d = distance_m.max(MIN_DISTANCE_M);
    let pl0 = 20.0 * (4.0 * std::f64::consts::PI * REFERENCE_DISTANCE_M * carrier_hz / SPEED_OF_LIGHT).log10();
    pl0 + 10.0 * exponent * (d / REFERENCE_DISTANCE_M).log10()
}

/// Complex gains of every link class.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Links {
    /// Device to pAP, `h^d_n`.
    pub direct: Vec<Complex64>,
    /// Device to sAP, `h^s_{n,k}`, indexed `[n][k]`.
    pub device_helper: Vec<Vec<Complex64>>,
    /// sAP to pAP, `h^a_k`.
    pub helper_ap: Vec<Complex64>,
    /// Device to RIS element, indexed `[n][k][j]`.
    pub device_ris: Vec<Vec<Vec<Complex64>>>,
    /// RIS element to pAP, indexed `[k][j]`.
    pub ris_ap: Vec<Vec<Complex64>>,
    /// Cascaded device-RIS-pAP channel `u_{n,k}`, indexed `[n][k][j]`.
    pub cascade: Vec<Vec<Vec<Complex64>>>,
}

impl Links {
    /// Cascaded channels of device `n` stacked over all RISs (length `Q = Σ J_k`).
    pub fn stacked_cascade(&self, n: usize) -> Vec<Complex64> {
        self.cascade[n].iter().flatten().copied().collect()
    }
}

/// Per-link scalars (large-scale gains or estimation-error variances).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LinkScalars {
    pub direct: Vec<f64>,
    pub device_helper: Vec<Vec<f64>>,
    pub helper_ap: Vec<f64>,
    /// One value per (device, RIS) pair, shared by all elements.
    pub cascade: Vec<Vec<f64>>,
}

/// True channels, the scheduler's estimates, and the statistics linking them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSet {
    pub truth: Links,
    pub estimate: Links,
    /// Linear large-scale gain (path loss and shadowing) of each link.
    pub large_scale: LinkScalars,
    /// Normalized estimation-error variance `σ_e` of each link; zero under perfect CSI.
    pub error_variance: LinkScalars,
}

fn rayleigh(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn rician(rng: &mut ChaCha8Rng, k_factor: f64) -> Complex64 {
    let phase = rng.random::<f64>() * std::f64::consts::TAU;
    let los = Complex64::from_polar(1.0, phase);
    if k_factor.is_infinite() {
        return los;
    }
    let scatter = rayleigh(rng);
    los * (k_factor / (k_factor + 1.0)).sqrt() + scatter * (1.0 / (k_factor + 1.0)).sqrt()
}

struct LargeScaleModel {
    carrier_hz: f64,
    exponent: f64,
    shadow: Option<Normal<f64>>,
}

impl LargeScaleModel {
    fn new(config: &ScenarioConfig) -> Self {
        let shadow = (config.shadow_std_db > 0.0)
            .then(|| Normal::new(0.0, config.shadow_std_db).expect("validated shadow std"));
        Self { carrier_hz: config.carrier_hz(), exponent: config.path_loss_exponent, shadow }
    }

    /// Linear gain `10^{-(PL(d) + X)/10}`; the shadowing draw is the first use of `rng`.
    fn gain(&self, d: f64, rng: &mut ChaCha8Rng) -> f64 {
        let shadow_db = self.shadow.map_or(0.0, |s| s.sample(rng));
        10f64.powf(-(path_loss_db(d, self.carrier_hz, self.exponent) + shadow_db) / 10.0)
    }
}

/// `u_j = conj(h_dev_j) · h_ap_j`, i.e. `diag(h_devᴴ) h_ap`.
pub fn cascaded_channel(h_dev_ris: &[Complex64], h_ris_ap: &[Complex64]) -> Result<Vec<Complex64>> {
    if h_dev_ris.len() != h_ris_ap.len() {
        return Err(Error::LengthMismatch { expected: h_dev_ris.len(), actual: h_ris_ap.len() });
    }
    Ok(h_dev_ris.iter().zip(h_ris_ap).map(|(d, a)| d.conj() * a).collect())
}

/// Draws every link of one realization. The estimate equals the truth; see
/// [`apply_estimation_error`] for imperfect CSI.
pub fn sample_channels(topology: &Topology, config: &ScenarioConfig, trial: u64) -> ChannelSet {
    let seed = config.seed;
    let model = LargeScaleModel::new(config);
    let n_dev = topology.devices.len();
    let n_help = topology.helpers.len();
    let n_elem = config.ris_elements;

    let mut truth = Links::default();
    let mut ls = LinkScalars::default();

    for (n, &dev) in topology.devices.iter().enumerate() {
        let mut rng = stream_rng(seed, trial, Stream::Direct, n as u64, 0);
        let g = model.gain(distance(dev, topology.pap), &mut rng);
        truth.direct.push(rayleigh(&mut rng) * g.sqrt());
        ls.direct.push(g);
    }

    if n_elem == 0 {
        for (n, &dev) in topology.devices.iter().enumerate() {
            let (mut row, mut ls_row) = (Vec::with_capacity(n_help), Vec::with_capacity(n_help));
            for (k, &helper) in topology.helpers.iter().enumerate() {
                let mut rng = stream_rng(seed, trial, Stream::DeviceHelper, n as u64, k as u64);
                let g = model.gain(distance(dev, helper), &mut rng);
                row.push(rayleigh(&mut rng) * g.sqrt());
                ls_row.push(g);
            }
            truth.device_helper.push(row);
            ls.device_helper.push(ls_row);
        }
        for (k, &helper) in topology.helpers.iter().enumerate() {
            let mut rng = stream_rng(seed, trial, Stream::HelperAp, k as u64, 0);
            let g = model.gain(distance(helper, topology.pap), &mut rng);
            truth.helper_ap.push(rician(&mut rng, config.rician_k) * g.sqrt());
            ls.helper_ap.push(g);
        }
    } else {
        let ris_gain = config.ris_gain();
        let mut ap_gain = Vec::with_capacity(n_help);
        for (k, &ris) in topology.helpers.iter().enumerate() {
            let mut rng = stream_rng(seed, trial, Stream::RisAp, k as u64, 0);
            let g = model.gain(distance(ris, topology.pap), &mut rng);
            truth.ris_ap.push((0..n_elem).map(|_| rayleigh(&mut rng) * g.sqrt()).collect());
            ap_gain.push(g);
        }
        for (n, &dev) in topology.devices.iter().enumerate() {
            let (mut per_ris, mut casc, mut ls_row) = (Vec::new(), Vec::new(), Vec::new());
            for (k, &ris) in topology.helpers.iter().enumerate() {
                let mut rng = stream_rng(seed, trial, Stream::DeviceRis, n as u64, k as u64);
                let g = model.gain(distance(dev, ris), &mut rng);
                let h: Vec<Complex64> = (0..n_elem).map(|_| rayleigh(&mut rng) * g.sqrt()).collect();
                let u = cascaded_channel(&h, &truth.ris_ap[k]).expect("equal element counts");
                casc.push(u.into_iter().map(|x| x * ris_gain.sqrt()).collect());
                per_ris.push(h);
                ls_row.push(g * ap_gain[k] * ris_gain);
            }
            truth.device_ris.push(per_ris);
            truth.cascade.push(casc);
            ls.cascade.push(ls_row);
        }
    }

    let (device_helper, helper_ap, cascade) = if n_elem == 0 {
        (vec![vec![0.0; n_help]; n_dev], vec![0.0; n_help], Vec::new())
    } else {
        (Vec::new(), Vec::new(), vec![vec![0.0; n_help]; n_dev])
    };
    let error_variance = LinkScalars { direct: vec![0.0; n_dev], device_helper, helper_ap, cascade };
    ChannelSet { estimate: truth.clone(), truth, large_scale: ls, error_variance }
}

/// Normalized MMSE error variance `1 / (1 + L · SNR)` after `pilots` training symbols.
pub fn estimation_error_variance(pilots: f64, snr: f64) -> f64 {
    1.0 / (1.0 + pilots * snr)
}

/// Draws an estimate `ĥ` of `h` such that `ĥ ~ CN(0, (1-σ)G)` and `h - ĥ ~ CN(0, σG)`
/// independent of `ĥ`, conditioned on the already-drawn truth so that the true channel
/// is shared by every CSI setting of a paired comparison.
fn estimate_of(h: Complex64, sigma: f64, large_scale: f64, rng: &mut ChaCha8Rng) -> Complex64 {
    let spread = (sigma * (1.0 - sigma) * large_scale).max(0.0).sqrt();
    h * (1.0 - sigma) + rayleigh(rng) * spread
}

/// Replaces the perfect estimates of `channels` with MMSE-style estimates whose error
/// variance follows from pilot training at `p_max`.
///
/// The RIS hops are not individually identifiable, so only the direct and cascaded
/// channels are estimated in RIS deployments; `device_ris` and `ris_ap` keep their true
/// values in the estimate.
pub fn apply_estimation_error(channels: &ChannelSet, config: &ScenarioConfig, trial: u64) -> ChannelSet {
    let mut out = channels.clone();
    if config.csi == CsiMode::Perfect {
        return out;
    }
    let seed = config.seed;
    let pilots = f64::from(config.pilots);
    let snr_scale = config.p_max_w() / config.noise_power_w();
    let sigma_of = |g: f64| estimation_error_variance(pilots, g * snr_scale);
    let ls = &channels.large_scale;

    for (n, &h) in channels.truth.direct.iter().enumerate() {
        let s = sigma_of(ls.direct[n]);
        let mut rng = stream_rng(seed, trial, Stream::DirectEstimate, n as u64, 0);
        out.estimate.direct[n] = estimate_of(h, s, ls.direct[n], &mut rng);
        out.error_variance.direct[n] = s;
    }
    for (n, row) in channels.truth.device_helper.iter().enumerate() {
        for (k, &h) in row.iter().enumerate() {
            let g = ls.device_helper[n][k];
            let s = sigma_of(g);
            let mut rng = stream_rng(seed, trial, Stream::DeviceHelperEstimate, n as u64, k as u64);
            out.estimate.device_helper[n][k] = estimate_of(h, s, g, &mut rng);
            out.error_variance.device_helper[n][k] = s;
        }
    }
    for (k, &h) in channels.truth.helper_ap.iter().enumerate() {
        let g = ls.helper_ap[k];
        let s = sigma_of(g);
        let mut rng = stream_rng(seed, trial, Stream::HelperApEstimate, k as u64, 0);
        out.estimate.helper_ap[k] = estimate_of(h, s, g, &mut rng);
        out.error_variance.helper_ap[k] = s;
    }
    for (n, per_ris) in channels.truth.cascade.iter().enumerate() {
        for (k, u) in per_ris.iter().enumerate() {
            let g = ls.cascade[n][k];
            let s = sigma_of(g);
            let mut rng = stream_rng(seed, trial, Stream::CascadeEstimate, n as u64, k as u64);
            out.estimate.cascade[n][k] = u.iter().map(|&x| estimate_of(x, s, g, &mut rng)).collect();
            out.error_variance.cascade[n][k] = s;
        }
    }
    out
}

/// Cycle time left for uplink data after pilot training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingBudget {
    /// `T'`, seconds.
    pub t_prime: f64,
    /// Total pilot time subtracted from the cycle, seconds.
    pub training_time: f64,
}

/// `T' = T - N·L/W` for relays, `T' = T - N·K·L/W` for RISs, `T' = T` under perfect CSI.
pub fn training_budget(config: &ScenarioConfig) -> Result<TrainingBudget> {
    let cycle = config.cycle_s();
    let training_time = match config.csi {
        CsiMode::Perfect => 0.0,
        CsiMode::Imperfect => {
            let per_device = if config.is_ris() {
                config.n_helpers as f64 * f64::from(config.pilots)
            } else {
                f64::from(config.pilots)
            };
            config.n_devices as f64 * per_device / config.bandwidth_hz()
        }
    };
    let t_prime = cycle - training_time;
    if t_prime <= 0.0 {
        return Err(Error::TrainingExceedsCycle { training_s: training_time, cycle_s: cycle });
    }
    Ok(TrainingBudget { t_prime, training_time })
}

/// Topology, channels and (for imperfect CSI) estimates of one trial.
pub fn realize(config: &ScenarioConfig, trial: u64) -> (Topology, ChannelSet) {
    let topology = sample_topology(config, trial);
    let channels = sample_channels(&topology, config, trial);
    let channels = apply_estimation_error(&channels, config, trial);
    (topology, channels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn topology_inside_area_and_deterministic() {
        let cfg = ScenarioConfig { n_helpers: 4, ..Default::default() };
        let t = sample_topology(&cfg, 7);
        for p in t.devices.iter().chain(&t.helpers).chain(std::iter::once(&t.pap)) {
            assert!((0.0..=3.0).contains(&p[0]) && (0.0..=3.0).contains(&p[1]));
        }
        assert_eq!(t, sample_topology(&cfg, 7));
        assert_ne!(t, sample_topology(&cfg, 8));
    }

    #[test]
    fn zero_area_rejected() {
        let cfg = ScenarioConfig { area_m: 0.0, ..Default::default() };
        assert!(matches!(cfg.validate(), Err(Error::OutOfRange { key, .. }) if key == "area_m"));
    }

    #[test]
    fn path_loss_identities() {
        let f = 10e9;
        let n = 2.6;
        assert_relative_eq!(
            path_loss_db(2.0, f, n) - path_loss_db(1.0, f, n),
            10.0 * n * 2f64.log10(),
            epsilon = 1e-12
        );
        let pl0 = 20.0 * (4.0 * std::f64::consts::PI * f / SPEED_OF_LIGHT).log10();
        assert_relative_eq!(path_loss_db(1.0, f, n), pl0, epsilon = 1e-12);
        assert!(path_loss_db(3.0, f, n) > path_loss_db(1.0, f, n));
        assert_eq!(path_loss_db(0.0, f, n), path_loss_db(MIN_DISTANCE_M, f, n));
    }

    #[test]
    fn cascade_examples() {
        let u = cascaded_channel(&[c(1., 0.), c(1., 0.)], &[c(1., 0.), c(1., 0.)]).unwrap();
        assert_eq!(u, vec![c(1., 0.), c(1., 0.)]);
        // conj(i) * i = 1
        let u = cascaded_channel(&[c(0., 1.)], &[c(0., 1.)]).unwrap();
        assert_relative_eq!(u[0].re, 1.0);
        assert_relative_eq!(u[0].im, 0.0);
        let u = cascaded_channel(&[c(0., 0.); 3], &[c(0.3, -2.); 3]).unwrap();
        assert!(u.iter().all(|x| x.norm() == 0.0));
        assert!(matches!(cascaded_channel(&[c(1., 0.)], &[]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn error_variance_examples() {
        assert_eq!(estimation_error_variance(0.0, 5.0), 1.0);
        assert_relative_eq!(estimation_error_variance(4.0, 1.0), 0.2);
        assert!(estimation_error_variance(4.0, 1e18) < 1e-18);
        assert!(estimation_error_variance(5.0, 1.0) < estimation_error_variance(4.0, 1.0));
    }

    #[test]
    fn training_budget_examples() {
        let cfg = ScenarioConfig { csi: CsiMode::Imperfect, pilots: 4, ..Default::default() };
        let b = training_budget(&cfg).unwrap();
        assert_relative_eq!(b.t_prime, 99.6e-6, max_relative = 1e-12);
        let cfg0 = ScenarioConfig { pilots: 0, ..cfg.clone() };
        assert_eq!(training_budget(&cfg0).unwrap().t_prime, cfg0.cycle_s());
        let ris = ScenarioConfig { n_helpers: 4, ris_elements: 16, pilots: 17, ..cfg.clone() };
        assert_relative_eq!(training_budget(&ris).unwrap().training_time, 6.8e-6, max_relative = 1e-12);
        let perfect = ScenarioConfig { csi: CsiMode::Perfect, ..ris };
        assert_eq!(training_budget(&perfect).unwrap().t_prime, perfect.cycle_s());
        let huge = ScenarioConfig { pilots: 10_000, ..cfg };
        assert!(matches!(training_budget(&huge), Err(Error::TrainingExceedsCycle { .. })));
    }

    #[test]
    fn rician_limit_is_pure_los() {
        let mut rng = stream_rng(1, 0, Stream::HelperAp, 0, 0);
        for _ in 0..100 {
            assert_relative_eq!(rician(&mut rng, f64::INFINITY).norm(), 1.0, epsilon = 1e-12);
        }
        let near = (0..100).map(|_| (rician(&mut rng, 1e12).norm() - 1.0).abs()).fold(0.0, f64::max);
        assert!(near < 1e-4);
    }

    #[test]
    fn no_shadowing_gives_deterministic_path_gain() {
        let cfg = ScenarioConfig { shadow_std_db: 0.0, n_helpers: 2, ..Default::default() };
        let topo = sample_topology(&cfg, 3);
        let ch = sample_channels(&topo, &cfg, 3);
        for (n, dev) in topo.devices.iter().enumerate() {
            let expected = 10f64.powf(-path_loss_db(distance(*dev, topo.pap), cfg.carrier_hz(), 2.6) / 10.0);
            assert_relative_eq!(ch.large_scale.direct[n], expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn rayleigh_and_rician_unit_power() {
        let trials = 100_000;
        let mut rng = stream_rng(9, 0, Stream::Direct, 0, 0);
        let ray: f64 = (0..trials).map(|_| rayleigh(&mut rng).norm_sqr()).sum::<f64>() / trials as f64;
        assert!((ray - 1.0).abs() < 0.02, "rayleigh mean power {ray}");
        let ric: f64 = (0..trials).map(|_| rician(&mut rng, 6.0).norm_sqr()).sum::<f64>() / trials as f64;
        // |h|^2 of a K=6 Rician has std well below 1, so 3σ_MC < 0.01.
        assert!((ric - 1.0).abs() < 0.01, "rician mean power {ric}");
    }

    #[test]
    fn perfect_csi_estimate_equals_truth() {
        let cfg = ScenarioConfig { n_helpers: 2, ..Default::default() };
        let (_, ch) = realize(&cfg, 5);
        assert_eq!(ch.truth, ch.estimate);
        assert!(ch.error_variance.direct.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn estimation_error_moments() {
        let trials = 100_000;
        let large_scale: f64 = 2.5e-6;
        for sigma in [0.05, 0.3] {
            let mut rng = stream_rng(11, 0, Stream::DirectEstimate, 0, 0);
            let (mut err_pow, mut est_pow, mut cross) = (0.0, 0.0, Complex64::new(0.0, 0.0));
            for _ in 0..trials {
                let h = rayleigh(&mut rng) * large_scale.sqrt();
                let e = estimate_of(h, sigma, large_scale, &mut rng);
                err_pow += (h - e).norm_sqr();
                est_pow += e.norm_sqr();
                cross += (h - e) * e.conj();
            }
            let t = trials as f64;
            assert_relative_eq!(err_pow / t, sigma * large_scale, max_relative = 0.03);
            assert_relative_eq!(est_pow / t, (1.0 - sigma) * large_scale, max_relative = 0.03);
            assert!((cross / t).norm() < 0.02 * large_scale);
        }
        let mut rng = stream_rng(11, 1, Stream::DirectEstimate, 0, 0);
        let h = Complex64::new(0.7, -0.2);
        assert_eq!(estimate_of(h, 0.0, 1.0, &mut rng), h);
        assert_eq!(estimate_of(h, 1.0, 1.0, &mut rng), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn adding_helpers_keeps_existing_draws() {
        let small = ScenarioConfig { n_helpers: 1, ..Default::default() };
        let big = ScenarioConfig { n_helpers: 4, ..Default::default() };
        let (ts, cs) = realize(&small, 12);
        let (tb, cb) = realize(&big, 12);
        assert_eq!(ts.helpers[0], tb.helpers[0]);
        assert_eq!(cs.truth.direct, cb.truth.direct);
        assert_eq!(cs.truth.helper_ap[0], cb.truth.helper_ap[0]);
        for n in 0..10 {
            assert_eq!(cs.truth.device_helper[n][0], cb.truth.device_helper[n][0]);
        }
    }

    #[test]
    fn ris_elements_are_prefix_stable() {
        let base = ScenarioConfig { n_helpers: 2, ris_elements: 16, pilots: 17, ..Default::default() };
        let bigger = ScenarioConfig { ris_elements: 64, pilots: 65, ..base.clone() };
        let (_, a) = realize(&base, 4);
        let (_, b) = realize(&bigger, 4);
        assert_eq!(a.truth.cascade[3][1][..], b.truth.cascade[3][1][..16]);
    }

    #[test]
    fn imperfect_csi_sigma_in_unit_interval() {
        let cfg = ScenarioConfig {
            n_helpers: 3,
            ris_elements: 8,
            pilots: 9,
            csi: CsiMode::Imperfect,
            theta: 0.9,
            ..Default::default()
        };
        let (_, ch) = realize(&cfg, 2);
        for s in ch.error_variance.direct.iter().chain(ch.error_variance.cascade.iter().flatten()) {
            assert!((0.0..=1.0).contains(s));
        }
        assert_ne!(ch.truth.cascade, ch.estimate.cascade);
        assert_eq!(ch.truth.ris_ap, ch.estimate.ris_ap);
    }
}
