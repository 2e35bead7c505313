//! Communication case study: spectral efficiency vs. SNR for each
//! architecture over seeded channel realizations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, CarrierConfig, Direction};
use crate::propagation::{user_channel, ChannelModel};
use crate::scenario::{build_instance, SystemLayout};
use crate::synthesis::{ArchInstance, ArchitectureSpec, OptimizerBudget};
use crate::util::{db_to_linear, derive_seed, mean, sample_std};

const STREAM_DIRECTION: u64 = 1;
const STREAM_CHANNEL: u64 = 2;
const STREAM_CONFIGURE: u64 = 3;

/// Shannon rate of a scalar link: log2(1 + snr·|gain|²).
pub fn spectral_efficiency(gain: Complex64, snr_linear: f64) -> f64 {
    (1.0 + snr_linear * gain.norm_sqr()).log2()
}

/// Scenario for the communication benchmark.
#[derive(Debug, Clone)]
pub struct CommScenario {
    pub aperture: ArrayGeometry,
    pub layout: SystemLayout,
    pub specs: Vec<ArchitectureSpec>,
    pub snr_grid_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub channel: ChannelModel,
    /// Azimuth interval the user direction is drawn from, radians.
    pub direction_sector: (f64, f64),
    pub budget: OptimizerBudget,
}

impl CommScenario {
    /// Defaults: −10…30 dB in 5 dB steps, 200 trials, rician k = 5 dB with
    /// four paths, users drawn from a ±60° azimuth sector.
    pub fn new(
        aperture: ArrayGeometry,
        layout: SystemLayout,
        specs: Vec<ArchitectureSpec>,
        seed: u64,
    ) -> Self {
        let sector = 60f64.to_radians();
        Self {
            aperture,
            layout,
            specs,
            snr_grid_db: (0..9).map(|i| -10.0 + 5.0 * i as f64).collect(),
            trials: 200,
            seed,
            channel: ChannelModel::Rician {
                k_factor: db_to_linear(5.0),
                path_count: 4,
            },
            direction_sector: (-sector, sector),
            budget: OptimizerBudget::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::InvalidScenario("trials must be at least 1".into()));
        }
        if self.snr_grid_db.is_empty() {
            return Err(Error::InvalidScenario("SNR grid is empty".into()));
        }
        if self.snr_grid_db.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidScenario(
                "SNR grid must be strictly increasing".into(),
            ));
        }
        if self.specs.is_empty() {
            return Err(Error::InvalidScenario("no architectures selected".into()));
        }
        if !(self.direction_sector.0 < self.direction_sector.1) {
            return Err(Error::InvalidScenario("empty direction sector".into()));
        }
        self.channel.validate()?;
        Ok(())
    }
}

/// One aggregated result row.
#[derive(Debug, Clone, PartialEq)]
pub struct CommRow {
    pub arch: &'static str,
    pub snr_db: f64,
    pub mean_se: f64,
    pub std_se: f64,
    pub trials: usize,
}

#[derive(Debug, Clone)]
pub struct CommResult {
    pub rows: Vec<CommRow>,
    pub failed_trials: usize,
}

/// Runs the communication Monte Carlo: every architecture is configured on
/// the same channel realization per trial. A trial where any configurator
/// fails is excluded and counted; more than 5% failures aborts the run.
/// Deterministic for a fixed seed.
pub fn run_comm_experiment(scenario: &CommScenario) -> Result<CommResult> {
    scenario.validate()?;
    let instances: Vec<ArchInstance> = scenario
        .specs
        .iter()
        .map(|s| build_instance(s, &scenario.aperture, &scenario.layout, scenario.budget))
        .collect::<Result<_>>()?;

    let per_trial: Vec<Result<Vec<f64>>> = (0..scenario.trials)
        .into_par_iter()
        .map(|trial| trial_gains(scenario, &instances, trial as u64))
        .collect();

    let mut gains: Vec<Vec<f64>> = vec![Vec::new(); instances.len()];
    let mut failed = 0usize;
    for outcome in per_trial {
        match outcome {
            Ok(trial_gains) => {
                for (a, g) in trial_gains.into_iter().enumerate() {
                    gains[a].push(g);
                }
            }
            Err(_) => failed += 1,
        }
    }
    if failed * 20 > scenario.trials {
        return Err(Error::TooManyFailures {
            failed,
            total: scenario.trials,
        });
    }

    let mut rows = Vec::new();
    for (a, inst) in instances.iter().enumerate() {
        for &snr_db in &scenario.snr_grid_db {
            let snr = db_to_linear(snr_db);
            let se: Vec<f64> = gains[a]
                .iter()
                .map(|g| spectral_efficiency(Complex64::new(*g, 0.0), snr))
                .collect();
            let m = mean(&se);
            rows.push(CommRow {
                arch: inst.label(),
                snr_db,
                mean_se: m,
                std_se: sample_std(&se, m),
                trials: se.len(),
            });
        }
    }
    Ok(CommResult {
        rows,
        failed_trials: failed,
    })
}

fn trial_gains(
    scenario: &CommScenario,
    instances: &[ArchInstance],
    trial: u64,
) -> Result<Vec<f64>> {
    let mut dir_rng =
        ChaCha8Rng::seed_from_u64(derive_seed(scenario.seed, STREAM_DIRECTION, trial));
    let azimuth = dir_rng.random_range(scenario.direction_sector.0..scenario.direction_sector.1);
    let dir = Direction::azimuth_cut(azimuth)
        .map_err(|_| Error::InvalidScenario("direction sector out of range".into()))?;
    let h = user_channel(
        &scenario.aperture,
        dir,
        &scenario.layout.carrier,
        scenario.channel,
        derive_seed(scenario.seed, STREAM_CHANNEL, trial),
    )?;
    instances
        .iter()
        .enumerate()
        .map(|(a, inst)| {
            let seed = derive_seed(scenario.seed, STREAM_CONFIGURE, trial * 64 + a as u64);
            inst.configure_comm(&h, seed).map(|sol| sol.gain)
        })
        .collect()
}

/// Carrier used by the default desk-scale benchmarks: 10 mm wavelength.
pub fn default_carrier() -> CarrierConfig {
    CarrierConfig::with_wavelength(0.01).expect("valid default carrier")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{default_aperture, default_specs};

    fn small_scenario(trials: usize, seed: u64) -> CommScenario {
        let carrier = default_carrier();
        let aperture = default_aperture(&carrier);
        let layout = SystemLayout::new(carrier);
        let lam = layout.carrier.wavelength();
        let mut sc = CommScenario::new(
            aperture,
            layout,
            default_specs(81, 4, 2, lam / 2.0),
            seed,
        );
        sc.trials = trials;
        sc.budget = OptimizerBudget {
            iterations: 30,
            restarts: 2,
        };
        sc
    }

    #[test]
    fn digital_and_milac_rows_are_identical() {
        let mut sc = small_scenario(3, 5);
        sc.specs = vec![
            ArchitectureSpec::Digital { m: 81 },
            ArchitectureSpec::Milac { m: 81, k: 4 },
        ];
        sc.channel = ChannelModel::LineOfSight;
        let result = run_comm_experiment(&sc).unwrap();
        let digital: Vec<_> = result.rows.iter().filter(|r| r.arch == "digital").collect();
        let milac: Vec<_> = result.rows.iter().filter(|r| r.arch == "milac").collect();
        assert_eq!(digital.len(), milac.len());
        for (d, m) in digital.iter().zip(milac.iter()) {
            assert_eq!(d.mean_se, m.mean_se);
            assert_eq!(d.std_se, m.std_se);
        }
    }

    #[test]
    fn mean_se_is_nondecreasing_in_snr() {
        let sc = small_scenario(4, 7);
        let result = run_comm_experiment(&sc).unwrap();
        for spec in &sc.specs {
            let series: Vec<f64> = result
                .rows
                .iter()
                .filter(|r| r.arch == spec.label())
                .map(|r| r.mean_se)
                .collect();
            assert_eq!(series.len(), sc.snr_grid_db.len());
            for w in series.windows(2) {
                assert!(w[1] >= w[0] - 1e-12);
            }
        }
    }

    #[test]
    fn reruns_are_bit_identical() {
        let sc = small_scenario(3, 11);
        let a = run_comm_experiment(&sc).unwrap();
        let b = run_comm_experiment(&sc).unwrap();
        assert_eq!(a.rows.len(), b.rows.len());
        for (x, y) in a.rows.iter().zip(b.rows.iter()) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn per_trial_ordering_digital_ge_cascades() {
        let sc = small_scenario(5, 13);
        let carrier = default_carrier();
        let aperture = default_aperture(&carrier);
        let instances: Vec<ArchInstance> = sc
            .specs
            .iter()
            .map(|s| build_instance(s, &aperture, &sc.layout, sc.budget).unwrap())
            .collect();
        for trial in 0..5u64 {
            let gains = trial_gains(&sc, &instances, trial).unwrap();
            let by_label: std::collections::HashMap<&str, f64> = instances
                .iter()
                .map(|i| i.label())
                .zip(gains.iter().cloned())
                .collect();
            let digital = by_label["digital"];
            assert_eq!(digital, by_label["milac"]);
            assert!(digital + 1e-9 >= by_label["bdris_full"]);
            assert!(digital + 1e-9 >= by_label["hybrid"]);
            assert!(by_label["bdris_full"] + 1e-9 >= by_label["sim"]);
        }
    }

    #[test]
    fn spectral_efficiency_examples() {
        assert!((spectral_efficiency(Complex64::new(1.0, 0.0), 1.0) - 1.0).abs() < 1e-15);
        assert_eq!(spectral_efficiency(Complex64::default(), 123.0), 0.0);
        let se = spectral_efficiency(Complex64::new(3.0, 0.0), 1.0);
        assert!((se - 10f64.log2()).abs() < 1e-12);
    }
}
