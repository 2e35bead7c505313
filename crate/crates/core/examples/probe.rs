// Temporary tuning probe: mean gain ratios vs the digital baseline for the
// metasurface stack across layer counts, spacings, and budgets.

use wavebench_core::comm::default_carrier;
use wavebench_core::propagation::{user_channel, ChannelModel};
use wavebench_core::scenario::{build_instance, default_aperture, SystemLayout};
use wavebench_core::{ArchitectureSpec, Direction, OptimizerBudget};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let carrier = default_carrier();
    let aperture = default_aperture(&carrier);
    let layout = SystemLayout::new(carrier.clone());
    let lam = carrier.wavelength();
    let trials = 12;

    // Draw shared channels.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let channels: Vec<_> = (0..trials)
        .map(|t| {
            let az = rng.random_range(-1.0..1.0f64);
            user_channel(
                &aperture,
                Direction::azimuth_cut(az).unwrap(),
                &carrier,
                ChannelModel::Rician {
                    k_factor: 10f64.powf(0.5),
                    path_count: 4,
                },
                1000 + t,
            )
            .unwrap()
        })
        .collect();

    let hybrid_inst = build_instance(
        &ArchitectureSpec::Hybrid { m: 81, k: 4 },
        &aperture,
        &layout,
        OptimizerBudget::default(),
    )
    .unwrap();
    let mut hybrid_ratio = 0.0;
    for h in &channels {
        let sol = hybrid_inst.configure_comm(h, 0).unwrap();
        hybrid_ratio += sol.gain / h.gains().norm();
    }
    println!("hybrid mean ratio {:.4}", hybrid_ratio / trials as f64);

    for layers in [1usize, 2, 3] {
        for spacing_frac in [0.5f64, 0.25, 0.125] {
            for (iters, restarts) in [(500usize, 4usize), (1500, 6)] {
                let spec = ArchitectureSpec::Sim {
                    m: 81,
                    k: 4,
                    layers,
                    layer_spacing: spacing_frac * lam,
                };
                let inst = build_instance(
                    &spec,
                    &aperture,
                    &layout,
                    OptimizerBudget {
                        iterations: iters,
                        restarts,
                    },
                )
                .unwrap();
                let t0 = std::time::Instant::now();
                let mut ratio = 0.0;
                for (t, h) in channels.iter().enumerate() {
                    let sol = inst.configure_comm(h, 5000 + t as u64).unwrap();
                    ratio += sol.gain / h.gains().norm();
                }
                println!(
                    "L={layers} spacing={:.3}λ budget=({iters},{restarts}): ratio {:.4}  ({:?})",
                    spacing_frac,
                    ratio / trials as f64,
                    t0.elapsed()
                );
            }
        }
    }
}
